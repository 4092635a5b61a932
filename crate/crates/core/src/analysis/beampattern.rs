use std::io::Write;
use std::path::Path;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scenesim::{ArraySpec, SPEED_OF_SOUND};
use crate::tensor::Mat;

/// Floor of the normalized pattern in dB.
pub const PATTERN_FLOOR_DB: f64 = -40.0;

/// Frequencies `0, 62.5, …` up to `min(8 kHz, fs/2)`.
pub fn default_freq_grid(sample_rate: u32) -> Vec<f64> {
    let top = (sample_rate as f64 / 2.0).min(8000.0);
    let n = (top / 62.5).floor() as usize;
    (0..=n).map(|k| k as f64 * 62.5).collect()
}

/// DOAs `0°, 1°, …, 359°`.
pub fn default_doa_grid() -> Vec<f64> {
    (0..360).map(|d| d as f64).collect()
}

/// Far-field response magnitudes `|B(f, θ)|`, rows are frequencies, columns DOAs.
#[derive(Clone, Debug, PartialEq)]
pub struct Beampattern {
    pub freqs: Vec<f64>,
    pub doas: Vec<f64>,
    pub magnitude: Mat,
}

/// Arrival delay at microphone `i` relative to the array center for a plane wave from
/// azimuth `doa_deg` (counter-clockwise from +x).
pub fn plane_wave_delay(array: &ArraySpec, i: usize, doa_deg: f64) -> f64 {
    let o = array.mic_offset(i);
    let t = doa_deg.to_radians();
    -(o[0] * t.cos() + o[1] * t.sin()) / SPEED_OF_SOUND
}

/// `B(f, θ) = |Σ_i H_i(f) exp(−j2πf τ_i(θ))|`.
///
/// `filters[i]` are the taps applied to microphone `i` as a sliding inner product
/// `y[n] = Σ_j h[j] x[n + j − center]`, so `H_i(f) = Σ_j h[j] e^{j2πf(j − center)/fs}`.
pub fn beampattern(
    filters: &[Vec<f64>],
    center: usize,
    array: &ArraySpec,
    sample_rate: u32,
    freqs: &[f64],
    doas: &[f64],
) -> Result<Beampattern> {
    if freqs.is_empty() || doas.is_empty() {
        return Err(Error::InvalidInput("beampattern grids must be non-empty".into()));
    }
    if filters.len() != array.n_mics {
        return Err(Error::Shape(format!(
            "{} filters for {} microphones",
            filters.len(),
            array.n_mics
        )));
    }
    let fs = sample_rate as f64;
    let mut magnitude = Mat::zeros(freqs.len(), doas.len());
    for (fi, &f) in freqs.iter().enumerate() {
        let w = 2.0 * std::f64::consts::PI * f;
        let responses: Vec<Complex64> = filters
            .iter()
            .map(|h| {
                h.iter()
                    .enumerate()
                    .map(|(j, &v)| Complex64::from_polar(v, w * (j as f64 - center as f64) / fs))
                    .sum()
            })
            .collect();
        for (di, &doa) in doas.iter().enumerate() {
            let b: Complex64 = responses
                .iter()
                .enumerate()
                .map(|(i, &h)| h * Complex64::from_polar(1.0, -w * plane_wave_delay(array, i, doa)))
                .sum();
            magnitude.set(fi, di, b.norm());
        }
    }
    Ok(Beampattern {
        freqs: freqs.to_vec(),
        doas: doas.to_vec(),
        magnitude,
    })
}

impl Beampattern {
    /// `20 log10 |B|` without normalization, floored at `1e-12` magnitude.
    pub fn raw_db(&self) -> Mat {
        let mut m = self.magnitude.clone();
        m.data.iter_mut().for_each(|v| *v = 20.0 * v.max(1e-12).log10());
        m
    }

    /// Each frequency row scaled to its own maximum, in dB, clipped at `floor_db`.
    /// All-zero rows map to the floor.
    pub fn normalized_db(&self, floor_db: f64) -> Mat {
        let mut m = self.magnitude.clone();
        for r in 0..m.rows {
            let row = m.row_mut(r);
            let peak = row.iter().cloned().fold(0.0, f64::max);
            for v in row.iter_mut() {
                *v = if peak > 0.0 && *v > 0.0 {
                    (20.0 * (*v / peak).log10()).max(floor_db)
                } else {
                    floor_db
                };
            }
        }
        m
    }

    /// DOA of the maximum at frequency row `fi`.
    pub fn peak_doa(&self, fi: usize) -> f64 {
        let row = self.magnitude.row(fi);
        let k = row
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (k, &v)| if v > b.1 { (k, v) } else { b })
            .0;
        self.doas[k]
    }

    /// `freq,doa,db` rows for the given dB matrix.
    pub fn write_csv(&self, path: impl AsRef<Path>, db: &Mat) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("freq_hz,doa_deg,db\n");
        for (fi, f) in self.freqs.iter().enumerate() {
            for (di, d) in self.doas.iter().enumerate() {
                out.push_str(&format!("{f},{d},{}\n", db.get(fi, di)));
            }
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Binary PGM raster of a dB matrix: frequency increases upward, DOA to the right,
/// `floor_db` is black and the matrix maximum white.
pub fn write_pgm(path: impl AsRef<Path>, db: &Mat, floor_db: f64) -> Result<()> {
    let path = path.as_ref();
    let top = db.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (top - floor_db).max(1e-12);
    let mut buf = format!("P5\n{} {}\n255\n", db.cols, db.rows).into_bytes();
    for r in (0..db.rows).rev() {
        for &v in db.row(r) {
            buf.push((((v - floor_db) / span).clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Windowed-sinc filters that advance microphone `i` by its plane-wave delay from
/// `doa_deg`, aligning all channels at the array center. `2·center + 1` taps.
pub fn steering_filters(array: &ArraySpec, doa_deg: f64, sample_rate: u32, center: usize) -> Vec<Vec<f64>> {
    let fs = sample_rate as f64;
    let taps = 2 * center + 1;
    (0..array.n_mics)
        .map(|i| {
            let a = plane_wave_delay(array, i, doa_deg) * fs;
            (0..taps)
                .map(|j| {
                    let x = j as f64 - center as f64 - a;
                    let sinc = if x.abs() < 1e-12 {
                        1.0
                    } else {
                        (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
                    };
                    let win = 0.5 + 0.5 * (std::f64::consts::PI * (j as f64 - center as f64) / (center as f64 + 1.0)).cos();
                    sinc * win / array.n_mics as f64
                })
                .collect()
        })
        .collect()
}
