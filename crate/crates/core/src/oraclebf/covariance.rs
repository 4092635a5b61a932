use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sigcore::{Spectrogram, Stft};
use crate::tensor::Mat;

/// Relative diagonal loading: `δ · tr(Φ)/N` is added to the diagonal.
pub const DIAGONAL_LOADING: f64 = 1e-6;

/// Binary time-frequency mask (`T×F`, entries 0 or 1).
#[derive(Clone, Debug, PartialEq)]
pub struct IdealBinaryMask {
    pub mask: Mat,
}

impl IdealBinaryMask {
    /// `1 − m`.
    pub fn complement(&self) -> IdealBinaryMask {
        let data = self.mask.data.iter().map(|m| 1.0 - m).collect();
        IdealBinaryMask {
            mask: Mat::from_vec(self.mask.rows, self.mask.cols, data),
        }
    }
}

/// 1 where the target magnitude exceeds the interference magnitude, else 0 (ties
/// give 0).
pub fn ideal_binary_mask(target_mag: &Mat, interference_mag: &Mat) -> Result<IdealBinaryMask> {
    if target_mag.shape() != interference_mag.shape() {
        return Err(Error::Shape("ibm: magnitude shapes differ".into()));
    }
    let data = target_mag
        .data
        .iter()
        .zip(&interference_mag.data)
        .map(|(t, i)| if t > i { 1.0 } else { 0.0 })
        .collect();
    Ok(IdealBinaryMask {
        mask: Mat::from_vec(target_mag.rows, target_mag.cols, data),
    })
}

/// `T×F` magnitudes of a spectrogram.
pub fn magnitudes(spec: &Spectrogram) -> Mat {
    let rows: Vec<Vec<f64>> = spec
        .frames
        .iter()
        .map(|f| f.iter().map(|c| c.norm()).collect())
        .collect();
    Mat::from_rows(&rows)
}

/// Per-frequency spatial covariance `Φ(f)` (without loading) and mask mass.
#[derive(Clone, Debug)]
pub struct SpatialCovariance {
    pub phi: Vec<DMatrix<Complex64>>,
    pub weight: Vec<f64>,
}

impl SpatialCovariance {
    pub fn n_bins(&self) -> usize {
        self.phi.len()
    }

    pub fn n_channels(&self) -> usize {
        self.phi.first().map_or(0, |p| p.nrows())
    }

    /// `Φ(f) + δ·tr(Φ(f))/N · I`.
    pub fn loaded(&self, f: usize) -> DMatrix<Complex64> {
        let p = &self.phi[f];
        let n = p.nrows();
        let tr: f64 = (0..n).map(|i| p[(i, i)].re).sum();
        let mut out = p.clone();
        let d = DIAGONAL_LOADING * tr / n as f64;
        for i in 0..n {
            out[(i, i)] += Complex64::new(d, 0.0);
        }
        out
    }
}

/// Frame range `[start, end)` whose centers fall in `[start_ms, start_ms + len_ms)`.
/// Frame `t` of an [`Stft`] is centered on sample `t · hop`.
pub fn segment_frames(stft: &Stft, sample_rate: u32, n_frames: usize, start_ms: f64, len_ms: f64) -> Result<(usize, usize)> {
    if !(start_ms >= 0.0) || !(len_ms > 0.0) {
        return Err(Error::InvalidInput("segment needs start ≥ 0 and length > 0".into()));
    }
    let to_samples = |ms: f64| ms * sample_rate as f64 / 1000.0;
    let (a, b) = (to_samples(start_ms), to_samples(start_ms + len_ms));
    let first = (a / stft.hop as f64).ceil() as usize;
    let end = ((b / stft.hop as f64).ceil() as usize).min(n_frames);
    if first >= end {
        return Err(Error::InvalidInput(format!(
            "segment [{start_ms}, {}) ms contains no stft frame",
            start_ms + len_ms
        )));
    }
    Ok((first, end))
}

/// Mask-weighted covariance `Σ_t m(t,f) X Xᴴ / Σ_t m(t,f)` over frames
/// `frames.0..frames.1` (all frames if `None`). Frequencies with zero mask mass fall
/// back to the unmasked estimate.
pub fn estimate_covariance(
    stfts: &[Spectrogram],
    mask: Option<&IdealBinaryMask>,
    frames: Option<(usize, usize)>,
) -> Result<SpatialCovariance> {
    let n = stfts.len();
    let first = stfts
        .first()
        .ok_or_else(|| Error::InvalidInput("covariance needs at least one channel".into()))?;
    let (t_len, f_len) = (first.n_frames(), first.n_bins());
    if stfts.iter().any(|s| s.n_frames() != t_len || s.n_bins() != f_len) {
        return Err(Error::Shape("channel spectrograms differ in shape".into()));
    }
    if let Some(m) = mask {
        if m.mask.shape() != (t_len, f_len) {
            return Err(Error::Shape(format!(
                "mask is {:?}, stft is {:?}",
                m.mask.shape(),
                (t_len, f_len)
            )));
        }
    }
    let (t0, t1) = frames.unwrap_or((0, t_len));
    if t0 >= t1 || t1 > t_len {
        return Err(Error::InvalidInput("empty or out-of-range frame range".into()));
    }
    let mut phi = Vec::with_capacity(f_len);
    let mut weight = Vec::with_capacity(f_len);
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for f in 0..f_len {
        let accumulate = |use_mask: bool, x: &mut Vec<Complex64>| {
            let mut acc = DMatrix::<Complex64>::zeros(n, n);
            let mut mass = 0.0;
            for t in t0..t1 {
                let m = if use_mask { mask.map_or(1.0, |m| m.mask.get(t, f)) } else { 1.0 };
                if m == 0.0 {
                    continue;
                }
                for (xi, s) in x.iter_mut().zip(stfts) {
                    *xi = s.frames[t][f];
                }
                for i in 0..n {
                    for j in 0..n {
                        acc[(i, j)] += x[i] * x[j].conj() * m;
                    }
                }
                mass += m;
            }
            (acc, mass)
        };
        let (mut acc, mut mass) = accumulate(true, &mut x);
        if mass <= 0.0 {
            (acc, mass) = accumulate(false, &mut x);
        }
        acc /= Complex64::new(mass, 0.0);
        phi.push(acc);
        weight.push(mass);
    }
    Ok(SpatialCovariance { phi, weight })
}
