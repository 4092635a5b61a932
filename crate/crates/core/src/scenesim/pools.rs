use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::sigcore::read_wav;

/// Mono source signals at a common sample rate.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalPool {
    pub signals: Vec<Vec<f64>>,
    pub sample_rate: u32,
}

impl SignalPool {
    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    /// Every `.wav` file in a directory (first channel only), sorted by file name.
    pub fn from_wav_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
            .collect();
        paths.sort();
        let mut signals = Vec::new();
        let mut rate = None;
        for p in paths {
            let x = read_wav(&p)?;
            match rate {
                None => rate = Some(x.sample_rate()),
                Some(r) if r != x.sample_rate() => {
                    return Err(Error::InvalidInput(format!(
                        "{}: sample rate {} differs from {r}",
                        p.display(),
                        x.sample_rate()
                    )))
                }
                _ => {}
            }
            signals.push(x.channel(0).to_vec());
        }
        let sample_rate = rate.ok_or_else(|| Error::InvalidInput(format!("no wav files in {}", dir.display())))?;
        Ok(SignalPool {
            signals,
            sample_rate,
        })
    }

    /// `len` samples of signal `index` starting at `offset`, wrapping around.
    pub fn excerpt(&self, index: usize, offset: usize, len: usize) -> Vec<f64> {
        let s = &self.signals[index];
        (0..len).map(|n| s[(offset + n) % s.len()]).collect()
    }
}

fn normalize_rms(x: &mut [f64], rms: f64) {
    let e = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
    if e > 0.0 {
        x.iter_mut().for_each(|v| *v *= rms / e);
    }
}

/// A speech-like signal: a harmonic source with a wandering pitch contour, shaped by
/// three moving formants and gated into syllables separated by pauses.
pub fn speech_like(rng: &mut ChaCha8Rng, len: usize, sample_rate: u32) -> Vec<f64> {
    let fs = sample_rate as f64;
    let nyq = fs / 2.0;
    let base_f0 = rng.random_range(90.0..220.0);
    let (vib_rate, vib_phase) = (rng.random_range(0.3..1.2), rng.random_range(0.0..6.3));
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    // syllable schedule: (start, end, formant targets)
    let mut syllables = Vec::new();
    let mut t = rng.random_range(0.0..0.2) * fs;
    while (t as usize) < len {
        let dur = rng.random_range(0.10..0.30) * fs;
        let formants = [
            rng.random_range(300.0..900.0),
            rng.random_range(900.0..2400.0),
            rng.random_range(2300.0..3400.0),
        ];
        syllables.push((t, t + dur, formants));
        let pause = if rng.random_bool(0.25) {
            rng.random_range(0.25..0.6)
        } else {
            rng.random_range(0.04..0.2)
        };
        t += dur + pause * fs;
    }

    let ramp = 0.02 * fs;
    let mut out = vec![0.0; len];
    let mut phase = 0.0f64;
    let mut syl = 0;
    for (n, o) in out.iter_mut().enumerate() {
        let tn = n as f64;
        let secs = tn / fs;
        let f0 = base_f0 * (1.0 + 0.12 * (2.0 * std::f64::consts::PI * vib_rate * secs + vib_phase).sin());
        phase += 2.0 * std::f64::consts::PI * f0 / fs;
        while syl < syllables.len() && syllables[syl].1 <= tn {
            syl += 1;
        }
        let Some(&(a, b, formants)) = syllables.get(syl) else { continue };
        if tn < a {
            continue;
        }
        let env = ((tn - a) / ramp).min((b - tn) / ramp).clamp(0.0, 1.0);
        let env = 0.5 - 0.5 * (std::f64::consts::PI * env).cos();
        let mut v = 0.0;
        let mut k = 1;
        while (k as f64) * f0 < 0.9 * nyq && k <= 60 {
            let fk = k as f64 * f0;
            let amp: f64 = formants
                .iter()
                .enumerate()
                .map(|(i, &fc)| {
                    let bw = 80.0 + 60.0 * i as f64;
                    (-(fk - fc).powi(2) / (2.0 * bw * bw)).exp() / (1.0 + i as f64)
                })
                .sum::<f64>()
                + 0.02 / k as f64;
            v += amp * (k as f64 * phase).sin();
            k += 1;
        }
        *o = env * (v + 0.01 * normal.sample(rng));
    }
    normalize_rms(&mut out, 0.1);
    out
}

/// Stationary colored Gaussian noise from a random second-order recursive filter.
pub fn colored_noise(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let a1: f64 = rng.random_range(-0.6..0.95);
    let a2 = rng.random_range(-0.3..0.3) * (1.0 - a1.abs());
    let (mut y1, mut y2) = (0.0, 0.0);
    // discard the transient so the excerpt is stationary
    let warm = 512;
    let mut out = Vec::with_capacity(len);
    for n in 0..len + warm {
        let y = normal.sample(rng) + a1 * y1 + a2 * y2;
        y2 = y1;
        y1 = y;
        if n >= warm {
            out.push(y);
        }
    }
    normalize_rms(&mut out, 0.1);
    out
}

/// Reproducible synthetic speech and noise pools.
pub fn synthetic_pools(seed: u64, n_speech: usize, n_noise: usize, secs: f64, sample_rate: u32) -> (SignalPool, SignalPool) {
    let len = (secs * sample_rate as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let speech = (0..n_speech).map(|_| speech_like(&mut rng, len, sample_rate)).collect();
    let noise = (0..n_noise).map(|_| colored_noise(&mut rng, len)).collect();
    (
        SignalPool {
            signals: speech,
            sample_rate,
        },
        SignalPool {
            signals: noise,
            sample_rate,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pools_are_deterministic_and_finite() {
        let (a, b) = synthetic_pools(3, 2, 2, 0.5, 8000);
        let (c, _) = synthetic_pools(3, 2, 2, 0.5, 8000);
        assert_eq!(a, c);
        assert!(a.signals.iter().chain(&b.signals).flatten().all(|v| v.is_finite()));
        assert_eq!(a.signals[0].len(), 4000);
    }

    #[test]
    fn speech_has_pauses() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = speech_like(&mut rng, 32000, 16000);
        let frame = 320;
        let energies: Vec<f64> = x.chunks(frame).map(|c| c.iter().map(|v| v * v).sum()).collect();
        let max = energies.iter().cloned().fold(0.0, f64::max);
        assert!(energies.iter().any(|&e| e < 1e-3 * max));
        assert!(energies.iter().filter(|&&e| e > 0.1 * max).count() > 10);
    }
}
