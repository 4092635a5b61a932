use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sigcore::Stft;
use crate::tensor::{gemm, Mat};

/// STFT geometry for the spectral loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop: usize,
    pub fft_size: usize,
}

impl StftConfig {
    /// 32 ms Hann window, 8 ms hop, FFT size equal to the window.
    pub fn for_rate(sample_rate: u32) -> Self {
        let window_len = (0.032 * sample_rate as f64).round() as usize;
        StftConfig {
            window_len,
            hop: (0.008 * sample_rate as f64).round() as usize,
            fft_size: window_len,
        }
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn build(&self) -> Result<Stft> {
        Stft::new(self.window_len, self.hop, self.fft_size)
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filterbank `M` (`F×D`).
#[derive(Clone, Debug, PartialEq)]
pub struct MelBank {
    pub weights: Mat,
    pub f_low: f64,
    pub f_high: f64,
}

impl MelBank {
    pub fn new(
        n_bins: usize,
        sample_rate: u32,
        n_mels: usize,
        f_low: f64,
        f_high: f64,
    ) -> Result<Self> {
        if n_mels == 0 || n_bins < 2 || !(f_low >= 0.0 && f_low < f_high) {
            return Err(Error::InvalidInput("bad mel filterbank geometry".into()));
        }
        let nyquist = sample_rate as f64 / 2.0;
        let f_high = f_high.min(nyquist);
        let (ml, mh) = (hz_to_mel(f_low), hz_to_mel(f_high));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(ml + (mh - ml) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let mut weights = Mat::zeros(n_bins, n_mels);
        for k in 0..n_bins {
            let f = k as f64 * nyquist / (n_bins - 1) as f64;
            for d in 0..n_mels {
                let (lo, c, hi) = (edges[d], edges[d + 1], edges[d + 2]);
                let w = ((f - lo) / (c - lo)).min((hi - f) / (hi - c)).max(0.0);
                weights.set(k, d, w);
            }
        }
        for d in 0..n_mels {
            let s: f64 = (0..n_bins).map(|k| weights.get(k, d)).sum();
            if s <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "mel band {d} covers no frequency bin; use fewer bands or a longer FFT"
                )));
            }
        }
        Ok(MelBank {
            weights,
            f_low,
            f_high,
        })
    }

    /// 40 bands over 0 Hz .. Nyquist.
    pub fn default_for(cfg: &StftConfig, sample_rate: u32) -> Result<Self> {
        Self::new(cfg.n_bins(), sample_rate, 40, 0.0, sample_rate as f64 / 2.0)
    }

    pub fn n_mels(&self) -> usize {
        self.weights.cols
    }
}

struct MelFeatures {
    mel: Mat,
    spectra: Vec<Vec<Complex64>>,
    mags: Mat,
    normed: Vec<f64>,
    norm: f64,
}

fn mel_features(x: &[f64], stft: &Stft, bank: &MelBank) -> Result<MelFeatures> {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= 0.0 {
        return Err(Error::InvalidInput("mel_si_mse: zero-norm signal".into()));
    }
    let normed: Vec<f64> = x.iter().map(|v| v / norm).collect();
    let t = stft.n_frames(x.len());
    let f = stft.n_bins();
    if bank.weights.rows != f {
        return Err(Error::Shape(format!(
            "mel bank has {} rows, stft has {f} bins",
            bank.weights.rows
        )));
    }
    let mut spectra = Vec::with_capacity(t);
    let mut mags = Mat::zeros(t, f);
    for i in 0..t {
        let spec = stft.rfft(&stft.windowed_frame(&normed, i));
        for (m, c) in mags.row_mut(i).iter_mut().zip(&spec) {
            *m = c.norm();
        }
        spectra.push(spec);
    }
    let mut mel = Mat::zeros(t, bank.n_mels());
    gemm(
        t,
        f,
        bank.n_mels(),
        &mags.data,
        false,
        &bank.weights.data,
        false,
        &mut mel.data,
        false,
    );
    Ok(MelFeatures {
        mel,
        spectra,
        mags,
        normed,
        norm,
    })
}

/// Mean squared error between mel-projected magnitude spectrograms of the two
/// L2-normalized waveforms.
pub fn mel_si_mse(estimate: &[f64], target: &[f64], cfg: &StftConfig, bank: &MelBank) -> Result<f64> {
    Ok(mel_si_mse_with_grad(estimate, target, cfg, bank, false)?.0)
}

/// [`mel_si_mse`] and its gradient with respect to `estimate`.
pub fn mel_si_mse_with_grad(
    estimate: &[f64],
    target: &[f64],
    cfg: &StftConfig,
    bank: &MelBank,
    want_grad: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    if estimate.len() != target.len() {
        return Err(Error::Shape("mel_si_mse: length mismatch".into()));
    }
    let stft = cfg.build()?;
    let est = mel_features(estimate, &stft, bank)?;
    let tgt = mel_features(target, &stft, bank)?;
    let count = est.mel.len() as f64;
    let diff: Vec<f64> = est.mel.data.iter().zip(&tgt.mel.data).map(|(a, b)| a - b).collect();
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / count;
    if !want_grad {
        return Ok((loss, None));
    }

    let (t, f, d) = (est.mags.rows, est.mags.cols, bank.n_mels());
    // dL/dmel, then dL/dmag = dL/dmel · Mᵀ
    let g_mel: Vec<f64> = diff.iter().map(|v| 2.0 * v / count).collect();
    let mut g_mag = vec![0.0; t * f];
    gemm(t, d, f, &g_mel, false, &bank.weights.data, true, &mut g_mag, false);

    let pad = stft.pad_left() as isize;
    let window = stft.window();
    let mut g_normed = vec![0.0; estimate.len()];
    for (i, spec) in est.spectra.iter().enumerate() {
        let z: Vec<Complex64> = spec
            .iter()
            .zip(&g_mag[i * f..(i + 1) * f])
            .map(|(c, &g)| {
                let m = c.norm();
                if m > 0.0 {
                    c * (g / m)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        let g_frame = stft.one_sided_synthesis_real(&z);
        let start = (i * stft.hop) as isize - pad;
        for (n, g) in g_frame.iter().enumerate() {
            let idx = start + n as isize;
            if idx >= 0 && (idx as usize) < g_normed.len() {
                g_normed[idx as usize] += g * window[n];
            }
        }
    }
    // back through x / |x|
    let proj: f64 = g_normed.iter().zip(&est.normed).map(|(g, u)| g * u).sum();
    let grad = g_normed
        .iter()
        .zip(&est.normed)
        .map(|(g, u)| (g - u * proj) / est.norm)
        .collect();
    Ok((loss, Some(grad)))
}
