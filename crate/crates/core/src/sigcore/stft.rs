//! Hann-windowed STFT with weighted overlap-add synthesis.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Single-channel spectrogram: `frames[t][k]`, `k < fft_size/2 + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrogram {
    pub frames: Vec<Vec<Complex64>>,
    pub signal_len: usize,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn n_bins(&self) -> usize {
        self.frames.first().map_or(0, Vec::len)
    }
}

#[derive(Clone)]
pub struct Stft {
    pub window_len: usize,
    pub hop: usize,
    pub fft_size: usize,
    window: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft")
            .field("window_len", &self.window_len)
            .field("hop", &self.hop)
            .field("fft_size", &self.fft_size)
            .finish()
    }
}

impl Stft {
    pub fn new(window_len: usize, hop: usize, fft_size: usize) -> Result<Self> {
        if window_len < 2 || hop == 0 || hop > window_len / 2 || fft_size < window_len {
            return Err(Error::InvalidInput(format!(
                "bad stft geometry: window {window_len}, hop {hop}, fft {fft_size}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Stft {
            window_len,
            hop,
            fft_size,
            window: hann(window_len),
            fwd: planner.plan_fft_forward(fft_size),
            inv: planner.plan_fft_inverse(fft_size),
        })
    }

    /// Window and hop given in milliseconds; FFT size is the window length.
    pub fn from_ms(sample_rate: u32, window_ms: f64, hop_ms: f64) -> Result<Self> {
        let win = (window_ms * sample_rate as f64 / 1000.0).round() as usize;
        let hop = (hop_ms * sample_rate as f64 / 1000.0).round() as usize;
        Self::new(win, hop, win)
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Zeros prepended before framing.
    pub fn pad_left(&self) -> usize {
        self.window_len / 2
    }

    pub fn n_frames(&self, signal_len: usize) -> usize {
        let padded = self.pad_left() + signal_len + self.window_len / 2;
        if padded <= self.window_len {
            1
        } else {
            (padded - self.window_len).div_ceil(self.hop) + 1
        }
    }

    /// Windowed samples of frame `t` (length `window_len`).
    pub fn windowed_frame(&self, x: &[f64], t: usize) -> Vec<f64> {
        let start = (t * self.hop) as isize - self.pad_left() as isize;
        (0..self.window_len)
            .map(|n| {
                let idx = start + n as isize;
                let v = if idx < 0 {
                    0.0
                } else {
                    x.get(idx as usize).copied().unwrap_or(0.0)
                };
                v * self.window[n]
            })
            .collect()
    }

    /// One-sided spectrum of a real frame already windowed.
    pub fn rfft(&self, frame: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = frame.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        buf.resize(self.fft_size, Complex64::new(0.0, 0.0));
        self.fwd.process(&mut buf);
        buf.truncate(self.n_bins());
        buf
    }

    /// Unnormalized `Σ_k Z_k e^{+2πikn/N}` over the one-sided bins, real part, first
    /// `window_len` samples.
    pub fn one_sided_synthesis_real(&self, z: &[Complex64]) -> Vec<f64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_size];
        buf[..z.len()].copy_from_slice(z);
        self.inv.process(&mut buf);
        buf[..self.window_len].iter().map(|c| c.re).collect()
    }

    pub fn forward(&self, x: &[f64]) -> Spectrogram {
        let frames = (0..self.n_frames(x.len()))
            .map(|t| self.rfft(&self.windowed_frame(x, t)))
            .collect();
        Spectrogram {
            frames,
            signal_len: x.len(),
        }
    }

    fn irfft(&self, spec: &[Complex64]) -> Vec<f64> {
        let n = self.fft_size;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        buf[..spec.len()].copy_from_slice(spec);
        for k in 1..n.div_ceil(2) {
            buf[n - k] = spec[k].conj();
        }
        // DC and Nyquist bins must be real for a real signal
        buf[0].im = 0.0;
        if n % 2 == 0 {
            buf[n / 2].im = 0.0;
        }
        self.inv.process(&mut buf);
        let scale = 1.0 / n as f64;
        buf[..self.window_len].iter().map(|c| c.re * scale).collect()
    }

    /// Weighted overlap-add inverse with the analysis window as synthesis window.
    pub fn inverse(&self, spec: &Spectrogram) -> Vec<f64> {
        let pad = self.pad_left();
        let total = (spec.n_frames().saturating_sub(1)) * self.hop + self.window_len;
        let mut acc = vec![0.0; total];
        let mut norm = vec![0.0; total];
        for (t, frame) in spec.frames.iter().enumerate() {
            let y = self.irfft(frame);
            let s = t * self.hop;
            for n in 0..self.window_len {
                acc[s + n] += y[n] * self.window[n];
                norm[s + n] += self.window[n] * self.window[n];
            }
        }
        (0..spec.signal_len)
            .map(|i| {
                let m = i + pad;
                if m < total && norm[m] > 1e-10 {
                    acc[m] / norm[m]
                } else {
                    0.0
                }
            })
            .collect()
    }
}
