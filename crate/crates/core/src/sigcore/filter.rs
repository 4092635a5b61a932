//! Frame-level filtering and long FFT convolution.
//!
//! The filter-and-sum operator is a sliding inner product (no kernel flip):
//! `out[n] = Σ_j h[j] · context[n + j]`, so tap `L` is the identity tap.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

fn check_lengths(context: &[f64], h: &[f64]) -> Result<usize> {
    if context.len() % 3 != 0 || context.len() < 6 {
        return Err(Error::Shape(format!(
            "context length {} is not 3L",
            context.len()
        )));
    }
    let l = context.len() / 3;
    if h.len() != 2 * l + 1 {
        return Err(Error::Shape(format!(
            "filter length {} does not match 2L+1 = {}",
            h.len(),
            2 * l + 1
        )));
    }
    Ok(l)
}

/// Filters a `3L` context window with a `2L+1` tap filter, keeping the `L` valid outputs.
pub fn valid_filter(context: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    let l = check_lengths(context, h)?;
    let mut out = vec![0.0; l];
    valid_filter_into(context, h, &mut out);
    Ok(out)
}

/// Unchecked direct form used on hot paths; `out.len()` is `L`.
#[inline]
pub(crate) fn valid_filter_into(context: &[f64], h: &[f64], out: &mut [f64]) {
    for (n, o) in out.iter_mut().enumerate() {
        *o = h
            .iter()
            .zip(&context[n..n + h.len()])
            .map(|(a, b)| a * b)
            .sum();
    }
}

/// FFT evaluation of [`valid_filter`].
pub fn valid_filter_fft(context: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    let l = check_lengths(context, h)?;
    // correlation = convolution with the reversed filter; valid part starts at 2L.
    let rev: Vec<f64> = h.iter().rev().copied().collect();
    let full = fft_convolve(context, &rev);
    Ok(full[2 * l..3 * l].to_vec())
}

/// Full linear convolution `a * b` (length `a.len() + b.len() - 1`).
pub fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let n_out = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= 32 {
        let mut out = vec![0.0; n_out];
        for (i, &av) in a.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            for (o, &bv) in out[i..].iter_mut().zip(b) {
                *o += av * bv;
            }
        }
        return out;
    }
    let n_fft = n_out.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n_fft);
    let inv = planner.plan_fft_inverse(n_fft);
    let mut fa: Vec<Complex64> = a.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fa.resize(n_fft, Complex64::new(0.0, 0.0));
    let mut fb: Vec<Complex64> = b.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fb.resize(n_fft, Complex64::new(0.0, 0.0));
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / n_fft as f64;
    fa[..n_out].iter().map(|c| c.re * scale).collect()
}
