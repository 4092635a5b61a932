use crate::error::{Error, Result};

/// Upper bound reported for (near-)perfect estimates, in dB.
pub const SI_SNR_CAP_DB: f64 = 60.0;

fn zero_mean(x: &[f64]) -> Vec<f64> {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - m).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scale-invariant SNR in dB, capped at [`SI_SNR_CAP_DB`]. Both signals are
/// zero-meaned. A silent estimate scores `-inf`.
pub fn si_snr(estimate: &[f64], target: &[f64]) -> Result<f64> {
    Ok(si_snr_with_grad(estimate, target, false)?.0)
}

/// SI-SNR together with its gradient with respect to `estimate` (when requested).
/// The gradient is zero where the value is capped.
pub fn si_snr_with_grad(
    estimate: &[f64],
    target: &[f64],
    want_grad: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    if estimate.len() != target.len() || target.is_empty() {
        return Err(Error::Shape(format!(
            "si_snr: estimate has {} samples, target {}",
            estimate.len(),
            target.len()
        )));
    }
    let t = zero_mean(target);
    let tt = dot(&t, &t);
    if tt <= 0.0 {
        return Err(Error::InvalidInput("si_snr: target is all zero".into()));
    }
    let e = zero_mean(estimate);
    let ee = dot(&e, &e);
    let zeros = || Some(vec![0.0; estimate.len()]);
    if ee <= 0.0 {
        return Ok((f64::NEG_INFINITY, want_grad.then(zeros).flatten()));
    }
    let p = dot(&e, &t);
    let s = p * p / tt;
    let n = ee - s;
    let cap_ratio = 10f64.powf(SI_SNR_CAP_DB / 10.0);
    if n <= s / cap_ratio {
        return Ok((SI_SNR_CAP_DB, want_grad.then(zeros).flatten()));
    }
    if s <= 0.0 {
        return Ok((f64::NEG_INFINITY, want_grad.then(zeros).flatten()));
    }
    let value = 10.0 * (s / n).log10();
    if !want_grad {
        return Ok((value, None));
    }
    let k = 10.0 / std::f64::consts::LN_10;
    // d/de0 of 10 log10(S/N) with S = p²/tt and N = ee - S
    let mut g: Vec<f64> = e
        .iter()
        .zip(&t)
        .map(|(&ei, &ti)| {
            let ds = 2.0 * p * ti / tt;
            let dn = 2.0 * ei - ds;
            k * (ds / s - dn / n)
        })
        .collect();
    // back through the mean removal
    let gm = g.iter().sum::<f64>() / g.len() as f64;
    g.iter_mut().for_each(|v| *v -= gm);
    Ok((value, Some(g)))
}

/// `si_snr(estimate, target) - si_snr(mixture_ref, target)`.
pub fn si_snr_improvement(estimate: &[f64], target: &[f64], mixture_ref: &[f64]) -> Result<f64> {
    Ok(si_snr(estimate, target)? - si_snr(mixture_ref, target)?)
}
