use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::covariance::DIAGONAL_LOADING;
use crate::error::{Error, Result};
use crate::sigcore::MultichannelSignal;

/// Default FIR length at 16 kHz.
pub const DEFAULT_TD_TAPS: usize = 512;

/// Taps of a direct-path response below this fraction of the peak are trimmed.
const DIRECT_PATH_TRIM: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TdMethod {
    Mvdr,
    Mwf,
}

/// Stacked causal FIR filters `h[i]` of `taps` samples; output
/// `y[n] = Σ_i Σ_k h[i][k] x_i[n − k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TdBeamformerWeights {
    pub h: Vec<Vec<f64>>,
    pub taps: usize,
}

/// Oracle information for time-domain beamformers.
#[derive(Clone, Copy, Debug)]
pub struct TdOracle<'a> {
    /// Desired signal at the reference microphone (MWF).
    pub target_ref: &'a [f64],
    /// Direct-path impulse responses of the target to every microphone (MVDR).
    pub direct_rirs: &'a [Vec<f64>],
    pub reference: usize,
}

/// Biased cross-correlations `r[k] = (1/l) Σ_n a[n] b[n + k]` for `|k| < max_lag`,
/// indexed by `k + max_lag - 1`.
fn cross_correlation(a: &[f64], b: &[f64], max_lag: usize) -> Vec<f64> {
    let l = a.len();
    let n_fft = (l + max_lag).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n_fft);
    let inv = planner.plan_fft_inverse(n_fft);
    let mut fa: Vec<Complex64> = a.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fa.resize(n_fft, Complex64::new(0.0, 0.0));
    let mut fb: Vec<Complex64> = b.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fb.resize(n_fft, Complex64::new(0.0, 0.0));
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fb.iter_mut().zip(&fa) {
        *x *= y.conj();
    }
    inv.process(&mut fb);
    let scale = 1.0 / (n_fft as f64 * l as f64);
    (-(max_lag as isize) + 1..max_lag as isize)
        .map(|k| fb[k.rem_euclid(n_fft as isize) as usize].re * scale)
        .collect()
}

/// Block-Toeplitz correlation matrix `R[(i,a),(j,b)] = E[x_i[n−a] x_j[n−b]]`.
pub fn correlation_matrix(x: &MultichannelSignal, taps: usize) -> DMatrix<f64> {
    let n = x.n_channels();
    let dim = n * taps;
    let mut r = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..n {
        for j in i..n {
            let c = cross_correlation(x.channel(i), x.channel(j), taps);
            for a in 0..taps {
                for b in 0..taps {
                    // E[x_i[n−a] x_j[n−b]] = r_ij[a − b]
                    let v = c[a + taps - 1 - b];
                    r[(i * taps + a, j * taps + b)] = v;
                    r[(j * taps + b, i * taps + a)] = v;
                }
            }
        }
    }
    r
}

fn loaded_cholesky(mut r: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let dim = r.nrows();
    let d = DIAGONAL_LOADING * r.trace() / dim as f64;
    for k in 0..dim {
        r[(k, k)] += d;
    }
    Cholesky::new(r).ok_or_else(|| Error::Numerical("correlation matrix is singular after loading".into()))
}

/// Direct-path responses with the common leading delay and negligible tails removed.
pub fn trimmed_direct_paths(direct_rirs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let peak = direct_rirs
        .iter()
        .flat_map(|g| g.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if peak <= 0.0 {
        return Err(Error::InvalidInput("direct-path responses are all zero".into()));
    }
    let thr = DIRECT_PATH_TRIM * peak;
    let first = direct_rirs
        .iter()
        .filter_map(|g| g.iter().position(|v| v.abs() > thr))
        .min()
        .unwrap_or(0);
    let last = direct_rirs
        .iter()
        .filter_map(|g| g.iter().rposition(|v| v.abs() > thr))
        .max()
        .unwrap_or(0);
    Ok(direct_rirs
        .iter()
        .map(|g| {
            (first..=last)
                .map(|k| if k < g.len() { g[k] } else { 0.0 })
                .collect()
        })
        .collect())
}

/// Constraint matrix `D` (`N·taps × Lc`) and response `u` for
/// `Σ_i h_i ∗ g_i = g_ref`.
pub fn mvdr_constraints(direct_rirs: &[Vec<f64>], reference: usize, taps: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let g = trimmed_direct_paths(direct_rirs)?;
    let n = g.len();
    let lg = g[0].len();
    let lc = taps + lg - 1;
    if lc > n * taps {
        return Err(Error::InvalidInput(format!(
            "{lc} constraints exceed {} filter taps; use longer filters",
            n * taps
        )));
    }
    let mut d = DMatrix::<f64>::zeros(n * taps, lc);
    for (i, gi) in g.iter().enumerate() {
        for a in 0..taps {
            for (m, &v) in gi.iter().enumerate() {
                d[(i * taps + a, a + m)] = v;
            }
        }
    }
    let mut u = DVector::<f64>::zeros(lc);
    for (m, &v) in g[reference].iter().enumerate() {
        u[m] = v;
    }
    Ok((d, u))
}

/// Time-domain MWF or MVDR filters from the mixture and oracle information.
pub fn td_beamformer(
    method: TdMethod,
    mixture: &MultichannelSignal,
    oracle: &TdOracle,
    taps: usize,
) -> Result<TdBeamformerWeights> {
    let n = mixture.n_channels();
    if taps == 0 || taps >= mixture.len() {
        return Err(Error::InvalidInput("filter length must be in 1..signal length".into()));
    }
    if oracle.reference >= n {
        return Err(Error::InvalidInput("reference channel out of range".into()));
    }
    let chol = loaded_cholesky(correlation_matrix(mixture, taps))?;
    let h = match method {
        TdMethod::Mwf => {
            if oracle.target_ref.len() != mixture.len() {
                return Err(Error::Shape("target length differs from mixture".into()));
            }
            let mut p = DVector::<f64>::zeros(n * taps);
            for i in 0..n {
                // E[x_i[n−a] d[n]] = r_{x_i d}[a]
                let c = cross_correlation(mixture.channel(i), oracle.target_ref, taps);
                for a in 0..taps {
                    p[i * taps + a] = c[a + taps - 1];
                }
            }
            chol.solve(&p)
        }
        TdMethod::Mvdr => {
            if oracle.direct_rirs.len() != n {
                return Err(Error::Shape("need one direct-path response per channel".into()));
            }
            let (d, u) = mvdr_constraints(oracle.direct_rirs, oracle.reference, taps)?;
            let z = chol.solve(&d);
            let m = d.transpose() * &z;
            let lu = m.clone().lu();
            let mut lambda = lu
                .solve(&u)
                .ok_or_else(|| Error::Numerical("mvdr constraint system is singular".into()))?;
            // one step of iterative refinement
            let resid = &u - &m * &lambda;
            if let Some(corr) = lu.solve(&resid) {
                lambda += corr;
            }
            z * lambda
        }
    };
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite time-domain filters".into()));
    }
    Ok(TdBeamformerWeights {
        h: (0..n).map(|i| h.as_slice()[i * taps..(i + 1) * taps].to_vec()).collect(),
        taps,
    })
}

/// Filter-and-sum with causal FIR filters; output has the input length.
pub fn apply_td_beamformer(weights: &TdBeamformerWeights, x: &MultichannelSignal) -> Result<Vec<f64>> {
    if weights.h.len() != x.n_channels() {
        return Err(Error::Shape("one filter per channel required".into()));
    }
    let mut y = vec![0.0; x.len()];
    for (h, ch) in weights.h.iter().zip(x.channels()) {
        let full = crate::sigcore::fft_convolve(ch, h);
        for (o, v) in y.iter_mut().zip(&full) {
            *o += v;
        }
    }
    Ok(y)
}

/// Stacked filters as a single vector `[h_0; h_1; …]`.
pub fn stacked(weights: &TdBeamformerWeights) -> DVector<f64> {
    DVector::from_iterator(
        weights.h.len() * weights.taps,
        weights.h.iter().flat_map(|h| h.iter().copied()),
    )
}
