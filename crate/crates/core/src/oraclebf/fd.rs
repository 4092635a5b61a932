use std::cmp::Ordering;

use nalgebra::{Cholesky, DMatrix, DVector};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::covariance::SpatialCovariance;
use crate::error::{Error, Result};
use crate::sigcore::{Spectrogram, Stft};

/// Frequency-domain beamformer formulations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FdMethod {
    /// `Φn⁻¹d / (dᴴΦn⁻¹d)` with `d` the principal eigenvector of `Φs`.
    Mvdr,
    /// `(Φs + μΦn)⁻¹ Φs e_ref`.
    SdwMwf,
    /// `Φn⁻¹Φs e_ref / tr(Φn⁻¹Φs)`.
    MbMvdr,
    /// Principal generalized eigenvector of `(Φs, Φn)`.
    MbGev,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdOptions {
    /// Speech-distortion trade-off of the SDW-MWF.
    pub mu: f64,
    /// Blind analytic normalization of the GEV weights.
    pub ban: bool,
}

impl Default for FdOptions {
    fn default() -> Self {
        FdOptions { mu: 1.0, ban: false }
    }
}

/// Per-frequency complex weights `w(f)`.
#[derive(Clone, Debug)]
pub struct FdBeamformerWeights {
    pub w: Vec<DVector<Complex64>>,
    pub method: FdMethod,
    pub reference: usize,
}

/// Rotates `v` so that entry `reference` is real and non-negative.
fn phase_normalize(v: &mut DVector<Complex64>, reference: usize) {
    let r = v[reference];
    if r.norm() > 0.0 {
        let rot = r.conj() / r.norm();
        v.iter_mut().for_each(|x| *x *= rot);
    }
}

fn lex_real_cmp(a: &DVector<Complex64>, b: &DVector<Complex64>) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.re.partial_cmp(&y.re).unwrap_or(Ordering::Equal) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Principal eigenvector of a Hermitian matrix, unit norm, phase-normalized on
/// `reference`. Among (numerically) tied eigenvalues the candidate with the
/// lexicographically largest real-part vector wins.
pub fn principal_eigenvector(m: &DMatrix<Complex64>, reference: usize) -> DVector<Complex64> {
    let n = m.nrows();
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-10 * eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut best: Option<DVector<Complex64>> = None;
    for k in 0..n {
        if eig.eigenvalues[k] < lmax - tol {
            continue;
        }
        let mut v: DVector<Complex64> = eig.eigenvectors.column(k).into_owned();
        let norm = v.norm();
        v /= Complex64::new(norm, 0.0);
        phase_normalize(&mut v, reference);
        best = match best {
            Some(b) if lex_real_cmp(&b, &v) != Ordering::Less => Some(b),
            _ => Some(v),
        };
    }
    best.expect("matrix has at least one eigenvalue")
}

/// Steering vectors `d(f)` from a target covariance.
pub fn steering_from_covariance(phi_s: &SpatialCovariance, reference: usize) -> Vec<DVector<Complex64>> {
    phi_s.phi.iter().map(|p| principal_eigenvector(p, reference)).collect()
}

fn chol(m: DMatrix<Complex64>, f: usize) -> Result<Cholesky<Complex64, nalgebra::Dyn>> {
    Cholesky::new(m).ok_or_else(|| {
        Error::Numerical(format!("noise covariance singular after loading at bin {f}"))
    })
}

/// Per-frequency weights for the chosen formulation.
pub fn fd_beamformer(
    method: FdMethod,
    phi_s: &SpatialCovariance,
    phi_n: &SpatialCovariance,
    reference: usize,
    opts: FdOptions,
) -> Result<FdBeamformerWeights> {
    let n = phi_s.n_channels();
    if phi_s.n_bins() != phi_n.n_bins() || phi_n.n_channels() != n || n == 0 {
        return Err(Error::Shape("target and noise covariances differ in shape".into()));
    }
    if reference >= n {
        return Err(Error::InvalidInput(format!("reference {reference} out of {n} channels")));
    }
    let mut e_ref = DVector::<Complex64>::zeros(n);
    e_ref[reference] = Complex64::new(1.0, 0.0);
    let mut out = Vec::with_capacity(phi_s.n_bins());
    for f in 0..phi_s.n_bins() {
        let s = &phi_s.phi[f];
        let w = match method {
            FdMethod::Mvdr => {
                let d = principal_eigenvector(s, reference);
                let c = chol(phi_n.loaded(f), f)?;
                let v = c.solve(&d);
                let denom = d.dotc(&v);
                if denom.norm() == 0.0 {
                    return Err(Error::Numerical(format!("mvdr: zero denominator at bin {f}")));
                }
                v / denom.conj()
            }
            FdMethod::SdwMwf => {
                let a = phi_s.loaded(f) + phi_n.loaded(f) * Complex64::new(opts.mu, 0.0);
                let c = chol(a, f)?;
                c.solve(&(s * &e_ref))
            }
            FdMethod::MbMvdr => {
                let c = chol(phi_n.loaded(f), f)?;
                let a = c.solve(s);
                let tr = a.trace();
                if tr.norm() == 0.0 {
                    DVector::zeros(n)
                } else {
                    a.column(reference) / tr
                }
            }
            FdMethod::MbGev => {
                let pn = phi_n.loaded(f);
                let c = chol(pn.clone(), f)?;
                let l = c.l();
                let y = l.solve_lower_triangular(s).expect("cholesky factor is invertible");
                let cm = l
                    .solve_lower_triangular(&y.adjoint())
                    .expect("cholesky factor is invertible");
                let u = principal_eigenvector(&cm, reference);
                let mut w = l
                    .adjoint()
                    .solve_upper_triangular(&u)
                    .expect("cholesky factor is invertible");
                let norm = w.norm();
                if norm > 0.0 {
                    w /= Complex64::new(norm, 0.0);
                }
                phase_normalize(&mut w, reference);
                if opts.ban {
                    let pw = &pn * &w;
                    let num = (pw.dotc(&pw).re / n as f64).sqrt();
                    let den = w.dotc(&pw).re;
                    if den > 0.0 {
                        w *= Complex64::new(num / den, 0.0);
                    }
                }
                w
            }
        };
        if w.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Numerical(format!("non-finite weights at bin {f}")));
        }
        out.push(w);
    }
    Ok(FdBeamformerWeights {
        w: out,
        method,
        reference,
    })
}

/// `Y(t,f) = w(f)ᴴ X(t,f)` over the frame range (all frames when `None`), written into
/// `out`.
pub fn apply_fd_weights_into(
    weights: &FdBeamformerWeights,
    stfts: &[Spectrogram],
    frames: Option<(usize, usize)>,
    out: &mut Spectrogram,
) -> Result<()> {
    let first = stfts
        .first()
        .ok_or_else(|| Error::InvalidInput("no channels".into()))?;
    if weights.w.len() != first.n_bins() || weights.w.iter().any(|w| w.len() != stfts.len()) {
        return Err(Error::Shape("weights do not match the multichannel stft".into()));
    }
    let (t0, t1) = frames.unwrap_or((0, first.n_frames()));
    for t in t0..t1 {
        for (f, w) in weights.w.iter().enumerate() {
            let mut y = Complex64::new(0.0, 0.0);
            for (i, s) in stfts.iter().enumerate() {
                y += w[i].conj() * s.frames[t][f];
            }
            out.frames[t][f] = y;
        }
    }
    Ok(())
}

/// Applies frequency-domain weights and resynthesizes a signal of the original length.
pub fn apply_fd_beamformer(weights: &FdBeamformerWeights, stfts: &[Spectrogram], stft: &Stft) -> Result<Vec<f64>> {
    let first = stfts
        .first()
        .ok_or_else(|| Error::InvalidInput("no channels".into()))?;
    let mut out = Spectrogram {
        frames: vec![vec![Complex64::new(0.0, 0.0); first.n_bins()]; first.n_frames()],
        signal_len: first.signal_len,
    };
    apply_fd_weights_into(weights, stfts, None, &mut out)?;
    Ok(stft.inverse(&out))
}
