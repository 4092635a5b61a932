//! Normalized cross-correlation (cosine similarity) features between a context window
//! and a frame, and their permutation-free pooling.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::tensor::Mat;

/// Window energies below this fraction of the largest window energy count as silent.
const SILENT_FRACTION: f64 = 1e-12;

fn check(context: &[f64], frame: &[f64]) -> Result<usize> {
    let l = frame.len();
    if l == 0 || context.len() != 3 * l {
        return Err(Error::Shape(format!(
            "ncc expects context 3L and frame L, got {} and {}",
            context.len(),
            l
        )));
    }
    Ok(l)
}

fn finish(dots: &[f64], energies: &[f64], frame_energy: f64) -> Vec<f64> {
    let e_max = energies.iter().fold(0.0f64, |m, &e| m.max(e));
    if frame_energy <= 0.0 {
        return vec![0.0; dots.len()];
    }
    let rn = frame_energy.sqrt();
    dots.iter()
        .zip(energies)
        .map(|(&d, &e)| {
            if e <= 0.0 || e <= SILENT_FRACTION * e_max {
                0.0
            } else {
                (d / (e.sqrt() * rn)).clamp(-1.0, 1.0)
            }
        })
        .collect()
}

/// Cosine similarity between every `L`-sample window of `context` (`3L` samples) and
/// `frame`; entry `j` uses `context[j..j+L]`. Silent windows give 0.
///
/// One FFT cross-correlation gives every inner product; window energies come from a
/// running sum.
pub fn ncc_against_frame(context: &[f64], frame: &[f64]) -> Result<Vec<f64>> {
    let l = check(context, frame)?;
    ncc_planned(&NccPlan::new(l), context, frame)
}

struct NccPlan {
    n_fft: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl NccPlan {
    fn new(l: usize) -> Self {
        let n_fft = (4 * l).next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        NccPlan {
            n_fft,
            fwd: planner.plan_fft_forward(n_fft),
            inv: planner.plan_fft_inverse(n_fft),
        }
    }
}

fn ncc_planned(plan: &NccPlan, context: &[f64], frame: &[f64]) -> Result<Vec<f64>> {
    let l = check(context, frame)?;
    let (n_fft, fwd, inv) = (plan.n_fft, &plan.fwd, &plan.inv);
    let zero = Complex64::new(0.0, 0.0);
    let mut a: Vec<Complex64> = context.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    a.resize(n_fft, zero);
    let mut b: Vec<Complex64> = frame.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    b.resize(n_fft, zero);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y.conj();
    }
    inv.process(&mut a);
    let scale = 1.0 / n_fft as f64;
    let dots: Vec<f64> = a[..2 * l + 1].iter().map(|c| c.re * scale).collect();

    let mut energies = Vec::with_capacity(2 * l + 1);
    let mut e: f64 = context[..l].iter().map(|v| v * v).sum();
    energies.push(e.max(0.0));
    for j in 1..=2 * l {
        e += context[j + l - 1].powi(2) - context[j - 1].powi(2);
        energies.push(e.max(0.0));
    }
    // zero-padded boundary windows must come out exactly silent
    for (j, en) in energies.iter_mut().enumerate() {
        if context[j..j + l].iter().all(|&v| v == 0.0) {
            *en = 0.0;
        }
    }
    let fe = frame.iter().map(|v| v * v).sum();
    Ok(finish(&dots, &energies, fe))
}

/// Direct `O(L²)` evaluation of [`ncc_against_frame`].
pub fn ncc_direct(context: &[f64], frame: &[f64]) -> Result<Vec<f64>> {
    let l = check(context, frame)?;
    let mut dots = Vec::with_capacity(2 * l + 1);
    let mut energies = Vec::with_capacity(2 * l + 1);
    for j in 0..=2 * l {
        let w = &context[j..j + l];
        dots.push(w.iter().zip(frame).map(|(a, b)| a * b).sum());
        energies.push(w.iter().map(|v| v * v).sum());
    }
    let fe = frame.iter().map(|v| v * v).sum();
    Ok(finish(&dots, &energies, fe))
}

/// Reference-stage feature: windows slide over the reference context and are compared
/// against another microphone's center frame.
pub fn ncc_stage1(ref_context: &[f64], other_center: &[f64]) -> Result<Vec<f64>> {
    ncc_against_frame(ref_context, other_center)
}

/// Arithmetic mean of equally sized feature vectors.
pub fn mean_pool_features(features: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = features
        .first()
        .ok_or_else(|| Error::InvalidInput("mean pooling needs at least one feature".into()))?;
    let n = first.len();
    if features.iter().any(|f| f.len() != n) {
        return Err(Error::Shape("features differ in length".into()));
    }
    let mut out = vec![0.0; n];
    for f in features {
        for (o, v) in out.iter_mut().zip(f) {
            *o += v;
        }
    }
    let k = features.len() as f64;
    out.iter_mut().for_each(|v| *v /= k);
    Ok(out)
}

/// Frame-by-frame NCC: row `t` of `contexts` (`T×3L`) against row `t` of `frames` (`T×L`).
pub fn ncc_frames(contexts: &Mat, frames: &Mat) -> Result<Mat> {
    if contexts.rows != frames.rows {
        return Err(Error::Shape("ncc_frames: frame counts differ".into()));
    }
    let l = frames.cols;
    let plan = NccPlan::new(l);
    let mut out = Mat::zeros(frames.rows, 2 * l + 1);
    for t in 0..frames.rows {
        let f = ncc_planned(&plan, contexts.row(t), frames.row(t))?;
        out.row_mut(t).copy_from_slice(&f);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn self_similarity_peaks_at_center() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l = 32;
        let r = noise(&mut rng, l);
        let mut ctx = vec![0.0; 3 * l];
        ctx[l..2 * l].copy_from_slice(&r);
        let f = ncc_against_frame(&ctx, &r).unwrap();
        assert!((f[l] - 1.0).abs() < 1e-12);
        assert!(f.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn planted_delay_recovered_by_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..100 {
            let l = 16 + trial % 17;
            let d = rng.random_range(-(l as i64)..=l as i64) as isize;
            let ctx = noise(&mut rng, 3 * l);
            let start = (l as isize + d) as usize;
            let r = ctx[start..start + l].to_vec();
            let f = ncc_against_frame(&ctx, &r).unwrap();
            let arg = f
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(arg, start);
        }
    }

    #[test]
    fn disjoint_support_is_all_zero() {
        let l = 8;
        let r = vec![1.0; l];
        let ctx = vec![0.0; 3 * l];
        assert!(ncc_against_frame(&ctx, &r).unwrap().iter().all(|&v| v == 0.0));
        assert!(ncc_direct(&ctx, &r).unwrap().iter().all(|&v| v == 0.0));
        let mut ctx = vec![0.0; 3 * l];
        ctx[0] = 1.0;
        assert!(ncc_against_frame(&ctx, &[0.0; 8]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn boundary_windows_follow_silence_rule() {
        // only the tail of the context carries signal, as for a first frame
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let l = 12;
        let mut ctx = vec![0.0; 3 * l];
        ctx[2 * l..].copy_from_slice(&noise(&mut rng, l));
        let r = noise(&mut rng, l);
        let fast = ncc_against_frame(&ctx, &r).unwrap();
        let slow = ncc_direct(&ctx, &r).unwrap();
        assert_eq!(fast[..l], slow[..l]);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn pooling_examples() {
        let f = vec![0.1, -0.2, 0.3];
        let pooled = mean_pool_features(&[f.clone(), f.clone(), f.clone()]).unwrap();
        assert!(pooled.iter().zip(&f).all(|(a, b)| (a - b).abs() < 1e-15));
        let a = vec![1.0, 2.0];
        let b = vec![3.0, -2.0];
        assert_eq!(mean_pool_features(&[a, b]).unwrap(), vec![2.0, 0.0]);
        assert!(mean_pool_features(&[]).is_err());
        assert!(mean_pool_features(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn pooling_is_permutation_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let list: Vec<Vec<f64>> = (0..5).map(|_| noise(&mut rng, 9)).collect();
        let want = mean_pool_features(&list).unwrap();
        for _ in 0..20 {
            let mut shuffled = list.clone();
            shuffled.shuffle(&mut rng);
            let got = mean_pool_features(&shuffled).unwrap();
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    proptest! {
        #[test]
        fn fft_matches_direct_and_is_bounded(seed in 0u64..1000, l in 2usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ctx = noise(&mut rng, 3 * l);
            let r = noise(&mut rng, l);
            let fast = ncc_against_frame(&ctx, &r).unwrap();
            let slow = ncc_direct(&ctx, &r).unwrap();
            for (a, b) in fast.iter().zip(&slow) {
                prop_assert!((a - b).abs() < 1e-10);
                prop_assert!(a.abs() <= 1.0);
            }
        }

        #[test]
        fn scale_invariant(seed in 0u64..1000, alpha in 0.01f64..100.0, beta in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l = 10;
            let ctx = noise(&mut rng, 3 * l);
            let r = noise(&mut rng, l);
            let base = ncc_direct(&ctx, &r).unwrap();
            let sc: Vec<f64> = ctx.iter().map(|v| v * alpha).collect();
            let sr: Vec<f64> = r.iter().map(|v| v * beta).collect();
            let scaled = ncc_direct(&sc, &sr).unwrap();
            for (a, b) in base.iter().zip(&scaled) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
