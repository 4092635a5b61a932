use itertools::Itertools;

use super::si_snr;
use crate::error::{Error, Result};

/// Largest number of outputs handled by exhaustive permutation search.
pub const MAX_PIT_SOURCES: usize = 4;

/// Matrix of pairwise losses: `m[c][k] = loss(estimates[k], targets[c])`.
pub fn pairwise_losses<F>(
    estimates: &[Vec<f64>],
    targets: &[Vec<f64>],
    mut per_pair_loss: F,
) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(&[f64], &[f64]) -> Result<f64>,
{
    if estimates.len() != targets.len() || targets.is_empty() {
        return Err(Error::Shape(format!(
            "upit: {} estimates for {} targets",
            estimates.len(),
            targets.len()
        )));
    }
    if targets.len() > MAX_PIT_SOURCES {
        return Err(Error::InvalidInput(format!(
            "upit supports at most {MAX_PIT_SOURCES} sources"
        )));
    }
    targets
        .iter()
        .map(|t| estimates.iter().map(|e| per_pair_loss(e, t)).collect())
        .collect()
}

/// Best assignment for a pairwise loss matrix. `perm[c]` is the estimate matched with
/// target `c`; the loss is the mean over targets. Ties keep the first permutation in
/// lexicographic order.
pub fn best_permutation(losses: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let c = losses.len();
    let mut best = (f64::INFINITY, (0..c).collect::<Vec<_>>());
    for perm in (0..c).permutations(c) {
        let mut total = 0.0;
        for (t, &k) in perm.iter().enumerate() {
            total += losses[t][k];
        }
        let loss = total / c as f64;
        if loss < best.0 {
            best = (loss, perm);
        }
    }
    best
}

/// Utterance-level permutation invariant loss: minimum over all output/target
/// assignments of the mean pairwise loss.
pub fn upit_loss<F>(
    estimates: &[Vec<f64>],
    targets: &[Vec<f64>],
    per_pair_loss: F,
) -> Result<(f64, Vec<usize>)>
where
    F: FnMut(&[f64], &[f64]) -> Result<f64>,
{
    let m = pairwise_losses(estimates, targets, per_pair_loss)?;
    Ok(best_permutation(&m))
}

/// Negative SI-SNR, the default per-pair training loss.
pub fn neg_si_snr(estimate: &[f64], target: &[f64]) -> Result<f64> {
    Ok(-si_snr(estimate, target)?)
}
