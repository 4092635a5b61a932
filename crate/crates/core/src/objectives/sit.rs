use super::si_snr;
use crate::error::{Error, Result};

/// Default search range for shift-invariant scoring.
pub const DEFAULT_MAX_SHIFT_MS: f64 = 2.0;

/// Maximum SI-SNR over integer shifts of the estimate within `±max_shift_ms`.
///
/// For shift `s` the estimate sample `n + s` is compared with target sample `n` over
/// the overlapping part only. Returns `(score_db, best_shift)`.
pub fn shift_invariant_si_snr(
    estimate: &[f64],
    target: &[f64],
    max_shift_ms: f64,
    sample_rate: u32,
) -> Result<(f64, isize)> {
    if estimate.len() != target.len() {
        return Err(Error::Shape("shift-invariant si-snr: length mismatch".into()));
    }
    if max_shift_ms < 0.0 {
        return Err(Error::InvalidInput("max shift must be non-negative".into()));
    }
    let max_shift = (max_shift_ms * sample_rate as f64 / 1000.0).round() as isize;
    let n = estimate.len() as isize;
    if max_shift >= n {
        return Err(Error::InvalidInput("shift range exceeds signal length".into()));
    }
    let mut best = (f64::NEG_INFINITY, 0isize);
    for s in -max_shift..=max_shift {
        let (e, t) = if s >= 0 {
            (&estimate[s as usize..], &target[..(n - s) as usize])
        } else {
            (&estimate[..(n + s) as usize], &target[(-s) as usize..])
        };
        if t.iter().all(|&v| v == 0.0) {
            continue;
        }
        let v = si_snr(e, t)?;
        if v > best.0 {
            best = (v, s);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::SI_SNR_CAP_DB;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn delayed(x: &[f64], d: isize) -> Vec<f64> {
        (0..x.len() as isize)
            .map(|n| {
                let i = n - d;
                if i >= 0 && (i as usize) < x.len() {
                    x[i as usize]
                } else {
                    0.0
                }
            })
            .collect()
    }

    #[test]
    fn one_ms_delay_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y: Vec<f64> = (0..4000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let e = delayed(&y, 16);
        let plain = si_snr(&e, &y).unwrap();
        let (sit, shift) = shift_invariant_si_snr(&e, &y, 2.0, 16000).unwrap();
        assert_eq!(sit, SI_SNR_CAP_DB);
        assert_eq!(shift, 16);
        assert!(plain < 0.0);
    }

    #[test]
    fn zero_range_equals_plain() {
        let y: Vec<f64> = (0..500).map(|n| (n as f64 * 0.05).sin()).collect();
        let e: Vec<f64> = (0..500).map(|n| (n as f64 * 0.05).sin() + 0.2 * (n as f64 * 0.7).cos()).collect();
        let (v, s) = shift_invariant_si_snr(&e, &y, 0.0, 16000).unwrap();
        assert_eq!(s, 0);
        assert_eq!(v, si_snr(&e, &y).unwrap());
    }

    #[test]
    fn random_planted_shifts() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let y: Vec<f64> = (0..1600).map(|_| rng.random_range(-1.0..1.0)).collect();
            let d = rng.random_range(-32i64..=32) as isize;
            let e: Vec<f64> = delayed(&y, d)
                .iter()
                .map(|v| v + 0.05 * rng.random_range(-1.0..1.0))
                .collect();
            let (_, s) = shift_invariant_si_snr(&e, &y, 2.0, 16000).unwrap();
            assert_eq!(s, d);
        }
    }
}
