use std::f64::consts::PI;

use fasbeam::neural::{fasnet_forward, init_model, FasnetConfig};
use fasbeam::objectives::{mel_si_mse, neg_si_snr, upit_loss, MelBank, StftConfig};
use fasbeam::sigcore::{frame_matrices, overlap_add, FrameGrid, MultichannelSignal};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Mel SI-MSE written out directly: normalize, pad by half a window, periodic Hann,
/// naive DFT, triangular HTK-mel filters, mean squared difference.
fn mel_si_mse_reference(est: &[f64], tgt: &[f64], win: usize, hop: usize, n_mels: usize, fs: f64) -> f64 {
    let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
    let hz = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let bins = win / 2 + 1;
    let top = mel(fs / 2.0);
    let edges: Vec<f64> = (0..n_mels + 2).map(|i| hz(top * i as f64 / (n_mels + 1) as f64)).collect();
    let features = |x: &[f64]| -> Vec<Vec<f64>> {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let pad = win / 2;
        let padded_len = pad + x.len() + win / 2;
        let frames = if padded_len <= win { 1 } else { (padded_len - win).div_ceil(hop) + 1 };
        (0..frames)
            .map(|t| {
                let seg: Vec<f64> = (0..win)
                    .map(|n| {
                        let idx = (t * hop + n) as isize - pad as isize;
                        let v = if idx >= 0 && (idx as usize) < x.len() { x[idx as usize] / norm } else { 0.0 };
                        v * (0.5 - 0.5 * (2.0 * PI * n as f64 / win as f64).cos())
                    })
                    .collect();
                let mags: Vec<f64> = (0..bins)
                    .map(|k| {
                        let (mut re, mut im) = (0.0, 0.0);
                        for (n, v) in seg.iter().enumerate() {
                            let a = -2.0 * PI * (k * n) as f64 / win as f64;
                            re += v * a.cos();
                            im += v * a.sin();
                        }
                        (re * re + im * im).sqrt()
                    })
                    .collect();
                (0..n_mels)
                    .map(|d| {
                        mags.iter()
                            .enumerate()
                            .map(|(k, m)| {
                                let f = k as f64 * fs / win as f64;
                                let (lo, c, hi) = (edges[d], edges[d + 1], edges[d + 2]);
                                let w = if f > lo && f <= c {
                                    (f - lo) / (c - lo)
                                } else if f > c && f < hi {
                                    (hi - f) / (hi - c)
                                } else {
                                    0.0
                                };
                                w * m
                            })
                            .sum()
                    })
                    .collect()
            })
            .collect()
    };
    let (a, b) = (features(est), features(tgt));
    let count = (a.len() * n_mels) as f64;
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        / count
}

#[test]
fn mel_si_mse_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let fs = 8000;
    let cfg = StftConfig::for_rate(fs);
    let bank = MelBank::default_for(&cfg, fs).unwrap();
    for len in [300, 777, 1600] {
        let t = noise(&mut rng, len);
        let e: Vec<f64> = t.iter().zip(noise(&mut rng, len)).map(|(a, b)| 2.0 * a + 0.5 * b).collect();
        let got = mel_si_mse(&e, &t, &cfg, &bank).unwrap();
        let want = mel_si_mse_reference(&e, &t, cfg.window_len, cfg.hop, 40, fs as f64);
        assert!((got - want).abs() <= 1e-9 * want.abs().max(1e-12), "{got} vs {want}");
        // scale invariance of the estimate
        let scaled: Vec<f64> = e.iter().map(|v| 7.5 * v).collect();
        assert!((mel_si_mse(&scaled, &t, &cfg, &bank).unwrap() - got).abs() < 1e-12);
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn upit_equals_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for c in [2, 3] {
        for _ in 0..100 {
            let len = rng.random_range(20..200);
            let targets: Vec<Vec<f64>> = (0..c).map(|_| noise(&mut rng, len)).collect();
            let estimates: Vec<Vec<f64>> = (0..c)
                .map(|_| {
                    let k = rng.random_range(0..c);
                    let w = rng.random_range(0.0..2.0);
                    targets[k].iter().zip(noise(&mut rng, len)).map(|(t, n)| t + w * n).collect()
                })
                .collect();
            let (loss, perm) = upit_loss(&estimates, &targets, neg_si_snr).unwrap();
            let brute = permutations(c)
                .into_iter()
                .map(|p| {
                    let mut total = 0.0;
                    for (t, &k) in p.iter().enumerate() {
                        total += neg_si_snr(&estimates[k], &targets[t]).unwrap();
                    }
                    total / c as f64
                })
                .fold(f64::INFINITY, f64::min);
            assert_eq!(loss, brute);
            let mut seen = perm.clone();
            seen.sort();
            assert_eq!(seen, (0..c).collect::<Vec<_>>());
        }
    }
}

#[test]
fn output_ignores_order_of_non_reference_channels() {
    let cfg = FasnetConfig {
        channels: 4,
        sources: 2,
        ..FasnetConfig::tiny()
    };
    let model = init_model(&cfg, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let chans: Vec<Vec<f64>> = (0..4).map(|_| noise(&mut rng, 200)).collect();
    let x = MultichannelSignal::new(chans, 8000).unwrap();
    let base = fasnet_forward(&x, &model).unwrap();
    for order in [[0, 2, 1, 3], [0, 3, 2, 1], [0, 2, 3, 1]] {
        let y = fasnet_forward(&x.select(&order).unwrap(), &model).unwrap();
        for (a, b) in base.signals.iter().zip(&y.signals) {
            let err = a.iter().zip(b).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
            assert!(err < 1e-12, "order {order:?}: {err}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frame_then_overlap_add_is_identity(len in 1usize..600, half in 1usize..40, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = noise(&mut rng, len);
        let grid = FrameGrid::new(len, 2 * half, half).unwrap();
        let (centers, _) = frame_matrices(&x, &grid);
        let y = overlap_add(&centers, &grid).unwrap();
        let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        for (a, b) in y.iter().zip(&x) {
            prop_assert!((a - b).abs() / scale < 1e-10);
        }
    }
}
