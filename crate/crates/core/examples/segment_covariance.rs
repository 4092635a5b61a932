//! Estimates spatial covariances from oracle target and interference spectrograms,
//! per 500 ms segment, and checks the MVDR distortionless constraint and the GEV
//! output SNR in each segment.
//!
//! cargo run --release --example segment_covariance

use fasbeam::oraclebf::{
    estimate_covariance, fd_beamformer, segment_frames, steering_from_covariance, FdMethod, FdOptions,
    ORACLE_HOP_MS, ORACLE_WINDOW_MS,
};
use fasbeam::scenesim::{sample_scene, SceneConfig};
use fasbeam::sigcore::Stft;

fn main() -> fasbeam::Result<()> {
    let cfg = SceneConfig {
        n_mics: 4,
        ..SceneConfig::toy()
    };
    let (speech, noise) = cfg.pool.load(cfg.sample_rate)?;
    let scene = sample_scene(&cfg, 3, &speech, &noise)?;
    let fs = cfg.sample_rate;
    let stft = Stft::from_ms(fs, ORACLE_WINDOW_MS, ORACLE_HOP_MS)?;

    let target = &scene.direct_images[0];
    let mut s_spec = Vec::new();
    let mut n_spec = Vec::new();
    for (x, s) in scene.mixture.channels().iter().zip(target.channels()) {
        let n: Vec<f64> = x.iter().zip(s).map(|(a, b)| a - b).collect();
        s_spec.push(stft.forward(s));
        n_spec.push(stft.forward(&n));
    }
    let n_frames = s_spec[0].n_frames();
    let seg_ms = 500.0;
    let mut start = 0.0;
    while start < scene.mixture.duration_secs() * 1000.0 {
        let range = segment_frames(&stft, fs, n_frames, start, seg_ms)?;
        let phi_s = estimate_covariance(&s_spec, None, Some(range))?;
        let phi_n = estimate_covariance(&n_spec, None, Some(range))?;
        let mvdr = fd_beamformer(FdMethod::Mvdr, &phi_s, &phi_n, 0, FdOptions::default())?;
        let d = steering_from_covariance(&phi_s, 0);
        let worst = mvdr
            .w
            .iter()
            .zip(&d)
            .map(|(w, d)| (w.dotc(d) - 1.0).norm())
            .fold(0.0, f64::max);
        let gev = fd_beamformer(FdMethod::MbGev, &phi_s, &phi_n, 0, FdOptions::default())?;
        let snr: f64 = gev
            .w
            .iter()
            .enumerate()
            .map(|(f, w)| {
                let num = w.dotc(&(&phi_s.phi[f] * w)).re;
                let den = w.dotc(&(phi_n.loaded(f) * w)).re;
                10.0 * (num / den).log10()
            })
            .sum::<f64>()
            / gev.w.len() as f64;
        let input: f64 = (0..phi_s.n_bins())
            .map(|f| 10.0 * (phi_s.phi[f][(0, 0)].re / phi_n.loaded(f)[(0, 0)].re).log10())
            .sum::<f64>()
            / phi_s.n_bins() as f64;
        println!(
            "segment at {start:>5.0} ms: frames {:>3}..{:<3} max |w^H d - 1| {worst:.1e}, mean SNR {input:.1} dB at mic 0, {snr:.1} dB after GEV",
            range.0, range.1
        );
        start += seg_ms;
    }
    Ok(())
}
