//! Oracle beamformers: time-domain MVDR/MWF, frequency-domain MVDR/SDW-MWF and
//! mask-based MVDR/GEV, with covariances estimated from ground-truth signals over the
//! whole utterance or per non-overlapping segment.

mod covariance;
mod fd;
mod td;

pub use covariance::{
    estimate_covariance, ideal_binary_mask, magnitudes, segment_frames, IdealBinaryMask,
    SpatialCovariance, DIAGONAL_LOADING,
};
pub use fd::{
    apply_fd_beamformer, apply_fd_weights_into, fd_beamformer, principal_eigenvector,
    steering_from_covariance, FdBeamformerWeights, FdMethod, FdOptions,
};
pub use td::{
    apply_td_beamformer, correlation_matrix, mvdr_constraints, stacked, td_beamformer,
    trimmed_direct_paths, TdBeamformerWeights, TdMethod, TdOracle, DEFAULT_TD_TAPS,
};

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sigcore::{MultichannelSignal, Spectrogram, Stft};

/// STFT window for covariance estimation, in ms.
pub const ORACLE_WINDOW_MS: f64 = 64.0;
/// STFT hop for covariance estimation, in ms.
pub const ORACLE_HOP_MS: f64 = 16.0;

/// The six oracle systems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMethod {
    TdMvdr,
    TdMwf,
    FdMvdr,
    FdSdwMwf,
    MbMvdr,
    MbGev,
}

impl OracleMethod {
    pub const ALL: [OracleMethod; 6] = [
        OracleMethod::TdMvdr,
        OracleMethod::TdMwf,
        OracleMethod::FdMvdr,
        OracleMethod::FdSdwMwf,
        OracleMethod::MbMvdr,
        OracleMethod::MbGev,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OracleMethod::TdMvdr => "td-mvdr",
            OracleMethod::TdMwf => "td-mwf",
            OracleMethod::FdMvdr => "fd-mvdr",
            OracleMethod::FdSdwMwf => "fd-sdw-mwf",
            OracleMethod::MbMvdr => "mb-mvdr",
            OracleMethod::MbGev => "mb-gev",
        }
    }

    fn fd_method(self) -> Option<FdMethod> {
        match self {
            OracleMethod::FdMvdr => Some(FdMethod::Mvdr),
            OracleMethod::FdSdwMwf => Some(FdMethod::SdwMwf),
            OracleMethod::MbMvdr => Some(FdMethod::MbMvdr),
            OracleMethod::MbGev => Some(FdMethod::MbGev),
            _ => None,
        }
    }

    fn mask_based(self) -> bool {
        matches!(self, OracleMethod::MbMvdr | OracleMethod::MbGev)
    }
}

impl std::fmt::Display for OracleMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for OracleMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OracleMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = OracleMethod::ALL.iter().map(|m| m.name()).collect();
                Error::Config(format!(
                    "unknown oracle method '{s}'; valid methods: {}",
                    names.join(", ")
                ))
            })
    }
}

/// Ground-truth signals available to oracle systems.
#[derive(Clone, Copy, Debug)]
pub struct OracleSignals<'a> {
    pub mixture: &'a MultichannelSignal,
    /// Desired target component at every microphone.
    pub target_image: &'a MultichannelSignal,
    /// Direct-path target responses per microphone (time-domain MVDR only).
    pub direct_rirs: &'a [Vec<f64>],
    pub reference: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct OracleOptions {
    /// Segment length for covariance re-estimation; `None` uses the whole utterance.
    pub segment_ms: Option<f64>,
    /// FIR length for time-domain methods; `None` scales 512 taps at 16 kHz.
    pub td_taps: Option<usize>,
    pub fd: FdOptions,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            segment_ms: None,
            td_taps: None,
            fd: FdOptions::default(),
        }
    }
}

/// Multichannel spectrograms of the mixture, the target and the interference.
struct OracleStfts {
    mixture: Vec<Spectrogram>,
    target: Vec<Spectrogram>,
    interference: Vec<Spectrogram>,
}

fn oracle_stfts(sig: &OracleSignals, stft: &Stft) -> OracleStfts {
    let mut mixture = Vec::new();
    let mut target = Vec::new();
    let mut interference = Vec::new();
    for (x, s) in sig.mixture.channels().iter().zip(sig.target_image.channels()) {
        let n: Vec<f64> = x.iter().zip(s).map(|(a, b)| a - b).collect();
        mixture.push(stft.forward(x));
        target.push(stft.forward(s));
        interference.push(stft.forward(&n));
    }
    OracleStfts {
        mixture,
        target,
        interference,
    }
}

/// Segment index of every STFT frame: frame `t` (centered on sample `t·hop`) belongs to
/// segment `⌊t·hop / S⌋`, with trailing frames folded into the last segment.
fn frame_segments(n_frames: usize, hop: usize, signal_len: usize, segment_samples: Option<usize>) -> Vec<(usize, usize)> {
    let Some(seg) = segment_samples.filter(|&s| s < signal_len) else {
        return vec![(0, n_frames)];
    };
    let n_seg = signal_len.div_ceil(seg);
    let mut ranges: Vec<(usize, usize)> = Vec::with_capacity(n_seg);
    let mut current = usize::MAX;
    for t in 0..n_frames {
        let k = ((t * hop) / seg).min(n_seg - 1);
        if k == current {
            ranges.last_mut().expect("segment started").1 = t + 1;
        } else {
            ranges.push((t, t + 1));
            current = k;
        }
    }
    ranges
}

/// Runs one oracle beamformer and returns the enhanced reference-channel estimate.
pub fn segment_beamform(method: OracleMethod, sig: &OracleSignals, opts: &OracleOptions) -> Result<Vec<f64>> {
    let mixture = sig.mixture;
    if sig.target_image.n_channels() != mixture.n_channels() || sig.target_image.len() != mixture.len() {
        return Err(Error::Shape("target image must match the mixture".into()));
    }
    if sig.reference >= mixture.n_channels() {
        return Err(Error::InvalidInput("reference channel out of range".into()));
    }
    let fs = mixture.sample_rate();
    if let Some(s) = opts.segment_ms {
        if !(s > 0.0) {
            return Err(Error::InvalidInput("segment length must be positive".into()));
        }
    }
    let segment_samples = opts
        .segment_ms
        .map(|ms| ((ms * fs as f64 / 1000.0).round() as usize).max(1));

    let Some(fd_method) = method.fd_method() else {
        if segment_samples.is_some_and(|s| s < mixture.len()) {
            return Err(Error::InvalidInput(format!(
                "{method} is estimated over the whole utterance; segments apply to frequency-domain methods"
            )));
        }
        let taps = opts
            .td_taps
            .unwrap_or_else(|| (DEFAULT_TD_TAPS as f64 * fs as f64 / 16000.0).round() as usize);
        let target_ref = sig.target_image.channel(sig.reference);
        let oracle = TdOracle {
            target_ref,
            direct_rirs: sig.direct_rirs,
            reference: sig.reference,
        };
        let td = if method == OracleMethod::TdMvdr { TdMethod::Mvdr } else { TdMethod::Mwf };
        let w = td_beamformer(td, mixture, &oracle, taps)?;
        return apply_td_beamformer(&w, mixture);
    };

    let stft = Stft::from_ms(fs, ORACLE_WINDOW_MS, ORACLE_HOP_MS)?;
    let specs = oracle_stfts(sig, &stft);
    let (t_len, f_len) = (specs.mixture[0].n_frames(), specs.mixture[0].n_bins());
    let mask = if method.mask_based() {
        let m = ideal_binary_mask(
            &magnitudes(&specs.target[sig.reference]),
            &magnitudes(&specs.interference[sig.reference]),
        )?;
        Some((m.clone(), m.complement()))
    } else {
        None
    };
    let mut out = Spectrogram {
        frames: vec![vec![Complex64::new(0.0, 0.0); f_len]; t_len],
        signal_len: mixture.len(),
    };
    for range in frame_segments(t_len, stft.hop, mixture.len(), segment_samples) {
        let (phi_s, phi_n) = match &mask {
            Some((m, mc)) => (
                estimate_covariance(&specs.mixture, Some(m), Some(range))?,
                estimate_covariance(&specs.mixture, Some(mc), Some(range))?,
            ),
            None => (
                estimate_covariance(&specs.target, None, Some(range))?,
                estimate_covariance(&specs.interference, None, Some(range))?,
            ),
        };
        let w = fd_beamformer(fd_method, &phi_s, &phi_n, sig.reference, opts.fd)?;
        apply_fd_weights_into(&w, &specs.mixture, Some(range), &mut out)?;
    }
    Ok(stft.inverse(&out))
}

/// Full-utterance oracle beamformer.
pub fn oracle_beamform(method: OracleMethod, sig: &OracleSignals) -> Result<Vec<f64>> {
    segment_beamform(method, sig, &OracleOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in OracleMethod::ALL {
            assert_eq!(m.name().parse::<OracleMethod>().unwrap(), m);
        }
        let err = "beamformit".parse::<OracleMethod>().unwrap_err().to_string();
        assert!(err.contains("fd-sdw-mwf") && err.contains("td-mvdr"));
    }

    #[test]
    fn segments_cover_frames_in_order() {
        let r = frame_segments(20, 4, 70, Some(16));
        assert_eq!(r.first().unwrap().0, 0);
        assert_eq!(r.last().unwrap().1, 20);
        assert!(r.windows(2).all(|w| w[0].1 == w[1].0));
        assert_eq!(r.len(), 5);
        assert_eq!(frame_segments(20, 4, 70, Some(100)), vec![(0, 20)]);
        assert_eq!(frame_segments(20, 4, 70, None), vec![(0, 20)]);
    }
}
