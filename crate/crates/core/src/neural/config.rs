use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::MAX_PIT_SOURCES;

/// Architecture of a FaSNet model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FasnetConfig {
    /// Frame length `L` in samples.
    pub frame_len: usize,
    /// Hop `H` in samples.
    pub hop: usize,
    /// Embedding dimension `K`.
    pub embed_dim: usize,
    /// Blocks per repeat `P`.
    pub blocks_per_repeat: usize,
    /// Repeats `R`.
    pub repeats: usize,
    /// Block input channels `B`.
    pub bottleneck: usize,
    /// Block hidden channels `Hc`.
    pub hidden: usize,
    /// Depthwise kernel size (odd).
    pub kernel: usize,
    /// Number of sources `C`.
    pub sources: usize,
    /// Number of microphones `N`.
    pub channels: usize,
    pub causal: bool,
}

impl Default for FasnetConfig {
    fn default() -> Self {
        FasnetConfig {
            frame_len: 256,
            hop: 128,
            embed_dim: 64,
            blocks_per_repeat: 5,
            repeats: 2,
            bottleneck: 64,
            hidden: 320,
            kernel: 3,
            sources: 1,
            channels: 2,
            causal: false,
        }
    }
}

impl FasnetConfig {
    /// The gradient-check configuration: L=16, K=8, P=2, R=1, N=2, C=1.
    pub fn tiny() -> Self {
        FasnetConfig {
            frame_len: 16,
            hop: 8,
            embed_dim: 8,
            blocks_per_repeat: 2,
            repeats: 1,
            bottleneck: 8,
            hidden: 16,
            kernel: 3,
            sources: 1,
            channels: 2,
            causal: false,
        }
    }

    /// Reduced model for desk-scale training: K=B=32, Hc=64, P=4, R=2, `H = L/2`.
    pub fn toy(sample_rate: u32, frame_ms: f64) -> Self {
        FasnetConfig {
            embed_dim: 32,
            blocks_per_repeat: 4,
            repeats: 2,
            bottleneck: 32,
            hidden: 64,
            ..FasnetConfig::default()
        }
        .with_frame_ms(sample_rate, frame_ms)
    }

    /// Sets `L` from a duration and `H = L/2`.
    pub fn with_frame_ms(mut self, sample_rate: u32, frame_ms: f64) -> Self {
        self.frame_len = (frame_ms * sample_rate as f64 / 1000.0).round() as usize;
        self.hop = (self.frame_len / 2).max(1);
        self
    }

    /// Number of filter taps `2L+1`.
    pub fn taps(&self) -> usize {
        2 * self.frame_len + 1
    }

    /// TCN input width `K + 2L + 1`.
    pub fn feature_dim(&self) -> usize {
        self.embed_dim + self.taps()
    }

    /// Algorithmic latency `2L` in samples.
    pub fn latency(&self) -> usize {
        2 * self.frame_len
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.frame_len < 2 {
            return fail("frame_len must be at least 2");
        }
        if self.hop == 0 || self.hop > self.frame_len {
            return fail("hop must be in 1..=frame_len");
        }
        if self.embed_dim == 0 || self.bottleneck == 0 || self.hidden == 0 {
            return fail("embed_dim, bottleneck and hidden must be positive");
        }
        if self.blocks_per_repeat == 0 || self.repeats == 0 {
            return fail("blocks_per_repeat and repeats must be positive");
        }
        if self.blocks_per_repeat > 16 {
            return fail("blocks_per_repeat above 16 overflows the dilation schedule");
        }
        if self.kernel == 0 || self.kernel % 2 == 0 {
            return fail("kernel must be odd");
        }
        if self.sources == 0 || self.sources > MAX_PIT_SOURCES {
            return fail("sources must be in 1..=4");
        }
        if self.channels < 2 {
            return fail("beamforming needs at least 2 channels");
        }
        Ok(())
    }

    /// Frames on either side that can influence a non-causal output frame.
    pub fn receptive_half_width(&self) -> usize {
        let per_repeat: usize = (0..self.blocks_per_repeat)
            .map(|p| (self.kernel - 1) / 2 * (1 << p))
            .sum();
        self.repeats * per_repeat
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        FasnetConfig::default().validate().unwrap();
        FasnetConfig::tiny().validate().unwrap();
        assert_eq!(FasnetConfig::default().receptive_half_width(), 2 * 31);
    }

    #[test]
    fn bad_configs_rejected() {
        let bad = [
            FasnetConfig { channels: 1, ..FasnetConfig::tiny() },
            FasnetConfig { hop: 0, ..FasnetConfig::tiny() },
            FasnetConfig { hop: 17, ..FasnetConfig::tiny() },
            FasnetConfig { kernel: 4, ..FasnetConfig::tiny() },
            FasnetConfig { sources: 5, ..FasnetConfig::tiny() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn frame_ms_sets_half_hop() {
        let c = FasnetConfig::default().with_frame_ms(8000, 16.0);
        assert_eq!((c.frame_len, c.hop), (128, 64));
    }
}
