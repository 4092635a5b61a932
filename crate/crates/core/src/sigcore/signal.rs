use crate::error::{Error, Result};

/// Multichannel observation: equal-length channels at one sample rate.
#[derive(Clone, Debug, PartialEq)]
pub struct MultichannelSignal {
    channels: Vec<Vec<f64>>,
    sample_rate: u32,
}

impl MultichannelSignal {
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidInput("signal needs at least one channel".into()));
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::Shape("channels differ in length".into()));
        }
        if channels.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("multichannel signal"));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        Ok(MultichannelSignal {
            channels,
            sample_rate,
        })
    }

    pub fn mono(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        Self::new(vec![samples], sample_rate)
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channel(&self, i: usize) -> &[f64] {
        &self.channels[i]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    pub fn duration_secs(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    /// Samples `[start, start + len)` of every channel, zero-filled past the end.
    pub fn slice(&self, start: usize, len: usize) -> MultichannelSignal {
        let channels = self
            .channels
            .iter()
            .map(|c| {
                (start..start + len)
                    .map(|n| c.get(n).copied().unwrap_or(0.0))
                    .collect()
            })
            .collect();
        MultichannelSignal {
            channels,
            sample_rate: self.sample_rate,
        }
    }

    /// Keeps only the listed channels, in the given order.
    pub fn select(&self, idx: &[usize]) -> Result<MultichannelSignal> {
        let channels = idx
            .iter()
            .map(|&i| {
                self.channels
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::InvalidInput(format!("channel {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        MultichannelSignal::new(channels, self.sample_rate)
    }
}
