use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform circular array of omnidirectional microphones in a horizontal plane.
/// Microphone `i` sits at angle `2π i / N` from the +x axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySpec {
    pub center: [f64; 2],
    pub n_mics: usize,
    pub diameter: f64,
    pub height: f64,
}

impl ArraySpec {
    pub fn circular(center: [f64; 2], n_mics: usize, diameter: f64, height: f64) -> Result<Self> {
        if n_mics == 0 {
            return Err(Error::InvalidInput("array needs at least one microphone".into()));
        }
        if !(diameter >= 0.0) {
            return Err(Error::InvalidInput("array diameter must be non-negative".into()));
        }
        Ok(ArraySpec {
            center,
            n_mics,
            diameter,
            height,
        })
    }

    pub fn radius(&self) -> f64 {
        self.diameter / 2.0
    }

    pub fn mic_angle(&self, i: usize) -> f64 {
        2.0 * std::f64::consts::PI * i as f64 / self.n_mics as f64
    }

    /// Offset of microphone `i` from the array center in the horizontal plane.
    pub fn mic_offset(&self, i: usize) -> [f64; 2] {
        if self.n_mics == 1 {
            return [0.0, 0.0];
        }
        let a = self.mic_angle(i);
        [self.radius() * a.cos(), self.radius() * a.sin()]
    }

    pub fn mic_positions(&self) -> Vec<[f64; 3]> {
        (0..self.n_mics)
            .map(|i| {
                let o = self.mic_offset(i);
                [self.center[0] + o[0], self.center[1] + o[1], self.height]
            })
            .collect()
    }

    /// Largest distance between two microphones.
    pub fn aperture(&self) -> f64 {
        let p = self.mic_positions();
        let mut m = 0.0f64;
        for a in &p {
            for b in &p {
                m = m.max(super::dist(*a, *b));
            }
        }
        m
    }
}
