use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of sound in m/s.
pub const SPEED_OF_SOUND: f64 = 343.0;
/// Length of the windowed-sinc fractional-delay kernel.
pub const SINC_TAPS: usize = 81;

/// Shoebox room with uniform wall reflection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomSpec {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    /// Reverberation time in seconds.
    pub t60: f64,
    /// Wall absorption coefficient derived from `t60` with Eyring's formula.
    pub absorption: f64,
}

impl RoomSpec {
    pub fn new(length: f64, width: f64, height: f64, t60: f64) -> Result<Self> {
        if !(length > 0.0 && width > 0.0 && height > 0.0) {
            return Err(Error::InvalidInput("room dimensions must be positive".into()));
        }
        if !(t60 > 0.0) {
            return Err(Error::InvalidInput("t60 must be positive".into()));
        }
        Ok(RoomSpec {
            length,
            width,
            height,
            t60,
            absorption: eyring_absorption(length, width, height, t60),
        })
    }

    /// Pressure reflection coefficient `sqrt(1 − α)`.
    pub fn reflection(&self) -> f64 {
        (1.0 - self.absorption).max(0.0).sqrt()
    }

    pub fn dims(&self) -> [f64; 3] {
        [self.length, self.width, self.height]
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        p.iter().zip(self.dims()).all(|(&x, d)| x > 0.0 && x < d)
    }
}

/// Absorption `α = 1 − exp(−0.161 V / (S T60))`.
pub fn eyring_absorption(l: f64, w: f64, h: f64, t60: f64) -> f64 {
    let v = l * w * h;
    let s = 2.0 * (l * w + l * h + w * h);
    (1.0 - (-0.161 * v / (s * t60)).exp()).clamp(0.0, 1.0)
}

/// How far the image expansion goes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RirExtent {
    /// All images up to this total reflection order.
    MaxOrder(usize),
    /// All images arriving within this many samples; the response has this length.
    Samples(usize),
}

/// Adds `amp · δ(n − delay)` realized with a Hann-windowed sinc.
fn add_fractional_impulse(h: &mut [f64], delay: f64, amp: f64) {
    let half = (SINC_TAPS / 2) as isize;
    let center = delay.round() as isize;
    let first = center - half;
    let sin_pt = (std::f64::consts::PI * delay).sin();
    let step = 2.0 * std::f64::consts::PI / SINC_TAPS as f64;
    // cos(step · (n − delay)) by rotation
    let theta0 = step * (first as f64 - delay);
    let (mut c, mut s) = (theta0.cos(), theta0.sin());
    let (cr, sr) = (step.cos(), step.sin());
    for k in 0..SINC_TAPS as isize {
        let n = first + k;
        if n >= 0 && (n as usize) < h.len() {
            let x = n as f64 - delay;
            let sinc = if x.abs() < 1e-12 {
                1.0
            } else {
                let sign = if n.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                -sign * sin_pt / (std::f64::consts::PI * x)
            };
            h[n as usize] += amp * 0.5 * (1.0 + c) * sinc;
        }
        let nc = c * cr - s * sr;
        s = s * cr + c * sr;
        c = nc;
    }
}

/// Allen–Berkley image-source impulse response from `source` to `mic`, with amplitude
/// `β^order / (4π d)` and delay `d / c` per image.
pub fn image_method_rir(room: &RoomSpec, source: [f64; 3], mic: [f64; 3], sample_rate: u32, extent: RirExtent) -> Result<Vec<f64>> {
    if !room.contains(source) || !room.contains(mic) {
        return Err(Error::InvalidInput("source and microphone must lie inside the room".into()));
    }
    let d0 = dist(source, mic);
    if d0 < 1e-3 {
        return Err(Error::InvalidInput("source coincides with microphone".into()));
    }
    let fs = sample_rate as f64;
    let dims = room.dims();
    let beta = room.reflection();
    let half = (SINC_TAPS / 2) as f64;
    let (max_order, max_dist, len) = match extent {
        RirExtent::MaxOrder(k) => {
            // farthest image of order k is within (k + 1) room diagonals
            let diag = dims.iter().map(|d| d * d).sum::<f64>().sqrt();
            let far = (k as f64 + 1.0) * 2.0 * diag + d0;
            (k, far, 0)
        }
        RirExtent::Samples(n) => (usize::MAX, (n as f64 + half) * SPEED_OF_SOUND / fs, n),
    };
    // per-axis image coordinates and reflection counts
    let axis = |a: usize| -> Vec<(f64, usize)> {
        let l = dims[a];
        let n_max = (max_dist / (2.0 * l)).ceil() as i64 + 1;
        let mut out = Vec::new();
        for q in 0..2i64 {
            for n in -n_max..=n_max {
                let pos = (1 - 2 * q) as f64 * source[a] + 2.0 * n as f64 * l;
                let order = ((n - q).abs() + n.abs()) as usize;
                let d = pos - mic[a];
                if d.abs() <= max_dist && order <= max_order {
                    out.push((d, order));
                }
            }
        }
        out
    };
    let (ax, ay, az) = (axis(0), axis(1), axis(2));
    let mut images = Vec::new();
    for &(dx, ox) in &ax {
        for &(dy, oy) in &ay {
            let dxy = dx * dx + dy * dy;
            if dxy > max_dist * max_dist || ox + oy > max_order {
                continue;
            }
            for &(dz, oz) in &az {
                let d2 = dxy + dz * dz;
                let order = ox + oy + oz;
                if d2 > max_dist * max_dist || order > max_order {
                    continue;
                }
                images.push((d2.sqrt(), order));
            }
        }
    }
    let len = if len > 0 {
        len
    } else {
        let far = images.iter().fold(0.0f64, |m, &(d, _)| m.max(d));
        (far / SPEED_OF_SOUND * fs).ceil() as usize + SINC_TAPS
    };
    let max_used = images.iter().map(|&(_, o)| o).max().unwrap_or(0);
    let mut pow = vec![1.0; max_used + 1];
    for k in 1..pow.len() {
        pow[k] = pow[k - 1] * beta;
    }
    let mut h = vec![0.0; len];
    for (d, order) in images {
        let amp = pow[order] / (4.0 * std::f64::consts::PI * d);
        if amp == 0.0 {
            continue;
        }
        add_fractional_impulse(&mut h, d / SPEED_OF_SOUND * fs, amp);
    }
    Ok(h)
}

/// Line-of-sight component only, padded to `len` samples.
pub fn direct_path_rir(source: [f64; 3], mic: [f64; 3], sample_rate: u32, len: usize) -> Result<Vec<f64>> {
    let d = dist(source, mic);
    if d < 1e-3 {
        return Err(Error::InvalidInput("source coincides with microphone".into()));
    }
    let delay = d / SPEED_OF_SOUND * sample_rate as f64;
    let len = len.max(delay.ceil() as usize + SINC_TAPS);
    let mut h = vec![0.0; len];
    add_fractional_impulse(&mut h, delay, 1.0 / (4.0 * std::f64::consts::PI * d));
    Ok(h)
}

pub fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}
