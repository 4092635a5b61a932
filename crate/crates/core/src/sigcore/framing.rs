//! Framing with ±L context windows and count-normalized overlap-add.
//!
//! Frame `t` of a channel covers samples `[tH, tH + L)`; its context window covers
//! `[tH - L, tH + 2L)`. Anything outside `[0, l)` reads as zero.

use serde::{Deserialize, Serialize};

use super::MultichannelSignal;
use crate::error::{Error, Result};
use crate::tensor::Mat;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameGrid {
    pub frame_len: usize,
    pub hop: usize,
    pub n_frames: usize,
    pub total_len: usize,
}

impl FrameGrid {
    pub fn new(total_len: usize, frame_len: usize, hop: usize) -> Result<Self> {
        if frame_len < 2 {
            return Err(Error::InvalidInput(format!(
                "frame length must be >= 2, got {frame_len}"
            )));
        }
        if hop == 0 || hop > frame_len {
            return Err(Error::InvalidInput(format!(
                "hop must satisfy 1 <= H <= L, got H={hop}, L={frame_len}"
            )));
        }
        if total_len == 0 {
            return Err(Error::InvalidInput("signal is empty".into()));
        }
        let n_frames = if total_len <= frame_len {
            1
        } else {
            (total_len - frame_len).div_ceil(hop) + 1
        };
        Ok(FrameGrid {
            frame_len,
            hop,
            n_frames,
            total_len,
        })
    }

    /// First sample index of frame `t`.
    pub fn start(&self, t: usize) -> usize {
        t * self.hop
    }

    /// Number of frames that cover each output sample.
    pub fn overlap_counts(&self) -> Vec<f64> {
        let mut counts = vec![0.0; self.total_len];
        for t in 0..self.n_frames {
            let s = self.start(t);
            for c in counts.iter_mut().skip(s).take(self.frame_len) {
                *c += 1.0;
            }
        }
        counts
    }
}

/// One frame of one channel together with its context window.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextFrame {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub frame_index: usize,
    pub channel_index: usize,
}

fn read(x: &[f64], idx: isize) -> f64 {
    if idx < 0 {
        0.0
    } else {
        x.get(idx as usize).copied().unwrap_or(0.0)
    }
}

/// Center frames (`T×L`) and context windows (`T×3L`) of one channel.
pub fn frame_matrices(x: &[f64], grid: &FrameGrid) -> (Mat, Mat) {
    let l = grid.frame_len;
    let mut centers = Mat::zeros(grid.n_frames, l);
    let mut contexts = Mat::zeros(grid.n_frames, 3 * l);
    for t in 0..grid.n_frames {
        let s = grid.start(t) as isize;
        for (n, v) in centers.row_mut(t).iter_mut().enumerate() {
            *v = read(x, s + n as isize);
        }
        for (n, v) in contexts.row_mut(t).iter_mut().enumerate() {
            *v = read(x, s - l as isize + n as isize);
        }
    }
    (centers, contexts)
}

/// Splits every channel into frames of `frame_len` samples with hop `hop`.
pub fn frame_signal(
    x: &MultichannelSignal,
    frame_len: usize,
    hop: usize,
) -> Result<(FrameGrid, Vec<Vec<ContextFrame>>)> {
    let grid = FrameGrid::new(x.len(), frame_len, hop)?;
    let frames = x
        .channels()
        .iter()
        .enumerate()
        .map(|(i, ch)| {
            let (centers, contexts) = frame_matrices(ch, &grid);
            (0..grid.n_frames)
                .map(|t| ContextFrame {
                    center: centers.row(t).to_vec(),
                    context: contexts.row(t).to_vec(),
                    frame_index: t,
                    channel_index: i,
                })
                .collect()
        })
        .collect();
    Ok((grid, frames))
}

/// Places frames at `tH`, sums them and divides by the per-sample overlap count.
pub fn overlap_add(frames: &Mat, grid: &FrameGrid) -> Result<Vec<f64>> {
    if frames.rows != grid.n_frames || frames.cols != grid.frame_len {
        return Err(Error::Shape(format!(
            "overlap_add expects {}x{} frames, got {}x{}",
            grid.n_frames, grid.frame_len, frames.rows, frames.cols
        )));
    }
    let mut out = vec![0.0; grid.total_len];
    for t in 0..grid.n_frames {
        let s = grid.start(t);
        for (o, v) in out.iter_mut().skip(s).zip(frames.row(t)) {
            *o += v;
        }
    }
    for (o, c) in out.iter_mut().zip(grid.overlap_counts()) {
        if c > 0.0 {
            *o /= c;
        }
    }
    Ok(out)
}
