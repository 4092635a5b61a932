use std::sync::Arc;

use super::graph::{Graph, Var};
use super::model::{FasnetModel, GateLayout, Layout, Norm, TcnLayout};
use crate::error::{Error, Result};
use crate::features::ncc_frames;
use crate::sigcore::{frame_matrices, FrameGrid, MultichannelSignal};
use crate::tensor::Mat;

/// Parameters bound into one graph.
struct Bound<'a> {
    vars: Vec<Var>,
    layout: &'a Layout,
}

impl Bound<'_> {
    fn v(&self, idx: usize) -> Var {
        self.vars[idx]
    }
}

fn norm(g: &mut Graph, x: Var, n: &Norm, p: &Bound, causal: bool) -> Var {
    g.layer_norm(x, p.v(n.gamma), p.v(n.beta), causal)
}

/// Temporal convolutional network over a `T×(K+2L+1)` feature sequence.
fn tcn(g: &mut Graph, x: Var, t: &TcnLayout, p: &Bound, causal: bool) -> Var {
    let x = norm(g, x, &t.in_norm, p, causal);
    let mut h = g.linear(x, p.v(t.bottleneck.w), p.v(t.bottleneck.b));
    let mut skip_sum: Option<Var> = None;
    for blk in &t.blocks {
        let y = g.linear(h, p.v(blk.conv_in.w), p.v(blk.conv_in.b));
        let y = g.prelu(y, p.v(blk.prelu1));
        let y = norm(g, y, &blk.norm1, p, causal);
        let y = g.depthwise_conv(y, p.v(blk.depthwise.w), p.v(blk.depthwise.b), blk.dilation, causal);
        let y = g.prelu(y, p.v(blk.prelu2));
        let y = norm(g, y, &blk.norm2, p, causal);
        let res = g.linear(y, p.v(blk.residual.w), p.v(blk.residual.b));
        h = g.add(h, res);
        let s = g.linear(y, p.v(blk.skip.w), p.v(blk.skip.b));
        skip_sum = Some(match skip_sum {
            Some(acc) => g.add(acc, s),
            None => s,
        });
    }
    let s = skip_sum.expect("at least one block");
    let s = g.prelu(s, p.v(t.out_prelu));
    g.linear(s, p.v(t.out.w), p.v(t.out.b))
}

fn gate(g: &mut Graph, p_in: Var, gl: &GateLayout, p: &Bound) -> Var {
    let a = g.linear(p_in, p.v(gl.w), p.v(gl.b));
    let a = g.tanh(a);
    let s = g.linear(p_in, p.v(gl.v), p.v(gl.q));
    let s = g.sigmoid(s);
    g.mul(a, s)
}

/// A recorded forward pass that can be differentiated.
pub struct ForwardPass {
    graph: Graph,
    n_params: usize,
    pub grid: FrameGrid,
    outputs: Vec<Var>,
    frame_outputs: Vec<Var>,
    filters: Vec<Vec<Var>>,
}

impl ForwardPass {
    /// Separated signals `y*_c`, each of the input length.
    pub fn signals(&self) -> Vec<Vec<f64>> {
        self.outputs
            .iter()
            .map(|&v| self.graph.value(v).data.clone())
            .collect()
    }

    /// Per-source `T×L` output frames before overlap-add.
    pub fn frame_outputs(&self) -> Vec<Mat> {
        self.frame_outputs
            .iter()
            .map(|&v| self.graph.value(v).clone())
            .collect()
    }

    /// Filters `filters[i][c]` (`T×(2L+1)`) for channel `i` and source `c`.
    pub fn filters(&self) -> Vec<Vec<Mat>> {
        self.filters
            .iter()
            .map(|per| per.iter().map(|&v| self.graph.value(v).clone()).collect())
            .collect()
    }

    /// Parameter gradients given the gradient of the loss with respect to each output
    /// signal. Unused parameters get zero gradients.
    pub fn backward(&self, model: &FasnetModel, output_grads: &[Vec<f64>]) -> Result<Vec<Mat>> {
        if output_grads.len() != self.outputs.len() {
            return Err(Error::Shape(format!(
                "{} output gradients for {} outputs",
                output_grads.len(),
                self.outputs.len()
            )));
        }
        let mut seeds = Vec::with_capacity(self.outputs.len());
        for (&v, g) in self.outputs.iter().zip(output_grads) {
            if g.len() != self.grid.total_len {
                return Err(Error::Shape("output gradient length mismatch".into()));
            }
            seeds.push((v, Mat::row_vector(g.clone())));
        }
        let grads = self.graph.backward_seeded(&seeds, self.n_params);
        Ok(grads
            .into_iter()
            .zip(&model.params)
            .map(|(g, p)| g.unwrap_or_else(|| Mat::zeros(p.value.rows, p.value.cols)))
            .collect())
    }
}

/// Output of [`fasnet_forward`].
#[derive(Clone, Debug)]
pub struct FasnetOutput {
    pub signals: Vec<Vec<f64>>,
    pub frame_outputs: Vec<Mat>,
    /// `filters[i][c]`: `T×(2L+1)` filters for channel `i`, source `c`.
    pub filters: Vec<Vec<Mat>>,
    pub grid: FrameGrid,
}

/// Runs both stages on an `N`-channel observation. Channel 0 is the reference.
pub fn fasnet_forward(x: &MultichannelSignal, model: &FasnetModel) -> Result<FasnetOutput> {
    let pass = fasnet_graph(x, model)?;
    Ok(FasnetOutput {
        signals: pass.signals(),
        frame_outputs: pass.frame_outputs(),
        filters: pass.filters(),
        grid: pass.grid,
    })
}

/// Like [`fasnet_forward`] but keeps the recorded graph for [`ForwardPass::backward`].
pub fn fasnet_graph(x: &MultichannelSignal, model: &FasnetModel) -> Result<ForwardPass> {
    let cfg = &model.config;
    cfg.validate()?;
    let n = x.n_channels();
    if n < 2 {
        return Err(Error::InvalidInput(
            "beamforming needs at least 2 channels".into(),
        ));
    }
    if n != cfg.channels {
        return Err(Error::Shape(format!(
            "model expects {} channels, got {n}",
            cfg.channels
        )));
    }
    let layout = Layout::new(cfg);
    let grid = FrameGrid::new(x.len(), cfg.frame_len, cfg.hop)?;
    let framed: Vec<(Mat, Arc<Mat>)> = x
        .channels()
        .iter()
        .map(|ch| {
            let (centers, contexts) = frame_matrices(ch, &grid);
            (centers, Arc::new(contexts))
        })
        .collect();

    // stage-1 NCC is a function of the input only
    let mut pooled = Mat::zeros(grid.n_frames, cfg.taps());
    for (centers, _) in &framed[1..] {
        let f = ncc_frames(&framed[0].1, centers)?;
        for (a, b) in pooled.data.iter_mut().zip(&f.data) {
            *a += b;
        }
    }
    let inv = 1.0 / (n - 1) as f64;
    pooled.data.iter_mut().for_each(|v| *v *= inv);

    let mut g = Graph::new();
    let vars = model
        .params
        .iter()
        .enumerate()
        .map(|(i, p)| g.param(i, p.value.clone()))
        .collect();
    let p = Bound {
        vars,
        layout: &layout,
    };
    let l = &p.layout;
    let taps = cfg.taps();

    let ref_centers = g.input(framed[0].0.clone());
    let r1 = g.matmul(ref_centers, p.v(l.embed));
    let f1 = g.input(pooled);
    let feat1 = g.concat(r1, f1);
    let p1 = tcn(&mut g, feat1, &l.tcn1, &p, cfg.causal);
    let h1_all = gate(&mut g, p1, &l.gate1, &p);

    let mut filters: Vec<Vec<Var>> = vec![Vec::new(); n];
    let mut stage1 = Vec::with_capacity(cfg.sources);
    for c in 0..cfg.sources {
        let h = g.slice_cols(h1_all, c * taps, taps);
        filters[0].push(h);
        stage1.push(g.frame_filter(h, framed[0].1.clone()));
    }

    let embeds: Vec<Var> = framed[1..]
        .iter()
        .map(|(centers, _)| {
            let xc = g.input(centers.clone());
            g.matmul(xc, p.v(l.embed))
        })
        .collect();

    let mut outputs = Vec::with_capacity(cfg.sources);
    let mut frame_outputs = Vec::with_capacity(cfg.sources);
    for &y1 in &stage1 {
        let mut total = y1;
        for (i, (_, ctx)) in framed.iter().enumerate().skip(1) {
            let f = g.ncc(y1, ctx.clone());
            let feat = g.concat(embeds[i - 1], f);
            let p2 = tcn(&mut g, feat, &l.tcn2, &p, cfg.causal);
            let h = gate(&mut g, p2, &l.gate2, &p);
            filters[i].push(h);
            let yi = g.frame_filter(h, ctx.clone());
            total = g.add(total, yi);
        }
        frame_outputs.push(total);
        outputs.push(g.overlap_add(total, grid));
    }

    Ok(ForwardPass {
        graph: g,
        n_params: model.params.len(),
        grid,
        outputs,
        frame_outputs,
        filters,
    })
}

/// Linear frame embedding `R = x U`.
pub fn embed(center_frame: &[f64], u: &Mat) -> Result<Vec<f64>> {
    if center_frame.len() != u.rows {
        return Err(Error::Shape(format!(
            "frame of length {} for embedding with {} rows",
            center_frame.len(),
            u.rows
        )));
    }
    let mut out = vec![0.0; u.cols];
    for (x, row) in center_frame.iter().zip(0..u.rows) {
        for (o, w) in out.iter_mut().zip(u.row(row)) {
            *o += x * w;
        }
    }
    Ok(out)
}

/// Gated output layer `tanh(pW + b) ⊙ σ(pV + q)`.
pub fn gated_filters(p: &[f64], w: &Mat, b: &[f64], v: &Mat, q: &[f64]) -> Result<Vec<f64>> {
    if p.len() != w.rows || w.shape() != v.shape() || b.len() != w.cols || q.len() != w.cols {
        return Err(Error::Shape("gated_filters: inconsistent shapes".into()));
    }
    let a = embed(p, w)?;
    let s = embed(p, v)?;
    Ok(a.iter()
        .zip(&s)
        .zip(b.iter().zip(q))
        .map(|((a, s), (b, q))| (a + b).tanh() / (1.0 + (-(s + q)).exp()))
        .collect())
}

/// Runs the first-stage (`which = 1`) or second-stage (`which = 2`) TCN of `model`
/// on a `T×(K+2L+1)` feature sequence.
pub fn tcn_forward(features: &Mat, model: &FasnetModel, which: usize) -> Result<Mat> {
    let cfg = &model.config;
    if features.cols != cfg.feature_dim() || features.rows == 0 {
        return Err(Error::Shape(format!(
            "tcn expects T×{} features, got {:?}",
            cfg.feature_dim(),
            features.shape()
        )));
    }
    if !features.is_finite() {
        return Err(Error::NonFinite("tcn features"));
    }
    let layout = Layout::new(cfg);
    let t = match which {
        1 => &layout.tcn1,
        2 => &layout.tcn2,
        _ => return Err(Error::InvalidInput("tcn index must be 1 or 2".into())),
    };
    let mut g = Graph::new();
    let vars = model
        .params
        .iter()
        .map(|p| g.input(p.value.clone()))
        .collect();
    let p = Bound {
        vars,
        layout: &layout,
    };
    let x = g.input(features.clone());
    let y = tcn(&mut g, x, t, &p, cfg.causal);
    Ok(g.value(y).clone())
}
