//! Reverse-mode differentiation over a recorded sequence of matrix operations.
//!
//! Every node keeps its forward value; [`Graph::backward`] walks the record in reverse
//! and accumulates gradients for nodes that depend on a parameter.

use std::sync::Arc;

use crate::sigcore::{valid_filter_into, FrameGrid};
use crate::tensor::{gemm, Mat};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

const NORM_EPS: f64 = 1e-8;
/// Relative window energy below which an NCC lag is treated as silent.
const NCC_SILENT_FRACTION: f64 = 1e-12;

enum Op {
    Input,
    Param(usize),
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Prelu(Var, Var),
    Concat(Var, Var),
    Slice(Var, usize),
    DepthwiseConv {
        x: Var,
        w: Var,
        b: Var,
        dilation: usize,
        causal: bool,
    },
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        causal: bool,
        mean: Vec<f64>,
        inv_std: Vec<f64>,
        xhat: Mat,
    },
    FrameFilter {
        filters: Var,
        contexts: Arc<Mat>,
    },
    Ncc {
        frames: Var,
        contexts: Arc<Mat>,
        window_norms: Mat,
        frame_norms: Vec<f64>,
    },
    OverlapAdd {
        frames: Var,
        grid: FrameGrid,
        counts: Vec<f64>,
    },
    Loss {
        input: Var,
        grad: Vec<f64>,
    },
}

struct Node {
    value: Mat,
    op: Op,
    needs_grad: bool,
}

/// Recorded computation.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, value: Mat, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push_from(&mut self, value: Mat, op: Op, parents: &[Var]) -> Var {
        let needs = parents.iter().any(|&p| self.needs(p));
        self.push(value, op, needs)
    }

    /// Constant input; never receives a gradient.
    pub fn input(&mut self, value: Mat) -> Var {
        self.push(value, Op::Input, false)
    }

    /// Trainable leaf identified by `index` in the parameter list.
    pub fn param(&mut self, index: usize, value: Mat) -> Var {
        self.push(value, Op::Param(index), true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.cols, bv.rows, "matmul shape");
        let mut out = Mat::zeros(av.rows, bv.cols);
        gemm(
            av.rows, av.cols, bv.cols, &av.data, false, &bv.data, false, &mut out.data, false,
        );
        self.push_from(out, Op::MatMul(a, b), &[a, b])
    }

    /// Adds a `1×C` row to every row of `x`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Var {
        let bv = self.value(b);
        let mut out = self.value(x).clone();
        assert_eq!(bv.cols, out.cols, "bias width");
        for r in 0..out.rows {
            for (o, bb) in out.row_mut(r).iter_mut().zip(&bv.data) {
                *o += bb;
            }
        }
        self.push_from(out, Op::AddBias(x, b), &[x, b])
    }

    /// `x · w + b` for a `1×C` bias.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let y = self.matmul(x, w);
        self.add_bias(y, b)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.shape(), bv.shape(), "add shape");
        let data = av.data.iter().zip(&bv.data).map(|(x, y)| x + y).collect();
        let out = Mat::from_vec(av.rows, av.cols, data);
        self.push_from(out, Op::Add(a, b), &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.shape(), bv.shape(), "mul shape");
        let data = av.data.iter().zip(&bv.data).map(|(x, y)| x * y).collect();
        let out = Mat::from_vec(av.rows, av.cols, data);
        self.push_from(out, Op::Mul(a, b), &[a, b])
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let xv = self.value(x);
        let out = Mat::from_vec(xv.rows, xv.cols, xv.data.iter().map(|v| v * s).collect());
        self.push_from(out, Op::Scale(x, s), &[x])
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let out = Mat::from_vec(xv.rows, xv.cols, xv.data.iter().map(|v| v.tanh()).collect());
        self.push_from(out, Op::Tanh(x), &[x])
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let out = Mat::from_vec(
            xv.rows,
            xv.cols,
            xv.data.iter().map(|&v| 1.0 / (1.0 + (-v).exp())).collect(),
        );
        self.push_from(out, Op::Sigmoid(x), &[x])
    }

    /// PReLU with a single learnable slope (`1×1`).
    pub fn prelu(&mut self, x: Var, alpha: Var) -> Var {
        let a = self.value(alpha).data[0];
        let xv = self.value(x);
        let out = Mat::from_vec(
            xv.rows,
            xv.cols,
            xv.data.iter().map(|&v| if v > 0.0 { v } else { a * v }).collect(),
        );
        self.push_from(out, Op::Prelu(x, alpha), &[x, alpha])
    }

    /// Column-wise concatenation `[a, b]`.
    pub fn concat(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.rows, bv.rows, "concat rows");
        let mut out = Mat::zeros(av.rows, av.cols + bv.cols);
        for r in 0..av.rows {
            let row = out.row_mut(r);
            row[..av.cols].copy_from_slice(av.row(r));
            row[av.cols..].copy_from_slice(bv.row(r));
        }
        self.push_from(out, Op::Concat(a, b), &[a, b])
    }

    /// Columns `[start, start + len)`.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Var {
        let xv = self.value(x);
        assert!(start + len <= xv.cols, "slice out of range");
        let mut out = Mat::zeros(xv.rows, len);
        for r in 0..xv.rows {
            out.row_mut(r).copy_from_slice(&xv.row(r)[start..start + len]);
        }
        self.push_from(out, Op::Slice(x, start), &[x])
    }

    /// Depthwise dilated convolution along time (rows) of `x` (`T×C`) with taps `w`
    /// (`C×k`) and bias `b` (`1×C`). Non-causal mode centers the kernel; causal mode
    /// only looks back.
    pub fn depthwise_conv(&mut self, x: Var, w: Var, b: Var, dilation: usize, causal: bool) -> Var {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        let (t_len, ch) = xv.shape();
        let k = wv.cols;
        assert_eq!(wv.rows, ch, "depthwise channels");
        let offsets = conv_offsets(k, dilation, causal);
        let mut out = Mat::zeros(t_len, ch);
        for t in 0..t_len {
            let row = out.row_mut(t);
            row.copy_from_slice(&bv.data);
            for (j, &off) in offsets.iter().enumerate() {
                let src = t as isize + off;
                if src < 0 || src >= t_len as isize {
                    continue;
                }
                let xr = xv.row(src as usize);
                for c in 0..ch {
                    row[c] += wv.data[c * k + j] * xr[c];
                }
            }
        }
        self.push_from(
            out,
            Op::DepthwiseConv {
                x,
                w,
                b,
                dilation,
                causal,
            },
            &[x, w, b],
        )
    }

    /// Layer normalization with per-channel gain and bias. Global mode uses statistics
    /// over the whole `T×C` block; causal mode uses the statistics of rows `0..=t` for
    /// row `t`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, causal: bool) -> Var {
        let (xv, gv, bv) = (self.value(x), self.value(gamma), self.value(beta));
        let (t_len, ch) = xv.shape();
        let mut mean = Vec::with_capacity(t_len);
        let mut inv_std = Vec::with_capacity(t_len);
        if causal {
            let (mut s, mut sq) = (0.0, 0.0);
            for t in 0..t_len {
                for &v in xv.row(t) {
                    s += v;
                    sq += v * v;
                }
                let n = ((t + 1) * ch) as f64;
                let m = s / n;
                let var = (sq / n - m * m).max(0.0);
                mean.push(m);
                inv_std.push(1.0 / (var + NORM_EPS).sqrt());
            }
        } else {
            let n = (t_len * ch) as f64;
            let m = xv.data.iter().sum::<f64>() / n;
            let var = xv.data.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            mean = vec![m; t_len];
            inv_std = vec![1.0 / (var + NORM_EPS).sqrt(); t_len];
        }
        let mut xhat = Mat::zeros(t_len, ch);
        let mut out = Mat::zeros(t_len, ch);
        for t in 0..t_len {
            for c in 0..ch {
                let h = (xv.get(t, c) - mean[t]) * inv_std[t];
                xhat.set(t, c, h);
                out.set(t, c, gv.data[c] * h + bv.data[c]);
            }
        }
        self.push_from(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                causal,
                mean,
                inv_std,
                xhat,
            },
            &[x, gamma, beta],
        )
    }

    /// Per-frame valid filtering of constant context windows (`T×3L`) with filters
    /// (`T×(2L+1)`), giving `T×L`.
    pub fn frame_filter(&mut self, filters: Var, contexts: Arc<Mat>) -> Var {
        let hv = self.value(filters);
        let l = contexts.cols / 3;
        assert_eq!(hv.cols, 2 * l + 1, "filter width");
        assert_eq!(hv.rows, contexts.rows, "filter frames");
        let mut out = Mat::zeros(hv.rows, l);
        for t in 0..hv.rows {
            valid_filter_into(contexts.row(t), hv.row(t), out.row_mut(t));
        }
        self.push_from(out, Op::FrameFilter { filters, contexts }, &[filters])
    }

    /// Per-frame NCC of constant context windows (`T×3L`) against variable frames
    /// (`T×L`), giving `T×(2L+1)`.
    pub fn ncc(&mut self, frames: Var, contexts: Arc<Mat>) -> Var {
        let fv = self.value(frames);
        let l = fv.cols;
        assert_eq!(contexts.cols, 3 * l, "ncc context width");
        let n_lags = 2 * l + 1;
        let mut out = Mat::zeros(fv.rows, n_lags);
        let mut window_norms = Mat::zeros(fv.rows, n_lags);
        let mut frame_norms = Vec::with_capacity(fv.rows);
        for t in 0..fv.rows {
            let ctx = contexts.row(t);
            let r = fv.row(t);
            let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            frame_norms.push(rn);
            let energies: Vec<f64> = (0..n_lags)
                .map(|j| ctx[j..j + l].iter().map(|v| v * v).sum())
                .collect();
            let e_max = energies.iter().fold(0.0f64, |m, &e| m.max(e));
            for j in 0..n_lags {
                let e = energies[j];
                if rn <= 0.0 || e <= 0.0 || e <= NCC_SILENT_FRACTION * e_max {
                    continue;
                }
                let wn = e.sqrt();
                window_norms.set(t, j, wn);
                let d: f64 = ctx[j..j + l].iter().zip(r).map(|(a, b)| a * b).sum();
                out.set(t, j, d / (wn * rn));
            }
        }
        self.push_from(
            out,
            Op::Ncc {
                frames,
                contexts,
                window_norms,
                frame_norms,
            },
            &[frames],
        )
    }

    /// Count-normalized overlap-add of `T×L` frames into a `1×l` signal.
    pub fn overlap_add(&mut self, frames: Var, grid: FrameGrid) -> Var {
        let fv = self.value(frames);
        let out = crate::sigcore::overlap_add(fv, &grid).expect("overlap_add shape");
        let counts = grid.overlap_counts();
        self.push_from(
            Mat::row_vector(out),
            Op::OverlapAdd {
                frames,
                grid,
                counts,
            },
            &[frames],
        )
    }

    /// Scalar loss node whose gradient with respect to `input` was computed alongside
    /// its value.
    pub fn loss(&mut self, input: Var, value: f64, grad: Vec<f64>) -> Var {
        assert_eq!(grad.len(), self.value(input).len(), "loss gradient length");
        self.push_from(
            Mat::from_vec(1, 1, vec![value]),
            Op::Loss { input, grad },
            &[input],
        )
    }

    /// Gradient of the scalar `root` with respect to every parameter leaf.
    pub fn backward(&self, root: Var, n_params: usize) -> Vec<Option<Mat>> {
        assert_eq!(self.value(root).len(), 1, "backward root must be scalar");
        self.backward_seeded(&[(root, Mat::from_vec(1, 1, vec![1.0]))], n_params)
    }

    /// Propagates the given upstream gradients (one per seeded node) back to the
    /// parameter leaves. Unused parameters get `None`.
    pub fn backward_seeded(&self, seeds: &[(Var, Mat)], n_params: usize) -> Vec<Option<Mat>> {
        let mut grads: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        for (v, g) in seeds {
            assert_eq!(self.value(*v).shape(), g.shape(), "seed shape");
            accumulate(&mut grads, *v, g.data.iter().copied(), self.value(*v));
        }
        let mut param_grads: Vec<Option<Mat>> = (0..n_params).map(|_| None).collect();
        for idx in (0..self.nodes.len()).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            self.propagate(idx, &g, &mut grads, &mut param_grads);
        }
        param_grads
    }

    fn propagate(
        &self,
        idx: usize,
        g: &Mat,
        grads: &mut [Option<Mat>],
        param_grads: &mut [Option<Mat>],
    ) {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Input => {}
            Op::Param(p) => match &mut param_grads[*p] {
                Some(acc) => acc.data.iter_mut().zip(&g.data).for_each(|(a, b)| *a += b),
                slot => *slot = Some(g.clone()),
            },
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k, n) = (av.rows, av.cols, bv.cols);
                if self.needs(*a) {
                    let ga = slot(grads, *a, av);
                    gemm(m, n, k, &g.data, false, &bv.data, true, &mut ga.data, true);
                }
                if self.needs(*b) {
                    let gb = slot(grads, *b, bv);
                    gemm(k, m, n, &av.data, true, &g.data, false, &mut gb.data, true);
                }
            }
            Op::AddBias(x, b) => {
                if self.needs(*x) {
                    accumulate(grads, *x, g.data.iter().copied(), self.value(*x));
                }
                if self.needs(*b) {
                    let gb = slot(grads, *b, self.value(*b));
                    for r in 0..g.rows {
                        for (o, v) in gb.data.iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if self.needs(v) {
                        accumulate(grads, v, g.data.iter().copied(), self.value(v));
                    }
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.needs(*a) {
                    accumulate(grads, *a, g.data.iter().zip(&bv.data).map(|(x, y)| x * y), av);
                }
                if self.needs(*b) {
                    accumulate(grads, *b, g.data.iter().zip(&av.data).map(|(x, y)| x * y), bv);
                }
            }
            Op::Scale(x, s) => {
                accumulate(grads, *x, g.data.iter().map(|v| v * s), self.value(*x));
            }
            Op::Tanh(x) => {
                let y = &node.value;
                accumulate(
                    grads,
                    *x,
                    g.data.iter().zip(&y.data).map(|(gv, yv)| gv * (1.0 - yv * yv)),
                    self.value(*x),
                );
            }
            Op::Sigmoid(x) => {
                let y = &node.value;
                accumulate(
                    grads,
                    *x,
                    g.data.iter().zip(&y.data).map(|(gv, yv)| gv * yv * (1.0 - yv)),
                    self.value(*x),
                );
            }
            Op::Prelu(x, alpha) => {
                let xv = self.value(*x);
                let a = self.value(*alpha).data[0];
                if self.needs(*x) {
                    accumulate(
                        grads,
                        *x,
                        g.data
                            .iter()
                            .zip(&xv.data)
                            .map(|(gv, &v)| if v > 0.0 { *gv } else { a * gv }),
                        xv,
                    );
                }
                if self.needs(*alpha) {
                    let s: f64 = g
                        .data
                        .iter()
                        .zip(&xv.data)
                        .filter(|(_, &v)| v <= 0.0)
                        .map(|(gv, v)| gv * v)
                        .sum();
                    slot(grads, *alpha, self.value(*alpha)).data[0] += s;
                }
            }
            Op::Concat(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.needs(*a) {
                    let ga = slot(grads, *a, av);
                    for r in 0..g.rows {
                        for (o, v) in ga.row_mut(r).iter_mut().zip(&g.row(r)[..av.cols]) {
                            *o += v;
                        }
                    }
                }
                if self.needs(*b) {
                    let gb = slot(grads, *b, bv);
                    for r in 0..g.rows {
                        for (o, v) in gb.row_mut(r).iter_mut().zip(&g.row(r)[av.cols..]) {
                            *o += v;
                        }
                    }
                }
            }
            Op::Slice(x, start) => {
                let gx = slot(grads, *x, self.value(*x));
                for r in 0..g.rows {
                    for (o, v) in gx.row_mut(r)[*start..*start + g.cols].iter_mut().zip(g.row(r)) {
                        *o += v;
                    }
                }
            }
            Op::DepthwiseConv {
                x,
                w,
                b,
                dilation,
                causal,
            } => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                let (t_len, ch) = xv.shape();
                let k = wv.cols;
                let offsets = conv_offsets(k, *dilation, *causal);
                if self.needs(*b) {
                    let gb = slot(grads, *b, self.value(*b));
                    for t in 0..t_len {
                        for (o, v) in gb.data.iter_mut().zip(g.row(t)) {
                            *o += v;
                        }
                    }
                }
                if self.needs(*w) {
                    let gw = slot(grads, *w, wv);
                    for t in 0..t_len {
                        let gr = g.row(t);
                        for (j, &off) in offsets.iter().enumerate() {
                            let src = t as isize + off;
                            if src < 0 || src >= t_len as isize {
                                continue;
                            }
                            let xr = xv.row(src as usize);
                            for c in 0..ch {
                                gw.data[c * k + j] += gr[c] * xr[c];
                            }
                        }
                    }
                }
                if self.needs(*x) {
                    let gx = slot(grads, *x, xv);
                    for t in 0..t_len {
                        for (j, &off) in offsets.iter().enumerate() {
                            let src = t as isize + off;
                            if src < 0 || src >= t_len as isize {
                                continue;
                            }
                            let s = src as usize;
                            for c in 0..ch {
                                gx.data[s * ch + c] += g.data[t * ch + c] * wv.data[c * k + j];
                            }
                        }
                    }
                }
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                causal,
                mean,
                inv_std,
                xhat,
            } => {
                let gv = self.value(*gamma);
                let (t_len, ch) = xhat.shape();
                if self.needs(*gamma) {
                    let gg = slot(grads, *gamma, gv);
                    for t in 0..t_len {
                        for c in 0..ch {
                            gg.data[c] += g.get(t, c) * xhat.get(t, c);
                        }
                    }
                }
                if self.needs(*beta) {
                    let gb = slot(grads, *beta, self.value(*beta));
                    for t in 0..t_len {
                        for (o, v) in gb.data.iter_mut().zip(g.row(t)) {
                            *o += v;
                        }
                    }
                }
                if self.needs(*x) {
                    let xv = self.value(*x);
                    let mut dxhat = Mat::zeros(t_len, ch);
                    for t in 0..t_len {
                        for c in 0..ch {
                            dxhat.set(t, c, g.get(t, c) * gv.data[c]);
                        }
                    }
                    let gx = slot(grads, *x, xv);
                    if *causal {
                        // suffix sums of the per-row statistic sensitivities
                        let mut a = vec![0.0; t_len];
                        let mut b = vec![0.0; t_len];
                        for t in 0..t_len {
                            let n = ((t + 1) * ch) as f64;
                            let sa: f64 = dxhat.row(t).iter().sum();
                            let sb: f64 = dxhat
                                .row(t)
                                .iter()
                                .zip(xhat.row(t))
                                .map(|(d, h)| d * h)
                                .sum();
                            a[t] = -inv_std[t] * sa / n;
                            b[t] = -inv_std[t] * inv_std[t] * sb / n;
                        }
                        let (mut sa, mut sb, mut sbm) = (0.0, 0.0, 0.0);
                        for s in (0..t_len).rev() {
                            sa += a[s];
                            sb += b[s];
                            sbm += b[s] * mean[s];
                            for c in 0..ch {
                                gx.data[s * ch + c] += dxhat.get(s, c) * inv_std[s]
                                    + sa
                                    + xv.get(s, c) * sb
                                    - sbm;
                            }
                        }
                    } else {
                        let n = (t_len * ch) as f64;
                        let md = dxhat.data.iter().sum::<f64>() / n;
                        let mdx = dxhat
                            .data
                            .iter()
                            .zip(&xhat.data)
                            .map(|(d, h)| d * h)
                            .sum::<f64>()
                            / n;
                        let inv = inv_std[0];
                        for (i, o) in gx.data.iter_mut().enumerate() {
                            *o += inv * (dxhat.data[i] - md - xhat.data[i] * mdx);
                        }
                    }
                }
            }
            Op::FrameFilter { filters, contexts } => {
                let hv = self.value(*filters);
                let taps = hv.cols;
                let gh = slot(grads, *filters, hv);
                for t in 0..g.rows {
                    let ctx = contexts.row(t);
                    let gr = g.row(t);
                    let out = gh.row_mut(t);
                    for (j, o) in out.iter_mut().enumerate().take(taps) {
                        *o += gr.iter().zip(&ctx[j..j + gr.len()]).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
            }
            Op::Ncc {
                frames,
                contexts,
                window_norms,
                frame_norms,
            } => {
                let fv = self.value(*frames);
                let l = fv.cols;
                let f = &node.value;
                let gr = slot(grads, *frames, fv);
                for t in 0..g.rows {
                    let rn = frame_norms[t];
                    if rn <= 0.0 {
                        continue;
                    }
                    let ctx = contexts.row(t);
                    let r = fv.row(t);
                    let mut acc = vec![0.0; l];
                    let mut proj = 0.0;
                    for j in 0..2 * l + 1 {
                        let wn = window_norms.get(t, j);
                        let gj = g.get(t, j);
                        if wn <= 0.0 || gj == 0.0 {
                            continue;
                        }
                        let s = gj / (wn * rn);
                        for (a, c) in acc.iter_mut().zip(&ctx[j..j + l]) {
                            *a += s * c;
                        }
                        proj += gj * f.get(t, j);
                    }
                    let k = proj / (rn * rn);
                    for ((o, a), rv) in gr.row_mut(t).iter_mut().zip(&acc).zip(r) {
                        *o += a - k * rv;
                    }
                }
            }
            Op::OverlapAdd {
                frames,
                grid,
                counts,
            } => {
                let gf = slot(grads, *frames, self.value(*frames));
                for t in 0..grid.n_frames {
                    let s = grid.start(t);
                    for n in 0..grid.frame_len {
                        let i = s + n;
                        if i < grid.total_len {
                            gf.data[t * grid.frame_len + n] += g.data[i] / counts[i];
                        }
                    }
                }
            }
            Op::Loss { input, grad } => {
                let s = g.data[0];
                accumulate(grads, *input, grad.iter().map(|v| v * s), self.value(*input));
            }
        }
    }
}

fn conv_offsets(k: usize, dilation: usize, causal: bool) -> Vec<isize> {
    (0..k)
        .map(|j| {
            if causal {
                -(((k - 1 - j) * dilation) as isize)
            } else {
                (j as isize - ((k - 1) / 2) as isize) * dilation as isize
            }
        })
        .collect()
}

fn slot<'a>(grads: &'a mut [Option<Mat>], v: Var, like: &Mat) -> &'a mut Mat {
    grads[v.0].get_or_insert_with(|| Mat::zeros(like.rows, like.cols))
}

fn accumulate(grads: &mut [Option<Mat>], v: Var, g: impl Iterator<Item = f64>, like: &Mat) {
    let acc = slot(grads, v, like);
    for (a, b) in acc.data.iter_mut().zip(g) {
        *a += b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
        Mat::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    /// Builds `loss = Σ probe ⊙ f(params)` and compares gradients with central differences.
    fn check<F>(shapes: &[(usize, usize)], build: F)
    where
        F: Fn(&mut Graph, &[Var]) -> Var,
    {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let params: Vec<Mat> = shapes.iter().map(|&(r, c)| rand_mat(&mut rng, r, c)).collect();
        let probe_seed = rng.random::<u64>();
        let eval = |params: &[Mat]| -> (f64, Vec<Option<Mat>>) {
            let mut g = Graph::new();
            let vars: Vec<Var> = params
                .iter()
                .enumerate()
                .map(|(i, p)| g.param(i, p.clone()))
                .collect();
            let out = build(&mut g, &vars);
            let ov = g.value(out).clone();
            let mut prng = ChaCha8Rng::seed_from_u64(probe_seed);
            let probe = rand_mat(&mut prng, ov.rows, ov.cols);
            let value: f64 = ov.data.iter().zip(&probe.data).map(|(a, b)| a * b).sum();
            let grads = g.backward_seeded(&[(out, probe)], params.len());
            (value, grads)
        };
        let (_, grads) = eval(&params);
        let h = 1e-6;
        for (pi, p) in params.iter().enumerate() {
            let ana = grads[pi].clone().unwrap_or_else(|| Mat::zeros(p.rows, p.cols));
            let mut err = 0.0f64;
            let mut scale = 0.0f64;
            for i in 0..p.len() {
                let mut plus = params.clone();
                plus[pi].data[i] += h;
                let mut minus = params.clone();
                minus[pi].data[i] -= h;
                let num = (eval(&plus).0 - eval(&minus).0) / (2.0 * h);
                err += (num - ana.data[i]).powi(2);
                scale += num.powi(2);
            }
            let rel = err.sqrt() / scale.sqrt().max(1e-12);
            assert!(rel < 1e-6, "param {pi}: relative error {rel}");
        }
    }

    #[test]
    fn dense_ops() {
        check(&[(3, 4), (4, 5), (1, 5)], |g, v| {
            let y = g.linear(v[0], v[1], v[2]);
            let a = g.tanh(y);
            let b = g.sigmoid(y);
            let m = g.mul(a, b);
            let s = g.scale(m, 0.5);
            g.add(s, y)
        });
    }

    #[test]
    fn prelu_concat_slice() {
        check(&[(4, 3), (4, 2), (1, 1)], |g, v| {
            let c = g.concat(v[0], v[1]);
            let p = g.prelu(c, v[2]);
            g.slice_cols(p, 1, 3)
        });
    }

    #[test]
    fn depthwise_conv_both_modes() {
        for causal in [false, true] {
            check(&[(9, 3), (3, 3), (1, 3)], |g, v| g.depthwise_conv(v[0], v[1], v[2], 2, causal));
        }
    }

    #[test]
    fn layer_norm_both_modes() {
        for causal in [false, true] {
            check(&[(6, 4), (1, 4), (1, 4)], |g, v| g.layer_norm(v[0], v[1], v[2], causal));
        }
    }

    #[test]
    fn frame_ops() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let l = 4;
        let mut ctx = rand_mat(&mut rng, 3, 3 * l);
        // a zero-padded boundary like the first frame of a signal
        ctx.row_mut(0)[..l].iter_mut().for_each(|v| *v = 0.0);
        let ctx = Arc::new(ctx);
        let grid = FrameGrid::new(8, l, 2).unwrap();
        let c1 = ctx.clone();
        check(&[(3, 2 * l + 1)], move |g, v| {
            let y = g.frame_filter(v[0], c1.clone());
            g.overlap_add(y, grid)
        });
        let c2 = ctx.clone();
        check(&[(3, l)], move |g, v| g.ncc(v[0], c2.clone()));
    }

    #[test]
    fn causal_norm_ignores_future_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = rand_mat(&mut rng, 6, 3);
        let mut x2 = x.clone();
        x2.row_mut(5).iter_mut().for_each(|v| *v += 10.0);
        let run = |x: Mat| {
            let mut g = Graph::new();
            let xv = g.input(x);
            let gm = g.input(Mat::from_vec(1, 3, vec![1.0; 3]));
            let bt = g.input(Mat::zeros(1, 3));
            let y = g.layer_norm(xv, gm, bt, true);
            g.value(y).clone()
        };
        let (a, b) = (run(x), run(x2));
        assert_eq!(a.data[..15], b.data[..15]);
    }
}
