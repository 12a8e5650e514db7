//! Tape-based reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! A [`Graph`] is built fresh for every forward pass. Nodes are appended in
//! evaluation order, so a reverse sweep over the node list is a valid
//! topological order for the backward pass. Feature maps are laid out as
//! `[C, H, W]`; matrix-style ops view a tensor as `[rows, cols]` with rows on
//! the leading axis.

use std::rc::Rc;

use crate::kernels;
use crate::params::{ParamGrads, ParamId};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op {
    Constant,
    Param(ParamId),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine(Var, f64),
    MulScalar(Var, Var),
    AddChannel(Var, Var),
    MulChannel(Var, Var),
    AddCol(Var, Var),
    MulSpatial(Var, Var),
    BroadcastSpatial(Var),
    MatMul(Var, Var),
    MatMulNT(Var, Var),
    Conv3x3(Var, Var),
    DwConv3x3(Var, Var),
    LayerNorm {
        x: Var,
        weight: Var,
        bias: Var,
        xhat: Rc<Vec<f64>>,
        rstd: Rc<Vec<f64>>,
    },
    Gelu(Var),
    Sigmoid(Var),
    SoftmaxRows(Var),
    L2NormRows {
        x: Var,
        norms: Rc<Vec<f64>>,
    },
    SliceRows {
        x: Var,
        start: usize,
    },
    ConcatRows(Vec<Var>),
    Reshape(Var),
    Transpose(Var),
    PixelUnshuffle(Var),
    PixelShuffle(Var),
    SegmentMean {
        x: Var,
        labels: Rc<Vec<usize>>,
        counts: Rc<Vec<usize>>,
    },
    SegmentBroadcast {
        means: Var,
        labels: Rc<Vec<usize>>,
    },
    Bilinear(Var),
    Crop {
        x: Var,
        top: usize,
        left: usize,
    },
    Clamp01(Var),
    Filter {
        x: Var,
        kernel: Rc<Vec<f64>>,
    },
    Mean(Var),
    Sum(Var),
    MeanAbsDiff(Var, Var),
    MeanSqDiff(Var, Var),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const LN_EPS: f64 = 1e-5;
const NORM_EPS: f64 = 1e-12;

pub fn gelu(v: f64) -> f64 {
    0.5 * v * (1.0 + (GELU_C * (v + 0.044715 * v * v * v)).tanh())
}

fn gelu_grad(v: f64) -> f64 {
    let u = GELU_C * (v + 0.044715 * v * v * v);
    let t = u.tanh();
    let du = GELU_C * (1.0 + 3.0 * 0.044715 * v * v);
    0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du
}

pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
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

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn scalar_value(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data()[0]
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Constant, false)
    }

    /// A differentiable leaf that is not a model parameter (used for gradient checks on inputs).
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Constant, true)
    }

    pub fn param(&mut self, id: ParamId, t: Tensor) -> Var {
        self.push(t, Op::Param(id), true)
    }

    fn binary_same(&self, a: Var, b: Var, what: &str) {
        assert_eq!(
            self.value(a).len(),
            self.value(b).len(),
            "{what}: operand sizes differ ({:?} vs {:?})",
            self.shape(a),
            self.shape(b)
        );
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary_same(a, b, "add");
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        self.push(v, Op::Add(a, b), rg)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary_same(a, b, "sub");
        let bv = self.value(b).data();
        let data = self.value(a).data().iter().zip(bv).map(|(x, y)| x - y).collect();
        let v = Tensor::from_parts(self.shape(a).to_vec(), data);
        let rg = self.rg(a) || self.rg(b);
        self.push(v, Op::Sub(a, b), rg)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary_same(a, b, "mul");
        let bv = self.value(b).data();
        let data = self.value(a).data().iter().zip(bv).map(|(x, y)| x * y).collect();
        let v = Tensor::from_parts(self.shape(a).to_vec(), data);
        let rg = self.rg(a) || self.rg(b);
        self.push(v, Op::Mul(a, b), rg)
    }

    /// `scale * x + shift` with constant coefficients.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        let v = self.value(x).map(|e| scale * e + shift);
        let rg = self.rg(x);
        self.push(v, Op::Affine(x, scale), rg)
    }

    /// Multiply every element of `x` by the single element of `s`.
    pub fn mul_scalar(&mut self, x: Var, s: Var) -> Var {
        assert_eq!(self.value(s).len(), 1, "mul_scalar: scale must have one element");
        let sv = self.scalar_value(s);
        let v = self.value(x).map(|e| e * sv);
        let rg = self.rg(x) || self.rg(s);
        self.push(v, Op::MulScalar(x, s), rg)
    }

    /// `x[r, ..] + b[r]`
    pub fn add_channel(&mut self, x: Var, b: Var) -> Var {
        let rows = self.value(x).rows();
        assert_eq!(self.value(b).len(), rows, "add_channel: bias length");
        let cols = self.value(x).cols();
        let mut v = self.value(x).clone();
        let bv = self.value(b).data().to_vec();
        for (r, chunk) in v.data_mut().chunks_mut(cols).enumerate() {
            for e in chunk {
                *e += bv[r];
            }
        }
        let rg = self.rg(x) || self.rg(b);
        self.push(v, Op::AddChannel(x, b), rg)
    }

    /// `x[r, ..] * s[r]`
    pub fn mul_channel(&mut self, x: Var, s: Var) -> Var {
        let rows = self.value(x).rows();
        assert_eq!(self.value(s).len(), rows, "mul_channel: scale length");
        let cols = self.value(x).cols();
        let mut v = self.value(x).clone();
        let sv = self.value(s).data().to_vec();
        for (r, chunk) in v.data_mut().chunks_mut(cols).enumerate() {
            for e in chunk {
                *e *= sv[r];
            }
        }
        let rg = self.rg(x) || self.rg(s);
        self.push(v, Op::MulChannel(x, s), rg)
    }

    /// `x[r, c] + b[c]` for a `[rows, cols]` view of `x`.
    pub fn add_col(&mut self, x: Var, b: Var) -> Var {
        let cols = self.value(x).cols();
        assert_eq!(self.value(b).len(), cols, "add_col: bias length");
        let mut v = self.value(x).clone();
        let bv = self.value(b).data().to_vec();
        for chunk in v.data_mut().chunks_mut(cols) {
            for (e, bb) in chunk.iter_mut().zip(&bv) {
                *e += bb;
            }
        }
        let rg = self.rg(x) || self.rg(b);
        self.push(v, Op::AddCol(x, b), rg)
    }

    /// `x[c, p] * m[p]`, where `m` holds one value per spatial position.
    pub fn mul_spatial(&mut self, x: Var, m: Var) -> Var {
        let cols = self.value(x).cols();
        assert_eq!(self.value(m).len(), cols, "mul_spatial: mask size");
        let mut v = self.value(x).clone();
        let mv = self.value(m).data().to_vec();
        for chunk in v.data_mut().chunks_mut(cols) {
            for (e, mm) in chunk.iter_mut().zip(&mv) {
                *e *= mm;
            }
        }
        let rg = self.rg(x) || self.rg(m);
        self.push(v, Op::MulSpatial(x, m), rg)
    }

    /// Broadcast a `[C]` vector to every position of a `[C, h, w]` map.
    pub fn broadcast_spatial(&mut self, v: Var, h: usize, w: usize) -> Var {
        let c = self.value(v).len();
        let src = self.value(v).data();
        let mut data = Vec::with_capacity(c * h * w);
        for &e in src {
            data.extend(std::iter::repeat_n(e, h * w));
        }
        let t = Tensor::from_parts(vec![c, h, w], data);
        let rg = self.rg(v);
        self.push(t, Op::BroadcastSpatial(v), rg)
    }

    /// `a[m×k] · b[k×n]`, both viewed as 2-D by their leading axis.
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = (self.value(a).rows(), self.value(a).cols());
        let (k2, n) = (self.value(b).rows(), self.value(b).cols());
        assert_eq!(k, k2, "matmul: inner dimensions {k} vs {k2}");
        let mut out = vec![0.0; m * n];
        kernels::matmul_acc(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let rg = self.rg(a) || self.rg(b);
        self.push(Tensor::from_parts(vec![m, n], out), Op::MatMul(a, b), rg)
    }

    /// `a[m×k] · b[n×k]ᵀ`
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = (self.value(a).rows(), self.value(a).cols());
        let (n, k2) = (self.value(b).rows(), self.value(b).cols());
        assert_eq!(k, k2, "matmul_nt: inner dimensions {k} vs {k2}");
        let mut out = vec![0.0; m * n];
        kernels::matmul_nt_acc(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let rg = self.rg(a) || self.rg(b);
        self.push(Tensor::from_parts(vec![m, n], out), Op::MatMulNT(a, b), rg)
    }

    /// 1×1 convolution: `w[co×ci] · x[ci, h, w]`, keeping the spatial shape.
    pub fn conv1x1(&mut self, x: Var, w: Var) -> Var {
        let shape = self.shape(x).to_vec();
        let y = self.matmul(w, x);
        let co = self.value(y).rows();
        let mut s = shape;
        s[0] = co;
        self.reshape(y, s)
    }

    pub fn conv3x3(&mut self, x: Var, w: Var) -> Var {
        let s = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        assert_eq!(s.len(), 3, "conv3x3 expects [C,H,W]");
        assert_eq!(ws[1], s[0], "conv3x3 input channels");
        let out = kernels::conv3x3_forward(self.value(x).data(), self.value(w).data(), s[0], ws[0], s[1], s[2]);
        let rg = self.rg(x) || self.rg(w);
        self.push(Tensor::from_parts(vec![ws[0], s[1], s[2]], out), Op::Conv3x3(x, w), rg)
    }

    pub fn dwconv3x3(&mut self, x: Var, w: Var) -> Var {
        let s = self.shape(x).to_vec();
        assert_eq!(self.value(w).len(), s[0] * 9, "dwconv3x3 weight size");
        let out = kernels::dwconv3x3_forward(self.value(x).data(), self.value(w).data(), s[0], s[1], s[2]);
        let rg = self.rg(x) || self.rg(w);
        self.push(Tensor::from_parts(s, out), Op::DwConv3x3(x, w), rg)
    }

    /// Per-position normalization across channels with a learned affine.
    pub fn layer_norm_channels(&mut self, x: Var, weight: Var, bias: Var) -> Var {
        let c = self.value(x).rows();
        let p = self.value(x).cols();
        let xd = self.value(x).data();
        let wv = self.value(weight).data();
        let bv = self.value(bias).data();
        let mut xhat = vec![0.0; c * p];
        let mut rstd = vec![0.0; p];
        let mut out = vec![0.0; c * p];
        let mut mean = vec![0.0; p];
        for ch in 0..c {
            for (m, &v) in mean.iter_mut().zip(&xd[ch * p..(ch + 1) * p]) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= c as f64;
        }
        let mut var = vec![0.0; p];
        for ch in 0..c {
            for ((vv, &v), &m) in var.iter_mut().zip(&xd[ch * p..(ch + 1) * p]).zip(&mean) {
                *vv += (v - m) * (v - m);
            }
        }
        for (r, v) in rstd.iter_mut().zip(&var) {
            *r = 1.0 / (v / c as f64 + LN_EPS).sqrt();
        }
        for ch in 0..c {
            for i in 0..p {
                let xh = (xd[ch * p + i] - mean[i]) * rstd[i];
                xhat[ch * p + i] = xh;
                out[ch * p + i] = xh * wv[ch] + bv[ch];
            }
        }
        let rg = self.rg(x) || self.rg(weight) || self.rg(bias);
        let shape = self.shape(x).to_vec();
        self.push(
            Tensor::from_parts(shape, out),
            Op::LayerNorm {
                x,
                weight,
                bias,
                xhat: Rc::new(xhat),
                rstd: Rc::new(rstd),
            },
            rg,
        )
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let v = self.value(x).map(gelu);
        let rg = self.rg(x);
        self.push(v, Op::Gelu(x), rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let v = self.value(x).map(sigmoid);
        let rg = self.rg(x);
        self.push(v, Op::Sigmoid(x), rg)
    }

    /// Softmax along the trailing (column) axis of a `[rows, cols]` view.
    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let cols = self.value(x).cols();
        let mut v = self.value(x).clone();
        for row in v.data_mut().chunks_mut(cols) {
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for e in row.iter_mut() {
                *e = (*e - mx).exp();
                s += *e;
            }
            for e in row.iter_mut() {
                *e /= s;
            }
        }
        let rg = self.rg(x);
        self.push(v, Op::SoftmaxRows(x), rg)
    }

    /// Unit-L2 normalization of each row.
    pub fn l2_normalize_rows(&mut self, x: Var) -> Var {
        let cols = self.value(x).cols();
        let mut v = self.value(x).clone();
        let mut norms = Vec::with_capacity(v.rows());
        for row in v.data_mut().chunks_mut(cols) {
            let n = kernels::dot(row, row).sqrt().max(NORM_EPS);
            for e in row.iter_mut() {
                *e /= n;
            }
            norms.push(n);
        }
        let rg = self.rg(x);
        self.push(
            v,
            Op::L2NormRows {
                x,
                norms: Rc::new(norms),
            },
            rg,
        )
    }

    /// Rows `start..start+len` along the leading axis.
    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Var {
        let cols = self.value(x).cols();
        let mut shape = self.shape(x).to_vec();
        assert!(start + len <= shape[0], "slice_rows out of range");
        shape[0] = len;
        let data = self.value(x).data()[start * cols..(start + len) * cols].to_vec();
        let rg = self.rg(x);
        self.push(Tensor::from_parts(shape, data), Op::SliceRows { x, start }, rg)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let mut shape = self.shape(parts[0]).to_vec();
        let cols = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            assert_eq!(self.value(p).cols(), cols, "concat_rows: column mismatch");
            rows += self.value(p).rows();
            data.extend_from_slice(self.value(p).data());
        }
        shape[0] = rows;
        let rg = parts.iter().any(|&p| self.rg(p));
        self.push(Tensor::from_parts(shape, data), Op::ConcatRows(parts.to_vec()), rg)
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Var {
        let t = self
            .value(x)
            .clone()
            .reshaped(shape)
            .expect("reshape: element count mismatch");
        let rg = self.rg(x);
        self.push(t, Op::Reshape(x), rg)
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let (r, c) = (self.value(x).rows(), self.value(x).cols());
        let data = kernels::transpose(self.value(x).data(), r, c);
        let rg = self.rg(x);
        self.push(Tensor::from_parts(vec![c, r], data), Op::Transpose(x), rg)
    }

    pub fn pixel_unshuffle(&mut self, x: Var) -> Var {
        let s = self.shape(x).to_vec();
        let out = kernels::pixel_unshuffle(self.value(x).data(), s[0], s[1], s[2]);
        let rg = self.rg(x);
        self.push(
            Tensor::from_parts(vec![s[0] * 4, s[1] / 2, s[2] / 2], out),
            Op::PixelUnshuffle(x),
            rg,
        )
    }

    pub fn pixel_shuffle(&mut self, x: Var) -> Var {
        let s = self.shape(x).to_vec();
        let out = kernels::pixel_shuffle(self.value(x).data(), s[0], s[1], s[2]);
        let rg = self.rg(x);
        self.push(
            Tensor::from_parts(vec![s[0] / 4, s[1] * 2, s[2] * 2], out),
            Op::PixelShuffle(x),
            rg,
        )
    }

    /// Mean feature vector per segment: `[C, P]` with `labels[p] < segments` → `[segments, C]`.
    /// Empty segments produce zero rows.
    pub fn segment_mean(&mut self, x: Var, labels: Rc<Vec<usize>>, segments: usize) -> Var {
        let c = self.value(x).rows();
        let p = self.value(x).cols();
        assert_eq!(labels.len(), p, "segment_mean: label map size");
        let mut counts = vec![0usize; segments];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let xd = self.value(x).data();
        let mut out = vec![0.0; segments * c];
        for ch in 0..c {
            for (i, &l) in labels.iter().enumerate() {
                out[l * c + ch] += xd[ch * p + i];
            }
        }
        for (s, &n) in counts.iter().enumerate() {
            if n > 0 {
                for ch in 0..c {
                    out[s * c + ch] /= n as f64;
                }
            }
        }
        let rg = self.rg(x);
        self.push(
            Tensor::from_parts(vec![segments, c], out),
            Op::SegmentMean {
                x,
                labels,
                counts: Rc::new(counts),
            },
            rg,
        )
    }

    /// Scatter per-segment vectors `[S, C]` back to a `[C, h, w]` map.
    pub fn segment_broadcast(&mut self, means: Var, labels: Rc<Vec<usize>>, h: usize, w: usize) -> Var {
        let c = self.value(means).cols();
        assert_eq!(labels.len(), h * w);
        let md = self.value(means).data();
        let p = h * w;
        let mut out = vec![0.0; c * p];
        for ch in 0..c {
            for (i, &l) in labels.iter().enumerate() {
                out[ch * p + i] = md[l * c + ch];
            }
        }
        let rg = self.rg(means);
        self.push(
            Tensor::from_parts(vec![c, h, w], out),
            Op::SegmentBroadcast { means, labels },
            rg,
        )
    }

    pub fn bilinear_resize(&mut self, x: Var, oh: usize, ow: usize) -> Var {
        let s = self.shape(x).to_vec();
        let out = kernels::bilinear_resize(self.value(x).data(), s[0], s[1], s[2], oh, ow);
        let rg = self.rg(x);
        self.push(Tensor::from_parts(vec![s[0], oh, ow], out), Op::Bilinear(x), rg)
    }

    pub fn crop(&mut self, x: Var, top: usize, left: usize, h: usize, w: usize) -> Var {
        let s = self.shape(x).to_vec();
        assert!(top + h <= s[1] && left + w <= s[2], "crop out of range");
        let xd = self.value(x).data();
        let mut out = Vec::with_capacity(s[0] * h * w);
        for ch in 0..s[0] {
            for y in 0..h {
                let base = (ch * s[1] + top + y) * s[2] + left;
                out.extend_from_slice(&xd[base..base + w]);
            }
        }
        let rg = self.rg(x);
        self.push(Tensor::from_parts(vec![s[0], h, w], out), Op::Crop { x, top, left }, rg)
    }

    pub fn clamp01(&mut self, x: Var) -> Var {
        let v = self.value(x).map(|e| e.clamp(0.0, 1.0));
        let rg = self.rg(x);
        self.push(v, Op::Clamp01(x), rg)
    }

    /// Separable reflect-padded filter applied along both spatial axes.
    pub fn separable_filter(&mut self, x: Var, kernel: Vec<f64>) -> Var {
        let s = self.shape(x).to_vec();
        let out = kernels::separable_filter(self.value(x).data(), s[0], s[1], s[2], &kernel);
        let rg = self.rg(x);
        self.push(
            Tensor::from_parts(s, out),
            Op::Filter {
                x,
                kernel: Rc::new(kernel),
            },
            rg,
        )
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let m = self.value(x).mean();
        let rg = self.rg(x);
        self.push(Tensor::scalar(m), Op::Mean(x), rg)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let m = self.value(x).sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(m), Op::Sum(x), rg)
    }

    pub fn mean_abs_diff(&mut self, a: Var, b: Var) -> Var {
        self.binary_same(a, b, "mean_abs_diff");
        let n = self.value(a).len() as f64;
        let s: f64 = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| (x - y).abs())
            .sum();
        let rg = self.rg(a) || self.rg(b);
        self.push(Tensor::scalar(s / n), Op::MeanAbsDiff(a, b), rg)
    }

    pub fn mean_sq_diff(&mut self, a: Var, b: Var) -> Var {
        self.binary_same(a, b, "mean_sq_diff");
        let n = self.value(a).len() as f64;
        let s: f64 = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        let rg = self.rg(a) || self.rg(b);
        self.push(Tensor::scalar(s / n), Op::MeanSqDiff(a, b), rg)
    }

    /// Reverse sweep from a scalar `root`, seeded with `seed` (usually 1).
    pub fn backward(&self, root: Var, seed: f64) -> Gradients {
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::full(self.shape(root), seed));
        for idx in (0..=root.0).rev() {
            let g = match grads[idx].take() {
                Some(g) => g,
                None => continue,
            };
            if !self.nodes[idx].requires_grad {
                continue;
            }
            self.backward_node(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, contribution: Tensor) {
        if !self.rg(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&contribution),
            slot @ None => {
                let shape = self.shape(v).to_vec();
                *slot = Some(contribution.reshaped(shape).expect("gradient shape"));
            }
        }
    }

    fn like(&self, v: Var, data: Vec<f64>) -> Tensor {
        Tensor::from_parts(self.shape(v).to_vec(), data)
    }

    fn backward_node(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let gd = g.data();
        let out = &self.nodes[idx].value;
        match &self.nodes[idx].op {
            Op::Constant | Op::Param(_) => {}
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.map(|e| -e));
            }
            Op::Mul(a, b) => {
                if self.rg(*a) {
                    let d = gd.iter().zip(self.value(*b).data()).map(|(g, y)| g * y).collect();
                    self.accumulate(grads, *a, self.like(*a, d));
                }
                if self.rg(*b) {
                    let d = gd.iter().zip(self.value(*a).data()).map(|(g, x)| g * x).collect();
                    self.accumulate(grads, *b, self.like(*b, d));
                }
            }
            Op::Affine(x, scale) => {
                self.accumulate(grads, *x, g.map(|e| e * scale));
            }
            Op::MulScalar(x, s) => {
                let sv = self.scalar_value(*s);
                if self.rg(*x) {
                    self.accumulate(grads, *x, g.map(|e| e * sv));
                }
                if self.rg(*s) {
                    let d = kernels::dot(gd, self.value(*x).data());
                    self.accumulate(grads, *s, self.like(*s, vec![d]));
                }
            }
            Op::AddChannel(x, b) => {
                self.accumulate(grads, *x, g.clone());
                if self.rg(*b) {
                    let cols = g.cols();
                    let d = gd.chunks(cols).map(|r| r.iter().sum()).collect();
                    self.accumulate(grads, *b, self.like(*b, d));
                }
            }
            Op::MulChannel(x, s) => {
                let cols = g.cols();
                if self.rg(*x) {
                    let sv = self.value(*s).data();
                    let mut d = gd.to_vec();
                    for (r, chunk) in d.chunks_mut(cols).enumerate() {
                        for e in chunk {
                            *e *= sv[r];
                        }
                    }
                    self.accumulate(grads, *x, self.like(*x, d));
                }
                if self.rg(*s) {
                    let xd = self.value(*x).data();
                    let d = gd
                        .chunks(cols)
                        .zip(xd.chunks(cols))
                        .map(|(gr, xr)| kernels::dot(gr, xr))
                        .collect();
                    self.accumulate(grads, *s, self.like(*s, d));
                }
            }
            Op::AddCol(x, b) => {
                self.accumulate(grads, *x, g.clone());
                if self.rg(*b) {
                    let cols = g.cols();
                    let mut d = vec![0.0; cols];
                    for row in gd.chunks(cols) {
                        for (dd, e) in d.iter_mut().zip(row) {
                            *dd += e;
                        }
                    }
                    self.accumulate(grads, *b, self.like(*b, d));
                }
            }
            Op::MulSpatial(x, m) => {
                let cols = g.cols();
                if self.rg(*x) {
                    let mv = self.value(*m).data();
                    let mut d = gd.to_vec();
                    for chunk in d.chunks_mut(cols) {
                        for (e, mm) in chunk.iter_mut().zip(mv) {
                            *e *= mm;
                        }
                    }
                    self.accumulate(grads, *x, self.like(*x, d));
                }
                if self.rg(*m) {
                    let xd = self.value(*x).data();
                    let mut d = vec![0.0; cols];
                    for (gr, xr) in gd.chunks(cols).zip(xd.chunks(cols)) {
                        for ((dd, a), b) in d.iter_mut().zip(gr).zip(xr) {
                            *dd += a * b;
                        }
                    }
                    self.accumulate(grads, *m, self.like(*m, d));
                }
            }
            Op::BroadcastSpatial(v) => {
                let cols = g.cols();
                let d = gd.chunks(cols).map(|r| r.iter().sum()).collect();
                self.accumulate(grads, *v, self.like(*v, d));
            }
            Op::MatMul(a, b) => {
                let (m, k) = (self.value(*a).rows(), self.value(*a).cols());
                let n = self.value(*b).cols();
                if self.rg(*a) {
                    let mut d = vec![0.0; m * k];
                    kernels::matmul_nt_acc(gd, self.value(*b).data(), &mut d, m, n, k);
                    self.accumulate(grads, *a, self.like(*a, d));
                }
                if self.rg(*b) {
                    let mut d = vec![0.0; k * n];
                    kernels::matmul_tn_acc(self.value(*a).data(), gd, &mut d, m, k, n);
                    self.accumulate(grads, *b, self.like(*b, d));
                }
            }
            Op::MatMulNT(a, b) => {
                // C[m×n] = A[m×k] Bᵀ, B is [n×k]
                let (m, k) = (self.value(*a).rows(), self.value(*a).cols());
                let n = self.value(*b).rows();
                if self.rg(*a) {
                    let mut d = vec![0.0; m * k];
                    kernels::matmul_acc(gd, self.value(*b).data(), &mut d, m, n, k);
                    self.accumulate(grads, *a, self.like(*a, d));
                }
                if self.rg(*b) {
                    let mut d = vec![0.0; n * k];
                    kernels::matmul_tn_acc(gd, self.value(*a).data(), &mut d, m, n, k);
                    self.accumulate(grads, *b, self.like(*b, d));
                }
            }
            Op::Conv3x3(x, w) => {
                let s = self.shape(*x);
                let co = self.shape(*w)[0];
                let (dx, dw) = kernels::conv3x3_backward(
                    self.value(*x).data(),
                    self.value(*w).data(),
                    gd,
                    s[0],
                    co,
                    s[1],
                    s[2],
                    self.rg(*x),
                );
                if let Some(dx) = dx {
                    self.accumulate(grads, *x, self.like(*x, dx));
                }
                if self.rg(*w) {
                    self.accumulate(grads, *w, self.like(*w, dw));
                }
            }
            Op::DwConv3x3(x, w) => {
                let s = self.shape(*x);
                let (dx, dw) = kernels::dwconv3x3_backward(
                    self.value(*x).data(),
                    self.value(*w).data(),
                    gd,
                    s[0],
                    s[1],
                    s[2],
                    self.rg(*x),
                );
                if let Some(dx) = dx {
                    self.accumulate(grads, *x, self.like(*x, dx));
                }
                if self.rg(*w) {
                    self.accumulate(grads, *w, self.like(*w, dw));
                }
            }
            Op::LayerNorm {
                x,
                weight,
                bias,
                xhat,
                rstd,
            } => {
                let c = g.rows();
                let p = g.cols();
                let wv = self.value(*weight).data();
                if self.rg(*weight) {
                    let d = (0..c)
                        .map(|ch| kernels::dot(&gd[ch * p..(ch + 1) * p], &xhat[ch * p..(ch + 1) * p]))
                        .collect();
                    self.accumulate(grads, *weight, self.like(*weight, d));
                }
                if self.rg(*bias) {
                    let d = gd.chunks(p).map(|r| r.iter().sum()).collect();
                    self.accumulate(grads, *bias, self.like(*bias, d));
                }
                if self.rg(*x) {
                    // dx = rstd * (gh - mean(gh) - xhat * mean(gh * xhat)), gh = g * w
                    let mut m1 = vec![0.0; p];
                    let mut m2 = vec![0.0; p];
                    for ch in 0..c {
                        for i in 0..p {
                            let gh = gd[ch * p + i] * wv[ch];
                            m1[i] += gh;
                            m2[i] += gh * xhat[ch * p + i];
                        }
                    }
                    let inv_c = 1.0 / c as f64;
                    let mut d = vec![0.0; c * p];
                    for ch in 0..c {
                        for i in 0..p {
                            let gh = gd[ch * p + i] * wv[ch];
                            d[ch * p + i] =
                                rstd[i] * (gh - m1[i] * inv_c - xhat[ch * p + i] * m2[i] * inv_c);
                        }
                    }
                    self.accumulate(grads, *x, self.like(*x, d));
                }
            }
            Op::Gelu(x) => {
                let d = gd
                    .iter()
                    .zip(self.value(*x).data())
                    .map(|(g, &v)| g * gelu_grad(v))
                    .collect();
                self.accumulate(grads, *x, self.like(*x, d));
            }
            Op::Sigmoid(x) => {
                let d = gd.iter().zip(out.data()).map(|(g, &s)| g * s * (1.0 - s)).collect();
                self.accumulate(grads, *x, self.like(*x, d));
            }
            Op::SoftmaxRows(x) => {
                let cols = g.cols();
                let mut d = vec![0.0; gd.len()];
                for ((dr, gr), yr) in d.chunks_mut(cols).zip(gd.chunks(cols)).zip(out.data().chunks(cols)) {
                    let s = kernels::dot(gr, yr);
                    for ((dd, &gg), &yy) in dr.iter_mut().zip(gr).zip(yr) {
                        *dd = yy * (gg - s);
                    }
                }
                self.accumulate(grads, *x, self.like(*x, d));
            }
            Op::L2NormRows { x, norms } => {
                let cols = g.cols();
                let mut d = vec![0.0; gd.len()];
                for (r, ((dr, gr), yr)) in d
                    .chunks_mut(cols)
                    .zip(gd.chunks(cols))
                    .zip(out.data().chunks(cols))
                    .enumerate()
                {
                    let s = kernels::dot(gr, yr);
                    let n = norms[r];
                    for ((dd, &gg), &yy) in dr.iter_mut().zip(gr).zip(yr) {
                        *dd = (gg - yy * s) / n;
                    }
                }
                self.accumulate(grads, *x, self.like(*x, d));
            }
            Op::SliceRows { x, start } => {
                let cols = g.cols();
                let mut d = vec![0.0; self.value(*x).len()];
                d[start * cols..start * cols + gd.len()].copy_from_slice(gd);
                self.accumulate(grads, *x, self.like(*x, d));
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    if self.rg(p) {
                        self.accumulate(grads, p, self.like(p, gd[offset..offset + n].to_vec()));
                    }
                    offset += n;
                }
            }
            Op::Reshape(x) => {
                self.accumulate(grads, *x, self.like(*x, gd.to_vec()));
            }
            Op::Transpose(x) => {
                let d = kernels::transpose(gd, g.rows(), g.cols());
                self.accumulate(grads, *x, self.like(*x, d));
            }
            Op::PixelUnshuffle(x) => {
                let s = self.shape(*x);
                let d = kernels::pixel_shuffle(gd, s[0] * 4, s[1] / 2, s[2] / 2);
                self.accumulate(grads, *x, self.like(*x, d));
            }
            Op::PixelShuffle(x) => {
                let s = self.shape(*x);
                let d = kernels::pixel_unshuffle(gd, s[0] / 4, s[1] * 2, s[2] * 2);
                self.accumulate(grads, *x, self.like(*x, d));
            }
            Op::SegmentMean { x, labels, counts } => {
                let c = self.value(*x).rows();
                let p = self.value(*x).cols();
                let mut d = vec![0.0; c * p];
                for ch in 0..c {
                    for (i, &l) in labels.iter().enumerate() {
                        d[ch * p + i] = gd[l * c + ch] / counts[l] as f64;
                    }
                }
                self.accumulate(grads, *x, self.like(*x, d));
            }
            Op::SegmentBroadcast { means, labels } => {
                let c = self.value(*means).cols();
                let p = labels.len();
                let mut d = vec![0.0; self.value(*means).len()];
                for ch in 0..c {
                    for (i, &l) in labels.iter().enumerate() {
                        d[l * c + ch] += gd[ch * p + i];
                    }
                }
                self.accumulate(grads, *means, self.like(*means, d));
            }
            Op::Bilinear(x) => {
                let s = self.shape(*x);
                let os = g.shape();
                let d = kernels::bilinear_resize_backward(gd, s[0], s[1], s[2], os[1], os[2]);
                self.accumulate(grads, *x, self.like(*x, d));
            }
            Op::Crop { x, top, left } => {
                let s = self.shape(*x);
                let os = g.shape();
                let mut d = vec![0.0; self.value(*x).len()];
                for ch in 0..os[0] {
                    for y in 0..os[1] {
                        let dst = (ch * s[1] + top + y) * s[2] + left;
                        let src = (ch * os[1] + y) * os[2];
                        d[dst..dst + os[2]].copy_from_slice(&gd[src..src + os[2]]);
                    }
                }
                self.accumulate(grads, *x, self.like(*x, d));
            }
            Op::Clamp01(x) => {
                let d = gd
                    .iter()
                    .zip(self.value(*x).data())
                    .map(|(&g, &v)| if (0.0..=1.0).contains(&v) { g } else { 0.0 })
                    .collect();
                self.accumulate(grads, *x, self.like(*x, d));
            }
            Op::Filter { x, kernel } => {
                let s = self.shape(*x);
                let d = kernels::separable_filter_backward(gd, s[0], s[1], s[2], kernel);
                self.accumulate(grads, *x, self.like(*x, d));
            }
            Op::Mean(x) => {
                let n = self.value(*x).len() as f64;
                let v = gd[0] / n;
                self.accumulate(grads, *x, Tensor::full(self.shape(*x), v));
            }
            Op::Sum(x) => {
                self.accumulate(grads, *x, Tensor::full(self.shape(*x), gd[0]));
            }
            Op::MeanAbsDiff(a, b) => {
                let n = self.value(*a).len() as f64;
                let scale = gd[0] / n;
                let d: Vec<f64> = self
                    .value(*a)
                    .data()
                    .iter()
                    .zip(self.value(*b).data())
                    .map(|(x, y)| {
                        let diff = x - y;
                        if diff > 0.0 {
                            scale
                        } else if diff < 0.0 {
                            -scale
                        } else {
                            0.0
                        }
                    })
                    .collect();
                if self.rg(*b) {
                    self.accumulate(grads, *b, self.like(*b, d.iter().map(|e| -e).collect()));
                }
                self.accumulate(grads, *a, self.like(*a, d));
            }
            Op::MeanSqDiff(a, b) => {
                let n = self.value(*a).len() as f64;
                let scale = 2.0 * gd[0] / n;
                let d: Vec<f64> = self
                    .value(*a)
                    .data()
                    .iter()
                    .zip(self.value(*b).data())
                    .map(|(x, y)| scale * (x - y))
                    .collect();
                if self.rg(*b) {
                    self.accumulate(grads, *b, self.like(*b, d.iter().map(|e| -e).collect()));
                }
                self.accumulate(grads, *a, self.like(*a, d));
            }
        }
    }

    /// Add the gradients of every parameter leaf into `acc`.
    pub fn collect_param_grads(&self, grads: &Gradients, acc: &mut ParamGrads) {
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Param(id) = node.op {
                if let Some(g) = &grads.grads[i] {
                    acc.add(id, g);
                }
            }
        }
    }
}

pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }
}
