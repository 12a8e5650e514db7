//! The three guidance blocks as standalone layers.
//!
//! * QGM: per-channel scale and shift predicted from the quality vector.
//! * MAP + SCA: region-mean pooling of shallow features and cross-attention in
//!   which backbone features query projections of the pooled map.
//! * DAM: content cross-attention next to a sigmoid degradation mask driven by
//!   a prompt mixed from a learnable bank.
//!
//! Every block has a graph form (used by the network, differentiable) and a
//! value form over [`FeatureMap`]s. Parameter records are generic over their
//! leaf type so the same layout serves tensors, graph variables and parameter
//! ids.

use std::rc::Rc;

use rand_chacha::ChaCha8Rng;

use crate::config::ContentAttention;
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::guidance::SemanticMaskSet;
use crate::image::FeatureMap;
use crate::params::trunc_normal;
use crate::tensor::Tensor;

const INIT_STD: f64 = 0.02;

/// Two-layer perceptron `w2 · gelu(w1 · x + b1) + b2` whose hidden width
/// equals its output width.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub w1: T,
    pub b1: T,
    pub w2: T,
    pub b2: T,
}

impl<T> Mlp<T> {
    pub fn map_named<U>(&self, prefix: &str, f: &mut impl FnMut(&str, &T) -> U) -> Mlp<U> {
        Mlp {
            w1: f(&format!("{prefix}.w1"), &self.w1),
            b1: f(&format!("{prefix}.b1"), &self.b1),
            w2: f(&format!("{prefix}.w2"), &self.w2),
            b2: f(&format!("{prefix}.b2"), &self.b2),
        }
    }
}

impl Mlp<Tensor> {
    pub fn init(rng: &mut ChaCha8Rng, input: usize, output: usize) -> Self {
        Mlp {
            w1: trunc_normal(rng, &[output, input], INIT_STD),
            b1: Tensor::zeros(&[output]),
            w2: trunc_normal(rng, &[output, output], INIT_STD),
            b2: Tensor::zeros(&[output]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.shape()[1]
    }

    pub fn output_dim(&self) -> usize {
        self.w2.shape()[0]
    }

    fn check(&self, what: &str) -> Result<()> {
        let (o, i) = (self.w1.shape()[0], self.w1.shape()[1]);
        let ok = self.w1.shape().len() == 2
            && self.b1.len() == o
            && self.w2.shape() == [o, o]
            && self.b2.len() == o
            && i > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!("{what}: inconsistent perceptron shapes")))
        }
    }
}

/// `w · x` for `w: [out, in]` and a vector `x: [in]`, giving `[out]`.
pub fn linear(g: &mut Graph, w: Var, x: Var) -> Var {
    let y = g.matmul(w, x);
    let n = g.value(y).len();
    g.reshape(y, vec![n])
}

pub fn mlp_on_graph(g: &mut Graph, x: Var, p: &Mlp<Var>) -> Var {
    let h = linear(g, p.w1, x);
    let h = g.add(h, p.b1);
    let h = g.gelu(h);
    let o = linear(g, p.w2, h);
    g.add(o, p.b2)
}

// ---------------------------------------------------------------- QGM

#[derive(Debug, Clone, PartialEq)]
pub struct QgmParams<T> {
    pub scale_weight: T,
    pub scale_bias: T,
    pub shift_weight: T,
    pub shift_bias: T,
}

impl<T> QgmParams<T> {
    pub fn map_named<U>(&self, prefix: &str, f: &mut impl FnMut(&str, &T) -> U) -> QgmParams<U> {
        QgmParams {
            scale_weight: f(&format!("{prefix}.scale_weight"), &self.scale_weight),
            scale_bias: f(&format!("{prefix}.scale_bias"), &self.scale_bias),
            shift_weight: f(&format!("{prefix}.shift_weight"), &self.shift_weight),
            shift_bias: f(&format!("{prefix}.shift_bias"), &self.shift_bias),
        }
    }
}

impl QgmParams<Tensor> {
    /// Scale starts near one and shift at exactly zero, so the block begins
    /// close to the identity.
    pub fn init(rng: &mut ChaCha8Rng, quality_dim: usize, channels: usize) -> Self {
        QgmParams {
            scale_weight: trunc_normal(rng, &[channels, quality_dim], INIT_STD),
            scale_bias: Tensor::full(&[channels], 1.0),
            shift_weight: Tensor::zeros(&[channels, quality_dim]),
            shift_bias: Tensor::zeros(&[channels]),
        }
    }
}

/// `x ⊙ scale(f_q) + shift(f_q)` with the per-channel vectors broadcast spatially.
pub fn qgm_on_graph(g: &mut Graph, x: Var, fq: Var, p: &QgmParams<Var>) -> Var {
    let s = linear(g, p.scale_weight, fq);
    let s = g.add(s, p.scale_bias);
    let t = linear(g, p.shift_weight, fq);
    let t = g.add(t, p.shift_bias);
    let y = g.mul_channel(x, s);
    g.add_channel(y, t)
}

pub fn qgm_forward(x: &FeatureMap, fq: &[f64], p: &QgmParams<Tensor>) -> Result<FeatureMap> {
    let c = x.channels();
    for (name, w, b) in [
        ("scale", &p.scale_weight, &p.scale_bias),
        ("shift", &p.shift_weight, &p.shift_bias),
    ] {
        if w.shape() != [c, fq.len()] || b.len() != c {
            return Err(Error::Shape(format!(
                "{name} projection {:?} does not map a {}-d quality vector to {c} channels",
                w.shape(),
                fq.len()
            )));
        }
    }
    let mut g = Graph::new();
    let xv = g.constant(x.tensor().clone());
    let fv = g.constant(Tensor::vector(fq.to_vec()));
    let pv = p.map_named("", &mut |_, t| g.constant(t.clone()));
    let y = qgm_on_graph(&mut g, xv, fv, &pv);
    FeatureMap::new(g.value(y).clone())
}

// ---------------------------------------------------------------- MAP

/// Region means of `x: [C, H, W]` over `labels` as a `[segments, C]` matrix.
pub fn map_means_on_graph(g: &mut Graph, x: Var, labels: Rc<Vec<usize>>, segments: usize) -> Var {
    let s = g.shape(x).to_vec();
    let flat = g.reshape(x, vec![s[0], s[1] * s[2]]);
    g.segment_mean(flat, labels, segments)
}

/// Every pixel replaced by the mean feature of its segment.
pub fn map_on_graph(g: &mut Graph, x: Var, labels: Rc<Vec<usize>>, segments: usize) -> Var {
    let s = g.shape(x).to_vec();
    let means = map_means_on_graph(g, x, labels.clone(), segments);
    g.segment_broadcast(means, labels, s[1], s[2])
}

pub fn mask_average_pool(fs: &FeatureMap, ms: &SemanticMaskSet) -> Result<FeatureMap> {
    if ms.height() != fs.height() || ms.width() != fs.width() {
        return Err(Error::Shape(format!(
            "masks are {}x{}, features are {}x{}",
            ms.height(),
            ms.width(),
            fs.height(),
            fs.width()
        )));
    }
    if !ms.is_partition() {
        return Err(Error::Validation("mask set is not a partition of the image".into()));
    }
    let (labels, n) = ms.labels();
    let mut g = Graph::new();
    let x = g.constant(fs.tensor().clone());
    let y = map_on_graph(&mut g, x, Rc::new(labels), n);
    FeatureMap::new(g.value(y).clone())
}

// ---------------------------------------------------------------- SCA

/// Key and value projections `[C, C_sem]`; queries are the input features.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaParams<T> {
    pub key: T,
    pub value: T,
}

impl<T> ScaParams<T> {
    pub fn map_named<U>(&self, prefix: &str, f: &mut impl FnMut(&str, &T) -> U) -> ScaParams<U> {
        ScaParams {
            key: f(&format!("{prefix}.key"), &self.key),
            value: f(&format!("{prefix}.value"), &self.value),
        }
    }
}

impl ScaParams<Tensor> {
    pub fn init(rng: &mut ChaCha8Rng, sem_channels: usize, channels: usize) -> Self {
        ScaParams {
            key: trunc_normal(rng, &[channels, sem_channels], INIT_STD),
            value: trunc_normal(rng, &[channels, sem_channels], INIT_STD),
        }
    }
}

/// Multi-head attention of `q: [C, P]` over `tokens` keys/values `[C, T]`.
/// `bias` (length `T`) is added to every logit row. Returns `[C, P]`.
fn attend(g: &mut Graph, q: Var, k: Var, v: Var, bias: Option<Var>, heads: usize) -> Var {
    let c = g.value(q).rows();
    let d = c / heads;
    let scale = 1.0 / (d as f64).sqrt();
    let mut outs = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = g.slice_rows(q, h * d, d);
        let qt = g.transpose(qh);
        let kh = g.slice_rows(k, h * d, d);
        let logits = g.matmul(qt, kh);
        let mut logits = g.affine(logits, scale, 0.0);
        if let Some(b) = bias {
            logits = g.add_col(logits, b);
        }
        let a = g.softmax_rows(logits);
        let vh = g.slice_rows(v, h * d, d);
        outs.push(g.matmul_nt(vh, a));
    }
    if outs.len() == 1 {
        outs[0]
    } else {
        g.concat_rows(&outs)
    }
}

/// Attention over every spatial position of `f_sem` (same spatial size as `f_in`).
pub fn sca_dense_on_graph(g: &mut Graph, f_in: Var, f_sem: Var, p: &ScaParams<Var>, heads: usize) -> Var {
    let s = g.shape(f_in).to_vec();
    let pcount = s[1] * s[2];
    let q = g.reshape(f_in, vec![s[0], pcount]);
    let k = g.conv1x1(f_sem, p.key);
    let k = g.reshape(k, vec![s[0], pcount]);
    let v = g.conv1x1(f_sem, p.value);
    let v = g.reshape(v, vec![s[0], pcount]);
    let o = attend(g, q, k, v, None, heads);
    g.reshape(o, s)
}

/// The same attention when `f_sem` is piecewise constant over segments:
/// positions sharing a value are merged into one token whose logit carries
/// `ln(count)`. `means: [S, C_sem]`, `log_counts[i] = ln(n_i)` (`-inf` for
/// empty segments). Exactly equal to the dense form on the broadcast map.
pub fn sca_segments_on_graph(
    g: &mut Graph,
    f_in: Var,
    means: Var,
    log_counts: &[f64],
    p: &ScaParams<Var>,
    heads: usize,
) -> Var {
    let s = g.shape(f_in).to_vec();
    let q = g.reshape(f_in, vec![s[0], s[1] * s[2]]);
    let k = g.matmul_nt(p.key, means);
    let v = g.matmul_nt(p.value, means);
    let bias = g.constant(Tensor::vector(log_counts.to_vec()));
    let o = attend(g, q, k, v, Some(bias), heads);
    g.reshape(o, s)
}

fn check_sca(f_in: &FeatureMap, f_sem: &FeatureMap, p: &ScaParams<Tensor>, heads: usize) -> Result<()> {
    if f_in.height() != f_sem.height() || f_in.width() != f_sem.width() {
        return Err(Error::Shape("query and semantic maps differ in spatial size".into()));
    }
    let c = f_in.channels();
    if heads == 0 || !c.is_multiple_of(heads) {
        return Err(Error::Shape(format!("{c} channels cannot be split into {heads} heads")));
    }
    for (name, w) in [("key", &p.key), ("value", &p.value)] {
        if w.shape() != [c, f_sem.channels()] {
            return Err(Error::Shape(format!("{name} projection has shape {:?}", w.shape())));
        }
    }
    Ok(())
}

pub fn sca_forward(f_in: &FeatureMap, f_sem: &FeatureMap, p: &ScaParams<Tensor>, heads: usize) -> Result<FeatureMap> {
    check_sca(f_in, f_sem, p, heads)?;
    let mut g = Graph::new();
    let a = g.constant(f_in.tensor().clone());
    let b = g.constant(f_sem.tensor().clone());
    let pv = p.map_named("", &mut |_, t| g.constant(t.clone()));
    let y = sca_dense_on_graph(&mut g, a, b, &pv, heads);
    FeatureMap::new(g.value(y).clone())
}

/// Attention matrices `[P, P]` per head, row-major (for inspection).
pub fn sca_attention(f_in: &FeatureMap, f_sem: &FeatureMap, p: &ScaParams<Tensor>, heads: usize) -> Result<Vec<Tensor>> {
    check_sca(f_in, f_sem, p, heads)?;
    let c = f_in.channels();
    let n = f_in.height() * f_in.width();
    let d = c / heads;
    let mut g = Graph::new();
    let q = g.constant(f_in.tensor().clone().reshaped(vec![c, n])?);
    let fs = g.constant(f_sem.tensor().clone());
    let kw = g.constant(p.key.clone());
    let k = g.conv1x1(fs, kw);
    let k = g.reshape(k, vec![c, n]);
    let mut out = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = g.slice_rows(q, h * d, d);
        let qt = g.transpose(qh);
        let kh = g.slice_rows(k, h * d, d);
        let l = g.matmul(qt, kh);
        let l = g.affine(l, 1.0 / (d as f64).sqrt(), 0.0);
        let a = g.softmax_rows(l);
        out.push(g.value(a).clone());
    }
    Ok(out)
}

// ---------------------------------------------------------------- prompts

/// `N_p` learnable prompt vectors as an `[N_p, D_p]` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptBank(pub Tensor);

impl PromptBank {
    pub fn new(t: Tensor) -> Result<Self> {
        if t.shape().len() != 2 || t.shape()[0] == 0 || !t.all_finite() {
            return Err(Error::Validation(format!("prompt bank must be finite [N_p, D_p], got {:?}", t.shape())));
        }
        Ok(PromptBank(t))
    }

    pub fn count(&self) -> usize {
        self.0.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.0.shape()[1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegradationPrompt {
    pub f_p: Vec<f64>,
    /// Softmax weights over the bank.
    pub weights: Vec<f64>,
}

/// `mlp1`: degradation embedding → `N_p` logits; `mlp2`: `D_p` → `D_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptParams<T> {
    pub mlp1: Mlp<T>,
    pub mlp2: Mlp<T>,
}

impl<T> PromptParams<T> {
    pub fn map_named<U>(&self, prefix: &str, f: &mut impl FnMut(&str, &T) -> U) -> PromptParams<U> {
        PromptParams {
            mlp1: self.mlp1.map_named(&format!("{prefix}.mlp1"), f),
            mlp2: self.mlp2.map_named(&format!("{prefix}.mlp2"), f),
        }
    }
}

impl PromptParams<Tensor> {
    pub fn init(rng: &mut ChaCha8Rng, embed_dim: usize, prompts: usize, prompt_dim: usize) -> Self {
        PromptParams {
            mlp1: Mlp::init(rng, embed_dim, prompts),
            mlp2: Mlp::init(rng, prompt_dim, prompt_dim),
        }
    }
}

/// Returns `(f_p, weights)`.
pub fn degradation_prompt_on_graph(g: &mut Graph, fd: Var, bank: Var, p: &PromptParams<Var>) -> (Var, Var) {
    let logits = mlp_on_graph(g, fd, &p.mlp1);
    let n = g.value(logits).len();
    let logits = g.reshape(logits, vec![1, n]);
    let w = g.softmax_rows(logits);
    let mixed = g.matmul(w, bank);
    let dp = g.value(mixed).len();
    let mixed = g.reshape(mixed, vec![dp]);
    (mlp_on_graph(g, mixed, &p.mlp2), w)
}

pub fn degradation_prompt(fd: &[f64], bank: &PromptBank, p: &PromptParams<Tensor>) -> Result<DegradationPrompt> {
    p.mlp1.check("prompt logits")?;
    p.mlp2.check("prompt output")?;
    if p.mlp1.input_dim() != fd.len() {
        return Err(Error::Shape(format!(
            "prompt logits expect a {}-d embedding, got {}",
            p.mlp1.input_dim(),
            fd.len()
        )));
    }
    if p.mlp1.output_dim() != bank.count() || p.mlp2.input_dim() != bank.dim() {
        return Err(Error::Shape("prompt perceptrons do not match the bank".into()));
    }
    let mut g = Graph::new();
    let f = g.constant(Tensor::vector(fd.to_vec()));
    let b = g.constant(bank.0.clone());
    let pv = p.map_named("", &mut |_, t| g.constant(t.clone()));
    let (fp, w) = degradation_prompt_on_graph(&mut g, f, b, &pv);
    Ok(DegradationPrompt {
        f_p: g.value(fp).data().to_vec(),
        weights: g.value(w).data().to_vec(),
    })
}

// ---------------------------------------------------------------- DAM

/// `[1, h, w]` map with every value in `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradationMask(Tensor);

impl DegradationMask {
    pub fn new(t: Tensor) -> Result<Self> {
        if t.shape().len() != 3 || t.shape()[0] != 1 {
            return Err(Error::Shape(format!("degradation mask must be [1, h, w], got {:?}", t.shape())));
        }
        if t.data().iter().any(|&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::Validation("degradation mask values must lie strictly inside (0, 1)".into()));
        }
        Ok(DegradationMask(t))
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ContentAttnParams<T> {
    /// The content vector is the single key/value token. With one token the
    /// attention weight is 1, so no key projection is needed.
    KeyValue { value: T, out: T },
    /// The content vector is the query over the spatial positions.
    Query { query: T, key: T, value: T, out: T },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DamParams<T> {
    pub norm_weight: T,
    pub norm_bias: T,
    pub proj: T,
    pub content: ContentAttnParams<T>,
    /// Prompt → `base × base` mask logits.
    pub mask_mlp: Mlp<T>,
    /// `[C, 2C]` fusion of the attention and masked branches.
    pub fuse: T,
}

impl<T> DamParams<T> {
    pub fn map_named<U>(&self, prefix: &str, f: &mut impl FnMut(&str, &T) -> U) -> DamParams<U> {
        let content = match &self.content {
            ContentAttnParams::KeyValue { value, out } => ContentAttnParams::KeyValue {
                value: f(&format!("{prefix}.content.value"), value),
                out: f(&format!("{prefix}.content.out"), out),
            },
            ContentAttnParams::Query { query, key, value, out } => ContentAttnParams::Query {
                query: f(&format!("{prefix}.content.query"), query),
                key: f(&format!("{prefix}.content.key"), key),
                value: f(&format!("{prefix}.content.value"), value),
                out: f(&format!("{prefix}.content.out"), out),
            },
        };
        DamParams {
            norm_weight: f(&format!("{prefix}.norm_weight"), &self.norm_weight),
            norm_bias: f(&format!("{prefix}.norm_bias"), &self.norm_bias),
            proj: f(&format!("{prefix}.proj"), &self.proj),
            content,
            mask_mlp: self.mask_mlp.map_named(&format!("{prefix}.mask_mlp"), f),
            fuse: f(&format!("{prefix}.fuse"), &self.fuse),
        }
    }
}

impl DamParams<Tensor> {
    pub fn init(
        rng: &mut ChaCha8Rng,
        channels: usize,
        content_dim: usize,
        prompt_dim: usize,
        mask_base: usize,
        mode: ContentAttention,
    ) -> Self {
        let c = channels;
        let content = match mode {
            ContentAttention::KeyValue => ContentAttnParams::KeyValue {
                value: trunc_normal(rng, &[c, content_dim], INIT_STD),
                out: trunc_normal(rng, &[c, c], INIT_STD),
            },
            ContentAttention::Query => ContentAttnParams::Query {
                query: trunc_normal(rng, &[c, content_dim], INIT_STD),
                key: trunc_normal(rng, &[c, c], INIT_STD),
                value: trunc_normal(rng, &[c, c], INIT_STD),
                out: trunc_normal(rng, &[c, c], INIT_STD),
            },
        };
        DamParams {
            norm_weight: Tensor::full(&[c], 1.0),
            norm_bias: Tensor::zeros(&[c]),
            proj: trunc_normal(rng, &[c, c], INIT_STD),
            content,
            mask_mlp: Mlp::init(rng, prompt_dim, mask_base * mask_base),
            fuse: trunc_normal(rng, &[c, 2 * c], INIT_STD),
        }
    }
}

/// `sigmoid(mlp(f_p))` as a `base × base` map, bilinearly resized to `h × w`.
pub fn degradation_mask_on_graph(g: &mut Graph, fp: Var, mlp: &Mlp<Var>, h: usize, w: usize) -> Var {
    let logits = mlp_on_graph(g, fp, mlp);
    let n = g.value(logits).len();
    let base = n.isqrt();
    assert_eq!(base * base, n, "mask logits must form a square map");
    let m = g.sigmoid(logits);
    let m = g.reshape(m, vec![1, base, base]);
    if base == h && base == w {
        m
    } else {
        g.bilinear_resize(m, h, w)
    }
}

pub fn degradation_mask(fp: &DegradationPrompt, mlp: &Mlp<Tensor>, h: usize, w: usize) -> Result<DegradationMask> {
    mlp.check("degradation mask")?;
    let n = mlp.output_dim();
    if mlp.input_dim() != fp.f_p.len() || n.isqrt() * n.isqrt() != n {
        return Err(Error::Shape("mask perceptron does not map the prompt to a square map".into()));
    }
    let mut g = Graph::new();
    let f = g.constant(Tensor::vector(fp.f_p.clone()));
    let pv = mlp.map_named("", &mut |_, t| g.constant(t.clone()));
    let m = degradation_mask_on_graph(&mut g, f, &pv, h, w);
    DegradationMask::new(g.value(m).clone())
}

/// One `[C]` content vector from the content embedding, given the projected map `x_hat`.
fn content_vector(g: &mut Graph, x_hat: Var, fc: Var, p: &ContentAttnParams<Var>, heads: usize) -> Var {
    match p {
        ContentAttnParams::KeyValue { value, out } => {
            let v = linear(g, *value, fc);
            linear(g, *out, v)
        }
        ContentAttnParams::Query { query, key, value, out } => {
            let s = g.shape(x_hat).to_vec();
            let n = s[1] * s[2];
            let q = linear(g, *query, fc);
            let q = g.reshape(q, vec![s[0], 1]);
            let k = g.conv1x1(x_hat, *key);
            let k = g.reshape(k, vec![s[0], n]);
            let v = g.conv1x1(x_hat, *value);
            let v = g.reshape(v, vec![s[0], n]);
            let o = attend(g, q, k, v, None, heads);
            let o = g.reshape(o, vec![s[0]]);
            linear(g, *out, o)
        }
    }
}

pub fn dam_on_graph(g: &mut Graph, x: Var, fc: Var, fp: Var, p: &DamParams<Var>, heads: usize) -> Var {
    let s = g.shape(x).to_vec();
    let xn = g.layer_norm_channels(x, p.norm_weight, p.norm_bias);
    let x_hat = g.conv1x1(xn, p.proj);
    let cv = content_vector(g, x_hat, fc, &p.content, heads);
    let att = g.broadcast_spatial(cv, s[1], s[2]);
    let md = degradation_mask_on_graph(g, fp, &p.mask_mlp, s[1], s[2]);
    let fm = g.mul_spatial(x_hat, md);
    let cat = g.concat_rows(&[att, fm]);
    g.conv1x1(cat, p.fuse)
}

pub fn dam_forward(
    x: &FeatureMap,
    fc: &[f64],
    fp: &DegradationPrompt,
    p: &DamParams<Tensor>,
    heads: usize,
) -> Result<FeatureMap> {
    let c = x.channels();
    let square = |t: &Tensor| t.shape() == [c, c];
    let content_ok = match &p.content {
        ContentAttnParams::KeyValue { value, out } => value.shape() == [c, fc.len()] && square(out),
        ContentAttnParams::Query { query, key, value, out } => {
            query.shape() == [c, fc.len()] && square(key) && square(value) && square(out) && heads > 0 && c.is_multiple_of(heads)
        }
    };
    p.mask_mlp.check("degradation mask")?;
    if !content_ok
        || !square(&p.proj)
        || p.norm_weight.len() != c
        || p.norm_bias.len() != c
        || p.fuse.shape() != [c, 2 * c]
        || p.mask_mlp.input_dim() != fp.f_p.len()
    {
        return Err(Error::Shape(format!("block parameters do not fit a {c}-channel input")));
    }
    let mut g = Graph::new();
    let xv = g.constant(x.tensor().clone());
    let fcv = g.constant(Tensor::vector(fc.to_vec()));
    let fpv = g.constant(Tensor::vector(fp.f_p.clone()));
    let pv = p.map_named("", &mut |_, t| g.constant(t.clone()));
    let y = dam_on_graph(&mut g, xv, fcv, fpv, &pv, heads);
    FeatureMap::new(g.value(y).clone())
}
