//! Four-level encoder–decoder restoration network with guidance injection.
//!
//! Level `l` runs at `1/2^l` resolution with `level_channels[l]` channels.
//! Each level stacks transformer blocks made of channel-wise (transposed)
//! multi-head attention and a gated depthwise feed-forward layer, both
//! pre-normalized and residual. Down/upsampling is a 3×3 convolution followed
//! by pixel-unshuffle/shuffle. The decoder concatenates skip connections; the
//! full-resolution decoder keeps the doubled width up to the output head.
//!
//! Guidance blocks attach at the outputs of the stages named in the
//! configuration's injection plan. The network predicts a residual that is
//! added to the (reflect-padded) input and clamped to `[0, 1]`.

use std::collections::BTreeMap;
use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{GuidanceKind, ModelConfig, PipelineOrder, Stage};
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::guidance::{downsample_labels, GuidanceBundle, CLIP_DIM};
use crate::image::{CropGeometry, ImageTensor};
use crate::modulation::{
    dam_on_graph, degradation_prompt_on_graph, linear, map_means_on_graph, qgm_on_graph, sca_segments_on_graph,
    DamParams, PromptParams, QgmParams, ScaParams,
};
use crate::params::{trunc_normal, ParamId, ParamStore};
use crate::tensor::Tensor;

const INIT_STD: f64 = 0.02;
/// Stand-in semantic tokens used when region guidance is disabled.
pub const SEMANTIC_TOKENS: usize = 4;

#[derive(Debug, Clone)]
struct BlockIds {
    norm1_w: ParamId,
    norm1_b: ParamId,
    qkv: ParamId,
    qkv_dw: ParamId,
    temperature: ParamId,
    attn_out: ParamId,
    norm2_w: ParamId,
    norm2_b: ParamId,
    ffn_in: ParamId,
    ffn_dw: ParamId,
    ffn_out: ParamId,
    heads: usize,
    hidden: usize,
}

#[derive(Debug, Clone)]
enum StageGuide {
    Qgm(QgmParams<ParamId>),
    Sca(ScaParams<ParamId>),
    Dam(DamParams<ParamId>),
}

#[derive(Debug, Clone)]
enum QualitySource {
    Adapter { weight: ParamId, bias: ParamId },
    Learned(ParamId),
}

#[derive(Debug, Clone)]
enum SemanticSource {
    Masks,
    Learned(ParamId),
}

#[derive(Debug, Clone)]
enum TaskSource {
    Embeddings { bank: ParamId, prompt: PromptParams<ParamId> },
    Learned { content: ParamId, prompt: ParamId },
}

#[derive(Debug, Clone)]
struct Layout {
    patch_embed: ParamId,
    /// Encoder levels 0..3 then the latent level.
    encoder: Vec<Vec<BlockIds>>,
    /// Decoder levels 2, 1, 0 in forward order.
    decoder: Vec<Vec<BlockIds>>,
    down: Vec<ParamId>,
    up: Vec<ParamId>,
    reduce: Vec<ParamId>,
    head: ParamId,
    guides: BTreeMap<Stage, StageGuide>,
    quality: Option<QualitySource>,
    semantic: Option<SemanticSource>,
    task: Option<TaskSource>,
}

/// Per-name deterministic initialization, independent of construction order,
/// so two layouts that share a parameter name start from the same values.
struct Init<'a> {
    store: &'a mut ParamStore,
    seed: u64,
}

impl Init<'_> {
    fn rng(&self, name: &str) -> ChaCha8Rng {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ self.seed;
        for &b in name.as_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        ChaCha8Rng::seed_from_u64(h)
    }

    fn normal(&mut self, name: &str, shape: &[usize]) -> ParamId {
        let t = trunc_normal(&mut self.rng(name), shape, INIT_STD);
        self.store.insert(name, t)
    }

    fn full(&mut self, name: &str, shape: &[usize], v: f64) -> ParamId {
        self.store.insert(name, Tensor::full(shape, v))
    }

    fn block(&mut self, prefix: &str, c: usize, heads: usize, expansion: f64) -> BlockIds {
        let hidden = (c as f64 * expansion) as usize;
        BlockIds {
            norm1_w: self.full(&format!("{prefix}.norm1.weight"), &[c], 1.0),
            norm1_b: self.full(&format!("{prefix}.norm1.bias"), &[c], 0.0),
            qkv: self.normal(&format!("{prefix}.attn.qkv"), &[3 * c, c]),
            qkv_dw: self.normal(&format!("{prefix}.attn.qkv_dw"), &[3 * c, 3, 3]),
            temperature: self.full(&format!("{prefix}.attn.temperature"), &[heads], 1.0),
            attn_out: self.normal(&format!("{prefix}.attn.out"), &[c, c]),
            norm2_w: self.full(&format!("{prefix}.norm2.weight"), &[c], 1.0),
            norm2_b: self.full(&format!("{prefix}.norm2.bias"), &[c], 0.0),
            ffn_in: self.normal(&format!("{prefix}.ffn.in"), &[2 * hidden, c]),
            ffn_dw: self.normal(&format!("{prefix}.ffn.dw"), &[2 * hidden, 3, 3]),
            ffn_out: self.normal(&format!("{prefix}.ffn.out"), &[c, hidden]),
            heads,
            hidden,
        }
    }

    /// Registers a whole parameter record built from one name-seeded generator.
    fn record<R, T>(&mut self, prefix: &str, build: impl FnOnce(&mut ChaCha8Rng) -> R, map: impl FnOnce(&R, &mut dyn FnMut(&str, &Tensor) -> ParamId) -> T) -> T {
        let r = build(&mut self.rng(prefix));
        let store = &mut *self.store;
        map(&r, &mut |name, t| store.insert(name, t.clone()))
    }
}

/// Channels of the feature map at a stage's output.
pub fn stage_channels(config: &ModelConfig, stage: Stage) -> usize {
    let c = &config.level_channels;
    match stage {
        Stage::Dec1 => 2 * c[0],
        s => c[s.level()],
    }
}

fn stage_heads(config: &ModelConfig, stage: Stage) -> usize {
    config.level_heads[stage.level()]
}

impl Layout {
    fn build(config: &ModelConfig, store: &mut ParamStore) -> Layout {
        let mut init = Init {
            store,
            seed: config.seed,
        };
        let c = &config.level_channels;
        let d = &config.level_depths;
        let h = &config.level_heads;
        let e = config.ffn_expansion;
        let patch_embed = init.normal("patch_embed", &[c[0], 3, 3, 3]);
        let mut encoder = Vec::new();
        let mut down = Vec::new();
        for l in 0..4 {
            let name = if l == 3 { "latent".to_string() } else { format!("enc{}", l + 1) };
            encoder.push((0..d[l]).map(|i| init.block(&format!("{name}.block{i}"), c[l], h[l], e)).collect());
            if l < 3 {
                down.push(init.normal(&format!("down{}", l + 1), &[c[l + 1] / 4, c[l], 3, 3]));
            }
        }
        let mut decoder = Vec::new();
        let mut up = Vec::new();
        let mut reduce = Vec::new();
        for l in (0..3).rev() {
            up.push(init.normal(&format!("up{}", l + 1), &[4 * c[l], c[l + 1], 3, 3]));
            let width = if l == 0 { 2 * c[0] } else { c[l] };
            if l > 0 {
                reduce.push(init.normal(&format!("dec{}.reduce", l + 1), &[c[l], 2 * c[l]]));
            }
            decoder.push(
                (0..d[l])
                    .map(|i| init.block(&format!("dec{}.block{i}", l + 1), width, h[l], e))
                    .collect(),
            );
        }
        let head = init.full("head", &[3, 2 * c[0], 3, 3], 0.0);

        let plan = &config.injection_plan;
        let uses = |k: GuidanceKind| plan.values().any(|&v| v == k);
        let dims = &config.embed_dims;
        let comps = &config.components;
        let quality = uses(GuidanceKind::Qgm).then(|| {
            if comps.iqa {
                QualitySource::Adapter {
                    weight: init.normal("quality.adapter.weight", &[dims.adapter, dims.quality]),
                    bias: init.full("quality.adapter.bias", &[dims.adapter], 0.0),
                }
            } else {
                QualitySource::Learned(init.normal("quality.learned", &[dims.adapter]))
            }
        });
        let semantic = uses(GuidanceKind::Sca).then(|| {
            if comps.sgu {
                SemanticSource::Masks
            } else {
                SemanticSource::Learned(init.normal("semantic.tokens", &[SEMANTIC_TOKENS, c[0]]))
            }
        });
        let task = uses(GuidanceKind::Dam).then(|| {
            if comps.ti {
                let bank = init.normal("prompt.bank", &[config.prompt_count, dims.prompt]);
                let prompt = init.record(
                    "prompt",
                    |r| PromptParams::init(r, CLIP_DIM, config.prompt_count, dims.prompt),
                    |p, f| p.map_named("prompt", &mut |n, t| f(n, t)),
                );
                TaskSource::Embeddings { bank, prompt }
            } else {
                TaskSource::Learned {
                    content: init.normal("content.learned", &[CLIP_DIM]),
                    prompt: init.normal("prompt.learned", &[dims.prompt]),
                }
            }
        });

        let mut guides = BTreeMap::new();
        for (&stage, &kind) in plan {
            let ch = stage_channels(config, stage);
            let prefix = format!("guide.{stage}.{}", kind_name(kind));
            let g = match kind {
                GuidanceKind::None => continue,
                GuidanceKind::Qgm => StageGuide::Qgm(init.record(
                    &prefix,
                    |r| QgmParams::init(r, dims.adapter, ch),
                    |p, f| p.map_named(&prefix, &mut |n, t| f(n, t)),
                )),
                GuidanceKind::Sca => StageGuide::Sca(init.record(
                    &prefix,
                    |r| ScaParams::init(r, c[0], ch),
                    |p, f| p.map_named(&prefix, &mut |n, t| f(n, t)),
                )),
                GuidanceKind::Dam => StageGuide::Dam(init.record(
                    &prefix,
                    |r| {
                        DamParams::init(
                            r,
                            ch,
                            CLIP_DIM,
                            dims.prompt,
                            config.guidance.mask_base_resolution,
                            config.guidance.content_attention,
                        )
                    },
                    |p, f| p.map_named(&prefix, &mut |n, t| f(n, t)),
                )),
            };
            guides.insert(stage, g);
        }
        Layout {
            patch_embed,
            encoder,
            decoder,
            down,
            up,
            reduce,
            head,
            guides,
            quality,
            semantic,
            task,
        }
    }
}

fn kind_name(k: GuidanceKind) -> &'static str {
    match k {
        GuidanceKind::Qgm => "qgm",
        GuidanceKind::Sca => "sca",
        GuidanceKind::Dam => "dam",
        GuidanceKind::None => "none",
    }
}

/// Maps parameter ids to graph leaves, creating each leaf on first use.
pub struct Binder<'a> {
    store: &'a ParamStore,
    vars: Vec<Option<Var>>,
    trainable: bool,
}

impl<'a> Binder<'a> {
    /// `trainable = false` binds parameters as constants (no gradient work).
    pub fn new(store: &'a ParamStore, trainable: bool) -> Self {
        Binder {
            store,
            vars: vec![None; store.len()],
            trainable,
        }
    }

    pub fn get(&mut self, g: &mut Graph, id: ParamId) -> Var {
        if let Some(v) = self.vars[id.0] {
            return v;
        }
        let t = self.store.get(id).clone();
        let v = if self.trainable { g.param(id, t) } else { g.constant(t) };
        self.vars[id.0] = Some(v);
        v
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    params: ParamStore,
    layout: Layout,
}

impl PartialEq for Model {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.params == other.params
    }
}

/// Builds the network with the documented initialization: truncated normal
/// (std 0.02) for projections and convolutions, ones/zeros for normalization
/// affines, a zero output head, zero shift projections, and unit scale biases.
pub fn build_model(config: &ModelConfig) -> Result<Model> {
    config.validate()?;
    let mut params = ParamStore::new();
    let layout = Layout::build(config, &mut params);
    Ok(Model {
        config: config.clone(),
        params,
        layout,
    })
}

/// Tensors shared between forward calls of one graph: the prepared guidance.
struct Prepared {
    fq: Option<Var>,
    sem: Option<(Var, Rc<Vec<usize>>, usize)>,
    fc: Option<Var>,
    fp: Option<Var>,
}

impl Model {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.count()
    }

    pub fn injection_plan(&self) -> &BTreeMap<Stage, GuidanceKind> {
        &self.config.injection_plan
    }

    /// Rebinds the guidance families to a new perception order. Parameters
    /// whose name and shape survive the rebinding keep their values; the rest
    /// take their fresh initialization.
    pub fn set_perception_order(&self, order: PipelineOrder) -> Model {
        let config = self.config.clone().with_perception_order(order);
        let mut params = ParamStore::new();
        let layout = Layout::build(&config, &mut params);
        let ids: Vec<ParamId> = params.ids().collect();
        for id in ids {
            let name = params.name(id).to_string();
            if let Some(old) = self.params.by_name(&name) {
                if old.shape() == params.get(id).shape() {
                    *params.get_mut(id) = old.clone();
                }
            }
        }
        Model { config, params, layout }
    }

    /// Restored image. The input is reflect-padded to a multiple of 8 and the
    /// output cropped back; single-channel inputs run as gray RGB and the
    /// output channels are averaged.
    pub fn forward(&self, img: &ImageTensor, guidance: &GuidanceBundle) -> Result<ImageTensor> {
        let mut g = Graph::new();
        let mut b = Binder::new(&self.params, false);
        let out = self.forward_on_graph(&mut g, &mut b, img, guidance)?;
        let t = g.value(out).clone();
        if img.channels() == 1 {
            let hw = img.height() * img.width();
            let d = t.data();
            let gray = (0..hw).map(|i| (d[i] + d[hw + i] + d[2 * hw + i]) / 3.0).collect();
            return ImageTensor::from_vec(1, img.height(), img.width(), gray);
        }
        ImageTensor::new(t)
    }

    /// Builds the forward pass on `g` and returns the `[3, H, W]` output.
    pub fn forward_on_graph(&self, g: &mut Graph, b: &mut Binder, img: &ImageTensor, guidance: &GuidanceBundle) -> Result<Var> {
        let layout = &self.layout;
        let (h, w) = (img.height(), img.width());
        let (hp, wp) = (h.div_ceil(8) * 8, w.div_ceil(8) * 8);
        let rgb = if img.channels() == 1 {
            let mut d = img.data().to_vec();
            d.extend_from_within(..);
            d.extend_from_within(..h * w);
            ImageTensor::from_vec(3, h, w, d)?
        } else {
            img.clone()
        };
        let pad = CropGeometry::identity(hp, wp);
        let x = g.constant(pad.apply(&rgb).into_tensor());

        let pe = b.get(g, layout.patch_embed);
        let fs = g.conv3x3(x, pe);
        let prep = self.prepare(g, b, layout, guidance, fs, &pad, (h, w))?;

        let mut skips = Vec::new();
        let mut cur = fs;
        for l in 0..4 {
            if l > 0 {
                let dw = b.get(g, layout.down[l - 1]);
                let y = g.conv3x3(cur, dw);
                cur = g.pixel_unshuffle(y);
            }
            for blk in &layout.encoder[l] {
                cur = self.block(g, b, blk, cur);
            }
            let stage = [Stage::Enc1, Stage::Enc2, Stage::Enc3, Stage::Latent][l];
            cur = self.guide(g, b, layout, &prep, stage, cur)?;
            if l < 3 {
                skips.push(cur);
            }
        }
        for (i, l) in (0..3).rev().enumerate() {
            let uw = b.get(g, layout.up[i]);
            let y = g.conv3x3(cur, uw);
            let y = g.pixel_shuffle(y);
            cur = g.concat_rows(&[y, skips[l]]);
            if l > 0 {
                let rw = b.get(g, layout.reduce[i]);
                cur = g.conv1x1(cur, rw);
            }
            for blk in &layout.decoder[i] {
                cur = self.block(g, b, blk, cur);
            }
            let stage = [Stage::Dec1, Stage::Dec2, Stage::Dec3][l];
            cur = self.guide(g, b, layout, &prep, stage, cur)?;
        }
        let hw_ = b.get(g, layout.head);
        let res = g.conv3x3(cur, hw_);
        let y = g.add(x, res);
        let y = if (hp, wp) != (h, w) { g.crop(y, 0, 0, h, w) } else { y };
        Ok(g.clamp01(y))
    }

    fn block(&self, g: &mut Graph, b: &mut Binder, p: &BlockIds, x: Var) -> Var {
        let s = g.shape(x).to_vec();
        let (c, n) = (s[0], s[1] * s[2]);
        // channel attention
        let (nw, nb) = (b.get(g, p.norm1_w), b.get(g, p.norm1_b));
        let y = g.layer_norm_channels(x, nw, nb);
        let wq = b.get(g, p.qkv);
        let qkv = g.conv1x1(y, wq);
        let wd = b.get(g, p.qkv_dw);
        let qkv = g.dwconv3x3(qkv, wd);
        let qkv = g.reshape(qkv, vec![3 * c, n]);
        let temp = b.get(g, p.temperature);
        let d = c / p.heads;
        let mut outs = Vec::with_capacity(p.heads);
        for hd in 0..p.heads {
            let q = g.slice_rows(qkv, hd * d, d);
            let k = g.slice_rows(qkv, c + hd * d, d);
            let v = g.slice_rows(qkv, 2 * c + hd * d, d);
            let q = g.l2_normalize_rows(q);
            let k = g.l2_normalize_rows(k);
            let a = g.matmul_nt(q, k);
            let t = g.slice_rows(temp, hd, 1);
            let a = g.mul_scalar(a, t);
            let a = g.softmax_rows(a);
            outs.push(g.matmul(a, v));
        }
        let o = if outs.len() == 1 { outs[0] } else { g.concat_rows(&outs) };
        let o = g.reshape(o, s.clone());
        let wo = b.get(g, p.attn_out);
        let o = g.conv1x1(o, wo);
        let x = g.add(x, o);
        // gated feed-forward
        let (nw, nb) = (b.get(g, p.norm2_w), b.get(g, p.norm2_b));
        let y = g.layer_norm_channels(x, nw, nb);
        let wi = b.get(g, p.ffn_in);
        let y = g.conv1x1(y, wi);
        let wd = b.get(g, p.ffn_dw);
        let y = g.dwconv3x3(y, wd);
        let x1 = g.slice_rows(y, 0, p.hidden);
        let x2 = g.slice_rows(y, p.hidden, p.hidden);
        let x1 = g.gelu(x1);
        let y = g.mul(x1, x2);
        let wo = b.get(g, p.ffn_out);
        let y = g.conv1x1(y, wo);
        g.add(x, y)
    }

    fn missing(stage: Stage, what: &str) -> Error {
        Error::Guidance {
            stage: stage.to_string(),
            message: format!("the bundle carries no {what}"),
        }
    }

    fn first_stage(&self, kind: GuidanceKind) -> Stage {
        Stage::ALL
            .into_iter()
            .find(|s| self.config.injection_plan.get(s) == Some(&kind))
            .expect("kind is in the plan")
    }

    #[allow(clippy::too_many_arguments)]
    fn prepare(
        &self,
        g: &mut Graph,
        b: &mut Binder,
        layout: &Layout,
        guidance: &GuidanceBundle,
        fs: Var,
        pad: &CropGeometry,
        (h, w): (usize, usize),
    ) -> Result<Prepared> {
        let dims = &self.config.embed_dims;
        let fq = match &layout.quality {
            None => None,
            Some(QualitySource::Learned(id)) => Some(b.get(g, *id)),
            Some(QualitySource::Adapter { weight, bias }) => {
                let q = guidance
                    .quality
                    .as_ref()
                    .ok_or_else(|| Self::missing(self.first_stage(GuidanceKind::Qgm), "quality embedding"))?;
                if q.dim() != dims.quality {
                    return Err(Error::Shape(format!(
                        "quality embedding has {} entries, the adapter expects {}",
                        q.dim(),
                        dims.quality
                    )));
                }
                let qv = g.constant(Tensor::vector(q.q.clone()));
                let (wv, bv) = (b.get(g, *weight), b.get(g, *bias));
                let y = linear(g, wv, qv);
                Some(g.add(y, bv))
            }
        };
        let sem = match &layout.semantic {
            None => None,
            Some(SemanticSource::Learned(id)) => {
                let t = b.get(g, *id);
                Some((t, Rc::new(Vec::new()), SEMANTIC_TOKENS))
            }
            Some(SemanticSource::Masks) => {
                let ms = guidance
                    .masks
                    .as_ref()
                    .ok_or_else(|| Self::missing(self.first_stage(GuidanceKind::Sca), "semantic masks"))?;
                if ms.height() != h || ms.width() != w {
                    return Err(Error::Shape(format!(
                        "masks are {}x{}, image is {h}x{w}",
                        ms.height(),
                        ms.width()
                    )));
                }
                let (labels, n) = ms.labels();
                let padded: Vec<usize> = pad.source_indices(h, w).into_iter().map(|i| labels[i]).collect();
                let padded = Rc::new(padded);
                let means = map_means_on_graph(g, fs, padded.clone(), n);
                Some((means, padded, n))
            }
        };
        let (fc, fp) = match &layout.task {
            None => (None, None),
            Some(TaskSource::Learned { content, prompt }) => (Some(b.get(g, *content)), Some(b.get(g, *prompt))),
            Some(TaskSource::Embeddings { bank, prompt }) => {
                let e = guidance
                    .clip
                    .as_ref()
                    .ok_or_else(|| Self::missing(self.first_stage(GuidanceKind::Dam), "content/degradation embeddings"))?;
                let fc = g.constant(Tensor::vector(e.content.clone()));
                let fd = g.constant(Tensor::vector(e.degradation.clone()));
                let bank = b.get(g, *bank);
                let pv = prompt.map_named("", &mut |_, id| b.get(g, *id));
                let (fp, _) = degradation_prompt_on_graph(g, fd, bank, &pv);
                (Some(fc), Some(fp))
            }
        };
        Ok(Prepared { fq, sem, fc, fp })
    }

    fn guide(&self, g: &mut Graph, b: &mut Binder, layout: &Layout, prep: &Prepared, stage: Stage, x: Var) -> Result<Var> {
        let Some(guide) = layout.guides.get(&stage) else {
            return Ok(x);
        };
        let heads = stage_heads(&self.config, stage);
        Ok(match guide {
            StageGuide::Qgm(p) => {
                let pv = p.map_named("", &mut |_, id| b.get(g, *id));
                qgm_on_graph(g, x, prep.fq.expect("prepared"), &pv)
            }
            StageGuide::Sca(p) => {
                let pv = p.map_named("", &mut |_, id| b.get(g, *id));
                let (tokens, labels, n) = prep.sem.clone().expect("prepared");
                let log_counts = if labels.is_empty() {
                    vec![0.0; n]
                } else {
                    let s = g.shape(x).to_vec();
                    let full_w = s[2] << stage.level();
                    let full_h = s[1] << stage.level();
                    let lab = downsample_labels(&labels, full_h, full_w, 1 << stage.level(), n);
                    let mut counts = vec![0usize; n];
                    for l in lab {
                        counts[l] += 1;
                    }
                    counts
                        .into_iter()
                        .map(|c| if c == 0 { f64::NEG_INFINITY } else { (c as f64).ln() })
                        .collect()
                };
                let y = sca_segments_on_graph(g, x, tokens, &log_counts, &pv, heads);
                g.add(x, y)
            }
            StageGuide::Dam(p) => {
                let pv = p.map_named("", &mut |_, id| b.get(g, *id));
                let y = dam_on_graph(g, x, prep.fc.expect("prepared"), prep.fp.expect("prepared"), &pv, heads);
                g.add(x, y)
            }
        })
    }
}

/// Names of the learnable stand-ins for disabled components, for reporting.
pub fn replacement_parameters(model: &Model) -> Vec<String> {
    model
        .params()
        .iter()
        .filter(|(_, n, _)| n.ends_with(".learned") || *n == "semantic.tokens")
        .map(|(_, n, _)| n.to_string())
        .collect()
}
