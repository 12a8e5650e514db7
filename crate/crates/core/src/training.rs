//! Optimization loop: crop sampling, AdamW, checkpoints and resumable training.
//!
//! Every random decision in an iteration is drawn from seeds derived from the
//! state's `rng_state` word and the iteration index, so a run resumed from a
//! checkpoint replays exactly the same batches, dropout patterns and
//! augmentations as an uninterrupted one.
//!
//! # Checkpoint layout
//!
//! All integers are little-endian.
//!
//! | bytes | content |
//! |-------|---------|
//! | 8 | magic `GRCKPT\0\0` |
//! | 4 | format version (`u32`, currently 1) |
//! | 8 | payload length `n` (`u64`) |
//! | n | payload |
//! | 4 | CRC-32 of the payload |
//!
//! The payload holds the flat configuration text, the iteration, the rng word,
//! the optimizer step count, then for each parameter its name, shape, values
//! and both AdamW moments. Strings are a `u64` length plus UTF-8 bytes; arrays
//! are raw `f64` values.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::backbone::{build_model, Binder, Model};
use crate::config::{ModelConfig, OptimizerConfig};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::guidance::{GuidanceAssembler, GuidanceBundle, Mode, Providers};
use crate::icrm::{scheduled_gamma, total_loss_on_graph, LossBreakdown};
use crate::image::{CropGeometry, ImageTensor};
use crate::manifest::Manifest;
use crate::params::{ParamGrads, ParamStore};
use crate::tensor::Tensor;

const MAGIC: &[u8; 8] = b"GRCKPT\0\0";
const VERSION: u32 = 1;

/// SplitMix64 finalizer over `base + stream`, used to derive independent seeds.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Degraded/clean pairs held in memory with their ids and tags.
#[derive(Debug, Clone)]
pub struct PairSet {
    ids: Vec<String>,
    tags: Vec<String>,
    pairs: Vec<(ImageTensor, ImageTensor)>,
}

impl PairSet {
    pub fn load(manifest: &Manifest) -> Result<Self> {
        let mut set = PairSet {
            ids: Vec::new(),
            tags: Vec::new(),
            pairs: Vec::new(),
        };
        for i in 0..manifest.len() {
            let (d, c) = manifest.load_pair(i)?;
            set.ids.push(manifest.id(i));
            set.tags.push(manifest.rows[i].tag.clone());
            set.pairs.push((d, c));
        }
        Ok(set)
    }

    /// `(id, tag, degraded, clean)` tuples; both images of a pair must share a shape.
    pub fn from_pairs(rows: Vec<(String, String, ImageTensor, ImageTensor)>) -> Result<Self> {
        let mut set = PairSet {
            ids: Vec::new(),
            tags: Vec::new(),
            pairs: Vec::new(),
        };
        for (id, tag, d, c) in rows {
            if d.shape() != c.shape() {
                return Err(Error::Dataset(format!("pair `{id}` has mismatched shapes")));
            }
            set.ids.push(id);
            set.tags.push(tag);
            set.pairs.push((d, c));
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn tag(&self, i: usize) -> &str {
        &self.tags[i]
    }

    pub fn degraded(&self, i: usize) -> &ImageTensor {
        &self.pairs[i].0
    }

    pub fn clean(&self, i: usize) -> &ImageTensor {
        &self.pairs[i].1
    }
}

/// One training crop and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub row: usize,
    pub geometry: CropGeometry,
    pub degraded: ImageTensor,
    pub clean: ImageTensor,
}

/// Draws `batch` random crops with random flips. Sources smaller than `crop`
/// are reflect-padded; the degraded and clean images share one geometry.
pub fn sample_batch(set: &PairSet, crop: usize, batch: usize, seed: u64) -> Result<Vec<Sample>> {
    if set.is_empty() {
        return Err(Error::Dataset("cannot sample from an empty dataset".into()));
    }
    if crop == 0 {
        return Err(Error::Parameter("crop size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(batch);
    for _ in 0..batch {
        let row = rng.random_range(0..set.len());
        let (d, c) = &set.pairs[row];
        let ph = d.height().max(crop);
        let pw = d.width().max(crop);
        let geometry = CropGeometry {
            top: rng.random_range(0..=ph - crop),
            left: rng.random_range(0..=pw - crop),
            height: crop,
            width: crop,
            hflip: rng.random(),
            vflip: rng.random(),
        };
        out.push(Sample {
            row,
            geometry,
            degraded: geometry.apply(d),
            clean: geometry.apply(c),
        });
    }
    Ok(out)
}

/// AdamW moments with decoupled weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub step: u64,
}

impl AdamW {
    pub fn new(params: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|(_, _, t)| Tensor::zeros(t.shape())).collect();
        AdamW {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    /// One bias-corrected update at learning rate `lr`.
    pub fn update(&mut self, params: &mut ParamStore, grads: &ParamGrads, cfg: &OptimizerConfig, lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let ids: Vec<_> = params.ids().collect();
        for id in ids {
            let g = grads.get(id).data();
            let m = self.m[id.0].data_mut();
            let v = self.v[id.0].data_mut();
            let w = params.get_mut(id).data_mut();
            for i in 0..w.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                w[i] -= lr * cfg.weight_decay * w[i];
                w[i] -= lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + cfg.eps);
            }
        }
    }
}

/// Learning rate at `iteration`: constant, or cosine-decayed to zero when enabled.
pub fn learning_rate(cfg: &OptimizerConfig, iteration: u64) -> f64 {
    if !cfg.cosine_decay || cfg.total_iterations == 0 {
        return cfg.learning_rate;
    }
    let p = iteration.min(cfg.total_iterations) as f64 / cfg.total_iterations as f64;
    cfg.learning_rate * 0.5 * (1.0 + (std::f64::consts::PI * p).cos())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub model: Model,
    pub optimizer: AdamW,
    pub iteration: u64,
    /// Base word from which every per-iteration seed is derived.
    pub rng_state: u64,
}

impl TrainState {
    pub fn new(config: &ModelConfig) -> Result<Self> {
        let model = build_model(config)?;
        let optimizer = AdamW::new(model.params());
        Ok(TrainState {
            model,
            optimizer,
            iteration: 0,
            rng_state: config.seed,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        self.model.config()
    }

    fn iteration_seed(&self) -> u64 {
        derive_seed(self.rng_state, self.iteration)
    }
}

/// Provider outputs per dataset row, queried once and then adapted to each crop.
pub struct GuidanceCache<'a> {
    providers: &'a Providers,
    config: ModelConfig,
    sources: Vec<Option<GuidanceBundle>>,
}

impl<'a> GuidanceCache<'a> {
    pub fn new(providers: &'a Providers, config: &ModelConfig, rows: usize) -> Self {
        GuidanceCache {
            providers,
            config: config.clone(),
            sources: vec![None; rows],
        }
    }

    pub fn for_sample(&mut self, set: &PairSet, sample: &Sample, mode: Mode, seed: u64) -> Result<GuidanceBundle> {
        let assembler = GuidanceAssembler::new(self.providers, &self.config);
        if self.sources[sample.row].is_none() {
            self.sources[sample.row] = Some(assembler.source(set.id(sample.row), set.degraded(sample.row))?);
        }
        let source = self.sources[sample.row].as_ref().expect("filled above");
        assembler.for_crop(source, &sample.geometry, mode, seed)
    }
}

/// One optimizer step on `batch`. Gradients of the per-sample graphs are summed
/// in batch order and averaged; the reported losses are batch means.
pub fn train_step(
    state: &mut TrainState,
    set: &PairSet,
    batch: &[Sample],
    guidance: &mut GuidanceCache,
) -> Result<LossBreakdown> {
    if batch.is_empty() {
        return Err(Error::Training {
            iteration: state.iteration,
            message: "empty batch".into(),
        });
    }
    let cfg = state.config().clone();
    let alpha = if cfg.components.icrm { cfg.loss_alpha } else { 0.0 };
    let gamma = scheduled_gamma(
        cfg.loss_gamma,
        cfg.gamma_schedule,
        state.iteration,
        cfg.optimizer.total_iterations,
    );
    let seed = state.iteration_seed();
    let mut grads = ParamGrads::zeros_like(state.model.params());
    let (mut l1, mut internal) = (0.0, 0.0);
    for (i, sample) in batch.iter().enumerate() {
        let bundle = guidance.for_sample(set, sample, Mode::Train, derive_seed(seed, 1 + 2 * i as u64))?;
        let mut g = Graph::new();
        let mut binder = Binder::new(state.model.params(), true);
        let out = state.model.forward_on_graph(&mut g, &mut binder, &sample.degraded, &bundle)?;
        let target = g.constant(sample.clean.tensor().clone());
        let nodes = total_loss_on_graph(
            &mut g,
            out,
            target,
            alpha,
            gamma,
            &cfg.augmentation,
            derive_seed(seed, 2 + 2 * i as u64),
        );
        let total = g.scalar_value(nodes.total);
        if !total.is_finite() {
            return Err(Error::Training {
                iteration: state.iteration,
                message: format!("non-finite loss {total}"),
            });
        }
        l1 += g.scalar_value(nodes.l1);
        internal += g.scalar_value(nodes.internal);
        let back = g.backward(nodes.total, 1.0);
        g.collect_param_grads(&back, &mut grads);
    }
    let n = batch.len() as f64;
    grads.scale(1.0 / n);
    if !grads.all_finite() {
        return Err(Error::Training {
            iteration: state.iteration,
            message: "non-finite gradient".into(),
        });
    }
    if cfg.optimizer.grad_clip > 0.0 {
        let norm = grads.global_norm();
        if norm > cfg.optimizer.grad_clip {
            grads.scale(cfg.optimizer.grad_clip / norm);
        }
    }
    let lr = learning_rate(&cfg.optimizer, state.iteration);
    state.optimizer.update(state.model.params_mut(), &grads, &cfg.optimizer, lr);
    state.iteration += 1;
    Ok(LossBreakdown::new(l1 / n, internal / n, alpha))
}

/// Samples the batch for the state's current iteration.
pub fn next_batch(state: &TrainState, set: &PairSet) -> Result<Vec<Sample>> {
    let cfg = state.config();
    sample_batch(
        set,
        cfg.crop_size,
        cfg.optimizer.batch_size,
        derive_seed(state.iteration_seed(), 0),
    )
}

#[derive(Debug, Clone, Default)]
pub struct LoopOptions {
    /// Continue from this checkpoint instead of a fresh model.
    pub resume: Option<PathBuf>,
    /// Stop (with a checkpoint) once this iteration is reached.
    pub stop_at: Option<u64>,
    /// Print one progress line per checkpoint to stderr.
    pub progress: bool,
}

pub const LOSS_CURVE_FILE: &str = "loss_curve.ndjson";

pub fn checkpoint_path(dir: &Path, iteration: u64) -> PathBuf {
    dir.join(format!("ckpt_{iteration:08}.bin"))
}

/// Trains until `optimizer.total_iterations`, writing a checkpoint every
/// `checkpoint_every` iterations and at the end, plus one loss record per
/// iteration. Returns the last checkpoint written.
pub fn train_loop(
    config: &ModelConfig,
    set: &PairSet,
    providers: &Providers,
    out_dir: &Path,
    opts: &LoopOptions,
) -> Result<PathBuf> {
    config.validate()?;
    if set.is_empty() {
        return Err(Error::Dataset("training manifest is empty".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut state = match &opts.resume {
        Some(p) => load_checkpoint_for(p, config)?,
        None => TrainState::new(config)?,
    };
    let curve_path = out_dir.join(LOSS_CURVE_FILE);
    let mut curve = OpenOptions::new()
        .create(true)
        .write(true)
        .append(opts.resume.is_some())
        .truncate(opts.resume.is_none())
        .open(&curve_path)
        .map_err(|e| Error::io(&curve_path, e))?;
    let total = config.optimizer.total_iterations;
    let stop = opts.stop_at.map_or(total, |s| s.min(total));
    let mut cache = GuidanceCache::new(providers, config, set.len());
    let mut last = None;
    let started = std::time::Instant::now();
    while state.iteration < stop {
        let batch = next_batch(&state, set)?;
        let it = state.iteration;
        let loss = train_step(&mut state, set, &batch, &mut cache)?;
        writeln!(
            curve,
            "{{\"iteration\":{it},\"l1\":{},\"internal\":{},\"total\":{}}}",
            loss.l1, loss.internal, loss.total
        )
        .map_err(|e| Error::io(&curve_path, e))?;
        if config.checkpoint_every > 0 && state.iteration % config.checkpoint_every == 0 {
            let p = checkpoint_path(out_dir, state.iteration);
            save_checkpoint(&state, &p)?;
            if opts.progress {
                eprintln!(
                    "iteration {} loss {:.5} ({:.1}s)",
                    state.iteration,
                    loss.total,
                    started.elapsed().as_secs_f64()
                );
            }
            last = Some((state.iteration, p));
        }
    }
    curve.flush().map_err(|e| Error::io(&curve_path, e))?;
    match last {
        Some((it, p)) if it == state.iteration => Ok(p),
        _ => {
            let p = checkpoint_path(out_dir, state.iteration);
            save_checkpoint(&state, &p)?;
            Ok(p)
        }
    }
}

/// Runs all configured iterations in memory without writing checkpoints.
/// Returns the final state and the per-iteration losses.
pub fn train_in_memory(
    config: &ModelConfig,
    set: &PairSet,
    providers: &Providers,
) -> Result<(TrainState, Vec<LossBreakdown>)> {
    if set.is_empty() {
        return Err(Error::Dataset("training set is empty".into()));
    }
    let mut state = TrainState::new(config)?;
    let mut cache = GuidanceCache::new(providers, config, set.len());
    let mut curve = Vec::with_capacity(config.optimizer.total_iterations as usize);
    while state.iteration < config.optimizer.total_iterations {
        let batch = next_batch(&state, set)?;
        curve.push(train_step(&mut state, set, &batch, &mut cache)?);
    }
    Ok((state, curve))
}

struct Writer(Vec<u8>);

impl Writer {
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.0.extend_from_slice(s.as_bytes());
    }

    fn f64s(&mut self, d: &[f64]) {
        for v in d {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Integrity("payload ends early".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize> {
        let n = self.u64()?;
        usize::try_from(n)
            .ok()
            .filter(|&n| n <= self.buf.len())
            .ok_or_else(|| Error::Integrity(format!("implausible length {n}")))
    }

    fn str(&mut self) -> Result<String> {
        let n = self.len()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Integrity("invalid UTF-8 string".into()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Integrity("array too large".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn checkpoint_bytes(state: &TrainState) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.str(&state.config().to_flat_string());
    w.u64(state.iteration);
    w.u64(state.rng_state);
    w.u64(state.optimizer.step);
    let params = state.model.params();
    w.u64(params.len() as u64);
    for (id, name, t) in params.iter() {
        w.str(name);
        w.u64(t.shape().len() as u64);
        for &d in t.shape() {
            w.u64(d as u64);
        }
        w.f64s(t.data());
        w.f64s(state.optimizer.m[id.0].data());
        w.f64s(state.optimizer.v[id.0].data());
    }
    let payload = w.0;
    let mut out = Vec::with_capacity(payload.len() + 24);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    out
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<TrainState> {
    if bytes.len() < 8 {
        return Err(Error::Integrity(format!("file is only {} bytes", bytes.len())));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    if bytes.len() < 20 {
        return Err(Error::Integrity("header is truncated".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version} (expected {VERSION})"
        )));
    }
    let n = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
    let expected = 20u64.checked_add(n).and_then(|v| v.checked_add(4));
    if expected != Some(bytes.len() as u64) {
        return Err(Error::Integrity(format!(
            "file has {} bytes but header announces a {n}-byte payload",
            bytes.len()
        )));
    }
    let payload = &bytes[20..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().expect("4 bytes"));
    if crc32fast::hash(payload) != stored {
        return Err(Error::Integrity("checksum mismatch".into()));
    }
    let mut r = Reader { buf: payload, pos: 0 };
    let config = ModelConfig::from_toml_str(&r.str()?)
        .map_err(|e| Error::Checkpoint(format!("stored configuration is invalid: {e}")))?;
    let iteration = r.u64()?;
    let rng_state = r.u64()?;
    let step = r.u64()?;
    let mut state = TrainState::new(&config)?;
    let count = r.len()?;
    if count != state.model.params().len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {count} parameters, configuration builds {}",
            state.model.params().len()
        )));
    }
    for _ in 0..count {
        let name = r.str()?;
        let rank = r.len()?;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.len()?);
        }
        let id = state
            .model
            .params()
            .id(&name)
            .ok_or_else(|| Error::Checkpoint(format!("unknown parameter `{name}`")))?;
        if state.model.params().get(id).shape() != shape.as_slice() {
            return Err(Error::Checkpoint(format!("parameter `{name}` has shape {shape:?}")));
        }
        let len = shape.iter().product();
        *state.model.params_mut().get_mut(id) = Tensor::from_parts(shape.clone(), r.f64s(len)?);
        state.optimizer.m[id.0] = Tensor::from_parts(shape.clone(), r.f64s(len)?);
        state.optimizer.v[id.0] = Tensor::from_parts(shape, r.f64s(len)?);
    }
    if r.pos != payload.len() {
        return Err(Error::Integrity("trailing bytes after the last parameter".into()));
    }
    if iteration > config.optimizer.total_iterations {
        return Err(Error::Checkpoint(format!(
            "iteration {iteration} exceeds total_iterations {}",
            config.optimizer.total_iterations
        )));
    }
    state.iteration = iteration;
    state.rng_state = rng_state;
    state.optimizer.step = step;
    Ok(state)
}

pub fn save_checkpoint(state: &TrainState, path: &Path) -> Result<()> {
    fs::write(path, checkpoint_bytes(state)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<TrainState> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_bytes(&bytes)
}

/// Configuration keys that change the parameter set or its meaning.
const ARCHITECTURE_KEYS: &[&str] = &[
    "level_depths",
    "level_heads",
    "level_channels",
    "ffn_expansion",
    "perception_order",
    "injection_plan",
    "prompt_count",
    "embed_dims",
    "components",
    "guidance.content_attention",
    "guidance.mask_base_resolution",
];

fn flat_entries(cfg: &ModelConfig) -> Vec<(String, String)> {
    cfg.to_flat_string()
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// First architecture key on which the two configurations differ.
pub fn architecture_mismatch(stored: &ModelConfig, wanted: &ModelConfig) -> Option<String> {
    let a = flat_entries(stored);
    let b = flat_entries(wanted);
    let relevant = |k: &str| {
        ARCHITECTURE_KEYS
            .iter()
            .any(|p| k == *p || k.strip_prefix(p).is_some_and(|r| r.starts_with('.')))
    };
    let lookup = |list: &[(String, String)], k: &str| list.iter().find(|(key, _)| key == k).map(|(_, v)| v.clone());
    let mut keys: Vec<&String> = a.iter().chain(&b).map(|(k, _)| k).filter(|k| relevant(k)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .find(|k| lookup(&a, k) != lookup(&b, k))
        .cloned()
}

/// Loads a checkpoint and rebinds it to `config`, which must describe the same
/// architecture; the loaded state then runs under `config`'s training settings.
pub fn load_checkpoint_for(path: &Path, config: &ModelConfig) -> Result<TrainState> {
    let stored = load_checkpoint(path)?;
    if let Some(key) = architecture_mismatch(stored.config(), config) {
        return Err(Error::Checkpoint(format!(
            "checkpoint is incompatible with the configuration: field `{key}` differs"
        )));
    }
    if stored.iteration > config.optimizer.total_iterations {
        return Err(Error::Checkpoint(format!(
            "checkpoint iteration {} exceeds optimizer.total_iterations {}",
            stored.iteration, config.optimizer.total_iterations
        )));
    }
    let mut state = TrainState::new(config)?;
    for (id, name, t) in stored.model.params().iter() {
        let target = state.model.params().id(name).expect("same architecture");
        *state.model.params_mut().get_mut(target) = t.clone();
        state.optimizer.m[target.0] = stored.optimizer.m[id.0].clone();
        state.optimizer.v[target.0] = stored.optimizer.v[id.0].clone();
    }
    state.iteration = stored.iteration;
    state.rng_state = stored.rng_state;
    state.optimizer.step = stored.optimizer.step;
    Ok(state)
}
