//! Model and training configuration.
//!
//! Configurations are TOML documents restricted to flat `a.b.c = value` keys.
//! Every field is optional; missing fields take the full-scale defaults of
//! [`ModelConfig::default`]. [`ModelConfig::to_flat_string`] writes the same
//! flat form back out.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::icrm::{AugmentationPolicy, GammaSchedule};

/// Depth positions where a guidance block can be attached, in forward order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Enc1,
    Enc2,
    Enc3,
    Latent,
    Dec3,
    Dec2,
    Dec1,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Enc1,
        Stage::Enc2,
        Stage::Enc3,
        Stage::Latent,
        Stage::Dec3,
        Stage::Dec2,
        Stage::Dec1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Enc1 => "enc1",
            Stage::Enc2 => "enc2",
            Stage::Enc3 => "enc3",
            Stage::Latent => "latent",
            Stage::Dec3 => "dec3",
            Stage::Dec2 => "dec2",
            Stage::Dec1 => "dec1",
        }
    }

    /// Zero-based level index (0 = full resolution).
    pub fn level(self) -> usize {
        match self {
            Stage::Enc1 | Stage::Dec1 => 0,
            Stage::Enc2 | Stage::Dec2 => 1,
            Stage::Enc3 | Stage::Dec3 => 2,
            Stage::Latent => 3,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuidanceKind {
    Qgm,
    Sca,
    Dam,
    None,
}

/// One of the three perception families: overall quality, region, degradation type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perception {
    How,
    Where,
    What,
}

impl Perception {
    pub fn kind(self) -> GuidanceKind {
        match self {
            Perception::How => GuidanceKind::Qgm,
            Perception::Where => GuidanceKind::Sca,
            Perception::What => GuidanceKind::Dam,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Perception::How => "How",
            Perception::Where => "Where",
            Perception::What => "What",
        }
    }
}

/// Ordering of the three perception families along network depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Perception>", into = "Vec<Perception>")]
pub struct PipelineOrder([Perception; 3]);

impl PipelineOrder {
    pub const HOW_WHERE_WHAT: PipelineOrder =
        PipelineOrder([Perception::How, Perception::Where, Perception::What]);
    pub const WHERE_WHAT_HOW: PipelineOrder =
        PipelineOrder([Perception::Where, Perception::What, Perception::How]);
    pub const WHAT_HOW_WHERE: PipelineOrder =
        PipelineOrder([Perception::What, Perception::How, Perception::Where]);

    pub fn new(order: [Perception; 3]) -> Result<Self> {
        let distinct = order[0] != order[1] && order[1] != order[2] && order[0] != order[2];
        if !distinct {
            return Err(Error::Validation(format!(
                "perception order must be a permutation of how/where/what, got {order:?}"
            )));
        }
        Ok(PipelineOrder(order))
    }

    pub fn stages(&self) -> [Perception; 3] {
        self.0
    }

    pub fn label(&self) -> String {
        self.0.iter().map(|p| p.label()).collect::<Vec<_>>().join("-")
    }

    /// Depth groups the families are bound to, earliest first.
    pub const SLOT_GROUPS: [&'static [Stage]; 3] = [&[Stage::Enc1], &[Stage::Latent], &[Stage::Dec3, Stage::Dec2]];

    /// Injection plan that places `order[k]` on slot group `k`.
    pub fn injection_plan(&self) -> BTreeMap<Stage, GuidanceKind> {
        let mut plan: BTreeMap<Stage, GuidanceKind> = Stage::ALL.iter().map(|&s| (s, GuidanceKind::None)).collect();
        for (group, fam) in Self::SLOT_GROUPS.iter().zip(self.0) {
            for &stage in group.iter() {
                plan.insert(stage, fam.kind());
            }
        }
        plan
    }
}

impl TryFrom<Vec<Perception>> for PipelineOrder {
    type Error = String;

    fn try_from(v: Vec<Perception>) -> std::result::Result<Self, String> {
        let arr: [Perception; 3] = v
            .try_into()
            .map_err(|v: Vec<Perception>| format!("expected 3 perception stages, got {}", v.len()))?;
        PipelineOrder::new(arr).map_err(|e| e.to_string())
    }
}

impl From<PipelineOrder> for Vec<Perception> {
    fn from(o: PipelineOrder) -> Self {
        o.0.to_vec()
    }
}

impl fmt::Display for PipelineOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub total_iterations: u64,
    pub cosine_decay: bool,
    /// Global-norm clip threshold; `0` disables clipping.
    pub grad_clip: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            learning_rate: 2e-4,
            weight_decay: 1e-4,
            batch_size: 4,
            total_iterations: 300_000,
            cosine_decay: false,
            grad_clip: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedDims {
    pub quality: usize,
    pub clip: usize,
    pub prompt: usize,
    /// Output width of the quality adapter.
    pub adapter: usize,
}

impl Default for EmbedDims {
    fn default() -> Self {
        EmbedDims {
            quality: 256,
            clip: 512,
            prompt: 64,
            adapter: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    #[default]
    Grid,
    Quantile,
}

/// Which side of the content cross-attention the content embedding supplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ContentAttention {
    #[default]
    KeyValue,
    Query,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuidanceConfig {
    pub quality_prompt: String,
    pub mask_mode: MaskMode,
    pub mask_cells: usize,
    pub mask_dropout_rate: f64,
    /// Side length of the degradation-mask logit grid before resizing.
    pub mask_base_resolution: usize,
    pub content_attention: ContentAttention,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        GuidanceConfig {
            quality_prompt: "Rate the overall quality of this image.".into(),
            mask_mode: MaskMode::Grid,
            mask_cells: 4,
            mask_dropout_rate: 0.3,
            mask_base_resolution: 8,
            content_attention: ContentAttention::KeyValue,
        }
    }
}

/// Which guidance signals come from providers. A disabled signal is replaced
/// by a learnable free parameter of matching shape; a disabled consistency
/// term drops it from the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Components {
    pub iqa: bool,
    pub sgu: bool,
    pub ti: bool,
    pub icrm: bool,
}

impl Default for Components {
    fn default() -> Self {
        Components {
            iqa: true,
            sgu: true,
            ti: true,
            icrm: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub level_depths: Vec<usize>,
    pub level_heads: Vec<usize>,
    pub level_channels: Vec<usize>,
    pub ffn_expansion: f64,
    pub perception_order: PipelineOrder,
    pub injection_plan: BTreeMap<Stage, GuidanceKind>,
    pub loss_alpha: f64,
    pub loss_gamma: f64,
    pub gamma_schedule: GammaSchedule,
    pub optimizer: OptimizerConfig,
    pub crop_size: usize,
    pub prompt_count: usize,
    pub embed_dims: EmbedDims,
    pub guidance: GuidanceConfig,
    pub components: Components,
    pub augmentation: AugmentationPolicy,
    /// Recorded for reference; not consumed by the objective.
    pub experimental_lambda1: f64,
    pub experimental_lambda2: f64,
    pub seed: u64,
    pub checkpoint_every: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            level_depths: vec![3, 5, 6, 8],
            level_heads: vec![1, 2, 4, 8],
            level_channels: vec![48, 96, 192, 384],
            ffn_expansion: 2.66,
            perception_order: PipelineOrder::HOW_WHERE_WHAT,
            injection_plan: PipelineOrder::HOW_WHERE_WHAT.injection_plan(),
            loss_alpha: 0.25,
            loss_gamma: 0.05,
            gamma_schedule: GammaSchedule::Constant,
            optimizer: OptimizerConfig::default(),
            crop_size: 256,
            prompt_count: 5,
            embed_dims: EmbedDims::default(),
            guidance: GuidanceConfig::default(),
            components: Components::default(),
            augmentation: AugmentationPolicy::default(),
            experimental_lambda1: 0.1,
            experimental_lambda2: 0.05,
            seed: 0,
            checkpoint_every: 500,
        }
    }
}

/// The full-scale preset.
pub fn full_scale_preset() -> ModelConfig {
    ModelConfig::default()
}

/// A configuration small enough to train on one CPU core in minutes.
pub fn desk_scale_preset() -> ModelConfig {
    ModelConfig {
        level_depths: vec![1, 1, 1, 1],
        level_heads: vec![1, 1, 2, 2],
        level_channels: vec![8, 16, 16, 32],
        crop_size: 64,
        optimizer: OptimizerConfig {
            batch_size: 2,
            total_iterations: 2000,
            ..OptimizerConfig::default()
        },
        checkpoint_every: 500,
        ..ModelConfig::default()
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let lists = [
            ("level_depths", &self.level_depths),
            ("level_heads", &self.level_heads),
            ("level_channels", &self.level_channels),
        ];
        for (key, list) in lists {
            if list.len() != 4 {
                return Err(Error::Validation(format!("{key} must have exactly 4 entries, got {}", list.len())));
            }
            if list.contains(&0) {
                return Err(Error::Validation(format!("{key} entries must be positive")));
            }
        }
        let ch = &self.level_channels;
        if ch.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Validation("level_channels must be non-decreasing".into()));
        }
        for l in 0..4 {
            if !ch[l].is_multiple_of(self.level_heads[l]) {
                return Err(Error::Validation(format!(
                    "level {} channels {} not divisible by heads {}",
                    l + 1,
                    ch[l],
                    self.level_heads[l]
                )));
            }
        }
        for l in 1..4 {
            if !ch[l].is_multiple_of(4) {
                return Err(Error::Validation(format!(
                    "level {} channels {} must be divisible by 4 for pixel-unshuffle downsampling",
                    l + 1,
                    ch[l]
                )));
            }
        }
        if !(self.ffn_expansion > 0.0) || ((ch[0] as f64 * self.ffn_expansion) as usize) == 0 {
            return Err(Error::Validation("ffn_expansion must give a positive hidden width".into()));
        }
        PipelineOrder::new(self.perception_order.stages())?;
        for stage in Stage::ALL {
            if !self.injection_plan.contains_key(&stage) {
                return Err(Error::Validation(format!("injection_plan is missing stage `{stage}`")));
            }
        }
        let check_nonneg = |key: &str, v: f64| {
            if v < 0.0 || !v.is_finite() {
                Err(Error::Validation(format!("{key} must be a finite value >= 0, got {v}")))
            } else {
                Ok(())
            }
        };
        check_nonneg("loss_alpha", self.loss_alpha)?;
        check_nonneg("loss_gamma", self.loss_gamma)?;
        check_nonneg("optimizer.learning_rate", self.optimizer.learning_rate)?;
        check_nonneg("optimizer.weight_decay", self.optimizer.weight_decay)?;
        check_nonneg("optimizer.grad_clip", self.optimizer.grad_clip)?;
        for (key, b) in [("optimizer.beta1", self.optimizer.beta1), ("optimizer.beta2", self.optimizer.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Validation(format!("{key} must be in [0, 1), got {b}")));
            }
        }
        if !(self.optimizer.eps > 0.0) {
            return Err(Error::Validation("optimizer.eps must be positive".into()));
        }
        if self.optimizer.batch_size == 0 {
            return Err(Error::Validation("optimizer.batch_size must be positive".into()));
        }
        if self.crop_size == 0 {
            return Err(Error::Validation("crop_size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.guidance.mask_dropout_rate) {
            return Err(Error::Validation("guidance.mask_dropout_rate must be in [0, 1]".into()));
        }
        if self.guidance.mask_cells == 0 || self.guidance.mask_base_resolution == 0 {
            return Err(Error::Validation("guidance.mask_cells and mask_base_resolution must be positive".into()));
        }
        if self.guidance.quality_prompt.trim().is_empty() {
            return Err(Error::Validation("guidance.quality_prompt must be non-empty".into()));
        }
        if self.prompt_count == 0 {
            return Err(Error::Validation("prompt_count must be positive".into()));
        }
        let d = &self.embed_dims;
        if d.clip != 512 {
            return Err(Error::Validation(format!("embed_dims.clip must be 512, got {}", d.clip)));
        }
        if d.quality == 0 || d.prompt == 0 || d.adapter == 0 {
            return Err(Error::Validation("embed_dims entries must be positive".into()));
        }
        let c = &self.components;
        if !(c.iqa || c.sgu || c.ti || c.icrm) {
            return Err(Error::config(
                "components",
                "at least one component must stay enabled; the all-off variant is not part of the ablation grid",
            ));
        }
        self.augmentation.validate()?;
        Ok(())
    }

    /// Rebinds the injection plan to the given perception order.
    pub fn with_perception_order(mut self, order: PipelineOrder) -> Self {
        self.perception_order = order;
        self.injection_plan = order.injection_plan();
        self
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
        let plan_given = table.contains_key("injection_plan");
        let mut cfg: ModelConfig = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
        if !plan_given {
            cfg.injection_plan = cfg.perception_order.injection_plan();
        } else {
            for stage in Stage::ALL {
                cfg.injection_plan.entry(stage).or_insert(GuidanceKind::None);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Flat `dotted.key = value` rendering that [`load_config`] parses back.
    pub fn to_flat_string(&self) -> String {
        let value = toml::Value::try_from(self).expect("config is serializable");
        let mut lines = Vec::new();
        flatten("", &value, &mut lines);
        lines.join("\n") + "\n"
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_flat_string()).map_err(|e| Error::io(path, e))
    }
}

fn flatten(prefix: &str, v: &toml::Value, out: &mut Vec<String>) {
    match v {
        toml::Value::Table(t) => {
            for (k, child) in t {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, child, out);
            }
        }
        other => out.push(format!("{prefix} = {other}")),
    }
}

/// Maps a TOML error to a configuration error naming the key on the offending line.
fn toml_error(text: &str, e: &toml::de::Error) -> Error {
    let message = e.message().to_string();
    if let Some(field) = message
        .split('`')
        .nth(1)
        .filter(|_| message.starts_with("unknown field") || message.starts_with("missing field"))
    {
        return Error::config(field, message.clone());
    }
    let key = e
        .span()
        .and_then(|span| {
            let line_start = text[..span.start.min(text.len())].rfind('\n').map_or(0, |i| i + 1);
            let line = text[line_start..].lines().next()?;
            line.split('=').next().map(|k| k.trim().to_string())
        })
        .filter(|k| !k.is_empty())
        .unwrap_or_else(|| "<document>".to_string());
    Error::config(key, message)
}

/// Reads a configuration file. An unreadable file is a configuration error.
pub fn load_config(path: &Path) -> Result<ModelConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("<file>", format!("cannot read {}: {e}", path.display())))?;
    ModelConfig::from_toml_str(&text)
}
