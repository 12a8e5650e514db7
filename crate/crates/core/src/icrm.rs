//! Internal consistency between weakly and strongly augmented copies of the
//! restored image, and the total training objective built on it.
//!
//! The restored image `r` is perturbed photometrically into `w = weak(r)` and
//! then `s = strong(w)`. The consistency term is `gamma * mean((w - s)^2)` and
//! the objective is `mean|r - gt| + alpha * consistency`. Both augmentations are
//! built on the autodiff graph so the gradient reaches `r` through both
//! branches; the randomness of a step is fixed by its seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::image::ImageTensor;
use crate::tensor::Tensor;

/// A photometric (pixel-aligned) perturbation. Geometric ops are representable
/// only so that configurations naming them can be rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum AugmentOp {
    /// Add a uniform offset drawn from `[-max_delta, max_delta]`.
    Brightness { max_delta: f64 },
    /// Scale around the image mean by `1 + u`, `u ~ U[-max_delta, max_delta]`.
    Contrast { max_delta: f64 },
    /// Additive Gaussian noise with `sigma ~ U[0, max_sigma]` (0–1 scale).
    Noise { max_sigma: f64 },
    /// Reflect-padded Gaussian blur with `sigma ~ U[0, max_sigma]` on a `2*radius+1` tap kernel.
    Blur { radius: usize, max_sigma: f64 },
    /// Deterministic constant offset.
    Offset { value: f64 },
    HorizontalFlip,
    VerticalFlip,
    RandomCrop { size: usize },
}

impl AugmentOp {
    fn kind(&self) -> &'static str {
        match self {
            AugmentOp::Brightness { .. } => "brightness",
            AugmentOp::Contrast { .. } => "contrast",
            AugmentOp::Noise { .. } => "noise",
            AugmentOp::Blur { .. } => "blur",
            AugmentOp::Offset { .. } => "offset",
            AugmentOp::HorizontalFlip => "horizontal_flip",
            AugmentOp::VerticalFlip => "vertical_flip",
            AugmentOp::RandomCrop { .. } => "random_crop",
        }
    }

    fn is_photometric(&self) -> bool {
        !matches!(
            self,
            AugmentOp::HorizontalFlip | AugmentOp::VerticalFlip | AugmentOp::RandomCrop { .. }
        )
    }

    /// Whether `self`'s sampling range contains `other`'s.
    fn contains(&self, other: &AugmentOp) -> bool {
        use AugmentOp::*;
        match (self, other) {
            (Brightness { max_delta: a }, Brightness { max_delta: b }) => a >= b,
            (Contrast { max_delta: a }, Contrast { max_delta: b }) => a >= b,
            (Noise { max_sigma: a }, Noise { max_sigma: b }) => a >= b,
            (Blur { radius: ra, max_sigma: a }, Blur { radius: rb, max_sigma: b }) => ra >= rb && a >= b,
            (Offset { value: a }, Offset { value: b }) => a == b,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentationPolicy {
    pub weak: Vec<AugmentOp>,
    pub strong: Vec<AugmentOp>,
    /// Clamp to `[0, 1]` after every op. Disabled only for exact analytic checks.
    pub clamp: bool,
}

impl Default for AugmentationPolicy {
    fn default() -> Self {
        AugmentationPolicy {
            weak: vec![
                AugmentOp::Brightness { max_delta: 0.02 },
                AugmentOp::Noise { max_sigma: 2.0 / 255.0 },
            ],
            strong: vec![
                AugmentOp::Brightness { max_delta: 0.1 },
                AugmentOp::Contrast { max_delta: 0.1 },
                AugmentOp::Noise { max_sigma: 10.0 / 255.0 },
                AugmentOp::Blur {
                    radius: 1,
                    max_sigma: 1.0,
                },
            ],
            clamp: true,
        }
    }
}

impl AugmentationPolicy {
    pub fn empty() -> Self {
        AugmentationPolicy {
            weak: Vec::new(),
            strong: Vec::new(),
            clamp: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for op in self.weak.iter().chain(&self.strong) {
            if !op.is_photometric() {
                return Err(Error::Policy(format!(
                    "`{}` is not photometric; consistency needs pixel-aligned branches",
                    op.kind()
                )));
            }
            let bad = match op {
                AugmentOp::Brightness { max_delta } | AugmentOp::Contrast { max_delta } => *max_delta < 0.0,
                AugmentOp::Noise { max_sigma } => *max_sigma < 0.0,
                AugmentOp::Blur { max_sigma, .. } => *max_sigma < 0.0,
                _ => false,
            };
            if bad {
                return Err(Error::Policy(format!("`{}` has a negative range", op.kind())));
            }
        }
        for w in &self.weak {
            let covered = self
                .strong
                .iter()
                .any(|s| s.contains(w));
            if !covered {
                return Err(Error::Policy(format!(
                    "weak `{}` range is not contained in the strong policy",
                    w.kind()
                )));
            }
        }
        Ok(())
    }
}

const STRONG_STREAM: u64 = 0x5354_524f_4e47_0001;

fn gaussian_kernel(radius: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 1e-6 || radius == 0 {
        return vec![1.0];
    }
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    for v in &mut k {
        *v /= s;
    }
    k
}

/// Apply `ops` to `x` on the graph, drawing op parameters from `seed`.
fn augment_on_graph(g: &mut Graph, x: Var, ops: &[AugmentOp], clamp: bool, seed: u64) -> Var {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = g.shape(x).to_vec();
    let mut cur = x;
    for op in ops {
        cur = match *op {
            AugmentOp::Brightness { max_delta } => {
                let d = if max_delta > 0.0 {
                    rng.random_range(-max_delta..=max_delta)
                } else {
                    0.0
                };
                g.affine(cur, 1.0, d)
            }
            AugmentOp::Contrast { max_delta } => {
                let u = if max_delta > 0.0 {
                    rng.random_range(-max_delta..=max_delta)
                } else {
                    0.0
                };
                let c = 1.0 + u;
                // c * x + (1 - c) * mean(x)
                let m = g.mean(cur);
                let ones = g.constant(Tensor::full(&shape, 1.0));
                let mb = g.mul_scalar(ones, m);
                let mb = g.affine(mb, 1.0 - c, 0.0);
                let xs = g.affine(cur, c, 0.0);
                g.add(xs, mb)
            }
            AugmentOp::Noise { max_sigma } => {
                let sigma = if max_sigma > 0.0 {
                    rng.random_range(0.0..=max_sigma)
                } else {
                    0.0
                };
                let n: usize = shape.iter().product();
                let noise = if sigma > 0.0 {
                    let normal = Normal::new(0.0, sigma).expect("sigma");
                    (0..n).map(|_| normal.sample(&mut rng)).collect()
                } else {
                    vec![0.0; n]
                };
                let nv = g.constant(Tensor::from_parts(shape.clone(), noise));
                g.add(cur, nv)
            }
            AugmentOp::Blur { radius, max_sigma } => {
                let sigma = if max_sigma > 0.0 {
                    rng.random_range(0.0..=max_sigma)
                } else {
                    0.0
                };
                let k = gaussian_kernel(radius, sigma);
                if k.len() == 1 {
                    cur
                } else {
                    g.separable_filter(cur, k)
                }
            }
            AugmentOp::Offset { value } => g.affine(cur, 1.0, value),
            AugmentOp::HorizontalFlip | AugmentOp::VerticalFlip | AugmentOp::RandomCrop { .. } => {
                unreachable!("validated policies contain only photometric ops")
            }
        };
        if clamp {
            cur = g.clamp01(cur);
        }
    }
    cur
}

/// Weak branch on the graph.
pub fn weak_on_graph(g: &mut Graph, restored: Var, policy: &AugmentationPolicy, seed: u64) -> Var {
    augment_on_graph(g, restored, &policy.weak, policy.clamp, seed)
}

/// Strong branch on the graph, applied to the weak output.
pub fn strong_on_graph(g: &mut Graph, weak: Var, policy: &AugmentationPolicy, seed: u64) -> Var {
    augment_on_graph(g, weak, &policy.strong, policy.clamp, seed ^ STRONG_STREAM)
}

fn run_branch(img: &ImageTensor, policy: &AugmentationPolicy, seed: u64, strong: bool) -> Result<ImageTensor> {
    policy.validate()?;
    let mut g = Graph::new();
    let x = g.constant(img.tensor().clone());
    let y = if strong {
        strong_on_graph(&mut g, x, policy, seed)
    } else {
        weak_on_graph(&mut g, x, policy, seed)
    };
    ImageTensor::new(g.value(y).clone())
}

pub fn weak_augment(img: &ImageTensor, policy: &AugmentationPolicy, seed: u64) -> Result<ImageTensor> {
    run_branch(img, policy, seed, false)
}

pub fn strong_augment(img: &ImageTensor, policy: &AugmentationPolicy, seed: u64) -> Result<ImageTensor> {
    run_branch(img, policy, seed, true)
}

/// Consistency term on the graph: `gamma * mean((weak - strong)^2)`.
pub fn internal_loss_on_graph(
    g: &mut Graph,
    restored: Var,
    gamma: f64,
    policy: &AugmentationPolicy,
    seed: u64,
) -> Var {
    let w = weak_on_graph(g, restored, policy, seed);
    let s = strong_on_graph(g, w, policy, seed);
    let d = g.mean_sq_diff(w, s);
    g.affine(d, gamma, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub l1: f64,
    pub internal: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(l1: f64, internal: f64, alpha: f64) -> Self {
        LossBreakdown {
            l1,
            internal,
            total: l1 + alpha * internal,
        }
    }

    pub fn is_consistent(&self, alpha: f64) -> bool {
        let expect = self.l1 + alpha * self.internal;
        (self.total - expect).abs() <= 1e-9 * expect.abs().max(1e-300)
    }
}

/// Graph nodes of one objective evaluation.
pub struct LossNodes {
    pub l1: Var,
    pub internal: Var,
    pub total: Var,
}

pub fn total_loss_on_graph(
    g: &mut Graph,
    restored: Var,
    target: Var,
    alpha: f64,
    gamma: f64,
    policy: &AugmentationPolicy,
    seed: u64,
) -> LossNodes {
    let l1 = g.mean_abs_diff(restored, target);
    let internal = if alpha == 0.0 {
        g.constant(Tensor::scalar(0.0))
    } else {
        internal_loss_on_graph(g, restored, gamma, policy, seed)
    };
    let weighted = g.affine(internal, alpha, 0.0);
    let total = g.add(l1, weighted);
    LossNodes { l1, internal, total }
}

pub fn internal_loss(img: &ImageTensor, gamma: f64, policy: &AugmentationPolicy, seed: u64) -> Result<f64> {
    if gamma < 0.0 {
        return Err(Error::Parameter(format!("gamma must be non-negative, got {gamma}")));
    }
    policy.validate()?;
    let mut g = Graph::new();
    let x = g.constant(img.tensor().clone());
    let l = internal_loss_on_graph(&mut g, x, gamma, policy, seed);
    Ok(g.scalar_value(l))
}

pub fn total_loss(
    restored: &ImageTensor,
    target: &ImageTensor,
    alpha: f64,
    gamma: f64,
    policy: &AugmentationPolicy,
    seed: u64,
) -> Result<LossBreakdown> {
    if restored.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "restored {:?} vs target {:?}",
            restored.shape(),
            target.shape()
        )));
    }
    if alpha < 0.0 || gamma < 0.0 {
        return Err(Error::Parameter("alpha and gamma must be non-negative".into()));
    }
    policy.validate()?;
    let mut g = Graph::new();
    let r = g.constant(restored.tensor().clone());
    let t = g.constant(target.tensor().clone());
    let nodes = total_loss_on_graph(&mut g, r, t, alpha, gamma, policy, seed);
    Ok(LossBreakdown::new(
        g.scalar_value(nodes.l1),
        g.scalar_value(nodes.internal),
        alpha,
    ))
}

/// Gamma at `iteration` under the configured schedule.
pub fn scheduled_gamma(base: f64, schedule: GammaSchedule, iteration: u64, total: u64) -> f64 {
    match schedule {
        GammaSchedule::Constant => base,
        GammaSchedule::LinearDecay => {
            if total == 0 {
                base
            } else {
                base * (1.0 - (iteration.min(total) as f64 / total as f64))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GammaSchedule {
    #[default]
    Constant,
    LinearDecay,
}
