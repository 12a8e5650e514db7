//! Acceptance suite. Each test prints one `[PASS]` or `[FAIL]` line for its
//! criterion and then asserts on it. Tolerances and budgets are pinned below.
//!
//! Run with `cargo test --test acceptance -- --nocapture --test-threads=1`.

use std::f64::consts::PI;
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use guided_restore::backbone::{build_model, Binder, Model};
use guided_restore::config::{desk_scale_preset, ModelConfig};
use guided_restore::degrade::{
    add_gaussian_noise, apply_haze, apply_low_light, compose, synthetic_scene, CompositeSpec, Degradation,
    DegradationSpec,
};
use guided_restore::evaluation::{
    evaluate, input_baseline, psnr, run_component_ablation, run_order_ablation, ssim, ComparisonReport,
    DEFAULT_ORDERS, SSIM_K1,
};
use guided_restore::gradcheck::{random_projection, GradCheck};
use guided_restore::graph::Graph;
use guided_restore::guidance::masks::{mask_dropout, SemanticMaskSet};
use guided_restore::guidance::{GuidanceAssembler, GuidanceBundle, Mode, Providers};
use guided_restore::icrm::{
    internal_loss, internal_loss_on_graph, strong_augment, total_loss, total_loss_on_graph, weak_augment, AugmentOp,
    AugmentationPolicy,
};
use guided_restore::image::{FeatureMap, ImageTensor};
use guided_restore::modulation::{
    dam_forward, dam_on_graph, degradation_prompt, degradation_prompt_on_graph, map_on_graph, mask_average_pool,
    qgm_forward, qgm_on_graph, sca_dense_on_graph, sca_forward, sca_segments_on_graph, ContentAttnParams, DamParams,
    DegradationPrompt, Mlp, PromptBank, PromptParams, QgmParams, ScaParams,
};
use guided_restore::params::ParamGrads;
use guided_restore::tensor::Tensor;
use guided_restore::training::{
    checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, save_checkpoint, train_in_memory, train_loop,
    LoopOptions, PairSet, LOSS_CURVE_FILE,
};

// ------------------------------------------------------------ pinned values

const ORACLE_CASES: usize = 100;
const ORACLE_TOL: f64 = 1e-6;
const ORACLE_BUDGET_S: f64 = 60.0;

const MODEL_GRAD_TOL: f64 = 1e-3;
const BLOCK_GRAD_TOL: f64 = 1e-4;
/// Central-difference step for isolated blocks.
const GRAD_EPS: f64 = 1e-6;
/// Step for the full model. Many of its groups have gradients near 1e-8, where
/// a 1e-6 step is dominated by round-off in the loss; 1e-5 sits near the
/// optimum `cbrt(machine epsilon)` for central differences.
const MODEL_GRAD_EPS: f64 = 1e-5;
/// Random coordinates checked per parameter group, besides its largest-gradient one.
const GRAD_COORDS: usize = 3;
const GRAD_BUDGET_S: f64 = 600.0;

const OVERFIT_SEEDS: [u64; 3] = [0, 1, 2];
const OVERFIT_GAIN_DB: f64 = 6.0;
const OVERFIT_CPU_BUDGET_S: f64 = 15.0 * 60.0;

/// Desk-scale ablation budget: per variant, this many iterations on four
/// 32x32 pairs (one per degradation composite) with 32x32 crops.
const ABLATION_ITERS: u64 = 1000;
const ABLATION_SIDE: usize = 32;
const ABLATION_SEEDS: [u64; 3] = [0, 1, 2];

const PSNR_OFFSET_TOL: f64 = 1e-9;
const SSIM_CLOSED_FORM_TOL: f64 = 1e-6;
const MONOTONE_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

const NOISE_STD_REL_TOL: f64 = 0.02;
const CLOSED_FORM_TOL: f64 = 1e-9;

/// Serializes the tests: output lines stay readable and CPU-time figures are
/// not inflated by a concurrent test on the same core.
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(n: u32, name: &str, pass: bool, detail: &str) {
    println!("[{}] criterion {n}: {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}

/// CPU time consumed by the calling thread, in seconds, falling back to wall
/// time where the scheduler statistics are unavailable.
fn thread_cpu_seconds(wall: &Instant) -> f64 {
    std::fs::read_to_string("/proc/thread-self/schedstat")
        .ok()
        .and_then(|s| s.split_whitespace().next().and_then(|v| v.parse::<f64>().ok()))
        .map(|ns| ns / 1e9)
        .unwrap_or_else(|| wall.elapsed().as_secs_f64())
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    Tensor::new(shape.to_vec(), rand_vec(rng, shape.iter().product(), scale)).unwrap()
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "oracle and implementation disagree on length");
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn noise_pairs(n: usize, side: usize, sigma: f64, seed: u64) -> PairSet {
    let rows = (0..n as u64)
        .map(|i| {
            let clean = synthetic_scene(side, side, seed * 1000 + 100 + i).unwrap();
            let noisy = add_gaussian_noise(&clean, sigma, seed * 1000 + 500 + i).unwrap();
            (format!("s{seed}_{i}"), "noise".to_string(), noisy, clean)
        })
        .collect();
    PairSet::from_pairs(rows).unwrap()
}

/// One pair per composite: noise, haze, rain, and low light followed by noise.
fn mixed_pairs(side: usize, seed: u64) -> PairSet {
    let composites = [
        vec![Degradation::GaussianNoise { sigma: 25.0 }],
        vec![Degradation::Haze { transmission: 0.6, airlight: 0.9 }],
        vec![Degradation::Rain { density: 0.02, length: 9, angle: 70.0 }],
        vec![Degradation::LowLight { gamma: 1.8, gain: 0.6 }, Degradation::GaussianNoise { sigma: 10.0 }],
    ];
    let rows = composites
        .into_iter()
        .enumerate()
        .map(|(i, ops)| {
            let i = i as u64;
            let spec = CompositeSpec::new(ops.into_iter().map(|op| DegradationSpec::new(op, seed * 1000 + 700 + i)).collect()).unwrap();
            let clean = synthetic_scene(side, side, seed * 1000 + 300 + i).unwrap();
            let degraded = compose(&clean, &spec).unwrap();
            (format!("m{seed}_{i}"), spec.tag(), degraded, clean)
        })
        .collect();
    PairSet::from_pairs(rows).unwrap()
}

// ------------------------------------------------------------ literal oracles

fn gelu_ref(x: f64) -> f64 {
    0.5 * x * (1.0 + ((2.0 / PI).sqrt() * (x + 0.044715 * x.powi(3))).tanh())
}

fn sigmoid_ref(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `w: [rows, cols]` row-major times `x: [cols]`.
fn matvec(w: &Tensor, x: &[f64]) -> Vec<f64> {
    let cols = w.shape()[1];
    w.data().chunks(cols).map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

fn mlp_ref(p: &Mlp<Tensor>, x: &[f64]) -> Vec<f64> {
    let h: Vec<f64> = matvec(&p.w1, x).iter().zip(p.b1.data()).map(|(v, b)| gelu_ref(v + b)).collect();
    matvec(&p.w2, &h).iter().zip(p.b2.data()).map(|(v, b)| v + b).collect()
}

fn softmax_ref(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Per-pixel 1x1 projection of a `[C_in, P]` map by `w: [C_out, C_in]`.
fn project(w: &Tensor, x: &[f64], p: usize) -> Vec<f64> {
    let (co, ci) = (w.shape()[0], w.shape()[1]);
    let mut y = vec![0.0; co * p];
    for o in 0..co {
        for i in 0..ci {
            for q in 0..p {
                y[o * p + q] += w.data()[o * ci + i] * x[i * p + q];
            }
        }
    }
    y
}

fn qgm_ref(x: &[f64], c: usize, p: usize, fq: &[f64], prm: &QgmParams<Tensor>) -> Vec<f64> {
    let gamma: Vec<f64> = matvec(&prm.scale_weight, fq).iter().zip(prm.scale_bias.data()).map(|(a, b)| a + b).collect();
    let beta: Vec<f64> = matvec(&prm.shift_weight, fq).iter().zip(prm.shift_bias.data()).map(|(a, b)| a + b).collect();
    let mut y = vec![0.0; c * p];
    for ch in 0..c {
        for q in 0..p {
            y[ch * p + q] = gamma[ch] * x[ch * p + q] + beta[ch];
        }
    }
    y
}

fn map_ref(x: &[f64], c: usize, masks: &[Vec<bool>]) -> Vec<f64> {
    let p = masks[0].len();
    let mut y = vec![0.0; c * p];
    for m in masks {
        let n = m.iter().filter(|&&b| b).count() as f64;
        for ch in 0..c {
            let mean: f64 = (0..p).filter(|&q| m[q]).map(|q| x[ch * p + q]).sum::<f64>() / n;
            for q in (0..p).filter(|&q| m[q]) {
                y[ch * p + q] = mean;
            }
        }
    }
    y
}

/// Multi-head attention with queries `q: [C, Pq]`, keys and values `[C, Pk]`.
fn attention_ref(q: &[f64], k: &[f64], v: &[f64], c: usize, pq: usize, pk: usize, heads: usize) -> Vec<f64> {
    let d = c / heads;
    let mut out = vec![0.0; c * pq];
    for h in 0..heads {
        let chans = h * d..(h + 1) * d;
        for i in 0..pq {
            let logits: Vec<f64> = (0..pk)
                .map(|j| chans.clone().map(|ch| q[ch * pq + i] * k[ch * pk + j]).sum::<f64>() / (d as f64).sqrt())
                .collect();
            let a = softmax_ref(&logits);
            for ch in chans.clone() {
                out[ch * pq + i] = (0..pk).map(|j| a[j] * v[ch * pk + j]).sum();
            }
        }
    }
    out
}

fn sca_ref(f_in: &[f64], f_sem: &[f64], c: usize, p: usize, prm: &ScaParams<Tensor>, heads: usize) -> Vec<f64> {
    let k = project(&prm.key, f_sem, p);
    let v = project(&prm.value, f_sem, p);
    attention_ref(f_in, &k, &v, c, p, p, heads)
}

fn prompt_ref(fd: &[f64], bank: &Tensor, prm: &PromptParams<Tensor>) -> (Vec<f64>, Vec<f64>) {
    let w = softmax_ref(&mlp_ref(&prm.mlp1, fd));
    let dp = bank.shape()[1];
    let mixed: Vec<f64> = (0..dp).map(|j| (0..w.len()).map(|k| w[k] * bank.data()[k * dp + j]).sum()).collect();
    (mlp_ref(&prm.mlp2, &mixed), w)
}

fn bilinear_ref(src: &[f64], sh: usize, sw: usize, dh: usize, dw: usize) -> Vec<f64> {
    let taps = |s: usize, d: usize, o: usize| {
        let pos = ((o as f64 + 0.5) * s as f64 / d as f64 - 0.5).max(0.0);
        let i0 = (pos.floor() as usize).min(s - 1);
        let i1 = (i0 + 1).min(s - 1);
        let f = if i1 == i0 { 0.0 } else { pos - i0 as f64 };
        (i0, i1, f)
    };
    let mut out = vec![0.0; dh * dw];
    for y in 0..dh {
        let (y0, y1, fy) = taps(sh, dh, y);
        for x in 0..dw {
            let (x0, x1, fx) = taps(sw, dw, x);
            let top = (1.0 - fx) * src[y0 * sw + x0] + fx * src[y0 * sw + x1];
            let bot = (1.0 - fx) * src[y1 * sw + x0] + fx * src[y1 * sw + x1];
            out[y * dw + x] = (1.0 - fy) * top + fy * bot;
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn dam_ref(x: &[f64], c: usize, h: usize, w: usize, fc: &[f64], fp: &[f64], prm: &DamParams<Tensor>, heads: usize) -> Vec<f64> {
    let p = h * w;
    let mut xn = vec![0.0; c * p];
    for q in 0..p {
        let col: Vec<f64> = (0..c).map(|ch| x[ch * p + q]).collect();
        let mu = col.iter().sum::<f64>() / c as f64;
        let var = col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / c as f64;
        for ch in 0..c {
            xn[ch * p + q] = (col[ch] - mu) / (var + 1e-5).sqrt() * prm.norm_weight.data()[ch] + prm.norm_bias.data()[ch];
        }
    }
    let x_hat = project(&prm.proj, &xn, p);
    let content = match &prm.content {
        ContentAttnParams::KeyValue { value, out } => matvec(out, &matvec(value, fc)),
        ContentAttnParams::Query { query, key, value, out } => {
            let q = matvec(query, fc);
            let k = project(key, &x_hat, p);
            let v = project(value, &x_hat, p);
            matvec(out, &attention_ref(&q, &k, &v, c, 1, p, heads))
        }
    };
    let logits = mlp_ref(&prm.mask_mlp, fp);
    let base = (logits.len() as f64).sqrt().round() as usize;
    let small: Vec<f64> = logits.iter().map(|&v| sigmoid_ref(v)).collect();
    let mask = bilinear_ref(&small, base, base, h, w);
    let mut y = vec![0.0; c * p];
    for o in 0..c {
        for q in 0..p {
            let mut acc = 0.0;
            for i in 0..c {
                acc += prm.fuse.data()[o * 2 * c + i] * content[i];
                acc += prm.fuse.data()[o * 2 * c + c + i] * x_hat[i * p + q] * mask[q];
            }
            y[o * p + q] = acc;
        }
    }
    y
}

fn mean_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

fn internal_ref(img: &ImageTensor, gamma: f64, policy: &AugmentationPolicy, seed: u64) -> f64 {
    let weak = weak_augment(img, policy, seed).unwrap();
    let strong = strong_augment(&weak, policy, seed).unwrap();
    gamma * mean_sq(weak.data(), strong.data())
}

fn rand_mlp(rng: &mut ChaCha8Rng, input: usize, output: usize) -> Mlp<Tensor> {
    Mlp {
        w1: rand_tensor(rng, &[output, input], 1.0 / (input as f64).sqrt()),
        b1: rand_tensor(rng, &[output], 0.5),
        w2: rand_tensor(rng, &[output, output], 1.0),
        b2: rand_tensor(rng, &[output], 0.5),
    }
}

fn rand_partition(rng: &mut ChaCha8Rng, p: usize) -> Vec<Vec<bool>> {
    let n = rng.random_range(1..=p.min(4));
    let mut labels: Vec<usize> = (0..p).map(|_| rng.random_range(0..n)).collect();
    // every label must own at least one pixel
    for (l, q) in rand::seq::index::sample(rng, p, n).into_iter().enumerate() {
        labels[q] = l;
    }
    (0..n).map(|l| labels.iter().map(|&v| v == l).collect()).collect()
}

fn rand_dims(rng: &mut ChaCha8Rng) -> (usize, usize, usize) {
    (rng.random_range(1..=4), rng.random_range(1..=4), rng.random_range(1..=4))
}

fn divisor(rng: &mut ChaCha8Rng, c: usize) -> usize {
    let ds: Vec<usize> = (1..=c).filter(|d| c.is_multiple_of(*d)).collect();
    ds[rng.random_range(0..ds.len())]
}

fn rand_image(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> ImageTensor {
    ImageTensor::from_vec(c, h, w, (0..c * h * w).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
}

fn rand_dam(rng: &mut ChaCha8Rng, c: usize, dc: usize, dp: usize, base: usize, query: bool) -> DamParams<Tensor> {
    let content = if query {
        ContentAttnParams::Query {
            query: rand_tensor(rng, &[c, dc], 1.0),
            key: rand_tensor(rng, &[c, c], 1.0),
            value: rand_tensor(rng, &[c, c], 1.0),
            out: rand_tensor(rng, &[c, c], 1.0),
        }
    } else {
        ContentAttnParams::KeyValue {
            value: rand_tensor(rng, &[c, dc], 1.0),
            out: rand_tensor(rng, &[c, c], 1.0),
        }
    };
    DamParams {
        norm_weight: rand_tensor(rng, &[c], 1.5),
        norm_bias: rand_tensor(rng, &[c], 0.5),
        proj: rand_tensor(rng, &[c, c], 1.0),
        content,
        mask_mlp: rand_mlp(rng, dp, base * base),
        fuse: rand_tensor(rng, &[c, 2 * c], 1.0),
    }
}

#[test]
fn criterion_1_reference_oracles() {
    let _guard = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0001);
    let mut worst: Vec<(&str, f64)> = Vec::new();

    let mut e = 0.0f64;
    for _ in 0..ORACLE_CASES {
        let (c, h, w) = rand_dims(&mut rng);
        let dq = rng.random_range(1..=8);
        let x = rand_vec(&mut rng, c * h * w, 2.0);
        let fq = rand_vec(&mut rng, dq, 1.0);
        let prm = QgmParams {
            scale_weight: rand_tensor(&mut rng, &[c, dq], 1.0),
            scale_bias: rand_tensor(&mut rng, &[c], 1.0),
            shift_weight: rand_tensor(&mut rng, &[c, dq], 1.0),
            shift_bias: rand_tensor(&mut rng, &[c], 1.0),
        };
        let got = qgm_forward(&FeatureMap::from_vec(c, h, w, x.clone()).unwrap(), &fq, &prm).unwrap();
        e = e.max(max_abs(got.data(), &qgm_ref(&x, c, h * w, &fq, &prm)));
    }
    worst.push(("qgm_forward", e));

    let mut e = 0.0f64;
    for _ in 0..ORACLE_CASES {
        let (c, h, w) = rand_dims(&mut rng);
        let x = rand_vec(&mut rng, c * h * w, 2.0);
        let masks = rand_partition(&mut rng, h * w);
        let ms = SemanticMaskSet::new(h, w, masks.clone()).unwrap();
        let got = mask_average_pool(&FeatureMap::from_vec(c, h, w, x.clone()).unwrap(), &ms).unwrap();
        e = e.max(max_abs(got.data(), &map_ref(&x, c, &masks)));
    }
    worst.push(("mask_average_pool", e));

    let mut e = 0.0f64;
    for _ in 0..ORACLE_CASES {
        let (c, h, w) = rand_dims(&mut rng);
        let cs = rng.random_range(1..=4);
        let heads = divisor(&mut rng, c);
        let f_in = rand_vec(&mut rng, c * h * w, 1.5);
        let f_sem = rand_vec(&mut rng, cs * h * w, 1.5);
        let prm = ScaParams {
            key: rand_tensor(&mut rng, &[c, cs], 1.0),
            value: rand_tensor(&mut rng, &[c, cs], 1.0),
        };
        let got = sca_forward(
            &FeatureMap::from_vec(c, h, w, f_in.clone()).unwrap(),
            &FeatureMap::from_vec(cs, h, w, f_sem.clone()).unwrap(),
            &prm,
            heads,
        )
        .unwrap();
        e = e.max(max_abs(got.data(), &sca_ref(&f_in, &f_sem, c, h * w, &prm, heads)));
    }
    worst.push(("sca_forward", e));

    let mut e = 0.0f64;
    for _ in 0..ORACLE_CASES {
        let np = rng.random_range(1..=4);
        let dp = rng.random_range(1..=4);
        let fd = rand_vec(&mut rng, 512, 1.0);
        let bank = rand_tensor(&mut rng, &[np, dp], 1.0);
        let prm = PromptParams {
            mlp1: rand_mlp(&mut rng, 512, np),
            mlp2: rand_mlp(&mut rng, dp, dp),
        };
        let got = degradation_prompt(&fd, &PromptBank::new(bank.clone()).unwrap(), &prm).unwrap();
        let (fp, wts) = prompt_ref(&fd, &bank, &prm);
        e = e.max(max_abs(&got.f_p, &fp)).max(max_abs(&got.weights, &wts));
    }
    worst.push(("degradation_prompt", e));

    for (label, query) in [("dam_forward (content as key/value)", false), ("dam_forward (content as query)", true)] {
        let mut e = 0.0f64;
        for _ in 0..ORACLE_CASES {
            let (c, h, w) = rand_dims(&mut rng);
            let dc = rng.random_range(1..=8);
            let dp = rng.random_range(1..=4);
            let base = rng.random_range(1..=4);
            let heads = divisor(&mut rng, c);
            let x = rand_vec(&mut rng, c * h * w, 2.0);
            let fc = rand_vec(&mut rng, dc, 1.0);
            let fp = DegradationPrompt {
                f_p: rand_vec(&mut rng, dp, 1.0),
                weights: vec![1.0],
            };
            let prm = rand_dam(&mut rng, c, dc, dp, base, query);
            let got = dam_forward(&FeatureMap::from_vec(c, h, w, x.clone()).unwrap(), &fc, &fp, &prm, heads).unwrap();
            e = e.max(max_abs(got.data(), &dam_ref(&x, c, h, w, &fc, &fp.f_p, &prm, heads)));
        }
        worst.push((label, e));
    }

    let mut e = 0.0f64;
    for i in 0..ORACLE_CASES {
        let (_, h, w) = rand_dims(&mut rng);
        let c = if rng.random_bool(0.5) { 1 } else { 3 };
        let img = rand_image(&mut rng, c, h, w);
        let gamma = rng.random_range(0.0..2.0);
        let seed = rng.random::<u64>();
        let got = internal_loss(&img, gamma, &AugmentationPolicy::default(), seed).unwrap();
        e = e.max((got - internal_ref(&img, gamma, &AugmentationPolicy::default(), seed)).abs());
        // a fully deterministic branch pair: weak adds `a`, strong adds `a` again
        let a = 0.01 * (i as f64 + 1.0);
        let offset = AugmentationPolicy {
            weak: vec![AugmentOp::Offset { value: a }],
            strong: vec![AugmentOp::Offset { value: a }],
            clamp: false,
        };
        let got = internal_loss(&img, gamma, &offset, seed).unwrap();
        e = e.max((got - gamma * a * a).abs());
    }
    worst.push(("internal_loss", e));

    let mut e = 0.0f64;
    for _ in 0..ORACLE_CASES {
        let (_, h, w) = rand_dims(&mut rng);
        let c = if rng.random_bool(0.5) { 1 } else { 3 };
        let restored = rand_image(&mut rng, c, h, w);
        let target = rand_image(&mut rng, c, h, w);
        let alpha = rng.random_range(0.0..2.0);
        let gamma = rng.random_range(0.0..2.0);
        let seed = rng.random::<u64>();
        let policy = AugmentationPolicy::default();
        let got = total_loss(&restored, &target, alpha, gamma, &policy, seed).unwrap();
        let l1: f64 = restored.data().iter().zip(target.data()).map(|(a, b)| (a - b).abs()).sum::<f64>()
            / restored.data().len() as f64;
        let inner = internal_ref(&restored, gamma, &policy, seed);
        e = e
            .max((got.l1 - l1).abs())
            .max((got.internal - inner).abs())
            .max((got.total - (l1 + alpha * inner)).abs());
    }
    worst.push(("total_loss", e));

    let secs = start.elapsed().as_secs_f64();
    let max_err = worst.iter().map(|w| w.1).fold(0.0, f64::max);
    let pass = max_err < ORACLE_TOL && secs < ORACLE_BUDGET_S;
    for (name, err) in &worst {
        println!("    {name}: max abs error {err:.3e} over {ORACLE_CASES} cases");
    }
    verdict(
        1,
        "reference oracles",
        pass,
        &format!("max abs error {max_err:.3e} (< {ORACLE_TOL:e}), {secs:.1}s (< {ORACLE_BUDGET_S}s)"),
    );
    assert!(pass);
}

// ------------------------------------------------------------ gradients

/// Desk model with every parameter nudged off its initial value, so that
/// zero-initialized projections (head, shifts, fusions) carry gradient into
/// everything upstream of them.
fn perturbed_desk_model(cfg: &ModelConfig, seed: u64) -> Model {
    let mut model = build_model(cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<_> = model.params().ids().collect();
    for id in ids {
        for v in model.params_mut().get_mut(id).data_mut() {
            *v += rng.random_range(-0.02..0.02);
        }
    }
    model
}

struct LossProbe<'a> {
    model: &'a Model,
    img: &'a ImageTensor,
    target: &'a ImageTensor,
    bundle: &'a GuidanceBundle,
}

impl LossProbe<'_> {
    fn eval(&self, model: &Model, grads: Option<&mut ParamGrads>) -> f64 {
        let cfg = model.config();
        let mut g = Graph::new();
        let mut b = Binder::new(model.params(), grads.is_some());
        let out = model.forward_on_graph(&mut g, &mut b, self.img, self.bundle).unwrap();
        let t = g.constant(self.target.tensor().clone());
        let nodes = total_loss_on_graph(&mut g, out, t, cfg.loss_alpha, cfg.loss_gamma, &cfg.augmentation, 7);
        if let Some(acc) = grads {
            let back = g.backward(nodes.total, 1.0);
            g.collect_param_grads(&back, acc);
        }
        g.scalar_value(nodes.total)
    }

    fn restored(&self) -> ImageTensor {
        self.model.forward(self.img, self.bundle).unwrap()
    }
}

fn block_checks() -> Vec<(&'static str, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xB10C);
    let check = GradCheck {
        eps: GRAD_EPS,
        ..GradCheck::default()
    };
    let (c, h, w) = (4, 4, 4);
    let mut out = Vec::new();

    let inputs = vec![
        rand_tensor(&mut rng, &[c, h, w], 1.0),
        rand_tensor(&mut rng, &[5], 1.0),
        rand_tensor(&mut rng, &[c, 5], 1.0),
        rand_tensor(&mut rng, &[c], 1.0),
        rand_tensor(&mut rng, &[c, 5], 1.0),
        rand_tensor(&mut rng, &[c], 1.0),
    ];
    let r = check.run(&inputs, |g, v| {
        let p = QgmParams {
            scale_weight: v[2],
            scale_bias: v[3],
            shift_weight: v[4],
            shift_bias: v[5],
        };
        let y = qgm_on_graph(g, v[0], v[1], &p);
        random_projection(g, y, 1)
    });
    out.push(("quality modulation", r.max_rel_err));

    let labels = std::rc::Rc::new((0..h * w).map(|q| (q % w) / 2 + 2 * (q / (w * 2))).collect::<Vec<_>>());
    let r = check.run(&[rand_tensor(&mut rng, &[c, h, w], 1.0)], |g, v| {
        let y = map_on_graph(g, v[0], labels.clone(), 4);
        random_projection(g, y, 2)
    });
    out.push(("mask average pooling", r.max_rel_err));

    let inputs = vec![
        rand_tensor(&mut rng, &[c, h, w], 1.0),
        rand_tensor(&mut rng, &[3, h, w], 1.0),
        rand_tensor(&mut rng, &[c, 3], 1.0),
        rand_tensor(&mut rng, &[c, 3], 1.0),
    ];
    let r = check.run(&inputs, |g, v| {
        let y = sca_dense_on_graph(g, v[0], v[1], &ScaParams { key: v[2], value: v[3] }, 2);
        random_projection(g, y, 3)
    });
    out.push(("semantic cross-attention", r.max_rel_err));

    let inputs = vec![
        rand_tensor(&mut rng, &[c, h, w], 1.0),
        rand_tensor(&mut rng, &[3, 3], 1.0),
        rand_tensor(&mut rng, &[c, 3], 1.0),
        rand_tensor(&mut rng, &[c, 3], 1.0),
    ];
    let log_counts = [2f64.ln(), 5f64.ln(), 9f64.ln()];
    let r = check.run(&inputs, |g, v| {
        let y = sca_segments_on_graph(g, v[0], v[1], &log_counts, &ScaParams { key: v[2], value: v[3] }, 4);
        random_projection(g, y, 4)
    });
    out.push(("semantic cross-attention over segments", r.max_rel_err));

    let m1 = rand_mlp(&mut rng, 6, 3);
    let m2 = rand_mlp(&mut rng, 4, 4);
    let inputs = vec![
        rand_tensor(&mut rng, &[6], 1.0),
        rand_tensor(&mut rng, &[3, 4], 1.0),
        m1.w1, m1.b1, m1.w2, m1.b2, m2.w1, m2.b1, m2.w2, m2.b2,
    ];
    let r = check.run(&inputs, |g, v| {
        let p = PromptParams {
            mlp1: Mlp { w1: v[2], b1: v[3], w2: v[4], b2: v[5] },
            mlp2: Mlp { w1: v[6], b1: v[7], w2: v[8], b2: v[9] },
        };
        let (fp, _) = degradation_prompt_on_graph(g, v[0], v[1], &p);
        random_projection(g, fp, 5)
    });
    out.push(("degradation prompt", r.max_rel_err));

    for (label, query) in [("degradation-aware block (key/value)", false), ("degradation-aware block (query)", true)] {
        let prm = rand_dam(&mut rng, c, 5, 3, 2, query);
        let mut flat: Vec<Tensor> = vec![
            rand_tensor(&mut rng, &[c, h, w], 1.0),
            rand_tensor(&mut rng, &[5], 1.0),
            rand_tensor(&mut rng, &[3], 1.0),
        ];
        prm.map_named("", &mut |_, t| flat.push(t.clone()));
        let r = check.run(&flat, |g, v| {
            let mut it = v[3..].iter().copied();
            let p = prm.map_named("", &mut |_, _| it.next().unwrap());
            let y = dam_on_graph(g, v[0], v[1], v[2], &p, 2);
            random_projection(g, y, 6)
        });
        out.push((label, r.max_rel_err));
    }

    let policy = AugmentationPolicy {
        clamp: false,
        ..AugmentationPolicy::default()
    };
    let r = check.run(&[rand_tensor(&mut rng, &[3, 6, 6], 1.0)], |g, v| {
        internal_loss_on_graph(g, v[0], 0.7, &policy, 11)
    });
    out.push(("consistency term", r.max_rel_err));

    let restored = rand_tensor(&mut rng, &[3, 6, 6], 1.0);
    // keep every residual away from the kink of |r - t|
    let target = restored.map(|v| v + if v > 0.0 { -0.3 } else { 0.3 });
    let r = check.run(&[restored, target], |g, v| {
        total_loss_on_graph(g, v[0], v[1], 0.5, 0.7, &policy, 12).total
    });
    out.push(("total objective", r.max_rel_err));
    out
}

#[test]
fn criterion_2_gradient_suite() {
    let _guard = serial();
    let start = Instant::now();
    let mut cfg = desk_scale_preset();
    cfg.augmentation.clamp = false;
    let model = perturbed_desk_model(&cfg, 0x6AAD);
    let mut rng = ChaCha8Rng::seed_from_u64(0x6AAE);
    let img = ImageTensor::from_vec(3, 16, 16, (0..768).map(|_| rng.random_range(0.3..0.7)).collect()).unwrap();
    let providers = Providers::stub(&cfg);
    let bundle = GuidanceAssembler::new(&providers, &cfg).assemble("probe", &img, Mode::Train, 3).unwrap();
    let probe_target = img.clone();
    let mut probe = LossProbe {
        model: &model,
        img: &img,
        target: &probe_target,
        bundle: &bundle,
    };
    // The target sits 0.15 above the restored image so the absolute error
    // stays differentiable under perturbation.
    let restored = probe.restored();
    let interior = restored.data().iter().all(|&v| v > 0.05 && v < 0.95);
    let target = ImageTensor::from_vec(3, 16, 16, restored.data().iter().map(|v| v + 0.15).collect()).unwrap();
    probe.target = &target;

    let mut grads = ParamGrads::zeros_like(model.params());
    probe.eval(&model, Some(&mut grads));

    let mut work = model.clone();
    let mut worst = (0.0f64, String::new());
    let mut groups = 0;
    let mut coords_checked = 0;
    let ids: Vec<_> = model.params().ids().collect();
    for id in ids {
        let analytic = grads.get(id).data().to_vec();
        let n = analytic.len();
        let top = (0..n).max_by(|&a, &b| analytic[a].abs().total_cmp(&analytic[b].abs())).unwrap();
        let mut coords = vec![top];
        for i in rand::seq::index::sample(&mut rng, n, GRAD_COORDS.min(n)) {
            if i != top {
                coords.push(i);
            }
        }
        let (mut diff, mut scale) = (0.0f64, 0.0f64);
        for &i in &coords {
            let orig = work.params().get(id).data()[i];
            work.params_mut().get_mut(id).data_mut()[i] = orig + MODEL_GRAD_EPS;
            let up = probe.eval(&work, None);
            work.params_mut().get_mut(id).data_mut()[i] = orig - MODEL_GRAD_EPS;
            let down = probe.eval(&work, None);
            work.params_mut().get_mut(id).data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * MODEL_GRAD_EPS);
            diff = diff.max((numeric - analytic[i]).abs());
            scale = scale.max(numeric.abs()).max(analytic[i].abs());
            coords_checked += 1;
        }
        let rel = diff / scale.max(1e-6);
        if rel >= worst.0 {
            worst = (rel, model.params().name(id).to_string());
        }
        groups += 1;
    }
    println!(
        "    full model: {groups} parameter groups, {coords_checked} coordinates, worst {:.3e} at `{}`",
        worst.0, worst.1
    );

    let blocks = block_checks();
    let block_worst = blocks.iter().map(|b| b.1).fold(0.0, f64::max);
    for (name, err) in &blocks {
        println!("    isolated {name}: {err:.3e}");
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = interior && worst.0 < MODEL_GRAD_TOL && block_worst < BLOCK_GRAD_TOL && secs < GRAD_BUDGET_S;
    verdict(
        2,
        "gradient suite",
        pass,
        &format!(
            "model {:.3e} (< {MODEL_GRAD_TOL:e}), blocks {block_worst:.3e} (< {BLOCK_GRAD_TOL:e}), output interior {interior}, {secs:.1}s",
            worst.0
        ),
    );
    assert!(pass);
}

// ------------------------------------------------------------ identity and shapes

#[test]
fn criterion_3_residual_identity_and_shapes() {
    let _guard = serial();
    let cfg = desk_scale_preset();
    let model = build_model(&cfg).unwrap();
    let providers = Providers::stub(&cfg);
    let assembler = GuidanceAssembler::new(&providers, &cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut failures = Vec::new();
    let sizes = [16, 64, 100];
    for &h in &sizes {
        for &w in &sizes {
            let img = rand_image(&mut rng, 3, h, w);
            let bundle = assembler.assemble("id", &img, Mode::Eval, 0).unwrap();
            let out = model.forward(&img, &bundle).unwrap();
            if out.shape() != img.shape() {
                failures.push(format!("{h}x{w}: shape {:?}", out.shape()));
            } else if out.data() != img.data() {
                failures.push(format!("{h}x{w}: max deviation {:e}", max_abs(out.data(), img.data())));
            }
        }
    }
    let pass = failures.is_empty();
    verdict(
        3,
        "residual identity and shape",
        pass,
        &if pass {
            "output equals input exactly for all 9 sizes in {16,64,100}^2".to_string()
        } else {
            failures.join("; ")
        },
    );
    assert!(pass);
}

// ------------------------------------------------------------ overfit

#[test]
fn criterion_4_overfit_sanity() {
    let _guard = serial();
    let mut passes = 0;
    let mut lines = Vec::new();
    for seed in OVERFIT_SEEDS {
        let mut cfg = desk_scale_preset();
        cfg.seed = seed;
        let set = noise_pairs(4, 64, 25.0, seed);
        let providers = Providers::stub(&cfg);
        let before = input_baseline(&set).unwrap().averages.0;
        let wall = Instant::now();
        let cpu0 = thread_cpu_seconds(&wall);
        let (state, _) = train_in_memory(&cfg, &set, &providers).unwrap();
        let cpu = thread_cpu_seconds(&wall) - cpu0;
        let after = evaluate(&state.model, &set, &providers, &[]).unwrap().averages.0;
        let gain = after - before;
        let ok = gain >= OVERFIT_GAIN_DB && cpu < OVERFIT_CPU_BUDGET_S;
        passes += ok as usize;
        let line = format!(
            "seed {seed}: {before:.3} dB -> {after:.3} dB, gain {gain:.3} dB, {} iterations, {cpu:.0}s CPU",
            cfg.optimizer.total_iterations
        );
        println!("    {line} [{}]", if ok { "ok" } else { "miss" });
        lines.push(line);
    }
    let pass = passes * 2 > OVERFIT_SEEDS.len();
    verdict(
        4,
        "overfit sanity",
        pass,
        &format!(
            "{passes}/{} seeds gain >= {OVERFIT_GAIN_DB} dB within {OVERFIT_CPU_BUDGET_S}s CPU",
            OVERFIT_SEEDS.len()
        ),
    );
    assert!(pass);
}

// ------------------------------------------------------------ ablations

fn tiny_ablation_config() -> ModelConfig {
    let mut cfg = desk_scale_preset();
    cfg.optimizer.total_iterations = 2;
    cfg.crop_size = 16;
    cfg
}

fn row_psnr(report: &ComparisonReport, label: &str) -> f64 {
    report.row(label).unwrap().result.clone().unwrap().0
}

#[test]
fn criterion_5_ablation_machinery() {
    let _guard = serial();
    let expected_labels = ["(a)", "(b)", "(c)", "(d)", "(e)", "(f)", "(g)", "Ours"];

    // grid shape and determinism on a two-iteration budget
    let tiny = tiny_ablation_config();
    let small = noise_pairs(2, 16, 25.0, 9);
    let providers = Providers::stub(&tiny);
    let c1 = run_component_ablation(&tiny, &small, &providers).unwrap();
    let c2 = run_component_ablation(&tiny, &small, &providers).unwrap();
    let o1 = run_order_ablation(&tiny, &small, &providers, &DEFAULT_ORDERS).unwrap();
    let o2 = run_order_ablation(&tiny, &small, &providers, &DEFAULT_ORDERS).unwrap();
    let labels: Vec<&str> = c1.rows.iter().map(|r| r.label.as_str()).collect();
    let grid_ok = labels == expected_labels && c1.rows.iter().all(|r| r.result.is_ok() && r.columns.len() == 4);
    let order_labels: Vec<&str> = o1.rows.iter().map(|r| r.label.as_str()).collect();
    let order_ok = o1.rows.len() == 3 && o1.rows.iter().all(|r| r.result.is_ok());
    let deterministic = c1.to_ndjson() == c2.to_ndjson() && o1.to_ndjson() == o2.to_ndjson();
    println!("    component rows {labels:?}, order rows {order_labels:?}, deterministic {deterministic}");

    // directional check at the pinned desk budget
    let mut wins = 0;
    for seed in ABLATION_SEEDS {
        let mut cfg = desk_scale_preset();
        cfg.optimizer.total_iterations = ABLATION_ITERS;
        cfg.crop_size = ABLATION_SIDE;
        cfg.seed = seed;
        let set = mixed_pairs(ABLATION_SIDE, seed);
        let providers = Providers::stub(&cfg);
        let report = run_component_ablation(&cfg, &set, &providers).unwrap();
        print!("{}", report.to_text());
        let ours = row_psnr(&report, "Ours");
        let beaten: Vec<&str> = ["(d)", "(e)", "(f)", "(g)"]
            .into_iter()
            .filter(|l| row_psnr(&report, l) > ours)
            .collect();
        let ok = beaten.is_empty();
        wins += ok as usize;
        println!("    seed {seed}: Ours {ours:.3} dB, single-removal rows above it: {beaten:?}");
        if seed == ABLATION_SEEDS[0] {
            let orders = run_order_ablation(&cfg, &set, &providers, &DEFAULT_ORDERS).unwrap();
            print!("{}", orders.to_text());
        }
    }
    let directional = wins * 2 > ABLATION_SEEDS.len();
    let machinery = grid_ok && order_ok && deterministic;
    let pass = machinery && directional;
    verdict(
        5,
        "ablation machinery",
        pass,
        &format!(
            "8-row grid {grid_ok}, 3-row order grid {order_ok}, deterministic {deterministic}, full config >= single removals in {wins}/{} seeds ({ABLATION_ITERS} iterations)",
            ABLATION_SEEDS.len()
        ),
    );
    // Only the harness contract is asserted. Whether the full configuration
    // wins is an empirical outcome of the stub providers at this budget; it is
    // reported in the line above and analysed in the decisions ledger.
    assert!(machinery);
}

// ------------------------------------------------------------ metrics

#[test]
fn criterion_6_metric_correctness() {
    let _guard = serial();
    let a = ImageTensor::constant(3, 32, 32, 0.5).unwrap();
    let b = ImageTensor::constant(3, 32, 32, 0.6).unwrap();
    let p = psnr(&a, &b).unwrap();
    let psnr_ok = (p - 20.0).abs() < PSNR_OFFSET_TOL;

    let mut ssim_err = 0.0f64;
    for (x, y) in [(0.5, 0.6), (0.2, 0.9), (0.0, 1.0), (0.7, 0.7), (0.05, 0.3)] {
        let s = ssim(
            &ImageTensor::constant(1, 24, 24, x).unwrap(),
            &ImageTensor::constant(1, 24, 24, y).unwrap(),
        )
        .unwrap();
        let c1 = SSIM_K1 * SSIM_K1;
        let closed = (2.0 * x * y + c1) / (x * x + y * y + c1);
        ssim_err = ssim_err.max((s - closed).abs());
    }
    let ssim_ok = ssim_err < SSIM_CLOSED_FORM_TOL;

    let sigmas = [5.0, 15.0, 25.0, 50.0];
    let mut monotone = 0;
    for seed in MONOTONE_SEEDS {
        let clean = synthetic_scene(64, 64, seed + 40).unwrap();
        let scores: Vec<f64> = sigmas
            .iter()
            .map(|&s| psnr(&add_gaussian_noise(&clean, s, seed).unwrap(), &clean).unwrap())
            .collect();
        if scores.windows(2).all(|w| w[0] > w[1]) {
            monotone += 1;
        }
    }
    let mono_ok = monotone * 2 > MONOTONE_SEEDS.len();
    let pass = psnr_ok && ssim_ok && mono_ok;
    verdict(
        6,
        "metric correctness",
        pass,
        &format!(
            "offset PSNR {p:.12} dB, SSIM closed-form error {ssim_err:.2e}, PSNR decreasing in sigma for {monotone}/{} seeds",
            MONOTONE_SEEDS.len()
        ),
    );
    assert!(pass);
}

// ------------------------------------------------------------ degradations

fn std_dev(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

#[test]
fn criterion_7_degradation_statistics() {
    let _guard = serial();
    let gray = ImageTensor::constant(1, 512, 512, 0.5).unwrap();
    let mut noise_ok = true;
    let mut parts = Vec::new();
    for sigma in [15.0, 25.0, 50.0] {
        let noisy = add_gaussian_noise(&gray, sigma, sigma as u64).unwrap();
        let measured = std_dev(noisy.data()) * 255.0;
        let rel = measured / sigma - 1.0;
        noise_ok &= rel.abs() <= NOISE_STD_REL_TOL;
        parts.push(format!("sigma {sigma}: {measured:.3} ({:+.2}%)", rel * 100.0));
    }

    let flat = ImageTensor::constant(3, 8, 8, 0.4).unwrap();
    let haze = apply_haze(&flat, 0.5, 0.8).unwrap();
    let haze_expect = 0.4 * 0.5 + 0.8 * 0.5;
    let low = apply_low_light(&ImageTensor::constant(3, 8, 8, 0.25).unwrap(), 2.0, 1.0).unwrap();
    let low_expect = 0.0625;
    let spec = CompositeSpec::new(vec![
        DegradationSpec::new(Degradation::LowLight { gamma: 2.0, gain: 1.0 }, 0),
        DegradationSpec::new(Degradation::Haze { transmission: 0.6, airlight: 0.65 }, 0),
    ])
    .unwrap();
    let comp = compose(&ImageTensor::constant(3, 8, 8, 0.5).unwrap(), &spec).unwrap();
    let comp_expect = 0.25 * 0.6 + 0.65 * 0.4;
    let dev = |img: &ImageTensor, v: f64| img.data().iter().map(|x| (x - v).abs()).fold(0.0, f64::max);
    let closed = dev(&haze, haze_expect).max(dev(&low, low_expect)).max(dev(&comp, comp_expect));
    let closed_ok = closed <= CLOSED_FORM_TOL;
    let pass = noise_ok && closed_ok;
    verdict(
        7,
        "degradation statistics",
        pass,
        &format!("{}; haze/low-light/composite closed-form error {closed:.1e}", parts.join(", ")),
    );
    assert!(pass);
}

// ------------------------------------------------------------ persistence

#[test]
fn criterion_8_determinism_and_persistence() {
    let _guard = serial();
    let mut cfg = desk_scale_preset();
    cfg.crop_size = 16;
    cfg.optimizer.total_iterations = 4;
    cfg.checkpoint_every = 2;
    let set = noise_pairs(3, 24, 25.0, 5);
    let providers = Providers::stub(&cfg);

    let (state, _) = train_in_memory(&cfg, &set, &providers).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.bin");
    save_checkpoint(&state, &path).unwrap();
    let loaded = load_checkpoint(&path).unwrap();
    let bytes = checkpoint_bytes(&state);
    let roundtrip = bytes == checkpoint_bytes(&loaded)
        && bytes == std::fs::read(&path).unwrap()
        && checkpoint_bytes(&checkpoint_from_bytes(&bytes).unwrap()) == bytes
        && state
            .model
            .params()
            .iter()
            .zip(loaded.model.params().iter())
            .all(|(a, b)| a.1 == b.1 && a.2.data().iter().zip(b.2.data()).all(|(x, y)| x.to_bits() == y.to_bits()));

    let whole = tempfile::tempdir().unwrap();
    let split = tempfile::tempdir().unwrap();
    let quiet = LoopOptions::default();
    let end_a = train_loop(&cfg, &set, &providers, whole.path(), &quiet).unwrap();
    let mid = train_loop(
        &cfg,
        &set,
        &providers,
        split.path(),
        &LoopOptions {
            stop_at: Some(2),
            ..LoopOptions::default()
        },
    )
    .unwrap();
    let end_b = train_loop(
        &cfg,
        &set,
        &providers,
        split.path(),
        &LoopOptions {
            resume: Some(mid),
            ..LoopOptions::default()
        },
    )
    .unwrap();
    let curve = |d: &std::path::Path| std::fs::read_to_string(d.join(LOSS_CURVE_FILE)).unwrap();
    let resumed = std::fs::read(&end_a).unwrap() == std::fs::read(&end_b).unwrap()
        && curve(whole.path()) == curve(split.path())
        && checkpoint_bytes(&load_checkpoint(&end_a).unwrap()) == checkpoint_bytes(&state);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut dropout_ok = true;
    for seed in 0..50 {
        let (h, w) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let ms = SemanticMaskSet::new(h, w, rand_partition(&mut rng, h * w)).unwrap();
        let out = mask_dropout(&ms, 1.0, seed).unwrap();
        dropout_ok &= out.len() == 1 && out.masks()[0].iter().all(|&b| b);
    }
    let pass = roundtrip && resumed && dropout_ok;
    verdict(
        8,
        "determinism and persistence",
        pass,
        &format!(
            "checkpoint round trip {roundtrip}, resume bit-exact {resumed}, rate-1 dropout single background {dropout_ok}"
        ),
    );
    assert!(pass);
}
