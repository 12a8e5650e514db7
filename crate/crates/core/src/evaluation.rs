//! Full-reference metrics, per-tag benchmark reports and the ablation runners.
//!
//! PSNR uses a peak of 1 on the `[0, 1]` scale. SSIM runs on the luma plane
//! with an 11×11 Gaussian window (σ = 1.5), `k1 = 0.01`, `k2 = 0.03`, and
//! averages the index over windows that lie fully inside the image.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::backbone::Model;
use crate::config::{Components, ModelConfig, PipelineOrder};
use crate::error::{Error, Result};
use crate::guidance::{GuidanceAssembler, Mode, Providers};
use crate::image::ImageTensor;
use crate::training::{train_in_memory, PairSet};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn same_shape(a: &ImageTensor, b: &ImageTensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("metric inputs differ: {:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

/// `10·log10(1 / MSE)`; identical images give `f64::INFINITY`.
pub fn psnr(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    same_shape(a, b)?;
    let n = a.data().len() as f64;
    let mse = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let w: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let d = i as f64 - r;
            (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering of an `h × w` plane.
fn filter_valid(x: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for xo in 0..ow {
            rows[y * ow + xo] = k.iter().enumerate().map(|(i, kv)| kv * x[y * w + xo + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for yo in 0..oh {
        for xo in 0..ow {
            out[yo * ow + xo] = k.iter().enumerate().map(|(i, kv)| kv * rows[(yo + i) * ow + xo]).sum();
        }
    }
    out
}

pub fn ssim(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    same_shape(a, b)?;
    let (h, w) = (a.height(), a.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::Metric(format!(
            "image {h}×{w} is smaller than the {SSIM_WINDOW}×{SSIM_WINDOW} SSIM window"
        )));
    }
    let (x, y) = (a.luma(), b.luma());
    let k = gaussian_window();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
    let [mx, my, sxx, syy, sxy] = [&x, &y, &xx, &yy, &xy].map(|p| filter_valid(p, h, w, &k));
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mut total = 0.0;
    for i in 0..mx.len() {
        let (ux, uy) = (mx[i], my[i]);
        let vx = sxx[i] - ux * ux;
        let vy = syy[i] - uy * uy;
        let cov = sxy[i] - ux * uy;
        total += ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
    }
    Ok(total / mx.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageMetric {
    pub id: String,
    pub tag: String,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub tag: String,
    pub images: usize,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
    /// Arithmetic means of the row values.
    pub averages: (f64, f64),
    pub images: Vec<ImageMetric>,
    pub footer: Vec<String>,
}

impl MetricReport {
    /// Groups per-image metrics by tag. Tags listed in `expected_tags` without
    /// any image are left out of the rows and mentioned in the footer.
    pub fn from_images(mut images: Vec<ImageMetric>, expected_tags: &[String]) -> Self {
        images.sort_by(|a, b| (&a.tag, &a.id).cmp(&(&b.tag, &b.id)));
        let mut groups: BTreeMap<&str, Vec<&ImageMetric>> = BTreeMap::new();
        for m in &images {
            groups.entry(m.tag.as_str()).or_default().push(m);
        }
        let rows: Vec<MetricRow> = groups
            .iter()
            .map(|(tag, ms)| MetricRow {
                tag: tag.to_string(),
                images: ms.len(),
                psnr: ms.iter().map(|m| m.psnr).sum::<f64>() / ms.len() as f64,
                ssim: ms.iter().map(|m| m.ssim).sum::<f64>() / ms.len() as f64,
            })
            .collect();
        let footer = expected_tags
            .iter()
            .filter(|t| !groups.contains_key(t.as_str()))
            .map(|t| format!("tag `{t}` has no images and is omitted"))
            .collect();
        let n = rows.len().max(1) as f64;
        let averages = (
            rows.iter().map(|r| r.psnr).sum::<f64>() / n,
            rows.iter().map(|r| r.ssim).sum::<f64>() / n,
        );
        MetricReport {
            rows,
            averages,
            images,
            footer,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<24} {:>7} {:>10} {:>8}", "tag", "images", "PSNR(dB)", "SSIM");
        for r in &self.rows {
            let _ = writeln!(s, "{:<24} {:>7} {:>10.3} {:>8.4}", r.tag, r.images, r.psnr, r.ssim);
        }
        let _ = writeln!(
            s,
            "{:<24} {:>7} {:>10.3} {:>8.4}",
            "average", "", self.averages.0, self.averages.1
        );
        for f in &self.footer {
            let _ = writeln!(s, "note: {f}");
        }
        s
    }

    /// One JSON record per image, per tag row and for the averages.
    pub fn to_ndjson(&self) -> String {
        let mut s = String::new();
        for m in &self.images {
            let _ = writeln!(
                s,
                "{{\"kind\":\"image\",\"id\":{},\"tag\":{},\"psnr\":{},\"ssim\":{}}}",
                json_str(&m.id),
                json_str(&m.tag),
                json_num(m.psnr),
                json_num(m.ssim)
            );
        }
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{{\"kind\":\"row\",\"tag\":{},\"images\":{},\"psnr\":{},\"ssim\":{}}}",
                json_str(&r.tag),
                r.images,
                json_num(r.psnr),
                json_num(r.ssim)
            );
        }
        let _ = writeln!(
            s,
            "{{\"kind\":\"average\",\"psnr\":{},\"ssim\":{}}}",
            json_num(self.averages.0),
            json_num(self.averages.1)
        );
        s
    }
}

pub(crate) fn json_str(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// JSON has no infinity; an exact match is written as the string `"inf"`.
pub(crate) fn json_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        format!("\"{v}\"")
    }
}

/// Restores every image of `set` at full size with mask dropout disabled and
/// scores it against its clean reference.
pub fn evaluate(model: &Model, set: &PairSet, providers: &Providers, expected_tags: &[String]) -> Result<MetricReport> {
    if set.is_empty() {
        return Err(Error::Dataset("evaluation manifest is empty".into()));
    }
    let assembler = GuidanceAssembler::new(providers, model.config());
    let mut images = Vec::with_capacity(set.len());
    for i in 0..set.len() {
        let id = set.id(i);
        let wrap = |e: Error| Error::Evaluation {
            id: id.to_string(),
            message: e.to_string(),
        };
        let bundle = assembler.assemble(id, set.degraded(i), Mode::Eval, 0).map_err(wrap)?;
        let restored = model.forward(set.degraded(i), &bundle).map_err(wrap)?;
        images.push(ImageMetric {
            id: id.to_string(),
            tag: set.tag(i).to_string(),
            psnr: psnr(&restored, set.clean(i))?,
            ssim: ssim(&restored, set.clean(i)).map_err(wrap)?,
        });
    }
    Ok(MetricReport::from_images(images, expected_tags))
}

/// Scores the degraded inputs themselves (the "no restoration" baseline).
pub fn input_baseline(set: &PairSet) -> Result<MetricReport> {
    let images = (0..set.len())
        .map(|i| {
            Ok(ImageMetric {
                id: set.id(i).to_string(),
                tag: set.tag(i).to_string(),
                psnr: psnr(set.degraded(i), set.clean(i))?,
                ssim: ssim(set.degraded(i), set.clean(i))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport::from_images(images, &[]))
}

/// Trains `config` in memory on `set` and evaluates on the same set.
pub fn train_and_evaluate(config: &ModelConfig, set: &PairSet, providers: &Providers) -> Result<MetricReport> {
    let (state, _) = train_in_memory(config, set, providers)?;
    evaluate(&state.model, set, providers, &[])
}

/// One configuration of an ablation table.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub label: String,
    /// Column values describing the variant, e.g. checkmarks.
    pub columns: Vec<String>,
    /// `(psnr, ssim)` measured here, or the error that stopped the row.
    pub result: std::result::Result<(f64, f64), String>,
    /// Full-scale reference numbers for the same variant; not comparable.
    pub reference: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub title: String,
    pub headers: Vec<String>,
    pub rows: Vec<AblationRow>,
}

impl ComparisonReport {
    pub fn row(&self, label: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.title);
        let mut head = format!("{:<18}", "variant");
        for h in &self.headers {
            let _ = write!(head, " {h:>15}");
        }
        let _ = writeln!(
            s,
            "{head} {:>10} {:>8} | {:>24}",
            "PSNR(dB)", "SSIM", "reference (not comparable)"
        );
        for r in &self.rows {
            let mut line = format!("{:<18}", r.label);
            for c in &r.columns {
                let _ = write!(line, " {c:>15}");
            }
            match &r.result {
                Ok((p, q)) => {
                    let _ = write!(line, " {p:>10.3} {q:>8.4}");
                }
                Err(e) => {
                    let _ = write!(line, " {:>19}", format!("failed: {e}"));
                }
            }
            match r.reference {
                Some((p, q)) => {
                    let _ = writeln!(s, "{line} | {:>15.2} / {q:.3}", p);
                }
                None => {
                    let _ = writeln!(s, "{line} | {:>24}", "-");
                }
            }
        }
        let _ = writeln!(
            s,
            "note: measured values come from desk-scale runs on the given data; reference values are full-scale numbers shown for orientation only."
        );
        s
    }

    pub fn to_ndjson(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let cols: Vec<String> = self
                .headers
                .iter()
                .zip(&r.columns)
                .map(|(h, c)| format!("{}:{}", json_str(h), json_str(c)))
                .collect();
            let measured = match &r.result {
                Ok((p, q)) => format!("\"psnr\":{},\"ssim\":{}", json_num(*p), json_num(*q)),
                Err(e) => format!("\"error\":{}", json_str(e)),
            };
            let reference = match r.reference {
                Some((p, q)) => format!("{{\"psnr\":{p},\"ssim\":{q},\"comparable\":false}}"),
                None => "null".into(),
            };
            let _ = writeln!(
                s,
                "{{\"table\":{},\"label\":{},\"columns\":{{{}}},{measured},\"reference\":{reference}}}",
                json_str(&self.title),
                json_str(&r.label),
                cols.join(",")
            );
        }
        s
    }
}

/// Full-scale reference numbers for the three studied orders.
pub const ORDER_REFERENCE: [(PipelineOrder, f64, f64); 3] = [
    (PipelineOrder::WHERE_WHAT_HOW, 37.89, 0.982),
    (PipelineOrder::WHAT_HOW_WHERE, 38.04, 0.983),
    (PipelineOrder::HOW_WHERE_WHAT, 38.21, 0.986),
];

pub const DEFAULT_ORDERS: [PipelineOrder; 3] = [
    PipelineOrder::WHERE_WHAT_HOW,
    PipelineOrder::WHAT_HOW_WHERE,
    PipelineOrder::HOW_WHERE_WHAT,
];

/// Trains and scores one model per order with the base seed and data.
/// A failing row records its error and the remaining rows still run.
pub fn run_order_ablation(
    base: &ModelConfig,
    set: &PairSet,
    providers: &Providers,
    orders: &[PipelineOrder],
) -> Result<ComparisonReport> {
    if orders.is_empty() {
        return Err(Error::config("orders", "at least one perception order is required"));
    }
    let rows = orders
        .iter()
        .map(|&order| {
            let cfg = base.clone().with_perception_order(order);
            let result = train_and_evaluate(&cfg, set, providers)
                .map(|r| r.averages)
                .map_err(|e| e.to_string());
            let mut label = order.label();
            if order == PipelineOrder::HOW_WHERE_WHAT {
                label.push_str(" (ours)");
            }
            AblationRow {
                label,
                columns: order.stages().iter().map(|p| p.label().to_string()).collect(),
                result,
                reference: ORDER_REFERENCE
                    .iter()
                    .find(|(o, _, _)| *o == order)
                    .map(|&(_, p, s)| (p, s)),
            }
        })
        .collect();
    Ok(ComparisonReport {
        title: "perception order ablation".into(),
        headers: vec!["shallow".into(), "middle".into(), "deep".into()],
        rows,
    })
}

/// A labeled component switch pattern with its reference numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridEntry {
    pub label: &'static str,
    pub components: Components,
    pub reference: (f64, f64),
}

const fn on(iqa: bool, sgu: bool, ti: bool, icrm: bool) -> Components {
    Components { iqa, sgu, ti, icrm }
}

/// The eight studied variants; the last row enables everything.
pub const COMPONENT_GRID: [GridEntry; 8] = [
    GridEntry { label: "(a)", components: on(true, false, false, true), reference: (37.57, 0.980) },
    GridEntry { label: "(b)", components: on(false, true, false, true), reference: (37.43, 0.978) },
    GridEntry { label: "(c)", components: on(false, false, true, true), reference: (37.52, 0.980) },
    GridEntry { label: "(d)", components: on(true, true, false, true), reference: (38.05, 0.985) },
    GridEntry { label: "(e)", components: on(true, false, true, true), reference: (37.93, 0.984) },
    GridEntry { label: "(f)", components: on(false, true, true, true), reference: (37.87, 0.984) },
    GridEntry { label: "(g)", components: on(true, true, true, false), reference: (38.03, 0.985) },
    GridEntry { label: "Ours", components: on(true, true, true, true), reference: (38.21, 0.986) },
];

/// `base` with the component switches replaced; the all-off pattern is rejected.
pub fn component_variant(base: &ModelConfig, components: Components) -> Result<ModelConfig> {
    let mut cfg = base.clone();
    cfg.components = components;
    cfg.validate()?;
    Ok(cfg)
}

fn mark(b: bool) -> String {
    if b { "yes" } else { "-" }.to_string()
}

/// Trains and scores every variant of [`COMPONENT_GRID`] with the base seed and data.
pub fn run_component_ablation(base: &ModelConfig, set: &PairSet, providers: &Providers) -> Result<ComparisonReport> {
    base.validate()?;
    let rows = COMPONENT_GRID
        .iter()
        .map(|entry| {
            let c = entry.components;
            let result = component_variant(base, c)
                .and_then(|cfg| train_and_evaluate(&cfg, set, providers))
                .map(|r| r.averages)
                .map_err(|e| e.to_string());
            AblationRow {
                label: entry.label.to_string(),
                columns: vec![mark(c.iqa), mark(c.sgu), mark(c.ti), mark(c.icrm)],
                result,
                reference: Some(entry.reference),
            }
        })
        .collect();
    Ok(ComparisonReport {
        title: "component ablation".into(),
        headers: vec!["quality".into(), "semantic".into(), "degradation".into(), "consistency".into()],
        rows,
    })
}
