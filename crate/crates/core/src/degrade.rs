//! Seeded synthetic degradation operators and paired-dataset generation.
//!
//! Each operator is a simple parametric model whose output is clamped to
//! `[0, 1]`: additive Gaussian noise, the atmospheric scattering model for
//! haze, additive line streaks for rain, a normalized line kernel for motion
//! blur, a gamma/gain curve for low light, and additive disc sprites for snow.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::kernels::reflect_index;
use crate::manifest::{Manifest, ManifestRow};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Degradation {
    /// `sigma` on the 0–255 scale.
    GaussianNoise { sigma: f64 },
    Haze { transmission: f64, airlight: f64 },
    Rain { density: f64, length: usize, angle: f64 },
    MotionBlur { length: usize, angle: f64 },
    LowLight { gamma: f64, gain: f64 },
    Snow { density: f64, size: f64 },
}

impl Degradation {
    pub fn tag(&self) -> &'static str {
        match self {
            Degradation::GaussianNoise { .. } => "noise",
            Degradation::Haze { .. } => "haze",
            Degradation::Rain { .. } => "rain",
            Degradation::MotionBlur { .. } => "blur",
            Degradation::LowLight { .. } => "lowlight",
            Degradation::Snow { .. } => "snow",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationSpec {
    #[serde(flatten)]
    pub op: Degradation,
    #[serde(default)]
    pub seed: u64,
}

impl DegradationSpec {
    pub fn new(op: Degradation, seed: u64) -> Self {
        DegradationSpec { op, seed }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Parameter(m));
        match self.op {
            Degradation::GaussianNoise { sigma } if !(sigma >= 0.0) => fail(format!("noise sigma {sigma} < 0")),
            Degradation::Haze { transmission, airlight }
                if !(0.0..=1.0).contains(&transmission) || !(0.0..=1.0).contains(&airlight) =>
            {
                fail(format!("haze t={transmission}, A={airlight} must lie in [0, 1]"))
            }
            Degradation::Rain { density, length, .. } if !(0.0..=1.0).contains(&density) || length == 0 => {
                fail(format!("rain density {density} must be in [0, 1] and length {length} >= 1"))
            }
            Degradation::MotionBlur { length: 0, .. } => fail("blur length must be >= 1".into()),
            Degradation::LowLight { gamma, gain } if !(gamma > 0.0) || !(gain > 0.0) => {
                fail(format!("low-light gamma {gamma} and gain {gain} must be positive"))
            }
            Degradation::Snow { density, size } if !(0.0..=1.0).contains(&density) || !(size >= 0.0) => {
                fail(format!("snow density {density} must be in [0, 1] and size {size} >= 0"))
            }
            _ => Ok(()),
        }
    }

    pub fn apply(&self, img: &ImageTensor) -> Result<ImageTensor> {
        self.apply_with_seed(img, self.seed)
    }

    fn apply_with_seed(&self, img: &ImageTensor, seed: u64) -> Result<ImageTensor> {
        self.validate()?;
        match self.op {
            Degradation::GaussianNoise { sigma } => add_gaussian_noise(img, sigma, seed),
            Degradation::Haze { transmission, airlight } => apply_haze(img, transmission, airlight),
            Degradation::Rain { density, length, angle } => apply_rain(img, density, length, angle, seed),
            Degradation::MotionBlur { length, angle } => apply_motion_blur(img, length, angle),
            Degradation::LowLight { gamma, gain } => apply_low_light(img, gamma, gain),
            Degradation::Snow { density, size } => apply_snow(img, density, size, seed),
        }
    }
}

/// Ordered stages applied one after another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeSpec {
    pub stages: Vec<DegradationSpec>,
}

impl CompositeSpec {
    pub fn new(stages: Vec<DegradationSpec>) -> Result<Self> {
        let c = CompositeSpec { stages };
        c.validate()?;
        Ok(c)
    }

    pub fn single(spec: DegradationSpec) -> Self {
        CompositeSpec { stages: vec![spec] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::Parameter("composite spec needs at least one stage".into()));
        }
        for (index, s) in self.stages.iter().enumerate() {
            s.validate().map_err(|e| Error::Stage {
                index,
                source: Box::new(e),
            })?;
        }
        Ok(())
    }

    /// Stage kinds joined with `+`, e.g. `haze+rain`.
    pub fn tag(&self) -> String {
        self.stages.iter().map(|s| s.op.tag()).collect::<Vec<_>>().join("+")
    }
}

pub fn compose(img: &ImageTensor, spec: &CompositeSpec) -> Result<ImageTensor> {
    compose_with_offset(img, spec, 0)
}

/// As [`compose`], with every stage seed XOR-ed with `offset`.
fn compose_with_offset(img: &ImageTensor, spec: &CompositeSpec, offset: u64) -> Result<ImageTensor> {
    if spec.stages.is_empty() {
        return Err(Error::Parameter("composite spec needs at least one stage".into()));
    }
    let mut cur = img.clone();
    for (index, stage) in spec.stages.iter().enumerate() {
        cur = stage
            .apply_with_seed(&cur, stage.seed ^ offset)
            .map_err(|e| Error::Stage {
                index,
                source: Box::new(e),
            })?;
    }
    Ok(cur)
}

/// `clamp(img + n / 255)` with `n ~ N(0, sigma^2)` drawn from `seed`.
pub fn add_gaussian_noise(img: &ImageTensor, sigma: f64, seed: u64) -> Result<ImageTensor> {
    if !(sigma >= 0.0) {
        return Err(Error::Parameter(format!("noise sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma / 255.0).expect("finite sigma");
    let mut out = img.tensor().clone();
    for v in out.data_mut() {
        *v += normal.sample(&mut rng);
    }
    ImageTensor::from_clamped(out)
}

/// Atmospheric scattering: `img * t + A * (1 - t)`.
pub fn apply_haze(img: &ImageTensor, transmission: f64, airlight: f64) -> Result<ImageTensor> {
    if !(0.0..=1.0).contains(&transmission) || !(0.0..=1.0).contains(&airlight) {
        return Err(Error::Parameter(format!(
            "haze t={transmission}, A={airlight} must lie in [0, 1]"
        )));
    }
    let out = img.tensor().map(|v| v * transmission + airlight * (1.0 - transmission));
    ImageTensor::from_clamped(out)
}

/// `clamp(gain * img^gamma)`.
pub fn apply_low_light(img: &ImageTensor, gamma: f64, gain: f64) -> Result<ImageTensor> {
    if !(gamma > 0.0) || !(gain > 0.0) {
        return Err(Error::Parameter(format!(
            "low-light gamma {gamma} and gain {gain} must be positive"
        )));
    }
    let out = img.tensor().map(|v| gain * v.powf(gamma));
    ImageTensor::from_clamped(out)
}

/// Normalized line kernel of `length` taps at `angle` degrees, bilinearly
/// splatted onto a square grid. Returns `(kernel, side)`.
pub fn motion_kernel(length: usize, angle_deg: f64) -> (Vec<f64>, usize) {
    if length == 1 {
        return (vec![1.0], 1);
    }
    let half = (length as f64 - 1.0) / 2.0;
    let radius = half.ceil() as usize + 1;
    let side = 2 * radius + 1;
    let mut k = vec![0.0; side * side];
    let (s, c) = angle_deg.to_radians().sin_cos();
    for t in 0..length {
        let d = t as f64 - half;
        let x = radius as f64 + d * c;
        let y = radius as f64 - d * s;
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        for (dy, wy) in [(0usize, 1.0 - fy), (1, fy)] {
            for (dx, wx) in [(0usize, 1.0 - fx), (1, fx)] {
                let w = wy * wx;
                if w > 1e-12 {
                    let (yy, xx) = (y0 as usize + dy, x0 as usize + dx);
                    k[yy * side + xx] += w;
                }
            }
        }
    }
    let total: f64 = k.iter().sum();
    for v in &mut k {
        *v /= total;
    }
    (k, side)
}

/// Convolution with a normalized line kernel, reflect padded.
pub fn apply_motion_blur(img: &ImageTensor, length: usize, angle_deg: f64) -> Result<ImageTensor> {
    if length == 0 {
        return Err(Error::Parameter("blur length must be >= 1".into()));
    }
    if length == 1 {
        return Ok(img.clone());
    }
    let (k, side) = motion_kernel(length, angle_deg);
    let r = (side / 2) as isize;
    let [c, h, w] = img.shape();
    let src = img.data();
    let taps: Vec<(isize, isize, f64)> = (0..side * side)
        .filter(|&i| k[i] != 0.0)
        .map(|i| ((i / side) as isize - r, (i % side) as isize - r, k[i]))
        .collect();
    let mut out = vec![0.0; src.len()];
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for &(dy, dx, kv) in &taps {
                    let sy = reflect_index(y as isize + dy, h);
                    let sx = reflect_index(x as isize + dx, w);
                    acc += kv * src[(ch * h + sy) * w + sx];
                }
                out[(ch * h + y) * w + x] = acc;
            }
        }
    }
    ImageTensor::from_clamped(Tensor::from_parts(vec![c, h, w], out))
}

/// Additive bright streaks: each pixel seeds a streak with probability
/// `density`; streak pixels along the line get the streak's intensity.
pub fn apply_rain(img: &ImageTensor, density: f64, length: usize, angle_deg: f64, seed: u64) -> Result<ImageTensor> {
    if !(0.0..=1.0).contains(&density) || length == 0 {
        return Err(Error::Parameter(format!(
            "rain density {density} must be in [0, 1] and length {length} >= 1"
        )));
    }
    if density == 0.0 {
        return Ok(img.clone());
    }
    let [c, h, w] = img.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layer = vec![0.0f64; h * w];
    let (s, co) = angle_deg.to_radians().sin_cos();
    for y in 0..h {
        for x in 0..w {
            if rng.random::<f64>() >= density {
                continue;
            }
            let intensity = rng.random_range(0.3..0.7);
            for t in 0..length {
                let px = (x as f64 + t as f64 * s).round() as isize;
                let py = (y as f64 + t as f64 * co).round() as isize;
                if px < 0 || py < 0 || px >= w as isize || py >= h as isize {
                    break;
                }
                let i = py as usize * w + px as usize;
                layer[i] = layer[i].max(intensity);
            }
        }
    }
    let mut out = img.tensor().clone();
    for ch in 0..c {
        for (v, &l) in out.data_mut()[ch * h * w..(ch + 1) * h * w].iter_mut().zip(&layer) {
            *v += l;
        }
    }
    ImageTensor::from_clamped(out)
}

/// Pixel offsets of a disc sprite of the given radius.
pub fn snow_sprite(size: f64) -> Vec<(isize, isize)> {
    let r = size.floor() as isize;
    let mut pts = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if ((dx * dx + dy * dy) as f64) <= size * size {
                pts.push((dy, dx));
            }
        }
    }
    pts
}

/// Additive bright disc sprites centred on pixels chosen with probability `density`.
pub fn apply_snow(img: &ImageTensor, density: f64, size: f64, seed: u64) -> Result<ImageTensor> {
    if !(0.0..=1.0).contains(&density) || !(size >= 0.0) {
        return Err(Error::Parameter(format!(
            "snow density {density} must be in [0, 1] and size {size} >= 0"
        )));
    }
    if density == 0.0 {
        return Ok(img.clone());
    }
    let [c, h, w] = img.shape();
    let sprite = snow_sprite(size);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layer = vec![0.0f64; h * w];
    for y in 0..h {
        for x in 0..w {
            if rng.random::<f64>() >= density {
                continue;
            }
            let intensity = rng.random_range(0.5..0.9);
            for &(dy, dx) in &sprite {
                let (py, px) = (y as isize + dy, x as isize + dx);
                if px < 0 || py < 0 || px >= w as isize || py >= h as isize {
                    continue;
                }
                let i = py as usize * w + px as usize;
                layer[i] = layer[i].max(intensity);
            }
        }
    }
    let mut out = img.tensor().clone();
    for ch in 0..c {
        for (v, &l) in out.data_mut()[ch * h * w..(ch + 1) * h * w].iter_mut().zip(&layer) {
            *v += l;
        }
    }
    ImageTensor::from_clamped(out)
}

/// A piecewise-smooth RGB test scene: a linear colour gradient with a few
/// flat-coloured rectangles and discs on top.
pub fn synthetic_scene(height: usize, width: usize, seed: u64) -> Result<ImageTensor> {
    if height == 0 || width == 0 {
        return Err(Error::Parameter("scene must have a positive size".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corner: [[f64; 3]; 2] = [
        [rng.random_range(0.1..0.9), rng.random_range(0.1..0.9), rng.random_range(0.1..0.9)],
        [rng.random_range(0.1..0.9), rng.random_range(0.1..0.9), rng.random_range(0.1..0.9)],
    ];
    let plane = height * width;
    let mut data = vec![0.0; 3 * plane];
    for y in 0..height {
        for x in 0..width {
            let t = (x + y) as f64 / (height + width).max(2) as f64;
            for c in 0..3 {
                data[c * plane + y * width + x] = corner[0][c] * (1.0 - t) + corner[1][c] * t;
            }
        }
    }
    let shapes = rng.random_range(3..=6);
    for _ in 0..shapes {
        let colour = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
        let cy = rng.random_range(0.0..height as f64);
        let cx = rng.random_range(0.0..width as f64);
        let ry = rng.random_range(0.1..0.35) * height as f64;
        let rx = rng.random_range(0.1..0.35) * width as f64;
        let disc = rng.random::<bool>();
        for y in 0..height {
            for x in 0..width {
                let dy = (y as f64 - cy) / ry;
                let dx = (x as f64 - cx) / rx;
                let inside = if disc {
                    dy * dy + dx * dx <= 1.0
                } else {
                    dy.abs() <= 1.0 && dx.abs() <= 1.0
                };
                if inside {
                    for c in 0..3 {
                        data[c * plane + y * width + x] = colour[c];
                    }
                }
            }
        }
    }
    ImageTensor::from_vec(3, height, width, data)
}

/// Degradation recipe file: a list of composites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecFile {
    pub composites: Vec<CompositeSpec>,
}

impl SpecFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let f: SpecFile = toml::from_str(&text).map_err(|e| Error::config("composites", e.message().to_string()))?;
        for c in &f.composites {
            c.validate()?;
        }
        Ok(f)
    }
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg" | "bmp"))
        })
        .collect();
    paths.sort();
    Ok(paths)
}

/// Writes `count` degraded/clean pairs under `out_dir` plus `manifest.tsv`.
/// Pair `i` uses clean image `i mod n` and composite `(i / n) mod k`, with every
/// stage seed XOR-ed with `seed ^ i`.
pub fn generate_dataset(
    clean_dir: &Path,
    out_dir: &Path,
    specs: &[CompositeSpec],
    count: usize,
    seed: u64,
) -> Result<Manifest> {
    if specs.is_empty() {
        return Err(Error::Dataset("no degradation specs given".into()));
    }
    for s in specs {
        s.validate()?;
    }
    let clean_paths = list_images(clean_dir)?;
    if clean_paths.is_empty() {
        return Err(Error::Dataset(format!("no readable images in {}", clean_dir.display())));
    }
    let clean: Vec<ImageTensor> = clean_paths
        .iter()
        .map(|p| ImageTensor::load_png(p))
        .collect::<Result<_>>()?;
    for sub in ["degraded", "clean"] {
        let d = out_dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let mut rows = Vec::with_capacity(count);
    for i in 0..count {
        let ci = i % clean.len();
        let spec = &specs[(i / clean.len()) % specs.len()];
        let degraded = compose_with_offset(&clean[ci], spec, seed ^ i as u64)?;
        let tag = spec.tag();
        let stem = clean_paths[ci]
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("img")
            .to_string();
        let dpath = PathBuf::from("degraded").join(format!("{i:05}_{stem}_{tag}.png"));
        let cpath = PathBuf::from("clean").join(format!("{i:05}_{stem}.png"));
        degraded.save_png(&out_dir.join(&dpath))?;
        clean[ci].save_png(&out_dir.join(&cpath))?;
        rows.push(ManifestRow {
            degraded: dpath,
            clean: cpath,
            tag,
        });
    }
    let manifest = Manifest::new(out_dir.to_path_buf(), rows);
    manifest.save(&out_dir.join("manifest.tsv"))?;
    Ok(manifest)
}
