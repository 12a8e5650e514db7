//! Semantic region masks, their resolution into an exact partition, and mask dropout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{CropGeometry, ImageTensor};

/// How pixels left uncovered (or covered by dropped masks) are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackgroundPolicy {
    /// Uncovered pixels form one trailing background segment.
    #[default]
    MergeIntoBackground,
}

/// `N_m` binary `[H, W]` masks. Masks may overlap (as raw segmentation output
/// does); [`SemanticMaskSet::labels`] resolves them into a partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticMaskSet {
    height: usize,
    width: usize,
    masks: Vec<Vec<bool>>,
    background_policy: BackgroundPolicy,
}

impl SemanticMaskSet {
    pub fn new(height: usize, width: usize, masks: Vec<Vec<bool>>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Validation("mask set needs a non-empty spatial extent".into()));
        }
        for (i, m) in masks.iter().enumerate() {
            if m.len() != height * width {
                return Err(Error::Shape(format!(
                    "mask {i} has {} pixels, expected {}",
                    m.len(),
                    height * width
                )));
            }
            if !m.iter().any(|&b| b) {
                return Err(Error::Validation(format!("mask {i} has no active pixel")));
            }
        }
        Ok(SemanticMaskSet {
            height,
            width,
            masks,
            background_policy: BackgroundPolicy::MergeIntoBackground,
        })
    }

    /// Builds one mask per distinct label in a label map.
    pub fn from_labels(height: usize, width: usize, labels: &[usize]) -> Result<Self> {
        let n = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut masks = vec![vec![false; height * width]; n];
        for (i, &l) in labels.iter().enumerate() {
            masks[l][i] = true;
        }
        masks.retain(|m| m.iter().any(|&b| b));
        Self::new(height, width, masks)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn masks(&self) -> &[Vec<bool>] {
        &self.masks
    }

    pub fn background_policy(&self) -> BackgroundPolicy {
        self.background_policy
    }

    /// True when every pixel lies in exactly one mask.
    pub fn is_partition(&self) -> bool {
        (0..self.height * self.width).all(|p| self.masks.iter().filter(|m| m[p]).count() == 1)
    }

    /// Per pixel, the index of the smallest-area mask containing it (ties go
    /// to the lower index), or `len()` for uncovered pixels.
    fn winners(&self) -> Vec<usize> {
        let areas: Vec<usize> = self.masks.iter().map(|m| m.iter().filter(|&&b| b).count()).collect();
        let n = self.masks.len();
        (0..self.height * self.width)
            .map(|p| {
                let mut best = n;
                for (i, m) in self.masks.iter().enumerate() {
                    if m[p] && (best == n || areas[i] < areas[best]) {
                        best = i;
                    }
                }
                best
            })
            .collect()
    }

    /// Resolves the masks into a label map: each pixel takes the smallest-area
    /// mask containing it and uncovered pixels share one background label.
    /// Labels are dense, ordered by mask index with the background last.
    /// Returns the map and the number of segments.
    pub fn labels(&self) -> (Vec<usize>, usize) {
        let raw = self.winners();
        let n = self.masks.len();
        let mut used = vec![false; n + 1];
        for &l in &raw {
            used[l] = true;
        }
        let mut remap = vec![0; n + 1];
        let mut next = 0;
        for (l, u) in used.iter().enumerate() {
            if *u {
                remap[l] = next;
                next += 1;
            }
        }
        (raw.into_iter().map(|l| remap[l]).collect(), next)
    }

    /// The resolved partition as a mask set (one mask per segment).
    pub fn resolved(&self) -> SemanticMaskSet {
        let (labels, _) = self.labels();
        Self::from_labels(self.height, self.width, &labels).expect("labels cover the image")
    }

    /// The resolved partition seen through a crop; segments that fall
    /// entirely outside the crop disappear.
    pub fn transformed(&self, geometry: &CropGeometry) -> SemanticMaskSet {
        let (labels, _) = self.labels();
        let out: Vec<usize> = geometry
            .source_indices(self.height, self.width)
            .into_iter()
            .map(|s| labels[s])
            .collect();
        Self::from_labels(geometry.height, geometry.width, &out).expect("crop keeps at least one pixel")
    }
}

/// Drops each mask with probability `rate`. Pixels of dropped masks and
/// uncovered pixels merge into one background segment appended last; the
/// result is always a partition. With nothing dropped the input is returned
/// unchanged.
pub fn mask_dropout(ms: &SemanticMaskSet, rate: f64, seed: u64) -> Result<SemanticMaskSet> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::Parameter(format!("dropout rate {rate} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dropped: Vec<bool> = (0..ms.len()).map(|_| rng.random::<f64>() < rate).collect();
    if !dropped.iter().any(|&d| d) {
        return Ok(ms.clone());
    }
    let winners = ms.winners();
    let hw = winners.len();
    let mut out: Vec<Vec<bool>> = Vec::new();
    for (i, _) in dropped.iter().enumerate().filter(|(_, d)| !**d) {
        let m: Vec<bool> = winners.iter().map(|&w| w == i).collect();
        if m.iter().any(|&b| b) {
            out.push(m);
        }
    }
    let background: Vec<bool> = (0..hw).map(|p| winners[p] == ms.len() || dropped[winners[p]]).collect();
    if background.iter().any(|&b| b) {
        out.push(background);
    }
    SemanticMaskSet::new(ms.height, ms.width, out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskStubMode {
    /// Tile into `n` rectangular cells (`rows × cols`, `rows` the largest divisor of `n` not above `√n`).
    Grid,
    /// Threshold luminance at the `k/n` quantiles.
    Quantile,
}

/// Deterministic stand-in for a segmentation model.
pub fn semantic_masks_stub(img: &ImageTensor, mode: MaskStubMode, cells_or_bins: usize) -> Result<SemanticMaskSet> {
    if cells_or_bins == 0 {
        return Err(Error::Parameter("cells_or_bins must be >= 1".into()));
    }
    let (h, w) = (img.height(), img.width());
    let labels: Vec<usize> = match mode {
        MaskStubMode::Grid => {
            let n = cells_or_bins;
            let rows = (1..=n).filter(|r| n.is_multiple_of(*r) && r * r <= n).max().unwrap_or(1);
            let cols = n / rows;
            (0..h * w)
                .map(|p| {
                    let (y, x) = (p / w, p % w);
                    let r = (y * rows / h).min(rows - 1);
                    let c = (x * cols / w).min(cols - 1);
                    r * cols + c
                })
                .collect()
        }
        MaskStubMode::Quantile => {
            let lum = img.luma();
            let mut sorted = lum.clone();
            sorted.sort_by(|a, b| a.total_cmp(b));
            let n = sorted.len();
            let thresholds: Vec<f64> = (1..cells_or_bins).map(|k| sorted[(k * n / cells_or_bins).min(n - 1)]).collect();
            lum.iter()
                .map(|&v| thresholds.iter().filter(|&&t| v >= t).count())
                .collect()
        }
    };
    SemanticMaskSet::from_labels(h, w, &labels)
}

/// Label map downsampled by an integer `factor` using per-block majority (ties to the smaller label).
pub fn downsample_labels(labels: &[usize], h: usize, w: usize, factor: usize, segments: usize) -> Vec<usize> {
    if factor == 1 {
        return labels.to_vec();
    }
    let (oh, ow) = (h / factor, w / factor);
    let mut out = vec![0; oh * ow];
    let mut counts = vec![0usize; segments];
    for oy in 0..oh {
        for ox in 0..ow {
            counts.iter_mut().for_each(|c| *c = 0);
            for dy in 0..factor {
                for dx in 0..factor {
                    counts[labels[(oy * factor + dy) * w + ox * factor + dx]] += 1;
                }
            }
            let mut best = 0;
            for (s, &c) in counts.iter().enumerate() {
                if c > counts[best] {
                    best = s;
                }
            }
            out[oy * ow + ox] = best;
        }
    }
    out
}
