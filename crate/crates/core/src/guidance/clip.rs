//! Content and degradation embeddings: a deterministic stand-in for a
//! degradation-aware vision-language encoder and a file-backed reader.

use std::path::Path;

use super::artifact::EmbeddingFile;
use super::quality::EmbeddingSource;
use super::stats::{box3, plane_stats, project, projection};
use crate::error::{Error, Result};
use crate::image::ImageTensor;

pub const CLIP_DIM: usize = 512;
const CONTENT_SEED: u64 = 0x434f_4e54_454e_5401;
const DEGRADATION_SEED: u64 = 0x4445_4752_4144_4501;
const GRID: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct ClipEmbeddings {
    pub content: Vec<f64>,
    pub degradation: Vec<f64>,
    pub source: EmbeddingSource,
}

impl ClipEmbeddings {
    pub fn new(content: Vec<f64>, degradation: Vec<f64>, source: EmbeddingSource) -> Result<Self> {
        for (name, v) in [("content", &content), ("degradation", &degradation)] {
            if v.len() != CLIP_DIM {
                return Err(Error::Validation(format!(
                    "{name} embedding has {} entries, expected {CLIP_DIM}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation(format!("{name} embedding is not finite")));
            }
        }
        Ok(ClipEmbeddings {
            content,
            degradation,
            source,
        })
    }
}

fn block_means(p: &[f64], h: usize, w: usize) -> Vec<f64> {
    let span = |i: usize, n: usize| {
        let a = i * n / GRID;
        (a.min(n - 1), ((i + 1) * n / GRID).max(a + 1).min(n))
    };
    let mut out = Vec::with_capacity(GRID * GRID);
    for by in 0..GRID {
        let (y0, y1) = span(by, h);
        for bx in 0..GRID {
            let (x0, x1) = span(bx, w);
            let mut s = 0.0;
            for y in y0..y1 {
                s += p[y * w + x0..y * w + x1].iter().sum::<f64>();
            }
            out.push(s / ((y1 - y0) * (x1 - x0)) as f64);
        }
    }
    out
}

/// Content: 8×8 block means per channel, centered; degradation: log-scale
/// high-frequency residual, gradient and Laplacian statistics plus the
/// fractions of very bright and very dark pixels. Each goes through its own
/// fixed random projection to 512 dimensions.
pub fn clip_embed_stub(img: &ImageTensor) -> ClipEmbeddings {
    let (h, w) = (img.height(), img.width());
    let mut content = Vec::with_capacity(3 * GRID * GRID);
    let mut degradation = Vec::with_capacity(21);
    for c in 0..3 {
        let ch = c.min(img.channels() - 1);
        let p = &img.data()[ch * h * w..(ch + 1) * h * w];
        content.extend(block_means(p, h, w).into_iter().map(|m| 2.0 * m - 1.0));
        let smooth = box3(p, h, w);
        let residual_var = p.iter().zip(&smooth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len() as f64;
        let s = plane_stats(p, h, w);
        let n = p.len() as f64;
        degradation.extend([
            (residual_var + 1e-8).ln() / 8.0,
            (s.grad_mean + 1e-4).ln() / 4.0,
            (s.laplacian_energy + 1e-8).ln() / 8.0,
            (s.variance + 1e-8).ln() / 8.0,
            2.0 * s.mean - 1.0,
            p.iter().filter(|&&v| v > 0.9).count() as f64 / n,
            p.iter().filter(|&&v| v < 0.1).count() as f64 / n,
        ]);
    }
    let mc = projection(CONTENT_SEED, CLIP_DIM, content.len());
    let md = projection(DEGRADATION_SEED, CLIP_DIM, degradation.len());
    ClipEmbeddings {
        content: project(&mc, CLIP_DIM, &content),
        degradation: project(&md, CLIP_DIM, &degradation),
        source: EmbeddingSource::Stub,
    }
}

/// Reads the stored 1024-entry record for `id` (content first, then degradation).
pub fn clip_embed_file(id: &str, path: &Path) -> Result<ClipEmbeddings> {
    clip_from_artifact(&EmbeddingFile::load(path)?, id)
}

pub(crate) fn clip_from_artifact(file: &EmbeddingFile, id: &str) -> Result<ClipEmbeddings> {
    if file.dim() != 2 * CLIP_DIM {
        return Err(Error::Validation(format!(
            "content/degradation artifact stores {}-d records, expected {}",
            file.dim(),
            2 * CLIP_DIM
        )));
    }
    let v = file
        .get(id)
        .ok_or_else(|| Error::Provider(format!("no content/degradation embedding for image id `{id}`")))?;
    let (c, d) = v.split_at(CLIP_DIM);
    ClipEmbeddings::new(
        c.iter().map(|&x| x as f64).collect(),
        d.iter().map(|&x| x as f64).collect(),
        EmbeddingSource::File,
    )
}

pub fn clip_to_record(e: &ClipEmbeddings) -> Vec<f32> {
    e.content.iter().chain(&e.degradation).map(|&x| x as f32).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stub_shapes_and_determinism() {
        let img = ImageTensor::from_vec(3, 16, 16, (0..768).map(|i| (i % 7) as f64 / 7.0).collect()).unwrap();
        let a = clip_embed_stub(&img);
        assert_eq!(a.content.len(), 512);
        assert_eq!(a.degradation.len(), 512);
        assert_eq!(a, clip_embed_stub(&img));
        let tiny = ImageTensor::constant(1, 3, 5, 0.4).unwrap();
        assert!(clip_embed_stub(&tiny).content.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn wrong_dimensions_are_rejected() {
        assert!(ClipEmbeddings::new(vec![0.0; 511], vec![0.0; 512], EmbeddingSource::File).is_err());
    }
}
