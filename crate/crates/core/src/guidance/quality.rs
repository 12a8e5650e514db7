//! Global quality embedding: a deterministic stand-in for an IQA model's
//! hidden state, a file-backed reader for precomputed states, and the learned
//! affine adapter that maps an embedding to the guidance vector `F_q`.

use std::path::Path;

use rand_chacha::ChaCha8Rng;

use super::artifact::EmbeddingFile;
use super::stats::{fnv1a, plane_stats, project, projection};
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::image::ImageTensor;
use crate::params::trunc_normal;
use crate::tensor::Tensor;

const PROJECTION_SEED: u64 = 0x5157_4c54_5900_0001;
const TEXT_FEATURES: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct QualityQuery {
    pub image: ImageTensor,
    pub text: String,
}

impl QualityQuery {
    pub fn new(image: ImageTensor, text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::Validation("quality query text must be non-empty".into()));
        }
        Ok(QualityQuery { image, text })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingSource {
    Stub,
    File,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityEmbedding {
    pub q: Vec<f64>,
    pub source: EmbeddingSource,
}

impl QualityEmbedding {
    pub fn new(q: Vec<f64>, source: EmbeddingSource) -> Result<Self> {
        if q.is_empty() || q.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("quality embedding must be non-empty and finite".into()));
        }
        Ok(QualityEmbedding { q, source })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }
}

/// Image statistics (per channel: mean, variance, mean gradient magnitude,
/// Laplacian energy; single-channel images are treated as gray RGB) plus
/// hashed text features, through a fixed random projection and `tanh`.
pub fn quality_embed_stub(query: &QualityQuery, dim: usize) -> QualityEmbedding {
    let img = &query.image;
    let (h, w) = (img.height(), img.width());
    let mut features = Vec::with_capacity(12 + TEXT_FEATURES);
    for c in 0..3 {
        let ch = c.min(img.channels() - 1);
        let s = plane_stats(&img.data()[ch * h * w..(ch + 1) * h * w], h, w);
        features.push(2.0 * s.mean - 1.0);
        features.push((s.variance + 1e-6).ln() / 4.0);
        features.push((s.grad_mean + 1e-6).ln() / 4.0);
        features.push((s.laplacian_energy + 1e-6).ln() / 4.0);
    }
    let hash = fnv1a(query.text.as_bytes());
    for k in 0..TEXT_FEATURES {
        let byte = (hash >> (8 * k)) & 0xff;
        features.push(byte as f64 / 127.5 - 1.0);
    }
    let m = projection(PROJECTION_SEED, dim, features.len());
    let q = project(&m, dim, &features).into_iter().map(f64::tanh).collect();
    QualityEmbedding {
        q,
        source: EmbeddingSource::Stub,
    }
}

/// Reads the stored vector for `id` unchanged (apart from widening to f64).
pub fn quality_embed_file(id: &str, path: &Path, dim: usize) -> Result<QualityEmbedding> {
    let file = EmbeddingFile::load(path)?;
    quality_from_artifact(&file, id, dim)
}

pub(crate) fn quality_from_artifact(file: &EmbeddingFile, id: &str, dim: usize) -> Result<QualityEmbedding> {
    if file.dim() != dim {
        return Err(Error::Validation(format!(
            "quality artifact stores {}-d vectors, expected {dim}",
            file.dim()
        )));
    }
    let v = file
        .get(id)
        .ok_or_else(|| Error::Provider(format!("no quality embedding for image id `{id}`")))?;
    QualityEmbedding::new(v.iter().map(|&x| x as f64).collect(), EmbeddingSource::File)
}

/// Affine map `F_q = W q + b` with `W: [out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityAdapter {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl QualityAdapter {
    pub fn new(weight: Tensor, bias: Tensor) -> Result<Self> {
        let s = weight.shape();
        if s.len() != 2 || bias.len() != s[0] {
            return Err(Error::Shape(format!(
                "adapter weight {:?} and bias {:?} disagree",
                s,
                bias.shape()
            )));
        }
        Ok(QualityAdapter { weight, bias })
    }

    pub fn identity(dim: usize) -> Self {
        let mut w = Tensor::zeros(&[dim, dim]);
        for i in 0..dim {
            w.data_mut()[i * dim + i] = 1.0;
        }
        QualityAdapter {
            weight: w,
            bias: Tensor::zeros(&[dim]),
        }
    }

    pub fn init(rng: &mut ChaCha8Rng, input: usize, output: usize) -> Self {
        QualityAdapter {
            weight: trunc_normal(rng, &[output, input], 0.02),
            bias: Tensor::zeros(&[output]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape()[0]
    }
}

pub fn adapt_quality(q: &QualityEmbedding, adapter: &QualityAdapter) -> Result<Vec<f64>> {
    if q.dim() != adapter.input_dim() {
        return Err(Error::Shape(format!(
            "adapter expects {}-d embeddings, got {}",
            adapter.input_dim(),
            q.dim()
        )));
    }
    let mut g = Graph::new();
    let qv = g.constant(Tensor::vector(q.q.clone()));
    let w = g.constant(adapter.weight.clone());
    let b = g.constant(adapter.bias.clone());
    let out = adapt_quality_on_graph(&mut g, qv, w, b);
    Ok(g.value(out).data().to_vec())
}

/// `w · q + b` for a `[in]` vector `q`, giving an `[out]` vector.
pub fn adapt_quality_on_graph(g: &mut Graph, q: Var, w: Var, b: Var) -> Var {
    let y = g.matmul(w, q);
    let n = g.value(y).len();
    let y = g.reshape(y, vec![n]);
    g.add(y, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{ParamGrads, ParamStore};
    use rand::SeedableRng;

    fn query(v: f64) -> QualityQuery {
        QualityQuery::new(ImageTensor::constant(3, 16, 16, v).unwrap(), "assess the image quality").unwrap()
    }

    #[test]
    fn stub_is_deterministic_and_sensitive() {
        let a = quality_embed_stub(&query(0.0), 32);
        assert_eq!(a, quality_embed_stub(&query(0.0), 32));
        assert_ne!(a, quality_embed_stub(&query(1.0), 32));
        assert_eq!(a.dim(), 32);
        assert!(QualityQuery::new(ImageTensor::constant(1, 2, 2, 0.0).unwrap(), "  ").is_err());
    }

    #[test]
    fn adapter_closed_forms() {
        let q = QualityEmbedding::new(vec![0.3, -1.0, 2.0], EmbeddingSource::Stub).unwrap();
        assert_eq!(adapt_quality(&q, &QualityAdapter::identity(3)).unwrap(), q.q);
        let zero = QualityAdapter::new(Tensor::zeros(&[2, 3]), Tensor::vector(vec![0.5, -0.25])).unwrap();
        assert_eq!(adapt_quality(&q, &zero).unwrap(), vec![0.5, -0.25]);
        assert!(adapt_quality(&q, &QualityAdapter::identity(4)).is_err());
    }

    #[test]
    fn adapter_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = ParamStore::new();
        let a = QualityAdapter::init(&mut rng, 5, 3);
        let wid = store.insert("w", a.weight.map(|v| v * 30.0));
        let bid = store.insert("b", Tensor::vector(vec![0.1, -0.2, 0.3]));
        let q = Tensor::vector(vec![0.5, -0.3, 0.8, 0.1, -0.9]);
        let target = [0.2, 0.7, -0.4];
        let loss = |store: &ParamStore| -> (f64, ParamGrads) {
            let mut g = Graph::new();
            let qv = g.constant(q.clone());
            let w = g.param(wid, store.get(wid).clone());
            let b = g.param(bid, store.get(bid).clone());
            let f = adapt_quality_on_graph(&mut g, qv, w, b);
            let f = g.gelu(f);
            let t = g.constant(Tensor::vector(target.to_vec()));
            let l = g.mean_sq_diff(f, t);
            let grads = g.backward(l, 1.0);
            let mut pg = ParamGrads::zeros_like(store);
            g.collect_param_grads(&grads, &mut pg);
            (g.scalar_value(l), pg)
        };
        let (_, pg) = loss(&store);
        let eps = 1e-6;
        for id in [wid, bid] {
            for i in 0..store.get(id).len() {
                let mut s = store.clone();
                s.get_mut(id).data_mut()[i] += eps;
                let up = loss(&s).0;
                s.get_mut(id).data_mut()[i] -= 2.0 * eps;
                let down = loss(&s).0;
                let fd = (up - down) / (2.0 * eps);
                let an = pg.get(id).data()[i];
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
                assert!(rel < 1e-4, "param {id:?}[{i}]: fd {fd} vs {an}");
            }
        }
    }
}
