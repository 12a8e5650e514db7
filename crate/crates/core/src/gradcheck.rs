//! Central finite-difference checks of reverse-mode gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::seq::index::sample;

use crate::graph::{Graph, Var};
use crate::params::uniform;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Largest group error. For one input (parameter group) the error is
    /// `max_i |a_i - n_i| / max(max_i |a_i|, max_i |n_i|, floor)` over the
    /// checked coordinates, with `a` analytic and `n` numeric.
    pub max_rel_err: f64,
    /// `(input index, element index)` of the largest error.
    pub worst: (usize, usize),
    /// `(analytic, numeric)` at the worst coordinate.
    pub worst_values: (f64, f64),
    pub checked: usize,
}

pub struct GradCheck {
    pub eps: f64,
    /// Denominator floor, so groups whose gradient vanishes are compared absolutely.
    pub floor: f64,
    /// Check at most this many coordinates per input (sampled), `None` for all.
    pub max_coords: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheck {
    fn default() -> Self {
        GradCheck {
            eps: 1e-6,
            floor: 1e-6,
            max_coords: None,
            seed: 0,
        }
    }
}

impl GradCheck {
    /// `build` maps leaf variables (one per entry of `inputs`) to a scalar.
    pub fn run(&self, inputs: &[Tensor], build: impl Fn(&mut Graph, &[Var]) -> Var) -> GradCheckReport {
        let eval = |ts: &[Tensor]| -> f64 {
            let mut g = Graph::new();
            let vars: Vec<Var> = ts.iter().map(|t| g.constant(t.clone())).collect();
            let out = build(&mut g, &vars);
            g.scalar_value(out)
        };
        let mut g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|t| g.input(t.clone())).collect();
        let out = build(&mut g, &vars);
        let grads = g.backward(out, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut report = GradCheckReport {
            max_rel_err: 0.0,
            worst: (0, 0),
            worst_values: (0.0, 0.0),
            checked: 0,
        };
        let mut work = inputs.to_vec();
        for (k, input) in inputs.iter().enumerate() {
            let n = input.len();
            let coords: Vec<usize> = match self.max_coords {
                Some(m) if m < n => sample(&mut rng, n, m).into_vec(),
                _ => (0..n).collect(),
            };
            let analytic = grads.get(vars[k]).map(|t| t.data().to_vec()).unwrap_or_else(|| vec![0.0; n]);
            let mut diff: f64 = 0.0;
            let mut scale: f64 = 0.0;
            let mut worst = (0, 0.0, 0.0);
            for i in coords {
                let orig = work[k].data()[i];
                work[k].data_mut()[i] = orig + self.eps;
                let up = eval(&work);
                work[k].data_mut()[i] = orig - self.eps;
                let down = eval(&work);
                work[k].data_mut()[i] = orig;
                let numeric = (up - down) / (2.0 * self.eps);
                let a = analytic[i];
                if (a - numeric).abs() >= diff {
                    diff = (a - numeric).abs();
                    worst = (i, a, numeric);
                }
                scale = scale.max(a.abs()).max(numeric.abs());
                report.checked += 1;
            }
            let rel = diff / scale.max(self.floor);
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = (k, worst.0);
                report.worst_values = (worst.1, worst.2);
            }
        }
        report
    }
}

/// `sum(out ⊙ R)` for a fixed pseudo-random `R`, turning any output into a
/// scalar whose gradient exercises every output element.
pub fn random_projection(g: &mut Graph, out: Var, seed: u64) -> Var {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = uniform(&mut rng, g.shape(out), -1.0, 1.0);
    let rv = g.constant(r);
    let m = g.mul(out, rv);
    g.sum(m)
}
