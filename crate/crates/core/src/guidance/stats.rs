//! Image statistics shared by the stub providers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Per-channel statistics of one `[H, W]` plane.
pub(crate) struct PlaneStats {
    pub mean: f64,
    pub variance: f64,
    pub grad_mean: f64,
    pub laplacian_energy: f64,
}

pub(crate) fn plane_stats(p: &[f64], h: usize, w: usize) -> PlaneStats {
    let n = p.len() as f64;
    let mean = p.iter().sum::<f64>() / n;
    let variance = p.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let at = |y: usize, x: usize| p[y * w + x];
    let mut grad = 0.0;
    let mut lap = 0.0;
    for y in 0..h {
        for x in 0..w {
            let gx = if x + 1 < w { at(y, x + 1) - at(y, x) } else { 0.0 };
            let gy = if y + 1 < h { at(y + 1, x) - at(y, x) } else { 0.0 };
            grad += (gx * gx + gy * gy).sqrt();
            let l = 4.0 * at(y, x)
                - at(y, x.saturating_sub(1))
                - at(y, (x + 1).min(w - 1))
                - at(y.saturating_sub(1), x)
                - at((y + 1).min(h - 1), x);
            lap += l * l;
        }
    }
    PlaneStats {
        mean,
        variance,
        grad_mean: grad / n,
        laplacian_energy: lap / n,
    }
}

/// 3×3 box-filtered copy of a plane (edges clamp).
pub(crate) fn box3(p: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; p.len()];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                    let xx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                    s += p[yy * w + xx];
                }
            }
            out[y * w + x] = s / 9.0;
        }
    }
    out
}

/// Fixed Gaussian projection `[rows, cols]` scaled by `1/sqrt(cols)`.
pub(crate) fn projection(seed: u64, rows: usize, cols: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = 1.0 / (cols as f64).sqrt();
    (0..rows * cols)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * s
        })
        .collect()
}

pub(crate) fn project(m: &[f64], rows: usize, v: &[f64]) -> Vec<f64> {
    let cols = v.len();
    (0..rows)
        .map(|r| m[r * cols..(r + 1) * cols].iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// 64-bit FNV-1a.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
