//! Raw numeric kernels over row-major slices. Shared by the autodiff graph
//! and by the non-differentiable image operators.

/// `c[m×n] += a[m×k] · b[k×n]`
pub fn matmul_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        let arow = &a[i * k..(i + 1) * k];
        for (p, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
}

/// `c[m×n] += a[m×k] · b[n×k]ᵀ`
pub fn matmul_nt_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            c[i * n + j] += dot(arow, brow);
        }
    }
}

/// `c[k×n] += a[m×k]ᵀ · b[m×n]`
pub fn matmul_tn_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let brow = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let crow = &mut c[p * n..(p + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
}

pub fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators keep the loop vectorizable while fixing the summation order.
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv += alpha * xv;
    }
}

/// Valid destination column range and source offset for a 3-tap position `k` with zero padding 1.
#[inline]
fn tap_range(k: usize, w: usize) -> (usize, usize) {
    // destination w' maps to source w' + k - 1
    let lo = if k == 0 { 1 } else { 0 };
    let hi = if k == 2 { w.saturating_sub(1) } else { w };
    (lo, hi)
}

/// 3×3 convolution, stride 1, zero padding 1. `w` is `[co, ci, 3, 3]`.
pub fn conv3x3_forward(x: &[f64], w: &[f64], ci: usize, co: usize, h: usize, wd: usize) -> Vec<f64> {
    let hw = h * wd;
    let mut out = vec![0.0; co * hw];
    for o in 0..co {
        let orow = &mut out[o * hw..(o + 1) * hw];
        for i in 0..ci {
            let xin = &x[i * hw..(i + 1) * hw];
            for kh in 0..3 {
                for kw in 0..3 {
                    let wv = w[((o * ci + i) * 3 + kh) * 3 + kw];
                    if wv == 0.0 {
                        continue;
                    }
                    let (lo, hi) = tap_range(kw, wd);
                    for y in 0..h {
                        let sy = y as isize + kh as isize - 1;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let sy = sy as usize;
                        let dst = &mut orow[y * wd + lo..y * wd + hi];
                        let src = &xin[sy * wd + lo + kw - 1..sy * wd + hi + kw - 1];
                        axpy(wv, src, dst);
                    }
                }
            }
        }
    }
    out
}

/// Gradients of [`conv3x3_forward`] with respect to input and weight.
pub fn conv3x3_backward(
    x: &[f64],
    w: &[f64],
    g: &[f64],
    ci: usize,
    co: usize,
    h: usize,
    wd: usize,
    need_dx: bool,
) -> (Option<Vec<f64>>, Vec<f64>) {
    let hw = h * wd;
    let mut dx = if need_dx { Some(vec![0.0; ci * hw]) } else { None };
    let mut dw = vec![0.0; co * ci * 9];
    for o in 0..co {
        let grow = &g[o * hw..(o + 1) * hw];
        for i in 0..ci {
            let xin = &x[i * hw..(i + 1) * hw];
            for kh in 0..3 {
                for kw in 0..3 {
                    let widx = ((o * ci + i) * 3 + kh) * 3 + kw;
                    let wv = w[widx];
                    let (lo, hi) = tap_range(kw, wd);
                    let mut acc = 0.0;
                    for y in 0..h {
                        let sy = y as isize + kh as isize - 1;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let sy = sy as usize;
                        let gseg = &grow[y * wd + lo..y * wd + hi];
                        let s0 = sy * wd + lo + kw - 1;
                        let s1 = sy * wd + hi + kw - 1;
                        acc += dot(gseg, &xin[s0..s1]);
                        if let Some(dx) = dx.as_mut() {
                            if wv != 0.0 {
                                let dxi = &mut dx[i * hw..(i + 1) * hw];
                                axpy(wv, gseg, &mut dxi[s0..s1]);
                            }
                        }
                    }
                    dw[widx] += acc;
                }
            }
        }
    }
    (dx, dw)
}

/// Depthwise 3×3 convolution, zero padding 1. `w` is `[c, 3, 3]`.
pub fn dwconv3x3_forward(x: &[f64], w: &[f64], c: usize, h: usize, wd: usize) -> Vec<f64> {
    let hw = h * wd;
    let mut out = vec![0.0; c * hw];
    for ch in 0..c {
        let xin = &x[ch * hw..(ch + 1) * hw];
        let orow = &mut out[ch * hw..(ch + 1) * hw];
        for kh in 0..3 {
            for kw in 0..3 {
                let wv = w[(ch * 3 + kh) * 3 + kw];
                let (lo, hi) = tap_range(kw, wd);
                for y in 0..h {
                    let sy = y as isize + kh as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let sy = sy as usize;
                    axpy(
                        wv,
                        &xin[sy * wd + lo + kw - 1..sy * wd + hi + kw - 1],
                        &mut orow[y * wd + lo..y * wd + hi],
                    );
                }
            }
        }
    }
    out
}

pub fn dwconv3x3_backward(
    x: &[f64],
    w: &[f64],
    g: &[f64],
    c: usize,
    h: usize,
    wd: usize,
    need_dx: bool,
) -> (Option<Vec<f64>>, Vec<f64>) {
    let hw = h * wd;
    let mut dx = if need_dx { Some(vec![0.0; c * hw]) } else { None };
    let mut dw = vec![0.0; c * 9];
    for ch in 0..c {
        let xin = &x[ch * hw..(ch + 1) * hw];
        let grow = &g[ch * hw..(ch + 1) * hw];
        for kh in 0..3 {
            for kw in 0..3 {
                let widx = (ch * 3 + kh) * 3 + kw;
                let wv = w[widx];
                let (lo, hi) = tap_range(kw, wd);
                let mut acc = 0.0;
                for y in 0..h {
                    let sy = y as isize + kh as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let sy = sy as usize;
                    let gseg = &grow[y * wd + lo..y * wd + hi];
                    let s0 = sy * wd + lo + kw - 1;
                    let s1 = sy * wd + hi + kw - 1;
                    acc += dot(gseg, &xin[s0..s1]);
                    if let Some(dx) = dx.as_mut() {
                        axpy(wv, gseg, &mut dx[ch * hw + s0..ch * hw + s1]);
                    }
                }
                dw[widx] += acc;
            }
        }
    }
    (dx, dw)
}

/// `[c, h, w] → [4c, h/2, w/2]`, channel index `c*4 + dy*2 + dx`.
pub fn pixel_unshuffle(x: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let (h2, w2) = (h / 2, w / 2);
    let mut out = vec![0.0; x.len()];
    for ch in 0..c {
        for dy in 0..2 {
            for dx in 0..2 {
                let oc = ch * 4 + dy * 2 + dx;
                for y in 0..h2 {
                    for xx in 0..w2 {
                        out[(oc * h2 + y) * w2 + xx] = x[(ch * h + 2 * y + dy) * w + 2 * xx + dx];
                    }
                }
            }
        }
    }
    out
}

/// Inverse of [`pixel_unshuffle`]: `[4c, h, w] → [c, 2h, 2w]`.
pub fn pixel_shuffle(x: &[f64], c4: usize, h: usize, w: usize) -> Vec<f64> {
    let c = c4 / 4;
    let (h2, w2) = (h * 2, w * 2);
    let mut out = vec![0.0; x.len()];
    for ch in 0..c {
        for dy in 0..2 {
            for dx in 0..2 {
                let ic = ch * 4 + dy * 2 + dx;
                for y in 0..h {
                    for xx in 0..w {
                        out[(ch * h2 + 2 * y + dy) * w2 + 2 * xx + dx] = x[(ic * h + y) * w + xx];
                    }
                }
            }
        }
    }
    out
}

/// Source taps for 1-D bilinear resampling with half-pixel centers.
pub fn bilinear_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).max(0.0);
            let i0 = (s.floor() as usize).min(src - 1);
            let i1 = (i0 + 1).min(src - 1);
            let l1 = s - i0 as f64;
            let l1 = if i1 == i0 { 0.0 } else { l1 };
            (i0, i1, 1.0 - l1, l1)
        })
        .collect()
}

pub fn bilinear_resize(x: &[f64], c: usize, h: usize, w: usize, oh: usize, ow: usize) -> Vec<f64> {
    let ty = bilinear_taps(h, oh);
    let tx = bilinear_taps(w, ow);
    let mut out = vec![0.0; c * oh * ow];
    for ch in 0..c {
        let src = &x[ch * h * w..(ch + 1) * h * w];
        for (oy, &(y0, y1, wy0, wy1)) in ty.iter().enumerate() {
            for (ox, &(x0, x1, wx0, wx1)) in tx.iter().enumerate() {
                out[(ch * oh + oy) * ow + ox] = wy0 * (wx0 * src[y0 * w + x0] + wx1 * src[y0 * w + x1])
                    + wy1 * (wx0 * src[y1 * w + x0] + wx1 * src[y1 * w + x1]);
            }
        }
    }
    out
}

pub fn bilinear_resize_backward(g: &[f64], c: usize, h: usize, w: usize, oh: usize, ow: usize) -> Vec<f64> {
    let ty = bilinear_taps(h, oh);
    let tx = bilinear_taps(w, ow);
    let mut dx = vec![0.0; c * h * w];
    for ch in 0..c {
        let d = &mut dx[ch * h * w..(ch + 1) * h * w];
        for (oy, &(y0, y1, wy0, wy1)) in ty.iter().enumerate() {
            for (ox, &(x0, x1, wx0, wx1)) in tx.iter().enumerate() {
                let gv = g[(ch * oh + oy) * ow + ox];
                d[y0 * w + x0] += gv * wy0 * wx0;
                d[y0 * w + x1] += gv * wy0 * wx1;
                d[y1 * w + x0] += gv * wy1 * wx0;
                d[y1 * w + x1] += gv * wy1 * wx1;
            }
        }
    }
    dx
}

/// Mirror index without repeating the edge sample (`-1 → 1`).
#[inline]
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    let period = 2 * (n - 1);
    let mut i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

/// Separable filter with reflect padding; `kernel` has odd length and is applied along both axes.
pub fn separable_filter(x: &[f64], c: usize, h: usize, w: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut tmp = vec![0.0; x.len()];
    let mut out = vec![0.0; x.len()];
    for ch in 0..c {
        let base = ch * h * w;
        for y in 0..h {
            for xx in 0..w {
                let mut acc = 0.0;
                for (k, &kv) in kernel.iter().enumerate() {
                    let sx = reflect_index(xx as isize + k as isize - r, w);
                    acc += kv * x[base + y * w + sx];
                }
                tmp[base + y * w + xx] = acc;
            }
        }
        for y in 0..h {
            for xx in 0..w {
                let mut acc = 0.0;
                for (k, &kv) in kernel.iter().enumerate() {
                    let sy = reflect_index(y as isize + k as isize - r, h);
                    acc += kv * tmp[base + sy * w + xx];
                }
                out[base + y * w + xx] = acc;
            }
        }
    }
    out
}

/// Adjoint of [`separable_filter`].
pub fn separable_filter_backward(g: &[f64], c: usize, h: usize, w: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut tmp = vec![0.0; g.len()];
    let mut dx = vec![0.0; g.len()];
    for ch in 0..c {
        let base = ch * h * w;
        for y in 0..h {
            for xx in 0..w {
                let gv = g[base + y * w + xx];
                for (k, &kv) in kernel.iter().enumerate() {
                    let sy = reflect_index(y as isize + k as isize - r, h);
                    tmp[base + sy * w + xx] += kv * gv;
                }
            }
        }
        for y in 0..h {
            for xx in 0..w {
                let gv = tmp[base + y * w + xx];
                for (k, &kv) in kernel.iter().enumerate() {
                    let sx = reflect_index(xx as isize + k as isize - r, w);
                    dx[base + y * w + sx] += kv * gv;
                }
            }
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_index_mirrors_without_edge_repeat() {
        assert_eq!(reflect_index(-1, 5), 1);
        assert_eq!(reflect_index(-2, 5), 2);
        assert_eq!(reflect_index(5, 5), 3);
        assert_eq!(reflect_index(6, 5), 2);
        assert_eq!(reflect_index(3, 1), 0);
    }

    #[test]
    fn shuffle_inverts_unshuffle() {
        let x: Vec<f64> = (0..2 * 4 * 6).map(|v| v as f64).collect();
        let u = pixel_unshuffle(&x, 2, 4, 6);
        assert_eq!(pixel_shuffle(&u, 8, 2, 3), x);
    }

    #[test]
    fn conv_matches_naive() {
        let (ci, co, h, w) = (2, 3, 4, 5);
        let x: Vec<f64> = (0..ci * h * w).map(|v| ((v * 7) % 11) as f64 - 5.0).collect();
        let wt: Vec<f64> = (0..co * ci * 9).map(|v| ((v * 5) % 7) as f64 * 0.1 - 0.3).collect();
        let out = conv3x3_forward(&x, &wt, ci, co, h, w);
        for o in 0..co {
            for y in 0..h {
                for xx in 0..w {
                    let mut acc = 0.0;
                    for i in 0..ci {
                        for kh in 0..3 {
                            for kw in 0..3 {
                                let sy = y as isize + kh as isize - 1;
                                let sx = xx as isize + kw as isize - 1;
                                if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                    continue;
                                }
                                acc += wt[((o * ci + i) * 3 + kh) * 3 + kw]
                                    * x[(i * h + sy as usize) * w + sx as usize];
                            }
                        }
                    }
                    assert!((out[(o * h + y) * w + xx] - acc).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn bilinear_identity_when_same_size() {
        let x: Vec<f64> = (0..12).map(|v| v as f64).collect();
        assert_eq!(bilinear_resize(&x, 1, 3, 4, 3, 4), x);
    }
}
