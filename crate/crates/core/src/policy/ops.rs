//! Dense row-major kernels with hand-written backward passes.

use super::Scalar;

/// `y[m, out] = x[m, inp] * w[inp, out] (+ b[out])`.
pub(crate) fn linear<F: Scalar>(
    x: &[F],
    w: &[F],
    b: Option<&[F]>,
    m: usize,
    inp: usize,
    out: usize,
) -> Vec<F> {
    debug_assert_eq!(x.len(), m * inp);
    debug_assert_eq!(w.len(), inp * out);
    let mut y = vec![F::zero(); m * out];
    for r in 0..m {
        let yr = &mut y[r * out..(r + 1) * out];
        if let Some(b) = b {
            yr.copy_from_slice(b);
        }
        let xr = &x[r * inp..(r + 1) * inp];
        for (j, &xv) in xr.iter().enumerate() {
            if xv == F::zero() {
                continue;
            }
            let wr = &w[j * out..(j + 1) * out];
            for (yv, &wv) in yr.iter_mut().zip(wr) {
                *yv = *yv + xv * wv;
            }
        }
    }
    y
}

/// Backward of [`linear`]: accumulates `dw += x^T dy`, `db += colsum(dy)` and returns `dx`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn linear_backward<F: Scalar>(
    x: &[F],
    w: &[F],
    dy: &[F],
    m: usize,
    inp: usize,
    out: usize,
    dw: &mut [F],
    db: Option<&mut [F]>,
) -> Vec<F> {
    let mut dx = vec![F::zero(); m * inp];
    for r in 0..m {
        let dyr = &dy[r * out..(r + 1) * out];
        let xr = &x[r * inp..(r + 1) * inp];
        let dxr = &mut dx[r * inp..(r + 1) * inp];
        for j in 0..inp {
            let wr = &w[j * out..(j + 1) * out];
            let dwr = &mut dw[j * out..(j + 1) * out];
            let xv = xr[j];
            let mut acc = F::zero();
            for c in 0..out {
                acc = acc + dyr[c] * wr[c];
                dwr[c] = dwr[c] + xv * dyr[c];
            }
            dxr[j] = acc;
        }
    }
    if let Some(db) = db {
        for r in 0..m {
            for (d, &g) in db.iter_mut().zip(&dy[r * out..(r + 1) * out]) {
                *d = *d + g;
            }
        }
    }
    dx
}

pub(crate) fn add<F: Scalar>(a: &[F], b: &[F]) -> Vec<F> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

pub(crate) fn add_assign<F: Scalar>(a: &mut [F], b: &[F]) {
    for (x, &y) in a.iter_mut().zip(b) {
        *x = *x + y;
    }
}

pub(crate) fn relu<F: Scalar>(x: &[F]) -> Vec<F> {
    x.iter()
        .map(|&v| if v > F::zero() { v } else { F::zero() })
        .collect()
}

/// Gradient through ReLU given the pre-activation.
pub(crate) fn relu_backward<F: Scalar>(pre: &[F], dy: &[F]) -> Vec<F> {
    pre.iter()
        .zip(dy)
        .map(|(&p, &g)| if p > F::zero() { g } else { F::zero() })
        .collect()
}

pub(crate) const LN_EPS: f64 = 1e-5;

/// Normalized activations and inverse std per row, kept for backward.
pub(crate) struct LnCache<F> {
    pub xhat: Vec<F>,
    pub rstd: Vec<F>,
}

pub(crate) fn layer_norm<F: Scalar>(
    x: &[F],
    g: &[F],
    b: &[F],
    m: usize,
    d: usize,
) -> (Vec<F>, LnCache<F>) {
    let eps = F::from_f64(LN_EPS).unwrap();
    let dn = F::from_usize(d).unwrap();
    let mut y = vec![F::zero(); m * d];
    let mut xhat = vec![F::zero(); m * d];
    let mut rstd = vec![F::zero(); m];
    for r in 0..m {
        let xr = &x[r * d..(r + 1) * d];
        let mean = xr.iter().copied().sum::<F>() / dn;
        let var = xr.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() / dn;
        let rs = F::one() / (var + eps).sqrt();
        rstd[r] = rs;
        for c in 0..d {
            let h = (xr[c] - mean) * rs;
            xhat[r * d + c] = h;
            y[r * d + c] = g[c] * h + b[c];
        }
    }
    (y, LnCache { xhat, rstd })
}

pub(crate) fn layer_norm_backward<F: Scalar>(
    cache: &LnCache<F>,
    g: &[F],
    dy: &[F],
    m: usize,
    d: usize,
    dg: &mut [F],
    db: &mut [F],
) -> Vec<F> {
    let dn = F::from_usize(d).unwrap();
    let mut dx = vec![F::zero(); m * d];
    for r in 0..m {
        let dyr = &dy[r * d..(r + 1) * d];
        let xh = &cache.xhat[r * d..(r + 1) * d];
        let mut mean_dxh = F::zero();
        let mut mean_dxh_xh = F::zero();
        for c in 0..d {
            dg[c] = dg[c] + dyr[c] * xh[c];
            db[c] = db[c] + dyr[c];
            let dxh = dyr[c] * g[c];
            mean_dxh = mean_dxh + dxh;
            mean_dxh_xh = mean_dxh_xh + dxh * xh[c];
        }
        mean_dxh = mean_dxh / dn;
        mean_dxh_xh = mean_dxh_xh / dn;
        let rs = cache.rstd[r];
        for c in 0..d {
            let dxh = dyr[c] * g[c];
            dx[r * d + c] = rs * (dxh - mean_dxh - xh[c] * mean_dxh_xh);
        }
    }
    dx
}

/// Sinusoidal positional encoding for 0-based `pos`.
pub(crate) fn positional_encoding<F: Scalar>(pos: usize, d: usize) -> Vec<F> {
    (0..d)
        .map(|c| {
            let pair = (c / 2 * 2) as f64;
            let angle = pos as f64 / 10000f64.powf(pair / d as f64);
            F::from_f64(if c % 2 == 0 { angle.sin() } else { angle.cos() }).unwrap()
        })
        .collect()
}
