//! Forward and reverse-mode passes of the actor-critic network.
//!
//! Pipeline for one state with `n` jobs:
//!
//! 1. `h0 = x We + be + pe`, sinusoidal encoding over 0-based positions.
//! 2. `n_layers` post-norm encoder layers:
//!    `h' = LN1(h + MHA(h))`, `h_out = LN2(h' + FF(h'))`, `FF = Linear -> ReLU -> Linear`.
//! 3. `hc_i = h_i Wself + bself + hmax Wmax + bmax`, `hmax` the column-wise max.
//! 4. Actor: `Y[i][k] = (hc_i Wk) . (hc_k Wq)`, off-diagonal ReLU, diagonal
//!    masked, one softmax over all remaining `n^2 - n` entries.
//! 5. Critic: `FF_v([mean_i hc_i, progress])` with two hidden ReLU layers.

use super::ops::{
    add, add_assign, layer_norm, layer_norm_backward, linear, linear_backward, positional_encoding,
    relu, relu_backward, LnCache,
};
use super::params::{LayerSlots, PolicyParams};
use super::Scalar;
use crate::error::{Error, Result};
use crate::operators::PairAction;
use crate::sched::FeatureMatrix;

/// Policy distribution and value estimate for one state.
#[derive(Debug, Clone, PartialEq)]
pub struct NetOutput<F> {
    pub n: usize,
    /// `n x n` row-major action probabilities; the diagonal is exactly zero.
    pub probs: Vec<F>,
    /// Masked compatibility logits; the diagonal holds `-inf`.
    pub logits: Vec<F>,
    /// Log of the softmax normalizer over the off-diagonal logits.
    pub log_norm: F,
    pub value: F,
}

impl<F: Scalar> NetOutput<F> {
    pub fn prob(&self, a: PairAction) -> F {
        self.probs[a.flat(self.n)]
    }

    pub fn log_prob(&self, a: PairAction) -> F {
        self.logits[a.flat(self.n)] - self.log_norm
    }

    /// Entropy of the action distribution in nats.
    pub fn entropy(&self) -> F {
        let mut h = F::zero();
        for (idx, (&p, &z)) in self.probs.iter().zip(&self.logits).enumerate() {
            if idx % (self.n + 1) != 0 && p > F::zero() {
                h = h - p * (z - self.log_norm);
            }
        }
        h
    }
}

/// Loss gradients with respect to the network outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputGrad<F> {
    /// `dL / d logits`, `n x n`; diagonal entries are ignored.
    pub d_logits: Vec<F>,
    pub d_value: F,
}

struct LayerCache<F> {
    x: Vec<F>,
    q: Vec<F>,
    k: Vec<F>,
    v: Vec<F>,
    /// `heads x n x n` attention weights.
    attn: Vec<F>,
    concat: Vec<F>,
    ln1: LnCache<F>,
    h1: Vec<F>,
    z1: Vec<F>,
    r1: Vec<F>,
    ln2: LnCache<F>,
}

/// Activations recorded by [`forward_cached`] for [`backward`].
pub struct ForwardCache<F> {
    n: usize,
    x0: Vec<F>,
    layers: Vec<LayerCache<F>>,
    h_enc: Vec<F>,
    hmax: Vec<F>,
    argmax: Vec<usize>,
    hc: Vec<F>,
    qc: Vec<F>,
    kc: Vec<F>,
    y: Vec<F>,
    z: Vec<F>,
    a1: Vec<F>,
    r1: Vec<F>,
    a2: Vec<F>,
    r2: Vec<F>,
}

#[inline]
fn c<F: Scalar>(x: f64) -> F {
    F::from_f64(x).unwrap()
}

fn check_features<F: Scalar>(features: &FeatureMatrix, params: &PolicyParams<F>) -> Result<()> {
    if features.width() != params.cfg.d_in {
        return Err(Error::Shape(format!(
            "feature width {} does not match network input width {}",
            features.width(),
            params.cfg.d_in
        )));
    }
    if features.n_rows() == 0 {
        return Err(Error::Shape("no jobs in feature matrix".into()));
    }
    Ok(())
}

/// Input projection plus positional encoding, `n x d_h`.
pub fn embed_jobs<F: Scalar>(features: &FeatureMatrix, params: &PolicyParams<F>) -> Result<Vec<F>> {
    check_features(features, params)?;
    let x0: Vec<F> = features.as_slice().iter().map(|&v| c(v)).collect();
    Ok(embed(&x0, features.n_rows(), params))
}

fn embed<F: Scalar>(x0: &[F], n: usize, params: &PolicyParams<F>) -> Vec<F> {
    let cfg = &params.cfg;
    let l = &params.layout;
    let mut h = linear(
        x0,
        params.slice(&l.embed_w),
        Some(params.slice(&l.embed_b)),
        n,
        cfg.d_in,
        cfg.d_h,
    );
    for i in 0..n {
        add_assign(
            &mut h[i * cfg.d_h..(i + 1) * cfg.d_h],
            &positional_encoding::<F>(i, cfg.d_h),
        );
    }
    h
}

/// One encoder layer applied to `n x d_h` embeddings.
pub fn encoder_layer<F: Scalar>(
    h: &[F],
    n: usize,
    layer: usize,
    params: &PolicyParams<F>,
) -> Result<Vec<F>> {
    let slots = params
        .layout
        .layers
        .get(layer)
        .ok_or_else(|| Error::Shape(format!("no encoder layer {layer}")))?;
    let (out, _) = encoder_forward(h, n, slots, params);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("encoder layer {layer}")));
    }
    Ok(out)
}

fn encoder_forward<F: Scalar>(
    x: &[F],
    n: usize,
    s: &LayerSlots,
    p: &PolicyParams<F>,
) -> (Vec<F>, LayerCache<F>) {
    let d = p.cfg.d_h;
    let heads = p.cfg.n_heads;
    let dk = p.cfg.head_dim();
    let scale: F = c(1.0 / (dk as f64).sqrt());

    let q = linear(x, p.slice(&s.wq), Some(p.slice(&s.bq)), n, d, d);
    let k = linear(x, p.slice(&s.wk), Some(p.slice(&s.bk)), n, d, d);
    let v = linear(x, p.slice(&s.wv), Some(p.slice(&s.bv)), n, d, d);
    let mut attn = vec![F::zero(); heads * n * n];
    let mut concat = vec![F::zero(); n * d];
    for h in 0..heads {
        let off = h * dk;
        for i in 0..n {
            let row = &mut attn[(h * n + i) * n..(h * n + i + 1) * n];
            let qi = &q[i * d + off..i * d + off + dk];
            let mut max = F::neg_infinity();
            for (j, slot) in row.iter_mut().enumerate() {
                let kj = &k[j * d + off..j * d + off + dk];
                let sc = qi.iter().zip(kj).map(|(&a, &b)| a * b).sum::<F>() * scale;
                *slot = sc;
                max = max.max(sc);
            }
            let mut sum = F::zero();
            for slot in row.iter_mut() {
                *slot = (*slot - max).exp();
                sum = sum + *slot;
            }
            for slot in row.iter_mut() {
                *slot = *slot / sum;
            }
            let oi = &mut concat[i * d + off..i * d + off + dk];
            for (j, &a) in row.iter().enumerate() {
                let vj = &v[j * d + off..j * d + off + dk];
                for (o, &vv) in oi.iter_mut().zip(vj) {
                    *o = *o + a * vv;
                }
            }
        }
    }
    let mha = linear(&concat, p.slice(&s.wo), Some(p.slice(&s.bo)), n, d, d);
    let (h1, ln1) = layer_norm(&add(x, &mha), p.slice(&s.ln1_g), p.slice(&s.ln1_b), n, d);
    let z1 = linear(
        &h1,
        p.slice(&s.ff1_w),
        Some(p.slice(&s.ff1_b)),
        n,
        d,
        p.cfg.d_ff,
    );
    let r1 = relu(&z1);
    let ff = linear(
        &r1,
        p.slice(&s.ff2_w),
        Some(p.slice(&s.ff2_b)),
        n,
        p.cfg.d_ff,
        d,
    );
    let (out, ln2) = layer_norm(&add(&h1, &ff), p.slice(&s.ln2_g), p.slice(&s.ln2_b), n, d);
    (
        out,
        LayerCache {
            x: x.to_vec(),
            q,
            k,
            v,
            attn,
            concat,
            ln1,
            h1,
            z1,
            r1,
            ln2,
        },
    )
}

/// Max-pools the embeddings and mixes the pooled vector back into every row.
pub fn pool_and_integrate<F: Scalar>(h: &[F], n: usize, params: &PolicyParams<F>) -> Vec<F> {
    pool_forward(h, n, params).0
}

fn pool_forward<F: Scalar>(h: &[F], n: usize, p: &PolicyParams<F>) -> (Vec<F>, Vec<F>, Vec<usize>) {
    let d = p.cfg.d_h;
    let l = &p.layout;
    let mut hmax = h[..d].to_vec();
    let mut argmax = vec![0; d];
    for i in 1..n {
        for col in 0..d {
            if h[i * d + col] > hmax[col] {
                hmax[col] = h[i * d + col];
                argmax[col] = i;
            }
        }
    }
    let global = linear(
        &hmax,
        p.slice(&l.pool_max_w),
        Some(p.slice(&l.pool_max_b)),
        1,
        d,
        d,
    );
    let mut hc = linear(
        h,
        p.slice(&l.pool_self_w),
        Some(p.slice(&l.pool_self_b)),
        n,
        d,
        d,
    );
    for i in 0..n {
        add_assign(&mut hc[i * d..(i + 1) * d], &global);
    }
    (hc, hmax, argmax)
}

/// Action distribution from integrated embeddings: `(probs, masked logits, log normalizer)`.
pub fn compatibility<F: Scalar>(
    hc: &[F],
    n: usize,
    params: &PolicyParams<F>,
) -> Result<(Vec<F>, Vec<F>, F)> {
    if n < 2 {
        return Err(Error::Shape(format!("{n} jobs admit no swap")));
    }
    let (probs, logits, lse, ..) = compat_forward(hc, n, params);
    Ok((probs, logits, lse))
}

#[allow(clippy::type_complexity)]
fn compat_forward<F: Scalar>(
    hc: &[F],
    n: usize,
    p: &PolicyParams<F>,
) -> (Vec<F>, Vec<F>, F, Vec<F>, Vec<F>, Vec<F>) {
    let d = p.cfg.d_h;
    let l = &p.layout;
    let qc = linear(hc, p.slice(&l.compat_q), None, n, d, d);
    let kc = linear(hc, p.slice(&l.compat_k), None, n, d, d);
    let mut y = vec![F::zero(); n * n];
    let mut logits = vec![F::neg_infinity(); n * n];
    let mut max = F::neg_infinity();
    for i in 0..n {
        let ki = &kc[i * d..(i + 1) * d];
        for k in 0..n {
            let qk = &qc[k * d..(k + 1) * d];
            let val = ki.iter().zip(qk).map(|(&a, &b)| a * b).sum::<F>();
            y[i * n + k] = val;
            if i != k {
                let z = val.max(F::zero());
                logits[i * n + k] = z;
                max = max.max(z);
            }
        }
    }
    let mut probs = vec![F::zero(); n * n];
    // Accumulated in f64 so the probabilities sum to one within a few ulps at any n.
    let mut acc = 0.0f64;
    for idx in 0..n * n {
        if idx % (n + 1) != 0 {
            let e = (logits[idx] - max).exp();
            probs[idx] = e;
            acc += e.to_f64().unwrap();
        }
    }
    let sum = F::from_f64(acc).unwrap();
    for pv in &mut probs {
        *pv = *pv / sum;
    }
    let lse = max + sum.ln();
    (probs, logits, lse, qc, kc, y)
}

/// Critic estimate from integrated embeddings and the progress feature.
pub fn critic_value<F: Scalar>(hc: &[F], n: usize, general: f64, params: &PolicyParams<F>) -> F {
    critic_forward(hc, n, general, params).0
}

#[allow(clippy::type_complexity)]
fn critic_forward<F: Scalar>(
    hc: &[F],
    n: usize,
    general: f64,
    p: &PolicyParams<F>,
) -> (F, Vec<F>, Vec<F>, Vec<F>, Vec<F>, Vec<F>) {
    let d = p.cfg.d_h;
    let l = &p.layout;
    let inv_n: F = c(1.0 / n as f64);
    let mut z = vec![F::zero(); d + p.cfg.d_gen];
    for i in 0..n {
        for col in 0..d {
            z[col] = z[col] + hc[i * d + col];
        }
    }
    for v in &mut z[..d] {
        *v = *v * inv_n;
    }
    for v in &mut z[d..] {
        *v = c(general);
    }
    let a1 = linear(
        &z,
        p.slice(&l.critic_w1),
        Some(p.slice(&l.critic_b1)),
        1,
        d + p.cfg.d_gen,
        d,
    );
    let r1 = relu(&a1);
    let a2 = linear(
        &r1,
        p.slice(&l.critic_w2),
        Some(p.slice(&l.critic_b2)),
        1,
        d,
        d,
    );
    let r2 = relu(&a2);
    let v = linear(
        &r2,
        p.slice(&l.critic_w3),
        Some(p.slice(&l.critic_b3)),
        1,
        d,
        1,
    )[0];
    (v, z, a1, r1, a2, r2)
}

/// Full actor-critic evaluation.
pub fn forward<F: Scalar>(
    features: &FeatureMatrix,
    params: &PolicyParams<F>,
) -> Result<NetOutput<F>> {
    Ok(forward_cached(features, params)?.0)
}

/// [`forward`] that also records the activations needed by [`backward`].
pub fn forward_cached<F: Scalar>(
    features: &FeatureMatrix,
    params: &PolicyParams<F>,
) -> Result<(NetOutput<F>, ForwardCache<F>)> {
    check_features(features, params)?;
    let n = features.n_rows();
    if n < 2 {
        return Err(Error::Shape(format!("{n} jobs admit no swap")));
    }
    let x0: Vec<F> = features.as_slice().iter().map(|&v| c(v)).collect();
    let mut h = embed(&x0, n, params);
    let mut layers = Vec::with_capacity(params.cfg.n_layers);
    for (idx, slots) in params.layout.layers.iter().enumerate() {
        let (out, cache) = encoder_forward(&h, n, slots, params);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("encoder layer {idx}")));
        }
        layers.push(cache);
        h = out;
    }
    let (hc, hmax, argmax) = pool_forward(&h, n, params);
    let (probs, logits, log_norm, qc, kc, y) = compat_forward(&hc, n, params);
    let (value, z, a1, r1, a2, r2) = critic_forward(&hc, n, features.general, params);
    if !log_norm.is_finite() || !value.is_finite() {
        return Err(Error::NonFinite("network head".into()));
    }
    Ok((
        NetOutput {
            n,
            probs,
            logits,
            log_norm,
            value,
        },
        ForwardCache {
            n,
            x0,
            layers,
            h_enc: h,
            hmax,
            argmax,
            hc,
            qc,
            kc,
            y,
            z,
            a1,
            r1,
            a2,
            r2,
        },
    ))
}

/// Two disjoint mutable windows of the gradient buffer; `first` must precede `second`.
fn pair_mut<'a, F>(
    g: &'a mut [F],
    first: &std::ops::Range<usize>,
    second: &std::ops::Range<usize>,
) -> (&'a mut [F], &'a mut [F]) {
    debug_assert!(first.end <= second.start);
    let (lo, hi) = g.split_at_mut(second.start);
    (&mut lo[first.clone()], &mut hi[..second.len()])
}

/// Accumulates parameter gradients into `grads` (same layout as `params.data`).
pub fn backward<F: Scalar>(
    cache: &ForwardCache<F>,
    params: &PolicyParams<F>,
    out_grad: &OutputGrad<F>,
    grads: &mut [F],
) -> Result<()> {
    let p = params;
    let l = &p.layout;
    let n = cache.n;
    let d = p.cfg.d_h;
    if grads.len() != l.total || out_grad.d_logits.len() != n * n {
        return Err(Error::Shape(
            "gradient buffer does not match parameters".into(),
        ));
    }

    // Actor head.
    let mut dy = vec![F::zero(); n * n];
    for i in 0..n {
        for k in 0..n {
            let idx = i * n + k;
            if i != k && cache.y[idx] > F::zero() {
                dy[idx] = out_grad.d_logits[idx];
            }
        }
    }
    let mut dqc = vec![F::zero(); n * d];
    let mut dkc = vec![F::zero(); n * d];
    for i in 0..n {
        for k in 0..n {
            let g = dy[i * n + k];
            if g == F::zero() {
                continue;
            }
            for col in 0..d {
                dkc[i * d + col] = dkc[i * d + col] + g * cache.qc[k * d + col];
                dqc[k * d + col] = dqc[k * d + col] + g * cache.kc[i * d + col];
            }
        }
    }
    let mut dhc = linear_backward(
        &cache.hc,
        p.slice(&l.compat_q),
        &dqc,
        n,
        d,
        d,
        &mut grads[l.compat_q.clone()],
        None,
    );
    add_assign(
        &mut dhc,
        &linear_backward(
            &cache.hc,
            p.slice(&l.compat_k),
            &dkc,
            n,
            d,
            d,
            &mut grads[l.compat_k.clone()],
            None,
        ),
    );

    // Critic head.
    let dv = out_grad.d_value;
    if dv != F::zero() {
        let (dw3, db3) = pair_mut(grads, &l.critic_w3, &l.critic_b3);
        let dr2 = linear_backward(
            &cache.r2,
            p.slice(&l.critic_w3),
            &[dv],
            1,
            d,
            1,
            dw3,
            Some(db3),
        );
        let da2 = relu_backward(&cache.a2, &dr2);
        let (dw2, db2) = pair_mut(grads, &l.critic_w2, &l.critic_b2);
        let dr1 = linear_backward(
            &cache.r1,
            p.slice(&l.critic_w2),
            &da2,
            1,
            d,
            d,
            dw2,
            Some(db2),
        );
        let da1 = relu_backward(&cache.a1, &dr1);
        let (dw1, db1) = pair_mut(grads, &l.critic_w1, &l.critic_b1);
        let dz = linear_backward(
            &cache.z,
            p.slice(&l.critic_w1),
            &da1,
            1,
            d + p.cfg.d_gen,
            d,
            dw1,
            Some(db1),
        );
        let inv_n: F = c(1.0 / n as f64);
        for i in 0..n {
            for col in 0..d {
                dhc[i * d + col] = dhc[i * d + col] + dz[col] * inv_n;
            }
        }
    }

    // Pooling.
    let (dws, dbs) = pair_mut(grads, &l.pool_self_w, &l.pool_self_b);
    let mut dh = linear_backward(
        &cache.h_enc,
        p.slice(&l.pool_self_w),
        &dhc,
        n,
        d,
        d,
        dws,
        Some(dbs),
    );
    let mut dsum = vec![F::zero(); d];
    for i in 0..n {
        add_assign(&mut dsum, &dhc[i * d..(i + 1) * d]);
    }
    let (dwm, dbm) = pair_mut(grads, &l.pool_max_w, &l.pool_max_b);
    let dhmax = linear_backward(
        &cache.hmax,
        p.slice(&l.pool_max_w),
        &dsum,
        1,
        d,
        d,
        dwm,
        Some(dbm),
    );
    for col in 0..d {
        let row = cache.argmax[col];
        dh[row * d + col] = dh[row * d + col] + dhmax[col];
    }

    // Encoder stack.
    for (lc, s) in cache.layers.iter().zip(&l.layers).rev() {
        dh = encoder_backward(lc, s, p, n, &dh, grads);
    }

    let (dwe, dbe) = pair_mut(grads, &l.embed_w, &l.embed_b);
    linear_backward(
        &cache.x0,
        p.slice(&l.embed_w),
        &dh,
        n,
        p.cfg.d_in,
        d,
        dwe,
        Some(dbe),
    );

    if let Some(bad) = grads.iter().position(|g| !g.is_finite()) {
        let name = l.block_of(bad).map_or("?", |b| b.name.as_str());
        return Err(Error::NonFinite(format!("gradient of {name}")));
    }
    Ok(())
}

fn encoder_backward<F: Scalar>(
    lc: &LayerCache<F>,
    s: &LayerSlots,
    p: &PolicyParams<F>,
    n: usize,
    dout: &[F],
    grads: &mut [F],
) -> Vec<F> {
    let d = p.cfg.d_h;
    let dff = p.cfg.d_ff;
    let heads = p.cfg.n_heads;
    let dk = p.cfg.head_dim();
    let scale: F = c(1.0 / (dk as f64).sqrt());

    let (dg, db) = pair_mut(grads, &s.ln2_g, &s.ln2_b);
    let ds2 = layer_norm_backward(&lc.ln2, p.slice(&s.ln2_g), dout, n, d, dg, db);
    let (dw, db) = pair_mut(grads, &s.ff2_w, &s.ff2_b);
    let dr1 = linear_backward(&lc.r1, p.slice(&s.ff2_w), &ds2, n, dff, d, dw, Some(db));
    let dz1 = relu_backward(&lc.z1, &dr1);
    let (dw, db) = pair_mut(grads, &s.ff1_w, &s.ff1_b);
    let mut dh1 = linear_backward(&lc.h1, p.slice(&s.ff1_w), &dz1, n, d, dff, dw, Some(db));
    add_assign(&mut dh1, &ds2);

    let (dg, db) = pair_mut(grads, &s.ln1_g, &s.ln1_b);
    let ds1 = layer_norm_backward(&lc.ln1, p.slice(&s.ln1_g), &dh1, n, d, dg, db);
    let (dw, db) = pair_mut(grads, &s.wo, &s.bo);
    let dconcat = linear_backward(&lc.concat, p.slice(&s.wo), &ds1, n, d, d, dw, Some(db));

    let mut dq = vec![F::zero(); n * d];
    let mut dkv = vec![F::zero(); n * d];
    let mut dv = vec![F::zero(); n * d];
    let mut da = vec![F::zero(); n];
    for h in 0..heads {
        let off = h * dk;
        for i in 0..n {
            let a = &lc.attn[(h * n + i) * n..(h * n + i + 1) * n];
            let doi = &dconcat[i * d + off..i * d + off + dk];
            let mut dot = F::zero();
            for j in 0..n {
                let vj = &lc.v[j * d + off..j * d + off + dk];
                da[j] = doi.iter().zip(vj).map(|(&x, &y)| x * y).sum::<F>();
                dot = dot + a[j] * da[j];
                for t in 0..dk {
                    dv[j * d + off + t] = dv[j * d + off + t] + a[j] * doi[t];
                }
            }
            for j in 0..n {
                let ds = a[j] * (da[j] - dot) * scale;
                if ds == F::zero() {
                    continue;
                }
                for t in 0..dk {
                    dq[i * d + off + t] = dq[i * d + off + t] + ds * lc.k[j * d + off + t];
                    dkv[j * d + off + t] = dkv[j * d + off + t] + ds * lc.q[i * d + off + t];
                }
            }
        }
    }
    let mut dx = ds1;
    let (dw, db) = pair_mut(grads, &s.wq, &s.bq);
    add_assign(
        &mut dx,
        &linear_backward(&lc.x, p.slice(&s.wq), &dq, n, d, d, dw, Some(db)),
    );
    let (dw, db) = pair_mut(grads, &s.wk, &s.bk);
    add_assign(
        &mut dx,
        &linear_backward(&lc.x, p.slice(&s.wk), &dkv, n, d, d, dw, Some(db)),
    );
    let (dw, db) = pair_mut(grads, &s.wv, &s.bv);
    add_assign(
        &mut dx,
        &linear_backward(&lc.x, p.slice(&s.wv), &dv, n, d, d, dw, Some(db)),
    );
    dx
}
