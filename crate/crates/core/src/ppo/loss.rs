use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::PairAction;
use crate::par;
use crate::policy::{backward, forward_cached, NetOutput, OutputGrad, PolicyParams, Scalar};
use crate::sched::FeatureMatrix;

/// Samples per gradient accumulation chunk. Fixed so sums do not depend on threads.
const GRAD_CHUNK: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub clip_param: f64,
    pub value_coeff: f64,
    pub entropy_coeff: f64,
}

/// One training example for the surrogate loss.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub features: &'a FeatureMatrix,
    pub action: PairAction,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub target: f64,
}

/// Per-sample loss terms. `total = policy + value_coeff * value - entropy_coeff * entropy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleLoss {
    pub total: f64,
    pub policy: f64,
    /// Squared error to the target, before `value_coeff`.
    pub value: f64,
    pub entropy: f64,
    pub ratio: f64,
    pub log_prob: f64,
    /// Whether the clipped branch of the surrogate was active.
    pub clipped: bool,
}

/// Minibatch means of the loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossStats {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    /// Mean of `old_log_prob - log_prob`.
    pub approx_kl: f64,
    pub clip_frac: f64,
}

/// Loss of one sample and its gradient with respect to the network outputs.
pub fn sample_loss<F: Scalar>(
    out: &NetOutput<F>,
    s: &Sample<'_>,
    cfg: &LossConfig,
) -> (SampleLoss, OutputGrad<F>) {
    let n = out.n;
    let f = |x: F| x.to_f64().unwrap();
    let log_norm = f(out.log_norm);
    let logp = f(out.log_prob(s.action));
    let ratio = (logp - s.old_log_prob).exp();
    let a = s.advantage;
    let unclipped = ratio * a;
    let clipped_val = ratio.clamp(1.0 - cfg.clip_param, 1.0 + cfg.clip_param) * a;
    let clipped = clipped_val < unclipped;
    let policy = -unclipped.min(clipped_val);
    let d_logp = if clipped { 0.0 } else { -a * ratio };

    let entropy = f(out.entropy());
    let v = f(out.value);
    let value = (v - s.target).powi(2);

    let target_idx = s.action.flat(n);
    let mut d_logits = vec![F::zero(); n * n];
    for (idx, d) in d_logits.iter_mut().enumerate() {
        if idx % (n + 1) == 0 {
            continue;
        }
        let p = f(out.probs[idx]);
        let indicator = if idx == target_idx { 1.0 } else { 0.0 };
        let mut g = d_logp * (indicator - p);
        if cfg.entropy_coeff != 0.0 && p > 0.0 {
            let log_p = f(out.logits[idx]) - log_norm;
            // dH/dz_j = -p_j (log p_j + H)
            g += cfg.entropy_coeff * p * (log_p + entropy);
        }
        *d = F::from_f64(g).unwrap();
    }
    let d_value = F::from_f64(2.0 * cfg.value_coeff * (v - s.target)).unwrap();
    let loss = SampleLoss {
        total: policy + cfg.value_coeff * value - cfg.entropy_coeff * entropy,
        policy,
        value,
        entropy,
        ratio,
        log_prob: logp,
        clipped,
    };
    (loss, OutputGrad { d_logits, d_value })
}

/// Mean loss over `samples` and its parameter gradient.
pub fn minibatch_loss<F: Scalar>(
    params: &PolicyParams<F>,
    samples: &[Sample<'_>],
    cfg: &LossConfig,
) -> Result<(LossStats, Vec<F>)> {
    if samples.is_empty() {
        return Err(Error::Shape("empty minibatch".into()));
    }
    let chunks = par::map_chunks(
        samples,
        GRAD_CHUNK,
        |chunk| -> Result<(LossStats, Vec<F>)> {
            let mut grads = vec![F::zero(); params.count()];
            let mut acc = LossStats::default();
            for s in chunk {
                let (out, cache) = forward_cached(s.features, params)?;
                let (l, g) = sample_loss(&out, s, cfg);
                backward(&cache, params, &g, &mut grads)?;
                acc.total += l.total;
                acc.policy += l.policy;
                acc.value += l.value;
                acc.entropy += l.entropy;
                acc.approx_kl += s.old_log_prob - l.log_prob;
                acc.clip_frac += if l.clipped { 1.0 } else { 0.0 };
            }
            Ok((acc, grads))
        },
    );
    let mut stats = LossStats::default();
    let mut grads = vec![F::zero(); params.count()];
    for chunk in chunks {
        let (acc, g) = chunk?;
        stats.total += acc.total;
        stats.policy += acc.policy;
        stats.value += acc.value;
        stats.entropy += acc.entropy;
        stats.approx_kl += acc.approx_kl;
        stats.clip_frac += acc.clip_frac;
        for (t, v) in grads.iter_mut().zip(g) {
            *t = *t + v;
        }
    }
    let m = samples.len() as f64;
    let inv = F::from_f64(1.0 / m).unwrap();
    for g in grads.iter_mut() {
        *g = *g * inv;
    }
    stats.total /= m;
    stats.policy /= m;
    stats.value /= m;
    stats.entropy /= m;
    stats.approx_kl /= m;
    stats.clip_frac /= m;
    if !stats.total.is_finite() {
        return Err(Error::NonFinite(format!(
            "minibatch loss (policy {}, value {}, entropy {})",
            stats.policy, stats.value, stats.entropy
        )));
    }
    Ok((stats, grads))
}
