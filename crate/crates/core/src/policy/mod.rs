//! Actor-critic network: transformer encoder over the job sequence, a
//! compatibility-matrix head over position pairs and a mean-pooled critic.
//!
//! All math is generic over [`Scalar`] so that the same code runs in `f32` for
//! training and inference and in `f64` for gradient checking.

mod checkpoint;
mod net;
mod ops;
mod params;

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};
use rand::Rng as _;

pub use checkpoint::{Checkpoint, CheckpointHeader, ResumeState, FORMAT_VERSION, MAGIC};
pub use net::{
    backward, compatibility, critic_value, embed_jobs, encoder_layer, forward, forward_cached,
    pool_and_integrate, ForwardCache, NetOutput, OutputGrad,
};
pub use params::{Block, Layout, NetConfig, PolicyParams};

use crate::error::{Error, Result};
use crate::operators::PairAction;
use crate::seed;

/// Floating point types the network can run in.
pub trait Scalar: Float + FromPrimitive + Sum + Debug + Default + Send + Sync + 'static {}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Draws a swap from the policy distribution, or takes the most likely pair when
/// `greedy`. Returns the action and its log-probability.
pub fn sample_action<F: Scalar>(
    out: &NetOutput<F>,
    rng: &mut seed::Rng,
    greedy: bool,
) -> Result<(PairAction, f64)> {
    let n = out.n;
    let total: f64 = out.probs.iter().map(|p| p.to_f64().unwrap()).sum();
    if !(total.is_finite() && (total - 1.0).abs() < 1e-3) {
        return Err(Error::DegenerateDistribution(total));
    }
    let off_diag = |idx: &usize| !idx.is_multiple_of(n + 1);
    let idx = if greedy {
        let mut best = 1;
        for idx in (0..n * n).filter(off_diag) {
            if out.probs[idx] > out.probs[best] {
                best = idx;
            }
        }
        best
    } else {
        let u: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        let mut last_positive = None;
        for idx in (0..n * n).filter(off_diag) {
            let p = out.probs[idx].to_f64().unwrap();
            if p > 0.0 {
                last_positive = Some(idx);
            }
            acc += p;
            if u < acc && p > 0.0 {
                chosen = Some(idx);
                break;
            }
        }
        chosen
            .or(last_positive)
            .ok_or(Error::DegenerateDistribution(total))?
    };
    let a = PairAction::from_flat(idx, n);
    Ok((a, out.log_prob(a).to_f64().unwrap()))
}
