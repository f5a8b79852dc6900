use crate::error::{Error, Result};
use crate::operators::PairAction;
use crate::sched::FeatureMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub features: FeatureMatrix,
    pub action: PairAction,
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    pub done: bool,
    /// Value of the next state when the batch cuts the episode after this step.
    pub bootstrap: Option<f64>,
}

/// Transitions with aligned advantages and value targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBatch {
    pub transitions: Vec<Transition>,
    /// Advantages used by the policy loss, normalized when requested.
    pub advantages: Vec<f64>,
    /// Raw advantages plus value estimates.
    pub targets: Vec<f64>,
    pub raw_advantage_mean: f64,
    pub raw_advantage_std: f64,
}

impl TrajectoryBatch {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

/// Unnormalized GAE over consecutive transitions.
///
/// The recursion restarts at every `done` (no bootstrap) and at every cut
/// episode (bootstrapped from `bootstrap`). The last transition must be one of
/// the two.
pub fn gae_advantages(transitions: &[Transition], gamma: f64, lambda: f64) -> Result<Vec<f64>> {
    let n = transitions.len();
    let mut adv = vec![0.0; n];
    let mut carry = 0.0;
    for t in (0..n).rev() {
        let tr = &transitions[t];
        let next_value = if tr.done {
            carry = 0.0;
            0.0
        } else if let Some(v) = tr.bootstrap {
            carry = 0.0;
            v
        } else if t + 1 < n {
            transitions[t + 1].value
        } else {
            return Err(Error::Config(
                "last transition is neither terminal nor bootstrapped".into(),
            ));
        };
        let delta = tr.reward + gamma * next_value - tr.value;
        carry = delta + gamma * lambda * carry;
        adv[t] = carry;
    }
    Ok(adv)
}

pub fn compute_gae(
    transitions: Vec<Transition>,
    gamma: f64,
    lambda: f64,
    normalize: bool,
) -> Result<TrajectoryBatch> {
    let raw = gae_advantages(&transitions, gamma, lambda)?;
    let targets = raw
        .iter()
        .zip(&transitions)
        .map(|(a, t)| a + t.value)
        .collect();
    let n = raw.len().max(1) as f64;
    let mean = raw.iter().sum::<f64>() / n;
    let std = (raw.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n).sqrt();
    let advantages = if normalize {
        let denom = std + 1e-8;
        raw.iter().map(|a| (a - mean) / denom).collect()
    } else {
        raw
    };
    Ok(TrajectoryBatch {
        transitions,
        advantages,
        targets,
        raw_advantage_mean: mean,
        raw_advantage_std: std,
    })
}
