//! Swap-improvement MDP and a clipped-surrogate actor-critic trainer.

mod env;
mod gae;
mod loss;
mod trainer;

use serde::{Deserialize, Serialize};

pub use env::{best_improvement_reward, env_reset, episode_return, Episode, StepOutcome};
pub use gae::{compute_gae, gae_advantages, TrajectoryBatch, Transition};
pub use loss::{minibatch_loss, sample_loss, LossConfig, LossStats, Sample, SampleLoss};
pub use trainer::{
    checkpoint_path, ppo_update, train, MetricsRow, RolloutStats, TrainOutcome, Trainer,
    UpdateStats, CHECKPOINT_PREFIX, FINAL_CHECKPOINT, METRICS_FILE,
};

use crate::error::{Error, Result};
use crate::optim::AdamConfig;
use crate::policy::NetConfig;
use crate::sched::{feature_width, ObjectiveConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// `r_t = f_c(sigma_{t+1}) / T`.
    #[default]
    Dense,
    /// `r_t = max(0, f_c(sigma_{t+1}) - f_c(best so far))`.
    BestImprovement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub step_budget: usize,
    pub gamma: f64,
    pub reward_mode: RewardMode,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            step_budget: 10,
            gamma: 0.99,
            reward_mode: RewardMode::Dense,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.step_budget == 0 {
            return Err(Error::Config("step_budget must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!(
                "gamma {} outside [0, 1]",
                self.gamma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub clip_param: f64,
    pub gae_lambda: f64,
    pub train_batch_size: usize,
    pub minibatch_size: usize,
    pub epochs_per_batch: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub total_env_steps: u64,
    pub value_coeff: f64,
    pub entropy_coeff: f64,
    /// Global L2 gradient norm limit; `None` disables clipping.
    pub grad_clip_norm: Option<f64>,
    /// Env steps between checkpoints; `None` means a tenth of the total.
    pub checkpoint_every: Option<u64>,
    pub normalize_advantages: bool,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip_param: 0.2,
            gae_lambda: 0.99,
            train_batch_size: 1024,
            minibatch_size: 32,
            epochs_per_batch: 20,
            lr_start: 5e-4,
            lr_end: 2e-5,
            total_env_steps: 2_000_000,
            value_coeff: 1.0,
            entropy_coeff: 0.0,
            grad_clip_norm: Some(0.5),
            checkpoint_every: None,
            normalize_advantages: true,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if !(self.clip_param > 0.0 && self.clip_param < 1.0) {
            return err(format!("clip_param {} outside (0, 1)", self.clip_param));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return err(format!("gae_lambda {} outside [0, 1]", self.gae_lambda));
        }
        if self.minibatch_size == 0 || self.minibatch_size > self.train_batch_size {
            return err(format!(
                "minibatch_size {} must be in 1..=train_batch_size ({})",
                self.minibatch_size, self.train_batch_size
            ));
        }
        if self.epochs_per_batch == 0 {
            return err("epochs_per_batch must be >= 1".into());
        }
        if !(self.lr_end >= 0.0 && self.lr_end <= self.lr_start && self.lr_start.is_finite()) {
            return err(format!(
                "learning rates must satisfy 0 <= lr_end ({}) <= lr_start ({})",
                self.lr_end, self.lr_start
            ));
        }
        if self.total_env_steps == 0 {
            return err("total_env_steps must be >= 1".into());
        }
        if self.value_coeff < 0.0 || self.entropy_coeff < 0.0 {
            return err("loss coefficients must be non-negative".into());
        }
        if matches!(self.grad_clip_norm, Some(g) if !(g > 0.0)) {
            return err("grad_clip_norm must be positive".into());
        }
        if self.checkpoint_every == Some(0) {
            return err("checkpoint_every must be >= 1".into());
        }
        Ok(())
    }

    pub fn checkpoint_interval(&self) -> u64 {
        self.checkpoint_every
            .unwrap_or_else(|| (self.total_env_steps / 10).max(1))
    }

    pub fn loss(&self) -> LossConfig {
        LossConfig {
            clip_param: self.clip_param,
            value_coeff: self.value_coeff,
            entropy_coeff: self.entropy_coeff,
        }
    }
}

/// Learning rate after `step` env steps, linear from `lr_start` to `lr_end`.
pub fn lr_schedule(step: u64, cfg: &PpoConfig) -> f64 {
    let frac = (step as f64 / cfg.total_env_steps.max(1) as f64).clamp(0.0, 1.0);
    cfg.lr_start + (cfg.lr_end - cfg.lr_start) * frac
}

/// Network dimensions minus the input width, which follows from the instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetSpec {
    pub d_h: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
}

impl Default for NetSpec {
    fn default() -> Self {
        let full = NetConfig::for_stations(1);
        Self {
            d_h: full.d_h,
            n_heads: full.n_heads,
            n_layers: full.n_layers,
            d_ff: full.d_ff,
        }
    }
}

impl NetSpec {
    pub fn for_stations(&self, stations: usize) -> NetConfig {
        NetConfig {
            d_in: feature_width(stations),
            d_h: self.d_h,
            n_heads: self.n_heads,
            n_layers: self.n_layers,
            d_ff: self.d_ff,
            d_gen: 1,
        }
    }
}

/// Everything that determines a training run. Stored verbatim in checkpoints.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub objective: ObjectiveConfig,
    pub net: NetSpec,
    pub ppo: PpoConfig,
    pub episode: EpisodeConfig,
    /// SHA-256 of the instance-pool manifest, when trained from one.
    pub pool_digest: Option<String>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.objective.validate()?;
        self.ppo.validate()?;
        self.episode.validate()?;
        self.net.for_stations(1).validate()
    }
}
