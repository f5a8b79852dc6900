use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::loss::minibatch_loss;
use super::{
    compute_gae, env_reset, lr_schedule, ExperimentConfig, PpoConfig, Sample, TrajectoryBatch,
    Transition,
};
use crate::error::{Error, Result};
use crate::optim::{clip_grad_norm, AdamState};
use crate::par;
use crate::policy::{forward, sample_action, Checkpoint, NetConfig, PolicyParams, ResumeState};
use crate::sched::Instance;
use crate::seed;

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";
pub const CHECKPOINT_PREFIX: &str = "step-";

const TAG_INIT: u64 = 0x1A17;
const TAG_ROLLOUT: u64 = 0x0E91;
const TAG_SHUFFLE: u64 = 0x5F1E;

/// Episode statistics of one collected batch.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RolloutStats {
    /// Episodes whose every step made it into the batch.
    pub completed_episodes: usize,
    pub mean_episode_return: f64,
    pub mean_final_fc: f64,
    pub mean_best_fc: f64,
}

/// Aggregates of one call to [`ppo_update`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_frac: f64,
    /// Mean gradient norm before clipping.
    pub grad_norm: f64,
    pub optimizer_steps: u64,
    /// Mean total loss of each epoch, measured before that epoch's steps.
    pub epoch_loss: Vec<f64>,
}

/// One line of the training metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub update: u64,
    pub env_steps: u64,
    pub grad_steps: u64,
    pub episodes: u64,
    pub lr: f64,
    pub completed_episodes: usize,
    pub mean_episode_return: f64,
    pub mean_final_fc: f64,
    pub mean_best_fc: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_frac: f64,
    pub grad_norm: f64,
    pub advantage_mean: f64,
    pub advantage_std: f64,
    pub advantages_normalized: bool,
}

/// Runs `epochs_per_batch` passes of shuffled minibatch steps over `batch`.
pub fn ppo_update(
    params: &mut PolicyParams<f32>,
    adam: &mut AdamState,
    batch: &TrajectoryBatch,
    cfg: &PpoConfig,
    lr: f64,
    shuffle_seed: u64,
) -> Result<UpdateStats> {
    if batch.is_empty() {
        return Err(Error::Shape("empty trajectory batch".into()));
    }
    if adam.m.len() != params.count() {
        return Err(Error::Shape(
            "optimizer state does not match parameters".into(),
        ));
    }
    let loss_cfg = cfg.loss();
    let mut rng = seed::stream(shuffle_seed, 0);
    let mut order: Vec<usize> = (0..batch.len()).collect();
    let mut stats = UpdateStats::default();
    let mut kl_last = 0.0;
    let mut last_epoch_steps = 0.0;
    for _ in 0..cfg.epochs_per_batch {
        order.shuffle(&mut rng);
        let mut epoch_total = 0.0;
        let mut steps = 0.0;
        kl_last = 0.0;
        for idx in order.chunks(cfg.minibatch_size) {
            let samples: Vec<Sample<'_>> = idx
                .iter()
                .map(|&i| {
                    let t = &batch.transitions[i];
                    Sample {
                        features: &t.features,
                        action: t.action,
                        old_log_prob: t.log_prob,
                        advantage: batch.advantages[i],
                        target: batch.targets[i],
                    }
                })
                .collect();
            let (l, mut grads) = minibatch_loss(params, &samples, &loss_cfg)?;
            let norm = match cfg.grad_clip_norm {
                Some(max) => clip_grad_norm(&mut grads, max),
                None => clip_grad_norm(&mut grads, f64::INFINITY),
            };
            if !norm.is_finite() {
                return Err(Error::NonFinite(format!(
                    "gradient (norm {norm}, loss {}, optimizer step {})",
                    l.total, adam.step
                )));
            }
            adam.step(&cfg.adam, lr, &mut params.data, &grads);
            epoch_total += l.total;
            stats.policy_loss += l.policy;
            stats.value_loss += l.value;
            stats.entropy += l.entropy;
            stats.clip_frac += l.clip_frac;
            stats.grad_norm += norm;
            kl_last += l.approx_kl;
            stats.optimizer_steps += 1;
            steps += 1.0;
        }
        stats.epoch_loss.push(epoch_total / steps);
        last_epoch_steps = steps;
    }
    if !params.is_finite() {
        return Err(Error::NonFinite("parameters after update".into()));
    }
    let k = stats.optimizer_steps as f64;
    stats.policy_loss /= k;
    stats.value_loss /= k;
    stats.entropy /= k;
    stats.clip_frac /= k;
    stats.grad_norm /= k;
    stats.approx_kl = kl_last / last_epoch_steps;
    Ok(stats)
}

/// Owns the learner state and advances it one batch at a time.
pub struct Trainer<'a> {
    pool: &'a [Instance],
    exp: ExperimentConfig,
    net: NetConfig,
    params: PolicyParams<f32>,
    adam: AdamState,
    state: ResumeState,
}

fn check_pool(pool: &[Instance]) -> Result<usize> {
    let first = pool.first().ok_or(Error::EmptyPool)?;
    let w = first.n_stations();
    for inst in pool {
        if inst.n_stations() != w {
            return Err(Error::Config(format!(
                "instance {} has {} stations, pool uses {w}",
                inst.id,
                inst.n_stations()
            )));
        }
        if inst.n_jobs() < 2 {
            return Err(Error::Config(format!(
                "instance {} has fewer than 2 jobs",
                inst.id
            )));
        }
    }
    Ok(w)
}

impl<'a> Trainer<'a> {
    pub fn new(pool: &'a [Instance], exp: ExperimentConfig) -> Result<Self> {
        exp.validate()?;
        let net = exp.net.for_stations(check_pool(pool)?);
        let params = PolicyParams::init(net, seed::derive(exp.ppo.seed, TAG_INIT))?;
        let adam = AdamState::new(params.count());
        let state = ResumeState {
            seed: exp.ppo.seed,
            ..ResumeState::default()
        };
        Ok(Self {
            pool,
            exp,
            net,
            params,
            adam,
            state,
        })
    }

    /// Restores parameters, optimizer moments and counters from `ckpt`.
    pub fn from_checkpoint(
        pool: &'a [Instance],
        exp: ExperimentConfig,
        ckpt: Checkpoint,
    ) -> Result<Self> {
        let mut t = Self::new(pool, exp)?;
        if ckpt.header.net_config != t.net {
            return Err(Error::Config(format!(
                "checkpoint network {:?} does not match experiment {:?}",
                ckpt.header.net_config, t.net
            )));
        }
        if ckpt.header.resume.seed != t.exp.ppo.seed {
            return Err(Error::Config(format!(
                "checkpoint seed {} differs from experiment seed {}",
                ckpt.header.resume.seed, t.exp.ppo.seed
            )));
        }
        t.adam = ckpt
            .optimizer
            .ok_or_else(|| Error::Checkpoint("no optimizer state; cannot resume".into()))?;
        t.params = ckpt.params;
        t.state = ckpt.header.resume;
        Ok(t)
    }

    pub fn params(&self) -> &PolicyParams<f32> {
        &self.params
    }

    pub fn state(&self) -> ResumeState {
        self.state
    }

    pub fn experiment(&self) -> &ExperimentConfig {
        &self.exp
    }

    pub fn is_finished(&self) -> bool {
        self.state.env_steps >= self.exp.ppo.total_env_steps
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let experiment = serde_json::to_value(&self.exp).expect("config serializes");
        Checkpoint::new(self.params.clone(), self.state, experiment)
            .with_optimizer(self.adam.clone())
    }

    /// Plays enough episodes with the current policy to fill one batch.
    pub fn collect(&self) -> Result<(Vec<Transition>, RolloutStats, u64)> {
        let b = self.exp.ppo.train_batch_size;
        let t = self.exp.episode.step_budget;
        let n_episodes = b.div_ceil(t);
        let rollout_seed = seed::derive(self.exp.ppo.seed, TAG_ROLLOUT);
        let first = self.state.episodes;
        let episodes = par::map_range(n_episodes, |e| {
            let mut rng = seed::stream(rollout_seed, first + e as u64);
            let mut ep = env_reset(self.pool, &self.exp.objective, &self.exp.episode, &mut rng)?;
            let mut out = Vec::with_capacity(t);
            while !ep.is_done() {
                let features = ep.features()?;
                let net_out = forward(&features, &self.params)?;
                let (action, log_prob) = sample_action(&net_out, &mut rng, false)?;
                let step = ep.step(action)?;
                out.push(Transition {
                    features,
                    action,
                    log_prob,
                    reward: step.reward,
                    value: f64::from(net_out.value),
                    done: step.done,
                    bootstrap: None,
                });
            }
            Ok::<_, Error>((
                out,
                ep.discounted_return(),
                *ep.fc_log().last().unwrap(),
                ep.best().1,
            ))
        });
        let mut transitions = Vec::with_capacity(n_episodes * t);
        let mut stats = RolloutStats::default();
        for ep in episodes {
            let (trs, ret, last_fc, best_fc) = ep?;
            let room = b - transitions.len();
            if trs.len() <= room {
                stats.completed_episodes += 1;
                stats.mean_episode_return += ret;
                stats.mean_final_fc += last_fc;
                stats.mean_best_fc += best_fc;
                transitions.extend(trs);
            } else {
                let cut = trs[room].value;
                transitions.extend(trs.into_iter().take(room));
                if let Some(last) = transitions.last_mut() {
                    last.bootstrap = Some(cut);
                }
            }
        }
        if stats.completed_episodes > 0 {
            let c = stats.completed_episodes as f64;
            stats.mean_episode_return /= c;
            stats.mean_final_fc /= c;
            stats.mean_best_fc /= c;
        }
        Ok((transitions, stats, n_episodes as u64))
    }

    /// Collects one batch and applies one PPO update. Returns the metrics row.
    pub fn step(&mut self) -> Result<MetricsRow> {
        let ppo = self.exp.ppo;
        let (transitions, rollout, n_episodes) = self.collect()?;
        let lr = lr_schedule(self.state.env_steps, &ppo);
        let batch = compute_gae(
            transitions,
            self.exp.episode.gamma,
            ppo.gae_lambda,
            ppo.normalize_advantages,
        )?;
        let shuffle_seed = seed::derive(seed::derive(ppo.seed, TAG_SHUFFLE), self.state.updates);
        let upd = ppo_update(
            &mut self.params,
            &mut self.adam,
            &batch,
            &ppo,
            lr,
            shuffle_seed,
        )?;
        self.state.env_steps += batch.len() as u64;
        self.state.updates += 1;
        self.state.episodes += n_episodes;
        Ok(MetricsRow {
            update: self.state.updates,
            env_steps: self.state.env_steps,
            grad_steps: self.adam.step,
            episodes: self.state.episodes,
            lr,
            completed_episodes: rollout.completed_episodes,
            mean_episode_return: rollout.mean_episode_return,
            mean_final_fc: rollout.mean_final_fc,
            mean_best_fc: rollout.mean_best_fc,
            policy_loss: upd.policy_loss,
            value_loss: upd.value_loss,
            entropy: upd.entropy,
            approx_kl: upd.approx_kl,
            clip_frac: upd.clip_frac,
            grad_norm: upd.grad_norm,
            advantage_mean: batch.raw_advantage_mean,
            advantage_std: batch.raw_advantage_std,
            advantages_normalized: ppo.normalize_advantages,
        })
    }
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Intermediate checkpoints in training order, then the final one.
    pub checkpoints: Vec<PathBuf>,
    pub rows: Vec<MetricsRow>,
    pub final_params: PolicyParams<f32>,
}

/// Path of the intermediate checkpoint written after `env_steps` steps.
pub fn checkpoint_path(dir: &Path, env_steps: u64) -> PathBuf {
    dir.join(format!("{CHECKPOINT_PREFIX}{env_steps:010}.ckpt"))
}

/// Trains until the step budget is spent, writing metrics and checkpoints to `out_dir`.
///
/// With `resume`, training continues from the checkpoint and metrics are appended.
pub fn train(
    pool: &[Instance],
    exp: ExperimentConfig,
    out_dir: &Path,
    resume: Option<Checkpoint>,
) -> Result<TrainOutcome> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut trainer = match resume {
        Some(ck) => Trainer::from_checkpoint(pool, exp, ck)?,
        None => Trainer::new(pool, exp)?,
    };
    let metrics_path = out_dir.join(METRICS_FILE);
    let file = if trainer.state().updates > 0 {
        OpenOptions::new()
            .append(true)
            .create(true)
            .open(&metrics_path)
    } else {
        File::create(&metrics_path)
    }
    .map_err(|e| Error::io(&metrics_path, e))?;
    let mut metrics = BufWriter::new(file);
    let every = trainer.experiment().ppo.checkpoint_interval();
    let mut outcome = TrainOutcome {
        checkpoints: Vec::new(),
        rows: Vec::new(),
        final_params: trainer.params().clone(),
    };
    while !trainer.is_finished() {
        let before = trainer.state().env_steps;
        let row = match trainer.step() {
            Ok(row) => row,
            Err(e) => {
                metrics.flush().map_err(|io| Error::io(&metrics_path, io))?;
                write_diagnostics(out_dir, &trainer, outcome.rows.last(), &e)?;
                return Err(e);
            }
        };
        log::info!(
            "update {} env_steps {} return {:.4} loss {:.4}/{:.4} entropy {:.4}",
            row.update,
            row.env_steps,
            row.mean_episode_return,
            row.policy_loss,
            row.value_loss,
            row.entropy
        );
        let line = serde_json::to_string(&row).expect("metrics serialize");
        writeln!(metrics, "{line}")
            .and_then(|_| metrics.flush())
            .map_err(|e| Error::io(&metrics_path, e))?;
        if row.env_steps / every > before / every && !trainer.is_finished() {
            let path = checkpoint_path(out_dir, row.env_steps);
            trainer.checkpoint().save(&path)?;
            outcome.checkpoints.push(path);
        }
        outcome.rows.push(row);
    }
    let path = out_dir.join(FINAL_CHECKPOINT);
    trainer.checkpoint().save(&path)?;
    outcome.checkpoints.push(path);
    outcome.final_params = trainer.params().clone();
    Ok(outcome)
}

fn write_diagnostics(
    out_dir: &Path,
    trainer: &Trainer<'_>,
    last: Option<&MetricsRow>,
    err: &Error,
) -> Result<()> {
    let path = out_dir.join("diagnostics.json");
    let snapshot = serde_json::json!({
        "error": err.to_string(),
        "resume": trainer.state(),
        "last_metrics": last,
        "params_finite": trainer.params().is_finite(),
    });
    let text = serde_json::to_string_pretty(&snapshot).expect("diagnostics serialize");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    let ck_path = out_dir.join("diagnostics.ckpt");
    trainer.checkpoint().save(&ck_path)
}
