use rand::Rng as _;

use super::{EpisodeConfig, RewardMode};
use crate::baselines::edd_sort;
use crate::error::{Error, Result};
use crate::operators::{swap, PairAction};
use crate::sched::{
    network_features, FeatureMatrix, Instance, ObjectiveConfig, Permutation, Reference,
};
use crate::seed;

/// State of one improvement episode on a borrowed instance.
#[derive(Debug, Clone)]
pub struct Episode<'a> {
    inst: &'a Instance,
    index: usize,
    obj: ObjectiveConfig,
    cfg: EpisodeConfig,
    reference: Reference,
    perm: Permutation,
    step: usize,
    best: Permutation,
    best_fc: f64,
    /// `f_c` of every visited permutation, starting with `sigma_0`.
    fc_log: Vec<f64>,
    rewards: Vec<f64>,
    actions: Vec<PairAction>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub fc: f64,
    pub done: bool,
}

/// Starts an episode on an instance drawn uniformly from `pool`.
pub fn env_reset<'a>(
    pool: &'a [Instance],
    obj: &ObjectiveConfig,
    cfg: &EpisodeConfig,
    rng: &mut seed::Rng,
) -> Result<Episode<'a>> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    let index = rng.random_range(0..pool.len());
    Episode::start(&pool[index], index, obj, cfg)
}

/// `max(0, fc_new - best_fc)`.
pub fn best_improvement_reward(best_fc: f64, fc_new: f64) -> f64 {
    (fc_new - best_fc).max(0.0)
}

/// `sum_t gamma^t r_t`.
pub fn episode_return(rewards: &[f64], gamma: f64) -> f64 {
    let mut g = 0.0;
    let mut disc = 1.0;
    for r in rewards {
        g += disc * r;
        disc *= gamma;
    }
    g
}

impl<'a> Episode<'a> {
    /// Episode on a fixed instance, starting from its EDD order.
    pub fn start(
        inst: &'a Instance,
        index: usize,
        obj: &ObjectiveConfig,
        cfg: &EpisodeConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        obj.validate()?;
        let perm = edd_sort(inst);
        let reference = Reference::of(inst, &perm, obj)?;
        Ok(Self {
            inst,
            index,
            obj: *obj,
            cfg: *cfg,
            reference,
            best: perm.clone(),
            perm,
            step: 0,
            best_fc: 0.0,
            fc_log: vec![0.0],
            rewards: Vec::with_capacity(cfg.step_budget),
            actions: Vec::with_capacity(cfg.step_budget),
        })
    }

    pub fn instance(&self) -> &'a Instance {
        self.inst
    }

    /// Position of the instance in the pool it was drawn from.
    pub fn instance_index(&self) -> usize {
        self.index
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.cfg.step_budget
    }

    pub fn permutation(&self) -> &Permutation {
        &self.perm
    }

    pub fn best(&self) -> (&Permutation, f64) {
        (&self.best, self.best_fc)
    }

    pub fn fc_log(&self) -> &[f64] {
        &self.fc_log
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn actions(&self) -> &[PairAction] {
        &self.actions
    }

    pub fn reference(&self) -> &Reference {
        &self.reference
    }

    /// Normalized network input for the current state.
    pub fn features(&self) -> Result<FeatureMatrix> {
        network_features(
            self.inst,
            &self.perm,
            &self.obj,
            self.step,
            self.cfg.step_budget,
        )
    }

    pub fn step(&mut self, action: PairAction) -> Result<StepOutcome> {
        if self.is_done() {
            return Err(Error::EpisodeDone(self.step));
        }
        let next = swap(&self.perm, action)?;
        let fc = self.reference.evaluate(self.inst, &next, &self.obj)?.fc;
        let reward = match self.cfg.reward_mode {
            RewardMode::Dense => fc / self.cfg.step_budget as f64,
            RewardMode::BestImprovement => best_improvement_reward(self.best_fc, fc),
        };
        if fc > self.best_fc {
            self.best_fc = fc;
            self.best = next.clone();
        }
        self.perm = next;
        self.step += 1;
        self.fc_log.push(fc);
        self.rewards.push(reward);
        self.actions.push(action);
        Ok(StepOutcome {
            reward,
            fc,
            done: self.is_done(),
        })
    }

    /// Discounted return of the rewards collected so far.
    pub fn discounted_return(&self) -> f64 {
        episode_return(&self.rewards, self.cfg.gamma)
    }
}
