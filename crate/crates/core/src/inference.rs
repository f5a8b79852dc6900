//! Deployment-time search: stochastic rollouts, multirun and multipolicy.
//!
//! Run `r` on an instance always draws from the same RNG stream, whichever
//! policy is being rolled out. Multipolicy therefore replays exactly the runs
//! of multirun on the final policy, and its best value can never be lower.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{edd_sort, random_pair};
use crate::error::{Error, Result};
use crate::operators::PairAction;
use crate::par;
use crate::policy::{forward, sample_action, Checkpoint, PolicyParams};
use crate::ppo::{Episode, EpisodeConfig, CHECKPOINT_PREFIX, FINAL_CHECKPOINT};
use crate::sched::{feature_width, Instance, ObjectiveConfig, ObjectiveReport, Permutation};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceConfig {
    pub runs_per_policy: usize,
    pub step_budget: usize,
    /// Ordered checkpoint files, final policy last.
    pub checkpoint_paths: Vec<PathBuf>,
    pub greedy: bool,
    pub seed: u64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            runs_per_policy: 30,
            step_budget: 10,
            checkpoint_paths: Vec::new(),
            greedy: false,
            seed: 0,
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs_per_policy == 0 || self.step_budget == 0 {
            return Err(Error::Config(
                "runs_per_policy and step_budget must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Something that picks the next swap for an episode.
pub trait SwapPolicy: Sync {
    fn choose(&self, ep: &Episode<'_>, rng: &mut seed::Rng, greedy: bool) -> Result<PairAction>;

    /// Rejects instances the policy cannot be applied to.
    fn check(&self, _inst: &Instance) -> Result<()> {
        Ok(())
    }
}

impl SwapPolicy for PolicyParams<f32> {
    fn choose(&self, ep: &Episode<'_>, rng: &mut seed::Rng, greedy: bool) -> Result<PairAction> {
        let out = forward(&ep.features()?, self)?;
        Ok(sample_action(&out, rng, greedy)?.0)
    }

    fn check(&self, inst: &Instance) -> Result<()> {
        let w = feature_width(inst.n_stations());
        if w != self.cfg.d_in {
            return Err(Error::Config(format!(
                "policy expects {} input features, instance {} has {} stations ({w} features)",
                self.cfg.d_in,
                inst.id,
                inst.n_stations()
            )));
        }
        Ok(())
    }
}

/// Uniformly random swaps.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformPolicy;

impl SwapPolicy for UniformPolicy {
    fn choose(&self, ep: &Episode<'_>, rng: &mut seed::Rng, _greedy: bool) -> Result<PairAction> {
        Ok(random_pair(ep.permutation().len(), rng))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub best: Permutation,
    pub report: ObjectiveReport,
    pub actions: Vec<PairAction>,
    /// `f_c` of every visited permutation, `sigma_0` first.
    pub fc_log: Vec<f64>,
}

/// Plays `step_budget` swaps from the EDD order and keeps the best permutation seen.
pub fn run_episode<P: SwapPolicy + ?Sized>(
    inst: &Instance,
    policy: &P,
    obj: &ObjectiveConfig,
    step_budget: usize,
    greedy: bool,
    rng: &mut seed::Rng,
) -> Result<EpisodeResult> {
    policy.check(inst)?;
    if inst.n_jobs() < 2 {
        let best = edd_sort(inst);
        let report = crate::sched::combined_objective(inst, &best, &best, obj)?;
        return Ok(EpisodeResult {
            best,
            report,
            actions: Vec::new(),
            fc_log: vec![0.0],
        });
    }
    let cfg = EpisodeConfig {
        step_budget,
        ..EpisodeConfig::default()
    };
    let mut ep = Episode::start(inst, 0, obj, &cfg)?;
    while !ep.is_done() {
        let a = policy.choose(&ep, rng, greedy)?;
        ep.step(a)?;
    }
    let best = ep.best().0.clone();
    let report = ep.reference().evaluate(inst, &best, obj)?;
    Ok(EpisodeResult {
        best,
        report,
        actions: ep.actions().to_vec(),
        fc_log: ep.fc_log().to_vec(),
    })
}

/// RNG for run `run` on `inst`; shared by every policy.
pub fn run_stream(cfg: &InferenceConfig, inst: &Instance, run: usize) -> seed::Rng {
    seed::stream(seed::derive_str(cfg.seed, &inst.id), run as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultirunResult {
    pub best: Permutation,
    pub report: ObjectiveReport,
    pub per_run_fc: Vec<f64>,
    /// Index of the run that produced `best`; the first one on ties.
    pub best_run: usize,
    pub steps: u64,
}

/// Best of `runs_per_policy` independent episodes.
pub fn multirun<P: SwapPolicy + ?Sized>(
    inst: &Instance,
    policy: &P,
    obj: &ObjectiveConfig,
    cfg: &InferenceConfig,
) -> Result<MultirunResult> {
    cfg.validate()?;
    let runs = par::map_range(cfg.runs_per_policy, |r| {
        let mut rng = run_stream(cfg, inst, r);
        run_episode(inst, policy, obj, cfg.step_budget, cfg.greedy, &mut rng)
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let mut best_run = 0;
    for (r, res) in runs.iter().enumerate() {
        if res.report.fc > runs[best_run].report.fc {
            best_run = r;
        }
    }
    let per_run_fc = runs.iter().map(|r| r.report.fc).collect();
    let best = runs.into_iter().nth(best_run).unwrap();
    Ok(MultirunResult {
        best: best.best,
        report: best.report,
        per_run_fc,
        best_run,
        steps: (cfg.runs_per_policy * cfg.step_budget) as u64,
    })
}

/// A loaded policy and where it came from.
#[derive(Debug, Clone)]
pub struct NamedPolicy {
    pub label: String,
    pub digest: String,
    pub params: PolicyParams<f32>,
}

impl NamedPolicy {
    pub fn load(path: &Path) -> Result<Self> {
        let ck = Checkpoint::load(path)?;
        Ok(Self {
            label: path.display().to_string(),
            digest: ck.params_digest(),
            params: ck.params,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyResult {
    pub checkpoint: String,
    pub digest: String,
    pub best_fc: f64,
    pub per_run_fc: Vec<f64>,
}

/// Serialized outcome of a search strategy on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub instance_id: String,
    pub strategy: String,
    /// Every run of every policy, policy-major.
    pub per_run_fc: Vec<f64>,
    pub per_policy: Vec<PolicyResult>,
    /// 1-based job order.
    pub best_permutation: Vec<usize>,
    pub report: ObjectiveReport,
    pub steps: u64,
    pub checkpoint_digests: Vec<String>,
    pub seed: u64,
}

/// Multirun over every policy in `policies`; the global best wins, earlier
/// policies first on ties.
pub fn multipolicy(
    inst: &Instance,
    policies: &[NamedPolicy],
    obj: &ObjectiveConfig,
    cfg: &InferenceConfig,
) -> Result<ResultRecord> {
    if policies.is_empty() {
        return Err(Error::Config("at least one checkpoint is required".into()));
    }
    let strategy = if policies.len() == 1 {
        "RL-MR"
    } else {
        "RL-MPMR"
    };
    let mut best: Option<MultirunResult> = None;
    let mut per_policy = Vec::with_capacity(policies.len());
    let mut per_run_fc = Vec::new();
    for p in policies {
        let res = multirun(inst, &p.params, obj, cfg)?;
        per_run_fc.extend_from_slice(&res.per_run_fc);
        per_policy.push(PolicyResult {
            checkpoint: p.label.clone(),
            digest: p.digest.clone(),
            best_fc: res.report.fc,
            per_run_fc: res.per_run_fc.clone(),
        });
        if best.as_ref().is_none_or(|b| res.report.fc > b.report.fc) {
            best = Some(res);
        }
    }
    let best = best.unwrap();
    Ok(ResultRecord {
        instance_id: inst.id.clone(),
        strategy: strategy.into(),
        per_run_fc,
        per_policy,
        best_permutation: best.best.to_one_based(),
        report: best.report,
        steps: (policies.len() * cfg.runs_per_policy * cfg.step_budget) as u64,
        checkpoint_digests: policies.iter().map(|p| p.digest.clone()).collect(),
        seed: cfg.seed,
    })
}

/// Default multipolicy selection in `dir`: up to `earlier` of the latest
/// intermediate checkpoints whose training step differs from the final one,
/// oldest first, followed by the final checkpoint.
pub fn select_checkpoints(dir: &Path, earlier: usize) -> Result<Vec<PathBuf>> {
    let final_path = dir.join(FINAL_CHECKPOINT);
    let final_step = Checkpoint::load(&final_path)?.header.training_step;
    let mut found = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with(CHECKPOINT_PREFIX) && name.ends_with(".ckpt") {
            let step = Checkpoint::load(&path)?.header.training_step;
            if step != final_step {
                found.push((step, path));
            }
        }
    }
    found.sort();
    found.dedup_by_key(|(s, _)| *s);
    let skip = found.len().saturating_sub(earlier);
    let mut out: Vec<PathBuf> = found.into_iter().skip(skip).map(|(_, p)| p).collect();
    out.push(final_path);
    Ok(out)
}

/// Index of the policy with the highest mean single-policy multirun fc over
/// `instances`, with that mean; earlier policies win ties.
pub fn best_on_validation(
    policies: &[NamedPolicy],
    instances: &[Instance],
    obj: &ObjectiveConfig,
    cfg: &InferenceConfig,
) -> Result<(usize, f64)> {
    if policies.is_empty() || instances.is_empty() {
        return Err(Error::Config(
            "validation needs at least one policy and one instance".into(),
        ));
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (i, p) in policies.iter().enumerate() {
        let mut sum = 0.0;
        for inst in instances {
            sum += multirun(inst, &p.params, obj, cfg)?.report.fc;
        }
        let mean = sum / instances.len() as f64;
        if mean > best.1 {
            best = (i, mean);
        }
    }
    Ok(best)
}
