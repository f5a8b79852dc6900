//! Problem model for the permutation flow shop with fixed station time.
//!
//! Every job visits the `W` workstations in order and spends exactly one
//! station window `T_W` at each, so the completion time of the job at position
//! `i` depends only on the position. Two objectives are evaluated on a job
//! permutation:
//!
//! * `f1`: sum over positions of `exp(tardiness / tau)`, minimized.
//! * `f2`: sum over stations and adjacent pairs of the absolute processing-time
//!   difference, maximized (long and short operations should alternate).
//!
//! Both are combined relative to a reference permutation (normally the
//! earliest-due-date order) into `fc = a1 * (f1(ref) - f1) + a2 * (f2 - f2(ref))`.
//!
//! Positions are 0-based throughout the library API. Files and the CLI use
//! 1-based job indices; see [`Permutation::to_one_based`].

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent arguments are clamped to this magnitude before `exp`.
pub const EXP_CLAMP: f64 = 500.0;

/// One job: per-station processing times and a due date, both in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    #[serde(rename = "p_s")]
    pub processing_times: Vec<f64>,
    #[serde(rename = "due_s")]
    pub due_date: f64,
}

/// A job set to be sequenced on one line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    #[serde(rename = "station_time_s")]
    pub station_time: f64,
    pub jobs: Vec<Job>,
}

/// A single invariant violation found by [`validate_instance`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// 0-based job index, if the violation concerns a job.
    pub job: Option<usize>,
    /// 0-based workstation index, if the violation concerns one processing time.
    pub station: Option<usize>,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.job, self.station) {
            (Some(j), Some(w)) => write!(f, "job {} station {}: {}", j + 1, w + 1, self.reason),
            (Some(j), None) => write!(f, "job {}: {}", j + 1, self.reason),
            _ => write!(f, "{}", self.reason),
        }
    }
}

/// Checks every job and instance invariant. An empty list means the instance is valid.
pub fn validate_instance(inst: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();
    let global = |reason: String| Violation {
        job: None,
        station: None,
        reason,
    };
    if inst.jobs.len() < 2 {
        out.push(global(format!(
            "need at least 2 jobs, found {}",
            inst.jobs.len()
        )));
    }
    if !(inst.station_time.is_finite() && inst.station_time > 0.0) {
        out.push(global(format!(
            "station time must be positive, found {}",
            inst.station_time
        )));
    }
    let w = inst.jobs.first().map_or(0, |j| j.processing_times.len());
    if !inst.jobs.is_empty() && w == 0 {
        out.push(global("need at least 1 workstation".into()));
    }
    for (j, job) in inst.jobs.iter().enumerate() {
        if job.processing_times.len() != w {
            out.push(Violation {
                job: Some(j),
                station: None,
                reason: format!(
                    "wrong arity: {} processing times, expected {}",
                    job.processing_times.len(),
                    w
                ),
            });
        }
        for (s, &p) in job.processing_times.iter().enumerate() {
            if !(p.is_finite() && p >= 0.0 && p <= inst.station_time) {
                out.push(Violation {
                    job: Some(j),
                    station: Some(s),
                    reason: format!("processing time {p} outside [0, {}]", inst.station_time),
                });
            }
        }
        if !(job.due_date.is_finite() && job.due_date > 0.0) {
            out.push(Violation {
                job: Some(j),
                station: None,
                reason: format!("due date must be positive, found {}", job.due_date),
            });
        }
    }
    out
}

impl Instance {
    pub fn n_jobs(&self) -> usize {
        self.jobs.len()
    }

    pub fn n_stations(&self) -> usize {
        self.jobs.first().map_or(0, |j| j.processing_times.len())
    }

    /// Validates and wraps violations into an error.
    pub fn validated(self) -> Result<Self> {
        let v = validate_instance(&self);
        if v.is_empty() {
            Ok(self)
        } else {
            let summary = v
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join("; ");
            Err(Error::InvalidInstance {
                id: self.id,
                summary,
            })
        }
    }

    /// Reads an instance file and rejects it if any invariant is violated.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let inst: Instance = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        inst.validated()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Completion time of the last position.
    pub fn last_completion(&self) -> f64 {
        self.station_time * (self.n_stations() + self.n_jobs() - 1) as f64
    }
}

/// Completion time of the job at 0-based `position`: `T_W * (W + position)`.
pub fn completion_time(inst: &Instance, position: usize) -> Result<f64> {
    let n = inst.n_jobs();
    if position >= n {
        return Err(Error::PositionOutOfRange { position, len: n });
    }
    Ok(completion_unchecked(inst, position))
}

#[inline]
pub(crate) fn completion_unchecked(inst: &Instance, position: usize) -> f64 {
    inst.station_time * (inst.n_stations() + position) as f64
}

/// A job ordering. `order[i]` is the 0-based index of the job at position `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    order: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self {
            order: (0..n).collect(),
        }
    }

    /// Builds a permutation from 0-based job indices.
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &j in &order {
            if j >= n {
                return Err(Error::InvalidPermutation(format!(
                    "job index {j} out of range for {n} jobs"
                )));
            }
            if std::mem::replace(&mut seen[j], true) {
                return Err(Error::InvalidPermutation(format!("job index {j} repeated")));
            }
        }
        Ok(Self { order })
    }

    /// Builds a permutation from 1-based job indices (file and CLI convention).
    pub fn from_one_based(order: &[usize]) -> Result<Self> {
        let zero = order
            .iter()
            .map(|&j| {
                j.checked_sub(1).ok_or_else(|| {
                    Error::InvalidPermutation("1-based job index 0 is not allowed".into())
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(zero)
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.order.iter().map(|j| j + 1).collect()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.order
    }

    /// Job index at `position`.
    #[inline]
    pub fn job_at(&self, position: usize) -> usize {
        self.order[position]
    }

    pub fn reversed(&self) -> Self {
        let mut order = self.order.clone();
        order.reverse();
        Self { order }
    }

    /// Checks the bijection invariant.
    pub fn is_valid(&self) -> bool {
        Self::new(self.order.clone()).is_ok()
    }

    /// Exchanges two positions in place. Callers are responsible for bounds.
    #[inline]
    pub(crate) fn swap_in_place(&mut self, i: usize, k: usize) {
        self.order.swap(i, k);
    }

    pub(crate) fn order_mut(&mut self) -> &mut Vec<usize> {
        &mut self.order
    }

    pub(crate) fn check_len(&self, inst: &Instance) -> Result<()> {
        if self.len() != inst.n_jobs() {
            return Err(Error::InvalidPermutation(format!(
                "permutation has {} entries, instance {} has {} jobs",
                self.len(),
                inst.id,
                inst.n_jobs()
            )));
        }
        Ok(())
    }
}

/// Objective weights and tardiness time scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub alpha1: f64,
    pub alpha2: f64,
    /// Seconds of tardiness per unit of exponent.
    #[serde(rename = "tardiness_scale_s", default = "default_tardiness_scale")]
    pub tardiness_scale: f64,
}

fn default_tardiness_scale() -> f64 {
    3600.0
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            alpha1: 1.0,
            alpha2: 0.01,
            tardiness_scale: default_tardiness_scale(),
        }
    }
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha1 >= 0.0
            && self.alpha2 >= 0.0
            && (self.alpha1 > 0.0 || self.alpha2 > 0.0)
            && self.tardiness_scale > 0.0
            && self.tardiness_scale.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "objective weights must be non-negative and not both zero, tardiness scale positive: {self:?}"
            )))
        }
    }

    #[inline]
    pub fn combine(&self, delta_f1: f64, delta_f2: f64) -> f64 {
        self.alpha1 * delta_f1 + self.alpha2 * delta_f2
    }
}

/// Evaluated objectives of one permutation relative to a reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveReport {
    pub f1: f64,
    pub f2: f64,
    pub delta_f1: f64,
    pub delta_f2: f64,
    pub fc: f64,
}

/// Signed tardiness of the job at `position`; negative when early.
pub fn tardiness(inst: &Instance, perm: &Permutation, position: usize) -> Result<f64> {
    perm.check_len(inst)?;
    let c = completion_time(inst, position)?;
    Ok(c - inst.jobs[perm.job_at(position)].due_date)
}

/// `exp(t / tau)` with the exponent clamped to `±EXP_CLAMP`. The flag reports clamping.
#[inline]
pub fn exp_tardiness(tard: f64, cfg: &ObjectiveConfig) -> (f64, bool) {
    let x = tard / cfg.tardiness_scale;
    if x > EXP_CLAMP {
        (EXP_CLAMP.exp(), true)
    } else if x < -EXP_CLAMP {
        ((-EXP_CLAMP).exp(), true)
    } else {
        (x.exp(), false)
    }
}

#[inline]
pub(crate) fn g_at(
    inst: &Instance,
    job: usize,
    position: usize,
    cfg: &ObjectiveConfig,
) -> (f64, bool) {
    exp_tardiness(
        completion_unchecked(inst, position) - inst.jobs[job].due_date,
        cfg,
    )
}

/// Exponentially weighted tardiness of the job at `position`.
pub fn weighted_tardiness(
    inst: &Instance,
    perm: &Permutation,
    position: usize,
    cfg: &ObjectiveConfig,
) -> Result<f64> {
    Ok(exp_tardiness(tardiness(inst, perm, position)?, cfg).0)
}

fn f1_unchecked(inst: &Instance, perm: &Permutation, cfg: &ObjectiveConfig) -> f64 {
    let mut clamped = false;
    let total = (0..perm.len())
        .map(|i| {
            let (g, c) = g_at(inst, perm.job_at(i), i, cfg);
            clamped |= c;
            g
        })
        .sum();
    if clamped {
        log::warn!(
            "instance {}: tardiness exponent clamped to +/-{EXP_CLAMP}",
            inst.id
        );
    }
    total
}

/// Tardiness objective, to be minimized.
pub fn objective_f1(inst: &Instance, perm: &Permutation, cfg: &ObjectiveConfig) -> Result<f64> {
    perm.check_len(inst)?;
    Ok(f1_unchecked(inst, perm, cfg))
}

#[inline]
pub(crate) fn adjacency(inst: &Instance, a: usize, b: usize) -> f64 {
    inst.jobs[a]
        .processing_times
        .iter()
        .zip(&inst.jobs[b].processing_times)
        .map(|(x, y)| (x - y).abs())
        .sum()
}

fn f2_unchecked(inst: &Instance, perm: &Permutation) -> f64 {
    perm.as_slice()
        .windows(2)
        .map(|w| adjacency(inst, w[0], w[1]))
        .sum()
}

/// Stress objective, to be maximized.
pub fn objective_f2(inst: &Instance, perm: &Permutation) -> Result<f64> {
    perm.check_len(inst)?;
    Ok(f2_unchecked(inst, perm))
}

/// Cached reference values for repeated evaluation against the same start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub f1: f64,
    pub f2: f64,
}

impl Reference {
    pub fn of(inst: &Instance, perm: &Permutation, cfg: &ObjectiveConfig) -> Result<Self> {
        Ok(Self {
            f1: objective_f1(inst, perm, cfg)?,
            f2: objective_f2(inst, perm)?,
        })
    }

    pub fn report(&self, f1: f64, f2: f64, cfg: &ObjectiveConfig) -> ObjectiveReport {
        let delta_f1 = self.f1 - f1;
        let delta_f2 = f2 - self.f2;
        ObjectiveReport {
            f1,
            f2,
            delta_f1,
            delta_f2,
            fc: cfg.combine(delta_f1, delta_f2),
        }
    }

    pub fn evaluate(
        &self,
        inst: &Instance,
        perm: &Permutation,
        cfg: &ObjectiveConfig,
    ) -> Result<ObjectiveReport> {
        perm.check_len(inst)?;
        Ok(self.report(f1_unchecked(inst, perm, cfg), f2_unchecked(inst, perm), cfg))
    }
}

/// Both objectives of `perm` and their weighted improvement over `reference`.
pub fn combined_objective(
    inst: &Instance,
    perm: &Permutation,
    reference: &Permutation,
    cfg: &ObjectiveConfig,
) -> Result<ObjectiveReport> {
    Reference::of(inst, reference, cfg)?.evaluate(inst, perm, cfg)
}

/// Per-job features plus the episode-progress feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    width: usize,
    rows: Vec<f64>,
    pub general: f64,
}

impl FeatureMatrix {
    pub fn new(n: usize, width: usize, rows: Vec<f64>, general: f64) -> Result<Self> {
        if rows.len() != n * width {
            return Err(Error::Shape(format!(
                "{} feature values for {n} rows of width {width}",
                rows.len()
            )));
        }
        Ok(Self {
            n,
            width,
            rows,
            general,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.width..(i + 1) * self.width]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.rows
    }
}

/// Width of a job feature row for `w` stations.
pub const fn feature_width(w: usize) -> usize {
    2 * w + 2
}

/// Raw per-job features in seconds.
///
/// Row `i` holds the processing times of the job at `i`, the signed differences
/// to the next job (zero for the last row), the due date and the weighted
/// tardiness.
pub fn job_features(
    inst: &Instance,
    perm: &Permutation,
    cfg: &ObjectiveConfig,
) -> Result<FeatureMatrix> {
    perm.check_len(inst)?;
    Ok(build_features(inst, perm, cfg, 1.0, 1.0, 0.0))
}

/// Normalized features fed to the policy network.
///
/// Processing times and differences are divided by the station time, due dates
/// by the last completion time. Weighted tardiness is passed through.
pub fn network_features(
    inst: &Instance,
    perm: &Permutation,
    cfg: &ObjectiveConfig,
    step: usize,
    budget: usize,
) -> Result<FeatureMatrix> {
    perm.check_len(inst)?;
    Ok(build_features(
        inst,
        perm,
        cfg,
        inst.station_time,
        inst.last_completion(),
        general_feature(step, budget),
    ))
}

fn build_features(
    inst: &Instance,
    perm: &Permutation,
    cfg: &ObjectiveConfig,
    time_norm: f64,
    due_norm: f64,
    general: f64,
) -> FeatureMatrix {
    let n = inst.n_jobs();
    let w = inst.n_stations();
    let width = feature_width(w);
    let mut rows = vec![0.0; n * width];
    for i in 0..n {
        let job = &inst.jobs[perm.job_at(i)];
        let row = &mut rows[i * width..(i + 1) * width];
        for s in 0..w {
            row[s] = job.processing_times[s] / time_norm;
        }
        if i + 1 < n {
            let next = &inst.jobs[perm.job_at(i + 1)];
            for s in 0..w {
                row[w + s] = (job.processing_times[s] - next.processing_times[s]) / time_norm;
            }
        }
        row[2 * w] = job.due_date / due_norm;
        row[2 * w + 1] = g_at(inst, perm.job_at(i), i, cfg).0;
    }
    FeatureMatrix {
        n,
        width,
        rows,
        general,
    }
}

/// Episode progress `step / budget`, clamped to `[0, 1]`.
pub fn general_feature(step: usize, budget: usize) -> f64 {
    let budget = budget.max(1);
    (step.min(budget)) as f64 / budget as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(w: usize, t_w: f64, jobs: &[(&[f64], f64)]) -> Instance {
        let _ = w;
        Instance {
            id: "t".into(),
            station_time: t_w,
            jobs: jobs
                .iter()
                .map(|(p, d)| Job {
                    processing_times: p.to_vec(),
                    due_date: *d,
                })
                .collect(),
        }
    }

    #[test]
    fn validation_cases() {
        let ok = inst(2, 208.0, &[(&[100.0, 208.0], 10.0), (&[0.0, 1.0], 5.0)]);
        assert!(validate_instance(&ok).is_empty());

        let over = inst(2, 208.0, &[(&[209.0, 10.0], 10.0), (&[0.0, 1.0], 5.0)]);
        let v = validate_instance(&over);
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].job, v[0].station), (Some(0), Some(0)));

        let arity = inst(2, 208.0, &[(&[1.0, 2.0], 10.0), (&[1.0, 2.0, 3.0], 5.0)]);
        let v = validate_instance(&arity);
        assert!(v[0].reason.contains("wrong arity"), "{v:?}");

        let single = inst(1, 1.0, &[(&[1.0], 1.0)]);
        assert!(!validate_instance(&single).is_empty());

        let bad_due = inst(1, 1.0, &[(&[1.0], 0.0), (&[1.0], 1.0)]);
        assert_eq!(validate_instance(&bad_due)[0].job, Some(0));
        assert!(bad_due.validated().is_err());
    }

    #[test]
    fn completion_times() {
        let p = vec![1.0; 12];
        let jobs: Vec<(&[f64], f64)> = (0..20).map(|_| (p.as_slice(), 1.0)).collect();
        let i = inst(12, 208.0, &jobs);
        assert_eq!(completion_time(&i, 0).unwrap(), 2496.0);
        assert_eq!(completion_time(&i, 19).unwrap(), 6448.0);
        assert!(completion_time(&i, 20).is_err());
        let unit = inst(1, 1.0, &[(&[1.0], 1.0), (&[1.0], 1.0)]);
        assert_eq!(completion_time(&unit, 0).unwrap(), 1.0);
    }

    #[test]
    fn tardiness_values() {
        let p = vec![1.0; 12];
        let mut jobs: Vec<(&[f64], f64)> = (0..20).map(|_| (p.as_slice(), 1.0)).collect();
        jobs[0].1 = 3000.0;
        jobs[1].1 = 2496.0;
        jobs[19].1 = 6000.0;
        let i = inst(12, 208.0, &jobs);
        let id = Permutation::identity(20);
        assert_eq!(tardiness(&i, &id, 0).unwrap(), -504.0);
        let sw = Permutation::new({
            let mut o: Vec<usize> = (0..20).collect();
            o.swap(0, 1);
            o
        })
        .unwrap();
        assert_eq!(tardiness(&i, &sw, 0).unwrap(), 0.0);
        assert_eq!(tardiness(&i, &id, 19).unwrap(), 448.0);
    }

    #[test]
    fn exponential_weighting() {
        let cfg = ObjectiveConfig::default();
        let tau = cfg.tardiness_scale;
        assert_eq!(exp_tardiness(0.0, &cfg).0, 1.0);
        assert!((exp_tardiness(-tau, &cfg).0 - (-1f64).exp()).abs() < 1e-15);
        assert!((exp_tardiness(2.0 * tau, &cfg).0 - 2f64.exp()).abs() < 1e-12);
        let (big, clamped) = exp_tardiness(1e9, &cfg);
        assert!(big.is_finite() && clamped);
    }

    #[test]
    fn f1_two_on_time_jobs() {
        let i = inst(1, 1.0, &[(&[1.0], 1.0), (&[1.0], 2.0)]);
        let cfg = ObjectiveConfig::default();
        assert_eq!(
            objective_f1(&i, &Permutation::identity(2), &cfg).unwrap(),
            2.0
        );
    }

    #[test]
    fn f2_hand_example() {
        let i = inst(2, 10.0, &[(&[1.0, 2.0], 1.0), (&[3.0, 1.0], 1.0)]);
        assert_eq!(objective_f2(&i, &Permutation::identity(2)).unwrap(), 3.0);
        let same = inst(
            2,
            10.0,
            &[(&[4.0, 4.0], 1.0), (&[4.0, 4.0], 2.0), (&[4.0, 4.0], 3.0)],
        );
        assert_eq!(objective_f2(&same, &Permutation::identity(3)).unwrap(), 0.0);
    }

    #[test]
    fn combined_identity_and_projection() {
        let i = inst(
            2,
            10.0,
            &[
                (&[1.0, 2.0], 25.0),
                (&[3.0, 1.0], 20.0),
                (&[9.0, 0.0], 40.0),
            ],
        );
        let cfg = ObjectiveConfig {
            alpha1: 0.0,
            alpha2: 0.5,
            tardiness_scale: 10.0,
        };
        let r = Permutation::identity(3);
        let same = combined_objective(&i, &r, &r, &cfg).unwrap();
        assert_eq!((same.delta_f1, same.delta_f2, same.fc), (0.0, 0.0, 0.0));
        let p = Permutation::new(vec![2, 0, 1]).unwrap();
        let rep = combined_objective(&i, &p, &r, &cfg).unwrap();
        assert_eq!(rep.fc, 0.5 * rep.delta_f2);
    }

    #[test]
    fn feature_layout() {
        let i = inst(
            2,
            10.0,
            &[
                (&[1.0, 2.0], 25.0),
                (&[1.0, 2.0], 20.0),
                (&[9.0, 0.0], 40.0),
            ],
        );
        let cfg = ObjectiveConfig::default();
        let f = job_features(&i, &Permutation::identity(3), &cfg).unwrap();
        assert_eq!(f.width(), 6);
        assert_eq!(
            f.row(0),
            &[1.0, 2.0, 0.0, 0.0, 25.0, ((20.0 - 25.0) / 3600f64).exp()]
        );
        assert_eq!(f.row(1)[2..4], [-8.0, 2.0]);
        assert_eq!(f.row(2)[2..4], [0.0, 0.0]);

        let net = network_features(&i, &Permutation::identity(3), &cfg, 5, 10).unwrap();
        assert_eq!(net.general, 0.5);
        assert_eq!(net.row(2)[0], 0.9);
        assert_eq!(net.row(2)[4], 40.0 / 40.0);
    }

    #[test]
    fn general_feature_bounds() {
        assert_eq!(general_feature(0, 10), 0.0);
        assert_eq!(general_feature(10, 10), 1.0);
        assert_eq!(general_feature(5, 10), 0.5);
    }

    #[test]
    fn permutation_validation() {
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::new(vec![0, 2]).is_err());
        assert!(Permutation::from_one_based(&[0, 1]).is_err());
        let p = Permutation::from_one_based(&[2, 3, 1]).unwrap();
        assert_eq!(p.as_slice(), &[1, 2, 0]);
        assert_eq!(p.to_one_based(), vec![2, 3, 1]);
    }

    #[test]
    fn json_format() {
        let text = r#"{"id":"x","station_time_s":208,"jobs":[{"p_s":[1,2],"due_s":3},{"p_s":[2,1],"due_s":4}]}"#;
        let i: Instance = serde_json::from_str(text).unwrap();
        assert_eq!(i.n_stations(), 2);
        assert_eq!(i.jobs[1].due_date, 4.0);
        let back: Instance = serde_json::from_str(&serde_json::to_string(&i).unwrap()).unwrap();
        assert_eq!(back, i);
    }
}
