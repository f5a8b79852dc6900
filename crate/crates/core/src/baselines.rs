//! Comparison heuristics: earliest-due-date order, the lookahead heuristic and
//! simulated annealing.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{fc_swap_delta_unchecked, PairAction};
use crate::sched::{adjacency, Instance, ObjectiveConfig, ObjectiveReport, Permutation, Reference};
use crate::seed;

/// Jobs sorted by non-decreasing due date; ties keep the original job order.
pub fn edd_sort(inst: &Instance) -> Permutation {
    let mut order: Vec<usize> = (0..inst.n_jobs()).collect();
    order.sort_by(|&a, &b| inst.jobs[a].due_date.total_cmp(&inst.jobs[b].due_date));
    Permutation::new(order).expect("sorted indices form a permutation")
}

/// Lookahead heuristic parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShConfig {
    pub window: usize,
    pub max_skip: usize,
}

impl ShConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::Config("lookahead window must be at least 1".into()));
        }
        Ok(())
    }

    /// Display name, e.g. `SH-n4ms4`.
    pub fn name(&self) -> String {
        format!("SH-n{}ms{}", self.window, self.max_skip)
    }
}

/// Record of one greedy construction, for inspection and tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShTrace {
    pub perm: Permutation,
    /// Skip counter of each job at the moment it was scheduled, by job index.
    pub skips_when_scheduled: Vec<usize>,
}

/// Greedy stress-maximizing construction over a sliding window of the EDD order.
///
/// The first EDD job is placed first. Each further step looks at the next
/// `window` unscheduled jobs in EDD order. A job whose skip counter exceeds
/// `max_skip` is scheduled immediately (the earliest such job). Otherwise the job
/// with the largest summed processing-time distance to the last scheduled job
/// wins, ties going to the earliest EDD position, and every other job in the
/// window has its skip counter incremented. Forced picks do not increment
/// counters.
pub fn sh_schedule(inst: &Instance, cfg: &ShConfig) -> Result<Permutation> {
    Ok(sh_trace(inst, cfg)?.perm)
}

pub fn sh_trace(inst: &Instance, cfg: &ShConfig) -> Result<ShTrace> {
    cfg.validate()?;
    let edd = edd_sort(inst);
    let n = edd.len();
    let mut remaining: Vec<usize> = edd.as_slice().to_vec();
    let mut skips = vec![0usize; n];
    let mut skips_when_scheduled = vec![0usize; n];
    let mut order = Vec::with_capacity(n);

    let first = remaining.remove(0);
    order.push(first);
    while !remaining.is_empty() {
        let last = *order.last().unwrap();
        let width = cfg.window.min(remaining.len());
        let forced = (0..width).find(|&c| skips[remaining[c]] > cfg.max_skip);
        let pick = match forced {
            Some(c) => c,
            None => {
                let mut best = 0;
                let mut best_d = f64::NEG_INFINITY;
                for c in 0..width {
                    let d = adjacency(inst, last, remaining[c]);
                    if d > best_d {
                        best_d = d;
                        best = c;
                    }
                }
                for c in (0..width).filter(|&c| c != best) {
                    skips[remaining[c]] += 1;
                }
                best
            }
        };
        let job = remaining.remove(pick);
        skips_when_scheduled[job] = skips[job];
        order.push(job);
    }
    Ok(ShTrace {
        perm: Permutation::new(order)?,
        skips_when_scheduled,
    })
}

/// Simulated annealing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaConfig {
    pub t_max: f64,
    pub t_min: f64,
    pub steps: u64,
    pub seed: u64,
    /// Trace every `trace_stride` steps; 0 disables the trace.
    #[serde(default)]
    pub trace_stride: u64,
}

impl SaConfig {
    pub const DEFAULT_T_MAX: f64 = 72.0;
    pub const DEFAULT_T_MIN: f64 = 2.2e-61;

    pub fn with_steps(steps: u64, seed: u64) -> Self {
        Self {
            t_max: Self::DEFAULT_T_MAX,
            t_min: Self::DEFAULT_T_MIN,
            steps,
            seed,
            trace_stride: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_min > 0.0 && self.t_min <= self.t_max && self.t_max.is_finite()) {
            return Err(Error::Config(format!(
                "annealing temperatures need 0 < t_min <= t_max, got {} and {}",
                self.t_min, self.t_max
            )));
        }
        Ok(())
    }

    /// Exponential interpolation from `t_max` at step 0 towards `t_min`.
    pub fn temperature(&self, step: u64) -> f64 {
        let frac = step as f64 / self.steps.max(1) as f64;
        self.t_max * (self.t_min / self.t_max).powf(frac)
    }
}

/// One trace row, serialized as a JSONL line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaTraceRow {
    pub step: u64,
    pub fc: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaOutcome {
    pub best: Permutation,
    pub report: ObjectiveReport,
    pub trace: Vec<SaTraceRow>,
    pub accepted: u64,
}

/// Metropolis acceptance probability for an energy change at a temperature.
#[inline]
pub fn acceptance_probability(delta_e: f64, temp: f64) -> f64 {
    if delta_e <= 0.0 {
        1.0
    } else {
        (-delta_e / temp).exp()
    }
}

/// Metropolis acceptance test.
#[inline]
pub fn metropolis_accept(delta_e: f64, temp: f64, rng: &mut seed::Rng) -> bool {
    delta_e <= 0.0 || rng.random::<f64>() < (-delta_e / temp).exp()
}

/// Uniform draw over the `n(n-1)/2` unordered position pairs.
#[inline]
pub fn random_pair(n: usize, rng: &mut seed::Rng) -> PairAction {
    let i = rng.random_range(0..n);
    let mut k = rng.random_range(0..n - 1);
    if k >= i {
        k += 1;
    }
    PairAction::new(i.min(k), i.max(k))
}

/// Maximizes `fc` relative to `reference` by annealed random swaps from `start`.
///
/// Energy is `-fc`. The best permutation ever visited, `start` included, is
/// returned.
pub fn sa_optimize(
    inst: &Instance,
    start: &Permutation,
    reference: &Permutation,
    cfg: &SaConfig,
    obj: &ObjectiveConfig,
) -> Result<SaOutcome> {
    cfg.validate()?;
    start.check_len(inst)?;
    let refv = Reference::of(inst, reference, obj)?;
    let start_report = refv.evaluate(inst, start, obj)?;
    let mut trace = Vec::new();
    if cfg.steps == 0 {
        return Ok(SaOutcome {
            best: start.clone(),
            report: start_report,
            trace,
            accepted: 0,
        });
    }
    let n = start.len();
    let mut rng = seed::stream(cfg.seed, 0);
    let mut current = start.clone();
    let mut fc = start_report.fc;
    let mut best = current.clone();
    let mut best_fc = fc;
    let mut accepted = 0;
    for step in 0..cfg.steps {
        let a = random_pair(n, &mut rng);
        let delta_fc = fc_swap_delta_unchecked(inst, &current, a, obj);
        let ok = metropolis_accept(-delta_fc, cfg.temperature(step), &mut rng);
        if ok {
            current.swap_in_place(a.i, a.k);
            fc += delta_fc;
            accepted += 1;
            if fc > best_fc {
                best_fc = fc;
                best.clone_from(&current);
            }
        }
        if cfg.trace_stride > 0 && step % cfg.trace_stride == 0 {
            trace.push(SaTraceRow {
                step,
                fc,
                accepted: ok,
            });
        }
    }
    debug_assert!(best.is_valid());
    let report = refv.evaluate(inst, &best, obj)?;
    Ok(SaOutcome {
        best,
        report,
        trace,
        accepted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sched::{combined_objective, Job};

    fn inst(jobs: &[(&[f64], f64)]) -> Instance {
        Instance {
            id: "b".into(),
            station_time: 10.0,
            jobs: jobs
                .iter()
                .map(|(p, d)| Job {
                    processing_times: p.to_vec(),
                    due_date: *d,
                })
                .collect(),
        }
    }

    fn six() -> Instance {
        inst(&[
            (&[1.0, 9.0], 60.0),
            (&[9.0, 1.0], 20.0),
            (&[5.0, 5.0], 40.0),
            (&[0.0, 10.0], 30.0),
            (&[10.0, 0.0], 50.0),
            (&[2.0, 8.0], 70.0),
        ])
    }

    #[test]
    fn edd_examples() {
        let i = inst(&[(&[1.0], 30.0), (&[1.0], 10.0), (&[1.0], 20.0)]);
        assert_eq!(edd_sort(&i).to_one_based(), vec![2, 3, 1]);
        let tie = inst(&[(&[1.0], 5.0), (&[2.0], 5.0), (&[3.0], 5.0)]);
        assert_eq!(edd_sort(&tie), Permutation::identity(3));
    }

    #[test]
    fn sh_window_one_is_edd() {
        let i = six();
        let cfg = ShConfig {
            window: 1,
            max_skip: 3,
        };
        assert_eq!(sh_schedule(&i, &cfg).unwrap(), edd_sort(&i));
        let two = inst(&[(&[1.0], 9.0), (&[9.0], 3.0)]);
        for window in 1..4 {
            for max_skip in 0..3 {
                let c = ShConfig { window, max_skip };
                assert_eq!(sh_schedule(&two, &c).unwrap(), edd_sort(&two));
            }
        }
        assert!(sh_schedule(
            &i,
            &ShConfig {
                window: 0,
                max_skip: 0
            }
        )
        .is_err());
    }

    /// Straight re-simulation of the heuristic with explicit bookkeeping.
    fn sh_oracle(inst: &Instance, window: usize, max_skip: usize) -> Vec<usize> {
        let mut due: Vec<(f64, usize)> = inst
            .jobs
            .iter()
            .enumerate()
            .map(|(j, x)| (x.due_date, j))
            .collect();
        due.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut pending: Vec<usize> = due.into_iter().map(|(_, j)| j).collect();
        let mut counter = std::collections::HashMap::new();
        let mut out = vec![pending.remove(0)];
        while !pending.is_empty() {
            let cand: Vec<usize> = pending.iter().take(window).copied().collect();
            let over: Vec<usize> = cand
                .iter()
                .copied()
                .filter(|j| *counter.get(j).unwrap_or(&0) > max_skip)
                .collect();
            let chosen = if let Some(&j) = over.first() {
                j
            } else {
                let last = &inst.jobs[*out.last().unwrap()].processing_times;
                let dist = |j: usize| -> f64 {
                    last.iter()
                        .zip(&inst.jobs[j].processing_times)
                        .map(|(a, b)| (a - b).abs())
                        .sum()
                };
                let mut chosen = cand[0];
                for &j in &cand[1..] {
                    if dist(j) > dist(chosen) {
                        chosen = j;
                    }
                }
                for &j in &cand {
                    if j != chosen {
                        *counter.entry(j).or_insert(0) += 1;
                    }
                }
                chosen
            };
            pending.retain(|&j| j != chosen);
            out.push(chosen);
        }
        out
    }

    #[test]
    fn sh_matches_direct_simulation() {
        let i = six();
        for window in 1..=6 {
            for max_skip in 0..=3 {
                let got = sh_schedule(&i, &ShConfig { window, max_skip }).unwrap();
                assert_eq!(
                    got.as_slice(),
                    sh_oracle(&i, window, max_skip).as_slice(),
                    "n{window}ms{max_skip}"
                );
            }
        }
    }

    #[test]
    fn sh_respects_skip_bound() {
        let i = six();
        for window in 1..=6 {
            for max_skip in 0..=3 {
                let t = sh_trace(&i, &ShConfig { window, max_skip }).unwrap();
                assert!(t.skips_when_scheduled.iter().all(|&s| s <= max_skip + 1));
            }
        }
    }

    #[test]
    fn sa_zero_steps_returns_start() {
        let i = six();
        let edd = edd_sort(&i);
        let cfg = SaConfig::with_steps(0, 1);
        let out = sa_optimize(&i, &edd, &edd, &cfg, &ObjectiveConfig::default()).unwrap();
        assert_eq!(out.best, edd);
        assert_eq!(out.report.fc, 0.0);
    }

    #[test]
    fn sa_cold_is_hill_climbing() {
        let i = six();
        let edd = edd_sort(&i);
        let obj = ObjectiveConfig {
            alpha1: 1.0,
            alpha2: 0.05,
            tardiness_scale: 20.0,
        };
        let cfg = SaConfig {
            t_max: 1e-300,
            t_min: 1e-300,
            steps: 2000,
            seed: 3,
            trace_stride: 1,
        };
        let out = sa_optimize(&i, &edd, &edd, &cfg, &obj).unwrap();
        let mut prev = 0.0;
        for row in &out.trace {
            assert!(row.fc >= prev - 1e-9, "{row:?} after {prev}");
            prev = row.fc;
        }
        assert!(out.report.fc >= 0.0);
    }

    #[test]
    fn sa_reproducible_and_consistent() {
        let i = six();
        let edd = edd_sort(&i);
        let obj = ObjectiveConfig {
            alpha1: 1.0,
            alpha2: 0.05,
            tardiness_scale: 20.0,
        };
        let cfg = SaConfig {
            trace_stride: 10,
            ..SaConfig::with_steps(3000, 11)
        };
        let a = sa_optimize(&i, &edd, &edd, &cfg, &obj).unwrap();
        let b = sa_optimize(&i, &edd, &edd, &cfg, &obj).unwrap();
        assert_eq!(a, b);
        assert!(a.report.fc >= 0.0);
        let direct = combined_objective(&i, &a.best, &edd, &obj).unwrap();
        assert_eq!(direct, a.report);
    }

    #[test]
    fn temperature_schedule_endpoints() {
        let cfg = SaConfig::with_steps(100, 0);
        assert_eq!(cfg.temperature(0), 72.0);
        let end = cfg.temperature(100);
        assert!((end / 2.2e-61 - 1.0).abs() < 1e-9);
        assert!(cfg.temperature(50) < 72.0);
    }

    #[test]
    fn pair_draws_are_valid_and_cover() {
        let mut rng = seed::stream(0, 0);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..2000 {
            let a = random_pair(5, &mut rng);
            assert!(a.i < a.k && a.k < 5);
            seen.insert((a.i, a.k));
        }
        assert_eq!(seen.len(), 10);
    }
}
