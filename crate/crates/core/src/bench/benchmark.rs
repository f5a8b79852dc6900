use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{edd_sort, sa_optimize, sh_schedule, SaConfig, ShConfig};
use crate::error::{Error, Result};
use crate::inference::{multipolicy, multirun, InferenceConfig, NamedPolicy, UniformPolicy};
use crate::par;
use crate::sched::{Instance, ObjectiveConfig, ObjectiveReport, Permutation, Reference};
use crate::seed;

/// A search or construction method under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    /// The EDD start permutation itself.
    Identity,
    /// Multirun with uniformly random swaps.
    RandomMultirun,
    /// Multirun of the final policy.
    RlMr,
    /// Multirun of every supplied policy.
    RlMpmr,
    Sa {
        steps: u64,
    },
    Sh {
        window: usize,
        max_skip: usize,
    },
}

impl Method {
    pub fn name(&self) -> String {
        match *self {
            Method::Identity => "EDD".into(),
            Method::RandomMultirun => "RAND-MR".into(),
            Method::RlMr => "RL-MR".into(),
            Method::RlMpmr => "RL-MPMR".into(),
            Method::Sa { steps } if steps >= 1000 && steps % 1000 == 0 => {
                format!("SA-{}k", steps / 1000)
            }
            Method::Sa { steps } => format!("SA-{steps}"),
            Method::Sh { window, max_skip } => ShConfig { window, max_skip }.name(),
        }
    }
}

/// The comparison set of the reference study plus EDD and the random baseline.
pub fn default_methods() -> Vec<Method> {
    let mut m = vec![
        Method::Identity,
        Method::RandomMultirun,
        Method::RlMr,
        Method::RlMpmr,
        Method::Sa { steps: 300 },
        Method::Sa { steps: 1800 },
        Method::Sa { steps: 530_000 },
    ];
    for (window, max_skip) in [(4, 4), (4, 6), (6, 8), (6, 10), (8, 10)] {
        m.push(Method::Sh { window, max_skip });
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub objective: ObjectiveConfig,
    pub methods: Vec<Method>,
    pub runs_per_policy: usize,
    pub step_budget: usize,
    pub sa_t_max: f64,
    pub sa_t_min: f64,
    pub seed: u64,
    /// Include wall-clock times in the outputs. Off by default so that reruns
    /// produce identical files; times are always logged.
    pub record_timing: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            objective: ObjectiveConfig::default(),
            methods: default_methods(),
            runs_per_policy: 30,
            step_budget: 10,
            sa_t_max: SaConfig::DEFAULT_T_MAX,
            sa_t_min: SaConfig::DEFAULT_T_MIN,
            seed: 0,
            record_timing: false,
        }
    }
}

impl BenchConfig {
    fn inference(&self) -> InferenceConfig {
        InferenceConfig {
            runs_per_policy: self.runs_per_policy,
            step_budget: self.step_budget,
            checkpoint_paths: Vec::new(),
            greedy: false,
            seed: self.seed,
        }
    }

    fn sa(&self, steps: u64, inst: &Instance) -> SaConfig {
        SaConfig {
            t_max: self.sa_t_max,
            t_min: self.sa_t_min,
            steps,
            seed: seed::derive_str(seed::derive(self.seed, steps), &inst.id),
            trace_stride: 0,
        }
    }
}

/// Named set of instances, e.g. `train` or `test`.
#[derive(Debug, Clone)]
pub struct Split {
    pub name: String,
    pub instances: Vec<Instance>,
}

/// One method on one instance; a JSONL line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub method: String,
    pub split: String,
    pub instance_id: String,
    pub fc: f64,
    pub f1: f64,
    pub f2: f64,
    pub delta_f1: f64,
    pub delta_f2: f64,
    pub steps: u64,
    /// 1-based job order.
    pub permutation: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<f64>,
}

/// Means of one method over one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub method: String,
    pub split: String,
    pub instances: usize,
    pub fc: f64,
    pub f1: f64,
    pub f2: f64,
    /// Instances where the best `fc` is at most zero.
    pub no_impr: usize,
    /// Search steps per instance.
    pub steps: u64,
    pub wall_ms: Option<f64>,
    /// Set when the method could not be run; all numbers are then meaningless.
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchmarkRow>,
    pub results: Vec<InstanceResult>,
    pub warnings: Vec<String>,
}

fn result_of(
    method: &str,
    split: &str,
    inst: &Instance,
    perm: &Permutation,
    report: ObjectiveReport,
    steps: u64,
    wall_ms: Option<f64>,
) -> Result<InstanceResult> {
    if perm.len() != inst.n_jobs() || !perm.is_valid() {
        return Err(Error::InvalidPermutation(format!(
            "{method} on {}",
            inst.id
        )));
    }
    Ok(InstanceResult {
        method: method.into(),
        split: split.into(),
        instance_id: inst.id.clone(),
        fc: report.fc,
        f1: report.f1,
        f2: report.f2,
        delta_f1: report.delta_f1,
        delta_f2: report.delta_f2,
        steps,
        permutation: perm.to_one_based(),
        wall_ms,
    })
}

fn run_one(
    method: Method,
    split: &str,
    inst: &Instance,
    policies: &[NamedPolicy],
    cfg: &BenchConfig,
) -> Result<InstanceResult> {
    let obj = &cfg.objective;
    let name = method.name();
    let start = Instant::now();
    let edd = edd_sort(inst);
    let (perm, report, steps) = match method {
        Method::Identity => {
            let r = Reference::of(inst, &edd, obj)?.evaluate(inst, &edd, obj)?;
            (edd, r, 0)
        }
        Method::RandomMultirun => {
            let r = multirun(inst, &UniformPolicy, obj, &cfg.inference())?;
            (r.best, r.report, r.steps)
        }
        Method::RlMr | Method::RlMpmr => {
            let used = if method == Method::RlMr {
                &policies[policies.len() - 1..]
            } else {
                policies
            };
            let rec = multipolicy(inst, used, obj, &cfg.inference())?;
            (
                Permutation::from_one_based(&rec.best_permutation)?,
                rec.report,
                rec.steps,
            )
        }
        Method::Sa { steps } => {
            let out = sa_optimize(inst, &edd, &edd, &cfg.sa(steps, inst), obj)?;
            (out.best, out.report, steps)
        }
        Method::Sh { window, max_skip } => {
            let p = sh_schedule(inst, &ShConfig { window, max_skip })?;
            let r = Reference::of(inst, &edd, obj)?.evaluate(inst, &p, obj)?;
            (p, r, 0)
        }
    };
    let ms = start.elapsed().as_secs_f64() * 1e3;
    log::debug!("{name} on {}: fc {:.6} in {ms:.1} ms", inst.id, report.fc);
    result_of(
        &name,
        split,
        inst,
        &perm,
        report,
        steps,
        cfg.record_timing.then_some(ms),
    )
}

/// Runs every configured method on every instance of every split.
///
/// `policies` lists checkpoints in training order with the final policy last.
/// When it is empty the RL methods are skipped with a warning row.
pub fn run_benchmark(
    splits: &[Split],
    policies: &[NamedPolicy],
    cfg: &BenchConfig,
) -> Result<BenchReport> {
    cfg.objective.validate()?;
    let mut report = BenchReport::default();
    for split in splits {
        for &method in &cfg.methods {
            let name = method.name();
            let needs_policy = matches!(method, Method::RlMr | Method::RlMpmr);
            if needs_policy && policies.is_empty() {
                let msg = format!(
                    "{name} skipped on split {}: no checkpoints supplied",
                    split.name
                );
                log::warn!("{msg}");
                report.warnings.push(msg.clone());
                report.rows.push(BenchmarkRow {
                    method: name,
                    split: split.name.clone(),
                    instances: split.instances.len(),
                    fc: f64::NAN,
                    f1: f64::NAN,
                    f2: f64::NAN,
                    no_impr: 0,
                    steps: 0,
                    wall_ms: None,
                    skipped: Some(msg),
                });
                continue;
            }
            if method == Method::RlMpmr && policies.len() == 1 {
                let msg = format!("{name} on split {} uses a single checkpoint", split.name);
                log::warn!("{msg}");
                report.warnings.push(msg);
            }
            let start = Instant::now();
            let results = par::map(&split.instances, |inst| {
                run_one(method, &split.name, inst, policies, cfg)
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let elapsed = start.elapsed().as_secs_f64() * 1e3;
            log::info!(
                "{name} on {}: {} instances in {elapsed:.1} ms",
                split.name,
                results.len()
            );
            report.rows.push(aggregate(&name, &split.name, &results));
            report.results.extend(results);
        }
    }
    Ok(report)
}

fn aggregate(method: &str, split: &str, results: &[InstanceResult]) -> BenchmarkRow {
    let k = results.len().max(1) as f64;
    let mean = |f: fn(&InstanceResult) -> f64| results.iter().map(f).sum::<f64>() / k;
    let wall_ms = if results.iter().all(|r| r.wall_ms.is_some()) && !results.is_empty() {
        Some(mean(|r| r.wall_ms.unwrap()))
    } else {
        None
    };
    BenchmarkRow {
        method: method.into(),
        split: split.into(),
        instances: results.len(),
        fc: mean(|r| r.fc),
        f1: mean(|r| r.f1),
        f2: mean(|r| r.f2),
        no_impr: results.iter().filter(|r| r.fc <= 0.0).count(),
        steps: results.iter().map(|r| r.steps).max().unwrap_or(0),
        wall_ms,
        skipped: None,
    }
}

/// Table CSV with columns `method,split,fc,f1,f2,no_impr,steps,wall_ms`.
/// Skipped methods keep their name and split with empty cells.
pub fn write_table_csv(rows: &[BenchmarkRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Shape(format!("csv: {e}"));
    w.write_record([
        "method", "split", "fc", "f1", "f2", "no_impr", "steps", "wall_ms",
    ])
    .map_err(csv_err)?;
    for r in rows {
        let rec: Vec<String> = if r.skipped.is_some() {
            vec![
                r.method.clone(),
                r.split.clone(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ]
        } else {
            vec![
                r.method.clone(),
                r.split.clone(),
                r.fc.to_string(),
                r.f1.to_string(),
                r.f2.to_string(),
                r.no_impr.to_string(),
                r.steps.to_string(),
                r.wall_ms.map(|v| v.to_string()).unwrap_or_default(),
            ]
        };
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Shape(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Aligned plain-text rendering of the table.
pub fn format_table(rows: &[BenchmarkRow]) -> String {
    let header = [
        "method", "split", "fc", "f1", "f2", "no_impr", "steps", "wall_ms",
    ];
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            if r.skipped.is_some() {
                let mut v = vec![r.method.clone(), r.split.clone(), "skipped".into()];
                v.resize(8, String::new());
                v
            } else {
                vec![
                    r.method.clone(),
                    r.split.clone(),
                    format!("{:.4}", r.fc),
                    format!("{:.4}", r.f1),
                    format!("{:.1}", r.f2),
                    format!("{}/{}", r.no_impr, r.instances),
                    r.steps.to_string(),
                    r.wall_ms
                        .map(|v| format!("{v:.1}"))
                        .unwrap_or_else(|| "-".into()),
                ]
            }
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, row: &[String]| {
        for (i, (c, w)) in row.iter().zip(&widths).enumerate() {
            if i < 2 {
                let _ = write!(out, "{c:<w$}  ");
            } else {
                let _ = write!(out, "{c:>w$}  ");
            }
        }
        out.truncate(out.trim_end().len());
        out.push('\n');
    };
    line(&mut out, &header.map(String::from));
    for row in &cells {
        line(&mut out, row);
    }
    out
}

/// One JSON object per line, in report order.
pub fn write_instance_jsonl(results: &[InstanceResult], path: &Path) -> Result<()> {
    let mut f =
        std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    for r in results {
        let line = serde_json::to_string(r).expect("result serializes");
        writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
    }
    f.flush().map_err(|e| Error::io(path, e))
}
