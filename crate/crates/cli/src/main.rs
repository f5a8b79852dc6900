//! `flowswap` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 bad input data, 3 runtime fault.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use flowswap::baselines::edd_sort;
use flowswap::bench::{
    self, BenchConfig, GeneratorConfig, Manifest, OracleObjective, Split, MANIFEST_FILE,
};
use flowswap::inference::{multipolicy, select_checkpoints, InferenceConfig, NamedPolicy};
use flowswap::policy::Checkpoint;
use flowswap::ppo::{self, ExperimentConfig};
use flowswap::sched::{validate_instance, Instance, ObjectiveConfig, Permutation, Reference};
use flowswap::{Error, Result};

#[derive(Parser)]
#[command(
    name = "flowswap",
    version,
    about = "Learned swap heuristic for flow shop sequencing"
)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file; omitted fields take their defaults.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Overrides the seed from the configuration file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic instances and a manifest.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the instance count.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Check instance files or manifests and report their EDD objectives.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Instance files or manifests.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Train a policy on the instances of a manifest.
    Train {
        #[command(flatten)]
        common: Common,
        /// Training pool manifest.
        #[arg(long)]
        pool: PathBuf,
        /// Output directory for metrics and checkpoints.
        #[arg(long)]
        out: PathBuf,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Run multirun and multipolicy search with trained checkpoints.
    Infer {
        #[command(flatten)]
        common: Common,
        /// Instance file or manifest.
        #[arg(long)]
        instances: PathBuf,
        /// Checkpoint files in training order, final last. Overrides the config.
        #[arg(long = "checkpoint")]
        checkpoints: Vec<PathBuf>,
        /// Training output directory; selects the final and five earlier checkpoints.
        #[arg(long, conflicts_with = "checkpoints")]
        checkpoint_dir: Option<PathBuf>,
        /// Result JSONL file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare all methods on one or more instance splits.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Split as NAME=MANIFEST; repeatable.
        #[arg(long = "split", required = true, value_parser = parse_split)]
        splits: Vec<(String, PathBuf)>,
        #[arg(long = "checkpoint")]
        checkpoints: Vec<PathBuf>,
        #[arg(long, conflicts_with = "checkpoints")]
        checkpoint_dir: Option<PathBuf>,
        /// Output directory for table.csv, table.txt and results.jsonl.
        #[arg(long)]
        out: PathBuf,
    },
    /// Export the buffer-time heatmap of a permutation as CSV and SVG.
    Heatmap {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        instance: PathBuf,
        /// Comma-separated 1-based job order; defaults to the EDD order.
        #[arg(long, value_delimiter = ',')]
        permutation: Option<Vec<usize>>,
        /// Output path without extension.
        #[arg(long)]
        out: PathBuf,
    },
    /// Exhaustive optimum of a small instance.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = Objective::Fc)]
        objective: Objective,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Objective {
    F1,
    F2,
    Fc,
}

/// `println!` that ignores a closed stdout.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

fn parse_split(s: &str) -> std::result::Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => {
            Ok((name.into(), path.into()))
        }
        _ => Err(format!("expected NAME=MANIFEST, got {s:?}")),
    }
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("value serializes") + "\n"
}

/// A manifest or a single instance file.
fn load_instances(path: &Path) -> Result<Vec<Instance>> {
    if path.file_name().is_some_and(|n| n == MANIFEST_FILE) || is_manifest(path) {
        Ok(bench::load_manifest(path)?.1)
    } else {
        Ok(vec![Instance::load(path)?])
    }
}

fn is_manifest(path: &Path) -> bool {
    std::fs::read(path)
        .ok()
        .and_then(|b| serde_json::from_slice::<Manifest>(&b).ok())
        .is_some()
}

fn load_policies(paths: &[PathBuf], dir: Option<&Path>) -> Result<Vec<NamedPolicy>> {
    let paths = match dir {
        Some(d) => select_checkpoints(d, 5)?,
        None => paths.to_vec(),
    };
    paths.iter().map(|p| NamedPolicy::load(p)).collect()
}

fn objective_of(checkpoint: &Path) -> Result<ObjectiveConfig> {
    let ck = Checkpoint::load(checkpoint)?;
    match ck.header.experiment.get("objective") {
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|e| Error::Checkpoint(format!("objective: {e}"))),
        None => Ok(ObjectiveConfig::default()),
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate { common, out, count } => {
            let mut cfg: GeneratorConfig = load_config(common.config.as_deref())?;
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            if let Some(c) = count {
                cfg.count = c;
            }
            let (manifest, digest) = bench::write_instances(&cfg, &out)?;
            say!(
                "wrote {} instances to {} (manifest sha256 {digest})",
                manifest.instances.len(),
                out.display()
            );
        }
        Command::Validate { common, paths } => {
            let obj: ObjectiveConfig = load_config(common.config.as_deref())?;
            obj.validate()?;
            let mut bad = 0;
            for path in &paths {
                let files = if is_manifest(path) {
                    let m: Manifest =
                        serde_json::from_slice(&std::fs::read(path).map_err(|e| Error::Io {
                            path: path.clone(),
                            source: e,
                        })?)
                        .map_err(|e| Error::Config(e.to_string()))?;
                    let base = path.parent().unwrap_or(Path::new("."));
                    m.instances.iter().map(|e| base.join(&e.file)).collect()
                } else {
                    vec![path.clone()]
                };
                for file in files {
                    let text = std::fs::read_to_string(&file).map_err(|e| Error::Io {
                        path: file.clone(),
                        source: e,
                    })?;
                    let inst: Instance = match serde_json::from_str(&text) {
                        Ok(i) => i,
                        Err(e) => {
                            bad += 1;
                            say!("{}: unreadable: {e}", file.display());
                            continue;
                        }
                    };
                    let violations = validate_instance(&inst);
                    if violations.is_empty() {
                        let edd = edd_sort(&inst);
                        let r = Reference::of(&inst, &edd, &obj)?;
                        say!(
                            "{}: ok ({} jobs, {} stations, EDD f1 {} f2 {})",
                            inst.id,
                            inst.n_jobs(),
                            inst.n_stations(),
                            r.f1,
                            r.f2
                        );
                    } else {
                        bad += 1;
                        for v in violations {
                            say!("{}: {v}", inst.id);
                        }
                    }
                }
            }
            if bad > 0 {
                return Err(Error::InvalidInstance {
                    id: format!("{bad} file(s)"),
                    summary: "failed validation".into(),
                });
            }
        }
        Command::Train {
            common,
            pool,
            out,
            resume,
        } => {
            let mut exp: ExperimentConfig = load_config(common.config.as_deref())?;
            if let Some(s) = common.seed {
                exp.ppo.seed = s;
            }
            let (_, instances, digest) = bench::load_manifest(&pool)?;
            exp.pool_digest = Some(digest);
            create_dir(&out)?;
            write_file(&out.join("experiment.json"), pretty(&exp))?;
            let resume = resume.map(|p| Checkpoint::load(&p)).transpose()?;
            let outcome = ppo::train(&instances, exp, &out, resume)?;
            if let Some(last) = outcome.rows.last() {
                say!(
                    "trained {} env steps in {} updates; last mean return {}",
                    last.env_steps,
                    last.update,
                    last.mean_episode_return
                );
            }
            for c in &outcome.checkpoints {
                say!("{}", c.display());
            }
        }
        Command::Infer {
            common,
            instances,
            checkpoints,
            checkpoint_dir,
            out,
        } => {
            let mut cfg: InferenceConfig = load_config(common.config.as_deref())?;
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            if !checkpoints.is_empty() {
                cfg.checkpoint_paths = checkpoints;
            }
            if let Some(d) = &checkpoint_dir {
                cfg.checkpoint_paths = select_checkpoints(d, 5)?;
            }
            let last = cfg
                .checkpoint_paths
                .last()
                .ok_or_else(|| Error::Config("no checkpoints given".into()))?
                .clone();
            let obj = objective_of(&last)?;
            let policies = load_policies(&cfg.checkpoint_paths, None)?;
            let insts = load_instances(&instances)?;
            let mut lines = String::new();
            for inst in &insts {
                let mr = multipolicy(inst, &policies[policies.len() - 1..], &obj, &cfg)?;
                lines += &(serde_json::to_string(&mr).expect("record serializes") + "\n");
                if policies.len() > 1 {
                    let mpmr = multipolicy(inst, &policies, &obj, &cfg)?;
                    say!(
                        "{}: RL-MR {} RL-MPMR {}",
                        inst.id,
                        mr.report.fc,
                        mpmr.report.fc
                    );
                    lines += &(serde_json::to_string(&mpmr).expect("record serializes") + "\n");
                } else {
                    say!("{}: RL-MR {}", inst.id, mr.report.fc);
                }
            }
            write_file(&out, lines)?;
        }
        Command::Bench {
            common,
            splits,
            checkpoints,
            checkpoint_dir,
            out,
        } => {
            let mut cfg: BenchConfig = load_config(common.config.as_deref())?;
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            let policies = if checkpoints.is_empty() && checkpoint_dir.is_none() {
                Vec::new()
            } else {
                load_policies(&checkpoints, checkpoint_dir.as_deref())?
            };
            let splits = splits
                .into_iter()
                .map(|(name, path)| {
                    Ok(Split {
                        name,
                        instances: bench::load_manifest(&path)?.1,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let report = bench::run_benchmark(&splits, &policies, &cfg)?;
            create_dir(&out)?;
            write_file(
                &out.join("table.csv"),
                bench::write_table_csv(&report.rows)?,
            )?;
            let text = bench::format_table(&report.rows);
            write_file(&out.join("table.txt"), &text)?;
            bench::write_instance_jsonl(&report.results, &out.join("results.jsonl"))?;
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
        }
        Command::Heatmap {
            common: _,
            instance,
            permutation,
            out,
        } => {
            let inst = Instance::load(&instance)?;
            let perm = match permutation {
                Some(p) => Permutation::from_one_based(&p)?,
                None => edd_sort(&inst),
            };
            if perm.len() != inst.n_jobs() {
                return Err(Error::InvalidPermutation(format!(
                    "{} entries for {} jobs",
                    perm.len(),
                    inst.n_jobs()
                )));
            }
            bench::export_heatmap(&inst, &perm, &out)?;
            say!(
                "{} {}",
                out.with_extension("csv").display(),
                out.with_extension("svg").display()
            );
        }
        Command::Oracle {
            common,
            instance,
            objective,
        } => {
            let obj: ObjectiveConfig = load_config(common.config.as_deref())?;
            let inst = Instance::load(&instance)?;
            let which = match objective {
                Objective::F1 => OracleObjective::F1,
                Objective::F2 => OracleObjective::F2,
                Objective::Fc => OracleObjective::Fc,
            };
            let r = bench::brute_force_best(&inst, &obj, which)?;
            let _ = std::io::stdout().lock().write_all(
                pretty(&serde_json::json!({
                    "instance_id": inst.id,
                    "objective": which,
                    "value": r.value,
                    "permutation": r.perm.to_one_based(),
                    "evaluated": r.evaluated,
                }))
                .as_bytes(),
            );
        }
    }
    Ok(())
}

/// Missing input files count as bad input, other I/O failures as faults.
fn is_data_error(e: &Error) -> bool {
    match e {
        Error::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
        e => e.is_data_error(),
    }
}

fn config_help<T: Serialize + Default>(what: &str) -> String {
    format!(
        "Configuration file fields ({what}), shown with their defaults:\n{}",
        pretty(&T::default())
    )
}

fn command() -> clap::Command {
    Cli::command()
        .mut_subcommand("generate", |c| c.after_help(config_help::<GeneratorConfig>("generator")))
        .mut_subcommand("validate", |c| c.after_help(config_help::<ObjectiveConfig>("objective")))
        .mut_subcommand("train", |c| c.after_help(config_help::<ExperimentConfig>("experiment")))
        .mut_subcommand("infer", |c| c.after_help(config_help::<InferenceConfig>("inference")))
        .mut_subcommand("bench", |c| c.after_help(config_help::<BenchConfig>("benchmark")))
        .mut_subcommand("heatmap", |c| {
            c.after_help("The configuration file and seed are accepted but unused; the export is deterministic.")
        })
        .mut_subcommand("oracle", |c| c.after_help(config_help::<ObjectiveConfig>("objective")))
}

fn main() -> ExitCode {
    let matches = match command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_data_error(&e) { 2 } else { 3 })
        }
    }
}
