use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::sha256_hex;
use crate::error::{Error, Result};
use crate::sched::{Instance, Job};
use crate::seed;

pub const MANIFEST_FILE: &str = "manifest.json";

const TAG_GEN: u64 = 0x6E4E;

/// Synthetic instance distribution.
///
/// Processing times are uniform in `[p_min_frac * T_W, T_W]`. Due dates are the
/// completion times of a random permutation, shifted by `due_slack_s` and
/// uniform noise of half-width `due_noise_s`, then clamped to at least one second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_jobs: usize,
    pub n_stations: usize,
    pub station_time_s: f64,
    pub p_min_frac: f64,
    pub due_slack_s: f64,
    pub due_noise_s: f64,
    pub seed: u64,
    pub count: usize,
    pub id_prefix: String,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_jobs: 20,
            n_stations: 12,
            station_time_s: 208.0,
            p_min_frac: 0.3,
            due_slack_s: 0.0,
            due_noise_s: 600.0,
            seed: 0,
            count: 1,
            id_prefix: "inst".into(),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.count == 0 {
            return err("count must be >= 1".into());
        }
        if self.n_jobs < 2 || self.n_stations == 0 {
            return err(format!(
                "need at least 2 jobs and 1 station, got {} and {}",
                self.n_jobs, self.n_stations
            ));
        }
        if !(self.station_time_s > 0.0 && self.station_time_s.is_finite()) {
            return err(format!(
                "station_time_s must be positive, got {}",
                self.station_time_s
            ));
        }
        if !(0.0..=1.0).contains(&self.p_min_frac) {
            return err(format!("p_min_frac {} outside [0, 1]", self.p_min_frac));
        }
        if !(self.due_noise_s >= 0.0
            && self.due_noise_s.is_finite()
            && self.due_slack_s.is_finite())
        {
            return err("due_noise_s must be finite and non-negative, due_slack_s finite".into());
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }

    fn instance(&self, index: usize) -> Instance {
        let mut rng = seed::stream(seed::derive(self.seed, TAG_GEN), index as u64);
        let t_w = self.station_time_s;
        let lo = self.p_min_frac * t_w;
        let n = self.n_jobs;
        let mut slots: Vec<usize> = (0..n).collect();
        slots.shuffle(&mut rng);
        let jobs = slots
            .iter()
            .map(|&pos| {
                let processing_times = (0..self.n_stations)
                    .map(|_| {
                        if lo < t_w {
                            rng.random_range(lo..=t_w)
                        } else {
                            t_w
                        }
                    })
                    .collect();
                let noise = if self.due_noise_s > 0.0 {
                    rng.random_range(-self.due_noise_s..=self.due_noise_s)
                } else {
                    0.0
                };
                let completion = t_w * (self.n_stations + pos) as f64;
                Job {
                    processing_times,
                    due_date: (completion + self.due_slack_s + noise).max(1.0),
                }
            })
            .collect();
        Instance {
            id: format!("{}-{:04}", self.id_prefix, index),
            station_time: t_w,
            jobs,
        }
    }
}

/// The `count` instances described by `cfg`.
pub fn generate_instances(cfg: &GeneratorConfig) -> Result<Vec<Instance>> {
    cfg.validate()?;
    (0..cfg.count)
        .map(|i| cfg.instance(i).validated())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    /// Path relative to the manifest.
    pub file: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub generator: GeneratorConfig,
    pub config_digest: String,
    pub instances: Vec<ManifestEntry>,
}

/// Writes one JSON file per instance plus `manifest.json` into `dir`.
/// Returns the manifest and the SHA-256 of the manifest file.
pub fn write_instances(cfg: &GeneratorConfig, dir: &Path) -> Result<(Manifest, String)> {
    let instances = generate_instances(cfg)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(instances.len());
    for inst in &instances {
        let file = PathBuf::from(format!("{}.json", inst.id));
        let path = dir.join(&file);
        inst.save(&path)?;
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        entries.push(ManifestEntry {
            id: inst.id.clone(),
            file,
            sha256: sha256_hex(&bytes),
        });
    }
    let manifest = Manifest {
        generator: cfg.clone(),
        config_digest: cfg.digest(),
        instances: entries,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    std::fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
    Ok((manifest, sha256_hex(text.as_bytes())))
}

/// Reads a manifest and every instance it lists, checking file digests.
/// Returns the manifest, its instances and the SHA-256 of the manifest file.
pub fn load_manifest(path: &Path) -> Result<(Manifest, Vec<Instance>, String)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest = serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut instances = Vec::with_capacity(manifest.instances.len());
    for entry in &manifest.instances {
        let file = base.join(&entry.file);
        let data = std::fs::read(&file).map_err(|e| Error::io(&file, e))?;
        if sha256_hex(&data) != entry.sha256 {
            return Err(Error::InvalidInstance {
                id: entry.id.clone(),
                summary: format!("{} does not match its manifest digest", file.display()),
            });
        }
        instances.push(Instance::load(&file)?);
    }
    Ok((manifest, instances, sha256_hex(&bytes)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sched::{tardiness, validate_instance, Permutation};

    #[test]
    fn generated_instances_validate() {
        let cfg = GeneratorConfig {
            count: 10,
            seed: 3,
            ..GeneratorConfig::default()
        };
        let insts = generate_instances(&cfg).unwrap();
        assert_eq!(insts.len(), 10);
        for inst in &insts {
            assert!(validate_instance(inst).is_empty());
            assert_eq!(inst.n_jobs(), 20);
            assert_eq!(inst.n_stations(), 12);
            for j in &inst.jobs {
                assert!(j
                    .processing_times
                    .iter()
                    .all(|&p| (0.3 * 208.0..=208.0).contains(&p)));
            }
        }
        let ids: std::collections::BTreeSet<_> = insts.iter().map(|i| i.id.clone()).collect();
        assert_eq!(ids.len(), 10);
    }

    #[test]
    fn files_are_byte_identical_per_seed() {
        let cfg = GeneratorConfig {
            count: 3,
            n_jobs: 6,
            n_stations: 3,
            seed: 7,
            ..GeneratorConfig::default()
        };
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let (_, da) = write_instances(&cfg, a.path()).unwrap();
        let (_, db) = write_instances(&cfg, b.path()).unwrap();
        assert_eq!(da, db);
        for name in [
            "inst-0000.json",
            "inst-0001.json",
            "inst-0002.json",
            MANIFEST_FILE,
        ] {
            assert_eq!(
                std::fs::read(a.path().join(name)).unwrap(),
                std::fs::read(b.path().join(name)).unwrap()
            );
        }
        let (m, insts, d) = load_manifest(&a.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(d, da);
        assert_eq!(insts, generate_instances(&cfg).unwrap());
        assert_eq!(m.config_digest, cfg.digest());

        std::fs::write(a.path().join("inst-0001.json"), "{}").unwrap();
        assert!(load_manifest(&a.path().join(MANIFEST_FILE)).is_err());
    }

    #[test]
    fn zero_noise_generating_order_is_on_time() {
        let cfg = GeneratorConfig {
            count: 5,
            n_jobs: 8,
            n_stations: 4,
            due_noise_s: 0.0,
            due_slack_s: 0.0,
            seed: 1,
            ..GeneratorConfig::default()
        };
        for inst in generate_instances(&cfg).unwrap() {
            // Recover the generating order: due dates are distinct completion times.
            let mut order: Vec<usize> = (0..inst.n_jobs()).collect();
            order.sort_by(|&a, &b| inst.jobs[a].due_date.total_cmp(&inst.jobs[b].due_date));
            let perm = Permutation::new(order).unwrap();
            for pos in 0..inst.n_jobs() {
                assert_eq!(tardiness(&inst, &perm, pos).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn bad_configs() {
        for cfg in [
            GeneratorConfig {
                count: 0,
                ..GeneratorConfig::default()
            },
            GeneratorConfig {
                p_min_frac: 1.5,
                ..GeneratorConfig::default()
            },
            GeneratorConfig {
                n_jobs: 1,
                ..GeneratorConfig::default()
            },
            GeneratorConfig {
                due_noise_s: -1.0,
                ..GeneratorConfig::default()
            },
        ] {
            assert!(generate_instances(&cfg).is_err(), "{cfg:?}");
        }
        let full = GeneratorConfig {
            p_min_frac: 1.0,
            count: 1,
            ..GeneratorConfig::default()
        };
        let inst = &generate_instances(&full).unwrap()[0];
        assert!(inst
            .jobs
            .iter()
            .all(|j| j.processing_times.iter().all(|&p| p == 208.0)));
    }
}
