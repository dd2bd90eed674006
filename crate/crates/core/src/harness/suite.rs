//! Suite runner: expands checks × trials into jobs, runs them in parallel with
//! per-job seeds, and aggregates a deterministic report.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_check, CheckId, CheckReport, Instance, InstanceConfig, RunOptions};
use crate::error::{MeansError, Result};

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    /// Name recorded in the report, e.g. `all` or a check name.
    pub label: String,
    pub checks: Vec<CheckId>,
    pub trials: usize,
    pub instances: InstanceConfig,
    pub seed: u64,
    pub options: RunOptions,
    /// Worker threads; `None` uses the global rayon pool.
    pub jobs: Option<usize>,
}

impl SuiteConfig {
    pub fn new(label: impl Into<String>, checks: Vec<CheckId>, trials: usize, seed: u64) -> Self {
        SuiteConfig {
            label: label.into(),
            checks,
            trials,
            instances: InstanceConfig::default(),
            seed,
            options: RunOptions::default(),
            jobs: None,
        }
    }
}

/// Echo of the run parameters that determine the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteEcho {
    pub seed: u64,
    pub trials: usize,
    pub instances: InstanceConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub name: CheckId,
    pub instances: usize,
    pub failures: usize,
    pub errors: usize,
    pub min_margin: Option<f64>,
    pub min_relative_margin: Option<f64>,
    /// Seed of the instance attaining `min_relative_margin`.
    pub worst_seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub instances: usize,
    pub failures: usize,
    pub errors: usize,
    pub checks: Vec<CheckSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub config: SuiteEcho,
    pub summary: Summary,
    pub reports: Vec<CheckReport>,
    /// Elapsed time; not part of the serialized report.
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Seed of job `index`: the first output of ChaCha8 keyed by `master` on stream `index`.
pub fn job_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

fn run_job(id: CheckId, job: usize, cfg: &SuiteConfig) -> CheckReport {
    let seed = job_seed(cfg.seed, job as u64);
    let generated = if id.twin {
        Instance::generate_commuting(seed, &cfg.instances)
    } else {
        Instance::generate(seed, &cfg.instances)
    };
    match generated {
        Ok(inst) => run_check(id, &inst, job, &cfg.options),
        Err(e) => CheckReport {
            name: id,
            job,
            seed,
            dim: 0,
            n: 0,
            bounds: cfg.instances.bounds[0],
            mean: String::new(),
            map: String::new(),
            params: Default::default(),
            margin: None,
            scale: None,
            holds: false,
            terms: Vec::new(),
            error: Some(format!("instance generation failed: {e}")),
            instance: None,
        },
    }
}

fn summarize(checks: &[CheckId], reports: &[CheckReport]) -> Summary {
    let per_check = checks
        .iter()
        .map(|&id| {
            let mine: Vec<&CheckReport> = reports.iter().filter(|r| r.name == id).collect();
            let worst = mine
                .iter()
                .filter_map(|r| r.relative_margin().map(|m| (m, *r)))
                .min_by(|a, b| a.0.total_cmp(&b.0));
            CheckSummary {
                name: id,
                instances: mine.len(),
                failures: mine.iter().filter(|r| !r.holds).count(),
                errors: mine.iter().filter(|r| r.error.is_some()).count(),
                min_margin: mine.iter().filter_map(|r| r.margin).min_by(f64::total_cmp),
                min_relative_margin: worst.map(|w| w.0),
                worst_seed: worst.map(|w| w.1.seed),
            }
        })
        .collect::<Vec<_>>();
    Summary {
        instances: reports.len(),
        failures: per_check.iter().map(|c| c.failures).sum(),
        errors: per_check.iter().map(|c| c.errors).sum(),
        checks: per_check,
    }
}

/// Runs every check on `trials` fresh instances. Job `k` enumerates checks in
/// order, trials within each check; the report is ordered by job regardless
/// of scheduling, so identical configurations give identical reports.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    cfg.instances.validate()?;
    for kind in cfg.checks.iter().map(|c| c.kind) {
        cfg.options.params.validate(kind)?;
    }
    cfg.options.solver.validate()?;
    let start = Instant::now();
    let jobs: Vec<(usize, CheckId)> = cfg
        .checks
        .iter()
        .flat_map(|&id| std::iter::repeat_n(id, cfg.trials))
        .enumerate()
        .collect();
    let work = || jobs.par_iter().map(|&(k, id)| run_job(id, k, cfg)).collect::<Vec<_>>();
    let reports = match cfg.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| MeansError::validation(format!("cannot start {n} worker threads: {e}")))?
            .install(work),
        None => work(),
    };
    Ok(SuiteReport {
        suite: cfg.label.clone(),
        config: SuiteEcho { seed: cfg.seed, trials: cfg.trials, instances: cfg.instances.clone() },
        summary: summarize(&cfg.checks, &reports),
        reports,
        wall_time: start.elapsed(),
    })
}

/// Writes each failing report, with its instance, to `<dir>/<check>-<seed>.json`.
pub fn write_counterexamples(dir: &Path, report: &SuiteReport) -> std::io::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for r in report.reports.iter().filter(|r| !r.holds) {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}-{}.json", r.name, r.seed));
        let body = serde_json::to_string_pretty(r).map_err(std::io::Error::other)?;
        std::fs::write(&path, body + "\n")?;
        written.push(path);
    }
    Ok(written)
}
