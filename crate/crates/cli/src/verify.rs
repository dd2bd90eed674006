use std::io::Write;
use std::path::PathBuf;

use meanslab_core::harness::{run_suite, write_counterexamples, CheckId, CheckKind, CheckParams, InstanceConfig, SuiteConfig, SuiteReport};
use meanslab_core::SpectralBounds;
use serde::Serialize;

use crate::fmt::format_sig;
use crate::Failure;

#[derive(clap::Args)]
pub struct Args {
    /// `all`, `matrix`, `twins`, or a comma-separated list of check names.
    #[arg(long, default_value = "all")]
    suite: String,
    /// Instances per check.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Dimension or inclusive range, e.g. `4` or `2-6`.
    #[arg(long, default_value = "2-6")]
    dim: String,
    /// Number of operators or inclusive range.
    #[arg(long, default_value = "2-5")]
    n: String,
    /// Lower spectral bounds, comma-separated; paired with `--M`.
    #[arg(long = "m", value_delimiter = ',', allow_negative_numbers = true)]
    lower: Vec<f64>,
    /// Upper spectral bounds, comma-separated; paired with `--m`.
    #[arg(long = "M", value_delimiter = ',', allow_negative_numbers = true)]
    upper: Vec<f64>,
    #[arg(long, env = "MEANSLAB_SEED", default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here; `-` writes it to standard output.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the summary table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Directory for `<check>-<seed>.json` files of failing reports.
    #[arg(long)]
    counterexamples: Option<PathBuf>,
    /// JSON file overriding the parameter grids (`alpha`, `r`, `qp`, `specht_p`).
    #[arg(long)]
    params: Option<PathBuf>,
    /// Solver iteration cap.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Solver relative tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

pub fn parse_suite(spec: &str) -> Result<Vec<CheckId>, Failure> {
    match spec {
        "all" => return Ok(CheckId::registry()),
        "matrix" => return Ok(CheckKind::ALL.iter().map(|&k| CheckId::matrix(k)).collect()),
        "twins" => return Ok(CheckKind::ALL.iter().map(|&k| CheckId::twin(k)).collect()),
        _ => {}
    }
    let mut out: Vec<CheckId> = Vec::new();
    for name in spec.split(',').map(str::trim) {
        let id: CheckId = name.parse().map_err(|e: meanslab_core::MeansError| {
            Failure::Invalid(format!("--suite: {e}; suites `all`, `matrix`, `twins` are also accepted"))
        })?;
        if !out.contains(&id) {
            out.push(id);
        }
    }
    Ok(out)
}

fn parse_range(flag: &str, s: &str) -> Result<(usize, usize), Failure> {
    let bad = || Failure::Invalid(format!("--{flag}: expected N or LO-HI with 1 <= LO <= HI, got `{s}`"));
    let (lo, hi) = match s.split_once('-') {
        Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
        None => {
            let v = s.trim().parse().map_err(|_| bad())?;
            (v, v)
        }
    };
    if lo < 1 || lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn parse_bounds(lower: &[f64], upper: &[f64]) -> Result<Vec<SpectralBounds>, Failure> {
    if lower.is_empty() && upper.is_empty() {
        return Ok(InstanceConfig::default().bounds);
    }
    if lower.len() != upper.len() {
        return Err(Failure::Invalid(format!("--m and --M need the same number of values, got {} and {}", lower.len(), upper.len())));
    }
    lower
        .iter()
        .zip(upper)
        .map(|(&m, &big_m)| {
            if !(m < big_m) {
                return Err(Failure::Invalid(format!("--m/--M: need m < M, got ({m}, {big_m})")));
            }
            SpectralBounds::new(m, big_m).map_err(|e| Failure::Invalid(format!("--m/--M: {e}")))
        })
        .collect()
}

fn read_params(path: &PathBuf) -> Result<CheckParams, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("--params: {e}")))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| Failure::Invalid(format!("--params: {}: {}", e.path(), e.inner())))
}

#[derive(Serialize)]
struct CsvRow {
    check: String,
    instances: usize,
    failures: usize,
    errors: usize,
    min_margin: Option<f64>,
    min_relative_margin: Option<f64>,
    worst_seed: Option<u64>,
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format_sig(v, 6))
}

/// Summary table; deterministic for a fixed configuration.
pub fn summary_table(report: &SuiteReport) -> String {
    let mut out = format!(
        "{:<24} {:>9} {:>8} {:>6} {:>13} {:>13} {:>20}\n",
        "check", "instances", "failures", "errors", "min_margin", "min_rel", "worst_seed"
    );
    for c in &report.summary.checks {
        out += &format!(
            "{:<24} {:>9} {:>8} {:>6} {:>13} {:>13} {:>20}\n",
            c.name.to_string(),
            c.instances,
            c.failures,
            c.errors,
            opt(c.min_margin),
            opt(c.min_relative_margin),
            c.worst_seed.map_or_else(|| "-".into(), |s| s.to_string()),
        );
    }
    let s = &report.summary;
    out += &format!("total: {} instances, {} failures, {} errors\n", s.instances, s.failures, s.errors);
    out
}

fn write_csv(path: &PathBuf, report: &SuiteReport) -> Result<(), Failure> {
    let io = |e: csv::Error| Failure::Invalid(format!("--csv: {e}"));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for c in &report.summary.checks {
        w.serialize(CsvRow {
            check: c.name.to_string(),
            instances: c.instances,
            failures: c.failures,
            errors: c.errors,
            min_margin: c.min_margin,
            min_relative_margin: c.min_relative_margin,
            worst_seed: c.worst_seed,
        })
        .map_err(io)?;
    }
    w.flush().map_err(|e| Failure::Invalid(format!("--csv: {e}")))
}

pub fn run(args: Args) -> Result<(), Failure> {
    let checks = parse_suite(&args.suite)?;
    let instances = InstanceConfig {
        dims: parse_range("dim", &args.dim)?,
        n: parse_range("n", &args.n)?,
        bounds: parse_bounds(&args.lower, &args.upper)?,
    };
    if args.jobs == Some(0) {
        return Err(Failure::Invalid("--jobs must be at least 1".into()));
    }
    let mut cfg = SuiteConfig::new(args.suite.clone(), checks, args.trials, args.seed);
    cfg.instances = instances;
    cfg.jobs = args.jobs;
    if let Some(p) = &args.params {
        cfg.options.params = read_params(p)?;
    }
    if let Some(k) = args.max_iter {
        cfg.options.solver.max_iter = k;
    }
    if let Some(t) = args.tol {
        cfg.options.solver.tol = t;
    }
    let report = run_suite(&cfg).map_err(|e| Failure::Invalid(e.to_string()))?;

    let to_stdout = args.report.as_ref().is_some_and(|p| p.as_os_str() == "-");
    if let Some(path) = &args.report {
        let body = serde_json::to_string_pretty(&report).map_err(|e| Failure::Invalid(e.to_string()))? + "\n";
        if to_stdout {
            print!("{body}");
        } else {
            std::fs::write(path, body).map_err(|e| Failure::Invalid(format!("--report: {e}")))?;
        }
    }
    if let Some(path) = &args.csv {
        write_csv(path, &report)?;
    }
    if let Some(dir) = &args.counterexamples {
        write_counterexamples(dir, &report).map_err(|e| Failure::Invalid(format!("--counterexamples: {e}")))?;
    }

    let table = summary_table(&report) + &format!("wall time: {:.3} s (non-canonical)\n", report.wall_time.as_secs_f64());
    if to_stdout {
        eprint!("{table}");
    } else {
        print!("{table}");
        let _ = std::io::stdout().flush();
    }
    match report.summary.failures {
        0 => Ok(()),
        n => Err(Failure::ChecksFailed(n)),
    }
}
