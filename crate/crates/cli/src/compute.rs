use std::io::Read;
use std::path::PathBuf;

use meanslab_core::harness::{run_check, CheckId, CheckParams, CheckReport, Instance, RunOptions};
use meanslab_core::means_n::{karcher_mean, log_euclidean, power_mean_traced};
use meanslab_core::posmaps::apply_map_spd;
use meanslab_core::spd::{loewner_leq, MatrixJson};
use meanslab_core::{BaseMean, MeanTwo, NMeanSpec, PositiveMap, SolveTrace, SolverConfig, SpdMatrix, SpectralBounds, Weights};
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(clap::Args)]
pub struct Args {
    /// Job file; `-` reads standard input.
    #[arg(default_value = "-")]
    job: PathBuf,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
enum MeanKind {
    Karcher,
    LogEuclidean,
    Power,
}

/// Either `{"base": …, "sigma": …}` (sigma optional) or `{"kind": …}` with
/// `alpha` for the power mean.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeanField {
    base: Option<BaseMean>,
    sigma: Option<MeanTwo>,
    kind: Option<MeanKind>,
    alpha: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckField {
    name: CheckId,
    #[serde(default)]
    params: CheckParams,
    /// Defaults to the extreme eigenvalues of the input matrices.
    bounds: Option<SpectralBounds>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Job {
    mean: MeanField,
    weights: Option<Weights>,
    matrices: Vec<SpdMatrix>,
    #[serde(default)]
    solver: SolverConfig,
    map: Option<PositiveMap>,
    check: Option<CheckField>,
}

enum Mean {
    Spec(NMeanSpec),
    Karcher(Weights),
    LogEuclidean(Weights),
    Power(Weights, f64),
}

impl Mean {
    fn label(&self) -> String {
        match self {
            Mean::Spec(s) => s.label(),
            Mean::Karcher(_) => "karcher".into(),
            Mean::LogEuclidean(_) => "log_euclidean".into(),
            Mean::Power(_, a) => format!("power({a})"),
        }
    }

    fn eval(&self, mats: &[SpdMatrix], cfg: &SolverConfig) -> meanslab_core::Result<(SpdMatrix, Option<SolveTrace>)> {
        match self {
            Mean::Spec(s) => s.eval(mats, cfg),
            Mean::Karcher(w) => karcher_mean(w, mats, cfg).map(|(x, t)| (x, Some(t))),
            Mean::LogEuclidean(w) => log_euclidean(w, mats).map(|x| (x, None)),
            Mean::Power(w, a) => power_mean_traced(w, *a, mats, cfg).map(|(x, t)| (x, Some(t))),
        }
    }
}

#[derive(Serialize)]
struct MapOutput {
    map: String,
    phi_of_mean: MatrixJson,
    mean_of_phi: MatrixJson,
    /// Smallest eigenvalue of `mean_of_phi − phi_of_mean`.
    margin: f64,
}

#[derive(Serialize)]
struct Output {
    mean: String,
    result: MatrixJson,
    trace: Option<SolveTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    map: Option<MapOutput>,
    #[serde(skip_serializing_if = "Option::is_none")]
    check: Option<CheckReport>,
}

#[derive(Serialize)]
struct NonConvergenceOutput<'a> {
    mean: String,
    error: &'a str,
    trace: SolveTrace,
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> Failure {
    Failure::Invalid(format!("{field}: {msg}"))
}

fn read_job(path: &PathBuf) -> Result<Job, Failure> {
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| invalid("stdin", e))?;
        s
    } else {
        std::fs::read_to_string(path).map_err(|e| invalid(&path.display().to_string(), e))?
    };
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let root = path == "." || path == "?";
        let msg = e.into_inner().to_string();
        let missing = msg.strip_prefix("missing field `").and_then(|rest| rest.split_once('`')).map(|(name, _)| name);
        let field = match (missing, root) {
            (Some(name), true) => name.to_string(),
            (Some(name), false) => format!("{path}.{name}"),
            (None, true) => "job".to_string(),
            (None, false) => path,
        };
        invalid(&field, msg)
    })
}

fn resolve_mean(field: &MeanField, weights: Weights) -> Result<Mean, Failure> {
    match (field.kind, field.base) {
        (Some(_), Some(_)) => Err(invalid("mean", "give either `base` (with optional `sigma`) or `kind`, not both")),
        (None, None) => Err(invalid("mean", "missing `base` or `kind`")),
        (None, Some(base)) => {
            if field.alpha.is_some() {
                return Err(invalid("mean.alpha", "only the power mean takes `alpha`"));
            }
            Ok(Mean::Spec(NMeanSpec::new(base, weights, field.sigma.clone()).map_err(|e| invalid("mean", e))?))
        }
        (Some(kind), None) => {
            if field.sigma.is_some() {
                return Err(invalid("mean.sigma", "`sigma` needs `base`"));
            }
            match (kind, field.alpha) {
                (MeanKind::Power, Some(a)) => Ok(Mean::Power(weights, a)),
                (MeanKind::Power, None) => Err(invalid("mean.alpha", "the power mean needs `alpha`")),
                (_, Some(_)) => Err(invalid("mean.alpha", "only the power mean takes `alpha`")),
                (MeanKind::Karcher, None) => Ok(Mean::Karcher(weights)),
                (MeanKind::LogEuclidean, None) => Ok(Mean::LogEuclidean(weights)),
            }
        }
    }
}

fn run_job_check(check: &CheckField, job: &Job, weights: &Weights, map: &PositiveMap) -> Result<CheckReport, Failure> {
    let (base, sigma) = match (&job.mean.base, &job.mean.sigma) {
        (Some(b), Some(s)) => (*b, s.clone()),
        _ => return Err(invalid("check", "checks need a deformed mean: `mean.base` and `mean.sigma`")),
    };
    let bounds = match check.bounds {
        Some(b) => SpectralBounds::new(b.m, b.big_m).map_err(|e| invalid("check.bounds", e))?,
        None => {
            let lo = job.matrices.iter().map(SpdMatrix::min_eigenvalue).fold(f64::INFINITY, f64::min);
            let hi = job.matrices.iter().map(SpdMatrix::max_eigenvalue).fold(0.0, f64::max);
            SpectralBounds::new(lo, hi).map_err(|e| invalid("matrices", e))?
        }
    };
    check.params.validate(check.name.kind).map_err(|e| invalid("check.params", e))?;
    let diagonal = job.matrices.iter().all(|a| {
        let e = a.entries();
        (0..a.dim()).all(|i| (0..a.dim()).all(|j| i == j || e[(i, j)] == 0.0))
    });
    let inst = Instance {
        seed: 0,
        dim: job.matrices[0].dim(),
        n: job.matrices.len(),
        bounds,
        weights: weights.clone(),
        base,
        sigma,
        map: map.clone(),
        commuting: diagonal && map.preserves_diagonal(),
        matrices: job.matrices.clone(),
    };
    inst.validate().map_err(|e| invalid("check", e))?;
    let opts = RunOptions { params: check.params.clone(), solver: job.solver, capture_artifacts: false };
    Ok(run_check(check.name, &inst, 0, &opts))
}

pub fn run(args: Args) -> Result<(), Failure> {
    let job = read_job(&args.job)?;
    job.solver.validate().map_err(|e| invalid("solver", e))?;
    if job.matrices.is_empty() {
        return Err(invalid("matrices", "at least one matrix is required"));
    }
    let dim = job.matrices[0].dim();
    if let Some((j, a)) = job.matrices.iter().enumerate().find(|(_, a)| a.dim() != dim) {
        return Err(invalid(&format!("matrices[{j}]"), format!("dimension {} differs from matrices[0] ({dim})", a.dim())));
    }
    let weights = match &job.weights {
        Some(w) if w.len() != job.matrices.len() => {
            return Err(invalid("weights", format!("{} weights for {} matrices", w.len(), job.matrices.len())))
        }
        Some(w) => w.clone(),
        None => Weights::uniform(job.matrices.len()),
    };
    let mean = resolve_mean(&job.mean, weights.clone())?;
    if let Some(map) = &job.map {
        if let Some(d) = map.input_dim().filter(|d| *d != dim) {
            return Err(invalid("map", format!("map acts on dimension {d}, matrices have dimension {dim}")));
        }
    }

    let (x, trace) = match mean.eval(&job.matrices, &job.solver) {
        Ok(v) => v,
        Err(meanslab_core::MeansError::NonConvergence { trace }) => {
            let msg = meanslab_core::MeansError::NonConvergence { trace }.to_string();
            print_json(&NonConvergenceOutput { mean: mean.label(), error: &msg, trace })?;
            return Err(Failure::NonConvergence(msg));
        }
        Err(e) => return Err(e.into()),
    };

    let map = match &job.map {
        Some(phi) => {
            let phi_of_mean = apply_map_spd(phi, &x)?;
            let mapped = job.matrices.iter().map(|a| apply_map_spd(phi, a)).collect::<meanslab_core::Result<Vec<_>>>()?;
            let (mean_of_phi, _) = mean.eval(&mapped, &job.solver)?;
            let margin = loewner_leq(phi_of_mean.entries(), mean_of_phi.entries(), 0.0)?.margin;
            Some(MapOutput {
                map: phi.label(),
                phi_of_mean: MatrixJson::from_matrix(phi_of_mean.entries()),
                mean_of_phi: MatrixJson::from_matrix(mean_of_phi.entries()),
                margin,
            })
        }
        None => None,
    };
    let check = match &job.check {
        Some(c) => Some(run_job_check(c, &job, &weights, job.map.as_ref().unwrap_or(&PositiveMap::Identity))?),
        None => None,
    };
    print_json(&Output { mean: mean.label(), result: MatrixJson::from_matrix(x.entries()), trace, map, check })
}

fn print_json(value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Invalid(e.to_string()))?;
    println!("{text}");
    Ok(())
}
