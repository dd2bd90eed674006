//! Randomized verification of the Ando-Hiai type inequalities.
//!
//! A check evaluates one inequality family on one [`Instance`] and reports a
//! margin per term: the smallest eigenvalue of `rhs − lhs` for order
//! inequalities, `rhs − lhs` for norm inequalities. A term holds when its
//! margin is at least `−CHECK_TOL · scale`, with `scale = max(1, ‖lhs‖, ‖rhs‖)`.

pub mod backend;
pub mod checks;
pub mod instance;
pub mod suite;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{MeansError, Result};
use crate::means_n::SolverConfig;
use crate::spd::{MatrixJson, SpectralBounds};
use backend::{DiagonalBackend, MatrixBackend};
use checks::{evaluate, Evaluated, Evaluation};

pub use checks::{CheckId, CheckKind, CheckParams};
pub use instance::{Instance, InstanceConfig};
pub use suite::{job_seed, run_suite, write_counterexamples, SuiteConfig, SuiteReport};

/// Relative Loewner and norm tolerance.
pub const CHECK_TOL: f64 = 1e-9;
/// Allowed gap between a twin's matrix margin and its scalar-oracle margin, relative to scale.
pub const TWIN_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Artifacts {
    Loewner { lhs: MatrixJson, rhs: MatrixJson },
    Norm { lhs: f64, rhs: f64 },
}

impl Artifacts {
    /// Margin recomputed from the stored sides.
    pub fn recompute_margin(&self) -> Result<f64> {
        match self {
            Artifacts::Loewner { lhs, rhs } => {
                crate::spd::loewner_leq(&lhs.to_matrix()?, &rhs.to_matrix()?, 0.0).map(|o| o.margin)
            }
            Artifacts::Norm { lhs, rhs } => Ok(rhs - lhs),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub label: String,
    pub params: BTreeMap<String, f64>,
    pub margin: f64,
    pub scale: f64,
    pub holds: bool,
    /// Twins only: `|matrix margin − scalar-oracle margin|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifacts: Option<Artifacts>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: CheckId,
    pub job: usize,
    pub seed: u64,
    pub dim: usize,
    pub n: usize,
    pub bounds: SpectralBounds,
    pub mean: String,
    pub map: String,
    /// Parameters of the binding (smallest relative margin) term.
    pub params: BTreeMap<String, f64>,
    pub margin: Option<f64>,
    pub scale: Option<f64>,
    pub holds: bool,
    pub terms: Vec<Term>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Full instance, attached to failing reports for replay.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<Instance>,
}

impl CheckReport {
    pub fn relative_margin(&self) -> Option<f64> {
        Some(self.margin? / self.scale?)
    }
}

/// Options shared by every check in a run.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub params: CheckParams,
    pub solver: SolverConfig,
    /// Attach lhs/rhs artifacts to every term, not only failing ones.
    pub capture_artifacts: bool,
}

fn artifacts_of(e: &Evaluated) -> Artifacts {
    match &e.value {
        Evaluation::Loewner(c) => Artifacts::Loewner { lhs: MatrixJson::from_matrix(&c.lhs), rhs: MatrixJson::from_matrix(&c.rhs) },
        Evaluation::Norm { lhs, rhs } => Artifacts::Norm { lhs: *lhs, rhs: *rhs },
    }
}

fn term_of(e: &Evaluated, oracle: Option<&Evaluated>, capture: bool) -> Term {
    let margin = e.value.margin();
    let scale = e.value.scale();
    let mut holds = margin.is_finite() && margin >= -CHECK_TOL * scale;
    let oracle_gap = oracle.map(|o| {
        let gap = (margin - o.value.margin()).abs();
        holds &= o.value.margin() >= -CHECK_TOL * o.value.scale() && gap <= TWIN_TOL * scale;
        gap
    });
    Term {
        label: e.label.clone(),
        params: e.params.clone(),
        margin,
        scale,
        holds,
        oracle_gap,
        artifacts: (capture || !holds).then(|| artifacts_of(e)),
    }
}

fn evaluate_terms(id: CheckId, inst: &Instance, opts: &RunOptions) -> Result<Vec<Term>> {
    inst.validate()?;
    if id.twin && !inst.commuting {
        return Err(MeansError::validation(format!("{id} needs a commuting instance")));
    }
    let matrix = MatrixBackend { spec: inst.spec()?, map: &inst.map, inputs: &inst.matrices, solver: opts.solver };
    let dense = evaluate(id.kind, &matrix, inst.bounds, &opts.params)?;
    if !id.twin {
        return Ok(dense.iter().map(|e| term_of(e, None, opts.capture_artifacts)).collect());
    }
    let diag = DiagonalBackend { spec: inst.spec()?, map: &inst.map, inputs: inst.diagonals()? };
    let scalar = evaluate(id.kind, &diag, inst.bounds, &opts.params)?;
    if scalar.len() != dense.len() {
        return Err(MeansError::validation("twin backends produced different term lists"));
    }
    Ok(dense.iter().zip(&scalar).map(|(e, o)| term_of(e, Some(o), opts.capture_artifacts)).collect())
}

/// Runs one check on one instance. Evaluation errors are recorded in the report.
pub fn run_check(id: CheckId, inst: &Instance, job: usize, opts: &RunOptions) -> CheckReport {
    let mean = inst.spec().map(|s| s.label()).unwrap_or_else(|_| inst.sigma.label());
    let mut report = CheckReport {
        name: id,
        job,
        seed: inst.seed,
        dim: inst.dim,
        n: inst.n,
        bounds: inst.bounds,
        mean,
        map: inst.map.label(),
        params: BTreeMap::new(),
        margin: None,
        scale: None,
        holds: false,
        terms: Vec::new(),
        error: None,
        instance: None,
    };
    match evaluate_terms(id, inst, opts) {
        Ok(terms) => {
            let binding = terms
                .iter()
                .min_by(|a, b| (a.margin / a.scale).total_cmp(&(b.margin / b.scale)));
            if let Some(t) = binding {
                report.params = t.params.clone();
                report.margin = Some(t.margin);
                report.scale = Some(t.scale);
            }
            report.holds = terms.iter().all(|t| t.holds);
            report.terms = terms;
        }
        Err(e) => report.error = Some(e.to_string()),
    }
    if !report.holds {
        report.instance = Some(inst.clone());
    }
    report
}

/// Re-runs a stored failing report on its attached instance.
pub fn replay(report: &CheckReport, opts: &RunOptions) -> Result<CheckReport> {
    let inst = report
        .instance
        .as_ref()
        .ok_or_else(|| MeansError::validation("report carries no instance to replay"))?;
    Ok(run_check(report.name, inst, report.job, opts))
}
