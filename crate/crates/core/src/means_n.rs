//! n-variable means: weighted arithmetic and harmonic means, deformed means
//! `X = 𝔐(X σ A₁, …, X σ Aₙ)` solved by fixed-point iteration, power means,
//! the Karcher mean and the Log-Euclidean mean.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{MeansError, Result};
use crate::means2::{LeftRoots, MeanTwo};
use crate::spd::{mat_exp, op_norm, symmetrize, SpdMatrix};

/// Probability vector `ω`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(MeansError::validation("weights must be non-empty"));
        }
        if let Some((j, x)) = w.iter().enumerate().find(|(_, x)| !(**x >= 0.0) || !x.is_finite()) {
            return Err(MeansError::validation(format!("weight {j} is {x}; weights must be nonnegative")));
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(MeansError::validation(format!("weights sum to {total}, expected 1")));
        }
        Ok(Weights(w))
    }

    pub fn uniform(n: usize) -> Self {
        Weights(vec![1.0 / n as f64; n])
    }

    /// Normalizes arbitrary positive scores into a probability vector.
    pub fn normalized(scores: &[f64]) -> Result<Self> {
        let total: f64 = scores.iter().sum();
        if !(total > 0.0) {
            return Err(MeansError::validation("scores must have a positive sum"));
        }
        let mut w: Vec<f64> = scores.iter().map(|s| s / total).collect();
        let last = w.len() - 1;
        let head: f64 = w[..last].iter().sum();
        w[last] = (1.0 - head).max(0.0);
        Weights::new(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for Weights {
    type Error = MeansError;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Weights::new(value)
    }
}

impl From<Weights> for Vec<f64> {
    fn from(value: Weights) -> Self {
        value.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseMean {
    Arithmetic,
    Harmonic,
}

impl BaseMean {
    pub fn adjoint(self) -> Self {
        match self {
            BaseMean::Arithmetic => BaseMean::Harmonic,
            BaseMean::Harmonic => BaseMean::Arithmetic,
        }
    }
}

/// An n-variable mean: `A_ω` or `H_ω`, optionally deformed by a two-variable mean σ.
#[derive(Clone, Debug)]
pub struct NMeanSpec {
    pub base: BaseMean,
    pub weights: Weights,
    pub deform: Option<MeanTwo>,
}

impl NMeanSpec {
    pub fn new(base: BaseMean, weights: Weights, deform: Option<MeanTwo>) -> Result<Self> {
        if let Some(sigma) = &deform {
            sigma.check_deformable()?;
        }
        Ok(NMeanSpec { base, weights, deform })
    }

    pub fn deformed(base: BaseMean, weights: Weights, sigma: MeanTwo) -> Result<Self> {
        Self::new(base, weights, Some(sigma))
    }

    /// `(𝔐_σ)* = (𝔐*)_{σ*}`.
    pub fn adjoint(&self) -> NMeanSpec {
        NMeanSpec {
            base: self.base.adjoint(),
            weights: self.weights.clone(),
            deform: self.deform.as_ref().map(MeanTwo::adjoint),
        }
    }

    pub fn eval(&self, mats: &[SpdMatrix], cfg: &SolverConfig) -> Result<(SpdMatrix, Option<SolveTrace>)> {
        match &self.deform {
            None => base_mean(self.base, &self.weights, mats).map(|x| (x, None)),
            Some(_) => deformed_mean(self, mats, cfg).map(|(x, t)| (x, Some(t))),
        }
    }

    pub fn eval_matrix(&self, mats: &[SpdMatrix], cfg: &SolverConfig) -> Result<SpdMatrix> {
        self.eval(mats, cfg).map(|(x, _)| x)
    }

    pub fn label(&self) -> String {
        let base = match self.base {
            BaseMean::Arithmetic => "arithmetic",
            BaseMean::Harmonic => "harmonic",
        };
        match &self.deform {
            None => base.to_string(),
            Some(s) => format!("{base}/{}", s.label()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    /// Anderson acceleration depth for the deformed-mean iteration; 0 runs the
    /// plain iteration. Ignored when `damping < 1`.
    pub anderson: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: 1e-12, max_iter: 500, damping: 1.0, anderson: 5 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(MeansError::validation(format!("solver.tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(MeansError::validation("solver.max_iter must be at least 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(MeansError::validation(format!(
                "solver.damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        Ok(())
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn plain(mut self) -> Self {
        self.anderson = 0;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Drops zero-weight operators and checks shapes.
fn active<'a>(w: &Weights, mats: &'a [SpdMatrix]) -> Result<(Vec<f64>, Vec<&'a SpdMatrix>)> {
    if mats.len() != w.len() {
        return Err(MeansError::validation(format!(
            "{} matrices but {} weights",
            mats.len(),
            w.len()
        )));
    }
    let dim = mats[0].dim();
    if let Some(bad) = mats.iter().find(|a| a.dim() != dim) {
        return Err(MeansError::DimensionMismatch { expected: dim, found: bad.dim() });
    }
    Ok(w.as_slice()
        .iter()
        .zip(mats)
        .filter(|(wj, _)| **wj > 0.0)
        .map(|(wj, a)| (*wj, a))
        .unzip())
}

fn weighted_sum<'a>(w: &[f64], mats: impl Iterator<Item = &'a DMatrix<f64>>) -> DMatrix<f64> {
    let mut acc: Option<DMatrix<f64>> = None;
    for (wj, a) in w.iter().zip(mats) {
        match acc.as_mut() {
            None => acc = Some(a * *wj),
            Some(s) => *s += a * *wj,
        }
    }
    symmetrize(&acc.expect("at least one active operator"))
}

/// `A_ω = ∑ ωⱼ Aⱼ`.
pub fn arithmetic_mean(w: &Weights, mats: &[SpdMatrix]) -> Result<SpdMatrix> {
    let (w, mats) = active(w, mats)?;
    if mats.len() == 1 {
        return Ok(mats[0].clone());
    }
    SpdMatrix::new(weighted_sum(&w, mats.iter().map(|a| a.entries())))
}

/// `H_ω = (∑ ωⱼ Aⱼ⁻¹)⁻¹`.
pub fn harmonic_mean(w: &Weights, mats: &[SpdMatrix]) -> Result<SpdMatrix> {
    let (w, mats) = active(w, mats)?;
    if mats.len() == 1 {
        return Ok(mats[0].clone());
    }
    let inverses = mats.iter().map(|a| a.inv()).collect::<Result<Vec<_>>>()?;
    SpdMatrix::new(weighted_sum(&w, inverses.iter().map(|a| a.entries())))?.inv()
}

pub fn base_mean(base: BaseMean, w: &Weights, mats: &[SpdMatrix]) -> Result<SpdMatrix> {
    match base {
        BaseMean::Arithmetic => arithmetic_mean(w, mats),
        BaseMean::Harmonic => harmonic_mean(w, mats),
    }
}

fn relative_gap(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    op_norm(&(x - y)) / op_norm(x)
}

/// A defect `d` under contraction rate `ρ` leaves an error of about `d / (1 − ρ)`.
/// Keep iterating until that estimate is well below `tol`, or until the defect
/// stops shrinking, which means it has reached rounding level. Under mixing the
/// defect ratio says nothing about `ρ`, so only the rounding-level tests apply.
fn error_settled(defect: f64, previous: f64, tol: f64, mixing: bool) -> bool {
    if defect <= 64.0 * f64::EPSILON || defect >= previous {
        return true;
    }
    if mixing || !previous.is_finite() {
        return false;
    }
    let rate = defect / previous;
    defect / (1.0 - rate) <= 0.1 * tol
}

/// Type-II Anderson mixing for `X ↦ g(X)` on symmetric matrices. A candidate
/// whose spectrum leaves `[lo, hi]`, the interval every mean of the inputs lies
/// in, falls back to the plain image and restarts the history.
struct Anderson {
    depth: usize,
    lo: f64,
    hi: f64,
    last: Option<(DMatrix<f64>, DMatrix<f64>)>,
    d_res: Vec<DMatrix<f64>>,
    d_img: Vec<DMatrix<f64>>,
}

impl Anderson {
    fn new(depth: usize, mats: &[SpdMatrix]) -> Self {
        let lo = mats.iter().map(SpdMatrix::min_eigenvalue).fold(f64::INFINITY, f64::min);
        let hi = mats.iter().map(SpdMatrix::max_eigenvalue).fold(0.0, f64::max);
        Anderson { depth, lo: lo * (1.0 - 1e-8), hi: hi * (1.0 + 1e-8), last: None, d_res: Vec::new(), d_img: Vec::new() }
    }

    fn reset(&mut self) {
        self.d_res.clear();
        self.d_img.clear();
    }

    fn step(&mut self, x: &DMatrix<f64>, image: SpdMatrix) -> SpdMatrix {
        let g = image.entries().clone();
        let f = &g - x;
        if let Some((f_prev, g_prev)) = self.last.replace((f.clone(), g.clone())) {
            self.d_res.push(&f - f_prev);
            self.d_img.push(&g - g_prev);
            if self.d_res.len() > self.depth {
                self.d_res.remove(0);
                self.d_img.remove(0);
            }
        }
        if self.d_res.is_empty() {
            return image;
        }
        let len = f.len();
        let basis = DMatrix::from_fn(len, self.d_res.len(), |i, j| self.d_res[j].as_slice()[i]);
        let rhs = nalgebra::DVector::from_column_slice(f.as_slice());
        let gamma = match basis.svd(true, true).solve(&rhs, 1e-10 * f.norm().max(f64::MIN_POSITIVE)) {
            Ok(gamma) => gamma,
            Err(_) => return image,
        };
        let mut mixed = g;
        for (c, dg) in gamma.iter().zip(&self.d_img) {
            mixed -= dg * *c;
        }
        match SpdMatrix::new(symmetrize(&mixed)) {
            Ok(next) if next.min_eigenvalue() >= self.lo && next.max_eigenvalue() <= self.hi => next,
            _ => {
                self.reset();
                image
            }
        }
    }
}

/// The deformed mean `𝔐_σ(A₁, …, Aₙ)`, the unique positive solution of
/// `X = 𝔐(X σ A₁, …, X σ Aₙ)`.
///
/// Iterates `X ← (1 − d) X + d 𝔐(X σ Aⱼ)` from `X₀ = A_ω`, Anderson-accelerated
/// when `d = 1` and `cfg.anderson > 0`, until the relative fixed-point defect `‖X − 𝔐(X σ Aⱼ)‖ / ‖X‖` drops below `cfg.tol`.
pub fn deformed_mean(spec: &NMeanSpec, mats: &[SpdMatrix], cfg: &SolverConfig) -> Result<(SpdMatrix, SolveTrace)> {
    cfg.validate()?;
    let sigma = spec
        .deform
        .as_ref()
        .ok_or_else(|| MeansError::validation("deformed_mean needs a deforming mean"))?;
    sigma.check_deformable()?;
    let (w, mats) = active(&spec.weights, mats)?;
    if mats.len() == 1 {
        return Ok((mats[0].clone(), SolveTrace { iterations: 0, residual: 0.0, converged: true }));
    }
    let w = Weights(w);
    let mats: Vec<SpdMatrix> = mats.into_iter().cloned().collect();

    let mut x = arithmetic_mean(&w, &mats)?;
    let mut anderson = (cfg.anderson > 0 && cfg.damping == 1.0).then(|| Anderson::new(cfg.anderson, &mats));
    let mut residual = f64::INFINITY;
    for k in 1..=cfg.max_iter {
        let roots = LeftRoots::new(&x)?;
        let moved = mats.iter().map(|a| roots.mean(sigma, a)).collect::<Result<Vec<_>>>()?;
        let image = base_mean(spec.base, &w, &moved)?;
        let previous = residual;
        residual = relative_gap(x.entries(), image.entries());
        let settled = error_settled(residual, previous, cfg.tol, anderson.is_some());
        if residual <= cfg.tol && (settled || k == cfg.max_iter) {
            return Ok((x, SolveTrace { iterations: k, residual, converged: true }));
        }
        x = if let Some(acc) = anderson.as_mut() {
            if residual > previous {
                acc.reset();
            }
            acc.step(x.entries(), image)
        } else if cfg.damping < 1.0 {
            SpdMatrix::new(x.entries() * (1.0 - cfg.damping) + image.entries() * cfg.damping)?
        } else {
            image
        };
    }
    Err(MeansError::NonConvergence {
        trace: SolveTrace { iterations: cfg.max_iter, residual, converged: false },
    })
}

fn check_power(alpha: f64) -> Result<()> {
    if alpha == 0.0 {
        return Err(MeansError::validation("power mean exponent 0 is the Karcher mean; use karcher_mean"));
    }
    if !(-1.0..=1.0).contains(&alpha) {
        return Err(MeansError::validation(format!("power mean exponent must lie in [-1, 1], got {alpha}")));
    }
    Ok(())
}

/// `P_{ω,α}`: `(A_ω)_{♯_α}` for `α > 0`, and `(P_{ω,|α|}(A₁⁻¹, …))⁻¹` for `α < 0`.
pub fn power_mean(w: &Weights, alpha: f64, mats: &[SpdMatrix], cfg: &SolverConfig) -> Result<SpdMatrix> {
    power_mean_traced(w, alpha, mats, cfg).map(|(x, _)| x)
}

pub fn power_mean_traced(
    w: &Weights,
    alpha: f64,
    mats: &[SpdMatrix],
    cfg: &SolverConfig,
) -> Result<(SpdMatrix, SolveTrace)> {
    check_power(alpha)?;
    if alpha > 0.0 {
        let spec = NMeanSpec::deformed(BaseMean::Arithmetic, w.clone(), MeanTwo::Geometric(alpha))?;
        deformed_mean(&spec, mats, cfg)
    } else {
        let inverses = mats.iter().map(SpdMatrix::inv).collect::<Result<Vec<_>>>()?;
        let (x, trace) = power_mean_traced(w, -alpha, &inverses, cfg)?;
        Ok((x.inv()?, trace))
    }
}

/// `P_{ω,−α}` computed directly as the fixed point `X = H_ω(X ♯_α Aⱼ)` (`α > 0`).
pub fn power_mean_harmonic_base(w: &Weights, alpha: f64, mats: &[SpdMatrix], cfg: &SolverConfig) -> Result<SpdMatrix> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(MeansError::validation(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let spec = NMeanSpec::deformed(BaseMean::Harmonic, w.clone(), MeanTwo::Geometric(alpha))?;
    deformed_mean(&spec, mats, cfg).map(|(x, _)| x)
}

/// Exponent of the power mean used to start the Karcher iteration.
pub const KARCHER_START_POWER: f64 = 0.125;

/// `∑ ωⱼ log(X^{-1/2} Aⱼ X^{-1/2})`.
pub fn karcher_gradient(w: &Weights, mats: &[SpdMatrix], x: &SpdMatrix) -> Result<DMatrix<f64>> {
    let (w, mats) = active(w, mats)?;
    let roots = LeftRoots::new(x)?;
    let logs = mats
        .iter()
        .map(|a| roots.whiten(a).and_then(|y| y.log()))
        .collect::<Result<Vec<_>>>()?;
    Ok(weighted_sum(&w, logs.iter()))
}

/// Unit in which the Karcher residual is measured: `mean ‖log Aⱼ‖ + 1`.
pub fn karcher_scale(mats: &[SpdMatrix]) -> Result<f64> {
    let mut total = 0.0;
    for a in mats {
        total += op_norm(&a.log()?);
    }
    Ok(total / mats.len() as f64 + 1.0)
}

/// `(c+1)/(c−1)·log c` for a whitened operator of condition number `c`, with limit 2 at `c = 1`.
fn karcher_curvature(c: f64) -> f64 {
    let d = c - 1.0;
    if d < 1e-6 {
        2.0 + d * d / 6.0
    } else {
        (c + 1.0) / d * c.ln()
    }
}

/// The Karcher mean `G_ω`, solution of `∑ ωⱼ log(X^{-1/2} Aⱼ X^{-1/2}) = 0`,
/// by Richardson iteration with step `2 / ∑ ωⱼ (cⱼ+1)/(cⱼ−1) log cⱼ`, where
/// `cⱼ` is the condition number of the whitened `Aⱼ`.
pub fn karcher_mean(w: &Weights, mats: &[SpdMatrix], cfg: &SolverConfig) -> Result<(SpdMatrix, SolveTrace)> {
    cfg.validate()?;
    let (wa, active_mats) = active(w, mats)?;
    if active_mats.len() == 1 {
        return Ok((active_mats[0].clone(), SolveTrace { iterations: 0, residual: 0.0, converged: true }));
    }
    let w = Weights(wa);
    let mats: Vec<SpdMatrix> = active_mats.into_iter().cloned().collect();
    let scale = karcher_scale(&mats)?;
    let mut x = power_mean(&w, KARCHER_START_POWER, &mats, cfg)?;
    let mut residual = f64::INFINITY;
    for k in 1..=cfg.max_iter {
        let roots = LeftRoots::new(&x)?;
        let whitened = mats.iter().map(|a| roots.whiten(a)).collect::<Result<Vec<_>>>()?;
        let logs = whitened.iter().map(SpdMatrix::log).collect::<Result<Vec<_>>>()?;
        let grad = weighted_sum(w.as_slice(), logs.iter());
        residual = op_norm(&grad) / scale;
        if residual <= cfg.tol {
            return Ok((x, SolveTrace { iterations: k, residual, converged: true }));
        }
        let curvature: f64 = w
            .as_slice()
            .iter()
            .zip(&whitened)
            .map(|(wj, y)| wj * karcher_curvature(y.max_eigenvalue() / y.min_eigenvalue()))
            .sum();
        let step = mat_exp(&(grad * (cfg.damping * 2.0 / curvature)))?;
        x = SpdMatrix::new(roots.color(step.entries()))?;
    }
    Err(MeansError::NonConvergence {
        trace: SolveTrace { iterations: cfg.max_iter, residual, converged: false },
    })
}

/// `exp(∑ ωⱼ log Aⱼ)`.
pub fn log_euclidean(w: &Weights, mats: &[SpdMatrix]) -> Result<SpdMatrix> {
    let (w, mats) = active(w, mats)?;
    if mats.len() == 1 {
        return Ok(mats[0].clone());
    }
    let logs = mats.iter().map(|a| a.log()).collect::<Result<Vec<_>>>()?;
    mat_exp(&weighted_sum(&w, logs.iter()))
}

/// `𝔐*(A₁, …, Aₙ) = 𝔐(A₁⁻¹, …, Aₙ⁻¹)⁻¹`.
pub fn adjoint_nmean(spec: &NMeanSpec, mats: &[SpdMatrix], cfg: &SolverConfig) -> Result<SpdMatrix> {
    let inverses = mats.iter().map(SpdMatrix::inv).collect::<Result<Vec<_>>>()?;
    spec.eval_matrix(&inverses, cfg)?.inv()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::means2::mean2;
    use crate::scalar;
    use crate::spd::{congruence, loewner_leq, random_spd, SpectralBounds};
    use proptest::prelude::*;

    fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        op_norm(&(a - b)) / op_norm(b)
    }

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    fn scalars(xs: &[f64]) -> Vec<SpdMatrix> {
        xs.iter().map(|&x| SpdMatrix::scalar(x).unwrap()).collect()
    }

    fn instance(dim: usize, n: usize, seed: u64) -> (Weights, Vec<SpdMatrix>) {
        let b = SpectralBounds::new(0.5, 4.0).unwrap();
        let mats = (0..n).map(|j| random_spd(dim, b, seed.wrapping_mul(31).wrapping_add(j as u64)).unwrap()).collect();
        let scores: Vec<f64> = (0..n).map(|j| 1.0 + ((seed >> (j % 8)) % 5) as f64).collect();
        (Weights::normalized(&scores).unwrap(), mats)
    }

    fn all_specs(w: &Weights) -> Vec<NMeanSpec> {
        let mut out = Vec::new();
        for base in [BaseMean::Arithmetic, BaseMean::Harmonic] {
            for sigma in [MeanTwo::Geometric(0.5), MeanTwo::Arithmetic(0.3), MeanTwo::Harmonic(0.7), MeanTwo::Geometric(0.25)] {
                out.push(NMeanSpec::deformed(base, w.clone(), sigma).unwrap());
            }
        }
        out
    }

    #[test]
    fn weights_validation() {
        assert!(Weights::new(vec![0.5, 0.6]).is_err());
        assert!(Weights::new(vec![1.5, -0.5]).is_err());
        assert!(Weights::new(vec![]).is_err());
        assert!(serde_json::from_str::<Weights>("[0.25,0.75]").is_ok());
        assert!(serde_json::from_str::<Weights>("[0.25,0.7]").is_err());
    }

    #[test]
    fn equal_operators_are_fixed() {
        let a = random_spd(3, SpectralBounds::new(1.0, 4.0).unwrap(), 9).unwrap();
        let mats = vec![a.clone(), a.clone(), a.clone()];
        let w = Weights::uniform(3);
        assert!(rel_err(arithmetic_mean(&w, &mats).unwrap().entries(), a.entries()) < 1e-14);
        assert!(rel_err(harmonic_mean(&w, &mats).unwrap().entries(), a.entries()) < 1e-14);
        for spec in all_specs(&w) {
            let (x, trace) = deformed_mean(&spec, &mats, &cfg()).unwrap();
            assert_eq!(trace.iterations, 1, "{}", spec.label());
            assert!(rel_err(x.entries(), a.entries()) < 1e-12);
        }
        let (g, _) = karcher_mean(&w, &mats, &cfg()).unwrap();
        assert!(rel_err(g.entries(), a.entries()) < 1e-12);
        assert!(rel_err(log_euclidean(&w, &mats).unwrap().entries(), a.entries()) < 1e-12);
        assert!(rel_err(adjoint_nmean(&all_specs(&w)[0], &mats, &cfg()).unwrap().entries(), a.entries()) < 1e-12);
    }

    #[test]
    fn scalar_arithmetic_and_harmonic() {
        let w = Weights::uniform(2);
        let mats = scalars(&[2.0, 4.0]);
        assert!((arithmetic_mean(&w, &mats).unwrap().entries()[(0, 0)] - 3.0).abs() < 1e-15);
        assert!((harmonic_mean(&w, &mats).unwrap().entries()[(0, 0)] - 8.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn harmonic_is_inverse_of_arithmetic_on_inverses() {
        let (w, mats) = instance(4, 3, 1);
        let inv: Vec<_> = mats.iter().map(|a| a.inv().unwrap()).collect();
        let via = arithmetic_mean(&w, &inv).unwrap().inv().unwrap();
        assert!(rel_err(harmonic_mean(&w, &mats).unwrap().entries(), via.entries()) < 1e-10);
    }

    #[test]
    fn scalar_power_mean_fixed_point() {
        let w = Weights::uniform(2);
        let x = power_mean(&w, 0.5, &scalars(&[1.0, 4.0]), &cfg()).unwrap();
        assert!((x.entries()[(0, 0)] - 2.25).abs() < 1e-12);
        let spec = NMeanSpec::deformed(BaseMean::Arithmetic, w, MeanTwo::Geometric(0.5)).unwrap();
        let (x, _) = deformed_mean(&spec, &scalars(&[1.0, 4.0]), &cfg()).unwrap();
        assert!((x.entries()[(0, 0)] - 2.25).abs() < 1e-12);
    }

    #[test]
    fn power_mean_endpoints() {
        let (w, mats) = instance(3, 4, 2);
        let p1 = power_mean(&w, 1.0, &mats, &cfg()).unwrap();
        assert!(rel_err(p1.entries(), arithmetic_mean(&w, &mats).unwrap().entries()) < 1e-10);
        let pm1 = power_mean(&w, -1.0, &mats, &cfg()).unwrap();
        assert!(rel_err(pm1.entries(), harmonic_mean(&w, &mats).unwrap().entries()) < 1e-10);
        assert!(power_mean(&w, 0.0, &mats, &cfg()).is_err());
        assert!(power_mean(&w, 1.5, &mats, &cfg()).is_err());
    }

    #[test]
    fn negative_power_mean_routes_agree() {
        for seed in 0..4 {
            let (w, mats) = instance(4, 3, seed);
            for alpha in [0.25, 0.5, 0.9] {
                let dual = power_mean(&w, -alpha, &mats, &cfg()).unwrap();
                let direct = power_mean_harmonic_base(&w, alpha, &mats, &cfg()).unwrap();
                assert!(rel_err(dual.entries(), direct.entries()) < 1e-9);
            }
        }
    }

    #[test]
    fn diagonal_means_match_scalars() {
        let w = Weights::new(vec![0.2, 0.5, 0.3]).unwrap();
        let cols = [[1.0, 3.0, 0.7], [2.0, 0.6, 3.5], [1.5, 1.2, 2.2]];
        let mats: Vec<_> = cols.iter().map(|c| SpdMatrix::diagonal(c).unwrap()).collect();
        for spec in all_specs(&w) {
            let x = spec.eval_matrix(&mats, &cfg()).unwrap();
            for i in 0..3 {
                let a: Vec<f64> = cols.iter().map(|c| c[i]).collect();
                let want = scalar::deformed_mean(spec.base, w.as_slice(), spec.deform.as_ref().unwrap(), &a);
                assert!((x.entries()[(i, i)] - want).abs() < 1e-10 * want, "{}", spec.label());
            }
        }
        let (g, _) = karcher_mean(&w, &mats, &cfg()).unwrap();
        let le = log_euclidean(&w, &mats).unwrap();
        for i in 0..3 {
            let a: Vec<f64> = cols.iter().map(|c| c[i]).collect();
            let want = scalar::geometric_mean(w.as_slice(), &a);
            assert!((g.entries()[(i, i)] - want).abs() < 1e-10 * want);
            assert!((le.entries()[(i, i)] - want).abs() < 1e-10 * want);
        }
    }

    #[test]
    fn degenerate_weights_return_survivor() {
        let (_, mats) = instance(3, 3, 5);
        let w = Weights::new(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(arithmetic_mean(&w, &mats).unwrap(), mats[1]);
        assert_eq!(harmonic_mean(&w, &mats).unwrap(), mats[1]);
        assert_eq!(log_euclidean(&w, &mats).unwrap(), mats[1]);
        assert_eq!(karcher_mean(&w, &mats, &cfg()).unwrap().0, mats[1]);
        for spec in all_specs(&w) {
            assert_eq!(deformed_mean(&spec, &mats, &cfg()).unwrap().0, mats[1]);
        }
        let w = Weights::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(log_euclidean(&w, &mats).unwrap(), mats[0]);
    }

    #[test]
    fn shape_errors() {
        let (w, mut mats) = instance(3, 3, 6);
        assert!(arithmetic_mean(&w, &mats[..2]).is_err());
        mats[2] = SpdMatrix::identity(2);
        assert!(matches!(arithmetic_mean(&w, &mats), Err(MeansError::DimensionMismatch { .. })));
        let spec = NMeanSpec { base: BaseMean::Arithmetic, weights: w.clone(), deform: Some(MeanTwo::LeftTrivial) };
        assert!(deformed_mean(&spec, &mats, &cfg()).is_err());
        assert!(NMeanSpec::deformed(BaseMean::Arithmetic, w, MeanTwo::LeftTrivial).is_err());
    }

    #[test]
    fn non_convergence_carries_trace() {
        let (w, mats) = instance(4, 3, 7);
        let spec = NMeanSpec::deformed(BaseMean::Arithmetic, w, MeanTwo::Geometric(0.3)).unwrap();
        let err = deformed_mean(&spec, &mats, &cfg().with_max_iter(3)).unwrap_err();
        match err {
            MeansError::NonConvergence { trace } => {
                assert_eq!(trace.iterations, 3);
                assert!(!trace.converged && trace.residual > 1e-12);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn damping_reaches_same_fixed_point() {
        let (w, mats) = instance(3, 3, 8);
        let spec = NMeanSpec::deformed(BaseMean::Harmonic, w, MeanTwo::Geometric(0.6)).unwrap();
        let (plain, _) = deformed_mean(&spec, &mats, &cfg()).unwrap();
        let damped_cfg = SolverConfig { damping: 0.5, max_iter: 2000, ..cfg() };
        let (damped, t) = deformed_mean(&spec, &mats, &damped_cfg).unwrap();
        assert!(t.converged);
        assert!(rel_err(damped.entries(), plain.entries()) < 1e-10);
    }

    #[test]
    fn accelerated_matches_scalar_oracle_on_wide_spectra() {
        // Spread 16³: plain iteration contracts slowly here and a mixed step
        // can drift toward singular spurious fixed points.
        let b = SpectralBounds::new(1.0, 4096.0).unwrap();
        for seed in 0..20u64 {
            let n = 2 + (seed % 3) as usize;
            let diags: Vec<Vec<f64>> = (0..n)
                .map(|j| {
                    let a = random_spd(5, b, seed * 7 + j as u64).unwrap();
                    a.eigenvalues().iter().copied().collect()
                })
                .collect();
            let mats: Vec<SpdMatrix> = diags.iter().map(|d| SpdMatrix::diagonal(d).unwrap()).collect();
            let w = Weights::uniform(n);
            for spec in all_specs(&w) {
                let (x, trace) = deformed_mean(&spec, &mats, &cfg()).unwrap();
                assert!(trace.converged && trace.iterations <= 200, "{} {trace:?}", spec.label());
                for i in 0..5 {
                    let a: Vec<f64> = diags.iter().map(|d| d[i]).collect();
                    let want = scalar::deformed_mean(spec.base, w.as_slice(), spec.deform.as_ref().unwrap(), &a);
                    assert!((x.entries()[(i, i)] - want).abs() <= 1e-10 * want, "{} seed {seed}", spec.label());
                }
            }
        }
    }

    #[test]
    fn accelerated_and_plain_iterations_agree() {
        for seed in 0..6 {
            let (w, mats) = instance(4, 3, seed);
            for spec in all_specs(&w) {
                let (fast, ft) = deformed_mean(&spec, &mats, &cfg()).unwrap();
                let (slow, st) = deformed_mean(&spec, &mats, &cfg().plain()).unwrap();
                assert!(ft.iterations <= st.iterations);
                assert!(rel_err(fast.entries(), slow.entries()) < 1e-11, "{}", spec.label());
            }
        }
    }

    #[test]
    fn karcher_two_points_is_geodesic_midpoint() {
        for seed in 0..5 {
            let (_, mats) = instance(4, 2, seed);
            let w = Weights::uniform(2);
            let (g, trace) = karcher_mean(&w, &mats, &cfg()).unwrap();
            assert!(trace.converged);
            let mid = mean2(&MeanTwo::Geometric(0.5), &mats[0], &mats[1]).unwrap();
            assert!(rel_err(g.entries(), mid.entries()) < 1e-9);
            let grad = karcher_gradient(&w, &mats, &mid).unwrap();
            assert!(op_norm(&grad) < 1e-10);
        }
    }

    #[test]
    fn adjoint_identities() {
        let (w, mats) = instance(3, 3, 10);
        let arith = NMeanSpec::new(BaseMean::Arithmetic, w.clone(), None).unwrap();
        let adj = adjoint_nmean(&arith, &mats, &cfg()).unwrap();
        assert!(rel_err(adj.entries(), harmonic_mean(&w, &mats).unwrap().entries()) < 1e-10);
        for spec in all_specs(&w) {
            let via_inverse = adjoint_nmean(&spec, &mats, &cfg()).unwrap();
            let via_dual_spec = spec.adjoint().eval_matrix(&mats, &cfg()).unwrap();
            assert!(rel_err(via_inverse.entries(), via_dual_spec.entries()) < 1e-9, "{}", spec.label());
            let twice = adjoint_nmean(&spec.adjoint(), &mats, &cfg()).unwrap();
            let twice_dual = spec.adjoint().adjoint().eval_matrix(&mats, &cfg()).unwrap();
            let direct = spec.eval_matrix(&mats, &cfg()).unwrap();
            assert!(rel_err(twice_dual.entries(), direct.entries()) < 1e-9);
            let back = adjoint_nmean(&spec.adjoint(), &mats.iter().map(|a| a.clone()).collect::<Vec<_>>(), &cfg()).unwrap();
            assert!(rel_err(back.entries(), twice.entries()) < 1e-12);
        }
    }

    #[test]
    fn power_means_approach_karcher() {
        let (w, mats) = instance(3, 3, 12);
        let (g, _) = karcher_mean(&w, &mats, &cfg()).unwrap();
        let long = cfg().with_max_iter(5000);
        let mut prev = f64::INFINITY;
        for k in 1..=5 {
            let p = power_mean(&w, 0.5f64.powi(k), &mats, &long).unwrap();
            let d = op_norm(&(p.entries() - g.entries()));
            assert!(d < prev, "k = {k}: {d} >= {prev}");
            prev = d;
        }
    }

    #[test]
    fn lie_trotter_first_order() {
        for seed in 0..3 {
            let (w, mats) = instance(3, 3, seed + 20);
            let spec = NMeanSpec::deformed(BaseMean::Harmonic, w.clone(), MeanTwo::Geometric(0.5)).unwrap();
            let le = log_euclidean(&w, &mats).unwrap();
            let err = |p: f64| {
                let powered: Vec<_> = mats.iter().map(|a| a.pow(p).unwrap()).collect();
                let x = spec.eval_matrix(&powered, &cfg()).unwrap().pow(1.0 / p).unwrap();
                op_norm(&(x.entries() - le.entries()))
            };
            let mut p = 0.2;
            let mut e = err(p);
            while p > 0.03 {
                let e_half = err(p / 2.0);
                assert!(e_half <= 0.75 * e, "p = {p}: {e_half} vs {e}");
                p /= 2.0;
                e = e_half;
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn prop_sandwich(seed in any::<u64>(), dim in 1usize..=5, n in 2usize..=4) {
            let (w, mats) = instance(dim, n, seed);
            let h = harmonic_mean(&w, &mats).unwrap();
            let a = arithmetic_mean(&w, &mats).unwrap();
            for spec in all_specs(&w) {
                let x = spec.eval_matrix(&mats, &cfg()).unwrap();
                prop_assert!(loewner_leq(h.entries(), x.entries(), 1e-9).unwrap().holds);
                prop_assert!(loewner_leq(x.entries(), a.entries(), 1e-9).unwrap().holds);
            }
        }

        #[test]
        fn prop_congruence_and_homogeneity(seed in any::<u64>(), dim in 1usize..=4) {
            let (w, mats) = instance(dim, 3, seed);
            let s = random_spd(dim, SpectralBounds::new(1.0, 10.0).unwrap(), seed ^ 77).unwrap();
            let specs = all_specs(&w);
            for spec in specs.iter().step_by(3) {
                let x = spec.eval_matrix(&mats, &cfg()).unwrap();
                let moved: Vec<_> = mats.iter().map(|a| congruence(s.entries(), a).unwrap()).collect();
                let lhs = congruence(s.entries(), &x).unwrap();
                let rhs = spec.eval_matrix(&moved, &cfg()).unwrap();
                prop_assert!(rel_err(lhs.entries(), rhs.entries()) < 1e-8);
                for t in [0.1, 2.0, 10.0] {
                    let scaled: Vec<_> = mats.iter().map(|a| a.scaled(t).unwrap()).collect();
                    let xt = spec.eval_matrix(&scaled, &cfg()).unwrap();
                    prop_assert!(rel_err(xt.entries(), &(x.entries() * t)) < 1e-10);
                }
            }
        }

        #[test]
        fn prop_monotone(seed in any::<u64>(), dim in 1usize..=4) {
            let (w, mats) = instance(dim, 3, seed);
            let (_, extra) = instance(dim, 3, seed ^ 0x55);
            let bigger: Vec<_> = mats.iter().zip(&extra)
                .map(|(a, e)| SpdMatrix::new(a.entries() + e.entries() * 0.4).unwrap())
                .collect();
            for spec in all_specs(&w).iter().step_by(2) {
                let lo = spec.eval_matrix(&mats, &cfg()).unwrap();
                let hi = spec.eval_matrix(&bigger, &cfg()).unwrap();
                prop_assert!(loewner_leq(lo.entries(), hi.entries(), 1e-9).unwrap().holds);
            }
        }
    }
}
