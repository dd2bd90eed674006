//! Evaluation backends. Every check is written once against [`Backend`]; the
//! matrix backend runs it with the real solvers, the diagonal backend runs it
//! on commuting instances with the scalar reference means.

use nalgebra::{DMatrix, DVector};

use crate::error::{MeansError, Result};
use crate::means_n::{self, BaseMean, NMeanSpec, SolverConfig, Weights};
use crate::posmaps::{apply_map_diagonal, apply_map_spd, PositiveMap};
use crate::scalar;
use crate::spd::{loewner_leq, SpdMatrix};

/// `coef · X + shift · I`, with `X` absent meaning the identity-only side.
pub struct Affine<'a, T> {
    pub coef: f64,
    pub op: Option<&'a T>,
    pub shift: f64,
}

impl<'a, T> Affine<'a, T> {
    pub fn of(op: &'a T) -> Self {
        Affine { coef: 1.0, op: Some(op), shift: 0.0 }
    }

    pub fn scaled(coef: f64, op: &'a T) -> Self {
        Affine { coef, op: Some(op), shift: 0.0 }
    }

    pub fn shifted(coef: f64, op: &'a T, shift: f64) -> Self {
        Affine { coef, op: Some(op), shift }
    }

    pub fn identity(shift: f64) -> Self {
        Affine { coef: 0.0, op: None, shift }
    }
}

/// Result of comparing two sides in Loewner order: both sides in dense form,
/// the smallest eigenvalue of `rhs − lhs`, and the tolerance unit.
#[derive(Clone, Debug)]
pub struct Comparison {
    pub lhs: DMatrix<f64>,
    pub rhs: DMatrix<f64>,
    pub margin: f64,
    pub scale: f64,
}

pub trait Backend {
    type Op: Clone;

    fn inputs(&self) -> &[Self::Op];
    fn weights(&self) -> &Weights;
    fn map(&self) -> &PositiveMap;

    /// The instance's deformed mean.
    fn mean(&self, xs: &[Self::Op]) -> Result<Self::Op>;
    fn base_mean(&self, base: BaseMean, xs: &[Self::Op]) -> Result<Self::Op>;
    fn karcher(&self, xs: &[Self::Op]) -> Result<Self::Op>;
    fn log_euclidean(&self, xs: &[Self::Op]) -> Result<Self::Op>;

    fn pow(&self, x: &Self::Op, r: f64) -> Result<Self::Op>;
    fn scale(&self, x: &Self::Op, t: f64) -> Result<Self::Op>;
    fn apply_map(&self, x: &Self::Op) -> Result<Self::Op>;
    fn norm(&self, x: &Self::Op) -> f64;
    fn dim(&self, x: &Self::Op) -> usize;
    fn dense(&self, x: &Self::Op) -> DMatrix<f64>;

    /// Margin of `lhs ≤ rhs`.
    fn compare(&self, lhs: Affine<'_, Self::Op>, rhs: Affine<'_, Self::Op>) -> Result<Comparison> {
        let dim = lhs
            .op
            .or(rhs.op)
            .map(|x| self.dim(x))
            .ok_or_else(|| MeansError::validation("comparison needs at least one operator side"))?;
        let lhs = self.affine_dense(&lhs, dim);
        let rhs = self.affine_dense(&rhs, dim);
        let out = loewner_leq(&lhs, &rhs, 0.0)?;
        Ok(Comparison { lhs, rhs, margin: out.margin, scale: out.scale })
    }

    fn affine_dense(&self, side: &Affine<'_, Self::Op>, dim: usize) -> DMatrix<f64> {
        let mut out = match side.op {
            Some(x) => self.dense(x) * side.coef,
            None => DMatrix::zeros(dim, dim),
        };
        for i in 0..dim {
            out[(i, i)] += side.shift;
        }
        out
    }

    fn pow_all(&self, xs: &[Self::Op], r: f64) -> Result<Vec<Self::Op>> {
        xs.iter().map(|x| self.pow(x, r)).collect()
    }

    fn scale_all(&self, xs: &[Self::Op], t: f64) -> Result<Vec<Self::Op>> {
        xs.iter().map(|x| self.scale(x, t)).collect()
    }

    fn map_all(&self, xs: &[Self::Op]) -> Result<Vec<Self::Op>> {
        xs.iter().map(|x| self.apply_map(x)).collect()
    }
}

pub struct MatrixBackend<'a> {
    pub spec: NMeanSpec,
    pub map: &'a PositiveMap,
    pub inputs: &'a [SpdMatrix],
    pub solver: SolverConfig,
}

impl Backend for MatrixBackend<'_> {
    type Op = SpdMatrix;

    fn inputs(&self) -> &[SpdMatrix] {
        self.inputs
    }

    fn weights(&self) -> &Weights {
        &self.spec.weights
    }

    fn map(&self) -> &PositiveMap {
        self.map
    }

    fn mean(&self, xs: &[SpdMatrix]) -> Result<SpdMatrix> {
        self.spec.eval_matrix(xs, &self.solver)
    }

    fn base_mean(&self, base: BaseMean, xs: &[SpdMatrix]) -> Result<SpdMatrix> {
        means_n::base_mean(base, &self.spec.weights, xs)
    }

    fn karcher(&self, xs: &[SpdMatrix]) -> Result<SpdMatrix> {
        means_n::karcher_mean(&self.spec.weights, xs, &self.solver).map(|(x, _)| x)
    }

    fn log_euclidean(&self, xs: &[SpdMatrix]) -> Result<SpdMatrix> {
        means_n::log_euclidean(&self.spec.weights, xs)
    }

    fn pow(&self, x: &SpdMatrix, r: f64) -> Result<SpdMatrix> {
        x.pow(r)
    }

    fn scale(&self, x: &SpdMatrix, t: f64) -> Result<SpdMatrix> {
        x.scaled(t)
    }

    fn apply_map(&self, x: &SpdMatrix) -> Result<SpdMatrix> {
        apply_map_spd(self.map, x)
    }

    fn norm(&self, x: &SpdMatrix) -> f64 {
        x.op_norm()
    }

    fn dim(&self, x: &SpdMatrix) -> usize {
        x.dim()
    }

    fn dense(&self, x: &SpdMatrix) -> DMatrix<f64> {
        x.entries().clone()
    }
}

/// Commuting operators represented by their diagonals.
pub struct DiagonalBackend<'a> {
    pub spec: NMeanSpec,
    pub map: &'a PositiveMap,
    pub inputs: Vec<Vec<f64>>,
}

impl DiagonalBackend<'_> {
    fn coordinatewise(&self, xs: &[Vec<f64>], f: impl Fn(&[f64]) -> f64) -> Result<Vec<f64>> {
        let dim = xs.first().map_or(0, Vec::len);
        if let Some(bad) = xs.iter().find(|x| x.len() != dim) {
            return Err(MeansError::DimensionMismatch { expected: dim, found: bad.len() });
        }
        Ok((0..dim)
            .map(|i| {
                let column: Vec<f64> = xs.iter().map(|x| x[i]).collect();
                f(&column)
            })
            .collect())
    }
}

impl Backend for DiagonalBackend<'_> {
    type Op = Vec<f64>;

    fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    fn weights(&self) -> &Weights {
        &self.spec.weights
    }

    fn map(&self) -> &PositiveMap {
        self.map
    }

    fn mean(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        let w = self.spec.weights.as_slice();
        match &self.spec.deform {
            Some(sigma) => self.coordinatewise(xs, |a| scalar::deformed_mean(self.spec.base, w, sigma, a)),
            None => self.coordinatewise(xs, |a| scalar::base_mean(self.spec.base, w, a)),
        }
    }

    fn base_mean(&self, base: BaseMean, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        let w = self.spec.weights.as_slice();
        self.coordinatewise(xs, |a| scalar::base_mean(base, w, a))
    }

    fn karcher(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        let w = self.spec.weights.as_slice();
        self.coordinatewise(xs, |a| scalar::geometric_mean(w, a))
    }

    fn log_euclidean(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.karcher(xs)
    }

    fn pow(&self, x: &Vec<f64>, r: f64) -> Result<Vec<f64>> {
        Ok(x.iter().map(|v| v.powf(r)).collect())
    }

    fn scale(&self, x: &Vec<f64>, t: f64) -> Result<Vec<f64>> {
        Ok(x.iter().map(|v| v * t).collect())
    }

    fn apply_map(&self, x: &Vec<f64>) -> Result<Vec<f64>> {
        apply_map_diagonal(self.map, x)
    }

    fn norm(&self, x: &Vec<f64>) -> f64 {
        x.iter().copied().fold(0.0, f64::max)
    }

    fn dim(&self, x: &Vec<f64>) -> usize {
        x.len()
    }

    fn dense(&self, x: &Vec<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(x))
    }
}
