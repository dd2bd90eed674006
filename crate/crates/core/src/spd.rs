//! Functional calculus on real symmetric positive-definite matrices.
//!
//! Every matrix function goes through a symmetric eigendecomposition
//! `A = Q diag(λ) Qᵀ` and is evaluated as `Q diag(f(λ)) Qᵀ`, then
//! symmetrized as `(X + Xᵀ)/2` before it is handed to anything downstream.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{MeansError, Result};

/// Relative symmetry tolerance accepted on input.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Sweep budget handed to the symmetric QR eigensolver.
const EIG_MAX_SWEEPS: usize = 10_000;

/// Eigenvalues in ascending order with the matching orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub basis: DMatrix<f64>,
}

impl SymEigen {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        apply_spectrum(&self.basis, self.values.iter().copied())
    }
}

/// A symmetric positive-definite matrix together with its spectral decomposition.
///
/// The decomposition is computed once at construction; the value is immutable afterwards.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct SpdMatrix {
    entries: DMatrix<f64>,
    eigen: SymEigen,
}

impl SpdMatrix {
    /// Validates symmetry and positive definiteness of `entries`.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        check_square(&entries)?;
        check_symmetric(&entries)?;
        let entries = symmetrize(&entries);
        let eigen = eig_sym(&entries)?;
        if let Some((idx, &lambda)) = eigen
            .values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0) || !v.is_finite())
        {
            return Err(MeansError::validation(format!(
                "matrix is not positive definite: eigenvalue #{idx} = {lambda:e}"
            )));
        }
        Ok(SpdMatrix { entries, eigen })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows_to_matrix(rows)?)
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim]).expect("identity is positive definite")
    }

    pub fn scalar(value: f64) -> Result<Self> {
        Self::diagonal(&[value])
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(values)))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn eigen(&self) -> &SymEigen {
        &self.eigen
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigen.values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen.values[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigen.values[self.dim() - 1]
    }

    pub fn op_norm(&self) -> f64 {
        self.max_eigenvalue()
    }

    pub fn scaled(&self, t: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(MeansError::validation(format!("scale factor must be positive, got {t}")));
        }
        Self::new(&self.entries * t)
    }

    pub fn pow(&self, r: f64) -> Result<Self> {
        mat_pow(self, r)
    }

    pub fn inv(&self) -> Result<Self> {
        mat_inv(self)
    }

    pub fn sqrt(&self) -> Result<Self> {
        mat_pow(self, 0.5)
    }

    pub fn log(&self) -> Result<DMatrix<f64>> {
        mat_log(self)
    }
}

impl PartialEq for SpdMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

/// Interval `[m, M]` containing a spectrum; `h = M/m` is the condition ratio.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralBounds {
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
}

impl SpectralBounds {
    pub fn new(m: f64, big_m: f64) -> Result<Self> {
        if !(m > 0.0) || !(big_m >= m) || !big_m.is_finite() {
            return Err(MeansError::validation(format!(
                "spectral bounds need 0 < m <= M, got m = {m}, M = {big_m}"
            )));
        }
        Ok(SpectralBounds { m, big_m })
    }

    pub fn lower(&self) -> f64 {
        self.m
    }

    pub fn upper(&self) -> f64 {
        self.big_m
    }

    pub fn h(&self) -> f64 {
        self.big_m / self.m
    }

    /// Bounds of `{x^r : x ∈ [m, M]}`.
    pub fn powf(&self, r: f64) -> Self {
        let (a, b) = (self.m.powf(r), self.big_m.powf(r));
        SpectralBounds { m: a.min(b), big_m: a.max(b) }
    }

    pub fn scaled(&self, t: f64) -> Self {
        SpectralBounds { m: self.m * t, big_m: self.big_m * t }
    }
}

/// Wire form of a matrix: `{"dim": n, "entries": [[...], ...]}`, row-major.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub dim: usize,
    pub entries: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        MatrixJson {
            dim: m.nrows(),
            entries: (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.entries.len() != self.dim {
            return Err(MeansError::validation(format!(
                "`entries` has {} rows but `dim` is {}",
                self.entries.len(),
                self.dim
            )));
        }
        rows_to_matrix(&self.entries)
    }
}

impl TryFrom<MatrixJson> for SpdMatrix {
    type Error = MeansError;

    fn try_from(value: MatrixJson) -> Result<Self> {
        SpdMatrix::new(value.to_matrix()?)
    }
}

impl From<SpdMatrix> for MatrixJson {
    fn from(value: SpdMatrix) -> Self {
        MatrixJson::from_matrix(&value.entries)
    }
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(MeansError::validation("matrix must have at least one row"));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(MeansError::validation(format!(
                "row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        if let Some(x) = row.iter().find(|x| !x.is_finite()) {
            return Err(MeansError::validation(format!("row {i} contains non-finite entry {x}")));
        }
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn check_square(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(MeansError::validation(format!(
            "matrix must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.nrows() == 0 {
        return Err(MeansError::validation("matrix must be non-empty"));
    }
    Ok(())
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    let scale = a.amax().max(1.0);
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (a[(i, j)] - a[(j, i)]).abs();
            if gap > SYMMETRY_TOL * scale {
                return Err(MeansError::validation(format!(
                    "matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {gap:e}"
                )));
            }
        }
    }
    Ok(())
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// `Q diag(values) Qᵀ`, symmetrized.
fn apply_spectrum(basis: &DMatrix<f64>, values: impl Iterator<Item = f64>) -> DMatrix<f64> {
    let d = DVector::from_iterator(basis.ncols(), values);
    let mut scaled = basis.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= d[j];
    }
    symmetrize(&(scaled * basis.transpose()))
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn eig_sym(a: &DMatrix<f64>) -> Result<SymEigen> {
    check_square(a)?;
    check_symmetric(a)?;
    let eig = symmetrize(a)
        .try_symmetric_eigen(f64::EPSILON, EIG_MAX_SWEEPS)
        .ok_or(MeansError::Eigensolver { iterations: EIG_MAX_SWEEPS })?;
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let basis = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(SymEigen { values, basis })
}

/// `Q diag(f(λ)) Qᵀ` over the cached spectrum of `a`.
pub fn matrix_fn(a: &SpdMatrix, f: impl Fn(f64) -> f64) -> Result<DMatrix<f64>> {
    spectral_fn(&a.eigen, f)
}

fn spectral_fn(eigen: &SymEigen, f: impl Fn(f64) -> f64) -> Result<DMatrix<f64>> {
    let mut mapped = Vec::with_capacity(eigen.values.len());
    for &lambda in eigen.values.iter() {
        let v = f(lambda);
        if !v.is_finite() {
            return Err(MeansError::domain(format!(
                "function is undefined at eigenvalue {lambda:e} (value {v})"
            )));
        }
        mapped.push(v);
    }
    Ok(apply_spectrum(&eigen.basis, mapped.into_iter()))
}

/// Matrix function of a general symmetric matrix (eigendecomposed on the fly).
pub fn sym_fn(a: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> Result<DMatrix<f64>> {
    spectral_fn(&eig_sym(a)?, f)
}

/// Builds an SPD matrix from a strictly positive spectral map without re-validating symmetry.
fn spd_fn(a: &SpdMatrix, f: impl Fn(f64) -> f64) -> Result<SpdMatrix> {
    SpdMatrix::new(matrix_fn(a, f)?)
}

pub fn mat_pow(a: &SpdMatrix, r: f64) -> Result<SpdMatrix> {
    if r == 1.0 {
        return Ok(a.clone());
    }
    spd_fn(a, |x| x.powf(r))
}

pub fn mat_log(a: &SpdMatrix) -> Result<DMatrix<f64>> {
    matrix_fn(a, f64::ln)
}

pub fn mat_exp(h: &DMatrix<f64>) -> Result<SpdMatrix> {
    SpdMatrix::new(sym_fn(h, f64::exp)?)
}

pub fn mat_inv(a: &SpdMatrix) -> Result<SpdMatrix> {
    spd_fn(a, f64::recip)
}

/// `Sᵀ A S` for invertible `S`.
pub fn congruence(s: &DMatrix<f64>, a: &SpdMatrix) -> Result<SpdMatrix> {
    if s.nrows() != a.dim() {
        return Err(MeansError::DimensionMismatch { expected: a.dim(), found: s.nrows() });
    }
    if s.nrows() != s.ncols() {
        return Err(MeansError::validation("congruence factor must be square"));
    }
    let sv = s.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > f64::EPSILON * smax * s.nrows() as f64) {
        return Err(MeansError::validation(format!(
            "congruence factor is singular: condition number {:e}",
            smax / smin
        )));
    }
    SpdMatrix::new(symmetrize(&(s.transpose() * a.entries() * s)))
}

/// Condition number `σ_max / σ_min` of a square matrix.
pub fn condition_number(s: &DMatrix<f64>) -> f64 {
    let sv = s.singular_values();
    sv.max() / sv.min()
}

/// Outcome of a Loewner-order comparison `A ≤ B`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoewnerOutcome {
    pub holds: bool,
    /// Smallest eigenvalue of `B − A`.
    pub margin: f64,
    /// `max(1, ‖A‖, ‖B‖)`, the unit the tolerance is measured in.
    pub scale: f64,
}

pub fn loewner_leq(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> Result<LoewnerOutcome> {
    if a.shape() != b.shape() {
        return Err(MeansError::DimensionMismatch { expected: a.nrows(), found: b.nrows() });
    }
    let diff = symmetrize(&(b - a));
    let margin = eig_sym(&diff)?.values[0];
    let scale = 1f64.max(op_norm(a)).max(op_norm(b));
    Ok(LoewnerOutcome { holds: margin >= -tol * scale, margin, scale })
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn op_norm(a: &DMatrix<f64>) -> f64 {
    symmetrize(a).symmetric_eigenvalues().amax()
}

pub fn spectral_bounds(a: &SpdMatrix) -> Result<SpectralBounds> {
    SpectralBounds::new(a.min_eigenvalue(), a.max_eigenvalue())
}

/// Haar-distributed orthogonal matrix from the QR factorization of a seeded Gaussian matrix.
pub fn random_orthogonal(dim: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    random_isometry_columns(dim, dim, rng)
}

/// First `k` columns of a Haar orthogonal `dim × dim` matrix.
pub fn random_isometry_columns(dim: usize, k: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Draws a spectrum in `[m, M]`, forcing both endpoints when `dim ≥ 2`.
pub fn random_spectrum(dim: usize, bounds: SpectralBounds, rng: &mut impl Rng) -> Vec<f64> {
    let draw = |rng: &mut dyn rand::RngCore| {
        if bounds.m == bounds.big_m {
            bounds.m
        } else {
            rng.random_range(bounds.m..=bounds.big_m)
        }
    };
    let mut values: Vec<f64> = (0..dim).map(|_| draw(rng)).collect();
    if dim >= 2 {
        values[0] = bounds.m;
        values[dim - 1] = bounds.big_m;
    }
    values
}

/// Deterministic random SPD matrix with spectrum in `bounds` (tight when `dim ≥ 2`).
pub fn random_spd(dim: usize, bounds: SpectralBounds, seed: u64) -> Result<SpdMatrix> {
    if dim == 0 {
        return Err(MeansError::validation("dimension must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_spd_with(dim, bounds, &mut rng)
}

pub fn random_spd_with(dim: usize, bounds: SpectralBounds, rng: &mut impl Rng) -> Result<SpdMatrix> {
    let spectrum = random_spectrum(dim, bounds, rng);
    let q = random_orthogonal(dim, rng);
    SpdMatrix::new(apply_spectrum(&q, spectrum.into_iter()))
}
