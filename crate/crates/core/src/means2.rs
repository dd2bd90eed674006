//! Two-variable Kubo–Ando operator means, each determined by its representing
//! function `f` through `A σ B = A^{1/2} f(A^{-1/2} B A^{-1/2}) A^{1/2}`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{MeansError, Result};
use crate::spd::{matrix_fn, symmetrize, SpdMatrix};

pub type ReprFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Step of the central difference used to estimate `f'(1)` for custom means.
const DERIVATIVE_STEP: f64 = 1e-6;

/// A caller-supplied mean. Operator monotonicity of `f` is not machine-checked;
/// `operator_monotone` records whether the caller vouches for it.
#[derive(Clone)]
pub struct CustomMean {
    name: String,
    f: ReprFn,
    alpha0: f64,
    operator_monotone: bool,
}

impl CustomMean {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        operator_monotone: bool,
    ) -> Result<Self> {
        let f: ReprFn = Arc::new(f);
        let name = name.into();
        let at_one = f(1.0);
        if (at_one - 1.0).abs() > 1e-12 {
            return Err(MeansError::validation(format!(
                "representing function of `{name}` must satisfy f(1) = 1, got {at_one}"
            )));
        }
        let alpha0 = (f(1.0 + DERIVATIVE_STEP) - f(1.0 - DERIVATIVE_STEP)) / (2.0 * DERIVATIVE_STEP);
        Ok(CustomMean { name, f, alpha0, operator_monotone })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn operator_monotone(&self) -> bool {
        self.operator_monotone
    }
}

impl fmt::Debug for CustomMean {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomMean")
            .field("name", &self.name)
            .field("alpha0", &self.alpha0)
            .field("operator_monotone", &self.operator_monotone)
            .finish()
    }
}

/// A two-variable operator mean σ.
#[derive(Clone, Debug)]
pub enum MeanTwo {
    /// `♯_α`, `f(x) = x^α`.
    Geometric(f64),
    /// `∇_α`, `f(x) = 1 − α + αx`.
    Arithmetic(f64),
    /// `!_α`, `f(x) = (1 − α + α/x)^{-1}`.
    Harmonic(f64),
    /// `ℓ`, `A ℓ B = A`.
    LeftTrivial,
    Custom(CustomMean),
}

/// Custom means compare equal only when they share the same function object.
impl PartialEq for MeanTwo {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (MeanTwo::Geometric(a), MeanTwo::Geometric(b))
            | (MeanTwo::Arithmetic(a), MeanTwo::Arithmetic(b))
            | (MeanTwo::Harmonic(a), MeanTwo::Harmonic(b)) => a == b,
            (MeanTwo::LeftTrivial, MeanTwo::LeftTrivial) => true,
            (MeanTwo::Custom(a), MeanTwo::Custom(b)) => Arc::ptr_eq(&a.f, &b.f) && a.name == b.name,
            _ => false,
        }
    }
}

fn check_weight(alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(MeansError::validation(format!("mean weight alpha must lie in [0, 1], got {alpha}")));
    }
    Ok(alpha)
}

impl MeanTwo {
    pub fn geometric(alpha: f64) -> Result<Self> {
        check_weight(alpha).map(MeanTwo::Geometric)
    }

    pub fn arithmetic(alpha: f64) -> Result<Self> {
        check_weight(alpha).map(MeanTwo::Arithmetic)
    }

    pub fn harmonic(alpha: f64) -> Result<Self> {
        check_weight(alpha).map(MeanTwo::Harmonic)
    }

    /// Representing function `f_σ(x)`.
    pub fn repr(&self, x: f64) -> f64 {
        match self {
            MeanTwo::Geometric(a) => x.powf(*a),
            MeanTwo::Arithmetic(a) => 1.0 - a + a * x,
            MeanTwo::Harmonic(a) => 1.0 / (1.0 - a + a / x),
            MeanTwo::LeftTrivial => 1.0,
            MeanTwo::Custom(c) => (c.f)(x),
        }
    }

    /// `α₀ = f'(1)`.
    pub fn alpha0(&self) -> f64 {
        match self {
            MeanTwo::Geometric(a) | MeanTwo::Arithmetic(a) | MeanTwo::Harmonic(a) => *a,
            MeanTwo::LeftTrivial => 0.0,
            MeanTwo::Custom(c) => c.alpha0,
        }
    }

    pub fn is_left_trivial(&self) -> bool {
        matches!(self, MeanTwo::LeftTrivial)
    }

    /// Usable as the deforming mean of an n-variable mean.
    pub fn check_deformable(&self) -> Result<()> {
        if self.is_left_trivial() {
            return Err(MeansError::validation("the left trivial mean cannot deform an n-variable mean"));
        }
        let a0 = self.alpha0();
        if !(a0 > 0.0 && a0 <= 1.0 + 1e-9) {
            return Err(MeansError::validation(format!(
                "deforming mean needs f'(1) in (0, 1], got {a0}"
            )));
        }
        if let MeanTwo::Custom(c) = self {
            if !c.operator_monotone {
                return Err(MeansError::validation(format!(
                    "custom mean `{}` is not asserted operator monotone",
                    c.name
                )));
            }
        }
        Ok(())
    }

    /// The adjoint mean `A σ* B = (A⁻¹ σ B⁻¹)⁻¹`, i.e. `f*(x) = 1 / f(1/x)`.
    pub fn adjoint(&self) -> MeanTwo {
        match self {
            MeanTwo::Geometric(a) => MeanTwo::Geometric(*a),
            MeanTwo::Arithmetic(a) => MeanTwo::Harmonic(*a),
            MeanTwo::Harmonic(a) => MeanTwo::Arithmetic(*a),
            MeanTwo::LeftTrivial => MeanTwo::LeftTrivial,
            MeanTwo::Custom(c) => {
                let inner = c.f.clone();
                MeanTwo::Custom(CustomMean {
                    name: format!("{}*", c.name),
                    f: Arc::new(move |x| 1.0 / inner(1.0 / x)),
                    alpha0: c.alpha0,
                    operator_monotone: c.operator_monotone,
                })
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            MeanTwo::Geometric(a) => format!("geometric({a})"),
            MeanTwo::Arithmetic(a) => format!("arithmetic({a})"),
            MeanTwo::Harmonic(a) => format!("harmonic({a})"),
            MeanTwo::LeftTrivial => "left_trivial".to_string(),
            MeanTwo::Custom(c) => format!("custom({})", c.name),
        }
    }
}

pub fn adjoint2(spec: &MeanTwo) -> MeanTwo {
    spec.adjoint()
}

/// `A^{1/2}` and `A^{-1/2}` of a fixed left argument, reused across many right arguments.
#[derive(Clone, Debug)]
pub struct LeftRoots {
    pub base: SpdMatrix,
    sqrt: DMatrix<f64>,
    inv_sqrt: DMatrix<f64>,
    inv: DMatrix<f64>,
}

impl LeftRoots {
    pub fn new(a: &SpdMatrix) -> Result<Self> {
        Ok(LeftRoots {
            base: a.clone(),
            sqrt: matrix_fn(a, f64::sqrt)?,
            inv_sqrt: matrix_fn(a, |x| 1.0 / x.sqrt())?,
            inv: matrix_fn(a, f64::recip)?,
        })
    }

    pub fn sqrt(&self) -> &DMatrix<f64> {
        &self.sqrt
    }

    pub fn inv_sqrt(&self) -> &DMatrix<f64> {
        &self.inv_sqrt
    }

    /// `A^{-1/2} B A^{-1/2}`.
    pub fn whiten(&self, b: &SpdMatrix) -> Result<SpdMatrix> {
        SpdMatrix::new(symmetrize(&(&self.inv_sqrt * b.entries() * &self.inv_sqrt)))
    }

    /// `A^{1/2} Y A^{1/2}`.
    pub fn color(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        symmetrize(&(&self.sqrt * y * &self.sqrt))
    }

    /// `A σ B`.
    pub fn mean(&self, spec: &MeanTwo, b: &SpdMatrix) -> Result<SpdMatrix> {
        check_same_dim(&self.base, b)?;
        match spec {
            MeanTwo::LeftTrivial => Ok(self.base.clone()),
            MeanTwo::Arithmetic(a) => {
                SpdMatrix::new(self.base.entries() * (1.0 - a) + b.entries() * *a)
            }
            MeanTwo::Harmonic(a) => {
                let sum = SpdMatrix::new(&self.inv * (1.0 - a) + b.inv()?.entries() * *a)?;
                sum.inv()
            }
            MeanTwo::Geometric(a) if *a == 0.0 => Ok(self.base.clone()),
            MeanTwo::Geometric(a) if *a == 1.0 => Ok(b.clone()),
            _ => {
                let w = self.whiten(b)?;
                let fw = matrix_fn(&w, |x| spec.repr(x))?;
                SpdMatrix::new(self.color(&fw))
            }
        }
    }
}

fn check_same_dim(a: &SpdMatrix, b: &SpdMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(MeansError::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    Ok(())
}

/// `A σ B`.
pub fn mean2(spec: &MeanTwo, a: &SpdMatrix, b: &SpdMatrix) -> Result<SpdMatrix> {
    check_same_dim(a, b)?;
    match spec {
        MeanTwo::LeftTrivial => Ok(a.clone()),
        MeanTwo::Arithmetic(w) => SpdMatrix::new(a.entries() * (1.0 - w) + b.entries() * *w),
        _ => LeftRoots::new(a)?.mean(spec, b),
    }
}

/// Power-monotone-increasing test on a grid: `f(x^r) ≥ f(x)^r` for every grid point.
pub fn is_pmi(spec: &MeanTwo, x_grid: &[f64], r_grid: &[f64]) -> bool {
    x_grid.iter().all(|&x| {
        r_grid.iter().all(|&r| {
            let lhs = spec.repr(x.powf(r));
            let rhs = spec.repr(x).powf(r);
            lhs - rhs >= -1e-12 * rhs.abs().max(1.0)
        })
    })
}

/// JSON form of a built-in mean, e.g. `{"kind":"geometric","alpha":0.5}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeanTwoJson {
    Geometric { alpha: f64 },
    Arithmetic { alpha: f64 },
    Harmonic { alpha: f64 },
    LeftTrivial {},
}

impl TryFrom<MeanTwoJson> for MeanTwo {
    type Error = MeansError;

    fn try_from(value: MeanTwoJson) -> Result<Self> {
        match value {
            MeanTwoJson::Geometric { alpha } => MeanTwo::geometric(alpha),
            MeanTwoJson::Arithmetic { alpha } => MeanTwo::arithmetic(alpha),
            MeanTwoJson::Harmonic { alpha } => MeanTwo::harmonic(alpha),
            MeanTwoJson::LeftTrivial {} => Ok(MeanTwo::LeftTrivial),
        }
    }
}

impl TryFrom<&MeanTwo> for MeanTwoJson {
    type Error = MeansError;

    fn try_from(value: &MeanTwo) -> Result<Self> {
        Ok(match value {
            MeanTwo::Geometric(alpha) => MeanTwoJson::Geometric { alpha: *alpha },
            MeanTwo::Arithmetic(alpha) => MeanTwoJson::Arithmetic { alpha: *alpha },
            MeanTwo::Harmonic(alpha) => MeanTwoJson::Harmonic { alpha: *alpha },
            MeanTwo::LeftTrivial => MeanTwoJson::LeftTrivial {},
            MeanTwo::Custom(c) => {
                return Err(MeansError::validation(format!(
                    "custom mean `{}` is not serializable",
                    c.name
                )))
            }
        })
    }
}

impl Serialize for MeanTwo {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MeanTwoJson::try_from(self)
            .map_err(serde::ser::Error::custom)?
            .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MeanTwo {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let json = MeanTwoJson::deserialize(deserializer)?;
        MeanTwo::try_from(json).map_err(serde::de::Error::custom)
    }
}
