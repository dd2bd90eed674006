//! Unital positive linear maps: identity, compressions `X ↦ VᵀXV`, pinchings,
//! the normalized trace, and the direct-sum average `Ψ_{Φ,ω}`.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MeansError, Result};
use crate::means_n::Weights;
use crate::spd::{random_isometry_columns, symmetrize, SpdMatrix};

/// Isometry defect allowed in `VᵀV = I`.
pub const ISOMETRY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PositiveMapJson", into = "PositiveMapJson")]
pub enum PositiveMap {
    Identity,
    /// `X ↦ VᵀXV` for a `dim × k` isometry `V`.
    Compression { v: DMatrix<f64> },
    /// Keeps the diagonal blocks indexed by a partition of `0..dim`, zeroes the rest.
    Pinching { blocks: Vec<Vec<usize>> },
    /// `X ↦ [tr X / dim]`.
    NormalizedTrace,
}

impl PositiveMap {
    pub fn compression(v: DMatrix<f64>) -> Result<Self> {
        let (dim, k) = v.shape();
        if k == 0 || k > dim {
            return Err(MeansError::validation(format!(
                "compression V must be dim x k with 1 <= k <= dim, got {dim}x{k}"
            )));
        }
        let defect = (v.transpose() * &v - DMatrix::identity(k, k)).amax();
        if !(defect <= ISOMETRY_TOL) {
            return Err(MeansError::validation(format!(
                "compression V is not an isometry: max |VᵀV - I| = {defect:e}"
            )));
        }
        Ok(PositiveMap::Compression { v })
    }

    /// Compression onto the coordinates `keep` (in the given order).
    pub fn coordinate_compression(dim: usize, keep: &[usize]) -> Result<Self> {
        if let Some(&bad) = keep.iter().find(|&&i| i >= dim) {
            return Err(MeansError::validation(format!("index {bad} out of range for dim {dim}")));
        }
        let mut v = DMatrix::zeros(dim, keep.len());
        for (col, &i) in keep.iter().enumerate() {
            v[(i, col)] = 1.0;
        }
        Self::compression(v)
    }

    pub fn pinching(dim: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; dim];
        for block in &blocks {
            if block.is_empty() {
                return Err(MeansError::validation("pinching blocks must be non-empty"));
            }
            for &i in block {
                if i >= dim {
                    return Err(MeansError::validation(format!("pinching index {i} out of range for dim {dim}")));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(MeansError::validation(format!("pinching index {i} appears twice")));
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(MeansError::validation(format!("pinching blocks miss index {i}")));
        }
        Ok(PositiveMap::Pinching { blocks })
    }

    /// Required input dimension, if the map fixes one.
    pub fn input_dim(&self) -> Option<usize> {
        match self {
            PositiveMap::Compression { v } => Some(v.nrows()),
            PositiveMap::Pinching { blocks } => Some(blocks.iter().map(Vec::len).sum()),
            _ => None,
        }
    }

    pub fn output_dim(&self, input: usize) -> usize {
        match self {
            PositiveMap::Compression { v } => v.ncols(),
            PositiveMap::NormalizedTrace => 1,
            _ => input,
        }
    }

    pub fn label(&self) -> String {
        match self {
            PositiveMap::Identity => "identity".into(),
            PositiveMap::Compression { v } => format!("compression({}->{})", v.nrows(), v.ncols()),
            PositiveMap::Pinching { blocks } => format!("pinching({} blocks)", blocks.len()),
            PositiveMap::NormalizedTrace => "normalized_trace".into(),
        }
    }

    /// True when the map sends diagonal matrices to diagonal matrices.
    pub fn preserves_diagonal(&self) -> bool {
        match self {
            PositiveMap::Compression { v } => v.column_iter().all(|c| c.iter().filter(|x| **x != 0.0).count() == 1),
            _ => true,
        }
    }
}

/// `Φ(A)` for a symmetric matrix `A`.
pub fn apply_map(phi: &PositiveMap, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(MeansError::validation("apply_map needs a square matrix"));
    }
    if let Some(expected) = phi.input_dim() {
        if expected != n {
            return Err(MeansError::DimensionMismatch { expected, found: n });
        }
    }
    Ok(match phi {
        PositiveMap::Identity => a.clone(),
        PositiveMap::Compression { v } => symmetrize(&(v.transpose() * a * v)),
        PositiveMap::Pinching { blocks } => {
            let mut out = DMatrix::zeros(n, n);
            for block in blocks {
                for &i in block {
                    for &j in block {
                        out[(i, j)] = a[(i, j)];
                    }
                }
            }
            out
        }
        PositiveMap::NormalizedTrace => DMatrix::from_element(1, 1, a.trace() / n as f64),
    })
}

pub fn apply_map_spd(phi: &PositiveMap, a: &SpdMatrix) -> Result<SpdMatrix> {
    SpdMatrix::new(apply_map(phi, a.entries())?)
}

/// Image of a diagonal matrix, given and returned as its diagonal.
pub fn apply_map_diagonal(phi: &PositiveMap, d: &[f64]) -> Result<Vec<f64>> {
    if !phi.preserves_diagonal() {
        return Err(MeansError::validation(format!("{} does not preserve diagonal matrices", phi.label())));
    }
    if let Some(expected) = phi.input_dim() {
        if expected != d.len() {
            return Err(MeansError::DimensionMismatch { expected, found: d.len() });
        }
    }
    Ok(match phi {
        PositiveMap::Identity | PositiveMap::Pinching { .. } => d.to_vec(),
        PositiveMap::Compression { v } => v
            .column_iter()
            .map(|c| {
                let i = c.iter().position(|x| *x != 0.0).expect("one nonzero per column");
                c[i] * c[i] * d[i]
            })
            .collect(),
        PositiveMap::NormalizedTrace => vec![d.iter().sum::<f64>() / d.len() as f64],
    })
}

/// `Ψ_{Φ,ω}(A₁ ⊕ … ⊕ Aₙ) = ∑ ωⱼ Φ(Aⱼ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiMap {
    pub phi: PositiveMap,
    pub weights: Weights,
}

pub fn apply_psi(psi: &PsiMap, mats: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    if mats.len() != psi.weights.len() {
        return Err(MeansError::validation(format!(
            "{} blocks but {} weights",
            mats.len(),
            psi.weights.len()
        )));
    }
    let mut acc: Option<DMatrix<f64>> = None;
    for (w, a) in psi.weights.as_slice().iter().zip(mats) {
        let image = apply_map(&psi.phi, a)? * *w;
        match acc.as_mut() {
            None => acc = Some(image),
            Some(s) => {
                if s.shape() != image.shape() {
                    return Err(MeansError::DimensionMismatch { expected: s.nrows(), found: image.nrows() });
                }
                *s += image;
            }
        }
    }
    Ok(acc.expect("weights are non-empty"))
}

/// Random compression onto `k < dim` orthonormal directions.
pub fn random_compression(dim: usize, k: usize, rng: &mut impl Rng) -> Result<PositiveMap> {
    if k == 0 || k >= dim {
        return Err(MeansError::validation(format!("random compression needs 1 <= k < dim, got k={k}, dim={dim}")));
    }
    PositiveMap::compression(random_isometry_columns(dim, k, rng))
}

/// Random partition of `0..dim` into at least two blocks (one block when `dim = 1`).
pub fn random_pinching(dim: usize, rng: &mut impl Rng) -> Result<PositiveMap> {
    let mut idx: Vec<usize> = (0..dim).collect();
    idx.shuffle(rng);
    if dim < 2 {
        return PositiveMap::pinching(dim, vec![idx]);
    }
    let nblocks = rng.random_range(2..=dim);
    let mut cuts: Vec<usize> = (1..dim).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<usize> = cuts.into_iter().take(nblocks - 1).collect();
    cuts.sort_unstable();
    let mut blocks = Vec::with_capacity(nblocks);
    let mut start = 0;
    for c in cuts.into_iter().chain(std::iter::once(dim)) {
        let mut block = idx[start..c].to_vec();
        block.sort_unstable();
        blocks.push(block);
        start = c;
    }
    PositiveMap::pinching(dim, blocks)
}

/// Random compression onto `k < dim` coordinates.
pub fn random_coordinate_compression(dim: usize, k: usize, rng: &mut impl Rng) -> Result<PositiveMap> {
    if k == 0 || k >= dim {
        return Err(MeansError::validation(format!("needs 1 <= k < dim, got k={k}, dim={dim}")));
    }
    let mut idx: Vec<usize> = (0..dim).collect();
    idx.shuffle(rng);
    idx.truncate(k);
    idx.sort_unstable();
    PositiveMap::coordinate_compression(dim, &idx)
}

/// Wire form, e.g. `{"kind":"compression","V":[[...], ...]}` with `V` given row by row.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PositiveMapJson {
    Identity {},
    Compression {
        #[serde(rename = "V")]
        v: Vec<Vec<f64>>,
    },
    Pinching {
        blocks: Vec<Vec<usize>>,
    },
    NormalizedTrace {},
}

impl TryFrom<PositiveMapJson> for PositiveMap {
    type Error = MeansError;

    fn try_from(value: PositiveMapJson) -> Result<Self> {
        match value {
            PositiveMapJson::Identity {} => Ok(PositiveMap::Identity),
            PositiveMapJson::NormalizedTrace {} => Ok(PositiveMap::NormalizedTrace),
            PositiveMapJson::Pinching { blocks } => {
                let dim = blocks.iter().map(Vec::len).sum();
                PositiveMap::pinching(dim, blocks)
            }
            PositiveMapJson::Compression { v } => {
                let rows = v.len();
                let cols = v.first().map_or(0, Vec::len);
                if rows == 0 || v.iter().any(|r| r.len() != cols) {
                    return Err(MeansError::validation("compression V must be a non-empty rectangular array"));
                }
                PositiveMap::compression(DMatrix::from_fn(rows, cols, |i, j| v[i][j]))
            }
        }
    }
}

impl From<PositiveMap> for PositiveMapJson {
    fn from(value: PositiveMap) -> Self {
        match value {
            PositiveMap::Identity => PositiveMapJson::Identity {},
            PositiveMap::NormalizedTrace => PositiveMapJson::NormalizedTrace {},
            PositiveMap::Pinching { blocks } => PositiveMapJson::Pinching { blocks },
            PositiveMap::Compression { v } => PositiveMapJson::Compression {
                v: (0..v.nrows()).map(|i| v.row(i).iter().copied().collect()).collect(),
            },
        }
    }
}
