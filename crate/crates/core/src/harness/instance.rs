//! Seeded random instances: operators with prescribed spectral bounds, weights,
//! a deformed mean and a unital positive map.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MeansError, Result};
use crate::means2::MeanTwo;
use crate::means_n::{BaseMean, NMeanSpec, Weights};
use crate::posmaps::{random_compression, random_coordinate_compression, random_pinching, PositiveMap};
use crate::spd::{random_spd_with, random_spectrum, SpdMatrix, SpectralBounds};

/// Ranges the generator draws from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    /// Inclusive dimension range.
    pub dims: (usize, usize),
    /// Inclusive range for the number of operators.
    pub n: (usize, usize),
    pub bounds: Vec<SpectralBounds>,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        InstanceConfig {
            dims: (2, 6),
            n: (2, 5),
            bounds: vec![
                SpectralBounds { m: 1.0, big_m: 2.0 },
                SpectralBounds { m: 0.5, big_m: 4.0 },
                SpectralBounds { m: 1.0, big_m: 16.0 },
            ],
        }
    }
}

impl InstanceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dims.0 < 1 || self.dims.0 > self.dims.1 {
            return Err(MeansError::validation(format!("invalid dimension range {:?}", self.dims)));
        }
        if self.n.0 < 1 || self.n.0 > self.n.1 {
            return Err(MeansError::validation(format!("invalid operator-count range {:?}", self.n)));
        }
        if self.bounds.is_empty() {
            return Err(MeansError::validation("at least one spectral bound pair is required"));
        }
        for b in &self.bounds {
            if !(b.m < b.big_m) {
                return Err(MeansError::validation(format!("bounds need m < M, got ({}, {})", b.m, b.big_m)));
            }
        }
        Ok(())
    }
}

/// One randomized test instance. `bounds` are the prescribed `m`, `M` with
/// `mI ≤ Aⱼ ≤ MI`; each operator attains both ends when `dim ≥ 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub seed: u64,
    pub dim: usize,
    pub n: usize,
    pub bounds: SpectralBounds,
    pub weights: Weights,
    pub base: BaseMean,
    pub sigma: MeanTwo,
    pub map: PositiveMap,
    /// All operators are diagonal; the map preserves diagonals.
    pub commuting: bool,
    pub matrices: Vec<SpdMatrix>,
}

/// Smallest `α₀` drawn for the deforming mean; the solver contracts at about `1 − α₀`.
pub const MIN_SIGMA_ALPHA: f64 = 0.25;

fn draw_common(seed: u64, cfg: &InstanceConfig) -> Result<(ChaCha8Rng, usize, usize, SpectralBounds, Weights, BaseMean, MeanTwo)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(cfg.dims.0..=cfg.dims.1);
    let n = rng.random_range(cfg.n.0..=cfg.n.1);
    let bounds = cfg.bounds[rng.random_range(0..cfg.bounds.len())];
    let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let weights = Weights::normalized(&scores)?;
    let base = if rng.random_bool(0.5) { BaseMean::Arithmetic } else { BaseMean::Harmonic };
    let alpha = rng.random_range(MIN_SIGMA_ALPHA..=1.0);
    let sigma = match rng.random_range(0..3) {
        0 => MeanTwo::geometric(alpha)?,
        1 => MeanTwo::arithmetic(alpha)?,
        _ => MeanTwo::harmonic(alpha)?,
    };
    Ok((rng, dim, n, bounds, weights, base, sigma))
}

impl Instance {
    /// Dense instance: Haar-rotated operators and a random compression or pinching.
    pub fn generate(seed: u64, cfg: &InstanceConfig) -> Result<Instance> {
        let (mut rng, dim, n, bounds, weights, base, sigma) = draw_common(seed, cfg)?;
        let matrices = (0..n).map(|_| random_spd_with(dim, bounds, &mut rng)).collect::<Result<Vec<_>>>()?;
        let map = if dim < 2 {
            PositiveMap::Identity
        } else if rng.random_bool(0.5) {
            let k = rng.random_range(1..dim);
            random_compression(dim, k, &mut rng)?
        } else {
            random_pinching(dim, &mut rng)?
        };
        Ok(Instance { seed, dim, n, bounds, weights, base, sigma, map, commuting: false, matrices })
    }

    /// Commuting instance: diagonal operators and a diagonal-preserving map.
    pub fn generate_commuting(seed: u64, cfg: &InstanceConfig) -> Result<Instance> {
        let (mut rng, dim, n, bounds, weights, base, sigma) = draw_common(seed, cfg)?;
        let matrices = (0..n)
            .map(|_| {
                let mut spectrum = random_spectrum(dim, bounds, &mut rng);
                spectrum.shuffle(&mut rng);
                SpdMatrix::diagonal(&spectrum)
            })
            .collect::<Result<Vec<_>>>()?;
        let map = if dim < 2 {
            PositiveMap::Identity
        } else {
            match rng.random_range(0..3) {
                0 => random_pinching(dim, &mut rng)?,
                _ => {
                    let k = rng.random_range(1..dim);
                    random_coordinate_compression(dim, k, &mut rng)?
                }
            }
        };
        Ok(Instance { seed, dim, n, bounds, weights, base, sigma, map, commuting: true, matrices })
    }

    pub fn spec(&self) -> Result<NMeanSpec> {
        NMeanSpec::deformed(self.base, self.weights.clone(), self.sigma.clone())
    }

    /// Diagonals of the operators of a commuting instance.
    pub fn diagonals(&self) -> Result<Vec<Vec<f64>>> {
        if !self.commuting {
            return Err(MeansError::validation("instance is not commuting"));
        }
        Ok(self.matrices.iter().map(|a| a.entries().diagonal().iter().copied().collect()).collect())
    }

    /// Structural consistency, used when an instance is loaded from JSON.
    pub fn validate(&self) -> Result<()> {
        if self.matrices.len() != self.n || self.weights.len() != self.n {
            return Err(MeansError::validation("instance: `n` disagrees with matrices or weights"));
        }
        if let Some(bad) = self.matrices.iter().find(|a| a.dim() != self.dim) {
            return Err(MeansError::DimensionMismatch { expected: self.dim, found: bad.dim() });
        }
        if let Some(d) = self.map.input_dim() {
            if d != self.dim {
                return Err(MeansError::DimensionMismatch { expected: self.dim, found: d });
            }
        }
        let slack = 1e-9 * self.bounds.big_m;
        for (j, a) in self.matrices.iter().enumerate() {
            if a.min_eigenvalue() < self.bounds.m - slack || a.max_eigenvalue() > self.bounds.big_m + slack {
                return Err(MeansError::validation(format!(
                    "instance: matrix {j} has spectrum [{}, {}] outside the stated bounds [{}, {}]",
                    a.min_eigenvalue(),
                    a.max_eigenvalue(),
                    self.bounds.m,
                    self.bounds.big_m
                )));
            }
        }
        if self.commuting {
            if !self.map.preserves_diagonal() {
                return Err(MeansError::validation("instance: commuting instance needs a diagonal-preserving map"));
            }
            for a in &self.matrices {
                let e = a.entries();
                if (0..self.dim).any(|i| (0..self.dim).any(|j| i != j && e[(i, j)] != 0.0)) {
                    return Err(MeansError::validation("instance: commuting instance has a non-diagonal matrix"));
                }
            }
        }
        self.spec().map(|_| ())
    }
}
