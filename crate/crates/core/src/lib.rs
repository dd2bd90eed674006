//! Operator means of positive-definite matrices: two-variable Kubo-Ando means,
//! deformed n-variable means, power, Karcher and Log-Euclidean means, the
//! Kantorovich and Specht constants, unital positive maps, and a randomized
//! harness for Ando-Hiai type inequalities.

pub mod constants;
pub mod error;
pub mod harness;
pub mod means2;
pub mod means_n;
pub mod posmaps;
pub mod scalar;
pub mod spd;

pub use error::{MeansError, Result};
pub use means2::{mean2, MeanTwo};
pub use means_n::{BaseMean, NMeanSpec, SolveTrace, SolverConfig, Weights};
pub use posmaps::PositiveMap;
pub use spd::{SpdMatrix, SpectralBounds};
