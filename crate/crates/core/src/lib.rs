//! Black-Scholes pricing through pseudo-Hermitian operators.
//!
//! The Black-Scholes Hamiltonian in log-price is not symmetric, but it is
//! symmetric with respect to a positive diagonal metric. This crate builds
//! the discretized operators, their metrics, a real spectral decomposition,
//! the pricing kernel and the pseudo-supersymmetric factorization.

pub mod error;
pub mod hamiltonian;
pub mod lattice;
pub mod metric;
pub mod operator;
pub mod pricing;
pub mod special;
pub mod spectral;
pub mod susy;

pub use error::{Error, Result};
pub use hamiltonian::{MarketParams, PotentialSpec, SimilarityMap};
pub use lattice::{Lattice, QuadratureWeights};
pub use metric::MetricOperator;
pub use operator::{BandedMatrix, OperatorDump, TridiagonalOperator};
pub use pricing::{PayoffSpec, PriceSurface};
pub use spectral::{KernelMatrix, SpectralDecomposition};
pub use susy::{BlockOperator, Superpotential, SusyReport, SusySystem};
