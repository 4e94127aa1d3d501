//! Spectral functional calculus for the Neumann Laplacian on bounded model
//! domains: eigenbases, Littlewood-Paley blocks, Besov and amalgam norms, and
//! numerical checks of the associated operator estimates.

// NaN-rejecting comparisons are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod domains;
pub mod error;
pub mod littlewood_paley;
pub mod norms;
pub mod spectral;
pub mod verify;

pub use domains::{Domain, EigenBasis, Grid};
pub use error::{Error, Result};
pub use littlewood_paley::{make_partition, PartitionOfUnity, PartitionVariant};
pub use spectral::{GridFunction, OperatorKernel, SpectralCoeffs, SymbolFn};
