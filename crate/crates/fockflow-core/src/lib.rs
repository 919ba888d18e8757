//! Nonadapted quantum stochastic calculus on a finite grid.

pub mod chain_space;
pub mod evolution;
pub mod flows;
pub mod harness;
pub mod fock_rep;
pub mod ito_calculus;
pub mod kernel_algebra;
pub mod linalg;
pub mod pseudo_fock;
pub mod sample;

pub use chain_space::{Chain, FockVector, Grid, ScaleParams};
pub use evolution::{GeneratorField, HamiltonianField, ScenarioConfig};
pub use fock_rep::{iota, FockOperator};
pub use ito_calculus::TriangularMatrix;
pub use kernel_algebra::{Kernel, Table};
pub use linalg::{Mat, C64};
