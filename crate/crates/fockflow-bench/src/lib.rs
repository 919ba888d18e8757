//! Shared fixtures for the benchmarks.

use fockflow_core::evolution::{hamiltonian_to_scattering, random_pseudo_hermitian, GeneratorField};
use fockflow_core::kernel_algebra::random_kernel;
use fockflow_core::sample;
use fockflow_core::{Grid, Kernel};

pub fn grid(m: usize, d: usize, n: usize) -> Grid {
    Grid::uniform(m, 1.0, d, n).expect("valid grid")
}

pub fn kernel(g: &Grid, seed: u64) -> Kernel {
    random_kernel(g, &mut sample::rng(seed), 0.5)
}

/// Constant field `exp(−iH)` for a random pseudo-Hermitian `H`.
pub fn unitary_field(g: &Grid, seed: u64) -> GeneratorField {
    let h = random_pseudo_hermitian(&mut sample::rng(seed), g.n(), g.d(), 1.0);
    GeneratorField::constant(g, &hamiltonian_to_scattering(&h)).expect("matching shapes")
}
