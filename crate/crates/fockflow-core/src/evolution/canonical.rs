//! Poissonian, Brownian and Lebesgue parts of a generator table.

use super::{hamiltonian_to_scattering, EvolutionError};
use crate::ito_calculus::{Slot, TriangularMatrix};
use crate::linalg::{c64, spectral_norm, Mat, I};

/// `𝐋 = 𝐋₁ + 𝐋₂ + 𝐋₃` for `𝐋 = exp(−i𝐇) − 𝐈`, with the coupling split
/// `H₊⁰ = H₀⁰F − iE`, `H₀⁻ = F*H₀⁰ + iE*`, `H₀⁰E = 0`.
#[derive(Clone, Debug)]
pub struct CanonicalDecomposition {
    /// `(F*L₀⁰, F*L₀⁰F; L₀⁰, L₀⁰F)`.
    pub poisson: TriangularMatrix,
    /// `(E*, −E*E/2; 0, −E)`.
    pub brownian: TriangularMatrix,
    /// `(0, −iH; 0, 0)`.
    pub lebesgue: TriangularMatrix,
    pub e: Mat,
    pub f: Mat,
    /// `H = H₊⁻ − F*H₀⁰F`, Hermitian for pseudo-Hermitian `𝐇`.
    pub h: Mat,
}

impl CanonicalDecomposition {
    pub fn sum(&self) -> TriangularMatrix {
        self.poisson.add(&self.brownian).add(&self.lebesgue)
    }

    pub fn parts(&self) -> [&TriangularMatrix; 3] {
        [&self.poisson, &self.brownian, &self.lebesgue]
    }
}

// Eigenvalues below this (relative) are the kernel of H₀⁰; those between the
// two thresholds leave the split numerically undetermined.
const KERNEL_TOL: f64 = 1e-12;
const RESOLVE_TOL: f64 = 1e-8;

/// Decompose the scattering generator of a pseudo-Hermitian Hamiltonian.
///
/// `F = (H₀⁰)⁺H₊⁰` through the pseudo-inverse and `E = iQH₊⁰` with `Q` the
/// projector onto the kernel of `H₀⁰`, so `F*E = 0`. A singular `H₀⁰` is
/// fine (pure Brownian input has `H₀⁰ = 0`); eigenvalues that are small but
/// not negligible are rejected.
pub fn canonical_decomposition(hm: &TriangularMatrix) -> Result<CanonicalDecomposition, EvolutionError> {
    let (n, d) = (hm.n, hm.d);
    let h00 = hm.block(Slot::Zero, Slot::Zero);
    let hp0 = hm.block(Slot::Zero, Slot::Plus);
    let hpm = hm.block(Slot::Minus, Slot::Plus);
    if spectral_norm(&(&h00 - h00.adjoint())) > 1e-12 * spectral_norm(&h00).max(1.0) {
        return Err(EvolutionError::Domain("H₀⁰ must be Hermitian".into()));
    }
    let scale = spectral_norm(&h00).max(1.0);
    let eig = h00.clone().symmetric_eigen();
    let nd = n * d;
    let mut pinv = Mat::zeros(nd, nd);
    let mut q = Mat::zeros(nd, nd);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let outer = v * v.adjoint();
        if lam.abs() <= KERNEL_TOL * scale {
            q += outer;
        } else if lam.abs() < RESOLVE_TOL * scale {
            return Err(EvolutionError::Split(lam.abs()));
        } else {
            pinv += outer * c64(1.0 / lam, 0.0);
        }
    }
    let f = &pinv * &hp0;
    let e = &q * &hp0 * I;
    let h = &hpm - f.adjoint() * &h00 * &f;
    let l00 = hamiltonian_to_scattering(hm).block(Slot::Zero, Slot::Zero) - Mat::identity(nd, nd);
    let zero_n = Mat::zeros(n, n);
    let fs = f.adjoint();
    let poisson = TriangularMatrix::from_blocks(&zero_n, &l00, &(&l00 * &f), &(&fs * &l00), &(&fs * &l00 * &f), d);
    let es = e.adjoint();
    let brownian = TriangularMatrix::from_blocks(&zero_n, &Mat::zeros(nd, nd), &(-&e), &es, &(&es * &e * c64(-0.5, 0.0)), d);
    let lebesgue = TriangularMatrix::from_blocks(&zero_n, &Mat::zeros(nd, nd), &Mat::zeros(nd, n), &Mat::zeros(n, nd), &(&h * (-I)), d);
    Ok(CanonicalDecomposition { poisson, brownian, lebesgue, e, f, h })
}
