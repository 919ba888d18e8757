//! Chronological-product solutions of the quantum stochastic evolution
//! equation, scattering matrices from Hamiltonians and their decomposition.

mod canonical;
mod chronological;
mod config;

use thiserror::Error;

use crate::chain_space::Grid;
use crate::ito_calculus::{Slot, TriangularMatrix};
use crate::linalg::{exp_phi, spectral_norm, Mat, C64, I};

pub use canonical::{canonical_decomposition, CanonicalDecomposition};
pub use chronological::*;
pub use config::{BlockSection, FlowSection, GeneratorKind, MapKind, SandwichTerm, ScenarioConfig, Weights};

#[derive(Debug, Error, PartialEq)]
pub enum EvolutionError {
    #[error("field has {got} point matrices for a grid of {expected} points")]
    Length { expected: usize, got: usize },
    #[error("point {0}: triangular matrix has the wrong system or noise dimension")]
    Shape(usize),
    #[error("point {0}: corner blocks must be {1}")]
    Corner(usize, &'static str),
    #[error("E/F split is not determined: H₀⁰ has an eigenvalue of modulus {0:e}, neither zero nor resolvable")]
    Split(f64),
    #[error("parameter out of range: {0}")]
    Domain(String),
    #[error("scenario config: {0}")]
    Config(String),
}

fn check_field(grid: &Grid, points: &[TriangularMatrix], corner: Option<&Mat>, what: &'static str) -> Result<(), EvolutionError> {
    if points.len() != grid.len() {
        return Err(EvolutionError::Length { expected: grid.len(), got: points.len() });
    }
    for (p, f) in points.iter().enumerate() {
        if (f.n, f.d) != (grid.n(), grid.d()) {
            return Err(EvolutionError::Shape(p));
        }
        let want = corner.cloned().unwrap_or_else(|| Mat::zeros(f.n, f.n));
        let bad = |s| spectral_norm(&(f.block(s, s) - &want)) > 1e-12;
        if bad(Slot::Minus) || bad(Slot::Plus) {
            return Err(EvolutionError::Corner(p, what));
        }
    }
    Ok(())
}

/// Per-point triangular matrices `𝐅(x)` with identity corners.
#[derive(Clone, Debug)]
pub struct GeneratorField {
    pub grid: Grid,
    points: Vec<TriangularMatrix>,
}

impl GeneratorField {
    pub fn new(grid: &Grid, points: Vec<TriangularMatrix>) -> Result<GeneratorField, EvolutionError> {
        check_field(grid, &points, Some(&Mat::identity(grid.n(), grid.n())), "identity")?;
        Ok(GeneratorField { grid: grid.clone(), points })
    }

    pub fn constant(grid: &Grid, f: &TriangularMatrix) -> Result<GeneratorField, EvolutionError> {
        GeneratorField::new(grid, vec![f.clone(); grid.len()])
    }

    pub fn identity(grid: &Grid) -> GeneratorField {
        GeneratorField { grid: grid.clone(), points: vec![TriangularMatrix::identity(grid.n(), grid.d()); grid.len()] }
    }

    /// `𝐈 + 𝐋(x)` from a generator table with zero corners.
    pub fn from_generator(grid: &Grid, l: Vec<TriangularMatrix>) -> Result<GeneratorField, EvolutionError> {
        check_field(grid, &l, None, "zero")?;
        let id = TriangularMatrix::identity(grid.n(), grid.d());
        Ok(GeneratorField { grid: grid.clone(), points: l.iter().map(|x| x.add(&id)).collect() })
    }

    pub fn point(&self, p: usize) -> &TriangularMatrix {
        &self.points[p]
    }

    pub fn points(&self) -> &[TriangularMatrix] {
        &self.points
    }

    /// `𝐋(x) = 𝐅(x) − 𝐈(x)`.
    pub fn generator(&self, p: usize) -> TriangularMatrix {
        self.points[p].sub(&TriangularMatrix::identity(self.grid.n(), self.grid.d()))
    }

    /// A time-dependent field sampled at the grid times.
    pub fn sampled<F: Fn(f64) -> TriangularMatrix>(grid: &Grid, f: F) -> Result<GeneratorField, EvolutionError> {
        GeneratorField::new(grid, grid.times().iter().map(|&t| f(t)).collect())
    }
}

/// Per-point Hamiltonian matrices `𝐇(x)` with zero corners.
#[derive(Clone, Debug)]
pub struct HamiltonianField {
    pub grid: Grid,
    points: Vec<TriangularMatrix>,
}

impl HamiltonianField {
    pub fn new(grid: &Grid, points: Vec<TriangularMatrix>) -> Result<HamiltonianField, EvolutionError> {
        check_field(grid, &points, None, "zero")?;
        Ok(HamiltonianField { grid: grid.clone(), points })
    }

    pub fn constant(grid: &Grid, h: &TriangularMatrix) -> Result<HamiltonianField, EvolutionError> {
        HamiltonianField::new(grid, vec![h.clone(); grid.len()])
    }

    pub fn point(&self, p: usize) -> &TriangularMatrix {
        &self.points[p]
    }

    /// Largest pseudo-Hermiticity defect `‖𝐇^⋆ − 𝐇‖` over the points.
    pub fn pseudo_hermitian_defect(&self) -> f64 {
        self.points.iter().map(|h| spectral_norm(&(h.star().m - &h.m))).fold(0.0, f64::max)
    }

    pub fn to_scattering(&self) -> GeneratorField {
        GeneratorField { grid: self.grid.clone(), points: self.points.iter().map(hamiltonian_to_scattering).collect() }
    }
}

/// `𝐅 = exp(−i𝐇)` for a zero-corner triangular `𝐇`, block by block:
/// `F₀⁰ = e^{−iH₀⁰}`, `F₊⁰ = φ₁(−iH₀⁰)(−i)H₊⁰`, `F₀⁻ = (−i)H₀⁻φ₁(−iH₀⁰)`,
/// `F₊⁻ = −H₀⁻φ₂(−iH₀⁰)H₊⁰ − iH₊⁻`.
pub fn hamiltonian_to_scattering(h: &TriangularMatrix) -> TriangularMatrix {
    let mi = -I;
    let h00 = h.block(Slot::Zero, Slot::Zero);
    let hp0 = h.block(Slot::Zero, Slot::Plus);
    let h0m = h.block(Slot::Minus, Slot::Zero);
    let hpm = h.block(Slot::Minus, Slot::Plus);
    let (e, p1, p2) = exp_phi(&(&h00 * mi));
    let fp0 = &p1 * &hp0 * mi;
    let f0m = &h0m * &p1 * mi;
    let fpm = -(&h0m * &p2 * &hp0) + &hpm * mi;
    TriangularMatrix::from_blocks(&Mat::identity(h.n, h.n), &e, &fp0, &f0m, &fpm, h.d)
}

/// `max_x ‖𝐒^⋆(x)𝐒(x) − 𝟏‖`.
pub fn pseudo_unitarity_check(s: &[TriangularMatrix]) -> f64 {
    s.iter()
        .map(|x| {
            let id = TriangularMatrix::identity(x.n, x.d);
            spectral_norm(&(x.star().mul(x).m - id.m))
        })
        .fold(0.0, f64::max)
}

/// Random pseudo-Hermitian `𝐇`: Hermitian `H₀⁰` and `H₊⁻`, `H₊⁰ = H₀⁻*`.
pub fn random_pseudo_hermitian(rng: &mut crate::sample::SeededRng, n: usize, d: usize, scale: f64) -> TriangularMatrix {
    use crate::sample;
    let h00 = sample::hermitian(rng, n * d, scale);
    let hpm = sample::hermitian(rng, n, scale);
    let h0m = sample::matrix(rng, n, n * d, scale);
    TriangularMatrix::from_blocks(&Mat::zeros(n, n), &h00, &h0m.adjoint(), &h0m, &hpm, d)
}

/// The Brownian scattering matrix of a coupling `e`: `F₀⁰ = I`,
/// `F₊⁰ = −ie`, `F₀⁻ = −ie*`, `F₊⁻ = −e*e/2`.
pub fn brownian_point(e: &Mat) -> TriangularMatrix {
    let mut h = TriangularMatrix::zeros(e.ncols(), e.nrows() / e.ncols());
    h.set(Slot::Zero, Slot::Plus, e);
    h.set(Slot::Minus, Slot::Zero, &e.adjoint());
    hamiltonian_to_scattering(&h)
}

/// `(1 − iwh)` products: the Lebesgue-type vacuum amplitude on a grid.
pub fn lebesgue_amplitude(grid: &Grid, h: C64, t: f64) -> C64 {
    grid.before(t).points().iter().map(|&p| crate::linalg::ONE - I * h * grid.weight(p)).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, expm, max_abs};
    use crate::sample;
    use proptest::prelude::*;

    fn s11(f00: C64, fp0: C64, f0m: C64, fpm: C64) -> TriangularMatrix {
        let m = |z| Mat::from_element(1, 1, z);
        TriangularMatrix::point(&m(f00), &m(fp0), &m(f0m), fpm)
    }

    // 3×3 oracle of S^⋆S for scalar blocks
    fn scalar_defect(f00: C64, fp0: C64, f0m: C64, fpm: C64) -> f64 {
        let s = Mat::from_row_slice(3, 3, &[c64(1.0, 0.0), f0m, fpm, C64::default(), f00, fp0, C64::default(), C64::default(), c64(1.0, 0.0)]);
        let g = Mat::from_row_slice(3, 3, &[C64::default(), C64::default(), c64(1.0, 0.0), C64::default(), c64(1.0, 0.0), C64::default(), c64(1.0, 0.0), C64::default(), C64::default()]);
        spectral_norm(&(&g * s.adjoint() * &g * &s - Mat::identity(3, 3)))
    }

    #[test]
    fn pseudo_unitarity_examples() {
        assert_eq!(pseudo_unitarity_check(&[TriangularMatrix::identity(2, 2)]), 0.0);
        let mi = c64(0.0, -1.0);
        let b = s11(c64(1.0, 0.0), mi, mi, c64(-0.5, 0.0));
        assert!(pseudo_unitarity_check(&[b]) < 1e-12);
        assert!(scalar_defect(c64(1.0, 0.0), mi, mi, c64(-0.5, 0.0)) < 1e-12);
        let bad = s11(c64(1.0, 0.0), mi, mi, C64::default());
        assert!((pseudo_unitarity_check(&[bad]) - 1.0).abs() < 1e-12);
        assert!((scalar_defect(c64(1.0, 0.0), mi, mi, C64::default()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scattering_examples() {
        let z = TriangularMatrix::zeros(2, 2);
        assert!(max_abs(&(hamiltonian_to_scattering(&z).m - TriangularMatrix::identity(2, 2).m)) < 1e-15);
        let mut p = TriangularMatrix::zeros(1, 1);
        p.set(Slot::Zero, Slot::Zero, &Mat::from_element(1, 1, c64(std::f64::consts::PI, 0.0)));
        let f = hamiltonian_to_scattering(&p);
        assert!((f.block(Slot::Zero, Slot::Zero)[(0, 0)] - c64(-1.0, 0.0)).norm() < 1e-14);
        let b = brownian_point(&Mat::from_element(1, 1, c64(1.0, 0.0)));
        let mi = c64(0.0, -1.0);
        assert!((b.block(Slot::Zero, Slot::Plus)[(0, 0)] - mi).norm() < 1e-15);
        assert!((b.block(Slot::Minus, Slot::Zero)[(0, 0)] - mi).norm() < 1e-15);
        assert!((b.block(Slot::Minus, Slot::Plus)[(0, 0)] - c64(-0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn field_validation() {
        let g = Grid::uniform(2, 1.0, 1, 1).unwrap();
        assert!(GeneratorField::new(&g, vec![TriangularMatrix::identity(1, 1)]).is_err());
        let e = GeneratorField::new(&g, vec![TriangularMatrix::zeros(1, 1); 2]).unwrap_err();
        assert_eq!(e, EvolutionError::Corner(0, "identity"));
        assert!(HamiltonianField::new(&g, vec![TriangularMatrix::identity(1, 1); 2]).is_err());
        let l = GeneratorField::from_generator(&g, vec![TriangularMatrix::zeros(1, 1); 2]).unwrap();
        assert_eq!(l.point(1), &TriangularMatrix::identity(1, 1));
    }

    proptest! {
        #[test]
        fn scattering_matches_series_and_is_pseudo_unitary(seed in 0u64..10_000, n in 1usize..=3, d in 1usize..=2) {
            let mut rng = sample::rng(seed);
            let h = random_pseudo_hermitian(&mut rng, n, d, 1.5);
            prop_assert!(spectral_norm(&(h.star().m - &h.m)) < 1e-14);
            let f = hamiltonian_to_scattering(&h);
            let want = expm(&(&h.m * (-I)));
            prop_assert!(max_abs(&(&f.m - want)) < 1e-12);
            prop_assert!(pseudo_unitarity_check(&[f]) < 1e-12);
        }

        #[test]
        fn singular_gauge_block_is_handled(seed in 0u64..10_000) {
            let mut rng = sample::rng(seed);
            let mut h = random_pseudo_hermitian(&mut rng, 2, 2, 1.0);
            let v = sample::matrix(&mut rng, 4, 1, 1.0);
            h.set(Slot::Zero, Slot::Zero, &(&v * v.adjoint()));
            let f = hamiltonian_to_scattering(&h);
            prop_assert!(max_abs(&(&f.m - expm(&(&h.m * (-I))))) < 1e-12);
        }
    }
}
