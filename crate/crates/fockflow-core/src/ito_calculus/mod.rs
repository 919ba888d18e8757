//! Triangular operator matrices, pseudo-conjugation, the Itô product rule,
//! its kernel and operator forms, and polynomial/exponential calculus.

mod formula;
mod functional;
mod triangular;

use thiserror::Error;

pub use formula::{ito_kernel_defect, ito_operator_defect, product_integrand, PointTriangle};
pub use functional::{functional_calculus, Polynomial, ScalarFunction};
pub use triangular::{Slot, TriangularMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum ItoError {
    #[error("argument lists differ in length: {0} against {1}")]
    Length(usize, usize),
    #[error("triangular matrices have different shapes")]
    Shape,
    #[error("polynomial uses variable {0} but only {1} are given")]
    Variable(usize, usize),
    #[error("exponential rule needs commuting arguments; [{0}, {1}] has norm {2:e}")]
    NonCommuting(String, String, f64),
}

/// `M^⋆ = g M* g`.
pub fn pseudo_conjugate(m: &TriangularMatrix) -> TriangularMatrix {
    m.star()
}

/// `H^k` by repeated multiplication; `H^0 = 1`.
pub fn triangular_power(h: &TriangularMatrix, k: u32) -> TriangularMatrix {
    let mut p = TriangularMatrix::identity(h.n, h.d);
    for _ in 0..k {
        p = p.mul(h);
    }
    p
}

/// `G^⋆G − U^⋆U`.
pub fn ito_product_derivative(u: &TriangularMatrix, g: &TriangularMatrix) -> Result<TriangularMatrix, ItoError> {
    if (u.n, u.d) != (g.n, g.d) {
        return Err(ItoError::Shape);
    }
    Ok(g.star().mul(g).sub(&u.star().mul(u)))
}

/// `U^⋆D + D^⋆U + D^⋆D`.
pub fn ito_expansion(u: &TriangularMatrix, d: &TriangularMatrix) -> TriangularMatrix {
    let ds = d.star();
    u.star().mul(d).add(&ds.mul(u)).add(&ds.mul(d))
}

/// Adapted form `(U*⊗1)D + D^⋆(U⊗1) + D^⋆D` for a system operator `U`.
pub fn adapted_ito_derivative(u: &crate::linalg::Mat, d: &TriangularMatrix) -> TriangularMatrix {
    let ul = TriangularMatrix::lift(u, d.d);
    let ua = TriangularMatrix::lift(&u.adjoint(), d.d);
    let ds = d.star();
    ua.mul(d).add(&ds.mul(&ul)).add(&ds.mul(d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, max_abs, Mat};
    use crate::sample;
    use proptest::prelude::*;

    fn random_tri(rng: &mut sample::SeededRng, n: usize, d: usize, corner: bool) -> TriangularMatrix {
        let c = if corner { sample::matrix(rng, n, n, 1.0) } else { Mat::zeros(n, n) };
        TriangularMatrix::from_blocks(
            &c,
            &sample::matrix(rng, n * d, n * d, 1.0),
            &sample::matrix(rng, n * d, n, 1.0),
            &sample::matrix(rng, n, n * d, 1.0),
            &sample::matrix(rng, n, n, 1.0),
            d,
        )
    }

    #[test]
    fn conjugation_examples() {
        let id = TriangularMatrix::identity(2, 2);
        assert_eq!(pseudo_conjugate(&id), id);
        let e = Mat::from_element(1, 1, c64(0.3, 0.7));
        let mut dm = TriangularMatrix::zeros(1, 1);
        dm.set(Slot::Zero, Slot::Plus, &e);
        let s = pseudo_conjugate(&dm);
        let mut want = TriangularMatrix::zeros(1, 1);
        want.set(Slot::Minus, Slot::Zero, &e.adjoint());
        assert_eq!(s, want);
        let g = TriangularMatrix::g(2, 3);
        assert_eq!(&g * &g, Mat::identity(g.nrows(), g.nrows()));
    }

    #[test]
    fn power_examples() {
        let mut rng = sample::rng(3);
        let h = random_tri(&mut rng, 2, 2, false);
        let h2 = triangular_power(&h, 2);
        let (h00, hp0, h0m) = (h.block(Slot::Zero, Slot::Zero), h.block(Slot::Zero, Slot::Plus), h.block(Slot::Minus, Slot::Zero));
        assert!(max_abs(&(h2.block(Slot::Zero, Slot::Zero) - &h00 * &h00)) < 1e-14);
        assert!(max_abs(&(h2.block(Slot::Minus, Slot::Plus) - &h0m * &hp0)) < 1e-14);
        assert!(max_abs(&(h2.block(Slot::Minus, Slot::Zero) - &h0m * &h00)) < 1e-14);
        assert!(max_abs(&(h2.block(Slot::Zero, Slot::Plus) - &h00 * &hp0)) < 1e-14);
        assert_eq!(triangular_power(&h, 0), TriangularMatrix::identity(2, 2));
        let mut nil = h.clone();
        nil.set(Slot::Zero, Slot::Zero, &Mat::zeros(4, 4));
        assert!(max_abs(&triangular_power(&nil, 3).m) < 1e-15);
    }

    // Closed form of H^k for k ≥ 2 with zero corners, from the block recursion.
    fn closed_power(h: &TriangularMatrix, k: u32) -> TriangularMatrix {
        let (h00, hp0, h0m) = (h.block(Slot::Zero, Slot::Zero), h.block(Slot::Zero, Slot::Plus), h.block(Slot::Minus, Slot::Zero));
        let pw = |j: u32| (0..j).fold(Mat::identity(h00.nrows(), h00.nrows()), |a, _| a * &h00);
        TriangularMatrix::from_blocks(
            &Mat::zeros(h.n, h.n),
            &pw(k),
            &(pw(k - 1) * &hp0),
            &(&h0m * pw(k - 1)),
            &(&h0m * pw(k - 2) * &hp0),
            h.d,
        )
    }

    #[test]
    fn triangular_ito_identity_and_adapted_form() {
        let mut rng = sample::rng(11);
        let u = random_tri(&mut rng, 2, 1, true);
        let g = random_tri(&mut rng, 2, 1, true);
        assert!(max_abs(&ito_product_derivative(&u, &u).unwrap().m) == 0.0);
        let d = g.sub(&u);
        let lhs = ito_product_derivative(&u, &g).unwrap();
        assert!(max_abs(&(lhs.m - ito_expansion(&u, &d).m)) < 1e-12);
        let x = sample::matrix(&mut rng, 2, 2, 1.0);
        let mut dd = random_tri(&mut rng, 2, 1, false);
        dd.set(Slot::Minus, Slot::Minus, &Mat::zeros(2, 2));
        let ul = TriangularMatrix::lift(&x, 1);
        let got = ito_product_derivative(&ul, &ul.add(&dd)).unwrap();
        assert!(max_abs(&(got.m - adapted_ito_derivative(&x, &dd).m)) < 1e-12);
        assert_eq!(ito_product_derivative(&u, &TriangularMatrix::zeros(1, 1)), Err(ItoError::Shape));
    }

    proptest! {
        #[test]
        fn conjugation_is_involutive_antimultiplicative(seed in 0u64..10_000, n in 1usize..=3, d in 1usize..=2) {
            let mut rng = sample::rng(seed);
            let a = random_tri(&mut rng, n, d, true);
            let b = random_tri(&mut rng, n, d, true);
            prop_assert_eq!(pseudo_conjugate(&pseudo_conjugate(&a)), a.clone());
            let lhs = pseudo_conjugate(&a.mul(&b));
            let rhs = pseudo_conjugate(&b).mul(&pseudo_conjugate(&a));
            prop_assert!(max_abs(&(lhs.m - rhs.m)) < 1e-14);
        }

        #[test]
        fn powers_match_closed_form(seed in 0u64..10_000, n in 1usize..=3, d in 1usize..=2) {
            let mut rng = sample::rng(seed);
            let h = random_tri(&mut rng, n, d, false);
            for k in 3..=6 {
                let want = closed_power(&h, k);
                prop_assert!(max_abs(&(triangular_power(&h, k).m - want.m)) < 1e-12);
            }
        }

        #[test]
        fn ito_expansion_identity(seed in 0u64..10_000, n in 1usize..=3, d in 1usize..=2) {
            let mut rng = sample::rng(seed);
            let u = random_tri(&mut rng, n, d, true);
            let g = random_tri(&mut rng, n, d, true);
            let lhs = ito_product_derivative(&u, &g).unwrap();
            prop_assert!(max_abs(&(lhs.m - ito_expansion(&u, &g.sub(&u)).m)) < 1e-12);
        }
    }
}
