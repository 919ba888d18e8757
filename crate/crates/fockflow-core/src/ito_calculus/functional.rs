//! `f(X)` and `f(X + A)` for ordered polynomials and the commuting exponential.

use super::{ItoError, TriangularMatrix};
use crate::linalg::{commutator, expm, spectral_norm, C64};

/// Sum of coefficient times word; a word lists variable indices left to right,
/// so `[0, 1]` means `Z₀ Z₁`. The empty word is the identity.
pub type Polynomial = Vec<(C64, Vec<usize>)>;

#[derive(Clone, Debug)]
pub enum ScalarFunction {
    Polynomial(Polynomial),
    /// `exp(Z₀ + Z₁ + …)`, defined when all arguments commute.
    Exponential,
}

const COMMUTE_TOL: f64 = 1e-10;

fn eval(f: &ScalarFunction, z: &[TriangularMatrix], n: usize, d: usize) -> Result<TriangularMatrix, ItoError> {
    match f {
        ScalarFunction::Polynomial(terms) => {
            let mut acc = TriangularMatrix::zeros(n, d);
            for (c, word) in terms {
                let mut w = TriangularMatrix::identity(n, d);
                for &v in word {
                    let zv = z.get(v).ok_or(ItoError::Variable(v, z.len()))?;
                    w = w.mul(zv);
                }
                acc = acc.add(&w.scale(*c));
            }
            Ok(acc)
        }
        ScalarFunction::Exponential => {
            let mut s = TriangularMatrix::zeros(n, d);
            for zi in z {
                s = s.add(zi);
            }
            Ok(TriangularMatrix { n, d, m: expm(&s.m) })
        }
    }
}

/// `(f(X), f(X + A))` evaluated blockwise on triangular matrices.
pub fn functional_calculus(
    f: &ScalarFunction,
    x: &[TriangularMatrix],
    a: &[TriangularMatrix],
) -> Result<(TriangularMatrix, TriangularMatrix), ItoError> {
    if x.len() != a.len() {
        return Err(ItoError::Length(x.len(), a.len()));
    }
    let (n, d) = match x.first() {
        Some(t) => (t.n, t.d),
        None => (1, 1),
    };
    if x.iter().chain(a).any(|t| (t.n, t.d) != (n, d)) {
        return Err(ItoError::Shape);
    }
    let z: Vec<TriangularMatrix> = x.iter().zip(a).map(|(xi, ai)| xi.add(ai)).collect();
    if matches!(f, ScalarFunction::Exponential) {
        let named: Vec<(String, &TriangularMatrix)> = x
            .iter()
            .enumerate()
            .map(|(i, t)| (format!("X{i}"), t))
            .chain(z.iter().enumerate().map(|(i, t)| (format!("Z{i}"), t)))
            .collect();
        for (i, (na, ta)) in named.iter().enumerate() {
            for (nb, tb) in &named[i + 1..] {
                let c = spectral_norm(&commutator(&ta.m, &tb.m));
                if c > COMMUTE_TOL {
                    return Err(ItoError::NonCommuting(na.clone(), nb.clone(), c));
                }
            }
        }
    }
    Ok((eval(f, x, n, d)?, eval(f, &z, n, d)?))
}
