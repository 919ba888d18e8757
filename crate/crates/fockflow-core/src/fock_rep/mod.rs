//! Fock-space representation of kernels, quantum stochastic integrals,
//! integrability norms and adaptedness.

mod integrals;
pub mod local;

use std::sync::Arc;

use thiserror::Error;

use crate::chain_space::layout::accumulate_permuted;
use crate::chain_space::{Chain, ChainBasis, FockVector, Grid};
use crate::kernel_algebra::{relative_bound, Kernel, WeightMatrix};
use crate::linalg::{c64, spectral_norm, Col, Mat, C64, ONE};

pub use integrals::*;

#[derive(Debug, Error, PartialEq)]
pub enum FockError {
    #[error("operators live on different grids")]
    GridMismatch,
    #[error("extra factors do not match: {0:?} against {1:?}")]
    ExtraMismatch(Vec<usize>, Vec<usize>),
    #[error("matrix has shape {got:?}, expected {expected:?}")]
    Shape { expected: (usize, usize), got: (usize, usize) },
    #[error("process value at point {point} is not adapted to its time; Itô sums need adapted step processes")]
    NotAdapted { point: usize },
    #[error("integrand entry for {0} is inconsistent: {1}")]
    Integrand(String, String),
    #[error("scale parameters must be positive")]
    Scale,
}

/// Dense operator on `H ⊗ F ⊗ E^{extra_in}` to `H ⊗ F ⊗ E^{extra_out}` in the
/// graded chain basis. Blocks are meaningful only on chains avoiding the extras.
#[derive(Clone, Debug)]
pub struct FockOperator {
    pub grid: Grid,
    pub extra_in: Vec<usize>,
    pub extra_out: Vec<usize>,
    pub m: Mat,
}

impl FockOperator {
    pub fn zeros(grid: &Grid) -> FockOperator {
        FockOperator::zeros_with(grid, Vec::new(), Vec::new())
    }

    pub fn zeros_with(grid: &Grid, extra_in: Vec<usize>, extra_out: Vec<usize>) -> FockOperator {
        let r = grid.basis(extra_out.len()).total;
        let c = grid.basis(extra_in.len()).total;
        FockOperator { grid: grid.clone(), extra_in, extra_out, m: Mat::zeros(r, c) }
    }

    pub fn identity(grid: &Grid) -> FockOperator {
        let s = grid.fock_dim();
        FockOperator { grid: grid.clone(), extra_in: Vec::new(), extra_out: Vec::new(), m: Mat::identity(s, s) }
    }

    /// Identity on chains avoiding `extra`, zero on the rest.
    pub fn identity_with(grid: &Grid, extra: Vec<usize>) -> FockOperator {
        let mut u = FockOperator::zeros_with(grid, extra.clone(), extra.clone());
        let mask = Chain::from_points(&extra);
        let b = grid.basis(extra.len());
        for c in grid.chains() {
            if c.disjoint(mask) {
                for i in b.range(c) {
                    u.m[(i, i)] = ONE;
                }
            }
        }
        u
    }

    pub fn from_matrix(grid: &Grid, m: Mat) -> Result<FockOperator, FockError> {
        let s = grid.fock_dim();
        if (m.nrows(), m.ncols()) != (s, s) {
            return Err(FockError::Shape { expected: (s, s), got: (m.nrows(), m.ncols()) });
        }
        Ok(FockOperator { grid: grid.clone(), extra_in: Vec::new(), extra_out: Vec::new(), m })
    }

    pub fn row_basis(&self) -> Arc<ChainBasis> {
        self.grid.basis(self.extra_out.len())
    }

    pub fn col_basis(&self) -> Arc<ChainBasis> {
        self.grid.basis(self.extra_in.len())
    }

    pub fn extras_mask(&self) -> Chain {
        Chain::from_points(&self.extra_in).union(Chain::from_points(&self.extra_out))
    }

    pub fn row_factors(&self, c: Chain) -> Vec<usize> {
        let mut v = c.points();
        v.extend_from_slice(&self.extra_out);
        v
    }

    pub fn col_factors(&self, c: Chain) -> Vec<usize> {
        let mut v = c.points();
        v.extend_from_slice(&self.extra_in);
        v
    }

    pub fn block(&self, r: Chain, c: Chain) -> Mat {
        let rb = self.row_basis();
        let cb = self.col_basis();
        self.m.view((rb.offset(r), cb.offset(c)), (rb.block_dim(r), cb.block_dim(c))).into_owned()
    }

    pub fn add(&self, o: &FockOperator) -> FockOperator {
        self.same_shape(o);
        FockOperator { m: &self.m + &o.m, ..self.clone() }
    }

    pub fn sub(&self, o: &FockOperator) -> FockOperator {
        self.same_shape(o);
        FockOperator { m: &self.m - &o.m, ..self.clone() }
    }

    pub fn scale(&self, z: C64) -> FockOperator {
        FockOperator { m: &self.m * z, ..self.clone() }
    }

    fn same_shape(&self, o: &FockOperator) {
        assert!(self.grid == o.grid, "operators on different grids");
        assert!(self.extra_in == o.extra_in && self.extra_out == o.extra_out, "extra factors differ");
    }

    /// `self ∘ o`.
    pub fn compose(&self, o: &FockOperator) -> Result<FockOperator, FockError> {
        if self.grid != o.grid {
            return Err(FockError::GridMismatch);
        }
        if self.extra_in != o.extra_out {
            return Err(FockError::ExtraMismatch(self.extra_in.clone(), o.extra_out.clone()));
        }
        Ok(FockOperator { grid: self.grid.clone(), extra_in: o.extra_in.clone(), extra_out: self.extra_out.clone(), m: &self.m * &o.m })
    }

    /// Adjoint for the weighted Fock inner product: `W_in⁻¹ Uᴴ W_out`.
    pub fn adjoint(&self) -> FockOperator {
        let wo = chain_weights(&self.grid, &self.row_basis());
        let wi = chain_weights(&self.grid, &self.col_basis());
        let mut m = self.m.adjoint();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                m[(i, j)] *= wo[j] / wi[i];
            }
        }
        FockOperator { grid: self.grid.clone(), extra_in: self.extra_out.clone(), extra_out: self.extra_in.clone(), m }
    }

    pub fn apply(&self, a: &FockVector) -> FockVector {
        assert_eq!(a.extra, self.extra_in, "vector extras must match operator input");
        FockVector::from_data(&self.grid, self.extra_out.clone(), &self.m * &a.data)
    }

    /// Zero every row and column block whose chain meets `avoid`.
    pub fn compressed(&self, avoid: Chain) -> FockOperator {
        let mut u = self.clone();
        let rb = self.row_basis();
        let cb = self.col_basis();
        for c in self.grid.chains() {
            if !c.disjoint(avoid) {
                let r = rb.range(c);
                u.m.rows_mut(r.start, r.len()).fill(crate::linalg::ZERO);
                let k = cb.range(c);
                u.m.columns_mut(k.start, k.len()).fill(crate::linalg::ZERO);
            }
        }
        u
    }

    /// `U ⊗ I` on extra factors appended after the existing ones, on chains avoiding them.
    pub fn lift_extra(&self, extra: &[usize]) -> FockOperator {
        let (n, d) = (self.grid.n(), self.grid.d());
        let mut ein = self.extra_in.clone();
        ein.extend_from_slice(extra);
        let mut eout = self.extra_out.clone();
        eout.extend_from_slice(extra);
        let mut u = FockOperator::zeros_with(&self.grid, ein, eout);
        let mask = Chain::from_points(extra).union(self.extras_mask());
        let e = d.pow(extra.len() as u32);
        let id = Mat::identity(e, e);
        let (rb, cb) = (u.row_basis(), u.col_basis());
        let chains: Vec<Chain> = self.grid.chains().into_iter().filter(|c| c.disjoint(mask)).collect();
        for &r in &chains {
            for &c in &chains {
                let b = self.block(r, c);
                if b.iter().all(|z| *z == crate::linalg::ZERO) {
                    continue;
                }
                let k = b.kronecker(&id);
                u.m.view_mut((rb.offset(r), cb.offset(c)), (k.nrows(), k.ncols())).copy_from(&k);
            }
        }
        let _ = n;
        u
    }

    /// Operator norm for the Fock inner product.
    pub fn hilbert_norm(&self) -> f64 {
        operator_scale_norm(self, 1.0, 1.0)
    }
}

/// Chain weight `w(ϰ)` repeated over every index of block `ϰ`.
pub fn chain_weights(grid: &Grid, basis: &ChainBasis) -> Vec<f64> {
    let mut w = vec![0.0; basis.total];
    for &c in &basis.chains {
        let cw = grid.chain_weight(c);
        for i in basis.range(c) {
            w[i] = cw;
        }
    }
    w
}

/// `√(ξ^|ϰ| w(ϰ))` over every index of block `ϰ`.
pub fn scale_weights(grid: &Grid, basis: &ChainBasis, xi: f64) -> Vec<f64> {
    let mut w = vec![0.0; basis.total];
    for &c in &basis.chains {
        let cw = (xi.powi(c.len() as i32) * grid.chain_weight(c)).sqrt();
        for i in basis.range(c) {
            w[i] = cw;
        }
    }
    w
}

/// `‖U‖_{ξ⁺}^{ξ₋} = sup ‖Ua‖(ξ₋)/‖a‖(ξ⁺)`, the largest singular value of
/// `W(ξ₋) U W(ξ⁺)⁻¹`.
pub fn operator_scale_norm(u: &FockOperator, xi_plus: f64, xi_minus: f64) -> f64 {
    assert!(xi_plus > 0.0 && xi_minus > 0.0, "scale parameters must be positive");
    let wo = scale_weights(&u.grid, &u.row_basis(), xi_minus);
    let wi = scale_weights(&u.grid, &u.col_basis(), xi_plus);
    let m = Mat::from_fn(u.m.nrows(), u.m.ncols(), |i, j| u.m[(i, j)] * (wo[i] / wi[j]));
    spectral_norm(&m)
}

/// The representation `ι(T)`: block `(gauge ∪ cre, ann ∪ gauge)` receives
/// `w(ann) w(time) T(𝛋)` from every table.
pub fn iota(t: &Kernel) -> FockOperator {
    let grid = &t.grid;
    let (n, d) = (grid.n(), grid.d());
    let mut u = FockOperator::zeros_with(grid, t.extra_in.clone(), t.extra_out.clone());
    let (rb, cb) = (u.row_basis(), u.col_basis());
    for (tab, b) in t.iter() {
        let row = tab.output_chain();
        let col = tab.input_chain();
        let w = grid.chain_weight(tab.ann) * grid.chain_weight(tab.time);
        let in_to = u.col_factors(col);
        let out_to = u.row_factors(row);
        accumulate_permuted(
            &mut u.m,
            rb.offset(row),
            cb.offset(col),
            b,
            n,
            d,
            &t.in_factors(tab),
            &t.out_factors(tab),
            &in_to,
            &out_to,
            c64(w, 0.0),
        );
    }
    u
}

/// `‖ι(T)* − ι(T^⋆)‖` in the Fock operator norm.
pub fn iota_adjoint_check(t: &Kernel) -> f64 {
    iota(t).adjoint().sub(&iota(&t.adjoint())).hilbert_norm()
}

/// Largest admissible `ε(ξ⁺, ξ₋) = (ξ⁺ + 1/ξ₋ − √((ξ⁺ − 1/ξ₋)² + 4g²))/2` for a
/// gauge bound `g`; `None` unless it is positive, that is unless `ξ⁺/ξ₋ > g²`.
pub fn epsilon_bound(xi_plus: f64, xi_minus: f64, gauge: f64) -> Option<f64> {
    let inv = 1.0 / xi_minus;
    let e = (xi_plus + inv - ((xi_plus - inv).powi(2) + 4.0 * gauge * gauge).sqrt()) / 2.0;
    (e > 0.0 && e.is_finite()).then_some(e)
}

/// `(‖ι(T)‖_{ξ⁺}^{ξ₋}, exp{Σ w(ζ₊⁻ + (ζ₀⁻² + ζ₊⁰²)/2ε)}·‖T‖(ζ))` with `ε = ε(ξ⁺, ξ₋)`
/// taken at the largest gauge weight.
pub fn exponential_bound(t: &Kernel, z: &[WeightMatrix], xi_plus: f64, xi_minus: f64) -> Result<(f64, f64), FockError> {
    let grid = &t.grid;
    if z.len() != grid.len() || xi_plus <= 0.0 || xi_minus <= 0.0 {
        return Err(FockError::Scale);
    }
    let gauge = z.iter().map(|w| w.gauge).fold(0.0, f64::max);
    let eps = epsilon_bound(xi_plus, xi_minus, gauge).ok_or(FockError::Scale)?;
    let rate: f64 = (0..grid.len()).map(|p| grid.weight(p) * (z[p].time + (z[p].ann.powi(2) + z[p].cre.powi(2)) / (2.0 * eps))).sum();
    Ok((operator_scale_norm(&iota(t), xi_plus, xi_minus), rate.exp() * relative_bound(t, z)))
}

/// `‖ι(S·T) − ι(S)ι(T)‖_{ξ⁺}^{ξ₋}` from dense representations.
pub fn multiplicativity_defect(s: &Kernel, t: &Kernel, xi_plus: f64, xi_minus: f64) -> Result<f64, FockError> {
    let st = s.product(t).map_err(|e| FockError::Integrand("product".into(), e.to_string()))?;
    let prod = iota(s).compose(&iota(t))?;
    Ok(operator_scale_norm(&iota(&st).sub(&prod), xi_plus, xi_minus))
}

/// `(ξ⁺, ξ₋) = (2 max(1, ‖S₀⁰‖²) max(1, ‖T₀⁰‖²), ½)` over all points, a
/// pair at which both factors and their product are bounded.
pub fn product_scale_pair(s: &[crate::ito_calculus::TriangularMatrix], t: &[crate::ito_calculus::TriangularMatrix]) -> (f64, f64) {
    use crate::ito_calculus::Slot;
    let g = |f: &[crate::ito_calculus::TriangularMatrix]| f.iter().map(|x| spectral_norm(&x.block(Slot::Zero, Slot::Zero)).powi(2)).fold(1.0, f64::max);
    (2.0 * g(s) * g(t), 0.5)
}

/// Matrix-free [`multiplicativity_defect`] for product kernels `X ⊗ s^⊗` and
/// `Y ⊗ t^⊗`, whose product is `XY ⊗ (st)^⊗`.
pub fn product_multiplicativity_defect(
    grid: &Grid,
    (x, s): (&Mat, &[crate::ito_calculus::TriangularMatrix]),
    (y, t): (&Mat, &[crate::ito_calculus::TriangularMatrix]),
    xi_plus: f64,
    xi_minus: f64,
    seed: u64,
) -> f64 {
    use local::{combination_scale_norm, LocalProduct, LocalTerm};
    let st: Vec<_> = s.iter().zip(t).map(|(a, b)| a.mul(b)).collect();
    let terms = vec![
        LocalTerm { coeff: ONE, parts: vec![(LocalProduct::product_kernel(grid, x, s), false), (LocalProduct::product_kernel(grid, y, t), false)] },
        LocalTerm { coeff: -ONE, parts: vec![(LocalProduct::product_kernel(grid, &(x * y), &st), false)] },
    ];
    combination_scale_norm(crate::linalg::ZERO, &terms, xi_plus, xi_minus, seed)
}

/// Column vector of a Fock vector's data, for dense checks.
pub fn vector_data(a: &FockVector) -> &Col {
    &a.data
}
