//! Matrix-free operators on `H ⊗ ⊗_x C^{1+d}` for grids too large for dense
//! representation matrices.
//!
//! Coordinates are orthonormal: `v(ϰ) = √w(ϰ) a(ϰ)`. Point `x` contributes a
//! factor `C^{1+d}` whose first basis vector is the empty slot. The
//! representation of a chronological or product kernel is an ordered product of
//! local operators acting on `H` and one point factor.

use rayon::prelude::*;

use crate::chain_space::Grid;
use crate::ito_calculus::{Slot, TriangularMatrix};
use crate::linalg::{c64, top_singular_value, Col, Mat, C64, ONE, ZERO};

const PARALLEL_DIM: usize = 1 << 12;

/// One factor of an ordered product.
#[derive(Clone, Debug)]
pub enum LocalFactor {
    /// `X ⊗ I` on the system.
    System(Mat),
    /// Acts on the point factor alone, `(1+d)`-square.
    Noise(usize, Mat),
    /// Acts on `H ⊗ C^{1+d}` of the point, `n(1+d)`-square, system index major.
    Coupled(usize, Mat),
}

/// Ordered product `F_k ⋯ F_1`, `factors[0]` applied first.
#[derive(Clone, Debug)]
pub struct LocalProduct {
    pub n: usize,
    pub d: usize,
    pub points: usize,
    pub factors: Vec<LocalFactor>,
}

/// `[[I + w F₊⁻, √w F₀⁻], [√w F₊⁰, F₀⁰]]` on `H ⊗ C^{1+d}`, system index major.
pub fn local_matrix(f: &TriangularMatrix, w: f64) -> Mat {
    let (n, d) = (f.n, f.d);
    let big = 1 + d;
    let sw = c64(w.sqrt(), 0.0);
    let tm = f.block(Slot::Minus, Slot::Plus) * c64(w, 0.0) + Mat::identity(n, n);
    let ann = f.block(Slot::Minus, Slot::Zero) * sw;
    let cre = f.block(Slot::Zero, Slot::Plus) * sw;
    let gauge = f.block(Slot::Zero, Slot::Zero);
    let mut a = Mat::zeros(n * big, n * big);
    for h in 0..n {
        for k in 0..n {
            a[(h * big, k * big)] = tm[(h, k)];
            for j in 0..d {
                a[(h * big, k * big + 1 + j)] = ann[(h, k * d + j)];
                a[(h * big + 1 + j, k * big)] = cre[(h * d + j, k)];
                for i in 0..d {
                    a[(h * big + 1 + i, k * big + 1 + j)] = gauge[(h * d + i, k * d + j)];
                }
            }
        }
    }
    a
}

impl LocalProduct {
    pub fn new(n: usize, d: usize, points: usize) -> LocalProduct {
        LocalProduct { n, d, points, factors: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.n * (1 + self.d).pow(self.points as u32)
    }

    /// Representation of `X ⊗ f^⊗` for per-point matrices with `n = 1`.
    pub fn product_kernel(grid: &Grid, x: &Mat, f: &[TriangularMatrix]) -> LocalProduct {
        let mut p = LocalProduct::new(grid.n(), grid.d(), grid.len());
        p.factors.push(LocalFactor::System(x.clone()));
        for (k, fk) in f.iter().enumerate() {
            p.factors.push(LocalFactor::Noise(k, local_matrix(fk, grid.weight(k))));
        }
        p
    }

    /// Representation of the chronological product `F(x_M) ⋯ F(x_1) · T⁰` over the points in `active`.
    pub fn chronological(grid: &Grid, f: &[TriangularMatrix], t0: &Mat, active: &[bool]) -> LocalProduct {
        let mut p = LocalProduct::new(grid.n(), grid.d(), grid.len());
        p.factors.push(LocalFactor::System(t0.clone()));
        for (k, fk) in f.iter().enumerate() {
            if active[k] {
                p.factors.push(LocalFactor::Coupled(k, local_matrix(fk, grid.weight(k))));
            }
        }
        p
    }

    fn apply_factor(&self, f: &LocalFactor, v: &Col, adjoint: bool) -> Col {
        let big = 1 + self.d;
        let s = big.pow(self.points as u32);
        let n = self.n;
        match f {
            LocalFactor::System(x) => {
                let x = if adjoint { x.adjoint() } else { x.clone() };
                let mut out = Col::zeros(v.len());
                for h in 0..n {
                    for k in 0..n {
                        let c = x[(h, k)];
                        if c == ZERO {
                            continue;
                        }
                        for i in 0..s {
                            out[h * s + i] += c * v[k * s + i];
                        }
                    }
                }
                out
            }
            LocalFactor::Noise(k, a) => {
                let a = if adjoint { a.adjoint() } else { a.clone() };
                let lo = big.pow((self.points - 1 - k) as u32);
                let mut out = Col::zeros(v.len());
                let block = |(b, chunk): (usize, &mut [C64])| {
                    let base = b * lo * big;
                    for i in 0..big {
                        for j in 0..big {
                            let c = a[(i, j)];
                            if c == ZERO {
                                continue;
                            }
                            for l in 0..lo {
                                chunk[i * lo + l] += c * v[base + j * lo + l];
                            }
                        }
                    }
                };
                let chunks = out.as_mut_slice().chunks_mut(lo * big).enumerate();
                if v.len() >= PARALLEL_DIM {
                    chunks.par_bridge().for_each(block);
                } else {
                    chunks.for_each(block);
                }
                out
            }
            LocalFactor::Coupled(k, a) => {
                let a = if adjoint { a.adjoint() } else { a.clone() };
                let lo = big.pow((self.points - 1 - k) as u32);
                let hi = s / (lo * big);
                let mut out = Col::zeros(v.len());
                let idx = |h: usize, top: usize, digit: usize, l: usize| h * s + top * lo * big + digit * lo + l;
                for top in 0..hi {
                    for r in 0..n * big {
                        let (hr, dr) = (r / big, r % big);
                        for c in 0..n * big {
                            let z = a[(r, c)];
                            if z == ZERO {
                                continue;
                            }
                            let (hc, dc) = (c / big, c % big);
                            for l in 0..lo {
                                out[idx(hr, top, dr, l)] += z * v[idx(hc, top, dc, l)];
                            }
                        }
                    }
                }
                out
            }
        }
    }

    pub fn apply(&self, v: &Col) -> Col {
        let mut v = v.clone();
        for f in &self.factors {
            v = self.apply_factor(f, &v, false);
        }
        v
    }

    pub fn apply_adjoint(&self, v: &Col) -> Col {
        let mut v = v.clone();
        for f in self.factors.iter().rev() {
            v = self.apply_factor(f, &v, true);
        }
        v
    }

    /// Dense matrix, for small cross-checks.
    pub fn to_dense(&self) -> Mat {
        let dm = self.dim();
        let mut m = Mat::zeros(dm, dm);
        for j in 0..dm {
            let mut e = Col::zeros(dm);
            e[j] = ONE;
            m.set_column(j, &self.apply(&e));
        }
        m
    }

    /// `ξ^{|ϰ|/2}` per product index.
    pub fn scale_diag(&self, xi: f64) -> Vec<f64> {
        let big = 1 + self.d;
        let s = big.pow(self.points as u32);
        let per: Vec<f64> = (0..s)
            .map(|mut i| {
                let mut occ = 0;
                for _ in 0..self.points {
                    if i % big != 0 {
                        occ += 1;
                    }
                    i /= big;
                }
                xi.powf(occ as f64 / 2.0)
            })
            .collect();
        (0..self.n * s).map(|i| per[i % s]).collect()
    }
}

/// A product of ordered products, some of them adjointed, applied right to left.
#[derive(Clone, Debug)]
pub struct LocalTerm {
    pub coeff: C64,
    pub parts: Vec<(LocalProduct, bool)>,
}

impl LocalTerm {
    fn apply(&self, v: &Col, adjoint: bool) -> Col {
        let mut v = v.clone();
        if !adjoint {
            for (p, adj) in self.parts.iter().rev() {
                v = if *adj { p.apply_adjoint(&v) } else { p.apply(&v) };
            }
            v * self.coeff
        } else {
            for (p, adj) in self.parts.iter() {
                v = if *adj { p.apply(&v) } else { p.apply_adjoint(&v) };
            }
            v * self.coeff.conj()
        }
    }
}

/// `‖S(ξ₋) (c₀ I + Σ terms) S(ξ⁺)⁻¹‖` by power iteration.
pub fn combination_scale_norm(identity: C64, terms: &[LocalTerm], xi_plus: f64, xi_minus: f64, seed: u64) -> f64 {
    let first = &terms[0].parts[0].0;
    let dm = first.dim();
    let sp = first.scale_diag(xi_plus);
    let sm = first.scale_diag(xi_minus);
    let op = |v: &Col, adjoint: bool| -> Col {
        // adjoint of S₋ A S₊⁻¹ is S₊⁻¹ A* S₋
        let pre: Col = if adjoint {
            Col::from_fn(dm, |i, _| v[i] * sm[i])
        } else {
            Col::from_fn(dm, |i, _| v[i] / sp[i])
        };
        let mut acc = &pre * identity;
        if adjoint {
            acc = &pre * identity.conj();
        }
        for t in terms {
            acc += t.apply(&pre, adjoint);
        }
        if adjoint {
            Col::from_fn(dm, |i, _| acc[i] / sp[i])
        } else {
            Col::from_fn(dm, |i, _| acc[i] * sm[i])
        }
    };
    let mut rng = crate::sample::rng(seed);
    let start = crate::sample::gaussian(&mut rng, dm, 1).column(0).into_owned();
    top_singular_value(dm, |v| op(v, false), |v| op(v, true), &start, 1e-7, 2000)
}

/// Product index to graded chain-basis index, for comparison with dense operators.
pub fn graded_positions(grid: &Grid) -> Vec<usize> {
    let (n, d, m) = (grid.n(), grid.d(), grid.len());
    let big = 1 + d;
    let s = big.pow(m as u32);
    let basis = grid.basis(0);
    let mut out = vec![0; n * s];
    for h in 0..n {
        for i in 0..s {
            let mut digits = vec![0; m];
            let mut r = i;
            for k in (0..m).rev() {
                digits[k] = r % big;
                r /= big;
            }
            let pts: Vec<usize> = (0..m).filter(|&k| digits[k] != 0).collect();
            let c = crate::chain_space::Chain::from_points(&pts);
            let mut e = 0;
            for &p in &pts {
                e = e * d + (digits[p] - 1);
            }
            out[h * s + i] = basis.offset(c) + h * d.pow(pts.len() as u32) + e;
        }
    }
    out
}

/// Dense operator in orthonormal product coordinates: `√w U √w⁻¹`, permuted.
pub fn orthonormal_product_matrix(u: &super::FockOperator) -> Mat {
    let grid = &u.grid;
    let pos = graded_positions(grid);
    let w = super::chain_weights(grid, &grid.basis(0));
    let dm = pos.len();
    Mat::from_fn(dm, dm, |i, j| {
        let (a, b) = (pos[i], pos[j]);
        u.m[(a, b)] * (w[a].sqrt() / w[b].sqrt())
    })
}
