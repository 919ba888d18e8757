//! Discretized chain space: the grid, chains as point subsets, the graded chain
//! basis, Fock vectors with scale norms, and point derivatives.

pub mod layout;

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{Col, C64, ZERO};

/// Largest grid the bitmask chain representation supports.
pub const MAX_POINTS: usize = 30;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    /// times must be strictly increasing
    #[error("grid times must be strictly increasing (violated at point {0})")]
    NonIncreasing(usize),
    /// weights must be positive
    #[error("grid weight at point {0} is not positive")]
    NonPositiveWeight(usize),
    #[error("times and weights have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("noise and system dimensions must be at least 1")]
    ZeroDimension,
    #[error("grid has {0} points, at most {MAX_POINTS} are supported")]
    TooLarge(usize),
    #[error("scale parameter must be positive, got {0}")]
    BadScale(f64),
}

/// A finite subset of grid points, stored as a bitmask over point indices.
/// Point indices increase with time, so iteration order is time order.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Chain(pub u32);

impl Chain {
    pub const EMPTY: Chain = Chain(0);

    pub fn single(p: usize) -> Chain {
        Chain(1 << p)
    }

    pub fn from_points(pts: &[usize]) -> Chain {
        Chain(pts.iter().fold(0, |m, &p| m | (1 << p)))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, p: usize) -> bool {
        self.0 >> p & 1 == 1
    }

    pub fn union(self, o: Chain) -> Chain {
        Chain(self.0 | o.0)
    }

    pub fn minus(self, o: Chain) -> Chain {
        Chain(self.0 & !o.0)
    }

    pub fn meet(self, o: Chain) -> Chain {
        Chain(self.0 & o.0)
    }

    pub fn disjoint(self, o: Chain) -> bool {
        self.0 & o.0 == 0
    }

    pub fn subset_of(self, o: Chain) -> bool {
        self.0 & !o.0 == 0
    }

    /// Points in time order.
    pub fn points(self) -> Vec<usize> {
        let mut v = Vec::with_capacity(self.len());
        let mut m = self.0;
        while m != 0 {
            let p = m.trailing_zeros() as usize;
            v.push(p);
            m &= m - 1;
        }
        v
    }

    /// Latest point, if any.
    pub fn last(self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            Some(31 - self.0.leading_zeros() as usize)
        }
    }

    /// All subsets, including the empty one and the chain itself.
    pub fn subsets(self) -> SubsetIter {
        SubsetIter { full: self.0, cur: 0, done: false }
    }
}

impl fmt::Debug for Chain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.points())
    }
}

pub struct SubsetIter {
    full: u32,
    cur: u32,
    done: bool,
}

impl Iterator for SubsetIter {
    type Item = Chain;
    fn next(&mut self) -> Option<Chain> {
        if self.done {
            return None;
        }
        let out = Chain(self.cur);
        if self.cur == self.full {
            self.done = true;
        } else {
            self.cur = (self.cur.wrapping_sub(self.full)) & self.full;
        }
        Some(out)
    }
}

/// Basis layout of `H ⊗ F ⊗ E^{extra}`: one block per chain, blocks in the
/// graded order, block `ϰ` of dimension `n·d^(|ϰ|+extra)`.
#[derive(Debug)]
pub struct ChainBasis {
    pub chains: Vec<Chain>,
    pos: Vec<usize>,
    pub offsets: Vec<usize>,
    pub dims: Vec<usize>,
    pub total: usize,
}

impl ChainBasis {
    fn build(m: usize, n: usize, d: usize, extra: usize) -> ChainBasis {
        let chains = graded_chains(m);
        let mut pos = vec![0; 1 << m];
        let mut offsets = Vec::with_capacity(chains.len());
        let mut dims = Vec::with_capacity(chains.len());
        let mut total = 0;
        for (i, c) in chains.iter().enumerate() {
            pos[c.0 as usize] = i;
            offsets.push(total);
            let dd = layout::dim(n, d, c.len() + extra);
            dims.push(dd);
            total += dd;
        }
        ChainBasis { chains, pos, offsets, dims, total }
    }

    pub fn index(&self, c: Chain) -> usize {
        self.pos[c.0 as usize]
    }

    pub fn offset(&self, c: Chain) -> usize {
        self.offsets[self.pos[c.0 as usize]]
    }

    pub fn block_dim(&self, c: Chain) -> usize {
        self.dims[self.pos[c.0 as usize]]
    }

    pub fn range(&self, c: Chain) -> std::ops::Range<usize> {
        let i = self.pos[c.0 as usize];
        self.offsets[i]..self.offsets[i] + self.dims[i]
    }
}

fn graded_chains(m: usize) -> Vec<Chain> {
    let mut all: Vec<Chain> = (0..(1u32 << m)).map(Chain).collect();
    all.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.points().cmp(&b.points())));
    all
}

struct GridData {
    times: Vec<f64>,
    weights: Vec<f64>,
    noise_dim: usize,
    system_dim: usize,
    bases: Mutex<HashMap<usize, Arc<ChainBasis>>>,
}

/// The discretized base space: ordered points with times and quadrature weights.
#[derive(Clone)]
pub struct Grid(Arc<GridData>);

impl PartialEq for Grid {
    fn eq(&self, o: &Grid) -> bool {
        Arc::ptr_eq(&self.0, &o.0)
            || (self.0.times == o.0.times
                && self.0.weights == o.0.weights
                && self.0.noise_dim == o.0.noise_dim
                && self.0.system_dim == o.0.system_dim)
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("times", &self.0.times)
            .field("weights", &self.0.weights)
            .field("d", &self.0.noise_dim)
            .field("n", &self.0.system_dim)
            .finish()
    }
}

impl Grid {
    pub fn new(times: Vec<f64>, weights: Vec<f64>, noise_dim: usize, system_dim: usize) -> Result<Grid, GridError> {
        if times.len() != weights.len() {
            return Err(GridError::LengthMismatch(times.len(), weights.len()));
        }
        if times.len() > MAX_POINTS {
            return Err(GridError::TooLarge(times.len()));
        }
        if noise_dim == 0 || system_dim == 0 {
            return Err(GridError::ZeroDimension);
        }
        for i in 1..times.len() {
            if !(times[i] > times[i - 1]) {
                return Err(GridError::NonIncreasing(i));
            }
        }
        if let Some(i) = weights.iter().position(|w| !(*w > 0.0)) {
            return Err(GridError::NonPositiveWeight(i));
        }
        Ok(Grid(Arc::new(GridData { times, weights, noise_dim, system_dim, bases: Mutex::new(HashMap::new()) })))
    }

    /// `m` points at left endpoints `k·t_max/m`, each of weight `t_max/m`.
    pub fn uniform(m: usize, t_max: f64, noise_dim: usize, system_dim: usize) -> Result<Grid, GridError> {
        let dx = if m == 0 { 0.0 } else { t_max / m as f64 };
        let times = (0..m).map(|k| k as f64 * dx).collect();
        Grid::new(times, vec![dx; m], noise_dim, system_dim)
    }

    /// Same points and weights with different dimensions.
    pub fn with_dims(&self, noise_dim: usize, system_dim: usize) -> Grid {
        Grid::new(self.0.times.clone(), self.0.weights.clone(), noise_dim, system_dim).expect("valid grid")
    }

    pub fn len(&self) -> usize {
        self.0.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.times.is_empty()
    }

    pub fn n(&self) -> usize {
        self.0.system_dim
    }

    pub fn d(&self) -> usize {
        self.0.noise_dim
    }

    pub fn time(&self, p: usize) -> f64 {
        self.0.times[p]
    }

    pub fn times(&self) -> &[f64] {
        &self.0.times
    }

    pub fn weight(&self, p: usize) -> f64 {
        self.0.weights[p]
    }

    pub fn weights(&self) -> &[f64] {
        &self.0.weights
    }

    pub fn full(&self) -> Chain {
        Chain(((1u64 << self.len()) - 1) as u32)
    }

    /// Points with `t(x) < t`.
    pub fn before(&self, t: f64) -> Chain {
        Chain::from_points(&(0..self.len()).filter(|&p| self.time(p) < t).collect::<Vec<_>>())
    }

    /// A time strictly after every grid point.
    pub fn horizon(&self) -> f64 {
        self.0.times.last().map_or(1.0, |t| t + 1.0)
    }

    /// Largest weight, the mesh size of the grid.
    pub fn mesh(&self) -> f64 {
        self.0.weights.iter().copied().fold(0.0, f64::max)
    }

    /// `w(ϰ) = ∏ w(x)`, with `w(∅) = 1`.
    pub fn chain_weight(&self, c: Chain) -> f64 {
        c.points().iter().map(|&p| self.weight(p)).product()
    }

    /// All chains in the graded basis order.
    pub fn chains(&self) -> Vec<Chain> {
        self.basis(0).chains.clone()
    }

    pub fn basis(&self, extra: usize) -> Arc<ChainBasis> {
        let mut map = self.0.bases.lock().expect("basis cache");
        map.entry(extra)
            .or_insert_with(|| Arc::new(ChainBasis::build(self.len(), self.n(), self.d(), extra)))
            .clone()
    }

    /// Dimension of `H ⊗ F`, that is `n·(1+d)^M`.
    pub fn fock_dim(&self) -> usize {
        self.n() * (1 + self.d()).pow(self.len() as u32)
    }
}

/// All 2^M chains in the graded, lexicographic order.
pub fn enumerate_chains(grid: &Grid) -> Vec<Chain> {
    grid.chains()
}

pub fn chain_weight(grid: &Grid, c: Chain) -> f64 {
    grid.chain_weight(c)
}

/// Scale parameter ξ of the Fock norm family.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ScaleParams(f64);

impl ScaleParams {
    pub fn new(xi: f64) -> Result<ScaleParams, GridError> {
        if xi > 0.0 && xi.is_finite() {
            Ok(ScaleParams(xi))
        } else {
            Err(GridError::BadScale(xi))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Blocks `a(ϰ) ∈ H ⊗ E^{⊗ϰ} ⊗ E^{extra}` over every chain, factors of `ϰ` in
/// time order followed by the extra factors in the listed order.
#[derive(Clone, Debug, PartialEq)]
pub struct FockVector {
    pub grid: Grid,
    pub extra: Vec<usize>,
    pub data: Col,
}

impl FockVector {
    pub fn zeros(grid: &Grid) -> FockVector {
        FockVector::zeros_with(grid, Vec::new())
    }

    pub fn zeros_with(grid: &Grid, extra: Vec<usize>) -> FockVector {
        let total = grid.basis(extra.len()).total;
        FockVector { grid: grid.clone(), extra, data: Col::zeros(total) }
    }

    /// The vacuum `1_∅` carrying the system vector `h` (the first basis vector if `None`).
    pub fn vacuum(grid: &Grid, h: Option<&[C64]>) -> FockVector {
        let mut v = FockVector::zeros(grid);
        match h {
            Some(h) => {
                for (i, z) in h.iter().enumerate() {
                    v.data[i] = *z;
                }
            }
            None => v.data[0] = crate::linalg::ONE,
        }
        v
    }

    pub fn from_data(grid: &Grid, extra: Vec<usize>, data: Col) -> FockVector {
        assert_eq!(data.len(), grid.basis(extra.len()).total, "data length does not match the basis");
        FockVector { grid: grid.clone(), extra, data }
    }

    pub fn basis(&self) -> Arc<ChainBasis> {
        self.grid.basis(self.extra.len())
    }

    pub fn block(&self, c: Chain) -> &[C64] {
        let r = self.basis().range(c);
        &self.data.as_slice()[r]
    }

    pub fn block_mut(&mut self, c: Chain) -> &mut [C64] {
        let r = self.basis().range(c);
        &mut self.data.as_mut_slice()[r]
    }

    /// Factor list of block `ϰ`.
    pub fn factors(&self, c: Chain) -> Vec<usize> {
        let mut f = c.points();
        f.extend_from_slice(&self.extra);
        f
    }

    /// `Σ ξ^|ϰ| w(ϰ) ‖a(ϰ)‖²`.
    pub fn scale_norm_sq(&self, xi: f64) -> f64 {
        let b = self.basis();
        b.chains
            .iter()
            .map(|&c| {
                let s: f64 = self.data.as_slice()[b.range(c)].iter().map(|z| z.norm_sqr()).sum();
                if s == 0.0 {
                    0.0
                } else {
                    xi.powi(c.len() as i32) * self.grid.chain_weight(c) * s
                }
            })
            .sum()
    }

    pub fn scale_norm(&self, xi: ScaleParams) -> f64 {
        self.scale_norm_sq(xi.value()).sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.scale_norm_sq(1.0).sqrt()
    }

    /// Fock inner product `⟨self|other⟩ = Σ w(ϰ) ⟨a(ϰ)|b(ϰ)⟩`.
    pub fn inner(&self, other: &FockVector) -> C64 {
        assert_eq!(self.extra, other.extra);
        let b = self.basis();
        let mut s = ZERO;
        for &c in &b.chains {
            let r = b.range(c);
            let w = self.grid.chain_weight(c);
            let mut t = ZERO;
            for i in r {
                t += self.data[i].conj() * other.data[i];
            }
            s += t * w;
        }
        s
    }
}

/// Point derivative `ȧ(ϑ): ϰ ↦ a(ϰ ⊔ ϑ)` for `ϰ` disjoint from `ϑ`.
///
/// The result carries `ϑ` as extra factors after the `ϰ` factors; blocks of
/// chains meeting `ϑ` are zero.
pub fn point_derivative(a: &FockVector, theta: Chain) -> FockVector {
    assert!(a.extra.is_empty(), "point derivative of an augmented vector");
    let grid = &a.grid;
    let (n, d) = (grid.n(), grid.d());
    let tpts = theta.points();
    let mut out = FockVector::zeros_with(grid, tpts.clone());
    for c in grid.chains() {
        if !c.disjoint(theta) {
            continue;
        }
        let src = a.block(c.union(theta));
        let from = c.union(theta).points();
        let mut to = c.points();
        to.extend_from_slice(&tpts);
        let moved = layout::permute_vector(src, n, d, &from, &to);
        out.block_mut(c).copy_from_slice(&moved);
    }
    out
}

/// Both sides of the discrete derivative isometry
/// `Σ_ϑ Σ_{σ∩ϑ=∅} ξ^|ϑ| η^|σ| w(ϑ)w(σ)‖a(ϑ⊔σ)‖² = ‖a‖²(ξ+η)`.
pub fn derivative_isometry(a: &FockVector, xi: f64, eta: f64) -> (f64, f64) {
    let grid = &a.grid;
    let mut lhs = 0.0;
    for theta in grid.chains() {
        let der = point_derivative(a, theta);
        for sigma in grid.chains() {
            if !sigma.disjoint(theta) {
                continue;
            }
            let s: f64 = der.block(sigma).iter().map(|z| z.norm_sqr()).sum();
            lhs += xi.powi(theta.len() as i32)
                * eta.powi(sigma.len() as i32)
                * grid.chain_weight(theta)
                * grid.chain_weight(sigma)
                * s;
        }
    }
    (lhs, a.scale_norm_sq(xi + eta))
}

/// Both sides of the sum-point property over triples of disjoint chains:
/// `Σ_ϑ w(ϑ) Σ_{ϑ₋⊔ϑ₀⊔ϑ₊=ϑ} f` and `Σ w(ϑ₋)w(ϑ₀)w(ϑ₊) f`.
pub fn sum_integral_split<F>(grid: &Grid, f: F) -> (C64, C64)
where
    F: Fn(Chain, Chain, Chain) -> C64,
{
    let chains = grid.chains();
    let mut lhs = ZERO;
    for &theta in &chains {
        let pts = theta.points();
        let k = pts.len();
        let mut part = ZERO;
        for code in 0..3usize.pow(k as u32) {
            let (mut a, mut b, mut c) = (Chain::EMPTY, Chain::EMPTY, Chain::EMPTY);
            let mut rem = code;
            for &p in &pts {
                match rem % 3 {
                    0 => a = a.union(Chain::single(p)),
                    1 => b = b.union(Chain::single(p)),
                    _ => c = c.union(Chain::single(p)),
                }
                rem /= 3;
            }
            part += f(a, b, c);
        }
        lhs += part * grid.chain_weight(theta);
    }
    let mut rhs = ZERO;
    for &a in &chains {
        for &b in &chains {
            if !a.disjoint(b) {
                continue;
            }
            for &c in &chains {
                if !c.disjoint(a) || !c.disjoint(b) {
                    continue;
                }
                rhs += f(a, b, c) * (grid.chain_weight(a) * grid.chain_weight(b) * grid.chain_weight(c));
            }
        }
    }
    (lhs, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;
    use proptest::prelude::*;

    fn g(m: usize) -> Grid {
        Grid::uniform(m, 0.5 * m as f64, 1, 1).unwrap()
    }

    #[test]
    fn enumerate_small_grids() {
        assert_eq!(enumerate_chains(&g(0)), vec![Chain::EMPTY]);
        assert_eq!(enumerate_chains(&g(1)), vec![Chain::EMPTY, Chain::single(0)]);
        assert_eq!(
            enumerate_chains(&g(2)),
            vec![Chain::EMPTY, Chain::single(0), Chain::single(1), Chain::from_points(&[0, 1])]
        );
        let c3 = enumerate_chains(&g(3));
        assert_eq!(c3[4], Chain::from_points(&[0, 1]));
        assert_eq!(c3[5], Chain::from_points(&[0, 2]));
        assert_eq!(c3[6], Chain::from_points(&[1, 2]));
    }

    #[test]
    fn weights_of_chains() {
        let gr = g(2);
        assert_eq!(chain_weight(&gr, Chain::EMPTY), 1.0);
        assert_eq!(chain_weight(&gr, Chain::single(0)), 0.5);
        assert_eq!(chain_weight(&gr, Chain::from_points(&[0, 1])), 0.25);
    }

    #[test]
    fn grid_validation() {
        assert_eq!(Grid::new(vec![0.0, 0.0], vec![1.0, 1.0], 1, 1).unwrap_err(), GridError::NonIncreasing(1));
        assert_eq!(Grid::new(vec![0.0], vec![0.0], 1, 1).unwrap_err(), GridError::NonPositiveWeight(0));
        assert_eq!(Grid::new(vec![0.0], vec![1.0], 0, 1).unwrap_err(), GridError::ZeroDimension);
        assert!(ScaleParams::new(0.0).is_err());
    }

    #[test]
    fn fock_dimension() {
        let gr = Grid::uniform(3, 1.0, 2, 2).unwrap();
        assert_eq!(gr.basis(0).total, 2 * 27);
        assert_eq!(gr.fock_dim(), 54);
    }

    #[test]
    fn scale_norm_examples() {
        let gr = g(1);
        let vac = FockVector::vacuum(&gr, None);
        assert_eq!(vac.scale_norm(ScaleParams::new(3.0).unwrap()), 1.0);
        let mut a = FockVector::zeros(&gr);
        a.block_mut(Chain::single(0))[0] = c64(1.0, 0.0);
        assert!((a.scale_norm(ScaleParams::new(2.0).unwrap()) - 1.0).abs() < 1e-15);
        assert_eq!(FockVector::zeros(&gr).norm(), 0.0);
    }

    #[test]
    fn derivative_relabels() {
        let gr = g(2);
        let mut a = FockVector::zeros(&gr);
        a.block_mut(Chain::from_points(&[0, 1]))[0] = c64(2.0, 1.0);
        a.block_mut(Chain::single(1))[0] = c64(-1.0, 0.0);
        let der0 = point_derivative(&a, Chain::EMPTY);
        assert_eq!(der0.data, a.data);
        let der = point_derivative(&a, Chain::single(1));
        assert_eq!(der.block(Chain::single(0))[0], c64(2.0, 1.0));
        assert_eq!(der.block(Chain::EMPTY)[0], c64(-1.0, 0.0));
        assert_eq!(der.block(Chain::single(1))[0], c64(0.0, 0.0));
    }

    #[test]
    fn derivative_reorders_factors_for_d2() {
        let gr = Grid::uniform(2, 1.0, 2, 1).unwrap();
        let mut a = FockVector::zeros(&gr);
        // a({x0,x1}) = e_0 ⊗ e_1 (index 0*2+1)
        a.block_mut(Chain::from_points(&[0, 1]))[1] = c64(1.0, 0.0);
        let der = point_derivative(&a, Chain::single(0));
        // block at {x1} has layout (x1, x0): e_1 ⊗ e_0 -> index 1*2+0
        assert_eq!(der.block(Chain::single(1))[2], c64(1.0, 0.0));
    }

    #[test]
    fn sum_split_closed_form() {
        let gr = Grid::uniform(1, 0.5, 1, 1).unwrap();
        let (l, r) = sum_integral_split(&gr, |_, _, _| c64(1.0, 0.0));
        assert!((l - c64(2.5, 0.0)).norm() < 1e-15);
        assert!((r - c64(2.5, 0.0)).norm() < 1e-15);
        let (l, r) = sum_integral_split(&gr, |_, _, _| c64(0.0, 0.0));
        assert_eq!((l, r), (c64(0.0, 0.0), c64(0.0, 0.0)));
        let g3 = Grid::uniform(3, 0.9, 1, 1).unwrap();
        let (l, _) = sum_integral_split(&g3, |_, _, _| c64(1.0, 0.0));
        assert!((l.re - 1.9f64.powi(3)).abs() < 1e-12);
    }

    fn hash_f(seed: u64) -> impl Fn(Chain, Chain, Chain) -> C64 {
        move |a, b, c| {
            let h = (a.0 as u64 * 131 + b.0 as u64 * 17 + c.0 as u64 * 7 + seed).wrapping_mul(0x9E3779B97F4A7C15);
            c64(((h >> 11) % 1000) as f64 / 1000.0 - 0.5, ((h >> 31) % 1000) as f64 / 1000.0)
        }
    }

    proptest! {
        #[test]
        fn sum_split_is_exact(seed in 0u64..1000, m in 0usize..=4, w in 0.05f64..1.0) {
            let gr = Grid::uniform(m, w * m as f64, 1, 1).unwrap();
            let (l, r) = sum_integral_split(&gr, hash_f(seed));
            prop_assert!((l - r).norm() <= 1e-12 * (1.0 + l.norm()));
        }

        #[test]
        fn derivative_isometry_holds(seed in 0u64..1000, m in 0usize..=3, d in 1usize..=2, xi in 0.1f64..3.0, eta in 0.1f64..3.0) {
            let gr = Grid::uniform(m, 0.7 * m as f64, d, 1).unwrap();
            let mut a = FockVector::zeros(&gr);
            for (i, z) in a.data.iter_mut().enumerate() {
                let h = ((i as u64 + 1) * (seed + 3)).wrapping_mul(0x9E3779B97F4A7C15);
                *z = c64(((h >> 13) % 97) as f64 / 97.0 - 0.5, ((h >> 37) % 89) as f64 / 89.0 - 0.5);
            }
            let (l, r) = derivative_isometry(&a, xi, eta);
            prop_assert!((l - r).abs() <= 1e-12 * (1.0 + r));
        }

        #[test]
        fn scale_norm_monotone(seed in 0u64..500, x1 in 0.1f64..2.0, dx in 0.0f64..2.0) {
            let gr = Grid::uniform(3, 1.0, 1, 1).unwrap();
            let mut a = FockVector::zeros(&gr);
            for (i, z) in a.data.iter_mut().enumerate() {
                *z = c64(((i as u64 * 7 + seed) % 11) as f64 - 5.0, 0.0);
            }
            prop_assert!(a.scale_norm_sq(x1) <= a.scale_norm_sq(x1 + dx) + 1e-12);
        }
    }
}
