//! Structure maps, chronological compositions of maps and the flows
//! `j^t(A) = ι(τ⁰ ∘ φ(x₁, φ(x₂, …, φ(x_m, A))))`.

use rayon::prelude::*;
use thiserror::Error;

use crate::chain_space::layout::embed_block;
use crate::chain_space::Grid;
use crate::evolution::{
    pseudo_unitarity_check, role_block, solve_evolution, EvolutionError, GeneratorField, MapKind, NormBound, ScenarioConfig,
};
use crate::fock_rep::{
    derivative_table, epsilon_bound, iota, multiple_integral, operator_scale_norm, single_integrals, FockError, FockOperator,
    OperatorFamily,
};
use crate::ito_calculus::{PointTriangle, Slot, TriangularMatrix};
use crate::kernel_algebra::{all_tables, matrix_from_pairs, Kernel, Role, Table};
use crate::linalg::{c64, kron, max_abs, spectral_norm, Mat, ONE};
use crate::sample;

#[derive(Debug, Error, PartialEq)]
pub enum FlowError {
    #[error("structure map has {got} points for a grid of {expected}")]
    Length { expected: usize, got: usize },
    #[error("point {0}: image has the wrong shape")]
    Shape(usize),
    #[error("point {0}: corner components of φ(x, A) must equal A")]
    Corner(usize),
    #[error("point {0}: φ is not multiplicative on the generators (defect {1:e})")]
    NotMultiplicative(usize, f64),
    #[error("parameter out of range: {0}")]
    Domain(String),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// Order of the nested map composition over the points of a table.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub enum NestingOrder {
    /// `φ(x₁, φ(x₂, …))` with `x₁` the earliest point.
    #[default]
    EarliestOutermost,
    LatestOutermost,
}

fn unit(n: usize, i: usize, j: usize) -> Mat {
    let mut e = Mat::zeros(n, n);
    e[(i, j)] = ONE;
    e
}

fn expand<F: Fn(&Mat) -> TriangularMatrix>(n: usize, f: F) -> Vec<TriangularMatrix> {
    (0..n * n).map(|k| f(&unit(n, k / n, k % n))).collect()
}

/// Per-point linear maps `φ(x): M_n → triangular matrices over H ⊗ E(x)`,
/// stored by their values on matrix units.
#[derive(Clone, Debug)]
pub struct StructureMap {
    pub grid: Grid,
    images: Vec<Vec<TriangularMatrix>>,
    /// Algebra generators; empty means the full matrix algebra.
    pub generators: Vec<Mat>,
    pub multiplicative: bool,
}

impl StructureMap {
    /// Build from a per-point linear map. When `multiplicative` is set, the
    /// unital ⋆-homomorphism property is verified on the generators and their
    /// pairwise products.
    pub fn from_fn<F>(grid: &Grid, f: F, generators: Vec<Mat>, multiplicative: bool) -> Result<StructureMap, FlowError>
    where
        F: Fn(usize, &Mat) -> TriangularMatrix,
    {
        let (n, d) = (grid.n(), grid.d());
        let images: Vec<Vec<TriangularMatrix>> = (0..grid.len()).map(|p| expand(n, |a| f(p, a))).collect();
        for (p, im) in images.iter().enumerate() {
            for (k, t) in im.iter().enumerate() {
                if (t.n, t.d) != (n, d) {
                    return Err(FlowError::Shape(p));
                }
                let e = unit(n, k / n, k % n);
                let bad = |s| max_abs(&(t.block(s, s) - &e)) > 1e-12;
                if bad(Slot::Minus) || bad(Slot::Plus) || t.lower_defect() > 1e-12 {
                    return Err(FlowError::Corner(p));
                }
            }
        }
        for g in &generators {
            if g.shape() != (n, n) {
                return Err(FlowError::Shape(0));
            }
        }
        let map = StructureMap { grid: grid.clone(), images, generators, multiplicative };
        if multiplicative {
            for p in 0..grid.len() {
                let e = map.multiplicativity_defect(p);
                if e > 1e-12 {
                    return Err(FlowError::NotMultiplicative(p, e));
                }
            }
        }
        Ok(map)
    }

    /// `φ(x, A) = Σ_k 𝐋_k^⋆(x)(A ⊗ 𝟏)𝐑_k(x)`.
    pub fn sandwich(
        grid: &Grid,
        terms: &[Vec<(TriangularMatrix, TriangularMatrix)>],
        generators: Vec<Mat>,
        multiplicative: bool,
    ) -> Result<StructureMap, FlowError> {
        if terms.len() != grid.len() {
            return Err(FlowError::Length { expected: grid.len(), got: terms.len() });
        }
        let d = grid.d();
        StructureMap::from_fn(
            grid,
            |p, a| {
                let lifted = TriangularMatrix::lift(a, d);
                let mut acc = TriangularMatrix::zeros(grid.n(), d);
                for (l, r) in &terms[p] {
                    acc = acc.add(&l.star().mul(&lifted).mul(r));
                }
                acc
            },
            generators,
            multiplicative,
        )
    }

    /// `φ(x, A) = 𝐅^⋆(x)(A ⊗ 𝟏)𝐅(x)`, flagged multiplicative when every `𝐅(x)`
    /// is pseudo-unitary.
    pub fn spatial(f: &GeneratorField) -> StructureMap {
        let pu = pseudo_unitarity_check(f.points()) <= 1e-12;
        let terms: Vec<_> = f.points().iter().map(|x| vec![(x.clone(), x.clone())]).collect();
        StructureMap::sandwich(&f.grid, &terms, Vec::new(), pu).expect("a pseudo-unitary sandwich is multiplicative")
    }

    /// `φ(x, A) = A ⊗ 𝟏(x)`.
    pub fn trivial(grid: &Grid) -> StructureMap {
        StructureMap::spatial(&GeneratorField::identity(grid))
    }

    pub fn apply(&self, p: usize, a: &Mat) -> TriangularMatrix {
        let n = self.grid.n();
        let mut acc = TriangularMatrix::zeros(n, self.grid.d());
        for (k, im) in self.images[p].iter().enumerate() {
            let z = a[(k / n, k % n)];
            if z != c64(0.0, 0.0) {
                acc = acc.add(&im.scale(z));
            }
        }
        acc
    }

    /// `λ(x, A) = φ(x, A) − A ⊗ 𝟏(x)`.
    pub fn lambda(&self, p: usize, a: &Mat) -> TriangularMatrix {
        self.apply(p, a).sub(&TriangularMatrix::lift(a, self.grid.d()))
    }

    /// Generators, or matrix units for the full algebra.
    pub fn generator_set(&self) -> Vec<Mat> {
        let n = self.grid.n();
        if self.generators.is_empty() {
            (0..n * n).map(|k| unit(n, k / n, k % n)).collect()
        } else {
            self.generators.clone()
        }
    }

    /// Largest of `‖φ(I) − 𝐈‖`, `‖φ(A*) − φ(A)^⋆‖` and `‖φ(AB) − φ(A)φ(B)‖`
    /// over generators and their pairwise products.
    pub fn multiplicativity_defect(&self, p: usize) -> f64 {
        let (n, d) = (self.grid.n(), self.grid.d());
        let gens = self.generator_set();
        let mut set = gens.clone();
        for a in &gens {
            for b in &gens {
                set.push(a * b);
            }
        }
        let mut worst = max_abs(&(self.apply(p, &Mat::identity(n, n)).m - TriangularMatrix::identity(n, d).m));
        for a in &set {
            let fa = self.apply(p, a);
            worst = worst.max(max_abs(&(self.apply(p, &a.adjoint()).m - fa.star().m)));
            for b in &gens {
                worst = worst.max(max_abs(&(self.apply(p, &(a * b)).m - fa.mul(&self.apply(p, b)).m)));
            }
        }
        worst
    }

    /// Lower estimates of the map norms `sup ‖λ_r(x, A)‖/‖A‖` for the four
    /// roles, and of `‖φ₀⁰(x)‖`, from generators, matrix units, the identity and
    /// random unitary and Gaussian samples.
    pub fn map_norms(&self, p: usize, samples: usize, seed: u64) -> ([f64; 4], f64) {
        let n = self.grid.n();
        let mut rng = sample::rng(seed ^ (p as u64).wrapping_mul(0x9e37_79b9));
        let mut probes = self.generator_set();
        probes.extend((0..n * n).map(|k| unit(n, k / n, k % n)));
        probes.push(Mat::identity(n, n));
        for _ in 0..samples {
            probes.push(sample::unitary(&mut rng, n));
            probes.push(sample::gaussian(&mut rng, n, n));
        }
        let mut lam = [0.0f64; 4];
        let mut gauge = 0.0f64;
        for a in probes {
            let na = spectral_norm(&a);
            if na == 0.0 {
                continue;
            }
            let l = self.lambda(p, &a);
            for (k, role) in Role::ALL.into_iter().enumerate() {
                lam[k] = lam[k].max(spectral_norm(&role_block(&l, role)) / na);
            }
            gauge = gauge.max(spectral_norm(&self.apply(p, &a).block(Slot::Zero, Slot::Zero)) / na);
        }
        (lam, gauge)
    }

    fn units(&self, p: usize, role: Role) -> Vec<Mat> {
        self.images[p].iter().map(|t| role_block(t, role)).collect()
    }
}

/// Linear initial map `τ⁰` on `M_n`, stored by its values on matrix units.
#[derive(Clone, Debug)]
pub struct InitialMap {
    images: Vec<Mat>,
}

impl InitialMap {
    pub fn identity(n: usize) -> InitialMap {
        InitialMap { images: (0..n * n).map(|k| unit(n, k / n, k % n)).collect() }
    }

    pub fn from_fn<F: Fn(&Mat) -> Mat>(n: usize, f: F) -> InitialMap {
        InitialMap { images: (0..n * n).map(|k| f(&unit(n, k / n, k % n))).collect() }
    }

    /// `A ↦ V*AV`.
    pub fn conjugation(v: &Mat) -> InitialMap {
        InitialMap::from_fn(v.nrows(), |a| v.adjoint() * a * v)
    }

    pub fn apply(&self, a: &Mat) -> Mat {
        let n = a.nrows();
        let mut acc = Mat::zeros(n, n);
        for (k, im) in self.images.iter().enumerate() {
            acc += im * a[(k / n, k % n)];
        }
        acc
    }

    /// Lower estimate of `sup ‖τ⁰(A)‖/‖A‖` by sampling.
    pub fn norm_estimate(&self, samples: usize, seed: u64) -> f64 {
        let n = (self.images.len() as f64).sqrt() as usize;
        let mut rng = sample::rng(seed);
        let mut probes: Vec<Mat> = (0..n * n).map(|k| unit(n, k / n, k % n)).collect();
        probes.push(Mat::identity(n, n));
        for _ in 0..samples {
            probes.push(sample::unitary(&mut rng, n));
            probes.push(sample::gaussian(&mut rng, n, n));
        }
        probes.iter().map(|a| spectral_norm(&self.apply(a)) / spectral_norm(a)).fold(0.0, f64::max)
    }
}

/// Operator block with its input and output factor lists after `H`.
struct Nested {
    m: Mat,
    kin: Vec<usize>,
    kout: Vec<usize>,
}

impl Nested {
    /// `Σ_ij C_ij ⊗ B_ij`: a map given on matrix units, tensored with the
    /// identity on the factors already present.
    fn map(&self, units: &[Mat], n: usize) -> Mat {
        let ro = self.m.nrows() / n;
        let co = self.m.ncols() / n;
        let mut acc: Option<Mat> = None;
        for (k, c) in units.iter().enumerate() {
            let b = self.m.view(((k / n) * ro, (k % n) * co), (ro, co)).into_owned();
            if b.iter().all(|z| *z == c64(0.0, 0.0)) || c.iter().all(|z| *z == c64(0.0, 0.0)) {
                continue;
            }
            let t = kron(c, &b);
            match &mut acc {
                Some(x) => *x += t,
                None => acc = Some(t),
            }
        }
        acc.unwrap_or_else(|| {
            let (r, c) = units[0].shape();
            Mat::zeros(r * ro, c * co)
        })
    }

    fn step(self, map: &StructureMap, p: usize, role: Role) -> Nested {
        let m = self.map(&map.units(p, role), map.grid.n());
        let mut kin = self.kin;
        let mut kout = self.kout;
        if matches!(role, Role::Ann | Role::Gauge) {
            kin.insert(0, p);
        }
        if matches!(role, Role::Gauge | Role::Cre) {
            kout.insert(0, p);
        }
        Nested { m, kin, kout }
    }
}

fn admissible(grid: &Grid, t: f64, tab: &Table) -> bool {
    let past = grid.before(t);
    tab.ann.union(tab.time).union(tab.cre).subset_of(past)
}

// Nested composition for one table, starting from `start`; points already in
// the start lists are skipped.
fn nested_block(map: &StructureMap, tau0: &InitialMap, start: Nested, tab: &Table, t: f64, order: NestingOrder) -> Mat {
    let grid = &map.grid;
    let n = grid.n();
    let used: Vec<usize> = start.kin.iter().chain(&start.kout).copied().collect();
    let mut pts: Vec<(usize, Role)> = grid
        .before(t)
        .points()
        .into_iter()
        .filter(|p| !used.contains(p))
        .filter_map(|p| tab.role_of(p).map(|r| (p, r)))
        .collect();
    if order == NestingOrder::EarliestOutermost {
        pts.reverse();
    }
    let mut cur = start;
    for (p, r) in pts {
        cur = cur.step(map, p, r);
    }
    let m = cur.map(&tau0.images, n);
    embed_block(&m, n, grid.d(), &cur.kin, &cur.kout, &tab.in_layout(), &tab.out_layout())
}

/// `T^t(𝛋) = τ⁰[φ(x₁, φ(x₂, …, φ(x_m, A)))]` over the points of `𝛋` before
/// `t`, identity-extended on later gauge points.
pub fn flow_kernel(t: f64, map: &StructureMap, tau0: &InitialMap, a: &Mat) -> Kernel {
    flow_kernel_ordered(t, map, tau0, a, NestingOrder::EarliestOutermost)
}

pub fn flow_kernel_ordered(t: f64, map: &StructureMap, tau0: &InitialMap, a: &Mat, order: NestingOrder) -> Kernel {
    let grid = &map.grid;
    let tabs: Vec<Table> = all_tables(grid).into_iter().filter(|x| admissible(grid, t, x)).collect();
    let blocks: Vec<(Table, Mat)> = tabs
        .into_par_iter()
        .map(|tab| {
            let start = Nested { m: a.clone(), kin: vec![], kout: vec![] };
            (tab, nested_block(map, tau0, start, &tab, t, order))
        })
        .collect();
    let mut k = Kernel::zero(grid);
    for (tab, b) in blocks {
        if b.iter().any(|z| *z != c64(0.0, 0.0)) {
            k.insert(tab, b).expect("layout follows the table");
        }
    }
    k
}

/// `j^t(A) = ι(T^t)`.
pub fn flow(t: f64, map: &StructureMap, tau0: &InitialMap, a: &Mat) -> FockOperator {
    iota(&flow_kernel(t, map, tau0, a))
}

/// `max |T^{t₊}(𝛋) − T^t(𝛋) ∘ φ(x)|` at the point `p`, with `t = t(x)`: the
/// one-step recurrence against the direct composition.
pub fn recurrence_defect(map: &StructureMap, tau0: &InitialMap, a: &Mat, p: usize) -> f64 {
    let grid = &map.grid;
    let t = grid.time(p);
    let next = grid.times().get(p + 1).copied().unwrap_or(f64::INFINITY);
    let t_plus = if next.is_finite() { (t + next) / 2.0 } else { t + grid.weight(p) };
    let direct = flow_kernel(t_plus, map, tau0, a);
    let mut worst = 0.0f64;
    for tab in all_tables(grid).into_iter().filter(|x| admissible(grid, t_plus, x)) {
        let start = match tab.role_of(p) {
            None => Nested { m: a.clone(), kin: vec![], kout: vec![] },
            Some(r) => Nested { m: a.clone(), kin: vec![], kout: vec![] }.step(map, p, r),
        };
        let b = nested_block(map, tau0, start, &tab, t, NestingOrder::EarliestOutermost);
        worst = worst.max(max_abs(&(b - direct.block(&tab))));
    }
    worst
}

/// `‖j^t(I) − 1‖`.
pub fn unitality_defect(t: f64, map: &StructureMap, tau0: &InitialMap) -> f64 {
    let n = map.grid.n();
    flow(t, map, tau0, &Mat::identity(n, n)).sub(&FockOperator::identity(&map.grid)).hilbert_norm()
}

/// `‖j^t(A*) − j^t(A)*‖`.
pub fn hermiticity_defect(t: f64, map: &StructureMap, tau0: &InitialMap, a: &Mat) -> f64 {
    flow(t, map, tau0, &a.adjoint()).sub(&flow(t, map, tau0, a).adjoint()).hilbert_norm()
}

/// `max_𝛋 ‖T^t(A*A) − (T^t(A)^⋆·T^t(A))(𝛋)‖`: the kernel-level homomorphism property.
pub fn kernel_homomorphism_defect(t: f64, map: &StructureMap, tau0: &InitialMap, a: &Mat) -> f64 {
    let ta = flow_kernel(t, map, tau0, a);
    let prod = ta.adjoint().product(&ta).expect("kernels without extras compose");
    flow_kernel(t, map, tau0, &(a.adjoint() * a)).distance(&prod)
}

/// `‖j^t(A*A) − j^t(A)*j^t(A)‖_{ξ⁺}^{ξ₋}`.
pub fn homomorphism_defect(t: f64, map: &StructureMap, tau0: &InitialMap, a: &Mat, xi_plus: f64, xi_minus: f64) -> f64 {
    let ja = flow(t, map, tau0, a);
    let jaa = flow(t, map, tau0, &(a.adjoint() * a));
    let prod = ja.adjoint().compose(&ja).expect("no extras");
    operator_scale_norm(&jaa.sub(&prod), xi_plus, xi_minus)
}

/// `‖j^t(A) − U^{t*}(A ⊗ 1)U^t‖_{ξ⁺}^{ξ₋}` for the spatial map of `f`.
pub fn conjugation_defect(t: f64, f: &GeneratorField, a: &Mat, xi_plus: f64, xi_minus: f64) -> f64 {
    let grid = &f.grid;
    let n = grid.n();
    let j = flow(t, &StructureMap::spatial(f), &InitialMap::identity(n), a);
    let u = solve_evolution(t, f, &Mat::identity(n, n));
    let lifted = iota(&Kernel::lift(grid, a));
    let conj = u.adjoint().compose(&lifted).and_then(|x| x.compose(&u)).expect("no extras");
    operator_scale_norm(&j.sub(&conj), xi_plus, xi_minus)
}

/// Triangular matrix of point operators `F_ν^μ(x) ⊗ 1` with identity corners.
fn scattering_triangle(grid: &Grid, f: &TriangularMatrix, p: usize) -> PointTriangle {
    let id = FockOperator::identity(grid);
    let op = |r| crate::evolution::point_operator(grid, p, r, &role_block(f, r));
    PointTriangle { p, minus: id.clone(), plus: id, ann: op(Role::Ann), time: op(Role::Time), gauge: op(Role::Gauge), cre: op(Role::Cre) }
}

/// `U^{t*}B^tU^t − B⁰ − Σ_x Λ_x(𝐔^⋆𝐒^⋆(𝐁 + 𝐃)𝐒𝐔 − 𝐔^⋆𝐁𝐔)` in the `(ξ⁺, ξ₋)`
/// norm, for `B^t = Λ_{[0,t)}(b)` with QS derivatives `𝐃`, `U^t` the
/// evolution of `f` from the identity and `𝐒(x) = 𝐅(x)`.
pub fn transformed_process_defect(
    t: f64,
    f: &GeneratorField,
    b: &OperatorFamily,
    xi_plus: f64,
    xi_minus: f64,
) -> Result<f64, FlowError> {
    let grid = &f.grid;
    let n = grid.n();
    let id = Mat::identity(n, n);
    let dt = derivative_table(b);
    let mut table = crate::fock_rep::IntegrandTable::zero(grid);
    for p in grid.before(t).points() {
        let tp = grid.time(p);
        let u = PointTriangle::lift(&solve_evolution(tp, f, &id), p);
        let bp = PointTriangle::lift(&multiple_integral(tp, b), p);
        let mut g = bp.clone();
        for role in Role::ALL {
            let d = dt.get(p, role).expect("derivative table is full");
            match role {
                Role::Ann => g.ann = g.ann.add(d),
                Role::Time => g.time = g.time.add(d),
                Role::Gauge => g.gauge = g.gauge.add(d),
                Role::Cre => g.cre = g.cre.add(d),
            }
        }
        let s = scattering_triangle(grid, f.point(p), p);
        let us = u.star();
        let lhs = us.mul(&s.star())?.mul(&g)?.mul(&s)?.mul(&u)?;
        let rhs = us.mul(&bp)?.mul(&u)?;
        lhs.sub(&rhs).store(&mut table)?;
    }
    let ut = solve_evolution(t, f, &id);
    let yt = ut.adjoint().compose(&multiple_integral(t, b))?.compose(&ut)?;
    let y0 = multiple_integral(0.0, b);
    Ok(operator_scale_norm(&yt.sub(&y0).sub(&single_integrals(t, &table)), xi_plus, xi_minus))
}

/// `‖j^t(A)‖_{ξ⁺}^{ξ₋} ≤ ‖τ⁰‖ exp{Σ w(‖λ₊⁻‖ + (‖λ₊⁰‖² + ‖λ₀⁻‖²)/2ε)}` for
/// `‖A‖ ≤ 1`. Map norms are estimated from below by sampling, so a pass holds
/// for the exact norms too. `ε` defaults to `ε(ξ⁺, ξ₋)` at `g² = max ‖φ₀⁰‖`
/// (and at least 1 when the grid extends past `t`).
#[allow(clippy::too_many_arguments)]
pub fn flow_norm_bound_check(
    map: &StructureMap,
    tau0: &InitialMap,
    a: &Mat,
    t: f64,
    xi_plus: f64,
    xi_minus: f64,
    eps: Option<f64>,
    seed: u64,
) -> Result<NormBound, FlowError> {
    let grid = &map.grid;
    if xi_plus <= 0.0 || xi_minus <= 0.0 {
        return Err(FlowError::Domain(format!("scale parameters ({xi_plus}, {xi_minus}) must be positive")));
    }
    let na = spectral_norm(a);
    if na > 1.0 + 1e-12 {
        return Err(FlowError::Domain(format!("‖A‖ = {na} exceeds 1")));
    }
    let past = grid.before(t);
    let norms: Vec<([f64; 4], f64)> = past.points().iter().map(|&p| map.map_norms(p, 16, seed)).collect();
    let mut gauge = norms.iter().map(|x| x.1).fold(0.0, f64::max);
    if past != grid.full() {
        gauge = gauge.max(1.0);
    }
    let emax = epsilon_bound(xi_plus, xi_minus, gauge.sqrt())
        .ok_or_else(|| FlowError::Domain(format!("ξ⁺/ξ₋ = {} must exceed ‖φ₀⁰‖ = {gauge}", xi_plus / xi_minus)))?;
    let eps = match eps {
        None => emax,
        Some(e) if e > 0.0 && e <= emax => e,
        Some(e) => return Err(FlowError::Domain(format!("ε = {e} outside (0, {emax}]"))),
    };
    // Role::ALL is [ann, time, gauge, cre]
    let rate: f64 = past
        .points()
        .iter()
        .zip(&norms)
        .map(|(&p, (l, _))| grid.weight(p) * (l[1] + (l[0] * l[0] + l[3] * l[3]) / (2.0 * eps)))
        .sum();
    let bound = tau0.norm_estimate(16, seed) * rate.exp();
    let norm = operator_scale_norm(&flow(t, map, tau0, a), xi_plus, xi_minus);
    Ok(NormBound { norm, bound, eps, holds: norm <= bound * (1.0 + 1e-9) })
}

/// Smallest singular value of `A ↦ j^t(A)` on `M_n`, relative to the largest:
/// positive exactly when the flow is injective on the matrix algebra.
pub fn faithfulness(t: f64, map: &StructureMap, tau0: &InitialMap) -> f64 {
    let n = map.grid.n();
    let cols: Vec<crate::linalg::Col> = (0..n * n)
        .map(|k| {
            let j = flow(t, map, tau0, &unit(n, k / n, k % n));
            crate::linalg::Col::from_column_slice(j.m.as_slice())
        })
        .collect();
    let s = Mat::from_columns(&cols).svd(false, false).singular_values;
    let hi = s.max();
    if hi == 0.0 {
        0.0
    } else {
        s.min() / hi
    }
}

/// Structure map, algebra generators and swept operator of a scenario's flow section.
pub fn scenario_map(c: &ScenarioConfig, grid: &Grid) -> Result<(StructureMap, Mat), FlowError> {
    let sec = c.flow.as_ref().ok_or_else(|| FlowError::Domain("scenario has no [flow] section".into()))?;
    let (n, d) = (c.system.dim, c.noise.dim);
    let parse = |m: &Vec<Vec<[f64; 2]>>, what: &str| -> Result<Mat, FlowError> {
        let x = matrix_from_pairs(m).map_err(|e| FlowError::Domain(format!("{what}: {e}")))?;
        if x.shape() != (n, n) {
            return Err(FlowError::Domain(format!("{what}: shape {}×{}, expected {n}×{n}", x.nrows(), x.ncols())));
        }
        Ok(x)
    };
    let gens = sec.generators.iter().enumerate().map(|(k, g)| parse(g, &format!("flow.generators[{k}]"))).collect::<Result<Vec<_>, _>>()?;
    let op = match (&sec.operator, gens.first()) {
        (Some(m), _) => parse(m, "flow.operator")?,
        (None, Some(g)) => g.clone(),
        (None, None) => return Err(FlowError::Domain("flow.operator is required when no generators are listed".into())),
    };
    let map = match sec.kind {
        MapKind::Spatial => {
            let f = c.field(grid)?;
            let pu = pseudo_unitarity_check(f.points()) <= 1e-12;
            let terms: Vec<_> = f.points().iter().map(|x| vec![(x.clone(), x.clone())]).collect();
            StructureMap::sandwich(grid, &terms, gens, pu)?
        }
        MapKind::CustomBlocks => {
            let id = TriangularMatrix::identity(n, d);
            let mut pair = Vec::with_capacity(sec.terms.len());
            for term in &sec.terms {
                pair.push((term.left.triangular(n, d)?.add(&id), term.right.triangular(n, d)?.add(&id)));
            }
            StructureMap::sandwich(grid, &vec![pair; grid.len()], gens, false)?
        }
    };
    Ok((map, op))
}
