//! Chronological products `F(x_m)·…·F(x_1)·T⁰` at kernel level, their
//! representations, and the convergent and exact checks built on them.

use rayon::prelude::*;

use super::{EvolutionError, GeneratorField};
use crate::chain_space::layout::embed_block;
use crate::chain_space::{Chain, Grid};
use crate::fock_rep::local::{combination_scale_norm, LocalProduct, LocalTerm};
use crate::fock_rep::{epsilon_bound, iota, operator_scale_norm, single_integrals, FockOperator, IntegrandTable};
use crate::ito_calculus::{Slot, TriangularMatrix};
use crate::kernel_algebra::{all_tables, product_kernel, Kernel, Role, Table};
use crate::linalg::{kron, spectral_norm, Col, Mat, ONE, ZERO};

/// The block of `𝐅(x)` used by a point in the given slot.
pub fn role_block(f: &TriangularMatrix, role: Role) -> Mat {
    match role {
        Role::Ann => f.block(Slot::Minus, Slot::Zero),
        Role::Time => f.block(Slot::Minus, Slot::Plus),
        Role::Gauge => f.block(Slot::Zero, Slot::Zero),
        Role::Cre => f.block(Slot::Zero, Slot::Plus),
    }
}

/// Current block with its input and output factor lists.
struct State {
    m: Mat,
    kin: Vec<usize>,
    kout: Vec<usize>,
}

impl State {
    fn extend(&mut self, p: usize, n: usize, d: usize) {
        let mut kin = self.kin.clone();
        let mut kout = self.kout.clone();
        kin.push(p);
        kout.push(p);
        self.m = embed_block(&self.m, n, d, &self.kin, &self.kout, &kin, &kout);
        self.kin = kin;
        self.kout = kout;
    }

    /// Semitensor step `(F_r ⊗ I)(M ⊗ I)` for point `p` in slot `role`.
    fn apply(&mut self, p: usize, role: Role, fr: &Mat, n: usize, d: usize) {
        let input = matches!(role, Role::Ann | Role::Gauge);
        let output = matches!(role, Role::Gauge | Role::Cre);
        if input {
            self.extend(p, n, d);
        }
        let in_from = if input { vec![p] } else { vec![] };
        let out_from = if output { vec![p] } else { vec![] };
        let mut out_to: Vec<usize> = self.kout.iter().copied().filter(|&q| q != p).collect();
        if output {
            out_to.push(p);
        }
        let e = embed_block(fr, n, d, &in_from, &out_from, &self.kout, &out_to);
        self.m = e * &self.m;
        self.kout = out_to;
    }

    fn into_block(self, k: &Kernel, tab: &Table, n: usize, d: usize) -> Mat {
        embed_block(&self.m, n, d, &self.kin, &self.kout, &k.in_factors(tab), &k.out_factors(tab))
    }
}

fn is_zero(m: &Mat) -> bool {
    m.iter().all(|z| *z == ZERO)
}

/// `T^t(𝛋) = F(𝐱_m)·…·F(𝐱_1)·T⁰` over the points before `t`, identity
/// extension on later points (which may only sit in the gauge slot).
pub fn chronological_kernel(t: f64, f: &GeneratorField, t0: &Mat) -> Kernel {
    let grid = &f.grid;
    let (n, d) = (grid.n(), grid.d());
    let active = grid.before(t);
    let mut k = Kernel::zero(grid);
    let tables: Vec<Table> = all_tables(grid)
        .into_iter()
        .filter(|tab| tab.support().minus(tab.gauge).subset_of(active))
        .collect();
    let blocks: Vec<(Table, Mat)> = tables
        .par_iter()
        .filter_map(|tab| {
            let mut st = State { m: t0.clone(), kin: vec![], kout: vec![] };
            for p in tab.support().points() {
                let role = tab.role_of(p).expect("point of the support");
                if !active.contains(p) {
                    st.extend(p, n, d);
                    continue;
                }
                let fr = role_block(f.point(p), role);
                if is_zero(&fr) {
                    return None;
                }
                st.apply(p, role, &fr, n, d);
            }
            Some((*tab, st.into_block(&k, tab, n, d)))
        })
        .collect();
    for (tab, b) in blocks {
        k.insert(tab, b).expect("layout follows the table");
    }
    k
}

/// One recurrence step `T^{t₊}(𝛋) = [F_{t(x)}·T^t](𝛋)` at point `p`.
///
/// Tables of `k` containing `p` are replaced: the step reads `k` only on
/// tables avoiding `p` and writes every slot of `p` from them.
pub fn chronological_step(k: &Kernel, p: usize, fp: &TriangularMatrix) -> Kernel {
    let grid = &k.grid;
    let (n, d) = (grid.n(), grid.d());
    let mut out = Kernel::zero(grid);
    for (tab, b) in k.iter() {
        if tab.role_of(p).is_some() {
            continue;
        }
        out.insert(*tab, b.clone()).expect("same layout");
        for role in Role::ALL {
            let fr = role_block(fp, role);
            if is_zero(&fr) {
                continue;
            }
            let target = tab.with(p, role);
            let mut st = State { m: b.clone(), kin: k.in_factors(tab), kout: k.out_factors(tab) };
            st.apply(p, role, &fr, n, d);
            let blk = st.into_block(&out, &target, n, d);
            out.insert(target, blk).expect("layout follows the table");
        }
    }
    out
}

/// `U^t = ι(T^t)`.
pub fn solve_evolution(t: f64, f: &GeneratorField, t0: &Mat) -> FockOperator {
    iota(&chronological_kernel(t, f, t0))
}

/// Matrix-free `U^t` in orthonormal product coordinates.
pub fn local_evolution(t: f64, f: &GeneratorField, t0: &Mat) -> LocalProduct {
    let grid = &f.grid;
    let active: Vec<bool> = (0..grid.len()).map(|p| grid.time(p) < t).collect();
    LocalProduct::chronological(grid, f.points(), t0, &active)
}

/// `max_𝛋 ‖(T^⋆·T)(𝛋) − I(𝛋)‖`.
pub fn kernel_isometry_defect(k: &Kernel) -> f64 {
    let p = k.adjoint().product(k).expect("kernels without extras compose");
    p.distance(&Kernel::unit(&k.grid))
}

/// `‖U^{t*}U^t − 1‖_{ξ⁺}^{ξ₋}` from the dense representation.
pub fn unitarity_defect(t: f64, f: &GeneratorField, xi_plus: f64, xi_minus: f64) -> f64 {
    let u = solve_evolution(t, f, &Mat::identity(f.grid.n(), f.grid.n()));
    let uu = u.adjoint().compose(&u).expect("no extras");
    operator_scale_norm(&uu.sub(&FockOperator::identity(&f.grid)), xi_plus, xi_minus)
}

/// Matrix-free version of [`unitarity_defect`] by power iteration.
pub fn unitarity_defect_local(t: f64, f: &GeneratorField, xi_plus: f64, xi_minus: f64, seed: u64) -> f64 {
    let u = local_evolution(t, f, &Mat::identity(f.grid.n(), f.grid.n()));
    let terms = vec![LocalTerm { coeff: ONE, parts: vec![(u.clone(), true), (u, false)] }];
    combination_scale_norm(-ONE, &terms, xi_plus, xi_minus, seed)
}

/// System block of `⟨∅|U|∅⟩` from a matrix-free product.
pub fn vacuum_block(u: &LocalProduct) -> Mat {
    let n = u.n;
    let s = u.dim() / n;
    let mut out = Mat::zeros(n, n);
    for k in 0..n {
        let mut e = Col::zeros(u.dim());
        e[k * s] = ONE;
        let v = u.apply(&e);
        for h in 0..n {
            out[(h, k)] = v[h * s];
        }
    }
    out
}

/// `U^t − U⁰ − Λ^t(𝐋 ⊙ U)` in the `(ξ⁺, ξ₋)` norm, with `U⁰ = T⁰ ⊗ 1`.
pub fn integral_equation_defect(t: f64, f: &GeneratorField, t0: &Mat, xi_plus: f64, xi_minus: f64) -> f64 {
    let grid = &f.grid;
    let mut table = IntegrandTable::zero(grid);
    let past = grid.before(t);
    let mut procs = Vec::with_capacity(grid.len());
    for p in 0..grid.len() {
        procs.push(solve_evolution(grid.time(p), f, t0));
        if !past.contains(p) {
            continue;
        }
        let l = f.generator(p);
        for role in Role::ALL {
            table.set(p, role, point_operator(grid, p, role, &role_block(&l, role))).expect("slot extras");
        }
    }
    let table = table.compose_process(&procs).expect("no extras on the process");
    let u0 = iota(&Kernel::lift(grid, t0));
    let ut = solve_evolution(t, f, t0);
    operator_scale_norm(&ut.sub(&u0).sub(&single_integrals(t, &table)), xi_plus, xi_minus)
}

/// `B ⊗ 1` as an operator with the slot's extra factor at `p`.
pub fn point_operator(grid: &Grid, p: usize, role: Role, b: &Mat) -> FockOperator {
    let (n, d) = (grid.n(), grid.d());
    let ein: Vec<usize> = if matches!(role, Role::Ann | Role::Gauge) { vec![p] } else { vec![] };
    let eout: Vec<usize> = if matches!(role, Role::Gauge | Role::Cre) { vec![p] } else { vec![] };
    let mut k = Kernel::zero_with(grid, ein.clone(), eout.clone());
    for gauge in grid.full().minus(Chain::single(p)).subsets() {
        let tab = Table { gauge, ..Table::EMPTY };
        let blk = embed_block(b, n, d, &ein, &eout, &k.in_factors(&tab), &k.out_factors(&tab));
        k.insert(tab, blk).expect("layout follows the table");
    }
    iota(&k)
}

/// Generators `I_H ⊗ l(x)` for a noise-only table `l` with `n = 1`.
pub fn system_trivial_field(grid: &Grid, l: &[TriangularMatrix]) -> Result<GeneratorField, EvolutionError> {
    let n = grid.n();
    let id = Mat::identity(n, n);
    let lifted = l
        .iter()
        .map(|x| {
            let b = |r, c| kron(&id, &x.block(r, c));
            TriangularMatrix::from_blocks(
                &Mat::zeros(n, n),
                &b(Slot::Zero, Slot::Zero),
                &b(Slot::Zero, Slot::Plus),
                &b(Slot::Minus, Slot::Zero),
                &b(Slot::Minus, Slot::Plus),
                grid.d(),
            )
        })
        .collect();
    GeneratorField::from_generator(grid, lifted)
}

/// `Γ_{[0,t)}(𝐥) = ι(I ⊗ (𝟏 + 𝐥^t)^⊗)` for noise-only tables with zero corners.
pub fn second_quantization(grid: &Grid, t: f64, l: &[TriangularMatrix]) -> Result<FockOperator, EvolutionError> {
    if l.len() != grid.len() {
        return Err(EvolutionError::Length { expected: grid.len(), got: l.len() });
    }
    let d = grid.d();
    let mut f = Vec::with_capacity(l.len());
    for (p, x) in l.iter().enumerate() {
        if (x.n, x.d) != (1, d) {
            return Err(EvolutionError::Shape(p));
        }
        if x.block(Slot::Minus, Slot::Minus)[(0, 0)] != ZERO || x.block(Slot::Plus, Slot::Plus)[(0, 0)] != ZERO {
            return Err(EvolutionError::Corner(p, "zero"));
        }
        let id = TriangularMatrix::identity(1, d);
        f.push(if grid.time(p) < t { id.add(x) } else { id });
    }
    Ok(iota(&product_kernel(grid, &Mat::identity(grid.n(), grid.n()), &f)))
}

/// Outcome of a norm-bound check.
#[derive(Clone, Debug, PartialEq)]
pub struct NormBound {
    pub norm: f64,
    pub bound: f64,
    pub eps: f64,
    pub holds: bool,
}

/// `‖U^t‖_{ξ⁺}^{ξ₋} ≤ ‖T⁰‖ exp{Σ w(‖L₊⁻‖ + (‖L₀⁻‖² + ‖L₊⁰‖²)/2ε)}`.
///
/// `ε` defaults to `ε(ξ⁺, ξ₋)` at `g = max ‖F₀⁰‖`, which needs `ξ⁺/ξ₋ > g²`;
/// a supplied `ε` must lie in `(0, ε(ξ⁺, ξ₋)]`.
pub fn evolution_norm_bound_check(
    f: &GeneratorField,
    t: f64,
    xi_plus: f64,
    xi_minus: f64,
    eps: Option<f64>,
    t0: &Mat,
) -> Result<NormBound, EvolutionError> {
    let grid = &f.grid;
    if xi_plus <= 0.0 || xi_minus <= 0.0 {
        return Err(EvolutionError::Domain(format!("scale parameters ({xi_plus}, {xi_minus}) must be positive")));
    }
    let past = grid.before(t).points();
    let g = past.iter().map(|&p| spectral_norm(&role_block(f.point(p), Role::Gauge))).fold(0.0, f64::max);
    let emax = epsilon_bound(xi_plus, xi_minus, g)
        .ok_or_else(|| EvolutionError::Domain(format!("ξ⁺/ξ₋ = {} must exceed max ‖F₀⁰‖² = {}", xi_plus / xi_minus, g * g)))?;
    let eps = match eps {
        None => emax,
        Some(e) if e > 0.0 && e <= emax => e,
        Some(e) => return Err(EvolutionError::Domain(format!("ε = {e} outside (0, {emax}]"))),
    };
    let rate: f64 = past
        .iter()
        .map(|&p| {
            let l = f.generator(p);
            let nb = |r| spectral_norm(&role_block(&l, r));
            grid.weight(p) * (nb(Role::Time) + (nb(Role::Ann).powi(2) + nb(Role::Cre).powi(2)) / (2.0 * eps))
        })
        .sum();
    let bound = spectral_norm(t0) * rate.exp();
    let norm = operator_scale_norm(&solve_evolution(t, f, t0), xi_plus, xi_minus);
    Ok(NormBound { norm, bound, eps, holds: norm <= bound * (1.0 + 1e-9) })
}
