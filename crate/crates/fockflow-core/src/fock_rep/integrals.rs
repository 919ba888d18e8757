//! Single and multiple quantum stochastic integrals, their derivatives, the
//! N-transform, integrability norms and adaptedness checks.

use std::collections::BTreeMap;

use crate::chain_space::layout::{accumulate_permuted, embed_block};
use crate::chain_space::{Chain, Grid};
use crate::kernel_algebra::{tables_within, Kernel, Role, Table};
use crate::linalg::{c64, spectral_norm, Mat, C64, ONE, ZERO};

use super::{iota, operator_scale_norm, FockError, FockOperator};

/// Four operator-valued point functions: gauge `𝒢⊗E(x) → 𝒢⊗E(x)`, creation
/// `𝒢 → 𝒢⊗E(x)`, annihilation `𝒢⊗E(x) → 𝒢` and time `𝒢 → 𝒢`.
#[derive(Clone, Debug)]
pub struct IntegrandTable {
    pub grid: Grid,
    pub gauge: Vec<Option<FockOperator>>,
    pub cre: Vec<Option<FockOperator>>,
    pub ann: Vec<Option<FockOperator>>,
    pub time: Vec<Option<FockOperator>>,
}

/// Extra factor lists `(in, out)` of an integrand value in slot `role` at `p`.
pub fn slot_extras(p: usize, role: Role) -> (Vec<usize>, Vec<usize>) {
    match role {
        Role::Gauge => (vec![p], vec![p]),
        Role::Cre => (vec![], vec![p]),
        Role::Ann => (vec![p], vec![]),
        Role::Time => (vec![], vec![]),
    }
}

impl IntegrandTable {
    pub fn zero(grid: &Grid) -> IntegrandTable {
        let m = grid.len();
        IntegrandTable { grid: grid.clone(), gauge: vec![None; m], cre: vec![None; m], ann: vec![None; m], time: vec![None; m] }
    }

    /// Gaussian operators in every slot.
    pub fn random(grid: &Grid, rng: &mut crate::sample::SeededRng) -> IntegrandTable {
        let mut d = IntegrandTable::zero(grid);
        for p in 0..grid.len() {
            for role in Role::ALL {
                let (ein, eout) = slot_extras(p, role);
                let mut op = FockOperator::zeros_with(grid, ein, eout);
                op.m = crate::sample::matrix(rng, op.m.nrows(), op.m.ncols(), 1.0);
                d.set(p, role, op).expect("slot extras");
            }
        }
        d
    }

    pub fn slot(&self, role: Role) -> &[Option<FockOperator>] {
        match role {
            Role::Gauge => &self.gauge,
            Role::Cre => &self.cre,
            Role::Ann => &self.ann,
            Role::Time => &self.time,
        }
    }

    fn slot_mut(&mut self, role: Role) -> &mut Vec<Option<FockOperator>> {
        match role {
            Role::Gauge => &mut self.gauge,
            Role::Cre => &mut self.cre,
            Role::Ann => &mut self.ann,
            Role::Time => &mut self.time,
        }
    }

    pub fn get(&self, p: usize, role: Role) -> Option<&FockOperator> {
        self.slot(role)[p].as_ref()
    }

    pub fn set(&mut self, p: usize, role: Role, op: FockOperator) -> Result<(), FockError> {
        let (ein, eout) = slot_extras(p, role);
        if op.grid != self.grid {
            return Err(FockError::GridMismatch);
        }
        if op.extra_in != ein || op.extra_out != eout {
            return Err(FockError::ExtraMismatch(op.extra_in.clone(), ein));
        }
        self.slot_mut(role)[p] = Some(op);
        Ok(())
    }

    /// Pointwise `D(x) ⊙ U^{t(x)}` for a process given by its values at the grid times.
    pub fn compose_process(&self, u: &[FockOperator]) -> Result<IntegrandTable, FockError> {
        let mut out = IntegrandTable::zero(&self.grid);
        for p in 0..self.grid.len() {
            for role in Role::ALL {
                if let Some(dp) = self.get(p, role) {
                    let (ein, _) = slot_extras(p, role);
                    let up = u[p].lift_extra(&ein);
                    out.set(p, role, dp.compose(&up)?)?;
                }
            }
        }
        Ok(out)
    }
}

/// One of the four integrals `Λ_μ^ν(t, D)` of a single slot, with chains
/// meeting the integration point excluded from the integrand's domain.
pub fn single_integral(t: f64, role: Role, d: &IntegrandTable) -> FockOperator {
    let grid = &d.grid;
    let (n, dd) = (grid.n(), grid.d());
    let mut u = FockOperator::zeros(grid);
    let basis = grid.basis(0);
    let chains = grid.chains();
    for p in grid.before(t).points() {
        let op = match d.get(p, role) {
            Some(op) => op,
            None => continue,
        };
        let x = Chain::single(p);
        let w = grid.weight(p);
        for &r in &chains {
            for &c in &chains {
                // (row, col) of the result and the chains seen by D(x)
                let (sr, sc, scale) = match role {
                    Role::Gauge if r.contains(p) && c.contains(p) => (r.minus(x), c.minus(x), ONE),
                    Role::Cre if r.contains(p) && !c.contains(p) => (r.minus(x), c, ONE),
                    Role::Ann if !r.contains(p) && c.contains(p) => (r, c.minus(x), c64(w, 0.0)),
                    Role::Time if !r.contains(p) && !c.contains(p) => (r, c, c64(w, 0.0)),
                    _ => continue,
                };
                let b = op.block(sr, sc);
                if b.iter().all(|z| *z == ZERO) {
                    continue;
                }
                accumulate_permuted(
                    &mut u.m,
                    basis.offset(r),
                    basis.offset(c),
                    &b,
                    n,
                    dd,
                    &op.col_factors(sc),
                    &op.row_factors(sr),
                    &c.points(),
                    &r.points(),
                    scale,
                );
            }
        }
    }
    u
}

/// `Λ^t(𝐃)`, the sum of the four single integrals.
pub fn single_integrals(t: f64, d: &IntegrandTable) -> FockOperator {
    let mut u = FockOperator::zeros(&d.grid);
    for role in Role::ALL {
        u.m += single_integral(t, role, d).m;
    }
    u
}

/// Operator family `B(𝛝)` indexed by tables, each value acting from
/// `𝒢 ⊗ E(base_in) ⊗ E(ϑ₀⁻) ⊗ E(ϑ₀⁰)` to `𝒢 ⊗ E(base_out) ⊗ E(ϑ₀⁰) ⊗ E(ϑ₊⁰)`
/// with the factor order recorded in each operator's extra lists.
#[derive(Clone, Debug)]
pub struct OperatorFamily {
    pub grid: Grid,
    pub base_in: Vec<usize>,
    pub base_out: Vec<usize>,
    ops: BTreeMap<Table, FockOperator>,
}

fn same_set(a: &[usize], b: &[usize]) -> bool {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_unstable();
    y.sort_unstable();
    x == y
}

impl OperatorFamily {
    pub fn new(grid: &Grid, base_in: Vec<usize>, base_out: Vec<usize>) -> OperatorFamily {
        OperatorFamily { grid: grid.clone(), base_in, base_out, ops: BTreeMap::new() }
    }

    pub fn base_mask(&self) -> Chain {
        Chain::from_points(&self.base_in).union(Chain::from_points(&self.base_out))
    }

    pub fn insert(&mut self, t: Table, op: FockOperator) -> Result<(), FockError> {
        if op.grid != self.grid {
            return Err(FockError::GridMismatch);
        }
        if !t.support().disjoint(self.base_mask()) {
            return Err(FockError::Integrand(format!("{t:?}"), "table meets the base extras".into()));
        }
        let mut want_in = self.base_in.clone();
        want_in.extend(t.in_layout());
        let mut want_out = self.base_out.clone();
        want_out.extend(t.out_layout());
        if !same_set(&op.extra_in, &want_in) || !same_set(&op.extra_out, &want_out) {
            return Err(FockError::Integrand(format!("{t:?}"), "extra factors do not match the table".into()));
        }
        self.ops.insert(t, op);
        Ok(())
    }

    pub fn get(&self, t: &Table) -> Option<&FockOperator> {
        self.ops.get(t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Table, &FockOperator)> {
        self.ops.iter()
    }

    /// `ι ∘ L`: the representation of every integrand value.
    pub fn from_integrand(l: &Integrand) -> OperatorFamily {
        let mut f = OperatorFamily::new(&l.grid, Vec::new(), Vec::new());
        for (t, k) in l.iter() {
            f.ops.insert(*t, iota(k));
        }
        f
    }

    /// `Ḃ(𝐱)`: the family `𝛝 ↦ B(𝐱 ⊔ 𝛝)` over tables before `t(x)`.
    pub fn derivative(&self, p: usize, role: Role) -> OperatorFamily {
        assert!(self.base_in.is_empty() && self.base_out.is_empty(), "derivative of a based family");
        let (ein, eout) = slot_extras(p, role);
        let mut f = OperatorFamily::new(&self.grid, ein, eout);
        let past = self.grid.before(self.grid.time(p));
        for (t, op) in &self.ops {
            if t.role_of(p) != Some(role) {
                continue;
            }
            let rest = t.minus(&Table::elementary(p, role));
            if rest.support().subset_of(past) {
                f.ops.insert(rest, op.clone());
            }
        }
        f
    }
}

/// `Λ_{[0,t)}(B)`: the multiple integral with integration chains disjoint
/// from the output chain, from each other and from the base extras.
pub fn multiple_integral(t: f64, b: &OperatorFamily) -> FockOperator {
    let grid = &b.grid;
    let (n, d) = (grid.n(), grid.d());
    let mut u = FockOperator::zeros_with(grid, b.base_in.clone(), b.base_out.clone());
    let (rb, cb) = (u.row_basis(), u.col_basis());
    let past = grid.before(t);
    let chains = grid.chains();
    for (th, op) in b.iter() {
        if !th.support().subset_of(past) {
            continue;
        }
        let avoid = th.support().union(b.base_mask());
        let w = c64(grid.chain_weight(th.ann) * grid.chain_weight(th.time), 0.0);
        let (orb, ocb) = (op.row_basis(), op.col_basis());
        let free: Vec<Chain> = chains.iter().copied().filter(|c| c.disjoint(avoid)).collect();
        for &sigma in &free {
            let out = sigma.union(th.gauge).union(th.cre);
            let out_to = u.row_factors(out);
            let out_from = op.row_factors(sigma);
            for &rho in &free {
                let blk = op.m.view((orb.offset(sigma), ocb.offset(rho)), (orb.block_dim(sigma), ocb.block_dim(rho)));
                if blk.iter().all(|z| *z == ZERO) {
                    continue;
                }
                let inc = rho.union(th.ann).union(th.gauge);
                let in_to = u.col_factors(inc);
                accumulate_permuted(
                    &mut u.m,
                    rb.offset(out),
                    cb.offset(inc),
                    &blk.into_owned(),
                    n,
                    d,
                    &op.col_factors(rho),
                    &out_from,
                    &in_to,
                    &out_to,
                    w,
                );
            }
        }
    }
    u
}

/// The four QS derivatives `D_ν^μ(x) = Λ_{[0,t(x))}(Ḃ(𝐱_ν^μ))` at one point.
pub fn qs_derivatives(b: &OperatorFamily, p: usize) -> [(Role, FockOperator); 4] {
    let t = b.grid.time(p);
    Role::ALL.map(|role| (role, multiple_integral(t, &b.derivative(p, role))))
}

/// Derivatives at every grid point, as an integrand table.
pub fn derivative_table(b: &OperatorFamily) -> IntegrandTable {
    let mut d = IntegrandTable::zero(&b.grid);
    for p in 0..b.grid.len() {
        for (role, op) in qs_derivatives(b, p) {
            d.set(p, role, op).expect("derivative extras follow the slot");
        }
    }
    d
}

/// `‖Λ_{[0,t)}(B) − B(∅) − Λ^t(𝐃)‖` with `𝐃` the QS derivatives.
pub fn reconstruction_defect(t: f64, b: &OperatorFamily) -> f64 {
    let lhs = multiple_integral(t, b);
    let mut rhs = single_integrals(t, &derivative_table(b));
    if let Some(b0) = b.get(&Table::EMPTY) {
        rhs = rhs.add(b0);
    }
    lhs.sub(&rhs).hilbert_norm()
}

/// Kernel-level integrand `L(𝛝, 𝛋)`: for each table `𝛝` an augmented kernel
/// with extra inputs `[ϑ₀⁻, ϑ₀⁰]` and extra outputs `[ϑ₀⁰, ϑ₊⁰]`, vanishing on
/// tables that meet `𝛝`.
#[derive(Clone, Debug)]
pub struct Integrand {
    pub grid: Grid,
    parts: BTreeMap<Table, Kernel>,
}

impl Integrand {
    pub fn new(grid: &Grid) -> Integrand {
        Integrand { grid: grid.clone(), parts: BTreeMap::new() }
    }

    pub fn empty_kernel(grid: &Grid, th: &Table) -> Kernel {
        Kernel::zero_with(grid, th.in_layout(), th.out_layout())
    }

    pub fn insert(&mut self, th: Table, k: Kernel) -> Result<(), FockError> {
        if k.extra_in != th.in_layout() || k.extra_out != th.out_layout() {
            return Err(FockError::Integrand(format!("{th:?}"), "kernel extras must be [ann, gauge] and [gauge, cre]".into()));
        }
        if k.iter().any(|(t, _)| !t.support().disjoint(th.support())) {
            return Err(FockError::Integrand(format!("{th:?}"), "kernel tables meet the integrand table".into()));
        }
        self.parts.insert(th, k);
        Ok(())
    }

    pub fn get(&self, th: &Table) -> Option<&Kernel> {
        self.parts.get(th)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Table, &Kernel)> {
        self.parts.iter()
    }

    /// Pointwise integrand `L(𝛝) ⊗ 1(𝛋)` from blocks `L(𝛝)` acting on `H` and the `𝛝` factors.
    pub fn pointwise(grid: &Grid, blocks: &BTreeMap<Table, Mat>) -> Integrand {
        let (n, d) = (grid.n(), grid.d());
        let mut l = Integrand::new(grid);
        for (th, b) in blocks {
            let mut k = Integrand::empty_kernel(grid, th);
            for kt in tables_within(grid.full().minus(th.support())) {
                if !kt.is_diagonal() {
                    continue;
                }
                let blk = embed_block(b, n, d, &th.in_layout(), &th.out_layout(), &k.in_factors(&kt), &k.out_factors(&kt));
                k.insert(kt, blk).expect("shape follows the layout");
            }
            l.parts.insert(*th, k);
        }
        l
    }

    /// Random integrand with Gaussian blocks on a random subset of table pairs.
    pub fn random(grid: &Grid, rng: &mut crate::sample::SeededRng, density: f64) -> Integrand {
        let mut l = Integrand::new(grid);
        for th in tables_within(grid.full()) {
            if crate::sample::uniform(rng, 0.0, 1.0) >= density {
                continue;
            }
            let mut k = Integrand::empty_kernel(grid, &th);
            for kt in tables_within(grid.full().minus(th.support())) {
                if crate::sample::uniform(rng, 0.0, 1.0) >= density {
                    continue;
                }
                let (r, c) = k.shape(&kt);
                k.insert(kt, crate::sample::matrix(rng, r, c, 1.0)).expect("shape follows the layout");
            }
            l.parts.insert(th, k);
        }
        l
    }
}

/// `N_{[0,t)}(L)(𝛋) = Σ_{𝛝 ⊆ 𝛋^t} L(𝛝, 𝛋∖𝛝)`.
pub fn n_transform(t: f64, l: &Integrand) -> Kernel {
    n_transform_over(l.grid.before(t), l)
}

/// N-transform with the summation points given as a chain.
pub fn n_transform_over(past: Chain, l: &Integrand) -> Kernel {
    let grid = &l.grid;
    let (n, d) = (grid.n(), grid.d());
    let mut out = Kernel::zero(grid);
    let mut acc: BTreeMap<Table, Mat> = BTreeMap::new();
    for (th, k) in l.iter() {
        if !th.support().subset_of(past) {
            continue;
        }
        for (rest, b) in k.iter() {
            let kt = rest.union(th);
            let (r, c) = out.shape(&kt);
            let e = acc.entry(kt).or_insert_with(|| Mat::zeros(r, c));
            accumulate_permuted(e, 0, 0, b, n, d, &k.in_factors(rest), &k.out_factors(rest), &kt.in_layout(), &kt.out_layout(), ONE);
        }
    }
    for (t, b) in acc {
        out.insert(t, b).expect("valid table");
    }
    out
}

/// `‖Λ_{[0,t)}(ι∘L) − ι(N_{[0,t)}(L))‖`.
pub fn check_intertwining(t: f64, l: &Integrand) -> f64 {
    let lhs = multiple_integral(t, &OperatorFamily::from_integrand(l));
    let rhs = iota(&n_transform(t, l));
    lhs.sub(&rhs).hilbert_norm()
}

/// Discrete `L^p` norms (`p = ∞, 2, 2, 1` for gauge, creation, annihilation,
/// time) of the pointwise `(ξ⁺, ξ₋)` operator norms over `X^t`.
pub fn integrability_norms(d: &IntegrandTable, t: f64, xi_plus: f64, xi_minus: f64) -> [f64; 4] {
    let grid = &d.grid;
    let pts = grid.before(t).points();
    let norm = |role: Role, p: usize| d.get(p, role).map_or(0.0, |op| operator_scale_norm(op, xi_plus, xi_minus));
    let gauge = pts.iter().map(|&p| norm(Role::Gauge, p)).fold(0.0, f64::max);
    let l2 = |role| pts.iter().map(|&p| grid.weight(p) * norm(role, p).powi(2)).sum::<f64>().sqrt();
    let time = pts.iter().map(|&p| grid.weight(p) * norm(Role::Time, p)).sum();
    [gauge, l2(Role::Cre), l2(Role::Ann), time]
}

/// Scale exponents `(η⁻, η⁰, η⁺)` on the input side and `(η₋, η₀, η₊)` on the output side.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct EtaTriples {
    pub upper: [f64; 3],
    pub lower: [f64; 3],
}

impl EtaTriples {
    /// Smallest admissible `ξ⁺ = Σ η^μ` and largest `ξ₋ = (Σ 1/η_ν)⁻¹`.
    pub fn xi_pair(&self) -> (f64, f64) {
        let xp = self.upper.iter().sum();
        let xm = 1.0 / self.lower.iter().map(|e| 1.0 / e).sum::<f64>();
        (xp, xm)
    }
}

/// `‖B‖_{η•}^{η•}(t)`: sum over the time slot of the square root of the
/// weighted sum over creation and annihilation slots of the gauge-slot maximum.
pub fn multi_norm(b: &OperatorFamily, t: f64, eta: &EtaTriples) -> f64 {
    let [em, e0, ep] = eta.upper;
    let [lm, l0, lp] = eta.lower;
    assert!(eta.upper.iter().chain(eta.lower.iter()).all(|e| *e > 0.0), "η parameters must be positive");
    let grid = &b.grid;
    let past = grid.before(t);
    // time slot -> (cre, ann) -> max over gauge slot
    let mut inner: BTreeMap<Chain, BTreeMap<(Chain, Chain), f64>> = BTreeMap::new();
    for (th, op) in b.iter() {
        if !th.support().subset_of(past) {
            continue;
        }
        let nb = operator_scale_norm(op, ep, lm);
        let v = (l0 / e0).powi(th.gauge.len() as i32) * nb * nb;
        let e = inner.entry(th.time).or_default().entry((th.cre, th.ann)).or_insert(0.0);
        *e = e.max(v);
    }
    let mut total = 0.0;
    for (time, m) in inner {
        let s: f64 = m
            .iter()
            .map(|(&(cre, ann), v)| {
                grid.chain_weight(cre) * grid.chain_weight(ann) * lp.powi(cre.len() as i32) / em.powi(ann.len() as i32) * v
            })
            .sum();
        total += grid.chain_weight(time) * s.sqrt();
    }
    total
}

/// Multiple-integral bound: `(‖Λ_{[0,t)}(B)‖_{ξ⁺}^{ξ₋}, ‖B‖_{η•}^{η•}(t))` at the
/// extreme admissible `ξ⁺ = Σ η^μ`, `ξ₋ = (Σ 1/η_ν)⁻¹`.
pub fn multiple_integral_bound(b: &OperatorFamily, t: f64, eta: &EtaTriples) -> (f64, f64) {
    let (xp, xm) = eta.xi_pair();
    (operator_scale_norm(&multiple_integral(t, b), xp, xm), multi_norm(b, t, eta))
}

/// Identity `1(𝛋)` block for a diagonal table: gauge slot identity.
fn future_matches(kt: &Table, past: Chain) -> (Table, Table) {
    (kt.restrict(past), kt.restrict(kt.support().minus(past)))
}

/// Largest blockwise deviation of `T` from `T(𝛋^t) ⊗ 1(𝛋_{[t})`.
pub fn adaptedness_defect(t: &Kernel, time: f64) -> f64 {
    let grid = &t.grid;
    let (n, d) = (grid.n(), grid.d());
    let past = grid.before(time);
    let mut worst = 0.0f64;
    for kt in tables_within(grid.full().minus(t.extras_mask())) {
        let (p, f) = future_matches(&kt, past);
        let have = t.block(&kt);
        let want = if f.is_diagonal() {
            match t.get(&p) {
                Some(b) => embed_block(b, n, d, &t.in_factors(&p), &t.out_factors(&p), &t.in_factors(&kt), &t.out_factors(&kt)),
                None => Mat::zeros(have.nrows(), have.ncols()),
            }
        } else {
            Mat::zeros(have.nrows(), have.ncols())
        };
        worst = worst.max(spectral_norm(&(have - want)));
    }
    worst
}

/// Kernel adaptedness at time `t`, to `1e-12`.
pub fn is_adapted(t: &Kernel, time: f64) -> bool {
    adaptedness_defect(t, time) <= 1e-12
}

/// Largest deviation of `U` from `U_past ⊗ I_future` at time `s`.
pub fn operator_adaptedness_defect(u: &FockOperator, s: f64) -> f64 {
    let grid = &u.grid;
    let (n, d) = (grid.n(), grid.d());
    let past = grid.before(s);
    let chains = grid.chains();
    let mut worst = 0.0f64;
    for &r in &chains {
        for &c in &chains {
            let have = u.block(r, c);
            let (rf, cf) = (r.minus(past), c.minus(past));
            let want = if rf == cf {
                let core = u.block(r.meet(past), c.meet(past));
                embed_block(&core, n, d, &u.col_factors(c.meet(past)), &u.row_factors(r.meet(past)), &u.col_factors(c), &u.row_factors(r))
            } else {
                Mat::zeros(have.nrows(), have.ncols())
            };
            worst = worst.max(crate::linalg::max_abs(&(have - want)));
        }
    }
    worst
}

/// `‖Λ^t(𝐁⊙U) − Σ_i (Λ^{t_{i+1}}(𝐁) − Λ^{t_i}(𝐁)) U^{t_i}‖` for a step process
/// whose value on `[t(x_i), t(x_{i+1}))` is `u[i]`, adapted at `t(x_i)`.
pub fn ito_sum_compare(t: f64, b: &IntegrandTable, u: &[FockOperator]) -> Result<f64, FockError> {
    let grid = &b.grid;
    assert_eq!(u.len(), grid.len(), "one process value per grid point");
    for (p, up) in u.iter().enumerate() {
        if operator_adaptedness_defect(up, grid.time(p)) > 1e-12 {
            return Err(FockError::NotAdapted { point: p });
        }
    }
    let lhs = single_integrals(t, &b.compose_process(u)?);
    let mut rhs = FockOperator::zeros(grid);
    let mut prev = single_integrals(grid.time(0).min(t), b);
    for p in 0..grid.len() {
        let next_t = if p + 1 < grid.len() { grid.time(p + 1) } else { grid.horizon() };
        let next = single_integrals(next_t.min(t), b);
        let incr = next.sub(&prev);
        rhs = rhs.add(&incr.compose(&u[p])?);
        prev = next;
    }
    Ok(lhs.sub(&rhs).hilbert_norm())
}

/// Scalar helper: `c · I` on the Fock space of `grid`.
pub fn scalar_operator(grid: &Grid, c: C64) -> FockOperator {
    FockOperator::identity(grid).scale(c)
}
