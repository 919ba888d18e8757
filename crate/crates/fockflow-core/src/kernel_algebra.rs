//! Operator-valued table functions: tables, kernels, the involution, the
//! product formula, product kernels, relative bounds, and the correspondence
//! between kernels and gauge-reduced integrands.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain_space::layout::{dim, embed_block};
use crate::chain_space::{Chain, Grid};
use crate::ito_calculus::{Slot, TriangularMatrix};
use crate::linalg::{c64, spectral_norm, Mat, C64, ZERO};

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("table slots overlap: {0:?}")]
    Overlap(Table),
    #[error("block for table {table:?} has shape {got:?}, expected {expected:?}")]
    Shape { table: Table, expected: (usize, usize), got: (usize, usize) },
    #[error("kernels live on different grids")]
    GridMismatch,
    #[error("table {0:?} uses a point outside the grid or an extra factor")]
    OutOfRange(Table),
    #[error("kernel document: {0}")]
    Document(String),
}

/// Channel of a point inside a table.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Ann,
    Time,
    Gauge,
    Cre,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Ann, Role::Time, Role::Gauge, Role::Cre];

    /// `(row, column)` position in a triangular matrix.
    pub fn slots(self) -> (Slot, Slot) {
        match self {
            Role::Ann => (Slot::Minus, Slot::Zero),
            Role::Time => (Slot::Minus, Slot::Plus),
            Role::Gauge => (Slot::Zero, Slot::Zero),
            Role::Cre => (Slot::Zero, Slot::Plus),
        }
    }

    pub fn star(self) -> Role {
        match self {
            Role::Ann => Role::Cre,
            Role::Cre => Role::Ann,
            r => r,
        }
    }
}

/// Four pairwise disjoint chains: annihilation, time, gauge, creation.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Table {
    pub ann: Chain,
    pub time: Chain,
    pub gauge: Chain,
    pub cre: Chain,
}

impl std::fmt::Debug for Table {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(ann {:?}, time {:?}; gauge {:?}, cre {:?})", self.ann, self.time, self.gauge, self.cre)
    }
}

impl Table {
    pub const EMPTY: Table = Table { ann: Chain::EMPTY, time: Chain::EMPTY, gauge: Chain::EMPTY, cre: Chain::EMPTY };

    pub fn new(ann: Chain, time: Chain, gauge: Chain, cre: Chain) -> Result<Table, KernelError> {
        let t = Table { ann, time, gauge, cre };
        if t.is_valid() {
            Ok(t)
        } else {
            Err(KernelError::Overlap(t))
        }
    }

    pub fn is_valid(&self) -> bool {
        let s = [self.ann, self.time, self.gauge, self.cre];
        (0..4).all(|i| (i + 1..4).all(|j| s[i].disjoint(s[j])))
    }

    pub fn elementary(p: usize, role: Role) -> Table {
        Table::EMPTY.with(p, role)
    }

    pub fn slot(&self, role: Role) -> Chain {
        match role {
            Role::Ann => self.ann,
            Role::Time => self.time,
            Role::Gauge => self.gauge,
            Role::Cre => self.cre,
        }
    }

    pub fn with(mut self, p: usize, role: Role) -> Table {
        let c = Chain::single(p);
        match role {
            Role::Ann => self.ann = self.ann.union(c),
            Role::Time => self.time = self.time.union(c),
            Role::Gauge => self.gauge = self.gauge.union(c),
            Role::Cre => self.cre = self.cre.union(c),
        }
        self
    }

    pub fn role_of(&self, p: usize) -> Option<Role> {
        Role::ALL.into_iter().find(|&r| self.slot(r).contains(p))
    }

    pub fn support(&self) -> Chain {
        self.ann.union(self.time).union(self.gauge).union(self.cre)
    }

    pub fn input_chain(&self) -> Chain {
        self.ann.union(self.gauge)
    }

    pub fn output_chain(&self) -> Chain {
        self.gauge.union(self.cre)
    }

    pub fn in_layout(&self) -> Vec<usize> {
        let mut v = self.ann.points();
        v.extend(self.gauge.points());
        v
    }

    pub fn out_layout(&self) -> Vec<usize> {
        let mut v = self.gauge.points();
        v.extend(self.cre.points());
        v
    }

    /// Swap annihilation and creation slots.
    pub fn star(&self) -> Table {
        Table { ann: self.cre, time: self.time, gauge: self.gauge, cre: self.ann }
    }

    pub fn restrict(&self, c: Chain) -> Table {
        Table { ann: self.ann.meet(c), time: self.time.meet(c), gauge: self.gauge.meet(c), cre: self.cre.meet(c) }
    }

    pub fn minus(&self, o: &Table) -> Table {
        Table {
            ann: self.ann.minus(o.ann),
            time: self.time.minus(o.time),
            gauge: self.gauge.minus(o.gauge),
            cre: self.cre.minus(o.cre),
        }
    }

    pub fn union(&self, o: &Table) -> Table {
        Table {
            ann: self.ann.union(o.ann),
            time: self.time.union(o.time),
            gauge: self.gauge.union(o.gauge),
            cre: self.cre.union(o.cre),
        }
    }

    /// True when only the gauge slot is occupied.
    pub fn is_diagonal(&self) -> bool {
        self.ann.is_empty() && self.time.is_empty() && self.cre.is_empty()
    }

    /// Slotwise sub-tables, one per subset of the support.
    pub fn sub_tables(&self) -> Vec<Table> {
        self.support().subsets().map(|s| self.restrict(s)).collect()
    }
}

/// Every table whose support lies in `c` (each point: absent or in one slot).
pub fn tables_within(c: Chain) -> Vec<Table> {
    let pts = c.points();
    let mut out = vec![Table::EMPTY];
    for &p in &pts {
        let mut next = Vec::with_capacity(out.len() * 5);
        for t in &out {
            next.push(*t);
            for r in Role::ALL {
                next.push(t.with(p, r));
            }
        }
        out = next;
    }
    out
}

/// Every table partitioning exactly the chain `c`.
pub fn partitions(c: Chain) -> Vec<Table> {
    let mut out = vec![Table::EMPTY];
    for p in c.points() {
        out = out.iter().flat_map(|t| Role::ALL.map(|r| t.with(p, r))).collect();
    }
    out
}

pub fn all_tables(grid: &Grid) -> Vec<Table> {
    tables_within(grid.full())
}

/// Finite map from tables to operator blocks; absent tables are zero.
///
/// Block `T(𝛋)` maps `H ⊗ E(ann) ⊗ E(gauge) ⊗ E(extra_in)` to
/// `H ⊗ E(gauge) ⊗ E(cre) ⊗ E(extra_out)`, time order inside each slot.
/// Extra factors are used by integrand families and point derivatives.
#[derive(Clone, Debug)]
pub struct Kernel {
    pub grid: Grid,
    pub extra_in: Vec<usize>,
    pub extra_out: Vec<usize>,
    blocks: BTreeMap<Table, Mat>,
}

impl Kernel {
    pub fn zero(grid: &Grid) -> Kernel {
        Kernel::zero_with(grid, Vec::new(), Vec::new())
    }

    pub fn zero_with(grid: &Grid, extra_in: Vec<usize>, extra_out: Vec<usize>) -> Kernel {
        Kernel { grid: grid.clone(), extra_in, extra_out, blocks: BTreeMap::new() }
    }

    /// `I(𝛋)`: identity on the gauge slot for diagonal tables, zero otherwise.
    pub fn unit(grid: &Grid) -> Kernel {
        Kernel::unit_with(grid, Vec::new())
    }

    /// Unit kernel carrying identity on the listed extra factors.
    pub fn unit_with(grid: &Grid, extra: Vec<usize>) -> Kernel {
        let mut k = Kernel::zero_with(grid, extra.clone(), extra);
        for t in tables_within(grid.full().minus(k.extras_mask())) {
            if t.is_diagonal() {
                let s = dim(grid.n(), grid.d(), t.gauge.len() + k.extra_in.len());
                k.blocks.insert(t, Mat::identity(s, s));
            }
        }
        k
    }

    /// Identity extension `X ⊗ 1(𝛋)` of a system operator.
    pub fn lift(grid: &Grid, x: &Mat) -> Kernel {
        let mut k = Kernel::zero(grid);
        let d = grid.d();
        for t in all_tables(grid) {
            if t.is_diagonal() {
                let e = d.pow(t.gauge.len() as u32);
                k.blocks.insert(t, x.kronecker(&Mat::identity(e, e)));
            }
        }
        k
    }

    pub fn extras_mask(&self) -> Chain {
        Chain::from_points(&self.extra_in).union(Chain::from_points(&self.extra_out))
    }

    pub fn shape(&self, t: &Table) -> (usize, usize) {
        let (n, d) = (self.grid.n(), self.grid.d());
        (
            dim(n, d, t.gauge.len() + t.cre.len() + self.extra_out.len()),
            dim(n, d, t.ann.len() + t.gauge.len() + self.extra_in.len()),
        )
    }

    pub fn in_factors(&self, t: &Table) -> Vec<usize> {
        let mut v = t.in_layout();
        v.extend_from_slice(&self.extra_in);
        v
    }

    pub fn out_factors(&self, t: &Table) -> Vec<usize> {
        let mut v = t.out_layout();
        v.extend_from_slice(&self.extra_out);
        v
    }

    fn check(&self, t: &Table, b: &Mat) -> Result<(), KernelError> {
        if !t.is_valid() {
            return Err(KernelError::Overlap(*t));
        }
        if !t.support().subset_of(self.grid.full()) || !t.support().disjoint(self.extras_mask()) {
            return Err(KernelError::OutOfRange(*t));
        }
        let expected = self.shape(t);
        let got = (b.nrows(), b.ncols());
        if expected != got {
            return Err(KernelError::Shape { table: *t, expected, got });
        }
        Ok(())
    }

    pub fn insert(&mut self, t: Table, b: Mat) -> Result<(), KernelError> {
        self.check(&t, &b)?;
        self.blocks.insert(t, b);
        Ok(())
    }

    /// Add `b` into the block at `t`.
    pub fn accumulate(&mut self, t: Table, b: &Mat) -> Result<(), KernelError> {
        self.check(&t, b)?;
        match self.blocks.get_mut(&t) {
            Some(x) => *x += b,
            None => {
                self.blocks.insert(t, b.clone());
            }
        }
        Ok(())
    }

    pub fn get(&self, t: &Table) -> Option<&Mat> {
        self.blocks.get(t)
    }

    /// Block at `t`, zero when absent.
    pub fn block(&self, t: &Table) -> Mat {
        match self.blocks.get(t) {
            Some(b) => b.clone(),
            None => {
                let (r, c) = self.shape(t);
                Mat::zeros(r, c)
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Table, &Mat)> {
        self.blocks.iter()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn map_blocks<F: Fn(&Mat) -> Mat>(&self, f: F) -> Kernel {
        let mut k = Kernel::zero_with(&self.grid, self.extra_in.clone(), self.extra_out.clone());
        for (t, b) in &self.blocks {
            k.blocks.insert(*t, f(b));
        }
        k
    }

    pub fn scale(&self, z: C64) -> Kernel {
        self.map_blocks(|b| b * z)
    }

    pub fn add(&self, o: &Kernel) -> Kernel {
        let mut k = self.clone();
        for (t, b) in &o.blocks {
            k.accumulate(*t, b).expect("compatible kernels");
        }
        k
    }

    pub fn sub(&self, o: &Kernel) -> Kernel {
        self.add(&o.scale(c64(-1.0, 0.0)))
    }

    /// Max over tables of the blockwise spectral norm of `self − o`.
    pub fn distance(&self, o: &Kernel) -> f64 {
        let mut m = 0.0f64;
        for (t, b) in &self.blocks {
            let diff = match o.blocks.get(t) {
                Some(c) => b - c,
                None => b.clone(),
            };
            m = m.max(spectral_norm(&diff));
        }
        for (t, c) in &o.blocks {
            if !self.blocks.contains_key(t) {
                m = m.max(spectral_norm(c));
            }
        }
        m
    }

    pub fn max_norm(&self) -> f64 {
        self.blocks.values().map(spectral_norm).fold(0.0, f64::max)
    }

    /// `T^⋆(𝛋) = T(𝛋^⋆)*` with the slot layout restored.
    pub fn adjoint(&self) -> Kernel {
        let (n, d) = (self.grid.n(), self.grid.d());
        let mut k = Kernel::zero_with(&self.grid, self.extra_out.clone(), self.extra_in.clone());
        for (t, b) in &self.blocks {
            let s = t.star();
            let bh = b.adjoint();
            // bh maps out-factors of t to in-factors of t
            let in_from = self.out_factors(t);
            let out_from = self.in_factors(t);
            let in_to = k.in_factors(&s);
            let out_to = k.out_factors(&s);
            k.blocks.insert(s, embed_block(&bh, n, d, &in_from, &out_from, &in_to, &out_to));
        }
        k
    }

    /// Product formula: sum over sub-tables of the annihilation and creation
    /// slots and over coincidence splittings of the time slot.
    ///
    /// Augmented kernels compose when `self.extra_in == other.extra_out`; those
    /// factors are contracted and the result carries `other.extra_in` and
    /// `self.extra_out`.
    pub fn product(&self, other: &Kernel) -> Result<Kernel, KernelError> {
        if self.grid != other.grid {
            return Err(KernelError::GridMismatch);
        }
        if self.extra_in != other.extra_out {
            return Err(KernelError::Document(format!(
                "extra factors do not compose: {:?} against {:?}",
                self.extra_in, other.extra_out
            )));
        }
        let grid = &self.grid;
        let (n, d) = (grid.n(), grid.d());
        let mut out = Kernel::zero_with(grid, other.extra_in.clone(), self.extra_out.clone());
        let free = grid.full().minus(self.extras_mask()).minus(other.extras_mask());
        for kt in tables_within(free) {
            let mut acc: Option<Mat> = None;
            let target_in = out.in_factors(&kt);
            let target_out = out.out_factors(&kt);
            for th_a in kt.ann.subsets() {
                for th_c in kt.cre.subsets() {
                    for th_t in kt.time.subsets() {
                        let rest = kt.time.minus(th_t);
                        for s_time in rest.subsets() {
                            let t_time = rest.minus(s_time);
                            let st = Table {
                                ann: th_a.union(th_t),
                                time: s_time,
                                gauge: kt.gauge.union(th_c),
                                cre: kt.cre.minus(th_c),
                            };
                            let tt = Table {
                                ann: kt.ann.minus(th_a),
                                time: t_time,
                                gauge: kt.gauge.union(th_a),
                                cre: th_t.union(th_c),
                            };
                            let (sb, tb) = match (self.blocks.get(&st), other.blocks.get(&tt)) {
                                (Some(a), Some(b)) => (a, b),
                                _ => continue,
                            };
                            let term = if d == 1 {
                                sb * tb
                            } else {
                                let mid = self.in_factors(&st);
                                let tb2 = embed_block(tb, n, d, &other.in_factors(&tt), &other.out_factors(&tt), &target_in, &mid);
                                let sb2 = embed_block(sb, n, d, &mid, &self.out_factors(&st), &mid, &target_out);
                                sb2 * tb2
                            };
                            match acc.as_mut() {
                                Some(a) => *a += term,
                                None => acc = Some(term),
                            }
                        }
                    }
                }
            }
            if let Some(a) = acc {
                out.blocks.insert(kt, a);
            }
        }
        Ok(out)
    }

    /// Point derivative `𝛋 ↦ T(𝛋 ⊔ 𝐱)` for the elementary table of `p` in slot `role`.
    ///
    /// The point becomes an extra input factor for the annihilation and gauge
    /// slots and an extra output factor for the gauge and creation slots.
    pub fn derivative(&self, p: usize, role: Role) -> Kernel {
        let (n, d) = (self.grid.n(), self.grid.d());
        let mut ein = self.extra_in.clone();
        let mut eout = self.extra_out.clone();
        if matches!(role, Role::Ann | Role::Gauge) {
            ein.push(p);
        }
        if matches!(role, Role::Gauge | Role::Cre) {
            eout.push(p);
        }
        let mut k = Kernel::zero_with(&self.grid, ein, eout);
        for (t, b) in &self.blocks {
            if t.role_of(p) != Some(role) {
                continue;
            }
            let rest = t.minus(&Table::elementary(p, role));
            let blk = embed_block(b, n, d, &self.in_factors(t), &self.out_factors(t), &k.in_factors(&rest), &k.out_factors(&rest));
            k.blocks.insert(rest, blk);
        }
        k
    }

    /// Drop blocks whose entries are all exactly zero.
    pub fn pruned(mut self) -> Kernel {
        self.blocks.retain(|_, b| b.iter().any(|z| *z != ZERO));
        self
    }
}

/// Product kernel `X ⊗ f^⊗(𝛋)` from per-point scalar-noise triangular matrices.
pub fn product_kernel(grid: &Grid, x: &Mat, f: &[TriangularMatrix]) -> Kernel {
    assert_eq!(f.len(), grid.len(), "one point matrix per grid point");
    let (n, d) = (grid.n(), grid.d());
    assert_eq!(x.nrows(), n);
    for fx in f {
        assert_eq!((fx.n, fx.d), (1, d), "point matrices carry n = 1 and the grid noise dimension");
    }
    let mut k = Kernel::zero(grid);
    for t in all_tables(grid) {
        let mut b = x.clone();
        let mut zero = false;
        let parts: [(Chain, Slot, Slot); 4] = [
            (t.gauge, Slot::Zero, Slot::Zero),
            (t.cre, Slot::Zero, Slot::Plus),
            (t.ann, Slot::Minus, Slot::Zero),
            (t.time, Slot::Minus, Slot::Plus),
        ];
        for (c, r, s) in parts {
            for p in c.points() {
                let blk = f[p].block(r, s);
                if blk.iter().all(|z| *z == ZERO) {
                    zero = true;
                }
                b = b.kronecker(&blk);
            }
        }
        if zero {
            continue;
        }
        // columns currently ordered (gauge, ann)
        let mut in_from = t.gauge.points();
        in_from.extend(t.ann.points());
        let b = if d == 1 { b } else { embed_block(&b, n, d, &in_from, &t.out_layout(), &t.in_layout(), &t.out_layout()) };
        k.blocks.insert(t, b);
    }
    k
}

/// Per-point nonnegative triangular weights `[[1, ann, time], [0, gauge, cre], [0, 0, 1]]`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct WeightMatrix {
    pub ann: f64,
    pub time: f64,
    pub gauge: f64,
    pub cre: f64,
}

impl WeightMatrix {
    pub const UNIT: WeightMatrix = WeightMatrix { ann: 0.0, time: 0.0, gauge: 1.0, cre: 0.0 };

    pub fn new(ann: f64, time: f64, gauge: f64, cre: f64) -> WeightMatrix {
        assert!(ann >= 0.0 && time >= 0.0 && gauge >= 0.0 && cre >= 0.0, "weights must be nonnegative");
        WeightMatrix { ann, time, gauge, cre }
    }

    /// Blockwise spectral norms of a point matrix.
    pub fn of_point(f: &TriangularMatrix) -> WeightMatrix {
        let nrm = |r, c| spectral_norm(&f.block(r, c));
        WeightMatrix {
            ann: nrm(Slot::Minus, Slot::Zero),
            time: nrm(Slot::Minus, Slot::Plus),
            gauge: nrm(Slot::Zero, Slot::Zero),
            cre: nrm(Slot::Zero, Slot::Plus),
        }
    }

    pub fn matrix(&self) -> [[f64; 3]; 3] {
        [[1.0, self.ann, self.time], [0.0, self.gauge, self.cre], [0.0, 0.0, 1.0]]
    }

    pub fn from_matrix(m: [[f64; 3]; 3]) -> WeightMatrix {
        WeightMatrix { ann: m[0][1], time: m[0][2], gauge: m[1][1], cre: m[1][2] }
    }

    /// `g ζ* g`.
    pub fn star(&self) -> WeightMatrix {
        let m = self.matrix();
        let mut s = [[0.0; 3]; 3];
        for (i, row) in s.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = m[2 - j][2 - i];
            }
        }
        WeightMatrix::from_matrix(s)
    }

    pub fn mul(&self, o: &WeightMatrix) -> WeightMatrix {
        let (a, b) = (self.matrix(), o.matrix());
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        WeightMatrix::from_matrix(m)
    }

    pub fn role(&self, r: Role) -> f64 {
        match r {
            Role::Ann => self.ann,
            Role::Time => self.time,
            Role::Gauge => self.gauge,
            Role::Cre => self.cre,
        }
    }
}

/// The 3×3 antidiagonal unit matrix.
pub fn g_matrix() -> [[f64; 3]; 3] {
    [[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]]
}

/// Pointwise `ζ^⋆(x) ζ(x)`.
pub fn weight_star_product(z: &[WeightMatrix]) -> Vec<WeightMatrix> {
    z.iter().map(|w| w.star().mul(w)).collect()
}

/// `ζ`-weight of a table, `∏ ζ_role(x)`.
pub fn table_weight(z: &[WeightMatrix], t: &Table) -> f64 {
    Role::ALL
        .iter()
        .map(|&r| t.slot(r).points().iter().map(|&p| z[p].role(r)).product::<f64>())
        .product()
}

/// `max_𝛋 ‖T(𝛋)‖ / ∏ ζ`; infinite when a nonzero block has zero weight.
pub fn relative_bound(t: &Kernel, z: &[WeightMatrix]) -> f64 {
    let mut m = 0.0f64;
    for (tab, b) in t.iter() {
        let nb = spectral_norm(b);
        if nb == 0.0 {
            continue;
        }
        let w = table_weight(z, tab);
        if w == 0.0 {
            return f64::INFINITY;
        }
        m = m.max(nb / w);
    }
    m
}

/// `T(𝛋) = Σ_{ϑ⊆ϰ₀⁰} L(ϰ₀⁻, ϰ₊⁻; ϑ, ϰ₊⁰) ⊗ I(ϰ₀⁰∖ϑ)`.
pub fn kernel_from_integrand(l: &Kernel) -> Kernel {
    gauge_mobius(l, false)
}

/// Inverse of [`kernel_from_integrand`], with signs `(−1)^{|κ|}` on removed gauge points.
pub fn integrand_from_kernel(t: &Kernel) -> Kernel {
    gauge_mobius(t, true)
}

fn gauge_mobius(src: &Kernel, alternate: bool) -> Kernel {
    let grid = &src.grid;
    let (n, d) = (grid.n(), grid.d());
    let mut out = Kernel::zero_with(grid, src.extra_in.clone(), src.extra_out.clone());
    let mut targets: Vec<Table> = Vec::new();
    for (t, _) in src.iter() {
        // every table whose gauge slot contains t's gauge slot and is otherwise equal
        let free = grid.full().minus(t.support()).minus(src.extras_mask());
        for extra in free.subsets() {
            targets.push(Table { gauge: t.gauge.union(extra), ..*t });
        }
    }
    targets.sort();
    targets.dedup();
    for kt in targets {
        let mut acc: Option<Mat> = None;
        for th in kt.gauge.subsets() {
            let st = Table { gauge: th, ..kt };
            let b = match src.get(&st) {
                Some(b) => b,
                None => continue,
            };
            let removed = kt.gauge.minus(th).len();
            let sign = if alternate && removed % 2 == 1 { -1.0 } else { 1.0 };
            let e = embed_block(b, n, d, &src.in_factors(&st), &src.out_factors(&st), &out.in_factors(&kt), &out.out_factors(&kt));
            let e = e * c64(sign, 0.0);
            match acc.as_mut() {
                Some(a) => *a += e,
                None => acc = Some(e),
            }
        }
        if let Some(a) = acc {
            out.blocks.insert(kt, a);
        }
    }
    out
}

/// Serialized kernel: table descriptors with complex blocks as `[re, im]` pairs.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct KernelDoc {
    pub system_dim: usize,
    pub noise_dim: usize,
    pub times: Vec<f64>,
    pub weights: Vec<f64>,
    pub entries: Vec<KernelEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct KernelEntry {
    /// Point indices of the annihilation, time, gauge and creation slots.
    pub table: [Vec<usize>; 4],
    pub block: Vec<Vec<[f64; 2]>>,
}

pub fn matrix_to_pairs(m: &Mat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

pub fn matrix_from_pairs(rows: &[Vec<[f64; 2]>]) -> Result<Mat, String> {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    if rows.iter().any(|x| x.len() != c) {
        return Err("ragged matrix rows".into());
    }
    Ok(Mat::from_fn(r, c, |i, j| c64(rows[i][j][0], rows[i][j][1])))
}

impl Kernel {
    pub fn to_doc(&self) -> KernelDoc {
        assert!(self.extra_in.is_empty() && self.extra_out.is_empty(), "only plain kernels serialize");
        KernelDoc {
            system_dim: self.grid.n(),
            noise_dim: self.grid.d(),
            times: self.grid.times().to_vec(),
            weights: self.grid.weights().to_vec(),
            entries: self
                .blocks
                .iter()
                .map(|(t, b)| KernelEntry {
                    table: [t.ann.points(), t.time.points(), t.gauge.points(), t.cre.points()],
                    block: matrix_to_pairs(b),
                })
                .collect(),
        }
    }

    pub fn from_doc(doc: &KernelDoc) -> Result<Kernel, KernelError> {
        let grid = Grid::new(doc.times.clone(), doc.weights.clone(), doc.noise_dim, doc.system_dim)
            .map_err(|e| KernelError::Document(e.to_string()))?;
        let mut k = Kernel::zero(&grid);
        for e in &doc.entries {
            let m = grid.len();
            if e.table.iter().flatten().any(|&p| p >= m) {
                return Err(KernelError::Document(format!("point index out of range in {:?}", e.table)));
            }
            let [a, ti, g, c] = &e.table;
            let t = Table::new(Chain::from_points(a), Chain::from_points(ti), Chain::from_points(g), Chain::from_points(c))?;
            let b = matrix_from_pairs(&e.block).map_err(KernelError::Document)?;
            k.insert(t, b)?;
        }
        Ok(k)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Kernel, KernelError> {
        let doc: KernelDoc = serde_json::from_str(s).map_err(|e| KernelError::Document(e.to_string()))?;
        Kernel::from_doc(&doc)
    }
}

/// Gaussian blocks on every table of the grid (or on each with probability `density`).
pub fn random_kernel(grid: &Grid, rng: &mut crate::sample::SeededRng, density: f64) -> Kernel {
    let mut k = Kernel::zero(grid);
    for t in all_tables(grid) {
        if density < 1.0 && crate::sample::uniform(rng, 0.0, 1.0) >= density {
            continue;
        }
        let (r, c) = k.shape(&t);
        let b = crate::sample::matrix(rng, r, c, 1.0);
        k.blocks.insert(t, b);
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, ONE};
    use crate::sample;
    use proptest::prelude::*;

    fn g1() -> Grid {
        Grid::uniform(1, 0.5, 1, 1).unwrap()
    }

    fn point(f00: C64, fp0: C64, f0m: C64, fpm: C64) -> TriangularMatrix {
        TriangularMatrix::point(&Mat::from_element(1, 1, f00), &Mat::from_element(1, 1, fp0), &Mat::from_element(1, 1, f0m), fpm)
    }

    fn x0() -> Table {
        Table::EMPTY
    }

    #[test]
    fn table_star_examples() {
        assert_eq!(Table::EMPTY.star(), Table::EMPTY);
        let a = Table::elementary(0, Role::Ann);
        assert_eq!(a.star(), Table::elementary(0, Role::Cre));
        let t = Table::elementary(1, Role::Time).with(0, Role::Gauge);
        assert_eq!(t.star(), t);
        assert!(Table::new(Chain::single(0), Chain::single(0), Chain::EMPTY, Chain::EMPTY).is_err());
    }

    #[test]
    fn table_enumeration_counts() {
        let g = Grid::uniform(3, 1.0, 1, 1).unwrap();
        assert_eq!(all_tables(&g).len(), 125);
        assert_eq!(partitions(g.full()).len(), 64);
    }

    #[test]
    fn adjoint_of_elementary_kernels() {
        let g = g1();
        let unit = Kernel::unit(&g);
        assert_eq!(unit.adjoint().distance(&unit), 0.0);
        let t = c64(0.3, 0.7);
        let cre = product_kernel(&g, &Mat::identity(1, 1), &[point(ONE, t, ZERO, ZERO)]);
        let ann = product_kernel(&g, &Mat::identity(1, 1), &[point(ONE, ZERO, t.conj(), ZERO)]);
        assert_eq!(cre.adjoint().distance(&ann), 0.0);
        let time = product_kernel(&g, &Mat::identity(1, 1), &[point(ONE, ZERO, ZERO, t)]);
        let time_c = product_kernel(&g, &Mat::identity(1, 1), &[point(ONE, ZERO, ZERO, t.conj())]);
        assert_eq!(time.adjoint().distance(&time_c), 0.0);
    }

    #[test]
    fn ann_cre_product_on_one_point() {
        let g = g1();
        let (s, t) = (c64(0.4, -0.2), c64(1.3, 0.5));
        let ann = product_kernel(&g, &Mat::identity(1, 1), &[point(ONE, ZERO, s, ZERO)]);
        let cre = product_kernel(&g, &Mat::identity(1, 1), &[point(ONE, t, ZERO, ZERO)]);
        let p = ann.product(&cre).unwrap();
        let val = |tab: Table| p.block(&tab)[(0, 0)];
        assert!((val(x0()) - ONE).norm() < 1e-15);
        assert!((val(Table::elementary(0, Role::Gauge)) - ONE).norm() < 1e-15);
        assert!((val(Table::elementary(0, Role::Ann)) - s).norm() < 1e-15);
        assert!((val(Table::elementary(0, Role::Cre)) - t).norm() < 1e-15);
        assert!((val(Table::elementary(0, Role::Time)) - s * t).norm() < 1e-15);
    }

    #[test]
    fn time_time_product_adds() {
        let g = g1();
        let (s, t) = (c64(0.4, -0.2), c64(1.3, 0.5));
        let a = product_kernel(&g, &Mat::identity(1, 1), &[point(ONE, ZERO, ZERO, s)]);
        let b = product_kernel(&g, &Mat::identity(1, 1), &[point(ONE, ZERO, ZERO, t)]);
        let p = a.product(&b).unwrap();
        assert!((p.block(&Table::elementary(0, Role::Time))[(0, 0)] - (s + t)).norm() < 1e-15);
    }

    #[test]
    fn gauge_product_kernel_structure() {
        let g = Grid::uniform(2, 1.0, 1, 1).unwrap();
        let gv = c64(0.0, 1.0);
        let k = product_kernel(&g, &Mat::identity(1, 1), &[point(gv, ZERO, ZERO, ZERO), point(gv, ZERO, ZERO, ZERO)]);
        for (t, b) in k.iter() {
            assert!(t.is_diagonal());
            assert!((b[(0, 0)] - gv.powi(t.gauge.len() as i32)).norm() < 1e-15);
        }
        assert_eq!(k.len(), 4);
    }

    #[test]
    fn unit_product_kernel_is_unit() {
        let g = Grid::uniform(2, 1.0, 2, 2).unwrap();
        let one = TriangularMatrix::identity(1, 2);
        let k = product_kernel(&g, &Mat::identity(2, 2), &[one.clone(), one]);
        assert_eq!(k.distance(&Kernel::unit(&g)), 0.0);
    }

    #[test]
    fn mobius_single_gauge_block() {
        let g = g1();
        let gv = c64(0.2, 0.9);
        let mut l = Kernel::zero(&g);
        l.insert(Table::elementary(0, Role::Gauge), Mat::from_element(1, 1, gv)).unwrap();
        let t = kernel_from_integrand(&l);
        assert!((t.block(&Table::elementary(0, Role::Gauge))[(0, 0)] - gv).norm() < 1e-15);
        let mut l2 = l.clone();
        l2.insert(Table::EMPTY, Mat::identity(1, 1)).unwrap();
        let t2 = kernel_from_integrand(&l2);
        assert!((t2.block(&Table::elementary(0, Role::Gauge))[(0, 0)] - (gv + ONE)).norm() < 1e-15);
        let mut empty_only = Kernel::zero(&g);
        empty_only.insert(Table::EMPTY, Mat::identity(1, 1)).unwrap();
        assert_eq!(kernel_from_integrand(&empty_only).distance(&Kernel::unit(&g)), 0.0);
    }

    #[test]
    fn weight_matrix_examples() {
        let u = WeightMatrix::UNIT;
        assert_eq!(weight_star_product(&[u])[0], u);
        let c = 0.7;
        let z = WeightMatrix::new(0.0, 0.0, 1.0, c);
        let p = weight_star_product(&[z])[0];
        assert!((p.time - c * c).abs() < 1e-15);
        assert!((p.ann - c).abs() < 1e-15);
        assert_eq!(p.gauge, 1.0);
        let gm = g_matrix();
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| gm[i][k] * gm[k][j]).sum();
                assert_eq!(s, if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn relative_bound_examples() {
        let g = Grid::uniform(2, 1.0, 1, 1).unwrap();
        let z = vec![WeightMatrix::new(0.3, 0.2, 1.5, 0.1); 2];
        assert_eq!(relative_bound(&Kernel::unit(&g), &z), 1.0);
        // gauge weights below one are divided out on the diagonal tables
        let small = vec![WeightMatrix::new(0.3, 0.2, 0.5, 0.1); 2];
        assert_eq!(relative_bound(&Kernel::unit(&g), &small), 4.0);
        assert_eq!(relative_bound(&Kernel::zero(&g), &z), 0.0);
        let mut rng = sample::rng(3);
        let f: Vec<TriangularMatrix> = (0..2)
            .map(|_| point(sample::gauss(&mut rng), sample::gauss(&mut rng), sample::gauss(&mut rng), sample::gauss(&mut rng)))
            .collect();
        let x = Mat::from_element(1, 1, c64(2.0, -1.0));
        let k = product_kernel(&g, &x, &f);
        let zf: Vec<WeightMatrix> = f.iter().map(WeightMatrix::of_point).collect();
        assert!((relative_bound(&k, &zf) - 5f64.sqrt()).abs() < 1e-12);
        let zero_w = vec![WeightMatrix::new(0.0, 0.0, 1.0, 0.0); 2];
        assert_eq!(relative_bound(&k, &zero_w), f64::INFINITY);
    }

    #[test]
    fn serialization_round_trip() {
        let g = Grid::uniform(2, 1.0, 2, 1).unwrap();
        let mut rng = sample::rng(11);
        let k = random_kernel(&g, &mut rng, 0.3);
        let back = Kernel::from_json(&k.to_json()).unwrap();
        assert_eq!(back.distance(&k), 0.0);
        assert!(Kernel::from_json("{").is_err());
    }

    #[test]
    fn shape_errors_are_structural() {
        let g = g1();
        let mut k = Kernel::zero(&g);
        let e = k.insert(Table::elementary(0, Role::Cre), Mat::zeros(2, 2)).unwrap_err();
        assert!(matches!(e, KernelError::Shape { .. }));
    }

    fn random_point(rng: &mut sample::SeededRng, d: usize) -> TriangularMatrix {
        TriangularMatrix::point(
            &sample::matrix(rng, d, d, 1.0),
            &sample::matrix(rng, d, 1, 1.0),
            &sample::matrix(rng, 1, d, 1.0),
            sample::gauss(rng),
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn algebra_laws(seed in 0u64..10_000, m in 0usize..=2, d in 1usize..=2, n in 1usize..=2) {
            let g = Grid::uniform(m, 0.3 * m as f64 + 0.1, d, n).unwrap();
            let mut rng = sample::rng(seed);
            let r = random_kernel(&g, &mut rng, 0.6);
            let s = random_kernel(&g, &mut rng, 0.6);
            let t = random_kernel(&g, &mut rng, 0.6);
            let unit = Kernel::unit(&g);
            prop_assert!(unit.product(&t).unwrap().distance(&t) <= 1e-12);
            prop_assert!(t.product(&unit).unwrap().distance(&t) <= 1e-12);
            let lhs = r.product(&s).unwrap().product(&t).unwrap();
            let rhs = r.product(&s.product(&t).unwrap()).unwrap();
            prop_assert!(lhs.distance(&rhs) <= 1e-12);
            let st = s.product(&t).unwrap().adjoint();
            let ts = t.adjoint().product(&s.adjoint()).unwrap();
            prop_assert!(st.distance(&ts) <= 1e-12);
            prop_assert!(t.adjoint().adjoint().distance(&t) == 0.0);
            let l = integrand_from_kernel(&t);
            prop_assert!(kernel_from_integrand(&l).distance(&t) <= 1e-12);
            prop_assert!(integrand_from_kernel(&kernel_from_integrand(&t)).distance(&t) <= 1e-12);
        }

        #[test]
        fn product_kernels_multiply_pointwise(seed in 0u64..10_000, m in 0usize..=3, d in 1usize..=2) {
            let g = Grid::uniform(m, 1.0, d, 1).unwrap();
            let mut rng = sample::rng(seed);
            let f: Vec<_> = (0..m).map(|_| random_point(&mut rng, d)).collect();
            let x = sample::matrix(&mut rng, 1, 1, 1.0);
            let k = product_kernel(&g, &x, &f);
            let fs: Vec<_> = f.iter().map(|p| p.star()).collect();
            let ks = product_kernel(&g, &x.adjoint(), &fs);
            prop_assert!(ks.distance(&k.adjoint()) <= 1e-12);
            let ff: Vec<_> = f.iter().map(|p| p.star().mul(p)).collect();
            let want = product_kernel(&g, &(x.adjoint() * &x), &ff);
            prop_assert!(ks.product(&k).unwrap().distance(&want) <= 1e-12);
        }

        #[test]
        fn relative_bound_laws(seed in 0u64..10_000, m in 1usize..=2, d in 1usize..=2) {
            let g = Grid::uniform(m, 1.0, d, 1).unwrap();
            let mut rng = sample::rng(seed);
            let t = random_kernel(&g, &mut rng, 0.7);
            let z: Vec<WeightMatrix> = (0..m)
                .map(|_| WeightMatrix::new(
                    sample::uniform(&mut rng, 0.1, 2.0),
                    sample::uniform(&mut rng, 0.1, 2.0),
                    sample::uniform(&mut rng, 0.1, 2.0),
                    sample::uniform(&mut rng, 0.1, 2.0)))
                .collect();
            let zs: Vec<_> = z.iter().map(|w| w.star()).collect();
            let b = relative_bound(&t, &z);
            prop_assert!((relative_bound(&t.adjoint(), &zs) - b).abs() <= 1e-12 * b.max(1.0));
            let tt = t.adjoint().product(&t).unwrap();
            prop_assert!(relative_bound(&tt, &weight_star_product(&z)) <= (1.0 + 1e-9) * b * b);
        }
    }

    #[test]
    fn block_zero_default() {
        let g = g1();
        let k = Kernel::zero(&g);
        let b = k.block(&Table::elementary(0, Role::Ann));
        assert_eq!((b.nrows(), b.ncols()), (1, 1));
        assert_eq!(max_abs(&b), 0.0);
    }
}
