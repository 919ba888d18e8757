//! The indefinite-metric space of three-chain functions on which kernels act
//! pointwise, and the embedding `J` with `ι(T) = J^⋆𝐓J`.

use rayon::prelude::*;

use crate::chain_space::layout::{dim, permute_vector};
use crate::chain_space::{Chain, FockVector, Grid};
use crate::fock_rep::iota;
use crate::kernel_algebra::{Kernel, Table};
use crate::linalg::{c64, max_abs, Col, Mat, C64, ZERO};

/// Three pairwise disjoint chains `(ϰ⁻, ϰ⁰, ϰ⁺)`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub minus: Chain,
    pub zero: Chain,
    pub plus: Chain,
}

impl Triple {
    pub fn new(minus: Chain, zero: Chain, plus: Chain) -> Option<Triple> {
        (minus.disjoint(zero) && minus.disjoint(plus) && zero.disjoint(plus)).then_some(Triple { minus, zero, plus })
    }

    /// `(ϰ⁺, ϰ⁰, ϰ⁻)`.
    pub fn swapped(self) -> Triple {
        Triple { minus: self.plus, zero: self.zero, plus: self.minus }
    }

    pub fn union(self) -> Chain {
        self.minus.union(self.zero).union(self.plus)
    }

    // Base-4 digit per point: 0 absent, 1 minus, 2 zero, 3 plus.
    fn code(self) -> usize {
        let mut c = 0;
        for (k, ch) in [self.minus, self.zero, self.plus].into_iter().enumerate() {
            for p in ch.points() {
                c += (k + 1) << (2 * p);
            }
        }
        c
    }

    fn decode(m: usize, mut c: usize) -> Triple {
        let mut ch = [Chain::EMPTY; 3];
        for p in 0..m {
            let k = c & 3;
            if k > 0 {
                ch[k - 1] = ch[k - 1].union(Chain::single(p));
            }
            c >>= 2;
        }
        Triple { minus: ch[0], zero: ch[1], plus: ch[2] }
    }
}

/// Blocks `a(ϰ⁻, ϰ⁰, ϰ⁺) ∈ H ⊗ E^{⊗ϰ⁰}` for every disjoint triple, `E` factors in
/// time order.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoFockVector {
    pub grid: Grid,
    blocks: Vec<Col>,
}

impl PseudoFockVector {
    pub fn zeros(grid: &Grid) -> PseudoFockVector {
        let m = grid.len();
        let (n, d) = (grid.n(), grid.d());
        let blocks = (0..1usize << (2 * m)).map(|c| Col::zeros(dim(n, d, Triple::decode(m, c).zero.len()))).collect();
        PseudoFockVector { grid: grid.clone(), blocks }
    }

    /// Block 1 at the empty triple, carrying `h` (the first basis vector if `None`).
    pub fn vacuum(grid: &Grid, h: Option<&[C64]>) -> PseudoFockVector {
        let mut a = PseudoFockVector::zeros(grid);
        match h {
            Some(h) => a.blocks[0].copy_from_slice(h),
            None => a.blocks[0][0] = c64(1.0, 0.0),
        }
        a
    }

    pub fn random(grid: &Grid, rng: &mut crate::sample::SeededRng) -> PseudoFockVector {
        let mut a = PseudoFockVector::zeros(grid);
        for b in &mut a.blocks {
            for z in b.iter_mut() {
                *z = crate::sample::gauss(rng);
            }
        }
        a
    }

    /// Every triple of the grid, in storage order.
    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        let m = self.grid.len();
        (0..self.blocks.len()).map(move |c| Triple::decode(m, c))
    }

    pub fn block(&self, t: Triple) -> &Col {
        &self.blocks[t.code()]
    }

    pub fn block_mut(&mut self, t: Triple) -> &mut Col {
        &mut self.blocks[t.code()]
    }

    pub fn sub(&self, o: &PseudoFockVector) -> PseudoFockVector {
        let blocks = self.blocks.iter().zip(&o.blocks).map(|(a, b)| a - b).collect();
        PseudoFockVector { grid: self.grid.clone(), blocks }
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().flat_map(|b| b.iter()).map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// `(a|b) = Σ w(ϰ⁻)w(ϰ⁰)w(ϰ⁺) ⟨a(ϰ⁻,ϰ⁰,ϰ⁺) | b(ϰ⁺,ϰ⁰,ϰ⁻)⟩`.
pub fn pseudo_inner(a: &PseudoFockVector, b: &PseudoFockVector) -> C64 {
    assert_eq!(a.grid, b.grid, "vectors on different grids");
    a.triples()
        .map(|t| {
            let w = a.grid.chain_weight(t.union());
            a.block(t).dotc(b.block(t.swapped())) * w
        })
        .sum()
}

/// `[𝐓a](ϰ⁻,ϰ⁰,ϰ⁺) = Σ T(ϰ₀⁻, ϰ₊⁻; ϰ₀⁰, ϰ₊⁰) a(ϰ₋⁻, ϰ₀⁻ ⊔ ϰ₀⁰, ϰ₊⁻ ⊔ ϰ₊⁰ ⊔ ϰ⁺)`
/// over all splits `ϰ⁻ = ϰ₋⁻ ⊔ ϰ₀⁻ ⊔ ϰ₊⁻`, `ϰ⁰ = ϰ₀⁰ ⊔ ϰ₊⁰`. No quadrature weights.
pub fn decomposable_action(t: &Kernel, a: &PseudoFockVector) -> PseudoFockVector {
    assert!(t.extra_in.is_empty() && t.extra_out.is_empty(), "kernel with extra factors");
    assert_eq!(t.grid, a.grid, "kernel and vector on different grids");
    let grid = &a.grid;
    let (n, d) = (grid.n(), grid.d());
    let out: Vec<(Triple, Col)> = a
        .triples()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|o| {
            let mut acc = Col::zeros(dim(n, d, o.zero.len()));
            let zero_pts = o.zero.points();
            for ann in o.minus.subsets() {
                for time in o.minus.minus(ann).subsets() {
                    let rest = o.minus.minus(ann).minus(time);
                    for gauge in o.zero.subsets() {
                        let cre = o.zero.minus(gauge);
                        let tab = Table { ann, time, gauge, cre };
                        let Some(b) = t.get(&tab) else { continue };
                        let src = Triple { minus: rest, zero: ann.union(gauge), plus: time.union(cre).union(o.plus) };
                        let v = a.block(src);
                        let v = permute_vector(v.as_slice(), n, d, &src.zero.points(), &tab.in_layout());
                        let y = b * Col::from_vec(v);
                        let y = permute_vector(y.as_slice(), n, d, &tab.out_layout(), &zero_pts);
                        acc += Col::from_vec(y);
                    }
                }
            }
            (o, acc)
        })
        .collect();
    let mut res = PseudoFockVector::zeros(grid);
    for (o, v) in out {
        *res.block_mut(o) = v;
    }
    res
}

/// `[Ja](ϰ⁻, ϰ⁰, ϰ⁺) = δ_∅(ϰ⁻) a(ϰ⁰)` for every `ϰ⁺`.
pub fn embed_j(a: &FockVector) -> PseudoFockVector {
    assert!(a.extra.is_empty(), "augmented Fock vector");
    let mut res = PseudoFockVector::zeros(&a.grid);
    let tr: Vec<Triple> = res.triples().filter(|t| t.minus.is_empty()).collect();
    for t in tr {
        res.block_mut(t).copy_from_slice(a.block(t.zero));
    }
    res
}

/// `[J^⋆𝐚](ϰ) = Σ_{ϰ⁻} w(ϰ⁻) a(ϰ⁻, ϰ, ∅)`.
pub fn project_j_star(a: &PseudoFockVector) -> FockVector {
    let grid = &a.grid;
    let mut res = FockVector::zeros(grid);
    for c in grid.chains() {
        let mut acc = Col::zeros(dim(grid.n(), grid.d(), c.len()));
        for minus in grid.full().minus(c).subsets() {
            acc += a.block(Triple { minus, zero: c, plus: Chain::EMPTY }) * c64(grid.chain_weight(minus), 0.0);
        }
        res.block_mut(c).copy_from_slice(acc.as_slice());
    }
    res
}

/// `J^⋆𝐓J` as a dense matrix on the Fock space.
pub fn spatial_matrix(t: &Kernel) -> Mat {
    let grid = &t.grid;
    let total = grid.basis(0).total;
    let cols: Vec<Col> = (0..total)
        .into_par_iter()
        .map(|j| {
            let mut e = Col::zeros(total);
            e[j] = c64(1.0, 0.0);
            project_j_star(&decomposable_action(t, &embed_j(&FockVector::from_data(grid, Vec::new(), e)))).data
        })
        .collect();
    Mat::from_columns(&cols)
}

/// `max |J^⋆𝐓J − ι(T)|` entrywise.
pub fn spatial_identity_defect(t: &Kernel) -> f64 {
    max_abs(&(spatial_matrix(t) - iota(t).m))
}

/// `|(𝐓a|b) − (a|𝐓^⋆b)|`.
pub fn pseudo_adjoint_defect(t: &Kernel, a: &PseudoFockVector, b: &PseudoFockVector) -> f64 {
    (pseudo_inner(&decomposable_action(t, a), b) - pseudo_inner(a, &decomposable_action(&t.adjoint(), b))).norm()
}

/// `(‖J_{[0,t)}a‖², e^{Σw}‖a‖²)` where the sum runs over the points before `t`
/// (at most `e^t` on a uniform grid): `J_{[0,t)}a` keeps the triples inside
/// `[0, t)` with empty `ϰ⁻` and its norm is the Euclidean one.
pub fn truncated_j_bound(a: &FockVector, t: f64) -> (f64, f64) {
    assert!(t >= 0.0, "negative time");
    let grid = &a.grid;
    let past = grid.before(t);
    let mut lhs = 0.0;
    for zero in past.subsets() {
        let s: f64 = a.block(zero).iter().map(|z| z.norm_sqr()).sum();
        if s == 0.0 {
            continue;
        }
        let plus: f64 = past.minus(zero).subsets().map(|p| grid.chain_weight(p)).sum();
        lhs += grid.chain_weight(zero) * s * plus;
    }
    let mass: f64 = past.points().iter().map(|&p| grid.weight(p)).sum();
    (lhs, mass.exp() * a.norm().powi(2))
}

/// Gram matrix of `(·|·)` in the block basis: the swap permutation times the
/// chain weights.
pub fn gram_matrix(grid: &Grid) -> Mat {
    let z = PseudoFockVector::zeros(grid);
    let mut offsets = Vec::new();
    let mut total = 0;
    for t in z.triples() {
        offsets.push((t, total));
        total += z.block(t).len();
    }
    let index: std::collections::HashMap<Triple, usize> = offsets.iter().copied().collect();
    let mut g = Mat::from_element(total, total, ZERO);
    for &(t, off) in &offsets {
        let w = c64(grid.chain_weight(t.union()), 0.0);
        let so = index[&t.swapped()];
        for i in 0..z.block(t).len() {
            g[(off + i, so + i)] = w;
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_algebra::random_kernel;
    use crate::sample;
    use proptest::prelude::*;

    fn grid(m: usize, d: usize, n: usize) -> Grid {
        Grid::uniform(m, 0.5 * m as f64, d, n).unwrap()
    }

    #[test]
    fn inner_product_examples() {
        let g = grid(1, 1, 1);
        let v = PseudoFockVector::vacuum(&g, None);
        assert_eq!(pseudo_inner(&v, &v), c64(1.0, 0.0));
        let x = Chain::single(0);
        let mut a = PseudoFockVector::zeros(&g);
        a.block_mut(Triple::new(x, Chain::EMPTY, Chain::EMPTY).unwrap())[0] = c64(1.0, 0.0);
        assert_eq!(pseudo_inner(&a, &a), ZERO);
        a.block_mut(Triple::new(Chain::EMPTY, Chain::EMPTY, x).unwrap())[0] = c64(1.0, 0.0);
        assert!((pseudo_inner(&a, &a) - c64(1.0, 0.0)).norm() < 1e-15);
        assert!(Triple::new(x, x, Chain::EMPTY).is_none());
    }

    #[test]
    fn unit_kernel_acts_as_identity() {
        let g = grid(2, 2, 1);
        let a = PseudoFockVector::random(&g, &mut sample::rng(1));
        assert!(decomposable_action(&Kernel::unit(&g), &a).sub(&a).max_abs() < 1e-15);
    }

    #[test]
    fn truncated_bound_examples() {
        let g = grid(1, 1, 1);
        let v = FockVector::vacuum(&g, None);
        let (lhs, rhs) = truncated_j_bound(&v, 0.5);
        assert!((lhs - 1.5).abs() < 1e-15);
        assert!((rhs - 0.5f64.exp()).abs() < 1e-15);
        let a = FockVector::from_data(&g, vec![], Col::from_vec(vec![c64(0.3, 0.1), c64(1.0, -2.0)]));
        let (lhs, _) = truncated_j_bound(&a, 0.0);
        assert!((lhs - 0.1).abs() < 1e-15);
    }

    #[test]
    fn gram_matrix_is_a_weighted_involution() {
        let g = grid(2, 2, 1);
        let m = gram_matrix(&g);
        assert!(max_abs(&(&m - m.adjoint())) == 0.0);
        let rank = m.clone().svd(false, false).singular_values.iter().filter(|s| **s > 1e-12).count();
        assert_eq!(rank, m.nrows());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn inner_is_hermitian_and_j_is_pseudo_isometric(seed in 0u64..10_000, m in 1usize..=3, d in 1usize..=2) {
            let g = grid(m, d, 2);
            let mut rng = sample::rng(seed);
            let (a, b) = (PseudoFockVector::random(&g, &mut rng), PseudoFockVector::random(&g, &mut rng));
            prop_assert!((pseudo_inner(&a, &b) - pseudo_inner(&b, &a).conj()).norm() < 1e-12);
            let fa = FockVector::from_data(&g, vec![], Col::from_fn(g.basis(0).total, |_, _| sample::gauss(&mut rng)));
            let fb = FockVector::from_data(&g, vec![], Col::from_fn(g.basis(0).total, |_, _| sample::gauss(&mut rng)));
            prop_assert!((pseudo_inner(&embed_j(&fa), &embed_j(&fb)) - fa.inner(&fb)).norm() < 1e-12);
            prop_assert!((project_j_star(&a).inner(&fb) - pseudo_inner(&a, &embed_j(&fb))).norm() < 1e-12);
        }

        #[test]
        fn spatial_transformation_is_iota(seed in 0u64..10_000, m in 1usize..=3, d in 1usize..=2) {
            let g = grid(m, d, 1 + (seed as usize % 2));
            let t = random_kernel(&g, &mut sample::rng(seed), 0.7);
            prop_assert!(spatial_identity_defect(&t) < 1e-12);
        }

        #[test]
        fn pseudo_adjoint_and_products(seed in 0u64..10_000, d in 1usize..=2) {
            let g = grid(2, d, 2);
            let mut rng = sample::rng(seed);
            let (s, t) = (random_kernel(&g, &mut rng, 0.8), random_kernel(&g, &mut rng, 0.8));
            let (a, b) = (PseudoFockVector::random(&g, &mut rng), PseudoFockVector::random(&g, &mut rng));
            prop_assert!(pseudo_adjoint_defect(&t, &a, &b) < 1e-12);
            let two = decomposable_action(&s, &decomposable_action(&t, &a));
            let one = decomposable_action(&s.product(&t).unwrap(), &a);
            prop_assert!(two.sub(&one).max_abs() < 1e-12);
        }

        #[test]
        fn truncated_bound_holds(seed in 0u64..10_000, m in 1usize..=4, frac in 0.0f64..1.2) {
            let g = grid(m, 1, 2);
            let mut rng = sample::rng(seed);
            let a = FockVector::from_data(&g, vec![], Col::from_fn(g.basis(0).total, |_, _| sample::gauss(&mut rng)));
            let (lhs, rhs) = truncated_j_bound(&a, frac * g.horizon());
            prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        }
    }
}
