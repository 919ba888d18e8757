//! The nonadapted Itô formula at kernel level (exact) and operator level
//! (convergent as the grid refines).

use crate::chain_space::Chain;
use crate::fock_rep::{iota, n_transform_over, operator_scale_norm, single_integrals, FockError, FockOperator, Integrand, IntegrandTable};
use crate::kernel_algebra::{tables_within, Kernel, Role};
use crate::linalg::{c64, Mat, C64};

/// Triangular matrix of Fock operators at one point `p`: corners act on `𝒢`,
/// the other entries carry the `E(p)` factor as an extra input (annihilation,
/// gauge) or output (gauge, creation).
#[derive(Clone, Debug)]
pub struct PointTriangle {
    pub p: usize,
    pub minus: FockOperator,
    pub plus: FockOperator,
    pub ann: FockOperator,
    pub time: FockOperator,
    pub gauge: FockOperator,
    pub cre: FockOperator,
}

impl PointTriangle {
    /// `A ⊗ 1(p)`.
    pub fn lift(a: &FockOperator, p: usize) -> PointTriangle {
        let g = &a.grid;
        PointTriangle {
            p,
            minus: a.clone(),
            plus: a.clone(),
            ann: FockOperator::zeros_with(g, vec![p], vec![]),
            time: FockOperator::zeros(g),
            gauge: a.lift_extra(&[p]),
            cre: FockOperator::zeros_with(g, vec![], vec![p]),
        }
    }

    /// Corners `ι` of `T` on tables avoiding `p`, entries `ι` of the point
    /// derivatives of `T` at `p`. The time entry has no extra factor, so it is
    /// compressed to chains avoiding `p` to keep products from summing over them.
    pub fn of_kernel(t: &Kernel, p: usize) -> PointTriangle {
        let u = iota(&avoiding(t, p));
        PointTriangle {
            p,
            minus: u.clone(),
            plus: u,
            ann: iota(&t.derivative(p, Role::Ann)),
            time: iota(&t.derivative(p, Role::Time)).compressed(Chain::single(p)),
            gauge: iota(&t.derivative(p, Role::Gauge)),
            cre: iota(&t.derivative(p, Role::Cre)),
        }
    }

    pub fn entry(&self, role: Role) -> &FockOperator {
        match role {
            Role::Ann => &self.ann,
            Role::Time => &self.time,
            Role::Gauge => &self.gauge,
            Role::Cre => &self.cre,
        }
    }

    /// `g M* g` with the weighted Fock adjoint.
    pub fn star(&self) -> PointTriangle {
        PointTriangle {
            p: self.p,
            minus: self.plus.adjoint(),
            plus: self.minus.adjoint(),
            ann: self.cre.adjoint(),
            time: self.time.adjoint(),
            gauge: self.gauge.adjoint(),
            cre: self.ann.adjoint(),
        }
    }

    pub fn mul(&self, o: &PointTriangle) -> Result<PointTriangle, FockError> {
        assert_eq!(self.p, o.p, "triangles at different points");
        Ok(PointTriangle {
            p: self.p,
            minus: self.minus.compose(&o.minus)?,
            plus: self.plus.compose(&o.plus)?,
            ann: self.minus.compose(&o.ann)?.add(&self.ann.compose(&o.gauge)?),
            time: self.minus.compose(&o.time)?.add(&self.ann.compose(&o.cre)?).add(&self.time.compose(&o.plus)?),
            gauge: self.gauge.compose(&o.gauge)?,
            cre: self.gauge.compose(&o.cre)?.add(&self.cre.compose(&o.plus)?),
        })
    }

    pub fn add(&self, o: &PointTriangle) -> PointTriangle {
        PointTriangle {
            p: self.p,
            minus: self.minus.add(&o.minus),
            plus: self.plus.add(&o.plus),
            ann: self.ann.add(&o.ann),
            time: self.time.add(&o.time),
            gauge: self.gauge.add(&o.gauge),
            cre: self.cre.add(&o.cre),
        }
    }

    pub fn sub(&self, o: &PointTriangle) -> PointTriangle {
        self.add(&o.scale(c64(-1.0, 0.0)))
    }

    pub fn scale(&self, z: C64) -> PointTriangle {
        PointTriangle {
            p: self.p,
            minus: self.minus.scale(z),
            plus: self.plus.scale(z),
            ann: self.ann.scale(z),
            time: self.time.scale(z),
            gauge: self.gauge.scale(z),
            cre: self.cre.scale(z),
        }
    }

    /// Store the four off-corner entries in an integrand table.
    pub fn store(&self, table: &mut IntegrandTable) -> Result<(), FockError> {
        for role in Role::ALL {
            table.set(self.p, role, self.entry(role).clone())?;
        }
        Ok(())
    }
}

/// `max |(T^⋆·T)(𝛋 ⊔ 𝐱) − (𝐓^⋆𝐓)(𝛋)|` over points and roles, where the
/// triangular matrix `𝐓(x)` has corners `T` and entries the point derivatives.
pub fn ito_kernel_defect(t: &Kernel) -> f64 {
    let ts = t.adjoint();
    let k = ts.product(t).expect("adjoint composes");
    let pr = |a: &Kernel, b: &Kernel| a.product(b).expect("extras compose");
    let mut worst = 0.0f64;
    for p in t.grid.full().minus(t.extras_mask()).points() {
        let d = |r| t.derivative(p, r);
        let (da, dt, dg, dc) = (d(Role::Ann), d(Role::Time), d(Role::Gauge), d(Role::Cre));
        let (das, dts, dgs, dcs) = (da.adjoint(), dt.adjoint(), dg.adjoint(), dc.adjoint());
        let want = [
            (Role::Gauge, pr(&dgs, &dg)),
            (Role::Cre, pr(&dgs, &dc).add(&pr(&das, t))),
            (Role::Ann, pr(&ts, &da).add(&pr(&dcs, &dg))),
            (Role::Time, pr(&ts, &dt).add(&pr(&dcs, &dc)).add(&pr(&dts, t))),
        ];
        for (role, w) in want {
            worst = worst.max(avoiding(&k.derivative(p, role), p).distance(&avoiding(&w, p)));
        }
    }
    worst
}

// Time-slot derivatives carry no extra factor, so products still range over
// tables containing `p`; those are not part of the identity.
fn avoiding(k: &Kernel, p: usize) -> Kernel {
    let mut out = Kernel::zero_with(&k.grid, k.extra_in.clone(), k.extra_out.clone());
    for (t, b) in k.iter() {
        if t.role_of(p).is_none() {
            out.insert(*t, b.clone()).expect("same layout");
        }
    }
    out
}

/// Product-type pointwise integrand: `L(𝛝) = ∏ c_role` over the points of `𝛝`,
/// tensored with the identity on everything else. Coefficients are
/// `[annihilation, time, gauge, creation]`.
pub fn product_integrand(grid: &crate::chain_space::Grid, coeffs: [C64; 4]) -> Integrand {
    let mut blocks = std::collections::BTreeMap::new();
    let n = grid.n();
    for th in tables_within(grid.full()) {
        let v = coeffs[0].powi(th.ann.len() as i32)
            * coeffs[1].powi(th.time.len() as i32)
            * coeffs[2].powi(th.gauge.len() as i32)
            * coeffs[3].powi(th.cre.len() as i32);
        blocks.insert(th, Mat::identity(n, n) * v);
    }
    Integrand::pointwise(grid, &blocks)
}

// Discrete coincidence terms dropped by the triangular product: on a grid the
// block at `p` also carries `w·(X_time Y_ann, X_time Y_time, X_cre Y_ann, X_cre Y_time)`.
fn coincidence(x: &PointTriangle, y: &PointTriangle, w: f64) -> Result<PointTriangle, FockError> {
    let w = c64(w, 0.0);
    let grid = &x.minus.grid;
    Ok(PointTriangle {
        p: x.p,
        minus: FockOperator::zeros(grid),
        plus: FockOperator::zeros(grid),
        ann: x.time.compose(&y.ann)?.scale(w),
        time: x.time.compose(&y.time)?.scale(w),
        gauge: x.cre.compose(&y.ann)?.scale(w),
        cre: x.cre.compose(&y.time)?.scale(w),
    })
}

fn operator_defect(l: &Integrand, t: f64, xi_plus: f64, xi_minus: f64, discrete: bool) -> Result<f64, FockError> {
    let grid = &l.grid;
    let mut table = IntegrandTable::zero(grid);
    for p in grid.before(t).points() {
        let past = grid.before(grid.time(p));
        let before = n_transform_over(past, l);
        let after = n_transform_over(past.union(Chain::single(p)), l);
        let u = PointTriangle::of_kernel(&before, p);
        let g = PointTriangle::of_kernel(&after, p);
        let (gs, us) = (g.star(), u.star());
        let mut diff = gs.mul(&g)?.sub(&us.mul(&u)?);
        if discrete {
            let w = grid.weight(p);
            diff = diff.add(&coincidence(&gs, &g, w)?).sub(&coincidence(&us, &u, w)?);
        }
        diff.store(&mut table)?;
    }
    let ut = iota(&n_transform_over(grid.before(t), l));
    let u0 = iota(&n_transform_over(Chain::EMPTY, l));
    let lhs = ut.adjoint().compose(&ut)?.sub(&u0.adjoint().compose(&u0)?);
    let rhs = single_integrals(t, &table);
    Ok(operator_scale_norm(&lhs.sub(&rhs), xi_plus, xi_minus))
}

/// `‖U^{t*}U^t − U^{0*}U^0 − Λ^t(𝐆^⋆𝐆 − 𝐔^⋆𝐔)‖_{ξ⁺}^{ξ₋}` for `U^t = ι(N_{[0,t)}(L))`.
///
/// At a point `x`, `𝐔(x)` and `𝐆(x)` carry the point derivatives of the
/// process just before and just after `t(x)`; their corners agree.
pub fn ito_operator_defect(l: &Integrand, t: f64, xi_plus: f64, xi_minus: f64) -> Result<f64, FockError> {
    operator_defect(l, t, xi_plus, xi_minus, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_space::Grid;
    use crate::fock_rep::n_transform;
    use crate::kernel_algebra::{random_kernel, Table};
    use crate::sample;
    use std::collections::BTreeMap;

    const COEFFS: [C64; 4] = [C64::new(0.12, 0.03), C64::new(-0.09, 0.06), C64::new(0.06, 0.15), C64::new(0.18, -0.03)];

    #[test]
    fn unit_kernel_has_no_defect() {
        let g = Grid::uniform(2, 1.0, 2, 1).unwrap();
        assert!(ito_kernel_defect(&Kernel::unit(&g)) < 1e-15);
        let mut blocks = BTreeMap::new();
        blocks.insert(Table::EMPTY, Mat::identity(1, 1));
        let l = Integrand::pointwise(&g, &blocks);
        assert!(ito_operator_defect(&l, 1.0, 2.0, 0.5).unwrap() < 1e-14);
    }

    #[test]
    fn kernel_identity_on_random_kernels() {
        for (m, d, n, seed) in [(2, 1, 1, 1), (3, 1, 2, 2), (2, 2, 1, 3), (3, 2, 1, 4)] {
            let g = Grid::uniform(m, 1.0, d, n).unwrap();
            let mut rng = sample::rng(seed);
            let t = random_kernel(&g, &mut rng, 0.6);
            assert!(ito_kernel_defect(&t) < 1e-12, "m={m} d={d}");
        }
    }

    #[test]
    fn kernel_identity_on_random_integrand() {
        let g = Grid::uniform(3, 1.0, 1, 1).unwrap();
        let mut rng = sample::rng(9);
        let l = Integrand::random(&g, &mut rng, 0.5);
        assert!(ito_kernel_defect(&n_transform(0.7, &l)) < 1e-12);
    }

    #[test]
    fn defect_is_the_coincidence_terms() {
        for (m, d, n) in [(3, 1, 1), (2, 2, 1), (2, 1, 2)] {
            let g = Grid::uniform(m, 1.0, d, n).unwrap();
            let mut rng = sample::rng(m as u64);
            let l = Integrand::random(&g, &mut rng, 0.5);
            let e = operator_defect(&l, 1.0, 2.0, 0.5, true).unwrap();
            assert!(e < 1e-12, "m={m} d={d} n={n} {e:e}");
            assert!(ito_operator_defect(&l, 1.0, 2.0, 0.5).unwrap() > 1e-6);
        }
    }

    #[test]
    fn product_integrand_defect_decreases() {
        let d: Vec<f64> = [2, 4]
            .iter()
            .map(|&m| {
                let g = Grid::uniform(m, 1.0, 1, 1).unwrap();
                ito_operator_defect(&product_integrand(&g, COEFFS), 1.0, 2.0, 0.5).unwrap()
            })
            .collect();
        assert!(d[1] < 0.6 * d[0], "{d:?}");
    }
}
