//! Deterministic test batteries behind `verify` and `norms`.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use super::report::{sub_seed, CaseRecord, ConvergenceRecord, SuiteReport, EXACT_TOL, SLOPE_THRESHOLD};
use super::HarnessError;
use crate::chain_space::{FockVector, Grid};
use crate::evolution::{
    canonical_decomposition, chronological_kernel, evolution_norm_bound_check, hamiltonian_to_scattering, kernel_isometry_defect,
    lebesgue_amplitude, local_evolution, pseudo_unitarity_check, random_pseudo_hermitian, second_quantization, solve_evolution,
    system_trivial_field, unitarity_defect_local, vacuum_block, brownian_point, GeneratorField, HamiltonianField,
};
use crate::flows::{
    conjugation_defect, flow_norm_bound_check, hermiticity_defect, homomorphism_defect, kernel_homomorphism_defect, recurrence_defect,
    transformed_process_defect, unitality_defect, InitialMap, StructureMap,
};
use crate::fock_rep::{
    check_intertwining, exponential_bound, iota, iota_adjoint_check, ito_sum_compare, multiple_integral_bound, n_transform,
    operator_scale_norm, product_multiplicativity_defect, product_scale_pair, reconstruction_defect, EtaTriples, Integrand,
    IntegrandTable, OperatorFamily,
};
use crate::ito_calculus::{ito_expansion, ito_kernel_defect, ito_operator_defect, ito_product_derivative, product_integrand, Slot, TriangularMatrix};
use crate::kernel_algebra::{
    integrand_from_kernel, kernel_from_integrand, product_kernel, random_kernel, relative_bound, weight_star_product, Kernel, Role, Table,
    WeightMatrix,
};
use crate::linalg::{c64, max_abs, Col, Mat, C64, I, ONE, ZERO};
use crate::pseudo_fock::{embed_j, pseudo_adjoint_defect, pseudo_inner, spatial_identity_defect, truncated_j_bound, PseudoFockVector};
use crate::sample::{self, SeededRng};

pub const SUITES: [&str; 7] = ["exact-identities", "multiplicativity", "ito", "evolution", "pseudo-fock", "flows", "norms"];

/// Slack allowed on inequalities, relative to `max(1, bound)`.
pub const BOUND_SLACK: f64 = 1e-9;
/// Tolerance on the adjoint norm duality, relative to `max(1, norm)`.
pub const DUALITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteOptions {
    /// Grid sizes: the sweep of convergence checks, or the sizes of exact
    /// checks in `exact-identities` and `pseudo-fock`. Each suite has a default.
    pub grids: Option<Vec<usize>>,
    pub seed: u64,
    pub tolerance: f64,
    /// Random instances per check; each suite has a default.
    pub samples: Option<usize>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { grids: None, seed: 0, tolerance: EXACT_TOL, samples: None }
    }
}

/// Run a named suite.
pub fn run_suite(name: &str, o: &SuiteOptions) -> Result<SuiteReport, HarnessError> {
    let start = Instant::now();
    let mut r = match name {
        "exact-identities" => exact_identities(o)?,
        "multiplicativity" => multiplicativity(o)?,
        "ito" => ito(o)?,
        "evolution" => evolution(o)?,
        "pseudo-fock" => pseudo_fock(o)?,
        "flows" => flows(o)?,
        "norms" => norms(o)?,
        other => return Err(HarnessError::UnknownSuite(other.into())),
    };
    r.time("total", start.elapsed().as_secs_f64());
    Ok(r)
}

fn grid(m: usize, d: usize, n: usize) -> Result<Grid, HarnessError> {
    Grid::uniform(m, 1.0, d, n).map_err(|e| HarnessError::Grid(e.to_string()))
}

fn rng_for(o: &SuiteOptions, label: &str, i: usize) -> (SeededRng, u64) {
    let s = sub_seed(o.seed, label, i);
    (sample::rng(s), s)
}

/// `(m, d, n)` cycling through the grid list, then `d`, then `n`.
fn shape(grids: &[usize], i: usize) -> (usize, usize, usize) {
    let k = grids.len();
    (grids[i % k], 1 + (i / k) % 2, 1 + (i / (2 * k)) % 2)
}

fn relative_excess(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs) / rhs.abs().max(1.0)
}

/// Run instances in parallel and keep them in index order.
fn instances<F>(r: &mut SuiteReport, label: &str, count: usize, f: F) -> Result<(), HarnessError>
where
    F: Fn(usize) -> Result<Vec<CaseRecord>, HarnessError> + Sync + Send,
{
    let start = Instant::now();
    let out: Vec<Result<Vec<CaseRecord>, HarnessError>> = (0..count).into_par_iter().map(f).collect();
    for cases in out {
        for c in cases? {
            r.case(c);
        }
    }
    r.time(label, start.elapsed().as_secs_f64());
    Ok(())
}

/// Sweep over grid sizes in parallel, `dx = 1/M` on `[0, 1)`.
fn sweep<F>(r: &mut SuiteReport, name: &str, grids: &[usize], f: F) -> Result<(), HarnessError>
where
    F: Fn(usize) -> Result<f64, HarnessError> + Sync + Send,
{
    let start = Instant::now();
    let defects: Vec<f64> = grids.par_iter().map(|&m| f(m)).collect::<Result<_, _>>()?;
    let dx = grids.iter().map(|&m| 1.0 / m as f64).collect();
    r.sweep(ConvergenceRecord::new(name, grids.to_vec(), dx, defects, SLOPE_THRESHOLD));
    r.time(name, start.elapsed().as_secs_f64());
    Ok(())
}

fn random_vector(g: &Grid, rng: &mut SeededRng) -> FockVector {
    FockVector::from_data(g, vec![], Col::from_fn(g.basis(0).total, |_, _| sample::gauss(rng)))
}

/// Point matrix `[[1, ann, time], [·, I + s·N, cre], [·, ·, 1]]` with normalized Gaussian blocks.
fn random_point(rng: &mut SeededRng, d: usize, s: f64) -> TriangularMatrix {
    let gauge = Mat::identity(d, d) + sample::matrix(rng, d, d, s);
    let cre = sample::matrix(rng, d, 1, s);
    let ann = sample::matrix(rng, 1, d, s);
    TriangularMatrix::point(&gauge, &cre, &ann, sample::gauss(rng) * s)
}

fn unitary_field(g: &Grid, rng: &mut SeededRng, scale: f64) -> Result<GeneratorField, HarnessError> {
    let pts = (0..g.len()).map(|_| hamiltonian_to_scattering(&random_pseudo_hermitian(rng, g.n(), g.d(), scale))).collect();
    Ok(GeneratorField::new(g, pts)?)
}

fn exact_identities(o: &SuiteOptions) -> Result<SuiteReport, HarnessError> {
    let grids = o.grids.clone().unwrap_or_else(|| vec![1, 2, 3]);
    let samples = o.samples.unwrap_or(200);
    let tol = o.tolerance;
    let mut r = SuiteReport::new("exact-identities", o.seed, grids.clone(), tol);
    instances(&mut r, "algebra", samples, |i| {
        let (m, d, n) = shape(&grids, i);
        let g = grid(m, d, n)?;
        let (mut rng, s) = rng_for(o, "algebra", i);
        let inputs = format!("m={m} d={d} n={n} seed={s}");
        let (a, b, c) = (random_kernel(&g, &mut rng, 0.5), random_kernel(&g, &mut rng, 0.5), random_kernel(&g, &mut rng, 0.5));
        let unit = Kernel::unit(&g);
        let assoc = a.product(&b)?.product(&c)?.distance(&a.product(&b.product(&c)?)?);
        let units = unit.product(&b)?.distance(&b).max(b.product(&unit)?.distance(&b));
        let star = a.product(&b)?.adjoint().distance(&b.adjoint().product(&a.adjoint())?);
        let round = kernel_from_integrand(&integrand_from_kernel(&b)).distance(&b).max(integrand_from_kernel(&kernel_from_integrand(&b)).distance(&b));
        Ok(vec![
            CaseRecord::new("associativity", inputs.clone(), assoc, tol),
            CaseRecord::new("unit-laws", inputs.clone(), units, tol),
            CaseRecord::new("star-antimultiplicative", inputs.clone(), star, tol),
            CaseRecord::new("integrand-round-trip", inputs, round, tol),
        ])
    })?;
    instances(&mut r, "representation", samples.div_ceil(2), |i| {
        let (m, d, n) = shape(&grids, i);
        let g = grid(m, d, n)?;
        let (mut rng, s) = rng_for(o, "representation", i);
        let inputs = format!("m={m} d={d} n={n} seed={s}");
        let adj = iota_adjoint_check(&random_kernel(&g, &mut rng, 0.5));
        let l = Integrand::random(&g, &mut rng, 0.5);
        let b = OperatorFamily::from_integrand(&l);
        let times = [0.0, 0.5, 1.5];
        let recon = times.iter().map(|&t| reconstruction_defect(t, &b)).fold(0.0, f64::max);
        let inter = times.iter().map(|&t| check_intertwining(t, &l)).fold(0.0, f64::max);
        // adapted step process from a pointwise integrand
        let mut blocks = BTreeMap::new();
        blocks.insert(Table::EMPTY, Mat::identity(n, n));
        for p in 0..m {
            for role in Role::ALL {
                let th = Table::elementary(p, role);
                let (rows, cols) = Kernel::zero_with(&g, th.in_layout(), th.out_layout()).shape(&Table::EMPTY);
                blocks.insert(th, sample::matrix(&mut rng, rows, cols, 1.0));
            }
        }
        let pw = Integrand::pointwise(&g, &blocks);
        let u: Vec<_> = (0..m).map(|p| iota(&n_transform(g.time(p), &pw))).collect();
        let sums = ito_sum_compare(1.0, &IntegrandTable::random(&g, &mut rng), &u)?;
        Ok(vec![
            CaseRecord::new("iota-adjoint", inputs.clone(), adj, tol),
            CaseRecord::new("increment-reconstruction", inputs.clone(), recon, tol),
            CaseRecord::new("transform-intertwining", inputs.clone(), inter, tol),
            CaseRecord::new("ito-sum-equivalence", inputs, sums, tol),
        ])
    })?;
    Ok(r)
}

fn scalar_point(f00: C64, fp0: C64, f0m: C64, fpm: C64) -> TriangularMatrix {
    let e = |z| Mat::from_element(1, 1, z);
    TriangularMatrix::point(&e(f00), &e(fp0), &e(f0m), fpm)
}

fn multiplicativity(o: &SuiteOptions) -> Result<SuiteReport, HarnessError> {
    let grids = o.grids.clone().unwrap_or_else(|| vec![2, 4, 8, 16]);
    let samples = o.samples.unwrap_or(40);
    let tol = o.tolerance;
    let mut r = SuiteReport::new("multiplicativity", o.seed, grids.clone(), tol);
    // one point of weight ½
    let g1 = Grid::uniform(1, 0.5, 1, 1).map_err(|e| HarnessError::Grid(e.to_string()))?;
    let (mut rng, s) = rng_for(o, "fixture", 0);
    let (sv, tv) = (sample::gauss(&mut rng), sample::gauss(&mut rng));
    let id = Mat::identity(1, 1);
    let ann = product_kernel(&g1, &id, &[scalar_point(ONE, ZERO, sv, ZERO)]);
    let cre = product_kernel(&g1, &id, &[scalar_point(ONE, tv, ZERO, ZERO)]);
    let want = Mat::from_row_slice(2, 2, &[ONE + sv * tv * 0.5, sv * 0.5, tv, ONE]);
    let inputs = format!("s={sv} t={tv} seed={s}");
    let prod = iota(&ann).compose(&iota(&cre))?;
    r.case(CaseRecord::new("fixture-operator-product", inputs.clone(), max_abs(&(prod.m - &want)), tol));
    r.case(CaseRecord::new("fixture-kernel-product", inputs, max_abs(&(iota(&ann.product(&cre)?).m - &want)), tol));
    instances(&mut r, "pointwise", samples, |i| {
        let (m, d, n) = shape(&[1, 2, 3], i);
        let g = grid(m, d, n)?;
        let (mut rng, s) = rng_for(o, "pointwise", i);
        let f: Vec<_> = (0..m).map(|_| random_point(&mut rng, d, 0.7)).collect();
        let h: Vec<_> = (0..m).map(|_| random_point(&mut rng, d, 0.7)).collect();
        let (x, y) = (sample::matrix(&mut rng, n, n, 1.0), sample::matrix(&mut rng, n, n, 1.0));
        let fh: Vec<_> = f.iter().zip(&h).map(|(a, b)| a.mul(b)).collect();
        let lhs = product_kernel(&g, &x, &f).product(&product_kernel(&g, &y, &h))?;
        let defect = lhs.distance(&product_kernel(&g, &(&x * &y), &fh));
        Ok(vec![CaseRecord::new("product-kernel-law", format!("m={m} d={d} n={n} seed={s}"), defect, tol)])
    })?;
    let (mut rng, _) = rng_for(o, "sweep", 0);
    let (f0, h0) = (random_point(&mut rng, 1, 0.1), random_point(&mut rng, 1, 0.1));
    let x = Mat::identity(2, 2) + sample::matrix(&mut rng, 2, 2, 0.1);
    let y = Mat::identity(2, 2) + sample::matrix(&mut rng, 2, 2, 0.1);
    let seed = o.seed;
    sweep(&mut r, "random-product-kernels", &grids, |m| {
        let g = grid(m, 1, 2)?;
        let (f, h) = (vec![f0.clone(); m], vec![h0.clone(); m]);
        let (xp, xm) = product_scale_pair(&f, &h);
        Ok(product_multiplicativity_defect(&g, (&x, &f), (&y, &h), xp, xm, seed))
    })?;
    Ok(r)
}

fn random_triangular(rng: &mut SeededRng, n: usize, d: usize, corner: bool) -> TriangularMatrix {
    let c = if corner { sample::matrix(rng, n, n, 1.0) } else { Mat::zeros(n, n) };
    TriangularMatrix::from_blocks(
        &c,
        &sample::matrix(rng, n * d, n * d, 1.0),
        &sample::matrix(rng, n * d, n, 1.0),
        &sample::matrix(rng, n, n * d, 1.0),
        &sample::matrix(rng, n, n, 1.0),
        d,
    )
}

fn ito(o: &SuiteOptions) -> Result<SuiteReport, HarnessError> {
    let grids = o.grids.clone().unwrap_or_else(|| vec![2, 3, 4, 5, 6]);
    let samples = o.samples.unwrap_or(60);
    let tol = o.tolerance;
    let mut r = SuiteReport::new("ito", o.seed, grids.clone(), tol);
    instances(&mut r, "exact", samples, |i| {
        let (m, d, n) = shape(&[1, 2, 3], i);
        let g = grid(m, d, n)?;
        let (mut rng, s) = rng_for(o, "ito", i);
        let inputs = format!("m={m} d={d} n={n} seed={s}");
        let kd = ito_kernel_defect(&random_kernel(&g, &mut rng, 0.6));
        let u = random_triangular(&mut rng, n, d, true);
        let dd = random_triangular(&mut rng, n, d, false);
        let lhs = ito_product_derivative(&u, &u.add(&dd)).map_err(|e| HarnessError::Check(e.to_string()))?;
        let td = max_abs(&(lhs.m - ito_expansion(&u, &dd).m));
        Ok(vec![CaseRecord::new("kernel-ito-identity", inputs.clone(), kd, tol), CaseRecord::new("triangular-ito-identity", inputs, td, tol)])
    })?;
    let (mut rng, _) = rng_for(o, "sweep", 0);
    let coeffs: [C64; 4] = std::array::from_fn(|_| sample::gauss(&mut rng) * 0.15);
    sweep(&mut r, "operator-ito-formula", &grids, |m| {
        let g = grid(m, 1, 1)?;
        Ok(ito_operator_defect(&product_integrand(&g, coeffs), 1.0, 2.0, 0.5)?)
    })?;
    Ok(r)
}

fn evolution(o: &SuiteOptions) -> Result<SuiteReport, HarnessError> {
    let grids = o.grids.clone().unwrap_or_else(|| vec![2, 4, 8, 16]);
    let samples = o.samples.unwrap_or(100);
    let tol = o.tolerance;
    let mut r = SuiteReport::new("evolution", o.seed, grids.clone(), tol);
    instances(&mut r, "pseudo-unitarity", samples, |i| {
        let (n, d) = (1 + i % 3, 1 + (i / 3) % 2);
        let (mut rng, s) = rng_for(o, "pseudo-unitarity", i);
        let h = random_pseudo_hermitian(&mut rng, n, d, 1.5);
        let pu = pseudo_unitarity_check(&[hamiltonian_to_scattering(&h)]);
        Ok(vec![CaseRecord::new("exp-pseudo-unitary", format!("n={n} d={d} seed={s}"), pu, tol)])
    })?;
    instances(&mut r, "kernel-isometry", samples, |i| {
        let (m, d, n) = shape(&[1, 2, 3], i);
        let g = grid(m, d, n)?;
        let (mut rng, s) = rng_for(o, "kernel-isometry", i);
        let f = unitary_field(&g, &mut rng, 1.0)?;
        let k = chronological_kernel(g.horizon(), &f, &Mat::identity(n, n));
        Ok(vec![CaseRecord::new("kernel-isometry", format!("m={m} d={d} n={n} seed={s}"), kernel_isometry_defect(&k), tol)])
    })?;
    instances(&mut r, "canonical", samples.div_ceil(2), |i| {
        let (n, d) = (1 + i % 3, 1 + (i / 3) % 2);
        let (mut rng, s) = rng_for(o, "canonical", i);
        let mut h = random_pseudo_hermitian(&mut rng, n, d, 1.0);
        // well-conditioned invertible gauge block
        let h00 = h.block(Slot::Zero, Slot::Zero) + Mat::identity(n * d, n * d) * c64(3.0, 0.0);
        h.set(Slot::Zero, Slot::Zero, &h00);
        let c = canonical_decomposition(&h)?;
        let full = hamiltonian_to_scattering(&h).sub(&TriangularMatrix::identity(n, d));
        let id = TriangularMatrix::identity(n, d);
        let pu = c.parts().iter().map(|l| pseudo_unitarity_check(&[l.add(&id)])).fold(0.0, f64::max);
        let inputs = format!("n={n} d={d} seed={s}");
        Ok(vec![
            CaseRecord::new("canonical-sum", inputs.clone(), max_abs(&(c.sum().m - full.m)), tol),
            CaseRecord::new("canonical-parts-pseudo-unitary", inputs, pu, 100.0 * tol),
        ])
    })?;
    instances(&mut r, "second-quantization", samples, |i| {
        let (m, d, n) = shape(&[1, 2, 3, 4], i);
        let g = grid(m, d, n)?;
        let (mut rng, s) = rng_for(o, "second-quantization", i);
        let l: Vec<_> = (0..m).map(|_| random_triangular(&mut rng, 1, d, false)).collect();
        let t = sample::uniform(&mut rng, 0.0, 1.2);
        let gamma = second_quantization(&g, t, &l)?;
        let u = solve_evolution(t, &system_trivial_field(&g, &l)?, &Mat::identity(n, n));
        Ok(vec![CaseRecord::new("second-quantization", format!("m={m} d={d} n={n} t={t} seed={s}"), gamma.sub(&u).hilbert_norm(), tol)])
    })?;
    let seed = o.seed;
    let e = Mat::from_element(1, 1, ONE);
    sweep(&mut r, "brownian-unitarity", &grids, |m| {
        let g = grid(m, 1, 1)?;
        let f = GeneratorField::constant(&g, &brownian_point(&e))?;
        Ok(unitarity_defect_local(1.0, &f, 2.0, 0.5, seed))
    })?;
    let mut h = TriangularMatrix::zeros(1, 1);
    h.set(Slot::Minus, Slot::Plus, &Mat::from_element(1, 1, ONE));
    for &m in &grids {
        let g = grid(m, 1, 1)?;
        let f = HamiltonianField::constant(&g, &h)?.to_scattering();
        let amp = vacuum_block(&local_evolution(1.0, &f, &Mat::identity(1, 1)))[(0, 0)];
        let exact = lebesgue_amplitude(&g, ONE, 1.0);
        r.case(CaseRecord::new("lebesgue-product", format!("m={m}"), (amp - exact).norm(), tol));
        r.case(CaseRecord::new("lebesgue-limit", format!("m={m}"), (amp - (-I).exp()).norm(), 2.0 / m as f64));
    }
    Ok(r)
}

fn pseudo_fock(o: &SuiteOptions) -> Result<SuiteReport, HarnessError> {
    let grids = o.grids.clone().unwrap_or_else(|| vec![1, 2, 3]);
    let samples = o.samples.unwrap_or(100);
    let tol = o.tolerance;
    let mut r = SuiteReport::new("pseudo-fock", o.seed, grids.clone(), tol);
    instances(&mut r, "pseudo-fock", samples, |i| {
        let (m, d, n) = shape(&grids, i);
        let g = grid(m, d, n)?;
        let (mut rng, s) = rng_for(o, "pseudo-fock", i);
        let inputs = format!("m={m} d={d} n={n} seed={s}");
        let (a, b) = (random_vector(&g, &mut rng), random_vector(&g, &mut rng));
        let iso = (pseudo_inner(&embed_j(&a), &embed_j(&b)) - a.inner(&b)).norm();
        let t = random_kernel(&g, &mut rng, 0.6);
        let spatial = spatial_identity_defect(&t);
        let (pa, pb) = (PseudoFockVector::random(&g, &mut rng), PseudoFockVector::random(&g, &mut rng));
        let adj = pseudo_adjoint_defect(&t, &pa, &pb);
        let time = sample::uniform(&mut rng, 0.0, 1.2);
        let (lhs, rhs) = truncated_j_bound(&a, time);
        Ok(vec![
            CaseRecord::new("embedding-isometry", inputs.clone(), iso, tol),
            CaseRecord::new("spatial-transformation", inputs.clone(), spatial, tol),
            CaseRecord::new("decomposable-pseudo-adjoint", inputs.clone(), adj, tol),
            CaseRecord::new("truncated-embedding-bound", format!("{inputs} t={time}"), relative_excess(lhs, rhs), BOUND_SLACK),
        ])
    })?;
    Ok(r)
}

fn flows(o: &SuiteOptions) -> Result<SuiteReport, HarnessError> {
    let grids = o.grids.clone().unwrap_or_else(|| vec![2, 3, 4, 5, 6]);
    let samples = o.samples.unwrap_or(30);
    let tol = o.tolerance;
    let mut r = SuiteReport::new("flows", o.seed, grids.clone(), tol);
    instances(&mut r, "flow-identities", samples, |i| {
        let (m, d) = (1 + i % 3, 1 + (i / 3) % 2);
        let g = grid(m, d, 2)?;
        let (mut rng, s) = rng_for(o, "flow-identities", i);
        let f = unitary_field(&g, &mut rng, 1.0)?;
        let map = StructureMap::spatial(&f);
        let tau = InitialMap::identity(2);
        let a = sample::matrix(&mut rng, 2, 2, 1.0);
        let t = g.horizon();
        let inputs = format!("m={m} d={d} n=2 seed={s}");
        let mult = (0..m).map(|p| map.multiplicativity_defect(p)).fold(0.0, f64::max);
        let rec = (0..m).map(|p| recurrence_defect(&map, &tau, &a, p)).fold(0.0, f64::max);
        Ok(vec![
            CaseRecord::new("structure-map-multiplicative", inputs.clone(), mult, tol),
            CaseRecord::new("unitality", inputs.clone(), unitality_defect(t, &map, &tau), tol),
            CaseRecord::new("hermiticity", inputs.clone(), hermiticity_defect(t, &map, &tau, &a), tol),
            CaseRecord::new("kernel-homomorphism", inputs.clone(), kernel_homomorphism_defect(t, &map, &tau, &a), tol),
            CaseRecord::new("recurrence", inputs, rec, tol),
        ])
    })?;
    let (mut rng, _) = rng_for(o, "sweep", 0);
    let h = random_pseudo_hermitian(&mut rng, 2, 1, 1.0);
    let f0 = hamiltonian_to_scattering(&h);
    let a = sample::matrix(&mut rng, 2, 2, 1.0);
    let field = |m: usize| -> Result<GeneratorField, HarnessError> { Ok(GeneratorField::constant(&grid(m, 1, 2)?, &f0)?) };
    sweep(&mut r, "homomorphism", &grids, |m| Ok(homomorphism_defect(1.0, &StructureMap::spatial(&field(m)?), &InitialMap::identity(2), &a, 2.0, 0.5)))?;
    sweep(&mut r, "conjugation", &grids, |m| Ok(conjugation_defect(1.0, &field(m)?, &a, 2.0, 0.5)))?;
    sweep(&mut r, "transformed-process", &grids, |m| {
        let f = field(m)?;
        let mut blocks = BTreeMap::new();
        for p in 0..m {
            blocks.insert(Table::elementary(p, Role::Time), a.clone());
            blocks.insert(Table::elementary(p, Role::Cre), a.clone());
        }
        let b = OperatorFamily::from_integrand(&Integrand::pointwise(&f.grid, &blocks));
        Ok(transformed_process_defect(1.0, &f, &b, 2.0, 0.5)?)
    })?;
    Ok(r)
}

fn norms(o: &SuiteOptions) -> Result<SuiteReport, HarnessError> {
    let samples = o.samples.unwrap_or(100);
    let mut r = SuiteReport::new("norms", o.seed, o.grids.clone().unwrap_or_default(), o.tolerance);
    instances(&mut r, "norms", samples, |i| {
        let (m, d, n) = shape(&[1, 2, 3], i);
        let (mut rng, s) = rng_for(o, "norms", i);
        let inputs = format!("m={m} d={d} n={n} seed={s}");
        let mut out = Vec::new();

        // multiple integrals against the η-norm
        let g = grid(m.min(2), 1, 1)?;
        let b = OperatorFamily::from_integrand(&Integrand::random(&g, &mut rng, 0.6));
        let u: Vec<f64> = (0..6).map(|_| sample::uniform(&mut rng, 0.2, 2.0)).collect();
        let eta = EtaTriples { upper: [u[0], u[1], u[2]], lower: [u[3], u[4], u[5]] };
        let (lhs, rhs) = multiple_integral_bound(&b, 1.5, &eta);
        out.push(CaseRecord::new("multiple-integral-bound", inputs.clone(), relative_excess(lhs, rhs), BOUND_SLACK));

        // exponential bound for product kernels
        let g = grid(m, d, 1)?;
        let f: Vec<_> = (0..m).map(|_| random_point(&mut rng, d, 1.0)).collect();
        let k = product_kernel(&g, &sample::matrix(&mut rng, 1, 1, 1.0), &f);
        let z: Vec<WeightMatrix> = f.iter().map(WeightMatrix::of_point).collect();
        let gmax = z.iter().map(|w| w.gauge).fold(0.0, f64::max);
        let (norm, bound) = exponential_bound(&k, &z, 2.0 * gmax * gmax + 1.0, 0.5)?;
        out.push(CaseRecord::new("exponential-bound", inputs.clone(), relative_excess(norm, bound), BOUND_SLACK));

        // evolution and flow growth
        let g = grid(m, d, n)?;
        let field = unitary_field(&g, &mut rng, 1.0)?;
        let t = sample::uniform(&mut rng, 0.0, 1.2);
        let nb = evolution_norm_bound_check(&field, t, 2.0, 0.5, None, &Mat::identity(n, n))?;
        out.push(CaseRecord::new("evolution-bound", format!("{inputs} t={t}"), relative_excess(nb.norm, nb.bound), BOUND_SLACK));
        let a = sample::matrix(&mut rng, n, n, 1.0);
        let fb = flow_norm_bound_check(&StructureMap::spatial(&field), &InitialMap::identity(n), &a, t, 2.0, 0.5, None, s)?;
        out.push(CaseRecord::new("flow-bound", format!("{inputs} t={t}"), relative_excess(fb.norm, fb.bound), BOUND_SLACK));

        // duality and submultiplicativity
        let k = random_kernel(&g, &mut rng, 0.6);
        let (xp, xm) = (sample::uniform(&mut rng, 1.0, 3.0), sample::uniform(&mut rng, 0.2, 1.0));
        let direct = operator_scale_norm(&iota(&k), xp, xm);
        let dual = operator_scale_norm(&iota(&k.adjoint()), 1.0 / xm, 1.0 / xp);
        out.push(CaseRecord::new("adjoint-duality", format!("{inputs} xi=({xp},{xm})"), (direct - dual).abs() / direct.max(1.0), DUALITY_TOL));
        let zeta: Vec<WeightMatrix> = (0..m)
            .map(|_| {
                let mut w = || sample::uniform(&mut rng, 0.1, 2.0);
                WeightMatrix::new(w(), w(), w(), w())
            })
            .collect();
        let rb = relative_bound(&k, &zeta);
        let kk = k.adjoint().product(&k)?;
        out.push(CaseRecord::new("kernel-submultiplicativity", inputs, relative_excess(relative_bound(&kk, &weight_star_product(&zeta)), rb * rb), BOUND_SLACK));
        Ok(out)
    })?;
    Ok(r)
}
