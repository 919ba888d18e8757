//! Dense complex linear algebra helpers shared by every module.

use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64 as C64;

pub type Mat = DMatrix<C64>;
pub type Col = DVector<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn eye(n: usize) -> Mat {
    Mat::identity(n, n)
}

pub fn scalar(z: C64) -> Mat {
    Mat::from_element(1, 1, z)
}

/// Largest singular value; zero for empty matrices.
pub fn spectral_norm(a: &Mat) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    if a.nrows() == 1 || a.ncols() == 1 {
        return a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    }
    if a.iter().all(|z| *z == ZERO) {
        return 0.0;
    }
    a.clone().singular_values().max()
}

/// Entrywise max modulus.
pub fn max_abs(a: &Mat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

pub fn commutator(a: &Mat, b: &Mat) -> Mat {
    a * b - b * a
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm(a: &Mat) -> Mat {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return a.clone();
    }
    let norm1 = (0..n)
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut s = 0i32;
    if norm1 > 0.25 {
        s = (norm1 / 0.25).log2().ceil() as i32;
    }
    let b = a / C64::new(2f64.powi(s), 0.0);
    let mut term = eye(n);
    let mut sum = eye(n);
    for k in 1..=24 {
        term = &term * &b / C64::new(k as f64, 0.0);
        sum += &term;
        if max_abs(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// phi_1(z) = (e^z - 1)/z and phi_2(z) = (e^z - 1 - z)/z^2 for scalars.
pub fn phi_scalar(z: C64) -> (C64, C64) {
    if z.norm() < 0.5 {
        let mut p1 = ZERO;
        let mut p2 = ZERO;
        let mut pow = ONE;
        let mut fact = 1.0;
        for k in 0..30 {
            // pow = z^k, fact = k!
            p1 += pow / (fact * (k as f64 + 1.0));
            p2 += pow / (fact * (k as f64 + 1.0) * (k as f64 + 2.0));
            pow *= z;
            fact *= k as f64 + 1.0;
        }
        (p1, p2)
    } else {
        let e = z.exp();
        ((e - ONE) / z, (e - ONE - z) / (z * z))
    }
}

/// (e^Z, phi_1(Z), phi_2(Z)) for a square matrix.
///
/// Normal matrices go through a Schur (hence unitary diagonal) decomposition;
/// anything else through the exponential of the augmented block matrix
/// [[Z, I, 0], [0, 0, I], [0, 0, 0]].
pub fn exp_phi(z: &Mat) -> (Mat, Mat, Mat) {
    let n = z.nrows();
    if n == 0 {
        return (z.clone(), z.clone(), z.clone());
    }
    let zh = z.adjoint();
    let normal_defect = max_abs(&(z * &zh - &zh * z));
    let scale = max_abs(z).max(1.0);
    if normal_defect <= 1e-14 * scale * scale {
        let schur = nalgebra::Schur::new(z.clone());
        let (q, t) = schur.unpack();
        let off = (0..n)
            .flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j)))
            .fold(0.0f64, |m, (i, j)| m.max(t[(i, j)].norm()));
        if off <= 1e-12 * scale {
            let mut e = Mat::zeros(n, n);
            let mut p1 = Mat::zeros(n, n);
            let mut p2 = Mat::zeros(n, n);
            for i in 0..n {
                let zi = t[(i, i)];
                let (a, b) = phi_scalar(zi);
                e[(i, i)] = zi.exp();
                p1[(i, i)] = a;
                p2[(i, i)] = b;
            }
            let qh = q.adjoint();
            return (&q * e * &qh, &q * p1 * &qh, &q * p2 * &qh);
        }
    }
    let mut big = Mat::zeros(3 * n, 3 * n);
    big.view_mut((0, 0), (n, n)).copy_from(z);
    for i in 0..n {
        big[(i, n + i)] = ONE;
        big[(n + i, 2 * n + i)] = ONE;
    }
    let e = expm(&big);
    (
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, n)).into_owned(),
        e.view((0, 2 * n), (n, n)).into_owned(),
    )
}

/// Largest singular value of a matrix-free operator by power iteration on A*A.
///
/// `apply` maps a vector of length `dim` to the image, `apply_adj` maps back.
pub fn top_singular_value<F, G>(dim: usize, apply: F, apply_adj: G, seed_vec: &Col, tol: f64, max_iter: usize) -> f64
where
    F: Fn(&Col) -> Col,
    G: Fn(&Col) -> Col,
{
    if dim == 0 {
        return 0.0;
    }
    let mut v = seed_vec.clone();
    let nv = v.norm();
    if nv == 0.0 {
        return 0.0;
    }
    v /= C64::new(nv, 0.0);
    let mut est = 0.0f64;
    for _ in 0..max_iter {
        let av = apply(&v);
        let w = apply_adj(&av);
        let nw = w.norm();
        if nw == 0.0 {
            return av.norm();
        }
        let new_est = nw.sqrt();
        v = w / C64::new(nw, 0.0);
        let done = (new_est - est).abs() <= tol * new_est;
        est = new_est;
        if done {
            break;
        }
    }
    apply(&v).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_nilpotent_is_finite_series() {
        let mut a = Mat::zeros(3, 3);
        a[(0, 1)] = c64(2.0, 0.0);
        a[(1, 2)] = c64(0.0, 3.0);
        let a2 = &a * &a;
        let want = eye(3) + &a + &a2 * c64(0.5, 0.0);
        assert!(max_abs(&(expm(&a) - want)) < 1e-14);
    }

    #[test]
    fn expm_scalar_rotation() {
        let a = scalar(c64(0.0, -std::f64::consts::PI));
        let e = expm(&a);
        assert!((e[(0, 0)] - c64(-1.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn phi_limits_at_zero() {
        let (p1, p2) = phi_scalar(ZERO);
        assert!((p1 - ONE).norm() < 1e-16);
        assert!((p2 - c64(0.5, 0.0)).norm() < 1e-16);
    }

    #[test]
    fn exp_phi_paths_agree() {
        // Hermitian input takes the Schur path, a Jordan block takes the augmented path
        let mut h = Mat::zeros(2, 2);
        h[(0, 0)] = c64(0.3, 0.0);
        h[(0, 1)] = c64(0.2, 0.1);
        h[(1, 0)] = c64(0.2, -0.1);
        h[(1, 1)] = c64(-1.1, 0.0);
        let z = &h * c64(0.0, -1.0);
        let (e, p1, p2) = exp_phi(&z);
        assert!(max_abs(&(&e - expm(&z))) < 1e-13);
        // e^Z = I + Z phi_1(Z), phi_1(Z) = I + Z phi_2(Z)
        assert!(max_abs(&(&e - eye(2) - &z * &p1)) < 1e-13);
        assert!(max_abs(&(&p1 - eye(2) - &z * &p2)) < 1e-13);
        let mut j = Mat::zeros(2, 2);
        j[(0, 0)] = c64(0.7, 0.0);
        j[(1, 1)] = c64(0.7, 0.0);
        j[(0, 1)] = ONE;
        let (e, p1, p2) = exp_phi(&j);
        assert!(max_abs(&(&e - eye(2) - &j * &p1)) < 1e-13);
        assert!(max_abs(&(&p1 - eye(2) - &j * &p2)) < 1e-13);
    }

    #[test]
    fn power_iteration_matches_svd() {
        let a = Mat::from_fn(6, 6, |i, j| c64(((i * 3 + j) % 5) as f64 - 2.0, ((i + j * 2) % 3) as f64));
        let exact = spectral_norm(&a);
        let seed = Col::from_fn(6, |i, _| c64(1.0 + i as f64, 0.5));
        let est = top_singular_value(6, |v| &a * v, |v| a.adjoint() * v, &seed, 1e-14, 5000);
        assert!((est - exact).abs() < 1e-8 * exact);
    }
}
