//! Seeded random inputs: complex Gaussian matrices normalized to unit Frobenius norm.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c64, Mat, C64};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(rng: &mut SeededRng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(re, im) / std::f64::consts::SQRT_2
}

/// Independent standard complex Gaussian entries.
pub fn gaussian(rng: &mut SeededRng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| gauss(rng))
}

/// Gaussian matrix scaled to Frobenius norm `scale`.
pub fn matrix(rng: &mut SeededRng, r: usize, c: usize, scale: f64) -> Mat {
    let g = gaussian(rng, r, c);
    let f = g.norm();
    if f == 0.0 {
        g
    } else {
        g * c64(scale / f, 0.0)
    }
}

/// Hermitian matrix with spectral scale about `scale`.
pub fn hermitian(rng: &mut SeededRng, n: usize, scale: f64) -> Mat {
    let g = matrix(rng, n, n, scale);
    (&g + g.adjoint()) * c64(0.5, 0.0)
}

/// Unitary matrix from the QR factor of a Gaussian matrix.
pub fn unitary(rng: &mut SeededRng, n: usize) -> Mat {
    let g = gaussian(rng, n, n);
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for j in 0..n {
        let z = r[(j, j)];
        let ph = if z.norm() > 0.0 { z / z.norm() } else { c64(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= ph;
        }
    }
    q
}

pub fn uniform(rng: &mut SeededRng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

pub fn below(rng: &mut SeededRng, n: usize) -> usize {
    rng.random_range(0..n)
}
