//! 3×3 block triangular matrices over `H ⊕ (H⊗E) ⊕ H` with rows/columns
//! indexed `(−, 0, +)`.

use crate::linalg::{max_abs, Mat, C64, ONE};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Slot {
    Minus,
    Zero,
    Plus,
}

/// Block triangular matrix stored densely as a `(2n + nd)`-square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangularMatrix {
    pub n: usize,
    pub d: usize,
    pub m: Mat,
}

impl TriangularMatrix {
    pub fn size(n: usize, d: usize) -> usize {
        2 * n + n * d
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        let s = Self::size(n, d);
        TriangularMatrix { n, d, m: Mat::zeros(s, s) }
    }

    pub fn identity(n: usize, d: usize) -> Self {
        let s = Self::size(n, d);
        TriangularMatrix { n, d, m: Mat::identity(s, s) }
    }

    /// `A ⊗ 1`: corners `A`, centre `A ⊗ I_E`, zero elsewhere.
    pub fn lift(a: &Mat, d: usize) -> Self {
        let n = a.nrows();
        let mut t = Self::zeros(n, d);
        t.set(Slot::Minus, Slot::Minus, a);
        t.set(Slot::Plus, Slot::Plus, a);
        t.set(Slot::Zero, Slot::Zero, &a.kronecker(&Mat::identity(d, d)));
        t
    }

    /// From the four off-corner blocks with the given corner blocks.
    /// Blocks: `zz = (0,0)`, `zp = (0,+)`, `mz = (−,0)`, `mp = (−,+)`.
    pub fn from_blocks(corner: &Mat, zz: &Mat, zp: &Mat, mz: &Mat, mp: &Mat, d: usize) -> Self {
        let n = corner.nrows();
        let mut t = Self::zeros(n, d);
        t.set(Slot::Minus, Slot::Minus, corner);
        t.set(Slot::Plus, Slot::Plus, corner);
        t.set(Slot::Zero, Slot::Zero, zz);
        t.set(Slot::Zero, Slot::Plus, zp);
        t.set(Slot::Minus, Slot::Zero, mz);
        t.set(Slot::Minus, Slot::Plus, mp);
        t
    }

    /// Per-point scalar-noise matrix `[[1, f0m, fpm], [0, f00, fp0], [0, 0, 1]]` with `n = 1`.
    pub fn point(f00: &Mat, fp0: &Mat, f0m: &Mat, fpm: C64) -> Self {
        let d = f00.nrows();
        Self::from_blocks(&Mat::identity(1, 1), f00, fp0, f0m, &Mat::from_element(1, 1, fpm), d)
    }

    fn range(&self, s: Slot) -> (usize, usize) {
        let (n, nd) = (self.n, self.n * self.d);
        match s {
            Slot::Minus => (0, n),
            Slot::Zero => (n, nd),
            Slot::Plus => (n + nd, n),
        }
    }

    pub fn block(&self, r: Slot, c: Slot) -> Mat {
        let (r0, rl) = self.range(r);
        let (c0, cl) = self.range(c);
        self.m.view((r0, c0), (rl, cl)).into_owned()
    }

    pub fn set(&mut self, r: Slot, c: Slot, b: &Mat) {
        let (r0, rl) = self.range(r);
        let (c0, cl) = self.range(c);
        assert_eq!((b.nrows(), b.ncols()), (rl, cl), "block shape mismatch");
        self.m.view_mut((r0, c0), (rl, cl)).copy_from(b);
    }

    /// The antidiagonal flip `g`, identity on the centre.
    pub fn g(n: usize, d: usize) -> Mat {
        let s = Self::size(n, d);
        let nd = n * d;
        let mut g = Mat::zeros(s, s);
        for i in 0..n {
            g[(i, n + nd + i)] = ONE;
            g[(n + nd + i, i)] = ONE;
        }
        for i in 0..nd {
            g[(n + i, n + i)] = ONE;
        }
        g
    }

    /// `M^⋆ = g M* g`.
    pub fn star(&self) -> Self {
        let g = Self::g(self.n, self.d);
        TriangularMatrix { n: self.n, d: self.d, m: &g * self.m.adjoint() * &g }
    }

    pub fn mul(&self, o: &Self) -> Self {
        TriangularMatrix { n: self.n, d: self.d, m: &self.m * &o.m }
    }

    pub fn add(&self, o: &Self) -> Self {
        TriangularMatrix { n: self.n, d: self.d, m: &self.m + &o.m }
    }

    pub fn sub(&self, o: &Self) -> Self {
        TriangularMatrix { n: self.n, d: self.d, m: &self.m - &o.m }
    }

    pub fn scale(&self, z: C64) -> Self {
        TriangularMatrix { n: self.n, d: self.d, m: &self.m * z }
    }

    /// Largest entry modulus strictly below the block diagonal.
    pub fn lower_defect(&self) -> f64 {
        let pairs = [(Slot::Zero, Slot::Minus), (Slot::Plus, Slot::Minus), (Slot::Plus, Slot::Zero)];
        pairs.iter().map(|&(r, c)| max_abs(&self.block(r, c))).fold(0.0, f64::max)
    }
}
