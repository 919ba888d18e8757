//! Index bookkeeping for tensor factors `H ⊗ E(p1) ⊗ ... ⊗ E(pk)`.
//!
//! A factor list names grid points in the order their `E` factors appear.
//! Indices are big-endian: the system index is most significant and the last
//! listed point varies fastest.

use crate::linalg::{Mat, ZERO};

#[inline]
pub fn dim(n: usize, d: usize, k: usize) -> usize {
    n * d.pow(k as u32)
}

/// Stride of each listed point in an index over `pts`, plus the system stride.
fn strides(d: usize, pts: &[usize], m: usize) -> (Vec<usize>, usize) {
    let k = pts.len();
    let mut s = vec![usize::MAX; m];
    for (j, &p) in pts.iter().enumerate() {
        s[p] = d.pow((k - 1 - j) as u32);
    }
    (s, d.pow(k as u32))
}

fn max_point(lists: &[&[usize]]) -> usize {
    lists.iter().flat_map(|l| l.iter()).copied().max().map_or(0, |p| p + 1)
}

/// For every index in `from` layout, its position in `to` layout (same point set).
pub fn permutation(n: usize, d: usize, from: &[usize], to: &[usize]) -> Vec<usize> {
    debug_assert_eq!(from.len(), to.len());
    let m = max_point(&[from, to]);
    let (st, hs) = strides(d, to, m);
    partial_offsets(n, d, from, &st, hs)
}

/// Offsets of a source index over `from` into a target whose strides are `st`.
fn partial_offsets(n: usize, d: usize, from: &[usize], st: &[usize], hs: usize) -> Vec<usize> {
    let k = from.len();
    let total = dim(n, d, k);
    let mut out = Vec::with_capacity(total);
    if d == 1 {
        for h in 0..n {
            out.push(h * hs);
        }
        return out;
    }
    for idx in 0..total {
        let mut rem = idx;
        let mut off = 0;
        for j in (0..k).rev() {
            let digit = rem % d;
            rem /= d;
            off += digit * st[from[j]];
        }
        off += rem * hs;
        out.push(off);
    }
    out
}

/// Place `block` (acting `in_from -> out_from`) into the layouts `in_to -> out_to`.
///
/// Points of `in_to` missing from `in_from` must be exactly the points of
/// `out_to` missing from `out_from`; they receive identity factors.
pub fn embed_block(
    block: &Mat,
    n: usize,
    d: usize,
    in_from: &[usize],
    out_from: &[usize],
    in_to: &[usize],
    out_to: &[usize],
) -> Mat {
    let extra_in: Vec<usize> = in_to.iter().copied().filter(|p| !in_from.contains(p)).collect();
    let extra_out: Vec<usize> = out_to.iter().copied().filter(|p| !out_from.contains(p)).collect();
    debug_assert_eq!(extra_in.len(), extra_out.len());
    debug_assert!(extra_in.iter().all(|p| extra_out.contains(p)));
    debug_assert_eq!(block.nrows(), dim(n, d, out_from.len()));
    debug_assert_eq!(block.ncols(), dim(n, d, in_from.len()));
    let rows = dim(n, d, out_to.len());
    let cols = dim(n, d, in_to.len());
    let mut res = Mat::zeros(rows, cols);
    if d == 1 {
        res.copy_from(block);
        return res;
    }
    let m = max_point(&[in_to, out_to]);
    let (so, hso) = strides(d, out_to, m);
    let (si, hsi) = strides(d, in_to, m);
    let ro = partial_offsets(n, d, out_from, &so, hso);
    let ci = partial_offsets(n, d, in_from, &si, hsi);
    let ne = d.pow(extra_in.len() as u32);
    let mut eo = Vec::with_capacity(ne);
    let mut ei = Vec::with_capacity(ne);
    for e in 0..ne {
        let mut rem = e;
        let mut a = 0;
        let mut b = 0;
        for &p in extra_in.iter().rev() {
            let digit = rem % d;
            rem /= d;
            a += digit * so[p];
            b += digit * si[p];
        }
        eo.push(a);
        ei.push(b);
    }
    for c in 0..block.ncols() {
        for r in 0..block.nrows() {
            let v = block[(r, c)];
            if v == ZERO {
                continue;
            }
            for e in 0..ne {
                res[(ro[r] + eo[e], ci[c] + ei[e])] = v;
            }
        }
    }
    res
}

/// `dst[r0.., c0..] += scale · P_out · src · P_inᵀ` where the permutations move
/// `src` from layouts `in_from -> out_from` to `in_to -> out_to` (same point sets).
#[allow(clippy::too_many_arguments)]
pub fn accumulate_permuted(
    dst: &mut Mat,
    r0: usize,
    c0: usize,
    src: &Mat,
    n: usize,
    d: usize,
    in_from: &[usize],
    out_from: &[usize],
    in_to: &[usize],
    out_to: &[usize],
    scale: crate::linalg::C64,
) {
    if d == 1 || (in_from == in_to && out_from == out_to) {
        let mut view = dst.view_mut((r0, c0), (src.nrows(), src.ncols()));
        for c in 0..src.ncols() {
            for r in 0..src.nrows() {
                view[(r, c)] += scale * src[(r, c)];
            }
        }
        return;
    }
    let pr = permutation(n, d, out_from, out_to);
    let pc = permutation(n, d, in_from, in_to);
    for c in 0..src.ncols() {
        for r in 0..src.nrows() {
            dst[(r0 + pr[r], c0 + pc[c])] += scale * src[(r, c)];
        }
    }
}

/// Reorder the rows of a column block from layout `from` to layout `to`.
pub fn permute_vector(v: &[crate::linalg::C64], n: usize, d: usize, from: &[usize], to: &[usize]) -> Vec<crate::linalg::C64> {
    let p = permutation(n, d, from, to);
    let mut out = vec![ZERO; v.len()];
    for (i, &j) in p.iter().enumerate() {
        out[j] = v[i];
    }
    out
}

/// Sort a factor list by point index (which is time order on a grid).
pub fn sorted(mut pts: Vec<usize>) -> Vec<usize> {
    pts.sort_unstable();
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, kron, max_abs};

    #[test]
    fn permutation_swaps_two_factors() {
        // n=1, d=2, factors (p0, p1) -> (p1, p0): index (a,b) -> (b,a)
        let p = permutation(1, 2, &[0, 1], &[1, 0]);
        assert_eq!(p, vec![0, 2, 1, 3]);
    }

    #[test]
    fn embed_adds_identity_in_time_order() {
        // block on p1 only, embed into (p0, p1) with identity on p0
        let b = Mat::from_fn(2, 2, |i, j| c64((1 + i * 2 + j) as f64, 0.0));
        let e = embed_block(&b, 1, 2, &[1], &[1], &[0, 1], &[0, 1]);
        let want = kron(&Mat::identity(2, 2), &b);
        assert!(max_abs(&(e - want)) == 0.0);
        let e2 = embed_block(&b, 1, 2, &[1], &[1], &[1, 2], &[2, 1]);
        // rows ordered (p2, p1), cols (p1, p2)
        let mut want2 = Mat::zeros(4, 4);
        for a in 0..2 {
            for bb in 0..2 {
                for c in 0..2 {
                    want2[(c * 2 + a, bb * 2 + c)] = b[(a, bb)];
                }
            }
        }
        assert!(max_abs(&(e2 - want2)) == 0.0);
    }
}
