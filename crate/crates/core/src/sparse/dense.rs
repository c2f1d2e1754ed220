//! Column-major dense kernels for frontal matrices.

use matrixmultiply::{zgemm, CGemmOption};

use crate::field::C64;

const NB: usize = 48;

/// `C -= A B` where `A` is `m x k`, `B` is `k x n`, all column-major with
/// the given leading dimensions.
///
/// # Safety
/// Pointers must address valid, non-overlapping (for `c`) regions of the
/// stated shapes.
#[inline]
pub(crate) unsafe fn gemm_sub(
    m: usize,
    k: usize,
    n: usize,
    a: *const C64,
    lda: usize,
    b: *const C64,
    ldb: usize,
    c: *mut C64,
    ldc: usize,
) {
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    zgemm(
        CGemmOption::Standard,
        CGemmOption::Standard,
        m,
        k,
        n,
        [-1.0, 0.0],
        a as *const [f64; 2],
        1,
        lda as isize,
        b as *const [f64; 2],
        1,
        ldb as isize,
        [1.0, 0.0],
        c as *mut [f64; 2],
        1,
        ldc as isize,
    );
}

/// Partial LU of the leading `npiv` columns of the `m x m` front `f`.
///
/// Pivots are searched only among the fully summed rows `k..npiv`; the
/// diagonal is kept when it is within `threshold` of the largest candidate.
/// On success `piv[k]` holds the row swapped with row `k`, the leading
/// columns hold `L\U`, rows `0..npiv` of the trailing columns hold `U12`,
/// and the trailing block holds the Schur complement. On failure returns the
/// local column with no nonzero pivot candidate.
pub(crate) fn partial_lu(f: &mut [C64], m: usize, npiv: usize, threshold: f64, piv: &mut [usize]) -> Result<(), usize> {
    debug_assert!(f.len() >= m * m && npiv <= m);
    let mut k0 = 0;
    while k0 < npiv {
        let k1 = (k0 + NB).min(npiv);
        for k in k0..k1 {
            let col = k * m;
            let mut best = 0.0;
            let mut r = k;
            for i in k..npiv {
                let a = f[col + i].norm();
                if a > best {
                    best = a;
                    r = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(k);
            }
            if f[col + k].norm() >= threshold * best {
                r = k;
            }
            piv[k] = r;
            if r != k {
                for j in 0..m {
                    f.swap(j * m + k, j * m + r);
                }
            }
            let inv = C64::new(1.0, 0.0) / f[col + k];
            for v in &mut f[col + k + 1..col + m] {
                *v *= inv;
            }
            for j in k + 1..k1 {
                let u = f[j * m + k];
                if u.re == 0.0 && u.im == 0.0 {
                    continue;
                }
                let (lcol, rest) = f.split_at_mut(j * m);
                let src = &lcol[col + k + 1..col + m];
                for (d, s) in rest[k + 1..m].iter_mut().zip(src) {
                    *d -= s * u;
                }
            }
        }
        // U12 of this panel: unit-lower solve with L11 on columns k1..m
        for j in k1..m {
            for k in k0..k1 {
                let u = f[j * m + k];
                if u.re == 0.0 && u.im == 0.0 {
                    continue;
                }
                for i in k + 1..k1 {
                    let l = f[k * m + i];
                    f[j * m + i] -= l * u;
                }
            }
        }
        if k1 < m {
            let base = f.as_mut_ptr();
            // SAFETY: the three blocks are disjoint sub-rectangles of `f`.
            unsafe {
                gemm_sub(
                    m - k1,
                    k1 - k0,
                    m - k1,
                    base.add(k0 * m + k1),
                    m,
                    base.add(k1 * m + k0),
                    m,
                    base.add(k1 * m + k1),
                    m,
                );
            }
        }
        k0 = k1;
    }
    Ok(())
}
