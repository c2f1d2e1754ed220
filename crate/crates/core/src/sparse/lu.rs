//! Supernodal multifrontal LU with threshold partial pivoting inside fronts.

use super::dense::{gemm_sub, partial_lu};
use super::ordering::{nested_dissection, symmetric_pattern, Ordering};
use super::SparseMatrix;
use crate::error::{HelmError, Result};
use crate::field::C64;

const NONE: usize = usize::MAX;
const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct FactorOptions {
    pub ordering: Ordering,
    pub pivot_threshold: f64,
    /// Run one step of iterative refinement when the residual of a solve
    /// exceeds `refine_tol` (relative, 2-norm).
    pub refine: bool,
    pub refine_tol: f64,
}

impl Default for FactorOptions {
    fn default() -> Self {
        FactorOptions {
            ordering: Ordering::NestedDissection,
            pivot_threshold: 0.1,
            refine: false,
            refine_tol: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FactorStats {
    pub n: usize,
    pub supernodes: usize,
    pub max_front: usize,
    /// Stored complex entries of `L` and `U` combined.
    pub factor_entries: usize,
    /// Off-diagonal row swaps taken by the pivot search.
    pub swaps: usize,
}

#[derive(Clone, Debug)]
struct Supernode {
    first: usize,
    ncol: usize,
    /// Row indices (permuted numbering) below the diagonal block.
    rows: Vec<usize>,
    /// Offset of the `m x ncol` block `[L11\U11; L21]` in `values`.
    l_off: usize,
    /// Offset of the `ncol x (m - ncol)` block `U12` in `values`.
    u_off: usize,
    /// Row swaps within the diagonal block, local numbering.
    piv: Vec<usize>,
}

impl Supernode {
    fn m(&self) -> usize {
        self.ncol + self.rows.len()
    }
}

/// Reusable `P A Q = L U` factorization. Immutable after construction, so
/// concurrent `solve` calls on one factorization are safe.
#[derive(Clone, Debug)]
pub struct Factorization {
    n: usize,
    /// Elimination order: `perm[k]` is the original index eliminated `k`-th.
    perm: Vec<usize>,
    supernodes: Vec<Supernode>,
    values: Vec<C64>,
    stats: FactorStats,
    refine: Option<(SparseMatrix, f64)>,
}

pub fn factor(a: &SparseMatrix) -> Result<Factorization> {
    factor_with(a, &FactorOptions::default())
}

pub fn factor_with(a: &SparseMatrix, opts: &FactorOptions) -> Result<Factorization> {
    let n = a.n();
    let perm = match &opts.ordering {
        Ordering::Natural => (0..n).collect(),
        Ordering::NestedDissection => nested_dissection(a),
        Ordering::Given(p) => {
            let mut seen = vec![false; n];
            if p.len() != n || p.iter().any(|&v| v >= n || std::mem::replace(&mut seen[v], true)) {
                return Err(HelmError::Contract("ordering is not a permutation".into()));
            }
            p.clone()
        }
    };
    let (ptr, idx) = symmetric_pattern(a);
    let (perm, parent) = postorder(&perm, &ptr, &idx);
    let inv = invert(&perm);
    let supernodes = symbolic(&perm, &inv, &parent, &ptr, &idx);
    numeric(a, perm, &inv, supernodes, opts)
}

fn invert(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    inv
}

/// Lower neighbours (in permuted numbering) of permuted column `j`.
fn lower_adj<'a>(j: usize, perm: &[usize], inv: &'a [usize], ptr: &[usize], idx: &'a [usize]) -> impl Iterator<Item = usize> + 'a {
    let o = perm[j];
    idx[ptr[o]..ptr[o + 1]].iter().map(move |&c| inv[c]).filter(move |&c| c > j)
}

fn etree(perm: &[usize], inv: &[usize], ptr: &[usize], idx: &[usize]) -> Vec<usize> {
    let n = perm.len();
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for j in 0..n {
        let o = perm[j];
        for &c in &idx[ptr[o]..ptr[o + 1]] {
            let mut r = inv[c];
            if r >= j {
                continue;
            }
            while ancestor[r] != NONE && ancestor[r] != j {
                let t = ancestor[r];
                ancestor[r] = j;
                r = t;
            }
            if ancestor[r] == NONE {
                ancestor[r] = j;
                parent[r] = j;
            }
        }
    }
    parent
}

/// Reorder `perm` along a postorder of its elimination tree; returns the
/// new order and the tree in that numbering.
fn postorder(perm: &[usize], ptr: &[usize], idx: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let n = perm.len();
    let inv = invert(perm);
    let parent = etree(perm, &inv, ptr, idx);
    let mut head = vec![NONE; n];
    let mut next = vec![NONE; n];
    for j in (0..n).rev() {
        if parent[j] != NONE {
            next[j] = head[parent[j]];
            head[parent[j]] = j;
        }
    }
    let mut post = Vec::with_capacity(n);
    let mut stack = Vec::new();
    for root in 0..n {
        if parent[root] != NONE {
            continue;
        }
        stack.push(root);
        while let Some(&v) = stack.last() {
            let c = head[v];
            if c == NONE {
                post.push(v);
                stack.pop();
            } else {
                head[v] = next[c];
                stack.push(c);
            }
        }
    }
    let new_perm: Vec<usize> = post.iter().map(|&k| perm[k]).collect();
    let mut pos = vec![0; n];
    for (k, &j) in post.iter().enumerate() {
        pos[j] = k;
    }
    let new_parent = post
        .iter()
        .map(|&j| if parent[j] == NONE { NONE } else { pos[parent[j]] })
        .collect();
    (new_perm, new_parent)
}

/// Fundamental supernodes and their row structures.
fn symbolic(perm: &[usize], inv: &[usize], parent: &[usize], ptr: &[usize], idx: &[usize]) -> Vec<Supernode> {
    let n = perm.len();
    let mut nchild = vec![0usize; n];
    let mut head = vec![NONE; n];
    let mut next = vec![NONE; n];
    for j in (0..n).rev() {
        if parent[j] != NONE {
            nchild[parent[j]] += 1;
            next[j] = head[parent[j]];
            head[parent[j]] = j;
        }
    }
    let mut sn_of = vec![NONE; n];
    let mut mark = vec![NONE; n];
    let mut out: Vec<Supernode> = Vec::new();
    // structure of the current column, sorted, starting at `cur_start`
    let mut cur: Vec<usize> = Vec::new();
    let mut cur_start = 0usize;
    let mut stamp = 0usize;
    for j in 0..n {
        let extend = j > 0
            && parent[j - 1] == j
            && nchild[j] == 1
            && lower_adj(j, perm, inv, ptr, idx).all(|i| mark[i] == stamp);
        if extend {
            debug_assert_eq!(cur[cur_start], j);
            cur_start += 1;
            let s = out.len() - 1;
            out[s].ncol += 1;
            sn_of[j] = s;
            continue;
        }
        if let Some(last) = out.last_mut() {
            last.rows = cur[cur_start..].to_vec();
        }
        stamp = j;
        cur.clear();
        cur_start = 0;
        for i in lower_adj(j, perm, inv, ptr, idx) {
            if mark[i] != stamp {
                mark[i] = stamp;
                cur.push(i);
            }
        }
        let mut c = head[j];
        while c != NONE {
            for &i in &out[sn_of[c]].rows {
                if i != j && mark[i] != stamp {
                    mark[i] = stamp;
                    cur.push(i);
                }
            }
            c = next[c];
        }
        cur.sort_unstable();
        sn_of[j] = out.len();
        out.push(Supernode { first: j, ncol: 1, rows: Vec::new(), l_off: 0, u_off: 0, piv: Vec::new() });
    }
    if let Some(last) = out.last_mut() {
        last.rows = cur[cur_start..].to_vec();
    }
    out
}

fn numeric(
    a: &SparseMatrix,
    perm: Vec<usize>,
    inv: &[usize],
    mut sns: Vec<Supernode>,
    opts: &FactorOptions,
) -> Result<Factorization> {
    let n = a.n();
    let at = a.transpose();
    let mut total = 0usize;
    let mut max_front = 0usize;
    for s in &mut sns {
        let m = s.m();
        s.l_off = total;
        total += m * s.ncol;
        s.u_off = total;
        total += s.ncol * (m - s.ncol);
        max_front = max_front.max(m);
    }
    let sn_parent: Vec<usize> = {
        let mut sn_of = vec![0usize; n];
        for (k, s) in sns.iter().enumerate() {
            sn_of[s.first..s.first + s.ncol].fill(k);
        }
        sns.iter().map(|s| s.rows.first().map_or(NONE, |&r| sn_of[r])).collect()
    };
    let mut values = vec![ZERO; total];
    let mut pos = vec![NONE; n];
    let mut front = vec![ZERO; max_front * max_front];
    // contribution blocks: (supernode, row indices, dense r x r values)
    let mut stack: Vec<(usize, Vec<usize>, Vec<C64>)> = Vec::new();
    let mut swaps = 0usize;
    for (k, s) in sns.iter_mut().enumerate() {
        let m = s.m();
        let nc = s.ncol;
        let f = &mut front[..m * m];
        f.fill(ZERO);
        for l in 0..nc {
            pos[s.first + l] = l;
        }
        for (l, &r) in s.rows.iter().enumerate() {
            pos[r] = nc + l;
        }
        let last = s.first + nc;
        for l in 0..nc {
            let j = s.first + l;
            let (rows, vals) = at.row(perm[j]);
            for (&r, &v) in rows.iter().zip(vals) {
                let i = inv[r];
                if i >= s.first {
                    f[l * m + pos[i]] += v;
                }
            }
            let (cols, vals) = a.row(perm[j]);
            for (&c, &v) in cols.iter().zip(vals) {
                let i = inv[c];
                if i >= last {
                    f[pos[i] * m + l] += v;
                }
            }
        }
        while stack.last().is_some_and(|e| sn_parent[e.0] == k) {
            let (_, rows, cb) = stack.pop().unwrap();
            let r = rows.len();
            let loc: Vec<usize> = rows.iter().map(|&i| pos[i]).collect();
            for (c, &lc) in loc.iter().enumerate() {
                let dst = &mut f[lc * m..lc * m + m];
                for (v, &lr) in cb[c * r..c * r + r].iter().zip(&loc) {
                    dst[lr] += v;
                }
            }
        }
        let mut piv = vec![0usize; nc];
        partial_lu(f, m, nc, opts.pivot_threshold, &mut piv)
            .map_err(|l| HelmError::Singular { step: s.first + l })?;
        swaps += piv.iter().enumerate().filter(|&(i, &p)| i != p).count();
        values[s.l_off..s.l_off + m * nc].copy_from_slice(&f[..m * nc]);
        let r = m - nc;
        for c in 0..r {
            let src = &f[(nc + c) * m..(nc + c) * m + nc];
            values[s.u_off + c * nc..s.u_off + (c + 1) * nc].copy_from_slice(src);
        }
        if r > 0 {
            let mut cb = vec![ZERO; r * r];
            for c in 0..r {
                cb[c * r..(c + 1) * r].copy_from_slice(&f[(nc + c) * m + nc..(nc + c + 1) * m]);
            }
            stack.push((k, s.rows.clone(), cb));
        }
        s.piv = piv;
    }
    debug_assert!(stack.is_empty());
    let stats = FactorStats {
        n,
        supernodes: sns.len(),
        max_front,
        factor_entries: total,
        swaps,
    };
    Ok(Factorization {
        n,
        perm,
        supernodes: sns,
        values,
        stats,
        refine: opts.refine.then(|| (a.clone(), opts.refine_tol)),
    })
}

impl Factorization {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn stats(&self) -> FactorStats {
        self.stats
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[C64]) -> Result<Vec<C64>> {
        let mut x = b.to_vec();
        self.solve_many(&mut x, 1)?;
        Ok(x)
    }

    /// Solve in place for `nrhs` right-hand sides stored one after another.
    pub fn solve_many(&self, b: &mut [C64], nrhs: usize) -> Result<()> {
        let n = self.n;
        if b.len() != n * nrhs {
            return Err(HelmError::Contract(format!(
                "right-hand side of length {} for n = {n} and {nrhs} columns",
                b.len()
            )));
        }
        let rhs0 = self.refine.as_ref().map(|_| b.to_vec());
        self.solve_raw(b, nrhs);
        if let (Some((a, tol)), Some(rhs)) = (&self.refine, rhs0) {
            for c in 0..nrhs {
                let bc = &rhs[c * n..(c + 1) * n];
                let xc = &mut b[c * n..(c + 1) * n];
                let ax = a.mul_vec(xc)?;
                let mut r: Vec<C64> = bc.iter().zip(&ax).map(|(p, q)| p - q).collect();
                let bn = bc.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                let rn = r.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                if rn > tol * bn {
                    self.solve_raw(&mut r, 1);
                    for (x, d) in xc.iter_mut().zip(&r) {
                        *x += d;
                    }
                }
            }
        }
        Ok(())
    }

    fn solve_raw(&self, b: &mut [C64], nrhs: usize) {
        let n = self.n;
        let mut x = vec![ZERO; n * nrhs];
        for c in 0..nrhs {
            for (k, &p) in self.perm.iter().enumerate() {
                x[c * n + k] = b[c * n + p];
            }
        }
        let mut w: Vec<C64> = Vec::new();
        for s in &self.supernodes {
            let m = s.m();
            let nc = s.ncol;
            let l = &self.values[s.l_off..s.l_off + m * nc];
            w.clear();
            w.resize(m * nrhs, ZERO);
            for c in 0..nrhs {
                let (xc, wc) = (&x[c * n..], &mut w[c * m..(c + 1) * m]);
                wc[..nc].copy_from_slice(&xc[s.first..s.first + nc]);
                for (t, &r) in s.rows.iter().enumerate() {
                    wc[nc + t] = xc[r];
                }
                for (kk, &p) in s.piv.iter().enumerate() {
                    wc.swap(kk, p);
                }
                for kk in 0..nc {
                    let v = wc[kk];
                    if v.re == 0.0 && v.im == 0.0 {
                        continue;
                    }
                    for i in kk + 1..nc {
                        wc[i] -= l[kk * m + i] * v;
                    }
                }
            }
            // SAFETY: L21 (inside `l`) and the lower part of `w` are disjoint buffers.
            unsafe {
                gemm_sub(m - nc, nc, nrhs, l.as_ptr().add(nc), m, w.as_ptr(), m, w.as_mut_ptr().add(nc), m);
            }
            for c in 0..nrhs {
                let (xc, wc) = (&mut x[c * n..(c + 1) * n], &w[c * m..(c + 1) * m]);
                xc[s.first..s.first + nc].copy_from_slice(&wc[..nc]);
                for (t, &r) in s.rows.iter().enumerate() {
                    xc[r] = wc[nc + t];
                }
            }
        }
        for s in self.supernodes.iter().rev() {
            let m = s.m();
            let nc = s.ncol;
            let l = &self.values[s.l_off..s.l_off + m * nc];
            let u12 = &self.values[s.u_off..s.u_off + nc * (m - nc)];
            w.clear();
            w.resize(m * nrhs, ZERO);
            for c in 0..nrhs {
                let (xc, wc) = (&x[c * n..], &mut w[c * m..(c + 1) * m]);
                wc[..nc].copy_from_slice(&xc[s.first..s.first + nc]);
                for (t, &r) in s.rows.iter().enumerate() {
                    wc[nc + t] = xc[r];
                }
            }
            // SAFETY: U12 and `w` are distinct allocations; the row blocks of `w` are disjoint.
            unsafe {
                gemm_sub(nc, m - nc, nrhs, u12.as_ptr(), nc, w.as_ptr().add(nc), m, w.as_mut_ptr(), m);
            }
            for c in 0..nrhs {
                let wc = &mut w[c * m..c * m + nc];
                for kk in (0..nc).rev() {
                    let v = wc[kk] / l[kk * m + kk];
                    wc[kk] = v;
                    if v.re == 0.0 && v.im == 0.0 {
                        continue;
                    }
                    for i in 0..kk {
                        wc[i] -= l[kk * m + i] * v;
                    }
                }
                x[c * n + s.first..c * n + s.first + nc].copy_from_slice(wc);
            }
        }
        for c in 0..nrhs {
            for (k, &p) in self.perm.iter().enumerate() {
                b[c * n + p] = x[c * n + k];
            }
        }
    }
}
