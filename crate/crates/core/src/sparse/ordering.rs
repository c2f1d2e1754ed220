//! Fill-reducing orderings on the symmetrised sparsity pattern.

use super::SparseMatrix;

/// Elimination ordering used by [`super::factor_with`].
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum Ordering {
    Natural,
    /// Level-set nested dissection on the matrix graph.
    #[default]
    NestedDissection,
    /// Explicit permutation: entry `k` is the original index eliminated `k`-th.
    Given(Vec<usize>),
}

/// Adjacency of `A + A^T` without the diagonal, as CSR offsets and indices.
pub(crate) fn symmetric_pattern(a: &SparseMatrix) -> (Vec<usize>, Vec<usize>) {
    let n = a.n();
    let mut deg = vec![0usize; n];
    for r in 0..n {
        for &c in a.row(r).0 {
            if c != r {
                deg[r] += 1;
                deg[c] += 1;
            }
        }
    }
    let mut ptr = vec![0usize; n + 1];
    for r in 0..n {
        ptr[r + 1] = ptr[r] + deg[r];
    }
    let mut next = ptr[..n].to_vec();
    let mut idx = vec![0usize; ptr[n]];
    for r in 0..n {
        for &c in a.row(r).0 {
            if c != r {
                idx[next[r]] = c;
                next[r] += 1;
                idx[next[c]] = r;
                next[c] += 1;
            }
        }
    }
    // sort and dedup each list in place, compacting
    let mut out_ptr = vec![0usize; n + 1];
    let mut w = 0;
    for r in 0..n {
        let (a0, a1) = (ptr[r], ptr[r + 1]);
        idx[a0..a1].sort_unstable();
        let start = w;
        let mut prev = usize::MAX;
        for k in a0..a1 {
            let v = idx[k];
            if v != prev {
                idx[w] = v;
                w += 1;
                prev = v;
            }
        }
        out_ptr[r] = start;
        out_ptr[r + 1] = w;
    }
    idx.truncate(w);
    (out_ptr, idx)
}

const LEAF: usize = 64;

/// Nested dissection by breadth-first level structures: each connected piece
/// is split by the middle level of a level structure rooted at a
/// pseudo-peripheral vertex, parts first and separator last.
pub fn nested_dissection(a: &SparseMatrix) -> Vec<usize> {
    let (ptr, idx) = symmetric_pattern(a);
    let n = a.n();
    let mut nd = Dissector {
        ptr: &ptr,
        idx: &idx,
        label: vec![0u32; n],
        level: vec![usize::MAX; n],
        next_label: 1,
        order: Vec::with_capacity(n),
    };
    let all: Vec<usize> = (0..n).collect();
    let l = nd.fresh(&all);
    nd.dissect(all, l);
    nd.order
}

struct Dissector<'a> {
    ptr: &'a [usize],
    idx: &'a [usize],
    label: Vec<u32>,
    level: Vec<usize>,
    next_label: u32,
    order: Vec<usize>,
}

impl Dissector<'_> {
    fn fresh(&mut self, set: &[usize]) -> u32 {
        let l = self.next_label;
        self.next_label += 1;
        for &v in set {
            self.label[v] = l;
        }
        l
    }

    fn nbrs(&self, v: usize) -> &[usize] {
        &self.idx[self.ptr[v]..self.ptr[v + 1]]
    }

    /// BFS from `root` within label `l`; returns the visit order and the
    /// offsets of each level within it.
    fn bfs(&mut self, root: usize, l: u32) -> (Vec<usize>, Vec<usize>) {
        let mut order = vec![root];
        let mut levels = vec![0usize];
        self.level[root] = 0;
        let mut head = 0;
        let mut depth = 0;
        while head < order.len() {
            levels.push(order.len());
            let end = order.len();
            depth += 1;
            while head < end {
                let v = order[head];
                head += 1;
                for k in self.ptr[v]..self.ptr[v + 1] {
                    let u = self.idx[k];
                    if self.label[u] == l && self.level[u] == usize::MAX {
                        self.level[u] = depth;
                        order.push(u);
                    }
                }
            }
        }
        levels.pop();
        for &v in &order {
            self.level[v] = usize::MAX;
        }
        (order, levels)
    }

    fn dissect(&mut self, set: Vec<usize>, l: u32) {
        if set.len() <= LEAF {
            self.order.extend_from_slice(&set);
            return;
        }
        // split into connected components
        let (comp, _) = self.bfs(set[0], l);
        if comp.len() < set.len() {
            let rest: Vec<usize> = {
                let lc = self.fresh(&comp);
                let rest: Vec<usize> = set.iter().copied().filter(|&v| self.label[v] == l).collect();
                self.dissect(comp, lc);
                rest
            };
            let lr = self.fresh(&rest);
            self.dissect(rest, lr);
            return;
        }
        // pseudo-peripheral root
        let (mut order, mut levels) = self.bfs(set[0], l);
        for _ in 0..4 {
            let last = levels[levels.len() - 1];
            let cand = order[last..]
                .iter()
                .copied()
                .min_by_key(|&v| self.nbrs(v).iter().filter(|&&u| self.label[u] == l).count())
                .unwrap();
            let (o2, l2) = self.bfs(cand, l);
            if l2.len() <= levels.len() {
                break;
            }
            order = o2;
            levels = l2;
        }
        let nlev = levels.len();
        if nlev < 3 {
            self.order.extend_from_slice(&order);
            return;
        }
        let half = order.len() / 2;
        let mut m = 1;
        while m + 1 < nlev - 1 && levels[m + 1] <= half {
            m += 1;
        }
        let sep_end = if m + 1 < nlev { levels[m + 1] } else { order.len() };
        let part_a = order[..levels[m]].to_vec();
        let sep = order[levels[m]..sep_end].to_vec();
        let part_b = order[sep_end..].to_vec();
        let la = self.fresh(&part_a);
        let lb = self.fresh(&part_b);
        self.fresh(&sep);
        self.dissect(part_a, la);
        if !part_b.is_empty() {
            self.dissect(part_b, lb);
        }
        self.order.extend_from_slice(&sep);
    }
}
