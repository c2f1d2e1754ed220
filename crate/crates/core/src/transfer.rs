//! Source transfer between neighbouring subdomains: the residual
//! `-L_target(beta v)` of a blended neighbour solution, masked to the half
//! or quarter plane beyond the shared cut(s).

use crate::error::{HelmError, Result};
use crate::discretize::DiscreteOperator;
use crate::field::{FieldGrid, Window, C64};
use crate::partition::{Direction, DirectionMask, Partition};

/// A transferred source. `contribution` lives on a sub-window of the target
/// window that covers its whole support; it is zero elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferSource {
    pub target: (usize, usize),
    pub direction: Direction,
    pub contribution: FieldGrid,
}

impl TransferSource {
    /// The contribution zero-extended to the full target window.
    pub fn on_window(&self, window: Window) -> FieldGrid {
        self.contribution.restrict_to(window)
    }
}

/// Inclusive lattice range that can carry a nonzero transfer along one axis.
fn band(offset: i64, cut: Option<i64>, n_overlap: i64, lo: i64, hi: i64) -> Option<(i64, i64)> {
    let (a, b) = match (offset, cut) {
        (1, Some(c)) => (c + 1, c + 1 + n_overlap),
        (-1, Some(c)) => (c - n_overlap - 1, c),
        _ => (lo, hi),
    };
    let (a, b) = (a.max(lo), b.min(hi));
    (a <= b).then_some((a, b))
}

/// Transfer of `v` (the step solution of subdomain `src`) towards `dir`,
/// evaluated with the neighbour's operator `target_op`.
pub fn transfer(
    part: &Partition,
    src: (usize, usize),
    dir: Direction,
    v: &FieldGrid,
    target_op: &DiscreteOperator,
) -> Result<TransferSource> {
    let (i, j) = src;
    let source = part
        .get(i as i64, j as i64)
        .ok_or_else(|| HelmError::Contract(format!("no subdomain ({i},{j})")))?;
    let target = part
        .neighbor(i, j, dir)
        .ok_or_else(|| HelmError::Contract(format!("subdomain ({i},{j}) has no neighbour {}", dir.symbol())))?;
    if v.window != source.window {
        return Err(HelmError::Contract("transfer field is not on the source window".into()));
    }
    if target_op.window != target.window {
        return Err(HelmError::Contract("target operator is not on the target window".into()));
    }
    let tw = target.window;
    let cuts = part.transfer_cuts(i, j, dir);
    let (dx, dy) = dir.offset();
    let no = part.spec.n_overlap as i64;
    // rows outside the target's boundary ring, near the source field, inside the band
    let sw = v.window;
    let xr = band(dx, cuts.x, no, (tw.px + 1).max(sw.px - 1), (tw.p_last() - 1).min(sw.p_last() + 1));
    let yr = band(dy, cuts.y, no, (tw.py + 1).max(sw.py - 1), (tw.q_last() - 1).min(sw.q_last() + 1));
    let (Some(xr), Some(yr)) = (xr, yr) else {
        let w = Window::from_bounds(tw.px, tw.px, tw.py, tw.py);
        return Ok(TransferSource {
            target: (target.i, target.j),
            direction: dir,
            contribution: FieldGrid::zeros(w, v.lattice),
        });
    };
    let out_w = Window::from_bounds(xr.0, xr.1, yr.0, yr.1);
    // beta v on the band dilated by the stencil radius
    let bw = Window::from_bounds(xr.0 - 1, xr.1 + 1, yr.0 - 1, yr.1 + 1);
    let (bx, by) = part.transfer_blend(i, j, dir, (bw.px, bw.p_last()), (bw.py, bw.q_last()));
    let mut w = vec![C64::new(0.0, 0.0); bw.len()];
    for (b, &byv) in by.iter().enumerate() {
        let q = bw.py + b as i64;
        for (a, &bxv) in bx.iter().enumerate() {
            let p = bw.px + a as i64;
            let beta = bxv * byv;
            if beta != 0.0 {
                w[b * bw.nx + a] = v.at(p, q) * beta;
            }
        }
    }
    let m = &target_op.matrix;
    let mut vals = Vec::with_capacity(out_w.len());
    for q in out_w.py..=out_w.q_last() {
        for p in out_w.px..=out_w.p_last() {
            debug_assert!(DirectionMask::contains(dir, cuts, p, q));
            let k = tw.offset(p, q);
            let (cols, cv) = m.row(k);
            let mut s = C64::new(0.0, 0.0);
            for (&c, &a) in cols.iter().zip(cv) {
                let (cp, cq) = tw.node(c);
                s += a * w[bw.offset(cp, cq)];
            }
            vals.push(-s / target_op.jac[k]);
        }
    }
    Ok(TransferSource {
        target: (target.i, target.j),
        direction: dir,
        contribution: FieldGrid::from_values(out_w, v.lattice, vals)?,
    })
}

/// Sum of all transfers into subdomain `target` for step `s >= 2`: edge
/// transfers from the previous step's solutions `prev1` and corner
/// transfers from `prev2`, gathered in the order of [`Direction::ALL`].
/// `ops` and the step fields are indexed by flat subdomain id.
pub fn gather_step_sources(
    part: &Partition,
    ops: &[&DiscreteOperator],
    prev1: &[FieldGrid],
    prev2: &[FieldGrid],
    target: (usize, usize),
) -> Result<FieldGrid> {
    let (ti, tj) = target;
    let tsub = part
        .get(ti as i64, tj as i64)
        .ok_or_else(|| HelmError::Contract(format!("no subdomain ({ti},{tj})")))?;
    let mut rhs = FieldGrid::zeros(tsub.window, part.lattice);
    for dir in Direction::ALL {
        let (dx, dy) = dir.offset();
        let Some(src) = part.get(ti as i64 - dx, tj as i64 - dy) else {
            continue;
        };
        let sid = part.id(src.i, src.j);
        let v = if dir.is_corner() { &prev2[sid] } else { &prev1[sid] };
        if v.is_zero() {
            continue;
        }
        let t = transfer(part, (src.i, src.j), dir, v, ops[part.id(ti, tj)])?;
        rhs.add_overlap(&t.contribution, 1.0);
    }
    Ok(rhs)
}
