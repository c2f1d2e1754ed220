//! Five-point conservative discretization of `J^{-1} div(A grad u) + k^2 u`.
//!
//! The assembled matrix is the `J`-weighted operator `S = J L`, which is
//! complex symmetric. Dirichlet rows are identity and interior rows carry no
//! coupling to boundary columns, so the symmetry is exact. `apply` returns
//! `L u = J^{-1} S u`; solving `L u = f` means solving `S u = J f`.

use std::sync::Arc;

use crate::error::{HelmError, Result};
use crate::field::{FieldGrid, Lattice, Window, C64};
use crate::medium::MediumModel;
use crate::partition::{LatticeBox, Partition};
use crate::pml::PmlProfile;
use crate::sparse::SparseMatrix;

#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub window: Window,
    pub lattice: Lattice,
    pub stretch_box: LatticeBox,
    /// `S = J L` with identity Dirichlet rows.
    pub matrix: Arc<SparseMatrix>,
    /// Nodal Jacobian `alpha_1 alpha_2` (one on boundary rows).
    pub jac: Arc<Vec<C64>>,
    pub k2: Arc<Vec<f64>>,
    /// `alpha_1` at half-lattice positions `2 px - 1 ..= 2 p_last + 1`.
    pub half_x: Arc<Vec<C64>>,
    pub half_y: Arc<Vec<C64>>,
}

/// Stretch factors at half-lattice positions `2 r0 .. 2 r0 + 2 n` along
/// one axis, for a box `[b0, b1]` in lattice units.
fn half_alphas(profile: &PmlProfile, h: f64, r0: i64, n: usize, b0: i64, b1: i64) -> Vec<C64> {
    let half = 0.5 * h;
    (0..2 * n + 1)
        .map(|s| {
            let x2 = 2 * r0 - 1 + s as i64;
            let d2 = (2 * b0 - x2).max(x2 - 2 * b1).max(0);
            profile.alpha(d2 as f64 * half)
        })
        .collect()
}

/// Assemble the operator on `window` with PML stretching outside `stretch_box`.
pub fn assemble(
    window: Window,
    stretch_box: LatticeBox,
    lattice: Lattice,
    profile: &PmlProfile,
    medium: &MediumModel,
) -> Result<DiscreteOperator> {
    let (nx, ny) = (window.nx, window.ny);
    if nx < 1 || ny < 1 {
        return Err(HelmError::Contract("empty window".into()));
    }
    let h = lattice.h;
    let ih2 = 1.0 / (h * h);
    // ax[2a + 1] is alpha_1 at node px + a; ax[2a] / ax[2a + 2] at its half nodes
    let ax = half_alphas(profile, h, window.px, nx, stretch_box.p0, stretch_box.p1);
    let ay = half_alphas(profile, h, window.py, ny, stretch_box.q0, stretch_box.q1);
    let n = window.len();
    let mut k2 = vec![0.0; n];
    let mut jac = vec![C64::new(1.0, 0.0); n];
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(5 * n);
    let mut values = Vec::with_capacity(5 * n);
    row_ptr.push(0);
    for b in 0..ny {
        let q = window.py + b as i64;
        let y = lattice.y(q);
        for a in 0..nx {
            let p = window.px + a as i64;
            let k = b * nx + a;
            let kk = medium.eval_wavenumber(lattice.x(p), y)?;
            k2[k] = kk * kk;
            if window.on_boundary(p, q) {
                col_idx.push(k);
                values.push(C64::new(1.0, 0.0));
                row_ptr.push(col_idx.len());
                continue;
            }
            let a1 = ax[2 * a + 1];
            let a2 = ay[2 * b + 1];
            let e = a2 / ax[2 * a + 2];
            let w = a2 / ax[2 * a];
            let nn = a1 / ay[2 * b + 2];
            let s = a1 / ay[2 * b];
            let j = a1 * a2;
            jac[k] = j;
            let center = -((e + w) + (nn + s)) * ih2 + j * k2[k];
            let inner_y = |bb: usize| bb > 0 && bb + 1 < ny;
            let inner_x = |aa: usize| aa > 0 && aa + 1 < nx;
            if inner_y(b - 1) {
                col_idx.push(k - nx);
                values.push(s * ih2);
            }
            if inner_x(a - 1) {
                col_idx.push(k - 1);
                values.push(w * ih2);
            }
            col_idx.push(k);
            values.push(center);
            if inner_x(a + 1) {
                col_idx.push(k + 1);
                values.push(e * ih2);
            }
            if inner_y(b + 1) {
                col_idx.push(k + nx);
                values.push(nn * ih2);
            }
            row_ptr.push(col_idx.len());
        }
    }
    let matrix = SparseMatrix::from_csr(n, row_ptr, col_idx, values)?;
    Ok(DiscreteOperator {
        window,
        lattice,
        stretch_box,
        matrix: Arc::new(matrix),
        jac: Arc::new(jac),
        k2: Arc::new(k2),
        half_x: Arc::new(ax),
        half_y: Arc::new(ay),
    })
}

/// Operator of the global truncated problem: PML window around the interior
/// domain, stretching anchored on the interior box with no overlap shift.
pub fn assemble_global(part: &Partition, profile: &PmlProfile, medium: &MediumModel) -> Result<DiscreteOperator> {
    assemble(part.global_window(), part.interior_box(), part.lattice, &profile.unshifted(), medium)
}

impl DiscreteOperator {
    pub fn n(&self) -> usize {
        self.window.len()
    }

    /// `r = L u`; boundary rows reproduce `u`.
    pub fn apply(&self, u: &FieldGrid) -> Result<FieldGrid> {
        if u.window != self.window {
            return Err(HelmError::Contract(format!(
                "field on {:?} applied to operator on {:?}",
                u.window, self.window
            )));
        }
        let mut out = vec![C64::new(0.0, 0.0); self.n()];
        self.apply_rows(&u.values, self.window, &mut out);
        FieldGrid::from_values(self.window, self.lattice, out)
    }

    /// Evaluate `L u` only on the rows of `rows` (clipped to the window),
    /// writing into `out` at window offsets.
    pub fn apply_rows(&self, u: &[C64], rows: Window, out: &mut [C64]) {
        let Some(r) = rows.intersect(&self.window) else {
            return;
        };
        let m = &self.matrix;
        for q in r.py..=r.q_last() {
            let k0 = self.window.offset(r.px, q);
            for k in k0..k0 + r.nx {
                let (cols, vals) = m.row(k);
                let s: C64 = cols.iter().zip(vals).map(|(&c, &v)| v * u[c]).sum();
                out[k] = s / self.jac[k];
            }
        }
    }

    /// Right-hand side `J f` of the symmetric system, zero on boundary rows.
    pub fn weighted_rhs(&self, f: &[C64]) -> Vec<C64> {
        let w = self.window;
        f.iter()
            .zip(self.jac.iter())
            .enumerate()
            .map(|(k, (v, j))| {
                let (p, q) = w.node(k);
                if w.on_boundary(p, q) {
                    C64::new(0.0, 0.0)
                } else {
                    v * j
                }
            })
            .collect()
    }

    /// Row of `L` at an interior node as `(center, east, west, north, south)`.
    pub fn stencil(&self, p: i64, q: i64) -> Option<[C64; 5]> {
        let w = self.window;
        if !w.contains(p, q) || w.on_boundary(p, q) {
            return None;
        }
        let a = 2 * (p - w.px) as usize;
        let b = 2 * (q - w.py) as usize;
        let (ax, ay) = (&self.half_x, &self.half_y);
        let (a1, a2) = (ax[a + 1], ay[b + 1]);
        let ih2 = 1.0 / (self.lattice.h * self.lattice.h);
        let e = a2 / ax[a + 2];
        let wv = a2 / ax[a];
        let nv = a1 / ay[b + 2];
        let sv = a1 / ay[b];
        let j = a1 * a2;
        let center = -(e + wv + nv + sv) * ih2 / j + self.k2[w.offset(p, q)];
        Some([center, e * ih2 / j, wv * ih2 / j, nv * ih2 / j, sv * ih2 / j])
    }

    /// Fill-reducing ordering: boundary rows first, then geometric nested
    /// dissection of the interior nodes.
    pub fn nd_ordering(&self) -> Vec<usize> {
        grid_nested_dissection(self.window.nx, self.window.ny)
    }

    /// True when two operators have identical matrices and coefficients.
    pub fn same_coefficients(&self, other: &DiscreteOperator) -> bool {
        self.window.nx == other.window.nx
            && self.window.ny == other.window.ny
            && self.jac == other.jac
            && self.matrix == other.matrix
    }
}

/// Nested-dissection order of an `nx x ny` row-major grid: the boundary ring
/// first, then the interior split recursively by middle lines.
pub fn grid_nested_dissection(nx: usize, ny: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(nx * ny);
    for b in 0..ny {
        for a in 0..nx {
            if a == 0 || b == 0 || a + 1 == nx || b + 1 == ny {
                order.push(b * nx + a);
            }
        }
    }
    if nx > 2 && ny > 2 {
        dissect(nx, 1, nx - 1, 1, ny - 1, &mut order);
    }
    order
}

fn dissect(nx: usize, a0: usize, a1: usize, b0: usize, b1: usize, order: &mut Vec<usize>) {
    let (w, h) = (a1 - a0, b1 - b0);
    if w == 0 || h == 0 {
        return;
    }
    if w * h <= 16 || w < 3 && h < 3 {
        for b in b0..b1 {
            for a in a0..a1 {
                order.push(b * nx + a);
            }
        }
        return;
    }
    if w >= h {
        let m = a0 + w / 2;
        dissect(nx, a0, m, b0, b1, order);
        dissect(nx, m + 1, a1, b0, b1, order);
        for b in b0..b1 {
            order.push(b * nx + m);
        }
    } else {
        let m = b0 + h / 2;
        dissect(nx, a0, a1, b0, m, order);
        dissect(nx, a0, a1, m + 1, b1, order);
        for a in a0..a1 {
            order.push(m * nx + a);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Rect;
    use crate::partition::{build_partition, GridSpec};
    use crate::pml::DEFAULT_C_SIGMA;
    use crate::sparse::{factor_with, FactorOptions, Ordering};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const K: f64 = 20.0;

    fn unit_medium(k: f64) -> MediumModel {
        let omega = Rect::new(0.0, 1.0, 0.0, 1.0);
        MediumModel::constant(k, 1.0, omega, omega.dilate(1.0)).unwrap()
    }

    fn spec(n1: usize, n2: usize, n_overlap: usize) -> GridSpec {
        GridSpec {
            interior: Rect::new(0.0, 1.0, 0.0, 1.0),
            h: 0.02,
            n_ramp: 8,
            n_overlap,
            n1,
            n2,
        }
    }

    fn profile(part: &Partition, k: f64) -> PmlProfile {
        PmlProfile::from_c_sigma(DEFAULT_C_SIGMA, k, part.spec.ramp_width(), 0.0)
    }

    fn global(k: f64) -> (Partition, DiscreteOperator) {
        let part = build_partition(spec(1, 1, 0)).unwrap();
        let op = assemble_global(&part, &profile(&part, k), &unit_medium(k)).unwrap();
        (part, op)
    }

    fn random_field(w: Window, l: Lattice, seed: u64) -> FieldGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FieldGrid::from_fn(w, l, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn unstretched_row_is_classical() {
        let (_, op) = global(K);
        let h2 = 0.02f64 * 0.02;
        let st = op.stencil(25, 25).unwrap();
        let expect = [-4.0 / h2 + K * K, 1.0 / h2, 1.0 / h2, 1.0 / h2, 1.0 / h2];
        for (a, b) in st.iter().zip(expect) {
            assert!((a - b).norm() <= 1e-12 * b.abs(), "{a} vs {b}");
            assert_eq!(a.im, 0.0);
        }
    }

    #[test]
    fn constant_field_gives_k_squared() {
        let (_, op) = global(K);
        let w = op.window;
        let one = FieldGrid::from_fn(w, op.lattice, |_, _| C64::new(1.0, 0.0));
        let r = op.apply(&one).unwrap();
        for (p, q) in [(10, 10), (0, 0), (50, 3)] {
            let v = r.at(p, q);
            assert!((v - K * K).norm() < 1e-8 * K * K, "({p},{q}): {v}");
        }
        // boundary rows reproduce the field
        assert_eq!(r.at(w.px, w.py), C64::new(1.0, 0.0));
    }

    #[test]
    fn plane_wave_symbol() {
        // 1D analogue: u = e^{i k x} along x on unstretched nodes
        let (_, op) = global(K);
        let h = op.lattice.h;
        let u = FieldGrid::from_fn(op.window, op.lattice, |p, _| C64::from_polar(1.0, K * p as f64 * h));
        let r = op.apply(&u).unwrap();
        // (2 cos(kh) - 2) / h^2 + k^2, evaluated independently with a series for accuracy
        let kh = K * h;
        let series = -kh * kh + kh.powi(4) / 12.0 - kh.powi(6) / 360.0 + kh.powi(8) / 20160.0 - kh.powi(10) / 1814400.0;
        let symbol = series / (h * h) + K * K;
        for p in [5, 20, 45] {
            let ratio = r.at(p, 30) / u.at(p, 30);
            assert!((ratio - symbol).norm() < 1e-9 * K * K, "{ratio} vs {symbol}");
        }
    }

    #[test]
    fn matrix_is_complex_symmetric() {
        let part = build_partition(spec(2, 2, 4)).unwrap();
        let pr = profile(&part, K);
        let m = unit_medium(K);
        let g = assemble_global(&part, &pr, &m).unwrap();
        assert!(g.matrix.is_symmetric());
        for s in &part.subdomains {
            let op = assemble(s.window, s.stretch_box, part.lattice, &pr, &m).unwrap();
            assert!(op.matrix.is_symmetric());
        }
    }

    #[test]
    fn degenerate_partition_matches_global() {
        let part = build_partition(spec(1, 1, 0)).unwrap();
        let pr = profile(&part, K);
        let m = unit_medium(K);
        let g = assemble_global(&part, &pr, &m).unwrap();
        let s = &part.subdomains[0];
        let op = assemble(s.window, s.stretch_box, part.lattice, &pr, &m).unwrap();
        assert!(g.same_coefficients(&op));
    }

    #[test]
    fn subdomain_rows_equal_global_where_unstretched() {
        let part = build_partition(spec(2, 2, 4)).unwrap();
        let pr = profile(&part, K);
        let m = unit_medium(K);
        let g = assemble_global(&part, &pr, &m).unwrap();
        let s = &part.subdomains[part.id(1, 0)];
        let op = assemble(s.window, s.stretch_box, part.lattice, &pr, &m).unwrap();
        for q in 1..20 {
            for p in 30..40 {
                assert_eq!(op.stencil(p, q), g.stencil(p, q), "({p},{q})");
            }
        }
    }

    #[test]
    fn stretched_region_has_imaginary_coefficients() {
        let (_, op) = global(K);
        let st = op.stencil(-5, 20).unwrap();
        assert!(st[0].im != 0.0);
        let st = op.stencil(20, 20).unwrap();
        assert!(st.iter().all(|v| v.im == 0.0));
    }

    #[test]
    fn solve_then_apply_reproduces_source() {
        let (_, op) = global(K);
        let f = random_field(op.window, op.lattice, 3);
        let opts = FactorOptions { ordering: Ordering::Given(op.nd_ordering()), ..Default::default() };
        let fac = factor_with(&op.matrix, &opts).unwrap();
        let u = fac.solve(&op.weighted_rhs(&f.values)).unwrap();
        let u = FieldGrid::from_values(op.window, op.lattice, u).unwrap();
        let r = op.apply(&u).unwrap();
        let w = op.window;
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..w.len() {
            let (p, q) = w.node(k);
            if !w.on_boundary(p, q) {
                num += (r.values[k] - f.values[k]).norm_sqr();
                den += f.values[k].norm_sqr();
            }
        }
        assert!((num / den).sqrt() < 1e-10);
    }

    #[test]
    fn symmetric_source_gives_symmetric_solution() {
        let part = build_partition(GridSpec {
            interior: Rect::new(-0.5, 0.5, -0.5, 0.5),
            h: 0.02,
            n_ramp: 8,
            n_overlap: 0,
            n1: 1,
            n2: 1,
        })
        .unwrap();
        let omega = part.spec.interior;
        let m = MediumModel::constant(K, 1.0, omega, omega.dilate(1.0)).unwrap();
        let op = assemble_global(&part, &profile(&part, K), &m).unwrap();
        let w = op.window;
        let l = op.lattice;
        let f = FieldGrid::from_fn(w, l, |p, q| {
            let (x, y) = (l.x(p), l.y(q));
            C64::new((-40.0 * (x * x + (y - 0.1).powi(2))).exp(), 0.0)
        });
        let fac = factor_with(&op.matrix, &FactorOptions { ordering: Ordering::Given(op.nd_ordering()), ..Default::default() }).unwrap();
        let u = fac.solve(&op.weighted_rhs(&f.values)).unwrap();
        let u = FieldGrid::from_values(w, l, u).unwrap();
        let mirror = |p: i64| 2 * 25 - p;
        let max = u.max_abs();
        for k in 0..w.len() {
            let (p, q) = w.node(k);
            let d = (u.at(p, q) - u.at(mirror(p), q)).norm();
            assert!(d <= 1e-12 * max, "({p},{q}) {d}");
        }
    }

    #[test]
    fn second_order_consistency() {
        // u = sin(pi x) sin(2 pi y) on the unstretched region
        let mut errs = Vec::new();
        for &h in &[0.04, 0.02, 0.01] {
            let part = build_partition(GridSpec { interior: Rect::new(0.0, 1.0, 0.0, 1.0), h, n_ramp: 4, n_overlap: 0, n1: 1, n2: 1 }).unwrap();
            let m = unit_medium(K);
            let op = assemble_global(&part, &profile(&part, K), &m).unwrap();
            let l = op.lattice;
            let pi = std::f64::consts::PI;
            let ex = |x: f64, y: f64| (pi * x).sin() * (2.0 * pi * y).sin();
            let u = FieldGrid::from_fn(op.window, l, |p, q| C64::new(ex(l.x(p), l.y(q)), 0.0));
            let r = op.apply(&u).unwrap();
            let mut e: f64 = 0.0;
            for q in 1..part.m2 as i64 {
                for p in 1..part.m1 as i64 {
                    let (x, y) = (l.x(p), l.y(q));
                    let exact = (K * K - 5.0 * pi * pi) * ex(x, y);
                    e = e.max((r.at(p, q).re - exact).abs());
                }
            }
            errs.push(e);
        }
        for w in errs.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!((rate - 2.0).abs() < 0.2, "rate {rate} from {errs:?}");
        }
    }

    #[test]
    fn apply_rejects_mismatched_field() {
        let (_, op) = global(K);
        let u = FieldGrid::zeros(Window::from_bounds(0, 3, 0, 3), op.lattice);
        assert!(op.apply(&u).is_err());
        let z = FieldGrid::zeros(op.window, op.lattice);
        assert!(op.apply(&z).unwrap().is_zero());
    }

    #[test]
    fn grid_nd_is_permutation() {
        for &(nx, ny) in &[(1, 1), (2, 5), (3, 3), (41, 17), (64, 64)] {
            let mut p = grid_nested_dissection(nx, ny);
            p.sort_unstable();
            assert_eq!(p, (0..nx * ny).collect::<Vec<_>>());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn apply_is_linear(seed in 0u64..1000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let part = build_partition(GridSpec { interior: Rect::new(0.0, 0.2, 0.0, 0.2), h: 0.02, n_ramp: 4, n_overlap: 0, n1: 1, n2: 1 }).unwrap();
            let omega = part.spec.interior;
            let m = MediumModel::constant(K, 1.0, omega, omega.dilate(1.0)).unwrap();
            let op = assemble_global(&part, &profile(&part, K), &m).unwrap();
            let u = random_field(op.window, op.lattice, seed);
            let v = random_field(op.window, op.lattice, seed + 7);
            let mut w = u.clone();
            for (x, y) in w.values.iter_mut().zip(&v.values) {
                *x = *x * a + y * b;
            }
            let lu = op.apply(&u).unwrap();
            let lv = op.apply(&v).unwrap();
            let lw = op.apply(&w).unwrap();
            for k in 0..lw.values.len() {
                let expect = lu.values[k] * a + lv.values[k] * b;
                let (cols, vals) = op.matrix.row(k);
                let scale: f64 = cols
                    .iter()
                    .zip(vals)
                    .map(|(&c, s)| s.norm() * (a.abs() * u.values[c].norm() + b.abs() * v.values[c].norm()))
                    .sum::<f64>()
                    / op.jac[k].norm();
                prop_assert!((lw.values[k] - expect).norm() <= 8.0 * f64::EPSILON * scale);
            }
        }

        #[test]
        fn random_rows_symmetric(seed in 0u64..1000) {
            let (_, op) = global(K);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..20 {
                let r = rng.gen_range(0..op.n());
                let (cols, vals) = op.matrix.row(r);
                for (&c, &v) in cols.iter().zip(vals) {
                    prop_assert_eq!(op.matrix.get(c, r), v);
                }
            }
        }
    }
}
