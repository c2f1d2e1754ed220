//! Reference solutions and error norms.

mod bessel;

use std::f64::consts::PI;

use rayon::prelude::*;

pub use bessel::{hankel_h0, j0, j1, y0, y1};

use crate::discretize::assemble_global;
use crate::error::{HelmError, Result};
use crate::field::{FieldGrid, Lattice, Window, C64};
use crate::medium::{MediumModel, SourceKind, SourceSpec};
use crate::partition::Partition;
use crate::pml::PmlProfile;
use crate::sparse::{factor_with, FactorOptions, Ordering};

/// `G(r) = (i/4) H0(k r)`, the outgoing fundamental solution.
pub fn greens_function(k: f64, r: f64) -> Result<C64> {
    Ok(C64::new(0.0, 0.25) * hankel_h0(k * r)?)
}

/// Exponent beyond which the Gaussian density is below `1e-16` of its peak.
const GAUSS_CUTOFF: f64 = 36.9;

fn constant_k(medium: &MediumModel) -> Result<f64> {
    if !medium.is_constant() {
        return Err(HelmError::Contract("analytic reference needs a constant medium".into()));
    }
    Ok(medium.k_min())
}

/// Free-space solution `-int f(y) G(x, y) dy` at the given points.
///
/// Gaussian sources use midpoint quadrature on the cells of `quad` inside
/// the truncation radius. A delta source sits at its nearest `quad` node
/// with unit mass; points closer than `2h` to it are `None`.
pub fn greens_solution(medium: &MediumModel, source: &SourceSpec, nodes: &[(f64, f64)], quad: Lattice) -> Result<Vec<Option<C64>>> {
    let k = constant_k(medium)?;
    let h = quad.h;
    match source.kind {
        SourceKind::PointDelta => {
            let sx = quad.x(quad.nearest_p(source.center.0));
            let sy = quad.y(quad.nearest_q(source.center.1));
            nodes
                .par_iter()
                .map(|&(x, y)| {
                    let r = (x - sx).hypot(y - sy);
                    if r < 2.0 * h * (1.0 - 1e-12) {
                        Ok(None)
                    } else {
                        Ok(Some(-greens_function(k, r)?))
                    }
                })
                .collect()
        }
        SourceKind::Gaussian2D { .. } => {
            let a = 4.0 * k / PI;
            let radius = GAUSS_CUTOFF.sqrt() / a;
            let (cx, cy) = source.center;
            let cells = |c: f64, x0: f64| {
                let lo = ((c - radius - x0) / h - 0.5).floor() as i64;
                let hi = ((c + radius - x0) / h - 0.5).ceil() as i64;
                lo..=hi
            };
            let mut weights = Vec::new();
            for q in cells(cy, quad.y0) {
                let y = quad.y0 + (q as f64 + 0.5) * h;
                for p in cells(cx, quad.x0) {
                    let x = quad.x0 + (p as f64 + 0.5) * h;
                    if (x - cx).hypot(y - cy) <= radius {
                        weights.push((x, y, h * h * source.density(k, x, y)));
                    }
                }
            }
            nodes
                .par_iter()
                .map(|&(x, y)| {
                    let mut u = C64::new(0.0, 0.0);
                    for &(qx, qy, w) in &weights {
                        let r = (x - qx).hypot(y - qy);
                        if r > 0.0 {
                            u -= greens_function(k, r)? * w;
                        }
                    }
                    Ok(Some(u))
                })
                .collect()
        }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite Gauss-Legendre rule on `[a, b]`.
fn integrate(a: f64, b: f64, panels: usize, rule: &(Vec<f64>, Vec<f64>), mut f: impl FnMut(f64) -> Result<C64>) -> Result<C64> {
    let mut s = C64::new(0.0, 0.0);
    let dh = (b - a) / panels as f64;
    for m in 0..panels {
        let (l, r) = (a + m as f64 * dh, a + (m + 1) as f64 * dh);
        for (&t, &wt) in rule.0.iter().zip(&rule.1) {
            s += f(0.5 * (l + r) + 0.5 * (r - l) * t)? * (0.5 * (r - l) * wt);
        }
    }
    Ok(s)
}

/// Free-space field of a radially symmetric Gaussian source,
/// `u(rho) = -(i pi / 2) int f(r) J0(k r_<) H0(k r_>) r dr`, by Gauss-Legendre
/// quadrature of the radial integral.
pub fn gaussian_radial_solution(k: f64, amplitude: f64, center: (f64, f64), nodes: &[(f64, f64)]) -> Result<Vec<C64>> {
    let a = 4.0 * k / PI;
    let peak = SourceSpec::gaussian_peak(k, amplitude);
    let radius = GAUSS_CUTOFF.sqrt() / a;
    let dens = move |r: f64| peak * (-(a * r) * (a * r)).exp();
    let jz = |x: f64| if x == 0.0 { Ok(1.0) } else { j0(x) };
    let rule = gauss_legendre(16);
    let pre = C64::new(0.0, -0.5 * PI);
    let mass = integrate(0.0, radius, 64, &rule, |r| Ok(C64::new(dens(r) * jz(k * r)? * r, 0.0)))?;
    nodes
        .par_iter()
        .map(|&(x, y)| {
            let rho = (x - center.0).hypot(y - center.1);
            if rho >= radius {
                return Ok(pre * hankel_h0(k * rho)? * mass);
            }
            let inner = if rho > 0.0 {
                integrate(0.0, rho, 64, &rule, |r| Ok(C64::new(dens(r) * jz(k * r)? * r, 0.0)))? * hankel_h0(k * rho)?
            } else {
                C64::new(0.0, 0.0)
            };
            let outer = integrate(rho, radius, 64, &rule, |r| Ok(hankel_h0(k * r)? * (dens(r) * r)))? * jz(k * rho)?;
            Ok(pre * (inner + outer))
        })
        .collect()
}

/// Reference field of `source` on `window` for a constant medium.
pub fn reference_field(medium: &MediumModel, source: &SourceSpec, window: Window, lattice: Lattice) -> Result<FieldGrid> {
    let k = constant_k(medium)?;
    let nodes: Vec<(f64, f64)> = (0..window.len())
        .map(|i| {
            let (p, q) = window.node(i);
            (lattice.x(p), lattice.y(q))
        })
        .collect();
    let values = match source.kind {
        SourceKind::Gaussian2D { amplitude } => gaussian_radial_solution(k, amplitude, source.center, &nodes)?,
        SourceKind::PointDelta => greens_solution(medium, source, &nodes, lattice)?
            .into_iter()
            .map(|v| v.unwrap_or(C64::new(f64::NAN, f64::NAN)))
            .collect(),
    };
    FieldGrid::from_values(window, lattice, values)
}

/// Direct sparse solve of the global truncated problem.
pub fn direct_solve_global(part: &Partition, profile: &PmlProfile, medium: &MediumModel, f: &FieldGrid) -> Result<FieldGrid> {
    let g = assemble_global(part, profile, medium)?;
    if f.window != g.window {
        return Err(HelmError::Contract("source is not on the global PML window".into()));
    }
    if f.is_zero() {
        return Ok(FieldGrid::zeros(g.window, g.lattice));
    }
    let opts = FactorOptions { ordering: Ordering::Given(g.nd_ordering()), refine: true, ..Default::default() };
    let fac = factor_with(&g.matrix, &opts)?;
    let b = g.weighted_rhs(&f.values);
    let x = fac.solve(&b)?;
    let r = g.matrix.mul_vec(&x)?;
    let num: f64 = r.iter().zip(&b).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if num > 1e-10 * den {
        return Err(HelmError::Contract(format!("direct solve residual {:e} exceeds 1e-10", num / den)));
    }
    FieldGrid::from_values(g.window, g.lattice, x)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub h: f64,
    pub l2_error: f64,
    pub h1_error: f64,
    pub l2_rate: Option<f64>,
    pub h1_rate: Option<f64>,
    pub region: Window,
    /// Disc `(centre, radius)` left out of the norms.
    pub excluded: Option<((f64, f64), f64)>,
}

impl ErrorReport {
    /// Attach rates `log(e_coarse / e_fine) / log(h_coarse / h_fine)`.
    pub fn with_rates(mut self, coarse: &ErrorReport) -> Self {
        let d = (coarse.h / self.h).ln();
        self.l2_rate = Some((coarse.l2_error / self.l2_error).ln() / d);
        self.h1_rate = Some((coarse.h1_error / self.h1_error).ln() / d);
        self
    }
}

/// Discrete `L2` and `H1` norms of `u_num - u_ref` over `region`, with
/// forward differences for the gradient and `k e` for the zeroth-order term.
pub fn error_norms(
    u_num: &FieldGrid,
    u_ref: &FieldGrid,
    region: Window,
    excluded: Option<((f64, f64), f64)>,
    k: impl Fn(f64, f64) -> f64,
) -> Result<ErrorReport> {
    let lat = u_num.lattice;
    let h = lat.h;
    let covers = |w: &Window| w.intersect(&region) == Some(region);
    if !covers(&u_num.window) || !covers(&u_ref.window) {
        return Err(HelmError::Contract("error region not covered by both fields".into()));
    }
    let keep = |p: i64, q: i64| {
        region.contains(p, q)
            && excluded.map_or(true, |((cx, cy), r)| (lat.x(p) - cx).hypot(lat.y(q) - cy) >= r)
    };
    let e = |p: i64, q: i64| u_num.at(p, q) - u_ref.at(p, q);
    let (mut l2, mut grad, mut ke, mut count) = (0.0, 0.0, 0.0, 0usize);
    for i in 0..region.len() {
        let (p, q) = region.node(i);
        if !keep(p, q) {
            continue;
        }
        count += 1;
        let v = e(p, q);
        l2 += v.norm_sqr();
        ke += (v * k(lat.x(p), lat.y(q))).norm_sqr();
        if keep(p + 1, q) {
            grad += ((e(p + 1, q) - v) / h).norm_sqr();
        }
        if keep(p, q + 1) {
            grad += ((e(p, q + 1) - v) / h).norm_sqr();
        }
    }
    if count == 0 {
        return Err(HelmError::Contract("error region is empty".into()));
    }
    let h2 = h * h;
    Ok(ErrorReport {
        h,
        l2_error: (h2 * l2).sqrt(),
        h1_error: (h2 * (grad + ke)).sqrt(),
        l2_rate: None,
        h1_rate: None,
        region,
        excluded,
    })
}
