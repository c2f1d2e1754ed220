//! Flexible GMRES with right preconditioning.

use std::time::Instant;

use crate::ddm::{DdmSolver, SolverStats, StepRecord};
use crate::error::{HelmError, Result};
use crate::field::{FieldGrid, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Cycle length; `None` never restarts.
    pub restart: Option<usize>,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        KrylovConfig { tol: 1e-8, max_iter: 500, restart: None }
    }
}

impl KrylovConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 || self.restart == Some(0) {
            return Err(HelmError::Config("krylov needs tol > 0, max_iter >= 1 and restart >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KrylovStats {
    pub iterations: usize,
    pub converged: bool,
    pub breakdown: bool,
    /// Recursive relative residual after each iteration.
    pub history: Vec<f64>,
    /// `|b - A x| / |b|` at exit.
    pub true_relres: f64,
}

fn dot(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

fn norm(u: &[C64]) -> f64 {
    u.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Rotation `[c s; -conj(s) c]` taking `(a, b)` to `(r, 0)`.
fn givens(a: C64, b: C64) -> (f64, C64) {
    if b.norm() == 0.0 {
        return (1.0, C64::new(0.0, 0.0));
    }
    if a.norm() == 0.0 {
        return (0.0, C64::new(1.0, 0.0));
    }
    let r = a.norm().hypot(b.norm());
    (a.norm() / r, a / a.norm() * b.conj() / r)
}

/// Solve `A x = b` from a zero initial guess, preconditioning on the right
/// with `apply_m`, which may change between iterations.
pub fn fgmres<A, M>(mut apply_a: A, mut apply_m: M, b: &[C64], cfg: &KrylovConfig) -> Result<(Vec<C64>, KrylovStats)>
where
    A: FnMut(&[C64]) -> Result<Vec<C64>>,
    M: FnMut(&[C64]) -> Result<Vec<C64>>,
{
    cfg.validate()?;
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Err(HelmError::Contract("right-hand side is zero".into()));
    }
    let zero = C64::new(0.0, 0.0);
    let mut x = vec![zero; n];
    let mut stats = KrylovStats::default();
    let m = cfg.restart.unwrap_or(cfg.max_iter).min(cfg.max_iter);
    let mut r = b.to_vec();
    loop {
        let beta = norm(&r);
        let mut v: Vec<Vec<C64>> = vec![r.iter().map(|a| a / beta).collect()];
        let mut z: Vec<Vec<C64>> = Vec::new();
        // columns of the rotated Hessenberg matrix
        let mut h: Vec<Vec<C64>> = Vec::new();
        let mut rot: Vec<(f64, C64)> = Vec::new();
        let mut g = vec![C64::new(beta, 0.0)];
        let mut done = false;
        while z.len() < m && stats.iterations < cfg.max_iter {
            let j = z.len();
            let zj = apply_m(&v[j])?;
            let mut w = apply_a(&zj)?;
            z.push(zj);
            let mut col = Vec::with_capacity(j + 2);
            for vi in &v {
                let hij = dot(vi, &w);
                for (a, b) in w.iter_mut().zip(vi) {
                    *a -= hij * b;
                }
                col.push(hij);
            }
            let hn = norm(&w);
            col.push(C64::new(hn, 0.0));
            for (i, &(c, s)) in rot.iter().enumerate() {
                let (a, b) = (col[i], col[i + 1]);
                col[i] = a * c + s * b;
                col[i + 1] = -s.conj() * a + b * c;
            }
            let (c, s) = givens(col[j], col[j + 1]);
            col[j] = col[j] * c + s * col[j + 1];
            col[j + 1] = zero;
            let gj = g[j];
            g[j] = gj * c;
            g.push(-s.conj() * gj);
            rot.push((c, s));
            h.push(col);
            stats.iterations += 1;
            let rel = g[j + 1].norm() / bnorm;
            stats.history.push(rel);
            if rel <= cfg.tol {
                done = true;
                break;
            }
            if hn <= f64::EPSILON * beta || hn == 0.0 {
                stats.breakdown = true;
                break;
            }
            v.push(w.iter().map(|a| a / hn).collect());
        }
        // back substitution on the triangular system and update with Z
        let k = z.len();
        let mut y = vec![zero; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for jj in i + 1..k {
                s -= h[jj][i] * y[jj];
            }
            y[i] = s / h[i][i];
        }
        for (zj, yj) in z.iter().zip(&y) {
            for (a, b) in x.iter_mut().zip(zj) {
                *a += b * yj;
            }
        }
        let ax = apply_a(&x)?;
        r = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        stats.true_relres = norm(&r) / bnorm;
        if stats.true_relres <= cfg.tol || (done && stats.true_relres <= 10.0 * cfg.tol) {
            stats.converged = true;
            stats.breakdown = false;
            return Ok((x, stats));
        }
        if stats.breakdown || stats.iterations >= cfg.max_iter {
            return Ok((x, stats));
        }
    }
}

/// FGMRES on the global truncated problem, preconditioned by `k` DDM steps.
pub fn fgmres_ddm(solver: &DdmSolver, f: &FieldGrid, k: usize, cfg: &KrylovConfig) -> Result<(FieldGrid, SolverStats)> {
    if k == 0 {
        return Err(HelmError::Config("precond.k must be at least 1".into()));
    }
    let t0 = Instant::now();
    let g = solver.global_operator()?;
    let (w, lat) = (f.window, f.lattice);
    if w != g.window {
        return Err(HelmError::Contract("source is not on the global PML window".into()));
    }
    let mut stamps = Vec::new();
    let (x, ks) = fgmres(
        |u| Ok(g.apply(&FieldGrid::from_values(w, lat, u.to_vec())?)?.values),
        |r| {
            let z = solver.precondition(&FieldGrid::from_values(w, lat, r.to_vec())?, k)?.values;
            stamps.push(t0.elapsed().as_secs_f64() * 1e3);
            Ok(z)
        },
        &f.values,
        cfg,
    )?;
    let stats = SolverStats {
        n_gmres_iter: ks.iterations,
        n_local_solv: ks.iterations * k,
        precond_k: k,
        converged: ks.converged,
        final_relres: ks.true_relres,
        history: ks
            .history
            .iter()
            .zip(&stamps)
            .enumerate()
            .map(|(i, (&relres, &wall_ms))| StepRecord { step: i + 1, relres, wall_ms })
            .collect(),
        setup_ms: solver.setup_ms(),
        solve_ms: t0.elapsed().as_secs_f64() * 1e3,
        subdomains: solver.contexts.len(),
        distinct_factorizations: solver.distinct_factorizations(),
        ..Default::default()
    };
    Ok((FieldGrid::from_values(w, lat, x)?, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn dense(a: &[Vec<C64>]) -> impl FnMut(&[C64]) -> Result<Vec<C64>> + '_ {
        move |u| Ok(a.iter().map(|row| row.iter().zip(u).map(|(p, q)| p * q).sum()).collect())
    }

    #[test]
    fn identity_converges_in_one_iteration() {
        let b = vec![C64::new(1.0, 2.0), c(-3.0), C64::new(0.0, 0.5)];
        let (x, st) = fgmres(|u| Ok(u.to_vec()), |u| Ok(u.to_vec()), &b, &KrylovConfig::default()).unwrap();
        assert_eq!(st.iterations, 1);
        assert!(st.converged);
        for (p, q) in x.iter().zip(&b) {
            assert!((p - q).norm() < 1e-14);
        }
    }

    #[test]
    fn diagonal_system() {
        let a = vec![vec![c(2.0), c(0.0)], vec![c(0.0), c(3.0)]];
        let (x, st) = fgmres(dense(&a), |u| Ok(u.to_vec()), &[c(2.0), c(3.0)], &KrylovConfig::default()).unwrap();
        assert!(st.converged);
        assert!((x[0] - c(1.0)).norm() < 1e-12 && (x[1] - c(1.0)).norm() < 1e-12);
    }

    #[test]
    fn complex_nonsymmetric_with_restart() {
        let n = 30;
        let a: Vec<Vec<C64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            C64::new(4.0 + i as f64 * 0.1, 1.0)
                        } else if j == i + 1 {
                            C64::new(-1.0, 0.3)
                        } else if i == j + 1 {
                            C64::new(-0.5, -0.2)
                        } else {
                            c(0.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let b: Vec<C64> = (0..n).map(|i| C64::new((i as f64).sin(), (i as f64).cos())).collect();
        let cfg = KrylovConfig { tol: 1e-10, max_iter: 200, restart: Some(5) };
        let (x, st) = fgmres(dense(&a), |u| Ok(u.to_vec()), &b, &cfg).unwrap();
        assert!(st.converged);
        let ax = dense(&a)(&x).unwrap();
        let r: f64 = ax.iter().zip(&b).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
        assert!(r / norm(&b) <= 1e-10);
        assert!((st.true_relres - r / norm(&b)).abs() < 1e-14);
    }

    #[test]
    fn exact_preconditioner_needs_one_iteration() {
        let a = vec![vec![c(2.0), c(1.0)], vec![c(1.0), c(3.0)]];
        let inv = |u: &[C64]| Ok(vec![(u[0] * 3.0 - u[1]) / 5.0, (u[1] * 2.0 - u[0]) / 5.0]);
        let (x, st) = fgmres(dense(&a), inv, &[c(3.0), c(4.0)], &KrylovConfig::default()).unwrap();
        assert_eq!(st.iterations, 1);
        assert!((x[0] - c(1.0)).norm() < 1e-12 && (x[1] - c(1.0)).norm() < 1e-12);
    }

    #[test]
    fn iteration_limit_is_flagged() {
        let n = 20;
        let a: Vec<Vec<C64>> = (0..n).map(|i| (0..n).map(|j| c(if i == j { 1.0 + i as f64 } else { 0.0 })).collect()).collect();
        let b = vec![c(1.0); n];
        let cfg = KrylovConfig { tol: 1e-12, max_iter: 3, restart: None };
        let (_, st) = fgmres(dense(&a), |u| Ok(u.to_vec()), &b, &cfg).unwrap();
        assert!(!st.converged);
        assert_eq!(st.iterations, 3);
    }

    #[test]
    fn rejects_zero_rhs_and_bad_config() {
        let id = |u: &[C64]| Ok(u.to_vec());
        assert!(matches!(fgmres(id, id, &[c(0.0)], &KrylovConfig::default()), Err(HelmError::Contract(_))));
        let bad = KrylovConfig { tol: 0.0, ..Default::default() };
        assert!(matches!(fgmres(id, id, &[c(1.0)], &bad), Err(HelmError::Config(_))));
    }

    proptest! {
        #[test]
        fn spd_residuals_are_monotone(seed in 0u64..1000, n in 2usize..12) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let a: Vec<Vec<C64>> = (0..n)
                .map(|i| (0..n).map(|j| {
                    let s: f64 = (0..n).map(|k| g[k][i] * g[k][j]).sum();
                    c(s + if i == j { 0.5 } else { 0.0 })
                }).collect())
                .collect();
            let b: Vec<C64> = (0..n).map(|_| c(rng.gen_range(-1.0..1.0))).collect();
            let cfg = KrylovConfig { tol: 1e-10, max_iter: 4 * n, restart: None };
            let (_, st) = fgmres(dense(&a), |u| Ok(u.to_vec()), &b, &cfg).unwrap();
            for w in st.history.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
            }
            prop_assert!(st.converged);
            prop_assert!(st.true_relres <= 10.0 * cfg.tol);
        }
    }

    #[test]
    fn ddm_preconditioned_solve_counts_local_solves() {
        use crate::ddm::DdmOptions;
        use crate::field::Rect;
        use crate::medium::{MediumModel, SourceSpec};
        use crate::partition::{build_partition, GridSpec};
        use crate::pml::{PmlProfile, DEFAULT_C_SIGMA};
        let k = 30.0;
        let omega = Rect::new(0.0, 1.0, 0.0, 1.0);
        let part = build_partition(GridSpec { interior: omega, h: 0.02, n_ramp: 10, n_overlap: 5, n1: 2, n2: 2 }).unwrap();
        let medium = MediumModel::constant(k, 1.0, omega, omega.dilate(1.0)).unwrap();
        let pr = PmlProfile::from_c_sigma(DEFAULT_C_SIGMA, k, part.spec.ramp_width(), part.spec.overlap_width());
        let s = DdmSolver::new(part, medium, pr, &DdmOptions::default()).unwrap();
        let f = SourceSpec::gaussian(0.3, 0.6).sample(s.global_window(), s.part.lattice, k);
        let cfg = KrylovConfig::default();
        let (u4, st4) = fgmres_ddm(&s, &f, 4, &cfg).unwrap();
        let (_, st1) = fgmres_ddm(&s, &f, 1, &cfg).unwrap();
        assert!(st4.converged && st1.converged);
        assert!(st4.n_gmres_iter <= 5, "{}", st4.n_gmres_iter);
        assert_eq!(st4.n_local_solv, st4.n_gmres_iter * 4);
        assert_eq!(st1.n_local_solv, st1.n_gmres_iter);
        assert!(st4.n_local_solv <= st1.n_local_solv);
        assert!(s.relative_residual(&f, &u4).unwrap() <= 1e-8);
    }
}
