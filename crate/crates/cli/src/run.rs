//! Run orchestration and artifact output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use helmddm::ddm::{DdmOptions, DdmSolver, SolverStats, StepRecord};
use helmddm::krylov::fgmres_ddm;
use helmddm::oracle::{direct_solve_global, error_norms, reference_field, ErrorReport};
use helmddm::{FieldGrid, HelmError, Result};

use crate::config::{Problem, RunConfig, SolverMode};
use crate::dump::write_dump;
use crate::render::render_ppm;

pub struct RunOutcome {
    pub mode: SolverMode,
    pub field: FieldGrid,
    pub stats: SolverStats,
    pub artifacts: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn converged(&self) -> bool {
        self.stats.converged
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn mode_name(m: SolverMode) -> &'static str {
    match m {
        SolverMode::Ddm => "ddm",
        SolverMode::Fgmres => "fgmres",
        SolverMode::Direct => "direct",
    }
}

/// Contents of `<prefix>_stats.txt`.
pub fn stats_text(cfg: &RunConfig, problem: &Problem, mode: SolverMode, st: &SolverStats) -> String {
    let sweep = cfg.n1 + cfg.n2;
    let mut s = String::new();
    let w = problem.window();
    let _ = writeln!(s, "mode = {}", mode_name(mode));
    let _ = writeln!(s, "partition = {}x{}", cfg.n1, cfg.n2);
    let _ = writeln!(s, "h = {:e}", problem.partition.spec.h);
    let _ = writeln!(s, "unknowns = {}", w.len());
    let _ = writeln!(s, "n_DDM_Iter = {}", st.n_ddm_iter);
    let _ = writeln!(s, "n_DDM_Solv = {:.2}", st.n_ddm_iter as f64 / sweep as f64);
    let _ = writeln!(s, "n_GMRES_Iter = {}", st.n_gmres_iter);
    let _ = writeln!(s, "n_Local_Solv = {}", st.n_local_solv);
    let _ = writeln!(s, "precond_K = {}", st.precond_k);
    let _ = writeln!(s, "converged = {}", st.converged);
    let _ = writeln!(s, "final_relres = {:e}", st.final_relres);
    let _ = writeln!(s, "subdomains = {}", st.subdomains);
    let _ = writeln!(s, "distinct_factorizations = {}", st.distinct_factorizations);
    let _ = writeln!(s, "setup_ms = {:.1}", st.setup_ms);
    let _ = writeln!(s, "solve_ms = {:.1}", st.solve_ms);
    s
}

pub fn resid_csv(history: &[StepRecord]) -> String {
    let mut s = String::from("step,relres,wall_ms\n");
    for r in history {
        let _ = writeln!(s, "{},{:e},{:.3}", r.step, r.relres, r.wall_ms);
    }
    s
}

fn ddm_options(cfg: &RunConfig) -> DdmOptions {
    DdmOptions { check_every: cfg.check_every, ..Default::default() }
}

/// Solve the configured problem without writing anything.
pub fn solve(cfg: &RunConfig, problem: &Problem, mode: SolverMode) -> Result<(FieldGrid, SolverStats)> {
    let f = problem.source_field();
    match mode {
        SolverMode::Direct => {
            let t0 = Instant::now();
            let u = direct_solve_global(&problem.partition, &problem.profile, &problem.medium, &f)?;
            let ms = t0.elapsed().as_secs_f64() * 1e3;
            let g = helmddm::discretize::assemble_global(&problem.partition, &problem.profile, &problem.medium)?;
            let lu = g.apply(&u)?;
            let num: f64 = f.values.iter().zip(&lu.values).map(|(a, b)| (a - b).norm_sqr()).sum();
            let rr = num.sqrt() / f.norm2().max(f64::MIN_POSITIVE);
            let stats = SolverStats {
                converged: true,
                final_relres: rr,
                history: vec![StepRecord { step: 0, relres: rr, wall_ms: ms }],
                solve_ms: ms,
                subdomains: 1,
                distinct_factorizations: 1,
                ..Default::default()
            };
            Ok((u, stats))
        }
        SolverMode::Ddm | SolverMode::Fgmres => {
            let solver = DdmSolver::new(problem.partition.clone(), problem.medium.clone(), problem.profile, &ddm_options(cfg))?;
            if mode == SolverMode::Ddm {
                solver.solve_iterative(&f, cfg.tol, cfg.max_steps, cfg.check_every)
            } else {
                fgmres_ddm(&solver, &f, cfg.precond_k(), &cfg.krylov)
            }
        }
    }
}

/// Write the four run artifacts for `prefix`.
pub fn write_artifacts(prefix: &Path, field: &FieldGrid, stats_txt: &str, history: &[StepRecord]) -> Result<Vec<PathBuf>> {
    if let Some(dir) = prefix.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let paths = [
        with_suffix(prefix, "_field.hdmf"),
        with_suffix(prefix, "_resid.csv"),
        with_suffix(prefix, "_stats.txt"),
        with_suffix(prefix, "_real.ppm"),
    ];
    write_dump(&paths[0], field)?;
    fs::write(&paths[1], resid_csv(history))?;
    fs::write(&paths[2], stats_txt)?;
    render_ppm(field, &paths[3], None)?;
    Ok(paths.to_vec())
}

/// Solve and write artifacts. Non-convergence is reported through the
/// outcome, not as an error, so the artifacts still get written.
pub fn run(cfg: &RunConfig, mode: SolverMode) -> Result<RunOutcome> {
    let problem = Problem::build(cfg)?;
    let (field, stats) = solve(cfg, &problem, mode)?;
    let txt = stats_text(cfg, &problem, mode, &stats);
    let artifacts = write_artifacts(&cfg.prefix, &field, &txt, &stats.history)?;
    Ok(RunOutcome { mode, field, stats, artifacts })
}

/// Three dyadic meshes starting from the configured one, each compared
/// with the free-space reference on the interior domain.
pub fn convergence(cfg: &RunConfig, levels: usize) -> Result<(Vec<ErrorReport>, RunOutcome)> {
    let base = Problem::build(cfg)?;
    if !base.medium.is_constant() {
        return Err(HelmError::Config("convergence mode needs a constant medium".into()));
    }
    let h0 = base.partition.spec.h;
    let excluded = base.source.kind == helmddm::medium::SourceKind::PointDelta;
    let mut reports: Vec<ErrorReport> = Vec::new();
    let mut last = None;
    for l in 0..levels {
        let f = 1usize << l;
        let level = RunConfig {
            grid: crate::config::GridSize::Spacing(h0 / f as f64),
            n_ramp: cfg.n_ramp * f,
            n_overlap: cfg.n_overlap * f,
            ..cfg.clone()
        };
        let problem = Problem::build(&level)?;
        let (field, stats) = solve(&level, &problem, cfg.mode)?;
        let region = problem.partition.interior_window();
        let reference = reference_field(&problem.medium, &problem.source, region, problem.lattice())?;
        let k = problem.medium.k_min();
        let exclusion = excluded.then(|| {
            let lat = problem.lattice();
            let c = (lat.x(lat.nearest_p(problem.source.center.0)), lat.y(lat.nearest_q(problem.source.center.1)));
            (c, 2.0 * h0)
        });
        let mut rep = error_norms(&field, &reference, region, exclusion, |_, _| k)?;
        if let Some(prev) = reports.last() {
            rep = rep.with_rates(prev);
        }
        reports.push(rep);
        last = Some((level, problem, field, stats));
    }
    let (level, problem, field, stats) = last.ok_or_else(|| HelmError::Config("need at least one level".into()))?;
    let mut csv = String::from("h,l2_error,l2_rate,h1_error,h1_rate\n");
    for r in &reports {
        let rate = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.3}"));
        let _ = writeln!(csv, "{:e},{:e},{},{:e},{}", r.h, r.l2_error, rate(r.l2_rate), r.h1_error, rate(r.h1_rate));
    }
    let table = with_suffix(&cfg.prefix, "_convergence.csv");
    let txt = stats_text(&level, &problem, cfg.mode, &stats);
    let mut artifacts = write_artifacts(&cfg.prefix, &field, &txt, &stats.history)?;
    fs::write(&table, csv)?;
    artifacts.push(table);
    Ok((reports, RunOutcome { mode: cfg.mode, field, stats, artifacts }))
}
