//! Additive overlapping step engine with diagonal source transfer.
//!
//! Every step solves all subdomain problems independently; step 1 uses the
//! core-restricted source, later steps the transferred sources of the two
//! previous steps. The DDM solution is the blend `sum beta_0 u_ij` of the
//! per-subdomain accumulators.

use std::sync::{Arc, OnceLock};
use std::time::Instant;

use rayon::prelude::*;

use crate::discretize::{assemble, assemble_global, DiscreteOperator};
use crate::error::{HelmError, Result};
use crate::field::{FieldGrid, Window, C64};
use crate::medium::MediumModel;
use crate::partition::{BlendWeights, Direction, Partition, SubdomainWindow};
use crate::pml::PmlProfile;
use crate::sparse::{factor_with, FactorOptions, Factorization, Ordering, SparseMatrix};
use crate::transfer::gather_step_sources;

/// One of the eight symmetries of a rectangle grid, mapping local node
/// `(a, b)` of an `nx x ny` grid to the grid of a representative operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct GridMap {
    swap: bool,
    flip_x: bool,
    flip_y: bool,
}

impl GridMap {
    const IDENTITY: GridMap = GridMap { swap: false, flip_x: false, flip_y: false };

    fn all() -> impl Iterator<Item = GridMap> {
        (0..8).map(|m| GridMap { swap: m & 4 != 0, flip_x: m & 1 != 0, flip_y: m & 2 != 0 })
    }

    /// Target dimensions, if the map applies to an `nx x ny` grid.
    fn target_dims(self, nx: usize, ny: usize) -> (usize, usize) {
        if self.swap {
            (ny, nx)
        } else {
            (nx, ny)
        }
    }

    fn index_map(self, nx: usize, ny: usize) -> Vec<usize> {
        let (cx, cy) = self.target_dims(nx, ny);
        let mut map = Vec::with_capacity(nx * ny);
        for b in 0..ny {
            for a in 0..nx {
                let (mut x, mut y) = if self.swap { (b, a) } else { (a, b) };
                if self.flip_x {
                    x = cx - 1 - x;
                }
                if self.flip_y {
                    y = cy - 1 - y;
                }
                map.push(y * cx + x);
            }
        }
        map
    }
}

/// True when `a[i][j] == c[map[i]][map[j]]` for all entries.
fn matrix_matches(a: &SparseMatrix, c: &SparseMatrix, map: &[usize]) -> bool {
    if a.n() != c.n() || a.nnz() != c.nnz() {
        return false;
    }
    for r in 0..a.n() {
        let (cols, vals) = a.row(r);
        let mr = map[r];
        if c.row(mr).0.len() != cols.len() {
            return false;
        }
        for (&col, &v) in cols.iter().zip(vals) {
            if c.get(mr, map[col]) != v {
                return false;
            }
        }
    }
    true
}

/// Factorization of a subdomain operator, possibly shared with congruent
/// subdomains through a node relabelling.
#[derive(Clone, Debug)]
pub struct LocalSolver {
    pub class: usize,
    factor: Arc<Factorization>,
    /// `map[k]` is the row of the shared factorization for local node `k`.
    map: Option<Arc<Vec<usize>>>,
}

impl LocalSolver {
    /// Solve the weighted systems for `nrhs` stacked right-hand sides in place.
    fn solve_weighted(&self, b: &mut [C64], nrhs: usize) -> Result<()> {
        match &self.map {
            None => self.factor.solve_many(b, nrhs),
            Some(map) => {
                let n = map.len();
                let mut t = vec![C64::new(0.0, 0.0); b.len()];
                for c in 0..nrhs {
                    for (k, &m) in map.iter().enumerate() {
                        t[c * n + m] = b[c * n + k];
                    }
                }
                self.factor.solve_many(&mut t, nrhs)?;
                for c in 0..nrhs {
                    for (k, &m) in map.iter().enumerate() {
                        b[c * n + k] = t[c * n + m];
                    }
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct SubdomainContext {
    pub sub: SubdomainWindow,
    pub op: DiscreteOperator,
    pub solver: LocalSolver,
    pub weights: BlendWeights,
    /// Flat ids of the neighbours in [`Direction::ALL`] order.
    pub neighbors: [Option<usize>; 8],
}

#[derive(Clone, Debug)]
pub struct DdmOptions {
    pub factor: FactorOptions,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    /// Evaluate the global residual every this many steps.
    pub check_every: usize,
    /// Reuse one factorization for operators equal up to a grid symmetry.
    pub share_factors: bool,
}

impl Default for DdmOptions {
    fn default() -> Self {
        DdmOptions { factor: FactorOptions::default(), threads: None, check_every: 1, share_factors: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub relres: f64,
    pub wall_ms: f64,
}

/// Counters reported by the solvers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolverStats {
    pub n_ddm_iter: usize,
    pub n_ddm_solv: f64,
    pub n_gmres_iter: usize,
    pub n_local_solv: usize,
    pub precond_k: usize,
    pub converged: bool,
    pub final_relres: f64,
    pub history: Vec<StepRecord>,
    pub setup_ms: f64,
    pub solve_ms: f64,
    pub subdomains: usize,
    pub distinct_factorizations: usize,
}

/// Rolling per-subdomain state of the step recursion.
#[derive(Clone, Debug)]
pub struct StepState {
    pub step: usize,
    /// Step solutions of the last step.
    pub prev1: Vec<FieldGrid>,
    /// Step solutions of the step before.
    pub prev2: Vec<FieldGrid>,
    /// Accumulated `sum_s u^s` per subdomain.
    pub acc: Vec<FieldGrid>,
    /// Core-restricted step-1 sources.
    pub sources: Vec<FieldGrid>,
    /// Back substitutions performed so far.
    pub local_solves: usize,
}

pub struct DdmSolver {
    pub part: Partition,
    pub profile: PmlProfile,
    pub medium: MediumModel,
    pub contexts: Vec<SubdomainContext>,
    classes: usize,
    setup_ms: f64,
    pool: Option<rayon::ThreadPool>,
    global: OnceLock<DiscreteOperator>,
}

impl DdmSolver {
    /// Assemble and factor all subdomain problems. Operators congruent up to
    /// a symmetry of the grid share one factorization.
    pub fn new(part: Partition, medium: MediumModel, profile: PmlProfile, opts: &DdmOptions) -> Result<Self> {
        let t0 = Instant::now();
        let pool = match opts.threads {
            Some(n) => Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .map_err(|e| HelmError::Config(format!("thread pool: {e}")))?,
            ),
            None => None,
        };
        let prof = profile.unshifted();
        // representative operator of each class
        let mut reps: Vec<DiscreteOperator> = Vec::new();
        let mut members: Vec<(DiscreteOperator, usize, GridMap)> = Vec::with_capacity(part.len());
        for s in &part.subdomains {
            let op = assemble(s.window, s.stretch_box, part.lattice, &prof, &medium)?;
            let found = if !opts.share_factors {
                None
            } else {
                reps.iter().enumerate().find_map(|(c, rep)| {
                GridMap::all().find_map(|g| {
                    let (cx, cy) = g.target_dims(op.window.nx, op.window.ny);
                    if (cx, cy) != (rep.window.nx, rep.window.ny) {
                        return None;
                    }
                    let map = g.index_map(op.window.nx, op.window.ny);
                    matrix_matches(&op.matrix, &rep.matrix, &map).then_some((c, g))
                })
            })
            };
            match found {
                Some((c, g)) => {
                    let op = if g == GridMap::IDENTITY && op.jac == reps[c].jac && op.k2 == reps[c].k2 {
                        DiscreteOperator { window: op.window, stretch_box: op.stretch_box, ..reps[c].clone() }
                    } else {
                        op
                    };
                    members.push((op, c, g));
                }
                None => {
                    reps.push(op.clone());
                    members.push((op, reps.len() - 1, GridMap::IDENTITY));
                }
            }
        }
        let factor_all = || -> Result<Vec<Arc<Factorization>>> {
            reps.par_iter()
                .map(|rep| {
                    let mut fo = opts.factor.clone();
                    if fo.ordering == Ordering::NestedDissection {
                        fo.ordering = Ordering::Given(rep.nd_ordering());
                    }
                    let f = factor_with(&rep.matrix, &fo)?;
                    spot_check(&rep.matrix, &f)?;
                    Ok(Arc::new(f))
                })
                .collect()
        };
        let factors = match &pool {
            Some(p) => p.install(factor_all)?,
            None => factor_all()?,
        };
        let contexts = part
            .subdomains
            .iter()
            .zip(members)
            .map(|(s, (op, c, g))| {
                let map = (g != GridMap::IDENTITY).then(|| Arc::new(g.index_map(op.window.nx, op.window.ny)));
                let neighbors = Direction::ALL.map(|d| part.neighbor(s.i, s.j, d).map(|n| part.id(n.i, n.j)));
                SubdomainContext {
                    sub: *s,
                    weights: part.blend_weights(s),
                    op,
                    solver: LocalSolver { class: c, factor: factors[c].clone(), map },
                    neighbors,
                }
            })
            .collect();
        Ok(DdmSolver {
            part,
            profile,
            medium,
            contexts,
            classes: factors.len(),
            setup_ms: t0.elapsed().as_secs_f64() * 1e3,
            pool,
            global: OnceLock::new(),
        })
    }

    fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match &self.pool {
            Some(p) => p.install(f),
            None => f(),
        }
    }

    pub fn distinct_factorizations(&self) -> usize {
        self.classes
    }

    pub fn setup_ms(&self) -> f64 {
        self.setup_ms
    }

    /// Operator of the global truncated problem, assembled on first use.
    pub fn global_operator(&self) -> Result<&DiscreteOperator> {
        if let Some(g) = self.global.get() {
            return Ok(g);
        }
        let g = assemble_global(&self.part, &self.profile, &self.medium)?;
        Ok(self.global.get_or_init(|| g))
    }

    pub fn global_window(&self) -> Window {
        self.part.global_window()
    }

    /// Split a global source by core ownership onto the subdomain windows.
    pub fn restrict_source(&self, f: &FieldGrid) -> Result<Vec<FieldGrid>> {
        if f.window != self.global_window() {
            return Err(HelmError::Contract("source is not on the global PML window".into()));
        }
        Ok(self
            .contexts
            .iter()
            .map(|c| {
                let w = c.sub.window;
                FieldGrid::from_fn(w, f.lattice, |p, q| {
                    if self.part.owner(p, q) == (c.sub.i, c.sub.j) {
                        f.at(p, q)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                })
            })
            .collect())
    }

    pub fn start(&self, f: &FieldGrid) -> Result<StepState> {
        let zeros: Vec<FieldGrid> = self
            .contexts
            .iter()
            .map(|c| FieldGrid::zeros(c.sub.window, self.part.lattice))
            .collect();
        Ok(StepState {
            step: 0,
            prev1: zeros.clone(),
            prev2: zeros.clone(),
            acc: zeros,
            sources: self.restrict_source(f)?,
            local_solves: 0,
        })
    }

    /// Right-hand side of subdomain `id` for step `s >= 2`.
    fn gather(&self, state: &StepState, ops: &[&DiscreteOperator], id: usize) -> Result<FieldGrid> {
        let s = &self.contexts[id].sub;
        gather_step_sources(&self.part, ops, &state.prev1, &state.prev2, (s.i, s.j))
    }

    /// Advance the recursion by one step.
    pub fn step(&self, state: &mut StepState) -> Result<()> {
        let s = state.step + 1;
        let n = self.contexts.len();
        let rhs: Vec<FieldGrid> = if s == 1 {
            state.sources.clone()
        } else {
            let ops: Vec<&DiscreteOperator> = self.contexts.iter().map(|c| &c.op).collect();
            self.install(|| (0..n).into_par_iter().map(|id| self.gather(state, &ops, id)).collect::<Result<Vec<_>>>())?
        };
        let (new, solves) = self.solve_all(&rhs, s)?;
        state.local_solves += solves;
        for (a, u) in state.acc.iter_mut().zip(&new) {
            for (x, y) in a.values.iter_mut().zip(&u.values) {
                *x += y;
            }
        }
        state.prev2 = std::mem::replace(&mut state.prev1, new);
        state.step = s;
        Ok(())
    }

    /// Solve every subdomain with the given sources, batching subdomains
    /// that share a factorization. Zero sources are skipped.
    fn solve_all(&self, rhs: &[FieldGrid], step: usize) -> Result<(Vec<FieldGrid>, usize)> {
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); self.classes];
        for (id, r) in rhs.iter().enumerate() {
            if !r.is_zero() {
                groups[self.contexts[id].solver.class].push(id);
            }
        }
        let solved: Vec<Vec<(usize, Vec<C64>)>> = self.install(|| {
            groups
                .par_iter()
                .filter(|g| !g.is_empty())
                .map(|g| {
                    let n = self.contexts[g[0]].op.n();
                    let mut b = Vec::with_capacity(n * g.len());
                    for &id in g {
                        b.extend(self.contexts[id].op.weighted_rhs(&rhs[id].values));
                    }
                    // members of one class may use different relabellings
                    let mut done = Vec::with_capacity(g.len());
                    let mut k = 0;
                    while k < g.len() {
                        let solver = &self.contexts[g[k]].solver;
                        let same = g[k..]
                            .iter()
                            .take_while(|&&id| same_map(&self.contexts[id].solver, solver))
                            .count();
                        let chunk = &mut b[k * n..(k + same) * n];
                        solver.solve_weighted(chunk, same).map_err(|e| {
                            let s = &self.contexts[g[k]].sub;
                            HelmError::Subdomain { i: s.i, j: s.j, step, source: Box::new(e) }
                        })?;
                        for (c, &id) in g[k..k + same].iter().enumerate() {
                            done.push((id, chunk[c * n..(c + 1) * n].to_vec()));
                        }
                        k += same;
                    }
                    Ok(done)
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let mut out: Vec<FieldGrid> = self
            .contexts
            .iter()
            .map(|c| FieldGrid::zeros(c.sub.window, self.part.lattice))
            .collect();
        let mut count = 0;
        for (id, v) in solved.into_iter().flatten() {
            out[id].values = v;
            count += 1;
        }
        Ok((out, count))
    }

    /// `sum_ij beta_0 u_ij` on the global PML window.
    pub fn assemble_solution(&self, state: &StepState) -> FieldGrid {
        let mut u = FieldGrid::zeros(self.global_window(), self.part.lattice);
        for (ctx, acc) in self.contexts.iter().zip(&state.acc) {
            let w = ctx.sub.window;
            let gw = u.window;
            for b in 0..w.ny {
                let q = w.py + b as i64;
                let by = ctx.weights.south[b] * ctx.weights.north[b];
                if by == 0.0 {
                    continue;
                }
                let base = gw.offset(w.px, q);
                for a in 0..w.nx {
                    let beta = ctx.weights.west[a] * ctx.weights.east[a] * by;
                    if beta != 0.0 {
                        u.values[base + a] += acc.values[b * w.nx + a] * beta;
                    }
                }
            }
        }
        u
    }

    /// Global relative residual `|f - L u| / |f|`.
    pub fn relative_residual(&self, f: &FieldGrid, u: &FieldGrid) -> Result<f64> {
        let g = self.global_operator()?;
        let lu = g.apply(u)?;
        let num: f64 = f.values.iter().zip(&lu.values).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den = f.norm2();
        Ok(if den == 0.0 { num.sqrt() } else { num.sqrt() / den })
    }

    /// Run exactly `steps` steps from a zero state and return the blend.
    pub fn run_steps(&self, f: &FieldGrid, steps: usize) -> Result<(FieldGrid, StepState)> {
        let mut st = self.start(f)?;
        for _ in 0..steps {
            self.step(&mut st)?;
        }
        Ok((self.assemble_solution(&st), st))
    }

    /// The `K`-step preconditioner `r -> u_DDM(r)`.
    pub fn precondition(&self, r: &FieldGrid, k: usize) -> Result<FieldGrid> {
        if k == 0 {
            return Err(HelmError::Config("preconditioner needs at least one step".into()));
        }
        Ok(self.run_steps(r, k)?.0)
    }

    /// Continue the recursion until the global relative residual drops to
    /// `tol` or `max_steps` is reached.
    pub fn solve_iterative(&self, f: &FieldGrid, tol: f64, max_steps: usize, check_every: usize) -> Result<(FieldGrid, SolverStats)> {
        if !(tol > 0.0) || max_steps == 0 {
            return Err(HelmError::Config("tolerance must be positive and max_steps at least 1".into()));
        }
        let t0 = Instant::now();
        let mut st = self.start(f)?;
        let sweep = self.part.n1() + self.part.n2();
        let mut stats = SolverStats {
            subdomains: self.contexts.len(),
            distinct_factorizations: self.classes,
            setup_ms: self.setup_ms,
            final_relres: f64::INFINITY,
            ..Default::default()
        };
        let mut u = FieldGrid::zeros(self.global_window(), self.part.lattice);
        let mut best = (f64::INFINITY, u.clone());
        let every = check_every.max(1);
        while st.step < max_steps {
            self.step(&mut st)?;
            if st.step % every != 0 && st.step < max_steps {
                continue;
            }
            u = self.assemble_solution(&st);
            let rr = self.relative_residual(f, &u)?;
            stats.history.push(StepRecord { step: st.step, relres: rr, wall_ms: t0.elapsed().as_secs_f64() * 1e3 });
            if rr < best.0 {
                best = (rr, u.clone());
            }
            if rr <= tol {
                stats.converged = true;
                break;
            }
        }
        stats.n_ddm_iter = st.step;
        stats.n_ddm_solv = st.step as f64 / sweep as f64;
        stats.n_local_solv = st.local_solves;
        stats.solve_ms = t0.elapsed().as_secs_f64() * 1e3;
        if stats.converged {
            stats.final_relres = best.0.min(stats.history.last().map_or(f64::INFINITY, |h| h.relres));
            Ok((u, stats))
        } else {
            stats.final_relres = best.0;
            Ok((best.1, stats))
        }
    }
}

fn same_map(a: &LocalSolver, b: &LocalSolver) -> bool {
    match (&a.map, &b.map) {
        (None, None) => true,
        (Some(x), Some(y)) => Arc::ptr_eq(x, y) || x == y,
        _ => false,
    }
}

/// Residual check of a fresh factorization on a fixed pseudo-random vector.
fn spot_check(a: &SparseMatrix, f: &Factorization) -> Result<()> {
    let n = a.n();
    let b: Vec<C64> = (0..n)
        .map(|k| {
            let t = (k as f64 + 1.0) * 0.618_033_988_749_895;
            C64::new((t * 12.9898).sin(), (t * 78.233).cos())
        })
        .collect();
    let x = f.solve(&b)?;
    let ax = a.mul_vec(&x)?;
    let num: f64 = ax.iter().zip(&b).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if num > 1e-10 * den {
        return Err(HelmError::Contract(format!("factorization residual {:e} exceeds 1e-10", num / den)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Rect;
    use crate::medium::SourceSpec;
    use crate::partition::{build_partition, GridSpec};
    use crate::pml::DEFAULT_C_SIGMA;

    const K: f64 = 30.0;

    fn solver(n1: usize, n2: usize, h: f64, opts: &DdmOptions) -> DdmSolver {
        let omega = Rect::new(0.0, 1.0, 0.0, 1.0);
        let part = build_partition(GridSpec { interior: omega, h, n_ramp: 10, n_overlap: 5, n1, n2 }).unwrap();
        let medium = MediumModel::constant(K, 1.0, omega, omega.dilate(1.0)).unwrap();
        let pr = PmlProfile::from_c_sigma(DEFAULT_C_SIGMA, K, part.spec.ramp_width(), part.spec.overlap_width());
        DdmSolver::new(part, medium, pr, opts).unwrap()
    }

    fn source(s: &DdmSolver, x: f64, y: f64) -> FieldGrid {
        SourceSpec::gaussian(x, y).sample(s.global_window(), s.part.lattice, K)
    }

    fn direct(s: &DdmSolver, f: &FieldGrid) -> FieldGrid {
        let g = s.global_operator().unwrap();
        let fac = factor_with(&g.matrix, &FactorOptions { ordering: Ordering::Given(g.nd_ordering()), ..Default::default() }).unwrap();
        let u = fac.solve(&g.weighted_rhs(&f.values)).unwrap();
        FieldGrid::from_values(g.window, g.lattice, u).unwrap()
    }

    fn rel_diff(a: &FieldGrid, b: &FieldGrid) -> f64 {
        let d: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).norm_sqr()).sum();
        d.sqrt() / b.norm2()
    }

    #[test]
    fn grid_maps_are_permutations() {
        for g in GridMap::all() {
            let mut m = g.index_map(4, 3);
            m.sort_unstable();
            assert_eq!(m, (0..12).collect::<Vec<_>>());
        }
        assert_eq!(GridMap::IDENTITY.index_map(3, 2), vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn single_subdomain_matches_direct_solve() {
        let s = solver(1, 1, 0.02, &DdmOptions::default());
        let f = source(&s, 0.4, 0.55);
        let (u, st) = s.run_steps(&f, 1).unwrap();
        assert_eq!(st.local_solves, 1);
        assert!(rel_diff(&u, &direct(&s, &f)) < 1e-12);
    }

    #[test]
    fn zero_source_gives_zero_without_solves() {
        let s = solver(2, 2, 0.02, &DdmOptions::default());
        let f = FieldGrid::zeros(s.global_window(), s.part.lattice);
        let (u, st) = s.run_steps(&f, 3).unwrap();
        assert!(u.is_zero());
        assert_eq!(st.local_solves, 0);
    }

    #[test]
    fn congruent_subdomains_share_factorizations() {
        let s = solver(3, 3, 1.0 / 60.0, &DdmOptions::default());
        assert_eq!(s.distinct_factorizations(), 3);
        let s2 = solver(2, 2, 0.02, &DdmOptions::default());
        assert_eq!(s2.distinct_factorizations(), 1);
        let plain = solver(3, 3, 1.0 / 60.0, &DdmOptions { share_factors: false, ..Default::default() });
        assert_eq!(plain.distinct_factorizations(), 9);
        let f = source(&s, 0.3, 0.7);
        let a = s.run_steps(&f, 5).unwrap().0;
        let b = plain.run_steps(&f, 5).unwrap().0;
        assert!(rel_diff(&a, &b) < 1e-12);
    }

    #[test]
    fn information_travels_one_subdomain_per_step() {
        let s = solver(3, 3, 1.0 / 60.0, &DdmOptions::default());
        let f = SourceSpec::point(0.15, 0.15).sample(s.global_window(), s.part.lattice, K);
        let mut st = s.start(&f).unwrap();
        for step in 1..=5 {
            s.step(&mut st).unwrap();
            for c in &s.contexts {
                let d = c.sub.i + c.sub.j;
                let live = !st.prev1[s.part.id(c.sub.i, c.sub.j)].is_zero();
                assert!(!live || d < step, "step {step} ({},{})", c.sub.i, c.sub.j);
                assert!(live || d + 1 != step, "step {step} ({},{})", c.sub.i, c.sub.j);
            }
        }
    }

    #[test]
    fn two_by_two_converges_after_one_sweep() {
        let s = solver(2, 2, 0.0125, &DdmOptions::default());
        let f = source(&s, 0.3, 0.6);
        let (u, st) = s.solve_iterative(&f, 1e-3, 4, 1).unwrap();
        assert!(st.converged, "{:?}", st.history);
        assert!(st.n_ddm_iter <= 4);
        assert!(rel_diff(&u, &direct(&s, &f)) < 1e-2);
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let one = solver(3, 2, 1.0 / 60.0, &DdmOptions { threads: Some(1), ..Default::default() });
        let two = solver(3, 2, 1.0 / 60.0, &DdmOptions { threads: Some(3), ..Default::default() });
        let f = source(&one, 0.5, 0.4);
        let a = one.run_steps(&f, 4).unwrap().0;
        let b = two.run_steps(&f, 4).unwrap().0;
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn rejects_bad_arguments() {
        let s = solver(2, 2, 0.02, &DdmOptions::default());
        let f = source(&s, 0.5, 0.5);
        assert!(matches!(s.precondition(&f, 0), Err(HelmError::Config(_))));
        assert!(matches!(s.solve_iterative(&f, 0.0, 3, 1), Err(HelmError::Config(_))));
        let small = FieldGrid::zeros(s.contexts[0].sub.window, s.part.lattice);
        assert!(matches!(s.start(&small), Err(HelmError::Contract(_))));
    }

    #[test]
    fn single_subdomain_has_no_later_steps() {
        let s = solver(1, 1, 0.02, &DdmOptions::default());
        let f = source(&s, 0.4, 0.55);
        let mut st = s.start(&f).unwrap();
        s.step(&mut st).unwrap();
        s.step(&mut st).unwrap();
        assert!(st.prev1[0].is_zero());
        assert!(!st.prev2[0].is_zero());
    }

    #[test]
    fn infinite_tolerance_stops_after_first_step() {
        let s = solver(2, 2, 0.02, &DdmOptions::default());
        let f = source(&s, 0.3, 0.3);
        let (_, st) = s.solve_iterative(&f, f64::INFINITY, 10, 1).unwrap();
        assert_eq!(st.n_ddm_iter, 1);
        assert!(st.converged);
    }

    #[test]
    fn first_step_depends_only_on_own_core() {
        let s = solver(2, 2, 0.02, &DdmOptions::default());
        let f = source(&s, 0.3, 0.3);
        let g = source(&s, 0.7, 0.7);
        let mut fg = f.clone();
        fg.add_overlap(&g, 1.0);
        let mut a = s.start(&f).unwrap();
        s.step(&mut a).unwrap();
        let own = s.part.owner(s.part.lattice.nearest_p(0.3), s.part.lattice.nearest_q(0.3));
        let id = s.part.id(own.0, own.1);
        let fa = s.restrict_source(&f).unwrap();
        let fb = s.restrict_source(&fg).unwrap();
        let mut c = s.start(&f).unwrap();
        c.sources = fb.clone();
        c.sources[id] = fa[id].clone();
        s.step(&mut c).unwrap();
        assert_eq!(c.prev1[id].values, a.prev1[id].values);
        assert!(c.prev1.iter().zip(&a.prev1).any(|(x, y)| x.values != y.values));
    }

    #[test]
    fn preconditioner_is_linear_and_approximates_inverse() {
        let s = solver(2, 2, 0.02, &DdmOptions::default());
        let r = source(&s, 0.35, 0.6);
        let z = s.precondition(&r, 4).unwrap();
        assert!(s.relative_residual(&r, &z).unwrap() <= 1e-2);
        let alpha = C64::new(0.3, -1.7);
        let mut ar = r.clone();
        ar.scale(alpha);
        let za = s.precondition(&ar, 4).unwrap();
        let scale = z.max_abs();
        let worst = za.values.iter().zip(&z.values).map(|(x, y)| (x - y * alpha).norm()).fold(0.0, f64::max);
        assert!(worst <= 64.0 * f64::EPSILON * scale * alpha.norm());
        let mut r4 = r.clone();
        r4.scale(C64::new(-4.0, 0.0));
        let z4 = s.precondition(&r4, 4).unwrap();
        assert!(z4.values.iter().zip(&z.values).all(|(x, y)| *x == y * -4.0));
        let zero = FieldGrid::zeros(s.global_window(), s.part.lattice);
        assert!(s.precondition(&zero, 3).unwrap().is_zero());
    }
}
