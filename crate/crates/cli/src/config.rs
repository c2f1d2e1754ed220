//! `key = value` run configuration.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use helmddm::krylov::KrylovConfig;
use helmddm::medium::{MediumModel, SourceSpec, VelocityGrid, DEFAULT_LAYER_VELOCITIES};
use helmddm::partition::{build_partition, GridSpec, Partition};
use helmddm::pml::PmlProfile;
use helmddm::{HelmError, Lattice, Rect, Result, Window};

use crate::dump::read_dump;

pub const KEYS: &[&str] = &[
    "domain.x0",
    "domain.x1",
    "domain.y0",
    "domain.y1",
    "freq",
    "medium.type",
    "medium.velocity",
    "medium.layers",
    "grid.h",
    "grid.ppw",
    "part.n1",
    "part.n2",
    "pml.n_ramp",
    "pml.n_overlap",
    "pml.c_sigma",
    "pml.sigma0",
    "source.type",
    "source.x",
    "source.y",
    "solver.mode",
    "solver.tol",
    "solver.max_steps",
    "solver.check_every",
    "precond.k",
    "krylov.tol",
    "krylov.max_iter",
    "krylov.restart",
    "output.prefix",
    "threads",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverMode {
    Ddm,
    Fgmres,
    Direct,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MediumConfig {
    Constant { velocity: f64 },
    /// Equal-thickness layers, velocities listed from the top down.
    Layered { velocities: Vec<f64> },
    /// Velocity from the real part of a field dump.
    Gridded { path: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GridSize {
    Spacing(f64),
    /// Nodes per wavelength of the slowest wave.
    PointsPerWavelength(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub domain: Rect,
    /// `omega / 2 pi`.
    pub freq: f64,
    pub medium: MediumConfig,
    pub grid: GridSize,
    pub n1: usize,
    pub n2: usize,
    pub n_ramp: usize,
    pub n_overlap: usize,
    pub c_sigma: f64,
    pub sigma0: Option<f64>,
    pub source_point: bool,
    pub source_xy: Option<(f64, f64)>,
    pub mode: SolverMode,
    pub tol: f64,
    pub max_steps: usize,
    pub check_every: usize,
    pub precond_k: Option<usize>,
    pub krylov: KrylovConfig,
    pub prefix: PathBuf,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            domain: Rect::new(0.0, 1.0, 0.0, 1.0),
            freq: 10.0,
            medium: MediumConfig::Constant { velocity: 1.0 },
            grid: GridSize::PointsPerWavelength(10.0),
            n1: 1,
            n2: 1,
            n_ramp: 20,
            n_overlap: 10,
            c_sigma: helmddm::pml::DEFAULT_C_SIGMA,
            sigma0: None,
            source_point: false,
            source_xy: None,
            mode: SolverMode::Ddm,
            tol: 1e-8,
            max_steps: 200,
            check_every: 1,
            precond_k: None,
            krylov: KrylovConfig::default(),
            prefix: PathBuf::from("helmddm_out"),
            threads: None,
        }
    }
}

fn cfg_err(msg: impl Into<String>) -> HelmError {
    HelmError::Config(msg.into())
}

/// Split `text` into key/value pairs, rejecting unknown and repeated keys.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| cfg_err(format!("line {}: expected `key = value`", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(cfg_err(format!("line {}: unknown key `{k}`", n + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(cfg_err(format!("line {}: duplicate key `{k}`", n + 1)));
        }
    }
    Ok(out)
}

struct Pairs(BTreeMap<String, String>);

impl Pairs {
    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| cfg_err(format!("bad value `{v}` for `{key}`"))),
        }
    }

    fn positive(&self, key: &str) -> Result<Option<f64>> {
        match self.get::<f64>(key)? {
            Some(v) if !(v > 0.0) || !v.is_finite() => Err(cfg_err(format!("`{key}` must be positive"))),
            v => Ok(v),
        }
    }

    fn count(&self, key: &str, allow_zero: bool) -> Result<Option<usize>> {
        match self.get::<usize>(key)? {
            Some(0) if !allow_zero => Err(cfg_err(format!("`{key}` must be at least 1"))),
            v => Ok(v),
        }
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(|s| s.as_str())
    }
}

impl RunConfig {
    /// Parse a config text, then apply `key=value` overrides in order.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut pairs = parse_pairs(text)?;
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| cfg_err(format!("override `{o}` is not key=value")))?;
            let k = k.trim();
            if !KEYS.contains(&k) {
                return Err(cfg_err(format!("unknown override key `{k}`")));
            }
            pairs.insert(k.to_string(), v.trim().to_string());
        }
        Self::from_pairs(Pairs(pairs))
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text, overrides)?;
        if let MediumConfig::Gridded { path: p } = &mut cfg.medium {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    fn from_pairs(p: Pairs) -> Result<Self> {
        let d = RunConfig::default();
        let domain = Rect::new(
            p.get("domain.x0")?.unwrap_or(d.domain.x0),
            p.get("domain.x1")?.unwrap_or(d.domain.x1),
            p.get("domain.y0")?.unwrap_or(d.domain.y0),
            p.get("domain.y1")?.unwrap_or(d.domain.y1),
        );
        if !(domain.x1 > domain.x0 && domain.y1 > domain.y0) {
            return Err(cfg_err("domain must have x1 > x0 and y1 > y0"));
        }
        let medium = match p.str("medium.type").unwrap_or("constant") {
            "constant" => MediumConfig::Constant { velocity: p.positive("medium.velocity")?.unwrap_or(1.0) },
            "layered" => {
                let velocities = match p.str("medium.layers") {
                    None => DEFAULT_LAYER_VELOCITIES.to_vec(),
                    Some(s) => s
                        .split(',')
                        .map(|v| v.trim().parse::<f64>().ok().filter(|x| *x > 0.0 && x.is_finite()))
                        .collect::<Option<Vec<_>>>()
                        .filter(|v| !v.is_empty())
                        .ok_or_else(|| cfg_err(format!("bad layer velocities `{s}`")))?,
                };
                MediumConfig::Layered { velocities }
            }
            "gridded" => MediumConfig::Gridded {
                path: PathBuf::from(
                    p.str("medium.velocity").ok_or_else(|| cfg_err("gridded medium needs `medium.velocity = <dump path>`"))?,
                ),
            },
            other => return Err(cfg_err(format!("unknown medium.type `{other}`"))),
        };
        let grid = match (p.positive("grid.h")?, p.positive("grid.ppw")?) {
            (Some(_), Some(_)) => return Err(cfg_err("give only one of grid.h and grid.ppw")),
            (Some(h), None) => GridSize::Spacing(h),
            (None, Some(ppw)) => GridSize::PointsPerWavelength(ppw),
            (None, None) => d.grid,
        };
        let source_point = match p.str("source.type").unwrap_or("gaussian") {
            "gaussian" => false,
            "point" => true,
            other => return Err(cfg_err(format!("unknown source.type `{other}`"))),
        };
        let source_xy = match (p.get::<f64>("source.x")?, p.get::<f64>("source.y")?) {
            (Some(x), Some(y)) => Some((x, y)),
            (None, None) => None,
            _ => return Err(cfg_err("give both source.x and source.y")),
        };
        let mode = match p.str("solver.mode").unwrap_or("ddm") {
            "ddm" => SolverMode::Ddm,
            "fgmres" => SolverMode::Fgmres,
            "direct" => SolverMode::Direct,
            other => return Err(cfg_err(format!("unknown solver.mode `{other}`"))),
        };
        let restart = match p.str("krylov.restart") {
            None | Some("none") => None,
            Some(_) => p.count("krylov.restart", false)?,
        };
        let cfg = RunConfig {
            domain,
            freq: p.positive("freq")?.unwrap_or(d.freq),
            medium,
            grid,
            n1: p.count("part.n1", false)?.unwrap_or(d.n1),
            n2: p.count("part.n2", false)?.unwrap_or(d.n2),
            n_ramp: p.count("pml.n_ramp", false)?.unwrap_or(d.n_ramp),
            n_overlap: p.count("pml.n_overlap", true)?.unwrap_or(d.n_overlap),
            c_sigma: p.positive("pml.c_sigma")?.unwrap_or(d.c_sigma),
            sigma0: p.positive("pml.sigma0")?,
            source_point,
            source_xy,
            mode,
            tol: p.positive("solver.tol")?.unwrap_or(d.tol),
            max_steps: p.count("solver.max_steps", false)?.unwrap_or(d.max_steps),
            check_every: p.count("solver.check_every", false)?.unwrap_or(d.check_every),
            precond_k: p.count("precond.k", false)?,
            krylov: KrylovConfig {
                tol: p.positive("krylov.tol")?.unwrap_or(d.krylov.tol),
                max_iter: p.count("krylov.max_iter", false)?.unwrap_or(d.krylov.max_iter),
                restart,
            },
            prefix: p.str("output.prefix").map(PathBuf::from).unwrap_or(d.prefix),
            threads: p.count("threads", false)?,
        };
        Ok(cfg)
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI * self.freq
    }

    pub fn precond_k(&self) -> usize {
        self.precond_k.unwrap_or(self.n1 + self.n2)
    }

    fn slowest_velocity(&self, gridded: Option<&VelocityGrid>) -> f64 {
        match (&self.medium, gridded) {
            (MediumConfig::Constant { velocity }, _) => *velocity,
            (MediumConfig::Layered { velocities }, _) => velocities.iter().cloned().fold(f64::INFINITY, f64::min),
            (MediumConfig::Gridded { .. }, Some(g)) => g.values.iter().cloned().fold(f64::INFINITY, f64::min),
            _ => 1.0,
        }
    }

    /// Grid spacing: `grid.h`, or the largest spacing giving at least
    /// `grid.ppw` nodes per wavelength with the interior divisible into
    /// the requested subdomains.
    pub fn spacing(&self, gridded: Option<&VelocityGrid>) -> Result<f64> {
        match self.grid {
            GridSize::Spacing(h) => Ok(h),
            GridSize::PointsPerWavelength(ppw) => {
                let wavelength = self.slowest_velocity(gridded) / self.freq;
                let target = wavelength / ppw;
                let lx = self.domain.x1 - self.domain.x0;
                let ly = self.domain.y1 - self.domain.y0;
                let cx = ((lx / target).ceil() as usize).div_ceil(self.n1) * self.n1;
                let h = lx / cx as f64;
                let cy = ly / h;
                if (cy - cy.round()).abs() > 1e-9 * cy || (cy.round() as usize) % self.n2 != 0 {
                    return Err(cfg_err("grid.ppw gives a y extent that does not split into part.n2 subdomains; give grid.h"));
                }
                Ok(h)
            }
        }
    }
}

/// Everything a solver run needs, derived from a [`RunConfig`].
pub struct Problem {
    pub partition: Partition,
    pub medium: MediumModel,
    pub profile: PmlProfile,
    pub source: SourceSpec,
    /// Wavenumber at the source centre, scaling the Gaussian.
    pub k_source: f64,
}

impl Problem {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        let gridded = match &cfg.medium {
            MediumConfig::Gridded { path } => {
                let f = read_dump(path)?;
                let values: Vec<f64> = f.values.iter().map(|v| v.re).collect();
                Some(VelocityGrid { window: f.window, lattice: f.lattice, values })
            }
            _ => None,
        };
        let h = cfg.spacing(gridded.as_ref())?;
        let spec = GridSpec { interior: cfg.domain, h, n_ramp: cfg.n_ramp, n_overlap: cfg.n_overlap, n1: cfg.n1, n2: cfg.n2 };
        let partition = build_partition(spec)?;
        let outer = cfg.domain.dilate(spec.ramp_width() + 2.0 * h);
        let medium = match (&cfg.medium, gridded) {
            (MediumConfig::Constant { velocity }, _) => MediumModel::constant(cfg.omega(), *velocity, cfg.domain, outer)?,
            (MediumConfig::Layered { velocities }, _) => MediumModel::equal_layers(cfg.omega(), velocities, cfg.domain, outer)?,
            (MediumConfig::Gridded { .. }, Some(g)) => MediumModel::gridded(cfg.omega(), g, cfg.domain, outer)?,
            _ => unreachable!("gridded medium loaded above"),
        };
        let profile = match cfg.sigma0 {
            Some(s) => PmlProfile::new(s, spec.ramp_width(), spec.overlap_width()),
            None => PmlProfile::from_c_sigma(cfg.c_sigma, medium.k_min(), spec.ramp_width(), spec.overlap_width()),
        };
        let (x, y) = cfg
            .source_xy
            .unwrap_or((0.5 * (cfg.domain.x0 + cfg.domain.x1), 0.5 * (cfg.domain.y0 + cfg.domain.y1)));
        let source = if cfg.source_point { SourceSpec::point(x, y) } else { SourceSpec::gaussian(x, y) };
        source.validate(&cfg.domain)?;
        let k_source = medium.eval_wavenumber(x, y)?;
        Ok(Problem { partition, medium, profile, source, k_source })
    }

    pub fn window(&self) -> Window {
        self.partition.global_window()
    }

    pub fn lattice(&self) -> Lattice {
        self.partition.lattice
    }

    pub fn source_field(&self) -> helmddm::FieldGrid {
        self.source.sample(self.window(), self.lattice(), self.k_source)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_comments() {
        let c = RunConfig::parse("# nothing\n\n", &[]).unwrap();
        assert_eq!(c, RunConfig::default());
        let c = RunConfig::parse("freq = 5 # trailing\npart.n1=2\nsolver.mode = fgmres\n", &[]).unwrap();
        assert_eq!(c.freq, 5.0);
        assert_eq!(c.n1, 2);
        assert_eq!(c.mode, SolverMode::Fgmres);
        assert_eq!(c.precond_k(), 3);
    }

    #[test]
    fn overrides_replace_file_values() {
        let c = RunConfig::parse("freq = 5\n", &["freq=7".into(), "precond.k = 2".into()]).unwrap();
        assert_eq!(c.freq, 7.0);
        assert_eq!(c.precond_k(), 2);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "colour = red",
            "freq",
            "freq = -1",
            "freq = 1\nfreq = 2",
            "grid.h = 0.1\ngrid.ppw = 10",
            "solver.mode = magic",
            "part.n1 = 0",
            "source.x = 0.5",
            "domain.x1 = -1",
            "medium.type = layered\nmedium.layers = 1, x",
            "medium.type = gridded",
        ] {
            assert!(matches!(RunConfig::parse(text, &[]), Err(HelmError::Config(_))), "{text}");
        }
        assert!(matches!(RunConfig::parse("", &["nokey=1".into()]), Err(HelmError::Config(_))));
        assert!(matches!(RunConfig::parse("", &["freq".into()]), Err(HelmError::Config(_))));
    }

    #[test]
    fn ppw_spacing_divides_partition() {
        let c = RunConfig::parse("freq = 10\ngrid.ppw = 12\npart.n1 = 3\npart.n2 = 3\n", &[]).unwrap();
        let h = c.spacing(None).unwrap();
        let cells = 1.0 / h;
        assert!((cells - cells.round()).abs() < 1e-9 && cells.round() as usize % 3 == 0);
        assert!(h <= 0.1 / 12.0 + 1e-15);
    }

    #[test]
    fn builds_problem() {
        let c = RunConfig::parse("grid.h = 0.025\npart.n1 = 2\npart.n2 = 2\npml.n_ramp = 8\npml.n_overlap = 4\n", &[]).unwrap();
        let p = Problem::build(&c).unwrap();
        assert_eq!(p.window().nx, 41 + 16);
        assert!((p.k_source - 20.0 * PI).abs() < 1e-12);
        let bad = RunConfig::parse("grid.h = 0.03\npart.n1 = 2", &[]).unwrap();
        assert!(matches!(Problem::build(&bad), Err(HelmError::Config(_))));
        let outside = RunConfig::parse("source.x = 2\nsource.y = 0.5", &[]).unwrap();
        assert!(matches!(Problem::build(&outside), Err(HelmError::Config(_))));
    }
}
