//! Structured `N1 x N2` decomposition of the interior domain.
//!
//! All geometry is kept in integer lattice units. Subdomain `(i, j)` is
//! zero-based; its core spans lattice columns `[i c1, (i+1) c1]`. Cut `i`
//! is the grid line `p = i c1` (`0..=n1`).
//!
//! Discrete cut convention: for cut `xi`, the left side is `p <= xi` and
//! the right side is `p >= xi + 1`. Blend functions are aligned with it:
//! `beta_left(xi)` equals 1 for `p >= xi` and `beta_right(xi)` equals 1 for
//! `p <= xi + 1`, so the stencil of every node outside a transfer mask only
//! sees the region where its blend function is identically one.

use crate::error::{HelmError, Result};
use crate::field::{Lattice, Rect, Window};

/// Inclusive lattice-unit box used to anchor PML stretching.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LatticeBox {
    pub p0: i64,
    pub p1: i64,
    pub q0: i64,
    pub q1: i64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub interior: Rect,
    pub h: f64,
    pub n_ramp: usize,
    pub n_overlap: usize,
    pub n1: usize,
    pub n2: usize,
}

impl GridSpec {
    /// Number of lattice cells across the interior in x and y.
    pub fn cells(&self) -> Result<(usize, usize)> {
        let count = |len: f64, axis: &str| -> Result<usize> {
            let m = (len / self.h).round();
            if !(self.h > 0.0) || m < 1.0 || (m * self.h - len).abs() > 1e-9 * len.abs().max(self.h) {
                return Err(HelmError::Config(format!(
                    "{axis}-extent {len} is not an integer multiple of h = {}",
                    self.h
                )));
            }
            Ok(m as usize)
        };
        Ok((
            count(self.interior.x1 - self.interior.x0, "x")?,
            count(self.interior.y1 - self.interior.y0, "y")?,
        ))
    }

    pub fn ramp_width(&self) -> f64 {
        self.n_ramp as f64 * self.h
    }

    pub fn overlap_width(&self) -> f64 {
        self.n_overlap as f64 * self.h
    }
}

/// Smooth cutoff: 1 for `t <= 0`, 0 for `t >= 1`, quintic C2 transition.
#[inline]
pub fn beta0(t: f64) -> f64 {
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    }
}

/// The eight source-transfer directions, named by where the target lies
/// relative to the source subdomain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    West,
    East,
    South,
    North,
    SouthWest,
    SouthEast,
    NorthWest,
    NorthEast,
}

impl Direction {
    /// Gather order used when summing transfer sources.
    pub const ALL: [Direction; 8] = [
        Direction::West,
        Direction::East,
        Direction::South,
        Direction::North,
        Direction::SouthWest,
        Direction::SouthEast,
        Direction::NorthWest,
        Direction::NorthEast,
    ];

    pub fn offset(self) -> (i64, i64) {
        match self {
            Direction::West => (-1, 0),
            Direction::East => (1, 0),
            Direction::South => (0, -1),
            Direction::North => (0, 1),
            Direction::SouthWest => (-1, -1),
            Direction::SouthEast => (1, -1),
            Direction::NorthWest => (-1, 1),
            Direction::NorthEast => (1, 1),
        }
    }

    pub fn is_corner(self) -> bool {
        let (dx, dy) = self.offset();
        dx != 0 && dy != 0
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Direction::West => "←",
            Direction::East => "→",
            Direction::South => "↓",
            Direction::North => "↑",
            Direction::SouthWest => "↙",
            Direction::SouthEast => "↘",
            Direction::NorthWest => "↖",
            Direction::NorthEast => "↗",
        }
    }
}

/// Lattice position of the cut(s) shared by a source subdomain and its
/// neighbour in `dir`. Components for an axis the direction does not cross
/// are `None`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cuts {
    pub x: Option<i64>,
    pub y: Option<i64>,
}

#[inline]
fn side_contains(offset: i64, cut: Option<i64>, r: i64) -> bool {
    match (offset, cut) {
        (1, Some(c)) => r >= c + 1,
        (-1, Some(c)) => r <= c,
        _ => true,
    }
}

/// 0/1 half- or quarter-plane indicator sampled on a window.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionMask {
    pub direction: Direction,
    pub cuts: Cuts,
    pub window: Window,
    pub values: Vec<u8>,
}

impl DirectionMask {
    #[inline]
    pub fn contains(direction: Direction, cuts: Cuts, p: i64, q: i64) -> bool {
        let (dx, dy) = direction.offset();
        side_contains(dx, cuts.x, p) && side_contains(dy, cuts.y, q)
    }

    /// Inclusive lattice range of the mask along x, clipped to `[lo, hi]`.
    pub fn x_range(direction: Direction, cuts: Cuts, lo: i64, hi: i64) -> (i64, i64) {
        clip_range(direction.offset().0, cuts.x, lo, hi)
    }

    pub fn y_range(direction: Direction, cuts: Cuts, lo: i64, hi: i64) -> (i64, i64) {
        clip_range(direction.offset().1, cuts.y, lo, hi)
    }
}

fn clip_range(offset: i64, cut: Option<i64>, lo: i64, hi: i64) -> (i64, i64) {
    match (offset, cut) {
        (1, Some(c)) => (lo.max(c + 1), hi),
        (-1, Some(c)) => (lo, hi.min(c)),
        _ => (lo, hi),
    }
}

pub fn direction_mask(direction: Direction, cuts: Cuts, window: Window) -> DirectionMask {
    let mut values = Vec::with_capacity(window.len());
    for q in window.py..=window.q_last() {
        for p in window.px..=window.p_last() {
            values.push(DirectionMask::contains(direction, cuts, p, q) as u8);
        }
    }
    DirectionMask { direction, cuts, window, values }
}

/// One subdomain: core, local window (core plus overlap and PML), and the
/// box whose exterior carries the local PML stretching.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubdomainWindow {
    pub i: usize,
    pub j: usize,
    pub core: Window,
    pub window: Window,
    pub stretch_box: LatticeBox,
}

/// Blend profiles of one subdomain, stored separably on its window.
#[derive(Clone, Debug, PartialEq)]
pub struct BlendWeights {
    pub window: Window,
    /// `beta_left` of the subdomain's left cut, over the window's x range.
    pub west: Vec<f64>,
    /// `beta_right` of the subdomain's right cut.
    pub east: Vec<f64>,
    pub south: Vec<f64>,
    pub north: Vec<f64>,
}

/// Which nodal product of blend profiles to materialise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlendKind {
    /// Assembly weight `beta_0 = west * east * south * north`.
    Assembly,
    /// Blend used when transferring towards a neighbour in this direction.
    Toward(Direction),
}

impl BlendWeights {
    #[inline]
    pub fn assembly(&self, p: i64, q: i64) -> f64 {
        let a = (p - self.window.px) as usize;
        let b = (q - self.window.py) as usize;
        self.west[a] * self.east[a] * self.south[b] * self.north[b]
    }

    fn toward(&self, dir: Direction, p: i64, q: i64) -> f64 {
        let a = (p - self.window.px) as usize;
        let b = (q - self.window.py) as usize;
        let (dx, dy) = dir.offset();
        let bx = match dx {
            1 => self.east[a],
            -1 => self.west[a],
            _ => 1.0,
        };
        let by = match dy {
            1 => self.north[b],
            -1 => self.south[b],
            _ => 1.0,
        };
        bx * by
    }

    pub fn nodal(&self, kind: BlendKind) -> Vec<f64> {
        let w = self.window;
        (0..w.len())
            .map(|k| {
                let (p, q) = w.node(k);
                match kind {
                    BlendKind::Assembly => self.assembly(p, q),
                    BlendKind::Toward(d) => self.toward(d, p, q),
                }
            })
            .collect()
    }
}

/// Validated decomposition with derived lattice quantities.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub spec: GridSpec,
    pub lattice: Lattice,
    /// Interior cells in x / y.
    pub m1: usize,
    pub m2: usize,
    /// Core cells per subdomain in x / y.
    pub c1: usize,
    pub c2: usize,
    pub subdomains: Vec<SubdomainWindow>,
}

pub fn build_partition(spec: GridSpec) -> Result<Partition> {
    let (m1, m2) = spec.cells()?;
    if spec.n1 == 0 || spec.n2 == 0 {
        return Err(HelmError::Config("subdomain counts must be positive".into()));
    }
    if m1 % spec.n1 != 0 || m2 % spec.n2 != 0 {
        return Err(HelmError::Config(format!(
            "{m1}x{m2} interior cells cannot be split into {}x{} equal subdomains",
            spec.n1, spec.n2
        )));
    }
    if spec.n_ramp == 0 {
        return Err(HelmError::Config("PML ramp must be at least one node wide".into()));
    }
    if (spec.n1 > 1 || spec.n2 > 1) && spec.n_overlap == 0 {
        return Err(HelmError::Config("interior cuts need a positive overlap width".into()));
    }
    let c1 = m1 / spec.n1;
    let c2 = m2 / spec.n2;
    let nr = spec.n_ramp as i64;
    let no = spec.n_overlap as i64;
    let ext = nr + no;
    let mut subdomains = Vec::with_capacity(spec.n1 * spec.n2);
    for j in 0..spec.n2 {
        for i in 0..spec.n1 {
            let (cp0, cp1) = ((i * c1) as i64, ((i + 1) * c1) as i64);
            let (cq0, cq1) = ((j * c2) as i64, ((j + 1) * c2) as i64);
            let first_x = i == 0;
            let last_x = i + 1 == spec.n1;
            let first_y = j == 0;
            let last_y = j + 1 == spec.n2;
            let side = |boundary: bool, w: i64| if boundary { w } else { ext.max(w) };
            let window = Window::from_bounds(
                cp0 - side(first_x, nr),
                cp1 + side(last_x, nr),
                cq0 - side(first_y, nr),
                cq1 + side(last_y, nr),
            );
            let grow = |boundary: bool| if boundary { 0 } else { no };
            let stretch_box = LatticeBox {
                p0: cp0 - grow(first_x),
                p1: cp1 + grow(last_x),
                q0: cq0 - grow(first_y),
                q1: cq1 + grow(last_y),
            };
            subdomains.push(SubdomainWindow {
                i,
                j,
                core: Window::from_bounds(cp0, cp1, cq0, cq1),
                window,
                stretch_box,
            });
        }
    }
    Ok(Partition {
        spec,
        lattice: Lattice::new(spec.interior.x0, spec.interior.y0, spec.h),
        m1,
        m2,
        c1,
        c2,
        subdomains,
    })
}

impl Partition {
    pub fn n1(&self) -> usize {
        self.spec.n1
    }

    pub fn n2(&self) -> usize {
        self.spec.n2
    }

    pub fn len(&self) -> usize {
        self.subdomains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subdomains.is_empty()
    }

    /// Flat index of subdomain `(i, j)`.
    #[inline]
    pub fn id(&self, i: usize, j: usize) -> usize {
        j * self.spec.n1 + i
    }

    pub fn get(&self, i: i64, j: i64) -> Option<&SubdomainWindow> {
        if i < 0 || j < 0 || i >= self.spec.n1 as i64 || j >= self.spec.n2 as i64 {
            None
        } else {
            Some(&self.subdomains[self.id(i as usize, j as usize)])
        }
    }

    /// Neighbour of `(i, j)` in direction `dir`, if any.
    pub fn neighbor(&self, i: usize, j: usize, dir: Direction) -> Option<&SubdomainWindow> {
        let (dx, dy) = dir.offset();
        self.get(i as i64 + dx, j as i64 + dy)
    }

    /// The PML-extended global window.
    pub fn global_window(&self) -> Window {
        let nr = self.spec.n_ramp as i64;
        Window::from_bounds(-nr, self.m1 as i64 + nr, -nr, self.m2 as i64 + nr)
    }

    pub fn interior_box(&self) -> LatticeBox {
        LatticeBox { p0: 0, p1: self.m1 as i64, q0: 0, q1: self.m2 as i64 }
    }

    pub fn interior_window(&self) -> Window {
        Window::from_bounds(0, self.m1 as i64, 0, self.m2 as i64)
    }

    pub fn cut_x(&self, i: usize) -> i64 {
        (i * self.c1) as i64
    }

    pub fn cut_y(&self, j: usize) -> i64 {
        (j * self.c2) as i64
    }

    /// Physical cut coordinates `xi_i`, `eta_j`.
    pub fn xi(&self, i: usize) -> f64 {
        self.lattice.x(self.cut_x(i))
    }

    pub fn eta(&self, j: usize) -> f64 {
        self.lattice.y(self.cut_y(j))
    }

    /// Cuts crossed when transferring from `(i, j)` towards `dir`.
    pub fn transfer_cuts(&self, i: usize, j: usize, dir: Direction) -> Cuts {
        let (dx, dy) = dir.offset();
        let x = match dx {
            1 => Some(self.cut_x(i + 1)),
            -1 => Some(self.cut_x(i)),
            _ => None,
        };
        let y = match dy {
            1 => Some(self.cut_y(j + 1)),
            -1 => Some(self.cut_y(j)),
            _ => None,
        };
        Cuts { x, y }
    }

    /// Left-side blend of cut `i`: 1 for `p >= cut`, 0 at `d~` and beyond to the left.
    /// The domain-boundary cut `i = 0` is identically one.
    #[inline]
    pub fn beta_west(&self, i: usize, p: i64) -> f64 {
        if i == 0 {
            1.0
        } else {
            beta0((self.cut_x(i) - p) as f64 / self.spec.n_overlap as f64)
        }
    }

    /// Right-side blend of cut `i`: 1 for `p <= cut + 1`; identically one for `i = n1`.
    #[inline]
    pub fn beta_east(&self, i: usize, p: i64) -> f64 {
        if i == self.spec.n1 {
            1.0
        } else {
            beta0((p - self.cut_x(i) - 1) as f64 / self.spec.n_overlap as f64)
        }
    }

    #[inline]
    pub fn beta_south(&self, j: usize, q: i64) -> f64 {
        if j == 0 {
            1.0
        } else {
            beta0((self.cut_y(j) - q) as f64 / self.spec.n_overlap as f64)
        }
    }

    #[inline]
    pub fn beta_north(&self, j: usize, q: i64) -> f64 {
        if j == self.spec.n2 {
            1.0
        } else {
            beta0((q - self.cut_y(j) - 1) as f64 / self.spec.n_overlap as f64)
        }
    }

    pub fn blend_weights(&self, sub: &SubdomainWindow) -> BlendWeights {
        let w = sub.window;
        let xs = w.px..=w.p_last();
        let ys = w.py..=w.q_last();
        BlendWeights {
            window: w,
            west: xs.clone().map(|p| self.beta_west(sub.i, p)).collect(),
            east: xs.map(|p| self.beta_east(sub.i + 1, p)).collect(),
            south: ys.clone().map(|q| self.beta_south(sub.j, q)).collect(),
            north: ys.map(|q| self.beta_north(sub.j + 1, q)).collect(),
        }
    }

    /// Blend used when transferring from `(i, j)` towards `dir`, as 1D
    /// profiles over the inclusive ranges `xs` and `ys`.
    pub fn transfer_blend(
        &self,
        i: usize,
        j: usize,
        dir: Direction,
        xs: (i64, i64),
        ys: (i64, i64),
    ) -> (Vec<f64>, Vec<f64>) {
        let (dx, dy) = dir.offset();
        let bx = (xs.0..=xs.1)
            .map(|p| match dx {
                1 => self.beta_east(i + 1, p),
                -1 => self.beta_west(i, p),
                _ => 1.0,
            })
            .collect();
        let by = (ys.0..=ys.1)
            .map(|q| match dy {
                1 => self.beta_north(j + 1, q),
                -1 => self.beta_south(j, q),
                _ => 1.0,
            })
            .collect();
        (bx, by)
    }

    /// Subdomain that owns global node `(p, q)` for source restriction.
    /// Cut-line nodes go to the smaller index; PML-strip nodes go to the
    /// adjacent boundary subdomain.
    #[inline]
    pub fn owner(&self, p: i64, q: i64) -> (usize, usize) {
        let own = |r: i64, c: usize, n: usize| -> usize {
            if r <= 0 {
                0
            } else {
                (((r - 1) as usize) / c).min(n - 1)
            }
        };
        (own(p, self.c1, self.spec.n1), own(q, self.c2, self.spec.n2))
    }
}
