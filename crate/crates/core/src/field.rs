//! Node lattices, rectangular node windows and complex nodal fields.
//!
//! Every grid in the solver is a window into one global lattice anchored at
//! the lower-left corner of the interior domain, so fields living on
//! different subdomains can be combined by index arithmetic alone.

use num_complex::Complex64;

use crate::error::{HelmError, Result};

pub type C64 = Complex64;

/// Uniform node lattice: node `(p, q)` sits at `(x0 + p h, y0 + q h)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lattice {
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
}

impl Lattice {
    pub fn new(x0: f64, y0: f64, h: f64) -> Self {
        Lattice { x0, y0, h }
    }

    #[inline]
    pub fn x(&self, p: i64) -> f64 {
        self.x0 + p as f64 * self.h
    }

    #[inline]
    pub fn y(&self, q: i64) -> f64 {
        self.y0 + q as f64 * self.h
    }

    /// Nearest lattice index to coordinate `x`; exact half-way ties go to the
    /// smaller index.
    pub fn nearest_p(&self, x: f64) -> i64 {
        ((x - self.x0) / self.h - 0.5).ceil() as i64
    }

    pub fn nearest_q(&self, y: f64) -> i64 {
        ((y - self.y0) / self.h - 0.5).ceil() as i64
    }
}

/// Axis-aligned rectangle in physical coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn dilate(&self, w: f64) -> Rect {
        Rect::new(self.x0 - w, self.x1 + w, self.y0 - w, self.y1 + w)
    }

    pub fn clamp(&self, x: f64, y: f64) -> (f64, f64) {
        (x.clamp(self.x0, self.x1), y.clamp(self.y0, self.y1))
    }
}

/// Rectangular block of lattice nodes `[px, px+nx) x [py, py+ny)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Window {
    pub px: i64,
    pub py: i64,
    pub nx: usize,
    pub ny: usize,
}

impl Window {
    pub fn new(px: i64, py: i64, nx: usize, ny: usize) -> Self {
        Window { px, py, nx, ny }
    }

    /// Window spanning the inclusive index ranges `[p0, p1] x [q0, q1]`.
    pub fn from_bounds(p0: i64, p1: i64, q0: i64, q1: i64) -> Self {
        assert!(p1 >= p0 && q1 >= q0, "empty window");
        Window {
            px: p0,
            py: q0,
            nx: (p1 - p0 + 1) as usize,
            ny: (q1 - q0 + 1) as usize,
        }
    }

    #[inline]
    pub fn p_last(&self) -> i64 {
        self.px + self.nx as i64 - 1
    }

    #[inline]
    pub fn q_last(&self) -> i64 {
        self.py + self.ny as i64 - 1
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.nx == 0 || self.ny == 0
    }

    #[inline]
    pub fn contains(&self, p: i64, q: i64) -> bool {
        p >= self.px && p <= self.p_last() && q >= self.py && q <= self.q_last()
    }

    /// Row-major (x fastest) offset of node `(p, q)`; caller guarantees containment.
    #[inline]
    pub fn offset(&self, p: i64, q: i64) -> usize {
        (q - self.py) as usize * self.nx + (p - self.px) as usize
    }

    pub fn index(&self, p: i64, q: i64) -> Option<usize> {
        self.contains(p, q).then(|| self.offset(p, q))
    }

    #[inline]
    pub fn node(&self, k: usize) -> (i64, i64) {
        (self.px + (k % self.nx) as i64, self.py + (k / self.nx) as i64)
    }

    /// True for nodes on the outermost ring of the window.
    #[inline]
    pub fn on_boundary(&self, p: i64, q: i64) -> bool {
        p == self.px || p == self.p_last() || q == self.py || q == self.q_last()
    }

    pub fn intersect(&self, other: &Window) -> Option<Window> {
        let p0 = self.px.max(other.px);
        let p1 = self.p_last().min(other.p_last());
        let q0 = self.py.max(other.py);
        let q1 = self.q_last().min(other.q_last());
        (p0 <= p1 && q0 <= q1).then(|| Window::from_bounds(p0, p1, q0, q1))
    }

    /// The window shrunk by one node on every side (nodes not on the boundary ring).
    pub fn interior(&self) -> Option<Window> {
        (self.nx > 2 && self.ny > 2)
            .then(|| Window::from_bounds(self.px + 1, self.p_last() - 1, self.py + 1, self.q_last() - 1))
    }
}

/// Complex nodal values on a lattice window, row-major with x fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldGrid {
    pub window: Window,
    pub lattice: Lattice,
    pub values: Vec<C64>,
}

impl FieldGrid {
    pub fn zeros(window: Window, lattice: Lattice) -> Self {
        FieldGrid {
            window,
            lattice,
            values: vec![C64::new(0.0, 0.0); window.len()],
        }
    }

    pub fn from_values(window: Window, lattice: Lattice, values: Vec<C64>) -> Result<Self> {
        if values.len() != window.len() || window.is_empty() {
            return Err(HelmError::Contract(format!(
                "field of {} values does not fit a {}x{} window",
                values.len(),
                window.nx,
                window.ny
            )));
        }
        Ok(FieldGrid { window, lattice, values })
    }

    pub fn from_fn(window: Window, lattice: Lattice, mut f: impl FnMut(i64, i64) -> C64) -> Self {
        let mut values = Vec::with_capacity(window.len());
        for q in window.py..=window.q_last() {
            for p in window.px..=window.p_last() {
                values.push(f(p, q));
            }
        }
        FieldGrid { window, lattice, values }
    }

    /// Value at lattice node `(p, q)`; zero outside the window.
    #[inline]
    pub fn at(&self, p: i64, q: i64) -> C64 {
        if self.window.contains(p, q) {
            self.values[self.window.offset(p, q)]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    /// Copy of this field sampled on `window`, zero-extended.
    pub fn restrict_to(&self, window: Window) -> FieldGrid {
        let mut out = FieldGrid::zeros(window, self.lattice);
        out.add_overlap(self, 1.0);
        out
    }

    /// `self += scale * other` over the overlap of the two windows.
    pub fn add_overlap(&mut self, other: &FieldGrid, scale: f64) {
        let Some(ov) = self.window.intersect(&other.window) else {
            return;
        };
        for q in ov.py..=ov.q_last() {
            let a = self.window.offset(ov.px, q);
            let b = other.window.offset(ov.px, q);
            for (d, s) in self.values[a..a + ov.nx]
                .iter_mut()
                .zip(&other.values[b..b + ov.nx])
            {
                *d += s * scale;
            }
        }
    }

    pub fn norm2(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.re == 0.0 && v.im == 0.0)
    }

    pub fn scale(&mut self, s: C64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    /// Physical coordinates of the first node.
    pub fn origin(&self) -> (f64, f64) {
        (self.lattice.x(self.window.px), self.lattice.y(self.window.py))
    }
}
