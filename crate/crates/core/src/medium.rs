//! Wave-speed models and source terms.

use std::f64::consts::PI;

use crate::error::{HelmError, Result};
use crate::field::{FieldGrid, Lattice, Rect, Window, C64};

/// Horizontal layer `[y_lo, y_hi]` with constant velocity.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub y_lo: f64,
    pub y_hi: f64,
    pub velocity: f64,
}

/// Nodal velocities on a lattice window (nearest-node lookup).
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityGrid {
    pub window: Window,
    pub lattice: Lattice,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MediumKind {
    Constant { velocity: f64 },
    /// Layers sorted bottom (smallest y) to top, contiguous.
    Layered { layers: Vec<Layer> },
    Gridded { grid: VelocityGrid },
}

/// Velocity field `c(x)` plus angular frequency; the wavenumber is `omega / c`.
///
/// Outside the interior box the velocity is continued as a constant along the
/// direction normal to the box (the value at the nearest interior point).
#[derive(Clone, Debug, PartialEq)]
pub struct MediumModel {
    pub omega: f64,
    pub kind: MediumKind,
    interior: Rect,
    outer: Rect,
}

/// Velocities of the default five-layer model, listed top to bottom.
pub const DEFAULT_LAYER_VELOCITIES: [f64; 5] = [1.00, 1.25, 1.60, 2.00, 2.50];

impl MediumModel {
    pub fn constant(omega: f64, velocity: f64, interior: Rect, outer: Rect) -> Result<Self> {
        Self::new(omega, MediumKind::Constant { velocity }, interior, outer)
    }

    /// Layers given bottom to top; they must tile `[interior.y0, interior.y1]`.
    pub fn layered(omega: f64, layers: Vec<Layer>, interior: Rect, outer: Rect) -> Result<Self> {
        Self::new(omega, MediumKind::Layered { layers }, interior, outer)
    }

    /// Equal-thickness layers with velocities listed from the top of the domain down.
    pub fn equal_layers(omega: f64, top_down: &[f64], interior: Rect, outer: Rect) -> Result<Self> {
        if top_down.is_empty() {
            return Err(HelmError::Config("layered medium needs at least one layer".into()));
        }
        let n = top_down.len();
        let dy = (interior.y1 - interior.y0) / n as f64;
        let layers = top_down
            .iter()
            .rev()
            .enumerate()
            .map(|(l, &velocity)| Layer {
                y_lo: if l == 0 { interior.y0 } else { interior.y0 + l as f64 * dy },
                y_hi: if l + 1 == n { interior.y1 } else { interior.y0 + (l + 1) as f64 * dy },
                velocity,
            })
            .collect();
        Self::layered(omega, layers, interior, outer)
    }

    pub fn gridded(omega: f64, grid: VelocityGrid, interior: Rect, outer: Rect) -> Result<Self> {
        Self::new(omega, MediumKind::Gridded { grid }, interior, outer)
    }

    fn new(omega: f64, kind: MediumKind, interior: Rect, outer: Rect) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(HelmError::Config(format!("angular frequency must be positive, got {omega}")));
        }
        let positive = |c: f64| c.is_finite() && c > 0.0;
        match &kind {
            MediumKind::Constant { velocity } => {
                if !positive(*velocity) {
                    return Err(HelmError::Config(format!("velocity must be positive, got {velocity}")));
                }
            }
            MediumKind::Layered { layers } => {
                if layers.is_empty() {
                    return Err(HelmError::Config("layered medium needs at least one layer".into()));
                }
                let tol = 1e-12 * (interior.y1 - interior.y0).abs().max(1.0);
                if (layers[0].y_lo - interior.y0).abs() > tol
                    || (layers[layers.len() - 1].y_hi - interior.y1).abs() > tol
                {
                    return Err(HelmError::Config("layers must cover the interior vertical extent".into()));
                }
                for (l, layer) in layers.iter().enumerate() {
                    if !positive(layer.velocity) || layer.y_hi <= layer.y_lo {
                        return Err(HelmError::Config(format!("invalid layer {l}: {layer:?}")));
                    }
                    if l > 0 && (layers[l - 1].y_hi - layer.y_lo).abs() > tol {
                        return Err(HelmError::Config(format!("layer {l} is not contiguous with layer {}", l - 1)));
                    }
                }
            }
            MediumKind::Gridded { grid } => {
                if grid.values.len() != grid.window.len() || !grid.values.iter().all(|&c| positive(c)) {
                    return Err(HelmError::Config("gridded velocity must be positive on every node".into()));
                }
                let l = &grid.lattice;
                let covered = l.x(grid.window.px) <= interior.x0 + 1e-9 * l.h
                    && l.x(grid.window.p_last()) >= interior.x1 - 1e-9 * l.h
                    && l.y(grid.window.py) <= interior.y0 + 1e-9 * l.h
                    && l.y(grid.window.q_last()) >= interior.y1 - 1e-9 * l.h;
                if !covered {
                    return Err(HelmError::Config("gridded velocity does not cover the interior domain".into()));
                }
            }
        }
        Ok(MediumModel { omega, kind, interior, outer })
    }

    pub fn interior(&self) -> Rect {
        self.interior
    }

    /// Velocity at a point of the PML box.
    pub fn velocity(&self, x: f64, y: f64) -> Result<f64> {
        if !self.outer.contains(x, y) {
            return Err(HelmError::Domain(format!("point ({x}, {y}) lies outside the PML box")));
        }
        let (x, y) = self.interior.clamp(x, y);
        Ok(match &self.kind {
            MediumKind::Constant { velocity } => *velocity,
            MediumKind::Layered { layers } => layers
                .iter()
                .find(|layer| y <= layer.y_hi)
                .unwrap_or(&layers[layers.len() - 1])
                .velocity,
            MediumKind::Gridded { grid } => {
                let p = grid.lattice.nearest_p(x).clamp(grid.window.px, grid.window.p_last());
                let q = grid.lattice.nearest_q(y).clamp(grid.window.py, grid.window.q_last());
                grid.values[grid.window.offset(p, q)]
            }
        })
    }

    /// `k = omega / c` at a point of the PML box.
    pub fn eval_wavenumber(&self, x: f64, y: f64) -> Result<f64> {
        Ok(self.omega / self.velocity(x, y)?)
    }

    fn velocity_range(&self) -> (f64, f64) {
        match &self.kind {
            MediumKind::Constant { velocity } => (*velocity, *velocity),
            MediumKind::Layered { layers } => layers
                .iter()
                .fold((f64::INFINITY, 0.0), |(lo, hi), l| (lo.min(l.velocity), hi.max(l.velocity))),
            MediumKind::Gridded { grid } => grid
                .values
                .iter()
                .fold((f64::INFINITY, 0.0), |(lo, hi), &c| (lo.min(c), hi.max(c))),
        }
    }

    pub fn k_min(&self) -> f64 {
        self.omega / self.velocity_range().1
    }

    pub fn k_max(&self) -> f64 {
        self.omega / self.velocity_range().0
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, MediumKind::Constant { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SourceKind {
    /// `amplitude * (16 k^2 / pi^3) exp(-(4k/pi)^2 |x - x0|^2)`.
    Gaussian2D { amplitude: f64 },
    /// Discrete delta: `1 / h^2` at the node nearest the centre.
    PointDelta,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceSpec {
    pub kind: SourceKind,
    pub center: (f64, f64),
}

impl SourceSpec {
    pub fn gaussian(x: f64, y: f64) -> Self {
        SourceSpec {
            kind: SourceKind::Gaussian2D { amplitude: 1.0 },
            center: (x, y),
        }
    }

    pub fn point(x: f64, y: f64) -> Self {
        SourceSpec {
            kind: SourceKind::PointDelta,
            center: (x, y),
        }
    }

    pub fn validate(&self, interior: &Rect) -> Result<()> {
        let (x, y) = self.center;
        if x > interior.x0 && x < interior.x1 && y > interior.y0 && y < interior.y1 {
            Ok(())
        } else {
            Err(HelmError::Config(format!("source centre ({x}, {y}) is not strictly inside the domain")))
        }
    }

    /// Peak value of the Gaussian profile for reference wavenumber `k`.
    pub fn gaussian_peak(k: f64, amplitude: f64) -> f64 {
        amplitude * 16.0 * k * k / (PI * PI * PI)
    }

    /// Continuous source density at a point (Gaussian only; zero for the delta).
    pub fn density(&self, k_ref: f64, x: f64, y: f64) -> f64 {
        match self.kind {
            SourceKind::Gaussian2D { amplitude } => {
                let (cx, cy) = self.center;
                let a = 4.0 * k_ref / PI;
                let r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                Self::gaussian_peak(k_ref, amplitude) * (-(a * a) * r2).exp()
            }
            SourceKind::PointDelta => 0.0,
        }
    }

    /// Nodal samples of the source on `window`.
    pub fn sample(&self, window: Window, lattice: Lattice, k_ref: f64) -> FieldGrid {
        match self.kind {
            SourceKind::Gaussian2D { .. } => FieldGrid::from_fn(window, lattice, |p, q| {
                C64::new(self.density(k_ref, lattice.x(p), lattice.y(q)), 0.0)
            }),
            SourceKind::PointDelta => {
                let mut f = FieldGrid::zeros(window, lattice);
                let p = lattice.nearest_p(self.center.0);
                let q = lattice.nearest_q(self.center.1);
                if let Some(k) = window.index(p, q) {
                    f.values[k] = C64::new(1.0 / (lattice.h * lattice.h), 0.0);
                }
                f
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boxes() -> (Rect, Rect) {
        let interior = Rect::new(-1.0, 0.0, -1.0, 0.0);
        (interior, interior.dilate(0.2))
    }

    #[test]
    fn constant_wavenumber() {
        let (i, o) = boxes();
        let m = MediumModel::constant(2.0 * PI * 25.0, 1.0, i, o).unwrap();
        let k = m.eval_wavenumber(-0.3, -0.7).unwrap();
        assert!((k - 50.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn single_layer_is_constant() {
        let (i, o) = boxes();
        let m = MediumModel::equal_layers(4.0, &[2.0], i, o).unwrap();
        for &(x, y) in &[(-0.5, -0.5), (-1.1, 0.1), (0.0, -1.0)] {
            assert_eq!(m.eval_wavenumber(x, y).unwrap(), 2.0);
        }
    }

    #[test]
    fn two_layers_piecewise() {
        let (i, o) = boxes();
        let layers = vec![
            Layer { y_lo: -1.0, y_hi: -0.5, velocity: 1.0 },
            Layer { y_lo: -0.5, y_hi: 0.0, velocity: 2.0 },
        ];
        let m = MediumModel::layered(2.0, layers, i, o).unwrap();
        assert_eq!(m.eval_wavenumber(-0.5, -0.75).unwrap(), 2.0);
        assert_eq!(m.eval_wavenumber(-0.5, -0.25).unwrap(), 1.0);
        // interface belongs to the deeper layer
        assert_eq!(m.eval_wavenumber(-0.5, -0.5).unwrap(), 2.0);
        // constant continuation into the PML strips
        assert_eq!(m.eval_wavenumber(-0.5, -1.15).unwrap(), 2.0);
        assert_eq!(m.eval_wavenumber(-0.5, 0.15).unwrap(), 1.0);
    }

    #[test]
    fn default_layers_top_down() {
        let (i, o) = boxes();
        let m = MediumModel::equal_layers(1.0, &DEFAULT_LAYER_VELOCITIES, i, o).unwrap();
        assert_eq!(m.velocity(-0.5, -0.05).unwrap(), 1.0);
        assert_eq!(m.velocity(-0.5, -0.95).unwrap(), 2.5);
        assert_eq!(m.k_min(), 1.0 / 2.5);
        assert_eq!(m.k_max(), 1.0);
    }

    #[test]
    fn outside_pml_box_is_domain_error() {
        let (i, o) = boxes();
        let m = MediumModel::constant(1.0, 1.0, i, o).unwrap();
        assert!(matches!(m.eval_wavenumber(0.5, 0.0), Err(HelmError::Domain(_))));
    }

    #[test]
    fn invalid_media_rejected() {
        let (i, o) = boxes();
        assert!(MediumModel::constant(1.0, 0.0, i, o).is_err());
        let gap = vec![
            Layer { y_lo: -1.0, y_hi: -0.6, velocity: 1.0 },
            Layer { y_lo: -0.5, y_hi: 0.0, velocity: 2.0 },
        ];
        assert!(MediumModel::layered(1.0, gap, i, o).is_err());
    }

    #[test]
    fn point_delta_single_node() {
        let lat = Lattice::new(0.0, 0.0, 0.01);
        let w = Window::from_bounds(0, 20, 0, 20);
        let f = SourceSpec::point(0.05, 0.07).sample(w, lat, 1.0);
        let nonzero: Vec<_> = f.values.iter().filter(|v| v.norm() > 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        assert!((nonzero[0].re - 1e4).abs() < 1e-9);
        assert_eq!(f.at(5, 7).re, 1.0 / (0.01 * 0.01));
        let mass: f64 = f.values.iter().map(|v| v.re).sum::<f64>() * 0.01 * 0.01;
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_peak_and_decay() {
        let k = 2.0 * PI * 25.0;
        let lat = Lattice::new(0.0, 0.0, 0.01);
        let w = Window::from_bounds(-10, 10, -10, 10);
        let f = SourceSpec::gaussian(0.0, 0.0).sample(w, lat, k);
        let peak = 16.0 * k * k / PI.powi(3);
        assert!((f.at(0, 0).re - peak).abs() <= 1e-12 * peak);
        let r = PI / k;
        let s = SourceSpec::gaussian(0.0, 0.0);
        assert!(s.density(k, r, 0.0) <= (-16.0f64).exp() * peak * (1.0 + 1e-12));
        assert!(s.density(k, 0.0, 1.5 * r) < (-16.0f64).exp() * peak);
    }

    #[test]
    fn gaussian_off_centre_value() {
        // (16 k^2/pi^3) exp(-(4k/pi)^2 * 0.0025) with k = 50 pi, evaluated in
        // 50-digit arithmetic: 40000/pi * exp(-100).
        let expected = 4.736_547_842_088_985e-40;
        let k = 2.0 * PI * 25.0;
        let lat = Lattice::new(0.0, 0.0, 0.01);
        let f = SourceSpec::gaussian(0.0, 0.0).sample(Window::from_bounds(0, 6, 0, 0), lat, k);
        assert!((f.at(5, 0).re - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn source_must_be_strictly_inside() {
        let (i, _) = boxes();
        assert!(SourceSpec::point(-0.5, -0.5).validate(&i).is_ok());
        assert!(SourceSpec::point(0.0, -0.5).validate(&i).is_err());
    }
}
