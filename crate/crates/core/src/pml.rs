//! PML medium profile and uniaxial complex stretching coefficients.

use crate::field::{Rect, C64};

/// Quadratic-ramp absorbing profile, optionally shifted outward by an
/// overlap width that is kept free of absorption.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PmlProfile {
    pub sigma0: f64,
    pub ramp_width: f64,
    pub overlap_shift: f64,
}

/// Default profile strength: `k_min * sigma0 * d / 3 = C_SIGMA`.
pub const DEFAULT_C_SIGMA: f64 = 25.0;

impl PmlProfile {
    pub fn new(sigma0: f64, ramp_width: f64, overlap_shift: f64) -> Self {
        assert!(sigma0 >= 0.0 && ramp_width > 0.0 && overlap_shift >= 0.0);
        PmlProfile { sigma0, ramp_width, overlap_shift }
    }

    /// Profile whose integrated damping over the ramp, seen by the slowest
    /// wave, equals `c_sigma`.
    pub fn from_c_sigma(c_sigma: f64, k_min: f64, ramp_width: f64, overlap_shift: f64) -> Self {
        Self::new(3.0 * c_sigma / (k_min * ramp_width), ramp_width, overlap_shift)
    }

    pub fn unshifted(&self) -> Self {
        PmlProfile { overlap_shift: 0.0, ..*self }
    }

    /// Damping at signed distance `t` outside the stretching box.
    pub fn shifted_sigma(&self, t: f64) -> f64 {
        let s = t - self.overlap_shift;
        if s <= 0.0 {
            0.0
        } else if s >= self.ramp_width {
            self.sigma0
        } else {
            let r = s / self.ramp_width;
            self.sigma0 * r * r
        }
    }

    /// Stretch factor `alpha = 1 + i sigma` at distance `t` outside the box.
    #[inline]
    pub fn alpha(&self, t: f64) -> C64 {
        C64::new(1.0, self.shifted_sigma(t))
    }
}

/// Coefficients of `J^{-1} div(A grad u)` at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StretchCoeffs {
    pub alpha1: C64,
    pub alpha2: C64,
    pub a11: C64,
    pub a22: C64,
    pub jac: C64,
}

impl StretchCoeffs {
    pub fn from_alphas(alpha1: C64, alpha2: C64) -> Self {
        StretchCoeffs {
            alpha1,
            alpha2,
            a11: alpha2 / alpha1,
            a22: alpha1 / alpha2,
            jac: alpha1 * alpha2,
        }
    }
}

/// Distance from `x` to the interval `[a, b]` (zero inside).
#[inline]
pub fn interval_distance(x: f64, a: f64, b: f64) -> f64 {
    if x < a {
        a - x
    } else if x > b {
        x - b
    } else {
        0.0
    }
}

pub fn stretch_coeffs(profile: &PmlProfile, bx: &Rect, x: f64, y: f64) -> StretchCoeffs {
    let a1 = profile.alpha(interval_distance(x, bx.x0, bx.x1));
    let a2 = profile.alpha(interval_distance(y, bx.y0, bx.y1));
    StretchCoeffs::from_alphas(a1, a2)
}
