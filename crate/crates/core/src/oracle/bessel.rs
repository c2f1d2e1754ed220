//! Bessel functions of orders 0 and 1 for positive real arguments.
//!
//! Ascending series below `SPLIT`, Hankel asymptotic expansion above.

use std::f64::consts::{FRAC_PI_4, PI};

use crate::error::{HelmError, Result};
use crate::field::C64;

const SPLIT: f64 = 12.0;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `(J0, J1, Y0, Y1)` by the ascending series.
fn series(x: f64) -> (f64, f64, f64, f64) {
    let t = -0.25 * x * x;
    let mut term = 1.0; // t^k / (k!)^2
    let mut j0 = 0.0;
    let mut j1s = 0.0; // sum t^k / (k! (k+1)!)
    let mut y0s = 0.0; // sum -H_k t^k / (k!)^2
    let mut y1s = 0.0; // sum (psi(k+1) + psi(k+2)) t^k / (k! (k+1)!)
    let mut hk = 0.0;
    let mut k = 0usize;
    loop {
        let kf = k as f64;
        let t1 = term / (kf + 1.0);
        j0 += term;
        j1s += t1;
        y0s -= hk * term;
        y1s += (2.0 * hk + 1.0 / (kf + 1.0) - 2.0 * EULER_GAMMA) * t1;
        if term.abs() < 1e-20 || k == 200 {
            break;
        }
        k += 1;
        hk += 1.0 / k as f64;
        term *= t / (k as f64 * k as f64);
    }
    let j1 = 0.5 * x * j1s;
    let l = (0.5 * x).ln();
    let y0 = 2.0 / PI * ((l + EULER_GAMMA) * j0 + y0s);
    let y1 = -2.0 / (PI * x) + 2.0 / PI * l * j1 - 0.5 * x / PI * y1s;
    (j0, j1, y0, y1)
}

/// `(J_nu, Y_nu)` for `nu` in {0, 1} by the asymptotic expansion.
fn asymptotic(nu: u32, x: f64) -> (f64, f64) {
    let mu = 4.0 * (nu * nu) as f64;
    let (mut p, mut q) = (0.0, 0.0);
    let mut a: f64 = 1.0; // a_k(nu) / x^k
    let mut last = f64::INFINITY;
    for k in 0..60 {
        if a.abs() > last {
            break;
        }
        last = a.abs();
        match k % 4 {
            0 => p += a,
            1 => q += a,
            2 => p -= a,
            _ => q -= a,
        }
        if a.abs() < 1e-17 {
            break;
        }
        let o = (2 * k + 1) as f64;
        a *= (mu - o * o) / ((k + 1) as f64 * 8.0 * x);
    }
    let chi = x - FRAC_PI_4 - 0.5 * nu as f64 * PI;
    let s = (2.0 / (PI * x)).sqrt();
    let (sn, cs) = chi.sin_cos();
    (s * (p * cs - q * sn), s * (p * sn + q * cs))
}

fn check(x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(HelmError::Domain(format!("Bessel argument must be positive, got {x}")));
    }
    Ok(())
}

pub fn j0(x: f64) -> Result<f64> {
    check(x)?;
    Ok(if x < SPLIT { series(x).0 } else { asymptotic(0, x).0 })
}

pub fn y0(x: f64) -> Result<f64> {
    check(x)?;
    Ok(if x < SPLIT { series(x).2 } else { asymptotic(0, x).1 })
}

pub fn j1(x: f64) -> Result<f64> {
    check(x)?;
    Ok(if x < SPLIT { series(x).1 } else { asymptotic(1, x).0 })
}

pub fn y1(x: f64) -> Result<f64> {
    check(x)?;
    Ok(if x < SPLIT { series(x).3 } else { asymptotic(1, x).1 })
}

/// Hankel function of the first kind, order zero.
pub fn hankel_h0(x: f64) -> Result<C64> {
    check(x)?;
    let (j, y) = if x < SPLIT {
        let s = series(x);
        (s.0, s.2)
    } else {
        asymptotic(0, x)
    };
    Ok(C64::new(j, y))
}
