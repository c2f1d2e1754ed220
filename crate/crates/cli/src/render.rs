//! Binary PPM rendering of the real part of a field.

use std::fs;
use std::path::Path;

use helmddm::{FieldGrid, HelmError, Result};

/// Blue (-1), white (0), red (+1).
pub fn colour(v: f64) -> [u8; 3] {
    let v = v.clamp(-1.0, 1.0);
    let fade = |t: f64| (255.0 * (1.0 - t)).round() as u8;
    if v < 0.0 {
        [fade(-v), fade(-v), 255]
    } else {
        [255, fade(v), fade(v)]
    }
}

/// P6 image, one pixel per node, first row at the smallest `y`.
pub fn encode_ppm(field: &FieldGrid, vmax: Option<f64>) -> Result<Vec<u8>> {
    let w = field.window;
    if w.is_empty() {
        return Err(HelmError::Contract("cannot render an empty field".into()));
    }
    let vmax = vmax.unwrap_or_else(|| field.values.iter().map(|v| v.re.abs()).fold(0.0, f64::max));
    let mut out = format!("P6\n{} {}\n255\n", w.nx, w.ny).into_bytes();
    out.reserve(3 * w.len());
    for v in &field.values {
        let t = if vmax > 0.0 { v.re / vmax } else { 0.0 };
        out.extend_from_slice(&colour(t));
    }
    Ok(out)
}

pub fn render_ppm(field: &FieldGrid, path: &Path, vmax: Option<f64>) -> Result<()> {
    fs::write(path, encode_ppm(field, vmax)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use helmddm::{Lattice, Window, C64};

    fn pixels(b: &[u8]) -> &[u8] {
        let mut lines = 0;
        let mut i = 0;
        while lines < 3 {
            if b[i] == b'\n' {
                lines += 1;
            }
            i += 1;
        }
        &b[i..]
    }

    #[test]
    fn zero_field_is_white() {
        let f = FieldGrid::zeros(Window::new(0, 0, 3, 2), Lattice::new(0.0, 0.0, 1.0));
        let b = encode_ppm(&f, None).unwrap();
        assert!(b.starts_with(b"P6\n3 2\n255\n"));
        assert!(pixels(&b).iter().all(|&c| c == 255));
    }

    #[test]
    fn colour_map_endpoints() {
        let f = FieldGrid::from_values(
            Window::new(0, 0, 2, 1),
            Lattice::new(0.0, 0.0, 1.0),
            vec![C64::new(-2.0, 5.0), C64::new(2.0, 0.0)],
        )
        .unwrap();
        assert_eq!(pixels(&encode_ppm(&f, None).unwrap()), &[0, 0, 255, 255, 0, 0]);
        assert_eq!(pixels(&encode_ppm(&f, Some(4.0)).unwrap()), &[128, 128, 255, 255, 128, 128]);
        let single = FieldGrid::from_values(Window::new(0, 0, 1, 1), Lattice::new(0.0, 0.0, 1.0), vec![C64::new(0.7, 0.0)]).unwrap();
        assert_eq!(pixels(&encode_ppm(&single, Some(0.7)).unwrap()), &[255, 0, 0]);
    }
}
