//! Binary field dumps (`HDMF`, version 1, little-endian).

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use helmddm::{FieldGrid, HelmError, Lattice, Result, Window, C64};

pub const MAGIC: &[u8; 4] = b"HDMF";
pub const VERSION: u32 = 1;
const HEADER: usize = 4 + 3 * 4 + 3 * 8;

pub fn encode(field: &FieldGrid) -> Vec<u8> {
    let w = field.window;
    let (x0, y0) = field.origin();
    let mut out = Vec::with_capacity(HEADER + 16 * w.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(w.nx as u32).to_le_bytes());
    out.extend_from_slice(&(w.ny as u32).to_le_bytes());
    for v in [x0, y0, field.lattice.h] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in &field.values {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

fn invalid(msg: &str) -> HelmError {
    HelmError::Io(io::Error::new(io::ErrorKind::InvalidData, msg.to_string()))
}

/// Decode a dump. The field is placed on a lattice anchored at its first
/// node, so `window` starts at `(0, 0)`.
pub fn decode(bytes: &[u8]) -> Result<FieldGrid> {
    if bytes.len() < HEADER || &bytes[..4] != MAGIC {
        return Err(invalid("not an HDMF dump"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    if u32_at(4) != VERSION {
        return Err(invalid("unsupported HDMF version"));
    }
    let (nx, ny) = (u32_at(8) as usize, u32_at(12) as usize);
    let (x0, y0, h) = (f64_at(16), f64_at(24), f64_at(32));
    if bytes.len() != HEADER + 16 * nx * ny {
        return Err(invalid("HDMF length does not match its dimensions"));
    }
    if nx == 0 || ny == 0 || !(h > 0.0) {
        return Err(invalid("HDMF header has empty grid or bad spacing"));
    }
    let values = bytes[HEADER..]
        .chunks_exact(16)
        .map(|c| C64::new(f64::from_le_bytes(c[..8].try_into().unwrap()), f64::from_le_bytes(c[8..].try_into().unwrap())))
        .collect();
    FieldGrid::from_values(Window::new(0, 0, nx, ny), Lattice::new(x0, y0, h), values)
}

pub fn write_dump(path: &Path, field: &FieldGrid) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode(field))?;
    Ok(())
}

pub fn read_dump(path: &Path) -> Result<FieldGrid> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_length() {
        let f = FieldGrid::from_fn(Window::new(3, -2, 4, 2), Lattice::new(0.5, -1.0, 0.25), |p, q| C64::new(p as f64, q as f64));
        let b = encode(&f);
        assert_eq!(b.len(), 4 + 12 + 24 + 16 * 8);
        assert_eq!(&b[..4], b"HDMF");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(f64::from_le_bytes(b[16..24].try_into().unwrap()), 0.5 + 3.0 * 0.25);
        // x-fastest: second value is node (4, -2)
        assert_eq!(f64::from_le_bytes(b[56..64].try_into().unwrap()), 4.0);
        let g = decode(&b).unwrap();
        assert_eq!(g.origin(), f.origin());
        assert_eq!(g.values, f.values);
    }

    #[test]
    fn rejects_corrupt_input() {
        let f = FieldGrid::zeros(Window::new(0, 0, 2, 2), Lattice::new(0.0, 0.0, 1.0));
        let mut b = encode(&f);
        assert!(matches!(decode(&b[..b.len() - 1]), Err(HelmError::Io(_))));
        b[0] = b'X';
        assert!(matches!(decode(&b), Err(HelmError::Io(_))));
        let mut v = encode(&f);
        v[4] = 2;
        assert!(matches!(decode(&v), Err(HelmError::Io(_))));
    }
}
