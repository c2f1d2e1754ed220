//! Additive overlapping domain decomposition for 2D Helmholtz problems
//! truncated by perfectly matched layers, with diagonal and corner source
//! transfer between subdomains.

pub mod ddm;
pub mod discretize;
pub mod error;
pub mod field;
pub mod krylov;
pub mod medium;
pub mod oracle;
pub mod partition;
pub mod pml;
pub mod sparse;
pub mod transfer;

pub use error::{HelmError, Result};
pub use field::{FieldGrid, Lattice, Rect, Window, C64};
