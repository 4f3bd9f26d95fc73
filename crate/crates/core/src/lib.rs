//! Kernel sums and Hecke operators for (PSL(2,Z), PGL(2,Z[1/p])) acting on
//! discrete-series representations.

pub mod arith_core;
pub mod cosets;
pub mod dseries_kernel;
pub mod error;
pub mod hecke_assembly;
pub mod par;
pub mod quad;

pub use error::{HeckeError, Result};
