pub mod bloch;
pub mod dynamics;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod resolvent;
pub mod verify;

pub use error::{Error, Result};
pub use lattice::{Geometry, HoppingTable, LatticeSpec, Vertex};
pub use linalg::C64;
