pub mod cli;
pub mod dtn;
pub mod error;
pub mod extension;
pub mod hilbert;
pub mod linalg;
pub mod mesh;
pub mod monops;
pub mod semigroup;
pub mod verify;

pub use error::{Error, Result};
