//! Tree-tensor-network compilation of Gaussian state-preparation circuits.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line front end and batch drivers live in the companion `ttnprep` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod circuit;
pub mod error;
pub mod fourier;
pub mod gaussian;
pub mod linalg;
pub mod pipeline;
pub mod sim;
pub mod structopt;
pub mod tci;
pub mod tensor;
pub mod ttn;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
