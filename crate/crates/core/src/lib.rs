//! Hybrid beamforming and SDMA scheduling for a single mmWave NR cell.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every algorithmic piece of
//! the simulator: uniform planar array responses and DFT codebooks, a clustered
//! Urban-Macro channel, codebook (CBF) and per-subband MMSE (SMBF) beamforming,
//! the per-subcarrier SINR and BLER link abstraction, the TMRS / PMRS schedulers,
//! and the subframe-stepped drop engine that binds them together.
//!
//! File formats, the command line and all other IO live in the `hbf-sim` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod array;
pub mod beamforming;
pub mod channel;
pub mod engine;
mod error;
pub mod linalg;
pub mod mac;
pub mod phy;
pub mod rng;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Complex scalar used throughout the crate.
pub type C64 = Complex64;
