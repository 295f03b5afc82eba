//! Multimode capacity of ensemble quantum memories.
//!
//! The capacity of a light-storage protocol is obtained by discretizing its
//! Green's-function kernel on quadrature grids, extracting the Schmidt
//! (singular value) spectrum, and counting the modes whose running average
//! memory efficiency stays above a threshold. This crate provides the kernel
//! constructors for the unbroadened, CRIB, broadened-Raman and atomic
//! frequency comb protocols, a Maxwell-Bloch solver for the longitudinal-CRIB
//! Green's function, and the sweep/fit/cache machinery used to reproduce the
//! capacity scaling laws.

pub mod bessel;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod protocol;
pub mod schmidt;
pub mod solver;
pub mod study;

pub use error::Error;
pub use grid::{gauss_legendre_grid, uniform_grid, Axis, Grid};
pub use kernel::{DiscretizedKernel, KernelKind};
pub use protocol::{ControlPulse, Protocol, ProtocolSpec};
pub use schmidt::{capacity, singular_spectrum, CapacityResult, SingularSpectrum};

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
