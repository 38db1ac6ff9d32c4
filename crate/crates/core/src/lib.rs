//! Closed-form mean Euler characteristics and curvature densities of
//! excursion sets of stationary Gaussian random fields, together with the
//! pieces needed to check them numerically: flag sampling, zonotope faces and
//! cubical Euler characteristics of thresholded grids.
//!
//! The crate is `no_std` and only needs an allocator.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod densities;
pub mod error;
pub mod euler;
pub mod grassmann;
pub mod model;
pub mod quadrature;
mod simplex;
pub mod special;
pub mod zonotope;

pub use densities::ExcursionSpec;
pub use error::{Error, Result};
pub use euler::{euler_char, BinaryGrid};
pub use model::{CovarianceFamily, CovarianceModel};
pub use zonotope::{Zonotope, ZonotopeFace};
