//! A symmetric-matrix representation of 3-D rotations.
//!
//! A 4×4 symmetric matrix `A` with a simple minimum eigenvalue maps to the
//! rotation given by its minimum eigenvector (a unit quaternion up to sign).
//! The crate provides the map and its analytic derivative, the Bingham-belief
//! reading of `A` with dispersion thresholding for out-of-distribution
//! rejection, a closed-form Wahba solver, rotation averaging, and a small
//! fully-connected regressor for comparing rotation representations.

pub mod bingham;
pub mod error;
pub mod nn;
pub mod rng;
pub mod rot_avg;
pub mod so3;
pub mod sym_rep;
pub mod wahba;

pub use error::{Error, Result};
