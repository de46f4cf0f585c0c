//! 3-torsion in ray class groups of quadratic fields and the cubic fields
//! that account for it.

pub mod abgroup;
pub mod arith;
pub mod correspondence;
pub mod cubicenum;
pub mod densities;
pub mod error;
pub mod quadfield;
pub mod rayclass;
pub mod real;

pub use error::{Error, Result};
