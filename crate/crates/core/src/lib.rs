//! Knotted 2-spheres in four-space built from polynomial knot arcs: spinning,
//! twist-spinning, polynomial approximation, verification and export.

pub mod approx;
pub mod catalog;
pub mod config;
pub mod error;
pub mod export;
pub mod poly;
pub mod spin;
pub mod surface;
pub mod twist;
pub mod verify;

pub use error::{Error, Result};
pub use poly::{roots_in_interval, Interval, Poly1, Poly2, Root};
