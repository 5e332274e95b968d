//! Frequency-function laboratory for harmonic functions vanishing on
//! Lipschitz graphs.

pub mod cascade;
pub mod cauchy;
pub mod error;
pub mod fields;
pub mod frequency;
pub mod geometry;
pub mod point;
pub mod quad;
pub mod report;
pub mod whitney;

pub use error::{Error, Result};
pub use point::Point;
