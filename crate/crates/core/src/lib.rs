//! Directional statistics on the unit hypersphere built on optimal transport.
//!
//! The empirical directional distribution function couples a sample with a
//! grid of points on `S^(d-1)` by solving an exact linear assignment problem
//! under the squared geodesic cost. A structured grid of parallels and
//! meridians around an estimated pole turns that coupling into integer ranks
//! and unit signs, from which the crate derives
//!
//! * empirical quantile contours, regions and meridians ([`transport`]),
//! * a Cramér–von Mises test of uniformity calibrated by Monte Carlo ([`gof`]),
//! * distribution-free rank-score MANOVA tests ([`manova`]),
//!
//! together with the samplers and latitude distribution functions needed to
//! simulate from the von Mises–Fisher family and its skewed relatives
//! ([`models`]).

pub mod assignment;
pub mod error;
pub mod geometry;
pub mod gof;
pub mod grids;
pub mod io;
pub mod manova;
pub mod models;
pub mod quadrature;
pub mod replicate;
pub mod rng;
pub mod special;
pub mod transport;

pub use error::{Error, Result};
pub use geometry::UnitVector;
pub use grids::GridShape;
