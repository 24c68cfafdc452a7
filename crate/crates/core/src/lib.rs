//! Distribution-free tests of spherical symmetry.
//!
//! Each observation `X_i` is paired with a spherically symmetric variant
//! `X_i' = ||X_i|| U_i`. A short path that visits exactly one member of each
//! pair is built on the `2n` augmented points; under spherical symmetry the
//! choice of member ("string sign") is a fair coin, independently across
//! observations, whatever the dimension. Sign, runs and linear rank
//! statistics of these signs therefore have exact, dimension-free nulls.
//!
//! ```
//! use sphtest::{generators, harness, RngStream, TestConfig};
//!
//! let data = generators::gen_spherical_normal(50, 10, &mut RngStream::new(1).rng()).unwrap();
//! let report = harness::run_test(&data, &TestConfig::default().with_seed(7)).unwrap();
//! assert_eq!(report.statistics.len(), 2);
//! ```

pub mod augment;
pub mod calibrate;
pub mod cost;
pub mod error;
pub mod generators;
pub mod harness;
pub mod model;
pub mod path;
pub mod stats;

pub use augment::RngStream;
pub use error::{Error, Result};
pub use model::*;
