//! Safe mini-batch stochastic dual coordinate ascent (mSDCA) for
//! regularized empirical loss minimization.
//!
//! The crate is organised bottom-up:
//!
//! - [`data`]: sparse dataset, LIBSVM ingestion, row/column statistics
//! - [`loss`]: loss families, conjugates and the per-coordinate dual update
//! - [`sampling`]: serial, b-nice and (C,b)-distributed coordinate samplings
//! - [`eso`]: data-dependent step weights `v` and their verification
//! - [`synthetic`]: seeded planted-hyperplane test data
//! - [`solver`]: the mini-batch loop, duality-gap tracking, CoCoA+ mode
//! - [`theory`]: iteration bounds and complexity estimates
//! - [`cli`]: the `dualbatch` command-line front end

pub mod cli;
pub mod data;
pub mod error;
pub mod eso;
pub mod loss;
pub mod sampling;
pub mod solver;
pub mod synthetic;
pub mod theory;

pub use data::Dataset;
pub use error::{Error, Result};
pub use eso::{EsoMode, EsoWeights, SigmaSource};
pub use loss::{LossKind, LossModel};
pub use sampling::SamplingScheme;
