//! Core algorithms for characterizing web-application request workloads and
//! turning the discovered patterns back into synthetic load.
//!
//! The crate is `no_std` (it needs `alloc`) and performs no IO. File formats,
//! network access and the command line live in the `webload` crate.
//!
//! Pipeline, in order:
//!
//! 1. [`trace`]: parse access-log lines and pageview-count lines.
//! 2. [`timeseries`]: bin records hourly/daily and reshape them into daily
//!    (24-wide) and weekly (7-wide) matrices.
//! 3. [`stats`]: coefficient of variation and burstiness on raw rows.
//! 4. [`preprocess`]: z-score, then exponential moving average.
//! 5. [`distance`] and [`clustering`]: K-Means with silhouette-based k selection.
//! 6. [`polyfit`] and [`patterns`]: Levenberg–Marquardt polynomial fits of
//!    centroids, the built-in pattern library, association and time-dependence
//!    tables.
//! 7. [`synth`]: rate schedules, Poisson event emission and burst injection.
#![no_std]
#![forbid(unsafe_code)]
#![warn(missing_debug_implementations, rust_2018_idioms)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod calendar;
pub mod clustering;
pub mod distance;
mod error;
pub(crate) mod moments;
pub mod patterns;
pub mod polyfit;
pub mod preprocess;
pub mod stats;
pub mod synth;
pub mod timeseries;
pub mod trace;

pub use error::{Error, Result};
