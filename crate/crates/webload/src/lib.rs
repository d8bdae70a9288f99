//! Std side of the workload toolkit: reading traces from disk or HTTP,
//! fetching Wikimedia pageview dumps, file formats, SVG charts, open-loop
//! replay and the end-to-end characterization pipeline.

pub mod error;
pub mod fetch;
pub mod formats;
pub mod pipeline;
pub mod replay;
pub mod report;
pub mod source;
pub mod svg;

pub use error::{Error, Result};
pub use webload_core as core;
