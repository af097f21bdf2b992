//! Driver for morlie-core: file formats, run configuration, the staged
//! pipeline and its report.

pub mod config;
pub mod io;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod summary;

pub use config::RunConfig;
pub use pipeline::{run_pipeline, Outcome};
pub use summary::Summary;
