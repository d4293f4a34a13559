//! End-to-end detection runs, synthetic skies and evaluation.

mod catalog;
mod config;
mod evaluate;
mod run;
mod synth;

pub use catalog::{Catalog, CatalogEntry, RunMetadata};
pub use config::{Method, OutputPaths, RunConfig};
pub use evaluate::{evaluate, EvaluationReport};
pub use run::{background_rate, detect_image, run_fcp_z, run_msfcp, statistic_stages, Detection, Detector};
pub use synth::{random_sources, source_field, synth_sky, Source, SyntheticSky};
