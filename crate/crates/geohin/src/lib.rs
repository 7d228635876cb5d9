//! File formats, threaded pipeline stages and synthetic fixtures built on
//! [`geohin_core`].

pub mod formats;
pub mod geojson;
pub mod parallel;
pub mod pipeline;
pub mod synth;

pub use pipeline::{run_pipeline, Error, Model, Params, PipelineConfig};
