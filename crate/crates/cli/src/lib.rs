//! Configuration, dispatch and output writers behind the `isoconquer` binary.

pub mod config;
pub mod emit;
pub mod manifest;
pub mod pool;
pub mod report;
pub mod run;

pub use config::{canonical_text, ConfigFile};
pub use emit::{from_json, to_csv, to_json, to_svg, Format, RunOutput};
pub use manifest::RunManifest;
pub use report::Report;
