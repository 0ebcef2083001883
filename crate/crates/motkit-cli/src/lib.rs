//! Library side of the command-line tool: marginal specifications, run
//! manifests, file formats, and the command implementations.

pub mod commands;
pub mod io;
pub mod manifest;
pub mod spec;

pub use commands::SimFlags;
pub use manifest::RunManifest;
pub use spec::{MarginalSpec, ParametricSpec};
