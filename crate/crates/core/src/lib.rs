//! Runtime that answers Earth-observation questions by generating,
//! validating and executing programs in a small tool-script dialect.
//!
//! The pieces, bottom up: [`raster`] data model and file format,
//! [`indices`] spectral indices, [`geo`] projection and tiling operators,
//! [`registry`] of tools, [`script`] parser, validator and interpreter,
//! [`controller`] for the language-model loop, and [`eval`] metrics.

pub mod controller;
pub mod eval;
pub mod geo;
pub mod indices;
pub mod raster;
pub mod registry;
pub mod script;
pub mod value;

pub use value::Value;
