//! Road-class tile datasets built from OSM road vectors and satellite tiles.
//!
//! The crate covers the whole path from vectors to evaluated classifiers:
//! tile georeferencing ([`geo`]), road ingestion ([`osm`]), road-mask
//! rasterization ([`raster`]), pixel preprocessing and occlusion variants
//! ([`imageops`]), manifest tooling ([`dataset`]), evaluation metrics
//! ([`metrics`]), a small softmax baseline classifier ([`model`]), a
//! procedural tile generator ([`synth`]), and the experiment harnesses
//! ([`experiment`]) driven by the `roadtile` binary.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod geo;
pub mod imageops;
pub mod io;
pub mod keyed;
pub mod metrics;
pub mod model;
pub mod osm;
pub mod pipeline;
pub mod raster;
pub mod synth;

pub use error::{Error, Result};
