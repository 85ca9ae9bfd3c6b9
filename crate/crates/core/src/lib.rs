//! Evidential occupancy grids for collaborative LiDAR perception.
//!
//! The crate builds a sequence-wide background map from many agents'
//! observations, fuses it with each time step to label dynamic objects,
//! extracts objects by clustering, and scores them against reference tracks.
//! A deterministic ray-casting simulator produces datasets with exact ground
//! truth.
//!
//! Module overview:
//!
//! - [`evidential`]: mass functions over the frame `{F, I, S, D}`.
//! - [`grid`]: geo-referenced grids of mass functions and poses.
//! - [`observation`]: ground segmentation and per-frame observation grids.
//! - [`background`]: run-length classification of cell histories.
//! - [`fusion`]: per-time-step fusion of the map with observations.
//! - [`objects`]: DBSCAN clustering of static and dynamic cells.
//! - [`evaluation`]: assignment-based precision, recall and F1.
//! - [`simulator`]: scenario description and LiDAR ray casting.
//! - [`pipeline`]: dataset ingestion and the three-pass pipeline.
//! - [`io`], [`config`], [`render`]: file formats, configuration, images.

pub mod background;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod evidential;
pub mod fusion;
pub mod grid;
pub mod io;
pub mod objects;
pub mod observation;
pub mod pipeline;
pub mod render;
pub mod simulator;

pub use error::{Error, Result};
pub use evidential::{Decision, Hypothesis, MassFunction};
pub use grid::{EvidentialGrid, GridGeometry, Pose};
