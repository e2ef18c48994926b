//! Spatial CUSUM (SCUSUM) detection of signal regions in gridded data.
//!
//! The pipeline turns a [`SpatialField`] into per-location signal weights
//! ([`weights`]), estimates the density of those weights and picks an
//! mFDR-controlling threshold ([`threshold`]), and returns a
//! [`DetectionResult`]. [`baselines`] holds per-pixel BH-FDR and an
//! FDR_L-style comparison detector, [`simulate`] generates synthetic fields
//! with known ground truth, and [`benchmark`] scores detectors over Monte
//! Carlo replicates.

pub mod baselines;
pub mod benchmark;
pub mod detect;
pub mod error;
pub mod field;
pub mod mask;
pub mod seed;
pub mod simulate;
pub mod threshold;
pub mod weights;

pub use detect::{detect, DetectParams, DetectionResult, Diagnostics, EmptyReason};
pub use error::{Error, Result};
pub use field::{all_offsets, partition, Block, BlockPartition, Offset, SpatialField};
pub use mask::{BinaryMask, GroundTruthMask};
pub use threshold::{DensityModel, ThresholdDecision, ThresholdRule};
pub use weights::{
    cusum_transform, cutoff_index, neighbor_size, signal_weights, WeightMap, WeightParams,
};
