//! The full detection pipeline and the shared result type.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::SpatialField;
use crate::mask::BinaryMask;
use crate::threshold::{
    estimate_density, find_valley, null_interpolate, pick_threshold_with, DensityModel,
    ThresholdDecision, ThresholdRule, DEFAULT_GRID_SIZE, DEFAULT_VALLEY_MARGIN,
};
use crate::weights::{signal_weights, WeightMap, WeightParams};

/// Why a detector returned an empty mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptyReason {
    /// Weights carried no spread to estimate a density from.
    NoDensityStructure,
    /// The weight density had no flanked interior valley.
    NoValley,
    /// No threshold satisfied the level.
    NoThreshold,
    /// The threshold was found but no weight exceeded it.
    NothingAboveThreshold,
    /// Multiple-testing baseline rejected nothing.
    NoRejections,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub method: String,
    pub valley: Option<f64>,
    pub bandwidth: Option<f64>,
    pub reason: Option<EmptyReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub mask: BinaryMask,
    /// For SCUSUM a weight threshold (detect `w > c`); for the p-value
    /// baselines the largest rejected (aggregated) p-value.
    pub threshold: Option<f64>,
    pub alpha: f64,
    pub weights: Option<WeightMap>,
    pub density: Option<DensityModel>,
    pub decision: Option<ThresholdDecision>,
    pub diagnostics: Diagnostics,
}

impl DetectionResult {
    pub fn detected(&self) -> usize {
        self.mask.count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectParams {
    pub k: usize,
    pub repeats: usize,
    pub alpha: f64,
    pub seed: u64,
    pub grid_size: usize,
    pub bandwidth: Option<f64>,
    pub valley_margin: f64,
    pub rule: ThresholdRule,
    /// Detect low-mean regions by negating the input first.
    pub negate: bool,
}

impl DetectParams {
    pub fn new(k: usize, repeats: usize, alpha: f64, seed: u64) -> Self {
        Self {
            k,
            repeats,
            alpha,
            seed,
            grid_size: DEFAULT_GRID_SIZE,
            bandwidth: None,
            valley_margin: DEFAULT_VALLEY_MARGIN,
            rule: ThresholdRule::default(),
            negate: false,
        }
    }
}

pub const SCUSUM: &str = "scusum";

/// Signal weights, density, valley, null interpolation, threshold, mask.
///
/// A missing valley or threshold is not an error: the mask is empty and
/// `diagnostics.reason` says why.
pub fn detect(field: &SpatialField, params: &DetectParams) -> Result<DetectionResult> {
    if !(params.alpha > 0.0 && params.alpha < 1.0) {
        return Err(invalid(format!(
            "alpha {} must lie in (0, 1)",
            params.alpha
        )));
    }
    let negated;
    let input = if params.negate {
        negated = field.negated();
        &negated
    } else {
        field
    };
    let weights = signal_weights(
        input,
        WeightParams {
            k: params.k,
            repeats: params.repeats,
            seed: params.seed,
        },
    )?;

    let mut result = DetectionResult {
        mask: BinaryMask::empty(field.rows(), field.cols()),
        threshold: None,
        alpha: params.alpha,
        weights: None,
        density: None,
        decision: None,
        diagnostics: Diagnostics {
            method: SCUSUM.into(),
            valley: None,
            bandwidth: None,
            reason: None,
        },
    };

    let density = match estimate_density(&weights, params.grid_size, params.bandwidth) {
        Ok(d) => d,
        Err(Error::DegenerateSample(_)) => {
            result.diagnostics.reason = Some(EmptyReason::NoDensityStructure);
            result.weights = Some(weights);
            return Ok(result);
        }
        Err(e) => return Err(e),
    };
    result.diagnostics.bandwidth = Some(density.bandwidth);

    let Some(valley) = find_valley(&density, params.valley_margin) else {
        result.diagnostics.reason = Some(EmptyReason::NoValley);
        result.density = Some(density);
        result.weights = Some(weights);
        return Ok(result);
    };
    result.diagnostics.valley = Some(valley);
    let density = null_interpolate(&density, valley)?;
    let decision = pick_threshold_with(&density, params.alpha, params.rule)?;

    match decision.c {
        Some(c) => {
            let cells = weights.weights.iter().map(|&w| w > c).collect();
            result.mask = BinaryMask::new(field.rows(), field.cols(), cells)?;
            result.threshold = Some(c);
            if result.mask.count() == 0 {
                result.diagnostics.reason = Some(EmptyReason::NothingAboveThreshold);
            }
        }
        None => result.diagnostics.reason = Some(EmptyReason::NoThreshold),
    }
    result.density = Some(density);
    result.decision = Some(decision);
    result.weights = Some(weights);
    Ok(result)
}
