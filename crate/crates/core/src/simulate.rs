//! Synthetic fields with a known signal region.
//!
//! The canonical ground truth is an "L" glyph next to an "H" glyph on a
//! 100x100 grid, 1290 signal pixels in total, with 10-pixel strokes. Other
//! grid sizes rescale the glyph rectangles. Noise is either i.i.d. N(0, 1) or
//! a zero-mean Gaussian random field with exponential covariance
//! `exp(-d / r)`, `d` the Euclidean distance in pixels.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::SpatialField;
use crate::mask::{BinaryMask, GroundTruthMask};
use crate::seed::substream;

/// Largest grid (in cells) the dense Cholesky path accepts. A 10^4-cell
/// field already needs an 800 MB covariance matrix.
pub const MAX_DENSE_CELLS: usize = 10_000;
pub const MIN_MASK_SIDE: usize = 20;
const CHOLESKY_JITTER: f64 = 1e-10;

/// Glyph rectangles on the 100x100 reference grid, `[r0, r1) x [c0, c1)`.
const LH_RECTS: [(usize, usize, usize, usize); 5] = [
    // L: stem and foot
    (34, 66, 14, 24),
    (56, 66, 24, 40),
    // H: left post, right post, crossbar
    (34, 66, 52, 62),
    (34, 66, 79, 89),
    (45, 55, 62, 79),
];

/// Deterministic L/H ground-truth mask.
pub fn lh_mask(rows: usize, cols: usize) -> Result<GroundTruthMask> {
    if rows < MIN_MASK_SIDE || cols < MIN_MASK_SIDE {
        return Err(invalid(format!(
            "L/H mask needs at least {MIN_MASK_SIDE}x{MIN_MASK_SIDE}, got {rows}x{cols}"
        )));
    }
    let scale = |v: usize, dim: usize| (v * dim + 50) / 100;
    let mut mask = BinaryMask::empty(rows, cols);
    for &(r0, r1, c0, c1) in &LH_RECTS {
        for r in scale(r0, rows)..scale(r1, rows) {
            for c in scale(c0, cols)..scale(c1, cols) {
                mask.set(r, c, true);
            }
        }
    }
    Ok(mask)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    Iid,
    ExpCov { scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub rows: usize,
    pub cols: usize,
    pub mu0: f64,
    pub mu1: f64,
    pub noise: NoiseModel,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            rows: 100,
            cols: 100,
            mu0: 0.0,
            mu1: 1.0,
            noise: NoiseModel::Iid,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu0.is_finite() && self.mu1.is_finite()) || self.mu1 < self.mu0 {
            return Err(invalid(format!(
                "signal mean {} must be finite and at least the background mean {}",
                self.mu1, self.mu0
            )));
        }
        if let NoiseModel::ExpCov { scale } = self.noise {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(invalid(format!(
                    "dependence scale {scale} must be positive"
                )));
            }
        }
        Ok(())
    }
}

/// Covariance of the exponential model at distance 1.
pub fn unit_distance_covariance(scale: f64) -> f64 {
    (-1.0 / scale).exp()
}

fn compose(config: &SimConfig, mask: &GroundTruthMask, noise: Vec<f64>) -> Result<SpatialField> {
    let shift = config.mu1 - config.mu0;
    let values = noise
        .into_iter()
        .zip(mask.cells())
        .map(|(e, &s)| config.mu0 + if s { shift } else { 0.0 } + e)
        .collect();
    SpatialField::new(config.rows, config.cols, values)
}

/// Mean structure from `mask` plus i.i.d. standard normal noise.
pub fn gen_iid_with_mask(config: &SimConfig, mask: &GroundTruthMask) -> Result<SpatialField> {
    config.validate()?;
    check_shape(config, mask)?;
    let mut rng = substream(config.seed, &[]);
    let noise = (0..config.rows * config.cols)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    compose(config, mask, noise)
}

pub fn gen_iid(config: &SimConfig) -> Result<(SpatialField, GroundTruthMask)> {
    if config.noise != NoiseModel::Iid {
        return Err(invalid("gen_iid requires i.i.d. noise"));
    }
    let mask = lh_mask(config.rows, config.cols)?;
    let field = gen_iid_with_mask(config, &mask)?;
    Ok((field, mask))
}

fn check_shape(config: &SimConfig, mask: &GroundTruthMask) -> Result<()> {
    if (mask.rows(), mask.cols()) != (config.rows, config.cols) {
        return Err(Error::ShapeMismatch {
            expected: (config.rows, config.cols),
            actual: (mask.rows(), mask.cols()),
        });
    }
    Ok(())
}

/// Sampler for the exponential-covariance Gaussian random field on a fixed
/// grid. Holds the Cholesky factor so repeated draws are cheap.
#[derive(Debug, Clone)]
pub struct ExpCovSampler {
    rows: usize,
    cols: usize,
    scale: f64,
    factor: DMatrix<f64>,
    jittered: bool,
}

impl ExpCovSampler {
    pub fn new(rows: usize, cols: usize, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid(format!(
                "dependence scale {scale} must be positive"
            )));
        }
        let n = rows * cols;
        if n == 0 {
            return Err(invalid("empty grid"));
        }
        if n > MAX_DENSE_CELLS {
            return Err(Error::UnsupportedSize {
                cells: n,
                limit: MAX_DENSE_CELLS,
            });
        }
        let cov = DMatrix::from_fn(n, n, |i, j| {
            let dr = (i / cols) as f64 - (j / cols) as f64;
            let dc = (i % cols) as f64 - (j % cols) as f64;
            (-(dr * dr + dc * dc).sqrt() / scale).exp()
        });
        let (factor, jittered) = match cov.clone().cholesky() {
            Some(ch) => (ch.unpack(), false),
            None => {
                let jittered = cov + DMatrix::identity(n, n) * CHOLESKY_JITTER;
                let ch = jittered.cholesky().ok_or_else(|| {
                    Error::Invariant("covariance not positive definite after jitter".into())
                })?;
                (ch.unpack(), true)
            }
        };
        Ok(Self {
            rows,
            cols,
            scale,
            factor,
            jittered,
        })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Whether diagonal jitter was needed for the factorization.
    pub fn jittered(&self) -> bool {
        self.jittered
    }

    /// One correlated noise realization, row-major.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.rows * self.cols;
        let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        (&self.factor * z).iter().copied().collect()
    }
}

/// Mean structure from `mask` plus exponential-covariance noise drawn with `sampler`.
pub fn gen_expcov_with(
    config: &SimConfig,
    mask: &GroundTruthMask,
    sampler: &ExpCovSampler,
) -> Result<SpatialField> {
    config.validate()?;
    check_shape(config, mask)?;
    if (sampler.rows, sampler.cols) != (config.rows, config.cols) {
        return Err(Error::ShapeMismatch {
            expected: (config.rows, config.cols),
            actual: (sampler.rows, sampler.cols),
        });
    }
    let mut rng = substream(config.seed, &[]);
    compose(config, mask, sampler.sample(&mut rng))
}

pub fn gen_expcov(config: &SimConfig) -> Result<(SpatialField, GroundTruthMask)> {
    let NoiseModel::ExpCov { scale } = config.noise else {
        return Err(invalid("gen_expcov requires exponential-covariance noise"));
    };
    config.validate()?;
    let sampler = ExpCovSampler::new(config.rows, config.cols, scale)?;
    let mask = lh_mask(config.rows, config.cols)?;
    let field = gen_expcov_with(config, &mask, &sampler)?;
    Ok((field, mask))
}

/// Generate according to `config.noise`.
pub fn simulate(config: &SimConfig) -> Result<(SpatialField, GroundTruthMask)> {
    match config.noise {
        NoiseModel::Iid => gen_iid(config),
        NoiseModel::ExpCov { .. } => gen_expcov(config),
    }
}
