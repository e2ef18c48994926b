//! Weight density estimation, null/alternative decomposition and the
//! mFDR-controlling threshold.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::weights::WeightMap;

pub const DEFAULT_GRID_SIZE: usize = 512;
pub const DEFAULT_VALLEY_MARGIN: f64 = 0.1;
pub const MIN_BANDWIDTH: f64 = 0.01;
const TINY: f64 = 1e-12;

/// Density of the signal weights on an evenly spaced grid over `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityModel {
    pub grid: Vec<f64>,
    pub f: Vec<f64>,
    /// Estimated null density, present once [`null_interpolate`] has run.
    pub f_h0: Option<Vec<f64>>,
    pub valley: Option<f64>,
    pub bandwidth: f64,
}

impl DensityModel {
    /// Alternative density `f - f_h0`.
    pub fn f_h1(&self) -> Option<Vec<f64>> {
        self.f_h0
            .as_ref()
            .map(|h0| self.f.iter().zip(h0).map(|(f, h)| f - h).collect())
    }

    /// Linear interpolation of `f` at `x`.
    pub fn f_at(&self, x: f64) -> f64 {
        interpolate(&self.grid, &self.f, x)
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.grid.len() - 1) as f64
    }
}

fn interpolate(grid: &[f64], values: &[f64], x: f64) -> f64 {
    let last = grid.len() - 1;
    if x <= grid[0] {
        return values[0];
    }
    if x >= grid[last] {
        return values[last];
    }
    let pos = x * last as f64;
    let i = (pos.floor() as usize).min(last - 1);
    let frac = (x - grid[i]) / (grid[i + 1] - grid[i]);
    if frac == 0.0 {
        values[i]
    } else {
        values[i] + frac * (values[i + 1] - values[i])
    }
}

pub fn unit_grid(size: usize) -> Vec<f64> {
    let last = (size - 1) as f64;
    (0..size).map(|i| i as f64 / last).collect()
}

/// Trapezoid rule over a grid.
pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule of thumb, floored at [`MIN_BANDWIDTH`].
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::DegenerateSample(format!("{n} sample(s)")));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if sd == 0.0 {
        return Err(Error::DegenerateSample("all weights are identical".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok((0.9 * spread * (n as f64).powf(-0.2)).max(MIN_BANDWIDTH))
}

/// Reflection-corrected Gaussian KDE of samples in `[0, 1]`.
///
/// Each sample is mirrored about 0 and about 1; the estimate is restricted to
/// the unit interval and renormalized so its trapezoid integral is 1.
pub fn estimate_density_from_samples(
    samples: &[f64],
    grid_size: usize,
    bandwidth: Option<f64>,
) -> Result<DensityModel> {
    if samples.is_empty() {
        return Err(invalid("no samples"));
    }
    if grid_size < 3 {
        return Err(invalid(format!("grid size {grid_size} must be at least 3")));
    }
    if let Some(x) = samples.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(invalid(format!("sample {x} outside [0, 1]")));
    }
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => {
            if samples.iter().all(|&x| x == samples[0]) {
                return Err(Error::DegenerateSample("all weights are identical".into()));
            }
            h
        }
        Some(h) => return Err(invalid(format!("bandwidth {h} must be positive"))),
        None => silverman_bandwidth(samples)?,
    };

    // Weights are quantized, so collapsing duplicates makes this cheap.
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    for x in sorted {
        match atoms.last_mut() {
            Some((v, c)) if *v == x => *c += 1.0,
            _ => atoms.push((x, 1.0)),
        }
    }

    let grid = unit_grid(grid_size);
    let inv_h = 1.0 / h;
    let kernel = |u: f64| (-0.5 * u * u).exp();
    let mut f: Vec<f64> = grid
        .iter()
        .map(|&x| {
            atoms
                .iter()
                .map(|&(v, c)| {
                    c * (kernel((x - v) * inv_h)
                        + kernel((x + v) * inv_h)
                        + kernel((x - 2.0 + v) * inv_h))
                })
                .sum()
        })
        .collect();
    let mass = trapezoid(&grid, &f);
    if mass.is_nan() || mass <= 0.0 {
        return Err(Error::DegenerateSample(
            "density has no mass on [0, 1]".into(),
        ));
    }
    f.iter_mut().for_each(|v| *v /= mass);
    Ok(DensityModel {
        grid,
        f,
        f_h0: None,
        valley: None,
        bandwidth: h,
    })
}

/// Density of a weight map; see [`estimate_density_from_samples`].
pub fn estimate_density(
    weights: &WeightMap,
    grid_size: usize,
    bandwidth: Option<f64>,
) -> Result<DensityModel> {
    estimate_density_from_samples(&weights.weights, grid_size, bandwidth)
}

/// Grid index of the valley between a low-weight and a high-weight peak.
///
/// The candidate is the minimum of `f` over `[margin, 1 - margin]`. It is
/// accepted only if `f` rises above it on both sides, i.e. there is a peak
/// to its left and to its right.
pub fn find_valley_index(model: &DensityModel, margin: f64) -> Option<usize> {
    let f = &model.f;
    let inside: Vec<usize> = (0..f.len())
        .filter(|&i| model.grid[i] >= margin && model.grid[i] <= 1.0 - margin)
        .collect();
    let &first = inside.first()?;
    let valley = inside
        .iter()
        .copied()
        .fold(first, |best, i| if f[i] < f[best] { i } else { best });
    if valley == 0 || valley + 1 >= f.len() {
        return None;
    }
    let left_peak = f[..valley]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let right_peak = f[valley + 1..]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    (left_peak > f[valley] && right_peak > f[valley]).then_some(valley)
}

pub fn find_valley(model: &DensityModel, margin: f64) -> Option<f64> {
    find_valley_index(model, margin).map(|i| model.grid[i])
}

/// Attach the null density: `f` up to `t_star`, then a straight line from
/// `(t_star, f(t_star))` down to `(1, 0)`.
pub fn null_interpolate(model: &DensityModel, t_star: f64) -> Result<DensityModel> {
    if !(t_star > 0.0 && t_star < 1.0) {
        return Err(invalid(format!("valley {t_star} must lie in (0, 1)")));
    }
    let at_valley = model.f_at(t_star);
    let f_h0 = model
        .grid
        .iter()
        .zip(&model.f)
        .map(|(&x, &f)| {
            if x <= t_star {
                f
            } else {
                at_valley * (1.0 - (x - t_star) / (1.0 - t_star))
            }
        })
        .collect();
    Ok(DensityModel {
        f_h0: Some(f_h0),
        valley: Some(t_star),
        ..model.clone()
    })
}

/// How the null share of rejections is measured when choosing `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    /// Marginal FDR of the rejection region `{w > x}`:
    /// `int_x^1 f_h0 / int_x^1 f`.
    #[default]
    TailArea,
    /// Local ratio `f_h0(x) / f(x)`.
    Pointwise,
}

/// Threshold choice for a given level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdDecision {
    pub alpha: f64,
    pub rule: ThresholdRule,
    pub c: Option<f64>,
    /// Null share of rejections on the density grid, per `rule`.
    pub mfdr_curve: Vec<f64>,
}

fn null_ratio(f: f64, f_h0: f64) -> f64 {
    if f < TINY {
        if f_h0 < TINY {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        f_h0 / f
    }
}

/// `f_h0 / f` at every grid point.
pub fn pointwise_ratio(f: &[f64], f_h0: &[f64]) -> Vec<f64> {
    f.iter()
        .zip(f_h0)
        .map(|(&f, &h)| null_ratio(f, h))
        .collect()
}

/// `int_x^1 f_h0 / int_x^1 f` at every grid point (trapezoid rule). The last
/// point has an empty tail and takes the pointwise ratio instead.
pub fn tail_ratio(grid: &[f64], f: &[f64], f_h0: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let mut out = vec![0.0; n];
    out[n - 1] = null_ratio(f[n - 1], f_h0[n - 1]);
    let (mut null_mass, mut mass) = (0.0, 0.0);
    for i in (0..n - 1).rev() {
        let dx = grid[i + 1] - grid[i];
        null_mass += 0.5 * dx * (f_h0[i] + f_h0[i + 1]);
        mass += 0.5 * dx * (f[i] + f[i + 1]);
        out[i] = null_ratio(mass, null_mass);
    }
    out
}

/// [`pick_threshold_with`] using the default tail-area rule.
pub fn pick_threshold(model: &DensityModel, alpha: f64) -> Result<ThresholdDecision> {
    pick_threshold_with(model, alpha, ThresholdRule::default())
}

/// Smallest grid point beyond the valley from which the null share stays at
/// or below `alpha` all the way to 1.
///
/// Requiring the whole suffix (not just the first crossing) keeps the
/// guarantee when the ratio is not monotone.
pub fn pick_threshold_with(
    model: &DensityModel,
    alpha: f64,
    rule: ThresholdRule,
) -> Result<ThresholdDecision> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha {alpha} must lie in (0, 1)")));
    }
    let f_h0 = model
        .f_h0
        .as_ref()
        .ok_or_else(|| Error::State("null density not estimated".into()))?;
    let curve = match rule {
        ThresholdRule::TailArea => tail_ratio(&model.grid, &model.f, f_h0),
        ThresholdRule::Pointwise => pointwise_ratio(&model.f, f_h0),
    };
    let floor = model.valley.unwrap_or(f64::NEG_INFINITY);
    let mut c = None;
    for i in (0..curve.len()).rev() {
        if curve[i] > alpha || model.grid[i] <= floor {
            break;
        }
        c = Some(model.grid[i]);
    }
    Ok(ThresholdDecision {
        alpha,
        rule,
        c,
        mfdr_curve: curve,
    })
}
