//! Comparison detectors working on per-pixel one-sided p-values.

use serde::{Deserialize, Serialize};

use crate::detect::{DetectionResult, Diagnostics, EmptyReason};
use crate::error::{invalid, Result};
use crate::field::SpatialField;
use crate::mask::BinaryMask;

pub const BH_FDR: &str = "bh_fdr";
pub const FDR_L: &str = "fdr_l";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueField {
    pub rows: usize,
    pub cols: usize,
    pub pvalues: Vec<f64>,
}

impl PValueField {
    pub fn new(rows: usize, cols: usize, pvalues: Vec<f64>) -> Result<Self> {
        if pvalues.len() != rows * cols {
            return Err(invalid(format!(
                "p-value field {rows}x{cols} needs {} values, got {}",
                rows * cols,
                pvalues.len()
            )));
        }
        if let Some(p) = pvalues.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(invalid(format!("p-value {p} outside [0, 1]")));
        }
        Ok(Self {
            rows,
            cols,
            pvalues,
        })
    }
}

/// Standard normal upper tail `1 - Phi(x)`.
///
/// Abramowitz & Stegun 26.2.17, absolute error below 7.5e-8. The polynomial
/// multiplies the normal density, so the far tail keeps relative accuracy.
pub fn normal_sf(x: f64) -> f64 {
    const P: f64 = 0.231_641_9;
    const B: [f64; 5] = [
        0.319_381_530,
        -0.356_563_782,
        1.781_477_937,
        -1.821_255_978,
        1.330_274_429,
    ];
    let z = x.abs();
    let t = 1.0 / (1.0 + P * z);
    let poly = t * (B[0] + t * (B[1] + t * (B[2] + t * (B[3] + t * B[4]))));
    let density = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let upper = (density * poly).clamp(0.0, 1.0);
    if x >= 0.0 {
        upper
    } else {
        1.0 - upper
    }
}

/// One-sided p-values `1 - Phi(x)`; the field is taken to hold z-scores.
pub fn to_pvalues(field: &SpatialField) -> PValueField {
    PValueField {
        rows: field.rows(),
        cols: field.cols(),
        pvalues: field.values().iter().map(|&x| normal_sf(x)).collect(),
    }
}

/// Benjamini-Hochberg step-up over a flat list of p-values.
///
/// Returns the rejection flags and the largest rejected p-value.
pub fn bh_step_up(pvalues: &[f64], alpha: f64) -> (Vec<bool>, Option<f64>) {
    let n = pvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]));
    let cutoff = order
        .iter()
        .enumerate()
        .rev()
        .find(|&(j, &i)| pvalues[i] <= alpha * (j + 1) as f64 / n as f64)
        .map(|(_, &i)| pvalues[i]);
    let rejected = match cutoff {
        Some(c) => pvalues.iter().map(|&p| p <= c).collect(),
        None => vec![false; n],
    };
    (rejected, cutoff)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("alpha {alpha} must lie in (0, 1)")))
    }
}

fn rejection_result(
    rows: usize,
    cols: usize,
    rejected: Vec<bool>,
    cutoff: Option<f64>,
    alpha: f64,
    method: &str,
) -> Result<DetectionResult> {
    let mask = BinaryMask::new(rows, cols, rejected)?;
    let reason = (mask.count() == 0).then_some(EmptyReason::NoRejections);
    Ok(DetectionResult {
        mask,
        threshold: cutoff,
        alpha,
        weights: None,
        density: None,
        decision: None,
        diagnostics: Diagnostics {
            method: method.into(),
            valley: None,
            bandwidth: None,
            reason,
        },
    })
}

/// Conventional per-pixel BH-FDR.
pub fn bh_fdr(p: &PValueField, alpha: f64) -> Result<DetectionResult> {
    check_alpha(alpha)?;
    let (rejected, cutoff) = bh_step_up(&p.pvalues, alpha);
    rejection_result(p.rows, p.cols, rejected, cutoff, alpha, BH_FDR)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median of each `(2h+1) x (2h+1)` window, clipped at the grid boundary.
pub fn median_filter(p: &PValueField, half_width: usize) -> PValueField {
    if half_width == 0 {
        return p.clone();
    }
    let (rows, cols) = (p.rows, p.cols);
    let mut window = Vec::with_capacity((2 * half_width + 1).pow(2));
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let (r0, r1) = (r.saturating_sub(half_width), (r + half_width).min(rows - 1));
        for c in 0..cols {
            let (c0, c1) = (c.saturating_sub(half_width), (c + half_width).min(cols - 1));
            window.clear();
            for rr in r0..=r1 {
                window.extend_from_slice(&p.pvalues[rr * cols + c0..=rr * cols + c1]);
            }
            out.push(median(&mut window));
        }
    }
    PValueField {
        rows,
        cols,
        pvalues: out,
    }
}

/// FDR_L-style detector: window-median aggregation of p-values followed by
/// BH step-up on the aggregated values.
pub fn fdr_l(p: &PValueField, alpha: f64, half_width: usize) -> Result<DetectionResult> {
    check_alpha(alpha)?;
    let aggregated = median_filter(p, half_width);
    let (rejected, cutoff) = bh_step_up(&aggregated.pvalues, alpha);
    rejection_result(p.rows, p.cols, rejected, cutoff, alpha, FDR_L)
}
