//! Monte Carlo accuracy benchmarks: simulate, detect, score, aggregate.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{bh_fdr, fdr_l, to_pvalues};
use crate::detect::{detect, DetectParams};
use crate::error::{Error, Result};
use crate::mask::{BinaryMask, GroundTruthMask};
use crate::seed::derive_seed;
use crate::simulate::{
    gen_expcov_with, gen_iid_with_mask, lh_mask, ExpCovSampler, NoiseModel, SimConfig,
};

/// Classification accuracy of one detection against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    /// Missed signal cells over all signal cells.
    pub false_negative: f64,
    /// Rejected null cells over all null cells.
    pub false_positive: f64,
    /// Rejected null cells over all rejections (0 when nothing is rejected).
    pub fdr: f64,
}

pub fn score(mask: &BinaryMask, truth: &GroundTruthMask) -> Result<Metrics> {
    if (mask.rows(), mask.cols()) != (truth.rows(), truth.cols()) {
        return Err(Error::ShapeMismatch {
            expected: (truth.rows(), truth.cols()),
            actual: (mask.rows(), mask.cols()),
        });
    }
    let (mut missed, mut false_hits, mut signal, mut hits) = (0usize, 0usize, 0usize, 0usize);
    for (&m, &t) in mask.cells().iter().zip(truth.cells()) {
        signal += t as usize;
        hits += m as usize;
        missed += (t && !m) as usize;
        false_hits += (!t && m) as usize;
    }
    let null = truth.cells().len() - signal;
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(Metrics {
        false_negative: ratio(missed, signal),
        false_positive: ratio(false_hits, null),
        fdr: false_hits as f64 / hits.max(1) as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    Scusum,
    BhFdr,
    FdrL,
}

impl Detector {
    pub fn name(self) -> &'static str {
        match self {
            Detector::Scusum => crate::detect::SCUSUM,
            Detector::BhFdr => crate::baselines::BH_FDR,
            Detector::FdrL => crate::baselines::FDR_L,
        }
    }
}

fn default_dim() -> usize {
    100
}
fn default_repeats() -> usize {
    10
}
fn default_alpha() -> f64 {
    0.05
}
fn default_replicates() -> usize {
    30
}
fn default_detectors() -> Vec<Detector> {
    vec![Detector::Scusum]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Setting {
    pub k: usize,
    pub mu: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_repeats")]
    pub m: usize,
    #[serde(default = "default_noise")]
    pub noise: NoiseModel,
    #[serde(default = "default_dim")]
    pub rows: usize,
    #[serde(default = "default_dim")]
    pub cols: usize,
    /// Window half-width for the FDR_L-style detector; defaults to `max(1, (k - 1) / 2)`.
    #[serde(default)]
    pub fdr_l_half_width: Option<usize>,
}

fn default_noise() -> NoiseModel {
    NoiseModel::Iid
}

impl Setting {
    pub fn half_width(&self) -> usize {
        self.fdr_l_half_width
            .unwrap_or_else(|| ((self.k.saturating_sub(1)) / 2).max(1))
    }
}

/// Benchmark configuration, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default)]
    pub name: String,
    pub root_seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_detectors")]
    pub detectors: Vec<Detector>,
    #[serde(default)]
    pub settings: Vec<Setting>,
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub setting: usize,
    pub detector: Detector,
    pub k: usize,
    pub mu: f64,
    pub noise: NoiseModel,
    pub alpha: f64,
    pub m: usize,
    pub rows: usize,
    pub cols: usize,
    pub signal_count: usize,
    pub replicates: usize,
    pub mean: Metrics,
    pub stderr: Metrics,
    pub mean_detected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub setting: usize,
    pub detector: Detector,
    pub seconds_per_replicate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub name: String,
    pub root_seed: u64,
    pub replicates: usize,
    pub rows: Vec<ReportRow>,
    /// Wall-clock figures; kept out of the serialized report so that the
    /// report itself is reproducible byte for byte.
    #[serde(skip)]
    pub timing: Vec<TimingRow>,
}

const CSV_HEADER: &str =
    "setting,detector,k,mu,noise,scale,alpha,m,rows,cols,signal_count,replicates,\
false_negative,false_positive,fdr,false_negative_se,false_positive_se,fdr_se,mean_detected";

impl BenchmarkReport {
    /// Flat table, one row per (setting, detector). Empty when there are no rows.
    pub fn to_csv(&self) -> String {
        if self.rows.is_empty() {
            return String::new();
        }
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let (noise, scale) = match r.noise {
                NoiseModel::Iid => ("iid", String::new()),
                NoiseModel::ExpCov { scale } => ("expcov", scale.to_string()),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.setting,
                r.detector.name(),
                r.k,
                r.mu,
                noise,
                scale,
                r.alpha,
                r.m,
                r.rows,
                r.cols,
                r.signal_count,
                r.replicates,
                r.mean.false_negative,
                r.mean.false_positive,
                r.mean.fdr,
                r.stderr.false_negative,
                r.stderr.false_positive,
                r.stderr.fdr,
                r.mean_detected,
            );
        }
        out
    }

    pub fn timing_json(&self) -> String {
        serde_json::to_string_pretty(&self.timing).expect("timing rows serialize")
    }
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn aggregate(scores: &[(Metrics, usize)]) -> (Metrics, Metrics, f64) {
    let pick = |f: fn(&Metrics) -> f64| -> (f64, f64) {
        mean_and_stderr(&scores.iter().map(|(m, _)| f(m)).collect::<Vec<_>>())
    };
    let (fn_m, fn_s) = pick(|m| m.false_negative);
    let (fp_m, fp_s) = pick(|m| m.false_positive);
    let (fdr_m, fdr_s) = pick(|m| m.fdr);
    let detected = scores.iter().map(|(_, d)| *d as f64).sum::<f64>() / scores.len() as f64;
    (
        Metrics {
            false_negative: fn_m,
            false_positive: fp_m,
            fdr: fdr_m,
        },
        Metrics {
            false_negative: fn_s,
            false_positive: fp_s,
            fdr: fdr_s,
        },
        detected,
    )
}

/// Seed of the simulated noise for a replicate.
///
/// Seeds depend on the replicate only: every setting and every detector sees
/// the same noise draws (common random numbers), so differences between
/// settings are not swamped by replicate-to-replicate variation.
pub fn field_seed(root: u64, replicate: usize) -> u64 {
    derive_seed(root, &[0, replicate as u64])
}

/// Seed handed to a randomized detector for a replicate.
pub fn detector_seed(root: u64, replicate: usize) -> u64 {
    derive_seed(root, &[1, replicate as u64])
}

fn run_detector(
    detector: Detector,
    setting: &Setting,
    field: &crate::field::SpatialField,
    seed: u64,
) -> Result<BinaryMask> {
    let result = match detector {
        Detector::Scusum => detect(
            field,
            &DetectParams::new(setting.k, setting.m, setting.alpha, seed),
        )?,
        Detector::BhFdr => bh_fdr(&to_pvalues(field), setting.alpha)?,
        Detector::FdrL => fdr_l(&to_pvalues(field), setting.alpha, setting.half_width())?,
    };
    Ok(result.mask)
}

/// Run every detector on every setting over `config.replicates` seeded replicates.
///
/// Replicates run in parallel; the report depends only on the configuration.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchmarkReport> {
    let mut samplers: HashMap<(usize, usize, u64), ExpCovSampler> = HashMap::new();
    let mut report = BenchmarkReport {
        name: config.name.clone(),
        root_seed: config.root_seed,
        replicates: config.replicates,
        rows: Vec::new(),
        timing: Vec::new(),
    };
    if config.replicates == 0 {
        return Ok(report);
    }

    for (si, setting) in config.settings.iter().enumerate() {
        let truth = lh_mask(setting.rows, setting.cols)?;
        let sim = |replicate: usize| SimConfig {
            rows: setting.rows,
            cols: setting.cols,
            mu0: 0.0,
            mu1: setting.mu,
            noise: setting.noise,
            seed: field_seed(config.root_seed, replicate),
        };
        sim(0).validate()?;
        let sampler = match setting.noise {
            NoiseModel::Iid => None,
            NoiseModel::ExpCov { scale } => {
                let key = (setting.rows, setting.cols, scale.to_bits());
                let sampler = match samplers.entry(key) {
                    Entry::Occupied(e) => e.into_mut(),
                    Entry::Vacant(e) => {
                        e.insert(ExpCovSampler::new(setting.rows, setting.cols, scale)?)
                    }
                };
                Some(&*sampler)
            }
        };

        for &detector in &config.detectors {
            let started = Instant::now();
            let scores = (0..config.replicates)
                .into_par_iter()
                .map(|j| {
                    let cfg = sim(j);
                    let field = match sampler {
                        None => gen_iid_with_mask(&cfg, &truth)?,
                        Some(s) => gen_expcov_with(&cfg, &truth, s)?,
                    };
                    let mask = run_detector(
                        detector,
                        setting,
                        &field,
                        detector_seed(config.root_seed, j),
                    )?;
                    Ok((score(&mask, &truth)?, mask.count()))
                })
                .collect::<Result<Vec<_>>>()?;
            let elapsed = started.elapsed().as_secs_f64();

            let (mean, stderr, mean_detected) = aggregate(&scores);
            report.rows.push(ReportRow {
                setting: si,
                detector,
                k: setting.k,
                mu: setting.mu,
                noise: setting.noise,
                alpha: setting.alpha,
                m: setting.m,
                rows: setting.rows,
                cols: setting.cols,
                signal_count: truth.count(),
                replicates: config.replicates,
                mean,
                stderr,
                mean_detected,
            });
            report.timing.push(TimingRow {
                setting: si,
                detector,
                seconds_per_replicate: elapsed / config.replicates as f64,
            });
        }
    }
    Ok(report)
}
