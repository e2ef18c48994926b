use scusum_core::benchmark::{detector_seed, field_seed, score};
use scusum_core::seed::substream;
use scusum_core::simulate::{simulate, ExpCovSampler, NoiseModel, SimConfig};
use scusum_core::{detect, BinaryMask, DetectParams, SpatialField};

#[test]
fn pure_noise_rarely_produces_detections() {
    let mut total_fp = 0.0;
    for j in 0..30 {
        let config = SimConfig {
            mu1: 0.0,
            seed: field_seed(2019, j),
            ..SimConfig::default()
        };
        let (field, truth) = simulate(&config).unwrap();
        assert_eq!(truth.count(), 1290);
        let result = detect(
            &field,
            &DetectParams::new(5, 10, 0.05, detector_seed(2019, j)),
        )
        .unwrap();
        let empty_truth = BinaryMask::empty(field.rows(), field.cols());
        total_fp += score(&result.mask, &empty_truth).unwrap().false_positive;
    }
    assert!(total_fp / 30.0 <= 0.01, "mean FP {}", total_fp / 30.0);
}

#[test]
fn signal_cells_carry_the_signal_mean() {
    let config = SimConfig {
        mu0: -0.5,
        mu1: 1.5,
        seed: 11,
        ..SimConfig::default()
    };
    let (field, truth) = simulate(&config).unwrap();
    let (mut sig, mut bg) = (Vec::new(), Vec::new());
    for (v, &s) in field.values().iter().zip(truth.cells()) {
        if s {
            sig.push(*v)
        } else {
            bg.push(*v)
        }
    }
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    assert!((mean(&sig) - 1.5).abs() < 0.15);
    assert!((mean(&bg) + 0.5).abs() < 0.05);
}

#[test]
fn expcov_realizations_match_the_model() {
    let (rows, cols, reps) = (30, 30, 200);
    let sampler = ExpCovSampler::new(rows, cols, 0.5).unwrap();
    let mut rng = substream(2019, &[8]);
    let (mut lag_sum, mut lag_n) = (0.0, 0usize);
    let mut var = vec![0.0; rows * cols];
    for _ in 0..reps {
        let x = sampler.sample(&mut rng);
        for r in 0..rows {
            for c in 0..cols {
                let v = x[r * cols + c];
                var[r * cols + c] += v * v;
                if c + 1 < cols {
                    lag_sum += v * x[r * cols + c + 1];
                    lag_n += 1;
                }
                if r + 1 < rows {
                    lag_sum += v * x[(r + 1) * cols + c];
                    lag_n += 1;
                }
            }
        }
    }
    let lag1 = lag_sum / lag_n as f64;
    assert!((lag1 - 0.13533).abs() <= 0.01, "lag-1 covariance {lag1}");
    let mean_var = var.iter().sum::<f64>() / (var.len() * reps) as f64;
    assert!(
        (mean_var - 1.0).abs() <= 0.05,
        "marginal variance {mean_var}"
    );
}

#[test]
fn expcov_config_runs_end_to_end() {
    let config = SimConfig {
        rows: 40,
        cols: 40,
        noise: NoiseModel::ExpCov { scale: 0.3 },
        seed: 5,
        ..SimConfig::default()
    };
    let (field, truth) = simulate(&config).unwrap();
    assert_eq!(truth.rows(), 40);
    let again: SpatialField = simulate(&config).unwrap().0;
    assert_eq!(field, again);
}
