use proptest::prelude::*;
use scusum_core::baselines::{bh_step_up, median_filter, PValueField};
use scusum_core::benchmark::score;
use scusum_core::field::partition_shape;
use scusum_core::threshold::{null_interpolate, pick_threshold_with, unit_grid};
use scusum_core::{
    all_offsets, cusum_transform, cutoff_index, detect, signal_weights, BinaryMask, DensityModel,
    DetectParams, Offset, SpatialField, ThresholdRule, WeightParams,
};

fn cusum_oracle(x: &[f64]) -> Vec<f64> {
    let b = x.len();
    let total: f64 = x.iter().sum();
    (1..=b)
        .map(|r| {
            let head: f64 = x[..r].iter().sum();
            (head - r as f64 / b as f64 * total).abs()
        })
        .collect()
}

fn bh_oracle(p: &[f64], alpha: f64) -> Vec<bool> {
    let n = p.len() as f64;
    let count = |t: f64| p.iter().filter(|&&q| q <= t).count();
    let kmax = (1..=p.len())
        .filter(|&j| count(alpha * j as f64 / n) >= j)
        .max();
    match kmax {
        Some(k) => p.iter().map(|&q| q <= alpha * k as f64 / n).collect(),
        None => vec![false; p.len()],
    }
}

fn field_strategy(max_side: usize) -> impl Strategy<Value = SpatialField> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(r, c)| {
        prop::collection::vec(-4.0..4.0f64, r * c)
            .prop_map(move |v| SpatialField::new(r, c, v).unwrap())
    })
}

fn density_strategy() -> impl Strategy<Value = (Vec<f64>, f64)> {
    (8usize..128).prop_flat_map(|n| (prop::collection::vec(0.0..5.0f64, n), 0.01..0.99f64))
}

proptest! {
    #[test]
    fn cusum_matches_quadratic_oracle(x in prop::collection::vec(-10.0..10.0f64, 1..200)) {
        let fast = cusum_transform(&x).unwrap();
        let slow = cusum_oracle(&x);
        let scale = x.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!((a - b).abs() <= 1e-12 * scale);
        }
        prop_assert!(fast[x.len() - 1].abs() <= 1e-12 * scale);
    }

    #[test]
    fn cusum_ignores_level_shift(
        x in prop::collection::vec(-10.0..10.0f64, 1..200),
        shift in -100.0..100.0f64,
    ) {
        let shifted: Vec<f64> = x.iter().map(|v| v + shift).collect();
        let a = cusum_transform(&x).unwrap();
        let b = cusum_transform(&shifted).unwrap();
        let scale = x.iter().chain(&shifted).map(|v| v.abs()).sum::<f64>().max(1.0);
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).abs() <= 1e-11 * scale);
        }
    }

    #[test]
    fn cutoff_is_first_maximum(x in prop::collection::vec(0.0..10.0f64, 1..100)) {
        let t = cutoff_index(&x);
        prop_assert!((1..=x.len()).contains(&t));
        let best = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(x[t - 1], best);
        prop_assert!(x[..t - 1].iter().all(|&v| v < best));
    }

    #[test]
    fn partition_covers_each_cell_once(
        rows in 1usize..40, cols in 1usize..40, k in 1usize..8, dx in 0usize..8, dy in 0usize..8,
    ) {
        let k = k.min(rows).min(cols);
        let offset = Offset::new(dx % k, dy % k, k).unwrap();
        let p = partition_shape(rows, cols, k, offset).unwrap();
        let mut seen = vec![0u8; rows * cols];
        for (i, block) in p.blocks.iter().enumerate() {
            prop_assert_eq!(block.id, i);
            prop_assert!(block.n_i() >= 1 && block.n_i() <= k * k);
            for &cell in &block.members {
                seen[cell] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
        prop_assert_eq!(p.covered, rows * cols);
    }

    #[test]
    fn weights_are_quantized_fractions(field in field_strategy(12), k in 1usize..4, m in 1usize..3, seed: u64) {
        let k = k.min(field.rows()).min(field.cols());
        let w = signal_weights(&field, WeightParams { k, repeats: m, seed }).unwrap();
        let passes = (m * all_offsets(k).len()) as f64;
        for &v in &w.weights {
            prop_assert!((0.0..=1.0).contains(&v));
            let scaled = v * passes;
            prop_assert!((scaled - scaled.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn bh_matches_counting_oracle(
        p in prop::collection::vec(prop_oneof![0.0..1.0f64, 0.0..0.01f64], 1..300),
        alpha in 0.001..0.5f64,
    ) {
        let (rejected, _) = bh_step_up(&p, alpha);
        prop_assert_eq!(rejected, bh_oracle(&p, alpha));
    }

    #[test]
    fn bh_rejections_grow_with_alpha(
        p in prop::collection::vec(0.0..1.0f64, 1..300),
        a1 in 0.001..0.5f64,
        a2 in 0.001..0.5f64,
    ) {
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        let (small, _) = bh_step_up(&p, lo);
        let (large, _) = bh_step_up(&p, hi);
        prop_assert!(small.iter().zip(&large).all(|(s, l)| !s || *l));
    }

    #[test]
    fn median_filter_stays_within_window(
        p in prop::collection::vec(0.0..1.0f64, 36),
        h in 0usize..3,
    ) {
        let field = PValueField::new(6, 6, p.clone()).unwrap();
        let out = median_filter(&field, h);
        for r in 0..6usize {
            for c in 0..6usize {
                let window: Vec<f64> = (r.saturating_sub(h)..=(r + h).min(5))
                    .flat_map(|i| (c.saturating_sub(h)..=(c + h).min(5)).map(move |j| (i, j)))
                    .map(|(i, j)| p[i * 6 + j])
                    .collect();
                let lo = window.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let v = out.pvalues[r * 6 + c];
                prop_assert!(v >= lo && v <= hi);
                if h == 0 {
                    prop_assert_eq!(v, p[r * 6 + c]);
                }
            }
        }
    }

    #[test]
    fn null_density_is_linear_past_the_valley((f, t_star) in density_strategy()) {
        let model = DensityModel { grid: unit_grid(f.len()), f, f_h0: None, valley: None, bandwidth: 0.05 };
        let with_null = null_interpolate(&model, t_star).unwrap();
        let h0 = with_null.f_h0.as_ref().unwrap();
        let ft = model.f_at(t_star);
        for (i, &x) in model.grid.iter().enumerate() {
            let expected = if x <= t_star {
                model.f[i]
            } else {
                ft * (1.0 - x) / (1.0 - t_star)
            };
            prop_assert!((h0[i] - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
        }
        prop_assert_eq!(h0[h0.len() - 1], 0.0);
    }

    #[test]
    fn threshold_is_monotone_in_alpha(
        (f, t_star) in density_strategy(),
        a1 in 0.001..0.5f64,
        a2 in 0.001..0.5f64,
        pointwise: bool,
    ) {
        let rule = if pointwise { ThresholdRule::Pointwise } else { ThresholdRule::TailArea };
        let model = DensityModel { grid: unit_grid(f.len()), f, f_h0: None, valley: None, bandwidth: 0.05 };
        let model = null_interpolate(&model, t_star).unwrap();
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        let strict = pick_threshold_with(&model, lo, rule).unwrap().c;
        let loose = pick_threshold_with(&model, hi, rule).unwrap().c;
        if let Some(cs) = strict {
            prop_assert!(cs > t_star);
            let cl = loose.expect("a looser level keeps the threshold");
            prop_assert!(cl <= cs);
        }
    }

    #[test]
    fn metric_identities(
        cells in prop::collection::vec((any::<bool>(), any::<bool>()), 1..400),
    ) {
        let n = cells.len();
        let mask = BinaryMask::new(1, n, cells.iter().map(|c| c.0).collect()).unwrap();
        let truth = BinaryMask::new(1, n, cells.iter().map(|c| c.1).collect()).unwrap();
        let m = score(&mask, &truth).unwrap();
        for v in [m.false_negative, m.false_positive, m.fdr] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let false_hits = cells.iter().filter(|c| c.0 && !c.1).count() as f64;
        prop_assert!((m.fdr * mask.count() as f64 - false_hits).abs() < 1e-9);
        prop_assert!((m.false_positive * truth.complement().count() as f64 - false_hits).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mask_is_upper_level_set_of_weights(
        values in prop::collection::vec(-2.0..2.0f64, 400),
        lift in 0.0..4.0f64,
        seed: u64,
    ) {
        let field = SpatialField::from_fn(20, 20, |r, c| {
            values[r * 20 + c] + if (5..13).contains(&r) && (4..12).contains(&c) { lift } else { 0.0 }
        })
        .unwrap();
        let result = detect(&field, &DetectParams::new(3, 2, 0.1, seed)).unwrap();
        let w = result.weights.as_ref().unwrap();
        match result.threshold {
            Some(c) => {
                for (i, &cell) in result.mask.cells().iter().enumerate() {
                    prop_assert_eq!(cell, w.weights[i] > c);
                }
            }
            None => {
                prop_assert_eq!(result.detected(), 0);
                prop_assert!(result.diagnostics.reason.is_some());
            }
        }
    }
}
