//! Signal-weight estimation by moving-window CUSUM.
//!
//! For every repeat and every lattice shift the field is cut into blocks. Each
//! block contributes one randomly sampled representative and the mean of its
//! remaining members. Representatives are ordered by that leave-one-out mean
//! (descending), the CUSUM of the ordered representatives is cut at its
//! argmax, and every location in the leading blocks counts as detected. The
//! signal weight of a location is its detection frequency.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{all_offsets, partition_shape, Block, BlockPartition, SpatialField};
use crate::seed::substream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub block_id: usize,
    /// Sampled representative.
    pub gamma: f64,
    /// Block mean excluding the representative.
    pub mu_tilde: f64,
}

/// Draw a representative uniformly from `block` and compute the pseudo block mean.
///
/// Single-member blocks have no leave-one-out mean; `mu_tilde` falls back to
/// the representative itself.
pub fn summarize_block<R: Rng + ?Sized>(
    field: &SpatialField,
    block: &Block,
    rng: &mut R,
) -> Result<BlockSummary> {
    let n = block.members.len();
    if n == 0 {
        return Err(Error::Invariant(format!("block {} is empty", block.id)));
    }
    let values = field.values();
    let pick = rng.random_range(0..n);
    let gamma = values[block.members[pick]];
    let mu_tilde = if n == 1 {
        gamma
    } else {
        let total: f64 = block.members.iter().map(|&i| values[i]).sum();
        (total - gamma) / (n - 1) as f64
    };
    Ok(BlockSummary {
        block_id: block.id,
        gamma,
        mu_tilde,
    })
}

/// Block summaries sorted by `mu_tilde` descending, ties by ascending block id.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedSequence {
    pub entries: Vec<BlockSummary>,
}

impl OrderedSequence {
    pub fn new(mut entries: Vec<BlockSummary>) -> Self {
        entries.sort_by(|a, b| {
            b.mu_tilde
                .total_cmp(&a.mu_tilde)
                .then(a.block_id.cmp(&b.block_id))
        });
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Ordered representatives.
    pub fn gammas(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.gamma).collect()
    }
}

/// CUSUM statistics `|S_r - (r/b) S_b|` for `r = 1..=b`, via running sums.
pub fn cusum_transform(seq: &[f64]) -> Result<Vec<f64>> {
    if seq.is_empty() {
        return Err(invalid("CUSUM of an empty sequence"));
    }
    let b = seq.len() as f64;
    let total: f64 = seq.iter().sum();
    let mut partial = 0.0;
    Ok(seq
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            partial += x;
            (partial - ((i + 1) as f64 / b) * total).abs()
        })
        .collect())
}

/// 1-based index of the first maximum of `cusum`.
pub fn cutoff_index(cusum: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in cusum.iter().enumerate() {
        if v > cusum[best] {
            best = i;
        }
    }
    best + 1
}

/// Per-location detection frequencies over `repeats * k^2` moving-window passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMap {
    pub rows: usize,
    pub cols: usize,
    pub k: usize,
    pub repeats: usize,
    pub weights: Vec<f64>,
}

impl WeightMap {
    /// Number of passes each location took part in: `repeats * k^2`.
    pub fn passes(&self) -> usize {
        self.repeats * self.k * self.k
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.cols + col]
    }
}

/// Parameters of [`signal_weights`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
}

/// Run one moving-window pass and add a count to every detected location.
fn detect_pass<R: Rng + ?Sized>(
    field: &SpatialField,
    part: &BlockPartition,
    rng: &mut R,
    counts: &mut [u32],
) -> Result<usize> {
    let summaries = part
        .blocks
        .iter()
        .map(|b| summarize_block(field, b, rng))
        .collect::<Result<Vec<_>>>()?;
    let ordered = OrderedSequence::new(summaries);
    let cusum = cusum_transform(&ordered.gammas())?;
    let t = cutoff_index(&cusum);
    for entry in &ordered.entries[..t] {
        for &loc in &part.blocks[entry.block_id].members {
            counts[loc] += 1;
        }
    }
    Ok(t)
}

/// Estimate signal weights `w(s)` in `[0, 1]`.
///
/// The pass for repeat `r` and offset index `o` draws from substream
/// `(seed, r, o)`, so the result is identical for any thread count.
pub fn signal_weights(field: &SpatialField, params: WeightParams) -> Result<WeightMap> {
    let WeightParams { k, repeats, seed } = params;
    if repeats == 0 {
        return Err(invalid("repeat count m must be at least 1"));
    }
    let partitions = all_offsets(k)
        .into_iter()
        .map(|o| partition_shape(field.rows(), field.cols(), k, o))
        .collect::<Result<Vec<_>>>()?;

    let n = field.len();
    let tasks: Vec<(usize, usize)> = (0..repeats)
        .flat_map(|r| (0..partitions.len()).map(move |o| (r, o)))
        .collect();
    let counts = tasks
        .par_iter()
        .try_fold(
            || vec![0u32; n],
            |mut acc, &(r, o)| {
                let mut rng = substream(seed, &[r as u64, o as u64]);
                detect_pass(field, &partitions[o], &mut rng, &mut acc)?;
                Ok::<_, Error>(acc)
            },
        )
        .try_reduce(
            || vec![0u32; n],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;

    let passes = (repeats * k * k) as f64;
    Ok(WeightMap {
        rows: field.rows(),
        cols: field.cols(),
        k,
        repeats,
        weights: counts.into_iter().map(|c| c as f64 / passes).collect(),
    })
}

/// Neighbor size balancing block size against block count: `round((c1 n)^(1/4))`,
/// clamped to `[1, min(rows, cols)]`.
pub fn neighbor_size(rows: usize, cols: usize, c1: f64) -> usize {
    let n = (rows * cols) as f64;
    let k = (c1 * n).powf(0.25).round();
    let upper = rows.min(cols).max(1);
    if !k.is_finite() || k < 1.0 {
        1
    } else {
        (k as usize).min(upper)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Offset;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn block_of(values: &[f64]) -> (SpatialField, Block) {
        let field = SpatialField::new(1, values.len(), values.to_vec()).unwrap();
        let block = Block {
            id: 0,
            members: (0..values.len()).collect(),
        };
        (field, block)
    }

    #[test]
    fn leave_one_out_mean() {
        let (field, block) = block_of(&[2.0, 4.0, 6.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let s = summarize_block(&field, &block, &mut rng).unwrap();
            assert!([2.0, 4.0, 6.0].contains(&s.gamma));
            assert_eq!(s.mu_tilde, (12.0 - s.gamma) / 2.0);
        }
    }

    #[test]
    fn singleton_block_falls_back_to_gamma() {
        let (field, block) = block_of(&[5.0]);
        let s = summarize_block(&field, &block, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!((s.gamma, s.mu_tilde), (5.0, 5.0));
    }

    #[test]
    fn empty_block_is_invariant_violation() {
        let (field, _) = block_of(&[1.0]);
        let empty = Block {
            id: 3,
            members: vec![],
        };
        let err = summarize_block(&field, &empty, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, Error::Invariant(_)));
    }

    #[test]
    fn representative_independent_of_pseudo_mean() {
        // 25-cell N(0,1) blocks, 10^4 trials: correlation is O(1/sqrt(n)).
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 10_000;
        let mut pairs = Vec::with_capacity(trials);
        for _ in 0..trials {
            let vals: Vec<f64> = (0..25).map(|_| StandardNormal.sample(&mut rng)).collect();
            let (field, block) = block_of(&vals);
            let s = summarize_block(&field, &block, &mut rng).unwrap();
            pairs.push((s.gamma, s.mu_tilde));
        }
        let n = trials as f64;
        let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
        let cov = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
        let vx = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        let vy = pairs.iter().map(|p| (p.1 - my).powi(2)).sum::<f64>();
        let corr = cov / (vx * vy).sqrt();
        assert!(corr.abs() < 0.04, "corr = {corr}");
    }

    #[test]
    fn ordering_is_descending_with_id_ties() {
        let s = |id, m| BlockSummary {
            block_id: id,
            gamma: id as f64,
            mu_tilde: m,
        };
        let ord = OrderedSequence::new(vec![s(0, 1.0), s(1, 3.0), s(2, 1.0), s(3, 2.0)]);
        let ids: Vec<_> = ord.entries.iter().map(|e| e.block_id).collect();
        assert_eq!(ids, vec![1, 3, 0, 2]);
    }

    #[test]
    fn cusum_examples() {
        assert_eq!(cusum_transform(&[3.5; 4]).unwrap(), vec![0.0; 4]);
        assert_eq!(
            cusum_transform(&[1.0, 1.0, 0.0, 0.0]).unwrap(),
            vec![0.5, 1.0, 0.5, 0.0]
        );
        assert!(cusum_transform(&[]).is_err());
    }

    #[test]
    fn cutoff_examples() {
        assert_eq!(cutoff_index(&[0.5, 1.0, 0.5, 0.0]), 2);
        assert_eq!(cutoff_index(&[0.0; 7]), 1);
        assert_eq!(cutoff_index(&[1.0, 2.0, 2.0]), 2);
    }

    #[test]
    fn step_sequence_cutoff_localizes() {
        // b = 400, first 100 entries shifted by 2, unit noise.
        let mut hits = 0;
        for trial in 0..200u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
            let seq: Vec<f64> = (0..400)
                .map(|i| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    if i < 100 {
                        2.0 + e
                    } else {
                        e
                    }
                })
                .collect();
            let t = cutoff_index(&cusum_transform(&seq).unwrap());
            hits += (90..=110).contains(&t) as usize;
        }
        assert!(hits >= 190, "hits = {hits}/200");
    }

    #[test]
    fn single_cell_field_is_fully_detected() {
        let field = SpatialField::new(1, 1, vec![0.3]).unwrap();
        let w = signal_weights(
            &field,
            WeightParams {
                k: 1,
                repeats: 1,
                seed: 9,
            },
        )
        .unwrap();
        assert_eq!(w.weights, vec![1.0]);
    }

    #[test]
    fn weights_are_quantized_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let field = SpatialField::from_fn(20, 17, |_, _| StandardNormal.sample(&mut rng)).unwrap();
        let params = WeightParams {
            k: 3,
            repeats: 4,
            seed: 77,
        };
        let a = signal_weights(&field, params).unwrap();
        let b = signal_weights(&field, params).unwrap();
        assert_eq!(a, b);
        let passes = a.passes() as f64;
        for &w in &a.weights {
            assert!((0.0..=1.0).contains(&w));
            let scaled = w * passes;
            assert!((scaled - scaled.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn pass_detects_whole_leading_blocks() {
        let field =
            SpatialField::from_fn(4, 4, |r, c| if r < 2 && c < 2 { 10.0 } else { 0.0 }).unwrap();
        let part = partition_shape(4, 4, 2, Offset { dx: 0, dy: 0 }).unwrap();
        let mut counts = vec![0u32; 16];
        let t = detect_pass(
            &field,
            &part,
            &mut ChaCha8Rng::seed_from_u64(0),
            &mut counts,
        )
        .unwrap();
        assert_eq!(t, 1);
        assert_eq!(counts.iter().sum::<u32>(), 4);
        assert_eq!((counts[0], counts[1], counts[4], counts[5]), (1, 1, 1, 1));
    }

    #[test]
    fn zero_repeats_rejected() {
        let field = SpatialField::new(2, 2, vec![0.0; 4]).unwrap();
        assert!(signal_weights(
            &field,
            WeightParams {
                k: 1,
                repeats: 0,
                seed: 0
            }
        )
        .is_err());
        assert!(signal_weights(
            &field,
            WeightParams {
                k: 3,
                repeats: 1,
                seed: 0
            }
        )
        .is_err());
    }

    #[test]
    fn neighbor_size_examples() {
        assert_eq!(neighbor_size(100, 100, 1.0), 10);
        assert_eq!(neighbor_size(100, 100, 0.0625), 5);
        assert_eq!(neighbor_size(1, 1, 0.5), 1);
        assert_eq!(neighbor_size(1, 1, 1.0), 1);
        assert_eq!(neighbor_size(4, 4, 1e6), 4);
    }
}
