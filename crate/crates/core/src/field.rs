//! Gridded observations and the moving-window block geometry.
//!
//! Locations are indexed row-major: cell `(row, col)` has index
//! `row * cols + col`. Every other module uses the same convention.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A dense 2-D grid of finite observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialField {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl SpatialField {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid(format!(
                "field shape {rows}x{cols} must be non-empty"
            )));
        }
        if values.len() != rows * cols {
            return Err(invalid(format!(
                "field {rows}x{cols} needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite value at index {i}")));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                values.push(f(r, c));
            }
        }
        Self::new(rows, cols, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    /// Field with every value negated, for detecting low-mean regions.
    pub fn negated(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|v| -v).collect(),
        }
    }
}

/// Lattice shift of the block grid, `0 <= dx, dy < k`.
///
/// `dx` shifts along rows and `dy` along columns. A non-zero shift leaves a
/// partial block of `dx` rows (resp. `dy` columns) at the top (resp. left).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Offset {
    pub dx: usize,
    pub dy: usize,
}

impl Offset {
    pub fn new(dx: usize, dy: usize, k: usize) -> Result<Self> {
        if dx >= k || dy >= k {
            return Err(invalid(format!(
                "offset ({dx},{dy}) out of range for k={k}"
            )));
        }
        Ok(Self { dx, dy })
    }
}

/// One block of a partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub id: usize,
    pub members: Vec<usize>,
}

impl Block {
    pub fn n_i(&self) -> usize {
        self.members.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockPartition {
    pub k: usize,
    pub offset: Offset,
    pub blocks: Vec<Block>,
    pub covered: usize,
}

impl BlockPartition {
    /// Number of blocks `b`.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

/// Tile the field with `k x k` blocks anchored at `offset`.
///
/// Blocks clipped by the domain boundary are kept as partial blocks, so every
/// location is covered exactly once per offset.
pub fn partition(field: &SpatialField, k: usize, offset: Offset) -> Result<BlockPartition> {
    partition_shape(field.rows(), field.cols(), k, offset)
}

/// Shape-only variant of [`partition`].
pub fn partition_shape(
    rows: usize,
    cols: usize,
    k: usize,
    offset: Offset,
) -> Result<BlockPartition> {
    if k == 0 || k > rows.min(cols) {
        return Err(invalid(format!(
            "neighbor size k={k} must lie in [1, {}]",
            rows.min(cols)
        )));
    }
    if offset.dx >= k || offset.dy >= k {
        return Err(invalid(format!(
            "offset ({},{}) out of range for k={k}",
            offset.dx, offset.dy
        )));
    }
    // Cell (r, c) falls in block row (r + sr) / k, block col (c + sc) / k.
    let sr = (k - offset.dx) % k;
    let sc = (k - offset.dy) % k;
    let block_rows = (rows - 1 + sr) / k + 1;
    let block_cols = (cols - 1 + sc) / k + 1;

    let mut blocks: Vec<Block> = (0..block_rows * block_cols)
        .map(|id| Block {
            id,
            members: Vec::with_capacity(k * k),
        })
        .collect();
    for r in 0..rows {
        let br = (r + sr) / k;
        for c in 0..cols {
            let bc = (c + sc) / k;
            blocks[br * block_cols + bc].members.push(r * cols + c);
        }
    }
    Ok(BlockPartition {
        k,
        offset,
        blocks,
        covered: rows * cols,
    })
}

/// All `k^2` lattice shifts in row-major order.
pub fn all_offsets(k: usize) -> Vec<Offset> {
    (0..k)
        .flat_map(|dx| (0..k).map(move |dy| Offset { dx, dy }))
        .collect()
}
