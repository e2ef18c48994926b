use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Boolean grid, row-major. Used both for detections and for ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryMask {
    rows: usize,
    cols: usize,
    cells: Vec<bool>,
}

/// Ground-truth signal region of a simulated field.
pub type GroundTruthMask = BinaryMask;

impl BinaryMask {
    pub fn new(rows: usize, cols: usize, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != rows * cols {
            return Err(invalid(format!(
                "mask {rows}x{cols} needs {} cells, got {}",
                rows * cols,
                cells.len()
            )));
        }
        Ok(Self { rows, cols, cells })
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            cells: vec![false; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.cells[row * self.cols + col] = value;
    }

    /// Number of `true` cells.
    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn complement(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            cells: self.cells.iter().map(|c| !c).collect(),
        }
    }

    /// Number of 4-connected components of `true` cells.
    pub fn connected_components(&self) -> usize {
        let mut seen = vec![false; self.cells.len()];
        let mut components = 0;
        let mut stack = Vec::new();
        for start in 0..self.cells.len() {
            if !self.cells[start] || seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let (r, c) = (i / self.cols, i % self.cols);
                let mut visit = |j: usize| {
                    if self.cells[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                };
                if r > 0 {
                    visit(i - self.cols);
                }
                if r + 1 < self.rows {
                    visit(i + self.cols);
                }
                if c > 0 {
                    visit(i - 1);
                }
                if c + 1 < self.cols {
                    visit(i + 1);
                }
            }
        }
        components
    }
}
