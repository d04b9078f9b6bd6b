//! Regular axis-aligned grids over a bounding box. Shared by grid
//! partitions, binary-grid features, tabular lattices and raster dumps.

use crate::error::{Error, Result};
use crate::state::{Bounds, EnvState};

/// Cells are half-open `[low, high)` per dimension; the last cell along each
/// dimension is closed at the top. Cell indices are row-major with the first
/// dimension varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    bounds: Bounds,
    counts: Vec<usize>,
}

impl Grid {
    pub fn new(bounds: Bounds, counts: Vec<usize>) -> Result<Self> {
        if counts.len() != bounds.dim() {
            return Err(Error::InvalidSpec(format!(
                "grid has {} counts for a {}-dimensional box",
                counts.len(),
                bounds.dim()
            )));
        }
        if let Some(d) = counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidSpec(format!("grid count along dimension {d} is zero")));
        }
        counts
            .iter()
            .try_fold(1usize, |acc, &c| acc.checked_mul(c))
            .ok_or_else(|| Error::InvalidSpec("grid cell count overflows".into()))?;
        Ok(Grid { bounds, counts })
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn n_cells(&self) -> usize {
        self.counts.iter().product()
    }

    /// Per-dimension cell coordinate of `x`, and whether it had to be clamped.
    fn axis_index(&self, d: usize, x: f64) -> (usize, bool) {
        let (lo, hi) = (self.bounds.low()[d], self.bounds.high()[d]);
        let n = self.counts[d];
        if x.is_nan() {
            return (0, true);
        }
        if x < lo {
            return (0, true);
        }
        if x >= hi {
            return (n - 1, x > hi);
        }
        let t = ((x - lo) / (hi - lo) * n as f64).floor();
        ((t as usize).min(n - 1), false)
    }

    /// Cell containing `s`; out-of-box coordinates clamp to the nearest cell,
    /// reported through the second element.
    pub fn locate(&self, s: &[f64]) -> (usize, bool) {
        let mut index = 0;
        let mut stride = 1;
        let mut clamped = false;
        for d in 0..self.dim() {
            let (i, c) = self.axis_index(d, s.get(d).copied().unwrap_or(f64::NAN));
            clamped |= c;
            index += i * stride;
            stride *= self.counts[d];
        }
        (index, clamped)
    }

    pub fn cell_of(&self, s: &[f64]) -> usize {
        self.locate(s).0
    }

    pub fn cell_coords(&self, mut cell: usize) -> Vec<usize> {
        self.counts
            .iter()
            .map(|&n| {
                let i = cell % n;
                cell /= n;
                i
            })
            .collect()
    }

    pub fn cell_index(&self, coords: &[usize]) -> usize {
        let mut index = 0;
        let mut stride = 1;
        for (d, &i) in coords.iter().enumerate() {
            index += i * stride;
            stride *= self.counts[d];
        }
        index
    }

    pub fn cell_bounds(&self, cell: usize) -> Bounds {
        let coords = self.cell_coords(cell);
        let (low, high) = coords
            .iter()
            .enumerate()
            .map(|(d, &i)| {
                let w = self.bounds.width(d) / self.counts[d] as f64;
                let lo = self.bounds.low()[d] + w * i as f64;
                let hi = if i + 1 == self.counts[d] {
                    self.bounds.high()[d]
                } else {
                    lo + w
                };
                (lo, hi)
            })
            .unzip();
        Bounds::new(low, high).expect("cells of a valid grid are non-degenerate")
    }

    pub fn cell_center(&self, cell: usize) -> EnvState {
        self.cell_bounds(cell).center()
    }
}
