use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::state::Bounds;

/// Linear feature maps for value and action-value estimates.
#[derive(Clone, Debug, PartialEq)]
pub enum FeatureMap {
    /// One-hot over the cells of a grid.
    BinaryGrid(Grid),
    /// `<1, s_1, ..., s_d>`.
    Polynomial { dim: usize },
}

impl FeatureMap {
    pub fn binary_grid(bounds: Bounds, counts: Vec<usize>) -> Result<Self> {
        Ok(FeatureMap::BinaryGrid(Grid::new(bounds, counts)?))
    }

    pub fn polynomial(dim: usize) -> Self {
        FeatureMap::Polynomial { dim }
    }

    pub fn len(&self) -> usize {
        match self {
            FeatureMap::BinaryGrid(g) => g.n_cells(),
            FeatureMap::Polynomial { dim } => dim + 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn state_dim(&self) -> usize {
        match self {
            FeatureMap::BinaryGrid(g) => g.dim(),
            FeatureMap::Polynomial { dim } => *dim,
        }
    }

    /// Non-zero entries of `phi(s)`.
    pub fn sparse(&self, s: &[f64]) -> Vec<(usize, f64)> {
        match self {
            FeatureMap::BinaryGrid(g) => vec![(g.cell_of(s), 1.0)],
            FeatureMap::Polynomial { .. } => self.features(s).into_iter().enumerate().collect(),
        }
    }

    pub fn features(&self, s: &[f64]) -> Vec<f64> {
        match self {
            FeatureMap::BinaryGrid(g) => {
                let mut phi = vec![0.0; g.n_cells()];
                phi[g.cell_of(s)] = 1.0;
                phi
            }
            FeatureMap::Polynomial { dim } => {
                let mut phi = Vec::with_capacity(dim + 1);
                phi.push(1.0);
                phi.extend_from_slice(&s[..*dim]);
                phi
            }
        }
    }

    pub fn dot(&self, w: &[f64], s: &[f64]) -> f64 {
        match self {
            FeatureMap::BinaryGrid(g) => w[g.cell_of(s)],
            FeatureMap::Polynomial { dim } => w[0] + w[1..=*dim].iter().zip(s).map(|(a, b)| a * b).sum::<f64>(),
        }
    }

    /// `w += alpha * phi(s)`.
    pub fn add_scaled(&self, w: &mut [f64], s: &[f64], alpha: f64) {
        match self {
            FeatureMap::BinaryGrid(g) => w[g.cell_of(s)] += alpha,
            FeatureMap::Polynomial { dim } => {
                w[0] += alpha;
                for (wi, x) in w[1..=*dim].iter_mut().zip(s) {
                    *wi += alpha * x;
                }
            }
        }
    }

    pub(crate) fn write_text(&self, out: &mut String) {
        match self {
            FeatureMap::BinaryGrid(g) => {
                let _ = writeln!(out, "features binary-grid");
                write_grid(g, out);
            }
            FeatureMap::Polynomial { dim } => {
                let _ = writeln!(out, "features polynomial {dim}");
            }
        }
    }

    pub(crate) fn parse_text<'a>(head: &[&str], lines: &mut impl Iterator<Item = (usize, &'a str)>, ln: usize) -> Result<Self> {
        match head {
            ["features", "binary-grid"] => Ok(FeatureMap::BinaryGrid(parse_grid(lines, ln)?)),
            ["features", "polynomial", d] => Ok(FeatureMap::Polynomial {
                dim: d.parse().map_err(|_| Error::parse(ln, "bad feature dimension"))?,
            }),
            _ => Err(Error::parse(ln, "expected `features binary-grid` or `features polynomial <d>`")),
        }
    }
}

pub(crate) fn write_grid(g: &Grid, out: &mut String) {
    let b = g.bounds();
    let pairs: Vec<String> = b
        .low()
        .iter()
        .zip(b.high())
        .map(|(l, h)| format!("{l:.16e} {h:.16e}"))
        .collect();
    let counts: Vec<String> = g.counts().iter().map(|c| c.to_string()).collect();
    let _ = writeln!(out, "bounds {}", pairs.join(" "));
    let _ = writeln!(out, "counts {}", counts.join(" "));
}

pub(crate) fn parse_grid<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, ln: usize) -> Result<Grid> {
    let (bl, bline) = lines.next().ok_or_else(|| Error::parse(ln, "missing `bounds`"))?;
    let bf: Vec<&str> = bline.split_whitespace().collect();
    if bf.first() != Some(&"bounds") {
        return Err(Error::parse(bl, "expected `bounds`"));
    }
    let bounds = crate::partition::parse_bounds(&bf[1..], bl)?;
    let (cl, cline) = lines.next().ok_or_else(|| Error::parse(bl, "missing `counts`"))?;
    let cf: Vec<&str> = cline.split_whitespace().collect();
    if cf.first() != Some(&"counts") {
        return Err(Error::parse(cl, "expected `counts`"));
    }
    let counts = cf[1..]
        .iter()
        .map(|c| c.parse().map_err(|_| Error::parse(cl, format!("bad count `{c}`"))))
        .collect::<Result<Vec<usize>>>()?;
    Grid::new(bounds, counts).map_err(|e| Error::parse(cl, e.to_string()))
}
