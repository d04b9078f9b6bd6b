use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::state::EnvState;

use super::features::FeatureMap;

/// Static kd-tree over a point set. Nearest-neighbour queries break
/// distance ties towards the lowest point index.
#[derive(Clone, Debug, PartialEq)]
pub struct KdTree {
    dim: usize,
    points: Vec<Vec<f64>>,
    /// Points in tree order: the median of every range `lo..hi` sits at
    /// `(lo + hi) / 2` and splits along `axis` of that slot.
    order: Vec<usize>,
    axis: Vec<usize>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KdTree {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map(Vec::len).ok_or_else(|| Error::Domain("kd-tree needs at least one point".into()))?;
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::Domain("kd-tree points differ in dimension".into()));
        }
        let n = points.len();
        let mut tree = KdTree {
            dim,
            points,
            order: (0..n).collect(),
            axis: vec![0; n],
        };
        tree.build(0, n);
        Ok(tree)
    }

    fn build(&mut self, lo: usize, hi: usize) {
        if hi - lo <= 1 {
            return;
        }
        let axis = (0..self.dim)
            .map(|d| {
                let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
                for &i in &self.order[lo..hi] {
                    min = min.min(self.points[i][d]);
                    max = max.max(self.points[i][d]);
                }
                (d, max - min)
            })
            .fold((0, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best })
            .0;
        let mid = (lo + hi) / 2;
        let points = &self.points;
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
        });
        self.axis[mid] = axis;
        self.build(lo, mid);
        self.build(mid + 1, hi);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn nearest(&self, q: &[f64]) -> usize {
        let mut best = (f64::INFINITY, usize::MAX);
        self.search(0, self.points.len(), q, &mut best);
        best.1
    }

    fn search(&self, lo: usize, hi: usize, q: &[f64], best: &mut (f64, usize)) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let p = self.order[mid];
        let d2 = dist2(q, &self.points[p]);
        if d2 < best.0 || (d2 == best.0 && p < best.1) {
            *best = (d2, p);
        }
        let axis = self.axis[mid];
        let diff = q[axis] - self.points[p][axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(near.0, near.1, q, best);
        // `<=` keeps equidistant points on the far side reachable for the
        // index tie-break.
        if diff * diff <= best.0 {
            self.search(far.0, far.1, q, best);
        }
    }
}

/// Piecewise-constant value function: the value of the nearest anchor.
#[derive(Clone, Debug, PartialEq)]
pub struct NnValue {
    tree: KdTree,
    values: Vec<f64>,
}

impl NnValue {
    pub fn new(anchors: Vec<EnvState>, values: Vec<f64>) -> Result<Self> {
        if anchors.len() != values.len() {
            return Err(Error::Domain(format!("{} anchors but {} values", anchors.len(), values.len())));
        }
        let tree = KdTree::new(anchors.into_iter().map(|s| s.0).collect())?;
        Ok(NnValue { tree, values })
    }

    pub fn anchors(&self) -> &[Vec<f64>] {
        self.tree.points()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, s: &[f64]) -> f64 {
        self.values[self.tree.nearest(s)]
    }
}

pub fn nn_value(anchors: Vec<(EnvState, f64)>) -> Result<ValueEstimate> {
    let (states, values) = anchors.into_iter().unzip();
    Ok(ValueEstimate::NearestNeighbor(NnValue::new(states, values)?))
}

/// Approximate state values of the current hierarchical policy.
#[derive(Clone, Debug, PartialEq)]
pub enum ValueEstimate {
    Linear { features: FeatureMap, weights: Vec<f64> },
    NearestNeighbor(NnValue),
    /// `V(s) = max_j Q(s, j)`.
    MaxQ(QEstimate),
}

impl ValueEstimate {
    pub fn zero(features: FeatureMap) -> Self {
        let weights = vec![0.0; features.len()];
        ValueEstimate::Linear { features, weights }
    }

    pub fn value(&self, s: &[f64]) -> f64 {
        match self {
            ValueEstimate::Linear { features, weights } => features.dot(weights, s),
            ValueEstimate::NearestNeighbor(nn) => nn.value(s),
            ValueEstimate::MaxQ(q) => q.max(s),
        }
    }
}

/// Action values over option indices, linear in a shared feature map.
#[derive(Clone, Debug, PartialEq)]
pub struct QEstimate {
    features: FeatureMap,
    /// One weight vector per option index.
    weights: Vec<Vec<f64>>,
}

impl QEstimate {
    pub fn new(features: FeatureMap, weights: Vec<Vec<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| w.len() != features.len()) {
            return Err(Error::Domain("Q weights must be m >= 1 vectors of feature length".into()));
        }
        if weights.iter().flatten().any(|w| !w.is_finite()) {
            return Err(Error::Solver("non-finite Q weights".into()));
        }
        Ok(QEstimate { features, weights })
    }

    pub fn features(&self) -> &FeatureMap {
        &self.features
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn option_count(&self) -> usize {
        self.weights.len()
    }

    pub fn q(&self, s: &[f64], j: usize) -> f64 {
        self.features.dot(&self.weights[j], s)
    }

    pub fn values(&self, s: &[f64]) -> Vec<f64> {
        self.weights.iter().map(|w| self.features.dot(w, s)).collect()
    }

    pub fn max(&self, s: &[f64]) -> f64 {
        self.values(s).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `argmax_j Q(s, j)`; among tied maxima `prior` wins if present,
    /// otherwise the lowest index.
    pub fn greedy(&self, s: &[f64], prior: usize) -> usize {
        greedy_index(&self.values(s), prior)
    }

    pub(crate) fn write_text(&self, out: &mut String) {
        self.features.write_text(out);
        for (j, w) in self.weights.iter().enumerate() {
            let vals: Vec<String> = w.iter().map(|x| format!("{x:.16e}")).collect();
            let _ = writeln!(out, "weights {j} {}", vals.join(" "));
        }
    }

    pub(crate) fn parse_text<'a>(m: usize, lines: &mut impl Iterator<Item = (usize, &'a str)>, ln: usize) -> Result<Self> {
        let (fl, fline) = lines.next().ok_or_else(|| Error::parse(ln, "missing `features`"))?;
        let head: Vec<&str> = fline.split_whitespace().collect();
        let features = FeatureMap::parse_text(&head, lines, fl)?;
        let mut weights = Vec::with_capacity(m);
        for j in 0..m {
            let (wl, wline) = lines.next().ok_or_else(|| Error::parse(fl, "missing `weights`"))?;
            let f: Vec<&str> = wline.split_whitespace().collect();
            if f.len() < 2 || f[0] != "weights" || f[1] != j.to_string() {
                return Err(Error::parse(wl, format!("expected `weights {j} ...`")));
            }
            weights.push(parse_reals(&f[2..], wl)?);
        }
        QEstimate::new(features, weights).map_err(|e| Error::parse(fl, e.to_string()))
    }
}

pub(crate) fn parse_reals(fields: &[&str], line: usize) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|f| f.parse::<f64>().map_err(|_| Error::parse(line, format!("bad number `{f}`"))))
        .collect()
}

pub(crate) fn greedy_index(values: &[f64], prior: usize) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.get(prior) == Some(&best) {
        return prior;
    }
    values.iter().position(|&v| v == best).unwrap_or(0)
}
