//! State-space partitions and the class lookup behind the inter-option
//! policy.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::rng;
use crate::state::{Bounds, EnvState};

#[derive(Clone, Debug, PartialEq)]
pub enum PartitionKind {
    Grid(Grid),
    /// Each class is a union of boxes. Membership is half-open per box
    /// (closed at the top of the overall bounds); the lowest class index
    /// claiming a state wins.
    Explicit { bounds: Bounds, classes: Vec<Vec<Bounds>> },
}

#[derive(Debug)]
pub struct Partition {
    kind: PartitionKind,
    clamped: AtomicU64,
}

impl Clone for Partition {
    fn clone(&self) -> Self {
        Partition {
            kind: self.kind.clone(),
            clamped: AtomicU64::new(0),
        }
    }
}

impl PartialEq for Partition {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

/// Regular grid partition; `m` is the product of `counts`.
pub fn grid_partition(bounds: Bounds, counts: &[usize]) -> Result<Partition> {
    Ok(Partition::from_kind(PartitionKind::Grid(Grid::new(bounds, counts.to_vec())?)))
}

impl Partition {
    fn from_kind(kind: PartitionKind) -> Self {
        Partition {
            kind,
            clamped: AtomicU64::new(0),
        }
    }

    pub fn explicit(bounds: Bounds, classes: Vec<Vec<Bounds>>) -> Result<Self> {
        if classes.is_empty() || classes.iter().any(|c| c.is_empty()) {
            return Err(Error::InvalidSpec(
                "explicit partition needs at least one class and one box per class".into(),
            ));
        }
        if classes.iter().flatten().any(|b| b.dim() != bounds.dim()) {
            return Err(Error::InvalidSpec("explicit partition box dimension mismatch".into()));
        }
        Ok(Self::from_kind(PartitionKind::Explicit { bounds, classes }))
    }

    pub fn kind(&self) -> &PartitionKind {
        &self.kind
    }

    pub fn bounds(&self) -> &Bounds {
        match &self.kind {
            PartitionKind::Grid(g) => g.bounds(),
            PartitionKind::Explicit { bounds, .. } => bounds,
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds().dim()
    }

    /// Number of classes `m`.
    pub fn class_count(&self) -> usize {
        match &self.kind {
            PartitionKind::Grid(g) => g.n_cells(),
            PartitionKind::Explicit { classes, .. } => classes.len(),
        }
    }

    /// Number of lookups that fell outside the bounds and were clamped.
    pub fn clamped_lookups(&self) -> u64 {
        self.clamped.load(Ordering::Relaxed)
    }

    fn in_box(&self, b: &Bounds, s: &[f64]) -> bool {
        let top = self.bounds().high();
        s.iter().enumerate().all(|(d, &x)| {
            x >= b.low()[d] && (x < b.high()[d] || (x == b.high()[d] && b.high()[d] == top[d]))
        })
    }

    fn claimants(&self, s: &[f64]) -> Vec<usize> {
        match &self.kind {
            PartitionKind::Grid(g) => vec![g.cell_of(s)],
            PartitionKind::Explicit { classes, .. } => classes
                .iter()
                .enumerate()
                .filter(|(_, boxes)| boxes.iter().any(|b| self.in_box(b, s)))
                .map(|(i, _)| i)
                .collect(),
        }
    }

    /// `mu(s)`: index of the class containing `s`.
    pub fn class_index(&self, s: &[f64]) -> usize {
        match &self.kind {
            PartitionKind::Grid(g) => {
                let (cell, clamped) = g.locate(s);
                if clamped {
                    self.clamped.fetch_add(1, Ordering::Relaxed);
                }
                cell
            }
            PartitionKind::Explicit { classes, .. } => {
                if let Some(i) = classes
                    .iter()
                    .position(|boxes| boxes.iter().any(|b| self.in_box(b, s)))
                {
                    return i;
                }
                self.clamped.fetch_add(1, Ordering::Relaxed);
                let mut best = (0, f64::INFINITY);
                for (i, boxes) in classes.iter().enumerate() {
                    for b in boxes {
                        let mut p = s.to_vec();
                        b.clamp(&mut p);
                        let d = EnvState(p).distance(&EnvState(s.to_vec()));
                        if d < best.1 {
                            best = (i, d);
                        }
                    }
                }
                best.0
            }
        }
    }

    /// Bounding boxes that make up class `i`, used for uniform sampling.
    pub fn class_boxes(&self, i: usize) -> Result<Vec<Bounds>> {
        if i >= self.class_count() {
            return Err(Error::OutOfRange {
                index: i,
                len: self.class_count(),
            });
        }
        Ok(match &self.kind {
            PartitionKind::Grid(g) => vec![g.cell_bounds(i)],
            PartitionKind::Explicit { classes, .. } => classes[i].clone(),
        })
    }

    /// Parse the text written by [`Partition::to_text`]. Blank lines and `#`
    /// comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let p = parse_partition(&mut lines)?;
        if let Some((ln, _)) = lines.next() {
            return Err(Error::parse(ln, "unexpected content after the partition"));
        }
        Ok(p)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let bounds_line = |b: &Bounds| {
            b.low()
                .iter()
                .zip(b.high())
                .map(|(l, h)| format!("{l:.17e} {h:.17e}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        match &self.kind {
            PartitionKind::Grid(g) => {
                let counts: Vec<String> = g.counts().iter().map(|c| c.to_string()).collect();
                let _ = writeln!(out, "partition grid");
                let _ = writeln!(out, "bounds {}", bounds_line(g.bounds()));
                let _ = writeln!(out, "counts {}", counts.join(" "));
            }
            PartitionKind::Explicit { bounds, classes } => {
                let n_boxes: usize = classes.iter().map(Vec::len).sum();
                let _ = writeln!(out, "partition explicit {} {n_boxes}", classes.len());
                let _ = writeln!(out, "bounds {}", bounds_line(bounds));
                for (i, boxes) in classes.iter().enumerate() {
                    for b in boxes {
                        let _ = writeln!(out, "box {i} {}", bounds_line(b));
                    }
                }
            }
        }
        out
    }
}

pub(crate) fn parse_bounds(fields: &[&str], line: usize) -> Result<Bounds> {
    if fields.is_empty() || fields.len() % 2 != 0 {
        return Err(Error::parse(line, "bounds need low/high pairs"));
    }
    let values: Vec<f64> = fields
        .iter()
        .map(|f| f.parse::<f64>().map_err(|_| Error::parse(line, format!("bad number `{f}`"))))
        .collect::<Result<_>>()?;
    let (low, high): (Vec<f64>, Vec<f64>) = values.chunks(2).map(|c| (c[0], c[1])).unzip();
    Bounds::new(low, high).map_err(|e| Error::parse(line, e.to_string()))
}

/// Parse the block written by [`Partition::to_text`] from an iterator of
/// `(line number, trimmed line)` pairs.
pub(crate) fn parse_partition<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
) -> Result<Partition> {
    let (ln, head) = lines.next().ok_or_else(|| Error::parse(0, "missing partition block"))?;
    let head: Vec<&str> = head.split_whitespace().collect();
    let (bl, bline) = lines
        .next()
        .ok_or_else(|| Error::parse(ln, "partition block is missing `bounds`"))?;
    let bfields: Vec<&str> = bline.split_whitespace().collect();
    if bfields.first() != Some(&"bounds") {
        return Err(Error::parse(bl, "expected `bounds`"));
    }
    let bounds = parse_bounds(&bfields[1..], bl)?;
    match head.as_slice() {
        ["partition", "grid"] => {
            let (cl, cline) = lines
                .next()
                .ok_or_else(|| Error::parse(bl, "grid partition is missing `counts`"))?;
            let f: Vec<&str> = cline.split_whitespace().collect();
            if f.first() != Some(&"counts") {
                return Err(Error::parse(cl, "expected `counts`"));
            }
            let counts: Vec<usize> = f[1..]
                .iter()
                .map(|c| c.parse().map_err(|_| Error::parse(cl, format!("bad count `{c}`"))))
                .collect::<Result<_>>()?;
            grid_partition(bounds, &counts).map_err(|e| Error::parse(cl, e.to_string()))
        }
        ["partition", "explicit", m, n_boxes] => {
            let m: usize = m.parse().map_err(|_| Error::parse(ln, "bad class count"))?;
            let n_boxes: usize = n_boxes.parse().map_err(|_| Error::parse(ln, "bad box count"))?;
            let mut classes = vec![Vec::new(); m];
            for _ in 0..n_boxes {
                let (l, line) = lines
                    .next()
                    .ok_or_else(|| Error::parse(ln, "explicit partition is missing boxes"))?;
                let f: Vec<&str> = line.split_whitespace().collect();
                if f.first() != Some(&"box") || f.len() < 2 {
                    return Err(Error::parse(l, "expected `box <class> ...`"));
                }
                let class: usize = f[1].parse().map_err(|_| Error::parse(l, "bad class index"))?;
                if class >= m {
                    return Err(Error::parse(l, format!("class {class} out of range")));
                }
                classes[class].push(parse_bounds(&f[2..], l)?);
            }
            Partition::explicit(bounds, classes).map_err(|e| Error::parse(ln, e.to_string()))
        }
        _ => Err(Error::parse(ln, "expected `partition grid` or `partition explicit <m> <boxes>`")),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub state: EnvState,
    /// Classes claiming the state: empty for a hole, several for an overlap.
    pub claimants: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionReport {
    pub samples: usize,
    pub violations: Vec<Violation>,
}

impl PartitionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Sample states uniformly in the bounds and check that exactly one class
/// claims each of them.
pub fn validate_partition(p: &Partition, n_samples: usize, seed: u64) -> Result<PartitionReport> {
    if n_samples == 0 {
        return Err(Error::Domain("validate_partition needs n_samples >= 1".into()));
    }
    let mut rng = rng::stream(seed, rng::tag::VALIDATION, 0);
    let mut violations = Vec::new();
    for _ in 0..n_samples {
        let s = p.bounds().sample(&mut rng);
        let claimants = p.claimants(&s);
        if claimants.len() != 1 {
            violations.push(Violation { state: s, claimants });
        }
    }
    Ok(PartitionReport {
        samples: n_samples,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_box(lx: f64, hx: f64, ly: f64, hy: f64) -> Bounds {
        Bounds::new(vec![lx, ly], vec![hx, hy]).unwrap()
    }

    #[test]
    fn grid_class_counts() {
        assert_eq!(grid_partition(Bounds::unit(2), &[2, 2]).unwrap().class_count(), 4);
        let pinball = Bounds::new(vec![0.0, 0.0, -1.0, -1.0], vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(grid_partition(pinball, &[4, 3, 1, 1]).unwrap().class_count(), 12);
        assert_eq!(grid_partition(Bounds::unit(2), &[1, 1]).unwrap().class_count(), 1);
        assert!(grid_partition(Bounds::unit(2), &[2, 0]).is_err());
    }

    #[test]
    fn grid_lookup_examples() {
        let p = grid_partition(Bounds::unit(2), &[2, 2]).unwrap();
        assert_eq!(p.class_index(&[0.25, 0.25]), 0);
        assert_eq!(p.class_index(&[0.75, 0.25]), 1);
        assert_eq!(p.class_index(&[0.5, 0.25]), 1);
        assert_eq!(p.clamped_lookups(), 0);
        assert_eq!(p.class_index(&[1.0 + 1e-12, 0.9]), 3);
        assert_eq!(p.clamped_lookups(), 1);
    }

    #[test]
    fn grid_partitions_always_validate() {
        let p = grid_partition(Bounds::unit(3), &[3, 1, 2]).unwrap();
        assert!(validate_partition(&p, 500, 1).unwrap().passed());
    }

    #[test]
    fn overlapping_explicit_partition_fails_with_witnesses() {
        let p = Partition::explicit(
            Bounds::unit(2),
            vec![vec![unit_box(0.0, 0.6, 0.0, 1.0)], vec![unit_box(0.4, 1.0, 0.0, 1.0)]],
        )
        .unwrap();
        let report = validate_partition(&p, 2000, 3).unwrap();
        assert!(!report.passed());
        assert!(report.violations.iter().all(|v| v.claimants == vec![0, 1]));
        assert!(report.violations.iter().all(|v| v.state[0] >= 0.4 && v.state[0] < 0.6));
    }

    #[test]
    fn explicit_partition_with_hole_fails() {
        let p = Partition::explicit(
            Bounds::unit(2),
            vec![vec![unit_box(0.0, 0.4, 0.0, 1.0)], vec![unit_box(0.6, 1.0, 0.0, 1.0)]],
        )
        .unwrap();
        let report = validate_partition(&p, 2000, 4).unwrap();
        assert!(!report.passed());
        assert!(report.violations.iter().all(|v| v.claimants.is_empty()));
        // Lookups in the hole clamp to the nearest class.
        assert_eq!(p.class_index(&[0.45, 0.5]), 0);
        assert_eq!(p.class_index(&[0.55, 0.5]), 1);
        assert_eq!(p.clamped_lookups(), 2);
    }

    #[test]
    fn partition_text_round_trip() {
        let g = grid_partition(Bounds::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap(), &[4, 3]).unwrap();
        let e = Partition::explicit(
            Bounds::unit(2),
            vec![
                vec![unit_box(0.0, 0.5, 0.0, 1.0)],
                vec![unit_box(0.5, 1.0, 0.0, 0.5), unit_box(0.5, 1.0, 0.5, 1.0)],
            ],
        )
        .unwrap();
        for p in [g, e] {
            let text = p.to_text();
            let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
            assert_eq!(parse_partition(&mut lines).unwrap(), p);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn grid_lookup_matches_floor_arithmetic(
            nx in 1usize..7, ny in 1usize..7,
            x in 0.0f64..1.0, y in -2.0f64..3.0,
        ) {
            let bounds = Bounds::new(vec![0.0, -2.0], vec![1.0, 3.0]).unwrap();
            let p = grid_partition(bounds, &[nx, ny]).unwrap();
            let ix = ((x * nx as f64).floor() as usize).min(nx - 1);
            let iy = (((y + 2.0) / 5.0 * ny as f64).floor() as usize).min(ny - 1);
            prop_assert_eq!(p.class_index(&[x, y]), ix + nx * iy);
        }
    }
}
