//! Two-objective Pareto fronts (minimization), exact hypervolume and
//! frontier comparison.

use std::fmt;

use crate::error::{Error, Result};

pub type Point2 = [f64; 2];

/// Reference point for objectives normalized by the cell count.
pub const REFERENCE_POINT: Point2 = [1.05, 1.05];

/// `a` is no worse than `b` in both objectives and better in at least one.
pub fn dominates(a: &Point2, b: &Point2) -> bool {
    a[0] <= b[0] && a[1] <= b[1] && (a[0] < b[0] || a[1] < b[1])
}

/// Non-dominated points with a payload each, sorted by the first objective.
///
/// Along that order the second objective is strictly decreasing.
#[derive(Clone, Debug, PartialEq)]
pub struct ParetoFront<T = ()> {
    points: Vec<Point2>,
    payloads: Vec<T>,
}

impl<T> Default for ParetoFront<T> {
    fn default() -> Self {
        Self { points: Vec::new(), payloads: Vec::new() }
    }
}

impl<T> ParetoFront<T> {
    /// Exact non-dominated subset of `items`. Duplicate points collapse to the
    /// earliest one; non-finite points are dropped.
    pub fn from_items<I: IntoIterator<Item = (Point2, T)>>(items: I) -> Self {
        let mut items: Vec<(usize, Point2, T)> = items
            .into_iter()
            .enumerate()
            .filter(|(_, (p, _))| p[0].is_finite() && p[1].is_finite())
            .map(|(i, (p, t))| (i, p, t))
            .collect();
        items.sort_by(|a, b| a.1[0].total_cmp(&b.1[0]).then(a.1[1].total_cmp(&b.1[1])).then(a.0.cmp(&b.0)));
        let mut front = Self::default();
        let mut best = f64::INFINITY;
        for (_, p, t) in items {
            if p[1] < best {
                best = p[1];
                front.points.push(p);
                front.payloads.push(t);
            }
        }
        front
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn payloads(&self) -> &[T] {
        &self.payloads
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point2, &T)> {
        self.points.iter().zip(&self.payloads)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Adds a point if nothing on the front weakly dominates it, evicting the
    /// points it dominates. Returns whether the front changed.
    pub fn insert(&mut self, point: Point2, payload: T) -> bool {
        if !(point[0].is_finite() && point[1].is_finite()) {
            return false;
        }
        if self.points.iter().any(|p| p[0] <= point[0] && p[1] <= point[1]) {
            return false;
        }
        let mut i = 0;
        while i < self.points.len() {
            if dominates(&point, &self.points[i]) {
                self.points.remove(i);
                self.payloads.remove(i);
            } else {
                i += 1;
            }
        }
        let at = self.points.partition_point(|p| p[0] < point[0]);
        self.points.insert(at, point);
        self.payloads.insert(at, payload);
        true
    }

    pub fn hypervolume(&self, reference: &Point2) -> f64 {
        staircase_area(&self.points, reference)
    }
}

/// Non-dominated subset of bare points.
pub fn non_dominated(points: &[Point2]) -> ParetoFront {
    ParetoFront::from_items(points.iter().map(|&p| (p, ())))
}

/// Area dominated by `points` inside the box bounded by `reference`.
///
/// Dominated points and points outside the reference box add nothing, so any
/// point set can be passed.
pub fn hypervolume_2d(points: &[Point2], reference: &Point2) -> f64 {
    staircase_area(non_dominated(points).points(), reference)
}

// `front` must be sorted by the first objective and mutually non-dominated.
fn staircase_area(front: &[Point2], reference: &Point2) -> f64 {
    let mut area = 0.0;
    let mut ceiling = reference[1];
    for p in front {
        if p[0] >= reference[0] {
            break;
        }
        if p[1] < ceiling {
            area += (reference[0] - p[0]) * (ceiling - p[1]);
            ceiling = p[1];
        }
    }
    area
}

/// Axis-aligned box `[lower, upper)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Box2 {
    pub lower: Point2,
    pub upper: Point2,
}

impl Box2 {
    pub fn area(&self) -> f64 {
        (self.upper[0] - self.lower[0]).max(0.0) * (self.upper[1] - self.lower[1]).max(0.0)
    }

    pub fn contains(&self, p: &Point2) -> bool {
        (0..2).all(|k| p[k] >= self.lower[k] && p[k] < self.upper[k])
    }
}

/// Disjoint boxes covering the region dominated by `front` and bounded by
/// `reference`: one vertical strip per front point, from that point to the
/// next point's first objective (or the reference).
pub fn pareto_boxes(front: &[Point2], reference: &Point2) -> Result<Vec<Box2>> {
    if let Some(p) = front.iter().find(|p| !(p[0] < reference[0] && p[1] < reference[1])) {
        return Err(Error::InvalidArgument(format!(
            "reference {reference:?} is not strictly worse than front point {p:?}"
        )));
    }
    let sorted = non_dominated(front);
    let pts = sorted.points();
    Ok(pts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let right = pts.get(i + 1).map_or(reference[0], |q| q[0]);
            Box2 { lower: *p, upper: [right, reference[1]] }
        })
        .collect())
}

/// One method's front as input to [`compare_frontiers`].
#[derive(Clone, Debug)]
pub struct NamedFront {
    pub name: String,
    pub points: Vec<Point2>,
    pub evaluations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodSummary {
    pub name: String,
    pub hypervolume: f64,
    pub evaluations: usize,
    pub front_size: usize,
}

/// Improvement of `method` over `baseline`, both as percentages.
#[derive(Clone, Debug, PartialEq)]
pub struct PairwiseImprovement {
    pub method: String,
    pub baseline: String,
    /// Mean gap in the second objective, interpolated along the first, times 100.
    /// Objectives are cell fractions, so this reads as percentage points of area.
    pub mean_gap_pct: f64,
    /// `100 * (HV_method / HV_baseline - 1)`.
    pub hypervolume_ratio_pct: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrontierReport {
    pub reference: Point2,
    pub methods: Vec<MethodSummary>,
    pub pairwise: Vec<PairwiseImprovement>,
    /// Names of fronts skipped for having no points.
    pub excluded: Vec<String>,
}

const GAP_GRID: usize = 101;

/// Hypervolume per method and every ordered pair's improvement.
pub fn compare_frontiers(fronts: &[NamedFront], reference: &Point2) -> Result<FrontierReport> {
    if fronts.len() < 2 {
        return Err(Error::InvalidArgument("need at least two fronts to compare".into()));
    }
    let mut excluded = Vec::new();
    let mut kept = Vec::new();
    for f in fronts {
        let front = non_dominated(&f.points);
        if front.is_empty() {
            excluded.push(f.name.clone());
        } else {
            kept.push((f, front));
        }
    }
    let methods: Vec<MethodSummary> = kept
        .iter()
        .map(|(f, front)| MethodSummary {
            name: f.name.clone(),
            hypervolume: front.hypervolume(reference),
            evaluations: f.evaluations,
            front_size: front.len(),
        })
        .collect();
    let mut pairwise = Vec::new();
    for (i, (fa, a)) in kept.iter().enumerate() {
        for (j, (fb, b)) in kept.iter().enumerate() {
            if i == j {
                continue;
            }
            let (hva, hvb) = (methods[i].hypervolume, methods[j].hypervolume);
            let ratio = if hvb > 0.0 { 100.0 * (hva / hvb - 1.0) } else if hva > 0.0 { f64::INFINITY } else { 0.0 };
            pairwise.push(PairwiseImprovement {
                method: fa.name.clone(),
                baseline: fb.name.clone(),
                mean_gap_pct: 100.0 * mean_gap(a.points(), b.points()),
                hypervolume_ratio_pct: ratio,
            });
        }
    }
    Ok(FrontierReport { reference: *reference, methods, pairwise, excluded })
}

/// Mean of `interp(b) - interp(a)` over a grid on the shared first-objective
/// range (the union range when the fronts do not overlap).
fn mean_gap(a: &[Point2], b: &[Point2]) -> f64 {
    let (a_lo, a_hi) = (a[0][0], a[a.len() - 1][0]);
    let (b_lo, b_hi) = (b[0][0], b[b.len() - 1][0]);
    let (mut lo, mut hi) = (a_lo.max(b_lo), a_hi.min(b_hi));
    if lo >= hi {
        lo = a_lo.min(b_lo);
        hi = a_hi.max(b_hi);
    }
    let n = if hi > lo { GAP_GRID } else { 1 };
    let total: f64 = (0..n)
        .map(|k| {
            let x = if n == 1 { lo } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 };
            interpolate(b, x) - interpolate(a, x)
        })
        .sum();
    total / n as f64
}

/// Piecewise-linear second objective at `x`, flat beyond the end points.
fn interpolate(front: &[Point2], x: f64) -> f64 {
    let first = front[0];
    let last = front[front.len() - 1];
    if x <= first[0] {
        return first[1];
    }
    if x >= last[0] {
        return last[1];
    }
    let k = front.partition_point(|p| p[0] <= x);
    let (p, q) = (front[k - 1], front[k]);
    p[1] + (q[1] - p[1]) * (x - p[0]) / (q[0] - p[0])
}

impl fmt::Display for FrontierReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "reference point ({}, {})", self.reference[0], self.reference[1])?;
        writeln!(f, "{:<12} {:>12} {:>12} {:>8}", "method", "hypervolume", "evaluations", "front")?;
        for m in &self.methods {
            writeln!(f, "{:<12} {:>12.6} {:>12} {:>8}", m.name, m.hypervolume, m.evaluations, m.front_size)?;
        }
        if !self.pairwise.is_empty() {
            writeln!(f)?;
            writeln!(f, "{:<12} {:<12} {:>14} {:>14}", "method", "over", "mean gap (pp)", "HV ratio (%)")?;
            for p in &self.pairwise {
                writeln!(
                    f,
                    "{:<12} {:<12} {:>14.3} {:>14.3}",
                    p.method, p.baseline, p.mean_gap_pct, p.hypervolume_ratio_pct
                )?;
            }
        }
        for name in &self.excluded {
            writeln!(f, "note: front '{name}' is empty and was excluded")?;
        }
        Ok(())
    }
}

/// Hypervolume of the running front after each point in turn.
pub fn hypervolume_trace<I: IntoIterator<Item = Point2>>(points: I, reference: &Point2) -> Vec<f64> {
    let mut front = ParetoFront::<()>::default();
    points
        .into_iter()
        .map(|p| {
            front.insert(p, ());
            front.hypervolume(reference)
        })
        .collect()
}
