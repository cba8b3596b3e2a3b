//! Score-driven construction of hard aggregation schemes.
//!
//! A scoring function assigns each state a real value (or a small vector of
//! them). Partitioning the observed score range into intervals groups states
//! with similar scores into cells, which become the disaggregation sets of a
//! hard aggregation scheme. The quality of such a scheme is governed by the
//! quantization error — the largest score spread within any cell — together
//! with how tightly scores track optimal costs.

use crate::aggregation::{build_hard_aggregation, solve_aggregate_vi, AggregationScheme};
use crate::error::{Error, Result};
use crate::mdp::Mdp;

/// Ordered intervals covering an observed score range: every interval is
/// half-open `[lo, hi)` except the last, which is closed.
#[derive(Clone, Debug)]
pub struct IntervalPartition {
    edges: Vec<f64>,
}

impl IntervalPartition {
    /// Intervals with the given interior breakpoints over `[lo, hi]`.
    /// Breakpoints are sorted and deduplicated; those outside `(lo, hi)`
    /// produce empty intervals that callers drop after assignment.
    pub fn from_breakpoints(lo: f64, hi: f64, breakpoints: &[f64]) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::InvalidArgument(format!(
                "invalid score range [{lo}, {hi}]"
            )));
        }
        let mut edges = vec![lo];
        let mut inner: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|b| b.is_finite())
            .collect();
        if inner.len() != breakpoints.len() {
            return Err(Error::InvalidArgument(
                "breakpoints must be finite".into(),
            ));
        }
        inner.sort_by(f64::total_cmp);
        inner.dedup();
        edges.extend(inner.into_iter().map(|b| b.clamp(lo, hi)));
        edges.push(hi);
        edges.dedup();
        if edges.len() == 1 {
            // Degenerate range: a single closed point interval.
            edges.push(hi);
        }
        Ok(IntervalPartition { edges })
    }

    /// Equal-width intervals over `[lo, hi]`.
    pub fn equal_width(lo: f64, hi: f64, q: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidArgument("need at least one interval".into()));
        }
        let breaks: Vec<f64> = (1..q)
            .map(|k| lo + (hi - lo) * k as f64 / q as f64)
            .collect();
        Self::from_breakpoints(lo, hi, &breaks)
    }

    /// Equal-frequency intervals: breakpoints at the `k/q` quantiles of the
    /// observed values, so cells carry near-equal populations. Duplicate
    /// quantiles merge, so fewer than `q` intervals can result.
    pub fn equal_frequency(values: &[f64], q: usize) -> Result<Self> {
        if values.is_empty() || q == 0 {
            return Err(Error::InvalidArgument(
                "need values and at least one interval".into(),
            ));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let lo = sorted[0];
        let hi = sorted[sorted.len() - 1];
        // Split between adjacent order statistics so that two-valued data
        // still separates: [0, 0, 1, 1] with q = 2 breaks at 0.5, not at 1.
        let breaks: Vec<f64> = (1..q)
            .map(|k| {
                let idx = ((sorted.len() * k) / q).max(1);
                0.5 * (sorted[idx - 1] + sorted[idx])
            })
            .collect();
        Self::from_breakpoints(lo, hi, &breaks)
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Interval index of `v`. Values outside the covered range clamp to the
    /// first or last interval, which lets fitted partitions classify
    /// out-of-sample scores.
    pub fn locate(&self, v: f64) -> usize {
        let q = self.len();
        if v < self.edges[0] {
            return 0;
        }
        for l in 0..q {
            if v < self.edges[l + 1] {
                return l;
            }
        }
        q - 1
    }
}

/// How to build the intervals of a scored partition.
#[derive(Clone, Debug)]
pub enum CellSpec {
    /// Equal-frequency intervals with the given target cell count.
    Quantile(usize),
    /// Equal-width intervals with the given cell count.
    EqualWidth(usize),
    /// Explicit interior breakpoints.
    Breakpoints(Vec<f64>),
}

/// A hard aggregation scheme derived from scores, plus bookkeeping about how
/// the cells were formed.
#[derive(Clone, Debug)]
pub struct ScorePartition {
    pub scheme: AggregationScheme,
    /// Cell index per state (aligned with the scheme's disaggregation sets).
    pub labels: Vec<usize>,
    /// Requested cell count before empties were dropped.
    pub requested: usize,
    /// Raw interval index backing each final cell.
    pub kept_cells: Vec<usize>,
    /// True when the final cell count fell below the request (duplicate
    /// quantiles or empty intervals, e.g. an all-equal score vector).
    pub collapsed: bool,
}

fn finite_scores(scores: &[f64], n: usize) -> Result<()> {
    if scores.len() != n {
        return Err(Error::InvalidArgument(format!(
            "expected {n} scores, got {}",
            scores.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "scores must be finite, found {bad}"
        )));
    }
    Ok(())
}

/// Partitions states by a scalar scoring function into a hard aggregation
/// scheme with uniform disaggregation weights. Empty cells are dropped and
/// the remaining cells reindexed in score order.
pub fn partition_by_scores(n: usize, scores: &[f64], spec: &CellSpec) -> Result<ScorePartition> {
    finite_scores(scores, n)?;
    let (intervals, requested) = match spec {
        CellSpec::Quantile(q) => (IntervalPartition::equal_frequency(scores, *q)?, *q),
        CellSpec::EqualWidth(q) => {
            let (lo, hi) = score_range(scores);
            (IntervalPartition::equal_width(lo, hi, *q)?, *q)
        }
        CellSpec::Breakpoints(b) => {
            let (lo, hi) = score_range(scores);
            let p = IntervalPartition::from_breakpoints(lo, hi, b)?;
            let q = p.len();
            (p, q)
        }
    };
    let raw_labels: Vec<usize> = scores.iter().map(|&v| intervals.locate(v)).collect();
    group_cells(n, &raw_labels, intervals.len(), requested)
}

fn score_range(scores: &[f64]) -> (f64, f64) {
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

fn group_cells(
    n: usize,
    raw_labels: &[usize],
    raw_cells: usize,
    requested: usize,
) -> Result<ScorePartition> {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); raw_cells];
    for (idx, &cell) in raw_labels.iter().enumerate() {
        members[cell].push(idx + 1);
    }
    let kept_cells: Vec<usize> = (0..raw_cells).filter(|&c| !members[c].is_empty()).collect();
    let mut remap = vec![usize::MAX; raw_cells];
    for (new, &old) in kept_cells.iter().enumerate() {
        remap[old] = new;
    }
    let partition: Vec<Vec<usize>> = kept_cells.iter().map(|&c| members[c].clone()).collect();
    let scheme = build_hard_aggregation(n, &partition, None)?;
    let labels: Vec<usize> = raw_labels.iter().map(|&c| remap[c]).collect();
    let collapsed = kept_cells.len() < requested;
    Ok(ScorePartition {
        scheme,
        labels,
        requested,
        kept_cells,
        collapsed,
    })
}

/// Largest score spread within any cell.
pub fn quantization_error(scores: &[f64], sets: &[Vec<usize>]) -> f64 {
    let mut delta = 0.0_f64;
    for set in sets {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &i in set {
            lo = lo.min(scores[i - 1]);
            hi = hi.max(scores[i - 1]);
        }
        if !set.is_empty() {
            delta = delta.max(hi - lo);
        }
    }
    delta
}

/// Outcome of [`check_score_bound`].
#[derive(Clone, Debug)]
pub struct ScoreBoundReport {
    /// Smallest slope certified by the exhaustive within-cell pair scan.
    pub beta: f64,
    /// Quantization error of the scores on the cells.
    pub delta: f64,
    /// `beta * delta / (1 - alpha)`; `None` when the slope hypothesis failed.
    pub bound: Option<f64>,
    /// Largest `|J*(i) - r[l]|` over cells.
    pub max_gap: f64,
    /// True when every within-cell pair with equal scores also has equal
    /// optimal costs (up to the scan tolerance), i.e. a finite slope exists.
    pub hypothesis_ok: bool,
    /// True when the hypothesis held and every gap obeyed the bound.
    pub ok: bool,
}

const SCAN_TOL: f64 = 1e-9;

/// Checks the scoring-function error bound on a hard scheme built from
/// `scores`: if, within every cell, optimal costs vary at most `beta` times
/// as fast as scores, then every state's optimal cost lies within
/// `beta * delta / (1 - alpha)` of its cell value. The slope `beta` is
/// certified by an exhaustive within-cell pair scan of the exact optimal
/// costs (a caller-supplied `beta` is accepted only if the scan confirms it).
/// A zero quantization error therefore certifies an exact lift up to the
/// scan tolerance.
pub fn check_score_bound(
    mdp: &Mdp,
    scores: &[f64],
    scheme: &AggregationScheme,
    beta: Option<f64>,
    slack: f64,
) -> Result<ScoreBoundReport> {
    finite_scores(scores, mdp.n())?;
    if mdp.is_terminating() {
        return Err(Error::InvalidArgument(
            "the scoring error bound applies to discounted models".into(),
        ));
    }
    let j_star = mdp.solve_exact_vi(1e-12)?.values;
    let sets = scheme.footprint_sets()?;
    let mut scanned_beta = 0.0_f64;
    let mut hypothesis_ok = true;
    for set in &sets {
        for (a, &i) in set.iter().enumerate() {
            for &j in &set[a + 1..] {
                let dv = (scores[i - 1] - scores[j - 1]).abs();
                let dj = (j_star[i - 1] - j_star[j - 1]).abs();
                if dv > 0.0 {
                    scanned_beta = scanned_beta.max(dj / dv);
                } else if dj > SCAN_TOL {
                    hypothesis_ok = false;
                }
            }
        }
    }
    let beta = match beta {
        Some(asserted) => {
            if asserted + SCAN_TOL < scanned_beta {
                hypothesis_ok = false;
            }
            scanned_beta.max(asserted)
        }
        None => scanned_beta,
    };
    let delta = quantization_error(scores, &sets);
    let r = solve_aggregate_vi(mdp, scheme, 1e-12)?.r;
    let mut max_gap = 0.0_f64;
    for (l, set) in sets.iter().enumerate() {
        for &i in set {
            max_gap = max_gap.max((j_star[i - 1] - r[l]).abs());
        }
    }
    if !hypothesis_ok {
        return Ok(ScoreBoundReport {
            beta: scanned_beta,
            delta,
            bound: None,
            max_gap,
            hypothesis_ok: false,
            ok: false,
        });
    }
    let bound = beta * delta / (1.0 - mdp.alpha());
    let ok = max_gap <= bound + slack;
    Ok(ScoreBoundReport {
        beta,
        delta,
        bound: Some(bound),
        max_gap,
        hypothesis_ok: true,
        ok,
    })
}

/// Partitions scores separately inside each coarse set: the final cells are
/// the per-set score intervals, so states in different coarse sets never
/// share a cell. `coarse_sets` must partition `1..=n`.
pub fn partition_by_scores_within_sets(
    n: usize,
    scores: &[f64],
    coarse_sets: &[Vec<usize>],
    spec: &CellSpec,
) -> Result<ScorePartition> {
    finite_scores(scores, n)?;
    let covered: usize = coarse_sets.iter().map(|s| s.len()).sum();
    let mut seen = vec![false; n + 1];
    for &i in coarse_sets.iter().flatten() {
        if i == 0 || i > n || seen[i] {
            return Err(Error::InvalidArgument(
                "coarse sets must partition the state space".into(),
            ));
        }
        seen[i] = true;
    }
    if covered != n {
        return Err(Error::InvalidArgument(
            "coarse sets must partition the state space".into(),
        ));
    }
    let mut raw_labels = vec![0usize; n];
    let mut next_cell = 0;
    let mut requested = 0;
    for set in coarse_sets {
        let local: Vec<f64> = set.iter().map(|&i| scores[i - 1]).collect();
        let (intervals, req) = match spec {
            CellSpec::Quantile(q) => (IntervalPartition::equal_frequency(&local, *q)?, *q),
            CellSpec::EqualWidth(q) => {
                let (lo, hi) = score_range(&local);
                (IntervalPartition::equal_width(lo, hi, *q)?, *q)
            }
            CellSpec::Breakpoints(b) => {
                let (lo, hi) = score_range(&local);
                let p = IntervalPartition::from_breakpoints(lo, hi, b)?;
                let len = p.len();
                (p, len)
            }
        };
        requested += req;
        for &i in set {
            raw_labels[i - 1] = next_cell + intervals.locate(scores[i - 1]);
        }
        next_cell += intervals.len();
    }
    group_cells(n, &raw_labels, next_cell, requested)
}

/// A product-grid partition over vector scores: one interval partition per
/// dimension, cells indexed by the tuple of per-dimension intervals, empty
/// cells dropped.
pub fn partition_by_score_vector(
    n: usize,
    scores: &[Vec<f64>],
    per_dim: &[IntervalPartition],
) -> Result<ScorePartition> {
    if scores.len() != n {
        return Err(Error::InvalidArgument(format!(
            "expected {n} score vectors, got {}",
            scores.len()
        )));
    }
    let dims = per_dim.len();
    if dims == 0 {
        return Err(Error::InvalidArgument("need at least one score dimension".into()));
    }
    if scores.iter().any(|row| row.len() != dims) {
        return Err(Error::InvalidArgument(format!(
            "every score vector must have {dims} entries"
        )));
    }
    if scores.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("scores must be finite".into()));
    }
    let mut total_cells: usize = 1;
    for p in per_dim {
        total_cells = total_cells.saturating_mul(p.len());
    }
    let raw_labels: Vec<usize> = scores
        .iter()
        .map(|row| {
            let mut cell = 0;
            for (dim, p) in per_dim.iter().enumerate() {
                cell = cell * p.len() + p.locate(row[dim]);
            }
            cell
        })
        .collect();
    // Only materialize the cells that occur.
    let mut occupied: Vec<usize> = raw_labels.clone();
    occupied.sort_unstable();
    occupied.dedup();
    let mut remap = std::collections::HashMap::new();
    for (new, &old) in occupied.iter().enumerate() {
        remap.insert(old, new);
    }
    let compact: Vec<usize> = raw_labels.iter().map(|c| remap[c]).collect();
    let mut partition = group_cells(n, &compact, occupied.len(), total_cells)?;
    partition.kept_cells = occupied;
    Ok(partition)
}

/// Per-dimension equal-frequency partitions fitted on (a subset of) the
/// score vectors; `fit_on` selects the sample rows (1-based state numbers),
/// defaulting to all of them.
pub fn quantile_grid(
    scores: &[Vec<f64>],
    q_per_dim: usize,
    fit_on: Option<&[usize]>,
) -> Result<Vec<IntervalPartition>> {
    if scores.is_empty() {
        return Err(Error::InvalidArgument("need score vectors".into()));
    }
    let dims = scores[0].len();
    let mut grid = Vec::with_capacity(dims);
    for dim in 0..dims {
        let column: Vec<f64> = match fit_on {
            Some(rows) => rows.iter().map(|&i| scores[i - 1][dim]).collect(),
            None => scores.iter().map(|row| row[dim]).collect(),
        };
        grid.push(IntervalPartition::equal_frequency(&column, q_per_dim)?);
    }
    Ok(grid)
}
