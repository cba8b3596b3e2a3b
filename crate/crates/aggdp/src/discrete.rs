//! Aggregation-guided construction for finite discrete optimization.
//!
//! A problem over N-component solutions is viewed as an N-stage decision
//! process: stage m fixes component m, and the full solution is charged its
//! terminal cost at the end. Heuristic completions score partial solutions;
//! the score vectors bucket partial solutions into per-stage cells; a
//! backward pass prices the cells; and solutions are then assembled stage by
//! stage against the cell prices (one- or two-step lookahead), with rollout
//! and a best-seen fallback as baselines.

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::scoring::{partition_by_score_vector, quantile_grid, IntervalPartition};
use serde::Serialize;
use std::collections::HashMap;

/// A finite minimization problem over feasible N-component tuples.
///
/// Implementations must keep the feasibility predicate *extendable*: every
/// feasible partial tuple can be completed to a feasible full tuple. The
/// drivers report an error when they catch a violation.
pub trait DiscreteProblem {
    /// Number of components N ≥ 1.
    fn num_stages(&self) -> usize;
    /// Candidate values for the component at `stage` (0-based); finite and
    /// returned in ascending order.
    fn domain(&self, stage: usize) -> Vec<u32>;
    /// Whether a partial tuple (length ≤ N) violates no constraint.
    fn is_feasible(&self, prefix: &[u32]) -> bool;
    /// Cost of a full feasible tuple; minimized.
    fn terminal_cost(&self, solution: &[u32]) -> f64;
}

/// A procedure completing any feasible partial tuple to a full feasible one.
pub trait CompletionHeuristic {
    fn name(&self) -> &str;
    fn complete(&self, problem: &dyn DiscreteProblem, prefix: &[u32]) -> Vec<u32>;
}

/// Extends with the fixed value where feasible, else the smallest feasible
/// candidate. With value 0 this is plain lexicographic completion. Being a
/// deterministic one-step rule, it is sequentially consistent: completing a
/// prefix and completing that prefix plus the rule's own first move agree.
pub struct ConstantCompletion(pub u32);

impl CompletionHeuristic for ConstantCompletion {
    fn name(&self) -> &str {
        "constant"
    }

    fn complete(&self, problem: &dyn DiscreteProblem, prefix: &[u32]) -> Vec<u32> {
        let mut tuple = prefix.to_vec();
        while tuple.len() < problem.num_stages() {
            let stage = tuple.len();
            tuple.push(self.0);
            if problem.is_feasible(&tuple) && problem.domain(stage).contains(&self.0) {
                continue;
            }
            tuple.pop();
            let Some(next) = feasible_moves(problem, &tuple).into_iter().next() else {
                // Dead end: leave the tuple short; the caller reports it.
                return tuple;
            };
            tuple.push(next);
        }
        tuple
    }
}

/// Greedy one-step rule: picks the candidate whose zero-completion has the
/// lowest terminal cost. Sequentially consistent for the same reason as
/// [`ConstantCompletion`].
pub struct GreedyCompletion;

impl CompletionHeuristic for GreedyCompletion {
    fn name(&self) -> &str {
        "greedy"
    }

    fn complete(&self, problem: &dyn DiscreteProblem, prefix: &[u32]) -> Vec<u32> {
        let probe = ConstantCompletion(0);
        let mut tuple = prefix.to_vec();
        while tuple.len() < problem.num_stages() {
            let mut best: Option<(f64, u32)> = None;
            for v in feasible_moves(problem, &tuple) {
                tuple.push(v);
                let completion = probe.complete(problem, &tuple);
                tuple.pop();
                if completion.len() != problem.num_stages() {
                    continue;
                }
                let cost = problem.terminal_cost(&completion);
                if best.map_or(true, |(c, _)| cost < c) {
                    best = Some((cost, v));
                }
            }
            let Some((_, v)) = best else {
                return tuple;
            };
            tuple.push(v);
        }
        tuple
    }
}

/// Feasible candidates for the next component, ascending.
pub fn feasible_moves(problem: &dyn DiscreteProblem, prefix: &[u32]) -> Vec<u32> {
    let stage = prefix.len();
    let mut domain = problem.domain(stage);
    domain.sort_unstable();
    domain.dedup();
    let mut tuple = prefix.to_vec();
    domain
        .into_iter()
        .filter(|&v| {
            tuple.push(v);
            let ok = problem.is_feasible(&tuple);
            tuple.pop();
            ok
        })
        .collect()
}

/// Cap on enumerated partial tuples per stage before sampling takes over.
pub const EXHAUSTIVE_CAP: usize = 100_000;

/// Enumerates every feasible partial tuple, stage by stage: entry `m` lists
/// the feasible (m+1)-component tuples. Errors when the problem has no
/// feasible solutions or the enumeration exceeds [`EXHAUSTIVE_CAP`] at some
/// stage.
pub fn dp_reformulate(problem: &dyn DiscreteProblem) -> Result<Vec<Vec<Vec<u32>>>> {
    let n = problem.num_stages();
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one stage".into()));
    }
    let mut stages: Vec<Vec<Vec<u32>>> = Vec::with_capacity(n);
    let mut frontier = vec![Vec::new()];
    for stage in 0..n {
        let mut next = Vec::new();
        for prefix in &frontier {
            for v in feasible_moves(problem, prefix) {
                let mut tuple = prefix.clone();
                tuple.push(v);
                next.push(tuple);
            }
            if next.len() > EXHAUSTIVE_CAP {
                return Err(Error::InvalidArgument(format!(
                    "more than {EXHAUSTIVE_CAP} partial tuples at stage {stage}"
                )));
            }
        }
        if next.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "no feasible tuples at stage {stage}"
            )));
        }
        stages.push(next.clone());
        frontier = next;
    }
    Ok(stages)
}

/// Exhaustive minimization over all feasible full tuples (the test oracle).
pub fn brute_force_optimum(problem: &dyn DiscreteProblem) -> Result<(Vec<u32>, f64)> {
    let stages = dp_reformulate(problem)?;
    let full = stages.last().unwrap();
    let mut best: Option<(Vec<u32>, f64)> = None;
    for tuple in full {
        let cost = problem.terminal_cost(tuple);
        if best.as_ref().map_or(true, |(_, c)| cost < *c) {
            best = Some((tuple.clone(), cost));
        }
    }
    Ok(best.unwrap())
}

/// Best full solution seen anywhere during a run (every heuristic completion
/// plus every constructed solution is offered).
#[derive(Clone, Debug, Default)]
pub struct SolutionPool {
    best: Option<(Vec<u32>, f64)>,
}

impl SolutionPool {
    pub fn offer(&mut self, solution: &[u32], cost: f64) {
        if self.best.as_ref().map_or(true, |(_, c)| cost < *c) {
            self.best = Some((solution.to_vec(), cost));
        }
    }

    pub fn best(&self) -> Option<(&[u32], f64)> {
        self.best.as_ref().map(|(s, c)| (s.as_slice(), *c))
    }
}

/// Runs every heuristic on the partial tuple and returns the terminal costs
/// of their completions — the tuple's score vector.
pub fn score_partial(
    problem: &dyn DiscreteProblem,
    heuristics: &[&dyn CompletionHeuristic],
    prefix: &[u32],
) -> Result<Vec<f64>> {
    let mut pool = SolutionPool::default();
    score_with_pool(problem, heuristics, prefix, &mut pool)
}

fn score_with_pool(
    problem: &dyn DiscreteProblem,
    heuristics: &[&dyn CompletionHeuristic],
    prefix: &[u32],
    pool: &mut SolutionPool,
) -> Result<Vec<f64>> {
    if heuristics.is_empty() {
        return Err(Error::InvalidArgument("need at least one heuristic".into()));
    }
    let n = problem.num_stages();
    let mut scores = Vec::with_capacity(heuristics.len());
    for h in heuristics {
        let completion = h.complete(problem, prefix);
        if completion.len() != n
            || completion[..prefix.len()] != *prefix
            || !problem.is_feasible(&completion)
        {
            return Err(Error::InvalidArgument(format!(
                "heuristic '{}' returned an invalid completion of {prefix:?}",
                h.name()
            )));
        }
        let cost = problem.terminal_cost(&completion);
        pool.offer(&completion, cost);
        scores.push(cost);
    }
    Ok(scores)
}

/// How sampled score vectors become cells at each stage.
#[derive(Clone, Copy, Debug)]
pub enum CellMode {
    /// One cell per distinct score vector (zero quantization error).
    Singleton,
    /// Equal-frequency intervals per score dimension, product cells.
    PerDim(usize),
}

/// How partial tuples are collected per stage.
#[derive(Clone, Copy, Debug)]
pub enum StageSampler {
    /// Enumerate everything; error past [`EXHAUSTIVE_CAP`].
    Exhaustive,
    /// Uniform random feasible walks, deduplicated.
    Random { per_stage: usize, seed: u64 },
    /// Exhaustive while it fits, random from the first stage that does not.
    Auto { per_stage: usize, seed: u64 },
}

/// One stage's sampled tuples and their cells.
pub struct StageCells {
    /// Sampled partial tuples in deterministic order.
    pub members: Vec<Vec<u32>>,
    /// Score vector per member.
    pub scores: Vec<Vec<f64>>,
    /// Member indices per cell (uniform disaggregation within a cell).
    pub cells: Vec<Vec<usize>>,
    /// Mean score vector per cell, for nearest-cell fallback.
    pub centroids: Vec<Vec<f64>>,
    lookup: CellLookup,
}

enum CellLookup {
    Exact(HashMap<Vec<u64>, usize>),
    Grid {
        per_dim: Vec<IntervalPartition>,
        kept: HashMap<usize, usize>,
    },
}

impl StageCells {
    /// Cell owning a score vector, if it maps cleanly.
    fn direct_cell(&self, score: &[f64]) -> Option<usize> {
        match &self.lookup {
            CellLookup::Exact(map) => map.get(&score_key(score)).copied(),
            CellLookup::Grid { per_dim, kept } => {
                let mut raw = 0;
                for (dim, p) in per_dim.iter().enumerate() {
                    raw = raw * p.len() + p.locate(score[dim]);
                }
                kept.get(&raw).copied()
            }
        }
    }

    /// Cell for a score vector, falling back to the nearest centroid (and
    /// counting the fallback) when the vector lies outside every cell.
    pub fn assign(&self, score: &[f64], fallbacks: &mut u64) -> usize {
        if let Some(cell) = self.direct_cell(score) {
            return cell;
        }
        *fallbacks += 1;
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (cell, centroid) in self.centroids.iter().enumerate() {
            let dist: f64 = centroid
                .iter()
                .zip(score)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if dist < best_dist {
                best = cell;
                best_dist = dist;
            }
        }
        best
    }
}

fn score_key(score: &[f64]) -> Vec<u64> {
    score.iter().map(|v| v.to_bits()).collect()
}

/// Per-stage cells over heuristic score vectors for stages 1..N-1 (full
/// tuples are priced by their terminal cost directly, so stage N needs no
/// cells).
pub struct StageAggregation {
    pub stages: Vec<StageCells>,
    /// True when every stage was enumerated exhaustively.
    pub exhaustive: bool,
}

/// Samples partial tuples per stage, scores them, and buckets them into
/// cells per the mode.
pub fn build_stage_aggregation(
    problem: &dyn DiscreteProblem,
    heuristics: &[&dyn CompletionHeuristic],
    sampler: StageSampler,
    mode: CellMode,
    pool: &mut SolutionPool,
) -> Result<StageAggregation> {
    let n = problem.num_stages();
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one stage".into()));
    }
    if feasible_moves(problem, &[]).is_empty() {
        return Err(Error::InvalidArgument("no feasible tuples at stage 0".into()));
    }
    let mut stages = Vec::new();
    let mut exhaustive_so_far = true;
    let mut all_exhaustive = true;
    let mut frontier: Vec<Vec<u32>> = vec![Vec::new()];
    for depth in 1..n {
        let (members, now_exhaustive) = match sampler {
            StageSampler::Exhaustive => (extend_all(problem, &frontier, depth)?, true),
            StageSampler::Random { per_stage, seed } => {
                (random_walks(problem, depth, per_stage, seed)?, false)
            }
            StageSampler::Auto { per_stage, seed } => {
                if exhaustive_so_far {
                    match extend_all(problem, &frontier, depth) {
                        Ok(m) => (m, true),
                        Err(_) => (random_walks(problem, depth, per_stage, seed)?, false),
                    }
                } else {
                    (random_walks(problem, depth, per_stage, seed)?, false)
                }
            }
        };
        exhaustive_so_far = now_exhaustive;
        all_exhaustive &= now_exhaustive;
        if members.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "no samples at stage {depth}"
            )));
        }
        let mut scores = Vec::with_capacity(members.len());
        for member in &members {
            scores.push(score_with_pool(problem, heuristics, member, pool)?);
        }
        stages.push(make_cells(&members, &scores, mode)?);
        frontier = members;
    }
    Ok(StageAggregation {
        stages,
        exhaustive: all_exhaustive,
    })
}

fn extend_all(
    problem: &dyn DiscreteProblem,
    frontier: &[Vec<u32>],
    stage: usize,
) -> Result<Vec<Vec<u32>>> {
    let mut next = Vec::new();
    for prefix in frontier {
        for v in feasible_moves(problem, prefix) {
            let mut tuple = prefix.clone();
            tuple.push(v);
            next.push(tuple);
        }
        if next.len() > EXHAUSTIVE_CAP {
            return Err(Error::InvalidArgument(format!(
                "more than {EXHAUSTIVE_CAP} partial tuples at stage {stage}"
            )));
        }
    }
    Ok(next)
}

fn random_walks(
    problem: &dyn DiscreteProblem,
    depth: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<u32>>> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample budget must be positive".into()));
    }
    let mut rng = SplitMix64::stream(seed, depth as u64);
    let mut seen = std::collections::HashSet::new();
    let mut members = Vec::new();
    for _ in 0..count {
        let mut tuple = Vec::with_capacity(depth);
        for _ in 0..depth {
            let moves = feasible_moves(problem, &tuple);
            if moves.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "feasible prefix {tuple:?} has no feasible extension"
                )));
            }
            tuple.push(moves[rng.below(moves.len())]);
        }
        if seen.insert(tuple.clone()) {
            members.push(tuple);
        }
    }
    Ok(members)
}

fn make_cells(members: &[Vec<u32>], scores: &[Vec<f64>], mode: CellMode) -> Result<StageCells> {
    let (cells, lookup) = match mode {
        CellMode::Singleton => {
            let mut map: HashMap<Vec<u64>, usize> = HashMap::new();
            let mut cells: Vec<Vec<usize>> = Vec::new();
            for (idx, score) in scores.iter().enumerate() {
                let key = score_key(score);
                match map.get(&key) {
                    Some(&cell) => cells[cell].push(idx),
                    None => {
                        map.insert(key, cells.len());
                        cells.push(vec![idx]);
                    }
                }
            }
            (cells, CellLookup::Exact(map))
        }
        CellMode::PerDim(q) => {
            if q == 0 {
                return Err(Error::InvalidArgument("cells per dimension must be ≥ 1".into()));
            }
            let per_dim = quantile_grid(scores, q, None)?;
            let partition = partition_by_score_vector(members.len(), scores, &per_dim)?;
            let mut cells: Vec<Vec<usize>> = vec![Vec::new(); partition.kept_cells.len()];
            for (idx, &cell) in partition.labels.iter().enumerate() {
                cells[cell].push(idx);
            }
            let kept: HashMap<usize, usize> = partition
                .kept_cells
                .iter()
                .enumerate()
                .map(|(new, &raw)| (raw, new))
                .collect();
            (cells, CellLookup::Grid { per_dim, kept })
        }
    };
    let dims = scores[0].len();
    let centroids = cells
        .iter()
        .map(|cell| {
            let mut c = vec![0.0; dims];
            for &idx in cell {
                for (acc, v) in c.iter_mut().zip(&scores[idx]) {
                    *acc += v;
                }
            }
            for v in &mut c {
                *v /= cell.len() as f64;
            }
            c
        })
        .collect();
    Ok(StageCells {
        members: members.to_vec(),
        scores: scores.to_vec(),
        cells,
        centroids,
        lookup,
    })
}

/// Cell prices from the backward pass, plus bookkeeping.
pub struct StageValues {
    /// One price vector per stage (aligned with `StageAggregation::stages`).
    pub r: Vec<Vec<f64>>,
    /// Price of the empty tuple: best one-step value from the root.
    pub root: f64,
    /// Times a score vector missed every cell and used the nearest centroid.
    pub fallback_assignments: u64,
}

/// Value of extending to `candidate` (length m+1): its terminal cost at the
/// final stage, else the price of the cell its score vector falls in.
fn candidate_value(
    problem: &dyn DiscreteProblem,
    heuristics: &[&dyn CompletionHeuristic],
    agg: &StageAggregation,
    prices: &[Vec<f64>],
    candidate: &[u32],
    pool: &mut SolutionPool,
    fallbacks: &mut u64,
) -> Result<f64> {
    let n = problem.num_stages();
    if candidate.len() == n {
        let cost = problem.terminal_cost(candidate);
        pool.offer(candidate, cost);
        return Ok(cost);
    }
    let stage = candidate.len() - 1;
    let score = score_with_pool(problem, heuristics, candidate, pool)?;
    let cell = agg.stages[stage].assign(&score, fallbacks);
    Ok(prices[stage][cell])
}

/// Backward pass: prices every cell from the last decision stage down, each
/// price an exact uniform average over the cell's members of the best
/// one-step extension value.
pub fn solve_stage_aggregate(
    problem: &dyn DiscreteProblem,
    heuristics: &[&dyn CompletionHeuristic],
    agg: &StageAggregation,
    pool: &mut SolutionPool,
) -> Result<StageValues> {
    let mut fallbacks = 0u64;
    let mut r: Vec<Vec<f64>> = agg.stages.iter().map(|s| vec![0.0; s.cells.len()]).collect();
    for stage in (0..agg.stages.len()).rev() {
        let cells = &agg.stages[stage];
        let mut prices = vec![0.0; cells.cells.len()];
        for (cell, members) in cells.cells.iter().enumerate() {
            let mut acc = 0.0;
            for &idx in members {
                let prefix = &cells.members[idx];
                let mut best = f64::INFINITY;
                for v in feasible_moves(problem, prefix) {
                    let mut candidate = prefix.clone();
                    candidate.push(v);
                    let value = candidate_value(
                        problem, heuristics, agg, &r, &candidate, pool, &mut fallbacks,
                    )?;
                    if value < best {
                        best = value;
                    }
                }
                if best.is_infinite() {
                    return Err(Error::InvalidArgument(format!(
                        "feasible prefix {prefix:?} has no feasible extension"
                    )));
                }
                acc += best;
            }
            prices[cell] = acc / members.len() as f64;
        }
        r[stage] = prices;
    }
    let mut root = f64::INFINITY;
    for v in feasible_moves(problem, &[]) {
        let value =
            candidate_value(problem, heuristics, agg, &r, &[v], pool, &mut fallbacks)?;
        if value < root {
            root = value;
        }
    }
    Ok(StageValues {
        r,
        root,
        fallback_assignments: fallbacks,
    })
}

/// A constructed solution with its cost and run bookkeeping.
#[derive(Clone, Debug)]
pub struct Construction {
    pub solution: Vec<u32>,
    pub cost: f64,
    pub fallback_assignments: u64,
}

/// Assembles a solution stage by stage, at each stage taking the candidate
/// with the lowest cell price (terminal cost at the last stage); ties go to
/// the smallest component value.
pub fn construct_solution(
    problem: &dyn DiscreteProblem,
    heuristics: &[&dyn CompletionHeuristic],
    agg: &StageAggregation,
    values: &StageValues,
    pool: &mut SolutionPool,
) -> Result<Construction> {
    let n = problem.num_stages();
    let mut fallbacks = 0u64;
    let mut solution: Vec<u32> = Vec::with_capacity(n);
    for _stage in 0..n {
        let mut best: Option<(f64, u32)> = None;
        for v in feasible_moves(problem, &solution) {
            let mut candidate = solution.clone();
            candidate.push(v);
            let value = candidate_value(
                problem, heuristics, agg, &values.r, &candidate, pool, &mut fallbacks,
            )?;
            if best.map_or(true, |(c, _)| value < c) {
                best = Some((value, v));
            }
        }
        let Some((_, v)) = best else {
            return Err(Error::InvalidArgument(format!(
                "feasible prefix {solution:?} has no feasible extension"
            )));
        };
        solution.push(v);
    }
    let cost = problem.terminal_cost(&solution);
    pool.offer(&solution, cost);
    Ok(Construction {
        solution,
        cost,
        fallback_assignments: fallbacks,
    })
}

/// Two-step variant: away from the last stage, minimizes the cell price over
/// feasible candidate *pairs* and fixes only the first component of the best
/// pair; the final stage falls back to the one-step rule. Ties go to the
/// lexicographically smallest pair.
pub fn construct_solution_twostep(
    problem: &dyn DiscreteProblem,
    heuristics: &[&dyn CompletionHeuristic],
    agg: &StageAggregation,
    values: &StageValues,
    pool: &mut SolutionPool,
) -> Result<Construction> {
    let n = problem.num_stages();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "two-step lookahead needs at least two stages".into(),
        ));
    }
    let mut fallbacks = 0u64;
    let mut solution: Vec<u32> = Vec::with_capacity(n);
    for stage in 0..n {
        if stage + 1 == n {
            let mut best: Option<(f64, u32)> = None;
            for v in feasible_moves(problem, &solution) {
                let mut candidate = solution.clone();
                candidate.push(v);
                let cost = problem.terminal_cost(&candidate);
                pool.offer(&candidate, cost);
                if best.map_or(true, |(c, _)| cost < c) {
                    best = Some((cost, v));
                }
            }
            let Some((_, v)) = best else {
                return Err(Error::InvalidArgument(format!(
                    "feasible prefix {solution:?} has no feasible extension"
                )));
            };
            solution.push(v);
            continue;
        }
        let mut best: Option<(f64, u32)> = None;
        for v in feasible_moves(problem, &solution) {
            solution.push(v);
            for w in feasible_moves(problem, &solution) {
                let mut candidate = solution.clone();
                candidate.push(w);
                let value = candidate_value(
                    problem, heuristics, agg, &values.r, &candidate, pool, &mut fallbacks,
                )?;
                if best.map_or(true, |(c, _)| value < c) {
                    best = Some((value, v));
                }
            }
            solution.pop();
        }
        let Some((_, v)) = best else {
            return Err(Error::InvalidArgument(format!(
                "feasible prefix {solution:?} has no feasible pair extension"
            )));
        };
        solution.push(v);
    }
    let cost = problem.terminal_cost(&solution);
    pool.offer(&solution, cost);
    Ok(Construction {
        solution,
        cost,
        fallback_assignments: fallbacks,
    })
}

/// Plain rollout: at each stage takes the candidate whose best heuristic
/// completion is cheapest (no cell prices involved); ties go to the smallest
/// component value.
pub fn rollout_solve(
    problem: &dyn DiscreteProblem,
    heuristics: &[&dyn CompletionHeuristic],
    pool: &mut SolutionPool,
) -> Result<Construction> {
    let n = problem.num_stages();
    let mut solution: Vec<u32> = Vec::with_capacity(n);
    for _stage in 0..n {
        let mut best: Option<(f64, u32)> = None;
        for v in feasible_moves(problem, &solution) {
            let mut candidate = solution.clone();
            candidate.push(v);
            let scores = score_with_pool(problem, heuristics, &candidate, pool)?;
            let value = scores.iter().copied().fold(f64::INFINITY, f64::min);
            if best.map_or(true, |(c, _)| value < c) {
                best = Some((value, v));
            }
        }
        let Some((_, v)) = best else {
            return Err(Error::InvalidArgument(format!(
                "feasible prefix {solution:?} has no feasible extension"
            )));
        };
        solution.push(v);
    }
    let cost = problem.terminal_cost(&solution);
    pool.offer(&solution, cost);
    Ok(Construction {
        solution,
        cost,
        fallback_assignments: 0,
    })
}

/// Returns the constructed solution or the pool's best, whichever is
/// cheaper.
pub fn fortify(pool: &SolutionPool, constructed: &Construction) -> (Vec<u32>, f64) {
    match pool.best() {
        Some((solution, cost)) if cost < constructed.cost => (solution.to_vec(), cost),
        _ => (constructed.solution.clone(), constructed.cost),
    }
}

/// End-to-end report of one aggregation-guided optimization run.
#[derive(Clone, Debug, Serialize)]
pub struct AggOptReport {
    pub solution: Vec<u32>,
    pub cost: f64,
    pub fortified_solution: Vec<u32>,
    pub fortified_cost: f64,
    /// Price of the empty tuple under the cell prices.
    pub root_estimate: f64,
    pub cells_per_stage: Vec<usize>,
    pub exhaustive: bool,
    pub fallback_assignments: u64,
}

/// Builds cells, prices them, constructs a solution with the requested
/// lookahead, and fortifies it against everything seen along the way.
pub fn aggregate_optimize(
    problem: &dyn DiscreteProblem,
    heuristics: &[&dyn CompletionHeuristic],
    sampler: StageSampler,
    mode: CellMode,
    lookahead: usize,
) -> Result<AggOptReport> {
    let mut pool = SolutionPool::default();
    let agg = build_stage_aggregation(problem, heuristics, sampler, mode, &mut pool)?;
    let values = solve_stage_aggregate(problem, heuristics, &agg, &mut pool)?;
    let constructed = match lookahead {
        1 => construct_solution(problem, heuristics, &agg, &values, &mut pool)?,
        2 => construct_solution_twostep(problem, heuristics, &agg, &values, &mut pool)?,
        other => {
            return Err(Error::InvalidArgument(format!(
                "lookahead must be 1 or 2, got {other}"
            )))
        }
    };
    let (fortified_solution, fortified_cost) = fortify(&pool, &constructed);
    Ok(AggOptReport {
        solution: constructed.solution.clone(),
        cost: constructed.cost,
        fortified_solution,
        fortified_cost,
        root_estimate: values.root,
        cells_per_stage: agg.stages.iter().map(|s| s.cells.len()).collect(),
        exhaustive: agg.exhaustive,
        fallback_assignments: values.fallback_assignments + constructed.fallback_assignments,
    })
}

/// Two binary components charged from an explicit 2×2 cost table
/// (`table[u1][u2]`); everything is feasible.
pub struct TinyTable {
    pub table: [[f64; 2]; 2],
}

impl TinyTable {
    /// The standing example: costs 0, 1, 3, 2 for (0,0), (0,1), (1,0), (1,1).
    pub fn standard() -> Self {
        TinyTable {
            table: [[0.0, 1.0], [3.0, 2.0]],
        }
    }
}

impl DiscreteProblem for TinyTable {
    fn num_stages(&self) -> usize {
        2
    }

    fn domain(&self, _stage: usize) -> Vec<u32> {
        vec![0, 1]
    }

    fn is_feasible(&self, _prefix: &[u32]) -> bool {
        true
    }

    fn terminal_cost(&self, solution: &[u32]) -> f64 {
        self.table[solution[0] as usize][solution[1] as usize]
    }
}

/// 0/1 knapsack as a minimization: component i takes item i or not, subject
/// to the weight budget; the terminal cost is the negated packed value.
pub struct Knapsack {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    pub capacity: f64,
}

impl Knapsack {
    pub fn new(values: Vec<f64>, weights: Vec<f64>, capacity: f64) -> Result<Self> {
        if values.len() != weights.len() || values.is_empty() {
            return Err(Error::InvalidArgument(
                "need matching nonempty value and weight lists".into(),
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0)
            || values.iter().any(|v| !v.is_finite())
            || !capacity.is_finite()
            || capacity < 0.0
        {
            return Err(Error::InvalidArgument(
                "weights and capacity must be finite and nonnegative".into(),
            ));
        }
        Ok(Knapsack {
            values,
            weights,
            capacity,
        })
    }
}

impl DiscreteProblem for Knapsack {
    fn num_stages(&self) -> usize {
        self.values.len()
    }

    fn domain(&self, _stage: usize) -> Vec<u32> {
        vec![0, 1]
    }

    fn is_feasible(&self, prefix: &[u32]) -> bool {
        let weight: f64 = prefix
            .iter()
            .zip(&self.weights)
            .map(|(&u, w)| u as f64 * w)
            .sum();
        weight <= self.capacity
    }

    fn terminal_cost(&self, solution: &[u32]) -> f64 {
        -solution
            .iter()
            .zip(&self.values)
            .map(|(&u, v)| u as f64 * v)
            .sum::<f64>()
    }
}

/// Symmetric traveling salesman over an explicit distance matrix: the tour
/// starts and ends at city 0, and component m picks the (m+1)-th city.
pub struct Tsp {
    pub dist: Vec<Vec<f64>>,
}

impl Tsp {
    pub fn new(dist: Vec<Vec<f64>>) -> Result<Self> {
        let n = dist.len();
        if n < 2 {
            return Err(Error::InvalidArgument("need at least two cities".into()));
        }
        if dist.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidArgument("distance matrix must be square".into()));
        }
        for i in 0..n {
            for j in 0..n {
                if !dist[i][j].is_finite() {
                    return Err(Error::InvalidArgument("distances must be finite".into()));
                }
                if (dist[i][j] - dist[j][i]).abs() > 1e-12 {
                    return Err(Error::InvalidArgument(format!(
                        "distance matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Tsp { dist })
    }
}

impl DiscreteProblem for Tsp {
    fn num_stages(&self) -> usize {
        self.dist.len() - 1
    }

    fn domain(&self, _stage: usize) -> Vec<u32> {
        (1..self.dist.len() as u32).collect()
    }

    fn is_feasible(&self, prefix: &[u32]) -> bool {
        let mut seen = vec![false; self.dist.len()];
        for &c in prefix {
            let c = c as usize;
            if c == 0 || c >= self.dist.len() || seen[c] {
                return false;
            }
            seen[c] = true;
        }
        true
    }

    fn terminal_cost(&self, solution: &[u32]) -> f64 {
        let mut at = 0usize;
        let mut total = 0.0;
        for &c in solution {
            total += self.dist[at][c as usize];
            at = c as usize;
        }
        total + self.dist[at][0]
    }
}

/// All-feasible random instance: `arity` candidates per stage and a terminal
/// cost drawn, per full tuple, from a seeded hash of its mixed-radix index.
pub struct RandomTable {
    pub stages: usize,
    pub arity: u32,
    pub seed: u64,
}

impl DiscreteProblem for RandomTable {
    fn num_stages(&self) -> usize {
        self.stages
    }

    fn domain(&self, _stage: usize) -> Vec<u32> {
        (0..self.arity).collect()
    }

    fn is_feasible(&self, _prefix: &[u32]) -> bool {
        true
    }

    fn terminal_cost(&self, solution: &[u32]) -> f64 {
        let mut index = 0u64;
        for &u in solution {
            index = index * self.arity as u64 + u as u64;
        }
        SplitMix64::stream(self.seed, index).next_f64()
    }
}
