//! Simulation-based solvers for the aggregate problem.
//!
//! These estimate aggregate costs from sampled transitions instead of exact
//! expectations. All of them draw from [`SplitMix64`](crate::rng::SplitMix64)
//! streams derived from a caller seed, accumulate in a fixed order, and are
//! therefore bit-reproducible for a given seed.

use crate::aggregation::{aggregate_operator_h, AggregationScheme};
use crate::error::{Error, Result};
use crate::linalg;
use crate::mdp::{Mdp, Policy};
use crate::rng::SplitMix64;
use serde::Serialize;

/// Probability of replacing the next cyclic index with a uniform draw in the
/// asynchronous sweeps. The cyclic backbone guarantees every component is
/// updated infinitely often; the jitter decorrelates update order.
pub const SWEEP_JITTER: f64 = 0.2;

/// How sampled states are drawn.
#[derive(Clone, Debug)]
pub enum Sampling {
    /// Draw original states from a distribution over `1..=n`
    /// (`None` = uniform), then weight by its inverse.
    State(Option<Vec<f64>>),
    /// Draw an aggregate state from a distribution over the cells
    /// (`None` = uniform), then a member state from its disaggregation
    /// distribution, weighting by the inverse of the product.
    Aggregate(Option<Vec<f64>>),
}

/// Stepsize schedule for the stochastic sweeps.
#[derive(Clone, Copy, Debug)]
pub enum StepSize {
    /// `1 / (1 + visits)` per updated component.
    Harmonic,
    /// A fixed stepsize.
    Const(f64),
}

impl StepSize {
    fn gamma(&self, visits: u64) -> f64 {
        match self {
            StepSize::Harmonic => 1.0 / (1.0 + visits as f64),
            StepSize::Const(g) => *g,
        }
    }
}

fn check_distribution(dist: &[f64], len: usize, what: &str) -> Result<()> {
    if dist.len() != len {
        return Err(Error::InvalidArgument(format!(
            "{what} must have {len} entries, got {}",
            dist.len()
        )));
    }
    if dist.iter().any(|&p| !p.is_finite() || p < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "{what} entries must be nonnegative and finite"
        )));
    }
    let sum: f64 = dist.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "{what} sums to {sum:.15}, not 1"
        )));
    }
    Ok(())
}

/// Result of [`lstd0_evaluate`].
#[derive(Clone, Debug, Serialize)]
pub struct LstdSolution {
    pub r: Vec<f64>,
    pub samples: u64,
}

/// Least-squares temporal-difference estimate of the aggregate evaluation of
/// `policy` from `samples` simulated transitions: builds the sample average
/// of the aggregate evaluation system and solves it. Fails with a singular
/// system (try more samples) when the sampled coverage is too thin.
pub fn lstd0_evaluate(
    mdp: &Mdp,
    scheme: &AggregationScheme,
    policy: &Policy,
    samples: u64,
    sampling: &Sampling,
    seed: u64,
) -> Result<LstdSolution> {
    if scheme.n() != mdp.n() {
        return Err(Error::InvalidArgument(format!(
            "scheme covers {} states, model has {}",
            scheme.n(),
            mdp.n()
        )));
    }
    mdp.validate_policy(policy)?;
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let n = mdp.n();
    let q = scheme.q();
    // Sparse disaggregation columns: the cells giving weight to each state.
    let mut dcols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (l, set) in scheme.sets().iter().enumerate() {
        for &i in set {
            let w = scheme.d()[l][i - 1];
            if w > 0.0 {
                dcols[i - 1].push((l, w));
            }
        }
    }
    enum Drawn {
        ByState(Vec<f64>),
        ByCell(Vec<f64>),
    }
    let mode = match sampling {
        Sampling::State(dist) => {
            let xi = match dist {
                Some(d) => {
                    check_distribution(d, n, "state sampling distribution")?;
                    d.clone()
                }
                None => vec![1.0 / n as f64; n],
            };
            for i in 1..=n {
                if !dcols[i - 1].is_empty() && xi[i - 1] == 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "state {i} carries disaggregation weight but has zero \
                         sampling probability"
                    )));
                }
            }
            Drawn::ByState(xi)
        }
        Sampling::Aggregate(dist) => {
            let zeta = match dist {
                Some(d) => {
                    check_distribution(d, q, "aggregate sampling distribution")?;
                    d.clone()
                }
                None => vec![1.0 / q as f64; q],
            };
            if let Some(l) = zeta.iter().position(|&p| p == 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "aggregate state {l} has zero sampling probability"
                )));
            }
            Drawn::ByCell(zeta)
        }
    };
    let alpha = mdp.alpha();
    let phi = scheme.phi();
    let mut c_acc = vec![vec![0.0; q]; q];
    let mut b_acc = vec![0.0; q];
    let mut rng = SplitMix64::stream(seed, 0);
    for _ in 0..samples {
        let (i, weight) = match &mode {
            Drawn::ByState(xi) => {
                let i = 1 + rng.pick_weighted(xi);
                (i, 1.0 / xi[i - 1])
            }
            Drawn::ByCell(zeta) => {
                let l = rng.pick_weighted(zeta);
                let drow = &scheme.d()[l];
                let i = 1 + rng.pick_weighted(drow);
                (i, 1.0 / (zeta[l] * drow[i - 1]))
            }
        };
        let u = policy.control(i);
        let j = rng.pick_weighted(mdp.prob_row(i, u));
        let g = mdp.cost_row(i, u)[j];
        for &(l, dw) in &dcols[i - 1] {
            let wl = weight * dw;
            b_acc[l] += wl * g;
            if j > 0 {
                for (b, &pj) in phi[j - 1].iter().enumerate() {
                    if pj != 0.0 {
                        c_acc[l][b] += wl * pj;
                    }
                }
            }
        }
    }
    let scale = alpha / samples as f64;
    let mut system = vec![vec![0.0; q]; q];
    for a in 0..q {
        for b in 0..q {
            system[a][b] = if a == b { 1.0 } else { 0.0 } - scale * c_acc[a][b];
        }
        b_acc[a] /= samples as f64;
    }
    match linalg::solve_dense(system, b_acc) {
        Ok(r) => Ok(LstdSolution { r, samples }),
        Err(Error::Singular(msg)) => Err(Error::Singular(format!(
            "{msg}; the sampled system is rank deficient, increase the sample count"
        ))),
        Err(e) => Err(e),
    }
}

/// Result of [`async_stochastic_vi`].
#[derive(Clone, Debug, Serialize)]
pub struct AsyncViSolution {
    pub r: Vec<f64>,
    pub visits: Vec<u64>,
    /// Sup-norm aggregate Bellman residual at the start (from zero).
    pub initial_residual: f64,
    /// Sup-norm aggregate Bellman residual of the returned vector.
    pub final_residual: f64,
}

/// Asynchronous stochastic iteration on the aggregate fixed-point equation:
/// each step picks an aggregate state (cyclic sweep with [`SWEEP_JITTER`]
/// randomization), samples a member state from its disaggregation
/// distribution, and relaxes that component toward the state's exact optimal
/// backup against the lifted values.
pub fn async_stochastic_vi(
    mdp: &Mdp,
    scheme: &AggregationScheme,
    steps: u64,
    stepsize: StepSize,
    seed: u64,
) -> Result<AsyncViSolution> {
    if scheme.n() != mdp.n() {
        return Err(Error::InvalidArgument(format!(
            "scheme covers {} states, model has {}",
            scheme.n(),
            mdp.n()
        )));
    }
    let q = scheme.q();
    let alpha = mdp.alpha();
    let phi = scheme.phi();
    let mut r = vec![0.0; q];
    let initial_residual = residual(mdp, scheme, &r);
    let mut visits = vec![0u64; q];
    let mut rng = SplitMix64::stream(seed, 0);
    let mut cycle = 0usize;
    for _ in 0..steps {
        let l = if rng.next_f64() < SWEEP_JITTER {
            rng.below(q)
        } else {
            let at = cycle % q;
            cycle += 1;
            at
        };
        let i = 1 + rng.pick_weighted(&scheme.d()[l]);
        let mut best = f64::INFINITY;
        for u in 0..mdp.num_controls(i) {
            let mut acc = 0.0;
            for (j, p, g) in mdp.arcs(i, u) {
                let cont = if j == 0 {
                    0.0
                } else {
                    phi[j - 1].iter().zip(&r).map(|(w, v)| w * v).sum()
                };
                acc += p * (g + alpha * cont);
            }
            best = best.min(acc);
        }
        let gamma = stepsize.gamma(visits[l]);
        r[l] = (1.0 - gamma) * r[l] + gamma * best;
        visits[l] += 1;
    }
    let final_residual = residual(mdp, scheme, &r);
    Ok(AsyncViSolution {
        r,
        visits,
        initial_residual,
        final_residual,
    })
}

fn residual(mdp: &Mdp, scheme: &AggregationScheme, r: &[f64]) -> f64 {
    crate::mdp::sup_diff(&aggregate_operator_h(mdp, scheme, r), r)
}

/// Result of [`hard_agg_qlearning`].
#[derive(Clone, Debug, Serialize)]
pub struct QlearnSolution {
    /// One value per (cell, shared control index).
    pub q_table: Vec<Vec<f64>>,
    /// Greedy control per cell (lowest index on ties).
    pub cell_policy: Vec<usize>,
    pub visits: Vec<Vec<u64>>,
}

/// Q-learning on the cell problem induced by a hard aggregation scheme in
/// which every state of a cell shares the same control set: cells play the
/// role of states and one Q-value is learned per (cell, control). Each step
/// samples a member state, one transition, and relaxes toward the sampled
/// cost plus the discounted greedy value of the destination cell. The
/// result prices the restricted problem whose policies are constant on
/// cells, so its greedy policy is generally coarser than an unrestricted
/// optimal policy.
pub fn hard_agg_qlearning(
    mdp: &Mdp,
    scheme: &AggregationScheme,
    steps: u64,
    stepsize: StepSize,
    seed: u64,
) -> Result<QlearnSolution> {
    if scheme.n() != mdp.n() {
        return Err(Error::InvalidArgument(format!(
            "scheme covers {} states, model has {}",
            scheme.n(),
            mdp.n()
        )));
    }
    let cell_of = scheme.cell_of().map_err(|_| {
        Error::InvalidScheme("cell Q-learning requires hard aggregation".into())
    })?;
    let q = scheme.q();
    let mut controls_per_cell = vec![0usize; q];
    for (l, set) in scheme.sets().iter().enumerate() {
        let first = mdp.num_controls(set[0]);
        for &i in set {
            if mdp.num_controls(i) != first {
                return Err(Error::InvalidArgument(format!(
                    "cell {l} mixes control sets: state {} has {} controls, state {i} has {}",
                    set[0],
                    first,
                    mdp.num_controls(i)
                )));
            }
        }
        controls_per_cell[l] = first;
    }
    let alpha = mdp.alpha();
    let mut q_table: Vec<Vec<f64>> = controls_per_cell.iter().map(|&c| vec![0.0; c]).collect();
    let mut visits: Vec<Vec<u64>> = controls_per_cell.iter().map(|&c| vec![0u64; c]).collect();
    let pairs: Vec<(usize, usize)> = (0..q)
        .flat_map(|l| (0..controls_per_cell[l]).map(move |u| (l, u)))
        .collect();
    let mut rng = SplitMix64::stream(seed, 0);
    let mut cycle = 0usize;
    for _ in 0..steps {
        let (l, u) = if rng.next_f64() < SWEEP_JITTER {
            pairs[rng.below(pairs.len())]
        } else {
            let at = cycle % pairs.len();
            cycle += 1;
            pairs[at]
        };
        let i = 1 + rng.pick_weighted(&scheme.d()[l]);
        let j = rng.pick_weighted(mdp.prob_row(i, u));
        let g = mdp.cost_row(i, u)[j];
        let continuation = if j == 0 {
            0.0
        } else {
            q_table[cell_of[j - 1]]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
        };
        let gamma = stepsize.gamma(visits[l][u]);
        q_table[l][u] = (1.0 - gamma) * q_table[l][u] + gamma * (g + alpha * continuation);
        visits[l][u] += 1;
    }
    let cell_policy = q_table
        .iter()
        .map(|row| {
            let mut best = 0;
            for u in 1..row.len() {
                if row[u] < row[best] {
                    best = u;
                }
            }
            best
        })
        .collect();
    Ok(QlearnSolution {
        q_table,
        cell_policy,
        visits,
    })
}

/// Q-factor architecture for [`qfactor_fit_and_extract`], linear in the
/// parameters.
pub enum QFactorModel<'a> {
    /// One parameter per (state, control) pair.
    Tabular,
    /// Caller-supplied features of (state, control).
    Linear {
        dim: usize,
        features: &'a dyn Fn(usize, usize) -> Vec<f64>,
    },
}

/// Sample plan for the Q-factor regression.
#[derive(Clone, Copy, Debug)]
pub enum SamplePlan {
    /// Every (state, control, destination) triple, weighted by its
    /// transition probability.
    Exhaustive,
    /// Uniformly random (state, control) pairs with simulated destinations.
    Random { count: u64 },
}

/// Result of [`qfactor_fit_and_extract`].
#[derive(Clone, Debug)]
pub struct QfitSolution {
    pub theta: Vec<f64>,
    pub policy: Policy,
    /// True when the regression needed the ridge fallback.
    pub ridged: bool,
}

/// Ridge added to the normal equations when the plain fit is rank deficient.
pub const QFIT_RIDGE: f64 = 1e-8;

/// Fits a linear Q-factor model to one-step lookahead targets built from
/// `base_values` (cost per sampled transition plus the discounted base value
/// of its destination), then extracts the greedy policy of the fitted model.
/// With the tabular model and the exhaustive plan the fit reproduces the
/// exact lookahead values, so the extracted policy matches a direct greedy
/// step on `base_values`.
pub fn qfactor_fit_and_extract(
    mdp: &Mdp,
    base_values: &[f64],
    model: &QFactorModel,
    plan: SamplePlan,
    seed: u64,
) -> Result<QfitSolution> {
    if base_values.len() != mdp.n() {
        return Err(Error::InvalidArgument(format!(
            "expected {} base values, got {}",
            mdp.n(),
            base_values.len()
        )));
    }
    let n = mdp.n();
    let alpha = mdp.alpha();
    let pair_offsets: Vec<usize> = {
        let mut offsets = Vec::with_capacity(n + 1);
        let mut acc = 0;
        for i in 1..=n {
            offsets.push(acc);
            acc += mdp.num_controls(i);
        }
        offsets.push(acc);
        offsets
    };
    let dim = match model {
        QFactorModel::Tabular => pair_offsets[n],
        QFactorModel::Linear { dim, .. } => *dim,
    };
    let features = |i: usize, u: usize| -> Vec<f64> {
        match model {
            QFactorModel::Tabular => {
                let mut row = vec![0.0; dim];
                row[pair_offsets[i - 1] + u] = 1.0;
                row
            }
            QFactorModel::Linear { features, .. } => features(i, u),
        }
    };
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    let mut weights = Vec::new();
    match plan {
        SamplePlan::Exhaustive => {
            for i in 1..=n {
                for u in 0..mdp.num_controls(i) {
                    for (j, p, g) in mdp.arcs(i, u) {
                        let cont = if j == 0 { 0.0 } else { base_values[j - 1] };
                        rows.push(features(i, u));
                        targets.push(g + alpha * cont);
                        weights.push(p);
                    }
                }
            }
        }
        SamplePlan::Random { count } => {
            if count == 0 {
                return Err(Error::InvalidArgument("need at least one sample".into()));
            }
            let mut rng = SplitMix64::stream(seed, 0);
            for _ in 0..count {
                let i = 1 + rng.below(n);
                let u = rng.below(mdp.num_controls(i));
                let j = rng.pick_weighted(mdp.prob_row(i, u));
                let g = mdp.cost_row(i, u)[j];
                let cont = if j == 0 { 0.0 } else { base_values[j - 1] };
                rows.push(features(i, u));
                targets.push(g + alpha * cont);
                weights.push(1.0);
            }
        }
    }
    let (theta, ridged) = linalg::lstsq(&rows, &targets, Some(&weights), QFIT_RIDGE)?;
    let policy = Policy(
        (1..=n)
            .map(|i| {
                let mut best = 0;
                let mut best_value = f64::INFINITY;
                for u in 0..mdp.num_controls(i) {
                    let row = features(i, u);
                    let value: f64 = row.iter().zip(&theta).map(|(a, b)| a * b).sum();
                    if value < best_value {
                        best = u;
                        best_value = value;
                    }
                }
                best
            })
            .collect(),
    );
    Ok(QfitSolution {
        theta,
        policy,
        ridged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::{
        build_hard_aggregation, extract_policy, lift_costs, solve_aggregate_vi,
    };
    use crate::fixtures;
    use crate::mdp::sup_diff;

    fn single_cell_scheme(n: usize) -> AggregationScheme {
        build_hard_aggregation(n, &[(1..=n).collect::<Vec<_>>()], None).unwrap()
    }

    #[test]
    fn lstd_single_sample_on_self_loop_is_exact() {
        // One state, one cell: every sample gives C = 1 - 0.5 = 0.5 and
        // b = 1, so the estimate is exactly 2 regardless of the draw.
        let mdp = fixtures::one_state_loop();
        let scheme = single_cell_scheme(1);
        let policy = Policy::first_control(1);
        let sol =
            lstd0_evaluate(&mdp, &scheme, &policy, 1, &Sampling::State(None), 7).unwrap();
        assert!((sol.r[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lstd_estimates_concentrate_with_samples() {
        let mdp = fixtures::two_state();
        let scheme = single_cell_scheme(2);
        let policy = Policy::first_control(2);
        let exact = solve_aggregate_vi(&mdp, &scheme, 1e-12).unwrap().r[0];
        let mut errors = Vec::new();
        for &m in &[1_000u64, 10_000, 100_000] {
            let mut errs: Vec<f64> = (0..10)
                .map(|s| {
                    let sol = lstd0_evaluate(
                        &mdp,
                        &scheme,
                        &policy,
                        m,
                        &Sampling::State(None),
                        s,
                    )
                    .unwrap();
                    (sol.r[0] - exact).abs()
                })
                .collect();
            errs.sort_by(f64::total_cmp);
            errors.push((errs[4] + errs[5]) / 2.0);
        }
        assert!(errors[1] <= errors[0]);
        assert!(errors[2] <= errors[1]);
        assert!(errors[2] < 0.02);
    }

    #[test]
    fn lstd_state_and_aggregate_sampling_agree_in_the_limit() {
        let mdp = fixtures::random_discounted(23, 5, 2, 0.8);
        let scheme =
            build_hard_aggregation(5, &fixtures::random_partition(23, 5, 2), None).unwrap();
        let policy = Policy::first_control(5);
        let exact = {
            let sol = crate::aggregation::evaluate_aggregate_policy(
                &mdp, &scheme, &policy, 1e-12,
            )
            .unwrap();
            sol.r
        };
        for sampling in [Sampling::State(None), Sampling::Aggregate(None)] {
            let sol = lstd0_evaluate(&mdp, &scheme, &policy, 400_000, &sampling, 3).unwrap();
            assert!(
                sup_diff(&sol.r, &exact) < 0.05,
                "{sampling:?} drifted: {:?} vs {exact:?}",
                sol.r
            );
        }
    }

    #[test]
    fn lstd_identity_scheme_on_chain_tracks_exact_costs() {
        let mdp = crate::ssp::chain_fixture(5, crate::ssp::ChainCase::B).unwrap();
        let scheme = AggregationScheme::identity(5);
        let policy = Policy::first_control(5);
        let exact = crate::ssp::chain_exact_values(5, crate::ssp::ChainCase::B);
        let sol = lstd0_evaluate(&mdp, &scheme, &policy, 100_000, &Sampling::State(None), 17)
            .unwrap();
        assert!(sup_diff(&sol.r, &exact) < 0.05);
    }

    #[test]
    fn lstd_rejects_zero_probability_on_weighted_state() {
        let mdp = fixtures::two_state();
        let scheme = single_cell_scheme(2);
        let policy = Policy::first_control(2);
        let err = lstd0_evaluate(
            &mdp,
            &scheme,
            &policy,
            10,
            &Sampling::State(Some(vec![1.0, 0.0])),
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn lstd_identical_seeds_are_bit_identical() {
        let mdp = fixtures::random_discounted(31, 6, 2, 0.9);
        let scheme =
            build_hard_aggregation(6, &fixtures::random_partition(31, 6, 3), None).unwrap();
        let policy = Policy::first_control(6);
        let a = lstd0_evaluate(&mdp, &scheme, &policy, 5000, &Sampling::State(None), 11)
            .unwrap();
        let b = lstd0_evaluate(&mdp, &scheme, &policy, 5000, &Sampling::State(None), 11)
            .unwrap();
        assert_eq!(a.r, b.r);
    }

    #[test]
    fn async_vi_first_visit_jumps_to_backup_value() {
        // Harmonic stepsize gives gamma = 1 on the first visit, so the
        // single-state component jumps straight to g + alpha * r0 = 1.
        let mdp = fixtures::one_state_loop();
        let scheme = single_cell_scheme(1);
        let sol = async_stochastic_vi(&mdp, &scheme, 1, StepSize::Harmonic, 5).unwrap();
        assert!((sol.r[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn async_vi_reduces_residual_and_visits_every_cell() {
        for seed in 0..5 {
            let mdp = fixtures::random_discounted(seed, 8, 3, 0.85);
            let scheme =
                build_hard_aggregation(8, &fixtures::random_partition(seed, 8, 3), None)
                    .unwrap();
            let sol =
                async_stochastic_vi(&mdp, &scheme, 60_000, StepSize::Harmonic, seed).unwrap();
            assert!(sol.final_residual < sol.initial_residual);
            assert!(sol.visits.iter().all(|&v| v > 0));
        }
    }

    #[test]
    fn async_vi_approaches_the_fixed_point_when_mixing_is_fast() {
        // Harmonic averaging forgets its transient like k^(alpha - 1), so
        // accuracy is only testable at a small discount factor; with
        // alpha = 0.85 the bias would still be ~0.7 after 60k steps.
        for seed in 0..5 {
            let mdp = fixtures::random_discounted(seed, 8, 3, 0.3);
            let scheme =
                build_hard_aggregation(8, &fixtures::random_partition(seed, 8, 3), None)
                    .unwrap();
            let sol =
                async_stochastic_vi(&mdp, &scheme, 60_000, StepSize::Harmonic, seed).unwrap();
            let exact = solve_aggregate_vi(&mdp, &scheme, 1e-12).unwrap();
            assert!(sup_diff(&sol.r, &exact.r) < 0.05, "seed {seed}");
        }
    }

    #[test]
    fn qlearning_single_cell_single_control_tracks_policy_value() {
        let mdp = fixtures::one_state_loop();
        let scheme = single_cell_scheme(1);
        let sol = hard_agg_qlearning(&mdp, &scheme, 50_000, StepSize::Harmonic, 3).unwrap();
        assert!((sol.q_table[0][0] - 2.0).abs() < 0.05);
    }

    #[test]
    fn qlearning_singleton_cells_recover_the_original_q_values() {
        // Under singleton cells the cell problem is the original problem, so
        // the learned table should approach the exact Q-values (4/3, 2/3).
        let mdp = fixtures::two_state();
        let scheme = AggregationScheme::identity(2);
        let sol = hard_agg_qlearning(&mdp, &scheme, 40_000, StepSize::Harmonic, 9).unwrap();
        assert!((sol.q_table[0][0] - 4.0 / 3.0).abs() < 0.05);
        assert!((sol.q_table[1][0] - 2.0 / 3.0).abs() < 0.05);
    }

    #[test]
    fn qlearning_rejects_mixed_control_sets() {
        let mdp = fixtures::two_state_two_controls();
        let scheme = single_cell_scheme(2);
        let err =
            hard_agg_qlearning(&mdp, &scheme, 10, StepSize::Harmonic, 1).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn qlearning_greedy_policy_costs_at_least_the_optimum() {
        // Clone the first two control lists of every state so each cell has
        // a homogeneous control set, then learn on two contiguous cells. The
        // resulting cell-constant policy can only do as well as the optimum.
        let base = fixtures::random_discounted(41, 8, 2, 0.9);
        let transitions: crate::mdp::Transitions = (1..=8)
            .map(|i| {
                (0..2)
                    .map(|u| base.arcs(i, u.min(base.num_controls(i) - 1)).collect())
                    .collect()
            })
            .collect();
        let mdp = Mdp::discounted(8, 0.9, transitions).unwrap();
        let scheme =
            build_hard_aggregation(8, &fixtures::contiguous_partition(8, 2), None).unwrap();
        let sol = hard_agg_qlearning(&mdp, &scheme, 80_000, StepSize::Harmonic, 2).unwrap();
        let cell_of = scheme.cell_of().unwrap();
        let policy = Policy((1..=8).map(|i| sol.cell_policy[cell_of[i - 1]]).collect());
        let cost = mdp.evaluate_policy(&policy, 1e-10).unwrap();
        let optimal = mdp.solve_exact_vi(1e-10).unwrap().values;
        for i in 0..8 {
            assert!(cost[i] >= optimal[i] - 1e-8);
        }
    }

    #[test]
    fn qfactor_tabular_exhaustive_matches_direct_extraction() {
        for seed in 0..10 {
            let mdp = fixtures::random_discounted(seed, 7, 3, 0.9);
            let scheme =
                build_hard_aggregation(7, &fixtures::random_partition(seed, 7, 3), None)
                    .unwrap();
            let r = solve_aggregate_vi(&mdp, &scheme, 1e-12).unwrap().r;
            let lifted = lift_costs(&scheme, &r);
            let fit = qfactor_fit_and_extract(
                &mdp,
                &lifted,
                &QFactorModel::Tabular,
                SamplePlan::Exhaustive,
                0,
            )
            .unwrap();
            assert!(!fit.ridged);
            let direct = extract_policy(&mdp, &scheme, &r);
            assert_eq!(fit.policy, direct);
        }
    }

    #[test]
    fn qfactor_noisy_samples_recover_the_known_policy() {
        // The free self-loop at state 1 beats paying 1 to hop away; a noisy
        // tabular fit from random samples should still find it.
        let mdp = fixtures::two_state_two_controls();
        let scheme = single_cell_scheme(2);
        let r = solve_aggregate_vi(&mdp, &scheme, 1e-12).unwrap().r;
        let lifted = lift_costs(&scheme, &r);
        let fit = qfactor_fit_and_extract(
            &mdp,
            &lifted,
            &QFactorModel::Tabular,
            SamplePlan::Random { count: 10_000 },
            5,
        )
        .unwrap();
        assert_eq!(fit.policy, extract_policy(&mdp, &scheme, &r));
    }

    #[test]
    fn qfactor_rank_deficiency_triggers_ridge_flag() {
        let mdp = fixtures::two_state();
        let lifted = vec![1.0, 1.0];
        // A two-dimensional model whose second feature is always zero.
        let features = |i: usize, _u: usize| vec![i as f64, 0.0];
        let fit = qfactor_fit_and_extract(
            &mdp,
            &lifted,
            &QFactorModel::Linear {
                dim: 2,
                features: &features,
            },
            SamplePlan::Exhaustive,
            0,
        )
        .unwrap();
        assert!(fit.ridged);
    }
}
