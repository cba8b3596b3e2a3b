//! Policy improvement with learned features: evaluate the current policy,
//! fit the network to its costs, bucket states by the trained features,
//! solve the aggregate problem, extract a new policy, repeat. Also the
//! simpler loop that feeds an aggregation's own lifted values back in as an
//! additional scoring function.

use crate::aggregation::{
    extract_policy, lift_costs, solve_aggregate_vi, AggregationScheme,
};
use crate::error::{Error, Result};
use crate::mdp::{sup_diff, Mdp, Policy};
use crate::net::{
    extract_feature_mapping, mean_loss, train_incremental, Encoder, NetworkParams,
    NetworkSpec, Sigma, TrainStep,
};
use crate::rng::SplitMix64;
use crate::scoring::{partition_by_score_vector, quantile_grid};
use serde::Serialize;

/// Hard ceiling on product-grid cells before an error asks for fewer cells
/// per dimension.
pub const CELL_CAP: usize = 10_000;

/// How trained features become cells.
#[derive(Clone, Copy, Debug)]
pub enum FeatureCells {
    /// One cell per state: the aggregate problem is the original problem.
    Singleton,
    /// Quantile product grid over the feature space, fitted on sampled
    /// states, with the given cells per dimension.
    Grid { per_dim: usize },
}

/// Knobs for [`run_pi_with_nn_features`].
#[derive(Clone, Debug)]
pub struct NnPipelineOptions {
    /// Nonlinear layer widths; the last is the feature dimension.
    pub widths: Vec<usize>,
    pub sigma: Sigma,
    pub epochs: usize,
    pub step: f64,
    pub ridge: f64,
    pub cells: FeatureCells,
    /// States sampled per cycle to fit the feature grid (half uniform, half
    /// walked under the current policy).
    pub sample_count: usize,
    /// Half-width of seeded uniform noise added to the training targets
    /// (0 keeps exact costs).
    pub noise: f64,
    /// Train the network only on the first cycle and reuse its features.
    pub freeze_features: bool,
}

impl Default for NnPipelineOptions {
    fn default() -> Self {
        NnPipelineOptions {
            widths: vec![8],
            sigma: Sigma::Tanh,
            epochs: 300,
            step: 0.05,
            ridge: 0.0,
            cells: FeatureCells::Singleton,
            sample_count: 64,
            noise: 0.0,
            freeze_features: false,
        }
    }
}

/// What happened in one improvement cycle.
#[derive(Clone, Debug, Serialize)]
pub struct CycleReport {
    pub cycle: usize,
    /// Exact cost of the policy entering the cycle.
    pub exact_cost: Vec<f64>,
    /// Mean squared training error after the last epoch.
    pub train_loss: f64,
    /// Cells used by the aggregate problem.
    pub cells: usize,
    /// Aggregate solution.
    pub r: Vec<f64>,
    /// `max_i |(Φr)(i) − J_μ(i)|` against the entering policy's cost.
    pub sup_diff: f64,
    /// Policy extracted at the end of the cycle.
    pub policy_after: Policy,
}

fn with_cycle(err: Error, cycle: usize) -> Error {
    match err {
        Error::InvalidModel(m) => Error::InvalidModel(format!("cycle {cycle}: {m}")),
        Error::InvalidScheme(m) => Error::InvalidScheme(format!("cycle {cycle}: {m}")),
        Error::InvalidArgument(m) => Error::InvalidArgument(format!("cycle {cycle}: {m}")),
        Error::Singular(m) => Error::Singular(format!("cycle {cycle}: {m}")),
        Error::Diverged(m) => Error::Diverged(format!("cycle {cycle}: {m}")),
        other => other,
    }
}

/// Mixed exploration sample: half uniformly random states, half states
/// visited by walking the current policy from random starts.
fn sample_states(mdp: &Mdp, policy: &Policy, count: usize, rng: &mut SplitMix64) -> Vec<usize> {
    let n = mdp.n();
    let count = count.max(2);
    let mut sampled = Vec::with_capacity(count);
    for _ in 0..count / 2 {
        sampled.push(1 + rng.below(n));
    }
    let mut at = 1 + rng.below(n);
    let mut walked = 0usize;
    let cap = 4 * n;
    while sampled.len() < count {
        sampled.push(at);
        walked += 1;
        let next = rng.pick_weighted(mdp.prob_row(at, policy.control(at)));
        if next == 0 || walked >= cap {
            at = 1 + rng.below(n);
            walked = 0;
        } else {
            at = next;
        }
    }
    sampled
}

fn grid_scheme(
    features: &[Vec<f64>],
    per_dim: usize,
    fit_on: Option<&[usize]>,
) -> Result<AggregationScheme> {
    let grid = quantile_grid(features, per_dim, fit_on)?;
    let total: usize = grid.iter().map(|p| p.len()).product();
    if total > CELL_CAP {
        return Err(Error::InvalidArgument(format!(
            "feature grid would have {total} cells (cap {CELL_CAP}); reduce the cells \
             per dimension"
        )));
    }
    Ok(partition_by_score_vector(features.len(), features, &grid)?.scheme)
}

/// Runs `cycles` rounds of evaluate → fit → partition → aggregate-solve →
/// extract, starting from `initial` (first controls by default). Returns the
/// final policy and one report per cycle. Deterministic for a given seed.
pub fn run_pi_with_nn_features(
    mdp: &Mdp,
    initial: Option<Policy>,
    cycles: usize,
    opts: &NnPipelineOptions,
    seed: u64,
) -> Result<(Policy, Vec<CycleReport>)> {
    if cycles == 0 {
        return Err(Error::InvalidArgument("need at least one cycle".into()));
    }
    let n = mdp.n();
    let mut policy = match initial {
        Some(p) => {
            mdp.validate_policy(&p)?;
            p
        }
        None => Policy::first_control(n),
    };
    let spec = NetworkSpec::uniform(Encoder::OneHot(n), &opts.widths, opts.sigma)?;
    let mut frozen: Option<(NetworkParams, f64)> = None;
    let mut reports = Vec::with_capacity(cycles);
    for cycle in 0..cycles {
        let exact_cost = mdp
            .evaluate_policy(&policy, 1e-12)
            .map_err(|e| with_cycle(e, cycle))?;
        let mut rng = SplitMix64::stream(seed, cycle as u64);
        let data: Vec<(usize, f64)> = exact_cost
            .iter()
            .enumerate()
            .map(|(idx, &j)| {
                let noise = if opts.noise > 0.0 {
                    rng.uniform(-opts.noise, opts.noise)
                } else {
                    0.0
                };
                (idx + 1, j + noise)
            })
            .collect();
        let (params, train_loss) = match (&frozen, opts.freeze_features) {
            (Some((params, _)), true) => {
                let loss =
                    mean_loss(&spec, params, &data).map_err(|e| with_cycle(e, cycle))?;
                (params.clone(), loss)
            }
            _ => {
                let init = NetworkParams::init(&spec, rng.next_u64())?;
                let trained = train_incremental(
                    &spec,
                    &init,
                    &data,
                    opts.epochs,
                    TrainStep::Const(opts.step),
                    rng.next_u64(),
                    opts.ridge,
                )
                .map_err(|e| with_cycle(e, cycle))?;
                let loss = *trained.loss_trace.last().unwrap();
                (trained.params, loss)
            }
        };
        if opts.freeze_features && frozen.is_none() {
            frozen = Some((params.clone(), train_loss));
        }
        let scheme = match opts.cells {
            FeatureCells::Singleton => AggregationScheme::identity(n),
            FeatureCells::Grid { per_dim } => {
                let mapping = extract_feature_mapping(&spec, &params)?;
                let features = mapping.matrix(n);
                let sampled = sample_states(mdp, &policy, opts.sample_count, &mut rng);
                grid_scheme(&features, per_dim, Some(&sampled))
                    .map_err(|e| with_cycle(e, cycle))?
            }
        };
        let solution =
            solve_aggregate_vi(mdp, &scheme, 1e-12).map_err(|e| with_cycle(e, cycle))?;
        let lifted = lift_costs(&scheme, &solution.r);
        let next = extract_policy(mdp, &scheme, &solution.r);
        reports.push(CycleReport {
            cycle,
            exact_cost: exact_cost.clone(),
            train_loss,
            cells: scheme.q(),
            sup_diff: sup_diff(&lifted, &exact_cost),
            r: solution.r,
            policy_after: next.clone(),
        });
        policy = next;
    }
    Ok((policy, reports))
}

/// Trace of [`run_feature_iteration`].
#[derive(Clone, Debug)]
pub struct FeatureIterationReport {
    /// Cells used per round.
    pub cells_per_round: Vec<usize>,
    /// Aggregate solution per round.
    pub r_trace: Vec<Vec<f64>>,
    /// Lift of each round's solution to the states.
    pub lifted_trace: Vec<Vec<f64>>,
    pub final_scheme: AggregationScheme,
}

/// Round t builds a quantile product grid over the scoring columns
/// (initially just `base_scores`), solves the aggregate problem, and appends
/// the lifted values as one more scoring column for round t+1.
pub fn run_feature_iteration(
    mdp: &Mdp,
    base_scores: &[f64],
    rounds: usize,
    per_dim: usize,
) -> Result<FeatureIterationReport> {
    if rounds == 0 {
        return Err(Error::InvalidArgument("need at least one round".into()));
    }
    if base_scores.len() != mdp.n() {
        return Err(Error::InvalidArgument(format!(
            "expected {} base scores, got {}",
            mdp.n(),
            base_scores.len()
        )));
    }
    let mut scores: Vec<Vec<f64>> = base_scores.iter().map(|&v| vec![v]).collect();
    let mut cells_per_round = Vec::with_capacity(rounds);
    let mut r_trace = Vec::with_capacity(rounds);
    let mut lifted_trace = Vec::with_capacity(rounds);
    let mut final_scheme = None;
    for _round in 0..rounds {
        let scheme = grid_scheme(&scores, per_dim, None)?;
        let solution = solve_aggregate_vi(mdp, &scheme, 1e-12)?;
        let lifted = lift_costs(&scheme, &solution.r);
        for (row, &v) in scores.iter_mut().zip(&lifted) {
            row.push(v);
        }
        cells_per_round.push(scheme.q());
        r_trace.push(solution.r);
        lifted_trace.push(lifted);
        final_scheme = Some(scheme);
    }
    Ok(FeatureIterationReport {
        cells_per_round,
        r_trace,
        lifted_trace,
        final_scheme: final_scheme.unwrap(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::scoring::{partition_by_scores, CellSpec};
    use crate::ssp::{chain_exact_values, chain_fixture, td0_fit, ChainCase};

    #[test]
    fn singleton_cells_reach_the_optimum_in_one_cycle() {
        for seed in 0..5 {
            let mdp = fixtures::random_discounted(seed, 7, 3, 0.9);
            let opts = NnPipelineOptions {
                epochs: 50,
                ..NnPipelineOptions::default()
            };
            let (policy, reports) =
                run_pi_with_nn_features(&mdp, None, 1, &opts, seed).unwrap();
            let cost = mdp.evaluate_policy(&policy, 1e-12).unwrap();
            let (_, optimal, _) = mdp
                .exact_policy_iteration(Policy::first_control(7), 1e-12)
                .unwrap();
            assert!(sup_diff(&cost, &optimal) < 1e-9, "seed {seed}");
            assert_eq!(reports.len(), 1);
            assert_eq!(reports[0].cells, 7);
        }
    }

    #[test]
    fn single_policy_model_never_changes() {
        let mdp = fixtures::two_state();
        let opts = NnPipelineOptions {
            epochs: 20,
            cells: FeatureCells::Grid { per_dim: 2 },
            widths: vec![4, 1],
            ..NnPipelineOptions::default()
        };
        let (policy, reports) = run_pi_with_nn_features(&mdp, None, 3, &opts, 1).unwrap();
        assert_eq!(policy, Policy::first_control(2));
        for report in &reports {
            assert_eq!(report.policy_after, Policy::first_control(2));
        }
    }

    #[test]
    fn one_coarse_cycle_improves_the_self_loop_fixture() {
        // Scalar feature (s=1), two grid cells: the extracted policy should
        // find the free self-loop and improve on the always-hop start.
        let mdp = fixtures::two_state_two_controls();
        let opts = NnPipelineOptions {
            widths: vec![4, 1],
            epochs: 500,
            cells: FeatureCells::Grid { per_dim: 2 },
            ..NnPipelineOptions::default()
        };
        let initial = Policy::first_control(2);
        let before = mdp.evaluate_policy(&initial, 1e-12).unwrap();
        let (policy, reports) =
            run_pi_with_nn_features(&mdp, Some(initial), 1, &opts, 0).unwrap();
        let after = mdp.evaluate_policy(&policy, 1e-12).unwrap();
        for (a, b) in after.iter().zip(&before) {
            assert!(a <= &(b + 1e-12), "{after:?} vs {before:?}");
        }
        assert!(reports[0].cells <= 2);
    }

    #[test]
    fn reports_are_bit_reproducible() {
        let mdp = fixtures::random_discounted(11, 6, 2, 0.85);
        let opts = NnPipelineOptions {
            epochs: 40,
            cells: FeatureCells::Grid { per_dim: 2 },
            widths: vec![4, 2],
            noise: 0.1,
            ..NnPipelineOptions::default()
        };
        let (pa, ra) = run_pi_with_nn_features(&mdp, None, 2, &opts, 3).unwrap();
        let (pb, rb) = run_pi_with_nn_features(&mdp, None, 2, &opts, 3).unwrap();
        assert_eq!(pa, pb);
        for (a, b) in ra.iter().zip(&rb) {
            assert_eq!(a.exact_cost, b.exact_cost);
            assert_eq!(a.r, b.r);
            assert_eq!(a.train_loss, b.train_loss);
            assert_eq!(a.sup_diff, b.sup_diff);
        }
    }

    #[test]
    fn frozen_features_reuse_the_first_net() {
        let mdp = fixtures::random_discounted(2, 5, 2, 0.8);
        let opts = NnPipelineOptions {
            epochs: 30,
            cells: FeatureCells::Grid { per_dim: 2 },
            widths: vec![3, 2],
            freeze_features: true,
            ..NnPipelineOptions::default()
        };
        let (_, reports) = run_pi_with_nn_features(&mdp, None, 3, &opts, 9).unwrap();
        assert_eq!(reports.len(), 3);
        for report in &reports {
            assert!(report.train_loss.is_finite());
        }
    }

    #[test]
    fn feature_iteration_first_round_matches_scalar_partition() {
        let mdp = fixtures::random_discounted(21, 9, 2, 0.9);
        let scores: Vec<f64> = (1..=9).map(|i| (i as f64).sqrt()).collect();
        let report = run_feature_iteration(&mdp, &scores, 1, 3).unwrap();
        let partition = partition_by_scores(9, &scores, &CellSpec::Quantile(3)).unwrap();
        let direct = solve_aggregate_vi(&mdp, &partition.scheme, 1e-12).unwrap();
        assert_eq!(report.r_trace.len(), 1);
        assert!(sup_diff(&report.r_trace[0], &direct.r) < 1e-12);
    }

    #[test]
    fn feature_iteration_is_stable_at_exact_scores() {
        // Singleton cells on J* solve exactly, so feeding the lift back in
        // changes nothing.
        let mdp = fixtures::random_discounted(4, 6, 2, 0.85);
        let j_star = mdp.solve_exact_vi(1e-12).unwrap().values;
        let report = run_feature_iteration(&mdp, &j_star, 3, 6).unwrap();
        for round in 1..3 {
            assert!(sup_diff(&report.r_trace[round], &report.r_trace[0]) < 1e-9);
        }
    }

    #[test]
    fn feature_iteration_refines_the_chain_fit() {
        // Starting from the coarse bootstrapped linear fit, adding the lifted
        // values as a second scoring round must not lose accuracy.
        let mdp = chain_fixture(50, ChainCase::B).unwrap();
        let r0 = td0_fit(&mdp).unwrap();
        let base: Vec<f64> = (1..=50).map(|i| r0 * i as f64).collect();
        let exact = chain_exact_values(50, ChainCase::B);
        let report = run_feature_iteration(&mdp, &base, 2, 10).unwrap();
        let err1 = sup_diff(&report.lifted_trace[0], &exact);
        let err2 = sup_diff(&report.lifted_trace[1], &exact);
        assert!(err2 <= err1 + 1e-12, "round errors {err1} then {err2}");
    }

    #[test]
    fn cell_explosion_is_rejected() {
        let mdp = fixtures::random_discounted(6, 50, 2, 0.9);
        let scores: Vec<f64> = (1..=50).map(|i| i as f64).collect();
        let err = run_feature_iteration(&mdp, &scores, 3, 25).unwrap_err();
        assert!(err.to_string().contains("reduce the cells"));
    }
}
