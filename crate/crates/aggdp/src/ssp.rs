//! Deterministic terminating chains, closed-form linear cost fits, and the
//! comparison table that aggregation methods are benchmarked against.
//!
//! The chain has states `n, n-1, …, 1`, moves one step down per stage, and
//! terminates after state 1. Its exact cost-to-go is a partial sum of the
//! stage costs, which makes every quantity here checkable in closed form.

use crate::aggregation::{lift_costs, solve_aggregate_vi, AggregationScheme};
use crate::error::{Error, Result};
use crate::mdp::{sup_diff, Mdp};
use crate::scoring::{partition_by_scores, CellSpec};
use serde::Serialize;

/// Stage-cost pattern of a chain fixture.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainCase {
    /// Cost 1 on the final transition out of state 1, zero elsewhere; the
    /// exact cost is 1 from every state.
    A,
    /// Cost 1 everywhere except the first transition out of state n, which
    /// rebates the accumulated cost: exact cost i from state i < n, 0 from n.
    B,
}

impl ChainCase {
    /// Stage cost attached to the transition out of `state` for a chain of
    /// length `n`.
    fn stage_cost(&self, n: usize, state: usize) -> f64 {
        match self {
            ChainCase::A => {
                if state == 1 {
                    1.0
                } else {
                    0.0
                }
            }
            ChainCase::B => {
                if state == n {
                    -((n - 1) as f64)
                } else {
                    1.0
                }
            }
        }
    }
}

/// Builds the deterministic chain with `n ≥ 2` states: state `i` moves to
/// `i - 1` (state 1 terminates) at the case's stage cost.
pub fn chain_fixture(n: usize, case: ChainCase) -> Result<Mdp> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "chain needs at least 2 states, got {n}"
        )));
    }
    let transitions = (1..=n)
        .map(|i| vec![vec![(i - 1, 1.0, case.stage_cost(n, i))]])
        .collect();
    Mdp::ssp(n, transitions)
}

/// Exact cost-to-go of the chain: the partial sums of its stage costs.
pub fn chain_exact_values(n: usize, case: ChainCase) -> Vec<f64> {
    let mut values = Vec::with_capacity(n);
    let mut acc = 0.0;
    for i in 1..=n {
        acc += case.stage_cost(n, i);
        values.push(acc);
    }
    values
}

/// Checks that `mdp` is a deterministic descending chain and returns its
/// stage costs indexed by state.
fn chain_costs(mdp: &Mdp) -> Result<Vec<f64>> {
    if !mdp.is_terminating() {
        return Err(Error::InvalidArgument(
            "chain fits require a terminating model".into(),
        ));
    }
    let n = mdp.n();
    let mut costs = Vec::with_capacity(n);
    for i in 1..=n {
        if mdp.num_controls(i) != 1 {
            return Err(Error::InvalidArgument(format!(
                "state {i} has {} controls; a chain has exactly one",
                mdp.num_controls(i)
            )));
        }
        let arcs: Vec<_> = mdp.arcs(i, 0).collect();
        match arcs.as_slice() {
            [(j, p, g)] if *j == i - 1 && (*p - 1.0).abs() <= 1e-15 => costs.push(*g),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "state {i} does not step deterministically to {}",
                    i - 1
                )))
            }
        }
    }
    Ok(costs)
}

/// Best scalar coefficient for the linear architecture `V(i) = r·i` fit to
/// the chain's exact costs over all states:
/// `r̂₁ = Σ i·J(i) / Σ i²` with `J(i)` the partial sums of the stage costs.
pub fn td1_fit(mdp: &Mdp) -> Result<f64> {
    let costs = chain_costs(mdp)?;
    let mut numer = 0.0;
    let mut denom = 0.0;
    let mut acc = 0.0;
    for (idx, g) in costs.iter().enumerate() {
        let i = (idx + 1) as f64;
        acc += g;
        numer += i * acc;
        denom += i * i;
    }
    Ok(numer / denom)
}

/// Scalar coefficient solving the one-step (bootstrapped) fit for the same
/// architecture: the unique `r` with `Σ i·(r·i − g_i − r·(i−1)) = 0`, i.e.
/// `r̂₀ = Σ i·g_i / Σ i`.
pub fn td0_fit(mdp: &Mdp) -> Result<f64> {
    let costs = chain_costs(mdp)?;
    let mut numer = 0.0;
    let mut denom = 0.0;
    for (idx, g) in costs.iter().enumerate() {
        let i = (idx + 1) as f64;
        numer += i * g;
        denom += i;
    }
    Ok(numer / denom)
}

/// Solves the aggregate fixed point of a terminating model. Termination is
/// priced at zero (its own implicit aggregate state), and each
/// disaggregation set must give its smallest member positive weight so the
/// aggregate chain inherits the model's drift toward termination.
pub fn ssp_aggregate_solve(
    mdp: &Mdp,
    scheme: &AggregationScheme,
    tol: f64,
) -> Result<Vec<f64>> {
    if !mdp.is_terminating() {
        return Err(Error::InvalidArgument(
            "aggregate termination pricing needs a terminating model".into(),
        ));
    }
    for (l, set) in scheme.sets().iter().enumerate() {
        let smallest = set[0];
        if scheme.d()[l][smallest - 1] <= 0.0 {
            return Err(Error::InvalidScheme(format!(
                "disaggregation set {l} gives zero weight to its smallest state {smallest}"
            )));
        }
    }
    Ok(solve_aggregate_vi(mdp, scheme, tol)?.r)
}

/// Which per-state value the cells of [`compare_on_chain`] are built from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainScoring {
    /// The all-states linear fit `r̂₁·i`.
    V1Fit,
    /// The bootstrapped linear fit `r̂₀·i`.
    V0Fit,
    /// The exact cost-to-go.
    ExactCost,
}

/// One state's row of the comparison table.
#[derive(Clone, Debug, Serialize)]
pub struct ChainRow {
    pub state: usize,
    pub j_mu: f64,
    pub v1_fit: f64,
    pub v0_fit: f64,
    /// Aggregation lift per requested cell count, in `q_list` order.
    pub jtilde: Vec<f64>,
}

/// Side-by-side values of the linear fits and of equal-width-cell
/// aggregation at several cell counts, plus per-count sup-errors.
#[derive(Clone, Debug, Serialize)]
pub struct ChainComparison {
    pub n: usize,
    pub case: ChainCase,
    pub scoring: ChainScoring,
    pub q_list: Vec<usize>,
    /// Cells actually kept per requested count (empty cells are dropped).
    pub cells_used: Vec<usize>,
    pub rows: Vec<ChainRow>,
    /// `max_i |J̃₁(i) − J_μ(i)|` per requested cell count.
    pub sup_errors: Vec<f64>,
}

impl ChainComparison {
    /// Plot-ready table: one row per state, one lift column per cell count.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("state,J_mu,V1_fit,V0_fit");
        for q in &self.q_list {
            out.push_str(&format!(",Jtilde_q{q}"));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}",
                row.state, row.j_mu, row.v1_fit, row.v0_fit
            ));
            for v in &row.jtilde {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Runs the chain benchmark: computes the exact costs and both linear fits,
/// then for each `q` builds equal-width cells on the chosen scoring values,
/// solves the aggregate problem, and lifts it back to the states.
pub fn compare_on_chain(
    n: usize,
    case: ChainCase,
    q_list: &[usize],
    scoring: ChainScoring,
) -> Result<ChainComparison> {
    if q_list.is_empty() {
        return Err(Error::InvalidArgument("need at least one cell count".into()));
    }
    let mdp = chain_fixture(n, case)?;
    let j_mu = chain_exact_values(n, case);
    let r1 = td1_fit(&mdp)?;
    let r0 = td0_fit(&mdp)?;
    let scores: Vec<f64> = match scoring {
        ChainScoring::V1Fit => (1..=n).map(|i| r1 * i as f64).collect(),
        ChainScoring::V0Fit => (1..=n).map(|i| r0 * i as f64).collect(),
        ChainScoring::ExactCost => j_mu.clone(),
    };
    let mut lifts = Vec::with_capacity(q_list.len());
    let mut cells_used = Vec::with_capacity(q_list.len());
    let mut sup_errors = Vec::with_capacity(q_list.len());
    for &q in q_list {
        if q == 0 {
            return Err(Error::InvalidArgument("cell count must be positive".into()));
        }
        let partition = partition_by_scores(n, &scores, &CellSpec::EqualWidth(q))?;
        let r = ssp_aggregate_solve(&mdp, &partition.scheme, 1e-12)?;
        let lifted = lift_costs(&partition.scheme, &r);
        cells_used.push(partition.scheme.q());
        sup_errors.push(sup_diff(&lifted, &j_mu));
        lifts.push(lifted);
    }
    let rows = (1..=n)
        .map(|i| ChainRow {
            state: i,
            j_mu: j_mu[i - 1],
            v1_fit: r1 * i as f64,
            v0_fit: r0 * i as f64,
            jtilde: lifts.iter().map(|l| l[i - 1]).collect(),
        })
        .collect();
    Ok(ChainComparison {
        n,
        case,
        scoring,
        q_list: q_list.to_vec(),
        cells_used,
        rows,
        sup_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::build_hard_aggregation;
    use crate::fixtures::contiguous_partition;
    use crate::linalg;
    use crate::mdp::Policy;

    #[test]
    fn fixture_matches_closed_form_costs() {
        for case in [ChainCase::A, ChainCase::B] {
            for n in [2, 3, 7, 50] {
                let mdp = chain_fixture(n, case).unwrap();
                let policy = Policy::first_control(n);
                let evaluated = mdp.evaluate_policy(&policy, 1e-12).unwrap();
                let closed = chain_exact_values(n, case);
                assert!(sup_diff(&evaluated, &closed) < 1e-9, "{case:?} n={n}");
            }
        }
    }

    #[test]
    fn exact_values_on_small_chains() {
        assert_eq!(chain_exact_values(3, ChainCase::A), vec![1.0, 1.0, 1.0]);
        assert_eq!(chain_exact_values(3, ChainCase::B), vec![1.0, 2.0, 0.0]);
        let b50 = chain_exact_values(50, ChainCase::B);
        assert_eq!(b50[48], 49.0);
        assert_eq!(b50[49], 0.0);
    }

    #[test]
    fn fixture_rejects_tiny_chains() {
        assert!(chain_fixture(1, ChainCase::A).is_err());
    }

    #[test]
    fn td1_matches_direct_least_squares() {
        // Oracle: fit r on rows [i] against targets J(i) with the generic
        // solver, independent of the closed form.
        for (n, case) in [(3, ChainCase::A), (3, ChainCase::B), (50, ChainCase::A)] {
            let mdp = chain_fixture(n, case).unwrap();
            let fit = td1_fit(&mdp).unwrap();
            let rows: Vec<Vec<f64>> = (1..=n).map(|i| vec![i as f64]).collect();
            let targets = chain_exact_values(n, case);
            let (theta, ridged) = linalg::lstsq(&rows, &targets, None, 0.0).unwrap();
            assert!(!ridged);
            assert!((fit - theta[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn td1_known_values() {
        let a3 = td1_fit(&chain_fixture(3, ChainCase::A).unwrap()).unwrap();
        assert!((a3 - 3.0 / 7.0).abs() < 1e-15);
        let a50 = td1_fit(&chain_fixture(50, ChainCase::A).unwrap()).unwrap();
        assert!((a50 - 1275.0 / 42925.0).abs() < 1e-15);
    }

    #[test]
    fn td0_matches_frozen_target_iteration() {
        // Oracle: repeatedly refit r against one-step targets g_i + r·(i−1)
        // built from the previous fit; the limit solves the same balance
        // condition as the closed form.
        for (n, case) in [(3, ChainCase::A), (3, ChainCase::B), (50, ChainCase::A)] {
            let mdp = chain_fixture(n, case).unwrap();
            let fit = td0_fit(&mdp).unwrap();
            let rows: Vec<Vec<f64>> = (1..=n).map(|i| vec![i as f64]).collect();
            let mut r = 0.0;
            // The refit map contracts at rate 1 − 3/(2n+1), so run it long
            // enough for the slowest case (n = 50) to settle.
            for _ in 0..4000 {
                let targets: Vec<f64> = (1..=n)
                    .map(|i| {
                        let g = mdp.arcs(i, 0).next().unwrap().2;
                        g + r * (i - 1) as f64
                    })
                    .collect();
                let (theta, _) = linalg::lstsq(&rows, &targets, None, 0.0).unwrap();
                r = theta[0];
            }
            assert!((fit - r).abs() < 1e-10, "{case:?} n={n}: {fit} vs {r}");
        }
    }

    #[test]
    fn td0_known_values() {
        let a3 = td0_fit(&chain_fixture(3, ChainCase::A).unwrap()).unwrap();
        assert!((a3 - 1.0 / 6.0).abs() < 1e-15);
        let b3 = td0_fit(&chain_fixture(3, ChainCase::B).unwrap()).unwrap();
        assert!((b3 + 0.5).abs() < 1e-15);
        let a50 = td0_fit(&chain_fixture(50, ChainCase::A).unwrap()).unwrap();
        assert!((a50 - 1.0 / 1275.0).abs() < 1e-15);
    }

    #[test]
    fn fits_reject_non_chains() {
        let mdp = crate::fixtures::two_state();
        assert!(td1_fit(&mdp).is_err());
        assert!(td0_fit(&mdp).is_err());
    }

    #[test]
    fn all_zero_costs_fit_to_zero() {
        let transitions = (1..=4).map(|i| vec![vec![(i - 1, 1.0, 0.0)]]).collect();
        let mdp = Mdp::ssp(4, transitions).unwrap();
        assert_eq!(td1_fit(&mdp).unwrap(), 0.0);
        assert_eq!(td0_fit(&mdp).unwrap(), 0.0);
    }

    #[test]
    fn constant_cost_chains_solve_exactly_on_any_contiguous_cells() {
        let mdp = chain_fixture(50, ChainCase::A).unwrap();
        for q in [1, 2, 5, 10, 50] {
            let scheme =
                build_hard_aggregation(50, &contiguous_partition(50, q), None).unwrap();
            let r = ssp_aggregate_solve(&mdp, &scheme, 1e-12).unwrap();
            for v in &r {
                assert!((v - 1.0).abs() < 1e-9, "q={q}: {v}");
            }
        }
    }

    #[test]
    fn identity_scheme_recovers_exact_costs() {
        let mdp = chain_fixture(5, ChainCase::B).unwrap();
        let r = ssp_aggregate_solve(&mdp, &AggregationScheme::identity(5), 1e-12).unwrap();
        let expected = [1.0, 2.0, 3.0, 4.0, 0.0];
        for (a, b) in r.iter().zip(expected) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn single_cell_matches_scalar_iteration() {
        // With one uniform cell on CHAIN(3, a) the aggregate equation is the
        // scalar map x ↦ (1 + 2x)/3; iterate it independently.
        let mdp = chain_fixture(3, ChainCase::A).unwrap();
        let scheme = build_hard_aggregation(3, &[vec![1, 2, 3]], None).unwrap();
        let r = ssp_aggregate_solve(&mdp, &scheme, 1e-12).unwrap();
        let mut x: f64 = 0.0;
        for _ in 0..2000 {
            x = (1.0 + 2.0 * x) / 3.0;
        }
        assert!((r[0] - x).abs() < 1e-9);
    }

    #[test]
    fn aggregate_solve_needs_weight_on_smallest_member() {
        let mdp = chain_fixture(4, ChainCase::A).unwrap();
        let d = vec![vec![0.0, 0.5, 0.5], vec![1.0]];
        let scheme =
            build_hard_aggregation(4, &[vec![1, 2, 3], vec![4]], Some(&d)).unwrap();
        let err = ssp_aggregate_solve(&mdp, &scheme, 1e-10).unwrap_err();
        assert!(matches!(err, Error::InvalidScheme(_)));
    }

    #[test]
    fn aggregate_solve_rejects_discounted_models() {
        let mdp = crate::fixtures::two_state();
        let scheme = AggregationScheme::identity(2);
        assert!(ssp_aggregate_solve(&mdp, &scheme, 1e-10).is_err());
    }

    #[test]
    fn comparison_case_a_lift_columns_are_exact() {
        let table = compare_on_chain(
            50,
            ChainCase::A,
            &[1, 2, 5, 10, 50],
            ChainScoring::V1Fit,
        )
        .unwrap();
        for err in &table.sup_errors {
            assert!(*err < 1e-9);
        }
        for row in &table.rows {
            for v in &row.jtilde {
                assert!((v - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn comparison_singleton_cells_are_exact_on_case_b() {
        let table =
            compare_on_chain(50, ChainCase::B, &[50], ChainScoring::V1Fit).unwrap();
        assert!(table.sup_errors[0] < 1e-9);
        assert_eq!(table.cells_used[0], 50);
    }

    #[test]
    fn comparison_csv_shape() {
        let table =
            compare_on_chain(5, ChainCase::B, &[2, 5], ChainScoring::ExactCost).unwrap();
        let csv = table.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "state,J_mu,V1_fit,V0_fit,Jtilde_q2,Jtilde_q5");
        assert_eq!(csv.lines().count(), 6);
        let first = lines.next().unwrap();
        assert!(first.starts_with("1,1,"));
    }
}
