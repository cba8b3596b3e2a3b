//! Aggregate problem construction and solvers.
//!
//! An aggregation scheme groups the `n` original states into `q` aggregate
//! states. Aggregate state `l` owns a disaggregation distribution `d[l]`
//! supported on its member set `I_l`, and every original state `j` carries an
//! aggregation distribution `phi[j]` over aggregate states, with
//! `phi[j][l] = 1` whenever `j` is a member of `I_l`. The composite operator
//!
//! ```text
//! (H r)(l) = sum_i d[l][i] * min_u sum_j p_ij(u) * (g(i,u,j) + alpha * sum_m phi[j][m] * r[m])
//! ```
//!
//! is a sup-norm contraction with modulus `alpha`, so the aggregate problem
//! has a unique fixed point `r*` that lifts back to an approximation
//! `sum_l phi[j][l] * r*[l]` of the optimal cost of state `j`. In
//! terminating models the termination state forms its own implicit aggregate
//! state whose value is pinned at zero.

use crate::error::{Error, Result};
use crate::mdp::{sup_diff, Mdp, Policy, MAX_ITERATIONS};
use serde::Serialize;

/// Tolerance for distribution and product checks at scheme construction.
pub const SCHEME_TOL: f64 = 1e-12;

/// Tolerance used for the exact aggregate policy evaluations inside
/// [`aggregation_policy_iteration`].
pub const PI_EVAL_TOL: f64 = 1e-12;

/// Grouping of original states into aggregate states, with disaggregation
/// and aggregation distributions.
#[derive(Clone, Debug)]
pub struct AggregationScheme {
    n: usize,
    q: usize,
    sets: Vec<Vec<usize>>,
    d: Vec<Vec<f64>>,
    phi: Vec<Vec<f64>>,
}

impl AggregationScheme {
    /// Validates and assembles a scheme. `sets` holds the member states
    /// (1-based) of each aggregate state; `d` is `q x n`; `phi` is `n x q`.
    pub fn new(
        n: usize,
        sets: Vec<Vec<usize>>,
        d: Vec<Vec<f64>>,
        phi: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let q = sets.len();
        if n == 0 || q == 0 {
            return Err(Error::InvalidScheme(
                "need at least one state and one aggregate state".into(),
            ));
        }
        let mut owner = vec![usize::MAX; n + 1];
        for (l, set) in sets.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::InvalidScheme(format!(
                    "disaggregation set {l} is empty"
                )));
            }
            for &i in set {
                if i == 0 || i > n {
                    return Err(Error::InvalidScheme(format!(
                        "disaggregation set {l} contains state {i}, out of range 1..={n}"
                    )));
                }
                if owner[i] != usize::MAX {
                    return Err(Error::InvalidScheme(format!(
                        "state {i} appears in disaggregation sets {} and {l}",
                        owner[i]
                    )));
                }
                owner[i] = l;
            }
        }
        if d.len() != q || d.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidScheme(format!(
                "disaggregation matrix must be {q} x {n}"
            )));
        }
        if phi.len() != n || phi.iter().any(|row| row.len() != q) {
            return Err(Error::InvalidScheme(format!(
                "aggregation matrix must be {n} x {q}"
            )));
        }
        for (l, row) in d.iter().enumerate() {
            let mut sum = 0.0;
            for (idx, &w) in row.iter().enumerate() {
                let i = idx + 1;
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidScheme(format!(
                        "d[{l}][{i}] = {w} is not a probability"
                    )));
                }
                if w > 0.0 && owner[i] != l {
                    return Err(Error::InvalidScheme(format!(
                        "d[{l}][{i}] = {w} but state {i} is outside disaggregation set {l}"
                    )));
                }
                sum += w;
            }
            if (sum - 1.0).abs() > SCHEME_TOL {
                return Err(Error::InvalidScheme(format!(
                    "disaggregation row {l} sums to {sum:.15}"
                )));
            }
        }
        for (idx, row) in phi.iter().enumerate() {
            let j = idx + 1;
            let mut sum = 0.0;
            for (l, &w) in row.iter().enumerate() {
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidScheme(format!(
                        "phi[{j}][{l}] = {w} is not a probability"
                    )));
                }
                sum += w;
                if owner[j] == l && (w - 1.0).abs() > SCHEME_TOL {
                    return Err(Error::InvalidScheme(format!(
                        "state {j} is a member of aggregate state {l} but phi[{j}][{l}] = {w}"
                    )));
                }
            }
            if (sum - 1.0).abs() > SCHEME_TOL {
                return Err(Error::InvalidScheme(format!(
                    "aggregation row for state {j} sums to {sum:.15}"
                )));
            }
        }
        // D * Phi must be the identity on aggregate states.
        for a in 0..q {
            for b in 0..q {
                let mut prod = 0.0;
                for &i in &sets[a] {
                    prod += d[a][i - 1] * phi[i - 1][b];
                }
                let target = if a == b { 1.0 } else { 0.0 };
                if (prod - target).abs() > SCHEME_TOL {
                    return Err(Error::InvalidScheme(format!(
                        "(D Phi)[{a}][{b}] = {prod:.15}, expected {target}"
                    )));
                }
            }
        }
        let mut sets = sets;
        for set in &mut sets {
            set.sort_unstable();
        }
        Ok(AggregationScheme { n, q, sets, d, phi })
    }

    /// One aggregate state per original state.
    pub fn identity(n: usize) -> Self {
        build_hard_aggregation(n, &(1..=n).map(|i| vec![i]).collect::<Vec<_>>(), None)
            .expect("identity scheme is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn d(&self) -> &[Vec<f64>] {
        &self.d
    }

    pub fn phi(&self) -> &[Vec<f64>] {
        &self.phi
    }

    /// True when every aggregation probability is 0 or 1.
    pub fn is_zero_one(&self) -> bool {
        self.phi
            .iter()
            .flatten()
            .all(|&w| w == 0.0 || w == 1.0)
    }

    /// True for hard aggregation: the disaggregation sets partition the state
    /// space and every state aggregates fully onto its owning cell.
    pub fn is_hard(&self) -> bool {
        self.is_zero_one() && self.sets.iter().map(|s| s.len()).sum::<usize>() == self.n
    }

    /// Footprint sets of a 0/1 scheme: cell `l` collects the states that
    /// aggregate onto `l`. Every state lands in exactly one footprint set.
    pub fn footprint_sets(&self) -> Result<Vec<Vec<usize>>> {
        if !self.is_zero_one() {
            return Err(Error::InvalidScheme(
                "footprint sets require 0/1 aggregation probabilities".into(),
            ));
        }
        let mut footprints = vec![Vec::new(); self.q];
        for j in 1..=self.n {
            let l = self.phi[j - 1]
                .iter()
                .position(|&w| w == 1.0)
                .expect("each 0/1 aggregation row has exactly one unit entry");
            footprints[l].push(j);
        }
        Ok(footprints)
    }

    /// Cell owning each state in a hard scheme.
    pub fn cell_of(&self) -> Result<Vec<usize>> {
        if !self.is_hard() {
            return Err(Error::InvalidScheme(
                "cell lookup requires hard aggregation".into(),
            ));
        }
        let mut cells = vec![0; self.n];
        for (l, set) in self.sets.iter().enumerate() {
            for &i in set {
                cells[i - 1] = l;
            }
        }
        Ok(cells)
    }
}

/// Hard aggregation over a partition of `1..=n`. `weights`, when given,
/// supplies the disaggregation weights aligned with each cell's member list;
/// the default is uniform.
pub fn build_hard_aggregation(
    n: usize,
    partition: &[Vec<usize>],
    weights: Option<&[Vec<f64>]>,
) -> Result<AggregationScheme> {
    let q = partition.len();
    let covered: usize = partition.iter().map(|s| s.len()).sum();
    if covered != n {
        return Err(Error::InvalidScheme(format!(
            "hard aggregation needs a partition of 1..={n}; cells cover {covered} states"
        )));
    }
    if let Some(w) = weights {
        if w.len() != q || w.iter().zip(partition).any(|(wl, sl)| wl.len() != sl.len()) {
            return Err(Error::InvalidScheme(
                "disaggregation weights must align with the partition cells".into(),
            ));
        }
    }
    let mut d = vec![vec![0.0; n]; q];
    let mut phi = vec![vec![0.0; q]; n];
    for (l, set) in partition.iter().enumerate() {
        for (k, &i) in set.iter().enumerate() {
            if i == 0 || i > n {
                return Err(Error::InvalidScheme(format!(
                    "cell {l} contains state {i}, out of range 1..={n}"
                )));
            }
            d[l][i - 1] = match weights {
                Some(w) => w[l][k],
                None => 1.0 / set.len() as f64,
            };
            phi[i - 1][l] = 1.0;
        }
    }
    AggregationScheme::new(n, partition.to_vec(), d, phi)
}

/// Representative-state aggregation: each aggregate state is a single
/// original state, and non-representative states interpolate. The default
/// interpolation is linear between the two nearest representatives on the
/// state line (all weight on the nearest one beyond the ends); `interp`
/// overrides it with a full `n x q` aggregation matrix.
pub fn build_representative_states(
    n: usize,
    reps: &[usize],
    interp: Option<Vec<Vec<f64>>>,
) -> Result<AggregationScheme> {
    let q = reps.len();
    if q == 0 {
        return Err(Error::InvalidScheme("need at least one representative".into()));
    }
    let sets: Vec<Vec<usize>> = reps.iter().map(|&i| vec![i]).collect();
    let mut d = vec![vec![0.0; n]; q];
    for (l, &i) in reps.iter().enumerate() {
        if i == 0 || i > n {
            return Err(Error::InvalidScheme(format!(
                "representative {i} out of range 1..={n}"
            )));
        }
        d[l][i - 1] = 1.0;
    }
    let phi = match interp {
        Some(phi) => phi,
        None => {
            let mut order: Vec<usize> = (0..q).collect();
            order.sort_by_key(|&l| reps[l]);
            let mut phi = vec![vec![0.0; q]; n];
            for j in 1..=n {
                let row = &mut phi[j - 1];
                if let Some(&l) = order.iter().find(|&&l| reps[l] == j) {
                    row[l] = 1.0;
                    continue;
                }
                let above = order.iter().position(|&l| reps[l] > j);
                match above {
                    Some(0) => row[order[0]] = 1.0,
                    None => row[order[q - 1]] = 1.0,
                    Some(k) => {
                        let lo = order[k - 1];
                        let hi = order[k];
                        let span = (reps[hi] - reps[lo]) as f64;
                        let t = (j - reps[lo]) as f64 / span;
                        row[lo] = 1.0 - t;
                        row[hi] = t;
                    }
                }
            }
            phi
        }
    };
    AggregationScheme::new(n, sets, d, phi)
}

/// Lifts aggregate costs to original-state costs through the aggregation
/// distributions.
pub fn lift_costs(scheme: &AggregationScheme, r: &[f64]) -> Vec<f64> {
    scheme
        .phi
        .iter()
        .map(|row| row.iter().zip(r).map(|(w, v)| w * v).sum())
        .collect()
}

/// Averages original-state costs into aggregate costs through the
/// disaggregation distributions.
pub fn disaggregate(scheme: &AggregationScheme, values: &[f64]) -> Vec<f64> {
    scheme
        .sets
        .iter()
        .enumerate()
        .map(|(l, set)| {
            set.iter()
                .map(|&i| scheme.d[l][i - 1] * values[i - 1])
                .sum()
        })
        .collect()
}

/// Applies the aggregate Bellman operator to `r`: lift, one optimal backup,
/// disaggregate.
pub fn aggregate_operator_h(mdp: &Mdp, scheme: &AggregationScheme, r: &[f64]) -> Vec<f64> {
    disaggregate(scheme, &mdp.bellman_optimal(&lift_costs(scheme, r)))
}

/// Policy-restricted counterpart of [`aggregate_operator_h`].
pub fn aggregate_operator_h_policy(
    mdp: &Mdp,
    scheme: &AggregationScheme,
    policy: &Policy,
    r: &[f64],
) -> Vec<f64> {
    disaggregate(scheme, &mdp.bellman_policy(policy, &lift_costs(scheme, r)))
}

/// Result of an aggregate fixed-point solve.
#[derive(Clone, Debug, Serialize)]
pub struct AggregateSolution {
    pub r: Vec<f64>,
    pub iterations: u64,
    pub residual: f64,
}

fn check_dims(mdp: &Mdp, scheme: &AggregationScheme) -> Result<()> {
    if scheme.n() != mdp.n() {
        return Err(Error::InvalidArgument(format!(
            "scheme covers {} states, model has {}",
            scheme.n(),
            mdp.n()
        )));
    }
    Ok(())
}

fn aggregate_fixed_point(
    mdp: &Mdp,
    q: usize,
    tol: f64,
    mut op: impl FnMut(&[f64]) -> Vec<f64>,
) -> Result<AggregateSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let alpha = mdp.alpha();
    let threshold = if mdp.is_terminating() {
        tol
    } else {
        tol * (1.0 - alpha).min(alpha) / alpha
    };
    let mut r = vec![0.0; q];
    let mut residual = f64::INFINITY;
    for iteration in 1..=MAX_ITERATIONS {
        let next = op(&r);
        residual = sup_diff(&next, &r);
        r = next;
        if residual <= threshold {
            return Ok(AggregateSolution {
                r,
                iterations: iteration,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        residual,
    })
}

/// Fixed point of the aggregate Bellman operator, iterated from zero with the
/// same discount-aware stopping rule as the exact solver.
pub fn solve_aggregate_vi(
    mdp: &Mdp,
    scheme: &AggregationScheme,
    tol: f64,
) -> Result<AggregateSolution> {
    check_dims(mdp, scheme)?;
    aggregate_fixed_point(mdp, scheme.q(), tol, |r| {
        aggregate_operator_h(mdp, scheme, r)
    })
}

/// Fixed point of the policy-restricted aggregate operator.
pub fn evaluate_aggregate_policy(
    mdp: &Mdp,
    scheme: &AggregationScheme,
    policy: &Policy,
    tol: f64,
) -> Result<AggregateSolution> {
    check_dims(mdp, scheme)?;
    mdp.validate_policy(policy)?;
    aggregate_fixed_point(mdp, scheme.q(), tol, |r| {
        aggregate_operator_h_policy(mdp, scheme, policy, r)
    })
}

/// One-step greedy policy against the lifted aggregate costs; ties go to the
/// lowest control index.
pub fn extract_policy(mdp: &Mdp, scheme: &AggregationScheme, r: &[f64]) -> Policy {
    mdp.policy_improve(&lift_costs(scheme, r))
}

/// Result of [`aggregation_policy_iteration`].
#[derive(Clone, Debug, Serialize)]
pub struct AggregationPiSolution {
    pub policy: Policy,
    pub r: Vec<f64>,
    /// Aggregate evaluation of every policy visited, in order.
    pub trace: Vec<Vec<f64>>,
}

/// Policy iteration on the aggregate problem: evaluate the current policy's
/// aggregate costs exactly (dense fixed-point iteration to [`PI_EVAL_TOL`]),
/// improve by one-step lookahead against the lifted costs, stop when the
/// policy repeats (or the evaluation does, within [`PI_EVAL_TOL`]). The
/// evaluations decrease monotonically and the loop terminates after finitely
/// many improvements.
pub fn aggregation_policy_iteration(
    mdp: &Mdp,
    scheme: &AggregationScheme,
    initial: Option<Policy>,
) -> Result<AggregationPiSolution> {
    check_dims(mdp, scheme)?;
    let mut policy = initial.unwrap_or_else(|| Policy::first_control(mdp.n()));
    mdp.validate_policy(&policy)?;
    let mut trace: Vec<Vec<f64>> = Vec::new();
    for _ in 0..MAX_ITERATIONS {
        let eval = evaluate_aggregate_policy(mdp, scheme, &policy, PI_EVAL_TOL)?;
        let improved = extract_policy(mdp, scheme, &eval.r);
        let repeated_r = trace
            .last()
            .map(|prev| sup_diff(prev, &eval.r) <= PI_EVAL_TOL)
            .unwrap_or(false);
        trace.push(eval.r.clone());
        if improved == policy || repeated_r {
            return Ok(AggregationPiSolution {
                policy,
                r: eval.r,
                trace,
            });
        }
        policy = improved;
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        residual: f64::NAN,
    })
}

/// Outcome of [`check_error_bound`].
#[derive(Clone, Debug)]
pub struct BoundReport {
    /// Largest optimal-cost spread within any footprint set.
    pub epsilon: f64,
    /// `epsilon / (1 - alpha^k)` for the `k` used by the solve (1 here).
    pub bound: f64,
    /// Largest observed `|J*(i) - r[l]|` over footprint members.
    pub max_gap: f64,
    /// States whose gap exceeds the bound plus the slack.
    pub violations: Vec<BoundViolation>,
    pub ok: bool,
}

#[derive(Clone, Debug)]
pub struct BoundViolation {
    pub state: usize,
    pub cell: usize,
    pub gap: f64,
}

/// Checks the aggregation error bound for schemes with 0/1 aggregation
/// probabilities: within every footprint set, each state's optimal cost must
/// lie within `epsilon / (1 - alpha)` of the cell value, where `epsilon` is
/// the largest optimal-cost spread inside any footprint set. `slack` absorbs
/// solver tolerances.
pub fn check_error_bound(
    mdp: &Mdp,
    scheme: &AggregationScheme,
    r: &[f64],
    j_star: &[f64],
    slack: f64,
) -> Result<BoundReport> {
    check_dims(mdp, scheme)?;
    if mdp.is_terminating() {
        return Err(Error::InvalidArgument(
            "the aggregation error bound applies to discounted models".into(),
        ));
    }
    if r.len() != scheme.q() || j_star.len() != mdp.n() {
        return Err(Error::InvalidArgument(
            "bound check dimensions do not match the scheme".into(),
        ));
    }
    check_zero_one_bound(mdp.alpha(), scheme, r, j_star, slack)
}

pub(crate) fn check_zero_one_bound(
    modulus: f64,
    scheme: &AggregationScheme,
    r: &[f64],
    j_star: &[f64],
    slack: f64,
) -> Result<BoundReport> {
    let footprints = scheme.footprint_sets()?;
    let mut epsilon = 0.0_f64;
    for set in &footprints {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &i in set {
            lo = lo.min(j_star[i - 1]);
            hi = hi.max(j_star[i - 1]);
        }
        if !set.is_empty() {
            epsilon = epsilon.max(hi - lo);
        }
    }
    let bound = epsilon / (1.0 - modulus);
    let mut max_gap = 0.0_f64;
    let mut violations = Vec::new();
    for (l, set) in footprints.iter().enumerate() {
        for &i in set {
            let gap = (j_star[i - 1] - r[l]).abs();
            max_gap = max_gap.max(gap);
            if gap > bound + slack {
                violations.push(BoundViolation {
                    state: i,
                    cell: l,
                    gap,
                });
            }
        }
    }
    let ok = violations.is_empty();
    Ok(BoundReport {
        epsilon,
        bound,
        max_gap,
        violations,
        ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn single_cell_scheme(n: usize) -> AggregationScheme {
        build_hard_aggregation(n, &[(1..=n).collect::<Vec<_>>()], None).unwrap()
    }

    #[test]
    fn rejects_overlapping_sets() {
        let err = build_hard_aggregation(3, &[vec![1, 2], vec![2, 3]], None).unwrap_err();
        assert!(matches!(err, Error::InvalidScheme(_)));
    }

    #[test]
    fn rejects_noncovering_hard_partition() {
        let err = build_hard_aggregation(3, &[vec![1, 2]], None).unwrap_err();
        assert!(matches!(err, Error::InvalidScheme(_)));
    }

    #[test]
    fn rejects_bad_disaggregation_support() {
        // Weight on a state outside the owning cell.
        let d = vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.0, 1.0]];
        let phi = vec![
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, 1.0],
        ];
        let err =
            AggregationScheme::new(3, vec![vec![1], vec![2, 3]], d, phi).unwrap_err();
        assert!(matches!(err, Error::InvalidScheme(_)));
    }

    #[test]
    fn single_cell_two_state_fixed_point_is_one() {
        // With one cell and uniform disaggregation the aggregate equation is
        // r = (1 + 0.5 r + 0 + 0.5 r) / 2 = 0.5 + 0.5 r, so r* = 1.
        let mdp = fixtures::two_state();
        let scheme = single_cell_scheme(2);
        let h0 = aggregate_operator_h(&mdp, &scheme, &[0.0]);
        assert!((h0[0] - 0.5).abs() < 1e-15);
        let sol = solve_aggregate_vi(&mdp, &scheme, 1e-12).unwrap();
        assert!((sol.r[0] - 1.0).abs() < 1e-10);
        let lifted = lift_costs(&scheme, &sol.r);
        assert_eq!(lifted.len(), 2);
        assert!((lifted[0] - 1.0).abs() < 1e-10);
        assert!((lifted[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn representative_state_solution_matches_hand_computation() {
        // Representative state 1 with all of state 2's weight on it:
        // r = 1 + 0.5 r, so r* = 2.
        let mdp = fixtures::two_state();
        let phi = vec![vec![1.0], vec![1.0]];
        let scheme = build_representative_states(2, &[1], Some(phi)).unwrap();
        let sol = solve_aggregate_vi(&mdp, &scheme, 1e-12).unwrap();
        assert!((sol.r[0] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn default_interpolation_is_linear_between_representatives() {
        let scheme = build_representative_states(5, &[1, 5], None).unwrap();
        let phi = scheme.phi();
        assert_eq!(phi[0], vec![1.0, 0.0]);
        assert_eq!(phi[4], vec![0.0, 1.0]);
        assert!((phi[2][0] - 0.5).abs() < 1e-15);
        assert!((phi[2][1] - 0.5).abs() < 1e-15);
        assert!((phi[1][0] - 0.75).abs() < 1e-15);
        assert!((phi[3][1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn identity_scheme_reproduces_exact_solution() {
        let mdp = fixtures::random_discounted(3, 9, 3, 0.85);
        let scheme = AggregationScheme::identity(9);
        let agg = solve_aggregate_vi(&mdp, &scheme, 1e-12).unwrap();
        let exact = mdp.solve_exact_vi(1e-12).unwrap();
        assert!(sup_diff(&agg.r, &exact.values) < 1e-9);
    }

    #[test]
    fn policy_iteration_trace_is_monotone_and_optimal() {
        for seed in 0..10 {
            let mdp = fixtures::random_discounted(seed, 6, 3, 0.9);
            let scheme =
                build_hard_aggregation(6, &fixtures::random_partition(seed, 6, 3), None)
                    .unwrap();
            let sol = aggregation_policy_iteration(&mdp, &scheme, None).unwrap();
            for pair in sol.trace.windows(2) {
                for l in 0..scheme.q() {
                    assert!(pair[1][l] <= pair[0][l] + 1e-9);
                }
            }
            let direct = solve_aggregate_vi(&mdp, &scheme, 1e-12).unwrap();
            assert!(sup_diff(&sol.r, &direct.r) < 1e-9);
        }
    }

    #[test]
    fn extracted_policy_matches_greedy_on_lifted_costs() {
        let mdp = fixtures::two_state_two_controls();
        let scheme = single_cell_scheme(2);
        let sol = solve_aggregate_vi(&mdp, &scheme, 1e-12).unwrap();
        let policy = extract_policy(&mdp, &scheme, &sol.r);
        // The free self-loop at state 1 beats paying 1 to move.
        assert_eq!(policy.control(1), 1);
    }

    #[test]
    fn error_bound_holds_on_two_state_fixture() {
        let mdp = fixtures::two_state();
        let scheme = single_cell_scheme(2);
        let sol = solve_aggregate_vi(&mdp, &scheme, 1e-12).unwrap();
        let exact = mdp.solve_exact_vi(1e-12).unwrap();
        let report = check_error_bound(&mdp, &scheme, &sol.r, &exact.values, 1e-9).unwrap();
        // Spread of J* = (4/3, 2/3) is 2/3, bound = (2/3) / (1/2) = 4/3, and
        // the worst gap |4/3 - 1| = 1/3 sits well inside it.
        assert!((report.epsilon - 2.0 / 3.0).abs() < 1e-9);
        assert!((report.bound - 4.0 / 3.0).abs() < 1e-9);
        assert!((report.max_gap - 1.0 / 3.0).abs() < 1e-9);
        assert!(report.ok);
    }

    #[test]
    fn error_bound_requires_zero_one_phi() {
        // State 2 interpolates between the representatives, so phi is not
        // 0/1 and the footprint construction must refuse.
        let soft = build_representative_states(3, &[1, 3], None).unwrap();
        assert!(!soft.is_zero_one());
        let err = check_error_bound(
            &fixtures::random_discounted(1, 3, 2, 0.5),
            &soft,
            &[0.0, 0.0],
            &[0.0, 0.0, 0.0],
            1e-9,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidScheme(_)));
    }

    #[test]
    fn footprints_of_zero_one_interpolation_form_a_partition() {
        let scheme = build_representative_states(
            4,
            &[1, 4],
            Some(vec![
                vec![1.0, 0.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.0, 1.0],
            ]),
        )
        .unwrap();
        let footprints = scheme.footprint_sets().unwrap();
        assert_eq!(footprints, vec![vec![1, 2], vec![3, 4]]);
    }
}
