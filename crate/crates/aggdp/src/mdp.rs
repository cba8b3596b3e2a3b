//! Finite-state Markov decision process models and exact solvers.
//!
//! States are numbered `1..=n`. Stochastic shortest path models additionally
//! use state `0` as the absorbing, cost-free termination state; discounted
//! models never transition to `0`. Cost vectors and policies are plain
//! vectors indexed by `state - 1`.

use crate::error::{Error, Result};
use serde::Serialize;

/// Iteration cap shared by all fixed-point solvers in this crate.
pub const MAX_ITERATIONS: u64 = 1_000_000;

/// Tolerance for "probabilities sum to one" checks. Rows that miss it are
/// rejected, never renormalized.
pub const PROB_TOL: f64 = 1e-12;

/// Largest `n * total controls` accepted by the dense representation.
const MAX_DENSE_CELLS: u128 = 10_000_000;

/// A stationary policy: entry `i - 1` is the control index used at state `i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Policy(pub Vec<usize>);

impl Policy {
    /// The policy that uses control 0 everywhere.
    pub fn first_control(n: usize) -> Self {
        Policy(vec![0; n])
    }

    pub fn control(&self, state: usize) -> usize {
        self.0[state - 1]
    }
}

/// Result of a fixed-point solve.
#[derive(Clone, Debug, Serialize)]
pub struct ViSolution {
    pub values: Vec<f64>,
    pub iterations: u64,
    pub residual: f64,
}

#[derive(Clone, Debug)]
struct Row {
    /// Dense transition probabilities over destinations `0..=n`; slot 0 is
    /// the termination state and stays zero in discounted models.
    probs: Vec<f64>,
    /// Per-destination transition costs, aligned with `probs`.
    costs: Vec<f64>,
    /// Probability-weighted one-step cost.
    expected_cost: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Horizon {
    Discounted { alpha: f64 },
    Terminating,
}

/// Tabular MDP with dense per-(state, control) transition rows.
#[derive(Clone, Debug)]
pub struct Mdp {
    n: usize,
    horizon: Horizon,
    rows: Vec<Vec<Row>>,
}

/// Transitions are given per state, per control, as `(destination,
/// probability, cost)` triples with 1-based destinations (0 allowed only in
/// terminating models).
pub type Transitions = Vec<Vec<Vec<(usize, f64, f64)>>>;

impl Mdp {
    /// Discounted model with factor `alpha` in `(0, 1)`.
    pub fn discounted(n: usize, alpha: f64, transitions: Transitions) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidModel(format!(
                "discount factor must lie in (0, 1), got {alpha}"
            )));
        }
        Self::build(n, Horizon::Discounted { alpha }, transitions)
    }

    /// Undiscounted model that terminates in the absorbing state 0.
    pub fn ssp(n: usize, transitions: Transitions) -> Result<Self> {
        Self::build(n, Horizon::Terminating, transitions)
    }

    fn build(n: usize, horizon: Horizon, transitions: Transitions) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidModel("state count must be positive".into()));
        }
        if transitions.len() != n {
            return Err(Error::InvalidModel(format!(
                "expected transition data for {n} states, got {}",
                transitions.len()
            )));
        }
        let total_controls: usize = transitions.iter().map(|c| c.len()).sum();
        if (n as u128 + 1) * total_controls as u128 > MAX_DENSE_CELLS {
            return Err(Error::InvalidModel(format!(
                "model too large for dense storage: {n} states x {total_controls} controls"
            )));
        }
        let terminating = matches!(horizon, Horizon::Terminating);
        let mut rows = Vec::with_capacity(n);
        for (idx, controls) in transitions.into_iter().enumerate() {
            let state = idx + 1;
            if controls.is_empty() {
                return Err(Error::InvalidModel(format!(
                    "state {state} has no controls"
                )));
            }
            let mut state_rows = Vec::with_capacity(controls.len());
            for (u, arcs) in controls.into_iter().enumerate() {
                let mut probs = vec![0.0; n + 1];
                let mut costs = vec![0.0; n + 1];
                let mut seen = vec![false; n + 1];
                for (to, p, g) in arcs {
                    if to > n {
                        return Err(Error::InvalidModel(format!(
                            "state {state} control {u}: destination {to} out of range 1..={n}"
                        )));
                    }
                    if to == 0 && !terminating {
                        return Err(Error::InvalidModel(format!(
                            "state {state} control {u}: destination 0 requires a terminating model"
                        )));
                    }
                    if !p.is_finite() || p < 0.0 {
                        return Err(Error::InvalidModel(format!(
                            "state {state} control {u}: probability {p} invalid"
                        )));
                    }
                    if !g.is_finite() {
                        return Err(Error::InvalidModel(format!(
                            "state {state} control {u}: cost {g} not finite"
                        )));
                    }
                    if seen[to] {
                        return Err(Error::InvalidModel(format!(
                            "state {state} control {u}: duplicate destination {to}"
                        )));
                    }
                    seen[to] = true;
                    probs[to] = p;
                    costs[to] = g;
                }
                let sum: f64 = probs.iter().sum();
                if (sum - 1.0).abs() > PROB_TOL {
                    return Err(Error::InvalidModel(format!(
                        "state {state} control {u}: probabilities sum to {sum:.15}, not 1 \
                         (rows are rejected, not renormalized)"
                    )));
                }
                let expected_cost = probs
                    .iter()
                    .zip(&costs)
                    .map(|(p, g)| p * g)
                    .sum();
                state_rows.push(Row {
                    probs,
                    costs,
                    expected_cost,
                });
            }
            rows.push(state_rows);
        }
        Ok(Mdp { n, horizon, rows })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Discount factor; 1 for terminating models.
    pub fn alpha(&self) -> f64 {
        match self.horizon {
            Horizon::Discounted { alpha } => alpha,
            Horizon::Terminating => 1.0,
        }
    }

    pub fn is_terminating(&self) -> bool {
        matches!(self.horizon, Horizon::Terminating)
    }

    pub fn num_controls(&self, state: usize) -> usize {
        self.rows[state - 1].len()
    }

    /// Iterates the support of `(state, control)` as `(destination, p, g)`
    /// triples; destination 0 is the termination state.
    pub fn arcs(&self, state: usize, control: usize) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        let row = &self.rows[state - 1][control];
        row.probs
            .iter()
            .zip(&row.costs)
            .enumerate()
            .filter(|(_, (&p, _))| p > 0.0)
            .map(|(j, (&p, &g))| (j, p, g))
    }

    /// Expected one-step cost of `(state, control)`.
    pub fn stage_cost(&self, state: usize, control: usize) -> f64 {
        self.rows[state - 1][control].expected_cost
    }

    /// One-step lookahead value of `(state, control)` against `values`:
    /// expected cost plus the discounted expected continuation.
    pub fn q_value(&self, state: usize, control: usize, values: &[f64]) -> f64 {
        let row = &self.rows[state - 1][control];
        let alpha = self.alpha();
        let mut acc = row.expected_cost;
        for j in 1..=self.n {
            let p = row.probs[j];
            if p > 0.0 {
                acc += alpha * p * values[j - 1];
            }
        }
        acc
    }

    /// Applies the policy-restricted Bellman operator to `values`.
    pub fn bellman_policy(&self, policy: &Policy, values: &[f64]) -> Vec<f64> {
        (1..=self.n)
            .map(|i| self.q_value(i, policy.control(i), values))
            .collect()
    }

    /// Applies the optimal Bellman operator (componentwise minimum over
    /// controls) to `values`.
    pub fn bellman_optimal(&self, values: &[f64]) -> Vec<f64> {
        (1..=self.n)
            .map(|i| {
                (0..self.num_controls(i))
                    .map(|u| self.q_value(i, u, values))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    /// One-step greedy policy against `values`; ties go to the lowest
    /// control index.
    pub fn policy_improve(&self, values: &[f64]) -> Policy {
        Policy(
            (1..=self.n)
                .map(|i| {
                    let mut best = 0;
                    let mut best_value = self.q_value(i, 0, values);
                    for u in 1..self.num_controls(i) {
                        let v = self.q_value(i, u, values);
                        if v < best_value {
                            best = u;
                            best_value = v;
                        }
                    }
                    best
                })
                .collect(),
        )
    }

    pub fn validate_policy(&self, policy: &Policy) -> Result<()> {
        if policy.0.len() != self.n {
            return Err(Error::InvalidArgument(format!(
                "policy covers {} states, model has {}",
                policy.0.len(),
                self.n
            )));
        }
        for i in 1..=self.n {
            if policy.control(i) >= self.num_controls(i) {
                return Err(Error::InvalidArgument(format!(
                    "policy control {} out of range at state {i} ({} controls)",
                    policy.control(i),
                    self.num_controls(i)
                )));
            }
        }
        Ok(())
    }

    /// Stopping threshold on the sup-norm residual that guarantees the
    /// iterate is within `tol` of the fixed point. Discounted models use the
    /// contraction modulus; terminating models stop at `tol` directly and
    /// rely on finite convergence.
    fn residual_threshold(&self, tol: f64) -> f64 {
        match self.horizon {
            Horizon::Discounted { alpha } => tol * (1.0 - alpha).min(alpha) / alpha,
            Horizon::Terminating => tol,
        }
    }

    /// Value iteration from zero to the optimal cost vector, stopped once the
    /// sup-norm residual guarantees `tol` accuracy (iteration cap
    /// [`MAX_ITERATIONS`]).
    pub fn solve_exact_vi(&self, tol: f64) -> Result<ViSolution> {
        self.fixed_point(tol, |values| self.bellman_optimal(values))
    }

    /// Cost of a fixed policy, computed like [`Mdp::solve_exact_vi`] but with
    /// the policy-restricted operator.
    pub fn evaluate_policy(&self, policy: &Policy, tol: f64) -> Result<Vec<f64>> {
        self.validate_policy(policy)?;
        Ok(self
            .fixed_point(tol, |values| self.bellman_policy(policy, values))?
            .values)
    }

    fn fixed_point(&self, tol: f64, mut op: impl FnMut(&[f64]) -> Vec<f64>) -> Result<ViSolution> {
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        let threshold = self.residual_threshold(tol);
        let mut values = vec![0.0; self.n];
        let mut residual = f64::INFINITY;
        for iteration in 1..=MAX_ITERATIONS {
            let next = op(&values);
            residual = sup_diff(&next, &values);
            values = next;
            if residual <= threshold {
                return Ok(ViSolution {
                    values,
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

    /// Exact policy iteration: evaluate to `tol`, improve greedily, stop when
    /// the policy repeats. Returns the final policy, its cost, and the cost
    /// vector of every policy visited.
    pub fn exact_policy_iteration(
        &self,
        initial: Policy,
        tol: f64,
    ) -> Result<(Policy, Vec<f64>, Vec<Vec<f64>>)> {
        self.validate_policy(&initial)?;
        let mut policy = initial;
        let mut trace = Vec::new();
        loop {
            let cost = self.evaluate_policy(&policy, tol)?;
            trace.push(cost.clone());
            let improved = self.policy_improve(&cost);
            if improved == policy || trace.len() as u64 > MAX_ITERATIONS {
                return Ok((policy, cost, trace));
            }
            policy = improved;
        }
    }

    /// Transition row of `(state, control)` as dense probabilities over
    /// destinations `0..=n`.
    pub fn prob_row(&self, state: usize, control: usize) -> &[f64] {
        &self.rows[state - 1][control].probs
    }

    /// Per-destination costs of `(state, control)` over destinations `0..=n`.
    pub fn cost_row(&self, state: usize, control: usize) -> &[f64] {
        &self.rows[state - 1][control].costs
    }
}

/// Sup-norm distance between two vectors of equal length.
pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
