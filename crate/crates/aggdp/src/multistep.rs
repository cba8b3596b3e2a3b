//! Multistep variants of the aggregate solvers.
//!
//! Folding `k` optimal backups (or a geometrically weighted series of policy
//! backups) between the lift and the disaggregation sharpens the effective
//! contraction modulus from `alpha` to `alpha^k` (respectively
//! `alpha(1-lambda)/(1-alpha*lambda)`), which tightens the aggregation error
//! bound at the price of more work per sweep. The multistep solvers return
//! aggregate values only; no multistep policy object is materialized, since
//! the lifted cost vector already supports one-step lookahead.

use crate::aggregation::{
    check_zero_one_bound, disaggregate, lift_costs, AggregationScheme, BoundReport,
};
use crate::error::{Error, Result};
use crate::mdp::{sup_diff, Mdp, Policy, MAX_ITERATIONS};
use serde::Serialize;

/// Applies the `k`-step aggregate operator to `r`: lift, `k` optimal
/// backups, disaggregate. `k = 1` is the plain aggregate Bellman operator.
pub fn kstep_operator(
    mdp: &Mdp,
    scheme: &AggregationScheme,
    k: usize,
    r: &[f64],
) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::InvalidArgument("step count must be positive".into()));
    }
    if scheme.n() != mdp.n() {
        return Err(Error::InvalidArgument(format!(
            "scheme covers {} states, model has {}",
            scheme.n(),
            mdp.n()
        )));
    }
    let mut values = lift_costs(scheme, r);
    for _ in 0..k {
        values = mdp.bellman_optimal(&values);
    }
    Ok(disaggregate(scheme, &values))
}

/// Result of [`solve_kstep`]: the aggregate fixed point plus the lifted cost
/// vector after the final `k` backups (the value a one-step lookahead sees).
#[derive(Clone, Debug, Serialize)]
pub struct KstepSolution {
    pub r: Vec<f64>,
    /// `T^k` applied to the lifted fixed point.
    pub lifted: Vec<f64>,
    pub iterations: u64,
    pub residual: f64,
}

/// Fixed point of the `k`-step aggregate operator (contraction modulus
/// `alpha^k`), iterated from zero.
pub fn solve_kstep(
    mdp: &Mdp,
    scheme: &AggregationScheme,
    k: usize,
    tol: f64,
) -> Result<KstepSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let modulus = mdp.alpha().powi(k as i32);
    let threshold = if mdp.is_terminating() {
        tol
    } else {
        tol * (1.0 - modulus).min(modulus) / modulus
    };
    let mut r = vec![0.0; scheme.q()];
    let mut residual = f64::INFINITY;
    for iteration in 1..=MAX_ITERATIONS {
        let next = kstep_operator(mdp, scheme, k, &r)?;
        residual = sup_diff(&next, &r);
        r = next;
        if residual <= threshold {
            let mut lifted = lift_costs(scheme, &r);
            for _ in 0..k {
                lifted = mdp.bellman_optimal(&lifted);
            }
            return Ok(KstepSolution {
                r,
                lifted,
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

/// The `k`-step analogue of the aggregation error bound: with 0/1
/// aggregation probabilities, every footprint member's optimal cost lies
/// within `epsilon / (1 - alpha^k)` of its cell value.
pub fn check_kstep_bound(
    mdp: &Mdp,
    scheme: &AggregationScheme,
    k: usize,
    r: &[f64],
    j_star: &[f64],
    slack: f64,
) -> Result<BoundReport> {
    if k == 0 {
        return Err(Error::InvalidArgument("step count must be positive".into()));
    }
    if mdp.is_terminating() {
        return Err(Error::InvalidArgument(
            "the aggregation error bound applies to discounted models".into(),
        ));
    }
    check_zero_one_bound(mdp.alpha().powi(k as i32), scheme, r, j_star, slack)
}

/// Result of [`lambda_evaluate`].
#[derive(Clone, Debug, Serialize)]
pub struct LambdaSolution {
    pub r: Vec<f64>,
    pub iterations: u64,
    pub residual: f64,
    /// Longest backup series used while evaluating the weighted operator.
    pub max_series_len: usize,
}

/// Geometrically weighted multistep policy evaluation on the aggregate
/// problem: solves `r = D T_lambda(Phi r)` for a fixed policy, where
/// `T_lambda` averages repeated policy backups with weights
/// `(1-lambda) lambda^l`. The infinite series is truncated once the
/// remaining tail is provably below a tenth of `tol`: the partial sum keeps
/// the analytically summed weight of the dropped terms on the latest backup,
/// so the truncation error after `L` terms is at most
/// `(alpha*lambda)^(L+1) / (1-alpha)` times the first backup residual.
/// `lambda = 0` reduces to plain policy evaluation.
pub fn lambda_evaluate(
    mdp: &Mdp,
    scheme: &AggregationScheme,
    policy: &Policy,
    lambda: f64,
    tol: f64,
) -> Result<LambdaSolution> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!(
            "lambda must lie in [0, 1), got {lambda}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    mdp.validate_policy(policy)?;
    if scheme.n() != mdp.n() {
        return Err(Error::InvalidArgument(format!(
            "scheme covers {} states, model has {}",
            scheme.n(),
            mdp.n()
        )));
    }
    let alpha = mdp.alpha();
    let threshold = if mdp.is_terminating() {
        tol
    } else {
        tol * (1.0 - alpha).min(alpha) / alpha
    };
    let tail_budget = tol / 10.0;
    let mut r = vec![0.0; scheme.q()];
    let mut residual = f64::INFINITY;
    let mut max_series_len = 0;
    for iteration in 1..=MAX_ITERATIONS {
        let lifted = lift_costs(scheme, &r);
        let weighted = weighted_backups(
            mdp,
            policy,
            &lifted,
            lambda,
            tail_budget,
            &mut max_series_len,
        );
        let next = disaggregate(scheme, &weighted);
        residual = sup_diff(&next, &r);
        r = next;
        if residual <= threshold {
            return Ok(LambdaSolution {
                r,
                iterations: iteration,
                residual,
                max_series_len,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        residual,
    })
}

fn weighted_backups(
    mdp: &Mdp,
    policy: &Policy,
    values: &[f64],
    lambda: f64,
    tail_budget: f64,
    max_series_len: &mut usize,
) -> Vec<f64> {
    let mut backup = mdp.bellman_policy(policy, values);
    if lambda == 0.0 {
        *max_series_len = (*max_series_len).max(1);
        return backup;
    }
    let alpha = mdp.alpha();
    let mut sum: Vec<f64> = backup.iter().map(|v| (1.0 - lambda) * v).collect();
    let mut tail_weight = lambda;
    let mut len = 1;
    let mut first_step = f64::INFINITY;
    loop {
        let next = mdp.bellman_policy(policy, &backup);
        if len == 1 {
            first_step = sup_diff(&next, &backup);
        }
        // Error from assigning the whole remaining weight to this backup:
        // successive backups contract toward the policy cost, so the dropped
        // terms differ from it by at most (alpha^len * first_step) / (1-alpha)
        // each, and they carry total weight lambda^len.
        let contraction = alpha.powi(len as i32);
        let tail_error = if alpha < 1.0 {
            tail_weight * contraction * first_step / (1.0 - alpha)
        } else {
            tail_weight * sup_diff(&next, &backup) / (1.0 - lambda)
        };
        backup = next;
        len += 1;
        if tail_error <= tail_budget || len as u64 > MAX_ITERATIONS {
            for (s, b) in sum.iter_mut().zip(&backup) {
                *s += tail_weight * b;
            }
            break;
        }
        for (s, b) in sum.iter_mut().zip(&backup) {
            *s += (1.0 - lambda) * tail_weight * b;
        }
        tail_weight *= lambda;
    }
    *max_series_len = (*max_series_len).max(len);
    sum
}
