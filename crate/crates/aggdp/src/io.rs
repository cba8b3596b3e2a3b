//! JSON ingestion for models, aggregation schemes, and scoring functions.
//!
//! The loaders validate through the same constructors the library uses
//! internally, so malformed input is reported with the violating state and
//! control named and never panics.

use crate::aggregation::{build_hard_aggregation, AggregationScheme};
use crate::error::{Error, Result};
use crate::mdp::{Mdp, Policy, Transitions};
use serde::Deserialize;

#[derive(Deserialize)]
struct MdpFile {
    n: usize,
    #[serde(default)]
    alpha: Option<f64>,
    states: Vec<StateFile>,
}

#[derive(Deserialize)]
struct StateFile {
    controls: Vec<ControlFile>,
}

#[derive(Deserialize)]
struct ControlFile {
    transitions: Vec<(usize, f64, f64)>,
}

fn json_error(err: serde_json::Error) -> Error {
    Error::Parse(err.to_string())
}

/// Parses a model from JSON: `n`, optional `alpha` (absent means a
/// terminating model where destination 0 is termination), and per-state
/// control lists of `[destination, probability, cost]` rows, 1-based.
pub fn parse_mdp(text: &str) -> Result<Mdp> {
    let file: MdpFile = serde_json::from_str(text).map_err(json_error)?;
    if file.states.len() != file.n {
        return Err(Error::InvalidModel(format!(
            "header says {} states, file lists {}",
            file.n,
            file.states.len()
        )));
    }
    let transitions: Transitions = file
        .states
        .into_iter()
        .map(|s| s.controls.into_iter().map(|c| c.transitions).collect())
        .collect();
    match file.alpha {
        Some(alpha) => Mdp::discounted(file.n, alpha, transitions),
        None => Mdp::ssp(file.n, transitions),
    }
}

#[derive(Deserialize)]
struct SchemeFile {
    q: usize,
    disagg_sets: Vec<Vec<usize>>,
    #[serde(default, rename = "D")]
    d: Option<Vec<Vec<f64>>>,
    #[serde(default, rename = "Phi")]
    phi: Option<Vec<Vec<f64>>>,
}

/// Parses an aggregation scheme for a model with `n` states: `q`,
/// `disagg_sets`, and optional `D`/`Phi` matrices. An absent `D` defaults to
/// uniform weights over each set; an absent `Phi` defaults to 0/1 membership
/// columns, which requires the sets to partition the states.
pub fn parse_scheme(text: &str, n: usize) -> Result<AggregationScheme> {
    let file: SchemeFile = serde_json::from_str(text).map_err(json_error)?;
    if file.disagg_sets.len() != file.q {
        return Err(Error::InvalidScheme(format!(
            "header says {} aggregate states, file lists {} sets",
            file.q,
            file.disagg_sets.len()
        )));
    }
    match file.phi {
        Some(phi) => {
            let d = match file.d {
                Some(d) => d,
                None => uniform_d(n, &file.disagg_sets)?,
            };
            AggregationScheme::new(n, file.disagg_sets, d, phi)
        }
        None => {
            let covered: usize = file.disagg_sets.iter().map(|s| s.len()).sum();
            if covered != n {
                return Err(Error::InvalidScheme(
                    "Phi can only default to 0/1 membership when the disaggregation \
                     sets partition the states"
                        .into(),
                ));
            }
            build_hard_aggregation(n, &file.disagg_sets, file.d.as_deref())
        }
    }
}

fn uniform_d(n: usize, sets: &[Vec<usize>]) -> Result<Vec<Vec<f64>>> {
    let mut d = vec![vec![0.0; n]; sets.len()];
    for (l, set) in sets.iter().enumerate() {
        if set.is_empty() {
            return Err(Error::InvalidScheme(format!(
                "disaggregation set {l} is empty"
            )));
        }
        for &i in set {
            if i == 0 || i > n {
                return Err(Error::InvalidScheme(format!(
                    "disaggregation set {l} mentions state {i}, valid range is 1..={n}"
                )));
            }
            d[l][i - 1] = 1.0 / set.len() as f64;
        }
    }
    Ok(d)
}

/// A scoring-function input: explicit per-state values or a built-in name.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum ScoresSpec {
    /// `[v1, v2, ...]`, one value per state.
    Values(Vec<f64>),
    /// `"jstar"`, `"jmu"`, or `"residual"`.
    Name(String),
    /// `{"builtin": "jstar"}` and friends.
    Tagged { builtin: String },
}

/// Parses a scoring input: a JSON array of per-state values, a built-in
/// name, or `{"builtin": name}`.
pub fn parse_scores(text: &str) -> Result<ScoresSpec> {
    serde_json::from_str(text).map_err(json_error)
}

/// Turns a scoring input into per-state values on the model. Built-ins:
/// `jstar` (exact optimal cost), `jmu` (exact cost of the first-control
/// policy), and `residual` (one optimal backup from zero — the myopic
/// one-step cost).
pub fn resolve_scores(spec: &ScoresSpec, mdp: &Mdp) -> Result<Vec<f64>> {
    match spec {
        ScoresSpec::Values(values) => {
            if values.len() != mdp.n() {
                return Err(Error::InvalidArgument(format!(
                    "expected {} scores, got {}",
                    mdp.n(),
                    values.len()
                )));
            }
            if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "scores must be finite, found {bad}"
                )));
            }
            Ok(values.clone())
        }
        ScoresSpec::Name(name) | ScoresSpec::Tagged { builtin: name } => match name.as_str() {
            "jstar" => Ok(mdp.solve_exact_vi(1e-12)?.values),
            "jmu" => mdp.evaluate_policy(&Policy::first_control(mdp.n()), 1e-12),
            "residual" => Ok(mdp.bellman_optimal(&vec![0.0; mdp.n()])),
            other => Err(Error::InvalidArgument(format!(
                "unknown built-in scoring '{other}'; expected jstar, jmu, or residual"
            ))),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::sup_diff;

    const TWO_STATE_JSON: &str = r#"{
        "n": 2,
        "alpha": 0.5,
        "states": [
            {"controls": [{"transitions": [[2, 1.0, 1.0]]}]},
            {"controls": [{"transitions": [[1, 1.0, 0.0]]}]}
        ]
    }"#;

    #[test]
    fn parses_the_discounted_fixture() {
        let mdp = parse_mdp(TWO_STATE_JSON).unwrap();
        assert_eq!(mdp.n(), 2);
        assert_eq!(mdp.alpha(), 0.5);
        let values = mdp.solve_exact_vi(1e-12).unwrap().values;
        assert!((values[0] - 4.0 / 3.0).abs() < 1e-9);
        assert!((values[1] - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn missing_alpha_means_terminating() {
        let text = r#"{
            "n": 2,
            "states": [
                {"controls": [{"transitions": [[0, 1.0, 1.0]]}]},
                {"controls": [{"transitions": [[1, 1.0, 1.0]]}]}
            ]
        }"#;
        let mdp = parse_mdp(text).unwrap();
        assert!(mdp.is_terminating());
        let values = mdp.solve_exact_vi(1e-12).unwrap().values;
        assert!(sup_diff(&values, &[1.0, 2.0]) < 1e-9);
    }

    #[test]
    fn malformed_probability_row_names_state_and_control() {
        let text = r#"{
            "n": 2,
            "alpha": 0.5,
            "states": [
                {"controls": [{"transitions": [[2, 0.9, 1.0]]}]},
                {"controls": [{"transitions": [[1, 1.0, 0.0]]}]}
            ]
        }"#;
        let err = parse_mdp(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("state 1"), "{msg}");
        assert!(msg.contains("control 0"), "{msg}");
    }

    #[test]
    fn broken_json_is_a_parse_error() {
        assert!(matches!(parse_mdp("{"), Err(Error::Parse(_))));
        assert!(matches!(parse_mdp("[1,2]"), Err(Error::Parse(_))));
        assert!(matches!(parse_scores("{"), Err(Error::Parse(_))));
        assert!(matches!(parse_scheme("{}", 3), Err(Error::Parse(_))));
    }

    #[test]
    fn header_count_mismatch_is_rejected() {
        let text = r#"{"n": 3, "alpha": 0.5, "states": []}"#;
        assert!(matches!(parse_mdp(text), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn scheme_defaults_build_hard_aggregation() {
        let text = r#"{"q": 2, "disagg_sets": [[1, 2], [3]]}"#;
        let scheme = parse_scheme(text, 3).unwrap();
        assert!(scheme.is_hard());
        assert_eq!(scheme.d()[0][0], 0.5);
        assert_eq!(scheme.phi()[2][1], 1.0);
    }

    #[test]
    fn scheme_without_phi_needs_a_partition() {
        let text = r#"{"q": 1, "disagg_sets": [[1]]}"#;
        let err = parse_scheme(text, 3).unwrap_err();
        assert!(err.to_string().contains("partition"));
    }

    #[test]
    fn scheme_with_explicit_matrices_roundtrips() {
        let text = r#"{
            "q": 2,
            "disagg_sets": [[1], [3]],
            "D": [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
            "Phi": [[1.0, 0.0], [0.5, 0.5], [0.0, 1.0]]
        }"#;
        let scheme = parse_scheme(text, 3).unwrap();
        assert_eq!(scheme.q(), 2);
        assert!(!scheme.is_hard());
        assert_eq!(scheme.phi()[1], vec![0.5, 0.5]);
    }

    #[test]
    fn scores_accept_values_names_and_tags() {
        let mdp = parse_mdp(TWO_STATE_JSON).unwrap();
        let from_values = resolve_scores(&parse_scores("[0.5, 0.25]").unwrap(), &mdp).unwrap();
        assert_eq!(from_values, vec![0.5, 0.25]);
        let jstar = resolve_scores(&parse_scores("\"jstar\"").unwrap(), &mdp).unwrap();
        assert!((jstar[0] - 4.0 / 3.0).abs() < 1e-9);
        let tagged =
            resolve_scores(&parse_scores(r#"{"builtin": "jmu"}"#).unwrap(), &mdp).unwrap();
        assert!(sup_diff(&jstar, &tagged) < 1e-9);
        let residual =
            resolve_scores(&parse_scores("\"residual\"").unwrap(), &mdp).unwrap();
        assert_eq!(residual, vec![1.0, 0.0]);
    }

    #[test]
    fn score_length_and_unknown_names_are_rejected() {
        let mdp = parse_mdp(TWO_STATE_JSON).unwrap();
        assert!(resolve_scores(&parse_scores("[1.0]").unwrap(), &mdp).is_err());
        assert!(resolve_scores(&parse_scores("\"bogus\"").unwrap(), &mdp).is_err());
    }
}
