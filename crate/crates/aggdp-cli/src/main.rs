//! Command-line front end for the aggregation solvers.
//!
//! Every subcommand reads JSON inputs, echoes a resolved-config block
//! (including the effective seed) to stdout, and emits a JSON result —
//! to stdout by default, or into `--out DIR` as `result.json` plus any
//! CSV tables. Outputs carry no timestamps, so identical invocations
//! produce byte-identical artifacts.
//!
//! Exit codes: 0 on success, 2 on validation or input errors, 3 on
//! numerical failures (no convergence, singular systems, divergence).

use std::fs;
use std::path::{Path, PathBuf};

use aggdp::aggregation::{check_error_bound, AggregationScheme};
use aggdp::discrete::{
    aggregate_optimize, rollout_solve, CellMode, CompletionHeuristic, ConstantCompletion,
    DiscreteProblem, GreedyCompletion, Knapsack, RandomTable, SolutionPool, StageSampler, Tsp,
};
use aggdp::fixtures::{random_discounted, random_partition};
use aggdp::mdp::Mdp;
use aggdp::net::{train_incremental, Encoder, NetworkParams, NetworkSpec, Sigma, TrainStep};
use aggdp::pipeline::{run_pi_with_nn_features, FeatureCells, NnPipelineOptions};
use aggdp::sim::{
    async_stochastic_vi, hard_agg_qlearning, lstd0_evaluate, Sampling, StepSize,
};
use aggdp::ssp::{compare_on_chain, ChainCase, ChainScoring};
use aggdp::{io, Error, Policy};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Value};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "aggdp", version, about = "Aggregation-based dynamic programming solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonIo {
    /// Model file (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Directory for artifacts; omitted = print the result to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplingArg {
    State,
    Aggregate,
}

#[derive(Clone, Copy, ValueEnum)]
enum SigmaArg {
    Softplus,
    Tanh,
    Logistic,
}

impl From<SigmaArg> for Sigma {
    fn from(s: SigmaArg) -> Sigma {
        match s {
            SigmaArg::Softplus => Sigma::Softplus,
            SigmaArg::Tanh => Sigma::Tanh,
            SigmaArg::Logistic => Sigma::Logistic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CaseArg {
    A,
    B,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScoringArg {
    /// Linear fit of the exact costs on the state index.
    V1,
    /// One-step fit of the stage costs on the state index.
    V0,
    /// The exact policy costs themselves.
    Jmu,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a model exactly by value iteration.
    SolveExact {
        #[command(flatten)]
        io: CommonIo,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Solve the aggregate problem (optimal, k-step, or weighted-multistep).
    SolveAggregate {
        #[command(flatten)]
        io: CommonIo,
        /// Aggregation scheme file (JSON).
        #[arg(long)]
        scheme: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Backups per application of the aggregate operator.
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Evaluate a fixed policy with geometrically weighted backups
        /// instead of optimizing (weight in [0, 1)).
        #[arg(long)]
        lambda: Option<f64>,
        /// Policy file (JSON array of 0-based control indices), used by
        /// --lambda; defaults to the first control everywhere.
        #[arg(long)]
        policy: Option<PathBuf>,
        /// "vi" (exact sweeps) or "async:STEPS" (sampled single-component
        /// updates; honors --stepsize and --seed).
        #[arg(long, default_value = "vi")]
        method: String,
        /// Stepsize for the async method: "harmonic" or "const:GAMMA".
        #[arg(long, default_value = "harmonic")]
        stepsize: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Policy iteration with aggregate policy evaluation.
    PiAggregate {
        #[command(flatten)]
        io: CommonIo,
        #[arg(long)]
        scheme: PathBuf,
        /// Initial policy file; defaults to the first control everywhere.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Simulation-based aggregate policy evaluation (least squares).
    Lstd {
        #[command(flatten)]
        io: CommonIo,
        #[arg(long)]
        scheme: PathBuf,
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        /// Importance weights: per original state or per aggregate state.
        #[arg(long, value_enum, default_value_t = SamplingArg::State)]
        sampling: SamplingArg,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Q-learning on the cell problem of a hard aggregation scheme.
    Qlearn {
        #[command(flatten)]
        io: CommonIo,
        #[arg(long)]
        scheme: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        steps: u64,
        /// "harmonic" or "const:GAMMA".
        #[arg(long, default_value = "harmonic")]
        stepsize: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Aggregate reformulation of a finite-stage discrete problem.
    DiscreteOpt {
        /// Problem file (JSON: {"kind": "random-table" | "knapsack" | "tsp", ...}).
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Score cells per dimension and stage; 0 = one cell per distinct
        /// score vector.
        #[arg(long, default_value_t = 0)]
        stages_q: usize,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(usize))]
        lookahead: usize,
        /// Report the pool-fortified solution as the headline result.
        #[arg(long)]
        fortified: bool,
        /// Sampled prefixes per stage; omitted = exhaustive enumeration.
        #[arg(long)]
        samples_per_stage: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// One-step rollout of the greedy completion heuristic.
    Rollout {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cost-chain benchmark: closed-form fits vs aggregation lifts.
    SspBench {
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, value_enum, default_value_t = CaseArg::A)]
        case: CaseArg,
        /// Comma-separated cell counts.
        #[arg(long, default_value = "5,10,25,50")]
        q_list: String,
        #[arg(long, value_enum, default_value_t = ScoringArg::V1)]
        scoring: ScoringArg,
        /// Directory for result.json and table.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the feature network on per-state targets.
    TrainNet {
        #[command(flatten)]
        io: CommonIo,
        /// Target file (JSON array or builtin spec) or a bare builtin name
        /// (jstar, jmu, residual).
        #[arg(long)]
        targets: String,
        /// Comma-separated nonlinear layer widths.
        #[arg(long, default_value = "8")]
        layers: String,
        #[arg(long, value_enum, default_value_t = SigmaArg::Tanh)]
        sigma: SigmaArg,
        #[arg(long, default_value_t = 300)]
        epochs: usize,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        #[arg(long, default_value_t = 0.0)]
        ridge: f64,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Policy improvement with network-mined feature cells.
    PiNn {
        #[command(flatten)]
        io: CommonIo,
        #[arg(long, default_value_t = 3)]
        cycles: usize,
        #[arg(long, default_value = "8")]
        layers: String,
        #[arg(long, value_enum, default_value_t = SigmaArg::Tanh)]
        sigma: SigmaArg,
        #[arg(long, default_value_t = 300)]
        epochs: usize,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        #[arg(long, default_value_t = 0.0)]
        ridge: f64,
        /// "singleton" or "grid:CELLS_PER_DIM".
        #[arg(long, default_value = "singleton")]
        cells: String,
        #[arg(long, default_value_t = 64)]
        sample_count: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Error-bound suite over seeded random models.
    CheckBounds {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        instances: u64,
        #[arg(long, default_value_t = 20)]
        max_states: usize,
        #[arg(long, default_value_t = 5)]
        max_cells: usize,
        #[arg(long, default_value_t = 0.9)]
        alpha: f64,
        /// Worker threads; 0 = one per core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{err}");
                    std::process::exit(0);
                }
                _ => {
                    let line = err.to_string();
                    let line = line.lines().next().unwrap_or("invalid arguments");
                    eprintln!("error: {line}");
                    std::process::exit(2);
                }
            }
        }
    };
    match dispatch(cli.command) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {}", err.to_string().replace('\n', "; "));
            std::process::exit(if err.is_numerical() { 3 } else { 2 });
        }
    }
}

/// Seed precedence: explicit flag, then AGGDP_SEED, then 0.
fn resolve_seed(flag: Option<u64>) -> Result<u64, Error> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("AGGDP_SEED") {
        Ok(text) => text
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("AGGDP_SEED is not a u64: {text:?}"))),
        Err(_) => Ok(0),
    }
}

fn read_file(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<Mdp, Error> {
    io::parse_mdp(&read_file(path)?)
}

fn load_scheme(path: &Path, n: usize) -> Result<AggregationScheme, Error> {
    io::parse_scheme(&read_file(path)?, n)
}

fn load_policy(path: Option<&PathBuf>, n: usize) -> Result<Policy, Error> {
    match path {
        None => Ok(Policy::first_control(n)),
        Some(p) => {
            let controls: Vec<usize> = serde_json::from_str(&read_file(p)?)
                .map_err(|e| Error::Parse(e.to_string()))?;
            Ok(Policy(controls))
        }
    }
}

fn parse_usize_list(text: &str, what: &str) -> Result<Vec<usize>, Error> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad {what} entry {part:?}")))
        })
        .collect()
}

fn parse_stepsize(text: &str) -> Result<StepSize, Error> {
    if text == "harmonic" {
        return Ok(StepSize::Harmonic);
    }
    if let Some(gamma) = text.strip_prefix("const:") {
        let gamma: f64 = gamma
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad stepsize constant {gamma:?}")))?;
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "stepsize constant must be positive and finite, got {gamma}"
            )));
        }
        return Ok(StepSize::Const(gamma));
    }
    Err(Error::InvalidArgument(format!(
        "stepsize must be \"harmonic\" or \"const:GAMMA\", got {text:?}"
    )))
}

fn parse_cells(text: &str) -> Result<FeatureCells, Error> {
    if text == "singleton" {
        return Ok(FeatureCells::Singleton);
    }
    if let Some(per_dim) = text.strip_prefix("grid:") {
        let per_dim: usize = per_dim
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad cell count {per_dim:?}")))?;
        return Ok(FeatureCells::Grid { per_dim });
    }
    Err(Error::InvalidArgument(format!(
        "cells must be \"singleton\" or \"grid:CELLS_PER_DIM\", got {text:?}"
    )))
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum ProblemSpec {
    RandomTable { stages: usize, arity: u32, seed: u64 },
    Knapsack { values: Vec<f64>, weights: Vec<f64>, capacity: f64 },
    Tsp { dist: Vec<Vec<f64>> },
}

fn load_problem(path: &Path) -> Result<Box<dyn DiscreteProblem>, Error> {
    let spec: ProblemSpec =
        serde_json::from_str(&read_file(path)?).map_err(|e| Error::Parse(e.to_string()))?;
    Ok(match spec {
        ProblemSpec::RandomTable { stages, arity, seed } => {
            Box::new(RandomTable { stages, arity, seed })
        }
        ProblemSpec::Knapsack { values, weights, capacity } => {
            Box::new(Knapsack::new(values, weights, capacity)?)
        }
        ProblemSpec::Tsp { dist } => Box::new(Tsp::new(dist)?),
    })
}

/// Prints the resolved-config block and places the result: into
/// `out/result.json` (plus any extra named files) when `--out` is given,
/// otherwise into stdout as part of the envelope.
fn emit(
    command: &str,
    seed: u64,
    config: Value,
    result: Value,
    out: Option<&Path>,
    extra_files: &[(&str, &str)],
) -> Result<(), Error> {
    let envelope = json!({
        "version": VERSION,
        "command": command,
        "seed": seed,
        "config": config,
        "result": result,
    });
    let header = json!({
        "version": VERSION,
        "command": command,
        "seed": seed,
        "config": envelope["config"],
    });
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| {
                Error::InvalidArgument(format!("cannot create {}: {e}", dir.display()))
            })?;
            let path = dir.join("result.json");
            let body = format!("{:#}\n", envelope);
            fs::write(&path, body).map_err(|e| {
                Error::InvalidArgument(format!("cannot write {}: {e}", path.display()))
            })?;
            for (name, content) in extra_files {
                let path = dir.join(name);
                fs::write(&path, content).map_err(|e| {
                    Error::InvalidArgument(format!("cannot write {}: {e}", path.display()))
                })?;
            }
            println!("{header:#}");
        }
        None => {
            if !extra_files.is_empty() {
                return Err(Error::InvalidArgument(
                    "this subcommand writes tables; pass --out DIR".into(),
                ));
            }
            println!("{envelope:#}");
        }
    }
    Ok(())
}

fn to_value<T: serde::Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("result serialization cannot fail")
}

fn dispatch(command: Command) -> Result<(), Error> {
    match command {
        Command::SolveExact { io: cio, tol } => {
            let mdp = load_model(&cio.model)?;
            let sol = mdp.solve_exact_vi(tol)?;
            emit(
                "solve-exact",
                0,
                json!({"model": cio.model, "tol": tol}),
                to_value(&sol),
                cio.out.as_deref(),
                &[],
            )
        }
        Command::SolveAggregate {
            io: cio, scheme, tol, k, lambda, policy, method, stepsize, seed,
        } => {
            let seed = resolve_seed(seed)?;
            let mdp = load_model(&cio.model)?;
            let sch = load_scheme(&scheme, mdp.n())?;
            let config = json!({
                "model": cio.model, "scheme": scheme, "tol": tol, "k": k,
                "lambda": lambda, "policy": policy, "method": method,
                "stepsize": stepsize,
            });
            let result = if let Some(steps) = method.strip_prefix("async:") {
                if lambda.is_some() || k != 1 {
                    return Err(Error::InvalidArgument(
                        "the async method supports neither --lambda nor --k".into(),
                    ));
                }
                let steps: u64 = steps.parse().map_err(|_| {
                    Error::InvalidArgument(format!("bad async step count {steps:?}"))
                })?;
                let step = parse_stepsize(&stepsize)?;
                to_value(&async_stochastic_vi(&mdp, &sch, steps, step, seed)?)
            } else if method != "vi" {
                return Err(Error::InvalidArgument(format!(
                    "method must be \"vi\" or \"async:STEPS\", got {method:?}"
                )));
            } else {
                match lambda {
                    Some(lambda) => {
                        let mu = load_policy(policy.as_ref(), mdp.n())?;
                        to_value(&aggdp::multistep::lambda_evaluate(
                            &mdp, &sch, &mu, lambda, tol,
                        )?)
                    }
                    None if k == 1 => to_value(&aggdp::aggregation::solve_aggregate_vi(
                        &mdp, &sch, tol,
                    )?),
                    None => to_value(&aggdp::multistep::solve_kstep(&mdp, &sch, k, tol)?),
                }
            };
            emit("solve-aggregate", seed, config, result, cio.out.as_deref(), &[])
        }
        Command::PiAggregate { io: cio, scheme, policy } => {
            let mdp = load_model(&cio.model)?;
            let sch = load_scheme(&scheme, mdp.n())?;
            let initial = policy.as_ref().map(|_| load_policy(policy.as_ref(), mdp.n())).transpose()?;
            let sol = aggdp::aggregation::aggregation_policy_iteration(&mdp, &sch, initial)?;
            emit(
                "pi-aggregate",
                0,
                json!({"model": cio.model, "scheme": scheme, "policy": policy}),
                to_value(&sol),
                cio.out.as_deref(),
                &[],
            )
        }
        Command::Lstd { io: cio, scheme, policy, samples, sampling, seed } => {
            let seed = resolve_seed(seed)?;
            let mdp = load_model(&cio.model)?;
            let sch = load_scheme(&scheme, mdp.n())?;
            let mu = load_policy(policy.as_ref(), mdp.n())?;
            let (sampling, label) = match sampling {
                SamplingArg::State => (Sampling::State(None), "state"),
                SamplingArg::Aggregate => (Sampling::Aggregate(None), "aggregate"),
            };
            let sol = lstd0_evaluate(&mdp, &sch, &mu, samples, &sampling, seed)?;
            emit(
                "lstd",
                seed,
                json!({
                    "model": cio.model, "scheme": scheme, "policy": policy,
                    "samples": samples, "sampling": label,
                }),
                to_value(&sol),
                cio.out.as_deref(),
                &[],
            )
        }
        Command::Qlearn { io: cio, scheme, steps, stepsize, seed } => {
            let seed = resolve_seed(seed)?;
            let mdp = load_model(&cio.model)?;
            let sch = load_scheme(&scheme, mdp.n())?;
            let step = parse_stepsize(&stepsize)?;
            let sol = hard_agg_qlearning(&mdp, &sch, steps, step, seed)?;
            emit(
                "qlearn",
                seed,
                json!({
                    "model": cio.model, "scheme": scheme, "steps": steps,
                    "stepsize": stepsize,
                }),
                to_value(&sol),
                cio.out.as_deref(),
                &[],
            )
        }
        Command::DiscreteOpt {
            problem, out, stages_q, lookahead, fortified, samples_per_stage, seed,
        } => {
            let seed = resolve_seed(seed)?;
            let prob = load_problem(&problem)?;
            let zero = ConstantCompletion(0);
            let greedy = GreedyCompletion;
            let heurs: [&dyn CompletionHeuristic; 2] = [&zero, &greedy];
            let mode = if stages_q == 0 {
                CellMode::Singleton
            } else {
                CellMode::PerDim(stages_q)
            };
            let sampler = match samples_per_stage {
                None => StageSampler::Exhaustive,
                Some(per_stage) => StageSampler::Random { per_stage, seed },
            };
            let report = aggregate_optimize(prob.as_ref(), &heurs, sampler, mode, lookahead)?;
            let (solution, cost) = if fortified {
                (report.fortified_solution.clone(), report.fortified_cost)
            } else {
                (report.solution.clone(), report.cost)
            };
            let mut result = to_value(&report);
            result["selected_solution"] = json!(solution);
            result["selected_cost"] = json!(cost);
            emit(
                "discrete-opt",
                seed,
                json!({
                    "problem": problem, "stages_q": stages_q, "lookahead": lookahead,
                    "fortified": fortified, "samples_per_stage": samples_per_stage,
                }),
                result,
                out.as_deref(),
                &[],
            )
        }
        Command::Rollout { problem, out } => {
            let prob = load_problem(&problem)?;
            let greedy = GreedyCompletion;
            let heurs: [&dyn CompletionHeuristic; 1] = [&greedy];
            let mut pool = SolutionPool::default();
            let rolled = rollout_solve(prob.as_ref(), &heurs, &mut pool)?;
            emit(
                "rollout",
                0,
                json!({"problem": problem}),
                json!({"solution": rolled.solution, "cost": rolled.cost}),
                out.as_deref(),
                &[],
            )
        }
        Command::SspBench { n, case, q_list, scoring, out } => {
            let qs = parse_usize_list(&q_list, "q-list")?;
            let case = match case {
                CaseArg::A => ChainCase::A,
                CaseArg::B => ChainCase::B,
            };
            let (scoring, label) = match scoring {
                ScoringArg::V1 => (ChainScoring::V1Fit, "v1"),
                ScoringArg::V0 => (ChainScoring::V0Fit, "v0"),
                ScoringArg::Jmu => (ChainScoring::ExactCost, "jmu"),
            };
            let table = compare_on_chain(n, case, &qs, scoring)?;
            let csv = table.to_csv();
            emit(
                "ssp-bench",
                0,
                json!({"n": n, "case": case, "q_list": qs, "scoring": label}),
                to_value(&table),
                Some(&out),
                &[("table.csv", &csv)],
            )
        }
        Command::TrainNet { io: cio, targets, layers, sigma, epochs, step, ridge, seed } => {
            let seed = resolve_seed(seed)?;
            let mdp = load_model(&cio.model)?;
            let spec_text = if Path::new(&targets).exists() {
                read_file(Path::new(&targets))?
            } else {
                format!("{:?}", targets)
            };
            let scores = io::resolve_scores(&io::parse_scores(&spec_text)?, &mdp)?;
            let data: Vec<(usize, f64)> =
                scores.iter().enumerate().map(|(i, &v)| (i + 1, v)).collect();
            let widths = parse_usize_list(&layers, "layers")?;
            let spec = NetworkSpec::uniform(Encoder::OneHot(mdp.n()), &widths, sigma.into())?;
            let params = NetworkParams::init(&spec, seed)?;
            let trained = train_incremental(
                &spec,
                &params,
                &data,
                epochs,
                TrainStep::Const(step),
                seed,
                ridge,
            )?;
            emit(
                "train-net",
                seed,
                json!({
                    "model": cio.model, "targets": targets, "layers": widths,
                    "sigma": to_value(&Sigma::from(sigma)), "epochs": epochs,
                    "step": step, "ridge": ridge,
                }),
                json!({"params": trained.params, "loss_trace": trained.loss_trace}),
                cio.out.as_deref(),
                &[],
            )
        }
        Command::PiNn {
            io: cio, cycles, layers, sigma, epochs, step, ridge, cells, sample_count,
            noise, seed,
        } => {
            let seed = resolve_seed(seed)?;
            let mdp = load_model(&cio.model)?;
            let opts = NnPipelineOptions {
                widths: parse_usize_list(&layers, "layers")?,
                sigma: sigma.into(),
                epochs,
                step,
                ridge,
                cells: parse_cells(&cells)?,
                sample_count,
                noise,
                freeze_features: false,
            };
            let (policy, reports) = run_pi_with_nn_features(&mdp, None, cycles, &opts, seed)?;
            emit(
                "pi-nn",
                seed,
                json!({
                    "model": cio.model, "cycles": cycles, "layers": opts.widths,
                    "sigma": to_value(&opts.sigma), "epochs": epochs, "step": step,
                    "ridge": ridge, "cells": cells, "sample_count": sample_count,
                    "noise": noise,
                }),
                json!({"policy": policy, "cycles": reports}),
                cio.out.as_deref(),
                &[],
            )
        }
        Command::CheckBounds {
            out, instances, max_states, max_cells, alpha, jobs, seed,
        } => {
            let seed = resolve_seed(seed)?;
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "alpha must lie in (0, 1), got {alpha}"
                )));
            }
            if max_states < 2 {
                return Err(Error::InvalidArgument(
                    "need at least two states per instance".into(),
                ));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?;
            let rows: Result<Vec<Value>, Error> = pool.install(|| {
                (0..instances)
                    .into_par_iter()
                    .map(|index| {
                        let inst = seed.wrapping_add(index);
                        let n = 2 + (inst as usize) % (max_states - 1);
                        let q = 1 + (inst as usize) % max_cells.min(n);
                        let mdp = random_discounted(inst, n, 3, alpha);
                        let scheme = aggdp::aggregation::build_hard_aggregation(
                            n,
                            &random_partition(inst, n, q),
                            None,
                        )?;
                        let exact = mdp.solve_exact_vi(1e-12)?;
                        let agg = aggdp::aggregation::solve_aggregate_vi(&mdp, &scheme, 1e-12)?;
                        let report =
                            check_error_bound(&mdp, &scheme, &agg.r, &exact.values, 1e-9)?;
                        Ok(json!({
                            "seed": inst, "n": n, "q": q,
                            "epsilon": report.epsilon,
                            "bound": report.bound,
                            "max_gap": report.max_gap,
                            "ok": report.ok,
                            "violations": report.violations.len(),
                        }))
                    })
                    .collect()
            });
            let rows = rows?;
            let violations = rows
                .iter()
                .filter(|row| row["ok"] != json!(true))
                .count();
            let result = json!({
                "instances": rows,
                "violations": violations,
                "all_within_bound": violations == 0,
            });
            emit(
                "check-bounds",
                seed,
                json!({
                    "instances": instances, "max_states": max_states,
                    "max_cells": max_cells, "alpha": alpha, "jobs": jobs,
                }),
                result,
                out.as_deref(),
                &[],
            )
        }
    }
}
