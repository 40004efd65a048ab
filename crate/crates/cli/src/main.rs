//! `pctl`: learn, check and generate for relational pCTL safety formulae.
//!
//! Exit codes: 0 when the requested thing was found (solutions exist, the
//! formula is satisfied), 2 when it was not, 1 on any error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use pctl_cli::report::{ConfigEcho, RunReport, SolutionEntry, StatsEntry};
use pctl_cli::textio;
use pctl_core::formula::{parse_formula, render_formula, Formula, PathOperator};
use pctl_core::learner::{learn, learn_with_policy, most_specific, LearnConfig};
use pctl_core::logic::apply_substitution;
use pctl_core::modelcheck::{
    max_prob_eventually, max_prob_globally, policy_prob, relevant_groundings, satisfies,
    PathQuery,
};
use pctl_core::rmdp::{
    validate_model, validate_policy, CompiledModel, CompiledPattern, GroundState, Policy,
    RmdpModel,
};

#[derive(Parser)]
#[command(
    name = "pctl",
    about = "Bounded checking and inductive learning of relational pCTL safety formulae",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn all consistent formulae from labelled examples.
    Learn(LearnArgs),
    /// Check one formula in one state.
    Check(CheckArgs),
    /// Generate labelled examples from a target formula.
    Gen(GenArgs),
}

#[derive(Args)]
struct LearnArgs {
    /// Domain file.
    #[arg(long)]
    domain: PathBuf,
    /// Examples file (`+`/`-` prefixed atom lists).
    #[arg(long)]
    examples: PathBuf,
    /// Probability threshold of all candidates.
    #[arg(long)]
    alpha: f64,
    /// Step bound of all candidates.
    #[arg(long)]
    k: u32,
    /// Maximum state-formula length.
    #[arg(long = "max-len")]
    max_len: usize,
    /// Do not instantiate variables with constants.
    #[arg(long = "no-instantiation")]
    no_instantiation: bool,
    /// Learn with respect to this decision-list policy.
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Echoed into the report; the search itself is deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// Domain file.
    #[arg(long)]
    domain: PathBuf,
    /// The formula, e.g. "P>=0.9 F<=3 [on(X,Y)]".
    #[arg(long)]
    formula: String,
    /// State file (one bracketed ground atom list).
    #[arg(long)]
    state: PathBuf,
    /// Check under this policy instead of the maximizing semantics.
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Replace the formula's step bound.
    #[arg(long = "k-override")]
    k_override: Option<u32>,
}

#[derive(Args)]
struct GenArgs {
    /// Domain file.
    #[arg(long)]
    domain: PathBuf,
    /// Target formula that labels the samples.
    #[arg(long)]
    target: String,
    /// Number of positive examples.
    #[arg(long)]
    pos: usize,
    /// Number of negative examples.
    #[arg(long)]
    neg: usize,
    /// Atoms per example.
    #[arg(long)]
    length: usize,
    /// Sampler seed; the output is byte-identical per seed.
    #[arg(long)]
    seed: u64,
    /// Output examples file.
    #[arg(long)]
    out: PathBuf,
    /// Distinct variables available to the sampler.
    #[arg(long = "variable-pool", default_value_t = 8)]
    variable_pool: usize,
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run() -> Result<u8> {
    match Cli::parse().command {
        Command::Learn(args) => cmd_learn(args),
        Command::Check(args) => cmd_check(args),
        Command::Gen(args) => cmd_gen(args),
    }
}

fn load_domain(path: &PathBuf) -> Result<RmdpModel> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading domain file {}", path.display()))?;
    let model = textio::parse_domain(&text)
        .map_err(|e| anyhow!("{}: {e}", path.display()))?;
    let report = validate_model(&model);
    if !report.is_valid() {
        bail!("{}: invalid model:\n{report}", path.display());
    }
    Ok(model)
}

fn load_policy(model: &RmdpModel, path: &PathBuf) -> Result<Policy> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading policy file {}", path.display()))?;
    let policy =
        textio::parse_policy(&text, &model.vocab).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    let report = validate_policy(model, &policy);
    if !report.is_valid() {
        bail!("{}: invalid policy:\n{report}", path.display());
    }
    Ok(policy)
}

fn cmd_learn(args: LearnArgs) -> Result<u8> {
    let model = load_domain(&args.domain)?;
    let examples_text = fs::read_to_string(&args.examples)
        .with_context(|| format!("reading examples file {}", args.examples.display()))?;
    let examples = textio::parse_examples(&examples_text, &model.vocab)
        .map_err(|e| anyhow!("{}: {e}", args.examples.display()))?;
    let policy = args
        .policy
        .as_ref()
        .map(|p| load_policy(&model, p))
        .transpose()?;

    let config = LearnConfig {
        instantiation: !args.no_instantiation,
        seed: args.seed,
        ..LearnConfig::new(args.alpha, args.k, args.max_len)
    };
    let started = Instant::now();
    let (solutions, stats) = match &policy {
        None => learn(&model, &examples, &config)?,
        Some(pi) => learn_with_policy(&model, &examples, &config, pi)?,
    };
    let elapsed_ms = started.elapsed().as_millis() as u64;

    let entry = |s: &pctl_core::learner::Solution| SolutionEntry {
        formula: render_formula(&s.formula, &model.vocab),
        depth: s.depth,
    };
    let report = RunReport {
        config: ConfigEcho {
            domain: args.domain.display().to_string(),
            examples: args.examples.display().to_string(),
            alpha: args.alpha,
            k: args.k,
            max_len: args.max_len,
            instantiation: !args.no_instantiation,
            policy: args.policy.as_ref().map(|p| p.display().to_string()),
            seed: args.seed,
        },
        solutions: solutions.iter().map(entry).collect(),
        most_specific: most_specific(&solutions, &model.vocab)
            .iter()
            .map(entry)
            .collect(),
        stats: StatsEntry::from(stats),
        elapsed_ms,
    };
    let json = report.to_json();
    match &args.out {
        Some(path) => fs::write(path, json + "\n")
            .with_context(|| format!("writing report to {}", path.display()))?,
        None => println!("{json}"),
    }
    Ok(if solutions.is_empty() { 2 } else { 0 })
}

fn cmd_check(args: CheckArgs) -> Result<u8> {
    let model = load_domain(&args.domain)?;
    let mut psi: Formula =
        parse_formula(&args.formula, &model.vocab).map_err(|e| anyhow!("formula: {e}"))?;
    if let Some(k) = args.k_override {
        psi.k = k;
    }
    let state_text = fs::read_to_string(&args.state)
        .with_context(|| format!("reading state file {}", args.state.display()))?;
    let state = textio::parse_state(&state_text, &model.vocab)
        .map_err(|e| anyhow!("{}: {e}", args.state.display()))?;
    let policy = args
        .policy
        .as_ref()
        .map(|p| load_policy(&model, p))
        .transpose()?;

    let compiled = CompiledModel::new(&model)?;
    if !compiled.is_legal(&state) {
        bail!("state violates an integrity constraint");
    }
    println!("formula: {}", render_formula(&psi, &model.vocab));
    println!("state: {}", state.render(&model.vocab));
    let thetas = relevant_groundings(&compiled, &state, &psi.phi, psi.op, psi.k)?;
    if thetas.is_empty() {
        println!("no relevant groundings");
    }
    for theta in &thetas {
        let ground = apply_substitution(&psi.phi, theta, &model.vocab)?;
        let instance = CompiledPattern::compile(&ground, &model.vocab)?;
        let pred = |s: &GroundState| instance.matches(s);
        let p = match &policy {
            Some(pi) => {
                let query = PathQuery {
                    op: psi.op,
                    k: psi.k,
                    pred: &pred,
                };
                policy_prob(&compiled, pi, &state, &query)?
            }
            None => match psi.op {
                PathOperator::Finally => max_prob_eventually(&compiled, &state, &pred, psi.k)?,
                PathOperator::Globally => max_prob_globally(&compiled, &state, &pred, psi.k)?,
            },
        };
        println!("grounding {}: p = {p}", textio::render_substitution(theta));
    }
    let verdict = satisfies(&compiled, &state, &psi, policy.as_ref())?;
    println!("verdict: {verdict}");
    Ok(if verdict { 0 } else { 2 })
}

fn cmd_gen(args: GenArgs) -> Result<u8> {
    let model = load_domain(&args.domain)?;
    let target =
        parse_formula(&args.target, &model.vocab).map_err(|e| anyhow!("target: {e}"))?;
    let cfg = pctl_core::domains::GenerateConfig {
        variable_pool: args.variable_pool,
        ..pctl_core::domains::GenerateConfig::new(args.pos, args.neg, args.length, args.seed)
    };
    let examples = pctl_core::domains::generate_examples(&model, &target, &cfg)?;
    let text = textio::render_examples(&examples, &model.vocab);
    fs::write(&args.out, text)
        .with_context(|| format!("writing examples to {}", args.out.display()))?;
    Ok(0)
}
