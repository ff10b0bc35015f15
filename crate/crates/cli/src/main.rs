//! `regmdp`: generate instances, solve them, and run identity checks.
//!
//! Exit status: 0 on success, 1 if any requested check fails, 2 on usage or
//! input errors, 3 on numerical breakdown.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::Rng;
use rand_distr::StandardNormal;
use regmdp::io::{to_json_string, SolutionFile};
use regmdp::{
    boundary_mdp, check_basic_lemma, check_kl_corollary_with, check_main_theorem_with,
    check_normal_cone_all, check_pdl, check_relint_all, evaluate_policy, load_mdp, load_policy,
    random_mdp, rng_from_seed, solve_optimal, Identity, Mdp, Policy, Regularizer, SolveOptions,
    VerificationReport, DEFAULT_SOLVER_TOL, DEFAULT_VERIFY_TOL,
};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "regmdp", version, about = "Regularized MDP solver and identity checker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write seeded random instances (or the engineered boundary instance).
    Generate(GenerateArgs),
    /// Compute the regularized optimal values and policy of an instance.
    Solve(SolveArgs),
    /// Evaluate a fixed policy under a regularizer.
    Evaluate(EvaluateArgs),
    /// Check the identities and write a single aggregated report.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// `A..B` (inclusive), `A,B,C`, or a single seed.
    #[arg(long, default_value = "0")]
    seeds: String,
    #[arg(long, default_value = "3x2", value_parser = args::parse_sizes)]
    sizes: (usize, usize),
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    /// Build the instance whose first action pays this much more in every
    /// state, instead of a random one. Seeds are ignored.
    #[arg(long)]
    boundary_spread: Option<f64>,
    /// Output file, or a directory when several seeds are given. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    mdp: PathBuf,
    /// `entropy:TAU` or `l2:TAU`.
    #[arg(long, value_parser = parse_reg)]
    reg: Regularizer,
    /// Stopping threshold on successive value iterates.
    #[arg(long, default_value_t = DEFAULT_SOLVER_TOL)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    mdp: PathBuf,
    #[arg(long)]
    policy: PathBuf,
    #[arg(long, value_parser = parse_reg)]
    reg: Regularizer,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Instance file. Without it, instances are generated from `--seeds`.
    #[arg(long)]
    mdp: Option<PathBuf>,
    /// Policy to compare against the optimum. Defaults to a seeded random policy.
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long, value_parser = parse_reg)]
    reg: Regularizer,
    /// Seeds for generated instances and for the random policies and test vectors.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long, default_value = "3x2", value_parser = args::parse_sizes)]
    sizes: (usize, usize),
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    /// Verification tolerance.
    #[arg(long, default_value_t = DEFAULT_VERIFY_TOL)]
    tol: f64,
    /// Any of pdl, basic, normalcone, relint, main, kl, all.
    #[arg(long, default_value = "all")]
    identity: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_reg(text: &str) -> Result<Regularizer, String> {
    text.parse().map_err(|e: regmdp::Error| e.to_string())
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(regmdp::Error),
    Failed(String),
}

impl From<regmdp::Error> for CliError {
    fn from(e: regmdp::Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Lib(e) if e.is_numerical() => 3,
            CliError::Usage(_) | CliError::Lib(_) => 2,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn emit(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Lib(e.into())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn generate(a: &GenerateArgs) -> CliResult<()> {
    let (ns, na) = a.sizes;
    if let Some(spread) = a.boundary_spread {
        let m = boundary_mdp(ns, na, spread, a.gamma)?;
        return emit(&regmdp::io::mdp_to_string(&m)?, a.out.as_deref());
    }
    let seeds = args::parse_seeds(&a.seeds).map_err(CliError::Usage)?;
    if let [seed] = seeds[..] {
        let m = random_mdp(ns, na, a.gamma, seed)?;
        return emit(&regmdp::io::mdp_to_string(&m)?, a.out.as_deref());
    }
    let dir = a
        .out
        .as_deref()
        .ok_or_else(|| CliError::Usage("several seeds need --out DIR".into()))?;
    fs::create_dir_all(dir).map_err(|e| CliError::Lib(e.into()))?;
    for seed in seeds {
        let m = random_mdp(ns, na, a.gamma, seed)?;
        regmdp::save_mdp(&m, dir.join(format!("mdp_seed_{seed}.json")))?;
    }
    Ok(())
}

fn solve(a: &SolveArgs) -> CliResult<()> {
    let m = load_mdp(&a.mdp)?;
    let sol = solve_optimal(&m, &a.reg, &SolveOptions::with_tol(a.tol))?;
    emit(&to_json_string(&SolutionFile::from(&sol))?, a.out.as_deref())
}

fn evaluate(a: &EvaluateArgs) -> CliResult<()> {
    let m = load_mdp(&a.mdp)?;
    let pi = load_policy(&a.policy)?;
    let sol = evaluate_policy(&m, &a.reg, &pi)?;
    emit(&to_json_string(&SolutionFile::from(&sol))?, a.out.as_deref())
}

#[derive(Serialize)]
struct Entry {
    seed: u64,
    #[serde(flatten)]
    report: VerificationReport,
}

#[derive(Serialize)]
struct VerifyReport {
    regularizer: String,
    tolerance: f64,
    total: usize,
    passed: usize,
    failed: usize,
    entries: Vec<Entry>,
}

fn verify(a: &VerifyArgs) -> CliResult<()> {
    let (mut identities, all) = args::parse_identities(&a.identity).map_err(CliError::Usage)?;
    let tau = match a.reg {
        Regularizer::NegEntropy { tau } => Some(tau),
        _ => None,
    };
    if tau.is_none() && identities.contains(&Identity::KlCorollary) {
        if !all {
            return Err(CliError::Usage(format!(
                "identity `kl` needs an entropy regularizer, got {}",
                a.reg
            )));
        }
        identities.retain(|&id| id != Identity::KlCorollary);
    }
    if !(a.tol > 0.0) {
        return Err(CliError::Usage(format!("tolerance {} must be positive", a.tol)));
    }

    let seeds = match (&a.seeds, &a.mdp) {
        (Some(text), _) => args::parse_seeds(text).map_err(CliError::Usage)?,
        (None, Some(_)) => vec![0],
        (None, None) => return Err(CliError::Usage("verify needs --mdp or --seeds".into())),
    };
    let loaded = a.mdp.as_ref().map(load_mdp).transpose()?;
    let fixed_policy = a.policy.as_ref().map(load_policy).transpose()?;

    let mut entries = Vec::new();
    for seed in seeds {
        let m = match &loaded {
            Some(m) => m.clone(),
            None => random_mdp(a.sizes.0, a.sizes.1, a.gamma, seed)?,
        };
        let reports = verify_instance(&m, &a.reg, tau, fixed_policy.as_ref(), seed, &identities, a.tol)?;
        entries.extend(reports.into_iter().map(|report| Entry { seed, report }));
    }
    entries.sort_by_key(|e| (e.seed, e.report.identity));

    let failed = entries.iter().filter(|e| !e.report.passed).count();
    let report = VerifyReport {
        regularizer: a.reg.to_string(),
        tolerance: a.tol,
        total: entries.len(),
        passed: entries.len() - failed,
        failed,
        entries,
    };
    emit(&to_json_string(&report)?, a.out.as_deref())?;
    match report.entries.iter().find(|e| !e.report.passed) {
        None => Ok(()),
        Some(first) => Err(CliError::Failed(format!(
            "{failed} of {} checks failed; first: seed {} {} (lhs {:e}, rhs {:e})",
            report.total, first.seed, first.report.identity, first.report.lhs, first.report.rhs
        ))),
    }
}

fn verify_instance(
    m: &Mdp,
    reg: &Regularizer,
    tau: Option<f64>,
    fixed_policy: Option<&Policy>,
    seed: u64,
    identities: &[Identity],
    tol: f64,
) -> CliResult<Vec<VerificationReport>> {
    let (ns, na) = (m.n_states(), m.n_actions());
    let mut rng = rng_from_seed(seed);
    let pi = match fixed_policy {
        Some(p) => {
            p.check_shape(m)?;
            p.clone()
        }
        None => Policy::random(ns, na, &mut rng),
    };
    let pi_prime = Policy::random(ns, na, &mut rng);
    let x: Vec<f64> = (0..ns).map(|_| rng.sample(StandardNormal)).collect();

    let needs_optimum = identities
        .iter()
        .any(|id| !matches!(id, Identity::Pdl | Identity::BasicLemma));
    let optimal = if needs_optimum {
        Some(solve_optimal(m, reg, &SolveOptions::default())?)
    } else {
        None
    };
    let optimal = || optimal.as_ref().expect("solved above");

    let mut out = Vec::with_capacity(identities.len());
    for &id in identities {
        let report = match id {
            Identity::Pdl => check_pdl(m, reg, &pi, &pi_prime, tol)?,
            Identity::BasicLemma => check_basic_lemma(m, &pi, &x, tol)?,
            Identity::NormalCone => check_normal_cone_all(reg, optimal(), tol)?,
            Identity::RelintLemma => check_relint_all(reg, optimal(), tol)?,
            Identity::MainTheorem => check_main_theorem_with(m, reg, optimal(), &pi, tol)?,
            Identity::KlCorollary => {
                let tau = tau.expect("kl filtered for non-entropy regularizers");
                check_kl_corollary_with(m, tau, optimal(), &pi, tol)?
            }
        };
        out.push(report);
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Verify(a) => verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = match &e {
                CliError::Usage(msg) => format!("usage error: {msg}"),
                CliError::Lib(err) if err.is_numerical() => format!("numerical breakdown: {err}"),
                CliError::Lib(err) => format!("error: {err}"),
                CliError::Failed(msg) => format!("verification failed: {msg}"),
            };
            eprintln!("regmdp: {message}");
            ExitCode::from(e.exit_code())
        }
    }
}
