//! `cosine-audit`: simulate interaction data, fit closed-form MF models, and
//! export the similarities that different gauge choices produce.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use cosine_audit::{Metric, Objective, ScalingFamily, SimilarityKind};

use crate::config::{load_config, Config, DenseInput};
use crate::error::{CliError, CliResult, EXIT_OK};

/// Caps the number of worker threads.
pub const THREADS_ENV: &str = "COSINE_AUDIT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "cosine-audit", version, about = "Audit cosine similarity of matrix factorization embeddings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate clustered power-law interactions; writes X.csv and ground_truth.json.
    Simulate(RunArgs),
    /// Fit a closed-form model; writes embeddings/{A.csv,B.csv,meta.json}.
    Solve(RunArgs),
    /// Compute one similarity matrix; writes similarity.{csv,json,pgm}.
    Similarity(RunArgs),
    /// Run a plan of configurations; writes similarity/*, report.json.
    Audit(RunArgs),
    /// Check the full-rank identities; writes fullrank_report.json.
    #[command(name = "fullrank-check")]
    FullrankCheck(RunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Solve(_) => "solve",
            Command::Similarity(_) => "similarity",
            Command::Audit(_) => "audit",
            Command::FullrankCheck(_) => "fullrank-check",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Simulate(a)
            | Command::Solve(a)
            | Command::Similarity(a)
            | Command::Audit(a)
            | Command::FullrankCheck(a) => a,
        }
    }
}

/// Flags override the matching config keys.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON config with optional sections sim, solve, plan, input, output.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory [output.dir, default ./out].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// RNG seed [sim.seed, input.dense.seed].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Regularization strength [solve.lambda].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Latent dimension k [solve.rank].
    #[arg(long)]
    pub rank: Option<usize>,
    /// identity | collapse | inverse | symmetric-matching [solve.family].
    #[arg(long)]
    pub family: Option<ScalingFamily>,
    /// 1 (product regularization) or 2 (split regularization) [solve.objective].
    #[arg(long)]
    pub objective: Option<Objective>,
    /// cosine | dot [solve.metric].
    #[arg(long)]
    pub metric: Option<Metric>,
    /// item-item | user-user | user-item [solve.kind].
    #[arg(long)]
    pub kind: Option<SimilarityKind>,
    /// Interaction matrix CSV [input.x].
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Ground truth JSON from `simulate` [input.ground_truth].
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    /// Embedding directory from `solve` [input.embeddings].
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Use a seeded dense uniform ROWSxCOLS matrix as X [input.dense].
    #[arg(long, value_name = "ROWSxCOLS")]
    pub dense: Option<String>,
    /// CSV vector with a literal diagonal D [solve.scaling_file].
    #[arg(long)]
    pub scaling_file: Option<PathBuf>,
    /// Apply a seeded random rotation after scaling [solve.rotation_seed].
    #[arg(long)]
    pub rotation_seed: Option<u64>,
    /// Standardize the columns of X first [solve.standardize].
    #[arg(long)]
    pub standardize: bool,
    /// Similarity on X·A·Bᵀ instead of the embeddings [solve.backproject].
    #[arg(long)]
    pub backproject: bool,
    /// Skip PGM heatmaps [output.heatmaps = false].
    #[arg(long)]
    pub no_heatmaps: bool,
}

fn parse_dense(text: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::config("--dense", format!("expected ROWSxCOLS, got `{text}`"));
    let (r, c) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((r.trim().parse().map_err(|_| bad())?, c.trim().parse().map_err(|_| bad())?))
}

/// Folds the flags into `config`.
pub fn apply_overrides(mut config: Config, args: &RunArgs) -> CliResult<Config> {
    if let Some(dense) = &args.dense {
        let (rows, cols) = parse_dense(dense)?;
        let seed = config.input.dense.as_ref().map_or(0, |d| d.seed);
        config.input.dense = Some(DenseInput { rows, cols, seed });
    }
    if let Some(seed) = args.seed {
        config.sim.seed = Some(seed);
        if let Some(dense) = &mut config.input.dense {
            dense.seed = seed;
        }
    }
    let solve = &mut config.solve;
    solve.lambda = args.lambda.or(solve.lambda);
    solve.rank = args.rank.or(solve.rank);
    solve.family = args.family.or(solve.family);
    solve.objective = args.objective.or(solve.objective);
    solve.metric = args.metric.or(solve.metric);
    solve.kind = args.kind.or(solve.kind);
    solve.scaling_file = args.scaling_file.clone().or(solve.scaling_file.take());
    solve.rotation_seed = args.rotation_seed.or(solve.rotation_seed);
    if args.standardize {
        solve.standardize = Some(true);
    }
    if args.backproject {
        solve.backproject = Some(true);
    }
    let input = &mut config.input;
    input.x = args.input.clone().or(input.x.take());
    input.ground_truth = args.ground_truth.clone().or(input.ground_truth.take());
    input.embeddings = args.embeddings.clone().or(input.embeddings.take());
    if let Some(out) = &args.out {
        config.output.dir = Some(out.clone());
    }
    if args.no_heatmaps {
        config.output.heatmaps = Some(false);
    }
    Ok(config)
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::config(THREADS_ENV, format!("expected a positive integer, got `{value}`")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    configure_threads()?;
    let args = cli.command.args();
    let config = apply_overrides(load_config(args.config.as_deref())?, args)?;
    match &cli.command {
        Command::Simulate(_) => commands::simulate(&config),
        Command::Solve(_) => commands::solve_cmd(&config),
        Command::Similarity(_) => commands::similarity(&config),
        Command::Audit(_) => commands::audit(&config),
        Command::FullrankCheck(_) => commands::fullrank_check(&config),
    }
}

/// Runs the command and maps the outcome to a process exit code.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(err) => {
            eprintln!("error: {} failed: {err}", cli.command.name());
            err.exit_code()
        }
    }
}
