use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use idp_core::bench::{self, ExperimentPlan};
use idp_core::dataset::{load_csv, parse_bound};
use idp_core::{
    answer, group_local_sensitivity, BudgetLedger, DomainBounds, MechanismConfig, NoiseFamily,
    QuerySpec, RandomSource, Regime,
};

#[derive(Parser)]
#[command(
    name = "idp",
    version,
    about = "Differentially private answers to order-statistic and counting queries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print global, local and smooth sensitivity as JSON.
    Sensitivity(SensitivityArgs),
    /// Release a noisy answer and charge it to a session budget.
    Answer(AnswerArgs),
    /// Run an experiment and write its CSV.
    Bench(BenchArgs),
}

#[derive(Args)]
struct DataArgs {
    /// One value per line; a non-numeric first line is a header.
    #[arg(long)]
    data: PathBuf,
    /// `median`, `max`, `max2`, `count:LO:HI` or `hist:E1,E2,...`.
    #[arg(long)]
    query: QuerySpec,
    /// Lower domain bound, or `unbounded`.
    #[arg(long, default_value = "unbounded")]
    lower: String,
    /// Upper domain bound, or `unbounded`.
    #[arg(long, default_value = "unbounded")]
    upper: String,
}

impl DataArgs {
    fn load(&self) -> Result<idp_core::Dataset> {
        let bounds = DomainBounds::new(parse_bound(&self.lower)?, parse_bound(&self.upper)?)?;
        load_csv(&self.data, bounds).with_context(|| format!("loading {}", self.data.display()))
    }
}

#[derive(Args)]
struct SensitivityArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Smoothing parameter of the smooth sensitivity.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Also report the local sensitivity at distances 1..=G.
    #[arg(long)]
    group: Option<usize>,
}

#[derive(Args)]
struct AnswerArgs {
    #[command(flatten)]
    data: DataArgs,
    /// dp-global, dp-smooth, idp or gdp.
    #[arg(long)]
    regime: Regime,
    #[arg(long)]
    epsilon: f64,
    /// Tail exponent of the dp-smooth noise (default 3).
    #[arg(long)]
    gamma: Option<f64>,
    /// Group size for gdp.
    #[arg(long)]
    group: Option<usize>,
    /// laplace or dlaplace (default laplace).
    #[arg(long)]
    noise: Option<NoiseFamily>,
    /// Session file holding the budget ledger.
    #[arg(long)]
    session: PathBuf,
    /// Total budget; starts a new session file, which must not exist yet.
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    CiTable,
    ErrorGrid,
    NoiseProfile,
}

#[derive(Args)]
struct BenchArgs {
    experiment: Option<Experiment>,
    /// Samples (ci-table) or trials per cell (error-grid).
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = bench::DEFAULT_SEED)]
    seed: u64,
    /// Tail exponent of the dp-smooth noise in error-grid.
    #[arg(long, default_value_t = 3.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    sensitivity: f64,
    /// noise-profile grid covers [-W, W].
    #[arg(long, default_value_t = 100.0)]
    half_width: f64,
    /// noise-profile grid points.
    #[arg(long, default_value_t = 2001)]
    points: usize,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Check closed-form sensitivities and ratio bounds against the
    /// brute-force oracle.
    #[arg(long)]
    verify: bool,
}

fn sensitivity(args: &SensitivityArgs) -> Result<()> {
    let d = args.data.load()?;
    let report = idp_core::sensitivity::report(&d, &args.data.query, args.beta)?;
    let mut json = serde_json::to_value(&report)?;
    if let Some(g) = args.group {
        let ladder = group_local_sensitivity(&d, &args.data.query, g)?;
        json["group"] = serde_json::to_value(&ladder.per_distance)?;
    }
    println!("{}", serde_json::to_string_pretty(&json)?);
    Ok(())
}

fn open_session(path: &Path, budget: Option<f64>) -> Result<BudgetLedger> {
    match (path.exists(), budget) {
        (true, None) => Ok(BudgetLedger::load(path)?),
        (true, Some(_)) => bail!(
            "session {} already exists; drop --budget to reuse it",
            path.display()
        ),
        (false, Some(b)) => Ok(BudgetLedger::new(b)?),
        (false, None) => bail!(
            "session {} does not exist; pass --budget to start one",
            path.display()
        ),
    }
}

fn answer_cmd(args: &AnswerArgs) -> Result<()> {
    let d = args.data.load()?;
    let cfg = MechanismConfig::from_parts(
        args.regime,
        args.epsilon,
        args.gamma,
        args.noise,
        args.group,
    )?;
    let mut ledger = open_session(&args.session, args.budget)?;
    let released = answer(
        &d,
        &args.data.query,
        &cfg,
        &mut RandomSource::new(args.seed),
        &mut ledger,
    )?;
    ledger.save(&args.session)?;
    println!("{}", serde_json::to_string_pretty(&released)?);
    Ok(())
}

fn write_to(
    out: &Option<PathBuf>,
    write: impl FnOnce(&mut dyn Write) -> idp_core::Result<()>,
) -> Result<()> {
    match out {
        Some(path) => {
            let mut f = std::fs::File::create(path)
                .with_context(|| format!("creating {}", path.display()))?;
            write(&mut f)?;
        }
        None => write(&mut std::io::stdout().lock())?,
    }
    Ok(())
}

fn bench_cmd(args: &BenchArgs) -> Result<bool> {
    if args.experiment.is_none() && !args.verify {
        bail!("choose an experiment (ci-table, error-grid, noise-profile) or --verify");
    }
    match args.experiment {
        Some(Experiment::CiTable) => {
            let trials = args.trials.unwrap_or(bench::DEFAULT_CI_SAMPLES);
            let t = bench::run_ci_table(args.epsilon, args.sensitivity, trials, args.seed)?;
            write_to(&args.out, |w| t.write_csv(w))?;
        }
        Some(Experiment::ErrorGrid) => {
            let plan = ExperimentPlan {
                trials: args.trials.unwrap_or(bench::DEFAULT_TRIALS),
                gamma: args.gamma,
                seed: args.seed,
                ..ExperimentPlan::default()
            };
            let t = bench::run_error_grid(&plan)?;
            write_to(&args.out, |w| t.write_csv(w))?;
        }
        Some(Experiment::NoiseProfile) => {
            let grid = bench::uniform_grid(args.half_width, args.points);
            let p = bench::run_noise_profile(args.epsilon, args.sensitivity, &grid)?;
            write_to(&args.out, |w| p.write_csv(w))?;
        }
        None => {}
    }
    let mut ok = true;
    if args.verify {
        for row in bench::run_verification(args.epsilon)? {
            let status = if row.passed() { "PASS" } else { "FAIL" };
            eprintln!(
                "{status} {}: {} cases, {} failures",
                row.check, row.cases, row.failures
            );
            ok &= row.passed();
        }
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sensitivity(a) => sensitivity(a).map(|_| true),
        Command::Answer(a) => answer_cmd(a).map(|_| true),
        Command::Bench(a) => bench_cmd(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
