use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use msgamp::engine::IterationRecord;
use msgamp::metrics::{self, NmseAveraging};
use msgamp::scenario::{synthesize, ScenarioFile};
use msgamp::{Estimator, SystemConfig};
use msgamp_harness::config::{self, ExperimentSpec, Overrides};
use msgamp_harness::experiment::{self, run_experiment_with, write_results};
use msgamp_harness::oracle::{check_denoiser, random_points, DEFAULT_NODES};
use msgamp_harness::{HarnessError, Result};

/// Message-scheduling GAMP simulator for grant-free massive MIMO.
///
/// Exit codes: 0 success, 1 runtime failure (including a failed
/// oracle check), 2 usage or configuration error.
#[derive(Debug, Parser)]
#[command(name = "msgamp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write its result files.
    Run(RunArgs),
    /// Run one estimator on one seeded scenario and print the per-iteration
    /// trace as CSV on standard output.
    Trial(TrialArgs),
    /// Compare the input denoiser with a quadrature reference.
    OracleCheck(OracleArgs),
    /// Write a seeded scenario as JSON.
    ExportScenario(ExportArgs),
}

/// Overrides for `[system]` keys.
#[derive(Debug, Args, Default)]
struct SystemArgs {
    /// Device count N.
    #[arg(long)]
    n: Option<usize>,
    /// Base-station antennas M.
    #[arg(long)]
    m: Option<usize>,
    /// Pilot length L.
    #[arg(long)]
    l: Option<usize>,
    /// Iteration cap I.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Stopping threshold on tol.
    #[arg(long)]
    tol_eps: Option<f64>,
    /// Activity decision threshold on the aggregated activity estimate.
    #[arg(long)]
    activity_threshold: Option<f64>,
    /// Range of the per-device activity probabilities, as `lo,hi`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    rho_range: Option<Vec<f64>>,
}

impl SystemArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            n: self.n,
            m: self.m,
            l: self.l,
            max_iters: self.max_iters,
            tol_eps: self.tol_eps,
            activity_threshold: self.activity_threshold,
            rho_range: self.rho_range.as_ref().map(|v| [v[0], v[1]]),
            ..Overrides::default()
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment file (TOML with `[system]` and `[experiment]` sections).
    /// Without it the full-size defaults are used.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[command(flatten)]
    system: SystemArgs,
    /// Root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// SNR grid in dB, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr_grid: Option<Vec<f64>>,
    /// Estimators, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_estimator)]
    estimators: Option<Vec<Estimator>>,
    /// Trials per SNR point.
    #[arg(long)]
    trials: Option<usize>,
    /// Write the per-iteration convergence file.
    #[arg(long)]
    emit_traces: Option<bool>,
    /// How NMSE is averaged across trials: `linear` or `db`.
    #[arg(long, value_parser = parse_averaging)]
    nmse_average: Option<NmseAveraging>,
    /// Output directory. Default: the config value, else $MSGAMP_OUT_DIR,
    /// else `msgamp-results`.
    #[arg(long, short)]
    out_dir: Option<PathBuf>,
    /// Worker threads (0 = available parallelism). Does not affect results.
    #[arg(long)]
    threads: Option<usize>,
    /// Suppress progress output.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct TrialArgs {
    /// Scenario seed.
    #[arg(long)]
    seed: u64,
    #[arg(long, value_parser = parse_estimator)]
    estimator: Estimator,
    #[arg(long, allow_hyphen_values = true)]
    snr_db: f64,
    /// Experiment file whose `[system]` section provides the other constants.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[command(flatten)]
    system: SystemArgs,
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// Number of random evaluation points.
    #[arg(long, default_value_t = 10_000)]
    points: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Maximum tolerated absolute deviation.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Gauss-Hermite nodes per real dimension.
    #[arg(long, default_value_t = DEFAULT_NODES)]
    nodes: usize,
}

#[derive(Debug, Args)]
struct ExportArgs {
    /// Scenario seed. Mutually exclusive with --trial.
    #[arg(long, conflicts_with_all = ["trial", "snr_index"])]
    seed: Option<u64>,
    /// SNR in dB (with --seed).
    #[arg(long, allow_hyphen_values = true, conflicts_with = "snr_index")]
    snr_db: Option<f64>,
    /// Export the scenario an experiment uses for this trial...
    #[arg(long, requires = "snr_index")]
    trial: Option<usize>,
    /// ...at this position of its SNR grid.
    #[arg(long, requires = "trial")]
    snr_index: Option<usize>,
    /// Experiment file providing constants, root seed and SNR grid.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[command(flatten)]
    system: SystemArgs,
    /// Output file; standard output when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn parse_estimator(s: &str) -> std::result::Result<Estimator, String> {
    s.parse()
}

fn parse_averaging(s: &str) -> std::result::Result<NmseAveraging, String> {
    match s {
        "linear" => Ok(NmseAveraging::Linear),
        "db" => Ok(NmseAveraging::Db),
        _ => Err(format!("unknown averaging `{s}`; valid values: linear, db")),
    }
}

fn load_spec(path: Option<&PathBuf>, overrides: &Overrides) -> Result<ExperimentSpec> {
    match path {
        Some(p) => config::load(p, overrides),
        None => {
            let mut spec = ExperimentSpec::default();
            overrides.apply(&mut spec);
            spec.validate().map_err(|(_, _, msg)| HarnessError::Usage(msg))?;
            Ok(spec)
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let overrides = Overrides {
        seed: args.seed,
        snr_grid_db: args.snr_grid,
        estimators: args.estimators,
        trials: args.trials,
        emit_traces: args.emit_traces,
        nmse_average: args.nmse_average,
        out_dir: args.out_dir,
        threads: args.threads,
        ..args.system.overrides()
    };
    let spec = load_spec(args.config.as_ref(), &overrides)?;
    let quiet = args.quiet;
    let table = run_experiment_with(&spec, |done, total| {
        if !quiet && (done == total || done % 10 == 0) {
            eprint!("\r{done}/{total} scenarios");
            if done == total {
                eprintln!();
            }
        }
    })?;
    let files = write_results(&spec, &table, &spec.out_dir)?;
    let failed = table.rows.iter().filter(|r| r.status == experiment::Status::Error).count();
    if !quiet {
        for f in &files {
            eprintln!("wrote {}", f.display());
        }
        if failed > 0 {
            eprintln!("{failed} estimator runs failed; see the `error` column of {}", experiment::TRIALS_FILE);
        }
    }
    Ok(())
}

fn system_for(path: Option<&PathBuf>, sys: &SystemArgs) -> Result<(SystemConfig, ExperimentSpec)> {
    let spec = load_spec(path, &sys.overrides())?;
    Ok((spec.base.clone(), spec))
}

fn cmd_trial(args: TrialArgs) -> Result<()> {
    let (base, _) = system_for(args.config.as_ref(), &args.system)?;
    let cfg = SystemConfig { seed: args.seed, snr_db: args.snr_db, ..base };
    cfg.validate()?;
    let scenario = synthesize::<f64>(&cfg)?;
    let result = args.estimator.run(&scenario, &cfg)?;
    let mut out = std::io::stdout().lock();
    let io = HarnessError::io("<stdout>");
    let mut text = String::new();
    text.push_str(IterationRecord::CSV_HEADER);
    text.push('\n');
    for rec in &result.trace {
        text.push_str(&rec.csv_row());
        text.push('\n');
    }
    out.write_all(text.as_bytes()).map_err(io)?;
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3}"));
    eprintln!(
        "{}: aer={:.4} nmse_active_db={} nmse_all_db={} iterations={} converged={} detected={} true_active={}",
        args.estimator,
        metrics::activity_error_rate(&scenario.xi, &result.active_hat),
        fmt(metrics::nmse_active_db(&scenario.h, &result.h_hat, &scenario.xi)),
        fmt(metrics::nmse_all_db(&scenario.h, &result.h_hat)),
        result.iterations,
        result.converged,
        result.active_hat.iter().filter(|&&a| a).count(),
        scenario.active_count(),
    );
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> Result<bool> {
    if args.nodes == 0 {
        return Err(HarnessError::Usage("--nodes must be >= 1".into()));
    }
    let start = std::time::Instant::now();
    let report = check_denoiser(&random_points(args.points, args.seed), args.nodes)?;
    let pass = report.passes(args.tol);
    let json = serde_json::json!({
        "points": report.points,
        "nodes": args.nodes,
        "seed": args.seed,
        "tol": args.tol,
        "max_abs_err": report.max_abs_err,
        "worst": report.worst,
        "pass": pass,
        "seconds": start.elapsed().as_secs_f64(),
    });
    println!("{}", serde_json::to_string_pretty(&json).expect("report serializes"));
    Ok(pass)
}

fn cmd_export(args: ExportArgs) -> Result<()> {
    let (base, spec) = system_for(args.config.as_ref(), &args.system)?;
    let cfg = match (args.seed, args.trial, args.snr_index) {
        (_, Some(trial), Some(si)) => {
            if si >= spec.snr_grid_db.len() {
                return Err(HarnessError::Usage(format!(
                    "--snr-index {si} outside the SNR grid of {} points",
                    spec.snr_grid_db.len()
                )));
            }
            experiment::trial_config(&spec, si, trial)
        }
        (seed, _, _) => SystemConfig {
            seed: seed.unwrap_or(base.seed),
            snr_db: args.snr_db.unwrap_or(base.snr_db),
            ..base
        },
    };
    cfg.validate()?;
    let scenario = synthesize::<f64>(&cfg)?;
    let mut text = ScenarioFile::from(&scenario).to_json();
    text.push('\n');
    match args.output {
        Some(p) => std::fs::write(&p, text).map_err(HarnessError::io(&p))?,
        None => std::io::stdout().write_all(text.as_bytes()).map_err(HarnessError::io("<stdout>"))?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a).map(|_| true),
        Command::Trial(a) => cmd_trial(a).map(|_| true),
        Command::OracleCheck(a) => cmd_oracle(a),
        Command::ExportScenario(a) => cmd_export(a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
