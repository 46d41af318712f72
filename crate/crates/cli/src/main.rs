//! Command-line front end for the contact-process toolkit.
//!
//! Exit codes: 0 success, 1 invalid config or input, 2 invariant violation
//! detected, 3 budget exhausted / unresolved estimate.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use icp_core::config::{profile_from_json, ExperimentConfig};
use icp_core::coupling::couple_many;
use icp_core::experiments::{
    classify_regime, estimate_lambda_c, sweep, CriticalValueOptions, LambdaCEstimate, SweepMode,
};
use icp_core::front_chain::{
    absorption_frequency, absorption_probability, series_test, AbsorptionBracket, FrontChain,
    SeriesVerdict,
};
use icp_core::model::{ModelParams, RateProfile};
use icp_core::report::{emit_report, ReportFormat};
use icp_core::simulator::{simulate_run, simulate_trace, CsvTraceSink, StopRule};
use icp_core::stats::wilson_interval;

const EXIT_INVALID: u8 = 1;
const EXIT_VIOLATION: u8 = 2;
const EXIT_UNRESOLVED: u8 = 3;

#[derive(Parser)]
#[command(name = "icp", version, about = "Inhomogeneous contact process simulator and analysis tool")]
struct Cli {
    /// JSON experiment config; required by sweep, critical and classify.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for report files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Report formats, comma separated.
    #[arg(long, global = true, value_delimiter = ',', default_values_t = [FormatArg::Csv, FormatArg::Svg])]
    format: Vec<FormatArg>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Svg,
}

impl std::fmt::Display for FormatArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FormatArg::Csv => "csv",
            FormatArg::Json => "json",
            FormatArg::Svg => "svg",
        })
    }
}

impl From<FormatArg> for ReportFormat {
    fn from(value: FormatArg) -> Self {
        match value {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Svg => ReportFormat::Svg,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory and print its result as JSON.
    Simulate {
        /// Profile as inline JSON, e.g. '{"kind":"homogeneous","params":[0.5,1]}'.
        #[arg(long)]
        profile: String,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        start: usize,
        #[arg(long, default_value_t = 500.0)]
        tmax: f64,
        /// Right-escape cutoff; omitted means no cutoff.
        #[arg(long)]
        rmax: Option<usize>,
        /// Write the event trace as CSV (`time,event,site`) to this path.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Analyse the rightmost-site chain: series test, absorption bracket,
    /// Monte Carlo cross-check.
    FrontChain {
        #[arg(long)]
        profile: String,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 1)]
        start: usize,
        #[arg(long, default_value_t = 128)]
        truncation: usize,
        #[arg(long = "mc-runs", default_value_t = 10_000)]
        mc_runs: u64,
        #[arg(long, default_value_t = 1000.0)]
        tmax: f64,
        #[arg(long)]
        rmax: Option<usize>,
    },
    /// Run coupled trajectories of the process and its dominating front.
    Couple {
        #[arg(long)]
        profile: String,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        start: usize,
        #[arg(long, default_value_t = 100.0)]
        tmax: f64,
        #[arg(long)]
        rmax: Option<usize>,
        #[arg(long, default_value_t = 1000)]
        runs: u64,
    },
    /// Survival estimates over the config's lambda grid; writes report files.
    Sweep {
        /// Drive the whole grid from one proposal stream per replica, making
        /// the per-replica alive indicators exactly monotone.
        #[arg(long)]
        shared: bool,
    },
    /// Bracket the critical multiplier of the config's profile.
    Critical,
    /// Classify the regime of the config's profile at its lambda.
    Classify,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                icp_core::Error::SeriesCrossCheck => ExitCode::from(EXIT_VIOLATION),
                _ => ExitCode::from(EXIT_INVALID),
            }
        }
    }
}

fn print_json<T: Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("output serializes")
    );
}

fn load_config(cli: &Cli) -> icp_core::Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| icp_core::Error::Config("this subcommand needs --config".into()))?;
    ExperimentConfig::load(path)
}

fn run(cli: Cli) -> icp_core::Result<ExitCode> {
    match &cli.command {
        Command::Simulate {
            profile,
            lambda,
            start,
            tmax,
            rmax,
            trace,
        } => {
            let profile = profile_from_json(profile)?;
            let params = ModelParams::new(*lambda, profile, *start)?;
            let stop = StopRule::new(*tmax, *rmax)?;
            let seed = cli.seed.unwrap_or(0);
            let result = match trace {
                Some(path) => {
                    let file = File::create(path).map_err(|source| icp_core::Error::Io {
                        path: path.clone(),
                        source,
                    })?;
                    let mut sink = CsvTraceSink::new(BufWriter::new(file))?;
                    simulate_trace(&params, &stop, seed, &mut sink)?
                }
                None => simulate_run(&params, &stop, seed)?,
            };
            print_json(&result);
            Ok(ExitCode::SUCCESS)
        }

        Command::FrontChain {
            profile,
            lambda,
            start,
            truncation,
            mc_runs,
            tmax,
            rmax,
        } => {
            let profile = profile_from_json(profile)?;
            let chain = FrontChain::new(profile, *lambda)?;
            let series = series_test(&chain, 10_000)?;
            let bracket = absorption_probability(&chain, *start, *truncation)?;
            let stop = StopRule::new(*tmax, *rmax)?;
            let seed = cli.seed.unwrap_or(0);
            let absorbed = absorption_frequency(&chain, *start, &stop, *mc_runs, seed)?;
            let mc_frequency = absorbed as f64 / *mc_runs as f64;
            let wilson_ci = wilson_interval(absorbed, *mc_runs, 0.95)?;

            #[derive(Serialize)]
            struct FrontChainOutput {
                series_test: SeriesVerdict,
                tail_ratio: f64,
                bracket: AbsorptionBracket,
                mc_runs: u64,
                mc_frequency: f64,
                wilson_ci: [f64; 2],
            }
            print_json(&FrontChainOutput {
                series_test: series.verdict,
                tail_ratio: series.tail_ratio,
                bracket,
                mc_runs: *mc_runs,
                mc_frequency,
                wilson_ci: [wilson_ci.0, wilson_ci.1],
            });
            Ok(ExitCode::SUCCESS)
        }

        Command::Couple {
            profile,
            lambda,
            start,
            tmax,
            rmax,
            runs,
        } => {
            let profile = profile_from_json(profile)?;
            let params = ModelParams::new(*lambda, profile, *start)?;
            let stop = StopRule::new(*tmax, *rmax)?;
            let summary = couple_many(&params, &stop, *runs, cli.seed.unwrap_or(0))?;
            print_json(&summary);
            if summary.violations > 0 || summary.ordering_breaches > 0 {
                return Ok(ExitCode::from(EXIT_VIOLATION));
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Sweep { shared } => {
            let config = load_config(&cli)?;
            let profile = config.profile.build()?;
            let grid = config
                .lambda_grid
                .clone()
                .ok_or_else(|| icp_core::Error::Config("sweep needs `lambda_grid`".into()))?;
            let stop = config.stop_rule()?;
            let mode = if *shared {
                SweepMode::SharedRandomness
            } else {
                SweepMode::Independent
            };
            let seed = cli.seed.or(config.seed).unwrap_or(0);
            let estimates = sweep(
                &profile,
                &grid,
                config.start,
                &stop,
                config.runs(),
                seed,
                mode,
                config.ci_level(),
            )?;
            for est in &estimates {
                println!(
                    "lambda={} p_hat={:.4} wilson=[{:.4}, {:.4}] alive={}/{}",
                    est.lambda, est.p_hat, est.wilson_lo, est.wilson_hi, est.alive, est.runs
                );
            }
            let formats: Vec<ReportFormat> =
                cli.format.iter().map(|f| ReportFormat::from(*f)).collect();
            for path in emit_report(&estimates, &formats, &cli.out)? {
                println!("wrote {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Critical => {
            let config = load_config(&cli)?;
            let profile = config.profile.build()?;
            let stop = config.stop_rule()?;
            let opts = CriticalValueOptions {
                p_floor: config.p_floor(),
                ci_level: config.ci_level(),
                runs_per_probe: config.runs(),
                tol: config.tol.unwrap_or(0.2),
                ..CriticalValueOptions::default()
            };
            let seed = cli.seed.or(config.seed).unwrap_or(0);
            let estimate = estimate_lambda_c(&profile, config.start, &stop, &opts, seed)?;
            print_json(&estimate);
            if !estimate.is_resolved() {
                return Ok(ExitCode::from(EXIT_UNRESOLVED));
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Classify => {
            let config = load_config(&cli)?;
            let profile = config.profile.build()?;
            let lambda = config
                .lambda
                .ok_or_else(|| icp_core::Error::Config("classify needs `lambda`".into()))?;
            let lambda_c = match config.lambda_c {
                Some((lo, hi)) => LambdaCEstimate::from_interval(lo, hi),
                None => {
                    // No configured bracket: estimate it from the one-sided
                    // process first.
                    let stop = config.stop_rule()?;
                    let opts = CriticalValueOptions {
                        p_floor: config.p_floor(),
                        ci_level: config.ci_level(),
                        runs_per_probe: config.runs(),
                        tol: config.tol.unwrap_or(0.2),
                        ..CriticalValueOptions::default()
                    };
                    let seed = cli.seed.or(config.seed).unwrap_or(0);
                    estimate_lambda_c(&RateProfile::one_sided(), 0, &stop, &opts, seed)?
                }
            };
            let verdict = classify_regime(&profile, lambda, &lambda_c)?;
            print_json(&verdict);
            Ok(ExitCode::SUCCESS)
        }
    }
}
