//! `recgame`: solve, sweep, calibrate and validate two-member energy
//! community scenarios.
//!
//! Exit codes: 0 success, 1 a validation check failed, 2 bad input,
//! 3 the solver failed.

mod calibrate;
mod report;
mod sweep;
mod validate;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use recgame_core::model::CommunityModel;
use recgame_core::scenario::{Scenario, ScenarioFile};

#[derive(Parser)]
#[command(name = "recgame", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the bargaining problem and report the split, installations and
    /// payoffs.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Solve once per value of one parameter; one output row per value.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        spec: sweep::SweepArgs,
    },
    /// Estimate GBM parameters from hourly CSV series and print a scenario
    /// fragment.
    Calibrate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        spec: calibrate::CalibrateArgs,
    },
    /// Compare the closed forms against Monte Carlo estimates.
    Validate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        spec: validate::ValidateArgs,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long, value_name = "PATH")]
    scenario: Option<PathBuf>,
    /// Write the output here instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Output format; defaults to json for solve and validate, csv for
    /// sweep and toml for calibrate.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Seed of the Monte Carlo streams (validate only).
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Number of Monte Carlo paths (validate only).
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// A failure that aborts the command, with its exit code.
#[derive(Debug)]
enum Failure {
    Input(String),
    Solver(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Solver(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Input(m) => write!(f, "input error: {m}"),
            Failure::Solver(m) => write!(f, "solver error: {m}"),
        }
    }
}

impl From<recgame_core::Error> for Failure {
    fn from(e: recgame_core::Error) -> Self {
        match e {
            recgame_core::Error::Game(e) => Failure::Solver(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl Common {
    fn scenario_path(&self) -> Result<&Path, Failure> {
        self.scenario
            .as_deref()
            .ok_or_else(|| Failure::Input("--scenario PATH is required".into()))
    }

    fn load_file(&self) -> Result<ScenarioFile, Failure> {
        let path = self.scenario_path()?;
        ScenarioFile::load(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
    }

    fn emit(&self, text: &str) -> Result<(), Failure> {
        match &self.out {
            Some(path) => fs::write(path, text)
                .map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display()))),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes())
                    .and_then(|()| out.flush())
                    .map_err(|e| Failure::Input(format!("cannot write output: {e}")))
            }
        }
    }
}

fn build_model(file: &ScenarioFile) -> Result<CommunityModel, Failure> {
    let market = file.to_market().map_err(|e| Failure::Input(e.to_string()))?;
    let scenario = Scenario::new(market).map_err(|e| Failure::Input(e.to_string()))?;
    Ok(CommunityModel::from_scenario(scenario)?)
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::Solve { common } => {
            let file = common.load_file()?;
            let solved = report::solve(&file)?;
            let text = match common.format.unwrap_or(Format::Json) {
                Format::Json => report::to_json(&solved),
                Format::Csv => report::to_csv(&solved),
            };
            common.emit(&text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { common, spec } => {
            let file = common.load_file()?;
            let rows = sweep::run(&file, &spec)?;
            let text = match common.format.unwrap_or(Format::Csv) {
                Format::Csv => sweep::to_csv(&rows),
                Format::Json => sweep::to_json(&spec.param, &rows),
            };
            if let Some(path) = &spec.svg {
                fs::write(path, sweep::to_svg(&spec.param, &rows))
                    .map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))?;
            }
            common.emit(&text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Calibrate { common, spec } => {
            let results = calibrate::run(&spec)?;
            let text = match common.format {
                None => calibrate::to_toml(&results),
                Some(Format::Json) => calibrate::to_json(&results),
                Some(Format::Csv) => {
                    return Err(Failure::Input(
                        "calibrate writes a TOML fragment or JSON; csv is not supported".into(),
                    ))
                }
            };
            common.emit(&text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { common, spec } => {
            let file = common.load_file()?;
            let model = build_model(&file)?;
            let report = validate::run(&model, &file, &spec, common.paths, common.seed)?;
            let text = match common.format.unwrap_or(Format::Json) {
                Format::Json => validate::to_json(&report),
                Format::Csv => validate::to_csv(&report),
            };
            eprint!("{}", validate::summary(&report));
            common.emit(&text)?;
            Ok(if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("recgame: {failure}");
            ExitCode::from(failure.code())
        }
    }
}
