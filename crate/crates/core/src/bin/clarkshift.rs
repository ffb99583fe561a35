use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use clarkshift::experiments::{self, Certificate, ScenarioConfig, ScenarioKind};

#[derive(Parser)]
#[command(name = "clarkshift", version, about = "Rank-one perturbations of the shift and their cogenerated semigroups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; defaults to the config's `output` or `out/<scenario>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Relative tolerance of adaptive quadratures.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Counterexample {
    Integers,
    Sharp3,
}

#[derive(Subcommand)]
enum Command {
    /// Operator checks and Schatten bounds for a list of block measures.
    Analyze(Common),
    /// Trace identity for the kernel operator on random measures.
    #[command(name = "verify-eq4")]
    VerifyEq4 {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Finite-section convergence over a truncation sweep.
    Sweep(Common),
    /// The integer-measure and sharpness counterexamples.
    Counterexample {
        #[arg(value_enum)]
        which: Counterexample,
        #[command(flatten)]
        common: Common,
    },
    /// Build a model with a prescribed point spectrum.
    Synthesize(Common),
    /// Re-check a stored certificate.
    #[command(name = "check-certificate")]
    CheckCertificate { path: PathBuf },
}

fn load(kind: ScenarioKind, common: &Common) -> clarkshift::Result<ScenarioConfig> {
    let mut config = match &common.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::new(kind),
    };
    if config.kind != kind {
        return Err(clarkshift::Error::Config(format!(
            "config is for scenario {}, not {}",
            config.kind.name(),
            kind.name()
        )));
    }
    if let Some(tol) = common.tol {
        config.tolerances.quadrature = tol;
    }
    Ok(config)
}

fn output_dir(config: &ScenarioConfig, common: &Common) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| Path::new("out").join(config.kind.name()))
}

fn execute(config: &ScenarioConfig, common: &Common) -> clarkshift::Result<bool> {
    let dir = output_dir(config, common);
    let (report, written) = experiments::run_and_write(config, &dir)?;
    for c in report.checks() {
        println!("[{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(report.passed())
}

fn dispatch(cli: Cli) -> clarkshift::Result<bool> {
    match cli.command {
        Command::Analyze(common) => execute(&load(ScenarioKind::Analyze, &common)?, &common),
        Command::VerifyEq4 { common, seed } => {
            let mut config = load(ScenarioKind::Verify, &common)?;
            if let Some(seed) = seed {
                config.verify.seed = seed;
            }
            execute(&config, &common)
        }
        Command::Sweep(common) => execute(&load(ScenarioKind::Sweep, &common)?, &common),
        Command::Counterexample { which, common } => {
            let kind = match which {
                Counterexample::Integers => ScenarioKind::CounterexampleIntegers,
                Counterexample::Sharp3 => ScenarioKind::CounterexampleSharp3,
            };
            execute(&load(kind, &common)?, &common)
        }
        Command::Synthesize(common) => execute(&load(ScenarioKind::Synthesize, &common)?, &common),
        Command::CheckCertificate { path } => {
            let check = Certificate::load(&path)?.verify()?;
            println!("{}", serde_json::to_string_pretty(&check)?);
            Ok(check.passed)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
