//! Scenario drivers: each reads a [`ScenarioConfig`], runs its checks and
//! returns a serializable report plus the tables to write.

pub mod analyze;
pub mod config;
pub mod counterexamples;
pub mod output;
pub mod synthesize;
pub mod verify;

use std::path::{Path, PathBuf};

pub use analyze::{run_analyze, run_sweep, AnalyzeReport, Check, SweepReport};
pub use config::{ScenarioConfig, ScenarioKind};
pub use counterexamples::{run_counterexample_integers, run_counterexample_sharp3, IntegersReport, Sharp3Report};
pub use output::Outputs;
pub use synthesize::{run_synthesize, Certificate, SynthesisReport};
pub use verify::{run_verify, VerifyReport};

use crate::error::Result;

/// Default `t` values for the trace identity when the config gives none.
pub const DEFAULT_VERIFY_T: [f64; 4] = [0.1, 0.5, 1.0, 2.0];

#[derive(Debug, Clone)]
pub enum ScenarioReport {
    Analyze(AnalyzeReport),
    Verify(VerifyReport),
    Sweep(SweepReport),
    Integers(IntegersReport),
    Sharp3(Sharp3Report),
    Synthesize(SynthesisReport),
}

impl ScenarioReport {
    pub fn checks(&self) -> &[Check] {
        match self {
            ScenarioReport::Analyze(r) => &r.checks,
            ScenarioReport::Verify(r) => &r.checks,
            ScenarioReport::Sweep(r) => &r.checks,
            ScenarioReport::Integers(r) => &r.checks,
            ScenarioReport::Sharp3(r) => &r.checks,
            ScenarioReport::Synthesize(r) => &r.checks,
        }
    }

    pub fn passed(&self) -> bool {
        self.checks().iter().all(|c| c.passed)
    }
}

fn run_inner(config: &ScenarioConfig) -> Result<(ScenarioReport, Outputs)> {
    config.validate()?;
    Ok(match config.kind {
        ScenarioKind::Analyze => {
            let (r, o) = run_analyze(config)?;
            (ScenarioReport::Analyze(r), o)
        }
        ScenarioKind::Verify => {
            let t_grid: Vec<f64> = if config.t_grid.is_empty() {
                DEFAULT_VERIFY_T.to_vec()
            } else {
                config.t_grid.clone()
            };
            let (r, o) = run_verify(config, &t_grid)?;
            (ScenarioReport::Verify(r), o)
        }
        ScenarioKind::Sweep => {
            let (r, o) = run_sweep(config)?;
            (ScenarioReport::Sweep(r), o)
        }
        ScenarioKind::CounterexampleIntegers => {
            let (r, o) = run_counterexample_integers(config)?;
            (ScenarioReport::Integers(r), o)
        }
        ScenarioKind::CounterexampleSharp3 => {
            let (r, o) = run_counterexample_sharp3(config)?;
            (ScenarioReport::Sharp3(r), o)
        }
        ScenarioKind::Synthesize => {
            let (r, o) = run_synthesize(config)?;
            (ScenarioReport::Synthesize(r), o)
        }
    })
}

/// Runs the scenario named by `config.kind`.
pub fn run(config: &ScenarioConfig) -> Result<(ScenarioReport, Outputs)> {
    run_inner(config).map_err(|e| e.in_scenario(config.kind.name()))
}

/// Runs the scenario and writes its outputs into `dir`.
pub fn run_and_write(config: &ScenarioConfig, dir: &Path) -> Result<(ScenarioReport, Vec<PathBuf>)> {
    let (report, outputs) = run(config)?;
    let written = outputs.write(dir).map_err(|e| e.in_scenario(config.kind.name()))?;
    Ok((report, written))
}
