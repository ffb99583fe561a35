//! JSON scenario configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{unit_from_angle_over_pi, CircleMeasure};
use crate::schatten::SchattenIndex;

/// Scenario kinds; anything else in a config is an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Analyze,
    Verify,
    Sweep,
    CounterexampleIntegers,
    CounterexampleSharp3,
    Synthesize,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Analyze => "analyze",
            ScenarioKind::Verify => "verify",
            ScenarioKind::Sweep => "sweep",
            ScenarioKind::CounterexampleIntegers => "counterexample-integers",
            ScenarioKind::CounterexampleSharp3 => "counterexample-sharp3",
            ScenarioKind::Synthesize => "synthesize",
        }
    }

    /// Kinds that compute pure series or generate their own measures.
    fn needs_blocks(self) -> bool {
        matches!(self, ScenarioKind::Analyze | ScenarioKind::Sweep)
    }
}

/// An atom `weight·δ_{e^{iπa}}` with `a = angle_over_pi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub angle_over_pi: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub atoms: Vec<AtomSpec>,
}

impl BlockSpec {
    pub fn to_measure(&self) -> Result<CircleMeasure> {
        CircleMeasure::new(
            self.atoms
                .iter()
                .map(|a| (unit_from_angle_over_pi(a.angle_over_pi), a.weight)),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Clark Gram, compression and eigenvalue placement.
    pub unitary: f64,
    /// Relative agreement of the two Gram routes for `φ_t(S̃) − φ_t(S)`.
    pub cross_oracle: f64,
    /// Final finite-section gap.
    pub finite_section_gap: f64,
    /// Relative tolerance of the Gram quadratures.
    pub quadrature: f64,
    /// Laplace-integral check of the cogenerator.
    pub cogenerator: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            unitary: 1e-8,
            cross_oracle: 1e-4,
            finite_section_gap: 1e-3,
            quadrature: 1e-11,
            cogenerator: 1e-10,
        }
    }
}

/// A target eigenvalue `e^{iπa}` with multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetAtom {
    pub angle_over_pi: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSpec {
    pub target: Vec<TargetAtom>,
    pub epsilon: f64,
    #[serde(default = "default_q")]
    pub q: f64,
}

fn default_q() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegersSpec {
    /// Truncation sizes `N` of `Σ_{|n|≤N} δ_n`.
    pub sizes: Vec<usize>,
    pub t: f64,
    /// Required `value(last)/value(reference)`.
    pub min_ratio: f64,
    /// Size used as the denominator of the ratio.
    pub ratio_reference: usize,
}

impl Default for IntegersSpec {
    fn default() -> Self {
        Self {
            sizes: vec![5, 10, 20, 40, 80],
            t: 1.0,
            min_ratio: 4.0,
            ratio_reference: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sharp3Spec {
    /// Partial sums are checked for every `N ≤ 2^max_exponent`.
    pub max_exponent: u32,
    /// Bins written to `bins.csv` cover `|n| ≤ bins_written`.
    pub bins_written: i64,
}

impl Default for Sharp3Spec {
    fn default() -> Self {
        Self {
            max_exponent: 20,
            bins_written: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySpec {
    pub cases: usize,
    pub max_atoms: usize,
    pub seed: u64,
    /// `t` grid of the power-law fit, spanning two decades.
    pub slope_t: Vec<f64>,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            cases: 20,
            max_atoms: 8,
            seed: 2024,
            slope_t: (0..=20).map(|k| 10f64.powf(-1.0 + 0.1 * k as f64)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    #[serde(default)]
    pub blocks: Vec<BlockSpec>,
    #[serde(default)]
    pub t_grid: Vec<f64>,
    #[serde(default = "default_p_list")]
    pub p_list: Vec<SchattenIndex>,
    #[serde(default)]
    pub truncation_sweep: Vec<usize>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Exponent of the moment shape in fitted trace-norm constants.
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Write the largest finite section of each sweep as `row,col,re,im` CSV.
    #[serde(default)]
    pub export_matrices: bool,
    #[serde(default)]
    pub synthesis: Option<SynthesisSpec>,
    #[serde(default)]
    pub integers: IntegersSpec,
    #[serde(default)]
    pub sharp3: Sharp3Spec,
    #[serde(default)]
    pub verify: VerifySpec,
}

fn default_p_list() -> Vec<SchattenIndex> {
    vec![
        SchattenIndex::Finite(1.0),
        SchattenIndex::Finite(2.0),
        SchattenIndex::Infinity,
    ]
}

impl ScenarioConfig {
    /// A config of the given kind with every optional section at its default.
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            blocks: Vec::new(),
            t_grid: Vec::new(),
            p_list: default_p_list(),
            truncation_sweep: Vec::new(),
            tolerances: Tolerances::default(),
            q: default_q(),
            output: None,
            export_matrices: false,
            synthesis: None,
            integers: IntegersSpec::default(),
            sharp3: Sharp3Spec::default(),
            verify: VerifySpec::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.t_grid.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
            return Err(Error::Config(format!("t values must be finite and ≥ 0, got {t}")));
        }
        if self.kind.needs_blocks() && self.blocks.is_empty() {
            return Err(Error::Config(format!("scenario {} needs at least one block", self.kind.name())));
        }
        if self.truncation_sweep.iter().any(|&m| m == 0) {
            return Err(Error::Config("truncation degrees must be positive".into()));
        }
        if !(self.q > 0.0) {
            return Err(Error::Config(format!("q must be positive, got {}", self.q)));
        }
        if self.kind == ScenarioKind::Synthesize {
            let s = self
                .synthesis
                .as_ref()
                .ok_or_else(|| Error::Config("synthesize needs a synthesis section".into()))?;
            if !(s.epsilon > 0.0) {
                return Err(Error::Config(format!("epsilon must be positive, got {}", s.epsilon)));
            }
        }
        if self.kind == ScenarioKind::CounterexampleIntegers && self.integers.sizes.is_empty() {
            return Err(Error::Config("integer counterexample needs at least one size".into()));
        }
        for b in &self.blocks {
            b.to_measure().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn measures(&self) -> Result<Vec<CircleMeasure>> {
        self.blocks.iter().map(BlockSpec::to_measure).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_analyze_config() {
        let c = ScenarioConfig::from_json(
            r#"{"kind": "analyze", "blocks": [{"atoms": [{"angle_over_pi": 1.0, "weight": 1.0}]}], "t_grid": [1.0], "p_list": [1, 2, "inf"]}"#,
        )
        .unwrap();
        assert_eq!(c.kind, ScenarioKind::Analyze);
        assert_eq!(c.p_list[2], SchattenIndex::Infinity);
        let m = c.measures().unwrap();
        assert_eq!(m[0].points()[0], crate::C64::new(-1.0, 0.0));
        assert_eq!(c.tolerances, Tolerances::default());
    }

    #[test]
    fn rejects_unknown_kinds_and_fields() {
        assert!(ScenarioConfig::from_json(r#"{"kind": "explore"}"#).is_err());
        assert!(ScenarioConfig::from_json(r#"{"kind": "verify", "colour": 1}"#).is_err());
        assert!(ScenarioConfig::from_json(r#"{"kind": "analyze"}"#).is_err());
        assert!(ScenarioConfig::from_json(r#"{"kind": "verify", "t_grid": [-1.0]}"#).is_err());
        assert!(ScenarioConfig::from_json(r#"{"kind": "verify", "p_list": [0]}"#).is_err());
        assert!(ScenarioConfig::from_json(r#"{"kind": "synthesize"}"#).is_err());
        assert!(ScenarioConfig::from_json(
            r#"{"kind": "analyze", "blocks": [{"atoms": [{"angle_over_pi": 0.0, "weight": 1.0}]}]}"#
        )
        .is_err());
    }

    #[test]
    fn series_scenarios_need_no_blocks() {
        let c = ScenarioConfig::from_json(r#"{"kind": "counterexample-sharp3"}"#).unwrap();
        assert_eq!(c.sharp3.max_exponent, 20);
        let c = ScenarioConfig::from_json(r#"{"kind": "counterexample-integers"}"#).unwrap();
        assert_eq!(c.integers.sizes, vec![5, 10, 20, 40, 80]);
    }

    #[test]
    fn round_trips_through_json() {
        let mut c = ScenarioConfig::new(ScenarioKind::Synthesize);
        c.synthesis = Some(SynthesisSpec {
            target: vec![TargetAtom {
                angle_over_pi: 0.5,
                multiplicity: 2,
            }],
            epsilon: 0.1,
            q: 4.0,
        });
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ScenarioConfig::from_json(&text).unwrap(), c);
    }
}
