//! Model analysis over `t` and `p` grids, and finite-section sweeps.

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::output::{BoundRow, Outputs, SpectrumRow};
use crate::error::Result;
use crate::measures::CircleMeasure;
use crate::model_ops::{
    self, matrix_truncation, truncated_semigroup_defect, unitary_semigroup_defect, CogeneratorReport,
    DifferenceNorms, OperatorSpec, PerturbedShiftModel, UnitaryBlockReport,
};
use crate::quadrature::CircleRule;
use crate::schatten::{self, BoundSuite, FiniteSectionReport, QuadratureSpec, SingularSpectrum};

/// A named pass/fail line of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

pub(crate) fn quadrature_spec(config: &ScenarioConfig) -> QuadratureSpec {
    QuadratureSpec {
        rel_tol: config.tolerances.quadrature,
        ..QuadratureSpec::default()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeAnalysis {
    pub t: f64,
    pub bounds: BoundSuite,
    /// Relative distance of the two Gram spectra (single block only).
    pub cross_oracle_distance: Option<f64>,
    pub finite_section: Option<FiniteSectionReport>,
    /// `max |φ_t(λ)² − φ_{2t}(λ)|` over the atoms.
    pub unitary_semigroup_defect: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub measures: Vec<CircleMeasure>,
    pub eigenvalues: Vec<[f64; 2]>,
    pub unitary: UnitaryBlockReport,
    pub difference: DifferenceNorms,
    pub cogenerator: CogeneratorReport,
    pub times: Vec<TimeAnalysis>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

pub fn run_analyze(config: &ScenarioConfig) -> Result<(AnalyzeReport, Outputs)> {
    let model = PerturbedShiftModel::new(config.measures()?)?;
    analyze_model(&model, config)
}

/// The analysis behind [`run_analyze`], for a model built elsewhere.
pub fn analyze_model(model: &PerturbedShiftModel, config: &ScenarioConfig) -> Result<(AnalyzeReport, Outputs)> {
    let tol = &config.tolerances;
    let rule = CircleRule::default();
    let spec = quadrature_spec(config);
    let mut checks = Vec::new();
    let mut outputs = Outputs::default();

    let unitary = model_ops::unitary_block_check(model, &rule)?;
    checks.push(Check::new(
        "unitary-block",
        unitary.within(tol.unitary),
        format!(
            "gram {:.2e}, compression {:.2e}, eigenvalues {:.2e}, wold {:.2e}",
            unitary.gram_defect, unitary.compression_defect, unitary.eigenvalue_mismatch, unitary.wold_defect
        ),
    ));
    let difference = model_ops::stilde_minus_s_norms(model)?;
    checks.push(Check::new(
        "rank",
        difference.rank <= model.block_count(),
        format!("rank {} with {} blocks", difference.rank, model.block_count()),
    ));
    checks.push(Check::new(
        "stilde-minus-s-bounds",
        difference.operator_bound_holds && difference.trace_bound_holds,
        format!(
            "operator {:.6} < {:.6}, trace {:.6} < {:.6}",
            difference.operator_norm, difference.operator_bound, difference.trace_norm, difference.trace_bound
        ),
    ));
    let cogenerator = model_ops::cogenerator_identity_check(&model.eigenvalues(), 1e-13)?;
    checks.push(Check::new(
        "cogenerator",
        cogenerator.max_error < tol.cogenerator,
        format!("max error {:.2e}", cogenerator.max_error),
    ));

    let mut times = Vec::with_capacity(config.t_grid.len());
    for &t in &config.t_grid {
        let bounds = schatten::bound_suite(model, t, &config.p_list, config.q, &spec)?;
        let failures = bounds.failures();
        checks.push(Check::new(
            format!("bounds t={t}"),
            failures.is_empty(),
            if failures.is_empty() {
                format!("{} checks", bounds.checks.len())
            } else {
                failures.iter().map(|f| f.id.as_str()).collect::<Vec<_>>().join(", ")
            },
        ));
        let cross_oracle_distance = (model.block_count() == 1)
            .then(|| bounds.semigroup_difference.relative_distance(&bounds.transplants[0]));
        if let Some(d) = cross_oracle_distance {
            checks.push(Check::new(
                format!("cross-oracle t={t}"),
                d <= tol.cross_oracle,
                format!("relative distance {d:.2e}"),
            ));
        }
        let reference = if model.block_count() == 1 {
            bounds.transplants[0].clone()
        } else {
            bounds.semigroup_difference.clone()
        };
        let finite_section = if config.truncation_sweep.is_empty() {
            None
        } else {
            let r = schatten::finite_section_oracle(model, t, &config.truncation_sweep, &reference)?;
            checks.push(Check::new(
                format!("finite-section t={t}"),
                r.monotone && r.final_gap <= tol.finite_section_gap,
                format!(
                    "monotone {}, final gap {:.3e}, extrapolated gap {}",
                    r.monotone,
                    r.final_gap,
                    r.extrapolated_gap.map(|g| format!("{g:.3e}")).unwrap_or_else(|| "n/a".into())
                ),
            ));
            for s in r.spectra().iter().zip(&r.steps) {
                outputs
                    .spectra
                    .extend(SpectrumRow::rows(s.0, t, &format!("finite-section-M{}", s.1.degree)));
            }
            Some(r)
        };
        let unitary_semigroup_defect = unitary_semigroup_defect(model, t, t)?;
        outputs
            .spectra
            .extend(SpectrumRow::rows(&bounds.semigroup_difference, t, "semigroup-difference"));
        for (b, (k, y)) in bounds.kernels.iter().zip(&bounds.transplants).enumerate() {
            outputs.spectra.extend(SpectrumRow::rows(k, t, &format!("block-{b}-kernel")));
            outputs.spectra.extend(SpectrumRow::rows(y, t, &format!("block-{b}-transplant")));
        }
        outputs.bounds.extend(bounds.checks.iter().map(BoundRow::from));
        times.push(TimeAnalysis {
            t,
            bounds,
            cross_oracle_distance,
            finite_section,
            unitary_semigroup_defect,
        });
    }
    let diff_spectrum = SingularSpectrum::new(
        difference.singular_values.clone(),
        schatten::SpectrumMethod::QuadratureGram,
        0.0,
    );
    outputs
        .spectra
        .extend(SpectrumRow::rows(&diff_spectrum, 0.0, "stilde-minus-s"));

    let passed = checks.iter().all(|c| c.passed);
    let report = AnalyzeReport {
        measures: model.measures(),
        eigenvalues: model.eigenvalues().iter().map(|e| [e.re, e.im]).collect(),
        unitary,
        difference,
        cogenerator,
        times,
        checks,
        passed,
    };
    outputs.report = serde_json::to_value(&report)?;
    Ok((report, outputs))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub t: f64,
    pub finite_section: FiniteSectionReport,
    /// `‖T_t T_t − T_{2t}‖_F` for the sections of `φ(S̃)`, per degree.
    pub semigroup_defects: Vec<(usize, f64)>,
    /// Nonincreasing in the degree, down to [`DEFECT_FLOOR`].
    pub semigroup_defects_decrease: bool,
    /// Leading-column isometry defect of the `S̃` sections, per degree.
    pub isometry_defects: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Defects below this are round-off and need not decrease further.
pub const DEFECT_FLOOR: f64 = 1e-12;

/// Each value is at most its predecessor or below [`DEFECT_FLOOR`].
fn nonincreasing_to_floor(values: &[(usize, f64)]) -> bool {
    values.iter().all(|v| v.1.is_finite())
        && values.windows(2).all(|w| w[1].1 <= w[0].1.max(DEFECT_FLOOR))
}

/// Finite-section sweeps over the `t` grid, compared with Gram spectra.
pub fn run_sweep(config: &ScenarioConfig) -> Result<(SweepReport, Outputs)> {
    let model = PerturbedShiftModel::new(config.measures()?)?;
    let spec = quadrature_spec(config);
    let sweep = if config.truncation_sweep.is_empty() {
        vec![64, 128, 256, 512, 1024]
    } else {
        config.truncation_sweep.clone()
    };
    let mut outputs = Outputs::default();
    let mut checks = Vec::new();
    let mut points = Vec::new();
    let isometry_defects = sweep
        .iter()
        .map(|&m| Ok((m, matrix_truncation(&model, OperatorSpec::Stilde, m)?.isometry_defect(m / 2))))
        .collect::<Result<Vec<_>>>()?;
    checks.push(Check::new(
        "isometry-defect-converges",
        nonincreasing_to_floor(&isometry_defects),
        format!("{isometry_defects:?}"),
    ));
    for &t in &config.t_grid {
        let reference = schatten::gram_x_model(&model, t, &spec)?.spectrum;
        outputs.spectra.extend(SpectrumRow::rows(&reference, t, "semigroup-difference"));
        let fs = schatten::finite_section_oracle(&model, t, &sweep, &reference)?;
        for (s, step) in fs.spectra().iter().zip(&fs.steps) {
            outputs
                .spectra
                .extend(SpectrumRow::rows(s, t, &format!("finite-section-M{}", step.degree)));
        }
        checks.push(Check::new(
            format!("finite-section t={t}"),
            fs.monotone && fs.final_gap <= config.tolerances.finite_section_gap,
            format!(
                "monotone {}, final gap {:.3e}, extrapolated gap {}",
                fs.monotone,
                fs.final_gap,
                fs.extrapolated_gap.map(|g| format!("{g:.3e}")).unwrap_or_else(|| "n/a".into())
            ),
        ));
        let semigroup_defects = sweep
            .iter()
            .map(|&m| Ok((m, truncated_semigroup_defect(&model, t, t, m)?)))
            .collect::<Result<Vec<_>>>()?;
        let decrease = nonincreasing_to_floor(&semigroup_defects);
        checks.push(Check::new(
            format!("semigroup-defect-converges t={t}"),
            decrease,
            format!("{semigroup_defects:?}"),
        ));
        if config.export_matrices {
            if let Some(&m) = sweep.last() {
                let a = matrix_truncation(&model, OperatorSpec::PhiDifference { t }, m)?;
                let rows = std::iter::once(vec!["row".into(), "col".into(), "re".into(), "im".into()])
                    .chain((0..m).flat_map(|r| {
                        let a = &a;
                        (0..m).map(move |c| {
                            let v = a.matrix[(r, c)];
                            vec![r.to_string(), c.to_string(), v.re.to_string(), v.im.to_string()]
                        })
                    }))
                    .collect();
                outputs.tables.push((format!("phi_difference_t{t}_M{m}.csv"), rows));
            }
        }
        points.push(SweepPoint {
            t,
            finite_section: fs,
            semigroup_defects,
            semigroup_defects_decrease: decrease,
            isometry_defects: isometry_defects.clone(),
        });
    }
    let passed = checks.iter().all(|c| c.passed);
    let report = SweepReport { points, checks, passed };
    outputs.report = serde_json::to_value(&report)?;
    Ok((report, outputs))
}
