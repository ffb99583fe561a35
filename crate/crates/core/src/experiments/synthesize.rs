//! Building a unitary-plus-small-perturbation model with a prescribed point
//! spectrum, and the certificate that records it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::analyze::{quadrature_spec, Check};
use super::config::{ScenarioConfig, TargetAtom};
use super::output::{Outputs, SpectrumRow};
use crate::error::{Error, Result};
use crate::linalg::match_multisets;
use crate::measures::{rescale_for_epsilon, unit_from_angle_over_pi, CircleMeasure, DEFAULT_ATOM_FLOOR};
use crate::model_ops::{self, PerturbedShiftModel};
use crate::quadrature::CircleRule;
use crate::schatten::{self, QuadratureSpec, SchattenIndex};
use crate::C64;

/// Eigenvalue agreement required of a synthesized model.
pub const EIGENVALUE_TOL: f64 = 1e-8;

const DEFAULT_TIMES: [f64; 3] = [0.5, 1.0, 2.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemigroupEstimate {
    pub t: f64,
    /// `‖φ_t(S̃) − φ_t(S)‖_{S₁}`.
    pub trace_norm: f64,
    /// `trace_norm / (√t · Σ_n (∫ dμ_n/|1−ξ|^q)^{1/2})`.
    pub fitted_constant: f64,
}

/// Everything needed to rebuild and re-check a synthesized model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub target: Vec<TargetAtom>,
    pub epsilon: f64,
    pub q: f64,
    /// Scale factor applied to each layer (unit weights before scaling).
    pub factors: Vec<f64>,
    pub measures: Vec<CircleMeasure>,
    /// `‖S̃ − S‖_{S₁}`; zero when the target is empty.
    pub trace_norm: f64,
    pub operator_norm: f64,
    pub rank: usize,
    pub root_moment_sum: f64,
    pub semigroup: Vec<SemigroupEstimate>,
}

/// Result of re-checking a certificate from its stored measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateCheck {
    pub eigenvalue_mismatch: f64,
    pub trace_norm: f64,
    pub trace_norm_drift: f64,
    pub within_epsilon: bool,
    pub passed: bool,
}

impl Certificate {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Rebuilds the model from the stored measures and re-derives the
    /// spectrum and the trace norm.
    pub fn verify(&self) -> Result<CertificateCheck> {
        let expected = target_points(&self.target)?;
        if self.measures.is_empty() {
            let passed = expected.is_empty() && self.trace_norm == 0.0;
            return Ok(CertificateCheck {
                eigenvalue_mismatch: 0.0,
                trace_norm: 0.0,
                trace_norm_drift: self.trace_norm,
                within_epsilon: true,
                passed,
            });
        }
        let model = PerturbedShiftModel::new(self.measures.clone())?;
        let eigenvalue_mismatch = match_multisets(&model.eigenvalues(), &expected).unwrap_or(f64::INFINITY);
        let norms = model_ops::stilde_minus_s_norms(&model)?;
        let drift = (norms.trace_norm - self.trace_norm).abs();
        let within_epsilon = norms.trace_norm < self.epsilon;
        Ok(CertificateCheck {
            eigenvalue_mismatch,
            trace_norm: norms.trace_norm,
            trace_norm_drift: drift,
            within_epsilon,
            passed: eigenvalue_mismatch <= EIGENVALUE_TOL && within_epsilon && drift <= 1e-9 * self.epsilon.max(1.0),
        })
    }
}

fn target_points(target: &[TargetAtom]) -> Result<Vec<C64>> {
    let mut points = Vec::new();
    for a in target {
        let z = unit_from_angle_over_pi(a.angle_over_pi);
        if (z - 1.0).norm() < DEFAULT_ATOM_FLOOR {
            return Err(Error::param(format!(
                "target eigenvalue at angle {}π coincides with 1, which cannot be an eigenvalue",
                a.angle_over_pi
            )));
        }
        if a.multiplicity == 0 {
            return Err(Error::param(format!("target at {}π has multiplicity 0", a.angle_over_pi)));
        }
        points.extend(std::iter::repeat(z).take(a.multiplicity));
    }
    Ok(points)
}

/// One measure per multiplicity layer: layer `n` carries a unit atom at
/// every target point of multiplicity greater than `n`.
pub fn layer_measures(target: &[TargetAtom]) -> Result<Vec<CircleMeasure>> {
    target_points(target)?;
    let layers = target.iter().map(|a| a.multiplicity).max().unwrap_or(0);
    (0..layers)
        .map(|n| {
            let atoms: Vec<(f64, f64)> = target
                .iter()
                .filter(|a| a.multiplicity > n)
                .map(|a| (a.angle_over_pi, 1.0))
                .collect();
            CircleMeasure::from_angles(&atoms)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub certificate: Certificate,
    pub reload: CertificateCheck,
    /// `max/min` of `trace_norm/√t` over the time grid.
    pub sqrt_t_spread: Option<f64>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

pub fn synthesize(
    target: &[TargetAtom],
    epsilon: f64,
    q: f64,
    times: &[f64],
    spec: &QuadratureSpec,
) -> Result<Certificate> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::param(format!("ε must be positive and finite, got {epsilon}")));
    }
    let layers = layer_measures(target)?;
    if layers.is_empty() {
        return Ok(Certificate {
            target: Vec::new(),
            epsilon,
            q,
            factors: Vec::new(),
            measures: Vec::new(),
            trace_norm: 0.0,
            operator_norm: 0.0,
            rank: 0,
            root_moment_sum: 0.0,
            semigroup: times
                .iter()
                .map(|&t| SemigroupEstimate {
                    t,
                    trace_norm: 0.0,
                    fitted_constant: 0.0,
                })
                .collect(),
        });
    }
    let rescaled = rescale_for_epsilon(&layers, epsilon, q)?;
    let model = PerturbedShiftModel::new(rescaled.measures.clone())?;
    let norms = model_ops::stilde_minus_s_norms(&model)?;
    let semigroup = times
        .iter()
        .map(|&t| {
            let g = schatten::gram_x_model(&model, t, spec)?;
            let trace_norm = g.spectrum.norm(SchattenIndex::Finite(1.0));
            Ok(SemigroupEstimate {
                t,
                trace_norm,
                fitted_constant: trace_norm / (t.sqrt() * rescaled.root_moment_sum),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Certificate {
        target: target.to_vec(),
        epsilon,
        q,
        factors: rescaled.factors,
        measures: rescaled.measures,
        trace_norm: norms.trace_norm,
        operator_norm: norms.operator_norm,
        rank: norms.rank,
        root_moment_sum: rescaled.root_moment_sum,
        semigroup,
    })
}

pub fn run_synthesize(config: &ScenarioConfig) -> Result<(SynthesisReport, Outputs)> {
    let s = config
        .synthesis
        .as_ref()
        .ok_or_else(|| Error::Config("synthesize needs a synthesis section".into()))?;
    let times: Vec<f64> = if config.t_grid.is_empty() {
        DEFAULT_TIMES.to_vec()
    } else {
        config.t_grid.iter().copied().filter(|&t| t > 0.0).collect()
    };
    let spec = quadrature_spec(config);
    let certificate = synthesize(&s.target, s.epsilon, s.q, &times, &spec)?;
    let layers = certificate.measures.len();
    let mut checks = Vec::new();
    if layers > 0 {
        let model = PerturbedShiftModel::new(certificate.measures.clone())?;
        let unitary = model_ops::unitary_block_check(&model, &CircleRule::default())?;
        checks.push(Check::new(
            "unitary-block",
            unitary.within(config.tolerances.unitary),
            format!("gram {:.2e}, eigenvalues {:.2e}", unitary.gram_defect, unitary.eigenvalue_mismatch),
        ));
    }
    checks.push(Check::new(
        "trace-norm-below-epsilon",
        certificate.trace_norm < s.epsilon,
        format!("{:.6e} < {:.6e}", certificate.trace_norm, s.epsilon),
    ));
    checks.push(Check::new(
        "rank-at-most-layers",
        certificate.rank <= layers,
        format!("rank {} with {layers} layers", certificate.rank),
    ));
    let reload = certificate.verify()?;
    checks.push(Check::new(
        "eigenvalues-match-target",
        reload.eigenvalue_mismatch <= EIGENVALUE_TOL,
        format!("max mismatch {:.2e}", reload.eigenvalue_mismatch),
    ));
    checks.push(Check::new(
        "certificate-reload",
        reload.passed,
        format!("trace norm drift {:.2e}", reload.trace_norm_drift),
    ));
    checks.push(Check::new(
        "semigroup-trace-norms-finite",
        certificate.semigroup.iter().all(|e| e.trace_norm.is_finite()),
        certificate
            .semigroup
            .iter()
            .map(|e| format!("t={}: {:.4e} (M = {:.4})", e.t, e.trace_norm, e.fitted_constant))
            .collect::<Vec<_>>()
            .join(", "),
    ));
    let scaled: Vec<f64> = certificate
        .semigroup
        .iter()
        .filter(|e| e.trace_norm > 0.0)
        .map(|e| e.trace_norm / e.t.sqrt())
        .collect();
    let sqrt_t_spread = (!scaled.is_empty()).then(|| {
        scaled.iter().copied().fold(0.0, f64::max) / scaled.iter().copied().fold(f64::INFINITY, f64::min)
    });
    let passed = checks.iter().all(|c| c.passed);
    let report = SynthesisReport {
        certificate,
        reload,
        sqrt_t_spread,
        checks,
        passed,
    };
    let mut outputs = Outputs::default();
    if layers > 0 {
        let model = PerturbedShiftModel::new(report.certificate.measures.clone())?;
        let norms = model_ops::stilde_minus_s_norms(&model)?;
        let spectrum = schatten::SingularSpectrum::new(norms.singular_values, schatten::SpectrumMethod::QuadratureGram, 0.0);
        outputs.spectra = SpectrumRow::rows(&spectrum, 0.0, "stilde-minus-s");
    }
    outputs.report = serde_json::to_value(&report)?;
    outputs
        .files
        .push(("certificate.json".into(), serde_json::to_string_pretty(&report.certificate)? + "\n"));
    Ok((report, outputs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(a: f64, m: usize) -> TargetAtom {
        TargetAtom {
            angle_over_pi: a,
            multiplicity: m,
        }
    }

    #[test]
    fn layers_follow_multiplicity() {
        let layers = layer_measures(&[atom(0.5, 2), atom(-0.5, 1), atom(1.0, 3)]).unwrap();
        assert_eq!(layers.iter().map(CircleMeasure::len).collect::<Vec<_>>(), vec![3, 2, 1]);
    }

    #[test]
    fn rejects_target_at_one() {
        assert!(layer_measures(&[atom(0.0, 1)]).is_err());
        assert!(layer_measures(&[atom(2.0, 1)]).is_err());
        assert!(layer_measures(&[atom(0.5, 0)]).is_err());
    }

    #[test]
    fn empty_target_gives_the_shift() {
        let c = synthesize(&[], 0.1, 4.0, &[1.0], &QuadratureSpec::default()).unwrap();
        assert!(c.measures.is_empty());
        assert_eq!(c.trace_norm, 0.0);
        assert!(c.verify().unwrap().passed);
    }

    #[test]
    fn synthesized_model_meets_its_certificate() {
        let target = [atom(0.5, 2), atom(-0.75, 1)];
        let c = synthesize(&target, 0.05, 4.0, &[1.0], &QuadratureSpec::default()).unwrap();
        assert!(c.trace_norm < 0.05);
        assert!(c.rank <= 2);
        let check = c.verify().unwrap();
        assert!(check.passed, "{check:?}");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cert.json");
        c.save(&path).unwrap();
        let back = Certificate::load(&path).unwrap();
        assert_eq!(back, c);
        assert!(back.verify().unwrap().passed);
    }
}
