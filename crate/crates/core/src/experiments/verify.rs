//! Randomized check of `‖K‖²_{S₂} = t·ν(ℝ)/(2π)` and of the `√t` law.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::analyze::{quadrature_spec, Check};
use super::config::ScenarioConfig;
use super::output::Outputs;
use crate::error::{Error, Result};
use crate::measures::LineMeasure;
use crate::schatten::{self, ClosedFormValidation, KernelRoute, SchattenIndex};

/// Relative accuracy demanded of the closed-form trace.
pub const CLOSED_FORM_TRACE_TOL: f64 = 1e-12;
/// Relative accuracy demanded of the quadrature trace.
pub const QUADRATURE_TRACE_TOL: f64 = 1e-6;
/// Allowed deviation of the fitted exponent from 1/2.
pub const SLOPE_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceCase {
    pub case: usize,
    pub atoms: usize,
    pub total_mass: f64,
    pub t: f64,
    pub exact: f64,
    pub closed_form_relative_error: f64,
    pub quadrature_relative_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub validation: ClosedFormValidation,
    pub cases: Vec<TraceCase>,
    pub max_closed_form_error: f64,
    pub max_quadrature_error: f64,
    /// Least-squares slope of `log ‖K‖_{S₂}` against `log t`.
    pub slope: f64,
    pub slope_t: Vec<f64>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Random line measure with up to `max_atoms` atoms in `[−10, 10]`.
pub fn random_line_measure<R: Rng>(rng: &mut R, max_atoms: usize) -> Result<LineMeasure> {
    let n = rng.gen_range(1..=max_atoms.max(1));
    LineMeasure::new((0..n).map(|_| (rng.gen_range(-10.0..10.0), rng.gen_range(0.05..5.0))))
}

/// Least-squares slope of `y` against `x`.
pub fn fitted_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn run_verify(config: &ScenarioConfig, t_grid: &[f64]) -> Result<(VerifyReport, Outputs)> {
    let v = &config.verify;
    let spec = quadrature_spec(config);
    let mut rng = ChaCha8Rng::seed_from_u64(v.seed);
    let measures = (0..v.cases)
        .map(|_| random_line_measure(&mut rng, v.max_atoms))
        .collect::<Result<Vec<_>>>()?;
    let mut cases = Vec::new();
    for (i, nu) in measures.iter().enumerate() {
        for &t in t_grid {
            let exact = t * nu.total_mass() / (2.0 * PI);
            let closed = schatten::gram_k(nu, t, KernelRoute::ClosedForm, &spec)?;
            let quad = schatten::gram_k(nu, t, KernelRoute::Quadrature, &spec)?;
            cases.push(TraceCase {
                case: i,
                atoms: nu.len(),
                total_mass: nu.total_mass(),
                t,
                exact,
                closed_form_relative_error: (closed.trace - exact).abs() / exact,
                quadrature_relative_error: (quad.trace - exact).abs() / exact,
            });
        }
    }
    let max_closed_form_error = cases.iter().map(|c| c.closed_form_relative_error).fold(0.0, f64::max);
    let max_quadrature_error = cases.iter().map(|c| c.quadrature_relative_error).fold(0.0, f64::max);

    let probe = measures
        .first()
        .ok_or_else(|| Error::Config("verify needs at least one case".into()))?;
    let logs = v
        .slope_t
        .iter()
        .map(|&t| {
            let k = schatten::gram_k(probe, t, KernelRoute::Auto, &spec)?;
            Ok((t.ln(), k.spectrum.norm(SchattenIndex::Finite(2.0)).ln()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (lx, ly): (Vec<f64>, Vec<f64>) = logs.into_iter().unzip();
    let slope = fitted_slope(&lx, &ly);

    let validation = schatten::closed_form_validation();
    let checks = vec![
        Check::new(
            "closed-form-validated",
            validation.passed,
            format!("max difference {:.2e} over {} cases", validation.max_difference, validation.cases),
        ),
        Check::new(
            "trace-identity-closed-form",
            max_closed_form_error < CLOSED_FORM_TRACE_TOL,
            format!("max relative error {max_closed_form_error:.2e}"),
        ),
        Check::new(
            "trace-identity-quadrature",
            max_quadrature_error < QUADRATURE_TRACE_TOL,
            format!("max relative error {max_quadrature_error:.2e}"),
        ),
        Check::new(
            "square-root-scaling",
            (slope - 0.5).abs() < SLOPE_TOL,
            format!("slope {slope:.12}"),
        ),
    ];
    let passed = checks.iter().all(|c| c.passed);
    let report = VerifyReport {
        seed: v.seed,
        validation,
        cases,
        max_closed_form_error,
        max_quadrature_error,
        slope,
        slope_t: v.slope_t.clone(),
        checks,
        passed,
    };
    let mut outputs = Outputs::default();
    let mut table = vec![vec![
        "case".to_string(),
        "atoms".into(),
        "t".into(),
        "exact".into(),
        "closed_form_relative_error".into(),
        "quadrature_relative_error".into(),
    ]];
    for c in &report.cases {
        table.push(vec![
            c.case.to_string(),
            c.atoms.to_string(),
            c.t.to_string(),
            c.exact.to_string(),
            c.closed_form_relative_error.to_string(),
            c.quadrature_relative_error.to_string(),
        ]);
    }
    outputs.tables.push(("trace_identity.csv".into(), table));
    outputs.report = serde_json::to_value(&report)?;
    Ok((report, outputs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_power_law() {
        let x: Vec<f64> = (1..10).map(|k| (k as f64).ln()).collect();
        let y: Vec<f64> = x.iter().map(|v| 3f64.ln() + 0.5 * v).collect();
        assert!((fitted_slope(&x, &y) - 0.5).abs() < 1e-13);
    }
}
