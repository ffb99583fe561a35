//! The two counterexamples: divergence of `‖Y‖_{S₂}` for the integer
//! measure, and sharpness of the exponent 3 in the trace-class criterion.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::analyze::{quadrature_spec, Check};
use super::config::ScenarioConfig;
use super::output::{BinRow, GrowthRow, Outputs};
use crate::error::{Error, Result};
use crate::measures::LineMeasure;
use crate::schatten::{self, KernelRoute};
use crate::sum::CompensatedSum;

/// Relative accuracy of the linear law for `‖K‖²_{S₂}`.
pub const K_LAW_TOL: f64 = 1e-12;

/// `Σ_{|n| ≤ N} δ_n`.
pub fn integer_measure(n: usize) -> Result<LineMeasure> {
    let n = n as i64;
    LineMeasure::new((-n..=n).map(|k| (k as f64, 1.0)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegersReport {
    pub t: f64,
    pub rows: Vec<GrowthRow>,
    /// The `N = 0` case: one atom at the origin.
    pub single_atom: GrowthRow,
    pub strictly_increasing: bool,
    pub ratio: f64,
    pub max_k_law_error: f64,
    pub checks: Vec<Check>,
    pub passed: bool,
}

fn growth_row(n: usize, t: f64, config: &ScenarioConfig) -> Result<GrowthRow> {
    let spec = quadrature_spec(config);
    let nu = integer_measure(n)?;
    let mu = nu.to_circle()?;
    let y = schatten::gram_y(&mu, t, &spec)?;
    let k = schatten::gram_k(&nu, t, KernelRoute::Auto, &spec)?;
    let k_law = t * (2 * n + 1) as f64 / (2.0 * PI);
    Ok(GrowthRow {
        n,
        atoms: nu.len(),
        t,
        y_hs_squared: y.trace,
        k_hs_squared: k.trace,
        k_law,
        k_law_relative_error: (k.trace - k_law).abs() / k_law,
    })
}

pub fn run_counterexample_integers(config: &ScenarioConfig) -> Result<(IntegersReport, Outputs)> {
    let spec = &config.integers;
    let t = spec.t;
    if !(t > 0.0) {
        return Err(Error::Config(format!("integer counterexample needs t > 0, got {t}")));
    }
    let rows = spec
        .sizes
        .iter()
        .map(|&n| growth_row(n, t, config))
        .collect::<Result<Vec<_>>>()?;
    let single_atom = growth_row(0, t, config)?;
    let mut sorted = rows.clone();
    sorted.sort_by_key(|r| r.n);
    let strictly_increasing = sorted.windows(2).all(|w| w[1].y_hs_squared > w[0].y_hs_squared);
    let reference = rows
        .iter()
        .find(|r| r.n == spec.ratio_reference)
        .ok_or_else(|| Error::Config(format!("ratio reference N = {} is not in the sweep", spec.ratio_reference)))?;
    let last = sorted.last().expect("nonempty sweep");
    let ratio = last.y_hs_squared / reference.y_hs_squared;
    let max_k_law_error = rows
        .iter()
        .chain(std::iter::once(&single_atom))
        .map(|r| r.k_law_relative_error)
        .fold(0.0, f64::max);
    let checks = vec![
        Check::new(
            "strict-growth",
            strictly_increasing,
            sorted
                .iter()
                .map(|r| format!("N={}: {:.6}", r.n, r.y_hs_squared))
                .collect::<Vec<_>>()
                .join(", "),
        ),
        Check::new(
            "growth-ratio",
            ratio >= spec.min_ratio,
            format!("value(N={})/value(N={}) = {ratio:.4}", last.n, reference.n),
        ),
        Check::new(
            "kernel-linear-law",
            max_k_law_error < K_LAW_TOL,
            format!("max relative error {max_k_law_error:.2e}"),
        ),
        Check::new(
            "single-atom-finite",
            single_atom.y_hs_squared.is_finite() && single_atom.y_hs_squared < 4.0 * single_atom.k_hs_squared,
            format!("N=0: {:.6}", single_atom.y_hs_squared),
        ),
    ];
    let passed = checks.iter().all(|c| c.passed);
    let report = IntegersReport {
        t,
        rows,
        single_atom,
        strictly_increasing,
        ratio,
        max_k_law_error,
        checks,
        passed,
    };
    let mut outputs = Outputs {
        growth: std::iter::once(report.single_atom.clone()).chain(report.rows.clone()).collect(),
        ..Outputs::default()
    };
    outputs.report = serde_json::to_value(&report)?;
    Ok((report, outputs))
}

/// `ν(Δ_n) = ((|n|+1) log(|n|+2))^{−2}`.
pub fn sharp3_bin_mass(n: i64) -> f64 {
    let a = n.unsigned_abs() as f64;
    ((a + 1.0) * (a + 2.0).ln()).powi(-2)
}

/// `(n+1)·ν(Δ_n) = 1/((n+1) log²(n+2))`.
fn weighted_term(n: u64) -> f64 {
    let a = n as f64;
    1.0 / ((a + 1.0) * (a + 2.0).ln().powi(2))
}

/// `ν(Δ_n)^{1/2} = 1/((n+1) log(n+2))`.
fn root_term(n: u64) -> f64 {
    let a = n as f64;
    1.0 / ((a + 1.0) * (a + 2.0).ln())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailPoint {
    pub n: u64,
    /// Upper estimate of `Σ_{k>N} (k+1)ν(Δ_k)` (one side).
    pub tail_upper: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartialSumPoint {
    pub n: u64,
    /// `Σ_{|k| ≤ N} ν(Δ_k)^{1/2}`.
    pub partial_sum: f64,
    pub lower_bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sharp3Report {
    pub max_n: u64,
    pub tails: Vec<TailPoint>,
    pub partial_sums: Vec<PartialSumPoint>,
    /// `min_N (Σ_{k=1}^N ν(Δ_k)^{1/2} − (loglog(N+2) − loglog 3))` over every `N ≤ max_n`.
    pub min_one_sided_margin: f64,
    /// Smallest margin of `ν(Δ_n)^{1/2} ≥ ∫_{n+2}^{n+3} dx/(x log x)` over `1 ≤ n ≤ max_n`.
    pub min_term_margin: f64,
    /// `Σ_{|k| ≤ max_n} ν(Δ_k)`, the `p = 2` sum, with an upper bound on its tail.
    pub mass_partial_sum: f64,
    pub mass_tail_bound: f64,
    /// `parfenov_sum(ν, 2) − ν(ℝ)` on a truncation, computed by the measure code.
    pub parfenov_two_consistency: f64,
    pub checks: Vec<Check>,
    pub passed: bool,
}

pub fn run_counterexample_sharp3(config: &ScenarioConfig) -> Result<(Sharp3Report, Outputs)> {
    let spec = &config.sharp3;
    if spec.max_exponent > 26 {
        return Err(Error::Config(format!("max_exponent {} is too large", spec.max_exponent)));
    }
    let max_n: u64 = 1 << spec.max_exponent;
    let horizon: u64 = max_n << 2;

    // (a) tails of Σ (n+1)ν(Δ_n): suffix sums up to the horizon, closed by
    // Σ_{k>K} f(k) ≤ ∫_K^∞ dx/((x+1) log²(x+1)) = 1/log(K+1)
    let closing = 1.0 / ((horizon + 1) as f64).ln();
    let mut suffix = CompensatedSum::new();
    suffix.add(closing);
    let mut sweep_points: Vec<u64> = (0..=spec.max_exponent).map(|j| 1u64 << j).collect();
    sweep_points.reverse();
    let mut tails = Vec::new();
    let mut k = horizon;
    for &n in &sweep_points {
        while k > n {
            suffix.add(weighted_term(k));
            k -= 1;
        }
        tails.push(TailPoint {
            n,
            tail_upper: suffix.value(),
            bound: 1.0 / ((n + 1) as f64).ln(),
        });
    }
    tails.reverse();
    let tails_ok = tails.iter().all(|p| p.tail_upper <= p.bound);
    let tails_shrink = tails.windows(2).all(|w| w[1].tail_upper < w[0].tail_upper);

    // (b) partial sums of Σ ν(Δ_n)^{1/2} against loglog(N+2) − loglog 3 at every N
    let loglog3 = 3f64.ln().ln();
    let mut one_sided = CompensatedSum::new();
    let mut min_margin = f64::INFINITY;
    let mut min_one_sided_margin = f64::INFINITY;
    let mut min_term_margin = f64::INFINITY;
    let mut partial_sums = Vec::new();
    let head = root_term(0);
    for n in 1..=max_n {
        let term = root_term(n);
        one_sided.add(term);
        let x = (n + 2) as f64;
        let integral = ((1.0 / x).ln_1p() / x.ln()).ln_1p();
        min_term_margin = min_term_margin.min(term - integral);
        let lower = x.ln().ln() - loglog3;
        let s1 = one_sided.value();
        let full = head + 2.0 * s1;
        min_one_sided_margin = min_one_sided_margin.min(s1 - lower);
        min_margin = min_margin.min(full - lower);
        if n.is_power_of_two() {
            partial_sums.push(PartialSumPoint {
                n,
                partial_sum: full,
                lower_bound: lower,
            });
        }
    }
    let partial_ok = min_margin > 0.0 && min_one_sided_margin > 0.0 && min_term_margin >= 0.0;

    // p = 2: the sum is the total mass and converges
    let mut mass = CompensatedSum::new();
    mass.add(sharp3_bin_mass(0));
    for n in 1..=max_n {
        mass.add(2.0 * sharp3_bin_mass(n as i64));
    }
    let m = max_n as f64;
    let mass_tail_bound = 2.0 / ((m + 2.0).ln().powi(2) * (m + 1.0));
    let truncated = LineMeasure::new(
        (-spec.bins_written..=spec.bins_written).map(|n| (n as f64 + 0.5, sharp3_bin_mass(n))),
    )?;
    let parfenov_two_consistency = (truncated.parfenov_sum(2.0)? - truncated.total_mass()).abs();

    let checks = vec![
        Check::new(
            "weighted-tails-below-bound",
            tails_ok && tails_shrink,
            format!(
                "worst ratio {:.4}",
                tails.iter().map(|p| p.tail_upper / p.bound).fold(0.0, f64::max)
            ),
        ),
        Check::new(
            "root-sums-above-loglog",
            partial_ok,
            format!(
                "min margin {min_margin:.4e}, one-sided {min_one_sided_margin:.4e}, termwise {min_term_margin:.4e} up to N = {max_n}"
            ),
        ),
        Check::new(
            "mass-sum-converges",
            parfenov_two_consistency < 1e-14 && mass.value().is_finite(),
            format!("partial {:.12}, tail ≤ {mass_tail_bound:.2e}", mass.value()),
        ),
    ];
    let passed = checks.iter().all(|c| c.passed);
    let report = Sharp3Report {
        max_n,
        tails,
        partial_sums,
        min_one_sided_margin,
        min_term_margin,
        mass_partial_sum: mass.value(),
        mass_tail_bound,
        parfenov_two_consistency,
        checks,
        passed,
    };
    let mut outputs = Outputs {
        bins: (-spec.bins_written..=spec.bins_written)
            .map(|n| BinRow {
                n,
                bin_lo: n as f64,
                bin_mass: sharp3_bin_mass(n),
                contribution_p: sharp3_bin_mass(n).sqrt(),
            })
            .collect(),
        ..Outputs::default()
    };
    outputs.report = serde_json::to_value(&report)?;
    Ok((report, outputs))
}
