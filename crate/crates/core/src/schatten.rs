//! Singular spectra and Schatten norms of the finite-rank operators in the
//! model, computed from Gram matrices of explicit column families, plus the
//! norm inequalities with explicit constants.
//!
//! Three families live on the real line (after Cayley transport):
//! - `K`: columns `c_k(x) = √m_k (e^{itζ_k} − e^{itx}) / (2πi(ζ_k − x))`;
//! - `Y`: columns `(1 − Θ(x)) c_k(x)`;
//! - `X`: columns `(φ_t(λ_k) − φ_t) e_k` in `H²` over the Clark basis `e_k`,
//!   whose singular values are those of `φ_t(S̃) − φ_t(S)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::analytic::{InnerFunctionModel, SemigroupSymbol};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::measures::{cayley_point, CircleMeasure, LineMeasure};
use crate::model_ops::{self, matrix_truncation, OperatorSpec, PerturbedShiftModel};
use crate::quadrature::{integrate, oscillatory_tail, plain_tail, tail_start, AdaptiveOptions, Side};
use crate::sum::CompensatedSum;
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Eigenvalues below this fraction of the trace are treated as zero.
pub const EIGEN_CLAMP: f64 = 1e-12;

/// Gram matrices whose smallest eigenvalue is below `−PSD_SLACK·trace` are
/// rejected as not positive semidefinite.
pub const PSD_SLACK: f64 = 1e-10;

/// How a spectrum was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumMethod {
    ClosedFormGram,
    QuadratureGram,
    FiniteSection,
}

impl fmt::Display for SpectrumMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpectrumMethod::ClosedFormGram => "closed-form-gram",
            SpectrumMethod::QuadratureGram => "quadrature-gram",
            SpectrumMethod::FiniteSection => "finite-section",
        })
    }
}

/// Descending nonnegative singular values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularSpectrum {
    pub values: Vec<f64>,
    pub method: SpectrumMethod,
    pub error_estimate: f64,
}

impl SingularSpectrum {
    pub fn new(mut values: Vec<f64>, method: SpectrumMethod, error_estimate: f64) -> Self {
        for v in values.iter_mut() {
            *v = v.max(0.0);
        }
        values.sort_by(|a, b| b.total_cmp(a));
        Self {
            values,
            method,
            error_estimate,
        }
    }

    /// Square roots of the Gram eigenvalues, after clamping tiny ones to zero.
    pub fn from_gram(gram: &CMatrix, method: SpectrumMethod, error_estimate: f64) -> Result<Self> {
        let ev = linalg::hermitian_eigenvalues(gram);
        let trace: f64 = (0..gram.nrows()).map(|i| gram[(i, i)].re).sum();
        if let Some(&min) = ev.first() {
            if min < -PSD_SLACK * trace.abs().max(f64::MIN_POSITIVE) {
                return Err(Error::Tolerance {
                    what: "Gram positivity".into(),
                    detail: format!("min eigenvalue {min:.3e} with trace {trace:.3e}"),
                });
            }
        }
        let values = ev
            .into_iter()
            .map(|l| if l < EIGEN_CLAMP * trace { 0.0 } else { l.sqrt() })
            .collect();
        Ok(Self::new(values, method, error_estimate))
    }

    pub fn zero(len: usize, method: SpectrumMethod) -> Self {
        Self::new(vec![0.0; len], method, 0.0)
    }

    pub fn norm(&self, p: SchattenIndex) -> f64 {
        schatten_norm(&self.values, p)
    }

    /// Number of values above `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        self.values.iter().filter(|&&v| v > tol).count()
    }

    /// Largest relative difference between corresponding values, measured
    /// against the largest value of either spectrum.
    pub fn relative_distance(&self, other: &SingularSpectrum) -> f64 {
        let scale = self
            .values
            .iter()
            .chain(&other.values)
            .copied()
            .fold(0.0f64, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let n = self.values.len().max(other.values.len());
        (0..n)
            .map(|i| {
                let a = self.values.get(i).copied().unwrap_or(0.0);
                let b = other.values.get(i).copied().unwrap_or(0.0);
                (a - b).abs() / scale
            })
            .fold(0.0, f64::max)
    }
}

/// Schatten exponent `p ∈ (0, ∞]`; serialized as a number or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchattenIndex {
    Finite(f64),
    Infinity,
}

impl SchattenIndex {
    pub fn finite(p: f64) -> Result<Self> {
        if p > 0.0 && p.is_finite() {
            Ok(SchattenIndex::Finite(p))
        } else if p == f64::INFINITY {
            Ok(SchattenIndex::Infinity)
        } else {
            Err(Error::param(format!("Schatten exponent must be positive, got {p}")))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            SchattenIndex::Finite(p) => p,
            SchattenIndex::Infinity => f64::INFINITY,
        }
    }
}

impl fmt::Display for SchattenIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchattenIndex::Finite(p) => write!(f, "{p}"),
            SchattenIndex::Infinity => f.write_str("inf"),
        }
    }
}

impl Serialize for SchattenIndex {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SchattenIndex::Finite(p) => s.serialize_f64(*p),
            SchattenIndex::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for SchattenIndex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(p) => SchattenIndex::finite(p).map_err(serde::de::Error::custom),
            Raw::Text(s) if s == "inf" || s == "infinity" => Ok(SchattenIndex::Infinity),
            Raw::Text(s) => Err(serde::de::Error::custom(format!("invalid Schatten exponent {s:?}"))),
        }
    }
}

/// `(Σ s^p)^{1/p}`, or `max s` for `p = ∞`.
pub fn schatten_norm(values: &[f64], p: SchattenIndex) -> f64 {
    match p {
        SchattenIndex::Infinity => values.iter().copied().fold(0.0, f64::max),
        SchattenIndex::Finite(p) => {
            let s: f64 = values.iter().map(|v| v.powf(p)).collect::<CompensatedSum>().value();
            s.powf(1.0 / p)
        }
    }
}

/// A norm inequality evaluated on concrete data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub id: String,
    pub p: Option<SchattenIndex>,
    pub t: Option<f64>,
    pub value: f64,
    /// Present for bounds with explicit constants.
    pub bound: Option<f64>,
    pub strict: bool,
    pub holds: Option<bool>,
    /// Present for bounds with unknown constants: `value / shape`.
    pub fitted_constant: Option<f64>,
}

impl BoundCheck {
    fn explicit(id: &str, p: Option<SchattenIndex>, t: Option<f64>, value: f64, bound: f64, strict: bool) -> Self {
        let holds = if strict { value < bound } else { value <= bound };
        Self {
            id: id.into(),
            p,
            t,
            value,
            bound: Some(bound),
            strict,
            holds: Some(holds),
            fitted_constant: None,
        }
    }

    fn fitted(id: &str, p: Option<SchattenIndex>, t: Option<f64>, value: f64, shape: f64) -> Self {
        Self {
            id: id.into(),
            p,
            t,
            value,
            bound: None,
            strict: false,
            holds: None,
            fitted_constant: Some(if shape > 0.0 { value / shape } else { f64::NAN }),
        }
    }

    pub fn failed(&self) -> bool {
        self.holds == Some(false)
    }
}

/// Norm of one spectrum together with the bounds evaluated against it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchattenReport {
    pub label: String,
    pub p: SchattenIndex,
    pub norm: f64,
    pub spectrum: SingularSpectrum,
    pub bounds: Vec<BoundCheck>,
}

impl SchattenReport {
    pub fn new(label: &str, spectrum: SingularSpectrum, p: SchattenIndex) -> Self {
        Self {
            label: label.into(),
            p,
            norm: spectrum.norm(p),
            spectrum,
            bounds: Vec::new(),
        }
    }

    /// Whether the stored norm is reproduced from the stored spectrum.
    pub fn consistent(&self) -> bool {
        let again = self.spectrum.norm(self.p);
        (again - self.norm).abs() <= 1e-12 * self.norm.max(1.0)
    }
}

/// A Gram matrix with its spectrum.
#[derive(Debug, Clone)]
pub struct GramResult {
    pub gram: CMatrix,
    pub spectrum: SingularSpectrum,
    /// `trace(G) = ‖·‖²_{S₂}`.
    pub trace: f64,
    pub evaluations: usize,
}

impl GramResult {
    fn build(gram: CMatrix, method: SpectrumMethod, error: f64, evaluations: usize) -> Result<Self> {
        let gram = linalg::symmetrize(&gram);
        let trace = (0..gram.nrows()).map(|i| gram[(i, i)].re).collect::<CompensatedSum>().value();
        let spectrum = SingularSpectrum::from_gram(&gram, method, error)?;
        Ok(Self {
            gram,
            spectrum,
            trace,
            evaluations,
        })
    }

    fn zero(n: usize, method: SpectrumMethod) -> Self {
        Self {
            gram: CMatrix::zeros(n, n),
            spectrum: SingularSpectrum::zero(n, method),
            trace: 0.0,
            evaluations: 0,
        }
    }
}

/// Tolerances of the line and circle integrals behind the quadrature Grams.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Tolerance relative to the natural scale `t·ν(ℝ)/(2π)` of the Gram.
    pub rel_tol: f64,
    /// Tail cut: relative accuracy demanded of the truncated asymptotic tail.
    pub tail_rel_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-11,
            tail_rel_tol: 1e-12,
            max_depth: 30,
        }
    }
}

/// `∫ col_k conj(col_j) dx` over ℝ for columns of the form
/// `col_k = G_k(x)(α_k − e^{itx})`.
///
/// `col` evaluates the columns stably on the interior `[−X, X]`; `g`
/// evaluates `G_k` for the tails, which are split into a non-oscillatory
/// part (integrated on `s = 1/x`) and two parts with `e^{∓itx}` (integrated
/// asymptotically). `X` grows with `support` and shrinks with `t`.
#[allow(clippy::too_many_arguments)]
fn line_gram<C, G>(
    n: usize,
    col: &C,
    g: &G,
    alpha: &[C64],
    t: f64,
    interior_breaks: &[f64],
    support: f64,
    scale: f64,
    spec: &QuadratureSpec,
) -> Result<(CMatrix, f64, usize)>
where
    C: Fn(f64, &mut [C64]) + Sync,
    G: Fn(f64, &mut [C64]) + Sync,
{
    let x0 = tail_start(support, t, spec.tail_rel_tol);
    let abs_tol = spec.rel_tol * scale;
    let outer = |x: f64, out: &mut [C64]| {
        let mut c = vec![ZERO; n];
        col(x, &mut c);
        for j in 0..n {
            let cj = c[j].conj();
            for k in 0..n {
                out[j * n + k] = c[k] * cj;
            }
        }
    };
    let mut breaks: Vec<f64> = interior_breaks.iter().copied().filter(|x| x.abs() < x0).collect();
    breaks.push(-x0);
    breaks.push(x0);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let opts = AdaptiveOptions {
        abs_tol,
        max_width: (PI / (4.0 * t)).min(1.0),
        max_depth: spec.max_depth,
    };
    let interior = integrate(&outer, n * n, &breaks, &opts);
    if !interior.converged {
        return Err(Error::Quadrature {
            what: "line Gram interior".into(),
            change: interior.error,
            points: interior.evaluations,
        });
    }

    let products = |x: f64, out: &mut [C64], kind: u8| {
        let mut gv = vec![ZERO; n];
        g(x, &mut gv);
        for j in 0..n {
            let gj = gv[j].conj();
            for k in 0..n {
                let p = gv[k] * gj;
                out[j * n + k] = match kind {
                    0 => p * (alpha[k] * alpha[j].conj() + 1.0),
                    1 => p * alpha[k],
                    _ => p * alpha[j].conj(),
                };
            }
        }
    };
    let plain = |x: f64, out: &mut [C64]| products(x, out, 0);
    let with_minus = |x: f64, out: &mut [C64]| products(x, out, 1);
    let with_plus = |x: f64, out: &mut [C64]| products(x, out, 2);
    let mut gram = interior.value;
    let mut error = interior.error;
    let mut evaluations = interior.evaluations;
    for side in [Side::Left, Side::Right] {
        let p = plain_tail(&plain, n * n, x0, side, 0.1 * abs_tol);
        if !p.converged {
            return Err(Error::Quadrature {
                what: "line Gram tail".into(),
                change: p.error,
                points: p.evaluations,
            });
        }
        let minus = oscillatory_tail(&with_minus, n * n, x0, -t, side);
        let plus = oscillatory_tail(&with_plus, n * n, x0, t, side);
        for i in 0..n * n {
            gram[i] += p.value[i] - minus[i] - plus[i];
        }
        error += p.error;
        evaluations += p.evaluations + 6;
    }
    Ok((CMatrix::from_fn(n, n, |j, k| gram[j * n + k]), error, evaluations))
}

/// `sin(u)/u`.
fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        1.0 - u * u / 6.0
    } else {
        u.sin() / u
    }
}

/// `(e^{ita} − e^{itx})/(a − x) = it e^{it(a+x)/2} sinc(t(a−x)/2)`.
fn difference_quotient(t: f64, a: f64, x: f64) -> C64 {
    C64::new(0.0, t) * C64::from_polar(1.0, 0.5 * t * (a + x)) * sinc(0.5 * t * (a - x))
}

/// Which path [`gram_k`] takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelRoute {
    /// Closed form if the startup self-test passed, quadrature otherwise.
    Auto,
    ClosedForm,
    Quadrature,
}

/// Closed-form Gram of `K`:
/// `G_jk = √(m_j m_k)(e^{itd} − 1)/(2πi d)`, `d = ζ_k − ζ_j`, diagonal `m t/(2π)`.
pub fn gram_k_closed(nu: &LineMeasure, t: f64) -> CMatrix {
    let z = nu.points();
    let m = nu.masses();
    let n = z.len();
    CMatrix::from_fn(n, n, |j, k| {
        let d = z[k] - z[j];
        // (e^{itd} − 1)/(id) = t e^{itd/2} sinc(td/2)
        (m[j] * m[k]).sqrt() * t * C64::from_polar(1.0, 0.5 * t * d) * sinc(0.5 * t * d) / (2.0 * PI)
    })
}

/// Quadrature Gram of `K` over the line.
pub fn gram_k_quadrature(nu: &LineMeasure, t: f64, spec: &QuadratureSpec) -> Result<(CMatrix, f64, usize)> {
    let z = nu.points();
    let m = nu.masses();
    let n = z.len();
    let col = |x: f64, out: &mut [C64]| {
        for k in 0..n {
            out[k] = m[k].sqrt() / C64::new(0.0, 2.0 * PI) * difference_quotient(t, z[k], x);
        }
    };
    let g = |x: f64, out: &mut [C64]| {
        for k in 0..n {
            out[k] = m[k].sqrt() / C64::new(0.0, 2.0 * PI * (z[k] - x));
        }
    };
    let alpha: Vec<C64> = z.iter().map(|&zeta| C64::from_polar(1.0, t * zeta)).collect();
    let scale = t * nu.total_mass() / (2.0 * PI);
    line_gram(n, &col, &g, &alpha, t, &z, nu.support_radius(), scale, spec)
}

/// Outcome of the closed-form self-test.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClosedFormValidation {
    pub cases: usize,
    pub max_difference: f64,
    pub passed: bool,
}

/// Tolerance of the closed-form self-test.
pub const CLOSED_FORM_GATE: f64 = 1e-6;

static CLOSED_FORM: OnceLock<ClosedFormValidation> = OnceLock::new();

fn run_closed_form_validation() -> ClosedFormValidation {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6b67_7261_6d);
    let cases = 20;
    let mut worst = 0.0f64;
    let spec = QuadratureSpec::default();
    for _ in 0..cases {
        let n = rng.gen_range(1..=4);
        let atoms: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.gen_range(-5.0..5.0), rng.gen_range(0.1..3.0)))
            .collect();
        let nu = match LineMeasure::new(atoms) {
            Ok(nu) => nu,
            Err(_) => return ClosedFormValidation {
                cases,
                max_difference: f64::INFINITY,
                passed: false,
            },
        };
        let t = rng.gen_range(0.2..3.0);
        let closed = gram_k_closed(&nu, t);
        match gram_k_quadrature(&nu, t, &spec) {
            Ok((quad, _, _)) => worst = worst.max(linalg::max_abs(&(closed - quad))),
            Err(_) => worst = f64::INFINITY,
        }
    }
    ClosedFormValidation {
        cases,
        max_difference: worst,
        passed: worst < CLOSED_FORM_GATE,
    }
}

/// Runs (once per process) the comparison of the closed-form `K` Gram with
/// quadrature on 20 random cases; the closed form is used only if it passed.
pub fn closed_form_validation() -> ClosedFormValidation {
    *CLOSED_FORM.get_or_init(run_closed_form_validation)
}

/// Gram matrix and singular spectrum of `K` for an atomic line measure.
pub fn gram_k(nu: &LineMeasure, t: f64, route: KernelRoute, spec: &QuadratureSpec) -> Result<GramResult> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::param(format!("t must be ≥ 0, got {t}")));
    }
    let n = nu.len();
    let closed = match route {
        KernelRoute::ClosedForm => true,
        KernelRoute::Quadrature => false,
        KernelRoute::Auto => closed_form_validation().passed,
    };
    let method = if closed {
        SpectrumMethod::ClosedFormGram
    } else {
        SpectrumMethod::QuadratureGram
    };
    if t == 0.0 || n == 0 {
        return Ok(GramResult::zero(n, method));
    }
    if closed {
        GramResult::build(gram_k_closed(nu, t), method, f64::EPSILON * t * nu.total_mass(), 0)
    } else {
        let (g, err, evals) = gram_k_quadrature(nu, t, spec)?;
        GramResult::build(g, method, err, evals)
    }
}

/// Gram matrix of `Y` for a circle measure: columns `(1 − Θ) c_k` on the line.
pub fn gram_y(mu: &CircleMeasure, t: f64, spec: &QuadratureSpec) -> Result<GramResult> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::param(format!("t must be ≥ 0, got {t}")));
    }
    let model = InnerFunctionModel::new(mu.clone())?;
    let nu = model.line().clone();
    let n = nu.len();
    if t == 0.0 || n == 0 {
        return Ok(GramResult::zero(n, SpectrumMethod::QuadratureGram));
    }
    let z = nu.points();
    let m = nu.masses();
    let col = |x: f64, out: &mut [C64]| {
        let f = model.one_minus_theta_line(x);
        for k in 0..n {
            out[k] = f * m[k].sqrt() / C64::new(0.0, 2.0 * PI) * difference_quotient(t, z[k], x);
        }
    };
    let g = |x: f64, out: &mut [C64]| {
        let f = model.one_minus_theta_line(x);
        for k in 0..n {
            out[k] = f * m[k].sqrt() / C64::new(0.0, 2.0 * PI * (z[k] - x));
        }
    };
    let alpha: Vec<C64> = z.iter().map(|&zeta| C64::from_polar(1.0, t * zeta)).collect();
    let scale = t * nu.total_mass() / (2.0 * PI);
    let (gram, err, evals) = line_gram(n, &col, &g, &alpha, t, &z, nu.support_radius(), scale, spec)?;
    GramResult::build(gram, SpectrumMethod::QuadratureGram, err, evals)
}

/// Gram matrix of the columns `(φ_t(λ_k) − φ_t) e_k` over the Clark basis
/// of the model; its singular values are those of `φ_t(S̃) − φ_t(S)`.
///
/// Away from `z = 1` the integral runs over the angle with panels narrow
/// enough for the local oscillation of `φ_t`; near `1` it is moved to the
/// line by `x = i(1+z)/(1−z)`, where `φ_t` becomes `e^{itx}` and the tails
/// are handled as in the line Grams.
pub fn gram_x_model(model: &PerturbedShiftModel, t: f64, spec: &QuadratureSpec) -> Result<GramResult> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::param(format!("t must be ≥ 0, got {t}")));
    }
    let n = model.atom_count();
    if t == 0.0 || n == 0 {
        return Ok(GramResult::zero(n, SpectrumMethod::QuadratureGram));
    }
    let symbol = SemigroupSymbol::new(t)?;
    let atoms = model.eigenvalues();
    let alpha = atoms.iter().map(|&l| symbol.phi(l)).collect::<Result<Vec<_>>>()?;
    let zetas: Vec<f64> = atoms.iter().map(|&l| cayley_point(l)).collect();
    let support = zetas.iter().map(|z| z.abs()).fold(0.0, f64::max);
    let mass: f64 = model
        .blocks()
        .iter()
        .map(|b| b.line().total_mass())
        .sum();
    let scale = t * mass / (2.0 * PI);
    let x0 = tail_start(support, t, spec.tail_rel_tol);
    let phi0 = 2.0 * (1.0 / x0).atan();

    // interior on the circle, weight dφ/2π
    let angular = |phi: f64, out: &mut [C64]| {
        let z = C64::from_polar(1.0, phi);
        let p = model.values(z);
        let f = symbol.phi(z).unwrap_or(ZERO);
        let cols: Vec<C64> = (0..n).map(|k| (alpha[k] - f) * p.basis[k]).collect();
        for j in 0..n {
            let cj = cols[j].conj() / (2.0 * PI);
            for k in 0..n {
                out[j * n + k] = cols[k] * cj;
            }
        }
    };
    // |d/dφ of t·cot(φ/2)| = t/(2 sin²(φ/2)); keep a quarter period per panel
    let mut breaks = vec![phi0];
    let end = 2.0 * PI - phi0;
    let mut phi = phi0;
    while phi < end {
        let s = (0.5 * phi).sin();
        let step = (PI / (4.0 * t) * 2.0 * s * s).min(0.05);
        phi = (phi + step).min(end);
        breaks.push(phi);
    }
    for &l in &atoms {
        let a = l.arg().rem_euclid(2.0 * PI);
        if a > phi0 && a < end {
            breaks.push(a);
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let opts = AdaptiveOptions {
        abs_tol: spec.rel_tol * scale,
        max_width: f64::INFINITY,
        max_depth: spec.max_depth,
    };
    let interior = integrate(&angular, n * n, &breaks, &opts);
    if !interior.converged {
        return Err(Error::Quadrature {
            what: "Gram of φ_t(S̃) − φ_t(S), circle part".into(),
            change: interior.error,
            points: interior.evaluations,
        });
    }

    // tails on the line: H² inner product is ∫ f conj(g) dx / (π(1+x²))
    let norm = PI.sqrt();
    let g = |x: f64, out: &mut [C64]| {
        let xc = C64::new(x, 0.0);
        let z = (xc - C64::i()) / (xc + C64::i());
        let p = model.values(z);
        let w = 1.0 / (norm * (xc + C64::i()));
        for k in 0..n {
            out[k] = p.basis[k] * w;
        }
    };
    let products = |x: f64, out: &mut [C64], kind: u8| {
        let mut gv = vec![ZERO; n];
        g(x, &mut gv);
        for j in 0..n {
            let gj = gv[j].conj();
            for k in 0..n {
                let p = gv[k] * gj;
                out[j * n + k] = match kind {
                    0 => p * (alpha[k] * alpha[j].conj() + 1.0),
                    1 => p * alpha[k],
                    _ => p * alpha[j].conj(),
                };
            }
        }
    };
    let plain = |x: f64, out: &mut [C64]| products(x, out, 0);
    let with_minus = |x: f64, out: &mut [C64]| products(x, out, 1);
    let with_plus = |x: f64, out: &mut [C64]| products(x, out, 2);
    let mut gram = interior.value;
    let mut error = interior.error;
    let mut evaluations = interior.evaluations;
    for side in [Side::Left, Side::Right] {
        let p = plain_tail(&plain, n * n, x0, side, 0.1 * opts.abs_tol);
        if !p.converged {
            return Err(Error::Quadrature {
                what: "Gram of φ_t(S̃) − φ_t(S), tail".into(),
                change: p.error,
                points: p.evaluations,
            });
        }
        let minus = oscillatory_tail(&with_minus, n * n, x0, -t, side);
        let plus = oscillatory_tail(&with_plus, n * n, x0, t, side);
        for i in 0..n * n {
            gram[i] += p.value[i] - minus[i] - plus[i];
        }
        error += p.error;
        evaluations += p.evaluations + 6;
    }
    let gram = CMatrix::from_fn(n, n, |j, k| gram[j * n + k]);
    GramResult::build(gram, SpectrumMethod::QuadratureGram, error, evaluations)
}

/// [`gram_x_model`] for a single measure.
pub fn gram_x(mu: &CircleMeasure, t: f64, spec: &QuadratureSpec) -> Result<GramResult> {
    gram_x_model(&PerturbedShiftModel::single(mu.clone())?, t, spec)
}

/// Gram of the embedding `E_{ν,t/2}` of the Paley–Wiener space, whose kernel
/// at the atoms is `sin(t(ζ_j−ζ_k)/2)/(π(ζ_j−ζ_k))`.
pub fn gram_embedding(nu: &LineMeasure, t: f64) -> CMatrix {
    let z = nu.points();
    let m = nu.masses();
    let n = z.len();
    CMatrix::from_fn(n, n, |j, k| {
        let d = z[j] - z[k];
        C64::new((m[j] * m[k]).sqrt() * t * sinc(0.5 * t * d) / (2.0 * PI), 0.0)
    })
}

/// Singular spectrum of `E_{ν,t/2}`; its nonzero part coincides with that of
/// `K`, which is asserted here.
pub fn embedding_spectrum(nu: &LineMeasure, t: f64, spec: &QuadratureSpec) -> Result<SingularSpectrum> {
    let k = gram_k(nu, t, KernelRoute::Auto, spec)?;
    if t == 0.0 || nu.is_empty() {
        return Ok(k.spectrum);
    }
    let e = SingularSpectrum::from_gram(&gram_embedding(nu, t), k.spectrum.method, k.spectrum.error_estimate)?;
    let tol = match k.spectrum.method {
        SpectrumMethod::ClosedFormGram => 1e-10,
        _ => 1e-6,
    };
    let d = e.relative_distance(&k.spectrum);
    if d > tol {
        return Err(Error::Tolerance {
            what: "embedding versus K spectrum".into(),
            detail: format!("relative distance {d:.3e}"),
        });
    }
    Ok(e)
}

/// Everything [`bound_suite`] computed, plus the checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundSuite {
    pub t: f64,
    pub checks: Vec<BoundCheck>,
    pub reports: Vec<SchattenReport>,
    /// Spectrum of `φ_t(S̃) − φ_t(S)`.
    pub semigroup_difference: SingularSpectrum,
    /// Spectra of `K` and `Y`, per block.
    pub kernels: Vec<SingularSpectrum>,
    pub transplants: Vec<SingularSpectrum>,
}

impl BoundSuite {
    pub fn failures(&self) -> Vec<&BoundCheck> {
        self.checks.iter().filter(|c| c.failed()).collect()
    }
}

/// Default exponent `q` in the moment shape of the trace-class fit.
pub const DEFAULT_MOMENT_EXPONENT: f64 = 4.0;

/// Evaluates, at one `t`:
/// - `‖S̃−S‖ < 2√μ(𝕋)` and `‖S̃−S‖_{S₁} < 2Σ_n √μ_n(𝕋)`;
/// - `‖φ_t(S̃)−φ_t(S)‖_{S₂} ≤ 2√(2t)(∫ dμ/|1−ξ|²)^{1/2}` (single block);
/// - `‖Y‖_{S_p} ≤ 2‖K‖_{S_p}` per block and `p`;
///
/// and reports fitted constants for `‖φ_t(S̃)−φ_t(S)‖_{S₁}` against
/// `√t Σ_n (∫ dμ_n/|1−ξ|^q)^{1/2}` and for `‖E‖^p_{S_p}` against
/// `t^{p/2} Σ ν(Δ_n)^{p/2}`.
pub fn bound_suite(
    model: &PerturbedShiftModel,
    t: f64,
    p_list: &[SchattenIndex],
    q: f64,
    spec: &QuadratureSpec,
) -> Result<BoundSuite> {
    let mut checks = Vec::new();
    let mut reports = Vec::new();
    let diff = model_ops::stilde_minus_s_norms(model)?;
    checks.push(BoundCheck::explicit(
        "stilde-minus-s-operator-norm",
        Some(SchattenIndex::Infinity),
        None,
        diff.operator_norm,
        diff.operator_bound,
        true,
    ));
    checks.push(BoundCheck::explicit(
        "stilde-minus-s-trace-norm",
        Some(SchattenIndex::Finite(1.0)),
        None,
        diff.trace_norm,
        diff.trace_bound,
        true,
    ));

    let x = gram_x_model(model, t, spec)?;
    for &p in p_list {
        reports.push(SchattenReport::new("semigroup-difference", x.spectrum.clone(), p));
    }
    let s2 = x.spectrum.norm(SchattenIndex::Finite(2.0));
    if model.block_count() == 1 {
        let moment = model.blocks()[0].measure().moment_integral(2.0)?;
        checks.push(BoundCheck::explicit(
            "semigroup-difference-hilbert-schmidt",
            Some(SchattenIndex::Finite(2.0)),
            Some(t),
            s2,
            2.0 * (2.0 * t).sqrt() * moment.sqrt(),
            false,
        ));
    }
    let moment_shape: f64 = model
        .blocks()
        .iter()
        .map(|b| b.measure().moment_integral(q).map(f64::sqrt))
        .sum::<Result<f64>>()?;
    checks.push(BoundCheck::fitted(
        "semigroup-difference-trace-norm",
        Some(SchattenIndex::Finite(1.0)),
        Some(t),
        x.spectrum.norm(SchattenIndex::Finite(1.0)),
        t.sqrt() * moment_shape,
    ));

    let mut kernels = Vec::new();
    let mut transplants = Vec::new();
    for (b, block) in model.blocks().iter().enumerate() {
        let k = gram_k(block.line(), t, KernelRoute::Auto, spec)?;
        let y = gram_y(block.measure(), t, spec)?;
        for &p in p_list {
            let label = format!("block-{b}");
            checks.push(BoundCheck::explicit(
                &format!("{label}-transplant-versus-kernel"),
                Some(p),
                Some(t),
                y.spectrum.norm(p),
                2.0 * k.spectrum.norm(p),
                false,
            ));
            reports.push(SchattenReport::new(&format!("{label}-kernel"), k.spectrum.clone(), p));
            reports.push(SchattenReport::new(&format!("{label}-transplant"), y.spectrum.clone(), p));
            if let SchattenIndex::Finite(pv) = p {
                let parfenov = block.line().parfenov_sum(pv)?;
                checks.push(BoundCheck::fitted(
                    &format!("{label}-embedding-parfenov"),
                    Some(p),
                    Some(t),
                    k.spectrum.norm(p).powf(pv),
                    t.powf(0.5 * pv) * parfenov,
                ));
            }
        }
        kernels.push(k.spectrum);
        transplants.push(y.spectrum);
    }
    Ok(BoundSuite {
        t,
        checks,
        reports,
        semigroup_difference: x.spectrum,
        kernels,
        transplants,
    })
}

/// One step of a finite-section sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectionStep {
    pub degree: usize,
    pub values: Vec<f64>,
    /// `max_i |s_i(M) − s_i(reference)|` over the leading values.
    pub gap: f64,
    /// Count of singular values above `1e−8`.
    pub rank: usize,
    pub tail_mass: f64,
}

/// Singular values of `M×M` sections of `φ_t(S̃) − φ_t(S)` along a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiniteSectionReport {
    pub t: f64,
    pub reference: Vec<f64>,
    pub steps: Vec<SectionStep>,
    /// Gaps decrease strictly along the sweep.
    pub monotone: bool,
    /// Leading values never decrease along the sweep.
    pub values_nondecreasing: bool,
    pub final_gap: f64,
    /// Gap after extrapolating the last two steps under an `M^{−1/2}` law.
    pub extrapolated_gap: Option<f64>,
}

impl FiniteSectionReport {
    pub fn spectra(&self) -> Vec<SingularSpectrum> {
        self.steps
            .iter()
            .map(|s| SingularSpectrum::new(s.values.clone(), SpectrumMethod::FiniteSection, s.tail_mass.sqrt()))
            .collect()
    }
}

fn leading_gap(values: &[f64], reference: &[f64]) -> f64 {
    reference
        .iter()
        .enumerate()
        .map(|(i, r)| (values.get(i).copied().unwrap_or(0.0) - r).abs())
        .fold(0.0, f64::max)
}

/// Sweeps the finite sections of `φ_t(S̃) − φ_t(S)` and compares their
/// leading singular values with `reference` (a Gram spectrum).
pub fn finite_section_oracle(
    model: &PerturbedShiftModel,
    t: f64,
    sweep: &[usize],
    reference: &SingularSpectrum,
) -> Result<FiniteSectionReport> {
    let rank = model.atom_count();
    let reference: Vec<f64> = reference.values.iter().copied().take(rank).collect();
    let mut steps = Vec::with_capacity(sweep.len());
    for &m in sweep {
        let a = matrix_truncation(model, OperatorSpec::PhiDifference { t }, m)?;
        let mut values = linalg::range_singular_values(&a.matrix, 1e-13);
        values.resize(values.len().max(rank), 0.0);
        let rank_above = values.iter().filter(|&&v| v > 1e-8).count();
        values.truncate(rank.max(1));
        steps.push(SectionStep {
            degree: m,
            gap: leading_gap(&values, &reference),
            values,
            rank: rank_above,
            tail_mass: a.tail_mass,
        });
    }
    let monotone = steps.windows(2).all(|w| w[1].gap < w[0].gap || w[1].gap == 0.0);
    let values_nondecreasing = steps.windows(2).all(|w| {
        w[0].values
            .iter()
            .zip(&w[1].values)
            .all(|(a, b)| *b >= *a - 1e-12)
    });
    let final_gap = steps.last().map(|s| s.gap).unwrap_or(f64::NAN);
    let extrapolated_gap = match steps.as_slice() {
        [.., a, b] if b.degree == 2 * a.degree => {
            let factor = 1.0 / (2f64.sqrt() - 1.0);
            let ext: Vec<f64> = b
                .values
                .iter()
                .zip(&a.values)
                .map(|(sb, sa)| sb + (sb - sa) * factor)
                .collect();
            Some(leading_gap(&ext, &reference))
        }
        _ => None,
    };
    Ok(FiniteSectionReport {
        t,
        reference,
        steps,
        monotone,
        values_nondecreasing,
        final_gap,
        extrapolated_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{random_circle_measure, RandomMeasureSpec};
    use proptest::prelude::*;
    use rand::Rng;

    fn line(atoms: &[(f64, f64)]) -> LineMeasure {
        LineMeasure::new(atoms.iter().copied()).unwrap()
    }

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    fn random_measure(seed: u64, atoms: usize) -> CircleMeasure {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = RandomMeasureSpec {
            atoms,
            min_separation: 0.6,
            ..Default::default()
        };
        random_circle_measure(&mut rng, &spec).unwrap()
    }

    #[test]
    fn closed_form_passes_its_gate() {
        let v = closed_form_validation();
        assert!(v.passed, "{v:?}");
        assert_eq!(v.cases, 20);
    }

    #[test]
    fn kernel_examples() {
        let nu = line(&[(0.0, PI)]);
        let k = gram_k(&nu, 1.0, KernelRoute::ClosedForm, &spec()).unwrap();
        assert!((k.trace - 0.5).abs() < 1e-15);
        let k = gram_k(&nu, 1.0, KernelRoute::Quadrature, &spec()).unwrap();
        assert!((k.trace - 0.5).abs() < 1e-9);

        let nu = line(&[(0.0, PI), (1.0, PI)]);
        let closed = gram_k(&nu, 1.0, KernelRoute::ClosedForm, &spec()).unwrap();
        let quad = gram_k(&nu, 1.0, KernelRoute::Quadrature, &spec()).unwrap();
        assert!((closed.trace - 1.0).abs() < 1e-15);
        let expected = PI * (C64::from_polar(1.0, -1.0) - 1.0).norm() / (2.0 * PI);
        assert!((closed.gram[(0, 1)].norm() - expected).abs() < 1e-15);
        assert!(linalg::max_abs(&(&closed.gram - &quad.gram)) < 1e-6);

        let single = line(&[(2.5, 0.7)]);
        let s = gram_k(&single, 1.3, KernelRoute::Auto, &spec()).unwrap().spectrum;
        assert!((s.values[0] - (1.3f64 * 0.7 / (2.0 * PI)).sqrt()).abs() < 1e-15);

        let small = gram_k(&nu, 1e-10, KernelRoute::Auto, &spec()).unwrap();
        assert!(small.spectrum.values[0] < 2e-5);
        let zero = gram_k(&nu, 0.0, KernelRoute::Auto, &spec()).unwrap();
        assert!(zero.spectrum.values.iter().all(|&v| v == 0.0));
        assert!(gram_k(&nu, -1.0, KernelRoute::Auto, &spec()).is_err());
    }

    #[test]
    fn kernel_trace_identity_on_random_measures() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let n = rng.gen_range(1..=8);
            let nu = LineMeasure::new((0..n).map(|_| (rng.gen_range(-10.0..10.0), rng.gen_range(0.01..5.0)))).unwrap();
            for t in [0.25, 0.5, 1.0, 2.0, 4.0] {
                let exact = t * nu.total_mass() / (2.0 * PI);
                let k = gram_k(&nu, t, KernelRoute::ClosedForm, &spec()).unwrap();
                assert!((k.trace - exact).abs() / exact < 1e-12);
                let s2 = k.spectrum.norm(SchattenIndex::Finite(2.0));
                assert!((s2 * s2 - exact).abs() / exact < 1e-10);
            }
        }
    }

    #[test]
    fn transplant_single_atom_fixture() {
        let mu = CircleMeasure::from_angles(&[(-1.0, 1.0)]).unwrap();
        let y = gram_y(&mu, 1.0, &spec()).unwrap();
        let expected = 2.0 * (1.0 - (-1.0f64).exp());
        assert!((y.trace - expected).abs() < 1e-9, "{} vs {expected}", y.trace);
        let k = gram_k(&mu.cayley().unwrap(), 1.0, KernelRoute::Auto, &spec()).unwrap();
        assert!(y.spectrum.values[0] <= 2.0 * k.spectrum.values[0]);
        assert!(gram_y(&mu, 0.0, &spec()).unwrap().trace == 0.0);

        let x = gram_x(&mu, 1.0, &spec()).unwrap();
        assert!((x.trace - expected).abs() < 1e-9, "{} vs {expected}", x.trace);
    }

    #[test]
    fn cross_oracle_on_random_measures() {
        for seed in 0..4u64 {
            let mu = random_measure(seed, 1 + seed as usize % 4);
            for t in [0.5, 1.0, 2.0] {
                let y = gram_y(&mu, t, &spec()).unwrap();
                let x = gram_x(&mu, t, &spec()).unwrap();
                assert!(x.spectrum.values.len() <= mu.len());
                let d = x.spectrum.relative_distance(&y.spectrum);
                assert!(d < 1e-4, "seed {seed} t {t}: {d:.3e}");
            }
        }
    }

    #[test]
    fn embedding_matches_kernel() {
        let nu = line(&[(-1.0, 0.5), (0.3, 2.0), (4.0, 1.0)]);
        let e = embedding_spectrum(&nu, 1.5, &spec()).unwrap();
        let k = gram_k(&nu, 1.5, KernelRoute::Auto, &spec()).unwrap();
        assert!(e.relative_distance(&k.spectrum) < 1e-12);
        let single = line(&[(0.0, 2.0)]);
        let e = embedding_spectrum(&single, 3.0, &spec()).unwrap();
        assert!((e.values[0] - (3.0 * 2.0 / (2.0 * PI)).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn norms_and_indices() {
        let s = [3.0, 4.0];
        assert_eq!(schatten_norm(&s, SchattenIndex::Infinity), 4.0);
        assert!((schatten_norm(&s, SchattenIndex::Finite(2.0)) - 5.0).abs() < 1e-15);
        assert_eq!(schatten_norm(&s, SchattenIndex::Finite(1.0)), 7.0);
        let p: SchattenIndex = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(p, SchattenIndex::Infinity);
        let p: SchattenIndex = serde_json::from_str("1.5").unwrap();
        assert_eq!(p, SchattenIndex::Finite(1.5));
        assert!(serde_json::from_str::<SchattenIndex>("-1").is_err());
        assert_eq!(serde_json::to_string(&SchattenIndex::Infinity).unwrap(), "\"inf\"");
        let r = SchattenReport::new("x", SingularSpectrum::new(vec![1.0, 2.0], SpectrumMethod::FiniteSection, 0.0), SchattenIndex::Finite(3.0));
        assert!(r.consistent());
        assert_eq!(r.spectrum.values, vec![2.0, 1.0]);
    }

    #[test]
    fn rejects_indefinite_gram() {
        let g = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(-0.1, 0.0)]));
        assert!(SingularSpectrum::from_gram(&g, SpectrumMethod::QuadratureGram, 0.0).is_err());
    }

    #[test]
    fn bound_suite_single_atom() {
        let model = PerturbedShiftModel::single(CircleMeasure::from_angles(&[(-1.0, 1.0)]).unwrap()).unwrap();
        let p = [
            SchattenIndex::Finite(1.0),
            SchattenIndex::Finite(1.5),
            SchattenIndex::Finite(2.0),
            SchattenIndex::Infinity,
        ];
        let suite = bound_suite(&model, 1.0, &p, 4.0, &spec()).unwrap();
        assert!(suite.failures().is_empty(), "{:?}", suite.failures());
        let hs = suite
            .checks
            .iter()
            .find(|c| c.id == "semigroup-difference-hilbert-schmidt")
            .unwrap();
        assert!((hs.bound.unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(suite.reports.iter().all(|r| r.consistent()));
    }

    #[test]
    fn finite_sections_approach_gram() {
        let mu = CircleMeasure::from_angles(&[(-1.0, 1.0)]).unwrap();
        let model = PerturbedShiftModel::single(mu.clone()).unwrap();
        let y = gram_y(&mu, 1.0, &spec()).unwrap();
        let r = finite_section_oracle(&model, 1.0, &[16, 32, 64, 128], &y.spectrum).unwrap();
        assert!(r.monotone && r.values_nondecreasing, "{r:?}");
        assert!(r.steps.iter().all(|s| s.rank == 1));
        assert!(r.extrapolated_gap.unwrap() < r.final_gap);

        // the low-rank solver agrees with a full SVD
        let a = matrix_truncation(&model, OperatorSpec::PhiDifference { t: 1.0 }, 48).unwrap();
        let full = linalg::dense_singular_values(&a.matrix);
        assert!((full[0] - linalg::range_singular_values(&a.matrix, 1e-13)[0]).abs() < 1e-12);

        let zero = finite_section_oracle(&model, 0.0, &[16, 32], &SingularSpectrum::zero(1, SpectrumMethod::QuadratureGram)).unwrap();
        assert!(zero.steps.iter().all(|s| s.values.iter().all(|&v| v == 0.0)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn schatten_norms_decrease_in_p(
            values in prop::collection::vec(0.0f64..10.0, 1..12),
            p in 0.5f64..4.0,
            dq in 0.0f64..4.0,
        ) {
            let a = schatten_norm(&values, SchattenIndex::Finite(p));
            let b = schatten_norm(&values, SchattenIndex::Finite(p + dq));
            let c = schatten_norm(&values, SchattenIndex::Infinity);
            prop_assert!(b <= a * (1.0 + 1e-12));
            prop_assert!(c <= b * (1.0 + 1e-12));
        }

        #[test]
        fn kernel_gram_is_positive(
            atoms in prop::collection::vec((-20.0f64..20.0, 0.001f64..10.0), 1..8),
            t in 0.01f64..8.0,
        ) {
            let nu = LineMeasure::new(atoms).unwrap();
            let k = gram_k(&nu, t, KernelRoute::ClosedForm, &QuadratureSpec::default()).unwrap();
            let ev = linalg::hermitian_eigenvalues(&k.gram);
            prop_assert!(ev[0] >= -PSD_SLACK * k.trace);
        }
    }
}
