//! Quadrature rules: vector-valued adaptive Gauss–Kronrod on intervals,
//! trapezoid sums on the unit circle with grid doubling, and tails of
//! oscillatory integrals over the real line.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sum::VecSum;
use crate::C64;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Outcome of a vector-valued integration.
#[derive(Debug, Clone)]
pub struct Integral {
    pub value: Vec<C64>,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// One G7–K15 step on `[a, b]`; returns the Kronrod value, the max
/// component difference to the embedded Gauss value, and the largest
/// component of `∫|f|` (the round-off scale of the panel).
fn gk15<F>(f: &F, dim: usize, a: f64, b: f64, buf: &mut [C64]) -> (Vec<C64>, f64, f64)
where
    F: Fn(f64, &mut [C64]) + ?Sized,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kronrod = vec![C64::new(0.0, 0.0); dim];
    let mut gauss = vec![C64::new(0.0, 0.0); dim];
    let mut magnitude = vec![0.0f64; dim];

    f(center, buf);
    for i in 0..dim {
        kronrod[i] += buf[i] * WGK[7];
        gauss[i] += buf[i] * WG[3];
        magnitude[i] += buf[i].norm() * WGK[7];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        for x in [center - dx, center + dx] {
            f(x, buf);
            for i in 0..dim {
                kronrod[i] += buf[i] * WGK[j];
                magnitude[i] += buf[i].norm() * WGK[j];
                if j % 2 == 1 {
                    gauss[i] += buf[i] * WG[j / 2];
                }
            }
        }
    }
    let mut err = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..dim {
        kronrod[i] *= half;
        gauss[i] *= half;
        err = err.max((kronrod[i] - gauss[i]).norm());
        scale = scale.max(magnitude[i] * half.abs());
    }
    (kronrod, err, scale)
}

/// Controls for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    /// Absolute tolerance on the max-norm of the vector result.
    pub abs_tol: f64,
    /// Upper bound on the width of any panel (resolves oscillation).
    pub max_width: f64,
    /// Maximum bisection depth below an initial panel.
    pub max_depth: u32,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            max_width: f64::INFINITY,
            max_depth: 40,
        }
    }
}

const ROUNDOFF_FACTOR: f64 = 50.0;

struct PanelResult {
    value: Vec<C64>,
    error: f64,
    evaluations: usize,
    converged: bool,
}

fn refine<F>(f: &F, dim: usize, a: f64, b: f64, tol: f64, depth: u32, max_depth: u32) -> PanelResult
where
    F: Fn(f64, &mut [C64]) + ?Sized,
{
    let mut buf = vec![C64::new(0.0, 0.0); dim];
    let (value, error, scale) = gk15(f, dim, a, b, &mut buf);
    // below this the Gauss–Kronrod difference is round-off, not truncation
    let floor = ROUNDOFF_FACTOR * f64::EPSILON * scale;
    if error <= tol.max(floor) || depth >= max_depth || (b - a).abs() < 1e-15 * (a.abs() + b.abs()).max(1e-300) {
        return PanelResult {
            value,
            error,
            evaluations: 15,
            converged: error <= tol.max(floor),
        };
    }
    let mid = 0.5 * (a + b);
    let left = refine(f, dim, a, mid, 0.5 * tol, depth + 1, max_depth);
    let right = refine(f, dim, mid, b, 0.5 * tol, depth + 1, max_depth);
    let mut acc = VecSum::new(dim);
    acc.add_slice(&left.value);
    acc.add_slice(&right.value);
    PanelResult {
        value: acc.values(),
        error: left.error + right.error,
        evaluations: 15 + left.evaluations + right.evaluations,
        converged: left.converged && right.converged,
    }
}

/// Integrates a vector-valued function over `[breakpoints[0], breakpoints.last()]`.
///
/// Initial panels are the breakpoint intervals split to respect
/// `max_width`; each panel is refined by bisection with a tolerance share
/// proportional to its length. Panels are evaluated in parallel and summed
/// in left-to-right order.
pub fn integrate<F>(f: &F, dim: usize, breakpoints: &[f64], opts: &AdaptiveOptions) -> Integral
where
    F: Fn(f64, &mut [C64]) + Sync + ?Sized,
{
    let mut panels = Vec::new();
    for w in breakpoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b > a) {
            continue;
        }
        let pieces = if opts.max_width.is_finite() {
            ((b - a) / opts.max_width).ceil().max(1.0) as usize
        } else {
            1
        };
        let h = (b - a) / pieces as f64;
        for k in 0..pieces {
            let lo = a + h * k as f64;
            let hi = if k + 1 == pieces { b } else { a + h * (k + 1) as f64 };
            panels.push((lo, hi));
        }
    }
    let total: f64 = panels.iter().map(|(a, b)| b - a).sum();
    let results: Vec<PanelResult> = panels
        .par_iter()
        .map(|&(a, b)| {
            let share = if total > 0.0 { opts.abs_tol * (b - a) / total } else { opts.abs_tol };
            refine(f, dim, a, b, share, 0, opts.max_depth)
        })
        .collect();

    let mut acc = VecSum::new(dim);
    let mut error = 0.0;
    let mut evaluations = 0;
    let mut converged = true;
    for r in &results {
        acc.add_slice(&r.value);
        error += r.error;
        evaluations += r.evaluations;
        converged &= r.converged;
    }
    Integral {
        value: acc.values(),
        error,
        evaluations,
        converged: converged || error <= opts.abs_tol,
    }
}

/// Trapezoid rule on the unit circle, i.e. the mean `∫ f dm` against
/// normalized arc length, with grid doubling until successive values agree.
#[derive(Debug, Clone, Copy)]
pub struct CircleRule {
    pub min_points: usize,
    pub max_points: usize,
    pub tol: f64,
}

impl Default for CircleRule {
    fn default() -> Self {
        Self {
            min_points: 256,
            max_points: 1 << 20,
            tol: 1e-10,
        }
    }
}

/// Result of a circle mean.
#[derive(Debug, Clone)]
pub struct CircleMean {
    pub value: Vec<C64>,
    pub points: usize,
    pub change: f64,
}

const CHUNK: usize = 4096;

/// Nodes `exp(iπ(2j+1)/M)`: offset by half a step so that `±1`, `±i` are
/// never nodes.
#[inline]
pub fn circle_node(j: usize, m: usize) -> C64 {
    let angle = std::f64::consts::PI * (2 * j + 1) as f64 / m as f64;
    C64::new(angle.cos(), angle.sin())
}

fn circle_sum<F>(f: &F, dim: usize, m: usize) -> Vec<C64>
where
    F: Fn(C64, &mut [C64]) + Sync + ?Sized,
{
    let chunks = m.div_ceil(CHUNK);
    let partial: Vec<Vec<C64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = VecSum::new(dim);
            let mut buf = vec![C64::new(0.0, 0.0); dim];
            for j in c * CHUNK..((c + 1) * CHUNK).min(m) {
                f(circle_node(j, m), &mut buf);
                acc.add_slice(&buf);
            }
            acc.values()
        })
        .collect();
    let mut acc = VecSum::new(dim);
    for p in &partial {
        acc.add_slice(p);
    }
    acc.values().into_iter().map(|v| v / m as f64).collect()
}

impl CircleRule {
    /// Mean of `f` over the circle, componentwise.
    pub fn mean<F>(&self, dim: usize, f: &F) -> Result<CircleMean>
    where
        F: Fn(C64, &mut [C64]) + Sync + ?Sized,
    {
        let mut m = self.min_points.next_power_of_two().max(8);
        let mut prev = circle_sum(f, dim, m);
        let mut last_change = f64::INFINITY;
        loop {
            let next_m = 2 * m;
            if next_m > self.max_points {
                return Err(Error::Quadrature {
                    what: "circle mean".into(),
                    change: last_change,
                    points: m,
                });
            }
            let next = circle_sum(f, dim, next_m);
            let scale = next.iter().map(|v| v.norm()).fold(1.0f64, f64::max);
            let change = prev
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0f64, f64::max);
            if change <= self.tol * scale {
                return Ok(CircleMean {
                    value: next,
                    points: next_m,
                    change,
                });
            }
            last_change = change;
            prev = next;
            m = next_m;
        }
    }
}

/// Largest grid [`CircleRule::resolving`] will allow.
const MAX_RESOLVING_POINTS: usize = 1 << 24;

impl CircleRule {
    /// The same rule with its grid cap raised so that features of angular
    /// width `width` can be resolved; the trapezoid error decays like
    /// `exp(−M·width/2)` for poles at distance `width` from the circle.
    pub fn resolving(&self, width: f64) -> CircleRule {
        let needed = if width > 0.0 {
            (256.0 / width).min(MAX_RESOLVING_POINTS as f64) as usize
        } else {
            MAX_RESOLVING_POINTS
        };
        CircleRule {
            max_points: self.max_points.max(needed.next_power_of_two()).min(MAX_RESOLVING_POINTS),
            ..*self
        }
    }
}

/// Which half-line a tail integral covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `[x0, ∞)`
    Right,
    /// `(−∞, −x0]`
    Left,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Right => 1.0,
            Side::Left => -1.0,
        }
    }
}

/// `∫ g` over the tail beyond `x0` for a smooth `g = O(x^{-2})`, computed on
/// `s = 1/|x| ∈ (0, 1/x0]` where the integrand `g(±1/s)/s²` is regular.
pub fn plain_tail<F>(g: &F, dim: usize, x0: f64, side: Side, abs_tol: f64) -> Integral
where
    F: Fn(f64, &mut [C64]) + Sync + ?Sized,
{
    let sign = side.sign();
    let mapped = |s: f64, out: &mut [C64]| {
        g(sign / s, out);
        let jac = 1.0 / (s * s);
        for v in out.iter_mut() {
            *v *= jac;
        }
    };
    let opts = AdaptiveOptions {
        abs_tol,
        max_width: 0.125 / x0,
        max_depth: 30,
    };
    integrate(&mapped, dim, &[0.0, 1.0 / x0], &opts)
}

/// `∫ g(x) e^{iωx} dx` over the tail beyond `x0` by the asymptotic
/// expansion obtained from repeated integration by parts, truncated after the
/// second-derivative term. Derivatives of `g` are taken by central
/// differences with step `1e-3·x0`.
///
/// The truncation error is of order `|g'''(x0)|/ω⁴`.
pub fn oscillatory_tail<F>(g: &F, dim: usize, x0: f64, omega: f64, side: Side) -> Vec<C64>
where
    F: Fn(f64, &mut [C64]) + ?Sized,
{
    let x = side.sign() * x0;
    let h = 1e-3 * x0;
    let mut g0 = vec![C64::new(0.0, 0.0); dim];
    let mut gp = vec![C64::new(0.0, 0.0); dim];
    let mut gm = vec![C64::new(0.0, 0.0); dim];
    g(x, &mut g0);
    g(x + h, &mut gp);
    g(x - h, &mut gm);
    let iw = C64::new(0.0, omega);
    let phase = C64::from_polar(1.0, omega * x);
    let prefactor = match side {
        Side::Right => -phase,
        Side::Left => phase,
    };
    (0..dim)
        .map(|i| {
            let d1 = (gp[i] - gm[i]) / (2.0 * h);
            let d2 = (gp[i] - 2.0 * g0[i] + gm[i]) / (h * h);
            prefactor * (g0[i] / iw - d1 / (iw * iw) + d2 / (iw * iw * iw))
        })
        .collect()
}

/// Start of the tail region for integrands with poles or atoms inside
/// `|x| ≤ support` and oscillation frequency `omega`, such that the truncated
/// asymptotic expansion is accurate to roughly `rel_tol`.
pub fn tail_start(support: f64, omega: f64, rel_tol: f64) -> f64 {
    let asymptotic = if omega > 0.0 {
        (24.0 / (rel_tol * omega.powi(4))).powf(0.2)
    } else {
        0.0
    };
    (4.0 * support + 10.0).max(asymptotic)
}
