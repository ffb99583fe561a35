//! The perturbed shift `S̃ = S + Σ_n ⟨·, θ̂_n g_n⟩ θ̂_n (1 − θ_n)` built from a
//! list of atomic measures, its Clark basis, and finite sections in the
//! monomial basis.

use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::analytic::{InnerFunctionModel, SemigroupSymbol};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::measures::{cayley_point, CircleMeasure};
use crate::quadrature::{circle_node, integrate, AdaptiveOptions, CircleRule};
use crate::sum::{CompensatedSum, ComplexSum};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Default cap on the number of blocks.
pub const DEFAULT_MAX_BLOCKS: usize = 32;

/// Appended analytic factors carrying more coefficient mass than this beyond
/// the working degree raise the truncation flag.
pub const TAIL_WARNING: f64 = 1e-10;

/// `S̃` for a finite list of blocks, in input order.
#[derive(Debug, Clone)]
pub struct PerturbedShiftModel {
    blocks: Vec<InnerFunctionModel>,
    /// `(block, atom)` for every Clark basis vector, blocks first.
    index: Vec<(usize, usize)>,
}

/// Values of every analytic ingredient of the model at one point.
#[derive(Debug, Clone)]
pub struct PointValues {
    /// `θ̂_n b^{(n)}_k`, in the order of [`PerturbedShiftModel::eigenvalues`].
    pub basis: Vec<C64>,
    /// `θ̂_n (1 − θ_n)`.
    pub u: Vec<C64>,
    /// `θ̂_n g_n`.
    pub v: Vec<C64>,
    /// `Π θ_n`.
    pub theta: C64,
}

impl PerturbedShiftModel {
    pub fn new(measures: Vec<CircleMeasure>) -> Result<Self> {
        Self::with_max_blocks(measures, DEFAULT_MAX_BLOCKS)
    }

    pub fn with_max_blocks(measures: Vec<CircleMeasure>, max_blocks: usize) -> Result<Self> {
        if measures.len() > max_blocks {
            return Err(Error::param(format!(
                "{} blocks exceed the configured maximum {max_blocks}",
                measures.len()
            )));
        }
        let mut blocks = Vec::with_capacity(measures.len());
        let mut index = Vec::new();
        for (n, m) in measures.into_iter().enumerate() {
            if m.is_empty() {
                return Err(Error::InvalidMeasure(format!("block {n} has no atoms")));
            }
            index.extend((0..m.len()).map(|k| (n, k)));
            blocks.push(InnerFunctionModel::new(m)?);
        }
        Ok(Self { blocks, index })
    }

    /// Single-block model.
    pub fn single(measure: CircleMeasure) -> Result<Self> {
        Self::new(vec![measure])
    }

    pub fn blocks(&self) -> &[InnerFunctionModel] {
        &self.blocks
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Dimension of `K_θ`, i.e. the total number of atoms.
    pub fn atom_count(&self) -> usize {
        self.index.len()
    }

    /// `(block, atom)` labels of the Clark basis.
    pub fn basis_labels(&self) -> &[(usize, usize)] {
        &self.index
    }

    /// Atoms of all blocks, in basis order; the eigenvalues of the unitary part.
    pub fn eigenvalues(&self) -> Vec<C64> {
        self.blocks.iter().flat_map(|b| b.measure().points()).collect()
    }

    pub fn measures(&self) -> Vec<CircleMeasure> {
        self.blocks.iter().map(|b| b.measure().clone()).collect()
    }

    /// Evaluates the basis, the rank-one factors and θ at `z` into `out`.
    pub fn fill(&self, z: C64, out: &mut PointValues) {
        let mut hat = ONE;
        let mut pos = 0;
        for (n, block) in self.blocks.iter().enumerate() {
            let d = block.degree();
            let b = &mut out.basis[pos..pos + d];
            block.clark_vectors(z, b);
            let mut g = ComplexSum::new();
            for (bk, atom) in b.iter().zip(block.measure().atoms()) {
                g.add(atom.point.conj() * atom.weight.sqrt() * bk);
            }
            let theta_n = block.theta_value(z);
            out.u[n] = hat * (ONE - theta_n);
            out.v[n] = hat * g.value();
            for bk in b.iter_mut() {
                *bk *= hat;
            }
            hat *= theta_n;
            pos += d;
        }
        out.theta = hat;
    }

    pub fn values(&self, z: C64) -> PointValues {
        let mut out = PointValues {
            basis: vec![ZERO; self.atom_count()],
            u: vec![ZERO; self.block_count()],
            v: vec![ZERO; self.block_count()],
            theta: ONE,
        };
        self.fill(z, &mut out);
        out
    }

    /// Monomial coefficients of the basis vectors and the rank-one factors,
    /// each expanded to `degree` terms.
    pub fn expansions(&self, degree: usize) -> Result<ModelExpansion> {
        let n = self.atom_count();
        let b = self.block_count();
        let f = |z: C64, out: &mut [C64]| {
            let p = self.values(z);
            out[..n].copy_from_slice(&p.basis);
            out[n..n + b].copy_from_slice(&p.u);
            out[n + b..n + 2 * b].copy_from_slice(&p.v);
            out[n + 2 * b] = p.theta;
        };
        let t = taylor_coefficients(n + 2 * b + 1, &f, degree, 1e-13)?;
        let mut coeffs = t.coefficients.into_iter();
        let basis: Vec<_> = coeffs.by_ref().take(n).collect();
        let u: Vec<_> = coeffs.by_ref().take(b).collect();
        let v: Vec<_> = coeffs.by_ref().take(b).collect();
        let theta = coeffs.next().expect("θ component");
        Ok(ModelExpansion {
            degree,
            basis_tail: t.tail_mass[..n].to_vec(),
            u_tail: t.tail_mass[n..n + b].to_vec(),
            v_tail: t.tail_mass[n + b..n + 2 * b].to_vec(),
            basis,
            u,
            v,
            theta,
            samples: t.samples,
        })
    }
}

/// Taylor coefficients of the model's analytic factors at a fixed degree.
#[derive(Debug, Clone)]
pub struct ModelExpansion {
    pub degree: usize,
    pub basis: Vec<Vec<C64>>,
    pub u: Vec<Vec<C64>>,
    pub v: Vec<Vec<C64>>,
    pub theta: Vec<C64>,
    /// Squared coefficient mass beyond `degree`, per function.
    pub basis_tail: Vec<f64>,
    pub u_tail: Vec<f64>,
    pub v_tail: Vec<f64>,
    pub samples: usize,
}

/// Output of [`taylor_coefficients`].
#[derive(Debug, Clone)]
pub struct TaylorExpansion {
    /// `coefficients[i][k]` is the `k`-th coefficient of component `i`.
    pub coefficients: Vec<Vec<C64>>,
    /// `Σ_{k ≥ degree} |a_k|²` per component, as resolved by the final grid.
    pub tail_mass: Vec<f64>,
    pub samples: usize,
}

const MAX_TAYLOR_SAMPLES: usize = 1 << 22;

fn sampled_coefficients<F>(dim: usize, f: &F, l: usize) -> Vec<Vec<C64>>
where
    F: Fn(C64, &mut [C64]) + Sync + ?Sized,
{
    let rows: Vec<Vec<C64>> = (0..l)
        .into_par_iter()
        .map(|j| {
            let mut buf = vec![ZERO; dim];
            f(circle_node(j, l), &mut buf);
            buf
        })
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(l);
    (0..dim)
        .into_par_iter()
        .map(|i| {
            let mut data: Vec<C64> = rows.iter().map(|r| r[i]).collect();
            fft.process(&mut data);
            // nodes are offset by half a step: undo the phase e^{iπk/L}
            data.iter()
                .enumerate()
                .map(|(k, a)| a * C64::from_polar(1.0 / l as f64, -PI * k as f64 / l as f64))
                .collect()
        })
        .collect()
}

/// Taylor coefficients `a_0..a_{degree−1}` of functions analytic on a
/// neighbourhood of the closed disk, from samples on the unit circle.
///
/// The grid starts at `4·degree` points and doubles until the retained
/// coefficients change by less than `tol` (relative to the largest one).
pub fn taylor_coefficients<F>(dim: usize, f: &F, degree: usize, tol: f64) -> Result<TaylorExpansion>
where
    F: Fn(C64, &mut [C64]) + Sync + ?Sized,
{
    let mut l = (4 * degree).next_power_of_two().max(64);
    let mut prev = sampled_coefficients(dim, f, l);
    loop {
        let next_l = 2 * l;
        if next_l > MAX_TAYLOR_SAMPLES {
            return Err(Error::Quadrature {
                what: "Taylor coefficients".into(),
                change: f64::NAN,
                points: l,
            });
        }
        let next = sampled_coefficients(dim, f, next_l);
        let scale = next
            .iter()
            .flat_map(|c| c.iter().take(degree))
            .map(|a| a.norm())
            .fold(1e-300f64, f64::max);
        // compare all coefficients the coarse grid resolves (the upper half
        // of the spectrum holds negative frequencies)
        let window = degree.max(l / 4);
        let change = prev
            .iter()
            .zip(&next)
            .flat_map(|(a, b)| a[..window].iter().zip(&b[..window]))
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        if change <= tol * scale.max(1.0) {
            let half = next_l / 2;
            let tail_mass = next
                .iter()
                .map(|c| c[degree.min(half)..half].iter().map(|a| a.norm_sqr()).collect::<CompensatedSum>().value())
                .collect();
            let coefficients = next.into_iter().map(|mut c| {
                c.truncate(degree);
                c
            });
            return Ok(TaylorExpansion {
                coefficients: coefficients.collect(),
                tail_mass,
                samples: next_l,
            });
        }
        prev = next;
        l = next_l;
    }
}

/// Taylor coefficients of `φ_t(z) = exp(t(z+1)/(z−1))`, equal to
/// `e^{−t} L_k^{(−1)}(2t)` (generalized Laguerre polynomials).
pub fn phi_t_coefficients(t: f64, degree: usize) -> Result<Vec<f64>> {
    SemigroupSymbol::new(t)?;
    let mut out = Vec::with_capacity(degree);
    if degree == 0 {
        return Ok(out);
    }
    let x = 2.0 * t;
    let scale = (-t).exp();
    // (k+1) L_{k+1} = (2k + α + 1 − x) L_k − (k + α) L_{k−1}, α = −1
    let (mut prev, mut cur) = (1.0, -x);
    out.push(scale * prev);
    for k in 1..degree {
        out.push(scale * cur);
        let kf = k as f64;
        let next = ((2.0 * kf - x) * cur - (kf - 1.0) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    Ok(out)
}

/// Lower-triangular Toeplitz product `a * f` truncated to `len` terms.
fn convolve(a: &[f64], f: &[C64], len: usize) -> Vec<C64> {
    (0..len)
        .map(|k| {
            (0..=k.min(f.len().saturating_sub(1)))
                .filter(|&j| k - j < a.len())
                .map(|j| f[j] * a[k - j])
                .collect::<ComplexSum>()
                .value()
        })
        .collect()
}

fn dot(f: &[C64], g: &[C64]) -> C64 {
    f.iter().zip(g).map(|(a, b)| a * b.conj()).collect::<ComplexSum>().value()
}

/// `S̃f` with its truncation diagnostics.
#[derive(Debug, Clone)]
pub struct StildeImage {
    pub coefficients: Vec<C64>,
    /// Coefficient mass of the appended factors lost beyond the output degree.
    pub tail_mass: f64,
    pub truncated: bool,
}

/// `S̃f = zf + Σ_n ⟨f, θ̂_n g_n⟩ θ̂_n(1−θ_n)` for a coefficient vector `f`;
/// the result has `f.len() + 1` coefficients.
pub fn apply_stilde(model: &PerturbedShiftModel, f: &[C64]) -> Result<StildeImage> {
    let degree = f.len() + 1;
    let mut out = vec![ZERO; degree];
    out[1..].copy_from_slice(f);
    if f.iter().all(|a| *a == ZERO) || model.block_count() == 0 {
        return Ok(StildeImage {
            coefficients: out,
            tail_mass: 0.0,
            truncated: false,
        });
    }
    let ex = model.expansions(degree)?;
    let mut tail = CompensatedSum::new();
    for n in 0..model.block_count() {
        let c = dot(f, &ex.v[n]);
        for (o, a) in out.iter_mut().zip(&ex.u[n]) {
            *o += c * a;
        }
        tail.add(c.norm_sqr() * ex.u_tail[n]);
    }
    let tail_mass = tail.value();
    Ok(StildeImage {
        coefficients: out,
        tail_mass,
        truncated: tail_mass > TAIL_WARNING,
    })
}

/// Which operator [`apply_phi_t`] realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    Shift,
    Stilde,
}

/// `φ_t(S)f` or `φ_t(S̃)f` to `len` coefficients.
///
/// `φ_t(S̃)f = Σ ⟨f,e⟩ φ_t(λ_e) e + φ_t·(f − Σ ⟨f,e⟩ e)` over the Clark basis.
pub fn apply_phi_t(
    model: &PerturbedShiftModel,
    which: Generator,
    t: f64,
    f: &[C64],
    len: usize,
) -> Result<Vec<C64>> {
    let symbol = SemigroupSymbol::new(t)?;
    let phi = phi_t_coefficients(t, len)?;
    let mut out = convolve(&phi, f, len);
    if which == Generator::Shift || model.atom_count() == 0 {
        return Ok(out);
    }
    let ex = model.expansions(len.max(f.len()))?;
    for (e, lambda) in ex.basis.iter().zip(model.eigenvalues()) {
        let c = dot(f, e);
        if c == ZERO {
            continue;
        }
        let factor = symbol.phi(lambda)?;
        let phi_e = convolve(&phi, e, len);
        for k in 0..len {
            out[k] += c * (factor * e[k] - phi_e[k]);
        }
    }
    Ok(out)
}

/// Norms of the finite-rank difference `S̃ − S`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DifferenceNorms {
    pub singular_values: Vec<f64>,
    pub operator_norm: f64,
    pub trace_norm: f64,
    pub rank: usize,
    /// `‖g‖·‖1−θ‖` for a single block.
    pub rank_one_product: Option<f64>,
    /// `2√μ(𝕋)` for the total mass.
    pub operator_bound: f64,
    /// `2 Σ_n √μ_n(𝕋)`.
    pub trace_bound: f64,
    pub operator_bound_holds: bool,
    pub trace_bound_holds: bool,
}

/// Singular values of `S̃ − S = Σ_n u_n ⊗ v_n` from boundary Gram matrices
/// of `u_n = θ̂_n(1−θ_n)` and `v_n = θ̂_n g_n`.
/// Gram matrices `(⟨u_k, u_j⟩, ⟨v_k, v_j⟩)` of the rank-one factors of
/// `S̃ − S`, in closed form.
///
/// The `v_n = θ̂_n g_n` are orthogonal with `‖v_n‖² = μ_n(𝕋)`. For `n < m`,
/// `u_m = θ̂_n θ_n h` with `h = Π_{n<i<m} θ_i · (1 − θ_m)`, and since `θ_n` is
/// inner, `⟨u_n, u_m⟩ = conj(h(0))·(conj θ_n(0) − 1)`.
pub fn difference_grams(model: &PerturbedShiftModel) -> (CMatrix, CMatrix) {
    let b = model.block_count();
    let t0: Vec<C64> = model.blocks().iter().map(InnerFunctionModel::theta_at_zero).collect();
    let gv = CMatrix::from_fn(b, b, |j, k| {
        if j == k {
            C64::new(model.blocks()[k].measure().total_mass(), 0.0)
        } else {
            ZERO
        }
    });
    let mut gu = CMatrix::zeros(b, b);
    for n in 0..b {
        gu[(n, n)] = C64::new(2.0 * (1.0 - t0[n].re), 0.0);
        let mut between = ONE;
        for m in n + 1..b {
            let h0 = between * (ONE - t0[m]);
            let inner = h0.conj() * (t0[n].conj() - ONE);
            gu[(m, n)] = inner;
            gu[(n, m)] = inner.conj();
            between *= t0[m];
        }
    }
    (gu, gv)
}

/// The Gram matrices of [`difference_grams`] by quadrature on the circle.
pub fn difference_grams_quadrature(model: &PerturbedShiftModel, rule: &CircleRule) -> Result<(CMatrix, CMatrix)> {
    let b = model.block_count();
    let f = |z: C64, out: &mut [C64]| {
        let p = model.values(z);
        for j in 0..b {
            for k in 0..b {
                out[j * b + k] = p.u[k] * p.u[j].conj();
                out[b * b + j * b + k] = p.v[k] * p.v[j].conj();
            }
        }
    };
    let mean = rule.resolving(smallest_weight(model)).mean(2 * b * b, &f)?;
    let gu = CMatrix::from_fn(b, b, |j, k| mean.value[j * b + k]);
    let gv = CMatrix::from_fn(b, b, |j, k| mean.value[b * b + j * b + k]);
    Ok((gu, gv))
}

fn smallest_weight(model: &PerturbedShiftModel) -> f64 {
    model
        .blocks()
        .iter()
        .flat_map(|b| b.measure().weights())
        .fold(f64::INFINITY, f64::min)
}

/// Singular values and norms of `S̃ − S`, with the bounds
/// `‖S̃ − S‖ < 2√(Σμ_n(𝕋))` and `‖S̃ − S‖_{S₁} < 2Σ√μ_n(𝕋)`.
pub fn stilde_minus_s_norms(model: &PerturbedShiftModel) -> Result<DifferenceNorms> {
    let b = model.block_count();
    let trace_bound = 2.0 * model.blocks().iter().map(|m| m.measure().total_mass().sqrt()).sum::<f64>();
    let total: f64 = model.blocks().iter().map(|m| m.measure().total_mass()).sum();
    let operator_bound = 2.0 * total.sqrt();
    if b == 0 {
        return Ok(DifferenceNorms {
            singular_values: Vec::new(),
            operator_norm: 0.0,
            trace_norm: 0.0,
            rank: 0,
            rank_one_product: None,
            operator_bound,
            trace_bound,
            operator_bound_holds: true,
            trace_bound_holds: true,
        });
    }
    let (gu, gv) = difference_grams(model);
    let s = linalg::low_rank_singular_values(&gu, &gv);
    let top = s.first().copied().unwrap_or(0.0);
    let rank = s.iter().filter(|&&x| x > 1e-10 * top.max(1e-300)).count();
    let operator_norm = top;
    let trace_norm = s.iter().copied().collect::<CompensatedSum>().value();
    let rank_one_product = (b == 1).then(|| (gu[(0, 0)].re * gv[(0, 0)].re).sqrt());
    Ok(DifferenceNorms {
        operator_bound_holds: operator_norm < operator_bound,
        trace_bound_holds: trace_norm < trace_bound,
        singular_values: s,
        operator_norm,
        trace_norm,
        rank,
        rank_one_product,
        operator_bound,
        trace_bound,
    })
}

/// Quadrature check of the Clark basis and of the action of `S̃` on it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnitaryBlockReport {
    pub dimension: usize,
    /// `max |⟨e_k, e_j⟩ − δ_jk|`.
    pub gram_defect: f64,
    pub gram_worst_pair: Option<(usize, usize)>,
    /// `max |⟨S̃e_k, e_j⟩ − λ_k δ_jk|`.
    pub compression_defect: f64,
    pub compression_worst_pair: Option<(usize, usize)>,
    /// Eigenvalues of the compression matched against the atoms.
    pub eigenvalue_mismatch: f64,
    pub eigenvalues: Vec<[f64; 2]>,
    /// `max |⟨θz^m, θ̂_n g_n⟩|`: `S̃ = S` on `θH²`.
    pub wold_defect: f64,
    /// `max |⟨θz^m, e_k⟩|`: `θH² ⊥ K_θ`.
    pub orthogonality_defect: f64,
    pub quadrature_points: usize,
}

impl UnitaryBlockReport {
    pub fn within(&self, tol: f64) -> bool {
        self.gram_defect < tol
            && self.compression_defect < tol
            && self.eigenvalue_mismatch < tol
            && self.wold_defect < tol
            && self.orthogonality_defect < tol
    }

    /// Errors with the offending pair when any defect reaches `tol`.
    pub fn require(&self, tol: f64) -> Result<()> {
        if self.gram_defect >= tol {
            return Err(Error::Tolerance {
                what: "Clark basis Gram".into(),
                detail: format!("defect {:.3e} at {:?}", self.gram_defect, self.gram_worst_pair),
            });
        }
        if self.compression_defect >= tol {
            return Err(Error::Tolerance {
                what: "compression of S̃".into(),
                detail: format!(
                    "defect {:.3e} at {:?}",
                    self.compression_defect, self.compression_worst_pair
                ),
            });
        }
        if !self.within(tol) {
            return Err(Error::Tolerance {
                what: "unitary block".into(),
                detail: format!(
                    "eigenvalues {:.3e}, wold {:.3e}, orthogonality {:.3e}",
                    self.eigenvalue_mismatch, self.wold_defect, self.orthogonality_defect
                ),
            });
        }
        Ok(())
    }
}

/// Powers `z^m`, `m < WOLD_POWERS`, used to probe `θH²`.
const WOLD_POWERS: usize = 8;

pub fn unitary_block_check(model: &PerturbedShiftModel, rule: &CircleRule) -> Result<UnitaryBlockReport> {
    let n = model.atom_count();
    let b = model.block_count();
    if n == 0 {
        return Ok(UnitaryBlockReport {
            dimension: 0,
            gram_defect: 0.0,
            gram_worst_pair: None,
            compression_defect: 0.0,
            compression_worst_pair: None,
            eigenvalue_mismatch: 0.0,
            eigenvalues: Vec::new(),
            wold_defect: 0.0,
            orthogonality_defect: 0.0,
            quadrature_points: 0,
        });
    }
    // layout: ⟨e_k,e_j⟩ | ⟨z e_k,e_j⟩ | ⟨e_k,v_n⟩ | ⟨u_n,e_j⟩ | ⟨θz^m,v_n⟩ | ⟨θz^m,e_k⟩
    let o_z = n * n;
    let o_ev = 2 * n * n;
    let o_ue = o_ev + n * b;
    let o_wv = o_ue + b * n;
    let o_we = o_wv + WOLD_POWERS * b;
    let dim = o_we + WOLD_POWERS * n;
    let f = |z: C64, out: &mut [C64]| {
        let p = model.values(z);
        for j in 0..n {
            let ej = p.basis[j].conj();
            for k in 0..n {
                out[j * n + k] = p.basis[k] * ej;
                out[o_z + j * n + k] = z * p.basis[k] * ej;
            }
        }
        for k in 0..n {
            for m in 0..b {
                out[o_ev + k * b + m] = p.basis[k] * p.v[m].conj();
                out[o_ue + m * n + k] = p.u[m] * p.basis[k].conj();
            }
        }
        let mut tz = p.theta;
        for m in 0..WOLD_POWERS {
            for q in 0..b {
                out[o_wv + m * b + q] = tz * p.v[q].conj();
            }
            for k in 0..n {
                out[o_we + m * n + k] = tz * p.basis[k].conj();
            }
            tz *= z;
        }
    };
    let mean = rule.resolving(smallest_weight(model)).mean(dim, &f)?;
    let val = &mean.value;
    let atoms = model.eigenvalues();
    let mut gram_defect = 0.0f64;
    let mut gram_pair = None;
    let mut comp_defect = 0.0f64;
    let mut comp_pair = None;
    let mut compression = CMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            let g = val[j * n + k] - if j == k { ONE } else { ZERO };
            if g.norm() > gram_defect || gram_pair.is_none() {
                gram_defect = gram_defect.max(g.norm());
                gram_pair = Some((j, k));
            }
            let mut c = ComplexSum::new();
            c.add(val[o_z + j * n + k]);
            for m in 0..b {
                c.add(val[o_ev + k * b + m] * val[o_ue + m * n + j]);
            }
            let c = c.value();
            compression[(j, k)] = c;
            let d = c - if j == k { atoms[k] } else { ZERO };
            if d.norm() > comp_defect || comp_pair.is_none() {
                comp_defect = comp_defect.max(d.norm());
                comp_pair = Some((j, k));
            }
        }
    }
    let eig = linalg::general_eigenvalues(&compression)?;
    let eigenvalue_mismatch = linalg::match_multisets(&eig, &atoms).unwrap_or(f64::INFINITY);
    let max_abs = |s: &[C64]| s.iter().map(|a| a.norm()).fold(0.0f64, f64::max);
    Ok(UnitaryBlockReport {
        dimension: n,
        gram_defect,
        gram_worst_pair: gram_pair,
        compression_defect: comp_defect,
        compression_worst_pair: comp_pair,
        eigenvalue_mismatch,
        eigenvalues: eig.iter().map(|e| [e.re, e.im]).collect(),
        wold_defect: max_abs(&val[o_wv..o_we]),
        orthogonality_defect: max_abs(&val[o_we..]),
        quadrature_points: mean.points,
    })
}

/// Atom-wise check of `ξ = 1 − 2∫₀^∞ e^{−t} φ_t(ξ) dt`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CogeneratorReport {
    pub errors: Vec<f64>,
    /// Deviation of the Laplace integral from `(1 − ξ)/2`.
    pub laplace_errors: Vec<f64>,
    pub max_error: f64,
}

/// Laplace integrals are cut at `t = 40`, where `e^{−t} < 5e−18`.
const LAPLACE_CUTOFF: f64 = 40.0;

pub fn cogenerator_identity_check(points: &[C64], abs_tol: f64) -> Result<CogeneratorReport> {
    let mut errors = Vec::with_capacity(points.len());
    let mut laplace_errors = Vec::with_capacity(points.len());
    for &xi in points {
        if (xi.norm() - 1.0).abs() > 1e-12 || xi == ONE {
            return Err(Error::param(format!("cogenerator check needs a unimodular point ≠ 1, got {xi}")));
        }
        // on the circle φ_t(ξ) = e^{itζ} with ζ the Cayley image of ξ
        let zeta = cayley_point(xi);
        let width = (PI / (4.0 * zeta.abs().max(1e-300))).min(1.0);
        if LAPLACE_CUTOFF / width > 1e7 {
            return Err(Error::Quadrature {
                what: format!("Laplace integral at {xi}"),
                change: f64::NAN,
                points: (LAPLACE_CUTOFF / width) as usize,
            });
        }
        let symbol = |t: f64, out: &mut [C64]| {
            out[0] = (-t).exp() * crate::analytic::phi_t(t, xi).unwrap_or(ZERO);
        };
        let opts = AdaptiveOptions {
            abs_tol,
            max_width: width,
            max_depth: 30,
        };
        let r = integrate(&symbol, 1, &[0.0, LAPLACE_CUTOFF], &opts);
        if !r.converged {
            return Err(Error::Quadrature {
                what: format!("Laplace integral at {xi}"),
                change: r.error,
                points: r.evaluations,
            });
        }
        let laplace = r.value[0];
        errors.push((ONE - 2.0 * laplace - xi).norm());
        laplace_errors.push((laplace - (ONE - xi) / 2.0).norm());
    }
    let max_error = errors.iter().copied().fold(0.0, f64::max);
    Ok(CogeneratorReport {
        errors,
        laplace_errors,
        max_error,
    })
}

/// `max_λ |φ_t(λ)φ_s(λ) − φ_{t+s}(λ)|` over the atoms: the semigroup law on
/// the unitary part, where `φ_t(S̃)` is diagonal.
pub fn unitary_semigroup_defect(model: &PerturbedShiftModel, t: f64, s: f64) -> Result<f64> {
    let (a, b, ab) = (SemigroupSymbol::new(t)?, SemigroupSymbol::new(s)?, SemigroupSymbol::new(t + s)?);
    let mut worst = 0.0f64;
    for lambda in model.eigenvalues() {
        worst = worst.max((a.phi(lambda)? * b.phi(lambda)? - ab.phi(lambda)?).norm());
    }
    Ok(worst)
}

/// Operators available as finite sections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "operator", rename_all = "kebab-case")]
pub enum OperatorSpec {
    Shift,
    Stilde,
    PhiShift { t: f64 },
    PhiStilde { t: f64 },
    /// `φ_t(S̃) − φ_t(S)`.
    PhiDifference { t: f64 },
}

/// `P_M A P_M` in the monomial basis `1, z, …, z^{M−1}`.
#[derive(Debug, Clone)]
pub struct TruncatedOperator {
    pub degree: usize,
    pub matrix: CMatrix,
    /// Coefficient mass of the analytic factors beyond the degree.
    pub tail_mass: f64,
}

impl TruncatedOperator {
    /// CSV with columns `row,col,re,im`, entries in row-major order.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["row", "col", "re", "im"])?;
        for r in 0..self.degree {
            for c in 0..self.degree {
                let v = self.matrix[(r, c)];
                w.write_record([r.to_string(), c.to_string(), v.re.to_string(), v.im.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// `max |(T*T − I)_{jk}|` over the leading `cols` columns.
    pub fn isometry_defect(&self, cols: usize) -> f64 {
        let cols = cols.min(self.degree);
        let head = self.matrix.columns(0, cols);
        let gram = head.adjoint() * head;
        let mut worst = 0.0f64;
        for j in 0..cols {
            for k in 0..cols {
                let d = gram[(j, k)] - if j == k { ONE } else { ZERO };
                worst = worst.max(d.norm());
            }
        }
        worst
    }
}

fn lower_toeplitz(a: &[f64], m: usize) -> CMatrix {
    CMatrix::from_fn(m, m, |r, c| if r >= c { C64::new(a[r - c], 0.0) } else { ZERO })
}

/// Adds `Σ_i x_i y_i*` to `a`, column by column in parallel.
fn add_outer_products(a: &mut CMatrix, xs: &[Vec<C64>], ys: &[Vec<C64>]) {
    let m = a.nrows();
    let cols: Vec<Vec<C64>> = (0..a.ncols())
        .into_par_iter()
        .map(|c| {
            (0..m)
                .map(|r| {
                    xs.iter()
                        .zip(ys)
                        .map(|(x, y)| x[r] * y[c].conj())
                        .collect::<ComplexSum>()
                        .value()
                })
                .collect()
        })
        .collect();
    for (c, col) in cols.iter().enumerate() {
        for r in 0..m {
            a[(r, c)] += col[r];
        }
    }
}

/// `M×M` finite section of the requested operator.
pub fn matrix_truncation(model: &PerturbedShiftModel, spec: OperatorSpec, m: usize) -> Result<TruncatedOperator> {
    let shift = CMatrix::from_fn(m, m, |r, c| if r == c + 1 { ONE } else { ZERO });
    let t = match spec {
        OperatorSpec::Shift => {
            return Ok(TruncatedOperator {
                degree: m,
                matrix: shift,
                tail_mass: 0.0,
            })
        }
        OperatorSpec::Stilde => None,
        OperatorSpec::PhiShift { t } | OperatorSpec::PhiStilde { t } | OperatorSpec::PhiDifference { t } => {
            SemigroupSymbol::new(t)?;
            Some(t)
        }
    };
    if matches!(spec, OperatorSpec::PhiShift { .. }) {
        let phi = phi_t_coefficients(t.unwrap_or(0.0), m)?;
        return Ok(TruncatedOperator {
            degree: m,
            matrix: lower_toeplitz(&phi, m),
            tail_mass: 0.0,
        });
    }
    if model.atom_count() == 0 {
        let matrix = match spec {
            OperatorSpec::Stilde => shift,
            OperatorSpec::PhiStilde { t } => lower_toeplitz(&phi_t_coefficients(t, m)?, m),
            _ => CMatrix::zeros(m, m),
        };
        return Ok(TruncatedOperator {
            degree: m,
            matrix,
            tail_mass: 0.0,
        });
    }
    let ex = model.expansions(m)?;
    match spec {
        OperatorSpec::Stilde => {
            let mut a = shift;
            add_outer_products(&mut a, &ex.u, &ex.v);
            Ok(TruncatedOperator {
                degree: m,
                matrix: a,
                tail_mass: ex.u_tail.iter().chain(&ex.v_tail).sum(),
            })
        }
        OperatorSpec::PhiStilde { t } | OperatorSpec::PhiDifference { t } => {
            let symbol = SemigroupSymbol::new(t)?;
            let phi = phi_t_coefficients(t, m)?;
            let mut cols = Vec::with_capacity(ex.basis.len());
            for (e, lambda) in ex.basis.iter().zip(model.eigenvalues()) {
                let factor = symbol.phi(lambda)?;
                let phi_e = convolve(&phi, e, m);
                cols.push((0..m).map(|k| factor * e[k] - phi_e[k]).collect::<Vec<_>>());
            }
            let mut a = if matches!(spec, OperatorSpec::PhiStilde { .. }) {
                lower_toeplitz(&phi, m)
            } else {
                CMatrix::zeros(m, m)
            };
            add_outer_products(&mut a, &cols, &ex.basis);
            Ok(TruncatedOperator {
                degree: m,
                matrix: a,
                tail_mass: ex.basis_tail.iter().sum(),
            })
        }
        OperatorSpec::Shift | OperatorSpec::PhiShift { .. } => unreachable!("handled above"),
    }
}

/// Frobenius norm of `T_t T_s − T_{t+s}` for the `M×M` sections of `φ(S̃)`.
pub fn truncated_semigroup_defect(model: &PerturbedShiftModel, t: f64, s: f64, m: usize) -> Result<f64> {
    let a = matrix_truncation(model, OperatorSpec::PhiStilde { t }, m)?.matrix;
    let b = matrix_truncation(model, OperatorSpec::PhiStilde { t: s }, m)?.matrix;
    let ab = matrix_truncation(model, OperatorSpec::PhiStilde { t: t + s }, m)?.matrix;
    Ok((a * b - ab).norm())
}
