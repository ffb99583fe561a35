//! Pointwise evaluation of the analytic objects attached to an atomic
//! Clark measure.
//!
//! For `μ = Σ w_k δ_{ξ_k}` the Herglotz transform
//! `R(z) = Σ w_k (1+ξ̄_k z)/(1−ξ̄_k z)` is rational and `θ = (R−1)/(R+1)` is a
//! finite Blaschke product of degree `n`. Everything here is evaluated from
//! that rational formula; no zeros of θ are ever located.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{CircleMeasure, LineMeasure};
use crate::quadrature::CircleRule;
use crate::sum::ComplexSum;
use crate::C64;

const ONE: C64 = C64::new(1.0, 0.0);

/// Points within this modulus excess over 1 still count as boundary points.
const BOUNDARY_SLACK: f64 = 1e-12;

/// Value of θ with a flag set when the point is an atom of the measure, where
/// the rational formula is replaced by the boundary value 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaValue {
    pub value: C64,
    pub at_atom: Option<usize>,
}

/// Value of `Ωu` with the same atom flag as [`ThetaValue`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaValue {
    pub value: C64,
    pub at_atom: Option<usize>,
}

/// `‖k₁‖²` computed through the Clark isometry and by boundary quadrature.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KernelNorm {
    pub clark: f64,
    pub quadrature: f64,
    pub points: usize,
}

/// Evaluator for θ, Θ, Ω, g and k₁ built from a [`CircleMeasure`].
#[derive(Debug, Clone)]
pub struct InnerFunctionModel {
    measure: CircleMeasure,
    line: LineMeasure,
    conj_points: Vec<C64>,
    weights: Vec<f64>,
    line_points: Vec<f64>,
    line_masses: Vec<f64>,
    theta0: C64,
    theta1: C64,
}

impl InnerFunctionModel {
    pub fn new(measure: CircleMeasure) -> Result<Self> {
        let line = measure.cayley()?;
        let conj_points = measure.points().iter().map(|p| p.conj()).collect();
        let weights = measure.weights();
        let mass = measure.total_mass();
        let theta0 = C64::new((mass - 1.0) / (mass + 1.0), 0.0);
        let mut model = Self {
            line_points: line.points(),
            line_masses: line.masses(),
            measure,
            line,
            conj_points,
            weights,
            theta0,
            theta1: ONE,
        };
        model.theta1 = model.theta_raw(ONE).0;
        Ok(model)
    }

    pub fn measure(&self) -> &CircleMeasure {
        &self.measure
    }

    pub fn line(&self) -> &LineMeasure {
        &self.line
    }

    /// Degree of θ as a Blaschke product, i.e. the number of atoms.
    pub fn degree(&self) -> usize {
        self.weights.len()
    }

    /// `R(z) = ∫ (1+ξ̄z)/(1−ξ̄z) dμ(ξ)` for `|z| < 1`.
    pub fn herglotz(&self, z: C64) -> Result<C64> {
        if !(z.norm() < 1.0) {
            return Err(Error::Domain(format!("Herglotz transform needs |z| < 1, got {z}")));
        }
        Ok(self
            .conj_points
            .iter()
            .zip(&self.weights)
            .map(|(cp, &w)| w * (ONE + cp * z) / (ONE - cp * z))
            .collect::<ComplexSum>()
            .value())
    }

    fn exact_atom_hit(&self, z: C64) -> Option<usize> {
        self.conj_points.iter().position(|cp| ONE - cp * z == C64::new(0.0, 0.0))
    }

    fn atom_hit(&self, z: C64) -> Option<usize> {
        self.conj_points
            .iter()
            .position(|cp| (ONE - cp * z).norm() < 1e-15)
    }

    /// θ(z) without domain checks; atoms return `(1, Some(k))`.
    fn theta_raw(&self, z: C64) -> (C64, Option<usize>) {
        if let Some(k) = self.atom_hit(z) {
            return (ONE, Some(k));
        }
        let r = self
            .conj_points
            .iter()
            .zip(&self.weights)
            .map(|(cp, &w)| w * (ONE + cp * z) / (ONE - cp * z))
            .collect::<ComplexSum>()
            .value();
        (ONE - 2.0 / (r + ONE), None)
    }

    /// θ(z) for `|z| ≤ 1`, via `θ = (R−1)/(R+1)`.
    pub fn theta(&self, z: C64) -> Result<ThetaValue> {
        if !(z.norm() <= 1.0 + BOUNDARY_SLACK) {
            return Err(Error::Domain(format!("θ is evaluated on the closed disk, got {z}")));
        }
        let (value, at_atom) = self.theta_raw(z);
        Ok(ThetaValue { value, at_atom })
    }

    /// θ(z) on the closed disk, returning 1 at atoms without a flag.
    pub fn theta_value(&self, z: C64) -> C64 {
        self.theta_raw(z).0
    }

    /// θ(0) = (μ(𝕋) − 1)/(μ(𝕋) + 1).
    pub fn theta_at_zero(&self) -> C64 {
        self.theta0
    }

    /// Nontangential value θ(1); finite and unimodular because no atom sits at 1.
    pub fn theta_at_one(&self) -> C64 {
        self.theta1
    }

    /// θ′(0) = 2R′(0)/(R(0)+1)² with R′(0) = 2 Σ w_k ξ̄_k.
    pub fn theta_prime_at_zero(&self) -> C64 {
        let r0 = self.measure.total_mass();
        let r1: C64 = self
            .conj_points
            .iter()
            .zip(&self.weights)
            .map(|(cp, &w)| 2.0 * w * cp)
            .collect::<ComplexSum>()
            .value();
        2.0 * r1 / ((r0 + 1.0) * (r0 + 1.0))
    }

    /// Normalized Clark basis vectors `b_k = √w_k (1−θ)/(1−ξ̄_k z)` at `z`.
    ///
    /// Evaluated as `2√w_k / D_k(z)` with
    /// `D_k = w_k(1+ξ̄_k z) + (1−ξ̄_k z)(1 + Σ_{j≠k} w_j(1+ξ̄_j z)/(1−ξ̄_j z))`,
    /// which stays regular at `ξ_k`.
    pub fn clark_vectors(&self, z: C64, out: &mut [C64]) {
        let n = self.degree();
        debug_assert_eq!(out.len(), n);
        if let Some(h) = self.exact_atom_hit(z) {
            for (k, o) in out.iter_mut().enumerate() {
                *o = if k == h {
                    C64::new(1.0 / self.weights[k].sqrt(), 0.0)
                } else {
                    C64::new(0.0, 0.0)
                };
            }
            return;
        }
        let mut d = Vec::with_capacity(n);
        let mut terms = Vec::with_capacity(n);
        let mut total = ComplexSum::new();
        total.add(ONE);
        for (cp, &w) in self.conj_points.iter().zip(&self.weights) {
            let dk = ONE - cp * z;
            let tk = w * (ONE + cp * z) / dk;
            total.add(tk);
            d.push(dk);
            terms.push(tk);
        }
        let total = total.value();
        for k in 0..n {
            let w = self.weights[k];
            let denom = w * (ONE + self.conj_points[k] * z) + d[k] * (total - terms[k]);
            out[k] = 2.0 * w.sqrt() / denom;
        }
    }

    /// `(Ωu)(z) = (1−θ(z)) ∫ u(ξ) dμ(ξ)/(1−ξ̄z)` for `u` given by its values on
    /// the atoms.
    pub fn omega_apply(&self, u: &[C64], z: C64) -> Result<OmegaValue> {
        if u.len() != self.degree() {
            return Err(Error::param(format!(
                "Ω expects {} atom values, got {}",
                self.degree(),
                u.len()
            )));
        }
        if !(z.norm() <= 1.0 + BOUNDARY_SLACK) {
            return Err(Error::Domain(format!("Ωu is evaluated on the closed disk, got {z}")));
        }
        let mut b = vec![C64::new(0.0, 0.0); self.degree()];
        self.clark_vectors(z, &mut b);
        let value = u
            .iter()
            .zip(&b)
            .zip(&self.weights)
            .map(|((uk, bk), &w)| uk * w.sqrt() * bk)
            .collect::<ComplexSum>()
            .value();
        Ok(OmegaValue {
            value,
            at_atom: self.atom_hit(z),
        })
    }

    /// `g(z) = (θ(z) − θ(0))/(z(1 − θ(0)))`, with `g(0) = θ′(0)/(1 − θ(0))`.
    pub fn g_closed(&self, z: C64) -> Result<C64> {
        if !(z.norm() <= 1.0 + BOUNDARY_SLACK) {
            return Err(Error::Domain(format!("g is evaluated on the closed disk, got {z}")));
        }
        let denom = ONE - self.theta0;
        if z.norm() < 1e-9 {
            return Ok(self.theta_prime_at_zero() / denom);
        }
        Ok((self.theta_value(z) - self.theta0) / (z * denom))
    }

    /// `g = Ωξ̄ = Σ_k ξ̄_k √w_k b_k`, the same function through the Clark basis.
    pub fn g_via_clark(&self, z: C64) -> C64 {
        let mut b = vec![C64::new(0.0, 0.0); self.degree()];
        self.clark_vectors(z, &mut b);
        b.iter()
            .zip(&self.conj_points)
            .zip(&self.weights)
            .map(|((bk, cp), &w)| cp * w.sqrt() * bk)
            .collect::<ComplexSum>()
            .value()
    }

    /// Reproducing kernel of `K_θ` at 1: `k₁(z) = (1 − conj(θ(1))θ(z))/(1−z)`.
    pub fn repkernel_one(&self, z: C64) -> Result<C64> {
        if !(z.norm() <= 1.0 + BOUNDARY_SLACK) {
            return Err(Error::Domain(format!("k₁ is evaluated on the closed disk, got {z}")));
        }
        if (ONE - z).norm() < 1e-12 {
            return Ok(C64::new(self.repkernel_normsq_clark(), 0.0));
        }
        Ok((ONE - self.theta1.conj() * self.theta_value(z)) / (ONE - z))
    }

    /// `‖(1−conj θ(1))/(1−ξ)‖²_{L²(μ)} = |1−θ(1)|² ∫ dμ/|1−ξ|²`.
    pub fn repkernel_normsq_clark(&self) -> f64 {
        (ONE - self.theta1).norm_sqr()
            * self
                .measure
                .moment_integral(2.0)
                .expect("order 2 is a valid moment")
    }

    /// `‖k₁‖²` by both routes.
    pub fn repkernel_one_normsq(&self, rule: &CircleRule) -> Result<KernelNorm> {
        let f = |z: C64, out: &mut [C64]| {
            let k = (ONE - self.theta1.conj() * self.theta_value(z)) / (ONE - z);
            out[0] = C64::new(k.norm_sqr(), 0.0);
        };
        let mean = rule.mean(1, &f)?;
        Ok(KernelNorm {
            clark: self.repkernel_normsq_clark(),
            quadrature: mean.value[0].re,
            points: mean.points,
        })
    }

    /// `Θ(x) = θ((x−i)/(x+i))` on the closed upper half-plane.
    pub fn theta_halfplane(&self, x: C64) -> Result<C64> {
        if x.im < -BOUNDARY_SLACK * (1.0 + x.norm()) {
            return Err(Error::Domain(format!("Θ is evaluated for Im x ≥ 0, got {x}")));
        }
        let z = (x - C64::i()) / (x + C64::i());
        Ok(self.theta_raw(z).0)
    }

    /// Θ through the line measure:
    /// `(1+Θ)/(1−Θ) = (1/πi) ∫ (1/(ζ−x) − ζ/(1+ζ²)) dν(ζ)`.
    pub fn theta_halfplane_line(&self, x: C64) -> Result<C64> {
        if x.im < -BOUNDARY_SLACK * (1.0 + x.norm()) {
            return Err(Error::Domain(format!("Θ is evaluated for Im x ≥ 0, got {x}")));
        }
        match self.line_herglotz(x) {
            Some(h) => Ok(ONE - 2.0 / (h + ONE)),
            None => Ok(ONE),
        }
    }

    /// `(1/πi) Σ m_k (1/(ζ_k−x) − ζ_k/(1+ζ_k²))`, or `None` at an atom.
    fn line_herglotz(&self, x: C64) -> Option<C64> {
        let mut acc = ComplexSum::new();
        for (&zeta, &m) in self.line_points.iter().zip(&self.line_masses) {
            let d = C64::new(zeta, 0.0) - x;
            if d == C64::new(0.0, 0.0) {
                return None;
            }
            acc.add(m * (ONE / d - zeta / (1.0 + zeta * zeta)));
        }
        Some(acc.value() / C64::new(0.0, PI))
    }

    /// `1 − Θ(x)` for real `x`, from the line measure.
    pub fn one_minus_theta_line(&self, x: f64) -> C64 {
        match self.line_herglotz(C64::new(x, 0.0)) {
            Some(h) => 2.0 / (h + ONE),
            None => C64::new(0.0, 0.0),
        }
    }
}

/// The symbols `φ_t(z) = exp(t(z+1)/(z−1))` and `ψ_t(x) = e^{itx}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemigroupSymbol {
    t: f64,
}

impl SemigroupSymbol {
    pub fn new(t: f64) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::param(format!("semigroup time must be ≥ 0, got {t}")));
        }
        Ok(Self { t })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// `φ_t(z)`; `z = 1` is an essential singularity and is rejected.
    pub fn phi(&self, z: C64) -> Result<C64> {
        if z == ONE {
            return Err(Error::Domain("φ_t has an essential singularity at 1".into()));
        }
        if self.t == 0.0 {
            return Ok(ONE);
        }
        let v = (self.t * (z + ONE) / (z - ONE)).exp();
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::Domain(format!("φ_t overflows at {z}")));
        }
        Ok(v)
    }

    /// `ψ_t(x) = e^{itx}`.
    pub fn psi(&self, x: C64) -> C64 {
        (C64::i() * self.t * x).exp()
    }
}

/// Shorthand for `SemigroupSymbol::new(t)?.phi(z)`.
pub fn phi_t(t: f64, z: C64) -> Result<C64> {
    SemigroupSymbol::new(t)?.phi(z)
}

/// Shorthand for `SemigroupSymbol::new(t)?.psi(x)`.
pub fn psi_t(t: f64, x: C64) -> Result<C64> {
    Ok(SemigroupSymbol::new(t)?.psi(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{random_circle_measure, RandomMeasureSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn model(atoms: &[(f64, f64)]) -> InnerFunctionModel {
        InnerFunctionModel::new(CircleMeasure::from_angles(atoms).unwrap()).unwrap()
    }

    fn near(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    fn random_models(seed: u64, count: usize, max_atoms: usize) -> Vec<InnerFunctionModel> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let spec = RandomMeasureSpec {
                    atoms: rng.gen_range(1..=max_atoms),
                    ..Default::default()
                };
                InnerFunctionModel::new(random_circle_measure(&mut rng, &spec).unwrap()).unwrap()
            })
            .collect()
    }

    fn random_disk_point<R: Rng>(rng: &mut R) -> C64 {
        C64::from_polar(rng.gen_range(0.0..0.999f64).sqrt(), rng.gen_range(0.0..2.0 * PI))
    }

    #[test]
    fn herglotz_examples() {
        let m = model(&[(-1.0, 1.0)]);
        assert!(near(m.herglotz(c(0.0, 0.0)).unwrap(), c(1.0, 0.0), 1e-15));
        assert!(near(m.herglotz(c(0.5, 0.0)).unwrap(), c(1.0 / 3.0, 0.0), 1e-15));
        let m = model(&[(0.5, 2.0)]);
        assert!(near(m.herglotz(c(0.0, 0.0)).unwrap(), c(2.0, 0.0), 1e-15));
        assert!(m.herglotz(c(1.0, 0.0)).is_err());
    }

    #[test]
    fn theta_single_atom_closed_forms() {
        let m = model(&[(-1.0, 1.0)]);
        assert!(near(m.theta(c(0.3, 0.0)).unwrap().value, c(-0.3, 0.0), 1e-15));
        let m = model(&[(0.5, 1.0)]);
        let at = m.theta(c(0.0, 1.0)).unwrap();
        assert_eq!(at.value, c(1.0, 0.0));
        assert_eq!(at.at_atom, Some(0));
        assert!(near(m.theta(c(0.2, 0.4)).unwrap().value, c(0.0, -1.0) * c(0.2, 0.4), 1e-15));

        // general single atom (ξ, w)
        let xi = C64::from_polar(1.0, 2.0);
        let w = 0.37;
        let m = InnerFunctionModel::new(CircleMeasure::new([(xi, w)]).unwrap()).unwrap();
        let z = c(0.1, -0.6);
        let xz = xi.conj() * z;
        let expected = ((w - 1.0) + (w + 1.0) * xz) / ((w + 1.0) + (w - 1.0) * xz);
        assert!(near(m.theta(z).unwrap().value, expected, 1e-15));
        assert!(m.theta(c(1.5, 0.0)).is_err());
    }

    #[test]
    fn theta_zero_for_unit_mass() {
        let m = model(&[(0.25, 0.5), (-0.7, 0.5)]);
        assert!(m.theta(c(0.0, 0.0)).unwrap().value.norm() < 1e-15);
        assert_eq!(m.theta_at_zero(), c(0.0, 0.0));
    }

    #[test]
    fn theta_at_one_examples() {
        assert!(near(model(&[(-1.0, 1.0)]).theta_at_one(), c(-1.0, 0.0), 1e-15));
        assert!(near(model(&[(0.5, 1.0)]).theta_at_one(), c(0.0, -1.0), 1e-15));
        let t1 = model(&[(0.5, 1.0), (-0.5, 1.0)]).theta_at_one();
        assert!((t1.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn theta_halfplane_examples() {
        let m = model(&[(-1.0, 1.0)]);
        let x = c(0.7, 1.3);
        let expected = -(x - C64::i()) / (x + C64::i());
        assert!(near(m.theta_halfplane(x).unwrap(), expected, 1e-15));
        assert!(near(m.theta_halfplane(C64::i()).unwrap(), c(0.0, 0.0), 1e-15));
        assert!(near(m.theta_halfplane(c(0.0, 0.0)).unwrap(), c(1.0, 0.0), 1e-15));
        assert!(near(m.theta_halfplane_line(c(0.0, 0.0)).unwrap(), c(1.0, 0.0), 1e-15));
        let far = m.theta_halfplane(c(0.0, 1e9)).unwrap();
        assert!(near(far, m.theta_at_one(), 1e-8));
        assert!(m.theta_halfplane(c(0.0, -1.0)).is_err());
        assert!(m.theta_halfplane_line(c(0.0, -0.5)).is_err());
    }

    #[test]
    fn symbol_examples() {
        for t in [0.0, 0.5, 1.0, 3.0] {
            let s = SemigroupSymbol::new(t).unwrap();
            assert!(near(s.phi(c(-1.0, 0.0)).unwrap(), c(1.0, 0.0), 1e-15));
            let e = C64::from_polar(1.0, -t);
            assert!(near(s.phi(C64::i()).unwrap(), e, 1e-15));
            assert!(near(s.psi(c(-1.0, 0.0)), e, 1e-15));
        }
        assert!(phi_t(1.0, c(1.0, 0.0)).is_err());
        assert!(phi_t(-1.0, c(0.0, 0.0)).is_err());
        assert_eq!(phi_t(0.0, c(0.3, 0.2)).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn omega_examples() {
        let m = model(&[(-1.0, 1.0)]);
        for z in [c(0.0, 0.0), c(0.3, -0.2), c(0.0, 1.0)] {
            assert!(near(m.omega_apply(&[c(1.0, 0.0)], z).unwrap().value, c(1.0, 0.0), 1e-15));
            assert!(near(m.omega_apply(&[c(-1.0, 0.0)], z).unwrap().value, c(-1.0, 0.0), 1e-15));
            assert_eq!(m.omega_apply(&[c(0.0, 0.0)], z).unwrap().value, c(0.0, 0.0));
        }
        let at = m.omega_apply(&[c(2.0, 0.0)], c(-1.0, 0.0)).unwrap();
        assert_eq!(at.at_atom, Some(0));
        assert!(near(at.value, c(2.0, 0.0), 1e-15));
        assert!(m.omega_apply(&[], c(0.0, 0.0)).is_err());
    }

    #[test]
    fn g_examples() {
        let m = model(&[(-1.0, 1.0)]);
        for z in [c(0.0, 0.0), c(0.5, 0.1), c(-0.2, 0.9)] {
            assert!(near(m.g_closed(z).unwrap(), c(-1.0, 0.0), 1e-14));
        }
        let m = model(&[(0.5, 1.0)]);
        for z in [c(0.0, 0.0), c(0.5, 0.1)] {
            assert!(near(m.g_closed(z).unwrap(), c(0.0, -1.0), 1e-14));
        }
        // μ(𝕋) = 1 gives θ(0) = 0 and g(0) = θ′(0)
        let m = model(&[(0.3, 0.25), (-0.6, 0.75)]);
        assert!(near(m.g_closed(c(0.0, 0.0)).unwrap(), m.theta_prime_at_zero(), 1e-15));
        // θ′(0) against a central difference
        let h = 1e-5;
        let fd = (m.theta_value(c(h, 0.0)) - m.theta_value(c(-h, 0.0))) / (2.0 * h);
        assert!(near(fd, m.theta_prime_at_zero(), 1e-9));
    }

    #[test]
    fn g_closed_agrees_with_clark_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in random_models(3, 10, 6) {
            for _ in 0..20 {
                let z = random_disk_point(&mut rng);
                if z.norm() < 1e-3 {
                    continue;
                }
                let a = m.g_closed(z).unwrap();
                let b = m.g_via_clark(z);
                assert!(near(a, b, 1e-10 * (1.0 + a.norm())), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn repkernel_examples() {
        let rule = CircleRule::default();
        let m = model(&[(-1.0, 1.0)]);
        assert!(near(m.repkernel_one(c(0.4, 0.2)).unwrap(), c(1.0, 0.0), 1e-15));
        let k = m.repkernel_one_normsq(&rule).unwrap();
        assert!((k.clark - 1.0).abs() < 1e-15);
        assert!((k.quadrature - 1.0).abs() < 1e-8);

        let m = model(&[(0.5, 1.0)]);
        let k = m.repkernel_one_normsq(&rule).unwrap();
        assert!((k.clark - 1.0).abs() < 1e-14);
        assert!((k.quadrature - k.clark).abs() < 1e-8);
        assert!(k.clark < 4.0 * m.measure().moment_integral(2.0).unwrap());
    }

    #[test]
    fn repkernel_routes_agree_and_respect_bound() {
        let rule = CircleRule::default();
        for m in random_models(5, 8, 5) {
            let k = m.repkernel_one_normsq(&rule).unwrap();
            assert!((k.clark - k.quadrature).abs() < 1e-8 * (1.0 + k.clark), "{k:?}");
            assert!(k.clark < 4.0 * m.measure().moment_integral(2.0).unwrap());
            // reproducing property: k₁(1) = ‖k₁‖²
            let near_one = m.repkernel_one(C64::from_polar(1.0, 1e-7)).unwrap();
            assert!((near_one.re - k.clark).abs() < 1e-5 * (1.0 + k.clark));
        }
    }

    #[test]
    fn maximum_modulus_inside_disk() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for m in random_models(19, 20, 8) {
            for _ in 0..200 {
                let z = random_disk_point(&mut rng);
                assert!(m.theta(z).unwrap().value.norm() < 1.0);
            }
        }
    }

    #[test]
    fn unimodular_on_boundary_and_one_at_atoms() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for m in random_models(29, 20, 8) {
            for _ in 0..50 {
                let z = C64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI));
                assert!((m.theta(z).unwrap().value.norm() - 1.0).abs() < 1e-10);
            }
            for (k, p) in m.measure().points().iter().enumerate() {
                let v = m.theta(*p).unwrap();
                assert_eq!(v.at_atom, Some(k));
                assert!(near(v.value, c(1.0, 0.0), 1e-10));
            }
        }
    }

    #[test]
    fn radial_limits_at_atoms_converge_monotonically() {
        for m in random_models(31, 10, 6) {
            for p in m.measure().points() {
                let mut prev = f64::INFINITY;
                for k in 3..=8 {
                    let r = 1.0 - 10f64.powi(-k);
                    let err = (m.theta(p * r).unwrap().value - 1.0).norm();
                    assert!(err < prev, "radial error not decreasing: {err} ≥ {prev}");
                    prev = err;
                }
                assert!(prev < 1e-6);
            }
        }
    }

    #[test]
    fn cayley_coherence_of_halfplane_routes() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for m in random_models(41, 10, 6) {
            for _ in 0..100 {
                let x = c(rng.gen_range(-20.0..20.0), rng.gen_range(1e-3..20.0));
                let a = m.theta_halfplane(x).unwrap();
                let b = m.theta_halfplane_line(x).unwrap();
                assert!(near(a, b, 1e-12), "{a} vs {b} at {x}");
            }
            for _ in 0..20 {
                let x = rng.gen_range(-20.0..20.0);
                let a = 1.0 - m.theta_halfplane(c(x, 0.0)).unwrap();
                assert!(near(a, m.one_minus_theta_line(x), 1e-11));
            }
        }
    }

    #[test]
    fn semigroup_law_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..200 {
            let z = random_disk_point(&mut rng);
            let (t, s) = (rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0));
            let lhs = phi_t(t, z).unwrap() * phi_t(s, z).unwrap();
            assert!(near(lhs, phi_t(t + s, z).unwrap(), 1e-12));
            assert!(phi_t(t, z).unwrap().norm() <= 1.0);
            let zeta = C64::from_polar(1.0, rng.gen_range(0.1..6.1));
            assert!((phi_t(t, zeta).unwrap().norm() - 1.0).abs() < 1e-12);
            let x = rng.gen_range(-10.0..10.0);
            let zx = (c(x, 0.0) - C64::i()) / (c(x, 0.0) + C64::i());
            assert!(near(psi_t(t, c(x, 0.0)).unwrap(), phi_t(t, zx).unwrap(), 1e-11));
        }
    }

    #[test]
    fn clark_isometry_scalar() {
        let rule = CircleRule::default();
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for m in random_models(53, 10, 6) {
            let u: Vec<C64> = (0..m.degree())
                .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let f = |z: C64, out: &mut [C64]| {
                out[0] = C64::new(m.omega_apply(&u, z).unwrap().value.norm_sqr(), 0.0);
            };
            let h2 = rule.mean(1, &f).unwrap().value[0].re;
            let l2: f64 = u
                .iter()
                .zip(m.measure().weights())
                .map(|(uk, w)| uk.norm_sqr() * w)
                .sum();
            assert!((h2 - l2).abs() < 1e-8 * (1.0 + l2), "{h2} vs {l2}");
        }
    }

    #[test]
    fn empty_measure_gives_constant_theta() {
        let m = InnerFunctionModel::new(CircleMeasure::empty()).unwrap();
        assert_eq!(m.theta_value(c(0.3, 0.1)), c(-1.0, 0.0));
        assert_eq!(m.theta_at_one(), c(-1.0, 0.0));
        assert_eq!(m.degree(), 0);
    }
}
