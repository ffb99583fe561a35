//! Finite atomic measures on the unit circle and the real line.
//!
//! A [`CircleMeasure`] is the generator of the whole model. Its Cayley image
//! [`LineMeasure`] carries masses `m = π(1+ζ²)·w` at `ζ = i(1+ξ)/(1−ξ)`, so
//! that `ν(ℝ) = 4π ∫ dμ/|1−ξ|²`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::{sum_f64, CompensatedSum};
use crate::C64;

/// Default minimal distance between an atom and the point 1.
pub const DEFAULT_ATOM_FLOOR: f64 = 1e-9;

/// Atoms closer than this are considered coincident.
const DISTINCT_TOL: f64 = 1e-12;

/// Point `e^{iπa}` with exact values when `2a` is an integer.
pub fn unit_from_angle_over_pi(a: f64) -> C64 {
    let r = a.rem_euclid(2.0);
    let twice = 2.0 * r;
    if twice.fract() == 0.0 {
        return match twice as i64 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        };
    }
    let (s, c) = (PI * r).sin_cos();
    C64::new(c, s)
}

/// Argument in `(−π, π]`, with `−0.0` imaginary parts treated as `+0.0`.
pub fn principal_angle(z: C64) -> f64 {
    let im = if z.im == 0.0 { 0.0 } else { z.im };
    im.atan2(z.re)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleAtom {
    pub point: C64,
    pub weight: f64,
}

/// Finite positive atomic measure on the unit circle with no mass at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCircleMeasure", into = "RawCircleMeasure")]
pub struct CircleMeasure {
    atoms: Vec<CircleAtom>,
    floor: f64,
}

#[derive(Serialize, Deserialize)]
struct RawCircleMeasure {
    atoms: Vec<CircleAtom>,
    #[serde(default = "default_floor")]
    floor: f64,
}

fn default_floor() -> f64 {
    DEFAULT_ATOM_FLOOR
}

impl TryFrom<RawCircleMeasure> for CircleMeasure {
    type Error = Error;

    fn try_from(raw: RawCircleMeasure) -> Result<Self> {
        CircleMeasure::with_floor(raw.atoms.into_iter().map(|a| (a.point, a.weight)), raw.floor)
    }
}

impl From<CircleMeasure> for RawCircleMeasure {
    fn from(m: CircleMeasure) -> Self {
        RawCircleMeasure {
            atoms: m.atoms,
            floor: m.floor,
        }
    }
}

impl CircleMeasure {
    pub fn new(atoms: impl IntoIterator<Item = (C64, f64)>) -> Result<Self> {
        Self::with_floor(atoms, DEFAULT_ATOM_FLOOR)
    }

    /// Builds a measure, normalizing every point onto the circle.
    pub fn with_floor(atoms: impl IntoIterator<Item = (C64, f64)>, floor: f64) -> Result<Self> {
        if !(floor > 0.0) {
            return Err(Error::param(format!("atom floor must be positive, got {floor}")));
        }
        let mut out: Vec<CircleAtom> = Vec::new();
        for (index, (point, weight)) in atoms.into_iter().enumerate() {
            let modulus = point.norm();
            if !modulus.is_finite() || modulus == 0.0 {
                return Err(Error::InvalidMeasure(format!("atom {index} has point {point}")));
            }
            if !(weight > 0.0) || !weight.is_finite() {
                return Err(Error::InvalidMeasure(format!("atom {index} has weight {weight}")));
            }
            let mut unit = point / modulus;
            if unit.im == 0.0 {
                unit.im = 0.0;
            }
            let distance = (unit - 1.0).norm();
            if distance <= floor {
                return Err(Error::AtomNearOne {
                    index,
                    distance,
                    floor,
                });
            }
            if let Some(j) = out.iter().position(|a| (a.point - unit).norm() < DISTINCT_TOL) {
                return Err(Error::InvalidMeasure(format!(
                    "atoms {j} and {index} coincide at {unit}"
                )));
            }
            out.push(CircleAtom { point: unit, weight });
        }
        Ok(Self { atoms: out, floor })
    }

    /// Builds a measure from `(angle / π, weight)` pairs.
    pub fn from_angles(atoms: &[(f64, f64)]) -> Result<Self> {
        Self::new(atoms.iter().map(|&(a, w)| (unit_from_angle_over_pi(a), w)))
    }

    pub fn empty() -> Self {
        Self {
            atoms: Vec::new(),
            floor: DEFAULT_ATOM_FLOOR,
        }
    }

    pub fn atoms(&self) -> &[CircleAtom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn points(&self) -> Vec<C64> {
        self.atoms.iter().map(|a| a.point).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.weight).collect()
    }

    /// `μ(𝕋)`.
    pub fn total_mass(&self) -> f64 {
        sum_f64(self.atoms.iter().map(|a| a.weight))
    }

    /// The measure `c·μ`, same support.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::param(format!("scale factor must be positive, got {c}")));
        }
        Ok(Self {
            atoms: self
                .atoms
                .iter()
                .map(|a| CircleAtom {
                    point: a.point,
                    weight: a.weight * c,
                })
                .collect(),
            floor: self.floor,
        })
    }

    /// `∫ dμ(ξ)/|1−ξ|^q`.
    pub fn moment_integral(&self, q: f64) -> Result<f64> {
        if !(q >= 0.0) {
            return Err(Error::param(format!("moment order must be ≥ 0, got {q}")));
        }
        Ok(sum_f64(
            self.atoms.iter().map(|a| a.weight / (1.0 - a.point).norm().powf(q)),
        ))
    }

    /// Masses `∫_{γ_n} dμ/|1−ξ|²` of the nonempty arcs, keyed by `n`.
    ///
    /// For `n > 0` the arc `γ_n` is `{e^{iφ} : π/(n+1) < φ ≤ π/n}`; arcs with
    /// `n < 0` are the mirror images `φ ↦ −φ`. Angles are taken in `(−π, π]`,
    /// so `−1` belongs to `γ_1`.
    pub fn arc_bins(&self) -> Vec<(i64, f64)> {
        let mut bins: BTreeMap<i64, CompensatedSum> = BTreeMap::new();
        for a in &self.atoms {
            let n = arc_index(a.point);
            bins.entry(n)
                .or_default()
                .add(a.weight / (1.0 - a.point).norm_sqr());
        }
        bins.into_iter().map(|(n, s)| (n, s.value())).collect()
    }

    /// `Σ_n (∫_{γ_n} dμ/|1−ξ|²)^{p/2}`.
    pub fn arc_binned_sum(&self, p: f64) -> Result<f64> {
        if !(p > 0.0) {
            return Err(Error::param(format!("p must be positive, got {p}")));
        }
        Ok(sum_f64(self.arc_bins().into_iter().map(|(_, m)| m.powf(0.5 * p))))
    }

    /// Cayley transport to the line.
    pub fn cayley(&self) -> Result<LineMeasure> {
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for (index, a) in self.atoms.iter().enumerate() {
            let distance = (1.0 - a.point).norm();
            if distance <= self.floor {
                return Err(Error::AtomNearOne {
                    index,
                    distance,
                    floor: self.floor,
                });
            }
            let zeta = cayley_point(a.point);
            atoms.push(LineAtom {
                point: zeta,
                mass: PI * (1.0 + zeta * zeta) * a.weight,
            });
        }
        LineMeasure::new(atoms.into_iter().map(|a| (a.point, a.mass)))
    }
}

/// `ζ = i(1+ξ)/(1−ξ)`, real for unimodular `ξ ≠ 1`.
pub fn cayley_point(xi: C64) -> f64 {
    (C64::i() * (1.0 + xi) / (1.0 - xi)).re
}

/// Inverse Cayley map `ξ = (ζ−i)/(ζ+i)`.
pub fn inverse_cayley_point(zeta: f64) -> C64 {
    let z = C64::new(zeta, 0.0);
    let xi = (z - C64::i()) / (z + C64::i());
    xi / xi.norm()
}

/// Index `n` of the arc `γ_n` containing a unimodular point `≠ 1`.
pub fn arc_index(point: C64) -> i64 {
    let phi = principal_angle(point);
    let n = (PI / phi.abs()).floor() as i64;
    let n = n.max(1);
    if phi > 0.0 {
        n
    } else {
        -n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineAtom {
    pub point: f64,
    pub mass: f64,
}

/// One unit bin `Δ_n = [n, n+1)` with its mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub n: i64,
    pub mass: f64,
}

/// Finite positive atomic measure on the real line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineMeasure {
    atoms: Vec<LineAtom>,
}

impl LineMeasure {
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut out: Vec<LineAtom> = Vec::new();
        for (index, (point, mass)) in atoms.into_iter().enumerate() {
            if !point.is_finite() {
                return Err(Error::InvalidMeasure(format!("atom {index} at {point}")));
            }
            if !(mass > 0.0) || !mass.is_finite() {
                return Err(Error::InvalidMeasure(format!("atom {index} has mass {mass}")));
            }
            if let Some(j) = out
                .iter()
                .position(|a| (a.point - point).abs() <= DISTINCT_TOL * (1.0 + point.abs()))
            {
                return Err(Error::InvalidMeasure(format!(
                    "atoms {j} and {index} coincide at {point}"
                )));
            }
            out.push(LineAtom { point, mass });
        }
        Ok(Self { atoms: out })
    }

    pub fn empty() -> Self {
        Self { atoms: Vec::new() }
    }

    pub fn atoms(&self) -> &[LineAtom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn points(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.point).collect()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.mass).collect()
    }

    /// `ν(ℝ)`.
    pub fn total_mass(&self) -> f64 {
        sum_f64(self.atoms.iter().map(|a| a.mass))
    }

    /// `max |ζ_k|`, zero for the empty measure.
    pub fn support_radius(&self) -> f64 {
        self.atoms.iter().map(|a| a.point.abs()).fold(0.0, f64::max)
    }

    /// Nonempty bins `Δ_n = [n, n+1)` in increasing order of `n`.
    pub fn bins(&self) -> Vec<Bin> {
        let mut bins: BTreeMap<i64, CompensatedSum> = BTreeMap::new();
        for a in &self.atoms {
            bins.entry(a.point.floor() as i64).or_default().add(a.mass);
        }
        bins.into_iter()
            .map(|(n, s)| Bin { n, mass: s.value() })
            .collect()
    }

    /// `Σ_n ν(Δ_n)^{p/2}`.
    pub fn parfenov_sum(&self, p: f64) -> Result<f64> {
        if !(p > 0.0) {
            return Err(Error::param(format!("p must be positive, got {p}")));
        }
        Ok(sum_f64(self.bins().into_iter().map(|b| b.mass.powf(0.5 * p))))
    }

    /// Inverse Cayley transport.
    pub fn to_circle(&self) -> Result<CircleMeasure> {
        CircleMeasure::new(self.atoms.iter().map(|a| {
            (
                inverse_cayley_point(a.point),
                a.mass / (PI * (1.0 + a.point * a.point)),
            )
        }))
    }
}

/// Rescaled block measures together with the quantities they control.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rescaling {
    pub measures: Vec<CircleMeasure>,
    pub factors: Vec<f64>,
    /// `Σ_n √(μ'_n(𝕋))`.
    pub root_mass_sum: f64,
    /// `Σ_n (∫ dμ'_n/|1−ξ|^q)^{1/2}`.
    pub root_moment_sum: f64,
    pub epsilon: f64,
    pub q: f64,
}

/// Rescales a family of measures by `c_n = c₀·4^{−n}` so that
/// `Σ_n √(c_n μ_n(𝕋)) = ε/4 < ε/2`, leaving every support unchanged.
pub fn rescale_for_epsilon(measures: &[CircleMeasure], epsilon: f64, q: f64) -> Result<Rescaling> {
    if measures.is_empty() {
        return Err(Error::param("rescaling needs at least one measure"));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::param(format!("ε must be positive and finite, got {epsilon}")));
    }
    if !(q > 3.0) || !q.is_finite() {
        return Err(Error::param(format!("q must exceed 3, got {q}")));
    }
    if let Some(i) = measures.iter().position(CircleMeasure::is_empty) {
        return Err(Error::InvalidMeasure(format!("block {i} is empty")));
    }
    // Σ_n √(c₀ 4^{−n} μ_n(𝕋)) = √c₀ · Σ_n 2^{−n} √μ_n(𝕋)
    let envelope = sum_f64(
        measures
            .iter()
            .enumerate()
            .map(|(i, m)| 0.5f64.powi(i as i32 + 1) * m.total_mass().sqrt()),
    );
    let root_c0 = epsilon / (4.0 * envelope);
    let c0 = root_c0 * root_c0;
    let factors: Vec<f64> = (0..measures.len())
        .map(|i| c0 * 0.25f64.powi(i as i32 + 1))
        .collect();
    let scaled = measures
        .iter()
        .zip(&factors)
        .map(|(m, &c)| m.scaled(c))
        .collect::<Result<Vec<_>>>()?;
    let root_mass_sum = sum_f64(scaled.iter().map(|m| m.total_mass().sqrt()));
    let root_moment_sum = scaled
        .iter()
        .map(|m| m.moment_integral(q).map(f64::sqrt))
        .collect::<Result<Vec<_>>>()
        .map(sum_f64)?;
    Ok(Rescaling {
        measures: scaled,
        factors,
        root_mass_sum,
        root_moment_sum,
        epsilon,
        q,
    })
}

/// Shape constraints for randomly drawn test measures.
#[derive(Debug, Clone, Copy)]
pub struct RandomMeasureSpec {
    pub atoms: usize,
    /// Minimal angular distance of any atom from the point 1.
    pub min_angle_from_one: f64,
    /// Minimal angular separation between atoms.
    pub min_separation: f64,
    pub weight_range: (f64, f64),
}

impl Default for RandomMeasureSpec {
    fn default() -> Self {
        Self {
            atoms: 4,
            min_angle_from_one: 0.3,
            min_separation: 0.2,
            weight_range: (0.1, 1.0),
        }
    }
}

/// Draws an atomic measure by rejection sampling of atom angles.
pub fn random_circle_measure<R: Rng + ?Sized>(rng: &mut R, spec: &RandomMeasureSpec) -> Result<CircleMeasure> {
    let mut angles: Vec<f64> = Vec::with_capacity(spec.atoms);
    let mut attempts = 0;
    while angles.len() < spec.atoms {
        attempts += 1;
        if attempts > 100_000 {
            return Err(Error::param("cannot place atoms with the requested separation"));
        }
        let phi = rng.gen_range(spec.min_angle_from_one..(2.0 * PI - spec.min_angle_from_one));
        let ok = angles.iter().all(|&a| {
            let d = (a - phi).abs();
            d.min(2.0 * PI - d) >= spec.min_separation
        });
        if ok {
            angles.push(phi);
        }
    }
    let (lo, hi) = spec.weight_range;
    CircleMeasure::new(angles.into_iter().map(|phi| {
        let w = if hi > lo { rng.gen_range(lo..hi) } else { lo };
        (C64::from_polar(1.0, phi), w)
    }))
}
