//! Clark-measure model of perturbations of the shift semigroup.
//!
//! An atomic singular measure on the unit circle determines an inner function
//! through the Herglotz relation, a model space `K_θ = H² ⊖ θH²` with an
//! explicit orthonormal (Clark) basis, and a finite-rank perturbation `S̃` of
//! the unilateral shift whose unitary part has the measure's atoms as
//! eigenvalues. The crate evaluates every object in that construction and
//! computes Schatten norms of `S̃ − S` and of `φ_t(S̃) − φ_t(S)` by several
//! independent routes.
//!
//! Module map:
//! - [`measures`]: atomic measures on the circle and line, Cayley transport,
//!   binned sums.
//! - [`analytic`]: pointwise evaluation of θ, Θ, φ_t, ψ_t, Ω, g and the
//!   reproducing kernel at 1.
//! - [`model_ops`]: the perturbed shift, its Clark basis and finite sections.
//! - [`schatten`]: Gram-matrix spectra and norm bounds.
//! - [`experiments`]: scenario configs, report emission and the CLI driver.

pub mod analytic;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod measures;
pub mod model_ops;
pub mod quadrature;
pub mod schatten;
pub mod sum;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
