//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, Schur, SymmetricEigen};

use crate::error::{Error, Result};
use crate::C64;

pub type CMatrix = DMatrix<C64>;

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(h: &CMatrix) -> Vec<f64> {
    if h.nrows() == 0 {
        return Vec::new();
    }
    let sym = symmetrize(h);
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `(H + H*)/2`, removing round-off asymmetry before a Hermitian solver.
pub fn symmetrize(h: &CMatrix) -> CMatrix {
    (h + h.adjoint()) * C64::new(0.5, 0.0)
}

/// Principal square root of a Hermitian positive semidefinite matrix;
/// negative round-off eigenvalues are clamped to zero.
pub fn psd_sqrt(h: &CMatrix) -> CMatrix {
    if h.nrows() == 0 {
        return h.clone();
    }
    let eig = SymmetricEigen::new(symmetrize(h));
    let roots = eig.eigenvalues.map(|l| C64::new(l.max(0.0).sqrt(), 0.0));
    let v = &eig.eigenvectors;
    v * CMatrix::from_diagonal(&roots) * v.adjoint()
}

/// Singular values (descending) of the finite-rank operator `Σ u_n ⊗ v_n`
/// given the Gram matrices of the families `{u_n}` and `{v_n}`.
pub fn low_rank_singular_values(gram_u: &CMatrix, gram_v: &CMatrix) -> Vec<f64> {
    let root = psd_sqrt(gram_u);
    // gram[(j, k)] = ⟨x_k, x_j⟩, i.e. U*U and V*V; the squared singular
    // values of UV* are the eigenvalues of Gu·Gv ~ root·Gv·root.
    let m = &root * gram_v * &root;
    let mut s: Vec<f64> = hermitian_eigenvalues(&m)
        .into_iter()
        .map(|l| l.max(0.0).sqrt())
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Eigenvalues of a general complex square matrix via the Schur form.
pub fn general_eigenvalues(m: &CMatrix) -> Result<Vec<C64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), 1e-15, 10_000)
        .ok_or_else(|| Error::Linalg("Schur decomposition did not converge".into()))?;
    schur
        .eigenvalues()
        .map(|v| v.iter().copied().collect())
        .ok_or_else(|| Error::Linalg("Schur form not triangular".into()))
}

/// Singular values of a dense matrix by full SVD, descending.
pub fn dense_singular_values(a: &CMatrix) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Singular values of a dense matrix of low numerical rank.
///
/// A column-pivoted Gram–Schmidt pass (with re-orthogonalization) extracts an
/// orthonormal basis `Q` of the range, stopping once every residual column
/// norm drops below `rel_tol·‖A‖_F`; the singular values of `Q*A` are then
/// those of `A` up to the discarded residual.
pub fn range_singular_values(a: &CMatrix, rel_tol: f64) -> Vec<f64> {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let fro = a.norm();
    if fro == 0.0 {
        return Vec::new();
    }
    let mut residual = a.clone();
    let mut basis: Vec<nalgebra::DVector<C64>> = Vec::new();
    let limit = rows.min(cols);
    while basis.len() < limit {
        let (best, best_norm) = (0..cols)
            .map(|j| (j, residual.column(j).norm()))
            .fold((0, 0.0f64), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best_norm <= rel_tol * fro {
            break;
        }
        let mut q = residual.column(best).into_owned();
        for _ in 0..2 {
            for b in &basis {
                let c = b.dotc(&q);
                q -= b * c;
            }
        }
        let qn = q.norm();
        if qn == 0.0 {
            break;
        }
        q /= C64::new(qn, 0.0);
        for j in 0..cols {
            let c = q.dotc(&residual.column(j));
            let col = residual.column(j) - &q * c;
            residual.set_column(j, &col);
        }
        basis.push(q);
    }
    if basis.is_empty() {
        return Vec::new();
    }
    let q = CMatrix::from_columns(&basis);
    let b = q.adjoint() * a;
    let bbh = &b * b.adjoint();
    let mut s: Vec<f64> = hermitian_eigenvalues(&bbh)
        .into_iter()
        .map(|l| l.max(0.0).sqrt())
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Greedy one-to-one matching of `found` against `expected`; returns the
/// largest matched distance, or `None` when the counts differ.
pub fn match_multisets(found: &[C64], expected: &[C64]) -> Option<f64> {
    if found.len() != expected.len() {
        return None;
    }
    let mut used = vec![false; found.len()];
    let mut worst = 0.0f64;
    for e in expected {
        let (idx, dist) = found
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, f)| (i, (f - e).norm()))
            .fold((usize::MAX, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        used[idx] = true;
        worst = worst.max(dist);
    }
    Some(worst)
}
