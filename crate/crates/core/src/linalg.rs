//! Small dense complex linear-algebra helpers shared by the simulation modules.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Thin SVD `m = u · diag(singular_values) · v_t` with `k = min(rows, cols)`
/// singular values in descending order.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: CMatrix,
    pub singular_values: Vec<f64>,
    pub v_t: CMatrix,
}

fn to_faer(m: &CMatrix) -> faer::Mat<C64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, C64>) -> CMatrix {
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

// nalgebra's SVD can return an inaccurate factorization when the
// bidiagonal form has a vanishing trailing entry (exactly rank-deficient
// input), so decompositions go through faer.
pub fn svd(m: &CMatrix) -> Result<Svd> {
    let k = m.nrows().min(m.ncols());
    if k == 0 {
        return Ok(Svd { u: CMatrix::zeros(m.nrows(), 0), singular_values: Vec::new(), v_t: CMatrix::zeros(0, m.ncols()) });
    }
    let f = to_faer(m)
        .thin_svd()
        .map_err(|e| Error::NumericalFailure(format!("SVD did not converge: {e:?}")))?;
    let singular_values = f.S().column_vector().iter().map(|z| z.re).collect();
    Ok(Svd { u: from_faer(f.U()), singular_values, v_t: from_faer(f.V()).adjoint() })
}

pub fn singular_values(m: &CMatrix) -> Result<Vec<f64>> {
    if m.is_empty() {
        return Ok(Vec::new());
    }
    to_faer(m).singular_values().map_err(|e| Error::NumericalFailure(format!("SVD did not converge: {e:?}")))
}

/// Largest singular value; `NaN` if the decomposition fails.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    match singular_values(m) {
        Ok(s) => s.first().copied().unwrap_or(0.0),
        Err(_) => f64::NAN,
    }
}

/// Eigenvalues of a Hermitian matrix, sorted descending; `NaN` entries if
/// the decomposition fails.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let herm = (m + m.adjoint()).scale(0.5);
    match to_faer(&herm).self_adjoint_eigenvalues(faer::Side::Lower) {
        Ok(mut vals) => {
            vals.sort_by(|a, b| b.total_cmp(a));
            vals
        }
        Err(_) => vec![f64::NAN; m.nrows()],
    }
}

/// `‖B†B − I‖₂` for a set of column vectors.
pub fn orthonormality_residual(basis: &CMatrix) -> f64 {
    let gram = basis.adjoint() * basis;
    spectral_norm(&(gram - identity(basis.ncols())))
}

pub fn unitarity_residual(u: &CMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    orthonormality_residual(u)
}

/// `‖Σ O†O − I‖₂` for a list of square operators of equal size.
pub fn completeness_residual(ops: &[CMatrix]) -> f64 {
    let Some(first) = ops.first() else {
        return f64::INFINITY;
    };
    let n = first.ncols();
    let mut acc = CMatrix::zeros(n, n);
    for op in ops {
        acc += op.adjoint() * op;
    }
    spectral_norm(&(acc - identity(n)))
}

/// Extends orthonormal columns to a full orthonormal basis of the ambient
/// space. The original columns come first; the completion is built by
/// Gram-Schmidt over the computational basis, always taking the standard
/// vector with the largest remaining component.
pub fn complete_basis(basis: &CMatrix) -> CMatrix {
    let dim = basis.nrows();
    let mut cols: Vec<nalgebra::DVector<C64>> =
        basis.column_iter().map(|c| c.into_owned()).collect();
    while cols.len() < dim {
        let mut best: Option<(f64, nalgebra::DVector<C64>)> = None;
        for k in 0..dim {
            let mut v = nalgebra::DVector::<C64>::zeros(dim);
            v[k] = ONE;
            // two passes keep the completion orthogonal to working precision
            for _ in 0..2 {
                for q in &cols {
                    let proj = q.dotc(&v);
                    v -= q * proj;
                }
            }
            let n = v.norm();
            if best.as_ref().is_none_or(|(bn, _)| n > *bn + 1e-12) {
                best = Some((n, v));
            }
        }
        let (n, v) = best.expect("dim > 0");
        cols.push(v.unscale(n));
    }
    CMatrix::from_columns(&cols)
}

pub fn direct_sum(blocks: &[CMatrix]) -> CMatrix {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMatrix::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
        off += b.nrows();
    }
    out
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_of_rank_one_matrix_reconstructs() {
        // bidiagonalizes to a vanishing trailing diagonal entry
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[
                c(0.0034238196330166615, 0.09906133824628316),
                c(-0.44016859525677027, 0.6153787571126215),
                c(-0.07543248103370437, -0.03685959305549112),
                c(-0.28497328422249635, -0.5740010977798825),
            ],
        );
        let f = svd(&m).unwrap();
        let sigma = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(2, f.singular_values.iter().map(|&s| c(s, 0.0))));
        assert!(max_abs(&(&f.u * sigma * &f.v_t - &m)) < 1e-14);
        assert!((f.singular_values[0] - 1.0).abs() < 1e-12);
        assert!(f.singular_values[1] < 1e-12);
    }

    #[test]
    fn completion_of_single_vector_is_unitary() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = CMatrix::from_column_slice(3, 1, &[c(s, 0.0), c(0.0, s), ZERO]);
        let full = complete_basis(&v);
        assert_eq!(full.ncols(), 3);
        assert!(unitarity_residual(&full) < 1e-14);
        assert_eq!(full.column(0), v.column(0));
    }

    #[test]
    fn completeness_of_projectors() {
        let p0 = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]);
        let p1 = CMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, ONE]);
        assert!(completeness_residual(&[p0.clone(), p1]) < 1e-15);
        assert!((completeness_residual(&[p0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(-3.0, 0.0), c(0.5, 0.0)]));
        assert!((spectral_norm(&d) - 3.0).abs() < 1e-14);
        assert_eq!(hermitian_eigenvalues(&d), vec![0.5, -3.0]);
    }
}
