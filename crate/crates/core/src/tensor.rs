//! Pure-state vectors over an ordered list of parties, local operators and
//! matricizations.
//!
//! Amplitudes are stored row-major with the *last* party's index varying
//! fastest. Every matricization and file format in the crate inherits this
//! convention.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64, ZERO};

/// Normalization tolerance used by [`StateVector::new`].
pub const NORM_TOL: f64 = 1e-12;
/// Default tolerance for arithmetic comparisons.
pub const ARITH_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    dims: Vec<usize>,
    amps: Vec<C64>,
}

impl StateVector {
    /// Validated state with the default normalization tolerance.
    pub fn new(dims: Vec<usize>, amps: Vec<C64>) -> Result<Self> {
        Self::from_amplitudes(dims, amps, NORM_TOL, false)
    }

    /// Validates lengths, finiteness and normalization. With `renormalize`
    /// set, any nonzero vector is rescaled to unit norm instead of rejected.
    pub fn from_amplitudes(
        dims: Vec<usize>,
        amps: Vec<C64>,
        norm_tol: f64,
        renormalize: bool,
    ) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidParameter(
                "party dimensions must be positive and nonempty".into(),
            ));
        }
        let expected: usize = dims.iter().product();
        if amps.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: amps.len() });
        }
        if let Some(index) = amps.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFiniteAmplitude { index });
        }
        let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() <= norm_tol {
            return Ok(Self { dims, amps });
        }
        if renormalize && norm > 0.0 {
            let amps = amps.into_iter().map(|z| z / norm).collect();
            return Ok(Self { dims, amps });
        }
        Err(Error::NotNormalized { norm })
    }

    /// Unchecked constructor; used for unnormalized intermediate results.
    pub(crate) fn from_raw(dims: Vec<usize>, amps: Vec<C64>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), amps.len());
        Self { dims, amps }
    }

    /// Computational basis state `|i_0 i_1 ... ⟩`.
    pub fn basis(dims: Vec<usize>, index: &[usize]) -> Result<Self> {
        if index.len() != dims.len() {
            return Err(Error::DimensionMismatch { expected: dims.len(), found: index.len() });
        }
        if index.iter().zip(&dims).any(|(i, d)| i >= d) {
            return Err(Error::InvalidParameter("basis index out of range".into()));
        }
        let mut amps = vec![ZERO; dims.iter().product()];
        amps[ravel(index, &dims)] = C64::new(1.0, 0.0);
        Self::new(dims, amps)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn num_parties(&self) -> usize {
        self.dims.len()
    }

    pub fn amp(&self, index: &[usize]) -> C64 {
        self.amps[ravel(index, &self.dims)]
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Returns the state rescaled to unit norm, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        (n > 0.0).then(|| Self::from_raw(self.dims.clone(), self.amps.iter().map(|z| z / n).collect()))
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch { expected: self.amps.len(), found: other.amps.len() });
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self::from_raw(self.dims.clone(), self.amps.iter().map(|z| z * factor).collect())
    }

    /// Same amplitudes viewed under a different party split. Panics if the
    /// total dimension changes.
    pub fn reshaped(self, dims: Vec<usize>) -> Self {
        assert_eq!(dims.iter().product::<usize>(), self.amps.len(), "reshape must preserve the total dimension");
        Self { dims, amps: self.amps }
    }
}

pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

pub(crate) fn ravel(index: &[usize], dims: &[usize]) -> usize {
    index.iter().zip(dims).fold(0, |acc, (&i, &d)| acc * d + i)
}

pub(crate) fn unravel(mut flat: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = flat % dims[k];
        flat /= dims[k];
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalOperator {
    pub party: usize,
    pub matrix: CMatrix,
}

impl LocalOperator {
    pub fn new(party: usize, matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter("operator has non-finite entries".into()));
        }
        Ok(Self { party, matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Split of the parties into two nonempty disjoint groups. The order of each
/// group is the order in which its indices are merged when matricizing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bipartition {
    left: Vec<usize>,
    right: Vec<usize>,
}

impl Bipartition {
    /// `left` in the given order, the complement ascending on the right.
    pub fn new(left: Vec<usize>, parties: usize) -> Result<Self> {
        let right = (0..parties).filter(|p| !left.contains(p)).collect();
        Self::from_parts(left, right, parties)
    }

    pub fn from_parts(left: Vec<usize>, right: Vec<usize>, parties: usize) -> Result<Self> {
        if left.is_empty() || right.is_empty() {
            return Err(Error::InvalidBipartition("both sides must be nonempty".into()));
        }
        let mut seen = vec![false; parties];
        for &p in left.iter().chain(&right) {
            if p >= parties {
                return Err(Error::InvalidBipartition(format!("party {p} out of range")));
            }
            if seen[p] {
                return Err(Error::InvalidBipartition(format!("party {p} appears twice")));
            }
            seen[p] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidBipartition("sides do not cover all parties".into()));
        }
        Ok(Self { left, right })
    }

    /// Parses `"0|1,2"`; an omitted right side means the complement.
    pub fn parse(text: &str, parties: usize) -> Result<Self> {
        let parse_side = |s: &str| -> Result<Vec<usize>> {
            s.split(',')
                .filter(|t| !t.trim().is_empty())
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::InvalidBipartition(format!("bad party index {t:?}")))
                })
                .collect()
        };
        match text.split_once('|') {
            Some((l, r)) if !r.trim().is_empty() => Self::from_parts(parse_side(l)?, parse_side(r)?, parties),
            Some((l, _)) => Self::new(parse_side(l)?, parties),
            None => Self::new(parse_side(text)?, parties),
        }
    }

    pub fn left(&self) -> &[usize] {
        &self.left
    }

    pub fn right(&self) -> &[usize] {
        &self.right
    }

    pub fn parties(&self) -> usize {
        self.left.len() + self.right.len()
    }
}

impl fmt::Display for Bipartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[usize]| v.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",");
        write!(f, "{}|{}", join(&self.left), join(&self.right))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Matricization {
    pub matrix: CMatrix,
    pub row_parties: Vec<usize>,
    pub col_parties: Vec<usize>,
    dims: Vec<usize>,
}

impl Matricization {
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn party_dims(&self) -> &[usize] {
        &self.dims
    }

    /// Inverse of [`matricize`]; the result is not renormalized.
    pub fn to_state(&self) -> StateVector {
        let map = row_col_map(&self.dims, &self.row_parties, &self.col_parties);
        let amps = map.iter().map(|&(r, c)| self.matrix[(r, c)]).collect();
        StateVector::from_raw(self.dims.clone(), amps)
    }

    /// Builds a matricization from a matrix laid out for the given cut.
    pub fn from_matrix(matrix: CMatrix, dims: Vec<usize>, cut: &Bipartition) -> Result<Self> {
        let r: usize = cut.left().iter().map(|&p| dims[p]).product();
        let c: usize = cut.right().iter().map(|&p| dims[p]).product();
        if cut.parties() != dims.len() {
            return Err(Error::InvalidBipartition("cut does not match party count".into()));
        }
        if matrix.nrows() != r || matrix.ncols() != c {
            return Err(Error::DimensionMismatch { expected: r * c, found: matrix.len() });
        }
        Ok(Self { matrix, row_parties: cut.left().to_vec(), col_parties: cut.right().to_vec(), dims })
    }
}

/// For each flat amplitude index, its (row, col) position in the matricization.
fn row_col_map(dims: &[usize], rows: &[usize], cols: &[usize]) -> Vec<(usize, usize)> {
    let total: usize = dims.iter().product();
    let mut idx = vec![0; dims.len()];
    (0..total)
        .map(|f| {
            unravel(f, dims, &mut idx);
            let r = rows.iter().fold(0, |acc, &p| acc * dims[p] + idx[p]);
            let c = cols.iter().fold(0, |acc, &p| acc * dims[p] + idx[p]);
            (r, c)
        })
        .collect()
}

pub fn matricize(state: &StateVector, cut: &Bipartition) -> Result<Matricization> {
    if cut.parties() != state.num_parties() {
        return Err(Error::InvalidBipartition(format!(
            "cut covers {} parties, state has {}",
            cut.parties(),
            state.num_parties()
        )));
    }
    let dims = state.dims();
    let r: usize = cut.left().iter().map(|&p| dims[p]).product();
    let c: usize = cut.right().iter().map(|&p| dims[p]).product();
    let mut matrix = CMatrix::zeros(r, c);
    for (f, (row, col)) in row_col_map(dims, cut.left(), cut.right()).into_iter().enumerate() {
        matrix[(row, col)] = state.amps()[f];
    }
    Ok(Matricization {
        matrix,
        row_parties: cut.left().to_vec(),
        col_parties: cut.right().to_vec(),
        dims: dims.to_vec(),
    })
}

/// Result of applying a local operator: the raw (possibly subnormalized)
/// vector and its norm.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalAction {
    pub state: StateVector,
    pub norm: f64,
}

pub fn apply_local(state: &StateVector, op: &LocalOperator) -> Result<LocalAction> {
    let p = op.party;
    if p >= state.num_parties() {
        return Err(Error::InvalidParameter(format!("party {p} out of range")));
    }
    let d = state.dims()[p];
    if op.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: op.dim() });
    }
    let inner: usize = state.dims()[p + 1..].iter().product();
    let outer: usize = state.dims()[..p].iter().product();
    let src = state.amps();
    let mut out = vec![ZERO; src.len()];
    for o in 0..outer {
        let base = o * d * inner;
        for k in 0..d {
            for j in 0..d {
                let m = op.matrix[(k, j)];
                if m == ZERO {
                    continue;
                }
                for i in 0..inner {
                    out[base + k * inner + i] += m * src[base + j * inner + i];
                }
            }
        }
    }
    let state = StateVector::from_raw(state.dims().to_vec(), out);
    let norm = state.norm();
    Ok(LocalAction { state, norm })
}

/// `1 − |⟨s1|s2⟩|`, clamped to `[0, 1]`.
pub fn phase_invariant_distance(s1: &StateVector, s2: &StateVector) -> Result<f64> {
    let overlap = s1.inner(s2)?.norm();
    Ok((1.0 - overlap).clamp(0.0, 1.0))
}

/// Reduced density matrix on `kept` (in the given party order).
pub fn reduced_density(state: &StateVector, kept: &[usize]) -> Result<CMatrix> {
    if kept.len() == state.num_parties() {
        let v = nalgebra::DVector::from_column_slice(permute_parties(state, kept)?.amps());
        return Ok(&v * v.adjoint());
    }
    let cut = Bipartition::new(kept.to_vec(), state.num_parties())?;
    let m = matricize(state, &cut)?.matrix;
    Ok(&m * m.adjoint())
}

/// Reorders parties so that new party `k` is old party `order[k]`.
pub fn permute_parties(state: &StateVector, order: &[usize]) -> Result<StateVector> {
    let n = state.num_parties();
    let mut seen = vec![false; n];
    if order.len() != n || order.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::InvalidParameter(format!("{order:?} is not a permutation of 0..{n}")));
    }
    let old_dims = state.dims();
    let new_dims: Vec<usize> = order.iter().map(|&p| old_dims[p]).collect();
    let old_strides = strides(old_dims);
    let mut idx = vec![0; n];
    let amps = (0..state.amps().len())
        .map(|f| {
            unravel(f, &new_dims, &mut idx);
            let src: usize = idx.iter().zip(order).map(|(&i, &p)| i * old_strides[p]).sum();
            state.amps()[src]
        })
        .collect();
    Ok(StateVector::from_raw(new_dims, amps))
}

pub fn swap_parties(state: &StateVector, i: usize, j: usize) -> Result<StateVector> {
    let n = state.num_parties();
    if i >= n || j >= n {
        return Err(Error::InvalidParameter(format!("party index out of range for {n} parties")));
    }
    if state.dims()[i] != state.dims()[j] {
        return Err(Error::DimensionMismatch { expected: state.dims()[i], found: state.dims()[j] });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.swap(i, j);
    permute_parties(state, &order)
}

/// Coordinates of `state` in per-party orthonormal frames: applies `S_P†` to
/// every party `P`. Each frame must be square unitary.
pub fn to_frame_coordinates(state: &StateVector, frames: &[CMatrix]) -> Result<StateVector> {
    if frames.len() != state.num_parties() {
        return Err(Error::DimensionMismatch { expected: state.num_parties(), found: frames.len() });
    }
    let mut out = state.clone();
    for (p, s) in frames.iter().enumerate() {
        out = apply_local(&out, &LocalOperator::new(p, s.adjoint())?)?.state;
    }
    Ok(out)
}

/// Embeds a party's axis into a larger space by zero padding.
pub fn pad_party(state: &StateVector, party: usize, new_dim: usize) -> Result<StateVector> {
    let old = state.dims()[party];
    if new_dim < old {
        return Err(Error::DimensionMismatch { expected: old, found: new_dim });
    }
    let mut dims = state.dims().to_vec();
    dims[party] = new_dim;
    let mut amps = vec![ZERO; dims.iter().product()];
    let mut idx = vec![0; dims.len()];
    for (f, &a) in state.amps().iter().enumerate() {
        unravel(f, state.dims(), &mut idx);
        amps[ravel(&idx, &dims)] = a;
    }
    Ok(StateVector::from_raw(dims, amps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, ONE};
    use std::f64::consts::FRAC_1_SQRT_2 as S;

    fn bell() -> StateVector {
        StateVector::new(vec![2, 2], vec![c(S, 0.0), ZERO, ZERO, c(S, 0.0)]).unwrap()
    }

    fn ghz() -> StateVector {
        let mut a = vec![ZERO; 8];
        a[0] = c(S, 0.0);
        a[7] = c(S, 0.0);
        StateVector::new(vec![2, 2, 2], a).unwrap()
    }

    fn pauli_x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
    }

    #[test]
    fn make_state_validation() {
        assert!(bell().norm() - 1.0 < 1e-15);
        assert!(matches!(
            StateVector::new(vec![2, 2], vec![ZERO; 4]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            StateVector::new(vec![2, 3], vec![ONE; 5]),
            Err(Error::DimensionMismatch { expected: 6, found: 5 })
        ));
        assert!(matches!(
            StateVector::new(vec![2], vec![c(f64::NAN, 0.0), ONE]),
            Err(Error::NonFiniteAmplitude { index: 0 })
        ));
        let r = StateVector::from_amplitudes(vec![2], vec![ONE, ONE], NORM_TOL, true).unwrap();
        assert!((r.amps()[0].re - S).abs() < 1e-15);
        // the zero vector cannot be renormalized
        assert!(StateVector::from_amplitudes(vec![2], vec![ZERO, ZERO], NORM_TOL, true).is_err());
    }

    #[test]
    fn matricize_ghz_and_product() {
        let m = matricize(&ghz(), &Bipartition::new(vec![0], 3).unwrap()).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 4));
        let mut expected = CMatrix::zeros(2, 4);
        expected[(0, 0)] = c(S, 0.0);
        expected[(1, 3)] = c(S, 0.0);
        assert_eq!(m.matrix, expected);

        let p = StateVector::basis(vec![2, 2], &[0, 1]).unwrap();
        let m = matricize(&p, &Bipartition::new(vec![0], 2).unwrap()).unwrap();
        assert_eq!(m.matrix, CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]));
    }

    #[test]
    fn matricize_respects_left_order() {
        // |abc⟩ = |0,1,0⟩ on dims [2,2,2]; cut (2,0)|1 puts party 2 slowest in rows
        let s = StateVector::basis(vec![2, 2, 2], &[1, 0, 0]).unwrap();
        let m = matricize(&s, &Bipartition::new(vec![2, 0], 3).unwrap()).unwrap();
        assert_eq!(m.matrix[(1, 0)], ONE);
        assert_eq!(m.to_state(), s);
    }

    #[test]
    fn invalid_bipartitions() {
        assert!(Bipartition::new(vec![], 2).is_err());
        assert!(Bipartition::new(vec![0, 1], 2).is_err());
        assert!(Bipartition::new(vec![3], 2).is_err());
        assert!(Bipartition::from_parts(vec![0, 0], vec![1], 2).is_err());
        assert!(Bipartition::from_parts(vec![0], vec![1], 3).is_err());
        let cut = Bipartition::parse("0|1,2", 3).unwrap();
        assert_eq!(cut.right(), &[1, 2]);
        assert_eq!(cut.to_string(), "0|1,2");
        assert_eq!(Bipartition::parse("1", 3).unwrap().right(), &[0, 2]);
    }

    #[test]
    fn apply_local_examples() {
        let id = LocalOperator::new(0, crate::linalg::identity(2)).unwrap();
        let out = apply_local(&bell(), &id).unwrap();
        assert_eq!(out.state, bell());
        assert!((out.norm - 1.0).abs() < 1e-15);

        let x = LocalOperator::new(1, pauli_x()).unwrap();
        let out = apply_local(&StateVector::basis(vec![2, 2], &[0, 0]).unwrap(), &x).unwrap();
        assert_eq!(out.state, StateVector::basis(vec![2, 2], &[0, 1]).unwrap());

        let p0 = LocalOperator::new(1, CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO])).unwrap();
        let out = apply_local(&bell(), &p0).unwrap();
        assert!((out.norm - S).abs() < 1e-15);
        assert!((out.state.amps()[0].re - S).abs() < 1e-15);
        assert_eq!(out.state.amps()[3], ZERO);

        let wrong = LocalOperator::new(1, crate::linalg::identity(3)).unwrap();
        assert!(matches!(apply_local(&bell(), &wrong), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn distance_examples() {
        let phased = bell().scaled(C64::from_polar(1.0, std::f64::consts::PI / 3.0));
        assert!(phase_invariant_distance(&bell(), &phased).unwrap() < 1e-15);
        let a = StateVector::basis(vec![2, 2], &[0, 0]).unwrap();
        let b = StateVector::basis(vec![2, 2], &[1, 1]).unwrap();
        assert_eq!(phase_invariant_distance(&a, &b).unwrap(), 1.0);
        let d = phase_invariant_distance(&bell(), &a).unwrap();
        assert!((d - (1.0 - S)).abs() < 1e-15);
        assert!((d - 0.29289).abs() < 1e-5);
        let other = StateVector::basis(vec![4], &[0]).unwrap();
        assert!(phase_invariant_distance(&a, &other).is_err());
    }

    #[test]
    fn reduced_density_examples() {
        let rho = reduced_density(&bell(), &[0]).unwrap();
        assert!(crate::linalg::max_abs(&(rho - crate::linalg::identity(2).scale(0.5))) < 1e-15);
        let rho = reduced_density(&StateVector::basis(vec![2, 2], &[0, 1]).unwrap(), &[0]).unwrap();
        assert_eq!(rho, CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]));
        // keeping everything gives the pure-state projector
        let full = reduced_density(&bell(), &[0, 1]).unwrap();
        assert!(crate::linalg::max_abs(&(&full * &full - &full)) < 1e-15);
        assert!((full[(0, 3)].re - 0.5).abs() < 1e-15);
        assert!(reduced_density(&bell(), &[0, 0]).is_err());
    }

    #[test]
    fn swap_examples() {
        assert_eq!(swap_parties(&ghz(), 0, 1).unwrap(), ghz());
        let s = StateVector::basis(vec![2, 2], &[0, 1]).unwrap();
        assert_eq!(swap_parties(&s, 0, 1).unwrap(), StateVector::basis(vec![2, 2], &[1, 0]).unwrap());
        let uneven = StateVector::basis(vec![2, 3], &[0, 1]).unwrap();
        assert!(matches!(swap_parties(&uneven, 0, 1), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn permute_and_pad() {
        let s = StateVector::basis(vec![2, 3, 4], &[1, 2, 3]).unwrap();
        let p = permute_parties(&s, &[2, 0, 1]).unwrap();
        assert_eq!(p.dims(), &[4, 2, 3]);
        assert_eq!(p.amp(&[3, 1, 2]), ONE);
        assert!(permute_parties(&s, &[0, 0, 1]).is_err());
        let padded = pad_party(&s, 0, 3).unwrap();
        assert_eq!(padded.dims(), &[3, 3, 4]);
        assert_eq!(padded.amp(&[1, 2, 3]), ONE);
    }
}
