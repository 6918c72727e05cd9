//! Schmidt decompositions across arbitrary cuts, degeneracy blocks of the
//! Schmidt spectrum, and detection of Schmidt-decomposable multipartite states.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{complete_basis, CMatrix, C64};
use crate::tensor::{matricize, unravel, Bipartition, Matricization, StateVector};

/// Schmidt coefficients at or below this value are dropped.
pub const RANK_TOL: f64 = 1e-10;
/// Relative gap below which consecutive coefficients share a block.
pub const GROUP_TOL: f64 = 1e-8;
/// Bound on the second singular value of a cofactor for it to count as a product.
pub const PRODUCT_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct SchmidtDecomposition {
    /// Descending, strictly positive.
    pub coeffs: Vec<f64>,
    /// Orthonormal columns on the left factor, one per coefficient.
    pub left_basis: CMatrix,
    /// Orthonormal columns on the right factor, one per coefficient.
    pub right_basis: CMatrix,
    pub cut: Bipartition,
    dims: Vec<usize>,
}

impl SchmidtDecomposition {
    pub fn rank(&self) -> usize {
        self.coeffs.len()
    }

    pub fn party_dims(&self) -> &[usize] {
        &self.dims
    }

    /// Left basis extended to a unitary on the left factor.
    pub fn left_frame(&self) -> CMatrix {
        complete_basis(&self.left_basis)
    }

    /// Right basis extended to a unitary on the right factor.
    pub fn right_frame(&self) -> CMatrix {
        complete_basis(&self.right_basis)
    }

    /// Squared coefficients, i.e. the nonzero spectrum of either reduced state.
    pub fn spectrum(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c * c).collect()
    }
}

/// Multiplies column `k` of `left` by `e^{-iθ}` and of `right` by `e^{iθ}` so the
/// largest-magnitude entry of the left column is real positive.
fn canonicalize_phase(left: &mut CMatrix, right: &mut CMatrix, k: usize) {
    let col = left.column(k);
    let max = col.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    if max == 0.0 {
        return;
    }
    // first entry within rounding of the maximum, so ties break by index
    let pivot = col.iter().position(|z| z.norm() >= max * (1.0 - 1e-10)).unwrap_or(0);
    let phase = C64::from_polar(1.0, col[pivot].arg());
    left.column_mut(k).iter_mut().for_each(|z| *z /= phase);
    right.column_mut(k).iter_mut().for_each(|z| *z *= phase);
}

pub fn schmidt_decompose(state: &StateVector, cut: &Bipartition, rank_tol: f64) -> Result<SchmidtDecomposition> {
    let m = matricize(state, cut)?.matrix;
    let svd = crate::linalg::svd(&m)?;
    let (u, v_t) = (&svd.u, &svd.v_t);
    let kept: Vec<usize> = (0..svd.singular_values.len()).filter(|&k| svd.singular_values[k] > rank_tol).collect();

    let coeffs = kept.iter().map(|&k| svd.singular_values[k]).collect();
    let mut left = CMatrix::from_columns(&kept.iter().map(|&k| u.column(k)).collect::<Vec<_>>());
    // state = Σ λ |l⟩|r⟩ with r = row k of V†, without conjugation
    let mut right =
        CMatrix::from_columns(&kept.iter().map(|&k| v_t.row(k).transpose()).collect::<Vec<_>>());
    for k in 0..kept.len() {
        canonicalize_phase(&mut left, &mut right, k);
    }
    Ok(SchmidtDecomposition {
        coeffs,
        left_basis: left,
        right_basis: right,
        cut: cut.clone(),
        dims: state.dims().to_vec(),
    })
}

/// Rebuilds `Σ λ |left⟩|right⟩` in the original party ordering.
pub fn reconstruct(sd: &SchmidtDecomposition) -> StateVector {
    let lambda = CMatrix::from_diagonal(&DVector::from_iterator(
        sd.rank(),
        sd.coeffs.iter().map(|&c| C64::new(c, 0.0)),
    ));
    let matrix = &sd.left_basis * lambda * sd.right_basis.transpose();
    Matricization::from_matrix(matrix, sd.dims.clone(), &sd.cut)
        .expect("decomposition shapes match its cut")
        .to_state()
}

/// Partition of a descending spectrum into runs of equal values.
#[derive(Clone, Debug, PartialEq)]
pub struct DegeneracyBlocks {
    pub sizes: Vec<usize>,
    /// Strictly descending; a trailing `0.0` marks the kernel block.
    pub values: Vec<f64>,
}

impl DegeneracyBlocks {
    pub fn total(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Block label for every index of the ambient space.
    pub fn labels(&self) -> Vec<usize> {
        self.sizes.iter().enumerate().flat_map(|(b, &n)| std::iter::repeat_n(b, n)).collect()
    }

    pub fn ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.sizes
            .iter()
            .map(|&n| {
                let r = start..start + n;
                start += n;
                r
            })
            .collect()
    }
}

pub fn degeneracy_blocks(coeffs: &[f64], ambient_dim: usize, group_tol: f64) -> Result<DegeneracyBlocks> {
    if coeffs.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::UnsortedInput);
    }
    if ambient_dim < coeffs.len() {
        return Err(Error::DimensionMismatch { expected: coeffs.len(), found: ambient_dim });
    }
    let mut sizes: Vec<usize> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for (i, &c) in coeffs.iter().enumerate() {
        let joins = i > 0 && {
            let prev = coeffs[i - 1];
            prev == c || (prev - c) < group_tol * prev.abs()
        };
        if joins {
            *sizes.last_mut().expect("nonempty") += 1;
        } else {
            sizes.push(1);
            values.push(c);
        }
    }
    let kernel = ambient_dim - coeffs.len();
    if kernel > 0 {
        match values.last() {
            Some(&0.0) => *sizes.last_mut().expect("nonempty") += kernel,
            _ => {
                sizes.push(kernel);
                values.push(0.0);
            }
        }
    }
    Ok(DegeneracyBlocks { sizes, values })
}

/// `Σ_ℓ λ_ℓ ⊗_P |ℓ_P⟩` with orthonormal vectors on every party.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiSchmidtDecomposition {
    pub coeffs: Vec<f64>,
    /// Per party, a `dim × rank` matrix whose columns are the vectors `|ℓ_P⟩`.
    pub bases: Vec<CMatrix>,
    dims: Vec<usize>,
}

impl MultiSchmidtDecomposition {
    pub fn rank(&self) -> usize {
        self.coeffs.len()
    }

    pub fn party_dims(&self) -> &[usize] {
        &self.dims
    }

    /// Party `p`'s vectors completed to a unitary frame.
    pub fn frame(&self, party: usize) -> CMatrix {
        complete_basis(&self.bases[party])
    }

    pub fn to_state(&self) -> StateVector {
        let total: usize = self.dims.iter().product();
        let mut idx = vec![0; self.dims.len()];
        let amps = (0..total)
            .map(|f| {
                unravel(f, &self.dims, &mut idx);
                (0..self.rank())
                    .map(|l| {
                        self.bases.iter().zip(&idx).fold(C64::new(self.coeffs[l], 0.0), |acc, (b, &i)| acc * b[(i, l)])
                    })
                    .sum()
            })
            .collect();
        StateVector::from_raw(self.dims.clone(), amps)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WitnessKind {
    /// The cofactor of a Schmidt vector is entangled; the value is its second
    /// singular value across the reported party.
    EntangledCofactor,
    /// The factors on one party are not orthonormal; the value is the Gram residual.
    NonOrthogonalFactors,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecomposabilityWitness {
    pub kind: WitnessKind,
    /// Index ℓ of the offending cofactor (0 for [`WitnessKind::NonOrthogonalFactors`]).
    pub cofactor: usize,
    pub party: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Decomposability {
    Decomposable(MultiSchmidtDecomposition),
    Infeasible(DecomposabilityWitness),
}

impl Decomposability {
    pub fn is_decomposable(&self) -> bool {
        matches!(self, Decomposability::Decomposable(_))
    }
}

/// Splits a unit vector over `dims` into a product of one factor per party.
/// On failure returns the offset of the party where the split failed and the
/// second singular value at that point.
fn product_factors(v: &DVector<C64>, dims: &[usize], tol: f64) -> std::result::Result<Vec<DVector<C64>>, (usize, f64)> {
    if dims.len() == 1 {
        return Ok(vec![v.clone()]);
    }
    let rest: usize = dims[1..].iter().product();
    // row-major reshape: v[i * rest + j] = M[i, j]
    let m = CMatrix::from_fn(dims[0], rest, |i, j| v[i * rest + j]);
    // a failed decomposition surfaces as a non-finite witness
    let svd = crate::linalg::svd(&m).map_err(|_| (0, f64::NAN))?;
    let second = svd.singular_values.get(1).copied().unwrap_or(0.0);
    if second >= tol {
        return Err((0, second));
    }
    let mut u = svd.u.column(0).into_owned();
    let max = u.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    let pivot = u.iter().position(|z| z.norm() >= max * (1.0 - 1e-10)).unwrap_or(0);
    let phase = C64::from_polar(1.0, u[pivot].arg());
    u.iter_mut().for_each(|z| *z /= phase);
    let w = (u.adjoint() * &m).transpose();
    let mut tail = product_factors(&w, &dims[1..], tol).map_err(|(p, s)| (p + 1, s))?;
    let mut out = vec![u];
    out.append(&mut tail);
    Ok(out)
}

/// Deterministic pseudo-random unit vector used to lift degeneracies.
fn probe_vector(dim: usize, party: usize, attempt: u64) -> DVector<C64> {
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_0000 + attempt);
    rng.set_stream(party as u64);
    let v = DVector::from_fn(dim, |_, _| {
        C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
    });
    let n = v.norm();
    v.unscale(n)
}

/// Rotates the left Schmidt vectors of a degenerate block so that, for
/// decomposable states, each cofactor is a product. Contracting every party
/// after the first right-hand party with generic vectors turns the block into
/// a bipartite matrix with generically distinct singular values, whose left
/// singular vectors are the product-compatible basis.
fn refine_degenerate_block(left: &mut CMatrix, right: &mut CMatrix, block: std::ops::Range<usize>, rest_dims: &[usize]) {
    let k = block.len();
    let d_left = left.nrows();
    let u_blk = left.columns(block.start, k).into_owned();
    let r_blk = right.columns(block.start, k).into_owned();
    let t = &u_blk * r_blk.transpose();
    let d_first = rest_dims[0];

    let mut best: Option<(f64, CMatrix)> = None;
    for attempt in 0..6 {
        let probes: Vec<DVector<C64>> =
            rest_dims.iter().enumerate().skip(1).map(|(p, &d)| probe_vector(d, p, attempt)).collect();
        let mut contracted = CMatrix::zeros(d_left, d_first);
        let mut idx = vec![0; rest_dims.len()];
        for j in 0..t.ncols() {
            unravel(j, rest_dims, &mut idx);
            let w: C64 = probes.iter().zip(&idx[1..]).map(|(x, &i)| x[i]).product();
            for a in 0..d_left {
                contracted[(a, idx[0])] += t[(a, j)] * w;
            }
        }
        let Ok(svd) = crate::linalg::svd(&contracted) else { continue };
        if svd.singular_values.len() < k {
            break;
        }
        let s: Vec<f64> = svd.singular_values[..k].to_vec();
        let top = s[0].max(f64::MIN_POSITIVE);
        let mut gap = s[k - 1] / top;
        for w in s.windows(2) {
            gap = gap.min((w[0] - w[1]) / top);
        }
        let cols = svd.u.columns(0, k).into_owned();
        if best.as_ref().is_none_or(|(g, _)| gap > *g) {
            best = Some((gap, cols));
        }
        if gap > 1e-3 {
            break;
        }
    }
    let Some((_, a_new)) = best else { return };
    // the new vectors must lie in the block's span; project to be safe against
    // rank-deficient contractions, then re-orthonormalize
    let projected = &u_blk * (u_blk.adjoint() * &a_new);
    let q = projected.qr().q();
    let r_new = t.transpose() * q.map(|z| z.conj());
    left.columns_mut(block.start, k).copy_from(&q);
    right.columns_mut(block.start, k).copy_from(&r_new);
    for c in block {
        canonicalize_phase(left, right, c);
    }
}

pub fn check_schmidt_decomposable(state: &StateVector, tol: f64) -> Result<Decomposability> {
    let n = state.num_parties();
    let dims = state.dims().to_vec();
    if n == 1 {
        let v = CMatrix::from_column_slice(dims[0], 1, state.amps());
        return Ok(Decomposability::Decomposable(MultiSchmidtDecomposition { coeffs: vec![1.0], bases: vec![v], dims }));
    }
    let sd = schmidt_decompose(state, &Bipartition::new(vec![0], n)?, RANK_TOL)?;
    if n == 2 {
        return Ok(Decomposability::Decomposable(MultiSchmidtDecomposition {
            coeffs: sd.coeffs.clone(),
            bases: vec![sd.left_basis, sd.right_basis],
            dims,
        }));
    }

    let rest_dims = &dims[1..];
    let mut left = sd.left_basis.clone();
    let mut right = sd.right_basis.clone();
    let blocks = degeneracy_blocks(&sd.coeffs, sd.rank(), GROUP_TOL)?;
    for range in blocks.ranges() {
        if range.len() > 1 {
            refine_degenerate_block(&mut left, &mut right, range, rest_dims);
        }
    }

    let rank = sd.rank();
    let mut factors: Vec<Vec<DVector<C64>>> = vec![Vec::with_capacity(rank); n - 1];
    for l in 0..rank {
        let cofactor = right.column(l).into_owned();
        match product_factors(&cofactor, rest_dims, tol) {
            Ok(fs) => fs.into_iter().enumerate().for_each(|(p, f)| factors[p].push(f)),
            Err((offset, value)) => {
                return Ok(Decomposability::Infeasible(DecomposabilityWitness {
                    kind: WitnessKind::EntangledCofactor,
                    cofactor: l,
                    party: offset + 1,
                    value,
                }))
            }
        }
    }

    let mut bases = vec![left];
    for (p, fs) in factors.into_iter().enumerate() {
        let b = CMatrix::from_columns(&fs);
        let residual = crate::linalg::orthonormality_residual(&b);
        if residual >= tol {
            return Ok(Decomposability::Infeasible(DecomposabilityWitness {
                kind: WitnessKind::NonOrthogonalFactors,
                cofactor: 0,
                party: p + 1,
                value: residual,
            }));
        }
        bases.push(b);
    }
    Ok(Decomposability::Decomposable(MultiSchmidtDecomposition { coeffs: sd.coeffs, bases, dims }))
}
