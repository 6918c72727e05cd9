//! Seeded instance generators.
//!
//! Every generator draws from a ChaCha20 stream keyed by [`Seed`]: the
//! 64-bit seed value is expanded with `seed_from_u64` and the stream number
//! selects an independent sub-stream. A generator consumes exactly one
//! sub-stream, so callers that produce several objects from one seed use
//! [`Seed::child`] with a distinct index per object.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{c, direct_sum, CMatrix, C64, ZERO};
use crate::protocol_sim::MeasurementSet;
use crate::tensor::StateVector;

/// Smallest value drawn for a Schmidt coefficient before normalization.
const COEFF_FLOOR: f64 = 0.05;
/// Minimum relative gap between distinct block values.
const BLOCK_GAP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Seed {
    pub value: u64,
    pub stream: u64,
}

impl Seed {
    pub fn new(value: u64) -> Self {
        Self { value, stream: 0 }
    }

    /// The seed for the `index`-th object derived from this one.
    pub fn child(self, index: u64) -> Self {
        Self { value: self.value, stream: self.stream.wrapping_mul(0x9e37_79b9).wrapping_add(index + 1) }
    }

    pub fn rng(self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.value);
        rng.set_stream(self.stream);
        rng
    }
}

impl From<u64> for Seed {
    fn from(value: u64) -> Self {
        Self::new(value)
    }
}

fn gaussian(rng: &mut ChaCha20Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn haar_unitary(n: usize, rng: &mut ChaCha20Rng) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| gaussian(rng));
    let (q, r) = g.qr().unpack();
    let phases = DVector::from_iterator(n, (0..n).map(|i| {
        let d = r[(i, i)];
        if d.norm() > 0.0 {
            d / d.norm()
        } else {
            C64::new(1.0, 0.0)
        }
    }));
    q * CMatrix::from_diagonal(&phases)
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() {
        return Err(Error::InvalidParameter("at least one party is required".into()));
    }
    if let Some(&d) = dims.iter().find(|&&d| d < 2) {
        return Err(Error::InvalidParameter(format!("local dimension {d} is below 2")));
    }
    Ok(())
}

pub fn gen_random_state(dims: &[usize], seed: Seed) -> Result<StateVector> {
    check_dims(dims)?;
    let mut rng = seed.rng();
    let total: usize = dims.iter().product();
    let amps: Vec<C64> = (0..total).map(|_| gaussian(&mut rng)).collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    StateVector::new(dims.to_vec(), amps.into_iter().map(|a| a / norm).collect())
}

pub fn gen_random_unitary(dim: usize, seed: Seed) -> Result<CMatrix> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    Ok(haar_unitary(dim, &mut seed.rng()))
}

pub fn gen_block_unitary(block_sizes: &[usize], seed: Seed) -> Result<CMatrix> {
    if block_sizes.is_empty() || block_sizes.contains(&0) {
        return Err(Error::InvalidParameter("block sizes must be positive".into()));
    }
    let mut rng = seed.rng();
    let blocks: Vec<CMatrix> = block_sizes.iter().map(|&n| haar_unitary(n, &mut rng)).collect();
    Ok(direct_sum(&blocks))
}

/// Distinct values in `(COEFF_FLOOR, 1)`, descending, pairwise separated by
/// a relative gap of at least `BLOCK_GAP`.
fn distinct_values(count: usize, rng: &mut ChaCha20Rng) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..count).map(|_| rng.random_range(COEFF_FLOOR..1.0)).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        if v.windows(2).all(|w| (w[0] - w[1]) > BLOCK_GAP * w[0]) {
            return v;
        }
    }
}

fn normalized(coeffs: Vec<f64>) -> Vec<f64> {
    let norm = coeffs.iter().map(|x| x * x).sum::<f64>().sqrt();
    coeffs.into_iter().map(|x| x / norm).collect()
}

/// `Σ_ℓ λ_ℓ ⊗_P u_P[:, ℓ]` for per-party column sets `u_P`.
fn product_sum(dims: &[usize], coeffs: &[f64], columns: &[CMatrix]) -> StateVector {
    let total: usize = dims.iter().product();
    let mut amps = vec![ZERO; total];
    for (l, &lambda) in coeffs.iter().enumerate() {
        let mut term = vec![C64::new(lambda, 0.0)];
        for (p, &d) in dims.iter().enumerate() {
            let mut next = Vec::with_capacity(term.len() * d);
            for &t in &term {
                next.extend((0..d).map(|i| t * columns[p][(i, l)]));
            }
            term = next;
        }
        for (a, t) in amps.iter_mut().zip(term) {
            *a += t;
        }
    }
    StateVector::from_raw(dims.to_vec(), amps)
}

/// State whose Schmidt coefficients across `0 | 1..n` come in blocks of
/// equal values with the given multiplicities.
pub fn gen_degenerate_state(dims: &[usize], block_sizes: &[usize], seed: Seed) -> Result<StateVector> {
    check_dims(dims)?;
    if dims.len() < 2 {
        return Err(Error::InvalidParameter("at least two parties are required".into()));
    }
    if block_sizes.is_empty() || block_sizes.contains(&0) {
        return Err(Error::InvalidParameter("block sizes must be positive".into()));
    }
    let rest: usize = dims[1..].iter().product();
    let max_rank = dims[0].min(rest);
    let rank: usize = block_sizes.iter().sum();
    if rank > max_rank {
        return Err(Error::InfeasibleSpectrum(format!("{rank} Schmidt coefficients exceed the cut dimension {max_rank}")));
    }
    let mut rng = seed.rng();
    let values = distinct_values(block_sizes.len(), &mut rng);
    let coeffs = normalized(block_sizes.iter().zip(&values).flat_map(|(&n, &v)| std::iter::repeat_n(v, n)).collect());
    let u_a = haar_unitary(dims[0], &mut rng);
    let v = haar_unitary(rest, &mut rng);
    Ok(product_sum(&[dims[0], rest], &coeffs, &[u_a, v]).reshaped(dims.to_vec()))
}

pub fn gen_schmidt_decomposable(dims: &[usize], rank: usize, seed: Seed) -> Result<StateVector> {
    let mut rng = seed.rng();
    let coeffs = normalized(distinct_values(rank.max(1), &mut rng));
    decomposable_with(dims, &coeffs, &mut rng)
}

/// Like [`gen_schmidt_decomposable`] with caller-supplied coefficients
/// (normalized here).
pub fn gen_schmidt_decomposable_with(dims: &[usize], coeffs: &[f64], seed: Seed) -> Result<StateVector> {
    if coeffs.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::InfeasibleSpectrum("coefficients must be positive and finite".into()));
    }
    decomposable_with(dims, &normalized(coeffs.to_vec()), &mut seed.rng())
}

fn decomposable_with(dims: &[usize], coeffs: &[f64], rng: &mut ChaCha20Rng) -> Result<StateVector> {
    check_dims(dims)?;
    let rank = coeffs.len();
    let min_dim = *dims.iter().min().expect("dims checked nonempty");
    if rank == 0 || rank > min_dim {
        return Err(Error::InfeasibleSpectrum(format!("rank {rank} is outside 1..={min_dim}")));
    }
    let columns: Vec<CMatrix> = dims.iter().map(|&d| haar_unitary(d, rng)).collect();
    Ok(product_sum(dims, coeffs, &columns))
}

/// A complete measurement set on a `dim`-dimensional party. With
/// `projective`, the operators are orthogonal projectors onto groups of
/// vectors of a Haar basis; otherwise `M_j` is the `j`-th `dim × dim` block
/// of the first `dim` columns of a Haar unitary of size `n · dim`.
pub fn gen_measurement_set(dim: usize, n_outcomes: usize, projective: bool, party: usize, seed: Seed) -> Result<MeasurementSet> {
    if dim == 0 || n_outcomes == 0 {
        return Err(Error::InvalidParameter("dimension and outcome count must be positive".into()));
    }
    let mut rng = seed.rng();
    let operators = if projective {
        if n_outcomes > dim {
            return Err(Error::InvalidParameter(format!("{n_outcomes} projectors do not fit in dimension {dim}")));
        }
        let u = haar_unitary(dim, &mut rng);
        let (base, extra) = (dim / n_outcomes, dim % n_outcomes);
        let mut start = 0;
        (0..n_outcomes)
            .map(|j| {
                let size = base + usize::from(j < extra);
                let cols = u.columns(start, size);
                start += size;
                cols * cols.adjoint()
            })
            .collect()
    } else {
        let u = haar_unitary(n_outcomes * dim, &mut rng);
        (0..n_outcomes).map(|j| u.view((j * dim, 0), (dim, dim)).into_owned()).collect()
    };
    MeasurementSet::new(party, operators)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{completeness_residual, unitarity_residual};
    use crate::schmidt::{check_schmidt_decomposable, degeneracy_blocks, schmidt_decompose, GROUP_TOL, RANK_TOL};
    use crate::tensor::Bipartition;

    #[test]
    fn state_is_normalized_and_deterministic() {
        let a = gen_random_state(&[2, 2], Seed::new(7)).unwrap();
        let b = gen_random_state(&[2, 2], Seed::new(7)).unwrap();
        assert!((a.norm() - 1.0).abs() < 1e-12);
        assert_eq!(a, b);
        assert_ne!(a, gen_random_state(&[2, 2], Seed::new(8)).unwrap());
        assert_ne!(a, gen_random_state(&[2, 2], Seed::new(7).child(0)).unwrap());
        assert!(gen_random_state(&[2, 1], Seed::new(0)).is_err());
    }

    #[test]
    fn unitaries() {
        let one = gen_random_unitary(1, Seed::new(3)).unwrap();
        assert!((one[(0, 0)].norm() - 1.0).abs() < 1e-14);
        for s in 0..10 {
            assert!(unitarity_residual(&gen_random_unitary(4, Seed::new(s)).unwrap()) < 1e-12);
        }
        let diag = gen_block_unitary(&[1, 1], Seed::new(1)).unwrap();
        assert_eq!(diag[(0, 1)], ZERO);
        assert_eq!(diag[(1, 0)], ZERO);
        assert!(unitarity_residual(&diag) < 1e-12);
        let blocks = gen_block_unitary(&[2, 1], Seed::new(2)).unwrap();
        assert_eq!(blocks[(2, 0)], ZERO);
        assert_eq!(blocks[(0, 2)], ZERO);
    }

    #[test]
    fn degenerate_spectra() {
        let s = gen_degenerate_state(&[3, 3], &[2, 1], Seed::new(5)).unwrap();
        let sd = schmidt_decompose(&s, &Bipartition::new(vec![0], 2).unwrap(), RANK_TOL).unwrap();
        assert!((sd.coeffs[0] - sd.coeffs[1]).abs() < 1e-12);
        let blocks = degeneracy_blocks(&sd.coeffs, 3, GROUP_TOL).unwrap();
        assert_eq!(blocks.sizes, vec![2, 1]);
        let bell = gen_degenerate_state(&[2, 2], &[2], Seed::new(1)).unwrap();
        let sd = schmidt_decompose(&bell, &Bipartition::new(vec![0], 2).unwrap(), RANK_TOL).unwrap();
        assert!(sd.coeffs.iter().all(|x| (x - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12));
        assert!(matches!(gen_degenerate_state(&[2, 2], &[4], Seed::new(0)), Err(Error::InfeasibleSpectrum(_))));
    }

    #[test]
    fn decomposable_states() {
        let s = gen_schmidt_decomposable(&[2, 3, 2], 2, Seed::new(11)).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-12);
        assert!(check_schmidt_decomposable(&s, 1e-8).unwrap().is_decomposable());
        let product = gen_schmidt_decomposable(&[2, 2, 2], 1, Seed::new(4)).unwrap();
        let sd = schmidt_decompose(&product, &Bipartition::new(vec![0], 3).unwrap(), RANK_TOL).unwrap();
        assert_eq!(sd.rank(), 1);
        let ghz = gen_schmidt_decomposable_with(&[2, 2, 2], &[1.0, 1.0], Seed::new(2)).unwrap();
        let sd = schmidt_decompose(&ghz, &Bipartition::new(vec![1], 3).unwrap(), RANK_TOL).unwrap();
        assert!((sd.coeffs[0] - sd.coeffs[1]).abs() < 1e-12);
        assert!(matches!(gen_schmidt_decomposable(&[2, 3], 3, Seed::new(0)), Err(Error::InfeasibleSpectrum(_))));
    }

    #[test]
    fn measurement_sets_are_complete() {
        let single = gen_measurement_set(3, 1, false, 1, Seed::new(0)).unwrap();
        assert!(unitarity_residual(&single.operators[0]) < 1e-12);
        for n in 1..4 {
            let m = gen_measurement_set(2, n, false, 0, Seed::new(n as u64)).unwrap();
            assert!(completeness_residual(&m.operators) < 1e-12);
        }
        let p = gen_measurement_set(2, 2, true, 1, Seed::new(9)).unwrap();
        for op in &p.operators {
            assert!(crate::linalg::max_abs(&(op * op - op)) < 1e-12);
        }
        assert!(p.completeness_residual < 1e-12);
        assert!(gen_measurement_set(2, 3, true, 0, Seed::new(0)).is_err());
    }
}
