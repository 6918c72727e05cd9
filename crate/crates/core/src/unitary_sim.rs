//! Simulation of one party's local unitary by the other party of a bipartite
//! pure state.
//!
//! Written in the two Schmidt frames, Bob's unitary `U` is simulable by Alice
//! exactly when it is block diagonal with respect to the degeneracy blocks of
//! the Schmidt spectrum (the kernel of Bob's reduced state counts as its own
//! block). Alice's partner is then `Uᵀ` on her Schmidt support and the
//! identity on its complement.
//!
//! Two independent deciders are provided: the block test in
//! [`check_unitary_simulable`] and the similarity-transform candidate
//! `D Uᵀ D⁻¹` of [`oracle_partner`], which is unitary iff the block test passes.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{direct_sum, identity, orthonormality_residual, spectral_norm, unitarity_residual, CMatrix, C64};
use crate::schmidt::{degeneracy_blocks, schmidt_decompose, DegeneracyBlocks, SchmidtDecomposition, GROUP_TOL, RANK_TOL};
use crate::tensor::{apply_local, phase_invariant_distance, Bipartition, LocalOperator, StateVector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimTolerances {
    /// Threshold on the off-block residual.
    pub decision: f64,
    /// Threshold on the state distance after constructing the partner.
    pub verify: f64,
    /// Accepted `‖U†U − I‖₂` for inputs.
    pub unitarity: f64,
    pub rank: f64,
    pub group: f64,
}

impl Default for SimTolerances {
    fn default() -> Self {
        Self { decision: 1e-8, verify: 1e-9, unitarity: 1e-10, rank: RANK_TOL, group: GROUP_TOL }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnitarySimVerdict {
    pub simulable: bool,
    pub blocks: DegeneracyBlocks,
    /// Largest `|u_ij|` over frame index pairs in different blocks.
    pub offblock_residual: f64,
    /// Alice's unitary in her computational basis, when simulable.
    pub partner: Option<LocalOperator>,
    pub verification_distance: Option<f64>,
}

/// `S† · op · S` where `S` is `basis` completed to a unitary.
pub fn to_schmidt_frame(op: &CMatrix, basis: &CMatrix) -> Result<CMatrix> {
    let frame = checked_frame(op, basis)?;
    Ok(frame.adjoint() * op * &frame)
}

/// Inverse of [`to_schmidt_frame`].
pub fn from_schmidt_frame(frame_op: &CMatrix, basis: &CMatrix) -> Result<CMatrix> {
    let frame = checked_frame(frame_op, basis)?;
    Ok(&frame * frame_op * frame.adjoint())
}

fn checked_frame(op: &CMatrix, basis: &CMatrix) -> Result<CMatrix> {
    if !op.is_square() || op.nrows() != basis.nrows() {
        return Err(Error::DimensionMismatch { expected: basis.nrows(), found: op.nrows() });
    }
    if basis.ncols() > basis.nrows() {
        return Err(Error::DimensionMismatch { expected: basis.nrows(), found: basis.ncols() });
    }
    let residual = orthonormality_residual(basis);
    if residual > 1e-10 {
        return Err(Error::NonOrthonormalBasis { residual });
    }
    Ok(crate::linalg::complete_basis(basis))
}

fn bipartite_decomposition(state: &StateVector, tols: &SimTolerances) -> Result<SchmidtDecomposition> {
    if state.num_parties() != 2 {
        return Err(Error::NotBipartite { parties: state.num_parties() });
    }
    schmidt_decompose(state, &Bipartition::new(vec![0], 2)?, tols.rank)
}

fn check_operator(state: &StateVector, u: &CMatrix, party: usize, tols: &SimTolerances) -> Result<()> {
    let d = state.dims()[party];
    if !u.is_square() || u.nrows() != d {
        return Err(Error::DimensionMismatch { expected: d, found: u.nrows() });
    }
    let residual = unitarity_residual(u);
    if residual > tols.unitarity {
        return Err(Error::NotUnitary { residual });
    }
    Ok(())
}

/// Nearest unitary in Frobenius norm (polar factor).
fn nearest_unitary(m: &CMatrix) -> Result<CMatrix> {
    let svd = crate::linalg::svd(m)?;
    Ok(svd.u * svd.v_t)
}

fn partner_from_frame(sd: &SchmidtDecomposition, bob_frame_op: &CMatrix) -> Result<LocalOperator> {
    let r = sd.rank();
    let d_a = sd.party_dims()[0];
    let support = bob_frame_op.view((0, 0), (r, r)).transpose();
    let mut blocks = vec![nearest_unitary(&support)?];
    if d_a > r {
        blocks.push(identity(d_a - r));
    }
    let alice_frame = sd.left_frame();
    let partner = &alice_frame * direct_sum(&blocks) * alice_frame.adjoint();
    LocalOperator::new(0, partner)
}

pub fn check_unitary_simulable(state: &StateVector, u_b: &CMatrix, tols: &SimTolerances) -> Result<UnitarySimVerdict> {
    let sd = bipartite_decomposition(state, tols)?;
    check_operator(state, u_b, 1, tols)?;
    let frame_op = to_schmidt_frame(u_b, &sd.right_basis)?;
    let blocks = degeneracy_blocks(&sd.coeffs, state.dims()[1], tols.group)?;
    let labels = blocks.labels();
    let mut offblock_residual = 0.0_f64;
    for i in 0..labels.len() {
        for j in 0..labels.len() {
            if labels[i] != labels[j] {
                offblock_residual = offblock_residual.max(frame_op[(i, j)].norm());
            }
        }
    }
    let simulable = offblock_residual < tols.decision;
    let (partner, verification_distance) = if simulable {
        let partner = partner_from_frame(&sd, &frame_op)?;
        let distance = verify_unitary_simulation(state, u_b, &partner.matrix)?;
        (Some(partner), Some(distance))
    } else {
        (None, None)
    };
    Ok(UnitarySimVerdict { simulable, blocks, offblock_residual, partner, verification_distance })
}

pub fn construct_partner_unitary(state: &StateVector, u_b: &CMatrix, tols: &SimTolerances) -> Result<LocalOperator> {
    let verdict = check_unitary_simulable(state, u_b, tols)?;
    verdict.partner.ok_or(Error::NotSimulable { offblock_residual: verdict.offblock_residual })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleCandidate {
    /// `D Uᵀ D⁻¹` on the Schmidt support, in Alice's Schmidt frame.
    pub candidate: CMatrix,
    /// `‖C†C − I‖₂`.
    pub unitarity_residual: f64,
}

pub fn oracle_partner(state: &StateVector, u_b: &CMatrix) -> Result<OracleCandidate> {
    let tols = SimTolerances::default();
    let sd = bipartite_decomposition(state, &tols)?;
    if !u_b.is_square() || u_b.nrows() != state.dims()[1] {
        return Err(Error::DimensionMismatch { expected: state.dims()[1], found: u_b.nrows() });
    }
    let r = sd.rank();
    let frame_op = to_schmidt_frame(u_b, &sd.right_basis)?;
    let support = frame_op.view((0, 0), (r, r)).transpose();
    let d = CMatrix::from_diagonal(&DVector::from_iterator(r, sd.coeffs.iter().map(|&l| C64::new(l, 0.0))));
    let d_inv = CMatrix::from_diagonal(&DVector::from_iterator(r, sd.coeffs.iter().map(|&l| C64::new(1.0 / l, 0.0))));
    let candidate = d * support * d_inv;
    let unitarity_residual = spectral_norm(&(candidate.adjoint() * &candidate - identity(r)));
    Ok(OracleCandidate { candidate, unitarity_residual })
}

/// Phase-invariant distance between `(U_A ⊗ I)|ψ⟩` and `(I ⊗ U_B)|ψ⟩`.
pub fn verify_unitary_simulation(state: &StateVector, u_b: &CMatrix, u_a: &CMatrix) -> Result<f64> {
    if state.num_parties() != 2 {
        return Err(Error::NotBipartite { parties: state.num_parties() });
    }
    let by_alice = apply_local(state, &LocalOperator::new(0, u_a.clone())?)?.state;
    let by_bob = apply_local(state, &LocalOperator::new(1, u_b.clone())?)?.state;
    phase_invariant_distance(&by_alice, &by_bob)
}
