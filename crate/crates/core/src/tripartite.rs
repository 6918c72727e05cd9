//! Tripartite Schmidt frames and simulation of Bob's measurement by Alice.
//!
//! A tripartite state is expanded as `Σ a_{ℓmn} |ℓ_A⟩|m_B⟩|n_C⟩` over the
//! single-party Schmidt vectors of the three cuts `A|BC`, `B|AC` and `C|AB`.
//! In that frame each flattening `X_P` of the coefficient tensor satisfies
//! `X_P X_P† = diag(spectrum of ρ_P)`.
//!
//! For a measurement `{M_j}` on Bob, Alice's candidate operators solve
//! `L_j A = (M_j B)^{T_AB}` in the least-squares sense:
//! `L_j = (M_j B)^{T_AB} A† D_A⁻¹`, where `A` and `B` are the A- and
//! B-flattenings and `D_A = A A†`. The equation is exactly solvable iff the
//! rows of the right-hand side lie in the row space of `A`; the residual is
//! reported per outcome rather than asserted.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{completeness_residual, direct_sum, identity, spectral_norm, CMatrix, C64, ZERO};
use crate::protocol_sim::{MeasurementSet, COMPLETENESS_TOL, ZERO_BRANCH_NORM};
use crate::schmidt::{schmidt_decompose, RANK_TOL};
use crate::tensor::{apply_local, phase_invariant_distance, Bipartition, LocalOperator, StateVector};

pub const ALICE: usize = 0;
pub const BOB: usize = 1;
pub const CAT: usize = 2;

/// Spectrum entries below this are treated as outside the support of `D_A`.
pub const SUPPORT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct TripartiteSchmidtFrame {
    /// Per party, `dim × rank` orthonormal Schmidt vectors.
    pub bases: [CMatrix; 3],
    /// `a_{ℓmn}`, row-major over `(ℓ, m, n)`.
    pub coeff_tensor: Vec<C64>,
    /// Eigenvalues of the single-party reduced states, descending.
    pub spectra: [Vec<f64>; 3],
    pub ranks: [usize; 3],
    dims: [usize; 3],
}

impl TripartiteSchmidtFrame {
    pub fn party_dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn coeff(&self, l: usize, m: usize, n: usize) -> C64 {
        let [_, rb, rc] = self.ranks;
        self.coeff_tensor[(l * rb + m) * rc + n]
    }

    /// Party's Schmidt vectors completed to a unitary frame.
    pub fn frame(&self, party: usize) -> CMatrix {
        crate::linalg::complete_basis(&self.bases[party])
    }

    /// Flattening with `party`'s index on the rows and the remaining two
    /// indices (in party order, last fastest) on the columns.
    pub fn flatten(&self, party: usize) -> CMatrix {
        let [ra, rb, rc] = self.ranks;
        match party {
            ALICE => CMatrix::from_fn(ra, rb * rc, |l, mn| self.coeff(l, mn / rc, mn % rc)),
            BOB => CMatrix::from_fn(rb, ra * rc, |m, ln| self.coeff(ln / rc, m, ln % rc)),
            _ => CMatrix::from_fn(rc, ra * rb, |n, lm| self.coeff(lm / rb, lm % rb, n)),
        }
    }

    pub fn reconstruct(&self) -> StateVector {
        let [da, db, dc] = self.dims;
        let [ra, rb, rc] = self.ranks;
        let mut amps = vec![ZERO; da * db * dc];
        for l in 0..ra {
            for m in 0..rb {
                for n in 0..rc {
                    let a = self.coeff(l, m, n);
                    if a == ZERO {
                        continue;
                    }
                    for i in 0..da {
                        let ai = a * self.bases[ALICE][(i, l)];
                        for j in 0..db {
                            let aij = ai * self.bases[BOB][(j, m)];
                            for k in 0..dc {
                                amps[(i * db + j) * dc + k] += aij * self.bases[CAT][(k, n)];
                            }
                        }
                    }
                }
            }
        }
        StateVector::from_raw(self.dims.to_vec(), amps)
    }
}

pub fn build_frame(state: &StateVector, rank_tol: f64) -> Result<TripartiteSchmidtFrame> {
    if state.num_parties() != 3 {
        return Err(Error::NotTripartite { parties: state.num_parties() });
    }
    let mut bases: [CMatrix; 3] = Default::default();
    let mut spectra: [Vec<f64>; 3] = Default::default();
    for p in 0..3 {
        let sd = schmidt_decompose(state, &Bipartition::new(vec![p], 3)?, rank_tol)?;
        spectra[p] = sd.spectrum();
        bases[p] = sd.left_basis;
    }
    let dims = [state.dims()[0], state.dims()[1], state.dims()[2]];
    let ranks = [bases[0].ncols(), bases[1].ncols(), bases[2].ncols()];

    // contract one party at a time: ψ[i,j,k] → x[ℓ,j,k] → y[ℓ,m,k] → a[ℓ,m,n]
    let [da, db, dc] = dims;
    let [ra, rb, rc] = ranks;
    let psi = state.amps();
    let mut x = vec![ZERO; ra * db * dc];
    for l in 0..ra {
        for i in 0..da {
            let w = bases[ALICE][(i, l)].conj();
            for jk in 0..db * dc {
                x[l * db * dc + jk] += w * psi[i * db * dc + jk];
            }
        }
    }
    let mut y = vec![ZERO; ra * rb * dc];
    for l in 0..ra {
        for m in 0..rb {
            for j in 0..db {
                let w = bases[BOB][(j, m)].conj();
                for k in 0..dc {
                    y[(l * rb + m) * dc + k] += w * x[(l * db + j) * dc + k];
                }
            }
        }
    }
    let mut coeff_tensor = vec![ZERO; ra * rb * rc];
    for lm in 0..ra * rb {
        for n in 0..rc {
            coeff_tensor[lm * rc + n] = (0..dc).map(|k| bases[CAT][(k, n)].conj() * y[lm * dc + k]).sum();
        }
    }
    Ok(TripartiteSchmidtFrame { bases, coeff_tensor, spectra, ranks, dims })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameResiduals {
    pub residual_a: f64,
    pub residual_b: f64,
    pub residual_c: f64,
}

impl FrameResiduals {
    pub fn max(&self) -> f64 {
        self.residual_a.max(self.residual_b).max(self.residual_c)
    }
}

fn diag(values: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&DVector::from_iterator(values.len(), values.iter().map(|&v| C64::new(v, 0.0))))
}

/// `‖X_P X_P† − diag(spectrum_P)‖₂` for the three flattenings.
pub fn verify_frame(frame: &TripartiteSchmidtFrame) -> FrameResiduals {
    let r = |p: usize| {
        let x = frame.flatten(p);
        spectral_norm(&(&x * x.adjoint() - diag(&frame.spectra[p])))
    };
    FrameResiduals { residual_a: r(ALICE), residual_b: r(BOB), residual_c: r(CAT) }
}

/// `B = A^{T_AB}`: `[B]_{m,(ℓn)} = a_{ℓmn}`.
pub fn swap_flatten(frame: &TripartiteSchmidtFrame) -> CMatrix {
    frame.flatten(BOB)
}

/// Exchanges the row index with the leading column-group index of a
/// flattening: `[X]_{p,(q n)} ↦ [Y]_{q,(p n)}` for `rows × (groups · inner)`.
pub fn partial_transpose(x: &CMatrix, groups: usize, inner: usize) -> CMatrix {
    let rows = x.nrows();
    assert_eq!(x.ncols(), groups * inner, "column count must factor as groups × inner");
    CMatrix::from_fn(groups, rows * inner, |q, pn| x[(pn / inner, q * inner + pn % inner)])
}

/// Per outcome, `(Σ_{k,m} spectrum_m |O_{km}|²)^{-1/2}` for operators written
/// in the frame of `side`. Only the first `rank` columns carry weight.
pub fn normalization_constants(frame: &TripartiteSchmidtFrame, ops: &[CMatrix], side: usize) -> Result<Vec<f64>> {
    let spectrum = &frame.spectra[side];
    ops.iter()
        .enumerate()
        .map(|(j, op)| {
            if op.ncols() < spectrum.len() {
                return Err(Error::DimensionMismatch { expected: spectrum.len(), found: op.ncols() });
            }
            let weight: f64 =
                spectrum.iter().enumerate().map(|(m, &s)| s * op.column(m).iter().map(|z| z.norm_sqr()).sum::<f64>()).sum();
            if weight.sqrt() < ZERO_BRANCH_NORM {
                return Err(Error::ZeroProbabilityBranch { outcome: j, norm: weight.sqrt() });
            }
            Ok(1.0 / weight.sqrt())
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasureSimTolerances {
    /// Spectrum entries of `ρ_A` below this are excluded from `D_A⁻¹`.
    pub support: f64,
    /// Relative size a right-hand-side row outside the support may have.
    pub decision: f64,
}

impl Default for MeasureSimTolerances {
    fn default() -> Self {
        Self { support: SUPPORT_TOL, decision: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasureSimResult {
    /// Alice's operators in her computational basis.
    pub target_ops: MeasurementSet,
    /// `L_j` restricted to Alice's Schmidt support, in her Schmidt frame.
    pub support_ops: Vec<CMatrix>,
    /// `‖f L_j A − h (M_j B)^{T_AB}‖_F / ‖h (M_j B)^{T_AB}‖_F`.
    pub feasibility_residuals: Vec<f64>,
    /// Relative size of the right-hand side outside the row space of `A`.
    pub obstructions: Vec<f64>,
    /// `‖Σ L_j†L_j − I‖₂` on Alice's support.
    pub completeness_residual: f64,
    pub f_constants: Vec<f64>,
    pub h_constants: Vec<f64>,
}

impl MeasureSimResult {
    pub fn max_feasibility_residual(&self) -> f64 {
        self.feasibility_residuals.iter().fold(0.0, |m, &r| m.max(r))
    }
}

/// The pieces of the coefficient equation for one frame: the A-flattening
/// padded to Bob's full frame dimension and the right-hand sides.
pub struct CoefficientEquation {
    /// `r_A × (d_B r_C)`, zero on Bob's frame directions outside his support.
    pub a_padded: CMatrix,
    /// `(M_j B)^{T_AB}` per outcome, same shape as `a_padded`.
    pub rhs: Vec<CMatrix>,
    /// Source operators in Bob's Schmidt frame.
    pub frame_ops: Vec<CMatrix>,
}

pub fn coefficient_equation(frame: &TripartiteSchmidtFrame, source_ops: &MeasurementSet) -> Result<CoefficientEquation> {
    let [_, db, _] = frame.dims;
    let [ra, rb, rc] = frame.ranks;
    if source_ops.party != BOB {
        return Err(Error::InvalidParameter(format!("measurement must act on Bob (party 1), not {}", source_ops.party)));
    }
    if source_ops.dim() != db {
        return Err(Error::DimensionMismatch { expected: db, found: source_ops.dim() });
    }
    let s_b = frame.frame(BOB);
    let frame_ops: Vec<CMatrix> = source_ops.operators.iter().map(|m| s_b.adjoint() * m * &s_b).collect();
    let a_padded = CMatrix::from_fn(ra, db * rc, |l, kn| {
        let (k, n) = (kn / rc, kn % rc);
        if k < rb {
            frame.coeff(l, k, n)
        } else {
            ZERO
        }
    });
    let b_flat = swap_flatten(frame);
    let rhs = frame_ops
        .iter()
        .map(|m| {
            let mb = m.columns(0, rb) * &b_flat;
            partial_transpose(&mb, ra, rc)
        })
        .collect();
    Ok(CoefficientEquation { a_padded, rhs, frame_ops })
}

pub fn construct_simulating_measurement(
    frame: &TripartiteSchmidtFrame,
    source_ops: &MeasurementSet,
    tols: &MeasureSimTolerances,
) -> Result<MeasureSimResult> {
    let eq = coefficient_equation(frame, source_ops)?;
    if !source_ops.is_complete(COMPLETENESS_TOL) {
        return Err(Error::IncompleteSource { residual: source_ops.completeness_residual });
    }
    let [da, _, _] = frame.dims;
    let ra = frame.ranks[ALICE];
    let alpha2 = &frame.spectra[ALICE];
    let d_inv = diag(&alpha2.iter().map(|&a| if a >= tols.support { 1.0 / a } else { 0.0 }).collect::<Vec<_>>());
    let projector = eq.a_padded.adjoint() * &d_inv * &eq.a_padded;
    let complement = identity(projector.nrows()) - &projector;

    let h_constants = normalization_constants(frame, &eq.frame_ops, BOB)?;
    let n_out = source_ops.len();
    let mut support_ops = Vec::with_capacity(n_out);
    let mut f_constants = Vec::with_capacity(n_out);
    let mut feasibility_residuals = Vec::with_capacity(n_out);
    let mut obstructions = Vec::with_capacity(n_out);

    for (r, &h) in eq.rhs.iter().zip(&h_constants) {
        let rhs_norm = r.norm();
        for (l, &a) in alpha2.iter().enumerate() {
            if a < tols.support && r.row(l).norm() > tols.decision * rhs_norm {
                return Err(Error::SingularSupport { row: l });
            }
        }
        let raw = r * eq.a_padded.adjoint() * &d_inv;
        let (l_op, f) = match normalization_constants(frame, std::slice::from_ref(&raw), ALICE) {
            Ok(f0) => {
                let scaled = raw.scale(h / f0[0]);
                let f = normalization_constants(frame, std::slice::from_ref(&scaled), ALICE)?[0];
                (scaled, f)
            }
            // the right-hand side is orthogonal to the row space: nothing to scale
            Err(Error::ZeroProbabilityBranch { .. }) => (CMatrix::zeros(ra, ra), 0.0),
            Err(e) => return Err(e),
        };
        let target = r.scale(h);
        let lhs = (&l_op * &eq.a_padded).scale(f);
        feasibility_residuals.push((lhs - &target).norm() / target.norm());
        obstructions.push(if rhs_norm > 0.0 { (r * &complement).norm() / rhs_norm } else { 0.0 });
        f_constants.push(f);
        support_ops.push(l_op);
    }

    let completeness_residual = completeness_residual(&support_ops);
    let s_a = frame.frame(ALICE);
    let filler = identity(da - ra).scale(1.0 / (n_out as f64).sqrt());
    let target_ops = support_ops
        .iter()
        .map(|l| {
            let full = if da > ra { direct_sum(&[l.clone(), filler.clone()]) } else { l.clone() };
            &s_a * full * s_a.adjoint()
        })
        .collect();
    Ok(MeasureSimResult {
        target_ops: MeasurementSet::new(ALICE, target_ops)?,
        support_ops,
        feasibility_residuals,
        obstructions,
        completeness_residual,
        f_constants,
        h_constants,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeVerification {
    pub outcome_index: usize,
    /// False when the outcome's feasibility residual exceeded the tolerance
    /// and it was skipped.
    pub checked: bool,
    /// Phase-invariant distance between `f[L_j A]_{ℓ,kn}` and `h[M_j B]_{k,ℓn}`.
    pub aligned_distance: Option<f64>,
    /// Phase-invariant distance between the normalized branch states
    /// `L_j|ψ⟩` and `M_j|ψ⟩` in the computational basis.
    pub state_distance: Option<f64>,
}

pub fn verify_measure_sim(
    frame: &TripartiteSchmidtFrame,
    source_ops: &MeasurementSet,
    result: &MeasureSimResult,
    tol: f64,
) -> Result<Vec<OutcomeVerification>> {
    let eq = coefficient_equation(frame, source_ops)?;
    let state = frame.reconstruct();
    let cosine_distance = |x: &CMatrix, y: &CMatrix| {
        let overlap: C64 = x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum();
        (1.0 - overlap.norm() / (x.norm() * y.norm())).clamp(0.0, 1.0)
    };
    let mut out = Vec::with_capacity(source_ops.len());
    for j in 0..source_ops.len() {
        // NaN residuals count as infeasible
        let feasible = result.feasibility_residuals[j] < tol;
        if !feasible {
            out.push(OutcomeVerification { outcome_index: j, checked: false, aligned_distance: None, state_distance: None });
            continue;
        }
        let lhs = (&result.support_ops[j] * &eq.a_padded).scale(result.f_constants[j]);
        let rhs = eq.rhs[j].scale(result.h_constants[j]);
        let aligned = cosine_distance(&lhs, &rhs);
        let by_alice = apply_local(&state, &LocalOperator::new(ALICE, result.target_ops.operators[j].clone())?)?.state;
        let by_bob = apply_local(&state, &source_ops.local_operator(j))?.state;
        let by_alice = by_alice.normalized().ok_or(Error::ZeroProbabilityBranch { outcome: j, norm: 0.0 })?;
        let by_bob = by_bob.normalized().ok_or(Error::ZeroProbabilityBranch { outcome: j, norm: 0.0 })?;
        out.push(OutcomeVerification {
            outcome_index: j,
            checked: true,
            aligned_distance: Some(aligned),
            state_distance: Some(phase_invariant_distance(&by_alice, &by_bob)?),
        });
    }
    Ok(out)
}

/// Default-tolerance frame.
pub fn frame_of(state: &StateVector) -> Result<TripartiteSchmidtFrame> {
    build_frame(state, RANK_TOL)
}
