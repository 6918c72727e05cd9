//! Mirrored measurements on Schmidt-decomposable states.
//!
//! If the state is `Σ λ_ℓ ⊗_P |ℓ_P⟩`, a measurement on the source party is
//! copied to the target party by reusing its coefficient matrices in the
//! target's Schmidt frame. The comparison report measures, outcome by
//! outcome, which relations between the original and the mirrored branches
//! actually hold: equal probabilities, untouched spectator parties, and the
//! source/target swap relation in frame coordinates. It also records every
//! cut whose entanglement spectrum differs between the two branches; such a
//! difference rules out local-unitary equivalence of those branches.

use crate::error::{Error, Result};
use crate::linalg::{completeness_residual, direct_sum, hermitian_eigenvalues, identity, CMatrix, C64};
use crate::schmidt::MultiSchmidtDecomposition;
use crate::tensor::{
    apply_local, matricize, pad_party, phase_invariant_distance, reduced_density, swap_parties, to_frame_coordinates,
    Bipartition, LocalOperator, StateVector,
};

/// Branches whose norm falls below this have no post-measurement state.
pub const ZERO_BRANCH_NORM: f64 = 1e-14;
/// Completeness required of a source set before it is mirrored.
pub const COMPLETENESS_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSet {
    pub party: usize,
    pub operators: Vec<CMatrix>,
    /// `‖Σ O†O − I‖₂`.
    pub completeness_residual: f64,
}

impl MeasurementSet {
    pub fn new(party: usize, operators: Vec<CMatrix>) -> Result<Self> {
        let Some(first) = operators.first() else {
            return Err(Error::InvalidParameter("measurement set has no operators".into()));
        };
        let d = first.nrows();
        if let Some(bad) = operators.iter().find(|o| o.nrows() != d || o.ncols() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: bad.nrows().max(bad.ncols()) });
        }
        let completeness_residual = completeness_residual(&operators);
        Ok(Self { party, operators, completeness_residual })
    }

    pub fn dim(&self) -> usize {
        self.operators[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn is_complete(&self, tol: f64) -> bool {
        self.completeness_residual < tol
    }

    pub fn local_operator(&self, outcome: usize) -> LocalOperator {
        LocalOperator { party: self.party, matrix: self.operators[outcome].clone() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BranchOutcome {
    pub outcome_index: usize,
    pub probability: f64,
    /// Normalized post-measurement state.
    pub post_state: StateVector,
    /// `1/√probability`.
    pub norm_constant: f64,
}

pub fn measure_branch(state: &StateVector, op: &LocalOperator, outcome_index: usize) -> Result<BranchOutcome> {
    let action = apply_local(state, op)?;
    if action.norm < ZERO_BRANCH_NORM {
        return Err(Error::ZeroProbabilityBranch { outcome: outcome_index, norm: action.norm });
    }
    let post_state = action.state.scaled(C64::new(1.0 / action.norm, 0.0));
    Ok(BranchOutcome {
        outcome_index,
        probability: action.norm * action.norm,
        post_state,
        norm_constant: 1.0 / action.norm,
    })
}

/// Copies the coefficient matrices of `source_ops` (in the source party's
/// Schmidt frame) into the target party's Schmidt frame.
///
/// When the target is larger than the source, the extra frame directions
/// receive `I/√n` from each of the `n` operators. When it is smaller, the
/// source coefficients are truncated, which is only allowed if the truncated
/// set is still complete.
pub fn mirror_measurement(
    msd: &MultiSchmidtDecomposition,
    source_ops: &MeasurementSet,
    source: usize,
    target: usize,
) -> Result<MeasurementSet> {
    let dims = msd.party_dims();
    let n = dims.len();
    if source >= n || target >= n || source == target {
        return Err(Error::InvalidParameter(format!("source {source} and target {target} must be distinct parties of {n}")));
    }
    if source_ops.party != source {
        return Err(Error::InvalidParameter(format!(
            "measurement acts on party {}, not the source {source}",
            source_ops.party
        )));
    }
    if source_ops.dim() != dims[source] {
        return Err(Error::DimensionMismatch { expected: dims[source], found: source_ops.dim() });
    }
    if !source_ops.is_complete(COMPLETENESS_TOL) {
        return Err(Error::IncompleteSource { residual: source_ops.completeness_residual });
    }
    let (source_rank, target_rank) = (msd.bases[source].ncols(), msd.bases[target].ncols());
    if source_rank != target_rank {
        return Err(Error::RankMismatch { source_rank, target_rank });
    }

    let (d_s, d_t) = (dims[source], dims[target]);
    let s_frame = msd.frame(source);
    let t_frame = msd.frame(target);
    let coeffs: Vec<CMatrix> = source_ops.operators.iter().map(|o| s_frame.adjoint() * o * &s_frame).collect();

    let target_coeffs: Vec<CMatrix> = if d_t >= d_s {
        let filler = identity(d_t - d_s).scale(1.0 / (coeffs.len() as f64).sqrt());
        coeffs.iter().map(|c| if d_t == d_s { c.clone() } else { direct_sum(&[c.clone(), filler.clone()]) }).collect()
    } else {
        let truncated: Vec<CMatrix> = coeffs.iter().map(|c| c.view((0, 0), (d_t, d_t)).into_owned()).collect();
        let residual = completeness_residual(&truncated);
        if residual > COMPLETENESS_TOL {
            return Err(Error::SupportLeak { residual });
        }
        truncated
    };
    let ops = target_coeffs.iter().map(|c| &t_frame * c * t_frame.adjoint()).collect();
    MeasurementSet::new(target, ops)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CutSpectrumMatch {
    pub cut: Bipartition,
    /// Largest deviation between the sorted squared Schmidt spectra of the two branches.
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeComparison {
    pub outcome_index: usize,
    pub source_probability: f64,
    pub target_probability: f64,
    pub probability_match: f64,
    /// `(party, ‖ρ_P(target) − ρ_P(source)‖_F)` for every spectator party.
    pub spectator_distances: Vec<(usize, f64)>,
    pub swap_relation_distance: f64,
    pub spectra: Vec<CutSpectrumMatch>,
    /// Both branches have zero probability; no residuals were computed.
    pub skipped: bool,
}

impl OutcomeComparison {
    pub fn bipartite_spectra_match(&self) -> f64 {
        self.spectra.iter().fold(0.0, |m, c| m.max(c.deviation))
    }

    pub fn max_spectator_distance(&self) -> f64 {
        self.spectator_distances.iter().fold(0.0, |m, &(_, d)| m.max(d))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralMismatch {
    pub outcome_index: usize,
    pub cut: Bipartition,
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MirrorReport {
    pub source: usize,
    pub target: usize,
    pub mirrored: MeasurementSet,
    pub outcomes: Vec<OutcomeComparison>,
}

impl MirrorReport {
    pub fn max_probability_match(&self) -> f64 {
        self.outcomes.iter().fold(0.0, |m, o| m.max(o.probability_match))
    }

    pub fn max_spectator_distance(&self) -> f64 {
        self.outcomes.iter().fold(0.0, |m, o| m.max(o.max_spectator_distance()))
    }

    pub fn max_swap_relation_distance(&self) -> f64 {
        self.outcomes.iter().fold(0.0, |m, o| m.max(o.swap_relation_distance))
    }

    /// Every (outcome, cut) pair whose branch spectra differ by more than `tol`.
    pub fn spectral_mismatches(&self, tol: f64) -> Vec<SpectralMismatch> {
        self.outcomes
            .iter()
            .flat_map(|o| {
                o.spectra.iter().filter(|c| c.deviation > tol).map(move |c| SpectralMismatch {
                    outcome_index: o.outcome_index,
                    cut: c.cut.clone(),
                    deviation: c.deviation,
                })
            })
            .collect()
    }
}

/// All bipartitions with party 0 on the left.
pub(crate) fn all_cuts(parties: usize) -> Vec<Bipartition> {
    (1..(1usize << (parties - 1)))
        .map(|mask| {
            let left: Vec<usize> = std::iter::once(0).chain((1..parties).filter(|p| mask & (1 << (p - 1)) == 0)).collect();
            left
        })
        .filter(|left| left.len() < parties)
        .map(|left| Bipartition::new(left, parties).expect("valid cut"))
        .collect()
}

/// Squared singular values across `cut`, descending, without rank truncation.
fn cut_spectrum(state: &StateVector, cut: &Bipartition) -> Result<Vec<f64>> {
    let m = matricize(state, cut)?.matrix;
    Ok(crate::linalg::singular_values(&m)?.iter().map(|x| x * x).collect())
}

fn spectrum_deviation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    (0..n).fold(0.0, |m, i| m.max((a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0)).abs()))
}

pub fn compare_branches(
    msd: &MultiSchmidtDecomposition,
    source_ops: &MeasurementSet,
    source: usize,
    target: usize,
) -> Result<MirrorReport> {
    let mirrored = mirror_measurement(msd, source_ops, source, target)?;
    let state = msd.to_state();
    let dims = msd.party_dims();
    let n = dims.len();
    let frames: Vec<CMatrix> = (0..n).map(|p| msd.frame(p)).collect();
    let common = dims[source].max(dims[target]);
    let cuts = all_cuts(n);

    let mut outcomes = Vec::with_capacity(source_ops.len());
    for j in 0..source_ops.len() {
        let src_norm = apply_local(&state, &source_ops.local_operator(j))?.norm;
        let tgt_norm = apply_local(&state, &mirrored.local_operator(j))?.norm;
        if src_norm < ZERO_BRANCH_NORM && tgt_norm < ZERO_BRANCH_NORM {
            outcomes.push(OutcomeComparison {
                outcome_index: j,
                source_probability: src_norm * src_norm,
                target_probability: tgt_norm * tgt_norm,
                probability_match: (src_norm * src_norm - tgt_norm * tgt_norm).abs(),
                spectator_distances: Vec::new(),
                swap_relation_distance: 0.0,
                spectra: Vec::new(),
                skipped: true,
            });
            continue;
        }
        let src = measure_branch(&state, &source_ops.local_operator(j), j)?;
        let tgt = measure_branch(&state, &mirrored.local_operator(j), j)?;

        let mut spectator_distances = Vec::new();
        for p in (0..n).filter(|&p| p != source && p != target) {
            let diff = reduced_density(&tgt.post_state, &[p])? - reduced_density(&src.post_state, &[p])?;
            spectator_distances.push((p, diff.norm()));
        }

        let align = |s: &StateVector| -> Result<StateVector> {
            let mut f = to_frame_coordinates(s, &frames)?;
            f = pad_party(&f, source, common)?;
            pad_party(&f, target, common)
        };
        let swapped = swap_parties(&align(&tgt.post_state)?, source, target)?;
        let swap_relation_distance = phase_invariant_distance(&swapped, &align(&src.post_state)?)?;

        let mut spectra = Vec::with_capacity(cuts.len());
        for cut in &cuts {
            let deviation = spectrum_deviation(&cut_spectrum(&src.post_state, cut)?, &cut_spectrum(&tgt.post_state, cut)?);
            spectra.push(CutSpectrumMatch { cut: cut.clone(), deviation });
        }

        outcomes.push(OutcomeComparison {
            outcome_index: j,
            source_probability: src.probability,
            target_probability: tgt.probability,
            probability_match: (tgt.probability - src.probability).abs(),
            spectator_distances,
            swap_relation_distance,
            spectra,
            skipped: false,
        });
    }
    Ok(MirrorReport { source, target, mirrored, outcomes })
}

/// Eigenvalues of a branch's single-party reduced state; convenience for reports.
pub fn single_party_spectrum(state: &StateVector, party: usize) -> Result<Vec<f64>> {
    Ok(hermitian_eigenvalues(&reduced_density(state, &[party])?))
}
