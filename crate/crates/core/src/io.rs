//! JSON file formats for states, operators and measurement sets.
//!
//! Complex numbers are `[re, im]` pairs; matrices are row-major lists of
//! rows; state amplitudes use the last-party-fastest ordering.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::protocol_sim::MeasurementSet;
use crate::tensor::StateVector;

pub type Pair = [f64; 2];
pub type MatrixRows = Vec<Vec<Pair>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub dims: Vec<usize>,
    pub amps: Vec<Pair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorFile {
    pub dim: usize,
    pub matrix: MatrixRows,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementFile {
    pub dim: usize,
    pub operators: Vec<MatrixRows>,
}

/// File contents together with their SHA-256 digest.
#[derive(Clone, Debug)]
pub struct RawInput {
    pub path: String,
    pub bytes: Vec<u8>,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read_input(path: &Path) -> Result<RawInput> {
    let bytes = std::fs::read(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    Ok(RawInput { path: path.display().to_string(), sha256: sha256_hex(&bytes), bytes })
}

fn parse<'a, T: Deserialize<'a>>(bytes: &'a [u8], what: &str) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|e| Error::InvalidInput(format!("{what} file: {e}")))
}

fn to_c64(p: &Pair) -> C64 {
    C64::new(p[0], p[1])
}

fn to_pair(z: &C64) -> Pair {
    [z.re, z.im]
}

pub fn matrix_from_rows(dim: usize, rows: &MatrixRows) -> Result<CMatrix> {
    if rows.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: rows.len() });
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: bad.len() });
    }
    let m = CMatrix::from_fn(dim, dim, |i, j| to_c64(&rows[i][j]));
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    Ok(m)
}

pub fn matrix_to_rows(m: &CMatrix) -> MatrixRows {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| to_pair(&m[(i, j)])).collect()).collect()
}

pub fn parse_state(bytes: &[u8], norm_tol: f64, renormalize: bool) -> Result<StateVector> {
    let file: StateFile = parse(bytes, "state")?;
    if let Some(labels) = &file.labels {
        if labels.len() != file.dims.len() {
            return Err(Error::DimensionMismatch { expected: file.dims.len(), found: labels.len() });
        }
    }
    StateVector::from_amplitudes(file.dims, file.amps.iter().map(to_c64).collect(), norm_tol, renormalize)
}

pub fn parse_operator(bytes: &[u8]) -> Result<CMatrix> {
    let file: OperatorFile = parse(bytes, "operator")?;
    matrix_from_rows(file.dim, &file.matrix)
}

pub fn parse_measurement(bytes: &[u8], party: usize) -> Result<MeasurementSet> {
    let file: MeasurementFile = parse(bytes, "measurement")?;
    let ops = file.operators.iter().map(|rows| matrix_from_rows(file.dim, rows)).collect::<Result<Vec<_>>>()?;
    MeasurementSet::new(party, ops)
}

pub fn state_file(state: &StateVector) -> StateFile {
    StateFile { dims: state.dims().to_vec(), amps: state.amps().iter().map(to_pair).collect(), labels: None }
}

pub fn operator_file(m: &CMatrix) -> OperatorFile {
    OperatorFile { dim: m.nrows(), matrix: matrix_to_rows(m) }
}

pub fn measurement_file(set: &MeasurementSet) -> MeasurementFile {
    MeasurementFile { dim: set.dim(), operators: set.operators.iter().map(matrix_to_rows).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, identity, ZERO};

    #[test]
    fn state_round_trip() {
        let s = StateVector::new(vec![2, 2], vec![c(0.6, 0.0), ZERO, ZERO, c(0.0, 0.8)]).unwrap();
        let text = serde_json::to_vec(&state_file(&s)).unwrap();
        assert_eq!(parse_state(&text, 1e-12, false).unwrap(), s);
    }

    #[test]
    fn state_parsing_errors() {
        let short = br#"{"dims":[2,2],"amps":[[1,0]]}"#;
        assert!(matches!(parse_state(short, 1e-12, false), Err(Error::DimensionMismatch { .. })));
        let unnormalized = br#"{"dims":[2],"amps":[[1,0],[1,0]]}"#;
        assert!(matches!(parse_state(unnormalized, 1e-12, false), Err(Error::NotNormalized { .. })));
        assert!(parse_state(unnormalized, 1e-12, true).is_ok());
        let labelled = br#"{"dims":[2],"amps":[[1,0],[0,0]],"labels":["A"]}"#;
        assert!(parse_state(labelled, 1e-12, false).is_ok());
        assert!(matches!(parse_state(b"{", 1e-12, false), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn operator_and_measurement_round_trip() {
        let x = CMatrix::from_row_slice(2, 2, &[ZERO, c(1.0, 0.0), c(1.0, 0.0), ZERO]);
        let text = serde_json::to_vec(&operator_file(&x)).unwrap();
        assert_eq!(parse_operator(&text).unwrap(), x);
        let m = MeasurementSet::new(1, vec![identity(2)]).unwrap();
        let text = serde_json::to_vec(&measurement_file(&m)).unwrap();
        assert_eq!(parse_measurement(&text, 1).unwrap(), m);
        let ragged = br#"{"dim":2,"matrix":[[[1,0],[0,0]],[[0,0]]]}"#;
        assert!(parse_operator(ragged).is_err());
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
