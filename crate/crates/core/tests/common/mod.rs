//! Reference computations used as oracles by the integration tests. They
//! work on raw amplitude vectors with explicit index loops and Kronecker
//! products, independent of the library's reshaping code.

#![allow(dead_code)]

use locsim::generate::{gen_block_unitary, gen_degenerate_state, Seed};
use locsim::linalg::{CMatrix, C64};
use locsim::schmidt::{schmidt_decompose, RANK_TOL};
use locsim::tensor::{Bipartition, StateVector};
use locsim::tripartite::{TripartiteSchmidtFrame, BOB};
use locsim::unitary_sim::from_schmidt_frame;
use nalgebra::DVector;

pub fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// Digits of `flat` in the mixed radix `dims`, last digit fastest.
pub fn digits(mut flat: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for p in (0..dims.len()).rev() {
        out[p] = flat % dims[p];
        flat /= dims[p];
    }
    out
}

pub fn flat_index(idx: &[usize], dims: &[usize]) -> usize {
    idx.iter().zip(dims).fold(0, |acc, (&i, &d)| acc * d + i)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    CMatrix::from_fn(a.nrows() * b.nrows(), a.ncols() * b.ncols(), |i, j| {
        a[(i / b.nrows(), j / b.ncols())] * b[(i % b.nrows(), j % b.ncols())]
    })
}

/// `I ⊗ … ⊗ op ⊗ … ⊗ I` with `op` in position `party`.
pub fn embed(dims: &[usize], party: usize, op: &CMatrix) -> CMatrix {
    dims.iter().enumerate().fold(CMatrix::identity(1, 1), |acc, (p, &d)| {
        let factor = if p == party { op.clone() } else { CMatrix::identity(d, d) };
        kron(&acc, &factor)
    })
}

pub fn apply(state: &StateVector, party: usize, op: &CMatrix) -> Vec<C64> {
    let v = DVector::from_column_slice(state.amps());
    (embed(state.dims(), party, op) * v).iter().copied().collect()
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `1 − |⟨u|v⟩| / (‖u‖‖v‖)`.
pub fn distance(u: &[C64], v: &[C64]) -> f64 {
    let overlap: C64 = u.iter().zip(v).map(|(a, b)| a.conj() * b).sum();
    (1.0 - overlap.norm() / (norm(u) * norm(v))).max(0.0)
}

/// Reduced density matrix on `kept` (in the given order) by summing over
/// every pair of full basis indices that agree on the traced parties.
pub fn partial_trace(dims: &[usize], amps: &[C64], kept: &[usize]) -> CMatrix {
    let kept_dims: Vec<usize> = kept.iter().map(|&p| dims[p]).collect();
    let size: usize = kept_dims.iter().product();
    let total = amps.len();
    let mut rho = CMatrix::zeros(size, size);
    for x in 0..total {
        let ix = digits(x, dims);
        for y in 0..total {
            let iy = digits(y, dims);
            let traced_agree = (0..dims.len()).filter(|p| !kept.contains(p)).all(|p| ix[p] == iy[p]);
            if !traced_agree {
                continue;
            }
            let r = flat_index(&kept.iter().map(|&p| ix[p]).collect::<Vec<_>>(), &kept_dims);
            let c = flat_index(&kept.iter().map(|&p| iy[p]).collect::<Vec<_>>(), &kept_dims);
            rho[(r, c)] += amps[x] * amps[y].conj();
        }
    }
    rho
}

/// Eigenvalues of a Hermitian matrix, descending.
pub fn eigenvalues(h: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = h.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Singular values of a 2×2 matrix from `σ² = (F ± √(F² − 4|det|²)) / 2`.
pub fn singular_values_2x2(m: &CMatrix) -> [f64; 2] {
    let f = m.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let det = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).norm();
    let disc = (f * f - 4.0 * det * det).max(0.0).sqrt();
    [((f + disc) / 2.0).sqrt(), ((f - disc) / 2.0).max(0.0).sqrt()]
}

/// `⟨e_ℓ ⊗ e_m ⊗ e_n|ψ⟩` for column vectors taken from the three bases.
pub fn frame_coefficients(state: &StateVector, bases: &[CMatrix; 3]) -> Vec<Vec<Vec<C64>>> {
    let v = DVector::from_column_slice(state.amps());
    (0..bases[0].ncols())
        .map(|l| {
            (0..bases[1].ncols())
                .map(|m| {
                    (0..bases[2].ncols())
                        .map(|n| {
                            let e = kron(&kron(&bases[0].columns(l, 1).into_owned(), &bases[1].columns(m, 1).into_owned()), &bases[2].columns(n, 1).into_owned());
                            e.column(0).dotc(&v)
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn pauli(name: char) -> CMatrix {
    let o = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let z = zero();
    match name {
        'X' => CMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        'Y' => CMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        'Z' => CMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
        _ => CMatrix::identity(2, 2),
    }
}

pub fn ghz() -> StateVector {
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut a = vec![zero(); 8];
    a[0] = s;
    a[7] = s;
    StateVector::new(vec![2, 2, 2], a).unwrap()
}

pub fn w_state() -> StateVector {
    let w = C64::new(1.0 / 3f64.sqrt(), 0.0);
    let mut a = vec![zero(); 8];
    a[1] = w;
    a[2] = w;
    a[4] = w;
    StateVector::new(vec![2, 2, 2], a).unwrap()
}

pub fn two_qubit(a: f64, b: f64) -> StateVector {
    StateVector::new(vec![2, 2], vec![C64::new(a, 0.0), zero(), zero(), C64::new(b, 0.0)]).unwrap()
}

/// `{|+⟩⟨+|, |−⟩⟨−|}`.
pub fn plus_minus() -> Vec<CMatrix> {
    let h = C64::new(0.5, 0.0);
    vec![CMatrix::from_row_slice(2, 2, &[h, h, h, h]), CMatrix::from_row_slice(2, 2, &[h, -h, -h, h])]
}

pub fn computational(dim: usize) -> Vec<CMatrix> {
    (0..dim)
        .map(|k| {
            let mut m = CMatrix::zeros(dim, dim);
            m[(k, k)] = C64::new(1.0, 0.0);
            m
        })
        .collect()
}

/// Runs the `locsim` binary in `dir` and returns its exit code and stdout.
pub fn run_cli(dir: &std::path::Path, args: &[&str]) -> (i32, String) {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_locsim")).current_dir(dir).args(args).output().expect("spawn locsim");
    (out.status.code().unwrap_or(-1), String::from_utf8(out.stdout).expect("utf-8 report"))
}

/// The report with its `wall_time_ms` line removed, in either output format.
pub fn report_body(report: &str) -> String {
    let timing = |l: &str| {
        let l = l.trim_start();
        l.starts_with("\"wall_time_ms\"") || l.starts_with("wall_time_ms = ")
    };
    report.lines().filter(|l| !timing(l)).collect::<Vec<_>>().join("\n")
}

/// A fresh scratch directory under the target directory.
pub fn scratch_dir(name: &str) -> std::path::PathBuf {
    let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Right-hand side and A-flattening built from Kronecker-product inner
/// products `⟨ℓ_A k_B n_C|φ⟩`, with Bob's full frame on the middle index.
pub fn oracle_equation(state: &StateVector, frame: &TripartiteSchmidtFrame, op: &CMatrix) -> (CMatrix, CMatrix) {
    let bases = [frame.bases[0].clone(), frame.frame(BOB), frame.bases[2].clone()];
    let flatten = |t: Vec<Vec<Vec<C64>>>| {
        let (ra, db, rc) = (t.len(), t[0].len(), t[0][0].len());
        CMatrix::from_fn(ra, db * rc, |l, kn| t[l][kn / rc][kn % rc])
    };
    let a = flatten(frame_coefficients(state, &bases));
    let branch = StateVector::from_amplitudes(state.dims().to_vec(), apply(state, BOB, op), f64::INFINITY, false).unwrap();
    (a, flatten(frame_coefficients(&branch, &bases)))
}

/// Least-squares solution of `X A = R` through a Householder QR of `A†`.
pub fn least_squares(a: &CMatrix, r: &CMatrix) -> CMatrix {
    let qr = a.adjoint().qr();
    let (q, tri) = (qr.q(), qr.r());
    // X R† = r Q  ⇔  R X† = (r Q)†
    let rhs = (r * q).adjoint();
    tri.solve_upper_triangular(&rhs).expect("full row rank").adjoint()
}

/// Bob's block unitary placed in his Schmidt frame.
pub fn block_instance(dims: &[usize], blocks: &[usize], seed: Seed) -> (StateVector, CMatrix) {
    let state = gen_degenerate_state(dims, blocks, seed.child(0)).unwrap();
    let sd = schmidt_decompose(&state, &Bipartition::new(vec![0], 2).unwrap(), RANK_TOL).unwrap();
    let mut sizes = blocks.to_vec();
    let kernel = dims[1] - sizes.iter().sum::<usize>();
    if kernel > 0 {
        sizes.push(kernel);
    }
    let frame_op = gen_block_unitary(&sizes, seed.child(1)).unwrap();
    (state, from_schmidt_frame(&frame_op, &sd.right_basis).unwrap())
}
