mod common;

use common::*;
use locsim::generate::{
    gen_block_unitary, gen_degenerate_state, gen_measurement_set, gen_random_state, gen_random_unitary, gen_schmidt_decomposable, Seed,
};
use locsim::linalg::{completeness_residual, unitarity_residual};
use locsim::schmidt::{check_schmidt_decomposable, schmidt_decompose, RANK_TOL};
use locsim::tensor::Bipartition;
use locsim::unitary_sim::{check_unitary_simulable, from_schmidt_frame, SimTolerances};

#[test]
fn haar_states_have_well_separated_schmidt_coefficients() {
    let cut = Bipartition::new(vec![0], 2).unwrap();
    let mut gaps = Vec::new();
    for s in 0..1000 {
        let state = gen_random_state(&[2, 2], Seed::new(s)).unwrap();
        let sd = schmidt_decompose(&state, &cut, RANK_TOL).unwrap();
        assert_eq!(sd.rank(), 2);
        gaps.push(sd.coeffs[0] - sd.coeffs[1]);
    }
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    assert!(mean > 0.2, "mean gap {mean}");
    assert!(gaps.iter().all(|&g| g > 1e-8));
}

#[test]
fn haar_eigenphases_are_roughly_uniform() {
    const BINS: usize = 8;
    let mut counts = [0usize; BINS];
    for s in 0..500 {
        let u = gen_random_unitary(4, Seed::new(s)).unwrap();
        let ev = faer::Mat::from_fn(4, 4, |i, j| u[(i, j)]).eigenvalues().unwrap();
        for z in ev {
            assert!((z.norm() - 1.0).abs() < 1e-10);
            let t = (z.arg() + std::f64::consts::PI) / std::f64::consts::TAU;
            counts[((t * BINS as f64) as usize).min(BINS - 1)] += 1;
        }
    }
    let expected = 2000.0 / BINS as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 7 degrees of freedom; 24.3 is the 0.1% tail
    assert!(chi2 < 24.3, "chi2 {chi2} counts {counts:?}");
}

#[test]
fn matching_block_unitaries_are_always_simulable() {
    let blocks = [2, 1];
    for s in 0..200 {
        let seed = Seed::new(s);
        let state = gen_degenerate_state(&[3, 3], &blocks, seed.child(0)).unwrap();
        let sd = schmidt_decompose(&state, &Bipartition::new(vec![0], 2).unwrap(), RANK_TOL).unwrap();
        let u = from_schmidt_frame(&gen_block_unitary(&blocks, seed.child(1)).unwrap(), &sd.right_basis).unwrap();
        assert!(check_unitary_simulable(&state, &u, &SimTolerances::default()).unwrap().simulable, "seed {s}");
    }
}

#[test]
fn decomposable_generator_output_is_accepted() {
    for s in 0..200 {
        let state = gen_schmidt_decomposable(&[2, 3, 2], 2, Seed::new(s)).unwrap();
        assert!(check_schmidt_decomposable(&state, 1e-8).unwrap().is_decomposable(), "seed {s}");
    }
}

#[test]
fn generated_sets_and_unitaries_are_exact() {
    for s in 0..100 {
        let seed = Seed::new(s);
        for d in 2..=4 {
            assert!(unitarity_residual(&gen_random_unitary(d, seed.child(d as u64)).unwrap()) < 1e-12);
            for n in 1..=3 {
                let general = gen_measurement_set(d, n, false, 0, seed.child(10 + n as u64)).unwrap();
                assert!(completeness_residual(&general.operators) < 1e-12);
                let projective = gen_measurement_set(d, n.min(d), true, 0, seed.child(20 + n as u64)).unwrap();
                assert!(completeness_residual(&projective.operators) < 1e-12);
                for p in &projective.operators {
                    assert!(max_abs_diff(&(p * p), p) < 1e-12);
                }
            }
        }
        let b = gen_block_unitary(&[2, 1, 1], seed).unwrap();
        assert!(unitarity_residual(&b) < 1e-12);
        assert_eq!(b[(0, 3)], zero());
    }
}
