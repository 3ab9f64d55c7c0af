use std::sync::Arc;

use mimpac::model::{empirical_risk, excess_risk_mc, CovariateSampler, Dataset, ModelState, UniformCube};
use mimpac::prior::{sample_prior, PriorSpec};
use mimpac::wavelet::WaveletSpec;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn prior(p: usize) -> PriorSpec {
    PriorSpec::new(p, 2, 1.0, 2, Arc::new(WaveletSpec::default())).unwrap()
}

fn state(p: usize, seed: u64) -> ModelState {
    sample_prior(&prior(p), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn dataset(p: usize, n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n * p).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    Dataset::new(x, y, p, 1.0, 1.0).unwrap()
}

/// Four equally likely atoms in `[−1, 1]^3`.
struct Atoms;

const ATOMS: [[f64; 3]; 4] = [[0.5, -0.2, 0.9], [-0.7, 0.3, 0.1], [0.0, 1.0, -1.0], [0.25, 0.25, -0.6]];

impl CovariateSampler for Atoms {
    fn p(&self) -> usize {
        3
    }

    fn sample_into(&self, rng: &mut dyn rand::RngCore, out: &mut [f64]) {
        out.copy_from_slice(&ATOMS[rng.random_range(0..4)]);
    }
}

#[test]
fn excess_risk_on_atoms_matches_exact_sum() {
    let truth = |x: &[f64]| 0.3 * x[0] - 0.2 * x[2] * x[1];
    for seed in 0..5 {
        let st = state(3, seed);
        let exact: f64 = ATOMS
            .iter()
            .map(|x| (st.predict(x).unwrap() - truth(x)).powi(2))
            .sum::<f64>()
            / 4.0;
        let mc = excess_risk_mc(&st, &truth, &Atoms, 20_000, seed).unwrap();
        assert!(
            (mc.estimate - exact).abs() <= 3.0 * mc.std_error.max(1e-15),
            "seed {seed}: {} vs {exact} (se {})",
            mc.estimate,
            mc.std_error
        );
    }
}

#[test]
fn excess_risk_is_bit_reproducible() {
    let st = state(4, 7);
    let cube = UniformCube { p: 4, k_bound: 1.0 };
    let f = |x: &[f64]| x[0].sin();
    let a = excess_risk_mc(&st, &f, &cube, 5000, 11).unwrap();
    let b = excess_risk_mc(&st, &f, &cube, 5000, 11).unwrap();
    assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
    assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    assert!(excess_risk_mc(&st, &f, &cube, 0, 11).is_err());
}

#[test]
fn predictions_are_bounded_by_the_link_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in 0..20 {
        let st = state(5, seed);
        let bound = st.coeffs.besov_norm();
        for _ in 0..1000 {
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..=1.0)).collect();
            assert!(st.predict(&x).unwrap().abs() <= bound + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn risk_is_invariant_under_row_permutation(seed in 0u64..1000, key in any::<u64>()) {
        let (p, n) = (3, 40);
        let data = dataset(p, n, seed);
        let st = state(p, seed ^ 5);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|i| (*i as u64).wrapping_mul(key | 1).rotate_left(29));
        let x: Vec<f64> = order.iter().flat_map(|&i| data.row(i).to_vec()).collect();
        let y: Vec<f64> = order.iter().map(|&i| data.labels()[i]).collect();
        let shuffled = Dataset::new(x, y, p, 1.0, 1.0).unwrap();
        let (a, b) = (empirical_risk(&st, &data), empirical_risk(&st, &shuffled));
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn risk_is_invariant_under_row_duplication(seed in 0u64..1000) {
        let (p, n) = (2, 30);
        let data = dataset(p, n, seed);
        let st = state(p, seed ^ 9);
        let mut x = data.covariates().to_vec();
        x.extend_from_slice(data.covariates());
        let mut y = data.labels().to_vec();
        y.extend_from_slice(data.labels());
        let doubled = Dataset::new(x, y, p, 1.0, 1.0).unwrap();
        let (a, b) = (empirical_risk(&st, &data), empirical_risk(&st, &doubled));
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn risk_is_zero_exactly_for_interpolating_labels(seed in 0u64..1000, bump in 1e-6f64..0.5) {
        let (p, n) = (3, 20);
        let data = dataset(p, n, seed);
        let st = state(p, seed ^ 3);
        let fitted = Dataset::new(data.covariates().to_vec(), st.predict_dataset(&data), p, 1.0, 2.0).unwrap();
        prop_assert_eq!(empirical_risk(&st, &fitted), 0.0);
        let mut y = st.predict_dataset(&data);
        y[0] += bump;
        let off = Dataset::new(data.covariates().to_vec(), y, p, 1.0, 3.0).unwrap();
        prop_assert!(empirical_risk(&st, &off) > 0.0);
    }
}
