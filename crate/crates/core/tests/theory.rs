use std::sync::Arc;

use mimpac::model::{empirical_risk, ActiveIndexSet, Dataset, ModelState};
use mimpac::sampler::chain_rng;
use mimpac::theory::{approx_oracle, coeff_ball_mass_mc, kl_coeff_ball, sphere_cap_mass, TestMeasureSpec};
use mimpac::wavelet::{CoefficientVector, WaveletDictionary, WaveletSpec};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn t2_dominates_measured_localization_cost() {
    let mut rng = chain_rng(21, 0);
    let c_bound = 1.0;
    let draws = 200_000;
    for rows in [vec![1], vec![2], vec![1, 2], vec![3, 1]] {
        for eta in [0.5, 1.0] {
            for gamma in [0.5, 1.0] {
                for k in 1..=3 {
                    let radii = TestMeasureSpec::new(eta, gamma).unwrap();
                    let sparsity: usize = rows.iter().sum();
                    let mut measured = 0.0;
                    for &m in &rows {
                        let cap = sphere_cap_mass(m, eta, draws, &mut rng).unwrap();
                        measured += -(cap.estimate + 3.0 * cap.std_error).ln();
                    }
                    let ball = coeff_ball_mass_mc(gamma, c_bound, k, draws, &mut rng).unwrap();
                    measured += -(ball.estimate + 3.0 * ball.std_error).ln();
                    let bound = radii.t2(sparsity, k, c_bound);
                    assert!(
                        bound >= measured,
                        "rows={rows:?} η={eta} γ={gamma} k={k}: T₂ {bound} < {measured}"
                    );
                    let exact_ball = kl_coeff_ball(gamma, c_bound, k).unwrap();
                    assert!(bound >= exact_ball);
                }
            }
        }
    }
}

fn noisy_data(p: usize, n: usize, seed: u64) -> Dataset {
    let mut rng = chain_rng(seed, 5);
    let x: Vec<f64> = (0..n * p).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let y: Vec<f64> = x
        .chunks(p)
        .map(|r| 0.5 * (r[0] - r[1]).tanh() + 0.1 * rng.random_range(-1.0..=1.0))
        .collect();
    Dataset::new(x, y, p, 1.0, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn oracle_is_never_worse_than_the_zero_link(seed in 0u64..10_000, budget in 1usize..40) {
        let p = 4;
        let data = noisy_data(p, 200, seed);
        let set = ActiveIndexSet { rows: vec![vec![0, 1]] };
        let dict = Arc::new(WaveletDictionary::new(Arc::new(WaveletSpec::default()), 1, 0, 4).unwrap());
        let fit = approx_oracle(&data, &set, dict.clone(), 1.0, budget, 2, &mut chain_rng(seed, 1)).unwrap();
        let zero = ModelState::new(fit.state.theta.clone(), CoefficientVector::zeros(dict)).unwrap();
        prop_assert!(fit.risk <= empirical_risk(&zero, &data) + 1e-12);
        prop_assert!((fit.risk - empirical_risk(&fit.state, &data)).abs() < 1e-9);
        prop_assert!(fit.state.coeffs.besov_norm() <= 1.0 + 1e-9);
        prop_assert!(fit.evaluations <= budget);
    }
}
