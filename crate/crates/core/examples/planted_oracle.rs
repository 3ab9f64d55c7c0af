//! Recovers a planted single-index model with the approximate oracle.

use std::sync::Arc;

use mimpac::model::{ActiveIndexSet, Dataset, ModelState};
use mimpac::prior::{sample_coeff_ball, sample_theta};
use mimpac::sampler::chain_rng;
use mimpac::theory::approx_oracle;
use mimpac::wavelet::{covering_radius, WaveletDictionary, WaveletSpec};
use rand::Rng;

fn main() -> mimpac::Result<()> {
    let (p, n) = (5, 2000);
    let spec = Arc::new(WaveletSpec::default());
    let dict = Arc::new(WaveletDictionary::new(spec.clone(), 1, 1, covering_radius(2f64.sqrt(), &spec))?);
    let set = ActiveIndexSet { rows: vec![vec![1, 3]] };
    let mut rng = chain_rng(4, 0);
    let truth = ModelState::new(sample_theta(&set, &mut rng), sample_coeff_ball(dict.clone(), 0.5, &mut rng)?)?;
    let x: Vec<f64> = (0..n * p).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let y = x.chunks(p).map(|r| truth.predict(r)).collect::<mimpac::Result<Vec<f64>>>()?;
    let data = Dataset::new(x, y, p, 1.0, 1.0)?;
    let fit = approx_oracle(&data, &set, dict, 1.0, 2000, 3, &mut rng)?;
    println!("planted rows {:?}", truth.theta.rows[0].values);
    println!("fitted  rows {:?}", fit.state.theta.rows[0].values);
    println!("risk {:.3e} after {} fits (exhausted: {})", fit.risk, fit.evaluations, fit.exhausted);
    Ok(())
}
