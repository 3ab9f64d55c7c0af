//! Tensor Daubechies dictionary: sizes, basis values and the link norm bound.

use std::sync::Arc;

use mimpac::prior::sample_coeff_ball;
use mimpac::sampler::chain_rng;
use mimpac::wavelet::{WaveletDictionary, WaveletIndex, WaveletSpec};

fn main() -> mimpac::Result<()> {
    let spec = Arc::new(WaveletSpec::default());
    println!("order {} support [0, {}] L = {:.4}", spec.order(), spec.support_len(), spec.l_const());
    for (d, m, n) in [(1, 0, 1), (1, 1, 1), (2, 0, 2), (2, 2, 3)] {
        let dict = WaveletDictionary::new(spec.clone(), d, m, n)?;
        println!("|Z^{d}_({m},{n})| = {}", dict.len());
    }

    let dict = Arc::new(WaveletDictionary::new(spec.clone(), 1, 2, 2)?);
    let phi = WaveletIndex::scaling(vec![0]);
    let psi = WaveletIndex::detail(1, vec![0], 1);
    for x in [0.5, 1.0, 1.5, 2.5] {
        println!("x={x}: phi={:+.5} sqrt2*psi(2x)={:+.5}", dict.eval_basis(&phi, &[x])?, dict.eval_basis(&psi, &[x])?);
    }

    let mut rng = chain_rng(7, 0);
    let beta = sample_coeff_ball(dict.clone(), 2.0, &mut rng)?;
    let sup = (0..2000)
        .map(|i| -3.0 + 12.0 * i as f64 / 1999.0)
        .map(|x| beta.eval_link(&[x]).map(f64::abs))
        .collect::<mimpac::Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    println!("random link: grid sup {sup:.4} <= norm {:.4}", beta.besov_norm());
    Ok(())
}
