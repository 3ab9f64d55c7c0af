//! Draws from the sieve prior and compares empirical structure marginals with the closed form.

use std::sync::Arc;

use mimpac::prior::{count_index_sets, sample_prior, PriorSpec};
use mimpac::sampler::chain_rng;
use mimpac::wavelet::WaveletSpec;

fn main() -> mimpac::Result<()> {
    let (p, n) = (4, 4);
    let spec = PriorSpec::new(p, n, 1.0, 1, Arc::new(WaveletSpec::default()))?;
    let w = spec.weights();
    let mut rng = chain_rng(1, 0);
    let draws = 50_000;
    let mut dims = vec![0usize; p];
    let mut levels = vec![0usize; n + 1];
    for _ in 0..draws {
        let st = sample_prior(&spec, &mut rng)?;
        st.validate(p, 1.0)?;
        dims[st.d() - 1] += 1;
        levels[st.level() as usize] += 1;
    }
    for d in 1..=p {
        println!("P(d={d}) = {:.5}  empirical {:.5}", w.dim_weight(d), dims[d - 1] as f64 / draws as f64);
    }
    for m in 0..=n as u32 {
        println!("P(M={m}) = {:.5}  empirical {:.5}", w.level_weight(m), levels[m as usize] as f64 / draws as f64);
    }
    let big = count_index_sets(3, 30, 20)?;
    println!("log |I_(3,30)| for p=20: {:.4} (exact: {:?})", big.log, big.exact);
    Ok(())
}
