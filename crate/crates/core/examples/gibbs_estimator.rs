//! One Gibbs-posterior draw on synthetic single-index data.

use mimpac::harness::experiment::{chain_config, prior_for};
use mimpac::harness::{generate_synthetic, ExperimentConfig, LinkFamily};
use mimpac::model::{excess_risk_mc, UniformCube};
use mimpac::sampler::{chain_rng, draw_estimator, MoveKind};

fn main() -> mimpac::Result<()> {
    let cfg = ExperimentConfig {
        p: 8,
        d_true: 1,
        sparsity_true: 2,
        link_family: LinkFamily::Smooth,
        sigma: 0.1,
        steps: 20_000,
        burn_in: 15_000,
        ..ExperimentConfig::default()
    };
    let n = 1000;
    let (data, truth) = generate_synthetic(&cfg, n, 3)?;
    let prior = prior_for(&cfg, n)?;
    let chain = chain_config(&cfg, n, 3)?;
    println!("lambda = {:.3}", chain.lambda);
    let (state, risk, res) = draw_estimator(&data, &prior, &chain, &mut chain_rng(3, 1))?;
    println!("true supports {:?}", truth.theta.index_set().rows);
    println!("draw: d={} I={:?} M={} R_n={risk:.5}", state.d(), state.index_set().rows, state.level());
    for kind in MoveKind::ALL {
        let s = res.stats_for(kind);
        println!("{:>14}: {:>6} proposed, acceptance {:.3}", kind.name(), s.proposed, s.rate());
    }
    let cube = UniformCube { p: cfg.p, k_bound: cfg.k_bound };
    let excess = excess_risk_mc(&state, &|x| truth.regression(x), &cube, 50_000, 0)?;
    println!("excess risk {:.5} +- {:.5}", excess.estimate, excess.std_error);
    Ok(())
}
