//! A small experiment grid and the fitted log-log slope of median excess risk.

use mimpac::harness::{fit_rate, run_experiment, write_csv, ExperimentConfig, LinkFamily};

fn main() -> mimpac::Result<()> {
    let cfg = ExperimentConfig {
        p: 6,
        n_grid: vec![100, 200, 400, 800],
        d_true: 1,
        sparsity_true: 2,
        link_family: LinkFamily::Wavelet,
        sigma: 0.05,
        seeds: vec![1, 2, 3],
        steps: 6000,
        burn_in: 4000,
        n_eval: 20_000,
        ..ExperimentConfig::default()
    };
    let rows = run_experiment(&cfg, None)?;
    write_csv(&rows, std::io::stdout())?;
    let fit = fit_rate(&rows)?;
    for (n, m) in &fit.medians {
        println!("n={n}: median excess {m:.4e}");
    }
    println!("slope {:.3}, intercept {:.3}", fit.slope, fit.intercept);
    Ok(())
}
