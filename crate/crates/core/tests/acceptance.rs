use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use mimpac::harness::checks::{
    check_cardinality, check_coeff_ball, check_donsker_varadhan, check_norm_inequalities, check_sphere_caps,
    check_structural_mass,
};
use mimpac::harness::{fit_rate, run_experiment, write_csv, CheckRow, ExperimentConfig, LinkFamily};
use mimpac::model::{ActiveIndexSet, Dataset, ModelState};
use mimpac::prior::{sample_coeff_ball, sample_theta, PriorSpec};
use mimpac::sampler::{chain_rng, run_chain, ChainConfig};
use mimpac::theory::approx_oracle;
use mimpac::wavelet::{covering_radius, WaveletDictionary, WaveletSpec};
use mimpac::Result;
use rand::Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn rows_outcome(rows: Vec<CheckRow>) -> Outcome {
    let failed: Vec<String> = rows
        .iter()
        .filter(|r| !r.passed)
        .map(|r| format!("{}[{}] value={:e} ref={:e}", r.check, r.case, r.value, r.reference))
        .collect();
    let noted: Vec<String> = rows
        .iter()
        .filter(|r| !r.note.is_empty() && r.note.contains("documented"))
        .map(|r| format!("{}[{}]: {}", r.check, r.case, r.note))
        .collect();
    Outcome {
        passed: failed.is_empty(),
        detail: if failed.is_empty() {
            format!("{} rows ok{}", rows.len(), if noted.is_empty() { String::new() } else { format!("; {}", noted.join("; ")) })
        } else {
            failed.join("; ")
        },
    }
}

fn total_variation(freq: &[f64], want: &[f64]) -> f64 {
    0.5 * freq.iter().zip(want).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

fn prior_recovery() -> Result<Outcome> {
    let (p, n) = (4, 4);
    let spec = PriorSpec::new(p, n, 1.0, 1, Arc::new(WaveletSpec::default()))?;
    let mut rng = chain_rng(1, 0);
    let x: Vec<f64> = (0..n * p).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let data = Dataset::new(x, y, p, 1.0, 1.0)?;
    let cfg = ChainConfig {
        lambda: 0.0,
        steps: 200_000,
        burn_in: 0,
        thin: 1,
        seed: 1,
        ..ChainConfig::default()
    };
    let res = run_chain(&data, &spec, &cfg, &mut rng)?;
    let draws = res.trace.len() as f64;
    let w = spec.weights();
    let mut d_freq = vec![0.0; p];
    let mut i_freq = vec![0.0; p * p];
    let mut m_freq = vec![0.0; n + 1];
    for t in &res.trace {
        d_freq[t.d - 1] += 1.0 / draws;
        i_freq[t.sparsity - 1] += 1.0 / draws;
        m_freq[t.level as usize] += 1.0 / draws;
    }
    let d_want: Vec<f64> = (1..=p).map(|d| w.dim_weight(d)).collect();
    let i_want: Vec<f64> = (1..=p * p)
        .map(|i| (1..=p).filter(|d| i >= *d && i <= d * p).map(|d| w.dim_weight(d) * w.sparsity_weight(d, i)).sum())
        .collect();
    let m_want: Vec<f64> = (0..=n as u32).map(|m| w.level_weight(m)).collect();
    let tv = [
        total_variation(&d_freq, &d_want),
        total_variation(&i_freq, &i_want),
        total_variation(&m_freq, &m_want),
    ];
    Ok(Outcome {
        passed: tv.iter().all(|t| *t <= 0.02),
        detail: format!("TV d={:.4} |I|={:.4} M={:.4} (limit 0.02)", tv[0], tv[1], tv[2]),
    })
}

fn rate_config() -> ExperimentConfig {
    ExperimentConfig {
        p: 20,
        n_grid: vec![250, 500, 1000, 2000, 4000],
        d_true: 1,
        sparsity_true: 3,
        link_family: LinkFamily::Smooth,
        sigma: 0.1,
        seeds: vec![1, 2, 3, 4, 5],
        ..ExperimentConfig::default()
    }
}

fn rate_trend() -> Result<Outcome> {
    let rows = run_experiment(&rate_config(), None)?;
    let fit = fit_rate(&rows)?;
    let first = fit.medians.first().map_or(f64::NAN, |m| m.1);
    let last = fit.medians.last().map_or(f64::NAN, |m| m.1);
    let in_window = (-1.2..=-0.45).contains(&fit.slope);
    Ok(Outcome {
        passed: in_window && last < first,
        detail: format!(
            "slope {:.4} (window [-1.2, -0.45]); median excess n=250 {:.4e}, n=4000 {:.4e}; medians {:?}",
            fit.slope, first, last, fit.medians
        ),
    })
}

fn planted_oracle() -> Result<Outcome> {
    let (p, n) = (5, 2000);
    let spec = Arc::new(WaveletSpec::default());
    let dict = Arc::new(WaveletDictionary::new(spec.clone(), 1, 1, covering_radius(2f64.sqrt(), &spec))?);
    let set = ActiveIndexSet { rows: vec![vec![1, 3]] };
    let mut hits = 0;
    let mut risks = vec![];
    for seed in 0..10 {
        let mut rng = chain_rng(seed, 9);
        let truth = ModelState::new(sample_theta(&set, &mut rng), sample_coeff_ball(dict.clone(), 0.5, &mut rng)?)?;
        let x: Vec<f64> = (0..n * p).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let y = x.chunks(p).map(|r| truth.predict(r)).collect::<Result<Vec<f64>>>()?;
        let data = Dataset::new(x, y, p, 1.0, 1.0)?;
        let fit = approx_oracle(&data, &set, dict.clone(), 1.0, 2_000, 3, &mut rng)?;
        if fit.risk <= 1e-4 {
            hits += 1;
        }
        risks.push(format!("{:.2e}", fit.risk));
    }
    Ok(Outcome {
        passed: hits >= 9,
        detail: format!("{hits}/10 seeds with risk <= 1e-4; risks [{}]", risks.join(", ")),
    })
}

fn determinism() -> Result<Outcome> {
    let cfg = ExperimentConfig {
        p: 6,
        n_grid: vec![60, 120],
        d_true: 1,
        sparsity_true: 2,
        seeds: vec![1, 2, 3],
        steps: 600,
        burn_in: 300,
        n_eval: 2000,
        ..ExperimentConfig::default()
    };
    let csv = |threads| -> Result<Vec<u8>> {
        let mut out = vec![];
        write_csv(&run_experiment(&cfg, Some(threads))?, &mut out)?;
        Ok(out)
    };
    let a = csv(1)?;
    let b = csv(1)?;
    let c = csv(4)?;
    Ok(Outcome {
        passed: a == b && a == c && !a.is_empty(),
        detail: format!("{} bytes; rerun identical {}; 1 vs 4 threads identical {}", a.len(), a == b, a == c),
    })
}

fn main() -> ExitCode {
    type Criterion = (&'static str, Box<dyn Fn() -> Result<Outcome>>);
    let criteria: Vec<Criterion> = vec![
        ("1 prior recovery", Box::new(prior_recovery)),
        ("2 donsker-varadhan", Box::new(|| Ok(rows_outcome(check_donsker_varadhan(100, 10_000, &mut chain_rng(2, 0))?)))),
        ("3 coefficient-ball kl", Box::new(|| Ok(rows_outcome(check_coeff_ball(1_000_000, &mut chain_rng(3, 0))?)))),
        ("4 sphere-cap kl bound", Box::new(|| Ok(rows_outcome(check_sphere_caps(1_000_000, &mut chain_rng(4, 0))?)))),
        ("5 structural mass identity", Box::new(|| Ok(rows_outcome(check_structural_mass()?)))),
        ("6 cardinality bound", Box::new(|| Ok(rows_outcome(check_cardinality())))),
        ("7 norm inequalities", Box::new(|| Ok(rows_outcome(check_norm_inequalities(200, &mut chain_rng(7, 0))?)))),
        ("8 rate trend", Box::new(rate_trend)),
        ("9 planted oracle", Box::new(planted_oracle)),
        ("10 determinism", Box::new(determinism)),
    ];
    let only = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failures = 0;
    for (name, run) in &criteria {
        if only.as_deref().is_some_and(|o| !name.contains(o)) {
            continue;
        }
        let start = Instant::now();
        let outcome = run().unwrap_or_else(|e| Outcome {
            passed: false,
            detail: format!("error: {e}"),
        });
        let secs = start.elapsed().as_secs_f64();
        println!(
            "criterion {name}: {} ({secs:.1}s) {}",
            if outcome.passed { "PASS" } else { "FAIL" },
            outcome.detail
        );
        if !outcome.passed {
            failures += 1;
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
