//! Grid runs over `(n, seed)` and the CSV they produce.

use std::io::{Read, Write};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::synthetic::{chain_stream, default_radius, generate_synthetic, EVAL_STREAM};
use crate::error::{domain, Error, Result};
use crate::model::{excess_risk_mc, lambda_from_constants, UniformCube};
use crate::prior::PriorSpec;
use crate::sampler::{chain_rng, draw_estimator, ChainConfig};
use crate::wavelet::WaveletSpec;

pub const CSV_COLUMNS: [&str; 17] = [
    "seed",
    "n",
    "p",
    "d_true",
    "sparsity_true",
    "link_family",
    "lambda",
    "chain_steps",
    "d_hat",
    "sparsity_hat",
    "M_hat",
    "empirical_risk",
    "excess_risk",
    "excess_stderr",
    "acc_struct",
    "acc_local",
    "wall_time_s",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    pub d_true: usize,
    pub sparsity_true: usize,
    pub link_family: String,
    pub lambda: f64,
    pub chain_steps: usize,
    pub d_hat: usize,
    pub sparsity_hat: usize,
    pub m_hat: u32,
    pub empirical_risk: f64,
    pub excess_risk: f64,
    pub excess_stderr: f64,
    pub acc_struct: f64,
    pub acc_local: f64,
    pub wall_time_s: f64,
}

impl ExperimentRow {
    fn record(&self) -> Vec<String> {
        vec![
            self.seed.to_string(),
            self.n.to_string(),
            self.p.to_string(),
            self.d_true.to_string(),
            self.sparsity_true.to_string(),
            self.link_family.clone(),
            self.lambda.to_string(),
            self.chain_steps.to_string(),
            self.d_hat.to_string(),
            self.sparsity_hat.to_string(),
            self.m_hat.to_string(),
            self.empirical_risk.to_string(),
            self.excess_risk.to_string(),
            self.excess_stderr.to_string(),
            self.acc_struct.to_string(),
            self.acc_local.to_string(),
            self.wall_time_s.to_string(),
        ]
    }

    fn from_record(rec: &csv::StringRecord, line: usize) -> Result<Self> {
        let field = |i: usize| -> Result<&str> {
            rec.get(i).ok_or_else(|| Error::Config {
                line,
                msg: format!("missing column `{}`", CSV_COLUMNS[i]),
            })
        };
        fn num<T: std::str::FromStr>(s: &str, line: usize, col: &str) -> Result<T> {
            s.trim().parse().map_err(|_| Error::Config {
                line,
                msg: format!("bad value `{s}` in column `{col}`"),
            })
        }
        macro_rules! col {
            ($i:expr) => {
                num(field($i)?, line, CSV_COLUMNS[$i])?
            };
        }
        Ok(Self {
            seed: col!(0),
            n: col!(1),
            p: col!(2),
            d_true: col!(3),
            sparsity_true: col!(4),
            link_family: field(5)?.to_string(),
            lambda: col!(6),
            chain_steps: col!(7),
            d_hat: col!(8),
            sparsity_hat: col!(9),
            m_hat: col!(10),
            empirical_risk: col!(11),
            excess_risk: col!(12),
            excess_stderr: col!(13),
            acc_struct: col!(14),
            acc_local: col!(15),
            wall_time_s: col!(16),
        })
    }
}

/// Prior for one row of the grid.
pub fn prior_for(cfg: &ExperimentConfig, n: usize) -> Result<PriorSpec> {
    let spec = Arc::new(WaveletSpec::new(cfg.wavelet_order, cfg.table_resolution)?);
    let radius = cfg.radius.unwrap_or_else(|| default_radius(cfg, &spec));
    Ok(PriorSpec::new(cfg.p, n, cfg.c_bound, radius, spec)?.with_max_coefficients(cfg.max_coefficients))
}

/// `λ` for sample size `n`: Theorem-rule temperature times `lambda_scale`.
///
/// Zero noise satisfies the moment condition for every `σ > 0`, so `σ = 0`
/// uses the `σ → 0` limit.
pub fn lambda_for(cfg: &ExperimentConfig, n: usize) -> Result<f64> {
    let sigma = cfg.sigma.max(f64::MIN_POSITIVE);
    let gamma = cfg.gamma().max(f64::MIN_POSITIVE);
    Ok(lambda_from_constants(n, cfg.c_bound, gamma, sigma)?.lambda * cfg.lambda_scale)
}

pub fn chain_config(cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<ChainConfig> {
    Ok(ChainConfig {
        lambda: lambda_for(cfg, n)?,
        moves: cfg.moves,
        beta_step: cfg.beta_step,
        angle_step: cfg.angle_step,
        steps: cfg.steps,
        burn_in: cfg.burn_in,
        thin: cfg.thin(),
        adapt: true,
        seed,
    })
}

/// One `(n, seed)` cell: simulate, draw the estimator, measure its excess risk.
pub fn run_row(cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<ExperimentRow> {
    let start = Instant::now();
    let (data, truth) = generate_synthetic(cfg, n, seed)?;
    let prior = prior_for(cfg, n)?;
    let chain = chain_config(cfg, n, seed)?;
    let (state, risk, res) = draw_estimator(&data, &prior, &chain, &mut chain_rng(seed, chain_stream(n)))?;
    let cube = UniformCube {
        p: cfg.p,
        k_bound: cfg.k_bound,
    };
    let eval_seed = seed ^ (EVAL_STREAM << 56);
    let excess = excess_risk_mc(&state, &|x| truth.regression(x), &cube, cfg.n_eval, eval_seed)?;
    Ok(ExperimentRow {
        seed,
        n,
        p: cfg.p,
        d_true: cfg.d_true,
        sparsity_true: cfg.sparsity_true,
        link_family: cfg.link_family.name().to_string(),
        lambda: chain.lambda,
        chain_steps: chain.steps,
        d_hat: state.d(),
        sparsity_hat: state.sparsity(),
        m_hat: state.level(),
        empirical_risk: risk,
        excess_risk: excess.estimate,
        excess_stderr: excess.std_error,
        acc_struct: res.structural_acceptance(),
        acc_local: res.local_acceptance(),
        wall_time_s: if cfg.record_wall_time {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        },
    })
}

/// Every `(n, seed)` cell on a pool of `threads` workers (all cores when `None`),
/// sorted by `(n, seed)`.
pub fn run_experiment(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    let cells: Vec<(usize, u64)> = cfg
        .n_grid
        .iter()
        .flat_map(|n| cfg.seeds.iter().map(move |s| (*n, *s)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Error::Internal(e.to_string()))?;
    let mut rows = pool.install(|| {
        cells
            .par_iter()
            .map(|(n, seed)| {
                let row = run_row(cfg, *n, *seed);
                if let Ok(r) = &row {
                    log::info!("n={} seed={} excess={:.4e} d̂={} ‖Î‖={} M̂={}", n, seed, r.excess_risk, r.d_hat, r.sparsity_hat, r.m_hat);
                }
                row
            })
            .collect::<Result<Vec<_>>>()
    })?;
    rows.sort_by_key(|r| (r.n, r.seed));
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[ExperimentRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ExperimentRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().map(str::trim).ne(CSV_COLUMNS) {
        return domain(format!("unexpected CSV header: {:?}", headers.iter().collect::<Vec<_>>()));
    }
    rdr.records()
        .enumerate()
        .map(|(i, rec)| ExperimentRow::from_record(&rec?, i + 2))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            p: 5,
            n_grid: vec![40, 80],
            sparsity_true: 2,
            seeds: vec![3, 1],
            steps: 400,
            burn_in: 200,
            n_eval: 500,
            ..Default::default()
        }
    }

    #[test]
    fn rows_cover_the_grid_sorted() {
        let rows = run_experiment(&tiny(), Some(2)).unwrap();
        assert_eq!(rows.len(), 4);
        let keys: Vec<(usize, u64)> = rows.iter().map(|r| (r.n, r.seed)).collect();
        assert_eq!(keys, vec![(40, 1), (40, 3), (80, 1), (80, 3)]);
        assert!(rows.iter().all(|r| r.wall_time_s == 0.0));
    }

    #[test]
    fn csv_round_trip() {
        let rows = run_experiment(&tiny(), Some(1)).unwrap();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&CSV_COLUMNS.join(",")));
        assert_eq!(read_csv(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn lambda_rule() {
        let cfg = ExperimentConfig {
            sigma: 1.0,
            gamma: Some(1.0),
            ..Default::default()
        };
        assert!((lambda_for(&cfg, 980).unwrap() - 10.0).abs() < 1e-12);
        let noiseless = ExperimentConfig { sigma: 0.0, ..cfg };
        assert!((lambda_for(&noiseless, 900).unwrap() - 10.0).abs() < 1e-12);
    }
}
