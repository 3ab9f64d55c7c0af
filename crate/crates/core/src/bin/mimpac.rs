use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mimpac::harness::{
    experiment::{chain_config, prior_for},
    fit_rate, generate_synthetic, read_csv, run_checks, run_experiment, write_checks_csv, write_csv,
    ExperimentConfig,
};
use mimpac::model::{empirical_risk, excess_risk_mc, Dataset, UniformCube};
use mimpac::sampler::{chain_rng, draw_estimator};

#[derive(Parser)]
#[command(name = "mimpac", version, about = "PAC-Bayesian sparse multi-index regression")]
struct Cli {
    /// Experiment configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed list with a single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (all cores when omitted).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit a synthetic dataset as CSV (`x0..x{p-1},y`).
    Simulate {
        /// Sample size; defaults to the first entry of the n grid.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Draw one estimator and report its structure and risks.
    Fit {
        /// Dataset CSV as written by `simulate`; simulated from the config when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Run the full (n, seed) grid and write the result CSV.
    Experiment,
    /// Fit the log-log rate of median excess risk from an experiment CSV.
    Rate {
        input: PathBuf,
    },
    /// Run the verification suite and write a pass/fail CSV.
    Check,
}

fn output(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn read_dataset(path: &PathBuf, cfg: &ExperimentConfig) -> mimpac::Result<Dataset> {
    let mut rdr = csv::Reader::from_path(path)?;
    let p = rdr.headers()?.len().saturating_sub(1);
    let mut x = vec![];
    let mut y = vec![];
    for rec in rdr.records() {
        let rec = rec?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| mimpac::Error::Domain(format!("bad number in dataset: {e}")))?;
        if vals.len() != p + 1 {
            return Err(mimpac::Error::Domain("ragged dataset row".into()));
        }
        x.extend_from_slice(&vals[..p]);
        y.push(vals[p]);
    }
    Dataset::new(x, y, p, cfg.k_bound, cfg.c_bound)
}

fn run(cli: Cli) -> mimpac::Result<bool> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_path(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seeds = vec![s];
    }
    let seed = cfg.seeds[0];
    match cli.cmd {
        Command::Simulate { n } => {
            let n = n.unwrap_or(cfg.n_grid[0]);
            let (data, _) = generate_synthetic(&cfg, n, seed)?;
            let mut w = csv::Writer::from_writer(output(&cli.out)?);
            let mut header: Vec<String> = (0..data.p()).map(|j| format!("x{j}")).collect();
            header.push("y".into());
            w.write_record(&header)?;
            for (x, y) in data.rows().zip(data.labels()) {
                w.write_record(x.iter().chain([y]).map(|v| v.to_string()))?;
            }
            w.flush()?;
        }
        Command::Fit { data, n } => {
            let n = n.unwrap_or(cfg.n_grid[0]);
            let (dataset, truth) = match &data {
                Some(path) => (read_dataset(path, &cfg)?, None),
                None => {
                    let (d, t) = generate_synthetic(&cfg, n, seed)?;
                    (d, Some(t))
                }
            };
            if dataset.p() != cfg.p {
                cfg.p = dataset.p();
            }
            let prior = prior_for(&cfg, dataset.n())?;
            let chain = chain_config(&cfg, dataset.n(), seed)?;
            let (state, _, res) = draw_estimator(&dataset, &prior, &chain, &mut chain_rng(seed, 0))?;
            let mut w = output(&cli.out)?;
            writeln!(w, "lambda = {}", chain.lambda)?;
            writeln!(w, "d_hat = {}", state.d())?;
            writeln!(w, "sparsity_hat = {}", state.sparsity())?;
            writeln!(w, "M_hat = {}", state.level())?;
            for (i, row) in state.theta.rows.iter().enumerate() {
                writeln!(w, "theta_{i} = {:?} on {:?}", row.values, row.support)?;
            }
            writeln!(w, "empirical_risk = {}", empirical_risk(&state, &dataset))?;
            writeln!(w, "acc_struct = {:.4}", res.structural_acceptance())?;
            writeln!(w, "acc_local = {:.4}", res.local_acceptance())?;
            if let Some(t) = truth {
                let cube = UniformCube {
                    p: cfg.p,
                    k_bound: cfg.k_bound,
                };
                let e = excess_risk_mc(&state, &|x| t.regression(x), &cube, cfg.n_eval, seed)?;
                writeln!(w, "excess_risk = {} ± {}", e.estimate, e.std_error)?;
            }
            w.flush()?;
        }
        Command::Experiment => {
            let rows = run_experiment(&cfg, cli.threads)?;
            let path = cli.out.clone().or(cfg.output.clone());
            write_csv(&rows, output(&path)?)?;
        }
        Command::Rate { input } => {
            let rows = read_csv(File::open(&input)?)?;
            let fit = fit_rate(&rows)?;
            let mut w = output(&cli.out)?;
            writeln!(w, "n,median_excess")?;
            for (n, m) in &fit.medians {
                writeln!(w, "{n},{m:e}")?;
            }
            writeln!(w, "# slope = {:.4}", fit.slope)?;
            writeln!(w, "# intercept = {:.4}", fit.intercept)?;
            w.flush()?;
        }
        Command::Check => {
            let rows = run_checks(seed)?;
            write_checks_csv(&rows, output(&cli.out)?)?;
            let failed = rows.iter().filter(|r| !r.passed).count();
            if failed > 0 {
                eprintln!("{failed} check(s) failed");
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
