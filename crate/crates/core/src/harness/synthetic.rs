//! Synthetic multi-index data `Y = f*(Θ*X) + ε`.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{ExperimentConfig, LinkFamily};
use crate::error::{domain, Error, Result};
use crate::model::{Dataset, GeneratorSpec, NoiseModel, SparseMatrix, SparseRow};
use crate::prior::sample_sphere_row;
use crate::sampler::chain_rng;
use crate::wavelet::{covering_radius, CoefficientVector, WaveletDictionary, WaveletIndex, WaveletSpec};

/// Truncation of the Gaussian noise, in units of `σ`.
pub const NOISE_TRUNCATION: f64 = 4.0;

#[derive(Debug, Clone)]
pub enum TrueLink {
    Smooth { amplitude: f64 },
    Wavelet(CoefficientVector),
}

impl TrueLink {
    pub fn eval(&self, z: &[f64]) -> f64 {
        match self {
            TrueLink::Smooth { amplitude } => {
                let tail: f64 = z[1..].iter().map(|v| v * v).sum();
                amplitude * (1.5 * z[0]).sin() * (-0.5 * tail).exp()
            }
            TrueLink::Wavelet(c) => c.eval_link(z).expect("link dimension matches Θ*"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticTruth {
    pub theta: SparseMatrix,
    pub link: TrueLink,
    pub noise: NoiseModel,
    pub generator: GeneratorSpec,
}

impl SyntheticTruth {
    /// `F(x) = f*(Θ*x)`.
    pub fn regression(&self, x: &[f64]) -> f64 {
        self.link.eval(&self.theta.apply(x))
    }

    /// Largest off-diagonal or diagonal defect of `Θ*(Θ*)ᵀ − I`.
    pub fn gram_defect(&self, p: usize) -> f64 {
        let dense: Vec<Vec<f64>> = self.theta.rows.iter().map(|r| r.to_dense(p)).collect();
        let mut worst = 0.0f64;
        for (i, a) in dense.iter().enumerate() {
            for (j, b) in dense.iter().enumerate() {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                worst = worst.max((dot - f64::from(u8::from(i == j))).abs());
            }
        }
        worst
    }
}

/// Bound `B₁` on `‖Θ*X‖_∞` for covariates in `[−K, K]^p`.
pub fn image_bound(theta: &SparseMatrix, k_bound: f64) -> f64 {
    theta
        .rows
        .iter()
        .map(|r| k_bound * r.values.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Default shift radius `N` covering `[−(B₁+1), B₁+1]` with the worst-case `B₁ = K√‖Θ*‖₀`.
pub fn default_radius(cfg: &ExperimentConfig, spec: &WaveletSpec) -> u32 {
    let b1 = cfg.k_bound * (cfg.sparsity_true as f64).sqrt();
    covering_radius(b1 + 1.0, spec)
}

/// Fixed link in `ℱ_{d,M₀}(C)`: alternating scaling coefficients on the shifts
/// `{−5, −4, −3}^d`, one detail coefficient per level, scaled to `‖β‖_ℬ = amplitude`.
pub fn wavelet_link(spec: Arc<WaveletSpec>, d: usize, level: u32, amplitude: f64) -> Result<CoefficientVector> {
    let radius = covering_radius(0.0, &spec).max(5);
    let dict = Arc::new(WaveletDictionary::new(spec, d, level, radius)?);
    let mut beta = vec![0.0; dict.len()];
    let shifts = [-5i64, -4, -3];
    let mut combo = vec![0usize; d];
    'grid: loop {
        let l2: Vec<i64> = combo.iter().map(|c| shifts[*c]).collect();
        let sign = if combo.iter().sum::<usize>() % 2 == 0 { 1.0 } else { -1.0 };
        let pos = dict.position(&WaveletIndex::scaling(l2)).expect("shift inside radius");
        beta[pos] = sign;
        for slot in combo.iter_mut() {
            *slot += 1;
            if *slot < shifts.len() {
                continue 'grid;
            }
            *slot = 0;
        }
        break;
    }
    for l1 in 0..=level {
        let shift = -4 * (1i64 << l1);
        let idx = WaveletIndex::detail(l1, vec![shift; d], (1u32 << d) - 1);
        let pos = dict.position(&idx).expect("detail shift inside radius");
        beta[pos] = 0.5;
    }
    let c = CoefficientVector::new(dict.clone(), beta)?;
    let scale = amplitude / c.besov_norm();
    CoefficientVector::new(dict, c.beta().iter().map(|b| b * scale).collect())
}

fn truncated_normal<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    loop {
        let g: f64 = StandardNormal.sample(rng);
        if g.abs() <= NOISE_TRUNCATION {
            return sigma * g;
        }
    }
}

/// Draws `Θ*` (disjoint supports, uniform sphere values) and the link for `seed`.
pub fn generate_truth(cfg: &ExperimentConfig, seed: u64) -> Result<SyntheticTruth> {
    if cfg.sparsity_true > cfg.p {
        return domain(format!(
            "sparsity {} exceeds p = {}: disjoint supports are impossible",
            cfg.sparsity_true, cfg.p
        ));
    }
    if cfg.sparsity_true < cfg.d_true {
        return domain("sparsity must be at least d_true");
    }
    let mut rng = chain_rng(seed, 0);
    let coords = rand::seq::index::sample(&mut rng, cfg.p, cfg.sparsity_true).into_vec();
    let (base, extra) = (cfg.sparsity_true / cfg.d_true, cfg.sparsity_true % cfg.d_true);
    let mut rows = Vec::with_capacity(cfg.d_true);
    let mut at = 0;
    for i in 0..cfg.d_true {
        let size = base + usize::from(i < extra);
        let mut support = coords[at..at + size].to_vec();
        support.sort_unstable();
        at += size;
        rows.push(sample_sphere_row(&support, &mut rng));
    }
    let theta = SparseMatrix { rows };
    let spec = Arc::new(WaveletSpec::new(cfg.wavelet_order, cfg.table_resolution)?);
    let link = match cfg.link_family {
        LinkFamily::Smooth => TrueLink::Smooth {
            amplitude: cfg.amplitude(),
        },
        LinkFamily::Wavelet => TrueLink::Wavelet(wavelet_link(spec, cfg.d_true, cfg.link_level, cfg.amplitude())?),
    };
    let b1 = image_bound(&theta, cfg.k_bound);
    // Density of Θ*X: each coordinate is a sum of independent uniforms, bounded by its largest term's density.
    let b2 = theta
        .rows
        .iter()
        .map(|r: &SparseRow| {
            let top = r.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            1.0 / (2.0 * cfg.k_bound * top)
        })
        .product();
    Ok(SyntheticTruth {
        theta,
        link,
        noise: NoiseModel {
            sigma: cfg.sigma,
            gamma: cfg.gamma(),
        },
        generator: GeneratorSpec { b1, b2 },
    })
}

/// `n` observations for `seed`; `Θ*` and `f*` depend on the seed only.
pub fn generate_synthetic(cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<(Dataset, SyntheticTruth)> {
    let truth = generate_truth(cfg, seed)?;
    let data = sample_dataset(cfg, &truth, n, &mut chain_rng(seed, data_stream(n)))?;
    Ok((data, truth))
}

pub(crate) fn data_stream(n: usize) -> u64 {
    ((n as u64) << 2) | 1
}

pub(crate) fn chain_stream(n: usize) -> u64 {
    ((n as u64) << 2) | 2
}

/// Evaluation stream: shared by every `n` for a seed.
pub(crate) const EVAL_STREAM: u64 = 3;

fn sample_dataset<R: Rng + ?Sized>(cfg: &ExperimentConfig, truth: &SyntheticTruth, n: usize, rng: &mut R) -> Result<Dataset> {
    let p = cfg.p;
    let k = cfg.k_bound;
    let mut x = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let start = x.len();
        x.extend((0..p).map(|_| rng.random_range(-k..=k)));
        let f = truth.regression(&x[start..]);
        if f.abs() > cfg.c_bound * (1.0 + 1e-12) {
            return Err(Error::Internal(format!("|F(x)| = {} exceeds C", f.abs())));
        }
        y.push(f + truncated_normal(cfg.sigma, rng));
    }
    Dataset::new(x, y, p, k, cfg.c_bound)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ExperimentConfig {
        ExperimentConfig {
            p: 12,
            d_true: 2,
            sparsity_true: 5,
            ..Default::default()
        }
    }

    #[test]
    fn truth_rows_are_orthonormal_with_disjoint_supports() {
        for seed in 0..20 {
            let t = generate_truth(&cfg(), seed).unwrap();
            assert!(t.gram_defect(12) < 1e-12);
            assert_eq!(t.theta.rows[0].support.len(), 3);
            assert_eq!(t.theta.rows[1].support.len(), 2);
        }
    }

    #[test]
    fn noise_is_centered_and_truncated() {
        let c = ExperimentConfig { sigma: 0.3, ..cfg() };
        let (data, truth) = generate_synthetic(&c, 100_000, 4).unwrap();
        let resid: Vec<f64> = data
            .rows()
            .zip(data.labels())
            .map(|(x, y)| y - truth.regression(x))
            .collect();
        let mean = resid.iter().sum::<f64>() / resid.len() as f64;
        assert!(mean.abs() <= 3.0 * 0.3 / (1e5f64).sqrt());
        assert!(resid.iter().all(|r| r.abs() <= 4.0 * 0.3 + 1e-12));
        assert!(data.covariates().iter().all(|v| v.abs() <= c.k_bound));
    }

    #[test]
    fn wavelet_family_is_in_the_class() {
        let spec = Arc::new(WaveletSpec::default());
        for d in 1..=2 {
            let c = wavelet_link(spec.clone(), d, 1, 1.0).unwrap();
            assert!((c.besov_norm() - 1.0).abs() < 1e-12);
        }
        let c = ExperimentConfig {
            link_family: LinkFamily::Wavelet,
            ..cfg()
        };
        let (data, truth) = generate_synthetic(&c, 500, 1).unwrap();
        assert!(data.rows().all(|x| truth.regression(x).abs() <= 1.0));
    }

    #[test]
    fn impossible_supports_are_rejected() {
        let c = ExperimentConfig {
            p: 4,
            sparsity_true: 5,
            ..cfg()
        };
        assert!(generate_truth(&c, 0).is_err());
    }

    #[test]
    fn truth_does_not_depend_on_n() {
        let (_, a) = generate_synthetic(&cfg(), 10, 7).unwrap();
        let (_, b) = generate_synthetic(&cfg(), 20, 7).unwrap();
        assert_eq!(a.theta, b.theta);
    }
}
