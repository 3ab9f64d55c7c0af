//! Flat `key = value` experiment configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sampler::MoveProbs;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkFamily {
    /// `A sin(1.5 z₁) exp(−½ Σ_{i≥2} z_i²)`.
    Smooth,
    /// A fixed member of `ℱ_{d*,M₀}(C)`.
    Wavelet,
}

impl LinkFamily {
    pub fn name(self) -> &'static str {
        match self {
            LinkFamily::Smooth => "smooth",
            LinkFamily::Wavelet => "wavelet",
        }
    }
}

impl FromStr for LinkFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "smooth" => Ok(LinkFamily::Smooth),
            "wavelet" => Ok(LinkFamily::Wavelet),
            other => Err(format!("unknown link family `{other}` (expected smooth or wavelet)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub p: usize,
    pub n_grid: Vec<usize>,
    pub d_true: usize,
    pub sparsity_true: usize,
    pub link_family: LinkFamily,
    /// Sup bound `C` of the regression function.
    pub c_bound: f64,
    /// Sup bound `K` of the covariates.
    pub k_bound: f64,
    /// Noise scale `σ` (Gaussian truncated at ±4σ).
    pub sigma: f64,
    /// Sub-Gaussian constant `Γ`; defaults to `4σ`.
    pub gamma: Option<f64>,
    /// Link amplitude `A ≤ C`; defaults to `C`.
    pub link_amplitude: Option<f64>,
    /// Level `M₀` of the wavelet link family.
    pub link_level: u32,
    /// Shift radius `N`; defaults to covering `[−(B₁+1), B₁+1]`.
    pub radius: Option<u32>,
    pub wavelet_order: usize,
    pub table_resolution: u32,
    pub seeds: Vec<u64>,
    pub steps: usize,
    pub burn_in: usize,
    /// Defaults to `steps − burn_in`, retaining only the final state.
    pub thin: Option<usize>,
    pub moves: MoveProbs,
    pub beta_step: f64,
    pub angle_step: f64,
    /// Multiplier applied to the temperature from `lambda_from_constants`.
    pub lambda_scale: f64,
    pub max_coefficients: usize,
    pub n_eval: usize,
    pub record_wall_time: bool,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            p: 20,
            n_grid: vec![250, 500, 1000, 2000, 4000],
            d_true: 1,
            sparsity_true: 3,
            link_family: LinkFamily::Smooth,
            c_bound: 1.0,
            k_bound: 1.0,
            sigma: 0.1,
            gamma: None,
            link_amplitude: None,
            link_level: 1,
            radius: None,
            wavelet_order: crate::wavelet::DEFAULT_ORDER,
            table_resolution: crate::wavelet::DEFAULT_TABLE_RESOLUTION,
            seeds: vec![1, 2, 3, 4, 5],
            steps: 60_000,
            burn_in: 40_000,
            thin: None,
            moves: MoveProbs::default(),
            beta_step: 0.1,
            angle_step: 0.2,
            lambda_scale: 1.0,
            max_coefficients: crate::prior::DEFAULT_MAX_COEFFICIENTS,
            n_eval: 100_000,
            record_wall_time: false,
            output: None,
        }
    }
}

fn parse<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e: T::Err| Error::Config {
        line,
        msg: format!("bad value for `{key}`: {e}"),
    })
}

fn parse_list<T: FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(line, key, s))
        .collect()
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config {
            line,
            msg: format!("bad value for `{key}`: expected true or false"),
        }),
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Config {
                    line,
                    msg: format!("expected `key = value`, got `{content}`"),
                });
            };
            let (key, v) = (key.trim(), value.trim());
            match key {
                "p" => cfg.p = parse(line, key, v)?,
                "n" | "n_grid" => cfg.n_grid = parse_list(line, key, v)?,
                "d_true" => cfg.d_true = parse(line, key, v)?,
                "sparsity_true" => cfg.sparsity_true = parse(line, key, v)?,
                "link_family" => {
                    cfg.link_family = v.parse().map_err(|msg| Error::Config { line, msg })?
                }
                "C" | "c_bound" => cfg.c_bound = parse(line, key, v)?,
                "K" | "k_bound" => cfg.k_bound = parse(line, key, v)?,
                "sigma" => cfg.sigma = parse(line, key, v)?,
                "gamma" => cfg.gamma = Some(parse(line, key, v)?),
                "link_amplitude" => cfg.link_amplitude = Some(parse(line, key, v)?),
                "link_level" => cfg.link_level = parse(line, key, v)?,
                "N" | "radius" => cfg.radius = Some(parse(line, key, v)?),
                "wavelet_order" => cfg.wavelet_order = parse(line, key, v)?,
                "table_resolution" => cfg.table_resolution = parse(line, key, v)?,
                "seeds" => cfg.seeds = parse_list(line, key, v)?,
                "steps" => cfg.steps = parse(line, key, v)?,
                "burn_in" => cfg.burn_in = parse(line, key, v)?,
                "thin" => cfg.thin = Some(parse(line, key, v)?),
                "moves" => {
                    let probs: Vec<f64> = parse_list(line, key, v)?;
                    let arr: [f64; 8] = match probs.len() {
                        5 => [probs[0], probs[1], probs[2], probs[3], probs[4], 0.0, 0.0, 0.0],
                        8 => probs.try_into().expect("length checked"),
                        k => {
                            return Err(Error::Config {
                                line,
                                msg: format!("`moves` needs 5 or 8 probabilities, got {k}"),
                            })
                        }
                    };
                    cfg.moves = MoveProbs(arr);
                }
                "beta_step" => cfg.beta_step = parse(line, key, v)?,
                "angle_step" => cfg.angle_step = parse(line, key, v)?,
                "lambda_scale" => cfg.lambda_scale = parse(line, key, v)?,
                "max_coefficients" => cfg.max_coefficients = parse(line, key, v)?,
                "n_eval" => cfg.n_eval = parse(line, key, v)?,
                "record_wall_time" => cfg.record_wall_time = parse_bool(line, key, v)?,
                "output" => cfg.output = Some(PathBuf::from(v)),
                _ => {
                    return Err(Error::Config {
                        line,
                        msg: format!("unknown key `{key}`"),
                    })
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma.unwrap_or(4.0 * self.sigma)
    }

    pub fn amplitude(&self) -> f64 {
        self.link_amplitude.unwrap_or(self.c_bound)
    }

    pub fn thin(&self) -> usize {
        self.thin.unwrap_or(self.steps.saturating_sub(self.burn_in)).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config { line: 0, msg });
        if self.p == 0 || self.d_true == 0 || self.sparsity_true == 0 {
            return bad("p, d_true and sparsity_true must be positive".into());
        }
        if self.n_grid.is_empty() || self.n_grid[0] == 0 || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("n grid must be positive and strictly increasing".into());
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.is_empty() || seeds.len() != self.seeds.len() {
            return bad("seeds must be non-empty and distinct".into());
        }
        if !(self.c_bound >= 1.0 && self.k_bound > 0.0 && self.sigma >= 0.0) {
            return bad("need C >= 1, K > 0 and σ >= 0".into());
        }
        if self.gamma.is_some_and(|g| !(g > 0.0)) {
            return bad("Γ must be positive".into());
        }
        let a = self.amplitude();
        if !(a >= 0.0 && a <= self.c_bound) {
            return bad(format!("link amplitude {a} must lie in [0, C]"));
        }
        if self.steps <= self.burn_in {
            return bad("steps must exceed burn_in".into());
        }
        if !(self.lambda_scale > 0.0) || self.n_eval == 0 {
            return bad("lambda_scale and n_eval must be positive".into());
        }
        self.moves.validate().or_else(|e| bad(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_lists_and_comments() {
        let cfg: ExperimentConfig = "# rate run\np = 10\nn = 100, 200,400\nseeds = 3,4,5 # trailing\nlink_family = wavelet\nsigma=0\nmoves = 0.2,0.2,0.2,0.2,0.2\n"
            .parse()
            .unwrap();
        assert_eq!(cfg.p, 10);
        assert_eq!(cfg.n_grid, vec![100, 200, 400]);
        assert_eq!(cfg.seeds, vec![3, 4, 5]);
        assert_eq!(cfg.link_family, LinkFamily::Wavelet);
        assert_eq!(cfg.moves.0[5], 0.0);
        assert_eq!(cfg.thin(), cfg.steps - cfg.burn_in);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        match "p = 3\nbogus = 1\n".parse::<ExperimentConfig>() {
            Err(Error::Config { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!("p = x".parse::<ExperimentConfig>().is_err());
        assert!("n = 200, 100".parse::<ExperimentConfig>().is_err());
        assert!("seeds = 1, 1".parse::<ExperimentConfig>().is_err());
        assert!("p".parse::<ExperimentConfig>().is_err());
    }
}
