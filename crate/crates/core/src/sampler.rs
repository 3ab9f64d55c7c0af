//! Trans-dimensional Metropolis–Hastings targeting the Gibbs posterior
//! `dρ̂_λ/dπ ∝ exp(−λ R_n)`.
//!
//! Structural redraws are independence proposals from the conditional prior,
//! so their acceptance is `min(1, e^{−λΔR_n})`. Support and level jumps are
//! reversible-jump moves whose prior and proposal terms are computed exactly.

use std::cell::OnceCell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{domain, Error, Result};
use crate::model::{mean_squared_residual, Dataset, ModelState, SparseMatrix};
use crate::prior::{
    sample_l1_ball, sample_link_given_d, sample_prior, sample_theta_given_d, PriorSpec,
};
use crate::wavelet::{CoefficientVector, Design};

/// RNG used by chains: ChaCha8 with one stream per chain.
pub type ChainRng = ChaCha8Rng;

/// Stream `stream` of the generator seeded by `seed`.
pub fn chain_rng(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MoveKind {
    FullRedraw,
    ThetaRedraw,
    LevelRedraw,
    BetaWalk,
    RowGeodesic,
    SupportSwap,
    SupportJump,
    LevelJump,
}

impl MoveKind {
    pub const ALL: [MoveKind; 8] = [
        MoveKind::FullRedraw,
        MoveKind::ThetaRedraw,
        MoveKind::LevelRedraw,
        MoveKind::BetaWalk,
        MoveKind::RowGeodesic,
        MoveKind::SupportSwap,
        MoveKind::SupportJump,
        MoveKind::LevelJump,
    ];

    /// Moves that may change `(d, I, M)`.
    pub fn is_structural(self) -> bool {
        !matches!(self, MoveKind::BetaWalk | MoveKind::RowGeodesic)
    }

    pub fn name(self) -> &'static str {
        match self {
            MoveKind::FullRedraw => "full_redraw",
            MoveKind::ThetaRedraw => "theta_redraw",
            MoveKind::LevelRedraw => "level_redraw",
            MoveKind::BetaWalk => "beta_walk",
            MoveKind::RowGeodesic => "row_geodesic",
            MoveKind::SupportSwap => "support_swap",
            MoveKind::SupportJump => "support_jump",
            MoveKind::LevelJump => "level_jump",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Mixture weights over [`MoveKind::ALL`], in that order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveProbs(pub [f64; 8]);

impl Default for MoveProbs {
    fn default() -> Self {
        // (0.05, 0.15, 0.15, 0.35, 0.30) scaled to 0.7, the jump moves share the rest.
        MoveProbs([0.035, 0.105, 0.105, 0.245, 0.21, 0.1, 0.1, 0.1])
    }
}

impl MoveProbs {
    /// Only the five redraw/local moves.
    pub fn basic(full: f64, theta: f64, level: f64, beta: f64, geodesic: f64) -> Self {
        MoveProbs([full, theta, level, beta, geodesic, 0.0, 0.0, 0.0])
    }

    pub fn get(&self, kind: MoveKind) -> f64 {
        self.0[kind.index()]
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.iter().any(|p| !(*p >= 0.0)) {
            return domain("move probabilities must be non-negative");
        }
        let s: f64 = self.0.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return domain(format!("move probabilities sum to {s}, not 1"));
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> MoveKind {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for kind in MoveKind::ALL {
            acc += self.get(kind);
            if u < acc {
                return kind;
            }
        }
        *MoveKind::ALL
            .iter()
            .rev()
            .find(|k| self.get(**k) > 0.0)
            .expect("validated mixture has positive mass")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    /// Inverse temperature `λ ≥ 0`.
    pub lambda: f64,
    pub moves: MoveProbs,
    /// `σ_β = beta_step·(C+1)/k` for a link with `k` coefficients.
    pub beta_step: f64,
    /// Geodesic angle scale `σ_δ` in radians.
    pub angle_step: f64,
    pub steps: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Robbins–Monro tuning of both step sizes during burn-in.
    pub adapt: bool,
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            moves: MoveProbs::default(),
            beta_step: 0.1,
            angle_step: 0.2,
            steps: 20_000,
            burn_in: 10_000,
            thin: 10,
            adapt: true,
            seed: 0,
        }
    }
}

/// Target acceptance rate of the adapted local moves.
pub const TARGET_ACCEPTANCE: f64 = 0.3;

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        self.moves.validate()?;
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return domain(format!("λ must be finite and non-negative (got {})", self.lambda));
        }
        if self.steps <= self.burn_in {
            return domain(format!("steps ({}) must exceed burn-in ({})", self.steps, self.burn_in));
        }
        if self.thin == 0 {
            return domain("thinning must be >= 1");
        }
        if !(self.beta_step > 0.0 && self.angle_step > 0.0) {
            return domain("step sizes must be positive");
        }
        Ok(())
    }

    pub fn retained_len(&self) -> usize {
        (self.steps - self.burn_in) / self.thin
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MoveStats {
    pub proposed: u64,
    pub accepted: u64,
}

impl MoveStats {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Structure and risk of one retained state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub d: usize,
    pub sparsity: usize,
    pub level: u32,
    pub risk: f64,
}

#[derive(Debug, Clone)]
pub struct ChainResult {
    pub retained: Vec<ModelState>,
    pub trace: Vec<TraceEntry>,
    pub stats: [MoveStats; 8],
    pub final_state: ModelState,
    pub final_risk: f64,
}

impl ChainResult {
    pub fn stats_for(&self, kind: MoveKind) -> MoveStats {
        self.stats[kind.index()]
    }

    fn pooled(&self, structural: bool) -> f64 {
        let (p, a) = MoveKind::ALL
            .iter()
            .filter(|k| k.is_structural() == structural)
            .fold((0, 0), |(p, a), k| {
                let s = self.stats[k.index()];
                (p + s.proposed, a + s.accepted)
            });
        if p == 0 {
            0.0
        } else {
            a as f64 / p as f64
        }
    }

    /// Pooled acceptance of the structural moves.
    pub fn structural_acceptance(&self) -> f64 {
        self.pooled(true)
    }

    /// Pooled acceptance of the β-walk and row-geodesic moves.
    pub fn local_acceptance(&self) -> f64 {
        self.pooled(false)
    }
}

/// `min(1, exp(log_ratio − λ ΔR))`.
pub fn acceptance_probability(lambda: f64, delta_risk: f64, log_ratio: f64) -> f64 {
    (log_ratio - lambda * delta_risk).exp().min(1.0)
}

fn sample_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn accept<R: Rng + ?Sized>(log_alpha: f64, rng: &mut R) -> bool {
    if log_alpha >= 0.0 {
        return true;
    }
    let u: f64 = rng.random();
    u.ln() < log_alpha
}

/// A state together with its projections, design matrix and risk on the data.
#[derive(Debug, Clone)]
struct Evaluated {
    state: ModelState,
    z: Vec<f64>,
    /// Built on first use by the β-walk.
    design: OnceCell<Design>,
    risk: f64,
}

/// One Markov chain over the Gibbs posterior on a fixed dataset.
pub struct Chain<'a> {
    data: &'a Dataset,
    spec: &'a PriorSpec,
    cfg: &'a ChainConfig,
    cur: Evaluated,
    stats: [MoveStats; 8],
    log_beta_scale: f64,
    log_angle_scale: f64,
    adapt_calls: [u64; 2],
    buf: Vec<f64>,
}

impl<'a> Chain<'a> {
    pub fn new(data: &'a Dataset, spec: &'a PriorSpec, cfg: &'a ChainConfig, initial: ModelState) -> Result<Self> {
        cfg.validate()?;
        if data.p() != spec.p {
            return domain(format!("data has p = {} but the prior has p = {}", data.p(), spec.p));
        }
        initial.validate(spec.p, spec.c_bound)?;
        let cur = evaluate(data, initial, None);
        Ok(Self {
            data,
            spec,
            cfg,
            cur,
            stats: Default::default(),
            log_beta_scale: cfg.beta_step.ln(),
            log_angle_scale: cfg.angle_step.ln(),
            adapt_calls: [0; 2],
            buf: Vec::with_capacity(data.n()),
        })
    }

    pub fn state(&self) -> &ModelState {
        &self.cur.state
    }

    pub fn risk(&self) -> f64 {
        self.cur.risk
    }

    pub fn stats(&self) -> &[MoveStats; 8] {
        &self.stats
    }

    /// Current `(σ_β multiplier, σ_δ)`.
    pub fn step_sizes(&self) -> (f64, f64) {
        (self.log_beta_scale.exp(), self.log_angle_scale.exp())
    }

    /// One move of the mixture. Returns whether it was accepted and which move ran.
    pub fn mh_step<R: Rng + ?Sized>(&mut self, rng: &mut R, adapt: bool) -> Result<(bool, MoveKind)> {
        let kind = self.cfg.moves.sample(rng);
        let accepted = self.run_move(kind, rng)?;
        let s = &mut self.stats[kind.index()];
        s.proposed += 1;
        s.accepted += u64::from(accepted);
        if adapt {
            let slot = match kind {
                MoveKind::BetaWalk => Some((0, &mut self.log_beta_scale)),
                MoveKind::RowGeodesic => Some((1, &mut self.log_angle_scale)),
                _ => None,
            };
            if let Some((i, scale)) = slot {
                self.adapt_calls[i] += 1;
                let gain = (self.adapt_calls[i] as f64).powf(-0.6);
                *scale += gain * (f64::from(u8::from(accepted)) - TARGET_ACCEPTANCE);
                *scale = scale.clamp(-20.0, 2.0);
            }
        }
        Ok((accepted, kind))
    }

    fn run_move<R: Rng + ?Sized>(&mut self, kind: MoveKind, rng: &mut R) -> Result<bool> {
        let proposal = match kind {
            MoveKind::FullRedraw => {
                let st = sample_prior(self.spec, rng)?;
                Some((evaluate(self.data, st, None), 0.0))
            }
            MoveKind::ThetaRedraw => {
                let theta = sample_theta_given_d(self.spec, self.cur.state.d(), rng)?;
                let st = ModelState::new(theta, self.cur.state.coeffs.clone())?;
                Some((evaluate(self.data, st, None), 0.0))
            }
            MoveKind::LevelRedraw => {
                let coeffs = sample_link_given_d(self.spec, self.cur.state.d(), rng)?;
                let st = ModelState::new(self.cur.state.theta.clone(), coeffs)?;
                Some((evaluate(self.data, st, Some(&self.cur.z)), 0.0))
            }
            MoveKind::BetaWalk => return Ok(self.beta_walk(rng)),
            MoveKind::RowGeodesic => self.geodesic(rng)?.map(|t| (self.with_theta(t), 0.0)),
            MoveKind::SupportSwap => self.swap(rng).map(|t| (self.with_theta(t), 0.0)),
            MoveKind::SupportJump => self.support_jump(rng)?.map(|(t, r)| (self.with_theta(t), r)),
            MoveKind::LevelJump => self.level_jump(rng)?,
        };
        let Some((next, log_ratio)) = proposal else {
            return Ok(false);
        };
        let log_alpha = log_ratio - self.cfg.lambda * (next.risk - self.cur.risk);
        if accept(log_alpha, rng) {
            self.cur = next;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn with_theta(&self, theta: SparseMatrix) -> Evaluated {
        let st = ModelState {
            theta,
            coeffs: self.cur.state.coeffs.clone(),
        };
        evaluate(self.data, st, None)
    }

    fn beta_walk<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let beta = self.cur.state.coeffs.beta();
        let k = beta.len();
        let sigma = self.log_beta_scale.exp() * self.spec.ball_radius() / k as f64;
        let proposal: Vec<f64> = beta
            .iter()
            .map(|b| b + sigma * sample_normal(rng))
            .collect();
        let norm: f64 = proposal
            .iter()
            .zip(self.cur.state.coeffs.dictionary().norm_weights())
            .map(|(b, w)| b.abs() * w)
            .sum();
        if norm > self.spec.ball_radius() {
            return false;
        }
        let Evaluated { state, z, design, .. } = &self.cur;
        design
            .get_or_init(|| state.coeffs.dictionary().design(z))
            .apply_into(&proposal, &mut self.buf);
        let risk = mean_squared_residual(&self.buf, self.data.labels());
        if accept(-self.cfg.lambda * (risk - self.cur.risk), rng) {
            self.cur.state.coeffs.beta_mut().copy_from_slice(&proposal);
            self.cur.risk = risk;
            true
        } else {
            false
        }
    }

    fn geodesic<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Option<SparseMatrix>> {
        let mut theta = self.cur.state.theta.clone();
        let i = rng.random_range(0..theta.d());
        let row = &mut theta.rows[i];
        if row.values.len() == 1 {
            // The 0-sphere: the only geodesic neighbour is the antipode.
            row.values[0] = -row.values[0];
            return Ok(Some(theta));
        }
        let mut dir: Vec<f64> = row.values.iter().map(|_| sample_normal(rng)).collect();
        let dot: f64 = dir.iter().zip(&row.values).map(|(a, b)| a * b).sum();
        for (v, t) in dir.iter_mut().zip(&row.values) {
            *v -= dot * t;
        }
        let dn = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if dn < 1e-300 {
            return Ok(None);
        }
        let delta = self.log_angle_scale.exp() * sample_normal(rng);
        let (s, c) = delta.sin_cos();
        for (t, v) in row.values.iter_mut().zip(&dir) {
            *t = c * *t + s * v / dn;
        }
        renormalize(&mut row.values)?;
        Ok(Some(theta))
    }

    fn swap<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<SparseMatrix> {
        let p = self.spec.p;
        let mut theta = self.cur.state.theta.clone();
        let i = rng.random_range(0..theta.d());
        let row = &mut theta.rows[i];
        let m = row.support.len();
        if m == p {
            return None;
        }
        let a = rng.random_range(0..m);
        let j = nth_outside(&row.support, rng.random_range(0..p - m));
        let value = row.values.remove(a);
        row.support.remove(a);
        insert_sorted(row, j, value);
        Some(theta)
    }

    /// `ln π(I ∪ {j}) − ln π(I)` for a row of size `m` growing to `m+1`, plus
    /// the proposal ratio `ln((p−m)/(m+1))`.
    fn birth_log_ratio(&self, d: usize, sparsity: usize, m: usize) -> Result<f64> {
        let counter = self.spec.counter(d)?;
        let p = self.spec.p as f64;
        Ok(-std::f64::consts::LN_10 + counter.count(sparsity).log - counter.count(sparsity + 1).log
            + (p - m as f64).ln()
            - (m as f64 + 1.0).ln())
    }

    fn support_jump<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Option<(SparseMatrix, f64)>> {
        let p = self.spec.p;
        let mut theta = self.cur.state.theta.clone();
        let d = theta.d();
        let sparsity = self.cur.state.sparsity();
        let i = rng.random_range(0..d);
        let birth = rng.random::<bool>();
        let row = &mut theta.rows[i];
        let m = row.support.len();
        if birth {
            if m == p {
                return Ok(None);
            }
            let j = nth_outside(&row.support, rng.random_range(0..p - m));
            // New coordinate distributed as one coordinate of a uniform point on S^m.
            let g = sample_normal(rng);
            let chi2: f64 = ChiSquared::new(m as f64)
                .map_err(|e| Error::Internal(e.to_string()))?
                .sample(rng);
            let r = (g * g + chi2).sqrt();
            let (s, c) = (g / r, chi2.sqrt() / r);
            for v in row.values.iter_mut() {
                *v *= c;
            }
            insert_sorted(row, j, s);
            renormalize(&mut row.values)?;
            let r = self.birth_log_ratio(d, sparsity, m)?;
            Ok(Some((theta, r)))
        } else {
            if m == 1 {
                return Ok(None);
            }
            let a = rng.random_range(0..m);
            row.values.remove(a);
            row.support.remove(a);
            let c = row.values.iter().map(|v| v * v).sum::<f64>().sqrt();
            if c < 1e-150 {
                return Ok(None);
            }
            for v in row.values.iter_mut() {
                *v /= c;
            }
            renormalize(&mut row.values)?;
            let r = -self.birth_log_ratio(d, sparsity - 1, m - 1)?;
            Ok(Some((theta, r)))
        }
    }

    fn level_jump<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Option<(Evaluated, f64)>> {
        let st = &self.cur.state;
        let d = st.d();
        let level = st.level();
        let xi = self.spec.ball_radius();
        let birth = rng.random::<bool>();
        let (small_len, big_len, kept_u) = if birth {
            if !self.spec.admits(d, level + 1) {
                return Ok(None);
            }
            let k = st.coeffs.len();
            let big = self.spec.dictionary(d, level + 1)?.len();
            (k, big, st.coeffs.besov_norm() / xi)
        } else {
            if level == 0 {
                return Ok(None);
            }
            let k = st.coeffs.dictionary().prefix_len(level - 1);
            let kept: f64 = st.coeffs.beta()[..k]
                .iter()
                .zip(st.coeffs.dictionary().norm_weights())
                .map(|(b, w)| b.abs() * w)
                .sum();
            (k, st.coeffs.len(), kept / xi)
        };
        if kept_u >= 1.0 {
            return Ok(None);
        }
        let m = big_len - small_len;
        let log_ratio = 0.1f64.ln()
            + statrs::function::factorial::ln_binomial(big_len as u64, small_len as u64)
            + m as f64 * (1.0 - kept_u).ln();
        if birth {
            let dict = self.spec.dictionary(d, level + 1)?;
            let w = dict.norm_weights();
            let mut beta = st.coeffs.beta().to_vec();
            let fresh = sample_l1_ball(m, rng);
            beta.extend(
                fresh
                    .iter()
                    .zip(&w[small_len..])
                    .map(|(u, w)| xi * (1.0 - kept_u) * u / w),
            );
            let next = ModelState::new(st.theta.clone(), CoefficientVector::new(dict, beta)?)?;
            Ok(Some((evaluate(self.data, next, Some(&self.cur.z)), log_ratio)))
        } else {
            let dict = self.spec.dictionary(d, level - 1)?;
            let coeffs = st.coeffs.project_to_level(level - 1, dict)?;
            let next = ModelState::new(st.theta.clone(), coeffs)?;
            Ok(Some((evaluate(self.data, next, Some(&self.cur.z)), -log_ratio)))
        }
    }
}

/// The `k`-th coordinate (0-based) not in the sorted `support`.
fn nth_outside(support: &[usize], mut k: usize) -> usize {
    let mut j = 0;
    for &s in support {
        if j + k < s {
            break;
        }
        k -= s - j;
        j = s + 1;
    }
    j + k
}

fn insert_sorted(row: &mut crate::model::SparseRow, j: usize, value: f64) {
    let at = row.support.partition_point(|s| *s < j);
    row.support.insert(at, j);
    row.values.insert(at, value);
}

/// Tolerated norm drift of a row before renormalization.
pub const ROW_DRIFT_TOLERANCE: f64 = 1e-9;

fn renormalize(values: &mut [f64]) -> Result<()> {
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > ROW_DRIFT_TOLERANCE {
        return Err(Error::Internal(format!("row norm drifted to {norm}")));
    }
    for v in values.iter_mut() {
        *v /= norm;
    }
    Ok(())
}

fn evaluate(data: &Dataset, state: ModelState, z: Option<&[f64]>) -> Evaluated {
    let z = match z {
        Some(z) => z.to_vec(),
        None => state.theta.project_dataset(data),
    };
    let mut pred = Vec::with_capacity(data.n());
    state
        .coeffs
        .dictionary()
        .predict_into(&z, state.coeffs.beta(), &mut pred);
    let risk = mean_squared_residual(&pred, data.labels());
    Evaluated {
        state,
        z,
        design: OnceCell::new(),
        risk,
    }
}

/// Runs a chain started from a prior draw.
pub fn run_chain<R: Rng + ?Sized>(
    data: &Dataset,
    spec: &PriorSpec,
    cfg: &ChainConfig,
    rng: &mut R,
) -> Result<ChainResult> {
    cfg.validate()?;
    let initial = sample_prior(spec, rng)?;
    run_chain_from(data, spec, cfg, initial, rng)
}

/// Runs a chain from a given initial state.
pub fn run_chain_from<R: Rng + ?Sized>(
    data: &Dataset,
    spec: &PriorSpec,
    cfg: &ChainConfig,
    initial: ModelState,
    rng: &mut R,
) -> Result<ChainResult> {
    let mut chain = Chain::new(data, spec, cfg, initial)?;
    let mut retained = Vec::with_capacity(cfg.retained_len());
    let mut trace = Vec::with_capacity(cfg.retained_len());
    for t in 1..=cfg.steps {
        chain.mh_step(rng, cfg.adapt && t <= cfg.burn_in)?;
        if t > cfg.burn_in && (t - cfg.burn_in).is_multiple_of(cfg.thin) {
            let st = chain.state();
            trace.push(TraceEntry {
                d: st.d(),
                sparsity: st.sparsity(),
                level: st.level(),
                risk: chain.risk(),
            });
            retained.push(st.clone());
        }
    }
    Ok(ChainResult {
        retained,
        trace,
        stats: chain.stats,
        final_state: chain.cur.state.clone(),
        final_risk: chain.cur.risk,
    })
}

/// One approximate draw `(d̂, Θ̂, f̂) ∼ ρ̂_λ`: the last retained state of a chain,
/// with its empirical risk and the chain's diagnostics.
pub fn draw_estimator<R: Rng + ?Sized>(
    data: &Dataset,
    spec: &PriorSpec,
    cfg: &ChainConfig,
    rng: &mut R,
) -> Result<(ModelState, f64, ChainResult)> {
    let mut res = run_chain(data, spec, cfg, rng)?;
    let state = res
        .retained
        .pop()
        .ok_or_else(|| Error::Internal("chain retained no state".into()))?;
    let risk = res.trace.last().map_or(res.final_risk, |t| t.risk);
    Ok((state, risk, res))
}
