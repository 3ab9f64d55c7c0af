//! Numerical checks of the closed-form divergence and mass statements behind
//! the oracle inequality, and an approximate oracle fit.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{domain, Result};
use crate::model::{mean_squared_residual, ActiveIndexSet, Dataset, McEstimate, ModelState, SparseMatrix, SparseRow};
use crate::prior::{sample_l1_ball, sample_sphere_row, sample_theta};
use crate::wavelet::{CoefficientVector, WaveletDictionary};

/// Probability weights on the points `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMeasure {
    weights: Vec<f64>,
}

impl FiniteMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w >= 0.0)) {
            return domain("measure weights must be non-negative and non-empty");
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return domain(format!("measure weights sum to {s}"));
        }
        Ok(Self { weights })
    }

    /// Normalizes non-negative masses.
    pub fn from_masses(masses: &[f64]) -> Result<Self> {
        let s: f64 = masses.iter().sum();
        if !(s > 0.0) || masses.iter().any(|m| !(*m >= 0.0)) {
            return domain("masses must be non-negative with positive total");
        }
        Ok(Self {
            weights: masses.iter().map(|m| m / s).collect(),
        })
    }

    pub fn uniform(len: usize) -> Result<Self> {
        Self::from_masses(&vec![1.0; len])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, h: &[f64]) -> f64 {
        self.weights.iter().zip(h).map(|(w, h)| if *w > 0.0 { w * h } else { 0.0 }).sum()
    }

    /// Random point of the simplex: Dirichlet(α, …, α).
    pub fn random<R: Rng + ?Sized>(len: usize, alpha: f64, rng: &mut R) -> Result<Self> {
        use rand_distr::{Distribution, Gamma};
        let g = Gamma::new(alpha, 1.0).map_err(|e| crate::Error::Domain(e.to_string()))?;
        let masses: Vec<f64> = (0..len).map(|_| g.sample(rng)).collect();
        Self::from_masses(&masses)
    }
}

/// `𝒦(ν, μ) = Σ ν log(ν/μ)`; `+∞` unless `ν ≪ μ`.
pub fn kl_discrete(nu: &FiniteMeasure, mu: &FiniteMeasure) -> Result<f64> {
    if nu.len() != mu.len() {
        return domain("measures live on different spaces");
    }
    let mut acc = 0.0;
    for (a, b) in nu.weights.iter().zip(&mu.weights) {
        if *a == 0.0 {
            continue;
        }
        if *b == 0.0 {
            return Ok(f64::INFINITY);
        }
        acc += a * (a / b).ln();
    }
    Ok(acc)
}

/// Outcome of a Donsker–Varadhan check on a finite space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DvCheck {
    /// `log ∫ e^h dμ`.
    pub lhs: f64,
    /// `∫ h dg − 𝒦(g, μ)` at the Gibbs measure `g ∝ e^h μ`.
    pub sup_side: f64,
    /// `|lhs − sup_side|`.
    pub gap: f64,
    /// Largest `∫ h dν − 𝒦(ν, μ) − lhs` over the random competitors (≤ 0 in theory).
    pub competitor_excess: f64,
}

/// Gibbs measure `g ∝ e^h μ`.
pub fn gibbs_measure(mu: &FiniteMeasure, h: &[f64]) -> Result<FiniteMeasure> {
    if h.len() != mu.len() || h.iter().any(|v| !v.is_finite()) {
        return domain("h must be finite and match the measure");
    }
    let max = h
        .iter()
        .zip(&mu.weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(h, _)| *h)
        .fold(f64::NEG_INFINITY, f64::max);
    let masses: Vec<f64> = h
        .iter()
        .zip(&mu.weights)
        .map(|(h, w)| w * (h - max).exp())
        .collect();
    FiniteMeasure::from_masses(&masses)
}

/// Evaluates both sides of `log ∫ e^h dμ = sup_ν (∫ h dν − 𝒦(ν, μ))`, with the
/// supremum taken at the Gibbs measure and probed by `competitors` random measures.
pub fn dv_identity_check<R: Rng + ?Sized>(
    mu: &FiniteMeasure,
    h: &[f64],
    competitors: usize,
    rng: &mut R,
) -> Result<DvCheck> {
    let g = gibbs_measure(mu, h)?;
    let terms: Vec<f64> = h
        .iter()
        .zip(&mu.weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(h, w)| h + w.ln())
        .collect();
    let lhs = crate::prior::log_sum_exp(&terms);
    let value = |nu: &FiniteMeasure| -> Result<f64> { Ok(nu.integrate(h) - kl_discrete(nu, mu)?) };
    let sup_side = value(&g)?;
    let mut competitor_excess = f64::NEG_INFINITY;
    for k in 0..competitors {
        // Alternate diffuse and concentrated Dirichlet draws.
        let alpha = if k % 2 == 0 { 1.0 } else { 0.1 };
        let nu = FiniteMeasure::random(mu.len(), alpha, rng)?;
        competitor_excess = competitor_excess.max(value(&nu)? - lhs);
    }
    Ok(DvCheck {
        lhs,
        sup_side,
        gap: (lhs - sup_side).abs(),
        competitor_excess,
    })
}

/// `𝒦` of the uniform law on `ℬ(γ)` against the uniform law on `ℬ(C+1)` in
/// `k` coefficients: `k log((C+1)/γ)`.
pub fn kl_coeff_ball(gamma: f64, c_bound: f64, k: usize) -> Result<f64> {
    if !(gamma > 0.0) || gamma > c_bound + 1.0 {
        return domain(format!("γ must lie in (0, C+1] (got γ={gamma}, C={c_bound})"));
    }
    Ok(k as f64 * ((c_bound + 1.0) / gamma).ln())
}

/// Monte Carlo proportion of a uniform draw from the `(C+1)`-ball in `k`
/// coefficients that lands in the `γ`-ball.
pub fn coeff_ball_mass_mc<R: Rng + ?Sized>(
    gamma: f64,
    c_bound: f64,
    k: usize,
    draws: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    if k == 0 || draws == 0 {
        return domain("need k >= 1 and at least one draw");
    }
    let ratio = gamma / (c_bound + 1.0);
    let hits = (0..draws)
        .filter(|_| sample_l1_ball(k, rng).iter().map(|v| v.abs()).sum::<f64>() <= ratio)
        .count();
    Ok(proportion(hits, draws))
}

fn proportion(hits: usize, draws: usize) -> McEstimate {
    let p = hits as f64 / draws as f64;
    McEstimate {
        estimate: p,
        std_error: (p * (1.0 - p) / draws as f64).sqrt(),
    }
}

/// Monte Carlo mass of `{ϑ : ‖ϑ − e₁‖₂ ≤ η}` under the uniform law on the unit
/// sphere of `ℝ^m`.
pub fn sphere_cap_mass<R: Rng + ?Sized>(m: usize, eta: f64, draws: usize, rng: &mut R) -> Result<McEstimate> {
    if m == 0 || !(eta > 0.0 && eta <= 1.0) || draws == 0 {
        return domain(format!("need m >= 1, η in (0, 1] and draws >= 1 (got m={m}, η={eta})"));
    }
    let support: Vec<usize> = (0..m).collect();
    // ‖ϑ − e₁‖² = 2 − 2ϑ₁.
    let threshold = 1.0 - eta * eta / 2.0;
    let hits = (0..draws)
        .filter(|_| sample_sphere_row(&support, rng).values[0] >= threshold)
        .count();
    Ok(proportion(hits, draws))
}

/// Lower bound `(η/(3√2))^m` on the cap mass.
pub fn sphere_cap_bound(m: usize, eta: f64) -> f64 {
    (eta / (3.0 * 2f64.sqrt())).powi(m as i32)
}

/// `T₁ = ‖I‖ log(e p) + (‖I‖ + M + 1) log 10`.
pub fn kl_structure_t1(sparsity: usize, level: u32, p: usize) -> f64 {
    let s = sparsity as f64;
    s * (std::f64::consts::E * p as f64).ln() + (s + level as f64 + 1.0) * std::f64::consts::LN_10
}

/// Radii of the localized test measure around a reference structure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestMeasureSpec {
    /// Sphere-cap radius `η`.
    pub eta: f64,
    /// Coefficient-ball radius `γ`.
    pub gamma: f64,
}

impl TestMeasureSpec {
    pub fn new(eta: f64, gamma: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0 && gamma > 0.0 && gamma <= 1.0) {
            return domain(format!("η and γ must lie in (0, 1] (got η={eta}, γ={gamma})"));
        }
        Ok(Self { eta, gamma })
    }

    /// `η = (dpn)^{−1}`, `γ = n^{−1}`.
    pub fn default_radii(d: usize, p: usize, n: usize) -> Result<Self> {
        if d == 0 || p == 0 || n == 0 {
            return domain("d, p and n must be positive");
        }
        Self::new(1.0 / (d * p * n) as f64, 1.0 / n as f64)
    }

    /// `‖I‖ log(3√2/η) + k log((C+1)/γ)`, the bound on the localization cost.
    pub fn t2(&self, sparsity: usize, k: usize, c_bound: f64) -> f64 {
        sparsity as f64 * (3.0 * 2f64.sqrt() / self.eta).ln() + k as f64 * ((c_bound + 1.0) / self.gamma).ln()
    }
}

/// `(Ξ/n)(‖I‖ log(pn) + 4^d N^d 2^{dM} log(Cn) + log(2/δ))`.
#[allow(clippy::too_many_arguments)]
pub fn oracle_bound_rhs(
    d: usize,
    sparsity: usize,
    level: u32,
    n: usize,
    p: usize,
    radius: u32,
    c_bound: f64,
    delta: f64,
    xi: f64,
) -> Result<f64> {
    if n == 0 || p == 0 || d == 0 || !(delta > 0.0 && delta <= 2.0) || !(c_bound > 0.0) {
        return domain("invalid arguments to the bound");
    }
    let nf = n as f64;
    let df = d as i32;
    let dict_term = 4f64.powi(df) * (radius as f64).powi(df) * 2f64.powi(df * level as i32) * (c_bound * nf).ln();
    Ok(xi / nf * (sparsity as f64 * (p as f64 * nf).ln() + dict_term + (2.0 / delta).ln()))
}

/// Result of [`approx_oracle`].
#[derive(Debug, Clone)]
pub struct OracleFit {
    pub state: ModelState,
    pub risk: f64,
    /// Objective evaluations spent.
    pub evaluations: usize,
    /// Whether the budget ran out before every start converged.
    pub exhausted: bool,
}

struct Profiler<'a> {
    data: &'a Dataset,
    dict: &'a Arc<WaveletDictionary>,
    c_bound: f64,
    weights: Vec<f64>,
    budget: usize,
    used: usize,
}

impl Profiler<'_> {
    /// Least-squares link for `theta`, rescaled into `‖β‖_ℬ ≤ C`, and its risk.
    fn fit(&mut self, theta: &SparseMatrix) -> Option<(Vec<f64>, f64)> {
        if self.used >= self.budget {
            return None;
        }
        self.used += 1;
        let z = theta.project_dataset(self.data);
        let design = self.dict.design(&z);
        let k = self.dict.len();
        let mut gram = DMatrix::<f64>::zeros(k, k);
        let mut rhs = DVector::<f64>::zeros(k);
        let mut entries = Vec::new();
        for (r, y) in self.data.labels().iter().enumerate() {
            entries.clear();
            entries.extend(design.row(r));
            for &(a, va) in &entries {
                rhs[a] += va * y;
                for &(b, vb) in &entries {
                    gram[(a, b)] += va * vb;
                }
            }
        }
        let scale = gram.diagonal().max().max(1e-300);
        let svd = gram.svd(true, true);
        let mut beta: Vec<f64> = svd
            .solve(&rhs, 1e-12 * scale)
            .map(|v| v.iter().copied().collect())
            .unwrap_or_else(|_| vec![0.0; k]);
        let norm: f64 = beta.iter().zip(&self.weights).map(|(b, w)| b.abs() * w).sum();
        if norm > self.c_bound {
            let t = self.c_bound / norm;
            beta.iter_mut().for_each(|b| *b *= t);
        }
        let pred = design.apply(&beta);
        Some((beta, mean_squared_residual(&pred, self.data.labels())))
    }
}

/// Approximate minimizer of `R_n` over `𝒮_d(I) × ℬ_{d,M}(C)` on `data`:
/// profiled least squares in `β` with geodesic line searches per row of `Θ`,
/// restarted `starts` times from uniform rows. `budget` caps the number of
/// least-squares fits.
pub fn approx_oracle<R: Rng + ?Sized>(
    data: &Dataset,
    index_set: &ActiveIndexSet,
    dict: Arc<WaveletDictionary>,
    c_bound: f64,
    budget: usize,
    starts: usize,
    rng: &mut R,
) -> Result<OracleFit> {
    index_set.validate(data.p())?;
    if index_set.d() != dict.dim() {
        return domain("index set and dictionary dimensions differ");
    }
    if !(c_bound > 0.0) || starts == 0 {
        return domain("need C > 0 and at least one start");
    }
    let mut prof = Profiler {
        data,
        dict: &dict,
        c_bound,
        weights: dict.norm_weights().to_vec(),
        budget,
        used: 0,
    };
    let mut best_theta = sample_theta(index_set, rng);
    let mut best_beta = vec![0.0; dict.len()];
    let mut best_risk = mean_squared_residual(&vec![0.0; data.n()], data.labels());
    let starts_theta: Vec<SparseMatrix> = (0..starts).map(|_| sample_theta(index_set, rng)).collect();
    let mut exhausted = false;
    'starts: for mut theta in starts_theta {
        let Some((mut beta, mut risk)) = prof.fit(&theta) else {
            exhausted = true;
            break;
        };
        macro_rules! offer {
            ($t:expr, $b:expr, $r:expr) => {
                if $r < best_risk {
                    best_risk = $r;
                    best_theta = $t.clone();
                    best_beta = $b.clone();
                }
            };
        }
        offer!(theta, beta, risk);
        for _round in 0..50 {
            let before = risk;
            for i in 0..theta.d() {
                match line_search(&mut prof, &theta, &beta, i, risk) {
                    Search::Improved(t, b, r) => {
                        theta = t;
                        beta = b;
                        risk = r;
                        offer!(theta, beta, risk);
                    }
                    Search::NoImprovement => {}
                    Search::Exhausted => {
                        exhausted = true;
                        break 'starts;
                    }
                }
            }
            if before - risk <= 1e-12 * before.max(1e-300) {
                break;
            }
        }
    }
    let evaluations = prof.used;
    let coeffs = CoefficientVector::new(dict.clone(), best_beta)?;
    Ok(OracleFit {
        state: ModelState::new(best_theta, coeffs)?,
        risk: best_risk,
        evaluations,
        exhausted,
    })
}

enum Search {
    Improved(SparseMatrix, Vec<f64>, f64),
    NoImprovement,
    Exhausted,
}

/// Rotation of row `i` by angle `t` towards the unit tangent `dir`.
fn rotate(theta: &SparseMatrix, i: usize, dir: &[f64], t: f64) -> SparseMatrix {
    let mut out = theta.clone();
    let (s, c) = t.sin_cos();
    let row = &mut out.rows[i];
    for (v, u) in row.values.iter_mut().zip(dir) {
        *v = c * *v + s * u;
    }
    let n = row.values.iter().map(|v| v * v).sum::<f64>().sqrt();
    row.values.iter_mut().for_each(|v| *v /= n);
    out
}

fn line_search(prof: &mut Profiler<'_>, theta: &SparseMatrix, beta: &[f64], i: usize, risk: f64) -> Search {
    let row = &theta.rows[i];
    if row.values.len() == 1 {
        let mut flipped = theta.clone();
        flipped.rows[i] = SparseRow {
            support: row.support.clone(),
            values: vec![-row.values[0]],
        };
        return match prof.fit(&flipped) {
            None => Search::Exhausted,
            Some((b, r)) if r < risk => Search::Improved(flipped, b, r),
            Some(_) => Search::NoImprovement,
        };
    }
    let dir = descent_direction(prof, theta, beta, i);
    let mut best: (f64, Option<(SparseMatrix, Vec<f64>)>, f64) = (0.0, None, risk);
    // Coarse grid over the great circle through the row, then golden-section refinement.
    let mut grid: Vec<f64> = (0..8).map(|j| std::f64::consts::PI / 2f64.powi(j)).collect();
    grid.extend(grid.clone().into_iter().map(|t| -t));
    grid.extend([std::f64::consts::FRAC_PI_2 * 3.0, -std::f64::consts::FRAC_PI_2 * 3.0]);
    for t in grid {
        let cand = rotate(theta, i, &dir, t);
        match prof.fit(&cand) {
            None => return finish(best),
            Some((b, r)) if r < best.2 => best = (t, Some((cand, b)), r),
            Some(_) => {}
        }
    }
    let Some(_) = best.1 else {
        return Search::NoImprovement;
    };
    let width = (best.0.abs() / 2.0).max(1e-3);
    let (mut lo, mut hi) = (best.0 - width, best.0 + width);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..20 {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        let mut eval = |t: f64, best: &mut (f64, Option<(SparseMatrix, Vec<f64>)>, f64)| -> Option<f64> {
            let cand = rotate(theta, i, &dir, t);
            let (beta, r) = prof.fit(&cand)?;
            if r < best.2 {
                *best = (t, Some((cand, beta)), r);
            }
            Some(r)
        };
        let (Some(ra), Some(rb)) = (eval(a, &mut best), eval(b, &mut best)) else {
            return finish(best);
        };
        if ra < rb {
            hi = b;
        } else {
            lo = a;
        }
    }
    finish(best)
}

fn finish(best: (f64, Option<(SparseMatrix, Vec<f64>)>, f64)) -> Search {
    match best.1 {
        Some((t, b)) => Search::Improved(t, b, best.2),
        None => Search::Exhausted,
    }
}

/// Unit tangent at row `i` pointing down the risk gradient for the fitted `β`
/// (which is the gradient of the profiled risk); falls back to a coordinate direction.
fn descent_direction(prof: &Profiler<'_>, theta: &SparseMatrix, beta: &[f64], i: usize) -> Vec<f64> {
    let row = &theta.rows[i];
    let m = row.values.len();
    let coeffs = CoefficientVector::new(prof.dict.clone(), beta.to_vec()).expect("fitted length");
    let d = theta.d();
    let h = 1e-5;
    let mut grad = vec![0.0; m];
    let mut z = vec![0.0; d];
    for (x, y) in prof.data.rows().zip(prof.data.labels()) {
        theta.apply_into(x, &mut z);
        let resid = y - coeffs.eval_link_unchecked(&z);
        z[i] += h;
        let up = coeffs.eval_link_unchecked(&z);
        z[i] -= 2.0 * h;
        let down = coeffs.eval_link_unchecked(&z);
        let slope = (up - down) / (2.0 * h);
        for (g, j) in grad.iter_mut().zip(&row.support) {
            *g += resid * slope * x[*j];
        }
    }
    // `grad` is minus half the gradient times n: already a descent direction.
    let dot: f64 = grad.iter().zip(&row.values).map(|(g, t)| g * t).sum();
    for (g, t) in grad.iter_mut().zip(&row.values) {
        *g -= dot * t;
    }
    let mut n = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(n > 1e-14) {
        let a = row
            .values
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
            .map_or(0, |(k, _)| k);
        grad = vec![0.0; m];
        grad[a] = 1.0;
        let dot = row.values[a];
        for (g, t) in grad.iter_mut().zip(&row.values) {
            *g -= dot * t;
        }
        n = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
    }
    grad.iter_mut().for_each(|v| *v /= n);
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::{g_constant, PriorSpec};
    use crate::sampler::chain_rng;
    use crate::wavelet::{covering_radius, WaveletIndex, WaveletSpec};

    #[test]
    fn kl_examples() {
        let mu = FiniteMeasure::uniform(2).unwrap();
        assert_eq!(kl_discrete(&mu, &mu).unwrap(), 0.0);
        let nu = FiniteMeasure::new(vec![1.0, 0.0]).unwrap();
        assert!((kl_discrete(&nu, &mu).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(kl_discrete(&mu, &nu).unwrap(), f64::INFINITY);
        assert!(FiniteMeasure::new(vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn dv_examples() {
        let mut rng = chain_rng(1, 0);
        let mu = FiniteMeasure::new(vec![0.2, 0.3, 0.5]).unwrap();
        let c = dv_identity_check(&mu, &[1.5; 3], 100, &mut rng).unwrap();
        assert!((c.lhs - 1.5).abs() < 1e-14 && (c.sup_side - 1.5).abs() < 1e-14);
        let mu = FiniteMeasure::uniform(2).unwrap();
        let c = dv_identity_check(&mu, &[0.0, 1.0], 1000, &mut rng).unwrap();
        assert!((c.lhs - ((1.0 + 1f64.exp()) / 2.0).ln()).abs() < 1e-15);
        assert!(c.gap <= 1e-10);
        assert!(c.competitor_excess <= 1e-10);
    }

    #[test]
    fn coefficient_ball_kl() {
        assert_eq!(kl_coeff_ball(2.0, 1.0, 7).unwrap(), 0.0);
        assert!((kl_coeff_ball(0.5, 1.0, 6).unwrap() - 6.0 * 4f64.ln()).abs() < 1e-12);
        assert!(kl_coeff_ball(2.5, 1.0, 3).is_err());
        let mut rng = chain_rng(2, 0);
        let mc = coeff_ball_mass_mc(1.0, 1.0, 2, 200_000, &mut rng).unwrap();
        assert!((mc.estimate - 0.25).abs() <= 3.0 * mc.std_error);
    }

    #[test]
    fn sphere_caps() {
        let mut rng = chain_rng(3, 0);
        let mc = sphere_cap_mass(2, 1.0, 100_000, &mut rng).unwrap();
        assert!((mc.estimate - 1.0 / 3.0).abs() <= 3.0 * mc.std_error);
        let mc = sphere_cap_mass(1, 0.5, 10_000, &mut rng).unwrap();
        assert!((mc.estimate - 0.5).abs() <= 3.0 * mc.std_error);
        let mc = sphere_cap_mass(3, 0.5, 100_000, &mut rng).unwrap();
        assert!(mc.estimate - 3.0 * mc.std_error >= sphere_cap_bound(3, 0.5));
        assert!((sphere_cap_bound(3, 0.5) - 1.0 / (432.0 * 2f64.sqrt())).abs() < 1e-15);
        assert!(sphere_cap_mass(2, 1.5, 10, &mut rng).is_err());
    }

    #[test]
    fn t1_values_and_g_bound() {
        let t = kl_structure_t1(1, 0, 3);
        assert!((t - ((3.0 * std::f64::consts::E).ln() + 2.0 * 10f64.ln())).abs() < 1e-12);
        assert!((t - 6.7038).abs() < 1e-4);
        assert!(kl_structure_t1(2, 0, 3) > t && kl_structure_t1(1, 1, 3) > t);
        let spec = PriorSpec::new(3, 2, 1.0, 2, Arc::new(WaveletSpec::default())).unwrap();
        for d in 1..=3 {
            for s in d..=3 * d {
                let set = spec.counter(d).unwrap().sample(s, &mut chain_rng(4, s as u64)).unwrap();
                for m in 0..=2 {
                    let g = g_constant(&spec, &set, m).unwrap();
                    assert!(g.ln() <= kl_structure_t1(s, m, 3));
                }
            }
        }
    }

    #[test]
    fn radii_and_t2() {
        let r = TestMeasureSpec::default_radii(1, 4, 10).unwrap();
        assert_eq!((r.eta, r.gamma), (1.0 / 40.0, 0.1));
        assert!(TestMeasureSpec::new(0.0, 0.5).is_err());
        let t2 = r.t2(2, 6, 1.0);
        assert!((t2 - (2.0 * (120.0 * 2f64.sqrt()).ln() + 6.0 * 20f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn bound_rhs_example() {
        let v = oracle_bound_rhs(1, 3, 2, 1000, 20, 2, 1.0, 0.1, 1.0).unwrap();
        let expected = (3.0 * 2e4f64.ln() + 32.0 * 1e3f64.ln() + 20f64.ln()) / 1e3;
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.2538).abs() < 1e-3);
        let half = oracle_bound_rhs(1, 3, 2, 2000, 20, 2, 1.0, 0.1, 1.0).unwrap();
        assert!(half < v);
        let at2 = oracle_bound_rhs(1, 3, 2, 1000, 20, 2, 1.0, 2.0, 1.0).unwrap();
        assert!((v - at2 - 20f64.ln() / 1e3).abs() < 1e-15);
    }

    fn planted(seed: u64, n: usize) -> (Dataset, ActiveIndexSet, Arc<WaveletDictionary>) {
        let mut rng = chain_rng(seed, 1);
        let spec = Arc::new(WaveletSpec::default());
        let radius = covering_radius(2f64.sqrt(), &spec);
        let dict = Arc::new(WaveletDictionary::new(spec, 1, 1, radius).unwrap());
        let set = ActiveIndexSet { rows: vec![vec![0, 2]] };
        let theta = sample_theta(&set, &mut rng);
        let mut beta = vec![0.0; dict.len()];
        for (idx, b) in [
            (WaveletIndex::scaling(vec![-3]), 1.0),
            (WaveletIndex::scaling(vec![-4]), -0.5),
            (WaveletIndex::detail(0, vec![-3], 1), 0.4),
            (WaveletIndex::detail(1, vec![-5], 1), 0.3),
        ] {
            beta[dict.position(&idx).unwrap()] = b * rng.random_range(0.5..1.0);
        }
        let coeffs = CoefficientVector::new(dict.clone(), beta).unwrap();
        let scale = 0.5 / coeffs.besov_norm();
        let coeffs = CoefficientVector::new(dict.clone(), coeffs.beta().iter().map(|b| b * scale).collect()).unwrap();
        let truth = ModelState::new(theta, coeffs).unwrap();
        let x: Vec<f64> = (0..n * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = x.chunks(3).map(|r| truth.predict(r).unwrap()).collect();
        (Dataset::new(x, y, 3, 1.0, 1.0).unwrap(), set, dict)
    }

    #[test]
    fn oracle_recovers_planted_solution() {
        let (data, set, dict) = planted(1, 1000);
        let fit = approx_oracle(&data, &set, dict.clone(), 1.0, 2_000, 3, &mut chain_rng(1, 2)).unwrap();
        assert!(fit.risk <= 1e-4, "risk {}", fit.risk);
        assert!(fit.state.coeffs.besov_norm() <= 1.0 + 1e-12);
        let zero = mean_squared_residual(&vec![0.0; data.n()], data.labels());
        assert!(fit.risk <= zero);
    }

    #[test]
    fn oracle_budget_is_monotone() {
        let (data, set, dict) = planted(2, 300);
        let mut last = f64::INFINITY;
        for budget in [1, 3, 10, 30, 100] {
            let fit = approx_oracle(&data, &set, dict.clone(), 1.0, budget, 2, &mut chain_rng(2, 2)).unwrap();
            assert!(fit.evaluations <= budget);
            assert!(fit.risk <= last);
            last = fit.risk;
        }
        let fit = approx_oracle(&data, &set, dict, 1.0, 1, 2, &mut chain_rng(2, 2)).unwrap();
        assert!(fit.exhausted);
    }
}
