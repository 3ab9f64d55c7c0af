//! The sieve prior `π = C_π Σ_d 10^{−d} δ_d ⊗ μ_d ⊗ ν_d`: weights, exact
//! sampling, and the mass of a structure `(d, I, M)`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{domain, Result};
use crate::model::{ActiveIndexSet, ModelState, SparseMatrix, SparseRow};
use crate::wavelet::{cardinality, CoefficientVector, WaveletDictionary, WaveletSpec};

/// Default cap on `|𝒵^d_{M,N}|` for structures the sampler may visit.
pub const DEFAULT_MAX_COEFFICIENTS: usize = 1 << 17;

type DictionaryCache = HashMap<(usize, u32), Arc<WaveletDictionary>>;

/// Constants defining `π`.
#[derive(Clone)]
pub struct PriorSpec {
    pub p: usize,
    pub n: usize,
    pub c_bound: f64,
    /// Shift radius `N`.
    pub radius: u32,
    pub wavelet: Arc<WaveletSpec>,
    /// Structures whose dictionary is larger than this are excluded from the support.
    pub max_coefficients: usize,
    dicts: Arc<Mutex<DictionaryCache>>,
    counts: Arc<Mutex<HashMap<usize, Arc<IndexSetCounter>>>>,
}

impl fmt::Debug for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PriorSpec")
            .field("p", &self.p)
            .field("n", &self.n)
            .field("c_bound", &self.c_bound)
            .field("radius", &self.radius)
            .field("order", &self.wavelet.order())
            .field("max_coefficients", &self.max_coefficients)
            .finish()
    }
}

impl PriorSpec {
    pub fn new(p: usize, n: usize, c_bound: f64, radius: u32, wavelet: Arc<WaveletSpec>) -> Result<Self> {
        if p == 0 || n == 0 {
            return domain(format!("prior needs p >= 1 and n >= 1 (got p={p}, n={n})"));
        }
        if !(c_bound >= 1.0) || !c_bound.is_finite() {
            return domain(format!("C must be a finite number >= 1 (got {c_bound})"));
        }
        if radius == 0 {
            return domain("shift radius N must be >= 1");
        }
        Ok(Self {
            p,
            n,
            c_bound,
            radius,
            wavelet,
            max_coefficients: DEFAULT_MAX_COEFFICIENTS,
            dicts: Default::default(),
            counts: Default::default(),
        })
    }

    pub fn with_max_coefficients(mut self, cap: usize) -> Self {
        self.max_coefficients = cap;
        self
    }

    /// Radius `C + 1` of the coefficient ball.
    pub fn ball_radius(&self) -> f64 {
        self.c_bound + 1.0
    }

    pub fn weights(&self) -> StructuralWeights {
        StructuralWeights {
            p: self.p,
            n: self.n,
        }
    }

    /// Whether `(d, M)` lies in the sampled support (dictionary within the cap).
    pub fn admits(&self, d: usize, level: u32) -> bool {
        d >= 1
            && d <= self.p
            && level as usize <= self.n
            && cardinality(d, level, self.radius).is_some_and(|k| k <= self.max_coefficients as u128)
    }

    /// Largest admissible level for `d`, or `None` when even `M = 0` is excluded.
    pub fn max_level(&self, d: usize) -> Option<u32> {
        if !self.admits(d, 0) {
            return None;
        }
        let mut m = 0u32;
        while (m as usize) < self.n && self.admits(d, m + 1) {
            m += 1;
        }
        Some(m)
    }

    /// Shared dictionary for `(d, M)`.
    pub fn dictionary(&self, d: usize, level: u32) -> Result<Arc<WaveletDictionary>> {
        if let Some(dict) = self.dicts.lock().expect("dictionary cache poisoned").get(&(d, level)) {
            return Ok(dict.clone());
        }
        let dict = Arc::new(WaveletDictionary::new(self.wavelet.clone(), d, level, self.radius)?);
        Ok(self
            .dicts
            .lock()
            .expect("dictionary cache poisoned")
            .entry((d, level))
            .or_insert(dict)
            .clone())
    }

    /// Counting table for `ℐ_{d,·}` over this `p`.
    pub fn counter(&self, d: usize) -> Result<Arc<IndexSetCounter>> {
        if let Some(c) = self.counts.lock().expect("count cache poisoned").get(&d) {
            return Ok(c.clone());
        }
        let c = Arc::new(IndexSetCounter::new(d, self.p)?);
        Ok(self
            .counts
            .lock()
            .expect("count cache poisoned")
            .entry(d)
            .or_insert(c)
            .clone())
    }

    /// `log π(d, I, M)` restricted to the structure, i.e. [`structural_mass`].
    pub fn log_structure_mass(&self, d: usize, sparsity: usize, level: u32) -> Result<f64> {
        let count = self.counter(d)?.count(sparsity);
        if count.log == f64::NEG_INFINITY {
            return domain(format!("no index sets with d={d}, ‖I‖={sparsity}, p={}", self.p));
        }
        let w = self.weights();
        Ok(w.log_c_pi() + w.log_c_mu(d) + w.log_c_nu()
            - (sparsity as f64 + level as f64 + 1.0) * LN_10
            - count.log)
    }
}

const LN_10: f64 = std::f64::consts::LN_10;

/// `ln(1 − 10^{−a})` for `a > 0`.
fn ln_one_minus_pow10(a: f64) -> f64 {
    (-(10f64.powf(-a))).ln_1p()
}

/// Normalized geometric weight families of the prior.
#[derive(Debug, Clone, Copy)]
pub struct StructuralWeights {
    pub p: usize,
    pub n: usize,
}

impl StructuralWeights {
    /// `ln C_π`, `C_π = 9/(1 − 10^{−p})`.
    pub fn log_c_pi(&self) -> f64 {
        9f64.ln() - ln_one_minus_pow10(self.p as f64)
    }

    /// `ln C_{μ,d}`, `C_{μ,d} = 9/(1 − 10^{(1−p)d−1})`.
    pub fn log_c_mu(&self, d: usize) -> f64 {
        9f64.ln() - ln_one_minus_pow10(((self.p - 1) * d + 1) as f64)
    }

    /// `ln C_{ν,d}`, `C_{ν,d} = 9/(10 − 10^{−n})`.
    pub fn log_c_nu(&self) -> f64 {
        9f64.ln() - LN_10 - ln_one_minus_pow10(self.n as f64 + 1.0)
    }

    /// `C_π 10^{−d}` for `d ∈ 1..=p`.
    pub fn dim_weight(&self, d: usize) -> f64 {
        if d == 0 || d > self.p {
            return 0.0;
        }
        (self.log_c_pi() - d as f64 * LN_10).exp()
    }

    /// `C_{μ,d} 10^{−i+d−1}` for `i ∈ d..=dp`.
    pub fn sparsity_weight(&self, d: usize, i: usize) -> f64 {
        if i < d || i > d * self.p {
            return 0.0;
        }
        (self.log_c_mu(d) - (i - d + 1) as f64 * LN_10).exp()
    }

    /// `C_{ν,d} 10^{−M}` for `M ∈ 0..=n`.
    pub fn level_weight(&self, level: u32) -> f64 {
        if level as usize > self.n {
            return 0.0;
        }
        (self.log_c_nu() - level as f64 * LN_10).exp()
    }
}

/// `|ℐ_{d,i}|` in log form, with the exact integer when it is tracked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexSetCount {
    pub log: f64,
    pub exact: Option<u128>,
}

/// Dynamic-programming table of `|ℐ_{j,s}|` for `j ≤ d` rows over `p` coordinates.
#[derive(Debug, Clone)]
pub struct IndexSetCounter {
    d: usize,
    p: usize,
    log_binom: Vec<f64>,
    /// `log_table[j][s] = ln |ℐ_{j,s}|`, `s ∈ 0..=j·p`.
    log_table: Vec<Vec<f64>>,
    exact_table: Option<Vec<Vec<u128>>>,
}

/// Products tracked exactly while `p·d` stays at or below this.
pub const EXACT_COUNT_LIMIT: usize = 40;

impl IndexSetCounter {
    pub fn new(d: usize, p: usize) -> Result<Self> {
        if d == 0 || d > p {
            return domain(format!("index sets need 1 <= d <= p (got d={d}, p={p})"));
        }
        let log_binom: Vec<f64> = (0..=p).map(|t| ln_binomial(p, t)).collect();
        let mut log_table = vec![vec![0.0]];
        for j in 1..=d {
            let prev = &log_table[j - 1];
            let mut row = vec![f64::NEG_INFINITY; j * p + 1];
            let mut terms = Vec::with_capacity(p);
            for (s, cell) in row.iter_mut().enumerate().skip(j) {
                terms.clear();
                for (t, lb) in log_binom.iter().enumerate().take(p.min(s) + 1).skip(1) {
                    if let Some(&c) = prev.get(s - t) {
                        if c > f64::NEG_INFINITY {
                            terms.push(lb + c);
                        }
                    }
                }
                *cell = log_sum_exp(&terms);
            }
            log_table.push(row);
        }
        let exact_table = (p * d <= EXACT_COUNT_LIMIT).then(|| {
            let binom: Vec<u128> = (0..=p).map(|t| binomial(p, t)).collect();
            let mut table = vec![vec![1u128]];
            for j in 1..=d {
                let prev = &table[j - 1];
                let mut row = vec![0u128; j * p + 1];
                for (s, cell) in row.iter_mut().enumerate().skip(j) {
                    *cell = (1..=p.min(s))
                        .filter_map(|t| prev.get(s - t).map(|c| binom[t] * c))
                        .sum();
                }
                table.push(row);
            }
            table
        });
        Ok(Self {
            d,
            p,
            log_binom,
            log_table,
            exact_table,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// `|ℐ_{d,i}|`; zero (log `−∞`) outside `d..=dp`.
    pub fn count(&self, i: usize) -> IndexSetCount {
        self.count_rows(self.d, i)
    }

    fn count_rows(&self, j: usize, s: usize) -> IndexSetCount {
        let log = self.log_table[j].get(s).copied().unwrap_or(f64::NEG_INFINITY);
        let exact = self
            .exact_table
            .as_ref()
            .map(|t| t[j].get(s).copied().unwrap_or(0));
        IndexSetCount { log, exact }
    }

    /// Uniform draw from `ℐ_{d,i}`: choose `|I_1| ∝ C(p,|I_1|)·|ℐ_{d−1,i−|I_1|}|`
    /// by Gumbel-max, draw a uniform subset of that size, recurse.
    pub fn sample<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> Result<ActiveIndexSet> {
        if i < self.d || i > self.d * self.p {
            return domain(format!(
                "sparsity {i} outside [{}, {}] for d={}, p={}",
                self.d,
                self.d * self.p,
                self.d,
                self.p
            ));
        }
        let mut rows = Vec::with_capacity(self.d);
        let mut remaining = i;
        for j in (1..=self.d).rev() {
            let prev = &self.log_table[j - 1];
            let mut best = (f64::NEG_INFINITY, 0usize);
            for t in 1..=self.p.min(remaining) {
                let Some(&c) = prev.get(remaining - t) else {
                    continue;
                };
                if c == f64::NEG_INFINITY {
                    continue;
                }
                let key = self.log_binom[t] + c + gumbel(rng);
                if key > best.0 {
                    best = (key, t);
                }
            }
            let t = best.1;
            let mut row = index::sample(rng, self.p, t).into_vec();
            row.sort_unstable();
            rows.push(row);
            remaining -= t;
        }
        Ok(ActiveIndexSet { rows })
    }
}

fn gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let e: f64 = Exp1.sample(rng);
    -e.ln()
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    // Neumaier compensated sum of the shifted exponentials.
    let mut sum = 0.0;
    let mut comp = 0.0;
    for t in terms {
        let v = (t - max).exp();
        let s = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - s) + v;
        } else {
            comp += (v - s) + sum;
        }
        sum = s;
    }
    max + (sum + comp).ln()
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    statrs::function::factorial::ln_binomial(n as u64, k as u64)
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc = 1u128;
    for j in 0..k {
        acc = acc * (n - j) as u128 / (j + 1) as u128;
    }
    acc
}

/// `|ℐ_{d,i}|` over `p` coordinates.
pub fn count_index_sets(d: usize, i: usize, p: usize) -> Result<IndexSetCount> {
    Ok(IndexSetCounter::new(d, p)?.count(i))
}

/// Index `k ∈ 0..len` with `P(k) ∝ ratio^k`.
pub(crate) fn sample_truncated_geometric<R: Rng + ?Sized>(ratio: f64, len: usize, rng: &mut R) -> usize {
    debug_assert!(len >= 1 && ratio > 0.0 && ratio < 1.0);
    let tail = ratio.powi(len.min(i32::MAX as usize) as i32);
    let u: f64 = rng.random();
    let k = ((1.0 - u * (1.0 - tail)).ln() / ratio.ln()).floor();
    (k.max(0.0) as usize).min(len - 1)
}

/// Sparsity `i ∈ d..=dp` with `P(i) = C_{μ,d} 10^{−i+d−1}`.
pub fn sample_sparsity<R: Rng + ?Sized>(d: usize, p: usize, rng: &mut R) -> Result<usize> {
    if d == 0 || d > p {
        return domain(format!("sparsity needs 1 <= d <= p (got d={d}, p={p})"));
    }
    Ok(d + sample_truncated_geometric(0.1, d * p - d + 1, rng))
}

/// Uniform draw from `ℐ_{d,i}`.
pub fn sample_index_set<R: Rng + ?Sized>(d: usize, i: usize, p: usize, rng: &mut R) -> Result<ActiveIndexSet> {
    IndexSetCounter::new(d, p)?.sample(i, rng)
}

/// Uniform unit vector on the sphere of `ℝ^{support}`.
pub fn sample_sphere_row<R: Rng + ?Sized>(support: &[usize], rng: &mut R) -> SparseRow {
    loop {
        let values: Vec<f64> = support.iter().map(|_| StandardNormal.sample(rng)).collect();
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-150 {
            return SparseRow {
                support: support.to_vec(),
                values: values.into_iter().map(|v| v / norm).collect(),
            };
        }
    }
}

/// Uniform unit rows on each support of `index_set`.
pub fn sample_theta<R: Rng + ?Sized>(index_set: &ActiveIndexSet, rng: &mut R) -> SparseMatrix {
    SparseMatrix {
        rows: index_set.rows.iter().map(|s| sample_sphere_row(s, rng)).collect(),
    }
}

/// Uniform point of the standard ℓ¹ unit ball in `ℝ^k`.
pub(crate) fn sample_l1_ball<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let mut u: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = u.iter().sum();
    let r = rng.random::<f64>().powf(1.0 / k as f64);
    for v in u.iter_mut() {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        *v = sign * r * *v / total;
    }
    u
}

/// Uniform draw from `ℬ_{d,M}(ξ) = {β : ‖β‖_ℬ ≤ ξ}`.
pub fn sample_coeff_ball<R: Rng + ?Sized>(
    dict: Arc<WaveletDictionary>,
    radius: f64,
    rng: &mut R,
) -> Result<CoefficientVector> {
    if !(radius > 0.0) {
        return domain(format!("ball radius must be positive (got {radius})"));
    }
    let u = sample_l1_ball(dict.len(), rng);
    let beta = u
        .iter()
        .zip(dict.norm_weights())
        .map(|(u, w)| radius * u / w)
        .collect();
    CoefficientVector::new(dict, beta)
}

/// `d` with `P(d) ∝ 10^{−d}` over admissible dimensions.
pub fn sample_dimension<R: Rng + ?Sized>(spec: &PriorSpec, rng: &mut R) -> Result<usize> {
    if !spec.admits(1, 0) {
        return domain("no admissible structure: raise max_coefficients or lower N");
    }
    loop {
        let d = 1 + sample_truncated_geometric(0.1, spec.p, rng);
        if spec.admits(d, 0) {
            return Ok(d);
        }
    }
}

/// `M` with `P(M) ∝ 10^{−M}` over the admissible levels of `d`.
pub fn sample_level<R: Rng + ?Sized>(spec: &PriorSpec, d: usize, rng: &mut R) -> Result<u32> {
    match spec.max_level(d) {
        Some(top) => Ok(sample_truncated_geometric(0.1, top as usize + 1, rng) as u32),
        None => domain(format!("dimension {d} has no admissible level")),
    }
}

/// `Θ ∼ μ_d`.
pub fn sample_theta_given_d<R: Rng + ?Sized>(spec: &PriorSpec, d: usize, rng: &mut R) -> Result<SparseMatrix> {
    let i = sample_sparsity(d, spec.p, rng)?;
    let set = spec.counter(d)?.sample(i, rng)?;
    Ok(sample_theta(&set, rng))
}

/// `(M, β) ∼ ν_d`.
pub fn sample_link_given_d<R: Rng + ?Sized>(spec: &PriorSpec, d: usize, rng: &mut R) -> Result<CoefficientVector> {
    let level = sample_level(spec, d, rng)?;
    sample_coeff_ball(spec.dictionary(d, level)?, spec.ball_radius(), rng)
}

/// A draw from `π` (restricted to admissible structures).
pub fn sample_prior<R: Rng + ?Sized>(spec: &PriorSpec, rng: &mut R) -> Result<ModelState> {
    let d = sample_dimension(spec, rng)?;
    let theta = sample_theta_given_d(spec, d, rng)?;
    let coeffs = sample_link_given_d(spec, d, rng)?;
    ModelState::new(theta, coeffs)
}

/// `log[C_π C_{μ,d} C_{ν,d} 10^{−‖I‖−M−1} / |ℐ_{d,‖I‖}|]`, the prior mass of the
/// structure `(d, I, M)`.
pub fn structural_mass(spec: &PriorSpec, index_set: &ActiveIndexSet, level: u32) -> Result<f64> {
    index_set.validate(spec.p)?;
    if level as usize > spec.n {
        return domain(format!("level {level} exceeds n = {}", spec.n));
    }
    spec.log_structure_mass(index_set.d(), index_set.size(), level)
}

/// `G(d, I, M) = (1/729)(1−10^{−p})(1−10^{(1−p)d−1})(10−10^{−n}) 10^{‖I‖+M+1} |ℐ_{d,‖I‖}|`.
pub fn g_constant(spec: &PriorSpec, index_set: &ActiveIndexSet, level: u32) -> Result<f64> {
    index_set.validate(spec.p)?;
    let (p, n, d) = (spec.p as f64, spec.n as f64, index_set.d() as f64);
    let count = spec.counter(index_set.d())?.count(index_set.size());
    let log_g = -729f64.ln()
        + (1.0 - 10f64.powf(-p)).ln()
        + (1.0 - 10f64.powf((1.0 - p) * d - 1.0)).ln()
        + (10.0 - 10f64.powf(-n)).ln()
        + (index_set.size() as f64 + level as f64 + 1.0) * LN_10
        + count.log;
    Ok(log_g.exp())
}
