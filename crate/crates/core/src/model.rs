//! Data containers, the multi-index predictor `x ↦ f(Θx)`, risks, and the
//! temperature rule for the Gibbs posterior.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Result};
use crate::wavelet::CoefficientVector;

/// `n` covariate rows in `ℝ^p` with scalar labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: Vec<f64>,
    y: Vec<f64>,
    p: usize,
    /// Covariate sup bound `K`.
    pub k_bound: f64,
    /// Regression sup bound `C`.
    pub c_bound: f64,
}

impl Dataset {
    /// `x` is row-major `n × p`.
    pub fn new(x: Vec<f64>, y: Vec<f64>, p: usize, k_bound: f64, c_bound: f64) -> Result<Self> {
        if p == 0 || y.is_empty() {
            return domain("dataset needs n >= 1 and p >= 1");
        }
        if x.len() != y.len() * p {
            return domain(format!("{} covariates do not form {} rows of {p}", x.len(), y.len()));
        }
        if let Some(v) = x.iter().find(|v| !(v.abs() <= k_bound)) {
            return domain(format!("covariate {v} exceeds the bound K = {k_bound}"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return domain("labels must be finite");
        }
        Ok(Self {
            x,
            y,
            p,
            k_bound,
            c_bound,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks_exact(self.p)
    }

    pub fn covariates(&self) -> &[f64] {
        &self.x
    }

    pub fn labels(&self) -> &[f64] {
        &self.y
    }
}

/// Supports `I_1, …, I_d` of the rows of a dimension reduction matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActiveIndexSet {
    pub rows: Vec<Vec<usize>>,
}

impl ActiveIndexSet {
    pub fn d(&self) -> usize {
        self.rows.len()
    }

    /// `‖I‖ = Σ |I_i|`.
    pub fn size(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.rows.is_empty() {
            return domain("index set has no rows");
        }
        for r in &self.rows {
            if r.is_empty() {
                return domain("index set rows must be non-empty");
            }
            if r.iter().any(|j| *j >= p) {
                return domain(format!("index set row {r:?} exceeds p = {p}"));
            }
            if r.windows(2).any(|w| w[0] >= w[1]) {
                return domain(format!("index set row {r:?} is not strictly increasing"));
            }
        }
        Ok(())
    }
}

/// One unit-norm row `ϑ_i` with its support.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    pub support: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseRow {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    #[inline]
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.values)
            .map(|(j, v)| v * x[*j])
            .sum()
    }

    pub fn to_dense(&self, p: usize) -> Vec<f64> {
        let mut out = vec![0.0; p];
        for (j, v) in self.support.iter().zip(&self.values) {
            out[*j] = *v;
        }
        out
    }
}

/// `Θ ∈ 𝒮_d(I)`: `d` sparse rows of unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub rows: Vec<SparseRow>,
}

impl SparseMatrix {
    pub fn d(&self) -> usize {
        self.rows.len()
    }

    pub fn index_set(&self) -> ActiveIndexSet {
        ActiveIndexSet {
            rows: self.rows.iter().map(|r| r.support.clone()).collect(),
        }
    }

    /// Writes `Θx` into `out`.
    #[inline]
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, r) in out.iter_mut().zip(&self.rows) {
            *o = r.dot(x);
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d()];
        self.apply_into(x, &mut out);
        out
    }

    /// `Θx_j` for every row of the dataset, row-major `n × d`.
    pub fn project_dataset(&self, data: &Dataset) -> Vec<f64> {
        let d = self.d();
        let mut out = vec![0.0; data.n() * d];
        for (chunk, x) in out.chunks_exact_mut(d).zip(data.rows()) {
            self.apply_into(x, chunk);
        }
        out
    }

    pub fn validate(&self, p: usize, tol: f64) -> Result<()> {
        self.index_set().validate(p)?;
        for (i, r) in self.rows.iter().enumerate() {
            if r.values.len() != r.support.len() {
                return domain(format!("row {i}: values and support differ in length"));
            }
            let norm = r.norm();
            if (norm - 1.0).abs() > tol {
                return domain(format!("row {i} has norm {norm}"));
            }
        }
        Ok(())
    }
}

/// A triplet `(d, Θ, f)` with `f = Φ_{d,M}(β)`.
#[derive(Debug, Clone)]
pub struct ModelState {
    pub theta: SparseMatrix,
    pub coeffs: CoefficientVector,
}

impl ModelState {
    pub fn new(theta: SparseMatrix, coeffs: CoefficientVector) -> Result<Self> {
        if theta.d() != coeffs.dim() {
            return domain(format!(
                "Θ has {} rows but the link has dimension {}",
                theta.d(),
                coeffs.dim()
            ));
        }
        Ok(Self { theta, coeffs })
    }

    pub fn d(&self) -> usize {
        self.theta.d()
    }

    pub fn level(&self) -> u32 {
        self.coeffs.level()
    }

    pub fn index_set(&self) -> ActiveIndexSet {
        self.theta.index_set()
    }

    /// `‖I‖` of the row supports.
    pub fn sparsity(&self) -> usize {
        self.theta.rows.iter().map(|r| r.support.len()).sum()
    }

    /// Checks every invariant of a prior/posterior state for link bound `c_bound`.
    pub fn validate(&self, p: usize, c_bound: f64) -> Result<()> {
        self.theta.validate(p, 1e-9)?;
        if self.theta.d() != self.coeffs.dim() {
            return domain("Θ and link dimensions differ");
        }
        let norm = self.coeffs.besov_norm();
        if norm > (c_bound + 1.0) * (1.0 + 1e-12) {
            return domain(format!("‖β‖_ℬ = {norm} exceeds C + 1 = {}", c_bound + 1.0));
        }
        Ok(())
    }

    /// `f(Θx)`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let p_needed = self
            .theta
            .rows
            .iter()
            .filter_map(|r| r.support.last())
            .max()
            .map_or(0, |j| j + 1);
        if x.len() < p_needed {
            return domain(format!(
                "covariate of length {} but Θ uses coordinate {}",
                x.len(),
                p_needed - 1
            ));
        }
        let z = self.theta.apply(x);
        Ok(self.coeffs.eval_link_unchecked(&z))
    }

    /// Predictions at every row of `data`.
    pub fn predict_dataset(&self, data: &Dataset) -> Vec<f64> {
        let z = self.theta.project_dataset(data);
        z.chunks_exact(self.d())
            .map(|zi| self.coeffs.eval_link_unchecked(zi))
            .collect()
    }
}

/// `R_n = (1/n) Σ (Y_i − f(ΘX_i))²`.
pub fn empirical_risk(state: &ModelState, data: &Dataset) -> f64 {
    mean_squared_residual(&state.predict_dataset(data), data.labels())
}

pub(crate) fn mean_squared_residual(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter()
        .zip(y)
        .map(|(f, y)| (y - f) * (y - f))
        .sum::<f64>()
        / y.len() as f64
}

/// Draws covariate vectors `X ∈ ℝ^p`.
pub trait CovariateSampler: Sync {
    fn p(&self) -> usize;
    fn sample_into(&self, rng: &mut dyn rand::RngCore, out: &mut [f64]);
}

/// `X` uniform on `[−K, K]^p`.
#[derive(Debug, Clone, Copy)]
pub struct UniformCube {
    pub p: usize,
    pub k_bound: f64,
}

impl CovariateSampler for UniformCube {
    fn p(&self) -> usize {
        self.p
    }

    fn sample_into(&self, rng: &mut dyn rand::RngCore, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = rng.random_range(-self.k_bound..=self.k_bound);
        }
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// `𝔼[(f(ΘX) − F(X))²]` over `n_eval` fresh covariates drawn from `generator`.
pub fn excess_risk_mc(
    state: &ModelState,
    truth: &(dyn Fn(&[f64]) -> f64 + Sync),
    generator: &dyn CovariateSampler,
    n_eval: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_eval == 0 {
        return domain("excess risk needs n_eval >= 1");
    }
    let p = generator.p();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; p];
    let mut z = vec![0.0; state.d()];
    // Welford accumulation.
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for k in 0..n_eval {
        generator.sample_into(&mut rng, &mut x);
        state.theta.apply_into(&x, &mut z);
        let diff = state.coeffs.eval_link_unchecked(&z) - truth(&x);
        let v = diff * diff;
        let delta = v - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (v - mean);
    }
    let var = if n_eval > 1 {
        m2 / (n_eval - 1) as f64
    } else {
        0.0
    };
    Ok(McEstimate {
        estimate: mean,
        std_error: (var / n_eval as f64).sqrt(),
    })
}

/// Sub-Gaussian moment constants `(σ, Γ)` of the noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma: f64,
    pub gamma: f64,
}

/// Bounds on `Θ*X`: sup norm `B₁` and density bound `B₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorSpec {
    pub b1: f64,
    pub b2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Temperature {
    pub q: f64,
    pub lambda: f64,
}

/// `Q = 8(2C+1)(Γ ∨ (2C+1))` and `λ = n / (Q + 2((2C+1)² + 4σ²))`.
pub fn lambda_from_constants(n: usize, c_bound: f64, gamma: f64, sigma: f64) -> Result<Temperature> {
    if n == 0 {
        return domain("n must be >= 1");
    }
    if !(c_bound >= 1.0) {
        return domain(format!("C must be >= 1 (got {c_bound})"));
    }
    if !(gamma > 0.0 && sigma > 0.0) || !gamma.is_finite() || !sigma.is_finite() {
        return domain(format!("Γ and σ must be positive (got Γ={gamma}, σ={sigma})"));
    }
    let a = 2.0 * c_bound + 1.0;
    let q = 8.0 * a * gamma.max(a);
    let lambda = n as f64 / (q + 2.0 * (a * a + 4.0 * sigma * sigma));
    Ok(Temperature { q, lambda })
}

/// Upper end `n / (Q + (2C+1)² + 4σ²)` of the admissible temperature interval.
pub fn lambda_upper_limit(n: usize, c_bound: f64, gamma: f64, sigma: f64) -> Result<f64> {
    let t = lambda_from_constants(n, c_bound, gamma, sigma)?;
    let a = 2.0 * c_bound + 1.0;
    Ok(n as f64 / (t.q + a * a + 4.0 * sigma * sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::{WaveletDictionary, WaveletIndex, WaveletSpec};
    use std::sync::Arc;

    fn unit_state(p: usize, coord: usize, value: f64) -> ModelState {
        let dict = Arc::new(WaveletDictionary::new(Arc::new(WaveletSpec::default()), 1, 0, 2).unwrap());
        let mut c = CoefficientVector::zeros(dict.clone());
        let pos = dict.position(&WaveletIndex::scaling(vec![0])).unwrap();
        c.beta_mut()[pos] = value;
        let theta = SparseMatrix {
            rows: vec![SparseRow {
                support: vec![coord],
                values: vec![1.0],
            }],
        };
        assert!(coord < p);
        ModelState::new(theta, c).unwrap()
    }

    #[test]
    fn zero_link_predicts_zero() {
        let s = unit_state(3, 1, 0.0);
        assert_eq!(s.predict(&[0.1, 2.0, 0.3]).unwrap(), 0.0);
    }

    #[test]
    fn composition_with_unit_row() {
        let s = unit_state(2, 0, 1.0);
        let spec = s.coeffs.dictionary().spec().clone();
        for x1 in [0.2, 1.7, 3.3, 6.1] {
            assert_eq!(s.predict(&[x1, -0.4]).unwrap(), spec.scaling(x1));
        }
        assert!(s.predict(&[]).is_err());
    }

    #[test]
    fn empirical_risk_by_hand() {
        let zero = unit_state(1, 0, 0.0);
        let data = Dataset::new(vec![0.1, 0.2], vec![1.0, 1.0], 1, 1.0, 1.0).unwrap();
        assert!((empirical_risk(&zero, &data) - 1.0).abs() < 1e-15);
        assert!((mean_squared_residual(&[0.5, -0.5], &[1.0, 0.0]) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn perfect_predictor_has_zero_risk() {
        let s = unit_state(1, 0, 0.8);
        let x = vec![0.5, 1.5, 2.5];
        let y: Vec<f64> = x.iter().map(|v| s.predict(&[*v]).unwrap()).collect();
        let data = Dataset::new(x, y, 1, 3.0, 1.0).unwrap();
        assert_eq!(empirical_risk(&s, &data), 0.0);
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(vec![2.0], vec![0.0], 1, 1.0, 1.0).is_err());
        assert!(Dataset::new(vec![0.0, 0.0], vec![0.0], 1, 1.0, 1.0).is_err());
        assert!(Dataset::new(vec![], vec![], 1, 1.0, 1.0).is_err());
    }

    #[test]
    fn temperature_arithmetic() {
        let t = lambda_from_constants(980, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(t.q, 72.0);
        assert!((t.lambda - 10.0).abs() < 1e-12);
        let t = lambda_from_constants(100, 1.0, 5.0, 1.0).unwrap();
        assert_eq!(t.q, 120.0);
        assert!(lambda_from_constants(0, 1.0, 1.0, 1.0).is_err());
        assert!(lambda_from_constants(10, 0.5, 1.0, 1.0).is_err());
        assert!(lambda_from_constants(10, 1.0, 0.0, 1.0).is_err());
        assert!(lambda_from_constants(10, 1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn excess_risk_of_exact_and_constant_predictors() {
        let s = unit_state(2, 0, 0.6);
        let cube = UniformCube { p: 2, k_bound: 1.0 };
        let exact = |x: &[f64]| s.predict(x).unwrap();
        let e = excess_risk_mc(&s, &exact, &cube, 2000, 1).unwrap();
        assert!(e.estimate <= 3.0 * e.std_error + 1e-300);
        let zero = unit_state(2, 0, 0.0);
        let e = excess_risk_mc(&zero, &|_| 0.7, &cube, 2000, 1).unwrap();
        assert!((e.estimate - 0.49).abs() <= 3.0 * e.std_error + 1e-12);
        assert!(excess_risk_mc(&zero, &|_| 0.7, &cube, 0, 1).is_err());
    }
}
