//! Coefficient vectors `β ∈ ℝ^{𝒵^d_M}`, the link map `Φ_{d,M}` and the norm ‖·‖_ℬ.

use std::sync::Arc;

use super::dictionary::WaveletDictionary;
use crate::error::{domain, Error, Result};

#[derive(Debug, Clone)]
pub struct CoefficientVector {
    beta: Vec<f64>,
    dict: Arc<WaveletDictionary>,
}

impl CoefficientVector {
    pub fn new(dict: Arc<WaveletDictionary>, beta: Vec<f64>) -> Result<Self> {
        if beta.len() != dict.len() {
            return domain(format!(
                "coefficient length {} does not match dictionary size {}",
                beta.len(),
                dict.len()
            ));
        }
        Ok(Self { beta, dict })
    }

    pub fn zeros(dict: Arc<WaveletDictionary>) -> Self {
        let beta = vec![0.0; dict.len()];
        Self { beta, dict }
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn beta_mut(&mut self) -> &mut [f64] {
        &mut self.beta
    }

    pub fn into_beta(self) -> Vec<f64> {
        self.beta
    }

    pub fn dictionary(&self) -> &Arc<WaveletDictionary> {
        &self.dict
    }

    pub fn dim(&self) -> usize {
        self.dict.dim()
    }

    pub fn level(&self) -> u32 {
        self.dict.max_level()
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    /// `‖β‖_ℬ = L^d Σ_l 2^{l1(d/2+1)} |β_l|`.
    pub fn besov_norm(&self) -> f64 {
        self.dict
            .norm_weights()
            .iter()
            .zip(&self.beta)
            .map(|(w, b)| w * b.abs())
            .sum()
    }

    /// `Φ_{d,M}(β)(x) = Σ_l β_l Ψ_l(x)`.
    pub fn eval_link(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return domain(format!(
                "link of dimension {} evaluated at a point of dimension {}",
                self.dim(),
                x.len()
            ));
        }
        Ok(self.eval_link_unchecked(x))
    }

    pub(crate) fn eval_link_unchecked(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        self.dict
            .for_each_active(x, |pos, v| acc += self.beta[pos] * v);
        acc
    }

    /// Truncation to `𝒵^d_{level}` (a prefix of the canonical order).
    pub fn project_to_level(&self, level: u32, target: Arc<WaveletDictionary>) -> Result<Self> {
        if target.dim() != self.dim()
            || target.radius() != self.dict.radius()
            || target.max_level() != level.min(self.level())
        {
            return domain("projection target dictionary does not match (d, min(M, level), N)");
        }
        let len = self.dict.prefix_len(level);
        Ok(Self {
            beta: self.beta[..len].to_vec(),
            dict: target,
        })
    }
}

/// Approximates `⟨f, Ψ_l⟩` for every dictionary entry with a composite
/// trapezoid rule at step `2^-step_exponent` per coordinate, restricted to the
/// support of each `Ψ_l`.
pub fn wavelet_coefficients(
    f: impl Fn(&[f64]) -> f64,
    dict: Arc<WaveletDictionary>,
    step_exponent: u32,
) -> Result<CoefficientVector> {
    let d = dict.dim();
    let support = dict.spec().support_len();
    let mut beta = Vec::with_capacity(dict.len());
    let mut point = vec![0.0; d];
    for l in dict.indices() {
        let scale = (l.l1 as f64).exp2();
        // Ψ_l is supported on ∏ [l2_i, l2_i + support] / 2^{l1}; refine the step with the level.
        let h = (-(step_exponent as f64) - l.l1 as f64).exp2();
        let steps = (support / scale / h).round() as usize;
        let lo: Vec<f64> = l.l2.iter().map(|s| *s as f64 / scale).collect();
        let mut counter = vec![0usize; d];
        let mut acc = 0.0;
        'grid: loop {
            let mut weight = 1.0;
            for i in 0..d {
                point[i] = lo[i] + counter[i] as f64 * h;
                if counter[i] == 0 || counter[i] == steps {
                    weight *= 0.5;
                }
            }
            let psi = dict.eval_basis_unchecked(l, &point);
            if psi != 0.0 {
                let fv = f(&point);
                if !fv.is_finite() {
                    return Err(Error::Numeric(format!(
                        "integrand is not finite at {point:?}"
                    )));
                }
                acc += weight * fv * psi;
            }
            let mut i = d;
            loop {
                if i == 0 {
                    break 'grid;
                }
                i -= 1;
                counter[i] += 1;
                if counter[i] <= steps {
                    continue 'grid;
                }
                counter[i] = 0;
            }
        }
        beta.push(acc * h.powi(d as i32));
    }
    CoefficientVector::new(dict, beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::{WaveletIndex, WaveletSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dict(d: usize, m: u32, n: u32) -> Arc<WaveletDictionary> {
        Arc::new(WaveletDictionary::new(Arc::new(WaveletSpec::default()), d, m, n).unwrap())
    }

    #[test]
    fn zero_coefficients() {
        let c = CoefficientVector::zeros(dict(2, 1, 1));
        assert_eq!(c.besov_norm(), 0.0);
        assert_eq!(c.eval_link(&[0.3, -0.2]).unwrap(), 0.0);
        assert!(c.eval_link(&[0.3]).is_err());
    }

    #[test]
    fn norm_of_single_coefficients() {
        let dct = dict(1, 2, 1);
        let l = dct.spec().l_const();
        let mut c = CoefficientVector::zeros(dct.clone());
        let s = dct.position(&WaveletIndex::scaling(vec![1])).unwrap();
        c.beta_mut()[s] = -2.5;
        assert!((c.besov_norm() - 2.5 * l).abs() < 1e-12);
        let mut c = CoefficientVector::zeros(dct.clone());
        let p = dct.position(&WaveletIndex::detail(2, vec![-3], 1)).unwrap();
        c.beta_mut()[p] = 1.0;
        assert!((c.besov_norm() - 8.0 * l).abs() < 1e-12);
    }

    #[test]
    fn one_hot_link_is_the_basis_function() {
        let dct = dict(2, 1, 1);
        let l0 = WaveletIndex::detail(1, vec![1, -2], 2);
        let mut c = CoefficientVector::zeros(dct.clone());
        c.beta_mut()[dct.position(&l0).unwrap()] = 0.7;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let x = [rng.random_range(-2.0..3.0), rng.random_range(-2.0..3.0)];
            let want = 0.7 * dct.eval_basis(&l0, &x).unwrap();
            assert!((c.eval_link(&x).unwrap() - want).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_length_mismatch() {
        assert!(CoefficientVector::new(dict(1, 0, 1), vec![0.0; 5]).is_err());
    }

    #[test]
    fn quadrature_of_basis_function_is_unit_vector() {
        let dct = dict(1, 1, 1);
        for (target, l0) in dct.indices().iter().enumerate().step_by(3) {
            let f = |x: &[f64]| dct.eval_basis_unchecked(l0, x);
            let c = wavelet_coefficients(f, dct.clone(), 10).unwrap();
            for (i, b) in c.beta().iter().enumerate() {
                let want = if i == target { 1.0 } else { 0.0 };
                assert!((b - want).abs() < 1e-2, "l0={l0:?} i={i}: {b}");
            }
        }
    }

    #[test]
    fn quadrature_of_zero_is_zero() {
        let c = wavelet_coefficients(|_| 0.0, dict(1, 1, 2), 8).unwrap();
        assert!(c.beta().iter().all(|b| *b == 0.0));
    }

    #[test]
    fn non_finite_integrand_is_an_error() {
        let r = wavelet_coefficients(|_| f64::NAN, dict(1, 0, 1), 6);
        assert!(matches!(r, Err(Error::Numeric(_))));
    }

    #[test]
    fn projection_prefix() {
        let full = dict(1, 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let beta: Vec<f64> = (0..full.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = CoefficientVector::new(full.clone(), beta).unwrap();
        let same = c.project_to_level(5, full.clone()).unwrap();
        assert_eq!(same.beta(), c.beta());
        let low = c.project_to_level(1, dict(1, 1, 2)).unwrap();
        assert_eq!(low.beta(), &c.beta()[..low.len()]);
        assert!(c.project_to_level(1, dict(1, 2, 2)).is_err());
    }
}
