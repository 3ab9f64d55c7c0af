//! Cascade-algorithm tables for the Daubechies scaling function and wavelet.

use nalgebra::{DMatrix, DVector};

use super::filters;
use crate::error::{domain, Error, Result};

pub const DEFAULT_ORDER: usize = 4;
pub const DEFAULT_TABLE_RESOLUTION: u32 = 12;

/// Tabulated Daubechies pair `(φ, ψ)` of a fixed order.
///
/// Both functions are supported on `[0, 2·order − 1]`. Values between dyadic
/// grid points at step `2^-table_resolution` are linearly interpolated, so the
/// evaluated functions are piecewise linear and the constant `l_const` bounds
/// their values and slopes exactly.
#[derive(Debug, Clone)]
pub struct WaveletSpec {
    order: usize,
    table_resolution: u32,
    l_const: f64,
    phi: Vec<f64>,
    psi: Vec<f64>,
}

impl WaveletSpec {
    pub fn new(order: usize, table_resolution: u32) -> Result<Self> {
        if order < filters::MIN_ORDER {
            return domain(format!(
                "Daubechies order {order} is not continuously differentiable; need >= {}",
                filters::MIN_ORDER
            ));
        }
        let h = filters::lowpass(order)
            .ok_or_else(|| Error::Domain(format!("Daubechies order {order} is not tabulated")))?;
        let g = filters::highpass(order).expect("tabulated order");
        if !(2..=20).contains(&table_resolution) {
            return domain(format!("table resolution {table_resolution} outside 2..=20"));
        }
        let phi = cascade_scaling(h, table_resolution)?;
        let psi = wavelet_from_scaling(&g, &phi, table_resolution);
        let step = (-(table_resolution as f64)).exp2();
        let sup = |t: &[f64]| t.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let slope = |t: &[f64]| {
            t.windows(2)
                .fold(0.0_f64, |m, w| m.max(((w[1] - w[0]) / step).abs()))
        };
        let l_const = sup(&phi).max(sup(&psi)).max(slope(&phi)).max(slope(&psi));
        Ok(Self {
            order,
            table_resolution,
            l_const,
            phi,
            psi,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn table_resolution(&self) -> u32 {
        self.table_resolution
    }

    /// `L = ‖ψ‖∞ ∨ ‖φ‖∞ ∨ ‖ψ′‖∞ ∨ ‖φ′‖∞` of the tabulated (interpolated) functions.
    pub fn l_const(&self) -> f64 {
        self.l_const
    }

    /// Right end of the common support `[0, 2·order − 1]`.
    pub fn support_len(&self) -> f64 {
        (2 * self.order - 1) as f64
    }

    pub fn scaling(&self, x: f64) -> f64 {
        self.lookup(&self.phi, x)
    }

    pub fn wavelet(&self, x: f64) -> f64 {
        self.lookup(&self.psi, x)
    }

    /// `ψ_0 = φ`, `ψ_1 = ψ`.
    #[inline]
    pub fn eval_kind(&self, wavelet: bool, x: f64) -> f64 {
        if wavelet {
            self.wavelet(x)
        } else {
            self.scaling(x)
        }
    }

    /// Both `φ(x)` and `ψ(x)` with a single index computation.
    #[inline]
    pub fn eval_pair(&self, x: f64) -> (f64, f64) {
        match self.locate(x) {
            Some((i, frac)) => (
                self.phi[i] + frac * (self.phi[i + 1] - self.phi[i]),
                self.psi[i] + frac * (self.psi[i + 1] - self.psi[i]),
            ),
            None => (0.0, 0.0),
        }
    }

    /// Raw table nodes `(φ, ψ)` at step `2^-table_resolution`.
    pub fn nodes(&self) -> (&[f64], &[f64]) {
        (&self.phi, &self.psi)
    }

    #[inline]
    fn locate(&self, x: f64) -> Option<(usize, f64)> {
        if !(x > 0.0 && x < self.support_len()) {
            return None;
        }
        let t = x * (self.table_resolution as f64).exp2();
        let i = t.floor() as usize;
        if i + 1 >= self.phi.len() {
            return None;
        }
        Some((i, t - i as f64))
    }

    #[inline]
    fn lookup(&self, table: &[f64], x: f64) -> f64 {
        match self.locate(x) {
            Some((i, frac)) => table[i] + frac * (table[i + 1] - table[i]),
            None => 0.0,
        }
    }
}

impl Default for WaveletSpec {
    fn default() -> Self {
        Self::new(DEFAULT_ORDER, DEFAULT_TABLE_RESOLUTION).expect("default wavelet spec")
    }
}

/// Scaling function on the grid `k·2^-resolution`, `k = 0..=(len−1)·2^resolution`.
fn cascade_scaling(h: &[f64], resolution: u32) -> Result<Vec<f64>> {
    let taps = h.len();
    let last = taps - 1; // support [0, last]
    let sqrt2 = std::f64::consts::SQRT_2;

    // Values at the interior integers 1..last-1 solve φ(n) = √2 Σ_k h_k φ(2n−k),
    // normalized by Σ_n φ(n) = 1.
    let m = last - 1;
    let mut a = DMatrix::<f64>::zeros(m, m);
    for row in 0..m {
        let n = row + 1;
        for col in 0..m {
            let j = col + 1;
            let k = 2 * n as isize - j as isize;
            if (0..taps as isize).contains(&k) {
                a[(row, col)] = sqrt2 * h[k as usize];
            }
        }
        a[(row, row)] -= 1.0;
    }
    for col in 0..m {
        a[(m - 1, col)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(m);
    rhs[m - 1] = 1.0;
    let ints = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("singular cascade eigen-system".into()))?;

    let scale = 1usize << resolution;
    let len = last * scale + 1;
    let mut phi = vec![0.0; len];
    for (i, v) in ints.iter().enumerate() {
        phi[(i + 1) * scale] = *v;
    }
    // Dyadic refinement: fill odd multiples of 2^-j from level j-1.
    for j in 1..=resolution {
        let stride = 1usize << (resolution - j);
        let mut idx = stride;
        while idx < len {
            let mut acc = 0.0;
            for (k, hk) in h.iter().enumerate() {
                let src = 2 * idx as isize - (k * scale) as isize;
                if src > 0 && (src as usize) < len {
                    acc += hk * phi[src as usize];
                }
            }
            phi[idx] = sqrt2 * acc;
            idx += 2 * stride;
        }
    }
    Ok(phi)
}

fn wavelet_from_scaling(g: &[f64], phi: &[f64], resolution: u32) -> Vec<f64> {
    let scale = 1usize << resolution;
    let len = phi.len();
    let sqrt2 = std::f64::consts::SQRT_2;
    (0..len)
        .map(|i| {
            let acc: f64 = g
                .iter()
                .enumerate()
                .filter_map(|(k, gk)| {
                    let src = 2 * i as isize - (k * scale) as isize;
                    (src > 0 && (src as usize) < len).then(|| gk * phi[src as usize])
                })
                .sum();
            sqrt2 * acc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, steps: usize) -> f64 {
        let h = (b - a) / steps as f64;
        let inner: f64 = (1..steps).map(|i| f(a + i as f64 * h)).sum();
        h * (inner + 0.5 * (f(a) + f(b)))
    }

    #[test]
    fn zero_outside_support() {
        let spec = WaveletSpec::default();
        for x in [-3.0, -1e-9, 0.0, 7.0, 7.5, 100.0] {
            assert_eq!(spec.scaling(x), 0.0);
            assert_eq!(spec.wavelet(x), 0.0);
        }
    }

    #[test]
    fn scaling_integrates_to_one() {
        for order in 3..=6 {
            let spec = WaveletSpec::new(order, 12).unwrap();
            let len = spec.support_len();
            let steps = (len as usize) << 12;
            let integral = trapezoid(|x| spec.scaling(x), 0.0, len, steps);
            assert!((integral - 1.0).abs() < 1e-4, "order {order}: {integral}");
        }
    }

    #[test]
    fn partition_of_unity() {
        let spec = WaveletSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x: f64 = rng.random_range(-5.0..5.0);
            let s: f64 = (-20..=20).map(|k| spec.scaling(x - k as f64)).sum();
            assert!((s - 1.0).abs() < 1e-3, "x={x}: {s}");
        }
    }

    #[test]
    fn wavelet_has_zero_mean_and_unit_norm() {
        let spec = WaveletSpec::default();
        let len = spec.support_len();
        let steps = (len as usize) << 12;
        let mean = trapezoid(|x| spec.wavelet(x), 0.0, len, steps);
        let norm = trapezoid(|x| spec.wavelet(x).powi(2), 0.0, len, steps);
        let phi_norm = trapezoid(|x| spec.scaling(x).powi(2), 0.0, len, steps);
        assert!(mean.abs() < 1e-4);
        assert!((norm - 1.0).abs() < 1e-3, "{norm}");
        assert!((phi_norm - 1.0).abs() < 1e-3, "{phi_norm}");
    }

    #[test]
    fn l_constant_is_at_least_one() {
        for order in 3..=10 {
            let spec = WaveletSpec::new(order, 10).unwrap();
            assert!(spec.l_const() >= 1.0, "order {order}");
        }
    }

    #[test]
    fn rejects_low_order() {
        assert!(matches!(WaveletSpec::new(2, 12), Err(Error::Domain(_))));
        assert!(matches!(WaveletSpec::new(1, 12), Err(Error::Domain(_))));
    }

    #[test]
    fn pair_matches_individual_lookups() {
        let spec = WaveletSpec::new(3, 10).unwrap();
        for i in 0..500 {
            let x = -0.5 + i as f64 * 0.0131;
            let (p, q) = spec.eval_pair(x);
            assert_eq!(p, spec.scaling(x));
            assert_eq!(q, spec.wavelet(x));
        }
    }
}
