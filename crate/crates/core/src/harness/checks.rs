//! The verification suite behind the `check` subcommand.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;

use crate::error::Result;
use crate::model::ActiveIndexSet;
use crate::prior::{g_constant, sample_coeff_ball, structural_mass, PriorSpec};
use crate::sampler::{chain_rng, ChainRng};
use crate::theory::{
    coeff_ball_mass_mc, dv_identity_check, kl_coeff_ball, kl_structure_t1, sphere_cap_bound, sphere_cap_mass,
    FiniteMeasure,
};
use crate::wavelet::{cardinality, CoefficientVector, WaveletDictionary, WaveletIndex, WaveletSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub check: &'static str,
    pub case: String,
    pub value: f64,
    pub reference: f64,
    pub passed: bool,
    pub note: String,
}

impl CheckRow {
    fn new(check: &'static str, case: String, value: f64, reference: f64, passed: bool) -> Self {
        Self {
            check,
            case,
            value,
            reference,
            passed,
            note: String::new(),
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

/// Gibbs attainment on random finite spaces; `value` is the worst gap or excess.
pub fn check_donsker_varadhan(instances: usize, competitors: usize, rng: &mut ChainRng) -> Result<Vec<CheckRow>> {
    let mut worst_gap = 0.0f64;
    let mut worst_excess = f64::NEG_INFINITY;
    for _ in 0..instances {
        let len = rng.random_range(2..=8);
        let mu = FiniteMeasure::random(len, 1.0, rng)?;
        let h: Vec<f64> = (0..len).map(|_| rng.random_range(-5.0..5.0)).collect();
        let c = dv_identity_check(&mu, &h, competitors, rng)?;
        worst_gap = worst_gap.max(c.gap);
        worst_excess = worst_excess.max(c.competitor_excess);
    }
    Ok(vec![
        CheckRow::new("donsker_varadhan", format!("gibbs_gap_{instances}_instances"), worst_gap, 1e-10, worst_gap <= 1e-10),
        CheckRow::new(
            "donsker_varadhan",
            format!("competitors_{competitors}_per_instance"),
            worst_excess,
            1e-6,
            worst_excess <= 1e-6,
        ),
    ])
}

/// `k log((C+1)/γ)` against `−log` of the sampled ball-mass ratio.
pub fn check_coeff_ball(draws: usize, rng: &mut ChainRng) -> Result<Vec<CheckRow>> {
    let (c, gamma) = (1.0, 1.0);
    let mut rows = vec![];
    for k in 1..=3 {
        let analytic = kl_coeff_ball(gamma, c, k)?;
        let mc = coeff_ball_mass_mc(gamma, c, k, draws, rng)?;
        let measured = -mc.estimate.ln();
        let tol = 3.0 * mc.std_error / mc.estimate;
        rows.push(
            CheckRow::new("coeff_ball_kl", format!("k={k}"), measured, analytic, (measured - analytic).abs() <= tol)
                .with_note(format!("tolerance {tol:.3e} (3 MC standard errors)")),
        );
    }
    Ok(rows)
}

/// Cap masses against `(η/(3√2))^m`, plus the closed form at `m = 2, η = 1`.
pub fn check_sphere_caps(draws: usize, rng: &mut ChainRng) -> Result<Vec<CheckRow>> {
    let mut rows = vec![];
    for m in [1, 2, 3, 5] {
        for eta in [0.25, 0.5, 1.0] {
            let mc = sphere_cap_mass(m, eta, draws, rng)?;
            let bound = sphere_cap_bound(m, eta);
            let lower = mc.estimate - 3.0 * mc.std_error;
            rows.push(CheckRow::new("sphere_cap", format!("m={m},eta={eta}"), lower, bound, lower >= bound));
            if m == 2 && eta == 1.0 {
                let exact = 1.0 / 3.0;
                rows.push(CheckRow::new(
                    "sphere_cap_exact",
                    "m=2,eta=1".into(),
                    mc.estimate,
                    exact,
                    (mc.estimate - exact).abs() <= 3.0 * mc.std_error,
                ));
            }
        }
    }
    Ok(rows)
}

/// Every `I ∈ ℐ_d` over `p` coordinates.
pub fn all_index_sets(d: usize, p: usize) -> Vec<ActiveIndexSet> {
    let subsets: Vec<Vec<usize>> = (1u64..(1 << p))
        .map(|m| (0..p).filter(|j| m >> j & 1 == 1).collect())
        .collect();
    let mut out: Vec<Vec<Vec<usize>>> = vec![vec![]];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                subsets.iter().map(move |s| {
                    let mut v = prefix.clone();
                    v.push(s.clone());
                    v
                })
            })
            .collect();
    }
    out.into_iter().map(|rows| ActiveIndexSet { rows }).collect()
}

/// Total prior mass over all structures for `p = 2, n = 1`, and `log G ≤ T₁` on `p = 3, n = 2`.
pub fn check_structural_mass() -> Result<Vec<CheckRow>> {
    let wavelet = Arc::new(WaveletSpec::default());
    let small = PriorSpec::new(2, 1, 1.0, 2, wavelet.clone())?;
    let mut total = 0.0;
    let mut worst_identity = 0.0f64;
    for d in 1..=2 {
        for set in all_index_sets(d, 2) {
            for m in 0..=1 {
                let mass = structural_mass(&small, &set, m)?;
                let g = g_constant(&small, &set, m)?;
                worst_identity = worst_identity.max((g * mass.exp() - 1.0).abs());
                total += mass.exp();
            }
        }
    }
    let mut rows = vec![
        CheckRow::new("structural_mass", "total_p2_n1".into(), total, 1.0, (total - 1.0).abs() <= 1e-10)
            .with_note("G uses 1/729 = 1/9^3 from C_pi*C_mu*C_nu; the printed 1/721 would give total 729/721"),
        CheckRow::new("structural_mass", "G_times_mass_p2_n1".into(), worst_identity, 1e-10, worst_identity <= 1e-10),
        CheckRow::new("structural_mass", "total_with_721".into(), total * 729.0 / 721.0, 1.0, true)
            .with_note("documented discrepancy: not a failure"),
    ];
    let grid = PriorSpec::new(3, 2, 1.0, 2, wavelet)?;
    let mut worst = f64::NEG_INFINITY;
    let mut cases = 0;
    for d in 1..=3 {
        for set in all_index_sets(d, 3) {
            for m in 0..=2 {
                let g = g_constant(&grid, &set, m)?;
                worst = worst.max(g.ln() - kl_structure_t1(set.size(), m, 3));
                cases += 1;
            }
        }
    }
    rows.push(
        CheckRow::new("log_g_le_t1", format!("p3_n2_{cases}_structures"), worst, 0.0, worst <= 0.0)
            .with_note("value is max(log G - T1)"),
    );
    Ok(rows)
}

/// `|𝒵^d_{M,N}| ≤ 4^d N^d 2^{dM+1}`.
pub fn check_cardinality() -> Vec<CheckRow> {
    let bound = |d: u32, m: u32, n: u32| 4u128.pow(d) * (n as u128).pow(d) * 2u128.pow(d * m + 1);
    let mut rows = vec![];
    for d in 1..=3u32 {
        for m in 1..=5u32 {
            for n in [2u32, 3] {
                let k = cardinality(d as usize, m, n).expect("small dictionary");
                let b = bound(d, m, n);
                rows.push(CheckRow::new("cardinality", format!("d={d},M={m},N={n}"), k as f64, b as f64, k <= b));
            }
        }
    }
    let k = cardinality(2, 0, 1).expect("small dictionary");
    rows.push(
        CheckRow::new("cardinality", "d=2,M=0,N=1".into(), k as f64, bound(2, 0, 1) as f64, true)
            .with_note("documented exception: 36 > 32 at N = 1; the bound needs N large"),
    );
    rows
}

fn random_coefficients(dict: &Arc<WaveletDictionary>, sparse: bool, rng: &mut ChainRng) -> Result<CoefficientVector> {
    if !sparse {
        let radius = rng.random_range(0.1..3.0);
        return sample_coeff_ball(dict.clone(), radius, rng);
    }
    let mut beta = vec![0.0; dict.len()];
    for _ in 0..3 {
        let at = rng.random_range(0..dict.len());
        beta[at] = rng.random_range(-1.0..1.0);
    }
    CoefficientVector::new(dict.clone(), beta)
}

/// Grid sup `|Φ(β)| ≤ ‖β‖_ℬ` and finite-difference partials `≤ ‖β‖_ℬ + 10⁻²`.
pub fn check_norm_inequalities(vectors: usize, rng: &mut ChainRng) -> Result<Vec<CheckRow>> {
    let spec = Arc::new(WaveletSpec::default());
    let dicts = [
        Arc::new(WaveletDictionary::new(spec.clone(), 1, 1, 2)?),
        Arc::new(WaveletDictionary::new(spec.clone(), 2, 0, 2)?),
    ];
    let mut worst_sup = f64::NEG_INFINITY;
    let mut worst_grad = f64::NEG_INFINITY;
    let h = 1e-3;
    for v in 0..vectors {
        let dict = &dicts[v % 2];
        let d = dict.dim();
        let coeffs = random_coefficients(dict, v % 4 >= 2, rng)?;
        let norm = coeffs.besov_norm();
        let (lo, hi) = (-(dict.radius() as f64) - 1.0, dict.radius() as f64 + spec.support_len() + 1.0);
        let per_axis: usize = if d == 1 { 1000 } else { 32 };
        let mut point = vec![0.0; d];
        let mut sup = 0.0f64;
        for cell in 0..per_axis.pow(d as u32) {
            let mut c = cell;
            for x in point.iter_mut() {
                *x = lo + (hi - lo) * (c % per_axis) as f64 / (per_axis - 1) as f64;
                c /= per_axis;
            }
            sup = sup.max(coeffs.eval_link(&point)?.abs());
        }
        worst_sup = worst_sup.max(sup - norm);
        for _ in 0..100 {
            for x in point.iter_mut() {
                *x = rng.random_range(lo..hi);
            }
            for i in 0..d {
                let mut up = point.clone();
                up[i] += h;
                let mut down = point.clone();
                down[i] -= h;
                let slope = (coeffs.eval_link(&up)? - coeffs.eval_link(&down)?) / (2.0 * h);
                worst_grad = worst_grad.max(slope.abs() - norm);
            }
        }
    }
    Ok(vec![
        CheckRow::new("norm_sup", format!("{vectors}_vectors"), worst_sup, 0.0, worst_sup <= 0.0)
            .with_note("value is max(grid sup |f| - ||beta||_B)"),
        CheckRow::new("norm_gradient", format!("{vectors}_vectors"), worst_grad, 1e-2, worst_grad <= 1e-2)
            .with_note("value is max(|partial f| - ||beta||_B)"),
    ])
}

/// Scaling and detail one-hot checks of the tensor basis formula in one dimension.
fn check_basis_formula() -> Result<Vec<CheckRow>> {
    let spec = Arc::new(WaveletSpec::default());
    let dict = WaveletDictionary::new(spec.clone(), 1, 1, 1)?;
    let mut worst = 0.0f64;
    for k in 0..200 {
        let x = -1.0 + 10.0 * k as f64 / 199.0;
        worst = worst.max((dict.eval_basis(&WaveletIndex::scaling(vec![0]), &[x])? - spec.scaling(x)).abs());
        let want = 2f64.sqrt() * spec.wavelet(2.0 * x);
        worst = worst.max((dict.eval_basis(&WaveletIndex::detail(1, vec![0], 1), &[x])? - want).abs());
    }
    Ok(vec![CheckRow::new("basis_formula", "d=1".into(), worst, 1e-15, worst <= 1e-15)])
}

/// The whole suite, as run by `check`.
pub fn run_checks(seed: u64) -> Result<Vec<CheckRow>> {
    let mut rows = vec![];
    rows.extend(check_donsker_varadhan(100, 10_000, &mut chain_rng(seed, 1))?);
    rows.extend(check_coeff_ball(1_000_000, &mut chain_rng(seed, 2))?);
    rows.extend(check_sphere_caps(1_000_000, &mut chain_rng(seed, 3))?);
    rows.extend(check_structural_mass()?);
    rows.extend(check_cardinality());
    rows.extend(check_norm_inequalities(200, &mut chain_rng(seed, 4))?);
    rows.extend(check_basis_formula()?);
    Ok(rows)
}

pub fn write_checks_csv<W: Write>(rows: &[CheckRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["check", "case", "value", "reference", "passed", "note"])?;
    for r in rows {
        w.write_record([
            r.check.to_string(),
            r.case.clone(),
            format!("{:e}", r.value),
            format!("{:e}", r.reference),
            r.passed.to_string(),
            r.note.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
