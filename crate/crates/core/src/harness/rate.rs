//! Log-log slope of median excess risk against `n`.

use crate::error::{domain, Result};

use super::experiment::ExperimentRow;

/// Values below this are floored before taking logs.
pub const EXCESS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// `(n, median excess)` in increasing `n`.
    pub medians: Vec<(usize, f64)>,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Least-squares fit of `log median excess = intercept + slope·log n`.
pub fn fit_rate(rows: &[ExperimentRow]) -> Result<RateFit> {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let mut medians = Vec::with_capacity(ns.len());
    for n in ns {
        let mut vals: Vec<f64> = rows
            .iter()
            .filter(|r| r.n == n)
            .map(|r| {
                if r.excess_risk < EXCESS_FLOOR {
                    log::warn!("excess risk {} at n={} seed={} floored at {EXCESS_FLOOR}", r.excess_risk, r.n, r.seed);
                    EXCESS_FLOOR
                } else {
                    r.excess_risk
                }
            })
            .collect();
        if vals.len() >= 3 {
            medians.push((n, median(&mut vals)));
        }
    }
    if medians.len() < 3 {
        return domain("rate fit needs at least 3 distinct n with at least 3 seeds each");
    }
    let pts: Vec<(f64, f64)> = medians.iter().map(|(n, m)| ((*n as f64).ln(), m.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
        medians,
    })
}
