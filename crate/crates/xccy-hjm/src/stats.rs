//! Order-independent reductions and Monte Carlo estimators.

use crate::error::{Error, Result};

const LEAF: usize = 32;

/// Pairwise (cascade) summation. The result depends only on the order of
/// `xs`, never on how the work was scheduled.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, std_error: 0.0 }
    }

    /// Standardized deviation from `target`. A standard error at rounding
    /// level counts as zero; then the score is zero when the estimate equals
    /// the target to rounding and infinite otherwise.
    pub fn z_score(&self, target: f64) -> f64 {
        let diff = self.value - target;
        let scale = target.abs().max(self.value.abs()).max(1e-300);
        if self.std_error > 1e-12 * scale {
            return diff / self.std_error;
        }
        if diff.abs() <= 1e-12 * scale {
            0.0
        } else if diff > 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Sums consecutive blocks of `group` entries; used to fold antithetic
/// pairs into independent units before estimating errors.
pub fn fold_groups(xs: &[f64], group: usize) -> Vec<f64> {
    if group <= 1 {
        return xs.to_vec();
    }
    xs.chunks(group).map(|c| c.iter().sum()).collect()
}

/// Sample mean with the usual standard error.
pub fn mean_estimate(xs: &[f64]) -> Estimate {
    let n = xs.len();
    if n == 0 {
        return Estimate { value: f64::NAN, std_error: f64::NAN };
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n < 2 {
        return Estimate { value: mean, std_error: 0.0 };
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    Estimate { value: mean, std_error: (var / n as f64).sqrt() }
}

/// Ratio estimator `sum(u) / sum(s)` with a delta-method standard error.
pub fn ratio_estimate(u: &[f64], s: &[f64]) -> Result<Estimate> {
    assert_eq!(u.len(), s.len(), "ratio estimator needs matching lengths");
    let n = u.len();
    let su = pairwise_sum(u);
    let ss = pairwise_sum(s);
    if ss == 0.0 || !ss.is_finite() {
        return Err(Error::ZeroTotalWeight);
    }
    let r = su / ss;
    if n < 2 {
        return Ok(Estimate { value: r, std_error: 0.0 });
    }
    let dev: Vec<f64> = u
        .iter()
        .zip(s)
        .map(|(a, b)| {
            let e = a - r * b;
            e * e
        })
        .collect();
    let se = (pairwise_sum(&dev) * n as f64 / (n - 1) as f64).sqrt() / ss.abs();
    Ok(Estimate { value: r, std_error: se })
}
