//! Pricing measures and their density processes along simulated paths.

use crate::engine::{PathView, SimResult};
use crate::error::{Error, Result};
use crate::model::BASE;
use crate::stats::{fold_groups, ratio_estimate, Estimate};

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureId {
    /// Spot measure `Q^k` with the unsecured account `B^k` as numeraire.
    Spot(usize),
    /// Extended forward measure `Q^{T,k0,k3}`.
    Forward { maturity: f64, base: usize, collateral: usize },
    /// Extended unsecured forward measure `Q^{T,k0}`.
    UnsecuredForward { maturity: f64, base: usize },
}

impl MeasureId {
    /// Currency whose spot measure this measure is defined against.
    pub fn base(&self) -> usize {
        match self {
            MeasureId::Spot(k) => *k,
            MeasureId::Forward { base, .. } | MeasureId::UnsecuredForward { base, .. } => *base,
        }
    }

    /// Density against `Q^{k0}` where `k0 = self.base()`.
    fn against_spot(&self, view: &PathView<'_>, t: f64) -> Result<f64> {
        match *self {
            MeasureId::Spot(_) => Ok(1.0),
            MeasureId::Forward { maturity, base, collateral } => rn_forward(view, maturity, base, collateral, t),
            MeasureId::UnsecuredForward { maturity, base } => rn_unsecured_forward(view, maturity, base, t),
        }
    }

    /// Density against the base spot measure `Q^{k0}` with `k0 = 0`.
    fn against_base(&self, view: &PathView<'_>, t: f64) -> Result<f64> {
        let k = self.base();
        let spot = if k == BASE { 1.0 } else { rn_spot_foreign(view, BASE, k, t)? };
        Ok(spot * self.against_spot(view, t)?)
    }
}

/// `dQ^target/dQ^source` restricted to time `t`, evaluated on a path.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProcess {
    pub source: MeasureId,
    pub target: MeasureId,
}

impl DensityProcess {
    pub fn new(source: MeasureId, target: MeasureId) -> Self {
        DensityProcess { source, target }
    }

    pub fn value(&self, view: &PathView<'_>, t: f64) -> Result<f64> {
        if self.source == self.target {
            return Ok(1.0);
        }
        Ok(self.target.against_base(view, t)? / self.source.against_base(view, t)?)
    }
}

/// `dQ^{k2}/dQ^{k0}` at `t`: `(B^{k2}_t X^{k0,k2}_t / B^{k0}_t)` normalized to 1 at 0.
pub fn rn_spot_foreign(view: &PathView<'_>, k0: usize, k2: usize, t: f64) -> Result<f64> {
    if k0 == k2 {
        return Ok(1.0);
    }
    let ratio = |s: f64| -> Result<f64> {
        Ok(view.unsecured_account(k2, s)? * view.fx(k0, k2, s)? / view.unsecured_account(k0, s)?)
    };
    Ok(ratio(t)? / ratio(0.0)?)
}

/// `dQ^{T,k0,k3}/dQ^{k0}` at `t`, frozen after `T`.
pub fn rn_forward(view: &PathView<'_>, maturity: f64, k0: usize, k3: usize, t: f64) -> Result<f64> {
    let b0 = view.bond(k0, k3, 0.0, maturity)?;
    if t <= maturity {
        Ok(view.bond(k0, k3, t, maturity)? / (view.coll_account(k0, k3, t)? * b0))
    } else {
        Ok(1.0 / (view.coll_account(k0, k3, maturity)? * b0))
    }
}

/// `dQ^{T,k0}/dQ^{k0}` at `t`, frozen after `T`.
pub fn rn_unsecured_forward(view: &PathView<'_>, maturity: f64, k0: usize, t: f64) -> Result<f64> {
    let b0 = view.unsecured_bond(k0, 0.0, maturity)?;
    if t <= maturity {
        Ok(view.unsecured_bond(k0, t, maturity)? / (view.unsecured_account(k0, t)? * b0))
    } else {
        Ok(1.0 / (view.unsecured_account(k0, maturity)? * b0))
    }
}

/// Self-normalized estimate `sum w v / sum w` with its standard error.
pub fn expectation_under(samples: &[f64], density: &[f64]) -> Result<Estimate> {
    expectation_grouped(samples, density, 1)
}

/// As [`expectation_under`], combining consecutive `group` paths
/// (antithetic pairs) into one independent sample.
pub fn expectation_grouped(samples: &[f64], density: &[f64], group: usize) -> Result<Estimate> {
    if samples.len() != density.len() {
        return Err(Error::InvalidSpec("samples and densities differ in length".into()));
    }
    if density.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::InvalidSpec("densities must be positive".into()));
    }
    let u: Vec<f64> = samples.iter().zip(density).map(|(v, w)| v * w).collect();
    ratio_estimate(&fold_groups(&u, group), &fold_groups(density, group))
}

/// `E^{target}[f(path) | G_0]` where `f` is measurable at `t`.
pub fn expectation<F>(result: &SimResult, target: &MeasureId, t: f64, f: F) -> Result<Estimate>
where
    F: Fn(&PathView<'_>) -> Result<f64> + Sync,
{
    let density = DensityProcess::new(MeasureId::Spot(result.measure()), target.clone());
    let (v, w) = sample_pairs(result, |p| Ok((f(p)?, density.value(p, t)?)))?;
    expectation_grouped(&v, &w, result.group_size())
}

pub(crate) fn sample_pairs<F>(result: &SimResult, f: F) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(&PathView<'_>) -> Result<(f64, f64)> + Sync,
{
    use rayon::prelude::*;
    let pairs: Vec<(f64, f64)> = (0..result.paths()).into_par_iter().map(|p| f(&result.path(p))).collect::<Result<_>>()?;
    Ok(pairs.into_iter().unzip())
}
