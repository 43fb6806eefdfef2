//! Empirical martingale checks against deterministic `t = 0` targets.

use crate::error::Result;
use crate::indices::{forward_index_spread, forward_index_value, initial_index_forward};
use crate::measures::{expectation, MeasureId};
use crate::model::{MarketModel, BASE};

use super::{PathView, SimResult};

/// A process that must be a martingale under the stated measure.
#[derive(Debug, Clone, PartialEq)]
pub enum Check {
    /// `B^{k0,k3}(t,T) / B^{c,k0,k3}_t` under `Q^{k0}`; `k3 = k0` gives the domestic bond.
    DiscountedBond { collateral: usize, maturity: f64 },
    /// `Q^{k0,k}(t,T) / Q^{k0,k}_t` under `Q^{T,k0,k0}`.
    SpreadBond { currency: usize, maturity: f64 },
    /// `X^{k0,k}_t B^k_t / B^{k0}_t` under `Q^{k0}`.
    Fx { currency: usize },
    /// `B^{k,k}(t,T) / B^{c,k}_t` under `Q^k`, reached from the simulation measure by reweighting.
    ForeignBond { currency: usize, maturity: f64 },
    /// Forward index spread under `Q^{T - delta^f, k0, k3}`, from `delta^f` on.
    IndexSpread { family: usize, fixing: f64 },
    /// Forward index under `Q^{T + delta^p, k0, k3}`, from `delta^f` on.
    IndexForward { family: usize, fixing: f64 },
}

impl Check {
    pub fn name(&self, res: &SimResult) -> String {
        let cur = |k: usize| res.model().currencies[k].name.clone();
        let fam = |k: usize| res.model().spreads[k].name.clone();
        match self {
            Check::DiscountedBond { collateral, maturity } => format!("bond[{}|{}]({maturity})", cur(BASE), cur(*collateral)),
            Check::SpreadBond { currency, maturity } => format!("spread_bond[{}]({maturity})", cur(*currency)),
            Check::Fx { currency } => format!("fx[{}]", cur(*currency)),
            Check::ForeignBond { currency, maturity } => format!("bond[{}|{}]({maturity})", cur(*currency), cur(*currency)),
            Check::IndexSpread { family, fixing } => format!("index_spread[{}]({fixing})", fam(*family)),
            Check::IndexForward { family, fixing } => format!("index_forward[{}]({fixing})", fam(*family)),
        }
    }

    /// Times whose state the check reads beyond the observation times it is
    /// reported at: the period start and the fixing date of an index.
    /// Simulations feeding [`martingale_report`] must observe them whenever
    /// they fall inside the horizon.
    pub fn required_times(&self, model: &MarketModel) -> Vec<f64> {
        match self {
            Check::IndexSpread { family, fixing } | Check::IndexForward { family, fixing } => {
                model.spreads.get(*family).map_or_else(Vec::new, |f| vec![fixing - f.fix_adj, *fixing])
            }
            _ => Vec::new(),
        }
    }

    /// First and last observation time at which the check applies.
    fn window(&self, res: &SimResult) -> (f64, f64) {
        let h = res.grid().horizon();
        match self {
            Check::DiscountedBond { maturity, .. } | Check::SpreadBond { maturity, .. } | Check::ForeignBond { maturity, .. } => {
                (0.0, *maturity)
            }
            Check::Fx { .. } => (0.0, h),
            Check::IndexSpread { family, fixing } | Check::IndexForward { family, fixing } => {
                let f = &res.model().spreads[*family];
                (f.fix_adj, (fixing + f.pay_adj).min(h))
            }
        }
    }

    fn measure(&self, res: &SimResult) -> MeasureId {
        match self {
            Check::DiscountedBond { .. } | Check::Fx { .. } => MeasureId::Spot(BASE),
            Check::ForeignBond { currency, .. } => MeasureId::Spot(*currency),
            Check::SpreadBond { maturity, .. } => MeasureId::Forward { maturity: *maturity, base: BASE, collateral: BASE },
            Check::IndexSpread { family, fixing } => {
                let f = &res.model().spreads[*family];
                MeasureId::Forward { maturity: fixing - f.fix_adj, base: BASE, collateral: f.collateral }
            }
            Check::IndexForward { family, fixing } => {
                let f = &res.model().spreads[*family];
                MeasureId::Forward { maturity: fixing + f.pay_adj, base: BASE, collateral: f.collateral }
            }
        }
    }

    /// Deterministic starting value of the martingale.
    fn target(&self, res: &SimResult, start: f64) -> Result<f64> {
        match *self {
            Check::IndexForward { family, fixing } => initial_index_forward(&res.initial(), family, fixing),
            _ => self.value(&res.initial(), start),
        }
    }

    fn value(&self, p: &PathView<'_>, t: f64) -> Result<f64> {
        match *self {
            Check::DiscountedBond { collateral, maturity } => Ok(p.bond(BASE, collateral, t, maturity)? / p.coll_account(BASE, collateral, t)?),
            Check::SpreadBond { currency, maturity } => Ok(p.spread_bond(currency, t, maturity)? / p.basis_account(currency, t)?),
            Check::Fx { currency } => {
                Ok(p.fx(BASE, currency, t)? * p.unsecured_account(currency, t)? / p.unsecured_account(BASE, t)?)
            }
            Check::ForeignBond { currency, maturity } => {
                Ok(p.bond(currency, currency, t, maturity)? / p.coll_account(currency, currency, t)?)
            }
            Check::IndexSpread { family, fixing } => forward_index_spread(p, family, fixing, t),
            Check::IndexForward { family, fixing } => forward_index_value(p, family, fixing, t),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: String,
    pub t: f64,
    pub target: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
}

/// One row per check and observation time inside the check's window.
pub fn martingale_report(res: &SimResult, checks: &[Check]) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    let times = res.observation_times();
    for c in checks {
        let (lo, hi) = c.window(res);
        let target = c.target(res, lo)?;
        let measure = c.measure(res);
        for &t in times.iter().filter(|t| **t >= lo - 1e-12 && **t <= hi + 1e-12) {
            let est = expectation(res, &measure, t, |p| c.value(p, t))?;
            rows.push(CheckRow {
                name: c.name(res),
                t,
                target,
                estimate: est.value,
                std_error: est.std_error,
                z: est.z_score(target),
            });
        }
    }
    Ok(rows)
}
