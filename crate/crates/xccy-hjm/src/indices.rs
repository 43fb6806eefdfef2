//! Abstract index forwards, simple forward collateral rates and the
//! multiplicative spread model.
//!
//! Indices are denominated in the base currency `k0`. Collateral-rate
//! functionals take the currency `l` and collateral `k3` explicitly so they
//! can also serve foreign swap legs.

use crate::engine::{PathView, SimResult};
use crate::error::{Error, Result};
use crate::measures::{expectation, MeasureId};
use crate::model::{AffineTerm, SurfaceId, BASE};
use crate::stats::Estimate;

/// Period `[T - delta^f, T + delta^p]` with fixing at `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexSchedule {
    pub fixing: f64,
    pub fix_adj: f64,
    pub pay_adj: f64,
}

impl IndexSchedule {
    pub fn new(fixing: f64, fix_adj: f64, pay_adj: f64) -> Result<Self> {
        if !(fix_adj >= 0.0 && pay_adj >= 0.0) {
            return Err(Error::InvalidSpec("fixing and payment adjustments must be nonnegative".into()));
        }
        if fixing < fix_adj - 1e-12 {
            return Err(Error::InvalidSpec(format!("fixing {fixing} precedes the adjustment {fix_adj}")));
        }
        Ok(IndexSchedule { fixing, fix_adj, pay_adj })
    }

    pub fn start(&self) -> f64 {
        self.fixing - self.fix_adj
    }

    pub fn payment(&self) -> f64 {
        self.fixing + self.pay_adj
    }

    pub fn delta(&self) -> f64 {
        self.fix_adj + self.pay_adj
    }

    /// Dates at which path states are needed to evaluate the index.
    pub fn observation_times(&self) -> Vec<f64> {
        vec![self.fix_adj, self.start(), self.fixing, self.payment()]
    }

    fn check(&self, t: f64) -> Result<()> {
        if t < self.fix_adj - 1e-12 {
            return Err(Error::BeforePeriodStart { t, start: self.fix_adj });
        }
        Ok(())
    }
}

fn collateral_terms(view: &PathView<'_>, k3: usize, windows: &[(f64, f64)]) -> Vec<AffineTerm> {
    let mut out = Vec::new();
    for &(from, to) in windows {
        out.extend(view.bond_terms(BASE, k3, from, to));
    }
    out
}

/// Simple forward collateral rate `I^{k0,k3,D}_t(T - delta^f, T, T + delta^p)`.
///
/// The early and middle regimes discount over `[t, T - delta^f] u [T, T + delta^p]`
/// under `Q^{k0}`; the expectation is exponential-affine and evaluated in
/// closed form. The divisor is `delta^f` in every regime.
pub fn simple_forward_collateral_rate(view: &PathView<'_>, sched: &IndexSchedule, k3: usize, t: f64) -> Result<f64> {
    sched.check(t)?;
    let (ts, tf, tp) = (sched.start(), sched.fixing, sched.payment());
    let df = sched.fix_adj;
    if t > tf {
        return Ok((view.coll_account(BASE, k3, tf)? / view.coll_account(BASE, k3, ts)? - 1.0) / df);
    }
    let bp = view.bond(BASE, k3, t, tp)?;
    let gap = if t <= ts {
        let mut terms = collateral_terms(view, k3, &[(t, ts), (tf, tp)]);
        terms.retain(|x| x.to > x.from);
        view.affine_price(&terms, BASE, t)?
    } else {
        let mut terms = collateral_terms(view, k3, &[(tf, tp)]);
        terms.retain(|x| x.to > x.from);
        view.coll_account(BASE, k3, t)? / view.coll_account(BASE, k3, ts)? * view.affine_price(&terms, BASE, t)?
    };
    Ok((gap / bp - 1.0) / df)
}

/// Discount-curve index with fixing at payment, `I^{k0,k3,D}_t(T - delta^f, T + delta^p, T + delta^p)`.
pub fn discount_index(view: &PathView<'_>, sched: &IndexSchedule, k3: usize, t: f64) -> Result<f64> {
    sched.check(t)?;
    let (ts, tp, d) = (sched.start(), sched.payment(), sched.delta());
    if t <= ts {
        Ok((view.bond(BASE, k3, t, ts)? / view.bond(BASE, k3, t, tp)? - 1.0) / d)
    } else if t <= tp {
        Ok((view.coll_account(BASE, k3, t)? / (view.coll_account(BASE, k3, ts)? * view.bond(BASE, k3, t, tp)?) - 1.0) / d)
    } else {
        Ok((view.coll_account(BASE, k3, tp)? / view.coll_account(BASE, k3, ts)? - 1.0) / d)
    }
}

fn family_schedule(view: &PathView<'_>, family: usize, fixing: f64) -> Result<(IndexSchedule, usize)> {
    let fam = view
        .result()
        .model()
        .spreads
        .get(family)
        .ok_or_else(|| Error::InvalidSpec(format!("unknown spread family {family}")))?;
    Ok((IndexSchedule::new(fixing, fam.fix_adj, fam.pay_adj)?, fam.collateral))
}

/// Forward index spread from the spread surface alone,
/// `exp(-int_{delta^f}^t h_s ds - int_t^{T+delta^p} h_t(u) du)`, for `t <= T`.
pub fn spread_from_surface(view: &PathView<'_>, family: usize, fixing: f64, t: f64) -> Result<f64> {
    let (sched, _) = family_schedule(view, family, fixing)?;
    sched.check(t)?;
    if t > sched.fixing + 1e-12 {
        return Err(Error::InvalidSpec("the spread surface represents the spread only up to fixing".into()));
    }
    let s = SurfaceId::Spread(family);
    Ok((-view.log_account(s, t)? - view.integral(s, t, sched.payment())?).exp())
}

/// Forward index spread `S^{k0,k3}_t(T - delta^f, T, T + delta^p)`.
///
/// Up to fixing it is read from the spread surface; afterwards it is
/// `C B^{k0,k3}(t, T + delta^p) / B^{c,k0,k3}_t` with `C` locked at `T`,
/// and frozen after payment.
pub fn forward_index_spread(view: &PathView<'_>, family: usize, fixing: f64, t: f64) -> Result<f64> {
    let (sched, k3) = family_schedule(view, family, fixing)?;
    sched.check(t)?;
    let (tf, tp) = (sched.fixing, sched.payment());
    if t <= tf {
        return spread_from_surface(view, family, fixing, t);
    }
    let locked = spread_from_surface(view, family, fixing, tf)? * view.coll_account(BASE, k3, tf)? / view.bond(BASE, k3, tf, tp)?;
    let u = t.min(tp);
    Ok(locked * view.bond(BASE, k3, u, tp)? / view.coll_account(BASE, k3, u)?)
}

/// Forward index `I_t = (S_t (1 + delta I^D_t) - 1) / delta`. A schedule
/// with `delta = 0` is observed and paid at once, so the index is the
/// collateral forward rate `f^{c,k0,k3}_t(T)`, fixed at `T`.
pub fn forward_index_value(view: &PathView<'_>, family: usize, fixing: f64, t: f64) -> Result<f64> {
    let (sched, k3) = family_schedule(view, family, fixing)?;
    sched.check(t)?;
    let d = sched.delta();
    if d == 0.0 {
        let u = t.min(fixing);
        let mut f = 0.0;
        for (s, w) in view.result().model().collateral_combo(BASE, k3) {
            f += w * view.forward(s, u, fixing)?;
        }
        return Ok(f);
    }
    let u = t.min(sched.payment());
    let s = forward_index_spread(view, family, fixing, u)?;
    let id = discount_index(view, &sched, k3, u)?;
    Ok((s * (1.0 + d * id) - 1.0) / d)
}

/// `E^{Q^{T+delta^p,k0,k3}}[I_t]` for `t >= delta^f`: the spread is
/// deterministic at `delta^f` and `B(t, T - delta^f) / B(t, T + delta^p)` is a
/// martingale under the payment forward measure, so this is the
/// `delta^f`-spread combined with the time-0 discount index.
pub fn initial_index_forward(view: &PathView<'_>, family: usize, fixing: f64) -> Result<f64> {
    let (sched, k3) = family_schedule(view, family, fixing)?;
    let d = sched.delta();
    if d == 0.0 {
        return forward_index_value(view, family, fixing, 0.0);
    }
    let s = spread_from_surface(view, family, fixing, sched.fix_adj)?;
    let ratio = view.bond(BASE, k3, 0.0, sched.start())? / view.bond(BASE, k3, 0.0, sched.payment())?;
    Ok((s * ratio - 1.0) / d)
}

/// Rate examples built from the collateral account `B^{c,l,k3}` and bonds
/// `B^{l,k3}` over `[T_{m-1}, T_m]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateExample {
    /// `R(T_{m-1}, T_m)`, fixed at `T_m`.
    BackwardLooking,
    /// `F(T_{m-1}, T_m)`, fixed at `T_{m-1}`.
    ForwardLooking,
    /// `R_m(t)`.
    BackwardInArrearsForward,
    /// `F_m(t)`.
    ForwardLookingForward,
}

/// Evaluates one of the collateral-rate examples at `t`.
pub fn spot_rate_example(
    view: &PathView<'_>,
    kind: RateExample,
    l: usize,
    k3: usize,
    start: f64,
    end: f64,
    t: f64,
) -> Result<f64> {
    let g = view.result().grid();
    for x in [start, end, t] {
        g.index_of(x)?;
    }
    let d = end - start;
    if d <= 0.0 {
        return Err(Error::InvalidSpec("empty accrual period".into()));
    }
    let acc = |s: f64| view.coll_account(l, k3, s);
    let fwd = |s: f64| -> Result<f64> { Ok((view.bond(l, k3, s, start)? / view.bond(l, k3, s, end)? - 1.0) / d) };
    match kind {
        RateExample::BackwardLooking => Ok((acc(end)? / acc(start)? - 1.0) / d),
        RateExample::ForwardLooking => Ok((1.0 / view.bond(l, k3, start, end)? - 1.0) / d),
        RateExample::BackwardInArrearsForward => {
            if t <= start {
                fwd(t)
            } else if t <= end {
                Ok((acc(t)? / (acc(start)? * view.bond(l, k3, t, end)?) - 1.0) / d)
            } else {
                Ok((acc(end)? / acc(start)? - 1.0) / d)
            }
        }
        RateExample::ForwardLookingForward => fwd(t.min(start)),
    }
}

/// Forward `E^{Q^{Tp,k0,k3}}[I | G_0]` of a spot index paid at `payment`,
/// estimated by reweighting the simulated paths. Covers IBOR and commodity
/// forwards, whose spot index is a functional of the path.
pub fn forward_by_mc<F>(result: &SimResult, payment: f64, k3: usize, index: F) -> Result<Estimate>
where
    F: Fn(&PathView<'_>) -> Result<f64> + Sync,
{
    let target = MeasureId::Forward { maturity: payment, base: BASE, collateral: k3 };
    expectation(result, &target, payment, index)
}

/// IBOR forward: the spot IBOR is the family's index fixed at the period
/// start (`delta^f = 0`), paid at `T + delta^p`.
pub fn ibor_forward(result: &SimResult, family: usize, fixing: f64) -> Result<Estimate> {
    let fam = &result.model().spreads[family];
    if fam.fix_adj != 0.0 {
        return Err(Error::InvalidSpec("an IBOR family fixes at the period start".into()));
    }
    forward_by_mc(result, fixing + fam.pay_adj, fam.collateral, |p| forward_index_value(p, family, fixing, fixing))
}

/// Commodity forward with delivery over `[T1, T2]`: averages the supplied
/// spot observable over the grid points of the delivery period.
pub fn commodity_forward<F>(result: &SimResult, t1: f64, t2: f64, spot: F) -> Result<Estimate>
where
    F: Fn(&PathView<'_>, f64) -> Result<f64> + Sync,
{
    let g = result.grid();
    let (i1, i2) = (g.index_of(t1)?, g.index_of(t2)?);
    forward_by_mc(result, t2, BASE, |p| {
        if i1 == i2 {
            return spot(p, t1);
        }
        let mut acc = 0.0;
        for i in i1..i2 {
            acc += 0.5 * (spot(p, g.time(i))? + spot(p, g.time(i + 1))?) * g.dt();
        }
        Ok(acc / (t2 - t1))
    })
}

/// Integrated native drift of the spread family over `[t, T + delta^p]`.
pub fn spread_drift(result_model: &crate::model::MarketModel, family: usize, fixing: f64, t: f64) -> Result<f64> {
    let fam = &result_model.spreads[family];
    let sched = IndexSchedule::new(fixing, fam.fix_adj, fam.pay_adj)?;
    sched.check(t)?;
    let mut w = crate::model::ModelScratch::new(result_model.driver.dim());
    result_model.integrated_drift(SurfaceId::Spread(family), t, t, sched.payment(), &mut w)
}

/// Forward `E^{Q^{T+delta^p,k0,k3}}[I_T | G_t]` of a family index for any
/// `t`. Before `delta^f` the spread surface is frozen, so the spread is its
/// deterministic anchor value and only the discount ratio moves.
pub fn index_forward(view: &PathView<'_>, family: usize, fixing: f64, t: f64) -> Result<f64> {
    let (sched, k3) = family_schedule(view, family, fixing)?;
    if t >= sched.fix_adj - 1e-12 {
        return forward_index_value(view, family, fixing, t);
    }
    let s = spread_from_surface(&view.result().initial(), family, fixing, sched.fix_adj)?;
    let ratio = view.bond(BASE, k3, t, sched.start())? / view.bond(BASE, k3, t, sched.payment())?;
    Ok((s * ratio - 1.0) / sched.delta())
}
