//! Valuation of fully collateralized claims, zero-coupon bonds in every
//! currency/collateral combination, constant-notional and resetting
//! cross-currency swaps, fair spreads and benchmark fallbacks.
//!
//! Values are in the base currency `k0 = 0` unless stated otherwise. A
//! cashflow due exactly at the valuation time is still counted, as in the
//! swap leg formulas with indicator `1{t <= t_n}`.

use std::fmt;
use std::sync::Arc;

use crate::curves::InitialCurve;
use crate::engine::{PathView, SimResult};
use crate::error::{Error, Result};
use crate::indices::{forward_index_value, index_forward};
use crate::measures::{expectation, DensityProcess, MeasureId};
use crate::model::{AffineTerm, MarketModel, SurfaceId, BASE};
use crate::stats::{fold_groups, ratio_estimate, Estimate};

/// Amount functional evaluated on a path at the payment date.
pub type PathAmount = Arc<dyn Fn(&PathView<'_>) -> Result<f64> + Send + Sync>;

#[derive(Clone)]
pub enum Amount {
    Fixed(f64),
    Path(PathAmount),
}

impl fmt::Debug for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Amount::Fixed(x) => write!(f, "Fixed({x})"),
            Amount::Path(_) => write!(f, "Path(..)"),
        }
    }
}

/// One payment of `amount` units of `currency` at `time`.
#[derive(Debug, Clone)]
pub struct Cashflow {
    pub time: f64,
    pub currency: usize,
    pub amount: Amount,
}

/// Contractual cashflows of a claim collateralized in `collateral`.
#[derive(Debug, Clone)]
pub struct CashflowStream {
    pub flows: Vec<Cashflow>,
    pub collateral: usize,
    /// Collateral equals the mark-to-market at all times.
    pub fully_collateralized: bool,
}

impl CashflowStream {
    pub fn new(collateral: usize) -> Self {
        CashflowStream { flows: Vec::new(), collateral, fully_collateralized: true }
    }

    pub fn fixed(mut self, time: f64, currency: usize, amount: f64) -> Self {
        self.flows.push(Cashflow { time, currency, amount: Amount::Fixed(amount) });
        self
    }

    pub fn path<F>(mut self, time: f64, currency: usize, amount: F) -> Self
    where
        F: Fn(&PathView<'_>) -> Result<f64> + Send + Sync + 'static,
    {
        self.flows.push(Cashflow { time, currency, amount: Amount::Path(Arc::new(amount)) });
        self
    }

    pub fn extend(&mut self, other: CashflowStream) {
        self.flows.extend(other.flows);
    }

    fn check(&self, model: &MarketModel) -> Result<()> {
        if !self.fully_collateralized {
            return Err(Error::UncollateralizedUnsupported);
        }
        if self.collateral >= model.n_currencies() {
            return Err(Error::InvalidSpec(format!("unknown collateral currency {}", self.collateral)));
        }
        for c in &self.flows {
            if !(c.time >= 0.0) {
                return Err(Error::InvalidSpec(format!("cashflow time {} is negative", c.time)));
            }
            if c.currency >= model.n_currencies() {
                return Err(Error::InvalidSpec(format!("unknown cashflow currency {}", c.currency)));
            }
        }
        Ok(())
    }

    fn last_time(&self) -> f64 {
        self.flows.iter().map(|c| c.time).fold(0.0, f64::max)
    }
}

fn amount_on(view: &PathView<'_>, amount: &Amount) -> Result<f64> {
    match amount {
        Amount::Fixed(x) => Ok(*x),
        Amount::Path(f) => f(view),
    }
}

/// `sum X^{k0,k2}_tau A / B^{c,k0,k3}_tau` over flows due at or after `t`.
fn discounted_sum(view: &PathView<'_>, stream: &CashflowStream, t: f64) -> Result<f64> {
    let mut acc = 0.0;
    for c in stream.flows.iter().filter(|c| c.time >= t - 1e-12) {
        let a = amount_on(view, &c.amount)?;
        if a == 0.0 {
            continue;
        }
        acc += a * view.fx(BASE, c.currency, c.time)? / view.coll_account(BASE, stream.collateral, c.time)?;
    }
    Ok(acc)
}

/// Time-0 value `E^{Q^{k0}}[sum X^{k0,k2}_tau A_tau / B^{c,k0,k3}_tau]` of
/// a fully collateralized stream, estimated on the simulated paths.
pub fn price_full_collateral(result: &SimResult, stream: &CashflowStream) -> Result<Estimate> {
    stream.check(result.model())?;
    expectation(result, &MeasureId::Spot(BASE), stream.last_time(), |p| discounted_sum(p, stream, 0.0))
}

/// Closed-form value at `t` on one path of a stream with fixed amounts:
/// `sum A X^{k0,k2}_t B^{k2,k3}(t, tau)`.
pub fn full_collateral_closed(view: &PathView<'_>, stream: &CashflowStream, t: f64) -> Result<f64> {
    stream.check(view.result().model())?;
    let mut v = 0.0;
    for c in stream.flows.iter().filter(|c| c.time >= t - 1e-12) {
        let Amount::Fixed(a) = c.amount else {
            return Err(Error::InvalidSpec("closed form needs fixed amounts".into()));
        };
        v += a * view.fx(BASE, c.currency, t)? * view.bond(c.currency, stream.collateral, t, c.time.max(t))?;
    }
    Ok(v)
}

/// Zero-coupon bond cases, by cashflow and collateral currency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZcbCase {
    /// Domestic bond with domestic collateral (OIS bond).
    K0K0,
    /// Domestic bond collateralized in the given currency.
    K0K3(usize),
    /// Bond paying in the given currency, collateralized domestically.
    K2K0(usize),
    /// Bond paying in the given currency and collateralized in it.
    K2K2(usize),
    /// Uncollateralized domestic bond discounted at the unsecured rate.
    Unsecured,
}

impl ZcbCase {
    fn currencies(&self) -> Option<(usize, usize)> {
        match *self {
            ZcbCase::K0K0 => Some((BASE, BASE)),
            ZcbCase::K0K3(k3) => Some((BASE, k3)),
            ZcbCase::K2K0(k2) => Some((k2, BASE)),
            ZcbCase::K2K2(k2) => Some((k2, k2)),
            ZcbCase::Unsecured => None,
        }
    }
}

/// Closed-form bond value at `t` in base-currency units, from the surfaces
/// of the paying currency under its own spot measure.
pub fn price_zcb(view: &PathView<'_>, case: ZcbCase, t: f64, maturity: f64) -> Result<f64> {
    match case.currencies() {
        Some((k2, k3)) => Ok(view.fx(BASE, k2, t)? * view.bond(k2, k3, t, maturity)?),
        None => view.unsecured_bond(BASE, t, maturity),
    }
}

/// Time-0 bond value computed the other way: a base-measure expectation of
/// the FX-converted payoff discounted with the collateral account.
pub fn price_zcb_dual(result: &SimResult, case: ZcbCase, maturity: f64) -> Result<Estimate> {
    match case.currencies() {
        Some((k2, k3)) => price_full_collateral(result, &CashflowStream::new(k3).fixed(maturity, k2, 1.0)),
        None => expectation(result, &MeasureId::Spot(BASE), maturity, |p| Ok(1.0 / p.unsecured_account(BASE, maturity)?)),
    }
}

/// Index paid by a swap leg over `(t_{n-1}, t_n]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LegIndex {
    /// No floating index; the leg spread acts as the fixed rate.
    Zero,
    /// Compounded overnight collateral rate of the leg currency,
    /// `(B^{c,l}_{t_n} / B^{c,l}_{t_{n-1}} - 1) / delta_n`.
    Compounded,
    /// Abstract index of a spread family, fixed at `t_{n-1} + delta^f`.
    /// Base-currency legs only; the family collateral must be the swap's.
    Family(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwapLeg {
    pub currency: usize,
    /// `t_0 = tau^s < t_1 < ... < t_N = tau^e`.
    pub schedule: Vec<f64>,
    /// In the leg currency. A resetting leg uses the other leg's notional.
    pub notional: f64,
    /// Spread or fixed rate `S_0(tau^e)`.
    pub spread: f64,
    pub index: LegIndex,
    /// Notional re-fixed at each period start at the FX rate to the other leg.
    pub reset: bool,
}

impl SwapLeg {
    pub fn new(currency: usize, schedule: Vec<f64>, notional: f64, index: LegIndex) -> Self {
        SwapLeg { currency, schedule, notional, spread: 0.0, index, reset: false }
    }

    pub fn with_spread(mut self, spread: f64) -> Self {
        self.spread = spread;
        self
    }

    pub fn with_reset(mut self, reset: bool) -> Self {
        self.reset = reset;
        self
    }

    fn periods(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.schedule.windows(2).map(|w| (w[0], w[1]))
    }

    fn start(&self) -> f64 {
        self.schedule[0]
    }

    fn end(&self) -> f64 {
        self.schedule[self.schedule.len() - 1]
    }

    fn check(&self, model: &MarketModel, k3: usize) -> Result<()> {
        if self.schedule.len() < 2 {
            return Err(Error::InvalidSpec("a leg needs at least one period".into()));
        }
        if self.schedule[0] < 0.0 || self.schedule.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidSpec("leg schedule must be nonnegative and increasing".into()));
        }
        if self.currency >= model.n_currencies() {
            return Err(Error::InvalidSpec(format!("unknown leg currency {}", self.currency)));
        }
        if !(self.notional.is_finite() && self.spread.is_finite()) {
            return Err(Error::InvalidSpec("leg notional and spread must be finite".into()));
        }
        if let LegIndex::Family(f) = self.index {
            let fam = model.spreads.get(f).ok_or_else(|| Error::InvalidSpec(format!("unknown spread family {f}")))?;
            if self.currency != BASE {
                return Err(Error::InvalidSpec("family indices are defined for base-currency legs".into()));
            }
            if fam.collateral != k3 {
                return Err(Error::InvalidSpec(format!("family {} is collateralized in {} not {k3}", fam.name, fam.collateral)));
            }
            for (a, b) in self.periods() {
                if ((b - a) - fam.delta()).abs() > 1e-9 {
                    return Err(Error::InvalidSpec(format!("period ({a}, {b}] does not match the tenor of {}", fam.name)));
                }
            }
        }
        Ok(())
    }

    /// Dates at which path states are needed to value the leg.
    fn observation_times(&self, model: &MarketModel) -> Vec<f64> {
        let mut out = self.schedule.clone();
        if let LegIndex::Family(f) = self.index {
            if let Some(fam) = model.spreads.get(f) {
                out.extend(self.schedule[..self.schedule.len() - 1].iter().map(|a| a + fam.fix_adj));
                out.push(fam.fix_adj);
            }
        }
        out
    }
}

/// Two-leg swap `phi (S^{k0} - X^{k0,k} S^k)` collateralized in `collateral`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwapSpec {
    pub domestic: SwapLeg,
    pub foreign: SwapLeg,
    /// `+1` receives the domestic leg, `-1` pays it.
    pub direction: f64,
    pub collateral: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LegSide {
    Domestic,
    Foreign,
}

/// Swap value with its legs. `domestic` is in the base currency and
/// `foreign` in the foreign currency; `value` combines them at spot FX.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapValue {
    pub value: f64,
    pub std_error: f64,
    pub domestic: f64,
    pub foreign: f64,
}

impl SwapSpec {
    pub fn check(&self, model: &MarketModel) -> Result<()> {
        if self.domestic.currency != BASE {
            return Err(Error::InvalidSpec("the domestic leg must pay the base currency".into()));
        }
        if self.foreign.currency == BASE {
            return Err(Error::InvalidSpec("the foreign leg must pay a foreign currency".into()));
        }
        if self.collateral >= model.n_currencies() {
            return Err(Error::InvalidSpec(format!("unknown collateral currency {}", self.collateral)));
        }
        if self.direction != 1.0 && self.direction != -1.0 {
            return Err(Error::InvalidSpec("direction must be +1 or -1".into()));
        }
        self.domestic.check(model, self.collateral)?;
        self.foreign.check(model, self.collateral)?;
        let (d, f) = (&self.domestic, &self.foreign);
        if (d.start() - f.start()).abs() > 1e-12 || (d.end() - f.end()).abs() > 1e-12 {
            return Err(Error::InvalidSpec("both legs must start and end on the same dates".into()));
        }
        if d.reset && f.reset {
            return Err(Error::InvalidSpec("at most one leg can reset".into()));
        }
        Ok(())
    }

    /// Dates to add to the simulation's observation times.
    pub fn observation_times(&self, model: &MarketModel) -> Vec<f64> {
        let mut out = self.domestic.observation_times(model);
        out.extend(self.foreign.observation_times(model));
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        out
    }

    fn leg(&self, side: LegSide) -> &SwapLeg {
        match side {
            LegSide::Domestic => &self.domestic,
            LegSide::Foreign => &self.foreign,
        }
    }

    fn leg_mut(&mut self, side: LegSide) -> &mut SwapLeg {
        match side {
            LegSide::Domestic => &mut self.domestic,
            LegSide::Foreign => &mut self.foreign,
        }
    }

    fn other(&self, side: LegSide) -> &SwapLeg {
        match side {
            LegSide::Domestic => &self.foreign,
            LegSide::Foreign => &self.domestic,
        }
    }
}

fn nonempty(mut terms: Vec<AffineTerm>) -> Vec<AffineTerm> {
    terms.retain(|x| x.to > x.from);
    terms
}

/// `E^{Q^l}[B^{c,l,k3}_t / B^{c,l,k3}_b * B^{c,l}_b / B^{c,l}_a | G_t]` for `t <= b`.
fn compounded_growth(view: &PathView<'_>, l: usize, k3: usize, a: f64, b: f64, t: f64) -> Result<f64> {
    let spreads: Vec<AffineTerm> = view
        .bond_terms(l, k3, t, b)
        .into_iter()
        .filter(|x| !matches!(x.surface, SurfaceId::Curve(_)))
        .collect();
    if t <= a {
        let mut terms = vec![AffineTerm { surface: SurfaceId::Curve(l), weight: 1.0, from: t, to: a }];
        terms.extend(spreads);
        return view.affine_price(&nonempty(terms), l, t);
    }
    let realized = (view.log_account(SurfaceId::Curve(l), t)? - view.log_account(SurfaceId::Curve(l), a)?).exp();
    Ok(realized * view.affine_price(&nonempty(spreads), l, t)?)
}

/// `delta_n E^{Q^l}[B^{c,l,k3}_t / B^{c,l,k3}_{t_n} I_n | G_t]`.
fn floating_pv(view: &PathView<'_>, leg: &SwapLeg, k3: usize, a: f64, b: f64, t: f64) -> Result<f64> {
    let l = leg.currency;
    match leg.index {
        LegIndex::Zero => Ok(0.0),
        LegIndex::Compounded => Ok(compounded_growth(view, l, k3, a, b, t)? - view.bond(l, k3, t, b)?),
        LegIndex::Family(f) => {
            let fix = a + view.result().model().spreads[f].fix_adj;
            Ok((b - a) * index_forward(view, f, fix, t)? * view.bond(l, k3, t, b)?)
        }
    }
}

/// Constant-notional leg value at `t` in its own currency, from the surfaces.
pub fn leg_value(view: &PathView<'_>, leg: &SwapLeg, k3: usize, t: f64) -> Result<f64> {
    leg.check(view.result().model(), k3)?;
    if t > leg.end() + 1e-12 {
        return Ok(0.0);
    }
    let l = leg.currency;
    let mut v = view.bond(l, k3, t, leg.end())?;
    if t <= leg.start() + 1e-12 {
        v -= view.bond(l, k3, t, leg.start())?;
    }
    for (a, b) in leg.periods() {
        if t > b + 1e-12 {
            continue;
        }
        v += (b - a) * leg.spread * view.bond(l, k3, t, b)? + floating_pv(view, leg, k3, a, b, t)?;
    }
    Ok(leg.notional * v)
}

/// Constant-notional cross-currency swap at `t` on one path, in closed form.
/// A resetting leg is rejected; see [`price_mtmccs`].
pub fn price_ccs(view: &PathView<'_>, spec: &SwapSpec, t: f64) -> Result<SwapValue> {
    let model = view.result().model();
    spec.check(model)?;
    if spec.domestic.reset || spec.foreign.reset {
        return Err(Error::InvalidSpec("resetting legs have no closed form".into()));
    }
    let dom = leg_value(view, &spec.domestic, spec.collateral, t)?;
    let fgn = leg_value(view, &spec.foreign, spec.collateral, t)?;
    let x = view.fx(BASE, spec.foreign.currency, t)?;
    Ok(SwapValue { value: spec.direction * (dom - x * fgn), std_error: 0.0, domestic: dom, foreign: fgn })
}

/// Realized index of period `(a, b]` seen at payment.
fn realized_index(view: &PathView<'_>, index: LegIndex, l: usize, a: f64, b: f64) -> Result<f64> {
    match index {
        LegIndex::Zero => Ok(0.0),
        LegIndex::Compounded => {
            let g = view.log_account(SurfaceId::Curve(l), b)? - view.log_account(SurfaceId::Curve(l), a)?;
            Ok((g.exp() - 1.0) / (b - a))
        }
        LegIndex::Family(f) => {
            let fix = a + view.result().model().spreads[f].fix_adj;
            forward_index_value(view, f, fix, b)
        }
    }
}

/// Contractual cashflows of a leg in its own currency. A resetting leg with
/// notional currency `kappa` pays `N^kappa X^{l,kappa}_{t_{n-1}}` at each
/// period start and receives it back with interest at `t_n`.
pub fn leg_cashflows(leg: &SwapLeg, k3: usize, reset_from: Option<(usize, f64)>) -> CashflowStream {
    let l = leg.currency;
    let mut s = CashflowStream::new(k3);
    let (index, spread) = (leg.index, leg.spread);
    match reset_from {
        None => {
            let n = leg.notional;
            s = s.fixed(leg.start(), l, -n).fixed(leg.end(), l, n);
            for (a, b) in leg.periods() {
                let d = b - a;
                s = s.path(b, l, move |p| Ok(n * d * (realized_index(p, index, l, a, b)? + spread)));
            }
        }
        Some((kappa, n)) => {
            for (a, b) in leg.periods() {
                let d = b - a;
                s = s.path(a, l, move |p| Ok(-n * p.fx(l, kappa, a)?));
                s = s.path(b, l, move |p| {
                    Ok(n * p.fx(l, kappa, a)? * (1.0 + d * (realized_index(p, index, l, a, b)? + spread)))
                });
            }
        }
    }
    s
}

fn leg_stream(spec: &SwapSpec, side: LegSide) -> CashflowStream {
    let leg = spec.leg(side);
    let other = spec.other(side);
    let reset = leg.reset.then_some((other.currency, other.notional));
    leg_cashflows(leg, spec.collateral, reset)
}

/// Per-path base-currency samples of `phi (V^{k0} - V^k)` at time 0 and
/// the densities to `Q^{k0}`.
struct SwapSamples {
    dom: Vec<f64>,
    fgn: Vec<f64>,
    density: Vec<f64>,
}

fn swap_samples(result: &SimResult, spec: &SwapSpec) -> Result<SwapSamples> {
    spec.check(result.model())?;
    let dom = leg_stream(spec, LegSide::Domestic);
    let fgn = leg_stream(spec, LegSide::Foreign);
    let horizon = dom.last_time().max(fgn.last_time());
    let density = DensityProcess::new(MeasureId::Spot(result.measure()), MeasureId::Spot(BASE));
    let packed: Vec<(f64, f64, f64)> = {
        use rayon::prelude::*;
        (0..result.paths())
            .into_par_iter()
            .map(|i| {
                let p = result.path(i);
                Ok((discounted_sum(&p, &dom, 0.0)?, discounted_sum(&p, &fgn, 0.0)?, density.value(&p, horizon)?))
            })
            .collect::<Result<_>>()?
    };
    let mut out = SwapSamples { dom: Vec::new(), fgn: Vec::new(), density: Vec::new() };
    for (a, b, w) in packed {
        out.dom.push(a);
        out.fgn.push(b);
        out.density.push(w);
    }
    Ok(out)
}

fn grouped(result: &SimResult, v: &[f64], w: &[f64]) -> Result<Estimate> {
    let g = result.group_size();
    let u: Vec<f64> = v.iter().zip(w).map(|(a, b)| a * b).collect();
    ratio_estimate(&fold_groups(&u, g), &fold_groups(w, g))
}

/// Time-0 swap value from simulated cashflows, valid for constant-notional
/// and resetting legs alike.
pub fn price_swap_mc(result: &SimResult, spec: &SwapSpec) -> Result<SwapValue> {
    let s = swap_samples(result, spec)?;
    let phi = spec.direction;
    let total: Vec<f64> = s.dom.iter().zip(&s.fgn).map(|(a, b)| phi * (a - b)).collect();
    let v = grouped(result, &total, &s.density)?;
    let dom = grouped(result, &s.dom, &s.density)?.value;
    let x0 = result.initial().fx(BASE, spec.foreign.currency, 0.0)?;
    let fgn = grouped(result, &s.fgn, &s.density)?.value / x0;
    Ok(SwapValue { value: v.value, std_error: v.std_error, domestic: dom, foreign: fgn })
}

/// Time-0 value of a resetting swap: the resetting leg from simulated
/// cashflows, the other leg in closed form.
pub fn price_mtmccs(result: &SimResult, spec: &SwapSpec) -> Result<SwapValue> {
    spec.check(result.model())?;
    let side = match (spec.domestic.reset, spec.foreign.reset) {
        (true, false) => LegSide::Domestic,
        (false, true) => LegSide::Foreign,
        _ => return Err(Error::InvalidSpec("exactly one leg must reset".into())),
    };
    let view = result.initial();
    let x0 = view.fx(BASE, spec.foreign.currency, 0.0)?;
    let reset = price_full_collateral(result, &leg_stream(spec, side))?;
    let fixed_leg = spec.other(side);
    let fixed = leg_value(&view, fixed_leg, spec.collateral, 0.0)?;
    let phi = spec.direction;
    let (dom, fgn, value) = match side {
        LegSide::Domestic => (reset.value, fixed, phi * (reset.value - x0 * fixed)),
        LegSide::Foreign => (fixed, reset.value / x0, phi * (fixed - reset.value)),
    };
    Ok(SwapValue { value, std_error: reset.std_error, domestic: dom, foreign: fgn })
}

/// Valuation route for [`fair_spread`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Closed form on the initial state; constant-notional swaps only.
    ClosedForm,
    /// Simulated cashflows with common random numbers across spreads.
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FairSpread {
    pub spread: f64,
    pub std_error: f64,
}

/// Spread on `side` that makes the time-0 swap value zero. The value is
/// affine in the spread, so `s* = -V(0) / (V(1) - V(0))` with both values
/// computed on the same paths.
pub fn fair_spread(result: &SimResult, spec: &SwapSpec, side: LegSide, route: Route) -> Result<FairSpread> {
    let mut at0 = spec.clone();
    at0.leg_mut(side).spread = 0.0;
    let mut at1 = spec.clone();
    at1.leg_mut(side).spread = 1.0;
    match route {
        Route::ClosedForm => {
            let view = result.initial();
            let v0 = price_ccs(&view, &at0, 0.0)?.value;
            let sens = price_ccs(&view, &at1, 0.0)?.value - v0;
            if sens == 0.0 || !sens.is_finite() {
                return Err(Error::DegenerateSensitivity);
            }
            Ok(FairSpread { spread: -v0 / sens, std_error: 0.0 })
        }
        Route::MonteCarlo => {
            let s0 = swap_samples(result, &at0)?;
            let s1 = swap_samples(result, &at1)?;
            let phi = spec.direction;
            let mut num = Vec::with_capacity(s0.dom.len());
            let mut den = Vec::with_capacity(s0.dom.len());
            for i in 0..s0.dom.len() {
                let v0 = phi * (s0.dom[i] - s0.fgn[i]);
                let v1 = phi * (s1.dom[i] - s1.fgn[i]);
                num.push(-v0 * s0.density[i]);
                den.push((v1 - v0) * s0.density[i]);
            }
            let g = result.group_size();
            let (num, den) = (fold_groups(&num, g), fold_groups(&den, g));
            if den.iter().all(|x| *x == 0.0) {
                return Err(Error::DegenerateSensitivity);
            }
            let est = ratio_estimate(&num, &den).map_err(|_| Error::DegenerateSensitivity)?;
            Ok(FairSpread { spread: est.value, std_error: est.std_error })
        }
    }
}

/// Replacement for a discontinued forward-looking index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fallback {
    /// Another forward-looking, credit-sensitive index of the given family,
    /// fixed at the period start.
    AmeriborLike { family: usize },
    /// Compounded overnight collateral rate plus a fixed credit spread.
    IsdaCompounded { credit_spread: f64 },
}

/// The leg after applying `fallback`.
pub fn apply_fallback(leg: &SwapLeg, fallback: Fallback) -> SwapLeg {
    let mut out = leg.clone();
    match fallback {
        Fallback::AmeriborLike { family } => out.index = LegIndex::Family(family),
        Fallback::IsdaCompounded { credit_spread } => {
            out.index = LegIndex::Compounded;
            out.spread += credit_spread;
        }
    }
    out
}

/// Closed-form value at `t` of a leg after the fallback.
pub fn fallback_leg(view: &PathView<'_>, leg: &SwapLeg, k3: usize, fallback: Fallback, t: f64) -> Result<f64> {
    match fallback {
        Fallback::AmeriborLike { family } => {
            let fam = view
                .result()
                .model()
                .spreads
                .get(family)
                .ok_or_else(|| Error::InvalidSpec(format!("unknown spread family {family}")))?;
            if fam.fix_adj != 0.0 {
                return Err(Error::InvalidSpec("a forward-looking replacement fixes at the period start".into()));
            }
        }
        Fallback::IsdaCompounded { credit_spread } => {
            if !credit_spread.is_finite() {
                return Err(Error::InvalidSpec("credit spread must be finite".into()));
            }
        }
    }
    leg_value(view, &apply_fallback(leg, fallback), k3, t)
}

/// Deterministic rates for the general collateral formula with different
/// borrowing and lending collateral rates.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicRates {
    /// Unsecured rate `r^{k0}`.
    pub unsecured_base: InitialCurve,
    /// Unsecured rate `r^{k3}` of the collateral currency.
    pub unsecured_collateral: InitialCurve,
    /// Rate the collateral receiver pays, `r^{c,k3,b}`.
    pub collateral_borrow: InitialCurve,
    /// Rate the collateral poster earns, `r^{c,k3,l}`.
    pub collateral_lend: InitialCurve,
}

fn curve_sum(curves: &[(&InitialCurve, f64)]) -> Result<InitialCurve> {
    let mut pillars: Vec<f64> = curves.iter().flat_map(|(c, _)| c.pillars().iter().copied()).collect();
    pillars.sort_by(f64::total_cmp);
    pillars.dedup();
    let values = pillars.iter().map(|t| curves.iter().map(|(c, w)| w * c.value(*t)).sum()).collect();
    InitialCurve::new(pillars, values)
}

/// Exact integral of a piecewise-linear, flat-extrapolated curve.
fn curve_integral(curve: &InitialCurve, a: f64, b: f64) -> f64 {
    let mut pts: Vec<f64> = curve.pillars().iter().copied().filter(|p| *p > a && *p < b).collect();
    pts.insert(0, a);
    pts.push(b);
    pts.windows(2).map(|w| 0.5 * (curve.value(w[0]) + curve.value(w[1])) * (w[1] - w[0])).sum()
}

impl DeterministicRates {
    /// Rates implied by the initial curves of `model` with symmetric
    /// collateral rate `r^{c,k3}`, `r^{k0} = r^{c,k0} + qbar` and
    /// `r^{k3} = r^{c,k3} + qbar - q^{k0,k3}`.
    pub fn from_model(model: &MarketModel, k3: usize) -> Result<Self> {
        let c0 = &model.currencies[BASE].initial;
        let ck = &model.currencies[k3].initial;
        let qbar = &model.unsecured_spread;
        let zero = InitialCurve::flat(0.0);
        let q = if model.has_basis(k3) { model.initial(SurfaceId::Basis(k3)) } else { &zero };
        Ok(DeterministicRates {
            unsecured_base: curve_sum(&[(c0, 1.0), (qbar, 1.0)])?,
            unsecured_collateral: curve_sum(&[(ck, 1.0), (qbar, 1.0), (q, -1.0)])?,
            collateral_borrow: ck.clone(),
            collateral_lend: ck.clone(),
        })
    }

    /// `int_a^b (r^{k0} - r^{k3} + r^{c,k3,side})` for the sign of the value.
    fn discount(&self, a: f64, b: f64, positive: bool) -> f64 {
        let c = if positive { &self.collateral_borrow } else { &self.collateral_lend };
        curve_integral(&self.unsecured_base, a, b) - curve_integral(&self.unsecured_collateral, a, b) + curve_integral(c, a, b)
    }
}

/// Value at `t` of deterministic base-currency cashflows `(time, amount)`
/// under full collateralization `C = S / X^{k0,k3}` with possibly different
/// borrowing and lending collateral rates. The full-value martingale
/// condition reduces to a linear equation whose rate depends on the sign of
/// the value, solved exactly between payment dates.
pub fn general_collateral_value(rates: &DeterministicRates, flows: &[(f64, f64)], t: f64) -> Result<f64> {
    if flows.iter().any(|(s, a)| !(s.is_finite() && a.is_finite())) {
        return Err(Error::InvalidSpec("cashflows must be finite".into()));
    }
    let mut due: Vec<(f64, f64)> = flows.iter().copied().filter(|(s, _)| *s >= t - 1e-12).collect();
    due.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut value = 0.0;
    let mut at = due.last().map_or(t, |x| x.0);
    for &(s, a) in due.iter().rev() {
        if value != 0.0 {
            value *= (-rates.discount(s, at, value > 0.0)).exp();
        }
        value += a;
        at = s;
    }
    if value != 0.0 && at > t {
        value *= (-rates.discount(t, at, value > 0.0)).exp();
    }
    Ok(value)
}

/// Same cashflows valued with the single collateral rate:
/// `sum A exp(-int_t^tau (r^{c,k0} + q^{k0,k3}))` from the model's initial curves.
pub fn full_collateral_deterministic(model: &MarketModel, k3: usize, flows: &[(f64, f64)], t: f64) -> Result<f64> {
    let mut curves = vec![(&model.currencies[BASE].initial, 1.0)];
    if k3 != BASE && model.has_basis(k3) {
        curves.push((model.initial(SurfaceId::Basis(k3)), 1.0));
    }
    let rate = curve_sum(&curves)?;
    Ok(flows
        .iter()
        .filter(|(s, _)| *s >= t - 1e-12)
        .map(|(s, a)| a * (-curve_integral(&rate, t, *s)).exp())
        .sum())
}
