//! The L-currency market configuration and its deterministic functionals:
//! native drifts of every simulated surface, their closed-form integrals and
//! exponential-affine conditional expectations.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

use crate::basis::basis_drift_term;
use crate::curves::{drift_term, InitialCurve, VolatilitySpec};
use crate::driver::{Characteristics, DriverSpec};
use crate::error::{Error, Result};
use crate::fx::{foreign_curve_driver, FxSpec};
use crate::measures::MeasureId;

/// Index of the base currency `k0`.
pub const BASE: usize = 0;

/// Collateral curve of one currency.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrencyCurve {
    pub name: String,
    pub initial: InitialCurve,
    pub vol: VolatilitySpec,
}

/// Basis spread `q^{k0,k}` of a foreign currency against the base.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    pub initial: InitialCurve,
    pub vol: VolatilitySpec,
}

/// Multiplicative spread family `h^{df,dp,k0,k3}` for one tenor structure.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadFamily {
    pub name: String,
    pub collateral: usize,
    pub fix_adj: f64,
    pub pay_adj: f64,
    pub initial: InitialCurve,
    pub vol: VolatilitySpec,
}

impl SpreadFamily {
    pub fn delta(&self) -> f64 {
        self.fix_adj + self.pay_adj
    }
}

/// A simulated forward-rate-like surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SurfaceId {
    /// `f^{c,k}`.
    Curve(usize),
    /// `q^{k0,k}`.
    Basis(usize),
    /// `h` of spread family `i`.
    Spread(usize),
}

/// One term `weight * int_from^to x_u du` of an exponential-affine functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTerm {
    pub surface: SurfaceId,
    pub weight: f64,
    pub from: f64,
    pub to: f64,
}

/// Up to three weighted surfaces, held inline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Combo {
    items: [(SurfaceId, f64); 3],
    len: usize,
}

impl Combo {
    fn push(&mut self, x: (SurfaceId, f64)) {
        self.items[self.len] = x;
        self.len += 1;
    }

    pub fn as_slice(&self) -> &[(SurfaceId, f64)] {
        &self.items[..self.len]
    }
}

impl IntoIterator for Combo {
    type Item = (SurfaceId, f64);
    type IntoIter = std::iter::Take<std::array::IntoIter<(SurfaceId, f64), 3>>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.into_iter().take(self.len)
    }
}

/// Complete market model. Currency 0 is the base; the driver is stated
/// under its spot measure.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketModel {
    pub driver: DriverSpec,
    pub currencies: Vec<CurrencyCurve>,
    /// Per currency; entry 0 must be `None`.
    pub basis: Vec<Option<BasisSpec>>,
    /// Per currency; entry 0 is `None`, all others are required.
    pub fx: Vec<Option<FxSpec>>,
    /// Deterministic unsecured spread of the base currency.
    pub unsecured_spread: InitialCurve,
    pub spreads: Vec<SpreadFamily>,
    spot_drivers: Vec<DriverSpec>,
}

/// Scratch buffers for drift evaluation.
pub struct ModelScratch {
    sig_a: Vec<f64>,
    big_a: Vec<f64>,
    sig_b: Vec<f64>,
    big_b: Vec<f64>,
    grad: Vec<f64>,
    beta: Vec<f64>,
}

impl ModelScratch {
    pub fn new(dim: usize) -> Self {
        let z = || vec![0.0; dim];
        ModelScratch { sig_a: z(), big_a: z(), sig_b: z(), big_b: z(), grad: z(), beta: z() }
    }

    fn clear(&mut self) {
        for v in [&mut self.sig_a, &mut self.big_a, &mut self.sig_b, &mut self.big_b] {
            v.iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

fn gauss_legendre() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(16).expect("nonzero degree")))
}

fn neg(beta: &mut [f64], v: &[f64]) {
    for (b, x) in beta.iter_mut().zip(v) {
        *b = -x;
    }
}

impl MarketModel {
    pub fn new(
        driver: DriverSpec,
        currencies: Vec<CurrencyCurve>,
        basis: Vec<Option<BasisSpec>>,
        fx: Vec<Option<FxSpec>>,
        unsecured_spread: InitialCurve,
        spreads: Vec<SpreadFamily>,
    ) -> Result<Self> {
        let l = currencies.len();
        if l == 0 {
            return Err(Error::InvalidSpec("at least one currency is required".into()));
        }
        if *driver.measure() != MeasureId::Spot(BASE) {
            return Err(Error::InvalidSpec("the driver must be stated under the base spot measure".into()));
        }
        if basis.len() != l || fx.len() != l {
            return Err(Error::InvalidSpec("basis and FX blocks need one entry per currency".into()));
        }
        if basis[BASE].is_some() || fx[BASE].is_some() {
            return Err(Error::InvalidSpec("the base currency carries no basis or FX".into()));
        }
        let d = driver.dim();
        let check_vol = |v: &VolatilitySpec, what: &str| {
            if v.dim() == d {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!("{what} volatility has dimension {} but the driver has {d}", v.dim())))
            }
        };
        for c in &currencies {
            check_vol(&c.vol, &c.name)?;
        }
        for b in basis.iter().flatten() {
            check_vol(&b.vol, "basis")?;
        }
        let mut spot_drivers = vec![driver.clone()];
        for (k, f) in fx.iter().enumerate().skip(1) {
            let f = f
                .as_ref()
                .ok_or_else(|| Error::InvalidSpec(format!("currency {} needs an FX specification", currencies[k].name)))?;
            if f.base != BASE || f.foreign != k || f.vol.dim() != d {
                return Err(Error::InvalidSpec(format!("FX block for {} is inconsistent", currencies[k].name)));
            }
            for s in f.vol.starts() {
                driver.local_exponent(*s, f.vol.at(*s).as_slice()).map_err(admissibility)?;
            }
            for s in driver.starts() {
                driver.local_exponent(*s, f.vol.at(*s).as_slice()).map_err(admissibility)?;
            }
            spot_drivers.push(foreign_curve_driver(&driver, f).map_err(admissibility)?);
        }
        for s in &spreads {
            check_vol(&s.vol, &s.name)?;
            if s.collateral >= l {
                return Err(Error::InvalidSpec(format!("spread family {} has an unknown collateral", s.name)));
            }
            if !(s.fix_adj >= 0.0 && s.pay_adj >= 0.0) {
                return Err(Error::InvalidSpec(format!("spread family {} has negative adjustments", s.name)));
            }
        }
        Ok(MarketModel { driver, currencies, basis, fx, unsecured_spread, spreads, spot_drivers })
    }

    pub fn n_currencies(&self) -> usize {
        self.currencies.len()
    }

    pub fn currency_index(&self, name: &str) -> Option<usize> {
        self.currencies.iter().position(|c| c.name == name)
    }

    /// Characteristics of `X` under the spot measure `Q^k`.
    pub fn spot_driver(&self, k: usize) -> &DriverSpec {
        &self.spot_drivers[k]
    }

    pub fn fx_spec(&self, k: usize) -> Option<&FxSpec> {
        self.fx.get(k).and_then(|f| f.as_ref())
    }

    pub fn has_basis(&self, k: usize) -> bool {
        self.basis.get(k).is_some_and(|b| b.is_some())
    }

    /// All simulated surfaces in storage order.
    pub fn surfaces(&self) -> Vec<SurfaceId> {
        let mut out: Vec<SurfaceId> = (0..self.n_currencies()).map(SurfaceId::Curve).collect();
        out.extend((0..self.n_currencies()).filter(|k| self.has_basis(*k)).map(SurfaceId::Basis));
        out.extend((0..self.spreads.len()).map(SurfaceId::Spread));
        out
    }

    pub fn vol(&self, s: SurfaceId) -> &VolatilitySpec {
        match s {
            SurfaceId::Curve(k) => &self.currencies[k].vol,
            SurfaceId::Basis(k) => &self.basis[k].as_ref().expect("basis surface exists").vol,
            SurfaceId::Spread(i) => &self.spreads[i].vol,
        }
    }

    pub fn initial(&self, s: SurfaceId) -> &InitialCurve {
        match s {
            SurfaceId::Curve(k) => &self.currencies[k].initial,
            SurfaceId::Basis(k) => &self.basis[k].as_ref().expect("basis surface exists").initial,
            SurfaceId::Spread(i) => &self.spreads[i].initial,
        }
    }

    /// Spot measure under which the surface's drift condition is stated.
    pub fn native_measure(&self, s: SurfaceId) -> usize {
        match s {
            SurfaceId::Curve(k) => k,
            _ => BASE,
        }
    }

    /// Surfaces summing to the collateral rate `r^{c,l,k3}`, using
    /// `q^{l,k3} = q^{k0,k3} - q^{k0,l}`.
    pub fn collateral_combo(&self, l: usize, k3: usize) -> Combo {
        let mut out = Combo { items: [(SurfaceId::Curve(l), 1.0); 3], len: 1 };
        if l != k3 {
            if self.has_basis(k3) {
                out.push((SurfaceId::Basis(k3), 1.0));
            }
            if self.has_basis(l) {
                out.push((SurfaceId::Basis(l), -1.0));
            }
        }
        out
    }

    /// Collateral vol `sigma^{c,k0} + sigma^{k0,k3}` entering spread drifts.
    fn add_cq(&self, k3: usize, t: f64, maturity: f64, sig: &mut [f64], big: &mut [f64]) {
        let c = self.vol(SurfaceId::Curve(BASE));
        c.sigma_into(t, maturity, sig);
        c.integrated_into(t, maturity, big);
        if k3 != BASE && self.has_basis(k3) {
            let q = self.vol(SurfaceId::Basis(k3));
            q.sigma_into(t, maturity, sig);
            q.integrated_into(t, maturity, big);
        }
    }

    /// Native risk-neutral drift `alpha_t(T)` of surface `s`.
    pub fn drift(&self, s: SurfaceId, t: f64, maturity: f64, w: &mut ModelScratch) -> Result<f64> {
        if maturity < t {
            return Err(Error::ReversedInterval { t, maturity });
        }
        w.clear();
        match s {
            SurfaceId::Curve(k) => {
                let v = self.vol(s);
                v.sigma_into(t, maturity, &mut w.sig_a);
                v.integrated_into(t, maturity, &mut w.big_a);
                drift_term(self.spot_drivers[k].chars_at(t), &w.sig_a, &w.big_a, &mut w.grad, &mut w.beta)
            }
            SurfaceId::Basis(_) => {
                let c = self.vol(SurfaceId::Curve(BASE));
                c.sigma_into(t, maturity, &mut w.sig_a);
                c.integrated_into(t, maturity, &mut w.big_a);
                let q = self.vol(s);
                q.sigma_into(t, maturity, &mut w.sig_b);
                q.integrated_into(t, maturity, &mut w.big_b);
                basis_drift_term(self.driver.chars_at(t), &w.sig_a, &w.big_a, &w.sig_b, &w.big_b, &mut w.grad, &mut w.beta)
            }
            SurfaceId::Spread(i) => {
                let fam = &self.spreads[i];
                fam.vol.sigma_into(t, maturity, &mut w.sig_b);
                fam.vol.integrated_into(t, maturity, &mut w.big_b);
                let chars = self.driver.chars_at(t);
                let start = maturity - fam.delta();
                if start <= t {
                    drift_term(chars, &w.sig_b, &w.big_b, &mut w.grad, &mut w.beta)
                } else {
                    self.add_cq(fam.collateral, t, start, &mut w.sig_a, &mut w.big_a);
                    basis_drift_term(chars, &w.sig_a, &w.big_a, &w.sig_b, &w.big_b, &mut w.grad, &mut w.beta)
                }
            }
        }
    }

    /// Closed form of `int_t^U alpha_t(u) du` as a difference of exponents.
    pub fn integrated_drift_to(&self, s: SurfaceId, t: f64, maturity: f64, w: &mut ModelScratch) -> Result<f64> {
        if maturity <= t {
            return Ok(0.0);
        }
        w.clear();
        match s {
            SurfaceId::Curve(k) => {
                self.vol(s).integrated_into(t, maturity, &mut w.big_a);
                neg(&mut w.beta, &w.big_a);
                self.spot_drivers[k].chars_at(t).psi(&w.beta)
            }
            SurfaceId::Basis(_) => {
                let chars = self.driver.chars_at(t);
                self.vol(SurfaceId::Curve(BASE)).integrated_into(t, maturity, &mut w.big_a);
                self.vol(s).integrated_into(t, maturity, &mut w.big_b);
                pair_difference(chars, &w.big_a, &w.big_b, &mut w.beta)
            }
            SurfaceId::Spread(i) => {
                let fam = &self.spreads[i];
                let chars = self.driver.chars_at(t);
                fam.vol.integrated_into(t, maturity, &mut w.big_b);
                let start = maturity - fam.delta();
                if start <= t {
                    neg(&mut w.beta, &w.big_b);
                    chars.psi(&w.beta)
                } else {
                    self.add_cq(fam.collateral, t, start, &mut w.sig_a, &mut w.big_a);
                    pair_difference(chars, &w.big_a, &w.big_b, &mut w.beta)
                }
            }
        }
    }

    /// `int_a^b alpha_t(u) du` for `t <= a <= b`.
    pub fn integrated_drift(&self, s: SurfaceId, t: f64, from: f64, to: f64, w: &mut ModelScratch) -> Result<f64> {
        if from < t || to < from {
            return Err(Error::ReversedInterval { t: from.min(t), maturity: to });
        }
        Ok(self.integrated_drift_to(s, t, to, w)? - self.integrated_drift_to(s, t, from, w)?)
    }

    fn breakpoints(&self, terms: &[AffineTerm], t: f64, end: f64) -> Vec<f64> {
        let mut pts = vec![t, end];
        let mut shifts = vec![0.0];
        shifts.extend(self.spreads.iter().map(|f| f.delta()));
        for term in terms {
            for sh in &shifts {
                pts.push(term.from - sh);
                pts.push(term.to - sh);
            }
        }
        for s in self.surfaces() {
            let v = self.vol(s);
            pts.extend(v.time_breaks());
            for m in v.maturity_breaks() {
                for sh in &shifts {
                    pts.push(m - sh);
                }
            }
        }
        for d in &self.spot_drivers {
            pts.extend_from_slice(d.starts());
        }
        pts.retain(|p| *p >= t && *p <= end);
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        pts
    }

    /// Deterministic `D` such that
    /// `E^{Q^m}_t[exp(-sum w int_a^b x)] = exp(-sum w int_a^b f_t - D)`.
    pub fn affine_convexity(&self, terms: &[AffineTerm], measure: usize, t: f64) -> Result<f64> {
        self.check_affine_terms(terms, t)?;
        if self.is_native_combo(terms, measure) {
            return Ok(0.0);
        }
        let end = terms.iter().map(|x| x.to).fold(t, f64::max);
        let pts = self.breakpoints(terms, t, end);
        let rule = gauss_legendre();
        let d = self.driver.dim();
        let mut w = ModelScratch::new(d);
        let mut wv = vec![0.0; d];
        let mut beta = vec![0.0; d];
        let mut failure: Option<Error> = None;
        let mut total = 0.0;
        for seg in pts.windows(2) {
            let pieces = ((seg[1] - seg[0]) / 0.25).ceil().max(1.0) as usize;
            let h = (seg[1] - seg[0]) / pieces as f64;
            for p in 0..pieces {
                let a = seg[0] + p as f64 * h;
                total += rule.integrate(a, a + h, |v| {
                    match self.convexity_integrand(terms, measure, v, &mut w, &mut wv, &mut beta) {
                        Ok(x) => x,
                        Err(e) => {
                            failure.get_or_insert(e);
                            0.0
                        }
                    }
                });
            }
        }
        match failure {
            Some(e) => Err(e),
            None => Ok(total),
        }
    }

    fn convexity_integrand(
        &self,
        terms: &[AffineTerm],
        measure: usize,
        v: f64,
        w: &mut ModelScratch,
        wv: &mut [f64],
        beta: &mut [f64],
    ) -> Result<f64> {
        wv.iter_mut().for_each(|x| *x = 0.0);
        let mut drift = 0.0;
        for term in terms {
            if v >= term.to {
                continue;
            }
            let a = term.from.max(v);
            drift += term.weight * self.integrated_drift(term.surface, v, a, term.to, w)?;
            let vol = self.vol(term.surface);
            let mut hi = vec![0.0; wv.len()];
            vol.integrated_into(v, term.to, &mut hi);
            let mut lo = vec![0.0; wv.len()];
            vol.integrated_into(v, a, &mut lo);
            for i in 0..wv.len() {
                wv[i] += term.weight * (hi[i] - lo[i]);
            }
        }
        neg(beta, wv);
        Ok(drift - self.spot_drivers[measure].chars_at(v).psi(beta)?)
    }

    /// Interval and period-start checks shared by every affine expectation.
    pub(crate) fn check_affine_terms(&self, terms: &[AffineTerm], t: f64) -> Result<()> {
        for term in terms {
            if term.from < t - 1e-12 || term.to < term.from {
                return Err(Error::ReversedInterval { t: term.from, maturity: term.to });
            }
            if let SurfaceId::Spread(i) = term.surface {
                let start = self.spreads[i].fix_adj;
                if t < start - 1e-12 {
                    return Err(Error::BeforePeriodStart { t, start });
                }
            }
        }
        Ok(())
    }

    /// Combinations whose drift conditions make the convexity vanish.
    pub(crate) fn is_native_combo(&self, terms: &[AffineTerm], measure: usize) -> bool {
        let Some(first) = terms.first() else { return true };
        if terms.iter().any(|x| x.from != first.from || x.to != first.to || x.weight != 1.0) {
            return false;
        }
        match terms {
            [x] => matches!(x.surface, SurfaceId::Curve(k) if k == measure),
            [x, y] => {
                measure == BASE
                    && matches!((x.surface, y.surface), (SurfaceId::Curve(BASE), SurfaceId::Basis(_)))
            }
            _ => false,
        }
    }

    /// Largest admissible simulation horizon checks.
    pub fn check_horizon(&self, horizon: f64) -> Result<()> {
        for s in self.surfaces() {
            self.vol(s).check_horizon(horizon)?;
        }
        Ok(())
    }
}

fn admissibility(e: Error) -> Error {
    Error::AdmissibilityViolation(e.to_string())
}

/// `Psi(-A - B) - Psi(-A)`.
fn pair_difference(chars: &Characteristics, a: &[f64], b: &[f64], beta: &mut [f64]) -> Result<f64> {
    for i in 0..beta.len() {
        beta[i] = -a[i] - b[i];
    }
    let full = chars.psi(beta)?;
    neg(beta, a);
    Ok(full - chars.psi(beta)?)
}
