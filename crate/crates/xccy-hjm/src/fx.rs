//! FX rates against the base currency in exponential-martingale form.

use crate::curves::{hjm_drift, VolatilitySpec};
use crate::driver::{girsanov_transform, DriverSpec, PiecewiseVector};
use crate::error::{Error, Result};
use crate::measures::MeasureId;

/// `X^{k0,k}`: units of the base currency `k0` per unit of `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FxSpec {
    pub base: usize,
    pub foreign: usize,
    pub spot: f64,
    pub vol: PiecewiseVector,
}

impl FxSpec {
    pub fn new(base: usize, foreign: usize, spot: f64, vol: PiecewiseVector) -> Result<Self> {
        if base == foreign {
            return Err(Error::InvalidSpec("an FX pair needs two currencies".into()));
        }
        if !(spot > 0.0 && spot.is_finite()) {
            return Err(Error::InvalidSpec(format!("FX spot must be positive, got {spot}")));
        }
        Ok(FxSpec { base, foreign, spot, vol })
    }
}

/// Characteristics of `X` under the foreign spot measure `Q^k`.
pub fn foreign_curve_driver(driver_k0: &DriverSpec, fx: &FxSpec) -> Result<DriverSpec> {
    girsanov_transform(driver_k0, &fx.vol, MeasureId::Spot(fx.foreign))
}

/// Difference between the drift of `f^{c,k}` and the drift it would have if
/// its dynamics were stated under `Q^{k0}`.
pub fn quanto_drift_correction(vol_k: &VolatilitySpec, driver_k0: &DriverSpec, fx: &FxSpec, t: f64, maturity: f64) -> Result<f64> {
    let qk = foreign_curve_driver(driver_k0, fx)?;
    Ok(hjm_drift(vol_k, &qk, t, maturity)? - hjm_drift(vol_k, driver_k0, t, maturity)?)
}

/// Running log of `exp(int sigma^X dX - int Psi(sigma^X) dt)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FxState {
    pub log_exponential: f64,
}

/// Advances the stochastic exponential over `[t, t + dt]` with increment `dx`.
pub fn fx_evolve(state: &mut FxState, fx: &FxSpec, driver_k0: &DriverSpec, t: f64, dt: f64, dx: &[f64]) -> Result<()> {
    let s = fx.vol.at(t);
    let psi = driver_k0.local_exponent(t, s.as_slice())?;
    state.log_exponential += s.iter().zip(dx).map(|(a, b)| a * b).sum::<f64>() - psi * dt;
    Ok(())
}

/// `X_t = X_0 B^{c,k0}_t Q^{k0,k}_t / B^{c,k}_t * exp(...)` from log accounts.
pub fn fx_rate(fx: &FxSpec, log_coll_base: f64, log_basis: f64, log_coll_foreign: f64, state: &FxState) -> f64 {
    fx.spot * (log_coll_base + log_basis - log_coll_foreign + state.log_exponential).exp()
}
