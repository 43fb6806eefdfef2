//! Cross-currency basis HJM: instantaneous basis spreads `q^{k0,k3}`, spread
//! bonds and the foreign-collateral discount curves they induce.

use crate::curves::{dot, DriftScratch, ForwardSurface, VolatilitySpec};
use crate::driver::{Characteristics, DriverSpec};
use crate::error::{Error, Result};

/// `-(sc + sq) . grad Psi(-Sc - Sq) + sc . grad Psi(-Sc)`, scratch-based.
pub fn basis_drift_term(
    chars: &Characteristics,
    sig_c: &[f64],
    big_c: &[f64],
    sig_q: &[f64],
    big_q: &[f64],
    grad: &mut [f64],
    beta: &mut [f64],
) -> Result<f64> {
    for i in 0..beta.len() {
        beta[i] = -big_c[i] - big_q[i];
    }
    chars.psi_gradient_into(beta, grad)?;
    let mut out = 0.0;
    for i in 0..beta.len() {
        out -= (sig_c[i] + sig_q[i]) * grad[i];
    }
    for i in 0..beta.len() {
        beta[i] = -big_c[i];
    }
    chars.psi_gradient_into(beta, grad)?;
    Ok(out + dot(sig_c, grad))
}

/// Drift of the basis spread `q^{k0,k3}_t(T)` under `Q^{k0}`.
pub fn basis_drift(vol_c: &VolatilitySpec, vol_q: &VolatilitySpec, driver: &DriverSpec, t: f64, maturity: f64) -> Result<f64> {
    if maturity < t {
        return Err(Error::ReversedInterval { t, maturity });
    }
    let d = vol_c.dim();
    let mut c = DriftScratch::new(d);
    let mut q = DriftScratch::new(d);
    vol_c.sigma_into(t, maturity, &mut c.sigma);
    vol_c.integrated_into(t, maturity, &mut c.big);
    vol_q.sigma_into(t, maturity, &mut q.sigma);
    vol_q.integrated_into(t, maturity, &mut q.big);
    basis_drift_term(driver.chars_at(t), &c.sigma, &c.big, &q.sigma, &q.big, &mut c.grad, &mut c.beta)
}

/// Basis spread surface for the pair `(k0, k3)` along one path. The pair
/// `k3 = k0` carries no surface and is identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSurface {
    pub base: usize,
    pub collateral: usize,
    surface: Option<ForwardSurface>,
}

impl BasisSurface {
    pub fn new(base: usize, collateral: usize, surface: ForwardSurface) -> Result<Self> {
        if base == collateral {
            return Err(Error::InvalidSpec("the pair (k0, k0) has no basis surface".into()));
        }
        Ok(BasisSurface { base, collateral, surface: Some(surface) })
    }

    pub fn own(base: usize) -> Self {
        BasisSurface { base, collateral: base, surface: None }
    }

    pub fn surface(&self) -> Option<&ForwardSurface> {
        self.surface.as_ref()
    }

    pub fn surface_mut(&mut self) -> Option<&mut ForwardSurface> {
        self.surface.as_mut()
    }

    /// `q_t(t)`.
    pub fn short_spread(&self) -> f64 {
        self.surface.as_ref().map_or(0.0, |s| s.short_rate())
    }

    pub fn integral(&self, t: f64, maturity: f64) -> Result<f64> {
        match &self.surface {
            Some(s) => s.integral(t, maturity),
            None if maturity < t => Err(Error::ReversedInterval { t, maturity }),
            None => Ok(0.0),
        }
    }

    pub fn running_integral(&self) -> f64 {
        self.surface.as_ref().map_or(0.0, |s| s.running_integral())
    }
}

/// `Q^{k0,k3}(t, T)`.
pub fn spread_bond(basis: &BasisSurface, t: f64, maturity: f64) -> Result<f64> {
    Ok((-basis.integral(t, maturity)?).exp())
}

/// `B^{k0,k3}(t, T) = B^{k0,k0}(t, T) Q^{k0,k3}(t, T)`.
pub fn foreign_coll_bond(curve: &ForwardSurface, basis: &BasisSurface, t: f64, maturity: f64) -> Result<f64> {
    Ok(curve.bond_price(t, maturity)? * spread_bond(basis, t, maturity)?)
}

/// `exp(-int_t^T (f + q))` evaluated on the summed curve.
pub fn foreign_coll_bond_direct(curve: &ForwardSurface, basis: &BasisSurface, t: f64, maturity: f64) -> Result<f64> {
    Ok((-(curve.integral(t, maturity)? + basis.integral(t, maturity)?)).exp())
}

/// `B^{c,k0,k3}_t = exp(int_0^t (r^{c,k0} + q^{k0,k3}))`.
pub fn coll_account(curve: &ForwardSurface, basis: &BasisSurface) -> f64 {
    (curve.running_integral() + basis.running_integral()).exp()
}
