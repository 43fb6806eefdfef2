//! Closed-form log-normal bond laws for Brownian drivers.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use nalgebra::DVector;

use crate::curves::InitialCurve;
use crate::error::{Error, Result};
use crate::model::{MarketModel, SurfaceId, BASE};

/// Law of `log P(t,T)` with `P = exp(-int_t^T x_t(u) du)` under a spot measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBond {
    pub mean_log: f64,
    pub var_log: f64,
}

impl GaussianBond {
    pub fn mean_price(&self) -> f64 {
        (self.mean_log + 0.5 * self.var_log).exp()
    }
}

fn psi(b: &DVector<f64>, c: &nalgebra::DMatrix<f64>, beta: &DVector<f64>) -> f64 {
    beta.dot(b) + 0.5 * beta.dot(&(c * beta))
}

fn linear_integral(curve: &InitialCurve, a: f64, b: f64) -> f64 {
    let mut pts: Vec<f64> = curve.pillars().iter().copied().filter(|p| *p > a && *p < b).collect();
    pts.insert(0, a);
    pts.push(b);
    pts.windows(2).map(|w| 0.5 * (curve.value(w[0]) + curve.value(w[1])) * (w[1] - w[0])).sum()
}

/// Gaussian law of `log P(t,T)` for a curve or basis surface when `X` is
/// simulated under the spot measure of currency `measure`.
pub fn gaussian_oracle(model: &MarketModel, surface: SurfaceId, measure: usize, t: f64, maturity: f64) -> Result<GaussianBond> {
    if model.driver.has_jumps() {
        return Err(Error::InvalidSpec("the Gaussian oracle needs a Brownian driver".into()));
    }
    if maturity < t || t < 0.0 {
        return Err(Error::ReversedInterval { t, maturity });
    }
    if matches!(surface, SurfaceId::Spread(_)) {
        return Err(Error::InvalidSpec("spread surfaces are not covered by the Gaussian oracle".into()));
    }
    let d = model.driver.dim();
    let drift_under = |k: usize, s: f64| -> DVector<f64> {
        let ch = model.driver.chars_at(s);
        match model.fx_spec(k) {
            Some(fx) if k != BASE => &ch.drift + &ch.diffusion * fx.vol.at(s),
            _ => ch.drift.clone(),
        }
    };
    let big = |sid: SurfaceId, s: f64, u: f64| -> DVector<f64> {
        let mut out = vec![0.0; d];
        model.vol(sid).integrated_into(s, u, &mut out);
        DVector::from_vec(out)
    };
    let own = |s: f64, u: f64| -> f64 {
        let c = &model.driver.chars_at(s).diffusion;
        match surface {
            SurfaceId::Curve(k) => psi(&drift_under(k, s), c, &(-big(surface, s, u))),
            _ => {
                let b0 = drift_under(BASE, s);
                let sc = big(SurfaceId::Curve(BASE), s, u);
                let sq = big(surface, s, u);
                psi(&b0, c, &(-(&sc + &sq))) - psi(&b0, c, &(-sc))
            }
        }
    };
    let integrand = |s: f64| -> (f64, f64) {
        let ch = model.driver.chars_at(s);
        let dsig = big(surface, s, maturity) - big(surface, s, t);
        let drift_part = own(s, maturity) - own(s, t);
        let mean = -drift_part - dsig.dot(&drift_under(measure, s));
        let var = dsig.dot(&(&ch.diffusion * &dsig));
        (mean, var)
    };
    let rule = GaussLegendre::new(NonZeroUsize::new(24).expect("nonzero degree"));
    let mut pts: Vec<f64> = vec![0.0, t];
    pts.extend(model.driver.starts().iter().copied().filter(|x| *x > 0.0 && *x < t));
    if let Some(fx) = model.fx_spec(measure) {
        pts.extend(fx.vol.starts().iter().copied().filter(|x| *x > 0.0 && *x < t));
    }
    for x in model.vol(surface).time_breaks().into_iter().chain(model.vol(SurfaceId::Curve(BASE)).time_breaks()) {
        if x > 0.0 && x < t {
            pts.push(x);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let (mut mean, mut var) = (0.0, 0.0);
    for w in pts.windows(2) {
        let pieces = ((w[1] - w[0]) / 0.25).ceil().max(1.0) as usize;
        let h = (w[1] - w[0]) / pieces as f64;
        for p in 0..pieces {
            let a = w[0] + p as f64 * h;
            mean += rule.integrate(a, a + h, |s| integrand(s).0);
            var += rule.integrate(a, a + h, |s| integrand(s).1);
        }
    }
    Ok(GaussianBond { mean_log: mean - linear_integral(model.initial(surface), t, maturity), var_log: var })
}
