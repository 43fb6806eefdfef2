//! Reference markets used by the examples, the CLI defaults and the test
//! suites.

use nalgebra::{DMatrix, DVector};

use crate::curves::{InitialCurve, VolatilitySpec};
use crate::driver::{Characteristics, DriverSpec, JumpComponent, JumpSize, PiecewiseVector};
use crate::error::Result;
use crate::fx::FxSpec;
use crate::measures::MeasureId;
use crate::model::{BasisSpec, CurrencyCurve, MarketModel, SpreadFamily, BASE};

/// Options for [`usd_eur`].
#[derive(Debug, Clone, PartialEq)]
pub struct UsdEurOptions {
    /// Add symmetric two-point jumps to the rate and FX factors.
    pub jumps: bool,
    /// Use Hull-White (exponentially damped) curve volatilities.
    pub hull_white: bool,
    /// Scale applied to every volatility; `0` gives a deterministic market.
    pub vol_scale: f64,
}

impl Default for UsdEurOptions {
    fn default() -> Self {
        UsdEurOptions { jumps: false, hull_white: false, vol_scale: 1.0 }
    }
}

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

/// Three-factor USD/EUR market: USD rates, EUR rates and an FX/basis factor.
/// USD is the base. Two spread families with `delta^f = delta^p = 0.25`,
/// collateralized in USD and in EUR.
pub fn usd_eur(opts: &UsdEurOptions) -> Result<MarketModel> {
    let corr = DMatrix::from_row_slice(3, 3, &[1.0, 0.6, 0.2, 0.6, 1.0, -0.1, 0.2, -0.1, 1.0]);
    let mut chars = Characteristics::brownian(DVector::zeros(3), corr);
    if opts.jumps {
        chars.jumps.push(JumpComponent {
            intensity: 0.5,
            size: JumpSize::TwoPoint { up: 1.0, down: -1.0, p_up: 0.5 },
            loading: v(&[0.5, 0.0, 0.8]),
        });
    }
    let driver = DriverSpec::constant(MeasureId::Spot(BASE), chars)?;
    let s = opts.vol_scale;
    let curve_vol = |load: DVector<f64>, decay: f64| {
        if opts.hull_white {
            VolatilitySpec::hull_white(load * s, decay)
        } else {
            VolatilitySpec::constant(load * s)
        }
    };
    let usd = CurrencyCurve {
        name: "USD".into(),
        initial: InitialCurve::new(vec![0.0, 1.0, 5.0], vec![0.030, 0.032, 0.036])?,
        vol: curve_vol(v(&[0.010, 0.0, 0.0]), 0.10),
    };
    let eur = CurrencyCurve {
        name: "EUR".into(),
        initial: InitialCurve::new(vec![0.0, 1.0, 5.0], vec![0.020, 0.021, 0.025])?,
        vol: curve_vol(v(&[0.002, 0.008, 0.0]), 0.05),
    };
    let basis = BasisSpec {
        initial: InitialCurve::new(vec![0.0, 5.0], vec![-0.0020, -0.0030])?,
        vol: VolatilitySpec::constant(v(&[0.0, 0.0, 0.003]) * s),
    };
    let fx = FxSpec::new(BASE, 1, 1.10, PiecewiseVector::constant(v(&[0.02, -0.01, 0.08]) * s))?;
    let family = |name: &str, collateral: usize| SpreadFamily {
        name: name.into(),
        collateral,
        fix_adj: 0.25,
        pay_adj: 0.25,
        initial: InitialCurve::flat(0.0015),
        vol: VolatilitySpec::hull_white(v(&[0.003, 0.0, 0.002]) * s, 0.2),
    };
    MarketModel::new(
        driver,
        vec![usd, eur],
        vec![None, Some(basis)],
        vec![None, Some(fx)],
        InitialCurve::flat(0.005),
        vec![family("USD-3M|USD", BASE), family("USD-3M|EUR", 1)],
    )
}

/// Single-currency market with flat initial curve `rate` and one constant
/// or Hull-White volatility factor.
pub fn single_currency(rate: f64, sigma: f64, decay: Option<f64>) -> Result<MarketModel> {
    let driver = DriverSpec::constant(MeasureId::Spot(BASE), Characteristics::brownian(v(&[0.0]), DMatrix::identity(1, 1)))?;
    let vol = match decay {
        Some(a) => VolatilitySpec::hull_white(v(&[sigma]), a),
        None => VolatilitySpec::constant(v(&[sigma])),
    };
    let usd = CurrencyCurve { name: "USD".into(), initial: InitialCurve::flat(rate), vol };
    MarketModel::new(driver, vec![usd], vec![None], vec![None], InitialCurve::flat(0.0), Vec::new())
}

/// Options for [`flat_pair`].
#[derive(Debug, Clone, PartialEq)]
pub struct FlatPairOptions {
    pub base_rate: f64,
    pub foreign_rate: f64,
    /// Flat basis `q^{k0,k}`.
    pub basis: f64,
    pub fx_spot: f64,
    pub curve_vol: f64,
    pub basis_vol: f64,
    pub fx_vol: f64,
    pub unsecured_spread: f64,
    /// Flat `h` of a base-collateralized family fixing at the period start
    /// with `delta^p = 0.25`.
    pub ibor_spread: Option<f64>,
}

impl Default for FlatPairOptions {
    fn default() -> Self {
        FlatPairOptions {
            base_rate: 0.03,
            foreign_rate: 0.02,
            basis: -0.002,
            fx_spot: 1.1,
            curve_vol: 0.0,
            basis_vol: 0.0,
            fx_vol: 0.0,
            unsecured_spread: 0.0,
            ibor_spread: None,
        }
    }
}

/// Two currencies with flat initial curves and one independent Brownian
/// factor each for the base curve, the foreign curve and basis/FX.
pub fn flat_pair(opts: &FlatPairOptions) -> Result<MarketModel> {
    let driver = DriverSpec::constant(MeasureId::Spot(BASE), Characteristics::brownian(DVector::zeros(3), DMatrix::identity(3, 3)))?;
    let s = opts.curve_vol;
    let base = CurrencyCurve {
        name: "USD".into(),
        initial: InitialCurve::flat(opts.base_rate),
        vol: VolatilitySpec::constant(v(&[s, 0.0, 0.0])),
    };
    let foreign = CurrencyCurve {
        name: "EUR".into(),
        initial: InitialCurve::flat(opts.foreign_rate),
        vol: VolatilitySpec::constant(v(&[0.3 * s, s, 0.0])),
    };
    let basis = BasisSpec { initial: InitialCurve::flat(opts.basis), vol: VolatilitySpec::constant(v(&[0.0, 0.0, opts.basis_vol])) };
    let fx = FxSpec::new(BASE, 1, opts.fx_spot, PiecewiseVector::constant(v(&[0.0, 0.0, opts.fx_vol])))?;
    let families = match opts.ibor_spread {
        Some(h) => vec![SpreadFamily {
            name: "USD-IBOR".into(),
            collateral: BASE,
            fix_adj: 0.0,
            pay_adj: 0.25,
            initial: InitialCurve::flat(h),
            vol: VolatilitySpec::hull_white(v(&[0.5 * s, 0.0, 0.0]), 0.2),
        }],
        None => Vec::new(),
    };
    MarketModel::new(
        driver,
        vec![base, foreign],
        vec![None, Some(basis)],
        vec![None, Some(fx)],
        InitialCurve::flat(opts.unsecured_spread),
        families,
    )
}
