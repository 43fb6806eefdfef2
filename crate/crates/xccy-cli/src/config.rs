//! Scenario configuration: a TOML document with `market`, `simulation`,
//! `instruments`, `checks` and `output` tables. Unknown keys are errors.
//! The full schema is documented in the book chapter on configuration.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use xccy_hjm::engine::Check;
use xccy_hjm::pricing::{LegIndex, LegSide, SwapLeg, SwapSpec, ZcbCase};
use xccy_hjm::{
    BasisSpec, Characteristics, CurrencyCurve, DriverSpec, FxSpec, InitialCurve, JumpComponent, JumpSize, MarketModel,
    MeasureId, PiecewiseVector, SimulationConfig, SpreadFamily, VolTerm, VolatilitySpec,
};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub market: MarketConfig,
    pub simulation: SimulationBlock,
    #[serde(default)]
    pub instruments: InstrumentsBlock,
    #[serde(default)]
    pub checks: ChecksBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub driver: DriverConfig,
    /// The first entry is the base currency.
    pub currencies: Vec<CurrencyConfig>,
    #[serde(default)]
    pub basis: Vec<BasisConfig>,
    #[serde(default)]
    pub fx: Vec<FxConfig>,
    /// Deterministic unsecured gap `qbar(T)`; zero when absent.
    #[serde(default)]
    pub unsecured_spread: Option<CurveConfig>,
    #[serde(default)]
    pub indices: Vec<IndexConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriverConfig {
    pub dim: usize,
    #[serde(default)]
    pub drift: Option<Vec<f64>>,
    /// Row-major covariance rate matrix; identity when absent.
    #[serde(default)]
    pub covariance: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub jumps: Vec<JumpConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpConfig {
    pub intensity: f64,
    pub loading: Vec<f64>,
    pub size: JumpSizeConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpSizeConfig {
    TwoPoint { up: f64, down: f64, p_up: f64 },
    Gaussian { mean: f64, std: f64 },
}

/// Either `flat = r` or matching `pillars` and `values`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    #[serde(default)]
    pub flat: Option<f64>,
    #[serde(default)]
    pub pillars: Option<Vec<f64>>,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VolTermConfig {
    Constant { loading: Vec<f64> },
    Exponential { loading: Vec<f64>, decay: f64 },
    Piecewise { time_breaks: Vec<f64>, maturity_breaks: Vec<f64>, loadings: Vec<Vec<Vec<f64>>> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurrencyConfig {
    pub name: String,
    pub curve: CurveConfig,
    #[serde(default)]
    pub vol: Vec<VolTermConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub currency: String,
    pub curve: CurveConfig,
    #[serde(default)]
    pub vol: Vec<VolTermConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FxConfig {
    pub currency: String,
    /// Units of base currency per unit of `currency`.
    pub spot: f64,
    pub vol: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexConfig {
    pub name: String,
    pub collateral: String,
    pub fix_adj: f64,
    pub pay_adj: f64,
    pub curve: CurveConfig,
    #[serde(default)]
    pub vol: Vec<VolTermConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationBlock {
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub antithetic: bool,
    /// Currency whose spot measure drives the simulation; base when absent.
    #[serde(default)]
    pub measure: Option<String>,
    #[serde(default)]
    pub observe: Vec<f64>,
}

fn default_dt() -> f64 {
    1.0 / 96.0
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentsBlock {
    #[serde(default)]
    pub zcb: Vec<ZcbConfig>,
    #[serde(default)]
    pub swap: Vec<SwapConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteConfig {
    #[default]
    ClosedForm,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZcbCaseConfig {
    K0k0,
    K0k3,
    K2k0,
    K2k2,
    Unsecured,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZcbConfig {
    pub id: String,
    pub case: ZcbCaseConfig,
    /// Collateral currency for `k0k3`, paying currency for `k2k0` and `k2k2`.
    #[serde(default)]
    pub currency: Option<String>,
    pub maturity: f64,
    #[serde(default)]
    pub route: RouteConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegConfig {
    pub currency: String,
    /// Explicit dates `t_0 < ... < t_N`, or `start`, `end` and `period`.
    #[serde(default)]
    pub schedule: Option<Vec<f64>>,
    #[serde(default)]
    pub start: Option<f64>,
    #[serde(default)]
    pub end: Option<f64>,
    #[serde(default)]
    pub period: Option<f64>,
    pub notional: f64,
    #[serde(default)]
    pub spread: f64,
    /// `fixed`, `compounded` or the name of a market index.
    #[serde(default = "default_index")]
    pub index: String,
    #[serde(default)]
    pub reset: bool,
}

fn default_index() -> String {
    "fixed".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideConfig {
    Domestic,
    Foreign,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwapConfig {
    pub id: String,
    pub collateral: String,
    /// `+1` receives the domestic leg, `-1` pays it.
    #[serde(default = "default_direction")]
    pub direction: f64,
    #[serde(default)]
    pub route: RouteConfig,
    /// Also solve for the spread on this leg that zeroes the value.
    #[serde(default)]
    pub fair_spread: Option<SideConfig>,
    pub domestic: LegConfig,
    pub foreign: LegConfig,
}

fn default_direction() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksBlock {
    #[serde(default = "default_z_limit")]
    pub z_limit: f64,
    #[serde(default)]
    pub martingale: Vec<CheckConfig>,
}

impl Default for ChecksBlock {
    fn default() -> Self {
        ChecksBlock { z_limit: default_z_limit(), martingale: Vec::new() }
    }
}

fn default_z_limit() -> f64 {
    3.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckConfig {
    DiscountedBond { collateral: String, maturity: f64 },
    SpreadBond { currency: String, maturity: f64 },
    Fx { currency: String },
    ForeignBond { currency: String, maturity: f64 },
    IndexSpread { index: String, fixing: f64 },
    IndexForward { index: String, fixing: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    /// Relative to the working directory; `--out-dir` overrides it.
    #[serde(default = "default_dir")]
    pub dir: String,
    /// Number of paths written by `simulate`; all paths when absent.
    #[serde(default)]
    pub export_paths: Option<usize>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { dir: default_dir(), export_paths: None }
    }
}

fn default_dir() -> String {
    "out".into()
}

/// Parse a configuration document. Syntax and schema errors carry the line
/// and the offending key from the TOML parser.
pub fn parse(text: &str) -> Result<ScenarioConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

pub fn load(path: &Path) -> Result<(ScenarioConfig, Vec<u8>), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|_| CliError::Config(format!("{} is not UTF-8", path.display())))?;
    Ok((parse(text)?, bytes))
}

fn bad(field: impl Into<String>, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{}: {msg}", field.into()))
}

fn model_err(field: &str) -> impl Fn(xccy_hjm::Error) -> CliError + '_ {
    move |e| bad(field, e)
}

/// Names resolved against the market block.
pub struct Resolver {
    currencies: HashMap<String, usize>,
    indices: HashMap<String, usize>,
}

impl Resolver {
    pub fn new(market: &MarketConfig) -> Self {
        Resolver {
            currencies: market.currencies.iter().enumerate().map(|(i, c)| (c.name.clone(), i)).collect(),
            indices: market.indices.iter().enumerate().map(|(i, c)| (c.name.clone(), i)).collect(),
        }
    }

    pub fn currency(&self, field: &str, name: &str) -> Result<usize, CliError> {
        self.currencies.get(name).copied().ok_or_else(|| bad(field, format!("unknown currency `{name}`")))
    }

    pub fn index(&self, field: &str, name: &str) -> Result<usize, CliError> {
        self.indices.get(name).copied().ok_or_else(|| bad(field, format!("unknown index `{name}`")))
    }
}

fn vector(field: &str, v: &[f64], dim: usize) -> Result<DVector<f64>, CliError> {
    if v.len() != dim {
        return Err(bad(field, format!("expected {dim} entries, found {}", v.len())));
    }
    Ok(DVector::from_column_slice(v))
}

impl CurveConfig {
    pub fn build(&self, field: &str) -> Result<InitialCurve, CliError> {
        match (self.flat, &self.pillars, &self.values) {
            (Some(r), None, None) => Ok(InitialCurve::flat(r)),
            (None, Some(p), Some(v)) => InitialCurve::new(p.clone(), v.clone()).map_err(model_err(field)),
            _ => Err(bad(field, "give either `flat` or both `pillars` and `values`")),
        }
    }
}

fn build_vol(field: &str, terms: &[VolTermConfig], dim: usize) -> Result<VolatilitySpec, CliError> {
    let mut out = Vec::with_capacity(terms.len());
    for (i, t) in terms.iter().enumerate() {
        let f = format!("{field}[{i}]");
        out.push(match t {
            VolTermConfig::Constant { loading } => VolTerm::Constant { loading: vector(&f, loading, dim)? },
            VolTermConfig::Exponential { loading, decay } => {
                VolTerm::Exponential { loading: vector(&f, loading, dim)?, decay: *decay }
            }
            VolTermConfig::Piecewise { time_breaks, maturity_breaks, loadings } => VolTerm::Piecewise {
                time_breaks: time_breaks.clone(),
                maturity_breaks: maturity_breaks.clone(),
                loadings: loadings
                    .iter()
                    .map(|row| row.iter().map(|v| vector(&f, v, dim)).collect::<Result<Vec<_>, _>>())
                    .collect::<Result<Vec<_>, _>>()?,
            },
        });
    }
    VolatilitySpec::new(dim, out).map_err(model_err(field))
}

impl DriverConfig {
    fn build(&self) -> Result<DriverSpec, CliError> {
        let d = self.dim;
        if d == 0 {
            return Err(bad("market.driver.dim", "must be positive"));
        }
        let drift = match &self.drift {
            Some(b) => vector("market.driver.drift", b, d)?,
            None => DVector::zeros(d),
        };
        let cov = match &self.covariance {
            Some(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(bad("market.driver.covariance", format!("expected a {d}x{d} matrix")));
                }
                DMatrix::from_fn(d, d, |i, j| rows[i][j])
            }
            None => DMatrix::identity(d, d),
        };
        let mut chars = Characteristics::brownian(drift, cov);
        for (i, j) in self.jumps.iter().enumerate() {
            let size = match j.size {
                JumpSizeConfig::TwoPoint { up, down, p_up } => JumpSize::TwoPoint { up, down, p_up },
                JumpSizeConfig::Gaussian { mean, std } => JumpSize::Gaussian { mean, std },
            };
            let loading = vector(&format!("market.driver.jumps[{i}].loading"), &j.loading, d)?;
            chars.jumps.push(JumpComponent { intensity: j.intensity, size, loading });
        }
        DriverSpec::constant(MeasureId::Spot(xccy_hjm::model::BASE), chars).map_err(model_err("market.driver"))
    }
}

impl MarketConfig {
    pub fn build(&self) -> Result<MarketModel, CliError> {
        let names = Resolver::new(self);
        if names.currencies.len() != self.currencies.len() {
            return Err(bad("market.currencies", "currency names must be unique"));
        }
        if names.indices.len() != self.indices.len() {
            return Err(bad("market.indices", "index names must be unique"));
        }
        let driver = self.driver.build()?;
        let d = self.driver.dim;
        let n = self.currencies.len();
        let mut currencies = Vec::with_capacity(n);
        for (i, c) in self.currencies.iter().enumerate() {
            let f = format!("market.currencies[{i}]");
            currencies.push(CurrencyCurve {
                name: c.name.clone(),
                initial: c.curve.build(&format!("{f}.curve"))?,
                vol: build_vol(&format!("{f}.vol"), &c.vol, d)?,
            });
        }
        let mut basis = vec![None; n];
        for (i, b) in self.basis.iter().enumerate() {
            let f = format!("market.basis[{i}]");
            let k = names.currency(&format!("{f}.currency"), &b.currency)?;
            if basis[k].is_some() {
                return Err(bad(&f, format!("duplicate basis for `{}`", b.currency)));
            }
            basis[k] = Some(BasisSpec {
                initial: b.curve.build(&format!("{f}.curve"))?,
                vol: build_vol(&format!("{f}.vol"), &b.vol, d)?,
            });
        }
        let mut fx = vec![None; n];
        for (i, x) in self.fx.iter().enumerate() {
            let f = format!("market.fx[{i}]");
            let k = names.currency(&format!("{f}.currency"), &x.currency)?;
            if fx[k].is_some() {
                return Err(bad(&f, format!("duplicate FX for `{}`", x.currency)));
            }
            let vol = PiecewiseVector::constant(vector(&format!("{f}.vol"), &x.vol, d)?);
            fx[k] = Some(FxSpec::new(xccy_hjm::model::BASE, k, x.spot, vol).map_err(model_err(&f))?);
        }
        if let Some(k) = (1..n).find(|k| fx[*k].is_none()) {
            return Err(bad("market.fx", format!("missing FX for `{}`", self.currencies[k].name)));
        }
        let unsecured = match &self.unsecured_spread {
            Some(c) => c.build("market.unsecured_spread")?,
            None => InitialCurve::flat(0.0),
        };
        let mut families = Vec::with_capacity(self.indices.len());
        for (i, x) in self.indices.iter().enumerate() {
            let f = format!("market.indices[{i}]");
            families.push(SpreadFamily {
                name: x.name.clone(),
                collateral: names.currency(&format!("{f}.collateral"), &x.collateral)?,
                fix_adj: x.fix_adj,
                pay_adj: x.pay_adj,
                initial: x.curve.build(&format!("{f}.curve"))?,
                vol: build_vol(&format!("{f}.vol"), &x.vol, d)?,
            });
        }
        MarketModel::new(driver, currencies, basis, fx, unsecured, families).map_err(model_err("market"))
    }
}

impl SimulationBlock {
    pub fn build(&self, names: &Resolver) -> Result<SimulationConfig, CliError> {
        let mut cfg = SimulationConfig::new(self.horizon, self.dt, self.paths, self.seed)
            .with_antithetic(self.antithetic)
            .with_observations(self.observe.iter().copied());
        if let Some(m) = &self.measure {
            cfg = cfg.with_measure(names.currency("simulation.measure", m)?);
        }
        Ok(cfg)
    }
}

impl ZcbConfig {
    pub fn case(&self, field: &str, names: &Resolver) -> Result<ZcbCase, CliError> {
        let other = || match &self.currency {
            Some(c) => names.currency(&format!("{field}.currency"), c),
            None => Err(bad(field, "this case needs `currency`")),
        };
        Ok(match self.case {
            ZcbCaseConfig::K0k0 => ZcbCase::K0K0,
            ZcbCaseConfig::K0k3 => ZcbCase::K0K3(other()?),
            ZcbCaseConfig::K2k0 => ZcbCase::K2K0(other()?),
            ZcbCaseConfig::K2k2 => ZcbCase::K2K2(other()?),
            ZcbCaseConfig::Unsecured => ZcbCase::Unsecured,
        })
    }
}

impl LegConfig {
    fn schedule(&self, field: &str) -> Result<Vec<f64>, CliError> {
        match (&self.schedule, self.start, self.end, self.period) {
            (Some(s), None, None, None) => Ok(s.clone()),
            (None, Some(a), Some(b), Some(p)) => {
                if !(p > 0.0) || !(b > a) {
                    return Err(bad(field, "need start < end and a positive period"));
                }
                let n = ((b - a) / p).round() as usize;
                if n == 0 || ((a + n as f64 * p) - b).abs() > 1e-9 {
                    return Err(bad(field, "end - start must be a whole number of periods"));
                }
                let mut s: Vec<f64> = (0..n).map(|i| a + i as f64 * p).collect();
                s.push(b);
                Ok(s)
            }
            _ => Err(bad(field, "give either `schedule` or all of `start`, `end` and `period`")),
        }
    }

    fn build(&self, field: &str, names: &Resolver) -> Result<SwapLeg, CliError> {
        let index = match self.index.as_str() {
            "fixed" => LegIndex::Zero,
            "compounded" => LegIndex::Compounded,
            other => LegIndex::Family(names.index(&format!("{field}.index"), other)?),
        };
        let currency = names.currency(&format!("{field}.currency"), &self.currency)?;
        Ok(SwapLeg::new(currency, self.schedule(field)?, self.notional, index).with_spread(self.spread).with_reset(self.reset))
    }
}

impl SwapConfig {
    pub fn build(&self, field: &str, names: &Resolver, model: &MarketModel) -> Result<SwapSpec, CliError> {
        let spec = SwapSpec {
            domestic: self.domestic.build(&format!("{field}.domestic"), names)?,
            foreign: self.foreign.build(&format!("{field}.foreign"), names)?,
            direction: self.direction,
            collateral: names.currency(&format!("{field}.collateral"), &self.collateral)?,
        };
        spec.check(model).map_err(model_err(field))?;
        if self.route == RouteConfig::ClosedForm && (spec.domestic.reset || spec.foreign.reset) {
            return Err(bad(field, "resetting swaps need route = \"monte_carlo\""));
        }
        Ok(spec)
    }

    pub fn side(&self) -> Option<LegSide> {
        self.fair_spread.map(|s| match s {
            SideConfig::Domestic => LegSide::Domestic,
            SideConfig::Foreign => LegSide::Foreign,
        })
    }
}

impl CheckConfig {
    pub fn build(&self, field: &str, names: &Resolver) -> Result<Check, CliError> {
        let cur = |c: &str| names.currency(&format!("{field}.currency"), c);
        let idx = |c: &str| names.index(&format!("{field}.index"), c);
        Ok(match self {
            CheckConfig::DiscountedBond { collateral, maturity } => Check::DiscountedBond {
                collateral: names.currency(&format!("{field}.collateral"), collateral)?,
                maturity: *maturity,
            },
            CheckConfig::SpreadBond { currency, maturity } => Check::SpreadBond { currency: cur(currency)?, maturity: *maturity },
            CheckConfig::Fx { currency } => Check::Fx { currency: cur(currency)? },
            CheckConfig::ForeignBond { currency, maturity } => Check::ForeignBond { currency: cur(currency)?, maturity: *maturity },
            CheckConfig::IndexSpread { index, fixing } => Check::IndexSpread { family: idx(index)?, fixing: *fixing },
            CheckConfig::IndexForward { index, fixing } => Check::IndexForward { family: idx(index)?, fixing: *fixing },
        })
    }
}
