//! Cross-currency multiple-curve HJM simulation and pricing.
//!
//! The driver `X` is an Ito semimartingale with deterministic, piecewise
//! constant characteristics. Collateral curves, cross-currency basis curves
//! and multiplicative index spreads are HJM surfaces driven by `X`, with
//! drifts fixed by no-arbitrage. FX rates follow from the collateral and
//! basis accounts and a stochastic exponential of `X`.

pub mod basis;
pub mod curves;
pub mod driver;
pub mod engine;
pub mod error;
pub mod fx;
pub mod grid;
pub mod indices;
pub mod measures;
pub mod model;
pub mod presets;
pub mod pricing;
pub mod rng;
pub mod stats;

pub use driver::{Characteristics, DriverSpec, JumpComponent, JumpSize, PiecewiseVector};
pub use curves::{InitialCurve, VolTerm, VolatilitySpec};
pub use engine::{simulate, PathView, SimResult, SimulationConfig};
pub use error::{Error, Result};
pub use fx::FxSpec;
pub use measures::MeasureId;
pub use model::{BasisSpec, CurrencyCurve, MarketModel, SpreadFamily, SurfaceId};
