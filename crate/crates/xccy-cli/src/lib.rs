//! Batch front end for the cross-currency HJM engine: `simulate`, `price`
//! and `verify` commands driven by a TOML scenario file, with CSV outputs
//! and a JSON manifest of digests.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;
use xccy_hjm::engine::martingale_report;
use xccy_hjm::model::BASE;
use xccy_hjm::pricing::{fair_spread, price_ccs, price_swap_mc, price_zcb, price_zcb_dual, Route};
use xccy_hjm::{simulate, MarketModel, SimResult, SimulationConfig, SurfaceId};

pub mod config;
pub mod output;

use config::{Resolver, RouteConfig, ScenarioConfig};
use output::{num, Manifest, Table};

/// Failures, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Verification(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Price,
    Verify,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Price => "price",
            Command::Verify => "verify",
        }
    }
}

/// Command-line overrides of the configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub out_dir: Option<PathBuf>,
    /// Test hook: scales every simulated drift.
    pub drift_scale: Option<f64>,
}

/// What a successful or failed command produced.
#[derive(Debug, Clone)]
pub struct Report {
    /// Human-readable summary lines.
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
}

fn runtime(e: xccy_hjm::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Load the config at `path` and run `cmd`. Verification failures still
/// write their outputs before returning [`CliError::Verification`].
pub fn run(cmd: Command, path: &Path, ov: &Overrides) -> Result<Report, CliError> {
    let (cfg, raw) = config::load(path)?;
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    run_config(cmd, &cfg, &raw, &name, ov)
}

pub fn run_config(cmd: Command, cfg: &ScenarioConfig, raw: &[u8], name: &str, ov: &Overrides) -> Result<Report, CliError> {
    let model = Arc::new(cfg.market.build()?);
    let names = Resolver::new(&cfg.market);
    let mut sim = cfg.simulation.build(&names)?;
    if let Some(s) = ov.seed {
        sim.seed = s;
    }
    if let Some(p) = ov.paths {
        sim.paths = p;
    }
    if let Some(d) = ov.drift_scale {
        sim.drift_scale = d;
    }
    let out_dir = ov.out_dir.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out_dir.display())))?;
    let mut manifest = Manifest::new(cmd.name(), name, raw, &sim);
    let (lines, verdict) = match cmd {
        Command::Simulate => (cmd_simulate(cfg, &model, &sim, &out_dir, &mut manifest)?, Ok(())),
        Command::Price => (cmd_price(cfg, &names, &model, sim, &out_dir, &mut manifest)?, Ok(())),
        Command::Verify => cmd_verify(cfg, &names, &model, &sim, &out_dir, &mut manifest)?,
    };
    let files = manifest.write(&out_dir)?;
    verdict?;
    Ok(Report { lines, files })
}

fn run_simulation(model: &Arc<MarketModel>, sim: &SimulationConfig) -> Result<SimResult, CliError> {
    simulate(Arc::clone(model), sim).map_err(|e| match e {
        xccy_hjm::Error::InvalidGrid(_)
        | xccy_hjm::Error::EmptyGrid
        | xccy_hjm::Error::InvalidSpec(_)
        | xccy_hjm::Error::AdmissibilityViolation(_)
        | xccy_hjm::Error::ExponentialMomentUnbounded(_) => CliError::Config(format!("simulation: {e}")),
        other => runtime(other),
    })
}

pub fn surface_name(model: &MarketModel, s: SurfaceId) -> String {
    match s {
        SurfaceId::Curve(k) => format!("curve[{}]", model.currencies[k].name),
        SurfaceId::Basis(k) => format!("basis[{}]", model.currencies[k].name),
        SurfaceId::Spread(i) => format!("spread[{}]", model.spreads[i].name),
    }
}

/// Long-format export `(path_id, t, quantity, value)` of short rates,
/// log accounts, FX rates and horizon bonds at every observation time.
pub fn export_rows(res: &SimResult, paths: usize) -> Result<Table, CliError> {
    let model = res.model();
    let h = res.grid().horizon();
    let cur = |k: usize| model.currencies[k].name.clone();
    let mut t = Table::new(&["path_id", "t", "quantity", "value"]);
    for p in 0..paths.min(res.paths()) {
        let v = res.path(p);
        for &time in &res.observation_times() {
            let mut row = |q: String, x: f64| t.push(vec![p.to_string(), num(time), q, num(x)]);
            for s in model.surfaces() {
                if let SurfaceId::Spread(i) = s {
                    if time < model.spreads[i].fix_adj {
                        continue;
                    }
                }
                let name = surface_name(model, s);
                row(format!("short_rate:{name}"), v.short_rate(s, time).map_err(runtime)?);
                row(format!("log_account:{name}"), v.log_account(s, time).map_err(runtime)?);
            }
            for k in 0..model.n_currencies() {
                row(format!("bond[{}|{}]({h})", cur(k), cur(k)), v.bond(k, k, time, h).map_err(runtime)?);
                if k != BASE {
                    row(format!("bond[{}|{}]({h})", cur(BASE), cur(k)), v.bond(BASE, k, time, h).map_err(runtime)?);
                    row(format!("fx[{}/{}]", cur(BASE), cur(k)), v.fx(BASE, k, time).map_err(runtime)?);
                }
            }
        }
    }
    Ok(t)
}

fn cmd_simulate(
    cfg: &ScenarioConfig,
    model: &Arc<MarketModel>,
    sim: &SimulationConfig,
    dir: &Path,
    manifest: &mut Manifest,
) -> Result<Vec<String>, CliError> {
    let res = run_simulation(model, sim)?;
    manifest.set_engine_hash(&res.provenance().config_hash);
    let n = cfg.output.export_paths.unwrap_or(res.paths());
    let table = export_rows(&res, n)?;
    let rows = table.len();
    manifest.add(dir, "simulation.csv", table.to_bytes()?)?;
    Ok(vec![format!("simulated {} paths, {} steps; wrote {rows} rows", res.paths(), res.grid().steps())])
}

fn cmd_price(
    cfg: &ScenarioConfig,
    names: &Resolver,
    model: &Arc<MarketModel>,
    mut sim: SimulationConfig,
    dir: &Path,
    manifest: &mut Manifest,
) -> Result<Vec<String>, CliError> {
    let inst = &cfg.instruments;
    if inst.zcb.is_empty() && inst.swap.is_empty() {
        return Err(CliError::Config("instruments: nothing to price".into()));
    }
    let mut zcbs = Vec::new();
    for (i, z) in inst.zcb.iter().enumerate() {
        let f = format!("instruments.zcb[{i}]");
        if !(z.maturity >= 0.0 && z.maturity <= sim.horizon) {
            return Err(CliError::Config(format!("{f}.maturity: must lie in [0, simulation.horizon]")));
        }
        zcbs.push(z.case(&f, names)?);
        sim.observe.push(z.maturity);
    }
    let mut swaps = Vec::new();
    for (i, s) in inst.swap.iter().enumerate() {
        let f = format!("instruments.swap[{i}]");
        let spec = s.build(&f, names, model)?;
        let times = spec.observation_times(model);
        if times.iter().any(|t| *t > sim.horizon + 1e-12) {
            return Err(CliError::Config(format!("{f}: schedule runs past simulation.horizon")));
        }
        sim.observe.extend(times);
        swaps.push(spec);
    }
    let needs_mc = inst.zcb.iter().map(|z| z.route).chain(inst.swap.iter().map(|s| s.route)).any(|r| r == RouteConfig::MonteCarlo);
    if !needs_mc {
        // Closed-form values read only the initial state.
        sim.paths = 1;
    }
    let res = run_simulation(model, &sim)?;
    manifest.set_engine_hash(&res.provenance().config_hash);
    let init = res.initial();
    let mut t = Table::new(&["instrument_id", "t", "value", "std_error", "leg_k0", "leg_k", "fair_spread"]);
    for (z, case) in inst.zcb.iter().zip(&zcbs) {
        let (v, se) = match z.route {
            RouteConfig::ClosedForm => (price_zcb(&init, *case, 0.0, z.maturity).map_err(runtime)?, 0.0),
            RouteConfig::MonteCarlo => {
                let e = price_zcb_dual(&res, *case, z.maturity).map_err(runtime)?;
                (e.value, e.std_error)
            }
        };
        t.push(vec![z.id.clone(), num(0.0), num(v), num(se), String::new(), String::new(), String::new()]);
    }
    for (s, spec) in inst.swap.iter().zip(&swaps) {
        let value = match s.route {
            RouteConfig::ClosedForm => price_ccs(&init, spec, 0.0),
            RouteConfig::MonteCarlo => price_swap_mc(&res, spec),
        }
        .map_err(runtime)?;
        let fair = match s.side() {
            Some(side) => {
                let route = match s.route {
                    RouteConfig::ClosedForm => Route::ClosedForm,
                    RouteConfig::MonteCarlo => Route::MonteCarlo,
                };
                Some(fair_spread(&res, spec, side, route).map_err(runtime)?)
            }
            None => None,
        };
        let fs = fair.map(|f| num(f.spread)).unwrap_or_default();
        t.push(vec![s.id.clone(), num(0.0), num(value.value), num(value.std_error), num(value.domestic), num(value.foreign), fs.clone()]);
        if let Some(f) = fair {
            t.push(vec![format!("{}:fair_spread", s.id), num(0.0), num(f.spread), num(f.std_error), String::new(), String::new(), fs]);
        }
    }
    let rows = t.len();
    manifest.add(dir, "pricing.csv", t.to_bytes()?)?;
    Ok(vec![format!("priced {rows} rows on {} paths", res.paths())])
}

fn cmd_verify(
    cfg: &ScenarioConfig,
    names: &Resolver,
    model: &Arc<MarketModel>,
    sim: &SimulationConfig,
    dir: &Path,
    manifest: &mut Manifest,
) -> Result<(Vec<String>, Result<(), CliError>), CliError> {
    if cfg.checks.martingale.is_empty() {
        return Err(CliError::Config("checks.martingale: no checks configured".into()));
    }
    let checks = cfg
        .checks
        .martingale
        .iter()
        .enumerate()
        .map(|(i, c)| c.build(&format!("checks.martingale[{i}]"), names))
        .collect::<Result<Vec<_>, _>>()?;
    let mut sim = sim.clone();
    let extra: Vec<f64> = checks.iter().flat_map(|c| c.required_times(model)).filter(|t| *t <= sim.horizon + 1e-12).collect();
    sim.observe.extend(extra);
    let res = run_simulation(model, &sim)?;
    manifest.set_engine_hash(&res.provenance().config_hash);
    let rows = martingale_report(&res, &checks).map_err(runtime)?;
    let limit = cfg.checks.z_limit;
    let mut t = Table::new(&["check", "t", "target", "estimate", "std_error", "z", "pass"]);
    let mut failed = 0;
    let mut worst: f64 = 0.0;
    for r in &rows {
        let pass = r.z.abs() <= limit;
        failed += usize::from(!pass);
        worst = worst.max(r.z.abs());
        t.push(vec![r.name.clone(), num(r.t), num(r.target), num(r.estimate), num(r.std_error), num(r.z), pass.to_string()]);
    }
    manifest.add(dir, "verify.csv", t.to_bytes()?)?;
    let summary = format!("{} of {} check rows within |z| <= {limit}; max |z| = {worst:.3}", rows.len() - failed, rows.len());
    let verdict = if failed == 0 { Ok(()) } else { Err(CliError::Verification(summary.clone())) };
    Ok((vec![summary], verdict))
}
