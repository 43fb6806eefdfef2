//! Monte Carlo engine on a uniform grid.
//!
//! Each surface is stored in factor form: the state of a path at an
//! observation time is the factor vector `Y` plus the log accrual of the
//! short rate; FX adds one log stochastic exponential per foreign currency.
//! Bond prices, forwards and accounts are rebuilt from these states.

mod oracle;
mod report;
mod tables;

pub use oracle::{gaussian_oracle, GaussianBond};
pub use report::{martingale_report, Check, CheckRow};

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::driver::IncrementSampler;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::{AffineTerm, MarketModel, SurfaceId, BASE};
use crate::rng::{path_rng, STREAM_BROWNIAN, STREAM_JUMPS};
use tables::{SurfaceTable, Tables};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Exact increments of `X`; Euler steps for the forward surfaces.
    Euler,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub horizon: f64,
    pub dt: f64,
    pub paths: usize,
    pub seed: u64,
    pub scheme: Scheme,
    /// Paths per parallel work item.
    pub chunk_size: usize,
    /// Pair path `2j+1` with the negated Brownian draws of path `2j`.
    pub antithetic: bool,
    /// Currency whose spot measure drives the simulation.
    pub measure: usize,
    /// Times at which path states are stored; `0` and the horizon are added.
    pub observe: Vec<f64>,
    /// Multiplies every drift. Anything but `1` breaks no-arbitrage.
    #[doc(hidden)]
    pub drift_scale: f64,
}

impl SimulationConfig {
    pub fn new(horizon: f64, dt: f64, paths: usize, seed: u64) -> Self {
        SimulationConfig {
            horizon,
            dt,
            paths,
            seed,
            scheme: Scheme::Euler,
            chunk_size: 256,
            antithetic: false,
            measure: BASE,
            observe: Vec::new(),
            drift_scale: 1.0,
        }
    }

    pub fn with_observations(mut self, times: impl IntoIterator<Item = f64>) -> Self {
        self.observe.extend(times);
        self
    }

    pub fn with_measure(mut self, measure: usize) -> Self {
        self.measure = measure;
        self
    }

    pub fn with_antithetic(mut self, on: bool) -> Self {
        self.antithetic = on;
        self
    }
}

/// Seed and configuration digest attached to every result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
}

/// Terms beyond this count bypass the convexity cache.
const KEY_TERMS: usize = 4;

type TermKey = Option<(SurfaceId, u64, u64, u64)>;
type ConvexityKey = ([TermKey; KEY_TERMS], usize, u64);

pub struct SimResult {
    model: Arc<MarketModel>,
    config: SimulationConfig,
    grid: TimeGrid,
    obs_steps: Vec<usize>,
    /// Position in `obs_steps` of each grid step, if observed.
    obs_of_step: Vec<Option<usize>>,
    tables: Tables,
    /// Table index per surface slot, see [`slot_of`].
    slots: Vec<Option<usize>>,
    data: Vec<f64>,
    provenance: Provenance,
    convexity: RwLock<HashMap<ConvexityKey, f64>>,
}

pub fn simulate(model: Arc<MarketModel>, config: &SimulationConfig) -> Result<SimResult> {
    if config.paths == 0 {
        return Err(Error::InvalidSpec("at least one path is required".into()));
    }
    if config.antithetic && config.paths % 2 != 0 {
        return Err(Error::InvalidSpec("antithetic sampling needs an even path count".into()));
    }
    if config.measure >= model.n_currencies() {
        return Err(Error::InvalidSpec(format!("unknown simulation measure {}", config.measure)));
    }
    model.check_horizon(config.horizon)?;
    let grid = TimeGrid::new(config.horizon, config.dt)?;
    let mut obs_steps = vec![0, grid.steps()];
    for f in &model.spreads {
        obs_steps.push(grid.index_of(f.fix_adj)?);
    }
    for t in &config.observe {
        if *t < 0.0 || *t > grid.horizon() + 1e-9 {
            return Err(Error::ScheduleOffGrid(*t));
        }
        obs_steps.push(grid.index_of(*t)?);
    }
    obs_steps.sort_unstable();
    obs_steps.dedup();
    let tables = tables::build(&model, &grid, &obs_steps, config.drift_scale)?;
    let mut slots = vec![None; 2 * model.n_currencies() + model.spreads.len()];
    for (i, s) in tables.surfaces.iter().enumerate() {
        slots[slot_of(&model, s.id)] = Some(i);
    }
    let sampler = IncrementSampler::new(model.spot_driver(config.measure), &grid.times())?;
    let row = tables.state_len * obs_steps.len();
    let mut data = vec![0.0; row * config.paths];
    let chunk = config.chunk_size.max(1);
    let kernel = Kernel { tables: &tables, sampler: &sampler, config, dt: grid.dt(), obs_steps: &obs_steps };
    data.par_chunks_mut(row * chunk).enumerate().for_each(|(c, block)| {
        let mut work = kernel.workspace();
        for (k, out) in block.chunks_mut(row).enumerate() {
            kernel.run(c * chunk + k, out, &mut work);
        }
    });
    let provenance = Provenance { seed: config.seed, config_hash: config_hash(&model, config) };
    let mut obs_of_step = vec![None; grid.steps() + 1];
    for (o, i) in obs_steps.iter().enumerate() {
        obs_of_step[*i] = Some(o);
    }
    Ok(SimResult { model, config: config.clone(), grid, obs_steps, obs_of_step, tables, slots, data, provenance, convexity: RwLock::new(HashMap::new()) })
}

fn config_hash(model: &MarketModel, config: &SimulationConfig) -> String {
    let mut h = Sha256::new();
    h.update(format!("{model:?}").as_bytes());
    h.update(format!("{config:?}").as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

struct Kernel<'a> {
    tables: &'a Tables,
    sampler: &'a IncrementSampler,
    config: &'a SimulationConfig,
    dt: f64,
    obs_steps: &'a [usize],
}

struct Workspace {
    state: Vec<f64>,
    r_prev: Vec<f64>,
    z: Vec<f64>,
    dx: Vec<f64>,
}

impl Kernel<'_> {
    fn workspace(&self) -> Workspace {
        let d = self.sampler.dim();
        Workspace {
            state: vec![0.0; self.tables.state_len],
            r_prev: vec![0.0; self.tables.surfaces.len()],
            z: vec![0.0; d],
            dx: vec![0.0; d],
        }
    }

    fn run(&self, path: usize, out: &mut [f64], w: &mut Workspace) {
        let (bm_path, sign) = if self.config.antithetic && path % 2 == 1 { (path - 1, -1.0) } else { (path, 1.0) };
        let mut normals = path_rng(self.config.seed, STREAM_BROWNIAN, bm_path as u64);
        let mut jumps = path_rng(self.config.seed, STREAM_JUMPS, path as u64);
        let d = self.sampler.dim();
        let len = self.tables.state_len;
        w.state.iter_mut().for_each(|x| *x = 0.0);
        for (r, s) in w.r_prev.iter_mut().zip(&self.tables.surfaces) {
            *r = s.r0[0];
        }
        out[..len].copy_from_slice(&w.state);
        let mut next_obs = 1;
        for i in 0..self.sampler.steps() {
            self.sampler.sample_step(i, &mut normals, &mut jumps, sign, &mut w.z, &mut w.dx);
            for (s, r_prev) in self.tables.surfaces.iter().zip(w.r_prev.iter_mut()) {
                let y = &mut w.state[s.offset..s.offset + s.m + 1];
                let mut r_new = s.r0[i + 1];
                for m in 0..s.m {
                    let load = &s.loads[(i * s.m + m) * d..(i * s.m + m + 1) * d];
                    y[m] += load.iter().zip(&w.dx).map(|(a, b)| a * b).sum::<f64>();
                    r_new += s.shapes[(i + 1) * s.m + m] * y[m];
                }
                if i >= s.start {
                    y[s.m] += 0.5 * (*r_prev + r_new) * self.dt;
                }
                *r_prev = r_new;
            }
            for f in &self.tables.fx {
                let load = &f.loads[i * d..(i + 1) * d];
                let shock: f64 = load.iter().zip(&w.dx).map(|(a, b)| a * b).sum();
                w.state[f.offset] += shock - f.psi[i] * self.dt;
            }
            if next_obs < self.obs_steps.len() && self.obs_steps[next_obs] == i + 1 {
                out[next_obs * len..(next_obs + 1) * len].copy_from_slice(&w.state);
                next_obs += 1;
            }
        }
    }
}

impl SimResult {
    pub fn model(&self) -> &MarketModel {
        &self.model
    }

    pub fn model_arc(&self) -> Arc<MarketModel> {
        Arc::clone(&self.model)
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn paths(&self) -> usize {
        self.config.paths
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Currency whose spot measure generated the paths.
    pub fn measure(&self) -> usize {
        self.config.measure
    }

    /// Paths combined into one independent sample.
    pub fn group_size(&self) -> usize {
        if self.config.antithetic {
            2
        } else {
            1
        }
    }

    pub fn observation_times(&self) -> Vec<f64> {
        self.obs_steps.iter().map(|i| self.grid.time(*i)).collect()
    }

    pub fn path(&self, p: usize) -> PathView<'_> {
        assert!(p < self.config.paths, "path {p} out of range");
        PathView { res: self, path: p }
    }

    /// Deterministic view at time 0 (every path starts here).
    pub fn initial(&self) -> PathView<'_> {
        self.path(0)
    }

    fn obs_index(&self, t: f64) -> Result<usize> {
        let i = self.grid.index_of(t).map_err(|_| Error::MissingState(format!("t = {t} is not on the grid")))?;
        self.obs_of_step[i].ok_or_else(|| Error::MissingState(format!("t = {t} is not an observation time")))
    }

    fn pillar(&self, maturity: f64) -> Result<usize> {
        if maturity > self.grid.horizon() + 1e-9 {
            return Err(Error::GridExhausted(maturity));
        }
        self.grid.index_of(maturity)
    }

    fn table(&self, s: SurfaceId) -> Result<&SurfaceTable> {
        self.slots
            .get(slot_of(&self.model, s))
            .copied()
            .flatten()
            .map(|i| &self.tables.surfaces[i])
            .ok_or_else(|| Error::MissingState(format!("surface {s:?} is not simulated")))
    }

    /// Cached `D` of [`MarketModel::affine_convexity`].
    pub fn convexity(&self, terms: &[AffineTerm], measure: usize, t: f64) -> Result<f64> {
        self.model.check_affine_terms(terms, t)?;
        if self.model.is_native_combo(terms, measure) {
            return Ok(0.0);
        }
        if terms.len() > KEY_TERMS {
            return self.model.affine_convexity(terms, measure, t);
        }
        let mut parts = [None; KEY_TERMS];
        for (k, x) in parts.iter_mut().zip(terms) {
            *k = Some((x.surface, x.weight.to_bits(), x.from.to_bits(), x.to.to_bits()));
        }
        let key: ConvexityKey = (parts, measure, t.to_bits());
        if let Some(v) = self.convexity.read().expect("cache lock").get(&key) {
            return Ok(*v);
        }
        let v = self.model.affine_convexity(terms, measure, t)?;
        self.convexity.write().expect("cache lock").insert(key, v);
        Ok(v)
    }
}

/// Dense index of a surface: curves, then basis curves, then spreads.
fn slot_of(model: &MarketModel, s: SurfaceId) -> usize {
    let n = model.n_currencies();
    match s {
        SurfaceId::Curve(k) => k,
        SurfaceId::Basis(k) => n + k,
        SurfaceId::Spread(i) => 2 * n + i,
    }
}

/// Read access to one simulated path.
#[derive(Clone, Copy)]
pub struct PathView<'a> {
    res: &'a SimResult,
    path: usize,
}

impl<'a> PathView<'a> {
    pub fn result(&self) -> &'a SimResult {
        self.res
    }

    pub fn index(&self) -> usize {
        self.path
    }

    fn state(&self, o: usize) -> &'a [f64] {
        let len = self.res.tables.state_len;
        let base = (self.path * self.res.obs_steps.len() + o) * len;
        &self.res.data[base..base + len]
    }

    /// `int_0^t x_s(s) ds` of a surface; zero for absent basis surfaces.
    pub fn log_account(&self, s: SurfaceId, t: f64) -> Result<f64> {
        let o = self.res.obs_index(t)?;
        match self.res.table(s) {
            Ok(tab) => Ok(self.state(o)[tab.offset + tab.m]),
            Err(_) if matches!(s, SurfaceId::Basis(_)) => Ok(0.0),
            Err(e) => Err(e),
        }
    }

    /// `x_t(t)`.
    pub fn short_rate(&self, s: SurfaceId, t: f64) -> Result<f64> {
        self.forward(s, t, t)
    }

    /// `x_t(T)` for `T >= t` on the grid.
    pub fn forward(&self, s: SurfaceId, t: f64, maturity: f64) -> Result<f64> {
        if maturity < t - 1e-12 {
            return Err(Error::ReversedInterval { t, maturity });
        }
        let o = self.res.obs_index(t)?;
        let tab = match self.res.table(s) {
            Ok(tab) => tab,
            Err(_) if matches!(s, SurfaceId::Basis(_)) => return Ok(0.0),
            Err(e) => return Err(e),
        };
        let j = self.res.pillar(maturity)?;
        let y = &self.state(o)[tab.offset..tab.offset + tab.m];
        let mut v = tab.det_fwd[o][j];
        for (m, ym) in y.iter().enumerate() {
            v += tab.shapes[j * tab.m + m] * ym;
        }
        Ok(v)
    }

    /// `int_t^T x_t(u) du` (trapezoid on the grid).
    pub fn integral(&self, s: SurfaceId, t: f64, maturity: f64) -> Result<f64> {
        if maturity < t - 1e-12 {
            return Err(Error::ReversedInterval { t, maturity });
        }
        let o = self.res.obs_index(t)?;
        let tab = match self.res.table(s) {
            Ok(tab) => tab,
            Err(_) if matches!(s, SurfaceId::Basis(_)) => return Ok(0.0),
            Err(e) => return Err(e),
        };
        let i = self.res.obs_steps[o];
        let j = self.res.pillar(maturity)?;
        let n1 = self.res.grid.steps() + 1;
        let y = &self.state(o)[tab.offset..tab.offset + tab.m];
        let mut v = tab.det_prefix[o][j];
        for (m, ym) in y.iter().enumerate() {
            let p = &tab.shape_prefix[m * n1..(m + 1) * n1];
            v += ym * (p[j] - p[i]);
        }
        Ok(v)
    }

    /// `int_a^b x_t(u) du` for `t <= a <= b`.
    pub fn integral_between(&self, s: SurfaceId, t: f64, from: f64, to: f64) -> Result<f64> {
        Ok(self.integral(s, t, to)? - self.integral(s, t, from)?)
    }

    /// Collateral account `B^{c,l,k3}_t`.
    pub fn coll_account(&self, l: usize, k3: usize, t: f64) -> Result<f64> {
        let mut acc = 0.0;
        for (s, w) in self.res.model.collateral_combo(l, k3) {
            acc += w * self.log_account(s, t)?;
        }
        Ok(acc.exp())
    }

    /// Spread account `Q^{k0,k}_t = exp(int_0^t q^{k0,k}_s ds)`.
    pub fn basis_account(&self, k: usize, t: f64) -> Result<f64> {
        Ok(self.log_account(SurfaceId::Basis(k), t)?.exp())
    }

    /// Spread bond `Q^{k0,k}(t,T) = exp(-int_t^T q^{k0,k}_t(u) du)`.
    pub fn spread_bond(&self, k: usize, t: f64, maturity: f64) -> Result<f64> {
        Ok((-self.integral(SurfaceId::Basis(k), t, maturity)?).exp())
    }

    /// Affine terms of `int_t^T r^{c,l,k3}`.
    pub fn bond_terms(&self, l: usize, k3: usize, t: f64, maturity: f64) -> Vec<AffineTerm> {
        let (terms, n) = self.bond_terms_inline(l, k3, t, maturity);
        terms[..n].to_vec()
    }

    fn bond_terms_inline(&self, l: usize, k3: usize, t: f64, maturity: f64) -> ([AffineTerm; 3], usize) {
        let blank = AffineTerm { surface: SurfaceId::Curve(l), weight: 0.0, from: t, to: maturity };
        let mut out = [blank; 3];
        let mut n = 0;
        for (surface, weight) in self.res.model.collateral_combo(l, k3) {
            if self.res.table(surface).is_ok() {
                out[n] = AffineTerm { surface, weight, from: t, to: maturity };
                n += 1;
            }
        }
        (out, n)
    }

    /// Price of exp(-sum w int_a^b x) in currency `measure`'s spot measure.
    pub fn affine_price(&self, terms: &[AffineTerm], measure: usize, t: f64) -> Result<f64> {
        let mut e = 0.0;
        for x in terms {
            e += x.weight * self.integral_between(x.surface, t, x.from, x.to)?;
        }
        Ok((-e - self.res.convexity(terms, measure, t)?).exp())
    }

    /// `B^{l,k3}(t,T)`: the currency-`l` bond collateralized in `k3`.
    /// After maturity it is rolled in the collateral account.
    pub fn bond(&self, l: usize, k3: usize, t: f64, maturity: f64) -> Result<f64> {
        if maturity < t {
            return Ok(self.coll_account(l, k3, t)? / self.coll_account(l, k3, maturity)?);
        }
        let (terms, n) = self.bond_terms_inline(l, k3, t, maturity);
        self.affine_price(&terms[..n], l, t)
    }

    /// Spot `X^{a,b}_t`: units of currency `a` per unit of currency `b`.
    pub fn fx(&self, a: usize, b: usize, t: f64) -> Result<f64> {
        Ok(self.fx_base(b, t)? / self.fx_base(a, t)?)
    }

    fn fx_base(&self, k: usize, t: f64) -> Result<f64> {
        if k == BASE {
            return Ok(1.0);
        }
        let spec = self.res.model.fx_spec(k).ok_or_else(|| Error::MissingState(format!("no FX for {k}")))?;
        let o = self.res.obs_index(t)?;
        let f = self
            .res
            .tables
            .fx
            .iter()
            .find(|f| f.currency == k)
            .ok_or_else(|| Error::MissingState(format!("FX {k} not simulated")))?;
        let log = self.log_account(SurfaceId::Curve(BASE), t)? + self.log_account(SurfaceId::Basis(k), t)?
            - self.log_account(SurfaceId::Curve(k), t)?
            + self.state(o)[f.offset];
        Ok(spec.spot * log.exp())
    }

    /// `log` of the FX stochastic exponential of currency `k`.
    pub fn fx_log_exponential(&self, k: usize, t: f64) -> Result<f64> {
        if k == BASE {
            return Ok(0.0);
        }
        let o = self.res.obs_index(t)?;
        let f = self
            .res
            .tables
            .fx
            .iter()
            .find(|f| f.currency == k)
            .ok_or_else(|| Error::MissingState(format!("FX {k} not simulated")))?;
        Ok(self.state(o)[f.offset])
    }

    /// Unsecured account `B^k_t` with `r^{k0} = r^{c,k0} + qbar` and
    /// `r^k = r^{c,k} + qbar - q^{k0,k}`.
    pub fn unsecured_account(&self, k: usize, t: f64) -> Result<f64> {
        let i = self.res.grid.index_of(t)?;
        let q = self.res.tables.qbar_prefix[i];
        let log = self.log_account(SurfaceId::Curve(k), t)? + q - self.log_account(SurfaceId::Basis(k), t)?;
        Ok(log.exp())
    }

    /// Unsecured bond `B^k(t,T)`, rolled in the unsecured account after `T`.
    pub fn unsecured_bond(&self, k: usize, t: f64, maturity: f64) -> Result<f64> {
        if maturity < t {
            return Ok(self.unsecured_account(k, t)? / self.unsecured_account(k, maturity)?);
        }
        let i = self.res.grid.index_of(t)?;
        let j = self.res.pillar(maturity)?;
        let q = self.res.tables.qbar_prefix[j] - self.res.tables.qbar_prefix[i];
        let mut terms = vec![AffineTerm { surface: SurfaceId::Curve(k), weight: 1.0, from: t, to: maturity }];
        if self.res.model.has_basis(k) {
            terms.push(AffineTerm { surface: SurfaceId::Basis(k), weight: -1.0, from: t, to: maturity });
        }
        Ok(self.affine_price(&terms, k, t)? * (-q).exp())
    }
}
