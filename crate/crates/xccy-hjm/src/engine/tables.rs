//! Deterministic tables for the separable factor representation
//! `f_{t_i}(T_j) = f_0(T_j) + A_i(T_j) + sum_m shape_m(T_j) Y^m_i`, with
//! `A_i(T) = sum_{s<i} alpha_{t_s}(T) dt` and `Y^m_i = sum_{s<i} load_m(t_s) . dX_s`.

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::{MarketModel, ModelScratch, SurfaceId};

pub(crate) struct SurfaceTable {
    pub id: SurfaceId,
    /// Number of factors.
    pub m: usize,
    /// `load_m(t_i)`, layout `[step][factor][dim]`.
    pub loads: Vec<f64>,
    /// `shape_m(T_j)`, layout `[pillar][factor]`.
    pub shapes: Vec<f64>,
    /// Trapezoid prefix sums of `shape_m`, layout `[factor][pillar]`.
    pub shape_prefix: Vec<f64>,
    /// Deterministic part of the short rate, `f_0(t_i) + A_i(t_i)`.
    pub r0: Vec<f64>,
    /// Per observation: `f_0(T_j) + A_i(T_j)` for `j >= i`.
    pub det_fwd: Vec<Vec<f64>>,
    /// Per observation: trapezoid prefix of `det_fwd` starting at pillar `i`.
    pub det_prefix: Vec<Vec<f64>>,
    /// Offset of this surface inside a path state.
    pub offset: usize,
    /// First grid step of the dynamics; spread families start at `delta^f`.
    pub start: usize,
}

pub(crate) struct FxTable {
    pub currency: usize,
    /// `sigma^X(t_i)`, layout `[step][dim]`.
    pub loads: Vec<f64>,
    /// `Psi^{Q^{k0}}_{t_i}(sigma^X(t_i))`.
    pub psi: Vec<f64>,
    pub offset: usize,
}

pub(crate) struct Tables {
    pub surfaces: Vec<SurfaceTable>,
    pub fx: Vec<FxTable>,
    /// Trapezoid prefix of the deterministic unsecured spread.
    pub qbar_prefix: Vec<f64>,
    pub state_len: usize,
}

fn trapezoid_prefix(values: &[f64], dt: f64, start: usize) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for j in start..values.len().saturating_sub(1) {
        out[j + 1] = out[j] + 0.5 * (values[j] + values[j + 1]) * dt;
    }
    out
}

pub(crate) fn build(model: &MarketModel, grid: &TimeGrid, obs_steps: &[usize], drift_scale: f64) -> Result<Tables> {
    let n = grid.steps();
    let dt = grid.dt();
    let d = model.driver.dim();
    let times = grid.times();
    let mut offset = 0;
    let mut surfaces = Vec::new();
    let mut w = ModelScratch::new(d);
    for id in model.surfaces() {
        let start = match id {
            SurfaceId::Spread(k) => grid.index_of(model.spreads[k].fix_adj)?,
            _ => 0,
        };
        let factors = model.vol(id).factors();
        let m = factors.len();
        let mut loads = vec![0.0; n * m * d];
        for i in start..n {
            for (k, f) in factors.iter().enumerate() {
                let base = (i * m + k) * d;
                f.load_into(times[i], &mut loads[base..base + d]);
            }
        }
        let mut shapes = vec![0.0; (n + 1) * m];
        for j in 0..=n {
            for (k, f) in factors.iter().enumerate() {
                shapes[j * m + k] = f.shape_at(times[j]);
            }
        }
        let mut shape_prefix = Vec::with_capacity(m * (n + 1));
        for k in 0..m {
            let col: Vec<f64> = (0..=n).map(|j| shapes[j * m + k]).collect();
            shape_prefix.extend(trapezoid_prefix(&col, dt, 0));
        }
        if loads.iter().chain(&shapes).any(|x| !x.is_finite()) {
            return Err(Error::AdmissibilityViolation(format!("volatility of {id:?} overflows on the grid")));
        }
        let init = model.initial(id);
        let f0: Vec<f64> = times.iter().map(|t| init.value(*t)).collect();
        let mut acc = vec![0.0; n + 1];
        let mut r0 = vec![0.0; n + 1];
        let mut det_fwd = Vec::new();
        let mut det_prefix = Vec::new();
        for i in 0..=n {
            r0[i] = f0[i] + acc[i];
            if obs_steps.binary_search(&i).is_ok() {
                let mut row = vec![0.0; n + 1];
                for j in i..=n {
                    row[j] = f0[j] + acc[j];
                }
                det_prefix.push(trapezoid_prefix(&row, dt, i));
                det_fwd.push(row);
            }
            if i == n {
                break;
            }
            if i < start {
                continue;
            }
            let t = times[i];
            for j in i + 1..=n {
                let a = model.drift(id, t, times[j], &mut w).map_err(|e| match e {
                    Error::ExponentialMomentUnbounded(m) => Error::AdmissibilityViolation(m),
                    other => other,
                })?;
                acc[j] += drift_scale * a * dt;
            }
        }
        surfaces.push(SurfaceTable { id, m, loads, shapes, shape_prefix, r0, det_fwd, det_prefix, offset, start });
        offset += m + 1;
    }
    let mut fx = Vec::new();
    for k in 1..model.n_currencies() {
        let spec = model.fx_spec(k).expect("validated FX block");
        let mut loads = vec![0.0; n * d];
        let mut psi = vec![0.0; n];
        for i in 0..n {
            let s = spec.vol.at(times[i]);
            loads[i * d..(i + 1) * d].copy_from_slice(s.as_slice());
            psi[i] = model
                .driver
                .local_exponent(times[i], s.as_slice())
                .map_err(|e| Error::AdmissibilityViolation(e.to_string()))?;
        }
        fx.push(FxTable { currency: k, loads, psi, offset });
        offset += 1;
    }
    let qbar: Vec<f64> = times.iter().map(|t| model.unsecured_spread.value(*t)).collect();
    Ok(Tables { surfaces, fx, qbar_prefix: trapezoid_prefix(&qbar, dt, 0), state_len: offset })
}
