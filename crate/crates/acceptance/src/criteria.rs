//! The eight acceptance criteria. Each returns the measured worst error of
//! every sub-check next to its limit.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use rand::Rng;
use xccy_cli::{run, CliError, Command, Overrides};
use xccy_hjm::driver::girsanov_transform;
use xccy_hjm::engine::{gaussian_oracle, martingale_report, Check};
use xccy_hjm::indices::{forward_index_spread, forward_index_value, spot_rate_example, RateExample};
use xccy_hjm::measures::{rn_forward, rn_spot_foreign, DensityProcess};
use xccy_hjm::model::BASE;
use xccy_hjm::presets::{flat_pair, single_currency, usd_eur, FlatPairOptions, UsdEurOptions};
use xccy_hjm::pricing::{
    fair_spread, leg_value, price_ccs, price_mtmccs, price_swap_mc, price_zcb, price_zcb_dual, LegIndex, LegSide, Route,
    SwapLeg, SwapSpec, ZcbCase,
};
use xccy_hjm::stats::mean_estimate;
use xccy_hjm::{simulate, DriverSpec, MarketModel, MeasureId, PathView, PiecewiseVector, SimResult, SimulationConfig, SurfaceId};

use crate::oracles::{integrate_drift, neg_sum, psi_oracle, random_chars, random_setup, seeded};
use crate::{Measure, Res};

trait OrFail<T> {
    fn or_fail(self, what: &str) -> Res<T>;
}

impl<T, E: std::fmt::Display> OrFail<T> for std::result::Result<T, E> {
    fn or_fail(self, what: &str) -> Res<T> {
        self.map_err(|e| format!("{what}: {e}"))
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Relative error with an absolute floor of one, for quantities near zero.
fn rel1(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step).round() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}

fn sim(model: MarketModel, cfg: &SimulationConfig) -> Res<SimResult> {
    simulate(Arc::new(model), cfg).or_fail("simulate")
}

fn runtime(start: Instant, limit: f64) -> Measure {
    Measure::new("runtime s", limit).with(start.elapsed().as_secs_f64())
}

/// Closed-form local exponent and its gradient on random specs.
pub fn local_exponent() -> Res<Vec<Measure>> {
    let start = Instant::now();
    let mut psi = Measure::new("psi rel err", 1e-8);
    let mut rng = seeded(11);
    for case in 0..100 {
        let chars = random_chars(&mut rng, case % 2 == 0);
        let beta: Vec<f64> = (0..chars.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        psi.see(rel(chars.psi(&beta).or_fail("psi")?, psi_oracle(&chars, &beta)));
    }
    let mut grad = Measure::new("grad err", 1e-6);
    let mut rng = seeded(12);
    let h = 1e-5;
    for case in 0..100 {
        let chars = random_chars(&mut rng, case % 2 == 1);
        let beta: Vec<f64> = (0..chars.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = chars.psi_gradient(&beta).or_fail("gradient")?;
        for i in 0..beta.len() {
            let (mut up, mut dn) = (beta.clone(), beta.clone());
            up[i] += h;
            dn[i] -= h;
            let fd = (chars.psi(&up).or_fail("psi")? - chars.psi(&dn).or_fail("psi")?) / (2.0 * h);
            grad.see(rel1(g[i], fd));
        }
    }
    Ok(vec![psi, grad, runtime(start, 5.0)])
}

/// Integrated module drifts against the local-exponent differences.
pub fn drift_conditions() -> Res<Vec<Measure>> {
    let start = Instant::now();
    let lim = 1e-10;
    let mut curve = Measure::new("collateral curve", lim);
    let mut rng = seeded(21);
    for case in 0..50 {
        let s = random_setup(&mut rng);
        let k = case % 2;
        let t = rng.random_range(0.0..4.0);
        let m = t + rng.random_range(0.01..6.0);
        let lhs = integrate_drift(&s.model, SurfaceId::Curve(k), t, t, m, &[]);
        let rhs = s.model.spot_driver(k).local_exponent(t, &neg_sum(&[&s.curve[k].big(t, m)])).or_fail("psi")?;
        curve.see(rel(lhs, rhs));
    }
    let mut basis = Measure::new("basis", lim);
    let mut rng = seeded(22);
    for _ in 0..50 {
        let s = random_setup(&mut rng);
        let t = rng.random_range(0.0..4.0);
        let m = t + rng.random_range(0.01..6.0);
        let lhs = integrate_drift(&s.model, SurfaceId::Basis(1), t, t, m, &[]);
        let (c, q) = (s.curve[BASE].big(t, m), s.basis.big(t, m));
        let psi = |b: Vec<f64>| s.model.driver.local_exponent(t, &b).or_fail("psi");
        basis.see(rel(lhs, psi(neg_sum(&[&c, &q]))? - psi(neg_sum(&[&c]))?));
    }
    let mut foreign = Measure::new("foreign collateral", lim);
    let mut rng = seeded(23);
    for _ in 0..50 {
        let s = random_setup(&mut rng);
        let t = rng.random_range(0.0..4.0);
        let m = t + rng.random_range(0.01..6.0);
        let lhs = integrate_drift(&s.model, SurfaceId::Curve(BASE), t, t, m, &[])
            + integrate_drift(&s.model, SurfaceId::Basis(1), t, t, m, &[]);
        let beta = neg_sum(&[&s.curve[BASE].big(t, m), &s.basis.big(t, m)]);
        foreign.see(rel(lhs, s.model.driver.local_exponent(t, &beta).or_fail("psi")?));
    }
    let mut spread = Measure::new("index spread", lim);
    let mut rng = seeded(24);
    for _ in 0..50 {
        let s = random_setup(&mut rng);
        let fam = &s.model.spreads[0];
        let (df, dp) = (fam.fix_adj, fam.pay_adj);
        let fixing = df + rng.random_range(0.0..4.0);
        let end = fixing + dp;
        let t = rng.random_range(df..end);
        let ts = fixing - df;
        let lhs = integrate_drift(&s.model, SurfaceId::Spread(0), t, t, end, &[t + fam.delta()]);
        let mut cq = s.curve[BASE].big(t.min(ts), ts);
        if fam.collateral != BASE {
            let q = s.basis.big(t.min(ts), ts);
            cq.iter_mut().zip(&q).for_each(|(c, q)| *c += q);
        }
        let h = s.spread.big(t, end);
        let psi = |b: Vec<f64>| s.model.driver.local_exponent(t, &b).or_fail("psi");
        spread.see(rel(lhs, psi(neg_sum(&[&h, &cq]))? - psi(neg_sum(&[&cq]))?));
    }
    Ok(vec![curve, basis, foreign, spread, runtime(start, 5.0)])
}

fn martingale_checks() -> Vec<Check> {
    let mut checks = vec![
        Check::DiscountedBond { collateral: BASE, maturity: 5.0 },
        Check::DiscountedBond { collateral: 1, maturity: 5.0 },
        Check::ForeignBond { currency: 1, maturity: 5.0 },
        Check::SpreadBond { currency: 1, maturity: 5.0 },
        Check::Fx { currency: 1 },
    ];
    for family in 0..2 {
        for fixing in [2.5, 4.5] {
            checks.push(Check::IndexSpread { family, fixing });
            checks.push(Check::IndexForward { family, fixing });
        }
    }
    checks
}

/// Every observation time of the martingale suite: the half-year grid plus
/// points inside the fixing-to-payment windows of both index fixings.
pub fn martingale_times() -> Vec<f64> {
    let mut obs = grid(0.5, 5.0, 0.5);
    obs.extend([2.25, 2.75, 4.25, 4.75]);
    obs.sort_by(f64::total_cmp);
    obs
}

/// Martingale suite at full size, Gaussian and two-point-jump drivers.
pub fn martingale_suite(paths: usize) -> Res<Vec<Measure>> {
    let start = Instant::now();
    let mut out = Vec::new();
    for (jumps, limit) in [(false, 3.0), (true, 4.0)] {
        let model = usd_eur(&UsdEurOptions { jumps, ..Default::default() }).or_fail("market")?;
        let cfg = SimulationConfig::new(5.0, 1.0 / 96.0, paths, 8).with_observations(martingale_times());
        let res = sim(model, &cfg)?;
        let rows = martingale_report(&res, &martingale_checks()).or_fail("report")?;
        let label = if jumps { "two-point jumps |z|" } else { "gaussian |z|" };
        let mut m = Measure::new(label, limit);
        for r in &rows {
            m.see_at(r.z.abs(), &format!("{} t={}", r.name, r.t));
        }
        m.note(format!("{} rows", rows.len()));
        out.push(m);
    }
    out.push(runtime(start, 180.0));
    Ok(out)
}

/// Simulated bond law against the closed-form Gaussian HJM law.
pub fn gaussian_oracle_equivalence() -> Res<Vec<Measure>> {
    let mut z = Measure::new("bond mean |z|", 3.0);
    let mut var = Measure::new("log-bond variance rel err", 0.05);
    for (name, decay) in [("constant", None), ("hull-white", Some(0.1))] {
        let model = single_currency(0.03, 0.01, decay).or_fail("market")?;
        let cfg = SimulationConfig::new(2.0, 1.0 / 96.0, 40_000, 9).with_observations([0.5, 1.0, 1.5]);
        let res = sim(model.clone(), &cfg)?;
        for t in [0.5, 1.0, 1.5] {
            let logs: Vec<f64> =
                (0..res.paths()).map(|p| res.path(p).bond(BASE, BASE, t, 2.0).map(f64::ln)).collect::<Result<_, _>>().or_fail("bond")?;
            let prices: Vec<f64> = logs.iter().map(|x| x.exp()).collect();
            let law = gaussian_oracle(&model, SurfaceId::Curve(BASE), BASE, t, 2.0).or_fail("oracle")?;
            let at = format!("{name} t={t}");
            z.see_at(mean_estimate(&prices).z_score(law.mean_price()).abs(), &at);
            let m = logs.iter().sum::<f64>() / logs.len() as f64;
            let v = logs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (logs.len() - 1) as f64;
            var.see_at((v / law.var_log - 1.0).abs(), &at);
        }
    }
    Ok(vec![z, var])
}

/// Path-wise explicit form of the forward index spread in the first two
/// regimes, assembled from the index forward, bonds and accounts.
fn explicit_spread(v: &PathView<'_>, family: usize, fixing: f64, t: f64, branch: usize) -> Res<f64> {
    let fam = &v.result().model().spreads[family];
    let (k3, d) = (fam.collateral, fam.delta());
    let (ts, tp) = (fixing - fam.fix_adj, fixing + fam.pay_adj);
    let growth = 1.0 + d * forward_index_value(v, family, fixing, t.min(fixing)).or_fail("index")?;
    let b = |a: f64, m: f64| v.bond(BASE, k3, a, m).or_fail("bond");
    let acc = |a: f64| v.coll_account(BASE, k3, a).or_fail("account");
    Ok(match branch {
        1 => growth * b(t, tp)? / b(t, ts)?,
        _ => growth * acc(ts)? / acc(t)? * b(t, tp)?,
    })
}

/// Path-wise identities of the model, on a jump market with Hull-White vols.
pub fn structural_identities() -> Res<Vec<Measure>> {
    let dt = 1.0 / 48.0;
    let obs = grid(0.0, 3.0, dt);
    let model = usd_eur(&UsdEurOptions { jumps: true, hull_white: true, vol_scale: 1.0 }).or_fail("market")?;
    let res = sim(model, &SimulationConfig::new(3.0, dt, 16, 31).with_observations(obs.clone()))?;
    let lim = 1e-12;
    let mut factor = Measure::new("foreign bond factorization", lim);
    let mut par = Measure::new("pull to par and own basis", lim);
    let mut short = Measure::new("short rate consistency", lim);
    let mut regime = Measure::new("spread regime continuity", lim);
    let mut fixed = Measure::new("index forward after fixing", lim);
    let mut arrears = Measure::new("in-arrears start value", lim);
    let mut density = Measure::new("density round trips", lim);
    let surfaces = res.model().surfaces();
    for p in 0..res.paths() {
        let v = res.path(p);
        for &(t, m) in &[(0.0, 3.0), (0.5, 1.0), (1.25, 2.75), (2.0, 2.0)] {
            let lhs = v.bond(BASE, 1, t, m).or_fail("bond")?;
            factor.see(rel(lhs, v.bond(BASE, BASE, t, m).or_fail("bond")? * v.spread_bond(1, t, m).or_fail("spread bond")?));
        }
        for &t in &[0.0, 0.75, 2.5, 3.0] {
            for (l, k3) in [(0, 0), (0, 1), (1, 1), (1, 0)] {
                par.see(rel(v.bond(l, k3, t, t).or_fail("bond")?, 1.0));
            }
            par.see(rel(v.spread_bond(1, t, t).or_fail("spread bond")?, 1.0));
            par.see(v.forward(SurfaceId::Basis(BASE), t, 3.0).or_fail("basis")?.abs());
            par.see(rel(v.spread_bond(BASE, t, 3.0).or_fail("spread bond")?, 1.0));
            par.see(rel(v.basis_account(BASE, t).or_fail("account")?, 1.0));
        }
        for &s in &surfaces {
            let from = match s {
                SurfaceId::Spread(i) => res.model().spreads[i].fix_adj,
                _ => 0.0,
            };
            for w in obs.windows(2).filter(|w| w[0] >= from - 1e-12) {
                let r = v.short_rate(s, w[0]).or_fail("short rate")?;
                short.see((r - v.forward(s, w[0], w[0]).or_fail("forward")?).abs() / r.abs().max(1e-6));
                let inc = v.log_account(s, w[1]).or_fail("account")? - v.log_account(s, w[0]).or_fail("account")?;
                let trap = 0.5 * (r + v.short_rate(s, w[1]).or_fail("short rate")?) * dt;
                short.see((inc - trap).abs() / trap.abs().max(1e-6));
            }
        }
        for family in 0..2 {
            let fam = res.model().spreads[family].clone();
            let fixing = 1.5;
            let (ts, tp) = (fixing - fam.fix_adj, fixing + fam.pay_adj);
            for &t in obs.iter().filter(|t| **t >= fam.fix_adj && **t <= tp + 1e-12) {
                let s = forward_index_spread(&v, family, fixing, t).or_fail("spread")?;
                let branch = if t <= ts + 1e-12 { 1 } else { 2 };
                if t <= fixing + 1e-12 {
                    regime.see(rel(s, explicit_spread(&v, family, fixing, t, branch)?));
                }
            }
            for (t, a, b) in [(ts, 1, 2), (fixing, 2, 2)] {
                let x = explicit_spread(&v, family, fixing, t, a)?;
                regime.see(rel(x, explicit_spread(&v, family, fixing, t, b)?));
                regime.see(rel(forward_index_spread(&v, family, fixing, t).or_fail("spread")?, x));
            }
            let k3 = fam.collateral;
            let c = forward_index_spread(&v, family, fixing, fixing).or_fail("spread")? * v.coll_account(BASE, k3, fixing).or_fail("account")?
                / v.bond(BASE, k3, fixing, tp).or_fail("bond")?;
            for t in [fixing + dt, fixing + 0.125, tp] {
                let lock = c * v.bond(BASE, k3, t, tp).or_fail("bond")? / v.coll_account(BASE, k3, t).or_fail("account")?;
                regime.see(rel(forward_index_spread(&v, family, fixing, t).or_fail("spread")?, lock));
            }
            let at_fix = forward_index_value(&v, family, fixing, fixing).or_fail("index")?;
            for &t in obs.iter().filter(|t| **t > fixing) {
                fixed.see(rel(forward_index_value(&v, family, fixing, t).or_fail("index")?, at_fix));
            }
        }
        for (l, k3) in [(0, 0), (0, 1), (1, 1)] {
            let (a, b) = (1.0, 1.5);
            let ex = |kind, at| spot_rate_example(&v, kind, l, k3, a, b, at).or_fail("rate");
            arrears.see(rel(ex(RateExample::BackwardInArrearsForward, a)?, ex(RateExample::ForwardLooking, a)?));
            arrears.see(rel(ex(RateExample::BackwardInArrearsForward, b)?, ex(RateExample::BackwardLooking, b)?));
        }
        let fwd = MeasureId::Forward { maturity: 2.0, base: BASE, collateral: 1 };
        for &t in &[0.0, 0.5, 1.5, 2.0, 2.5, 3.0] {
            let there = rn_spot_foreign(&v, BASE, 1, t).or_fail("density")?;
            density.see((there * rn_spot_foreign(&v, 1, BASE, t).or_fail("density")? - 1.0).abs());
            let dens = |a: MeasureId, b: MeasureId| DensityProcess::new(a, b).value(&v, t).or_fail("density");
            let a = dens(MeasureId::Spot(BASE), fwd.clone())?;
            density.see((a * dens(fwd.clone(), MeasureId::Spot(BASE))? - 1.0).abs());
            density.see(rel(dens(MeasureId::Spot(1), fwd.clone())? * dens(MeasureId::Spot(BASE), MeasureId::Spot(1))?, a));
        }
        let expect = 1.0 / (v.coll_account(BASE, 1, 2.0).or_fail("account")? * v.bond(BASE, 1, 0.0, 2.0).or_fail("bond")?);
        density.see(rel(rn_forward(&v, 2.0, BASE, 1, 2.0).or_fail("density")?, expect));
    }
    let mut girsanov = Measure::new("girsanov round trip", lim);
    let mut rng = seeded(15);
    for case in 0..40 {
        let chars = random_chars(&mut rng, case % 2 == 0);
        let d = chars.dim();
        let spec = DriverSpec::constant(MeasureId::Spot(0), chars.clone()).or_fail("driver")?;
        let sigma = PiecewiseVector::constant(DVector::from_fn(d, |_, _| rng.random_range(-0.4..0.4)));
        let there = girsanov_transform(&spec, &sigma, MeasureId::Spot(1)).or_fail("girsanov")?;
        let back = girsanov_transform(&there, &sigma.negated(), MeasureId::Spot(0)).or_fail("girsanov")?;
        let beta: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = spec.local_exponent(0.5, &beta).or_fail("psi")?;
        girsanov.see(rel1(back.local_exponent(0.5, &beta).or_fail("psi")?, a));
    }
    Ok(vec![factor, par, short, regime, fixed, arrears, density, girsanov])
}

fn ccs(dom: SwapLeg, fgn: SwapLeg, collateral: usize) -> SwapSpec {
    SwapSpec { domestic: dom, foreign: fgn, direction: 1.0, collateral }
}

/// Swap pricing against telescoping, brute-force discounting and parity.
pub fn swap_pricing() -> Res<Vec<Measure>> {
    let lim = 1e-12;
    // Par floaters are worth zero before their start and par plus accrual after.
    let mut floater = Measure::new("par floater / notional", lim);
    let model = usd_eur(&UsdEurOptions::default()).or_fail("market")?;
    let res = sim(model, &SimulationConfig::new(3.0, 1.0 / 48.0, 64, 3).with_observations(grid(0.0, 3.0, 0.25)))?;
    let usd = SwapLeg::new(BASE, grid(0.5, 3.0, 0.25), 1e6, LegIndex::Compounded);
    let eur = SwapLeg::new(1, grid(0.5, 3.0, 0.5), 1e6, LegIndex::Compounded);
    for p in 0..res.paths() {
        let v = res.path(p);
        for t in [0.0, 0.25, 0.5] {
            floater.see(leg_value(&v, &usd, BASE, t).or_fail("leg")?.abs() / 1e6);
            floater.see(leg_value(&v, &eur, 1, t).or_fail("leg")?.abs() / 1e6);
        }
        for (t, a) in [(1.0, 0.75), (1.75, 1.5), (3.0, 2.75)] {
            let accrued = v.coll_account(BASE, BASE, t).or_fail("account")? / v.coll_account(BASE, BASE, a).or_fail("account")?;
            floater.see(rel(leg_value(&v, &usd, BASE, t).or_fail("leg")?, 1e6 * accrued));
        }
    }

    let mut fixed = Measure::new("fixed-vs-fixed rel err", lim);
    let (r0, rk, q, x0) = (0.03, 0.015, -0.004, 1.1);
    let det = |r0, rk, q| flat_pair(&FlatPairOptions { base_rate: r0, foreign_rate: rk, basis: q, ..Default::default() }).or_fail("market");
    let res = sim(det(r0, rk, q)?, &SimulationConfig::new(3.0, 0.25, 1, 1))?;
    let sched = vec![0.5, 1.5, 2.5, 3.0];
    let dom = SwapLeg::new(BASE, sched.clone(), 100.0, LegIndex::Zero).with_spread(0.031);
    let fgn = SwapLeg::new(1, sched.clone(), 90.0, LegIndex::Zero).with_spread(0.017);
    for k3 in [0usize, 1] {
        let v = price_ccs(&res.initial(), &ccs(dom.clone(), fgn.clone(), k3), 0.0).or_fail("ccs")?;
        let (ydom, yfgn) = if k3 == 0 { (r0, rk - q) } else { (r0 + q, rk) };
        let leg = |y: f64, n: f64, c: f64| {
            let mut v = -n * (-y * sched[0]).exp() + n * (-y * 3.0f64).exp();
            for w in sched.windows(2) {
                v += n * c * (w[1] - w[0]) * (-y * w[1]).exp();
            }
            v
        };
        fixed.see(rel1(v.value, leg(ydom, 100.0, 0.031) - x0 * leg(yfgn, 90.0, 0.017)));
    }

    let mut mtm = Measure::new("MtM frozen FX vs CCS", lim);
    let res = sim(det(0.025, 0.025, 0.0)?, &SimulationConfig::new(2.0, 1.0 / 48.0, 4, 5).with_observations(grid(0.0, 2.0, 0.25)))?;
    let sched = grid(0.0, 2.0, 0.5);
    let fgn = SwapLeg::new(1, sched.clone(), 80.0, LegIndex::Compounded).with_spread(0.003);
    let reset = ccs(SwapLeg::new(BASE, sched.clone(), 0.0, LegIndex::Compounded).with_spread(0.001).with_reset(true), fgn.clone(), 0);
    let flat = ccs(SwapLeg::new(BASE, sched.clone(), 80.0 * x0, LegIndex::Compounded).with_spread(0.001), fgn, 0);
    mtm.see(rel1(price_mtmccs(&res, &reset).or_fail("mtmccs")?.value, price_ccs(&res.initial(), &flat, 0.0).or_fail("ccs")?.value));
    let dom = SwapLeg::new(BASE, sched.clone(), 100.0, LegIndex::Zero).with_spread(0.02);
    let reset = ccs(dom.clone(), SwapLeg::new(1, sched.clone(), 0.0, LegIndex::Zero).with_spread(0.01).with_reset(true), 1);
    let flat = ccs(dom, SwapLeg::new(1, sched, 100.0 / x0, LegIndex::Zero).with_spread(0.01), 1);
    mtm.see(rel1(price_mtmccs(&res, &reset).or_fail("mtmccs")?.value, price_ccs(&res.initial(), &flat, 0.0).or_fail("ccs")?.value));

    let mut reprice = Measure::new("fair spread re-price |V|/SE", 3.0);
    let model = usd_eur(&UsdEurOptions::default()).or_fail("market")?;
    let mut spec = ccs(
        SwapLeg::new(BASE, grid(0.0, 2.0, 0.5), 0.0, LegIndex::Compounded).with_reset(true),
        SwapLeg::new(1, grid(0.0, 2.0, 0.5), 100.0, LegIndex::Compounded),
        0,
    );
    let obs = spec.observation_times(&model);
    let res = sim(model, &SimulationConfig::new(2.0, 1.0 / 96.0, 40_000, 4).with_observations(obs))?;
    spec.foreign.spread = fair_spread(&res, &spec, LegSide::Foreign, Route::MonteCarlo).or_fail("fair spread")?.spread;
    let v = price_swap_mc(&res, &spec).or_fail("swap")?;
    reprice.see(v.value.abs() / v.std_error.max(1e-12));

    let mut cip = Measure::new("CIP fair spread |s|/SE", 3.0);
    let mut cip_cf = Measure::new("CIP closed-form fair spread", lim);
    let model = flat_pair(&FlatPairOptions { basis: 0.0, curve_vol: 0.01, basis_vol: 0.0, fx_vol: 0.0, ..Default::default() }).or_fail("market")?;
    let spec = ccs(
        SwapLeg::new(BASE, grid(0.0, 2.0, 0.5), 110.0, LegIndex::Compounded),
        SwapLeg::new(1, grid(0.0, 2.0, 0.5), 100.0, LegIndex::Compounded),
        0,
    );
    let obs = spec.observation_times(&model);
    let res = sim(model, &SimulationConfig::new(2.0, 1.0 / 96.0, 50_000, 8).with_observations(obs))?;
    let s = fair_spread(&res, &spec, LegSide::Foreign, Route::MonteCarlo).or_fail("fair spread")?;
    cip.see(s.spread.abs() / s.std_error.max(1e-15));
    cip_cf.see(fair_spread(&res, &spec, LegSide::Foreign, Route::ClosedForm).or_fail("fair spread")?.spread.abs());
    Ok(vec![floater, fixed, mtm, reprice, cip, cip_cf])
}

const ZCB_CASES: [ZcbCase; 5] = [ZcbCase::K0K0, ZcbCase::K0K3(1), ZcbCase::K2K0(1), ZcbCase::K2K2(1), ZcbCase::Unsecured];

/// Zero-coupon bonds priced under the domestic measure and through the dual
/// representation.
pub fn measure_duality() -> Res<Vec<Measure>> {
    let mut exact = Measure::new("deterministic rel err", 1e-12);
    let model = usd_eur(&UsdEurOptions { vol_scale: 0.0, ..Default::default() }).or_fail("market")?;
    let res = sim(model, &SimulationConfig::new(4.0, 1.0 / 48.0, 8, 2))?;
    for case in ZCB_CASES {
        let a = price_zcb(&res.initial(), case, 0.0, 4.0).or_fail("zcb")?;
        exact.see_at(rel1(price_zcb_dual(&res, case, 4.0).or_fail("dual zcb")?.value, a), &format!("{case:?}"));
    }
    let mut z = Measure::new("stochastic |z|", 3.0);
    for measure in [0usize, 1] {
        let model = usd_eur(&UsdEurOptions::default()).or_fail("market")?;
        let res = sim(model, &SimulationConfig::new(4.0, 1.0 / 96.0, 40_000, 9).with_measure(measure))?;
        for case in ZCB_CASES {
            let a = price_zcb(&res.initial(), case, 0.0, 4.0).or_fail("zcb")?;
            let b = price_zcb_dual(&res, case, 4.0).or_fail("dual zcb")?;
            z.see_at(b.z_score(a).abs(), &format!("measure {measure} {case:?}"));
        }
    }
    Ok(vec![exact, z])
}

fn cli(cmd: Command, config: &Path, out: &Path, paths: Option<usize>, drift_scale: Option<f64>) -> Result<(), CliError> {
    let ov = Overrides { seed: None, paths, out_dir: Some(out.to_path_buf()), drift_scale };
    run(cmd, config, &ov).map(|_| ())
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Res<T> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(threads).build().or_fail("thread pool")?.install(f))
}

fn same_files(a: &Path, b: &Path, names: &[&str]) -> Res<bool> {
    for n in names {
        if std::fs::read(a.join(n)).or_fail(n)? != std::fs::read(b.join(n)).or_fail(n)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Determinism, golden output and the drift mutation, through the CLI
/// library. `fixtures` holds the CLI test fixtures and `work` is an empty
/// scratch directory.
pub fn determinism_and_interface(fixtures: &Path, work: &Path) -> Res<Vec<Measure>> {
    let dir = |n: &str| -> Res<PathBuf> {
        let d = work.join(n);
        std::fs::create_dir_all(&d).or_fail("scratch dir")?;
        Ok(d)
    };
    let golden = fixtures.join("golden.toml");
    let reference = fixtures.join("reference.toml");

    let mut reruns = Measure::new("differing rerun files", 0.0);
    let (a, b, c) = (dir("sim_a")?, dir("sim_b")?, dir("sim_c")?);
    in_pool(1, || cli(Command::Simulate, &golden, &a, None, None))?.or_fail("simulate")?;
    in_pool(1, || cli(Command::Simulate, &golden, &b, None, None))?.or_fail("simulate")?;
    in_pool(3, || cli(Command::Simulate, &golden, &c, None, None))?.or_fail("simulate")?;
    let files = ["simulation.csv", "manifest.json"];
    reruns.see(!same_files(&a, &b, &files)? as u8 as f64);
    reruns.see(!same_files(&a, &c, &files)? as u8 as f64);
    let (a, b) = (dir("verify_a")?, dir("verify_b")?);
    in_pool(1, || cli(Command::Verify, &reference, &a, Some(4000), None))?.or_fail("verify")?;
    in_pool(3, || cli(Command::Verify, &reference, &b, Some(4000), None))?.or_fail("verify")?;
    reruns.see(!same_files(&a, &b, &["verify.csv", "manifest.json"])? as u8 as f64);

    let mut fixture = Measure::new("golden fixture mismatch", 0.0);
    let got = std::fs::read(work.join("sim_a").join("simulation.csv")).or_fail("simulation.csv")?;
    let want = std::fs::read(fixtures.join("golden_simulation.csv")).or_fail("golden_simulation.csv")?;
    fixture.see((got != want) as u8 as f64);

    let mut mutation = Measure::above("corrupted drift max |z|", 5.0);
    let m = dir("mutation")?;
    match cli(Command::Verify, &reference, &m, None, Some(30.0)) {
        Err(e) if e.exit_code() == 3 => {}
        Err(e) => return Err(format!("mutation run: unexpected error {e}")),
        Ok(()) => return Err("mutation run passed verification".into()),
    }
    let text = std::fs::read_to_string(m.join("verify.csv")).or_fail("verify.csv")?;
    let mut header = text.lines().next().unwrap_or_default().split(',');
    let zcol = header.position(|h| h == "z").ok_or("verify.csv has no z column")?;
    let worst = text
        .lines()
        .skip(1)
        .filter_map(|l| l.split(',').nth(zcol).and_then(|z| z.parse::<f64>().ok()))
        .fold(0.0f64, |a, z| a.max(z.abs()));
    mutation.see(worst);
    Ok(vec![reruns, fixture, mutation])
}
