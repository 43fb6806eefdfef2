use std::sync::Arc;

use xccy_hjm::engine::SimResult;
use xccy_hjm::model::BASE;
use xccy_hjm::presets::{flat_pair, usd_eur, FlatPairOptions, UsdEurOptions};
use xccy_hjm::pricing::*;
use xccy_hjm::{simulate, Error, MarketModel, SimulationConfig};

fn run(model: MarketModel, horizon: f64, dt: f64, paths: usize, seed: u64, obs: Vec<f64>) -> SimResult {
    let cfg = SimulationConfig::new(horizon, dt, paths, seed).with_observations(obs);
    simulate(Arc::new(model), &cfg).unwrap()
}

fn grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step).round() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn ccs(dom: SwapLeg, fgn: SwapLeg, collateral: usize) -> SwapSpec {
    SwapSpec { domestic: dom, foreign: fgn, direction: 1.0, collateral }
}

fn deterministic_pair(r0: f64, rk: f64, q: f64) -> MarketModel {
    flat_pair(&FlatPairOptions { base_rate: r0, foreign_rate: rk, basis: q, ..Default::default() }).unwrap()
}

#[test]
fn fixed_leg_matches_brute_force_discounting() {
    let res = run(deterministic_pair(0.02, 0.02, 0.0), 2.0, 0.25, 1, 1, vec![1.0]);
    let leg = SwapLeg::new(BASE, vec![0.0, 1.0, 2.0], 1.0, LegIndex::Zero).with_spread(0.02);
    let v = leg_value(&res.initial(), &leg, BASE, 0.0).unwrap();
    let oracle = -1.0 + (-0.04f64).exp() + 0.02 * ((-0.02f64).exp() + (-0.04f64).exp());
    assert!(close(v, oracle, 1e-12), "{v} vs {oracle}");
}

#[test]
fn fixed_vs_fixed_ccs_matches_brute_force() {
    let (r0, rk, q, x0) = (0.03, 0.015, -0.004, 1.1);
    let res = run(deterministic_pair(r0, rk, q), 3.0, 0.25, 1, 1, vec![]);
    let sched = vec![0.5, 1.5, 2.5, 3.0];
    let dom = SwapLeg::new(BASE, sched.clone(), 100.0, LegIndex::Zero).with_spread(0.031);
    let fgn = SwapLeg::new(1, sched.clone(), 90.0, LegIndex::Zero).with_spread(0.017);
    for k3 in [0usize, 1] {
        let spec = ccs(dom.clone(), fgn.clone(), k3);
        let v = price_ccs(&res.initial(), &spec, 0.0).unwrap();
        // Base-collateral discount rate r0 + q^{0,k3}; foreign rk + q^{k,k3}.
        let (ydom, yfgn) = if k3 == 0 { (r0, rk - q) } else { (r0 + q, rk) };
        let leg = |y: f64, n: f64, c: f64| {
            let mut v = -n * (-y * sched[0]).exp() + n * (-y * 3.0f64).exp();
            for w in sched.windows(2) {
                v += n * c * (w[1] - w[0]) * (-y * w[1]).exp();
            }
            v
        };
        let oracle = leg(ydom, 100.0, 0.031) - x0 * leg(yfgn, 90.0, 0.017);
        assert!(close(v.value, oracle, 1e-12), "k3={k3}: {} vs {oracle}", v.value);
    }
}

#[test]
fn par_floater_telescopes_on_every_path() {
    let res = run(usd_eur(&UsdEurOptions::default()).unwrap(), 3.0, 1.0 / 48.0, 64, 3, grid(0.0, 3.0, 0.25));
    let leg = SwapLeg::new(BASE, grid(0.5, 3.0, 0.25), 1e6, LegIndex::Compounded);
    let eur = SwapLeg::new(1, grid(0.5, 3.0, 0.5), 1e6, LegIndex::Compounded);
    for p in 0..res.paths() {
        let view = res.path(p);
        for t in [0.0, 0.25, 0.5] {
            let v = leg_value(&view, &leg, BASE, t).unwrap();
            assert!(v.abs() <= 1e-12 * 1e6, "path {p} t={t}: {v}");
            let v = leg_value(&view, &eur, 1, t).unwrap();
            assert!(v.abs() <= 1e-12 * 1e6, "path {p} t={t}: {v}");
        }
        // After the start the floater is worth par plus accrued interest.
        for (t, a) in [(1.0, 0.75), (1.75, 1.5), (3.0, 2.75)] {
            let v = leg_value(&view, &leg, BASE, t).unwrap();
            let accrued = view.coll_account(BASE, BASE, t).unwrap() / view.coll_account(BASE, BASE, a).unwrap();
            assert!(close(v, 1e6 * accrued, 1e-12), "path {p} t={t}: {v}");
        }
    }
}

#[test]
fn zero_notional_leg_leaves_the_other_leg() {
    let res = run(usd_eur(&UsdEurOptions::default()).unwrap(), 2.0, 1.0 / 48.0, 1, 1, vec![]);
    let view = res.initial();
    let dom = SwapLeg::new(BASE, grid(0.0, 2.0, 0.5), 0.0, LegIndex::Family(0));
    let fgn = SwapLeg::new(1, grid(0.0, 2.0, 1.0), 50.0, LegIndex::Compounded).with_spread(0.001);
    let mut spec = ccs(dom, fgn, 0);
    spec.direction = -1.0;
    let v = price_ccs(&view, &spec, 0.0).unwrap();
    let x = view.fx(BASE, 1, 0.0).unwrap();
    assert!(close(v.value, x * leg_value(&view, &spec.foreign, 0, 0.0).unwrap(), 1e-14));
}

#[test]
fn ccs_is_affine_in_notionals_and_spreads() {
    let res = run(usd_eur(&UsdEurOptions::default()).unwrap(), 3.0, 1.0 / 48.0, 1, 1, vec![]);
    let view = res.initial();
    let base = ccs(
        SwapLeg::new(BASE, grid(0.5, 3.0, 0.5), 100.0, LegIndex::Family(1)).with_spread(0.002),
        SwapLeg::new(1, grid(0.5, 3.0, 0.5), 90.0, LegIndex::Compounded).with_spread(-0.001),
        1,
    );
    let bumps: [fn(&mut SwapSpec, f64); 4] = [
        |s, x| s.domestic.notional = x,
        |s, x| s.foreign.notional = x,
        |s, x| s.domestic.spread = x,
        |s, x| s.foreign.spread = x,
    ];
    for (i, bump) in bumps.iter().enumerate() {
        let value = |x: f64| {
            let mut s = base.clone();
            bump(&mut s, x);
            price_ccs(&view, &s, 0.0).unwrap().value
        };
        let (a, b, c) = (value(-1.0), value(0.5), value(2.0));
        // Equal spacing 1.5: the midpoint lies on the chord.
        let chord = 0.5 * (a + c);
        assert!((b - chord).abs() <= 1e-12 * a.abs().max(c.abs()).max(1.0), "bump {i}: {b} vs {chord}");
    }
}

#[test]
fn closed_form_and_cashflow_routes_agree() {
    let model = usd_eur(&UsdEurOptions::default()).unwrap();
    for k3 in [0usize, 1] {
        let spec = ccs(
            SwapLeg::new(BASE, grid(0.5, 3.0, 0.5), 100.0, LegIndex::Family(k3)).with_spread(0.001),
            SwapLeg::new(1, grid(0.5, 3.0, 0.5), 95.0, LegIndex::Compounded).with_spread(0.002),
            k3,
        );
        let obs = spec.observation_times(&model);
        let res = run(model.clone(), 3.0, 1.0 / 48.0, 20_000, 11 + k3 as u64, obs);
        let cf = price_ccs(&res.initial(), &spec, 0.0).unwrap();
        let mc = price_swap_mc(&res, &spec).unwrap();
        let z = (mc.value - cf.value) / mc.std_error;
        assert!(z.abs() < 3.0, "k3={k3}: closed {} mc {} se {} z {z}", cf.value, mc.value, mc.std_error);
    }
}

fn frozen_fx_market() -> MarketModel {
    flat_pair(&FlatPairOptions { base_rate: 0.025, foreign_rate: 0.025, basis: 0.0, ..Default::default() }).unwrap()
}

#[test]
fn mtmccs_without_fx_moves_equals_ccs() {
    let res = run(frozen_fx_market(), 2.0, 1.0 / 48.0, 4, 5, grid(0.0, 2.0, 0.25));
    let x0 = 1.1;
    let sched = grid(0.0, 2.0, 0.5);
    let fgn = SwapLeg::new(1, sched.clone(), 80.0, LegIndex::Compounded).with_spread(0.003);
    // Domestic leg resets and borrows the foreign notional.
    let reset = ccs(SwapLeg::new(BASE, sched.clone(), 0.0, LegIndex::Compounded).with_spread(0.001).with_reset(true), fgn.clone(), 0);
    let fixed = ccs(SwapLeg::new(BASE, sched.clone(), 80.0 * x0, LegIndex::Compounded).with_spread(0.001), fgn, 0);
    let a = price_mtmccs(&res, &reset).unwrap();
    let b = price_ccs(&res.initial(), &fixed, 0.0).unwrap();
    assert!(close(a.value, b.value, 1e-12), "{} vs {}", a.value, b.value);
    // Foreign leg resets against the domestic notional.
    let dom = SwapLeg::new(BASE, sched.clone(), 100.0, LegIndex::Zero).with_spread(0.02);
    let reset = ccs(dom.clone(), SwapLeg::new(1, sched.clone(), 0.0, LegIndex::Zero).with_spread(0.01).with_reset(true), 1);
    let fixed = ccs(dom, SwapLeg::new(1, sched, 100.0 / x0, LegIndex::Zero).with_spread(0.01), 1);
    let a = price_mtmccs(&res, &reset).unwrap();
    let b = price_ccs(&res.initial(), &fixed, 0.0).unwrap();
    assert!(close(a.value, b.value, 1e-12), "{} vs {}", a.value, b.value);
}

#[test]
fn one_period_mtmccs_by_hand() {
    let (r0, rk, q) = (0.03, 0.01, -0.003);
    let res = run(deterministic_pair(r0, rk, q), 1.0, 0.25, 1, 1, vec![]);
    let (n, s0) = (100.0, 0.004);
    let leg = SwapLeg::new(1, vec![0.0, 1.0], 0.0, LegIndex::Zero).with_spread(s0).with_reset(true);
    let spec = ccs(SwapLeg::new(BASE, vec![0.0, 1.0], n, LegIndex::Zero), leg, 0);
    let v = price_mtmccs(&res, &spec).unwrap();
    // Foreign leg in EUR: N X0^{k,k0} (B^{k,k0}(0,1)(1 + S0) - 1), with X^{k,k0} = 1 / X^{k0,k}.
    let x0 = 1.1;
    let by_hand = n / x0 * ((-(rk - q)).exp() * (1.0 + s0) - 1.0);
    assert!(close(v.foreign, by_hand, 1e-12), "{} vs {by_hand}", v.foreign);
}

#[test]
fn mtmccs_matches_conditioned_oracle() {
    // Condition each period on G_{t_{n-1}}: the period's flows are then a
    // one-period fixed leg with notional N^k X^{k0,k}_{t_{n-1}}, valued in
    // closed form on the path.
    let model = usd_eur(&UsdEurOptions::default()).unwrap();
    let sched = vec![0.5, 1.0, 1.5];
    let spec = ccs(
        SwapLeg::new(BASE, sched.clone(), 0.0, LegIndex::Zero).with_spread(0.03).with_reset(true),
        SwapLeg::new(1, sched.clone(), 100.0, LegIndex::Zero).with_spread(0.02),
        0,
    );
    let res = run(model, 1.5, 1.0 / 48.0, 20_000, 21, sched.clone());
    let mc = price_mtmccs(&res, &spec).unwrap();
    let mut oracle = CashflowStream::new(0);
    for w in sched.windows(2) {
        let (a, b) = (w[0], w[1]);
        oracle = oracle.path(a, BASE, move |p| {
            let x = p.fx(BASE, 1, a)?;
            Ok(100.0 * x * (p.bond(BASE, 0, a, b)? * (1.0 + 0.5 * 0.03) - 1.0))
        });
    }
    let dom = price_full_collateral(&res, &oracle).unwrap();
    let fixed = leg_value(&res.initial(), &spec.foreign, 0, 0.0).unwrap() * res.initial().fx(BASE, 1, 0.0).unwrap();
    let want = dom.value - fixed;
    let se = (mc.std_error.powi(2) + dom.std_error.powi(2)).sqrt();
    assert!(((mc.value - want) / se).abs() < 3.0, "mc {} oracle {want} se {se}", mc.value);
}

#[test]
fn fair_spread_closed_form_reprices_to_zero() {
    let res = run(usd_eur(&UsdEurOptions::default()).unwrap(), 3.0, 1.0 / 48.0, 1, 1, vec![]);
    let mut spec = ccs(
        SwapLeg::new(BASE, grid(0.5, 3.0, 0.5), 100.0, LegIndex::Family(0)),
        SwapLeg::new(1, grid(0.5, 3.0, 0.5), 90.0, LegIndex::Compounded),
        0,
    );
    let s = fair_spread(&res, &spec, LegSide::Foreign, Route::ClosedForm).unwrap();
    spec.foreign.spread = s.spread;
    let v = price_ccs(&res.initial(), &spec, 0.0).unwrap();
    assert!(v.value.abs() <= 1e-10 * 100.0, "{}", v.value);
}

#[test]
fn fair_spread_of_symmetric_collateral_legs_is_zero() {
    let res = run(deterministic_pair(0.03, 0.03, 0.0), 2.0, 0.25, 1, 1, vec![]);
    let spec = ccs(
        SwapLeg::new(BASE, grid(0.0, 2.0, 0.5), 110.0, LegIndex::Compounded),
        SwapLeg::new(1, grid(0.0, 2.0, 0.5), 100.0, LegIndex::Compounded),
        0,
    );
    let s = fair_spread(&res, &spec, LegSide::Domestic, Route::ClosedForm).unwrap();
    assert!(s.spread.abs() < 1e-14, "{}", s.spread);
}

#[test]
fn fair_spread_mc_reprices_within_error() {
    let model = usd_eur(&UsdEurOptions::default()).unwrap();
    let mut spec = ccs(
        SwapLeg::new(BASE, grid(0.0, 2.0, 0.5), 0.0, LegIndex::Compounded).with_reset(true),
        SwapLeg::new(1, grid(0.0, 2.0, 0.5), 100.0, LegIndex::Compounded),
        0,
    );
    let res = run(model, 2.0, 1.0 / 48.0, 8_000, 4, spec.observation_times(&usd_eur(&UsdEurOptions::default()).unwrap()));
    let s = fair_spread(&res, &spec, LegSide::Foreign, Route::MonteCarlo).unwrap();
    spec.foreign.spread = s.spread;
    let v = price_swap_mc(&res, &spec).unwrap();
    assert!(v.value.abs() <= 3.0 * v.std_error.max(1e-12), "{} se {}", v.value, v.std_error);
}

#[test]
fn cip_market_has_zero_fair_spread() {
    let model = flat_pair(&FlatPairOptions { basis: 0.0, curve_vol: 0.01, ..Default::default() }).unwrap();
    let spec = ccs(
        SwapLeg::new(BASE, grid(0.0, 2.0, 0.5), 110.0, LegIndex::Compounded),
        SwapLeg::new(1, grid(0.0, 2.0, 0.5), 100.0, LegIndex::Compounded),
        0,
    );
    let obs = spec.observation_times(&model);
    let res = run(model, 2.0, 1.0 / 48.0, 20_000, 8, obs);
    let s = fair_spread(&res, &spec, LegSide::Foreign, Route::MonteCarlo).unwrap();
    assert!(s.spread.abs() <= 3.0 * s.std_error.max(1e-15), "{} se {}", s.spread, s.std_error);
    let cf = fair_spread(&res, &spec, LegSide::Foreign, Route::ClosedForm).unwrap();
    assert!(cf.spread.abs() < 1e-12, "{}", cf.spread);
}

#[test]
fn zero_notional_gives_degenerate_sensitivity() {
    let res = run(deterministic_pair(0.03, 0.02, 0.0), 2.0, 0.25, 1, 1, vec![]);
    let spec = ccs(
        SwapLeg::new(BASE, vec![0.0, 1.0, 2.0], 100.0, LegIndex::Zero),
        SwapLeg::new(1, vec![0.0, 1.0, 2.0], 0.0, LegIndex::Zero),
        0,
    );
    assert_eq!(fair_spread(&res, &spec, LegSide::Foreign, Route::ClosedForm), Err(Error::DegenerateSensitivity));
}

#[test]
fn zcb_closed_form_examples() {
    let m = flat_pair(&FlatPairOptions { base_rate: 0.03, unsecured_spread: 0.01, ..Default::default() }).unwrap();
    let res = run(m, 2.0, 0.25, 1, 1, vec![]);
    let v = res.initial();
    assert!(close(price_zcb(&v, ZcbCase::K0K0, 0.0, 2.0).unwrap(), (-0.06f64).exp(), 1e-14));
    assert!(close(price_zcb(&v, ZcbCase::Unsecured, 0.0, 1.0).unwrap(), (-0.04f64).exp(), 1e-14));
}

#[test]
fn full_collateral_unit_cashflows() {
    let (r0, rk, q, x0) = (0.03, 0.02, -0.002, 1.1);
    let res = run(deterministic_pair(r0, rk, q), 3.0, 0.25, 1, 1, vec![2.5]);
    let v = res.initial();
    let t = 2.5;
    let k0k0 = full_collateral_closed(&v, &CashflowStream::new(0).fixed(t, 0, 1.0), 0.0).unwrap();
    assert!(close(k0k0, v.bond(0, 0, 0.0, t).unwrap(), 1e-15));
    let k0k3 = full_collateral_closed(&v, &CashflowStream::new(1).fixed(t, 0, 1.0), 0.0).unwrap();
    assert!(close(k0k3, v.bond(0, 1, 0.0, t).unwrap(), 1e-15));
    assert!(close(k0k3, (-(r0 + q) * t).exp(), 1e-13));
    // Foreign unit cashflow, domestic collateral: X0 exp(-(r^{c,k} - q^{k0,k}) T).
    let k2k0 = full_collateral_closed(&v, &CashflowStream::new(0).fixed(t, 1, 1.0), 0.0).unwrap();
    assert!(close(k2k0, x0 * (-(rk - q) * t).exp(), 1e-13), "{k2k0}");
    let mc = price_full_collateral(&res, &CashflowStream::new(0).fixed(t, 1, 1.0)).unwrap();
    assert!(close(mc.value, k2k0, 1e-13));
}

#[test]
fn uncollateralized_streams_are_rejected() {
    let res = run(deterministic_pair(0.03, 0.02, 0.0), 1.0, 0.25, 1, 1, vec![]);
    let mut s = CashflowStream::new(0).fixed(1.0, 0, 1.0);
    s.fully_collateralized = false;
    assert_eq!(price_full_collateral(&res, &s).unwrap_err(), Error::UncollateralizedUnsupported);
}

fn all_cases() -> [ZcbCase; 5] {
    [ZcbCase::K0K0, ZcbCase::K0K3(1), ZcbCase::K2K0(1), ZcbCase::K2K2(1), ZcbCase::Unsecured]
}

#[test]
fn zcb_duality_is_exact_in_deterministic_mode() {
    let model = usd_eur(&UsdEurOptions { vol_scale: 0.0, ..Default::default() }).unwrap();
    let res = run(model, 4.0, 1.0 / 48.0, 8, 2, vec![]);
    for case in all_cases() {
        let a = price_zcb(&res.initial(), case, 0.0, 4.0).unwrap();
        let b = price_zcb_dual(&res, case, 4.0).unwrap();
        assert!(close(a, b.value, 1e-12), "{case:?}: {a} vs {}", b.value);
    }
}

#[test]
fn zcb_duality_holds_within_three_errors() {
    for measure in [0usize, 1] {
        let model = usd_eur(&UsdEurOptions::default()).unwrap();
        let cfg = SimulationConfig::new(4.0, 1.0 / 48.0, 20_000, 9).with_measure(measure);
        let res = simulate(Arc::new(model), &cfg).unwrap();
        for case in all_cases() {
            let a = price_zcb(&res.initial(), case, 0.0, 4.0).unwrap();
            let b = price_zcb_dual(&res, case, 4.0).unwrap();
            let z = b.z_score(a);
            assert!(z.abs() < 3.0, "measure {measure} {case:?}: {a} vs {} (z {z})", b.value);
        }
    }
}

#[test]
fn discounted_full_value_is_a_martingale() {
    let model = usd_eur(&UsdEurOptions::default()).unwrap();
    let stream = CashflowStream::new(1).fixed(1.0, 0, 2.0).fixed(2.0, 1, -1.0).fixed(3.0, 1, 1.5);
    let res = run(model, 3.0, 1.0 / 48.0, 20_000, 13, vec![0.5, 1.0, 1.5, 2.0, 2.5]);
    let v0 = full_collateral_closed(&res.initial(), &stream, 0.0).unwrap();
    for t in [0.5, 1.5, 2.5] {
        let est = xccy_hjm::measures::expectation(&res, &xccy_hjm::MeasureId::Spot(BASE), 3.0, |p| {
            let mut paid = 0.0;
            for c in stream.flows.iter().filter(|c| c.time < t) {
                let Amount::Fixed(a) = c.amount else { unreachable!() };
                paid += a * p.fx(BASE, c.currency, c.time)? / p.coll_account(BASE, 1, c.time)?;
            }
            Ok(full_collateral_closed(p, &stream, t)? / p.coll_account(BASE, 1, t)? + paid)
        })
        .unwrap();
        assert!(est.z_score(v0).abs() < 3.0, "t={t}: {} vs {v0} se {}", est.value, est.std_error);
    }
}

#[test]
fn isda_fallback_adds_the_credit_spread_annuity() {
    let res = run(usd_eur(&UsdEurOptions::default()).unwrap(), 3.0, 1.0 / 48.0, 16, 1, grid(0.0, 3.0, 0.25));
    let leg = SwapLeg::new(BASE, grid(0.5, 3.0, 0.25), 1e4, LegIndex::Family(0)).with_spread(0.001);
    for p in [0usize, 7, 15] {
        let view = res.path(p);
        for t in [0.0, 1.0, 2.0] {
            let zero = fallback_leg(&view, &leg, 1, Fallback::IsdaCompounded { credit_spread: 0.0 }, t).unwrap();
            let comp = SwapLeg { index: LegIndex::Compounded, ..leg.clone() };
            assert!(close(zero, leg_value(&view, &comp, 1, t).unwrap(), 1e-14));
            let cs = 0.0026;
            let shifted = fallback_leg(&view, &leg, 1, Fallback::IsdaCompounded { credit_spread: cs }, t).unwrap();
            let mut annuity = 0.0;
            for w in leg.schedule.windows(2) {
                if t <= w[1] {
                    annuity += (w[1] - w[0]) * view.bond(BASE, 1, t, w[1]).unwrap();
                }
            }
            assert!(close(shifted - zero, 1e4 * cs * annuity, 1e-12));
        }
    }
}

#[test]
fn libor_fallback_difference_by_hand() {
    let (f, h, cs) = (0.03, 0.0015, 0.0026);
    let m = flat_pair(&FlatPairOptions { base_rate: f, ibor_spread: Some(h), ..Default::default() }).unwrap();
    let res = run(m, 2.0, 0.25, 1, 1, vec![]);
    let view = res.initial();
    let sched = grid(0.0, 2.0, 0.25);
    let ibor = SwapLeg::new(BASE, sched.clone(), 1.0, LegIndex::Family(0));
    let pre = leg_value(&view, &ibor, 0, 0.0).unwrap();
    let post = fallback_leg(&view, &ibor, 0, Fallback::IsdaCompounded { credit_spread: cs }, 0.0).unwrap();
    // Per period: e^{-f t_{n-1}} (e^{-h t_n} - 1) - CS delta e^{-f t_n}.
    let mut hand = 0.0;
    for w in sched.windows(2) {
        hand += (-f * w[0]).exp() * ((-h * w[1]).exp() - 1.0) - cs * 0.25 * (-f * w[1]).exp();
    }
    assert!(close(pre - post, hand, 1e-12), "{} vs {hand}", pre - post);
    let same = fallback_leg(&view, &ibor, 0, Fallback::AmeriborLike { family: 0 }, 0.0).unwrap();
    assert_eq!(same, pre);
}

#[test]
fn general_collateral_reduces_to_full_collateral() {
    let model = usd_eur(&UsdEurOptions { vol_scale: 0.0, ..Default::default() }).unwrap();
    let flows = [(0.5, 3.0), (1.25, -7.0), (2.0, 2.0), (3.0, 4.5)];
    for k3 in [0usize, 1] {
        let rates = DeterministicRates::from_model(&model, k3).unwrap();
        for t in [0.0, 0.75, 2.0] {
            let a = general_collateral_value(&rates, &flows, t).unwrap();
            let b = full_collateral_deterministic(&model, k3, &flows, t).unwrap();
            assert!(close(a, b, 1e-12), "k3={k3} t={t}: {a} vs {b}");
        }
    }
    // And against the simulated deterministic market.
    let res = run(model.clone(), 3.0, 1.0 / 48.0, 1, 1, vec![]);
    let mut stream = CashflowStream::new(1);
    for (s, a) in flows {
        stream = stream.fixed(s, 0, a);
    }
    let sim = full_collateral_closed(&res.initial(), &stream, 0.0).unwrap();
    let rates = DeterministicRates::from_model(&model, 1).unwrap();
    let b6 = general_collateral_value(&rates, &flows, 0.0).unwrap();
    assert!(close(sim, b6, 1e-12), "{sim} vs {b6}");
}

/// Picard iteration of the integral equation on a fine grid, with the
/// collateral remunerated at the borrowing or lending rate by sign. Flows
/// sit on grid nodes; each interval uses the right limit at its left end.
fn integral_equation_oracle(rates: &DeterministicRates, flows: &[(f64, f64)], t: f64) -> f64 {
    let end = flows.iter().map(|x| x.0).fold(t, f64::max);
    let n = 24_000;
    let h = (end - t) / n as f64;
    let times: Vec<f64> = (0..=n).map(|i| t + i as f64 * h).collect();
    let node = |x: f64| ((x - t) / h).round() as usize;
    let mut flow_at = vec![0.0; n + 1];
    for (x, a) in flows {
        flow_at[node(*x)] += a;
    }
    let r0 = |u: f64| rates.unsecured_base.value(u);
    let mut logb = vec![0.0; n + 1];
    for i in 1..=n {
        logb[i] = logb[i - 1] + 0.5 * (r0(times[i - 1]) + r0(times[i])) * h;
    }
    let f = |u: f64, s: f64, lb: f64| {
        let (pos, neg) = (s.max(0.0), (-s).max(0.0));
        let (rb, rl) = (rates.collateral_borrow.value(u), rates.collateral_lend.value(u));
        let r3 = rates.unsecured_collateral.value(u);
        ((r0(u) - rb) * pos - (r0(u) - rl) * neg - s * (r0(u) - r3)) * (-lb).exp()
    };
    // s[i] is the value just before the flows at node i are paid.
    let mut s = vec![0.0; n + 1];
    for _ in 0..80 {
        let mut next = vec![0.0; n + 1];
        let (mut acc, mut paid) = (0.0, 0.0);
        for i in (0..=n).rev() {
            if i < n {
                let left = s[i] - flow_at[i];
                acc += 0.5 * (f(times[i], left, logb[i]) + f(times[i + 1], s[i + 1], logb[i + 1])) * h;
            }
            paid += flow_at[i] * (-logb[i]).exp();
            next[i] = (paid + acc) * logb[i].exp();
        }
        s = next;
    }
    s[0]
}

#[test]
fn asymmetric_collateral_rates_match_integral_equation() {
    let model = usd_eur(&UsdEurOptions { vol_scale: 0.0, ..Default::default() }).unwrap();
    let mut rates = DeterministicRates::from_model(&model, 1).unwrap();
    rates.collateral_borrow = xccy_hjm::InitialCurve::new(vec![0.0, 2.0], vec![0.024, 0.03]).unwrap();
    rates.collateral_lend = xccy_hjm::InitialCurve::flat(0.015);
    // Sign changes: value negative early, positive later.
    let flows = [(0.5, 5.0), (1.0, -12.0), (2.0, 4.0), (3.0, 6.0)];
    let a = general_collateral_value(&rates, &flows, 0.0).unwrap();
    let b = integral_equation_oracle(&rates, &flows, 0.0);
    assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    let sym = full_collateral_deterministic(&model, 1, &flows, 0.0).unwrap();
    assert!((a - sym).abs() > 1e-4, "asymmetric rates should move the value");
}
