use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xccy_hjm::measures::MeasureId;
use xccy_hjm::model::{ModelScratch, BASE};
use xccy_hjm::{
    BasisSpec, Characteristics, CurrencyCurve, DriverSpec, FxSpec, InitialCurve, JumpComponent, JumpSize, MarketModel,
    PiecewiseVector, SpreadFamily, SurfaceId, VolTerm, VolatilitySpec,
};

const D: usize = 3;

/// Constant plus exponentially damped volatility, with its integral known
/// in closed form to the test.
#[derive(Clone)]
struct Vol {
    flat: Vec<f64>,
    damped: Vec<f64>,
    decay: f64,
}

impl Vol {
    fn random(rng: &mut ChaCha8Rng, scale: f64) -> Vol {
        Vol {
            flat: (0..D).map(|_| rng.random_range(-scale..scale)).collect(),
            damped: (0..D).map(|_| rng.random_range(-scale..scale)).collect(),
            decay: rng.random_range(0.05..0.8),
        }
    }

    fn spec(&self) -> VolatilitySpec {
        VolatilitySpec::new(
            D,
            vec![
                VolTerm::Constant { loading: DVector::from_column_slice(&self.flat) },
                VolTerm::Exponential { loading: DVector::from_column_slice(&self.damped), decay: self.decay },
            ],
        )
        .unwrap()
    }

    /// `Sigma_t(T)`, zero when `T <= t`.
    fn big(&self, t: f64, maturity: f64) -> Vec<f64> {
        let tau = (maturity - t).max(0.0);
        let e = (1.0 - (-self.decay * tau).exp()) / self.decay;
        (0..D).map(|i| self.flat[i] * tau + self.damped[i] * e).collect()
    }
}

struct Setup {
    model: MarketModel,
    curve: [Vol; 2],
    basis: Vol,
    spread: Vol,
}

fn random_setup(rng: &mut ChaCha8Rng) -> Setup {
    let a = DMatrix::from_fn(D, D, |_, _| rng.random_range(-0.6..0.6));
    let mut chars = Characteristics::brownian(DVector::from_fn(D, |_, _| rng.random_range(-0.02..0.02)), &a * a.transpose());
    let size = if rng.random_bool(0.5) {
        JumpSize::TwoPoint { up: rng.random_range(0.2..1.2), down: rng.random_range(-1.2..-0.2), p_up: 0.4 }
    } else {
        JumpSize::Gaussian { mean: rng.random_range(-0.3..0.3), std: rng.random_range(0.1..0.6) }
    };
    chars.jumps.push(JumpComponent {
        intensity: rng.random_range(0.2..1.5),
        size,
        loading: DVector::from_fn(D, |_, _| rng.random_range(-1.2..1.2)),
    });
    let driver = DriverSpec::constant(MeasureId::Spot(BASE), chars).unwrap();
    let curve = [Vol::random(rng, 0.02), Vol::random(rng, 0.02)];
    let basis = Vol::random(rng, 0.005);
    let spread = Vol::random(rng, 0.005);
    let collateral = rng.random_range(0..2);
    let fix_adj = [0.0, 0.25, 0.5][rng.random_range(0..3)];
    let pay_adj = [0.25, 0.5, 1.0][rng.random_range(0..3)];
    let currencies = ["USD", "EUR"]
        .iter()
        .zip(&curve)
        .map(|(n, v)| CurrencyCurve { name: n.to_string(), initial: InitialCurve::flat(0.02), vol: v.spec() })
        .collect();
    let fx_vol = DVector::from_fn(D, |_, _| rng.random_range(-0.1..0.1));
    let model = MarketModel::new(
        driver,
        currencies,
        vec![None, Some(BasisSpec { initial: InitialCurve::flat(-0.002), vol: basis.spec() })],
        vec![None, Some(FxSpec::new(BASE, 1, 1.1, PiecewiseVector::constant(fx_vol)).unwrap())],
        InitialCurve::flat(0.0),
        vec![SpreadFamily {
            name: "IDX".into(),
            collateral,
            fix_adj,
            pay_adj,
            initial: InitialCurve::flat(0.001),
            vol: spread.spec(),
        }],
    )
    .unwrap();
    Setup { model, curve, basis, spread }
}

fn neg_sum(parts: &[&[f64]]) -> Vec<f64> {
    (0..D).map(|i| -parts.iter().map(|p| p[i]).sum::<f64>()).collect()
}

/// `int_a^b alpha_t(u) du` of the pointwise module drift, by adaptive
/// quadrature split at the given interior kinks.
fn integrate_drift(model: &MarketModel, s: SurfaceId, t: f64, a: f64, b: f64, kinks: &[f64]) -> f64 {
    let mut pts = vec![a, b];
    pts.extend(kinks.iter().copied().filter(|k| *k > a && *k < b));
    pts.sort_by(f64::total_cmp);
    pts.windows(2)
        .map(|w| {
            let ws = std::cell::RefCell::new(ModelScratch::new(D));
            quadrature::double_exponential::integrate(|u| model.drift(s, t, u, &mut ws.borrow_mut()).unwrap(), w[0], w[1], 1e-15)
                .integral
        })
        .sum()
}

fn assert_close(lhs: f64, rhs: f64, what: &str) {
    assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs(), "{what}: {lhs} vs {rhs}");
}

#[test]
fn collateral_curve_drift_integrates_to_psi() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..50 {
        let s = random_setup(&mut rng);
        let k = case % 2;
        let t = rng.random_range(0.0..4.0);
        let maturity = t + rng.random_range(0.01..6.0);
        let lhs = integrate_drift(&s.model, SurfaceId::Curve(k), t, t, maturity, &[]);
        let beta = neg_sum(&[&s.curve[k].big(t, maturity)]);
        let rhs = s.model.spot_driver(k).local_exponent(t, &beta).unwrap();
        assert_close(lhs, rhs, &format!("case {case}, currency {k}"));
    }
}

#[test]
fn basis_drift_integrates_to_psi_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for case in 0..50 {
        let s = random_setup(&mut rng);
        let t = rng.random_range(0.0..4.0);
        let maturity = t + rng.random_range(0.01..6.0);
        let lhs = integrate_drift(&s.model, SurfaceId::Basis(1), t, t, maturity, &[]);
        let c = s.curve[BASE].big(t, maturity);
        let q = s.basis.big(t, maturity);
        let psi = |b: Vec<f64>| s.model.driver.local_exponent(t, &b).unwrap();
        let rhs = psi(neg_sum(&[&c, &q])) - psi(neg_sum(&[&c]));
        assert_close(lhs, rhs, &format!("case {case}"));
    }
}

#[test]
fn foreign_collateral_drift_integrates_to_psi() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for case in 0..50 {
        let s = random_setup(&mut rng);
        let t = rng.random_range(0.0..4.0);
        let maturity = t + rng.random_range(0.01..6.0);
        let lhs = integrate_drift(&s.model, SurfaceId::Curve(BASE), t, t, maturity, &[])
            + integrate_drift(&s.model, SurfaceId::Basis(1), t, t, maturity, &[]);
        let beta = neg_sum(&[&s.curve[BASE].big(t, maturity), &s.basis.big(t, maturity)]);
        let rhs = s.model.driver.local_exponent(t, &beta).unwrap();
        assert_close(lhs, rhs, &format!("case {case}"));
    }
}

#[test]
fn spread_drift_integrates_to_psi_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for case in 0..50 {
        let s = random_setup(&mut rng);
        let fam = &s.model.spreads[0];
        let (df, dp) = (fam.fix_adj, fam.pay_adj);
        let fixing = df + rng.random_range(0.0..4.0);
        let end = fixing + dp;
        let t = rng.random_range(df..end);
        let start = fixing - df;
        let lhs = integrate_drift(&s.model, SurfaceId::Spread(0), t, t, end, &[t + fam.delta()]);
        // Collateral vols are frozen at the period start: Sigma_{t ^ (T-df)}(T-df).
        let mut cq = s.curve[BASE].big(t.min(start), start);
        if fam.collateral != BASE {
            let q = s.basis.big(t.min(start), start);
            cq.iter_mut().zip(&q).for_each(|(c, q)| *c += q);
        }
        let h = s.spread.big(t, end);
        let psi = |b: Vec<f64>| s.model.driver.local_exponent(t, &b).unwrap();
        let rhs = psi(neg_sum(&[&h, &cq])) - psi(neg_sum(&[&cq]));
        assert_close(lhs, rhs, &format!("case {case}, collateral {}", fam.collateral));
    }
}

#[test]
fn closed_form_integrated_drift_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let mut ws = ModelScratch::new(D);
    for _ in 0..20 {
        let s = random_setup(&mut rng);
        let t = rng.random_range(0.0..2.0) + s.model.spreads[0].fix_adj;
        let (a, b) = (t + 0.1, t + 3.0);
        for id in s.model.surfaces() {
            let kinks = [t + s.model.spreads[0].delta()];
            let lhs = integrate_drift(&s.model, id, t, a, b, &kinks);
            let rhs = s.model.integrated_drift(id, t, a, b, &mut ws).unwrap();
            assert_close(lhs, rhs, &format!("{id:?}"));
        }
    }
}
