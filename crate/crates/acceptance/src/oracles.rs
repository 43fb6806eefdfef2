//! Independent oracles: adaptive quadrature of the local exponent and of
//! module drifts, closed-form integrated volatilities, random market specs.

use std::cell::RefCell;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xccy_hjm::driver::chi;
use xccy_hjm::model::{ModelScratch, BASE};
use xccy_hjm::{
    BasisSpec, Characteristics, CurrencyCurve, DriverSpec, FxSpec, InitialCurve, JumpComponent, JumpSize, MarketModel,
    MeasureId, PiecewiseVector, SpreadFamily, SurfaceId, VolTerm, VolatilitySpec,
};

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random characteristics of dimension 1 to 3 with one or two jump
/// components of the requested family.
pub fn random_chars(rng: &mut ChaCha8Rng, gaussian: bool) -> Characteristics {
    let d = rng.random_range(1..=3);
    let drift = DVector::from_fn(d, |_, _| rng.random_range(-0.05..0.05));
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-0.3..0.3));
    let mut chars = Characteristics::brownian(drift, &a * a.transpose());
    for _ in 0..rng.random_range(1..=2) {
        let size = if gaussian {
            JumpSize::Gaussian { mean: rng.random_range(-0.5..0.5), std: rng.random_range(0.1..0.8) }
        } else {
            JumpSize::TwoPoint { up: rng.random_range(0.0..1.5), down: rng.random_range(-1.5..0.0), p_up: rng.random_range(0.1..0.9) }
        };
        chars.jumps.push(JumpComponent {
            intensity: rng.random_range(0.1..2.0),
            size,
            loading: DVector::from_fn(d, |_, _| rng.random_range(-1.5..1.5)),
        });
    }
    chars
}

fn levy_integrand(beta: &[f64], loading: &DVector<f64>, z: f64) -> f64 {
    let theta: f64 = beta.iter().zip(loading.iter()).map(|(b, v)| b * v).sum();
    let trunc: f64 = beta.iter().zip(loading.iter()).map(|(b, v)| b * chi(v * z)).sum();
    (theta * z).exp() - 1.0 - trunc
}

/// Local exponent by brute force: the Brownian part summed term by term,
/// two-point jumps summed, Gaussian jumps integrated by adaptive
/// double-exponential quadrature split where the truncation jumps.
pub fn psi_oracle(chars: &Characteristics, beta: &[f64]) -> f64 {
    let b = DVector::from_column_slice(beta);
    let mut v = b.dot(&chars.drift) + 0.5 * b.dot(&(&chars.diffusion * &b));
    for j in &chars.jumps {
        let part = match j.size {
            JumpSize::TwoPoint { up, down, p_up } => {
                p_up * levy_integrand(beta, &j.loading, up) + (1.0 - p_up) * levy_integrand(beta, &j.loading, down)
            }
            JumpSize::Gaussian { mean, std } => {
                let theta = b.dot(&j.loading);
                let tilted = mean + theta * std * std;
                let lo = mean.min(tilted) - 14.0 * std;
                let hi = mean.max(tilted) + 14.0 * std;
                let mut cuts = vec![lo, hi];
                for l in j.loading.iter().filter(|l| **l != 0.0) {
                    cuts.extend([1.0 / l.abs(), -1.0 / l.abs()]);
                }
                cuts.retain(|c| *c >= lo && *c <= hi);
                cuts.sort_by(f64::total_cmp);
                let density = |z: f64| {
                    let u = (z - mean) / std;
                    (-0.5 * u * u).exp() / (std * (2.0 * std::f64::consts::PI).sqrt())
                };
                cuts.windows(2)
                    .map(|w| {
                        quadrature::double_exponential::integrate(|z| levy_integrand(beta, &j.loading, z) * density(z), w[0], w[1], 1e-14)
                            .integral
                    })
                    .sum()
            }
        };
        v += j.intensity * part;
    }
    v
}

pub const D: usize = 3;

/// Constant plus exponentially damped volatility with closed-form integral.
#[derive(Clone)]
pub struct Vol {
    flat: Vec<f64>,
    damped: Vec<f64>,
    decay: f64,
}

impl Vol {
    pub fn random(rng: &mut ChaCha8Rng, scale: f64) -> Vol {
        Vol {
            flat: (0..D).map(|_| rng.random_range(-scale..scale)).collect(),
            damped: (0..D).map(|_| rng.random_range(-scale..scale)).collect(),
            decay: rng.random_range(0.05..0.8),
        }
    }

    pub fn spec(&self) -> VolatilitySpec {
        VolatilitySpec::new(
            D,
            vec![
                VolTerm::Constant { loading: DVector::from_column_slice(&self.flat) },
                VolTerm::Exponential { loading: DVector::from_column_slice(&self.damped), decay: self.decay },
            ],
        )
        .expect("valid volatility")
    }

    /// `Sigma_t(T) = int_t^T sigma_t(u) du`, zero when `T <= t`.
    pub fn big(&self, t: f64, maturity: f64) -> Vec<f64> {
        let tau = (maturity - t).max(0.0);
        let e = (1.0 - (-self.decay * tau).exp()) / self.decay;
        (0..D).map(|i| self.flat[i] * tau + self.damped[i] * e).collect()
    }
}

pub struct DriftSetup {
    pub model: MarketModel,
    pub curve: [Vol; 2],
    pub basis: Vol,
    pub spread: Vol,
}

/// Two currencies on a 3-factor driver with one random jump component and
/// one spread family with a random schedule and collateral.
pub fn random_setup(rng: &mut ChaCha8Rng) -> DriftSetup {
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
    let driver = DriverSpec::constant(MeasureId::Spot(BASE), chars).expect("valid driver");
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
        vec![None, Some(FxSpec::new(BASE, 1, 1.1, PiecewiseVector::constant(fx_vol)).expect("valid FX"))],
        InitialCurve::flat(0.0),
        vec![SpreadFamily { name: "IDX".into(), collateral, fix_adj, pay_adj, initial: InitialCurve::flat(0.001), vol: spread.spec() }],
    )
    .expect("valid model");
    DriftSetup { model, curve, basis, spread }
}

pub fn neg_sum(parts: &[&[f64]]) -> Vec<f64> {
    (0..D).map(|i| -parts.iter().map(|p| p[i]).sum::<f64>()).collect()
}

/// `int_a^b alpha_t(u) du` of the pointwise module drift by adaptive
/// quadrature, split at the given interior kinks.
pub fn integrate_drift(model: &MarketModel, s: SurfaceId, t: f64, a: f64, b: f64, kinks: &[f64]) -> f64 {
    let mut pts = vec![a, b];
    pts.extend(kinks.iter().copied().filter(|k| *k > a && *k < b));
    pts.sort_by(f64::total_cmp);
    let ws = RefCell::new(ModelScratch::new(D));
    pts.windows(2)
        .map(|w| {
            quadrature::double_exponential::integrate(|u| model.drift(s, t, u, &mut ws.borrow_mut()).expect("drift"), w[0], w[1], 1e-15)
                .integral
        })
        .sum()
}
