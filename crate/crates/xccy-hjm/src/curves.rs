//! Risk-neutral HJM model for collateral forward curves: initial curves,
//! volatility families, the drift condition and a literal per-path
//! forward surface.

use nalgebra::DVector;

use crate::driver::{Characteristics, DriverSpec};
use crate::error::{Error, Result};

/// Tolerance for matching dates to pillars.
const PILLAR_TOL: f64 = 1e-9;

/// Initial forward curve, linear between pillars and flat outside.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialCurve {
    pillars: Vec<f64>,
    values: Vec<f64>,
}

impl InitialCurve {
    pub fn new(pillars: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if pillars.is_empty() || pillars.len() != values.len() {
            return Err(Error::InvalidSpec("initial curve needs matching non-empty pillars and values".into()));
        }
        if pillars.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidSpec("curve pillars must be strictly increasing".into()));
        }
        if pillars.iter().chain(&values).any(|x| !x.is_finite()) {
            return Err(Error::InvalidSpec("curve pillars and values must be finite".into()));
        }
        Ok(InitialCurve { pillars, values })
    }

    pub fn flat(value: f64) -> Self {
        InitialCurve { pillars: vec![0.0], values: vec![value] }
    }

    pub fn pillars(&self) -> &[f64] {
        &self.pillars
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, t: f64) -> f64 {
        let p = &self.pillars;
        if t <= p[0] {
            return self.values[0];
        }
        let n = p.len();
        if t >= p[n - 1] {
            return self.values[n - 1];
        }
        let j = p.partition_point(|x| *x <= t);
        let (t0, t1) = (p[j - 1], p[j]);
        let w = (t - t0) / (t1 - t0);
        self.values[j - 1] * (1.0 - w) + self.values[j] * w
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }
}

/// One additive volatility term `sigma_t(T)`.
#[derive(Debug, Clone, PartialEq)]
pub enum VolTerm {
    /// `sigma_t(T) = loading`.
    Constant { loading: DVector<f64> },
    /// `sigma_t(T) = loading * exp(-decay (T - t))`.
    Exponential { loading: DVector<f64>, decay: f64 },
    /// `sigma_t(T) = loadings[a][b]` for `t` in time bucket `a` and `T` in
    /// maturity bucket `b`. Buckets start at the listed breaks (first 0) and
    /// the last bucket is unbounded.
    Piecewise {
        time_breaks: Vec<f64>,
        maturity_breaks: Vec<f64>,
        loadings: Vec<Vec<DVector<f64>>>,
    },
}

fn bucket(breaks: &[f64], x: f64) -> usize {
    breaks.partition_point(|b| *b <= x).saturating_sub(1)
}

/// `(1 - exp(-a tau)) / a`, continuous at `a = 0`.
fn exp_integral(a: f64, tau: f64) -> f64 {
    if a * tau == 0.0 {
        return tau;
    }
    let x = a * tau;
    if x.abs() < 1e-8 {
        tau * (1.0 - 0.5 * x)
    } else {
        -(-x).exp_m1() / a
    }
}

impl VolTerm {
    fn dim(&self) -> Option<usize> {
        match self {
            VolTerm::Constant { loading } | VolTerm::Exponential { loading, .. } => Some(loading.len()),
            VolTerm::Piecewise { loadings, .. } => loadings.first().and_then(|r| r.first()).map(|v| v.len()),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.dim() != Some(dim) {
            return Err(Error::InvalidSpec(format!("volatility loadings must have dimension {dim}")));
        }
        match self {
            VolTerm::Constant { loading } => finite(loading.iter()),
            VolTerm::Exponential { loading, decay } => {
                finite(loading.iter())?;
                finite([*decay].iter())
            }
            VolTerm::Piecewise { time_breaks, maturity_breaks, loadings } => {
                for br in [time_breaks, maturity_breaks] {
                    if br.first() != Some(&0.0) || br.windows(2).any(|w| !(w[1] > w[0])) {
                        return Err(Error::InvalidSpec("bucket breaks must start at 0 and increase".into()));
                    }
                }
                if loadings.len() != time_breaks.len()
                    || loadings.iter().any(|r| r.len() != maturity_breaks.len() || r.iter().any(|v| v.len() != dim))
                {
                    return Err(Error::InvalidSpec("piecewise loadings must be time buckets x maturity buckets".into()));
                }
                finite(loadings.iter().flatten().flat_map(|v| v.iter()))
            }
        }
    }

    fn add_sigma(&self, t: f64, maturity: f64, out: &mut [f64]) {
        match self {
            VolTerm::Constant { loading } => add(out, loading.as_slice(), 1.0),
            VolTerm::Exponential { loading, decay } => {
                add(out, loading.as_slice(), (-decay * (maturity - t)).exp())
            }
            VolTerm::Piecewise { time_breaks, maturity_breaks, loadings } => {
                let row = &loadings[bucket(time_breaks, t)];
                add(out, row[bucket(maturity_breaks, maturity)].as_slice(), 1.0)
            }
        }
    }

    fn add_integrated(&self, t: f64, maturity: f64, out: &mut [f64]) {
        match self {
            VolTerm::Constant { loading } => add(out, loading.as_slice(), maturity - t),
            VolTerm::Exponential { loading, decay } => {
                add(out, loading.as_slice(), exp_integral(*decay, maturity - t))
            }
            VolTerm::Piecewise { time_breaks, maturity_breaks, loadings } => {
                let row = &loadings[bucket(time_breaks, t)];
                for (b, lo) in maturity_breaks.iter().enumerate() {
                    let hi = maturity_breaks.get(b + 1).copied().unwrap_or(f64::INFINITY);
                    let len = maturity.min(hi) - t.max(*lo);
                    if len > 0.0 {
                        add(out, row[b].as_slice(), len);
                    }
                }
            }
        }
    }
}

fn finite<'a>(mut it: impl Iterator<Item = &'a f64>) -> Result<()> {
    if it.all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidSpec("volatility parameters must be finite".into()))
    }
}

#[inline]
fn add(out: &mut [f64], v: &[f64], w: f64) {
    for (o, x) in out.iter_mut().zip(v) {
        *o += w * x;
    }
}

/// Maturity profile of a separable volatility factor.
#[derive(Debug, Clone, PartialEq)]
pub enum FactorShape {
    One,
    /// `exp(-a T)`.
    Exp(f64),
    /// Indicator of `lo <= T < hi`.
    Bucket { lo: f64, hi: f64 },
}

/// Time profile of a separable volatility factor.
#[derive(Debug, Clone, PartialEq)]
pub enum FactorLoad {
    Const(DVector<f64>),
    /// `v exp(a t)`.
    Exp(DVector<f64>, f64),
    /// Loading per time bucket.
    Piece { time_breaks: Vec<f64>, loads: Vec<DVector<f64>> },
}

/// `sigma_t(T) = sum_m shape_m(T) load_m(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub shape: FactorShape,
    pub load: FactorLoad,
}

impl Factor {
    pub fn shape_at(&self, maturity: f64) -> f64 {
        match self.shape {
            FactorShape::One => 1.0,
            FactorShape::Exp(a) => (-a * maturity).exp(),
            FactorShape::Bucket { lo, hi } => {
                if lo <= maturity && maturity < hi {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn load_into(&self, t: f64, out: &mut [f64]) {
        match &self.load {
            FactorLoad::Const(v) => out.copy_from_slice(v.as_slice()),
            FactorLoad::Exp(v, a) => {
                let s = (a * t).exp();
                for (o, x) in out.iter_mut().zip(v.iter()) {
                    *o = s * x;
                }
            }
            FactorLoad::Piece { time_breaks, loads } => {
                out.copy_from_slice(loads[bucket(time_breaks, t)].as_slice())
            }
        }
    }
}

/// Volatility `sigma_t(T)` as a sum of terms.
#[derive(Debug, Clone, PartialEq)]
pub struct VolatilitySpec {
    dim: usize,
    terms: Vec<VolTerm>,
}

impl VolatilitySpec {
    pub fn new(dim: usize, terms: Vec<VolTerm>) -> Result<Self> {
        for t in &terms {
            t.validate(dim)?;
        }
        Ok(VolatilitySpec { dim, terms })
    }

    pub fn zero(dim: usize) -> Self {
        VolatilitySpec { dim, terms: Vec::new() }
    }

    pub fn constant(loading: DVector<f64>) -> Self {
        VolatilitySpec { dim: loading.len(), terms: vec![VolTerm::Constant { loading }] }
    }

    pub fn hull_white(loading: DVector<f64>, decay: f64) -> Self {
        VolatilitySpec { dim: loading.len(), terms: vec![VolTerm::Exponential { loading, decay }] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[VolTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| match t {
            VolTerm::Constant { loading } | VolTerm::Exponential { loading, .. } => loading.iter().all(|x| *x == 0.0),
            VolTerm::Piecewise { loadings, .. } => loadings.iter().flatten().all(|v| v.iter().all(|x| *x == 0.0)),
        })
    }

    /// Rejects exponential decays whose factorization overflows on `[0, horizon]`.
    pub fn check_horizon(&self, horizon: f64) -> Result<()> {
        for t in &self.terms {
            if let VolTerm::Exponential { decay, .. } = t {
                if decay.abs() * horizon > 600.0 {
                    return Err(Error::AdmissibilityViolation(format!(
                        "decay {decay} is too large for horizon {horizon}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Adds `sigma_t(T)` to `out`.
    pub fn sigma_into(&self, t: f64, maturity: f64, out: &mut [f64]) {
        for term in &self.terms {
            term.add_sigma(t, maturity, out);
        }
    }

    /// Adds `Sigma_t(T) = int_t^T sigma_t(u) du` to `out`; zero for `T <= t`.
    pub fn integrated_into(&self, t: f64, maturity: f64, out: &mut [f64]) {
        if maturity <= t {
            return;
        }
        for term in &self.terms {
            term.add_integrated(t, maturity, out);
        }
    }

    pub fn sigma(&self, t: f64, maturity: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        self.sigma_into(t, maturity, out.as_mut_slice());
        out
    }

    /// Separable factor decomposition used by the simulation engine.
    pub fn factors(&self) -> Vec<Factor> {
        let mut out = Vec::new();
        for term in &self.terms {
            match term {
                VolTerm::Constant { loading } => {
                    out.push(Factor { shape: FactorShape::One, load: FactorLoad::Const(loading.clone()) })
                }
                VolTerm::Exponential { loading, decay } => out.push(Factor {
                    shape: FactorShape::Exp(*decay),
                    load: FactorLoad::Exp(loading.clone(), *decay),
                }),
                VolTerm::Piecewise { time_breaks, maturity_breaks, loadings } => {
                    for (b, lo) in maturity_breaks.iter().enumerate() {
                        let hi = maturity_breaks.get(b + 1).copied().unwrap_or(f64::INFINITY);
                        out.push(Factor {
                            shape: FactorShape::Bucket { lo: *lo, hi },
                            load: FactorLoad::Piece {
                                time_breaks: time_breaks.clone(),
                                loads: loadings.iter().map(|r| r[b].clone()).collect(),
                            },
                        });
                    }
                }
            }
        }
        out
    }

    /// Times at which `sigma_t(.)` changes as a function of `t`.
    pub fn time_breaks(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for term in &self.terms {
            if let VolTerm::Piecewise { time_breaks, .. } = term {
                out.extend_from_slice(time_breaks);
            }
        }
        out
    }

    /// Maturities where `sigma_t(.)` jumps as a function of `T`.
    pub fn maturity_breaks(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for term in &self.terms {
            if let VolTerm::Piecewise { maturity_breaks, .. } = term {
                out.extend_from_slice(maturity_breaks);
            }
        }
        out
    }
}

/// `Sigma_t(T)`.
pub fn integrated_vol(vol: &VolatilitySpec, t: f64, maturity: f64) -> Result<DVector<f64>> {
    if maturity < t {
        return Err(Error::ReversedInterval { t, maturity });
    }
    let mut out = DVector::zeros(vol.dim());
    vol.integrated_into(t, maturity, out.as_mut_slice());
    Ok(out)
}

/// Scratch buffers for drift evaluation.
#[derive(Debug, Clone)]
pub struct DriftScratch {
    pub sigma: Vec<f64>,
    pub big: Vec<f64>,
    pub grad: Vec<f64>,
    pub beta: Vec<f64>,
}

impl DriftScratch {
    pub fn new(dim: usize) -> Self {
        DriftScratch { sigma: vec![0.0; dim], big: vec![0.0; dim], grad: vec![0.0; dim], beta: vec![0.0; dim] }
    }

    pub fn clear(&mut self) {
        for v in [&mut self.sigma, &mut self.big, &mut self.grad, &mut self.beta] {
            v.iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `-sigma . grad Psi(-Sigma)` for given `sigma` and `Sigma` vectors.
pub fn drift_term(chars: &Characteristics, sigma: &[f64], big: &[f64], grad: &mut [f64], beta: &mut [f64]) -> Result<f64> {
    for (b, s) in beta.iter_mut().zip(big) {
        *b = -s;
    }
    chars.psi_gradient_into(beta, grad)?;
    Ok(-dot(sigma, grad))
}

/// HJM drift `alpha_t(T) = -sigma_t(T) . grad Psi_t(-Sigma_t(T))`.
pub fn hjm_drift(vol: &VolatilitySpec, driver: &DriverSpec, t: f64, maturity: f64) -> Result<f64> {
    if maturity < t {
        return Err(Error::ReversedInterval { t, maturity });
    }
    let mut s = DriftScratch::new(vol.dim());
    vol.sigma_into(t, maturity, &mut s.sigma);
    vol.integrated_into(t, maturity, &mut s.big);
    drift_term(driver.chars_at(t), &s.sigma, &s.big, &mut s.grad, &mut s.beta)
}

/// One path's forward curve `f_t(T_j)` on the pillars `T_j >= t`, with the
/// running trapezoid integral of the short rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardSurface {
    pillars: Vec<f64>,
    values: Vec<f64>,
    first: usize,
    integral: f64,
}

fn pillar_index(pillars: &[f64], t: f64) -> Result<usize> {
    let j = pillars.partition_point(|p| *p < t - PILLAR_TOL);
    if j == pillars.len() {
        return Err(Error::GridExhausted(t));
    }
    if (pillars[j] - t).abs() > PILLAR_TOL {
        return Err(Error::ScheduleOffGrid(t));
    }
    Ok(j)
}

impl ForwardSurface {
    /// Surface at time 0 on `pillars` (which must start at 0).
    pub fn new(initial: &InitialCurve, pillars: Vec<f64>) -> Result<Self> {
        if pillars.first() != Some(&0.0) || pillars.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid("pillars must start at 0 and increase".into()));
        }
        let values = pillars.iter().map(|p| initial.value(*p)).collect();
        Ok(ForwardSurface { pillars, values, first: 0, integral: 0.0 })
    }

    /// Identically zero surface.
    pub fn zero(pillars: Vec<f64>) -> Result<Self> {
        Self::new(&InitialCurve::flat(0.0), pillars)
    }

    pub fn time(&self) -> f64 {
        self.pillars[self.first]
    }

    /// `f_t(t)`.
    pub fn short_rate(&self) -> f64 {
        self.values[self.first]
    }

    /// `int_0^t f_s(s) ds`.
    pub fn running_integral(&self) -> f64 {
        self.integral
    }

    pub fn pillars(&self) -> &[f64] {
        &self.pillars[self.first..]
    }

    pub fn values(&self) -> &[f64] {
        &self.values[self.first..]
    }

    pub fn forward(&self, maturity: f64) -> Result<f64> {
        Ok(self.values[pillar_index(&self.pillars, maturity)?.max(self.first)])
    }

    /// Euler step with caller-supplied drift: `f(T) += alpha(T) dt + shock(T)`.
    pub fn evolve_with<F>(&mut self, dt: f64, mut increment: F) -> Result<()>
    where
        F: FnMut(f64) -> Result<(f64, f64)>,
    {
        if dt == 0.0 {
            return Ok(());
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidGrid(format!("step must be positive, got {dt}")));
        }
        let next = pillar_index(&self.pillars, self.time() + dt)?;
        let r_old = self.short_rate();
        for j in next..self.pillars.len() {
            let (alpha, shock) = increment(self.pillars[j])?;
            self.values[j] += alpha * dt + shock;
        }
        self.first = next;
        self.integral += 0.5 * (r_old + self.values[next]) * dt;
        Ok(())
    }

    /// `int_t^T f_t(u) du` by the trapezoid rule on the pillars.
    pub fn integral(&self, t: f64, maturity: f64) -> Result<f64> {
        if maturity < t {
            return Err(Error::ReversedInterval { t, maturity });
        }
        if (t - self.time()).abs() > PILLAR_TOL {
            return Err(Error::MissingState(format!("surface is at {} not {}", self.time(), t)));
        }
        let last = pillar_index(&self.pillars, maturity)?;
        let mut acc = 0.0;
        for j in self.first..last {
            acc += 0.5 * (self.values[j] + self.values[j + 1]) * (self.pillars[j + 1] - self.pillars[j]);
        }
        Ok(acc)
    }

    /// `exp(-int_t^T f_t(u) du)`.
    pub fn bond_price(&self, t: f64, maturity: f64) -> Result<f64> {
        Ok((-self.integral(t, maturity)?).exp())
    }
}

/// Euler update of a collateral curve with its own HJM drift.
pub fn evolve_curve(surface: &mut ForwardSurface, vol: &VolatilitySpec, driver: &DriverSpec, dt: f64, dx: &[f64]) -> Result<()> {
    let t = surface.time();
    let chars = driver.chars_at(t);
    let mut s = DriftScratch::new(vol.dim());
    surface.evolve_with(dt, |maturity| {
        s.clear();
        vol.sigma_into(t, maturity, &mut s.sigma);
        vol.integrated_into(t, maturity, &mut s.big);
        let alpha = drift_term(chars, &s.sigma, &s.big, &mut s.grad, &mut s.beta)?;
        Ok((alpha, dot(&s.sigma, dx)))
    })
}

/// `B(t, T)` from a surface positioned at `t`.
pub fn bond_price(surface: &ForwardSurface, t: f64, maturity: f64) -> Result<f64> {
    surface.bond_price(t, maturity)
}
