//! The driving Ito semimartingale `X`, described by piecewise-constant
//! differential characteristics `(b, c, K)` with the componentwise
//! truncation `chi(x) = x 1{|x| <= 1}`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::grid::check_increasing;
use crate::measures::MeasureId;
use crate::rng::{path_rng, STREAM_BROWNIAN, STREAM_JUMPS};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Componentwise truncation function.
#[inline]
pub fn chi(x: f64) -> f64 {
    if x.abs() <= 1.0 {
        x
    } else {
        0.0
    }
}

fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `E[Z; |Z| <= c]` for `Z ~ N(mean, std^2)`.
fn gaussian_truncated_mean(mean: f64, std: f64, c: f64) -> f64 {
    if std == 0.0 {
        return if mean.abs() <= c { mean } else { 0.0 };
    }
    let a = (-c - mean) / std;
    let b = (c - mean) / std;
    let mass = if a > 0.0 {
        norm_cdf(-a) - norm_cdf(-b)
    } else {
        norm_cdf(b) - norm_cdf(a)
    };
    mean * mass + std * (norm_pdf(a) - norm_pdf(b))
}

/// Law of the scalar jump size.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpSize {
    /// `up` with probability `p_up`, `down` otherwise.
    TwoPoint { up: f64, down: f64, p_up: f64 },
    Gaussian { mean: f64, std: f64 },
}

impl JumpSize {
    /// `E[exp(theta Z)]`.
    pub fn mgf(&self, theta: f64) -> f64 {
        match *self {
            JumpSize::TwoPoint { up, down, p_up } => {
                p_up * (theta * up).exp() + (1.0 - p_up) * (theta * down).exp()
            }
            JumpSize::Gaussian { mean, std } => {
                (theta * mean + 0.5 * theta * theta * std * std).exp()
            }
        }
    }

    /// `E[Z exp(theta Z)]`.
    pub fn mgf_derivative(&self, theta: f64) -> f64 {
        match *self {
            JumpSize::TwoPoint { up, down, p_up } => {
                p_up * up * (theta * up).exp() + (1.0 - p_up) * down * (theta * down).exp()
            }
            JumpSize::Gaussian { mean, std } => (mean + theta * std * std) * self.mgf(theta),
        }
    }

    /// `E[chi(v Z)]` for a scalar loading `v`.
    pub fn truncated_mean(&self, v: f64) -> f64 {
        if v == 0.0 {
            return 0.0;
        }
        match *self {
            JumpSize::TwoPoint { up, down, p_up } => {
                p_up * chi(v * up) + (1.0 - p_up) * chi(v * down)
            }
            JumpSize::Gaussian { mean, std } => v * gaussian_truncated_mean(mean, std, 1.0 / v.abs()),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            JumpSize::TwoPoint { up, down, p_up } => {
                let u: f64 = rng.random();
                if u < p_up {
                    up
                } else {
                    down
                }
            }
            JumpSize::Gaussian { mean, std } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + std * z
            }
        }
    }
}

/// Compound Poisson component: jumps `loading * Z` at rate `intensity`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpComponent {
    pub intensity: f64,
    pub size: JumpSize,
    pub loading: DVector<f64>,
}

impl JumpComponent {
    fn theta(&self, beta: &[f64]) -> f64 {
        self.loading.iter().zip(beta).map(|(v, b)| v * b).sum()
    }

    /// Adds `int chi(xi) K(dxi)` to `out`.
    pub fn add_compensator(&self, out: &mut [f64]) {
        if self.intensity == 0.0 {
            return;
        }
        for (o, v) in out.iter_mut().zip(self.loading.iter()) {
            *o += self.intensity * self.size.truncated_mean(*v);
        }
    }

    /// Exponentially tilted component `e^{sigma . xi} K(dxi)`.
    pub fn tilt(&self, sigma: &[f64]) -> Result<JumpComponent> {
        let theta = self.theta(sigma);
        let (intensity, size) = match self.size {
            JumpSize::TwoPoint { up, down, p_up } => {
                let wu = p_up * (theta * up).exp();
                let wd = (1.0 - p_up) * (theta * down).exp();
                let total = wu + wd;
                let p = if total > 0.0 { wu / total } else { p_up };
                (self.intensity * total, JumpSize::TwoPoint { up, down, p_up: p })
            }
            JumpSize::Gaussian { mean, std } => (
                self.intensity * self.size.mgf(theta),
                JumpSize::Gaussian { mean: mean + theta * std * std, std },
            ),
        };
        if !intensity.is_finite() {
            return Err(Error::ExponentialMomentUnbounded(format!(
                "tilted intensity overflows for theta = {theta}"
            )));
        }
        Ok(JumpComponent { intensity, size, loading: self.loading.clone() })
    }
}

/// Differential characteristics on one time segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Characteristics {
    pub drift: DVector<f64>,
    pub diffusion: DMatrix<f64>,
    pub jumps: Vec<JumpComponent>,
}

impl Characteristics {
    pub fn brownian(drift: DVector<f64>, diffusion: DMatrix<f64>) -> Self {
        Characteristics { drift, diffusion, jumps: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.drift.len()
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.drift.len() != dim || self.diffusion.nrows() != dim || self.diffusion.ncols() != dim {
            return Err(Error::InvalidSpec(format!("characteristics must have dimension {dim}")));
        }
        if self.drift.iter().chain(self.diffusion.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidSpec("non-finite drift or diffusion".into()));
        }
        let scale = self.diffusion.amax().max(1e-300);
        for i in 0..dim {
            for j in 0..i {
                if (self.diffusion[(i, j)] - self.diffusion[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidSpec("diffusion matrix is not symmetric".into()));
                }
            }
        }
        let eig = SymmetricEigen::new(self.diffusion.clone());
        if eig.eigenvalues.iter().any(|&l| l < -1e-12 * scale) {
            return Err(Error::InvalidSpec("diffusion matrix is not positive semidefinite".into()));
        }
        for j in &self.jumps {
            if !(j.intensity >= 0.0 && j.intensity.is_finite()) {
                return Err(Error::InvalidSpec(format!("jump intensity {} is invalid", j.intensity)));
            }
            if j.loading.len() != dim || j.loading.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidSpec(format!("jump loading must have dimension {dim}")));
            }
            match j.size {
                JumpSize::TwoPoint { up, down, p_up } => {
                    if !(0.0..=1.0).contains(&p_up) || !up.is_finite() || !down.is_finite() {
                        return Err(Error::InvalidSpec("two-point jump law is invalid".into()));
                    }
                }
                JumpSize::Gaussian { mean, std } => {
                    if !(std >= 0.0) || !mean.is_finite() || !std.is_finite() {
                        return Err(Error::InvalidSpec("Gaussian jump law is invalid".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// `int chi(xi) K(dxi)`.
    pub fn compensator(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for j in &self.jumps {
            j.add_compensator(&mut out);
        }
        out
    }

    /// Local exponent `Psi(beta)`.
    pub fn psi(&self, beta: &[f64]) -> Result<f64> {
        let d = self.dim();
        let mut v = 0.0;
        for i in 0..d {
            v += beta[i] * self.drift[i];
            let mut cb = 0.0;
            for k in 0..d {
                cb += self.diffusion[(i, k)] * beta[k];
            }
            v += 0.5 * beta[i] * cb;
        }
        for j in &self.jumps {
            if j.intensity == 0.0 {
                continue;
            }
            let theta = j.theta(beta);
            let mut trunc = 0.0;
            for (b, l) in beta.iter().zip(j.loading.iter()) {
                trunc += b * j.size.truncated_mean(*l);
            }
            v += j.intensity * (j.size.mgf(theta) - 1.0 - trunc);
        }
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::ExponentialMomentUnbounded(format!("Psi is not finite at {beta:?}")))
        }
    }

    /// Gradient of the local exponent, written into `out`.
    pub fn psi_gradient_into(&self, beta: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.dim();
        for i in 0..d {
            let mut cb = 0.0;
            for k in 0..d {
                cb += self.diffusion[(i, k)] * beta[k];
            }
            out[i] = self.drift[i] + cb;
        }
        for j in &self.jumps {
            if j.intensity == 0.0 {
                continue;
            }
            let m1 = j.intensity * j.size.mgf_derivative(j.theta(beta));
            for (o, l) in out.iter_mut().zip(j.loading.iter()) {
                *o += m1 * l - j.intensity * j.size.truncated_mean(*l);
            }
        }
        if out.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::ExponentialMomentUnbounded(format!("grad Psi is not finite at {beta:?}")))
        }
    }

    pub fn psi_gradient(&self, beta: &[f64]) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.dim());
        self.psi_gradient_into(beta, out.as_mut_slice())?;
        Ok(out)
    }

    /// Characteristics after the change of measure with density
    /// `E(int sigma dX^c + int (e^{sigma . xi} - 1)(mu - nu))`.
    pub fn girsanov(&self, sigma: &[f64]) -> Result<Characteristics> {
        let jumps = self.jumps.iter().map(|j| j.tilt(sigma)).collect::<Result<Vec<_>>>()?;
        let mut drift = self.drift.clone() + &self.diffusion * DVector::from_column_slice(sigma);
        for (old, new) in self.jumps.iter().zip(&jumps) {
            let mut delta = vec![0.0; self.dim()];
            new.add_compensator(&mut delta);
            let mut prev = vec![0.0; self.dim()];
            old.add_compensator(&mut prev);
            for i in 0..self.dim() {
                drift[i] += delta[i] - prev[i];
            }
        }
        Ok(Characteristics { drift, diffusion: self.diffusion.clone(), jumps })
    }
}

/// Piecewise-constant vector function of time, right-continuous.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseVector {
    starts: Vec<f64>,
    values: Vec<DVector<f64>>,
}

impl PiecewiseVector {
    pub fn constant(value: DVector<f64>) -> Self {
        PiecewiseVector { starts: vec![0.0], values: vec![value] }
    }

    pub fn new(starts: Vec<f64>, values: Vec<DVector<f64>>) -> Result<Self> {
        check_segments(&starts)?;
        if starts.len() != values.len() {
            return Err(Error::InvalidSpec("one value per segment start is required".into()));
        }
        let d = values[0].len();
        if values.iter().any(|v| v.len() != d || v.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidSpec("segment values must share one finite dimension".into()));
        }
        Ok(PiecewiseVector { starts, values })
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn starts(&self) -> &[f64] {
        &self.starts
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn at(&self, t: f64) -> &DVector<f64> {
        &self.values[segment_index(&self.starts, t)]
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| *x == 0.0))
    }

    pub fn negated(&self) -> Self {
        PiecewiseVector { starts: self.starts.clone(), values: self.values.iter().map(|v| -v).collect() }
    }
}

fn check_segments(starts: &[f64]) -> Result<()> {
    if starts.first() != Some(&0.0) {
        return Err(Error::InvalidSpec("the first segment must start at 0".into()));
    }
    if starts.windows(2).any(|w| !(w[1] > w[0])) || starts.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidSpec("segment starts must be strictly increasing".into()));
    }
    Ok(())
}

fn segment_index(starts: &[f64], t: f64) -> usize {
    starts.partition_point(|s| *s <= t).saturating_sub(1)
}

/// Characteristics of `X` under a named measure, piecewise constant in time.
#[derive(Debug, Clone, PartialEq)]
pub struct DriverSpec {
    dim: usize,
    measure: MeasureId,
    starts: Vec<f64>,
    segments: Vec<Characteristics>,
}

impl DriverSpec {
    pub fn new(measure: MeasureId, starts: Vec<f64>, segments: Vec<Characteristics>) -> Result<Self> {
        if segments.is_empty() || starts.len() != segments.len() {
            return Err(Error::InvalidSpec("one characteristics block per segment start".into()));
        }
        check_segments(&starts)?;
        let dim = segments[0].dim();
        if dim == 0 {
            return Err(Error::InvalidSpec("driver dimension must be positive".into()));
        }
        for s in &segments {
            s.validate(dim)?;
        }
        Ok(DriverSpec { dim, measure, starts, segments })
    }

    pub fn constant(measure: MeasureId, chars: Characteristics) -> Result<Self> {
        Self::new(measure, vec![0.0], vec![chars])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn measure(&self) -> &MeasureId {
        &self.measure
    }

    pub fn starts(&self) -> &[f64] {
        &self.starts
    }

    pub fn segments(&self) -> &[Characteristics] {
        &self.segments
    }

    pub fn chars_at(&self, t: f64) -> &Characteristics {
        &self.segments[segment_index(&self.starts, t)]
    }

    pub fn local_exponent(&self, t: f64, beta: &[f64]) -> Result<f64> {
        self.check_beta(beta)?;
        self.chars_at(t).psi(beta)
    }

    pub fn local_exponent_gradient(&self, t: f64, beta: &[f64]) -> Result<DVector<f64>> {
        self.check_beta(beta)?;
        self.chars_at(t).psi_gradient(beta)
    }

    fn check_beta(&self, beta: &[f64]) -> Result<()> {
        if beta.len() != self.dim || beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidSpec(format!("beta must be a finite {}-vector", self.dim)));
        }
        Ok(())
    }

    pub fn has_jumps(&self) -> bool {
        self.segments.iter().any(|s| s.jumps.iter().any(|j| j.intensity > 0.0))
    }
}

/// `Psi_t(beta)`.
pub fn local_exponent(spec: &DriverSpec, t: f64, beta: &[f64]) -> Result<f64> {
    spec.local_exponent(t, beta)
}

/// `grad Psi_t(beta)`.
pub fn local_exponent_gradient(spec: &DriverSpec, t: f64, beta: &[f64]) -> Result<DVector<f64>> {
    spec.local_exponent_gradient(t, beta)
}

/// Characteristics of `X` under the measure with density driven by `sigma`.
pub fn girsanov_transform(spec: &DriverSpec, sigma: &PiecewiseVector, target: MeasureId) -> Result<DriverSpec> {
    if sigma.dim() != spec.dim {
        return Err(Error::InvalidSpec("sigma dimension differs from the driver".into()));
    }
    if sigma.is_zero() {
        return Ok(DriverSpec { measure: target, ..spec.clone() });
    }
    let mut starts: Vec<f64> = spec.starts.iter().chain(sigma.starts()).copied().collect();
    starts.sort_by(f64::total_cmp);
    starts.dedup();
    let segments = starts
        .iter()
        .map(|&s| spec.chars_at(s).girsanov(sigma.at(s).as_slice()))
        .collect::<Result<Vec<_>>>()?;
    DriverSpec::new(target, starts, segments)
}

struct JumpPlan {
    poisson: Option<Poisson<f64>>,
    size: JumpSize,
    loading: Vec<f64>,
}

struct StepPlan {
    drift_dt: Vec<f64>,
    /// Row-major `sqrt(c dt)`, or `None` when `c = 0`.
    vol: Option<Vec<f64>>,
    jumps: Vec<JumpPlan>,
}

fn sqrt_psd(c: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(c.clone());
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose()
}

/// Precomputed per-step sampling plan for a fixed grid.
pub struct IncrementSampler {
    dim: usize,
    plans: Vec<StepPlan>,
    step_plan: Vec<usize>,
}

impl IncrementSampler {
    pub fn new(spec: &DriverSpec, times: &[f64]) -> Result<Self> {
        check_increasing(times)?;
        let mut plans = Vec::new();
        let mut step_plan = Vec::with_capacity(times.len() - 1);
        let mut keys: Vec<(usize, u64)> = Vec::new();
        for w in times.windows(2) {
            let seg = segment_index(&spec.starts, w[0]);
            let dt = w[1] - w[0];
            let key = (seg, dt.to_bits());
            let idx = match keys.iter().position(|k| *k == key) {
                Some(i) => i,
                None => {
                    keys.push(key);
                    plans.push(Self::plan(&spec.segments[seg], dt)?);
                    plans.len() - 1
                }
            };
            step_plan.push(idx);
        }
        Ok(IncrementSampler { dim: spec.dim, plans, step_plan })
    }

    fn plan(ch: &Characteristics, dt: f64) -> Result<StepPlan> {
        let comp = ch.compensator();
        let drift_dt = (0..ch.dim()).map(|i| (ch.drift[i] - comp[i]) * dt).collect();
        let vol = if ch.diffusion.iter().all(|x| *x == 0.0) {
            None
        } else {
            let r = sqrt_psd(&ch.diffusion) * dt.sqrt();
            let d = ch.dim();
            Some((0..d * d).map(|k| r[(k / d, k % d)]).collect())
        };
        let jumps = ch
            .jumps
            .iter()
            .map(|j| {
                let rate = j.intensity * dt;
                let poisson = if rate > 0.0 {
                    Some(Poisson::new(rate).map_err(|e| Error::InvalidSpec(format!("{e}")))?)
                } else {
                    None
                };
                Ok(JumpPlan { poisson, size: j.size.clone(), loading: j.loading.iter().copied().collect() })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(StepPlan { drift_dt, vol, jumps })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> usize {
        self.step_plan.len()
    }

    /// Draws the increment of step `i` into `out`. Exactly `dim` normals are
    /// drawn from `normals` per step; `sign = -1` gives the antithetic
    /// Brownian path. `z` is scratch of length `dim`.
    #[inline]
    pub fn sample_step(
        &self,
        i: usize,
        normals: &mut ChaCha8Rng,
        jumps: &mut ChaCha8Rng,
        sign: f64,
        z: &mut [f64],
        out: &mut [f64],
    ) {
        let plan = &self.plans[self.step_plan[i]];
        let d = self.dim;
        for zk in z.iter_mut() {
            let n: f64 = normals.sample(StandardNormal);
            *zk = sign * n;
        }
        out.copy_from_slice(&plan.drift_dt);
        if let Some(vol) = &plan.vol {
            for r in 0..d {
                let row = &vol[r * d..(r + 1) * d];
                let mut acc = 0.0;
                for k in 0..d {
                    acc += row[k] * z[k];
                }
                out[r] += acc;
            }
        }
        for jp in &plan.jumps {
            if let Some(p) = &jp.poisson {
                let count = p.sample(jumps) as u64;
                for _ in 0..count {
                    let size = jp.size.sample(jumps);
                    for (o, l) in out.iter_mut().zip(&jp.loading) {
                        *o += l * size;
                    }
                }
            }
        }
    }
}

/// One path of increments over `grid`, keyed by `(seed, path_index)`.
pub fn simulate_increments(spec: &DriverSpec, grid: &[f64], seed: u64, path_index: u64) -> Result<Vec<DVector<f64>>> {
    let sampler = IncrementSampler::new(spec, grid)?;
    let mut normals = path_rng(seed, STREAM_BROWNIAN, path_index);
    let mut jumps = path_rng(seed, STREAM_JUMPS, path_index);
    let mut z = vec![0.0; spec.dim];
    let mut buf = vec![0.0; spec.dim];
    let mut out = Vec::with_capacity(sampler.steps());
    for i in 0..sampler.steps() {
        sampler.sample_step(i, &mut normals, &mut jumps, 1.0, &mut z, &mut buf);
        out.push(DVector::from_column_slice(&buf));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spot() -> MeasureId {
        MeasureId::Spot(0)
    }

    fn two_point_spec(drift: f64) -> DriverSpec {
        let ch = Characteristics {
            drift: DVector::from_element(1, drift),
            diffusion: DMatrix::zeros(1, 1),
            jumps: vec![JumpComponent {
                intensity: 2.0,
                size: JumpSize::TwoPoint { up: 0.5, down: -0.5, p_up: 0.5 },
                loading: DVector::from_element(1, 1.0),
            }],
        };
        DriverSpec::constant(spot(), ch).unwrap()
    }

    #[test]
    fn pure_diffusion_exponent() {
        let ch = Characteristics::brownian(DVector::zeros(1), DMatrix::identity(1, 1));
        let spec = DriverSpec::constant(spot(), ch).unwrap();
        assert!((spec.local_exponent(0.0, &[0.5]).unwrap() - 0.125).abs() < 1e-15);
        assert_eq!(spec.local_exponent(0.0, &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_two_point_exponent() {
        let spec = two_point_spec(0.0);
        let expect = 2.0 * (0.5f64.cosh() - 1.0);
        assert!((spec.local_exponent(0.0, &[1.0]).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn gradient_identities() {
        let ch = Characteristics::brownian(DVector::zeros(2), DMatrix::identity(2, 2));
        let spec = DriverSpec::constant(spot(), ch).unwrap();
        let g = spec.local_exponent_gradient(0.0, &[0.3, -0.1]).unwrap();
        assert!((g[0] - 0.3).abs() < 1e-15 && (g[1] + 0.1).abs() < 1e-15);
        let g0 = two_point_spec(0.05).local_exponent_gradient(0.0, &[0.0]).unwrap();
        assert!((g0[0] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn gaussian_truncated_mean_limits() {
        assert!((gaussian_truncated_mean(0.2, 0.1, 100.0) - 0.2).abs() < 1e-15);
        assert!(gaussian_truncated_mean(0.0, 0.3, 1.0).abs() < 1e-17);
        assert_eq!(gaussian_truncated_mean(2.0, 0.0, 1.0), 0.0);
    }

    #[test]
    fn deterministic_increments() {
        let ch = Characteristics::brownian(DVector::from_element(1, 0.1), DMatrix::zeros(1, 1));
        let spec = DriverSpec::constant(spot(), ch).unwrap();
        let inc = simulate_increments(&spec, &[0.0, 0.5, 1.0, 1.5], 1, 0).unwrap();
        assert!(inc.iter().all(|x| x[0] == 0.05));
        assert_eq!(simulate_increments(&spec, &[0.0], 1, 0), Err(Error::EmptyGrid));
    }

    #[test]
    fn rejects_invalid_characteristics() {
        let bad = Characteristics::brownian(DVector::zeros(2), DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]));
        assert!(DriverSpec::constant(spot(), bad).is_err());
        let mut neg = Characteristics::brownian(DVector::zeros(1), DMatrix::zeros(1, 1));
        neg.jumps.push(JumpComponent {
            intensity: -1.0,
            size: JumpSize::Gaussian { mean: 0.0, std: 0.1 },
            loading: DVector::from_element(1, 1.0),
        });
        assert!(DriverSpec::constant(spot(), neg).is_err());
    }

    #[test]
    fn girsanov_brownian_shift() {
        let ch = Characteristics::brownian(DVector::zeros(1), DMatrix::identity(1, 1));
        let spec = DriverSpec::constant(spot(), ch).unwrap();
        let s = PiecewiseVector::constant(DVector::from_element(1, 0.2));
        let t = girsanov_transform(&spec, &s, MeasureId::Spot(1)).unwrap();
        assert!((t.segments()[0].drift[0] - 0.2).abs() < 1e-16);
        let zero = PiecewiseVector::constant(DVector::zeros(1));
        let same = girsanov_transform(&spec, &zero, spot()).unwrap();
        assert_eq!(same, spec);
    }

    #[test]
    fn gaussian_overflow_is_reported() {
        let mut ch = Characteristics::brownian(DVector::zeros(1), DMatrix::zeros(1, 1));
        ch.jumps.push(JumpComponent {
            intensity: 1.0,
            size: JumpSize::Gaussian { mean: 0.0, std: 10.0 },
            loading: DVector::from_element(1, 1.0),
        });
        let spec = DriverSpec::constant(spot(), ch).unwrap();
        assert!(matches!(spec.local_exponent(0.0, &[100.0]), Err(Error::ExponentialMomentUnbounded(_))));
    }
}
