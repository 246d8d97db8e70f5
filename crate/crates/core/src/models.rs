//! Data-generating processes.
//!
//! Covariates are always Uniform(0, 1). Sorted covariates are produced
//! directly from normalized exponential spacings, which has the law of the
//! order statistics of an i.i.d. uniform sample and avoids an `O(n log n)` sort.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::isotonic::{Direction, SortedSample};
use crate::rng::StreamKey;

/// Local bump `B(u) = (1 - (|u| - 1)^2)^2 / 2` on `|u| <= 2`, rescaled with `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationBump {
    pub x0: f64,
    pub scale_n: u64,
}

impl PerturbationBump {
    pub fn new(x0: f64, scale_n: u64) -> Result<Self> {
        if !(x0 > 0.0 && x0 < 1.0) {
            return Err(invalid("x0", format!("{x0} is not in (0, 1)")));
        }
        if scale_n == 0 {
            return Err(invalid("scale_n", "must be positive"));
        }
        Ok(Self { x0, scale_n })
    }

    pub fn shape(u: f64) -> f64 {
        let a = u.abs();
        if a > 2.0 {
            return 0.0;
        }
        let inner = 1.0 - (a - 1.0) * (a - 1.0);
        0.5 * inner * inner
    }

    /// Half-width `2 n^(-1/3)` of the support of the perturbation.
    pub fn half_width(&self) -> f64 {
        2.0 * (self.scale_n as f64).powf(-1.0 / 3.0)
    }
}

/// `x + n^(-1/3) B(n^(1/3) (x - x0))`.
pub fn perturbed_mu(bump: &PerturbationBump, x: f64) -> f64 {
    let r = (bump.scale_n as f64).cbrt();
    x + PerturbationBump::shape(r * (x - bump.x0)) / r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeanFunction {
    /// `mu(x) = x`.
    Linear,
    Perturbed(PerturbationBump),
    /// Piecewise-linear interpolation through `(xs[i], values[i])`,
    /// held constant outside the table.
    Table { xs: Vec<f64>, values: Vec<f64> },
}

impl MeanFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            MeanFunction::Linear => x,
            MeanFunction::Perturbed(b) => perturbed_mu(b, x),
            MeanFunction::Table { xs, values } => interpolate(xs, values, x),
        }
    }
}

fn interpolate(xs: &[f64], values: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|&v| v < x);
    if k == 0 {
        return values[0];
    }
    if k == xs.len() {
        return values[xs.len() - 1];
    }
    let (x0, x1) = (xs[k - 1], xs[k]);
    let w = (x - x0) / (x1 - x0);
    values[k - 1] + w * (values[k] - values[k - 1])
}

/// `Y = mu(X) + eps`, `X ~ Uniform(0, 1)`, `eps ~ N(0, noise_sd^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub mu: MeanFunction,
    pub noise_sd: f64,
    pub direction: Direction,
}

impl RegressionModel {
    pub fn new(mu: MeanFunction, noise_sd: f64, direction: Direction) -> Result<Self> {
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(invalid("noise_sd", format!("{noise_sd} must be >= 0")));
        }
        if let MeanFunction::Table { xs, values } = &mu {
            if xs.is_empty() || xs.len() != values.len() {
                return Err(invalid("mu", "table needs matching, non-empty columns"));
            }
            if xs.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invalid("mu", "table covariates must be strictly ascending"));
            }
            let monotone = values.windows(2).all(|w| match direction {
                Direction::Nonincreasing => w[0] >= w[1],
                Direction::Nondecreasing => w[0] <= w[1],
            });
            if !monotone {
                return Err(invalid("mu", "table values are not monotone"));
            }
        }
        if !matches!(mu, MeanFunction::Table { .. }) && direction != Direction::Nondecreasing {
            return Err(invalid("direction", "built-in mean functions are nondecreasing"));
        }
        Ok(Self {
            mu,
            noise_sd,
            direction,
        })
    }

    /// `mu(x) = x` with the given noise level.
    pub fn linear(noise_sd: f64) -> Result<Self> {
        Self::new(MeanFunction::Linear, noise_sd, Direction::Nondecreasing)
    }

    pub fn perturbed(bump: PerturbationBump, noise_sd: f64) -> Result<Self> {
        Self::new(
            MeanFunction::Perturbed(bump),
            noise_sd,
            Direction::Nondecreasing,
        )
    }
}

/// Ascending order statistics of `n` i.i.d. Uniform(0, 1) draws.
pub fn sorted_uniforms<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut xs = Vec::with_capacity(n);
    let mut acc = 0.0;
    for _ in 0..n {
        let e: f64 = Exp1.sample(rng);
        acc += e;
        xs.push(acc);
    }
    let last: f64 = Exp1.sample(rng);
    let total = acc + last;
    xs.iter_mut().for_each(|x| *x /= total);
    xs
}

pub fn draw_regression(model: &RegressionModel, n: usize, stream: &StreamKey) -> Result<SortedSample> {
    draw_regression_with(model, n, &mut stream.rng())
}

pub fn draw_regression_with<R: Rng + ?Sized>(
    model: &RegressionModel,
    n: usize,
    rng: &mut R,
) -> Result<SortedSample> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    let xs = sorted_uniforms(n, rng);
    let ys = xs
        .iter()
        .map(|&x| {
            let eps: f64 = StandardNormal.sample(rng);
            model.mu.eval(x) + model.noise_sd * eps
        })
        .collect();
    SortedSample::new(xs, ys)
}

/// Failure-time distribution function on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureCdf {
    /// `F_T(t) = t`.
    Uniform,
    /// All mass at `at`.
    PointMass { at: f64 },
    /// Piecewise-linear through `(ts[i], values[i])`; constant outside.
    Table { ts: Vec<f64>, values: Vec<f64> },
}

impl FailureCdf {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            FailureCdf::Uniform => t.clamp(0.0, 1.0),
            FailureCdf::PointMass { at } => {
                if t >= *at {
                    1.0
                } else {
                    0.0
                }
            }
            FailureCdf::Table { ts, values } => interpolate(ts, values, t),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            FailureCdf::Uniform => Ok(()),
            FailureCdf::PointMass { at } if (0.0..=1.0).contains(at) => Ok(()),
            FailureCdf::PointMass { at } => Err(invalid("failure_cdf", format!("atom {at} outside [0, 1]"))),
            FailureCdf::Table { ts, values } => {
                if ts.len() < 2 || ts.len() != values.len() {
                    return Err(invalid("failure_cdf", "table needs at least two matching rows"));
                }
                if ts.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(invalid("failure_cdf", "times must be strictly ascending"));
                }
                if values.windows(2).any(|w| w[0] > w[1]) {
                    return Err(invalid("failure_cdf", "values must be nondecreasing"));
                }
                if values[0] < 0.0 || values[values.len() - 1] > 1.0 {
                    return Err(invalid("failure_cdf", "values must lie in [0, 1]"));
                }
                Ok(())
            }
        }
    }
}

const LATENT_GRID: usize = 1 << 12;

/// Current-status model with Uniform(0, 1) examination times.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentStatusModel {
    failure: FailureCdf,
    grid: Vec<f64>,
}

impl CurrentStatusModel {
    pub fn new(failure: FailureCdf) -> Result<Self> {
        failure.validate()?;
        let grid = (0..=LATENT_GRID)
            .map(|i| failure.eval(i as f64 / LATENT_GRID as f64))
            .collect();
        Ok(Self { failure, grid })
    }

    pub fn failure(&self) -> &FailureCdf {
        &self.failure
    }

    /// Inverse-CDF draw of the latent failure time from the tabulated `F_T`.
    ///
    /// Mass above `F_T(1)` is placed at `+inf` (never observed as failed).
    pub fn latent_time(&self, u: f64) -> f64 {
        if u <= self.grid[0] {
            return 0.0;
        }
        if u > self.grid[LATENT_GRID] {
            return f64::INFINITY;
        }
        let k = self.grid.partition_point(|&g| g < u);
        let (g0, g1) = (self.grid[k - 1], self.grid[k]);
        let h = 1.0 / LATENT_GRID as f64;
        let frac = if g1 > g0 { (u - g0) / (g1 - g0) } else { 1.0 };
        ((k - 1) as f64 + frac) * h
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurrentStatusDraw {
    /// Ascending examination times.
    pub times: Vec<f64>,
    pub indicators: Vec<u8>,
    pub latent: Vec<f64>,
}

impl CurrentStatusDraw {
    /// The draw as a sample whose responses are the indicators.
    pub fn to_sample(&self) -> Result<SortedSample> {
        SortedSample::new(
            self.times.clone(),
            self.indicators.iter().map(|&d| f64::from(d)).collect(),
        )
    }
}

pub fn draw_current_status(
    model: &CurrentStatusModel,
    n: usize,
    stream: &StreamKey,
) -> Result<CurrentStatusDraw> {
    draw_current_status_with(model, n, &mut stream.rng())
}

pub fn draw_current_status_with<R: Rng + ?Sized>(
    model: &CurrentStatusModel,
    n: usize,
    rng: &mut R,
) -> Result<CurrentStatusDraw> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    let times = sorted_uniforms(n, rng);
    let latent: Vec<f64> = (0..n).map(|_| model.latent_time(rng.random::<f64>())).collect();
    let indicators = times
        .iter()
        .zip(&latent)
        .map(|(&x, &t)| u8::from(t <= x))
        .collect();
    Ok(CurrentStatusDraw {
        times,
        indicators,
        latent,
    })
}

/// Four-piece quartic bump on `[-1, 1]` with `B(0) = 0`, zero integral and
/// a positive integral against any symmetric kernel unimodal at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdeBump {
    pub amplitude: f64,
}

impl Default for KdeBump {
    fn default() -> Self {
        Self { amplitude: 16.0 }
    }
}

impl KdeBump {
    pub fn eval(&self, u: f64) -> f64 {
        let piece = |c: f64| {
            let d = 1.0 / 16.0 - (u - c) * (u - c);
            d * d
        };
        let c = self.amplitude;
        if (-1.0..=-0.5).contains(&u) {
            -c * piece(-0.75)
        } else if (-0.5..=0.0).contains(&u) {
            c * piece(-0.25)
        } else if (0.0..=0.5).contains(&u) {
            c * piece(0.25)
        } else if (0.5..=1.0).contains(&u) {
            -c * piece(0.75)
        } else {
            0.0
        }
    }

    /// `sup |B|`.
    pub fn max_abs(&self) -> f64 {
        self.amplitude.abs() / 256.0
    }
}

/// Base density on `[0, 1]`; only the uniform law is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseDensity {
    #[default]
    Uniform,
}

impl BaseDensity {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            BaseDensity::Uniform => {
                if (0.0..=1.0).contains(&t) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn infimum(&self) -> f64 {
        1.0
    }
}

/// `f_n(t) = f0(t) + n^(-1/3) B(n^(1/3) (t - t0))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbedDensity {
    pub base: BaseDensity,
    pub bump: KdeBump,
    pub t0: f64,
    pub n: u64,
}

impl PerturbedDensity {
    pub fn new(base: BaseDensity, bump: KdeBump, t0: f64, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "must be positive"));
        }
        let r = (n as f64).cbrt();
        if !(t0 - 1.0 / r >= 0.0 && t0 + 1.0 / r <= 1.0) {
            return Err(invalid("t0", format!("bump around {t0} leaves [0, 1] at n = {n}")));
        }
        let worst = base.infimum() - bump.max_abs() / r;
        if worst < 0.0 {
            return Err(Error::NegativeDensity { t: t0, value: worst });
        }
        Ok(Self { base, bump, t0, n })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let r = (self.n as f64).cbrt();
        self.base.eval(t) + self.bump.eval(r * (t - self.t0)) / r
    }

    /// Draw by rejection against the base density.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let r = (self.n as f64).cbrt();
        let envelope = 1.0 + self.bump.max_abs() / (r * self.base.infimum());
        loop {
            let x: f64 = rng.random();
            let u: f64 = rng.random();
            if u * envelope * self.base.eval(x) <= self.eval(x) {
                return x;
            }
        }
    }
}

pub fn perturbed_density(
    base: BaseDensity,
    bump: KdeBump,
    t0: f64,
    n: u64,
    t: f64,
) -> Result<f64> {
    let density = PerturbedDensity::new(base, bump, t0, n)?;
    let value = density.eval(t);
    if value < 0.0 {
        return Err(Error::NegativeDensity { t, value });
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::experiment_id;

    fn key(r: u64) -> StreamKey {
        StreamKey::new(11, experiment_id("models-test")).with_replicate(r)
    }

    #[test]
    fn noiseless_linear_model_returns_covariates() {
        let model = RegressionModel::linear(0.0).unwrap();
        let s = draw_regression(&model, 3, &key(0)).unwrap();
        assert_eq!(s.xs(), s.ys());
        assert!(s.xs().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn draws_replay_by_stream() {
        let model = RegressionModel::linear(0.2).unwrap();
        let a = draw_regression(&model, 50, &key(4)).unwrap();
        let b = draw_regression(&model, 50, &key(4)).unwrap();
        let c = draw_regression(&model, 50, &key(5)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_draws_rejected() {
        let model = RegressionModel::linear(0.2).unwrap();
        assert!(draw_regression(&model, 0, &key(0)).is_err());
        let cs = CurrentStatusModel::new(FailureCdf::Uniform).unwrap();
        assert!(draw_current_status(&cs, 0, &key(0)).is_err());
    }

    #[test]
    fn noise_has_mean_zero() {
        let v = 0.2;
        let model = RegressionModel::linear(v).unwrap();
        let n = 100_000;
        let s = draw_regression(&model, n, &key(1)).unwrap();
        let resid: f64 = s.xs().iter().zip(s.ys()).map(|(x, y)| y - x).sum::<f64>() / n as f64;
        assert!(resid.abs() <= 4.0 * v / (n as f64).sqrt(), "{resid}");
    }

    #[test]
    fn sorted_uniforms_look_uniform() {
        let xs = sorted_uniforms(40_000, &mut key(2).rng());
        let below_half = xs.partition_point(|&x| x < 0.5) as f64 / 40_000.0;
        assert!((below_half - 0.5).abs() < 4.0 * 0.5 / 200.0);
        assert!(xs[0] > 0.0 && xs[xs.len() - 1] < 1.0);
    }

    #[test]
    fn bump_shape_and_perturbed_mu() {
        assert_eq!(PerturbationBump::shape(0.0), 0.0);
        assert_eq!(PerturbationBump::shape(1.0), 0.5);
        assert_eq!(PerturbationBump::shape(2.5), 0.0);
        assert_eq!(PerturbationBump::shape(0.7), PerturbationBump::shape(-0.7));

        let bump = PerturbationBump::new(0.5, 1000).unwrap();
        assert_eq!(perturbed_mu(&bump, 0.5), 0.5);
        assert!((perturbed_mu(&bump, 0.6) - 0.65).abs() < 1e-12);
        assert_eq!(perturbed_mu(&bump, 0.9), 0.9);
        assert!(PerturbationBump::new(1.0, 10).is_err());
        assert!(PerturbationBump::new(0.5, 0).is_err());
    }

    #[test]
    fn perturbed_mu_is_monotone_and_local() {
        for n in [1u64, 2, 5, 50, 1000, 100_000] {
            let bump = PerturbationBump::new(0.5, n).unwrap();
            let grid: Vec<f64> = (0..=10_000).map(|i| i as f64 / 10_000.0).collect();
            let vals: Vec<f64> = grid.iter().map(|&x| perturbed_mu(&bump, x)).collect();
            assert!(vals.windows(2).all(|w| w[0] <= w[1]), "n = {n}");
            let hw = bump.half_width();
            for (&x, &v) in grid.iter().zip(&vals) {
                if (x - 0.5).abs() >= hw {
                    assert_eq!(v, x);
                }
            }
        }
    }

    #[test]
    fn table_mean_function_validation() {
        let ok = MeanFunction::Table {
            xs: vec![0.0, 1.0],
            values: vec![1.0, 0.0],
        };
        let m = RegressionModel::new(ok, 0.1, Direction::Nonincreasing).unwrap();
        assert_eq!(m.mu.eval(0.25), 0.75);
        let bad = MeanFunction::Table {
            xs: vec![0.0, 1.0],
            values: vec![0.0, 1.0],
        };
        assert!(RegressionModel::new(bad, 0.1, Direction::Nonincreasing).is_err());
        assert!(RegressionModel::linear(-1.0).is_err());
    }

    #[test]
    fn degenerate_failure_at_zero_gives_all_failures() {
        let model = CurrentStatusModel::new(FailureCdf::PointMass { at: 0.0 }).unwrap();
        let d = draw_current_status(&model, 500, &key(3)).unwrap();
        assert!(d.indicators.iter().all(|&i| i == 1));
    }

    #[test]
    fn current_status_indicator_rate_and_consistency() {
        let model = CurrentStatusModel::new(FailureCdf::Uniform).unwrap();
        let n = 40_000;
        let d = draw_current_status(&model, n, &key(6)).unwrap();
        let p = d.indicators.iter().map(|&i| f64::from(i)).sum::<f64>() / n as f64;
        assert!((p - 0.5).abs() <= 4.0 / (n as f64).sqrt(), "{p}");
        for ((&x, &t), &i) in d.times.iter().zip(&d.latent).zip(&d.indicators) {
            assert_eq!(i, u8::from(t <= x));
        }
        let again = draw_current_status(&model, n, &key(6)).unwrap();
        assert_eq!(d, again);
    }

    #[test]
    fn latent_sampler_inverts_table() {
        let model = CurrentStatusModel::new(FailureCdf::Table {
            ts: vec![0.0, 0.5, 1.0],
            values: vec![0.0, 0.8, 0.9],
        })
        .unwrap();
        assert!((model.latent_time(0.4) - 0.25).abs() < 1e-9);
        assert!((model.latent_time(0.85) - 0.75).abs() < 1e-9);
        assert_eq!(model.latent_time(0.95), f64::INFINITY);
        assert!(CurrentStatusModel::new(FailureCdf::Table {
            ts: vec![0.0, 1.0],
            values: vec![0.5, 0.2],
        })
        .is_err());
    }

    #[test]
    fn kde_bump_properties() {
        let b = KdeBump { amplitude: 1.0 };
        assert_eq!(b.eval(0.0), 0.0);
        assert_eq!(b.eval(1.5), 0.0);
        for i in 0..100 {
            let u = i as f64 / 100.0;
            assert!((b.eval(u) - b.eval(-u)).abs() < 1e-18);
        }
        assert!((b.eval(0.25) - 1.0 / 256.0).abs() < 1e-18);
        assert!((b.eval(0.75) + 1.0 / 256.0).abs() < 1e-18);
    }

    #[test]
    fn perturbed_density_examples() {
        let bump = KdeBump::default();
        let v = perturbed_density(BaseDensity::Uniform, bump, 0.5, 1000, 0.5).unwrap();
        assert_eq!(v, 1.0);
        let f = PerturbedDensity::new(BaseDensity::Uniform, bump, 0.5, 1000).unwrap();
        let diff = crate::stats::simpson(|t| f.eval(t) - 1.0, 0.0, 1.0, 20_000);
        assert!(diff.abs() <= 1e-8, "{diff}");
        let huge = KdeBump { amplitude: 1e5 };
        assert!(matches!(
            perturbed_density(BaseDensity::Uniform, huge, 0.5, 8, 0.5),
            Err(Error::NegativeDensity { .. })
        ));
    }

    #[test]
    fn perturbed_density_sampler_tracks_bump() {
        let bump = KdeBump { amplitude: 200.0 };
        let f = PerturbedDensity::new(BaseDensity::Uniform, bump, 0.5, 8).unwrap();
        // Mass on the positive lobes (0.25, 0.75) is 1/2 + integral of the bump there.
        let lobe = crate::stats::simpson(|t| f.eval(t), 0.25, 0.75, 20_000);
        let mut rng = key(9).rng();
        let n = 200_000;
        let hits = (0..n)
            .filter(|_| (0.25..0.75).contains(&f.sample(&mut rng)))
            .count() as f64
            / n as f64;
        let se = (lobe * (1.0 - lobe) / n as f64).sqrt();
        assert!((hits - lobe).abs() < 4.0 * se, "{hits} vs {lobe}");
        assert!(lobe > 0.5);
    }
}
