//! Chernoff's distribution and the scaling constants of cube-root limits.
//!
//! A draw is the argmin of `W(s) + s^2` over the grid `{-T, -T+h, ..., T}`,
//! where `W` is a two-sided Brownian path built from independent Gaussian
//! increments in each direction from 0. The discrete minimiser is refined by
//! the vertex of the parabola through it and its two neighbours.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::pooling::MIN_LIMIT_DRAWS;
use crate::rng::{experiment_id, StreamKey};
use crate::stats::{quantile_sorted, sorted_copy};

const CHERNOFF_STREAM: u64 = experiment_id("chernoff");
const MFOLD_STREAM: u64 = experiment_id("mfold-resample");
const MAX_GRID_POINTS: usize = 1 << 26;
const MAX_DOUBLINGS: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChernoffSampler {
    pub horizon: f64,
    pub step: f64,
    pub seed: u64,
}

impl ChernoffSampler {
    pub const DEFAULT_HORIZON: f64 = 2.5;
    pub const DEFAULT_STEP: f64 = 0.005;

    pub fn new(horizon: f64, step: f64, seed: u64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid("horizon", format!("{horizon} must be positive")));
        }
        if !(step > 0.0 && step < horizon) {
            return Err(invalid("step", format!("{step} must lie in (0, horizon)")));
        }
        let points = 2.0 * horizon / step + 1.0;
        if points > MAX_GRID_POINTS as f64 {
            return Err(invalid("step", format!("grid of {points:.0} points is too large")));
        }
        Ok(Self { horizon, step, seed })
    }

    pub fn with_seed(seed: u64) -> Self {
        Self {
            horizon: Self::DEFAULT_HORIZON,
            step: Self::DEFAULT_STEP,
            seed,
        }
    }

    /// `count` draws; path `i` always uses the stream keyed by `(seed, i)`.
    pub fn sample(&self, count: usize) -> Result<ChernoffDraws> {
        if count == 0 {
            return Err(invalid("count", "must be at least 1"));
        }
        let results: Vec<(f64, u32)> = (0..count)
            .into_par_iter()
            .map_init(Vec::new, |buf, i| self.draw_path(i as u64, buf))
            .collect();
        let boundary_hits = results.iter().filter(|(_, hits)| *hits > 0).count();
        Ok(ChernoffDraws {
            values: results.into_iter().map(|(v, _)| v).collect(),
            boundary_hits,
        })
    }

    fn draw_path(&self, index: u64, buf: &mut Vec<f64>) -> (f64, u32) {
        let mut rng = StreamKey::new(self.seed, CHERNOFF_STREAM)
            .with_replicate(index)
            .rng();
        let mut horizon = self.horizon;
        let mut hits = 0;
        loop {
            let half = (horizon / self.step).round() as usize;
            fill_path(buf, half, self.step, &mut rng);
            let idx = argmin(buf);
            let at_edge = idx == 0 || idx == buf.len() - 1;
            if at_edge && hits < MAX_DOUBLINGS {
                hits += 1;
                horizon *= 2.0;
                continue;
            }
            let mut s = (idx as f64 - half as f64) * self.step;
            if !at_edge {
                let (a, b, c) = (buf[idx - 1], buf[idx], buf[idx + 1]);
                let curvature = a - 2.0 * b + c;
                if curvature > 0.0 {
                    s += 0.5 * self.step * (a - c) / curvature;
                }
            }
            return (s, hits);
        }
    }
}

/// `buf[half + k] = W(k h) + (k h)^2` for `k` in `-half..=half`.
fn fill_path<R: Rng + ?Sized>(buf: &mut Vec<f64>, half: usize, step: f64, rng: &mut R) {
    buf.clear();
    buf.resize(2 * half + 1, 0.0);
    let sd = step.sqrt();
    for dir in [1isize, -1] {
        let mut w = 0.0;
        for k in 1..=half {
            let z: f64 = StandardNormal.sample(rng);
            w += sd * z;
            let s = k as f64 * step;
            let pos = (half as isize + dir * k as isize) as usize;
            buf[pos] = w + s * s;
        }
    }
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChernoffDraws {
    pub values: Vec<f64>,
    /// Paths whose minimiser first landed on `+-T` and were re-simulated on a
    /// doubled horizon.
    pub boundary_hits: usize,
}

impl ChernoffDraws {
    pub fn boundary_rate(&self) -> f64 {
        self.boundary_hits as f64 / self.values.len() as f64
    }

    pub fn variance(&self) -> f64 {
        crate::stats::sample_variance(&self.values)
    }
}

fn nonzero(name: &'static str, v: f64) -> Result<()> {
    if v == 0.0 || !v.is_finite() {
        Err(invalid(name, format!("{v} must be finite and nonzero")))
    } else {
        Ok(())
    }
}

/// `|4 v^2 mu'(t0) / f(t0)|^(1/3)`, the forward scale.
pub fn kappa_forward(v2: f64, mu_prime_t0: f64, f_t0: f64) -> Result<f64> {
    nonzero("mu_prime", mu_prime_t0)?;
    if !(f_t0 > 0.0) {
        return Err(invalid("f_t0", format!("{f_t0} must be positive")));
    }
    Ok((4.0 * v2 * mu_prime_t0 / f_t0).abs().cbrt())
}

/// `|4 v^2 / (mu'(t0)^2 f(t0))|^(1/3)`, the inverse scale.
pub fn kappa_tilde_inverse(v2: f64, mu_prime_t0: f64, f_t0: f64) -> Result<f64> {
    nonzero("mu_prime", mu_prime_t0)?;
    if !(f_t0 > 0.0) {
        return Err(invalid("f_t0", format!("{f_t0} must be positive")));
    }
    Ok((4.0 * v2 / (mu_prime_t0 * mu_prime_t0 * f_t0)).abs().cbrt())
}

/// `{4 F(t)(1 - F(t)) f_T(t) / f(t)}^(2/3) Var(Z)` for the current-status NPMLE.
pub fn sigma2_current_status(ft_t: f64, density_t: f64, f_t: f64, var_z: f64) -> Result<f64> {
    if !(ft_t > 0.0 && ft_t < 1.0) {
        return Err(invalid("F_T(t)", format!("{ft_t} must lie strictly inside (0, 1)")));
    }
    if !(density_t > 0.0) {
        return Err(invalid("f_T(t)", format!("{density_t} must be positive")));
    }
    if !(f_t > 0.0) {
        return Err(invalid("f(t)", format!("{f_t} must be positive")));
    }
    let bracket = 4.0 * ft_t * (1.0 - ft_t) * density_t / f_t;
    Ok(bracket.powf(2.0 / 3.0) * var_z)
}

/// Scales of the regression limits at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleConstants {
    pub kappa: f64,
    pub kappa_tilde: f64,
    /// Variance of the forward limit `kappa * Z`.
    pub sigma2: f64,
}

impl ScaleConstants {
    pub fn regression(v2: f64, mu_prime_t0: f64, f_t0: f64, var_z: f64) -> Result<Self> {
        let kappa = kappa_forward(v2, mu_prime_t0, f_t0)?;
        let kappa_tilde = kappa_tilde_inverse(v2, mu_prime_t0, f_t0)?;
        Ok(Self {
            kappa,
            kappa_tilde,
            sigma2: kappa * kappa * var_z,
        })
    }

    /// Variance of the inverse limit `kappa_tilde * Z`.
    pub fn inverse_sigma2(&self, var_z: f64) -> f64 {
        self.kappa_tilde * self.kappa_tilde * var_z
    }
}

/// Draws of `m^(-1/2) (Z_1 + ... + Z_m)` resampled from the centred `draws`;
/// one output per input draw. With `m = 1` the draws are returned as is.
pub fn mfold_samples(draws: &[f64], m: usize, stream: &StreamKey) -> Result<Vec<f64>> {
    if draws.len() < MIN_LIMIT_DRAWS {
        return Err(Error::TooFewDraws {
            got: draws.len(),
            needed: MIN_LIMIT_DRAWS,
        });
    }
    if m == 0 {
        return Err(invalid("m", "must be at least 1"));
    }
    if m == 1 {
        return Ok(draws.to_vec());
    }
    let mut rng = StreamKey {
        experiment: stream.experiment ^ MFOLD_STREAM,
        ..*stream
    }
    .with_subsample(m as u64)
    .rng();
    // Z has mean exactly 0; the empirical mean would be amplified by sqrt(m).
    let centre = crate::stats::mean(draws);
    let scale = (m as f64).sqrt();
    Ok((0..draws.len())
        .map(|_| {
            let s: f64 = (0..m)
                .map(|_| draws[rng.random_range(0..draws.len())] - centre)
                .sum();
            s / scale
        })
        .collect())
}

/// Empirical `alpha`-quantile of the `m`-fold convolution `m^(-1/2) sum Z_j`.
pub fn mfold_quantile(draws: &[f64], m: usize, alpha: f64, stream: &StreamKey) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid("alpha", format!("{alpha} is not a probability")));
    }
    let samples = mfold_samples(draws, m, stream)?;
    Ok(quantile_sorted(&sorted_copy(&samples), alpha))
}

/// Write draws as a little-endian `u64` count followed by that many `f64`s.
pub fn write_draws(path: &Path, draws: &[f64]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(&(draws.len() as u64).to_le_bytes())?;
    for v in draws {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_draws(path: &Path) -> Result<Vec<f64>> {
    let mut input = BufReader::new(fs::File::open(path)?);
    let mut header = [0u8; 8];
    input
        .read_exact(&mut header)
        .map_err(|_| Error::MalformedCache("missing count header".into()))?;
    let count = u64::from_le_bytes(header) as usize;
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    if body.len() != count * 8 {
        return Err(Error::MalformedCache(format!(
            "header announces {count} draws but body holds {} bytes",
            body.len()
        )));
    }
    Ok(body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

impl ChernoffSampler {
    pub fn cache_file_name(&self, count: usize) -> String {
        format!(
            "chernoff-T{}-h{}-seed{}-n{}.bin",
            self.horizon, self.step, self.seed, count
        )
    }

    /// Load `count` draws from `dir` if cached, otherwise simulate and store them.
    pub fn sample_cached(&self, dir: Option<&Path>, count: usize) -> Result<Vec<f64>> {
        let path: Option<PathBuf> = dir.map(|d| d.join(self.cache_file_name(count)));
        if let Some(p) = &path {
            if let Ok(values) = read_draws(p) {
                if values.len() == count {
                    return Ok(values);
                }
            }
        }
        let draws = self.sample(count)?;
        if let Some(p) = &path {
            if let Some(parent) = p.parent() {
                fs::create_dir_all(parent)?;
            }
            write_draws(p, &draws.values)?;
        }
        Ok(draws.values)
    }
}
