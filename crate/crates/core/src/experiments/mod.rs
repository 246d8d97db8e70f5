//! Monte Carlo harness.
//!
//! Replicates are the unit of parallel work. Replicate `r` of grid cell `c`
//! draws from the stream `(seed, experiment, c, r, ..)`, results are collected
//! in replicate order and reduced on one thread, so every report is a pure
//! function of the configuration and seed, whatever the worker count.

mod bias;
mod chernoff;
mod current_status;
mod inference;
mod kde;
mod table;

pub use bias::{run_bias_scan, BiasRow, BiasScanReport};
pub use chernoff::{run_chernoff, ChernoffReport};
pub use current_status::{run_current_status, CurrentStatusReport};
pub use inference::{run_coverage, run_normality_check, CoverageReport, NormalityReport};
pub use kde::{run_kde_supeff, KdeCell, KdeSupeffReport};
pub use table::{is_fixed_model, run_ratio_table, RatioCell, RatioTable};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::isotonic::{Direction, SortedSample};
use crate::kde::Kernel;
use crate::limit_dist::ChernoffSampler;
use crate::models::{
    draw_current_status, draw_regression, CurrentStatusModel, FailureCdf, KdeBump,
    PerturbationBump, RegressionModel,
};
use crate::pooling::{choose_m, Functional, RateSchedule};
use crate::rng::{experiment_id, StreamKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Table1Left,
    Table1Right,
    Normality,
    Coverage,
    BiasScan,
    KdeSupeff,
    CurrentStatus,
    Chernoff,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Table1Left,
        ExperimentKind::Table1Right,
        ExperimentKind::Normality,
        ExperimentKind::Coverage,
        ExperimentKind::BiasScan,
        ExperimentKind::KdeSupeff,
        ExperimentKind::CurrentStatus,
        ExperimentKind::Chernoff,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Table1Left => "table1-left",
            ExperimentKind::Table1Right => "table1-right",
            ExperimentKind::Normality => "normality",
            ExperimentKind::Coverage => "coverage",
            ExperimentKind::BiasScan => "bias-scan",
            ExperimentKind::KdeSupeff => "kde-supeff",
            ExperimentKind::CurrentStatus => "current-status",
            ExperimentKind::Chernoff => "chernoff",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn stream_id(&self) -> u64 {
        experiment_id(self.name())
    }
}

/// Mean function used by the regression experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// `mu(x) = x`.
    FixedLinear,
    /// `mu_n(x) = x + n^(-1/3) B(n^(1/3)(x - x0))`, rescaled with each cell's `n`.
    Perturbed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionalKind {
    MuAt,
    MuInverseAt,
    CdfAt,
    QuantileAt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChernoffSettings {
    pub horizon: f64,
    pub step: f64,
    pub draws: usize,
}

impl Default for ChernoffSettings {
    fn default() -> Self {
        Self {
            horizon: ChernoffSampler::DEFAULT_HORIZON,
            step: ChernoffSampler::DEFAULT_STEP,
            draws: 100_000,
        }
    }
}

/// Row and column headers of the reproduced ratio table.
pub const TABLE1_N: [usize; 7] = [50, 100, 200, 500, 1000, 3000, 10000];
pub const TABLE1_M: [usize; 7] = [5, 10, 15, 30, 45, 60, 90];

/// Everything a run needs apart from the worker count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub replicates: usize,
    /// Per-subsample sizes `n`.
    pub grid_n: Vec<usize>,
    /// Subsample counts `m`; empty means "derive from `schedule`".
    pub grid_m: Vec<usize>,
    pub schedule: RateSchedule,
    pub model: ModelKind,
    pub noise_sd: f64,
    pub functional: FunctionalKind,
    /// Level for inverse and quantile functionals.
    pub a: f64,
    /// Point for forward, cdf and KDE functionals.
    pub t0: f64,
    /// Centre of the regression perturbation.
    pub x0: f64,
    pub alpha: f64,
    pub kernel: Kernel,
    pub bump_amplitude: f64,
    /// Sample sizes scanned by the bias experiment.
    pub bias_n: Vec<usize>,
    pub chernoff: ChernoffSettings,
}

impl ExperimentConfig {
    /// Defaults for `kind`; `v = 0.2`, `a = 0.5`, `x0 = 0.5`, `alpha = 0.05`.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let mut c = Self {
            kind,
            seed: 1,
            replicates: 2000,
            grid_n: TABLE1_N.to_vec(),
            grid_m: TABLE1_M.to_vec(),
            schedule: RateSchedule::inverse_problem(),
            model: ModelKind::FixedLinear,
            noise_sd: 0.2,
            functional: FunctionalKind::MuInverseAt,
            a: 0.5,
            t0: 0.5,
            x0: 0.5,
            alpha: 0.05,
            kernel: Kernel::Biweight,
            bump_amplitude: KdeBump::default().amplitude,
            bias_n: vec![500, 2000, 8000],
            chernoff: ChernoffSettings::default(),
        };
        match kind {
            ExperimentKind::Table1Left => {}
            ExperimentKind::Table1Right => c.model = ModelKind::Perturbed,
            ExperimentKind::Normality => {
                c.grid_n = vec![1000];
                c.grid_m = Vec::new();
            }
            ExperimentKind::Coverage => {
                c.grid_n = vec![1000];
                c.grid_m = vec![50];
            }
            ExperimentKind::BiasScan => {
                c.replicates = 10_000;
                c.grid_n = Vec::new();
                c.grid_m = Vec::new();
            }
            ExperimentKind::KdeSupeff => {
                c.grid_n = vec![1000];
                c.grid_m = vec![1, 27];
            }
            ExperimentKind::CurrentStatus => {
                c.grid_n = vec![1000];
                c.grid_m = vec![27];
                c.functional = FunctionalKind::QuantileAt;
            }
            ExperimentKind::Chernoff => {
                c.grid_n = Vec::new();
                c.grid_m = Vec::new();
            }
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(invalid("replicates", "need at least 2"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha", format!("{} not in (0, 1)", self.alpha)));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(invalid("noise_sd", "must be finite and >= 0"));
        }
        for (name, v) in [("a", self.a), ("t0", self.t0), ("x0", self.x0)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(invalid(name, format!("{v} not in (0, 1)")));
            }
        }
        if self.grid_n.iter().chain(&self.grid_m).chain(&self.bias_n).any(|&v| v == 0) {
            return Err(invalid("grid", "sizes and counts must be positive"));
        }
        let needs_grid = !matches!(self.kind, ExperimentKind::BiasScan | ExperimentKind::Chernoff);
        if needs_grid && self.grid_n.is_empty() {
            return Err(invalid("n", "grid needs at least one subsample size"));
        }
        if self.kind == ExperimentKind::BiasScan && self.bias_n.is_empty() {
            return Err(invalid("bias_n", "scan needs at least one sample size"));
        }
        let ratio_table = matches!(
            self.kind,
            ExperimentKind::Table1Left | ExperimentKind::Table1Right | ExperimentKind::KdeSupeff
        );
        if ratio_table && self.grid_m.is_empty() {
            return Err(invalid("m", "grid needs at least one subsample count"));
        }
        for &n in &self.grid_n {
            for m in self.m_values(n) {
                n.checked_mul(m)
                    .filter(|&total| total <= MAX_POINTS_PER_REPLICATE)
                    .ok_or_else(|| {
                        invalid("grid", format!("n * m = {n} * {m} exceeds the memory budget"))
                    })?;
            }
        }
        if self.kind == ExperimentKind::Coverage && self.grid_m.iter().any(|&m| m < 2) {
            return Err(invalid("m", "coverage needs m >= 2"));
        }
        if self.kind == ExperimentKind::KdeSupeff {
            for &n in &self.grid_n {
                let h = (n as f64).powf(-1.0 / 3.0);
                if h >= self.t0.min(1.0 - self.t0) {
                    return Err(invalid(
                        "t0",
                        format!("bandwidth {h} at n = {n} reaches the boundary"),
                    ));
                }
            }
        }
        ChernoffSampler::new(self.chernoff.horizon, self.chernoff.step, self.seed)?;
        Ok(())
    }

    /// The `m` values run for subsample size `n`.
    pub fn m_values(&self, n: usize) -> Vec<usize> {
        if self.grid_m.is_empty() {
            vec![choose_m(&self.schedule, n.max(2))]
        } else {
            self.grid_m.clone()
        }
    }

    pub fn functional(&self) -> Functional {
        match self.functional {
            FunctionalKind::MuAt => Functional::MuAt(self.t0),
            FunctionalKind::MuInverseAt => Functional::MuInverseAt(self.a),
            FunctionalKind::CdfAt => Functional::CdfAt(self.t0),
            FunctionalKind::QuantileAt => Functional::QuantileAt(self.a),
        }
    }

    pub(crate) fn stream(&self) -> StreamKey {
        StreamKey::new(self.seed, self.kind.stream_id())
    }

    pub(crate) fn scenario(&self) -> Result<Scenario> {
        match self.functional {
            FunctionalKind::CdfAt | FunctionalKind::QuantileAt => Ok(Scenario::CurrentStatus(
                CurrentStatusModel::new(FailureCdf::Uniform)?,
            )),
            FunctionalKind::MuAt | FunctionalKind::MuInverseAt => Ok(Scenario::Regression {
                model: self.model,
                noise_sd: self.noise_sd,
                x0: self.x0,
            }),
        }
    }
}

/// Upper bound on `n * m` for one replicate.
pub const MAX_POINTS_PER_REPLICATE: usize = 50_000_000;

/// Pass/fail outcome of one invariant check in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Advisory checks are reported but do not fail a run.
    pub advisory: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            advisory: false,
            detail: detail.into(),
        }
    }

    pub fn advisory(mut self) -> Self {
        self.advisory = true;
        self
    }

    /// Whether this check should fail the run.
    pub fn blocking_failure(&self) -> bool {
        !self.passed && !self.advisory
    }
}

/// Data-generating process plus fitting direction for one grid cell.
#[derive(Debug, Clone)]
pub(crate) enum Scenario {
    Regression {
        model: ModelKind,
        noise_sd: f64,
        x0: f64,
    },
    CurrentStatus(CurrentStatusModel),
}

impl Scenario {
    fn regression_model(model: ModelKind, noise_sd: f64, x0: f64, n: usize) -> Result<RegressionModel> {
        match model {
            ModelKind::FixedLinear => RegressionModel::linear(noise_sd),
            ModelKind::Perturbed => {
                RegressionModel::perturbed(PerturbationBump::new(x0, n as u64)?, noise_sd)
            }
        }
    }

    pub(crate) fn direction(&self) -> Direction {
        Direction::Nondecreasing
    }

    /// Draw `size` points of the model attached to subsample size `n`.
    pub(crate) fn draw(&self, n: usize, size: usize, key: &StreamKey) -> Result<SortedSample> {
        match self {
            Scenario::Regression {
                model,
                noise_sd,
                x0,
            } => draw_regression(&Self::regression_model(*model, *noise_sd, *x0, n)?, size, key),
            Scenario::CurrentStatus(cs) => draw_current_status(cs, size, key)?.to_sample(),
        }
    }

    /// True value of `functional` under the model attached to `n`.
    pub(crate) fn truth(&self, functional: Functional, n: usize) -> Result<f64> {
        match (self, functional) {
            (Scenario::Regression { model, noise_sd, x0 }, Functional::MuAt(t)) => {
                Ok(Self::regression_model(*model, *noise_sd, *x0, n)?.mu.eval(t))
            }
            (Scenario::Regression { model, noise_sd, x0 }, Functional::MuInverseAt(a)) => {
                let m = Self::regression_model(*model, *noise_sd, *x0, n)?;
                Ok(bisect_increasing(|x| m.mu.eval(x), a))
            }
            (Scenario::CurrentStatus(cs), Functional::CdfAt(t)) => Ok(cs.failure().eval(t)),
            (Scenario::CurrentStatus(cs), Functional::QuantileAt(a)) => {
                if !(a > 0.0 && a < 1.0) {
                    return Err(invalid("a", format!("{a} not in (0, 1)")));
                }
                let f = cs.failure().clone();
                Ok(bisect_increasing(|t| f.eval(t), a))
            }
            _ => Err(invalid(
                "functional",
                "functional does not match the data-generating model",
            )),
        }
    }
}

/// Smallest `x` in `[0, 1]` with `g(x) >= a`, for nondecreasing continuous `g`.
fn bisect_increasing<G: Fn(f64) -> f64>(g: G, a: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if g(lo) >= a {
        return lo;
    }
    if g(hi) < a {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) >= a {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Run `f(0..count)` on `workers` threads and return results in index order.
pub(crate) fn replicate_map<T, F>(workers: usize, count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| invalid("workers", e.to_string()))?;
    pool.install(|| (0..count as u64).into_par_iter().map(&f).collect())
}

/// Draw `m` independent blocks of size `n`.
pub(crate) fn draw_blocks(
    scenario: &Scenario,
    n: usize,
    m: usize,
    key: &StreamKey,
) -> Result<Vec<SortedSample>> {
    (0..m)
        .map(|j| scenario.draw(n, n, &key.with_subsample(j as u64 + 1)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for k in ExperimentKind::ALL {
            assert_eq!(ExperimentKind::from_name(k.name()), Some(k));
        }
        assert_eq!(ExperimentKind::from_name("nope"), None);
    }

    #[test]
    fn defaults_validate() {
        for k in ExperimentKind::ALL {
            ExperimentConfig::defaults(k).validate().unwrap();
        }
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::Coverage);
        c.grid_m = vec![1];
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::defaults(ExperimentKind::Table1Left);
        c.replicates = 1;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::defaults(ExperimentKind::Table1Left);
        c.alpha = 1.0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::defaults(ExperimentKind::Table1Left);
        c.grid_n = vec![0];
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::defaults(ExperimentKind::KdeSupeff);
        c.t0 = 0.05;
        assert!(c.validate().is_err());
    }

    #[test]
    fn normality_m_follows_schedule() {
        let c = ExperimentConfig::defaults(ExperimentKind::Normality);
        assert_eq!(c.m_values(1000), vec![10]);
    }

    #[test]
    fn truths() {
        let c = ExperimentConfig::defaults(ExperimentKind::Table1Right);
        let s = c.scenario().unwrap();
        for n in [50, 1000] {
            let t = s.truth(Functional::MuInverseAt(0.5), n).unwrap();
            assert!((t - 0.5).abs() < 1e-15);
        }
        let cs = ExperimentConfig::defaults(ExperimentKind::CurrentStatus).scenario().unwrap();
        assert!((cs.truth(Functional::QuantileAt(0.5), 10).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(cs.truth(Functional::CdfAt(0.3), 10).unwrap(), 0.3);
        assert!(cs.truth(Functional::MuAt(0.3), 10).is_err());
        assert!(cs.truth(Functional::QuantileAt(1.0), 10).is_err());
    }

    #[test]
    fn replicate_map_preserves_order() {
        let v = replicate_map(3, 100, |i| Ok(i * 2)).unwrap();
        assert_eq!(v, (0..100).map(|i| i * 2).collect::<Vec<u64>>());
    }
}
