//! Normality of the standardized pooled statistic and coverage of its intervals.

use serde::{Deserialize, Serialize};

use super::{draw_blocks, replicate_map, Check, ExperimentConfig};
use crate::error::{invalid, Error, Result};
use crate::pooling::{confidence_interval, pooled_point_estimate, PooledEstimate};
use crate::stats::{kurtosis, ks_distance_normal, mean, sample_variance, skewness, KahanSum};

/// KS distance below which the pooled statistic counts as normal.
pub const KS_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityReport {
    pub n: usize,
    pub m: usize,
    pub replicates: usize,
    pub ks_distance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub pass: bool,
    pub note: String,
}

impl NormalityReport {
    pub fn checks(&self) -> Vec<Check> {
        vec![Check::new(
            format!("normality-n{}-m{}", self.n, self.m),
            self.pass,
            format!("ks = {:.4} ({})", self.ks_distance, self.note),
        )]
    }

    /// Summarize standardized statistics.
    pub fn from_statistics(n: usize, m: usize, z: &[f64], note: impl Into<String>) -> Self {
        let ks = ks_distance_normal(z);
        Self {
            n,
            m,
            replicates: z.len(),
            ks_distance: ks,
            skewness: skewness(z),
            kurtosis: kurtosis(z),
            pass: m >= 2 && ks < KS_THRESHOLD,
            note: note.into(),
        }
    }
}

/// One pooled estimate per replicate at the first grid cell.
pub(crate) fn pooled_replicates(
    config: &ExperimentConfig,
    workers: usize,
    n: usize,
    m: usize,
    cell: u64,
) -> Result<(f64, Vec<PooledEstimate>)> {
    let scenario = config.scenario()?;
    let functional = config.functional();
    let direction = scenario.direction();
    let truth = scenario.truth(functional, n)?;
    let key = config.stream().with_cell(cell);
    let estimates = replicate_map(workers, config.replicates, |r| {
        let blocks = draw_blocks(&scenario, n, m, &key.with_replicate(r))?;
        pooled_point_estimate(&blocks, functional, direction)
    })?;
    Ok((truth, estimates))
}

/// `sqrt(m) r_n (theta_bar - theta_0) / sigma_hat` per replicate.
///
/// With `m = 1` there is no within-replicate spread; the statistic is then
/// standardized across replicates and the report is marked as failing, since
/// the limit is not normal.
pub(crate) fn normality_from(
    n: usize,
    m: usize,
    truth: f64,
    estimates: &[PooledEstimate],
) -> Result<NormalityReport> {
    if m == 1 {
        let raw: Vec<f64> = estimates.iter().map(|pe| pe.rate * (pe.theta_bar - truth)).collect();
        let sd = sample_variance(&raw).sqrt();
        if !(sd > 0.0) {
            return Err(Error::DegenerateSigma(m));
        }
        let mu = mean(&raw);
        let z: Vec<f64> = raw.iter().map(|v| (v - mu) / sd).collect();
        return Ok(NormalityReport::from_statistics(
            n,
            m,
            &z,
            "m = 1: cube-root limit, normality not expected",
        ));
    }
    let mut z = Vec::with_capacity(estimates.len());
    for pe in estimates {
        let sigma = pe.sigma_hat.ok_or(Error::SigmaUnavailable(pe.m))?;
        if !(sigma > 0.0) {
            return Err(Error::DegenerateSigma(pe.m));
        }
        z.push((pe.m as f64).sqrt() * pe.rate * (pe.theta_bar - truth) / sigma);
    }
    Ok(NormalityReport::from_statistics(n, m, &z, "studentized by per-replicate sigma_hat"))
}

pub fn run_normality_check(config: &ExperimentConfig, workers: usize) -> Result<NormalityReport> {
    config.validate()?;
    let n = *config.grid_n.first().ok_or_else(|| invalid("n", "empty grid"))?;
    let m = config.m_values(n)[0];
    let (truth, estimates) = pooled_replicates(config, workers, n, m, 0)?;
    normality_from(n, m, truth, &estimates)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub n: usize,
    pub m: usize,
    pub replicates: usize,
    pub nominal: f64,
    pub coverage: f64,
    /// Binomial standard error of `coverage`.
    pub se: f64,
    pub avg_width: f64,
}

impl CoverageReport {
    /// Coverage within `max(0.03, 4 se)` of nominal.
    pub fn checks(&self) -> Vec<Check> {
        let r = self.replicates as f64;
        let band = (4.0 * (self.nominal * (1.0 - self.nominal) / r).sqrt()).max(0.03);
        vec![Check::new(
            format!("coverage-n{}-m{}", self.n, self.m),
            (self.coverage - self.nominal).abs() <= band,
            format!("coverage {:.4}, nominal {:.2} +/- {:.4}", self.coverage, self.nominal, band),
        )]
    }
}

pub fn run_coverage(config: &ExperimentConfig, workers: usize) -> Result<CoverageReport> {
    config.validate()?;
    let n = *config.grid_n.first().ok_or_else(|| invalid("n", "empty grid"))?;
    let m = config.m_values(n)[0];
    if m < 2 {
        return Err(invalid("m", "coverage needs m >= 2"));
    }
    let (truth, estimates) = pooled_replicates(config, workers, n, m, 0)?;
    let mut hits = 0usize;
    let mut width = KahanSum::new();
    for pe in &estimates {
        let (lo, hi) = confidence_interval(pe, config.alpha)?;
        if lo <= truth && truth <= hi {
            hits += 1;
        }
        width.add(hi - lo);
    }
    let r = estimates.len() as f64;
    let coverage = hits as f64 / r;
    Ok(CoverageReport {
        n,
        m,
        replicates: estimates.len(),
        nominal: 1.0 - config.alpha,
        coverage,
        se: (coverage * (1.0 - coverage) / r).sqrt(),
        avg_width: width.total() / r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::ExperimentKind;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn synthetic_normal_statistics_pass_ks() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let z: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let rep = NormalityReport::from_statistics(10, 5, &z, "synthetic");
        assert!(rep.ks_distance < 1.36 / 2000f64.sqrt(), "{}", rep.ks_distance);
        assert!(rep.pass);
    }

    #[test]
    fn m1_reports_fail() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::Normality);
        c.grid_n = vec![50];
        c.grid_m = vec![1];
        c.replicates = 200;
        let rep = run_normality_check(&c, 1).unwrap();
        assert!(!rep.pass);
        assert_eq!(rep.m, 1);
    }

    #[test]
    fn coverage_at_half_alpha_is_near_half() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::Coverage);
        c.grid_n = vec![200];
        c.grid_m = vec![20];
        c.alpha = 0.5;
        c.replicates = 600;
        let rep = run_coverage(&c, 2).unwrap();
        // Studentized with 19 df the nominal level is slightly below 0.5.
        assert!((rep.coverage - 0.5).abs() < 0.08, "{}", rep.coverage);
    }

    #[test]
    fn width_shrinks_when_m_quadruples() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::Coverage);
        c.grid_n = vec![200];
        c.replicates = 300;
        c.grid_m = vec![4];
        let w4 = run_coverage(&c, 2).unwrap().avg_width;
        c.grid_m = vec![16];
        let w16 = run_coverage(&c, 2).unwrap().avg_width;
        // Halved by 1/sqrt(m); sigma_hat's small-m bias loosens the factor.
        let f = w4 / w16;
        assert!(f > 1.6 && f < 2.5, "{f}");
    }
}
