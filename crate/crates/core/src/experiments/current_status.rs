//! Pooled current-status NPMLE: MSE ratios and normality of the pooled cdf and quantile estimators.

use serde::{Deserialize, Serialize};

use super::inference::{normality_from, pooled_replicates};
use super::{run_ratio_table, Check, ExperimentConfig, FunctionalKind, NormalityReport, RatioTable};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrentStatusReport {
    pub table: RatioTable,
    /// Pooled `F_hat(t0)` at the scheduled `m`.
    pub cdf_normality: NormalityReport,
    /// Pooled `F_hat^{-1}(a)` at the scheduled `m`.
    pub quantile_normality: NormalityReport,
}

impl CurrentStatusReport {
    pub fn checks(&self) -> Vec<Check> {
        let mut out = self.table.checks(false);
        for c in &self.table.cells {
            if c.m > 1 {
                let target = (c.m as f64).cbrt();
                out.push(Check::new(
                    format!("cs-ratio-n{}-m{}", c.n, c.m),
                    (c.ratio / target - 1.0).abs() <= 0.35,
                    format!("{:.3} vs m^(1/3) = {:.3}", c.ratio, target),
                ));
            }
        }
        for (tag, rep) in [("cdf", &self.cdf_normality), ("quantile", &self.quantile_normality)] {
            out.extend(rep.checks().into_iter().map(|mut c| {
                c.name = format!("cs-{tag}-{}", c.name);
                c
            }));
        }
        out
    }
}

pub fn run_current_status(config: &ExperimentConfig, workers: usize) -> Result<CurrentStatusReport> {
    if !(config.a > 0.0 && config.a < 1.0) {
        return Err(invalid("a", format!("{} not in (0, 1)", config.a)));
    }
    let mut table_cfg = config.clone();
    if !matches!(table_cfg.functional, FunctionalKind::CdfAt | FunctionalKind::QuantileAt) {
        table_cfg.functional = FunctionalKind::QuantileAt;
    }
    let table = run_ratio_table(&table_cfg, workers)?;
    let n = *config.grid_n.first().ok_or_else(|| invalid("n", "empty grid"))?;
    let mut norm_cfg = table_cfg.clone();
    norm_cfg.grid_m = Vec::new();
    let m = norm_cfg.m_values(n)[0];
    let mut reports = Vec::with_capacity(2);
    for (i, kind) in [FunctionalKind::CdfAt, FunctionalKind::QuantileAt].into_iter().enumerate() {
        norm_cfg.functional = kind;
        let (truth, est) = pooled_replicates(&norm_cfg, workers, n, m, NORMALITY_CELLS + i as u64)?;
        reports.push(normality_from(n, m, truth, &est)?);
    }
    let quantile_normality = reports.pop().expect("two reports");
    let cdf_normality = reports.pop().expect("two reports");
    Ok(CurrentStatusReport {
        table,
        cdf_normality,
        quantile_normality,
    })
}

/// Cell ids for the normality runs, clear of the table's grid cells.
const NORMALITY_CELLS: u64 = 1 << 32;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::ExperimentKind;

    #[test]
    fn small_run_is_consistent() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::CurrentStatus);
        c.grid_n = vec![64];
        c.grid_m = vec![1, 4];
        c.replicates = 60;
        let rep = run_current_status(&c, 2).unwrap();
        assert_eq!(rep.table.cell(64, 1).unwrap().ratio, 1.0);
        assert_eq!(rep.quantile_normality.m, 4);
        assert_eq!(rep.cdf_normality.replicates, 60);
    }

    #[test]
    fn rejects_level_outside_unit_interval() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::CurrentStatus);
        c.a = 1.0;
        assert!(run_current_status(&c, 1).is_err());
    }
}
