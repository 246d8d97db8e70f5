//! One experiment's results, uniformly tabulated and checked.

use isoconquer_core::experiments::{
    is_fixed_model, BiasScanReport, ChernoffReport, Check, CoverageReport, CurrentStatusReport,
    KdeSupeffReport, NormalityReport,
};
use isoconquer_core::{ExperimentConfig, RatioTable};
use serde::{Deserialize, Serialize};

use crate::pool::{FitReport, PoolReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "report", content = "data", rename_all = "kebab-case")]
pub enum Report {
    RatioTable(RatioTable),
    Normality(NormalityReport),
    Coverage(CoverageReport),
    BiasScan(BiasScanReport),
    KdeSupeff(KdeSupeffReport),
    CurrentStatus(CurrentStatusReport),
    Chernoff(ChernoffReport),
    Fit(FitReport),
    Pool(PoolReport),
}

/// A CSV-ready cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Num(f64),
    Text(String),
    Bool(bool),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

fn ratio_rows(t: &RatioTable) -> Table {
    Table {
        header: vec!["n", "m", "ratio", "mc_se"],
        rows: t
            .cells
            .iter()
            .map(|c| vec![c.n.into(), c.m.into(), c.ratio.into(), c.mc_se.into()])
            .collect(),
    }
}

fn normality_row(tag: &str, r: &NormalityReport) -> Vec<Cell> {
    vec![
        tag.into(),
        r.n.into(),
        r.m.into(),
        r.replicates.into(),
        r.ks_distance.into(),
        r.skewness.into(),
        r.kurtosis.into(),
        r.pass.into(),
    ]
}

const NORMALITY_HEADER: [&str; 8] =
    ["functional", "n", "m", "replicates", "ks_distance", "skewness", "kurtosis", "pass"];

impl Report {
    pub fn table(&self) -> Table {
        match self {
            Report::RatioTable(t) => ratio_rows(t),
            Report::CurrentStatus(r) => ratio_rows(&r.table),
            Report::Normality(r) => Table {
                header: NORMALITY_HEADER.to_vec(),
                rows: vec![normality_row("pooled", r)],
            },
            Report::Coverage(r) => Table {
                header: vec!["n", "m", "replicates", "nominal", "coverage", "se", "avg_width"],
                rows: vec![vec![
                    r.n.into(),
                    r.m.into(),
                    r.replicates.into(),
                    r.nominal.into(),
                    r.coverage.into(),
                    r.se.into(),
                    r.avg_width.into(),
                ]],
            },
            Report::BiasScan(r) => Table {
                header: vec!["n", "bias_hat", "se", "scaled", "within_bound"],
                rows: r
                    .rows
                    .iter()
                    .map(|b| {
                        vec![
                            b.n.into(),
                            b.bias_hat.into(),
                            b.se.into(),
                            b.scaled.into(),
                            b.within_bound.into(),
                        ]
                    })
                    .collect(),
            },
            Report::KdeSupeff(r) => Table {
                header: vec![
                    "n",
                    "m",
                    "ratio_fixed_policy",
                    "ratio_fixed_se",
                    "ratio_undersmoothed",
                    "ratio_undersmoothed_se",
                    "perturbed_fixed_scaled_bias",
                    "perturbed_fixed_scaled_bias_se",
                    "perturbed_risk_fixed",
                    "perturbed_risk_undersmoothed",
                    "perturbed_risk_global",
                ],
                rows: r
                    .cells
                    .iter()
                    .map(|c| {
                        vec![
                            c.n.into(),
                            c.m.into(),
                            c.ratio_fixed_policy.into(),
                            c.ratio_fixed_se.into(),
                            c.ratio_undersmoothed.into(),
                            c.ratio_undersmoothed_se.into(),
                            c.perturbed_fixed_scaled_bias.into(),
                            c.perturbed_fixed_scaled_bias_se.into(),
                            c.perturbed_risk_fixed.into(),
                            c.perturbed_risk_undersmoothed.into(),
                            c.perturbed_risk_global.into(),
                        ]
                    })
                    .collect(),
            },
            Report::Chernoff(r) => Table {
                header: vec!["statistic", "value"],
                rows: [
                    ("draws", r.draws as f64),
                    ("mean", r.mean),
                    ("mean_se", r.mean_se),
                    ("sd", r.sd),
                    ("sd_se", r.sd_se),
                    ("var_z", r.var_z),
                    ("skewness", r.skewness),
                    ("q025", r.q025),
                    ("q975", r.q975),
                    ("boundary_rate", r.boundary_rate),
                    ("sd_refined", r.sd_refined),
                ]
                .into_iter()
                .map(|(k, v)| vec![k.into(), v.into()])
                .collect(),
            },
            Report::Fit(r) => Table {
                header: vec!["breakpoint", "level"],
                rows: r
                    .breakpoints
                    .iter()
                    .zip(&r.levels)
                    .map(|(&b, &l)| vec![b.into(), l.into()])
                    .collect(),
            },
            Report::Pool(r) => Table {
                header: vec!["n", "m", "theta_bar", "sigma_hat", "ci_lower", "ci_upper", "method"],
                rows: r
                    .intervals
                    .iter()
                    .map(|ci| {
                        vec![
                            r.n.into(),
                            r.m.into(),
                            r.theta_bar.into(),
                            r.sigma_hat.map_or(Cell::Text(String::new()), Cell::Num),
                            ci.lower.into(),
                            ci.upper.into(),
                            ci.method.as_str().into(),
                        ]
                    })
                    .collect(),
            },
        }
    }

    /// The ratio table behind the heat grid, if the report has one.
    pub fn ratio_table(&self) -> Option<&RatioTable> {
        match self {
            Report::RatioTable(t) => Some(t),
            Report::CurrentStatus(r) => Some(&r.table),
            _ => None,
        }
    }

    pub fn checks(&self, config: &ExperimentConfig) -> Vec<Check> {
        match self {
            Report::RatioTable(t) => t.checks(is_fixed_model(config)),
            Report::Normality(r) => r.checks(),
            Report::Coverage(r) => r.checks(),
            Report::BiasScan(r) => r.checks(),
            Report::KdeSupeff(r) => r.checks(),
            Report::CurrentStatus(r) => r.checks(),
            Report::Chernoff(r) => r.checks(),
            Report::Fit(_) | Report::Pool(_) => Vec::new(),
        }
    }
}
