//! MSE ratio of the global estimator to the pooled estimator over an `(n, m)` grid.

use serde::{Deserialize, Serialize};

use super::{replicate_map, Check, ExperimentConfig, ExperimentKind, ModelKind};
use crate::error::Result;
use crate::pooling::{pooled_point_estimate, split};
use crate::stats::{jackknife, KahanSum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioCell {
    pub n: usize,
    pub m: usize,
    /// `MSE(global) / MSE(pooled)`.
    pub ratio: f64,
    /// Jackknife standard error of `ratio` over replicates.
    pub mc_se: f64,
    pub mse_global: f64,
    pub mse_pooled: f64,
    /// Replicates in which some estimate came from the inverse's extreme convention.
    pub flagged_replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioTable {
    pub n_values: Vec<usize>,
    pub m_values: Vec<usize>,
    /// Row-major: all `m` for the first `n`, then the next `n`, ...
    pub cells: Vec<RatioCell>,
}

impl RatioTable {
    pub fn cell(&self, n: usize, m: usize) -> Option<&RatioCell> {
        self.cells.iter().find(|c| c.n == n && c.m == m)
    }

    pub fn row(&self, n: usize) -> impl Iterator<Item = &RatioCell> {
        self.cells.iter().filter(move |c| c.n == n)
    }

    /// Structural checks, plus the advisory trend check for the fixed model.
    pub fn checks(&self, fixed_model: bool) -> Vec<Check> {
        let mut out = Vec::new();
        let bad: Vec<String> = self
            .cells
            .iter()
            .filter(|c| !(c.ratio > 0.0 && c.ratio.is_finite() && c.mc_se >= 0.0))
            .map(|c| format!("({}, {})", c.n, c.m))
            .collect();
        out.push(Check::new(
            "ratio-positive",
            bad.is_empty(),
            if bad.is_empty() {
                "every cell has a positive finite ratio".to_string()
            } else {
                format!("bad cells: {}", bad.join(" "))
            },
        ));
        out.push(Check::new(
            "dimensions",
            self.cells.len() == self.n_values.len() * self.m_values.len(),
            format!(
                "{} cells for {} x {} grid",
                self.cells.len(),
                self.n_values.len(),
                self.m_values.len()
            ),
        ));
        let identity: Vec<&RatioCell> = self.cells.iter().filter(|c| c.m == 1).collect();
        if !identity.is_empty() {
            let ok = identity.iter().all(|c| c.ratio == 1.0);
            out.push(Check::new(
                "m1-identity",
                ok,
                "cells with m = 1 must have ratio exactly 1",
            ));
        }
        if fixed_model {
            let mut drops = Vec::new();
            for &n in &self.n_values {
                let row: Vec<&RatioCell> = self.row(n).collect();
                for w in row.windows(2) {
                    let tol = 2.0 * (w[0].mc_se.powi(2) + w[1].mc_se.powi(2)).sqrt();
                    if w[1].m > w[0].m && w[1].ratio < w[0].ratio - tol {
                        drops.push(format!("n={} m={}->{}", n, w[0].m, w[1].m));
                    }
                }
            }
            out.push(
                Check::new(
                    "monotone-trend",
                    drops.is_empty(),
                    if drops.is_empty() {
                        "ratios nondecreasing in m within 2 MC standard errors".to_string()
                    } else {
                        format!("drops beyond 2 SE: {}", drops.join(", "))
                    },
                )
                .advisory(),
            );
        }
        out
    }
}

struct PairedErrors {
    global: f64,
    pooled: f64,
    flagged: bool,
}

/// Global versus pooled squared errors over `config.replicates` paired replicates per cell.
pub fn run_ratio_table(config: &ExperimentConfig, workers: usize) -> Result<RatioTable> {
    config.validate()?;
    let scenario = config.scenario()?;
    let functional = config.functional();
    let direction = scenario.direction();
    let base = config.stream();
    let mut cells = Vec::new();
    let mut m_values: Vec<usize> = Vec::new();
    for (row, &n) in config.grid_n.iter().enumerate() {
        let ms = config.m_values(n);
        if row == 0 {
            m_values = ms.clone();
        }
        let truth = scenario.truth(functional, n)?;
        for (col, &m) in ms.iter().enumerate() {
            let cell_key = base.with_cell((row * ms.len() + col) as u64);
            let errors = replicate_map(workers, config.replicates, |r| {
                let key = cell_key.with_replicate(r);
                let total = n * m;
                let global = scenario.draw(n, total, &key.with_subsample(0))?;
                let g = functional.evaluate(&global, direction)?;
                let (_, idx) = split(global.len(), m, true, &key.with_subsample(1))?;
                let blocks = idx
                    .iter()
                    .map(|b| global.subset(b))
                    .collect::<Result<Vec<_>>>()?;
                let pe = pooled_point_estimate(&blocks, functional, direction)?;
                Ok(PairedErrors {
                    global: (g.value - truth).powi(2),
                    pooled: (pe.theta_bar - truth).powi(2),
                    flagged: g.at_convention || !pe.flagged.is_empty(),
                })
            })?;
            cells.push(summarize(n, m, &errors));
        }
    }
    Ok(RatioTable {
        n_values: config.grid_n.clone(),
        m_values,
        cells,
    })
}

/// `G / P`, defined as exactly 1 when the sums coincide (pooled is global).
pub(crate) fn sum_ratio(g: f64, p: f64) -> f64 {
    if g == p {
        1.0
    } else {
        g / p
    }
}

fn summarize(n: usize, m: usize, errors: &[PairedErrors]) -> RatioCell {
    let rows: Vec<[f64; 2]> = errors.iter().map(|e| [e.global, e.pooled]).collect();
    let (ratio, mc_se) = jackknife(&rows, |t, _| sum_ratio(t[0], t[1]));
    let r = errors.len() as f64;
    RatioCell {
        n,
        m,
        ratio,
        mc_se,
        mse_global: rows.iter().map(|x| x[0]).collect::<KahanSum>().total() / r,
        mse_pooled: rows.iter().map(|x| x[1]).collect::<KahanSum>().total() / r,
        flagged_replicates: errors.iter().filter(|e| e.flagged).count(),
    }
}

/// Whether the table's trend check applies (fixed regression model).
pub fn is_fixed_model(config: &ExperimentConfig) -> bool {
    config.model == ModelKind::FixedLinear
        && matches!(
            config.kind,
            ExperimentKind::Table1Left | ExperimentKind::Table1Right
        )
}
