//! Experiment dispatch and output files.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use isoconquer_core::experiments::{
    run_bias_scan, run_chernoff, run_coverage, run_current_status, run_kde_supeff,
    run_normality_check, run_ratio_table, Check,
};
use isoconquer_core::{ExperimentConfig, ExperimentKind};
use serde::{Deserialize, Serialize};

use crate::emit::{to_csv, to_json, to_svg, Format, RunOutput};
use crate::manifest::{now, RunManifest};
use crate::report::Report;

/// Environment variable naming the Chernoff draw cache directory.
pub const CACHE_ENV: &str = "ISOCONQUER_CACHE";

pub fn cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

pub fn run_experiment(config: &ExperimentConfig, workers: usize) -> anyhow::Result<Report> {
    let r = match config.kind {
        ExperimentKind::Table1Left | ExperimentKind::Table1Right => {
            Report::RatioTable(run_ratio_table(config, workers)?)
        }
        ExperimentKind::Normality => Report::Normality(run_normality_check(config, workers)?),
        ExperimentKind::Coverage => Report::Coverage(run_coverage(config, workers)?),
        ExperimentKind::BiasScan => Report::BiasScan(run_bias_scan(config, workers)?),
        ExperimentKind::KdeSupeff => Report::KdeSupeff(run_kde_supeff(config, workers)?),
        ExperimentKind::CurrentStatus => {
            Report::CurrentStatus(run_current_status(config, workers)?)
        }
        ExperimentKind::Chernoff => {
            Report::Chernoff(run_chernoff(config, workers, cache_dir().as_deref())?)
        }
    };
    Ok(r)
}

/// Everything written by one run.
#[derive(Debug, Clone)]
pub struct Written {
    pub files: Vec<PathBuf>,
    pub failures: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureList {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub failures: Vec<Check>,
}

/// Write the requested formats plus the canonical config and the manifest.
/// Blocking check failures are additionally written to `<stem>.failures.json`.
pub fn write_outputs(
    out_dir: &Path,
    formats: &BTreeSet<Format>,
    mut manifest: RunManifest,
    report: Report,
    checks: Vec<Check>,
) -> anyhow::Result<Written> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    let stem = manifest.stem();
    let failures: Vec<Check> = checks.iter().filter(|c| c.blocking_failure()).cloned().collect();
    let mut names: Vec<String> = vec![format!("{stem}.config.toml"), format!("{stem}.manifest.json")];
    for f in formats {
        if *f == Format::Svg && report.ratio_table().is_none() {
            bail!("svg output needs a ratio table; {} has none", manifest.command);
        }
        names.push(format!("{stem}.{}", f.extension()));
    }
    if !failures.is_empty() {
        names.push(format!("{stem}.failures.json"));
    }
    manifest.outputs = names.clone();
    manifest.finished_at = now();
    let output = RunOutput {
        manifest: manifest.clone(),
        checks,
        results: report,
    };
    let mut files = Vec::new();
    let mut put = |name: &str, body: &str| -> anyhow::Result<()> {
        let path = out_dir.join(name);
        std::fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
        files.push(path);
        Ok(())
    };
    put(&names[0], &manifest.config)?;
    put(&names[1], &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    for f in formats {
        let name = format!("{stem}.{}", f.extension());
        let body = match f {
            Format::Csv => to_csv(&output.results.table()),
            Format::Json => to_json(&output),
            Format::Svg => to_svg(
                output.results.ratio_table().expect("checked above"),
                &format!("{} (seed {})", manifest.command, manifest.seed),
            ),
        };
        put(&name, &body)?;
    }
    if !failures.is_empty() {
        let list = FailureList {
            command: manifest.command.clone(),
            config_hash: manifest.config_hash.clone(),
            seed: manifest.seed,
            failures: failures.clone(),
        };
        put(&format!("{stem}.failures.json"), &(serde_json::to_string_pretty(&list)? + "\n"))?;
    }
    Ok(Written { files, failures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::canonical_text;
    use crate::emit::from_json;

    fn small_table_config() -> ExperimentConfig {
        let mut c = ExperimentConfig::defaults(ExperimentKind::Table1Left);
        c.grid_n = vec![30];
        c.grid_m = vec![1, 2];
        c.replicates = 20;
        c
    }

    #[test]
    fn json_round_trips_field_for_field() {
        let c = small_table_config();
        let report = run_experiment(&c, 1).unwrap();
        let checks = report.checks(&c);
        let dir = tempfile::tempdir().unwrap();
        let formats: BTreeSet<Format> = [Format::Csv, Format::Json, Format::Svg].into();
        let manifest = RunManifest::new(c.kind.name(), canonical_text(&c), c.seed, 1);
        let w = write_outputs(dir.path(), &formats, manifest, report.clone(), checks).unwrap();
        assert!(w.failures.is_empty());
        let json = w.files.iter().find(|p| p.extension().unwrap() == "json"
            && !p.to_string_lossy().ends_with("manifest.json")).unwrap();
        let back = from_json(&std::fs::read_to_string(json).unwrap()).unwrap();
        assert_eq!(back.results, report);
        assert_eq!(back.manifest.outputs.len(), 5);
        for f in &w.files {
            assert!(f.file_name().unwrap().to_string_lossy().contains("-seed1"));
        }
    }

    #[test]
    fn failing_checks_are_listed() {
        let c = small_table_config();
        let report = run_experiment(&c, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let bad = vec![Check::new("forced", false, "x"), Check::new("soft", false, "y").advisory()];
        let manifest = RunManifest::new("t", canonical_text(&c), 1, 1);
        let w = write_outputs(dir.path(), &[Format::Csv].into(), manifest, report, bad).unwrap();
        assert_eq!(w.failures.len(), 1);
        let f = w.files.iter().find(|p| p.to_string_lossy().ends_with("failures.json")).unwrap();
        let list: FailureList = serde_json::from_str(&std::fs::read_to_string(f).unwrap()).unwrap();
        assert_eq!(list.failures[0].name, "forced");
    }

    #[test]
    fn svg_needs_a_table() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::Chernoff);
        c.chernoff.draws = 100;
        let report = run_experiment(&c, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = RunManifest::new("chernoff", canonical_text(&c), 1, 1);
        assert!(write_outputs(dir.path(), &[Format::Svg].into(), manifest, report, vec![]).is_err());
    }
}
