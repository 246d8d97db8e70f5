use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn isoconquer(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isoconquer"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn find(dir: &Path, suffix: &str) -> Option<PathBuf> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.to_string_lossy().ends_with(suffix))
}

const SMALL_TABLE: &[&str] = &["table1", "--n", "50", "--m", "1,5", "--replicates", "30", "--seed", "7"];

#[test]
fn outputs_carry_hash_and_seed_and_rerun_from_manifest() {
    let first = tempfile::tempdir().unwrap();
    let out = isoconquer(first.path(), &[SMALL_TABLE, &["--format", "csv", "--format", "json"]].concat());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = find(first.path(), ".csv").unwrap();
    let name = csv.file_name().unwrap().to_string_lossy().into_owned();
    assert!(name.starts_with("table1-left-") && name.ends_with("-seed7.csv"), "{name}");
    assert_eq!(String::from_utf8(out.stdout).unwrap(), std::fs::read_to_string(&csv).unwrap());

    for source in [".manifest.json", ".json", ".config.toml"] {
        let second = tempfile::tempdir().unwrap();
        let config = find(first.path(), source).unwrap();
        let again = isoconquer(second.path(), &["table1", "--config", config.to_str().unwrap()]);
        assert_eq!(again.status.code(), Some(0));
        let csv2 = find(second.path(), ".csv").unwrap();
        assert_eq!(csv2.file_name(), csv.file_name());
        assert_eq!(std::fs::read(&csv2).unwrap(), std::fs::read(&csv).unwrap(), "from {source}");
    }
}

#[test]
fn blocking_failure_exits_one_with_failure_list() {
    let dir = tempfile::tempdir().unwrap();
    // m = 1 cannot pass the normality gate.
    let out = isoconquer(dir.path(), &["normality", "--n", "200", "--m", "1", "--replicates", "20"]);
    assert_eq!(out.status.code(), Some(1));
    let failures = find(dir.path(), ".failures.json").expect("failure list written");
    let parsed: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(failures).unwrap()).unwrap();
    assert_eq!(parsed["command"], "normality");
    assert!(!parsed["failures"].as_array().unwrap().is_empty());
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = isoconquer(dir.path(), &["table1", "--n", "10", "--m", "50", "--total", "20"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("m <= N"));

    let config = dir.path().join("c.toml");
    std::fs::write(&config, "experiment = \"coverage\"\nbogus = 1\n").unwrap();
    let out = isoconquer(dir.path(), &["coverage", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(&config, "experiment = \"coverage\"\n").unwrap();
    let out = isoconquer(dir.path(), &["bias-scan", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("coverage"));
}

#[test]
fn fit_and_pool_read_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("xy.csv");
    let rows: String = (1..=400)
        .map(|i| {
            let x = i as f64 / 400.0;
            format!("{x},{}\n", x + if i % 2 == 0 { 0.05 } else { -0.05 })
        })
        .collect();
    std::fs::write(&data, format!("x,y\n{rows}")).unwrap();

    let out = isoconquer(dir.path(), &["fit", data.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("breakpoint,level\n"));

    let out = isoconquer(dir.path(), &["pool", data.to_str().unwrap(), "--m", "4", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json = find(dir.path(), ".json").filter(|p| !p.to_string_lossy().ends_with("manifest.json"));
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(json.unwrap()).unwrap()).unwrap();
    let theta = parsed["results"]["data"]["theta_bar"].as_f64().unwrap();
    assert!((theta - 0.5).abs() < 0.05, "{theta}");
}

#[test]
fn svg_only_for_ratio_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = isoconquer(dir.path(), &[SMALL_TABLE, &["--format", "svg"]].concat());
    assert_eq!(out.status.code(), Some(0));
    let svg = std::fs::read_to_string(find(dir.path(), ".svg").unwrap()).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));

    let out = isoconquer(dir.path(), &["chernoff", "--draws", "500", "--format", "svg"]);
    assert_eq!(out.status.code(), Some(2));
}
