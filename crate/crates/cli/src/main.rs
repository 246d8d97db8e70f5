use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use isoconquer_cli::config::{
    BiasSection, ChernoffSection, ConfigFile, GridSection, KdeSection, ModelSection,
    ScheduleSection, TargetSection,
};
use isoconquer_cli::emit::Format;
use isoconquer_cli::pool::{self, PoolRequest};
use isoconquer_cli::run::{cache_dir, run_experiment, write_outputs};
use isoconquer_cli::{canonical_text, from_json, Report, RunManifest};
use isoconquer_core::experiments::{FunctionalKind, ModelKind};
use isoconquer_core::isotonic::Direction;
use isoconquer_core::kde::Kernel;
use isoconquer_core::{ExperimentKind, Functional};

#[derive(Parser)]
#[command(name = "isoconquer", version, about = "Pooled isotonic estimation: fits, pooling and Monte Carlo experiments")]
struct Cli {
    /// TOML config, or a JSON result/manifest from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Parallel width inside experiments; results do not depend on it.
    #[arg(long, global = true, default_value_t = default_workers())]
    workers: usize,
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Output format; repeat for several.
    #[arg(long, global = true, value_enum)]
    format: Vec<Format>,
    #[command(flatten)]
    keys: KeyOverrides,
    #[command(subcommand)]
    command: Command,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// One flag per config key.
#[derive(Args, Default)]
struct KeyOverrides {
    #[arg(long, global = true)]
    replicates: Option<usize>,
    #[arg(long, global = true, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long, global = true, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    #[arg(long, global = true)]
    total: Option<usize>,
    #[arg(long, global = true)]
    phi: Option<f64>,
    #[arg(long, global = true)]
    delta: Option<f64>,
    #[arg(long, global = true, value_parser = parse_model)]
    model: Option<ModelKind>,
    #[arg(long, global = true, alias = "noise_sd")]
    noise_sd: Option<f64>,
    #[arg(long, global = true)]
    x0: Option<f64>,
    #[arg(long, global = true, value_parser = parse_functional)]
    functional: Option<FunctionalKind>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    a: Option<f64>,
    #[arg(long, global = true)]
    t0: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true, value_parser = parse_kernel)]
    kernel: Option<Kernel>,
    #[arg(long, global = true, alias = "bump_amplitude")]
    bump_amplitude: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',', alias = "bias_n")]
    bias_n: Option<Vec<usize>>,
    #[arg(long, global = true)]
    horizon: Option<f64>,
    #[arg(long, global = true)]
    step: Option<f64>,
    #[arg(long, global = true)]
    draws: Option<usize>,
}

fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    parse_enum(s)
}

fn parse_functional(s: &str) -> Result<FunctionalKind, String> {
    parse_enum(s)
}

fn parse_kernel(s: &str) -> Result<Kernel, String> {
    parse_enum(s)
}

#[derive(Clone, Copy, ValueEnum)]
enum Panel {
    Left,
    Right,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dir {
    Increasing,
    Decreasing,
}

impl From<Dir> for Direction {
    fn from(d: Dir) -> Self {
        match d {
            Dir::Increasing => Direction::Nondecreasing,
            Dir::Decreasing => Direction::Nonincreasing,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Isotonic fit of two-column CSV data (x in [0, 1], y).
    Fit {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "increasing")]
        direction: Dir,
    },
    /// Split data into m blocks, pool a functional and report intervals.
    Pool {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "increasing")]
        direction: Dir,
        /// Split in index order instead of at random.
        #[arg(long)]
        no_shuffle: bool,
        /// Add the interval calibrated by this many Chernoff draws.
        #[arg(long)]
        exact: Option<usize>,
        /// sigma for the calibrated interval when m = 1.
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Simulate Chernoff's distribution and check the sampler.
    Chernoff,
    /// Ratio of global to pooled MSE over the (n, m) grid.
    Table1 {
        #[arg(long, value_enum)]
        panel: Option<Panel>,
    },
    /// Empirical coverage of the pooled normal interval.
    Coverage,
    /// KS distance of the standardized pooled statistic to N(0, 1).
    Normality,
    /// Bias of the pooled estimator across n.
    BiasScan,
    /// Pooled kernel density estimates: variance ratio and bias.
    KdeSupeff,
    /// Pooled current-status estimates.
    CurrentStatus,
}

impl KeyOverrides {
    fn as_config(&self, seed: Option<u64>) -> ConfigFile {
        fn some<T>(present: bool, v: T) -> Option<T> {
            present.then_some(v)
        }
        let k = self;
        ConfigFile {
            experiment: None,
            seed,
            replicates: k.replicates,
            grid: some(
                k.n.is_some() || k.m.is_some() || k.total.is_some(),
                GridSection {
                    n: k.n.clone(),
                    m: k.m.clone(),
                    total: k.total,
                },
            ),
            schedule: some(
                k.phi.is_some() || k.delta.is_some(),
                ScheduleSection {
                    phi: k.phi,
                    delta: k.delta,
                },
            ),
            model: some(
                k.model.is_some() || k.noise_sd.is_some() || k.x0.is_some(),
                ModelSection {
                    kind: k.model,
                    noise_sd: k.noise_sd,
                    x0: k.x0,
                },
            ),
            target: some(
                k.functional.is_some() || k.a.is_some() || k.t0.is_some() || k.alpha.is_some(),
                TargetSection {
                    functional: k.functional,
                    a: k.a,
                    t0: k.t0,
                    alpha: k.alpha,
                },
            ),
            kde: some(
                k.kernel.is_some() || k.bump_amplitude.is_some(),
                KdeSection {
                    kernel: k.kernel,
                    bump_amplitude: k.bump_amplitude,
                },
            ),
            bias: some(k.bias_n.is_some(), BiasSection { n: k.bias_n.clone() }),
            chernoff: some(
                k.horizon.is_some() || k.step.is_some() || k.draws.is_some(),
                ChernoffSection {
                    horizon: k.horizon,
                    step: k.step,
                    draws: k.draws,
                },
            ),
        }
    }
}

fn load_config(path: &Path) -> anyhow::Result<ConfigFile> {
    if path.extension().is_some_and(|e| e == "json") {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        let config = match from_json(&text) {
            Ok(out) => out.manifest.config,
            Err(_) => serde_json::from_str::<RunManifest>(&text)
                .with_context(|| format!("{} is neither a result nor a manifest", path.display()))?
                .config,
        };
        return ConfigFile::parse(&config);
    }
    ConfigFile::load(path)
}

fn experiment_kind(cmd: &Command, file: &ConfigFile) -> anyhow::Result<ExperimentKind> {
    let from_cmd = match cmd {
        Command::Table1 { panel: Some(Panel::Left) } => ExperimentKind::Table1Left,
        Command::Table1 { panel: Some(Panel::Right) } => ExperimentKind::Table1Right,
        Command::Table1 { panel: None } => match file.experiment {
            Some(k @ (ExperimentKind::Table1Left | ExperimentKind::Table1Right)) => k,
            _ => ExperimentKind::Table1Left,
        },
        Command::Chernoff => ExperimentKind::Chernoff,
        Command::Coverage => ExperimentKind::Coverage,
        Command::Normality => ExperimentKind::Normality,
        Command::BiasScan => ExperimentKind::BiasScan,
        Command::KdeSupeff => ExperimentKind::KdeSupeff,
        Command::CurrentStatus => ExperimentKind::CurrentStatus,
        Command::Fit { .. } | Command::Pool { .. } => unreachable!("not an experiment"),
    };
    if let Some(k) = file.experiment {
        if k != from_cmd {
            bail!("config is for experiment {} but the command runs {}", k.name(), from_cmd.name());
        }
    }
    Ok(from_cmd)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(false)` when a blocking check failed.
fn real_main(cli: Cli) -> anyhow::Result<bool> {
    let mut formats: BTreeSet<Format> = cli.format.iter().copied().collect();
    if formats.is_empty() {
        formats.insert(Format::Csv);
    }
    let file = match &cli.config {
        Some(p) => load_config(p)?,
        None => ConfigFile::default(),
    };
    let file = file.merge(cli.keys.as_config(cli.seed));
    let (manifest, report, checks) = match &cli.command {
        Command::Fit { input, direction } => {
            let (xs, ys) = pool::read_xy(input)?;
            let text = data_config("fit", input, &[("direction", format!("{:?}", Direction::from(*direction)))])?;
            let report = Report::Fit(pool::fit(xs, ys, (*direction).into())?);
            (RunManifest::new("fit", text, 0, cli.workers), report, Vec::new())
        }
        Command::Pool { input, direction, no_shuffle, exact, sigma } => {
            let (xs, ys) = pool::read_xy(input)?;
            let base = file.resolve(ExperimentKind::Coverage)?;
            let m = *base.grid_m.first().context("pool needs --m")?;
            let functional = base.functional();
            let cache = cache_dir();
            let req = PoolRequest {
                functional,
                direction: (*direction).into(),
                m,
                alpha: base.alpha,
                shuffle: !no_shuffle,
                seed: base.seed,
                exact_draws: *exact,
                cache: cache.as_deref(),
                sigma: *sigma,
            };
            let text = data_config(
                "pool",
                input,
                &[
                    ("functional", format!("{functional:?}")),
                    ("direction", format!("{:?}", req.direction)),
                    ("m", m.to_string()),
                    ("alpha", base.alpha.to_string()),
                    ("shuffle", req.shuffle.to_string()),
                    ("seed", base.seed.to_string()),
                    ("exact", format!("{exact:?}")),
                    ("sigma", format!("{sigma:?}")),
                ],
            )?;
            if matches!(functional, Functional::CdfAt(_) | Functional::QuantileAt(_))
                && ys.iter().any(|&y| y != 0.0 && y != 1.0)
            {
                bail!("current-status functionals need 0/1 responses");
            }
            let report = Report::Pool(pool::pool(xs, ys, &req)?);
            (RunManifest::new("pool", text, base.seed, cli.workers), report, Vec::new())
        }
        cmd => {
            let kind = experiment_kind(cmd, &file)?;
            let config = file.resolve(kind)?;
            let manifest = RunManifest::new(kind.name(), canonical_text(&config), config.seed, cli.workers);
            let report = run_experiment(&config, cli.workers)?;
            let checks = report.checks(&config);
            (manifest, report, checks)
        }
    };
    print!("{}", isoconquer_cli::to_csv(&report.table()));
    for c in &checks {
        let tag = match (c.passed, c.advisory) {
            (true, _) => "PASS",
            (false, true) => "WARN",
            (false, false) => "FAIL",
        };
        eprintln!("{tag} {}: {}", c.name, c.detail);
    }
    let written = write_outputs(&cli.out, &formats, manifest, report, checks)?;
    for f in &written.files {
        eprintln!("wrote {}", f.display());
    }
    Ok(written.failures.is_empty())
}

/// Canonical text for data-driven commands: their arguments plus a digest of the input.
fn data_config(command: &str, input: &Path, args: &[(&str, String)]) -> anyhow::Result<String> {
    let bytes = std::fs::read(input).with_context(|| format!("cannot read {}", input.display()))?;
    let mut text = format!("command = {command:?}\ninput_sha256 = {:?}\n", isoconquer_cli::manifest::config_hash_bytes(&bytes));
    for (k, v) in args {
        text.push_str(&format!("{k} = {v:?}\n"));
    }
    Ok(text)
}
