//! Sectioned TOML configuration.
//!
//! Every section is optional and unknown keys are rejected. A file is merged
//! onto the defaults of its experiment, then command-line overrides apply,
//! then the result is validated.

use std::path::Path;

use anyhow::{anyhow, bail, Context};
use isoconquer_core::experiments::{ChernoffSettings, FunctionalKind, ModelKind};
use isoconquer_core::kde::Kernel;
use isoconquer_core::{Error, ExperimentConfig, ExperimentKind, RateSchedule};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<ExperimentKind>,
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kde: Option<KdeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<BiasSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chernoff: Option<ChernoffSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: Option<Vec<usize>>,
    pub m: Option<Vec<usize>>,
    /// Total sample size `N`; when given, every `m` and `n * m` must fit in it.
    pub total: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub phi: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: Option<ModelKind>,
    pub noise_sd: Option<f64>,
    pub x0: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub functional: Option<FunctionalKind>,
    pub a: Option<f64>,
    pub t0: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KdeSection {
    pub kernel: Option<Kernel>,
    pub bump_amplitude: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasSection {
    pub n: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChernoffSection {
    pub horizon: Option<f64>,
    pub step: Option<f64>,
    pub draws: Option<usize>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).map_err(|e| anyhow!("invalid config: {e}"))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Later values win, section by section and key by key.
    pub fn merge(mut self, over: ConfigFile) -> Self {
        fn pick<T>(a: &mut Option<T>, b: Option<T>) {
            if b.is_some() {
                *a = b;
            }
        }
        pick(&mut self.experiment, over.experiment);
        pick(&mut self.seed, over.seed);
        pick(&mut self.replicates, over.replicates);
        if let Some(g) = over.grid {
            let s = self.grid.get_or_insert_with(Default::default);
            pick(&mut s.n, g.n);
            pick(&mut s.m, g.m);
            pick(&mut s.total, g.total);
        }
        if let Some(g) = over.schedule {
            let s = self.schedule.get_or_insert_with(Default::default);
            pick(&mut s.phi, g.phi);
            pick(&mut s.delta, g.delta);
        }
        if let Some(g) = over.model {
            let s = self.model.get_or_insert_with(Default::default);
            pick(&mut s.kind, g.kind);
            pick(&mut s.noise_sd, g.noise_sd);
            pick(&mut s.x0, g.x0);
        }
        if let Some(g) = over.target {
            let s = self.target.get_or_insert_with(Default::default);
            pick(&mut s.functional, g.functional);
            pick(&mut s.a, g.a);
            pick(&mut s.t0, g.t0);
            pick(&mut s.alpha, g.alpha);
        }
        if let Some(g) = over.kde {
            let s = self.kde.get_or_insert_with(Default::default);
            pick(&mut s.kernel, g.kernel);
            pick(&mut s.bump_amplitude, g.bump_amplitude);
        }
        if let Some(g) = over.bias {
            let s = self.bias.get_or_insert_with(Default::default);
            pick(&mut s.n, g.n);
        }
        if let Some(g) = over.chernoff {
            let s = self.chernoff.get_or_insert_with(Default::default);
            pick(&mut s.horizon, g.horizon);
            pick(&mut s.step, g.step);
            pick(&mut s.draws, g.draws);
        }
        self
    }

    /// Fill defaults for the experiment (or `fallback`) and validate.
    pub fn resolve(&self, fallback: ExperimentKind) -> anyhow::Result<ExperimentConfig> {
        let kind = self.experiment.unwrap_or(fallback);
        let mut c = ExperimentConfig::defaults(kind);
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.replicates {
            c.replicates = v;
        }
        let mut total = None;
        if let Some(g) = &self.grid {
            if let Some(v) = &g.n {
                c.grid_n = v.clone();
            }
            if let Some(v) = &g.m {
                c.grid_m = v.clone();
            }
            total = g.total;
        }
        if let Some(s) = &self.schedule {
            c.schedule = RateSchedule::new(
                s.phi.unwrap_or(c.schedule.phi),
                s.delta.unwrap_or(c.schedule.delta),
            )
            .map_err(|e| keyed("schedule", e))?;
        }
        if let Some(s) = &self.model {
            if let Some(v) = s.kind {
                c.model = v;
            }
            if let Some(v) = s.noise_sd {
                c.noise_sd = v;
            }
            if let Some(v) = s.x0 {
                c.x0 = v;
            }
        }
        if let Some(s) = &self.target {
            if let Some(v) = s.functional {
                c.functional = v;
            }
            if let Some(v) = s.a {
                c.a = v;
            }
            if let Some(v) = s.t0 {
                c.t0 = v;
            }
            if let Some(v) = s.alpha {
                c.alpha = v;
            }
        }
        if let Some(s) = &self.kde {
            if let Some(v) = s.kernel {
                c.kernel = v;
            }
            if let Some(v) = s.bump_amplitude {
                c.bump_amplitude = v;
            }
        }
        if let Some(s) = &self.bias {
            if let Some(v) = &s.n {
                c.bias_n = v.clone();
            }
        }
        if let Some(s) = &self.chernoff {
            let d = &c.chernoff;
            c.chernoff = ChernoffSettings {
                horizon: s.horizon.unwrap_or(d.horizon),
                step: s.step.unwrap_or(d.step),
                draws: s.draws.unwrap_or(d.draws),
            };
        }
        if let Some(total) = total {
            check_total(&c, total)?;
        }
        c.validate().map_err(|e| keyed(section_of(&e), e))?;
        Ok(c)
    }

    /// Every key written out, so the text alone reproduces the run.
    pub fn canonical(config: &ExperimentConfig) -> Self {
        ConfigFile {
            experiment: Some(config.kind),
            seed: Some(config.seed),
            replicates: Some(config.replicates),
            grid: Some(GridSection {
                n: Some(config.grid_n.clone()),
                m: Some(config.grid_m.clone()),
                total: None,
            }),
            schedule: Some(ScheduleSection {
                phi: Some(config.schedule.phi),
                delta: Some(config.schedule.delta),
            }),
            model: Some(ModelSection {
                kind: Some(config.model),
                noise_sd: Some(config.noise_sd),
                x0: Some(config.x0),
            }),
            target: Some(TargetSection {
                functional: Some(config.functional),
                a: Some(config.a),
                t0: Some(config.t0),
                alpha: Some(config.alpha),
            }),
            kde: Some(KdeSection {
                kernel: Some(config.kernel),
                bump_amplitude: Some(config.bump_amplitude),
            }),
            bias: Some(BiasSection {
                n: Some(config.bias_n.clone()),
            }),
            chernoff: Some(ChernoffSection {
                horizon: Some(config.chernoff.horizon),
                step: Some(config.chernoff.step),
                draws: Some(config.chernoff.draws),
            }),
        }
    }
}

/// Canonical TOML text of a resolved configuration.
pub fn canonical_text(config: &ExperimentConfig) -> String {
    toml::to_string(&ConfigFile::canonical(config)).expect("config serializes")
}

fn check_total(c: &ExperimentConfig, total: usize) -> anyhow::Result<()> {
    for &n in &c.grid_n {
        for m in c.m_values(n) {
            if m > total {
                bail!("grid.m: m = {m} exceeds the total sample size N = {total} (need m <= N)");
            }
            if n.saturating_mul(m) > total {
                bail!("grid: n * m = {n} * {m} exceeds the total sample size N = {total}");
            }
        }
    }
    Ok(())
}

fn section_of(e: &Error) -> &'static str {
    match e {
        Error::InvalidParameter { name, .. } => match *name {
            "n" | "m" | "grid" => "grid",
            "noise_sd" | "x0" => "model",
            "a" | "t0" | "alpha" => "target",
            "bias_n" => "bias",
            "horizon" | "step" => "chernoff",
            "replicates" => "replicates",
            _ => "config",
        },
        _ => "config",
    }
}

fn keyed(section: &str, e: Error) -> anyhow::Error {
    anyhow!("{section}: {e}")
}
