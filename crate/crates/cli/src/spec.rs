//! Experiment specifications: the JSON config file, flag overrides and the
//! resolved form echoed into every manifest.

use std::path::{Path, PathBuf};

use rgg_torus::calibration::Method;
use rgg_torus::spectral::Regime;
use rgg_torus::trace_core::GraphModel;
use rgg_torus::{Error, ModelConfig, Norm, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Calibrate,
    Sample,
    TriangleTest,
    SweepPower,
    Spectrum,
    ArcVectors,
    CoreContract,
    TraceMoment,
    Moments,
    TvBound,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Calibrate => "calibrate",
            Command::Sample => "sample",
            Command::TriangleTest => "triangle-test",
            Command::SweepPower => "sweep-power",
            Command::Spectrum => "spectrum",
            Command::ArcVectors => "arc-vectors",
            Command::CoreContract => "core-contract",
            Command::TraceMoment => "trace-moment",
            Command::Moments => "moments",
            Command::TvBound => "tv-bound",
        }
    }
}

/// Command-specific parameters. Unused fields are ignored by commands that
/// do not need them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_values: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<Regime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arc_halfwidth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub walk: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_values: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_trials: Option<usize>,
}

impl Params {
    /// Fields set in `o` win.
    pub fn overlay(self, o: Params) -> Params {
        macro_rules! pick {
            ($($f:ident),*) => { Params { $($f: o.$f.or(self.$f)),* } };
        }
        pick!(method, budget, validation_budget, graph, trials, d_values, a, regime, arc_halfwidth, input, walk, m_values, k, zeta, k_max, inner_budget, mc_trials)
    }
}

/// Model fields as they may appear in a config file or on the command line.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialModel {
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub norm: Option<Norm>,
    #[serde(default)]
    pub master_seed: Option<u64>,
}

impl PartialModel {
    pub fn overlay(self, o: PartialModel) -> PartialModel {
        PartialModel {
            n: o.n.or(self.n),
            d: o.d.or(self.d),
            p: o.p.or(self.p),
            norm: o.norm.or(self.norm),
            master_seed: o.master_seed.or(self.master_seed),
        }
    }
}

pub const DEFAULT_N: usize = 100;
pub const DEFAULT_D: usize = 64;
pub const DEFAULT_P: f64 = 0.5;

/// A config file. Every field is optional; a resolved spec is also a valid file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub model: PartialModel,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl SpecFile {
    pub fn load(path: &Path) -> Result<SpecFile> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::invalid(format!("bad config {}: {e}", path.display())))
    }
}

/// Fully resolved experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub command: Command,
    pub model: ModelConfig,
    pub params: Params,
    pub output_dir: PathBuf,
}

/// Precedence, lowest first: config file, `RGG_SEED`, flags.
pub fn resolve(command: Option<Command>, file: SpecFile, flags_model: PartialModel, flags_params: Params, output_dir: Option<PathBuf>, env_seed: Option<&str>) -> Result<ExperimentSpec> {
    let command = match (command, file.command) {
        (Some(c), Some(f)) if c != f => {
            return Err(Error::invalid(format!("config is for `{}` but `{}` was requested", f.name(), c.name())));
        }
        (Some(c), _) | (None, Some(c)) => c,
        (None, None) => return Err(Error::invalid("no command given and none in the config file")),
    };
    let env = match env_seed {
        Some(s) => Some(s.trim().parse::<u64>().map_err(|_| Error::invalid(format!("RGG_SEED must be an unsigned integer, got {s:?}")))?),
        None => None,
    };
    let m = file.model.overlay(PartialModel { master_seed: env, ..Default::default() }).overlay(flags_model);
    let model = ModelConfig {
        n: m.n.unwrap_or(DEFAULT_N),
        d: m.d.unwrap_or(DEFAULT_D),
        p: m.p.unwrap_or(DEFAULT_P),
        norm: m.norm.unwrap_or(Norm::Lq(2)),
        master_seed: m.master_seed.unwrap_or(0),
    };
    model.validate()?;
    Ok(ExperimentSpec {
        command,
        model,
        params: file.params.overlay(flags_params),
        output_dir: output_dir.or(file.output_dir).unwrap_or_else(|| PathBuf::from(".")),
    })
}
