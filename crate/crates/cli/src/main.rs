//! `rgg`: experiments on random geometric graphs on the torus.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid specification,
//! 3 numerical failure. Errors are reported as a one-line JSON object.

mod commands;
mod spec;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rgg_torus::calibration::Method;
use rgg_torus::spectral::Regime;
use rgg_torus::trace_core::GraphModel;
use rgg_torus::{Error, Norm};
use serde_json::json;

use spec::{Command, ExperimentSpec, Params, PartialModel, SpecFile};

#[derive(Parser, Debug)]
#[command(name = "rgg", version, about = "Random geometric graphs on the high-dimensional torus")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args, Debug)]
struct Global {
    /// JSON experiment spec; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides RGG_SEED and the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    d: Option<usize>,
    #[arg(long, global = true)]
    p: Option<f64>,
    /// Norm exponent: a positive integer or "inf".
    #[arg(long, global = true, value_parser = parse_norm)]
    q: Option<Norm>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also print the JSON result on standard output.
    #[arg(long, global = true)]
    stdout: bool,
}

fn parse_norm(s: &str) -> Result<Norm, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_graph(s: &str) -> Result<GraphModel, String> {
    match s {
        "rgg" => Ok(GraphModel::Rgg),
        "gnp" => Ok(GraphModel::Gnp),
        _ => Err(format!("graph must be rgg or gnp, got {s:?}")),
    }
}

fn parse_regime(s: &str) -> Result<Regime, String> {
    match s {
        "lq" => Ok(Regime::Lq),
        "linf" => Ok(Regime::Linf),
        _ => Err(format!("regime must be lq or linf, got {s:?}")),
    }
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Calibrate the connection threshold.
    Calibrate {
        #[arg(long, value_parser = parse_method)]
        method: Option<Method>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        validation_budget: Option<usize>,
    },
    /// Sample one graph and write its edge list.
    Sample {
        #[arg(long, value_parser = parse_graph)]
        graph: Option<GraphModel>,
    },
    /// Power and false-positive rate of the signed-triangle test at one d.
    TriangleTest {
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_parser = parse_method)]
        method: Option<Method>,
        #[arg(long)]
        mc_trials: Option<usize>,
    },
    /// Signed-triangle test across several dimensions.
    SweepPower {
        #[arg(long, value_delimiter = ',')]
        d_values: Option<Vec<usize>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_parser = parse_method)]
        method: Option<Method>,
        #[arg(long)]
        mc_trials: Option<usize>,
    },
    /// Spectrum of the centered adjacency matrix.
    Spectrum {
        #[arg(long, value_parser = parse_graph)]
        graph: Option<GraphModel>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long, value_parser = parse_regime)]
        regime: Option<Regime>,
    },
    /// Arc-vector Rayleigh quotients and Gram overlaps.
    ArcVectors {
        #[arg(long)]
        arc_halfwidth: Option<f64>,
    },
    /// Reduce a closed walk or edge-multiset file to its core.
    CoreContract {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        walk: Option<Vec<usize>>,
    },
    /// Mean of tr((A − p11ᵀ)^m) over fresh samples.
    TraceMoment {
        #[arg(long, value_delimiter = ',')]
        m_values: Option<Vec<usize>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_parser = parse_graph)]
        graph: Option<GraphModel>,
    },
    /// Cycle cumulants and their d-scaling.
    Moments {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        zeta: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        d_values: Option<Vec<usize>>,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Total-variation upper bound from K_{2,k} moments.
    TvBound {
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        inner_budget: Option<usize>,
    },
    /// Run the command named in the config file.
    Run,
}

impl Sub {
    fn split(self) -> (Option<Command>, Params) {
        let p = Params::default();
        match self {
            Sub::Calibrate { method, budget, validation_budget } => (Some(Command::Calibrate), Params { method, budget, validation_budget, ..p }),
            Sub::Sample { graph } => (Some(Command::Sample), Params { graph, ..p }),
            Sub::TriangleTest { trials, method, mc_trials } => (Some(Command::TriangleTest), Params { trials, method, mc_trials, ..p }),
            Sub::SweepPower { d_values, trials, method, mc_trials } => (Some(Command::SweepPower), Params { d_values, trials, method, mc_trials, ..p }),
            Sub::Spectrum { graph, a, regime } => (Some(Command::Spectrum), Params { graph, a, regime, ..p }),
            Sub::ArcVectors { arc_halfwidth } => (Some(Command::ArcVectors), Params { arc_halfwidth, ..p }),
            Sub::CoreContract { input, walk } => (Some(Command::CoreContract), Params { input, walk, ..p }),
            Sub::TraceMoment { m_values, trials, graph } => (Some(Command::TraceMoment), Params { m_values, trials, graph, ..p }),
            Sub::Moments { k, zeta, d_values, budget } => (Some(Command::Moments), Params { k, zeta, d_values, budget, ..p }),
            Sub::TvBound { k_max, trials, inner_budget } => (Some(Command::TvBound), Params { k_max, trials, inner_budget, ..p }),
            Sub::Run => (None, p),
        }
    }
}

enum Failure {
    Io(String),
    Invalid(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Numerical { .. } => Failure::Numerical(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

impl Failure {
    fn report(&self, to_stdout: bool) -> ExitCode {
        let (kind, msg, code) = match self {
            Failure::Io(m) => ("io", m, 1),
            Failure::Invalid(m) => ("invalid_spec", m, 2),
            Failure::Numerical(m) => ("numerical", m, 3),
        };
        let obj = json!({ "error": { "kind": kind, "message": msg, "exit_code": code } });
        if to_stdout {
            println!("{obj}");
        } else {
            eprintln!("{obj}");
        }
        ExitCode::from(code)
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let g = cli.global;
    if let Some(t) = g.threads {
        if t == 0 {
            return Err(Failure::Invalid("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().map_err(|e| Failure::Invalid(e.to_string()))?;
    }
    let file = match &g.config {
        Some(path) => SpecFile::load(path)?,
        None => SpecFile::default(),
    };
    let (command, flag_params) = cli.command.split();
    let flags_model = PartialModel { n: g.n, d: g.d, p: g.p, norm: g.q, master_seed: g.seed };
    let env_seed = std::env::var("RGG_SEED").ok();
    let spec: ExperimentSpec = spec::resolve(command, file, flags_model, flag_params, g.output_dir, env_seed.as_deref())?;

    std::fs::create_dir_all(&spec.output_dir).map_err(|e| Failure::Io(format!("cannot create {}: {e}", spec.output_dir.display())))?;
    eprintln!("[rgg] {} n={} d={} p={} q={} seed={}", spec.command.name(), spec.model.n, spec.model.d, spec.model.p, spec.model.norm, spec.model.master_seed);
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let clock = Instant::now();
    let outcome = commands::run(&spec)?;
    let elapsed = clock.elapsed().as_secs_f64();

    let mut outputs = Vec::new();
    for (name, contents) in &outcome.files {
        write_file(&spec.output_dir, name, contents)?;
        outputs.push(name.clone());
    }
    let manifest = json!({
        "artifact": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "spec": spec,
        "master_seed": spec.model.master_seed,
        "streams": commands::stream_map(&spec.model),
        "threads": rayon::current_num_threads(),
        "outputs": outputs,
        "timing": { "started_unix": started, "wall_clock_seconds": elapsed },
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Io(e.to_string()))? + "\n";
    write_file(&spec.output_dir, "manifest.json", &text)?;
    eprintln!("[rgg] wrote {} file(s) to {} in {elapsed:.2}s", outputs.len() + 1, spec.output_dir.display());
    if g.stdout {
        println!("{}", outcome.result);
    }
    Ok(())
}

fn main() -> ExitCode {
    let to_stdout = std::env::args().any(|a| a == "--stdout");
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return Failure::Invalid(e.render().to_string().trim().to_string()).report(to_stdout),
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(to_stdout),
    }
}
