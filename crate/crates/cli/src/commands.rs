//! Command implementations. Each returns the JSON result plus the files to
//! write; nothing here touches the filesystem except reading inputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rgg_torus::calibration::{self, Method, DEFAULT_BUDGET};
use rgg_torus::rng::label;
use rgg_torus::signed_stats::{self, SweepOptions, SWEEP_HEADER};
use rgg_torus::spectral::{self, Regime};
use rgg_torus::trace_core::{self, CoreReport, GraphModel, Multigraph, TRACE_HEADER};
use rgg_torus::{cumulants, torus, tv_bound, AdjacencyMatrix, Error, ModelConfig, Norm, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::spec::{Command, ExperimentSpec};

pub struct Outcome {
    pub result: Value,
    /// `(file name, contents)` in write order; the first is the primary result.
    pub files: Vec<(String, String)>,
}

fn pretty<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(|e| Error::invalid(format!("serialization failed: {e}")))
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::invalid(format!("serialization failed: {e}")))
}

fn json_outcome(name: &str, result: Value) -> Result<Outcome> {
    Ok(Outcome { files: vec![(name.into(), pretty(&result)?)], result })
}

/// Named stream ids for the manifest.
pub fn stream_map(config: &ModelConfig) -> BTreeMap<&'static str, u64> {
    let root = config.root_stream();
    [
        ("positions", label::POSITIONS),
        ("gnp", label::GNP),
        ("calibration", label::CALIBRATION),
        ("validation", label::VALIDATION),
        ("pattern", label::PATTERN),
        ("gamma", label::GAMMA),
        ("bootstrap", label::BOOTSTRAP),
        ("sweep_rgg", label::SWEEP_RGG),
        ("sweep_gnp", label::SWEEP_GNP),
        ("spectrum", label::SPECTRUM),
        ("trace", label::TRACE),
        ("kappa", label::KAPPA),
        ("walks", label::WALKS),
    ]
    .into_iter()
    .map(|(k, l)| (k, root.child(l).id()))
    .collect()
}

pub fn run(spec: &ExperimentSpec) -> Result<Outcome> {
    match spec.command {
        Command::Calibrate => calibrate(spec),
        Command::Sample => sample(spec),
        Command::TriangleTest => sweep(spec, &[spec.model.d], "triangle_test.csv"),
        Command::SweepPower => sweep(spec, spec.params.d_values.as_deref().unwrap_or(&[spec.model.d]), "sweep_power.csv"),
        Command::Spectrum => spectrum(spec),
        Command::ArcVectors => arc_vectors(spec),
        Command::CoreContract => core_contract(spec),
        Command::TraceMoment => trace_moment(spec),
        Command::Moments => moments(spec),
        Command::TvBound => tv(spec),
    }
}

fn default_method(norm: Norm) -> Method {
    if norm.is_inf() {
        Method::ClosedForm
    } else {
        Method::EmpiricalQuantile
    }
}

fn calibrate(spec: &ExperimentSpec) -> Result<Outcome> {
    let c = &spec.model;
    let pr = &spec.params;
    let method = pr.method.unwrap_or(default_method(c.norm));
    let budget = pr.budget.unwrap_or(DEFAULT_BUDGET);
    let th = calibration::calibrate(c, method, budget, pr.validation_budget.unwrap_or(budget))?;
    json_outcome(
        "calibrate.json",
        json!({
            "q": c.norm,
            "d": c.d,
            "p": c.p,
            "tau": th.tau,
            "tau_hat": th.tau_hat,
            "xi": th.xi,
            "method": th.method,
            "achieved_p": th.achieved_p.map(|e| e.value),
            "stderr": th.achieved_p.map(|e| e.stderr),
        }),
    )
}

fn rgg_graph(c: &ModelConfig) -> Result<(torus::Positions, AdjacencyMatrix, f64)> {
    let th = calibration::experiment_threshold(c)?;
    let pos = torus::sample_positions(c, label::POSITIONS);
    let adj = torus::build_rgg(&pos, th.tau, c.norm);
    Ok((pos, adj, th.tau))
}

fn graph_for(spec: &ExperimentSpec) -> Result<(AdjacencyMatrix, Option<f64>)> {
    match spec.params.graph.unwrap_or(GraphModel::Rgg) {
        GraphModel::Rgg => rgg_graph(&spec.model).map(|(_, a, t)| (a, Some(t))),
        GraphModel::Gnp => Ok((torus::sample_gnp(&spec.model, label::GNP), None)),
    }
}

fn sample(spec: &ExperimentSpec) -> Result<Outcome> {
    let c = &spec.model;
    let (adj, tau) = graph_for(spec)?;
    let pairs = (c.n * (c.n - 1) / 2) as f64;
    let result = json!({
        "graph": spec.params.graph.unwrap_or(GraphModel::Rgg),
        "n": c.n,
        "d": c.d,
        "p": c.p,
        "q": c.norm,
        "tau": tau,
        "edge_count": adj.edge_count(),
        "edge_density": adj.edge_count() as f64 / pairs,
    });
    Ok(Outcome { files: vec![("edges.txt".into(), adj.to_edge_list()), ("sample.json".into(), pretty(&result)?)], result })
}

fn sweep(spec: &ExperimentSpec, d_values: &[usize], file: &str) -> Result<Outcome> {
    if d_values.is_empty() {
        return Err(Error::invalid("d_values must not be empty"));
    }
    let pr = &spec.params;
    let defaults = SweepOptions::default();
    let opts = SweepOptions {
        method: pr.method.unwrap_or(defaults.method),
        calibration_budget: pr.budget.unwrap_or(DEFAULT_BUDGET),
        control: false,
        linf_mc_trials: pr.mc_trials.unwrap_or(defaults.linf_mc_trials),
    };
    let rows = signed_stats::power_sweep(&spec.model, d_values, pr.trials.unwrap_or(100), &opts)?;
    let mut csv = format!("{SWEEP_HEADER}\n");
    rows.iter().for_each(|r| csv.push_str(&(r.csv() + "\n")));
    Ok(Outcome { result: to_value(&rows)?, files: vec![(file.into(), csv)] })
}

fn regime_for(spec: &ExperimentSpec) -> Regime {
    spec.params.regime.unwrap_or(if spec.model.norm.is_inf() { Regime::Linf } else { Regime::Lq })
}

fn spectrum(spec: &ExperimentSpec) -> Result<Outcome> {
    let c = &spec.model;
    let (adj, _) = graph_for(spec)?;
    let mut rep = spectral::spectrum(&spectral::center_adjacency(&adj, c.p))?;
    let a = spec.params.a.unwrap_or(2.0);
    let regime = regime_for(spec);
    let threshold = spectral::regime_threshold(c.n, c.p, c.d, a, regime);
    rep.counts.insert("large".into(), spectral::count_above(&rep, threshold));
    let mut csv = String::from("index,eigenvalue\n");
    for (i, l) in rep.eigenvalues.iter().enumerate() {
        let _ = writeln!(csv, "{},{l}", i + 1);
    }
    let result = json!({
        "lambda1": rep.lambda1,
        "lambda2_abs_max": rep.lambda2_abs_max,
        "counts": rep.counts,
        "threshold": threshold,
        "a": a,
        "regime": regime,
        "trace": rep.trace,
        "frobenius_check": rep.frobenius_check,
        "residual_check": rep.residual_check,
    });
    Ok(Outcome { files: vec![("spectrum.json".into(), pretty(&result)?), ("eigenvalues.csv".into(), csv)], result })
}

fn arc_vectors(spec: &ExperimentSpec) -> Result<Outcome> {
    let c = &spec.model;
    let (pos, adj, _) = rgg_graph(c)?;
    let m = spectral::center_adjacency(&adj, c.p);
    let vectors = match c.norm {
        Norm::Lq(q) => {
            let w = match spec.params.arc_halfwidth {
                Some(w) => w,
                None => spectral::default_arc_halfwidth(q)?,
            };
            (0..c.d).map(|i| spectral::arc_vector_q(&pos, i, w)).collect::<Result<Vec<_>>>()?
        }
        Norm::Linf => {
            let xi = calibration::calibrate_threshold_linf(c.d, c.p)?.xi.unwrap_or(0.0);
            let mut all = Vec::new();
            for i in 0..c.d {
                all.extend(spectral::arc_vectors_linf(&pos, i, xi)?);
            }
            all
        }
    };
    let mut csv = String::from("dimension,vector,plus_size,minus_size,inter_cluster_edges,rayleigh\n");
    let mut units = Vec::new();
    let mut quotients = Vec::new();
    let mut inter_total = 0;
    let mut per_dim = vec![0usize; c.d];
    for v in &vectors {
        let t = per_dim[v.dimension_index];
        per_dim[v.dimension_index] += 1;
        let (plus, minus) = (v.plus_support(), v.minus_support());
        let inter: usize = plus.iter().map(|&u| minus.iter().filter(|&&w| adj.get(u, w)).count()).sum();
        inter_total += inter;
        let ray = if v.degenerate {
            String::new()
        } else {
            let y = v.normalized();
            let r = spectral::rayleigh(&m, &y)?;
            quotients.push(r);
            units.push(y);
            r.to_string()
        };
        let _ = writeln!(csv, "{},{t},{},{},{inter},{ray}", v.dimension_index, plus.len(), minus.len());
    }
    let gram = if units.len() >= 2 { Some(spectral::gram_offdiag(&units)?) } else { None };
    let np = c.n as f64 * c.p;
    let reference = if c.norm.is_inf() { np / c.d as f64 } else { np / (c.d as f64).sqrt() };
    let mean = quotients.iter().sum::<f64>() / quotients.len().max(1) as f64;
    let result = json!({
        "vectors": vectors.len(),
        "nondegenerate": quotients.len(),
        "rayleigh_mean": if quotients.is_empty() { None } else { Some(mean) },
        "rayleigh_min": quotients.iter().copied().reduce(f64::min),
        "reference_scale": reference,
        "gram_offdiag_max": gram,
        "inter_cluster_edges": inter_total,
    });
    Ok(Outcome { files: vec![("arc_vectors.json".into(), pretty(&result)?), ("arc_vectors.csv".into(), csv)], result })
}

#[derive(Serialize)]
struct CoreOutput<'a> {
    #[serde(flatten)]
    report: &'a CoreReport,
    identity_holds: bool,
    skeleton_identity_holds: bool,
}

fn core_contract(spec: &ExperimentSpec) -> Result<Outcome> {
    let pr = &spec.params;
    let h = match (&pr.input, &pr.walk) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
            Multigraph::parse(&text)?
        }
        (None, Some(w)) => trace_core::walk_to_multigraph(w)?,
        _ => return Err(Error::invalid("core-contract needs exactly one of `input` or `walk`")),
    };
    let report = trace_core::contract_core(&h)?;
    let out = CoreOutput { identity_holds: report.identity_holds(&h), skeleton_identity_holds: report.skeleton_identity_holds(&h), report: &report };
    json_outcome("core.json", to_value(&out)?)
}

fn trace_moment(spec: &ExperimentSpec) -> Result<Outcome> {
    let c = &spec.model;
    let ms = spec.params.m_values.clone().unwrap_or_else(|| vec![2, 4]);
    let model = spec.params.graph.unwrap_or(GraphModel::Rgg);
    let trials = spec.params.trials.unwrap_or(20);
    let mut csv = format!("{TRACE_HEADER}\n");
    let mut rows = Vec::new();
    for m in ms {
        let r = trace_core::empirical_trace_moment_of(c, m, trials, model)?;
        let pred = r.bound_value.unwrap_or(f64::NAN);
        let _ = writeln!(csv, "{m},{},{},{},{pred}", c.d, r.mean, r.stderr);
        rows.push(json!({"m": m, "d": c.d, "mean": r.mean, "stderr": r.stderr, "regime_prediction": pred}));
    }
    Ok(Outcome { result: Value::Array(rows), files: vec![("trace_moment.csv".into(), csv)] })
}

fn moments(spec: &ExperimentSpec) -> Result<Outcome> {
    let c = &spec.model;
    let q = c.norm.q().ok_or_else(|| Error::invalid("moments needs a finite exponent q"))?;
    let k = spec.params.k.unwrap_or(3);
    let zeta = spec.params.zeta.unwrap_or(1.0);
    let budget = spec.params.budget.unwrap_or(cumulants::DEFAULT_KAPPA_MC);
    let stream = c.root_stream().child(label::KAPPA);
    let ds = spec.params.d_values.clone().unwrap_or_else(|| vec![c.d]);
    let base = cumulants::cycle_kappa_with(q, k, 1, zeta, budget, stream)?;
    let scale = (zeta * calibration::coordinate_moments(q)?.sigma()).powi(k as i32);
    let mut at = BTreeMap::new();
    for d in ds {
        at.insert(d.to_string(), cumulants::cycle_kappa_with(q, k, d, zeta, budget, stream)?.kappa_d.value);
    }
    json_outcome(
        "moments.json",
        json!({
            "q": q,
            "k": k,
            "gamma_moment": base.rho.value * scale,
            "gamma_moment_stderr": base.rho.stderr * scale,
            "rho": base.rho.value,
            "rho_stderr": base.rho.stderr,
            "kappa_d_at": at,
        }),
    )
}

fn tv(spec: &ExperimentSpec) -> Result<Outcome> {
    let c = &spec.model;
    let pr = &spec.params;
    let th = calibration::experiment_threshold(c)?;
    let rep = tv_bound::tv_upper_bound_with(
        c,
        pr.k_max.unwrap_or(8).min(c.n),
        pr.trials.unwrap_or(tv_bound::MIN_K2K_TRIALS),
        pr.inner_budget.unwrap_or(tv_bound::DEFAULT_INNER_BUDGET),
        &th,
    )?;
    json_outcome("tv_bound.json", to_value(&rep)?)
}
