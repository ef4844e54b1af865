//! The edge-overlap kernel `γ(x, y)`, moments of signed `K_{2,k}` weights,
//! and the summed total-variation upper bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{self, ThresholdResult};
use crate::error::{Error, Result};
use crate::rng::{self, label, Stream};
use crate::stats::{self, Estimate, Moments, StatReport};
use crate::torus::{self, ModelConfig, Norm};

pub const MIN_GAMMA_SAMPLES: usize = 1_000;
pub const MIN_K2K_TRIALS: usize = 10_000;
pub const MAX_TV_K: usize = 64;
pub const DEFAULT_INNER_BUDGET: usize = 1_000;

/// `E_z[(1_e(x,z) − p)(1_e(y,z) − p)]` by Monte Carlo over uniform `z`.
pub fn gamma_xy(x: &[f64], y: &[f64], norm: Norm, tau: f64, p: f64, samples: usize, stream: Stream) -> Result<Estimate> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::invalid("x and y must be non-empty and of equal dimension"));
    }
    if samples < MIN_GAMMA_SAMPLES {
        return Err(Error::invalid(format!("need at least {MIN_GAMMA_SAMPLES} samples")));
    }
    let c = overlap_counts(x, y, norm, tau, samples, stream);
    let (a, b, cc) = kernel_values(p);
    let mut m = Moments::default();
    for (v, k) in [(a, c[0]), (b, c[1]), (cc, c[2])] {
        for _ in 0..k {
            m.push(v);
        }
    }
    Ok(m.estimate())
}

/// Values of `(1_x − p)(1_y − p)` when both, exactly one, or neither edge is present.
fn kernel_values(p: f64) -> (f64, f64, f64) {
    ((1.0 - p) * (1.0 - p), -p * (1.0 - p), p * p)
}

/// Counts of `z` hitting both, exactly one, or neither of the balls at `x`, `y`.
fn overlap_counts(x: &[f64], y: &[f64], norm: Norm, tau: f64, samples: usize, stream: Stream) -> [usize; 3] {
    let mut r = stream.rng();
    let mut z = vec![0.0; x.len()];
    let mut c = [0usize; 3];
    for _ in 0..samples {
        z.iter_mut().for_each(|v| *v = rng::torus_coord(&mut r));
        let ex = torus::pair_distance_unchecked(x, &z, norm) <= tau;
        let ey = torus::pair_distance_unchecked(y, &z, norm) <= tau;
        c[2 - usize::from(ex) - usize::from(ey)] += 1;
    }
    c
}

/// Unbiased estimates of `γ^j`, `j = 1..=j_max`: the order-`j` U-statistic of
/// the inner samples, which only take three values.
fn u_statistics(counts: [usize; 3], p: f64, j_max: usize) -> Vec<f64> {
    let (a, b, c) = kernel_values(p);
    let total = counts.iter().sum::<usize>() as u64;
    let [na, nb, nc] = counts.map(|k| k as u64);
    let (la, lb, lc) = (a.ln(), b.abs().ln(), c.ln());
    (1..=j_max as u64)
        .map(|j| {
            let norm = stats::ln_binomial(total, j);
            let mut s = 0.0;
            for al in 0..=j.min(na) {
                for be in 0..=(j - al).min(nb) {
                    let ga = j - al - be;
                    if ga > nc {
                        continue;
                    }
                    let lw = stats::ln_binomial(na, al) + stats::ln_binomial(nb, be) + stats::ln_binomial(nc, ga) - norm;
                    let mag = (lw + al as f64 * la + be as f64 * lb + ga as f64 * lc).exp();
                    s += if be % 2 == 1 { -mag } else { mag };
                }
            }
            s
        })
        .collect()
}

/// Per-trial unbiased estimates of `γ(x,y)^j` for `j = 1..=j_max`, with fresh
/// `x`, `y` and `inner` fresh `z` per trial.
fn gamma_power_samples(config: &ModelConfig, tau: f64, j_max: usize, trials: usize, inner: usize) -> Vec<Moments> {
    let stream = config.root_stream().child(label::GAMMA);
    let d = config.d;
    let per_trial: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = stream.child(t as u64);
            let mut r = s.child(0).rng();
            let x: Vec<f64> = (0..d).map(|_| rng::torus_coord(&mut r)).collect();
            let y: Vec<f64> = (0..d).map(|_| rng::torus_coord(&mut r)).collect();
            u_statistics(overlap_counts(&x, &y, config.norm, tau, inner, s.child(1)), config.p, j_max)
        })
        .collect();
    let mut out = vec![Moments::default(); j_max];
    for row in &per_trial {
        for (m, v) in out.iter_mut().zip(row) {
            m.push(*v);
        }
    }
    out
}

fn check_inner(inner: usize) -> Result<()> {
    if inner < 2 * MAX_TV_K {
        return Err(Error::invalid(format!("inner budget must be at least {}", 2 * MAX_TV_K)));
    }
    Ok(())
}

/// `E_{x,y}[γ(x,y)^j]` for `j = 1..=j_max`, including the `j = 1` case
/// (a single unconditioned two-path).
pub fn gamma_power_moments(config: &ModelConfig, j_max: usize, trials: usize, inner: usize, threshold: &ThresholdResult) -> Result<Vec<Estimate>> {
    config.validate()?;
    check_inner(inner)?;
    if j_max == 0 || j_max > MAX_TV_K || trials < 2 {
        return Err(Error::invalid("need 1 <= j_max <= 64 and at least two trials"));
    }
    Ok(gamma_power_samples(config, threshold.tau, j_max, trials, inner).iter().map(Moments::estimate).collect())
}

/// `E[Sw(K_{2,k})] = E_{x,y}[γ(x,y)^k]`.
pub fn k2k_moment(config: &ModelConfig, k: usize, trials: usize) -> Result<StatReport> {
    let th = calibration::experiment_threshold(config)?;
    k2k_moment_with(config, k, trials, DEFAULT_INNER_BUDGET, &th)
}

pub fn k2k_moment_with(config: &ModelConfig, k: usize, trials: usize, inner: usize, threshold: &ThresholdResult) -> Result<StatReport> {
    if k < 2 || k > MAX_TV_K {
        return Err(Error::invalid("k must lie in 2..=64"));
    }
    if trials < MIN_K2K_TRIALS {
        return Err(Error::invalid(format!("need at least {MIN_K2K_TRIALS} trials")));
    }
    let est = gamma_power_moments(config, k, trials, inner, threshold)?;
    let e = est[k - 1];
    let mut extra = std::collections::BTreeMap::new();
    extra.insert("inner_budget".into(), inner as f64);
    extra.insert("tau".into(), threshold.tau);
    Ok(StatReport { trials, mean: e.value, stderr: e.stderr, bound_value: None, extra })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TvTerm {
    pub j: usize,
    pub moment: f64,
    pub moment_stderr: f64,
    /// `n·C(n,j)·(p(1−p))^{−j}·max(moment, 0)`.
    pub value: f64,
    pub value_stderr: f64,
}

mod float_or_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*x)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum V {
            F(f64),
            S(String),
        }
        match V::deserialize(d)? {
            V::F(x) => Ok(x),
            V::S(s) if s == "inf" => Ok(f64::INFINITY),
            V::S(s) => Err(serde::de::Error::custom(format!("bad bound {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TvBoundReport {
    pub terms: Vec<TvTerm>,
    #[serde(with = "float_or_inf")]
    pub bound: f64,
    pub truncation_k: usize,
    /// Outer trials times inner samples.
    pub mc_budget: usize,
    #[serde(with = "float_or_inf")]
    pub tail_estimate: f64,
    /// Last term ratio is below 1/2, so the geometric tail is certified.
    pub tail_certified: bool,
    pub diverging_j: Option<usize>,
}

/// `n Σ_{j=2}^{k_max} C(n,j) (p(1−p))^{−j} E[Sw(K_{2,j})]` plus a geometric
/// tail estimate. Divergence is flagged at the first `j` whose significantly
/// positive term is at least the previous one.
pub fn tv_upper_bound(config: &ModelConfig, k_max: usize, trials: usize) -> Result<TvBoundReport> {
    let th = calibration::experiment_threshold(config)?;
    tv_upper_bound_with(config, k_max, trials, DEFAULT_INNER_BUDGET, &th)
}

pub fn tv_upper_bound_with(config: &ModelConfig, k_max: usize, trials: usize, inner: usize, threshold: &ThresholdResult) -> Result<TvBoundReport> {
    if !(2..=MAX_TV_K).contains(&k_max) {
        return Err(Error::invalid("k_max must lie in 2..=64"));
    }
    if k_max > config.n {
        return Err(Error::invalid("k_max cannot exceed n"));
    }
    let est = gamma_power_moments(config, k_max, trials, inner, threshold)?;
    let (n, p) = (config.n as u64, config.p);
    let mut terms = Vec::with_capacity(k_max - 1);
    let mut diverging_j = None;
    for j in 2..=k_max {
        let e = est[j - 1];
        let scale = ((n as f64).ln() + stats::ln_binomial(n, j as u64) - j as f64 * (p * (1.0 - p)).ln()).exp();
        let t = TvTerm { j, moment: e.value, moment_stderr: e.stderr, value: scale * e.value.max(0.0), value_stderr: scale * e.stderr };
        if let Some(prev) = terms.last() {
            let prev: &TvTerm = prev;
            if diverging_j.is_none() && e.value > 3.0 * e.stderr && prev.value > 0.0 && t.value >= prev.value {
                diverging_j = Some(j);
            }
        }
        terms.push(t);
    }
    let sum: f64 = terms.iter().map(|t| t.value).sum();
    let (tail, certified) = match terms.as_slice() {
        [.., a, b] if a.value > 0.0 => {
            let r = b.value / a.value;
            if r < 1.0 {
                (b.value * r / (1.0 - r), r < 0.5)
            } else {
                (f64::INFINITY, false)
            }
        }
        [.., b] if b.value == 0.0 => (0.0, true),
        _ => (f64::INFINITY, false),
    };
    let bound = if diverging_j.is_some() { f64::INFINITY } else { sum + if tail.is_finite() { tail } else { 0.0 } };
    Ok(TvBoundReport {
        terms,
        bound,
        truncation_k: k_max,
        mc_budget: trials * inner,
        tail_estimate: tail,
        tail_certified: certified,
        diverging_j,
    })
}
