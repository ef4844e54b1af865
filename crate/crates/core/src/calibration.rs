//! Per-coordinate distance moments and the connection threshold.
//!
//! For a uniform pair on the circle the coordinate distance is uniform on
//! `[0, 1/2]`, so a single summand of Δ is `U^q` with `U ~ Unif(0, 1/2)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::rng::{self, label, Stream};
use crate::stats::{sum_pairwise, Estimate};
use crate::torus::{ModelConfig, Norm, PAIRWISE_THRESHOLD};

/// Moments of `U^q`, `U ~ Unif(0, 1/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinateMoments {
    pub q: u32,
    pub mu: f64,
    pub sigma2: f64,
    /// `raw_moments[j-1] = E[U^{jq}]` for `j = 1..=8`.
    pub raw_moments: [f64; 8],
}

impl CoordinateMoments {
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// Cumulants `κ_1..κ_4` of `U^q`.
    pub fn cumulants(&self) -> [f64; 4] {
        let [m1, m2, m3, m4, ..] = self.raw_moments;
        [
            m1,
            m2 - m1 * m1,
            m3 - 3.0 * m2 * m1 + 2.0 * m1.powi(3),
            m4 - 4.0 * m3 * m1 - 3.0 * m2 * m2 + 12.0 * m2 * m1 * m1 - 6.0 * m1.powi(4),
        ]
    }

    /// Standardized third and fourth cumulants (skewness, excess kurtosis).
    pub fn standardized(&self) -> (f64, f64) {
        let k = self.cumulants();
        (k[2] / self.sigma2.powf(1.5), k[3] / (self.sigma2 * self.sigma2))
    }

    pub fn third_central_moment(&self) -> f64 {
        self.cumulants()[2]
    }
}

pub fn coordinate_moments(q: u32) -> Result<CoordinateMoments> {
    if q < 1 {
        return Err(Error::invalid("q must be at least 1"));
    }
    let qf = f64::from(q);
    let mut raw = [0.0; 8];
    for (j, m) in raw.iter_mut().enumerate() {
        let jq = (j + 1) as f64 * qf;
        *m = 0.5f64.powf(jq) / (jq + 1.0);
    }
    let mu = raw[0];
    Ok(CoordinateMoments { q, mu, sigma2: raw[1] - mu * mu, raw_moments: raw })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    EmpiricalQuantile,
    Gaussian,
    Edgeworth,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed_form" => Ok(Method::ClosedForm),
            "empirical_quantile" | "empirical" => Ok(Method::EmpiricalQuantile),
            "gaussian" => Ok(Method::Gaussian),
            "edgeworth" => Ok(Method::Edgeworth),
            _ => Err(Error::invalid(format!("unknown calibration method {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub tau: f64,
    /// `(τ − μd)/(σ√d)`; absent for the sup norm.
    pub tau_hat: Option<f64>,
    /// Sup norm only: `ξ = 1 − p^{1/d}`.
    pub xi: Option<f64>,
    pub method: Method,
    /// Validation estimate of `P(Δ ≤ τ)`. Its standard error is measured
    /// against the target `p` and so also carries the quantile's own noise.
    pub achieved_p: Option<Estimate>,
}

pub const DEFAULT_BUDGET: usize = 2_000_000;
pub const MIN_EMPIRICAL_BUDGET: usize = 10_000;

/// Closed-form sup-norm threshold: `τ = p^{1/d}/2`.
pub fn calibrate_threshold_linf(d: usize, p: f64) -> Result<ThresholdResult> {
    if !(p > 0.0 && p < 1.0) || d == 0 {
        return Err(Error::invalid("need 0 < p < 1 and d >= 1"));
    }
    let root = p.powf(1.0 / d as f64);
    Ok(ThresholdResult {
        tau: root / 2.0,
        tau_hat: None,
        xi: Some(1.0 - root),
        method: Method::ClosedForm,
        achieved_p: Some(Estimate::exact(p)),
    })
}

pub fn rescale(tau: f64, q: u32, d: usize) -> Result<f64> {
    let m = coordinate_moments(q)?;
    let df = d as f64;
    Ok((tau - m.mu * df) / (m.sigma() * df.sqrt()))
}

pub fn unrescale(tau_hat: f64, q: u32, d: usize) -> Result<f64> {
    let m = coordinate_moments(q)?;
    let df = d as f64;
    Ok(m.mu * df + m.sigma() * df.sqrt() * tau_hat)
}

/// Cornish–Fisher quantile of the standardized sum to second order.
pub fn edgeworth_quantile(q: u32, d: usize, p: f64) -> Result<f64> {
    let (k3, k4) = coordinate_moments(q)?.standardized();
    let z = normal::quantile(p);
    let g1 = k3 / (d as f64).sqrt();
    let g2 = k4 / d as f64;
    Ok(z + (z * z - 1.0) * g1 / 6.0 + (z.powi(3) - 3.0 * z) * g2 / 24.0 - (2.0 * z.powi(3) - 5.0 * z) * g1 * g1 / 36.0)
}

const CHUNK: usize = 1 << 15;

/// `count` i.i.d. draws of Δ for a uniform pair, generated in fixed chunks
/// on child streams and concatenated in order.
pub fn sample_pair_deltas(q: u32, d: usize, count: usize, stream: Stream) -> Vec<f64> {
    let chunks = count.div_ceil(CHUNK);
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(count - c * CHUNK);
            let mut r = stream.child(c as u64).rng();
            let mut buf = vec![0.0; d];
            (0..len)
                .map(|_| {
                    for b in buf.iter_mut() {
                        let u = 0.5 * rng::unit(&mut r);
                        *b = match q {
                            1 => u,
                            2 => u * u,
                            _ => u.powi(q as i32),
                        };
                    }
                    if d > PAIRWISE_THRESHOLD {
                        sum_pairwise(&buf)
                    } else {
                        buf.iter().sum()
                    }
                })
                .collect()
        })
        .collect();
    parts.concat()
}

/// Order statistic at 1-based index `⌈p·N⌉`.
pub fn empirical_quantile(mut xs: Vec<f64>, p: f64) -> f64 {
    let n = xs.len();
    let k = ((p * n as f64).ceil() as usize).clamp(1, n);
    let (_, v, _) = xs.select_nth_unstable_by(k - 1, f64::total_cmp);
    *v
}

/// Calibrate `τ` for a finite exponent. `stream` feeds both the quantile
/// sample (child `CALIBRATION`) and the validation sample (child
/// `VALIDATION`), which uses the same budget. A zero budget is accepted by
/// the analytic methods and skips validation.
pub fn calibrate_threshold_lq(q: u32, d: usize, p: f64, method: Method, sample_budget: usize, stream: Stream) -> Result<ThresholdResult> {
    calibrate_threshold_lq_validated(q, d, p, method, sample_budget, sample_budget, stream)
}

/// As [`calibrate_threshold_lq`] with a separate validation budget (0 skips it).
pub fn calibrate_threshold_lq_validated(
    q: u32,
    d: usize,
    p: f64,
    method: Method,
    sample_budget: usize,
    validation_budget: usize,
    stream: Stream,
) -> Result<ThresholdResult> {
    if q < 1 {
        return Err(Error::invalid("q must be at least 1"));
    }
    if !(p > 0.0 && p < 1.0) || d == 0 {
        return Err(Error::invalid("need 0 < p < 1 and d >= 1"));
    }
    let tau = match method {
        Method::EmpiricalQuantile => {
            if sample_budget < MIN_EMPIRICAL_BUDGET {
                return Err(Error::invalid(format!("sample budget {sample_budget} below {MIN_EMPIRICAL_BUDGET}")));
            }
            empirical_quantile(sample_pair_deltas(q, d, sample_budget, stream.child(label::CALIBRATION)), p)
        }
        Method::Gaussian => unrescale(normal::quantile(p), q, d)?,
        Method::Edgeworth => unrescale(edgeworth_quantile(q, d, p)?, q, d)?,
        Method::ClosedForm => return Err(Error::invalid("closed_form applies to the sup norm only")),
    };
    let tau = tau.max(0.0);
    let achieved_p = if validation_budget == 0 {
        None
    } else {
        let val = sample_pair_deltas(q, d, validation_budget, stream.child(label::VALIDATION));
        let n = val.len() as f64;
        let hit = val.iter().filter(|x| **x <= tau).count() as f64 / n;
        let mut var = p * (1.0 - p) / n;
        if method == Method::EmpiricalQuantile {
            var += p * (1.0 - p) / sample_budget as f64;
        }
        Some(Estimate { value: hit, stderr: var.sqrt() })
    };
    Ok(ThresholdResult { tau, tau_hat: Some(rescale(tau, q, d)?), xi: None, method, achieved_p })
}

/// Threshold for a model configuration using its master seed. The sup norm
/// always uses the closed form.
pub fn calibrate(config: &ModelConfig, method: Method, sample_budget: usize, validation_budget: usize) -> Result<ThresholdResult> {
    config.validate()?;
    match config.norm {
        Norm::Linf => calibrate_threshold_linf(config.d, config.p),
        Norm::Lq(q) => calibrate_threshold_lq_validated(
            q,
            config.d,
            config.p,
            method,
            sample_budget,
            validation_budget,
            config.root_stream().child(label::CALIBRATION),
        ),
    }
}

/// Threshold used by the Monte Carlo experiments: the empirical quantile with
/// the default budget, or the closed form for the sup norm. No validation pass.
pub fn experiment_threshold(config: &ModelConfig) -> Result<ThresholdResult> {
    calibrate(config, Method::EmpiricalQuantile, DEFAULT_BUDGET, 0)
}
