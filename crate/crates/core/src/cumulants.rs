//! Joint cumulants, the per-dimension cycle cumulant and Edgeworth densities.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{coordinate_moments, CoordinateMoments};
use crate::error::{Error, Result};
use crate::normal;
use crate::quadrature;
use crate::rng::{self, label, Stream};
use crate::stats::{Estimate, Moments};

pub const MAX_ORDER: usize = 8;

/// One set partition of `[r]`, each block a bitmask.
pub type Partition = Vec<u16>;

fn build_partitions(r: usize) -> Vec<Partition> {
    if r == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    let mut a = vec![0usize; r];
    loop {
        let blocks = a.iter().max().unwrap() + 1;
        let mut masks = vec![0u16; blocks];
        for (i, &b) in a.iter().enumerate() {
            masks[b] |= 1 << i;
        }
        out.push(masks);
        // next restricted-growth string: bump the rightmost position that may grow
        let mut i = r - 1;
        loop {
            if i == 0 {
                return out;
            }
            let prefix_max = *a[..i].iter().max().unwrap();
            if a[i] <= prefix_max {
                a[i] += 1;
                for x in a.iter_mut().skip(i + 1) {
                    *x = 0;
                }
                break;
            }
            i -= 1;
        }
    }
}

/// All set partitions of `[r]`, cached per `r`.
pub fn set_partitions(r: usize) -> Result<&'static [Partition]> {
    static CACHE: [OnceLock<Vec<Partition>>; MAX_ORDER + 1] = [const { OnceLock::new() }; MAX_ORDER + 1];
    if r > MAX_ORDER {
        return Err(Error::UnsupportedOrder(r));
    }
    Ok(CACHE[r].get_or_init(|| build_partitions(r)))
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Möbius inversion over set partitions given a table of joint moments
/// indexed by non-empty subset mask (`table[mask]`, entry 0 unused).
pub fn cumulant_from_moment_table(table: &[f64], r: usize) -> Result<f64> {
    let parts = set_partitions(r)?;
    let mut acc = 0.0;
    for pi in parts {
        let b = pi.len();
        let sign = if b % 2 == 1 { 1.0 } else { -1.0 };
        let prod: f64 = pi.iter().map(|m| table[*m as usize]).product();
        acc += sign * factorial(b - 1) * prod;
    }
    Ok(acc)
}

/// Joint cumulant of `X_1..X_r` from an oracle returning `E[∏_{j∈B} X_j]`
/// for a subset given as a bitmask.
pub fn joint_cumulant_from_moments<F: Fn(u16) -> f64>(moment_oracle: F, r: usize) -> Result<f64> {
    if r > MAX_ORDER {
        return Err(Error::UnsupportedOrder(r));
    }
    let mut table = vec![0.0; 1 << r];
    for (mask, slot) in table.iter_mut().enumerate().skip(1) {
        *slot = moment_oracle(mask as u16);
    }
    cumulant_from_moment_table(&table, r)
}

/// Multi-index `s = (s_1, …, s_k)` selecting `s_j` copies of variable `j`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CumulantIndex {
    pub s: Vec<usize>,
}

impl CumulantIndex {
    pub fn new(s: Vec<usize>) -> Result<Self> {
        if s.iter().sum::<usize>() == 0 {
            return Err(Error::invalid("cumulant index must have |s| >= 1"));
        }
        Ok(CumulantIndex { s })
    }

    pub fn order(&self) -> usize {
        self.s.iter().sum()
    }

    pub fn is_pure(&self) -> bool {
        self.s.iter().filter(|x| **x > 0).count() == 1
    }

    pub fn is_mixed(&self) -> bool {
        self.s.iter().filter(|x| **x > 0).count() >= 2
    }

    /// Variable list with repetition, e.g. `(2,1,0)` gives `[0, 0, 1]`.
    pub fn expand(&self) -> Vec<usize> {
        self.s.iter().enumerate().flat_map(|(j, &c)| std::iter::repeat_n(j, c)).collect()
    }
}

/// Row-major trials × variables matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Samples {
    cols: usize,
    data: Vec<f64>,
}

impl Samples {
    pub fn new(cols: usize, data: Vec<f64>) -> Result<Self> {
        if cols == 0 || data.len() % cols != 0 {
            return Err(Error::invalid("sample data length must be a multiple of the column count"));
        }
        Ok(Samples { cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged sample rows"));
        }
        Samples::new(cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.cols
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.cols..(t + 1) * self.cols]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Samples {
        Samples { cols: self.cols, data: self.data.iter().map(|x| f(*x)).collect() }
    }

    /// Element-wise sum of two equally shaped sample sets.
    pub fn add(&self, o: &Samples) -> Result<Samples> {
        if self.cols != o.cols || self.data.len() != o.data.len() {
            return Err(Error::invalid("shape mismatch"));
        }
        Ok(Samples { cols: self.cols, data: self.data.iter().zip(&o.data).map(|(a, b)| a + b).collect() })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CumulantEstimate {
    pub value: f64,
    pub stderr: f64,
    /// A selected column had zero sample variance.
    pub degenerate: bool,
}

pub const DEFAULT_BOOTSTRAP: usize = 200;

fn accumulate_products(row: &[f64], vars: &[usize], sums: &mut [f64], prod: &mut [f64]) {
    prod[0] = 1.0;
    for mask in 1..sums.len() {
        let low = mask.trailing_zeros() as usize;
        prod[mask] = prod[mask & (mask - 1)] * row[vars[low]];
        sums[mask] += prod[mask];
    }
}

fn plug_in(samples: &Samples, vars: &[usize], rows: impl Iterator<Item = usize>) -> Result<f64> {
    let r = vars.len();
    let mut sums = vec![0.0; 1 << r];
    let mut prod = vec![0.0; 1 << r];
    let mut n = 0usize;
    for t in rows {
        accumulate_products(samples.row(t), vars, &mut sums, &mut prod);
        n += 1;
    }
    sums.iter_mut().for_each(|s| *s /= n as f64);
    cumulant_from_moment_table(&sums, r)
}

/// Plug-in estimate of `κ_s` with a bootstrap standard error
/// (200 resamples on a fixed stream).
pub fn sample_cumulant(samples: &Samples, index: &CumulantIndex) -> Result<CumulantEstimate> {
    sample_cumulant_with(samples, index, DEFAULT_BOOTSTRAP, Stream::root(0).child(label::BOOTSTRAP))
}

pub fn sample_cumulant_with(samples: &Samples, index: &CumulantIndex, resamples: usize, stream: Stream) -> Result<CumulantEstimate> {
    if index.s.len() != samples.cols() {
        return Err(Error::invalid("index length must equal the number of columns"));
    }
    let vars = index.expand();
    if vars.len() > 6 {
        return Err(Error::invalid("sample cumulants limited to |s| <= 6"));
    }
    let n = samples.rows();
    if n < 100 {
        return Err(Error::invalid("need at least 100 trials"));
    }
    let value = plug_in(samples, &vars, 0..n)?;
    let degenerate = index.s.iter().enumerate().filter(|(_, c)| **c > 0).any(|(j, _)| {
        let m = Moments::from_slice(&(0..n).map(|t| samples.row(t)[j]).collect::<Vec<_>>());
        m.variance() == 0.0
    });
    if degenerate {
        return Ok(CumulantEstimate { value, stderr: f64::INFINITY, degenerate });
    }
    let boots: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut r = stream.child(b as u64).rng();
            let idx: Vec<usize> = (0..n).map(|_| (rng::unit(&mut r) * n as f64) as usize).collect();
            plug_in(samples, &vars, idx.into_iter())
        })
        .collect::<Result<_>>()?;
    let stderr = Moments::from_slice(&boots).variance().sqrt();
    Ok(CumulantEstimate { value, stderr, degenerate })
}

const QUAD_TOL: f64 = 1e-11;
const QUAD_MAX_EVALS: usize = 10_000_000;

fn centered_power(t: f64, q: u32, mu: f64) -> f64 {
    t.powi(q as i32) - mu
}

/// `E[γ(e)]` for a single edge, by quadrature; zero up to rounding.
pub fn single_gamma_moment(q: u32) -> Result<f64> {
    let m = coordinate_moments(q)?;
    let r = quadrature::integrate(|x| centered_power(x.abs(), q, m.mu), -0.5, 0.5, &[0.0], QUAD_TOL, QUAD_MAX_EVALS)?;
    Ok(r.value)
}

/// `E[γ(e1)γ(e2)γ(e3)]` in one dimension with vertex 1 pinned at the origin.
///
/// The integrand is smooth away from `x = 0`, `y = 0`, `y = x` and the wrap
/// lines `y = x ± 1/2`, which are passed as breakpoints.
pub fn triangle_gamma_moment(q: u32) -> Result<f64> {
    let m = coordinate_moments(q)?;
    let g = |t: f64| centered_power(t, q, m.mu);
    let r = quadrature::integrate_2d(
        |x, y| {
            let t = (x - y).abs();
            g(x.abs()) * g(y.abs()) * g(t.min(1.0 - t))
        },
        (-0.5, 0.5),
        &[0.0],
        (-0.5, 0.5),
        |x| vec![0.0, x, x - 0.5, x + 0.5],
        QUAD_TOL,
        QUAD_MAX_EVALS,
    )?;
    if r.value >= 0.0 {
        return Err(Error::Numerical { what: format!("triangle moment for q={q} is not negative"), achieved: r.error });
    }
    Ok(r.value)
}

/// Monte Carlo estimate of `E[∏_j γ(e_j)]` around a `k`-cycle in one dimension.
pub fn cycle_gamma_moment_mc(q: u32, k: usize, samples: usize, stream: Stream) -> Result<Estimate> {
    if k < 2 {
        return Err(Error::invalid("cycle length must be at least 2"));
    }
    let m = coordinate_moments(q)?;
    const CH: usize = 1 << 16;
    let chunks = samples.div_ceil(CH);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = stream.child(c as u64).rng();
            let mut acc = Moments::default();
            let mut x = vec![0.0; k];
            for _ in 0..CH.min(samples - c * CH) {
                x.iter_mut().for_each(|v| *v = rng::torus_coord(&mut r));
                let mut prod = 1.0;
                for j in 0..k {
                    let t = (x[j] - x[(j + 1) % k]).abs();
                    prod *= centered_power(t.min(1.0 - t), q, m.mu);
                }
                acc.push(prod);
            }
            acc
        })
        .collect();
    let mut all = Moments::default();
    parts.iter().for_each(|p| all.merge(p));
    Ok(all.estimate())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleKappa {
    /// Per-dimension cumulant `(ζσ)^{-k} E[∏ γ(e_j)]`.
    pub rho: Estimate,
    /// Order-k cumulant of the normalized sum, `d^{-(k-2)/2} ρ`.
    pub kappa_d: Estimate,
}

pub const DEFAULT_KAPPA_MC: usize = 4_000_000;

pub fn cycle_kappa(q: u32, k: usize, d: usize, zeta: f64) -> Result<CycleKappa> {
    cycle_kappa_with(q, k, d, zeta, DEFAULT_KAPPA_MC, Stream::root(0).child(label::KAPPA))
}

/// As [`cycle_kappa`], with an explicit Monte Carlo budget for `k >= 4`.
pub fn cycle_kappa_with(q: u32, k: usize, d: usize, zeta: f64, mc_samples: usize, stream: Stream) -> Result<CycleKappa> {
    if zeta < 1.0 || d == 0 {
        return Err(Error::invalid("need zeta >= 1 and d >= 1"));
    }
    let m = coordinate_moments(q)?;
    let raw = match k {
        0 | 1 => return Err(Error::invalid("cycle length must be at least 2")),
        2 => Estimate::exact(m.sigma2),
        3 => Estimate::exact(triangle_gamma_moment(q)?),
        _ => cycle_gamma_moment_mc(q, k, mc_samples, stream.child(k as u64))?,
    };
    let scale = (zeta * m.sigma()).powi(-(k as i32));
    let rho = Estimate { value: raw.value * scale, stderr: raw.stderr * scale };
    let dk = (d as f64).powf(-((k as f64) - 2.0) / 2.0);
    Ok(CycleKappa { rho, kappa_d: Estimate { value: rho.value * dk, stderr: rho.stderr * dk } })
}

/// Rescaled edge distances `r(j) = Σ_i (Δ_i(e_j) − μ)/(σ√d)` around a
/// `k`-cycle, one row per trial.
pub fn sample_cycle_rescaled(q: u32, k: usize, d: usize, trials: usize, stream: Stream) -> Result<Samples> {
    let m = coordinate_moments(q)?;
    let norm = m.sigma() * (d as f64).sqrt();
    let rows: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut r = stream.child(t as u64).rng();
            let mut acc = vec![0.0; k];
            for _ in 0..d {
                let x: Vec<f64> = (0..k).map(|_| rng::torus_coord(&mut r)).collect();
                for j in 0..k {
                    let t = (x[j] - x[(j + 1) % k]).abs();
                    acc[j] += centered_power(t.min(1.0 - t), q, m.mu);
                }
            }
            acc.iter().map(|a| a / norm).collect()
        })
        .collect();
    Samples::from_rows(&rows)
}

/// Univariate Edgeworth density of the rescaled distance.
///
/// `order = 2` is the Gaussian; each further order adds one correction term
/// built from the standardized cumulants of `U^q`.
pub fn edgeworth_marginal_density(x: f64, q: u32, d: usize, order: usize) -> Result<f64> {
    if !(2..=4).contains(&order) {
        return Err(Error::invalid("Edgeworth order must be 2, 3 or 4"));
    }
    let (k3, k4) = coordinate_moments(q)?.standardized();
    let df = d as f64;
    let mut corr = 1.0;
    if order >= 3 {
        corr += k3 / 6.0 * normal::hermite(3, x) / df.sqrt();
    }
    if order >= 4 {
        corr += (k4 / 24.0 * normal::hermite(4, x) + k3 * k3 / 72.0 * normal::hermite(6, x)) / df;
    }
    Ok(normal::pdf(x) * corr)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeworthParams {
    pub d: usize,
    pub k: usize,
    /// Per-dimension cycle cumulant (ρ from [`cycle_kappa`]).
    pub kappa: f64,
    pub zeta: f64,
    pub order: usize,
}

/// Ground state `∏ f(x_j)` plus the leading mixed-cumulant correction
/// `(−1)^k κ d^{−(k−2)/2} ∏ φ'(x_j)`.
pub fn edgeworth_joint_leading(x: &[f64], params: &EdgeworthParams, q: u32) -> Result<f64> {
    if params.k < 2 || x.len() != params.k || params.d == 0 || params.zeta < 1.0 {
        return Err(Error::invalid("need k >= 2, x of length k, d >= 1, zeta >= 1"));
    }
    let mut f_ind = 1.0;
    for &xj in x {
        f_ind *= edgeworth_marginal_density(xj, q, params.d, params.order)?;
    }
    Ok(f_ind + joint_correction(x, params))
}

/// The correction term alone.
pub fn joint_correction(x: &[f64], params: &EdgeworthParams) -> f64 {
    let k = params.k as i32;
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    let dk = (params.d as f64).powf(-(f64::from(k) - 2.0) / 2.0);
    sign * params.kappa * dk * x.iter().map(|v| normal::pdf_deriv(*v)).product::<f64>()
}

/// Density of the rescaled single-edge distance by Fourier inversion of
/// `C(t/√d)^d`, where `C` is the characteristic function of `(U^q − μ)/σ`.
///
/// `C` is evaluated once at the nodes of a composite 15-point rule in `t`;
/// each density evaluation is then a weighted cosine/sine sum. For `d = 1`
/// the density is available in closed form and is used directly.
#[derive(Clone, Debug)]
pub struct MarginalOracle {
    q: u32,
    d: usize,
    moments: CoordinateMoments,
    nodes: Vec<(f64, f64, f64, f64)>,
    /// `|C(T)|` at the truncation point.
    pub truncation: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub density: f64,
    /// Set when `|x| > 15`, where the value is reported as 0.
    pub underflow: bool,
}

const T_PANEL: f64 = 0.1;
const T_CAP: f64 = 4000.0;
const CF_FLOOR: f64 = 1e-17;

/// Characteristic function of `(U^q − μ)/σ` at `s`, as `(re, im)`.
fn coordinate_cf(s: f64, m: &CoordinateMoments) -> (f64, f64) {
    let sigma = m.sigma();
    let q = m.q as i32;
    let range = s.abs() * 0.5f64.powi(q) / sigma;
    let panels = range.ceil() as usize + 4;
    let h = 0.5 / panels as f64;
    let (mut re, mut im) = (0.0, 0.0);
    let mut add = |u: f64, w: f64| {
        let ph = s * (u.powi(q) - m.mu) / sigma;
        re += w * ph.cos();
        im += w * ph.sin();
    };
    for p in 0..panels {
        let c = (p as f64 + 0.5) * h;
        let hh = 0.5 * h;
        add(c, WGK15[7] * hh);
        for j in 0..7 {
            add(c - hh * XGK15[j], WGK15[j] * hh);
            add(c + hh * XGK15[j], WGK15[j] * hh);
        }
    }
    (2.0 * re, 2.0 * im)
}

const XGK15: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK15: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

fn cf_power(t: f64, m: &CoordinateMoments, d: usize) -> (f64, f64) {
    let (re, im) = coordinate_cf(t / (d as f64).sqrt(), m);
    let r = (re * re + im * im).sqrt().powi(d as i32);
    let th = im.atan2(re) * d as f64;
    (r * th.cos(), r * th.sin())
}

impl MarginalOracle {
    pub fn new(q: u32, d: usize) -> Result<Self> {
        if d == 0 || d > 4096 {
            return Err(Error::invalid("oracle supports 1 <= d <= 4096"));
        }
        let moments = coordinate_moments(q)?;
        let mut nodes = Vec::new();
        let mut truncation = 0.0;
        if d > 1 {
            let panel_nodes = |a: f64| {
                let hh = 0.5 * T_PANEL;
                let c = a + hh;
                let mut v = vec![(c, WGK15[7] * hh)];
                for j in 0..7 {
                    v.push((c - hh * XGK15[j], WGK15[j] * hh));
                    v.push((c + hh * XGK15[j], WGK15[j] * hh));
                }
                v
            };
            let mut a = 0.0;
            let mut quiet = 0.0;
            while a < T_CAP {
                let pts: Vec<(f64, f64, f64, f64)> = panel_nodes(a)
                    .into_par_iter()
                    .map(|(t, w)| {
                        let (re, im) = cf_power(t, &moments, d);
                        (t, w, re, im)
                    })
                    .collect();
                let mag = pts.iter().map(|p| p.2.hypot(p.3)).fold(0.0, f64::max);
                nodes.extend(pts);
                a += T_PANEL;
                truncation = mag;
                if mag < CF_FLOOR {
                    quiet += T_PANEL;
                    if quiet >= 1.0 {
                        break;
                    }
                } else {
                    quiet = 0.0;
                }
            }
        }
        Ok(MarginalOracle { q, d, moments, nodes, truncation })
    }

    pub fn eval(&self, x: f64) -> OracleValue {
        if x.abs() > 15.0 {
            return OracleValue { density: 0.0, underflow: true };
        }
        if self.d == 1 {
            // change of variables from U ~ Unif(0, 1/2) through v = u^q
            let m = &self.moments;
            let v = m.mu + m.sigma() * x;
            let top = 0.5f64.powi(self.q as i32);
            let density = if v > 0.0 && v < top {
                let qf = f64::from(self.q);
                m.sigma() * 2.0 / qf * v.powf(1.0 / qf - 1.0)
            } else {
                0.0
            };
            return OracleValue { density, underflow: false };
        }
        let s: f64 = self.nodes.iter().map(|(t, w, re, im)| w * (re * (t * x).cos() + im * (t * x).sin())).sum();
        OracleValue { density: s / std::f64::consts::PI, underflow: false }
    }
}

/// One-shot oracle evaluation; build a [`MarginalOracle`] for repeated use.
pub fn marginal_density_oracle(x: f64, q: u32, d: usize) -> Result<OracleValue> {
    Ok(MarginalOracle::new(q, d)?.eval(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bell_numbers() {
        let bell = [1, 1, 2, 5, 15, 52, 203, 877, 4140];
        for (r, b) in bell.iter().enumerate() {
            assert_eq!(set_partitions(r).unwrap().len(), *b);
        }
        assert!(matches!(set_partitions(9), Err(Error::UnsupportedOrder(9))));
    }

    #[test]
    fn partitions_cover_exactly() {
        for pi in set_partitions(5).unwrap() {
            let mut seen = 0u16;
            for b in pi {
                assert_eq!(seen & b, 0);
                seen |= b;
            }
            assert_eq!(seen, 0b11111);
        }
    }

    #[test]
    fn covariance_examples() {
        // X, Y independent, zero mean, unit variance
        let indep = |m: u16| match m {
            0b01 | 0b10 => 0.0,
            0b11 => 0.0,
            _ => unreachable!(),
        };
        assert_eq!(joint_cumulant_from_moments(indep, 2).unwrap(), 0.0);
        let same = |m: u16| if m == 0b11 { 1.0 } else { 0.0 };
        assert_eq!(joint_cumulant_from_moments(same, 2).unwrap(), 1.0);
        assert!(joint_cumulant_from_moments(|_| 0.0, 9).is_err());
    }

    #[test]
    fn index_classification() {
        let i = CumulantIndex::new(vec![2, 1, 0]).unwrap();
        assert!(i.is_mixed() && !i.is_pure());
        assert_eq!(i.expand(), vec![0, 0, 1]);
        assert!(CumulantIndex::new(vec![0, 3]).unwrap().is_pure());
        assert!(CumulantIndex::new(vec![0, 0]).is_err());
    }

    #[test]
    fn kappa_scaling_exact() {
        let a = cycle_kappa(1, 3, 100, 1.0).unwrap();
        let b = cycle_kappa(1, 3, 400, 1.0).unwrap();
        assert!((b.kappa_d.value / a.kappa_d.value - 0.5).abs() < 1e-14);
        let z = cycle_kappa(1, 3, 100, 2.0).unwrap();
        assert!((z.rho.value / a.rho.value - 0.125).abs() < 1e-14);
        let two = cycle_kappa(2, 2, 10, 1.0).unwrap();
        assert!((two.rho.value - 1.0).abs() < 1e-14);
    }

    #[test]
    fn edgeworth_basics() {
        assert!((edgeworth_marginal_density(0.0, 2, 10, 2).unwrap() - 0.398_942_3).abs() < 1e-7);
        for x in [-2.0, 0.3, 1.7] {
            assert_eq!(edgeworth_marginal_density(x, 1, 64, 3).unwrap(), normal::pdf(x));
        }
        assert!(edgeworth_marginal_density(0.0, 1, 1, 5).is_err());
        let p = EdgeworthParams { d: 64, k: 3, kappa: 0.0, zeta: 1.0, order: 3 };
        let x = [0.1, -0.4, 1.2];
        let f_ind: f64 = x.iter().map(|v| edgeworth_marginal_density(*v, 2, 64, 3).unwrap()).product();
        assert_eq!(edgeworth_joint_leading(&x, &p, 2).unwrap(), f_ind);
        let p = EdgeworthParams { kappa: -0.6, ..p };
        assert_eq!(joint_correction(&[0.0, 0.5, 1.0], &p), 0.0);
    }

    #[test]
    fn oracle_d1_is_standardized_uniform() {
        let o = MarginalOracle::new(1, 1).unwrap();
        let h = 1.0 / (48.0f64).sqrt() * 2.0;
        assert!((o.eval(0.5).density - h).abs() < 1e-12);
        assert_eq!(o.eval(2.0).density, 0.0);
        assert!(o.eval(16.0).underflow);
    }
}
