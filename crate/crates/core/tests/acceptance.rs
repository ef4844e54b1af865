//! Acceptance suite. Prints one PASS/FAIL line per check and exits non-zero
//! when a check outside `KNOWN_RED` fails. An optional argument restricts the
//! run to criteria whose name contains it.

mod common;

use std::time::Instant;

use rand::Rng;
use rgg_torus::calibration::{self, calibrate_threshold_linf, coordinate_moments, experiment_threshold, Method};
use rgg_torus::cumulants::{edgeworth_marginal_density, triangle_gamma_moment, MarginalOracle};
use rgg_torus::rng::Stream;
use rgg_torus::signed_stats::{self, EdgePattern, SweepOptions};
use rgg_torus::spectral::{self, Regime};
use rgg_torus::stats::{binomial, median, Moments};
use rgg_torus::trace_core;
use rgg_torus::tv_bound;
use rgg_torus::{normal, torus, ModelConfig, Norm};

const SEED: u64 = 7;

/// Checks expected to fail at desk scale; see the decisions ledger.
const KNOWN_RED: &[&str] = &["test_power/indistinguishable", "linf_spectral/crossover", "trace_combinatorics/literal_identity"];

struct Report {
    unexpected: Vec<String>,
}

impl Report {
    fn check(&mut self, name: &str, pass: bool, detail: String) {
        let red = KNOWN_RED.contains(&name);
        let tag = match (pass, red) {
            (true, _) => "",
            (false, true) => " [known red]",
            (false, false) => " [unexpected]",
        };
        common::line(name, pass, &format!("{detail}{tag}"));
        if !pass && !red {
            self.unexpected.push(name.to_string());
        }
    }
}

fn moments(r: &mut Report) {
    let mut worst: f64 = 0.0;
    for q in 1..=6 {
        let m = coordinate_moments(q).unwrap();
        let mu = common::power_moment_oracle(q);
        let s2 = common::power_moment_oracle(2 * q) - mu * mu;
        worst = worst.max((m.mu - mu).abs()).max((m.sigma2 - s2).abs());
    }
    let m1 = coordinate_moments(1).unwrap();
    let exact = (m1.mu - 0.25).abs() < 1e-15 && (m1.sigma2 - 1.0 / 48.0).abs() < 1e-15;
    r.check("moments", worst <= 1e-12 && exact, format!("max deviation {worst:.2e} over q=1..6; q=1 mu={} sigma2={}", m1.mu, m1.sigma2));
}

fn calibration_cells(r: &mut Report) {
    let budget = 2_000_000;
    let mut all_hit = true;
    let mut all_decay = true;
    let mut details = Vec::new();
    for q in [1u32, 2] {
        for p in [0.1, 0.5] {
            let z = normal::quantile(p);
            // standard error of an empirical p-quantile on the rescaled axis
            let qse = (p * (1.0 - p) / budget as f64).sqrt() / normal::pdf(z);
            let mut gaps = Vec::new();
            for d in [64usize, 1024] {
                let cfg = ModelConfig::new(100, d, p, Norm::Lq(q), SEED).unwrap();
                let th = calibration::calibrate(&cfg, Method::EmpiricalQuantile, budget, budget).unwrap();
                let a = th.achieved_p.unwrap();
                all_hit &= a.agrees_with(p, 3.0);
                gaps.push(th.tau_hat.unwrap() - z);
                details.push(format!("q={q} d={d} p={p} achieved={:.5}±{:.5}", a.value, a.stderr));
            }
            let decays = gaps[1].abs() < gaps[0].abs() || gaps.iter().all(|g| g.abs() <= 3.0 * qse);
            all_decay &= decays;
            details.push(format!("q={q} p={p} gap d=64 {:+.5} d=1024 {:+.5} (quantile se {qse:.5})", gaps[0], gaps[1]));
        }
    }
    r.check("calibration/achieved_p", all_hit, details.iter().filter(|s| s.contains("achieved")).cloned().collect::<Vec<_>>().join("; "));
    r.check("calibration/rescaled_gap", all_decay, details.iter().filter(|s| s.contains("gap")).cloned().collect::<Vec<_>>().join("; "));
}

fn triangle_cumulant(r: &mut Report) {
    let mut ok = true;
    let mut parts = Vec::new();
    for q in 1..=3 {
        let quad = triangle_gamma_moment(q).unwrap();
        let (mc, se) = common::triangle_gamma_mc(q, 100_000_000, 1000 + u64::from(q));
        ok &= quad < 0.0 && (quad - mc).abs() <= 3.0 * se;
        parts.push(format!("q={q} quadrature {quad:.6e} mc {mc:.6e}±{se:.1e}"));
    }
    r.check("triangle_cumulant", ok, parts.join("; "));
}

fn signed_triangle_identities(r: &mut Report) {
    let mut rng = Stream::root(SEED).child(1).rng();
    let mut worst: f64 = 0.0;
    for t in 0..100u64 {
        let n = rng.random_range(3..=64);
        let p: f64 = rng.random_range(0.0..1.0);
        let g = torus::sample_gnp_from(n, p, Stream::root(SEED).child(2).child(t));
        let fast = signed_stats::signed_triangle_count(&g, p);
        let slow = common::triple_loop_signed_triangles(&g, p);
        worst = worst.max((fast - slow).abs() / slow.abs().max(1.0));
    }
    r.check("signed_triangles/trace_formula", worst <= 1e-9, format!("max relative deviation {worst:.2e} over 100 graphs"));
    let mut m = Moments::default();
    for t in 0..500 {
        let g = torus::sample_gnp_from(100, 0.5, Stream::root(SEED).child(3).child(t));
        m.push(signed_stats::signed_triangle_count(&g, 0.5));
    }
    let target = binomial(100, 3) * 0.5f64.powi(6);
    let rel = m.variance() / target - 1.0;
    r.check(
        "signed_triangles/gnp_null",
        m.mean().abs() <= 3.0 * m.stderr() && rel.abs() <= 0.2,
        format!("mean {:.2}±{:.2}, variance {:.1} vs {target:.1} ({:+.1}%)", m.mean(), m.stderr(), m.variance(), 100.0 * rel),
    );
}

fn detection_scaling(r: &mut Report) {
    let means: Vec<_> = [64usize, 256, 1024]
        .iter()
        .map(|&d| {
            let cfg = ModelConfig::new(100, d, 0.3, Norm::Lq(1), SEED).unwrap();
            signed_stats::estimate_pattern_mean(&cfg, &EdgePattern::cycle(3).unwrap(), 1_000_000).unwrap()
        })
        .collect();
    let positive = means.iter().all(|m| m.mean > 3.0 * m.stderr);
    let ratios: Vec<f64> = means.windows(2).map(|w| w[0].mean / w[1].mean).collect();
    let in_band = ratios.iter().all(|x| (1.4..=2.6).contains(x));
    let shown: Vec<String> = means.iter().map(|m| format!("{:.3e}±{:.1e}", m.mean, m.stderr)).collect();
    r.check("detection_scaling", positive && in_band, format!("means {shown:?}, ratios {ratios:.3?}"));
}

fn test_power(r: &mut Report) {
    let base = ModelConfig::new(200, 64, 0.5, Norm::Lq(2), SEED).unwrap();
    let opts = SweepOptions::default();
    let row = &signed_stats::power_sweep(&base, &[64], 100, &opts).unwrap()[0];
    r.check("test_power/distinguishable", row.power >= 0.9 && row.fpr <= 0.1, format!("d=64 power {} fpr {}", row.power, row.fpr));
    let row = &signed_stats::power_sweep(&base, &[200_000], 50, &opts).unwrap()[0];
    let f = (row.power + row.fpr) / 2.0;
    let se = (2.0 * f * (1.0 - f) / 50.0).sqrt();
    r.check(
        "test_power/indistinguishable",
        (row.power - row.fpr).abs() <= 3.0 * se,
        format!("d=2e5 power {} fpr {} (3 sigma = {:.3}); statistic mean {:.1}±{:.1}", row.power, row.fpr, 3.0 * se, row.statistic_mean, row.statistic_stderr),
    );
}

fn rgg_spectrum(cfg: &ModelConfig, tau: f64, trial: u64) -> spectral::SpectrumReport {
    let g = signed_stats::sample_rgg(cfg, tau, Stream::root(SEED).child(cfg.d as u64).child(trial));
    spectral::spectrum(&spectral::center_adjacency(&g, cfg.p)).unwrap()
}

fn lambda2_median(cfg: &ModelConfig, trials: u64) -> f64 {
    let tau = experiment_threshold(cfg).unwrap().tau;
    median(&(0..trials).map(|t| rgg_spectrum(cfg, tau, t).lambda2_abs_max).collect::<Vec<_>>())
}

fn spectral_crossover(r: &mut Report) {
    let at = |d| ModelConfig::new(2000, d, 0.5, Norm::Lq(2), SEED).unwrap();
    let (lo, hi) = (lambda2_median(&at(16), 10), lambda2_median(&at(4096), 10));
    r.check("spectral_crossover/lambda2", lo >= 3.0 * hi, format!("median |lambda_2| d=16 {lo:.2}, d=4096 {hi:.2}, factor {:.2}", lo / hi));
    let cfg = at(32);
    let tau = experiment_threshold(&cfg).unwrap().tau;
    let counts: Vec<usize> = (0..20).map(|t| spectral::count_large_eigs(&rgg_spectrum(&cfg, tau, 100 + t), cfg.n, cfg.p, cfg.d, 2.0, Regime::Lq)).collect();
    let good = counts.iter().filter(|&&c| (8..=128).contains(&c)).count();
    r.check("spectral_crossover/count", good >= 18, format!("{good}/20 counts in [8, 128]: {counts:?}"));
}

fn linf_spectral(r: &mut Report) {
    let cfg = ModelConfig::new(2000, 8, 0.5, Norm::Linf, SEED).unwrap();
    let th = calibrate_threshold_linf(cfg.d, cfg.p).unwrap();
    let xi = th.xi.unwrap();
    let mut inter = 0usize;
    let mut counts = Vec::new();
    let mut lambda2 = Vec::new();
    for t in 0..10u64 {
        let pos = torus::sample_positions_from(cfg.n, cfg.d, Stream::root(SEED).child(cfg.d as u64).child(t));
        let g = torus::build_rgg(&pos, th.tau, cfg.norm);
        for i in 0..cfg.d {
            for y in spectral::arc_vectors_linf(&pos, i, xi).unwrap() {
                let minus = y.minus_support();
                inter += y.plus_support().iter().map(|&u| minus.iter().filter(|&&v| g.get(u, v)).count()).sum::<usize>();
            }
        }
        let s = spectral::spectrum(&spectral::center_adjacency(&g, cfg.p)).unwrap();
        counts.push(spectral::count_large_eigs(&s, cfg.n, cfg.p, cfg.d, 2.0, Regime::Linf));
        lambda2.push(s.lambda2_abs_max);
    }
    r.check("linf_spectral/inter_cluster", inter == 0, format!("{inter} inter-cluster edges over 10 graphs"));
    let good = counts.iter().filter(|&&c| c >= cfg.d * cfg.d / 4).count();
    r.check("linf_spectral/count", good >= 8, format!("{good}/10 trials with >= 16 eigenvalues >= np/(2d): {counts:?}"));
    let lo = median(&lambda2);
    let hi = lambda2_median(&ModelConfig { d: 1024, ..cfg }, 10);
    r.check("linf_spectral/crossover", lo >= 3.0 * hi, format!("median |lambda_2| d=8 {lo:.2}, d=1024 {hi:.2}, factor {:.2}", lo / hi));
}

fn arc_vectors(r: &mut Report) {
    let cfg = ModelConfig::new(2000, 16, 0.5, Norm::Lq(2), SEED).unwrap();
    let th = experiment_threshold(&cfg).unwrap();
    let pos = torus::sample_positions_from(cfg.n, cfg.d, Stream::root(SEED).child(16).child(0));
    let m = spectral::center_adjacency(&torus::build_rgg(&pos, th.tau, cfg.norm), cfg.p);
    let c = spectral::default_arc_halfwidth(2).unwrap();
    let ys: Vec<Vec<f64>> = (0..cfg.d).map(|i| spectral::arc_vector_q(&pos, i, c).unwrap().normalized()).collect();
    let rq: Vec<f64> = ys.iter().map(|y| spectral::rayleigh(&m, y).unwrap()).collect();
    let mean = rq.iter().sum::<f64>() / rq.len() as f64;
    let scale = 0.1 * cfg.n as f64 * cfg.p / (cfg.d as f64).sqrt();
    let gram = spectral::gram_offdiag(&ys).unwrap();
    let n = cfg.n as f64;
    let cap = 5.0 * n.ln() / n.sqrt();
    let pass = rq.iter().all(|x| *x > 0.0) && mean >= scale && gram <= cap;
    r.check("arc_vectors", pass, format!("min Rayleigh {:.2}, mean {mean:.2} (need {scale:.2}), Gram max {gram:.4} (cap {cap:.4})", rq.iter().cloned().fold(f64::INFINITY, f64::min)));
}

fn trace_combinatorics(r: &mut Report) {
    let mut rng = Stream::root(SEED).child(4).rng();
    let (mut structure, mut skeleton, mut literal, mut explained) = (0, 0, 0, 0);
    for _ in 0..1000 {
        let n = rng.random_range(1..=12);
        let m = rng.random_range(1..=16);
        let mut walk: Vec<usize> = (0..m).map(|_| rng.random_range(0..n)).collect();
        walk.push(walk[0]);
        let h = trace_core::walk_to_multigraph(&walk).unwrap();
        let rep = trace_core::contract_core(&h).unwrap();
        let core = &rep.core;
        let again = trace_core::contract_core(core).unwrap();
        if (rep.is_trivial() || (core.vertex_count() >= 2 && core.min_degree() >= 4)) && core.is_eulerian() && again.core == *core && again.s == 0 {
            structure += 1;
        }
        skeleton += usize::from(rep.skeleton_identity_holds(&h));
        if rep.identity_holds(&h) {
            literal += 1;
        } else if rep.degenerate_excess > 0 {
            explained += 1;
        }
    }
    r.check("trace_combinatorics/core_structure", structure == 1000, format!("{structure}/1000 walks: min degree, Eulerian, idempotent"));
    r.check("trace_combinatorics/skeleton_identity", skeleton == 1000, format!("{skeleton}/1000 walks"));
    r.check(
        "trace_combinatorics/literal_identity",
        literal == 1000,
        format!("{literal}/1000 walks; {explained} of the {} failures have parallel bundles of multiplicity >= 4", 1000 - literal),
    );
    let mut worst: f64 = 0.0;
    for t in 0..50u64 {
        let n = rng.random_range(1..=5);
        let m = [2, 4][t as usize % 2];
        let p: f64 = rng.random_range(0.0..1.0);
        let g = torus::sample_gnp_from(n, p, Stream::root(SEED).child(5).child(t));
        let fast = trace_core::trace_power(&spectral::center_adjacency(&g, p), m).unwrap();
        let slow = trace_core::brute_walk_sum(&g, p, m).unwrap();
        worst = worst.max((fast - slow).abs() / slow.abs().max(1.0));
    }
    r.check("trace_combinatorics/walk_sum", worst <= 1e-9, format!("max relative deviation {worst:.2e} over 50 instances"));
}

fn tv_bound_scaling(r: &mut Report) {
    let at = |d| ModelConfig::new(50, d, 0.3, Norm::Lq(2), SEED).unwrap();
    let est = |d, inner| {
        let cfg = at(d);
        tv_bound::k2k_moment_with(&cfg, 2, 10_000, inner, &experiment_threshold(&cfg).unwrap()).unwrap()
    };
    let (a, b) = (est(256, 1000), est(1024, 3000));
    let ratio = a.mean / b.mean;
    let se = ratio * ((a.stderr / a.mean).powi(2) + (b.stderr / b.mean).powi(2)).sqrt();
    r.check(
        "tv_bound/k2k_ratio",
        (2.4..=5.6).contains(&ratio),
        format!("E[gamma^2] d=256 {:.3e}±{:.1e}, d=1024 {:.3e}±{:.1e}, ratio {ratio:.2}±{se:.2}", a.mean, a.stderr, b.mean, b.stderr),
    );
    let reports: Vec<_> = [256usize, 1024, 4096].iter().map(|&d| tv_bound::tv_upper_bound(&ModelConfig::new(50, d, 0.2, Norm::Lq(2), SEED).unwrap(), 4, 10_000).unwrap()).collect();
    let mut ok = true;
    for w in reports.windows(2) {
        for (s, l) in w[0].terms.iter().zip(&w[1].terms) {
            ok &= l.value <= s.value + 3.0 * s.value_stderr.hypot(l.value_stderr);
        }
    }
    let shown: Vec<String> = reports.iter().map(|r| format!("[{}]", r.terms.iter().map(|t| format!("{:.3e}", t.value)).collect::<Vec<_>>().join(", "))).collect();
    r.check("tv_bound/monotone", ok, format!("terms j=2..4 at d=256,1024,4096: {}", shown.join(" ")));
}

fn edgeworth_density(r: &mut Report) {
    let grid: Vec<f64> = (0..=160).map(|i| -4.0 + 0.05 * i as f64).collect();
    let dev = |d| {
        let o = MarginalOracle::new(2, d).unwrap();
        grid.iter().map(|&x| (edgeworth_marginal_density(x, 2, d, 3).unwrap() - o.eval(x).density).abs()).fold(0.0, f64::max)
    };
    let (a, b) = (dev(16), dev(256));
    let q1 = grid.iter().all(|&x| edgeworth_marginal_density(x, 1, 64, 3).unwrap() == normal::pdf(x));
    r.check("edgeworth_density", b < a && q1, format!("q=2 max deviation d=16 {a:.3e}, d=256 {b:.3e}; q=1 order 3 equals Gaussian: {q1}"));
}

fn main() {
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: &[(&str, fn(&mut Report))] = &[
        ("moments", moments),
        ("calibration", calibration_cells),
        ("triangle_cumulant", triangle_cumulant),
        ("signed_triangles", signed_triangle_identities),
        ("detection_scaling", detection_scaling),
        ("test_power", test_power),
        ("spectral_crossover", spectral_crossover),
        ("linf_spectral", linf_spectral),
        ("arc_vectors", arc_vectors),
        ("trace_combinatorics", trace_combinatorics),
        ("tv_bound", tv_bound_scaling),
        ("edgeworth_density", edgeworth_density),
    ];
    let mut report = Report { unexpected: Vec::new() };
    for (name, run) in criteria {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let t = Instant::now();
        run(&mut report);
        println!("  ({name} took {:.1}s)", t.elapsed().as_secs_f64());
    }
    if !report.unexpected.is_empty() {
        eprintln!("unexpected failures: {:?}", report.unexpected);
        std::process::exit(1);
    }
}
