//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use rgg_torus::AdjacencyMatrix;

/// `∫_0^{1/2} 2 u^k du` by Romberg-extrapolated composite Simpson.
pub fn power_moment_oracle(k: u32) -> f64 {
    let simpson = |n: usize| {
        let h = 0.5 / n as f64;
        let f = |u: f64| 2.0 * u.powi(k as i32);
        let mut s = f(0.0) + f(0.5);
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    let (a, b) = (simpson(20_000), simpson(40_000));
    b + (b - a) / 15.0
}

/// Signed triangle count by a plain triple loop.
pub fn triple_loop_signed_triangles(adj: &AdjacencyMatrix, p: f64) -> f64 {
    let n = adj.n();
    let w = |u: usize, v: usize| if adj.get(u, v) { 1.0 - p } else { -p };
    let mut s = 0.0;
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                s += w(a, b) * w(b, c) * w(a, c);
            }
        }
    }
    s
}

/// Standard normal CDF by a 40-term Taylor series of erf (accurate for |x| <= 5).
pub fn normal_cdf_series(x: f64) -> f64 {
    let z = x / std::f64::consts::SQRT_2;
    let mut term = z;
    let mut sum = z;
    for n in 1..200 {
        term *= -z * z / n as f64;
        sum += term / (2 * n + 1) as f64;
    }
    0.5 + sum / std::f64::consts::PI.sqrt()
}

/// `E[γγγ]` for a triangle by plain Monte Carlo over three uniform points.
pub fn triangle_gamma_mc(q: u32, samples: usize, seed: u64) -> (f64, f64) {
    let mu = power_moment_oracle(q);
    let g = |a: f64, b: f64| {
        let t = (a - b).abs();
        t.min(1.0 - t).powi(q as i32) - mu
    };
    let mut r = rgg_torus::rng::Stream::root(seed).rng();
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        let (x, y, z) = (rgg_torus::rng::unit(&mut r), rgg_torus::rng::unit(&mut r), rgg_torus::rng::unit(&mut r));
        let v = g(x, y) * g(y, z) * g(x, z);
        s += v;
        s2 += v * v;
    }
    let n = samples as f64;
    let m = s / n;
    (m, ((s2 / n - m * m) / n).sqrt())
}

pub fn line(name: &str, pass: bool, detail: &str) {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}
