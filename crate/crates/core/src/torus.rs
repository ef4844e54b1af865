//! Latent positions on the torus, wrap-around distances and graph sampling.
//!
//! Coordinates live in `[-1/2, 1/2)`. For a finite exponent `q` the pair
//! distance is `Δ = Σ_i |x_i - y_i|_C^q` (no root taken); for the sup norm it
//! is the largest coordinate distance.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Norm used for the latent distance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Norm {
    Lq(u32),
    Linf,
}

impl Norm {
    pub fn q(self) -> Option<u32> {
        match self {
            Norm::Lq(q) => Some(q),
            Norm::Linf => None,
        }
    }

    pub fn is_inf(self) -> bool {
        matches!(self, Norm::Linf)
    }

    /// Label used in CSV output.
    pub fn label(self) -> &'static str {
        match self {
            Norm::Lq(_) => "lq",
            Norm::Linf => "linf",
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Norm::Lq(q) => write!(f, "{q}"),
            Norm::Linf => f.write_str("inf"),
        }
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if matches!(t.as_str(), "inf" | "infinity" | "linf") {
            return Ok(Norm::Linf);
        }
        match t.parse::<u32>() {
            Ok(q) if q >= 1 => Ok(Norm::Lq(q)),
            _ => Err(Error::invalid(format!("norm must be an integer q >= 1 or \"inf\", got {s:?}"))),
        }
    }
}

impl Serialize for Norm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Norm::Lq(q) => s.serialize_u32(*q),
            Norm::Linf => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Norm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(q) if (1..=u64::from(u32::MAX)).contains(&q) => Ok(Norm::Lq(q as u32)),
            Raw::Int(q) => Err(serde::de::Error::custom(format!("norm exponent {q} out of range"))),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Parameters of one RGG_q(n, d, p) experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n: usize,
    pub d: usize,
    pub p: f64,
    pub norm: Norm,
    #[serde(default)]
    pub master_seed: u64,
}

impl ModelConfig {
    pub fn new(n: usize, d: usize, p: f64, norm: Norm, master_seed: u64) -> Result<Self> {
        let c = ModelConfig { n, d, p, norm, master_seed };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::invalid(format!("p must lie in (0,1), got {}", self.p)));
        }
        if self.n < 2 {
            return Err(Error::invalid(format!("n must be at least 2, got {}", self.n)));
        }
        if self.d < 1 {
            return Err(Error::invalid("d must be at least 1"));
        }
        if self.norm == Norm::Lq(0) {
            return Err(Error::invalid("q must be at least 1"));
        }
        Ok(())
    }

    pub fn root_stream(&self) -> Stream {
        Stream::root(self.master_seed)
    }
}

/// Reduce a real number into `[-1/2, 1/2)`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let y = x - (x + 0.5).floor();
    // guards the rounding case where x + 0.5 lands just below an integer
    if y >= 0.5 {
        y - 1.0
    } else {
        y
    }
}

/// Circle distance for coordinates already in `[-1/2, 1/2)`.
#[inline(always)]
fn circ(a: f64, b: f64) -> f64 {
    let t = (a - b).abs();
    t.min(1.0 - t)
}

/// Wrap-around distance `min(|a-b|, 1-|a-b|)`; inputs are reduced mod 1 first.
pub fn circle_distance(a: f64, b: f64) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::invalid("circle_distance requires finite inputs"));
    }
    Ok(circ(wrap(a), wrap(b)))
}

#[inline(always)]
fn pow_q(t: f64, q: u32) -> f64 {
    match q {
        1 => t,
        2 => t * t,
        3 => t * t * t,
        _ => t.powi(q as i32),
    }
}

/// Sum of `circ(a_i, b_i)^q` with four independent accumulators.
#[inline]
fn lq_partial(a: &[f64], b: &[f64], q: u32) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..4 {
            acc[l] += pow_q(circ(x[l], y[l]), q);
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += pow_q(circ(*x, *y), q);
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn linf_partial(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max(circ(*x, *y)))
}

/// Above this dimension, per-pair sums are formed by pairwise (tree) summation.
pub const PAIRWISE_THRESHOLD: usize = 100_000;
const LEAF: usize = 1024;

fn lq_tree(a: &[f64], b: &[f64], q: u32) -> f64 {
    if a.len() <= LEAF {
        return lq_partial(a, b, q);
    }
    let h = a.len() / 2;
    lq_tree(&a[..h], &b[..h], q) + lq_tree(&a[h..], &b[h..], q)
}

/// Δ between two positions: Σ circ^q for finite q, max circ for L∞.
pub fn pair_distance(u: &[f64], v: &[f64], norm: Norm) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::invalid(format!("length mismatch: {} vs {}", u.len(), v.len())));
    }
    Ok(pair_distance_unchecked(u, v, norm))
}

#[inline]
pub(crate) fn pair_distance_unchecked(u: &[f64], v: &[f64], norm: Norm) -> f64 {
    match norm {
        Norm::Lq(q) if u.len() > PAIRWISE_THRESHOLD => lq_tree(u, v, q),
        Norm::Lq(q) => lq_partial(u, v, q),
        Norm::Linf => linf_partial(u, v),
    }
}

/// n×d latent coordinates, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Positions {
    n: usize,
    d: usize,
    coords: Vec<f64>,
}

impl Positions {
    /// Builds positions from row-major data, wrapping every entry into range.
    pub fn from_rows(n: usize, d: usize, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != n * d {
            return Err(Error::invalid(format!("expected {} coordinates, got {}", n * d, coords.len())));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("coordinates must be finite"));
        }
        Ok(Positions { n, d, coords: coords.into_iter().map(wrap).collect() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, v: usize) -> &[f64] {
        &self.coords[v * self.d..(v + 1) * self.d]
    }

    pub fn coord(&self, v: usize, i: usize) -> f64 {
        self.coords[v * self.d + i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    /// Adds `shift` to every row and re-wraps.
    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.d {
            return Err(Error::invalid("shift length must equal d"));
        }
        let coords = self
            .coords
            .chunks_exact(self.d)
            .flat_map(|r| r.iter().zip(shift).map(|(x, s)| wrap(x + s)))
            .collect();
        Ok(Positions { n: self.n, d: self.d, coords })
    }
}

/// Symmetric boolean adjacency matrix with empty diagonal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    n: usize,
    bits: Vec<bool>,
}

impl AdjacencyMatrix {
    pub fn empty(n: usize) -> Self {
        AdjacencyMatrix { n, bits: vec![false; n * n] }
    }

    pub fn complete(n: usize) -> Self {
        let mut a = Self::empty(n);
        for u in 0..n {
            for v in 0..n {
                a.bits[u * n + v] = u != v;
            }
        }
        a
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut a = Self::empty(n);
        for &(u, v) in edges {
            if u >= n || v >= n || u == v {
                return Err(Error::invalid(format!("bad edge ({u},{v}) for n={n}")));
            }
            a.set(u, v, true);
        }
        Ok(a)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> bool {
        self.bits[u * self.n + v]
    }

    pub fn set(&mut self, u: usize, v: usize, present: bool) {
        if u == v {
            return;
        }
        self.bits[u * self.n + v] = present;
        self.bits[v * self.n + u] = present;
    }

    pub fn edge_count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count() / 2
    }

    pub fn degree(&self, u: usize) -> usize {
        self.bits[u * self.n..(u + 1) * self.n].iter().filter(|b| **b).count()
    }

    /// Edges `(u, v)` with `u < v` in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| ((u + 1)..self.n).filter(move |&v| self.get(u, v)).map(move |v| (u, v)))
    }

    /// One "u v" line per edge, 0-indexed, u < v.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        for (u, v) in self.edges() {
            s.push_str(&format!("{u} {v}\n"));
        }
        s
    }

    pub fn parse_edge_list(n: usize, text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace().map(str::parse::<usize>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(u)), Some(Ok(v)), None) => edges.push((u, v)),
                _ => return Err(Error::invalid(format!("line {}: expected \"u v\"", ln + 1))),
            }
        }
        Self::from_edges(n, &edges)
    }
}

/// Samples i.i.d. uniform positions from an explicit stream.
pub fn sample_positions_from(n: usize, d: usize, stream: Stream) -> Positions {
    let mut r = stream.rng();
    let coords = (0..n * d).map(|_| rng::torus_coord(&mut r)).collect();
    Positions { n, d, coords }
}

/// Samples the configured positions on stream `stream_id` below the master seed.
pub fn sample_positions(config: &ModelConfig, stream_id: u64) -> Positions {
    sample_positions_from(config.n, config.d, config.root_stream().child(stream_id))
}

const COORD_BLOCK: usize = 128;

/// All pair distances `Δ(u, v)` for `u < v`, one vector per row `u`.
///
/// Coordinates are processed in blocks so the working set stays in cache; the
/// per-block partial sums are then added in block order.
pub fn pairwise_distances(pos: &Positions, norm: Norm) -> Vec<Vec<f64>> {
    let (n, d) = (pos.n, pos.d);
    let mut acc: Vec<Vec<f64>> = (0..n).map(|u| vec![0.0; n - u - 1]).collect();
    if d > PAIRWISE_THRESHOLD {
        acc.par_iter_mut().enumerate().for_each(|(u, row)| {
            for (k, slot) in row.iter_mut().enumerate() {
                *slot = pair_distance_unchecked(pos.row(u), pos.row(u + 1 + k), norm);
            }
        });
        return acc;
    }
    let mut start = 0;
    while start < d {
        let end = (start + COORD_BLOCK).min(d);
        acc.par_iter_mut().enumerate().for_each(|(u, row)| {
            let a = &pos.coords[u * d + start..u * d + end];
            for (k, slot) in row.iter_mut().enumerate() {
                let v = u + 1 + k;
                let b = &pos.coords[v * d + start..v * d + end];
                match norm {
                    Norm::Lq(q) => *slot += lq_partial(a, b, q),
                    Norm::Linf => *slot = slot.max(linf_partial(a, b)),
                }
            }
        });
        start = end;
    }
    acc
}

/// Connects `u, v` iff `Δ(u, v) <= tau`.
pub fn build_rgg(pos: &Positions, tau: f64, norm: Norm) -> AdjacencyMatrix {
    let dist = pairwise_distances(pos, norm);
    let mut a = AdjacencyMatrix::empty(pos.n);
    for (u, row) in dist.iter().enumerate() {
        for (k, &dl) in row.iter().enumerate() {
            if dl <= tau {
                a.set(u, u + 1 + k, true);
            }
        }
    }
    a
}

pub fn sample_gnp_from(n: usize, p: f64, stream: Stream) -> AdjacencyMatrix {
    let mut r = stream.rng();
    let mut a = AdjacencyMatrix::empty(n);
    for u in 0..n {
        for v in (u + 1)..n {
            if rng::unit(&mut r) < p {
                a.set(u, v, true);
            }
        }
    }
    a
}

/// Erdős–Rényi sample with the configured `n` and `p`.
pub fn sample_gnp(config: &ModelConfig, stream_id: u64) -> AdjacencyMatrix {
    sample_gnp_from(config.n, config.p, config.root_stream().child(stream_id))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_examples() {
        assert!((circle_distance(0.4, -0.4).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(circle_distance(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(circle_distance(0.25, -0.25).unwrap(), 0.5);
        assert!(circle_distance(f64::NAN, 0.0).is_err());
        assert!((circle_distance(1.3, 0.0).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn pair_examples() {
        let d = pair_distance(&[0.0, 0.0], &[0.3, 0.4], Norm::Lq(2)).unwrap();
        assert!((d - 0.25).abs() < 1e-15);
        let u = [0.45, -0.45];
        let v = [-0.45, 0.45];
        assert!((pair_distance(&u, &v, Norm::Lq(1)).unwrap() - 0.2).abs() < 1e-12);
        assert!((pair_distance(&u, &v, Norm::Linf).unwrap() - 0.1).abs() < 1e-12);
        assert!(pair_distance(&u, &[0.0], Norm::Linf).is_err());
    }

    #[test]
    fn wrap_range() {
        for x in [-3.5, -0.5, 0.5, 0.49999999999999994, 2.0, -1e-18, 7.25] {
            let w = wrap(x);
            assert!((-0.5..0.5).contains(&w), "{x} -> {w}");
        }
        assert_eq!(wrap(0.5), -0.5);
    }

    #[test]
    fn norm_parse_and_serde() {
        assert_eq!("inf".parse::<Norm>().unwrap(), Norm::Linf);
        assert_eq!("3".parse::<Norm>().unwrap(), Norm::Lq(3));
        assert!("0".parse::<Norm>().is_err());
        assert!("x".parse::<Norm>().is_err());
    }

    #[test]
    fn small_graph_example() {
        let pos = Positions::from_rows(3, 1, vec![0.0, 0.1, 0.3]).unwrap();
        let a = build_rgg(&pos, 0.15, Norm::Lq(1));
        assert_eq!(a.edges().collect::<Vec<_>>(), vec![(0, 1)]);
    }

    #[test]
    fn edge_list_round_trip() {
        let a = AdjacencyMatrix::from_edges(4, &[(0, 3), (2, 1)]).unwrap();
        let text = a.to_edge_list();
        assert_eq!(text, "0 3\n1 2\n");
        assert_eq!(AdjacencyMatrix::parse_edge_list(4, &text).unwrap(), a);
    }

    #[test]
    fn tree_sum_matches_plain() {
        let cfg = ModelConfig::new(2, 150_001, 0.5, Norm::Lq(2), 3).unwrap();
        let pos = sample_positions(&cfg, 0);
        let t = pair_distance(pos.row(0), pos.row(1), Norm::Lq(2)).unwrap();
        let plain: f64 = pos.row(0).iter().zip(pos.row(1)).map(|(a, b)| circ(*a, *b).powi(2)).sum();
        assert!((t - plain).abs() < 1e-9 * plain);
    }
}
