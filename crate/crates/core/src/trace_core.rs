//! Closed walks, their multigraphs, and the cycle-removal / chain-contraction
//! reduction to a core of minimum degree four.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration;
use crate::error::{Error, Result};
use crate::rng::label;
use crate::spectral::center_adjacency;
use crate::stats::{Moments, StatReport};
use crate::torus::{self, AdjacencyMatrix, ModelConfig, Norm};

/// Vertex set plus a multiset of unordered edges, stored as `(u, v) -> mult`
/// with `u < v`. Self-loops are not representable.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Multigraph {
    pub vertices: BTreeSet<usize>,
    #[serde(with = "edge_triples")]
    pub edges: BTreeMap<(usize, usize), usize>,
}

/// Edges as `[u, v, multiplicity]` triples (JSON maps need string keys).
mod edge_triples {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<(usize, usize), usize>, s: S) -> Result<S::Ok, S::Error> {
        m.iter().map(|(&(u, v), &k)| [u, v, k]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<(usize, usize), usize>, D::Error> {
        let mut out = BTreeMap::new();
        for [u, v, k] in Vec::<[usize; 3]>::deserialize(d)? {
            if u == v {
                return Err(serde::de::Error::custom("self-loop"));
            }
            *out.entry((u.min(v), u.max(v))).or_insert(0) += k;
        }
        Ok(out)
    }
}

fn key(u: usize, v: usize) -> (usize, usize) {
    (u.min(v), u.max(v))
}

impl Multigraph {
    pub fn new(vertices: impl IntoIterator<Item = usize>, edges: &[(usize, usize, usize)]) -> Result<Self> {
        let mut g = Multigraph { vertices: vertices.into_iter().collect(), edges: BTreeMap::new() };
        for &(u, v, m) in edges {
            if u == v {
                return Err(Error::invalid(format!("self-loop at {u}")));
            }
            g.vertices.insert(u);
            g.vertices.insert(v);
            if m > 0 {
                *g.edges.entry(key(u, v)).or_insert(0) += m;
            }
        }
        Ok(g)
    }

    /// Parses "u v multiplicity" lines (multiplicity defaults to 1).
    pub fn parse(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| s.parse::<usize>().map_err(|_| Error::invalid(format!("line {}: bad number {s:?}", ln + 1)));
            match f.len() {
                2 => edges.push((num(f[0])?, num(f[1])?, 1)),
                3 => edges.push((num(f[0])?, num(f[1])?, num(f[2])?)),
                _ => return Err(Error::invalid(format!("line {}: expected \"u v multiplicity\"", ln + 1))),
            }
        }
        Multigraph::new([], &edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Edge count with multiplicity.
    pub fn edge_count(&self) -> usize {
        self.edges.values().sum()
    }

    pub fn multiplicity(&self, u: usize, v: usize) -> usize {
        self.edges.get(&key(u, v)).copied().unwrap_or(0)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|((a, b), _)| *a == v || *b == v).map(|(_, m)| m).sum()
    }

    /// Distinct neighbours in increasing order.
    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        self.edges
            .keys()
            .filter_map(|&(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn is_eulerian(&self) -> bool {
        self.vertices.iter().all(|v| self.degree(*v) % 2 == 0)
    }

    pub fn is_connected(&self) -> bool {
        let Some(&start) = self.vertices.iter().next() else {
            return true;
        };
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for w in self.neighbors(v) {
                if seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        seen.len() == self.vertices.len()
    }

    pub fn min_degree(&self) -> usize {
        self.vertices.iter().map(|v| self.degree(*v)).min().unwrap_or(0)
    }

    fn remove_edges(&mut self, u: usize, v: usize, m: usize) {
        let k = key(u, v);
        let left = self.edges[&k] - m;
        if left == 0 {
            self.edges.remove(&k);
        } else {
            self.edges.insert(k, left);
        }
    }

    /// "u v multiplicity" lines.
    pub fn to_text(&self) -> String {
        self.edges.iter().map(|((u, v), m)| format!("{u} {v} {m}\n")).collect()
    }
}

/// Multigraph of a closed walk `v_1, …, v_{m+1}` with `v_{m+1} = v_1`;
/// self-steps are dropped.
pub fn walk_to_multigraph(walk: &[usize]) -> Result<Multigraph> {
    if walk.len() < 2 {
        return Err(Error::invalid("a closed walk needs length m >= 1"));
    }
    if walk.first() != walk.last() {
        return Err(Error::invalid("walk is not closed"));
    }
    let edges: Vec<(usize, usize, usize)> = walk.windows(2).filter(|w| w[0] != w[1]).map(|w| (w[0], w[1], 1)).collect();
    Multigraph::new(walk.iter().copied(), &edges)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovedCycle {
    /// Cycle order starting at the anchor.
    pub vertices: Vec<usize>,
    pub anchor: usize,
    pub edge_count: usize,
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractedChain {
    /// Path order from one endpoint to the other.
    pub vertices: Vec<usize>,
    pub length: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreReport {
    pub core: Multigraph,
    pub removed_cycles: Vec<RemovedCycle>,
    pub s: usize,
    pub s_d: usize,
    pub contracted_chains: Vec<ContractedChain>,
    /// Core edges that were edges of the input (E_U), as `(u, v, mult)`.
    pub non_contracted_edges: Vec<(usize, usize, usize)>,
    /// Core edges created by contraction (E_C), as `(u, v, mult)`.
    pub contracted_edges: Vec<(usize, usize, usize)>,
    /// `Σ (m − 2)` over degenerate cycles of multiplicity `m`.
    pub degenerate_excess: usize,
}

impl CoreReport {
    pub fn is_trivial(&self) -> bool {
        self.core.vertex_count() == 1 && self.core.edge_count() == 0
    }

    /// `|V(H)| = |E(H)| − s − |E(H°)| + |V(H°)|`.
    pub fn identity_holds(&self, h: &Multigraph) -> bool {
        let rhs = h.edge_count() as i64 - self.s as i64 - self.core.edge_count() as i64 + self.core.vertex_count() as i64;
        h.vertex_count() as i64 == rhs
    }

    /// The same identity with `|E(H)|` taken on the skeleton, where every
    /// degenerate cycle contributes exactly two edges.
    pub fn skeleton_identity_holds(&self, h: &Multigraph) -> bool {
        let e = h.edge_count() as i64 - self.degenerate_excess as i64;
        h.vertex_count() as i64 == e - self.s as i64 - self.core.edge_count() as i64 + self.core.vertex_count() as i64
    }
}

struct Candidate {
    sorted: Vec<usize>,
    order: Vec<usize>,
    degenerate: bool,
}

/// Follows degree-2 vertices with two distinct neighbours from `start`
/// leaving towards `next`. Returns the visited path (including `start`) and
/// the stopping vertex; the stop equals `start` when the walk closes up.
fn follow(g: &Multigraph, start: usize, next: usize) -> (Vec<usize>, usize) {
    let mut path = vec![start];
    let (mut prev, mut cur) = (start, next);
    while cur != start && g.degree(cur) == 2 && g.neighbors(cur).len() == 2 {
        path.push(cur);
        let nb = g.neighbors(cur);
        let nxt = if nb[0] == prev { nb[1] } else { nb[0] };
        prev = cur;
        cur = nxt;
    }
    (path, cur)
}

/// Degree-2 runs through `v`: `(left end, interior in order, right end)`.
fn run_through(g: &Multigraph, v: usize) -> (usize, Vec<usize>, usize) {
    let nb = g.neighbors(v);
    let (left, lend) = follow(g, v, nb[0]);
    if lend == v {
        return (v, left, v);
    }
    let (right, rend) = follow(g, v, nb[1]);
    let mut interior: Vec<usize> = left.into_iter().skip(1).rev().collect();
    interior.extend(right);
    (lend, interior, rend)
}

fn is_simple_deg2(g: &Multigraph, v: usize) -> bool {
    g.degree(v) == 2 && g.neighbors(v).len() == 2
}

fn find_cycle(g: &Multigraph) -> Option<Candidate> {
    let mut best: Option<Candidate> = None;
    let mut offer = |c: Candidate| {
        if best.as_ref().is_none_or(|b| c.sorted < b.sorted) {
            best = Some(c);
        }
    };
    for &v in &g.vertices {
        let nb = g.neighbors(v);
        if nb.len() == 1 {
            let u = nb[0];
            // both ends may be leaves; the smaller label then anchors
            let (anchor, leaf) = if g.neighbors(u).len() == 1 { (u.min(v), u.max(v)) } else { (u, v) };
            offer(Candidate { sorted: vec![u.min(v), u.max(v)], order: vec![anchor, leaf], degenerate: true });
        } else if is_simple_deg2(g, v) {
            let (a, interior, b) = run_through(g, v);
            if a == v && b == v {
                let mut order = interior;
                let rot = order.iter().enumerate().min_by_key(|(_, x)| **x).map(|(i, _)| i).unwrap();
                order.rotate_left(rot);
                let mut sorted = order.clone();
                sorted.sort_unstable();
                offer(Candidate { sorted, order, degenerate: false });
            } else if a == b {
                let mut order = vec![a];
                order.extend(interior);
                let mut sorted = order.clone();
                sorted.sort_unstable();
                offer(Candidate { sorted, order, degenerate: false });
            }
        }
    }
    best
}

fn find_chain(g: &Multigraph) -> Option<Vec<usize>> {
    let mut best: Option<(Vec<usize>, Vec<usize>)> = None;
    for &v in &g.vertices {
        if !is_simple_deg2(g, v) {
            continue;
        }
        let (a, interior, b) = run_through(g, v);
        if a == b {
            continue;
        }
        let mut path = vec![a];
        path.extend(interior);
        path.push(b);
        let mut sorted = path.clone();
        sorted.sort_unstable();
        if best.as_ref().is_none_or(|(s, _)| sorted < *s) {
            best = Some((sorted, path));
        }
    }
    best.map(|(_, p)| p)
}

/// Removes cycles (anchors kept) until none remain, then contracts maximal
/// degree-2 chains into single edges, repeating both until nothing changes.
pub fn contract_core(h: &Multigraph) -> Result<CoreReport> {
    if !h.is_eulerian() {
        return Err(Error::invalid("input multigraph is not Eulerian"));
    }
    if !h.is_connected() {
        return Err(Error::invalid("input multigraph is not connected"));
    }
    let mut g = h.clone();
    let mut removed = Vec::new();
    let mut excess = 0;
    let mut contracted: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut chains = Vec::new();
    // contracting a chain can leave a new cycle (e.g. a parallel bundle), so
    // the two phases alternate until neither applies
    loop {
        while let Some(c) = find_cycle(&g) {
            let anchor = c.order[0];
            if c.degenerate {
                let leaf = c.order[1];
                let m = g.multiplicity(anchor, leaf);
                g.remove_edges(anchor, leaf, m);
                g.vertices.remove(&leaf);
                excess += m - 2;
                removed.push(RemovedCycle { vertices: c.order.clone(), anchor, edge_count: m, degenerate: true });
            } else {
                let k = c.order.len();
                for j in 0..k {
                    g.remove_edges(c.order[j], c.order[(j + 1) % k], 1);
                }
                for v in &c.order[1..] {
                    g.vertices.remove(v);
                }
                removed.push(RemovedCycle { vertices: c.order.clone(), anchor, edge_count: k, degenerate: false });
            }
        }
        contracted.retain(|&(u, v), m| {
            *m = (*m).min(g.multiplicity(u, v));
            *m > 0
        });
        let before = chains.len();
        while let Some(path) = find_chain(&g) {
            for w in path.windows(2) {
                g.remove_edges(w[0], w[1], 1);
            }
            for v in &path[1..path.len() - 1] {
                g.vertices.remove(v);
            }
            let (a, b) = (path[0], *path.last().unwrap());
            *g.edges.entry(key(a, b)).or_insert(0) += 1;
            *contracted.entry(key(a, b)).or_insert(0) += 1;
            chains.push(ContractedChain { length: path.len() - 1, vertices: path });
        }
        if chains.len() == before {
            break;
        }
    }
    let non_contracted = g
        .edges
        .iter()
        .filter_map(|(&(u, v), &m)| {
            let k = m - contracted.get(&(u, v)).copied().unwrap_or(0);
            (k > 0).then_some((u, v, k))
        })
        .collect();
    let s_d = removed.iter().filter(|c| c.degenerate).count();
    Ok(CoreReport {
        s: removed.len(),
        s_d,
        removed_cycles: removed,
        contracted_chains: chains,
        non_contracted_edges: non_contracted,
        contracted_edges: contracted.into_iter().map(|((u, v), m)| (u, v, m)).collect(),
        degenerate_excess: excess,
        core: g,
    })
}

/// `tr(M^m)` for symmetric `M` and even `m`, as `‖M^{m/2}‖_F²`.
pub fn trace_power(m: &DMatrix<f64>, power: usize) -> Result<f64> {
    if power < 2 || power % 2 == 1 {
        return Err(Error::invalid("trace power must be even and at least 2"));
    }
    let mut p = m.clone();
    for _ in 1..power / 2 {
        p = &p * m;
    }
    Ok(p.iter().map(|x| x * x).sum())
}

pub const BRUTE_WALK_BUDGET: u64 = 10_000_000;

/// Sum over all closed walks of length `m` of `∏ (A_{v_j v_{j+1}} − p)`,
/// where a self-step contributes `−p`.
pub fn brute_walk_sum(adj: &AdjacencyMatrix, p: f64, m: usize) -> Result<f64> {
    let n = adj.n();
    let walks = (n as u64).checked_pow(m as u32).unwrap_or(u64::MAX);
    if walks > BRUTE_WALK_BUDGET {
        return Err(Error::Size(format!("{n}^{m} walks exceed the budget of {BRUTE_WALK_BUDGET}")));
    }
    if m == 0 {
        return Ok(n as f64);
    }
    let w = |u: usize, v: usize| if u == v { -p } else { f64::from(u8::from(adj.get(u, v))) - p };
    fn rec(w: &dyn Fn(usize, usize) -> f64, n: usize, start: usize, cur: usize, left: usize, acc: f64) -> f64 {
        if left == 1 {
            return acc * w(cur, start);
        }
        (0..n).map(|nx| rec(w, n, start, nx, left - 1, acc * w(cur, nx))).sum()
    }
    Ok((0..n).map(|s| rec(&w, n, s, s, m, 1.0)).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphModel {
    Rgg,
    Gnp,
}

/// Two-regime prediction at constant 1: `d(np/√d)^m + n(np)^{m/2}` for
/// finite `q`, `d²(np/d)^m + n(np)^{m/2}` for the sup norm.
pub fn regime_prediction(config: &ModelConfig, m: usize) -> f64 {
    let (n, d) = (config.n as f64, config.d as f64);
    let np = n * config.p;
    let mi = m as i32;
    let bulk = n * np.powf(m as f64 / 2.0);
    match config.norm {
        Norm::Lq(_) => d * (np / d.sqrt()).powi(mi) + bulk,
        Norm::Linf => d * d * (np / d).powi(mi) + bulk,
    }
}

/// Mean of `tr((A − p11ᵀ)^m)` over fresh graph samples.
pub fn empirical_trace_moment_of(config: &ModelConfig, m: usize, trials: usize, model: GraphModel) -> Result<StatReport> {
    config.validate()?;
    if m < 2 || m % 2 == 1 {
        return Err(Error::invalid("m must be even and at least 2"));
    }
    if config.n > 2000 {
        return Err(Error::Size("trace moments limited to n <= 2000".into()));
    }
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let tau = match model {
        GraphModel::Rgg => calibration::experiment_threshold(config)?.tau,
        GraphModel::Gnp => 0.0,
    };
    let stream = config.root_stream().child(label::TRACE).child(model as u64);
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = stream.child(t as u64);
            let a = match model {
                GraphModel::Rgg => torus::build_rgg(&torus::sample_positions_from(config.n, config.d, s), tau, config.norm),
                GraphModel::Gnp => torus::sample_gnp_from(config.n, config.p, s),
            };
            trace_power(&center_adjacency(&a, config.p), m)
        })
        .collect::<Result<_>>()?;
    let mom = Moments::from_slice(&values);
    let mut rep = StatReport::from_samples(&values);
    rep.stderr = mom.stderr();
    rep.bound_value = Some(regime_prediction(config, m));
    Ok(rep)
}

/// Geometric-model trace moment.
pub fn empirical_trace_moment(config: &ModelConfig, m: usize, trials: usize) -> Result<StatReport> {
    empirical_trace_moment_of(config, m, trials, GraphModel::Rgg)
}

pub const TRACE_HEADER: &str = "m,d,mean,stderr,regime_prediction";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn walk_examples() {
        let t = walk_to_multigraph(&[1, 2, 3, 1]).unwrap();
        assert_eq!(t.edge_count(), 3);
        assert_eq!(t.vertex_count(), 3);
        let s = walk_to_multigraph(&[1, 1, 1]).unwrap();
        assert_eq!((s.vertex_count(), s.edge_count()), (1, 0));
        let d = walk_to_multigraph(&[1, 2, 1, 3, 1]).unwrap();
        assert_eq!(d.multiplicity(1, 2), 2);
        assert_eq!(d.multiplicity(1, 3), 2);
        assert!(walk_to_multigraph(&[1, 2, 3]).is_err());
    }

    #[test]
    fn triangle_core() {
        let h = walk_to_multigraph(&[1, 2, 3, 1]).unwrap();
        let r = contract_core(&h).unwrap();
        assert!(r.is_trivial());
        assert_eq!((r.s, r.s_d), (1, 0));
        assert_eq!(r.removed_cycles[0].anchor, 1);
        assert!(r.identity_holds(&h));
    }

    #[test]
    fn double_edges_core() {
        let h = walk_to_multigraph(&[1, 2, 1, 3, 1]).unwrap();
        let r = contract_core(&h).unwrap();
        assert!(r.is_trivial());
        assert_eq!((r.s, r.s_d), (2, 2));
        assert!(r.identity_holds(&h));
        assert_eq!(r.core.vertices.iter().copied().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn k5_is_its_own_core() {
        // Eulerian circuit of K5
        let walk = [0, 1, 2, 3, 4, 0, 2, 4, 1, 3, 0];
        let h = walk_to_multigraph(&walk).unwrap();
        assert_eq!(h.edge_count(), 10);
        let r = contract_core(&h).unwrap();
        assert_eq!(r.core, h);
        assert_eq!(r.s, 0);
        assert!(r.contracted_chains.is_empty());
        assert_eq!(r.non_contracted_edges.len(), 10);
        assert!(r.identity_holds(&h));
    }

    #[test]
    fn quadruple_bundle_needs_skeleton() {
        let h = walk_to_multigraph(&[1, 2, 1, 2, 1]).unwrap();
        let r = contract_core(&h).unwrap();
        assert_eq!((r.s, r.degenerate_excess), (1, 2));
        assert!(!r.identity_holds(&h));
        assert!(r.skeleton_identity_holds(&h));
    }

    #[test]
    fn chains_contract_to_parallel_edges() {
        // x=0, y=1 joined by four paths of length two
        let edges: Vec<_> = (2..6).flat_map(|m| [(0, m, 1), (m, 1, 1)]).collect();
        let h = Multigraph::new([], &edges).unwrap();
        let r = contract_core(&h).unwrap();
        assert_eq!(r.contracted_chains.len(), 4);
        // the resulting quadruple bundle is itself a degenerate cycle
        assert_eq!((r.s, r.s_d, r.degenerate_excess), (1, 1, 2));
        assert!(r.is_trivial());
        assert!(r.skeleton_identity_holds(&h));
    }

    #[test]
    fn report_json_round_trip() {
        let h = walk_to_multigraph(&[0, 1, 2, 3, 4, 0, 2, 4, 1, 3, 0]).unwrap();
        let r = contract_core(&h).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<CoreReport>(&s).unwrap(), r);
    }

    #[test]
    fn non_eulerian_rejected() {
        let h = Multigraph::new([], &[(0, 1, 1), (1, 2, 1)]).unwrap();
        assert!(contract_core(&h).is_err());
    }

    #[test]
    fn trace_examples() {
        let a = AdjacencyMatrix::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let m = center_adjacency(&a, 0.0);
        assert!((trace_power(&m, 2).unwrap() - 6.0).abs() < 1e-12);
        assert_eq!(trace_power(&DMatrix::zeros(3, 3), 4).unwrap(), 0.0);
        assert!(trace_power(&m, 3).is_err());
    }

    #[test]
    fn brute_examples() {
        let one = AdjacencyMatrix::empty(1);
        assert!((brute_walk_sum(&one, 0.3, 3).unwrap() + 0.027).abs() < 1e-15);
        assert_eq!(brute_walk_sum(&AdjacencyMatrix::complete(2), 0.0, 2).unwrap(), 2.0);
        assert!(brute_walk_sum(&AdjacencyMatrix::empty(20), 0.3, 8).is_err());
    }
}
