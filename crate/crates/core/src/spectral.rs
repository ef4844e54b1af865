//! Spectra of centered adjacency matrices and arc-vector witnesses.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::calibration::coordinate_moments;
use crate::error::{Error, Result};
use crate::torus::{AdjacencyMatrix, Positions};

pub const MAX_DENSE_N: usize = 4000;
/// Largest `n` for which eigenvectors are computed for the residual check.
pub const RESIDUAL_CHECK_MAX_N: usize = 1000;

/// `A − p11ᵀ`, including the diagonal (which becomes `−p`).
pub fn center_adjacency(adj: &AdjacencyMatrix, p: f64) -> DMatrix<f64> {
    let n = adj.n();
    DMatrix::from_fn(n, n, |u, v| f64::from(u8::from(adj.get(u, v))) - p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    pub lambda1: f64,
    /// `max(|λ_2|, |λ_n|)`.
    pub lambda2_abs_max: f64,
    pub trace: f64,
    /// Relative gap between `Σ λ²` and the squared Frobenius norm.
    pub frobenius_check: f64,
    /// Largest `‖Mv − λv‖ / ‖M‖` over the spot-checked pairs, when computed.
    pub residual_check: Option<f64>,
    #[serde(default)]
    pub counts: BTreeMap<String, usize>,
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::invalid("matrix must be square"));
    }
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 {
                return Err(Error::invalid(format!("matrix not symmetric at ({i},{j})")));
            }
        }
    }
    Ok(())
}

fn spot_indices(n: usize) -> Vec<usize> {
    let mut idx = vec![0, 1.min(n - 1), n / 2, n.saturating_sub(2), n - 1];
    idx.sort_unstable();
    idx.dedup();
    idx
}

/// Full real spectrum of a symmetric matrix.
///
/// Eigenvalues come from nalgebra's symmetric QR iteration. For
/// `n <= RESIDUAL_CHECK_MAX_N` the eigenvectors are also formed and five
/// pairs are checked by residual; larger matrices are certified through the
/// trace and the Frobenius norm instead.
pub fn spectrum(m: &DMatrix<f64>) -> Result<SpectrumReport> {
    check_symmetric(m)?;
    let n = m.nrows();
    if n == 0 || n > MAX_DENSE_N {
        return Err(Error::Size(format!("dense spectrum limited to 1..={MAX_DENSE_N}, got {n}")));
    }
    let norm = m.norm();
    let (mut ev, residual_check) = if n <= RESIDUAL_CHECK_MAX_N {
        let eig = m.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|a, b| eig.eigenvalues[*b].total_cmp(&eig.eigenvalues[*a]));
        let mut worst: f64 = 0.0;
        for k in spot_indices(n) {
            let j = order[k];
            let v = eig.eigenvectors.column(j);
            let r = m * v - v * eig.eigenvalues[j];
            worst = worst.max(if norm > 0.0 { r.norm() / norm } else { r.norm() });
        }
        (eig.eigenvalues.iter().copied().collect::<Vec<_>>(), Some(worst))
    } else {
        (m.clone().symmetric_eigenvalues().iter().copied().collect(), None)
    };
    ev.sort_by(|a, b| b.total_cmp(a));
    let sq: f64 = ev.iter().map(|x| x * x).sum();
    let frob2 = norm * norm;
    let frobenius_check = if frob2 > 0.0 { (sq - frob2).abs() / frob2 } else { sq };
    let lambda2_abs_max = if n >= 2 { ev[1].abs().max(ev[n - 1].abs()) } else { 0.0 };
    Ok(SpectrumReport {
        lambda1: ev[0],
        lambda2_abs_max,
        trace: m.trace(),
        frobenius_check,
        residual_check,
        eigenvalues: ev,
        counts: BTreeMap::new(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Threshold `np/(a√d)`.
    Lq,
    /// Threshold `np/(a·d)`.
    Linf,
}

pub fn regime_threshold(n: usize, p: f64, d: usize, a: f64, regime: Regime) -> f64 {
    let np = n as f64 * p;
    match regime {
        Regime::Lq => np / (a * (d as f64).sqrt()),
        Regime::Linf => np / (a * d as f64),
    }
}

/// Number of `i >= 2` with `|λ_i| >= threshold`.
pub fn count_above(report: &SpectrumReport, threshold: f64) -> usize {
    report.eigenvalues.iter().skip(1).filter(|l| l.abs() >= threshold).count()
}

/// Large-eigenvalue count for the given regime; `λ_1` is excluded.
pub fn count_large_eigs(report: &SpectrumReport, n: usize, p: f64, d: usize, a: f64, regime: Regime) -> usize {
    count_above(report, regime_threshold(n, p, d, a, regime))
}

/// Arc placement on one latent coordinate: `+1` on the arc around
/// `plus_center`, `−1` on the arc around `minus_center`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcSpec {
    pub plus_center: f64,
    pub minus_center: f64,
    pub half_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcVector {
    pub entries: Vec<i8>,
    pub dimension_index: usize,
    pub arc_spec: ArcSpec,
    /// Both arcs empty.
    pub degenerate: bool,
}

impl ArcVector {
    fn new(entries: Vec<i8>, dimension_index: usize, arc_spec: ArcSpec) -> Self {
        let degenerate = entries.iter().all(|e| *e == 0);
        ArcVector { entries, dimension_index, arc_spec, degenerate }
    }

    /// Unit-norm copy (all zeros when degenerate).
    pub fn normalized(&self) -> Vec<f64> {
        let nnz = self.entries.iter().filter(|e| **e != 0).count();
        if nnz == 0 {
            return vec![0.0; self.entries.len()];
        }
        let s = 1.0 / (nnz as f64).sqrt();
        self.entries.iter().map(|e| f64::from(*e) * s).collect()
    }

    pub fn plus_support(&self) -> Vec<usize> {
        self.entries.iter().enumerate().filter(|(_, e)| **e > 0).map(|(v, _)| v).collect()
    }

    pub fn minus_support(&self) -> Vec<usize> {
        self.entries.iter().enumerate().filter(|(_, e)| **e < 0).map(|(v, _)| v).collect()
    }
}

/// Default half-width for finite `q`: `(2c)^q = μ_q / 2`.
pub fn default_arc_halfwidth(q: u32) -> Result<f64> {
    let m = coordinate_moments(q)?;
    Ok(0.5 * (m.mu / 2.0).powf(1.0 / f64::from(q)))
}

/// `+1` where `|x_i|_C <= c`, `−1` where `|x_i|_C >= 1/2 − c`.
pub fn arc_vector_q(pos: &Positions, i: usize, c: f64) -> Result<ArcVector> {
    if !(c > 0.0 && c < 0.25) {
        return Err(Error::invalid("arc half-width must lie in (0, 1/4)"));
    }
    if i >= pos.d() {
        return Err(Error::invalid("dimension index out of range"));
    }
    let entries = (0..pos.n())
        .map(|v| {
            let a = pos.coord(v, i).abs();
            if a <= c {
                1
            } else if a >= 0.5 - c {
                -1
            } else {
                0
            }
        })
        .collect();
    Ok(ArcVector::new(entries, i, ArcSpec { plus_center: 0.0, minus_center: 0.5, half_width: c }))
}

/// Is `x` in the half-open arc `[center − w, center + w)` on the circle?
fn in_arc(x: f64, center: f64, w: f64) -> bool {
    (x - (center - w)).rem_euclid(1.0) < 2.0 * w
}

/// `⌊1/ξ⌋` vectors for coordinate `i`. Vector `t` has its `+1` arc on
/// `[tξ/2 − ξ/4, tξ/2 + ξ/4)` and its `−1` arc on the same interval shifted by
/// 1/2, so all `2⌊1/ξ⌋` arcs tile disjoint parts of the circle.
pub fn arc_vectors_linf(pos: &Positions, i: usize, xi: f64) -> Result<Vec<ArcVector>> {
    if !(xi > 0.0 && xi < 0.5) {
        return Err(Error::invalid("xi must lie in (0, 1/2)"));
    }
    if i >= pos.d() {
        return Err(Error::invalid("dimension index out of range"));
    }
    let count = (1.0 / xi).floor() as usize;
    let w = xi / 4.0;
    Ok((0..count)
        .map(|t| {
            let c = t as f64 * xi / 2.0;
            let entries = (0..pos.n())
                .map(|v| {
                    let x = pos.coord(v, i);
                    if in_arc(x, c, w) {
                        1
                    } else if in_arc(x, c + 0.5, w) {
                        -1
                    } else {
                        0
                    }
                })
                .collect();
            ArcVector::new(entries, i, ArcSpec { plus_center: c, minus_center: (c + 0.5).rem_euclid(1.0), half_width: w })
        })
        .collect())
}

/// Rayleigh quotient `yᵀMy / yᵀy`.
pub fn rayleigh(m: &DMatrix<f64>, y: &[f64]) -> Result<f64> {
    if y.len() != m.nrows() {
        return Err(Error::invalid("vector length must match the matrix"));
    }
    let v = DVector::from_column_slice(y);
    let nn = v.dot(&v);
    if nn == 0.0 {
        return Err(Error::invalid("zero vector"));
    }
    Ok(v.dot(&(m * &v)) / nn)
}

fn unit(v: &[f64]) -> Option<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (n > 0.0).then(|| v.iter().map(|x| x / n).collect())
}

/// Largest `|⟨y_i, y_j⟩|` over distinct normalized vectors.
pub fn gram_offdiag(vectors: &[Vec<f64>]) -> Result<f64> {
    if vectors.len() < 2 {
        return Err(Error::invalid("need at least two vectors"));
    }
    let units: Vec<Vec<f64>> = vectors.iter().map(|v| unit(v).ok_or_else(|| Error::invalid("zero vector"))).collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for i in 0..units.len() {
        for j in i + 1..units.len() {
            let dot: f64 = units[i].iter().zip(&units[j]).map(|(a, b)| a * b).sum();
            worst = worst.max(dot.abs());
        }
    }
    Ok(worst)
}

/// Modified Gram–Schmidt in the given order; vectors that collapse below
/// `1e-10` of their original length are dropped.
pub fn gram_schmidt(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let n0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut w = v.clone();
        for b in &basis {
            let dot: f64 = w.iter().zip(b).map(|(a, c)| a * c).sum();
            w.iter_mut().zip(b).for_each(|(a, c)| *a -= dot * c);
        }
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n0 > 0.0 && n > 1e-10 * n0 {
            basis.push(w.iter().map(|x| x / n).collect());
        }
    }
    basis
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftReport {
    pub above_before: usize,
    pub above_after: usize,
}

/// Rayleigh quotients at or above `threshold`, before and after
/// orthonormalizing the vectors.
pub fn gram_schmidt_lift(m: &DMatrix<f64>, vectors: &[Vec<f64>], threshold: f64) -> Result<LiftReport> {
    let count = |vs: &[Vec<f64>]| -> Result<usize> {
        let mut c = 0;
        for v in vs {
            if rayleigh(m, v)? >= threshold {
                c += 1;
            }
        }
        Ok(c)
    };
    Ok(LiftReport { above_before: count(vectors)?, above_after: count(&gram_schmidt(vectors))? })
}
