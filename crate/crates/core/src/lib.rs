//! Random geometric graphs on the high-dimensional torus.
//!
//! The crate samples `RGG_q(n, d, p)` under finite `L_q` and sup norms,
//! calibrates the connection threshold, and provides the statistics used to
//! tell such graphs apart from `G(n, p)`: signed subgraph counts, joint
//! cumulants and Edgeworth densities, spectra with arc-vector witnesses,
//! trace-method walk combinatorics and a total-variation upper bound.

pub mod calibration;
pub mod cumulants;
pub mod error;
pub mod normal;
pub mod quadrature;
pub mod rng;
pub mod signed_stats;
pub mod spectral;
pub mod stats;
pub mod torus;
pub mod trace_core;
pub mod tv_bound;

pub use error::{Error, Result};
pub use torus::{AdjacencyMatrix, ModelConfig, Norm, Positions};
