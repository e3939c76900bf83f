//! Exact parametric cuts and graph-fused proximal operators.
//!
//! The crate is organised bottom-up:
//!
//! * [`qbm`]: energy tables, quadratic binary problems and cut graphs.
//! * [`maxflow`]: push-relabel maximum flow and extreme minimum cuts.
//! * [`parametric`] and [`weighted`]: the minimum-norm reduction vector whose
//!   level sets solve `min f(S) - beta * w(S)` for every `beta` at once.
//! * [`prox`]: the proximal operator of weighted pairwise absolute
//!   differences plus convex piecewise-linear unary penalties.
//! * [`regression`]: an accelerated proximal-gradient loop on top of `prox`.
//! * [`oracle`]: brute-force and coordinate-descent references for testing.
//! * [`io`] and [`grid`]: file formats and 4-neighbour image grids.

use std::collections::BTreeSet;

pub mod error;
pub mod grid;
pub mod io;
mod levels;
pub mod maxflow;
pub mod oracle;
pub mod parametric;
pub mod prox;
pub mod qbm;
pub mod regression;
pub mod weighted;

pub use error::{Error, Result};
pub use parametric::{
    alpha_reduction, breakpoints, check_optimality, level_sets, reductions, Pseudoflow,
    ReductionVector,
};
pub use prox::{certificate, prox, PiecewiseLinearPenalty, ProxProblem};
pub use qbm::{evaluate, from_energies, to_cut_graph, CutGraph, EnergyTable, QuadraticBinaryProblem};
pub use weighted::{find_weighted_reductions, WeightVector};

/// A set of node indices.
pub type NodeSet = BTreeSet<usize>;

/// Floating-point comparison helpers shared by the solvers.
pub mod tol {
    /// Relative tolerance for value equality.
    pub const EQ_REL: f64 = 1e-9;

    /// `|a - b| <= 1e-9 * max(1, |a|, |b|)`.
    pub fn approx_eq(a: f64, b: f64) -> bool {
        (a - b).abs() <= EQ_REL * 1f64.max(a.abs()).max(b.abs())
    }

    /// Tolerance for deciding the sign of `x` computed from terms of size
    /// up to `scale`.
    pub fn zero_band(scale: f64) -> f64 {
        EQ_REL * scale.abs().max(1.0)
    }
}
