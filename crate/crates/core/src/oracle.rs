//! Reference implementations used to validate the solvers at small scale.
//!
//! Nothing here shares code with the bisection solver: minimizers come from
//! exhaustive enumeration, minimum-norm points and proximal points from
//! coordinate descent on the box-constrained pseudoflow and dual variables.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::parametric::{reductions_unchecked, ReductionVector};
use crate::prox::{self, ProxProblem};
use crate::qbm::{evaluate_mask, QuadraticBinaryProblem};
use crate::NodeSet;

/// Largest problem accepted by [`brute_force_minimizers`].
pub const MAX_ENUMERATION: usize = 20;

/// Largest problem accepted by [`prox_reference`].
pub const MAX_PROX_REFERENCE: usize = 200;

/// Smallest and largest minimizers and the optimal value.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimizerPair {
    pub s_min: NodeSet,
    pub s_max: NodeSet,
    pub value: f64,
}

/// Every subset of `0..n` as a membership mask.
pub fn all_subsets(n: usize) -> impl Iterator<Item = Vec<bool>> {
    assert!(n < 64);
    (0u64..1 << n).map(move |bits| (0..n).map(|i| bits >> i & 1 == 1).collect())
}

/// Exhaustive minimizers of `f(S) - beta w(S)`. Values within `1e-9`
/// relative of the optimum count as optimal; the smallest and largest
/// minimizers are the intersection and union of all optimal sets.
pub fn brute_force_minimizers(
    problem: &QuadraticBinaryProblem,
    beta: f64,
    weights: &[f64],
) -> Result<MinimizerPair> {
    let n = problem.len();
    if n > MAX_ENUMERATION {
        return Err(Error::TooLarge(n, MAX_ENUMERATION));
    }
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: weights.len(),
        });
    }
    let values: Vec<(Vec<bool>, f64)> = all_subsets(n)
        .map(|m| {
            let v = evaluate_mask(problem, &m, beta, weights);
            (m, v)
        })
        .collect();
    let best = values.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
    let scale = problem.diag().iter().map(|d| d.abs()).sum::<f64>()
        + problem.couplings().iter().map(|c| c.q.abs()).sum::<f64>()
        + weights.iter().map(|w| (beta * w).abs()).sum::<f64>();
    let band = crate::tol::zero_band(scale);
    let mut meet = vec![true; n];
    let mut join = vec![false; n];
    for (m, v) in &values {
        if *v <= best + band {
            for i in 0..n {
                meet[i] &= m[i];
                join[i] |= m[i];
            }
        }
    }
    Ok(MinimizerPair {
        s_min: (0..n).filter(|&i| meet[i]).collect(),
        s_max: (0..n).filter(|&i| join[i]).collect(),
        value: best,
    })
}

/// Random submodular problem: each pair is coupled with probability `p` and
/// `q_ij ~ -|N(0, 1)|`; diagonals are `N(0, 2)`.
pub fn random_problem<R: Rng + ?Sized>(rng: &mut R, n: usize, p: f64) -> QuadraticBinaryProblem {
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let wide = Normal::new(0.0, 2.0).expect("valid normal");
    let diag: Vec<f64> = (0..n).map(|_| wide.sample(rng)).collect();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                let q: f64 = unit.sample(rng);
                pairs.push((i, j, -q.abs()));
            }
        }
    }
    QuadraticBinaryProblem::new(diag, pairs).expect("generated couplings are nonpositive")
}

/// Random proximal problem on `n` nodes: centres `N(0, 1)`, an Erdős–Rényi
/// edge set with mean degree about three and `Uniform(0, 1)` weights, and
/// with `penalties` set, a random convex penalty on roughly half the nodes.
pub fn random_prox_problem<R: Rng + ?Sized>(rng: &mut R, n: usize, penalties: bool) -> ProxProblem {
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let a: Vec<f64> = (0..n).map(|_| unit.sample(rng)).collect();
    let p = if n > 1 { (3.0 / (n - 1) as f64).min(1.0) } else { 0.0 };
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.push((i, j, rng.random_range(0.0..1.0)));
            }
        }
    }
    let lambda = rng.random_range(0.05..2.0);
    let pens = (0..n)
        .map(|_| {
            if penalties && rng.random_bool(0.5) {
                let m = rng.random_range(1..=3);
                let mut b: Vec<f64> = (0..m).map(|_| unit.sample(rng)).collect();
                b.sort_by(f64::total_cmp);
                b.dedup();
                let mut slopes: Vec<f64> = (0..=b.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                slopes.sort_by(f64::total_cmp);
                Some(prox::PiecewiseLinearPenalty::new(b, slopes).expect("sorted by construction"))
            } else {
                None
            }
        })
        .collect();
    ProxProblem::new(a, edges, lambda, pens).expect("valid by construction")
}

/// Weighted minimum-norm point by exact cyclic coordinate descent over the
/// pseudoflow box. Stops once no coordinate moves by more than `1e-15`
/// relative, or the projected gradient falls below `1e-12`.
pub fn min_norm_reference(problem: &QuadraticBinaryProblem, weights: &[f64]) -> Result<ReductionVector> {
    let n = problem.len();
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: weights.len(),
        });
    }
    for (index, &value) in weights.iter().enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::InvalidWeight { index, value });
        }
    }
    let couplings = problem.couplings();
    let mut alpha = vec![0.0; couplings.len()];
    let mut r = reductions_unchecked(problem, &alpha);
    let scale = r.iter().fold(1f64, |m, x| m.max(x.abs()));
    for _sweep in 0..2_000_000 {
        let mut moved: f64 = 0.0;
        for (e, c) in couplings.iter().enumerate() {
            let (wi, wj) = (weights[c.i], weights[c.j]);
            let step = 2.0 * (r[c.i] / wi - r[c.j] / wj) / (1.0 / wi + 1.0 / wj);
            let bound = c.q.abs();
            let next = (alpha[e] + step).clamp(-bound, bound);
            let d = next - alpha[e];
            if d != 0.0 {
                alpha[e] = next;
                r[c.i] -= 0.5 * d;
                r[c.j] += 0.5 * d;
                moved = moved.max(d.abs());
            }
        }
        if moved <= 1e-15 * scale {
            break;
        }
        if projected_gradient(problem, weights, &alpha, &r) < 1e-12 * scale {
            break;
        }
    }
    Ok(reductions_unchecked(problem, &alpha))
}

fn projected_gradient(problem: &QuadraticBinaryProblem, w: &[f64], alpha: &[f64], r: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (c, &a) in problem.couplings().iter().zip(alpha) {
        // d/d alpha of sum r^2/w is -(y_i - y_j)
        let g = -(r[c.i] / w[c.i] - r[c.j] / w[c.j]);
        let bound = c.q.abs();
        let pg = if a >= bound {
            g.max(0.0)
        } else if a <= -bound {
            g.min(0.0)
        } else {
            g
        };
        worst = worst.max(pg.abs());
    }
    worst
}

/// Proximal point by exact cyclic coordinate ascent on the box-constrained
/// dual. With dual variables `s_e` for the edges and `t_k` for the penalty
/// kinks, the primal point is `u = a - v / 2` where
/// `v = lambda * linear + D^T s + P t`. Runs until the optimality
/// certificate drops below `1e-9`.
pub fn prox_reference(problem: &ProxProblem) -> Result<Vec<f64>> {
    let n = problem.len();
    if n > MAX_PROX_REFERENCE {
        return Err(Error::TooLarge(n, MAX_PROX_REFERENCE));
    }
    let lambda = problem.lambda();
    let mut u = problem.center().to_vec();
    let mut kinks: Vec<(usize, f64, f64)> = Vec::new();
    for i in 0..n {
        if let Some(p) = problem.penalty(i) {
            let d = p.decompose();
            u[i] -= 0.5 * lambda * d.linear;
            for (b, k) in d.anchors {
                kinks.push((i, b, lambda * k));
            }
        }
    }
    let edges: Vec<(usize, usize, f64)> = problem
        .edges()
        .iter()
        .map(|&(i, j, w)| (i, j, lambda * w))
        .collect();
    let mut s = vec![0.0; edges.len()];
    let mut t = vec![0.0; kinks.len()];
    let scale = u.iter().fold(1f64, |m, x| m.max(x.abs()));
    let mut sweeps = 0usize;
    loop {
        let mut moved: f64 = 0.0;
        for (e, &(i, j, cap)) in edges.iter().enumerate() {
            let next = (s[e] + (u[i] - u[j])).clamp(-cap, cap);
            let d = next - s[e];
            if d != 0.0 {
                s[e] = next;
                u[i] -= 0.5 * d;
                u[j] += 0.5 * d;
                moved = moved.max(d.abs());
            }
        }
        for (k, &(i, b, cap)) in kinks.iter().enumerate() {
            let next = (t[k] + 2.0 * (u[i] - b)).clamp(-cap, cap);
            let d = next - t[k];
            if d != 0.0 {
                t[k] = next;
                u[i] -= 0.5 * d;
                moved = moved.max(d.abs());
            }
        }
        sweeps += 1;
        let settled = moved <= 1e-14 * scale;
        if settled || sweeps % 200 == 0 {
            if prox::certificate(problem, &u) < 1e-9 {
                return Ok(u);
            }
            if settled || sweeps >= 5_000_000 {
                return Ok(u);
            }
        }
    }
}
