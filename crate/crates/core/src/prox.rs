//! Exact proximal operator of graph-fused penalties.
//!
//! Solves
//!
//! ```text
//! min_u ||u - a||^2 + lambda * ( sum_i xi_i(u_i) + sum_{(i,j)} w_ij |u_i - u_j| )
//! ```
//!
//! where every `xi_i` is convex and piecewise linear. Each threshold
//! `u <= beta` of the solution is a minimum cut, so the whole vector is the
//! minimum-norm reduction vector of one quadratic binary problem. Kinks of
//! `xi_i` enter as anchor nodes held at the kink location.

use crate::error::{Error, Result};
use crate::levels::{self, NodeKind};
use crate::maxflow::{Capacity, FlowNetwork};
use crate::parametric::reductions_unchecked;
use crate::qbm::QuadraticBinaryProblem;
use crate::weighted::WeightVector;

/// Convex piecewise-linear function given by its kinks `b_1 < ... < b_{m-1}`
/// and segment slopes `theta_1 <= ... <= theta_m`. It is represented up to an
/// additive constant, fixed by [`value`](Self::value).
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearPenalty {
    breakpoints: Vec<f64>,
    slopes: Vec<f64>,
}

/// `xi(u) = linear * u + sum_k weight_k |u - b_k|` (plus a constant).
#[derive(Debug, Clone, PartialEq)]
pub struct PwlDecomposition {
    pub linear: f64,
    /// `(b_k, weight_k)` with `weight_k >= 0`.
    pub anchors: Vec<(f64, f64)>,
}

/// Splits a convex piecewise-linear function into a linear term and
/// absolute values centred on its kinks.
pub fn pwl_decompose(breakpoints: &[f64], slopes: &[f64]) -> Result<PwlDecomposition> {
    if slopes.len() != breakpoints.len() + 1 {
        return Err(Error::DimensionMismatch {
            expected: breakpoints.len() + 1,
            got: slopes.len(),
        });
    }
    if breakpoints.iter().chain(slopes).any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("penalty values must be finite".into()));
    }
    if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::UnsortedBreakpoints);
    }
    if let Some(w) = slopes.windows(2).find(|w| w[1] < w[0]) {
        return Err(Error::NonConvexPenalty(w[1], w[0]));
    }
    let linear = 0.5 * (slopes[0] + slopes[slopes.len() - 1]);
    let anchors = breakpoints
        .iter()
        .zip(slopes.windows(2))
        .map(|(&b, s)| (b, 0.5 * (s[1] - s[0])))
        .collect();
    Ok(PwlDecomposition { linear, anchors })
}

impl PiecewiseLinearPenalty {
    pub fn new(breakpoints: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        pwl_decompose(&breakpoints, &slopes)?;
        Ok(Self {
            breakpoints,
            slopes,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn decompose(&self) -> PwlDecomposition {
        pwl_decompose(&self.breakpoints, &self.slopes).expect("validated on construction")
    }

    /// `linear * u + sum_k weight_k |u - b_k|`.
    pub fn value(&self, u: f64) -> f64 {
        let d = self.decompose();
        d.linear * u + d.anchors.iter().map(|(b, k)| k * (u - b).abs()).sum::<f64>()
    }

    /// Subdifferential `[lo, hi]` at `u`, treating kinks within `tol` of `u`
    /// as active.
    pub fn subdifferential(&self, u: f64, tol: f64) -> (f64, f64) {
        let mut lo = self.slopes[0];
        let mut hi = self.slopes[0];
        for (k, &b) in self.breakpoints.iter().enumerate() {
            if u > b + tol {
                lo = self.slopes[k + 1];
                hi = self.slopes[k + 1];
            } else if u >= b - tol {
                hi = self.slopes[k + 1];
            } else {
                break;
            }
        }
        (lo, hi)
    }
}

/// Input of the proximal operator.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxProblem {
    a: Vec<f64>,
    edges: Vec<(usize, usize, f64)>,
    lambda: f64,
    penalties: Vec<Option<PiecewiseLinearPenalty>>,
}

impl ProxProblem {
    /// `penalties` is either empty or holds one entry per node.
    pub fn new(
        a: Vec<f64>,
        edges: Vec<(usize, usize, f64)>,
        lambda: f64,
        penalties: Vec<Option<PiecewiseLinearPenalty>>,
    ) -> Result<Self> {
        let n = a.len();
        if let Some(i) = a.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("centre {i} is not finite")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("lambda must be >= 0, got {lambda}")));
        }
        for &(i, j, w) in &edges {
            for v in [i, j] {
                if v >= n {
                    return Err(Error::NodeOutOfRange { index: v, n });
                }
            }
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "edge ({i}, {j}) has invalid weight {w}"
                )));
            }
        }
        let penalties = if penalties.is_empty() {
            vec![None; n]
        } else if penalties.len() == n {
            penalties
        } else {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: penalties.len(),
            });
        };
        Ok(Self {
            a,
            edges,
            lambda,
            penalties,
        })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn center(&self) -> &[f64] {
        &self.a
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn penalty(&self, i: usize) -> Option<&PiecewiseLinearPenalty> {
        self.penalties[i].as_ref()
    }

    pub fn penalties(&self) -> &[Option<PiecewiseLinearPenalty>] {
        &self.penalties
    }

    /// Same regularizer around a different centre and scale.
    pub fn with_center(&self, a: Vec<f64>, lambda: f64) -> Result<Self> {
        Self::new(a, self.edges.clone(), lambda, self.penalties.clone())
    }

    /// The regularizer `sum_i xi_i(u_i) + sum w_ij |u_i - u_j|` without `lambda`.
    pub fn regularizer(&self, u: &[f64]) -> f64 {
        let pen: f64 = self
            .penalties
            .iter()
            .zip(u)
            .filter_map(|(p, &x)| p.as_ref().map(|p| p.value(x)))
            .sum();
        let tv: f64 = self
            .edges
            .iter()
            .map(|&(i, j, w)| w * (u[i] - u[j]).abs())
            .sum();
        pen + tv
    }

    pub fn objective(&self, u: &[f64]) -> f64 {
        let fit: f64 = u.iter().zip(&self.a).map(|(x, a)| (x - a) * (x - a)).sum();
        fit + self.lambda * self.regularizer(u)
    }
}

/// An auxiliary node holding one kink of a penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorNode {
    /// Original node the kink belongs to.
    pub node: usize,
    /// Level the anchor is held at.
    pub level: f64,
    /// Coupling magnitude `lambda * weight_k`.
    pub strength: f64,
}

/// Quadratic binary form of a proximal problem. Nodes `0..n` are the
/// original nodes with unit weight; node `n + k` is `anchors[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxModel {
    pub problem: QuadraticBinaryProblem,
    pub weights: WeightVector,
    pub anchors: Vec<AnchorNode>,
    /// Every level of the solution and every anchor lies in `(-bound, bound)`.
    pub bound: f64,
}

impl ProxModel {
    fn kinds(&self) -> Vec<NodeKind> {
        self.weights
            .iter()
            .map(|&w| NodeKind::Weighted(w))
            .chain(self.anchors.iter().map(|a| NodeKind::Anchor(a.level)))
            .collect()
    }
}

/// Builds the quadratic binary problem whose `beta`-cut is `{u_i <= beta}`.
///
/// Node `i` has unary energy `a'_i x_i` with `a' = a - lambda * linear / 2`,
/// each edge contributes `(lambda w_ij / 2) [x_i != x_j]`, and each kink
/// `(b, kappa)` is an anchor at level `b` joined to its node by the same
/// disagreement energy with weight `lambda * kappa`.
pub fn build_prox_qbm(problem: &ProxProblem) -> ProxModel {
    let n = problem.len();
    let lambda = problem.lambda;
    let mut diag: Vec<f64> = problem.a.clone();
    let mut couplings = Vec::with_capacity(problem.edges.len());
    let mut anchors = Vec::new();
    let mut spread: f64 = 0.0;
    for (i, p) in problem.penalties.iter().enumerate() {
        if let Some(p) = p {
            let d = p.decompose();
            diag[i] -= 0.5 * lambda * d.linear;
            for (b, kappa) in d.anchors {
                let strength = lambda * kappa;
                spread = spread.max(b.abs());
                if strength > 0.0 {
                    anchors.push(AnchorNode {
                        node: i,
                        level: b,
                        strength,
                    });
                }
            }
        }
    }
    let mut pull = vec![0.0; n];
    for &(i, j, w) in &problem.edges {
        let s = lambda * w;
        if s > 0.0 {
            diag[i] += 0.5 * s;
            diag[j] += 0.5 * s;
            pull[i] += 0.5 * s;
            pull[j] += 0.5 * s;
            couplings.push((i, j, -s));
        }
    }
    for (k, anchor) in anchors.iter().enumerate() {
        let s = anchor.strength;
        diag[anchor.node] += 0.5 * s;
        pull[anchor.node] += 0.5 * s;
        diag.push(0.5 * s);
        couplings.push((anchor.node, n + k, -s));
    }
    // u_i = a'_i minus half the net subgradient pull, at most pull_i.
    for i in 0..n {
        spread = spread.max((diag[i] - pull[i]).abs() + pull[i]);
    }
    let problem = QuadraticBinaryProblem::new(diag, couplings)
        .expect("prox couplings are nonpositive by construction");
    ProxModel {
        problem,
        weights: WeightVector::ones(n),
        anchors,
        bound: 1.0 + spread,
    }
}

/// The proximal point.
pub fn prox(problem: &ProxProblem) -> Vec<f64> {
    let model = build_prox_qbm(problem);
    let alpha = levels::solve(&model.problem, &model.kinds());
    let mut u = reductions_unchecked(&model.problem, &alpha);
    u.truncate(problem.len());
    u
}

/// Smallest `||2(u - a) + D^T z + g||_inf` over valid subgradient choices:
/// `z_ij = lambda w_ij sign(u_i - u_j)` on edges whose endpoints differ,
/// `z_ij` in `lambda w_ij [-1, 1]` on fused edges, and `g_i` in
/// `lambda * subdifferential(xi_i)(u_i)`. Zero certifies optimality.
///
/// The minimum is located by bisection on the residual level; each probe is
/// a bounded circulation feasibility problem solved by maximum flow.
pub fn certificate(problem: &ProxProblem, u: &[f64]) -> f64 {
    let n = problem.len();
    assert_eq!(u.len(), n, "certificate: length mismatch");
    let lambda = problem.lambda;
    let same = |x: f64, y: f64| (x - y).abs() <= crate::tol::zero_band(x.abs().max(y.abs()));
    let base: Vec<f64> = (0..n).map(|i| 2.0 * (u[i] - problem.a[i])).collect();
    let mut g_range = vec![(0.0, 0.0); n];
    for i in 0..n {
        if let Some(p) = &problem.penalties[i] {
            let (lo, hi) = p.subdifferential(u[i], crate::tol::zero_band(u[i]));
            g_range[i] = (lambda * lo, lambda * hi);
        }
    }
    // Edge flow bounds, oriented i -> j, and the contribution of forced edges.
    let mut forced = vec![0.0; n];
    let mut free_edges = Vec::new();
    for &(i, j, w) in &problem.edges {
        let cap = lambda * w;
        if cap == 0.0 {
            continue;
        }
        if same(u[i], u[j]) {
            free_edges.push((i, j, cap));
        } else {
            let z = if u[i] > u[j] { cap } else { -cap };
            forced[i] += z;
            forced[j] -= z;
        }
    }
    let fixed: Vec<f64> = (0..n).map(|i| base[i] + forced[i]).collect();

    // Greedy feasible point: free edges at zero, g as close as possible.
    let greedy = (0..n)
        .map(|i| {
            let (lo, hi) = g_range[i];
            let g = (-fixed[i]).clamp(lo, hi);
            (fixed[i] + g).abs()
        })
        .fold(0.0, f64::max);
    if free_edges.is_empty() || greedy == 0.0 {
        return greedy;
    }
    let feasible = |t: f64| circulation_feasible(n, &fixed, &g_range, &free_edges, t);
    if feasible(0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, greedy);
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi.max(1e-300) || hi < 1e-15 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Is there `y` with `y_i = (net outflow of free edges at i)` in
/// `[-fixed_i - g_hi - t, -fixed_i - g_lo + t]` and edge flows in `[-cap, cap]`?
fn circulation_feasible(
    n: usize,
    fixed: &[f64],
    g_range: &[(f64, f64)],
    free_edges: &[(usize, usize, f64)],
    t: f64,
) -> bool {
    // Nodes: 0..n, hub n, super source n+1, super sink n+2. An arc with
    // bounds [l, u] becomes capacity u - l plus the mandatory l.
    let hub = n;
    let (ss, tt) = (n + 1, n + 2);
    let mut imbalance = vec![0.0; n + 1];
    let mut arcs = Vec::with_capacity(n + free_edges.len());
    let mut add = |p: usize, q: usize, l: f64, u: f64, imbalance: &mut Vec<f64>| {
        arcs.push((p, q, (u - l).max(0.0)));
        imbalance[q] += l;
        imbalance[p] -= l;
    };
    for i in 0..n {
        let (glo, ghi) = g_range[i];
        add(hub, i, -fixed[i] - ghi - t, -fixed[i] - glo + t, &mut imbalance);
    }
    for &(i, j, cap) in free_edges {
        add(i, j, -cap, cap, &mut imbalance);
    }
    let mut net = FlowNetwork::new(n + 3, ss, tt).expect("valid terminals");
    for (p, q, c) in arcs {
        net.add_arc(p, q, Capacity::Finite(c)).expect("valid arc");
    }
    let mut demand = 0.0;
    let mut scale: f64 = 1.0;
    for (v, &b) in imbalance.iter().enumerate() {
        scale = scale.max(b.abs());
        if b > 0.0 {
            net.add_arc(ss, v, Capacity::Finite(b)).expect("valid arc");
            demand += b;
        } else if b < 0.0 {
            net.add_arc(v, tt, Capacity::Finite(-b)).expect("valid arc");
        }
    }
    let flow = net.max_flow().value;
    flow >= demand - 1e-12 * scale * (n as f64 + 1.0)
}
