//! Pseudoflows, reduction vectors and the unweighted parametric solver.
//!
//! For a pseudoflow `alpha` with `|alpha_ij| <= |q_ij|` the reduction vector
//!
//! ```text
//! r_i = q_ii + 1/2 sum_{i'<i} (q_i'i + alpha_i'i) + 1/2 sum_{j>i} (q_ij - alpha_ij)
//! ```
//!
//! is a point of the base polytope of `f`. At the minimum-norm point, the
//! sets `{r_i < beta w_i}` and `{r_i <= beta w_i}` are the smallest and
//! largest minimizers of `f(S) - beta w(S)` for every `beta`.

use crate::error::{Error, Result};
use crate::levels::{self, NodeKind};
use crate::qbm::QuadraticBinaryProblem;
use crate::NodeSet;

/// Reduction vector `r(alpha)`.
pub type ReductionVector = Vec<f64>;

/// One value per coupling of the problem it was built for, in the order of
/// [`QuadraticBinaryProblem::couplings`].
#[derive(Debug, Clone, PartialEq)]
pub struct Pseudoflow {
    alpha: Vec<f64>,
}

impl Pseudoflow {
    /// The all-zero pseudoflow.
    pub fn zero(problem: &QuadraticBinaryProblem) -> Self {
        Self {
            alpha: vec![0.0; problem.couplings().len()],
        }
    }

    /// Wraps raw values after checking the box constraints.
    pub fn from_values(problem: &QuadraticBinaryProblem, alpha: Vec<f64>) -> Result<Self> {
        let flow = Self { alpha };
        flow.validate(problem)?;
        Ok(flow)
    }

    pub(crate) fn from_values_unchecked(alpha: Vec<f64>) -> Self {
        Self { alpha }
    }

    pub fn values(&self) -> &[f64] {
        &self.alpha
    }

    /// Value on edge `(i, j)` oriented from `i` to `j`; zero when absent.
    pub fn get(&self, problem: &QuadraticBinaryProblem, i: usize, j: usize) -> f64 {
        match problem.coupling_index(i, j) {
            Some(e) if i < j => self.alpha[e],
            Some(e) => -self.alpha[e],
            None => 0.0,
        }
    }

    pub fn validate(&self, problem: &QuadraticBinaryProblem) -> Result<()> {
        let couplings = problem.couplings();
        if self.alpha.len() != couplings.len() {
            return Err(Error::DimensionMismatch {
                expected: couplings.len(),
                got: self.alpha.len(),
            });
        }
        for (c, &a) in couplings.iter().zip(&self.alpha) {
            let bound = c.q.abs();
            if !(a.abs() <= bound * (1.0 + crate::tol::EQ_REL)) {
                return Err(Error::AlphaOutOfBox {
                    i: c.i,
                    j: c.j,
                    value: a,
                    bound,
                });
            }
        }
        Ok(())
    }
}

/// `r(alpha)` for a feasible pseudoflow.
pub fn reductions(problem: &QuadraticBinaryProblem, alpha: &Pseudoflow) -> Result<ReductionVector> {
    alpha.validate(problem)?;
    Ok(reductions_unchecked(problem, &alpha.alpha))
}

pub(crate) fn reductions_unchecked(problem: &QuadraticBinaryProblem, alpha: &[f64]) -> Vec<f64> {
    let mut r = problem.diag().to_vec();
    for (c, &a) in problem.couplings().iter().zip(alpha) {
        r[c.i] += 0.5 * (c.q - a);
        r[c.j] += 0.5 * (c.q + a);
    }
    r
}

/// Minimum-norm pseudoflow: minimizes `||r(alpha)||_2` over the box.
pub fn alpha_reduction(problem: &QuadraticBinaryProblem) -> Pseudoflow {
    let kinds = vec![NodeKind::Weighted(1.0); problem.len()];
    Pseudoflow::from_values_unchecked(levels::solve(problem, &kinds))
}

fn level_band(r: f64, bw: f64) -> f64 {
    crate::tol::EQ_REL * 1f64.max(r.abs()).max(bw.abs())
}

/// `(U1, U2)` with `U1 = {r_i - beta w_i < 0}` and `U2 = {r_i - beta w_i <= 0}`,
/// comparisons taken with a relative tolerance of `1e-9`.
pub fn level_sets(r: &[f64], weights: &[f64], beta: f64) -> (NodeSet, NodeSet) {
    let mut u1 = NodeSet::new();
    let mut u2 = NodeSet::new();
    for (i, (&ri, &wi)) in r.iter().zip(weights).enumerate() {
        let bw = beta * wi;
        let band = level_band(ri, bw);
        let z = ri - bw;
        if z < -band {
            u1.insert(i);
        }
        if z <= band {
            u2.insert(i);
        }
    }
    (u1, u2)
}

/// Sorted distinct `r_i / w_i` over nodes with positive weight. Values within
/// the comparison tolerance are merged.
pub fn breakpoints(r: &[f64], weights: &[f64]) -> Vec<f64> {
    let mut values: Vec<f64> = r
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&ri, &wi)| ri / wi)
        .collect();
    values.sort_by(f64::total_cmp);
    values.dedup_by(|a, b| crate::tol::approx_eq(*a, *b));
    values
}

/// Level `y_i = r_i / w_i`; zero-weight nodes sit at `-inf`, `+inf` or `0`
/// depending on the sign of `r_i`.
pub(crate) fn level(r: f64, w: f64, scale: f64) -> f64 {
    if w > 0.0 {
        r / w
    } else if r.abs() <= crate::tol::zero_band(scale) {
        0.0
    } else if r < 0.0 {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    }
}

/// Checks the saturation conditions: every edge whose endpoints have
/// different levels carries `+|q|` toward the lower level.
pub fn check_optimality(problem: &QuadraticBinaryProblem, alpha: &Pseudoflow, weights: &[f64]) -> bool {
    if alpha.validate(problem).is_err() || weights.len() != problem.len() {
        return false;
    }
    let r = reductions_unchecked(problem, &alpha.alpha);
    let scale = r.iter().fold(1f64, |m, x| m.max(x.abs()));
    for (c, &a) in problem.couplings().iter().zip(&alpha.alpha) {
        let (wi, wj) = (weights[c.i], weights[c.j]);
        let zero_tie = |r: f64, w: f64| w <= 0.0 && r.abs() <= crate::tol::zero_band(scale);
        if zero_tie(r[c.i], wi) || zero_tie(r[c.j], wj) {
            continue;
        }
        let (yi, yj) = (level(r[c.i], wi, scale), level(r[c.j], wj, scale));
        if yi.is_infinite() && yi == yj {
            continue;
        }
        let gap = yi - yj;
        let band = crate::tol::zero_band(yi.abs().max(yj.abs()));
        let bound = c.q.abs();
        let near = |x: f64| (a - x).abs() <= 1e-9 * bound.max(1.0);
        if gap > band && !near(bound) {
            return false;
        }
        if gap < -band && !near(-bound) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{brute_force_minimizers, random_problem};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn running_example() -> QuadraticBinaryProblem {
        QuadraticBinaryProblem::new(vec![0.5, 2.5], [(0, 1, -1.0)]).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn reductions_examples() {
        let q = QuadraticBinaryProblem::new(vec![1.0, -2.0], []).unwrap();
        assert_eq!(reductions(&q, &Pseudoflow::zero(&q)).unwrap(), vec![1.0, -2.0]);
        let q = running_example();
        assert_eq!(reductions(&q, &Pseudoflow::zero(&q)).unwrap(), vec![0.0, 2.0]);
    }

    #[test]
    fn alpha_outside_box_is_rejected() {
        let q = running_example();
        assert!(matches!(
            Pseudoflow::from_values(&q, vec![1.5]),
            Err(Error::AlphaOutOfBox { .. })
        ));
    }

    #[test]
    fn alpha_reduction_examples() {
        let q = running_example();
        let a = alpha_reduction(&q);
        assert!((a.values()[0] + 1.0).abs() < 1e-12);
        assert!(close(&reductions(&q, &a).unwrap(), &[0.5, 1.5], 1e-12));

        let q = QuadraticBinaryProblem::new(vec![1.0, 1.0], [(0, 1, -1.0)]).unwrap();
        let a = alpha_reduction(&q);
        assert!(a.values()[0].abs() < 1e-12);
        assert!(close(&reductions(&q, &a).unwrap(), &[0.5, 0.5], 1e-12));

        let q = QuadraticBinaryProblem::new(vec![3.0, -1.0, 0.25], []).unwrap();
        let r = reductions(&q, &alpha_reduction(&q)).unwrap();
        assert_eq!(r, vec![3.0, -1.0, 0.25]);
    }

    #[test]
    fn level_set_examples() {
        let w = [1.0, 1.0];
        let r = [0.5, 1.5];
        assert_eq!(level_sets(&r, &w, 0.0), (NodeSet::new(), NodeSet::new()));
        let one = NodeSet::from([0]);
        assert_eq!(level_sets(&r, &w, 1.0), (one.clone(), one.clone()));
        let (u1, u2) = level_sets(&r, &w, 0.5);
        assert!(!u1.contains(&0) && u2.contains(&0));
    }

    #[test]
    fn breakpoint_examples() {
        assert_eq!(breakpoints(&[0.5, 1.5], &[1.0, 1.0]), vec![0.5, 1.5]);
        assert_eq!(breakpoints(&[2.0, 2.0, 2.0], &[1.0; 3]), vec![2.0]);
        assert_eq!(breakpoints(&[1.0, 3.0], &[1.0, 3.0]), vec![1.0]);
        assert_eq!(breakpoints(&[1.0, 3.0], &[0.0, 1.0]), vec![3.0]);
    }

    #[test]
    fn optimality_examples() {
        let q = running_example();
        let w = [1.0, 1.0];
        assert!(check_optimality(&q, &alpha_reduction(&q), &w));
        assert!(!check_optimality(&q, &Pseudoflow::zero(&q), &w));
        let single = QuadraticBinaryProblem::new(vec![4.0], []).unwrap();
        assert!(check_optimality(&single, &Pseudoflow::zero(&single), &[1.0]));
    }

    #[test]
    fn random_instances_are_optimal_and_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..40 {
            let n = rng.random_range(1..=9);
            let q = random_problem(&mut rng, n, 0.5);
            let w = vec![1.0; n];
            let alpha = alpha_reduction(&q);
            assert!(check_optimality(&q, &alpha, &w));
            let r = reductions(&q, &alpha).unwrap();
            let lo = r.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
            let hi = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
            for k in 0..20 {
                let beta = lo + (hi - lo) * (k as f64 + 0.5) / 20.0;
                let brute = brute_force_minimizers(&q, beta, &w).unwrap();
                assert_eq!(level_sets(&r, &w, beta), (brute.s_min, brute.s_max));
            }
        }
    }

    fn arb_problem() -> impl Strategy<Value = QuadraticBinaryProblem> {
        (1usize..8).prop_flat_map(|n| {
            let diag = prop::collection::vec(-3.0f64..3.0, n);
            let offdiag = prop::collection::vec(prop::option::of(-2.0f64..0.0), n * (n - 1) / 2);
            (diag, offdiag).prop_map(move |(diag, off)| {
                let mut pairs = Vec::new();
                let mut k = 0;
                for i in 0..n {
                    for j in i + 1..n {
                        if let Some(q) = off[k] {
                            pairs.push((i, j, q));
                        }
                        k += 1;
                    }
                }
                QuadraticBinaryProblem::new(diag, pairs).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn sum_of_reductions_is_independent_of_alpha(
            q in arb_problem(),
            t in prop::collection::vec(-1.0f64..1.0, 64),
        ) {
            let alpha: Vec<f64> = q
                .couplings()
                .iter()
                .enumerate()
                .map(|(k, c)| t[k % t.len()] * c.q.abs())
                .collect();
            let r = reductions(&q, &Pseudoflow::from_values(&q, alpha).unwrap()).unwrap();
            let r0 = reductions(&q, &Pseudoflow::zero(&q)).unwrap();
            let total: f64 = q.diag().iter().sum::<f64>()
                + q.couplings().iter().map(|c| c.q).sum::<f64>();
            prop_assert!((r.iter().sum::<f64>() - total).abs() < 1e-9);
            prop_assert!((r0.iter().sum::<f64>() - total).abs() < 1e-9);
        }

        #[test]
        fn minimum_norm_beats_feasible_alternatives(
            q in arb_problem(),
            t in prop::collection::vec(-1.0f64..1.0, 64),
        ) {
            let best = reductions(&q, &alpha_reduction(&q)).unwrap();
            let alpha: Vec<f64> = q
                .couplings()
                .iter()
                .enumerate()
                .map(|(k, c)| t[k % t.len()] * c.q.abs())
                .collect();
            let other = reductions(&q, &Pseudoflow::from_values(&q, alpha).unwrap()).unwrap();
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
            prop_assert!(norm(&best) <= norm(&other) + 1e-9);
        }

        #[test]
        fn level_sets_are_nested(q in arb_problem(), b1 in -4.0f64..4.0, d in 0.0f64..3.0) {
            let r = reductions(&q, &alpha_reduction(&q)).unwrap();
            let w = vec![1.0; q.len()];
            let (a1, a2) = level_sets(&r, &w, b1);
            let (c1, c2) = level_sets(&r, &w, b1 + d);
            prop_assert!(a1.is_subset(&c1));
            prop_assert!(a2.is_subset(&c2));
        }

        #[test]
        fn shifting_the_diagonal_shifts_the_levels(q in arb_problem(), delta in -3.0f64..3.0) {
            let r = reductions(&q, &alpha_reduction(&q)).unwrap();
            let shifted = q.shifted(-delta);
            let rs = reductions(&shifted, &alpha_reduction(&shifted)).unwrap();
            for (a, b) in r.iter().zip(&rs) {
                prop_assert!((a - delta - b).abs() < 1e-9);
            }
        }
    }
}
