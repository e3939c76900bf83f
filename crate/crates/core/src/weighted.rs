//! Weighted minimum-norm reductions.
//!
//! The pseudoflow returned by [`find_weighted_reductions`] minimizes
//! `sum_i r_i(alpha)^2 / w_i`. Its scaled level sets `{r_i < beta w_i}` and
//! `{r_i <= beta w_i}` are the smallest and largest minimizers of
//! `f(S) - beta w(S)`. Nodes with `w_i = 0` never change membership with
//! `beta`; they are resolved as the limit of a vanishing positive weight.

use crate::error::{Error, Result};
use crate::levels::{self, NodeKind};
use crate::maxflow;
use crate::parametric::{reductions_unchecked, Pseudoflow};
use crate::qbm::{CutGraph, QuadraticBinaryProblem};
use crate::NodeSet;

/// Finite, nonnegative node weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    w: Vec<f64>,
}

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        for (index, &value) in w.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidWeight { index, value });
            }
        }
        Ok(Self { w })
    }

    pub fn ones(n: usize) -> Self {
        Self { w: vec![1.0; n] }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    /// Indices with strictly positive weight.
    pub fn positive(&self) -> NodeSet {
        (0..self.w.len()).filter(|&i| self.w[i] > 0.0).collect()
    }
}

impl std::ops::Deref for WeightVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.w
    }
}

fn check_len(problem: &QuadraticBinaryProblem, got: usize) -> Result<()> {
    if got != problem.len() {
        return Err(Error::DimensionMismatch {
            expected: problem.len(),
            got,
        });
    }
    Ok(())
}

/// Weighted minimum-norm pseudoflow.
pub fn find_weighted_reductions(
    problem: &QuadraticBinaryProblem,
    weights: &WeightVector,
) -> Result<Pseudoflow> {
    check_len(problem, weights.len())?;
    let kinds: Vec<NodeKind> = weights.iter().map(|&w| NodeKind::Weighted(w)).collect();
    Ok(Pseudoflow::from_values_unchecked(levels::solve(problem, &kinds)))
}

/// One bisection step on the block `T` under the pseudoflow `alpha`.
///
/// Edges leaving `T` keep their value from `alpha`. The pivot is
/// `beta = sum_T r_i / sum_T w_i` (zero when every weight in `T` is zero),
/// and the cut problem on `T` has unary terms `rho_i = r_i - beta w_i`.
/// Returns the largest minimizing set, or the empty set when every `rho_i`
/// vanishes and `T` is a single level.
pub fn weighted_bisection_cut(
    problem: &QuadraticBinaryProblem,
    weights: &WeightVector,
    block: &NodeSet,
    alpha: &Pseudoflow,
) -> Result<NodeSet> {
    check_len(problem, weights.len())?;
    alpha.validate(problem)?;
    for &i in block {
        if i >= problem.len() {
            return Err(Error::NodeOutOfRange {
                index: i,
                n: problem.len(),
            });
        }
    }
    if block.is_empty() {
        return Ok(NodeSet::new());
    }
    let r = reductions_unchecked(problem, alpha.values());
    let w_total: f64 = block.iter().map(|&i| weights[i]).sum();
    let beta = if w_total > 0.0 {
        block.iter().map(|&i| r[i]).sum::<f64>() / w_total
    } else {
        0.0
    };
    let scale = block.iter().fold(1f64, |m, &i| m.max(r[i].abs()));
    if block
        .iter()
        .all(|&i| (r[i] - beta * weights[i]).abs() <= crate::tol::zero_band(scale))
    {
        return Ok(NodeSet::new());
    }

    let nodes: Vec<usize> = block.iter().copied().collect();
    let mut local = vec![usize::MAX; problem.len()];
    for (k, &i) in nodes.iter().enumerate() {
        local[i] = k;
    }
    // Start from r and take back the internal edges' share of alpha, then
    // add them again as cut edges.
    let mut terminal: Vec<f64> = nodes.iter().map(|&i| r[i] - beta * weights[i]).collect();
    let mut edges = Vec::new();
    for (c, &a) in problem.couplings().iter().zip(alpha.values()) {
        let (li, lj) = (local[c.i], local[c.j]);
        if li == usize::MAX || lj == usize::MAX {
            continue;
        }
        terminal[li] -= 0.5 * (c.q - a);
        terminal[lj] -= 0.5 * (c.q + a);
        terminal[li] += 0.5 * c.q;
        terminal[lj] += 0.5 * c.q;
        edges.push((li, lj, -0.5 * c.q));
    }
    let graph = CutGraph::from_parts(terminal, edges)?;
    let (_, from_s, _) = maxflow::solve_cut_graph(&graph);
    Ok(nodes
        .iter()
        .enumerate()
        .filter(|&(k, _)| !from_s[k])
        .map(|(_, &i)| i)
        .collect())
}

/// Replaces each node `i` of integer weight `w_i` by `w_i` unit-weight copies
/// tied together. Returns the augmented problem and, for every augmented
/// node, the original node it copies (the first `n` entries are the
/// identity).
///
/// The tie is a coupling of `-2M` with `+M` on both diagonals, where `M`
/// exceeds twice the total magnitude of the problem's coefficients. That is
/// large enough that tied nodes always share a level, so the tie behaves as
/// an unbounded one for every level set.
pub fn augment_integer_weights(
    problem: &QuadraticBinaryProblem,
    int_weights: &[f64],
) -> Result<(QuadraticBinaryProblem, Vec<usize>)> {
    check_len(problem, int_weights.len())?;
    for (index, &value) in int_weights.iter().enumerate() {
        if !(value >= 1.0 && value.fract() == 0.0 && value.is_finite()) {
            return Err(Error::WeightNotPositiveInteger { index, value });
        }
    }
    let magnitude: f64 = problem.diag().iter().map(|d| d.abs()).sum::<f64>()
        + problem.couplings().iter().map(|c| c.q.abs()).sum::<f64>();
    let tie = 2.0 * magnitude + 1.0;
    let mut diag = problem.diag().to_vec();
    let mut couplings: Vec<(usize, usize, f64)> =
        problem.couplings().iter().map(|c| (c.i, c.j, c.q)).collect();
    let mut owner: Vec<usize> = (0..problem.len()).collect();
    for (i, &w) in int_weights.iter().enumerate() {
        for _ in 1..(w as usize) {
            let k = diag.len();
            diag.push(tie);
            diag[i] += tie;
            couplings.push((i, k, -2.0 * tie));
            owner.push(i);
        }
    }
    Ok((QuadraticBinaryProblem::new(diag, couplings)?, owner))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{brute_force_minimizers, random_problem};
    use crate::parametric::{alpha_reduction, level_sets, reductions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_weights_match_unweighted() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let n = rng.random_range(1..=10);
            let q = random_problem(&mut rng, n, 0.5);
            let a = reductions(&q, &alpha_reduction(&q)).unwrap();
            let b = reductions(&q, &find_weighted_reductions(&q, &WeightVector::ones(n)).unwrap())
                .unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn single_node_flips_at_ratio() {
        let q = QuadraticBinaryProblem::new(vec![2.0], []).unwrap();
        let w = WeightVector::new(vec![2.0]).unwrap();
        let r = reductions(&q, &find_weighted_reductions(&q, &w).unwrap()).unwrap();
        assert_eq!(r, vec![2.0]);
        assert!(level_sets(&r, &w, 0.99).1.is_empty());
        assert_eq!(level_sets(&r, &w, 1.01).0, NodeSet::from([0]));
    }

    #[test]
    fn invalid_weights_rejected() {
        assert!(matches!(
            WeightVector::new(vec![1.0, -0.5]),
            Err(Error::InvalidWeight { index: 1, .. })
        ));
        assert!(WeightVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn random_weighted_instances_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let n = rng.random_range(1..=9);
            let q = random_problem(&mut rng, n, 0.5);
            let w = WeightVector::new((0..n).map(|_| rng.random_range(0.1..5.0)).collect())
                .unwrap();
            let r = reductions(&q, &find_weighted_reductions(&q, &w).unwrap()).unwrap();
            for _ in 0..20 {
                let beta = rng.random_range(-6.0..6.0);
                let brute = brute_force_minimizers(&q, beta, &w).unwrap();
                assert_eq!(level_sets(&r, &w, beta), (brute.s_min, brute.s_max));
            }
        }
    }

    #[test]
    fn bisection_cut_examples() {
        let q = QuadraticBinaryProblem::new(vec![0.5, 2.5], [(0, 1, -1.0)]).unwrap();
        let w = WeightVector::ones(2);
        let all = NodeSet::from([0, 1]);
        let cut = weighted_bisection_cut(&q, &w, &all, &Pseudoflow::zero(&q)).unwrap();
        assert_eq!(cut, NodeSet::from([0]));

        let flat = QuadraticBinaryProblem::new(vec![1.0, 2.0], []).unwrap();
        let w = WeightVector::new(vec![1.0, 2.0]).unwrap();
        let cut = weighted_bisection_cut(&flat, &w, &all, &Pseudoflow::zero(&flat)).unwrap();
        assert!(cut.is_empty());

        let signs = QuadraticBinaryProblem::new(vec![1.0, -2.0, 0.5, -0.1], [(0, 1, -0.5)])
            .unwrap();
        let w = WeightVector::new(vec![0.0; 4]).unwrap();
        let block = NodeSet::from([0, 1, 2, 3]);
        let cut = weighted_bisection_cut(&signs, &w, &block, &Pseudoflow::zero(&signs)).unwrap();
        let brute = brute_force_minimizers(&signs, 0.0, &w).unwrap();
        assert_eq!(cut, brute.s_max);
    }

    #[test]
    fn augmentation_identity_and_single_node() {
        let q = QuadraticBinaryProblem::new(vec![1.0, -1.0], [(0, 1, -0.5)]).unwrap();
        let (aug, owner) = augment_integer_weights(&q, &[1.0, 1.0]).unwrap();
        assert_eq!(aug, q);
        assert_eq!(owner, vec![0, 1]);

        let q = QuadraticBinaryProblem::new(vec![2.0], []).unwrap();
        let (aug, owner) = augment_integer_weights(&q, &[2.0]).unwrap();
        assert_eq!(aug.len(), 2);
        assert_eq!(owner, vec![0, 0]);
        let r = reductions(&aug, &alpha_reduction(&aug)).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-9 && (r[1] - 1.0).abs() < 1e-9);

        assert!(matches!(
            augment_integer_weights(&q, &[1.5]),
            Err(Error::WeightNotPositiveInteger { .. })
        ));
    }

    #[test]
    fn augmentation_matches_weighted_levels() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let n = rng.random_range(1..=6);
            let q = random_problem(&mut rng, n, 0.5);
            let wi: Vec<f64> = (0..n).map(|_| rng.random_range(1..=3) as f64).collect();
            let w = WeightVector::new(wi.clone()).unwrap();
            let z = reductions(&q, &find_weighted_reductions(&q, &w).unwrap()).unwrap();
            let (aug, owner) = augment_integer_weights(&q, &wi).unwrap();
            let ra = reductions(&aug, &alpha_reduction(&aug)).unwrap();
            for i in 0..n {
                let group: f64 = (0..aug.len()).filter(|&k| owner[k] == i).map(|k| ra[k]).sum();
                assert!((group - z[i]).abs() < 1e-7);
                assert!((ra[i] - z[i] / wi[i]).abs() < 1e-7);
            }
        }
    }
}
