//! Recursive bisection shared by the unweighted, weighted and anchored
//! solvers.
//!
//! Every node has a target level `y_i = r_i / w_i` in the minimum-norm
//! solution. A block is a node set whose levels are known to lie in an open
//! interval and whose outgoing edges already have their final pseudoflow
//! value. Processing a block picks a pivot `beta`, solves one cut problem for
//! `f_T(S) - beta * w(S)` and reads off both extreme minimum cuts. Nodes that
//! reach the sink have level below `beta`, nodes reachable from the source
//! have level above it, and the rest sit exactly at `beta`. Edges between the
//! three parts are saturated in the direction of the level order, which
//! fixes their value for good.
//!
//! Anchors are nodes with an unbounded weight and a prescribed level `b`.
//! For a pivot away from `b` they are pinned to one terminal. A pivot at `b`
//! takes one cut with them on each side, and the nodes left between the two
//! cuts share the anchors' level.

use rayon::prelude::*;

use crate::maxflow;
use crate::qbm::{CutGraph, QuadraticBinaryProblem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum NodeKind {
    Weighted(f64),
    Anchor(f64),
}

#[derive(Debug, Clone)]
struct Block {
    nodes: Vec<usize>,
}

#[derive(Debug, Default)]
struct Outcome {
    /// `(edge, alpha)` pairs whose value is final.
    fixed: Vec<(usize, f64)>,
    children: Vec<Block>,
}

struct BlockCut {
    edge_flow: Vec<f64>,
    /// Position in `edge_flow` of each block edge, `usize::MAX` if an
    /// endpoint was pinned.
    graph_edge_of: Vec<usize>,
    from_s: Vec<bool>,
    to_t: Vec<bool>,
}

impl BlockCut {
    fn alpha(&self, k: usize) -> Option<f64> {
        let g = self.graph_edge_of[k];
        (g != usize::MAX).then(|| 2.0 * self.edge_flow[g])
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Part {
    Below,
    At,
    Above,
}

struct State<'a> {
    problem: &'a QuadraticBinaryProblem,
    kinds: &'a [NodeKind],
    /// Diagonal plus the contributions of fixed edges.
    unary: Vec<f64>,
    fixed: Vec<bool>,
    alpha: Vec<f64>,
    /// Position of each node inside its current block.
    local: Vec<usize>,
}

/// Blocks with at least this many nodes in a round are solved in parallel.
const PARALLEL_WORK: usize = 2048;

/// Computes the optimal pseudoflow, one value per coupling of `problem`.
pub(crate) fn solve(problem: &QuadraticBinaryProblem, kinds: &[NodeKind]) -> Vec<f64> {
    let n = problem.len();
    debug_assert_eq!(kinds.len(), n);
    let m = problem.couplings().len();
    let mut st = State {
        problem,
        kinds,
        unary: problem.diag().to_vec(),
        fixed: vec![false; m],
        alpha: vec![0.0; m],
        local: vec![0; n],
    };
    let mut blocks = vec![Block {
        nodes: (0..n).collect(),
    }];
    while !blocks.is_empty() {
        for b in &blocks {
            for (k, &i) in b.nodes.iter().enumerate() {
                st.local[i] = k;
            }
        }
        let work: usize = blocks.iter().map(|b| b.nodes.len()).sum();
        let outcomes: Vec<Outcome> = if blocks.len() > 1 && work >= PARALLEL_WORK {
            blocks.par_iter().map(|b| st.process(b)).collect()
        } else {
            blocks.iter().map(|b| st.process(b)).collect()
        };
        blocks = Vec::new();
        for out in outcomes {
            for (e, a) in out.fixed {
                st.fix(e, a);
            }
            blocks.extend(out.children);
        }
    }
    debug_assert!(st.fixed.iter().all(|&f| f));
    st.alpha
}

impl State<'_> {
    fn fix(&mut self, e: usize, alpha: f64) {
        let c = self.problem.couplings()[e];
        let a = alpha.clamp(-c.q.abs(), c.q.abs());
        self.alpha[e] = a;
        self.fixed[e] = true;
        self.unary[c.i] += 0.5 * (c.q - a);
        self.unary[c.j] += 0.5 * (c.q + a);
    }

    /// Unfixed edges inside a block, each listed once.
    fn block_edges(&self, block: &Block) -> Vec<usize> {
        let mut edges = Vec::new();
        for &i in &block.nodes {
            for &e in self.problem.incident(i) {
                if !self.fixed[e] && self.problem.couplings()[e].i == i {
                    edges.push(e);
                }
            }
        }
        edges
    }

    fn process(&self, block: &Block) -> Outcome {
        let edges = self.block_edges(block);
        let nodes = &block.nodes;
        let mut anchors: Vec<f64> = Vec::new();
        let mut weight_sum = 0.0;
        let mut free = 0usize;
        for &i in nodes {
            match self.kinds[i] {
                NodeKind::Anchor(b) => anchors.push(b),
                NodeKind::Weighted(w) => {
                    weight_sum += w;
                    free += 1;
                }
            }
        }
        if edges.is_empty() || free == 0 {
            // Nothing couples the nodes any more, or only anchors are left.
            return self.finish(&edges, None);
        }

        // Blocks made only of zero-weight nodes are resolved in the limit of
        // equal vanishing weights, which orders them by r alone.
        let unit = anchors.is_empty() && weight_sum <= 0.0;
        let weight = |i: usize| match self.kinds[i] {
            NodeKind::Weighted(w) => {
                if unit {
                    1.0
                } else {
                    w
                }
            }
            NodeKind::Anchor(_) => 0.0,
        };
        let beta = if !anchors.is_empty() {
            anchors.sort_by(f64::total_cmp);
            anchors[(anchors.len() - 1) / 2]
        } else {
            let total: f64 = nodes.iter().map(|&i| self.unary[i]).sum::<f64>()
                + edges
                    .iter()
                    .map(|&e| self.problem.couplings()[e].q)
                    .sum::<f64>();
            let w_total = if unit { nodes.len() as f64 } else { weight_sum };
            total / w_total
        };

        // Anchors away from the pivot are pinned to the side their level is
        // on. Anchors at the pivot are pinned to the source side for the
        // lower cut and to the sink side for the upper one, the two limits
        // of a pivot approaching their level.
        let pin = |i: usize, at: Part| match self.kinds[i] {
            NodeKind::Anchor(b) if b < beta => Some(Part::Below),
            NodeKind::Anchor(b) if b > beta => Some(Part::Above),
            NodeKind::Anchor(_) => Some(at),
            NodeKind::Weighted(_) => None,
        };
        let lower = self.cut(nodes, &edges, beta, &weight, |i| pin(i, Part::Above));
        let upper = if anchors.is_empty() {
            None
        } else {
            Some(self.cut(nodes, &edges, beta, &weight, |i| pin(i, Part::Below)))
        };
        let from_s = &upper.as_ref().unwrap_or(&lower).from_s;

        let part: Vec<Part> = nodes
            .iter()
            .enumerate()
            .map(|(k, &i)| match pin(i, Part::At) {
                Some(p) => p,
                None if lower.to_t[k] => Part::Below,
                None if from_s[k] => Part::Above,
                None => Part::At,
            })
            .collect();

        let below = part.iter().filter(|&&p| p == Part::Below).count();
        let above = part.iter().filter(|&&p| p == Part::Above).count();
        if below == nodes.len() || above == nodes.len() {
            // Only reachable through rounding: the block behaves as a single
            // level. Accept the flow as it stands.
            let alphas: Vec<Option<f64>> = (0..edges.len()).map(|k| lower.alpha(k)).collect();
            return self.finish(&edges, Some(&alphas));
        }

        let mut out = Outcome::default();
        let mut inner = Vec::new();
        for (k, &e) in edges.iter().enumerate() {
            let c = self.problem.couplings()[e];
            let (pi, pj) = (part[self.local[c.i]], part[self.local[c.j]]);
            if pi != pj {
                let a = if pi > pj { c.q.abs() } else { -c.q.abs() };
                out.fixed.push((e, a));
            } else if pi == Part::At {
                if anchors.is_empty() {
                    out.fixed.push((e, lower.alpha(k).unwrap_or(0.0)));
                } else {
                    inner.push(e);
                }
            }
        }
        if !anchors.is_empty() {
            let crossing = out.fixed.clone();
            out.fixed
                .extend(self.balance_at(nodes, &part, &crossing, &inner, beta, &weight));
        }
        for side in [Part::Below, Part::Above] {
            let members: Vec<usize> = nodes
                .iter()
                .zip(&part)
                .filter(|(_, &p)| p == side)
                .map(|(&i, _)| i)
                .collect();
            if !members.is_empty() {
                out.children.push(Block { nodes: members });
            }
        }
        out
    }

    /// Solves the block cut at `beta` with some nodes pinned.
    fn cut(
        &self,
        nodes: &[usize],
        edges: &[usize],
        beta: f64,
        weight: &dyn Fn(usize) -> f64,
        pin: impl Fn(usize) -> Option<Part>,
    ) -> BlockCut {
        let mut terminal: Vec<f64> = nodes
            .iter()
            .map(|&i| self.unary[i] - beta * weight(i))
            .collect();
        let mut graph_edges = Vec::with_capacity(edges.len());
        let mut graph_edge_of = vec![usize::MAX; edges.len()];
        for (k, &e) in edges.iter().enumerate() {
            let c = self.problem.couplings()[e];
            let (li, lj) = (self.local[c.i], self.local[c.j]);
            match (pin(c.i), pin(c.j)) {
                (None, None) => {
                    terminal[li] += 0.5 * c.q;
                    terminal[lj] += 0.5 * c.q;
                    graph_edge_of[k] = graph_edges.len();
                    graph_edges.push((li, lj, -0.5 * c.q));
                }
                // An edge to a node pinned on the sink side adds q to the
                // free endpoint; one pinned on the source side adds nothing.
                (None, Some(Part::Below)) => terminal[li] += c.q,
                (Some(Part::Below), None) => terminal[lj] += c.q,
                _ => {}
            }
        }
        let mut graph = CutGraph::from_parts(terminal, Vec::new())
            .expect("block terminals are finite");
        for &(a, b, cap) in &graph_edges {
            graph.add_edge(a, b, cap).expect("block edges are valid");
        }
        let (flow, from_s, to_t) = maxflow::solve_cut_graph(&graph);
        BlockCut {
            edge_flow: flow.edge_flow,
            graph_edge_of,
            from_s,
            to_t,
        }
    }

    /// Pseudoflow on the edges inside the part at level `beta` when it holds
    /// anchors: every weighted node must end at exactly `beta * w_i` and the
    /// anchors, merged into one node, absorb the remainder.
    fn balance_at(
        &self,
        nodes: &[usize],
        part: &[Part],
        crossing: &[(usize, f64)],
        inner: &[usize],
        beta: f64,
        weight: &dyn Fn(usize) -> f64,
    ) -> Vec<(usize, f64)> {
        let mut slot = vec![usize::MAX; nodes.len()];
        let mut count = 0;
        for (k, &i) in nodes.iter().enumerate() {
            if part[k] == Part::At && matches!(self.kinds[i], NodeKind::Weighted(_)) {
                slot[k] = count;
                count += 1;
            }
        }
        let hub = count;
        let at_slot = |i: usize| {
            let s = slot[self.local[i]];
            if s == usize::MAX {
                hub
            } else {
                s
            }
        };
        let mut terminal = vec![0.0; count + 1];
        for (k, &i) in nodes.iter().enumerate() {
            if slot[k] != usize::MAX {
                terminal[slot[k]] = self.unary[i] - beta * weight(i);
            }
        }
        for &(e, a) in crossing {
            let c = self.problem.couplings()[e];
            if part[self.local[c.i]] == Part::At {
                terminal[at_slot(c.i)] += 0.5 * (c.q - a);
            }
            if part[self.local[c.j]] == Part::At {
                terminal[at_slot(c.j)] += 0.5 * (c.q + a);
            }
        }
        let mut graph_edges = Vec::with_capacity(inner.len());
        for &e in inner {
            let c = self.problem.couplings()[e];
            let (si, sj) = (at_slot(c.i), at_slot(c.j));
            if si != sj {
                terminal[si] += 0.5 * c.q;
                terminal[sj] += 0.5 * c.q;
                graph_edges.push((e, si, sj, -0.5 * c.q));
            }
        }
        terminal[hub] = -terminal[..hub].iter().sum::<f64>();
        let mut graph = CutGraph::from_parts(terminal, Vec::new())
            .expect("block terminals are finite");
        for &(_, a, b, cap) in &graph_edges {
            graph.add_edge(a, b, cap).expect("block edges are valid");
        }
        let (flow, _, _) = maxflow::solve_cut_graph(&graph);
        let mut fixed: Vec<(usize, f64)> = graph_edges
            .iter()
            .zip(&flow.edge_flow)
            .map(|(&(e, ..), &f)| (e, 2.0 * f))
            .collect();
        // Edges between two anchors at the same level carry nothing.
        fixed.extend(
            inner
                .iter()
                .filter(|&&e| {
                    let c = self.problem.couplings()[e];
                    at_slot(c.i) == at_slot(c.j)
                })
                .map(|&e| (e, 0.0)),
        );
        fixed
    }

    /// Fixes every internal edge, using the supplied values where given.
    fn finish(&self, edges: &[usize], alphas: Option<&[Option<f64>]>) -> Outcome {
        let fixed = edges
            .iter()
            .enumerate()
            .map(|(k, &e)| {
                let a = alphas.and_then(|v| v[k]).unwrap_or(self.alpha[e]);
                (e, a)
            })
            .collect();
        Outcome {
            fixed,
            children: Vec::new(),
        }
    }
}
