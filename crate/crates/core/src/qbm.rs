//! Problem representations: pairwise energy tables, the quadratic binary
//! form `f(S) = sum_{i<j in S} q_ij + sum_{i in S} q_ii`, and the s-t cut
//! graphs that realise `f(S) - beta * w(S)` up to an additive constant.
//!
//! Throughout the crate a node set `S` is the set of variables with
//! `x_i = 1`. In a [`CutGraph`] those are the nodes on the sink side of the
//! cut.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::NodeSet;

/// A 2x2 pairwise energy, indexed `table[x_i][x_j]`.
pub type PairTable = [[f64; 2]; 2];

/// Unary and pairwise energies over binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTable {
    n: usize,
    unary: Vec<[f64; 2]>,
    pairwise: BTreeMap<(usize, usize), PairTable>,
}

impl EnergyTable {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            unary: vec![[0.0; 2]; n],
            pairwise: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn set_unary(&mut self, i: usize, e0: f64, e1: f64) -> Result<()> {
        check_index(i, self.n)?;
        self.unary[i] = [e0, e1];
        Ok(())
    }

    /// Sets the table for edge `(i, j)`. If `i > j` the table is transposed so
    /// that the stored key always has `i < j`.
    pub fn set_pairwise(&mut self, i: usize, j: usize, table: PairTable) -> Result<()> {
        check_index(i, self.n)?;
        check_index(j, self.n)?;
        if i == j {
            return Err(Error::SelfLoop(i));
        }
        let (key, t) = if i < j {
            ((i, j), table)
        } else {
            (
                (j, i),
                [[table[0][0], table[1][0]], [table[0][1], table[1][1]]],
            )
        };
        self.pairwise.insert(key, t);
        Ok(())
    }

    pub fn unary(&self, i: usize) -> [f64; 2] {
        self.unary[i]
    }

    pub fn pairwise(&self) -> impl Iterator<Item = (&(usize, usize), &PairTable)> {
        self.pairwise.iter()
    }

    pub fn is_submodular(&self) -> bool {
        self.pairwise.values().all(is_submodular_table)
    }

    /// Total energy of a labelling.
    pub fn energy(&self, x: &[bool]) -> f64 {
        let mut e: f64 = (0..self.n).map(|i| self.unary[i][x[i] as usize]).sum();
        for (&(i, j), t) in &self.pairwise {
            e += t[x[i] as usize][x[j] as usize];
        }
        e
    }
}

fn is_submodular_table(t: &PairTable) -> bool {
    let lhs = t[0][0] + t[1][1];
    let rhs = t[0][1] + t[1][0];
    lhs <= rhs + crate::tol::EQ_REL * lhs.abs().max(rhs.abs()).max(1.0)
}

fn check_index(i: usize, n: usize) -> Result<()> {
    if i >= n {
        Err(Error::NodeOutOfRange { index: i, n })
    } else {
        Ok(())
    }
}

/// One stored off-diagonal coupling, always with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub i: usize,
    pub j: usize,
    pub q: f64,
}

/// Submodular quadratic binary problem. Values are immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticBinaryProblem {
    diag: Vec<f64>,
    couplings: Vec<Coupling>,
    adjacency: Vec<Vec<usize>>,
}

impl QuadraticBinaryProblem {
    /// Builds a problem from diagonal values and `(i, j, q_ij)` triples.
    ///
    /// Pairs may be given in either orientation; duplicates are summed and
    /// exact zeros are dropped. Any positive coupling is rejected.
    pub fn new(
        diag: Vec<f64>,
        couplings: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let n = diag.len();
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, j, q) in couplings {
            check_index(i, n)?;
            check_index(j, n)?;
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            if !q.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "coupling ({i}, {j}) is not finite"
                )));
            }
            *merged.entry((i.min(j), i.max(j))).or_insert(0.0) += q;
        }
        for (i, d) in diag.iter().enumerate() {
            if !d.is_finite() {
                return Err(Error::InvalidInput(format!("diagonal {i} is not finite")));
            }
        }
        let mut stored = Vec::with_capacity(merged.len());
        for ((i, j), q) in merged {
            if q > 0.0 {
                return Err(Error::PositiveCoupling(i, j, q));
            }
            if q != 0.0 {
                stored.push(Coupling { i, j, q });
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for (e, c) in stored.iter().enumerate() {
            adjacency[c.i].push(e);
            adjacency[c.j].push(e);
        }
        Ok(Self {
            diag,
            couplings: stored,
            adjacency,
        })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Couplings sorted by `(i, j)`.
    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    /// Indices into [`couplings`](Self::couplings) incident to node `i`.
    pub fn incident(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    /// Symmetric lookup of `q_ij`; zero when absent.
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.coupling_index(i, j)
            .map(|e| self.couplings[e].q)
            .unwrap_or(0.0)
    }

    pub fn coupling_index(&self, i: usize, j: usize) -> Option<usize> {
        let key = (i.min(j), i.max(j));
        self.couplings
            .binary_search_by(|c| (c.i, c.j).cmp(&key))
            .ok()
    }

    /// Returns a copy with every diagonal entry shifted by `delta`.
    pub fn shifted(&self, delta: f64) -> Self {
        let mut out = self.clone();
        for d in &mut out.diag {
            *d += delta;
        }
        out
    }
}

/// Converts an energy table to quadratic binary form.
///
/// Returns the problem and the constant `sum_i E_i(0) + sum E_ij(0,0)`, so
/// that `energy(x) = evaluate(S(x), 0, 1) + offset` for every labelling.
pub fn from_energies(energies: &EnergyTable) -> Result<(QuadraticBinaryProblem, f64)> {
    let n = energies.n;
    let mut diag: Vec<f64> = energies.unary.iter().map(|u| u[1] - u[0]).collect();
    let mut offset: f64 = energies.unary.iter().map(|u| u[0]).sum();
    let mut couplings = Vec::with_capacity(energies.pairwise.len());
    for (&(i, j), t) in &energies.pairwise {
        if !is_submodular_table(t) {
            return Err(Error::NonSubmodularEnergy(i, j));
        }
        // i is the first argument of E_ij, j the second.
        let q = (t[1][1] + t[0][0] - t[0][1] - t[1][0]).min(0.0);
        couplings.push((i, j, q));
        diag[i] += t[1][0] - t[0][0];
        diag[j] += t[0][1] - t[0][0];
        offset += t[0][0];
    }
    debug_assert_eq!(diag.len(), n);
    Ok((QuadraticBinaryProblem::new(diag, couplings)?, offset))
}

/// Which terminal a node is pinned to with an unbounded arc.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pin {
    Source,
    Sink,
}

/// Undirected s-t cut graph. Each node carries one signed terminal value
/// `a_i`: `[a_i]^+` is its source arc and `[a_i]^-` its sink arc. Pinned
/// nodes have an unbounded arc to one terminal instead.
#[derive(Debug, Clone, PartialEq)]
pub struct CutGraph {
    terminal: Vec<f64>,
    pinned: Vec<Option<Pin>>,
    edges: Vec<(usize, usize, f64)>,
}

impl CutGraph {
    pub fn new(n: usize) -> Self {
        Self {
            terminal: vec![0.0; n],
            pinned: vec![None; n],
            edges: Vec::new(),
        }
    }

    /// Builds a graph directly from signed terminal values and symmetric
    /// interior capacities.
    pub fn from_parts(terminal: Vec<f64>, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        let n = terminal.len();
        let mut g = Self::new(n);
        g.terminal = terminal;
        for (i, j, c) in edges {
            g.add_edge(i, j, c)?;
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.terminal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terminal.is_empty()
    }

    pub fn add_edge(&mut self, i: usize, j: usize, capacity: f64) -> Result<()> {
        check_index(i, self.len())?;
        check_index(j, self.len())?;
        if i == j {
            return Err(Error::SelfLoop(i));
        }
        if !(capacity >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "negative capacity {capacity} on edge ({i}, {j})"
            )));
        }
        self.edges.push((i, j, capacity));
        Ok(())
    }

    pub fn set_terminal(&mut self, i: usize, a: f64) {
        self.terminal[i] = a;
    }

    pub fn pin(&mut self, i: usize, side: Option<Pin>) {
        self.pinned[i] = side;
    }

    pub fn terminal(&self, i: usize) -> f64 {
        self.terminal[i]
    }

    pub fn pinned(&self, i: usize) -> Option<Pin> {
        self.pinned[i]
    }

    pub fn source_capacity(&self, i: usize) -> f64 {
        self.terminal[i].max(0.0)
    }

    pub fn sink_capacity(&self, i: usize) -> f64 {
        (-self.terminal[i]).max(0.0)
    }

    /// Interior edges `(i, j, c)`; each stands for two arcs of capacity `c`.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// Capacity of the cut whose sink side is `sink_side`. Infinite if a
    /// pinned node is on the wrong side.
    pub fn cut_value(&self, sink_side: &[bool]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.len() {
            match (self.pinned[i], sink_side[i]) {
                (Some(Pin::Source), true) | (Some(Pin::Sink), false) => return f64::INFINITY,
                (Some(_), _) => {}
                (None, true) => total += self.source_capacity(i),
                (None, false) => total += self.sink_capacity(i),
            }
        }
        for &(i, j, c) in &self.edges {
            if sink_side[i] != sink_side[j] {
                total += c;
            }
        }
        total
    }

    /// `sum_i [a_i]^-` over unpinned nodes: the constant separating cut
    /// values from `f(S) - beta w(S)` for graphs built by [`to_cut_graph`].
    pub fn cut_offset(&self) -> f64 {
        (0..self.len())
            .filter(|&i| self.pinned[i].is_none())
            .map(|i| self.sink_capacity(i))
            .sum()
    }
}

/// Builds the cut graph of `f(S) - beta * w(S)`.
///
/// `a_i = 1/2 sum_{i'<i} q_i'i + (q_ii - beta w_i) + 1/2 sum_{j>i} q_ij`
/// and every coupling becomes a symmetric edge of capacity `-q_ij / 2`.
pub fn to_cut_graph(
    problem: &QuadraticBinaryProblem,
    beta: f64,
    weights: &[f64],
) -> Result<CutGraph> {
    let n = problem.len();
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: weights.len(),
        });
    }
    let mut a: Vec<f64> = (0..n).map(|i| problem.diag[i] - beta * weights[i]).collect();
    let mut edges = Vec::with_capacity(problem.couplings.len());
    for c in &problem.couplings {
        a[c.i] += 0.5 * c.q;
        a[c.j] += 0.5 * c.q;
        edges.push((c.i, c.j, -0.5 * c.q));
    }
    CutGraph::from_parts(a, edges)
}

/// `f(S) - beta * w(S)`.
pub fn evaluate(problem: &QuadraticBinaryProblem, set: &NodeSet, beta: f64, weights: &[f64]) -> f64 {
    let mut member = vec![false; problem.len()];
    for &i in set {
        member[i] = true;
    }
    evaluate_mask(problem, &member, beta, weights)
}

pub(crate) fn evaluate_mask(
    problem: &QuadraticBinaryProblem,
    member: &[bool],
    beta: f64,
    weights: &[f64],
) -> f64 {
    let mut v = 0.0;
    for i in 0..problem.len() {
        if member[i] {
            v += problem.diag[i] - beta * weights[i];
        }
    }
    for c in &problem.couplings {
        if member[c.i] && member[c.j] {
            v += c.q;
        }
    }
    v
}

/// Rewrites an arbitrary directed s-t cut problem in quadratic binary form.
///
/// `arcs` are directed `(i, j, c)` interior arcs; `source` and `sink` hold
/// terminal capacities. For a pair with `c_ij > c_ji` the excess
/// `d = c_ij - c_ji` is split evenly: each direction carries
/// `(c_ij + c_ji) / 2`, and a path `s -> j`, `i -> t` of capacity `d / 2`
/// absorbs the difference. Returns the problem and the constant with
/// `cut(S) = f(S) + offset` for every sink side `S`.
pub fn normalize_directed(
    n: usize,
    arcs: &[(usize, usize, f64)],
    source: &[f64],
    sink: &[f64],
) -> Result<(QuadraticBinaryProblem, f64)> {
    if source.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: source.len(),
        });
    }
    if sink.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: sink.len(),
        });
    }
    let mut directed: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for &(i, j, c) in arcs {
        check_index(i, n)?;
        check_index(j, n)?;
        if !(c >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "negative capacity {c} on arc ({i}, {j})"
            )));
        }
        if i == j {
            continue;
        }
        *directed.entry((i, j)).or_insert(0.0) += c;
    }
    let mut a: Vec<f64> = (0..n).map(|i| source[i] - sink[i]).collect();
    let offset: f64 = sink.iter().sum();
    let mut pairs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (&(i, j), &c) in &directed {
        if i > j && directed.contains_key(&(j, i)) {
            continue;
        }
        let back = directed.get(&(j, i)).copied().unwrap_or(0.0);
        let (lo, hi) = (i.min(j), i.max(j));
        let (c_fwd, c_bwd) = if i < j { (c, back) } else { (back, c) };
        // c_fwd is lo -> hi, c_bwd is hi -> lo.
        let sym = 0.5 * (c_fwd + c_bwd);
        let half = 0.5 * (c_fwd - c_bwd);
        // lo -> hi excess: +half on hi in S, -half on lo in S.
        a[hi] += half;
        a[lo] -= half;
        *pairs.entry((lo, hi)).or_insert(0.0) += sym;
    }
    let mut diag = a;
    let mut couplings = Vec::with_capacity(pairs.len());
    for ((i, j), s) in pairs {
        diag[i] += s;
        diag[j] += s;
        couplings.push((i, j, -2.0 * s));
    }
    Ok((QuadraticBinaryProblem::new(diag, couplings)?, offset))
}
