//! Highest-label push-relabel maximum flow.
//!
//! The solver works on residual arc pairs. An undirected edge of capacity `c`
//! is a single pair with residual `c` in both directions, so its net flow
//! ranges over `[-c, c]`. Nodes are discharged in highest-label order with the
//! gap heuristic and a global relabel after every `n` relabels. Excess that
//! cannot reach the sink is returned to the source in the same loop, so the
//! final state is a flow rather than a preflow.

use std::collections::VecDeque;
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::qbm::{CutGraph, Pin};
use crate::NodeSet;

/// Arc capacity. Unbounded arcs carry a flag rather than a large sentinel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Capacity {
    Finite(f64),
    Infinite,
}

impl Capacity {
    fn value(self) -> f64 {
        match self {
            Capacity::Finite(c) => c,
            Capacity::Infinite => f64::INFINITY,
        }
    }
}

/// Residual arcs with `res <= SATURATION * max(1, cap)` count as saturated.
pub const SATURATION: f64 = 1e-12;

fn saturated(res: f64, cap: f64) -> bool {
    res <= SATURATION * cap.abs().max(1.0).min(f64::MAX)
}

/// Flow on a [`CutGraph`]. Interior edge flows are signed: positive values
/// run from the lower to the higher endpoint index of the stored edge.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub source_flow: Vec<f64>,
    pub sink_flow: Vec<f64>,
    pub edge_flow: Vec<f64>,
    /// Inflow minus outflow at each interior node.
    pub excess: Vec<f64>,
    pub value: f64,
}

/// Computes a maximum flow on `graph`.
pub fn max_flow(graph: &CutGraph) -> FlowState {
    solve_cut_graph(graph).0
}

/// Maximum flow plus the residual reachability masks
/// `(reachable from source, reaches sink)`.
pub(crate) fn solve_cut_graph(graph: &CutGraph) -> (FlowState, Vec<bool>, Vec<bool>) {
    let n = graph.len();
    let (s, t) = (n, n + 1);
    let mut pairs = Vec::with_capacity(n + graph.edges().len());
    let mut terminal_pair = vec![usize::MAX; n];
    for i in 0..n {
        let pair = match graph.pinned(i) {
            Some(Pin::Source) => Some((s, i, f64::INFINITY, 0.0)),
            Some(Pin::Sink) => Some((i, t, f64::INFINITY, 0.0)),
            None => {
                let a = graph.terminal(i);
                if a > 0.0 {
                    Some((s, i, a, 0.0))
                } else if a < 0.0 {
                    Some((i, t, -a, 0.0))
                } else {
                    None
                }
            }
        };
        if let Some(p) = pair {
            terminal_pair[i] = pairs.len();
            pairs.push(p);
        }
    }
    let first_edge = pairs.len();
    for &(i, j, c) in graph.edges() {
        pairs.push((i, j, c, c));
    }
    let mut solver = Solver::new(n + 2, s, t, &pairs);
    solver.run();

    let mut source_flow = vec![0.0; n];
    let mut sink_flow = vec![0.0; n];
    for i in 0..n {
        let p = terminal_pair[i];
        if p == usize::MAX {
            continue;
        }
        let f = solver.pair_flow(p);
        if pairs[p].0 == s {
            source_flow[i] = f;
        } else {
            sink_flow[i] = f;
        }
    }
    let edge_flow: Vec<f64> = (0..graph.edges().len())
        .map(|k| solver.pair_flow(first_edge + k))
        .collect();
    let excess = node_excess(graph, &source_flow, &sink_flow, &edge_flow);
    let value = if solver.unbounded {
        f64::INFINITY
    } else {
        sink_flow.iter().sum()
    };
    let from_s = solver.reach_from_source();
    let to_t = solver.reach_to_sink();
    (
        FlowState {
            source_flow,
            sink_flow,
            edge_flow,
            excess,
            value,
        },
        from_s[..n].to_vec(),
        to_t[..n].to_vec(),
    )
}

fn node_excess(graph: &CutGraph, source: &[f64], sink: &[f64], edge: &[f64]) -> Vec<f64> {
    let mut excess: Vec<f64> = source.iter().zip(sink).map(|(a, b)| a - b).collect();
    for (k, &(i, j, _)) in graph.edges().iter().enumerate() {
        excess[i] -= edge[k];
        excess[j] += edge[k];
    }
    excess
}

/// Extreme minimum cuts, as sink sides.
///
/// `S_min` holds the interior nodes that reach the sink in the residual
/// graph; `S_max` holds those not reachable from the source. Both are minimum
/// cuts and every minimum cut lies between them.
pub fn min_cut(graph: &CutGraph, state: &FlowState) -> Result<(NodeSet, NodeSet)> {
    let report = check_flow(graph, state);
    if !report.is_flow {
        return Err(Error::StaleFlow);
    }
    let (from_s, to_t) = residual_reach(graph, state);
    let n = graph.len();
    if (0..n).any(|i| from_s[i] && to_t[i]) {
        return Err(Error::StaleFlow);
    }
    let s_min = (0..n).filter(|&i| to_t[i]).collect();
    let s_max = (0..n).filter(|&i| !from_s[i]).collect();
    Ok((s_min, s_max))
}

fn residual_reach(graph: &CutGraph, state: &FlowState) -> (Vec<bool>, Vec<bool>) {
    let n = graph.len();
    // out[i]: neighbours j with residual capacity i -> j.
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut inc: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, &(i, j, c)) in graph.edges().iter().enumerate() {
        let f = state.edge_flow[k];
        if !saturated(c - f, c) {
            out[i].push(j);
            inc[j].push(i);
        }
        if !saturated(c + f, c) {
            out[j].push(i);
            inc[i].push(j);
        }
    }
    let mut from_s = vec![false; n];
    let mut to_t = vec![false; n];
    let mut queue = VecDeque::new();
    // Paths through the opposite terminal never matter for a maximum flow.
    for i in 0..n {
        let open = match graph.pinned(i) {
            Some(Pin::Source) => true,
            Some(Pin::Sink) => false,
            None => {
                let cs = graph.source_capacity(i);
                !saturated(cs - state.source_flow[i], cs)
            }
        };
        if open {
            from_s[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(u) = queue.pop_front() {
        for &v in &out[u] {
            if !from_s[v] {
                from_s[v] = true;
                queue.push_back(v);
            }
        }
    }
    for i in 0..n {
        let open = match graph.pinned(i) {
            Some(Pin::Sink) => true,
            Some(Pin::Source) => false,
            None => {
                let ct = graph.sink_capacity(i);
                !saturated(ct - state.sink_flow[i], ct)
            }
        };
        if open {
            to_t[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(v) = queue.pop_front() {
        for &u in &inc[v] {
            if !to_t[u] {
                to_t[u] = true;
                queue.push_back(u);
            }
        }
    }
    (from_s, to_t)
}

/// Strongest class a state belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowKind {
    Flow,
    Preflow,
    Pseudoflow,
    Invalid,
}

/// Result of [`check_flow`]. A state may satisfy several definitions at
/// once; `kind` reports the first of flow, preflow, pseudoflow that holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowReport {
    pub capacity_ok: bool,
    pub is_flow: bool,
    pub is_preflow: bool,
    pub is_pseudoflow: bool,
    pub kind: FlowKind,
}

/// Tests a state against the flow, preflow and pseudoflow constraint sets.
/// Excess is recomputed from the arc flows; the stored `excess` is ignored.
pub fn check_flow(graph: &CutGraph, state: &FlowState) -> FlowReport {
    let n = graph.len();
    let invalid = FlowReport {
        capacity_ok: false,
        is_flow: false,
        is_preflow: false,
        is_pseudoflow: false,
        kind: FlowKind::Invalid,
    };
    if state.source_flow.len() != n
        || state.sink_flow.len() != n
        || state.edge_flow.len() != graph.edges().len()
    {
        return invalid;
    }
    let tol = |c: f64| 1e-9 * c.max(1.0);
    let within = |f: f64, lo: f64, hi: f64| f >= lo - tol(hi.abs()) && f <= hi + tol(hi.abs());
    let mut capacity_ok = true;
    let mut terminals_saturated = true;
    let mut scale: f64 = 1.0;
    for i in 0..n {
        let (cs, ct) = match graph.pinned(i) {
            Some(Pin::Source) => (f64::INFINITY, 0.0),
            Some(Pin::Sink) => (0.0, f64::INFINITY),
            None => (graph.source_capacity(i), graph.sink_capacity(i)),
        };
        let (zs, zt) = (state.source_flow[i], state.sink_flow[i]);
        if !zs.is_finite() || !zt.is_finite() {
            capacity_ok = false;
        }
        capacity_ok &= within(zs, 0.0, cs) && within(zt, 0.0, ct);
        if cs.is_finite() {
            terminals_saturated &= (zs - cs).abs() <= tol(cs);
            scale = scale.max(cs);
        }
        if ct.is_finite() {
            terminals_saturated &= (zt - ct).abs() <= tol(ct);
            scale = scale.max(ct);
        }
    }
    for (k, &(_, _, c)) in graph.edges().iter().enumerate() {
        capacity_ok &= state.edge_flow[k].is_finite() && within(state.edge_flow[k], -c, c);
        scale = scale.max(c);
    }
    if !capacity_ok {
        return invalid;
    }
    let excess = node_excess(graph, &state.source_flow, &state.sink_flow, &state.edge_flow);
    let is_flow = excess.iter().all(|e| e.abs() <= tol(scale));
    let is_preflow = excess.iter().all(|&e| e >= -tol(scale));
    let is_pseudoflow = terminals_saturated;
    let kind = if is_flow {
        FlowKind::Flow
    } else if is_preflow {
        FlowKind::Preflow
    } else if is_pseudoflow {
        FlowKind::Pseudoflow
    } else {
        FlowKind::Invalid
    };
    FlowReport {
        capacity_ok,
        is_flow,
        is_preflow,
        is_pseudoflow,
        kind,
    }
}

/// A directed arc of a [`FlowNetwork`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub tail: usize,
    pub head: usize,
    pub capacity: Capacity,
}

/// General directed s-t network.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowNetwork {
    n: usize,
    source: usize,
    sink: usize,
    arcs: Vec<Arc>,
}

/// Maximum flow on a [`FlowNetwork`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkFlow {
    pub arc_flow: Vec<f64>,
    pub value: f64,
    /// Nodes reachable from the source in the residual graph: the smallest
    /// source side of a minimum cut.
    pub source_side: Vec<bool>,
}

impl FlowNetwork {
    pub fn new(n: usize, source: usize, sink: usize) -> Result<Self> {
        if source >= n || sink >= n {
            return Err(Error::NodeOutOfRange {
                index: source.max(sink),
                n,
            });
        }
        if source == sink {
            return Err(Error::InvalidInput("source and sink coincide".into()));
        }
        Ok(Self {
            n,
            source,
            sink,
            arcs: Vec::new(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn add_arc(&mut self, tail: usize, head: usize, capacity: Capacity) -> Result<usize> {
        for v in [tail, head] {
            if v >= self.n {
                return Err(Error::NodeOutOfRange { index: v, n: self.n });
            }
        }
        if let Capacity::Finite(c) = capacity {
            if !(c >= 0.0) || !c.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "arc ({tail}, {head}) has invalid capacity {c}"
                )));
            }
        }
        self.arcs.push(Arc {
            tail,
            head,
            capacity,
        });
        Ok(self.arcs.len() - 1)
    }

    /// Capacity of the cut with the given source side.
    pub fn cut_value(&self, source_side: &[bool]) -> f64 {
        self.arcs
            .iter()
            .filter(|a| source_side[a.tail] && !source_side[a.head])
            .map(|a| a.capacity.value())
            .sum()
    }

    pub fn max_flow(&self) -> NetworkFlow {
        let pairs: Vec<_> = self
            .arcs
            .iter()
            .map(|a| (a.tail, a.head, a.capacity.value(), 0.0))
            .collect();
        let mut solver = Solver::new(self.n, self.source, self.sink, &pairs);
        solver.run();
        let arc_flow: Vec<f64> = (0..pairs.len()).map(|k| solver.pair_flow(k)).collect();
        let value = if solver.unbounded {
            f64::INFINITY
        } else {
            self.arcs
                .iter()
                .zip(&arc_flow)
                .map(|(a, f)| {
                    let mut v = 0.0;
                    if a.head == self.sink {
                        v += f;
                    }
                    if a.tail == self.sink {
                        v -= f;
                    }
                    v
                })
                .sum()
        };
        NetworkFlow {
            arc_flow,
            value,
            source_side: solver.reach_from_source(),
        }
    }

    /// Reads a DIMACS max-flow problem (`p max`, `n id s|t`, `a u v c`).
    pub fn read_dimacs<R: BufRead>(reader: R) -> Result<Self> {
        let mut n = None;
        let mut source = None;
        let mut sink = None;
        let mut arcs = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line.map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
            let mut tok = line.split_whitespace();
            let perr = |m: &str| Error::Parse {
                line: lineno,
                message: m.to_string(),
            };
            match tok.next() {
                None | Some("c") => {}
                Some("p") => {
                    if tok.next() != Some("max") {
                        return Err(perr("expected `p max`"));
                    }
                    let nodes: usize = parse_tok(tok.next(), lineno)?;
                    n = Some(nodes);
                }
                Some("n") => {
                    let id: usize = parse_tok(tok.next(), lineno)?;
                    match tok.next() {
                        Some("s") => source = Some(id),
                        Some("t") => sink = Some(id),
                        _ => return Err(perr("expected `s` or `t`")),
                    }
                }
                Some("a") => {
                    let u: usize = parse_tok(tok.next(), lineno)?;
                    let v: usize = parse_tok(tok.next(), lineno)?;
                    let c: f64 = parse_tok(tok.next(), lineno)?;
                    if u == 0 || v == 0 {
                        return Err(perr("DIMACS node ids are 1-based"));
                    }
                    arcs.push((u - 1, v - 1, c));
                }
                Some(other) => return Err(perr(&format!("unknown line type `{other}`"))),
            }
        }
        let missing = |what: &str| Error::Parse {
            line: 0,
            message: format!("missing {what}"),
        };
        let n = n.ok_or_else(|| missing("problem line"))?;
        let source = source.ok_or_else(|| missing("source"))?;
        let sink = sink.ok_or_else(|| missing("sink"))?;
        if source == 0 || sink == 0 {
            return Err(missing("1-based terminal ids"));
        }
        let mut net = FlowNetwork::new(n, source - 1, sink - 1)?;
        for (u, v, c) in arcs {
            net.add_arc(u, v, Capacity::Finite(c))?;
        }
        Ok(net)
    }
}

fn parse_tok<T: std::str::FromStr>(tok: Option<&str>, line: usize) -> Result<T> {
    let tok = tok.ok_or(Error::Parse {
        line,
        message: "missing field".into(),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse `{tok}`"),
    })
}

/// Push-relabel state over residual arc pairs. Arc `fwd[k]` carries pair
/// `k` from its tail to its head, `mate[fwd[k]]` the reverse direction.
struct Solver {
    n: usize,
    s: usize,
    t: usize,
    start: Vec<usize>,
    head: Vec<usize>,
    mate: Vec<usize>,
    res: Vec<f64>,
    cap: Vec<f64>,
    fwd: Vec<usize>,
    height: Vec<usize>,
    excess: Vec<f64>,
    cur: Vec<usize>,
    count: Vec<usize>,
    buckets: Vec<Vec<usize>>,
    top: usize,
    eps: f64,
    unbounded: bool,
}

impl Solver {
    fn new(n: usize, s: usize, t: usize, pairs: &[(usize, usize, f64, f64)]) -> Self {
        let mut degree = vec![0usize; n + 1];
        for &(u, v, _, _) in pairs {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut start = vec![0usize; n + 1];
        for v in 0..n {
            start[v + 1] = start[v] + degree[v];
        }
        let m = start[n];
        let mut fill = start.clone();
        let mut head = vec![0usize; m];
        let mut mate = vec![0usize; m];
        let mut res = vec![0.0; m];
        let mut cap = vec![0.0; m];
        let mut fwd = Vec::with_capacity(pairs.len());
        let mut scale: f64 = 1.0;
        for &(u, v, cuv, cvu) in pairs {
            let a = fill[u];
            fill[u] += 1;
            let b = fill[v];
            fill[v] += 1;
            head[a] = v;
            head[b] = u;
            mate[a] = b;
            mate[b] = a;
            res[a] = cuv;
            res[b] = cvu;
            cap[a] = cuv;
            cap[b] = cvu;
            fwd.push(a);
            for c in [cuv, cvu] {
                if c.is_finite() {
                    scale = scale.max(c);
                }
            }
        }
        Self {
            n,
            s,
            t,
            start,
            head,
            mate,
            res,
            cap,
            fwd,
            height: vec![0; n],
            excess: vec![0.0; n],
            cur: vec![0; n],
            count: vec![0; 2 * n + 2],
            buckets: vec![Vec::new(); 2 * n + 2],
            top: 0,
            eps: 1e-14 * scale,
            unbounded: false,
        }
    }

    /// Net flow on pair `k` in its forward direction.
    fn pair_flow(&self, k: usize) -> f64 {
        let a = self.fwd[k];
        if self.cap[a].is_finite() {
            self.cap[a] - self.res[a]
        } else {
            let b = self.mate[a];
            self.res[b] - self.cap[b]
        }
    }

    fn infinite_path(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![self.s];
        seen[self.s] = true;
        while let Some(u) = stack.pop() {
            for a in self.start[u]..self.start[u + 1] {
                let v = self.head[a];
                if self.cap[a].is_infinite() && !seen[v] {
                    if v == self.t {
                        return true;
                    }
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        false
    }

    fn run(&mut self) {
        if self.infinite_path() {
            self.unbounded = true;
            return;
        }
        // Anything beyond the total finite capacity can never reach the sink.
        let bound: f64 = 1.0
            + self
                .cap
                .iter()
                .filter(|c| c.is_finite())
                .sum::<f64>();
        let (s, n) = (self.s, self.n);
        for a in self.start[s]..self.start[s + 1] {
            let v = self.head[a];
            let delta = self.res[a].min(bound);
            if delta > 0.0 && v != s {
                self.res[a] -= delta;
                let b = self.mate[a];
                self.res[b] += delta;
                self.excess[v] += delta;
                self.excess[s] -= delta;
            }
        }
        self.global_relabel();
        let mut relabels = 0usize;
        loop {
            while self.top > 0 && self.buckets[self.top].is_empty() {
                self.top -= 1;
            }
            let Some(u) = self.buckets[self.top].pop() else {
                break;
            };
            if u == self.s || u == self.t || self.height[u] != self.top || self.excess[u] <= self.eps
            {
                continue;
            }
            if self.discharge(u, &mut relabels) && relabels >= n {
                relabels = 0;
                self.global_relabel();
            }
        }
    }

    fn activate(&mut self, v: usize) {
        let h = self.height[v];
        if h >= 2 * self.n {
            return;
        }
        self.buckets[h].push(v);
        if h > self.top {
            self.top = h;
        }
    }

    /// Returns true if a relabel happened.
    fn discharge(&mut self, u: usize, relabels: &mut usize) -> bool {
        let mut relabelled = false;
        loop {
            let h = self.height[u];
            let end = self.start[u + 1];
            let mut a = self.cur[u];
            while a < end {
                let v = self.head[a];
                if self.res[a] > 0.0 && self.height[v] + 1 == h {
                    let delta = self.excess[u].min(self.res[a]);
                    self.res[a] -= delta;
                    let b = self.mate[a];
                    self.res[b] += delta;
                    self.excess[u] -= delta;
                    let was_active = self.excess[v] > self.eps;
                    self.excess[v] += delta;
                    if !was_active && self.excess[v] > self.eps && v != self.s && v != self.t {
                        self.activate(v);
                    }
                    if self.excess[u] <= self.eps {
                        break;
                    }
                }
                a += 1;
            }
            self.cur[u] = a.min(end);
            if self.excess[u] <= self.eps {
                return relabelled;
            }
            self.relabel(u);
            *relabels += 1;
            relabelled = true;
            if self.height[u] >= 2 * self.n {
                return relabelled;
            }
            if *relabels >= self.n {
                self.activate(u);
                return relabelled;
            }
        }
    }

    fn relabel(&mut self, u: usize) {
        let old = self.height[u];
        let mut best = usize::MAX;
        for a in self.start[u]..self.start[u + 1] {
            if self.res[a] > 0.0 {
                best = best.min(self.height[self.head[a]]);
            }
        }
        let new = if best == usize::MAX {
            2 * self.n
        } else {
            (best + 1).min(2 * self.n)
        };
        self.count[old] -= 1;
        self.height[u] = new;
        self.count[new] += 1;
        self.cur[u] = self.start[u];
        if self.count[old] == 0 && old < self.n {
            self.gap(old);
        }
    }

    fn gap(&mut self, g: usize) {
        let n = self.n;
        for v in 0..n {
            let h = self.height[v];
            if v != self.s && v != self.t && h > g && h < n {
                self.count[h] -= 1;
                self.height[v] = n + 1;
                self.count[n + 1] += 1;
                self.cur[v] = self.start[v];
                if self.excess[v] > self.eps {
                    self.activate(v);
                }
            }
        }
    }

    /// Exact distances: to the sink for nodes that can reach it, otherwise
    /// `n +` distance to the source.
    fn global_relabel(&mut self) {
        let n = self.n;
        let unset = usize::MAX;
        let mut height = vec![unset; n];
        height[self.t] = 0;
        height[self.s] = n;
        let mut queue = VecDeque::new();
        for root in [self.t, self.s] {
            queue.push_back(root);
            while let Some(v) = queue.pop_front() {
                for a in self.start[v]..self.start[v + 1] {
                    let u = self.head[a];
                    // arc u -> v is the mate of v -> u
                    if height[u] == unset && self.res[self.mate[a]] > 0.0 {
                        height[u] = height[v] + 1;
                        queue.push_back(u);
                    }
                }
            }
        }
        for c in self.count.iter_mut() {
            *c = 0;
        }
        for b in self.buckets.iter_mut() {
            b.clear();
        }
        self.top = 0;
        for v in 0..n {
            let h = if height[v] == unset { 2 * n } else { height[v].min(2 * n) };
            self.height[v] = h;
            self.count[h] += 1;
            self.cur[v] = self.start[v];
        }
        for v in 0..n {
            if v != self.s && v != self.t && self.excess[v] > self.eps {
                self.activate(v);
            }
        }
    }

    fn reach_from_source(&self) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([self.s]);
        seen[self.s] = true;
        while let Some(u) = queue.pop_front() {
            for a in self.start[u]..self.start[u + 1] {
                let v = self.head[a];
                if !seen[v] && !saturated(self.res[a], self.cap[a]) {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    fn reach_to_sink(&self) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([self.t]);
        seen[self.t] = true;
        while let Some(v) = queue.pop_front() {
            for a in self.start[v]..self.start[v + 1] {
                let u = self.head[a];
                let b = self.mate[a];
                if !seen[u] && !saturated(self.res[b], self.cap[b]) {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::all_subsets;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_min_cut(g: &CutGraph) -> f64 {
        all_subsets(g.len())
            .map(|m| g.cut_value(&m))
            .fold(f64::INFINITY, f64::min)
    }

    fn random_graph(rng: &mut ChaCha8Rng, n: usize, integer: bool) -> CutGraph {
        let mut draw = |hi: f64| {
            if integer {
                rng.random_range(0..=hi as i64) as f64
            } else {
                rng.random_range(0.0..hi)
            }
        };
        let terminal: Vec<f64> = (0..n).map(|_| draw(40.0) - 20.0).collect();
        let mut g = CutGraph::from_parts(terminal, vec![]).unwrap();
        let mut pairs = vec![];
        for i in 0..n {
            for j in i + 1..n {
                pairs.push((i, j));
            }
        }
        for (i, j) in pairs {
            let c = draw(20.0);
            if c > 10.0 {
                g.add_edge(i, j, c - 10.0).unwrap();
            }
        }
        g
    }

    #[test]
    fn path_and_parallel_examples() {
        let mut net = FlowNetwork::new(3, 0, 2).unwrap();
        net.add_arc(0, 1, Capacity::Finite(3.0)).unwrap();
        net.add_arc(1, 2, Capacity::Finite(1.0)).unwrap();
        assert_eq!(net.max_flow().value, 1.0);

        let mut net = FlowNetwork::new(4, 0, 3).unwrap();
        net.add_arc(0, 1, Capacity::Finite(2.0)).unwrap();
        net.add_arc(1, 3, Capacity::Finite(2.0)).unwrap();
        net.add_arc(0, 2, Capacity::Finite(5.0)).unwrap();
        net.add_arc(2, 3, Capacity::Finite(5.0)).unwrap();
        assert_eq!(net.max_flow().value, 7.0);
    }

    #[test]
    fn empty_graph_has_zero_flow() {
        let g = CutGraph::new(0);
        assert_eq!(max_flow(&g).value, 0.0);
    }

    #[test]
    fn integer_graphs_match_brute_force_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let n = rng.random_range(1..=10);
            let g = random_graph(&mut rng, n, true);
            let st = max_flow(&g);
            assert_eq!(st.value, brute_min_cut(&g));
        }
    }

    #[test]
    fn real_graphs_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let n = rng.random_range(1..=10);
            let g = random_graph(&mut rng, n, false);
            let st = max_flow(&g);
            let brute = brute_min_cut(&g);
            assert!((st.value - brute).abs() <= 1e-9 * brute.max(1.0));
            assert_eq!(check_flow(&g, &st).kind, FlowKind::Flow);
        }
    }

    #[test]
    fn extreme_cuts_bracket_every_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let n = rng.random_range(1..=9);
            let g = random_graph(&mut rng, n, true);
            let st = max_flow(&g);
            let (lo, hi) = min_cut(&g, &st).unwrap();
            assert!(lo.is_subset(&hi));
            let best = brute_min_cut(&g);
            let mask = |s: &NodeSet| (0..n).map(|i| s.contains(&i)).collect::<Vec<_>>();
            assert_eq!(g.cut_value(&mask(&lo)), best);
            assert_eq!(g.cut_value(&mask(&hi)), best);
            for m in all_subsets(n) {
                if g.cut_value(&m) == best {
                    for i in 0..n {
                        if lo.contains(&i) {
                            assert!(m[i]);
                        }
                        if !hi.contains(&i) {
                            assert!(!m[i]);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn unique_cut_has_equal_extremes() {
        let g = CutGraph::from_parts(vec![2.0, -3.0], vec![(0, 1, 1.0)]).unwrap();
        let st = max_flow(&g);
        let (lo, hi) = min_cut(&g, &st).unwrap();
        assert_eq!(lo, hi);
        assert_eq!(lo, NodeSet::from([1]));
    }

    #[test]
    fn zero_bridge_gives_two_optima() {
        // node 0 wants the sink side, node 1 the source side, node 2 is
        // attached to neither terminal and only through a zero bridge.
        let g = CutGraph::from_parts(vec![-1.0, 1.0, 0.0], vec![(0, 1, 0.5), (1, 2, 0.0)])
            .unwrap();
        let st = max_flow(&g);
        let (lo, hi) = min_cut(&g, &st).unwrap();
        assert!(lo.len() < hi.len());
        assert!(lo.is_subset(&hi));
    }

    #[test]
    fn disconnected_free_nodes() {
        let g = CutGraph::new(4);
        let st = max_flow(&g);
        let (lo, hi) = min_cut(&g, &st).unwrap();
        assert!(lo.is_empty());
        assert_eq!(hi.len(), 4);
    }

    #[test]
    fn pinned_nodes_use_unbounded_arcs() {
        let mut g = CutGraph::from_parts(vec![5.0, 0.0, -5.0], vec![(0, 1, 2.0), (1, 2, 3.0)])
            .unwrap();
        g.pin(1, Some(Pin::Sink));
        let st = max_flow(&g);
        // node 0 pays 2 via the edge rather than 5 on its source arc; node 2
        // sits on the sink side for free.
        assert!((st.value - 2.0).abs() < 1e-12, "{}", st.value);
        let (lo, hi) = min_cut(&g, &st).unwrap();
        assert!(lo.contains(&1) && hi.contains(&1));
    }

    #[test]
    fn unbounded_network() {
        let mut net = FlowNetwork::new(3, 0, 2).unwrap();
        net.add_arc(0, 1, Capacity::Infinite).unwrap();
        net.add_arc(1, 2, Capacity::Infinite).unwrap();
        assert!(net.max_flow().value.is_infinite());
    }

    #[test]
    fn flow_classification() {
        let g = CutGraph::from_parts(vec![1.0, -1.0], vec![(0, 1, 0.5)]).unwrap();
        let zero = FlowState {
            source_flow: vec![0.0, 0.0],
            sink_flow: vec![0.0, 0.0],
            edge_flow: vec![0.0],
            excess: vec![0.0, 0.0],
            value: 0.0,
        };
        let r = check_flow(&g, &zero);
        assert!(r.is_flow && !r.is_pseudoflow);

        let saturated = FlowState {
            source_flow: vec![1.0, 0.0],
            sink_flow: vec![0.0, 1.0],
            ..zero.clone()
        };
        let r = check_flow(&g, &saturated);
        assert!(r.is_pseudoflow && !r.is_flow && !r.is_preflow);
        assert_eq!(r.kind, FlowKind::Pseudoflow);

        let pushed = FlowState {
            source_flow: vec![1.0, 0.0],
            ..zero.clone()
        };
        assert_eq!(check_flow(&g, &pushed).kind, FlowKind::Preflow);

        let over = FlowState {
            edge_flow: vec![0.75],
            ..zero.clone()
        };
        assert_eq!(check_flow(&g, &over).kind, FlowKind::Invalid);
        assert_eq!(min_cut(&g, &over), Err(Error::StaleFlow));
    }

    #[test]
    fn dimacs_round_trip() {
        let text = "c tiny\np max 4 5\nn 1 s\nn 4 t\na 1 2 3\na 1 3 2\na 2 3 1\na 2 4 2\na 3 4 3\n";
        let net = FlowNetwork::read_dimacs(text.as_bytes()).unwrap();
        let flow = net.max_flow();
        assert_eq!(flow.value, 5.0);
        assert_eq!(net.cut_value(&flow.source_side), 5.0);
        assert!(FlowNetwork::read_dimacs("p max 2 1\na 1 2 1\n".as_bytes()).is_err());
    }

    #[test]
    fn directed_networks_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.random_range(2..=9);
            let mut net = FlowNetwork::new(n, 0, n - 1).unwrap();
            for u in 0..n {
                for v in 0..n {
                    if u != v && rng.random_bool(0.4) {
                        net.add_arc(u, v, Capacity::Finite(rng.random_range(0..10) as f64))
                            .unwrap();
                    }
                }
            }
            let flow = net.max_flow();
            let mut best = f64::INFINITY;
            for m in all_subsets(n - 2) {
                let mut side = vec![true];
                side.extend(m);
                side.push(false);
                best = best.min(net.cut_value(&side));
            }
            if n == 2 {
                best = net.cut_value(&[true, false]);
            }
            assert_eq!(flow.value, best);
        }
    }
}
