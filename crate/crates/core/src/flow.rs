//! Max flow and canonical minimum cut on networks with exact capacities.
//!
//! The network is generic over the capacity scalar: any totally ordered
//! additive type works (`i64`, `i128`, `BigInt`, ...). Dinic's blocking-flow
//! algorithm is used; the canonical cut is the set of nodes reachable from the
//! source in the residual graph, which is the same for every maximum flow.

use std::collections::VecDeque;
use std::fmt::{self, Debug, Display, Write as _};
use std::ops::{Add, Sub};

use num_traits::Zero;
use thiserror::Error;

/// Capacity scalar accepted by the flow routines.
pub trait Capacity: Clone + Ord + Zero + Add<Output = Self> + Sub<Output = Self> + Debug {}

impl<T> Capacity for T where T: Clone + Ord + Zero + Add<Output = T> + Sub<Output = T> + Debug {}

/// What an arc stands for in the auxiliary construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArcRole {
    /// `s -> v`; its dual variable is `y_v` of a Left vertex.
    Source,
    /// `v -> t`; its dual variable is `y_v` of a Right vertex.
    Sink,
    /// Link arc carrying the downward-deviation variable δ.
    Delta,
    /// Link arc carrying the upward-deviation variable d.
    Up,
    /// Uncapacitated arc for a graph edge (capacity set to a bound that no
    /// minimum cut can use).
    Edge,
}

impl ArcRole {
    fn label(self) -> &'static str {
        match self {
            ArcRole::Source => "s-arc",
            ArcRole::Sink => "t-arc",
            ArcRole::Delta => "delta",
            ArcRole::Up => "d",
            ArcRole::Edge => "edge",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arc<C> {
    pub tail: usize,
    pub head: usize,
    pub capacity: C,
    pub role: ArcRole,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FlowError {
    #[error("node index {0} out of range")]
    NoSuchNode(usize),
    #[error("negative capacity on arc {tail}->{head}")]
    NegativeCapacity { tail: usize, head: usize },
    #[error("arc into the source")]
    IntoSource,
    #[error("arc out of the sink")]
    OutOfSink,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowNetwork<C> {
    names: Vec<String>,
    source: usize,
    sink: usize,
    arcs: Vec<Arc<C>>,
}

impl<C: Capacity> FlowNetwork<C> {
    /// Creates a network with nodes `s` (index 0) and `t` (index 1).
    pub fn new() -> Self {
        Self {
            names: vec!["s".to_string(), "t".to_string()],
            source: 0,
            sink: 1,
            arcs: Vec::new(),
        }
    }

    pub fn add_node(&mut self, name: impl Into<String>) -> usize {
        self.names.push(name.into());
        self.names.len() - 1
    }

    pub fn add_arc(&mut self, tail: usize, head: usize, capacity: C, role: ArcRole) -> Result<usize, FlowError> {
        let n = self.names.len();
        for x in [tail, head] {
            if x >= n {
                return Err(FlowError::NoSuchNode(x));
            }
        }
        if capacity < C::zero() {
            return Err(FlowError::NegativeCapacity { tail, head });
        }
        if head == self.source {
            return Err(FlowError::IntoSource);
        }
        if tail == self.sink {
            return Err(FlowError::OutOfSink);
        }
        self.arcs.push(Arc { tail, head, capacity, role });
        Ok(self.arcs.len() - 1)
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    pub fn num_nodes(&self) -> usize {
        self.names.len()
    }

    pub fn arcs(&self) -> &[Arc<C>] {
        &self.arcs
    }

    pub fn name(&self, node: usize) -> &str {
        &self.names[node]
    }

    pub fn node_names(&self) -> &[String] {
        &self.names
    }

    /// Same topology with every capacity mapped through `f`.
    pub fn map_capacities<D: Capacity>(&self, mut f: impl FnMut(&C) -> D) -> FlowNetwork<D> {
        FlowNetwork {
            names: self.names.clone(),
            source: self.source,
            sink: self.sink,
            arcs: self
                .arcs
                .iter()
                .map(|a| Arc {
                    tail: a.tail,
                    head: a.head,
                    capacity: f(&a.capacity),
                    role: a.role,
                })
                .collect(),
        }
    }

    /// Capacity of the cut `(source_side, complement)`.
    pub fn cut_capacity(&self, source_side: &[bool]) -> C {
        self.arcs
            .iter()
            .filter(|a| source_side[a.tail] && !source_side[a.head])
            .fold(C::zero(), |acc, a| acc + a.capacity.clone())
    }
}

impl<C: Capacity> Default for FlowNetwork<C> {
    fn default() -> Self {
        Self::new()
    }
}

impl<C: Capacity + Display> FlowNetwork<C> {
    /// Graphviz rendering; node labels are the construction names.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph aux {\n  rankdir=LR;\n");
        for (i, name) in self.names.iter().enumerate() {
            let _ = writeln!(out, "  n{i} [label=\"{}\"];", name.replace('"', "\\\""));
        }
        for a in &self.arcs {
            let label = if a.role == ArcRole::Edge {
                "inf".to_string()
            } else {
                a.capacity.to_string()
            };
            let _ = writeln!(
                out,
                "  n{} -> n{} [label=\"{}\", role=\"{}\"];",
                a.tail,
                a.head,
                label,
                a.role.label()
            );
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowResult<C> {
    pub value: C,
    /// Flow per arc, indexed like [`FlowNetwork::arcs`].
    pub flow: Vec<C>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutCertificate<C> {
    /// `source_side[v]` is true iff `v` is reachable from `s` in the residual graph.
    pub source_side: Vec<bool>,
    pub value: C,
}

impl<C> CutCertificate<C> {
    pub fn contains(&self, node: usize) -> bool {
        self.source_side[node]
    }

    pub fn source_side_size(&self) -> usize {
        self.source_side.iter().filter(|&&b| b).count()
    }
}

struct Residual<C> {
    head: Vec<usize>,
    cap: Vec<C>,
    adj: Vec<Vec<usize>>,
}

impl<C: Capacity> Residual<C> {
    /// Residual edge `2i` is arc `i`, `2i + 1` its reverse.
    fn new(net: &FlowNetwork<C>) -> Self {
        let mut r = Residual {
            head: Vec::with_capacity(2 * net.arcs.len()),
            cap: Vec::with_capacity(2 * net.arcs.len()),
            adj: vec![Vec::new(); net.num_nodes()],
        };
        for a in &net.arcs {
            r.adj[a.tail].push(r.head.len());
            r.head.push(a.head);
            r.cap.push(a.capacity.clone());
            r.adj[a.head].push(r.head.len());
            r.head.push(a.tail);
            r.cap.push(C::zero());
        }
        r
    }

    fn levels(&self, s: usize) -> Vec<usize> {
        let mut level = vec![usize::MAX; self.adj.len()];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.head[e];
                if level[v] == usize::MAX && self.cap[e] > C::zero() {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        level
    }

    /// Pushes a blocking flow in the level graph; returns the amount pushed.
    fn blocking_flow(&mut self, s: usize, t: usize, level: &mut [usize]) -> C {
        let mut total = C::zero();
        let mut next = vec![0usize; self.adj.len()];
        let mut path: Vec<usize> = Vec::new();
        let mut u = s;
        loop {
            if u == t {
                let bottleneck = path
                    .iter()
                    .map(|&e| self.cap[e].clone())
                    .min()
                    .expect("path to sink is non-empty");
                let mut cut_at = None;
                for (i, &e) in path.iter().enumerate() {
                    self.cap[e] = self.cap[e].clone() - bottleneck.clone();
                    self.cap[e ^ 1] = self.cap[e ^ 1].clone() + bottleneck.clone();
                    if cut_at.is_none() && self.cap[e].is_zero() {
                        cut_at = Some(i);
                    }
                }
                total = total + bottleneck;
                let i = cut_at.expect("some edge saturates");
                path.truncate(i);
                u = path.last().map_or(s, |&e| self.head[e]);
                continue;
            }
            if next[u] < self.adj[u].len() {
                let e = self.adj[u][next[u]];
                let v = self.head[e];
                if self.cap[e] > C::zero() && level[v] == level[u] + 1 {
                    path.push(e);
                    u = v;
                } else {
                    next[u] += 1;
                }
                continue;
            }
            // dead end
            level[u] = usize::MAX;
            match path.pop() {
                None => return total,
                Some(e) => {
                    u = self.head[e ^ 1];
                    next[u] += 1;
                }
            }
        }
    }
}

/// Maximum s-t flow.
pub fn max_flow<C: Capacity>(net: &FlowNetwork<C>) -> FlowResult<C> {
    let (s, t) = (net.source, net.sink);
    let mut res = Residual::new(net);
    let mut value = C::zero();
    loop {
        let mut level = res.levels(s);
        if level[t] == usize::MAX {
            break;
        }
        value = value + res.blocking_flow(s, t, &mut level);
    }
    let flow = net
        .arcs
        .iter()
        .enumerate()
        .map(|(i, a)| a.capacity.clone() - res.cap[2 * i].clone())
        .collect();
    FlowResult { value, flow }
}

/// Canonical minimum cut read off an optimal flow: the source side is the set
/// of nodes reachable from `s` in the residual graph.
pub fn min_cut<C: Capacity>(net: &FlowNetwork<C>, flow: &FlowResult<C>) -> CutCertificate<C> {
    let n = net.num_nodes();
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, a) in net.arcs.iter().enumerate() {
        if flow.flow[i] < a.capacity {
            out[a.tail].push(a.head);
        }
        if flow.flow[i] > C::zero() {
            out[a.head].push(a.tail);
        }
    }
    let mut side = vec![false; n];
    side[net.source] = true;
    let mut queue = VecDeque::from([net.source]);
    while let Some(u) = queue.pop_front() {
        for &v in &out[u] {
            if !side[v] {
                side[v] = true;
                queue.push_back(v);
            }
        }
    }
    let value = net.cut_capacity(&side);
    CutCertificate { source_side: side, value }
}

/// Why a flow vector is not a feasible flow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FlowViolation {
    Bounds(usize),
    Conservation(usize),
    Value,
}

impl fmt::Display for FlowViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowViolation::Bounds(a) => write!(f, "arc {a} outside [0, capacity]"),
            FlowViolation::Conservation(v) => write!(f, "conservation fails at node {v}"),
            FlowViolation::Value => f.write_str("reported value differs from net outflow of s"),
        }
    }
}

/// Checks capacity bounds, conservation and the reported value.
pub fn check_flow<C: Capacity>(net: &FlowNetwork<C>, flow: &FlowResult<C>) -> Result<(), FlowViolation> {
    let n = net.num_nodes();
    let mut inflow = vec![C::zero(); n];
    let mut outflow = vec![C::zero(); n];
    for (i, a) in net.arcs.iter().enumerate() {
        let f = &flow.flow[i];
        if *f < C::zero() || *f > a.capacity {
            return Err(FlowViolation::Bounds(i));
        }
        outflow[a.tail] = outflow[a.tail].clone() + f.clone();
        inflow[a.head] = inflow[a.head].clone() + f.clone();
    }
    for v in 0..n {
        if v != net.source && v != net.sink && inflow[v] != outflow[v] {
            return Err(FlowViolation::Conservation(v));
        }
    }
    if outflow[net.source] != flow.value {
        return Err(FlowViolation::Value);
    }
    Ok(())
}
