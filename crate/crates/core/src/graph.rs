//! Bipartite graphs with fixed sides, maximum matchings, König covers and
//! core membership.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use num_traits::{Num, One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Left => f.write_str("Left"),
            Side::Right => f.write_str("Right"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
    #[error("vertex {name} already declared on the {existing} side")]
    SideConflict { name: String, existing: Side },
    #[error("self-loop at {0}")]
    SelfLoop(String),
    #[error("edge {0}-{1} joins two {2} vertices")]
    SameSide(String, String, Side),
    #[error("parallel edge {0}-{1}")]
    ParallelEdge(String, String),
}

/// A bipartite graph whose vertices carry a fixed side label.
///
/// Edges are stored as `(left, right)` pairs, so every edge joins the two
/// sides and there are no self-loops or parallel edges. Iteration order is
/// lexicographic in the vertex names.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BipartiteGraph {
    sides: BTreeMap<String, Side>,
    edges: BTreeSet<(String, String)>,
}

impl BipartiteGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a graph from `(name, side)` pairs and unordered name pairs.
    pub fn from_parts<V, E, S>(vertices: V, edges: E) -> Result<Self, GraphError>
    where
        V: IntoIterator<Item = (S, Side)>,
        E: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let mut g = Self::new();
        for (name, side) in vertices {
            g.add_vertex(name, side)?;
        }
        for (u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    /// Adds a vertex; re-adding with the same side is a no-op.
    pub fn add_vertex(&mut self, name: impl Into<String>, side: Side) -> Result<(), GraphError> {
        let name = name.into();
        match self.sides.get(&name) {
            Some(&existing) if existing != side => Err(GraphError::SideConflict { name, existing }),
            Some(_) => Ok(()),
            None => {
                self.sides.insert(name, side);
                Ok(())
            }
        }
    }

    pub fn add_edge(&mut self, u: impl Into<String>, v: impl Into<String>) -> Result<(), GraphError> {
        let (u, v) = (u.into(), v.into());
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        let su = *self.sides.get(&u).ok_or_else(|| GraphError::UnknownVertex(u.clone()))?;
        let sv = *self.sides.get(&v).ok_or_else(|| GraphError::UnknownVertex(v.clone()))?;
        if su == sv {
            return Err(GraphError::SameSide(u, v, su));
        }
        let key = if su == Side::Left { (u, v) } else { (v, u) };
        if self.edges.contains(&key) {
            return Err(GraphError::ParallelEdge(key.0, key.1));
        }
        self.edges.insert(key);
        Ok(())
    }

    pub fn side(&self, v: &str) -> Option<Side> {
        self.sides.get(v).copied()
    }

    pub fn contains(&self, v: &str) -> bool {
        self.sides.contains_key(v)
    }

    pub fn vertices(&self) -> impl Iterator<Item = &str> + '_ {
        self.sides.keys().map(String::as_str)
    }

    pub fn sides(&self) -> &BTreeMap<String, Side> {
        &self.sides
    }

    pub fn vertices_on(&self, side: Side) -> impl Iterator<Item = &str> + '_ {
        self.sides
            .iter()
            .filter(move |(_, &s)| s == side)
            .map(|(v, _)| v.as_str())
    }

    /// Edges as `(left, right)` pairs.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.edges.iter().map(|(l, r)| (l.as_str(), r.as_str()))
    }

    pub fn has_edge(&self, u: &str, v: &str) -> bool {
        self.edges.contains(&(u.to_string(), v.to_string()))
            || self.edges.contains(&(v.to_string(), u.to_string()))
    }

    pub fn num_vertices(&self) -> usize {
        self.sides.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Subgraph induced by the given vertex names (unknown names ignored).
    pub fn induced<'a, I>(&self, keep: I) -> BipartiteGraph
    where
        I: IntoIterator<Item = &'a str>,
    {
        let keep: BTreeSet<&str> = keep.into_iter().filter(|v| self.contains(v)).collect();
        BipartiteGraph {
            sides: self
                .sides
                .iter()
                .filter(|(v, _)| keep.contains(v.as_str()))
                .map(|(v, s)| (v.clone(), *s))
                .collect(),
            edges: self
                .edges
                .iter()
                .filter(|(l, r)| keep.contains(l.as_str()) && keep.contains(r.as_str()))
                .cloned()
                .collect(),
        }
    }
}

/// A value per vertex. Core elements are allocations of this kind.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Allocation<T = Rational> {
    values: BTreeMap<String, T>,
}

impl<T> Allocation<T> {
    pub fn new(values: BTreeMap<String, T>) -> Self {
        Self { values }
    }

    pub fn get(&self, v: &str) -> Option<&T> {
        self.values.get(v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &T)> + '_ {
        self.values.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn values(&self) -> &BTreeMap<String, T> {
        &self.values
    }

    pub fn into_values(self) -> BTreeMap<String, T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl<T: Clone + Zero + One> Allocation<T> {
    /// 0/1 indicator of `chosen` over all vertices of `g`.
    pub fn indicator<'a, I>(g: &BipartiteGraph, chosen: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let chosen: BTreeSet<&str> = chosen.into_iter().collect();
        Self {
            values: g
                .vertices()
                .map(|v| {
                    let val = if chosen.contains(v) { T::one() } else { T::zero() };
                    (v.to_string(), val)
                })
                .collect(),
        }
    }

    pub fn zeros(g: &BipartiteGraph) -> Self {
        Self::indicator(g, std::iter::empty())
    }

    pub fn total(&self) -> T {
        self.values.values().fold(T::zero(), |acc, v| acc + v.clone())
    }
}

impl<T: Zero + One + PartialEq> Allocation<T> {
    pub fn is_zero_one(&self) -> bool {
        self.values.values().all(|v| v.is_zero() || v.is_one())
    }

    /// Vertices with value exactly one.
    pub fn support(&self) -> BTreeSet<String> {
        self.values
            .iter()
            .filter(|(_, v)| v.is_one())
            .map(|(k, _)| k.clone())
            .collect()
    }
}

impl<T> FromIterator<(String, T)> for Allocation<T> {
    fn from_iter<I: IntoIterator<Item = (String, T)>>(iter: I) -> Self {
        Self {
            values: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    /// `(left, right)` pairs.
    pub pairs: Vec<(String, String)>,
}

impl Matching {
    pub fn size(&self) -> usize {
        self.pairs.len()
    }
}

/// Index form of a bipartite graph used by the matching routines.
struct Indexed<'g> {
    left: Vec<&'g str>,
    right: Vec<&'g str>,
    adj: Vec<Vec<usize>>,
}

impl<'g> Indexed<'g> {
    fn new(g: &'g BipartiteGraph) -> Self {
        let left: Vec<&str> = g.vertices_on(Side::Left).collect();
        let right: Vec<&str> = g.vertices_on(Side::Right).collect();
        let left_idx: BTreeMap<&str, usize> = left.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let right_idx: BTreeMap<&str, usize> = right.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let mut adj = vec![Vec::new(); left.len()];
        for (l, r) in g.edges() {
            adj[left_idx[l]].push(right_idx[r]);
        }
        Self { left, right, adj }
    }
}

const NIL: usize = usize::MAX;

/// Hopcroft-Karp. Returns `(match_left, match_right)` with `NIL` for free.
fn hopcroft_karp(ix: &Indexed<'_>) -> (Vec<usize>, Vec<usize>) {
    let (n, m) = (ix.left.len(), ix.right.len());
    let mut match_l = vec![NIL; n];
    let mut match_r = vec![NIL; m];
    let mut dist = vec![0usize; n];
    loop {
        // BFS layers from free left vertices.
        let mut queue = VecDeque::new();
        for u in 0..n {
            if match_l[u] == NIL {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &r in &ix.adj[u] {
                let w = match_r[r];
                if w == NIL {
                    found = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            break;
        }
        let mut next = vec![0usize; n];
        for u in 0..n {
            if match_l[u] == NIL {
                augment(u, ix, &mut match_l, &mut match_r, &mut dist, &mut next);
            }
        }
    }
    (match_l, match_r)
}

/// Iterative layered DFS from a free left vertex.
fn augment(
    root: usize,
    ix: &Indexed<'_>,
    match_l: &mut [usize],
    match_r: &mut [usize],
    dist: &mut [usize],
    next: &mut [usize],
) -> bool {
    // stack of (left vertex, right vertex used to reach the next one)
    let mut stack: Vec<usize> = vec![root];
    let mut via: Vec<usize> = Vec::new();
    while let Some(&u) = stack.last() {
        if next[u] == ix.adj[u].len() {
            dist[u] = usize::MAX;
            stack.pop();
            via.pop();
            continue;
        }
        let r = ix.adj[u][next[u]];
        next[u] += 1;
        let w = match_r[r];
        if w == NIL {
            via.push(r);
            for (&l, &rr) in stack.iter().zip(via.iter()) {
                match_l[l] = rr;
                match_r[rr] = l;
            }
            return true;
        }
        if dist[w] != usize::MAX && dist[w] == dist[u] + 1 {
            via.push(r);
            stack.push(w);
        }
    }
    false
}

/// Maximum cardinality matching; its size is ν(g).
pub fn max_matching(g: &BipartiteGraph) -> Matching {
    let ix = Indexed::new(g);
    let (match_l, _) = hopcroft_karp(&ix);
    let pairs = match_l
        .iter()
        .enumerate()
        .filter(|(_, &r)| r != NIL)
        .map(|(l, &r)| (ix.left[l].to_string(), ix.right[r].to_string()))
        .collect();
    Matching { pairs }
}

/// ν(g).
pub fn matching_number(g: &BipartiteGraph) -> usize {
    max_matching(g).size()
}

/// Minimum vertex cover by König's construction.
///
/// `Z` is the set of vertices reachable from free left vertices along
/// alternating paths (non-matching edges left to right, matching edges back).
/// The cover is `(Left \ Z) ∪ (Right ∩ Z)`.
pub fn min_vertex_cover(g: &BipartiteGraph) -> BTreeSet<String> {
    let ix = Indexed::new(g);
    let (match_l, match_r) = hopcroft_karp(&ix);
    let mut seen_l = vec![false; ix.left.len()];
    let mut seen_r = vec![false; ix.right.len()];
    let mut queue: VecDeque<usize> = (0..ix.left.len()).filter(|&u| match_l[u] == NIL).collect();
    for &u in &queue {
        seen_l[u] = true;
    }
    while let Some(u) = queue.pop_front() {
        for &r in &ix.adj[u] {
            if seen_r[r] || match_l[u] == r {
                continue;
            }
            seen_r[r] = true;
            let w = match_r[r];
            if w != NIL && !seen_l[w] {
                seen_l[w] = true;
                queue.push_back(w);
            }
        }
    }
    let mut cover = BTreeSet::new();
    for (i, v) in ix.left.iter().enumerate() {
        if !seen_l[i] {
            cover.insert(v.to_string());
        }
    }
    for (i, v) in ix.right.iter().enumerate() {
        if seen_r[i] {
            cover.insert(v.to_string());
        }
    }
    cover
}

pub fn is_vertex_cover<'a, I>(g: &BipartiteGraph, cover: I) -> bool
where
    I: IntoIterator<Item = &'a str>,
{
    let cover: BTreeSet<&str> = cover.into_iter().collect();
    g.edges().all(|(l, r)| cover.contains(l) || cover.contains(r))
}

/// Core membership: `y >= 0`, `y_u + y_v >= 1` on every edge and
/// `sum y = ν(g)`, checked in the scalar type `T`.
///
/// `y` must be defined on exactly the vertices of `g`.
pub fn is_core<T>(g: &BipartiteGraph, y: &Allocation<T>) -> bool
where
    T: Num + PartialOrd + Clone,
{
    if y.len() != g.num_vertices() || g.vertices().any(|v| y.get(v).is_none()) {
        return false;
    }
    if y.iter().any(|(_, val)| *val < T::zero()) {
        return false;
    }
    let covered = g.edges().all(|(l, r)| {
        let s = y.get(l).unwrap().clone() + y.get(r).unwrap().clone();
        s >= T::one()
    });
    if !covered {
        return false;
    }
    let nu = (0..matching_number(g)).fold(T::zero(), |acc, _| acc + T::one());
    y.total() == nu
}

/// A minimum vertex cover minimizing `sum alpha_v` among all minimum covers.
///
/// Solved by the flow reduction with a single layer and first-stage
/// objective `alpha`; vertices missing from `alpha` get coefficient 0.
pub fn weighted_min_vertex_cover(
    g: &BipartiteGraph,
    alpha: &BTreeMap<String, Rational>,
) -> Allocation {
    crate::reduce::solve_single_layer(g, alpha)
}
