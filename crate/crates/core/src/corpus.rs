//! Enumerated and random test corpora.
//!
//! Small graphs are encoded as bitmasks over a vertex pool `l0..`, `r0..`:
//! vertex `i < left` is `l{i}`, vertex `left + j` is `r{j}`, and edge bit
//! `i * right + j` joins `l{i}` and `r{j}`. Enumeration is up to relabelling
//! vertices within a side.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::graph::{BipartiteGraph, Side};
use crate::instance::{Mode, MultistageInstance, Scenario, TwoStageInstance};
use crate::numeric::{int, rat};
use crate::Rational;

/// Vertex pool with fixed sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pool {
    pub left: usize,
    pub right: usize,
}

/// A graph on a [`Pool`]: present vertices and edges as bitmasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MaskGraph {
    pub vertices: u32,
    pub edges: u64,
}

impl Pool {
    pub fn size(self) -> usize {
        self.left + self.right
    }

    pub fn all_vertices(self) -> u32 {
        (1u32 << self.size()) - 1
    }

    fn edge_bit(self, i: usize, j: usize) -> u64 {
        1u64 << (i * self.right + j)
    }

    /// Edges whose endpoints are both in `vertices`.
    pub fn edges_within(self, vertices: u32) -> u64 {
        let mut m = 0;
        for i in 0..self.left {
            for j in 0..self.right {
                if vertices >> i & 1 == 1 && vertices >> (self.left + j) & 1 == 1 {
                    m |= self.edge_bit(i, j);
                }
            }
        }
        m
    }

    pub fn name(self, v: usize) -> String {
        if v < self.left {
            format!("l{v}")
        } else {
            format!("r{}", v - self.left)
        }
    }

    pub fn to_graph(self, g: MaskGraph) -> BipartiteGraph {
        let mut out = BipartiteGraph::new();
        for v in 0..self.size() {
            if g.vertices >> v & 1 == 1 {
                let side = if v < self.left { Side::Left } else { Side::Right };
                out.add_vertex(self.name(v), side).expect("fresh pool vertex");
            }
        }
        for i in 0..self.left {
            for j in 0..self.right {
                if g.edges & self.edge_bit(i, j) != 0 {
                    out.add_edge(self.name(i), self.name(self.left + j)).expect("pool edge");
                }
            }
        }
        out
    }

    /// Every side-preserving relabelling, as (left permutation, right permutation).
    fn relabellings(self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let pl = permutations(self.left);
        let pr = permutations(self.right);
        let mut out = Vec::with_capacity(pl.len() * pr.len());
        for a in &pl {
            for b in &pr {
                out.push((a.clone(), b.clone()));
            }
        }
        out
    }

    fn apply(self, (pl, pr): &(Vec<usize>, Vec<usize>), g: MaskGraph) -> MaskGraph {
        let mut vertices = 0u32;
        for (i, &to) in pl.iter().enumerate() {
            if g.vertices >> i & 1 == 1 {
                vertices |= 1 << to;
            }
        }
        for (j, &to) in pr.iter().enumerate() {
            if g.vertices >> (self.left + j) & 1 == 1 {
                vertices |= 1 << (self.left + to);
            }
        }
        let mut edges = 0u64;
        for (i, &li) in pl.iter().enumerate() {
            for (j, &rj) in pr.iter().enumerate() {
                if g.edges & self.edge_bit(i, j) != 0 {
                    edges |= self.edge_bit(li, rj);
                }
            }
        }
        MaskGraph { vertices, edges }
    }

    /// Smallest image of a sequence of graphs under a common relabelling.
    pub fn canonical(self, graphs: &[MaskGraph], relabellings: &[(Vec<usize>, Vec<usize>)]) -> Vec<MaskGraph> {
        relabellings
            .iter()
            .map(|p| graphs.iter().map(|&g| self.apply(p, g)).collect::<Vec<_>>())
            .min()
            .unwrap_or_else(|| graphs.to_vec())
    }

    /// All subgraphs: any vertex subset, any subset of the edges within it.
    pub fn subgraphs(self) -> Vec<MaskGraph> {
        let mut out = Vec::new();
        for vertices in 0..=self.all_vertices() {
            for edges in submasks(self.edges_within(vertices)) {
                out.push(MaskGraph { vertices, edges });
            }
        }
        out
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// All submasks of `m`, including 0 and `m`.
fn submasks(m: u64) -> Vec<u64> {
    let mut out = vec![0];
    let mut s = m;
    while s != 0 {
        out.push(s);
        s = (s - 1) & m;
    }
    out
}

/// Pools with exactly `n` vertices, every split.
pub fn pools(n: usize) -> impl Iterator<Item = Pool> {
    (0..=n).map(move |left| Pool { left, right: n - left })
}

/// Every bipartite graph on the pools with `1..=max_vertices` vertices, all
/// vertices present, labelled (no isomorphism reduction).
pub fn all_bipartite_graphs(max_vertices: usize) -> Vec<BipartiteGraph> {
    let mut out = Vec::new();
    for n in 1..=max_vertices {
        for pool in pools(n) {
            let full = pool.edges_within(pool.all_vertices());
            for edges in submasks(full) {
                out.push(pool.to_graph(MaskGraph {
                    vertices: pool.all_vertices(),
                    edges,
                }));
            }
        }
    }
    out
}

/// Representatives of full-vertex-set graphs on `pool` up to relabelling.
pub fn nonisomorphic_graphs(pool: Pool) -> Vec<MaskGraph> {
    let rel = pool.relabellings();
    let all = pool.all_vertices();
    let mut seen = BTreeSet::new();
    for edges in submasks(pool.edges_within(all)) {
        seen.insert(pool.canonical(&[MaskGraph { vertices: all, edges }], &rel)[0]);
    }
    seen.into_iter().collect()
}

/// Random bipartite graph with `1..=max_vertices` vertices and a random split.
pub fn random_bipartite_graph(rng: &mut impl Rng, max_vertices: usize, density: f64) -> BipartiteGraph {
    let n = rng.random_range(1..=max_vertices.max(1));
    let left = rng.random_range(0..=n);
    let pool = Pool { left, right: n - left };
    let mut edges = 0u64;
    for i in 0..pool.left {
        for j in 0..pool.right {
            if rng.random_bool(density) {
                edges |= pool.edge_bit(i, j);
            }
        }
    }
    pool.to_graph(MaskGraph {
        vertices: pool.all_vertices(),
        edges,
    })
}

/// Deterministic weight pattern number `k` over the given vertices.
pub fn lambda_pattern<'a>(k: usize, vertices: impl Iterator<Item = &'a str>) -> BTreeMap<String, Rational> {
    vertices
        .enumerate()
        .map(|(i, v)| {
            let w = match k % 4 {
                0 => int(1),
                1 => int((i % 3) as i64),
                2 => {
                    if v.starts_with('l') {
                        rat(1, 2)
                    } else {
                        int(2)
                    }
                }
                _ => int(i as i64 + 1),
            };
            (v.to_string(), w)
        })
        .filter(|(_, w)| w != &int(0))
        .collect()
}

const PAIR_PROBS: [(i64, i64); 3] = [(1, 2), (1, 3), (3, 4)];

const MODES: [Mode; 3] = [Mode::Abs, Mode::Pos, Mode::Neg];

/// Exhaustive two-stage corpus.
///
/// First stages: every graph with `1..=max_vertices` vertices up to
/// relabelling. Scenario sets: each single subgraph, and each unordered pair
/// of distinct induced subgraphs. Weight pattern and pair probabilities
/// rotate with the instance index; every scenario set appears in all three
/// modes.
pub fn two_stage_corpus(max_vertices: usize) -> Vec<TwoStageInstance> {
    let mut out = Vec::new();
    let mut k = 0usize;
    for n in 1..=max_vertices {
        for pool in pools(n) {
            for g0m in nonisomorphic_graphs(pool) {
                let g0 = pool.to_graph(g0m);
                let mut sets: Vec<Vec<MaskGraph>> = Vec::new();
                for s in pool.subgraphs() {
                    if s.edges & !g0m.edges == 0 {
                        sets.push(vec![s]);
                    }
                }
                let induced: Vec<MaskGraph> = (0..=pool.all_vertices())
                    .map(|v| MaskGraph {
                        vertices: v,
                        edges: g0m.edges & pool.edges_within(v),
                    })
                    .collect();
                for a in 0..induced.len() {
                    for b in a + 1..induced.len() {
                        sets.push(vec![induced[a], induced[b]]);
                    }
                }
                for set in sets {
                    let scenarios = match set.as_slice() {
                        [s] => vec![Scenario {
                            name: "S1".into(),
                            prob: int(1),
                            graph: pool.to_graph(*s),
                        }],
                        [s1, s2] => {
                            let (p, q) = PAIR_PROBS[k / 4 % PAIR_PROBS.len()];
                            vec![
                                Scenario {
                                    name: "S1".into(),
                                    prob: rat(p, q),
                                    graph: pool.to_graph(*s1),
                                },
                                Scenario {
                                    name: "S2".into(),
                                    prob: rat(q - p, q),
                                    graph: pool.to_graph(*s2),
                                },
                            ]
                        }
                        _ => unreachable!(),
                    };
                    let lambda = lambda_pattern(k, g0.vertices());
                    for mode in MODES {
                        out.push(TwoStageInstance {
                            g0: g0.clone(),
                            scenarios: scenarios.clone(),
                            lambda: lambda.clone(),
                            mode,
                        });
                    }
                    k += 1;
                }
            }
        }
    }
    out
}

/// Exhaustive multistage corpus: every chain of `2..=max_stages` stage graphs
/// over a pool of exactly `pool_size` vertices (each stage any subgraph, so
/// smaller vertex sets are included), up to relabelling the pool. Mode and
/// weights rotate with the chain index.
pub fn multistage_corpus(pool_size: usize, max_stages: usize) -> Vec<MultistageInstance> {
    let mut out = Vec::new();
    let mut k = 0usize;
    for pool in pools(pool_size) {
        let rel = pool.relabellings();
        let subs = pool.subgraphs();
        for stages in 2..=max_stages {
            let mut seen = BTreeSet::new();
            let mut idx = vec![0usize; stages];
            loop {
                let chain: Vec<MaskGraph> = idx.iter().map(|&i| subs[i]).collect();
                seen.insert(pool.canonical(&chain, &rel));
                // odometer increment
                let mut pos = 0;
                while pos < stages {
                    idx[pos] += 1;
                    if idx[pos] < subs.len() {
                        break;
                    }
                    idx[pos] = 0;
                    pos += 1;
                }
                if pos == stages {
                    break;
                }
            }
            for chain in seen {
                let graphs: Vec<BipartiteGraph> = chain.iter().map(|&g| pool.to_graph(g)).collect();
                let lambda = (0..stages - 1)
                    .map(|t| {
                        let shared: Vec<&str> =
                            graphs[t].vertices().filter(|v| graphs[t + 1].contains(v)).collect();
                        lambda_pattern(k + t, shared.into_iter())
                    })
                    .collect();
                out.push(MultistageInstance {
                    stages: graphs,
                    lambda,
                    mode: MODES[k % 3],
                });
                k += 1;
            }
        }
    }
    out
}

/// Pairs of graphs on one common vertex set with `1..=max_vertices`
/// vertices (every split), up to relabelling the pair.
pub fn same_vertex_set_pairs(max_vertices: usize) -> Vec<(BipartiteGraph, BipartiteGraph)> {
    let mut out = Vec::new();
    for n in 1..=max_vertices {
        for pool in pools(n) {
            let rel = pool.relabellings();
            let all = pool.all_vertices();
            let masks = submasks(pool.edges_within(all));
            let mut seen = BTreeSet::new();
            for &a in &masks {
                for &b in &masks {
                    let pair = [MaskGraph { vertices: all, edges: a }, MaskGraph { vertices: all, edges: b }];
                    seen.insert(pool.canonical(&pair, &rel));
                }
            }
            for pair in seen {
                out.push((pool.to_graph(pair[0]), pool.to_graph(pair[1])));
            }
        }
    }
    out
}
