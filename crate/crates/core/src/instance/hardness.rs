//! Reduction from counting vertex covers to a two-stage instance whose
//! second stage is only available through a sampler.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, RngCore};
use thiserror::Error;

use super::{Mode, Scenario, ScenarioSampler, TwoStageInstance};
use crate::graph::{BipartiteGraph, Side};
use crate::numeric::{int, rat};
use crate::Rational;

pub const ALPHA: &str = "alpha";
pub const BETA1: &str = "beta1";
pub const BETA2: &str = "beta2";

/// Largest base graph whose support is enumerated.
pub const MAX_SUPPORT_VERTICES: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HardnessError {
    #[error("base graph has no edges")]
    NoEdges,
    #[error("vertex name {0:?} is empty or contains ':' or whitespace")]
    BadName(String),
    #[error("self-loop at {0}")]
    SelfLoop(String),
    #[error("line {line}: expected \"u v\" or \"v\", got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("base graph has {0} vertices; at most {MAX_SUPPORT_VERTICES} supported")]
    TooLarge(usize),
}

/// Simple undirected graph. Edges are stored with endpoints in name order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimpleGraph {
    vertices: BTreeSet<String>,
    edges: BTreeSet<(String, String)>,
}

impl SimpleGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_vertex(&mut self, v: impl Into<String>) {
        self.vertices.insert(v.into());
    }

    /// Adds `uv`; duplicates are ignored.
    pub fn add_edge(&mut self, u: impl Into<String>, v: impl Into<String>) -> Result<(), HardnessError> {
        let (u, v) = (u.into(), v.into());
        if u == v {
            return Err(HardnessError::SelfLoop(u));
        }
        self.vertices.insert(u.clone());
        self.vertices.insert(v.clone());
        self.edges.insert(if u < v { (u, v) } else { (v, u) });
        Ok(())
    }

    pub fn from_edges<'a>(edges: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self, HardnessError> {
        let mut g = Self::new();
        for (u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    /// Plain edge-list format: one `u v` per line; a single name declares an
    /// isolated vertex; blank lines and `#` comments are skipped.
    pub fn parse_edge_list(text: &str) -> Result<Self, HardnessError> {
        let mut g = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.as_slice() {
                [v] => g.add_vertex(*v),
                [u, v] => g.add_edge(*u, *v)?,
                _ => {
                    return Err(HardnessError::Syntax {
                        line: i + 1,
                        text: raw.to_string(),
                    })
                }
            }
        }
        Ok(g)
    }

    pub fn vertices(&self) -> impl Iterator<Item = &str> {
        self.vertices.iter().map(String::as_str)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges.iter().map(|(u, v)| (u.as_str(), v.as_str()))
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, v: &str) -> usize {
        self.edges.iter().filter(|(a, b)| a == v || b == v).count()
    }

    pub fn is_connected(&self) -> bool {
        let Some(start) = self.vertices.iter().next() else {
            return true;
        };
        let mut seen = BTreeSet::from([start.as_str()]);
        let mut stack = vec![start.as_str()];
        while let Some(u) = stack.pop() {
            for (a, b) in self.edges() {
                let next = if a == u {
                    b
                } else if b == u {
                    a
                } else {
                    continue;
                };
                if seen.insert(next) {
                    stack.push(next);
                }
            }
        }
        seen.len() == self.vertices.len()
    }
}

pub fn copy_name(v: &str, i: usize) -> String {
    format!("c:{v}:{i}")
}

pub fn edge_name(u: &str, v: &str) -> String {
    format!("e:{u}:{v}")
}

/// The reduction instance built from a base graph.
#[derive(Debug, Clone)]
pub struct HardnessInstance {
    pub base: SimpleGraph,
    pub g0: BipartiteGraph,
    pub lambda: BTreeMap<String, Rational>,
    /// Copy names of each base vertex, `d_v` of them.
    pub copies: BTreeMap<String, Vec<String>>,
}

/// One point of the second-stage support: the kept base vertices, their
/// probability and the induced scenario graph.
#[derive(Debug, Clone)]
pub struct SupportPoint {
    pub subset: BTreeSet<String>,
    pub prob: Rational,
    pub graph: BipartiteGraph,
}

pub fn build_hardness_instance(base: &SimpleGraph) -> Result<HardnessInstance, HardnessError> {
    if base.num_edges() == 0 {
        return Err(HardnessError::NoEdges);
    }
    for v in base.vertices() {
        if v.is_empty() || v.contains(':') || v.chars().any(char::is_whitespace) {
            return Err(HardnessError::BadName(v.to_string()));
        }
    }
    let mut g0 = BipartiteGraph::new();
    let mut copies = BTreeMap::new();
    for v in base.vertices() {
        let names: Vec<String> = (1..=base.degree(v)).map(|i| copy_name(v, i)).collect();
        for c in &names {
            g0.add_vertex(c.clone(), Side::Left).expect("fresh copy");
        }
        copies.insert(v.to_string(), names);
    }
    g0.add_vertex(ALPHA, Side::Left).expect("fresh vertex");
    g0.add_vertex(BETA1, Side::Right).expect("fresh vertex");
    g0.add_vertex(BETA2, Side::Right).expect("fresh vertex");
    for (u, v) in base.edges() {
        let e = edge_name(u, v);
        g0.add_vertex(e.clone(), Side::Right).expect("fresh edge vertex");
        for c in copies[u].iter().chain(&copies[v]) {
            g0.add_edge(c.clone(), e.clone()).expect("copy-edge");
        }
        g0.add_edge(ALPHA, e).expect("alpha-edge");
    }
    g0.add_edge(ALPHA, BETA1).expect("beta edge");
    g0.add_edge(ALPHA, BETA2).expect("beta edge");
    Ok(HardnessInstance {
        base: base.clone(),
        g0,
        lambda: BTreeMap::from([(ALPHA.to_string(), int(1))]),
        copies,
    })
}

impl HardnessInstance {
    /// `G0[Π(S)]`: copies of the kept base vertices, all edge vertices and α.
    pub fn scenario_graph(&self, kept: &BTreeSet<String>) -> BipartiteGraph {
        let keep = self
            .g0
            .vertices()
            .filter(|v| {
                if *v == BETA1 || *v == BETA2 {
                    return false;
                }
                match v.strip_prefix("c:") {
                    Some(rest) => kept.contains(rest.rsplit_once(':').map_or(rest, |(b, _)| b)),
                    None => true,
                }
            })
            .map(str::to_string)
            .collect::<Vec<_>>();
        self.g0.induced(keep.iter().map(String::as_str))
    }

    pub fn enumerate_support(&self) -> Result<Vec<SupportPoint>, HardnessError> {
        let names: Vec<&str> = self.base.vertices().collect();
        let n = names.len();
        if n > MAX_SUPPORT_VERTICES {
            return Err(HardnessError::TooLarge(n));
        }
        let prob = rat(1, 1i64 << n);
        Ok((0u64..1 << n)
            .map(|mask| {
                let subset: BTreeSet<String> = names
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, v)| v.to_string())
                    .collect();
                let graph = self.scenario_graph(&subset);
                SupportPoint {
                    subset,
                    prob: prob.clone(),
                    graph,
                }
            })
            .collect())
    }

    /// The explicit two-stage instance over the whole support.
    pub fn explicit_instance(&self) -> Result<TwoStageInstance, HardnessError> {
        let scenarios = self
            .enumerate_support()?
            .into_iter()
            .map(|p| Scenario {
                name: format!("S{{{}}}", p.subset.iter().cloned().collect::<Vec<_>>().join(",")),
                prob: p.prob,
                graph: p.graph,
            })
            .collect();
        Ok(TwoStageInstance {
            g0: self.g0.clone(),
            scenarios,
            lambda: self.lambda.clone(),
            mode: Mode::Pos,
        })
    }

    /// First-stage instance with no scenarios yet.
    pub fn first_stage(&self) -> TwoStageInstance {
        TwoStageInstance {
            g0: self.g0.clone(),
            scenarios: Vec::new(),
            lambda: self.lambda.clone(),
            mode: Mode::Pos,
        }
    }

    pub fn sampler(&self) -> HardnessSampler {
        HardnessSampler { inst: self.clone() }
    }
}

/// Keeps each base vertex's copy block independently with probability 1/2.
#[derive(Debug, Clone)]
pub struct HardnessSampler {
    inst: HardnessInstance,
}

impl ScenarioSampler for HardnessSampler {
    fn draw(&self, rng: &mut dyn RngCore) -> BipartiteGraph {
        let kept = self
            .inst
            .base
            .vertices()
            .filter(|_| rng.random_bool(0.5))
            .map(str::to_string)
            .collect();
        self.inst.scenario_graph(&kept)
    }
}
