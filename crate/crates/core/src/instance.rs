//! Two-stage and multistage instances: data model, validation, the JSON file
//! format, seeded generators and scenario samplers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Allocation, BipartiteGraph, GraphError, Side};
use crate::numeric::{common_denominator, format_ratio, int, rat, rat_of_string};
use crate::Rational;

pub mod hardness;

pub use hardness::{build_hardness_instance, HardnessError, HardnessInstance, HardnessSampler, SimpleGraph};

/// Which allocation change is charged between stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// `|y_v - y'_v|`
    Abs,
    /// `[y_v - y'_v]^+`, a loss for the player.
    Pos,
    /// `[y'_v - y_v]^+`
    Neg,
}

impl Mode {
    pub fn charges_loss(self) -> bool {
        matches!(self, Mode::Abs | Mode::Pos)
    }

    pub fn charges_gain(self) -> bool {
        matches!(self, Mode::Abs | Mode::Neg)
    }

    /// Charged difference between an earlier value and a later one.
    pub fn penalty(self, earlier: &Rational, later: &Rational) -> Rational {
        let diff = earlier - later;
        let loss = if diff.is_positive() { diff.clone() } else { Rational::zero() };
        let gain = if diff.is_negative() { -diff } else { Rational::zero() };
        match self {
            Mode::Abs => loss + gain,
            Mode::Pos => loss,
            Mode::Neg => gain,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Abs => "abs",
            Mode::Pos => "pos",
            Mode::Neg => "neg",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "abs" => Ok(Mode::Abs),
            "pos" => Ok(Mode::Pos),
            "neg" => Ok(Mode::Neg),
            other => Err(format!("unknown mode {other:?} (expected abs, pos or neg)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub name: String,
    pub prob: Rational,
    pub graph: BipartiteGraph,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoStageInstance {
    pub g0: BipartiteGraph,
    pub scenarios: Vec<Scenario>,
    /// Dissatisfaction weights on first-stage vertices; absent means 0.
    pub lambda: BTreeMap<String, Rational>,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultistageInstance {
    pub stages: Vec<BipartiteGraph>,
    /// One weight map per transition `i -> i+1`; absent means 0.
    pub lambda: Vec<BTreeMap<String, Rational>>,
    pub mode: Mode,
}

/// A broken instance invariant. `field()` names the offending input field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    ProbabilitySum(Rational),
    NonPositiveProbability { scenario: usize, prob: Rational },
    DuplicateScenarioName(String),
    BipartitionMismatch { location: String, vertex: String },
    NegativeLambda { location: String, vertex: String },
    LambdaUnknownVertex { location: String, vertex: String },
    TooFewStages(usize),
    TransitionCount { expected: usize, found: usize },
    Graph { location: String, error: GraphError },
    MissingSide(String),
    BothSides(String),
    MissingKey(&'static str),
    UnexpectedKey(&'static str),
    UnknownKind(String),
    UnknownMode(String),
    Fraction { location: String, message: String },
    SizeMismatch { location: String, message: String },
}

impl Violation {
    pub fn field(&self) -> String {
        match self {
            Violation::ProbabilitySum(_) => "scenarios[].prob".into(),
            Violation::NonPositiveProbability { scenario, .. } => format!("scenarios[{scenario}].prob"),
            Violation::DuplicateScenarioName(_) => "scenarios[].name".into(),
            Violation::BipartitionMismatch { location, .. }
            | Violation::NegativeLambda { location, .. }
            | Violation::LambdaUnknownVertex { location, .. }
            | Violation::Graph { location, .. }
            | Violation::Fraction { location, .. }
            | Violation::SizeMismatch { location, .. } => location.clone(),
            Violation::TooFewStages(_) => "stages".into(),
            Violation::TransitionCount { .. } => "lambda".into(),
            Violation::MissingSide(_) | Violation::BothSides(_) => "left/right".into(),
            Violation::MissingKey(k) | Violation::UnexpectedKey(k) => (*k).into(),
            Violation::UnknownKind(_) => "kind".into(),
            Violation::UnknownMode(_) => "mode".into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ProbabilitySum(s) => write!(f, "probabilities sum to {}", format_ratio(s)),
            Violation::NonPositiveProbability { prob, .. } => {
                write!(f, "probability {} is not positive", format_ratio(prob))
            }
            Violation::DuplicateScenarioName(n) => write!(f, "duplicate scenario name {n}"),
            Violation::BipartitionMismatch { vertex, .. } => write!(f, "bipartition mismatch at {vertex}"),
            Violation::NegativeLambda { vertex, .. } => write!(f, "negative lambda at {vertex}"),
            Violation::LambdaUnknownVertex { vertex, .. } => write!(f, "lambda given for unknown vertex {vertex}"),
            Violation::TooFewStages(k) => write!(f, "need at least 2 stages, found {k}"),
            Violation::TransitionCount { expected, found } => {
                write!(f, "expected {expected} lambda maps (one per transition), found {found}")
            }
            Violation::Graph { error, .. } => write!(f, "{error}"),
            Violation::MissingSide(v) => write!(f, "vertex {v} is in neither left nor right"),
            Violation::BothSides(v) => write!(f, "vertex {v} is in both left and right"),
            Violation::MissingKey(k) => write!(f, "missing key {k:?}"),
            Violation::UnexpectedKey(k) => write!(f, "key {k:?} does not belong to this kind"),
            Violation::UnknownKind(k) => write!(f, "unknown kind {k:?}"),
            Violation::UnknownMode(m) => write!(f, "unknown mode {m:?}"),
            Violation::Fraction { message, .. } => f.write_str(message),
            Violation::SizeMismatch { message, .. } => f.write_str(message),
        }
    }
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("malformed instance file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid instance: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(vs: &[Violation]) -> String {
    vs.iter()
        .map(|v| format!("{}: {v}", v.field()))
        .collect::<Vec<_>>()
        .join("; ")
}

fn check_lambda_values(location: &str, lambda: &BTreeMap<String, Rational>, out: &mut Vec<Violation>) {
    for (v, w) in lambda {
        if w.is_negative() {
            out.push(Violation::NegativeLambda {
                location: format!("{location}.{v}"),
                vertex: v.clone(),
            });
        }
    }
}

fn side_mismatches(reference: &BipartiteGraph, other: &BipartiteGraph, location: &str, out: &mut Vec<Violation>) {
    for (v, side) in other.sides() {
        if let Some(s0) = reference.side(v) {
            if s0 != *side {
                out.push(Violation::BipartitionMismatch {
                    location: location.to_string(),
                    vertex: v.clone(),
                });
            }
        }
    }
}

impl TwoStageInstance {
    /// `Ok` iff every instance invariant holds; otherwise all violations.
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        let mut total = Rational::zero();
        let mut names = BTreeSet::new();
        for (i, s) in self.scenarios.iter().enumerate() {
            if !s.prob.is_positive() {
                out.push(Violation::NonPositiveProbability {
                    scenario: i,
                    prob: s.prob.clone(),
                });
            }
            total += &s.prob;
            if !names.insert(s.name.as_str()) {
                out.push(Violation::DuplicateScenarioName(s.name.clone()));
            }
            side_mismatches(&self.g0, &s.graph, &format!("scenarios[{i}].vertices"), &mut out);
        }
        if !total.is_one() {
            out.push(Violation::ProbabilitySum(total));
        }
        for v in self.lambda.keys() {
            if !self.g0.contains(v) {
                out.push(Violation::LambdaUnknownVertex {
                    location: format!("lambda.{v}"),
                    vertex: v.clone(),
                });
            }
        }
        check_lambda_values("lambda", &self.lambda, &mut out);
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    pub fn lambda_of(&self, v: &str) -> Rational {
        self.lambda.get(v).cloned().unwrap_or_else(Rational::zero)
    }

    /// `V_0 ∩ V_S` in name order.
    pub fn shared(&self, scenario: usize) -> Vec<&str> {
        let gs = &self.scenarios[scenario].graph;
        self.g0.vertices().filter(|v| gs.contains(v)).collect()
    }

    /// `sum_S p_S sum_{v in V0 ∩ VS} λ_v · penalty(y_v, y^S_v)` for the mode.
    pub fn objective_of(&self, y: &Allocation, per_scenario: &[Allocation]) -> Rational {
        let mut total = Rational::zero();
        for (i, s) in self.scenarios.iter().enumerate() {
            let mut inner = Rational::zero();
            for v in self.shared(i) {
                let lam = self.lambda_of(v);
                if lam.is_zero() {
                    continue;
                }
                inner += lam * self.mode.penalty(&y.values()[v], &per_scenario[i].values()[v]);
            }
            total += &s.prob * inner;
        }
        total
    }

    pub fn has_edges(&self) -> bool {
        self.g0.num_edges() > 0 || self.scenarios.iter().any(|s| s.graph.num_edges() > 0)
    }
}

impl MultistageInstance {
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        let k = self.stages.len();
        if k < 2 {
            out.push(Violation::TooFewStages(k));
        }
        let mut global: BTreeMap<&str, Side> = BTreeMap::new();
        for (i, g) in self.stages.iter().enumerate() {
            for (v, &side) in g.sides() {
                match global.get(v.as_str()) {
                    Some(&s) if s != side => out.push(Violation::BipartitionMismatch {
                        location: format!("stages[{i}].vertices"),
                        vertex: v.clone(),
                    }),
                    Some(_) => {}
                    None => {
                        global.insert(v, side);
                    }
                }
            }
        }
        if self.lambda.len() != k.saturating_sub(1) {
            out.push(Violation::TransitionCount {
                expected: k.saturating_sub(1),
                found: self.lambda.len(),
            });
        }
        for (i, lam) in self.lambda.iter().enumerate() {
            for v in lam.keys() {
                let shared = self.stages.get(i).is_some_and(|g| g.contains(v))
                    && self.stages.get(i + 1).is_some_and(|g| g.contains(v));
                if !shared {
                    out.push(Violation::LambdaUnknownVertex {
                        location: format!("lambda[{i}].{v}"),
                        vertex: v.clone(),
                    });
                }
            }
            check_lambda_values(&format!("lambda[{i}]"), lam, &mut out);
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    pub fn lambda_of(&self, transition: usize, v: &str) -> Rational {
        self.lambda[transition].get(v).cloned().unwrap_or_else(Rational::zero)
    }

    /// `V_i ∩ V_{i+1}` in name order.
    pub fn shared(&self, transition: usize) -> Vec<&str> {
        let next = &self.stages[transition + 1];
        self.stages[transition].vertices().filter(|v| next.contains(v)).collect()
    }

    pub fn objective_of(&self, per_stage: &[Allocation]) -> Rational {
        let mut total = Rational::zero();
        for i in 0..self.stages.len().saturating_sub(1) {
            for v in self.shared(i) {
                let lam = self.lambda_of(i, v);
                if !lam.is_zero() {
                    total += lam * self.mode.penalty(&per_stage[i].values()[v], &per_stage[i + 1].values()[v]);
                }
            }
        }
        total
    }

    pub fn has_edges(&self) -> bool {
        self.stages.iter().any(|g| g.num_edges() > 0)
    }
}

/// Either kind of instance, as stored in an instance file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instance {
    TwoStage(TwoStageInstance),
    Multistage(MultistageInstance),
}

impl Instance {
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        match self {
            Instance::TwoStage(i) => i.validate(),
            Instance::Multistage(i) => i.validate(),
        }
    }

    pub fn mode(&self) -> Mode {
        match self {
            Instance::TwoStage(i) => i.mode,
            Instance::Multistage(i) => i.mode,
        }
    }

    pub fn set_mode(&mut self, mode: Mode) {
        match self {
            Instance::TwoStage(i) => i.mode = mode,
            Instance::Multistage(i) => i.mode = mode,
        }
    }

    /// Parses and validates an instance file.
    pub fn from_json(text: &str) -> Result<Instance, InstanceError> {
        let file: InstanceFile = serde_json::from_str(text)?;
        let inst = file.into_instance().map_err(InstanceError::Invalid)?;
        inst.validate().map_err(InstanceError::Invalid)?;
        Ok(inst)
    }

    pub fn to_json(&self) -> String {
        self.to_json_with_seed(None)
    }

    /// Pretty JSON; `seed` is recorded for generated corpora.
    pub fn to_json_with_seed(&self, seed: Option<u64>) -> String {
        let mut out = serde_json::to_string_pretty(&InstanceFile::from_instance(self, seed))
            .expect("instance serializes");
        out.push('\n');
        out
    }
}

// ---------------------------------------------------------------------------
// File format

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageFile {
    vertices: Vec<String>,
    edges: Vec<(String, String)>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    prob: String,
    vertices: Vec<String>,
    edges: Vec<(String, String)>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum LambdaFile {
    Shared(BTreeMap<String, String>),
    PerTransition(Vec<BTreeMap<String, String>>),
}

impl Default for LambdaFile {
    fn default() -> Self {
        LambdaFile::Shared(BTreeMap::new())
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    left: Vec<String>,
    right: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stage0: Option<StageFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scenarios: Option<Vec<ScenarioFile>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stages: Option<Vec<StageFile>>,
    #[serde(default)]
    lambda: LambdaFile,
    mode: String,
}

fn parse_lambda(location: &str, raw: &BTreeMap<String, String>, out: &mut Vec<Violation>) -> BTreeMap<String, Rational> {
    let mut lam = BTreeMap::new();
    for (v, text) in raw {
        match rat_of_string(text) {
            Ok(r) => {
                lam.insert(v.clone(), r);
            }
            Err(e) => out.push(Violation::Fraction {
                location: format!("{location}.{v}"),
                message: e.to_string(),
            }),
        }
    }
    lam
}

fn build_graph(
    location: &str,
    sides: &BTreeMap<String, Side>,
    vertices: &[String],
    edges: &[(String, String)],
    out: &mut Vec<Violation>,
) -> BipartiteGraph {
    let mut g = BipartiteGraph::new();
    for v in vertices {
        match sides.get(v) {
            Some(&side) => {
                if let Err(error) = g.add_vertex(v.clone(), side) {
                    out.push(Violation::Graph {
                        location: format!("{location}.vertices"),
                        error,
                    });
                }
            }
            None => out.push(Violation::MissingSide(v.clone())),
        }
    }
    for (u, v) in edges {
        if let Err(error) = g.add_edge(u.clone(), v.clone()) {
            out.push(Violation::Graph {
                location: format!("{location}.edges"),
                error,
            });
        }
    }
    g
}

impl InstanceFile {
    fn into_instance(self) -> Result<Instance, Vec<Violation>> {
        let mut out = Vec::new();
        let mut sides = BTreeMap::new();
        for v in &self.left {
            sides.insert(v.clone(), Side::Left);
        }
        for v in &self.right {
            if sides.insert(v.clone(), Side::Right).is_some() {
                out.push(Violation::BothSides(v.clone()));
            }
        }
        let mode = match self.mode.parse::<Mode>() {
            Ok(m) => Some(m),
            Err(_) => {
                out.push(Violation::UnknownMode(self.mode.clone()));
                None
            }
        };
        let inst = match self.kind.as_str() {
            "two-stage" => {
                if self.stages.is_some() {
                    out.push(Violation::UnexpectedKey("stages"));
                }
                let g0 = match &self.stage0 {
                    Some(st) => build_graph("stage0", &sides, &st.vertices, &st.edges, &mut out),
                    None => {
                        out.push(Violation::MissingKey("stage0"));
                        BipartiteGraph::new()
                    }
                };
                let mut scenarios = Vec::new();
                match &self.scenarios {
                    None => out.push(Violation::MissingKey("scenarios")),
                    Some(list) => {
                        for (i, s) in list.iter().enumerate() {
                            let loc = format!("scenarios[{i}]");
                            let graph = build_graph(&loc, &sides, &s.vertices, &s.edges, &mut out);
                            let prob = match rat_of_string(&s.prob) {
                                Ok(p) => p,
                                Err(e) => {
                                    out.push(Violation::Fraction {
                                        location: format!("{loc}.prob"),
                                        message: e.to_string(),
                                    });
                                    Rational::zero()
                                }
                            };
                            scenarios.push(Scenario {
                                name: s.name.clone().unwrap_or_else(|| format!("S{}", i + 1)),
                                prob,
                                graph,
                            });
                        }
                    }
                }
                let lambda = match &self.lambda {
                    LambdaFile::Shared(m) => parse_lambda("lambda", m, &mut out),
                    LambdaFile::PerTransition(_) => {
                        out.push(Violation::SizeMismatch {
                            location: "lambda".into(),
                            message: "two-stage lambda must be a single map".into(),
                        });
                        BTreeMap::new()
                    }
                };
                mode.map(|mode| {
                    Instance::TwoStage(TwoStageInstance {
                        g0,
                        scenarios,
                        lambda,
                        mode,
                    })
                })
            }
            "multistage" => {
                if self.stage0.is_some() {
                    out.push(Violation::UnexpectedKey("stage0"));
                }
                if self.scenarios.is_some() {
                    out.push(Violation::UnexpectedKey("scenarios"));
                }
                let stages: Vec<BipartiteGraph> = match &self.stages {
                    Some(list) => list
                        .iter()
                        .enumerate()
                        .map(|(i, st)| build_graph(&format!("stages[{i}]"), &sides, &st.vertices, &st.edges, &mut out))
                        .collect(),
                    None => {
                        out.push(Violation::MissingKey("stages"));
                        Vec::new()
                    }
                };
                let transitions = stages.len().saturating_sub(1);
                let lambda = match &self.lambda {
                    // One map for every transition, restricted to the shared vertices.
                    LambdaFile::Shared(m) => {
                        let all = parse_lambda("lambda", m, &mut out);
                        for v in all.keys() {
                            if !stages.iter().any(|g| g.contains(v)) {
                                out.push(Violation::LambdaUnknownVertex {
                                    location: format!("lambda.{v}"),
                                    vertex: v.clone(),
                                });
                            }
                        }
                        (0..transitions)
                            .map(|i| {
                                all.iter()
                                    .filter(|(v, _)| stages[i].contains(v) && stages[i + 1].contains(v))
                                    .map(|(v, w)| (v.clone(), w.clone()))
                                    .collect()
                            })
                            .collect()
                    }
                    LambdaFile::PerTransition(maps) => maps
                        .iter()
                        .enumerate()
                        .map(|(i, m)| parse_lambda(&format!("lambda[{i}]"), m, &mut out))
                        .collect(),
                };
                mode.map(|mode| Instance::Multistage(MultistageInstance { stages, lambda, mode }))
            }
            other => {
                out.push(Violation::UnknownKind(other.to_string()));
                None
            }
        };
        match inst {
            Some(inst) if out.is_empty() => Ok(inst),
            _ => Err(out),
        }
    }

    fn from_instance(inst: &Instance, seed: Option<u64>) -> InstanceFile {
        let graphs: Vec<&BipartiteGraph> = match inst {
            Instance::TwoStage(t) => std::iter::once(&t.g0).chain(t.scenarios.iter().map(|s| &s.graph)).collect(),
            Instance::Multistage(m) => m.stages.iter().collect(),
        };
        let mut left = BTreeSet::new();
        let mut right = BTreeSet::new();
        for g in &graphs {
            for (v, side) in g.sides() {
                match side {
                    Side::Left => left.insert(v.clone()),
                    Side::Right => right.insert(v.clone()),
                };
            }
        }
        let stage_file = |g: &BipartiteGraph| StageFile {
            vertices: g.vertices().map(str::to_string).collect(),
            edges: g.edges().map(|(l, r)| (l.to_string(), r.to_string())).collect(),
        };
        let fractions =
            |m: &BTreeMap<String, Rational>| m.iter().map(|(k, v)| (k.clone(), format_ratio(v))).collect();
        match inst {
            Instance::TwoStage(t) => InstanceFile {
                kind: "two-stage".into(),
                seed,
                left: left.into_iter().collect(),
                right: right.into_iter().collect(),
                stage0: Some(stage_file(&t.g0)),
                scenarios: Some(
                    t.scenarios
                        .iter()
                        .map(|s| {
                            let st = stage_file(&s.graph);
                            ScenarioFile {
                                name: Some(s.name.clone()),
                                prob: format_ratio(&s.prob),
                                vertices: st.vertices,
                                edges: st.edges,
                            }
                        })
                        .collect(),
                ),
                stages: None,
                lambda: LambdaFile::Shared(fractions(&t.lambda)),
                mode: t.mode.as_str().into(),
            },
            Instance::Multistage(m) => InstanceFile {
                kind: "multistage".into(),
                seed,
                left: left.into_iter().collect(),
                right: right.into_iter().collect(),
                stage0: None,
                scenarios: None,
                stages: Some(m.stages.iter().map(stage_file).collect()),
                lambda: LambdaFile::PerTransition(m.lambda.iter().map(fractions).collect()),
                mode: m.mode.as_str().into(),
            },
        }
    }
}

// ---------------------------------------------------------------------------
// Generators

/// Parameters of [`gen_random`] and [`gen_random_multistage`].
#[derive(Debug, Clone)]
pub struct RandomParams {
    pub left: usize,
    pub right: usize,
    /// Edge probability in `[0, 1]`.
    pub density: f64,
    /// Scenario count (two-stage) or stage count (multistage).
    pub count: usize,
    pub mode: Mode,
    pub seed: u64,
}

/// Random stream number `index` derived from `seed`.
///
/// `seed_from_u64` expands its argument through SplitMix64, so offsetting by
/// the golden-ratio increment gives well-separated states.
pub fn stream_rng(seed: u64, index: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

fn random_lambda(rng: &mut impl Rng) -> Rational {
    match rng.random_range(0..4) {
        0 => Rational::zero(),
        1 => rat(1, 2),
        2 => int(1),
        _ => int(2),
    }
}

fn random_edges(rng: &mut impl Rng, g: &mut BipartiteGraph, density: f64) {
    let left: Vec<String> = g.vertices_on(Side::Left).map(str::to_string).collect();
    let right: Vec<String> = g.vertices_on(Side::Right).map(str::to_string).collect();
    for l in &left {
        for r in &right {
            if rng.random_bool(density) {
                g.add_edge(l.clone(), r.clone()).expect("fresh edge between opposite sides");
            }
        }
    }
}

fn name(side: Side, i: usize) -> String {
    match side {
        Side::Left => format!("l{i}"),
        Side::Right => format!("r{i}"),
    }
}

/// Random two-stage instance; identical parameters give identical output.
///
/// Scenario graphs keep each first-stage vertex with probability 3/4, may add
/// one new player per side, and draw their own edges at the same density.
pub fn gen_random(p: &RandomParams) -> TwoStageInstance {
    let density = p.density.clamp(0.0, 1.0);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(p.seed);
    let mut g0 = BipartiteGraph::new();
    for i in 0..p.left {
        g0.add_vertex(name(Side::Left, i), Side::Left).unwrap();
    }
    for i in 0..p.right {
        g0.add_vertex(name(Side::Right, i), Side::Right).unwrap();
    }
    random_edges(&mut rng, &mut g0, density);
    let count = p.count.max(1);
    let weights: Vec<i64> = (0..count).map(|_| rng.random_range(1..=4)).collect();
    let total: i64 = weights.iter().sum();
    let mut scenarios = Vec::with_capacity(count);
    for (i, w) in weights.iter().enumerate() {
        let mut g = BipartiteGraph::new();
        for (v, side) in g0.sides() {
            if rng.random_bool(0.75) {
                g.add_vertex(v.clone(), *side).unwrap();
            }
        }
        if rng.random_bool(0.5) {
            g.add_vertex(name(Side::Left, p.left + i), Side::Left).unwrap();
        }
        if rng.random_bool(0.5) {
            g.add_vertex(name(Side::Right, p.right + i), Side::Right).unwrap();
        }
        random_edges(&mut rng, &mut g, density);
        scenarios.push(Scenario {
            name: format!("S{}", i + 1),
            prob: rat(*w, total),
            graph: g,
        });
    }
    let lambda = g0.vertices().map(|v| (v.to_string(), random_lambda(&mut rng))).collect();
    TwoStageInstance {
        g0,
        scenarios,
        lambda,
        mode: p.mode,
    }
}

/// Random multistage instance over a common vertex pool with fixed sides.
pub fn gen_random_multistage(p: &RandomParams) -> MultistageInstance {
    let density = p.density.clamp(0.0, 1.0);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(p.seed);
    let k = p.count.max(2);
    let mut stages = Vec::with_capacity(k);
    for _ in 0..k {
        let mut g = BipartiteGraph::new();
        for i in 0..p.left {
            if rng.random_bool(0.8) {
                g.add_vertex(name(Side::Left, i), Side::Left).unwrap();
            }
        }
        for i in 0..p.right {
            if rng.random_bool(0.8) {
                g.add_vertex(name(Side::Right, i), Side::Right).unwrap();
            }
        }
        random_edges(&mut rng, &mut g, density);
        stages.push(g);
    }
    let lambda = (0..k - 1)
        .map(|i| {
            stages[i]
                .vertices()
                .filter(|v| stages[i + 1].contains(v))
                .map(|v| (v.to_string(), random_lambda(&mut rng)))
                .collect::<Vec<_>>()
                .into_iter()
                .collect()
        })
        .collect();
    MultistageInstance {
        stages,
        lambda,
        mode: p.mode,
    }
}

// ---------------------------------------------------------------------------
// Samplers

/// Oracle access to a second-stage distribution.
///
/// Samplers are immutable and shared between workers; randomness comes from
/// the caller's stream, so independent streams give independent draws.
pub trait ScenarioSampler: Send + Sync {
    fn draw(&self, rng: &mut dyn RngCore) -> BipartiteGraph;
}

/// Always returns the same graph.
#[derive(Debug, Clone)]
pub struct PointMass(pub BipartiteGraph);

impl ScenarioSampler for PointMass {
    fn draw(&self, _rng: &mut dyn RngCore) -> BipartiteGraph {
        self.0.clone()
    }
}

#[derive(Debug, Error)]
#[error("probability denominators too large to sample exactly (common denominator {0})")]
pub struct SamplerError(String);

/// Samples the scenario list of an explicit instance, exactly in proportion
/// to the rational probabilities.
#[derive(Debug, Clone)]
pub struct ExplicitSampler {
    graphs: Vec<BipartiteGraph>,
    /// Cumulative numerators over the common denominator.
    cumulative: Vec<u64>,
    denominator: u64,
}

impl ExplicitSampler {
    pub fn new(inst: &TwoStageInstance) -> Result<Self, SamplerError> {
        let probs: Vec<Rational> = inst.scenarios.iter().map(|s| s.prob.clone()).collect();
        let den = common_denominator(&probs);
        let denominator = den.to_u64().ok_or_else(|| SamplerError(den.to_string()))?;
        let mut acc = 0u64;
        let mut cumulative = Vec::with_capacity(probs.len());
        for p in &probs {
            let scaled = (p * Rational::from_integer(den.clone())).to_integer();
            acc += scaled.to_u64().expect("scaled probability fits the denominator");
            cumulative.push(acc);
        }
        Ok(Self {
            graphs: inst.scenarios.iter().map(|s| s.graph.clone()).collect(),
            cumulative,
            denominator,
        })
    }
}

impl ScenarioSampler for ExplicitSampler {
    fn draw(&self, rng: &mut dyn RngCore) -> BipartiteGraph {
        let u = rng.random_range(0..self.denominator);
        let idx = self.cumulative.partition_point(|&c| c <= u);
        self.graphs[idx].clone()
    }
}
