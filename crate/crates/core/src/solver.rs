//! Solver entry points, exhaustive oracles and the first-stage evaluator.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::graph::{is_core, matching_number, weighted_min_vertex_cover, Allocation, BipartiteGraph, Side};
use crate::instance::{Mode, MultistageInstance, TwoStageInstance, Violation};
use crate::numeric::format_ratio;
use crate::reduce::{
    objective_from_multistage, objective_from_two_stage, solve_layered, LayeredModel, ReduceError, ReduceReport,
};
use crate::Rational;

/// Largest first stage the two-stage oracle accepts.
pub const ORACLE_MAX_FIRST_STAGE: usize = 16;
/// Largest product of per-stage cover counts the chain oracle accepts.
pub const ORACLE_MAX_COVER_PRODUCT: u128 = 1_000_000;
/// Largest graph whose minimum covers are enumerated.
pub const MAX_ENUMERATED_VERTICES: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error("invalid instance: {}", .0.iter().map(|v| format!("{}: {v}", v.field())).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Reduce(#[from] ReduceError),
    #[error("{what} is {size}, above the limit {limit}")]
    TooLarge { what: &'static str, size: u128, limit: u128 },
    #[error("first-stage allocation is not a 0/1 core element")]
    NotCore,
    #[error("bipartition mismatch at {0}")]
    BipartitionMismatch(String),
    #[error("need at least 2 stages, found {0}")]
    TooFewStages(usize),
}

/// Optimal allocations of a two-stage or multistage instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveResult {
    /// Layer names: `"stage0"` then scenario names, or `"1"..="k"` for stages.
    pub labels: Vec<String>,
    /// One allocation per layer, in `labels` order.
    pub allocations: Vec<Allocation>,
    /// δ per scenario or transition, on shared vertices.
    pub delta: Vec<BTreeMap<String, Rational>>,
    /// d per scenario or transition, on shared vertices.
    pub up: Vec<BTreeMap<String, Rational>>,
    pub objective: Rational,
    /// Matching number of each layer.
    pub nu: Vec<usize>,
    /// Present for flow-based solves, absent for oracle results.
    pub reduce: Option<ReduceReport>,
    pub mode: Mode,
    pub multistage: bool,
}

impl SolveResult {
    pub fn first_stage(&self) -> &Allocation {
        &self.allocations[0]
    }

    pub fn per_scenario(&self) -> &[Allocation] {
        &self.allocations[1..]
    }

    pub fn is_integral(&self) -> bool {
        self.allocations.iter().all(Allocation::is_zero_one)
            && self
                .delta
                .iter()
                .chain(&self.up)
                .all(|m| m.values().all(crate::numeric::is_zero_one))
    }

    pub fn to_json(&self) -> Value {
        let alloc = |a: &Allocation| -> Value {
            Value::Object(a.iter().map(|(v, y)| (v.to_string(), json!(format_ratio(y)))).collect())
        };
        let fractions = |m: &BTreeMap<String, Rational>| -> Value {
            Value::Object(m.iter().map(|(v, y)| (v.clone(), json!(format_ratio(y)))).collect())
        };
        let mut out = Map::new();
        out.insert(
            "kind".into(),
            json!(if self.multistage { "multistage" } else { "two-stage" }),
        );
        out.insert("mode".into(), json!(self.mode.as_str()));
        out.insert("objective".into(), json!(format_ratio(&self.objective)));
        if self.multistage {
            let stages: Vec<Value> = self
                .allocations
                .iter()
                .zip(&self.labels)
                .map(|(a, l)| json!({ "stage": l, "allocation": alloc(a) }))
                .collect();
            out.insert("stages".into(), Value::Array(stages));
            let transitions: Vec<Value> = (0..self.delta.len())
                .map(|i| json!({ "from": self.labels[i], "to": self.labels[i + 1], "delta": fractions(&self.delta[i]), "d": fractions(&self.up[i]) }))
                .collect();
            out.insert("transitions".into(), Value::Array(transitions));
        } else {
            out.insert("first_stage".into(), alloc(&self.allocations[0]));
            let scenarios: Vec<Value> = (0..self.delta.len())
                .map(|i| {
                    json!({
                        "name": self.labels[i + 1],
                        "allocation": alloc(&self.allocations[i + 1]),
                        "delta": fractions(&self.delta[i]),
                        "d": fractions(&self.up[i]),
                    })
                })
                .collect();
            out.insert("scenarios".into(), Value::Array(scenarios));
        }
        let mut diag = Map::new();
        diag.insert("nu".into(), json!(self.nu));
        if let Some(r) = &self.reduce {
            if let Value::Object(m) = serde_json::to_value(r).expect("report serializes") {
                diag.extend(m);
            }
        }
        out.insert("diagnostics".into(), Value::Object(diag));
        Value::Object(out)
    }
}

/// Optimal integral solution of an explicit two-stage instance.
pub fn solve_two_stage(inst: &TwoStageInstance) -> Result<SolveResult, SolverError> {
    inst.validate().map_err(SolverError::Invalid)?;
    let model = LayeredModel::two_stage(inst);
    let coeffs = objective_from_two_stage(inst);
    let sol = solve_layered(&model, &coeffs)?;
    let objective = inst.objective_of(&sol.lifted.allocations[0], &sol.lifted.allocations[1..]);
    assert_eq!(objective, sol.lifted.cost, "mode objective disagrees with the LP cost");
    let mut labels = vec!["stage0".to_string()];
    labels.extend(inst.scenarios.iter().map(|s| s.name.clone()));
    Ok(SolveResult {
        labels,
        nu: model.layers.iter().map(matching_number).collect(),
        allocations: sol.lifted.allocations,
        delta: sol.lifted.delta,
        up: sol.lifted.up,
        objective,
        reduce: Some(sol.report),
        mode: inst.mode,
        multistage: false,
    })
}

/// Optimal integral per-stage core elements of a stage chain.
pub fn solve_multistage(inst: &MultistageInstance) -> Result<SolveResult, SolverError> {
    inst.validate().map_err(SolverError::Invalid)?;
    let model = LayeredModel::multistage(inst);
    let coeffs = objective_from_multistage(inst);
    let sol = solve_layered(&model, &coeffs)?;
    let objective = inst.objective_of(&sol.lifted.allocations);
    assert_eq!(objective, sol.lifted.cost, "mode objective disagrees with the LP cost");
    Ok(SolveResult {
        labels: (1..=inst.stages.len()).map(|i| i.to_string()).collect(),
        nu: model.layers.iter().map(matching_number).collect(),
        allocations: sol.lifted.allocations,
        delta: sol.lifted.delta,
        up: sol.lifted.up,
        objective,
        reduce: Some(sol.report),
        mode: inst.mode,
        multistage: true,
    })
}

/// Minimum vertex covers per stage with the fewest total changes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MvcResult {
    pub covers: Vec<BTreeSet<String>>,
    pub cost: usize,
}

fn mvc_instance(stages: &[BipartiteGraph]) -> Result<MultistageInstance, SolverError> {
    if stages.len() < 2 {
        return Err(SolverError::TooFewStages(stages.len()));
    }
    let mut sides: BTreeMap<&str, Side> = BTreeMap::new();
    for g in stages {
        for (v, &side) in g.sides() {
            if *sides.entry(v).or_insert(side) != side {
                return Err(SolverError::BipartitionMismatch(v.clone()));
            }
        }
    }
    let lambda = (0..stages.len() - 1)
        .map(|i| {
            stages[i]
                .vertices()
                .filter(|v| stages[i + 1].contains(v))
                .map(|v| (v.to_string(), Rational::from_integer(1.into())))
                .collect()
        })
        .collect();
    Ok(MultistageInstance {
        stages: stages.to_vec(),
        lambda,
        mode: Mode::Abs,
    })
}

fn objective_to_usize(r: &Rational) -> usize {
    assert!(r.is_integer(), "unit-weight cost is an integer");
    r.to_integer().to_usize().expect("cost fits usize")
}

/// Multistage vertex cover on stages sharing one bipartition: unit weights,
/// absolute differences.
pub fn solve_mvc(stages: &[BipartiteGraph]) -> Result<MvcResult, SolverError> {
    let inst = mvc_instance(stages)?;
    let res = solve_multistage(&inst)?;
    Ok(MvcResult {
        covers: res.allocations.iter().map(Allocation::support).collect(),
        cost: objective_to_usize(&res.objective),
    })
}

// ---------------------------------------------------------------------------
// Oracles

/// Every minimum vertex cover of `g`, as sorted vertex-name sets.
///
/// Branches on the first vertex with an uncovered edge: either it joins the
/// cover or all of its uncovered neighbours do. Branches exceeding the
/// matching number are cut.
pub fn min_vertex_covers(g: &BipartiteGraph) -> Vec<BTreeSet<String>> {
    let names: Vec<&str> = g.vertices().collect();
    assert!(names.len() <= MAX_ENUMERATED_VERTICES, "graph too large to enumerate covers");
    let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let mut adj = vec![0u64; names.len()];
    for (u, v) in g.edges() {
        adj[index[u]] |= 1 << index[v];
        adj[index[v]] |= 1 << index[u];
    }
    let nu = matching_number(g);
    let mut masks = Vec::new();
    cover_branch(&adj, 0, 0, nu, &mut masks);
    masks
        .into_iter()
        .map(|m| {
            (0..names.len())
                .filter(|i| m >> i & 1 == 1)
                .map(|i| names[i].to_string())
                .collect()
        })
        .collect()
}

fn cover_branch(adj: &[u64], chosen: u64, excluded: u64, budget: usize, out: &mut Vec<u64>) {
    let pick = (0..adj.len()).find(|&u| chosen >> u & 1 == 0 && adj[u] & !chosen != 0);
    let Some(u) = pick else {
        out.push(chosen);
        return;
    };
    if budget == 0 {
        return;
    }
    if excluded >> u & 1 == 0 {
        cover_branch(adj, chosen | 1 << u, excluded, budget - 1, out);
    }
    let need = adj[u] & !chosen;
    if need & excluded == 0 && (need.count_ones() as usize) <= budget {
        cover_branch(adj, chosen | need, excluded | 1 << u, budget - need.count_ones() as usize, out);
    }
}

fn cover_value(cover: &BTreeSet<String>, v: &str) -> Rational {
    Rational::from_integer(BigInt::from(cover.contains(v) as u8))
}

fn transition_cost(
    mode: Mode,
    shared: &[(String, Rational)],
    earlier: &BTreeSet<String>,
    later: &BTreeSet<String>,
) -> Rational {
    let mut total = Rational::zero();
    for (v, lam) in shared {
        let p = mode.penalty(&cover_value(earlier, v), &cover_value(later, v));
        if !p.is_zero() {
            total += lam * p;
        }
    }
    total
}

fn weighted_shared(vertices: Vec<&str>, lambda: impl Fn(&str) -> Rational) -> Vec<(String, Rational)> {
    vertices
        .into_iter()
        .map(|v| (v.to_string(), lambda(v)))
        .filter(|(_, w)| !w.is_zero())
        .collect()
}

/// Exact optimum by enumerating minimum vertex covers of every layer.
pub fn brute_force_two_stage(inst: &TwoStageInstance) -> Result<SolveResult, SolverError> {
    inst.validate().map_err(SolverError::Invalid)?;
    let n0 = inst.g0.num_vertices();
    if n0 > ORACLE_MAX_FIRST_STAGE {
        return Err(SolverError::TooLarge {
            what: "first-stage vertex count",
            size: n0 as u128,
            limit: ORACLE_MAX_FIRST_STAGE as u128,
        });
    }
    let first = min_vertex_covers(&inst.g0);
    let second: Vec<Vec<BTreeSet<String>>> = inst.scenarios.iter().map(|s| min_vertex_covers(&s.graph)).collect();
    let shared: Vec<Vec<(String, Rational)>> = (0..inst.scenarios.len())
        .map(|i| weighted_shared(inst.shared(i), |v| inst.lambda_of(v)))
        .collect();
    let mut best: Option<(Rational, usize, Vec<usize>)> = None;
    for (fi, y) in first.iter().enumerate() {
        let mut total = Rational::zero();
        let mut picks = Vec::with_capacity(second.len());
        for (si, covers) in second.iter().enumerate() {
            let (cost, pick) = covers
                .iter()
                .enumerate()
                .map(|(ci, c)| (transition_cost(inst.mode, &shared[si], y, c), ci))
                .min()
                .expect("every graph has a minimum cover");
            total += &inst.scenarios[si].prob * cost;
            picks.push(pick);
        }
        if best.as_ref().is_none_or(|(b, _, _)| total < *b) {
            best = Some((total, fi, picks));
        }
    }
    let (objective, fi, picks) = best.expect("first stage has a minimum cover");
    let mut allocations = vec![Allocation::indicator(&inst.g0, first[fi].iter().map(String::as_str))];
    for (si, s) in inst.scenarios.iter().enumerate() {
        allocations.push(Allocation::indicator(&s.graph, second[si][picks[si]].iter().map(String::as_str)));
    }
    let (delta, up) = deviations(
        (0..inst.scenarios.len()).map(|i| (inst.shared(i), &allocations[0], &allocations[i + 1])),
    );
    let mut labels = vec!["stage0".to_string()];
    labels.extend(inst.scenarios.iter().map(|s| s.name.clone()));
    let mut nu = vec![matching_number(&inst.g0)];
    nu.extend(inst.scenarios.iter().map(|s| matching_number(&s.graph)));
    Ok(SolveResult {
        labels,
        allocations,
        delta,
        up,
        objective,
        nu,
        reduce: None,
        mode: inst.mode,
        multistage: false,
    })
}

type DeviationMaps = (Vec<BTreeMap<String, Rational>>, Vec<BTreeMap<String, Rational>>);

fn deviations<'a>(
    pairs: impl Iterator<Item = (Vec<&'a str>, &'a Allocation, &'a Allocation)>,
) -> DeviationMaps {
    let mut delta = Vec::new();
    let mut up = Vec::new();
    for (shared, a, b) in pairs {
        let mut dm = BTreeMap::new();
        let mut um = BTreeMap::new();
        for v in shared {
            let (x, y) = (&a.values()[v], &b.values()[v]);
            dm.insert(v.to_string(), Mode::Pos.penalty(x, y));
            um.insert(v.to_string(), Mode::Neg.penalty(x, y));
        }
        delta.push(dm);
        up.push(um);
    }
    (delta, up)
}

/// Exact optimum of a stage chain by dynamic programming over per-stage
/// minimum-cover lists.
pub fn brute_force_multistage(inst: &MultistageInstance) -> Result<SolveResult, SolverError> {
    inst.validate().map_err(SolverError::Invalid)?;
    let covers: Vec<Vec<BTreeSet<String>>> = inst.stages.iter().map(min_vertex_covers).collect();
    let product = covers
        .iter()
        .try_fold(1u128, |acc, c| acc.checked_mul(c.len() as u128))
        .unwrap_or(u128::MAX);
    if product > ORACLE_MAX_COVER_PRODUCT {
        return Err(SolverError::TooLarge {
            what: "product of minimum-cover counts",
            size: product,
            limit: ORACLE_MAX_COVER_PRODUCT,
        });
    }
    let k = inst.stages.len();
    let shared: Vec<Vec<(String, Rational)>> = (0..k - 1)
        .map(|i| weighted_shared(inst.shared(i), |v| inst.lambda_of(i, v)))
        .collect();
    // best[i][c]: cheapest prefix ending in cover c of stage i; back-pointer
    let mut best: Vec<Vec<(Rational, usize)>> = vec![covers[0].iter().map(|_| (Rational::zero(), 0)).collect()];
    for i in 1..k {
        let row = covers[i]
            .iter()
            .map(|c| {
                covers[i - 1]
                    .iter()
                    .enumerate()
                    .map(|(pi, p)| (&best[i - 1][pi].0 + transition_cost(inst.mode, &shared[i - 1], p, c), pi))
                    .min()
                    .expect("every graph has a minimum cover")
            })
            .collect();
        best.push(row);
    }
    let (objective, mut ci) = best[k - 1]
        .iter()
        .enumerate()
        .map(|(ci, (cost, _))| (cost.clone(), ci))
        .min()
        .expect("every graph has a minimum cover");
    let mut chosen = vec![0; k];
    for i in (0..k).rev() {
        chosen[i] = ci;
        ci = best[i][ci].1;
    }
    let allocations: Vec<Allocation> = (0..k)
        .map(|i| Allocation::indicator(&inst.stages[i], covers[i][chosen[i]].iter().map(String::as_str)))
        .collect();
    let (delta, up) = deviations(
        (0..k - 1).map(|i| (inst.shared(i), &allocations[i], &allocations[i + 1])),
    );
    Ok(SolveResult {
        labels: (1..=k).map(|i| i.to_string()).collect(),
        nu: inst.stages.iter().map(matching_number).collect(),
        allocations,
        delta,
        up,
        objective,
        reduce: None,
        mode: inst.mode,
        multistage: true,
    })
}

/// Oracle counterpart of [`solve_mvc`].
pub fn brute_force_mvc(stages: &[BipartiteGraph]) -> Result<MvcResult, SolverError> {
    let inst = mvc_instance(stages)?;
    let res = brute_force_multistage(&inst)?;
    Ok(MvcResult {
        covers: res.allocations.iter().map(Allocation::support).collect(),
        cost: objective_to_usize(&res.objective),
    })
}

/// `val(y)`: expected optimal second-stage cost of a fixed 0/1 first stage.
///
/// For 0/1 `y` each scenario's penalty is affine in `y^S`, so the inner
/// minimum over the core is a weighted minimum vertex cover of `G_S`.
pub fn evaluate_first_stage(y: &Allocation, inst: &TwoStageInstance) -> Result<Rational, SolverError> {
    let matches_g0 = y.len() == inst.g0.num_vertices() && inst.g0.vertices().all(|v| y.get(v).is_some());
    if !matches_g0 || !y.is_zero_one() || !is_core(&inst.g0, y) {
        return Err(SolverError::NotCore);
    }
    let mut total = Rational::zero();
    for (i, s) in inst.scenarios.iter().enumerate() {
        let mut alpha = BTreeMap::new();
        for v in inst.shared(i) {
            let lam = inst.lambda_of(v);
            if lam.is_zero() {
                continue;
            }
            let chosen = !y.values()[v].is_zero();
            // coefficient of y^S_v in the penalty once y_v is fixed
            let a = match (inst.mode, chosen) {
                (Mode::Pos | Mode::Abs, true) => -lam,
                (Mode::Abs | Mode::Neg, false) => lam,
                (Mode::Pos, false) | (Mode::Neg, true) => continue,
            };
            alpha.insert(v.to_string(), a);
        }
        let ys = weighted_min_vertex_cover(&s.graph, &alpha);
        let mut inner = Rational::zero();
        for v in inst.shared(i) {
            inner += inst.lambda_of(v) * inst.mode.penalty(&y.values()[v], &ys.values()[v]);
        }
        total += &s.prob * inner;
    }
    Ok(total)
}
