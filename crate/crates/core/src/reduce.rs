//! Reduction of the layered core-allocation LP to a minimum cut.
//!
//! Both the two-stage and the multistage problem are a stack of bipartite
//! layers joined by links on shared vertices. Each link carries a penalty for
//! lowering (`beta`, dual variable δ) and raising (`b`, dual variable d) a
//! vertex's value between its two layers. The LP dual of a max flow in the
//! auxiliary network is exactly the perturbed allocation LP, so the canonical
//! minimum cut yields an integral optimum directly.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::flow::{check_flow, max_flow, min_cut, ArcRole, CutCertificate, FlowNetwork};
use crate::graph::{matching_number, Allocation, BipartiteGraph, Side};
use crate::instance::{Instance, Mode, MultistageInstance, TwoStageInstance};
use crate::numeric::{common_denominator, format_ratio};
use crate::Rational;

/// Shared vertices between layer `from` and the later layer `to`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Link {
    pub from: usize,
    pub to: usize,
    pub shared: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayeredModel {
    pub layers: Vec<BipartiteGraph>,
    /// Node-name superscript per layer; `None` leaves names bare.
    pub labels: Vec<Option<String>>,
    pub links: Vec<Link>,
}

impl LayeredModel {
    /// Layer 0 is `G0`, layer `i + 1` is scenario `i`, linked to layer 0.
    pub fn two_stage(inst: &TwoStageInstance) -> Self {
        let mut layers = vec![inst.g0.clone()];
        let mut labels = vec![None];
        let mut links = Vec::new();
        for (i, s) in inst.scenarios.iter().enumerate() {
            layers.push(s.graph.clone());
            labels.push(Some(s.name.clone()));
            links.push(Link {
                from: 0,
                to: i + 1,
                shared: inst.shared(i).into_iter().map(str::to_string).collect(),
            });
        }
        Self { layers, labels, links }
    }

    /// One layer per stage, linked `i -> i+1`.
    pub fn multistage(inst: &MultistageInstance) -> Self {
        let k = inst.stages.len();
        Self {
            layers: inst.stages.clone(),
            labels: (1..=k).map(|i| Some(i.to_string())).collect(),
            links: (0..k.saturating_sub(1))
                .map(|i| Link {
                    from: i,
                    to: i + 1,
                    shared: inst.shared(i).into_iter().map(str::to_string).collect(),
                })
                .collect(),
        }
    }

    pub fn single(g: &BipartiteGraph) -> Self {
        Self {
            layers: vec![g.clone()],
            labels: vec![None],
            links: Vec::new(),
        }
    }

    pub fn has_edges(&self) -> bool {
        self.layers.iter().any(|g| g.num_edges() > 0)
    }

    pub fn node_name(&self, layer: usize, v: &str) -> String {
        match &self.labels[layer] {
            None => v.to_string(),
            Some(l) => format!("{v}^{{{l}}}"),
        }
    }
}

/// Objective `sum alpha·y + sum beta·δ + b·d` over the layered model.
///
/// Missing entries are zero; `alpha` is indexed by layer, `beta` and `b` by
/// link.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ObjectiveCoefficients {
    pub alpha: Vec<BTreeMap<String, Rational>>,
    pub beta: Vec<BTreeMap<String, Rational>>,
    pub b: Vec<BTreeMap<String, Rational>>,
}

fn coeff(maps: &[BTreeMap<String, Rational>], idx: usize, v: &str) -> Rational {
    maps.get(idx).and_then(|m| m.get(v)).cloned().unwrap_or_else(Rational::zero)
}

fn link_coefficients(
    mode: Mode,
    weights: impl Iterator<Item = (String, Rational)>,
) -> (BTreeMap<String, Rational>, BTreeMap<String, Rational>) {
    let mut beta = BTreeMap::new();
    let mut b = BTreeMap::new();
    for (v, w) in weights {
        if w.is_zero() {
            continue;
        }
        if mode.charges_loss() {
            beta.insert(v.clone(), w.clone());
        }
        if mode.charges_gain() {
            b.insert(v, w);
        }
    }
    (beta, b)
}

pub fn objective_from_two_stage(inst: &TwoStageInstance) -> ObjectiveCoefficients {
    let mut c = ObjectiveCoefficients {
        alpha: vec![BTreeMap::new(); inst.scenarios.len() + 1],
        ..Default::default()
    };
    for (i, s) in inst.scenarios.iter().enumerate() {
        let weights = inst
            .shared(i)
            .into_iter()
            .map(|v| (v.to_string(), &s.prob * inst.lambda_of(v)));
        let (beta, b) = link_coefficients(inst.mode, weights);
        c.beta.push(beta);
        c.b.push(b);
    }
    c
}

pub fn objective_from_multistage(inst: &MultistageInstance) -> ObjectiveCoefficients {
    let mut c = ObjectiveCoefficients {
        alpha: vec![BTreeMap::new(); inst.stages.len()],
        ..Default::default()
    };
    for i in 0..inst.stages.len().saturating_sub(1) {
        let weights = inst
            .shared(i)
            .into_iter()
            .map(|v| (v.to_string(), inst.lambda_of(i, v)));
        let (beta, b) = link_coefficients(inst.mode, weights);
        c.beta.push(beta);
        c.b.push(b);
    }
    c
}

pub fn objective_from_instance(inst: &Instance) -> ObjectiveCoefficients {
    match inst {
        Instance::TwoStage(t) => objective_from_two_stage(t),
        Instance::Multistage(m) => objective_from_multistage(m),
    }
}

/// `1 / (1 + sum |alpha| + sum (beta + b))`.
pub fn epsilon(c: &ObjectiveCoefficients) -> Rational {
    let mut total = Rational::one();
    for m in &c.alpha {
        for w in m.values() {
            total += w.abs();
        }
    }
    for m in c.beta.iter().chain(&c.b) {
        for w in m.values() {
            total += w;
        }
    }
    total.recip()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReduceError {
    #[error("negative {kind} coefficient {value} at {vertex}")]
    NegativeCoefficient {
        kind: &'static str,
        vertex: String,
        value: String,
    },
    #[error("negative capacity {capacity} on the arc of {node}")]
    NegativeCapacity { node: String, capacity: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeInfo {
    pub layer: usize,
    pub vertex: String,
    pub side: Side,
}

/// The auxiliary network with integer capacities `D ·` (rational capacity).
#[derive(Debug, Clone)]
pub struct AuxGraph {
    pub network: FlowNetwork<BigInt>,
    /// `D`, the common denominator of all finite capacities.
    pub scale: BigInt,
    pub eps: Rational,
    nodes: Vec<BTreeMap<String, usize>>,
    info: Vec<Option<NodeInfo>>,
    /// The s- or t-arc of each vertex node (indexed by node).
    y_arc: Vec<Option<usize>>,
    /// Per link: vertex -> (δ arc, d arc).
    link_arcs: Vec<BTreeMap<String, (usize, usize)>>,
}

impl AuxGraph {
    pub fn node(&self, layer: usize, v: &str) -> Option<usize> {
        self.nodes.get(layer)?.get(v).copied()
    }

    pub fn info(&self, node: usize) -> Option<&NodeInfo> {
        self.info[node].as_ref()
    }

    /// Arc whose dual variable is `y` of `node`.
    pub fn y_arc(&self, node: usize) -> Option<usize> {
        self.y_arc[node]
    }

    /// `(δ arc, d arc)` of `v` on `link`.
    pub fn link_arcs(&self, link: usize, v: &str) -> Option<(usize, usize)> {
        self.link_arcs.get(link)?.get(v).copied()
    }

    pub fn num_nodes(&self) -> usize {
        self.network.num_nodes()
    }

    pub fn num_arcs(&self) -> usize {
        self.network.arcs().len()
    }

    /// Rational capacity of a finite arc (`None` for edge arcs).
    pub fn capacity(&self, arc: usize) -> Option<Rational> {
        let a = &self.network.arcs()[arc];
        (a.role != ArcRole::Edge).then(|| Rational::new(a.capacity.clone(), self.scale.clone()))
    }

    pub fn to_dot(&self) -> String {
        self.network.to_dot()
    }
}

pub fn build_aux_graph(
    model: &LayeredModel,
    coeffs: &ObjectiveCoefficients,
    eps: &Rational,
) -> Result<AuxGraph, ReduceError> {
    for (kind, maps) in [("beta", &coeffs.beta), ("b", &coeffs.b)] {
        for m in maps {
            if let Some((v, w)) = m.iter().find(|(_, w)| w.is_negative()) {
                return Err(ReduceError::NegativeCoefficient {
                    kind,
                    vertex: v.clone(),
                    value: format_ratio(w),
                });
            }
        }
    }
    let mut network = FlowNetwork::<BigInt>::new();
    let (s, t) = (network.source(), network.sink());
    let mut nodes = Vec::with_capacity(model.layers.len());
    let mut info = vec![None, None];
    let mut pending: Vec<(usize, usize, Rational, ArcRole)> = Vec::new();
    for (l, g) in model.layers.iter().enumerate() {
        let mut map = BTreeMap::new();
        for (v, &side) in g.sides() {
            let id = network.add_node(model.node_name(l, v));
            info.push(Some(NodeInfo {
                layer: l,
                vertex: v.clone(),
                side,
            }));
            map.insert(v.clone(), id);
            let cap = Rational::one() + eps * coeff(&coeffs.alpha, l, v);
            if cap.is_negative() {
                return Err(ReduceError::NegativeCapacity {
                    node: model.node_name(l, v),
                    capacity: format_ratio(&cap),
                });
            }
            match side {
                Side::Left => pending.push((s, id, cap, ArcRole::Source)),
                Side::Right => pending.push((id, t, cap, ArcRole::Sink)),
            }
        }
        nodes.push(map);
    }
    let mut link_slots = Vec::with_capacity(model.links.len());
    for (k, link) in model.links.iter().enumerate() {
        let mut slots = Vec::new();
        for v in &link.shared {
            let a = nodes[link.from][v];
            let b = nodes[link.to][v];
            let delta = eps * coeff(&coeffs.beta, k, v);
            let up = eps * coeff(&coeffs.b, k, v);
            let first = pending.len();
            match model.layers[link.from].side(v).expect("shared vertex in layer") {
                Side::Left => {
                    pending.push((b, a, delta, ArcRole::Delta));
                    pending.push((a, b, up, ArcRole::Up));
                }
                Side::Right => {
                    pending.push((a, b, delta, ArcRole::Delta));
                    pending.push((b, a, up, ArcRole::Up));
                }
            }
            slots.push((v.clone(), first));
        }
        link_slots.push(slots);
    }
    let caps: Vec<Rational> = pending.iter().map(|p| p.2.clone()).collect();
    let scale = common_denominator(&caps);
    let scale_r = Rational::from_integer(scale.clone());
    let mut finite_total = BigInt::zero();
    let mut y_arc = vec![None; network.num_nodes()];
    let mut pending_index = Vec::with_capacity(pending.len());
    for (tail, head, cap, role) in pending {
        let c = (cap * &scale_r).to_integer();
        finite_total += &c;
        let arc = network.add_arc(tail, head, c, role).expect("validated arc");
        match role {
            ArcRole::Source => y_arc[head] = Some(arc),
            ArcRole::Sink => y_arc[tail] = Some(arc),
            _ => {}
        }
        pending_index.push(arc);
    }
    // No minimum cut can afford an edge arc: the cut around s alone is cheaper.
    let unbounded = finite_total + BigInt::one();
    for (l, g) in model.layers.iter().enumerate() {
        for (u, v) in g.edges() {
            network
                .add_arc(nodes[l][u], nodes[l][v], unbounded.clone(), ArcRole::Edge)
                .expect("edge arc");
        }
    }
    let link_arcs = link_slots
        .into_iter()
        .map(|slots| {
            slots
                .into_iter()
                .map(|(v, first)| (v, (pending_index[first], pending_index[first + 1])))
                .collect()
        })
        .collect();
    Ok(AuxGraph {
        network,
        scale,
        eps: eps.clone(),
        nodes,
        info,
        y_arc,
        link_arcs,
    })
}

/// Max flow and canonical cut; uses `i64` arithmetic when every capacity sum
/// fits comfortably.
pub fn run_flow(net: &FlowNetwork<BigInt>) -> (BigInt, CutCertificate<BigInt>) {
    let total: BigInt = net.arcs().iter().map(|a| &a.capacity).sum();
    if total.bits() < 60 {
        let small = net.map_capacities(|c| c.to_i64().expect("capacity fits i64"));
        let f = max_flow(&small);
        debug_assert_eq!(check_flow(&small, &f), Ok(()));
        let cut = min_cut(&small, &f);
        let value = BigInt::from(f.value);
        let cut = CutCertificate {
            source_side: cut.source_side,
            value: BigInt::from(cut.value),
        };
        (value, cut)
    } else {
        let f = max_flow(net);
        debug_assert_eq!(check_flow(net, &f), Ok(()));
        let cut = min_cut(net, &f);
        (f.value, cut)
    }
}

/// Dual of the flow LP: a potential per node (`s` fixed to 1, `t` to 0) and
/// a value per arc. The arc value is `y` on s- and t-arcs, δ or d on link
/// arcs, and always 0 on edge arcs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualSolution {
    pub gamma: Vec<Rational>,
    pub arc_value: Vec<Rational>,
}

impl DualSolution {
    pub fn y(&self, aux: &AuxGraph, node: usize) -> &Rational {
        &self.arc_value[aux.y_arc(node).expect("vertex node")]
    }
}

/// Reads the integral dual off a canonical cut: potentials are the source-side
/// indicator, and each finite arc's variable is 1 iff it crosses the cut.
///
/// Panics if the result violates a dual constraint, which can only happen
/// when the cut crosses an edge arc.
pub fn cut_to_dual(aux: &AuxGraph, cut: &CutCertificate<BigInt>) -> DualSolution {
    let side = &cut.source_side;
    let gamma = side
        .iter()
        .map(|&b| if b { Rational::one() } else { Rational::zero() })
        .collect();
    let arc_value = aux
        .network
        .arcs()
        .iter()
        .map(|a| {
            if a.role != ArcRole::Edge && side[a.tail] && !side[a.head] {
                Rational::one()
            } else {
                Rational::zero()
            }
        })
        .collect();
    let dual = DualSolution { gamma, arc_value };
    if let Err(e) = check_dual_feasible(aux, &dual) {
        panic!("cut read-off is not dual feasible: {e}");
    }
    dual
}

/// Checks every dual constraint `gamma_head - gamma_tail + value >= 0`, the
/// fixed potentials of `s` and `t`, and the sign of each arc value.
pub fn check_dual_feasible(aux: &AuxGraph, dual: &DualSolution) -> Result<(), String> {
    let net = &aux.network;
    if dual.gamma.len() != net.num_nodes() || dual.arc_value.len() != net.arcs().len() {
        return Err("dual has the wrong shape".into());
    }
    if !dual.gamma[net.source()].is_one() || !dual.gamma[net.sink()].is_zero() {
        return Err("potentials of s and t must be 1 and 0".into());
    }
    for (i, a) in net.arcs().iter().enumerate() {
        let z = &dual.arc_value[i];
        if a.role == ArcRole::Edge && !z.is_zero() {
            return Err(format!("edge arc {}->{} carries a dual value", net.name(a.tail), net.name(a.head)));
        }
        if z.is_negative() {
            return Err(format!("negative dual value on {}->{}", net.name(a.tail), net.name(a.head)));
        }
        if (&dual.gamma[a.head] - &dual.gamma[a.tail] + z).is_negative() {
            return Err(format!("constraint of arc {}->{} violated", net.name(a.tail), net.name(a.head)));
        }
    }
    Ok(())
}

/// `sum capacity · value` in unscaled units.
pub fn dual_objective(aux: &AuxGraph, dual: &DualSolution) -> Rational {
    let mut total = Rational::zero();
    for (i, a) in aux.network.arcs().iter().enumerate() {
        if a.role != ArcRole::Edge && !dual.arc_value[i].is_zero() {
            total += Rational::from_integer(a.capacity.clone()) * &dual.arc_value[i];
        }
    }
    total / Rational::from_integer(aux.scale.clone())
}

fn normalized_at(aux: &AuxGraph, dual: &DualSolution, node: usize) -> bool {
    let y = dual.y(aux, node);
    match aux.info(node).expect("vertex node").side {
        Side::Left => (&dual.gamma[node] + y).is_one(),
        Side::Right => *y == dual.gamma[node],
    }
}

/// `gamma + y = 1` on Left nodes and `y = gamma` on Right nodes.
pub fn is_normalized(aux: &AuxGraph, dual: &DualSolution) -> bool {
    (2..aux.num_nodes()).all(|v| normalized_at(aux, dual, v))
}

/// Brings a feasible dual into normalized form without raising its objective.
///
/// A Left node with `gamma + y > 1` first gives up `y`; once `y = 0` its
/// potential is lowered together with every node tied to it by a tight
/// in-arc, by the largest step that keeps all constraints. Right nodes are
/// handled symmetrically (lower `y`, or raise a negative potential along
/// tight out-arcs). On an optimal dual the objective is unchanged.
pub fn normalize_dual(aux: &AuxGraph, dual: &DualSolution) -> DualSolution {
    let net = &aux.network;
    let n = net.num_nodes();
    let (s, t) = (net.source(), net.sink());
    let mut in_arcs = vec![Vec::new(); n];
    let mut out_arcs = vec![Vec::new(); n];
    for (i, a) in net.arcs().iter().enumerate() {
        in_arcs[a.head].push(i);
        out_arcs[a.tail].push(i);
    }
    let mut d = dual.clone();
    let slack = |d: &DualSolution, i: usize| {
        let a = &net.arcs()[i];
        &d.gamma[a.head] - &d.gamma[a.tail] + &d.arc_value[i]
    };
    let limit = 64 * (n + net.arcs().len()) + 64;
    for _ in 0..limit {
        let Some(v) = (2..n).find(|&v| !normalized_at(aux, &d, v)) else {
            return d;
        };
        let ya = aux.y_arc(v).expect("vertex node");
        let side = aux.info(v).expect("vertex node").side;
        match side {
            Side::Left => {
                let excess = &d.gamma[v] + &d.arc_value[ya] - Rational::one();
                if d.arc_value[ya].is_positive() {
                    let step = excess.min(d.arc_value[ya].clone());
                    d.arc_value[ya] -= step;
                    continue;
                }
                let mut members = vec![false; n];
                members[v] = true;
                let mut stack = vec![v];
                while let Some(x) = stack.pop() {
                    for &i in &in_arcs[x] {
                        let w = net.arcs()[i].tail;
                        if w != s && !members[w] && slack(&d, i).is_zero() {
                            members[w] = true;
                            stack.push(w);
                        }
                    }
                }
                let mut eta: Option<Rational> = None;
                let mut bound = |r: Rational| {
                    eta = Some(match eta.take() {
                        Some(e) if e <= r => e,
                        _ => r,
                    })
                };
                for x in (0..n).filter(|&x| members[x]) {
                    let yx = aux.y_arc(x).expect("closure stays on vertex nodes");
                    bound(&d.gamma[x] + &d.arc_value[yx] - Rational::one());
                    for &i in &in_arcs[x] {
                        let w = net.arcs()[i].tail;
                        if w != s && !members[w] {
                            bound(slack(&d, i));
                        }
                    }
                }
                let eta = eta.expect("closure is non-empty");
                assert!(eta.is_positive(), "normalization stalled at {}", net.name(v));
                for x in (0..n).filter(|&x| members[x]) {
                    d.gamma[x] -= &eta;
                }
            }
            Side::Right => {
                if !d.gamma[v].is_negative() {
                    d.arc_value[ya] = d.gamma[v].clone();
                    continue;
                }
                let mut members = vec![false; n];
                members[v] = true;
                let mut stack = vec![v];
                while let Some(x) = stack.pop() {
                    for &i in &out_arcs[x] {
                        let w = net.arcs()[i].head;
                        if w != t && !members[w] && slack(&d, i).is_zero() {
                            members[w] = true;
                            stack.push(w);
                        }
                    }
                }
                let mut eta: Option<Rational> = None;
                let mut bound = |r: Rational| {
                    eta = Some(match eta.take() {
                        Some(e) if e <= r => e,
                        _ => r,
                    })
                };
                for x in (0..n).filter(|&x| members[x]) {
                    let yx = aux.y_arc(x).expect("closure stays on vertex nodes");
                    bound(&d.arc_value[yx] - &d.gamma[x]);
                    for &i in &out_arcs[x] {
                        let w = net.arcs()[i].head;
                        if w != t && !members[w] {
                            bound(slack(&d, i));
                        }
                    }
                }
                let eta = eta.expect("closure is non-empty");
                assert!(eta.is_positive(), "normalization stalled at {}", net.name(v));
                for x in (0..n).filter(|&x| members[x]) {
                    d.gamma[x] += &eta;
                }
            }
        }
    }
    panic!("normalization did not finish within {limit} steps");
}

/// Primal solution recovered from a normalized dual.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lifted {
    /// One allocation per layer.
    pub allocations: Vec<Allocation>,
    /// δ per link: `[y_from - y_to]^+` at an integral optimum.
    pub delta: Vec<BTreeMap<String, Rational>>,
    /// d per link: `[y_to - y_from]^+` at an integral optimum.
    pub up: Vec<BTreeMap<String, Rational>>,
    /// `sum alpha·y + sum beta·δ + b·d`.
    pub cost: Rational,
}

/// Drops the potentials and reads `y`, δ and d off the arc values.
///
/// Panics unless every layer's allocation sums to its matching number.
pub fn lift_solution(
    aux: &AuxGraph,
    model: &LayeredModel,
    coeffs: &ObjectiveCoefficients,
    dual: &DualSolution,
) -> Lifted {
    debug_assert!(is_normalized(aux, dual));
    let mut cost = Rational::zero();
    let mut allocations = Vec::with_capacity(model.layers.len());
    for (l, g) in model.layers.iter().enumerate() {
        let values: BTreeMap<String, Rational> = g
            .vertices()
            .map(|v| {
                let node = aux.node(l, v).expect("layer vertex has a node");
                (v.to_string(), dual.y(aux, node).clone())
            })
            .collect();
        for (v, y) in &values {
            cost += coeff(&coeffs.alpha, l, v) * y;
        }
        let y = Allocation::new(values);
        let nu = Rational::from_integer(BigInt::from(matching_number(g)));
        assert_eq!(y.total(), nu, "layer {l} allocation does not sum to its matching number");
        allocations.push(y);
    }
    let mut delta = Vec::with_capacity(model.links.len());
    let mut up = Vec::with_capacity(model.links.len());
    for (k, link) in model.links.iter().enumerate() {
        let mut dm = BTreeMap::new();
        let mut um = BTreeMap::new();
        for v in &link.shared {
            let (da, ua) = aux.link_arcs(k, v).expect("link arcs exist");
            cost += coeff(&coeffs.beta, k, v) * &dual.arc_value[da] + coeff(&coeffs.b, k, v) * &dual.arc_value[ua];
            dm.insert(v.clone(), dual.arc_value[da].clone());
            um.insert(v.clone(), dual.arc_value[ua].clone());
        }
        delta.push(dm);
        up.push(um);
    }
    Lifted {
        allocations,
        delta,
        up,
        cost,
    }
}

/// Facts about one reduction run, for reports and cross-checks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReduceReport {
    #[serde(with = "crate::numeric::serde_fraction")]
    pub eps: Rational,
    #[serde(serialize_with = "display_string")]
    pub scale: BigInt,
    #[serde(serialize_with = "display_string")]
    pub max_flow: BigInt,
    #[serde(with = "crate::numeric::serde_fraction")]
    pub dual_objective: Rational,
    /// Number of nodes on the source side of the cut, `s` included.
    pub cut_size: usize,
    pub nodes: usize,
    pub arcs: usize,
    /// No layer has an edge: the only core element is all zeros.
    pub flow_skipped: bool,
}

fn display_string<S: serde::Serializer>(v: &BigInt, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

#[derive(Debug, Clone)]
pub struct LayeredSolution {
    pub lifted: Lifted,
    pub report: ReduceReport,
    pub aux: AuxGraph,
}

/// Full pipeline on a layered model.
///
/// Panics if strong duality fails, which would indicate a bug.
pub fn solve_layered(model: &LayeredModel, coeffs: &ObjectiveCoefficients) -> Result<LayeredSolution, ReduceError> {
    let eps = epsilon(coeffs);
    let aux = build_aux_graph(model, coeffs, &eps)?;
    if !model.has_edges() {
        let allocations: Vec<Allocation> = model.layers.iter().map(Allocation::zeros).collect();
        let zero_maps = |link: &Link| link.shared.iter().map(|v| (v.clone(), Rational::zero())).collect();
        let lifted = Lifted {
            allocations,
            delta: model.links.iter().map(zero_maps).collect(),
            up: model.links.iter().map(zero_maps).collect(),
            cost: Rational::zero(),
        };
        let report = ReduceReport {
            eps,
            scale: aux.scale.clone(),
            max_flow: BigInt::zero(),
            dual_objective: Rational::zero(),
            cut_size: 0,
            nodes: aux.num_nodes(),
            arcs: aux.num_arcs(),
            flow_skipped: true,
        };
        return Ok(LayeredSolution { lifted, report, aux });
    }
    let (value, cut) = run_flow(&aux.network);
    let dual = cut_to_dual(&aux, &cut);
    let dual_value = dual_objective(&aux, &dual);
    let flow_value = Rational::new(value.clone(), aux.scale.clone());
    assert_eq!(dual_value, flow_value, "strong duality check failed");
    debug_assert!(is_normalized(&aux, &dual));
    let lifted = lift_solution(&aux, model, coeffs, &dual);
    let report = ReduceReport {
        eps,
        scale: aux.scale.clone(),
        max_flow: value,
        dual_objective: dual_value,
        cut_size: cut.source_side_size(),
        nodes: aux.num_nodes(),
        arcs: aux.num_arcs(),
        flow_skipped: false,
    };
    Ok(LayeredSolution { lifted, report, aux })
}

/// Minimum vertex cover of `g` minimizing `sum alpha` among minimum covers,
/// as a 0/1 allocation. Vertices absent from `alpha` weigh 0.
pub fn solve_single_layer(g: &BipartiteGraph, alpha: &BTreeMap<String, Rational>) -> Allocation {
    let coeffs = ObjectiveCoefficients {
        alpha: vec![alpha.iter().filter(|(v, _)| g.contains(v)).map(|(v, w)| (v.clone(), w.clone())).collect()],
        ..Default::default()
    };
    let sol = solve_layered(&LayeredModel::single(g), &coeffs).expect("single layer has no link coefficients");
    sol.lifted.allocations.into_iter().next().expect("one layer")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Scenario, TwoStageInstance};
    use crate::numeric::{int, rat};

    fn split_star(mode: Mode) -> TwoStageInstance {
        let g0 = BipartiteGraph::from_parts(
            [("a", Side::Left), ("b", Side::Right), ("c", Side::Right)],
            [("a", "b"), ("a", "c")],
        )
        .unwrap();
        let s1 = BipartiteGraph::from_parts([("a", Side::Left), ("b", Side::Right)], [("a", "b")]).unwrap();
        let s2 = BipartiteGraph::from_parts([("a", Side::Left), ("c", Side::Right)], [("a", "c")]).unwrap();
        TwoStageInstance {
            g0,
            scenarios: vec![
                Scenario { name: "S1".into(), prob: rat(1, 2), graph: s1 },
                Scenario { name: "S2".into(), prob: rat(1, 2), graph: s2 },
            ],
            lambda: ["a", "b", "c"].iter().map(|v| (v.to_string(), int(1))).collect(),
            mode,
        }
    }

    fn aux_of(inst: &TwoStageInstance) -> (LayeredModel, ObjectiveCoefficients, AuxGraph) {
        let model = LayeredModel::two_stage(inst);
        let c = objective_from_two_stage(inst);
        let aux = build_aux_graph(&model, &c, &epsilon(&c)).unwrap();
        (model, c, aux)
    }

    #[test]
    fn epsilon_examples() {
        assert_eq!(epsilon(&ObjectiveCoefficients::default()), int(1));
        assert_eq!(epsilon(&objective_from_two_stage(&split_star(Mode::Abs))), rat(1, 5));
        let c = ObjectiveCoefficients {
            alpha: vec![BTreeMap::from([("a".to_string(), int(-3))])],
            ..Default::default()
        };
        assert_eq!(epsilon(&c), rat(1, 4));
    }

    #[test]
    fn objective_coefficients_per_mode() {
        let abs = objective_from_two_stage(&split_star(Mode::Abs));
        assert_eq!(abs.beta[0]["a"], rat(1, 2));
        assert_eq!(abs.b[0]["a"], rat(1, 2));
        assert!(abs.alpha.iter().all(BTreeMap::is_empty));
        let pos = objective_from_two_stage(&split_star(Mode::Pos));
        assert!(pos.b.iter().all(BTreeMap::is_empty));
        assert_eq!(pos.beta[1]["c"], rat(1, 2));
        let neg = objective_from_two_stage(&split_star(Mode::Neg));
        assert!(neg.beta.iter().all(BTreeMap::is_empty));
        let mut zero = split_star(Mode::Abs);
        zero.lambda.clear();
        let c = objective_from_two_stage(&zero);
        assert_eq!(epsilon(&c), int(1));
    }

    #[test]
    fn split_star_network() {
        for mode in [Mode::Abs, Mode::Pos] {
            let (_, _, aux) = aux_of(&split_star(mode));
            assert_eq!(aux.num_nodes(), 9);
            assert_eq!(aux.num_arcs(), 19);
            let mut names: Vec<&str> = aux.network.node_names().iter().map(String::as_str).collect();
            names.sort_unstable();
            assert_eq!(names, ["a", "a^{S1}", "a^{S2}", "b", "b^{S1}", "c", "c^{S2}", "s", "t"]);
        }
        // s- and t-arcs carry 1 + eps·0 = 1, i.e. D after scaling
        let (_, _, aux) = aux_of(&split_star(Mode::Abs));
        assert_eq!(aux.scale, BigInt::from(10));
        for a in aux.network.arcs() {
            if matches!(a.role, ArcRole::Source | ArcRole::Sink) {
                assert_eq!(a.capacity, aux.scale);
            }
        }
    }

    #[test]
    fn no_shared_vertices_means_no_link_arcs() {
        let mut inst = split_star(Mode::Abs);
        inst.scenarios = vec![Scenario {
            name: "S1".into(),
            prob: int(1),
            graph: BipartiteGraph::from_parts([("x", Side::Left), ("y", Side::Right)], [("x", "y")]).unwrap(),
        }];
        let (_, _, aux) = aux_of(&inst);
        assert!(aux
            .network
            .arcs()
            .iter()
            .all(|a| !matches!(a.role, ArcRole::Delta | ArcRole::Up)));
    }

    fn brute_min_cut(net: &FlowNetwork<BigInt>) -> BigInt {
        let n = net.num_nodes();
        let inner: Vec<usize> = (0..n).filter(|&v| v != net.source() && v != net.sink()).collect();
        (0u32..1 << inner.len())
            .map(|mask| {
                let mut side = vec![false; n];
                side[net.source()] = true;
                for (i, &v) in inner.iter().enumerate() {
                    side[v] = mask >> i & 1 == 1;
                }
                net.cut_capacity(&side)
            })
            .min()
            .unwrap()
    }

    #[test]
    fn split_star_dual_value_and_solution() {
        let inst = split_star(Mode::Abs);
        let (model, c, aux) = aux_of(&inst);
        let (value, cut) = run_flow(&aux.network);
        assert_eq!(value, brute_min_cut(&aux.network));
        let dual = cut_to_dual(&aux, &cut);
        assert_eq!(dual_objective(&aux, &dual), int(3));
        assert_eq!(normalize_dual(&aux, &dual), dual);
        let lifted = lift_solution(&aux, &model, &c, &dual);
        let vals = |l: usize| -> Vec<(String, Rational)> {
            lifted.allocations[l].iter().map(|(v, y)| (v.to_string(), y.clone())).collect()
        };
        assert_eq!(vals(0), [("a".into(), int(1)), ("b".into(), int(0)), ("c".into(), int(0))]);
        assert_eq!(vals(1), [("a".into(), int(1)), ("b".into(), int(0))]);
        assert_eq!(vals(2), [("a".into(), int(1)), ("c".into(), int(0))]);
        assert!(lifted.cost.is_zero());
    }

    #[test]
    fn pos_mode_pays_for_lost_edge() {
        let g0 = BipartiteGraph::from_parts([("a", Side::Left), ("b", Side::Right)], [("a", "b")]).unwrap();
        let gs = BipartiteGraph::from_parts([("a", Side::Left), ("b", Side::Right)], std::iter::empty::<(&str, &str)>())
            .unwrap();
        let inst = TwoStageInstance {
            g0,
            scenarios: vec![Scenario { name: "S".into(), prob: int(1), graph: gs }],
            lambda: [("a".to_string(), int(1)), ("b".to_string(), int(1))].into(),
            mode: Mode::Pos,
        };
        let sol = solve_layered(&LayeredModel::two_stage(&inst), &objective_from_two_stage(&inst)).unwrap();
        assert_eq!(sol.lifted.cost, int(1));
    }

    #[test]
    fn single_edge_takes_left_endpoint() {
        let g = BipartiteGraph::from_parts([("l", Side::Left), ("r", Side::Right)], [("l", "r")]).unwrap();
        let y = solve_single_layer(&g, &BTreeMap::new());
        assert_eq!(y.get("l"), Some(&int(1)));
        assert_eq!(y.get("r"), Some(&int(0)));
    }

    #[test]
    fn source_only_cut_reads_left_ones() {
        let g = BipartiteGraph::from_parts(
            [("l1", Side::Left), ("l2", Side::Left), ("r", Side::Right)],
            [("l1", "r"), ("l2", "r")],
        )
        .unwrap();
        let model = LayeredModel::single(&g);
        let c = ObjectiveCoefficients::default();
        let aux = build_aux_graph(&model, &c, &int(1)).unwrap();
        let mut side = vec![false; aux.num_nodes()];
        side[aux.network.source()] = true;
        let cut = CutCertificate {
            value: aux.network.cut_capacity(&side),
            source_side: side,
        };
        let dual = cut_to_dual(&aux, &cut);
        for v in 2..aux.num_nodes() {
            let expect = match aux.info(v).unwrap().side {
                Side::Left => int(1),
                Side::Right => int(0),
            };
            assert_eq!(*dual.y(&aux, v), expect);
        }
    }

    #[test]
    fn rejects_negative_coefficients_and_capacities() {
        let inst = split_star(Mode::Abs);
        let model = LayeredModel::two_stage(&inst);
        let mut c = objective_from_two_stage(&inst);
        c.beta[0].insert("a".into(), int(-1));
        assert!(matches!(
            build_aux_graph(&model, &c, &rat(1, 5)),
            Err(ReduceError::NegativeCoefficient { .. })
        ));
        let c = ObjectiveCoefficients {
            alpha: vec![BTreeMap::from([("a".to_string(), int(-3))])],
            ..Default::default()
        };
        assert!(matches!(
            build_aux_graph(&model, &c, &int(1)),
            Err(ReduceError::NegativeCapacity { .. })
        ));
    }

    fn isolated_plus_edge() -> BipartiteGraph {
        BipartiteGraph::from_parts(
            [("x", Side::Left), ("l", Side::Left), ("r", Side::Right)],
            [("l", "r")],
        )
        .unwrap()
    }

    #[test]
    fn normalize_lowers_excess_potential() {
        let g = isolated_plus_edge();
        let model = LayeredModel::single(&g);
        let c = ObjectiveCoefficients::default();
        let aux = build_aux_graph(&model, &c, &int(1)).unwrap();
        let (_, cut) = run_flow(&aux.network);
        let mut dual = cut_to_dual(&aux, &cut);
        let x = aux.node(0, "x").unwrap();
        dual.gamma[x] = int(2);
        assert!(check_dual_feasible(&aux, &dual).is_ok());
        assert!(!is_normalized(&aux, &dual));
        let fixed = normalize_dual(&aux, &dual);
        assert_eq!(fixed.gamma[x], int(1));
        assert!(is_normalized(&aux, &fixed));
        assert_eq!(dual_objective(&aux, &fixed), dual_objective(&aux, &dual));
        assert_eq!(normalize_dual(&aux, &fixed), fixed);
    }

    #[test]
    fn normalize_lowers_tied_copies_together() {
        let a = BipartiteGraph::from_parts([("a", Side::Left)], std::iter::empty::<(&str, &str)>()).unwrap();
        let inst = TwoStageInstance {
            g0: a.clone(),
            scenarios: vec![Scenario { name: "S".into(), prob: int(1), graph: a }],
            lambda: [("a".to_string(), int(1))].into(),
            mode: Mode::Abs,
        };
        let (_, _, aux) = aux_of(&inst);
        let v = aux.node(0, "a").unwrap();
        let vs = aux.node(1, "a").unwrap();
        let mut gamma = vec![int(1), int(0), int(0), int(0)];
        gamma[v] = int(2);
        gamma[vs] = int(2);
        let dual = DualSolution {
            gamma,
            arc_value: vec![int(0); aux.num_arcs()],
        };
        assert!(check_dual_feasible(&aux, &dual).is_ok());
        let fixed = normalize_dual(&aux, &dual);
        assert_eq!(fixed.gamma[v], int(1));
        assert_eq!(fixed.gamma[vs], int(1));
        assert!(is_normalized(&aux, &fixed));
    }

    #[test]
    fn normalize_handles_right_side() {
        let g = isolated_plus_edge();
        let model = LayeredModel::single(&g);
        let c = ObjectiveCoefficients::default();
        let aux = build_aux_graph(&model, &c, &int(1)).unwrap();
        let (_, cut) = run_flow(&aux.network);
        let mut dual = cut_to_dual(&aux, &cut);
        let r = aux.node(0, "r").unwrap();
        let ya = aux.y_arc(r).unwrap();
        // r on the sink side with an inflated y
        dual.arc_value[ya] = rat(3, 2);
        let fixed = normalize_dual(&aux, &dual);
        assert!(is_normalized(&aux, &fixed));
        assert!(dual_objective(&aux, &fixed) <= dual_objective(&aux, &dual));
        assert!(check_dual_feasible(&aux, &fixed).is_ok());

        // negative potentials on both endpoints: r must be raised
        let l = aux.node(0, "l").unwrap();
        let mut dual = cut_to_dual(&aux, &cut);
        dual.gamma[l] = int(-1);
        dual.arc_value[aux.y_arc(l).unwrap()] = int(2);
        dual.gamma[r] = int(-1);
        dual.arc_value[ya] = int(0);
        assert!(check_dual_feasible(&aux, &dual).is_ok());
        let fixed = normalize_dual(&aux, &dual);
        assert_eq!(fixed.gamma[r], int(0));
        assert!(is_normalized(&aux, &fixed));
        assert!(check_dual_feasible(&aux, &fixed).is_ok());
        assert_eq!(dual_objective(&aux, &fixed), dual_objective(&aux, &dual));
    }

    #[test]
    fn degenerate_instance_skips_flow() {
        let g = BipartiteGraph::from_parts([("a", Side::Left), ("b", Side::Right)], std::iter::empty::<(&str, &str)>())
            .unwrap();
        let sol = solve_layered(&LayeredModel::single(&g), &ObjectiveCoefficients::default()).unwrap();
        assert!(sol.report.flow_skipped);
        assert!(sol.lifted.allocations[0].values().values().all(Zero::is_zero));
    }
}
