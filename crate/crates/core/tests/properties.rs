use std::collections::BTreeMap;

use num_traits::Zero;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use sag_core::corpus::random_bipartite_graph;
use sag_core::graph::{is_core, matching_number, min_vertex_cover, weighted_min_vertex_cover, Allocation, BipartiteGraph, Side};
use sag_core::instance::hardness::SimpleGraph;
use sag_core::instance::{build_hardness_instance, gen_random, gen_random_multistage, Instance, Mode, RandomParams};
use sag_core::numeric::int;
use sag_core::reduce::{
    build_aux_graph, check_dual_feasible, cut_to_dual, dual_objective, epsilon, is_normalized, normalize_dual,
    objective_from_two_stage, run_flow, LayeredModel,
};
use sag_core::solver::{
    brute_force_multistage, brute_force_two_stage, evaluate_first_stage, solve_multistage, solve_mvc, solve_two_stage,
};
use sag_core::Rational;

/// Covering subsets of `g` as bitmasks over `g.vertices()` order.
fn covering_masks(g: &BipartiteGraph) -> Vec<u32> {
    let vs: Vec<&str> = g.vertices().collect();
    let edges: Vec<u32> = g
        .edges()
        .map(|(u, v)| {
            let i = vs.iter().position(|x| *x == u).unwrap();
            let j = vs.iter().position(|x| *x == v).unwrap();
            1 << i | 1 << j
        })
        .collect();
    (0u32..1 << vs.len()).filter(|m| edges.iter().all(|e| m & e != 0)).collect()
}

fn mask_allocation(g: &BipartiteGraph, m: u32) -> Allocation {
    let vs: Vec<&str> = g.vertices().collect();
    Allocation::indicator(g, (0..vs.len()).filter(|i| m >> i & 1 == 1).map(|i| vs[i]))
}

fn graph_strategy(max: usize) -> impl Strategy<Value = BipartiteGraph> {
    (any::<u64>(), 0.0f64..=1.0).prop_map(move |(seed, d)| {
        random_bipartite_graph(&mut Xoshiro256PlusPlus::seed_from_u64(seed), max, d)
    })
}

fn params() -> impl Strategy<Value = RandomParams> {
    (1usize..=4, 1usize..=4, 0.1f64..0.9, 1usize..=3, 0usize..3, any::<u64>()).prop_map(|(l, r, d, c, m, seed)| {
        RandomParams {
            left: l,
            right: r,
            density: d,
            count: c,
            mode: [Mode::Abs, Mode::Pos, Mode::Neg][m],
            seed,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn koenig_on_random_graphs(g in graph_strategy(12)) {
        let cover = min_vertex_cover(&g);
        let smallest = covering_masks(&g).iter().map(|m| m.count_ones() as usize).min().unwrap();
        prop_assert_eq!(matching_number(&g), smallest);
        prop_assert_eq!(cover.len(), smallest);
        let y: Allocation = Allocation::indicator(&g, cover.iter().map(String::as_str));
        prop_assert!(is_core(&g, &y));
    }

    #[test]
    fn weighted_cover_is_cheapest_minimum_cover(g in graph_strategy(9), ws in proptest::collection::vec(-3i64..=3, 9)) {
        let alpha: BTreeMap<String, Rational> = g.vertices().zip(&ws).map(|(v, w)| (v.to_string(), int(*w))).collect();
        let y = weighted_min_vertex_cover(&g, &alpha);
        let nu = matching_number(&g);
        prop_assert!(y.is_zero_one() && is_core(&g, &y));
        let cost = |a: &Allocation| -> Rational { a.iter().map(|(v, x)| x * alpha.get(v).cloned().unwrap_or_else(Rational::zero)).sum() };
        let best = covering_masks(&g)
            .into_iter()
            .filter(|m| m.count_ones() as usize == nu)
            .map(|m| cost(&mask_allocation(&g, m)))
            .min()
            .unwrap();
        prop_assert_eq!(cost(&y), best);
    }

    #[test]
    fn two_stage_solutions_are_integral_and_optimal(p in params()) {
        let inst = gen_random(&p);
        let sol = solve_two_stage(&inst).unwrap();
        prop_assert!(sol.is_integral());
        let layers = std::iter::once(&inst.g0).chain(inst.scenarios.iter().map(|s| &s.graph));
        for (g, y) in layers.zip(&sol.allocations) {
            prop_assert!(is_core(g, y));
        }
        for (d, u) in sol.delta.iter().zip(&sol.up) {
            for (v, x) in d {
                prop_assert!((x * &u[v]).is_zero());
            }
        }
        let r = sol.reduce.as_ref().unwrap();
        prop_assert_eq!(&r.dual_objective, &Rational::new(r.max_flow.clone(), r.scale.clone()));
        prop_assert_eq!(&sol.objective, &brute_force_two_stage(&inst).unwrap().objective);
        prop_assert_eq!(evaluate_first_stage(sol.first_stage(), &inst).unwrap(), sol.objective);
    }

    #[test]
    fn multistage_matches_oracle(p in params(), k in 2usize..=4) {
        let inst = gen_random_multistage(&RandomParams { count: k, ..p });
        let sol = solve_multistage(&inst).unwrap();
        prop_assert!(sol.is_integral());
        for (g, y) in inst.stages.iter().zip(&sol.allocations) {
            prop_assert!(is_core(g, y));
        }
        prop_assert_eq!(sol.objective, brute_force_multistage(&inst).unwrap().objective);
    }

    #[test]
    fn mode_ordering_and_weight_scaling(p in params()) {
        let mut inst = gen_random(&p);
        let mut obj = BTreeMap::new();
        for mode in [Mode::Abs, Mode::Pos, Mode::Neg] {
            inst.mode = mode;
            obj.insert(mode.as_str(), solve_two_stage(&inst).unwrap().objective);
        }
        prop_assert!(obj["abs"] >= obj["pos"] && obj["abs"] >= obj["neg"]);
        inst.mode = Mode::Abs;
        for w in inst.lambda.values_mut() {
            *w *= int(3);
        }
        prop_assert_eq!(solve_two_stage(&inst).unwrap().objective, &obj["abs"] * int(3));
    }

    #[test]
    fn normalize_preserves_feasibility_and_objective(p in params()) {
        let inst = gen_random(&p);
        let model = LayeredModel::two_stage(&inst);
        let coeffs = objective_from_two_stage(&inst);
        let aux = build_aux_graph(&model, &coeffs, &epsilon(&coeffs)).unwrap();
        let (_, cut) = run_flow(&aux.network);
        let dual = cut_to_dual(&aux, &cut);
        let normal = normalize_dual(&aux, &dual);
        prop_assert!(check_dual_feasible(&aux, &normal).is_ok());
        prop_assert!(is_normalized(&aux, &normal));
        prop_assert_eq!(dual_objective(&aux, &normal), dual_objective(&aux, &dual));
    }

    #[test]
    fn mvc_covers_are_minimum_and_cost_is_optimal(seed in any::<u64>(), d in 0.2f64..0.8) {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let first = random_bipartite_graph(&mut rng, 6, d);
        let mut second = BipartiteGraph::new();
        for (v, s) in first.sides() {
            second.add_vertex(v.clone(), *s).unwrap();
        }
        let left: Vec<&str> = first.vertices_on(Side::Left).collect();
        let right: Vec<&str> = first.vertices_on(Side::Right).collect();
        for l in &left {
            for r in &right {
                if rng.random_bool(d) {
                    second.add_edge(*l, *r).unwrap();
                }
            }
        }
        let res = solve_mvc(&[first.clone(), second.clone()]).unwrap();
        for (g, c) in [&first, &second].into_iter().zip(&res.covers) {
            prop_assert!(sag_core::graph::is_vertex_cover(g, c.iter().map(String::as_str)));
            prop_assert_eq!(c.len(), matching_number(g));
        }
        // transition cost minimised independently over all pairs of minimum covers
        let minimum = |g: &BipartiteGraph| -> Vec<u32> {
            let nu = matching_number(g);
            covering_masks(g).into_iter().filter(|m| m.count_ones() as usize == nu).collect()
        };
        let best = minimum(&first)
            .iter()
            .flat_map(|a| minimum(&second).into_iter().map(move |b| (a ^ b).count_ones() as usize))
            .min()
            .unwrap();
        prop_assert_eq!(res.cost, best);
    }

    #[test]
    fn generated_instances_roundtrip(p in params(), multi in any::<bool>()) {
        let inst = if multi { Instance::Multistage(gen_random_multistage(&p)) } else { Instance::TwoStage(gen_random(&p)) };
        prop_assert!(inst.validate().is_ok());
        prop_assert_eq!(Instance::from_json(&inst.to_json()).unwrap(), inst);
    }

    #[test]
    fn hardness_instances_are_valid(edges in proptest::collection::btree_set((0usize..6, 0usize..6), 1..10)) {
        let pairs: Vec<(String, String)> = edges.into_iter().filter(|(a, b)| a != b).map(|(a, b)| (format!("v{a}"), format!("v{b}"))).collect();
        prop_assume!(!pairs.is_empty());
        let mut g = SimpleGraph::new();
        for (a, b) in &pairs {
            let _ = g.add_edge(a.clone(), b.clone());
        }
        let h = build_hardness_instance(&g).unwrap();
        let support = h.enumerate_support().unwrap();
        prop_assert_eq!(support.iter().map(|s| s.prob.clone()).sum::<Rational>(), int(1));
        prop_assert!(h.explicit_instance().unwrap().validate().is_ok());
    }
}
