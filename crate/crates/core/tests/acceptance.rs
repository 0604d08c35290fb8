//! Acceptance suite: eight criteria, one PASS/FAIL line each, exact arithmetic
//! throughout. Runs as a plain binary so the report is always printed.

use std::cell::Cell;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use sag_core::corpus::{all_bipartite_graphs, multistage_corpus, same_vertex_set_pairs, two_stage_corpus};
use sag_core::graph::{is_core, matching_number, min_vertex_cover, Allocation, BipartiteGraph, Side};
use sag_core::instance::hardness::{SimpleGraph, ALPHA, BETA1, BETA2};
use sag_core::instance::{build_hardness_instance, gen_random, Mode, MultistageInstance, RandomParams, Scenario, TwoStageInstance};
use sag_core::numeric::{int, rat};
use sag_core::saa::{count_vertex_covers, exact_expected_value, required_samples, run_trials, SaaConfig};
use sag_core::solver::{
    brute_force_multistage, brute_force_mvc, brute_force_two_stage, min_vertex_covers, solve_multistage, solve_mvc,
    solve_two_stage, SolveResult,
};
use sag_core::Rational;

/// Strong-duality checks performed across the whole suite.
struct Duality {
    checked: Cell<usize>,
    failed: Cell<usize>,
}

impl Duality {
    fn record(&self, sol: &SolveResult) {
        let r = sol.reduce.as_ref().expect("flow solves carry a report");
        self.checked.set(self.checked.get() + 1);
        if r.dual_objective != Rational::new(r.max_flow.clone(), r.scale.clone()) {
            self.failed.set(self.failed.get() + 1);
        }
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_two_stage(count: usize) -> Vec<TwoStageInstance> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(0xACCE);
    (0..count)
        .map(|i| {
            gen_random(&RandomParams {
                left: rng.random_range(1..=4),
                right: rng.random_range(1..=4),
                density: [0.25, 0.5, 0.75][i % 3],
                count: rng.random_range(1..=3),
                mode: [Mode::Abs, Mode::Pos, Mode::Neg][i % 3],
                seed: rng.random(),
            })
        })
        .collect()
}

struct Corpus {
    two_stage: Vec<TwoStageInstance>,
    multistage: Vec<MultistageInstance>,
}

fn criterion_corpus() -> Corpus {
    let mut two_stage = two_stage_corpus(5);
    two_stage.extend(random_two_stage(500));
    Corpus {
        two_stage,
        multistage: multistage_corpus(4, 3),
    }
}

fn integral(sol: &SolveResult) -> bool {
    sol.is_integral()
}

fn integrality(c: &Corpus, duality: &Duality) -> Outcome {
    let mut bad = 0usize;
    for inst in &c.two_stage {
        let sol = solve_two_stage(inst).expect("corpus instances are valid");
        duality.record(&sol);
        let layers = std::iter::once(&inst.g0).chain(inst.scenarios.iter().map(|s| &s.graph));
        let core = layers.zip(&sol.allocations).all(|(g, y)| is_core(g, y));
        if !integral(&sol) || !core {
            bad += 1;
        }
    }
    for inst in &c.multistage {
        let sol = solve_multistage(inst).expect("corpus instances are valid");
        duality.record(&sol);
        let core = inst.stages.iter().zip(&sol.allocations).all(|(g, y)| is_core(g, y));
        if !integral(&sol) || !core {
            bad += 1;
        }
    }
    outcome(
        bad == 0,
        format!(
            "{} two-stage + {} multistage solves, {bad} with a fractional or non-core coordinate",
            c.two_stage.len(),
            c.multistage.len()
        ),
    )
}

fn oracle_equivalence(c: &Corpus, duality: &Duality) -> Outcome {
    let mut mismatches = Vec::new();
    for (i, inst) in c.two_stage.iter().enumerate() {
        let sol = solve_two_stage(inst).unwrap();
        duality.record(&sol);
        if sol.objective != brute_force_two_stage(inst).unwrap().objective {
            mismatches.push(format!("two-stage #{i}"));
        }
    }
    for (i, inst) in c.multistage.iter().enumerate() {
        let sol = solve_multistage(inst).unwrap();
        duality.record(&sol);
        if sol.objective != brute_force_multistage(inst).unwrap().objective {
            mismatches.push(format!("multistage #{i}"));
        }
        if solve_mvc(&inst.stages).unwrap().cost != brute_force_mvc(&inst.stages).unwrap().cost {
            mismatches.push(format!("mvc #{i}"));
        }
    }
    outcome(
        mismatches.is_empty(),
        format!(
            "{} two-stage, {} multistage and {} mvc comparisons; mismatches: {:?}",
            c.two_stage.len(),
            c.multistage.len(),
            c.multistage.len(),
            mismatches.iter().take(5).collect::<Vec<_>>()
        ),
    )
}

fn koenig() -> Outcome {
    let graphs = all_bipartite_graphs(6);
    let bad = graphs
        .iter()
        .filter(|g| {
            let cover = min_vertex_cover(g);
            let y: Allocation = Allocation::indicator(g, cover.iter().map(String::as_str));
            matching_number(g) != cover.len() || !is_core(g, &y)
        })
        .count();
    outcome(bad == 0, format!("{} labelled graphs, {bad} failures", graphs.len()))
}

/// Fixed connected test graphs on 2..=8 vertices.
fn hardness_graphs() -> Vec<SimpleGraph> {
    let mut out = Vec::new();
    let names: Vec<String> = (0..8).map(|i| format!("v{i}")).collect();
    let n_ = |i: usize| names[i].as_str();
    for n in 2..=8usize {
        // path, star, cycle, complete (capped at 5 vertices)
        out.push(SimpleGraph::from_edges((1..n).map(|i| (n_(i - 1), n_(i)))).unwrap());
        if n >= 3 {
            out.push(SimpleGraph::from_edges((1..n).map(|i| (n_(0), n_(i)))).unwrap());
            out.push(SimpleGraph::from_edges((0..n).map(|i| (n_(i), n_((i + 1) % n)))).unwrap());
        }
        if (3..=5).contains(&n) {
            let k: Vec<(&str, &str)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| (n_(i), n_(j))).collect();
            out.push(SimpleGraph::from_edges(k).unwrap());
        }
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(0x4A2D);
    for n in 4..=8usize {
        for _ in 0..6 {
            // random spanning tree plus a few chords
            let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.random_range(0..i), i)).collect();
            for _ in 0..rng.random_range(0..=3) {
                let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
                if a != b && !edges.contains(&(a.min(b), a.max(b))) {
                    edges.push((a.min(b), a.max(b)));
                }
            }
            out.push(SimpleGraph::from_edges(edges.iter().map(|&(a, b)| (n_(a), n_(b)))).unwrap());
        }
    }
    out
}

fn hardness_identity(duality: &Duality) -> Outcome {
    let graphs = hardness_graphs();
    let mut failures = Vec::new();
    for (i, g) in graphs.iter().enumerate() {
        assert!(g.is_connected() && (2..=8).contains(&g.num_vertices()));
        let h = build_hardness_instance(g).unwrap();
        let explicit = h.explicit_instance().unwrap();
        let sol = solve_two_stage(&explicit).unwrap();
        duality.record(&sol);
        let y = sol.first_stage();
        let forced = |y: &Allocation| {
            y.get(ALPHA).is_some_and(One::is_one) && y.get(BETA1).is_some_and(Zero::is_zero) && y.get(BETA2).is_some_and(Zero::is_zero)
        };
        let all_forced = min_vertex_covers(&h.g0)
            .iter()
            .all(|c| forced(&Allocation::indicator(&h.g0, c.iter().map(String::as_str))));
        let value = exact_expected_value(y, &h).unwrap();
        let count = count_vertex_covers(g).unwrap();
        let scaled = value * Rational::from_integer((1u64 << g.num_vertices()).into());
        if !forced(y) || !all_forced || scaled != Rational::from_integer(count.into()) {
            failures.push(i);
        }
    }
    outcome(failures.is_empty(), format!("{} connected graphs, failing indices {failures:?}", graphs.len()))
}

fn saa_guarantee() -> Outcome {
    let base = SimpleGraph::from_edges([("u", "v")]).unwrap();
    let h = build_hardness_instance(&base).unwrap();
    let accuracy = rat(1, 4);
    let confidence = rat(1, 4);
    let lambda_sum: Rational = h.lambda.values().sum();
    let n = required_samples(&lambda_sum, h.g0.num_vertices(), &confidence, &accuracy).unwrap();
    let optimum = solve_two_stage(&h.explicit_instance().unwrap()).unwrap();
    let best = exact_expected_value(optimum.first_stage(), &h).unwrap();
    let seeds: Vec<u64> = (0..200).collect();
    let cfg = SaaConfig::bound(accuracy.clone(), confidence);
    let reports = run_trials(&h.g0, &h.lambda, &h.sampler(), &cfg, &seeds);
    let mut success = 0usize;
    for r in &reports {
        let r = r.as_ref().expect("trial runs");
        assert_eq!(num_bigint::BigInt::from(r.samples), n);
        if exact_expected_value(&r.y_hat, &h).unwrap() <= &best + &accuracy {
            success += 1;
        }
    }
    let fraction = success as f64 / reports.len() as f64;
    outcome(
        fraction >= 0.70,
        format!("N = {n}, val(y*) = {best}, {success}/{} trials within accuracy ({fraction:.3} >= 0.70)", reports.len()),
    )
}

/// Instances where a vertex isolated in the first stage becomes the forced
/// centre of a star in every scenario: its allocation can only rise.
fn rising_instances() -> Vec<TwoStageInstance> {
    let mut out = Vec::new();
    for k in 0..24usize {
        let hub_side = if k % 2 == 0 { Side::Left } else { Side::Right };
        let mut g0 = BipartiteGraph::new();
        g0.add_vertex("h", hub_side).unwrap();
        for i in 0..k % 3 {
            g0.add_vertex(format!("l{i}"), Side::Left).unwrap();
            g0.add_vertex(format!("r{i}"), Side::Right).unwrap();
            g0.add_edge(format!("l{i}"), format!("r{i}")).unwrap();
        }
        let scenario_count = 1 + k % 3;
        let mut scenarios = Vec::new();
        for s in 0..scenario_count {
            let mut g = g0.clone();
            for leaf in 0..2 + (k + s) % 2 {
                let name = format!("x{s}_{leaf}");
                g.add_vertex(name.clone(), hub_side.opposite()).unwrap();
                g.add_edge("h", name).unwrap();
            }
            scenarios.push(Scenario {
                name: format!("S{}", s + 1),
                prob: rat(1, scenario_count as i64),
                graph: g,
            });
        }
        let lambda = g0
            .vertices()
            .enumerate()
            .map(|(i, v)| (v.to_string(), int(1 + ((i + k) % 3) as i64)))
            .collect();
        out.push(TwoStageInstance {
            g0,
            scenarios,
            lambda,
            mode: Mode::Pos,
        });
    }
    out
}

fn mode_semantics(duality: &Duality) -> Outcome {
    let instances = rising_instances();
    let mut bad = 0usize;
    for base in &instances {
        let mut pos = base.clone();
        pos.mode = Mode::Pos;
        let mut abs = base.clone();
        abs.mode = Mode::Abs;
        let sp = solve_two_stage(&pos).unwrap();
        let sa = solve_two_stage(&abs).unwrap();
        duality.record(&sp);
        duality.record(&sa);
        let op = brute_force_two_stage(&pos).unwrap().objective;
        let oa = brute_force_two_stage(&abs).unwrap().objective;
        if !(sp.objective.is_zero() && op.is_zero() && sa.objective > Rational::zero() && sa.objective == oa) {
            bad += 1;
        }
    }
    outcome(bad == 0, format!("{} crafted instances, {bad} violations", instances.len()))
}

fn mvc_corollary() -> Outcome {
    let pairs = same_vertex_set_pairs(6);
    let mut bad = 0usize;
    for (a, b) in &pairs {
        let stages = [a.clone(), b.clone()];
        if solve_mvc(&stages).unwrap().cost != brute_force_mvc(&stages).unwrap().cost {
            bad += 1;
        }
    }
    outcome(bad == 0, format!("{} stage pairs up to relabelling, {bad} mismatches", pairs.len()))
}

fn main() -> ExitCode {
    let duality = Duality {
        checked: Cell::new(0),
        failed: Cell::new(0),
    };
    let started = Instant::now();
    let corpus = criterion_corpus();
    let corpus_time = started.elapsed();
    let mut results: Vec<(&str, Outcome, Duration, f64)> = Vec::new();
    let mut run = |name: &'static str, limit: f64, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        eprintln!("finished {name}");
        results.push((name, o, t.elapsed(), limit));
    };
    println!("corpus built in {:.1}s", corpus_time.as_secs_f64());
    run("1 integrality", 120.0, &mut || integrality(&corpus, &duality));
    run("2 oracle equivalence", 300.0, &mut || oracle_equivalence(&corpus, &duality));
    run("3 koenig and core", 60.0, &mut koenig);
    run("4 hardness identity", 180.0, &mut || hardness_identity(&duality));
    run("6 saa guarantee", 600.0, &mut saa_guarantee);
    run("7 mode semantics", f64::INFINITY, &mut || mode_semantics(&duality));
    run("8 mvc corollary", 120.0, &mut mvc_corollary);
    // every solve above fed the duality tally
    run("5 strong duality", f64::INFINITY, &mut || {
        outcome(
            duality.failed.get() == 0 && duality.checked.get() > 0,
            format!("{} solves checked, {} failures", duality.checked.get(), duality.failed.get()),
        )
    });
    results.sort_by_key(|r| r.0);
    let mut all = true;
    for (name, o, t, limit) in &results {
        let in_time = t.as_secs_f64() <= *limit;
        let pass = o.pass && in_time;
        all &= pass;
        println!(
            "[{}] {name} ({:.1}s{}): {}",
            if pass { "PASS" } else { "FAIL" },
            t.as_secs_f64(),
            if in_time { String::new() } else { format!(", over the {limit}s budget") },
            o.detail
        );
    }
    println!(
        "acceptance: {} in {:.1}s",
        if all { "all criteria passed" } else { "FAILURES" },
        started.elapsed().as_secs_f64()
    );
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
