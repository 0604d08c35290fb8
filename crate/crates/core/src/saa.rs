//! Sample average approximation for implicitly given scenario distributions.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive};
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::graph::{Allocation, BipartiteGraph};
use crate::instance::hardness::{HardnessError, HardnessInstance, SimpleGraph};
use crate::instance::{stream_rng, Mode, Scenario, ScenarioSampler, TwoStageInstance, Violation};
use crate::numeric::{ceil_to_integer, format_ratio, int, ln_bounds, rat};
use crate::solver::{evaluate_first_stage, solve_two_stage, SolverError};
use crate::Rational;

/// Largest sample count the driver draws.
pub const MAX_SAMPLES: u64 = 10_000_000;
/// Largest graph whose vertex covers are counted by enumeration.
pub const MAX_COUNT_VERTICES: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SaaError {
    #[error("accuracy must be positive")]
    Accuracy,
    #[error("confidence must lie strictly between 0 and 1")]
    Confidence,
    #[error("lambda sum must be non-negative")]
    LambdaSum,
    #[error("sample count must be positive")]
    ZeroSamples,
    #[error("sample count {0} exceeds {MAX_SAMPLES}")]
    TooManySamples(BigInt),
    #[error("sampled scenario is inconsistent with the first stage: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Sampler(Vec<Violation>),
    #[error("graph has {0} vertices, above {MAX_COUNT_VERTICES}")]
    TooLarge(usize),
    #[error(transparent)]
    Hardness(#[from] HardnessError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// How the driver fixes the sample count `N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SampleCount {
    /// `N` from the accuracy/confidence bound.
    Bound { accuracy: Rational, confidence: Rational },
    Fixed(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SaaConfig {
    pub samples: SampleCount,
    pub mode: Mode,
}

impl SaaConfig {
    pub fn bound(accuracy: Rational, confidence: Rational) -> Self {
        SaaConfig {
            samples: SampleCount::Bound { accuracy, confidence },
            mode: Mode::Pos,
        }
    }

    pub fn fixed(n: u64) -> Self {
        SaaConfig {
            samples: SampleCount::Fixed(n),
            mode: Mode::Pos,
        }
    }

    /// Resolves `N` for a first stage with `v0_count` vertices.
    pub fn sample_count(&self, lambda_sum: &Rational, v0_count: usize) -> Result<u64, SaaError> {
        let n = match &self.samples {
            SampleCount::Fixed(0) => return Err(SaaError::ZeroSamples),
            SampleCount::Fixed(n) => BigInt::from(*n),
            SampleCount::Bound { accuracy, confidence } => {
                required_samples(lambda_sum, v0_count, confidence, accuracy)?.max(BigInt::one())
            }
        };
        n.to_u64()
            .filter(|&n| n <= MAX_SAMPLES)
            .ok_or(SaaError::TooManySamples(n))
    }
}

/// Precision of the outward-rounded logarithm in the sample bound.
pub fn ln_tolerance() -> Rational {
    rat(1, 1_000_000_000)
}

/// `N = ceil(2 L^2 ln(2^n / confidence) / accuracy^2)` with `ln` replaced by
/// a certified rational upper bound.
pub fn required_samples(
    lambda_sum: &Rational,
    v0_count: usize,
    confidence: &Rational,
    accuracy: &Rational,
) -> Result<BigInt, SaaError> {
    if !accuracy.is_positive() {
        return Err(SaaError::Accuracy);
    }
    if !confidence.is_positive() || *confidence >= Rational::one() {
        return Err(SaaError::Confidence);
    }
    if lambda_sum.is_negative() {
        return Err(SaaError::LambdaSum);
    }
    let ratio = Rational::from_integer(BigInt::one() << v0_count) / confidence;
    let (_, ln_hi) = ln_bounds(&ratio, &ln_tolerance());
    Ok(ceil_to_integer(&(int(2) * lambda_sum * lambda_sum * ln_hi / (accuracy * accuracy))))
}

/// Outcome of one SAA run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SaaReport {
    pub samples: u64,
    pub seed: u64,
    pub y_hat: Allocation,
    /// Optimal objective on the drawn sample.
    pub empirical_objective: Rational,
    /// Number of distinct graphs among the samples.
    pub distinct_scenarios: usize,
    /// `val(y_hat)` when the distribution's support can be enumerated.
    pub exact_value: Option<Rational>,
}

impl SaaReport {
    pub fn to_json(&self) -> Value {
        json!({
            "N": self.samples,
            "seed": self.seed,
            "y_hat": self.y_hat.iter().map(|(v, y)| (v.to_string(), json!(format_ratio(y)))).collect::<serde_json::Map<_, _>>(),
            "empirical_objective": format_ratio(&self.empirical_objective),
            "distinct_scenarios": self.distinct_scenarios,
            "exact_value": self.exact_value.as_ref().map(format_ratio),
        })
    }
}

/// Draws `n` scenarios; draw `i` uses stream `i` of `seed`.
pub fn draw_samples(sampler: &dyn ScenarioSampler, n: u64, seed: u64) -> Vec<BipartiteGraph> {
    (0..n)
        .into_par_iter()
        .map(|i| sampler.draw(&mut stream_rng(seed, i)))
        .collect()
}

/// Explicit instance with probability `1/N` per draw. Identical draws are
/// merged into one scenario carrying their combined probability.
pub fn empirical_instance(
    g0: &BipartiteGraph,
    lambda: &BTreeMap<String, Rational>,
    draws: Vec<BipartiteGraph>,
    mode: Mode,
) -> TwoStageInstance {
    let n = draws.len() as i64;
    let mut index: HashMap<BipartiteGraph, usize> = HashMap::new();
    let mut scenarios: Vec<(usize, BipartiteGraph, i64)> = Vec::new();
    for (i, g) in draws.into_iter().enumerate() {
        match index.get(&g) {
            Some(&k) => scenarios[k].2 += 1,
            None => {
                index.insert(g.clone(), scenarios.len());
                scenarios.push((i, g, 1));
            }
        }
    }
    TwoStageInstance {
        g0: g0.clone(),
        scenarios: scenarios
            .into_iter()
            .map(|(i, graph, count)| Scenario {
                name: format!("S{}", i + 1),
                prob: rat(count, n),
                graph,
            })
            .collect(),
        lambda: lambda.clone(),
        mode,
    }
}

/// One SAA run: draw `N` scenarios and solve the empirical explicit instance.
pub fn saa_solve(
    g0: &BipartiteGraph,
    lambda: &BTreeMap<String, Rational>,
    sampler: &dyn ScenarioSampler,
    cfg: &SaaConfig,
    seed: u64,
) -> Result<SaaReport, SaaError> {
    let lambda_sum: Rational = g0.vertices().filter_map(|v| lambda.get(v)).sum();
    let n = cfg.sample_count(&lambda_sum, g0.num_vertices())?;
    let inst = empirical_instance(g0, lambda, draw_samples(sampler, n, seed), cfg.mode);
    inst.validate().map_err(SaaError::Sampler)?;
    let sol = solve_two_stage(&inst)?;
    Ok(SaaReport {
        samples: n,
        seed,
        y_hat: sol.first_stage().clone(),
        empirical_objective: sol.objective,
        distinct_scenarios: inst.scenarios.len(),
        exact_value: None,
    })
}

/// Independent SAA runs, one per seed, reported in seed order.
pub fn run_trials(
    g0: &BipartiteGraph,
    lambda: &BTreeMap<String, Rational>,
    sampler: &dyn ScenarioSampler,
    cfg: &SaaConfig,
    seeds: &[u64],
) -> Vec<Result<SaaReport, SaaError>> {
    seeds
        .par_iter()
        .map(|&seed| saa_solve(g0, lambda, sampler, cfg, seed))
        .collect()
}

/// Exact `val(y)` on a hardness instance, averaging over all `2^|V|` kept sets.
pub fn exact_expected_value(y: &Allocation, h: &HardnessInstance) -> Result<Rational, SaaError> {
    let n = h.base.num_vertices();
    if n > MAX_COUNT_VERTICES {
        return Err(SaaError::TooLarge(n));
    }
    Ok(evaluate_first_stage(y, &h.explicit_instance()?)?)
}

/// Number of vertex subsets covering every edge, by enumeration.
pub fn count_vertex_covers(g: &SimpleGraph) -> Result<u64, SaaError> {
    let names: Vec<&str> = g.vertices().collect();
    if names.len() > MAX_COUNT_VERTICES {
        return Err(SaaError::TooLarge(names.len()));
    }
    let pos = |v: &str| names.iter().position(|w| *w == v).expect("edge endpoint is a vertex");
    let edges: Vec<u32> = g.edges().map(|(u, v)| 1 << pos(u) | 1 << pos(v)).collect();
    Ok((0u32..1 << names.len())
        .filter(|m| edges.iter().all(|e| m & e != 0))
        .count() as u64)
}
