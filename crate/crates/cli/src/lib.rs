//! The `sag` command line: instance files in, JSON reports out.
//!
//! Exit status is 0 on success, 2 when the input is rejected and 1 when an
//! internal check fails.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use sag_core::graph::Allocation;
use sag_core::instance::hardness::SimpleGraph;
use sag_core::instance::{
    build_hardness_instance, gen_random, gen_random_multistage, ExplicitSampler, Instance, InstanceError, Mode,
    RandomParams,
};
use sag_core::numeric::{format_ratio, rat_of_string};
use sag_core::reduce::{build_aux_graph, epsilon, objective_from_instance, LayeredModel};
use sag_core::saa::{count_vertex_covers, exact_expected_value, saa_solve, SaaConfig, SampleCount};
use sag_core::solver::{
    brute_force_multistage, brute_force_two_stage, evaluate_first_stage, solve_mvc, solve_multistage,
    solve_two_stage, SolveResult,
};
use sag_core::Rational;

#[derive(Debug, Parser)]
#[command(name = "sag", version, about = "Integral core allocations for stochastic assignment games")]
struct Cli {
    /// Worker threads for parallel sampling.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve an explicit two-stage instance.
    Solve(SolveArgs),
    /// Solve a multistage instance.
    Multistage(SolveArgs),
    /// Multistage vertex cover on the stages of a multistage file.
    Mvc(IoArgs),
    /// Sample average approximation on an explicit instance or a hardness graph.
    Saa(SaaArgs),
    /// Expected second-stage cost of a given first-stage allocation.
    Eval(EvalArgs),
    /// Exhaustive oracle for two-stage or multistage files.
    Oracle(SolveArgs),
    /// Write a random instance.
    Gen(GenArgs),
    /// Explicit hardness instance of a plain graph.
    Hardness(IoArgs),
    /// Count the vertex covers of a plain graph.
    CountVc(IoArgs),
}

#[derive(Debug, Args)]
struct IoArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    io: IoArgs,
    /// Override the file's mode; needs --force when they differ.
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    force: bool,
    /// Write the auxiliary flow network in DOT format.
    #[arg(long)]
    dump_network: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SaaArgs {
    #[command(flatten)]
    io: IoArgs,
    /// Treat the input as a plain graph and sample its hardness instance.
    #[arg(long)]
    graph: bool,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    accuracy: Option<String>,
    #[arg(long)]
    confidence: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    io: IoArgs,
    /// JSON object mapping each first-stage vertex to 0 or 1.
    #[arg(long)]
    first_stage: PathBuf,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, default_value_t = 3)]
    left: usize,
    #[arg(long, default_value_t = 3)]
    right: usize,
    #[arg(long, default_value_t = 0.5)]
    density: f64,
    /// Scenario count, or stage count with --multistage.
    #[arg(long, default_value_t = 2)]
    count: usize,
    #[arg(long, default_value = "abs")]
    mode: Mode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    multistage: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A rejected input, reported with exit status 2.
#[derive(Debug)]
struct Rejection {
    message: String,
    violations: Vec<(String, String)>,
}

impl Rejection {
    fn new(message: impl Into<String>) -> Self {
        Rejection {
            message: message.into(),
            violations: Vec::new(),
        }
    }

    fn to_json(&self) -> Value {
        json!({
            "error": self.message,
            "violations": self.violations.iter().map(|(f, m)| json!({ "field": f, "message": m })).collect::<Vec<_>>(),
        })
    }
}

impl From<InstanceError> for Rejection {
    fn from(e: InstanceError) -> Self {
        match e {
            InstanceError::Invalid(vs) => Rejection {
                message: "invalid instance".into(),
                violations: vs.iter().map(|v| (v.field(), v.to_string())).collect(),
            },
            other => Rejection::new(other.to_string()),
        }
    }
}

macro_rules! reject_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Rejection {
            fn from(e: $t) -> Self {
                Rejection::new(e.to_string())
            }
        }
    )*};
}

reject_from!(
    sag_core::solver::SolverError,
    sag_core::saa::SaaError,
    sag_core::instance::HardnessError,
    sag_core::instance::SamplerError,
    sag_core::reduce::ReduceError,
    sag_core::numeric::NumericError
);

/// Successful output: the JSON report and a one-line human summary.
struct Output {
    report: String,
    summary: String,
    out: Option<PathBuf>,
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn read(path: &Path) -> Result<String, Rejection> {
    fs::read_to_string(path).map_err(|e| Rejection::new(format!("cannot read {}: {e}", path.display())))
}

fn load_instance(args: &SolveArgs) -> Result<Instance, Rejection> {
    let mut inst = Instance::from_json(&read(&args.io.input)?)?;
    if let Some(mode) = args.mode {
        if mode != inst.mode() && !args.force {
            return Err(Rejection::new(format!(
                "--mode {mode} differs from the file's mode {}; pass --force to override",
                inst.mode()
            )));
        }
        inst.set_mode(mode);
    }
    Ok(inst)
}

fn load_graph(path: &Path) -> Result<SimpleGraph, Rejection> {
    Ok(SimpleGraph::parse_edge_list(&read(path)?)?)
}

fn dump_network(inst: &Instance, path: &Path) -> Result<(), Rejection> {
    let model = match inst {
        Instance::TwoStage(i) => LayeredModel::two_stage(i),
        Instance::Multistage(m) => LayeredModel::multistage(m),
    };
    let coeffs = objective_from_instance(inst);
    let aux = build_aux_graph(&model, &coeffs, &epsilon(&coeffs))?;
    fs::write(path, aux.to_dot()).map_err(|e| Rejection::new(format!("cannot write {}: {e}", path.display())))
}

fn solve_summary(res: &SolveResult) -> String {
    match &res.reduce {
        Some(r) => format!(
            "objective {} ({} nodes, {} arcs, max flow {})",
            format_ratio(&res.objective),
            r.nodes,
            r.arcs,
            r.max_flow
        ),
        None => format!("objective {}", format_ratio(&res.objective)),
    }
}

fn solved(res: SolveResult, out: &Option<PathBuf>) -> Output {
    Output {
        report: pretty(&res.to_json()),
        summary: solve_summary(&res),
        out: out.clone(),
    }
}

fn cmd_solve(args: &SolveArgs, multistage: bool) -> Result<Output, Rejection> {
    let inst = load_instance(args)?;
    if let Some(path) = &args.dump_network {
        inst.validate().map_err(InstanceError::Invalid)?;
        dump_network(&inst, path)?;
    }
    let res = match (&inst, multistage) {
        (Instance::TwoStage(i), false) => solve_two_stage(i)?,
        (Instance::Multistage(m), true) => solve_multistage(m)?,
        (_, false) => return Err(Rejection::new("solve expects a two-stage file; use `multistage`")),
        (_, true) => return Err(Rejection::new("multistage expects a multistage file; use `solve`")),
    };
    Ok(solved(res, &args.io.out))
}

fn cmd_oracle(args: &SolveArgs) -> Result<Output, Rejection> {
    let res = match load_instance(args)? {
        Instance::TwoStage(i) => brute_force_two_stage(&i)?,
        Instance::Multistage(m) => brute_force_multistage(&m)?,
    };
    Ok(solved(res, &args.io.out))
}

fn cmd_mvc(args: &IoArgs) -> Result<Output, Rejection> {
    let Instance::Multistage(m) = Instance::from_json(&read(&args.input)?)? else {
        return Err(Rejection::new("mvc expects a multistage file"));
    };
    let res = solve_mvc(&m.stages)?;
    let covers: Vec<Vec<&String>> = res.covers.iter().map(|c| c.iter().collect()).collect();
    Ok(Output {
        report: pretty(&json!({ "covers": covers, "cost": res.cost })),
        summary: format!("multistage vertex cover cost {}", res.cost),
        out: args.out.clone(),
    })
}

fn parse_fraction(flag: &str, text: &Option<String>) -> Result<Rational, Rejection> {
    let text = text
        .as_deref()
        .ok_or_else(|| Rejection::new(format!("--{flag} is required without --samples")))?;
    rat_of_string(text).map_err(|e| Rejection::new(format!("--{flag}: {e}")))
}

fn saa_config(args: &SaaArgs) -> Result<SaaConfig, Rejection> {
    match args.samples {
        Some(n) => {
            if args.accuracy.is_some() || args.confidence.is_some() {
                return Err(Rejection::new("--samples excludes --accuracy and --confidence"));
            }
            Ok(SaaConfig::fixed(n))
        }
        None => Ok(SaaConfig {
            samples: SampleCount::Bound {
                accuracy: parse_fraction("accuracy", &args.accuracy)?,
                confidence: parse_fraction("confidence", &args.confidence)?,
            },
            mode: Mode::Pos,
        }),
    }
}

fn cmd_saa(args: &SaaArgs) -> Result<Output, Rejection> {
    let mut cfg = saa_config(args)?;
    let report = if args.graph {
        let h = build_hardness_instance(&load_graph(&args.io.input)?)?;
        let mut rep = saa_solve(&h.g0, &h.lambda, &h.sampler(), &cfg, args.seed)?;
        rep.exact_value = Some(exact_expected_value(&rep.y_hat, &h)?);
        rep
    } else {
        let Instance::TwoStage(inst) = Instance::from_json(&read(&args.io.input)?)? else {
            return Err(Rejection::new("saa expects a two-stage file or --graph"));
        };
        inst.validate().map_err(InstanceError::Invalid)?;
        cfg.mode = inst.mode;
        let sampler = ExplicitSampler::new(&inst)?;
        let mut rep = saa_solve(&inst.g0, &inst.lambda, &sampler, &cfg, args.seed)?;
        rep.exact_value = Some(evaluate_first_stage(&rep.y_hat, &inst)?);
        rep
    };
    let summary = format!(
        "N = {}, empirical objective {}{}",
        report.samples,
        format_ratio(&report.empirical_objective),
        report
            .exact_value
            .as_ref()
            .map(|v| format!(", exact value {}", format_ratio(v)))
            .unwrap_or_default()
    );
    Ok(Output {
        report: pretty(&report.to_json()),
        summary,
        out: args.io.out.clone(),
    })
}

fn cmd_eval(args: &EvalArgs) -> Result<Output, Rejection> {
    let Instance::TwoStage(inst) = Instance::from_json(&read(&args.io.input)?)? else {
        return Err(Rejection::new("eval expects a two-stage file"));
    };
    inst.validate().map_err(InstanceError::Invalid)?;
    let raw: BTreeMap<String, Value> = serde_json::from_str(&read(&args.first_stage)?)
        .map_err(|e| Rejection::new(format!("malformed first-stage file: {e}")))?;
    let mut values = BTreeMap::new();
    for (v, x) in raw {
        let text = match &x {
            Value::String(s) => s.clone(),
            Value::Number(n) => n.to_string(),
            _ => return Err(Rejection::new(format!("value of {v} must be a number or fraction string"))),
        };
        values.insert(v, rat_of_string(&text)?);
    }
    let y = Allocation::new(values);
    let value = evaluate_first_stage(&y, &inst)?;
    Ok(Output {
        report: pretty(&json!({ "value": format_ratio(&value) })),
        summary: format!("expected second-stage cost {}", format_ratio(&value)),
        out: args.io.out.clone(),
    })
}

fn cmd_gen(args: &GenArgs) -> Result<Output, Rejection> {
    if !(0.0..=1.0).contains(&args.density) {
        return Err(Rejection::new("--density must lie in [0, 1]"));
    }
    let p = RandomParams {
        left: args.left,
        right: args.right,
        density: args.density,
        count: args.count,
        mode: args.mode,
        seed: args.seed,
    };
    let inst = if args.multistage {
        Instance::Multistage(gen_random_multistage(&p))
    } else {
        Instance::TwoStage(gen_random(&p))
    };
    let mut report = inst.to_json_with_seed(Some(args.seed));
    report.push('\n');
    Ok(Output {
        report,
        summary: format!("generated {} instance with seed {}", if args.multistage { "multistage" } else { "two-stage" }, args.seed),
        out: args.out.clone(),
    })
}

fn cmd_hardness(args: &IoArgs) -> Result<Output, Rejection> {
    let h = build_hardness_instance(&load_graph(&args.input)?)?;
    let inst = h.explicit_instance()?;
    let summary = format!(
        "hardness instance: {} first-stage vertices, {} scenarios",
        inst.g0.num_vertices(),
        inst.scenarios.len()
    );
    let mut report = Instance::TwoStage(inst).to_json();
    report.push('\n');
    Ok(Output {
        report,
        summary,
        out: args.out.clone(),
    })
}

fn cmd_count_vc(args: &IoArgs) -> Result<Output, Rejection> {
    let count = count_vertex_covers(&load_graph(&args.input)?)?;
    Ok(Output {
        report: format!("{count}\n"),
        summary: format!("{count} vertex covers"),
        out: args.out.clone(),
    })
}

fn dispatch(cli: &Cli) -> Result<Output, Rejection> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a, false),
        Command::Multistage(a) => cmd_solve(a, true),
        Command::Mvc(a) => cmd_mvc(a),
        Command::Saa(a) => cmd_saa(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Hardness(a) => cmd_hardness(a),
        Command::CountVc(a) => cmd_count_vc(a),
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// status. Reports go to `stdout`, summaries and errors to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(jobs) = cli.jobs {
        // fails only if a pool already exists, which then keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match dispatch(&cli) {
        Ok(out) => {
            let written = match &out.out {
                Some(path) => fs::write(path, &out.report)
                    .map_err(|e| format!("cannot write {}: {e}", path.display())),
                None => stdout.write_all(out.report.as_bytes()).map_err(|e| e.to_string()),
            };
            if let Err(e) = written {
                let _ = writeln!(stderr, "error: {e}");
                return 2;
            }
            let _ = writeln!(stderr, "{}", out.summary);
            0
        }
        Err(rej) => {
            let _ = stdout.write_all(pretty(&rej.to_json()).as_bytes());
            let _ = writeln!(stderr, "error: {}", rej.message);
            for (field, msg) in &rej.violations {
                let _ = writeln!(stderr, "  {field}: {msg}");
            }
            2
        }
    }
}
