use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use dopt_core::apps::maximin::{solve_maximin, MaximinSpec};
use dopt_core::apps::robust::{solve_robust, RobustSpec};
use dopt_core::canonical::measure_to_canonical;
use dopt_core::check::run_checks;
use dopt_core::oracle::{brute_force_design, info_matrix_det};
use dopt_core::{evaluate_objective, solve, DesignError, DesignMeasure, ModelSpec, Rational, Scalar, SolveOptions};

#[derive(Parser)]
#[command(name = "dopt", version, about = "D-optimal designs through canonical moments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// D-optimal design for polynomial regression with prior information.
    Solve(ModelArgs),
    /// Robust symmetric design under a bias budget.
    Robust(Common),
    /// Power-mean homotopy towards the maximin design.
    Maximin {
        #[command(flatten)]
        common: Common,
        /// Comma-separated negative exponents, decreasing.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        pschedule: Option<Vec<f64>>,
        /// Gauss–Legendre nodes per axis.
        #[arg(long)]
        nodes: Option<usize>,
    },
    /// Grid exchange search used as a reference for `solve`.
    Oracle {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 101)]
        grid: usize,
        /// Support size of the searched designs; defaults to m.
        #[arg(long)]
        support: Option<usize>,
        #[arg(long, value_enum, default_value_t = Mode::Float)]
        mode: Mode,
    },
    /// Invariant suite on random instances.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Problem JSON file, `-` for stdin.
    problem: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    restarts: Option<usize>,
}

#[derive(Args)]
struct ModelArgs {
    #[command(flatten)]
    common: Common,
    /// Number of regression parameters, instead of a problem file.
    #[arg(long, conflicts_with = "problem")]
    m: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "m")]
    beta: Vec<f64>,
    #[arg(long, value_delimiter = ',', requires = "m")]
    b: Vec<usize>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Mode {
    Float,
    Rational,
}

#[derive(Deserialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Dopt,
    Robust,
    Maximin,
    Oracle,
    Check,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    kind: Kind,
    payload: Value,
    #[serde(default)]
    options: Option<SolveOptions>,
}

enum Failure {
    Design(DesignError),
    Input(String),
    Io(String),
}

impl From<DesignError> for Failure {
    fn from(e: DesignError) -> Self {
        Failure::Design(e)
    }
}

impl Failure {
    fn report(&self) -> (Value, u8) {
        match self {
            Failure::Design(e) => {
                let code = if e.is_invalid_input() { 2 } else { 1 };
                (json!({"error": {"kind": e.kind(), "message": e.to_string()}}), code)
            }
            Failure::Input(msg) => (json!({"error": {"kind": "InvalidInput", "message": msg}}), 2),
            Failure::Io(msg) => (json!({"error": {"kind": "Io", "message": msg}}), 2),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn read_problem(path: &Option<PathBuf>) -> Outcome<Value> {
    let text = match path.as_deref() {
        None => return Err(Failure::Input("no problem file given".into())),
        Some(p) if p.as_os_str() == "-" => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s).map_err(|e| Failure::Io(e.to_string()))?;
            s
        }
        Some(p) => fs::read_to_string(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?,
    };
    serde_json::from_str(&text).map_err(|e| Failure::Input(format!("malformed JSON: {e}")))
}

/// Splits a problem document into payload and options. A document with a
/// `kind` field is a problem file; anything else is a bare payload.
fn load<T: for<'de> Deserialize<'de>>(value: Value, accepts: &[&str]) -> Outcome<(T, SolveOptions)> {
    let (payload, options) = if value.get("kind").is_some() {
        let file: ProblemFile =
            serde_json::from_value(value).map_err(|e| Failure::Input(format!("problem file: {e}")))?;
        let kind = match file.kind {
            Kind::Dopt => "dopt",
            Kind::Robust => "robust",
            Kind::Maximin => "maximin",
            Kind::Oracle => "oracle",
            Kind::Check => "check",
        };
        if !accepts.contains(&kind) {
            return Err(Failure::Input(format!("problem kind `{kind}` does not fit this command")));
        }
        (file.payload, file.options.unwrap_or_default())
    } else {
        (value, SolveOptions::default())
    };
    let spec = serde_json::from_value(payload).map_err(|e| Failure::Input(format!("payload: {e}")))?;
    Ok((spec, options))
}

fn apply(common: &Common, mut opts: SolveOptions) -> SolveOptions {
    if let Some(seed) = common.seed {
        opts.seed = seed;
    }
    if let Some(r) = common.restarts {
        opts.restarts = r;
    }
    opts
}

fn model_problem(args: &ModelArgs, accepts: &[&str]) -> Outcome<(ModelSpec, SolveOptions)> {
    let (spec, opts) = match args.m {
        Some(m) => (ModelSpec { m, beta: args.beta.clone(), b: args.b.clone() }, SolveOptions::default()),
        None => load(read_problem(&args.common.problem)?, accepts)?,
    };
    Ok((spec, apply(&args.common, opts)))
}

fn oracle(spec: &ModelSpec, grid: usize, support: Option<usize>, mode: Mode) -> Outcome<Value> {
    let found = brute_force_design(spec, grid, support.unwrap_or(spec.m))?;
    let mu = &found.measure;
    let canonical = measure_to_canonical(mu)?;
    let (objective, exact) = match mode {
        Mode::Float => (found.det, None),
        Mode::Rational => {
            let exact_mu = DesignMeasure::<Rational>::normalized(
                mu.domain(),
                mu.support().iter().map(|x| Rational::from_real(*x)).collect(),
                mu.weights().iter().map(|w| Rational::from_real(*w)).collect(),
            )?;
            let det = info_matrix_det(&exact_mu, spec);
            (det.to_real(), Some(det.to_string()))
        }
    };
    let pipeline = evaluate_objective(&canonical, spec)?;
    let mut diagnostics = json!({
        "grid": grid,
        "iterations": found.history.len(),
        "history": found.history,
        "pipeline_objective": pipeline,
        "mode": if mode == Mode::Float { "float" } else { "rational" },
    });
    if let Some(s) = exact {
        diagnostics["exact_objective"] = Value::String(s);
    }
    Ok(json!({
        "design": mu,
        "canonical_moments": canonical.values(),
        "objective": objective,
        "diagnostics": diagnostics,
    }))
}

fn run(cli: Cli) -> Outcome<(Value, Option<PathBuf>, bool)> {
    match cli.command {
        Command::Solve(args) => {
            let (spec, opts) = model_problem(&args, &["dopt"])?;
            let r = solve(&spec, &opts)?;
            Ok((to_json(&r), args.common.out, true))
        }
        Command::Robust(common) => {
            let (spec, opts): (RobustSpec, _) = load(read_problem(&common.problem)?, &["robust"])?;
            let r = solve_robust(&spec, &apply(&common, opts))?;
            Ok((to_json(&r), common.out, true))
        }
        Command::Maximin { common, pschedule, nodes } => {
            let (mut spec, opts): (MaximinSpec, _) = load(read_problem(&common.problem)?, &["maximin"])?;
            if let Some(p) = pschedule {
                spec.p_schedule = p;
            }
            if let Some(n) = nodes {
                spec.nodes = n;
            }
            let path = solve_maximin(&spec, &apply(&common, opts))?;
            let mut out = to_json(path.last().expect("nonempty schedule"));
            out["path"] = Value::Array(path.iter().map(to_json).collect());
            Ok((out, common.out, true))
        }
        Command::Oracle { model, grid, support, mode } => {
            let (spec, _) = model_problem(&model, &["dopt", "oracle"])?;
            Ok((oracle(&spec, grid, support, mode)?, model.common.out, true))
        }
        Command::Check { seed, instances, out } => {
            let report = run_checks(seed, instances);
            let ok = report.all_passed();
            Ok((to_json(&report), out, ok))
        }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn emit(value: &Value, out: Option<PathBuf>) -> Outcome<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    match out {
        Some(path) => fs::write(&path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::Io(e.to_string())),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(cli).and_then(|(value, out, ok)| emit(&value, out).map(|_| ok));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            let (value, code) = f.report();
            eprintln!("{value}");
            ExitCode::from(code)
        }
    }
}
