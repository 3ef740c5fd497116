use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use limid_core::generate::{random_diagram, GenParams};
use limid_core::model::{validate_diagram, DEFAULT_STRATEGY_CAP};
use limid_core::solver::{prepare, solve_full_with, NodeStats};
use limid_core::treedecomp::validate_decomposition;
use limid_core::{brute_force_meu, Error, InfluenceDiagram, SolverConfig, Strategy};

use crate::document::{parse, parse_unvalidated, to_json, DiagramDocument, DocumentError, ReductionMeta};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RESOURCE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "limid", version, about = "Approximate maximum expected utility for limited-memory influence diagrams")]
pub struct Cli {
    /// Cap on the size of any potential set built by the solver.
    #[arg(long, global = true, env = "LIMID_MAX_SET_SIZE", value_name = "N")]
    pub max_set_size: Option<u128>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a diagram to within a factor 1 + epsilon, or exactly.
    Solve(SolveArgs),
    /// Reduce to a single value variable and print the result with its decomposition.
    Reduce { file: PathBuf },
    /// Maximum expected utility by enumerating every pure strategy.
    Oracle { file: PathBuf },
    /// Print a random diagram.
    Gen(GenArgs),
    /// Check a diagram (and its decomposition, if present).
    Validate { file: PathBuf },
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("mode").required(true).args(["epsilon", "exact"]))]
pub struct SolveArgs {
    #[arg(long, value_name = "E")]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub exact: bool,
    /// Include per-node statistics.
    #[arg(long)]
    pub stats: bool,
    /// Include wall-clock time (makes output run-dependent).
    #[arg(long)]
    pub timing: bool,
    /// Diagram file, `-` for stdin.
    pub file: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 4)]
    pub chance: usize,
    #[arg(long, default_value_t = 2)]
    pub decisions: usize,
    #[arg(long, default_value_t = 2)]
    pub card: usize,
    #[arg(long, default_value_t = 2)]
    pub max_parents: usize,
    #[arg(long, default_value_t = 2)]
    pub values: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// A failed command: exit code and message for stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Failure { code: EXIT_INVALID, message: message.into() }
    }
}

impl From<DocumentError> for Failure {
    fn from(e: DocumentError) -> Self {
        Failure::invalid(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::TooLarge { .. } | Error::SetTooLarge { .. } => EXIT_RESOURCE,
            _ => EXIT_INVALID,
        };
        Failure { code, message: e.to_string() }
    }
}

fn read_input(path: &PathBuf) -> Result<String, Failure> {
    let mut text = String::new();
    let res = if path.as_os_str() == "-" {
        std::io::stdin().read_to_string(&mut text).map(|_| ())
    } else {
        std::fs::read_to_string(path).map(|t| text = t)
    };
    res.map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    Ok(text)
}

fn strategy_json(d: &InfluenceDiagram, s: &Strategy) -> Value {
    let map = s
        .policies
        .iter()
        .map(|(&dec, p)| {
            let parents: Vec<&str> = p.parents.iter().map(|&v| d.name(v)).collect();
            (d.name(dec).to_owned(), json!({ "parents": parents, "table": p.table }))
        })
        .collect::<serde_json::Map<_, _>>();
    Value::Object(map)
}

fn stats_json(d: &InfluenceDiagram, s: &NodeStats) -> Value {
    let cluster: Vec<&str> = s.cluster.iter().map(|&v| d.name(v)).collect();
    json!({
        "node": s.node,
        "cluster": cluster,
        "initial": s.initial,
        "combined": u64::try_from(s.combined).unwrap_or(u64::MAX),
        "marginal": s.marginal,
        "message": s.message,
        "min_positive": s.min_positive,
        "bound": s.bound,
    })
}

pub fn execute(cli: &Cli) -> Result<String, Failure> {
    match &cli.command {
        Command::Solve(args) => {
            let (d, t) = parse(&read_input(&args.file)?)?;
            let mut cfg = match args.epsilon {
                Some(e) if !args.exact => SolverConfig::approximate(e),
                _ => SolverConfig::exact(),
            };
            if cli.max_set_size.is_some() {
                cfg.max_set_size = cli.max_set_size;
            }
            cfg.collect_stats = args.stats;
            // statistics refer to the reduced diagram, whose names extend `d`'s
            let reduced = if args.stats && !d.value_vars().is_empty() { Some(prepare(&d, t.clone())?.normalized) } else { None };
            let r = solve_full_with(&d, t, &cfg, &mut |_| {})?;
            let mut out = json!({
                "value": r.value,
                "strategy": strategy_json(&d, &r.strategy),
                "alpha": r.alpha,
                "m": r.m,
            });
            if let Some(rd) = &reduced {
                out["stats"] = Value::Array(r.stats.iter().map(|s| stats_json(rd, s)).collect());
                out["total_message_size"] = json!(r.total_message_size());
            }
            if args.timing {
                out["elapsed_ms"] = json!(r.elapsed.as_secs_f64() * 1e3);
            }
            Ok(to_json(&out))
        }
        Command::Reduce { file } => {
            let (d, t) = parse(&read_input(file)?)?;
            if d.value_vars().is_empty() {
                return Err(Failure::invalid("nothing to reduce: no value variables"));
            }
            let p = prepare(&d, t)?;
            let r = &p.reduction;
            let mut doc = DiagramDocument::from_model(&r.diagram, Some(&r.decomposition));
            doc.reduction = Some(ReductionMeta { lower: r.lower, q: r.q, upper: r.upper });
            Ok(to_json(&doc))
        }
        Command::Oracle { file } => {
            let (d, _) = parse(&read_input(file)?)?;
            let (value, s) = brute_force_meu(&d, DEFAULT_STRATEGY_CAP)?;
            Ok(to_json(&json!({ "value": value, "strategy": strategy_json(&d, &s) })))
        }
        Command::Gen(g) => {
            let p = GenParams {
                chance: g.chance,
                decisions: g.decisions,
                card: g.card,
                max_parents: g.max_parents,
                values: g.values,
                seed: g.seed,
            };
            if p.card == 0 {
                return Err(Failure { code: EXIT_USAGE, message: "--card must be at least 1".into() });
            }
            Ok(to_json(&DiagramDocument::from_model(&random_diagram(&p), None)))
        }
        Command::Validate { file } => {
            let (d, t) = parse_unvalidated(&read_input(file)?)?;
            let mut violations: Vec<String> = validate_diagram(&d).violations.iter().map(ToString::to_string).collect();
            if violations.is_empty() {
                if let Some(t) = &t {
                    violations.extend(validate_decomposition(&d, t).violations.iter().map(|v| format!("decomposition: {v}")));
                }
            }
            let out = to_json(&json!({ "valid": violations.is_empty(), "violations": violations }));
            if violations.is_empty() {
                Ok(out)
            } else {
                Err(Failure { code: EXIT_INVALID, message: out })
            }
        }
    }
}

/// Runs the command line `args`, writing results to `stdout` and
/// diagnostics to `stderr`, and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli) {
        Ok(out) => {
            let _ = stdout.write_all(out.as_bytes());
            EXIT_OK
        }
        Err(f) => {
            // a failed validation still prints its report on stdout
            if matches!(cli.command, Command::Validate { .. }) && f.message.starts_with('{') {
                let _ = stdout.write_all(f.message.as_bytes());
            } else {
                let _ = writeln!(stderr, "error: {}", f.message);
            }
            f.code
        }
    }
}
