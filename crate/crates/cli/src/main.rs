//! `entroflow` — entropy flow and feasible layer mappings from the shell.
//!
//! Exit codes: 0 success, 1 failed case-study check, 2 validation or I/O
//! error, 3 infeasible solve.

mod table;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use entroflow::entropyflow::FLOW_TOL;
use entroflow::{
    apply_mapping, builtin_gate, check_separable, compression_and_bound, initial_state,
    load_problem, mutual_info_with_input, solve, Code, EntropyLedger, Gate, GateDistribution,
    MappingAssignment, Problem, Separability, SolveOptions, SolveResult, SolveStatus, Topology,
};

#[derive(Parser)]
#[command(
    name = "entroflow",
    version,
    about = "Entropy flow and feasible layer mappings for binary threshold networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for the compression-maximizing feasible mapping sequence.
    Solve(SolveArgs),
    /// Apply a mapping sequence from a file and print the entropy ledger.
    Flow(FlowArgs),
    /// Decide linear separability of labeled points; print a certificate.
    Separable(SeparableArgs),
    /// Run the bundled boolean-gate case study and check its reference
    /// values.
    Table1(TableArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Problem JSON file.
    #[arg(long, conflicts_with = "gate")]
    problem: Option<PathBuf>,
    /// Builtin gate spec: NAME:ARITY[:p0,p1,...], e.g. AND:2 or
    /// OR:2:0.7,0.1,0.1,0.1 (probabilities in ascending input order).
    #[arg(long)]
    gate: Option<String>,
    /// Neurons per layer, e.g. 2,1.
    #[arg(long, value_delimiter = ',', required = true)]
    layers: Vec<usize>,
    /// Distortion budget in bits.
    #[arg(long, default_value_t = 1e-9)]
    epsilon: f64,
    /// Emit the JSON report instead of the aligned table.
    #[arg(long)]
    json: bool,
    /// Include synthesized integer weights in the table output.
    #[arg(long)]
    weights: bool,
}

#[derive(Args)]
struct FlowArgs {
    /// Problem JSON file.
    #[arg(long)]
    problem: PathBuf,
    /// Mapping file: a JSON array with one {"source": "target", ...} object
    /// per layer.
    #[arg(long)]
    mapping: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SeparableArgs {
    /// Points file: {"points": ["00", ...], "labels": [0, 1, ...]}.
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Flow(args) => cmd_flow(args),
        Command::Separable(args) => cmd_separable(args),
        Command::Table1(args) => table::cmd_table(args.json),
    };
    match outcome {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn worker_threads() -> Result<usize, String> {
    match std::env::var("ENTROFLOW_THREADS") {
        Err(_) => Ok(1),
        Ok(raw) => match raw.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(format!("ENTROFLOW_THREADS must be a positive integer, got \"{raw}\"")),
        },
    }
}

fn parse_gate_spec(spec: &str) -> Result<Problem, String> {
    let mut parts = spec.splitn(3, ':');
    let name = parts.next().unwrap_or_default();
    let gate = match name.to_ascii_uppercase().as_str() {
        "AND" => Gate::And,
        "OR" => Gate::Or,
        "XOR" => Gate::Xor,
        other => return Err(format!("unknown gate \"{other}\"; expected AND, OR or XOR")),
    };
    let arity: usize = parts
        .next()
        .ok_or_else(|| "gate spec needs NAME:ARITY[:p0,p1,...]".to_owned())?
        .parse()
        .map_err(|_| "gate arity must be an integer".to_owned())?;
    let distribution = match parts.next() {
        None => GateDistribution::Uniform,
        Some(list) => GateDistribution::Explicit(
            list.split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| format!("bad probability \"{p}\""))
                })
                .collect::<Result<Vec<f64>, String>>()?,
        ),
    };
    builtin_gate(gate, arity, distribution).map_err(|e| e.to_string())
}

fn load_solve_problem(args: &SolveArgs) -> Result<Problem, String> {
    match (&args.problem, &args.gate) {
        (Some(path), None) => load_problem(path).map_err(|e| e.to_string()),
        (None, Some(spec)) => parse_gate_spec(spec),
        _ => Err("exactly one of --problem and --gate is required".to_owned()),
    }
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode, String> {
    let problem = load_solve_problem(&args)?;
    if args.epsilon < 0.0 {
        return Err(format!("epsilon must be nonnegative, got {}", args.epsilon));
    }
    let topology = Topology::new(args.layers.clone()).map_err(|e| e.to_string())?;
    let options = SolveOptions {
        epsilon: args.epsilon,
        threads: worker_threads()?,
        ..SolveOptions::default()
    };
    let result = solve(&problem, &topology, &options).map_err(|e| e.to_string())?;

    if args.json {
        let report = result.report().map_err(|e| e.to_string())?;
        println!(
            "{}",
            serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?
        );
    } else {
        print_solve_table(&problem, &result, args.weights)?;
    }
    Ok(match result.status {
        SolveStatus::Infeasible => ExitCode::from(3),
        _ => ExitCode::SUCCESS,
    })
}

fn print_solve_table(problem: &Problem, result: &SolveResult, weights: bool) -> Result<(), String> {
    let status = match result.status {
        SolveStatus::Optimal => "optimal",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::BudgetExhausted => "budget_exhausted",
    };
    println!("status      {status}");
    if result.mappings.is_empty() {
        return Ok(());
    }
    let initial = initial_state(problem);
    println!("objective   {:.3} bits", result.objective);
    println!("C_nu        {:.3} bits", result.ledger.c_nu());
    println!("distortion  {:.3} bits", result.ledger.distortion());
    println!(
        "bound       {:.3} bits (epsilon {})",
        result.ledger.compression_bound(),
        result.ledger.epsilon
    );
    println!(
        "H(X|Y)      {:.3} bits",
        entroflow::conditional_layer_entropy(&initial)
    );
    for (i, flow) in result.ledger.layers.iter().enumerate() {
        println!(
            "layer {}: delta {:.3}, delta' {:.3}, H {:.3}, H|Y {:.3}",
            i + 1,
            flow.delta,
            flow.delta_prime,
            flow.h,
            flow.h_given_y
        );
        for merge in &result.trace[i] {
            let sources: Vec<String> = merge.sources.iter().map(Code::to_string).collect();
            println!("  {} -> {}", sources.join(","), merge.target);
        }
        if weights {
            let layer = entroflow::synthesize_layer_weights(&result.realizations[i])
                .map_err(|e| e.to_string())?;
            for (j, (w, b)) in layer.weights.iter().zip(&layer.biases).enumerate() {
                println!("  neuron {}: w = {w:?}, b = {b}", j + 1);
            }
        }
    }
    Ok(())
}

fn cmd_flow(args: FlowArgs) -> Result<ExitCode, String> {
    let problem = load_problem(&args.problem).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(&args.mapping)
        .map_err(|e| format!("cannot read {}: {e}", args.mapping.display()))?;
    let layers: Vec<BTreeMap<String, String>> =
        serde_json::from_str(&text).map_err(|e| format!("malformed mapping file: {e}"))?;
    if layers.is_empty() {
        return Err("mapping file lists no layers".to_owned());
    }

    let initial = initial_state(&problem);
    let mut state = initial.clone();
    let mut ledger = EntropyLedger::new(0.0);
    for (i, layer) in layers.iter().enumerate() {
        if layer.len() != state.len() {
            return Err(format!(
                "mapping layer {} lists {} source codes, the layer has {}",
                i + 1,
                layer.len(),
                state.len()
            ));
        }
        let mut targets = Vec::with_capacity(state.len());
        for combo in &state.combos {
            let raw = layer.get(&combo.code.to_string()).ok_or_else(|| {
                format!("mapping layer {} is missing source code {}", i + 1, combo.code)
            })?;
            targets.push(
                raw.parse::<Code>()
                    .map_err(|e| format!("mapping layer {}: {e}", i + 1))?,
            );
        }
        let map = MappingAssignment::new(targets);
        let next = apply_mapping(&state, &map).map_err(|e| e.to_string())?;
        ledger.record(&state, &map, &next);
        state = next;
    }

    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&ledger).map_err(|e| e.to_string())?
        );
        return Ok(ExitCode::SUCCESS);
    }

    println!("layer   delta  delta'       H     H|Y");
    for (i, flow) in ledger.layers.iter().enumerate() {
        println!(
            "{:>5}  {:>6.3}  {:>6.3}  {:>6.3}  {:>6.3}",
            i + 1,
            flow.delta,
            flow.delta_prime,
            flow.h,
            flow.h_given_y
        );
    }
    println!("objective   {:.3} bits", ledger.objective());
    println!("C_nu        {:.3} bits", ledger.c_nu());
    println!(
        "distortion  {:.3} bits",
        entroflow::distortion(&ledger, &initial, &state)
    );
    let cb = compression_and_bound(&ledger, &initial, &state);
    println!(
        "bound       {:.3} bits ({})",
        cb.bound,
        if cb.ok { "holds" } else { "violated" }
    );
    let mi: Vec<String> = mutual_info_with_input(&ledger, &problem)
        .iter()
        .map(|v| format!("{v:.3}"))
        .collect();
    println!("I(X;X_i)    {}", mi.join(", "));
    Ok(ExitCode::SUCCESS)
}

#[derive(Deserialize)]
struct PointsFile {
    points: Vec<String>,
    labels: Vec<u8>,
}

fn cmd_separable(args: SeparableArgs) -> Result<ExitCode, String> {
    let text = std::fs::read_to_string(&args.points)
        .map_err(|e| format!("cannot read {}: {e}", args.points.display()))?;
    let doc: PointsFile =
        serde_json::from_str(&text).map_err(|e| format!("malformed points file: {e}"))?;
    let points = doc
        .points
        .iter()
        .map(|s| s.parse::<Code>().map_err(|e| e.to_string()))
        .collect::<Result<Vec<Code>, String>>()?;
    let labels = doc
        .labels
        .iter()
        .map(|&v| match v {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(format!("labels must be 0 or 1, got {other}")),
        })
        .collect::<Result<Vec<bool>, String>>()?;

    let decision = check_separable(&points, &labels).map_err(|e| e.to_string())?;
    match decision {
        Separability::Separable(cert) => {
            let (weights, bias) = cert.to_integer().map_err(|e| e.to_string())?;
            debug_assert!(cert.verify(&points, &labels));
            if args.json {
                println!(
                    "{}",
                    serde_json::json!({
                        "separable": true,
                        "weights": weights,
                        "bias": bias,
                    })
                );
            } else {
                println!("SEPARABLE");
                println!("weights {weights:?}");
                println!("bias    {bias}");
            }
        }
        Separability::Inseparable { witness } => {
            if args.json {
                println!(
                    "{}",
                    serde_json::json!({ "separable": false, "witness": witness })
                );
            } else {
                println!("INFEASIBLE: {witness}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Shared by solve and the case-study table: structural consistency of a
/// solved row, `|C_nu - min(H(X|Y), bound)| <= tol`.
fn row_consistent(c_nu: f64, h_x_given_y: f64, bound: f64) -> bool {
    (c_nu - h_x_given_y.min(bound)).abs() <= 1e-6 + FLOW_TOL
}
