//! The bundled boolean-gate case study: nine gate/topology configurations
//! solved exactly and checked against their reference values.

use std::process::ExitCode;

use serde::Serialize;

use entroflow::{
    builtin_gate, conditional_layer_entropy, initial_state, solve, Gate, GateDistribution,
    SolveOptions, SolveStatus, Topology,
};

use crate::{row_consistent, worker_threads};

const VALUE_TOL: f64 = 0.001;

struct CaseConfig {
    function: &'static str,
    gate: Gate,
    arity: usize,
    explicit: Option<&'static [f64]>,
    layers: &'static [usize],
    /// Reference (objective, c_nu, h_x_given_y); `None` for rows expected to
    /// be infeasible.
    reference: Option<(f64, f64, f64)>,
    /// Check the structural identity objective = C_nu = H(X|Y) instead of
    /// the printed reference values.
    structural_only: bool,
}

/// The starred row's nonuniform input distribution.
const STARRED_OR: &[f64] = &[0.7, 0.1, 0.1, 0.1];

const CASES: &[CaseConfig] = &[
    CaseConfig {
        function: "AND(2)",
        gate: Gate::And,
        arity: 2,
        explicit: None,
        layers: &[1],
        reference: Some((1.189, 1.189, 1.189)),
        structural_only: false,
    },
    CaseConfig {
        function: "OR(2)*",
        gate: Gate::Or,
        arity: 2,
        explicit: Some(STARRED_OR),
        layers: &[1],
        reference: Some((0.888, 0.888, 0.888)),
        structural_only: true,
    },
    CaseConfig {
        function: "XOR(2)",
        gate: Gate::Xor,
        arity: 2,
        explicit: None,
        layers: &[1],
        reference: None,
        structural_only: false,
    },
    CaseConfig {
        function: "AND(2)",
        gate: Gate::And,
        arity: 2,
        explicit: None,
        layers: &[2, 1],
        reference: Some((2.377, 1.189, 1.189)),
        structural_only: false,
    },
    CaseConfig {
        function: "XOR(2)",
        gate: Gate::Xor,
        arity: 2,
        explicit: None,
        layers: &[2, 1],
        reference: Some((1.500, 1.000, 1.000)),
        structural_only: false,
    },
    CaseConfig {
        function: "AND(2)",
        gate: Gate::And,
        arity: 2,
        explicit: None,
        layers: &[2, 2, 1],
        reference: Some((3.566, 1.189, 1.189)),
        structural_only: false,
    },
    CaseConfig {
        function: "XOR(2)",
        gate: Gate::Xor,
        arity: 2,
        explicit: None,
        layers: &[2, 2, 1],
        reference: Some((2.500, 1.000, 1.000)),
        structural_only: false,
    },
    CaseConfig {
        function: "AND(3)",
        gate: Gate::And,
        arity: 3,
        explicit: None,
        layers: &[1],
        reference: Some((2.456, 2.456, 2.456)),
        structural_only: false,
    },
    CaseConfig {
        function: "XOR(3)",
        gate: Gate::Xor,
        arity: 3,
        explicit: None,
        layers: &[1],
        reference: None,
        structural_only: false,
    },
];

/// One row of the case-study comparison, mirroring the reference table's
/// columns.
#[derive(Debug, Serialize)]
pub(crate) struct ReportRow {
    pub function: String,
    pub nu: usize,
    pub neurons_per_layer: Vec<usize>,
    pub solution_exists: bool,
    pub objective: Option<f64>,
    pub c_nu: Option<f64>,
    pub h_x_given_y: f64,
    pub check: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn run_case(case: &CaseConfig, threads: usize) -> Result<ReportRow, String> {
    let distribution = match case.explicit {
        Some(probs) => GateDistribution::Explicit(probs.to_vec()),
        None => GateDistribution::Uniform,
    };
    let problem = builtin_gate(case.gate, case.arity, distribution).map_err(|e| e.to_string())?;
    let topology = Topology::new(case.layers.to_vec()).map_err(|e| e.to_string())?;
    let options = SolveOptions {
        threads,
        ..SolveOptions::default()
    };
    let result = solve(&problem, &topology, &options).map_err(|e| e.to_string())?;
    let h_x_given_y = conditional_layer_entropy(&initial_state(&problem));
    let exists = result.status == SolveStatus::Optimal;

    let (check, note) = match (&case.reference, exists) {
        (None, false) => ("PASS".to_owned(), None),
        (None, true) => ("FAIL (expected no solution)".to_owned(), None),
        (Some(_), false) => ("FAIL (expected a solution)".to_owned(), None),
        (Some((obj_ref, c_ref, h_ref)), true) => {
            let c_nu = result.ledger.c_nu();
            let bound = result.ledger.compression_bound();
            if case.structural_only {
                let structural = (result.objective - c_nu).abs() <= VALUE_TOL
                    && (c_nu - h_x_given_y).abs() <= VALUE_TOL
                    && row_consistent(c_nu, h_x_given_y, bound);
                let check = if structural { "PASS" } else { "FAIL" };
                (
                    format!("{check} (DISCREPANCY: reference prints {obj_ref:.3})"),
                    Some(format!(
                        "reference prints {obj_ref:.3} for all three quantities; direct \
                         computation from P(00)=0.7, others 0.1 gives {c_nu:.3}, and this row \
                         is checked against the identity objective = C_nu = H(X|Y)"
                    )),
                )
            } else {
                let ok = (result.objective - obj_ref).abs() <= VALUE_TOL
                    && (c_nu - c_ref).abs() <= VALUE_TOL
                    && (h_x_given_y - h_ref).abs() <= VALUE_TOL
                    && row_consistent(c_nu, h_x_given_y, bound);
                ((if ok { "PASS" } else { "FAIL" }).to_owned(), None)
            }
        }
    };

    Ok(ReportRow {
        function: case.function.to_owned(),
        nu: case.layers.len(),
        neurons_per_layer: case.layers.to_vec(),
        solution_exists: exists,
        objective: exists.then_some(result.objective),
        c_nu: exists.then(|| result.ledger.c_nu()),
        h_x_given_y,
        check,
        note,
    })
}

pub(crate) fn cmd_table(json: bool) -> Result<ExitCode, String> {
    let threads = worker_threads()?;
    let rows = CASES
        .iter()
        .map(|case| run_case(case, threads))
        .collect::<Result<Vec<ReportRow>, String>>()?;
    let all_pass = rows.iter().all(|r| r.check.starts_with("PASS"));

    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&rows).map_err(|e| e.to_string())?
        );
    } else {
        let fmt = |v: Option<f64>| match v {
            Some(v) => format!("{v:.3}"),
            None => "-".to_owned(),
        };
        println!(
            "{:<8} {:>2}  {:<9} {:<6} {:>9} {:>7} {:>7}  {}",
            "Function", "nu", "Layers", "Exists", "Objective", "C_nu", "H(X|Y)", "Check"
        );
        for row in &rows {
            let layers: Vec<String> =
                row.neurons_per_layer.iter().map(usize::to_string).collect();
            println!(
                "{:<8} {:>2}  {:<9} {:<6} {:>9} {:>7} {:>7}  {}",
                row.function,
                row.nu,
                format!("[{}]", layers.join(" ")),
                if row.solution_exists { "Yes" } else { "No" },
                fmt(row.objective),
                fmt(row.c_nu),
                format!("{:.3}", row.h_x_given_y),
                row.check
            );
        }
        for row in &rows {
            if let Some(note) = &row.note {
                println!("note ({}): {note}", row.function);
            }
        }
    }
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
