//! Supervised problem instances over finite alphabets.
//!
//! A [`Problem`] is an input distribution over fixed-width bit-vectors plus,
//! for every support element, a conditional distribution over a finite target
//! alphabet. Deterministic targets (boolean gates) are point masses. All
//! probabilities are validated on construction; zero-mass support elements
//! are rejected outright because they contribute nothing to any entropy term
//! and their role in separability geometry is ambiguous.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::code::{Code, MAX_WIDTH};

/// Absolute tolerance for probability normalization checks.
pub const PROB_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed problem document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("input_bits must be between 1 and {MAX_WIDTH}, got {0}")]
    InputBits(usize),
    #[error("distribution sums to {0}")]
    DistributionSum(f64),
    #[error("bit length mismatch: \"{value}\" under input_bits={expected}")]
    BitLength { value: String, expected: usize },
    #[error("invalid bitstring \"{value}\": {reason}")]
    BadBitstring { value: String, reason: String },
    #[error("duplicate support bitvector {0}")]
    Duplicate(Code),
    #[error("nonpositive probability {p} for {code}; remove zero-mass inputs")]
    NonpositiveProbability { code: Code, p: f64 },
    #[error("empty support")]
    EmptySupport,
    #[error("missing target row for {0}")]
    MissingTarget(Code),
    #[error("target row for unknown input \"{0}\"")]
    UnknownTarget(String),
    #[error("target row for {code} sums to {sum}")]
    TargetRowSum { code: Code, sum: f64 },
    #[error("negative target probability {p} for {code} -> \"{symbol}\"")]
    NegativeTarget { code: Code, symbol: String, p: f64 },
    #[error("gate arity must be 2 or 3, got {0}")]
    InvalidArity(usize),
    #[error("explicit distribution has {got} entries, expected {expected}")]
    ExplicitLen { got: usize, expected: usize },
    #[error("topology needs at least one layer")]
    EmptyTopology,
    #[error("layer {layer} has {neurons} neurons; every layer needs at least 1")]
    EmptyLayer { layer: usize, neurons: usize },
}

/// One input bit-vector together with its probability mass.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportPoint {
    pub code: Code,
    pub p: f64,
}

/// A validated supervised problem instance.
///
/// `target[i][k]` is `P(Y = y_alphabet[k] | X = support[i].code)`. Support is
/// sorted by code value; the alphabet is sorted lexicographically and keeps
/// only symbols with positive prior.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub input_bits: usize,
    pub support: Vec<SupportPoint>,
    pub y_alphabet: Vec<String>,
    pub target: Vec<Vec<f64>>,
}

impl Problem {
    /// Validate and normalize raw parts into a `Problem`.
    ///
    /// `rows` maps each support code to `(probability, conditional over
    /// symbols)`. Symbols with zero prior are dropped from the alphabet.
    pub fn new(
        input_bits: usize,
        rows: Vec<(Code, f64, BTreeMap<String, f64>)>,
    ) -> Result<Self, ProblemError> {
        if !(1..=MAX_WIDTH).contains(&input_bits) {
            return Err(ProblemError::InputBits(input_bits));
        }
        if rows.is_empty() {
            return Err(ProblemError::EmptySupport);
        }
        let mut seen = BTreeSet::new();
        let mut total = 0.0;
        for (code, p, row) in &rows {
            if code.width() != input_bits {
                return Err(ProblemError::BitLength {
                    value: code.to_string(),
                    expected: input_bits,
                });
            }
            if !seen.insert(*code) {
                return Err(ProblemError::Duplicate(*code));
            }
            if !(*p > 0.0) {
                return Err(ProblemError::NonpositiveProbability { code: *code, p: *p });
            }
            total += p;
            let mut row_sum = 0.0;
            for (symbol, q) in row {
                if *q < 0.0 {
                    return Err(ProblemError::NegativeTarget {
                        code: *code,
                        symbol: symbol.clone(),
                        p: *q,
                    });
                }
                row_sum += q;
            }
            if (row_sum - 1.0).abs() > PROB_TOL {
                return Err(ProblemError::TargetRowSum {
                    code: *code,
                    sum: row_sum,
                });
            }
        }
        if (total - 1.0).abs() > PROB_TOL {
            return Err(ProblemError::DistributionSum(total));
        }

        let mut rows = rows;
        rows.sort_by_key(|(code, _, _)| *code);

        // Alphabet: sorted symbols whose prior mass is positive.
        let mut prior: BTreeMap<String, f64> = BTreeMap::new();
        for (_, p, row) in &rows {
            for (symbol, q) in row {
                *prior.entry(symbol.clone()).or_insert(0.0) += p * q;
            }
        }
        let y_alphabet: Vec<String> = prior
            .iter()
            .filter(|(_, mass)| **mass > 0.0)
            .map(|(s, _)| s.clone())
            .collect();

        let mut support = Vec::with_capacity(rows.len());
        let mut target = Vec::with_capacity(rows.len());
        for (code, p, row) in rows {
            support.push(SupportPoint { code, p });
            target.push(
                y_alphabet
                    .iter()
                    .map(|s| row.get(s).copied().unwrap_or(0.0))
                    .collect(),
            );
        }
        Ok(Problem {
            input_bits,
            support,
            y_alphabet,
            target,
        })
    }

    /// Prior of each target symbol, aligned with `y_alphabet`.
    pub fn y_prior(&self) -> Vec<f64> {
        let mut prior = vec![0.0; self.y_alphabet.len()];
        for (point, row) in self.support.iter().zip(&self.target) {
            for (mass, q) in prior.iter_mut().zip(row) {
                *mass += point.p * q;
            }
        }
        prior
    }

    pub fn from_json_str(text: &str) -> Result<Self, ProblemError> {
        let doc: ProblemDoc = serde_json::from_str(text)?;
        doc.into_problem()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&ProblemDoc::from_problem(self))
            .expect("problem document serializes")
    }
}

/// Load and validate a problem from a JSON file.
pub fn load_problem(path: impl AsRef<Path>) -> Result<Problem, ProblemError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ProblemError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Problem::from_json_str(&text)
}

/// On-disk document shape.
///
/// ```json
/// {
///   "input_bits": 2,
///   "distribution": { "00": 0.25, "01": 0.25, "10": 0.25, "11": 0.25 },
///   "target": { "00": "0", "01": { "1": 1.0 }, "10": "1", "11": "1" }
/// }
/// ```
#[derive(Serialize, Deserialize)]
struct ProblemDoc {
    input_bits: usize,
    distribution: BTreeMap<String, f64>,
    target: BTreeMap<String, TargetDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TargetDoc {
    Point(String),
    Dist(BTreeMap<String, f64>),
}

impl ProblemDoc {
    fn into_problem(self) -> Result<Problem, ProblemError> {
        let parse_code = |s: &str, expected: usize| -> Result<Code, ProblemError> {
            if s.len() != expected {
                return Err(ProblemError::BitLength {
                    value: s.to_owned(),
                    expected,
                });
            }
            s.parse().map_err(|e: crate::code::CodeParseError| {
                ProblemError::BadBitstring {
                    value: s.to_owned(),
                    reason: e.to_string(),
                }
            })
        };
        if !(1..=MAX_WIDTH).contains(&self.input_bits) {
            return Err(ProblemError::InputBits(self.input_bits));
        }
        let mut rows = Vec::new();
        for (bits, p) in &self.distribution {
            let code = parse_code(bits, self.input_bits)?;
            let row = match self.target.get(bits) {
                None => return Err(ProblemError::MissingTarget(code)),
                Some(TargetDoc::Point(symbol)) => {
                    BTreeMap::from([(symbol.clone(), 1.0)])
                }
                Some(TargetDoc::Dist(dist)) => dist.clone(),
            };
            rows.push((code, *p, row));
        }
        for bits in self.target.keys() {
            if !self.distribution.contains_key(bits) {
                return Err(ProblemError::UnknownTarget(bits.clone()));
            }
        }
        Problem::new(self.input_bits, rows)
    }

    fn from_problem(problem: &Problem) -> Self {
        let mut distribution = BTreeMap::new();
        let mut target = BTreeMap::new();
        for (point, row) in problem.support.iter().zip(&problem.target) {
            let bits = point.code.to_string();
            distribution.insert(bits.clone(), point.p);
            let point_mass = row
                .iter()
                .position(|q| *q == 1.0)
                .filter(|_| row.iter().filter(|q| **q != 0.0).count() == 1);
            let doc = match point_mass {
                Some(k) => TargetDoc::Point(problem.y_alphabet[k].clone()),
                None => TargetDoc::Dist(
                    problem
                        .y_alphabet
                        .iter()
                        .zip(row)
                        .filter(|(_, q)| **q != 0.0)
                        .map(|(s, q)| (s.clone(), *q))
                        .collect(),
                ),
            };
            target.insert(bits, doc);
        }
        ProblemDoc {
            input_bits: problem.input_bits,
            distribution,
            target,
        }
    }
}

/// Builtin boolean gates for the bundled case study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    And,
    Or,
    Xor,
}

impl Gate {
    pub fn eval(&self, code: Code) -> bool {
        let bits = (0..code.width()).map(|j| code.bit(j));
        match self {
            Gate::And => bits.fold(true, |acc, b| acc && b),
            Gate::Or => bits.fold(false, |acc, b| acc || b),
            Gate::Xor => bits.fold(false, |acc, b| acc ^ b),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Gate::And => "AND",
            Gate::Or => "OR",
            Gate::Xor => "XOR",
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Input distribution for [`builtin_gate`].
#[derive(Debug, Clone, PartialEq)]
pub enum GateDistribution {
    Uniform,
    /// One probability per input combination, in ascending code order.
    Explicit(Vec<f64>),
}

/// Build the deterministic gate problem on `arity` inputs (2 or 3).
pub fn builtin_gate(
    gate: Gate,
    arity: usize,
    distribution: GateDistribution,
) -> Result<Problem, ProblemError> {
    if arity != 2 && arity != 3 {
        return Err(ProblemError::InvalidArity(arity));
    }
    let n = 1usize << arity;
    let probs = match distribution {
        GateDistribution::Uniform => vec![1.0 / n as f64; n],
        GateDistribution::Explicit(probs) => {
            if probs.len() != n {
                return Err(ProblemError::ExplicitLen {
                    got: probs.len(),
                    expected: n,
                });
            }
            probs
        }
    };
    let rows = Code::all(arity)
        .zip(probs)
        .map(|(code, p)| {
            let symbol = if gate.eval(code) { "1" } else { "0" };
            (code, p, BTreeMap::from([(symbol.to_owned(), 1.0)]))
        })
        .collect();
    Problem::new(arity, rows)
}

/// Network topology: layer widths for a fixed binary-threshold activation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub neurons_per_layer: Vec<usize>,
    pub activation: Activation,
}

/// The only supported neuron output function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    BinaryThreshold,
}

impl Topology {
    pub fn new(neurons_per_layer: Vec<usize>) -> Result<Self, ProblemError> {
        if neurons_per_layer.is_empty() {
            return Err(ProblemError::EmptyTopology);
        }
        for (layer, &neurons) in neurons_per_layer.iter().enumerate() {
            if neurons == 0 {
                return Err(ProblemError::EmptyLayer {
                    layer: layer + 1,
                    neurons,
                });
            }
        }
        Ok(Topology {
            neurons_per_layer,
            activation: Activation::BinaryThreshold,
        })
    }

    pub fn nu(&self) -> usize {
        self.neurons_per_layer.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_and_gate() {
        let p = builtin_gate(Gate::And, 2, GateDistribution::Uniform).unwrap();
        assert_eq!(p.support.len(), 4);
        assert_eq!(p.y_alphabet, vec!["0", "1"]);
        assert!(p.support.iter().all(|s| (s.p - 0.25).abs() < 1e-12));
        // AND is 1 only on 11.
        assert_eq!(p.target[3], vec![0.0, 1.0]);
        assert_eq!(p.target[0], vec![1.0, 0.0]);
    }

    #[test]
    fn starred_or_gate() {
        let p = builtin_gate(
            Gate::Or,
            2,
            GateDistribution::Explicit(vec![0.7, 0.1, 0.1, 0.1]),
        )
        .unwrap();
        assert_eq!(p.support[0].p, 0.7);
        let prior = p.y_prior();
        assert!((prior[0] - 0.7).abs() < 1e-12);
        assert!((prior[1] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn xor3_uniform() {
        let p = builtin_gate(Gate::Xor, 3, GateDistribution::Uniform).unwrap();
        assert_eq!(p.support.len(), 8);
        assert!(p.support.iter().all(|s| (s.p - 0.125).abs() < 1e-12));
    }

    #[test]
    fn arity_checked() {
        assert!(matches!(
            builtin_gate(Gate::And, 4, GateDistribution::Uniform),
            Err(ProblemError::InvalidArity(4))
        ));
        assert!(matches!(
            builtin_gate(Gate::And, 2, GateDistribution::Explicit(vec![0.5, 0.5])),
            Err(ProblemError::ExplicitLen { got: 2, expected: 4 })
        ));
    }

    #[test]
    fn load_rejects_bad_sum() {
        let text = r#"{
            "input_bits": 2,
            "distribution": { "00": 0.3, "01": 0.3, "10": 0.2, "11": 0.1 },
            "target": { "00": "0", "01": "1", "10": "1", "11": "1" }
        }"#;
        let err = Problem::from_json_str(text).unwrap_err();
        assert!(err.to_string().starts_with("distribution sums to 0.9"));
    }

    #[test]
    fn load_rejects_bit_length_mismatch() {
        let text = r#"{
            "input_bits": 2,
            "distribution": { "010": 1.0 },
            "target": { "010": "0" }
        }"#;
        let err = Problem::from_json_str(text).unwrap_err();
        assert!(err.to_string().contains("bit length mismatch"));
    }

    #[test]
    fn load_rejects_zero_mass() {
        let text = r#"{
            "input_bits": 1,
            "distribution": { "0": 1.0, "1": 0.0 },
            "target": { "0": "0", "1": "1" }
        }"#;
        let err = Problem::from_json_str(text).unwrap_err();
        assert!(err.to_string().contains("zero-mass"));
    }

    #[test]
    fn load_rejects_bad_target_row() {
        let text = r#"{
            "input_bits": 1,
            "distribution": { "0": 0.5, "1": 0.5 },
            "target": { "0": { "a": 0.5, "b": 0.4 }, "1": "a" }
        }"#;
        let err = Problem::from_json_str(text).unwrap_err();
        assert!(err.to_string().contains("target row for 0 sums to 0.9"));
    }

    #[test]
    fn load_rejects_missing_target() {
        let text = r#"{
            "input_bits": 1,
            "distribution": { "0": 0.5, "1": 0.5 },
            "target": { "0": "a" }
        }"#;
        let err = Problem::from_json_str(text).unwrap_err();
        assert!(err.to_string().contains("missing target row for 1"));
    }

    #[test]
    fn stochastic_targets_supported() {
        let text = r#"{
            "input_bits": 1,
            "distribution": { "0": 0.5, "1": 0.5 },
            "target": { "0": { "a": 0.25, "b": 0.75 }, "1": "b" }
        }"#;
        let p = Problem::from_json_str(text).unwrap();
        assert_eq!(p.y_alphabet, vec!["a", "b"]);
        assert_eq!(p.target[0], vec![0.25, 0.75]);
        assert_eq!(p.target[1], vec![0.0, 1.0]);
    }

    #[test]
    fn gate_serialization_round_trips() {
        for gate in [Gate::And, Gate::Or, Gate::Xor] {
            for arity in [2, 3] {
                let p = builtin_gate(gate, arity, GateDistribution::Uniform).unwrap();
                let back = Problem::from_json_str(&p.to_json_string()).unwrap();
                assert_eq!(p, back);
            }
        }
        let p = builtin_gate(
            Gate::Or,
            2,
            GateDistribution::Explicit(vec![0.7, 0.1, 0.1, 0.1]),
        )
        .unwrap();
        let back = Problem::from_json_str(&p.to_json_string()).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn topology_validated() {
        assert!(Topology::new(vec![]).is_err());
        assert!(Topology::new(vec![2, 0, 1]).is_err());
        let t = Topology::new(vec![2, 1]).unwrap();
        assert_eq!(t.nu(), 2);
    }
}
