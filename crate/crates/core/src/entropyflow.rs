//! Partition-based entropy calculus for layer-to-layer information flow.
//!
//! Every deterministic layer map groups the previous layer's output
//! combinations into blocks that share a target code. The layer entropy drops
//! by exactly the expected internal entropy of those blocks, and the same
//! holds for the entropy conditioned on the target variable. Summing the
//! per-layer drops telescopes: `H(X_0) - H(X_nu) = sum delta_n`, and the
//! log-loss distortion of the whole network is `sum (delta_n - delta'_n)`.
//!
//! All entropies are in bits (base-2 logarithms) with the convention
//! `0 * log2(0) = 0`; comparisons use absolute tolerance [`FLOW_TOL`].

use std::collections::BTreeMap;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::code::Code;
use crate::probmodel::Problem;

/// Absolute tolerance for entropy identities.
pub const FLOW_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum FlowError {
    #[error("mapping covers {got} combinations, layer has {expected}")]
    CoverageMismatch { got: usize, expected: usize },
    #[error("mapping mixes target code widths {a} and {b}")]
    MixedWidths { a: usize, b: usize },
    #[error("mapping is empty")]
    EmptyMapping,
}

/// One live output combination of a layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Combo {
    pub code: Code,
    /// Marginal probability of this combination.
    pub p: f64,
    /// Conditional probability of this combination given each target symbol,
    /// aligned with the state's `y_alphabet`.
    pub p_given_y: Vec<f64>,
}

/// The distribution of a layer's outputs, jointly with the target variable.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    /// 0 for the input layer, incremented by every applied mapping.
    pub layer_index: usize,
    pub y_alphabet: Vec<String>,
    pub y_prior: Vec<f64>,
    /// Live combinations, sorted by code value when produced by this module.
    pub combos: Vec<Combo>,
}

impl LayerState {
    pub fn len(&self) -> usize {
        self.combos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.combos.is_empty()
    }

    pub fn codes(&self) -> Vec<Code> {
        self.combos.iter().map(|c| c.code).collect()
    }

    /// Check the state's distribution invariants to [`FLOW_TOL`].
    pub fn check_invariants(&self) -> Result<(), String> {
        let total: f64 = self.combos.iter().map(|c| c.p).sum();
        if (total - 1.0).abs() > FLOW_TOL {
            return Err(format!("combo probabilities sum to {total}"));
        }
        for (k, _) in self.y_alphabet.iter().enumerate() {
            let cond: f64 = self.combos.iter().map(|c| c.p_given_y[k]).sum();
            if (cond - 1.0).abs() > FLOW_TOL {
                return Err(format!(
                    "conditional distribution for symbol {} sums to {cond}",
                    self.y_alphabet[k]
                ));
            }
        }
        for combo in &self.combos {
            let mixed: f64 = self
                .y_prior
                .iter()
                .zip(&combo.p_given_y)
                .map(|(prior, q)| prior * q)
                .sum();
            if (mixed - combo.p).abs() > FLOW_TOL {
                return Err(format!(
                    "combo {} has p = {} but mixture gives {mixed}",
                    combo.code, combo.p
                ));
            }
        }
        let mut codes = self.codes();
        codes.sort();
        codes.dedup();
        if codes.len() != self.combos.len() {
            return Err("duplicate combo codes".to_owned());
        }
        Ok(())
    }
}

/// A deterministic layer map: one target code per source combination, indexed
/// like the source state's `combos`. Equal target codes merge their sources.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingAssignment {
    pub target_codes: Vec<Code>,
}

impl MappingAssignment {
    pub fn new(target_codes: Vec<Code>) -> Self {
        MappingAssignment { target_codes }
    }

    pub fn len(&self) -> usize {
        self.target_codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target_codes.is_empty()
    }

    /// Width of the target codes; the assignment must be non-empty and
    /// width-uniform (see [`MappingAssignment::validate`]).
    pub fn width(&self) -> usize {
        self.target_codes[0].width()
    }

    pub fn validate(&self, source_len: usize) -> Result<(), FlowError> {
        if self.target_codes.is_empty() {
            return Err(FlowError::EmptyMapping);
        }
        if self.target_codes.len() != source_len {
            return Err(FlowError::CoverageMismatch {
                got: self.target_codes.len(),
                expected: source_len,
            });
        }
        let w = self.target_codes[0].width();
        for code in &self.target_codes[1..] {
            if code.width() != w {
                return Err(FlowError::MixedWidths {
                    a: w,
                    b: code.width(),
                });
            }
        }
        Ok(())
    }

    /// Blocks of the induced partition: target code -> source indices, in
    /// ascending target-code order.
    pub fn blocks(&self) -> BTreeMap<Code, Vec<usize>> {
        let mut blocks: BTreeMap<Code, Vec<usize>> = BTreeMap::new();
        for (i, code) in self.target_codes.iter().enumerate() {
            blocks.entry(*code).or_default().push(i);
        }
        blocks
    }

    /// Restricted-growth encoding of the induced partition: block ids in
    /// order of first appearance.
    pub fn partition_ids(&self) -> Vec<u32> {
        let mut next = 0u32;
        let mut ids: BTreeMap<Code, u32> = BTreeMap::new();
        self.target_codes
            .iter()
            .map(|code| {
                *ids.entry(*code).or_insert_with(|| {
                    let id = next;
                    next += 1;
                    id
                })
            })
            .collect()
    }
}

fn entropy_term(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// The input layer's state: one combination per support element, with
/// conditionals obtained from the problem by Bayes' rule.
pub fn initial_state(problem: &Problem) -> LayerState {
    let y_prior = problem.y_prior();
    let combos = problem
        .support
        .iter()
        .zip(&problem.target)
        .map(|(point, row)| Combo {
            code: point.code,
            p: point.p,
            p_given_y: y_prior
                .iter()
                .zip(row)
                .map(|(prior, q)| if *prior > 0.0 { point.p * q / prior } else { 0.0 })
                .collect(),
        })
        .collect();
    LayerState {
        layer_index: 0,
        y_alphabet: problem.y_alphabet.clone(),
        y_prior,
        combos,
    }
}

/// Push a state through a mapping: merged combinations add their masses,
/// marginally and per target symbol. Output combos are sorted by code.
pub fn apply_mapping(state: &LayerState, map: &MappingAssignment) -> Result<LayerState, FlowError> {
    map.validate(state.len())?;
    let ny = state.y_alphabet.len();
    let mut merged: BTreeMap<Code, (f64, Vec<f64>)> = BTreeMap::new();
    for (combo, target) in state.combos.iter().zip(&map.target_codes) {
        let entry = merged.entry(*target).or_insert_with(|| (0.0, vec![0.0; ny]));
        entry.0 += combo.p;
        for (acc, q) in entry.1.iter_mut().zip(&combo.p_given_y) {
            *acc += q;
        }
    }
    Ok(LayerState {
        layer_index: state.layer_index + 1,
        y_alphabet: state.y_alphabet.clone(),
        y_prior: state.y_prior.clone(),
        combos: merged
            .into_iter()
            .map(|(code, (p, p_given_y))| Combo { code, p, p_given_y })
            .collect(),
    })
}

/// Entropy of the layer's output combinations, in bits.
pub fn layer_entropy(state: &LayerState) -> f64 {
    state.combos.iter().map(|c| entropy_term(c.p)).sum()
}

/// Expected entropy of the layer's outputs conditioned on the target:
/// `sum_y P(y) H(X_n | Y = y)`.
pub fn conditional_layer_entropy(state: &LayerState) -> f64 {
    state
        .y_prior
        .iter()
        .enumerate()
        .map(|(k, prior)| {
            prior
                * state
                    .combos
                    .iter()
                    .map(|c| entropy_term(c.p_given_y[k]))
                    .sum::<f64>()
        })
        .sum()
}

/// `I(X_n; Y) = H(X_n) - H(X_n | Y)`.
pub fn mutual_information(state: &LayerState) -> f64 {
    layer_entropy(state) - conditional_layer_entropy(state)
}

/// Entropy drop across one mapping: the expected internal entropy of the
/// merged blocks. Computed block-wise so candidate mappings can be priced
/// without materializing the next state; always equals
/// `layer_entropy(state) - layer_entropy(apply_mapping(state, map))`.
pub fn delta(state: &LayerState, map: &MappingAssignment) -> f64 {
    assert_eq!(
        map.len(),
        state.len(),
        "mapping covers {} combinations, layer has {}",
        map.len(),
        state.len()
    );
    let mut drop = 0.0;
    for (_, block) in map.blocks() {
        if block.len() < 2 {
            continue;
        }
        let mass: f64 = block.iter().map(|&i| state.combos[i].p).sum();
        if mass <= 0.0 {
            continue;
        }
        for &i in &block {
            let p = state.combos[i].p;
            if p > 0.0 {
                drop += p * (mass / p).log2();
            }
        }
    }
    #[cfg(debug_assertions)]
    {
        let after = apply_mapping(state, map).expect("validated above");
        let direct = layer_entropy(state) - layer_entropy(&after);
        debug_assert!(
            (drop - direct).abs() <= FLOW_TOL,
            "block-wise delta {drop} disagrees with entropy difference {direct}"
        );
    }
    drop
}

/// Conditional entropy drop across one mapping, weighted by the target
/// prior; always equals the difference of [`conditional_layer_entropy`]
/// before and after.
pub fn delta_prime(state: &LayerState, map: &MappingAssignment) -> f64 {
    assert_eq!(
        map.len(),
        state.len(),
        "mapping covers {} combinations, layer has {}",
        map.len(),
        state.len()
    );
    let mut drop = 0.0;
    for (_, block) in map.blocks() {
        if block.len() < 2 {
            continue;
        }
        for (k, prior) in state.y_prior.iter().enumerate() {
            if *prior <= 0.0 {
                continue;
            }
            let mass: f64 = block.iter().map(|&i| state.combos[i].p_given_y[k]).sum();
            if mass <= 0.0 {
                continue;
            }
            for &i in &block {
                let q = state.combos[i].p_given_y[k];
                if q > 0.0 {
                    drop += prior * q * (mass / q).log2();
                }
            }
        }
    }
    #[cfg(debug_assertions)]
    {
        let after = apply_mapping(state, map).expect("validated above");
        let direct = conditional_layer_entropy(state) - conditional_layer_entropy(&after);
        debug_assert!(
            (drop - direct).abs() <= FLOW_TOL,
            "block-wise delta' {drop} disagrees with conditional difference {direct}"
        );
    }
    drop
}

/// Per-layer entropy bookkeeping for one mapping step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerFlow {
    pub delta: f64,
    pub delta_prime: f64,
    /// Entropy of the layer after this step.
    #[serde(rename = "H")]
    pub h: f64,
    /// Conditional entropy of the layer after this step.
    #[serde(rename = "H_given_Y")]
    pub h_given_y: f64,
}

/// Running per-layer ledger of entropy drops for a mapping sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyLedger {
    /// Distortion budget the sequence was planned against.
    pub epsilon: f64,
    pub layers: Vec<LayerFlow>,
}

impl EntropyLedger {
    pub fn new(epsilon: f64) -> Self {
        EntropyLedger {
            epsilon,
            layers: Vec::new(),
        }
    }

    /// Record one step, computing its flow quantities from the states.
    pub fn record(&mut self, before: &LayerState, map: &MappingAssignment, after: &LayerState) {
        self.layers.push(LayerFlow {
            delta: delta(before, map),
            delta_prime: delta_prime(before, map),
            h: layer_entropy(after),
            h_given_y: conditional_layer_entropy(after),
        });
    }

    pub fn nu(&self) -> usize {
        self.layers.len()
    }

    /// Total compression: the summed entropy drops.
    pub fn c_nu(&self) -> f64 {
        self.layers.iter().map(|l| l.delta).sum()
    }

    /// Log-loss distortion: the summed gaps between marginal and conditional
    /// drops.
    pub fn distortion(&self) -> f64 {
        self.layers.iter().map(|l| l.delta - l.delta_prime).sum()
    }

    /// Depth-weighted compression: layer 1's drop counts `nu` times, the
    /// final layer's once.
    pub fn objective(&self) -> f64 {
        let nu = self.nu();
        self.layers
            .iter()
            .enumerate()
            .map(|(i, l)| (nu - i) as f64 * l.delta)
            .sum()
    }

    /// Upper bound on [`EntropyLedger::c_nu`]: the conditional drops
    /// telescope to the conditional entropy dissipated end to end, and total
    /// compression can exceed that only by the distortion budget.
    pub fn compression_bound(&self) -> f64 {
        self.layers.iter().map(|l| l.delta_prime).sum::<f64>() + self.epsilon
    }
}

impl Serialize for EntropyLedger {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("EntropyLedger", 5)?;
        s.serialize_field("epsilon", &self.epsilon)?;
        s.serialize_field("layers", &self.layers)?;
        s.serialize_field("objective", &self.objective())?;
        s.serialize_field("c_nu", &self.c_nu())?;
        s.serialize_field("distortion", &self.distortion())?;
        s.end()
    }
}

/// Distortion of a completed sequence. The ledger's telescoped sum is the
/// primary route; in debug builds it is checked against the mutual-information
/// difference of the end states, which must agree to [`FLOW_TOL`].
pub fn distortion(ledger: &EntropyLedger, initial: &LayerState, last: &LayerState) -> f64 {
    let telescoped = ledger.distortion();
    let via_states = mutual_information(initial) - mutual_information(last);
    debug_assert!(
        (telescoped - via_states).abs() <= FLOW_TOL,
        "distortion routes disagree: {telescoped} vs {via_states}"
    );
    let _ = via_states;
    telescoped
}

/// Mutual information between the input and each layer:
/// `I(X; X_i) = H(X) - sum_{j <= i} delta_j`. Nonincreasing in `i`.
pub fn mutual_info_with_input(ledger: &EntropyLedger, problem: &Problem) -> Vec<f64> {
    let h_input: f64 = problem.support.iter().map(|s| entropy_term(s.p)).sum();
    let mut running = h_input;
    ledger
        .layers
        .iter()
        .map(|l| {
            running -= l.delta;
            running
        })
        .collect()
}

/// Total compression against its budgeted upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompressionBound {
    pub c_nu: f64,
    /// `H(X|Y) - H(X_nu|Y) + epsilon`.
    pub bound: f64,
    pub ok: bool,
}

/// Check the compression bound: the summed drops can exceed the conditional
/// entropy actually dissipated only by the distortion budget.
pub fn compression_and_bound(
    ledger: &EntropyLedger,
    initial: &LayerState,
    last: &LayerState,
) -> CompressionBound {
    let c_nu = ledger.c_nu();
    let bound = conditional_layer_entropy(initial) - conditional_layer_entropy(last)
        + ledger.epsilon;
    CompressionBound {
        c_nu,
        bound,
        ok: c_nu <= bound + FLOW_TOL,
    }
}
