//! Exact entropy-flow analysis for feed-forward binary threshold networks.
//!
//! A network over a finite input alphabet maps each layer's output
//! combinations onto the next layer's codes; every layer therefore induces a
//! partition of the previous layer's combinations, and entropy can only drop
//! from layer to layer. This crate computes those drops exactly (in bits),
//! tracks the conditional drops with respect to a supervised target, and
//! searches for the per-layer mapping sequence that maximizes the
//! depth-weighted compression subject to a log-loss distortion budget and to
//! what single threshold neurons can actually implement.
//!
//! The pieces:
//!
//! * [`probmodel`] — problem instances (input distribution, target
//!   conditional, topology), JSON ingestion, and builtin boolean gates.
//! * [`entropyflow`] — layer states, mapping push-forward, entropy /
//!   conditional-entropy drops, distortion, and the compression bound.
//! * [`feasibility`] — an exact rational separability oracle deciding which
//!   labelings a single threshold neuron can realize, plus integer weight
//!   synthesis.
//! * [`ibsolver`] — exhaustive depth-first search over per-layer code
//!   assignments with admissible pruning, state dedupe, and a deterministic
//!   tie-break.

pub mod code;
pub mod entropyflow;
pub mod feasibility;
pub mod ibsolver;
pub mod probmodel;

pub use code::Code;
pub use entropyflow::{
    apply_mapping, compression_and_bound, conditional_layer_entropy, delta, delta_prime,
    distortion, initial_state, layer_entropy, mutual_info_with_input, mutual_information,
    CompressionBound, EntropyLedger, LayerFlow, LayerState, MappingAssignment,
};
pub use feasibility::{
    check_separable, enumerate_threshold_functions, layer_feasible, synthesize_layer_weights,
    FeasibilityCache, LayerFeasibility, LayerRealization, LayerWeights, Separability,
    SeparabilityCertificate,
};
pub use ibsolver::{
    bound_remaining, enumerate_assignments, solve, SolveOptions, SolveResult, SolveStatus,
};
pub use probmodel::{builtin_gate, load_problem, Gate, GateDistribution, Problem, Topology};
