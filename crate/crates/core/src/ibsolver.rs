//! Exact search for the compression-maximizing feasible mapping sequence.
//!
//! The search variable is the per-layer code assignment, not just the induced
//! partition: two assignments that merge the same combinations under
//! different codes place different point sets in front of the next layer, so
//! their downstream feasibility can differ. Layers are explored depth-first;
//! candidate assignments are generated in lexicographic code order, filtered
//! by the separability oracle and the running distortion budget, priced by
//! their entropy drops, and pruned with an admissible bound on the remaining
//! weighted objective.
//!
//! Suffix optima depend only on the reached state (the distortion already
//! spent is itself a function of the state), so fully-explored subproblems
//! memoize cleanly and revisited states are deduplicated.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering as AtomicOrdering};
use std::sync::{Arc, Mutex};

use serde::Serialize;
use thiserror::Error;

use crate::code::Code;
use crate::entropyflow::{
    apply_mapping, conditional_layer_entropy, delta, delta_prime, initial_state, layer_entropy,
    mutual_information, EntropyLedger, LayerState, MappingAssignment,
};
use crate::feasibility::{
    synthesize_layer_weights, FeasibilityCache, LayerFeasibility, LayerRealization,
};
use crate::probmodel::{Problem, Topology};

/// Most combinations the input layer may carry into a search.
pub const MAX_SOURCE_COMBOS: usize = 64;
/// Widest layer the search will enumerate codes for.
pub const MAX_LAYER_WIDTH: usize = 8;

/// Objective values closer than this are treated as ties and resolved by the
/// deterministic mapping order.
const TIE_TOL: f64 = 1e-12;
/// Slack allowed on the distortion constraint.
const DISTORTION_SLACK: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("input layer has {got} combinations, above the search limit of {MAX_SOURCE_COMBOS}")]
    TooManyCombos { got: usize },
    #[error("layer {layer} is {got} neurons wide, above the search limit of {MAX_LAYER_WIDTH}")]
    WidthTooLarge { layer: usize, got: usize },
}

/// Knobs for [`solve`].
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Distortion budget in bits. The default realizes the budget-free
    /// regime while absorbing floating-point noise.
    pub epsilon: f64,
    /// Prune subtrees whose admissible bound cannot beat the incumbent.
    pub prune: bool,
    /// Memoize suffix optima keyed by the reached state.
    pub dedupe_states: bool,
    /// Search-node budget; one node per candidate assignment considered.
    pub max_nodes: u64,
    /// Worker threads for the first layer's branches. The completed result
    /// is bit-identical for any thread count.
    pub threads: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            epsilon: 1e-9,
            prune: true,
            dedupe_states: true,
            max_nodes: u64::MAX,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    BudgetExhausted,
}

/// One merge of a layer's trace: which source codes landed on which target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceMerge {
    pub sources: Vec<Code>,
    pub target: Code,
}

/// Outcome of a search.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Depth-weighted compression of the returned sequence; 0 when none.
    pub objective: f64,
    pub ledger: EntropyLedger,
    pub mappings: Vec<MappingAssignment>,
    pub realizations: Vec<LayerRealization>,
    /// Per-layer merges, one entry per distinct target code.
    pub trace: Vec<Vec<TraceMerge>>,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// The documented JSON shape of a solve outcome.
    pub fn report(&self) -> Result<SolveReport, crate::feasibility::FeasibilityError> {
        let mut layers = Vec::with_capacity(self.mappings.len());
        for (i, flow) in self.ledger.layers.iter().enumerate() {
            let weights = synthesize_layer_weights(&self.realizations[i])?;
            let mapping = self.trace[i]
                .iter()
                .flat_map(|merge| {
                    merge
                        .sources
                        .iter()
                        .map(|s| (s.to_string(), merge.target.to_string()))
                })
                .collect();
            layers.push(LayerReport {
                delta: flow.delta,
                delta_prime: flow.delta_prime,
                mapping,
                weights: weights.weights,
                biases: weights.biases,
            });
        }
        let solved = !self.mappings.is_empty();
        Ok(SolveReport {
            status: self.status,
            objective: solved.then_some(self.objective),
            distortion: solved.then_some(self.ledger.distortion()),
            c_nu: solved.then_some(self.ledger.c_nu()),
            bound: solved.then_some(self.ledger.compression_bound()),
            epsilon: self.ledger.epsilon,
            layers,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub distortion: Option<f64>,
    pub c_nu: Option<f64>,
    pub bound: Option<f64>,
    pub epsilon: f64,
    pub layers: Vec<LayerReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LayerReport {
    pub delta: f64,
    pub delta_prime: f64,
    pub mapping: BTreeMap<String, String>,
    pub weights: Vec<Vec<i64>>,
    pub biases: Vec<i64>,
}

/// All `(2^width)^k` code assignments for a `k`-combination state, in
/// lexicographic order of the target-code tuple (first combination most
/// significant).
pub fn enumerate_assignments(state: &LayerState, width: usize) -> Assignments {
    assert!(
        (1..=MAX_LAYER_WIDTH).contains(&width),
        "layer width {width} out of range 1..={MAX_LAYER_WIDTH}"
    );
    Assignments {
        width,
        digits: vec![0; state.len()],
        done: state.is_empty(),
    }
}

pub struct Assignments {
    width: usize,
    digits: Vec<u16>,
    done: bool,
}

impl Iterator for Assignments {
    type Item = MappingAssignment;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = MappingAssignment::new(
            self.digits
                .iter()
                .map(|&d| Code::new(self.width, d))
                .collect(),
        );
        // Odometer: last digit fastest.
        let top = (1u16 << self.width) - 1;
        let mut i = self.digits.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.digits[i] < top {
                self.digits[i] += 1;
                break;
            }
            self.digits[i] = 0;
        }
        Some(item)
    }
}

/// Admissible upper bound on the objective still collectable from `state` at
/// `stage` (layers `stage+1 ..= nu` pending): every remaining drop is capped
/// by the state's entropy and, through the distortion budget, by its
/// conditional entropy plus the unspent budget.
pub fn bound_remaining(
    state: &LayerState,
    stage: usize,
    nu: usize,
    distortion_spent: f64,
    epsilon: f64,
) -> f64 {
    assert!(stage < nu, "stage {stage} is not before nu {nu}");
    let h = layer_entropy(state);
    let h_given_y = conditional_layer_entropy(state);
    suffix_bound(h, h_given_y, stage, nu, epsilon - distortion_spent)
}

fn suffix_bound(h: f64, h_given_y: f64, stage: usize, nu: usize, budget_left: f64) -> f64 {
    let weight = (nu - stage) as f64;
    (weight * h.min(h_given_y + budget_left)).max(0.0)
}

/// A suffix of the mapping sequence, shared structurally between memoized
/// subproblems. `objective` covers this mapping and everything after it.
struct Chain {
    objective: f64,
    mapping: MappingAssignment,
    rest: Suffix,
}

/// `None` when no layers remain.
type Suffix = Option<Arc<Chain>>;
/// `None` when no feasible suffix exists.
type Outcome = Option<Suffix>;

fn suffix_objective(suffix: &Suffix) -> f64 {
    suffix.as_ref().map_or(0.0, |c| c.objective)
}

/// Deterministic order among equal-objective mappings: first by the induced
/// partition, comparing block ids from the last combination backwards (which
/// favors merging high-order combinations into earlier blocks), then by the
/// target-code tuple.
fn mapping_tie_cmp(a: &MappingAssignment, b: &MappingAssignment) -> Ordering {
    let pa = a.partition_ids();
    let pb = b.partition_ids();
    pa.iter()
        .rev()
        .cmp(pb.iter().rev())
        .then_with(|| a.target_codes.cmp(&b.target_codes))
}

fn chain_tie_cmp(a: &Suffix, b: &Suffix) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (Some(ca), Some(cb)) => {
            mapping_tie_cmp(&ca.mapping, &cb.mapping).then_with(|| chain_tie_cmp(&ca.rest, &cb.rest))
        }
        // Suffixes compared at one stage always have equal length.
        (None, Some(_)) | (Some(_), None) => unreachable!("suffix lengths differ"),
    }
}

type MemoKey = (usize, Vec<(u16, u64, Vec<u64>)>);

fn memo_key(stage: usize, state: &LayerState) -> MemoKey {
    let combos = state
        .combos
        .iter()
        .map(|c| {
            (
                c.code.value(),
                c.p.to_bits(),
                c.p_given_y.iter().map(|q| q.to_bits()).collect(),
            )
        })
        .collect();
    (stage, combos)
}

struct Search {
    widths: Vec<usize>,
    nu: usize,
    epsilon: f64,
    prune: bool,
    dedupe: bool,
    i_xy: f64,
    max_nodes: u64,
    nodes: AtomicU64,
    exhausted: AtomicBool,
    memo: Mutex<HashMap<MemoKey, Outcome>>,
    feasibility: FeasibilityCache,
}

impl Search {
    fn charge_node(&self) -> bool {
        if self.nodes.fetch_add(1, AtomicOrdering::Relaxed) >= self.max_nodes {
            self.exhausted.store(true, AtomicOrdering::Relaxed);
            return false;
        }
        true
    }

    fn is_exhausted(&self) -> bool {
        self.exhausted.load(AtomicOrdering::Relaxed)
    }

    /// Step one candidate at `stage`: oracle, budget, pricing. Returns the
    /// candidate's gain and successor state, or `None` when filtered out.
    fn step(
        &self,
        stage: usize,
        state: &LayerState,
        spent_before: f64,
        map: &MappingAssignment,
    ) -> Option<(f64, f64, LayerState)> {
        let feasible = self
            .feasibility
            .layer_feasible(state, map)
            .expect("query sizes validated by solve");
        if !feasible.is_feasible() {
            return None;
        }
        let d = delta(state, map);
        let dp = delta_prime(state, map);
        let spent_after = spent_before + (d - dp);
        if spent_after > self.epsilon + DISTORTION_SLACK {
            return None;
        }
        let gain = (self.nu - stage) as f64 * d;
        let next = apply_mapping(state, map).expect("assignment covers the state");
        Some((gain, spent_after, next))
    }

    fn child_bound(&self, stage: usize, next: &LayerState, spent_after: f64) -> f64 {
        if stage + 1 == self.nu {
            0.0
        } else {
            suffix_bound(
                layer_entropy(next),
                conditional_layer_entropy(next),
                stage + 1,
                self.nu,
                self.epsilon - spent_after,
            )
        }
    }

    fn best_suffix(&self, stage: usize, state: &LayerState) -> Outcome {
        if stage == self.nu {
            return Some(None);
        }
        let key = memo_key(stage, state);
        if self.dedupe {
            if let Some(hit) = self.memo.lock().unwrap().get(&key) {
                return hit.clone();
            }
        }
        let spent_before = self.i_xy - mutual_information(state);
        let mut best: Suffix = None;
        let mut found = false;
        let mut complete = true;
        for map in enumerate_assignments(state, self.widths[stage]) {
            if !self.charge_node() {
                complete = false;
                break;
            }
            let Some((gain, spent_after, next)) = self.step(stage, state, spent_before, &map)
            else {
                continue;
            };
            if self.prune && found {
                let upper = gain + self.child_bound(stage, &next, spent_after);
                if upper < suffix_objective(&best) - TIE_TOL {
                    continue;
                }
            }
            let sub = self.best_suffix(stage + 1, &next);
            if self.is_exhausted() {
                complete = false;
            }
            if let Some(sub) = sub {
                let total = gain + suffix_objective(&sub);
                let candidate: Suffix = Some(Arc::new(Chain {
                    objective: total,
                    mapping: map,
                    rest: sub,
                }));
                let replace = if !found {
                    true
                } else if total > suffix_objective(&best) + TIE_TOL {
                    true
                } else if total >= suffix_objective(&best) - TIE_TOL {
                    chain_tie_cmp(&candidate, &best) == Ordering::Less
                } else {
                    false
                };
                if replace {
                    best = candidate;
                    found = true;
                }
            }
            if !complete {
                break;
            }
        }
        let outcome: Outcome = if found { Some(best) } else { None };
        if self.dedupe && complete {
            self.memo.lock().unwrap().insert(key, outcome.clone());
        }
        outcome
    }

    /// Evaluate first-layer branches on worker threads. Each candidate's
    /// value is a suffix optimum, independent of visit order, so reducing in
    /// candidate order reproduces the sequential result bit for bit.
    fn root_parallel(&self, initial: &LayerState, threads: usize) -> Outcome {
        let k = initial.len() as u32;
        let width = self.widths[0] as u32;
        let Some(total) = 1u64.checked_shl(width * k) else {
            return self.best_suffix(0, initial);
        };
        let cursor = AtomicU64::new(0);
        let mut evaluated: Vec<(u64, Suffix)> = Vec::new();
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for _ in 0..threads {
                handles.push(scope.spawn(|| {
                    let mut local: Vec<(u64, Suffix)> = Vec::new();
                    let mut local_best = f64::NEG_INFINITY;
                    loop {
                        let idx = cursor.fetch_add(1, AtomicOrdering::Relaxed);
                        if idx >= total || self.is_exhausted() {
                            break;
                        }
                        if !self.charge_node() {
                            break;
                        }
                        let map = assignment_at(idx, initial.len(), self.widths[0]);
                        let Some((gain, spent_after, next)) =
                            self.step(0, initial, 0.0, &map)
                        else {
                            continue;
                        };
                        if self.prune
                            && gain + self.child_bound(0, &next, spent_after)
                                < local_best - TIE_TOL
                        {
                            continue;
                        }
                        if let Some(sub) = self.best_suffix(1, &next) {
                            let total_obj = gain + suffix_objective(&sub);
                            local_best = local_best.max(total_obj);
                            local.push((
                                idx,
                                Some(Arc::new(Chain {
                                    objective: total_obj,
                                    mapping: map,
                                    rest: sub,
                                })),
                            ));
                        }
                    }
                    local
                }));
            }
            for handle in handles {
                evaluated.extend(handle.join().expect("search worker panicked"));
            }
        });
        evaluated.sort_by_key(|(idx, _)| *idx);
        let mut best: Suffix = None;
        let mut found = false;
        for (_, candidate) in evaluated {
            let total = suffix_objective(&candidate);
            let replace = if !found {
                true
            } else if total > suffix_objective(&best) + TIE_TOL {
                true
            } else if total >= suffix_objective(&best) - TIE_TOL {
                chain_tie_cmp(&candidate, &best) == Ordering::Less
            } else {
                false
            };
            if replace {
                best = candidate;
                found = true;
            }
        }
        if found {
            Some(best)
        } else {
            None
        }
    }
}

fn assignment_at(idx: u64, k: usize, width: usize) -> MappingAssignment {
    let base = 1u64 << width;
    let mut digits = vec![0u16; k];
    let mut rest = idx;
    for slot in digits.iter_mut().rev() {
        *slot = (rest % base) as u16;
        rest /= base;
    }
    MappingAssignment::new(digits.into_iter().map(|d| Code::new(width, d)).collect())
}

/// Search every feasible mapping sequence for the given topology and return
/// the one maximizing the depth-weighted compression within the distortion
/// budget. Infeasible only after the first layer's assignments are exhausted
/// without any sequence satisfying both the budget and per-layer
/// realizability.
pub fn solve(
    problem: &Problem,
    topology: &Topology,
    options: &SolveOptions,
) -> Result<SolveResult, SolveError> {
    let initial = initial_state(problem);
    if initial.len() > MAX_SOURCE_COMBOS {
        return Err(SolveError::TooManyCombos { got: initial.len() });
    }
    for (i, &width) in topology.neurons_per_layer.iter().enumerate() {
        if width == 0 || width > MAX_LAYER_WIDTH {
            return Err(SolveError::WidthTooLarge {
                layer: i + 1,
                got: width,
            });
        }
    }

    let search = Search {
        widths: topology.neurons_per_layer.clone(),
        nu: topology.nu(),
        epsilon: options.epsilon,
        prune: options.prune,
        dedupe: options.dedupe_states,
        i_xy: mutual_information(&initial),
        max_nodes: options.max_nodes,
        nodes: AtomicU64::new(0),
        exhausted: AtomicBool::new(false),
        memo: Mutex::new(HashMap::new()),
        feasibility: FeasibilityCache::new(),
    };

    let best = if options.threads > 1 {
        search.root_parallel(&initial, options.threads)
    } else {
        search.best_suffix(0, &initial)
    };

    let status = match (&best, search.is_exhausted()) {
        (_, true) => SolveStatus::BudgetExhausted,
        (Some(_), false) => SolveStatus::Optimal,
        (None, false) => SolveStatus::Infeasible,
    };
    Ok(assemble(&search, &initial, options.epsilon, best, status))
}

fn assemble(
    search: &Search,
    initial: &LayerState,
    epsilon: f64,
    best: Outcome,
    status: SolveStatus,
) -> SolveResult {
    let mut mappings = Vec::new();
    let searched_objective = best.as_ref().map(suffix_objective);
    if let Some(mut suffix) = best {
        while let Some(chain) = suffix {
            mappings.push(chain.mapping.clone());
            suffix = chain.rest.clone();
        }
    }

    let mut ledger = EntropyLedger::new(epsilon);
    let mut realizations = Vec::new();
    let mut trace = Vec::new();
    let mut state = initial.clone();
    for map in &mappings {
        let next = apply_mapping(&state, map).expect("solution mapping covers its state");
        ledger.record(&state, map, &next);
        match search
            .feasibility
            .layer_feasible(&state, map)
            .expect("query sizes validated by solve")
        {
            LayerFeasibility::Feasible(realization) => realizations.push(realization),
            LayerFeasibility::Infeasible { neuron } => {
                unreachable!("solution layer failed feasibility at neuron {neuron}")
            }
        }
        trace.push(
            map.blocks()
                .into_iter()
                .map(|(target, block)| TraceMerge {
                    sources: block.iter().map(|&i| state.combos[i].code).collect(),
                    target,
                })
                .collect(),
        );
        state = next;
    }
    let objective = ledger.objective();
    debug_assert!(
        searched_objective.is_none_or(|searched| (searched - objective).abs() <= 1e-9),
        "search objective {searched_objective:?} disagrees with the ledger's {objective}"
    );
    SolveResult {
        status,
        objective,
        ledger,
        mappings,
        realizations,
        trace,
    }
}
