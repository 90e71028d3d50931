//! Randomized and property checks of the module-level invariants.

mod common;

use proptest::prelude::*;

use entroflow::entropyflow::{
    apply_mapping, conditional_layer_entropy, delta, delta_prime, initial_state, layer_entropy,
    mutual_information, Combo, LayerState, MappingAssignment,
};
use entroflow::feasibility::{check_separable, enumerate_threshold_functions, layer_feasible, LayerFeasibility};
use entroflow::probmodel::{builtin_gate, Gate, GateDistribution, Problem};
use entroflow::{solve, Code, SolveOptions, SolveStatus, Topology};

use rand::Rng;
use std::collections::BTreeMap;

const TOL: f64 = 1e-9;

fn joint_state(weights: &[[u32; 2]]) -> LayerState {
    let total: u32 = weights.iter().map(|row| row[0] + row[1]).sum();
    let col: [u32; 2] = [
        weights.iter().map(|row| row[0]).sum(),
        weights.iter().map(|row| row[1]).sum(),
    ];
    let combos = weights
        .iter()
        .zip(Code::all(4))
        .map(|(row, code)| Combo {
            code,
            p: (row[0] + row[1]) as f64 / total as f64,
            p_given_y: vec![
                row[0] as f64 / col[0] as f64,
                row[1] as f64 / col[1] as f64,
            ],
        })
        .collect();
    LayerState {
        layer_index: 0,
        y_alphabet: vec!["0".into(), "1".into()],
        y_prior: vec![col[0] as f64 / total as f64, col[1] as f64 / total as f64],
        combos,
    }
}

proptest! {
    // Entropy quantities do not depend on combo order.
    #[test]
    fn order_invariance(
        (weights, perm) in prop::collection::vec(
            (1u32..10, 1u32..10).prop_map(|(a, b)| [a, b]),
            3..9,
        )
        .prop_flat_map(|w| {
            let k = w.len();
            (Just(w), Just((0..k).collect::<Vec<usize>>()).prop_shuffle())
        })
    ) {
        let state = joint_state(&weights);
        let shuffled = LayerState {
            combos: perm.iter().map(|&i| state.combos[i].clone()).collect(),
            ..state.clone()
        };
        prop_assert!((layer_entropy(&state) - layer_entropy(&shuffled)).abs() < 1e-12);
        prop_assert!(
            (conditional_layer_entropy(&state) - conditional_layer_entropy(&shuffled)).abs()
                < 1e-12
        );
        prop_assert!(
            (mutual_information(&state) - mutual_information(&shuffled)).abs() < 1e-12
        );

        // Drops are order-invariant too: permute the mapping along with it.
        let map = MappingAssignment::new(
            state.combos.iter().map(|c| Code::new(1, (c.code.value() % 2 == 0) as u16)).collect(),
        );
        let map_shuffled =
            MappingAssignment::new(perm.iter().map(|&i| map.target_codes[i]).collect());
        prop_assert!((delta(&state, &map) - delta(&shuffled, &map_shuffled)).abs() < 1e-12);
        prop_assert!(
            (delta_prime(&state, &map) - delta_prime(&shuffled, &map_shuffled)).abs() < 1e-12
        );
    }

    // Separability survives deleting points: the same hyperplane works.
    #[test]
    fn separability_is_monotone_under_deletion(fn_index in 0usize..104, keep_mask in 1u8..255) {
        static FUNCTIONS: std::sync::OnceLock<Vec<Vec<bool>>> = std::sync::OnceLock::new();
        let functions = FUNCTIONS.get_or_init(|| {
            enumerate_threshold_functions(3).unwrap().into_iter().collect()
        });
        let labels = &functions[fn_index];
        let points: Vec<Code> = Code::all(3).collect();
        let kept: Vec<usize> =
            (0..8).filter(|i| (keep_mask >> i) & 1 == 1).collect();
        let sub_points: Vec<Code> = kept.iter().map(|&i| points[i]).collect();
        let sub_labels: Vec<bool> = kept.iter().map(|&i| labels[i]).collect();
        prop_assert!(check_separable(&sub_points, &sub_labels).unwrap().is_separable());
    }
}

#[test]
fn problem_json_round_trips() {
    for seed in 0..40 {
        let mut rng = common::rng(1000 + seed);
        let problem = common::random_problem(&mut rng, 2, 3);
        let back = Problem::from_json_str(&problem.to_json_string()).unwrap();
        assert_eq!(problem, back, "seed {seed}");
    }
}

#[test]
fn drops_are_nonnegative() {
    for seed in 0..150 {
        let mut rng = common::rng(2000 + seed);
        let problem = common::random_problem(&mut rng, 2, 2);
        let state = initial_state(&problem);
        let map = common::random_mapping(&mut rng, &state, 3);
        assert!(delta(&state, &map) >= -TOL, "seed {seed}");
        assert!(delta_prime(&state, &map) >= -TOL, "seed {seed}");
    }
}

// Merging only combinations with identical conditional target rows keeps the
// representation sufficient: the marginal and conditional drops coincide.
#[test]
fn sufficient_merges_cost_no_distortion() {
    for seed in 0..120 {
        let mut rng = common::rng(3000 + seed);
        // Two target-row patterns spread over four inputs.
        let patterns: [BTreeMap<String, f64>; 2] = [
            BTreeMap::from([("a".to_owned(), 0.25), ("b".to_owned(), 0.75)]),
            BTreeMap::from([("a".to_owned(), 1.0)]),
        ];
        let assignment: Vec<usize> = (0..4).map(|_| rng.gen_bool(0.5) as usize).collect();
        let weights: Vec<u32> = (0..4).map(|_| rng.gen_range(1..=9)).collect();
        let total: u32 = weights.iter().sum();
        let rows = Code::all(2)
            .zip(&weights)
            .zip(&assignment)
            .map(|((code, &w), &which)| {
                (code, w as f64 / total as f64, patterns[which].clone())
            })
            .collect();
        let problem = Problem::new(2, rows).unwrap();
        let state = initial_state(&problem);
        // Merge by pattern: two blocks.
        let map = MappingAssignment::new(
            assignment.iter().map(|&which| Code::new(1, which as u16)).collect(),
        );
        let d = delta(&state, &map);
        let dp = delta_prime(&state, &map);
        assert!((d - dp).abs() < TOL, "seed {seed}: {d} vs {dp}");
    }
}

#[test]
fn certificates_verify_on_every_separable_labeling() {
    let points: Vec<Code> = Code::all(3).collect();
    for mask in 0u32..256 {
        let labels: Vec<bool> = (0..8).map(|i| (mask >> i) & 1 == 1).collect();
        if let entroflow::Separability::Separable(cert) =
            check_separable(&points, &labels).unwrap()
        {
            assert!(cert.verify(&points, &labels), "mask {mask}");
        }
    }
}

// An injective assignment is only as feasible as its code geometry: reusing
// the source codes is always realizable (each bit is a projection), but a
// relabeling can demand a parity bit.
#[test]
fn injective_assignments_depend_on_code_geometry() {
    let problem = builtin_gate(Gate::Xor, 2, GateDistribution::Uniform).unwrap();
    let state = initial_state(&problem);

    let identity = MappingAssignment::new(state.codes());
    assert!(layer_feasible(&state, &identity).unwrap().is_feasible());

    let relabeled = MappingAssignment::new(vec![
        Code::new(2, 0b00),
        Code::new(2, 0b11),
        Code::new(2, 0b01),
        Code::new(2, 0b10),
    ]);
    match layer_feasible(&state, &relabeled).unwrap() {
        LayerFeasibility::Infeasible { neuron } => assert_eq!(neuron, 1),
        LayerFeasibility::Feasible(_) => panic!("second bit is the parity labeling"),
    }
}

#[test]
fn parity_layer_examples() {
    let problem = builtin_gate(Gate::Xor, 2, GateDistribution::Uniform).unwrap();
    let state = initial_state(&problem);

    // Two neurons computing x1 AND NOT x2 / NOT x1 AND x2.
    let two_wide = MappingAssignment::new(vec![
        Code::new(2, 0b00),
        Code::new(2, 0b01),
        Code::new(2, 0b10),
        Code::new(2, 0b00),
    ]);
    assert!(layer_feasible(&state, &two_wide).unwrap().is_feasible());

    // A single neuron asked to output the parity itself.
    let one_wide = MappingAssignment::new(vec![
        Code::new(1, 0),
        Code::new(1, 1),
        Code::new(1, 1),
        Code::new(1, 0),
    ]);
    match layer_feasible(&state, &one_wide).unwrap() {
        LayerFeasibility::Infeasible { neuron } => assert_eq!(neuron, 0),
        LayerFeasibility::Feasible(_) => panic!("parity is not a threshold function"),
    }
}

// Embedding a topology in a deeper one with an identity-capable extra layer
// never lowers the optimum.
#[test]
fn extra_identity_capable_layers_never_hurt() {
    let options = SolveOptions::default();
    let cases = [
        (Gate::And, vec![vec![1], vec![2, 1], vec![2, 2, 1]]),
        (Gate::Xor, vec![vec![2, 1], vec![2, 2, 1]]),
    ];
    for (gate, ladders) in cases {
        let problem = builtin_gate(gate, 2, GateDistribution::Uniform).unwrap();
        let mut last = f64::NEG_INFINITY;
        for layers in ladders {
            let r = solve(&problem, &Topology::new(layers).unwrap(), &options).unwrap();
            assert_eq!(r.status, SolveStatus::Optimal);
            assert!(r.objective >= last - TOL);
            last = r.objective;
        }
    }

    for seed in 0..5 {
        let mut rng = common::rng(4000 + seed);
        let problem = common::random_problem(&mut rng, 2, 2);
        let options = SolveOptions {
            epsilon: 0.3,
            ..SolveOptions::default()
        };
        let shallow = solve(&problem, &Topology::new(vec![2]).unwrap(), &options).unwrap();
        let deep = solve(&problem, &Topology::new(vec![2, 2]).unwrap(), &options).unwrap();
        assert!(deep.objective >= shallow.objective - TOL, "seed {seed}");
    }
}

#[test]
fn returned_sequences_respect_the_budget() {
    for seed in 0..30 {
        let mut rng = common::rng(5000 + seed);
        let problem = common::random_problem(&mut rng, 2, 2);
        let epsilon = [1e-9, 0.1, 0.5][seed as usize % 3];
        let options = SolveOptions {
            epsilon,
            ..SolveOptions::default()
        };
        let r = solve(&problem, &Topology::new(vec![2, 1]).unwrap(), &options).unwrap();
        if r.status == SolveStatus::Optimal {
            assert!(
                r.ledger.distortion() <= epsilon + 1e-12,
                "seed {seed}: {} > {epsilon}",
                r.ledger.distortion()
            );
            // Certificates realize every layer exactly.
            let mut state = initial_state(&problem);
            for (map, realization) in r.mappings.iter().zip(&r.realizations) {
                for (bit, cert) in realization.certificates.iter().enumerate() {
                    let labels: Vec<bool> =
                        map.target_codes.iter().map(|c| c.bit(bit)).collect();
                    assert!(cert.verify(&state.codes(), &labels));
                }
                state = apply_mapping(&state, map).unwrap();
            }
        }
    }
}

#[test]
fn solve_is_deterministic_across_runs() {
    let problem = builtin_gate(Gate::Xor, 2, GateDistribution::Uniform).unwrap();
    let topology = Topology::new(vec![2, 1]).unwrap();
    let a = solve(&problem, &topology, &SolveOptions::default()).unwrap();
    let b = solve(&problem, &topology, &SolveOptions::default()).unwrap();
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    assert_eq!(a.mappings, b.mappings);
    assert_eq!(a.trace, b.trace);
}
