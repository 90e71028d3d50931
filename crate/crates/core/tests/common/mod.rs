//! Deterministic generators shared by the integration suites.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use entroflow::entropyflow::{apply_mapping, initial_state, EntropyLedger, LayerState, MappingAssignment};
use entroflow::probmodel::Problem;
use entroflow::Code;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const SYMBOLS: [&str; 4] = ["a", "b", "c", "d"];

/// Random problem over all `bits`-wide inputs: rational masses `k/N` and a
/// mix of point-mass and stochastic target rows over `symbols` symbols.
pub fn random_problem(rng: &mut ChaCha8Rng, bits: usize, symbols: usize) -> Problem {
    assert!(symbols <= SYMBOLS.len());
    let n = 1usize << bits;
    let weights: Vec<u32> = (0..n).map(|_| rng.gen_range(1..=9)).collect();
    let total: u32 = weights.iter().sum();
    let rows = Code::all(bits)
        .zip(&weights)
        .map(|(code, &w)| {
            let p = w as f64 / total as f64;
            let row: BTreeMap<String, f64> = if rng.gen_bool(0.5) {
                let k = rng.gen_range(0..symbols);
                BTreeMap::from([(SYMBOLS[k].to_owned(), 1.0)])
            } else {
                let mut ws: Vec<u32> = (0..symbols).map(|_| rng.gen_range(0..=4)).collect();
                if ws.iter().all(|&v| v == 0) {
                    ws[0] = 1;
                }
                let wsum: u32 = ws.iter().sum();
                SYMBOLS
                    .iter()
                    .take(symbols)
                    .zip(&ws)
                    .filter(|(_, &v)| v > 0)
                    .map(|(s, &v)| (s.to_string(), v as f64 / wsum as f64))
                    .collect()
            };
            (code, p, row)
        })
        .collect();
    Problem::new(bits, rows).unwrap()
}

/// Random mapping of a state onto codes of a random width up to `max_width`.
pub fn random_mapping(
    rng: &mut ChaCha8Rng,
    state: &LayerState,
    max_width: usize,
) -> MappingAssignment {
    let width = rng.gen_range(1..=max_width);
    MappingAssignment::new(
        (0..state.len())
            .map(|_| Code::new(width, rng.gen_range(0..(1u16 << width))))
            .collect(),
    )
}

/// Apply `depth` random mappings from the problem's initial state, recording
/// them in a ledger (epsilon 0; callers adjust if they need a budget).
pub fn random_chain(
    rng: &mut ChaCha8Rng,
    problem: &Problem,
    depth: usize,
) -> (Vec<LayerState>, EntropyLedger) {
    let mut states = vec![initial_state(problem)];
    let mut ledger = EntropyLedger::new(0.0);
    for _ in 0..depth {
        let map = random_mapping(rng, states.last().unwrap(), 3);
        let next = apply_mapping(states.last().unwrap(), &map).unwrap();
        ledger.record(states.last().unwrap(), &map, &next);
        states.push(next);
    }
    (states, ledger)
}
