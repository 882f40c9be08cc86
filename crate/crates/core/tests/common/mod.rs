#![allow(dead_code)]

use std::fmt::Write as _;

use phasec_core::mapping::{insert_splitter_trees, FanoutLimits, MappedDag};
use phasec_core::netlist::{parse_netlist, Netlist};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random netlist text: 1..=3 inputs, `gates` gates each reading 1..=3
/// distinct earlier signals, every sink gate exported.
pub fn random_netlist_text(rng: &mut impl Rng, gates: usize) -> String {
    let inputs = rng.gen_range(1..=3);
    let mut t = String::from("name rand\n");
    let mut signals: Vec<String> = (0..inputs).map(|i| format!("i{i}")).collect();
    for s in &signals {
        writeln!(t, "in {s}").unwrap();
    }
    let mut used = vec![false; inputs + gates];
    for g in 0..gates {
        let arity = rng.gen_range(1..=3usize.min(signals.len()));
        // bias towards the newest signal so chains and reconvergence both show up
        let mut picks: Vec<usize> = vec![signals.len() - 1];
        let mut rest: Vec<usize> = (0..signals.len() - 1).collect();
        rest.shuffle(rng);
        picks.extend(rest.into_iter().take(arity - 1));
        let kind = match arity {
            1 => ["BUF", "NOT"][rng.gen_range(0..2)],
            2 => ["AND", "OR", "NAND", "NOR"][rng.gen_range(0..4)],
            _ => "MAJ3",
        };
        write!(t, "gate g{g} {kind}").unwrap();
        for &p in &picks {
            used[p] = true;
            let inv = if rng.gen_bool(0.25) { "~" } else { "" };
            write!(t, " {inv}{}", signals[p]).unwrap();
        }
        t.push('\n');
        signals.push(format!("g{g}"));
    }
    for (k, s) in signals.iter().enumerate() {
        if !used[k] && k >= inputs {
            writeln!(t, "out {s}").unwrap();
        }
    }
    for (k, s) in signals.iter().enumerate().take(inputs) {
        if !used[k] {
            // keep unused inputs observable
            writeln!(t, "out {s}").unwrap();
        }
    }
    t
}

pub fn random_netlist(rng: &mut impl Rng, gates: usize) -> Netlist {
    parse_netlist(&random_netlist_text(rng, gates)).unwrap()
}

/// Seeded random mapped DAG with at most `max_internal` gates plus splitters.
pub fn random_dag(seed: u64, max_internal: usize) -> MappedDag {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let gates = rng.gen_range(1..=max_internal);
        let n = random_netlist(&mut rng, gates);
        let dag = insert_splitter_trees(&n, &FanoutLimits::default()).unwrap();
        let internal = dag.nodes().iter().filter(|v| v.kind.is_internal()).count();
        if internal <= max_internal {
            return dag;
        }
    }
}
