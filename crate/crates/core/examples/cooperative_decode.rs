// Erase r+1 symbols at four nodes at once and let the network repair them.

use std::collections::BTreeMap;
use std::sync::Arc;

use dsn_hiercode::codec::{encode, hierarchical_decode, ErasurePattern, MessageSet};
use dsn_hiercode::codegen::build_single_level;
use dsn_hiercode::presets;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub fn run_example() -> String {
    let code = build_single_level(&Arc::new(presets::fig3_uniform()), None).expect("fig3 builds");
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
    let m = MessageSet::random(&code, &mut rng);
    let cw = encode(&code, &m).expect("shapes match");
    let counts: BTreeMap<usize, usize> = [2, 4, 8, 10].into_iter().map(|i| (i, 5)).collect();
    let pattern = ErasurePattern::random(&code, &counts, &mut rng).expect("counts fit");
    let report = hierarchical_decode(&code, &pattern.apply(&cw)).expect("shapes match");

    let mut out = format!("pattern: {}\n", pattern.to_json());
    out.push_str(&report.trace_text());
    let correct = report.messages().iter().zip(&m.blocks).all(|(got, want)| got.as_ref() == Some(want));
    out.push_str(&format!("all recovered: {}, all correct: {correct}\n", report.all_recovered()));
    out
}

#[allow(dead_code)]
fn main() {
    print!("{}", run_example());
}
