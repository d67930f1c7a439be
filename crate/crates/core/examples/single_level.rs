// Build a single-level code on the twelve-node network and print its
// hierarchy, including every λ for node 2.

use std::collections::BTreeSet;
use std::sync::Arc;

use dsn_hiercode::codegen::build_single_level;
use dsn_hiercode::presets;

pub fn run_example() -> String {
    let topo = Arc::new(presets::fig3_uniform());
    let code = build_single_level(&topo, None).expect("fig3 builds");
    let mut out = code.summary();
    out.push_str("\nnode 2, level 1:\n");
    for (w, lambda) in code.lambda_table(2, 1).expect("small booster set") {
        let w: Vec<String> = w.iter().map(ToString::to_string).collect();
        out.push_str(&format!("  W={{{}}} lambda={lambda}\n", w.join(",")));
    }
    let lam = code.lambda(2, 1, &BTreeSet::from([4, 6, 8])).expect("W inside B_2^1");
    out.push_str(&format!("best case: {lam}\n"));
    out
}

#[allow(dead_code)]
fn main() {
    print!("{}", run_example());
}
