// Check node 2's λ claims against the decoder and the rank oracle.

use std::sync::Arc;

use dsn_hiercode::codegen::build_single_level;
use dsn_hiercode::oracle::{sweep_validate, Budget};
use dsn_hiercode::presets;

pub fn run_example() -> String {
    let code = build_single_level(&Arc::new(presets::fig3_uniform()), None).expect("fig3 builds");
    let budget = Budget::parse("exhaustive:node=2").expect("valid budget");
    sweep_validate(&code, &budget).to_human()
}

#[allow(dead_code)]
fn main() {
    print!("{}", run_example());
}
