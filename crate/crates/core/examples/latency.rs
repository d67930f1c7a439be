// Recovery time over weighted links. Node 2 waits for m_4 to arrive
// through node 3 rather than for the slower routes through node 5.

use std::collections::BTreeMap;
use std::sync::Arc;

use dsn_hiercode::codec::{encode, simulate_recovery, ErasurePattern, MessageSet};
use dsn_hiercode::codegen::build_single_level;
use dsn_hiercode::presets;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub fn run_example() -> String {
    let topo = Arc::new(presets::example2());
    let code = build_single_level(&topo, None).expect("example2 builds");
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(1);
    let cw = encode(&code, &MessageSet::random(&code, &mut rng)).expect("shapes match");
    let pattern = ErasurePattern::random(&code, &BTreeMap::from([(2, 5)]), &mut rng).expect("count fits");
    let report = simulate_recovery(&code, &pattern.apply(&cw)).expect("shapes match");
    let mut out = String::new();
    for n in &report.nodes {
        let t = n.time.clone().flatten().map_or("never".to_string(), |t| t.to_string());
        out.push_str(&format!("node {:>2} done at {t}\n", n.node));
    }
    out
}

#[allow(dead_code)]
fn main() {
    print!("{}", run_example());
}
