// Multi-level code with cooperation cycles: compatibility check,
// cooperation matrix and node 2's deeper hierarchy.

use std::sync::Arc;

use dsn_hiercode::codegen::build_multi_level;
use dsn_hiercode::coopgraph::CooperationGraph;
use dsn_hiercode::presets;

pub fn run_example() -> String {
    let graph = CooperationGraph::from_topology(Arc::new(presets::fig4())).expect("cycles are well formed");
    let report = graph.check_compatible();
    let mut out = format!("compatible: {}\n", report.compatible);
    out.push_str("cooperation matrix:\n");
    for row in graph.cooperation_matrix().to_rows() {
        let cells: Vec<String> = row.iter().map(ToString::to_string).collect();
        out.push_str(&format!("  {}\n", cells.join(" ")));
    }
    let code = build_multi_level(&Arc::new(graph), None).expect("compatible graph builds");
    let h = code.node_hierarchy(2);
    out.push_str(&format!("node 2: {}\n", h.summary_line()));
    for flag in &h.flags {
        out.push_str(&format!("  flag: {flag:?}\n"));
    }

    let overlap = CooperationGraph::from_topology(Arc::new(presets::fig4_overlap())).expect("cycles are well formed");
    let bad = overlap.check_compatible();
    out.push_str(&format!("overlap compatible: {}\n", bad.compatible));
    for v in bad.violations.iter().filter(|v| v.condition == 1) {
        out.push_str(&format!("  node {}: {}\n", v.node, v.detail));
    }
    out
}

#[allow(dead_code)]
fn main() {
    print!("{}", run_example());
}
