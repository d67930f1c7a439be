// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use dsn_hiercode::codec::{self, CodewordSet, ErasurePattern, MessageSet, RecoveryReport};
use dsn_hiercode::codegen::{build_multi_level, build_single_level, CodeInstance};
use dsn_hiercode::coopgraph::CooperationGraph;
use dsn_hiercode::oracle::{sweep_validate, Budget};
use dsn_hiercode::presets;
use dsn_hiercode::topology::{DsnTopology, NodeId};
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde_json::json;

#[derive(Parser)]
#[command(name = "dsn-hiercode", version, about = "Topology-aware hierarchical erasure codes")]
struct Cli {
    /// Print tables instead of JSON.
    #[arg(long, global = true)]
    human: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct TopoArg {
    /// Topology JSON file, or `preset:NAME` (fig3, fig4, fig4-overlap, example2).
    #[arg(long)]
    topology: String,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a code from a topology.
    Build {
        #[command(flatten)]
        topo: TopoArg,
        /// Use the topology's cooperation cycles.
        #[arg(long)]
        multi_level: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Show ECC hierarchies, or one λ value with --level and --helpers.
    Hierarchy {
        #[arg(long)]
        code: PathBuf,
        #[arg(long)]
        node: Option<NodeId>,
        #[arg(long, requires = "node")]
        level: Option<usize>,
        #[arg(long, num_args = 0.., requires = "level")]
        helpers: Vec<NodeId>,
    },
    /// Check the cooperation graph's compatibility conditions.
    CheckCompat {
        #[command(flatten)]
        topo: TopoArg,
    },
    /// Encode messages; with no --messages, random ones from --seed.
    Encode {
        #[arg(long)]
        code: PathBuf,
        #[arg(long)]
        messages: Option<PathBuf>,
        /// Where to write generated messages.
        #[arg(long)]
        messages_out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Produce an erasure pattern.
    Corrupt {
        #[arg(long)]
        code: PathBuf,
        /// Existing pattern to pass through.
        #[arg(long, conflicts_with = "per_node")]
        pattern: Option<PathBuf>,
        /// Erasure counts as NODE=COUNT, e.g. 2=5; `all` erases everything.
        #[arg(long, num_args = 1.., required_unless_present = "pattern")]
        per_node: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode a received codeword.
    Decode {
        #[command(flatten)]
        io: DecodeArgs,
    },
    /// Decode with link latencies and report completion times.
    Simulate {
        #[command(flatten)]
        io: DecodeArgs,
    },
    /// Check every λ claim against the decoder and the oracle.
    Validate {
        #[arg(long)]
        code: PathBuf,
        #[arg(long, default_value = "exhaustive")]
        budget: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    code: PathBuf,
    #[arg(long)]
    codeword: PathBuf,
    #[arg(long)]
    pattern: PathBuf,
    /// Write recovered messages (failed nodes as zeros).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include the event trace.
    #[arg(long)]
    trace: bool,
}

struct Failure {
    code: String,
    message: String,
    extra: serde_json::Value,
}

impl Failure {
    fn new(code: &str, message: impl ToString) -> Self {
        Self { code: code.into(), message: message.to_string(), extra: serde_json::Value::Null }
    }
}

macro_rules! from_err {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::new(e.code(), &e)
            }
        }
    )*};
}
from_err!(
    dsn_hiercode::topology::TopologyError,
    dsn_hiercode::coopgraph::CoopGraphError,
    dsn_hiercode::codegen::CodegenError,
    dsn_hiercode::codec::DecodeError
);

fn color() -> bool {
    std::env::var("DSN_HIERCODE_COLOR").is_ok_and(|v| v == "1")
}

fn paint(text: &str, good: bool) -> String {
    if color() {
        format!("\x1b[{}m{text}\x1b[0m", if good { 32 } else { 31 })
    } else {
        text.to_string()
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))
}

fn load_topology(arg: &str) -> Result<DsnTopology, Failure> {
    if let Some(name) = arg.strip_prefix("preset:") {
        return presets::by_name(name).ok_or_else(|| Failure::new("unknown-preset", name));
    }
    let text = String::from_utf8(read(Path::new(arg))?).map_err(|e| Failure::new("schema", e))?;
    Ok(DsnTopology::from_json(&text)?)
}

fn load_code(path: &Path) -> Result<CodeInstance, Failure> {
    Ok(CodeInstance::from_bytes(&read(path)?)?)
}

fn to_json(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("output serializes")
}

fn run(cli: Cli) -> Result<(String, u8), Failure> {
    let human = cli.human;
    match cli.cmd {
        Cmd::Build { topo, multi_level, out } => {
            let topo = Arc::new(load_topology(&topo.topology)?);
            let code = if multi_level {
                let graph = Arc::new(CooperationGraph::from_topology(topo)?);
                match build_multi_level(&graph, None) {
                    Err(dsn_hiercode::codegen::CodegenError::Incompatible(v)) => {
                        let mut f = Failure::new("incompatible", "cooperation graph is not compatible");
                        f.extra = serde_json::to_value(&v).expect("violations serialize");
                        return Err(f);
                    }
                    other => other?,
                }
            } else {
                build_single_level(&topo, None)?
            };
            write(&out, &code.to_bytes())?;
            let text = if human {
                code.summary()
            } else {
                to_json(&json!({
                    "nodes": code.len(),
                    "field": { "theta": code.field().theta(), "modulus": format!("{:#x}", code.field().modulus()) },
                    "generator": [code.total_message_len(), code.total_codeword_len()],
                    "multi_level": multi_level,
                    "hierarchy": code.hierarchy(),
                }))
            };
            Ok((text, 0))
        }
        Cmd::Hierarchy { code, node, level, helpers } => {
            let code = load_code(&code)?;
            if let (Some(i), Some(l)) = (node, level) {
                if !code.topology().contains(i) {
                    return Err(Failure::new("unknown-node", format!("node {i}")));
                }
                let w: BTreeSet<NodeId> = helpers.into_iter().collect();
                let lambda = code.lambda(i, l, &w)?;
                let text = if human {
                    format!("lambda={lambda}")
                } else {
                    to_json(&json!({ "node": i, "level": l, "helpers": w, "lambda": lambda }))
                };
                return Ok((text, 0));
            }
            let nodes: Vec<NodeId> = match node {
                Some(i) if code.topology().contains(i) => vec![i],
                Some(i) => return Err(Failure::new("unknown-node", format!("node {i}"))),
                None => code.topology().node_ids().collect(),
            };
            let text = if human {
                nodes
                    .iter()
                    .map(|&i| format!("node {i}: {}", code.node_hierarchy(i).summary_line()))
                    .collect::<Vec<_>>()
                    .join("\n")
            } else {
                let hs: Vec<_> = nodes.iter().map(|&i| code.node_hierarchy(i)).collect();
                to_json(&hs)
            };
            Ok((text, 0))
        }
        Cmd::CheckCompat { topo } => {
            let graph = CooperationGraph::from_topology(Arc::new(load_topology(&topo.topology)?))?;
            let report = graph.check_compatible();
            let text = if human {
                let mut s = paint(if report.compatible { "compatible" } else { "incompatible" }, report.compatible);
                for v in &report.violations {
                    s.push_str(&format!("\nviolation at node {}: {}", v.node, v.detail));
                }
                for v in &report.notes {
                    s.push_str(&format!("\nnote at node {}: {}", v.node, v.detail));
                }
                s
            } else {
                to_json(&report)
            };
            Ok((text, if report.compatible { 0 } else { 1 }))
        }
        Cmd::Encode { code, messages, messages_out, seed, out } => {
            let code = load_code(&code)?;
            let m = match messages {
                Some(p) => MessageSet::from_bytes(&code, &read(&p)?)?,
                None => MessageSet::random(&code, &mut Xoshiro256PlusPlus::seed_from_u64(seed)),
            };
            if let Some(p) = messages_out {
                write(&p, &m.to_bytes(&code))?;
            }
            let cw = codec::encode(&code, &m)?;
            let bytes = cw.to_bytes(&code);
            write(&out, &bytes)?;
            let text = if human {
                format!("encoded {} symbols", code.total_codeword_len())
            } else {
                to_json(&json!({ "symbols": code.total_codeword_len(), "bytes": bytes.len() }))
            };
            Ok((text, 0))
        }
        Cmd::Corrupt { code, pattern, per_node, seed, out } => {
            let code = load_code(&code)?;
            let pat = if let Some(p) = pattern {
                let text = String::from_utf8(read(&p)?).map_err(|e| Failure::new("pattern", e))?;
                ErasurePattern::from_json(&code, &text)?
            } else if per_node.iter().any(|s| s == "all") {
                ErasurePattern::everything(&code)
            } else {
                let mut counts = BTreeMap::new();
                for spec in &per_node {
                    let parsed = spec
                        .split_once('=')
                        .and_then(|(a, b)| Some((a.trim().parse::<NodeId>().ok()?, b.trim().parse::<usize>().ok()?)));
                    let (i, c) =
                        parsed.ok_or_else(|| Failure::new("usage", format!("expected NODE=COUNT, got {spec:?}")))?;
                    counts.insert(i, c);
                }
                ErasurePattern::random(&code, &counts, &mut Xoshiro256PlusPlus::seed_from_u64(seed))?
            };
            let json = pat.to_json();
            write(&out, json.as_bytes())?;
            Ok((json, 0))
        }
        Cmd::Decode { io } => pipeline(io, false, human),
        Cmd::Simulate { io } => pipeline(io, true, human),
        Cmd::Validate { code, budget, seed, jobs } => {
            let code = load_code(&code)?;
            let mut budget = Budget::parse(&budget).map_err(|e| Failure::new("budget", e))?;
            if seed != 0 {
                budget.seed = seed;
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.unwrap_or(0))
                .build()
                .map_err(|e| Failure::new("jobs", e))?;
            let report = pool.install(|| sweep_validate(&code, &budget));
            let text = if human { report.to_human().replace("FAIL", &paint("FAIL", false)) } else { report.to_json() };
            Ok((text, if report.passed { 0 } else { 1 }))
        }
    }
}

fn pipeline(io: DecodeArgs, timed: bool, human: bool) -> Result<(String, u8), Failure> {
    let code = load_code(&io.code)?;
    let cw = CodewordSet::from_bytes(&code, &read(&io.codeword)?)?;
    let text = String::from_utf8(read(&io.pattern)?).map_err(|e| Failure::new("pattern", e))?;
    let pattern = ErasurePattern::from_json(&code, &text)?;
    let received = pattern.apply(&cw);
    let report =
        if timed { codec::simulate_recovery(&code, &received)? } else { codec::hierarchical_decode(&code, &received)? };
    if let Some(p) = &io.out {
        let m = MessageSet {
            blocks: report
                .nodes
                .iter()
                .map(|n| {
                    n.message.clone().unwrap_or_else(|| vec![Default::default(); code.topology().params(n.node).k])
                })
                .collect(),
        };
        write(p, &m.to_bytes(&code))?;
    }
    let out = if human { human_report(&report, io.trace) } else { json_report(&report, io.trace) };
    Ok((out, if report.any_failed() { 1 } else { 0 }))
}

fn json_report(report: &RecoveryReport, trace: bool) -> String {
    if trace {
        to_json(report)
    } else {
        to_json(&json!({ "nodes": report.nodes }))
    }
}

fn human_report(report: &RecoveryReport, trace: bool) -> String {
    let mut s = String::from("node status          level time");
    for n in &report.nodes {
        let status = match &n.status {
            codec::NodeStatus::RecoveredLocal => "recovered-local",
            codec::NodeStatus::RecoveredCoop { .. } => "recovered-coop",
            codec::NodeStatus::Failed => "failed",
        };
        let level = n.status.level().map_or("-".to_string(), |l| l.to_string());
        let time = match &n.time {
            None => "-".to_string(),
            Some(None) => "inf".to_string(),
            Some(Some(t)) => t.to_string(),
        };
        s.push_str(&format!("\n{:>4} {:<16} {:>5} {}", n.node, paint(status, n.status.is_recovered()), level, time));
    }
    if trace {
        s.push_str("\n\n");
        s.push_str(report.trace_text().trim_end());
    }
    s
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok((text, code)) => {
            let _ = writeln!(std::io::stdout(), "{text}");
            ExitCode::from(code)
        }
        Err(f) => {
            let mut v = json!({ "error": f.code, "message": f.message });
            if !f.extra.is_null() {
                v["details"] = f.extra;
            }
            eprintln!("{v}");
            ExitCode::from(2)
        }
    }
}
