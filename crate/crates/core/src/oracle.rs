// SPDX-License-Identifier: Apache-2.0

//! Ground-truth recoverability and hierarchy validation sweeps.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use itertools::Itertools;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::codec::{encode, hierarchical_decode, CodewordSet, ErasurePattern, MessageSet};
use crate::codegen::CodeInstance;
use crate::topology::NodeId;

/// Whether the observed coordinates pin down each node's message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleVerdict {
    /// `determined[i - 1]` for node i.
    pub determined: Vec<bool>,
    pub global_rank: usize,
    /// Message coordinates (node, 1-based position) left free.
    pub nullspace_support: Vec<(NodeId, usize)>,
}

impl OracleVerdict {
    pub fn is_determined(&self, i: NodeId) -> bool {
        self.determined[i - 1]
    }
}

/// m_i is determined iff every vector of the left null space of G_obs
/// vanishes on block i.
pub fn oracle_recoverable(code: &CodeInstance, pattern: &ErasurePattern) -> OracleVerdict {
    let topo = code.topology();
    let observed: Vec<usize> = topo
        .node_ids()
        .flat_map(|i| {
            let off = code.codeword_offset(i);
            (1..=topo.params(i).n()).filter(move |&c| !pattern.is_erased(i, c)).map(move |c| off + c - 1)
        })
        .collect();
    let g_obs = code.generator().select_columns(&observed);
    let null = g_obs.transpose().null_space_basis();
    let global_rank = code.total_message_len() - null.rows();
    let mut free = vec![false; code.total_message_len()];
    for r in 0..null.rows() {
        for (c, x) in null.row(r).iter().enumerate() {
            free[c] |= !x.is_zero();
        }
    }
    let mut determined = Vec::with_capacity(topo.len());
    let mut nullspace_support = Vec::new();
    for i in topo.node_ids() {
        let off = code.message_offset(i);
        let k = topo.params(i).k;
        determined.push(free[off..off + k].iter().all(|f| !f));
        nullspace_support.extend((0..k).filter(|&x| free[off + x]).map(|x| (i, x + 1)));
    }
    OracleVerdict { determined, global_rank, nullspace_support }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error(
    "bad budget {0:?}: expected exhaustive|sampled|zero followed by :node=a,b :samples=N :limit=N :seed=N :no-probe"
)]
pub struct BudgetError(pub String);

/// How much of the (node, level, W, size) space a sweep covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Budget {
    pub nodes: Option<BTreeSet<NodeId>>,
    /// Strata with more patterns than this are sampled.
    pub exhaustive_limit: u64,
    pub samples: usize,
    /// Also run size λ+1 for information.
    pub probe: bool,
    pub seed: u64,
    /// Skip everything.
    pub zero: bool,
}

impl Default for Budget {
    fn default() -> Self {
        Self { nodes: None, exhaustive_limit: 1_000_000, samples: 10_000, probe: true, seed: 0, zero: false }
    }
}

impl Budget {
    /// Parse `mode[:key=value]*`, e.g. `exhaustive:node=2`.
    pub fn parse(text: &str) -> Result<Self, BudgetError> {
        let err = || BudgetError(text.to_string());
        let mut parts = text.split(':');
        let mut b = Budget::default();
        match parts.next().map(str::trim) {
            Some("exhaustive") => {}
            Some("sampled") => b.exhaustive_limit = 0,
            Some("zero") => b.zero = true,
            _ => return Err(err()),
        }
        for part in parts {
            let (key, value) = part.split_once('=').unwrap_or((part, ""));
            match key.trim() {
                "node" | "nodes" => {
                    let set = value.split(',').map(|v| v.trim().parse()).collect::<Result<BTreeSet<NodeId>, _>>();
                    b.nodes = Some(set.map_err(|_| err())?);
                }
                "samples" => b.samples = value.parse().map_err(|_| err())?,
                "limit" => b.exhaustive_limit = value.parse().map_err(|_| err())?,
                "seed" => b.seed = value.parse().map_err(|_| err())?,
                "no-probe" => b.probe = false,
                _ => return Err(err()),
            }
        }
        Ok(b)
    }
}

/// Outcome of one (node, level, W, erasure count) stratum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StratumResult {
    pub node: NodeId,
    pub level: usize,
    pub w: Vec<NodeId>,
    pub erasures: usize,
    pub lambda: usize,
    pub probe: bool,
    pub patterns: u64,
    pub exhaustive: bool,
    pub decoder_ok: u64,
    pub oracle_ok: u64,
    /// Decoder output disagreeing with the truth or with the oracle.
    pub unsound: u64,
}

impl StratumResult {
    pub fn passed(&self) -> bool {
        self.unsound == 0 && (self.probe || self.decoder_ok == self.patterns)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub strata: Vec<StratumResult>,
    /// Nodes skipped because a booster set is too large to enumerate.
    pub skipped: Vec<(NodeId, usize)>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_human(&self) -> String {
        let mut out = String::from("node level W            e  lambda patterns  decoder   oracle  result\n");
        for s in &self.strata {
            let w = if s.w.is_empty() { "-".to_string() } else { s.w.iter().join(",") };
            let result = if s.probe {
                "probe"
            } else if s.passed() {
                "ok"
            } else {
                "FAIL"
            };
            let _ = writeln!(
                out,
                "{:>4} {:>5} {:<12} {:>2} {:>7} {:>8} {:>8} {:>8}  {}{}",
                s.node,
                s.level,
                w,
                s.erasures,
                s.lambda,
                s.patterns,
                s.decoder_ok,
                s.oracle_ok,
                result,
                if s.exhaustive { "" } else { " (sampled)" }
            );
        }
        for (i, l) in &self.skipped {
            let _ = writeln!(out, "node {i} level {l}: booster set too large, skipped");
        }
        let _ = writeln!(out, "{}", if self.passed { "PASS" } else { "FAIL" });
        out
    }
}

fn binomial(n: usize, k: usize) -> u64 {
    (0..k as u64).fold(1u64, |acc, x| acc.saturating_mul(n as u64 - x) / (x + 1))
}

struct Stratum {
    node: NodeId,
    level: usize,
    w: BTreeSet<NodeId>,
    lambda: usize,
    erasures: usize,
    probe: bool,
}

fn run_stratum(code: &CodeInstance, cw: &CodewordSet, m: &MessageSet, s: &Stratum, budget: &Budget) -> StratumResult {
    let topo = code.topology();
    let i = s.node;
    let n = topo.params(i).n();
    let mut intact: BTreeSet<NodeId> =
        if s.level == 0 { BTreeSet::new() } else { code.graph().cumulative(i, s.level).clone() };
    intact.extend(s.w.iter().copied());
    let mut base = ErasurePattern::new();
    for x in topo.node_ids().filter(|x| *x != i && !intact.contains(x)) {
        base.erase_node(code, x);
    }
    let total = binomial(n, s.erasures);
    let exhaustive = total <= budget.exhaustive_limit;
    let patterns: Vec<Vec<usize>> = if exhaustive {
        (1..=n).combinations(s.erasures).collect()
    } else {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(
            budget.seed ^ ((i as u64) << 32) ^ ((s.level as u64) << 16) ^ s.erasures as u64,
        );
        (0..budget.samples).map(|_| sample(&mut rng, n, s.erasures).into_iter().map(|c| c + 1).collect()).collect()
    };
    let (decoder_ok, oracle_ok, unsound) = patterns
        .par_iter()
        .map(|coords| {
            let mut p = base.clone();
            for &c in coords {
                p.erase(code, i, c).expect("coordinate in range");
            }
            let oracle = oracle_recoverable(code, &p).is_determined(i);
            let rep = hierarchical_decode(code, &p.apply(cw)).expect("shapes match");
            let node = rep.node(i);
            let ok = node.status.is_recovered();
            let bad = ok && (!oracle || node.message.as_deref() != Some(&m.blocks[i - 1][..]));
            (u64::from(ok), u64::from(oracle), u64::from(bad))
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    StratumResult {
        node: i,
        level: s.level,
        w: s.w.iter().copied().collect(),
        erasures: s.erasures,
        lambda: s.lambda,
        probe: s.probe,
        patterns: patterns.len() as u64,
        exhaustive,
        decoder_ok,
        oracle_ok,
        unsound,
    }
}

/// Check every λ claim by decoding and by the oracle.
///
/// In stratum (i, l, W, e) node i loses e coordinates, the nodes of
/// A_i^l ∪ W are intact and every other node is fully erased.
pub fn sweep_validate(code: &CodeInstance, budget: &Budget) -> ValidationReport {
    let mut report = ValidationReport { strata: Vec::new(), skipped: Vec::new(), passed: true };
    if budget.zero {
        return report;
    }
    let topo = code.topology();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(budget.seed);
    let m = MessageSet::random(code, &mut rng);
    let cw = encode(code, &m).expect("message shapes match");
    let mut strata = Vec::new();
    for i in topo.node_ids() {
        if budget.nodes.as_ref().is_some_and(|s| !s.contains(&i)) {
            continue;
        }
        let n = topo.params(i).n();
        for level in 0..=code.graph().depth(i) {
            let table = if level == 0 {
                vec![(BTreeSet::new(), code.lambda(i, 0, &BTreeSet::new()).expect("level 0 is in range"))]
            } else if let Some(t) = code.lambda_table(i, level) {
                t
            } else {
                report.skipped.push((i, level));
                continue;
            };
            for (w, lambda) in table {
                for e in 0..=lambda.min(n) {
                    strata.push(Stratum { node: i, level, w: w.clone(), lambda, erasures: e, probe: false });
                }
                if budget.probe && lambda < n {
                    strata.push(Stratum { node: i, level, w, lambda, erasures: lambda + 1, probe: true });
                }
            }
        }
    }
    report.strata = strata.iter().map(|s| run_stratum(code, &cw, &m, s, budget)).collect();
    report.passed = report.strata.iter().all(StratumResult::passed);
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codegen::build_single_level;
    use crate::presets;
    use std::sync::Arc;

    fn fig3() -> CodeInstance {
        build_single_level(&Arc::new(presets::fig3_uniform()), None).unwrap()
    }

    #[test]
    fn nothing_erased_is_full_rank() {
        let c = fig3();
        let v = oracle_recoverable(&c, &ErasurePattern::new());
        assert_eq!(v.global_rank, 24);
        assert!(v.determined.iter().all(|d| *d));
        assert!(v.nullspace_support.is_empty());
    }

    #[test]
    fn everything_erased_has_rank_zero() {
        let c = fig3();
        let v = oracle_recoverable(&c, &ErasurePattern::everything(&c));
        assert_eq!(v.global_rank, 0);
        assert_eq!(v.nullspace_support.len(), 24);
    }

    #[test]
    fn a_lost_node_survives_in_its_neighbours() {
        let c = fig3();
        let mut p = ErasurePattern::new();
        p.erase_node(&c, 7);
        let v = oracle_recoverable(&c, &p);
        assert!(v.determined.iter().all(|d| *d));
        assert_eq!(v.global_rank, 24);
    }

    #[test]
    fn budget_grammar() {
        let b = Budget::parse("exhaustive:node=2,4:seed=9").unwrap();
        assert_eq!(b.nodes, Some(BTreeSet::from([2, 4])));
        assert_eq!(b.seed, 9);
        assert!(Budget::parse("zero").unwrap().zero);
        assert_eq!(Budget::parse("sampled:samples=50").unwrap().exhaustive_limit, 0);
        assert!(Budget::parse("lots").is_err());
        assert!(Budget::parse("exhaustive:node=x").is_err());
    }

    #[test]
    fn zero_budget_gives_empty_report() {
        let r = sweep_validate(&fig3(), &Budget::parse("zero").unwrap());
        assert!(r.strata.is_empty() && r.passed);
    }

    #[test]
    fn node2_sweep_passes() {
        let r = sweep_validate(&fig3(), &Budget::parse("exhaustive:node=2").unwrap());
        assert!(r.passed, "{}", r.to_human());
        let probe_failures: u64 = r.strata.iter().filter(|s| s.probe).map(|s| s.patterns - s.decoder_ok).sum();
        assert!(probe_failures > 0);
    }
}
