// SPDX-License-Identifier: Apache-2.0

//! Multi-level cooperation: cycles, the cooperation matrix, derived helper
//! sets and the compatibility check.
//!
//! A cycle couples a set of rows X_t (nodes whose messages enter) with a
//! set of columns Y_t (nodes whose parities receive them). Each row meets
//! exactly two columns and each column exactly two rows, forming one closed
//! alternating loop. Level-1 cooperation is the topology's M_i.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{DsnTopology, NodeId};

static EMPTY: BTreeSet<NodeId> = BTreeSet::new();

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub row: NodeId,
    pub cols: Vec<NodeId>,
    /// Name of a shared parameter in the document's `symbols` table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaSpec {
    Uniform(usize),
    PerRow(BTreeMap<String, usize>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleSpec {
    #[serde(rename = "X")]
    pub x: Vec<NodeId>,
    #[serde(rename = "Y")]
    pub y: Vec<NodeId>,
    pub pairs: Vec<PairSpec>,
    pub level: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<GammaSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoopGraphError {
    #[error("cycle {cycle}: {reason}")]
    Malformed { cycle: usize, reason: String },
    #[error("cycle {cycle}: level {level} is below 2")]
    LevelTooLow { cycle: usize, level: usize },
    #[error("cycle {cycle}: no cooperation parameter for row {row}")]
    GammaMissing { cycle: usize, row: NodeId },
    #[error("cycle {cycle}: node {node} is out of range")]
    NodeOutOfRange { cycle: usize, node: NodeId },
    #[error("cycle {cycle}: cell ({row},{col}) is already a level-1 cooperation")]
    CollidesWithLevelOne { cycle: usize, row: NodeId, col: NodeId },
}

impl CoopGraphError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Malformed { .. } => "malformed-cycle",
            Self::LevelTooLow { .. } => "cycle-level",
            Self::GammaMissing { .. } => "gamma-missing",
            Self::NodeOutOfRange { .. } => "node-out-of-range",
            Self::CollidesWithLevelOne { .. } => "cycle-collides-level1",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cycle {
    pub id: usize,
    pub x: BTreeSet<NodeId>,
    pub y: BTreeSet<NodeId>,
    pub row_cols: BTreeMap<NodeId, [NodeId; 2]>,
    pub col_rows: BTreeMap<NodeId, [NodeId; 2]>,
    pub level: usize,
    pub gamma: BTreeMap<NodeId, usize>,
}

impl Cycle {
    fn from_spec(
        id: usize,
        spec: &CycleSpec,
        topo: &DsnTopology,
        symbols: &BTreeMap<String, usize>,
    ) -> Result<Self, CoopGraphError> {
        let bad = |reason: String| CoopGraphError::Malformed { cycle: id, reason };
        if spec.level < 2 {
            return Err(CoopGraphError::LevelTooLow { cycle: id, level: spec.level });
        }
        for &v in spec.x.iter().chain(&spec.y).chain(spec.pairs.iter().flat_map(|p| p.cols.iter().chain([&p.row]))) {
            if !topo.contains(v) {
                return Err(CoopGraphError::NodeOutOfRange { cycle: id, node: v });
            }
        }
        let x: BTreeSet<NodeId> = spec.x.iter().copied().collect();
        let y: BTreeSet<NodeId> = spec.y.iter().copied().collect();
        if x.len() != spec.x.len() || y.len() != spec.y.len() {
            return Err(bad("X or Y repeats a node".into()));
        }
        if x.len() != y.len() || !(2..=3).contains(&x.len()) {
            return Err(bad(format!("|X| = {} and |Y| = {} must be equal and 2 or 3", x.len(), y.len())));
        }
        if let Some(v) = x.intersection(&y).next() {
            return Err(bad(format!("node {v} is both a row and a column")));
        }

        let mut row_cols = BTreeMap::new();
        let mut symbol_of = BTreeMap::new();
        for pair in &spec.pairs {
            if !x.contains(&pair.row) {
                return Err(bad(format!("pair row {} is not in X", pair.row)));
            }
            let [a, b] = <[NodeId; 2]>::try_from(pair.cols.as_slice())
                .map_err(|_| bad(format!("row {} must list exactly two columns", pair.row)))?;
            if a == b || !y.contains(&a) || !y.contains(&b) {
                return Err(bad(format!("row {} needs two distinct columns from Y", pair.row)));
            }
            if row_cols.insert(pair.row, [a.min(b), a.max(b)]).is_some() {
                return Err(bad(format!("row {} is paired twice", pair.row)));
            }
            if let Some(s) = &pair.symbol {
                symbol_of.insert(pair.row, s.clone());
            }
        }
        if let Some(missing) = x.iter().find(|r| !row_cols.contains_key(r)) {
            return Err(bad(format!("row {missing} has no pair")));
        }

        let mut rows_of: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for (&r, cs) in &row_cols {
            for &c in cs {
                rows_of.entry(c).or_default().push(r);
            }
        }
        let mut col_rows = BTreeMap::new();
        for &c in &y {
            let rows = rows_of.get(&c).cloned().unwrap_or_default();
            let [a, b] = <[NodeId; 2]>::try_from(rows.as_slice())
                .map_err(|_| bad(format!("column {c} must meet exactly two rows, meets {}", rows.len())))?;
            col_rows.insert(c, [a.min(b), a.max(b)]);
        }

        // Every vertex has degree two, so connectivity means one closed loop.
        let start = *x.iter().next().expect("X is nonempty");
        let mut seen_rows = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(r) = queue.pop_front() {
            for c in row_cols[&r] {
                for r2 in col_rows[&c] {
                    if seen_rows.insert(r2) {
                        queue.push_back(r2);
                    }
                }
            }
        }
        if seen_rows.len() != x.len() {
            return Err(bad("pairs do not form a single closed cycle".into()));
        }

        for (&r, cs) in &row_cols {
            for &c in cs {
                if topo.coop(r).contains(&c) {
                    return Err(CoopGraphError::CollidesWithLevelOne { cycle: id, row: r, col: c });
                }
            }
        }

        let mut gamma = BTreeMap::new();
        for &r in &x {
            let g = match &spec.gamma {
                Some(GammaSpec::PerRow(map)) => map.get(&r.to_string()).copied(),
                Some(GammaSpec::Uniform(g)) => Some(*g),
                None => None,
            }
            .or_else(|| symbol_of.get(&r).and_then(|s| symbols.get(s).copied()));
            match g {
                Some(g) if g >= 1 => {
                    gamma.insert(r, g);
                }
                _ => return Err(CoopGraphError::GammaMissing { cycle: id, row: r }),
            }
        }
        if let Some(GammaSpec::PerRow(map)) = &spec.gamma {
            if let Some(k) = map.keys().find(|k| k.parse::<NodeId>().map_or(true, |r| !x.contains(&r))) {
                return Err(bad(format!("gamma key {k:?} is not a row of the cycle")));
            }
        }

        Ok(Cycle { id, x, y, row_cols, col_rows, level: spec.level, gamma })
    }

    /// Y_{t;i}: the two columns of row `i`.
    pub fn cols_of(&self, i: NodeId) -> Option<[NodeId; 2]> {
        self.row_cols.get(&i).copied()
    }

    /// X_{t;j}: the two rows of column `j`.
    pub fn rows_of(&self, j: NodeId) -> Option<[NodeId; 2]> {
        self.col_rows.get(&j).copied()
    }

    pub fn cells(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.row_cols.iter().flat_map(|(&r, cs)| cs.iter().map(move |&c| (r, c)))
    }
}

/// Per-node sets indexed by level.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct NodeSets {
    /// L_i.
    pub depth: usize,
    /// R_{i;l}: cycles in which the node is a column, by level.
    pub r: BTreeMap<usize, BTreeSet<usize>>,
    /// T_{i;l}: cycles in which the node is a row, by level.
    pub t: BTreeMap<usize, BTreeSet<usize>>,
    pub helpers: Vec<BTreeSet<NodeId>>,
    pub cumulative: Vec<BTreeSet<NodeId>>,
    pub boosters: Vec<BTreeSet<NodeId>>,
    pub boosters_proof: Vec<BTreeSet<NodeId>>,
    pub v: BTreeMap<usize, BTreeSet<NodeId>>,
    pub eta: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone)]
pub struct CooperationGraph {
    topology: Arc<DsnTopology>,
    cycles: Vec<Cycle>,
    sets: Vec<NodeSets>,
}

impl PartialEq for CooperationGraph {
    fn eq(&self, other: &Self) -> bool {
        self.topology.same_network(&other.topology) && self.cycles == other.cycles
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CooperationMatrix {
    pub p: usize,
    /// Row-major, `d[(i-1)*p + (j-1)]`.
    pub d: Vec<usize>,
}

impl CooperationMatrix {
    pub fn get(&self, i: NodeId, j: NodeId) -> usize {
        self.d[(i - 1) * self.p + (j - 1)]
    }

    pub fn to_rows(&self) -> Vec<Vec<usize>> {
        self.d.chunks(self.p.max(1)).map(<[usize]>::to_vec).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub condition: u8,
    pub node: NodeId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    pub reading: &'static str,
    pub detail: String,
    pub sets: Vec<Vec<NodeId>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CompatReport {
    pub compatible: bool,
    pub violations: Vec<Violation>,
    /// Findings under the printed readings that do not affect the verdict.
    pub notes: Vec<Violation>,
}

fn set_vec(s: &BTreeSet<NodeId>) -> Vec<NodeId> {
    s.iter().copied().collect()
}

impl CooperationGraph {
    pub fn new(topology: Arc<DsnTopology>, specs: &[CycleSpec]) -> Result<Self, CoopGraphError> {
        let cycles = specs
            .iter()
            .enumerate()
            .map(|(n, s)| Cycle::from_spec(n + 1, s, &topology, topology.symbols()))
            .collect::<Result<Vec<_>, _>>()?;
        let sets = derive_sets(&topology, &cycles);
        Ok(Self { topology, cycles, sets })
    }

    /// Graph over the cycles listed in the topology document.
    pub fn from_topology(topology: Arc<DsnTopology>) -> Result<Self, CoopGraphError> {
        let specs = topology.cycle_specs().to_vec();
        Self::new(topology, &specs)
    }

    pub fn topology(&self) -> &Arc<DsnTopology> {
        &self.topology
    }

    pub fn cycles(&self) -> &[Cycle] {
        &self.cycles
    }

    pub fn cycle(&self, id: usize) -> &Cycle {
        &self.cycles[id - 1]
    }

    pub fn sets(&self, i: NodeId) -> &NodeSets {
        &self.sets[i - 1]
    }

    pub fn depth(&self, i: NodeId) -> usize {
        self.sets[i - 1].depth
    }

    /// I_i^l.
    pub fn helpers(&self, i: NodeId, l: usize) -> &BTreeSet<NodeId> {
        self.sets[i - 1].helpers.get(l).unwrap_or(&EMPTY)
    }

    /// A_i^l; saturates past the node's depth.
    pub fn cumulative(&self, i: NodeId, l: usize) -> &BTreeSet<NodeId> {
        let a = &self.sets[i - 1].cumulative;
        a.get(l.min(a.len() - 1)).unwrap_or(&EMPTY)
    }

    /// B_i^l in the form used by the hierarchy.
    pub fn boosters(&self, i: NodeId, l: usize) -> &BTreeSet<NodeId> {
        self.sets[i - 1].boosters.get(l).unwrap_or(&EMPTY)
    }

    /// B_i^l computed from the row-side cycles.
    pub fn boosters_proof(&self, i: NodeId, l: usize) -> &BTreeSet<NodeId> {
        self.sets[i - 1].boosters_proof.get(l).unwrap_or(&EMPTY)
    }

    pub fn r_set(&self, i: NodeId, l: usize) -> &BTreeSet<usize> {
        self.sets[i - 1].r.get(&l).unwrap_or(&EMPTY)
    }

    pub fn t_set(&self, i: NodeId, l: usize) -> &BTreeSet<usize> {
        self.sets[i - 1].t.get(&l).unwrap_or(&EMPTY)
    }

    pub fn v_set(&self, i: NodeId, l: usize) -> &BTreeSet<NodeId> {
        self.sets[i - 1].v.get(&l).unwrap_or(&EMPTY)
    }

    /// η_{i;l}, zero when no cycle feeds column `i` at level `l`.
    pub fn eta(&self, i: NodeId, l: usize) -> usize {
        self.sets[i - 1].eta.get(&l).copied().unwrap_or(0)
    }

    pub fn eta_total(&self, i: NodeId) -> usize {
        self.sets[i - 1].eta.values().sum()
    }

    /// Cycles in which `i` is a row, ascending by level then id.
    pub fn row_cycles(&self, i: NodeId) -> impl Iterator<Item = &Cycle> + '_ {
        self.sets[i - 1].t.values().flatten().map(move |&t| self.cycle(t))
    }

    pub fn max_level(&self) -> usize {
        self.cycles.iter().map(|c| c.level).max().unwrap_or(1)
    }

    pub fn cooperation_matrix(&self) -> CooperationMatrix {
        let p = self.topology.len();
        let mut d = vec![0; p * p];
        for i in 1..=p {
            for (l, set) in self.sets[i - 1].helpers.iter().enumerate().skip(1) {
                for &j in set {
                    let cell = &mut d[(i - 1) * p + (j - 1)];
                    if *cell == 0 {
                        *cell = l;
                    }
                }
            }
        }
        CooperationMatrix { p, d }
    }

    /// Columns reachable from `i` through level-`l` cycles that share columns.
    pub fn column_component(&self, i: NodeId, l: usize) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::from([i]);
        let mut queue = VecDeque::from([i]);
        while let Some(j) = queue.pop_front() {
            for &t in self.r_set(j, l) {
                for &c in &self.cycle(t).y {
                    if seen.insert(c) {
                        queue.push_back(c);
                    }
                }
            }
        }
        seen
    }

    pub fn check_compatible(&self) -> CompatReport {
        let topo = &self.topology;
        let mut violations = Vec::new();
        let mut notes = Vec::new();

        for i in topo.node_ids() {
            // Condition 1: one cycle per cell; the column sets of the
            // cycles a row belongs to are pairwise disjoint.
            let rows: Vec<&Cycle> = self.row_cycles(i).collect();
            for (a, ca) in rows.iter().enumerate() {
                for cb in &rows[a + 1..] {
                    if !ca.y.is_disjoint(&cb.y) {
                        violations.push(Violation {
                            condition: 1,
                            node: i,
                            level: None,
                            reading: "row",
                            detail: format!("cycles {} and {} share columns", ca.id, cb.id),
                            sets: vec![set_vec(&ca.y), set_vec(&cb.y)],
                        });
                    }
                }
            }
            let cols: Vec<&Cycle> = self.sets[i - 1].r.values().flatten().map(|&t| self.cycle(t)).collect();
            for (a, ca) in cols.iter().enumerate() {
                for cb in &cols[a + 1..] {
                    if !ca.y.is_disjoint(&cb.y) {
                        notes.push(Violation {
                            condition: 1,
                            node: i,
                            level: None,
                            reading: "column-literal",
                            detail: format!("cycles {} and {} share columns", ca.id, cb.id),
                            sets: vec![set_vec(&ca.y), set_vec(&cb.y)],
                        });
                    }
                }
            }

            // Condition 2.
            let m_i = topo.coop(i);
            for &l in self.sets[i - 1].r.keys() {
                for &j in self.v_set(i, l).iter().filter(|&&j| j != i) {
                    let vj = self.v_set(j, l);
                    let outside: BTreeSet<NodeId> =
                        vj.iter().copied().filter(|x| *x != i && !m_i.contains(x)).collect();
                    if !outside.is_empty() {
                        violations.push(Violation {
                            condition: 2,
                            node: i,
                            level: Some(l),
                            reading: "statement",
                            detail: format!("V_{{{j};{l}}} leaves M_{i}"),
                            sets: vec![set_vec(vj), set_vec(m_i)],
                        });
                    }
                    if !vj.is_subset(m_i) {
                        notes.push(Violation {
                            condition: 2,
                            node: i,
                            level: Some(l),
                            reading: "statement-literal",
                            detail: format!("V_{{{j};{l}}} is not inside M_{i}"),
                            sets: vec![set_vec(vj), set_vec(m_i)],
                        });
                    }
                }
                let comp = self.column_component(i, l);
                let escaped: BTreeSet<NodeId> = comp.iter().copied().filter(|x| *x != i && !m_i.contains(x)).collect();
                if !escaped.is_empty() {
                    violations.push(Violation {
                        condition: 2,
                        node: i,
                        level: Some(l),
                        reading: "proof",
                        detail: format!("level-{l} cycles through column {i} reach outside M_{i}"),
                        sets: vec![set_vec(&comp), set_vec(m_i)],
                    });
                }
            }
        }
        CompatReport { compatible: violations.is_empty(), violations, notes }
    }
}

fn derive_sets(topo: &DsnTopology, cycles: &[Cycle]) -> Vec<NodeSets> {
    let p = topo.len();
    let mut sets = vec![NodeSets::default(); p];
    for c in cycles {
        for &j in &c.y {
            sets[j - 1].r.entry(c.level).or_default().insert(c.id);
        }
        for &i in &c.x {
            sets[i - 1].t.entry(c.level).or_default().insert(c.id);
        }
    }
    for i in 1..=p {
        let s = &mut sets[i - 1];
        let top = s.r.keys().chain(s.t.keys()).copied().max().unwrap_or(1);
        s.depth = top.max(1);
        s.helpers = vec![BTreeSet::new(); s.depth + 1];
        s.helpers[1] = topo.coop(i).clone();
        for (&l, ts) in &s.r {
            let mut v = BTreeSet::new();
            let mut eta = 0;
            for &t in ts {
                let c = &cycles[t - 1];
                let rows = c.rows_of(i).expect("column of its own cycle");
                s.helpers[l].extend(rows);
                v.extend(c.y.iter().copied());
                eta = rows.iter().map(|r| c.gamma[r]).fold(eta, usize::max);
            }
            s.v.insert(l, v);
            s.eta.insert(l, eta);
        }
        s.cumulative = vec![BTreeSet::new(); s.depth + 1];
        for l in 1..=s.depth {
            let mut acc = s.cumulative[l - 1].clone();
            acc.extend(s.helpers[l].iter().copied());
            s.cumulative[l] = acc;
        }
    }

    let helpers = |sets: &[NodeSets], j: NodeId, l: usize| sets[j - 1].helpers.get(l).cloned().unwrap_or_default();
    let mut boosters = Vec::with_capacity(p);
    for i in 1..=p {
        let s = &sets[i - 1];
        let mut b = vec![BTreeSet::new(); s.depth + 1];
        let mut bp = vec![BTreeSet::new(); s.depth + 1];
        for l in 1..=s.depth {
            let excl = |x: &NodeId| *x != i && !s.cumulative[l].contains(x);
            for &j in &s.helpers[l] {
                b[l].extend(helpers(&sets, j, l).iter().copied().filter(excl));
            }
            if l == 1 {
                bp[1] = b[1].clone();
            } else {
                for &t in s.t.get(&l).into_iter().flatten() {
                    let c = &cycles[t - 1];
                    for j in c.cols_of(i).expect("row of its own cycle") {
                        bp[l].extend(helpers(&sets, j, c.level).iter().copied().filter(excl));
                    }
                }
            }
        }
        boosters.push((b, bp));
    }
    for (s, (b, bp)) in sets.iter_mut().zip(boosters) {
        s.boosters = b;
        s.boosters_proof = bp;
    }
    sets
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn fig4() -> CooperationGraph {
        CooperationGraph::from_topology(Arc::new(presets::fig4())).unwrap()
    }

    fn set(v: &[NodeId]) -> BTreeSet<NodeId> {
        v.iter().copied().collect()
    }

    #[test]
    fn fig4_node2_sets() {
        let g = fig4();
        assert_eq!(g.helpers(2, 1), &set(&[1, 3, 5]));
        assert_eq!(g.helpers(2, 2), &set(&[8, 9]));
        assert_eq!(g.helpers(2, 3), &set(&[10, 11]));
        assert_eq!(g.boosters(2, 1), &set(&[4, 6, 8]));
        assert_eq!(g.boosters(2, 2), &set(&[4, 6]));
        assert!(g.boosters(2, 3).is_empty());
        assert_eq!(g.depth(2), 3);
    }

    #[test]
    fn fig4_is_compatible() {
        let report = fig4().check_compatible();
        assert!(report.compatible, "{:?}", report.violations);
        // the printed column reading flags node 2 (two cycles with Y = {2,3})
        assert!(report.notes.iter().any(|n| n.condition == 1 && n.node == 2));
    }

    #[test]
    fn fig4_matrix_row2() {
        let d = fig4().cooperation_matrix();
        let row: Vec<usize> = (1..=12).map(|j| d.get(2, j)).collect();
        assert_eq!(row, vec![1, 0, 1, 0, 1, 0, 0, 2, 2, 3, 3, 0]);
    }

    #[test]
    fn matrix_matches_helper_sets() {
        let g = fig4();
        let d = g.cooperation_matrix();
        for i in 1..=12 {
            for j in 1..=12 {
                let l = d.get(i, j);
                if l > 0 {
                    assert!(g.helpers(i, l).contains(&j));
                } else {
                    assert!((1..=g.depth(i)).all(|l| !g.helpers(i, l).contains(&j)));
                }
            }
        }
    }

    #[test]
    fn blue_triangle_accepted() {
        let topo = Arc::new(presets::fig3_uniform());
        let spec: CycleSpec = serde_json::from_str(
            r#"{"X":[10,11,12],"Y":[4,5,6],"level":3,"gamma":1,
                "pairs":[{"row":10,"cols":[4,6]},{"row":11,"cols":[4,5]},{"row":12,"cols":[5,6]}]}"#,
        )
        .unwrap();
        let g = CooperationGraph::new(topo, &[spec]).unwrap();
        let c = g.cycle(1);
        assert_eq!(c.rows_of(4), Some([10, 11]));
        assert_eq!(c.rows_of(5), Some([11, 12]));
        assert_eq!(c.rows_of(6), Some([10, 12]));
    }

    #[test]
    fn no_cycles_is_depth_one() {
        let g = CooperationGraph::new(Arc::new(presets::fig3_uniform()), &[]).unwrap();
        for i in 1..=12 {
            assert_eq!(g.depth(i), 1);
            assert_eq!(g.helpers(i, 1), g.topology().coop(i));
        }
        assert!(g.check_compatible().compatible);
        let d = g.cooperation_matrix();
        for i in 1..=12 {
            for j in 1..=12 {
                let adj = g.topology().neighborhood(i).unwrap().contains(&j);
                assert_eq!(d.get(i, j), usize::from(adj));
            }
        }
    }

    #[test]
    fn single_node_matrix() {
        let t = DsnTopology::from_json(r#"{"nodes":[{"id":1,"k":1,"r":1,"delta":0}]}"#).unwrap();
        let g = CooperationGraph::new(Arc::new(t), &[]).unwrap();
        assert_eq!(g.cooperation_matrix().to_rows(), vec![vec![0]]);
    }

    #[test]
    fn overlap_mutation_violates_condition_one() {
        let g = CooperationGraph::from_topology(Arc::new(presets::fig4_overlap())).unwrap();
        let report = g.check_compatible();
        assert!(!report.compatible);
        assert!(report.violations.iter().any(|v| v.condition == 1 && v.node == 2));
    }

    #[test]
    fn malformed_cycles_rejected() {
        let topo = Arc::new(presets::fig3_uniform());
        let parse = |s: &str| serde_json::from_str::<CycleSpec>(s).unwrap();
        let cases = [
            (
                r#"{"X":[2,3],"Y":[8,9],"level":1,"gamma":1,"pairs":[{"row":2,"cols":[8,9]},{"row":3,"cols":[8,9]}]}"#,
                "cycle-level",
            ),
            (
                r#"{"X":[2,3],"Y":[8,99],"level":2,"gamma":1,"pairs":[{"row":2,"cols":[8,99]},{"row":3,"cols":[8,99]}]}"#,
                "node-out-of-range",
            ),
            (
                r#"{"X":[2,3],"Y":[8,9],"level":2,"pairs":[{"row":2,"cols":[8,9]},{"row":3,"cols":[8,9]}]}"#,
                "gamma-missing",
            ),
            (r#"{"X":[2,3],"Y":[8,9],"level":2,"gamma":1,"pairs":[{"row":2,"cols":[8,9]}]}"#, "malformed-cycle"),
            (r#"{"X":[2],"Y":[8],"level":2,"gamma":1,"pairs":[{"row":2,"cols":[8]}]}"#, "malformed-cycle"),
            (
                r#"{"X":[2,8],"Y":[8,9],"level":2,"gamma":1,"pairs":[{"row":2,"cols":[8,9]},{"row":8,"cols":[8,9]}]}"#,
                "malformed-cycle",
            ),
            (
                r#"{"X":[2,4],"Y":[3,9],"level":2,"gamma":1,"pairs":[{"row":2,"cols":[3,9]},{"row":4,"cols":[3,9]}]}"#,
                "cycle-collides-level1",
            ),
            (
                r#"{"X":[2,3,4],"Y":[8,9,10],"level":2,"gamma":1,"pairs":[{"row":2,"cols":[8,9]},{"row":3,"cols":[8,9]},{"row":4,"cols":[10,10]}]}"#,
                "malformed-cycle",
            ),
        ];
        for (doc, code) in cases {
            let err = CooperationGraph::new(Arc::clone(&topo), &[parse(doc)]).unwrap_err();
            assert_eq!(err.code(), code, "{doc}");
        }
    }

    #[test]
    fn symbol_gamma_expands_per_row() {
        let mut doc = presets::fig3_uniform().to_document();
        doc.symbols.insert("c".into(), 2);
        doc.cycles = vec![serde_json::from_str(
            r#"{"X":[2,3],"Y":[8,9],"level":2,
                "pairs":[{"row":2,"cols":[8,9],"symbol":"c"},{"row":3,"cols":[8,9],"symbol":"c"}]}"#,
        )
        .unwrap()];
        let g = CooperationGraph::from_topology(Arc::new(DsnTopology::from_document(doc).unwrap())).unwrap();
        assert_eq!(g.cycle(1).gamma, BTreeMap::from([(2, 2), (3, 2)]));
        assert_eq!(g.eta(8, 2), 2);
    }

    #[test]
    fn booster_readings_agree_on_fig4() {
        let g = fig4();
        for i in 1..=12 {
            for l in 1..=g.depth(i) {
                let b = g.boosters(i, l);
                assert!(b.is_disjoint(g.cumulative(i, l)));
                assert!(!b.contains(&i));
            }
        }
        assert_eq!(g.boosters(2, 2), g.boosters_proof(2, 2));
    }
}
