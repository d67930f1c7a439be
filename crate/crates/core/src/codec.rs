// SPDX-License-Identifier: Apache-2.0

//! Encoding, cooperative erasure decoding and recovery-latency simulation.
//!
//! Node j's parity is
//!
//! ```text
//! parity_j = m_j·A_{j,j} + s_{j;1}·U_j + Σ_{l≥2} s_{j;l}·V_{j;l}
//! ```
//!
//! where the aggregate s_{j;l} sums the cross factors of every message that
//! reaches column j at level l. A node decodes by solving for m_j and for
//! the aggregates it cannot cancel. Knowledge moves between nodes as whole
//! messages and as aggregates exposed by decoded nodes. From these a node
//! derives its own interference and extra parities m_j·B_{j,x} or
//! m_j·E_{j;l;t}.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codegen::{CodeInstance, Via};
use crate::field::{FieldContext, Gf};
use crate::linalg::Matrix;
use crate::topology::{Latency, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("node {0}: received symbols contradict the side information")]
    Inconsistent(NodeId),
    #[error("bad erasure pattern: {0}")]
    Pattern(String),
    #[error("bad symbol file: {0}")]
    Format(String),
}

impl DecodeError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::DimensionMismatch(_) => "dimension-mismatch",
            Self::Inconsistent(_) => "inconsistent",
            Self::Pattern(_) => "pattern",
            Self::Format(_) => "format",
        }
    }
}

fn symbol_width(field: &FieldContext) -> usize {
    if field.theta() <= 8 {
        1
    } else {
        2
    }
}

fn encode_symbols(field: &FieldContext, blocks: &[Vec<Gf>]) -> Vec<u8> {
    let w = symbol_width(field);
    let mut out = Vec::new();
    for x in blocks.iter().flatten() {
        if w == 1 {
            out.push(x.0 as u8);
        } else {
            out.extend_from_slice(&x.0.to_le_bytes());
        }
    }
    out
}

fn decode_symbols(field: &FieldContext, bytes: &[u8], lens: &[usize]) -> Result<Vec<Vec<Gf>>, DecodeError> {
    let w = symbol_width(field);
    let total: usize = lens.iter().sum();
    if bytes.len() != total * w {
        return Err(DecodeError::Format(format!("expected {} bytes, found {}", total * w, bytes.len())));
    }
    let mut vals = bytes.chunks(w).map(|c| Gf(if w == 1 { u16::from(c[0]) } else { u16::from_le_bytes([c[0], c[1]]) }));
    let mut out = Vec::with_capacity(lens.len());
    for &n in lens {
        let block: Vec<Gf> = vals.by_ref().take(n).collect();
        if let Some(bad) = block.iter().find(|x| !field.contains(**x)) {
            return Err(DecodeError::Format(format!("symbol {:#x} is outside GF({})", bad.0, field.q())));
        }
        out.push(block);
    }
    Ok(out)
}

/// Messages m_1, …, m_p.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageSet {
    pub blocks: Vec<Vec<Gf>>,
}

impl MessageSet {
    pub fn zeros(code: &CodeInstance) -> Self {
        let topo = code.topology();
        Self { blocks: topo.nodes().iter().map(|p| vec![Gf::ZERO; p.k]).collect() }
    }

    pub fn random(code: &CodeInstance, rng: &mut impl Rng) -> Self {
        let q = code.field().q();
        let topo = code.topology();
        Self {
            blocks: topo
                .nodes()
                .iter()
                .map(|p| (0..p.k).map(|_| Gf(rng.random_range(0..q) as u16)).collect())
                .collect(),
        }
    }

    /// Unit vector at message coordinate `pos` of node `i` (0-based).
    pub fn unit(code: &CodeInstance, i: NodeId, pos: usize) -> Self {
        let mut m = Self::zeros(code);
        m.blocks[i - 1][pos] = Gf::ONE;
        m
    }

    pub fn flat(&self) -> Vec<Gf> {
        self.blocks.concat()
    }

    pub fn to_bytes(&self, code: &CodeInstance) -> Vec<u8> {
        encode_symbols(code.field(), &self.blocks)
    }

    pub fn from_bytes(code: &CodeInstance, bytes: &[u8]) -> Result<Self, DecodeError> {
        let lens: Vec<usize> = code.topology().nodes().iter().map(|p| p.k).collect();
        Ok(Self { blocks: decode_symbols(code.field(), bytes, &lens)? })
    }
}

/// Codewords c_1, …, c_p, each (m_i | parity_i).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodewordSet {
    pub blocks: Vec<Vec<Gf>>,
}

impl CodewordSet {
    pub fn to_bytes(&self, code: &CodeInstance) -> Vec<u8> {
        encode_symbols(code.field(), &self.blocks)
    }

    pub fn from_bytes(code: &CodeInstance, bytes: &[u8]) -> Result<Self, DecodeError> {
        let lens: Vec<usize> = code.topology().nodes().iter().map(|p| p.n()).collect();
        Ok(Self { blocks: decode_symbols(code.field(), bytes, &lens)? })
    }

    pub fn parity(&self, code: &CodeInstance, i: NodeId) -> &[Gf] {
        &self.blocks[i - 1][code.topology().params(i).k..]
    }
}

/// Erased coordinates per node, 1-based as in the JSON form.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ErasurePattern {
    erased: BTreeMap<NodeId, BTreeSet<usize>>,
}

impl ErasurePattern {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_json(code: &CodeInstance, text: &str) -> Result<Self, DecodeError> {
        let raw: BTreeMap<String, Vec<usize>> =
            serde_json::from_str(text).map_err(|e| DecodeError::Pattern(e.to_string()))?;
        let mut p = Self::new();
        for (k, coords) in raw {
            let i: NodeId = k.trim().parse().map_err(|_| DecodeError::Pattern(format!("{k:?} is not a node id")))?;
            for c in coords {
                p.erase(code, i, c)?;
            }
        }
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.erased).expect("pattern serializes")
    }

    /// Erase coordinate `coord` (1-based) of node `i`.
    pub fn erase(&mut self, code: &CodeInstance, i: NodeId, coord: usize) -> Result<(), DecodeError> {
        let topo = code.topology();
        if !topo.contains(i) {
            return Err(DecodeError::Pattern(format!("unknown node {i}")));
        }
        let n = topo.params(i).n();
        if coord == 0 || coord > n {
            return Err(DecodeError::Pattern(format!("node {i}: coordinate {coord} outside 1..={n}")));
        }
        self.erased.entry(i).or_default().insert(coord);
        Ok(())
    }

    pub fn erase_node(&mut self, code: &CodeInstance, i: NodeId) {
        let n = code.topology().params(i).n();
        self.erased.insert(i, (1..=n).collect());
    }

    pub fn everything(code: &CodeInstance) -> Self {
        let mut p = Self::new();
        for i in code.topology().node_ids() {
            p.erase_node(code, i);
        }
        p
    }

    /// `counts[i]` erasures at node i, placed uniformly at random.
    pub fn random(
        code: &CodeInstance,
        counts: &BTreeMap<NodeId, usize>,
        rng: &mut impl Rng,
    ) -> Result<Self, DecodeError> {
        let mut p = Self::new();
        for (&i, &count) in counts {
            if !code.topology().contains(i) {
                return Err(DecodeError::Pattern(format!("unknown node {i}")));
            }
            let n = code.topology().params(i).n();
            if count > n {
                return Err(DecodeError::Pattern(format!("node {i}: {count} erasures exceed n = {n}")));
            }
            if count > 0 {
                let picks = sample(rng, n, count);
                p.erased.insert(i, picks.into_iter().map(|c| c + 1).collect());
            }
        }
        Ok(p)
    }

    pub fn erased(&self, i: NodeId) -> impl Iterator<Item = usize> + '_ {
        self.erased.get(&i).into_iter().flatten().copied()
    }

    pub fn count(&self, i: NodeId) -> usize {
        self.erased.get(&i).map_or(0, BTreeSet::len)
    }

    pub fn is_erased(&self, i: NodeId, coord: usize) -> bool {
        self.erased.get(&i).is_some_and(|s| s.contains(&coord))
    }

    /// Received view: `None` at every erased coordinate.
    pub fn apply(&self, cw: &CodewordSet) -> Received {
        Received {
            blocks: cw
                .blocks
                .iter()
                .enumerate()
                .map(|(n, c)| {
                    c.iter().enumerate().map(|(x, &v)| (!self.is_erased(n + 1, x + 1)).then_some(v)).collect()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Received {
    pub blocks: Vec<Vec<Option<Gf>>>,
}

/// c = m·G, split per node.
pub fn encode(code: &CodeInstance, m: &MessageSet) -> Result<CodewordSet, DecodeError> {
    let topo = code.topology();
    if m.blocks.len() != topo.len() || m.blocks.iter().zip(topo.nodes()).any(|(b, p)| b.len() != p.k) {
        return Err(DecodeError::DimensionMismatch("message lengths do not match k_i".into()));
    }
    let c = code.generator().left_mul_vec(&m.flat()).map_err(|e| DecodeError::DimensionMismatch(e.to_string()))?;
    Ok(CodewordSet {
        blocks: topo.node_ids().map(|i| c[code.codeword_offset(i)..code.codeword_offset(i + 1)].to_vec()).collect(),
    })
}

/// s_{j;l}: the aggregate entering column `j` at `level`, from the messages.
pub fn aggregate(code: &CodeInstance, m: &MessageSet, j: NodeId, level: usize) -> Vec<Gf> {
    let f = code.field();
    let mut acc = vec![Gf::ZERO; code.aggregate_width(j, level)];
    for link in code.links_into(j).filter(|l| l.via.level() == level) {
        let contrib = link.factor.left_mul_vec(&m.blocks[link.from - 1]).expect("factor rows match k");
        for (a, c) in acc.iter_mut().zip(contrib) {
            *a = f.add(*a, c);
        }
    }
    acc
}

/// One extra equation block m_i·F = value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtraParity {
    pub factor: Matrix,
    pub value: Vec<Gf>,
}

/// Side information handed to [`local_decode`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SideInfo {
    /// Known aggregates by level.
    pub aggregates: BTreeMap<usize, Vec<Gf>>,
    pub extras: Vec<ExtraParity>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalOutcome {
    pub message: Option<Vec<Gf>>,
    /// Aggregates pinned down by the solve, including the supplied ones.
    pub aggregates: BTreeMap<usize, Vec<Gf>>,
}

/// Solve node i's own equations given side information.
pub fn local_decode(
    code: &CodeInstance,
    i: NodeId,
    received: &[Option<Gf>],
    side: &SideInfo,
) -> Result<LocalOutcome, DecodeError> {
    let f = code.field();
    let p = *code.topology().params(i);
    if received.len() != p.n() {
        return Err(DecodeError::DimensionMismatch(format!(
            "node {i}: {} symbols, expected {}",
            received.len(),
            p.n()
        )));
    }
    let levels: Vec<usize> = code.aggregate_levels(i).into_iter().filter(|&l| code.aggregate_width(i, l) > 0).collect();
    let mut unknown_at = BTreeMap::new();
    let mut nvars = p.k;
    for &l in &levels {
        if !side.aggregates.contains_key(&l) {
            unknown_at.insert(l, nvars);
            nvars += code.aggregate_width(i, l);
        }
    }

    let a_diag = code.node(i).a_diag();
    let bands: BTreeMap<usize, Matrix> = levels.iter().map(|&l| (l, code.aggregate_rows(i, l))).collect();
    let mut rows: Vec<Vec<Gf>> = Vec::new();
    let mut rhs = Vec::new();
    for (c, v) in received.iter().enumerate().take(p.k) {
        if let Some(v) = v {
            let mut row = vec![Gf::ZERO; nvars];
            row[c] = Gf::ONE;
            rows.push(row);
            rhs.push(*v);
        }
    }
    for c in 0..p.r {
        let Some(mut v) = received[p.k + c] else { continue };
        let mut row = vec![Gf::ZERO; nvars];
        for x in 0..p.k {
            row[x] = a_diag.get(x, c);
        }
        for (&l, band) in &bands {
            match (unknown_at.get(&l), side.aggregates.get(&l)) {
                (Some(&off), _) => {
                    for y in 0..band.rows() {
                        row[off + y] = band.get(y, c);
                    }
                }
                (None, Some(s)) => {
                    for y in 0..band.rows() {
                        v = f.sub(v, f.mul(s[y], band.get(y, c)));
                    }
                }
                (None, None) => unreachable!("every level is known or unknown"),
            }
        }
        rows.push(row);
        rhs.push(v);
    }
    for extra in &side.extras {
        for c in 0..extra.factor.cols() {
            let mut row = vec![Gf::ZERO; nvars];
            for x in 0..p.k {
                row[x] = extra.factor.get(x, c);
            }
            rows.push(row);
            rhs.push(extra.value[c]);
        }
    }

    let mut aggregates: BTreeMap<usize, Vec<Gf>> =
        side.aggregates.iter().filter(|(l, _)| levels.contains(l)).map(|(&l, v)| (l, v.clone())).collect();
    if rows.is_empty() {
        return Ok(LocalOutcome { message: (p.k == 0).then(Vec::new), aggregates });
    }
    let coeff = Matrix::from_vec(f, rows.len(), nvars, rows.concat()).expect("rows are nvars wide");
    let sol = coeff
        .solve_partial(&rhs)
        .map_err(|e| DecodeError::DimensionMismatch(e.to_string()))?
        .ok_or(DecodeError::Inconsistent(i))?;
    let message = sol.all_determined(0..p.k).then(|| sol.values[..p.k].to_vec());
    for (&l, &off) in &unknown_at {
        let w = code.aggregate_width(i, l);
        if sol.all_determined(off..off + w) {
            aggregates.insert(l, sol.values[off..off + w].to_vec());
        }
    }
    Ok(LocalOutcome { message, aggregates })
}

/// How a piece of side information was obtained.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HelperUse {
    /// Interference at `level` cancelled from the interferers' messages.
    Direct { level: usize, from: Vec<NodeId> },
    /// Interference cancelled through aggregates of the other cycle columns.
    CycleSum { level: usize, columns: Vec<NodeId> },
    /// Extra parity read off `via`'s aggregate after removing `needs`.
    CrossParity { via: NodeId, level: usize, needs: Vec<NodeId> },
}

impl fmt::Display for HelperUse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |v: &[NodeId]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
        match self {
            HelperUse::Direct { level, from } => write!(f, "direct(l={level};{})", list(from)),
            HelperUse::CycleSum { level, columns } => write!(f, "cycle-sum(l={level};{})", list(columns)),
            HelperUse::CrossParity { via, level, needs } => {
                write!(f, "cross-parity(l={level};via={via};needs={})", list(needs))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum NodeStatus {
    RecoveredLocal,
    RecoveredCoop { level: usize, helpers: Vec<HelperUse> },
    Failed,
}

impl NodeStatus {
    pub fn is_recovered(&self) -> bool {
        !matches!(self, NodeStatus::Failed)
    }

    pub fn level(&self) -> Option<usize> {
        match self {
            NodeStatus::RecoveredLocal => Some(0),
            NodeStatus::RecoveredCoop { level, .. } => Some(*level),
            NodeStatus::Failed => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeReport {
    pub node: NodeId,
    #[serde(flatten)]
    pub status: NodeStatus,
    /// Completion time; absent for plain decoding, `null` when never.
    #[serde(skip_serializing_if = "Option::is_none", serialize_with = "exact_time")]
    pub time: Option<Option<Latency>>,
    #[serde(skip)]
    pub message: Option<Vec<Gf>>,
}

fn exact_time<S: serde::Serializer>(t: &Option<Option<Latency>>, s: S) -> Result<S::Ok, S::Error> {
    match t.as_ref().and_then(Option::as_ref) {
        Some(t) => s.serialize_str(&t.to_string()),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    pub time: String,
    pub node: NodeId,
    pub event: String,
    pub detail: String,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.time, self.node, self.event, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecoveryReport {
    pub nodes: Vec<NodeReport>,
    pub trace: Vec<TraceEvent>,
}

impl RecoveryReport {
    pub fn node(&self, i: NodeId) -> &NodeReport {
        &self.nodes[i - 1]
    }

    pub fn all_recovered(&self) -> bool {
        self.nodes.iter().all(|n| n.status.is_recovered())
    }

    pub fn any_failed(&self) -> bool {
        !self.all_recovered()
    }

    /// Recovered messages, `None` for failed nodes.
    pub fn messages(&self) -> Vec<Option<Vec<Gf>>> {
        self.nodes.iter().map(|n| n.message.clone()).collect()
    }

    pub fn trace_text(&self) -> String {
        self.trace.iter().map(|e| format!("{e}\n")).collect()
    }
}

/// What one node can see.
#[derive(Debug, Clone, Default)]
struct View {
    msgs: BTreeMap<NodeId, Vec<Gf>>,
    aggs: BTreeMap<(NodeId, usize), Vec<Gf>>,
}

struct Derived {
    side: SideInfo,
    /// Level at which each piece becomes usable, with its provenance.
    agg_uses: Vec<(usize, HelperUse)>,
    extras: Vec<(usize, ExtraParity, HelperUse)>,
}

fn add_into(f: &FieldContext, acc: &mut [Gf], v: &[Gf]) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a = f.add(*a, *x);
    }
}

/// Interference and extra parities node i can derive from its view.
fn derive(code: &CodeInstance, i: NodeId, view: &View) -> Derived {
    let f = code.field();
    let g = code.graph();
    let mut side = SideInfo::default();
    let mut agg_uses = Vec::new();
    for l in code.aggregate_levels(i) {
        let w = code.aggregate_width(i, l);
        if w == 0 {
            continue;
        }
        if let Some(v) = view.aggs.get(&(i, l)) {
            side.aggregates.insert(l, v.clone());
            continue;
        }
        let links: Vec<_> = code.links_into(i).filter(|k| k.via.level() == l).collect();
        if links.iter().all(|k| view.msgs.contains_key(&k.from)) {
            let mut acc = vec![Gf::ZERO; w];
            for k in &links {
                add_into(f, &mut acc, &k.factor.left_mul_vec(&view.msgs[&k.from]).expect("k rows"));
            }
            side.aggregates.insert(l, acc);
            agg_uses.push((1, HelperUse::Direct { level: l, from: links.iter().map(|k| k.from).collect() }));
            continue;
        }
        if l >= 2 {
            let cols: Vec<NodeId> = g.column_component(i, l).into_iter().filter(|&j| j != i).collect();
            if cols.iter().all(|&j| view.aggs.contains_key(&(j, l))) {
                let wide = cols.iter().map(|&j| code.aggregate_width(j, l)).max().unwrap_or(0).max(w);
                let mut acc = vec![Gf::ZERO; wide];
                for &j in &cols {
                    add_into(f, &mut acc, &view.aggs[&(j, l)]);
                }
                acc.truncate(w);
                side.aggregates.insert(l, acc);
                agg_uses.push((1, HelperUse::CycleSum { level: l, columns: cols }));
            }
        }
    }

    let mut extras = Vec::new();
    let mut done_cycles = BTreeSet::new();
    for link in code.links_from(i) {
        if link.factor.cols() == 0 {
            continue;
        }
        let j = link.to;
        let l = link.via.level();
        if let Via::Cycle { id, .. } = link.via {
            if done_cycles.contains(&id) {
                continue;
            }
        }
        let Some(s) = view.aggs.get(&(j, l)) else { continue };
        let others: Vec<_> = code.links_into(j).filter(|k| k.via.level() == l && k.from != i).collect();
        if !others.iter().all(|k| view.msgs.contains_key(&k.from)) {
            continue;
        }
        let mut value = s.clone();
        for k in &others {
            add_into(f, &mut value, &k.factor.left_mul_vec(&view.msgs[&k.from]).expect("k rows"));
        }
        let needs: Vec<NodeId> = others.iter().map(|k| k.from).collect();
        let use_ = HelperUse::CrossParity { via: j, level: l, needs };
        let (factor, value) = match link.via {
            Via::Level1 => (link.factor.clone(), value),
            Via::Cycle { id, .. } => {
                done_cycles.insert(id);
                let e = code.node(i).e(id).expect("row of its cycle");
                let gw = e.cols();
                (e, value[..gw].to_vec())
            }
        };
        extras.push((l, ExtraParity { factor, value }, use_));
    }
    Derived { side, agg_uses, extras }
}

struct Attempt {
    message: Vec<Gf>,
    level: usize,
    helpers: Vec<HelperUse>,
    aggregates: BTreeMap<usize, Vec<Gf>>,
}

/// Try to decode node i; `Ok(None)` when the view is not enough.
fn attempt(
    code: &CodeInstance,
    i: NodeId,
    received: &[Option<Gf>],
    view: &View,
) -> Result<Option<Attempt>, DecodeError> {
    let d = derive(code, i, view);
    let all =
        SideInfo { aggregates: d.side.aggregates.clone(), extras: d.extras.iter().map(|e| e.1.clone()).collect() };
    let full = local_decode(code, i, received, &all)?;
    let Some(message) = full.message.clone() else { return Ok(None) };
    let top = d.extras.iter().map(|e| e.0).max().unwrap_or(1).max(1);
    for level in 0..=top {
        let side = if level == 0 {
            SideInfo::default()
        } else {
            SideInfo {
                aggregates: d.side.aggregates.clone(),
                extras: d.extras.iter().filter(|e| e.0 <= level).map(|e| e.1.clone()).collect(),
            }
        };
        if level == top || local_decode(code, i, received, &side)?.message.is_some() {
            let helpers = if level == 0 {
                Vec::new()
            } else {
                d.agg_uses
                    .iter()
                    .map(|u| u.1.clone())
                    .chain(d.extras.iter().filter(|e| e.0 <= level).map(|e| e.2.clone()))
                    .collect()
            };
            return Ok(Some(Attempt { message, level, helpers, aggregates: full.aggregates }));
        }
    }
    unreachable!("the top level reproduces the full solve")
}

fn status_of(a: &Attempt) -> NodeStatus {
    if a.level == 0 {
        NodeStatus::RecoveredLocal
    } else {
        NodeStatus::RecoveredCoop { level: a.level, helpers: a.helpers.clone() }
    }
}

fn check_received(code: &CodeInstance, received: &Received) -> Result<(), DecodeError> {
    let topo = code.topology();
    if received.blocks.len() != topo.len() || received.blocks.iter().zip(topo.nodes()).any(|(b, p)| b.len() != p.n()) {
        return Err(DecodeError::DimensionMismatch("received lengths do not match n_i".into()));
    }
    Ok(())
}

/// Fixpoint decoding with ascending sweep order.
pub fn hierarchical_decode(code: &CodeInstance, received: &Received) -> Result<RecoveryReport, DecodeError> {
    let order: Vec<NodeId> = code.topology().node_ids().collect();
    decode_in_order(code, received, &order)
}

/// Fixpoint decoding sweeping the nodes in `order` each round.
pub fn decode_in_order(
    code: &CodeInstance,
    received: &Received,
    order: &[NodeId],
) -> Result<RecoveryReport, DecodeError> {
    check_received(code, received)?;
    let p = code.len();
    let mut view = View::default();
    let mut status: Vec<Option<NodeStatus>> = vec![None; p];
    let mut trace = Vec::new();
    let mut round = 0usize;
    loop {
        round += 1;
        let mut changed = false;
        for &i in order {
            let before = view.aggs.len();
            let recovered = status[i - 1].is_some();
            let outcome = match attempt(code, i, &received.blocks[i - 1], &view) {
                Ok(o) => o,
                Err(DecodeError::Inconsistent(_)) => {
                    trace.push(TraceEvent {
                        time: round.to_string(),
                        node: i,
                        event: "inconsistent".into(),
                        detail: "-".into(),
                    });
                    continue;
                }
                Err(e) => return Err(e),
            };
            let Some(a) = outcome else { continue };
            if !recovered {
                let st = status_of(&a);
                trace.push(TraceEvent {
                    time: round.to_string(),
                    node: i,
                    event: event_name(&st).into(),
                    detail: detail_of(&st),
                });
                status[i - 1] = Some(st);
                view.msgs.insert(i, a.message.clone());
                changed = true;
            }
            for (l, v) in a.aggregates {
                if let std::collections::btree_map::Entry::Vacant(e) = view.aggs.entry((i, l)) {
                    e.insert(v);
                    trace.push(TraceEvent {
                        time: round.to_string(),
                        node: i,
                        event: "expose".into(),
                        detail: format!("s[{i};{l}]"),
                    });
                }
            }
            changed |= view.aggs.len() != before;
        }
        if !changed {
            break;
        }
    }
    let nodes = (1..=p)
        .map(|i| {
            let st = status[i - 1].clone().unwrap_or(NodeStatus::Failed);
            if !st.is_recovered() {
                trace.push(TraceEvent { time: round.to_string(), node: i, event: "failed".into(), detail: "-".into() });
            }
            NodeReport { node: i, message: view.msgs.get(&i).cloned(), status: st, time: None }
        })
        .collect();
    Ok(RecoveryReport { nodes, trace })
}

fn event_name(st: &NodeStatus) -> &'static str {
    match st {
        NodeStatus::RecoveredLocal => "recovered-local",
        NodeStatus::RecoveredCoop { .. } => "recovered-coop",
        NodeStatus::Failed => "failed",
    }
}

fn detail_of(st: &NodeStatus) -> String {
    match st {
        NodeStatus::RecoveredCoop { level, helpers } => {
            let h: Vec<String> = helpers.iter().map(ToString::to_string).collect();
            format!("level={level} {}", if h.is_empty() { "-".into() } else { h.join(" ") })
        }
        _ => "level=0".into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Item {
    Msg(NodeId),
    Agg(NodeId, usize),
}

/// Event-driven recovery over the topology's link latencies.
///
/// A decoded node's message and aggregates leave it at its decode time and
/// reach every other node after the shortest-path delay. Nodes retry on
/// every arrival. Nodes that never decode report no time.
pub fn simulate_recovery(code: &CodeInstance, received: &Received) -> Result<RecoveryReport, DecodeError> {
    check_received(code, received)?;
    let topo = code.topology();
    let p = code.len();
    let dist: Vec<Vec<Option<Latency>>> =
        topo.node_ids().map(|i| topo.distances_from(i).expect("valid node")).collect();
    // item -> (origin time, value)
    let mut produced: BTreeMap<Item, (Latency, Vec<Gf>)> = BTreeMap::new();
    let mut status: Vec<Option<(NodeStatus, Latency)>> = vec![None; p];
    let mut trace = Vec::new();
    let mut pending: BTreeSet<Latency> = BTreeSet::from([Latency::zero()]);

    let arrival = |origin: NodeId, at: &Latency, to: NodeId| dist[origin - 1][to - 1].as_ref().map(|d| at + d);

    while let Some(now) = pending.pop_first() {
        loop {
            let mut changed = false;
            for y in 1..=p {
                let mut view = View::default();
                for (item, (at, v)) in &produced {
                    let origin = match item {
                        Item::Msg(x) | Item::Agg(x, _) => *x,
                    };
                    if arrival(origin, at, y).is_some_and(|t| t <= now) {
                        match item {
                            Item::Msg(x) => {
                                view.msgs.insert(*x, v.clone());
                            }
                            Item::Agg(x, l) => {
                                view.aggs.insert((*x, *l), v.clone());
                            }
                        }
                    }
                }
                let outcome = match attempt(code, y, &received.blocks[y - 1], &view) {
                    Ok(o) => o,
                    Err(DecodeError::Inconsistent(_)) => continue,
                    Err(e) => return Err(e),
                };
                let Some(a) = outcome else { continue };
                let mut fresh = Vec::new();
                if status[y - 1].is_none() {
                    let st = status_of(&a);
                    trace.push(TraceEvent {
                        time: now.to_string(),
                        node: y,
                        event: event_name(&st).into(),
                        detail: detail_of(&st),
                    });
                    status[y - 1] = Some((st, now.clone()));
                    fresh.push((Item::Msg(y), a.message.clone()));
                }
                for (l, v) in a.aggregates {
                    if !produced.contains_key(&Item::Agg(y, l)) {
                        trace.push(TraceEvent {
                            time: now.to_string(),
                            node: y,
                            event: "expose".into(),
                            detail: format!("s[{y};{l}]"),
                        });
                        fresh.push((Item::Agg(y, l), v));
                    }
                }
                for (item, v) in fresh {
                    for to in 1..=p {
                        if let Some(t) = arrival(y, &now, to) {
                            if t > now {
                                pending.insert(t);
                            }
                        }
                    }
                    produced.insert(item, (now.clone(), v));
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }

    let nodes = (1..=p)
        .map(|i| match status[i - 1].clone() {
            Some((st, t)) => NodeReport {
                node: i,
                status: st,
                time: Some(Some(t)),
                message: produced.get(&Item::Msg(i)).map(|(_, v)| v.clone()),
            },
            None => {
                trace.push(TraceEvent { time: "inf".into(), node: i, event: "failed".into(), detail: "-".into() });
                NodeReport { node: i, status: NodeStatus::Failed, time: Some(None), message: None }
            }
        })
        .collect();
    Ok(RecoveryReport { nodes, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codegen::{build_multi_level, build_single_level};
    use crate::coopgraph::CooperationGraph;
    use crate::presets;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256PlusPlus;
    use std::sync::Arc;

    fn fig3() -> CodeInstance {
        build_single_level(&Arc::new(presets::fig3_uniform()), None).unwrap()
    }

    fn fig4() -> CodeInstance {
        let g = Arc::new(CooperationGraph::from_topology(Arc::new(presets::fig4())).unwrap());
        build_multi_level(&g, None).unwrap()
    }

    fn example2() -> CodeInstance {
        build_single_level(&Arc::new(presets::example2()), None).unwrap()
    }

    fn rng(seed: u64) -> Xoshiro256PlusPlus {
        Xoshiro256PlusPlus::seed_from_u64(seed)
    }

    fn counts(pairs: &[(NodeId, usize)]) -> BTreeMap<NodeId, usize> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn encode_is_systematic_and_linear() {
        let c = fig3();
        let zero = encode(&c, &MessageSet::zeros(&c)).unwrap();
        assert!(zero.blocks.iter().flatten().all(|x| x.is_zero()));
        let mut r = rng(5);
        for _ in 0..20 {
            let m = MessageSet::random(&c, &mut r);
            let cw = encode(&c, &m).unwrap();
            for i in 1..=12 {
                assert_eq!(&cw.blocks[i - 1][..2], &m.blocks[i - 1][..]);
            }
        }
    }

    #[test]
    fn parity_matches_aggregate_form() {
        let f_code = fig4();
        let f = f_code.field();
        let mut r = rng(9);
        let m = MessageSet::random(&f_code, &mut r);
        let cw = encode(&f_code, &m).unwrap();
        for j in 1..=12 {
            let mut expect = f_code.node(j).a_diag().left_mul_vec(&m.blocks[j - 1]).unwrap();
            for l in f_code.aggregate_levels(j) {
                let s = aggregate(&f_code, &m, j, l);
                let part = f_code.aggregate_rows(j, l).left_mul_vec(&s).unwrap();
                add_into(f, &mut expect, &part);
            }
            assert_eq!(cw.parity(&f_code, j), &expect[..], "node {j}");
        }
    }

    #[test]
    fn unit_message_touches_own_and_partner_parity() {
        let c = fig3();
        for pos in 0..2 {
            let cw = encode(&c, &MessageSet::unit(&c, 1, pos)).unwrap();
            for i in 1..=12 {
                let nonzero = cw.parity(&c, i).iter().any(|x| !x.is_zero());
                assert_eq!(nonzero, i == 1 || i == 2, "node {i}");
            }
        }
    }

    #[test]
    fn local_decode_thresholds() {
        let c = fig3();
        let mut r = rng(11);
        let m = MessageSet::random(&c, &mut r);
        let cw = encode(&c, &m).unwrap();
        let recv = |erased: &[usize]| -> Vec<Option<Gf>> {
            cw.blocks[1].iter().enumerate().map(|(x, &v)| (!erased.contains(&x)).then_some(v)).collect()
        };
        let out = local_decode(&c, 2, &recv(&[]), &SideInfo::default()).unwrap();
        assert_eq!(out.message.as_deref(), Some(&m.blocks[1][..]));
        for erased in [[0, 1, 2], [2, 3, 4], [0, 3, 5]] {
            let out = local_decode(&c, 2, &recv(&erased), &SideInfo::default()).unwrap();
            assert_eq!(out.message.as_deref(), Some(&m.blocks[1][..]));
        }
        let out = local_decode(&c, 2, &recv(&[0, 1, 2, 3]), &SideInfo::default()).unwrap();
        assert!(out.message.is_none());
    }

    #[test]
    fn five_erasures_at_node2_reach_node4_through_node3() {
        let c = fig3();
        let m = MessageSet::random(&c, &mut rng(2));
        let cw = encode(&c, &m).unwrap();
        let pat = ErasurePattern::random(&c, &counts(&[(2, 5)]), &mut rng(3)).unwrap();
        let rep = hierarchical_decode(&c, &pat.apply(&cw)).unwrap();
        assert!(rep.all_recovered(), "{}", rep.trace_text());
        assert_eq!(rep.node(2).message.as_deref(), Some(&m.blocks[1][..]));
        let NodeStatus::RecoveredCoop { level, helpers } = &rep.node(2).status else { panic!("{:?}", rep.node(2)) };
        assert_eq!(*level, 1);
        assert!(helpers.contains(&HelperUse::CrossParity { via: 3, level: 1, needs: vec![4] }));
    }

    #[test]
    fn everything_erased_fails_everywhere() {
        let c = fig3();
        let cw = encode(&c, &MessageSet::random(&c, &mut rng(1))).unwrap();
        let rep = hierarchical_decode(&c, &ErasurePattern::everything(&c).apply(&cw)).unwrap();
        assert!(rep.nodes.iter().all(|n| n.status == NodeStatus::Failed));
    }

    #[test]
    fn multi_level_node2_reaches_d1() {
        // 7 erasures at node 2 with M_2 ∪ B_2^1 intact and everything else gone
        let c = fig4();
        let m = MessageSet::random(&c, &mut rng(4));
        let cw = encode(&c, &m).unwrap();
        let mut pat = ErasurePattern::new();
        for i in [7, 9, 10, 11, 12] {
            pat.erase_node(&c, i);
        }
        for x in 1..=6 {
            pat.erase(&c, 2, x).unwrap();
        }
        let rep = hierarchical_decode(&c, &pat.apply(&cw)).unwrap();
        assert_eq!(rep.node(2).message.as_deref(), Some(&m.blocks[1][..]));
    }

    #[test]
    fn example2_completes_after_two_hops() {
        let c = example2();
        let m = MessageSet::random(&c, &mut rng(8));
        let cw = encode(&c, &m).unwrap();
        let pat = ErasurePattern::random(&c, &counts(&[(2, 5)]), &mut rng(10)).unwrap();
        let rep = simulate_recovery(&c, &pat.apply(&cw)).unwrap();
        assert_eq!(rep.node(2).time, Some(Some(Latency::from_ratio(6, 5))));
        for i in [1, 3, 4, 5] {
            assert_eq!(rep.node(i).time, Some(Some(Latency::zero())));
        }
        assert_eq!(rep.node(2).message.as_deref(), Some(&m.blocks[1][..]));
    }

    #[test]
    fn local_and_clean_recoveries_take_no_time() {
        let c = example2();
        let cw = encode(&c, &MessageSet::random(&c, &mut rng(8))).unwrap();
        let rep = simulate_recovery(&c, &ErasurePattern::new().apply(&cw)).unwrap();
        assert!(rep.nodes.iter().all(|n| n.time == Some(Some(Latency::zero()))));
        let pat = ErasurePattern::random(&c, &counts(&[(2, 3)]), &mut rng(1)).unwrap();
        let rep = simulate_recovery(&c, &pat.apply(&cw)).unwrap();
        assert_eq!(rep.node(2).status, NodeStatus::RecoveredLocal);
        assert_eq!(rep.node(2).time, Some(Some(Latency::zero())));
    }

    #[test]
    fn symbol_files_round_trip() {
        let c = fig3();
        let m = MessageSet::random(&c, &mut rng(3));
        let bytes = m.to_bytes(&c);
        assert_eq!(bytes.len(), 24);
        assert_eq!(MessageSet::from_bytes(&c, &bytes).unwrap(), m);
        let cw = encode(&c, &m).unwrap();
        assert_eq!(CodewordSet::from_bytes(&c, &cw.to_bytes(&c)).unwrap(), cw);
        assert!(MessageSet::from_bytes(&c, &bytes[1..]).is_err());
        assert!(MessageSet::from_bytes(&c, &[0xFF; 24]).is_err());
    }

    #[test]
    fn pattern_json_is_one_based() {
        let c = fig3();
        let p = ErasurePattern::from_json(&c, r#"{"2":[1,6]}"#).unwrap();
        assert!(p.is_erased(2, 1) && p.is_erased(2, 6));
        assert_eq!(p.to_json(), r#"{"2":[1,6]}"#);
        assert!(ErasurePattern::from_json(&c, r#"{"2":[0]}"#).is_err());
        assert!(ErasurePattern::from_json(&c, r#"{"2":[7]}"#).is_err());
        assert!(ErasurePattern::from_json(&c, r#"{"13":[1]}"#).is_err());
    }
}
