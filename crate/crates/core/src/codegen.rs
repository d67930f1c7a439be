// SPDX-License-Identifier: Apache-2.0

//! Generator assembly and per-node correction hierarchies.
//!
//! Every node i owns one Cauchy matrix T_i. Its rows are split into the
//! message rows (k_i), the U_i rows (δ_i) and one V_{i;l} band per level
//! (η_{i;l} rows). Its columns are split into the parity columns (r_i), one
//! B_{i,j} band per level-1 partner j (δ_j wide, ascending j) and one
//! E_{i;l;t} band per cycle in which i is a row (γ_{i;t} wide, ascending
//! level then cycle id). The lower-right corner is never used.
//!
//! ```text
//!            r_i        B bands      E bands
//!        +----------+------------+-----------+
//!  k_i   |  A_{i,i} |  B_{i,j}.. |  E_{i;l;t}|
//!  δ_i   |  U_i     |            |           |
//!  η_i;l |  V_{i;l} |     (unused corner)    |
//!        +----------+------------------------+
//! ```
//!
//! Node i's message reaches node j's parity through A_{i,j} = B_{i,j}·U_j
//! for j ∈ M_i, or A_{i,j} = [E_{i;l;t} | 0]·V_{j;l} when (i, j) is a cell
//! of cycle t at level l.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::coopgraph::{CompatReport, CoopGraphError, CooperationGraph, CycleSpec, GammaSpec, PairSpec, Violation};
use crate::field::{FieldContext, FieldError, Gf};
use crate::linalg::{LinalgError, Matrix};
use crate::topology::{DsnTopology, EdgeDoc, Latency, Modulus, NodeDoc, NodeId, TopologyDocument, TopologyError};

/// Largest booster set whose subsets are enumerated eagerly.
pub const LAMBDA_ENUMERATION_LIMIT: usize = 16;

const MAGIC: &[u8; 4] = b"DSNC";
const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodegenError {
    #[error("node {0} has no level-1 cooperation partner")]
    EmptyCoop(NodeId),
    #[error("GF({q}) is too small: the construction needs {needed} distinct elements{}", if *.strict { " and a spare" } else { "" })]
    FieldTooSmall { needed: usize, q: usize, strict: bool },
    #[error("cooperation graph is not compatible ({} violations)", .0.len())]
    Incompatible(Vec<Violation>),
    #[error("node {node}: r = {r} must exceed delta + sum eta = {load}")]
    NoLocalCapability { node: NodeId, r: usize, load: usize },
    #[error("node {row} in cycle {cycle}: gamma {gamma} exceeds column width {eta}")]
    Padding { row: NodeId, cycle: usize, gamma: usize, eta: usize },
    #[error("helper set {w:?} is not inside B_{node}^{level} = {boosters:?}")]
    Domain { node: NodeId, level: usize, w: Vec<NodeId>, boosters: Vec<NodeId> },
    #[error("level {level} exceeds the depth {depth} of node {node}")]
    LevelOutOfRange { node: NodeId, level: usize, depth: usize },
    #[error("corrupt code container: {0}")]
    Container(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Graph(#[from] CoopGraphError),
}

impl CodegenError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::EmptyCoop(_) => "empty-coop",
            Self::FieldTooSmall { .. } => "field-too-small",
            Self::Incompatible(_) => "incompatible",
            Self::NoLocalCapability { .. } => "no-local-capability",
            Self::Padding { .. } => "padding",
            Self::Domain { .. } => "lambda-domain",
            Self::LevelOutOfRange { .. } => "level-out-of-range",
            Self::Container(_) => "container",
            Self::Field(_) => "field",
            Self::Linalg(_) => "linalg",
            Self::Topology(e) => e.code(),
            Self::Graph(e) => e.code(),
        }
    }
}

/// How a cross block reaches its column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Via {
    /// j ∈ M_i, factor B_{i,j}, δ_j wide.
    Level1,
    /// Cell of a cycle, factor [E_{i;l;t} | 0], η_{j;l} wide.
    Cycle { id: usize, level: usize },
}

impl Via {
    pub fn level(self) -> usize {
        match self {
            Via::Level1 => 1,
            Via::Cycle { level, .. } => level,
        }
    }
}

/// One nonzero off-diagonal block A_{from,to}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossLink {
    pub from: NodeId,
    pub to: NodeId,
    pub via: Via,
    /// B_{from,to}, padded to the width of the aggregate it feeds.
    pub factor: Matrix,
    /// A_{from,to} = factor · (U_to or V_{to;l}).
    pub product: Matrix,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Band {
    start: usize,
    len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeCode {
    pub elements_a: Vec<Gf>,
    pub elements_b: Vec<Gf>,
    /// The node's Cauchy matrix T_i.
    pub t: Matrix,
    k: usize,
    r: usize,
    delta: usize,
    v_rows: BTreeMap<usize, Band>,
    b_cols: BTreeMap<NodeId, Band>,
    e_cols: BTreeMap<usize, Band>,
}

impl NodeCode {
    pub fn a_diag(&self) -> Matrix {
        self.t.block(0, self.k, 0, self.r)
    }

    pub fn u(&self) -> Matrix {
        self.t.block(self.k, self.delta, 0, self.r)
    }

    /// V_{i;l}; zero rows when no cycle feeds this column at level l.
    pub fn v(&self, l: usize) -> Option<Matrix> {
        self.v_rows.get(&l).map(|b| self.t.block(b.start, b.len, 0, self.r))
    }

    pub fn b(&self, j: NodeId) -> Option<Matrix> {
        self.b_cols.get(&j).map(|b| self.t.block(0, self.k, b.start, b.len))
    }

    pub fn e(&self, cycle: usize) -> Option<Matrix> {
        self.e_cols.get(&cycle).map(|b| self.t.block(0, self.k, b.start, b.len))
    }

    pub fn levels(&self) -> impl Iterator<Item = usize> + '_ {
        self.v_rows.keys().copied()
    }
}

#[derive(Debug, Clone)]
pub struct CodeInstance {
    graph: Arc<CooperationGraph>,
    field: Arc<FieldContext>,
    nodes: Vec<NodeCode>,
    links: Vec<CrossLink>,
    generator: Matrix,
    offsets: Vec<usize>,
    msg_offsets: Vec<usize>,
}

impl PartialEq for CodeInstance {
    fn eq(&self, other: &Self) -> bool {
        *self.field == *other.field && *self.graph == *other.graph && self.nodes == other.nodes
    }
}

/// Sizes (u_i, v_i) of node i's Cauchy matrix.
pub fn cauchy_shape(graph: &CooperationGraph, i: NodeId) -> (usize, usize) {
    let topo = graph.topology();
    let p = topo.params(i);
    let eta: usize = (2..=graph.depth(i)).map(|l| graph.eta(i, l)).sum();
    let u = p.k + p.delta + eta;
    let deltas: usize = topo.coop(i).iter().map(|&j| topo.params(j).delta).sum();
    let gammas: usize = graph.row_cycles(i).map(|c| c.gamma[&i]).sum();
    (u, p.r + deltas + gammas)
}

fn resolve_field(
    topo: &DsnTopology,
    field: Option<Arc<FieldContext>>,
    needed: usize,
    strict: bool,
) -> Result<Arc<FieldContext>, CodegenError> {
    let ctx = match field {
        Some(f) => f,
        None => {
            let theta = topo.theta().or_else(|| topo.modulus().map(|m| (31 - m.leading_zeros()) as u8));
            match (theta, topo.modulus()) {
                (Some(t), Some(m)) => Arc::new(FieldContext::with_modulus(t, m)?),
                (Some(t), None) => Arc::new(FieldContext::new(t)?),
                (None, _) => Arc::new(FieldContext::smallest_with_size(needed + usize::from(strict))?),
            }
        }
    };
    let ok = if strict { ctx.q() > needed } else { ctx.q() >= needed };
    if ok {
        Ok(ctx)
    } else {
        Err(CodegenError::FieldTooSmall { needed, q: ctx.q(), strict })
    }
}

fn max_shape(graph: &CooperationGraph) -> usize {
    graph
        .topology()
        .node_ids()
        .map(|i| {
            let (u, v) = cauchy_shape(graph, i);
            u + v
        })
        .max()
        .unwrap_or(0)
}

fn check_coop(topo: &DsnTopology) -> Result<(), CodegenError> {
    match topo.node_ids().find(|&i| topo.coop(i).is_empty()) {
        Some(i) => Err(CodegenError::EmptyCoop(i)),
        None => Ok(()),
    }
}

/// Single-level construction over the topology's cooperation sets.
///
/// Cycles listed in the topology are ignored. The field is taken from
/// `field`, then from the topology, then chosen as the smallest one with
/// more than max_i(n_i + δ_i + Σ_{j∈M_i} δ_j) elements.
pub fn build_single_level(
    topology: &Arc<DsnTopology>,
    field: Option<Arc<FieldContext>>,
) -> Result<CodeInstance, CodegenError> {
    check_coop(topology)?;
    let graph = Arc::new(CooperationGraph::new(Arc::clone(topology), &[])?);
    let ctx = resolve_field(topology, field, max_shape(&graph), true)?;
    assemble(graph, ctx)
}

/// Multi-level construction over a compatible cooperation graph.
pub fn build_multi_level(
    graph: &Arc<CooperationGraph>,
    field: Option<Arc<FieldContext>>,
) -> Result<CodeInstance, CodegenError> {
    let topo = graph.topology();
    check_coop(topo)?;
    let report: CompatReport = graph.check_compatible();
    if !report.compatible {
        return Err(CodegenError::Incompatible(report.violations));
    }
    for i in topo.node_ids() {
        let p = topo.params(i);
        let load = p.delta + graph.eta_total(i);
        if p.r <= load {
            return Err(CodegenError::NoLocalCapability { node: i, r: p.r, load });
        }
    }
    let ctx = resolve_field(topo, field, max_shape(graph), false)?;
    assemble(Arc::clone(graph), ctx)
}

fn assemble(graph: Arc<CooperationGraph>, field: Arc<FieldContext>) -> Result<CodeInstance, CodegenError> {
    let topo = Arc::clone(graph.topology());
    let mut nodes = Vec::with_capacity(topo.len());
    for i in topo.node_ids() {
        let p = topo.params(i);
        let (u, v) = cauchy_shape(&graph, i);
        if u + v > field.q() {
            return Err(CodegenError::FieldTooSmall { needed: u + v, q: field.q(), strict: false });
        }
        let elems = field.enumerate_elements(u + v)?;
        let (a, b) = elems.split_at(u);
        let t = Matrix::cauchy(&field, a, b)?;

        let mut v_rows = BTreeMap::new();
        let mut row = p.k + p.delta;
        for l in 2..=graph.depth(i) {
            let h = graph.eta(i, l);
            v_rows.insert(l, Band { start: row, len: h });
            row += h;
        }
        let mut b_cols = BTreeMap::new();
        let mut col = p.r;
        for &j in topo.coop(i) {
            let w = topo.params(j).delta;
            b_cols.insert(j, Band { start: col, len: w });
            col += w;
        }
        let mut e_cols = BTreeMap::new();
        for c in graph.row_cycles(i) {
            let w = c.gamma[&i];
            e_cols.insert(c.id, Band { start: col, len: w });
            col += w;
        }
        debug_assert_eq!((row, col), (u, v));
        nodes.push(NodeCode {
            elements_a: a.to_vec(),
            elements_b: b.to_vec(),
            t,
            k: p.k,
            r: p.r,
            delta: p.delta,
            v_rows,
            b_cols,
            e_cols,
        });
    }

    let mut links = Vec::new();
    for i in topo.node_ids() {
        let node = &nodes[i - 1];
        for &j in topo.coop(i) {
            let factor = node.b(j).expect("band per partner");
            let product = factor.mat_mul(&nodes[j - 1].u())?;
            links.push(CrossLink { from: i, to: j, via: Via::Level1, factor, product });
        }
        for c in graph.row_cycles(i) {
            let e = node.e(c.id).expect("band per cycle");
            for j in c.cols_of(i).expect("row of its cycle") {
                let eta = graph.eta(j, c.level);
                let gamma = c.gamma[&i];
                if gamma > eta {
                    return Err(CodegenError::Padding { row: i, cycle: c.id, gamma, eta });
                }
                let factor = e.pad_columns(eta)?;
                let v = nodes[j - 1].v(c.level).expect("column has a band at this level");
                let product = factor.mat_mul(&v)?;
                links.push(CrossLink { from: i, to: j, via: Via::Cycle { id: c.id, level: c.level }, factor, product });
            }
        }
    }
    links.sort_by_key(|l| (l.from, l.to, l.via));

    let mut offsets = Vec::with_capacity(topo.len() + 1);
    let mut msg_offsets = Vec::with_capacity(topo.len() + 1);
    let (mut o, mut mo) = (0, 0);
    for p in topo.nodes() {
        offsets.push(o);
        msg_offsets.push(mo);
        o += p.n();
        mo += p.k;
    }
    offsets.push(o);
    msg_offsets.push(mo);

    let mut g = Matrix::zeros(&field, mo, o);
    for i in topo.node_ids() {
        let k = topo.params(i).k;
        g.paste(msg_offsets[i - 1], offsets[i - 1], &Matrix::identity(&field, k));
        g.paste(msg_offsets[i - 1], offsets[i - 1] + k, &nodes[i - 1].a_diag());
    }
    for link in &links {
        let kj = topo.params(link.to).k;
        let r0 = msg_offsets[link.from - 1];
        let c0 = offsets[link.to - 1] + kj;
        for r in 0..link.product.rows() {
            for c in 0..link.product.cols() {
                let cur = g.get(r0 + r, c0 + c);
                g.set(r0 + r, c0 + c, field.add(cur, link.product.get(r, c)));
            }
        }
    }

    Ok(CodeInstance { graph, field, nodes, links, generator: g, offsets, msg_offsets })
}

/// Parity columns of G with their block layout.
#[derive(Debug, Clone)]
pub struct NonSystematic {
    pub matrix: Matrix,
    /// Row offset of each node's message block, plus the total.
    pub row_offsets: Vec<usize>,
    /// Column offset of each node's parity block, plus the total.
    pub col_offsets: Vec<usize>,
}

impl NonSystematic {
    pub fn block(&self, i: NodeId, j: NodeId) -> Matrix {
        let (r0, r1) = (self.row_offsets[i - 1], self.row_offsets[i]);
        let (c0, c1) = (self.col_offsets[j - 1], self.col_offsets[j]);
        self.matrix.block(r0, r1 - r0, c0, c1 - c0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "flag", rename_all = "kebab-case")]
pub enum HierarchyFlag {
    /// `unresolved` is the level-1 value when the node's own V-bands stay unknown.
    LevelOneDiscrepancy {
        reported: usize,
        unresolved: usize,
    },
    LambdaBelowD {
        level: usize,
        lambda: usize,
        d: usize,
    },
    BSetReadingsDiffer {
        level: usize,
        statement: Vec<NodeId>,
        proof: Vec<NodeId>,
    },
    StagnantHelpers {
        level: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LevelSets {
    pub level: usize,
    pub helpers: Vec<NodeId>,
    pub cumulative: Vec<NodeId>,
    pub boosters: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeHierarchy {
    pub node: NodeId,
    pub depth: usize,
    /// d_{i,0}, …, d_{i,L_i}.
    pub d: Vec<usize>,
    pub levels: Vec<LevelSets>,
    pub flags: Vec<HierarchyFlag>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EccHierarchy {
    pub nodes: Vec<NodeHierarchy>,
}

impl EccHierarchy {
    pub fn node(&self, i: NodeId) -> &NodeHierarchy {
        &self.nodes[i - 1]
    }
}

fn fmt_set(s: &[NodeId]) -> String {
    let inner: Vec<String> = s.iter().map(ToString::to_string).collect();
    format!("{{{}}}", inner.join(","))
}

impl NodeHierarchy {
    /// `d=(3,7); I^1={1,3,5}; B^1={4,6,8}` style line.
    pub fn summary_line(&self) -> String {
        let d: Vec<String> = self.d.iter().map(ToString::to_string).collect();
        let mut out = format!("d=({})", d.join(","));
        for ls in &self.levels {
            let _ = write!(out, "; I^{l}={}; B^{l}={}", fmt_set(&ls.helpers), fmt_set(&ls.boosters), l = ls.level);
        }
        out
    }
}

impl CodeInstance {
    pub fn field(&self) -> &Arc<FieldContext> {
        &self.field
    }

    pub fn graph(&self) -> &Arc<CooperationGraph> {
        &self.graph
    }

    pub fn topology(&self) -> &Arc<DsnTopology> {
        self.graph.topology()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: NodeId) -> &NodeCode {
        &self.nodes[i - 1]
    }

    pub fn links(&self) -> &[CrossLink] {
        &self.links
    }

    pub fn links_into(&self, j: NodeId) -> impl Iterator<Item = &CrossLink> + '_ {
        self.links.iter().filter(move |l| l.to == j)
    }

    pub fn links_from(&self, i: NodeId) -> impl Iterator<Item = &CrossLink> + '_ {
        self.links.iter().filter(move |l| l.from == i)
    }

    pub fn link(&self, from: NodeId, to: NodeId) -> Option<&CrossLink> {
        self.links.iter().find(|l| l.from == from && l.to == to)
    }

    /// Width of the aggregate feeding column `j` at `level`.
    pub fn aggregate_width(&self, j: NodeId, level: usize) -> usize {
        if level == 1 {
            self.topology().params(j).delta
        } else {
            self.graph.eta(j, level)
        }
    }

    /// Levels at which column `j` carries an aggregate row band.
    pub fn aggregate_levels(&self, j: NodeId) -> Vec<usize> {
        std::iter::once(1).chain(self.nodes[j - 1].levels()).collect()
    }

    /// Row band (U_j or V_{j;l}) multiplying the level-`level` aggregate.
    pub fn aggregate_rows(&self, j: NodeId, level: usize) -> Matrix {
        if level == 1 {
            self.nodes[j - 1].u()
        } else {
            self.nodes[j - 1].v(level).expect("band exists for every level up to the depth")
        }
    }

    /// A_{i,j}; the zero block when node i's message does not reach j.
    pub fn a(&self, i: NodeId, j: NodeId) -> Matrix {
        if i == j {
            return self.nodes[i - 1].a_diag();
        }
        let topo = self.topology();
        self.link(i, j)
            .map(|l| l.product.clone())
            .unwrap_or_else(|| Matrix::zeros(&self.field, topo.params(i).k, topo.params(j).r))
    }

    pub fn generator(&self) -> &Matrix {
        &self.generator
    }

    /// Column offset of node i's codeword inside a full codeword.
    pub fn codeword_offset(&self, i: NodeId) -> usize {
        self.offsets[i - 1]
    }

    pub fn message_offset(&self, i: NodeId) -> usize {
        self.msg_offsets[i - 1]
    }

    pub fn total_message_len(&self) -> usize {
        *self.msg_offsets.last().expect("offsets end with the total")
    }

    pub fn total_codeword_len(&self) -> usize {
        *self.offsets.last().expect("offsets end with the total")
    }

    pub fn nonsystematic_component(&self) -> NonSystematic {
        let topo = self.topology();
        let mut cols = Vec::new();
        let mut col_offsets = Vec::with_capacity(topo.len() + 1);
        let mut o = 0;
        for i in topo.node_ids() {
            let p = topo.params(i);
            col_offsets.push(o);
            cols.extend(self.offsets[i - 1] + p.k..self.offsets[i]);
            o += p.r;
        }
        col_offsets.push(o);
        NonSystematic {
            matrix: self.generator.select_columns(&cols),
            row_offsets: self.msg_offsets.clone(),
            col_offsets,
        }
    }

    /// Block-level support of the non-systematic component, as labels.
    pub fn block_pattern(&self) -> Vec<Vec<String>> {
        let p = self.len();
        let mut grid = vec![vec![".".to_string(); p]; p];
        for (i, row) in grid.iter_mut().enumerate() {
            row[i] = "A".into();
        }
        for l in &self.links {
            grid[l.from - 1][l.to - 1] = match l.via {
                Via::Level1 => "BU".into(),
                Via::Cycle { level, .. } => format!("EV{level}"),
            };
        }
        grid
    }

    pub fn hierarchy(&self) -> EccHierarchy {
        EccHierarchy { nodes: self.topology().node_ids().map(|i| self.node_hierarchy(i)).collect() }
    }

    pub fn node_hierarchy(&self, i: NodeId) -> NodeHierarchy {
        let g = &self.graph;
        let topo = self.topology();
        let p = topo.params(i);
        let depth = g.depth(i);
        let eta: usize = (2..=depth).map(|l| g.eta(i, l)).sum();
        let partner_deltas: usize = topo.coop(i).iter().map(|&j| topo.params(j).delta).sum();
        let d1 = p.r + partner_deltas;
        let mut d = vec![p.r - p.delta - eta, d1];
        for l in 2..=depth {
            let extra: usize = g.t_set(i, l).iter().map(|&t| g.cycle(t).gamma[&i]).sum();
            d.push(d[l - 1] + extra);
        }

        let mut flags = Vec::new();
        if eta > 0 {
            flags.push(HierarchyFlag::LevelOneDiscrepancy { reported: d1, unresolved: d1 - eta });
        }
        let mut levels = Vec::new();
        for l in 1..=depth {
            let b: Vec<NodeId> = g.boosters(i, l).iter().copied().collect();
            levels.push(LevelSets {
                level: l,
                helpers: g.helpers(i, l).iter().copied().collect(),
                cumulative: g.cumulative(i, l).iter().copied().collect(),
                boosters: b.clone(),
            });
            if g.helpers(i, l).is_empty() {
                flags.push(HierarchyFlag::StagnantHelpers { level: l });
            }
            if g.boosters(i, l) != g.boosters_proof(i, l) {
                flags.push(HierarchyFlag::BSetReadingsDiffer {
                    level: l,
                    statement: b.clone(),
                    proof: g.boosters_proof(i, l).iter().copied().collect(),
                });
            }
            let full = self.lambda_unchecked(i, l, g.boosters(i, l));
            if full < d[l] {
                flags.push(HierarchyFlag::LambdaBelowD { level: l, lambda: full, d: d[l] });
            }
        }
        NodeHierarchy { node: i, depth, d, levels, flags }
    }

    /// λ_{i,l;W}: erasures node i tolerates at level l when A_i^l ∪ W decode.
    pub fn lambda(&self, i: NodeId, level: usize, w: &BTreeSet<NodeId>) -> Result<usize, CodegenError> {
        let depth = self.graph.depth(i);
        if level > depth {
            return Err(CodegenError::LevelOutOfRange { node: i, level, depth });
        }
        let b = if level == 0 { BTreeSet::new() } else { self.graph.boosters(i, level).clone() };
        if !w.is_subset(&b) {
            return Err(CodegenError::Domain {
                node: i,
                level,
                w: w.iter().copied().collect(),
                boosters: b.into_iter().collect(),
            });
        }
        if level == 0 {
            return Ok(self.node_hierarchy(i).d[0]);
        }
        Ok(self.lambda_unchecked(i, level, w))
    }

    fn lambda_unchecked(&self, i: NodeId, level: usize, w: &BTreeSet<NodeId>) -> usize {
        let g = &self.graph;
        let topo = self.topology();
        let mut known: BTreeSet<NodeId> = g.cumulative(i, level).clone();
        known.extend(w.iter().copied());
        let covered = |s: &BTreeSet<NodeId>| s.iter().all(|x| *x == i || known.contains(x));
        let mut total = topo.params(i).r;
        for &j in topo.coop(i) {
            if covered(topo.coop(j)) {
                total += topo.params(j).delta;
            }
        }
        for l in 2..=level {
            for &t in g.t_set(i, l) {
                let c = g.cycle(t);
                let cols = c.cols_of(i).expect("row of its cycle");
                if cols.iter().any(|&j| known.contains(&j) && covered(g.helpers(j, c.level))) {
                    total += c.gamma[&i];
                }
            }
        }
        total
    }

    /// Every (W, λ) pair at one level; `None` when B_i^l is too large.
    pub fn lambda_table(&self, i: NodeId, level: usize) -> Option<Vec<(BTreeSet<NodeId>, usize)>> {
        let b: Vec<NodeId> = self.graph.boosters(i, level).iter().copied().collect();
        if b.len() > LAMBDA_ENUMERATION_LIMIT {
            return None;
        }
        let mut out = Vec::with_capacity(1 << b.len());
        for mask in 0u32..(1u32 << b.len()) {
            let w: BTreeSet<NodeId> =
                b.iter().enumerate().filter(|(n, _)| mask & (1 << n) != 0).map(|(_, &x)| x).collect();
            let lam = self.lambda_unchecked(i, level, &w);
            out.push((w, lam));
        }
        Some(out)
    }

    /// Block map and hierarchy table as plain text.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let topo = self.topology();
        let _ = writeln!(
            out,
            "GF(2^{}) modulus 0x{:X}; {} nodes; {} cycles; G is {}x{}",
            self.field.theta(),
            self.field.modulus(),
            topo.len(),
            self.graph.cycles().len(),
            self.generator.rows(),
            self.generator.cols()
        );
        let _ = writeln!(out, "block map (row = message, column = parity):");
        for (i, row) in self.block_pattern().iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|c| format!("{c:>4}")).collect();
            let _ = writeln!(out, "{:>4} {}", i + 1, cells.join(""));
        }
        let _ = writeln!(out, "hierarchy:");
        for h in self.hierarchy().nodes {
            let _ = writeln!(out, "{:>4}  {}", h.node, h.summary_line());
        }
        out
    }

    /// Serialize into the binary container.
    pub fn to_bytes(&self) -> Vec<u8> {
        let topo = self.topology();
        let mut w = Writer::default();
        w.bytes(MAGIC);
        w.u16(VERSION);
        w.u8(self.field.theta());
        w.u32(self.field.modulus());
        w.u32(topo.len() as u32);
        for p in topo.nodes() {
            w.u32(p.k as u32);
            w.u32(p.r as u32);
            w.u32(p.delta as u32);
        }
        let doc = topo.to_document();
        w.u32(doc.edges.len() as u32);
        for e in &doc.edges {
            w.u32(e.a as u32);
            w.u32(e.b as u32);
            match &e.t {
                Some(t) => {
                    w.u8(1);
                    w.str(&t.to_string());
                }
                None => w.u8(0),
            }
        }
        for i in topo.node_ids() {
            w.u32(topo.coop(i).len() as u32);
            for &j in topo.coop(i) {
                w.u32(j as u32);
            }
        }
        w.u32(self.graph.cycles().len() as u32);
        for c in self.graph.cycles() {
            w.u32(c.level as u32);
            w.u32(c.x.len() as u32);
            for (&row, cols) in &c.row_cols {
                w.u32(row as u32);
                w.u32(cols[0] as u32);
                w.u32(cols[1] as u32);
                w.u32(c.gamma[&row] as u32);
            }
        }
        for n in &self.nodes {
            w.u32(n.elements_a.len() as u32);
            w.u32(n.elements_b.len() as u32);
            for x in n.elements_a.iter().chain(&n.elements_b) {
                w.u16(x.0);
            }
        }
        for n in &self.nodes {
            let mut blocks = vec![n.a_diag(), n.u()];
            blocks.extend(n.v_rows.keys().map(|&l| n.v(l).expect("listed level")));
            blocks.extend(n.b_cols.keys().map(|&j| n.b(j).expect("listed partner")));
            blocks.extend(n.e_cols.keys().map(|&t| n.e(t).expect("listed cycle")));
            for b in blocks {
                w.u32(b.rows() as u32);
                w.u32(b.cols() as u32);
                for x in b.data() {
                    w.u16(x.0);
                }
            }
        }
        w.0
    }

    /// Parse a container, rebuild the code and check it matches the payload.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodegenError> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(CodegenError::Container("bad magic".into()));
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(CodegenError::Container(format!("unsupported version {version}")));
        }
        let theta = r.u8()?;
        let modulus = r.u32()?;
        let p = r.u32()? as usize;
        let mut nodes = Vec::with_capacity(p.min(1 << 16));
        for id in 1..=p {
            nodes.push(NodeDoc { id, k: r.u32()? as usize, r: r.u32()? as usize, delta: r.u32()? as usize });
        }
        let ne = r.u32()? as usize;
        let mut edges = Vec::with_capacity(ne.min(1 << 16));
        for _ in 0..ne {
            let a = r.u32()? as usize;
            let b = r.u32()? as usize;
            let t = match r.u8()? {
                0 => None,
                1 => {
                    let s = r.str()?;
                    let parsed: Latency = serde_json::from_value(serde_json::Value::String(s))
                        .map_err(|e| CodegenError::Container(e.to_string()))?;
                    Some(parsed)
                }
                f => return Err(CodegenError::Container(format!("bad latency flag {f}"))),
            };
            edges.push(EdgeDoc { a, b, t });
        }
        let mut coop = BTreeMap::new();
        for i in 1..=p {
            let n = r.u32()? as usize;
            let mut set = Vec::with_capacity(n.min(1 << 16));
            for _ in 0..n {
                set.push(r.u32()? as usize);
            }
            if !set.is_empty() {
                coop.insert(i.to_string(), set);
            }
        }
        let nc = r.u32()? as usize;
        let mut cycles = Vec::with_capacity(nc.min(1 << 16));
        for _ in 0..nc {
            let level = r.u32()? as usize;
            let rows = r.u32()? as usize;
            let mut pairs = Vec::new();
            let mut gamma = BTreeMap::new();
            let mut x = Vec::new();
            let mut y = BTreeSet::new();
            if !(2..=3).contains(&rows) {
                return Err(CodegenError::Container(format!("cycle with {rows} rows")));
            }
            for _ in 0..rows {
                let row = r.u32()? as usize;
                let cols = vec![r.u32()? as usize, r.u32()? as usize];
                gamma.insert(row.to_string(), r.u32()? as usize);
                x.push(row);
                y.extend(cols.iter().copied());
                pairs.push(PairSpec { row, cols, symbol: None });
            }
            cycles.push(CycleSpec {
                x,
                y: y.into_iter().collect(),
                pairs,
                level,
                gamma: Some(GammaSpec::PerRow(gamma)),
            });
        }
        let doc = TopologyDocument {
            theta: Some(theta),
            modulus: Some(Modulus(modulus)),
            nodes,
            edges,
            coop: Some(coop),
            cycles: cycles.clone(),
            symbols: BTreeMap::new(),
        };
        let topo = Arc::new(DsnTopology::from_document(doc)?);
        let field = Arc::new(FieldContext::with_modulus(theta, modulus)?);
        let graph = Arc::new(CooperationGraph::new(topo, &cycles)?);
        let code = assemble(graph, field)?;
        if code.to_bytes() != bytes {
            return Err(CodegenError::Container("payload does not match the rebuilt code".into()));
        }
        Ok(code)
    }
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.bytes(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.bytes(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CodegenError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| CodegenError::Container("truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, CodegenError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, CodegenError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("two bytes")))
    }
    fn u32(&mut self) -> Result<u32, CodegenError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("four bytes")))
    }
    fn str(&mut self) -> Result<String, CodegenError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| CodegenError::Container(e.to_string()))
    }
}
