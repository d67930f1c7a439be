// SPDX-License-Identifier: Apache-2.0

//! Network model: per-node code parameters, weighted undirected links and
//! cooperation sets, loaded from a JSON document.
//!
//! Node identifiers are 1-based everywhere in the public API.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;
use std::str::FromStr;

use num::{BigInt, BigRational, One, Signed, Zero};
use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coopgraph::CycleSpec;

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("malformed document: {0}")]
    Schema(String),
    #[error("node {0} is declared twice")]
    DuplicateNode(NodeId),
    #[error("node ids must be exactly 1..={p}; found {id}")]
    NodeIdRange { id: NodeId, p: usize },
    #[error("edge {0}-{0} is a self-loop")]
    SelfLoop(NodeId),
    #[error("edge {0}-{1} is listed twice")]
    DuplicateEdge(NodeId, NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("edge {a}-{b} has non-positive latency {t}")]
    NonPositiveLatency { a: NodeId, b: NodeId, t: String },
    #[error("node {j} is in M_{i} but is not a neighbour of {i}")]
    CoopNotNeighbor { i: NodeId, j: NodeId },
    #[error("node {0} has an empty cooperation set")]
    EmptyCoop(NodeId),
    #[error("node {id}: delta = {delta} must be below r = {r}")]
    DeltaNotBelowR { id: NodeId, delta: usize, r: usize },
    #[error("node {0}: k must be positive")]
    ZeroK(NodeId),
    #[error("node {0}: r must be positive")]
    ZeroR(NodeId),
    #[error("cooperation is not symmetric: {j} in M_{i} but {i} not in M_{j}")]
    AsymmetricCoop { i: NodeId, j: NodeId },
    #[error("node {to} is unreachable from node {from}")]
    Unreachable { from: NodeId, to: NodeId },
}

impl TopologyError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Schema(_) => "schema",
            Self::DuplicateNode(_) => "duplicate-node",
            Self::NodeIdRange { .. } => "node-id-range",
            Self::SelfLoop(_) => "self-loop",
            Self::DuplicateEdge(..) => "duplicate-edge",
            Self::UnknownNode(_) => "unknown-node",
            Self::NonPositiveLatency { .. } => "nonpositive-latency",
            Self::CoopNotNeighbor { .. } => "coop-not-neighbor",
            Self::EmptyCoop(_) => "empty-coop",
            Self::DeltaNotBelowR { .. } => "delta-not-below-r",
            Self::ZeroK(_) => "zero-k",
            Self::ZeroR(_) => "zero-r",
            Self::AsymmetricCoop { .. } => "asymmetric-coop",
            Self::Unreachable { .. } => "unreachable",
        }
    }
}

/// Exact, nonnegative link latency.
///
/// In JSON a latency is either a number, read through its shortest decimal
/// form (so `0.6` is exactly 3/5), or a string holding a rational such as
/// `"6/5"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Latency(pub BigRational);

impl Latency {
    pub fn zero() -> Self {
        Latency(BigRational::zero())
    }

    pub fn one() -> Self {
        Latency(BigRational::one())
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        Latency(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn parse_decimal(text: &str) -> Option<Self> {
        let text = text.trim();
        let (neg, body) = match text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, text),
        };
        let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return None;
        }
        if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
            return None;
        }
        let digits = format!("{int_part}{frac_part}");
        let num = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).ok()?;
        let den = num::pow(BigInt::from(10), frac_part.len());
        let v = BigRational::new(if neg { -num } else { num }, den);
        Some(Latency(v))
    }

    pub fn to_f64(&self) -> f64 {
        use num::ToPrimitive;
        self.0.to_f64().unwrap_or(f64::INFINITY)
    }
}

impl fmt::Display for Latency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl std::ops::Add for &Latency {
    type Output = Latency;
    fn add(self, rhs: &Latency) -> Latency {
        Latency(&self.0 + &rhs.0)
    }
}

impl Serialize for Latency {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        // Numbers that survive an f64 round trip stay numbers.
        let f = self.to_f64();
        if Latency::parse_decimal(&format!("{f}")).as_ref() == Some(self) {
            s.serialize_f64(f)
        } else {
            s.serialize_str(&self.to_string())
        }
    }
}

impl<'de> Deserialize<'de> for Latency {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Latency;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or a rational string like \"6/5\"")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Latency, E> {
                Ok(Latency(BigRational::from_integer(BigInt::from(v))))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Latency, E> {
                Ok(Latency(BigRational::from_integer(BigInt::from(v))))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Latency, E> {
                if !v.is_finite() {
                    return Err(E::custom("latency must be finite"));
                }
                Latency::parse_decimal(&format!("{v}")).ok_or_else(|| E::custom("bad latency"))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Latency, E> {
                if let Some(l) = Latency::parse_decimal(v) {
                    return Ok(l);
                }
                BigRational::from_str(v.trim()).map(Latency).map_err(|_| E::custom(format!("bad latency {v:?}")))
            }
        }
        d.deserialize_any(V)
    }
}

/// Irreducible polynomial, written as an integer or a `"0x"` hex string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Modulus(pub u32);

impl Serialize for Modulus {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("0x{:X}", self.0))
    }
}

impl<'de> Deserialize<'de> for Modulus {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Modulus;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an integer or a \"0x\"-prefixed hex string")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Modulus, E> {
                u32::try_from(v).map(Modulus).map_err(|_| E::custom("modulus too large"))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Modulus, E> {
                u32::try_from(v).map(Modulus).map_err(|_| E::custom("modulus out of range"))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Modulus, E> {
                let hex = v
                    .strip_prefix("0x")
                    .or_else(|| v.strip_prefix("0X"))
                    .ok_or_else(|| E::custom("modulus string must start with 0x"))?;
                u32::from_str_radix(hex, 16).map(Modulus).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub id: NodeId,
    pub k: usize,
    pub r: usize,
    pub delta: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDoc {
    pub a: NodeId,
    pub b: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Latency>,
}

/// The on-disk configuration document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulus: Option<Modulus>,
    pub nodes: Vec<NodeDoc>,
    #[serde(default)]
    pub edges: Vec<EdgeDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coop: Option<BTreeMap<String, Vec<NodeId>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cycles: Vec<CycleSpec>,
    /// Shared cooperation parameters referenced by name from cycle pairs.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub symbols: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeParams {
    pub k: usize,
    pub r: usize,
    pub delta: usize,
}

impl NodeParams {
    pub fn n(&self) -> usize {
        self.k + self.r
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DsnTopology {
    nodes: Vec<NodeParams>,
    edges: BTreeMap<(NodeId, NodeId), Option<Latency>>,
    neighbors: Vec<BTreeSet<NodeId>>,
    coop: Vec<BTreeSet<NodeId>>,
    theta: Option<u8>,
    modulus: Option<u32>,
    cycles: Vec<CycleSpec>,
    symbols: BTreeMap<String, usize>,
}

fn edge_key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    (a.min(b), a.max(b))
}

impl DsnTopology {
    pub fn from_json(text: &str) -> Result<Self, TopologyError> {
        let doc: TopologyDocument = serde_json::from_str(text).map_err(|e| TopologyError::Schema(e.to_string()))?;
        Self::from_document(doc)
    }

    pub fn from_document(doc: TopologyDocument) -> Result<Self, TopologyError> {
        let p = doc.nodes.len();
        let mut slots: Vec<Option<NodeParams>> = vec![None; p];
        for nd in &doc.nodes {
            if nd.id == 0 || nd.id > p {
                return Err(TopologyError::NodeIdRange { id: nd.id, p });
            }
            if slots[nd.id - 1].is_some() {
                return Err(TopologyError::DuplicateNode(nd.id));
            }
            if nd.k == 0 {
                return Err(TopologyError::ZeroK(nd.id));
            }
            if nd.r == 0 {
                return Err(TopologyError::ZeroR(nd.id));
            }
            if nd.delta >= nd.r {
                return Err(TopologyError::DeltaNotBelowR { id: nd.id, delta: nd.delta, r: nd.r });
            }
            slots[nd.id - 1] = Some(NodeParams { k: nd.k, r: nd.r, delta: nd.delta });
        }
        let nodes: Vec<NodeParams> = slots.into_iter().map(|s| s.expect("ids are a permutation")).collect();

        let check = |id: NodeId| if id == 0 || id > p { Err(TopologyError::UnknownNode(id)) } else { Ok(()) };
        let mut edges = BTreeMap::new();
        let mut neighbors = vec![BTreeSet::new(); p];
        for e in &doc.edges {
            check(e.a)?;
            check(e.b)?;
            if e.a == e.b {
                return Err(TopologyError::SelfLoop(e.a));
            }
            if let Some(t) = &e.t {
                if !t.0.is_positive() {
                    return Err(TopologyError::NonPositiveLatency { a: e.a, b: e.b, t: t.to_string() });
                }
            }
            let key = edge_key(e.a, e.b);
            if edges.insert(key, e.t.clone()).is_some() {
                return Err(TopologyError::DuplicateEdge(key.0, key.1));
            }
            neighbors[e.a - 1].insert(e.b);
            neighbors[e.b - 1].insert(e.a);
        }

        let mut coop = neighbors.clone();
        if let Some(map) = &doc.coop {
            for (key, members) in map {
                let i: NodeId = key
                    .trim()
                    .parse()
                    .map_err(|_| TopologyError::Schema(format!("coop key {key:?} is not a node id")))?;
                check(i)?;
                if members.is_empty() {
                    return Err(TopologyError::EmptyCoop(i));
                }
                let mut set = BTreeSet::new();
                for &j in members {
                    check(j)?;
                    if !neighbors[i - 1].contains(&j) {
                        return Err(TopologyError::CoopNotNeighbor { i, j });
                    }
                    set.insert(j);
                }
                coop[i - 1] = set;
            }
        }
        for i in 1..=p {
            for &j in &coop[i - 1] {
                if !coop[j - 1].contains(&i) {
                    return Err(TopologyError::AsymmetricCoop { i, j });
                }
            }
        }

        Ok(Self {
            nodes,
            edges,
            neighbors,
            coop,
            theta: doc.theta,
            modulus: doc.modulus.map(|m| m.0),
            cycles: doc.cycles,
            symbols: doc.symbols,
        })
    }

    pub fn to_document(&self) -> TopologyDocument {
        TopologyDocument {
            theta: self.theta,
            modulus: self.modulus.map(Modulus),
            nodes: self
                .nodes
                .iter()
                .enumerate()
                .map(|(i, n)| NodeDoc { id: i + 1, k: n.k, r: n.r, delta: n.delta })
                .collect(),
            edges: self.edges.iter().map(|(&(a, b), t)| EdgeDoc { a, b, t: t.clone() }).collect(),
            coop: Some(
                self.coop
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| !s.is_empty())
                    .map(|(i, s)| ((i + 1).to_string(), s.iter().copied().collect()))
                    .collect(),
            ),
            cycles: self.cycles.clone(),
            symbols: self.symbols.clone(),
        }
    }

    /// Equal parameters, links and cooperation sets, ignoring field hints
    /// and cycle notation.
    pub fn same_network(&self, other: &DsnTopology) -> bool {
        self.nodes == other.nodes && self.edges == other.edges && self.coop == other.coop
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("document serializes")
    }

    /// Number of nodes p.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        1..=self.nodes.len()
    }

    pub fn contains(&self, i: NodeId) -> bool {
        (1..=self.nodes.len()).contains(&i)
    }

    pub fn params(&self, i: NodeId) -> &NodeParams {
        &self.nodes[i - 1]
    }

    pub fn nodes(&self) -> &[NodeParams] {
        &self.nodes
    }

    pub fn theta(&self) -> Option<u8> {
        self.theta
    }

    pub fn modulus(&self) -> Option<u32> {
        self.modulus
    }

    pub fn cycle_specs(&self) -> &[CycleSpec] {
        &self.cycles
    }

    pub fn symbols(&self) -> &BTreeMap<String, usize> {
        &self.symbols
    }

    pub fn with_cycles(mut self, cycles: Vec<CycleSpec>) -> Self {
        self.cycles = cycles;
        self
    }

    pub fn neighborhood(&self, i: NodeId) -> Result<&BTreeSet<NodeId>, TopologyError> {
        self.neighbors.get(i.wrapping_sub(1)).ok_or(TopologyError::UnknownNode(i))
    }

    /// Cooperation set M_i.
    pub fn coop(&self, i: NodeId) -> &BTreeSet<NodeId> {
        &self.coop[i - 1]
    }

    /// Nodes j with i ∈ M_j.
    pub fn interferers(&self, i: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.node_ids().filter(move |&j| self.coop[j - 1].contains(&i))
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, Latency)> + '_ {
        self.edges.iter().map(|(&(a, b), t)| (a, b, t.clone().unwrap_or_else(Latency::one)))
    }

    pub fn has_explicit_latencies(&self) -> bool {
        self.edges.values().any(Option::is_some)
    }

    /// Link latency, defaulting to 1 when the document gives none.
    pub fn latency(&self, a: NodeId, b: NodeId) -> Option<Latency> {
        self.edges.get(&edge_key(a, b)).map(|t| t.clone().unwrap_or_else(Latency::one))
    }

    /// Replace the latency of an existing edge.
    pub fn set_latency(&mut self, a: NodeId, b: NodeId, t: Latency) -> Result<(), TopologyError> {
        if !t.0.is_positive() {
            return Err(TopologyError::NonPositiveLatency { a, b, t: t.to_string() });
        }
        match self.edges.get_mut(&edge_key(a, b)) {
            Some(slot) => {
                *slot = Some(t);
                Ok(())
            }
            None => Err(TopologyError::Schema(format!("no edge {a}-{b}"))),
        }
    }

    /// Single-source shortest path times (Dijkstra); `None` when unreachable.
    pub fn distances_from(&self, src: NodeId) -> Result<Vec<Option<Latency>>, TopologyError> {
        if !self.contains(src) {
            return Err(TopologyError::UnknownNode(src));
        }
        let p = self.len();
        let mut dist: Vec<Option<Latency>> = vec![None; p];
        let mut heap = BinaryHeap::new();
        dist[src - 1] = Some(Latency::zero());
        heap.push(Reverse((Latency::zero(), src)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if dist[u - 1].as_ref().is_some_and(|best| *best < d) {
                continue;
            }
            for &v in &self.neighbors[u - 1] {
                let cand = &d + &self.latency(u, v).expect("neighbour has an edge");
                if dist[v - 1].as_ref().is_none_or(|best| cand < *best) {
                    dist[v - 1] = Some(cand.clone());
                    heap.push(Reverse((cand, v)));
                }
            }
        }
        Ok(dist)
    }

    pub fn shortest_path_time(&self, from: NodeId, to: NodeId) -> Result<Latency, TopologyError> {
        if !self.contains(to) {
            return Err(TopologyError::UnknownNode(to));
        }
        self.distances_from(from)?[to - 1].clone().ok_or(TopologyError::Unreachable { from, to })
    }
}
