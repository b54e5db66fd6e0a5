//! Directed acyclic coding networks.
//!
//! Every edge has unit capacity, every source emits exactly one message, and
//! each terminal demands an ordered tuple of source messages.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Source,
    Intermediate,
    Terminal,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    pub id: String,
    pub role: Role,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub id: String,
    pub tail: String,
    pub head: String,
}

/// A message in the network: either a source's message or an edge's message.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum MessageRef {
    Source(String),
    Edge(String),
}

impl MessageRef {
    pub fn id(&self) -> &str {
        match self {
            MessageRef::Source(id) | MessageRef::Edge(id) => id,
        }
    }
}

impl fmt::Display for MessageRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MessageRef::Source(id) => write!(f, "source:{id}"),
            MessageRef::Edge(id) => write!(f, "edge:{id}"),
        }
    }
}

/// A directed acyclic coding network.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Network {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    /// source node id -> message id
    pub source_messages: BTreeMap<String, String>,
    /// terminal node id -> demanded message ids, in order
    pub demands: BTreeMap<String, Vec<String>>,
}

/// One breach of the network invariants.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DuplicateNodeId { node: String },
    DuplicateEdgeId { edge: String },
    UnknownEndpoint { edge: String, node: String },
    SourceHasInEdge { node: String, edge: String },
    TerminalHasOutEdge { node: String, edge: String },
    SourceWithoutMessage { node: String },
    MessageOnNonSource { node: String },
    DuplicateMessageId { message: String },
    DemandOnNonTerminal { node: String },
    UndeclaredDemand { terminal: String, message: String },
    Cycle { nodes: Vec<String> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateNodeId { node } => write!(f, "duplicate node id `{node}`"),
            Violation::DuplicateEdgeId { edge } => write!(f, "duplicate edge id `{edge}`"),
            Violation::UnknownEndpoint { edge, node } => {
                write!(f, "edge `{edge}` references unknown node `{node}`")
            }
            Violation::SourceHasInEdge { node, edge } => {
                write!(f, "source `{node}` has incoming edge `{edge}`")
            }
            Violation::TerminalHasOutEdge { node, edge } => {
                write!(f, "terminal `{node}` has outgoing edge `{edge}`")
            }
            Violation::SourceWithoutMessage { node } => write!(f, "source `{node}` has no message"),
            Violation::MessageOnNonSource { node } => {
                write!(f, "message assigned to non-source node `{node}`")
            }
            Violation::DuplicateMessageId { message } => {
                write!(f, "message `{message}` is emitted by more than one source")
            }
            Violation::DemandOnNonTerminal { node } => {
                write!(f, "demand declared on non-terminal `{node}`")
            }
            Violation::UndeclaredDemand { terminal, message } => {
                write!(f, "terminal `{terminal}` demands unknown message `{message}`")
            }
            Violation::Cycle { nodes } => write!(f, "cycle through {nodes:?}"),
        }
    }
}

impl Network {
    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn edge(&self, id: &str) -> Option<&Edge> {
        self.edges.iter().find(|e| e.id == id)
    }

    pub fn role(&self, id: &str) -> Option<Role> {
        self.node(id).map(|n| n.role)
    }

    fn ids_with_role(&self, role: Role) -> Vec<&str> {
        let mut ids: Vec<&str> = self
            .nodes
            .iter()
            .filter(|n| n.role == role)
            .map(|n| n.id.as_str())
            .collect();
        ids.sort_unstable();
        ids
    }

    /// Source node ids, sorted.
    pub fn sources(&self) -> Vec<&str> {
        self.ids_with_role(Role::Source)
    }

    /// Terminal node ids, sorted.
    pub fn terminals(&self) -> Vec<&str> {
        self.ids_with_role(Role::Terminal)
    }

    /// The source node emitting `message`.
    pub fn source_of(&self, message: &str) -> Option<&str> {
        self.source_messages
            .iter()
            .find(|(_, m)| m.as_str() == message)
            .map(|(s, _)| s.as_str())
    }

    /// Edges entering `node`, sorted by edge id.
    pub fn in_edges(&self, node: &str) -> Result<Vec<&Edge>> {
        self.incident(node, |e| e.head == node)
    }

    /// Edges leaving `node`, sorted by edge id.
    pub fn out_edges(&self, node: &str) -> Result<Vec<&Edge>> {
        self.incident(node, |e| e.tail == node)
    }

    fn incident(&self, node: &str, keep: impl Fn(&Edge) -> bool) -> Result<Vec<&Edge>> {
        if self.node(node).is_none() {
            return Err(Error::UnknownNode(node.to_string()));
        }
        let mut out: Vec<&Edge> = self.edges.iter().filter(|e| keep(e)).collect();
        out.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(out)
    }

    /// The inputs available at `node`: its source message, or the messages
    /// of its in-edges. Sorted.
    pub fn node_inputs(&self, node: &str) -> Result<Vec<MessageRef>> {
        match self.role(node) {
            None => Err(Error::UnknownNode(node.to_string())),
            Some(Role::Source) => Ok(self
                .source_messages
                .get(node)
                .map(|m| vec![MessageRef::Source(m.clone())])
                .unwrap_or_default()),
            Some(_) => Ok(self
                .in_edges(node)?
                .into_iter()
                .map(|e| MessageRef::Edge(e.id.clone()))
                .collect()),
        }
    }

    /// Every message in the network: source messages (sorted by message id)
    /// followed by edge messages (sorted by edge id).
    pub fn message_refs(&self) -> Vec<MessageRef> {
        let mut sources: Vec<MessageRef> = self
            .source_messages
            .values()
            .map(|m| MessageRef::Source(m.clone()))
            .collect();
        sources.sort();
        let mut edges: Vec<MessageRef> = self.edges.iter().map(|e| MessageRef::Edge(e.id.clone())).collect();
        edges.sort();
        sources.extend(edges);
        sources
    }

    /// Checks every structural invariant. An empty result means the network
    /// is well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut roles: HashMap<&str, Role> = HashMap::new();
        for n in &self.nodes {
            if roles.insert(n.id.as_str(), n.role).is_some() {
                out.push(Violation::DuplicateNodeId { node: n.id.clone() });
            }
        }
        let mut seen_edges = HashSet::new();
        for e in &self.edges {
            if !seen_edges.insert(e.id.as_str()) {
                out.push(Violation::DuplicateEdgeId { edge: e.id.clone() });
            }
            for end in [&e.tail, &e.head] {
                if !roles.contains_key(end.as_str()) {
                    out.push(Violation::UnknownEndpoint {
                        edge: e.id.clone(),
                        node: end.clone(),
                    });
                }
            }
            if roles.get(e.head.as_str()) == Some(&Role::Source) {
                out.push(Violation::SourceHasInEdge {
                    node: e.head.clone(),
                    edge: e.id.clone(),
                });
            }
            if roles.get(e.tail.as_str()) == Some(&Role::Terminal) {
                out.push(Violation::TerminalHasOutEdge {
                    node: e.tail.clone(),
                    edge: e.id.clone(),
                });
            }
        }
        for n in &self.nodes {
            if n.role == Role::Source && !self.source_messages.contains_key(&n.id) {
                out.push(Violation::SourceWithoutMessage { node: n.id.clone() });
            }
        }
        let mut messages = HashSet::new();
        for (node, msg) in &self.source_messages {
            if roles.get(node.as_str()) != Some(&Role::Source) {
                out.push(Violation::MessageOnNonSource { node: node.clone() });
            }
            if !messages.insert(msg.as_str()) {
                out.push(Violation::DuplicateMessageId { message: msg.clone() });
            }
        }
        for (t, wanted) in &self.demands {
            if roles.get(t.as_str()) != Some(&Role::Terminal) {
                out.push(Violation::DemandOnNonTerminal { node: t.clone() });
            }
            for w in wanted {
                if !messages.contains(w.as_str()) {
                    out.push(Violation::UndeclaredDemand {
                        terminal: t.clone(),
                        message: w.clone(),
                    });
                }
            }
        }
        if let Err(Error::CycleDetected(nodes)) = self.topo_order() {
            out.push(Violation::Cycle { nodes });
        }
        out
    }

    /// Kahn's algorithm with ties broken by node id.
    pub fn topo_order(&self) -> Result<Vec<String>> {
        let ids: BTreeSet<&str> = self.nodes.iter().map(|n| n.id.as_str()).collect();
        let mut indegree: BTreeMap<&str, usize> = ids.iter().map(|&id| (id, 0)).collect();
        let mut succ: HashMap<&str, Vec<&str>> = HashMap::new();
        for e in &self.edges {
            if !ids.contains(e.tail.as_str()) || !ids.contains(e.head.as_str()) {
                continue;
            }
            *indegree.get_mut(e.head.as_str()).unwrap() += 1;
            succ.entry(e.tail.as_str()).or_default().push(e.head.as_str());
        }
        let mut ready: BTreeSet<&str> = indegree.iter().filter(|(_, &d)| d == 0).map(|(&id, _)| id).collect();
        let mut order = Vec::with_capacity(ids.len());
        while let Some(id) = ready.pop_first() {
            order.push(id.to_string());
            for &next in succ.get(id).map(Vec::as_slice).unwrap_or(&[]) {
                let d = indegree.get_mut(next).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(next);
                }
            }
        }
        if order.len() < ids.len() {
            let stuck = indegree
                .into_iter()
                .filter(|(_, d)| *d > 0)
                .map(|(id, _)| id.to_string())
                .collect();
            return Err(Error::CycleDetected(stuck));
        }
        Ok(order)
    }

    /// Edges sorted by the topological position of their tail, then by id.
    pub fn edges_in_topo_order(&self) -> Result<Vec<&Edge>> {
        let order = self.topo_order()?;
        let pos: HashMap<&str, usize> = order.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let mut edges: Vec<&Edge> = self.edges.iter().collect();
        edges.sort_by(|a, b| {
            pos[a.tail.as_str()]
                .cmp(&pos[b.tail.as_str()])
                .then_with(|| a.id.cmp(&b.id))
        });
        Ok(edges)
    }

    /// Fails with `InvalidNetwork` listing every violation.
    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            let msg = v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
            Err(Error::InvalidNetwork(msg))
        }
    }

    /// Parses the JSON network format. Structural and referential errors are
    /// reported as `Schema` errors carrying the path of the offending field.
    pub fn parse(text: &str) -> Result<Network> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let net: Network = serde_path_to_error::deserialize(de)?;
        net.check_references()?;
        Ok(net)
    }

    fn check_references(&self) -> Result<()> {
        let roles: HashMap<&str, Role> = self.nodes.iter().map(|n| (n.id.as_str(), n.role)).collect();
        for (i, e) in self.edges.iter().enumerate() {
            if !roles.contains_key(e.tail.as_str()) {
                return Err(Error::schema(format!("edges[{i}].tail"), format!("unknown node `{}`", e.tail)));
            }
            if !roles.contains_key(e.head.as_str()) {
                return Err(Error::schema(format!("edges[{i}].head"), format!("unknown node `{}`", e.head)));
            }
        }
        for s in self.source_messages.keys() {
            if roles.get(s.as_str()) != Some(&Role::Source) {
                return Err(Error::schema(format!("source_messages.{s}"), "not a source node"));
            }
        }
        let messages: HashSet<&str> = self.source_messages.values().map(String::as_str).collect();
        for (t, wanted) in &self.demands {
            if roles.get(t.as_str()) != Some(&Role::Terminal) {
                return Err(Error::schema(format!("demands.{t}"), "not a terminal node"));
            }
            for (k, w) in wanted.iter().enumerate() {
                if !messages.contains(w.as_str()) {
                    return Err(Error::schema(format!("demands.{t}[{k}]"), format!("unknown message `{w}`")));
                }
            }
        }
        Ok(())
    }

    /// Compact canonical JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("network serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    /// SHA-256 of the compact canonical JSON, hex encoded.
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

/// The two-source butterfly: s1, s2 each feed their own terminal directly and
/// the shared bottleneck a -> b, which fans out to both terminals. Terminal
/// t1 demands both messages, as does t2.
pub fn butterfly() -> Network {
    let node = |id: &str, role| Node { id: id.into(), role };
    let edge = |id: &str, tail: &str, head: &str| Edge {
        id: id.into(),
        tail: tail.into(),
        head: head.into(),
    };
    Network {
        nodes: vec![
            node("s1", Role::Source),
            node("s2", Role::Source),
            node("a", Role::Intermediate),
            node("b", Role::Intermediate),
            node("t1", Role::Terminal),
            node("t2", Role::Terminal),
        ],
        edges: vec![
            edge("e1", "s1", "t1"),
            edge("e2", "s1", "a"),
            edge("e3", "s2", "a"),
            edge("e4", "s2", "t2"),
            edge("e5", "a", "b"),
            edge("e6", "b", "t1"),
            edge("e7", "b", "t2"),
        ],
        source_messages: [("s1".into(), "x1".into()), ("s2".into(), "x2".into())].into_iter().collect(),
        demands: [
            ("t1".into(), vec!["x1".into(), "x2".into()]),
            ("t2".into(), vec!["x1".into(), "x2".into()]),
        ]
        .into_iter()
        .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(edges: &[(&str, &str, &str)], roles: &[(&str, Role)]) -> Network {
        Network {
            nodes: roles.iter().map(|(id, r)| Node { id: id.to_string(), role: *r }).collect(),
            edges: edges
                .iter()
                .map(|(id, t, h)| Edge {
                    id: id.to_string(),
                    tail: t.to_string(),
                    head: h.to_string(),
                })
                .collect(),
            source_messages: roles
                .iter()
                .filter(|(_, r)| *r == Role::Source)
                .map(|(id, _)| (id.to_string(), format!("x_{id}")))
                .collect(),
            demands: BTreeMap::new(),
        }
    }

    #[test]
    fn butterfly_is_valid() {
        assert!(butterfly().validate().is_empty());
    }

    #[test]
    fn edge_into_source() {
        let mut net = butterfly();
        net.edges.push(Edge {
            id: "bad".into(),
            tail: "a".into(),
            head: "s1".into(),
        });
        let v = net.validate();
        assert!(v.contains(&Violation::SourceHasInEdge {
            node: "s1".into(),
            edge: "bad".into()
        }));
    }

    #[test]
    fn duplicate_edge_id() {
        let mut net = butterfly();
        net.edges[1].id = "e1".into();
        assert_eq!(net.validate(), vec![Violation::DuplicateEdgeId { edge: "e1".into() }]);
    }

    #[test]
    fn terminal_out_edge_and_bad_demand() {
        let mut net = butterfly();
        net.edges.push(Edge {
            id: "e9".into(),
            tail: "t1".into(),
            head: "b".into(),
        });
        net.demands.get_mut("t2").unwrap().push("nope".into());
        let v = net.validate();
        assert!(v.iter().any(|x| matches!(x, Violation::TerminalHasOutEdge { .. })));
        assert!(v.iter().any(|x| matches!(x, Violation::UndeclaredDemand { .. })));
        assert!(v.iter().any(|x| matches!(x, Violation::Cycle { .. })));
    }

    #[test]
    fn topo_examples() {
        let single = tiny(&[("e", "s", "t")], &[("s", Role::Source), ("t", Role::Terminal)]);
        assert_eq!(single.topo_order().unwrap(), vec!["s", "t"]);

        let diamond = tiny(
            &[("e1", "s", "b"), ("e2", "s", "a"), ("e3", "a", "t"), ("e4", "b", "t")],
            &[
                ("t", Role::Terminal),
                ("b", Role::Intermediate),
                ("a", Role::Intermediate),
                ("s", Role::Source),
            ],
        );
        assert_eq!(diamond.topo_order().unwrap(), vec!["s", "a", "b", "t"]);

        let cyclic = tiny(
            &[("e1", "a", "b"), ("e2", "b", "a")],
            &[("a", Role::Intermediate), ("b", Role::Intermediate)],
        );
        assert!(matches!(cyclic.topo_order(), Err(Error::CycleDetected(_))));
    }

    #[test]
    fn incidence() {
        let net = butterfly();
        let ids = |es: Vec<&Edge>| es.into_iter().map(|e| e.id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(net.in_edges("t1").unwrap()), vec!["e1", "e6"]);
        assert!(net.in_edges("s1").unwrap().is_empty());
        assert_eq!(ids(net.out_edges("s1").unwrap()), vec!["e1", "e2"]);
        assert!(matches!(net.in_edges("zz"), Err(Error::UnknownNode(_))));

        let mut lonely = net.clone();
        lonely.nodes.push(Node {
            id: "iso".into(),
            role: Role::Intermediate,
        });
        assert!(lonely.in_edges("iso").unwrap().is_empty());
        assert!(lonely.out_edges("iso").unwrap().is_empty());
    }

    #[test]
    fn parse_round_trip_and_errors() {
        let net = butterfly();
        assert_eq!(Network::parse(&net.to_json()).unwrap(), net);

        let missing = r#"{"nodes":[],"edges":[],"source_messages":{}}"#;
        match Network::parse(missing) {
            Err(Error::Schema { message, .. }) => assert!(message.contains("demands")),
            other => panic!("expected schema error, got {other:?}"),
        }

        let mut v: serde_json::Value = serde_json::from_str(&net.to_json()).unwrap();
        v["demands"]["t1"][1] = "ghost".into();
        match Network::parse(&v.to_string()) {
            Err(Error::Schema { path, .. }) => assert_eq!(path, "demands.t1[1]"),
            other => panic!("expected schema error, got {other:?}"),
        }

        let mut v: serde_json::Value = serde_json::from_str(&net.to_json()).unwrap();
        v["nodes"][2]["role"] = "router".into();
        match Network::parse(&v.to_string()) {
            Err(Error::Schema { path, .. }) => assert_eq!(path, "nodes[2].role"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn message_ref_json() {
        let r = MessageRef::Edge("e1".into());
        assert_eq!(serde_json::to_string(&r).unwrap(), r#"{"kind":"edge","id":"e1"}"#);
        let s: MessageRef = serde_json::from_str(r#"{"kind":"source","id":"x1"}"#).unwrap();
        assert_eq!(s, MessageRef::Source("x1".into()));
    }
}
