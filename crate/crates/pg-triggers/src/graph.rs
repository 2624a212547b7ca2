//! The property graph itself: nodes, relationships, and raw mutation
//! primitives. Delta capture and transactions live in [`crate::store`]; the
//! operations here mutate the graph directly and are also the replay target
//! for [`crate::delta`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::StoreError;
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "node({})", self.0)
    }
}

impl fmt::Display for RelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rel({})", self.0)
    }
}

/// Either kind of graph item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ItemId {
    Node(NodeId),
    Rel(RelId),
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ItemId::Node(n) => n.fmt(f),
            ItemId::Rel(r) => r.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub labels: BTreeSet<String>,
    pub properties: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relationship {
    pub id: RelId,
    pub rel_type: String,
    pub source: NodeId,
    pub target: NodeId,
    pub properties: BTreeMap<String, Value>,
}

impl Relationship {
    /// The endpoint opposite to `n`, if `n` is an endpoint at all.
    pub fn other_endpoint(&self, n: NodeId) -> Option<NodeId> {
        if self.source == n {
            Some(self.target)
        } else if self.target == n {
            Some(self.source)
        } else {
            None
        }
    }
}

/// In-memory property graph. Node and relationship ids are assigned from
/// monotone counters that never reset, so ids are never reused within one
/// graph lifetime.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Graph {
    nodes: BTreeMap<NodeId, Node>,
    rels: BTreeMap<RelId, Relationship>,
    incident: BTreeMap<NodeId, BTreeSet<RelId>>,
    next_node: u64,
    next_rel: u64,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(&id)
    }

    pub fn rel(&self, id: RelId) -> Option<&Relationship> {
        self.rels.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn rels(&self) -> impl Iterator<Item = &Relationship> {
        self.rels.values()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn rel_count(&self) -> usize {
        self.rels.len()
    }

    /// Relationship ids incident to a node, in id order.
    pub fn incident_rels(&self, n: NodeId) -> impl Iterator<Item = RelId> + '_ {
        self.incident.get(&n).into_iter().flatten().copied()
    }

    pub fn incident_count(&self, n: NodeId) -> usize {
        self.incident.get(&n).map_or(0, |s| s.len())
    }

    pub fn create_node(
        &mut self,
        labels: BTreeSet<String>,
        properties: BTreeMap<String, Value>,
    ) -> NodeId {
        self.next_node += 1;
        let id = NodeId(self.next_node);
        self.nodes.insert(
            id,
            Node {
                id,
                labels,
                properties,
            },
        );
        id
    }

    pub fn create_rel(
        &mut self,
        rel_type: String,
        source: NodeId,
        target: NodeId,
        properties: BTreeMap<String, Value>,
    ) -> Result<RelId, StoreError> {
        if !self.nodes.contains_key(&source) {
            return Err(StoreError::DanglingEndpoint(source));
        }
        if !self.nodes.contains_key(&target) {
            return Err(StoreError::DanglingEndpoint(target));
        }
        self.next_rel += 1;
        let id = RelId(self.next_rel);
        self.rels.insert(
            id,
            Relationship {
                id,
                rel_type,
                source,
                target,
                properties,
            },
        );
        self.incident.entry(source).or_default().insert(id);
        self.incident.entry(target).or_default().insert(id);
        Ok(id)
    }

    /// Inserts a node with a fixed id (snapshot import, delta replay).
    /// Advances the id counter past the given id.
    pub fn insert_node(&mut self, node: Node) {
        self.next_node = self.next_node.max(node.id.0);
        self.nodes.insert(node.id, node);
    }

    /// Inserts a relationship with a fixed id (snapshot import, delta replay).
    pub fn insert_rel(&mut self, rel: Relationship) -> Result<(), StoreError> {
        if !self.nodes.contains_key(&rel.source) {
            return Err(StoreError::DanglingEndpoint(rel.source));
        }
        if !self.nodes.contains_key(&rel.target) {
            return Err(StoreError::DanglingEndpoint(rel.target));
        }
        self.next_rel = self.next_rel.max(rel.id.0);
        self.incident.entry(rel.source).or_default().insert(rel.id);
        self.incident.entry(rel.target).or_default().insert(rel.id);
        self.rels.insert(rel.id, rel);
        Ok(())
    }

    pub fn remove_node(&mut self, id: NodeId) -> Result<Node, StoreError> {
        if self.incident_count(id) > 0 {
            return Err(StoreError::HasIncidentRelationships(id));
        }
        self.incident.remove(&id);
        self.nodes.remove(&id).ok_or(StoreError::UnknownNode(id))
    }

    pub fn remove_rel(&mut self, id: RelId) -> Result<Relationship, StoreError> {
        let rel = self
            .rels
            .remove(&id)
            .ok_or(StoreError::UnknownRelationship(id))?;
        if let Some(set) = self.incident.get_mut(&rel.source) {
            set.remove(&id);
        }
        if let Some(set) = self.incident.get_mut(&rel.target) {
            set.remove(&id);
        }
        Ok(rel)
    }

    pub fn node_mut(&mut self, id: NodeId) -> Result<&mut Node, StoreError> {
        self.nodes.get_mut(&id).ok_or(StoreError::UnknownNode(id))
    }

    pub fn rel_mut(&mut self, id: RelId) -> Result<&mut Relationship, StoreError> {
        self.rels
            .get_mut(&id)
            .ok_or(StoreError::UnknownRelationship(id))
    }

    /// Labels of an item: a relationship contributes its type.
    pub fn item_labels(&self, item: ItemId) -> Option<BTreeSet<String>> {
        match item {
            ItemId::Node(n) => self.node(n).map(|n| n.labels.clone()),
            ItemId::Rel(r) => self
                .rel(r)
                .map(|r| BTreeSet::from([r.rel_type.clone()])),
        }
    }

    pub fn item_property(&self, item: ItemId, key: &str) -> Option<&Value> {
        match item {
            ItemId::Node(n) => self.node(n).and_then(|n| n.properties.get(key)),
            ItemId::Rel(r) => self.rel(r).and_then(|r| r.properties.get(key)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn test_node_ids_are_monotone() {
        let mut g = Graph::new();
        let a = g.create_node(labels(&["A"]), BTreeMap::new());
        let b = g.create_node(labels(&["B"]), BTreeMap::new());
        assert_eq!(a, NodeId(1));
        assert_eq!(b, NodeId(2));
        g.remove_node(a).unwrap();
        let c = g.create_node(labels(&["C"]), BTreeMap::new());
        assert_eq!(c, NodeId(3), "ids are never reused after deletion");
    }

    #[test]
    fn test_rel_requires_endpoints() {
        let mut g = Graph::new();
        let a = g.create_node(labels(&["A"]), BTreeMap::new());
        let err = g
            .create_rel("R".into(), a, NodeId(99), BTreeMap::new())
            .unwrap_err();
        assert_eq!(err, StoreError::DanglingEndpoint(NodeId(99)));
    }

    #[test]
    fn test_remove_node_with_incident_rel_fails() {
        let mut g = Graph::new();
        let a = g.create_node(labels(&["A"]), BTreeMap::new());
        let b = g.create_node(labels(&["B"]), BTreeMap::new());
        g.create_rel("R".into(), a, b, BTreeMap::new()).unwrap();
        assert_eq!(
            g.remove_node(a).unwrap_err(),
            StoreError::HasIncidentRelationships(a)
        );
    }

    #[test]
    fn test_incident_index_tracks_removal() {
        let mut g = Graph::new();
        let a = g.create_node(labels(&["A"]), BTreeMap::new());
        let b = g.create_node(labels(&["B"]), BTreeMap::new());
        let r = g.create_rel("R".into(), a, b, BTreeMap::new()).unwrap();
        assert_eq!(g.incident_count(a), 1);
        g.remove_rel(r).unwrap();
        assert_eq!(g.incident_count(a), 0);
        assert!(g.remove_node(a).is_ok());
    }

    #[test]
    fn test_item_labels_for_rel_is_its_type() {
        let mut g = Graph::new();
        let a = g.create_node(labels(&["A"]), BTreeMap::new());
        let b = g.create_node(labels(&["B"]), BTreeMap::new());
        let r = g.create_rel("Knows".into(), a, b, BTreeMap::new()).unwrap();
        assert_eq!(g.item_labels(ItemId::Rel(r)), Some(labels(&["Knows"])));
    }
}
