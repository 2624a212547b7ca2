//! Delta records: the typed change log every mutation appends to.
//!
//! Records are what triggers consume. Each record carries enough payload to
//! replay the change onto a copy of the pre-state graph ([`replay`]), which
//! is the independent oracle the store tests diff against.

use std::collections::BTreeSet;

use crate::error::StoreError;
use crate::graph::{Graph, ItemId, Node, Relationship};
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaKind {
    CreatedNode,
    CreatedRel,
    DeletedNode,
    DeletedRel,
    AssignedLabel,
    RemovedLabel,
    AssignedNodeProperty,
    AssignedRelProperty,
    RemovedNodeProperty,
    RemovedRelProperty,
}

impl DeltaKind {
    pub fn name(&self) -> &'static str {
        match self {
            DeltaKind::CreatedNode => "created-node",
            DeltaKind::CreatedRel => "created-rel",
            DeltaKind::DeletedNode => "deleted-node",
            DeltaKind::DeletedRel => "deleted-rel",
            DeltaKind::AssignedLabel => "assigned-label",
            DeltaKind::RemovedLabel => "removed-label",
            DeltaKind::AssignedNodeProperty => "assigned-node-property",
            DeltaKind::AssignedRelProperty => "assigned-rel-property",
            DeltaKind::RemovedNodeProperty => "removed-node-property",
            DeltaKind::RemovedRelProperty => "removed-rel-property",
        }
    }
}

/// One change. `seq` is unique and ascending within a transaction; `depth`
/// is the trigger-cascade depth of the context that produced the record
/// (0 for user statements).
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaRecord {
    pub seq: u64,
    pub depth: u32,
    pub kind: DeltaKind,
    pub item: ItemId,
    /// Labels of the item at the moment of the event (a relationship
    /// contributes its type). Creation and assignment record the post-event
    /// labels, deletion and removal the pre-event labels.
    pub item_labels: BTreeSet<String>,
    /// The label for label records.
    pub label: Option<String>,
    /// The property key for property records.
    pub key: Option<String>,
    /// Old value for property records (null when the key was absent).
    pub old_value: Option<Value>,
    /// New value for assigned-property records.
    pub new_value: Option<Value>,
    /// Full node payload on created-node / deleted-node records.
    pub node_payload: Option<Box<Node>>,
    /// Full relationship payload on created-rel / deleted-rel records.
    pub rel_payload: Option<Box<Relationship>>,
}

/// The merged record log of a transaction (or a statement fragment of one).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChangeSet {
    pub records: Vec<DeltaRecord>,
}

impl ChangeSet {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }
}

/// Applies records, in order, to a graph. Starting from the pre-state this
/// reconstructs the post-state exactly; the store's property tests rely on
/// this as the completeness oracle.
pub fn replay(graph: &mut Graph, records: &[DeltaRecord]) -> Result<(), StoreError> {
    for rec in records {
        match rec.kind {
            DeltaKind::CreatedNode => {
                let node = rec.node_payload.as_deref().expect("created-node payload");
                graph.insert_node(node.clone());
            }
            DeltaKind::CreatedRel => {
                let rel = rec.rel_payload.as_deref().expect("created-rel payload");
                graph.insert_rel(rel.clone())?;
            }
            DeltaKind::DeletedNode => {
                let ItemId::Node(id) = rec.item else {
                    unreachable!("deleted-node record on a relationship")
                };
                graph.remove_node(id)?;
            }
            DeltaKind::DeletedRel => {
                let ItemId::Rel(id) = rec.item else {
                    unreachable!("deleted-rel record on a node")
                };
                graph.remove_rel(id)?;
            }
            DeltaKind::AssignedLabel => {
                let ItemId::Node(id) = rec.item else {
                    unreachable!("label record on a relationship")
                };
                let label = rec.label.clone().expect("assigned-label label");
                graph.node_mut(id)?.labels.insert(label);
            }
            DeltaKind::RemovedLabel => {
                let ItemId::Node(id) = rec.item else {
                    unreachable!("label record on a relationship")
                };
                let label = rec.label.as_deref().expect("removed-label label");
                graph.node_mut(id)?.labels.remove(label);
            }
            DeltaKind::AssignedNodeProperty | DeltaKind::AssignedRelProperty => {
                let key = rec.key.clone().expect("assigned-property key");
                let value = rec.new_value.clone().expect("assigned-property value");
                match rec.item {
                    ItemId::Node(id) => {
                        graph.node_mut(id)?.properties.insert(key, value);
                    }
                    ItemId::Rel(id) => {
                        graph.rel_mut(id)?.properties.insert(key, value);
                    }
                }
            }
            DeltaKind::RemovedNodeProperty | DeltaKind::RemovedRelProperty => {
                let key = rec.key.as_deref().expect("removed-property key");
                match rec.item {
                    ItemId::Node(id) => {
                        graph.node_mut(id)?.properties.remove(key);
                    }
                    ItemId::Rel(id) => {
                        graph.rel_mut(id)?.properties.remove(key);
                    }
                }
            }
        }
    }
    Ok(())
}
