//! Transactional wrapper over [`Graph`] that captures a [`DeltaRecord`] for
//! every mutation.
//!
//! A transaction snapshots the graph at begin; rollback restores the
//! snapshot, commit hands back the merged [`ChangeSet`]. Mutations outside a
//! transaction are rejected. The statement watermark ([`GraphStore::mark`])
//! lets callers slice out per-statement record fragments for event detection.

use std::collections::{BTreeMap, BTreeSet};

use crate::delta::{ChangeSet, DeltaKind, DeltaRecord};
use crate::error::StoreError;
use crate::graph::{Graph, ItemId, NodeId, RelId};
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelOp {
    Add,
    Remove,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropOp {
    Set,
    Remove,
}

#[derive(Debug)]
struct TxnData {
    base: Graph,
    records: Vec<DeltaRecord>,
    next_seq: u64,
}

/// Graph plus open-transaction state.
#[derive(Debug, Default)]
pub struct GraphStore {
    graph: Graph,
    txn: Option<TxnData>,
    depth: u32,
}

impl GraphStore {
    pub fn new() -> Self {
        GraphStore::default()
    }

    pub fn from_graph(graph: Graph) -> Self {
        GraphStore {
            graph,
            txn: None,
            depth: 0,
        }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn in_transaction(&self) -> bool {
        self.txn.is_some()
    }

    /// Cascade depth stamped onto records produced from now on.
    pub fn set_depth(&mut self, depth: u32) {
        self.depth = depth;
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn begin(&mut self) -> Result<(), StoreError> {
        if self.txn.is_some() {
            return Err(StoreError::TransactionOpen);
        }
        self.txn = Some(TxnData {
            base: self.graph.clone(),
            records: Vec::new(),
            next_seq: 1,
        });
        self.depth = 0;
        Ok(())
    }

    pub fn commit(&mut self) -> Result<ChangeSet, StoreError> {
        let txn = self.txn.take().ok_or(StoreError::NoTransaction)?;
        Ok(ChangeSet {
            records: txn.records,
        })
    }

    pub fn rollback(&mut self) -> Result<(), StoreError> {
        let txn = self.txn.take().ok_or(StoreError::NoTransaction)?;
        self.graph = txn.base;
        Ok(())
    }

    /// Pre-transaction graph, while a transaction is open.
    pub fn txn_base(&self) -> Option<&Graph> {
        self.txn.as_ref().map(|t| &t.base)
    }

    /// Watermark into the transaction record log.
    pub fn mark(&self) -> usize {
        self.txn.as_ref().map_or(0, |t| t.records.len())
    }

    pub fn records_since(&self, mark: usize) -> &[DeltaRecord] {
        self.txn.as_ref().map_or(&[], |t| &t.records[mark..])
    }

    pub fn txn_records(&self) -> &[DeltaRecord] {
        self.txn.as_ref().map_or(&[], |t| &t.records)
    }

    fn txn_mut(&mut self) -> Result<&mut TxnData, StoreError> {
        self.txn.as_mut().ok_or(StoreError::NoTransaction)
    }

    fn push_record(&mut self, mut rec: DeltaRecord) -> Result<(), StoreError> {
        let depth = self.depth;
        let txn = self.txn_mut()?;
        rec.seq = txn.next_seq;
        rec.depth = depth;
        txn.next_seq += 1;
        txn.records.push(rec);
        Ok(())
    }

    fn blank_record(kind: DeltaKind, item: ItemId, item_labels: BTreeSet<String>) -> DeltaRecord {
        DeltaRecord {
            seq: 0,
            depth: 0,
            kind,
            item,
            item_labels,
            label: None,
            key: None,
            old_value: None,
            new_value: None,
            node_payload: None,
            rel_payload: None,
        }
    }

    fn check_props(properties: &BTreeMap<String, Value>) -> Result<(), StoreError> {
        for (k, v) in properties {
            if v.is_null() {
                return Err(StoreError::NullAssignment(k.clone()));
            }
        }
        Ok(())
    }

    /// Creates a node. Labels and properties are folded into the single
    /// created-node record.
    pub fn create_node(
        &mut self,
        labels: BTreeSet<String>,
        properties: BTreeMap<String, Value>,
    ) -> Result<NodeId, StoreError> {
        self.txn_mut()?;
        Self::check_props(&properties)?;
        let id = self.graph.create_node(labels.clone(), properties);
        let node = self.graph.node(id).unwrap().clone();
        let mut rec = Self::blank_record(DeltaKind::CreatedNode, ItemId::Node(id), labels);
        rec.node_payload = Some(Box::new(node));
        self.push_record(rec)?;
        Ok(id)
    }

    pub fn create_relationship(
        &mut self,
        rel_type: impl Into<String>,
        source: NodeId,
        target: NodeId,
        properties: BTreeMap<String, Value>,
    ) -> Result<RelId, StoreError> {
        self.txn_mut()?;
        Self::check_props(&properties)?;
        let rel_type = rel_type.into();
        let id = self
            .graph
            .create_rel(rel_type.clone(), source, target, properties)?;
        let rel = self.graph.rel(id).unwrap().clone();
        let mut rec = Self::blank_record(
            DeltaKind::CreatedRel,
            ItemId::Rel(id),
            BTreeSet::from([rel_type]),
        );
        rec.rel_payload = Some(Box::new(rel));
        self.push_record(rec)?;
        Ok(id)
    }

    /// Deletes a node or relationship. A node with incident relationships is
    /// rejected unless `detach` is set, in which case the incident
    /// relationships are deleted first (in id order), each with its own
    /// deleted-rel record.
    pub fn delete_item(&mut self, item: ItemId, detach: bool) -> Result<(), StoreError> {
        self.txn_mut()?;
        match item {
            ItemId::Node(id) => {
                if self.graph.node(id).is_none() {
                    return Err(StoreError::UnknownNode(id));
                }
                let incident: Vec<RelId> = self.graph.incident_rels(id).collect();
                if !incident.is_empty() {
                    if !detach {
                        return Err(StoreError::HasIncidentRelationships(id));
                    }
                    for rel_id in incident {
                        self.delete_item(ItemId::Rel(rel_id), false)?;
                    }
                }
                let node = self.graph.remove_node(id)?;
                let mut rec = Self::blank_record(
                    DeltaKind::DeletedNode,
                    ItemId::Node(id),
                    node.labels.clone(),
                );
                rec.node_payload = Some(Box::new(node));
                self.push_record(rec)?;
            }
            ItemId::Rel(id) => {
                let rel = self.graph.remove_rel(id)?;
                let mut rec = Self::blank_record(
                    DeltaKind::DeletedRel,
                    ItemId::Rel(id),
                    BTreeSet::from([rel.rel_type.clone()]),
                );
                rec.rel_payload = Some(Box::new(rel));
                self.push_record(rec)?;
            }
        }
        Ok(())
    }

    /// Adds or removes a label. Adding a label already present is a silent
    /// no-op (no record); removing an absent label is an error.
    pub fn mutate_label(
        &mut self,
        node: NodeId,
        op: LabelOp,
        label: impl Into<String>,
    ) -> Result<(), StoreError> {
        self.txn_mut()?;
        let label = label.into();
        match op {
            LabelOp::Add => {
                let n = self.graph.node_mut(node)?;
                if !n.labels.insert(label.clone()) {
                    return Ok(());
                }
                let labels = n.labels.clone();
                let mut rec =
                    Self::blank_record(DeltaKind::AssignedLabel, ItemId::Node(node), labels);
                rec.label = Some(label);
                self.push_record(rec)?;
            }
            LabelOp::Remove => {
                let n = self.graph.node_mut(node)?;
                if !n.labels.remove(&label) {
                    return Err(StoreError::LabelAbsent { node, label });
                }
                let labels = n.labels.clone();
                let mut rec =
                    Self::blank_record(DeltaKind::RemovedLabel, ItemId::Node(node), labels);
                rec.label = Some(label);
                self.push_record(rec)?;
            }
        }
        Ok(())
    }

    /// Sets or removes a property. Setting a key to its current value still
    /// emits a record (old and new equal); setting null is rejected; removing
    /// an absent key is an error.
    pub fn mutate_property(
        &mut self,
        item: ItemId,
        op: PropOp,
        key: impl Into<String>,
        value: Option<Value>,
    ) -> Result<(), StoreError> {
        self.txn_mut()?;
        let key = key.into();
        let item_labels = self
            .graph
            .item_labels(item)
            .ok_or_else(|| match item {
                ItemId::Node(n) => StoreError::UnknownNode(n),
                ItemId::Rel(r) => StoreError::UnknownRelationship(r),
            })?;
        match op {
            PropOp::Set => {
                let value = value.expect("set requires a value");
                if value.is_null() {
                    return Err(StoreError::NullAssignment(key));
                }
                let (kind, old) = match item {
                    ItemId::Node(id) => {
                        let n = self.graph.node_mut(id)?;
                        let old = n.properties.insert(key.clone(), value.clone());
                        (DeltaKind::AssignedNodeProperty, old)
                    }
                    ItemId::Rel(id) => {
                        let r = self.graph.rel_mut(id)?;
                        let old = r.properties.insert(key.clone(), value.clone());
                        (DeltaKind::AssignedRelProperty, old)
                    }
                };
                let mut rec = Self::blank_record(kind, item, item_labels);
                rec.key = Some(key);
                rec.old_value = Some(old.unwrap_or(Value::Null));
                rec.new_value = Some(value);
                self.push_record(rec)?;
            }
            PropOp::Remove => {
                let (kind, old) = match item {
                    ItemId::Node(id) => {
                        let n = self.graph.node_mut(id)?;
                        (DeltaKind::RemovedNodeProperty, n.properties.remove(&key))
                    }
                    ItemId::Rel(id) => {
                        let r = self.graph.rel_mut(id)?;
                        (DeltaKind::RemovedRelProperty, r.properties.remove(&key))
                    }
                };
                let old = old.ok_or_else(|| StoreError::PropertyAbsent {
                    item,
                    key: key.clone(),
                })?;
                let mut rec = Self::blank_record(kind, item, item_labels);
                rec.key = Some(key);
                rec.old_value = Some(old);
                self.push_record(rec)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delta::replay;

    fn labels(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn props(xs: &[(&str, Value)]) -> BTreeMap<String, Value> {
        xs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn test_mutation_outside_transaction_rejected() {
        let mut s = GraphStore::new();
        let err = s.create_node(labels(&["A"]), BTreeMap::new()).unwrap_err();
        assert_eq!(err, StoreError::NoTransaction);
    }

    #[test]
    fn test_create_node_folds_into_one_record() {
        let mut s = GraphStore::new();
        s.begin().unwrap();
        let id = s
            .create_node(labels(&["A", "B"]), props(&[("x", Value::Integer(1))]))
            .unwrap();
        let cs = s.commit().unwrap();
        assert_eq!(cs.len(), 1);
        let rec = &cs.records[0];
        assert_eq!(rec.kind, DeltaKind::CreatedNode);
        assert_eq!(rec.item, ItemId::Node(id));
        assert_eq!(rec.item_labels, labels(&["A", "B"]));
        let payload = rec.node_payload.as_ref().unwrap();
        assert_eq!(payload.properties.get("x"), Some(&Value::Integer(1)));
    }

    #[test]
    fn test_rollback_restores_graph() {
        let mut s = GraphStore::new();
        s.begin().unwrap();
        s.create_node(labels(&["A"]), BTreeMap::new()).unwrap();
        s.commit().unwrap();
        let before = s.graph().clone();
        s.begin().unwrap();
        s.create_node(labels(&["B"]), BTreeMap::new()).unwrap();
        s.rollback().unwrap();
        assert_eq!(s.graph(), &before);
    }

    #[test]
    fn test_set_same_value_still_records() {
        let mut s = GraphStore::new();
        s.begin().unwrap();
        let id = s
            .create_node(labels(&["A"]), props(&[("x", Value::Integer(1))]))
            .unwrap();
        s.mutate_property(ItemId::Node(id), PropOp::Set, "x", Some(Value::Integer(1)))
            .unwrap();
        let cs = s.commit().unwrap();
        assert_eq!(cs.len(), 2);
        let rec = &cs.records[1];
        assert_eq!(rec.old_value, Some(Value::Integer(1)));
        assert_eq!(rec.new_value, Some(Value::Integer(1)));
    }

    #[test]
    fn test_set_fresh_property_records_null_old_value() {
        let mut s = GraphStore::new();
        s.begin().unwrap();
        let id = s.create_node(labels(&["A"]), BTreeMap::new()).unwrap();
        s.mutate_property(ItemId::Node(id), PropOp::Set, "x", Some(Value::Integer(7)))
            .unwrap();
        let cs = s.commit().unwrap();
        assert_eq!(cs.records[1].old_value, Some(Value::Null));
        assert_eq!(cs.records[1].new_value, Some(Value::Integer(7)));
    }

    #[test]
    fn test_label_add_idempotent_remove_absent_errors() {
        let mut s = GraphStore::new();
        s.begin().unwrap();
        let id = s.create_node(labels(&["A"]), BTreeMap::new()).unwrap();
        s.mutate_label(id, LabelOp::Add, "A").unwrap();
        assert_eq!(s.txn_records().len(), 1, "re-adding a label is silent");
        let err = s.mutate_label(id, LabelOp::Remove, "Z").unwrap_err();
        assert_eq!(
            err,
            StoreError::LabelAbsent {
                node: id,
                label: "Z".into()
            }
        );
    }

    #[test]
    fn test_detach_delete_orders_rels_before_node() {
        let mut s = GraphStore::new();
        s.begin().unwrap();
        let a = s.create_node(labels(&["A"]), BTreeMap::new()).unwrap();
        let b = s.create_node(labels(&["B"]), BTreeMap::new()).unwrap();
        s.create_relationship("R", a, b, BTreeMap::new()).unwrap();
        s.create_relationship("S", b, a, BTreeMap::new()).unwrap();
        let mark = s.mark();
        s.delete_item(ItemId::Node(a), true).unwrap();
        let kinds: Vec<DeltaKind> = s.records_since(mark).iter().map(|r| r.kind).collect();
        assert_eq!(
            kinds,
            vec![
                DeltaKind::DeletedRel,
                DeltaKind::DeletedRel,
                DeltaKind::DeletedNode
            ]
        );
    }

    #[test]
    fn test_plain_delete_with_incident_rels_rejected() {
        let mut s = GraphStore::new();
        s.begin().unwrap();
        let a = s.create_node(labels(&["A"]), BTreeMap::new()).unwrap();
        let b = s.create_node(labels(&["B"]), BTreeMap::new()).unwrap();
        s.create_relationship("R", a, b, BTreeMap::new()).unwrap();
        let err = s.delete_item(ItemId::Node(a), false).unwrap_err();
        assert_eq!(err, StoreError::HasIncidentRelationships(a));
    }

    #[test]
    fn test_null_assignment_rejected() {
        let mut s = GraphStore::new();
        s.begin().unwrap();
        let id = s.create_node(labels(&["A"]), BTreeMap::new()).unwrap();
        let err = s
            .mutate_property(ItemId::Node(id), PropOp::Set, "x", Some(Value::Null))
            .unwrap_err();
        assert_eq!(err, StoreError::NullAssignment("x".into()));
    }

    #[test]
    fn test_changeset_replays_onto_base() {
        let mut s = GraphStore::new();
        s.begin().unwrap();
        let a = s
            .create_node(labels(&["A"]), props(&[("x", Value::Integer(1))]))
            .unwrap();
        let b = s.create_node(labels(&["B"]), BTreeMap::new()).unwrap();
        s.create_relationship("R", a, b, BTreeMap::new()).unwrap();
        s.mutate_property(ItemId::Node(a), PropOp::Set, "x", Some(Value::Integer(2)))
            .unwrap();
        s.mutate_label(b, LabelOp::Add, "C").unwrap();
        s.delete_item(ItemId::Node(b), true).unwrap();
        let base = s.txn_base().unwrap().clone();
        let cs = s.commit().unwrap();
        let mut replayed = base;
        replay(&mut replayed, &cs.records).unwrap();
        assert_eq!(&replayed, s.graph());
    }

    #[test]
    fn test_record_seqs_ascend_from_one() {
        let mut s = GraphStore::new();
        s.begin().unwrap();
        s.create_node(labels(&["A"]), BTreeMap::new()).unwrap();
        s.create_node(labels(&["B"]), BTreeMap::new()).unwrap();
        let seqs: Vec<u64> = s.txn_records().iter().map(|r| r.seq).collect();
        assert_eq!(seqs, vec![1, 2]);
    }
}
