//! Query evaluation: rows, bindings, pattern matching, and the stage
//! pipeline.
//!
//! A row maps variable names to bindings. Bindings are values, live graph
//! items, detached payloads (items that no longer exist, e.g. the OLD side
//! of a delete), item views (a live item with property overrides, e.g. the
//! OLD side of a property assignment), or lists of bindings.

mod exec;
mod expr;
mod pattern;

pub use exec::{execute_read, execute_write};
pub use expr::{eval_expr, eval_filter, EvalCtx};
pub use pattern::match_patterns;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::graph::{Graph, ItemId, Node, NodeId, RelId, Relationship};
use crate::value::Value;

#[derive(Debug, Clone)]
pub enum Binding {
    Value(Value),
    Node(NodeId),
    Rel(RelId),
    DetachedNode(Arc<Node>),
    DetachedRel(Arc<Relationship>),
    NodeView {
        id: NodeId,
        overrides: Arc<BTreeMap<String, Value>>,
    },
    RelView {
        id: RelId,
        overrides: Arc<BTreeMap<String, Value>>,
    },
    List(Vec<Binding>),
}

impl Binding {
    /// The graph item this binding stands for, when it stands for one that
    /// might still be live. Detached payloads return None.
    pub fn live_item(&self) -> Option<ItemId> {
        match self {
            Binding::Node(id) | Binding::NodeView { id, .. } => Some(ItemId::Node(*id)),
            Binding::Rel(id) | Binding::RelView { id, .. } => Some(ItemId::Rel(*id)),
            _ => None,
        }
    }

    pub fn is_item(&self) -> bool {
        !matches!(self, Binding::Value(_) | Binding::List(_))
    }

    /// Property lookup. None when the binding is not an item; absent keys
    /// (or items gone from the graph) read as the null marker.
    pub fn property(&self, graph: &Graph, key: &str) -> Option<Value> {
        let live_node = |id: &NodeId| {
            graph
                .node(*id)
                .and_then(|n| n.properties.get(key))
                .cloned()
                .unwrap_or(Value::Null)
        };
        let live_rel = |id: &RelId| {
            graph
                .rel(*id)
                .and_then(|r| r.properties.get(key))
                .cloned()
                .unwrap_or(Value::Null)
        };
        match self {
            Binding::Node(id) => Some(live_node(id)),
            Binding::Rel(id) => Some(live_rel(id)),
            Binding::DetachedNode(n) => {
                Some(n.properties.get(key).cloned().unwrap_or(Value::Null))
            }
            Binding::DetachedRel(r) => {
                Some(r.properties.get(key).cloned().unwrap_or(Value::Null))
            }
            Binding::NodeView { id, overrides } => Some(
                overrides
                    .get(key)
                    .cloned()
                    .unwrap_or_else(|| live_node(id)),
            ),
            Binding::RelView { id, overrides } => Some(
                overrides
                    .get(key)
                    .cloned()
                    .unwrap_or_else(|| live_rel(id)),
            ),
            // A group with one member answers for it; larger groups are
            // ambiguous in value position.
            Binding::List(items) if items.len() == 1 => items[0].property(graph, key),
            Binding::Value(_) | Binding::List(_) => None,
        }
    }

    /// Labels of the bound item; a relationship contributes its type.
    pub fn labels(&self, graph: &Graph) -> Option<BTreeSet<String>> {
        match self {
            Binding::Node(id) | Binding::NodeView { id, .. } => {
                graph.node(*id).map(|n| n.labels.clone())
            }
            Binding::Rel(id) | Binding::RelView { id, .. } => graph
                .rel(*id)
                .map(|r| BTreeSet::from([r.rel_type.clone()])),
            Binding::DetachedNode(n) => Some(n.labels.clone()),
            Binding::DetachedRel(r) => Some(BTreeSet::from([r.rel_type.clone()])),
            Binding::Value(_) | Binding::List(_) => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Binding::Value(_) => 0,
            Binding::Node(_) => 1,
            Binding::Rel(_) => 2,
            Binding::DetachedNode(_) => 3,
            Binding::DetachedRel(_) => 4,
            Binding::NodeView { .. } => 5,
            Binding::RelView { .. } => 6,
            Binding::List(_) => 7,
        }
    }

    pub fn render(&self) -> String {
        match self {
            Binding::Value(v) => v.to_string(),
            Binding::Node(id) => id.to_string(),
            Binding::Rel(id) => id.to_string(),
            Binding::DetachedNode(n) => format!("deleted {}", n.id),
            Binding::DetachedRel(r) => format!("deleted {}", r.id),
            Binding::NodeView { id, .. } => format!("{id} (old view)"),
            Binding::RelView { id, .. } => format!("{id} (old view)"),
            Binding::List(xs) => {
                let parts: Vec<String> = xs.iter().map(Binding::render).collect();
                format!("[{}]", parts.join(", "))
            }
        }
    }
}

/// Total, deterministic order over bindings: by variant rank, then by
/// id/value, lists lexicographically.
pub fn cmp_bindings(a: &Binding, b: &Binding) -> Ordering {
    match (a, b) {
        (Binding::Value(x), Binding::Value(y)) => x.total_order(y),
        (Binding::Node(x), Binding::Node(y)) => x.cmp(y),
        (Binding::Rel(x), Binding::Rel(y)) => x.cmp(y),
        (Binding::DetachedNode(x), Binding::DetachedNode(y)) => x.id.cmp(&y.id),
        (Binding::DetachedRel(x), Binding::DetachedRel(y)) => x.id.cmp(&y.id),
        (Binding::NodeView { id: x, .. }, Binding::NodeView { id: y, .. }) => x.cmp(y),
        (Binding::RelView { id: x, .. }, Binding::RelView { id: y, .. }) => x.cmp(y),
        (Binding::List(xs), Binding::List(ys)) => {
            for (x, y) in xs.iter().zip(ys.iter()) {
                let ord = cmp_bindings(x, y);
                if ord != Ordering::Equal {
                    return ord;
                }
            }
            xs.len().cmp(&ys.len())
        }
        (x, y) => x.rank().cmp(&y.rank()),
    }
}

/// Equality under [`cmp_bindings`], used for distinct counting.
pub fn bindings_equal(a: &Binding, b: &Binding) -> bool {
    cmp_bindings(a, b) == Ordering::Equal
}

/// One result row: variable name to binding.
#[derive(Debug, Clone, Default)]
pub struct Row {
    bindings: BTreeMap<String, Binding>,
}

impl Row {
    pub fn new() -> Self {
        Row::default()
    }

    pub fn get(&self, name: &str) -> Option<&Binding> {
        self.bindings.get(name)
    }

    pub fn set(&mut self, name: impl Into<String>, binding: Binding) {
        self.bindings.insert(name.into(), binding);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.bindings.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.bindings.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Binding)> {
        self.bindings.iter()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn render(&self) -> String {
        let parts: Vec<String> = self
            .bindings
            .iter()
            .map(|(k, v)| format!("{k}={}", v.render()))
            .collect();
        parts.join(", ")
    }
}

/// Deterministic row order: lexicographic over the sorted union of names.
pub fn cmp_rows(a: &Row, b: &Row) -> Ordering {
    let names: BTreeSet<&String> = a.names().chain(b.names()).collect();
    for name in names {
        let ord = match (a.get(name), b.get(name)) {
            (Some(x), Some(y)) => cmp_bindings(x, y),
            (Some(_), None) => Ordering::Greater,
            (None, Some(_)) => Ordering::Less,
            (None, None) => Ordering::Equal,
        };
        if ord != Ordering::Equal {
            return ord;
        }
    }
    Ordering::Equal
}
