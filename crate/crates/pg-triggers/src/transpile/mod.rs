//! Translation of installed triggers into backend trigger dialects.
//!
//! Two backends are supported: Neo4j APOC trigger installation calls and
//! Memgraph `CREATE TRIGGER` statements. Both receive the same structural
//! rewriting; they differ in transition sources, prelude shape, guards, and
//! the surrounding wrapper. Emitted text is compared token-wise via
//! [`token_stream_eq`], so layout is free but every token is accountable.

mod apoc;
mod memgraph;
mod rewrite;
mod tokens;

pub use apoc::transpile_apoc;
pub use memgraph::transpile_memgraph;
pub use tokens::{token_stream_eq, tokens, Token};

use crate::ddl::{EventKind, TargetKind};
use crate::error::TranspileError;

/// Backend dialect selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Apoc,
    Memgraph,
}

/// Which transition side of an event a variable exposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Old,
    New,
}

/// Where a backend surfaces the transition items for one event and side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransitionSource {
    /// Backend variable holding the transition payload.
    pub variable: &'static str,
    /// Field projected off each payload entry, when the payload is keyed.
    pub projection: Option<&'static str>,
}

/// Knobs for emission that are not part of the trigger itself.
#[derive(Debug, Clone)]
pub struct TranspileOptions {
    /// Database name the APOC installation call targets.
    pub database: String,
    /// Declared `(subtype, supertype)` label pairs joined by Isa edges.
    pub hierarchies: Vec<(String, String)>,
}

impl Default for TranspileOptions {
    fn default() -> Self {
        TranspileOptions {
            database: "databaseName".to_string(),
            hierarchies: Vec::new(),
        }
    }
}

/// One transpiled trigger: emitted text plus fidelity warnings.
#[derive(Debug, Clone)]
pub struct TranspiledTrigger {
    pub backend: Backend,
    pub name: String,
    pub text: String,
    pub warnings: Vec<String>,
}

/// Maps an event, target kind, and transition side to the backend source
/// holding those items. The four combinations without a transition (created
/// items have no old state, deleted items no new state) are rejected.
pub fn map_transition_source(
    event: EventKind,
    target: TargetKind,
    side: Side,
    backend: Backend,
) -> Result<TransitionSource, TranspileError> {
    use Backend::*;
    use EventKind::*;
    use Side::*;
    use TargetKind::*;
    let illegal = || TranspileError::IllegalTransitionCell {
        event: event.keyword(),
        item_kind: match target {
            Node => "node",
            Relationship => "relationship",
        },
        side: match side {
            Old => "old",
            New => "new",
        },
    };
    let src = |variable, projection| Ok(TransitionSource { variable, projection });
    match (backend, event, target, side) {
        (_, Create, _, Old) | (_, Delete, _, New) => Err(illegal()),
        (Apoc, Create, Node, New) => src("$createdNodes", None),
        (Apoc, Create, Relationship, New) => src("$createdRelationships", None),
        (Apoc, Delete, Node, Old) => src("$deletedNodes", None),
        (Apoc, Delete, Relationship, Old) => src("$deletedRelationships", None),
        (Apoc, Set, Node, Old) => src("$assignedNodeProperties", Some(".old")),
        (Apoc, Set, Node, New) => src("$assignedNodeProperties", Some(".new")),
        (Apoc, Set, Relationship, Old) => src("$assignedRelationshipProperties", Some(".old")),
        (Apoc, Set, Relationship, New) => src("$assignedRelationshipProperties", Some(".new")),
        (Apoc, Remove, Node, Old) => src("$removedNodeProperties", Some(".old")),
        (Apoc, Remove, Node, New) => src("$removedNodeProperties", Some(".node")),
        (Apoc, Remove, Relationship, Old) => src("$removedRelationshipProperties", Some(".old")),
        (Apoc, Remove, Relationship, New) => src("$removedRelationshipProperties", Some(".rel")),
        (Memgraph, Create, Node, New) => src("createdVertices", None),
        (Memgraph, Create, Relationship, New) => src("createdEdges", None),
        (Memgraph, Delete, Node, Old) => src("deletedVertices", None),
        (Memgraph, Delete, Relationship, Old) => src("deletedEdges", None),
        (Memgraph, Set, Node, Old) => src("setVertexProperties", Some(".old")),
        (Memgraph, Set, Node, New) => src("setVertexProperties", Some(".new")),
        (Memgraph, Set, Relationship, Old) => src("setEdgeProperties", Some(".old")),
        (Memgraph, Set, Relationship, New) => src("setEdgeProperties", Some(".new")),
        (Memgraph, Remove, Node, Old) => src("removedVertexProperties", Some(".old")),
        (Memgraph, Remove, Node, New) => src("removedVertexProperties", Some(".vertex")),
        (Memgraph, Remove, Relationship, Old) => src("removedEdgeProperties", Some(".old")),
        (Memgraph, Remove, Relationship, New) => src("removedEdgeProperties", Some(".edge")),
    }
}

/// The item variable a backend prelude binds for one trigger.
pub(crate) fn item_variable(event: EventKind, target: TargetKind) -> &'static str {
    match (event, target) {
        (EventKind::Create, TargetKind::Node) => "cNodes",
        (EventKind::Create, TargetKind::Relationship) => "cRels",
        (EventKind::Delete, TargetKind::Node) => "dNodes",
        (EventKind::Delete, TargetKind::Relationship) => "dRels",
        (EventKind::Set | EventKind::Remove, TargetKind::Node) => "node",
        (EventKind::Set | EventKind::Remove, TargetKind::Relationship) => "rel",
    }
}
