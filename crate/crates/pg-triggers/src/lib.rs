//! An embedded, transactional, in-memory property-graph engine whose
//! mutations activate event-condition-action triggers, plus a transpiler
//! that emits equivalent trigger installations for Neo4j APOC and Memgraph.
//!
//! Layering, bottom up:
//! - [`graph`] / [`delta`] / [`store`]: the property graph, the typed change
//!   log, and the transactional store that captures it.
//! - [`lexer`] / [`ast`] / [`parser`] / [`eval`]: the query subset used by
//!   statements and trigger conditions.
//! - [`ddl`]: trigger definitions, their parser, and validation.
//! - [`engine`]: event detection, transition binding, trigger execution,
//!   cascades, and commit-time processing.
//! - [`transpile`]: APOC and Memgraph emission.

pub mod ast;
pub mod ddl;
pub mod delta;
pub mod engine;
pub mod error;
pub mod eval;
pub mod graph;
pub mod lexer;
pub mod parser;
pub mod snapshot;
pub mod store;
pub mod transpile;
pub mod value;

pub use delta::{ChangeSet, DeltaKind, DeltaRecord};
pub use engine::Engine;
pub use error::{
    EngineError, EvalError, ParseError, SnapshotError, StoreError, TranspileError,
    ValidationError, ViolationCode,
};
pub use transpile::{
    map_transition_source, token_stream_eq, transpile_apoc, transpile_memgraph, Backend, Side,
    TranspileOptions, TranspiledTrigger, TransitionSource,
};
pub use graph::{Graph, ItemId, Node, NodeId, RelId, Relationship};
pub use store::GraphStore;
pub use value::{Clock, Value};
