//! Error types for the store, the query subset, trigger DDL, the engine, and
//! the transpiler.

use thiserror::Error;

use crate::graph::{ItemId, NodeId, RelId};

/// Store-level failures: unknown items, dangling endpoints, transaction misuse.
#[derive(Debug, Error, PartialEq)]
pub enum StoreError {
    #[error("no transaction is open")]
    NoTransaction,
    #[error("a transaction is already open")]
    TransactionOpen,
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown relationship {0}")]
    UnknownRelationship(RelId),
    #[error("relationship endpoint {0} does not exist")]
    DanglingEndpoint(NodeId),
    #[error("node {0} still has incident relationships (use detach delete)")]
    HasIncidentRelationships(NodeId),
    #[error("label '{label}' is not present on node {node}")]
    LabelAbsent { node: NodeId, label: String },
    #[error("property '{key}' is not present on {item}")]
    PropertyAbsent { item: ItemId, key: String },
    #[error("null cannot be assigned to property '{0}'")]
    NullAssignment(String),
    #[error("snapshot export requires no open transaction")]
    ExportDuringTransaction,
}

/// Positioned syntax error from the lexer or either parser.
#[derive(Debug, Error, PartialEq)]
#[error("parse error at line {line}, column {col}: {message}")]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl ParseError {
    pub fn new(line: u32, col: u32, message: impl Into<String>) -> Self {
        ParseError {
            line,
            col,
            message: message.into(),
        }
    }
}

/// Runtime failure while evaluating an expression or executing a statement.
#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("variable '{0}' is not bound")]
    UnboundVariable(String),
    #[error("variable '{0}' is bound to a graph item, not a value")]
    ItemInValueContext(String),
    #[error("variable '{0}' is bound to a list; expected a single item")]
    ListInItemContext(String),
    #[error("variable '{0}' is not a graph item")]
    NotAnItem(String),
    #[error("variable '{0}' does not refer to a deletable item in the graph")]
    NotDeletable(String),
    #[error("type mismatch: cannot apply {op} to {left} and {right}")]
    TypeMismatch {
        op: &'static str,
        left: &'static str,
        right: &'static str,
    },
    #[error("division by zero")]
    DivisionByZero,
    #[error("{0} is not allowed in a read-only pipeline")]
    MutationInReadOnly(&'static str),
    #[error("aggregate used outside WITH")]
    AggregateOutsideWith,
    #[error("WITH item '{0}' requires an alias")]
    AliasRequired(String),
    #[error("FOREACH expects a list, got '{0}'")]
    NotAList(String),
    #[error("relationship pattern in CREATE must be directed")]
    UndirectedCreate,
    #[error("relationship pattern in CREATE must carry a type")]
    UntypedCreate,
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Trigger definition rejected by validation. Codes name the violated rule.
#[derive(Debug, Error, PartialEq)]
#[error("invalid trigger '{trigger}' [{code}]: {message}")]
pub struct ValidationError {
    pub trigger: String,
    pub code: ViolationCode,
    pub message: String,
}

/// Machine-readable violation classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationCode {
    /// (a) SET/REMOVE without a property target would monitor the target label itself.
    TargetLabelEvent,
    /// (b) the action statement assigns or removes the trigger's own target label.
    TargetLabelInStatement,
    /// (c) transition variable or alias incompatible with event, granularity, or item kind.
    TransitionCoherence,
    /// (d) BEFORE action contains anything beyond property SET/REMOVE rooted at NEW-side variables.
    BeforeRestriction,
    /// (e) trigger name already installed.
    DuplicateName,
}

impl std::fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ViolationCode::TargetLabelEvent => "target-label-event",
            ViolationCode::TargetLabelInStatement => "target-label-in-statement",
            ViolationCode::TransitionCoherence => "transition-coherence",
            ViolationCode::BeforeRestriction => "before-restriction",
            ViolationCode::DuplicateName => "duplicate-name",
        };
        f.write_str(s)
    }
}

/// Engine-level failures around transactions and trigger execution.
#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("cascade depth limit {limit} exceeded; trigger stack: {}", stack.join(" -> "))]
    DepthLimitExceeded { limit: u32, stack: Vec<String> },
    #[error("trigger '{trigger}' mutated its own target label '{label}'")]
    TargetLabelMutated { trigger: String, label: String },
    #[error("unknown trigger '{0}'")]
    UnknownTrigger(String),
    #[error("commit aborted by trigger '{trigger}': {cause}")]
    CommitAborted { trigger: String, cause: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

/// Snapshot import failures.
#[derive(Debug, Error, PartialEq)]
pub enum SnapshotError {
    #[error("malformed snapshot: {0}")]
    Malformed(String),
    #[error("duplicate id {0} in snapshot")]
    DuplicateId(String),
    #[error("relationship {rel} references missing node {node}")]
    DanglingReference { rel: u64, node: u64 },
}

/// Transpilation failures.
#[derive(Debug, Error, PartialEq)]
pub enum TranspileError {
    #[error("no transition source for {event} {item_kind} ({side} side)")]
    IllegalTransitionCell {
        event: &'static str,
        item_kind: &'static str,
        side: &'static str,
    },
    #[error(transparent)]
    Validation(#[from] ValidationError),
}
