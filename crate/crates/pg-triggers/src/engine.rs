//! The trigger engine: event detection, transition binding, condition
//! evaluation, action execution, and cascade accounting.
//!
//! Statements run inside a transaction. After each statement the engine
//! scans the fresh delta records and activates BEFORE and AFTER triggers;
//! actions run as nested contexts whose own records are scanned in turn,
//! with a depth limit cutting off non-terminating cascades. ONCOMMIT
//! triggers run as a fixpoint over the whole transaction log during
//! `commit`, and DETACHED triggers run after it in autonomous transactions
//! whose failures never undo the committed work.
//!
//! BEFORE triggers are emulated: their conditions see the pre-statement
//! graph and pre-state transition bindings, their (validation-restricted)
//! actions run against the post-state. They are reported ahead of AFTER
//! triggers of the same fragment.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::ddl::{
    parse_trigger, validate_trigger, ActionTime, AdminCommand, Condition, EventKind, Granularity,
    TargetKind, TransitionKind, TriggerDefinition,
};
use crate::delta::{ChangeSet, DeltaKind, DeltaRecord};
use crate::error::{EngineError, StoreError};
use crate::eval::{eval_filter, execute_read, execute_write, Binding, EvalCtx, Row};
use crate::graph::{Graph, ItemId, Node, NodeId, Relationship};
use crate::parser::{parse_read_pipeline, parse_statement, Cursor};
use crate::store::GraphStore;
use crate::value::{Clock, Value};

/// One trigger evaluation: which trigger, at which time, at which cascade
/// depth, over which delta records, and whether its condition held.
#[derive(Debug, Clone, PartialEq)]
pub struct FiringRecord {
    pub trigger: String,
    pub time: ActionTime,
    pub depth: u32,
    pub seqs: Vec<u64>,
    pub condition: bool,
}

#[derive(Debug)]
pub struct StatementOutcome {
    pub rows: Vec<Row>,
    pub firings: Vec<FiringRecord>,
}

#[derive(Debug)]
pub struct CommitOutcome {
    pub changes: ChangeSet,
    pub firings: Vec<FiringRecord>,
}

#[derive(Clone)]
struct Installed {
    def: Arc<TriggerDefinition>,
    stamp: u64,
    enabled: bool,
}

#[derive(Clone)]
struct ActiveTrigger {
    def: Arc<TriggerDefinition>,
    stamp: u64,
}

pub struct Engine {
    store: GraphStore,
    registry: BTreeMap<String, Installed>,
    next_stamp: u64,
    clock: Clock,
    depth_limit: u32,
    /// Enabled triggers captured at `begin`, in installation order.
    active: Option<Vec<ActiveTrigger>>,
    log: Vec<String>,
}

pub const DEFAULT_DEPTH_LIMIT: u32 = 16;

impl Engine {
    pub fn new(clock: Clock) -> Engine {
        Engine::from_graph(Graph::new(), clock)
    }

    pub fn from_graph(graph: Graph, clock: Clock) -> Engine {
        Engine {
            store: GraphStore::from_graph(graph),
            registry: BTreeMap::new(),
            next_stamp: 1,
            clock,
            depth_limit: DEFAULT_DEPTH_LIMIT,
            active: None,
            log: Vec::new(),
        }
    }

    pub fn graph(&self) -> &Graph {
        self.store.graph()
    }

    pub fn clock(&self) -> &Clock {
        &self.clock
    }

    pub fn in_transaction(&self) -> bool {
        self.store.in_transaction()
    }

    pub fn set_depth_limit(&mut self, limit: u32) {
        self.depth_limit = limit;
    }

    pub fn depth_limit(&self) -> u32 {
        self.depth_limit
    }

    /// Diagnostics accumulated since the last drain (condition errors,
    /// detached-trigger failures).
    pub fn drain_log(&mut self) -> Vec<String> {
        std::mem::take(&mut self.log)
    }

    /// Swaps in a new base graph. Refused while a transaction is open.
    pub fn replace_graph(&mut self, graph: Graph) -> Result<(), EngineError> {
        if self.store.in_transaction() {
            return Err(StoreError::TransactionOpen.into());
        }
        self.store = GraphStore::from_graph(graph);
        Ok(())
    }

    /// Parses, validates and installs a trigger; returns its name.
    pub fn install_trigger(&mut self, src: &str) -> Result<String, EngineError> {
        let def = parse_trigger(src)?;
        self.install_definition(def)
    }

    pub fn install_definition(&mut self, def: TriggerDefinition) -> Result<String, EngineError> {
        let existing: BTreeSet<String> = self.registry.keys().cloned().collect();
        validate_trigger(&def, &existing)?;
        let name = def.name.clone();
        self.registry.insert(
            name.clone(),
            Installed {
                def: Arc::new(def),
                stamp: self.next_stamp,
                enabled: true,
            },
        );
        self.next_stamp += 1;
        Ok(name)
    }

    /// Installed definitions in installation order.
    pub fn triggers(&self) -> Vec<Arc<TriggerDefinition>> {
        let mut items: Vec<&Installed> = self.registry.values().collect();
        items.sort_by_key(|i| i.stamp);
        items.iter().map(|i| i.def.clone()).collect()
    }

    /// Applies an administration command; SHOW returns one line per trigger.
    pub fn admin(&mut self, cmd: &AdminCommand) -> Result<Vec<String>, EngineError> {
        match cmd {
            AdminCommand::Drop(name) => {
                self.registry
                    .remove(name)
                    .ok_or_else(|| EngineError::UnknownTrigger(name.clone()))?;
                Ok(Vec::new())
            }
            AdminCommand::Enable(name) | AdminCommand::Disable(name) => {
                let enabled = matches!(cmd, AdminCommand::Enable(_));
                let entry = self
                    .registry
                    .get_mut(name)
                    .ok_or_else(|| EngineError::UnknownTrigger(name.clone()))?;
                entry.enabled = enabled;
                Ok(Vec::new())
            }
            AdminCommand::Show => {
                let mut items: Vec<&Installed> = self.registry.values().collect();
                items.sort_by_key(|i| i.stamp);
                Ok(items.iter().map(|i| describe(&i.def, i.enabled)).collect())
            }
        }
    }

    pub fn begin(&mut self) -> Result<(), EngineError> {
        self.store.begin()?;
        let mut snapshot: Vec<ActiveTrigger> = self
            .registry
            .values()
            .filter(|i| i.enabled)
            .map(|i| ActiveTrigger {
                def: i.def.clone(),
                stamp: i.stamp,
            })
            .collect();
        snapshot.sort_by_key(|t| t.stamp);
        self.active = Some(snapshot);
        Ok(())
    }

    pub fn rollback(&mut self) -> Result<(), EngineError> {
        self.store.rollback()?;
        self.active = None;
        Ok(())
    }

    /// Runs one statement inside the open transaction and processes the
    /// BEFORE and AFTER triggers it activates, cascades included.
    pub fn run_statement(&mut self, src: &str) -> Result<StatementOutcome, EngineError> {
        let stmt = parse_statement(src)?;
        if !self.store.in_transaction() {
            return Err(StoreError::NoTransaction.into());
        }
        let pre = self.store.graph().clone();
        let mark = self.store.mark();
        self.store.set_depth(0);
        let rows = execute_write(&mut self.store, &self.clock, &stmt.stages, vec![Row::new()])?;
        let mut firings = Vec::new();
        let mut stack = Vec::new();
        self.process_fragment(mark, &pre, 0, &mut stack, &mut firings)?;
        Ok(StatementOutcome { rows, firings })
    }

    /// Runs a read-only pipeline against the current graph (no transaction
    /// required, nothing activates).
    pub fn run_read(&self, src: &str) -> Result<Vec<Row>, EngineError> {
        let mut c = Cursor::new(src)?;
        let stages = parse_read_pipeline(&mut c, &[])?;
        if let Some(t) = c.peek() {
            return Err(crate::error::ParseError::new(
                t.line,
                t.col,
                format!("unexpected {}", t.describe()),
            )
            .into());
        }
        Ok(execute_read(
            self.store.graph(),
            &self.clock,
            &stages,
            vec![Row::new()],
        )?)
    }

    /// Commits: ONCOMMIT fixpoint, then the store commit, then DETACHED
    /// triggers in autonomous transactions. Any ONCOMMIT failure rolls the
    /// whole transaction back.
    pub fn commit(&mut self) -> Result<CommitOutcome, EngineError> {
        if !self.store.in_transaction() {
            return Err(StoreError::NoTransaction.into());
        }
        let mut firings = Vec::new();
        if let Err(e) = self.run_oncommit(&mut firings) {
            self.store.rollback()?;
            self.active = None;
            return Err(e);
        }
        let changes = self.store.commit()?;
        self.active = None;
        self.run_detached(&changes.records, &mut firings);
        Ok(CommitOutcome { changes, firings })
    }

    fn active_triggers(&self) -> Vec<ActiveTrigger> {
        self.active.clone().unwrap_or_default()
    }

    /// Scans the records appended since `mark` and fires matching BEFORE
    /// and AFTER triggers. `depth` is the cascade depth that produced the
    /// fragment.
    fn process_fragment(
        &mut self,
        mark: usize,
        pre_graph: &Graph,
        depth: u32,
        stack: &mut Vec<String>,
        firings: &mut Vec<FiringRecord>,
    ) -> Result<(), EngineError> {
        let fragment: Vec<DeltaRecord> = self.store.records_since(mark).to_vec();
        if fragment.is_empty() {
            return Ok(());
        }
        struct Activation {
            phase: u8,
            stamp: u64,
            first_seq: u64,
            def: Arc<TriggerDefinition>,
            records: Vec<DeltaRecord>,
        }
        let mut activations = Vec::new();
        for t in self.active_triggers() {
            let phase = match t.def.time {
                ActionTime::Before => 0,
                ActionTime::After => 1,
                _ => continue,
            };
            let matching: Vec<DeltaRecord> = fragment
                .iter()
                .filter(|r| record_matches(&t.def, r))
                .cloned()
                .collect();
            if matching.is_empty() {
                continue;
            }
            match t.def.granularity {
                Granularity::Each => {
                    for r in matching {
                        activations.push(Activation {
                            phase,
                            stamp: t.stamp,
                            first_seq: r.seq,
                            def: t.def.clone(),
                            records: vec![r],
                        });
                    }
                }
                Granularity::All => {
                    activations.push(Activation {
                        phase,
                        stamp: t.stamp,
                        first_seq: matching[0].seq,
                        def: t.def.clone(),
                        records: matching,
                    });
                }
            }
        }
        if activations.is_empty() {
            return Ok(());
        }
        if depth >= self.depth_limit {
            return Err(EngineError::DepthLimitExceeded {
                limit: self.depth_limit,
                stack: stack.clone(),
            });
        }
        activations.sort_by_key(|a| (a.phase, a.stamp, a.first_seq));
        for a in activations {
            self.fire(a.def, &a.records, pre_graph, depth, stack, firings)?;
        }
        Ok(())
    }

    /// Evaluates one activation's condition and, when it holds, runs the
    /// action as a nested context at `depth + 1`.
    fn fire(
        &mut self,
        def: Arc<TriggerDefinition>,
        records: &[DeltaRecord],
        pre_graph: &Graph,
        depth: u32,
        stack: &mut Vec<String>,
        firings: &mut Vec<FiringRecord>,
    ) -> Result<(), EngineError> {
        let before = def.time == ActionTime::Before;
        let row = activation_row(&def, records, before);
        let cond_graph = if before { pre_graph } else { self.store.graph() };
        let (condition, mut seeds) =
            eval_condition(&def, cond_graph, &self.clock, row, &mut self.log);
        if before && condition {
            // The action adjusts the post-state, so its transition bindings
            // must address live items, not the pre-state reading.
            let after_row = activation_row(&def, records, false);
            for seed in &mut seeds {
                for (name, binding) in after_row.iter() {
                    seed.set(name.clone(), binding.clone());
                }
            }
        }
        firings.push(FiringRecord {
            trigger: def.name.clone(),
            time: def.time,
            depth,
            seqs: records.iter().map(|r| r.seq).collect(),
            condition,
        });
        if !condition {
            return Ok(());
        }
        let pre_action = self.store.graph().clone();
        let mark = self.store.mark();
        self.store.set_depth(depth + 1);
        let result = execute_write(&mut self.store, &self.clock, &def.statement.stages, seeds);
        self.store.set_depth(depth);
        result?;
        for r in self.store.records_since(mark) {
            if matches!(r.kind, DeltaKind::AssignedLabel | DeltaKind::RemovedLabel)
                && r.label.as_deref() == Some(def.label.as_str())
            {
                return Err(EngineError::TargetLabelMutated {
                    trigger: def.name.clone(),
                    label: def.label.clone(),
                });
            }
        }
        stack.push(def.name.clone());
        let nested = self.process_fragment(mark, &pre_action, depth + 1, stack, firings);
        stack.pop();
        nested
    }

    /// ONCOMMIT fixpoint: repeatedly picks the earliest-installed ONCOMMIT
    /// trigger with unconsumed matching records anywhere in the transaction
    /// log, until none remains.
    fn run_oncommit(&mut self, firings: &mut Vec<FiringRecord>) -> Result<(), EngineError> {
        let oncommit: Vec<ActiveTrigger> = self
            .active_triggers()
            .into_iter()
            .filter(|t| t.def.time == ActionTime::OnCommit)
            .collect();
        if oncommit.is_empty() {
            return Ok(());
        }
        let mut consumed: BTreeMap<String, BTreeSet<u64>> = BTreeMap::new();
        loop {
            let mut chosen: Option<(ActiveTrigger, Vec<DeltaRecord>)> = None;
            for t in &oncommit {
                let seen = consumed.entry(t.def.name.clone()).or_default();
                let matching: Vec<DeltaRecord> = self
                    .store
                    .txn_records()
                    .iter()
                    .filter(|r| record_matches(&t.def, r) && !seen.contains(&r.seq))
                    .cloned()
                    .collect();
                if matching.is_empty() {
                    continue;
                }
                let set = match t.def.granularity {
                    Granularity::Each => vec![matching[0].clone()],
                    Granularity::All => matching,
                };
                chosen = Some((t.clone(), set));
                break;
            }
            let Some((t, records)) = chosen else {
                break;
            };
            let seen = consumed.entry(t.def.name.clone()).or_default();
            for r in &records {
                seen.insert(r.seq);
            }
            let abort = |cause: String| EngineError::CommitAborted {
                trigger: t.def.name.clone(),
                cause,
            };
            let depth = records.iter().map(|r| r.depth).max().unwrap_or(0);
            if depth >= self.depth_limit {
                let e = EngineError::DepthLimitExceeded {
                    limit: self.depth_limit,
                    stack: vec![t.def.name.clone()],
                };
                return Err(abort(e.to_string()));
            }
            let row = activation_row(&t.def, &records, false);
            let (condition, seeds) =
                eval_condition(&t.def, self.store.graph(), &self.clock, row, &mut self.log);
            firings.push(FiringRecord {
                trigger: t.def.name.clone(),
                time: ActionTime::OnCommit,
                depth,
                seqs: records.iter().map(|r| r.seq).collect(),
                condition,
            });
            if !condition {
                continue;
            }
            let pre_action = self.store.graph().clone();
            let mark = self.store.mark();
            self.store.set_depth(depth + 1);
            let result =
                execute_write(&mut self.store, &self.clock, &t.def.statement.stages, seeds);
            self.store.set_depth(0);
            result.map_err(|e| abort(e.to_string()))?;
            for r in self.store.records_since(mark) {
                if matches!(r.kind, DeltaKind::AssignedLabel | DeltaKind::RemovedLabel)
                    && r.label.as_deref() == Some(t.def.label.as_str())
                {
                    let e = EngineError::TargetLabelMutated {
                        trigger: t.def.name.clone(),
                        label: t.def.label.clone(),
                    };
                    return Err(abort(e.to_string()));
                }
            }
            let mut stack = vec![t.def.name.clone()];
            self.process_fragment(mark, &pre_action, depth + 1, &mut stack, firings)
                .map_err(|e| abort(e.to_string()))?;
        }
        Ok(())
    }

    /// DETACHED triggers run after the commit, each activation in its own
    /// autonomous transaction. Failures are logged and rolled back without
    /// touching the committed state; nested commits chain recursively.
    fn run_detached(&mut self, committed: &[DeltaRecord], firings: &mut Vec<FiringRecord>) {
        let mut detached: Vec<(Arc<TriggerDefinition>, u64)> = self
            .registry
            .values()
            .filter(|i| i.enabled && i.def.time == ActionTime::Detached)
            .map(|i| (i.def.clone(), i.stamp))
            .collect();
        detached.sort_by_key(|(_, stamp)| *stamp);
        for (def, _) in detached {
            let matching: Vec<DeltaRecord> = committed
                .iter()
                .filter(|r| record_matches(&def, r))
                .cloned()
                .collect();
            if matching.is_empty() {
                continue;
            }
            let activations: Vec<Vec<DeltaRecord>> = match def.granularity {
                Granularity::Each => matching.into_iter().map(|r| vec![r]).collect(),
                Granularity::All => vec![matching],
            };
            for records in activations {
                let depth = records.iter().map(|r| r.depth).max().unwrap_or(0);
                if depth >= self.depth_limit {
                    self.log.push(format!(
                        "detached trigger '{}' skipped: cascade depth limit {} reached",
                        def.name, self.depth_limit
                    ));
                    continue;
                }
                if let Err(e) = self.run_detached_activation(&def, &records, depth, firings) {
                    self.log.push(format!(
                        "detached trigger '{}' failed and was rolled back: {e}",
                        def.name
                    ));
                    if self.store.in_transaction() {
                        let _ = self.store.rollback();
                    }
                    self.active = None;
                }
            }
        }
    }

    fn run_detached_activation(
        &mut self,
        def: &Arc<TriggerDefinition>,
        records: &[DeltaRecord],
        depth: u32,
        firings: &mut Vec<FiringRecord>,
    ) -> Result<(), EngineError> {
        self.begin()?;
        let row = activation_row(def, records, false);
        let (condition, seeds) =
            eval_condition(def, self.store.graph(), &self.clock, row, &mut self.log);
        firings.push(FiringRecord {
            trigger: def.name.clone(),
            time: ActionTime::Detached,
            depth,
            seqs: records.iter().map(|r| r.seq).collect(),
            condition,
        });
        if !condition {
            self.rollback()?;
            return Ok(());
        }
        let pre_action = self.store.graph().clone();
        let mark = self.store.mark();
        self.store.set_depth(depth + 1);
        let result = execute_write(&mut self.store, &self.clock, &def.statement.stages, seeds);
        self.store.set_depth(0);
        result?;
        for r in self.store.records_since(mark) {
            if matches!(r.kind, DeltaKind::AssignedLabel | DeltaKind::RemovedLabel)
                && r.label.as_deref() == Some(def.label.as_str())
            {
                return Err(EngineError::TargetLabelMutated {
                    trigger: def.name.clone(),
                    label: def.label.clone(),
                });
            }
        }
        let mut stack = vec![def.name.clone()];
        self.process_fragment(mark, &pre_action, depth + 1, &mut stack, firings)?;
        if let Err(e) = self.run_oncommit(firings) {
            return Err(e);
        }
        let changes = self.store.commit()?;
        self.active = None;
        self.run_detached(&changes.records, firings);
        Ok(())
    }
}

fn describe(def: &TriggerDefinition, enabled: bool) -> String {
    let prop = def
        .property
        .as_ref()
        .map(|p| format!(".'{p}'"))
        .unwrap_or_default();
    let (gran, item) = match (def.granularity, def.target) {
        (Granularity::Each, TargetKind::Node) => ("EACH", "NODE"),
        (Granularity::Each, TargetKind::Relationship) => ("EACH", "RELATIONSHIP"),
        (Granularity::All, TargetKind::Node) => ("ALL", "NODES"),
        (Granularity::All, TargetKind::Relationship) => ("ALL", "RELATIONSHIPS"),
    };
    format!(
        "{} [{} {} ON '{}'{prop} FOR {gran} {item}] {}",
        def.name,
        def.time.keyword(),
        def.event.keyword(),
        def.label,
        if enabled { "enabled" } else { "disabled" }
    )
}

/// Whether one delta record is an occurrence of a trigger's event.
fn record_matches(def: &TriggerDefinition, r: &DeltaRecord) -> bool {
    let kind_ok = match (def.event, def.target) {
        (EventKind::Create, TargetKind::Node) => r.kind == DeltaKind::CreatedNode,
        (EventKind::Create, TargetKind::Relationship) => r.kind == DeltaKind::CreatedRel,
        (EventKind::Delete, TargetKind::Node) => r.kind == DeltaKind::DeletedNode,
        (EventKind::Delete, TargetKind::Relationship) => r.kind == DeltaKind::DeletedRel,
        (EventKind::Set, TargetKind::Node) => r.kind == DeltaKind::AssignedNodeProperty,
        (EventKind::Set, TargetKind::Relationship) => r.kind == DeltaKind::AssignedRelProperty,
        (EventKind::Remove, TargetKind::Node) => r.kind == DeltaKind::RemovedNodeProperty,
        (EventKind::Remove, TargetKind::Relationship) => r.kind == DeltaKind::RemovedRelProperty,
    };
    kind_ok
        && r.item_labels.contains(&def.label)
        && def
            .property
            .as_ref()
            .is_none_or(|p| r.key.as_deref() == Some(p.as_str()))
}

/// Builds (old-side, new-side) bindings for one record. `before` asks for
/// the pre-state reading used by BEFORE conditions.
fn bind_sides(
    record: &DeltaRecord,
    event: EventKind,
    before: bool,
) -> (Option<Binding>, Option<Binding>) {
    let is_node = matches!(record.item, ItemId::Node(_));
    let live = || match record.item {
        ItemId::Node(id) => Binding::Node(id),
        ItemId::Rel(id) => Binding::Rel(id),
    };
    let detached = || {
        if is_node {
            let node = record.node_payload.as_deref().cloned().unwrap_or(Node {
                id: match record.item {
                    ItemId::Node(id) => id,
                    ItemId::Rel(_) => unreachable!(),
                },
                labels: record.item_labels.clone(),
                properties: BTreeMap::new(),
            });
            Binding::DetachedNode(Arc::new(node))
        } else {
            let rel = record.rel_payload.as_deref().cloned().unwrap_or(Relationship {
                id: match record.item {
                    ItemId::Rel(id) => id,
                    ItemId::Node(_) => unreachable!(),
                },
                rel_type: record.item_labels.iter().next().cloned().unwrap_or_default(),
                source: NodeId(0),
                target: NodeId(0),
                properties: BTreeMap::new(),
            });
            Binding::DetachedRel(Arc::new(rel))
        }
    };
    let view = |value: Value| {
        let overrides = Arc::new(BTreeMap::from([(
            record.key.clone().unwrap_or_default(),
            value,
        )]));
        match record.item {
            ItemId::Node(id) => Binding::NodeView { id, overrides },
            ItemId::Rel(id) => Binding::RelView { id, overrides },
        }
    };
    match event {
        EventKind::Create => {
            let new = if before { detached() } else { live() };
            (None, Some(new))
        }
        EventKind::Delete => {
            let old = if before { live() } else { detached() };
            (Some(old), None)
        }
        EventKind::Set => {
            if before {
                let new = view(record.new_value.clone().unwrap_or(Value::Null));
                (Some(live()), Some(new))
            } else {
                let old = view(record.old_value.clone().unwrap_or(Value::Null));
                (Some(old), Some(live()))
            }
        }
        EventKind::Remove => {
            if before {
                (Some(live()), Some(view(Value::Null)))
            } else {
                let old = view(record.old_value.clone().unwrap_or(Value::Null));
                (Some(old), Some(live()))
            }
        }
    }
}

/// The row a trigger's condition and action start from: transition
/// variables under their canonical names and any declared aliases.
fn activation_row(def: &TriggerDefinition, records: &[DeltaRecord], before: bool) -> Row {
    let mut row = Row::new();
    let mut bind = |kind: TransitionKind, binding: Binding| {
        row.set(kind.canonical().to_string(), binding.clone());
        if let Some((_, alias)) = def.aliases.iter().find(|(k, _)| *k == kind) {
            row.set(alias.clone(), binding);
        }
    };
    match def.granularity {
        Granularity::Each => {
            let (old, new) = bind_sides(&records[0], def.event, before);
            if let Some(b) = old {
                bind(TransitionKind::Old, b);
            }
            if let Some(b) = new {
                bind(TransitionKind::New, b);
            }
        }
        Granularity::All => {
            let mut olds = Vec::new();
            let mut news = Vec::new();
            for r in records {
                let (old, new) = bind_sides(r, def.event, before);
                if let Some(b) = old {
                    olds.push(b);
                }
                if let Some(b) = new {
                    news.push(b);
                }
            }
            let (old_kind, new_kind) = match def.target {
                TargetKind::Node => (TransitionKind::OldNodes, TransitionKind::NewNodes),
                TargetKind::Relationship => (TransitionKind::OldRels, TransitionKind::NewRels),
            };
            if !olds.is_empty() {
                bind(old_kind, Binding::List(olds));
            }
            if !news.is_empty() {
                bind(new_kind, Binding::List(news));
            }
        }
    }
    row
}

/// Evaluates a trigger condition. Returns whether it held and the rows the
/// action starts from. Evaluation errors count as false and are logged.
fn eval_condition(
    def: &TriggerDefinition,
    graph: &Graph,
    clock: &Clock,
    row: Row,
    log: &mut Vec<String>,
) -> (bool, Vec<Row>) {
    match &def.condition {
        None => (true, vec![row]),
        Some(Condition::Expr(e)) => {
            let ctx = EvalCtx { graph, clock };
            match eval_filter(ctx, &row, e) {
                Ok(true) => (true, vec![row]),
                Ok(false) => (false, Vec::new()),
                Err(err) => {
                    log.push(format!(
                        "condition of trigger '{}' failed and counts as false: {err}",
                        def.name
                    ));
                    (false, Vec::new())
                }
            }
        }
        Some(Condition::Pipeline(stages)) => {
            match execute_read(graph, clock, stages, vec![row]) {
                Ok(rows) => {
                    let held = !rows.is_empty();
                    (held, rows)
                }
                Err(err) => {
                    log.push(format!(
                        "condition of trigger '{}' failed and counts as false: {err}",
                        def.name
                    ));
                    (false, Vec::new())
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn engine() -> Engine {
        Engine::new(Clock::System)
    }

    fn run(e: &mut Engine, src: &str) -> StatementOutcome {
        e.run_statement(src).expect("statement should run")
    }

    fn node_count(e: &Engine, label: &str) -> usize {
        e.graph()
            .nodes()
            .filter(|n| n.labels.contains(label))
            .count()
    }

    #[test]
    fn test_after_create_fires_per_node() {
        let mut e = engine();
        e.install_trigger(
            "CREATE TRIGGER mark AFTER CREATE ON 'Person' FOR EACH NODE BEGIN SET NEW.marked = TRUE END",
        )
        .unwrap();
        e.begin().unwrap();
        let out = run(&mut e, "CREATE (:Person {name: 'a'}) CREATE (:Person {name: 'b'})");
        assert_eq!(out.firings.len(), 2);
        assert!(out.firings.iter().all(|f| f.condition && f.depth == 0));
        e.commit().unwrap();
        assert_eq!(
            e.graph()
                .nodes()
                .filter(|n| n.properties.get("marked") == Some(&Value::Boolean(true)))
                .count(),
            2
        );
    }

    #[test]
    fn test_for_all_single_activation_with_list() {
        let mut e = engine();
        e.install_trigger(
            "CREATE TRIGGER tally AFTER CREATE ON 'Person' REFERENCING NEWNODES AS batch FOR ALL NODES \
             BEGIN WITH COUNT(batch) AS size FOREACH (p IN batch | SET p.batchSize = size) END",
        )
        .unwrap();
        e.begin().unwrap();
        let out = run(
            &mut e,
            "CREATE (:Person {name: 'a'}) CREATE (:Person {name: 'b'}) CREATE (:Person {name: 'c'})",
        );
        assert_eq!(out.firings.len(), 1);
        assert_eq!(out.firings[0].seqs.len(), 3);
        e.commit().unwrap();
        assert_eq!(
            e.graph()
                .nodes()
                .filter(|n| n.properties.get("batchSize") == Some(&Value::Integer(3)))
                .count(),
            3
        );
    }

    #[test]
    fn test_cascade_depth_and_order() {
        let mut e = engine();
        e.install_trigger(
            "CREATE TRIGGER a AFTER CREATE ON 'X' FOR EACH NODE BEGIN CREATE (:Y) END",
        )
        .unwrap();
        e.install_trigger(
            "CREATE TRIGGER b AFTER CREATE ON 'Y' FOR EACH NODE BEGIN CREATE (:Z) END",
        )
        .unwrap();
        e.begin().unwrap();
        let out = run(&mut e, "CREATE (:X)");
        let summary: Vec<(String, u32)> = out
            .firings
            .iter()
            .map(|f| (f.trigger.clone(), f.depth))
            .collect();
        assert_eq!(summary, vec![("a".to_string(), 0), ("b".to_string(), 1)]);
        e.commit().unwrap();
        assert_eq!(node_count(&e, "Z"), 1);
    }

    #[test]
    fn test_depth_limit_stops_self_feeding_trigger() {
        let mut e = engine();
        e.set_depth_limit(4);
        e.install_trigger(
            "CREATE TRIGGER loops AFTER CREATE ON 'A' FOR EACH NODE BEGIN CREATE (:A) END",
        )
        .unwrap();
        e.begin().unwrap();
        let err = e.run_statement("CREATE (:A)").unwrap_err();
        match err {
            EngineError::DepthLimitExceeded { limit, stack } => {
                assert_eq!(limit, 4);
                assert_eq!(stack, vec!["loops"; 4]);
            }
            other => panic!("expected depth error, got {other:?}"),
        }
        e.rollback().unwrap();
        assert_eq!(node_count(&e, "A"), 0);
    }

    #[test]
    fn test_before_set_condition_sees_pre_state() {
        let mut e = engine();
        e.install_trigger(
            "CREATE TRIGGER guard BEFORE SET ON 'Item'.'price' \
             REFERENCING OLD AS was, NEW AS will FOR EACH NODE \
             WHEN will.price > was.price * 2 \
             BEGIN SET will.price = was.price * 2 END",
        )
        .unwrap();
        e.begin().unwrap();
        run(&mut e, "CREATE (:Item {name: 'x', price: 10})");
        let out = run(&mut e, "MATCH (i:Item {name: 'x'}) SET i.price = 100");
        // the corrective SET re-activates the guard once, with a false condition
        assert_eq!(out.firings.len(), 2);
        assert_eq!(out.firings[0].time, ActionTime::Before);
        assert!(out.firings[0].condition);
        assert!(!out.firings[1].condition);
        e.commit().unwrap();
        let item = e.graph().nodes().find(|n| n.labels.contains("Item")).unwrap();
        assert_eq!(item.properties.get("price"), Some(&Value::Integer(20)));
    }

    #[test]
    fn test_before_reported_ahead_of_after() {
        let mut e = engine();
        e.install_trigger(
            "CREATE TRIGGER later AFTER CREATE ON 'P' FOR EACH NODE BEGIN SET NEW.after = TRUE END",
        )
        .unwrap();
        e.install_trigger(
            "CREATE TRIGGER sooner BEFORE CREATE ON 'P' FOR EACH NODE BEGIN SET NEW.before = TRUE END",
        )
        .unwrap();
        e.begin().unwrap();
        let out = run(&mut e, "CREATE (:P)");
        let order: Vec<&str> = out.firings.iter().map(|f| f.trigger.as_str()).collect();
        assert_eq!(order, vec!["sooner", "later"]);
        e.commit().unwrap();
    }

    #[test]
    fn test_set_trigger_reads_old_and_new_values() {
        let mut e = engine();
        e.install_trigger(
            "CREATE TRIGGER diff AFTER SET ON 'Item'.'price' \
             REFERENCING OLD AS was FOR EACH NODE \
             WHEN was.price <> NEW.price \
             BEGIN CREATE (:Change {from: was.price, to: NEW.price}) END",
        )
        .unwrap();
        e.begin().unwrap();
        run(&mut e, "CREATE (:Item {price: 5})");
        run(&mut e, "MATCH (i:Item) SET i.price = 9");
        let out = run(&mut e, "MATCH (i:Item) SET i.price = 9");
        assert!(!out.firings[0].condition, "same value must not satisfy <>");
        e.commit().unwrap();
        let change = e.graph().nodes().find(|n| n.labels.contains("Change")).unwrap();
        assert_eq!(change.properties.get("from"), Some(&Value::Integer(5)));
        assert_eq!(change.properties.get("to"), Some(&Value::Integer(9)));
    }

    #[test]
    fn test_delete_trigger_reads_detached_payload() {
        let mut e = engine();
        e.install_trigger(
            "CREATE TRIGGER obituary AFTER DELETE ON 'Person' REFERENCING OLD AS gone FOR EACH NODE \
             BEGIN CREATE (:Tombstone {name: gone.name}) END",
        )
        .unwrap();
        e.begin().unwrap();
        run(&mut e, "CREATE (:Person {name: 'Ada'})");
        run(&mut e, "MATCH (p:Person) DELETE p");
        e.commit().unwrap();
        let stone = e
            .graph()
            .nodes()
            .find(|n| n.labels.contains("Tombstone"))
            .unwrap();
        assert_eq!(stone.properties.get("name"), Some(&Value::Text("Ada".into())));
    }

    #[test]
    fn test_relationship_trigger_on_detach_delete() {
        let mut e = engine();
        e.install_trigger(
            "CREATE TRIGGER unlink AFTER DELETE ON 'Knows' REFERENCING OLD AS r FOR EACH RELATIONSHIP \
             BEGIN CREATE (:Unlinked {weight: r.weight}) END",
        )
        .unwrap();
        e.begin().unwrap();
        run(
            &mut e,
            "CREATE (a:Person {name: 'a'})-[:Knows {weight: 7}]->(b:Person {name: 'b'})",
        );
        run(&mut e, "MATCH (p:Person {name: 'a'}) DETACH DELETE p");
        e.commit().unwrap();
        let n = e.graph().nodes().find(|n| n.labels.contains("Unlinked")).unwrap();
        assert_eq!(n.properties.get("weight"), Some(&Value::Integer(7)));
    }

    #[test]
    fn test_disabled_trigger_does_not_fire() {
        let mut e = engine();
        e.install_trigger(
            "CREATE TRIGGER t AFTER CREATE ON 'P' FOR EACH NODE BEGIN CREATE (:Echo) END",
        )
        .unwrap();
        e.admin(&AdminCommand::Disable("t".into())).unwrap();
        e.begin().unwrap();
        let out = run(&mut e, "CREATE (:P)");
        assert!(out.firings.is_empty());
        e.commit().unwrap();
        assert_eq!(node_count(&e, "Echo"), 0);
        e.admin(&AdminCommand::Enable("t".into())).unwrap();
        e.begin().unwrap();
        run(&mut e, "CREATE (:P)");
        e.commit().unwrap();
        assert_eq!(node_count(&e, "Echo"), 1);
    }

    #[test]
    fn test_show_triggers_lists_in_install_order() {
        let mut e = engine();
        e.install_trigger("CREATE TRIGGER z AFTER CREATE ON 'P' FOR EACH NODE BEGIN CREATE (:X) END")
            .unwrap();
        e.install_trigger("CREATE TRIGGER a AFTER CREATE ON 'P' FOR EACH NODE BEGIN CREATE (:X) END")
            .unwrap();
        let lines = e.admin(&AdminCommand::Show).unwrap();
        assert!(lines[0].starts_with("z [AFTER CREATE ON 'P' FOR EACH NODE] enabled"));
        assert!(lines[1].starts_with("a ["));
        let err = e.admin(&AdminCommand::Drop("missing".into())).unwrap_err();
        assert!(matches!(err, EngineError::UnknownTrigger(_)));
    }

    #[test]
    fn test_oncommit_runs_at_commit_over_whole_transaction() {
        let mut e = engine();
        e.install_trigger(
            "CREATE TRIGGER audit ONCOMMIT CREATE ON 'P' REFERENCING NEWNODES AS fresh FOR ALL NODES \
             BEGIN WITH COUNT(fresh) AS added CREATE (:Audit {added: added}) END",
        )
        .unwrap();
        e.begin().unwrap();
        let out = run(&mut e, "CREATE (:P)");
        assert!(out.firings.is_empty(), "ONCOMMIT must not fire per statement");
        run(&mut e, "CREATE (:P)");
        let commit = e.commit().unwrap();
        assert_eq!(commit.firings.len(), 1);
        assert_eq!(commit.firings[0].seqs.len(), 2);
        let audit = e.graph().nodes().find(|n| n.labels.contains("Audit")).unwrap();
        assert_eq!(audit.properties.get("added"), Some(&Value::Integer(2)));
    }

    #[test]
    fn test_oncommit_failure_aborts_whole_transaction() {
        let mut e = engine();
        e.install_trigger(
            "CREATE TRIGGER boom ONCOMMIT CREATE ON 'P' FOR EACH NODE \
             BEGIN SET NEW.x = 1 / 0 END",
        )
        .unwrap();
        e.begin().unwrap();
        run(&mut e, "CREATE (:P)");
        let err = e.commit().unwrap_err();
        assert!(matches!(err, EngineError::CommitAborted { .. }));
        assert!(!e.in_transaction());
        assert_eq!(node_count(&e, "P"), 0, "the whole transaction must roll back");
    }

    #[test]
    fn test_oncommit_fixpoint_consumes_new_records() {
        let mut e = engine();
        e.set_depth_limit(3);
        e.install_trigger(
            "CREATE TRIGGER chain ONCOMMIT CREATE ON 'Seed' FOR EACH NODE BEGIN CREATE (:Seed) END",
        )
        .unwrap();
        e.begin().unwrap();
        run(&mut e, "CREATE (:Seed)");
        let err = e.commit().unwrap_err();
        match err {
            EngineError::CommitAborted { trigger, cause } => {
                assert_eq!(trigger, "chain");
                assert!(cause.contains("depth"), "cause was: {cause}");
            }
            other => panic!("expected abort, got {other:?}"),
        }
        assert_eq!(node_count(&e, "Seed"), 0);
    }

    #[test]
    fn test_detached_runs_after_commit_and_failure_is_isolated() {
        let mut e = engine();
        e.install_trigger(
            "CREATE TRIGGER note DETACHED CREATE ON 'P' FOR EACH NODE BEGIN CREATE (:Note) END",
        )
        .unwrap();
        e.install_trigger(
            "CREATE TRIGGER broken DETACHED CREATE ON 'P' FOR EACH NODE BEGIN SET NEW.x = 1 / 0 END",
        )
        .unwrap();
        e.begin().unwrap();
        run(&mut e, "CREATE (:P)");
        let commit = e.commit().unwrap();
        assert_eq!(node_count(&e, "P"), 1);
        assert_eq!(node_count(&e, "Note"), 1);
        let detached: Vec<&FiringRecord> = commit
            .firings
            .iter()
            .filter(|f| f.time == ActionTime::Detached)
            .collect();
        assert_eq!(detached.len(), 2);
        let log = e.drain_log();
        assert!(log.iter().any(|l| l.contains("broken")), "log was: {log:?}");
    }

    #[test]
    fn test_pipeline_condition_seeds_action_rows() {
        let mut e = engine();
        e.install_trigger(
            "CREATE TRIGGER ratio ONCOMMIT CREATE ON 'Pat' REFERENCING NEWNODES AS fresh FOR ALL NODES \
             WHEN MATCH (p:Pat) WITH COUNT(fresh) AS added, COUNT(p) AS total WHERE added / total > 0.5 \
             BEGIN CREATE (:Alert {added: added, total: total}) END",
        )
        .unwrap();
        e.begin().unwrap();
        run(&mut e, "CREATE (:Pat) CREATE (:Pat) CREATE (:Pat)");
        e.commit().unwrap();
        let alert = e.graph().nodes().find(|n| n.labels.contains("Alert")).unwrap();
        assert_eq!(alert.properties.get("added"), Some(&Value::Integer(3)));
        assert_eq!(alert.properties.get("total"), Some(&Value::Integer(3)));
        // a smaller follow-up batch stays under the ratio
        e.begin().unwrap();
        run(&mut e, "CREATE (:Pat)");
        let commit = e.commit().unwrap();
        assert_eq!(commit.firings.len(), 1);
        assert!(!commit.firings[0].condition);
        assert_eq!(node_count(&e, "Alert"), 1);
    }

    #[test]
    fn test_registry_snapshot_fixed_at_begin() {
        let mut e = engine();
        e.begin().unwrap();
        e.install_trigger(
            "CREATE TRIGGER late AFTER CREATE ON 'P' FOR EACH NODE BEGIN CREATE (:Echo) END",
        )
        .unwrap();
        run(&mut e, "CREATE (:P)");
        e.commit().unwrap();
        assert_eq!(node_count(&e, "Echo"), 0, "mid-transaction installs wait for the next begin");
        e.begin().unwrap();
        run(&mut e, "CREATE (:P)");
        e.commit().unwrap();
        assert_eq!(node_count(&e, "Echo"), 1);
    }

    #[test]
    fn test_remove_trigger_binds_old_view_and_live_new() {
        let mut e = engine();
        e.install_trigger(
            "CREATE TRIGGER cleanup AFTER REMOVE ON 'Doc'.'draft' REFERENCING OLD AS was FOR EACH NODE \
             WHEN was.draft = TRUE \
             BEGIN SET NEW.published = TRUE END",
        )
        .unwrap();
        e.begin().unwrap();
        run(&mut e, "CREATE (:Doc {title: 't', draft: TRUE})");
        run(&mut e, "MATCH (d:Doc) REMOVE d.draft");
        e.commit().unwrap();
        let doc = e.graph().nodes().find(|n| n.labels.contains("Doc")).unwrap();
        assert!(!doc.properties.contains_key("draft"));
        assert_eq!(doc.properties.get("published"), Some(&Value::Boolean(true)));
    }

    #[test]
    fn test_run_read_rejects_mutation_and_reads_rows() {
        let mut e = engine();
        e.begin().unwrap();
        run(&mut e, "CREATE (:P {x: 1}) CREATE (:P {x: 2})");
        e.commit().unwrap();
        let rows = e.run_read("MATCH (p:P) RETURN p.x AS x").unwrap();
        assert_eq!(rows.len(), 2);
        assert!(e.run_read("MATCH (p:P) DELETE p").is_err());
    }
}
