//! Pipeline execution over binding rows.
//!
//! A statement is a list of stages threaded over a row set. `execute_read`
//! accepts only non-mutating stages and runs against a plain graph;
//! `execute_write` additionally handles CREATE, DELETE, SET, REMOVE and
//! FOREACH against a transactional store.

use std::collections::BTreeSet;

use crate::ast::{
    print_expr, Expr, NodePattern, PathPattern, RelPattern, RemoveItem, SetItem, Stage, WithItem,
};
use crate::ast::Direction;
use crate::error::EvalError;
use crate::graph::{Graph, ItemId, NodeId};
use crate::store::{GraphStore, LabelOp, PropOp};
use crate::value::{Clock, Value};

use super::expr::{eval_expr, eval_filter, EvalCtx};
use super::pattern::match_patterns;
use super::{bindings_equal, cmp_bindings, cmp_rows, Binding, Row};

/// Runs a read-only stage list; any mutating stage is an error.
pub fn execute_read(
    graph: &Graph,
    clock: &Clock,
    stages: &[Stage],
    rows: Vec<Row>,
) -> Result<Vec<Row>, EvalError> {
    let mut rows = rows;
    for stage in stages {
        rows = read_stage(graph, clock, stage, rows)?;
    }
    Ok(rows)
}

/// Runs a full stage list, applying mutations through the store.
pub fn execute_write(
    store: &mut GraphStore,
    clock: &Clock,
    stages: &[Stage],
    rows: Vec<Row>,
) -> Result<Vec<Row>, EvalError> {
    let mut rows = rows;
    for stage in stages {
        rows = write_stage(store, clock, stage, rows)?;
    }
    Ok(rows)
}

fn read_stage(
    graph: &Graph,
    clock: &Clock,
    stage: &Stage,
    rows: Vec<Row>,
) -> Result<Vec<Row>, EvalError> {
    let ctx = EvalCtx { graph, clock };
    match stage {
        Stage::Match(patterns) => stage_match(ctx, patterns, rows),
        Stage::Where(expr) => stage_where(ctx, expr, rows),
        Stage::With(items) => stage_with(ctx, items, rows),
        Stage::OrderLimit { keys, limit } => stage_order_limit(ctx, keys, *limit, rows),
        Stage::Return(items) => stage_return(ctx, items, rows),
        Stage::Then(body) => {
            if rows.is_empty() {
                Ok(rows)
            } else {
                execute_read(graph, clock, body, rows)
            }
        }
        Stage::Create(_) => Err(EvalError::MutationInReadOnly("CREATE")),
        Stage::Delete { .. } => Err(EvalError::MutationInReadOnly("DELETE")),
        Stage::SetItems(_) => Err(EvalError::MutationInReadOnly("SET")),
        Stage::RemoveItems(_) => Err(EvalError::MutationInReadOnly("REMOVE")),
        Stage::Foreach { .. } => Err(EvalError::MutationInReadOnly("FOREACH")),
    }
}

fn write_stage(
    store: &mut GraphStore,
    clock: &Clock,
    stage: &Stage,
    rows: Vec<Row>,
) -> Result<Vec<Row>, EvalError> {
    match stage {
        Stage::Match(_)
        | Stage::Where(_)
        | Stage::With(_)
        | Stage::OrderLimit { .. }
        | Stage::Return(_) => read_stage(store.graph(), clock, stage, rows),
        Stage::Create(patterns) => stage_create(store, clock, patterns, rows),
        Stage::Delete { detach, vars } => stage_delete(store, *detach, vars, rows),
        Stage::SetItems(items) => stage_set(store, clock, items, rows),
        Stage::RemoveItems(items) => stage_remove(store, items, rows),
        Stage::Foreach { var, list, body } => stage_foreach(store, clock, var, list, body, rows),
        Stage::Then(body) => {
            if rows.is_empty() {
                Ok(rows)
            } else {
                execute_write(store, clock, body, rows)
            }
        }
    }
}

fn stage_match(
    ctx: EvalCtx<'_>,
    patterns: &[PathPattern],
    rows: Vec<Row>,
) -> Result<Vec<Row>, EvalError> {
    let mut out = Vec::new();
    for row in &rows {
        out.extend(match_patterns(ctx, patterns, row)?);
    }
    Ok(out)
}

fn stage_where(ctx: EvalCtx<'_>, expr: &Expr, rows: Vec<Row>) -> Result<Vec<Row>, EvalError> {
    let mut out = Vec::new();
    for row in rows {
        if eval_filter(ctx, &row, expr)? {
            out.push(row);
        }
    }
    Ok(out)
}

/// Variables consumed by COUNT aggregates in a WITH item list.
/// A list binding counts element-wise; anything else counts as itself.
fn counted_elements(b: &Binding) -> Vec<&Binding> {
    match b {
        Binding::List(items) => items.iter().collect(),
        other => vec![other],
    }
}

fn has_aggregate(items: &[WithItem]) -> bool {
    items
        .iter()
        .any(|i| matches!(i.expr, Expr::Count(_) | Expr::CountStar))
}

fn item_name(item: &WithItem) -> String {
    match (&item.alias, &item.expr) {
        (Some(a), _) => a.clone(),
        (None, Expr::Var(v)) => v.clone(),
        (None, e) => print_expr(e),
    }
}

fn stage_with(
    ctx: EvalCtx<'_>,
    items: &[WithItem],
    rows: Vec<Row>,
) -> Result<Vec<Row>, EvalError> {
    if has_aggregate(items) {
        return stage_with_aggregate(ctx, items, rows);
    }
    // Without aggregation WITH only introduces names; prior bindings stay
    // in scope so later clauses can keep referring to them.
    let mut out = Vec::new();
    for row in rows {
        let mut next = row.clone();
        for item in items {
            let name = item_name(item);
            match &item.expr {
                Expr::Var(v) => {
                    let b = row
                        .get(v)
                        .ok_or_else(|| EvalError::UnboundVariable(v.clone()))?;
                    next.set(name, b.clone());
                }
                e => {
                    if item.alias.is_none() {
                        return Err(EvalError::AliasRequired(print_expr(e)));
                    }
                    let v = eval_expr(ctx, &row, e)?;
                    next.set(name, Binding::Value(v));
                }
            }
        }
        out.push(next);
    }
    Ok(out)
}

/// Grouped WITH: non-aggregate items form the group key, COUNT items fold,
/// and every variable the projection consumes is re-exposed as a sorted
/// distinct list so later stages can still reach the group's members.
fn stage_with_aggregate(
    ctx: EvalCtx<'_>,
    items: &[WithItem],
    rows: Vec<Row>,
) -> Result<Vec<Row>, EvalError> {
    let mut consumed: BTreeSet<String> = BTreeSet::new();
    for row in &rows {
        consumed.extend(row.names().cloned());
    }
    for item in items {
        consumed.remove(&item_name(item));
    }
    struct Group {
        key: Vec<Binding>,
        count_star: i64,
        distinct_bindings: Vec<Vec<Binding>>,
        distinct_values: Vec<BTreeSet<String>>,
        member_bindings: Vec<Vec<Binding>>,
    }
    let key_items: Vec<&WithItem> = items
        .iter()
        .filter(|i| !matches!(i.expr, Expr::Count(_) | Expr::CountStar))
        .collect();
    let agg_items: Vec<&WithItem> = items
        .iter()
        .filter(|i| matches!(i.expr, Expr::Count(_) | Expr::CountStar))
        .collect();
    for item in &agg_items {
        if item.alias.is_none() {
            return Err(EvalError::AliasRequired(print_expr(&item.expr)));
        }
    }
    let consumed_list: Vec<&String> = consumed.iter().collect();
    let mut groups: Vec<Group> = Vec::new();
    for row in &rows {
        let mut key = Vec::new();
        for item in &key_items {
            match &item.expr {
                Expr::Var(v) => key.push(
                    row.get(v)
                        .cloned()
                        .ok_or_else(|| EvalError::UnboundVariable(v.clone()))?,
                ),
                e => key.push(Binding::Value(eval_expr(ctx, row, e)?)),
            }
        }
        let pos = groups.binary_search_by(|g| {
            let mut ord = std::cmp::Ordering::Equal;
            for (a, b) in g.key.iter().zip(&key) {
                ord = cmp_bindings(a, b);
                if ord != std::cmp::Ordering::Equal {
                    break;
                }
            }
            ord
        });
        let gi = match pos {
            Ok(i) => i,
            Err(i) => {
                groups.insert(
                    i,
                    Group {
                        key: key.clone(),
                        count_star: 0,
                        distinct_bindings: vec![Vec::new(); agg_items.len()],
                        distinct_values: vec![BTreeSet::new(); agg_items.len()],
                        member_bindings: vec![Vec::new(); consumed_list.len()],
                    },
                );
                i
            }
        };
        let group = &mut groups[gi];
        group.count_star += 1;
        for (ai, item) in agg_items.iter().enumerate() {
            if let Expr::Count(inner) = &item.expr {
                match &**inner {
                    Expr::Var(v) => {
                        if let Some(b) = row.get(v) {
                            for e in counted_elements(b) {
                                if !group.distinct_bindings[ai]
                                    .iter()
                                    .any(|x| bindings_equal(x, e))
                                {
                                    group.distinct_bindings[ai].push(e.clone());
                                }
                            }
                        }
                    }
                    e => {
                        let v = eval_expr(ctx, row, e)?;
                        if !v.is_null() {
                            group.distinct_values[ai].insert(v.to_string());
                        }
                    }
                }
            }
        }
        for (ci, var) in consumed_list.iter().enumerate() {
            if let Some(b) = row.get(var) {
                for e in counted_elements(b) {
                    if !group.member_bindings[ci]
                        .iter()
                        .any(|x| bindings_equal(x, e))
                    {
                        group.member_bindings[ci].push(e.clone());
                    }
                }
            }
        }
    }
    let mut out = Vec::new();
    for group in groups {
        let mut next = Row::new();
        for (ki, item) in key_items.iter().enumerate() {
            next.set(item_name(item), group.key[ki].clone());
        }
        for (ai, item) in agg_items.iter().enumerate() {
            let count = match &item.expr {
                Expr::CountStar => group.count_star,
                Expr::Count(inner) => match &**inner {
                    Expr::Var(_) => group.distinct_bindings[ai].len() as i64,
                    _ => group.distinct_values[ai].len() as i64,
                },
                _ => unreachable!(),
            };
            next.set(item_name(item), Binding::Value(Value::Integer(count)));
        }
        for (ci, var) in consumed_list.iter().enumerate() {
            if next.contains(var) {
                continue;
            }
            let mut members = group.member_bindings[ci].clone();
            members.sort_by(cmp_bindings);
            next.set((*var).clone(), Binding::List(members));
        }
        out.push(next);
    }
    Ok(out)
}

fn stage_order_limit(
    ctx: EvalCtx<'_>,
    keys: &[(Expr, bool)],
    limit: Option<i64>,
    rows: Vec<Row>,
) -> Result<Vec<Row>, EvalError> {
    let mut rows = rows;
    if !keys.is_empty() {
        let mut keyed: Vec<(Vec<Value>, Row)> = Vec::new();
        for row in rows {
            let mut k = Vec::new();
            for (expr, _) in keys {
                k.push(eval_expr(ctx, &row, expr)?);
            }
            keyed.push((k, row));
        }
        keyed.sort_by(|(ka, ra), (kb, rb)| {
            for (i, (_, asc)) in keys.iter().enumerate() {
                let mut ord = ka[i].total_order(&kb[i]);
                if !*asc {
                    ord = ord.reverse();
                }
                if ord != std::cmp::Ordering::Equal {
                    return ord;
                }
            }
            cmp_rows(ra, rb)
        });
        rows = keyed.into_iter().map(|(_, r)| r).collect();
    }
    if let Some(n) = limit {
        let n = n.max(0) as usize;
        rows.truncate(n);
    }
    Ok(rows)
}

fn stage_return(
    ctx: EvalCtx<'_>,
    items: &[WithItem],
    rows: Vec<Row>,
) -> Result<Vec<Row>, EvalError> {
    if has_aggregate(items) {
        return stage_with_aggregate(ctx, items, rows);
    }
    let mut out = Vec::new();
    for row in rows {
        let mut next = Row::new();
        for item in items {
            let name = item_name(item);
            match &item.expr {
                Expr::Var(v) => {
                    let b = row
                        .get(v)
                        .ok_or_else(|| EvalError::UnboundVariable(v.clone()))?;
                    next.set(name, b.clone());
                }
                e => {
                    let v = eval_expr(ctx, &row, e)?;
                    next.set(name, Binding::Value(v));
                }
            }
        }
        out.push(next);
    }
    Ok(out)
}

fn stage_create(
    store: &mut GraphStore,
    clock: &Clock,
    patterns: &[PathPattern],
    rows: Vec<Row>,
) -> Result<Vec<Row>, EvalError> {
    let mut out = Vec::new();
    for row in rows {
        let mut row = row;
        for path in patterns {
            let mut current = create_node_position(store, clock, &path.start, &mut row)?;
            for (rel_pattern, node_pattern) in &path.hops {
                let next = create_node_position(store, clock, node_pattern, &mut row)?;
                create_rel_position(store, clock, rel_pattern, current, next, &mut row)?;
                current = next;
            }
        }
        out.push(row);
    }
    Ok(out)
}

/// Resolves one node position of a CREATE pattern: reuse a bound variable,
/// match an existing node when the pattern carries properties, otherwise
/// create a fresh node.
fn create_node_position(
    store: &mut GraphStore,
    clock: &Clock,
    np: &NodePattern,
    row: &mut Row,
) -> Result<NodeId, EvalError> {
    if let Some(v) = &np.var {
        if let Some(b) = row.get(v) {
            if !np.labels.is_empty() || !np.props.is_empty() {
                return Err(EvalError::TypeMismatch {
                    op: "CREATE",
                    left: "bound variable",
                    right: "pattern with labels or properties",
                });
            }
            return match b {
                Binding::Node(id) | Binding::NodeView { id, .. } => Ok(*id),
                _ => Err(EvalError::NotAnItem(v.clone())),
            };
        }
    }
    let mut props = std::collections::BTreeMap::new();
    {
        let ctx = EvalCtx {
            graph: store.graph(),
            clock,
        };
        for (key, expr) in &np.props {
            props.insert(key.clone(), eval_expr(ctx, row, expr)?);
        }
    }
    if !props.is_empty() {
        let found = store.graph().nodes().find(|n| {
            np.labels.iter().all(|l| n.labels.contains(l))
                && props.iter().all(|(k, v)| {
                    n.properties.get(k).map(|a| a.loose_eq(v)).unwrap_or(false)
                })
        });
        if let Some(node) = found {
            let id = node.id;
            if let Some(v) = &np.var {
                row.set(v.clone(), Binding::Node(id));
            }
            return Ok(id);
        }
    }
    let id = store.create_node(np.labels.iter().cloned().collect(), props)?;
    if let Some(v) = &np.var {
        row.set(v.clone(), Binding::Node(id));
    }
    Ok(id)
}

fn create_rel_position(
    store: &mut GraphStore,
    clock: &Clock,
    rp: &RelPattern,
    left: NodeId,
    right: NodeId,
    row: &mut Row,
) -> Result<(), EvalError> {
    if let Some(v) = &rp.var {
        if row.contains(v) {
            return Err(EvalError::TypeMismatch {
                op: "CREATE",
                left: "bound variable",
                right: "relationship pattern",
            });
        }
    }
    let rel_type = rp.rel_type.clone().ok_or(EvalError::UntypedCreate)?;
    let (source, target) = match rp.direction {
        Direction::Out => (left, right),
        Direction::In => (right, left),
        Direction::Undirected => return Err(EvalError::UndirectedCreate),
    };
    let mut props = std::collections::BTreeMap::new();
    {
        let ctx = EvalCtx {
            graph: store.graph(),
            clock,
        };
        for (key, expr) in &rp.props {
            props.insert(key.clone(), eval_expr(ctx, row, expr)?);
        }
    }
    let id = store.create_relationship(rel_type, source, target, props)?;
    if let Some(v) = &rp.var {
        row.set(v.clone(), Binding::Rel(id));
    }
    Ok(())
}

fn stage_delete(
    store: &mut GraphStore,
    detach: bool,
    vars: &[String],
    rows: Vec<Row>,
) -> Result<Vec<Row>, EvalError> {
    for row in &rows {
        for var in vars {
            let binding = row
                .get(var)
                .ok_or_else(|| EvalError::UnboundVariable(var.clone()))?;
            let items: Vec<ItemId> = match binding {
                Binding::List(xs) => {
                    let mut out = Vec::new();
                    for x in xs {
                        out.push(delete_target(var, x)?);
                    }
                    out
                }
                b => vec![delete_target(var, b)?],
            };
            for item in items {
                let gone = match item {
                    ItemId::Node(id) => store.graph().node(id).is_none(),
                    ItemId::Rel(id) => store.graph().rel(id).is_none(),
                };
                if gone {
                    continue;
                }
                store.delete_item(item, detach)?;
            }
        }
    }
    Ok(rows)
}

fn delete_target(var: &str, b: &Binding) -> Result<ItemId, EvalError> {
    match b {
        Binding::Node(id) | Binding::NodeView { id, .. } => Ok(ItemId::Node(*id)),
        Binding::Rel(id) | Binding::RelView { id, .. } => Ok(ItemId::Rel(*id)),
        Binding::DetachedNode(_) | Binding::DetachedRel(_) => {
            Err(EvalError::NotDeletable(var.to_string()))
        }
        Binding::Value(_) | Binding::List(_) => Err(EvalError::NotAnItem(var.to_string())),
    }
}

fn live_target(var: &str, b: &Binding) -> Result<ItemId, EvalError> {
    match b {
        Binding::Node(id) | Binding::NodeView { id, .. } => Ok(ItemId::Node(*id)),
        Binding::Rel(id) | Binding::RelView { id, .. } => Ok(ItemId::Rel(*id)),
        _ => Err(EvalError::NotAnItem(var.to_string())),
    }
}

fn label_target(var: &str, b: &Binding) -> Result<NodeId, EvalError> {
    match live_target(var, b)? {
        ItemId::Node(id) => Ok(id),
        ItemId::Rel(_) => Err(EvalError::TypeMismatch {
            op: "label update",
            left: "relationship",
            right: "label",
        }),
    }
}

fn stage_set(
    store: &mut GraphStore,
    clock: &Clock,
    items: &[SetItem],
    rows: Vec<Row>,
) -> Result<Vec<Row>, EvalError> {
    for row in &rows {
        for item in items {
            match item {
                SetItem::Property { var, key, value } => {
                    let binding = row
                        .get(var)
                        .ok_or_else(|| EvalError::UnboundVariable(var.clone()))?;
                    let target = live_target(var, binding)?;
                    let v = {
                        let ctx = EvalCtx {
                            graph: store.graph(),
                            clock,
                        };
                        eval_expr(ctx, row, value)?
                    };
                    store.mutate_property(target, PropOp::Set, key.clone(), Some(v))?;
                }
                SetItem::Label { var, label } => {
                    let binding = row
                        .get(var)
                        .ok_or_else(|| EvalError::UnboundVariable(var.clone()))?;
                    let node = label_target(var, binding)?;
                    store.mutate_label(node, LabelOp::Add, label.clone())?;
                }
            }
        }
    }
    Ok(rows)
}

fn stage_remove(
    store: &mut GraphStore,
    items: &[RemoveItem],
    rows: Vec<Row>,
) -> Result<Vec<Row>, EvalError> {
    for row in &rows {
        for item in items {
            match item {
                RemoveItem::Property { var, key } => {
                    let binding = row
                        .get(var)
                        .ok_or_else(|| EvalError::UnboundVariable(var.clone()))?;
                    let target = live_target(var, binding)?;
                    store.mutate_property(target, PropOp::Remove, key.clone(), None)?;
                }
                RemoveItem::Label { var, label } => {
                    let binding = row
                        .get(var)
                        .ok_or_else(|| EvalError::UnboundVariable(var.clone()))?;
                    let node = label_target(var, binding)?;
                    store.mutate_label(node, LabelOp::Remove, label.clone())?;
                }
            }
        }
    }
    Ok(rows)
}

fn stage_foreach(
    store: &mut GraphStore,
    clock: &Clock,
    var: &str,
    list: &Expr,
    body: &[Stage],
    rows: Vec<Row>,
) -> Result<Vec<Row>, EvalError> {
    for row in &rows {
        let elements: Vec<Binding> = match list {
            Expr::Var(name) => {
                let binding = row
                    .get(name)
                    .ok_or_else(|| EvalError::UnboundVariable(name.clone()))?;
                match binding {
                    Binding::List(xs) => xs.clone(),
                    Binding::Value(Value::TextList(xs)) => xs
                        .iter()
                        .map(|s| Binding::Value(Value::Text(s.clone())))
                        .collect(),
                    _ => return Err(EvalError::NotAList(name.clone())),
                }
            }
            e => {
                let ctx = EvalCtx {
                    graph: store.graph(),
                    clock,
                };
                match eval_expr(ctx, row, e)? {
                    Value::TextList(xs) => xs
                        .into_iter()
                        .map(|s| Binding::Value(Value::Text(s)))
                        .collect(),
                    _ => return Err(EvalError::NotAList(print_expr(e))),
                }
            }
        };
        for element in elements {
            let mut inner = row.clone();
            inner.set(var.to_string(), element);
            execute_write(store, clock, body, vec![inner])?;
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_statement;

    fn person(name: &str, age: i64) -> std::collections::BTreeMap<String, Value> {
        std::collections::BTreeMap::from([
            ("name".to_string(), Value::Text(name.into())),
            ("age".to_string(), Value::Integer(age)),
        ])
    }

    fn store_with_people() -> GraphStore {
        let mut store = GraphStore::new();
        store.begin().unwrap();
        let labels: BTreeSet<String> = ["Person".to_string()].into();
        let a = store.create_node(labels.clone(), person("Ada", 36)).unwrap();
        let b = store.create_node(labels.clone(), person("Bram", 41)).unwrap();
        let c = store.create_node(labels, person("Cleo", 29)).unwrap();
        store
            .create_relationship("Knows", a, b, Default::default())
            .unwrap();
        store
            .create_relationship("Knows", b, c, Default::default())
            .unwrap();
        store.commit().unwrap();
        store
    }

    fn run_read(store: &GraphStore, src: &str) -> Vec<Row> {
        let stmt = parse_statement(src).unwrap();
        execute_read(store.graph(), &Clock::System, &stmt.stages, vec![Row::new()]).unwrap()
    }

    fn run_write(store: &mut GraphStore, src: &str) -> Vec<Row> {
        let stmt = parse_statement(src).unwrap();
        store.begin().unwrap();
        let rows =
            execute_write(store, &Clock::System, &stmt.stages, vec![Row::new()]).unwrap();
        store.commit().unwrap();
        rows
    }

    #[test]
    fn test_match_where_filters_rows() {
        let store = store_with_people();
        let rows = run_read(&store, "MATCH (p:Person) WHERE p.age > 30 RETURN p.name AS n");
        let names: Vec<String> = rows
            .iter()
            .map(|r| match r.get("n").unwrap() {
                Binding::Value(Value::Text(s)) => s.clone(),
                _ => panic!("expected text"),
            })
            .collect();
        assert_eq!(names, vec!["Ada".to_string(), "Bram".to_string()]);
    }

    #[test]
    fn test_relationship_uniqueness_within_stage() {
        let store = store_with_people();
        let rows = run_read(
            &store,
            "MATCH (a:Person)-[:Knows]-(b:Person)-[:Knows]-(c:Person) RETURN a.name AS x, c.name AS z",
        );
        for row in &rows {
            let x = row.get("x").unwrap().render();
            let z = row.get("z").unwrap().render();
            assert_ne!(x, z, "a two-hop walk must not reuse the single edge");
        }
        assert_eq!(rows.len(), 2);
    }

    #[test]
    fn test_separate_match_stages_reset_uniqueness() {
        let store = store_with_people();
        let one_stage = run_read(
            &store,
            "MATCH (a:Person {name: 'Ada'})-[r:Knows]-(), MATCH (b:Person {name: 'Bram'})-[s:Knows]-() RETURN a, b",
        );
        assert_eq!(one_stage.len(), 2);
    }

    #[test]
    fn test_count_groups_and_consumed_variable_lists() {
        let store = store_with_people();
        let rows = run_read(
            &store,
            "MATCH (p:Person) WITH COUNT(p) AS total WHERE total = 3 RETURN total",
        );
        assert_eq!(rows.len(), 1);
        let stmt =
            parse_statement("MATCH (p:Person) WITH COUNT(p) AS total FOREACH (x IN p | SET x.seen = total)")
                .unwrap();
        let mut store = store_with_people();
        store.begin().unwrap();
        execute_write(&mut store, &Clock::System, &stmt.stages, vec![Row::new()]).unwrap();
        store.commit().unwrap();
        let seen = store
            .graph()
            .nodes()
            .filter(|n| n.properties.get("seen") == Some(&Value::Integer(3)))
            .count();
        assert_eq!(seen, 3);
    }

    #[test]
    fn test_with_on_empty_input_stays_empty() {
        let store = store_with_people();
        let rows = run_read(
            &store,
            "MATCH (p:Missing) WITH COUNT(p) AS total RETURN total",
        );
        assert!(rows.is_empty());
    }

    #[test]
    fn test_order_by_and_limit() {
        let store = store_with_people();
        let rows = run_read(
            &store,
            "MATCH (p:Person) WITH p.age AS a ORDER BY a DESC LIMIT 2 RETURN a",
        );
        let ages: Vec<i64> = rows
            .iter()
            .map(|r| match r.get("a").unwrap() {
                Binding::Value(Value::Integer(n)) => *n,
                _ => panic!("expected integer"),
            })
            .collect();
        assert_eq!(ages, vec![41, 36]);
    }

    #[test]
    fn test_create_matches_existing_propertied_node() {
        let mut store = store_with_people();
        run_write(
            &mut store,
            "CREATE (p:Person {name: 'Ada'})-[:Likes]->(q:Person {name: 'Dana'})",
        );
        assert_eq!(
            store
                .graph()
                .nodes()
                .filter(|n| n.properties.get("name") == Some(&Value::Text("Ada".into())))
                .count(),
            1,
            "existing Ada must be reused"
        );
        assert_eq!(store.graph().node_count(), 4);
        assert_eq!(store.graph().rel_count(), 3);
    }

    #[test]
    fn test_delete_is_idempotent_across_rows() {
        let mut store = store_with_people();
        run_write(
            &mut store,
            "MATCH (a:Person {name: 'Bram'})-[:Knows]-() DETACH DELETE a",
        );
        assert_eq!(store.graph().node_count(), 2);
        assert_eq!(store.graph().rel_count(), 0);
    }

    #[test]
    fn test_set_and_remove_labels_and_properties() {
        let mut store = store_with_people();
        run_write(
            &mut store,
            "MATCH (p:Person {name: 'Cleo'}) SET p:Vip, p.tier = 'gold'",
        );
        run_write(&mut store, "MATCH (p:Vip) REMOVE p.age");
        let cleo = store
            .graph()
            .nodes()
            .find(|n| n.properties.get("name") == Some(&Value::Text("Cleo".into())))
            .unwrap();
        assert!(cleo.labels.contains("Vip"));
        assert_eq!(cleo.properties.get("tier"), Some(&Value::Text("gold".into())));
        assert!(!cleo.properties.contains_key("age"));
    }

    #[test]
    fn test_then_block_runs_only_with_rows() {
        let mut store = store_with_people();
        run_write(
            &mut store,
            "MATCH (p:Person {name: 'Ada'}) THEN BEGIN SET p.flag = TRUE END",
        );
        run_write(
            &mut store,
            "MATCH (p:Person {name: 'Nobody'}) THEN BEGIN CREATE (:ShouldNotExist) END",
        );
        assert!(store
            .graph()
            .nodes()
            .any(|n| n.properties.get("flag") == Some(&Value::Boolean(true))));
        assert!(!store.graph().nodes().any(|n| n.labels.contains("ShouldNotExist")));
    }

    #[test]
    fn test_exists_block_subquery() {
        let store = store_with_people();
        let rows = run_read(
            &store,
            "MATCH (p:Person) WHERE EXISTS { MATCH (p)-[:Knows]->(q) WHERE q.age < 30 } RETURN p.name AS n",
        );
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].get("n").unwrap().render(), "'Bram'");
    }

    #[test]
    fn test_read_pipeline_rejects_mutation() {
        let store = store_with_people();
        let stmt = parse_statement("MATCH (p:Person) SET p.x = 1").unwrap();
        let err = execute_read(
            store.graph(),
            &Clock::System,
            &stmt.stages,
            vec![Row::new()],
        )
        .unwrap_err();
        assert!(matches!(err, EvalError::MutationInReadOnly("SET")));
    }

    #[test]
    fn test_create_direction_in_swaps_endpoints() {
        let mut store = store_with_people();
        run_write(
            &mut store,
            "MATCH (a:Person {name: 'Ada'}) CREATE (a)<-[:Admires]-(f:Fan {name: 'Zed'})",
        );
        let rel = store
            .graph()
            .rels()
            .find(|r| r.rel_type == "Admires")
            .unwrap();
        let source = store.graph().node(rel.source).unwrap();
        assert_eq!(source.properties.get("name"), Some(&Value::Text("Zed".into())));
    }

    #[test]
    fn test_undirected_or_untyped_create_rejected() {
        let mut store = store_with_people();
        store.begin().unwrap();
        let stmt = parse_statement("CREATE (:A)-[:T]-(:B)").unwrap();
        let err =
            execute_write(&mut store, &Clock::System, &stmt.stages, vec![Row::new()]).unwrap_err();
        assert!(matches!(err, EvalError::UndirectedCreate));
        let stmt = parse_statement("CREATE (:A)-[]->(:B)").unwrap();
        let err =
            execute_write(&mut store, &Clock::System, &stmt.stages, vec![Row::new()]).unwrap_err();
        assert!(matches!(err, EvalError::UntypedCreate));
        store.rollback().unwrap();
    }

    #[test]
    fn test_plain_with_keeps_prior_bindings_in_scope() {
        let mut store = store_with_people();
        run_write(
            &mut store,
            "MATCH (a:Person {name: 'Ada'})-[k:Knows]->(b:Person) \
             WITH k THEN BEGIN DELETE k CREATE (a)-[:Met {peer: b.name}]->(b) END",
        );
        let met = store.graph().rels().find(|r| r.rel_type == "Met").unwrap();
        assert_eq!(met.properties.get("peer"), Some(&Value::Text("Bram".into())));
        assert!(!store
            .graph()
            .rels()
            .any(|r| r.rel_type == "Knows" && r.properties.get("peer").is_none() && {
                let src = store.graph().node(r.source).unwrap();
                src.properties.get("name") == Some(&Value::Text("Ada".into()))
            }));
    }

    #[test]
    fn test_aggregate_with_regroups_unlisted_variables() {
        let store = store_with_people();
        let rows = run_read(
            &store,
            "MATCH (a:Person)-[:Knows]->(b:Person) WITH COUNT(b) AS fanout RETURN fanout, a",
        );
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].get("fanout").unwrap().render(), "2");
        match rows[0].get("a").unwrap() {
            Binding::List(items) => assert_eq!(items.len(), 2, "both sources regrouped"),
            other => panic!("expected grouped list, got {other:?}"),
        }
    }

    #[test]
    fn test_property_access_through_singleton_group() {
        let store = store_with_people();
        let rows = run_read(
            &store,
            "MATCH (p:Person {name: 'Ada'}) WITH COUNT(*) AS c WHERE p.age > 30 RETURN c",
        );
        assert_eq!(rows.len(), 1);
        let rows = run_read(
            &store,
            "MATCH (p:Person {name: 'Cleo'}) WITH COUNT(*) AS c WHERE p.age > 30 RETURN c",
        );
        assert!(rows.is_empty());
    }
}
