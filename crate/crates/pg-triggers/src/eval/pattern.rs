//! Homomorphic pattern matching with backtracking.
//!
//! All patterns passed to [`match_patterns`] share one relationship
//! uniqueness scope: a relationship is bound at most once per result row.
//! Node candidates come from (in priority order) the pattern variable's
//! existing binding, label-position names bound in the row (transition
//! variables like NEWNODES), or a full scan. Iteration follows id order, so
//! results are deterministic.

use std::collections::BTreeSet;

use crate::ast::{NodePattern, PathPattern, RelPattern, Direction};
use crate::error::EvalError;
use crate::graph::{NodeId, RelId};
use crate::value::Value;

use super::expr::{eval_expr, EvalCtx};
use super::{cmp_rows, Binding, Row};

pub fn match_patterns(
    ctx: EvalCtx<'_>,
    patterns: &[PathPattern],
    seed: &Row,
) -> Result<Vec<Row>, EvalError> {
    let mut out = Vec::new();
    let mut used = BTreeSet::new();
    match_pattern_at(ctx, patterns, 0, seed.clone(), &mut used, &mut out)?;
    out.sort_by(cmp_rows);
    Ok(out)
}

fn match_pattern_at(
    ctx: EvalCtx<'_>,
    patterns: &[PathPattern],
    pi: usize,
    row: Row,
    used: &mut BTreeSet<RelId>,
    out: &mut Vec<Row>,
) -> Result<(), EvalError> {
    let Some(path) = patterns.get(pi) else {
        out.push(row);
        return Ok(());
    };
    for (id, row2) in node_candidates(ctx, &path.start, &row, None)? {
        match_hop(ctx, patterns, pi, 0, id, row2, used, out)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn match_hop(
    ctx: EvalCtx<'_>,
    patterns: &[PathPattern],
    pi: usize,
    hi: usize,
    current: NodeId,
    row: Row,
    used: &mut BTreeSet<RelId>,
    out: &mut Vec<Row>,
) -> Result<(), EvalError> {
    let path = &patterns[pi];
    let Some((rel_pattern, node_pattern)) = path.hops.get(hi) else {
        return match_pattern_at(ctx, patterns, pi + 1, row, used, out);
    };
    for (rel_id, other, rel_binding) in rel_candidates(ctx, rel_pattern, current, &row)? {
        if used.contains(&rel_id) {
            continue;
        }
        let mut row2 = row.clone();
        if let Some(v) = &rel_pattern.var {
            if !row2.contains(v) {
                row2.set(v.clone(), rel_binding);
            }
        }
        for (id, row3) in node_candidates(ctx, node_pattern, &row2, Some(other))? {
            used.insert(rel_id);
            match_hop(ctx, patterns, pi, hi + 1, id, row3, used, out)?;
            used.remove(&rel_id);
        }
    }
    Ok(())
}

fn binding_node_entries(b: &Binding) -> Vec<(NodeId, Binding)> {
    match b {
        Binding::Node(id) | Binding::NodeView { id, .. } => vec![(*id, b.clone())],
        Binding::List(xs) => xs.iter().flat_map(binding_node_entries).collect(),
        _ => Vec::new(),
    }
}

fn binding_rel_ids(b: &Binding) -> Vec<(RelId, Binding)> {
    match b {
        Binding::Rel(id) | Binding::RelView { id, .. } => vec![(*id, b.clone())],
        Binding::List(xs) => xs.iter().flat_map(binding_rel_ids).collect(),
        _ => Vec::new(),
    }
}

/// Candidate node ids (with the binding the pattern variable should take)
/// satisfying a node pattern. `forced` pins the candidate to one id, used
/// when the node position is already determined by a relationship endpoint.
fn node_candidates(
    ctx: EvalCtx<'_>,
    np: &NodePattern,
    row: &Row,
    forced: Option<NodeId>,
) -> Result<Vec<(NodeId, Row)>, EvalError> {
    let mut real_labels: Vec<&str> = Vec::new();
    let mut ref_sets: Vec<Vec<(NodeId, Binding)>> = Vec::new();
    for label in &np.labels {
        match row.get(label) {
            Some(b) => ref_sets.push(binding_node_entries(b)),
            None => real_labels.push(label),
        }
    }
    let bound_var = np.var.as_ref().and_then(|v| row.get(v));
    let mut candidates: Vec<(NodeId, Binding)> = if let Some(b) = bound_var {
        binding_node_entries(b)
    } else if let Some(first) = ref_sets.first() {
        first.clone()
    } else if let Some(id) = forced {
        vec![(id, Binding::Node(id))]
    } else {
        ctx.graph
            .nodes()
            .map(|n| (n.id, Binding::Node(n.id)))
            .collect()
    };
    // every label-position reference must also contain the candidate
    let ref_start = if bound_var.is_none() && !ref_sets.is_empty() {
        1
    } else {
        0
    };
    for refs in &ref_sets[ref_start.min(ref_sets.len())..] {
        candidates.retain(|(id, _)| refs.iter().any(|(rid, _)| rid == id));
    }
    if let Some(f) = forced {
        candidates.retain(|(id, _)| *id == f);
    }
    let mut result = Vec::new();
    for (id, binding) in candidates {
        let Some(node) = ctx.graph.node(id) else {
            continue;
        };
        if !real_labels.iter().all(|l| node.labels.contains(*l)) {
            continue;
        }
        if !props_match(ctx, row, &binding, &np.props)? {
            continue;
        }
        let mut row2 = row.clone();
        if let Some(v) = &np.var {
            if !row2.contains(v) {
                row2.set(v.clone(), binding.clone());
            }
        }
        result.push((id, row2));
    }
    Ok(result)
}

/// Candidate (relationship, far endpoint, binding) triples for one hop away
/// from `current`.
fn rel_candidates(
    ctx: EvalCtx<'_>,
    rp: &RelPattern,
    current: NodeId,
    row: &Row,
) -> Result<Vec<(RelId, NodeId, Binding)>, EvalError> {
    let bound_var = rp.var.as_ref().and_then(|v| row.get(v));
    let type_ref = rp.rel_type.as_ref().and_then(|t| row.get(t));
    let mut type_filter: Option<&str> = rp.rel_type.as_deref();
    let base: Vec<(RelId, Binding)> = if let Some(b) = bound_var {
        binding_rel_ids(b)
    } else if let Some(b) = type_ref {
        type_filter = None;
        binding_rel_ids(b)
    } else {
        ctx.graph
            .incident_rels(current)
            .map(|id| (id, Binding::Rel(id)))
            .collect()
    };
    let mut result = Vec::new();
    for (id, binding) in base {
        let Some(rel) = ctx.graph.rel(id) else {
            continue;
        };
        if let Some(t) = type_filter {
            if rel.rel_type != t {
                continue;
            }
        }
        let other = match rp.direction {
            Direction::Out => {
                if rel.source != current {
                    continue;
                }
                rel.target
            }
            Direction::In => {
                if rel.target != current {
                    continue;
                }
                rel.source
            }
            Direction::Undirected => match rel.other_endpoint(current) {
                Some(o) => o,
                None => continue,
            },
        };
        if !props_match(ctx, row, &binding, &rp.props)? {
            continue;
        }
        result.push((id, other, binding));
    }
    Ok(result)
}

fn props_match(
    ctx: EvalCtx<'_>,
    row: &Row,
    binding: &Binding,
    props: &[(String, crate::ast::Expr)],
) -> Result<bool, EvalError> {
    for (key, expr) in props {
        let expected = eval_expr(ctx, row, expr)?;
        let actual = binding.property(ctx.graph, key).unwrap_or(Value::Null);
        if !actual.loose_eq(&expected) {
            return Ok(false);
        }
    }
    Ok(true)
}
