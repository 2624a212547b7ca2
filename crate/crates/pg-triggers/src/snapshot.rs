//! Snapshot import/export: the whole graph as one JSON document.
//!
//! Layout: `{"nodes": [...], "relationships": [...]}` with both arrays
//! sorted by id and property keys sorted alphabetically, so equal graphs
//! always serialize to identical bytes. Datetimes are RFC3339 strings;
//! import turns any string that parses as RFC3339 back into a datetime.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde_json::{json, Map};

use crate::error::SnapshotError;
use crate::graph::{Graph, Node, NodeId, RelId, Relationship};
use crate::value::Value;

fn value_to_json(v: &Value) -> serde_json::Value {
    match v {
        Value::Text(s) => json!(s),
        Value::Integer(i) => json!(i),
        Value::Float(f) => json!(f),
        Value::Boolean(b) => json!(b),
        Value::DateTime(dt) => json!(Value::render_datetime(dt)),
        Value::TextList(xs) => json!(xs),
        Value::Null => serde_json::Value::Null,
    }
}

fn value_from_json(key: &str, v: &serde_json::Value) -> Result<Value, SnapshotError> {
    match v {
        serde_json::Value::String(s) => match DateTime::parse_from_rfc3339(s) {
            Ok(dt) => Ok(Value::DateTime(dt.with_timezone(&Utc))),
            Err(_) => Ok(Value::Text(s.clone())),
        },
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(Value::Integer(i))
            } else if let Some(f) = n.as_f64() {
                Ok(Value::Float(f))
            } else {
                Err(SnapshotError::Malformed(format!(
                    "property '{key}': unrepresentable number {n}"
                )))
            }
        }
        serde_json::Value::Bool(b) => Ok(Value::Boolean(*b)),
        serde_json::Value::Array(xs) => {
            let mut out = Vec::with_capacity(xs.len());
            for x in xs {
                match x {
                    serde_json::Value::String(s) => out.push(s.clone()),
                    _ => {
                        return Err(SnapshotError::Malformed(format!(
                            "property '{key}': lists may only contain text"
                        )))
                    }
                }
            }
            Ok(Value::TextList(out))
        }
        _ => Err(SnapshotError::Malformed(format!(
            "property '{key}': unsupported value {v}"
        ))),
    }
}

fn props_to_json(props: &BTreeMap<String, Value>) -> serde_json::Value {
    let mut map = Map::new();
    for (k, v) in props {
        map.insert(k.clone(), value_to_json(v));
    }
    serde_json::Value::Object(map)
}

/// Serializes the graph to the canonical JSON form.
pub fn export(graph: &Graph) -> String {
    let nodes: Vec<serde_json::Value> = graph
        .nodes()
        .map(|n| {
            json!({
                "id": n.id.0,
                "labels": n.labels.iter().collect::<Vec<_>>(),
                "properties": props_to_json(&n.properties),
            })
        })
        .collect();
    let rels: Vec<serde_json::Value> = graph
        .rels()
        .map(|r| {
            json!({
                "id": r.id.0,
                "type": r.rel_type,
                "source": r.source.0,
                "target": r.target.0,
                "properties": props_to_json(&r.properties),
            })
        })
        .collect();
    let doc = json!({ "nodes": nodes, "relationships": rels });
    let mut out = serde_json::to_string_pretty(&doc).expect("graph serializes");
    out.push('\n');
    out
}

fn get_u64(obj: &Map<String, serde_json::Value>, key: &str) -> Result<u64, SnapshotError> {
    obj.get(key)
        .and_then(|v| v.as_u64())
        .ok_or_else(|| SnapshotError::Malformed(format!("missing or non-integer '{key}'")))
}

fn get_props(obj: &Map<String, serde_json::Value>) -> Result<BTreeMap<String, Value>, SnapshotError> {
    let mut props = BTreeMap::new();
    if let Some(v) = obj.get("properties") {
        let map = v
            .as_object()
            .ok_or_else(|| SnapshotError::Malformed("'properties' must be an object".into()))?;
        for (k, v) in map {
            props.insert(k.clone(), value_from_json(k, v)?);
        }
    }
    Ok(props)
}

/// Parses a snapshot back into a graph. Ids are preserved; the id counters
/// resume past the largest imported ids.
pub fn import(text: &str) -> Result<Graph, SnapshotError> {
    let doc: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| SnapshotError::Malformed(e.to_string()))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| SnapshotError::Malformed("top level must be an object".into()))?;
    let mut graph = Graph::new();
    let mut seen_nodes = BTreeSet::new();
    if let Some(nodes) = obj.get("nodes") {
        let nodes = nodes
            .as_array()
            .ok_or_else(|| SnapshotError::Malformed("'nodes' must be an array".into()))?;
        for n in nodes {
            let n = n
                .as_object()
                .ok_or_else(|| SnapshotError::Malformed("node entries must be objects".into()))?;
            let id = get_u64(n, "id")?;
            if !seen_nodes.insert(id) {
                return Err(SnapshotError::DuplicateId(format!("node {id}")));
            }
            let labels: BTreeSet<String> = match n.get("labels") {
                Some(v) => v
                    .as_array()
                    .ok_or_else(|| SnapshotError::Malformed("'labels' must be an array".into()))?
                    .iter()
                    .map(|l| {
                        l.as_str()
                            .map(str::to_string)
                            .ok_or_else(|| SnapshotError::Malformed("labels must be text".into()))
                    })
                    .collect::<Result<_, _>>()?,
                None => BTreeSet::new(),
            };
            graph.insert_node(Node {
                id: NodeId(id),
                labels,
                properties: get_props(n)?,
            });
        }
    }
    let mut seen_rels = BTreeSet::new();
    if let Some(rels) = obj.get("relationships") {
        let rels = rels
            .as_array()
            .ok_or_else(|| SnapshotError::Malformed("'relationships' must be an array".into()))?;
        for r in rels {
            let r = r.as_object().ok_or_else(|| {
                SnapshotError::Malformed("relationship entries must be objects".into())
            })?;
            let id = get_u64(r, "id")?;
            if !seen_rels.insert(id) {
                return Err(SnapshotError::DuplicateId(format!("relationship {id}")));
            }
            let rel_type = r
                .get("type")
                .and_then(|v| v.as_str())
                .ok_or_else(|| SnapshotError::Malformed("missing relationship 'type'".into()))?
                .to_string();
            let source = get_u64(r, "source")?;
            let target = get_u64(r, "target")?;
            for end in [source, target] {
                if !seen_nodes.contains(&end) {
                    return Err(SnapshotError::DanglingReference { rel: id, node: end });
                }
            }
            graph
                .insert_rel(Relationship {
                    id: RelId(id),
                    rel_type,
                    source: NodeId(source),
                    target: NodeId(target),
                    properties: get_props(r)?,
                })
                .map_err(|_| SnapshotError::DanglingReference {
                    rel: id,
                    node: source,
                })?;
        }
    }
    Ok(graph)
}
