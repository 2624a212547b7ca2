//! Emission of Memgraph CREATE TRIGGER statements.
//!
//! One trigger becomes one `CREATE TRIGGER` statement whose body is plain
//! openCypher over Memgraph's predefined transition variables. The guard and
//! condition compute a CASE flag so rows that fail drop out at a WHERE, the
//! label check using `labels()` because a variable from UNWIND cannot take
//! an inline label predicate.

use std::collections::BTreeSet;

use crate::ast::{BinOp, Expr};
use crate::ddl::{validate_trigger, ActionTime, EventKind, Granularity, TargetKind, TriggerDefinition};
use crate::error::TranspileError;
use crate::value::Value;

use super::rewrite::{
    all_names, anonymize_unused, expr_names_of, fill_carries, free_names, hoist_where_props,
    render_expr, render_stages, split_condition, Quote, Rewriter,
};
use super::{item_variable, map_transition_source, Backend, Side, TranspileOptions, TranspiledTrigger};

pub fn transpile_memgraph(
    def: &TriggerDefinition,
    opts: &TranspileOptions,
) -> Result<TranspiledTrigger, TranspileError> {
    validate_trigger(def, &BTreeSet::new())?;
    let side = if def.event == EventKind::Create {
        Side::New
    } else {
        Side::Old
    };
    let source = map_transition_source(def.event, def.target, side, Backend::Memgraph)?;
    let item = item_variable(def.event, def.target);
    let field = match def.target {
        TargetKind::Node => "vertex",
        TargetKind::Relationship => "edge",
    };

    let (prelude, prelude_bound, old_value, new_value) = match def.event {
        EventKind::Create | EventKind::Delete => (
            vec![format!("UNWIND {} AS {item}", source.variable)],
            vec![item],
            None,
            None,
        ),
        EventKind::Set => (
            vec![
                format!("UNWIND {} AS aProp", source.variable),
                format!(
                    "WITH aProp.{field} AS {item}, aProp.key AS propKey, \
                     aProp.old AS oldValue, aProp.new AS newValue"
                ),
            ],
            vec![item, "propKey", "oldValue", "newValue"],
            Some("oldValue"),
            Some(Expr::Var("newValue".to_string())),
        ),
        EventKind::Remove => (
            vec![
                format!("UNWIND {} AS rProp", source.variable),
                format!(
                    "WITH rProp.{field} AS {item}, rProp.key AS propKey, rProp.old AS oldValue"
                ),
            ],
            vec![item, "propKey", "oldValue"],
            Some("oldValue"),
            Some(Expr::Literal(Value::Null)),
        ),
    };

    let mut guard = match def.target {
        TargetKind::Node => format!("'{}' IN labels({item})", def.label),
        TargetKind::Relationship => format!("type({item}) = '{}'", def.label),
    };
    if let Some(p) = &def.property {
        guard.push_str(&format!(" AND propKey = '{p}'"));
    }

    let mut rw = Rewriter::new(def, &opts.hierarchies, item, &prelude_bound, old_value, new_value);
    let (mut cond_stages, mut cond_expr) = split_condition(&mut rw, def.condition.as_ref());
    if let Some(e) = &mut cond_expr {
        hoist_where_props(&mut cond_stages, e);
    }
    let outer_bound = rw.bound.clone();

    let mut action_stages = rw.rewrite(&def.statement.stages, None, false);
    fill_carries(&mut action_stages, &[], item, &outer_bound);
    anonymize_unused(&mut action_stages, &[], item, &outer_bound);
    let frees = free_names(&action_stages, &outer_bound, item);

    let prelude_set: BTreeSet<String> = prelude_bound.iter().map(|s| s.to_string()).collect();
    let mut trailing: Vec<String> = vec![item.to_string()];
    if def.property.is_some() {
        trailing.push("propKey".to_string());
    }
    if let Some(e) = &cond_expr {
        trailing.extend(expr_names_of(e));
    }
    trailing.extend(all_names(&action_stages));
    fill_carries(&mut cond_stages, &trailing, item, &prelude_set);
    anonymize_unused(&mut cond_stages, &trailing, item, &prelude_set);

    let mut condition = guard;
    if let Some(e) = &cond_expr {
        let mut rendered = render_expr(e, Quote::Single);
        if matches!(e, Expr::Binary(BinOp::Or, ..)) {
            rendered = format!("({rendered})");
        }
        condition.push_str(" AND ");
        condition.push_str(&rendered);
    }

    let on = match def.target {
        TargetKind::Node => "()",
        TargetKind::Relationship => "-->",
    };
    let ev = match def.event {
        EventKind::Create => "CREATE",
        EventKind::Delete => "DELETE",
        EventKind::Set | EventKind::Remove => "UPDATE",
    };
    let when = match def.time {
        ActionTime::Before | ActionTime::OnCommit => "BEFORE COMMIT",
        ActionTime::After | ActionTime::Detached => "AFTER COMMIT",
    };

    let mut lines = vec![
        format!("CREATE TRIGGER {}", def.name),
        format!("ON {on} {ev}"),
        when.to_string(),
        "EXECUTE".to_string(),
    ];
    lines.extend(prelude);
    lines.extend(render_stages(&cond_stages, item, Quote::Single));
    let mut case_parts = frees;
    case_parts.push(format!("CASE WHEN {condition} THEN 1 ELSE NULL END AS flag"));
    lines.push(format!("WITH {}", case_parts.join(", ")));
    lines.push("WHERE flag IS NOT NULL".to_string());
    lines.extend(render_stages(&action_stages, item, Quote::Single));
    let text = format!("{};", lines.join("\n"));

    let mut warnings = vec![
        "cascading activations are not reproduced: the backend does not fire triggers on changes made by trigger actions".to_string(),
    ];
    if def.granularity == Granularity::All {
        warnings.push(
            "set granularity is approximated: the trigger body runs once per transition item".to_string(),
        );
    }
    match def.time {
        ActionTime::Before => warnings.push(
            "BEFORE timing is approximated: BEFORE COMMIT runs once when the transaction commits".to_string(),
        ),
        ActionTime::After => warnings.push(
            "AFTER COMMIT runs asynchronously after the transaction; in-transaction AFTER timing is approximated".to_string(),
        ),
        ActionTime::OnCommit | ActionTime::Detached => {}
    }

    Ok(TranspiledTrigger {
        backend: Backend::Memgraph,
        name: def.name.clone(),
        text,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::super::tokens::token_stream_eq;
    use super::super::TranspileOptions;
    use super::transpile_memgraph;
    use crate::ddl::parse_trigger;

    fn covid_options() -> TranspileOptions {
        TranspileOptions {
            database: "databaseName".to_string(),
            hierarchies: vec![("IcuPatient".to_string(), "HospitalizedPatient".to_string())],
        }
    }

    fn emit(src: &str) -> super::TranspiledTrigger {
        let def = parse_trigger(src).unwrap();
        transpile_memgraph(&def, &covid_options()).unwrap()
    }

    const WHO_DESIGNATION_CHANGE: &str = "\
CREATE TRIGGER WhoDesignationChange
AFTER SET ON 'Lineage'.'whoDesignation'
FOR EACH NODE
WHEN OLD.whoDesignation <> NEW.whoDesignation
BEGIN
CREATE (:Alert {time: DATETIME(), desc: 'New Designation for an existing Lineage'})
END";

    #[test]
    fn test_property_change_trigger_matches_reference() {
        let expected = "\
CREATE TRIGGER WhoDesignationChange
ON () UPDATE
AFTER COMMIT
EXECUTE
UNWIND setVertexProperties AS aProp
WITH aProp.vertex AS node, aProp.key AS propKey, aProp.old AS oldValue, aProp.new AS newValue
WITH CASE WHEN 'Lineage' IN labels(node) AND propKey = 'whoDesignation' AND oldValue <> newValue THEN 1 ELSE NULL END AS flag
WHERE flag IS NOT NULL
CREATE (:Alert {time: DATETIME(), desc: 'New Designation for an existing Lineage'});";
        let out = emit(WHO_DESIGNATION_CHANGE);
        assert!(
            token_stream_eq(&out.text, expected),
            "emitted:\n{}",
            out.text
        );
    }

    #[test]
    fn test_trigger_statement_shape() {
        let out = emit(WHO_DESIGNATION_CHANGE);
        assert!(out.text.starts_with("CREATE TRIGGER WhoDesignationChange\n"));
        assert!(out.text.contains("\nEXECUTE\n"));
        assert!(out.text.contains("WHERE flag IS NOT NULL"));
        assert!(out.text.ends_with(";"));
    }

    #[test]
    fn test_relationship_trigger_targets_edges() {
        let out = emit(
            "CREATE TRIGGER t AFTER CREATE ON 'BelongsTo' FOR EACH RELATIONSHIP
BEGIN
CREATE (:Alert {desc: 'edge'})
END",
        );
        assert!(out.text.contains("ON --> CREATE"));
        assert!(out.text.contains("UNWIND createdEdges AS cRels"));
        assert!(out.text.contains("type(cRels) = 'BelongsTo'"));
    }

    #[test]
    fn test_action_free_variables_survive_the_flag() {
        let out = emit(
            "CREATE TRIGGER t AFTER CREATE ON 'IcuPatient' FOR ALL NODES
WHEN MATCH (p:IcuPatient)-[:TreatedAt]-(h:Hospital)
WITH COUNT(p) AS n, h
WHERE n > 3
BEGIN
SET h.full = TRUE
END",
        );
        assert!(
            out.text.contains("WITH h, CASE WHEN"),
            "emitted:\n{}",
            out.text
        );
        assert!(out.text.contains("SET h.full = true"));
    }

    #[test]
    fn test_commit_times_and_warnings() {
        let before = emit(
            "CREATE TRIGGER t BEFORE CREATE ON 'L' FOR EACH NODE BEGIN SET NEW.seen = TRUE END",
        );
        assert!(before.text.contains("\nBEFORE COMMIT\n"));
        assert!(before.warnings.iter().any(|w| w.contains("BEFORE timing")));
        let oncommit = emit(
            "CREATE TRIGGER t ONCOMMIT CREATE ON 'L' FOR EACH NODE BEGIN CREATE (:X) END",
        );
        assert!(oncommit.text.contains("\nBEFORE COMMIT\n"));
        assert_eq!(oncommit.warnings.len(), 1);
        let detached = emit(
            "CREATE TRIGGER t DETACHED CREATE ON 'L' FOR EACH NODE BEGIN CREATE (:X) END",
        );
        assert!(detached.text.contains("\nAFTER COMMIT\n"));
        assert_eq!(detached.warnings.len(), 1);
    }

    #[test]
    fn test_update_event_covers_set_and_remove() {
        let set = emit(
            "CREATE TRIGGER t AFTER SET ON 'L'.'p' FOR EACH NODE BEGIN CREATE (:X) END",
        );
        assert!(set.text.contains("ON () UPDATE"));
        assert!(set.text.contains("propKey = 'p'"));
        let remove = emit(
            "CREATE TRIGGER t AFTER REMOVE ON 'L'.'p' FOR EACH NODE BEGIN CREATE (:X) END",
        );
        assert!(remove.text.contains("ON () UPDATE"));
        assert!(remove.text.contains("UNWIND removedVertexProperties AS rProp"));
    }
}
