//! Emission of Neo4j APOC trigger installation calls.
//!
//! One trigger becomes one `apoc.trigger.install` call. A prelude UNWINDs
//! the transition payload into a per-item variable, the rewritten condition
//! pipeline narrows rows, and `apoc.do.when` guards the action with the
//! target-label check joined to the trigger condition. Values the action
//! needs cross the call boundary as parameters.

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

pub fn transpile_apoc(
    def: &TriggerDefinition,
    opts: &TranspileOptions,
) -> Result<TranspiledTrigger, TranspileError> {
    validate_trigger(def, &BTreeSet::new())?;
    let side = if def.event == EventKind::Create {
        Side::New
    } else {
        Side::Old
    };
    let source = map_transition_source(def.event, def.target, side, Backend::Apoc)?;
    let item = item_variable(def.event, def.target);

    let (prelude, prelude_bound, old_value, new_value) = match def.event {
        EventKind::Create | EventKind::Delete => (
            vec![format!("UNWIND {} AS {item}", source.variable)],
            vec![item],
            None,
            None,
        ),
        EventKind::Set => (
            vec![
                format!("UNWIND keys({}) AS k", source.variable),
                format!("UNWIND {}[k] AS aProp", source.variable),
                format!(
                    "WITH aProp.{item} AS {item}, collect(aProp.key) AS propList, \
                     aProp.old AS oldValue, aProp.new AS newValue"
                ),
            ],
            vec![item, "propList", "oldValue", "newValue"],
            Some("oldValue"),
            Some(Expr::Var("newValue".to_string())),
        ),
        EventKind::Remove => (
            vec![
                format!("UNWIND keys({}) AS k", source.variable),
                format!("UNWIND {}[k] AS rProp", source.variable),
                format!(
                    "WITH rProp.{item} AS {item}, collect(rProp.key) AS propList, \
                     rProp.old AS oldValue"
                ),
            ],
            vec![item, "propList", "oldValue"],
            Some("oldValue"),
            Some(Expr::Literal(Value::Null)),
        ),
    };

    let mut guard = match def.target {
        TargetKind::Node => format!("{item}:{}", def.label),
        TargetKind::Relationship => format!("type({item}) = '{}'", def.label),
    };
    if let Some(p) = &def.property {
        guard.push_str(&format!(" AND '{p}' IN propList"));
    }

    let mut rw = Rewriter::new(def, &opts.hierarchies, item, &prelude_bound, old_value, new_value);
    let (mut cond_stages, mut cond_expr) = split_condition(&mut rw, def.condition.as_ref());
    if let Some(e) = &mut cond_expr {
        hoist_where_props(&mut cond_stages, e);
    }
    let outer_bound = rw.bound.clone();

    let mut action_stages = rw.rewrite(&def.statement.stages, None, true);
    fill_carries(&mut action_stages, &[], item, &outer_bound);
    anonymize_unused(&mut action_stages, &[], item, &outer_bound);
    let params = free_names(&action_stages, &outer_bound, item);

    let prelude_set: BTreeSet<String> = prelude_bound.iter().map(|s| s.to_string()).collect();
    let mut trailing: Vec<String> = vec![item.to_string()];
    if def.property.is_some() {
        trailing.push("propList".to_string());
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

    let mut parts: Vec<String> = params.iter().map(|n| format!("{n}: {n}")).collect();
    parts.extend(rw.lifted.iter().map(|(name, text)| {
        format!("{name}: '{}'", text.replace('\\', "\\\\").replace('\'', "\\'"))
    }));
    let params_text = format!("{{{}}}", parts.join(", "));

    let mut lines = prelude;
    lines.extend(render_stages(&cond_stages, item, Quote::Single));
    let action_lines = render_stages(&action_stages, item, Quote::EscapedDouble);
    lines.push("CALL apoc.do.when(".to_string());
    lines.push(format!("  {condition},"));
    lines.push(format!("  '{}',", action_lines.join("\n   ")));
    lines.push(format!("  '', {params_text})"));
    lines.push("YIELD value RETURN *".to_string());
    let statement = lines.join("\n");

    let selector = match def.time {
        ActionTime::After | ActionTime::Detached => "afterAsync",
        ActionTime::OnCommit | ActionTime::Before => "before",
    };
    let text = format!(
        "CALL apoc.trigger.install('{}', '{}',\n\"{statement}\",\n{{phase: '{selector}'}});",
        opts.database, def.name
    );

    let mut warnings = vec![
        "cascading activations are not reproduced: the backend does not fire triggers on changes made by trigger actions".to_string(),
    ];
    if def.granularity == Granularity::All {
        warnings.push(
            "set granularity is approximated: the installed statement runs once per transition item".to_string(),
        );
    }
    match def.time {
        ActionTime::Before => warnings.push(
            "BEFORE timing is approximated: phase 'before' sees the post-statement state at commit".to_string(),
        ),
        ActionTime::OnCommit => warnings.push(
            "ONCOMMIT maps to phase 'before', which runs once when the transaction commits".to_string(),
        ),
        ActionTime::After => warnings.push(
            "AFTER maps to phase 'afterAsync', which runs after commit rather than inside the transaction".to_string(),
        ),
        ActionTime::Detached => {}
    }

    Ok(TranspiledTrigger {
        backend: Backend::Apoc,
        name: def.name.clone(),
        text,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::super::tokens::token_stream_eq;
    use super::super::TranspileOptions;
    use super::transpile_apoc;
    use crate::ddl::parse_trigger;

    fn covid_options() -> TranspileOptions {
        TranspileOptions {
            database: "databaseName".to_string(),
            hierarchies: vec![("IcuPatient".to_string(), "HospitalizedPatient".to_string())],
        }
    }

    fn emit(src: &str) -> super::TranspiledTrigger {
        let def = parse_trigger(src).unwrap();
        transpile_apoc(&def, &covid_options()).unwrap()
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
        let expected = r#"CALL apoc.trigger.install('databaseName', 'WhoDesignationChange',
"UNWIND keys($assignedNodeProperties) AS k
UNWIND $assignedNodeProperties[k] AS aProp
WITH aProp.node AS node, collect(aProp.key) AS propList, aProp.old AS oldValue, aProp.new AS newValue
CALL apoc.do.when(
  node:Lineage AND 'whoDesignation' IN propList AND oldValue <> newValue,
  'CREATE (:Alert {time: DATETIME(), desc: \"New Designation for an existing Lineage\"})',
  '', {})
YIELD value RETURN *",
{phase: 'afterAsync'});"#;
        let out = emit(WHO_DESIGNATION_CHANGE);
        assert!(
            token_stream_eq(&out.text, expected),
            "emitted:\n{}",
            out.text
        );
    }

    const ICU_PATIENT_INCREASE: &str = "\
CREATE TRIGGER IcuPatientIncrease
AFTER CREATE ON 'IcuPatient'
FOR ALL NODES
WHEN MATCH (p:IcuPatient)-[:TreatedAt]-(h:Hospital {name: 'Sacco'})
MATCH (pn:NEWNODES)-[:TreatedAt]-(h)
WITH COUNT(pn) AS NewIcuPat, COUNT(p) AS TotalIcuPat
WHERE NewIcuPat / TotalIcuPat > 0.1
BEGIN
CREATE (:Alert {time: DATETIME(), desc: 'ICU patients at Sacco Hospital have increased by more than 10%'})
END";

    #[test]
    fn test_count_threshold_trigger_matches_reference() {
        let expected = r#"CALL apoc.trigger.install('databaseName', 'IcuPatientIncrease',
"UNWIND $createdNodes AS cNodes
MATCH (p:IcuPatient)-[:Isa]-(:HospitalizedPatient)-[:TreatedAt]-(:Hospital {name: 'Sacco'})
WITH COUNT(cNodes) AS NewIcuPat, COUNT(p) AS TotalIcuPat, cNodes
CALL apoc.do.when(
  cNodes:IcuPatient AND NewIcuPat / TotalIcuPat > 0.1,
  'CREATE (:Alert {time: DATETIME(), desc: \"ICU patients at Sacco Hospital have increased by more than 10%\"})',
  '', {})
YIELD value RETURN *",
{phase: 'afterAsync'});"#;
        let out = emit(ICU_PATIENT_INCREASE);
        assert!(
            token_stream_eq(&out.text, expected),
            "emitted:\n{}",
            out.text
        );
    }

    const ICU_PATIENT_MOVE: &str = "\
CREATE TRIGGER IcuPatientMove
AFTER CREATE ON 'IcuPatient'
REFERENCING NEWNODES AS pn
FOR ALL NODES
WHEN MATCH (p:IcuPatient)-[:TreatedAt]-(h:Hospital {name: 'Sacco'})
MATCH (pn)-[:TreatedAt]-(h)
WITH COUNT(p) AS TotalIcuPat
WHERE TotalIcuPat > h.icuBeds
BEGIN
MATCH (pt:IcuPatient)-[:TreatedAt]-(ht:Hospital {name: 'Meyer'})
WITH COUNT(pt) AS MeyerICU, ht.icuBeds AS MeyerBeds, COUNT(pn) AS newICUSacco
WHERE newICUSacco + MeyerICU <= MeyerBeds
FOREACH (p IN pn) BEGIN
MATCH (p)-[c:TreatedAt]-(:Hospital {name: 'Sacco'})
DELETE c
CREATE (p)-[:TreatedAt]->(ht)
END
END";

    #[test]
    fn test_foreach_action_trigger_matches_reference() {
        let expected = r#"CALL apoc.trigger.install('databaseName', 'IcuPatientMove',
"UNWIND $createdNodes AS cNodes
MATCH (p:IcuPatient)-[:Isa]-(:HospitalizedPatient)-[:TreatedAt]-(h:Hospital {name: 'Sacco'})
WITH COUNT(p) AS TotalIcuPat, h.icuBeds AS h_icuBeds, cNodes
CALL apoc.do.when(
  cNodes:IcuPatient AND TotalIcuPat > h_icuBeds,
  'MATCH (pt:IcuPatient)-[:Isa]-(:HospitalizedPatient)-[:TreatedAt]-(ht:Hospital {name: $Meyer})
   WITH COUNT(pt) AS MeyerICU, ht.icuBeds AS MeyerBeds, COUNT(cNodes) AS newICUSacco, cNodes, ht
   WHERE newICUSacco + MeyerICU <= MeyerBeds
   MATCH (cNodes)-[:Isa]-(:HospitalizedPatient)-[c:TreatedAt]-(:Hospital {name: $Sacco})
   FOREACH (p IN [cNodes] | DELETE c)
   FOREACH (p IN [cNodes] | CREATE (p)-[:TreatedAt]->(ht))',
  '', {cNodes: cNodes, Meyer: 'Meyer', Sacco: 'Sacco'})
YIELD value RETURN *",
{phase: 'afterAsync'});"#;
        let out = emit(ICU_PATIENT_MOVE);
        assert!(
            token_stream_eq(&out.text, expected),
            "emitted:\n{}",
            out.text
        );
    }

    const MOVE_TO_NEAR_HOSPITAL: &str = "\
CREATE TRIGGER MoveToNearHospital
AFTER CREATE ON 'IcuPatient'
REFERENCING NEWNODES AS pn
FOR ALL NODES
WHEN MATCH (pn)-[:TreatedAt]-(h:Hospital)-[:LocatedIn]-(:Region {name: 'Lombardy'})
MATCH (p:IcuPatient)-[:TreatedAt]-(h)
WITH COUNT(p) AS TotalIcuPat, h
WHERE TotalIcuPat > h.icuBeds
BEGIN
MATCH (h:Hospital)-[:LocatedIn]-(:Region {name: 'Lombardy'})
MATCH (pn)-[:TreatedAt]-(h)-[ct:ConnectedTo]-(hc:Hospital)
WITH ct ORDER BY ct.distance LIMIT 1
THEN BEGIN
MATCH (pn)-[c:TreatedAt]-(h)
DELETE c
CREATE (pn)-[:TreatedAt]->(hc)
END
END";

    #[test]
    fn test_nearest_neighbor_trigger_matches_reference() {
        let expected = r#"CALL apoc.trigger.install('databaseName', 'MoveToNearHospital',
"UNWIND $createdNodes AS cNodes
MATCH (cNodes)-[:Isa]-(:HospitalizedPatient)-[:TreatedAt]-(h:Hospital)-[:LocatedIn]-(:Region {name: 'Lombardy'})
MATCH (p:IcuPatient)-[:Isa]-(:HospitalizedPatient)-[:TreatedAt]-(h)
WITH COUNT(p) AS TotalIcuPat, h, h.icuBeds AS h_icuBeds, cNodes
CALL apoc.do.when(
  cNodes:IcuPatient AND TotalIcuPat > h_icuBeds,
  'MATCH (h)-[ct:ConnectedTo]-(hc:Hospital)
   WITH ct, cNodes, h, hc ORDER BY ct.distance ASC LIMIT 1
   MATCH (cNodes)-[:Isa]-(:HospitalizedPatient)-[c:TreatedAt]-(h)
   FOREACH (pat IN [cNodes] | DELETE c)
   FOREACH (pat IN [cNodes] | CREATE (pat)-[:TreatedAt]->(hc))',
  '', {cNodes: cNodes, h: h})
YIELD value RETURN *",
{phase: 'afterAsync'});"#;
        let out = emit(MOVE_TO_NEAR_HOSPITAL);
        assert!(
            token_stream_eq(&out.text, expected),
            "emitted:\n{}",
            out.text
        );
    }

    #[test]
    fn test_exists_condition_unifies_transition_variable() {
        let out = emit(
            "CREATE TRIGGER NewCriticalMutation
AFTER CREATE ON 'Mutation'
FOR EACH NODE
WHEN EXISTS (NEW)-[:Risk]-(:CriticalEffect)
BEGIN
CREATE (:Alert {time: DATETIME(), desc: NEW.name})
END",
        );
        assert!(out.text.contains("EXISTS((cNodes)-[:Risk]-(:CriticalEffect))"));
        assert!(out.text.contains("{cNodes: cNodes}"));
    }

    #[test]
    fn test_relationship_trigger_guards_by_type() {
        let out = emit(
            "CREATE TRIGGER NewCriticalLineage
AFTER CREATE ON 'BelongsTo'
FOR EACH RELATIONSHIP
BEGIN
CREATE (:Alert {time: DATETIME(), desc: 'new lineage edge'})
END",
        );
        assert!(out.text.contains("UNWIND $createdRelationships AS cRels"));
        assert!(out.text.contains("type(cRels) = 'BelongsTo'"));
    }

    #[test]
    fn test_install_call_shape_is_single() {
        let out = emit(WHO_DESIGNATION_CHANGE);
        assert_eq!(out.text.matches("apoc.trigger.install").count(), 1);
        assert_eq!(out.text.matches("apoc.do.when").count(), 1);
        assert!(out.text.ends_with("});"));
    }

    #[test]
    fn test_action_time_selectors_and_warnings() {
        let template = |time: &str| {
            format!(
                "CREATE TRIGGER t {time} CREATE ON 'L' FOR EACH NODE BEGIN CREATE (:X) END"
            )
        };
        for (time, phase) in [
            ("AFTER", "afterAsync"),
            ("DETACHED", "afterAsync"),
            ("ONCOMMIT", "before"),
        ] {
            let out = emit(&template(time));
            assert!(
                out.text.contains(&format!("{{phase: '{phase}'}}")),
                "{time} selects {phase}"
            );
        }
        let detached = emit(&template("DETACHED"));
        assert_eq!(detached.warnings.len(), 1);
        let after = emit(&template("AFTER"));
        assert!(after.warnings.iter().any(|w| w.contains("afterAsync")));
        let before = emit(
            "CREATE TRIGGER t BEFORE CREATE ON 'L' FOR EACH NODE BEGIN SET NEW.seen = TRUE END",
        );
        assert!(before.text.contains("{phase: 'before'}"));
        assert!(before.warnings.iter().any(|w| w.contains("BEFORE timing")));
    }

    #[test]
    fn test_set_granularity_warns() {
        let out = emit(
            "CREATE TRIGGER t AFTER CREATE ON 'L' FOR ALL NODES BEGIN CREATE (:X) END",
        );
        assert!(out.warnings.iter().any(|w| w.contains("set granularity")));
    }

    #[test]
    fn test_remove_event_exposes_old_value_and_null_new() {
        let out = emit(
            "CREATE TRIGGER t AFTER REMOVE ON 'L'.'p'
FOR EACH NODE
WHEN OLD.p <> NEW.p
BEGIN
CREATE (:Audit {was: OLD.p})
END",
        );
        assert!(out.text.contains("UNWIND keys($removedNodeProperties) AS k"));
        assert!(out.text.contains("'p' IN propList"));
        assert!(out.text.contains("oldValue <> null"));
        assert!(out.text.contains("was: oldValue"));
        assert!(out.text.contains("{oldValue: oldValue}"));
    }
}
