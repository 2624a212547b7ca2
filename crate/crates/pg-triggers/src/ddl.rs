//! Trigger definitions: parsing, validation, and canonical printing.
//!
//! A trigger names an action time, a monitored event, a target label
//! (optionally narrowed to one property), a granularity, transition-variable
//! aliases, an optional condition, and an action statement. Validation
//! rejects definitions that are syntactically well formed but semantically
//! incoherent; each rejection carries a machine-readable violation code.

use std::collections::BTreeSet;

use crate::ast::{
    expr_vars, print_expr, print_stages, stage_vars, Expr, RemoveItem, SetItem, Stage, Statement,
};
use crate::error::{ParseError, ValidationError, ViolationCode};
use crate::parser::{parse_expr, parse_read_pipeline, parse_stages, Cursor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionTime {
    Before,
    After,
    OnCommit,
    Detached,
}

impl ActionTime {
    pub fn keyword(&self) -> &'static str {
        match self {
            ActionTime::Before => "BEFORE",
            ActionTime::After => "AFTER",
            ActionTime::OnCommit => "ONCOMMIT",
            ActionTime::Detached => "DETACHED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Create,
    Delete,
    Set,
    Remove,
}

impl EventKind {
    pub fn keyword(&self) -> &'static str {
        match self {
            EventKind::Create => "CREATE",
            EventKind::Delete => "DELETE",
            EventKind::Set => "SET",
            EventKind::Remove => "REMOVE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    Each,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    Node,
    Relationship,
}

/// Transition variables exposed to conditions and actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionKind {
    New,
    Old,
    NewNodes,
    OldNodes,
    NewRels,
    OldRels,
}

impl TransitionKind {
    pub const ALL: [TransitionKind; 6] = [
        TransitionKind::New,
        TransitionKind::Old,
        TransitionKind::NewNodes,
        TransitionKind::OldNodes,
        TransitionKind::NewRels,
        TransitionKind::OldRels,
    ];

    pub fn canonical(&self) -> &'static str {
        match self {
            TransitionKind::New => "NEW",
            TransitionKind::Old => "OLD",
            TransitionKind::NewNodes => "NEWNODES",
            TransitionKind::OldNodes => "OLDNODES",
            TransitionKind::NewRels => "NEWRELS",
            TransitionKind::OldRels => "OLDRELS",
        }
    }

    pub fn from_name(name: &str) -> Option<TransitionKind> {
        TransitionKind::ALL
            .into_iter()
            .find(|k| k.canonical() == name)
    }

    pub fn is_new_side(&self) -> bool {
        matches!(
            self,
            TransitionKind::New | TransitionKind::NewNodes | TransitionKind::NewRels
        )
    }

    pub fn granularity(&self) -> Granularity {
        match self {
            TransitionKind::New | TransitionKind::Old => Granularity::Each,
            _ => Granularity::All,
        }
    }

    /// The item kind a plural transition variable is pinned to.
    pub fn target_kind(&self) -> Option<TargetKind> {
        match self {
            TransitionKind::New | TransitionKind::Old => None,
            TransitionKind::NewNodes | TransitionKind::OldNodes => Some(TargetKind::Node),
            TransitionKind::NewRels | TransitionKind::OldRels => Some(TargetKind::Relationship),
        }
    }
}

/// Trigger condition: a boolean expression or a read pipeline whose result
/// rows both decide firing and seed the action.
#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    Expr(Expr),
    Pipeline(Vec<Stage>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriggerDefinition {
    pub name: String,
    pub time: ActionTime,
    pub event: EventKind,
    pub label: String,
    pub property: Option<String>,
    pub granularity: Granularity,
    pub target: TargetKind,
    pub aliases: Vec<(TransitionKind, String)>,
    pub condition: Option<Condition>,
    pub statement: Statement,
}

impl TriggerDefinition {
    /// The name a transition kind goes by in this trigger: its alias when
    /// declared, the canonical name otherwise.
    pub fn transition_name(&self, kind: TransitionKind) -> String {
        self.aliases
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, a)| a.clone())
            .unwrap_or_else(|| kind.canonical().to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdminCommand {
    Drop(String),
    Enable(String),
    Disable(String),
    Show,
}

/// Parses a complete CREATE TRIGGER definition.
pub fn parse_trigger(src: &str) -> Result<TriggerDefinition, ParseError> {
    let mut c = Cursor::new(src)?;
    let def = parse_trigger_at(&mut c)?;
    if let Some(t) = c.peek() {
        return Err(c.error_here(format!("unexpected {} after END", t.describe())));
    }
    Ok(def)
}

pub fn parse_trigger_at(c: &mut Cursor) -> Result<TriggerDefinition, ParseError> {
    c.expect_kw("CREATE")?;
    c.expect_kw("TRIGGER")?;
    let name = c.expect_ident("trigger name")?;
    let time = if c.eat_kw("BEFORE") {
        ActionTime::Before
    } else if c.eat_kw("AFTER") {
        ActionTime::After
    } else if c.eat_kw("ONCOMMIT") {
        ActionTime::OnCommit
    } else if c.eat_kw("DETACHED") {
        ActionTime::Detached
    } else {
        return Err(c.error_here("expected BEFORE, AFTER, ONCOMMIT or DETACHED"));
    };
    let event = if c.eat_kw("CREATE") {
        EventKind::Create
    } else if c.eat_kw("DELETE") {
        EventKind::Delete
    } else if c.eat_kw("SET") {
        EventKind::Set
    } else if c.eat_kw("REMOVE") {
        EventKind::Remove
    } else {
        return Err(c.error_here("expected CREATE, DELETE, SET or REMOVE"));
    };
    c.expect_kw("ON")?;
    let label = c.expect_string("quoted target label")?;
    let property = if c.eat_sym(".") {
        let p = c.expect_string("quoted target property")?;
        if matches!(event, EventKind::Create | EventKind::Delete) {
            return Err(c.error_here("a property target is only legal for SET and REMOVE events"));
        }
        Some(p)
    } else {
        None
    };
    let mut aliases = Vec::new();
    if c.eat_kw("REFERENCING") {
        loop {
            let kind_name = c.expect_ident("transition variable")?;
            let kind = TransitionKind::from_name(&kind_name).ok_or_else(|| {
                c.error_here(format!("unknown transition variable '{kind_name}'"))
            })?;
            c.expect_kw("AS")?;
            let alias = c.expect_ident("transition alias")?;
            aliases.push((kind, alias));
            if !c.eat_sym(",") {
                break;
            }
        }
    }
    c.expect_kw("FOR")?;
    let granularity = if c.eat_kw("EACH") {
        Granularity::Each
    } else if c.eat_kw("ALL") {
        Granularity::All
    } else {
        return Err(c.error_here("expected EACH or ALL"));
    };
    let target = if c.eat_kw("NODE") || c.eat_kw("NODES") {
        TargetKind::Node
    } else if c.eat_kw("RELATIONSHIP") || c.eat_kw("RELATIONSHIPS") {
        TargetKind::Relationship
    } else {
        return Err(c.error_here("expected NODE(S) or RELATIONSHIP(S)"));
    };
    let condition = if c.eat_kw("WHEN") {
        if c.peek().is_some_and(|t| t.is_kw("MATCH")) {
            Some(Condition::Pipeline(parse_read_pipeline(c, &["BEGIN"])?))
        } else {
            Some(Condition::Expr(parse_expr(c)?))
        }
    } else {
        None
    };
    c.expect_kw("BEGIN")?;
    let stages = parse_stages(c, &["END"])?;
    c.expect_kw("END")?;
    if stages.is_empty() {
        return Err(c.error_here("trigger action must contain at least one clause"));
    }
    Ok(TriggerDefinition {
        name,
        time,
        event,
        label,
        property,
        granularity,
        target,
        aliases,
        condition,
        statement: Statement { stages },
    })
}

/// Parses a trigger administration command.
pub fn parse_admin(src: &str) -> Result<AdminCommand, ParseError> {
    let mut c = Cursor::new(src)?;
    let cmd = parse_admin_at(&mut c)?;
    if let Some(t) = c.peek() {
        return Err(c.error_here(format!("unexpected {}", t.describe())));
    }
    Ok(cmd)
}

pub fn parse_admin_at(c: &mut Cursor) -> Result<AdminCommand, ParseError> {
    if c.eat_kw("SHOW") {
        c.expect_kw("TRIGGERS")?;
        return Ok(AdminCommand::Show);
    }
    let make: fn(String) -> AdminCommand = if c.eat_kw("DROP") {
        AdminCommand::Drop
    } else if c.eat_kw("ENABLE") {
        AdminCommand::Enable
    } else if c.eat_kw("DISABLE") {
        AdminCommand::Disable
    } else {
        return Err(c.error_here("expected DROP, ENABLE, DISABLE or SHOW"));
    };
    c.expect_kw("TRIGGER")?;
    Ok(make(c.expect_ident("trigger name")?))
}

/// Canonical textual form; `parse_trigger` accepts its output.
pub fn print_trigger(def: &TriggerDefinition) -> String {
    let mut out = String::new();
    out.push_str("CREATE TRIGGER ");
    out.push_str(&def.name);
    out.push('\n');
    out.push_str(def.time.keyword());
    out.push(' ');
    out.push_str(def.event.keyword());
    out.push_str(" ON '");
    out.push_str(&def.label);
    out.push('\'');
    if let Some(p) = &def.property {
        out.push_str(".'");
        out.push_str(p);
        out.push('\'');
    }
    out.push('\n');
    if !def.aliases.is_empty() {
        let items: Vec<String> = def
            .aliases
            .iter()
            .map(|(k, a)| format!("{} AS {}", k.canonical(), a))
            .collect();
        out.push_str("REFERENCING ");
        out.push_str(&items.join(", "));
        out.push('\n');
    }
    out.push_str("FOR ");
    match (def.granularity, def.target) {
        (Granularity::Each, TargetKind::Node) => out.push_str("EACH NODE"),
        (Granularity::Each, TargetKind::Relationship) => out.push_str("EACH RELATIONSHIP"),
        (Granularity::All, TargetKind::Node) => out.push_str("ALL NODES"),
        (Granularity::All, TargetKind::Relationship) => out.push_str("ALL RELATIONSHIPS"),
    }
    out.push('\n');
    match &def.condition {
        Some(Condition::Expr(e)) => {
            out.push_str("WHEN ");
            out.push_str(&print_expr(e));
            out.push('\n');
        }
        Some(Condition::Pipeline(stages)) => {
            out.push_str("WHEN ");
            out.push_str(&print_stages(stages));
            out.push('\n');
        }
        None => {}
    }
    out.push_str("BEGIN\n");
    out.push_str(&print_stages(&def.statement.stages));
    out.push_str("\nEND");
    out
}

fn violation(
    def: &TriggerDefinition,
    code: ViolationCode,
    message: impl Into<String>,
) -> ValidationError {
    ValidationError {
        trigger: def.name.clone(),
        code,
        message: message.into(),
    }
}

/// Checks a definition against the semantic rules and the set of already
/// installed trigger names.
pub fn validate_trigger(
    def: &TriggerDefinition,
    existing: &BTreeSet<String>,
) -> Result<(), ValidationError> {
    if existing.contains(&def.name) {
        return Err(violation(
            def,
            ViolationCode::DuplicateName,
            "a trigger with this name is already installed",
        ));
    }
    match (def.event, &def.property) {
        (EventKind::Set | EventKind::Remove, None) => {
            return Err(violation(
                def,
                ViolationCode::TargetLabelEvent,
                "SET and REMOVE events must target a property; label mutations cannot be monitored",
            ));
        }
        (EventKind::Create | EventKind::Delete, Some(_)) => {
            return Err(violation(
                def,
                ViolationCode::TargetLabelEvent,
                "CREATE and DELETE events target a label, not a property",
            ));
        }
        _ => {}
    }
    let mut seen_kinds = BTreeSet::new();
    let mut seen_names: BTreeSet<&str> = TransitionKind::ALL
        .iter()
        .map(|k| k.canonical())
        .collect();
    for (kind, alias) in &def.aliases {
        if !seen_kinds.insert(kind.canonical()) {
            return Err(violation(
                def,
                ViolationCode::TransitionCoherence,
                format!("transition variable {} is aliased twice", kind.canonical()),
            ));
        }
        if !seen_names.insert(alias.as_str()) {
            return Err(violation(
                def,
                ViolationCode::TransitionCoherence,
                format!("alias '{alias}' collides with another transition name"),
            ));
        }
        check_transition_use(def, *kind)?;
    }
    let mut referenced = Vec::new();
    for s in &def.statement.stages {
        stage_vars(s, &mut referenced);
    }
    match &def.condition {
        Some(Condition::Expr(e)) => expr_vars(e, &mut referenced),
        Some(Condition::Pipeline(stages)) => {
            for s in stages {
                stage_vars(s, &mut referenced);
            }
        }
        None => {}
    }
    for name in &referenced {
        if let Some(kind) = TransitionKind::from_name(name) {
            check_transition_use(def, kind)?;
        }
    }
    check_label_mutation(def, &def.statement.stages)?;
    if def.time == ActionTime::Before {
        let mut new_names: BTreeSet<String> = TransitionKind::ALL
            .iter()
            .filter(|k| k.is_new_side())
            .map(|k| k.canonical().to_string())
            .collect();
        for (kind, alias) in &def.aliases {
            if kind.is_new_side() {
                new_names.insert(alias.clone());
            }
        }
        check_before_action(def, &def.statement.stages, &new_names)?;
    }
    Ok(())
}

/// One transition variable checked against the trigger's event, granularity
/// and item kind.
fn check_transition_use(
    def: &TriggerDefinition,
    kind: TransitionKind,
) -> Result<(), ValidationError> {
    let name = kind.canonical();
    if kind.granularity() != def.granularity {
        return Err(violation(
            def,
            ViolationCode::TransitionCoherence,
            format!(
                "{name} requires FOR {} granularity",
                match kind.granularity() {
                    Granularity::Each => "EACH",
                    Granularity::All => "ALL",
                }
            ),
        ));
    }
    if let Some(t) = kind.target_kind() {
        if t != def.target {
            return Err(violation(
                def,
                ViolationCode::TransitionCoherence,
                format!("{name} does not match the trigger's item kind"),
            ));
        }
    }
    if kind.is_new_side() && def.event == EventKind::Delete {
        return Err(violation(
            def,
            ViolationCode::TransitionCoherence,
            format!("{name} is not defined for DELETE events"),
        ));
    }
    if !kind.is_new_side() && def.event == EventKind::Create {
        return Err(violation(
            def,
            ViolationCode::TransitionCoherence,
            format!("{name} is not defined for CREATE events"),
        ));
    }
    Ok(())
}

/// The action must not assign or remove the trigger's own target label.
fn check_label_mutation(
    def: &TriggerDefinition,
    stages: &[Stage],
) -> Result<(), ValidationError> {
    for stage in stages {
        match stage {
            Stage::SetItems(items) => {
                for item in items {
                    if let SetItem::Label { label, .. } = item {
                        if *label == def.label {
                            return Err(violation(
                                def,
                                ViolationCode::TargetLabelInStatement,
                                format!("action assigns the monitored label '{}'", def.label),
                            ));
                        }
                    }
                }
            }
            Stage::RemoveItems(items) => {
                for item in items {
                    if let RemoveItem::Label { label, .. } = item {
                        if *label == def.label {
                            return Err(violation(
                                def,
                                ViolationCode::TargetLabelInStatement,
                                format!("action removes the monitored label '{}'", def.label),
                            ));
                        }
                    }
                }
            }
            Stage::Foreach { body, .. } | Stage::Then(body) => {
                check_label_mutation(def, body)?;
            }
            _ => {}
        }
    }
    Ok(())
}

/// BEFORE actions may only adjust properties of the incoming transition
/// items; the graph itself is not yet changed when they run.
fn check_before_action(
    def: &TriggerDefinition,
    stages: &[Stage],
    new_names: &BTreeSet<String>,
) -> Result<(), ValidationError> {
    let reject = |what: &str| {
        Err(violation(
            def,
            ViolationCode::BeforeRestriction,
            format!("BEFORE action cannot {what}"),
        ))
    };
    for stage in stages {
        match stage {
            Stage::Match(_)
            | Stage::Where(_)
            | Stage::With(_)
            | Stage::OrderLimit { .. }
            | Stage::Return(_) => {}
            Stage::Create(_) => return reject("create graph items"),
            Stage::Delete { .. } => return reject("delete graph items"),
            Stage::SetItems(items) => {
                for item in items {
                    match item {
                        SetItem::Property { var, .. } if new_names.contains(var) => {}
                        SetItem::Property { var, .. } => {
                            return reject(&format!(
                                "set properties of '{var}'; only the incoming items may change"
                            ));
                        }
                        SetItem::Label { .. } => return reject("assign labels"),
                    }
                }
            }
            Stage::RemoveItems(items) => {
                for item in items {
                    match item {
                        RemoveItem::Property { var, .. } if new_names.contains(var) => {}
                        RemoveItem::Property { var, .. } => {
                            return reject(&format!(
                                "remove properties of '{var}'; only the incoming items may change"
                            ));
                        }
                        RemoveItem::Label { .. } => return reject("remove labels"),
                    }
                }
            }
            Stage::Foreach { var, list, body } => {
                let mut inner = new_names.clone();
                if let Expr::Var(source) = list {
                    if new_names.contains(source) {
                        inner.insert(var.clone());
                    }
                }
                check_before_action(def, body, &inner)?;
            }
            Stage::Then(body) => check_before_action(def, body, new_names)?,
        }
    }
    Ok(())
}
