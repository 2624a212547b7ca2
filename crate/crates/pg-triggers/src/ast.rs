//! Statement AST for the query subset, plus the canonical printer.
//!
//! A statement is a pipeline of stages. The printer emits a normalized
//! single-spaced layout; parsing the printed text yields a structurally
//! equal AST, which the round-trip tests rely on.

use std::fmt::Write;

use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Out,
    In,
    Undirected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodePattern {
    pub var: Option<String>,
    pub labels: Vec<String>,
    pub props: Vec<(String, Expr)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelPattern {
    pub var: Option<String>,
    pub rel_type: Option<String>,
    pub direction: Direction,
    pub props: Vec<(String, Expr)>,
}

/// A linear path: a start node and zero or more hops.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPattern {
    pub start: NodePattern,
    pub hops: Vec<(RelPattern, NodePattern)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Eq => "=",
            BinOp::Ne => "<>",
            BinOp::Lt => "<",
            BinOp::Gt => ">",
            BinOp::Le => "<=",
            BinOp::Ge => ">=",
            BinOp::And => "AND",
            BinOp::Or => "OR",
        }
    }

    pub fn precedence(&self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div => 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(Value),
    Var(String),
    /// `var.key` property access.
    Prop(String, String),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    /// `EXISTS (pattern)`.
    ExistsPattern(Box<PathPattern>),
    /// `EXISTS { read-only pipeline }`.
    ExistsBlock(Vec<Stage>),
    /// `COUNT(expr)`, distinct non-null operands.
    Count(Box<Expr>),
    /// `COUNT(*)`, rows in the group.
    CountStar,
    /// `DATETIME()`, the injected clock.
    DateTimeNow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WithItem {
    pub expr: Expr,
    pub alias: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SetItem {
    Property {
        var: String,
        key: String,
        value: Expr,
    },
    Label {
        var: String,
        label: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum RemoveItem {
    Property { var: String, key: String },
    Label { var: String, label: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    Match(Vec<PathPattern>),
    Where(Expr),
    With(Vec<WithItem>),
    OrderLimit {
        keys: Vec<(Expr, bool)>,
        limit: Option<i64>,
    },
    Create(Vec<PathPattern>),
    Delete {
        detach: bool,
        vars: Vec<String>,
    },
    SetItems(Vec<SetItem>),
    RemoveItems(Vec<RemoveItem>),
    Foreach {
        var: String,
        list: Expr,
        body: Vec<Stage>,
    },
    /// Conditional block: runs its body over the surviving rows.
    Then(Vec<Stage>),
    Return(Vec<WithItem>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statement {
    pub stages: Vec<Stage>,
}

impl Statement {
    pub fn is_read_only(&self) -> bool {
        stages_read_only(&self.stages)
    }
}

fn stages_read_only(stages: &[Stage]) -> bool {
    stages.iter().all(|s| match s {
        Stage::Match(_)
        | Stage::Where(_)
        | Stage::With(_)
        | Stage::OrderLimit { .. }
        | Stage::Return(_) => true,
        Stage::Then(body) => stages_read_only(body),
        _ => false,
    })
}

// ---------------------------------------------------------------------------
// Printing

pub fn print_statement(stmt: &Statement) -> String {
    print_stages(&stmt.stages)
}

pub fn print_stages(stages: &[Stage]) -> String {
    stages.iter().map(print_stage).collect::<Vec<_>>().join("\n")
}

pub fn print_stage(stage: &Stage) -> String {
    match stage {
        Stage::Match(patterns) => format!("MATCH {}", print_patterns(patterns)),
        Stage::Where(e) => format!("WHERE {}", print_expr(e)),
        Stage::With(items) => format!("WITH {}", print_with_items(items)),
        Stage::OrderLimit { keys, limit } => {
            let mut s = String::new();
            if !keys.is_empty() {
                s.push_str("ORDER BY ");
                let parts: Vec<String> = keys
                    .iter()
                    .map(|(e, asc)| {
                        format!("{}{}", print_expr(e), if *asc { "" } else { " DESC" })
                    })
                    .collect();
                s.push_str(&parts.join(", "));
            }
            if let Some(n) = limit {
                if !s.is_empty() {
                    s.push(' ');
                }
                write!(s, "LIMIT {n}").unwrap();
            }
            s
        }
        Stage::Create(patterns) => format!("CREATE {}", print_patterns(patterns)),
        Stage::Delete { detach, vars } => format!(
            "{}DELETE {}",
            if *detach { "DETACH " } else { "" },
            vars.join(", ")
        ),
        Stage::SetItems(items) => {
            let parts: Vec<String> = items
                .iter()
                .map(|item| match item {
                    SetItem::Property { var, key, value } => {
                        format!("{var}.{key} = {}", print_expr(value))
                    }
                    SetItem::Label { var, label } => format!("{var}:{label}"),
                })
                .collect();
            format!("SET {}", parts.join(", "))
        }
        Stage::RemoveItems(items) => {
            let parts: Vec<String> = items
                .iter()
                .map(|item| match item {
                    RemoveItem::Property { var, key } => format!("{var}.{key}"),
                    RemoveItem::Label { var, label } => format!("{var}:{label}"),
                })
                .collect();
            format!("REMOVE {}", parts.join(", "))
        }
        Stage::Foreach { var, list, body } => format!(
            "FOREACH ({var} IN {}) BEGIN\n{}\nEND",
            print_expr(list),
            print_stages(body)
        ),
        Stage::Then(body) => format!("THEN BEGIN\n{}\nEND", print_stages(body)),
        Stage::Return(items) => format!("RETURN {}", print_with_items(items)),
    }
}

fn print_with_items(items: &[WithItem]) -> String {
    items
        .iter()
        .map(|item| match &item.alias {
            Some(a) => format!("{} AS {a}", print_expr(&item.expr)),
            None => print_expr(&item.expr),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn print_patterns(patterns: &[PathPattern]) -> String {
    patterns
        .iter()
        .map(print_path)
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn print_path(p: &PathPattern) -> String {
    let mut s = print_node_pattern(&p.start);
    for (rel, node) in &p.hops {
        s.push_str(&print_rel_pattern(rel));
        s.push_str(&print_node_pattern(node));
    }
    s
}

pub fn print_node_pattern(n: &NodePattern) -> String {
    let mut s = String::from("(");
    if let Some(v) = &n.var {
        s.push_str(v);
    }
    for l in &n.labels {
        write!(s, ":{l}").unwrap();
    }
    if !n.props.is_empty() {
        s.push_str(&print_prop_map(&n.props));
    }
    s.push(')');
    s
}

pub fn print_rel_pattern(r: &RelPattern) -> String {
    let mut inner = String::new();
    if let Some(v) = &r.var {
        inner.push_str(v);
    }
    if let Some(t) = &r.rel_type {
        write!(inner, ":{t}").unwrap();
    }
    if !r.props.is_empty() {
        inner.push_str(&print_prop_map(&r.props));
    }
    match r.direction {
        Direction::Out => format!("-[{inner}]->"),
        Direction::In => format!("<-[{inner}]-"),
        Direction::Undirected => format!("-[{inner}]-"),
    }
}

fn print_prop_map(props: &[(String, Expr)]) -> String {
    let parts: Vec<String> = props
        .iter()
        .map(|(k, v)| format!("{k}: {}", print_expr(v)))
        .collect();
    format!("{{{}}}", parts.join(", "))
}

pub fn print_expr(e: &Expr) -> String {
    print_expr_prec(e, 0)
}

fn print_expr_prec(e: &Expr, parent: u8) -> String {
    match e {
        Expr::Literal(v) => v.to_string(),
        Expr::Var(v) => v.clone(),
        Expr::Prop(v, k) => format!("{v}.{k}"),
        Expr::Binary(op, l, r) => {
            let prec = op.precedence();
            let text = format!(
                "{} {} {}",
                print_expr_prec(l, prec),
                op.symbol(),
                print_expr_prec(r, prec + 1)
            );
            if prec < parent {
                format!("({text})")
            } else {
                text
            }
        }
        Expr::Not(x) => format!("NOT {}", print_expr_prec(x, 3)),
        Expr::ExistsPattern(p) => format!("EXISTS {}", print_path(p)),
        Expr::ExistsBlock(stages) => format!("EXISTS {{ {} }}", print_stages(stages)),
        Expr::Count(x) => format!("COUNT({})", print_expr(x)),
        Expr::CountStar => "COUNT(*)".to_string(),
        Expr::DateTimeNow => "DATETIME()".to_string(),
    }
}

/// Variable names referenced anywhere in an expression (value or label
/// position is the caller's concern; this walks value positions).
pub fn expr_vars(e: &Expr, out: &mut Vec<String>) {
    match e {
        Expr::Literal(_) | Expr::CountStar | Expr::DateTimeNow => {}
        Expr::Var(v) => out.push(v.clone()),
        Expr::Prop(v, _) => out.push(v.clone()),
        Expr::Binary(_, l, r) => {
            expr_vars(l, out);
            expr_vars(r, out);
        }
        Expr::Not(x) | Expr::Count(x) => expr_vars(x, out),
        Expr::ExistsPattern(p) => path_vars(p, out),
        Expr::ExistsBlock(stages) => {
            for s in stages {
                stage_vars(s, out);
            }
        }
    }
}

/// Variable and label-position names referenced by a path pattern.
pub fn path_vars(p: &PathPattern, out: &mut Vec<String>) {
    fn node(n: &NodePattern, out: &mut Vec<String>) {
        if let Some(v) = &n.var {
            out.push(v.clone());
        }
        for l in &n.labels {
            out.push(l.clone());
        }
        for (_, e) in &n.props {
            expr_vars(e, out);
        }
    }
    node(&p.start, out);
    for (rel, n) in &p.hops {
        if let Some(v) = &rel.var {
            out.push(v.clone());
        }
        if let Some(t) = &rel.rel_type {
            out.push(t.clone());
        }
        for (_, e) in &rel.props {
            expr_vars(e, out);
        }
        node(n, out);
    }
}

/// All names referenced by a stage (variables, labels, aliases excluded).
pub fn stage_vars(s: &Stage, out: &mut Vec<String>) {
    match s {
        Stage::Match(ps) | Stage::Create(ps) => {
            for p in ps {
                path_vars(p, out);
            }
        }
        Stage::Where(e) => expr_vars(e, out),
        Stage::With(items) | Stage::Return(items) => {
            for item in items {
                expr_vars(&item.expr, out);
            }
        }
        Stage::OrderLimit { keys, .. } => {
            for (e, _) in keys {
                expr_vars(e, out);
            }
        }
        Stage::Delete { vars, .. } => out.extend(vars.iter().cloned()),
        Stage::SetItems(items) => {
            for item in items {
                match item {
                    SetItem::Property { var, value, .. } => {
                        out.push(var.clone());
                        expr_vars(value, out);
                    }
                    SetItem::Label { var, .. } => out.push(var.clone()),
                }
            }
        }
        Stage::RemoveItems(items) => {
            for item in items {
                match item {
                    RemoveItem::Property { var, .. } | RemoveItem::Label { var, .. } => {
                        out.push(var.clone())
                    }
                }
            }
        }
        Stage::Foreach { list, body, .. } => {
            expr_vars(list, out);
            for s in body {
                stage_vars(s, out);
            }
        }
        Stage::Then(body) => {
            for s in body {
                stage_vars(s, out);
            }
        }
    }
}
