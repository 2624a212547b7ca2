//! Structural rewriting shared by the transpilation backends.
//!
//! The passes are deterministic. Transition variables unify with the item
//! variable bound by the backend prelude; paths that only re-assert bound
//! items are pruned or trimmed; declared label hierarchies expand into
//! explicit Isa hops; THEN blocks and FOREACH loops over transition items
//! lower to per-item FOREACH wrappers; WITH clauses carry exactly the names
//! that later clauses, the firing condition, or the action still use.

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::{
    Direction, Expr, NodePattern, PathPattern, RelPattern, RemoveItem, SetItem, Stage, WithItem,
};
use crate::ddl::{Condition, TargetKind, TransitionKind, TriggerDefinition};
use crate::value::Value;

/// Pipeline stage after rewriting, ready for backend rendering.
#[derive(Debug, Clone)]
pub(super) enum RStage {
    Match(Vec<PathPattern>),
    Where(Expr),
    With { items: Vec<WithItem>, carry: Vec<String> },
    OrderLimit { keys: Vec<(Expr, bool)>, limit: Option<i64> },
    Update(Stage),
    Wrapped { loop_var: String, stage: Stage },
}

/// How string literals print in the emitted text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum Quote {
    Single,
    EscapedDouble,
}

pub(super) struct Rewriter<'a> {
    def: &'a TriggerDefinition,
    hierarchies: &'a [(String, String)],
    pub item: String,
    old_value: Option<String>,
    new_value: Option<Expr>,
    trans_names: BTreeSet<String>,
    old_names: BTreeSet<String>,
    new_names: BTreeSet<String>,
    renames: BTreeMap<String, String>,
    pub bound: BTreeSet<String>,
    pub lifted: Vec<(String, String)>,
}

impl<'a> Rewriter<'a> {
    pub fn new(
        def: &'a TriggerDefinition,
        hierarchies: &'a [(String, String)],
        item: &str,
        prelude_bound: &[&str],
        old_value: Option<&str>,
        new_value: Option<Expr>,
    ) -> Self {
        let mut trans_names = BTreeSet::new();
        let mut old_names = BTreeSet::new();
        let mut new_names = BTreeSet::new();
        for kind in TransitionKind::ALL {
            let name = def.transition_name(kind);
            for n in [kind.canonical().to_string(), name] {
                trans_names.insert(n.clone());
                if kind.is_new_side() {
                    new_names.insert(n);
                } else {
                    old_names.insert(n);
                }
            }
        }
        Rewriter {
            def,
            hierarchies,
            item: item.to_string(),
            old_value: old_value.map(str::to_string),
            new_value,
            trans_names,
            old_names,
            new_names,
            renames: BTreeMap::new(),
            bound: prelude_bound.iter().map(|s| s.to_string()).collect(),
            lifted: Vec::new(),
        }
    }

    fn is_transition_name(&self, name: &str) -> bool {
        self.trans_names.contains(name)
    }

    fn subst_name(&self, name: &str) -> String {
        if self.is_transition_name(name) {
            self.item.clone()
        } else if let Some(to) = self.renames.get(name) {
            to.clone()
        } else {
            name.to_string()
        }
    }

    /// The declared supertype to splice in for a node carrying `labels`,
    /// with the labels the node itself keeps.
    fn split_for_labels(&self, labels: &[String]) -> (Vec<String>, Option<String>) {
        for (sub, sup) in self.hierarchies {
            if labels.iter().any(|l| l == sub) {
                let kept = labels.iter().filter(|l| *l != sup).cloned().collect();
                return (kept, Some(sup.clone()));
            }
        }
        (labels.to_vec(), None)
    }

    /// The supertype spliced in when the item itself continues along a path.
    fn item_split(&self) -> Option<String> {
        if self.def.target != TargetKind::Node {
            return None;
        }
        self.hierarchies
            .iter()
            .find(|(sub, _)| *sub == self.def.label)
            .map(|(_, sup)| sup.clone())
    }

    pub fn subst_expr(&mut self, e: &Expr) -> Expr {
        match e {
            Expr::Literal(_) | Expr::CountStar | Expr::DateTimeNow => e.clone(),
            Expr::Var(v) => Expr::Var(self.subst_name(v)),
            Expr::Prop(v, k) => {
                let targeted = self.def.property.as_deref() == Some(k.as_str());
                if self.old_names.contains(v) {
                    if targeted {
                        if let Some(ov) = &self.old_value {
                            return Expr::Var(ov.clone());
                        }
                    }
                    Expr::Prop(self.item.clone(), k.clone())
                } else if self.new_names.contains(v) {
                    if targeted {
                        if let Some(nv) = &self.new_value {
                            return nv.clone();
                        }
                    }
                    Expr::Prop(self.item.clone(), k.clone())
                } else {
                    Expr::Prop(self.subst_name(v), k.clone())
                }
            }
            Expr::Binary(op, l, r) => Expr::Binary(
                *op,
                Box::new(self.subst_expr(l)),
                Box::new(self.subst_expr(r)),
            ),
            Expr::Not(x) => Expr::Not(Box::new(self.subst_expr(x))),
            Expr::Count(x) => Expr::Count(Box::new(self.subst_expr(x))),
            Expr::ExistsPattern(p) => {
                let rewritten = self
                    .rewrite_path(p, false, false)
                    .expect("unpruned path always survives");
                Expr::ExistsPattern(Box::new(rewritten))
            }
            Expr::ExistsBlock(stages) => {
                Expr::ExistsBlock(stages.iter().map(|s| self.subst_plain_stage(s)).collect())
            }
        }
    }

    /// Substitution for stages kept verbatim (EXISTS bodies, update clauses).
    fn subst_plain_stage(&mut self, s: &Stage) -> Stage {
        match s {
            Stage::Match(paths) => Stage::Match(
                paths
                    .iter()
                    .filter_map(|p| self.rewrite_path(p, false, false))
                    .collect(),
            ),
            Stage::Where(e) => Stage::Where(self.subst_expr(e)),
            Stage::With(items) => Stage::With(self.subst_items(items)),
            Stage::Return(items) => Stage::Return(self.subst_items(items)),
            Stage::OrderLimit { keys, limit } => Stage::OrderLimit {
                keys: keys
                    .iter()
                    .map(|(e, asc)| (self.subst_expr(e), *asc))
                    .collect(),
                limit: *limit,
            },
            Stage::Create(paths) => Stage::Create(paths.iter().map(|p| self.subst_create_path(p)).collect()),
            Stage::Delete { detach, vars } => Stage::Delete {
                detach: *detach,
                vars: vars.iter().map(|v| self.subst_name(v)).collect(),
            },
            Stage::SetItems(items) => Stage::SetItems(
                items
                    .iter()
                    .map(|item| match item {
                        SetItem::Property { var, key, value } => SetItem::Property {
                            var: self.subst_name(var),
                            key: key.clone(),
                            value: self.subst_expr(value),
                        },
                        SetItem::Label { var, label } => SetItem::Label {
                            var: self.subst_name(var),
                            label: label.clone(),
                        },
                    })
                    .collect(),
            ),
            Stage::RemoveItems(items) => Stage::RemoveItems(
                items
                    .iter()
                    .map(|item| match item {
                        RemoveItem::Property { var, key } => RemoveItem::Property {
                            var: self.subst_name(var),
                            key: key.clone(),
                        },
                        RemoveItem::Label { var, label } => RemoveItem::Label {
                            var: self.subst_name(var),
                            label: label.clone(),
                        },
                    })
                    .collect(),
            ),
            Stage::Foreach { var, list, body } => Stage::Foreach {
                var: var.clone(),
                list: self.subst_expr(list),
                body: body.iter().map(|b| self.subst_plain_stage(b)).collect(),
            },
            Stage::Then(body) => {
                Stage::Then(body.iter().map(|b| self.subst_plain_stage(b)).collect())
            }
        }
    }

    fn subst_items(&mut self, items: &[WithItem]) -> Vec<WithItem> {
        items
            .iter()
            .map(|i| WithItem {
                expr: self.subst_expr(&i.expr),
                alias: i.alias.clone(),
            })
            .collect()
    }

    /// CREATE paths keep their shape; only names substitute.
    fn subst_create_path(&mut self, p: &PathPattern) -> PathPattern {
        let start = self.subst_create_node(&p.start);
        let mut hops = Vec::with_capacity(p.hops.len());
        for (r, n) in &p.hops {
            let rel = RelPattern {
                var: r.var.as_ref().map(|v| self.subst_name(v)),
                rel_type: r.rel_type.clone(),
                direction: r.direction,
                props: r
                    .props
                    .iter()
                    .map(|(k, e)| (k.clone(), self.subst_expr(e)))
                    .collect(),
            };
            hops.push((rel, self.subst_create_node(n)));
        }
        PathPattern { start, hops }
    }

    fn subst_create_node(&mut self, n: &NodePattern) -> NodePattern {
        NodePattern {
            var: n.var.as_ref().map(|v| self.subst_name(v)),
            labels: n.labels.clone(),
            props: n
                .props
                .iter()
                .map(|(k, e)| (k.clone(), self.subst_expr(e)))
                .collect(),
        }
    }

    /// One match path through unification, pruning, trimming, hierarchy
    /// splitting, and optional literal lifting. `None` means pruned.
    fn rewrite_path(&mut self, path: &PathPattern, allow_prune: bool, lift: bool) -> Option<PathPattern> {
        struct PNode {
            var: Option<String>,
            labels: Vec<String>,
            props: Vec<(String, Expr)>,
            anchored: bool,
        }
        let process = |rw: &mut Self, n: &NodePattern| -> PNode {
            let mut var = n.var.as_ref().map(|v| rw.subst_name(v));
            let mut anchored = var.as_deref() == Some(rw.item.as_str());
            let mut labels = Vec::new();
            for l in &n.labels {
                if rw.is_transition_name(l) {
                    anchored = true;
                } else {
                    labels.push(l.clone());
                }
            }
            if anchored {
                if let Some(orig) = &n.var {
                    if !rw.is_transition_name(orig) && *orig != rw.item {
                        rw.renames.insert(orig.clone(), rw.item.clone());
                    }
                }
                var = Some(rw.item.clone());
            }
            let props = n
                .props
                .iter()
                .map(|(k, e)| (k.clone(), rw.subst_expr(e)))
                .collect();
            PNode {
                var,
                labels,
                props,
                anchored,
            }
        };
        let mut nodes = vec![process(self, &path.start)];
        let mut rels = Vec::new();
        for (r, n) in &path.hops {
            rels.push(RelPattern {
                var: r.var.as_ref().map(|v| self.subst_name(v)),
                rel_type: r.rel_type.clone(),
                direction: r.direction,
                props: r
                    .props
                    .iter()
                    .map(|(k, e)| (k.clone(), self.subst_expr(e)))
                    .collect(),
            });
            nodes.push(process(self, n));
        }

        let is_bound = |rw: &Self, v: &Option<String>| {
            v.as_ref()
                .is_some_and(|v| *v == rw.item || rw.bound.contains(v))
        };
        // drop leading hops that only re-link already bound items
        while !rels.is_empty()
            && is_bound(self, &nodes[0].var)
            && nodes[0].props.is_empty()
            && rels[0].var.is_none()
            && rels[0].props.is_empty()
            && is_bound(self, &nodes[1].var)
            && nodes[1].labels.is_empty()
            && nodes[1].props.is_empty()
        {
            nodes.remove(0);
            rels.remove(0);
        }
        if allow_prune && is_bound(self, &nodes[0].var) {
            let introduces_new = nodes
                .iter()
                .map(|n| &n.var)
                .chain(rels.iter().map(|r| &r.var))
                .flatten()
                .any(|v| *v != self.item && !self.bound.contains(v));
            if !introduces_new {
                return None;
            }
        }

        // final label resolution, hierarchy splits, signatures, lifting
        let mut pieces: Vec<(Option<RelPattern>, NodePattern)> = Vec::new();
        let last = nodes.len() - 1;
        for (idx, pn) in nodes.into_iter().enumerate() {
            let incoming = if idx == 0 {
                None
            } else {
                Some(rels[idx - 1].clone())
            };
            let continues = idx < last;
            let (labels, split) = if pn.anchored {
                let split = if continues { self.item_split() } else { None };
                let kept = pn
                    .labels
                    .into_iter()
                    .filter(|l| {
                        *l != self.def.label
                            && !self.hierarchies.iter().any(|(s, p)| l == s || l == p)
                    })
                    .collect();
                (kept, split)
            } else if continues {
                self.split_for_labels(&pn.labels)
            } else {
                (pn.labels, None)
            };
            if let Some(v) = &pn.var {
                self.bound.insert(v.clone());
            }
            let props = if lift {
                self.lift_props(pn.props)
            } else {
                pn.props
            };
            pieces.push((
                incoming,
                NodePattern {
                    var: pn.var,
                    labels,
                    props,
                },
            ));
            if let Some(sup) = split {
                pieces.push((
                    Some(RelPattern {
                        var: None,
                        rel_type: Some("Isa".to_string()),
                        direction: Direction::Undirected,
                        props: Vec::new(),
                    }),
                    NodePattern {
                        var: None,
                        labels: vec![sup],
                        props: Vec::new(),
                    },
                ));
            }
        }
        for r in &rels {
            if let Some(v) = &r.var {
                self.bound.insert(v.clone());
            }
        }
        let mut iter = pieces.into_iter();
        let (_, start) = iter.next().expect("paths have at least one node");
        let hops = iter
            .map(|(r, n)| (r.expect("hop nodes follow a relationship"), n))
            .collect();
        Some(PathPattern { start, hops })
    }

    /// Text literals in match property maps become `$Name` parameters.
    fn lift_props(&mut self, props: Vec<(String, Expr)>) -> Vec<(String, Expr)> {
        props
            .into_iter()
            .map(|(k, e)| {
                if let Expr::Literal(Value::Text(s)) = &e {
                    let name = self.lift_name(s);
                    (k, Expr::Var(format!("${name}")))
                } else {
                    (k, e)
                }
            })
            .collect()
    }

    fn lift_name(&mut self, text: &str) -> String {
        if let Some((name, _)) = self.lifted.iter().find(|(_, t)| t == text) {
            return name.clone();
        }
        let safe = text.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            && text.chars().next().is_some_and(|c| c.is_ascii_alphabetic());
        let name = if safe {
            text.to_string()
        } else {
            format!("p{}", self.lifted.len() + 1)
        };
        self.lifted.push((name.clone(), text.to_string()));
        name
    }

    /// Rewrites a stage list. `wrap` names the loop variable for update
    /// clauses lowered out of a THEN or FOREACH context.
    pub fn rewrite(&mut self, stages: &[Stage], wrap: Option<&str>, lift: bool) -> Vec<RStage> {
        let mut out = Vec::new();
        for stage in stages {
            match stage {
                Stage::Match(paths) => {
                    let kept: Vec<PathPattern> = paths
                        .iter()
                        .filter_map(|p| self.rewrite_path(p, true, lift))
                        .collect();
                    if !kept.is_empty() {
                        out.push(RStage::Match(kept));
                    }
                }
                Stage::Where(e) => out.push(RStage::Where(self.subst_expr(e))),
                Stage::With(items) => {
                    let items = self.subst_items(items);
                    for item in &items {
                        self.bound.insert(output_name(item));
                    }
                    out.push(RStage::With {
                        items,
                        carry: Vec::new(),
                    });
                }
                Stage::OrderLimit { keys, limit } => out.push(RStage::OrderLimit {
                    keys: keys
                        .iter()
                        .map(|(e, asc)| (self.subst_expr(e), *asc))
                        .collect(),
                    limit: *limit,
                }),
                Stage::Then(body) => out.extend(self.rewrite(body, Some(wrap.unwrap_or("pat")), lift)),
                Stage::Foreach { var, list, body } => {
                    let list = self.subst_expr(list);
                    if matches!(&list, Expr::Var(v) if *v == self.item) {
                        self.renames.insert(var.clone(), self.item.clone());
                        out.extend(self.rewrite(body, Some(var), lift));
                    } else {
                        let body = body.iter().map(|b| self.subst_plain_stage(b)).collect();
                        out.push(RStage::Update(Stage::Foreach {
                            var: var.clone(),
                            list,
                            body,
                        }));
                    }
                }
                s @ (Stage::Create(_)
                | Stage::Delete { .. }
                | Stage::SetItems(_)
                | Stage::RemoveItems(_)) => {
                    let st = self.subst_plain_stage(s);
                    if let Stage::Create(paths) = &st {
                        for p in paths {
                            collect_path_vars(p, &mut self.bound);
                        }
                    }
                    match wrap {
                        Some(lv) => out.push(RStage::Wrapped {
                            loop_var: lv.to_string(),
                            stage: rename_in_stage(st, &self.item, lv),
                        }),
                        None => out.push(RStage::Update(st)),
                    }
                }
                Stage::Return(items) => out.push(RStage::Update(Stage::Return(self.subst_items(items)))),
            }
        }
        out
    }
}

fn output_name(item: &WithItem) -> String {
    if let Some(a) = &item.alias {
        a.clone()
    } else if let Expr::Var(v) = &item.expr {
        v.clone()
    } else {
        crate::ast::print_expr(&item.expr)
    }
}

fn collect_path_vars(p: &PathPattern, out: &mut BTreeSet<String>) {
    if let Some(v) = &p.start.var {
        out.insert(v.clone());
    }
    for (r, n) in &p.hops {
        if let Some(v) = &r.var {
            out.insert(v.clone());
        }
        if let Some(v) = &n.var {
            out.insert(v.clone());
        }
    }
}

/// Renames every occurrence of `from` (variable positions only) to `to`.
fn rename_in_stage(s: Stage, from: &str, to: &str) -> Stage {
    let rn = |v: String| if v == from { to.to_string() } else { v };
    let re = |e: Expr| rename_in_expr(e, from, to);
    match s {
        Stage::Create(paths) => Stage::Create(
            paths
                .into_iter()
                .map(|p| rename_in_path(p, from, to))
                .collect(),
        ),
        Stage::Delete { detach, vars } => Stage::Delete {
            detach,
            vars: vars.into_iter().map(rn).collect(),
        },
        Stage::SetItems(items) => Stage::SetItems(
            items
                .into_iter()
                .map(|i| match i {
                    SetItem::Property { var, key, value } => SetItem::Property {
                        var: rn(var),
                        key,
                        value: re(value),
                    },
                    SetItem::Label { var, label } => SetItem::Label { var: rn(var), label },
                })
                .collect(),
        ),
        Stage::RemoveItems(items) => Stage::RemoveItems(
            items
                .into_iter()
                .map(|i| match i {
                    RemoveItem::Property { var, key } => RemoveItem::Property { var: rn(var), key },
                    RemoveItem::Label { var, label } => RemoveItem::Label { var: rn(var), label },
                })
                .collect(),
        ),
        other => other,
    }
}

fn rename_in_expr(e: Expr, from: &str, to: &str) -> Expr {
    match e {
        Expr::Var(v) if v == from => Expr::Var(to.to_string()),
        Expr::Prop(v, k) if v == from => Expr::Prop(to.to_string(), k),
        Expr::Binary(op, l, r) => Expr::Binary(
            op,
            Box::new(rename_in_expr(*l, from, to)),
            Box::new(rename_in_expr(*r, from, to)),
        ),
        Expr::Not(x) => Expr::Not(Box::new(rename_in_expr(*x, from, to))),
        Expr::Count(x) => Expr::Count(Box::new(rename_in_expr(*x, from, to))),
        other => other,
    }
}

fn rename_in_path(p: PathPattern, from: &str, to: &str) -> PathPattern {
    let rn_node = |n: NodePattern| NodePattern {
        var: n.var.map(|v| if v == from { to.to_string() } else { v }),
        labels: n.labels,
        props: n
            .props
            .into_iter()
            .map(|(k, e)| (k, rename_in_expr(e, from, to)))
            .collect(),
    };
    PathPattern {
        start: rn_node(p.start),
        hops: p
            .hops
            .into_iter()
            .map(|(r, n)| {
                (
                    RelPattern {
                        var: r.var.map(|v| if v == from { to.to_string() } else { v }),
                        ..r
                    },
                    rn_node(n),
                )
            })
            .collect(),
    }
}

fn expr_has_aggregate(e: &Expr) -> bool {
    match e {
        Expr::Count(_) | Expr::CountStar => true,
        Expr::Binary(_, l, r) => expr_has_aggregate(l) || expr_has_aggregate(r),
        Expr::Not(x) => expr_has_aggregate(x),
        _ => false,
    }
}

fn has_aggregate_items(items: &[WithItem]) -> bool {
    items.iter().any(|i| expr_has_aggregate(&i.expr))
}

/// Moves property accesses out of the final condition into the last
/// aggregating WITH under deterministic `<var>_<prop>` aliases.
pub(super) fn hoist_where_props(stages: &mut [RStage], expr: &mut Expr) {
    let Some(idx) = stages
        .iter()
        .rposition(|s| matches!(s, RStage::With { items, .. } if has_aggregate_items(items)))
    else {
        return;
    };
    let mut hoists: Vec<(String, String, String)> = Vec::new();
    replace_props(expr, &mut hoists);
    if let RStage::With { items, .. } = &mut stages[idx] {
        for (v, k, alias) in hoists {
            items.push(WithItem {
                expr: Expr::Prop(v, k),
                alias: Some(alias),
            });
        }
    }
}

fn replace_props(e: &mut Expr, hoists: &mut Vec<(String, String, String)>) {
    match e {
        Expr::Prop(v, k) => {
            let alias = format!("{v}_{k}");
            if !hoists.iter().any(|(_, _, a)| *a == alias) {
                hoists.push((v.clone(), k.clone(), alias.clone()));
            }
            *e = Expr::Var(alias);
        }
        Expr::Binary(_, l, r) => {
            replace_props(l, hoists);
            replace_props(r, hoists);
        }
        Expr::Not(x) | Expr::Count(x) => replace_props(x, hoists),
        _ => {}
    }
}

/// Names a stage references, in reading order; labels, relationship types,
/// lifted `$` parameters, and wrapper loop variables are not names.
fn rstage_names(s: &RStage, out: &mut Vec<String>) {
    match s {
        RStage::Match(paths) => {
            for p in paths {
                path_names(p, out);
            }
        }
        RStage::Where(e) => expr_names(e, out),
        RStage::With { items, carry } => {
            for i in items {
                expr_names(&i.expr, out);
            }
            out.extend(carry.iter().cloned());
        }
        RStage::OrderLimit { keys, .. } => {
            for (e, _) in keys {
                expr_names(e, out);
            }
        }
        RStage::Update(stage) => plain_stage_names(stage, out),
        RStage::Wrapped { loop_var, stage } => {
            let mut inner = Vec::new();
            plain_stage_names(stage, &mut inner);
            out.extend(inner.into_iter().filter(|n| n != loop_var));
        }
    }
}

fn path_names(p: &PathPattern, out: &mut Vec<String>) {
    let node = |n: &NodePattern, out: &mut Vec<String>| {
        if let Some(v) = &n.var {
            out.push(v.clone());
        }
        for (_, e) in &n.props {
            expr_names(e, out);
        }
    };
    node(&p.start, out);
    for (r, n) in &p.hops {
        if let Some(v) = &r.var {
            out.push(v.clone());
        }
        for (_, e) in &r.props {
            expr_names(e, out);
        }
        node(n, out);
    }
}

fn expr_names(e: &Expr, out: &mut Vec<String>) {
    match e {
        Expr::Literal(_) | Expr::CountStar | Expr::DateTimeNow => {}
        Expr::Var(v) | Expr::Prop(v, _) => {
            if !v.starts_with('$') {
                out.push(v.clone());
            }
        }
        Expr::Binary(_, l, r) => {
            expr_names(l, out);
            expr_names(r, out);
        }
        Expr::Not(x) | Expr::Count(x) => expr_names(x, out),
        Expr::ExistsPattern(p) => path_names(p, out),
        Expr::ExistsBlock(stages) => {
            for s in stages {
                plain_stage_names(s, out);
            }
        }
    }
}

fn plain_stage_names(s: &Stage, out: &mut Vec<String>) {
    match s {
        Stage::Match(ps) | Stage::Create(ps) => {
            for p in ps {
                path_names(p, out);
            }
        }
        Stage::Where(e) => expr_names(e, out),
        Stage::With(items) | Stage::Return(items) => {
            for i in items {
                expr_names(&i.expr, out);
            }
        }
        Stage::OrderLimit { keys, .. } => {
            for (e, _) in keys {
                expr_names(e, out);
            }
        }
        Stage::Delete { vars, .. } => out.extend(vars.iter().cloned()),
        Stage::SetItems(items) => {
            for i in items {
                match i {
                    SetItem::Property { var, value, .. } => {
                        out.push(var.clone());
                        expr_names(value, out);
                    }
                    SetItem::Label { var, .. } => out.push(var.clone()),
                }
            }
        }
        Stage::RemoveItems(items) => {
            for i in items {
                match i {
                    RemoveItem::Property { var, .. } | RemoveItem::Label { var, .. } => {
                        out.push(var.clone())
                    }
                }
            }
        }
        Stage::Foreach { list, body, var } => {
            expr_names(list, out);
            let mut inner = Vec::new();
            for s in body {
                plain_stage_names(s, &mut inner);
            }
            out.extend(inner.into_iter().filter(|n| n != var));
        }
        Stage::Then(body) => {
            for s in body {
                plain_stage_names(s, out);
            }
        }
    }
}

fn add_bindings(s: &RStage, bound: &mut BTreeSet<String>) {
    match s {
        RStage::Match(paths) => {
            for p in paths {
                collect_path_vars(p, bound);
            }
        }
        RStage::With { items, .. } => {
            for i in items {
                bound.insert(output_name(i));
            }
        }
        RStage::Update(Stage::Create(paths)) => {
            for p in paths {
                collect_path_vars(p, bound);
            }
        }
        _ => {}
    }
}

/// Fills each WITH's carry list with the in-scope names that later stages or
/// the trailing references still use; the item variable leads.
pub(super) fn fill_carries(
    stages: &mut [RStage],
    trailing: &[String],
    item: &str,
    initially_bound: &BTreeSet<String>,
) {
    let mut bound = initially_bound.clone();
    let mut bound_before = Vec::with_capacity(stages.len());
    for s in stages.iter() {
        bound_before.push(bound.clone());
        add_bindings(s, &mut bound);
    }
    for i in (0..stages.len()).rev() {
        if !matches!(stages[i], RStage::With { .. }) {
            continue;
        }
        let mut names = Vec::new();
        for s in &stages[i + 1..] {
            rstage_names(s, &mut names);
        }
        names.extend(trailing.iter().cloned());
        let RStage::With { items, carry } = &mut stages[i] else {
            unreachable!()
        };
        let outputs: BTreeSet<String> = items.iter().map(output_name).collect();
        let mut seen = BTreeSet::new();
        let mut picked = Vec::new();
        for n in names {
            if n.starts_with('$')
                || !bound_before[i].contains(&n)
                || outputs.contains(&n)
                || !seen.insert(n.clone())
            {
                continue;
            }
            picked.push(n);
        }
        if let Some(pos) = picked.iter().position(|n| n == item) {
            let it = picked.remove(pos);
            picked.insert(0, it);
        }
        *carry = picked;
    }
}

/// Drops match variables bound in a stage but never referenced afterwards,
/// leaving the pattern position anonymous. Already-bound variables stay: a
/// repeated variable is a join constraint, not a binding.
pub(super) fn anonymize_unused(
    stages: &mut [RStage],
    trailing: &[String],
    item: &str,
    initially_bound: &BTreeSet<String>,
) {
    let mut bound = initially_bound.clone();
    let mut bound_before = Vec::with_capacity(stages.len());
    for s in stages.iter() {
        bound_before.push(bound.clone());
        add_bindings(s, &mut bound);
    }
    for i in 0..stages.len() {
        if !matches!(stages[i], RStage::Match(_)) {
            continue;
        }
        let mut later = Vec::new();
        for s in &stages[i + 1..] {
            rstage_names(s, &mut later);
        }
        later.extend(trailing.iter().cloned());
        let later: BTreeSet<String> = later.into_iter().collect();
        let RStage::Match(paths) = &mut stages[i] else {
            unreachable!()
        };
        let mut own = Vec::new();
        for p in paths.iter() {
            path_names(p, &mut own);
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for n in &own {
            *counts.entry(n.as_str()).or_insert(0) += 1;
        }
        let droppable = |v: &Option<String>| {
            v.as_ref().is_some_and(|name| {
                name != item
                    && !bound_before[i].contains(name)
                    && counts.get(name.as_str()).copied().unwrap_or(0) == 1
                    && !later.contains(name)
            })
        };
        for p in paths.iter_mut() {
            if droppable(&p.start.var) {
                p.start.var = None;
            }
            for (r, n) in p.hops.iter_mut() {
                if droppable(&r.var) {
                    r.var = None;
                }
                if droppable(&n.var) {
                    n.var = None;
                }
            }
        }
    }
}

/// Rewrites a trigger condition, separating a trailing WHERE into the
/// expression that joins the guard inside the backend's conditional.
pub(super) fn split_condition(
    rw: &mut Rewriter,
    condition: Option<&Condition>,
) -> (Vec<RStage>, Option<Expr>) {
    match condition {
        None => (Vec::new(), None),
        Some(Condition::Expr(e)) => (Vec::new(), Some(rw.subst_expr(e))),
        Some(Condition::Pipeline(stages)) => {
            let mut rs = rw.rewrite(stages, None, false);
            let expr = if matches!(rs.last(), Some(RStage::Where(_))) {
                match rs.pop() {
                    Some(RStage::Where(e)) => Some(e),
                    _ => unreachable!(),
                }
            } else {
                None
            };
            (rs, expr)
        }
    }
}

/// Free names a rewritten pipeline takes from the enclosing scope, item
/// variable first, then in first-reference order.
pub(super) fn free_names(stages: &[RStage], outer: &BTreeSet<String>, item: &str) -> Vec<String> {
    let mut names = Vec::new();
    for s in stages {
        rstage_names(s, &mut names);
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for n in names {
        if !n.starts_with('$') && outer.contains(&n) && seen.insert(n.clone()) {
            out.push(n);
        }
    }
    if let Some(pos) = out.iter().position(|n| n == item) {
        let it = out.remove(pos);
        out.insert(0, it);
    }
    out
}

/// All names a rewritten pipeline references, in order, duplicates kept.
pub(super) fn all_names(stages: &[RStage]) -> Vec<String> {
    let mut names = Vec::new();
    for s in stages {
        rstage_names(s, &mut names);
    }
    names
}

pub(super) fn expr_names_of(e: &Expr) -> Vec<String> {
    let mut out = Vec::new();
    expr_names(e, &mut out);
    out
}

// ---------------------------------------------------------------------------
// rendering

pub(super) fn render_stages(stages: &[RStage], item: &str, q: Quote) -> Vec<String> {
    let mut lines: Vec<String> = Vec::new();
    let mut i = 0;
    while i < stages.len() {
        match &stages[i] {
            RStage::Match(paths) => {
                let ps: Vec<String> = paths.iter().map(|p| render_path(p, q)).collect();
                lines.push(format!("MATCH {}", ps.join(", ")));
            }
            RStage::Where(e) => lines.push(format!("WHERE {}", render_expr(e, q))),
            RStage::With { items, carry } => {
                let mut parts: Vec<String> = items.iter().map(|it| render_with_item(it, q)).collect();
                parts.extend(carry.iter().cloned());
                let mut line = format!("WITH {}", parts.join(", "));
                if let Some(RStage::OrderLimit { keys, limit }) = stages.get(i + 1) {
                    line.push_str(&render_order_limit(keys, *limit, q));
                    i += 1;
                }
                lines.push(line);
            }
            RStage::OrderLimit { keys, limit } => {
                let tail = render_order_limit(keys, *limit, q);
                match lines.last_mut() {
                    Some(prev) => prev.push_str(&tail),
                    None => lines.push(tail.trim_start().to_string()),
                }
            }
            RStage::Update(s) => lines.push(render_plain_stage(s, q)),
            RStage::Wrapped { loop_var, stage } => lines.push(format!(
                "FOREACH ({loop_var} IN [{item}] | {})",
                render_plain_stage(stage, q)
            )),
        }
        i += 1;
    }
    lines
}

fn render_order_limit(keys: &[(Expr, bool)], limit: Option<i64>, q: Quote) -> String {
    let mut s = String::new();
    if !keys.is_empty() {
        let parts: Vec<String> = keys
            .iter()
            .map(|(e, asc)| format!("{} {}", render_expr(e, q), if *asc { "ASC" } else { "DESC" }))
            .collect();
        s.push_str(&format!(" ORDER BY {}", parts.join(", ")));
    }
    if let Some(n) = limit {
        s.push_str(&format!(" LIMIT {n}"));
    }
    s
}

fn render_with_item(item: &WithItem, q: Quote) -> String {
    match &item.alias {
        Some(a) => format!("{} AS {a}", render_expr(&item.expr, q)),
        None => render_expr(&item.expr, q),
    }
}

pub(super) fn render_plain_stage(s: &Stage, q: Quote) -> String {
    match s {
        Stage::Match(ps) => {
            let parts: Vec<String> = ps.iter().map(|p| render_path(p, q)).collect();
            format!("MATCH {}", parts.join(", "))
        }
        Stage::Where(e) => format!("WHERE {}", render_expr(e, q)),
        Stage::With(items) => {
            let parts: Vec<String> = items.iter().map(|i| render_with_item(i, q)).collect();
            format!("WITH {}", parts.join(", "))
        }
        Stage::Return(items) => {
            let parts: Vec<String> = items.iter().map(|i| render_with_item(i, q)).collect();
            format!("RETURN {}", parts.join(", "))
        }
        Stage::OrderLimit { keys, limit } => render_order_limit(keys, *limit, q).trim_start().to_string(),
        Stage::Create(ps) => {
            let parts: Vec<String> = ps.iter().map(|p| render_path(p, q)).collect();
            format!("CREATE {}", parts.join(", "))
        }
        Stage::Delete { detach, vars } => format!(
            "{}DELETE {}",
            if *detach { "DETACH " } else { "" },
            vars.join(", ")
        ),
        Stage::SetItems(items) => {
            let parts: Vec<String> = items
                .iter()
                .map(|i| match i {
                    SetItem::Property { var, key, value } => {
                        format!("{var}.{key} = {}", render_expr(value, q))
                    }
                    SetItem::Label { var, label } => format!("{var}:{label}"),
                })
                .collect();
            format!("SET {}", parts.join(", "))
        }
        Stage::RemoveItems(items) => {
            let parts: Vec<String> = items
                .iter()
                .map(|i| match i {
                    RemoveItem::Property { var, key } => format!("{var}.{key}"),
                    RemoveItem::Label { var, label } => format!("{var}:{label}"),
                })
                .collect();
            format!("REMOVE {}", parts.join(", "))
        }
        Stage::Foreach { var, list, body } => {
            let inner: Vec<String> = body.iter().map(|b| render_plain_stage(b, q)).collect();
            format!(
                "FOREACH ({var} IN {} | {})",
                render_expr(list, q),
                inner.join(" ")
            )
        }
        Stage::Then(body) => {
            let inner: Vec<String> = body.iter().map(|b| render_plain_stage(b, q)).collect();
            inner.join(" ")
        }
    }
}

pub(super) fn render_path(p: &PathPattern, q: Quote) -> String {
    let mut s = render_node(&p.start, q);
    for (r, n) in &p.hops {
        s.push_str(&render_rel(r, q));
        s.push_str(&render_node(n, q));
    }
    s
}

fn render_node(n: &NodePattern, q: Quote) -> String {
    let mut s = String::from("(");
    if let Some(v) = &n.var {
        s.push_str(v);
    }
    for l in &n.labels {
        s.push(':');
        s.push_str(l);
    }
    if !n.props.is_empty() {
        s.push_str(&render_prop_map(&n.props, q));
    }
    s.push(')');
    s
}

fn render_rel(r: &RelPattern, q: Quote) -> String {
    let mut inner = String::new();
    if let Some(v) = &r.var {
        inner.push_str(v);
    }
    if let Some(t) = &r.rel_type {
        inner.push(':');
        inner.push_str(t);
    }
    if !r.props.is_empty() {
        inner.push_str(&render_prop_map(&r.props, q));
    }
    match r.direction {
        Direction::Out => format!("-[{inner}]->"),
        Direction::In => format!("<-[{inner}]-"),
        Direction::Undirected => format!("-[{inner}]-"),
    }
}

fn render_prop_map(props: &[(String, Expr)], q: Quote) -> String {
    let parts: Vec<String> = props
        .iter()
        .map(|(k, e)| format!("{k}: {}", render_expr(e, q)))
        .collect();
    format!(" {{{}}}", parts.join(", "))
}

pub(super) fn render_expr(e: &Expr, q: Quote) -> String {
    render_expr_prec(e, q, 0)
}

fn render_expr_prec(e: &Expr, q: Quote, parent: u8) -> String {
    match e {
        Expr::Literal(v) => render_value(v, q),
        Expr::Var(v) => v.clone(),
        Expr::Prop(v, k) => format!("{v}.{k}"),
        Expr::Binary(op, l, r) => {
            let prec = op.precedence();
            let text = format!(
                "{} {} {}",
                render_expr_prec(l, q, prec),
                op.symbol(),
                render_expr_prec(r, q, prec + 1)
            );
            if prec < parent {
                format!("({text})")
            } else {
                text
            }
        }
        Expr::Not(x) => format!("NOT {}", render_expr_prec(x, q, 3)),
        Expr::ExistsPattern(p) => format!("EXISTS({})", render_path(p, q)),
        Expr::ExistsBlock(stages) => {
            let inner: Vec<String> = stages.iter().map(|s| render_plain_stage(s, q)).collect();
            format!("EXISTS {{ {} }}", inner.join(" "))
        }
        Expr::Count(x) => format!("COUNT({})", render_expr(x, q)),
        Expr::CountStar => "COUNT(*)".to_string(),
        Expr::DateTimeNow => "DATETIME()".to_string(),
    }
}

fn render_value(v: &Value, q: Quote) -> String {
    match v {
        Value::Text(s) => match q {
            Quote::Single => format!("'{}'", s.replace('\\', "\\\\").replace('\'', "\\'")),
            Quote::EscapedDouble => format!("\\\"{}\\\"", s.replace('"', "\\\"")),
        },
        other => other.to_string(),
    }
}
