//! Recursive-descent parser for the query subset.
//!
//! Stages begin with their keyword; `MATCH p1, MATCH p2` opens a fresh MATCH
//! stage at the repeated keyword (fresh relationship-uniqueness scope), while
//! a comma without the keyword extends the current stage. `FOREACH` accepts
//! both `FOREACH (x IN xs) BEGIN ... END` and `FOREACH (x IN xs | ...)`.

use crate::ast::*;
use crate::error::ParseError;
use crate::lexer::{lex, Tok, Token};
use crate::value::Value;

pub struct Cursor {
    toks: Vec<Token>,
    pos: usize,
}

impl Cursor {
    pub fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Cursor {
            toks: lex(src)?,
            pos: 0,
        })
    }

    pub fn from_tokens(toks: Vec<Token>) -> Self {
        Cursor { toks, pos: 0 }
    }

    pub fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    pub fn peek_at(&self, offset: usize) -> Option<&Token> {
        self.toks.get(self.pos + offset)
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub fn next(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    pub fn error_here(&self, message: impl Into<String>) -> ParseError {
        match self.peek() {
            Some(t) => ParseError::new(t.line, t.col, message),
            None => {
                let (line, col) = self
                    .toks
                    .last()
                    .map_or((1, 1), |t| (t.line, t.col + 1));
                ParseError::new(line, col, message)
            }
        }
    }

    pub fn eat_kw(&mut self, kw: &str) -> bool {
        if self.peek().is_some_and(|t| t.is_kw(kw)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.error_here(format!(
                "expected {kw}, found {}",
                self.peek().map_or("end of input".into(), Token::describe)
            )))
        }
    }

    pub fn eat_sym(&mut self, sym: &str) -> bool {
        if self.peek().is_some_and(|t| t.is_sym(sym)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn expect_sym(&mut self, sym: &str) -> Result<(), ParseError> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            Err(self.error_here(format!(
                "expected '{sym}', found {}",
                self.peek().map_or("end of input".into(), Token::describe)
            )))
        }
    }

    pub fn expect_ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Token {
                tok: Tok::Ident(s), ..
            }) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error_here(format!(
                "expected {what}, found {}",
                self.peek().map_or("end of input".into(), Token::describe)
            ))),
        }
    }

    pub fn expect_string(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Token { tok: Tok::Str(s), .. }) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error_here(format!(
                "expected {what}, found {}",
                self.peek().map_or("end of input".into(), Token::describe)
            ))),
        }
    }

    pub fn expect_int(&mut self, what: &str) -> Result<i64, ParseError> {
        match self.peek() {
            Some(Token { tok: Tok::Int(n), .. }) => {
                let n = *n;
                self.pos += 1;
                Ok(n)
            }
            _ => Err(self.error_here(format!("expected {what}"))),
        }
    }
}

const STAGE_KEYWORDS: &[&str] = &[
    "MATCH", "WHERE", "WITH", "ORDER", "LIMIT", "CREATE", "MERGE", "DELETE", "DETACH", "SET",
    "REMOVE", "FOREACH", "THEN", "RETURN",
];

const UNSUPPORTED: &[&str] = &["UNWIND", "CALL", "OPTIONAL", "UNION", "SKIP", "YIELD", "CASE"];

/// Parses a full statement from source text.
pub fn parse_statement(src: &str) -> Result<Statement, ParseError> {
    let mut c = Cursor::new(src)?;
    let stages = parse_stages(&mut c, &[])?;
    if !c.at_end() {
        return Err(c.error_here("unexpected trailing input"));
    }
    if stages.is_empty() {
        return Err(c.error_here("empty statement"));
    }
    Ok(Statement { stages })
}

/// Parses stages until end of input or one of `stop` keywords (left
/// unconsumed).
pub fn parse_stages(c: &mut Cursor, stop: &[&str]) -> Result<Vec<Stage>, ParseError> {
    let mut stages = Vec::new();
    loop {
        if c.at_end() || c.peek().is_some_and(|t| stop.iter().any(|k| t.is_kw(k))) {
            break;
        }
        // a bare ')' or '}' at clause position closes an enclosing block
        if c.peek().is_some_and(|t| t.is_sym(")") || t.is_sym("}")) {
            break;
        }
        stages.push(parse_stage(c, stop)?);
    }
    Ok(stages)
}

fn parse_stage(c: &mut Cursor, stop: &[&str]) -> Result<Stage, ParseError> {
    if let Some(t) = c.peek() {
        if let Some(kw) = UNSUPPORTED.iter().find(|k| t.is_kw(k)) {
            return Err(c.error_here(format!("unsupported construct: {kw}")));
        }
    }
    if c.eat_kw("MATCH") {
        return Ok(Stage::Match(parse_pattern_list(c)?));
    }
    if c.eat_kw("WHERE") {
        return Ok(Stage::Where(parse_expr(c)?));
    }
    if c.eat_kw("WITH") {
        return Ok(Stage::With(parse_with_items(c)?));
    }
    if c.peek().is_some_and(|t| t.is_kw("ORDER")) || c.peek().is_some_and(|t| t.is_kw("LIMIT")) {
        return parse_order_limit(c);
    }
    if c.eat_kw("CREATE") || c.eat_kw("MERGE") {
        return Ok(Stage::Create(parse_pattern_list(c)?));
    }
    if c.eat_kw("DETACH") {
        c.expect_kw("DELETE")?;
        return Ok(Stage::Delete {
            detach: true,
            vars: parse_var_list(c)?,
        });
    }
    if c.eat_kw("DELETE") {
        return Ok(Stage::Delete {
            detach: false,
            vars: parse_var_list(c)?,
        });
    }
    if c.eat_kw("SET") {
        return parse_set(c);
    }
    if c.eat_kw("REMOVE") {
        return parse_remove(c);
    }
    if c.eat_kw("FOREACH") {
        return parse_foreach(c);
    }
    if c.eat_kw("THEN") {
        return parse_then(c, stop);
    }
    if c.eat_kw("RETURN") {
        return Ok(Stage::Return(parse_with_items(c)?));
    }
    Err(c.error_here(format!(
        "expected a clause keyword, found {}",
        c.peek().map_or("end of input".into(), Token::describe)
    )))
}

/// Patterns separated by commas. A comma followed by the MATCH keyword ends
/// the list: the repeated keyword opens a new stage.
fn parse_pattern_list(c: &mut Cursor) -> Result<Vec<PathPattern>, ParseError> {
    let mut patterns = vec![parse_path(c)?];
    while c.peek().is_some_and(|t| t.is_sym(",")) {
        if c.peek_at(1).is_some_and(|t| t.is_kw("MATCH") || t.is_kw("CREATE")) {
            c.next();
            break;
        }
        c.next();
        patterns.push(parse_path(c)?);
    }
    Ok(patterns)
}

pub fn parse_path(c: &mut Cursor) -> Result<PathPattern, ParseError> {
    let start = parse_node_pattern(c)?;
    let mut hops = Vec::new();
    while c.peek().is_some_and(|t| t.is_sym("-") || t.is_sym("<-")) {
        let rel = parse_rel_pattern(c)?;
        let node = parse_node_pattern(c)?;
        hops.push((rel, node));
    }
    Ok(PathPattern { start, hops })
}

fn parse_node_pattern(c: &mut Cursor) -> Result<NodePattern, ParseError> {
    c.expect_sym("(")?;
    let mut var = None;
    if let Some(Token {
        tok: Tok::Ident(_), ..
    }) = c.peek()
    {
        var = Some(c.expect_ident("variable")?);
    }
    let mut labels = Vec::new();
    while c.eat_sym(":") {
        labels.push(c.expect_ident("label")?);
    }
    let mut props = Vec::new();
    if c.peek().is_some_and(|t| t.is_sym("{")) {
        props = parse_prop_map(c)?;
    }
    c.expect_sym(")")?;
    Ok(NodePattern { var, labels, props })
}

fn parse_rel_pattern(c: &mut Cursor) -> Result<RelPattern, ParseError> {
    let incoming = if c.eat_sym("<-") {
        true
    } else {
        c.expect_sym("-")?;
        false
    };
    let mut var = None;
    let mut rel_type = None;
    let mut props = Vec::new();
    if c.eat_sym("[") {
        if let Some(Token {
            tok: Tok::Ident(_), ..
        }) = c.peek()
        {
            var = Some(c.expect_ident("variable")?);
        }
        if c.eat_sym(":") {
            rel_type = Some(c.expect_ident("relationship type")?);
        }
        if c.peek().is_some_and(|t| t.is_sym("{")) {
            props = parse_prop_map(c)?;
        }
        c.expect_sym("]")?;
    }
    let direction = if incoming {
        c.expect_sym("-")?;
        Direction::In
    } else if c.eat_sym("->") {
        Direction::Out
    } else {
        c.expect_sym("-")?;
        Direction::Undirected
    };
    Ok(RelPattern {
        var,
        rel_type,
        direction,
        props,
    })
}

fn parse_prop_map(c: &mut Cursor) -> Result<Vec<(String, Expr)>, ParseError> {
    c.expect_sym("{")?;
    let mut props = Vec::new();
    if !c.peek().is_some_and(|t| t.is_sym("}")) {
        loop {
            let key = match c.peek() {
                Some(Token { tok: Tok::Str(_), .. }) => c.expect_string("property key")?,
                _ => c.expect_ident("property key")?,
            };
            c.expect_sym(":")?;
            let value = parse_expr(c)?;
            props.push((key, value));
            if !c.eat_sym(",") {
                break;
            }
        }
    }
    c.expect_sym("}")?;
    Ok(props)
}

fn parse_var_list(c: &mut Cursor) -> Result<Vec<String>, ParseError> {
    let mut vars = vec![c.expect_ident("variable")?];
    while c.eat_sym(",") {
        vars.push(c.expect_ident("variable")?);
    }
    Ok(vars)
}

fn parse_with_items(c: &mut Cursor) -> Result<Vec<WithItem>, ParseError> {
    let mut items = Vec::new();
    loop {
        let expr = parse_expr(c)?;
        let alias = if c.eat_kw("AS") {
            Some(c.expect_ident("alias")?)
        } else {
            None
        };
        items.push(WithItem { expr, alias });
        if !c.eat_sym(",") {
            break;
        }
    }
    Ok(items)
}

fn parse_order_limit(c: &mut Cursor) -> Result<Stage, ParseError> {
    let mut keys = Vec::new();
    if c.eat_kw("ORDER") {
        c.expect_kw("BY")?;
        loop {
            let e = parse_expr(c)?;
            let asc = if c.eat_kw("DESC") {
                false
            } else {
                c.eat_kw("ASC");
                true
            };
            keys.push((e, asc));
            if !c.eat_sym(",") {
                break;
            }
        }
    }
    let limit = if c.eat_kw("LIMIT") {
        Some(c.expect_int("limit")?)
    } else {
        None
    };
    Ok(Stage::OrderLimit { keys, limit })
}

fn parse_set(c: &mut Cursor) -> Result<Stage, ParseError> {
    let mut items = Vec::new();
    loop {
        let var = c.expect_ident("variable")?;
        if c.eat_sym(".") {
            let key = c.expect_ident("property key")?;
            c.expect_sym("=")?;
            let value = parse_expr(c)?;
            items.push(SetItem::Property { var, key, value });
        } else {
            c.expect_sym(":")?;
            let label = c.expect_ident("label")?;
            items.push(SetItem::Label { var, label });
        }
        if !c.eat_sym(",") {
            break;
        }
    }
    Ok(Stage::SetItems(items))
}

fn parse_remove(c: &mut Cursor) -> Result<Stage, ParseError> {
    let mut items = Vec::new();
    loop {
        let var = c.expect_ident("variable")?;
        if c.eat_sym(".") {
            let key = c.expect_ident("property key")?;
            items.push(RemoveItem::Property { var, key });
        } else {
            c.expect_sym(":")?;
            let label = c.expect_ident("label")?;
            items.push(RemoveItem::Label { var, label });
        }
        if !c.eat_sym(",") {
            break;
        }
    }
    Ok(Stage::RemoveItems(items))
}

fn parse_foreach(c: &mut Cursor) -> Result<Stage, ParseError> {
    c.expect_sym("(")?;
    let var = c.expect_ident("loop variable")?;
    c.expect_kw("IN")?;
    let list = parse_expr(c)?;
    if c.eat_sym("|") {
        let body = parse_stages(c, &[])?;
        // the ')' terminates the clause list
        return if c.eat_sym(")") {
            Ok(Stage::Foreach { var, list, body })
        } else {
            Err(c.error_here("expected ')' closing FOREACH"))
        };
    }
    c.expect_sym(")")?;
    c.expect_kw("BEGIN")?;
    let body = parse_stages(c, &["END"])?;
    c.expect_kw("END")?;
    Ok(Stage::Foreach { var, list, body })
}

fn parse_then(c: &mut Cursor, stop: &[&str]) -> Result<Stage, ParseError> {
    if c.eat_kw("BEGIN") {
        let body = parse_stages(c, &["END"])?;
        c.expect_kw("END")?;
        return Ok(Stage::Then(body));
    }
    // THEN followed by a single clause (typically FOREACH)
    let stage = parse_stage(c, stop)?;
    Ok(Stage::Then(vec![stage]))
}

// ---------------------------------------------------------------------------
// Expressions

pub fn parse_expr(c: &mut Cursor) -> Result<Expr, ParseError> {
    parse_or(c)
}

fn parse_or(c: &mut Cursor) -> Result<Expr, ParseError> {
    let mut left = parse_and(c)?;
    while c.eat_kw("OR") {
        let right = parse_and(c)?;
        left = Expr::Binary(BinOp::Or, Box::new(left), Box::new(right));
    }
    Ok(left)
}

fn parse_and(c: &mut Cursor) -> Result<Expr, ParseError> {
    let mut left = parse_not(c)?;
    while c.eat_kw("AND") {
        let right = parse_not(c)?;
        left = Expr::Binary(BinOp::And, Box::new(left), Box::new(right));
    }
    Ok(left)
}

fn parse_not(c: &mut Cursor) -> Result<Expr, ParseError> {
    if c.eat_kw("NOT") {
        let inner = parse_not(c)?;
        return Ok(Expr::Not(Box::new(inner)));
    }
    parse_comparison(c)
}

fn parse_comparison(c: &mut Cursor) -> Result<Expr, ParseError> {
    let left = parse_additive(c)?;
    let op = if c.eat_sym("<=") {
        BinOp::Le
    } else if c.eat_sym(">=") {
        BinOp::Ge
    } else if c.eat_sym("<>") {
        BinOp::Ne
    } else if c.eat_sym("=") {
        BinOp::Eq
    } else if c.eat_sym("<") {
        BinOp::Lt
    } else if c.eat_sym(">") {
        BinOp::Gt
    } else {
        return Ok(left);
    };
    let right = parse_additive(c)?;
    Ok(Expr::Binary(op, Box::new(left), Box::new(right)))
}

fn parse_additive(c: &mut Cursor) -> Result<Expr, ParseError> {
    let mut left = parse_multiplicative(c)?;
    loop {
        if c.eat_sym("+") {
            let right = parse_multiplicative(c)?;
            left = Expr::Binary(BinOp::Add, Box::new(left), Box::new(right));
        } else if c.peek().is_some_and(|t| t.is_sym("-"))
            && !c.peek_at(1).is_some_and(|t| t.is_sym("[") || t.is_sym("("))
        {
            c.next();
            let right = parse_multiplicative(c)?;
            left = Expr::Binary(BinOp::Sub, Box::new(left), Box::new(right));
        } else {
            return Ok(left);
        }
    }
}

fn parse_multiplicative(c: &mut Cursor) -> Result<Expr, ParseError> {
    let mut left = parse_unary(c)?;
    loop {
        if c.eat_sym("*") {
            let right = parse_unary(c)?;
            left = Expr::Binary(BinOp::Mul, Box::new(left), Box::new(right));
        } else if c.eat_sym("/") {
            let right = parse_unary(c)?;
            left = Expr::Binary(BinOp::Div, Box::new(left), Box::new(right));
        } else {
            return Ok(left);
        }
    }
}

fn parse_unary(c: &mut Cursor) -> Result<Expr, ParseError> {
    if c.peek().is_some_and(|t| t.is_sym("-")) {
        c.next();
        return match c.peek().map(|t| t.tok.clone()) {
            Some(Tok::Int(n)) => {
                c.next();
                Ok(Expr::Literal(Value::Integer(-n)))
            }
            Some(Tok::Float(f)) => {
                c.next();
                Ok(Expr::Literal(Value::Float(-f)))
            }
            _ => Err(c.error_here("'-' is only supported on numeric literals")),
        };
    }
    parse_postfix(c)
}

fn parse_postfix(c: &mut Cursor) -> Result<Expr, ParseError> {
    let base = parse_primary(c)?;
    if c.peek().is_some_and(|t| t.is_sym("."))
        && c.peek_at(1)
            .is_some_and(|t| matches!(&t.tok, Tok::Ident(_)))
    {
        let Expr::Var(var) = base else {
            return Err(c.error_here("property access requires a variable base"));
        };
        c.next();
        let key = c.expect_ident("property key")?;
        return Ok(Expr::Prop(var, key));
    }
    Ok(base)
}

fn parse_primary(c: &mut Cursor) -> Result<Expr, ParseError> {
    let Some(t) = c.peek().cloned() else {
        return Err(c.error_here("expected an expression"));
    };
    match &t.tok {
        Tok::Int(n) => {
            c.next();
            Ok(Expr::Literal(Value::Integer(*n)))
        }
        Tok::Float(f) => {
            c.next();
            Ok(Expr::Literal(Value::Float(*f)))
        }
        Tok::Str(s) => {
            c.next();
            Ok(Expr::Literal(Value::Text(s.clone())))
        }
        Tok::Sym("(") => {
            c.next();
            let inner = parse_expr(c)?;
            c.expect_sym(")")?;
            Ok(inner)
        }
        Tok::Ident(name) => {
            if t.is_kw("TRUE") {
                c.next();
                return Ok(Expr::Literal(Value::Boolean(true)));
            }
            if t.is_kw("FALSE") {
                c.next();
                return Ok(Expr::Literal(Value::Boolean(false)));
            }
            if t.is_kw("NULL") {
                c.next();
                return Ok(Expr::Literal(Value::Null));
            }
            if t.is_kw("EXISTS") {
                c.next();
                return parse_exists(c);
            }
            if t.is_kw("COUNT") && c.peek_at(1).is_some_and(|t| t.is_sym("(")) {
                c.next();
                c.next();
                if c.eat_sym("*") {
                    c.expect_sym(")")?;
                    return Ok(Expr::CountStar);
                }
                let inner = parse_expr(c)?;
                c.expect_sym(")")?;
                return Ok(Expr::Count(Box::new(inner)));
            }
            if t.is_kw("DATETIME") && c.peek_at(1).is_some_and(|t| t.is_sym("(")) {
                c.next();
                c.next();
                c.expect_sym(")")?;
                return Ok(Expr::DateTimeNow);
            }
            let reserved = STAGE_KEYWORDS
                .iter()
                .chain(UNSUPPORTED)
                .chain(&["BEGIN", "END", "AS", "AND", "OR", "NOT", "IN"])
                .any(|k| t.is_kw(k));
            if reserved {
                return Err(c.error_here(format!(
                    "expected an expression, found keyword {}",
                    t.describe()
                )));
            }
            let name = name.clone();
            c.next();
            Ok(Expr::Var(name))
        }
        _ => Err(c.error_here(format!("expected an expression, found {}", t.describe()))),
    }
}

fn parse_exists(c: &mut Cursor) -> Result<Expr, ParseError> {
    if c.eat_sym("{") {
        let stages = parse_stages(c, &[])?;
        c.expect_sym("}")?;
        for s in &stages {
            ensure_read_only(c, s)?;
        }
        return Ok(Expr::ExistsBlock(stages));
    }
    if c.peek().is_some_and(|t| t.is_sym("(")) {
        let path = parse_path(c)?;
        return Ok(Expr::ExistsPattern(Box::new(path)));
    }
    Err(c.error_here("EXISTS expects a pattern or a { ... } block"))
}

fn ensure_read_only(c: &Cursor, s: &Stage) -> Result<(), ParseError> {
    match s {
        Stage::Match(_) | Stage::Where(_) | Stage::With(_) | Stage::OrderLimit { .. }
        | Stage::Return(_) => Ok(()),
        Stage::Then(body) => {
            for s in body {
                ensure_read_only(c, s)?;
            }
            Ok(())
        }
        _ => Err(c.error_here("only read clauses are allowed here")),
    }
}

/// Parses a read-only pipeline (used by WHEN conditions and assertions).
pub fn parse_read_pipeline(c: &mut Cursor, stop: &[&str]) -> Result<Vec<Stage>, ParseError> {
    let stages = parse_stages(c, stop)?;
    for s in &stages {
        ensure_read_only(c, s)?;
    }
    Ok(stages)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::print_statement;

    fn round_trip(src: &str) {
        let first = parse_statement(src).unwrap();
        let printed = print_statement(&first);
        let second = parse_statement(&printed)
            .unwrap_or_else(|e| panic!("printed form failed to reparse: {e}\n{printed}"));
        assert_eq!(first, second, "round trip changed the AST:\n{printed}");
    }

    #[test]
    fn test_parse_simple_create() {
        let stmt = parse_statement("CREATE (:Alert{time: DATETIME(), desc: 'x'})").unwrap();
        assert_eq!(stmt.stages.len(), 1);
        round_trip("CREATE (:Alert{time: DATETIME(), desc: 'x'})");
    }

    #[test]
    fn test_repeated_match_keyword_opens_new_stage() {
        let stmt = parse_statement(
            "MATCH (p:IcuPatient)-[:TreatedAt]-(h), MATCH (q:IcuPatient)-[:TreatedAt]-(h)",
        )
        .unwrap();
        assert_eq!(stmt.stages.len(), 2);
        let comma_joined =
            parse_statement("MATCH (p:IcuPatient)-[:TreatedAt]-(h), (q:IcuPatient)").unwrap();
        assert_eq!(comma_joined.stages.len(), 1);
    }

    #[test]
    fn test_parse_with_count_and_where() {
        let stmt = parse_statement(
            "MATCH (p:A) WITH COUNT(p) AS n, h WHERE n > h.icuBeds",
        )
        .unwrap();
        assert_eq!(stmt.stages.len(), 3);
        round_trip("MATCH (p:A) WITH COUNT(p) AS n, h WHERE n > h.icuBeds");
    }

    #[test]
    fn test_parse_foreach_both_forms() {
        let paper = parse_statement(
            "FOREACH (p IN pn) BEGIN MATCH (p)-[c:T]-(h) DELETE c END",
        )
        .unwrap();
        let cypher = parse_statement("FOREACH (p IN pn | MATCH (p)-[c:T]-(h) DELETE c)").unwrap();
        assert_eq!(paper, cypher);
        round_trip("FOREACH (p IN pn) BEGIN MATCH (p)-[c:T]-(h) DELETE c END");
    }

    #[test]
    fn test_parse_then_block() {
        let stmt = parse_statement(
            "MATCH (a:A) WHERE a.x > 1 THEN BEGIN MATCH (a)-[c:T]-(b) DELETE c CREATE (a)-[:U]->(b) END",
        )
        .unwrap();
        assert!(matches!(stmt.stages[2], Stage::Then(_)));
        round_trip(
            "MATCH (a:A) WHERE a.x > 1 THEN BEGIN MATCH (a)-[c:T]-(b) DELETE c CREATE (a)-[:U]->(b) END",
        );
    }

    #[test]
    fn test_parse_exists_pattern_and_block() {
        round_trip("MATCH (s:Sequence) WHERE EXISTS (s)-[:Risk]-(:CriticalEffect)");
        round_trip("MATCH (s:Sequence) WHERE EXISTS { MATCH (:CriticalEffect)-[:Risk]-(s) }");
    }

    #[test]
    fn test_parse_order_by_limit() {
        let stmt =
            parse_statement("MATCH (a)-[ct:C]-(b) WITH ct ORDER BY ct.distance LIMIT 1").unwrap();
        assert_eq!(stmt.stages.len(), 3);
        round_trip("MATCH (a)-[ct:C]-(b) WITH ct ORDER BY ct.distance DESC LIMIT 1");
    }

    #[test]
    fn test_parse_detach_delete_and_set() {
        round_trip("MATCH (a:A) DETACH DELETE a");
        round_trip("MATCH (a:A) SET a.x = a.y + 1, a:Extra");
        round_trip("MATCH (a:A) REMOVE a.x, a:Extra");
    }

    #[test]
    fn test_division_precedence() {
        let stmt = parse_statement("WHERE a / b > 0.1 AND c + d <= e").unwrap();
        let Stage::Where(e) = &stmt.stages[0] else {
            panic!()
        };
        let Expr::Binary(BinOp::And, l, _) = e else {
            panic!("AND should be outermost: {e:?}")
        };
        assert!(matches!(**l, Expr::Binary(BinOp::Gt, _, _)));
    }

    #[test]
    fn test_unsupported_construct_named_in_error() {
        let err = parse_statement("UNWIND xs AS x RETURN x").unwrap_err();
        assert!(err.message.contains("UNWIND"), "{err}");
    }

    #[test]
    fn test_error_position_points_at_offender() {
        let err = parse_statement("MATCH (a:A)\nWHERE >").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.col >= 7);
    }

    #[test]
    fn test_rel_pattern_directions() {
        round_trip("MATCH (a)-[r:T]->(b) RETURN r");
        round_trip("MATCH (a)<-[r:T]-(b) RETURN r");
        round_trip("MATCH (a)-[r:T]-(b) RETURN r");
        round_trip("MATCH (s:Sequence)-[NEW]-(l:Lineage) RETURN l");
    }

    #[test]
    fn test_merge_parses_as_create() {
        let merged = parse_statement("MERGE (a:A)").unwrap();
        let created = parse_statement("CREATE (a:A)").unwrap();
        assert_eq!(merged, created);
    }

    #[test]
    fn test_multiline_string_literal() {
        let stmt = parse_statement("CREATE (:Alert{desc: 'wrapped\n  text'})").unwrap();
        let Stage::Create(ps) = &stmt.stages[0] else {
            panic!()
        };
        let (_, expr) = &ps[0].start.props[0];
        assert!(matches!(expr, Expr::Literal(Value::Text(s)) if s.contains('\n')));
    }
}
