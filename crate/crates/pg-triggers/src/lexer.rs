//! Tokenizer shared by the statement parser, the trigger DDL parser, and the
//! token-stream comparator used to check transpiled output against reference
//! text.

use crate::error::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Str(String),
    Int(i64),
    Float(f64),
    /// `$name` parameter reference (appears in transpiled output).
    Param(String),
    Sym(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

impl Token {
    /// True when the token is this keyword (case-insensitive identifier).
    pub fn is_kw(&self, kw: &str) -> bool {
        matches!(&self.tok, Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    pub fn is_sym(&self, sym: &str) -> bool {
        matches!(&self.tok, Tok::Sym(s) if *s == sym)
    }

    pub fn describe(&self) -> String {
        match &self.tok {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Str(_) => "string literal".to_string(),
            Tok::Int(i) => format!("{i}"),
            Tok::Float(f) => format!("{f}"),
            Tok::Param(p) => format!("${p}"),
            Tok::Sym(s) => format!("'{s}'"),
        }
    }
}

const SYMBOLS: &[&str] = &[
    "<=", ">=", "<>", "->", "<-", "(", ")", "[", "]", "{", "}", ":", ",", ".", "|", ";", "+",
    "-", "*", "/", "=", "<", ">",
];

/// Tokenizes source text. `//` starts a line comment. Strings take single or
/// double quotes with `\\`, `\'`, `\"` escapes and may span lines.
pub fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    let mut line: u32 = 1;
    let mut col: u32 = 1;
    let bump = |c: char, line: &mut u32, col: &mut u32| {
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump(c, &mut line, &mut col);
            i += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
                col += 1;
            }
            continue;
        }
        let (tline, tcol) = (line, col);
        if c == '\'' || c == '"' {
            let quote = c;
            bump(c, &mut line, &mut col);
            i += 1;
            let mut s = String::new();
            loop {
                let Some(&ch) = chars.get(i) else {
                    return Err(ParseError::new(tline, tcol, "unterminated string"));
                };
                bump(ch, &mut line, &mut col);
                i += 1;
                if ch == quote {
                    break;
                }
                if ch == '\\' {
                    let Some(&esc) = chars.get(i) else {
                        return Err(ParseError::new(tline, tcol, "unterminated string"));
                    };
                    bump(esc, &mut line, &mut col);
                    i += 1;
                    match esc {
                        '\\' | '\'' | '"' => s.push(esc),
                        'n' => s.push('\n'),
                        other => {
                            return Err(ParseError::new(
                                line,
                                col,
                                format!("unknown escape '\\{other}'"),
                            ))
                        }
                    }
                } else {
                    s.push(ch);
                }
            }
            toks.push(Token {
                tok: Tok::Str(s),
                line: tline,
                col: tcol,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let mut text = String::new();
            while i < chars.len() && chars[i].is_ascii_digit() {
                text.push(chars[i]);
                bump(chars[i], &mut line, &mut col);
                i += 1;
            }
            let is_float = chars.get(i) == Some(&'.')
                && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit());
            if is_float {
                text.push('.');
                bump('.', &mut line, &mut col);
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    text.push(chars[i]);
                    bump(chars[i], &mut line, &mut col);
                    i += 1;
                }
                let f: f64 = text
                    .parse()
                    .map_err(|_| ParseError::new(tline, tcol, "malformed number"))?;
                toks.push(Token {
                    tok: Tok::Float(f),
                    line: tline,
                    col: tcol,
                });
            } else {
                let n: i64 = text
                    .parse()
                    .map_err(|_| ParseError::new(tline, tcol, "integer out of range"))?;
                toks.push(Token {
                    tok: Tok::Int(n),
                    line: tline,
                    col: tcol,
                });
            }
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let mut text = String::new();
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                text.push(chars[i]);
                bump(chars[i], &mut line, &mut col);
                i += 1;
            }
            toks.push(Token {
                tok: Tok::Ident(text),
                line: tline,
                col: tcol,
            });
            continue;
        }
        if c == '$' {
            bump(c, &mut line, &mut col);
            i += 1;
            let mut text = String::new();
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                text.push(chars[i]);
                bump(chars[i], &mut line, &mut col);
                i += 1;
            }
            if text.is_empty() {
                return Err(ParseError::new(tline, tcol, "dangling '$'"));
            }
            toks.push(Token {
                tok: Tok::Param(text),
                line: tline,
                col: tcol,
            });
            continue;
        }
        let mut matched = false;
        for sym in SYMBOLS {
            if chars[i..].iter().take(sym.len()).collect::<String>() == **sym {
                for _ in 0..sym.len() {
                    bump(chars[i], &mut line, &mut col);
                    i += 1;
                }
                toks.push(Token {
                    tok: Tok::Sym(sym),
                    line: tline,
                    col: tcol,
                });
                matched = true;
                break;
            }
        }
        if !matched {
            return Err(ParseError::new(
                tline,
                tcol,
                format!("unexpected character '{c}'"),
            ));
        }
    }
    Ok(toks)
}

/// Keywords that compare case-insensitively in [`token_streams_equal`].
/// Identifiers outside this set are case-sensitive.
const KEYWORDS: &[&str] = &[
    "MATCH", "WHERE", "WITH", "AS", "AND", "OR", "NOT", "IN", "EXISTS", "COUNT", "COLLECT",
    "KEYS", "CREATE", "DELETE", "DETACH", "SET", "REMOVE", "MERGE", "FOREACH", "ORDER", "BY",
    "ASC", "DESC", "LIMIT", "RETURN", "UNWIND", "CALL", "YIELD", "CASE", "WHEN", "THEN", "ELSE",
    "END", "IS", "NULL", "TRUE", "FALSE", "DISTINCT", "TRIGGER", "ON", "BEFORE", "AFTER",
    "ONCOMMIT", "DETACHED", "REFERENCING", "FOR", "EACH", "ALL", "NODE", "NODES",
    "RELATIONSHIP", "RELATIONSHIPS", "OLD", "NEW", "OLDNODES", "NEWNODES", "OLDRELS", "NEWRELS",
    "BEGIN", "COMMIT", "EXECUTE", "UPDATE", "DATETIME", "TYPE", "LABELS",
];

fn idents_equal(a: &str, b: &str) -> bool {
    if a == b {
        return true;
    }
    a.eq_ignore_ascii_case(b) && KEYWORDS.iter().any(|k| k.eq_ignore_ascii_case(a))
}

fn toks_equal(a: &Tok, b: &Tok) -> bool {
    match (a, b) {
        (Tok::Ident(x), Tok::Ident(y)) => idents_equal(x, y),
        (Tok::Str(x), Tok::Str(y)) => {
            // Strings that differ byte-wise may still hold equivalent code or
            // line-wrapped prose; compare their own token streams.
            x == y || token_streams_equal(x, y)
        }
        (Tok::Int(x), Tok::Int(y)) => x == y,
        (Tok::Float(x), Tok::Float(y)) => x == y,
        (Tok::Int(x), Tok::Float(y)) | (Tok::Float(y), Tok::Int(x)) => *x as f64 == *y,
        (Tok::Param(x), Tok::Param(y)) => x == y,
        (Tok::Sym(x), Tok::Sym(y)) => x == y,
        _ => false,
    }
}

/// Whitespace- and layout-insensitive equality: both texts lex to the same
/// token stream, with keywords compared case-insensitively and embedded
/// string contents compared recursively.
pub fn token_streams_equal(a: &str, b: &str) -> bool {
    let (Ok(ta), Ok(tb)) = (lex(a), lex(b)) else {
        return false;
    };
    ta.len() == tb.len()
        && ta
            .iter()
            .zip(tb.iter())
            .all(|(x, y)| toks_equal(&x.tok, &y.tok))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_lexes_pattern_tokens() {
        let toks = lex("MATCH (p:IcuPatient)-[:TreatedAt]->(h)").unwrap();
        let kinds: Vec<&Tok> = toks.iter().map(|t| &t.tok).collect();
        assert!(matches!(kinds[0], Tok::Ident(s) if s == "MATCH"));
        assert!(toks.iter().any(|t| t.is_sym("->")));
    }

    #[test]
    fn test_float_vs_property_access() {
        let toks = lex("0.1 ct.distance").unwrap();
        assert_eq!(toks[0].tok, Tok::Float(0.1));
        assert!(matches!(&toks[1].tok, Tok::Ident(s) if s == "ct"));
        assert!(toks[2].is_sym("."));
    }

    #[test]
    fn test_string_escapes() {
        let toks = lex(r#" 'it\'s' "a \"b\" c" "#).unwrap();
        assert_eq!(toks[0].tok, Tok::Str("it's".into()));
        assert_eq!(toks[1].tok, Tok::Str("a \"b\" c".into()));
    }

    #[test]
    fn test_line_comment_skipped() {
        let toks = lex("a // comment\nb").unwrap();
        assert_eq!(toks.len(), 2);
        assert_eq!(toks[1].line, 2);
    }

    #[test]
    fn test_error_position() {
        let err = lex("a\n  ^").unwrap_err();
        assert_eq!((err.line, err.col), (2, 3));
    }

    #[test]
    fn test_token_equality_keyword_case() {
        assert!(token_streams_equal("MATCH (a) WHERE x", "match (a)\n  where x"));
        assert!(!token_streams_equal("MATCH (cNodes)", "MATCH (CNodes)"));
    }

    #[test]
    fn test_token_equality_recurses_into_strings() {
        let a = r#"CALL f("UNWIND $x AS y RETURN y")"#;
        let b = "CALL f(\"unwind $x AS y\n   RETURN y\")";
        assert!(token_streams_equal(a, b));
    }

    #[test]
    fn test_token_equality_wrapped_prose() {
        assert!(token_streams_equal(
            "'ICU patients at Sacco Hospital'",
            "'ICU patients\n      at Sacco Hospital'"
        ));
        assert!(!token_streams_equal("'alpha beta'", "'alpha gamma'"));
    }

    #[test]
    fn test_params_lex() {
        let toks = lex("$assignedNodeProperties[k]").unwrap();
        assert_eq!(toks[0].tok, Tok::Param("assignedNodeProperties".into()));
    }
}
