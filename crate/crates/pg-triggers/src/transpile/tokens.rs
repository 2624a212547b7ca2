//! Token-level comparison of emitted trigger text.
//!
//! Two texts are equivalent when their token streams match: keywords compare
//! case-insensitively, identifiers case-sensitively, and string literals by
//! content. A string whose contents differ byte-wise is re-lexed and compared
//! recursively, so line wrapping inside an embedded statement never matters.

/// One lexical unit of trigger text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    /// Keyword (case-folded) or identifier (case kept), `$` prefix included.
    Word(String),
    Number(String),
    /// String literal content with escapes resolved; quote style is ignored.
    Str(String),
    Sym(String),
}

const KEYWORDS: &[&str] = &[
    "CALL", "YIELD", "UNWIND", "AS", "MATCH", "WHERE", "WITH", "RETURN", "CREATE", "MERGE",
    "DELETE", "DETACH", "SET", "REMOVE", "FOREACH", "IN", "AND", "OR", "NOT", "EXISTS", "COUNT",
    "ORDER", "BY", "LIMIT", "ASC", "DESC", "CASE", "WHEN", "THEN", "ELSE", "END", "NULL", "TRUE",
    "FALSE", "IS", "TRIGGER", "ON", "BEFORE", "AFTER", "COMMIT", "EXECUTE", "DATETIME", "COLLECT",
    "KEYS", "TYPE", "LABELS", "BEGIN", "UPDATE",
];

/// Lexes trigger text into tokens. Fails only on an unterminated string.
pub fn tokens(text: &str) -> Result<Vec<Token>, String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '\'' || c == '"' {
            let (content, next) = lex_string(&chars, i)?;
            out.push(Token::Str(content));
            i = next;
        } else if c.is_ascii_digit() {
            let mut s = String::new();
            while i < chars.len() && chars[i].is_ascii_digit() {
                s.push(chars[i]);
                i += 1;
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                s.push('.');
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    s.push(chars[i]);
                    i += 1;
                }
            }
            out.push(Token::Number(s));
        } else if c.is_alphabetic() || c == '_' || c == '$' {
            let mut s = String::new();
            s.push(c);
            i += 1;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                s.push(chars[i]);
                i += 1;
            }
            let upper = s.to_uppercase();
            if KEYWORDS.contains(&upper.as_str()) {
                out.push(Token::Word(s.to_lowercase()));
            } else {
                out.push(Token::Word(s));
            }
        } else {
            let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            if matches!(two.as_str(), "<>" | "<=" | ">=" | "->" | "<-") {
                out.push(Token::Sym(two));
                i += 2;
            } else {
                out.push(Token::Sym(c.to_string()));
                i += 1;
            }
        }
    }
    Ok(out)
}

/// Content of the string starting at `start` (a quote), with `\x` escapes
/// collapsed to `x`; returns the index past the closing quote.
fn lex_string(chars: &[char], start: usize) -> Result<(String, usize), String> {
    let quote = chars[start];
    let mut content = String::new();
    let mut i = start + 1;
    while i < chars.len() {
        match chars[i] {
            '\\' if i + 1 < chars.len() => {
                content.push(chars[i + 1]);
                i += 2;
            }
            c if c == quote => return Ok((content, i + 1)),
            c => {
                content.push(c);
                i += 1;
            }
        }
    }
    Err(format!("unterminated string starting at char {start}"))
}

/// True when the two texts lex to matching token streams.
pub fn token_stream_eq(a: &str, b: &str) -> bool {
    match (tokens(a), tokens(b)) {
        (Ok(ta), Ok(tb)) => streams_eq(&ta, &tb),
        _ => false,
    }
}

fn streams_eq(a: &[Token], b: &[Token]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| match (x, y) {
            (Token::Str(s), Token::Str(t)) => s == t || token_stream_eq(s, t),
            _ => x == y,
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_keywords_fold_identifiers_do_not() {
        assert!(token_stream_eq("WITH x AS y", "with x as y"));
        assert!(!token_stream_eq("WITH aProp", "WITH aprop"));
    }

    #[test]
    fn test_strings_compare_by_content_across_quote_styles() {
        assert!(token_stream_eq("desc: 'hello world'", "desc: \"hello world\""));
        assert!(!token_stream_eq("desc: 'hello'", "desc: 'hullo'"));
    }

    #[test]
    fn test_embedded_statement_rewraps() {
        let a = "CALL f(\"MATCH (n)\nRETURN n\")";
        let b = "CALL f(\"MATCH (n) RETURN n\")";
        assert!(token_stream_eq(a, b));
    }

    #[test]
    fn test_escaped_quotes_inside_actions() {
        let a = r#"'CREATE (:A {d: \"x\"})'"#;
        let b = "'CREATE (:A {d: \\\"x\\\"})'";
        assert!(token_stream_eq(a, b));
        let c = r#"'CREATE (:A {d: \"y\"})'"#;
        assert!(!token_stream_eq(a, c));
    }

    #[test]
    fn test_symbols_and_numbers() {
        assert!(token_stream_eq("a <= 0.1", "a  <=  0.1"));
        assert!(!token_stream_eq("a <= 1", "a < 1"));
        assert!(tokens("{phase:'afterAsync'});").is_ok());
    }
}
