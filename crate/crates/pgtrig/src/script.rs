//! Script splitting and command execution shared by `run` and the REPL.

use std::io::Write;

use pg_triggers::ddl::{parse_admin, print_trigger};
use pg_triggers::engine::FiringRecord;
use pg_triggers::Engine;

/// A command extracted from a script, with the line it starts on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Command {
    pub line: usize,
    pub text: String,
}

/// Why a command aborted the script.
#[derive(Debug)]
pub enum CommandError {
    /// An ASSERT did not hold; exits with code 1.
    Assertion(String),
    /// Parsing, validation, or execution failed; exits with code 2.
    Failed(String),
}

impl CommandError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CommandError::Assertion(_) => 1,
            CommandError::Failed(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CommandError::Assertion(m) | CommandError::Failed(m) => m,
        }
    }
}

/// Terminated commands plus whatever unterminated text follows them.
#[derive(Debug)]
pub struct Split {
    pub commands: Vec<Command>,
    /// Comment-stripped tail with no closing semicolon yet.
    pub rest: String,
    pub rest_line: usize,
}

/// Scans script text into semicolon-terminated commands.
///
/// `//` starts a comment outside string literals; quotes suppress both
/// comment and separator recognition.
pub fn scan_commands(text: &str) -> Split {
    let mut commands = Vec::new();
    let mut current = String::new();
    let mut start_line = 1usize;
    let mut line = 1usize;
    let mut quote: Option<char> = None;
    let mut chars = text.chars().peekable();
    while let Some(ch) = chars.next() {
        match quote {
            Some(q) => {
                current.push(ch);
                if ch == '\\' && q == '"' {
                    if let Some(&next) = chars.peek() {
                        current.push(next);
                        chars.next();
                    }
                } else if ch == q {
                    quote = None;
                } else if ch == '\n' {
                    line += 1;
                }
            }
            None => match ch {
                '\'' | '"' => {
                    quote = Some(ch);
                    push_char(&mut current, ch, line, &mut start_line);
                }
                '/' if chars.peek() == Some(&'/') => {
                    for skipped in chars.by_ref() {
                        if skipped == '\n' {
                            line += 1;
                            current.push('\n');
                            break;
                        }
                    }
                }
                ';' => {
                    let text = current.trim();
                    if !text.is_empty() {
                        commands.push(Command {
                            line: start_line,
                            text: text.to_string(),
                        });
                    }
                    current.clear();
                }
                '\n' => {
                    line += 1;
                    current.push('\n');
                }
                _ => push_char(&mut current, ch, line, &mut start_line),
            },
        }
    }
    Split {
        commands,
        rest: current,
        rest_line: start_line,
    }
}

/// Scans a complete script; an unterminated tail becomes a final command.
pub fn split_commands(text: &str) -> Vec<Command> {
    let mut split = scan_commands(text);
    let tail = split.rest.trim();
    if !tail.is_empty() {
        split.commands.push(Command {
            line: split.rest_line,
            text: tail.to_string(),
        });
    }
    split.commands
}

fn push_char(current: &mut String, ch: char, line: usize, start_line: &mut usize) {
    if current.trim().is_empty() && !ch.is_whitespace() {
        *start_line = line;
    }
    current.push(ch);
}

/// Executes commands against an engine and writes a line-oriented report.
pub struct Runner<W: Write> {
    pub engine: Engine,
    pub out: W,
}

impl<W: Write> Runner<W> {
    pub fn new(engine: Engine, out: W) -> Self {
        Runner { engine, out }
    }

    /// Runs a whole script, aborting on the first failure.
    pub fn run_script(&mut self, text: &str) -> Result<(), CommandError> {
        for command in split_commands(text) {
            self.execute(&command)?;
        }
        Ok(())
    }

    /// Dispatches one command by its leading keyword.
    pub fn execute(&mut self, command: &Command) -> Result<(), CommandError> {
        let head = leading_keywords(&command.text);
        let result = match head.as_str() {
            "BEGIN" => self.exec_begin(command),
            "COMMIT" => self.exec_commit(command),
            "ROLLBACK" => self.exec_rollback(command),
            "CREATE TRIGGER" => self.exec_install(command),
            "DROP TRIGGER" | "ENABLE TRIGGER" | "DISABLE TRIGGER" | "SHOW TRIGGERS" => {
                self.exec_admin(command)
            }
            "ASSERT" => self.exec_assert(command),
            _ => self.exec_statement(command),
        };
        if let Err(CommandError::Failed(_)) = &result {
            if self.engine.in_transaction() {
                let _ = self.engine.rollback();
            }
        }
        result
    }

    fn exec_begin(&mut self, command: &Command) -> Result<(), CommandError> {
        if command.text.trim().to_ascii_uppercase() != "BEGIN" {
            return Err(self.fail(command, "BEGIN takes no arguments".to_string()));
        }
        self.engine
            .begin()
            .map_err(|e| self.fail(command, e.to_string()))?;
        self.say("begin");
        Ok(())
    }

    fn exec_commit(&mut self, command: &Command) -> Result<(), CommandError> {
        if command.text.trim().to_ascii_uppercase() != "COMMIT" {
            return Err(self.fail(command, "COMMIT takes no arguments".to_string()));
        }
        let outcome = self
            .engine
            .commit()
            .map_err(|e| self.fail(command, e.to_string()))?;
        for firing in &outcome.firings {
            self.say_firing(firing);
        }
        self.say(&format!("committed: {} changes", outcome.changes.len()));
        self.drain_detached_log();
        Ok(())
    }

    fn exec_rollback(&mut self, command: &Command) -> Result<(), CommandError> {
        if command.text.trim().to_ascii_uppercase() != "ROLLBACK" {
            return Err(self.fail(command, "ROLLBACK takes no arguments".to_string()));
        }
        self.engine
            .rollback()
            .map_err(|e| self.fail(command, e.to_string()))?;
        self.say("rolled back");
        Ok(())
    }

    fn exec_install(&mut self, command: &Command) -> Result<(), CommandError> {
        let name = self
            .engine
            .install_trigger(&command.text)
            .map_err(|e| self.fail(command, e.to_string()))?;
        self.say(&format!("installed: {name}"));
        Ok(())
    }

    fn exec_admin(&mut self, command: &Command) -> Result<(), CommandError> {
        let admin = parse_admin(&command.text).map_err(|e| self.fail(command, e.to_string()))?;
        let lines = self
            .engine
            .admin(&admin)
            .map_err(|e| self.fail(command, e.to_string()))?;
        for line in lines {
            self.say(&line);
        }
        Ok(())
    }

    /// ASSERT <count> <read-only pipeline>: row-count check, exit 1 on miss.
    fn exec_assert(&mut self, command: &Command) -> Result<(), CommandError> {
        let rest = command.text.trim()[6..].trim_start();
        let (count_text, stmt) = match rest.split_once(char::is_whitespace) {
            Some(parts) => parts,
            None => {
                return Err(self.fail(
                    command,
                    "ASSERT needs a row count and a statement".to_string(),
                ))
            }
        };
        let expected: usize = count_text
            .parse()
            .map_err(|_| self.fail(command, format!("bad ASSERT count {count_text:?}")))?;
        let rows = self
            .engine
            .run_read(stmt.trim())
            .map_err(|e| self.fail(command, e.to_string()))?;
        if rows.len() == expected {
            self.say(&format!("assert ok: {expected} rows"));
            Ok(())
        } else {
            Err(CommandError::Assertion(format!(
                "assertion failed at line {}: expected {expected} rows, got {}",
                command.line,
                rows.len()
            )))
        }
    }

    /// Data statements run in the open transaction, or in one of their own.
    fn exec_statement(&mut self, command: &Command) -> Result<(), CommandError> {
        let auto = !self.engine.in_transaction();
        if auto {
            self.engine
                .begin()
                .map_err(|e| self.fail(command, e.to_string()))?;
        }
        let outcome = match self.engine.run_statement(&command.text) {
            Ok(o) => o,
            Err(e) => return Err(self.fail(command, e.to_string())),
        };
        if has_return(&command.text) {
            for row in &outcome.rows {
                self.say(&format!("row: {}", row.render()));
            }
        }
        for firing in &outcome.firings {
            self.say_firing(firing);
        }
        if auto {
            let commit = match self.engine.commit() {
                Ok(c) => c,
                Err(e) => return Err(self.fail(command, e.to_string())),
            };
            for firing in &commit.firings {
                self.say_firing(firing);
            }
            self.say(&format!("committed: {} changes", commit.changes.len()));
            self.drain_detached_log();
        }
        Ok(())
    }

    /// Prints the trigger registry in canonical DDL form.
    pub fn show_triggers(&mut self) {
        let defs = self.engine.triggers();
        if defs.is_empty() {
            self.say("no triggers installed");
        }
        for def in defs {
            self.say(&print_trigger(&def));
        }
    }

    fn say(&mut self, line: &str) {
        let _ = writeln!(self.out, "{line}");
    }

    fn say_firing(&mut self, firing: &FiringRecord) {
        let seqs: Vec<String> = firing.seqs.iter().map(|s| s.to_string()).collect();
        let line = format!(
            "fired: {} phase={} depth={} records=[{}] condition={}",
            firing.trigger,
            firing.time.keyword(),
            firing.depth,
            seqs.join(", "),
            firing.condition
        );
        self.say(&line);
    }

    fn drain_detached_log(&mut self) {
        for entry in self.engine.drain_log() {
            self.say(&format!("log: {entry}"));
        }
    }

    fn fail(&self, command: &Command, message: String) -> CommandError {
        CommandError::Failed(format!("error at line {}: {message}", command.line))
    }
}

/// True when the statement projects rows with RETURN (quote-aware scan).
fn has_return(text: &str) -> bool {
    let mut quote: Option<char> = None;
    let mut word = String::new();
    for ch in text.chars() {
        match quote {
            Some(q) => {
                if ch == q {
                    quote = None;
                }
            }
            None => match ch {
                '\'' | '"' => quote = Some(ch),
                c if c.is_alphanumeric() || c == '_' => word.push(c),
                _ => {
                    if word.eq_ignore_ascii_case("RETURN") {
                        return true;
                    }
                    word.clear();
                }
            },
        }
    }
    word.eq_ignore_ascii_case("RETURN")
}

/// First one or two keywords of a command, uppercased for dispatch.
fn leading_keywords(text: &str) -> String {
    let mut words = text.split_whitespace();
    let first = words.next().unwrap_or("").to_ascii_uppercase();
    match first.as_str() {
        "CREATE" | "DROP" | "ENABLE" | "DISABLE" | "SHOW" => {
            let second = words.next().unwrap_or("").to_ascii_uppercase();
            if second == "TRIGGER" || second == "TRIGGERS" {
                format!(
                    "{first} {}",
                    if second == "TRIGGERS" {
                        "TRIGGERS"
                    } else {
                        "TRIGGER"
                    }
                )
            } else {
                first
            }
        }
        _ => first,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pg_triggers::Clock;

    fn runner() -> Runner<Vec<u8>> {
        Runner::new(Engine::new(Clock::System), Vec::new())
    }

    fn output(r: &Runner<Vec<u8>>) -> String {
        String::from_utf8(r.out.clone()).unwrap()
    }

    #[test]
    fn test_split_commands_handles_comments_and_strings() {
        let script = "// setup\nCREATE (:A {name: 'x;y'});\nMATCH (n) // trailing\nRETURN n;";
        let commands = split_commands(script);
        assert_eq!(commands.len(), 2);
        assert_eq!(commands[0].text, "CREATE (:A {name: 'x;y'})");
        assert_eq!(commands[0].line, 2);
        assert_eq!(commands[1].text, "MATCH (n) \nRETURN n");
        assert_eq!(commands[1].line, 3);
    }

    #[test]
    fn test_split_commands_keeps_trigger_bodies_whole() {
        let script = "CREATE TRIGGER T AFTER CREATE ON 'A' FOR EACH NODE\nBEGIN\nCREATE (:B)\nEND;\nCREATE (:A);";
        let commands = split_commands(script);
        assert_eq!(commands.len(), 2);
        assert!(commands[0].text.contains("END"));
    }

    #[test]
    fn test_scan_commands_reports_open_tail() {
        assert!(scan_commands("CREATE (:A);").rest.trim().is_empty());
        let split = scan_commands("CREATE (:A); MATCH (n)");
        assert_eq!(split.commands.len(), 1);
        assert_eq!(split.rest.trim(), "MATCH (n)");
        assert!(!scan_commands("RETURN '; not an end").rest.trim().is_empty());
        assert!(scan_commands("// only a comment\n").rest.trim().is_empty());
    }

    #[test]
    fn test_auto_transaction_commits_each_statement() {
        let mut r = runner();
        r.run_script("CREATE (:A {n: 1});\nASSERT 1 MATCH (a:A) RETURN a;")
            .unwrap();
        let text = output(&r);
        assert!(text.contains("committed: 1 changes"));
        assert!(text.contains("assert ok: 1 rows"));
        assert!(!r.engine.in_transaction());
    }

    #[test]
    fn test_explicit_transaction_spans_commands() {
        let mut r = runner();
        r.run_script("BEGIN;\nCREATE (:A);\nCREATE (:A);\nROLLBACK;\nASSERT 0 MATCH (a:A) RETURN a;")
            .unwrap();
        let text = output(&r);
        assert!(text.contains("begin"));
        assert!(text.contains("rolled back"));
        assert!(text.contains("assert ok: 0 rows"));
    }

    #[test]
    fn test_assertion_failure_reports_counts() {
        let mut r = runner();
        let err = r.run_script("CREATE (:A);\nASSERT 2 MATCH (a:A) RETURN a;");
        match err {
            Err(CommandError::Assertion(m)) => {
                assert!(m.contains("expected 2 rows, got 1"), "{m}");
                assert!(m.contains("line 2"), "{m}");
            }
            other => panic!("expected assertion failure, got {other:?}"),
        }
    }

    #[test]
    fn test_engine_error_aborts_and_rolls_back() {
        let mut r = runner();
        let err = r.run_script("BEGIN;\nCREATE (:A);\nMATCH (n) RETURN n.x / 0;");
        match err {
            Err(CommandError::Failed(m)) => assert!(m.contains("line 3"), "{m}"),
            other => panic!("expected failure, got {other:?}"),
        }
        assert!(!r.engine.in_transaction());
        assert_eq!(r.engine.graph().node_count(), 0);
    }

    #[test]
    fn test_trigger_install_and_firing_lines() {
        let mut r = runner();
        let script = "CREATE TRIGGER Tag AFTER CREATE ON 'A' FOR EACH NODE\nBEGIN\nSET NEW.seen = TRUE\nEND;\nCREATE (:A);";
        r.run_script(script).unwrap();
        let text = output(&r);
        assert!(text.contains("installed: Tag"));
        assert!(text.contains("fired: Tag phase=AFTER depth=0 records=["));
        assert!(text.contains("condition=true"));
    }

    #[test]
    fn test_admin_commands_flow_through() {
        let mut r = runner();
        let script = "CREATE TRIGGER Tag AFTER CREATE ON 'A' FOR EACH NODE\nBEGIN\nSET NEW.seen = TRUE\nEND;\nDISABLE TRIGGER Tag;\nCREATE (:A);\nSHOW TRIGGERS;";
        r.run_script(script).unwrap();
        let text = output(&r);
        assert!(!text.contains("fired:"));
        assert!(text.contains("Tag"));
    }
}
