//! Interactive session over stdin: script commands plus colon meta-commands.

use std::fs;
use std::io::{self, BufRead, IsTerminal, Write};

use pg_triggers::snapshot;

use crate::script::{scan_commands, Runner};

const HELP: &str = "\
meta commands:
  :help             show this help
  :triggers         list installed triggers
  :load <file>      replace the graph from a snapshot
  :snapshot <file>  write the graph to a snapshot
  :quit             leave the session
anything else is script input; statements end with ;";

/// Reads commands until EOF or :quit. Errors report and continue.
pub fn run<W: Write>(runner: &mut Runner<W>) -> io::Result<()> {
    let stdin = io::stdin();
    let interactive = stdin.is_terminal();
    let mut buffer = String::new();
    let mut input = String::new();
    loop {
        if interactive {
            let prompt = if buffer.trim().is_empty() {
                "pgtrig> "
            } else {
                "   ...> "
            };
            print!("{prompt}");
            io::stdout().flush()?;
        }
        input.clear();
        if stdin.lock().read_line(&mut input)? == 0 {
            break;
        }
        let line = input.trim();
        if buffer.trim().is_empty() && line.starts_with(':') {
            if !meta(runner, line) {
                break;
            }
            continue;
        }
        buffer.push_str(&input);
        let split = scan_commands(&buffer);
        for command in &split.commands {
            if let Err(e) = runner.execute(command) {
                let _ = writeln!(runner.out, "{}", e.message());
            }
        }
        buffer = split.rest;
    }
    Ok(())
}

/// Runs one colon command; false means quit.
fn meta<W: Write>(runner: &mut Runner<W>, line: &str) -> bool {
    let mut words = line.splitn(2, char::is_whitespace);
    let head = words.next().unwrap_or("");
    let arg = words.next().unwrap_or("").trim();
    match head {
        ":quit" | ":q" | ":exit" => return false,
        ":help" | ":h" => {
            let _ = writeln!(runner.out, "{HELP}");
        }
        ":triggers" => runner.show_triggers(),
        ":load" => {
            if arg.is_empty() {
                let _ = writeln!(runner.out, ":load needs a file path");
                return true;
            }
            match fs::read_to_string(arg).map_err(|e| e.to_string()) {
                Ok(text) => match snapshot::import(&text) {
                    Ok(graph) => match runner.engine.replace_graph(graph) {
                        Ok(()) => {
                            let _ = writeln!(
                                runner.out,
                                "loaded: {} nodes, {} relationships",
                                runner.engine.graph().node_count(),
                                runner.engine.graph().rel_count()
                            );
                        }
                        Err(e) => {
                            let _ = writeln!(runner.out, "load failed: {e}");
                        }
                    },
                    Err(e) => {
                        let _ = writeln!(runner.out, "load failed: {e}");
                    }
                },
                Err(e) => {
                    let _ = writeln!(runner.out, "load failed: {e}");
                }
            }
        }
        ":snapshot" => {
            if arg.is_empty() {
                let _ = writeln!(runner.out, ":snapshot needs a file path");
                return true;
            }
            let text = snapshot::export(runner.engine.graph());
            match fs::write(arg, text) {
                Ok(()) => {
                    let _ = writeln!(runner.out, "saved: {arg}");
                }
                Err(e) => {
                    let _ = writeln!(runner.out, "save failed: {e}");
                }
            }
        }
        other => {
            let _ = writeln!(runner.out, "unknown meta command {other}; try :help");
        }
    }
    true
}
