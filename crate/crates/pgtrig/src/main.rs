//! Command-line harness: scripted runs, an interactive session, and
//! trigger transpilation for external engines.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{DateTime, Utc};
use clap::{Parser, Subcommand, ValueEnum};
use pg_triggers::ddl::parse_trigger;
use pg_triggers::{snapshot, Clock, Engine, TranspileOptions};

use pgtrig::repl;
use pgtrig::script::{self, Runner};

const EXIT_FAILED: u8 = 2;
const EXIT_USAGE: u8 = 3;

#[derive(Parser)]
#[command(name = "pgtrig", version, about = "Property-graph trigger harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scripts in order against a fresh or restored graph.
    Run {
        /// Script files; statements end with ; and // starts a comment.
        #[arg(required = true)]
        scripts: Vec<PathBuf>,
        /// Snapshot to load before running.
        #[arg(long)]
        snapshot: Option<PathBuf>,
        /// Snapshot file to write after a clean run.
        #[arg(long, value_name = "FILE")]
        save_snapshot: Option<PathBuf>,
        /// Clock source: system, or fixed:<RFC 3339 timestamp>.
        #[arg(long, default_value = "system")]
        clock: String,
        /// Maximum trigger cascade depth.
        #[arg(long)]
        depth_limit: Option<u32>,
    },
    /// Start an interactive session.
    Repl {
        /// Snapshot to load before starting.
        #[arg(long)]
        snapshot: Option<PathBuf>,
        /// Clock source: system, or fixed:<RFC 3339 timestamp>.
        #[arg(long, default_value = "system")]
        clock: String,
        /// Maximum trigger cascade depth.
        #[arg(long)]
        depth_limit: Option<u32>,
    },
    /// Translate trigger definitions for an external engine.
    Transpile {
        /// File of CREATE TRIGGER definitions.
        file: PathBuf,
        /// Output dialect.
        #[arg(long, value_enum, default_value_t = Target::Apoc)]
        target: Target,
        /// Database name used in APOC installation calls.
        #[arg(long, default_value = "databaseName")]
        database: String,
        /// Label hierarchy edge SUB:SUPER; repeatable.
        #[arg(long = "isa", value_name = "SUB:SUPER")]
        isa: Vec<String>,
        /// Write output here instead of stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Apoc,
    Memgraph,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            scripts,
            snapshot,
            save_snapshot,
            clock,
            depth_limit,
        } => run_scripts(&scripts, snapshot.as_deref(), save_snapshot.as_deref(), &clock, depth_limit),
        Command::Repl {
            snapshot,
            clock,
            depth_limit,
        } => run_repl(snapshot.as_deref(), &clock, depth_limit),
        Command::Transpile {
            file,
            target,
            database,
            isa,
            out,
        } => run_transpile(&file, target, database, &isa, out.as_deref()),
    };
    ExitCode::from(code)
}

fn run_scripts(
    scripts: &[PathBuf],
    snapshot: Option<&Path>,
    save_snapshot: Option<&Path>,
    clock: &str,
    depth_limit: Option<u32>,
) -> u8 {
    let engine = match build_engine(snapshot, clock, depth_limit) {
        Ok(e) => e,
        Err(message) => return usage_error(&message),
    };
    let mut texts = Vec::new();
    for script in scripts {
        match fs::read_to_string(script) {
            Ok(t) => texts.push(t),
            Err(e) => return usage_error(&format!("cannot read {}: {e}", script.display())),
        }
    }
    let stdout = io::stdout();
    let mut runner = Runner::new(engine, stdout.lock());
    for text in &texts {
        if let Err(e) = runner.run_script(text) {
            let _ = runner.out.flush();
            eprintln!("{}", e.message());
            return e.exit_code();
        }
    }
    let _ = runner.out.flush();
    if let Some(path) = save_snapshot {
        let text = snapshot::export(runner.engine.graph());
        if let Err(e) = fs::write(path, text) {
            return usage_error(&format!("cannot write {}: {e}", path.display()));
        }
    }
    0
}

fn run_repl(snapshot: Option<&Path>, clock: &str, depth_limit: Option<u32>) -> u8 {
    let engine = match build_engine(snapshot, clock, depth_limit) {
        Ok(e) => e,
        Err(message) => return usage_error(&message),
    };
    let stdout = io::stdout();
    let mut runner = Runner::new(engine, stdout.lock());
    match repl::run(&mut runner) {
        Ok(()) => 0,
        Err(e) => usage_error(&format!("input error: {e}")),
    }
}

fn run_transpile(
    file: &Path,
    target: Target,
    database: String,
    isa: &[String],
    out: Option<&Path>,
) -> u8 {
    let mut options = TranspileOptions {
        database,
        ..TranspileOptions::default()
    };
    for edge in isa {
        match edge.split_once(':') {
            Some((sub, sup)) if !sub.is_empty() && !sup.is_empty() => {
                options.hierarchies.push((sub.to_string(), sup.to_string()));
            }
            _ => return usage_error(&format!("--isa expects SUB:SUPER, got {edge:?}")),
        }
    }
    let text = match fs::read_to_string(file) {
        Ok(t) => t,
        Err(e) => return usage_error(&format!("cannot read {}: {e}", file.display())),
    };
    let mut emitted = Vec::new();
    for command in script::split_commands(&text) {
        let def = match parse_trigger(&command.text) {
            Ok(d) => d,
            Err(e) => {
                eprintln!("error at line {}: {e}", command.line);
                return EXIT_FAILED;
            }
        };
        let result = match target {
            Target::Apoc => pg_triggers::transpile_apoc(&def, &options),
            Target::Memgraph => pg_triggers::transpile_memgraph(&def, &options),
        };
        match result {
            Ok(t) => {
                for warning in &t.warnings {
                    eprintln!("warning [{}]: {warning}", t.name);
                }
                emitted.push(t.text);
            }
            Err(e) => {
                eprintln!("error [{}]: {e}", def.name);
                return EXIT_FAILED;
            }
        }
    }
    let body = format!("{}\n", emitted.join("\n\n"));
    match out {
        Some(path) => {
            if let Err(e) = fs::write(path, body) {
                return usage_error(&format!("cannot write {}: {e}", path.display()));
            }
        }
        None => print!("{body}"),
    }
    0
}

/// Builds the engine from the shared flags; errors are usage problems.
fn build_engine(
    snapshot_path: Option<&Path>,
    clock: &str,
    depth_limit: Option<u32>,
) -> Result<Engine, String> {
    let clock = parse_clock(clock)?;
    let mut engine = match snapshot_path {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            let graph = snapshot::import(&text)
                .map_err(|e| format!("bad snapshot {}: {e}", path.display()))?;
            Engine::from_graph(graph, clock)
        }
        None => Engine::new(clock),
    };
    if let Some(limit) = depth_limit {
        engine.set_depth_limit(limit);
    }
    Ok(engine)
}

fn parse_clock(text: &str) -> Result<Clock, String> {
    if text.eq_ignore_ascii_case("system") {
        return Ok(Clock::System);
    }
    if let Some(stamp) = text.strip_prefix("fixed:") {
        let parsed = DateTime::parse_from_rfc3339(stamp)
            .map_err(|e| format!("bad --clock timestamp {stamp:?}: {e}"))?;
        return Ok(Clock::Fixed(parsed.with_timezone(&Utc)));
    }
    Err(format!(
        "--clock expects system or fixed:<RFC 3339 timestamp>, got {text:?}"
    ))
}

fn usage_error(message: &str) -> u8 {
    eprintln!("error: {message}");
    EXIT_USAGE
}
