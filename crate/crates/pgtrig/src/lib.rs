//! Harness internals behind the pgtrig binary: script execution and the
//! interactive session.

pub mod repl;
pub mod script;
