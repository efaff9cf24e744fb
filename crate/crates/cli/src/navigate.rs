//! A line-oriented navigation loop over standard input.
//!
//! Commands: `show`, `enforce OP`, `forbid OP`, `prefix OP@STEP`, `undo`,
//! `help`, `quit`. Every successful command prints the resulting snapshot;
//! errors go to standard error and the loop continues.

use std::io::{self, BufRead, IsTerminal, Write};
use std::sync::Arc;

use planspace_core::{CommitmentKind, NamedCommitment, NavSession, PlanSpace, SessionOptions, Snapshot};

use crate::report::facet_row_line;
use crate::{CliError, CliResult, Format};

const HELP: &str = "commands: show | enforce OP | forbid OP | prefix OP@STEP | undo | help | quit";

enum Line {
    Show,
    Commit(NamedCommitment),
    Undo,
    Help,
    Quit,
}

fn parse(line: &str) -> Result<Line, String> {
    let (cmd, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
    let rest = rest.trim();
    let commitment = |kind, op: &str, step| {
        if op.is_empty() {
            Err(format!("`{cmd}` needs an operator name"))
        } else {
            Ok(Line::Commit(NamedCommitment {
                kind,
                op: op.to_string(),
                step,
            }))
        }
    };
    match cmd {
        "show" => Ok(Line::Show),
        "enforce" => commitment(CommitmentKind::Enforce, rest, None),
        "forbid" => commitment(CommitmentKind::Forbid, rest, None),
        "prefix" => {
            let (op, step) = rest
                .rsplit_once('@')
                .and_then(|(op, s)| Some((op, s.parse::<usize>().ok()?)))
                .ok_or_else(|| "usage: prefix OP@STEP".to_string())?;
            commitment(CommitmentKind::Prefix, op, Some(step))
        }
        "undo" => Ok(Line::Undo),
        "help" => Ok(Line::Help),
        "quit" | "exit" => Ok(Line::Quit),
        other => Err(format!("unknown command `{other}`; {HELP}")),
    }
}

fn print_snapshot(out: &mut impl Write, s: &Snapshot, format: Format) -> io::Result<()> {
    if format == Format::Json {
        serde_json::to_writer(&mut *out, s)?;
        return writeln!(out);
    }
    writeln!(out, "plans: {}", s.count)?;
    let commitments: Vec<String> = s.commitments.iter().map(|c| c.to_string()).collect();
    if commitments.is_empty() {
        writeln!(out, "commitments: (none)")?;
    } else {
        writeln!(out, "commitments: {}", commitments.join(", "))?;
    }
    if s.facets.is_empty() {
        writeln!(out, "facets: none, the plan space is fully determined")?;
    } else {
        writeln!(out, "facets: {}", s.facet_count)?;
        for row in &s.facets {
            writeln!(out, "  {}", facet_row_line(row))?;
        }
    }
    writeln!(out, "samples:")?;
    for plan in &s.samples {
        let line = if plan.is_empty() {
            "(empty plan)".to_string()
        } else {
            plan.join(" ")
        };
        writeln!(out, "  {line}")?;
    }
    Ok(())
}

pub fn run(space: Arc<PlanSpace>, sample_k: usize, seed: u64, format: Format) -> CliResult {
    if space.count() == &num_bigint::BigUint::default() {
        return Err(CliError::NoPlans("the plan space contains no plans".into()));
    }
    let mut session = NavSession::open(space, SessionOptions { sample_k, seed })?;
    let stdin = io::stdin();
    let interactive = stdin.is_terminal();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    print_snapshot(&mut out, session.snapshot(), format)?;
    let prompt = |out: &mut io::StdoutLock<'_>| -> io::Result<()> {
        if interactive {
            write!(out, "> ")?;
        }
        out.flush()
    };
    prompt(&mut out)?;
    for line in stdin.lock().lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            prompt(&mut out)?;
            continue;
        }
        let result = match parse(line) {
            Ok(Line::Quit) => break,
            Ok(Line::Help) => {
                writeln!(out, "{HELP}")?;
                Ok(())
            }
            Ok(Line::Show) => Ok(()),
            Ok(Line::Undo) => session.undo().map(|_| ()).map_err(|e| e.to_string()),
            Ok(Line::Commit(named)) if session.space().task().op_id(&named.op).is_none() => {
                Err(format!("unknown operator `{}`", named.op))
            }
            Ok(Line::Commit(named)) => named
                .resolve(session.space().task())
                .map_err(|e| e.to_string())
                .and_then(|c| session.commit(c).map(|_| ()).map_err(|e| e.to_string())),
            Err(e) => Err(e),
        };
        match result {
            Ok(()) if line != "help" => print_snapshot(&mut out, session.snapshot(), format)?,
            Ok(()) => {}
            Err(e) => {
                out.flush()?;
                eprintln!("error: {e}");
            }
        }
        prompt(&mut out)?;
    }
    Ok(())
}
