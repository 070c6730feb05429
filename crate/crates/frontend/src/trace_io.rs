//! Line-oriented trace files.
//!
//! ```text
//! ogtrace 1
//! config <digest>
//! init <digest>
//! step <index> <task index> <task name> <label> <digest>
//!   ~ <var> = <value>        (verbosity >= 1: variables the step changed)
//!   = <full state>           (verbosity 2)
//! ```
//!
//! Indented lines are commentary; the parser skips them, so a trace reads
//! back identically at every verbosity.

use std::fmt::Write;

use ogwb_core::explorer::{replay, Program, Trace, TraceStep};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("trace line {line}: {message}")]
pub struct TraceParseError {
    pub line: usize,
    pub message: String,
}

/// Renders `t`. Annotations at verbosity >= 1 need the states, so they are
/// recomputed by replaying against `p`; a trace that does not replay is
/// written without them.
pub fn serialize_trace(p: &Program, t: &Trace, verbosity: u8) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "ogtrace {FORMAT_VERSION}");
    let _ = writeln!(out, "config {}", t.config_digest);
    let _ = writeln!(out, "init {}", t.init_digest);
    let states = if verbosity >= 1 { replay(p, t).ok() } else { None };
    let layout = p.layout();
    if let (Some(states), 2) = (&states, verbosity) {
        let _ = writeln!(out, "  = {}", layout.display(&states[0].globals));
    }
    for (i, step) in t.steps.iter().enumerate() {
        let _ = writeln!(
            out,
            "step {i} {} {} {} {}",
            step.task, p.tasks[step.task].name, step.label, step.digest
        );
        if let Some(states) = &states {
            let (before, after) = (&states[i].globals, &states[i + 1].globals);
            for id in after.diff(before) {
                let _ = writeln!(out, "  ~ {} = {}", layout.name(id), after.get(id));
            }
            if verbosity >= 2 {
                let _ = writeln!(out, "  = {}", layout.display(after));
            }
        }
    }
    out
}

pub fn parse_trace(text: &str) -> Result<Trace, TraceParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.starts_with(' ') && !l.trim().is_empty());
    let err = |line: usize, message: String| TraceParseError { line, message };
    let mut header = |key: &str| -> Result<String, TraceParseError> {
        let (n, l) = lines.next().ok_or_else(|| err(0, format!("missing `{key}` line")))?;
        match l.split_once(' ') {
            Some((k, v)) if k == key && !v.contains(' ') => Ok(v.to_string()),
            _ => Err(err(n, format!("expected `{key} <value>`"))),
        }
    };
    let version = header("ogtrace")?;
    if version != FORMAT_VERSION.to_string() {
        return Err(err(1, format!("unsupported format version {version}")));
    }
    let config_digest = header("config")?;
    let init_digest = header("init")?;
    let mut steps = Vec::new();
    for (n, l) in lines {
        let f: Vec<&str> = l.split(' ').collect();
        if f.len() != 6 || f[0] != "step" {
            return Err(err(n, "expected `step <index> <task> <name> <label> <digest>`".into()));
        }
        if f[1].parse::<usize>().ok() != Some(steps.len()) {
            return Err(err(n, format!("expected step index {}", steps.len())));
        }
        let task = f[2].parse().map_err(|_| err(n, format!("bad task index `{}`", f[2])))?;
        steps.push(TraceStep {
            task,
            label: f[4].to_string(),
            digest: f[5].to_string(),
        });
    }
    Ok(Trace {
        config_digest,
        init_digest,
        steps,
    })
}
