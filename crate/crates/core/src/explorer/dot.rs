//! Graphviz export of a retained state graph.

use std::fmt::Write;

use super::program::Program;
use super::search::CheckReport;
use super::trace::state_digest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("exploration did not retain the state graph")]
pub struct GraphNotRetained;

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Nodes are numbered in discovery order, so output is byte-identical for
/// equal inputs. Verbosity 2 labels nodes with the full valuation and
/// program counters instead of the digest.
pub fn export_dot(report: &CheckReport, p: &Program, verbosity: u8) -> Result<String, GraphNotRetained> {
    let g = report.graph.as_ref().ok_or(GraphNotRetained)?;
    let mut out = String::from("digraph states {\n  node [shape=box, fontname=\"monospace\"];\n");
    for (i, s) in g.states.iter().enumerate() {
        let label = if verbosity >= 2 {
            let mut text = p.layout().display(&s.globals).to_string();
            for (t, pc) in p.tasks.iter().zip(&s.pcs) {
                let _ = write!(text, "\n{}@{}", t.name, t.label_at(*pc));
            }
            text
        } else {
            state_digest(p, s)
        };
        let _ = writeln!(out, "  s{i} [label={}];", quote(&label));
    }
    for e in &g.edges {
        let label = format!("{}:{}", p.tasks[e.task].name, e.label);
        let _ = writeln!(out, "  s{} -> s{} [label={}];", e.from, e.to, quote(&label));
    }
    out.push_str("}\n");
    Ok(out)
}
