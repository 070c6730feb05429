//! Structured text reports for `check` and `vcs`.

use std::fmt::Write;

use ogwb_core::explorer::{config_digest, CheckReport, Invariant, LimitKind, Program};
use ogwb_core::kernel::render::expr_to_string;
use ogwb_core::kernel::{Layout, Value, VarId};
use ogwb_core::vcgen::{KindStats, TrivialReason, VcReport, VcStatus};

use crate::trace_io::serialize_trace;

fn limit_name(l: &LimitKind) -> &'static str {
    match l {
        LimitKind::States => "max-states",
        LimitKind::Depth => "max-depth",
    }
}

/// Counts, one verdict line per invariant, one line per model error, then
/// every trace in full.
pub fn format_check_report(p: &Program, invariants: &[Invariant], r: &CheckReport, verbosity: u8) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "system {}", p.sys.name);
    let _ = writeln!(out, "config {}", config_digest(p));
    let _ = writeln!(out, "reachable {}", r.reachable);
    let _ = writeln!(out, "transitions {}", r.transitions);
    let _ = writeln!(out, "depth {}", r.depth);
    let _ = writeln!(out, "terminated {}", r.terminated);
    let limits: Vec<&str> = r.limits_hit.iter().map(limit_name).collect();
    let _ = writeln!(out, "limits_hit {}", if limits.is_empty() { "none".into() } else { limits.join(",") });
    for inv in invariants {
        match r.violations.iter().find(|v| v.invariant == inv.name) {
            None if r.terminated => {
                let _ = writeln!(out, "invariant {} holds", inv.name);
            }
            None => {
                let _ = writeln!(out, "invariant {} not violated within limits", inv.name);
            }
            Some(v) => {
                let _ = write!(out, "invariant {} VIOLATED after {} steps", inv.name, v.trace.len());
                if let Some(e) = &v.error {
                    let _ = write!(out, " (evaluation failed: {e})");
                }
                out.push('\n');
            }
        }
    }
    for e in &r.model_errors {
        let _ = writeln!(
            out,
            "model_error {} in {} at {} after {} steps: {}",
            e.kind,
            p.tasks[e.task].name,
            e.label,
            e.trace.len(),
            e.message
        );
    }
    for v in &r.violations {
        let _ = writeln!(out, "\ntrace invariant {}", v.invariant);
        out.push_str(&serialize_trace(p, &v.trace, verbosity));
    }
    for e in &r.model_errors {
        let _ = writeln!(out, "\ntrace model_error {} {} {}", e.kind, p.tasks[e.task].name, e.label);
        out.push_str(&serialize_trace(p, &e.trace, verbosity));
    }
    out
}

fn stats_line(name: &str, k: &KindStats) -> String {
    format!(
        "{name:<13} {:>7} {:>7} {:>10} {:>6} {:>7} {:>8.4}",
        k.total,
        k.trivial,
        k.discharged,
        k.failed,
        k.unknown,
        k.trivial_ratio()
    )
}

fn witness_text(w: &[(VarId, Value)], layout: &Layout) -> String {
    if w.is_empty() {
        return "any state".into();
    }
    let parts: Vec<String> = w.iter().map(|(id, v)| format!("{}={v}", layout.name(*id))).collect();
    parts.join(" ")
}

/// The stats table, then each FAILED and UNKNOWN obligation. Verbosity 1
/// lists every obligation; verbosity 2 adds the formulas.
pub fn format_vc_report(r: &VcReport, verbosity: u8) -> String {
    let layout = &r.system.layout;
    let mut out = String::new();
    let _ = writeln!(out, "system {}", r.system.name);
    let _ = writeln!(out, "{:<13} {:>7} {:>7} {:>10} {:>6} {:>7} {:>8}", "kind", "total", "trivial", "discharged", "failed", "unknown", "ratio");
    out.push_str(&stats_line("sequential", &r.stats.sequential));
    out.push('\n');
    out.push_str(&stats_line("interference", &r.stats.interference));
    out.push('\n');
    out.push_str(&stats_line("all", &r.stats.all()));
    out.push('\n');
    let task = |i: usize| r.system.tasks[i].name.as_str();
    for (i, vc) in r.vcs.iter().enumerate() {
        let status = match &vc.status {
            VcStatus::Pending => "PENDING".to_string(),
            VcStatus::Trivial(TrivialReason::Contradiction) => "TRIVIAL contradiction".into(),
            VcStatus::Trivial(TrivialReason::Duplicate(j)) => format!("TRIVIAL duplicate of {j}"),
            VcStatus::Discharged => "DISCHARGED".into(),
            VcStatus::Failed { witness, error } => {
                let mut s = format!("FAILED witness {}", witness_text(witness, layout));
                if let Some(e) = error {
                    let _ = write!(s, " error {e}");
                }
                s
            }
            VcStatus::Unknown => "UNKNOWN".into(),
        };
        let interesting = matches!(vc.status, VcStatus::Failed { .. } | VcStatus::Unknown);
        if verbosity == 0 && !interesting {
            continue;
        }
        let _ = writeln!(
            out,
            "vc {i} {} {}:{} by {}:{} branch {}: {status}",
            vc.kind,
            task(vc.owner.task),
            vc.owner.label,
            task(vc.actor.task),
            vc.actor.label,
            vc.branch
        );
        if verbosity >= 2 {
            let _ = writeln!(out, "  antecedent {}", expr_to_string(&vc.antecedent, layout));
            let _ = writeln!(out, "  consequent {}", expr_to_string(&vc.consequent, layout));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ogwb_core::echronos::{build_system, preset_invariants, SystemConfig};
    use ogwb_core::explorer::{explore, ExploreOptions, Limits};

    #[test]
    fn check_report_lists_every_invariant() {
        let p = Program::new(build_system(&SystemConfig::new(1, 0, 0)).unwrap());
        let invs: Vec<Invariant> = preset_invariants().into_iter().map(|(n, e)| Invariant::new(n, e)).collect();
        let r = explore(&p, &invs, ExploreOptions::new(Limits { max_states: 1000, max_depth: 1000 }));
        let text = format_check_report(&p, &invs, &r, 0);
        assert!(text.contains("reachable 22\n"), "{text}");
        assert!(text.contains("limits_hit none\n"));
        assert_eq!(text.matches(" holds\n").count(), invs.len());
    }
}
