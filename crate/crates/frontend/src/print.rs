//! Canonical printing of a parsed model file.
//!
//! Items come out grouped (config, vars, init, tasks, asserts, invariants)
//! regardless of their order in the source, so parsing the printed text
//! yields an equal [`ModelFile`].

use std::fmt::Write;

use ogwb_core::kernel::render::{expr_to_string, write_command};

use crate::model::{ConfigValue, ModelFile};

fn config_value(v: &ConfigValue) -> String {
    match v {
        ConfigValue::Num(n) => n.to_string(),
        ConfigValue::Word(w) => w.clone(),
        ConfigValue::Map(items) => {
            let inner: Vec<String> = items.iter().map(|(k, v)| format!("{k}: {v}")).collect();
            format!("{{{}}}", inner.join(", "))
        }
    }
}

pub fn print_model(m: &ModelFile) -> String {
    let l = &m.layout;
    let mut out = String::new();
    let _ = write!(out, "system \"{}\"", m.name);
    if let Some(p) = &m.preset {
        let _ = write!(out, " preset {p}");
    }
    out.push_str("\nconfig {\n");
    for e in &m.config {
        let _ = writeln!(out, "  {} = {}", e.key, config_value(&e.value));
    }
    out.push_str("}\n");
    for v in &m.vars {
        let _ = writeln!(out, "var {}: {} = {}", l.name(v.id), l.ty(v.id), v.value);
    }
    if !m.init.is_empty() {
        out.push_str("init {\n");
        for v in &m.init {
            let _ = writeln!(out, "  {} = {};", l.name(v.id), v.value);
        }
        out.push_str("}\n");
    }
    for t in &m.tasks {
        let _ = writeln!(
            out,
            "{}task {} as {} {{",
            if t.controlled { "controlled " } else { "" },
            t.name,
            t.owner
        );
        write_command(&t.body, l, 1, &mut out);
        out.push_str("}\n");
    }
    for a in &m.asserts {
        let _ = writeln!(out, "assert {} {}: {}", a.task, a.label, expr_to_string(&a.pred, l));
    }
    for (name, e) in &m.invariants {
        let _ = writeln!(out, "invariant {name}: {}", expr_to_string(e, l));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model;

    #[test]
    fn printing_is_a_fixpoint() {
        let text = r#"
system "mixed"
config { users = 2 interrupts = 1 user_priority = {2: 1, 3: 0} }
var x: bool = true
invariant Ok: x => AT in {2, 3, 4} union {0}
var s: stack<nat[4]> = [1, 2]
var m: map[2]<pair<bool, nat[3]>> = map{1: (true, 2)}
init { curUser = 1; }
controlled task t as 2 {
  {x} a: x := !x [] skip;
  b: when (x) if (hd(s) = 1) { c: s := tl(s); } else { d: skip; }
  control (4) { e: m := m[0 := Some((false, 1))]; }
}
task h as 4 { loop: while (true) { take: ITake(4); ret: IRet; } }
assert t b: x
"#;
        let first = parse_model(text).unwrap_or_else(|e| panic!("{e}"));
        let printed = print_model(&first.file);
        let second = parse_model(&printed).unwrap_or_else(|e| panic!("{e}\n{printed}"));
        assert_eq!(second.file, first.file, "{printed}");
        assert_eq!(print_model(&second.file), printed);
    }
}
