//! Canonical text rendering of expressions, commands and systems, in the
//! concrete syntax accepted by the model-file parser.

use std::fmt::Write;

use super::command::{Action, Command, Cond, Update};
use super::expr::Expr;
use super::state::Layout;
use super::value::Value;
use super::System;

// Binding strength, loosest first. A subexpression rendered in a context
// stronger than its own level gets parentheses.
const IMPLIES: u8 = 1;
const OR: u8 = 2;
const AND: u8 = 3;
const CMP: u8 = 5;
const SET: u8 = 6;
const PUSH: u8 = 7;
const UNARY: u8 = 8;
const POSTFIX: u8 = 9;

fn level(e: &Expr) -> u8 {
    match e {
        Expr::Implies(..) => IMPLIES,
        Expr::Or(xs) if xs.len() > 1 => OR,
        Expr::And(xs) if xs.len() > 1 => AND,
        Expr::Eq(..) | Expr::Ne(..) | Expr::Member(..) => CMP,
        Expr::Union(..) | Expr::Diff(..) | Expr::Inter(..) => SET,
        Expr::Push(..) => PUSH,
        Expr::Not(_) => UNARY,
        Expr::Lookup(..) | Expr::Override(..) => POSTFIX,
        _ => u8::MAX,
    }
}

pub fn expr_to_string(e: &Expr, layout: &Layout) -> String {
    let mut out = String::new();
    write_expr(e, layout, 0, &mut out);
    out
}

pub fn write_expr(e: &Expr, layout: &Layout, ctx: u8, out: &mut String) {
    if let Expr::And(xs) | Expr::Or(xs) = e {
        if xs.len() == 1 {
            return write_expr(&xs[0], layout, ctx, out);
        }
    }
    let wrap = level(e) < ctx;
    if wrap {
        out.push('(');
    }
    write_bare(e, layout, out);
    if wrap {
        out.push(')');
    }
}

fn write_list(xs: &[Expr], layout: &Layout, sep: &str, ctx: u8, out: &mut String) {
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            out.push_str(sep);
        }
        write_expr(x, layout, ctx, out);
    }
}

fn write_call(name: &str, args: &[&Expr], layout: &Layout, out: &mut String) {
    out.push_str(name);
    out.push('(');
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(a, layout, 0, out);
    }
    out.push(')');
}

fn write_bare(e: &Expr, layout: &Layout, out: &mut String) {
    match e {
        Expr::Var(id) => out.push_str(layout.name(*id)),
        Expr::Lit(v) => write_value(v, out),
        Expr::Not(a) => {
            out.push('!');
            write_expr(a, layout, POSTFIX + 1, out);
        }
        Expr::And(xs) if xs.is_empty() => out.push_str("true"),
        Expr::Or(xs) if xs.is_empty() => out.push_str("false"),
        Expr::And(xs) => write_list(xs, layout, " && ", AND + 1, out),
        Expr::Or(xs) => write_list(xs, layout, " || ", OR + 1, out),
        Expr::Implies(a, b) => {
            write_expr(a, layout, IMPLIES + 1, out);
            out.push_str(" => ");
            write_expr(b, layout, IMPLIES, out);
        }
        Expr::Eq(a, b) | Expr::Ne(a, b) | Expr::Member(a, b) => {
            let op = match e {
                Expr::Eq(..) => " = ",
                Expr::Ne(..) => " != ",
                _ => " in ",
            };
            write_expr(a, layout, CMP + 1, out);
            out.push_str(op);
            write_expr(b, layout, CMP + 1, out);
        }
        Expr::Union(a, b) | Expr::Diff(a, b) | Expr::Inter(a, b) => {
            let op = match e {
                Expr::Union(..) => " union ",
                Expr::Diff(..) => " minus ",
                _ => " inter ",
            };
            write_expr(a, layout, SET, out);
            out.push_str(op);
            write_expr(b, layout, SET + 1, out);
        }
        Expr::Push(a, b) => {
            write_expr(a, layout, PUSH + 1, out);
            out.push_str(" # ");
            write_expr(b, layout, PUSH, out);
        }
        Expr::SetLit(xs) => {
            out.push('{');
            write_list(xs, layout, ", ", 0, out);
            out.push('}');
        }
        Expr::Head(a) => write_call("hd", &[a], layout, out),
        Expr::Tail(a) => write_call("tl", &[a], layout, out),
        Expr::Some(a) => write_call("Some", &[a], layout, out),
        Expr::The(a) => write_call("the", &[a], layout, out),
        Expr::Fst(a) => write_call("fst", &[a], layout, out),
        Expr::Snd(a) => write_call("snd", &[a], layout, out),
        Expr::Lookup(m, k) => {
            write_expr(m, layout, POSTFIX, out);
            out.push('(');
            write_expr(k, layout, 0, out);
            out.push(')');
        }
        Expr::Override(m, k, v) => {
            write_expr(m, layout, POSTFIX, out);
            out.push('[');
            write_expr(k, layout, 0, out);
            out.push_str(" := ");
            write_expr(v, layout, 0, out);
            out.push(']');
        }
        Expr::Pair(a, b) => {
            out.push('(');
            write_expr(a, layout, 0, out);
            out.push_str(", ");
            write_expr(b, layout, 0, out);
            out.push(')');
        }
        Expr::Ite(c, t, f) => {
            out.push_str("(if ");
            write_expr(c, layout, 0, out);
            out.push_str(" then ");
            write_expr(t, layout, 0, out);
            out.push_str(" else ");
            write_expr(f, layout, 0, out);
            out.push(')');
        }
        Expr::Call(b, args) => {
            if b.arity() == 0 {
                out.push_str(b.name());
            } else {
                let refs: Vec<&Expr> = args.iter().collect();
                write_call(b.name(), &refs, layout, out);
            }
        }
        Expr::At(r, label) => {
            out.push_str("at(");
            write_expr(r, layout, 0, out);
            let _ = write!(out, ", \"{label}\")");
        }
        Expr::Abort(kind) => {
            let _ = write!(out, "abort(\"{kind}\")");
        }
    }
}

/// Values in literal syntax. Maps use `map{k: v, ...}` listing defined keys.
pub fn write_value(v: &Value, out: &mut String) {
    let _ = write!(out, "{v}");
}

fn write_updates(branches: &[Vec<Update>], layout: &Layout, out: &mut String) {
    for (bi, branch) in branches.iter().enumerate() {
        if bi > 0 {
            out.push_str(" [] ");
        }
        if branch.is_empty() {
            out.push_str("skip");
        }
        for (i, u) in branch.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(layout.name(u.target));
            out.push_str(" := ");
            write_expr(&u.value, layout, 0, out);
        }
    }
}

fn indent(depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn write_point_prefix(assertion: &Option<Expr>, label: &str, layout: &Layout, out: &mut String) {
    if let Some(p) = assertion {
        out.push('{');
        write_expr(p, layout, 0, out);
        out.push_str("} ");
    }
    out.push_str(label);
    out.push_str(": ");
}

fn write_cond_head(kw: &str, c: &Cond, layout: &Layout, out: &mut String) {
    write_point_prefix(&c.assertion, &c.label, layout, out);
    if let Some(g) = &c.guard {
        out.push_str("when (");
        write_expr(g, layout, 0, out);
        out.push_str(") ");
    }
    out.push_str(kw);
    out.push_str(" (");
    write_expr(&c.test, layout, 0, out);
    out.push_str(") {\n");
}

fn write_action(a: &Action, guard: Option<&Expr>, layout: &Layout, out: &mut String) {
    write_point_prefix(&a.assertion, &a.label, layout, out);
    match guard {
        Some(g) => {
            out.push_str("await (");
            write_expr(g, layout, 0, out);
            out.push_str(") { ");
            write_updates(&a.branches, layout, out);
            out.push_str(" }\n");
        }
        None => {
            write_updates(&a.branches, layout, out);
            out.push_str(";\n");
        }
    }
}

/// Renders statements one per line at the given indentation depth.
pub fn write_command(c: &Command, layout: &Layout, depth: usize, out: &mut String) {
    match c {
        Command::Skip => {
            indent(depth, out);
            out.push_str("skip;\n");
        }
        Command::Basic(a) => {
            indent(depth, out);
            write_action(a, None, layout, out);
        }
        Command::Await(g, a) => {
            indent(depth, out);
            write_action(a, Some(g), layout, out);
        }
        Command::Seq(cs) => cs.iter().for_each(|c| write_command(c, layout, depth, out)),
        Command::If(cond, t, e) => {
            indent(depth, out);
            write_cond_head("if", cond, layout, out);
            write_command(t, layout, depth + 1, out);
            indent(depth, out);
            out.push_str("} else {\n");
            write_command(e, layout, depth + 1, out);
            indent(depth, out);
            out.push_str("}\n");
        }
        Command::While(cond, body) => {
            indent(depth, out);
            write_cond_head("while", cond, layout, out);
            write_command(body, layout, depth + 1, out);
            indent(depth, out);
            out.push_str("}\n");
        }
    }
}

pub fn command_to_string(c: &Command, layout: &Layout) -> String {
    let mut out = String::new();
    write_command(c, layout, 0, &mut out);
    out
}

/// The whole system as a self-contained model file: every task fully
/// expanded, config spelled out, user variables with their initial values
/// and boot-state variables that differ from the defaults in an `init` block.
pub fn render_system(sys: &System) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "system \"{}\"", sys.name);
    out.push_str("config {\n");
    for (k, v) in sys.config.entries() {
        let _ = writeln!(out, "  {k} = {v}");
    }
    out.push_str("}\n");
    let base = sys.default_init();
    for (id, decl) in sys.layout.user_vars() {
        let _ = writeln!(out, "var {}: {} = {}", decl.name, decl.ty, sys.init.get(id));
    }
    let changed: Vec<_> = sys.init.diff(&base).filter(|id| sys.layout.is_canonical(*id)).collect();
    if !changed.is_empty() {
        out.push_str("init {\n");
        for id in changed {
            let _ = writeln!(out, "  {} = {};", sys.layout.name(id), sys.init.get(id));
        }
        out.push_str("}\n");
    }
    for task in &sys.tasks {
        let _ = writeln!(out, "task {} as {} {{", task.name, task.owner);
        write_command(&task.body, &sys.layout, 1, &mut out);
        out.push_str("}\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::expr::Builtin;
    use crate::kernel::state::VarId;
    use crate::kernel::routine::Routines;

    fn layout() -> Layout {
        Layout::canonical(Routines::new(2, 1), 1, false)
    }

    #[test]
    fn precedence_parenthesizes_only_when_needed() {
        let l = layout();
        let at = || Expr::Var(VarId::AT);
        let e = Expr::and(vec![
            Expr::member(
                Expr::nat(1),
                Expr::diff(
                    Expr::diff(Expr::Var(VarId::EIT), Expr::SetLit(vec![at()])),
                    Expr::call(Builtin::SetOf, vec![Expr::Var(VarId::AT_STACK)]),
                ),
            ),
            Expr::or(vec![Expr::at_is(2), Expr::at_is(3)]),
        ]);
        assert_eq!(
            expr_to_string(&e, &l),
            "1 in EIT minus {AT} minus set(ATStack) && (AT = 2 || AT = 3)"
        );
        let right = Expr::diff(Expr::Var(VarId::EIT), Expr::diff(Expr::Var(VarId::E), Expr::Var(VarId::E)));
        assert_eq!(expr_to_string(&right, &l), "EIT minus (E minus E)");
        let push = Expr::push(at(), Expr::push(Expr::nat(0), Expr::Var(VarId::AT_STACK)));
        assert_eq!(expr_to_string(&push, &l), "AT # 0 # ATStack");
        let neg = Expr::not(Expr::eq(at(), Expr::nat(1)));
        assert_eq!(expr_to_string(&neg, &l), "!(AT = 1)");
        let imp = Expr::implies(Expr::implies(Expr::bool(true), Expr::bool(false)), Expr::bool(true));
        assert_eq!(expr_to_string(&imp, &l), "(true => false) => true");
    }

    #[test]
    fn commands_render_one_point_per_line() {
        let l = layout();
        let c = Command::while_(
            "loop",
            Expr::bool(true),
            Command::seq(vec![
                Command::await_(Expr::at_is(2), "a", vec![Update::new(VarId::SVCA_REQ, Expr::bool(true))]),
                Command::basic("b", vec![]),
            ]),
        );
        assert_eq!(
            command_to_string(&c, &l),
            "loop: while (true) {\n  a: await (AT = 2) { SVCaReq := true }\n  b: skip;\n}\n"
        );
    }
}
