//! The `control` transform: every atomic step of a task may only fire while
//! the task's routine is the active one.

use crate::kernel::{Command, Cond, Expr};

fn guarded(r: u32, existing: Option<Expr>) -> Expr {
    match existing {
        None => Expr::at_is(r),
        Some(g) => {
            let mut parts = vec![Expr::at_is(r)];
            match g {
                Expr::And(xs) => parts.extend(xs),
                other => parts.push(other),
            }
            Expr::and(parts)
        }
    }
}

/// Wraps every transition point of `c` in `AT = r`. Existing await guards
/// and condition guards are conjoined, not replaced. Applying it twice
/// guards twice.
pub fn control(r: u32, c: Command) -> Command {
    match c {
        Command::Skip => Command::Skip,
        Command::Basic(a) => Command::Await(Expr::at_is(r), a),
        Command::Await(g, a) => Command::Await(guarded(r, Some(g)), a),
        Command::Seq(cs) => Command::Seq(cs.into_iter().map(|c| control(r, c)).collect()),
        Command::If(cond, t, e) => Command::If(
            control_cond(r, cond),
            Box::new(control(r, *t)),
            Box::new(control(r, *e)),
        ),
        Command::While(cond, body) => {
            Command::While(control_cond(r, cond), Box::new(control(r, *body)))
        }
    }
}

fn control_cond(r: u32, c: Cond) -> Cond {
    Cond {
        guard: Some(guarded(r, c.guard)),
        ..c
    }
}
