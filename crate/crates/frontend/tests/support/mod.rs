//! Reference exploration used to cross-check the breadth-first explorer.
//!
//! Depth-first, directly over the command trees: each task's control is a
//! stack of pending commands, identified by address, so no compiled program
//! graph is shared with the explorer under test.

#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use ogwb_core::kernel::{apply_update, Command, Ctx, Expr, GlobalState, System};

/// Pending commands of one task, innermost last. Never holds `Skip` or
/// `Seq`.
type Cont<'a> = Vec<&'a Command>;

#[derive(Clone)]
struct OState<'a> {
    globals: GlobalState,
    conts: Vec<Cont<'a>>,
}

impl OState<'_> {
    fn key(&self) -> (GlobalState, Vec<Vec<usize>>) {
        let conts = self
            .conts
            .iter()
            .map(|k| k.iter().map(|c| *c as *const Command as usize).collect())
            .collect();
        (self.globals.clone(), conts)
    }
}

/// Pushes `c` fully flattened, so equal futures get equal stacks.
fn push<'a>(k: &mut Cont<'a>, c: &'a Command) {
    match c {
        Command::Skip => {}
        // the first statement ends on top
        Command::Seq(cs) => cs.iter().rev().for_each(|c| push(k, c)),
        _ => k.push(c),
    }
}

fn step<'a>(sys: &'a System, s: &OState<'a>) -> Vec<OState<'a>> {
    let ctx = Ctx::new(&sys.env);
    let mut out = Vec::new();
    for (t, k) in s.conts.iter().enumerate() {
        let Some(&top) = k.last() else { continue };
        let guard = match top {
            Command::Await(g, _) => Some(g),
            Command::If(c, ..) | Command::While(c, _) => c.guard.as_ref(),
            _ => None,
        };
        if let Some(g) = guard {
            if g.eval_bool(&s.globals, ctx) != Ok(true) {
                continue;
            }
        }
        let mut rest = k.clone();
        rest.pop();
        let with = |globals: GlobalState, k: Cont<'a>| {
            let mut conts = s.conts.clone();
            conts[t] = k;
            OState { globals, conts }
        };
        match top {
            Command::Basic(a) | Command::Await(_, a) => {
                for branch in &a.branches {
                    if let Ok(g) = apply_update(branch, &s.globals, ctx, &sys.layout) {
                        out.push(with(g, rest.clone()));
                    }
                }
            }
            Command::If(c, then, els) => {
                if let Ok(b) = c.test.eval_bool(&s.globals, ctx) {
                    let mut k = rest;
                    push(&mut k, if b { then } else { els });
                    out.push(with(s.globals.clone(), k));
                }
            }
            Command::While(c, body) => {
                if let Ok(b) = c.test.eval_bool(&s.globals, ctx) {
                    let mut k = rest;
                    if b {
                        k.push(top);
                        push(&mut k, body);
                    }
                    out.push(with(s.globals.clone(), k));
                }
            }
            Command::Skip | Command::Seq(_) => unreachable!("flattened on push"),
        }
    }
    out
}

fn initial(sys: &System) -> OState<'_> {
    let conts = sys
        .tasks
        .iter()
        .map(|t| {
            let mut k = Vec::new();
            push(&mut k, &t.body);
            k
        })
        .collect();
    OState {
        globals: sys.init.clone(),
        conts,
    }
}

/// Number of distinct reachable states, or `None` past `limit`.
pub fn count_reachable(sys: &System, limit: usize) -> Option<usize> {
    let init = initial(sys);
    let mut seen = HashSet::new();
    seen.insert(init.key());
    let mut todo = vec![init];
    while let Some(s) = todo.pop() {
        for n in step(sys, &s) {
            if seen.insert(n.key()) {
                if seen.len() > limit {
                    return None;
                }
                todo.push(n);
            }
        }
    }
    Some(seen.len())
}

/// Fewest steps to a state violating `inv` (which must not mention
/// program points), searching depth-first and revisiting a state whenever
/// it is reached by a shorter path.
pub fn shortest_violation(sys: &System, inv: &Expr, max_depth: usize) -> Option<usize> {
    let ctx = Ctx::new(&sys.env);
    let mut best: Option<usize> = None;
    let mut depth_of: HashMap<_, usize> = HashMap::new();
    let init = initial(sys);
    depth_of.insert(init.key(), 0);
    let mut todo = vec![(init, 0usize)];
    while let Some((s, d)) = todo.pop() {
        if inv.eval_bool(&s.globals, ctx) != Ok(true) {
            best = Some(best.map_or(d, |b| b.min(d)));
            continue;
        }
        if d >= max_depth || best.is_some_and(|b| d + 1 >= b) {
            continue;
        }
        for n in step(sys, &s) {
            let k = n.key();
            if depth_of.get(&k).is_none_or(|old| d + 1 < *old) {
                depth_of.insert(k, d + 1);
                todo.push((n, d + 1));
            }
        }
    }
    best
}
