//! Task bodies flattened into control-flow graphs of atomic points.

use std::collections::HashMap;

use crate::kernel::{
    apply_update, Command, ControlView, Ctx, EvalError, Expr, GlobalState, Layout, System, Update,
};

/// Program counter of a finished task.
pub const END: u16 = u16::MAX;

#[derive(Clone, Debug)]
pub enum Node {
    Action {
        label: String,
        guard: Option<Expr>,
        branches: Vec<Vec<Update>>,
        next: u16,
    },
    Test {
        label: String,
        guard: Option<Expr>,
        test: Expr,
        then: u16,
        els: u16,
    },
}

impl Node {
    pub fn label(&self) -> &str {
        match self {
            Node::Action { label, .. } | Node::Test { label, .. } => label,
        }
    }

    pub fn guard(&self) -> Option<&Expr> {
        match self {
            Node::Action { guard, .. } | Node::Test { guard, .. } => guard.as_ref(),
        }
    }
}

/// One task as a graph; node `i` is the task's `i`-th atomic point in
/// syntactic order.
#[derive(Clone, Debug)]
pub struct TaskProgram {
    pub name: String,
    pub owner: u32,
    pub nodes: Vec<Node>,
    pub entry: u16,
    labels: HashMap<String, u16>,
}

impl TaskProgram {
    pub fn compile(name: &str, owner: u32, body: &Command) -> Self {
        let mut nodes = Vec::new();
        let entry = build(body, END, &mut nodes);
        // `build` allocates back to front; renumber into syntactic order.
        let order: Vec<String> = body.atomic_points().iter().map(|p| p.label.to_string()).collect();
        let by_label: HashMap<&str, u16> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.label(), i as u16))
            .collect();
        let mut renumber = vec![END; nodes.len()];
        for (new, label) in order.iter().enumerate() {
            renumber[by_label[label.as_str()] as usize] = new as u16;
        }
        let map = |pc: u16| if pc == END { END } else { renumber[pc as usize] };
        let mut sorted: Vec<Option<Node>> = vec![None; nodes.len()];
        for (old, mut node) in nodes.into_iter().enumerate() {
            match &mut node {
                Node::Action { next, .. } => *next = map(*next),
                Node::Test { then, els, .. } => {
                    *then = map(*then);
                    *els = map(*els);
                }
            }
            sorted[renumber[old] as usize] = Some(node);
        }
        let nodes: Vec<Node> = sorted.into_iter().map(|n| n.expect("labels are unique")).collect();
        let labels = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.label().to_string(), i as u16))
            .collect();
        TaskProgram {
            name: name.to_string(),
            owner,
            nodes,
            entry: map(entry),
            labels,
        }
    }

    pub fn pc_of(&self, label: &str) -> Option<u16> {
        self.labels.get(label).copied()
    }

    pub fn label_at(&self, pc: u16) -> &str {
        if pc == END {
            "end"
        } else {
            self.nodes[pc as usize].label()
        }
    }
}

fn build(c: &Command, next: u16, nodes: &mut Vec<Node>) -> u16 {
    let push = |nodes: &mut Vec<Node>, n: Node| {
        nodes.push(n);
        assert!(nodes.len() < END as usize, "task has too many atomic points");
        (nodes.len() - 1) as u16
    };
    match c {
        Command::Skip => next,
        Command::Basic(a) | Command::Await(_, a) => {
            let guard = match c {
                Command::Await(g, _) => Some(g.clone()),
                _ => None,
            };
            push(
                nodes,
                Node::Action {
                    label: a.label.clone(),
                    guard,
                    branches: a.branches.clone(),
                    next,
                },
            )
        }
        Command::Seq(cs) => cs.iter().rev().fold(next, |k, c| build(c, k, nodes)),
        Command::If(cond, t, e) => {
            let then = build(t, next, nodes);
            let els = build(e, next, nodes);
            push(
                nodes,
                Node::Test {
                    label: cond.label.clone(),
                    guard: cond.guard.clone(),
                    test: cond.test.clone(),
                    then,
                    els,
                },
            )
        }
        Command::While(cond, body) => {
            // The test node's index is needed as the body's continuation
            // before the node exists: reserve it.
            let at = push(
                nodes,
                Node::Test {
                    label: cond.label.clone(),
                    guard: cond.guard.clone(),
                    test: cond.test.clone(),
                    then: END,
                    els: next,
                },
            );
            let body_entry = build(body, at, nodes);
            if let Node::Test { then, .. } = &mut nodes[at as usize] {
                *then = body_entry;
            }
            at
        }
    }
}

/// Global state plus one program counter per task: a node of the state graph.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct FullState {
    pub globals: GlobalState,
    pub pcs: Vec<u16>,
}

/// A system compiled for execution.
#[derive(Clone, Debug)]
pub struct Program {
    pub sys: System,
    pub tasks: Vec<TaskProgram>,
}

/// One enabled transition out of a state.
#[derive(Clone, Debug)]
pub struct Successor {
    pub task: usize,
    pub pc: u16,
    pub branch: usize,
    /// `Err` when the step's effect cannot be evaluated: a model error.
    pub result: Result<FullState, EvalError>,
}

impl Program {
    pub fn new(sys: System) -> Self {
        let tasks = sys
            .tasks
            .iter()
            .map(|t| TaskProgram::compile(&t.name, t.owner, &t.body))
            .collect();
        Program { sys, tasks }
    }

    pub fn layout(&self) -> &Layout {
        &self.sys.layout
    }

    pub fn initial(&self) -> FullState {
        FullState {
            globals: self.sys.init.clone(),
            pcs: self.tasks.iter().map(|t| t.entry).collect(),
        }
    }

    pub fn encode(&self, s: &FullState) -> Vec<u8> {
        let mut out = Vec::with_capacity(64);
        self.sys.layout.encode(&s.globals, &mut out);
        for pc in &s.pcs {
            out.extend_from_slice(&pc.to_le_bytes());
        }
        out
    }

    pub fn decode(&self, buf: &[u8]) -> FullState {
        let mut pos = 0;
        let globals = self.sys.layout.decode(buf, &mut pos);
        let pcs = buf[pos..]
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect();
        FullState { globals, pcs }
    }

    pub fn label(&self, task: usize, pc: u16) -> &str {
        self.tasks[task].label_at(pc)
    }

    /// Every enabled transition, ordered by task index then branch index.
    /// A guard that cannot be evaluated yields a single failed successor.
    pub fn successors(&self, s: &FullState) -> Vec<Successor> {
        let ctx = Ctx::new(&self.sys.env);
        let mut out = Vec::new();
        for (task, prog) in self.tasks.iter().enumerate() {
            let pc = s.pcs[task];
            if pc == END {
                continue;
            }
            let node = &prog.nodes[pc as usize];
            let fail = |e: EvalError| Successor {
                task,
                pc,
                branch: 0,
                result: Err(e),
            };
            if let Some(g) = node.guard() {
                match g.eval_bool(&s.globals, ctx) {
                    Ok(true) => {}
                    Ok(false) => continue,
                    Err(e) => {
                        out.push(fail(e));
                        continue;
                    }
                }
            }
            match node {
                Node::Action { branches, next, .. } => {
                    for (branch, updates) in branches.iter().enumerate() {
                        let result = apply_update(updates, &s.globals, ctx, &self.sys.layout).map(|globals| {
                            let mut pcs = s.pcs.clone();
                            pcs[task] = *next;
                            FullState { globals, pcs }
                        });
                        out.push(Successor {
                            task,
                            pc,
                            branch,
                            result,
                        });
                    }
                }
                Node::Test { test, then, els, .. } => {
                    let result = test.eval_bool(&s.globals, ctx).map(|b| {
                        let mut pcs = s.pcs.clone();
                        pcs[task] = if b { *then } else { *els };
                        FullState {
                            globals: s.globals.clone(),
                            pcs,
                        }
                    });
                    out.push(Successor {
                        task,
                        pc,
                        branch: 0,
                        result,
                    });
                }
            }
        }
        out
    }

    /// Evaluates an invariant, which may mention program counters via `at`.
    pub fn holds(&self, inv: &Expr, s: &FullState) -> Result<bool, EvalError> {
        let view = PcView { prog: self, pcs: &s.pcs };
        inv.eval_bool(&s.globals, Ctx::with_control(&self.sys.env, &view))
    }
}

struct PcView<'a> {
    prog: &'a Program,
    pcs: &'a [u16],
}

impl ControlView for PcView<'_> {
    fn at(&self, routine: u32, label: &str) -> bool {
        self.prog
            .tasks
            .iter()
            .zip(self.pcs)
            .any(|(t, pc)| t.owner == routine && t.pc_of(label) == Some(*pc))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::echronos::{build_system, SystemConfig};
    use crate::kernel::{PointKind, VarId, Value};

    #[test]
    fn node_order_follows_syntax() {
        let sys = build_system(&SystemConfig::new(2, 1, 1)).unwrap();
        for (t, task) in sys.tasks.iter().enumerate() {
            let prog = TaskProgram::compile(&task.name, task.owner, &task.body);
            let points = task.body.atomic_points();
            assert_eq!(prog.nodes.len(), points.len(), "task {t}");
            for (n, p) in prog.nodes.iter().zip(&points) {
                assert_eq!(n.label(), p.label);
                assert_eq!(matches!(n, Node::Test { .. }), p.kind == PointKind::Test);
            }
            assert_eq!(prog.entry, 0);
        }
    }

    #[test]
    fn loops_close_back_to_their_test() {
        let sys = build_system(&SystemConfig::new(1, 0, 0)).unwrap();
        let user = &sys.tasks[3];
        let prog = TaskProgram::compile(&user.name, user.owner, &user.body);
        let wait = prog.pc_of("wait").unwrap();
        match &prog.nodes[wait as usize] {
            // empty body: the test loops onto itself, exit returns to the outer loop
            Node::Test { then, els, .. } => {
                assert_eq!(*then, wait);
                assert_eq!(*els, prog.pc_of("loop").unwrap());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn initial_successors() {
        let p = Program::new(build_system(&SystemConfig::new(2, 1, 1)).unwrap());
        let s = p.initial();
        let succ = p.successors(&s);
        let fired: Vec<(&str, &str)> = succ
            .iter()
            .map(|x| (p.tasks[x.task].name.as_str(), p.label(x.task, x.pc)))
            .collect();
        // svca_take and irq0 sit at their unguarded loop tests; user0 is active
        assert_eq!(fired, vec![("svca_take", "loop"), ("irq0", "loop"), ("user0", "loop")]);
        let mut svcs = s.clone();
        svcs.globals.set(VarId::AT, Value::Nat(0));
        let names: Vec<&str> = p.successors(&svcs).iter().map(|x| p.tasks[x.task].name.as_str()).collect();
        assert!(!names.iter().any(|n| n.starts_with("user")));
    }

    #[test]
    fn encoding_round_trips() {
        let p = Program::new(build_system(&SystemConfig::new(2, 1, 1)).unwrap());
        let s = p.initial();
        assert_eq!(p.decode(&p.encode(&s)), s);
    }
}
