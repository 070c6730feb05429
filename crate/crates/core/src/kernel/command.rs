use std::collections::HashSet;

use super::expr::{Ctx, EvalError, Expr};
use super::state::{GlobalState, Layout, VarId};

/// `target := value`
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Update {
    pub target: VarId,
    pub value: Expr,
}

impl Update {
    pub fn new(target: VarId, value: Expr) -> Self {
        Update { target, value }
    }
}

/// Simultaneous assignments: every right-hand side is evaluated in the
/// pre-state, then all targets are written.
pub type Updates = Vec<Update>;

/// An atomic state change. More than one branch makes it nondeterministic:
/// each branch is a separate transition.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Action {
    pub label: String,
    pub branches: Vec<Updates>,
    pub assertion: Option<Expr>,
}

impl Action {
    pub fn new(label: impl Into<String>, updates: Updates) -> Self {
        Action {
            label: label.into(),
            branches: vec![updates],
            assertion: None,
        }
    }

    pub fn choice(label: impl Into<String>, branches: Vec<Updates>) -> Self {
        Action {
            label: label.into(),
            branches,
            assertion: None,
        }
    }
}

/// The condition test of an `if`/`while`. Evaluating the test and picking
/// the branch is one atomic step, enabled only when `guard` holds.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Cond {
    pub label: String,
    pub guard: Option<Expr>,
    pub test: Expr,
    pub assertion: Option<Expr>,
}

impl Cond {
    pub fn new(label: impl Into<String>, test: Expr) -> Self {
        Cond {
            label: label.into(),
            guard: None,
            test,
            assertion: None,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Command {
    Skip,
    Basic(Action),
    /// Blocks until the guard holds, then runs the body in the same step.
    Await(Expr, Action),
    Seq(Vec<Command>),
    If(Cond, Box<Command>, Box<Command>),
    While(Cond, Box<Command>),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PointKind {
    Action,
    Test,
}

/// A transition point of a command, in syntactic order.
#[derive(Clone, Copy, Debug)]
pub struct AtomicPoint<'a> {
    pub label: &'a str,
    pub kind: PointKind,
    pub guard: Option<&'a Expr>,
    pub assertion: Option<&'a Expr>,
    /// Number of distinct effects (1 for tests and deterministic actions).
    pub branches: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CommandError {
    #[error("label `{0}` used twice")]
    DuplicateLabel(String),
    #[error("invalid label `{0}`")]
    BadLabel(String),
    #[error("`{label}` assigns `{var}` twice in one atomic step")]
    DuplicateTarget { label: String, var: String },
    #[error("`{0}` has no branches")]
    NoBranches(String),
}

impl Command {
    pub fn seq(cmds: Vec<Command>) -> Command {
        Command::Seq(cmds)
    }

    pub fn basic(label: impl Into<String>, updates: Updates) -> Command {
        Command::Basic(Action::new(label, updates))
    }

    pub fn await_(guard: Expr, label: impl Into<String>, updates: Updates) -> Command {
        Command::Await(guard, Action::new(label, updates))
    }

    pub fn if_(label: impl Into<String>, test: Expr, then: Command, els: Command) -> Command {
        Command::If(Cond::new(label, test), Box::new(then), Box::new(els))
    }

    pub fn while_(label: impl Into<String>, test: Expr, body: Command) -> Command {
        Command::While(Cond::new(label, test), Box::new(body))
    }

    /// Every transition point in syntactic (pre-order) order.
    pub fn atomic_points(&self) -> Vec<AtomicPoint<'_>> {
        let mut out = Vec::new();
        self.collect_points(&mut out);
        out
    }

    fn collect_points<'a>(&'a self, out: &mut Vec<AtomicPoint<'a>>) {
        match self {
            Command::Skip => {}
            Command::Basic(a) => out.push(AtomicPoint {
                label: &a.label,
                kind: PointKind::Action,
                guard: None,
                assertion: a.assertion.as_ref(),
                branches: a.branches.len(),
            }),
            Command::Await(g, a) => out.push(AtomicPoint {
                label: &a.label,
                kind: PointKind::Action,
                guard: Some(g),
                assertion: a.assertion.as_ref(),
                branches: a.branches.len(),
            }),
            Command::Seq(cs) => cs.iter().for_each(|c| c.collect_points(out)),
            Command::If(c, t, e) => {
                out.push(c.point());
                t.collect_points(out);
                e.collect_points(out);
            }
            Command::While(c, body) => {
                out.push(c.point());
                body.collect_points(out);
            }
        }
    }

    pub fn point_count(&self) -> usize {
        match self {
            Command::Skip => 0,
            Command::Basic(_) | Command::Await(..) => 1,
            Command::Seq(cs) => cs.iter().map(Command::point_count).sum(),
            Command::If(_, t, e) => 1 + t.point_count() + e.point_count(),
            Command::While(_, b) => 1 + b.point_count(),
        }
    }

    /// Visits the assertion slot of every point with that point's guard, in
    /// syntactic order.
    pub fn for_each_assertion_mut(&mut self, f: &mut impl FnMut(&mut Option<Expr>, Option<&Expr>)) {
        match self {
            Command::Skip => {}
            Command::Basic(a) => f(&mut a.assertion, None),
            Command::Await(g, a) => f(&mut a.assertion, Some(g)),
            Command::Seq(cs) => cs.iter_mut().for_each(|c| c.for_each_assertion_mut(f)),
            Command::If(c, t, e) => {
                f(&mut c.assertion, c.guard.as_ref());
                t.for_each_assertion_mut(f);
                e.for_each_assertion_mut(f);
            }
            Command::While(c, b) => {
                f(&mut c.assertion, c.guard.as_ref());
                b.for_each_assertion_mut(f);
            }
        }
    }

    /// Checks label uniqueness/shape and that no atomic step assigns a
    /// variable twice.
    pub fn validate(&self, layout: &Layout) -> Result<(), CommandError> {
        let mut seen = HashSet::new();
        self.validate_into(layout, &mut seen)
    }

    fn validate_into<'a>(&'a self, layout: &Layout, seen: &mut HashSet<&'a str>) -> Result<(), CommandError> {
        let mut label = |l: &'a str| {
            if !is_label(l) {
                return Err(CommandError::BadLabel(l.to_string()));
            }
            if !seen.insert(l) {
                return Err(CommandError::DuplicateLabel(l.to_string()));
            }
            Ok(())
        };
        match self {
            Command::Skip => Ok(()),
            Command::Basic(a) | Command::Await(_, a) => {
                label(&a.label)?;
                if a.branches.is_empty() {
                    return Err(CommandError::NoBranches(a.label.clone()));
                }
                for branch in &a.branches {
                    let mut targets = HashSet::new();
                    for u in branch {
                        if !targets.insert(u.target) {
                            return Err(CommandError::DuplicateTarget {
                                label: a.label.clone(),
                                var: layout.name(u.target).to_string(),
                            });
                        }
                    }
                }
                Ok(())
            }
            Command::Seq(cs) => cs.iter().try_for_each(|c| c.validate_into(layout, seen)),
            Command::If(c, t, e) => {
                label(&c.label)?;
                t.validate_into(layout, seen)?;
                e.validate_into(layout, seen)
            }
            Command::While(c, b) => {
                label(&c.label)?;
                b.validate_into(layout, seen)
            }
        }
    }
}

impl Cond {
    fn point(&self) -> AtomicPoint<'_> {
        AtomicPoint {
            label: &self.label,
            kind: PointKind::Test,
            guard: self.guard.as_ref(),
            assertion: self.assertion.as_ref(),
            branches: 1,
        }
    }
}

/// Labels are identifiers, optionally dotted (`sched.pick`).
pub fn is_label(l: &str) -> bool {
    let mut chars = l.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

/// Executes simultaneous updates against `s`, returning the new state.
pub fn apply_update(
    updates: &[Update],
    s: &GlobalState,
    ctx: Ctx<'_>,
    layout: &Layout,
) -> Result<GlobalState, EvalError> {
    let mut values = Vec::with_capacity(updates.len());
    for u in updates {
        let v = u.value.eval(s, ctx)?;
        if !layout.ty(u.target).admits(&v) {
            return Err(EvalError::OutOfDomain {
                var: layout.name(u.target).to_string(),
                value: v.to_string(),
            });
        }
        values.push(v);
    }
    let mut next = s.clone();
    for (u, v) in updates.iter().zip(values) {
        next.set(u.target, v);
    }
    Ok(next)
}

/// Fires a single atomic command (`Basic` or `Await`, first branch) on `s`.
/// Returns `Ok(None)` when the await guard is false; panics on compound
/// commands, which are not one step.
pub fn fire_atomic(
    c: &Command,
    s: &GlobalState,
    ctx: Ctx<'_>,
    layout: &Layout,
) -> Result<Option<GlobalState>, EvalError> {
    match c {
        Command::Basic(a) => apply_update(&a.branches[0], s, ctx, layout).map(Some),
        Command::Await(g, a) => {
            if !g.eval_bool(s, ctx)? {
                return Ok(None);
            }
            apply_update(&a.branches[0], s, ctx, layout).map(Some)
        }
        other => panic!("not a single atomic command: {other:?}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::echronos::{initial_state, SystemConfig};
    use crate::kernel::value::{NatSet, Value};
    use proptest::prelude::*;

    fn setup() -> (SystemConfig, Layout, GlobalState) {
        let cfg = SystemConfig::new(2, 1, 2);
        let layout = cfg.layout();
        let s = initial_state(&cfg, &layout);
        (cfg, layout, s)
    }

    #[test]
    fn push_reads_old_active_task() {
        let (cfg, layout, s) = setup();
        let env = cfg.env().unwrap();
        let u = vec![
            Update::new(VarId::AT_STACK, Expr::push(Expr::Var(VarId::AT), Expr::Var(VarId::AT_STACK))),
            Update::new(VarId::AT, Expr::nat(0)),
        ];
        let next = apply_update(&u, &s, Ctx::new(&env), &layout).unwrap();
        assert_eq!(next.get(VarId::AT), &Value::Nat(0));
        assert_eq!(next.get(VarId::AT_STACK), &Value::nat_stack(&[2]));
    }

    #[test]
    fn idempotent_write_is_structurally_equal() {
        let (cfg, layout, s) = setup();
        let env = cfg.env().unwrap();
        let u = vec![Update::new(VarId::SVCA_REQ, Expr::bool(false))];
        let next = apply_update(&u, &s, Ctx::new(&env), &layout).unwrap();
        assert_eq!(next, s);
    }

    #[test]
    fn event_set_difference() {
        let (cfg, layout, mut s) = setup();
        let env = cfg.env().unwrap();
        s.set(VarId::E, Value::Set([0, 1].into_iter().collect()));
        s.set(VarId::E_TMP, Value::Set(NatSet::singleton(0)));
        let u = vec![Update::new(
            VarId::E,
            Expr::diff(Expr::Var(VarId::E), Expr::Var(VarId::E_TMP)),
        )];
        let next = apply_update(&u, &s, Ctx::new(&env), &layout).unwrap();
        assert_eq!(next.get(VarId::E), &Value::Set(NatSet::singleton(1)));
    }

    #[test]
    fn out_of_domain_write_is_rejected() {
        let (cfg, layout, s) = setup();
        let env = cfg.env().unwrap();
        let u = vec![Update::new(VarId::AT, Expr::nat(99))];
        assert!(matches!(
            apply_update(&u, &s, Ctx::new(&env), &layout),
            Err(EvalError::OutOfDomain { .. })
        ));
    }

    #[test]
    fn point_counts() {
        let abc = Command::seq(vec![
            Command::basic("a", vec![]),
            Command::basic("b", vec![]),
            Command::basic("c", vec![]),
        ]);
        assert_eq!(abc.atomic_points().len(), 3);
        assert_eq!(Command::Skip.atomic_points().len(), 0);
        let w = Command::while_("w", Expr::bool(true), Command::basic("b", vec![]));
        let pts = w.atomic_points();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].kind, PointKind::Test);
        assert_eq!(pts[1].label, "b");
        assert_eq!(w.point_count(), 2);
    }

    #[test]
    fn validation() {
        let (_, layout, _) = setup();
        let dup = Command::seq(vec![Command::basic("a", vec![]), Command::basic("a", vec![])]);
        assert_eq!(dup.validate(&layout), Err(CommandError::DuplicateLabel("a".into())));
        let twice = Command::basic(
            "a",
            vec![
                Update::new(VarId::AT, Expr::nat(0)),
                Update::new(VarId::AT, Expr::nat(1)),
            ],
        );
        assert!(matches!(twice.validate(&layout), Err(CommandError::DuplicateTarget { .. })));
        assert!(Command::basic("9a", vec![]).validate(&layout).is_err());
        assert!(Command::basic("sched.pick", vec![]).validate(&layout).is_ok());
    }

    fn arb_state() -> impl Strategy<Value = (u32, Vec<u32>, bool, u64)> {
        (0u32..5, proptest::collection::vec(0u32..5, 0..4), any::<bool>(), 0u64..32)
    }

    proptest! {
        #[test]
        fn simultaneous_equals_frozen_sequential((at, st, req, eit) in arb_state()) {
            let (cfg, layout, mut s) = setup();
            let env = cfg.env().unwrap();
            s.set(VarId::AT, Value::Nat(at));
            s.set(VarId::AT_STACK, Value::nat_stack(&st));
            s.set(VarId::SVCA_REQ, Value::Bool(req));
            s.set(VarId::EIT, Value::Set(NatSet::from_bits(eit)));
            let before = s.clone();
            let updates = vec![
                Update::new(VarId::AT_STACK, Expr::push(Expr::Var(VarId::AT), Expr::Var(VarId::AT_STACK))),
                Update::new(VarId::AT, Expr::nat(1)),
                Update::new(VarId::SVCA_REQ, Expr::not(Expr::Var(VarId::SVCA_REQ))),
                Update::new(VarId::EIT, Expr::diff(Expr::Var(VarId::EIT), Expr::SetLit(vec![Expr::Var(VarId::AT)]))),
            ];
            let ctx = Ctx::new(&env);
            let simultaneous = apply_update(&updates, &s, ctx, &layout).unwrap();
            // purity
            prop_assert_eq!(&s, &before);
            let mut sequential = s.clone();
            for u in &updates {
                let v = u.value.eval(&before, ctx).unwrap();
                sequential.set(u.target, v);
            }
            prop_assert_eq!(&simultaneous, &sequential);
            // determinism
            prop_assert_eq!(apply_update(&updates, &s, ctx, &layout).unwrap(), simultaneous);
        }
    }
}
