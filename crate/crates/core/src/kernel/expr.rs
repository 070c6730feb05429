//! Expression and predicate syntax trees with their evaluator.
//!
//! Expressions stay inspectable so that `vcgen` can look at guard conjuncts
//! and substitute through updates. Evaluation is pure.

use std::collections::{BTreeSet, HashMap};

use super::routine::Routines;
use super::state::{GlobalState, VarId};
use super::value::{NatSet, Value};
use crate::echronos::{EventTable, SchedPolicy};
use crate::hw::InterruptPolicy;

/// Functions whose meaning depends on the system configuration or that
/// only exist to make invariants expressible.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Builtin {
    /// `sched_policy(R)`: highest-priority runnable user, if any.
    SchedPolicy,
    /// `handle_events(E, R)`: wake the user task mapped to each event.
    HandleEvents,
    /// `interrupt_policy(r)`: routines allowed to interrupt `r`.
    InterruptPolicy,
    /// `set(st)`: elements of a stack.
    SetOf,
    Card,
    Len,
    /// `last(st)`: bottom element of a stack.
    Last,
    /// `butlast(st)`: a stack without its bottom element.
    Butlast,
    /// `nodup(st)`: no element occurs twice.
    Nodup,
    /// `restrict(st, S)`: the stack with only the elements in `S`.
    Restrict,
    Users,
    Interrupts,
    IPrime,
    AllRoutines,
}

impl Builtin {
    pub const ALL: [Builtin; 14] = [
        Builtin::SchedPolicy,
        Builtin::HandleEvents,
        Builtin::InterruptPolicy,
        Builtin::SetOf,
        Builtin::Card,
        Builtin::Len,
        Builtin::Last,
        Builtin::Butlast,
        Builtin::Nodup,
        Builtin::Restrict,
        Builtin::Users,
        Builtin::Interrupts,
        Builtin::IPrime,
        Builtin::AllRoutines,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::SchedPolicy => "sched_policy",
            Builtin::HandleEvents => "handle_events",
            Builtin::InterruptPolicy => "interrupt_policy",
            Builtin::SetOf => "set",
            Builtin::Card => "card",
            Builtin::Len => "len",
            Builtin::Last => "last",
            Builtin::Butlast => "butlast",
            Builtin::Nodup => "nodup",
            Builtin::Restrict => "restrict",
            Builtin::Users => "U",
            Builtin::Interrupts => "I",
            Builtin::IPrime => "Iprime",
            Builtin::AllRoutines => "ROUTINES",
        }
    }

    /// Number of arguments; constants take none and are written without parens.
    pub fn arity(self) -> usize {
        match self {
            Builtin::Users | Builtin::Interrupts | Builtin::IPrime | Builtin::AllRoutines => 0,
            Builtin::HandleEvents | Builtin::Restrict => 2,
            _ => 1,
        }
    }

    pub fn from_name(name: &str) -> Option<Builtin> {
        Builtin::ALL.into_iter().find(|b| b.name() == name)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Expr {
    Var(VarId),
    Lit(Value),
    Not(Box<Expr>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
    Implies(Box<Expr>, Box<Expr>),
    Eq(Box<Expr>, Box<Expr>),
    Ne(Box<Expr>, Box<Expr>),
    /// Set built from element expressions, e.g. `{AT}`.
    SetLit(Vec<Expr>),
    Union(Box<Expr>, Box<Expr>),
    Diff(Box<Expr>, Box<Expr>),
    Inter(Box<Expr>, Box<Expr>),
    Member(Box<Expr>, Box<Expr>),
    /// `x # st`
    Push(Box<Expr>, Box<Expr>),
    Head(Box<Expr>),
    Tail(Box<Expr>),
    Some(Box<Expr>),
    The(Box<Expr>),
    /// `m(k)`
    Lookup(Box<Expr>, Box<Expr>),
    /// `m[k := v]`
    Override(Box<Expr>, Box<Expr>, Box<Expr>),
    Pair(Box<Expr>, Box<Expr>),
    Fst(Box<Expr>),
    Snd(Box<Expr>),
    /// Lazy conditional; only the selected branch is evaluated.
    Ite(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(Builtin, Vec<Expr>),
    /// `at(r, "label")`: the task owned by routine `r` is at the named point.
    /// Only meaningful in invariants checked by the explorer.
    At(Box<Expr>, String),
    /// Evaluating this is a model fault with the given kind.
    Abort(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("type mismatch: expected {expected}, found {found}")]
    TypeMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("head or tail of an empty stack")]
    EmptyStackAccess,
    #[error("projection of an absent optional value")]
    AbsentOptional,
    #[error("value {value} outside the domain of `{var}`")]
    OutOfDomain { var: String, value: String },
    #[error("map key {0} out of range")]
    KeyOutOfRange(u32),
    #[error("control predicate evaluated without a control state")]
    NoControl,
    #[error("event {0} maps to a non-user routine")]
    EventMapsToNonUser(u32),
    #[error("model abort: {0}")]
    Abort(String),
}

impl EvalError {
    /// Short stable name used in reports.
    pub fn kind(&self) -> &'static str {
        match self {
            EvalError::TypeMismatch { .. } => "TypeMismatch",
            EvalError::EmptyStackAccess => "EmptyStackAccess",
            EvalError::AbsentOptional => "AbsentOptional",
            EvalError::OutOfDomain { .. } => "OutOfDomain",
            EvalError::KeyOutOfRange(_) => "KeyOutOfRange",
            EvalError::NoControl => "NoControl",
            EvalError::EventMapsToNonUser(_) => "EventMapsToNonUser",
            EvalError::Abort(_) => "Abort",
        }
    }
}

/// Configuration-dependent meaning of the builtins.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Env {
    pub routines: Routines,
    pub policy: InterruptPolicy,
    pub sched: SchedPolicy,
    pub events: EventTable,
}

/// Read access to task program counters, for `at(..)` in invariants.
pub trait ControlView {
    fn at(&self, routine: u32, label: &str) -> bool;
}

#[derive(Clone, Copy)]
pub struct Ctx<'a> {
    pub env: &'a Env,
    pub control: Option<&'a dyn ControlView>,
}

impl<'a> Ctx<'a> {
    pub fn new(env: &'a Env) -> Self {
        Ctx { env, control: None }
    }

    pub fn with_control(env: &'a Env, control: &'a dyn ControlView) -> Self {
        Ctx {
            env,
            control: Some(control),
        }
    }
}

fn mismatch(expected: &'static str, found: &Value) -> EvalError {
    EvalError::TypeMismatch {
        expected,
        found: found.kind(),
    }
}

fn as_bool(v: Value) -> Result<bool, EvalError> {
    match v {
        Value::Bool(b) => Ok(b),
        other => Err(mismatch("bool", &other)),
    }
}

fn as_nat(v: Value) -> Result<u32, EvalError> {
    match v {
        Value::Nat(n) => Ok(n),
        other => Err(mismatch("nat", &other)),
    }
}

fn as_set(v: Value) -> Result<NatSet, EvalError> {
    match v {
        Value::Set(s) => Ok(s),
        other => Err(mismatch("set", &other)),
    }
}

fn as_stack(v: Value) -> Result<Vec<Value>, EvalError> {
    match v {
        Value::Stack(items) => Ok(items),
        other => Err(mismatch("stack", &other)),
    }
}

fn as_map(v: Value) -> Result<Vec<Value>, EvalError> {
    match v {
        Value::Map(entries) => Ok(entries),
        other => Err(mismatch("map", &other)),
    }
}

fn nat_set_of(items: &[Value]) -> Result<NatSet, EvalError> {
    items
        .iter()
        .map(|v| match v {
            Value::Nat(n) => Ok(*n),
            other => Err(mismatch("nat", other)),
        })
        .collect()
}

impl Expr {
    pub fn var(id: VarId) -> Expr {
        Expr::Var(id)
    }

    pub fn nat(n: u32) -> Expr {
        Expr::Lit(Value::Nat(n))
    }

    pub fn bool(b: bool) -> Expr {
        Expr::Lit(Value::Bool(b))
    }

    pub fn set(s: NatSet) -> Expr {
        Expr::Lit(Value::Set(s))
    }

    pub fn eq(a: Expr, b: Expr) -> Expr {
        Expr::Eq(Box::new(a), Box::new(b))
    }

    pub fn ne(a: Expr, b: Expr) -> Expr {
        Expr::Ne(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    /// Conjunction; a single conjunct is returned as is.
    pub fn and(mut parts: Vec<Expr>) -> Expr {
        match parts.len() {
            0 => Expr::bool(true),
            1 => parts.pop().unwrap(),
            _ => Expr::And(parts),
        }
    }

    pub fn or(mut parts: Vec<Expr>) -> Expr {
        match parts.len() {
            0 => Expr::bool(false),
            1 => parts.pop().unwrap(),
            _ => Expr::Or(parts),
        }
    }

    pub fn implies(a: Expr, b: Expr) -> Expr {
        Expr::Implies(Box::new(a), Box::new(b))
    }

    pub fn member(x: Expr, s: Expr) -> Expr {
        Expr::Member(Box::new(x), Box::new(s))
    }

    pub fn union(a: Expr, b: Expr) -> Expr {
        Expr::Union(Box::new(a), Box::new(b))
    }

    pub fn diff(a: Expr, b: Expr) -> Expr {
        Expr::Diff(Box::new(a), Box::new(b))
    }

    pub fn push(x: Expr, st: Expr) -> Expr {
        Expr::Push(Box::new(x), Box::new(st))
    }

    pub fn head(st: Expr) -> Expr {
        Expr::Head(Box::new(st))
    }

    pub fn tail(st: Expr) -> Expr {
        Expr::Tail(Box::new(st))
    }

    pub fn some(e: Expr) -> Expr {
        Expr::Some(Box::new(e))
    }

    pub fn the(e: Expr) -> Expr {
        Expr::The(Box::new(e))
    }

    pub fn lookup(m: Expr, k: Expr) -> Expr {
        Expr::Lookup(Box::new(m), Box::new(k))
    }

    pub fn override_(m: Expr, k: Expr, v: Expr) -> Expr {
        Expr::Override(Box::new(m), Box::new(k), Box::new(v))
    }

    pub fn pair(a: Expr, b: Expr) -> Expr {
        Expr::Pair(Box::new(a), Box::new(b))
    }

    pub fn fst(e: Expr) -> Expr {
        Expr::Fst(Box::new(e))
    }

    pub fn snd(e: Expr) -> Expr {
        Expr::Snd(Box::new(e))
    }

    pub fn ite(c: Expr, t: Expr, e: Expr) -> Expr {
        Expr::Ite(Box::new(c), Box::new(t), Box::new(e))
    }

    pub fn call(b: Builtin, args: Vec<Expr>) -> Expr {
        Expr::Call(b, args)
    }

    /// `AT = r`, the guard `control` inserts.
    pub fn at_is(r: u32) -> Expr {
        Expr::eq(Expr::Var(VarId::AT), Expr::nat(r))
    }

    /// If this is `AT = c` (either orientation) with a literal `c`, returns `c`.
    pub fn as_at_equality(&self) -> Option<u32> {
        if let Expr::Eq(a, b) = self {
            match (a.as_ref(), b.as_ref()) {
                (Expr::Var(VarId::AT), Expr::Lit(Value::Nat(c)))
                | (Expr::Lit(Value::Nat(c)), Expr::Var(VarId::AT)) => return Some(*c),
                _ => {}
            }
        }
        None
    }

    /// Top-level conjuncts, flattening nested conjunctions.
    pub fn conjuncts(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        fn walk<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
            match e {
                Expr::And(parts) => parts.iter().for_each(|p| walk(p, out)),
                other => out.push(other),
            }
        }
        walk(self, &mut out);
        out
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Expr::Lit(Value::Bool(true)))
    }

    pub fn is_false(&self) -> bool {
        matches!(self, Expr::Lit(Value::Bool(false)))
    }

    /// Immediate subexpressions.
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Var(_) | Expr::Lit(_) | Expr::Abort(_) => vec![],
            Expr::Not(a)
            | Expr::Head(a)
            | Expr::Tail(a)
            | Expr::Some(a)
            | Expr::The(a)
            | Expr::Fst(a)
            | Expr::Snd(a)
            | Expr::At(a, _) => vec![a],
            Expr::And(xs) | Expr::Or(xs) | Expr::SetLit(xs) | Expr::Call(_, xs) => {
                xs.iter().collect()
            }
            Expr::Implies(a, b)
            | Expr::Eq(a, b)
            | Expr::Ne(a, b)
            | Expr::Union(a, b)
            | Expr::Diff(a, b)
            | Expr::Inter(a, b)
            | Expr::Member(a, b)
            | Expr::Push(a, b)
            | Expr::Lookup(a, b)
            | Expr::Pair(a, b) => vec![a, b],
            Expr::Override(a, b, c) | Expr::Ite(a, b, c) => vec![a, b, c],
        }
    }

    /// Variables read by this expression.
    pub fn free_vars(&self, out: &mut BTreeSet<VarId>) {
        if let Expr::Var(id) = self {
            out.insert(*id);
        }
        for c in self.children() {
            c.free_vars(out);
        }
    }

    /// Whether the expression mentions control state (`at`).
    pub fn uses_control(&self) -> bool {
        matches!(self, Expr::At(..)) || self.children().into_iter().any(Expr::uses_control)
    }

    /// Simultaneous substitution of variables by expressions.
    pub fn subst(&self, map: &HashMap<VarId, Expr>) -> Expr {
        let s = |e: &Expr| Box::new(e.subst(map));
        let v = |xs: &[Expr]| xs.iter().map(|x| x.subst(map)).collect::<Vec<_>>();
        match self {
            Expr::Var(id) => map.get(id).cloned().unwrap_or(Expr::Var(*id)),
            Expr::Lit(_) | Expr::Abort(_) => self.clone(),
            Expr::Not(a) => Expr::Not(s(a)),
            Expr::And(xs) => Expr::And(v(xs)),
            Expr::Or(xs) => Expr::Or(v(xs)),
            Expr::Implies(a, b) => Expr::Implies(s(a), s(b)),
            Expr::Eq(a, b) => Expr::Eq(s(a), s(b)),
            Expr::Ne(a, b) => Expr::Ne(s(a), s(b)),
            Expr::SetLit(xs) => Expr::SetLit(v(xs)),
            Expr::Union(a, b) => Expr::Union(s(a), s(b)),
            Expr::Diff(a, b) => Expr::Diff(s(a), s(b)),
            Expr::Inter(a, b) => Expr::Inter(s(a), s(b)),
            Expr::Member(a, b) => Expr::Member(s(a), s(b)),
            Expr::Push(a, b) => Expr::Push(s(a), s(b)),
            Expr::Head(a) => Expr::Head(s(a)),
            Expr::Tail(a) => Expr::Tail(s(a)),
            Expr::Some(a) => Expr::Some(s(a)),
            Expr::The(a) => Expr::The(s(a)),
            Expr::Lookup(a, b) => Expr::Lookup(s(a), s(b)),
            Expr::Override(a, b, c) => Expr::Override(s(a), s(b), s(c)),
            Expr::Pair(a, b) => Expr::Pair(s(a), s(b)),
            Expr::Fst(a) => Expr::Fst(s(a)),
            Expr::Snd(a) => Expr::Snd(s(a)),
            Expr::Ite(a, b, c) => Expr::Ite(s(a), s(b), s(c)),
            Expr::Call(f, xs) => Expr::Call(*f, v(xs)),
            Expr::At(a, l) => Expr::At(s(a), l.clone()),
        }
    }

    pub fn eval_bool(&self, s: &GlobalState, ctx: Ctx<'_>) -> Result<bool, EvalError> {
        as_bool(self.eval(s, ctx)?)
    }

    pub fn eval(&self, s: &GlobalState, ctx: Ctx<'_>) -> Result<Value, EvalError> {
        let ev = |e: &Expr| e.eval(s, ctx);
        Ok(match self {
            Expr::Var(id) => s.get(*id).clone(),
            Expr::Lit(v) => v.clone(),
            Expr::Not(a) => Value::Bool(!as_bool(ev(a)?)?),
            Expr::And(xs) => {
                for x in xs {
                    if !as_bool(ev(x)?)? {
                        return Ok(Value::Bool(false));
                    }
                }
                Value::Bool(true)
            }
            Expr::Or(xs) => {
                for x in xs {
                    if as_bool(ev(x)?)? {
                        return Ok(Value::Bool(true));
                    }
                }
                Value::Bool(false)
            }
            Expr::Implies(a, b) => Value::Bool(!as_bool(ev(a)?)? || as_bool(ev(b)?)?),
            Expr::Eq(a, b) => Value::Bool(ev(a)? == ev(b)?),
            Expr::Ne(a, b) => Value::Bool(ev(a)? != ev(b)?),
            Expr::SetLit(xs) => {
                let mut set = NatSet::empty();
                for x in xs {
                    let n = as_nat(ev(x)?)?;
                    if n >= NatSet::MAX_ELEM {
                        return Err(EvalError::KeyOutOfRange(n));
                    }
                    set.insert(n);
                }
                Value::Set(set)
            }
            Expr::Union(a, b) => Value::Set(as_set(ev(a)?)?.union(as_set(ev(b)?)?)),
            Expr::Diff(a, b) => Value::Set(as_set(ev(a)?)?.difference(as_set(ev(b)?)?)),
            Expr::Inter(a, b) => Value::Set(as_set(ev(a)?)?.intersection(as_set(ev(b)?)?)),
            Expr::Member(x, set) => {
                let n = as_nat(ev(x)?)?;
                Value::Bool(as_set(ev(set)?)?.contains(n))
            }
            Expr::Push(x, st) => {
                let x = ev(x)?;
                let mut items = as_stack(ev(st)?)?;
                items.insert(0, x);
                Value::Stack(items)
            }
            Expr::Head(st) => as_stack(ev(st)?)?
                .into_iter()
                .next()
                .ok_or(EvalError::EmptyStackAccess)?,
            Expr::Tail(st) => {
                let mut items = as_stack(ev(st)?)?;
                if items.is_empty() {
                    return Err(EvalError::EmptyStackAccess);
                }
                items.remove(0);
                Value::Stack(items)
            }
            Expr::Some(a) => Value::some(ev(a)?),
            Expr::The(a) => match ev(a)? {
                Value::Opt(Some(v)) => *v,
                Value::Opt(None) => return Err(EvalError::AbsentOptional),
                other => return Err(mismatch("option", &other)),
            },
            Expr::Lookup(m, k) => {
                let k = as_nat(ev(k)?)?;
                let entries = as_map(ev(m)?)?;
                entries
                    .into_iter()
                    .nth(k as usize)
                    .ok_or(EvalError::KeyOutOfRange(k))?
            }
            Expr::Override(m, k, v) => {
                let mut entries = as_map(ev(m)?)?;
                let k = as_nat(ev(k)?)?;
                let v = ev(v)?;
                if !matches!(v, Value::Opt(_)) {
                    return Err(mismatch("option", &v));
                }
                *entries
                    .get_mut(k as usize)
                    .ok_or(EvalError::KeyOutOfRange(k))? = v;
                Value::Map(entries)
            }
            Expr::Pair(a, b) => Value::pair(ev(a)?, ev(b)?),
            Expr::Fst(p) => match ev(p)? {
                Value::Pair(a, _) => *a,
                other => return Err(mismatch("pair", &other)),
            },
            Expr::Snd(p) => match ev(p)? {
                Value::Pair(_, b) => *b,
                other => return Err(mismatch("pair", &other)),
            },
            Expr::Ite(c, t, e) => {
                if as_bool(ev(c)?)? {
                    ev(t)?
                } else {
                    ev(e)?
                }
            }
            Expr::Call(f, args) => self.eval_builtin(*f, args, s, ctx)?,
            Expr::At(r, label) => {
                let r = as_nat(ev(r)?)?;
                let control = ctx.control.ok_or(EvalError::NoControl)?;
                Value::Bool(control.at(r, label))
            }
            Expr::Abort(kind) => return Err(EvalError::Abort(kind.clone())),
        })
    }

    fn eval_builtin(
        &self,
        f: Builtin,
        args: &[Expr],
        s: &GlobalState,
        ctx: Ctx<'_>,
    ) -> Result<Value, EvalError> {
        let arg = |i: usize| args[i].eval(s, ctx);
        let env = ctx.env;
        Ok(match f {
            Builtin::SchedPolicy => {
                let runnable = as_map(arg(0)?)?;
                match env.sched.pick(&runnable) {
                    Some(r) => Value::some(Value::Nat(r)),
                    None => Value::none(),
                }
            }
            Builtin::HandleEvents => {
                let events = as_set(arg(0)?)?;
                let runnable = as_map(arg(1)?)?;
                Value::Map(env.events.handle(events, runnable, &env.routines)?)
            }
            Builtin::InterruptPolicy => Value::Set(env.policy.allowed(as_nat(arg(0)?)?)),
            Builtin::SetOf => Value::Set(nat_set_of(&as_stack(arg(0)?)?)?),
            Builtin::Card => Value::Nat(as_set(arg(0)?)?.len()),
            Builtin::Len => Value::Nat(as_stack(arg(0)?)?.len() as u32),
            Builtin::Last => as_stack(arg(0)?)?
                .pop()
                .ok_or(EvalError::EmptyStackAccess)?,
            Builtin::Butlast => {
                let mut items = as_stack(arg(0)?)?;
                items.pop().ok_or(EvalError::EmptyStackAccess)?;
                Value::Stack(items)
            }
            Builtin::Nodup => {
                let items = as_stack(arg(0)?)?;
                let distinct: BTreeSet<&Value> = items.iter().collect();
                Value::Bool(distinct.len() == items.len())
            }
            Builtin::Restrict => {
                let items = as_stack(arg(0)?)?;
                let keep = as_set(arg(1)?)?;
                let mut out = Vec::new();
                for v in items {
                    if keep.contains(as_nat(v.clone())?) {
                        out.push(v);
                    }
                }
                Value::Stack(out)
            }
            Builtin::Users => Value::Set(env.routines.user_set()),
            Builtin::Interrupts => Value::Set(env.routines.interrupt_set()),
            Builtin::IPrime => Value::Set(env.routines.iprime()),
            Builtin::AllRoutines => Value::Set(env.routines.all()),
        })
    }
}

/// `pred` evaluated as a Boolean over `s`.
pub fn eval_pred(p: &Expr, s: &GlobalState, ctx: Ctx<'_>) -> Result<bool, EvalError> {
    p.eval_bool(s, ctx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::echronos::{SchedMode, SystemConfig};
    use crate::kernel::state::Layout;

    fn env() -> Env {
        SystemConfig::new(2, 1, 1).env().unwrap()
    }

    fn state() -> GlobalState {
        let cfg = SystemConfig::new(2, 1, 1);
        crate::echronos::initial_state(&cfg, &cfg.layout())
    }

    #[test]
    fn literal_comparison() {
        let env = env();
        let s = state();
        assert!(eval_pred(&Expr::at_is(2), &s, Ctx::new(&env)).unwrap());
        assert!(!eval_pred(&Expr::at_is(3), &s, Ctx::new(&env)).unwrap());
    }

    #[test]
    fn svca_removed_by_at() {
        let env = env();
        let mut s = state();
        s.set(VarId::EIT, Value::Set([1, 3].into_iter().collect()));
        s.set(VarId::AT, Value::Nat(1));
        let p = Expr::member(
            Expr::nat(1),
            Expr::diff(
                Expr::diff(Expr::Var(VarId::EIT), Expr::SetLit(vec![Expr::Var(VarId::AT)])),
                Expr::call(Builtin::SetOf, vec![Expr::Var(VarId::AT_STACK)]),
            ),
        );
        assert!(!eval_pred(&p, &s, Ctx::new(&env)).unwrap());
    }

    #[test]
    fn svca_allowed_over_user_by_default_policy() {
        let env = env();
        let s = state();
        let p = Expr::member(
            Expr::nat(1),
            Expr::call(Builtin::InterruptPolicy, vec![Expr::Var(VarId::AT)]),
        );
        assert!(eval_pred(&p, &s, Ctx::new(&env)).unwrap());
    }

    #[test]
    fn declared_errors() {
        let env = env();
        let s = state();
        let ctx = Ctx::new(&env);
        assert_eq!(
            Expr::head(Expr::Var(VarId::AT_STACK)).eval(&s, ctx),
            Err(EvalError::EmptyStackAccess)
        );
        assert_eq!(
            Expr::the(Expr::Var(VarId::NEXT_T)).eval(&s, ctx),
            Err(EvalError::AbsentOptional)
        );
        assert!(matches!(
            Expr::member(Expr::Var(VarId::SVCA_REQ), Expr::Var(VarId::EIT)).eval(&s, ctx),
            Err(EvalError::TypeMismatch { .. })
        ));
        assert_eq!(
            Expr::at_is(2).eval(&s, ctx),
            Ok(Value::Bool(true)),
            "evaluation does not need control"
        );
        assert_eq!(
            Expr::At(Box::new(Expr::nat(2)), "x".into()).eval(&s, ctx),
            Err(EvalError::NoControl)
        );
    }

    #[test]
    fn conjunction_short_circuits_and_ite_is_lazy() {
        let env = env();
        let s = state();
        let ctx = Ctx::new(&env);
        let bad = Expr::eq(Expr::head(Expr::Var(VarId::AT_STACK)), Expr::nat(1));
        assert_eq!(
            Expr::and(vec![Expr::bool(false), bad.clone()]).eval(&s, ctx),
            Ok(Value::Bool(false))
        );
        assert_eq!(
            Expr::ite(Expr::bool(true), Expr::nat(3), Expr::head(Expr::Var(VarId::AT_STACK)))
                .eval(&s, ctx),
            Ok(Value::Nat(3))
        );
    }

    #[test]
    fn sched_mode_min_picks_lowest() {
        let mut cfg = SystemConfig::new(2, 0, 0);
        cfg.sched_mode = SchedMode::Min;
        let env = cfg.env().unwrap();
        let s = crate::echronos::initial_state(&cfg, &Layout::canonical(cfg.routines(), 0, false));
        let pick = Expr::call(Builtin::SchedPolicy, vec![Expr::Var(VarId::R)]);
        assert_eq!(pick.eval(&s, Ctx::new(&env)), Ok(Value::some(Value::Nat(3))));
    }

    #[test]
    fn substitution_is_simultaneous() {
        let map: HashMap<VarId, Expr> = [
            (VarId::AT, Expr::nat(0)),
            (VarId::AT_STACK, Expr::push(Expr::Var(VarId::AT), Expr::Var(VarId::AT_STACK))),
        ]
        .into_iter()
        .collect();
        let e = Expr::eq(Expr::head(Expr::Var(VarId::AT_STACK)), Expr::Var(VarId::AT));
        let got = e.subst(&map);
        assert_eq!(
            got,
            Expr::eq(
                Expr::head(Expr::push(Expr::Var(VarId::AT), Expr::Var(VarId::AT_STACK))),
                Expr::nat(0)
            )
        );
    }
}
