//! Structural type inference for expressions. Domain bounds are not
//! tracked here; they are enforced when a value is stored.

use std::fmt;

use ogwb_core::kernel::{Builtin, Expr, Layout, Type, Value};

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Ty {
    Bool,
    Nat,
    Set,
    Stack(Box<Ty>),
    Opt(Box<Ty>),
    Pair(Box<Ty>, Box<Ty>),
    /// Map values; a lookup yields `Opt` of this.
    Map(Box<Ty>),
    /// Unconstrained: element type of an empty literal, or an abort.
    Any,
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Bool => f.write_str("bool"),
            Ty::Nat => f.write_str("nat"),
            Ty::Set => f.write_str("set"),
            Ty::Stack(t) => write!(f, "stack<{t}>"),
            Ty::Opt(t) => write!(f, "option<{t}>"),
            Ty::Pair(a, b) => write!(f, "pair<{a}, {b}>"),
            Ty::Map(t) => write!(f, "map<{t}>"),
            Ty::Any => f.write_str("_"),
        }
    }
}

impl From<&Type> for Ty {
    fn from(t: &Type) -> Ty {
        match t {
            Type::Bool => Ty::Bool,
            Type::Nat(_) => Ty::Nat,
            Type::Set(_) => Ty::Set,
            Type::Stack(e) => Ty::Stack(Box::new(e.as_ref().into())),
            Type::Opt(e) => Ty::Opt(Box::new(e.as_ref().into())),
            Type::Pair(a, b) => Ty::Pair(Box::new(a.as_ref().into()), Box::new(b.as_ref().into())),
            Type::Map(_, e) => Ty::Map(Box::new(e.as_ref().into())),
        }
    }
}

fn of_value(v: &Value) -> Ty {
    let elem = |xs: &mut dyn Iterator<Item = &Value>| xs.next().map_or(Ty::Any, of_value);
    match v {
        Value::Bool(_) => Ty::Bool,
        Value::Nat(_) => Ty::Nat,
        Value::Set(_) => Ty::Set,
        Value::Stack(xs) => Ty::Stack(Box::new(elem(&mut xs.iter()))),
        Value::Opt(x) => Ty::Opt(Box::new(x.as_deref().map_or(Ty::Any, of_value))),
        Value::Pair(a, b) => Ty::Pair(Box::new(of_value(a)), Box::new(of_value(b))),
        Value::Map(xs) => Ty::Map(Box::new(elem(&mut xs.iter().filter_map(|x| match x {
            Value::Opt(Some(inner)) => Some(inner.as_ref()),
            _ => None,
        })))),
    }
}

/// The most specific type compatible with both, if any.
pub fn unify(a: &Ty, b: &Ty) -> Option<Ty> {
    Some(match (a, b) {
        (Ty::Any, t) | (t, Ty::Any) => t.clone(),
        (Ty::Bool, Ty::Bool) => Ty::Bool,
        (Ty::Nat, Ty::Nat) => Ty::Nat,
        (Ty::Set, Ty::Set) => Ty::Set,
        (Ty::Stack(x), Ty::Stack(y)) => Ty::Stack(Box::new(unify(x, y)?)),
        (Ty::Opt(x), Ty::Opt(y)) => Ty::Opt(Box::new(unify(x, y)?)),
        (Ty::Map(x), Ty::Map(y)) => Ty::Map(Box::new(unify(x, y)?)),
        (Ty::Pair(a1, b1), Ty::Pair(a2, b2)) => Ty::Pair(Box::new(unify(a1, a2)?), Box::new(unify(b1, b2)?)),
        _ => return None,
    })
}

fn expect(want: &Ty, got: Ty, what: &str) -> Result<Ty, String> {
    unify(want, &got).ok_or_else(|| format!("{what}: expected {want}, found {got}"))
}

fn stack_elem(t: Ty, what: &str) -> Result<Ty, String> {
    match t {
        Ty::Stack(e) => Ok(*e),
        Ty::Any => Ok(Ty::Any),
        other => Err(format!("{what}: expected a stack, found {other}")),
    }
}

/// A type mismatch, blamed on the operand that has the wrong type when one
/// can be singled out.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TypeError {
    pub message: String,
    pub culprit: Option<Expr>,
}

impl TypeError {
    fn at(message: String, culprit: &Expr) -> Self {
        TypeError {
            message,
            culprit: Some(culprit.clone()),
        }
    }
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub fn infer(e: &Expr, layout: &Layout) -> Result<Ty, TypeError> {
    let inf = |x: &Expr| infer(x, layout);
    // the type of operand `x`, which must fit `want`
    let operand = |x: &Expr, want: &Ty, what: &str| expect(want, inf(x)?, what).map_err(|m| TypeError::at(m, x));
    let elem_of = |x: &Expr, what: &str| stack_elem(inf(x)?, what).map_err(|m| TypeError::at(m, x));
    let boolean = |x: &Expr, what: &str| operand(x, &Ty::Bool, what);
    Ok(match e {
        Expr::Var(id) => layout.ty(*id).into(),
        Expr::Lit(v) => of_value(v),
        Expr::Not(a) => boolean(a, "operand of `!`")?,
        Expr::And(xs) | Expr::Or(xs) => {
            for x in xs {
                boolean(x, "operand of a connective")?;
            }
            Ty::Bool
        }
        Expr::Implies(a, b) => {
            boolean(a, "premise of `=>`")?;
            boolean(b, "conclusion of `=>`")?
        }
        Expr::Eq(a, b) | Expr::Ne(a, b) => {
            let (ta, tb) = (inf(a)?, inf(b)?);
            unify(&ta, &tb).ok_or_else(|| TypeError::at(format!("cannot compare {ta} with {tb}"), b))?;
            Ty::Bool
        }
        Expr::SetLit(xs) => {
            for x in xs {
                operand(x, &Ty::Nat, "set element")?;
            }
            Ty::Set
        }
        Expr::Union(a, b) | Expr::Diff(a, b) | Expr::Inter(a, b) => {
            operand(a, &Ty::Set, "set operand")?;
            operand(b, &Ty::Set, "set operand")?
        }
        Expr::Member(x, s) => {
            operand(x, &Ty::Nat, "left of `in`")?;
            operand(s, &Ty::Set, "right of `in`")?;
            Ty::Bool
        }
        Expr::Push(x, st) => {
            let elem = elem_of(st, "right of `#`")?;
            Ty::Stack(Box::new(operand(x, &elem, "pushed element")?))
        }
        Expr::Head(st) => elem_of(st, "argument of `hd`")?,
        Expr::Tail(st) => Ty::Stack(Box::new(elem_of(st, "argument of `tl`")?)),
        Expr::Some(x) => Ty::Opt(Box::new(inf(x)?)),
        Expr::The(x) => match inf(x)? {
            Ty::Opt(t) => *t,
            Ty::Any => Ty::Any,
            other => return Err(TypeError::at(format!("argument of `the`: expected an option, found {other}"), x)),
        },
        Expr::Lookup(m, k) => {
            operand(k, &Ty::Nat, "map key")?;
            match inf(m)? {
                Ty::Map(t) => Ty::Opt(t),
                Ty::Any => Ty::Any,
                other => return Err(TypeError::at(format!("only maps can be applied, found {other}"), m)),
            }
        }
        Expr::Override(m, k, v) => {
            operand(k, &Ty::Nat, "map key")?;
            let vt = match inf(m)? {
                Ty::Map(t) => *t,
                Ty::Any => Ty::Any,
                other => return Err(TypeError::at(format!("only maps can be updated, found {other}"), m)),
            };
            match operand(v, &Ty::Opt(Box::new(vt)), "map entry")? {
                Ty::Opt(t) => Ty::Map(t),
                _ => unreachable!("unified with an option"),
            }
        }
        Expr::Pair(a, b) => Ty::Pair(Box::new(inf(a)?), Box::new(inf(b)?)),
        Expr::Fst(p) | Expr::Snd(p) => match inf(p)? {
            Ty::Pair(a, b) => {
                if matches!(e, Expr::Fst(_)) {
                    *a
                } else {
                    *b
                }
            }
            Ty::Any => Ty::Any,
            other => return Err(TypeError::at(format!("projection of a non-pair {other}"), p)),
        },
        Expr::Ite(c, t, f) => {
            boolean(c, "condition of `if`")?;
            let (tt, tf) = (inf(t)?, inf(f)?);
            unify(&tt, &tf).ok_or_else(|| TypeError::at(format!("branches of `if` differ: {tt} and {tf}"), f))?
        }
        Expr::Call(b, args) => builtin(*b, args, layout)?,
        Expr::At(r, _) => {
            operand(r, &Ty::Nat, "routine of `at`")?;
            Ty::Bool
        }
        Expr::Abort(_) => Ty::Any,
    })
}

fn builtin(b: Builtin, args: &[Expr], layout: &Layout) -> Result<Ty, TypeError> {
    if args.len() != b.arity() {
        return Err(TypeError {
            message: format!("`{}` takes {} argument(s), given {}", b.name(), b.arity(), args.len()),
            culprit: None,
        });
    }
    let arg = |i: usize, want: Ty| {
        expect(&want, infer(&args[i], layout)?, &format!("argument of `{}`", b.name()))
            .map_err(|m| TypeError::at(m, &args[i]))
    };
    let nat_stack = || Ty::Stack(Box::new(Ty::Nat));
    let runnable = || Ty::Map(Box::new(Ty::Bool));
    Ok(match b {
        Builtin::SchedPolicy => {
            arg(0, runnable())?;
            Ty::Opt(Box::new(Ty::Nat))
        }
        Builtin::HandleEvents => {
            arg(0, Ty::Set)?;
            arg(1, runnable())?
        }
        Builtin::InterruptPolicy => {
            arg(0, Ty::Nat)?;
            Ty::Set
        }
        Builtin::SetOf => {
            arg(0, nat_stack())?;
            Ty::Set
        }
        Builtin::Card => {
            arg(0, Ty::Set)?;
            Ty::Nat
        }
        Builtin::Len => {
            arg(0, Ty::Stack(Box::new(Ty::Any)))?;
            Ty::Nat
        }
        Builtin::Last => stack_elem(arg(0, Ty::Stack(Box::new(Ty::Any)))?, "argument of `last`")
            .map_err(|m| TypeError::at(m, &args[0]))?,
        Builtin::Butlast => arg(0, Ty::Stack(Box::new(Ty::Any)))?,
        Builtin::Nodup => {
            arg(0, Ty::Stack(Box::new(Ty::Any)))?;
            Ty::Bool
        }
        Builtin::Restrict => {
            arg(1, Ty::Set)?;
            arg(0, nat_stack())?
        }
        Builtin::Users | Builtin::Interrupts | Builtin::IPrime | Builtin::AllRoutines => Ty::Set,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ogwb_core::echronos::{build_system, preset_invariants, SystemConfig};
    use ogwb_core::kernel::{Command, VarId};

    fn layout() -> Layout {
        SystemConfig::new(2, 1, 1).layout()
    }

    #[test]
    fn preset_expressions_are_well_typed() {
        let sys = build_system(&SystemConfig::new(2, 1, 1)).unwrap();
        for (name, inv) in preset_invariants() {
            assert_eq!(infer(&inv, &sys.layout), Ok(Ty::Bool), "{name}");
        }
        fn walk(c: &Command, l: &Layout) {
            match c {
                Command::Skip => {}
                Command::Basic(a) | Command::Await(_, a) => {
                    if let Command::Await(g, _) = c {
                        assert_eq!(infer(g, l), Ok(Ty::Bool));
                    }
                    for u in a.branches.iter().flatten() {
                        let want: Ty = l.ty(u.target).into();
                        let got = infer(&u.value, l).unwrap();
                        assert!(unify(&want, &got).is_some(), "{}: {want} vs {got}", a.label);
                    }
                }
                Command::Seq(cs) => cs.iter().for_each(|c| walk(c, l)),
                Command::If(_, t, e) => {
                    walk(t, l);
                    walk(e, l)
                }
                Command::While(_, b) => walk(b, l),
            }
        }
        for t in &sys.tasks {
            walk(&t.body, &sys.layout);
        }
    }

    #[test]
    fn mismatches_are_reported() {
        let l = layout();
        let bad = Expr::member(Expr::Var(VarId::EIT), Expr::Var(VarId::AT));
        let e = infer(&bad, &l).unwrap_err();
        assert!(e.message.contains("left of `in`"));
        assert_eq!(e.culprit, Some(Expr::Var(VarId::EIT)));
        let bad = Expr::push(Expr::bool(true), Expr::Var(VarId::AT_STACK));
        assert!(infer(&bad, &l).is_err());
        let ok = Expr::eq(Expr::Var(VarId::AT_STACK), Expr::Lit(Value::Stack(vec![])));
        assert_eq!(infer(&ok, &l), Ok(Ty::Bool));
    }
}
