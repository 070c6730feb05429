//! The hardware interface: masking, interrupt take and return, supervisor
//! calls and the interrupt policy.
//!
//! Each primitive exists as a guard/effect pair and as a ready-made
//! [`Command`]. All state changes of one primitive happen in one atomic
//! step.

use std::fmt;
use std::str::FromStr;

use crate::echronos::SystemConfig;
use crate::kernel::{Action, Builtin, Command, Expr, NatSet, RoutineId, Update, VarId};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default)]
pub enum HwVariant {
    /// Mask is not saved on exception entry; return may tail-chain into SVC_a.
    #[default]
    Arm,
    /// Mask is pushed on every take and restored on return.
    Generic,
}

impl fmt::Display for HwVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HwVariant::Arm => "arm",
            HwVariant::Generic => "generic",
        })
    }
}

impl FromStr for HwVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "arm" => Ok(HwVariant::Arm),
            "generic" => Ok(HwVariant::Generic),
            _ => Err(format!("unknown hardware variant `{s}` (expected arm or generic)")),
        }
    }
}

/// For each routine `r`, the routines allowed to interrupt `r`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct InterruptPolicy {
    allowed: Vec<NatSet>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HwError {
    #[error("no priority given for routine {0}")]
    MissingPriority(u32),
}

impl InterruptPolicy {
    pub fn from_table(allowed: Vec<NatSet>) -> Self {
        InterruptPolicy { allowed }
    }

    /// Empty for routines outside the table.
    pub fn allowed(&self, r: u32) -> NatSet {
        self.allowed.get(r as usize).copied().unwrap_or_default()
    }
}

/// Users can be interrupted by every interrupt, SVC_a and SVC_s; interrupt
/// and SVC routines only by strictly higher-priority ones.
pub fn default_interrupt_policy(cfg: &SystemConfig) -> Result<InterruptPolicy, HwError> {
    let routines = cfg.routines();
    let mut candidates = routines.iprime();
    candidates.insert(RoutineId::SVC_S.0);
    let prio = |r: u32| cfg.priority.get(&r).copied().ok_or(HwError::MissingPriority(r));
    let mut allowed = Vec::with_capacity(routines.count() as usize);
    for r in 0..routines.count() {
        if routines.is_user(r) {
            allowed.push(candidates);
            continue;
        }
        let mine = prio(r)?;
        let mut set = NatSet::empty();
        for y in candidates.iter() {
            if prio(y)? > mine {
                set.insert(y);
            }
        }
        allowed.push(set);
    }
    Ok(InterruptPolicy { allowed })
}

fn var(id: VarId) -> Expr {
    Expr::Var(id)
}

fn set_of_stack() -> Expr {
    Expr::call(Builtin::SetOf, vec![var(VarId::AT_STACK)])
}

fn policy_of(r: Expr) -> Expr {
    Expr::call(Builtin::InterruptPolicy, vec![r])
}

/// `EIT := EIT - X`
pub fn int_disable(label: &str, x: NatSet) -> Command {
    Command::basic(label, vec![Update::new(VarId::EIT, Expr::diff(var(VarId::EIT), Expr::set(x)))])
}

/// `EIT := EIT + X`. A pending interrupt needs nothing more: its take
/// becomes enabled.
pub fn int_enable(label: &str, x: NatSet) -> Command {
    Command::basic(label, vec![Update::new(VarId::EIT, Expr::union(var(VarId::EIT), Expr::set(x)))])
}

pub fn svca_disable(label: &str) -> Command {
    int_disable(label, NatSet::singleton(RoutineId::SVC_A.0))
}

pub fn svca_enable(label: &str) -> Command {
    int_enable(label, NatSet::singleton(RoutineId::SVC_A.0))
}

/// `r in EIT - {AT} - set ATStack && r in interrupt_policy(AT)`
fn take_condition(r: u32) -> Vec<Expr> {
    vec![
        Expr::member(
            Expr::nat(r),
            Expr::diff(
                Expr::diff(var(VarId::EIT), Expr::SetLit(vec![var(VarId::AT)])),
                set_of_stack(),
            ),
        ),
        Expr::member(Expr::nat(r), policy_of(var(VarId::AT))),
    ]
}

/// Saves the active routine (and, on generic hardware, the mask) and makes
/// `r` active.
fn entry_effect(r: u32, v: HwVariant) -> Vec<Update> {
    let mut u = vec![
        Update::new(VarId::AT_STACK, Expr::push(var(VarId::AT), var(VarId::AT_STACK))),
        Update::new(VarId::AT, Expr::nat(r)),
    ];
    if v == HwVariant::Generic {
        u.push(Update::new(VarId::EIT_STACK, Expr::push(var(VarId::EIT), var(VarId::EIT_STACK))));
    }
    u
}

pub fn itake_guard(i: u32) -> Expr {
    Expr::and(take_condition(i))
}

pub fn itake_effect(i: u32, v: HwVariant) -> Vec<Update> {
    entry_effect(i, v)
}

/// Takes interrupt `i` if it is enabled, not already active or nested, and
/// allowed to preempt the active routine. Not guarded by `control`.
pub fn itake(label: &str, i: u32, v: HwVariant) -> Command {
    Command::Await(itake_guard(i), Action::new(label, itake_effect(i, v)))
}

pub fn svca_take_guard() -> Expr {
    let mut parts = vec![var(VarId::SVCA_REQ)];
    parts.extend(take_condition(RoutineId::SVC_A.0));
    Expr::and(parts)
}

pub fn svca_take_effect(v: HwVariant) -> Vec<Update> {
    let mut u = vec![Update::new(VarId::SVCA_REQ, Expr::bool(false))];
    u.extend(entry_effect(RoutineId::SVC_A.0, v));
    u
}

/// Takes a pending asynchronous supervisor call, consuming the request.
pub fn svca_take(label: &str, v: HwVariant) -> Command {
    Command::Await(svca_take_guard(), Action::new(label, svca_take_effect(v)))
}

/// Whether returning from the active routine tail-chains into SVC_a.
pub fn iret_chains(v: HwVariant) -> Expr {
    let svca = || Expr::nat(RoutineId::SVC_A.0);
    let enabled = match v {
        HwVariant::Arm => Expr::diff(var(VarId::EIT), set_of_stack()),
        HwVariant::Generic => Expr::diff(
            Expr::diff(
                Expr::head(var(VarId::EIT_STACK)),
                Expr::SetLit(vec![var(VarId::AT)]),
            ),
            set_of_stack(),
        ),
    };
    Expr::and(vec![
        var(VarId::SVCA_REQ),
        Expr::member(svca(), enabled),
        Expr::member(svca(), policy_of(Expr::head(var(VarId::AT_STACK)))),
    ])
}

pub fn iret_effect(v: HwVariant) -> Vec<Update> {
    let c = iret_chains(v);
    let ite = |then: Expr, els: Expr| Expr::ite(c.clone(), then, els);
    let mut u = vec![
        Update::new(
            VarId::AT,
            ite(Expr::nat(RoutineId::SVC_A.0), Expr::head(var(VarId::AT_STACK))),
        ),
        Update::new(VarId::SVCA_REQ, ite(Expr::bool(false), var(VarId::SVCA_REQ))),
        Update::new(
            VarId::AT_STACK,
            ite(var(VarId::AT_STACK), Expr::tail(var(VarId::AT_STACK))),
        ),
    ];
    if v == HwVariant::Generic {
        // Tail-chaining returns and re-enters in one step: the mask comes
        // back from the stack, and the saved entry stays for SVC_a's return.
        u.push(Update::new(VarId::EIT, Expr::head(var(VarId::EIT_STACK))));
        u.push(Update::new(
            VarId::EIT_STACK,
            ite(var(VarId::EIT_STACK), Expr::tail(var(VarId::EIT_STACK))),
        ));
    }
    u
}

/// Return from the active routine: either tail-chain into a pending SVC_a
/// or resume the routine on top of the stack. Empty stack is a model error.
pub fn iret(label: &str, v: HwVariant) -> Command {
    Command::basic(label, iret_effect(v))
}

pub fn svc_now_effect(v: HwVariant) -> Vec<Update> {
    let svcs = RoutineId::SVC_S.0;
    let reentry = Expr::member(
        Expr::nat(svcs),
        Expr::call(Builtin::SetOf, vec![Expr::push(var(VarId::AT), var(VarId::AT_STACK))]),
    );
    let mut u = entry_effect(svcs, v);
    u[1] = Update::new(
        VarId::AT,
        Expr::ite(reentry, Expr::Abort("svc_reentry".into()), Expr::nat(svcs)),
    );
    u
}

/// Synchronous supervisor call: enter SVC_s now, ignoring the mask. Calling
/// it while SVC_s is active or nested is a model error.
pub fn svc_now(label: &str, v: HwVariant) -> Command {
    Command::basic(label, svc_now_effect(v))
}

/// Marks SVC_a pending; it is taken once enabled and allowed.
pub fn svca_request(label: &str) -> Command {
    Command::basic(label, vec![Update::new(VarId::SVCA_REQ, Expr::bool(true))])
}
