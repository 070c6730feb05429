//! The eChronos instantiation: scheduler, context switch, user syscall,
//! interrupt handlers and the assembled system.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::control::control;
use crate::hw::{self, default_interrupt_policy, HwVariant};
use crate::kernel::{
    Action, Builtin, Command, Cond, Env, EvalError, Expr, GlobalState, Layout, NatSet, RoutineId,
    Routines, System, Task, Update, Value, VarId,
};

macro_rules! keyword_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($name::$variant => $text),+ })
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(format!(
                        "unknown {} `{s}` (expected {})",
                        stringify!($name),
                        [$($text),+].join(" or ")
                    )),
                }
            }
        }
    };
}

/// How an interrupt handler changes the pending-event set.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default)]
pub enum ChangeEventsMode {
    /// One successor per event: `E := E + {e}`.
    #[default]
    AddOne,
    /// One successor per subset `S`: `E := E + S`.
    AnySuperset,
}
keyword_enum!(ChangeEventsMode { AddOne => "add-one", AnySuperset => "any-superset" });

/// Polarity of the wait loop at the end of a user syscall.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default)]
pub enum SyscallWait {
    /// `while SVCaReq`: wait until a pending SVC_a has been taken.
    #[default]
    WaitUntilClear,
    /// `while !SVCaReq`, as the listing is written.
    AsWritten,
}
keyword_enum!(SyscallWait { WaitUntilClear => "clear", AsWritten => "literal" });

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default)]
pub enum SchedMode {
    #[default]
    Max,
    /// Lowest priority first. Only useful to check that a checker notices.
    Min,
}
keyword_enum!(SchedMode { Max => "max", Min => "min" });

/// Picks the runnable user with the highest (or lowest, in `Min` mode)
/// priority; ties go to the smallest routine id.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SchedPolicy {
    pub user_priority: BTreeMap<u32, u32>,
    pub mode: SchedMode,
}

impl SchedPolicy {
    /// `runnable` is the `R` map, indexed by routine.
    pub fn pick(&self, runnable: &[Value]) -> Option<u32> {
        let mut best: Option<(u32, u32)> = None;
        for (r, entry) in runnable.iter().enumerate() {
            let Value::Opt(Some(v)) = entry else { continue };
            if **v != Value::Bool(true) {
                continue;
            }
            let r = r as u32;
            let p = self.user_priority.get(&r).copied().unwrap_or(0);
            let better = match best {
                None => true,
                Some((_, bp)) => match self.mode {
                    SchedMode::Max => p > bp,
                    SchedMode::Min => p < bp,
                },
            };
            if better {
                best = Some((r, p));
            }
        }
        best.map(|(r, _)| r)
    }
}

/// Which user task each event wakes.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct EventTable {
    pub event_task: BTreeMap<u32, u32>,
}

impl EventTable {
    /// `R` with every task woken by an event in `events` marked runnable.
    pub fn handle(
        &self,
        events: NatSet,
        mut runnable: Vec<Value>,
        routines: &Routines,
    ) -> Result<Vec<Value>, EvalError> {
        for e in events.iter() {
            let t = *self.event_task.get(&e).ok_or(EvalError::KeyOutOfRange(e))?;
            if !routines.is_user(t) {
                return Err(EvalError::EventMapsToNonUser(e));
            }
            let slot = runnable.get_mut(t as usize).ok_or(EvalError::KeyOutOfRange(t))?;
            *slot = Value::some(Value::Bool(true));
        }
        Ok(runnable)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SystemConfig {
    pub nb_users: u32,
    pub nb_ints: u32,
    pub nb_events: u32,
    pub variant: HwVariant,
    /// Over interrupts, SVC_a and SVC_s; drives the interrupt policy.
    pub priority: BTreeMap<u32, u32>,
    /// Over users; drives the scheduler.
    pub user_priority: BTreeMap<u32, u32>,
    pub event_task: BTreeMap<u32, u32>,
    pub change_events_mode: ChangeEventsMode,
    pub syscall_wait: SyscallWait,
    pub sched_mode: SchedMode,
    pub state_limit: u64,
    pub depth_limit: u64,
    /// Longest stack considered when enumerating stack-typed variables;
    /// `None` means the number of routines.
    pub stack_bound: Option<u32>,
    /// Largest valuation space the VC discharger will enumerate.
    pub vc_bound: u128,
}

impl SystemConfig {
    pub const DEFAULT_STATE_LIMIT: u64 = 5_000_000;
    pub const DEFAULT_DEPTH_LIMIT: u64 = 1_000_000;
    pub const DEFAULT_VC_BOUND: u128 = 10_000_000;

    pub fn new(nb_users: u32, nb_ints: u32, nb_events: u32) -> Self {
        let mut cfg = SystemConfig {
            nb_users,
            nb_ints,
            nb_events,
            variant: HwVariant::Arm,
            priority: BTreeMap::new(),
            user_priority: BTreeMap::new(),
            event_task: BTreeMap::new(),
            change_events_mode: ChangeEventsMode::AddOne,
            syscall_wait: SyscallWait::WaitUntilClear,
            sched_mode: SchedMode::Max,
            state_limit: Self::DEFAULT_STATE_LIMIT,
            depth_limit: Self::DEFAULT_DEPTH_LIMIT,
            stack_bound: None,
            vc_bound: Self::DEFAULT_VC_BOUND,
        };
        cfg.reset_tables();
        cfg
    }

    /// Refills priorities and the event table with defaults for the
    /// current counts: SVC_a lowest, then SVC_s, then interrupts in id
    /// order; user0 is the most important user; events go round-robin
    /// over users.
    pub fn reset_tables(&mut self) {
        let routines = self.routines();
        self.priority = BTreeMap::from([(RoutineId::SVC_A.0, 1), (RoutineId::SVC_S.0, 2)]);
        for (j, r) in routines.interrupts().enumerate() {
            self.priority.insert(r, 3 + j as u32);
        }
        self.user_priority = routines
            .users()
            .enumerate()
            .map(|(j, r)| (r, self.nb_users - j as u32))
            .collect();
        self.event_task = (0..self.nb_events)
            .map(|e| (e, RoutineId::USER0.0 + e % self.nb_users.max(1)))
            .collect();
    }

    pub fn routines(&self) -> Routines {
        Routines::new(self.nb_users, self.nb_ints)
    }

    pub fn layout(&self) -> Layout {
        Layout::canonical(self.routines(), self.nb_events, self.variant == HwVariant::Generic)
    }

    pub fn stack_bound(&self) -> u32 {
        self.stack_bound.unwrap_or(self.routines().count())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let routines = self.routines();
        if self.nb_users == 0 {
            return invalid("at least one user is required");
        }
        if routines.count() > NatSet::MAX_ELEM {
            return invalid(format!("at most {} routines are supported", NatSet::MAX_ELEM));
        }
        if self.nb_events > NatSet::MAX_ELEM {
            return invalid(format!("at most {} events are supported", NatSet::MAX_ELEM));
        }
        if self.change_events_mode == ChangeEventsMode::AnySuperset && self.nb_events > 16 {
            return invalid("any-superset event mode supports at most 16 events");
        }
        for e in 0..self.nb_events {
            match self.event_task.get(&e) {
                None => return invalid(format!("event {e} has no task")),
                Some(t) if !routines.is_user(*t) => {
                    return invalid(format!("event {e} maps to {t}, which is not a user"))
                }
                _ => {}
            }
        }
        if let Some(e) = self.event_task.keys().find(|e| **e >= self.nb_events) {
            return invalid(format!("event_task mentions undeclared event {e}"));
        }
        for r in routines.users() {
            if !self.user_priority.contains_key(&r) {
                return invalid(format!("user {r} has no priority"));
            }
        }
        if let Some(r) = self.user_priority.keys().find(|r| !routines.is_user(**r)) {
            return invalid(format!("user_priority mentions {r}, which is not a user"));
        }
        if let Some(r) = self.priority.keys().find(|r| routines.is_user(**r) || **r >= routines.count()) {
            return invalid(format!("priority mentions {r}, which is not an interrupt or SVC routine"));
        }
        default_interrupt_policy(self).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn env(&self) -> Result<Env, ConfigError> {
        self.validate()?;
        Ok(Env {
            routines: self.routines(),
            policy: default_interrupt_policy(self).map_err(|e| ConfigError::Invalid(e.to_string()))?,
            sched: SchedPolicy {
                user_priority: self.user_priority.clone(),
                mode: self.sched_mode,
            },
            events: EventTable {
                event_task: self.event_task.clone(),
            },
        })
    }

    /// Every setting as `key = value` text, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let map = |m: &BTreeMap<u32, u32>| {
            let items: Vec<String> = m.iter().map(|(k, v)| format!("{k}: {v}")).collect();
            format!("{{{}}}", items.join(", "))
        };
        let mut out = vec![
            ("users", self.nb_users.to_string()),
            ("interrupts", self.nb_ints.to_string()),
            ("events", self.nb_events.to_string()),
            ("variant", self.variant.to_string()),
            ("events_mode", self.change_events_mode.to_string()),
            ("syscall_wait", self.syscall_wait.to_string()),
            ("sched", self.sched_mode.to_string()),
            ("max_states", self.state_limit.to_string()),
            ("max_depth", self.depth_limit.to_string()),
        ];
        if let Some(b) = self.stack_bound {
            out.push(("stack_bound", b.to_string()));
        }
        out.push(("vc_bound", self.vc_bound.to_string()));
        out.push(("priority", map(&self.priority)));
        out.push(("user_priority", map(&self.user_priority)));
        out.push(("event_task", map(&self.event_task)));
        out
    }
}

/// The boot state: user0 running with nothing nested, every user runnable
/// with a fresh context, SVC_a and all interrupts enabled. Variables beyond
/// the canonical ones take their type defaults.
pub fn initial_state(cfg: &SystemConfig, layout: &Layout) -> GlobalState {
    let routines = cfg.routines();
    let mut s = layout.default_state();
    let user0 = RoutineId::USER0.0;
    let per_routine = |f: &dyn Fn(u32) -> Value| -> Value {
        Value::Map((0..routines.count()).map(f).collect())
    };
    s.set(VarId::EIT, Value::Set(routines.iprime()));
    s.set(VarId::SVCA_REQ, Value::Bool(false));
    s.set(VarId::AT, Value::Nat(user0));
    s.set(VarId::AT_STACK, Value::Stack(vec![]));
    s.set(VarId::CUR_USER, Value::Nat(user0));
    s.set(
        VarId::CONTEXTS,
        per_routine(&|n| {
            if routines.is_user(n) {
                Value::some(Value::pair(Value::Bool(true), Value::nat_stack(&[n])))
            } else {
                Value::none()
            }
        }),
    );
    s.set(
        VarId::R,
        per_routine(&|n| {
            if routines.is_user(n) {
                Value::some(Value::Bool(true))
            } else {
                Value::none()
            }
        }),
    );
    s.set(VarId::E, Value::Set(NatSet::empty()));
    s.set(VarId::E_TMP, Value::Set(NatSet::empty()));
    s.set(VarId::NEXT_T, Value::none());
    if layout.has_eit_stack() {
        s.set(VarId::EIT_STACK, Value::Stack(vec![]));
    }
    s
}

fn var(id: VarId) -> Expr {
    Expr::Var(id)
}

fn assign(label: &str, target: VarId, value: Expr) -> Command {
    Command::basic(label, vec![Update::new(target, value)])
}

/// Picks the next user, first folding pending events into `R`. Events that
/// arrive while this runs stay in `E` for the next round.
pub fn schedule_body() -> Command {
    Command::seq(vec![
        assign("sched_init", VarId::NEXT_T, Expr::Lit(Value::none())),
        Command::while_(
            "sched_loop",
            Expr::eq(var(VarId::NEXT_T), Expr::Lit(Value::none())),
            Command::seq(vec![
                assign("sched_snapshot", VarId::E_TMP, var(VarId::E)),
                assign(
                    "sched_handle",
                    VarId::R,
                    Expr::call(Builtin::HandleEvents, vec![var(VarId::E_TMP), var(VarId::R)]),
                ),
                assign("sched_clear", VarId::E, Expr::diff(var(VarId::E), var(VarId::E_TMP))),
                assign(
                    "sched_pick",
                    VarId::NEXT_T,
                    Expr::call(Builtin::SchedPolicy, vec![var(VarId::R)]),
                ),
            ]),
        ),
    ])
}

/// Saves the outgoing user's stack and SVC_a flag, loads the chosen user's,
/// and sets the SVC_a mask to match.
pub fn context_switch_body(preempt_enabled: bool) -> Command {
    let saved = || Expr::the(Expr::lookup(var(VarId::CONTEXTS), var(VarId::CUR_USER)));
    Command::seq(vec![
        assign(
            "cs_save",
            VarId::CONTEXTS,
            Expr::override_(
                var(VarId::CONTEXTS),
                var(VarId::CUR_USER),
                Expr::some(Expr::pair(Expr::bool(preempt_enabled), var(VarId::AT_STACK))),
            ),
        ),
        assign("cs_select", VarId::CUR_USER, Expr::the(var(VarId::NEXT_T))),
        assign("cs_restore", VarId::AT_STACK, Expr::snd(saved())),
        Command::if_(
            "cs_mask",
            Expr::fst(saved()),
            hw::svca_enable("cs_enable"),
            hw::svca_disable("cs_disable"),
        ),
    ])
}

/// One syscall that blocks the calling user: mark it not runnable and
/// enter SVC_s, then wait for any pending SVC_a to be served.
pub fn user_task_body(i: u32, cfg: &SystemConfig) -> Command {
    let wait_test = match cfg.syscall_wait {
        SyscallWait::WaitUntilClear => var(VarId::SVCA_REQ),
        SyscallWait::AsWritten => Expr::not(var(VarId::SVCA_REQ)),
    };
    Command::seq(vec![
        hw::svca_disable("svca_disable"),
        assign(
            "block",
            VarId::R,
            Expr::override_(var(VarId::R), Expr::nat(i), Expr::some(Expr::bool(false))),
        ),
        hw::svc_now("svc_now", cfg.variant),
        hw::svca_enable("svca_enable"),
        Command::while_("wait", wait_test, Command::Skip),
    ])
}

/// `E := E + S` for each allowed `S`, as one nondeterministic step.
pub fn change_events(label: &str, cfg: &SystemConfig) -> Command {
    let add = |s: NatSet| vec![Update::new(VarId::E, Expr::union(var(VarId::E), Expr::set(s)))];
    let branches = if cfg.nb_events == 0 {
        vec![vec![]]
    } else {
        match cfg.change_events_mode {
            ChangeEventsMode::AddOne => (0..cfg.nb_events).map(|e| add(NatSet::singleton(e))).collect(),
            ChangeEventsMode::AnySuperset => (0..1u64 << cfg.nb_events)
                .map(|bits| add(NatSet::from_bits(bits)))
                .collect(),
        }
    };
    Command::Basic(Action::choice(label, branches))
}

/// Handler of interrupt `k`, after the take: raise events, request the
/// scheduler, return.
pub fn interrupt_task_body(cfg: &SystemConfig) -> Command {
    Command::seq(vec![
        change_events("change_events", cfg),
        hw::svca_request("svca_request"),
        hw::iret("iret", cfg.variant),
    ])
}

fn forever(body: Command) -> Command {
    Command::While(Cond::new("loop", Expr::bool(true)), Box::new(body))
}

fn svc_handler(preempt_enabled: bool, v: HwVariant) -> Command {
    Command::seq(vec![
        schedule_body(),
        context_switch_body(preempt_enabled),
        hw::iret("iret", v),
    ])
}

/// The whole OS: the SVC_a take loop, both SVC handlers, every interrupt
/// handler and every user task, from the boot state.
pub fn build_system(cfg: &SystemConfig) -> Result<System, ConfigError> {
    let env = cfg.env()?;
    let layout = cfg.layout();
    let routines = cfg.routines();
    let v = cfg.variant;
    let mut tasks = vec![
        Task {
            name: "svca_take".into(),
            owner: RoutineId::SVC_A.0,
            body: forever(hw::svca_take("take", v)),
        },
        Task {
            name: "svc_a".into(),
            owner: RoutineId::SVC_A.0,
            body: control(RoutineId::SVC_A.0, forever(svc_handler(true, v))),
        },
        Task {
            name: "svc_s".into(),
            owner: RoutineId::SVC_S.0,
            body: control(RoutineId::SVC_S.0, forever(svc_handler(false, v))),
        },
    ];
    for (j, k) in routines.interrupts().enumerate() {
        tasks.push(Task {
            name: format!("irq{j}"),
            owner: k,
            body: forever(Command::seq(vec![
                hw::itake("itake", k, v),
                control(k, interrupt_task_body(cfg)),
            ])),
        });
    }
    for (j, i) in routines.users().enumerate() {
        tasks.push(Task {
            name: format!("user{j}"),
            owner: i,
            body: control(i, forever(user_task_body(i, cfg))),
        });
    }
    let init = initial_state(cfg, &layout);
    let sys = System {
        name: "echronos".into(),
        tasks,
        layout,
        init,
        env,
        config: cfg.clone(),
    };
    sys.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(sys)
}

/// The named invariants checked against the assembled OS.
pub fn preset_invariants() -> Vec<(String, Expr)> {
    let at = || var(VarId::AT);
    let stack = || var(VarId::AT_STACK);
    let users = || Expr::call(Builtin::Users, vec![]);
    let set_of = |e: Expr| Expr::call(Builtin::SetOf, vec![e]);
    let stack_shape = Expr::and(vec![
        Expr::not(Expr::member(at(), set_of(stack()))),
        Expr::call(
            Builtin::Nodup,
            vec![Expr::call(
                Builtin::Restrict,
                vec![stack(), Expr::diff(Expr::call(Builtin::AllRoutines, vec![]), users())],
            )],
        ),
    ]);
    let user_at_bottom = Expr::eq(
        Expr::call(
            Builtin::Card,
            vec![Expr::Inter(
                Box::new(set_of(Expr::call(Builtin::Butlast, vec![Expr::push(at(), stack())]))),
                Box::new(users()),
            )],
        ),
        Expr::nat(0),
    );
    let quiescent = Expr::implies(
        Expr::and(vec![
            Expr::member(at(), users()),
            Expr::not(var(VarId::SVCA_REQ)),
            Expr::eq(var(VarId::E), Expr::set(NatSet::empty())),
            Expr::eq(stack(), Expr::Lit(Value::Stack(vec![]))),
            Expr::eq(Expr::lookup(var(VarId::R), at()), Expr::Lit(Value::some(Value::Bool(true)))),
        ]),
        Expr::eq(
            Expr::call(Builtin::SchedPolicy, vec![var(VarId::R)]),
            Expr::some(at()),
        ),
    );
    let served = Expr::implies(
        Expr::and(vec![
            Expr::member(at(), users()),
            Expr::or(vec![
                Expr::At(Box::new(at()), "loop".into()),
                Expr::At(Box::new(at()), "svca_disable".into()),
            ]),
        ]),
        Expr::not(var(VarId::SVCA_REQ)),
    );
    vec![
        ("StackShape".into(), stack_shape),
        ("UserAtBottom".into(), user_at_bottom),
        ("QuiescentPriority".into(), quiescent),
        ("RequestServed".into(), served),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{fire_atomic, Ctx};

    fn desk() -> SystemConfig {
        SystemConfig::new(2, 1, 1)
    }

    fn runnable(entries: &[(u32, bool)], n: u32) -> Vec<Value> {
        let mut r = vec![Value::none(); n as usize];
        for (k, b) in entries {
            r[*k as usize] = Value::some(Value::Bool(*b));
        }
        r
    }

    #[test]
    fn sched_policy_rules() {
        let cfg = desk();
        let env = cfg.env().unwrap();
        assert_eq!(env.sched.pick(&runnable(&[(2, true), (3, false)], 5)), Some(2));
        assert_eq!(env.sched.pick(&runnable(&[(2, false), (3, false)], 5)), None);
        let mut flipped = cfg.clone();
        flipped.user_priority = BTreeMap::from([(2, 1), (3, 2)]);
        let env = flipped.env().unwrap();
        assert_eq!(env.sched.pick(&runnable(&[(2, true), (3, true)], 5)), Some(3));
        let mut tie = cfg.clone();
        tie.user_priority = BTreeMap::from([(2, 1), (3, 1)]);
        assert_eq!(tie.env().unwrap().sched.pick(&runnable(&[(2, true), (3, true)], 5)), Some(2));
    }

    #[test]
    fn handle_events_rules() {
        let cfg = desk();
        let env = cfg.env().unwrap();
        let r = runnable(&[(2, false), (3, false)], 5);
        let rt = cfg.routines();
        assert_eq!(env.events.handle(NatSet::empty(), r.clone(), &rt), Ok(r.clone()));
        assert_eq!(
            env.events.handle(NatSet::singleton(0), r, &rt),
            Ok(runnable(&[(2, true), (3, false)], 5))
        );
        let woken = runnable(&[(2, true)], 5);
        assert_eq!(env.events.handle(NatSet::singleton(0), woken.clone(), &rt), Ok(woken));
        let bad = EventTable { event_task: BTreeMap::from([(0, 4)]) };
        assert_eq!(
            bad.handle(NatSet::singleton(0), runnable(&[], 5), &rt),
            Err(EvalError::EventMapsToNonUser(0))
        );
    }

    #[test]
    fn config_validation() {
        assert!(SystemConfig::new(0, 0, 0).validate().is_err());
        let mut cfg = desk();
        cfg.event_task.insert(0, 4);
        assert!(cfg.validate().is_err());
        let mut cfg = desk();
        cfg.priority.remove(&1);
        assert!(matches!(cfg.env(), Err(ConfigError::Invalid(_))));
        assert!(desk().validate().is_ok());
    }

    #[test]
    fn assembled_system_shape() {
        let sys = build_system(&desk()).unwrap();
        assert_eq!(sys.tasks.len(), 6);
        assert_eq!(sys.init.get(VarId::AT), &Value::Nat(2));
        assert_eq!(sys.init.get(VarId::EIT), &Value::Set([1, 4].into_iter().collect()));
        assert_eq!(sys.init.get(VarId::NEXT_T), &Value::none());
        let points: Vec<usize> = sys.tasks.iter().map(|t| t.body.point_count()).collect();
        assert_eq!(points, vec![2, 14, 14, 5, 6, 6]);
    }

    #[test]
    fn change_events_branching() {
        let mut cfg = SystemConfig::new(1, 1, 1);
        let one = |c: &Command| match c {
            Command::Basic(a) => a.branches.len(),
            _ => unreachable!(),
        };
        assert_eq!(one(&change_events("c", &cfg)), 1);
        cfg.nb_events = 0;
        cfg.reset_tables();
        assert_eq!(one(&change_events("c", &cfg)), 1);
        cfg.nb_events = 3;
        cfg.reset_tables();
        assert_eq!(one(&change_events("c", &cfg)), 3);
        cfg.change_events_mode = ChangeEventsMode::AnySuperset;
        assert_eq!(one(&change_events("c", &cfg)), 8);
    }

    /// Runs a straight-line sequence of atomic commands.
    fn run(cfg: &SystemConfig, s: &GlobalState, cmds: &[Command]) -> GlobalState {
        let env = cfg.env().unwrap();
        let layout = cfg.layout();
        let mut s = s.clone();
        for c in cmds {
            s = fire_atomic(c, &s, Ctx::new(&env), &layout).unwrap().unwrap();
        }
        s
    }

    fn straight_line(c: Command) -> Vec<Command> {
        match c {
            Command::Seq(cs) => cs.into_iter().flat_map(straight_line).collect(),
            other => vec![other],
        }
    }

    #[test]
    fn schedule_iteration_by_hand() {
        let cfg = desk();
        let s = initial_state(&cfg, &cfg.layout());
        let Command::Seq(parts) = schedule_body() else { unreachable!() };
        let Command::While(_, body) = &parts[1] else { unreachable!() };
        let mut steps = vec![parts[0].clone()];
        steps.extend(straight_line((**body).clone()));
        let t = run(&cfg, &s, &steps);
        assert_eq!(t.get(VarId::NEXT_T), &Value::some(Value::Nat(2)));
    }

    #[test]
    fn switch_to_fresh_task_enables_svca() {
        let cfg = desk();
        let mut s = initial_state(&cfg, &cfg.layout());
        s.set(VarId::NEXT_T, Value::some(Value::Nat(3)));
        s.set(VarId::AT, Value::Nat(1));
        s.set(VarId::AT_STACK, Value::nat_stack(&[2]));
        s.set(VarId::EIT, Value::Set(NatSet::singleton(4)));
        let Command::Seq(parts) = context_switch_body(true) else { unreachable!() };
        let t = run(&cfg, &s, &parts[..3]);
        assert_eq!(t.get(VarId::AT_STACK), &Value::nat_stack(&[3]));
        assert_eq!(t.get(VarId::CUR_USER), &Value::Nat(3));
        let Command::If(cond, then, _) = &parts[3] else { unreachable!() };
        let env = cfg.env().unwrap();
        assert!(cond.test.eval_bool(&t, Ctx::new(&env)).unwrap());
        let t = run(&cfg, &t, &[(**then).clone()]);
        assert!(matches!(t.get(VarId::EIT), Value::Set(e) if e.contains(1)));
        let back = run(&cfg, &t, &[hw::iret("r", cfg.variant)]);
        assert_eq!(back.get(VarId::AT), &Value::Nat(3));
    }

    #[test]
    fn switch_to_self_round_trips() {
        let cfg = desk();
        let mut s = initial_state(&cfg, &cfg.layout());
        s.set(VarId::NEXT_T, Value::some(Value::Nat(2)));
        s.set(VarId::AT, Value::Nat(0));
        s.set(VarId::AT_STACK, Value::nat_stack(&[2]));
        let Command::Seq(parts) = context_switch_body(false) else { unreachable!() };
        let t = run(&cfg, &s, &parts[..3]);
        assert_eq!(t.get(VarId::AT_STACK), &Value::nat_stack(&[2]));
        let saved = Value::some(Value::pair(Value::Bool(false), Value::nat_stack(&[2])));
        assert!(matches!(t.get(VarId::CONTEXTS), Value::Map(m) if m[2] == saved));
    }
}
