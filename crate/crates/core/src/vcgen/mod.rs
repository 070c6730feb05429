//! Owicki-Gries proof obligations: sequential and interference-freedom
//! verification conditions, trivial elimination and finite-domain discharge.

pub mod discharge;
pub mod simplify;

use std::collections::HashMap;
use std::fmt;

use crate::kernel::{Command, Expr, GlobalState, PointKind, System, Update, Value, VarId};

pub use discharge::{discharge_all, discharge_finite, Domains, UnboundedDomain};
pub use simplify::{canonical_key, simplify_trivial, SimplifyStats};

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum VcKind {
    Sequential,
    Interference,
}

impl fmt::Display for VcKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VcKind::Sequential => "sequential",
            VcKind::Interference => "interference",
        })
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum TrivialReason {
    /// Two `AT = c` conjuncts with distinct constants, or a literal `false`.
    Contradiction,
    /// Same canonical form as the VC with this index.
    Duplicate(usize),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum VcStatus {
    Pending,
    Trivial(TrivialReason),
    Discharged,
    /// A valuation of the VC's free variables satisfying the antecedent but
    /// not the consequent; `error` is set when that came from a failed evaluation.
    Failed {
        witness: Vec<(VarId, Value)>,
        error: Option<String>,
    },
    Unknown,
}

/// Where an obligation comes from: a point of a task.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Site {
    pub task: usize,
    pub label: String,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Vc {
    pub kind: VcKind,
    pub antecedent: Expr,
    /// The assertion that must hold after `effect`.
    pub assertion: Expr,
    pub effect: Vec<Update>,
    /// `assertion` with `effect` substituted: the consequent over the pre-state.
    pub consequent: Expr,
    /// The annotated point whose assertion is at stake.
    pub owner: Site,
    /// The acting point (interference) or the point whose step is checked (sequential).
    pub actor: Site,
    pub branch: usize,
    pub status: VcStatus,
}

impl Vc {
    fn new(kind: VcKind, antecedent: Vec<Expr>, assertion: Expr, effect: &[Update], owner: Site, actor: Site, branch: usize) -> Vc {
        let consequent = weakest_pre(&assertion, effect);
        Vc {
            kind,
            antecedent: Expr::and(antecedent.into_iter().filter(|e| !e.is_true()).collect()),
            assertion,
            effect: effect.to_vec(),
            consequent,
            owner,
            actor,
            branch,
            status: VcStatus::Pending,
        }
    }
}

/// `p` after simultaneous assignment `effect`, as a predicate on the pre-state.
pub fn weakest_pre(p: &Expr, effect: &[Update]) -> Expr {
    if effect.is_empty() {
        return p.clone();
    }
    let map: HashMap<VarId, Expr> = effect.iter().map(|u| (u.target, u.value.clone())).collect();
    p.subst(&map)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("task `{task}`: point `{label}` has no assertion")]
pub struct UnannotatedPoint {
    pub task: String,
    pub label: String,
}

/// Gives every point without an assertion the default one: `AT = r` when its
/// guard contains the conjunct `AT = r`, `true` when it is unguarded.
pub fn annotate_guards(sys: &System) -> System {
    let mut out = sys.clone();
    for task in &mut out.tasks {
        task.body.for_each_assertion_mut(&mut |slot, guard| {
            if slot.is_none() {
                let at = guard.and_then(|g| g.conjuncts().into_iter().find_map(Expr::as_at_equality));
                *slot = Some(at.map_or(Expr::bool(true), Expr::at_is));
            }
        });
    }
    out
}

/// One atomic effect of a point: tests have the identity effect.
struct Effect<'a> {
    label: &'a str,
    guard: Option<&'a Expr>,
    pre: Option<&'a Expr>,
    branches: Vec<&'a [Update]>,
}

fn effects<'a>(c: &'a Command, out: &mut Vec<Effect<'a>>) {
    match c {
        Command::Skip => {}
        Command::Basic(a) | Command::Await(_, a) => out.push(Effect {
            label: &a.label,
            guard: match c {
                Command::Await(g, _) => Some(g),
                _ => None,
            },
            pre: a.assertion.as_ref(),
            branches: a.branches.iter().map(Vec::as_slice).collect(),
        }),
        Command::Seq(cs) => cs.iter().for_each(|c| effects(c, out)),
        Command::If(cond, t, e) => {
            out.push(Effect {
                label: &cond.label,
                guard: cond.guard.as_ref(),
                pre: cond.assertion.as_ref(),
                branches: vec![&[]],
            });
            effects(t, out);
            effects(e, out);
        }
        Command::While(cond, b) => {
            out.push(Effect {
                label: &cond.label,
                guard: cond.guard.as_ref(),
                pre: cond.assertion.as_ref(),
                branches: vec![&[]],
            });
            effects(b, out);
        }
    }
}

fn with_guard(mut parts: Vec<Expr>, guard: Option<&Expr>) -> Vec<Expr> {
    if let Some(g) = guard {
        parts.push(g.clone());
    }
    parts
}

/// For every assertion of task X and every atomic effect (per branch) of a
/// task Y ≠ X: `P ∧ guard ∧ pre ⟹ P[effect]`. Points without an assertion
/// contribute no obligations as X and a `true` precondition as Y.
pub fn gen_interference_vcs(sys: &System) -> Vec<Vc> {
    let per_task: Vec<Vec<Effect<'_>>> = sys
        .tasks
        .iter()
        .map(|t| {
            let mut v = Vec::new();
            effects(&t.body, &mut v);
            v
        })
        .collect();
    let mut out = Vec::new();
    for (x, task) in sys.tasks.iter().enumerate() {
        for point in task.body.atomic_points() {
            let Some(p) = point.assertion else { continue };
            for (y, acts) in per_task.iter().enumerate() {
                if x == y {
                    continue;
                }
                for act in acts {
                    for (branch, f) in act.branches.iter().enumerate() {
                        let mut ante = vec![p.clone()];
                        ante = with_guard(ante, act.guard);
                        ante.extend(act.pre.cloned());
                        out.push(Vc::new(
                            VcKind::Interference,
                            ante,
                            p.clone(),
                            f,
                            Site {
                                task: x,
                                label: point.label.to_string(),
                            },
                            Site {
                                task: y,
                                label: act.label.to_string(),
                            },
                            branch,
                        ));
                    }
                }
            }
        }
    }
    out
}

/// Sequential obligations of one task body whose final assertion is `post`.
pub fn gen_sequential_vcs(sys: &System, task: usize, post: &Expr) -> Result<Vec<Vc>, UnannotatedPoint> {
    let t = &sys.tasks[task];
    if let Some(p) = t.body.atomic_points().iter().find(|p| p.assertion.is_none()) {
        return Err(UnannotatedPoint {
            task: t.name.clone(),
            label: p.label.to_string(),
        });
    }
    let mut g = SeqGen {
        task,
        task_name: &t.name,
        out: Vec::new(),
    };
    g.cmd(&t.body, post)?;
    Ok(g.out)
}

struct SeqGen<'a> {
    task: usize,
    task_name: &'a str,
    out: Vec<Vc>,
}

impl SeqGen<'_> {
    fn assertion<'e>(&self, a: Option<&'e Expr>, label: &str) -> Result<&'e Expr, UnannotatedPoint> {
        a.ok_or_else(|| UnannotatedPoint {
            task: self.task_name.to_string(),
            label: label.to_string(),
        })
    }

    /// Assertion at the first point of `c`, or `next` if `c` has none.
    fn entry<'e>(&self, c: &'e Command, next: &'e Expr) -> Result<&'e Expr, UnannotatedPoint> {
        match c {
            Command::Skip => Ok(next),
            Command::Basic(a) | Command::Await(_, a) => self.assertion(a.assertion.as_ref(), &a.label),
            Command::Seq(cs) => cs.iter().rev().try_fold(next, |k, c| self.entry(c, k)),
            Command::If(cond, ..) | Command::While(cond, _) => self.assertion(cond.assertion.as_ref(), &cond.label),
        }
    }

    fn push(&mut self, ante: Vec<Expr>, next: &Expr, effect: &[Update], label: &str, branch: usize) {
        let site = Site {
            task: self.task,
            label: label.to_string(),
        };
        self.out.push(Vc::new(VcKind::Sequential, ante, next.clone(), effect, site.clone(), site, branch));
    }

    fn cmd(&mut self, c: &Command, next: &Expr) -> Result<(), UnannotatedPoint> {
        match c {
            Command::Skip => {}
            Command::Basic(a) | Command::Await(_, a) => {
                let pre = self.assertion(a.assertion.as_ref(), &a.label)?.clone();
                let guard = match c {
                    Command::Await(g, _) => Some(g),
                    _ => None,
                };
                for (i, f) in a.branches.iter().enumerate() {
                    self.push(with_guard(vec![pre.clone()], guard), next, f, &a.label, i);
                }
            }
            Command::Seq(cs) => {
                let mut k = next;
                for c in cs.iter().rev() {
                    self.cmd(c, k)?;
                    k = self.entry(c, k)?;
                }
            }
            Command::If(cond, t, e) => {
                let pre = self.assertion(cond.assertion.as_ref(), &cond.label)?.clone();
                let base = with_guard(vec![pre], cond.guard.as_ref());
                let then_entry = self.entry(t, next)?.clone();
                let else_entry = self.entry(e, next)?.clone();
                let mut yes = base.clone();
                yes.push(cond.test.clone());
                self.push(yes, &then_entry, &[], &cond.label, 0);
                let mut no = base;
                no.push(Expr::not(cond.test.clone()));
                self.push(no, &else_entry, &[], &cond.label, 1);
                self.cmd(t, next)?;
                self.cmd(e, next)?;
            }
            Command::While(cond, body) => {
                let inv = self.assertion(cond.assertion.as_ref(), &cond.label)?.clone();
                let base = with_guard(vec![inv.clone()], cond.guard.as_ref());
                let body_entry = self.entry(body, &inv)?.clone();
                let mut stay = base.clone();
                stay.push(cond.test.clone());
                self.push(stay, &body_entry, &[], &cond.label, 0);
                let mut exit = base;
                exit.push(Expr::not(cond.test.clone()));
                self.push(exit, next, &[], &cond.label, 1);
                self.cmd(body, &inv)?;
            }
        }
        Ok(())
    }
}

/// Closed-form interference count: Σ over ordered task pairs X ≠ Y of
/// (annotated points of X) × (effects of Y, one per branch).
pub fn count_interference(sys: &System) -> u64 {
    let counts: Vec<(u64, u64)> = sys
        .tasks
        .iter()
        .map(|t| {
            let pts = t.body.atomic_points();
            let asserted = pts.iter().filter(|p| p.assertion.is_some()).count() as u64;
            let effects = pts
                .iter()
                .map(|p| if p.kind == PointKind::Test { 1 } else { p.branches as u64 })
                .sum::<u64>();
            (asserted, effects)
        })
        .collect();
    let total_a: u64 = counts.iter().map(|c| c.0).sum();
    let total_e: u64 = counts.iter().map(|c| c.1).sum();
    total_a * total_e - counts.iter().map(|(a, e)| a * e).sum::<u64>()
}

#[derive(Clone, Copy, Default, PartialEq, Eq, Debug)]
pub struct KindStats {
    pub total: u64,
    pub trivial: u64,
    pub discharged: u64,
    pub failed: u64,
    pub unknown: u64,
}

impl KindStats {
    /// Fraction of VCs eliminated as trivial.
    pub fn trivial_ratio(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.trivial as f64 / self.total as f64
        }
    }
}

#[derive(Clone, Copy, Default, PartialEq, Eq, Debug)]
pub struct VcStats {
    pub sequential: KindStats,
    pub interference: KindStats,
}

impl VcStats {
    pub fn all(&self) -> KindStats {
        let (a, b) = (self.sequential, self.interference);
        KindStats {
            total: a.total + b.total,
            trivial: a.trivial + b.trivial,
            discharged: a.discharged + b.discharged,
            failed: a.failed + b.failed,
            unknown: a.unknown + b.unknown,
        }
    }
}

pub fn vc_stats(vcs: &[Vc]) -> VcStats {
    let mut s = VcStats::default();
    for vc in vcs {
        let k = match vc.kind {
            VcKind::Sequential => &mut s.sequential,
            VcKind::Interference => &mut s.interference,
        };
        k.total += 1;
        match vc.status {
            VcStatus::Trivial(_) => k.trivial += 1,
            VcStatus::Discharged => k.discharged += 1,
            VcStatus::Failed { .. } => k.failed += 1,
            VcStatus::Unknown => k.unknown += 1,
            VcStatus::Pending => {}
        }
    }
    s
}

#[derive(Clone, Copy, Debug)]
pub struct PipelineOptions {
    pub simplify: bool,
    pub discharge: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            simplify: true,
            discharge: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct VcReport {
    pub system: System,
    pub vcs: Vec<Vc>,
    pub stats: VcStats,
}

impl VcReport {
    /// Every failing witness, a duplicate counting once per copy so the
    /// multiset does not depend on whether duplicates were removed.
    pub fn failed_witnesses(&self) -> Vec<(VcKind, Vec<(VarId, Value)>)> {
        let mut out: Vec<_> = self
            .vcs
            .iter()
            .filter_map(|vc| match self.effective_status(vc) {
                VcStatus::Failed { witness, .. } => Some((vc.kind, witness.clone())),
                _ => None,
            })
            .collect();
        out.sort();
        out
    }

    /// The verdict of `vc`, following a duplicate to its representative.
    pub fn effective_status<'a>(&'a self, vc: &'a Vc) -> &'a VcStatus {
        match &vc.status {
            VcStatus::Trivial(TrivialReason::Duplicate(i)) => &self.vcs[*i].status,
            s => s,
        }
    }
}

/// Annotates, generates, simplifies and discharges. Every task's final
/// assertion is `true`.
pub fn run_pipeline(sys: &System, opts: PipelineOptions) -> Result<VcReport, UnannotatedPoint> {
    let system = annotate_guards(sys);
    let mut vcs = Vec::new();
    for t in 0..system.tasks.len() {
        vcs.extend(gen_sequential_vcs(&system, t, &Expr::bool(true))?);
    }
    vcs.extend(gen_interference_vcs(&system));
    if opts.simplify {
        simplify_trivial(&mut vcs);
    }
    if opts.discharge {
        discharge_all(&mut vcs, &Domains::of(&system));
    }
    let stats = vc_stats(&vcs);
    Ok(VcReport { system, vcs, stats })
}

/// The witness as a full state: listed variables set, others at their defaults.
pub fn witness_state(sys: &System, witness: &[(VarId, Value)]) -> GlobalState {
    let mut s = sys.layout.default_state();
    for (id, v) in witness {
        s.set(*id, v.clone());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::control;
    use crate::echronos::{build_system, SystemConfig};
    use crate::kernel::Task;

    /// Two controlled tasks of three assignments each over user variables.
    pub(crate) fn toy() -> System {
        let cfg = SystemConfig::new(2, 0, 0);
        let mut layout = cfg.layout();
        let x = layout.declare("x", crate::kernel::Type::Bool).unwrap();
        let y = layout.declare("y", crate::kernel::Type::Nat(4)).unwrap();
        let body = |p: &str, var: VarId, vals: [Value; 3]| {
            Command::seq(
                ["First", "Second", "Third"]
                    .iter()
                    .zip(vals)
                    .map(|(l, v)| Command::basic(format!("{p}{l}"), vec![Update::new(var, Expr::Lit(v))]))
                    .collect(),
            )
        };
        let tasks = vec![
            Task {
                name: "Task1".into(),
                owner: 2,
                body: control(2, body("a", x, [Value::Bool(true), Value::Bool(false), Value::Bool(true)])),
            },
            Task {
                name: "Task2".into(),
                owner: 3,
                body: control(3, body("b", y, [Value::Nat(1), Value::Nat(2), Value::Nat(3)])),
            },
        ];
        let mut sys = System {
            name: "toy".into(),
            tasks,
            init: layout.default_state(),
            layout,
            env: cfg.env().unwrap(),
            config: cfg,
        };
        sys.init = sys.default_init();
        sys
    }

    #[test]
    fn guard_annotation_defaults_and_overrides() {
        let mut sys = toy();
        if let Command::Seq(cs) = &mut sys.tasks[0].body {
            if let Command::Await(_, a) = &mut cs[1] {
                a.assertion = Some(Expr::bool(false));
            }
        }
        let ann = annotate_guards(&sys);
        let got: Vec<String> = ann.tasks[0]
            .body
            .atomic_points()
            .iter()
            .map(|p| crate::kernel::render::expr_to_string(p.assertion.unwrap(), &ann.layout))
            .collect();
        assert_eq!(got, ["AT = 2", "false", "AT = 2"]);

        let sys = build_system(&SystemConfig::new(1, 0, 0)).unwrap();
        let ann = annotate_guards(&sys);
        let take = ann.tasks[0].body.atomic_points();
        assert!(take.iter().all(|p| p.assertion.unwrap().is_true()));
    }

    #[test]
    fn toy_counts() {
        let sys = annotate_guards(&toy());
        let vcs = gen_interference_vcs(&sys);
        assert_eq!(vcs.len(), 3 * 3 * 2);
        assert_eq!(count_interference(&sys), 18);
        assert!(vcs.iter().all(|v| v.owner.task != v.actor.task));
        assert_eq!(gen_sequential_vcs(&sys, 0, &Expr::bool(true)).unwrap().len(), 3);
    }

    #[test]
    fn single_task_has_no_interference() {
        let mut sys = toy();
        sys.tasks.truncate(1);
        assert!(gen_interference_vcs(&annotate_guards(&sys)).is_empty());
        sys.tasks[0].body = Command::Skip;
        let r = run_pipeline(&sys, PipelineOptions::default()).unwrap();
        assert_eq!(r.stats, VcStats::default());
    }

    #[test]
    fn unannotated_points_are_reported() {
        let sys = toy();
        let err = gen_sequential_vcs(&sys, 1, &Expr::bool(true)).unwrap_err();
        assert_eq!(err.label, "bFirst");
    }

    #[test]
    fn while_true_exit_has_false_antecedent() {
        let sys = annotate_guards(&build_system(&SystemConfig::new(1, 0, 0)).unwrap());
        let vcs = gen_sequential_vcs(&sys, 0, &Expr::bool(true)).unwrap();
        let exit = vcs.iter().find(|v| v.owner.label == "loop" && v.branch == 1).unwrap();
        assert!(exit.antecedent.conjuncts().contains(&&Expr::not(Expr::bool(true))));
    }

    #[test]
    fn interference_count_matches_closed_form_on_preset() {
        for (u, i, e) in [(1, 0, 0), (2, 1, 1), (3, 2, 2)] {
            let sys = annotate_guards(&build_system(&SystemConfig::new(u, i, e)).unwrap());
            assert_eq!(gen_interference_vcs(&sys).len() as u64, count_interference(&sys));
        }
    }
}
