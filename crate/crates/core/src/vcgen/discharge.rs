//! Brute-force discharge over the declared finite domains.
//!
//! Only the VC's free variables are enumerated. Antecedent variables come
//! first and each antecedent conjunct is tested as soon as its variables are
//! bound, so a restrictive antecedent prunes most of the space.

use std::collections::BTreeSet;

use rayon::prelude::*;

use super::simplify::normalize;
use super::{Vc, VcStatus};
use crate::kernel::{Ctx, EvalError, Expr, GlobalState, System, Value, VarId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("variable `{0}` has no finite domain (a stack occurs and no stack bound is set)")]
pub struct UnboundedDomain(pub String);

/// What discharge may enumerate: each variable's type, stacks cut at
/// `stack_bound`, and at most `bound` partial valuations per VC.
#[derive(Clone, Copy)]
pub struct Domains<'a> {
    pub sys: &'a System,
    pub stack_bound: Option<u32>,
    pub bound: u128,
}

impl<'a> Domains<'a> {
    pub fn of(sys: &'a System) -> Self {
        Domains {
            sys,
            stack_bound: Some(sys.config.stack_bound()),
            bound: sys.config.vc_bound,
        }
    }
}

pub fn discharge_finite(vc: &Vc, d: &Domains<'_>) -> Result<VcStatus, UnboundedDomain> {
    check_implication(&vc.antecedent, &vc.consequent, d)
}

/// Decides `antecedent ⟹ consequent` for all valuations of their free
/// variables. A consequent that evaluates to a model abort counts as
/// satisfied: the step cannot complete from that state, so it cannot break
/// the assertion.
pub fn check_implication(antecedent: &Expr, consequent: &Expr, d: &Domains<'_>) -> Result<VcStatus, UnboundedDomain> {
    let ante = normalize(antecedent);
    let conjuncts: Vec<&Expr> = ante.conjuncts();
    if conjuncts.iter().any(|c| c.is_false()) {
        return Ok(VcStatus::Discharged);
    }
    let layout = &d.sys.layout;
    let size = |v: VarId| {
        layout
            .ty(v)
            .domain_size(d.stack_bound)
            .ok_or_else(|| UnboundedDomain(layout.name(v).to_string()))
    };
    let vars_of = |e: &Expr| {
        let mut s = BTreeSet::new();
        e.free_vars(&mut s);
        s
    };

    // cheapest conjuncts first decide the variable order
    let mut ranked = Vec::new();
    for c in &conjuncts {
        let vs = vars_of(c);
        let mut cost: u128 = 1;
        for v in &vs {
            cost = cost.saturating_mul(size(*v)?);
        }
        ranked.push((cost, vs, *c));
    }
    ranked.sort_by_key(|r| r.0);
    let mut order: Vec<VarId> = Vec::new();
    for (_, vs, _) in &ranked {
        for v in vs {
            if !order.contains(v) {
                order.push(*v);
            }
        }
    }
    for v in vars_of(consequent) {
        if !order.contains(&v) {
            size(v)?;
            order.push(v);
        }
    }
    if order.iter().any(|v| size(*v).map_or(true, |s| s > d.bound)) {
        return Ok(VcStatus::Unknown);
    }

    // checks[k]: conjuncts whose last variable is order[k - 1]
    let mut checks: Vec<Vec<&Expr>> = vec![Vec::new(); order.len() + 1];
    for (_, vs, c) in &ranked {
        let depth = vs
            .iter()
            .map(|v| order.iter().position(|o| o == v).unwrap() + 1)
            .max()
            .unwrap_or(0);
        checks[depth].push(*c);
    }
    let stack_bound = d.stack_bound.unwrap_or(0);
    let domains: Vec<Vec<Value>> = order.iter().map(|v| layout.ty(*v).enumerate(stack_bound)).collect();
    let mut search = Search {
        ctx: Ctx::new(&d.sys.env),
        order: &order,
        domains: &domains,
        checks: &checks,
        consequent,
        budget: d.bound,
        state: layout.default_state(),
    };
    Ok(match search.run(0) {
        Outcome::Holds => VcStatus::Discharged,
        Outcome::OutOfBudget => VcStatus::Unknown,
        Outcome::Fails(error) => VcStatus::Failed {
            witness: search.witness(),
            error,
        },
    })
}

enum Outcome {
    Holds,
    OutOfBudget,
    Fails(Option<String>),
}

struct Search<'a> {
    ctx: Ctx<'a>,
    order: &'a [VarId],
    domains: &'a [Vec<Value>],
    checks: &'a [Vec<&'a Expr>],
    consequent: &'a Expr,
    budget: u128,
    state: GlobalState,
}

impl Search<'_> {
    fn witness(&self) -> Vec<(VarId, Value)> {
        let mut w: Vec<(VarId, Value)> = self.order.iter().map(|v| (*v, self.state.get(*v).clone())).collect();
        w.sort_by_key(|(v, _)| *v);
        w
    }

    fn run(&mut self, depth: usize) -> Outcome {
        for c in &self.checks[depth] {
            match c.eval_bool(&self.state, self.ctx) {
                Ok(true) => {}
                Ok(false) => return Outcome::Holds,
                Err(e) => return Outcome::Fails(Some(format!("antecedent: {e}"))),
            }
        }
        if depth == self.order.len() {
            return match self.consequent.eval_bool(&self.state, self.ctx) {
                Ok(true) | Err(EvalError::Abort(_)) => Outcome::Holds,
                Ok(false) => Outcome::Fails(None),
                Err(e) => Outcome::Fails(Some(format!("consequent: {e}"))),
            };
        }
        let var = self.order[depth];
        for v in &self.domains[depth] {
            if self.budget == 0 {
                return Outcome::OutOfBudget;
            }
            self.budget -= 1;
            self.state.set(var, v.clone());
            match self.run(depth + 1) {
                Outcome::Holds => {}
                other => return other,
            }
        }
        Outcome::Holds
    }
}

/// Discharges every pending VC in parallel; results do not depend on
/// scheduling. A VC over an unbounded domain becomes `Unknown`.
pub fn discharge_all(vcs: &mut [Vc], d: &Domains<'_>) {
    vcs.par_iter_mut()
        .filter(|vc| vc.status == VcStatus::Pending)
        .for_each(|vc| vc.status = discharge_finite(vc, d).unwrap_or(VcStatus::Unknown));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::echronos::{build_system, SystemConfig};
    use crate::hw::{svc_now_effect, HwVariant};
    use crate::kernel::{Update, VarId};
    use crate::vcgen::simplify::{contradictory, simplify_trivial};
    use crate::vcgen::{annotate_guards, gen_interference_vcs, weakest_pre, TrivialReason};

    fn sys() -> System {
        build_system(&SystemConfig::new(2, 1, 1)).unwrap()
    }

    fn check(sys: &System, ante: Expr, cons: Expr) -> VcStatus {
        check_implication(&ante, &cons, &Domains::of(sys)).unwrap()
    }

    #[test]
    fn false_antecedent_needs_no_enumeration() {
        let s = sys();
        let d = Domains {
            sys: &s,
            stack_bound: None,
            bound: 0,
        };
        let cons = Expr::eq(Expr::head(Expr::Var(VarId::AT_STACK)), Expr::nat(0));
        assert_eq!(check_implication(&Expr::bool(false), &cons, &d), Ok(VcStatus::Discharged));
        assert!(check_implication(&Expr::bool(true), &cons, &d).is_err());
    }

    #[test]
    fn unrelated_update_preserves_assertion() {
        let s = sys();
        let effect = [Update::new(VarId::SVCA_REQ, Expr::bool(true))];
        let cons = weakest_pre(&Expr::at_is(2), &effect);
        assert_eq!(check(&s, Expr::at_is(2), cons), VcStatus::Discharged);
    }

    #[test]
    fn overwriting_at_fails_with_witness() {
        let s = sys();
        let cons = weakest_pre(&Expr::at_is(2), &[Update::new(VarId::AT, Expr::nat(3))]);
        match check(&s, Expr::bool(true), cons) {
            VcStatus::Failed { witness, error } => {
                assert!(witness.is_empty());
                assert_eq!(error, None);
            }
            other => panic!("{other:?}"),
        }
        let cons = weakest_pre(&Expr::at_is(2), &[Update::new(VarId::AT, Expr::Var(VarId::CUR_USER))]);
        match check(&s, Expr::bool(true), cons) {
            VcStatus::Failed { witness, .. } => assert_eq!(witness, vec![(VarId::CUR_USER, Value::Nat(0))]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn svc_now_enters_svcs() {
        let s = sys();
        let cons = weakest_pre(&Expr::at_is(0), &svc_now_effect(HwVariant::Arm));
        assert_eq!(check(&s, Expr::at_is(2), cons), VcStatus::Discharged);
    }

    #[test]
    fn budget_exhaustion_is_unknown() {
        let s = sys();
        let d = Domains {
            sys: &s,
            stack_bound: Some(6),
            bound: 100,
        };
        let cons = Expr::eq(Expr::Var(VarId::AT_STACK), Expr::Var(VarId::AT_STACK));
        assert_eq!(check_implication(&Expr::bool(true), &cons, &d), Ok(VcStatus::Unknown));
    }

    #[test]
    fn contradiction_marks_are_sound() {
        for cfg in [SystemConfig::new(1, 0, 0), SystemConfig::new(2, 1, 1)] {
            let s = annotate_guards(&build_system(&cfg).unwrap());
            let mut vcs = gen_interference_vcs(&s);
            simplify_trivial(&mut vcs);
            let d = Domains::of(&s);
            for vc in vcs.iter().filter(|v| v.status == VcStatus::Trivial(TrivialReason::Contradiction)) {
                assert!(contradictory(&vc.antecedent));
                // unsatisfiable antecedent: implies false
                assert_eq!(check_implication(&vc.antecedent, &Expr::bool(false), &d), Ok(VcStatus::Discharged));
            }
        }
    }
}
