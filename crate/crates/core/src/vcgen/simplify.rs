//! Removal of VCs that are valid for syntactic reasons.

use std::collections::HashMap;

use super::{TrivialReason, Vc, VcKind, VcStatus};
use crate::kernel::{Expr, Value};

/// Canonical form used for duplicate detection: conjunctions flattened,
/// `true` dropped, conjuncts sorted and deduplicated, literals on the right
/// of (in)equalities. Labels and task identities play no part.
pub fn normalize(e: &Expr) -> Expr {
    match e {
        Expr::And(_) => {
            let mut parts: Vec<Expr> = e
                .conjuncts()
                .into_iter()
                .map(normalize)
                .flat_map(|p| match p {
                    Expr::And(xs) => xs,
                    other => vec![other],
                })
                .filter(|p| !p.is_true())
                .collect();
            parts.sort();
            parts.dedup();
            Expr::and(parts)
        }
        Expr::Eq(a, b) | Expr::Ne(a, b) => {
            let (mut a, mut b) = (normalize(a), normalize(b));
            if matches!(a, Expr::Lit(_)) && !matches!(b, Expr::Lit(_)) {
                std::mem::swap(&mut a, &mut b);
            }
            if matches!(e, Expr::Eq(..)) {
                Expr::eq(a, b)
            } else {
                Expr::ne(a, b)
            }
        }
        Expr::Not(a) => match normalize(a) {
            Expr::Lit(Value::Bool(b)) => Expr::bool(!b),
            other => Expr::not(other),
        },
        Expr::Var(_) | Expr::Lit(_) | Expr::Abort(_) => e.clone(),
        _ => {
            let mut children = e.children().into_iter().map(normalize);
            rebuild(e, &mut children)
        }
    }
}

fn rebuild(e: &Expr, c: &mut impl Iterator<Item = Expr>) -> Expr {
    let mut n = || Box::new(c.next().expect("arity"));
    match e {
        Expr::Or(xs) => Expr::Or((0..xs.len()).map(|_| *n()).collect()),
        Expr::SetLit(xs) => Expr::SetLit((0..xs.len()).map(|_| *n()).collect()),
        Expr::Call(f, xs) => Expr::Call(*f, (0..xs.len()).map(|_| *n()).collect()),
        Expr::Implies(..) => Expr::Implies(n(), n()),
        Expr::Union(..) => Expr::Union(n(), n()),
        Expr::Diff(..) => Expr::Diff(n(), n()),
        Expr::Inter(..) => Expr::Inter(n(), n()),
        Expr::Member(..) => Expr::Member(n(), n()),
        Expr::Push(..) => Expr::Push(n(), n()),
        Expr::Lookup(..) => Expr::Lookup(n(), n()),
        Expr::Pair(..) => Expr::Pair(n(), n()),
        Expr::Head(_) => Expr::Head(n()),
        Expr::Tail(_) => Expr::Tail(n()),
        Expr::Some(_) => Expr::Some(n()),
        Expr::The(_) => Expr::The(n()),
        Expr::Fst(_) => Expr::Fst(n()),
        Expr::Snd(_) => Expr::Snd(n()),
        Expr::At(_, l) => Expr::At(n(), l.clone()),
        Expr::Override(..) => Expr::Override(n(), n(), n()),
        Expr::Ite(..) => Expr::Ite(n(), n(), n()),
        Expr::Var(_) | Expr::Lit(_) | Expr::Abort(_) | Expr::And(_) | Expr::Eq(..) | Expr::Ne(..) | Expr::Not(_) => {
            unreachable!("handled by normalize")
        }
    }
}

pub fn canonical_key(vc: &Vc) -> (VcKind, Expr, Expr) {
    (vc.kind, normalize(&vc.antecedent), normalize(&vc.consequent))
}

/// Whether the antecedent is unsatisfiable for a syntactic reason: a
/// literal `false` conjunct, or `AT = c1` and `AT = c2` with `c1 ≠ c2`.
pub fn contradictory(antecedent: &Expr) -> bool {
    let n = normalize(antecedent);
    let parts = n.conjuncts();
    if parts.iter().any(|p| p.is_false()) {
        return true;
    }
    let mut at = parts.iter().filter_map(|p| p.as_at_equality());
    match at.next() {
        Some(c) => at.any(|d| d != c),
        None => false,
    }
}

#[derive(Clone, Copy, Default, PartialEq, Eq, Debug)]
pub struct SimplifyStats {
    pub contradictions: u64,
    pub duplicates: u64,
    pub retained: u64,
}

/// Marks contradictory VCs, then every VC whose canonical form equals that
/// of an earlier retained one. Already-decided VCs are left alone.
pub fn simplify_trivial(vcs: &mut [Vc]) -> SimplifyStats {
    let mut stats = SimplifyStats::default();
    let mut seen: HashMap<(VcKind, Expr, Expr), usize> = HashMap::new();
    #[allow(clippy::needless_range_loop)] // entries are read and written by index
    for i in 0..vcs.len() {
        if vcs[i].status != VcStatus::Pending {
            continue;
        }
        if contradictory(&vcs[i].antecedent) {
            vcs[i].status = VcStatus::Trivial(TrivialReason::Contradiction);
            stats.contradictions += 1;
            continue;
        }
        match seen.entry(canonical_key(&vcs[i])) {
            std::collections::hash_map::Entry::Occupied(rep) => {
                vcs[i].status = VcStatus::Trivial(TrivialReason::Duplicate(*rep.get()));
                stats.duplicates += 1;
            }
            std::collections::hash_map::Entry::Vacant(slot) => {
                slot.insert(i);
                stats.retained += 1;
            }
        }
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{NatSet, VarId};
    use crate::vcgen::{annotate_guards, gen_interference_vcs, Site};

    fn vc(ante: Expr, cons: Expr) -> Vc {
        let site = Site {
            task: 0,
            label: "a".into(),
        };
        Vc::new(VcKind::Sequential, vec![ante], cons, &[], site.clone(), site, 0)
    }

    #[test]
    fn toy_interference_is_all_contradictory() {
        let sys = annotate_guards(&crate::vcgen::tests::toy());
        let mut vcs = gen_interference_vcs(&sys);
        let s = simplify_trivial(&mut vcs);
        assert_eq!(s.contradictions, 18);
        assert_eq!(s.retained, 0);
    }

    #[test]
    fn true_antecedent_is_retained() {
        let mut vcs = vec![vc(Expr::bool(true), Expr::at_is(2))];
        assert_eq!(simplify_trivial(&mut vcs).retained, 1);
        assert_eq!(vcs[0].status, VcStatus::Pending);
    }

    #[test]
    fn duplicates_up_to_order_and_orientation() {
        let a = Expr::and(vec![Expr::at_is(2), Expr::member(Expr::nat(1), Expr::Var(VarId::EIT))]);
        let b = Expr::and(vec![
            Expr::member(Expr::nat(1), Expr::Var(VarId::EIT)),
            Expr::eq(Expr::nat(2), Expr::Var(VarId::AT)),
            Expr::bool(true),
        ]);
        let mut vcs = vec![vc(a, Expr::set(NatSet::empty())), vc(b, Expr::set(NatSet::empty()))];
        let s = simplify_trivial(&mut vcs);
        assert_eq!((s.retained, s.duplicates), (1, 1));
        assert_eq!(vcs[1].status, VcStatus::Trivial(TrivialReason::Duplicate(0)));
    }

    #[test]
    fn contradiction_rule() {
        assert!(contradictory(&Expr::and(vec![Expr::at_is(1), Expr::at_is(2)])));
        assert!(!contradictory(&Expr::and(vec![Expr::at_is(1), Expr::at_is(1)])));
        assert!(contradictory(&Expr::and(vec![Expr::at_is(1), Expr::not(Expr::bool(true))])));
        // a non-literal comparison is not a contradiction by syntax
        assert!(!contradictory(&Expr::and(vec![
            Expr::at_is(1),
            Expr::eq(Expr::Var(VarId::AT), Expr::Var(VarId::CUR_USER))
        ])));
    }
}
