use std::fmt;
use std::ops::Range;

use super::value::NatSet;

/// A routine is the unit the hardware switches between: the two supervisor
/// call handlers, user tasks and interrupt handlers.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct RoutineId(pub u32);

impl RoutineId {
    /// Synchronous supervisor-call handler.
    pub const SVC_S: RoutineId = RoutineId(0);
    /// Asynchronous supervisor-call handler.
    pub const SVC_A: RoutineId = RoutineId(1);
    pub const USER0: RoutineId = RoutineId(2);
}

impl fmt::Display for RoutineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RoutineKind {
    SvcS,
    SvcA,
    User,
    Interrupt,
}

/// Routine numbering: `0` SVC_s, `1` SVC_a, users in `[2, 2+users)`,
/// interrupts in `[2+users, 2+users+ints)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Routines {
    pub nb_users: u32,
    pub nb_ints: u32,
}

impl Routines {
    pub fn new(nb_users: u32, nb_ints: u32) -> Self {
        Routines { nb_users, nb_ints }
    }

    /// Total number of routine ids, i.e. the exclusive upper bound of the domain.
    pub fn count(&self) -> u32 {
        2 + self.nb_users + self.nb_ints
    }

    pub fn users(&self) -> Range<u32> {
        2..2 + self.nb_users
    }

    pub fn interrupts(&self) -> Range<u32> {
        2 + self.nb_users..self.count()
    }

    pub fn kind(&self, r: u32) -> Option<RoutineKind> {
        match r {
            0 => Some(RoutineKind::SvcS),
            1 => Some(RoutineKind::SvcA),
            r if self.users().contains(&r) => Some(RoutineKind::User),
            r if self.interrupts().contains(&r) => Some(RoutineKind::Interrupt),
            _ => None,
        }
    }

    pub fn is_user(&self, r: u32) -> bool {
        self.users().contains(&r)
    }

    pub fn is_interrupt(&self, r: u32) -> bool {
        self.interrupts().contains(&r)
    }

    pub fn is_svc(&self, r: u32) -> bool {
        r < 2
    }

    pub fn user_set(&self) -> NatSet {
        self.users().collect()
    }

    pub fn interrupt_set(&self) -> NatSet {
        self.interrupts().collect()
    }

    /// Hardware interrupts plus SVC_a: everything that can be masked in EIT.
    pub fn iprime(&self) -> NatSet {
        let mut s = self.interrupt_set();
        s.insert(RoutineId::SVC_A.0);
        s
    }

    pub fn all(&self) -> NatSet {
        NatSet::range(0, self.count())
    }
}
