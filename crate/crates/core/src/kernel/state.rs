use std::collections::HashMap;
use std::fmt;

use super::routine::Routines;
use super::value::{Type, Value};

/// Index of a variable in a [`Layout`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct VarId(pub u16);

impl VarId {
    pub const EIT: VarId = VarId(0);
    pub const SVCA_REQ: VarId = VarId(1);
    pub const AT: VarId = VarId(2);
    pub const AT_STACK: VarId = VarId(3);
    pub const CUR_USER: VarId = VarId(4);
    pub const CONTEXTS: VarId = VarId(5);
    pub const R: VarId = VarId(6);
    pub const E: VarId = VarId(7);
    pub const E_TMP: VarId = VarId(8);
    pub const NEXT_T: VarId = VarId(9);
    /// Only present when the layout has an EIT stack (generic hardware).
    pub const EIT_STACK: VarId = VarId(10);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

pub const CANONICAL_NAMES: [&str; 11] = [
    "EIT", "SVCaReq", "AT", "ATStack", "curUser", "contexts", "R", "E", "E_tmp", "nextT",
    "EITStack",
];

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct VarDecl {
    pub name: String,
    pub ty: Type,
}

/// The variable declarations of a system: canonical hardware/OS variables
/// first, in the fixed order of the `VarId` constants, then user variables.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Layout {
    vars: Vec<VarDecl>,
    index: HashMap<String, VarId>,
    canonical: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LayoutError {
    #[error("variable `{0}` declared twice")]
    Duplicate(String),
    #[error("variable `{name}`: {reason}")]
    BadType { name: String, reason: String },
}

impl Layout {
    pub fn canonical(routines: Routines, nb_events: u32, eit_stack: bool) -> Self {
        let n = routines.count();
        let nat = Type::Nat(n);
        let mut types = vec![
            Type::Set(n),
            Type::Bool,
            nat.clone(),
            Type::stack(nat.clone()),
            nat.clone(),
            Type::map(n, Type::pair(Type::Bool, Type::stack(nat.clone()))),
            Type::map(n, Type::Bool),
            Type::Set(nb_events),
            Type::Set(nb_events),
            Type::opt(nat),
        ];
        if eit_stack {
            types.push(Type::stack(Type::Set(n)));
        }
        let mut layout = Layout {
            vars: Vec::new(),
            index: HashMap::new(),
            canonical: types.len(),
        };
        for (name, ty) in CANONICAL_NAMES.iter().zip(types) {
            layout.push(name, ty);
        }
        layout
    }

    fn push(&mut self, name: &str, ty: Type) -> VarId {
        let id = VarId(self.vars.len() as u16);
        self.index.insert(name.to_string(), id);
        self.vars.push(VarDecl {
            name: name.to_string(),
            ty,
        });
        id
    }

    pub fn declare(&mut self, name: &str, ty: Type) -> Result<VarId, LayoutError> {
        if self.index.contains_key(name) {
            return Err(LayoutError::Duplicate(name.to_string()));
        }
        check_bounds(name, &ty)?;
        Ok(self.push(name, ty))
    }

    pub fn lookup(&self, name: &str) -> Option<VarId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: VarId) -> &str {
        &self.vars[id.index()].name
    }

    pub fn ty(&self, id: VarId) -> &Type {
        &self.vars[id.index()].ty
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn has_eit_stack(&self) -> bool {
        self.canonical > VarId::EIT_STACK.index()
    }

    pub fn is_canonical(&self, id: VarId) -> bool {
        id.index() < self.canonical
    }

    /// Variables declared by the model file (beyond the canonical ones).
    pub fn user_vars(&self) -> impl Iterator<Item = (VarId, &VarDecl)> {
        self.vars
            .iter()
            .enumerate()
            .skip(self.canonical)
            .map(|(i, d)| (VarId(i as u16), d))
    }

    pub fn ids(&self) -> impl Iterator<Item = VarId> {
        (0..self.vars.len()).map(|i| VarId(i as u16))
    }

    /// A state with every variable at its type's default value.
    pub fn default_state(&self) -> GlobalState {
        GlobalState {
            vals: self.vars.iter().map(|d| d.ty.default_value()).collect(),
        }
    }

    pub fn encode(&self, s: &GlobalState, out: &mut Vec<u8>) {
        for (d, v) in self.vars.iter().zip(&s.vals) {
            d.ty.encode(v, out);
        }
    }

    pub fn decode(&self, buf: &[u8], pos: &mut usize) -> GlobalState {
        GlobalState {
            vals: self.vars.iter().map(|d| d.ty.decode(buf, pos)).collect(),
        }
    }

    /// `true` iff every variable holds a value of its declared type.
    pub fn well_typed(&self, s: &GlobalState) -> bool {
        s.vals.len() == self.vars.len()
            && self.vars.iter().zip(&s.vals).all(|(d, v)| d.ty.admits(v))
    }

    pub fn display<'a>(&'a self, s: &'a GlobalState) -> StateDisplay<'a> {
        StateDisplay { layout: self, state: s }
    }
}

fn check_bounds(name: &str, ty: &Type) -> Result<(), LayoutError> {
    let bad = |reason: &str| {
        Err(LayoutError::BadType {
            name: name.to_string(),
            reason: reason.to_string(),
        })
    };
    match ty {
        Type::Set(n) | Type::Map(n, _) if *n > 64 => bad("bound exceeds 64"),
        Type::Stack(t) | Type::Opt(t) | Type::Map(_, t) => check_bounds(name, t),
        Type::Pair(a, b) => check_bounds(name, a).and_then(|_| check_bounds(name, b)),
        _ => Ok(()),
    }
}

/// A valuation of every variable of a [`Layout`], indexed by [`VarId`].
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct GlobalState {
    pub vals: Vec<Value>,
}

impl GlobalState {
    pub fn get(&self, id: VarId) -> &Value {
        &self.vals[id.index()]
    }

    pub fn set(&mut self, id: VarId, v: Value) {
        self.vals[id.index()] = v;
    }

    /// Variables whose value differs between `self` and `other`.
    pub fn diff<'a>(&'a self, other: &'a GlobalState) -> impl Iterator<Item = VarId> + 'a {
        self.vals
            .iter()
            .zip(&other.vals)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, _)| VarId(i as u16))
    }
}

pub struct StateDisplay<'a> {
    layout: &'a Layout,
    state: &'a GlobalState,
}

impl fmt::Display for StateDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, id) in self.layout.ids().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}={}", self.layout.name(id), self.state.get(id))?;
        }
        Ok(())
    }
}
