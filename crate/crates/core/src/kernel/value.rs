//! Values and their types.
//!
//! Every natural in the model is bounded by a declared domain, so each
//! [`Type`] describes a finite set of values. That is what makes both the
//! explorer (finite state graph) and the VC discharger (finite valuation
//! space) exhaustive.

use std::fmt;

/// A set of small naturals (all below 64), stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct NatSet(u64);

impl NatSet {
    pub const MAX_ELEM: u32 = 64;

    pub const fn empty() -> Self {
        NatSet(0)
    }

    pub const fn from_bits(bits: u64) -> Self {
        NatSet(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    pub fn singleton(n: u32) -> Self {
        let mut s = Self::empty();
        s.insert(n);
        s
    }

    /// `{lo, lo+1, ..., hi-1}`
    pub fn range(lo: u32, hi: u32) -> Self {
        (lo..hi).collect()
    }

    pub fn contains(self, n: u32) -> bool {
        n < Self::MAX_ELEM && self.0 & (1u64 << n) != 0
    }

    pub fn insert(&mut self, n: u32) {
        assert!(n < Self::MAX_ELEM, "set element {n} out of range");
        self.0 |= 1u64 << n;
    }

    pub fn remove(&mut self, n: u32) {
        if n < Self::MAX_ELEM {
            self.0 &= !(1u64 << n);
        }
    }

    pub fn union(self, other: Self) -> Self {
        NatSet(self.0 | other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        NatSet(self.0 & !other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        NatSet(self.0 & other.0)
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    /// Largest element plus one, or 0 for the empty set.
    pub fn upper(self) -> u32 {
        64 - self.0.leading_zeros()
    }

    pub fn iter(self) -> impl Iterator<Item = u32> {
        let bits = self.0;
        (0..Self::MAX_ELEM).filter(move |i| bits & (1u64 << i) != 0)
    }
}

impl FromIterator<u32> for NatSet {
    fn from_iter<I: IntoIterator<Item = u32>>(iter: I) -> Self {
        let mut s = NatSet::empty();
        for n in iter {
            s.insert(n);
        }
        s
    }
}

impl fmt::Debug for NatSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for NatSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, n) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{n}")?;
        }
        f.write_str("}")
    }
}

/// A runtime value. Maps are total over `0..keys` with optional entries.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Value {
    Bool(bool),
    Nat(u32),
    Set(NatSet),
    /// Head (index 0) is the most recently pushed element.
    Stack(Vec<Value>),
    Opt(Option<Box<Value>>),
    Pair(Box<Value>, Box<Value>),
    Map(Vec<Value>),
}

impl Value {
    pub fn none() -> Self {
        Value::Opt(None)
    }

    pub fn some(v: Value) -> Self {
        Value::Opt(Some(Box::new(v)))
    }

    pub fn pair(a: Value, b: Value) -> Self {
        Value::Pair(Box::new(a), Box::new(b))
    }

    pub fn nat_stack(items: &[u32]) -> Self {
        Value::Stack(items.iter().map(|&n| Value::Nat(n)).collect())
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Value::Bool(_) => "bool",
            Value::Nat(_) => "nat",
            Value::Set(_) => "set",
            Value::Stack(_) => "stack",
            Value::Opt(_) => "option",
            Value::Pair(..) => "pair",
            Value::Map(_) => "map",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Nat(n) => write!(f, "{n}"),
            Value::Set(s) => write!(f, "{s}"),
            Value::Stack(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
            Value::Opt(None) => f.write_str("None"),
            Value::Opt(Some(v)) => write!(f, "Some({v})"),
            Value::Pair(a, b) => write!(f, "({a}, {b})"),
            Value::Map(entries) => {
                f.write_str("map{")?;
                let mut first = true;
                for (k, v) in entries.iter().enumerate() {
                    if let Value::Opt(Some(inner)) = v {
                        if !first {
                            f.write_str(", ")?;
                        }
                        first = false;
                        write!(f, "{k}: {inner}")?;
                    }
                }
                f.write_str("}")
            }
        }
    }
}

/// Declared type of a variable. Nat/Set/Map carry their exclusive upper bound.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Type {
    Bool,
    Nat(u32),
    Set(u32),
    Stack(Box<Type>),
    Opt(Box<Type>),
    Pair(Box<Type>, Box<Type>),
    /// Total map over keys `0..n`; every entry is an `Opt` of the value type.
    Map(u32, Box<Type>),
}

impl Type {
    pub fn stack(elem: Type) -> Self {
        Type::Stack(Box::new(elem))
    }

    pub fn opt(inner: Type) -> Self {
        Type::Opt(Box::new(inner))
    }

    pub fn pair(a: Type, b: Type) -> Self {
        Type::Pair(Box::new(a), Box::new(b))
    }

    pub fn map(keys: u32, value: Type) -> Self {
        Type::Map(keys, Box::new(value))
    }

    /// Whether `v` inhabits this type (including domain bounds).
    pub fn admits(&self, v: &Value) -> bool {
        match (self, v) {
            (Type::Bool, Value::Bool(_)) => true,
            (Type::Nat(n), Value::Nat(x)) => x < n,
            (Type::Set(n), Value::Set(s)) => s.upper() <= *n,
            (Type::Stack(t), Value::Stack(items)) => items.iter().all(|x| t.admits(x)),
            (Type::Opt(_), Value::Opt(None)) => true,
            (Type::Opt(t), Value::Opt(Some(x))) => t.admits(x),
            (Type::Pair(a, b), Value::Pair(x, y)) => a.admits(x) && b.admits(y),
            (Type::Map(n, t), Value::Map(entries)) => {
                entries.len() == *n as usize
                    && entries.iter().all(|e| match e {
                        Value::Opt(None) => true,
                        Value::Opt(Some(x)) => t.admits(x),
                        _ => false,
                    })
            }
            _ => false,
        }
    }

    /// The value a variable of this type takes when nothing else is said.
    pub fn default_value(&self) -> Value {
        match self {
            Type::Bool => Value::Bool(false),
            Type::Nat(_) => Value::Nat(0),
            Type::Set(_) => Value::Set(NatSet::empty()),
            Type::Stack(_) => Value::Stack(Vec::new()),
            Type::Opt(_) => Value::none(),
            Type::Pair(a, b) => Value::pair(a.default_value(), b.default_value()),
            Type::Map(n, _) => Value::Map(vec![Value::none(); *n as usize]),
        }
    }

    /// Number of inhabitants when stacks are at most `stack_bound` long,
    /// saturating at `u128::MAX`. `None` if a stack occurs and no bound is given.
    pub fn domain_size(&self, stack_bound: Option<u32>) -> Option<u128> {
        Some(match self {
            Type::Bool => 2,
            Type::Nat(n) => *n as u128,
            Type::Set(n) => 1u128.checked_shl(*n).unwrap_or(u128::MAX),
            Type::Stack(t) => {
                let bound = stack_bound?;
                let elems = t.domain_size(stack_bound)?;
                let mut total: u128 = 0;
                let mut layer: u128 = 1;
                for _ in 0..=bound {
                    total = total.saturating_add(layer);
                    layer = layer.saturating_mul(elems);
                }
                total
            }
            Type::Opt(t) => t.domain_size(stack_bound)?.saturating_add(1),
            Type::Pair(a, b) => a
                .domain_size(stack_bound)?
                .saturating_mul(b.domain_size(stack_bound)?),
            Type::Map(n, t) => {
                let per = t.domain_size(stack_bound)?.saturating_add(1);
                (0..*n).fold(1u128, |acc, _| acc.saturating_mul(per))
            }
        })
    }

    /// Every inhabitant, in a fixed order. Callers check `domain_size` first.
    pub fn enumerate(&self, stack_bound: u32) -> Vec<Value> {
        match self {
            Type::Bool => vec![Value::Bool(false), Value::Bool(true)],
            Type::Nat(n) => (0..*n).map(Value::Nat).collect(),
            Type::Set(n) => (0..(1u64 << n))
                .map(|bits| Value::Set(NatSet::from_bits(bits)))
                .collect(),
            Type::Stack(t) => {
                let elems = t.enumerate(stack_bound);
                let mut out = vec![Value::Stack(Vec::new())];
                let mut layer: Vec<Vec<Value>> = vec![Vec::new()];
                for _ in 0..stack_bound {
                    let mut next = Vec::new();
                    for prefix in &layer {
                        for e in &elems {
                            let mut items = prefix.clone();
                            items.push(e.clone());
                            next.push(items);
                        }
                    }
                    out.extend(next.iter().cloned().map(Value::Stack));
                    layer = next;
                }
                out
            }
            Type::Opt(t) => std::iter::once(Value::none())
                .chain(t.enumerate(stack_bound).into_iter().map(Value::some))
                .collect(),
            Type::Pair(a, b) => {
                let bs = b.enumerate(stack_bound);
                a.enumerate(stack_bound)
                    .into_iter()
                    .flat_map(|x| bs.iter().map(move |y| Value::pair(x.clone(), y.clone())))
                    .collect()
            }
            Type::Map(n, t) => {
                let entry = Type::Opt(t.clone()).enumerate(stack_bound);
                let mut out = vec![Vec::new()];
                for _ in 0..*n {
                    out = out
                        .into_iter()
                        .flat_map(|prefix: Vec<Value>| {
                            entry.iter().map(move |e| {
                                let mut p = prefix.clone();
                                p.push(e.clone());
                                p
                            })
                        })
                        .collect();
                }
                out.into_iter().map(Value::Map).collect()
            }
        }
    }

    /// Appends the canonical binary encoding of `v` (which must inhabit `self`).
    pub fn encode(&self, v: &Value, out: &mut Vec<u8>) {
        match (self, v) {
            (Type::Bool, Value::Bool(b)) => out.push(*b as u8),
            (Type::Nat(_), Value::Nat(n)) => put_varint(out, *n as u64),
            (Type::Set(_), Value::Set(s)) => put_varint(out, s.bits()),
            (Type::Stack(t), Value::Stack(items)) => {
                put_varint(out, items.len() as u64);
                for x in items {
                    t.encode(x, out);
                }
            }
            (Type::Opt(_), Value::Opt(None)) => out.push(0),
            (Type::Opt(t), Value::Opt(Some(x))) => {
                out.push(1);
                t.encode(x, out);
            }
            (Type::Pair(a, b), Value::Pair(x, y)) => {
                a.encode(x, out);
                b.encode(y, out);
            }
            (Type::Map(_, t), Value::Map(entries)) => {
                let opt = Type::Opt(t.clone());
                for e in entries {
                    opt.encode(e, out);
                }
            }
            (t, v) => panic!("cannot encode {} value as {t:?}", v.kind()),
        }
    }

    pub fn decode(&self, buf: &[u8], pos: &mut usize) -> Value {
        match self {
            Type::Bool => {
                let b = buf[*pos] != 0;
                *pos += 1;
                Value::Bool(b)
            }
            Type::Nat(_) => Value::Nat(get_varint(buf, pos) as u32),
            Type::Set(_) => Value::Set(NatSet::from_bits(get_varint(buf, pos))),
            Type::Stack(t) => {
                let len = get_varint(buf, pos) as usize;
                Value::Stack((0..len).map(|_| t.decode(buf, pos)).collect())
            }
            Type::Opt(t) => {
                let tag = buf[*pos];
                *pos += 1;
                if tag == 0 {
                    Value::none()
                } else {
                    Value::some(t.decode(buf, pos))
                }
            }
            Type::Pair(a, b) => {
                let x = a.decode(buf, pos);
                Value::pair(x, b.decode(buf, pos))
            }
            Type::Map(n, t) => {
                let opt = Type::Opt(t.clone());
                Value::Map((0..*n).map(|_| opt.decode(buf, pos)).collect())
            }
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Bool => f.write_str("bool"),
            Type::Nat(n) => write!(f, "nat[{n}]"),
            Type::Set(n) => write!(f, "set[{n}]"),
            Type::Stack(t) => write!(f, "stack<{t}>"),
            Type::Opt(t) => write!(f, "option<{t}>"),
            Type::Pair(a, b) => write!(f, "pair<{a}, {b}>"),
            Type::Map(n, t) => write!(f, "map[{n}]<{t}>"),
        }
    }
}

fn put_varint(out: &mut Vec<u8>, mut n: u64) {
    loop {
        let byte = (n & 0x7f) as u8;
        n >>= 7;
        if n == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

fn get_varint(buf: &[u8], pos: &mut usize) -> u64 {
    let mut n = 0u64;
    let mut shift = 0;
    loop {
        let byte = buf[*pos];
        *pos += 1;
        n |= ((byte & 0x7f) as u64) << shift;
        if byte & 0x80 == 0 {
            return n;
        }
        shift += 7;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn natset_ops() {
        let a: NatSet = [0, 1, 5].into_iter().collect();
        assert_eq!(a.difference(NatSet::singleton(1)), [0, 5].into_iter().collect());
        assert_eq!(a.union(NatSet::singleton(1)), a);
        assert_eq!(a.upper(), 6);
        assert_eq!(NatSet::empty().upper(), 0);
        assert_eq!(a.to_string(), "{0, 1, 5}");
    }

    #[test]
    fn domain_sizes_match_enumeration() {
        let types = [
            Type::Bool,
            Type::Nat(4),
            Type::Set(3),
            Type::stack(Type::Nat(3)),
            Type::opt(Type::Nat(2)),
            Type::map(2, Type::Bool),
            Type::map(2, Type::pair(Type::Bool, Type::stack(Type::Nat(2)))),
        ];
        for t in types {
            let size = t.domain_size(Some(2)).unwrap();
            let all = t.enumerate(2);
            assert_eq!(size, all.len() as u128, "{t}");
            assert!(all.iter().all(|v| t.admits(v)), "{t}");
            let distinct: std::collections::HashSet<_> = all.iter().collect();
            assert_eq!(distinct.len(), all.len(), "{t}");
        }
    }

    #[test]
    fn stack_needs_bound() {
        assert_eq!(Type::stack(Type::Bool).domain_size(None), None);
        assert_eq!(Type::Set(3).domain_size(None), Some(8));
    }

    fn arb_ctx_value() -> impl Strategy<Value = Value> {
        let entry = prop_oneof![
            Just(Value::none()),
            (any::<bool>(), proptest::collection::vec(0u32..6, 0..4))
                .prop_map(|(b, st)| Value::some(Value::pair(Value::Bool(b), Value::nat_stack(&st)))),
        ];
        proptest::collection::vec(entry, 6).prop_map(Value::Map)
    }

    proptest! {
        #[test]
        fn encoding_roundtrips(v in arb_ctx_value()) {
            let t = Type::map(6, Type::pair(Type::Bool, Type::stack(Type::Nat(6))));
            prop_assert!(t.admits(&v));
            let mut buf = Vec::new();
            t.encode(&v, &mut buf);
            let mut pos = 0;
            prop_assert_eq!(t.decode(&buf, &mut pos), v);
            prop_assert_eq!(pos, buf.len());
        }
    }
}
