//! Typed labels, the canonical-label subset, relabellings, and the fresh-label
//! supply.
//!
//! Labels name the inputs and outputs of tensors. A label is either *named*
//! (user-facing, identified by its text) or *canonical* (a `(type, position,
//! polarity)` triple used to give morphisms ordered boundaries). Both kinds
//! carry their type; the typing function is total by construction.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// A type in the universe. Nonempty identifier text; uniqueness is enforced
/// where universes are declared (see [`crate::expr::Alphabet`]).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct TypeName(String);

impl TypeName {
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        assert!(!name.is_empty(), "type names must be nonempty");
        TypeName(name)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TypeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TypeName {
    fn from(s: &str) -> Self {
        TypeName::new(s)
    }
}

/// Which side of a boundary a canonical label addresses: `Input` is the
/// 0-polarity (lower index) side, `Output` the 1-polarity (upper index) side.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Polarity {
    Input = 0,
    Output = 1,
}

/// Prefix of the namespace reserved for generated labels. The text grammar
/// cannot lex a backslash, so no parsed label ever collides with a supply-
/// or canonicalizer-generated one.
pub const RESERVED_PREFIX: &str = "\\_";

/// A typed index name.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Label {
    /// `(X, i, p)` with `τ = X`; written `x_i^(p)` in boundary positions.
    Canonical {
        ty: TypeName,
        position: u32,
        polarity: Polarity,
    },
    /// An ordinary label; `τ` is attached since named labels carry no
    /// structure of their own.
    Named { name: String, ty: TypeName },
}

impl Label {
    pub fn named(name: impl Into<String>, ty: impl Into<TypeName>) -> Self {
        Label::Named {
            name: name.into(),
            ty: ty.into(),
        }
    }

    pub fn canonical(ty: impl Into<TypeName>, position: u32, polarity: Polarity) -> Self {
        assert!(position >= 1, "canonical positions are 1-based");
        Label::Canonical {
            ty: ty.into(),
            position,
            polarity,
        }
    }

    /// The typing function τ.
    pub fn ty(&self) -> &TypeName {
        match self {
            Label::Canonical { ty, .. } | Label::Named { ty, .. } => ty,
        }
    }

    pub fn is_canonical(&self) -> bool {
        matches!(self, Label::Canonical { .. })
    }

    /// True for labels in the generated namespace (never producible by the
    /// text grammar).
    pub fn is_reserved(&self) -> bool {
        match self {
            Label::Canonical { .. } => true,
            Label::Named { name, .. } => name.starts_with(RESERVED_PREFIX),
        }
    }

    /// Sort key used when a boundary ordering is derived from a free-label
    /// set: canonical labels first, ordered by position (the §-ordering of
    /// anchored diagrams), then named labels by text.
    pub(crate) fn boundary_key(&self) -> (u8, u32, u8, String) {
        match self {
            Label::Canonical {
                ty,
                position,
                polarity,
            } => (0, *position, *polarity as u8, ty.0.clone()),
            Label::Named { name, .. } => (1, 0, 0, name.clone()),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Canonical {
                ty,
                position,
                polarity,
            } => write!(f, "@{}:{}:{}", ty, position, *polarity as u8),
            Label::Named { name, .. } => f.write_str(name),
        }
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Total order: canonical before named; canonical by `(type, position,
/// polarity)`; named by text (type as tiebreak for ill-formed inputs).
impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        use Label::*;
        match (self, other) {
            (
                Canonical {
                    ty: t1,
                    position: p1,
                    polarity: q1,
                },
                Canonical {
                    ty: t2,
                    position: p2,
                    polarity: q2,
                },
            ) => (t1, p1, q1).cmp(&(t2, p2, q2)),
            (Canonical { .. }, Named { .. }) => Ordering::Less,
            (Named { .. }, Canonical { .. }) => Ordering::Greater,
            (Named { name: n1, ty: t1 }, Named { name: n2, ty: t2 }) => {
                (n1, t1).cmp(&(n2, t2))
            }
        }
    }
}

/// Errors from constructing or applying a [`Relabelling`].
#[derive(Debug, Error, PartialEq, Eq)]
pub enum RelabelError {
    #[error("relabelling is not injective: {0} is the image of two labels")]
    NotInjective(Label),
    #[error("relabelling changes the type of {from}: {} -> {}", .from.ty(), .to.ty())]
    TypeChanging { from: Label, to: Label },
}

/// A finite, injective, type-preserving partial function on labels. Acts as
/// the identity outside its domain.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Relabelling {
    map: BTreeMap<Label, Label>,
}

impl Relabelling {
    pub fn identity() -> Self {
        Relabelling::default()
    }

    pub fn new(pairs: impl IntoIterator<Item = (Label, Label)>) -> Result<Self, RelabelError> {
        let mut map = BTreeMap::new();
        for (from, to) in pairs {
            if from.ty() != to.ty() {
                return Err(RelabelError::TypeChanging { from, to });
            }
            if let Some(prev) = map.insert(from.clone(), to.clone()) {
                if prev != to {
                    return Err(RelabelError::NotInjective(to));
                }
            }
        }
        let mut images = BTreeMap::new();
        for (from, to) in &map {
            if images.insert(to.clone(), from.clone()).is_some() {
                return Err(RelabelError::NotInjective(to.clone()));
            }
        }
        Ok(Relabelling { map })
    }

    pub fn apply(&self, label: &Label) -> Label {
        self.map.get(label).cloned().unwrap_or_else(|| label.clone())
    }

    pub fn get(&self, label: &Label) -> Option<&Label> {
        self.map.get(label)
    }

    pub fn domain(&self) -> impl Iterator<Item = &Label> {
        self.map.keys()
    }

    pub fn codomain(&self) -> impl Iterator<Item = &Label> {
        self.map.values()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// The composite `g ∘ self` restricted to `carrier`: each carrier label
    /// is sent through `self`, then through `g`. A carrier is required
    /// because the unrestricted composite of two injections need not be
    /// injective.
    pub fn then_on<'a>(
        &self,
        g: &Relabelling,
        carrier: impl IntoIterator<Item = &'a Label>,
    ) -> Result<Relabelling, RelabelError> {
        Relabelling::new(
            carrier
                .into_iter()
                .map(|l| (l.clone(), g.apply(&self.apply(l)))),
        )
    }
}

impl FromIterator<(Label, Label)> for Relabelling {
    /// Panics on ill-formed pairs; use [`Relabelling::new`] for fallible
    /// construction.
    fn from_iter<T: IntoIterator<Item = (Label, Label)>>(iter: T) -> Self {
        Relabelling::new(iter).expect("ill-formed relabelling")
    }
}

/// Deterministic per-type fresh-label source. Emits names of the form
/// `\_A1, \_A2, …` inside the reserved namespace; seed it against every
/// expression whose labels must be avoided.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct LabelSupply {
    next: BTreeMap<TypeName, u64>,
}

impl LabelSupply {
    pub fn new() -> Self {
        LabelSupply::default()
    }

    /// Bump the counter for `label`'s type past `label`, if it is one of
    /// ours. Harmless on foreign labels.
    pub fn observe(&mut self, label: &Label) {
        if let Label::Named { name, ty } = label {
            let pat = format!("{}{}", RESERVED_PREFIX, ty);
            if let Some(rest) = name.strip_prefix(&pat) {
                if let Ok(n) = rest.parse::<u64>() {
                    let entry = self.next.entry(ty.clone()).or_insert(0);
                    *entry = (*entry).max(n);
                }
            }
        }
    }

    pub fn fresh(&mut self, ty: &TypeName) -> Label {
        let entry = self.next.entry(ty.clone()).or_insert(0);
        *entry += 1;
        Label::named(format!("{}{}{}", RESERVED_PREFIX, ty, entry), ty.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a() -> TypeName {
        TypeName::new("A")
    }

    #[test]
    fn label_order_canonical_before_named() {
        let c = Label::canonical(a(), 1, Polarity::Input);
        let n = Label::named("a", a());
        assert!(c < n);
    }

    #[test]
    fn canonical_order_is_type_position_polarity() {
        let c1 = Label::canonical(a(), 1, Polarity::Input);
        let c2 = Label::canonical(a(), 1, Polarity::Output);
        let c3 = Label::canonical(a(), 2, Polarity::Input);
        let c4 = Label::canonical(TypeName::new("B"), 1, Polarity::Input);
        assert!(c1 < c2 && c2 < c3 && c3 < c4);
    }

    #[test]
    fn supply_emits_monotone_per_type_counters() {
        let mut s = LabelSupply::new();
        let l1 = s.fresh(&a());
        let l2 = s.fresh(&a());
        let l3 = s.fresh(&TypeName::new("B"));
        assert_eq!(l1, Label::named("\\_A1", a()));
        assert_eq!(l2, Label::named("\\_A2", a()));
        assert_eq!(l3, Label::named("\\_B1", TypeName::new("B")));
    }

    #[test]
    fn supply_seeding_skips_observed_labels() {
        let mut s = LabelSupply::new();
        s.observe(&Label::named("\\_A7", a()));
        assert_eq!(s.fresh(&a()), Label::named("\\_A8", a()));
    }

    #[test]
    fn relabelling_rejects_type_changes_and_collisions() {
        let f = Relabelling::new([(Label::named("a", a()), Label::named("b", "B"))]);
        assert!(matches!(f, Err(RelabelError::TypeChanging { .. })));
        let g = Relabelling::new([
            (Label::named("a", a()), Label::named("c", a())),
            (Label::named("b", a()), Label::named("c", a())),
        ]);
        assert_eq!(g, Err(RelabelError::NotInjective(Label::named("c", a()))));
    }

    #[test]
    fn composition_agrees_with_sequential_application() {
        let x = Label::named("x", a());
        let y = Label::named("y", a());
        let z = Label::named("z", a());
        let f = Relabelling::new([(x.clone(), y.clone())]).unwrap();
        let g = Relabelling::new([(y.clone(), z.clone())]).unwrap();
        let gf = f.then_on(&g, [&x]).unwrap();
        assert_eq!(gf.apply(&x), z);
        // outside the carrier the composite is the identity
        assert_eq!(gf.apply(&y), y);
    }
}
