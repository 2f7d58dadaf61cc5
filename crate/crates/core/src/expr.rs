//! Einstein expressions over an alphabet of tensor symbols, and the free
//! abstract-tensor-system operations on them: product, contraction,
//! relabelling, and δ-elements.
//!
//! An expression is a list of factors. The label discipline is the single
//! structural invariant: every label occurs either exactly once (free) or
//! exactly twice, once in lower and once in upper position (bound). All
//! constructors validate it; all operations preserve it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::label::{Label, LabelSupply, Relabelling, TypeName};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExprError {
    #[error("label {0} occurs {1} times; labels may occur at most twice")]
    TooManyOccurrences(Label, usize),
    #[error("label {0} occurs twice in lower position")]
    RepeatedLower(Label),
    #[error("label {0} occurs twice in upper position")]
    RepeatedUpper(Label),
    #[error("label {0} appears twice within one tensor symbol")]
    DuplicateInSymbol(Label),
    #[error("label name `{0}` is used at two different types")]
    ConflictingTypes(String),
    #[error("delta endpoints {lower} and {upper} have different types ({} vs {})", .lower.ty(), .upper.ty())]
    DeltaTypeMismatch { lower: Label, upper: Label },
    #[error("free labels shared between product operands: {}", fmt_labels(.0))]
    FreeLabelClash(Vec<Label>),
    #[error("label {0} is not a free lower label of the expression")]
    NotFreeLower(Label),
    #[error("label {0} is not a free upper label of the expression")]
    NotFreeUpper(Label),
    #[error("cannot contract {lower} with {upper}: types differ ({} vs {})", .lower.ty(), .upper.ty())]
    ContractionTypeMismatch { lower: Label, upper: Label },
    #[error("relabelling domain contains {0}, which is not free in the expression")]
    RelabelNotFree(Label),
    #[error("relabelling codomain collides with untouched free label {0}")]
    CodomainCollision(Label),
    #[error(transparent)]
    Relabel(#[from] crate::label::RelabelError),
    #[error("symbol `{0}` is not declared in the alphabet")]
    UndeclaredSymbol(String),
    #[error("symbol `{name}` is used at signature {found} but declared as {declared}")]
    SignatureMismatch {
        name: String,
        found: String,
        declared: String,
    },
    #[error("type `{0}` is not declared")]
    UndeclaredType(TypeName),
    #[error("duplicate declaration of `{0}`")]
    DuplicateDeclaration(String),
}

fn fmt_labels(labels: &[Label]) -> String {
    labels
        .iter()
        .map(|l| l.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// A tensor symbol occurrence: a name plus ordered lower and upper label
/// lists. Port order is significant; permuting a label list yields a
/// different factor.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct TensorSymbol {
    name: String,
    lower: Vec<Label>,
    upper: Vec<Label>,
}

impl TensorSymbol {
    /// A label may not repeat within the lower list or within the upper
    /// list. One label on both sides of the same occurrence is allowed: it
    /// is a self-contraction, as in `ψ_a^a`.
    pub fn new(
        name: impl Into<String>,
        lower: Vec<Label>,
        upper: Vec<Label>,
    ) -> Result<Self, ExprError> {
        for list in [&lower, &upper] {
            let mut seen = BTreeSet::new();
            for l in list {
                if !seen.insert(l.clone()) {
                    return Err(ExprError::DuplicateInSymbol(l.clone()));
                }
            }
        }
        Ok(TensorSymbol {
            name: name.into(),
            lower,
            upper,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lower(&self) -> &[Label] {
        &self.lower
    }

    pub fn upper(&self) -> &[Label] {
        &self.upper
    }

    pub fn lower_types(&self) -> Vec<TypeName> {
        self.lower.iter().map(|l| l.ty().clone()).collect()
    }

    pub fn upper_types(&self) -> Vec<TypeName> {
        self.upper.iter().map(|l| l.ty().clone()).collect()
    }

    fn map_labels(&self, f: impl Fn(&Label) -> Label) -> TensorSymbol {
        TensorSymbol {
            name: self.name.clone(),
            lower: self.lower.iter().map(&f).collect(),
            upper: self.upper.iter().map(&f).collect(),
        }
    }
}

/// One entry in an expression's factor list.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Factor {
    Symbol(TensorSymbol),
    Delta { lower: Label, upper: Label },
}

impl Factor {
    pub fn lower_labels(&self) -> &[Label] {
        match self {
            Factor::Symbol(s) => &s.lower,
            Factor::Delta { lower, .. } => std::slice::from_ref(lower),
        }
    }

    pub fn upper_labels(&self) -> &[Label] {
        match self {
            Factor::Symbol(s) => &s.upper,
            Factor::Delta { upper, .. } => std::slice::from_ref(upper),
        }
    }

    fn map_labels(&self, f: impl Fn(&Label) -> Label) -> Factor {
        match self {
            Factor::Symbol(s) => Factor::Symbol(s.map_labels(f)),
            Factor::Delta { lower, upper } => Factor::Delta {
                lower: f(lower),
                upper: f(upper),
            },
        }
    }
}

/// The free labels of an expression, split by the position they occur in.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct FreeLabels {
    pub lower: BTreeSet<Label>,
    pub upper: BTreeSet<Label>,
}

impl FreeLabels {
    pub fn all(&self) -> impl Iterator<Item = &Label> {
        self.lower.iter().chain(self.upper.iter())
    }

    pub fn contains(&self, l: &Label) -> bool {
        self.lower.contains(l) || self.upper.contains(l)
    }

    pub fn is_disjoint(&self, other: &FreeLabels) -> bool {
        self.all().all(|l| !other.contains(l))
    }

    /// Boundary orderings derived from the free-label sets: canonical labels
    /// by position, named labels by text. This is the anchoring used when no
    /// explicit ordering is supplied.
    pub fn boundary_orders(&self) -> (Vec<Label>, Vec<Label>) {
        let sort = |set: &BTreeSet<Label>| {
            let mut v: Vec<Label> = set.iter().cloned().collect();
            v.sort_by_key(|l| l.boundary_key());
            v
        };
        (sort(&self.lower), sort(&self.upper))
    }
}

/// A list of tensor symbols and δ-elements subject to the label discipline.
/// Immutable; operations return new expressions.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct EinsteinExpression {
    factors: Vec<Factor>,
}

impl EinsteinExpression {
    /// The empty expression (the tensor `1`).
    pub fn empty() -> Self {
        EinsteinExpression::default()
    }

    pub fn new(factors: Vec<Factor>) -> Result<Self, ExprError> {
        validate_factors(&factors)?;
        Ok(EinsteinExpression { factors })
    }

    /// A single δ-element `δ_a^b`; `δ_a^a` is a circle.
    pub fn delta(lower: Label, upper: Label) -> Result<Self, ExprError> {
        if lower.ty() != upper.ty() {
            return Err(ExprError::DeltaTypeMismatch { lower, upper });
        }
        Ok(EinsteinExpression {
            factors: vec![Factor::Delta { lower, upper }],
        })
    }

    /// A single-symbol expression.
    pub fn symbol(sym: TensorSymbol) -> Self {
        EinsteinExpression {
            factors: vec![Factor::Symbol(sym)],
        }
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn symbols(&self) -> impl Iterator<Item = &TensorSymbol> {
        self.factors.iter().filter_map(|f| match f {
            Factor::Symbol(s) => Some(s),
            Factor::Delta { .. } => None,
        })
    }

    /// Every label occurrence, with its position.
    fn occurrences(&self) -> impl Iterator<Item = (&Label, Position)> {
        self.factors.iter().flat_map(|f| {
            f.lower_labels()
                .iter()
                .map(|l| (l, Position::Lower))
                .chain(f.upper_labels().iter().map(|l| (l, Position::Upper)))
        })
    }

    pub fn all_labels(&self) -> BTreeSet<Label> {
        self.occurrences().map(|(l, _)| l.clone()).collect()
    }

    /// The non-repeated labels, split by position.
    pub fn free_labels(&self) -> FreeLabels {
        let mut counts: BTreeMap<&Label, (usize, usize)> = BTreeMap::new();
        for (l, pos) in self.occurrences() {
            let entry = counts.entry(l).or_default();
            match pos {
                Position::Lower => entry.0 += 1,
                Position::Upper => entry.1 += 1,
            }
        }
        let mut free = FreeLabels::default();
        for (l, (lo, up)) in counts {
            match (lo, up) {
                (1, 0) => {
                    free.lower.insert(l.clone());
                }
                (0, 1) => {
                    free.upper.insert(l.clone());
                }
                _ => {}
            }
        }
        free
    }

    /// Labels occurring twice (once lower, once upper).
    pub fn bound_labels(&self) -> BTreeSet<Label> {
        let free = self.free_labels();
        self.all_labels()
            .into_iter()
            .filter(|l| !free.contains(l))
            .collect()
    }

    /// Tensor product: concatenation of factor lists. Free labels must be
    /// disjoint; bound labels clashing across the operands are α-renamed
    /// using `supply` before concatenating.
    pub fn product(
        &self,
        other: &EinsteinExpression,
        supply: &mut LabelSupply,
    ) -> Result<EinsteinExpression, ExprError> {
        let free_l = self.free_labels();
        let free_r = other.free_labels();
        let clash: Vec<Label> = free_l
            .all()
            .filter(|l| free_r.contains(l))
            .cloned()
            .collect();
        if !clash.is_empty() {
            return Err(ExprError::FreeLabelClash(clash));
        }
        for l in self.all_labels().iter().chain(other.all_labels().iter()) {
            supply.observe(l);
        }
        // clashes are detected by name: two labels spelled alike conflict
        // even if their types differ
        let right_names: BTreeSet<String> =
            other.all_labels().iter().map(|l| l.to_string()).collect();
        let left = rename_bound(self, |l| right_names.contains(&l.to_string()), supply);
        let left_names: BTreeSet<String> =
            left.all_labels().iter().map(|l| l.to_string()).collect();
        let right = rename_bound(other, |l| left_names.contains(&l.to_string()), supply);
        let mut factors = left.factors;
        factors.extend(right.factors);
        EinsteinExpression::new(factors)
    }

    /// Contraction `𝒦_a^b`: renames the upper occurrence of `b` to `a`,
    /// making `a` a bound label.
    pub fn contract(&self, a: &Label, b: &Label) -> Result<EinsteinExpression, ExprError> {
        let free = self.free_labels();
        if !free.lower.contains(a) {
            return Err(ExprError::NotFreeLower(a.clone()));
        }
        if !free.upper.contains(b) {
            return Err(ExprError::NotFreeUpper(b.clone()));
        }
        if a.ty() != b.ty() {
            return Err(ExprError::ContractionTypeMismatch {
                lower: a.clone(),
                upper: b.clone(),
            });
        }
        let factors = self
            .factors
            .iter()
            .map(|f| match f {
                Factor::Symbol(s) => Factor::Symbol(TensorSymbol {
                    name: s.name.clone(),
                    lower: s.lower.clone(),
                    upper: s
                        .upper
                        .iter()
                        .map(|l| if l == b { a.clone() } else { l.clone() })
                        .collect(),
                }),
                Factor::Delta { lower, upper } => Factor::Delta {
                    lower: lower.clone(),
                    upper: if upper == b { a.clone() } else { upper.clone() },
                },
            })
            .collect();
        EinsteinExpression::new(factors)
    }

    /// Relabelling in the free-ATS sense: `f` renames free labels; bound
    /// labels are α-renamed to fresh ones whenever they collide with the
    /// codomain of `f`.
    pub fn relabel(
        &self,
        f: &Relabelling,
        supply: &mut LabelSupply,
    ) -> Result<EinsteinExpression, ExprError> {
        let free = self.free_labels();
        for l in f.domain() {
            if !free.contains(l) {
                return Err(ExprError::RelabelNotFree(l.clone()));
            }
        }
        let codomain: BTreeSet<Label> = f.codomain().cloned().collect();
        for l in free.all() {
            if f.get(l).is_none() && codomain.contains(l) {
                return Err(ExprError::CodomainCollision(l.clone()));
            }
        }
        for l in self.all_labels().iter().chain(codomain.iter()) {
            supply.observe(l);
        }
        let codomain_names: BTreeSet<String> = codomain.iter().map(|l| l.to_string()).collect();
        let renamed = rename_bound(self, |l| codomain_names.contains(&l.to_string()), supply);
        let factors = renamed
            .factors
            .iter()
            .map(|fac| fac.map_labels(|l| f.apply(l)))
            .collect();
        EinsteinExpression::new(factors)
    }

    /// Appends factor lists without any renaming. The caller guarantees the
    /// result respects the label discipline (shared labels become bound).
    pub(crate) fn juxtapose(
        &self,
        other: &EinsteinExpression,
    ) -> Result<EinsteinExpression, ExprError> {
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        EinsteinExpression::new(factors)
    }

    /// Checks every symbol occurrence against the alphabet's declarations.
    pub fn check_alphabet(&self, alphabet: &Alphabet) -> Result<(), ExprError> {
        for sym in self.symbols() {
            alphabet.check_symbol(sym)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Position {
    Lower,
    Upper,
}

fn validate_factors(factors: &[Factor]) -> Result<(), ExprError> {
    let mut counts: BTreeMap<&Label, (usize, usize)> = BTreeMap::new();
    let mut by_text: BTreeMap<String, &Label> = BTreeMap::new();
    for f in factors {
        if let Factor::Symbol(s) = f {
            for list in [&s.lower, &s.upper] {
                let mut seen = BTreeSet::new();
                for l in list {
                    if !seen.insert(l) {
                        return Err(ExprError::DuplicateInSymbol(l.clone()));
                    }
                }
            }
        }
        if let Factor::Delta { lower, upper } = f {
            if lower.ty() != upper.ty() {
                return Err(ExprError::DeltaTypeMismatch {
                    lower: lower.clone(),
                    upper: upper.clone(),
                });
            }
        }
        for l in f.lower_labels() {
            counts.entry(l).or_default().0 += 1;
        }
        for l in f.upper_labels() {
            counts.entry(l).or_default().1 += 1;
        }
    }
    for (l, (lo, up)) in &counts {
        match (lo, up) {
            (0, 1) | (1, 0) | (1, 1) => {}
            (2, 0) => return Err(ExprError::RepeatedLower((*l).clone())),
            (0, 2) => return Err(ExprError::RepeatedUpper((*l).clone())),
            _ => return Err(ExprError::TooManyOccurrences((*l).clone(), lo + up)),
        }
        if let Some(prev) = by_text.insert(l.to_string(), l) {
            if prev != *l {
                return Err(ExprError::ConflictingTypes(l.to_string()));
            }
        }
    }
    Ok(())
}

/// α-renames every bound label satisfying `needs_rename` to a fresh label.
fn rename_bound(
    expr: &EinsteinExpression,
    needs_rename: impl Fn(&Label) -> bool,
    supply: &mut LabelSupply,
) -> EinsteinExpression {
    let mut renames: BTreeMap<Label, Label> = BTreeMap::new();
    for b in expr.bound_labels() {
        if needs_rename(&b) {
            let fresh = supply.fresh(b.ty());
            renames.insert(b, fresh);
        }
    }
    if renames.is_empty() {
        return expr.clone();
    }
    let factors = expr
        .factors
        .iter()
        .map(|f| f.map_labels(|l| renames.get(l).cloned().unwrap_or_else(|| l.clone())))
        .collect();
    EinsteinExpression { factors }
}

/// A declared generator: name plus input and output type lists.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Declaration {
    pub name: String,
    pub inputs: Vec<TypeName>,
    pub outputs: Vec<TypeName>,
}

impl fmt::Display for Declaration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ins: Vec<String> = self.inputs.iter().map(|t| t.to_string()).collect();
        let outs: Vec<String> = self.outputs.iter().map(|t| t.to_string()).collect();
        write!(f, "{} : {} -> {}", self.name, ins.join(","), outs.join(","))
    }
}

/// The universe of types together with the declared tensor symbols. Under
/// canonical labelling this is exactly a monoidal signature.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Alphabet {
    types: BTreeSet<TypeName>,
    declarations: BTreeMap<String, Declaration>,
}

impl Alphabet {
    pub fn new() -> Self {
        Alphabet::default()
    }

    pub fn declare_type(&mut self, ty: TypeName) -> Result<(), ExprError> {
        if !self.types.insert(ty.clone()) {
            return Err(ExprError::DuplicateDeclaration(ty.to_string()));
        }
        Ok(())
    }

    pub fn declare_symbol(&mut self, decl: Declaration) -> Result<(), ExprError> {
        for t in decl.inputs.iter().chain(decl.outputs.iter()) {
            if !self.types.contains(t) {
                return Err(ExprError::UndeclaredType(t.clone()));
            }
        }
        if self.declarations.contains_key(&decl.name) {
            return Err(ExprError::DuplicateDeclaration(decl.name));
        }
        self.declarations.insert(decl.name.clone(), decl);
        Ok(())
    }

    pub fn has_type(&self, ty: &TypeName) -> bool {
        self.types.contains(ty)
    }

    pub fn types(&self) -> impl Iterator<Item = &TypeName> {
        self.types.iter()
    }

    pub fn declaration(&self, name: &str) -> Option<&Declaration> {
        self.declarations.get(name)
    }

    pub fn declarations(&self) -> impl Iterator<Item = &Declaration> {
        self.declarations.values()
    }

    pub fn check_symbol(&self, sym: &TensorSymbol) -> Result<(), ExprError> {
        let decl = self
            .declarations
            .get(sym.name())
            .ok_or_else(|| ExprError::UndeclaredSymbol(sym.name().to_string()))?;
        if sym.lower_types() != decl.inputs || sym.upper_types() != decl.outputs {
            let found = Declaration {
                name: sym.name().to_string(),
                inputs: sym.lower_types(),
                outputs: sym.upper_types(),
            };
            return Err(ExprError::SignatureMismatch {
                name: sym.name().to_string(),
                found: found.to_string(),
                declared: decl.to_string(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::Polarity;

    fn ty(s: &str) -> TypeName {
        TypeName::new(s)
    }

    fn l(name: &str, t: &str) -> Label {
        Label::named(name, ty(t))
    }

    fn sym(name: &str, lower: &[Label], upper: &[Label]) -> Factor {
        Factor::Symbol(TensorSymbol::new(name, lower.to_vec(), upper.to_vec()).unwrap())
    }

    /// `ψ_{a,b}^c φ_d^{b,e}`, the running two-box example.
    fn two_boxes() -> EinsteinExpression {
        EinsteinExpression::new(vec![
            sym("psi", &[l("a", "A"), l("b", "B")], &[l("c", "C")]),
            sym("phi", &[l("d", "D")], &[l("b", "B"), l("e", "E")]),
        ])
        .unwrap()
    }

    #[test]
    fn free_labels_of_two_boxes() {
        let free = two_boxes().free_labels();
        assert_eq!(
            free.lower,
            [l("a", "A"), l("d", "D")].into_iter().collect()
        );
        assert_eq!(
            free.upper,
            [l("c", "C"), l("e", "E")].into_iter().collect()
        );
        assert_eq!(
            two_boxes().bound_labels(),
            [l("b", "B")].into_iter().collect()
        );
    }

    #[test]
    fn free_labels_of_empty_and_circle() {
        assert_eq!(EinsteinExpression::empty().free_labels(), FreeLabels::default());
        let circle = EinsteinExpression::delta(l("a", "A"), l("a", "A")).unwrap();
        assert_eq!(circle.free_labels(), FreeLabels::default());
    }

    #[test]
    fn discipline_rejects_repeats_and_triples() {
        let s = TensorSymbol::new("psi", vec![l("a", "A"), l("a", "A")], vec![]);
        assert_eq!(s, Err(ExprError::DuplicateInSymbol(l("a", "A"))));

        // one lower plus one upper on the same occurrence is a legal
        // self-contraction
        assert!(TensorSymbol::new("psi", vec![l("a", "A")], vec![l("a", "A")]).is_ok());

        let e = EinsteinExpression::new(vec![
            sym("psi", &[l("a", "A")], &[]),
            sym("phi", &[l("a", "A")], &[]),
        ]);
        assert_eq!(e, Err(ExprError::RepeatedLower(l("a", "A"))));

        let e = EinsteinExpression::new(vec![
            sym("psi", &[l("a", "A")], &[l("b", "A")]),
            sym("phi", &[l("b", "A")], &[l("a", "A")]),
            sym("xi", &[], &[l("a", "A")]),
        ]);
        assert!(matches!(e, Err(ExprError::TooManyOccurrences(_, 3))));
    }

    #[test]
    fn discipline_rejects_one_name_two_types() {
        let e = EinsteinExpression::new(vec![
            sym("psi", &[l("a", "A")], &[]),
            sym("phi", &[], &[l("a", "B")]),
        ]);
        assert_eq!(e, Err(ExprError::ConflictingTypes("a".to_string())));
    }

    #[test]
    fn product_concatenates_disjoint_operands() {
        let mut s = LabelSupply::new();
        let e1 = EinsteinExpression::new(vec![sym("psi", &[l("a", "A")], &[l("b", "A")])]).unwrap();
        let e2 = EinsteinExpression::new(vec![sym("phi", &[l("c", "A")], &[l("d", "A")])]).unwrap();
        let p = e1.product(&e2, &mut s).unwrap();
        assert_eq!(p.factors().len(), 2);
        assert_eq!(p.factors()[0], e1.factors()[0]);
        assert_eq!(p.factors()[1], e2.factors()[0]);
    }

    #[test]
    fn product_with_empty_is_identity() {
        let mut s = LabelSupply::new();
        let e = two_boxes();
        assert_eq!(e.product(&EinsteinExpression::empty(), &mut s).unwrap(), e);
        assert_eq!(EinsteinExpression::empty().product(&e, &mut s).unwrap(), e);
    }

    #[test]
    fn product_renames_clashing_bound_labels() {
        let mut s = LabelSupply::new();
        // b is bound on the left and bound on the right; they must not merge
        let e1 = EinsteinExpression::new(vec![
            sym("psi", &[l("a", "A")], &[l("b", "A")]),
            sym("phi", &[l("b", "A")], &[l("c", "A")]),
        ])
        .unwrap();
        let e2 = EinsteinExpression::new(vec![
            sym("xi", &[l("d", "A")], &[l("b", "A")]),
            sym("om", &[l("b", "A")], &[l("e", "A")]),
        ])
        .unwrap();
        let p = e1.product(&e2, &mut s).unwrap();
        let free = p.free_labels();
        assert_eq!(free.lower.len(), 2);
        assert_eq!(free.upper.len(), 2);
        assert_eq!(p.bound_labels().len(), 2);
    }

    #[test]
    fn product_rejects_free_clash() {
        let mut s = LabelSupply::new();
        let e1 = EinsteinExpression::new(vec![sym("psi", &[l("a", "A")], &[])]).unwrap();
        let e2 = EinsteinExpression::new(vec![sym("phi", &[], &[l("a", "A")])]).unwrap();
        assert_eq!(
            e1.product(&e2, &mut s),
            Err(ExprError::FreeLabelClash(vec![l("a", "A")]))
        );
    }

    #[test]
    fn contract_makes_label_bound() {
        let e = EinsteinExpression::new(vec![sym("psi", &[l("a", "A")], &[l("b", "A")])]).unwrap();
        let c = e.contract(&l("a", "A"), &l("b", "A")).unwrap();
        assert_eq!(c.bound_labels(), [l("a", "A")].into_iter().collect());
        assert!(c.free_labels().all().next().is_none());
    }

    #[test]
    fn contract_delta_yields_circle() {
        let e = EinsteinExpression::delta(l("a", "A"), l("b", "A")).unwrap();
        let c = e.contract(&l("a", "A"), &l("b", "A")).unwrap();
        assert_eq!(
            c.factors(),
            &[Factor::Delta {
                lower: l("a", "A"),
                upper: l("a", "A")
            }]
        );
    }

    #[test]
    fn contract_requires_free_positions_and_types() {
        let e = two_boxes();
        assert_eq!(
            e.contract(&l("b", "B"), &l("c", "C")),
            Err(ExprError::NotFreeLower(l("b", "B")))
        );
        assert_eq!(
            e.contract(&l("a", "A"), &l("c", "C")),
            Err(ExprError::ContractionTypeMismatch {
                lower: l("a", "A"),
                upper: l("c", "C")
            })
        );
    }

    #[test]
    fn relabel_renames_free_labels() {
        let mut s = LabelSupply::new();
        let e = EinsteinExpression::new(vec![sym("psi", &[l("a", "A")], &[l("b", "A")])]).unwrap();
        let f = Relabelling::new([(l("a", "A"), l("c", "A"))]).unwrap();
        let r = e.relabel(&f, &mut s).unwrap();
        assert_eq!(
            r.factors(),
            &[sym("psi", &[l("c", "A")], &[l("b", "A")])]
        );
    }

    #[test]
    fn relabel_delta_is_l4() {
        let mut s = LabelSupply::new();
        let e = EinsteinExpression::delta(l("a", "A"), l("b", "A")).unwrap();
        let f = Relabelling::new([
            (l("a", "A"), l("a2", "A")),
            (l("b", "A"), l("b2", "A")),
        ])
        .unwrap();
        let r = e.relabel(&f, &mut s).unwrap();
        assert_eq!(
            r,
            EinsteinExpression::delta(l("a2", "A"), l("b2", "A")).unwrap()
        );
    }

    #[test]
    fn relabel_freshens_bound_labels_hit_by_codomain() {
        let mut s = LabelSupply::new();
        // ψ_a^x φ_x^c with a ↦ x forces the bound x aside
        let e = EinsteinExpression::new(vec![
            sym("psi", &[l("a", "A")], &[l("x", "A")]),
            sym("phi", &[l("x", "A")], &[l("c", "A")]),
        ])
        .unwrap();
        let f = Relabelling::new([(l("a", "A"), l("x", "A"))]).unwrap();
        let r = e.relabel(&f, &mut s).unwrap();
        let free = r.free_labels();
        assert!(free.lower.contains(&l("x", "A")));
        assert!(free.upper.contains(&l("c", "A")));
        let bound = r.bound_labels();
        assert_eq!(bound.len(), 1);
        assert!(bound.iter().next().unwrap().is_reserved());
    }

    #[test]
    fn relabel_rejects_codomain_collision_with_untouched_free() {
        let mut s = LabelSupply::new();
        let e = EinsteinExpression::new(vec![sym("psi", &[l("a", "A")], &[l("b", "A")])]).unwrap();
        // b stays free, so a ↦ b must be rejected
        let f = Relabelling::new([(l("a", "A"), l("b", "A"))]).unwrap();
        assert_eq!(
            e.relabel(&f, &mut s),
            Err(ExprError::CodomainCollision(l("b", "A")))
        );
    }

    #[test]
    fn alphabet_checks_signatures() {
        let mut alpha = Alphabet::new();
        alpha.declare_type(ty("A")).unwrap();
        alpha.declare_type(ty("B")).unwrap();
        alpha
            .declare_symbol(Declaration {
                name: "psi".into(),
                inputs: vec![ty("A")],
                outputs: vec![ty("B")],
            })
            .unwrap();
        let good = EinsteinExpression::new(vec![sym("psi", &[l("a", "A")], &[l("b", "B")])]).unwrap();
        assert!(good.check_alphabet(&alpha).is_ok());
        let bad = EinsteinExpression::new(vec![sym("psi", &[l("a", "B")], &[l("b", "B")])]).unwrap();
        assert!(matches!(
            bad.check_alphabet(&alpha),
            Err(ExprError::SignatureMismatch { .. })
        ));
        let undeclared =
            EinsteinExpression::new(vec![sym("chi", &[], &[l("b", "B")])]).unwrap();
        assert_eq!(
            undeclared.check_alphabet(&alpha),
            Err(ExprError::UndeclaredSymbol("chi".into()))
        );
    }

    #[test]
    fn canonical_labels_participate_in_expressions() {
        let x0 = Label::canonical(ty("A"), 1, Polarity::Input);
        let x1 = Label::canonical(ty("A"), 1, Polarity::Output);
        let e = EinsteinExpression::delta(x0.clone(), x1.clone()).unwrap();
        let free = e.free_labels();
        assert!(free.lower.contains(&x0));
        assert!(free.upper.contains(&x1));
    }
}
