//! δ-elimination, canonical representatives of ≈-classes, and the
//! equivalence decision procedure with its brute-force oracle.
//!
//! Two expressions are ≈-equivalent when one can be obtained from the other
//! by permuting factors, renaming bound labels, and inserting or removing
//! δ-elements. [`delta_reduce`] directs the δ-moves, and [`canonical`]
//! quotients the remaining permutation and renaming freedom, so equivalence
//! becomes bit-exact equality of [`FreeTensor`] values.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use thiserror::Error;

use crate::canon::{canonical_symbols, FreeMode};
use crate::expr::{EinsteinExpression, Factor, TensorSymbol};
use crate::label::{Label, TypeName, RESERVED_PREFIX};

/// Eliminates every removable δ-factor. A δ is removable when one of its
/// labels is repeated elsewhere; what remains are tensor symbols, bare wires
/// (δ with two free labels), and circles (`δ_a^a`). The result is
/// ≈-equivalent to the input and unique up to factor permutation and bound
/// renaming.
pub fn delta_reduce(expr: &EinsteinExpression) -> EinsteinExpression {
    let mut factors: Vec<Factor> = expr.factors().to_vec();
    'scan: loop {
        for i in 0..factors.len() {
            let Factor::Delta { lower, upper } = factors[i].clone() else {
                continue;
            };
            if lower == upper {
                continue; // circle
            }
            // E δ_a^b with a repeated: remove δ, rename the upper a to b
            if let Some(j) = find_occurrence(&factors, &lower, true, i) {
                factors[j] = rename_in_factor(&factors[j], &lower, &upper, true);
                factors.remove(i);
                continue 'scan;
            }
            // E δ_a^b with b repeated: remove δ, rename the lower b to a
            if let Some(j) = find_occurrence(&factors, &upper, false, i) {
                factors[j] = rename_in_factor(&factors[j], &upper, &lower, false);
                factors.remove(i);
                continue 'scan;
            }
        }
        break;
    }
    EinsteinExpression::new(factors).expect("δ-elimination preserves the label discipline")
}

fn find_occurrence(factors: &[Factor], label: &Label, upper: bool, skip: usize) -> Option<usize> {
    factors.iter().enumerate().position(|(j, f)| {
        if j == skip {
            return false;
        }
        let list = if upper { f.upper_labels() } else { f.lower_labels() };
        list.contains(label)
    })
}

fn rename_in_factor(factor: &Factor, from: &Label, to: &Label, upper: bool) -> Factor {
    let rename = |l: &Label| if l == from { to.clone() } else { l.clone() };
    match factor {
        Factor::Symbol(s) => {
            let lower = if upper {
                s.lower().to_vec()
            } else {
                s.lower().iter().map(rename).collect()
            };
            let up = if upper {
                s.upper().iter().map(rename).collect()
            } else {
                s.upper().to_vec()
            };
            Factor::Symbol(TensorSymbol::new(s.name(), lower, up).expect("renaming one occurrence keeps lists duplicate-free"))
        }
        Factor::Delta { lower, upper: u } => {
            if upper {
                Factor::Delta {
                    lower: lower.clone(),
                    upper: rename(u),
                }
            } else {
                Factor::Delta {
                    lower: rename(lower),
                    upper: u.clone(),
                }
            }
        }
    }
}

/// The canonical representative of an ≈-equivalence class: reduced,
/// symbol-sorted, with canonically chosen bound labels. Two expressions are
/// equivalent exactly when their `FreeTensor`s are equal.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct FreeTensor {
    symbols: Vec<TensorSymbol>,
    wires: Vec<(Label, Label)>,
    circles: BTreeMap<TypeName, usize>,
    free_lower: BTreeSet<Label>,
    free_upper: BTreeSet<Label>,
}

impl FreeTensor {
    pub fn symbols(&self) -> &[TensorSymbol] {
        &self.symbols
    }

    /// Bare wires as (lower, upper) free-label pairs, sorted.
    pub fn wires(&self) -> &[(Label, Label)] {
        &self.wires
    }

    /// Circles carry only their type; stored as type counts.
    pub fn circles(&self) -> &BTreeMap<TypeName, usize> {
        &self.circles
    }

    pub fn free_lower(&self) -> &BTreeSet<Label> {
        &self.free_lower
    }

    pub fn free_upper(&self) -> &BTreeSet<Label> {
        &self.free_upper
    }

    pub fn is_scalar(&self) -> bool {
        self.free_lower.is_empty() && self.free_upper.is_empty()
    }

    /// A reduced expression representing this class. Circle labels continue
    /// the reserved `\_k` numbering after the symbol-bound labels.
    pub fn to_expression(&self) -> EinsteinExpression {
        let mut factors: Vec<Factor> = self.symbols.iter().cloned().map(Factor::Symbol).collect();
        for (lower, upper) in &self.wires {
            factors.push(Factor::Delta {
                lower: lower.clone(),
                upper: upper.clone(),
            });
        }
        let mut next = self.bound_count() + 1;
        for (ty, count) in &self.circles {
            for _ in 0..*count {
                let l = Label::named(format!("{}{}", RESERVED_PREFIX, next), ty.clone());
                next += 1;
                factors.push(Factor::Delta {
                    lower: l.clone(),
                    upper: l,
                });
            }
        }
        EinsteinExpression::new(factors).expect("canonical parts form a well-formed expression")
    }

    fn bound_count(&self) -> usize {
        let mut bound = BTreeSet::new();
        for s in &self.symbols {
            for l in s.lower().iter().chain(s.upper().iter()) {
                if l.is_reserved() {
                    bound.insert(l.clone());
                }
            }
        }
        bound.len()
    }
}

/// Splits a reduced expression into symbols, bare wires, and circles.
fn split_reduced(
    reduced: &EinsteinExpression,
) -> (Vec<TensorSymbol>, Vec<(Label, Label)>, BTreeMap<TypeName, usize>) {
    let mut symbols = Vec::new();
    let mut wires = Vec::new();
    let mut circles: BTreeMap<TypeName, usize> = BTreeMap::new();
    for f in reduced.factors() {
        match f {
            Factor::Symbol(s) => symbols.push(s.clone()),
            Factor::Delta { lower, upper } => {
                if lower == upper {
                    *circles.entry(lower.ty().clone()).or_insert(0) += 1;
                } else {
                    wires.push((lower.clone(), upper.clone()));
                }
            }
        }
    }
    wires.sort();
    (symbols, wires, circles)
}

/// Computes the canonical representative: δ-reduce, then canonically order
/// the symbols and rename the bound labels.
pub fn canonical(expr: &EinsteinExpression) -> FreeTensor {
    let reduced = delta_reduce(expr);
    let (symbols, wires, circles) = split_reduced(&reduced);
    let free = reduced.free_labels();
    let outcome = canonical_symbols(&symbols, FreeMode::Identity);
    FreeTensor {
        symbols: outcome.symbols,
        wires,
        circles,
        free_lower: free.lower,
        free_upper: free.upper,
    }
}

/// Decides ≈-equivalence. Free labels are semantic and are never renamed;
/// use [`equivalent_up_to_free_relabelling`] for the coarser comparison.
pub fn equivalent(e1: &EinsteinExpression, e2: &EinsteinExpression) -> bool {
    canonical(e1) == canonical(e2)
}

/// True when some type-preserving bijection of free labels (lower to lower,
/// upper to upper) makes the expressions equivalent.
pub fn equivalent_up_to_free_relabelling(e1: &EinsteinExpression, e2: &EinsteinExpression) -> bool {
    let part = |e: &EinsteinExpression| {
        let reduced = delta_reduce(e);
        let (symbols, wires, circles) = split_reduced(&reduced);
        let wire_types: Vec<TypeName> = wires
            .iter()
            .map(|(l, _)| l.ty().clone())
            .sorted()
            .collect();
        (
            canonical_symbols(&symbols, FreeMode::Anonymous).cert,
            wire_types,
            circles,
        )
    };
    part(e1) == part(e2)
}

/// Size limits for the exhaustive oracle.
#[derive(Clone, Copy, Debug)]
pub struct OracleBounds {
    /// Maximum reduced factor count per expression.
    pub max_factors: usize,
    /// Maximum number of bound labels per expression.
    pub max_bound_labels: usize,
}

impl Default for OracleBounds {
    fn default() -> Self {
        OracleBounds {
            max_factors: 6,
            max_bound_labels: 8,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error(
        "expression too large for the exhaustive oracle: {factors} factors, {bound_labels} bound labels (limits {max_factors}/{max_bound_labels})"
    )]
    BoundExceeded {
        factors: usize,
        bound_labels: usize,
        max_factors: usize,
        max_bound_labels: usize,
    },
}

/// Exhaustively decides ≈-equivalence of two reduced expressions by trying
/// every type-preserving bijection of bound labels and comparing factor
/// multisets. Independent of the partition-refinement path; refuses inputs
/// beyond the configured bounds instead of answering slowly or wrongly.
pub fn oracle_equivalent(
    e1: &EinsteinExpression,
    e2: &EinsteinExpression,
) -> Result<bool, OracleError> {
    oracle_equivalent_with(e1, e2, OracleBounds::default())
}

pub fn oracle_equivalent_with(
    e1: &EinsteinExpression,
    e2: &EinsteinExpression,
    bounds: OracleBounds,
) -> Result<bool, OracleError> {
    let r1 = delta_reduce(e1);
    let r2 = delta_reduce(e2);
    for r in [&r1, &r2] {
        let n_bound = r.bound_labels().len();
        if r.factors().len() > bounds.max_factors || n_bound > bounds.max_bound_labels {
            return Err(OracleError::BoundExceeded {
                factors: r.factors().len(),
                bound_labels: n_bound,
                max_factors: bounds.max_factors,
                max_bound_labels: bounds.max_bound_labels,
            });
        }
    }

    let (syms1, wires1, circles1) = split_reduced(&r1);
    let (syms2, wires2, circles2) = split_reduced(&r2);
    if circles1 != circles2 || wires1 != wires2 || syms1.len() != syms2.len() {
        return Ok(false);
    }
    if r1.free_labels() != r2.free_labels() {
        return Ok(false);
    }

    let group_by_type = |labels: BTreeSet<Label>| {
        let mut by_ty: BTreeMap<TypeName, Vec<Label>> = BTreeMap::new();
        for l in labels {
            by_ty.entry(l.ty().clone()).or_default().push(l);
        }
        by_ty
    };
    let bound1 = group_by_type(r1.bound_labels());
    let bound2 = group_by_type(r2.bound_labels());
    if bound1.keys().collect::<Vec<_>>() != bound2.keys().collect::<Vec<_>>()
        || bound1
            .values()
            .zip(bound2.values())
            .any(|(v1, v2)| v1.len() != v2.len())
    {
        return Ok(false);
    }

    let mut target1 = syms1;
    target1.sort();

    // every type-preserving bijection bound2 -> bound1, as the product of
    // per-type permutations
    let per_type: Vec<Vec<Vec<(&Label, &Label)>>> = bound2
        .iter()
        .map(|(ty, from)| {
            bound1[ty]
                .iter()
                .permutations(from.len())
                .map(|to| from.iter().zip(to).collect())
                .collect()
        })
        .collect();
    let assignments = per_type.into_iter().multi_cartesian_product();

    // the empty product yields no assignment even when there is nothing to
    // permute, so handle the no-bound-label case directly
    if bound2.is_empty() {
        let mut sorted2 = syms2;
        sorted2.sort();
        return Ok(target1 == sorted2);
    }

    for assignment in assignments {
        let map: BTreeMap<&Label, &Label> = assignment.into_iter().flatten().collect();
        let mut renamed: Vec<TensorSymbol> = syms2
            .iter()
            .map(|s| {
                let conv = |l: &Label| map.get(l).map(|m| (*m).clone()).unwrap_or_else(|| l.clone());
                TensorSymbol::new(
                    s.name(),
                    s.lower().iter().map(conv).collect(),
                    s.upper().iter().map(conv).collect(),
                )
                .expect("bound bijection preserves per-list distinctness")
            })
            .collect();
        renamed.sort();
        if renamed == target1 {
            return Ok(true);
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::LabelSupply;

    fn l(name: &str, t: &str) -> Label {
        Label::named(name, TypeName::new(t))
    }

    fn sym(name: &str, lower: &[Label], upper: &[Label]) -> Factor {
        Factor::Symbol(TensorSymbol::new(name, lower.to_vec(), upper.to_vec()).unwrap())
    }

    fn delta(a: Label, b: Label) -> Factor {
        Factor::Delta { lower: a, upper: b }
    }

    fn expr(factors: Vec<Factor>) -> EinsteinExpression {
        EinsteinExpression::new(factors).unwrap()
    }

    #[test]
    fn delta_reduce_snaps_wire_onto_box() {
        // ψ_{a,b}^d δ_d^c  →  ψ_{a,b}^c
        let e = expr(vec![
            sym("psi", &[l("a", "A"), l("b", "B")], &[l("d", "C")]),
            delta(l("d", "C"), l("c", "C")),
        ]);
        let want = expr(vec![sym("psi", &[l("a", "A"), l("b", "B")], &[l("c", "C")])]);
        assert_eq!(delta_reduce(&e), want);
    }

    #[test]
    fn delta_reduce_keeps_bare_wires_and_circles() {
        let wire = expr(vec![delta(l("a", "A"), l("b", "A"))]);
        assert_eq!(delta_reduce(&wire), wire);
        let circle = expr(vec![delta(l("a", "A"), l("a", "A"))]);
        assert_eq!(delta_reduce(&circle), circle);
    }

    #[test]
    fn delta_chain_collapses() {
        // δ_a^x δ_x^b → δ_a^b
        let e = expr(vec![
            delta(l("a", "A"), l("x", "A")),
            delta(l("x", "A"), l("b", "A")),
        ]);
        assert_eq!(delta_reduce(&e), expr(vec![delta(l("a", "A"), l("b", "A"))]));
    }

    #[test]
    fn delta_loop_collapses_to_circle() {
        // δ_a^x δ_x^a → δ_?^? with equal labels
        let e = expr(vec![
            delta(l("a", "A"), l("x", "A")),
            delta(l("x", "A"), l("a", "A")),
        ]);
        let reduced = delta_reduce(&e);
        assert_eq!(reduced.factors().len(), 1);
        let Factor::Delta { lower, upper } = &reduced.factors()[0] else {
            panic!("expected a circle");
        };
        assert_eq!(lower, upper);
    }

    #[test]
    fn canonical_equates_permutation_and_bound_rename() {
        // ψ_a^b φ_b^c ≈ φ_k^c ψ_a^k
        let e1 = expr(vec![
            sym("psi", &[l("a", "A")], &[l("b", "A")]),
            sym("phi", &[l("b", "A")], &[l("c", "A")]),
        ]);
        let e2 = expr(vec![
            sym("phi", &[l("k", "A")], &[l("c", "A")]),
            sym("psi", &[l("a", "A")], &[l("k", "A")]),
        ]);
        assert_eq!(canonical(&e1), canonical(&e2));
        assert!(equivalent(&e1, &e2));
    }

    #[test]
    fn canonical_absorbs_removable_delta() {
        // ψ_a^b δ_b^c ≈ ψ_a^c
        let e1 = expr(vec![
            sym("psi", &[l("a", "A")], &[l("b", "A")]),
            delta(l("b", "A"), l("c", "A")),
        ]);
        let e2 = expr(vec![sym("psi", &[l("a", "A")], &[l("c", "A")])]);
        assert!(equivalent(&e1, &e2));
    }

    #[test]
    fn free_labels_are_semantic() {
        let e1 = expr(vec![sym("psi", &[l("a", "A")], &[l("b", "A")])]);
        let e2 = expr(vec![sym("psi", &[l("c", "A")], &[l("b", "A")])]);
        assert!(!equivalent(&e1, &e2));
        assert!(equivalent_up_to_free_relabelling(&e1, &e2));
    }

    #[test]
    fn circles_compare_per_type() {
        let two_a = expr(vec![
            delta(l("a", "A"), l("a", "A")),
            delta(l("b", "A"), l("b", "A")),
        ]);
        let a_and_b = expr(vec![
            delta(l("a", "A"), l("a", "A")),
            delta(l("b", "B"), l("b", "B")),
        ]);
        let ft = canonical(&two_a);
        assert!(ft.symbols().is_empty());
        assert_eq!(ft.circles()[&TypeName::new("A")], 2);
        assert!(!equivalent(&two_a, &a_and_b));
    }

    #[test]
    fn closed_loop_cyclic_rename_is_equivalent() {
        // ψ_a^x φ_x^a vs φ_y^a ψ_a^y — hmm, note both share the same free
        // structure (none): the loop through ψ and φ
        let e1 = expr(vec![
            sym("psi", &[l("a", "A")], &[l("x", "A")]),
            sym("phi", &[l("x", "A")], &[l("a", "A")]),
        ]);
        let e2 = expr(vec![
            sym("phi", &[l("y", "A")], &[l("b", "A")]),
            sym("psi", &[l("b", "A")], &[l("y", "A")]),
        ]);
        assert!(equivalent(&e1, &e2));
        assert_eq!(oracle_equivalent(&e1, &e2), Ok(true));
    }

    #[test]
    fn canonical_is_idempotent() {
        let e = expr(vec![
            sym("psi", &[l("a", "A")], &[l("x", "A"), l("y", "B")]),
            sym("phi", &[l("x", "A"), l("y", "B")], &[l("c", "C")]),
            delta(l("w", "A"), l("w", "A")),
        ]);
        let ft = canonical(&e);
        assert_eq!(canonical(&ft.to_expression()), ft);
    }

    #[test]
    fn oracle_agrees_on_simple_cases() {
        let e1 = expr(vec![sym("psi", &[l("a", "A")], &[l("b", "A")])]);
        let e2 = expr(vec![sym("phi", &[l("a", "A")], &[l("b", "A")])]);
        assert_eq!(oracle_equivalent(&e1, &e1), Ok(true));
        assert_eq!(oracle_equivalent(&e1, &e2), Ok(false));
    }

    #[test]
    fn oracle_refuses_oversized_input() {
        let mut factors = Vec::new();
        for i in 0..7 {
            factors.push(sym(
                "psi",
                &[l(&format!("a{i}"), "A")],
                &[l(&format!("b{i}"), "A")],
            ));
        }
        let e = expr(factors);
        assert!(matches!(
            oracle_equivalent(&e, &e),
            Err(OracleError::BoundExceeded { .. })
        ));
    }

    #[test]
    fn to_expression_round_trips_circles() {
        let e = expr(vec![
            delta(l("a", "A"), l("a", "A")),
            sym("psi", &[l("x", "A")], &[l("x", "A")]),
        ]);
        let ft = canonical(&e);
        assert_eq!(ft.circles()[&TypeName::new("A")], 1);
        assert_eq!(canonical(&ft.to_expression()), ft);
    }

    #[test]
    fn product_embeds_both_classes() {
        let mut s = LabelSupply::new();
        let e1 = expr(vec![
            sym("psi", &[l("a", "A")], &[l("b", "A")]),
            sym("phi", &[l("b", "A")], &[l("c", "A")]),
        ]);
        let e2 = expr(vec![sym("xi", &[l("d", "A")], &[l("b", "A")])]);
        let p = e1.product(&e2, &mut s).unwrap();
        // the product contains both factor lists up to bound renaming
        assert_eq!(p.factors().len(), 3);
        assert!(equivalent(
            &expr(p.factors()[..2].to_vec()),
            &e1
        ));
        assert!(equivalent(&expr(p.factors()[2..].to_vec()), &e2));
    }
}
