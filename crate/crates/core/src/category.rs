//! The strict traced symmetric monoidal category induced by the free
//! abstract tensor system: objects are type lists, morphisms are
//! equivalence classes of expressions whose free labels are pinned to
//! canonical boundary positions.
//!
//! Composition renames the interface labels of both bodies to shared fresh
//! labels and contracts them; the monoidal product shifts the right
//! operand's canonical positions; the trace contracts a trailing block
//! pairwise. Morphism equality is expression equivalence of bodies, so
//! every categorical law here is decided by the normal-form engine.

use std::fmt;

use thiserror::Error;

use crate::expr::{EinsteinExpression, ExprError, Factor, TensorSymbol};
use crate::label::{Label, LabelSupply, Polarity, Relabelling, TypeName};
use crate::normal::{canonical, FreeTensor};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CategoryError {
    #[error("cannot compose: inner objects differ ({inner_cod} vs {inner_dom})")]
    ObjectMismatch {
        inner_cod: ObjectList,
        inner_dom: ObjectList,
    },
    #[error("trace object {x} is not a common suffix of {dom} -> {cod}")]
    NotASuffix {
        x: ObjectList,
        dom: ObjectList,
        cod: ObjectList,
    },
    #[error("morphism body boundary mismatch: {0}")]
    BodyBoundary(String),
    #[error("label {0} is not among the morphism's {1} labels")]
    LabelNotFound(Label, &'static str),
    #[error("cannot contract {input} with {output}: types differ ({} vs {})", .input.ty(), .output.ty())]
    ContractionTypeMismatch { input: Label, output: Label },
    #[error("labelling is ill-formed: {0}")]
    BadLabelling(String),
    #[error("label {0} is used by more than one part")]
    LabelCollision(Label),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// An object of the category: a finite list of types. The monoidal product
/// is concatenation and the unit is the empty list.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct ObjectList(Vec<TypeName>);

impl ObjectList {
    pub fn unit() -> Self {
        ObjectList::default()
    }

    pub fn new(types: Vec<TypeName>) -> Self {
        ObjectList(types)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn types(&self) -> &[TypeName] {
        &self.0
    }

    pub fn concat(&self, other: &ObjectList) -> ObjectList {
        let mut types = self.0.clone();
        types.extend(other.0.iter().cloned());
        ObjectList(types)
    }

    pub fn ends_with(&self, suffix: &ObjectList) -> bool {
        self.0.ends_with(&suffix.0)
    }

    /// The canonical labels of this object at the given polarity, positions
    /// starting after `offset`.
    pub fn canonical_labels(&self, polarity: Polarity, offset: u32) -> Vec<Label> {
        self.0
            .iter()
            .enumerate()
            .map(|(i, ty)| Label::canonical(ty.clone(), offset + i as u32 + 1, polarity))
            .collect()
    }
}

impl fmt::Display for ObjectList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("I");
        }
        let parts: Vec<String> = self.0.iter().map(|t| t.to_string()).collect();
        f.write_str(&parts.join("⊗"))
    }
}

impl From<Vec<TypeName>> for ObjectList {
    fn from(types: Vec<TypeName>) -> Self {
        ObjectList(types)
    }
}

/// A morphism of the free traced SMC: a canonical tensor whose free lower
/// labels are exactly the canonical labels of `dom` and free upper labels
/// those of `cod`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Morphism {
    dom: ObjectList,
    cod: ObjectList,
    body: FreeTensor,
}

impl Morphism {
    /// Wraps an expression as a morphism, checking the boundary discipline
    /// and canonicalizing the body.
    pub fn new(
        dom: ObjectList,
        cod: ObjectList,
        body: EinsteinExpression,
    ) -> Result<Self, CategoryError> {
        let free = body.free_labels();
        let want_lower = dom.canonical_labels(Polarity::Input, 0);
        let want_upper = cod.canonical_labels(Polarity::Output, 0);
        let lower_ok = free.lower.len() == want_lower.len()
            && want_lower.iter().all(|l| free.lower.contains(l));
        let upper_ok = free.upper.len() == want_upper.len()
            && want_upper.iter().all(|l| free.upper.contains(l));
        if !lower_ok || !upper_ok {
            return Err(CategoryError::BodyBoundary(format!(
                "free labels {:?} -> {:?} do not match {} -> {}",
                free.lower, free.upper, dom, cod
            )));
        }
        Ok(Morphism {
            dom,
            cod,
            body: canonical(&body),
        })
    }

    /// The generator `ψ_{x⃗^(0)}^{y⃗^(1)}` for a declared symbol: the η
    /// embedding of a signature morphism.
    pub fn generator(
        name: impl Into<String>,
        dom: ObjectList,
        cod: ObjectList,
    ) -> Result<Self, CategoryError> {
        let sym = TensorSymbol::new(
            name,
            dom.canonical_labels(Polarity::Input, 0),
            cod.canonical_labels(Polarity::Output, 0),
        )
        .map_err(CategoryError::Expr)?;
        Morphism::new(dom, cod, EinsteinExpression::symbol(sym))
    }

    pub fn dom(&self) -> &ObjectList {
        &self.dom
    }

    pub fn cod(&self) -> &ObjectList {
        &self.cod
    }

    pub fn body(&self) -> &FreeTensor {
        &self.body
    }

    /// `id_X⃗ = δ_{x⃗^(0)}^{x⃗^(1)}`: one bare wire per type.
    pub fn identity(x: &ObjectList) -> Morphism {
        let factors = x
            .types()
            .iter()
            .enumerate()
            .map(|(i, ty)| Factor::Delta {
                lower: Label::canonical(ty.clone(), i as u32 + 1, Polarity::Input),
                upper: Label::canonical(ty.clone(), i as u32 + 1, Polarity::Output),
            })
            .collect();
        let body = EinsteinExpression::new(factors).expect("identity wires are disjoint");
        Morphism::new(x.clone(), x.clone(), body).expect("identity boundaries line up")
    }

    /// `σ_{X⃗,Y⃗} : X⃗⊗Y⃗ → Y⃗⊗X⃗`, the block crossing.
    pub fn symmetry(x: &ObjectList, y: &ObjectList) -> Morphism {
        let m = x.len() as u32;
        let n = y.len() as u32;
        let mut factors = Vec::new();
        for (i, ty) in x.types().iter().enumerate() {
            factors.push(Factor::Delta {
                lower: Label::canonical(ty.clone(), i as u32 + 1, Polarity::Input),
                upper: Label::canonical(ty.clone(), n + i as u32 + 1, Polarity::Output),
            });
        }
        for (j, ty) in y.types().iter().enumerate() {
            factors.push(Factor::Delta {
                lower: Label::canonical(ty.clone(), m + j as u32 + 1, Polarity::Input),
                upper: Label::canonical(ty.clone(), j as u32 + 1, Polarity::Output),
            });
        }
        let body = EinsteinExpression::new(factors).expect("crossing wires are disjoint");
        Morphism::new(x.concat(y), y.concat(x), body).expect("crossing boundaries line up")
    }

    /// `self ∘ f`: feed `f`'s outputs into `self`'s inputs by renaming both
    /// interfaces to shared fresh labels and contracting.
    pub fn compose(
        &self,
        f: &Morphism,
        supply: &mut LabelSupply,
    ) -> Result<Morphism, CategoryError> {
        if f.cod != self.dom {
            return Err(CategoryError::ObjectMismatch {
                inner_cod: f.cod.clone(),
                inner_dom: self.dom.clone(),
            });
        }
        let interface = &f.cod;
        let alphas: Vec<Label> = interface.types().iter().map(|t| supply.fresh(t)).collect();
        let betas: Vec<Label> = interface.types().iter().map(|t| supply.fresh(t)).collect();
        let f_map = Relabelling::new(
            interface
                .canonical_labels(Polarity::Output, 0)
                .into_iter()
                .zip(alphas.iter().cloned()),
        )
        .map_err(ExprError::from)?;
        let g_map = Relabelling::new(
            interface
                .canonical_labels(Polarity::Input, 0)
                .into_iter()
                .zip(betas.iter().cloned()),
        )
        .map_err(ExprError::from)?;
        let fe = f.body.to_expression().relabel(&f_map, supply)?;
        let ge = self.body.to_expression().relabel(&g_map, supply)?;
        let mut e = fe.product(&ge, supply)?;
        for (beta, alpha) in betas.iter().zip(alphas.iter()) {
            e = e.contract(beta, alpha)?;
        }
        Morphism::new(f.dom.clone(), self.cod.clone(), e)
    }

    /// `self ⊗ g`: shift `g`'s canonical positions past `self`'s and take
    /// the product.
    pub fn tensor(&self, g: &Morphism, supply: &mut LabelSupply) -> Morphism {
        let m = self.dom.len() as u32;
        let n = self.cod.len() as u32;
        let shift = Relabelling::new(
            g.dom
                .canonical_labels(Polarity::Input, 0)
                .into_iter()
                .zip(g.dom.canonical_labels(Polarity::Input, m))
                .chain(
                    g.cod
                        .canonical_labels(Polarity::Output, 0)
                        .into_iter()
                        .zip(g.cod.canonical_labels(Polarity::Output, n)),
                ),
        )
        .expect("position shift is injective and type-preserving");
        let ge = g
            .body
            .to_expression()
            .relabel(&shift, supply)
            .expect("shifted labels are fresh for the body");
        let e = self
            .body
            .to_expression()
            .product(&ge, supply)
            .expect("shifted operands have disjoint free labels");
        Morphism::new(self.dom.concat(&g.dom), self.cod.concat(&g.cod), e)
            .expect("concatenated boundaries line up")
    }

    /// `Tr^X⃗(self)`: contract the trailing `X⃗` block of inputs against the
    /// trailing `X⃗` block of outputs.
    pub fn trace(&self, x: &ObjectList) -> Result<Morphism, CategoryError> {
        if !self.dom.ends_with(x) || !self.cod.ends_with(x) {
            return Err(CategoryError::NotASuffix {
                x: x.clone(),
                dom: self.dom.clone(),
                cod: self.cod.clone(),
            });
        }
        let m = (self.dom.len() - x.len()) as u32;
        let n = (self.cod.len() - x.len()) as u32;
        let mut e = self.body.to_expression();
        for (k, ty) in x.types().iter().enumerate() {
            let a = Label::canonical(ty.clone(), m + k as u32 + 1, Polarity::Input);
            let b = Label::canonical(ty.clone(), n + k as u32 + 1, Polarity::Output);
            e = e.contract(&a, &b)?;
        }
        let u = ObjectList(self.dom.types()[..m as usize].to_vec());
        let v = ObjectList(self.cod.types()[..n as usize].to_vec());
        Morphism::new(u, v, e)
    }
}

/// The unique block symmetry moving position `p` (0-based) to the end,
/// built as a composite of adjacent transpositions.
fn sigma_to_end(
    obj: &ObjectList,
    p: usize,
    supply: &mut LabelSupply,
) -> Result<Morphism, CategoryError> {
    let mut cur = obj.types().to_vec();
    let mut result = Morphism::identity(obj);
    for k in p..obj.len().saturating_sub(1) {
        let step = adjacent_swap(&cur, k, supply);
        result = step.compose(&result, supply)?;
        cur.swap(k, k + 1);
    }
    Ok(result)
}

/// The inverse: moves the final position back to `p`.
fn sigma_from_end(
    obj: &ObjectList,
    p: usize,
    supply: &mut LabelSupply,
) -> Result<Morphism, CategoryError> {
    let mut moved = obj.types().to_vec();
    let item = moved.remove(p);
    moved.push(item);
    let mut cur = moved.clone();
    let mut result = Morphism::identity(&ObjectList(moved));
    for k in (p..obj.len().saturating_sub(1)).rev() {
        let step = adjacent_swap(&cur, k, supply);
        result = step.compose(&result, supply)?;
        cur.swap(k, k + 1);
    }
    debug_assert_eq!(cur, obj.types());
    Ok(result)
}

/// `id ⊗ σ_{X_k,X_{k+1}} ⊗ id` at position `k` of `types`.
fn adjacent_swap(types: &[TypeName], k: usize, supply: &mut LabelSupply) -> Morphism {
    let prefix = ObjectList(types[..k].to_vec());
    let a = ObjectList(vec![types[k].clone()]);
    let b = ObjectList(vec![types[k + 1].clone()]);
    let suffix = ObjectList(types[k + 2..].to_vec());
    Morphism::identity(&prefix)
        .tensor(&Morphism::symmetry(&a, &b), supply)
        .tensor(&Morphism::identity(&suffix), supply)
}

/// A morphism whose boundary positions carry names, so contractions can be
/// addressed by label instead of position.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LabelledMorphism {
    base: Morphism,
    in_labels: Vec<Label>,
    out_labels: Vec<Label>,
}

impl LabelledMorphism {
    /// `in_labels`/`out_labels` must name every position (matching types),
    /// be pairwise distinct, and stay out of the generated namespace.
    pub fn new(
        base: Morphism,
        in_labels: Vec<Label>,
        out_labels: Vec<Label>,
    ) -> Result<Self, CategoryError> {
        if in_labels.len() != base.dom().len() || out_labels.len() != base.cod().len() {
            return Err(CategoryError::BadLabelling(format!(
                "label list lengths {}/{} do not match {} -> {}",
                in_labels.len(),
                out_labels.len(),
                base.dom(),
                base.cod()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (l, ty) in in_labels
            .iter()
            .zip(base.dom().types())
            .chain(out_labels.iter().zip(base.cod().types()))
        {
            if l.is_reserved() {
                return Err(CategoryError::BadLabelling(format!(
                    "label {l} lies in the generated namespace"
                )));
            }
            if l.ty() != ty {
                return Err(CategoryError::BadLabelling(format!(
                    "label {l} has type {} but names a {} position",
                    l.ty(),
                    ty
                )));
            }
            if !seen.insert(l.clone()) {
                return Err(CategoryError::LabelCollision(l.clone()));
            }
        }
        Ok(LabelledMorphism {
            base,
            in_labels,
            out_labels,
        })
    }

    pub fn base(&self) -> &Morphism {
        &self.base
    }

    pub fn in_labels(&self) -> &[Label] {
        &self.in_labels
    }

    pub fn out_labels(&self) -> &[Label] {
        &self.out_labels
    }

    pub fn tensor(
        &self,
        other: &LabelledMorphism,
        supply: &mut LabelSupply,
    ) -> Result<LabelledMorphism, CategoryError> {
        let base = self.base.tensor(&other.base, supply);
        let mut ins = self.in_labels.clone();
        ins.extend(other.in_labels.iter().cloned());
        let mut outs = self.out_labels.clone();
        outs.extend(other.out_labels.iter().cloned());
        LabelledMorphism::new(base, ins, outs)
    }

    fn positions_of(&self, i: &Label, j: &Label) -> Result<(usize, usize), CategoryError> {
        let p = self
            .in_labels
            .iter()
            .position(|l| l == i)
            .ok_or_else(|| CategoryError::LabelNotFound(i.clone(), "input"))?;
        let q = self
            .out_labels
            .iter()
            .position(|l| l == j)
            .ok_or_else(|| CategoryError::LabelNotFound(j.clone(), "output"))?;
        if i.ty() != j.ty() {
            return Err(CategoryError::ContractionTypeMismatch {
                input: i.clone(),
                output: j.clone(),
            });
        }
        Ok((p, q))
    }

    fn without(&self, p: usize, q: usize) -> (Vec<Label>, Vec<Label>) {
        let mut ins = self.in_labels.clone();
        ins.remove(p);
        let mut outs = self.out_labels.clone();
        outs.remove(q);
        (ins, outs)
    }

    /// The trace contraction `C_i^j = Tr(σ_{Y:j} ∘ f ∘ σ_{X:i}⁻¹)`: permute
    /// the named input and output to the end, then trace once.
    pub fn trace_contraction(
        &self,
        i: &Label,
        j: &Label,
        supply: &mut LabelSupply,
    ) -> Result<LabelledMorphism, CategoryError> {
        let (p, q) = self.positions_of(i, j)?;
        let sigma_x_inv = sigma_from_end(self.base.dom(), p, supply)?;
        let sigma_y = sigma_to_end(self.base.cod(), q, supply)?;
        let mid = sigma_y
            .compose(&self.base, supply)?
            .compose(&sigma_x_inv, supply)?;
        let traced = mid.trace(&ObjectList(vec![i.ty().clone()]))?;
        let (ins, outs) = self.without(p, q);
        LabelledMorphism::new(traced, ins, outs)
    }

    /// The same contraction computed on the expression side, as `𝒦_i^j` of
    /// the tensor `ψ_{i⃗}^{j⃗}`. Kept as a second, independent code path.
    pub fn expression_contraction(
        &self,
        i: &Label,
        j: &Label,
        supply: &mut LabelSupply,
    ) -> Result<LabelledMorphism, CategoryError> {
        let (p, q) = self.positions_of(i, j)?;
        let to_named = Relabelling::new(
            self.base
                .dom()
                .canonical_labels(Polarity::Input, 0)
                .into_iter()
                .zip(self.in_labels.iter().cloned())
                .chain(
                    self.base
                        .cod()
                        .canonical_labels(Polarity::Output, 0)
                        .into_iter()
                        .zip(self.out_labels.iter().cloned()),
                ),
        )
        .map_err(ExprError::from)?;
        let named = self
            .base
            .body()
            .to_expression()
            .relabel(&to_named, supply)?;
        let contracted = named.contract(i, j)?;
        let (ins, outs) = self.without(p, q);
        let dom = ObjectList(ins.iter().map(|l| l.ty().clone()).collect());
        let cod = ObjectList(outs.iter().map(|l| l.ty().clone()).collect());
        let back = Relabelling::new(
            ins.iter()
                .cloned()
                .zip(dom.canonical_labels(Polarity::Input, 0))
                .chain(
                    outs.iter()
                        .cloned()
                        .zip(cod.canonical_labels(Polarity::Output, 0)),
                ),
        )
        .map_err(ExprError::from)?;
        let repinned = contracted.relabel(&back, supply)?;
        LabelledMorphism::new(Morphism::new(dom, cod, repinned)?, ins, outs)
    }
}

/// Builds `f₁ ⊗ … ⊗ f_M`, then applies the given contractions in order: a
/// morphism in contraction normal form. The parts' label lists must be
/// pairwise disjoint; contraction order does not affect the result.
pub fn cnf(
    parts: &[LabelledMorphism],
    pairs: &[(Label, Label)],
    supply: &mut LabelSupply,
) -> Result<LabelledMorphism, CategoryError> {
    let mut seen = std::collections::BTreeSet::new();
    for part in parts {
        for l in part.in_labels().iter().chain(part.out_labels().iter()) {
            if !seen.insert(l.clone()) {
                return Err(CategoryError::LabelCollision(l.clone()));
            }
        }
    }
    let mut acc = match parts.split_first() {
        None => LabelledMorphism::new(
            Morphism::identity(&ObjectList::unit()),
            Vec::new(),
            Vec::new(),
        )?,
        Some((first, rest)) => {
            let mut acc = first.clone();
            for part in rest {
                acc = acc.tensor(part, supply)?;
            }
            acc
        }
    };
    for (i, j) in pairs {
        acc = acc.trace_contraction(i, j, supply)?;
    }
    Ok(acc)
}
