//! A symbolic engine for typed abstract tensor systems.
//!
//! The crate manipulates *Einstein expressions* — lists of tensor symbols
//! and δ-elements in which a repeated label marks a contraction — and
//! provides, on top of them:
//!
//! - the free abstract-tensor-system operations (product, contraction,
//!   relabelling) in [`expr`];
//! - δ-elimination, canonical forms, and a decision procedure for
//!   expression equivalence in [`normal`];
//! - combinatorial string diagrams with expression conversion both ways,
//!   isomorphism testing, and DOT/JSON export in [`diagram`];
//! - the induced strict traced symmetric monoidal category, whose morphisms
//!   are canonically labelled equivalence classes, in [`category`];
//! - exact-rational numeric evaluation under a valuation of the signature
//!   in [`valuation`];
//! - the text grammar (declarations, expressions, bindings) in [`syntax`];
//! - seedable random generators for expressions and morphisms in [`random`],
//!   used heavily by the property-based test suites.

pub mod canon;
pub mod category;
pub mod diagram;
pub mod expr;
pub mod label;
pub mod normal;
pub mod random;
pub mod syntax;
pub mod valuation;

pub use expr::{Alphabet, Declaration, EinsteinExpression, ExprError, Factor, TensorSymbol};
pub use label::{Label, LabelSupply, Polarity, Relabelling, TypeName};
pub use normal::{canonical, delta_reduce, equivalent, oracle_equivalent, FreeTensor};
