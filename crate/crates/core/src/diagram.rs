//! Combinatorial string diagrams: boxes with ordered typed ports, directed
//! wires, anchored boundary orderings, and typed circles. Only connectivity
//! is stored, so deformation invariance holds by construction.
//!
//! Expressions convert to diagrams and back: a repeated label becomes a wire
//! between two box ports, a free label becomes a boundary wire, a `δ_a^b`
//! with free labels a bare boundary-to-boundary wire, and a `δ_a^a` a
//! circle.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{EinsteinExpression, Factor, TensorSymbol};
use crate::label::{Label, LabelSupply, Polarity, TypeName};
use crate::normal::{delta_reduce, equivalent};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DiagramError {
    #[error("endpoint {0:?} references a box or port that does not exist")]
    InvalidEndpoint(Endpoint),
    #[error("wire runs in the wrong direction: {from:?} -> {to:?}")]
    WrongDirection { from: Endpoint, to: Endpoint },
    #[error("wire endpoints have different types: {from_ty} at {from:?}, {to_ty} at {to:?}")]
    WireTypeMismatch {
        from: Endpoint,
        from_ty: TypeName,
        to: Endpoint,
        to_ty: TypeName,
    },
    #[error("{0:?} is attached to {1} wires; every port needs exactly one")]
    PortArityViolation(Endpoint, usize),
    #[error("boundary ordering does not enumerate the free labels: {0}")]
    BoundaryMismatch(String),
    #[error("duplicate box id {0} in diagram JSON")]
    DuplicateBoxId(u64),
    #[error("wire references unknown box id {0}")]
    UnknownBoxId(u64),
    #[error("circle count for type {0} must be positive")]
    EmptyCircleEntry(TypeName),
    #[error("malformed diagram JSON: {0}")]
    Json(String),
}

/// A box: a symbol occurrence with ordered, typed ports.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct DiagBox {
    pub name: String,
    pub ins: Vec<TypeName>,
    pub outs: Vec<TypeName>,
}

/// One end of a wire. Box ids and port/boundary positions are 0-based.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum Endpoint {
    BoxIn { box_id: usize, port: usize },
    BoxOut { box_id: usize, port: usize },
    BoundaryIn(usize),
    BoundaryOut(usize),
}

impl Endpoint {
    fn is_source(&self) -> bool {
        matches!(self, Endpoint::BoxOut { .. } | Endpoint::BoundaryIn(_))
    }

    fn is_target(&self) -> bool {
        matches!(self, Endpoint::BoxIn { .. } | Endpoint::BoundaryOut(_))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Wire {
    pub from: Endpoint,
    pub to: Endpoint,
}

/// An anchored combinatorial string diagram.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Diagram {
    boxes: Vec<DiagBox>,
    wires: Vec<Wire>,
    inputs: Vec<TypeName>,
    outputs: Vec<TypeName>,
    circles: BTreeMap<TypeName, usize>,
}

impl Diagram {
    pub fn new(
        boxes: Vec<DiagBox>,
        mut wires: Vec<Wire>,
        inputs: Vec<TypeName>,
        outputs: Vec<TypeName>,
        circles: BTreeMap<TypeName, usize>,
    ) -> Result<Self, DiagramError> {
        for (ty, count) in &circles {
            if *count == 0 {
                return Err(DiagramError::EmptyCircleEntry(ty.clone()));
            }
        }
        wires.sort();
        let d = Diagram {
            boxes,
            wires,
            inputs,
            outputs,
            circles,
        };
        d.validate()?;
        Ok(d)
    }

    fn endpoint_type(&self, e: &Endpoint) -> Result<TypeName, DiagramError> {
        let ty = match *e {
            Endpoint::BoxIn { box_id, port } => self
                .boxes
                .get(box_id)
                .and_then(|b| b.ins.get(port))
                .cloned(),
            Endpoint::BoxOut { box_id, port } => self
                .boxes
                .get(box_id)
                .and_then(|b| b.outs.get(port))
                .cloned(),
            Endpoint::BoundaryIn(pos) => self.inputs.get(pos).cloned(),
            Endpoint::BoundaryOut(pos) => self.outputs.get(pos).cloned(),
        };
        ty.ok_or(DiagramError::InvalidEndpoint(*e))
    }

    fn validate(&self) -> Result<(), DiagramError> {
        let mut usage: BTreeMap<Endpoint, usize> = BTreeMap::new();
        for w in &self.wires {
            if !w.from.is_source() || !w.to.is_target() {
                return Err(DiagramError::WrongDirection {
                    from: w.from,
                    to: w.to,
                });
            }
            let from_ty = self.endpoint_type(&w.from)?;
            let to_ty = self.endpoint_type(&w.to)?;
            if from_ty != to_ty {
                return Err(DiagramError::WireTypeMismatch {
                    from: w.from,
                    from_ty,
                    to: w.to,
                    to_ty,
                });
            }
            *usage.entry(w.from).or_insert(0) += 1;
            *usage.entry(w.to).or_insert(0) += 1;
        }
        let mut expect = Vec::new();
        for (id, b) in self.boxes.iter().enumerate() {
            for port in 0..b.ins.len() {
                expect.push(Endpoint::BoxIn { box_id: id, port });
            }
            for port in 0..b.outs.len() {
                expect.push(Endpoint::BoxOut { box_id: id, port });
            }
        }
        for pos in 0..self.inputs.len() {
            expect.push(Endpoint::BoundaryIn(pos));
        }
        for pos in 0..self.outputs.len() {
            expect.push(Endpoint::BoundaryOut(pos));
        }
        for e in &expect {
            match usage.get(e).copied().unwrap_or(0) {
                1 => {}
                n => return Err(DiagramError::PortArityViolation(*e, n)),
            }
        }
        Ok(())
    }

    pub fn boxes(&self) -> &[DiagBox] {
        &self.boxes
    }

    pub fn wires(&self) -> &[Wire] {
        &self.wires
    }

    pub fn inputs(&self) -> &[TypeName] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[TypeName] {
        &self.outputs
    }

    pub fn circles(&self) -> &BTreeMap<TypeName, usize> {
        &self.circles
    }
}

/// Converts an expression to a diagram, anchoring the boundaries by the
/// derived ordering on free labels (canonical labels by position, named
/// labels by text).
pub fn to_diagram(expr: &EinsteinExpression) -> Diagram {
    let reduced = delta_reduce(expr);
    let (lower_order, upper_order) = reduced.free_labels().boundary_orders();
    build_diagram(&reduced, &lower_order, &upper_order)
        .expect("derived boundary orders enumerate the free labels")
}

/// Converts with explicit boundary orderings, which must enumerate the free
/// labels of the reduced expression exactly.
pub fn to_diagram_with_boundaries(
    expr: &EinsteinExpression,
    lower_order: &[Label],
    upper_order: &[Label],
) -> Result<Diagram, DiagramError> {
    let reduced = delta_reduce(expr);
    let free = reduced.free_labels();
    let ok = lower_order.len() == free.lower.len()
        && upper_order.len() == free.upper.len()
        && lower_order.iter().all(|l| free.lower.contains(l))
        && upper_order.iter().all(|l| free.upper.contains(l));
    if !ok {
        return Err(DiagramError::BoundaryMismatch(format!(
            "expected lower {:?} and upper {:?}",
            free.lower, free.upper
        )));
    }
    build_diagram(&reduced, lower_order, upper_order)
}

fn build_diagram(
    reduced: &EinsteinExpression,
    lower_order: &[Label],
    upper_order: &[Label],
) -> Result<Diagram, DiagramError> {
    let mut boxes = Vec::new();
    let mut wires = Vec::new();
    let mut circles: BTreeMap<TypeName, usize> = BTreeMap::new();
    let in_pos: BTreeMap<&Label, usize> = lower_order.iter().zip(0..).collect();
    let out_pos: BTreeMap<&Label, usize> = upper_order.iter().zip(0..).collect();

    // sites of every label among the symbol factors
    let mut lower_site: BTreeMap<&Label, Endpoint> = BTreeMap::new();
    let mut upper_site: BTreeMap<&Label, Endpoint> = BTreeMap::new();
    for f in reduced.factors() {
        let Factor::Symbol(s) = f else { continue };
        let box_id = boxes.len();
        boxes.push(DiagBox {
            name: s.name().to_string(),
            ins: s.lower_types(),
            outs: s.upper_types(),
        });
        for (port, l) in s.lower().iter().enumerate() {
            lower_site.insert(l, Endpoint::BoxIn { box_id, port });
        }
        for (port, l) in s.upper().iter().enumerate() {
            upper_site.insert(l, Endpoint::BoxOut { box_id, port });
        }
    }
    for f in reduced.factors() {
        if let Factor::Delta { lower, upper } = f {
            if lower == upper {
                *circles.entry(lower.ty().clone()).or_insert(0) += 1;
            } else {
                wires.push(Wire {
                    from: Endpoint::BoundaryIn(in_pos[lower]),
                    to: Endpoint::BoundaryOut(out_pos[upper]),
                });
            }
        }
    }
    for (l, site) in &lower_site {
        let from = match upper_site.get(l) {
            Some(up) => *up,
            None => Endpoint::BoundaryIn(in_pos[l]),
        };
        wires.push(Wire { from, to: *site });
    }
    for (l, site) in &upper_site {
        if !lower_site.contains_key(l) {
            wires.push(Wire {
                from: *site,
                to: Endpoint::BoundaryOut(out_pos[l]),
            });
        }
    }
    let inputs = lower_order.iter().map(|l| l.ty().clone()).collect();
    let outputs = upper_order.iter().map(|l| l.ty().clone()).collect();
    Diagram::new(boxes, wires, inputs, outputs, circles)
}

/// Reads a diagram back as an expression. Boundary wires receive canonical
/// labels determined by their boundary positions (so the anchoring survives
/// the round trip); wires between boxes and circles receive fresh labels
/// from `supply`.
pub fn from_diagram(d: &Diagram, supply: &mut LabelSupply) -> EinsteinExpression {
    let mut port_label: BTreeMap<Endpoint, Label> = BTreeMap::new();
    let mut bare_wires = Vec::new();
    for w in &d.wires {
        match (w.from, w.to) {
            (Endpoint::BoundaryIn(j), Endpoint::BoundaryOut(k)) => {
                bare_wires.push(Factor::Delta {
                    lower: Label::canonical(d.inputs[j].clone(), j as u32 + 1, Polarity::Input),
                    upper: Label::canonical(d.outputs[k].clone(), k as u32 + 1, Polarity::Output),
                });
            }
            (Endpoint::BoundaryIn(j), to) => {
                let l = Label::canonical(d.inputs[j].clone(), j as u32 + 1, Polarity::Input);
                port_label.insert(to, l);
            }
            (from, Endpoint::BoundaryOut(k)) => {
                let l = Label::canonical(d.outputs[k].clone(), k as u32 + 1, Polarity::Output);
                port_label.insert(from, l);
            }
            (from, to) => {
                let ty = d.endpoint_type(&from).expect("validated diagram");
                let l = supply.fresh(&ty);
                port_label.insert(from, l.clone());
                port_label.insert(to, l);
            }
        }
    }
    let mut factors = Vec::new();
    for (box_id, b) in d.boxes.iter().enumerate() {
        let lower = (0..b.ins.len())
            .map(|port| port_label[&Endpoint::BoxIn { box_id, port }].clone())
            .collect();
        let upper = (0..b.outs.len())
            .map(|port| port_label[&Endpoint::BoxOut { box_id, port }].clone())
            .collect();
        factors.push(Factor::Symbol(
            TensorSymbol::new(b.name.clone(), lower, upper)
                .expect("wire labels are distinct per box side"),
        ));
    }
    factors.extend(bare_wires);
    for (ty, count) in &d.circles {
        for _ in 0..*count {
            let l = supply.fresh(ty);
            factors.push(Factor::Delta {
                lower: l.clone(),
                upper: l,
            });
        }
    }
    EinsteinExpression::new(factors).expect("diagram wiring respects the label discipline")
}

/// Diagram isomorphism: a box bijection preserving names, port order,
/// wiring, boundary anchoring, and circles. Decided through the same
/// canonicalization engine as expression equivalence.
pub fn iso(d1: &Diagram, d2: &Diagram) -> bool {
    let mut s1 = LabelSupply::new();
    let mut s2 = LabelSupply::new();
    equivalent(&from_diagram(d1, &mut s1), &from_diagram(d2, &mut s2))
}

/// Deterministic DOT rendering: boxes as record nodes with ordered ports,
/// boundaries as rank-constrained points, circles as self-looped nodes.
pub fn to_dot(d: &Diagram) -> String {
    let mut out = String::from("digraph diagram {\n");
    let _ = writeln!(out, "  rankdir=LR;");
    if !d.inputs.is_empty() {
        let _ = write!(out, "  {{ rank=source;");
        for (pos, ty) in d.inputs.iter().enumerate() {
            let _ = write!(out, " in{} [shape=point, xlabel=\"{}\"];", pos, ty);
        }
        let _ = writeln!(out, " }}");
    }
    if !d.outputs.is_empty() {
        let _ = write!(out, "  {{ rank=sink;");
        for (pos, ty) in d.outputs.iter().enumerate() {
            let _ = write!(out, " out{} [shape=point, xlabel=\"{}\"];", pos, ty);
        }
        let _ = writeln!(out, " }}");
    }
    for (id, b) in d.boxes.iter().enumerate() {
        let ins = b
            .ins
            .iter()
            .enumerate()
            .map(|(p, ty)| format!("<i{}>{}", p, ty))
            .collect::<Vec<_>>()
            .join("|");
        let outs = b
            .outs
            .iter()
            .enumerate()
            .map(|(p, ty)| format!("<o{}>{}", p, ty))
            .collect::<Vec<_>>()
            .join("|");
        let _ = writeln!(
            out,
            "  b{} [shape=record, label=\"{{{{{}}}|{}|{{{}}}}}\"];",
            id, ins, b.name, outs
        );
    }
    let mut circle_id = 0;
    for (ty, count) in &d.circles {
        for _ in 0..*count {
            let _ = writeln!(out, "  c{} [shape=circle, label=\"{}\"];", circle_id, ty);
            let _ = writeln!(out, "  c{0} -> c{0};", circle_id);
            circle_id += 1;
        }
    }
    for w in &d.wires {
        let side = |e: &Endpoint| match *e {
            Endpoint::BoxIn { box_id, port } => format!("b{}:i{}", box_id, port),
            Endpoint::BoxOut { box_id, port } => format!("b{}:o{}", box_id, port),
            Endpoint::BoundaryIn(pos) => format!("in{}", pos),
            Endpoint::BoundaryOut(pos) => format!("out{}", pos),
        };
        let _ = writeln!(out, "  {} -> {};", side(&w.from), side(&w.to));
    }
    out.push_str("}\n");
    out
}

// -- JSON schema ------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct RawDiagram {
    types: Vec<String>,
    boxes: Vec<RawBox>,
    wires: Vec<RawWire>,
    inputs: Vec<String>,
    outputs: Vec<String>,
    circles: BTreeMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct RawBox {
    id: u64,
    name: String,
    ins: Vec<String>,
    outs: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RawWire {
    from: RawEndpoint,
    to: RawEndpoint,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawEndpoint {
    Box {
        #[serde(rename = "box")]
        box_id: u64,
        port: usize,
        side: String,
    },
    Boundary {
        boundary: String,
        pos: usize,
    },
}

/// Emits the diagram in the documented JSON schema. Emission is
/// deterministic and stable under re-emission.
pub fn diagram_json(d: &Diagram) -> String {
    let mut types: Vec<String> = d
        .boxes
        .iter()
        .flat_map(|b| b.ins.iter().chain(b.outs.iter()))
        .chain(d.inputs.iter())
        .chain(d.outputs.iter())
        .chain(d.circles.keys())
        .map(|t| t.to_string())
        .collect();
    types.sort();
    types.dedup();
    let conv = |e: &Endpoint| match *e {
        Endpoint::BoxIn { box_id, port } => RawEndpoint::Box {
            box_id: box_id as u64,
            port,
            side: "in".into(),
        },
        Endpoint::BoxOut { box_id, port } => RawEndpoint::Box {
            box_id: box_id as u64,
            port,
            side: "out".into(),
        },
        Endpoint::BoundaryIn(pos) => RawEndpoint::Boundary {
            boundary: "in".into(),
            pos,
        },
        Endpoint::BoundaryOut(pos) => RawEndpoint::Boundary {
            boundary: "out".into(),
            pos,
        },
    };
    let raw = RawDiagram {
        types,
        boxes: d
            .boxes
            .iter()
            .enumerate()
            .map(|(id, b)| RawBox {
                id: id as u64,
                name: b.name.clone(),
                ins: b.ins.iter().map(|t| t.to_string()).collect(),
                outs: b.outs.iter().map(|t| t.to_string()).collect(),
            })
            .collect(),
        wires: d
            .wires
            .iter()
            .map(|w| RawWire {
                from: conv(&w.from),
                to: conv(&w.to),
            })
            .collect(),
        inputs: d.inputs.iter().map(|t| t.to_string()).collect(),
        outputs: d.outputs.iter().map(|t| t.to_string()).collect(),
        circles: d
            .circles
            .iter()
            .map(|(t, c)| (t.to_string(), *c))
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("diagram serialization cannot fail") + "\n"
}

/// Parses and validates a diagram from the documented JSON schema.
pub fn parse_diagram_json(text: &str) -> Result<Diagram, DiagramError> {
    let raw: RawDiagram =
        serde_json::from_str(text).map_err(|e| DiagramError::Json(e.to_string()))?;
    let mut id_to_index = BTreeMap::new();
    for (index, b) in raw.boxes.iter().enumerate() {
        if id_to_index.insert(b.id, index).is_some() {
            return Err(DiagramError::DuplicateBoxId(b.id));
        }
    }
    let boxes: Vec<DiagBox> = raw
        .boxes
        .iter()
        .map(|b| DiagBox {
            name: b.name.clone(),
            ins: b.ins.iter().map(TypeName::new).collect(),
            outs: b.outs.iter().map(TypeName::new).collect(),
        })
        .collect();
    let conv = |e: &RawEndpoint| -> Result<Endpoint, DiagramError> {
        match e {
            RawEndpoint::Box { box_id, port, side } => {
                let index = *id_to_index
                    .get(box_id)
                    .ok_or(DiagramError::UnknownBoxId(*box_id))?;
                match side.as_str() {
                    "in" => Ok(Endpoint::BoxIn {
                        box_id: index,
                        port: *port,
                    }),
                    "out" => Ok(Endpoint::BoxOut {
                        box_id: index,
                        port: *port,
                    }),
                    other => Err(DiagramError::Json(format!("bad side {other:?}"))),
                }
            }
            RawEndpoint::Boundary { boundary, pos } => match boundary.as_str() {
                "in" => Ok(Endpoint::BoundaryIn(*pos)),
                "out" => Ok(Endpoint::BoundaryOut(*pos)),
                other => Err(DiagramError::Json(format!("bad boundary {other:?}"))),
            },
        }
    };
    let wires = raw
        .wires
        .iter()
        .map(|w| {
            Ok(Wire {
                from: conv(&w.from)?,
                to: conv(&w.to)?,
            })
        })
        .collect::<Result<Vec<_>, DiagramError>>()?;
    Diagram::new(
        boxes,
        wires,
        raw.inputs.iter().map(TypeName::new).collect(),
        raw.outputs.iter().map(TypeName::new).collect(),
        raw.circles
            .into_iter()
            .map(|(t, c)| (TypeName::new(t), c))
            .collect(),
    )
}
