//! Canonical ordering of symbol occurrences by partition refinement with
//! lexicographic backtracking.
//!
//! Bound-label matching between two expressions is graph isomorphism on the
//! connectivity graph: one node per symbol occurrence, one edge per bound
//! label. This module computes a canonical certificate for that graph, so
//! that two expressions are related by a factor permutation plus a bound
//! relabelling exactly when their certificates are equal.
//!
//! The search individualizes every member of the first non-singleton cell
//! and keeps the least certificate over all leaves, so the result does not
//! depend on the input ordering of occurrences or on bound-label names.

use std::collections::BTreeMap;

use crate::expr::TensorSymbol;
use crate::label::{Label, TypeName};

/// How free labels participate in the certificate.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) enum FreeMode {
    /// Free labels keep their identity (ordinary equivalence: free labels
    /// are semantic).
    Identity,
    /// Free labels contribute only their type, so certificates match up to
    /// a type-preserving bijection of free labels.
    Anonymous,
}

/// One port in a certificate symbol.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub(crate) enum CertPort {
    Free(Label),
    AnonFree(TypeName),
    /// Canonically numbered bound label (1-based, in traversal order).
    Bound(usize, TypeName),
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub(crate) struct CertSym {
    pub name: String,
    pub lower: Vec<CertPort>,
    pub upper: Vec<CertPort>,
}

pub(crate) struct CanonOutcome {
    /// Certificate, sorted; equality on these decides isomorphism.
    pub cert: Vec<CertSym>,
    /// The certificate materialized with real labels; bound label `k`
    /// becomes `\_k` of the appropriate type. Only built in identity mode.
    pub symbols: Vec<TensorSymbol>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
struct Site {
    node: usize,
    upper: bool,
    pos: usize,
}

/// Resolved port: either anchored at a free label or one end of an edge.
#[derive(Clone, Copy)]
enum Port {
    Free,
    Edge(usize),
}

struct Graph<'a> {
    syms: &'a [TensorSymbol],
    mode: FreeMode,
    /// Per node, lower ports then upper ports.
    ports: Vec<Vec<Port>>,
    /// Edge endpoints; `.0` is the lower site, `.1` the upper.
    edges: Vec<(Site, Site)>,
}

impl<'a> Graph<'a> {
    fn build(syms: &'a [TensorSymbol], mode: FreeMode) -> Self {
        let mut occurrences: BTreeMap<&Label, Vec<Site>> = BTreeMap::new();
        for (node, s) in syms.iter().enumerate() {
            for (pos, l) in s.lower().iter().enumerate() {
                occurrences.entry(l).or_default().push(Site {
                    node,
                    upper: false,
                    pos,
                });
            }
            for (pos, l) in s.upper().iter().enumerate() {
                occurrences.entry(l).or_default().push(Site {
                    node,
                    upper: true,
                    pos,
                });
            }
        }
        let mut edges = Vec::new();
        let mut edge_at: BTreeMap<(usize, bool, usize), usize> = BTreeMap::new();
        for sites in occurrences.values() {
            if let [s1, s2] = sites[..] {
                let (lo, up) = if s1.upper { (s2, s1) } else { (s1, s2) };
                debug_assert!(!lo.upper && up.upper, "bound label must pair lower with upper");
                let id = edges.len();
                edges.push((lo, up));
                edge_at.insert((lo.node, lo.upper, lo.pos), id);
                edge_at.insert((up.node, up.upper, up.pos), id);
            }
        }
        let ports = syms
            .iter()
            .enumerate()
            .map(|(node, s)| {
                let mut v = Vec::with_capacity(s.lower().len() + s.upper().len());
                for (pos, _) in s.lower().iter().enumerate() {
                    v.push(match edge_at.get(&(node, false, pos)) {
                        Some(&e) => Port::Edge(e),
                        None => Port::Free,
                    });
                }
                for (pos, _) in s.upper().iter().enumerate() {
                    v.push(match edge_at.get(&(node, true, pos)) {
                        Some(&e) => Port::Edge(e),
                        None => Port::Free,
                    });
                }
                v
            })
            .collect();
        Graph {
            syms,
            mode,
            ports,
            edges,
        }
    }

    fn label_at(&self, node: usize, port_index: usize) -> &Label {
        let s = &self.syms[node];
        if port_index < s.lower().len() {
            &s.lower()[port_index]
        } else {
            &s.upper()[port_index - s.lower().len()]
        }
    }

    /// The far end of edge `e` as seen from `site`.
    fn other_end(&self, e: usize, node: usize, port_index: usize) -> (usize, bool, usize) {
        let (lo, up) = self.edges[e];
        let here_upper = port_index >= self.syms[node].lower().len();
        let here_pos = if here_upper {
            port_index - self.syms[node].lower().len()
        } else {
            port_index
        };
        let here = Site {
            node,
            upper: here_upper,
            pos: here_pos,
        };
        let far = if lo == here { up } else { lo };
        (far.node, far.upper, far.pos)
    }

    /// Colour seed for one node: name plus the per-port anchor pattern.
    fn initial_key(&self, node: usize) -> Vec<String> {
        let s = &self.syms[node];
        let mut key = vec![s.name().to_string(), s.lower().len().to_string()];
        for (i, port) in self.ports[node].iter().enumerate() {
            let l = self.label_at(node, i);
            key.push(match (port, self.mode) {
                (Port::Edge(_), _) => format!("*{}", l.ty()),
                (Port::Free, FreeMode::Identity) => format!("={}", l),
                (Port::Free, FreeMode::Anonymous) => format!("~{}", l.ty()),
            });
        }
        key
    }
}

/// Ordered partition of the node set. Cell order is derived only from
/// isomorphism-invariant keys, so it is safe to branch on "the first
/// non-singleton cell".
#[derive(Clone)]
struct Partition {
    cells: Vec<Vec<usize>>,
}

impl Partition {
    fn initial(g: &Graph) -> Self {
        let mut by_key: BTreeMap<Vec<String>, Vec<usize>> = BTreeMap::new();
        for node in 0..g.syms.len() {
            by_key.entry(g.initial_key(node)).or_default().push(node);
        }
        Partition {
            cells: by_key.into_values().collect(),
        }
    }

    fn cell_of(&self, n_nodes: usize) -> Vec<usize> {
        let mut of = vec![0; n_nodes];
        for (i, cell) in self.cells.iter().enumerate() {
            for &v in cell {
                of[v] = i;
            }
        }
        of
    }

    /// Splits cells by the port signature of their members until stable.
    fn refine(&mut self, g: &Graph) {
        loop {
            let of = self.cell_of(g.syms.len());
            let mut next: Vec<Vec<usize>> = Vec::with_capacity(self.cells.len());
            let mut split = false;
            for cell in &self.cells {
                if cell.len() == 1 {
                    next.push(cell.clone());
                    continue;
                }
                let mut groups: BTreeMap<Vec<(usize, bool, usize)>, Vec<usize>> = BTreeMap::new();
                for &v in cell {
                    let sig: Vec<(usize, bool, usize)> = g.ports[v]
                        .iter()
                        .enumerate()
                        .map(|(i, port)| match port {
                            // free ports are constant within a cell (the
                            // initial key already separates them)
                            Port::Free => (usize::MAX, false, 0),
                            Port::Edge(e) => {
                                let (far_node, far_upper, far_pos) = g.other_end(*e, v, i);
                                (of[far_node], far_upper, far_pos)
                            }
                        })
                        .collect();
                    groups.entry(sig).or_default().push(v);
                }
                if groups.len() > 1 {
                    split = true;
                }
                next.extend(groups.into_values());
            }
            self.cells = next;
            if !split {
                return;
            }
        }
    }

    fn first_non_singleton(&self) -> Option<usize> {
        self.cells.iter().position(|c| c.len() > 1)
    }

    fn is_discrete(&self) -> bool {
        self.first_non_singleton().is_none()
    }
}

/// Computes the canonical certificate for a list of symbol occurrences. The
/// caller is responsible for having removed δ-factors first; only symbols
/// participate.
pub(crate) fn canonical_symbols(syms: &[TensorSymbol], mode: FreeMode) -> CanonOutcome {
    let g = Graph::build(syms, mode);
    let mut partition = Partition::initial(&g);
    let mut best: Option<Vec<CertSym>> = None;
    search(&g, &mut partition, &mut best);
    let cert = best.unwrap_or_default();
    let symbols = match mode {
        FreeMode::Identity => cert.iter().map(materialize).collect(),
        FreeMode::Anonymous => Vec::new(),
    };
    CanonOutcome { cert, symbols }
}

fn search(g: &Graph, partition: &mut Partition, best: &mut Option<Vec<CertSym>>) {
    partition.refine(g);
    match partition.first_non_singleton() {
        None => {
            let cert = leaf_certificate(g, partition);
            if best.as_ref().is_none_or(|b| cert < *b) {
                *best = Some(cert);
            }
        }
        Some(i) => {
            let cell = partition.cells[i].clone();
            for &v in &cell {
                let mut child = partition.clone();
                let rest: Vec<usize> = cell.iter().copied().filter(|&w| w != v).collect();
                child.cells.splice(i..=i, [vec![v], rest]);
                search(g, &mut child, best);
            }
        }
    }
}

fn leaf_certificate(g: &Graph, partition: &Partition) -> Vec<CertSym> {
    debug_assert!(partition.is_discrete());
    let order: Vec<usize> = partition.cells.iter().map(|c| c[0]).collect();
    let mut edge_number = vec![0usize; g.edges.len()];
    let mut next = 1;
    for &v in &order {
        for port in &g.ports[v] {
            if let Port::Edge(e) = port {
                if edge_number[*e] == 0 {
                    edge_number[*e] = next;
                    next += 1;
                }
            }
        }
    }
    let mut cert: Vec<CertSym> = order
        .iter()
        .map(|&v| {
            let s = &g.syms[v];
            let n_lower = s.lower().len();
            let port = |i: usize| {
                let l = g.label_at(v, i);
                match (&g.ports[v][i], g.mode) {
                    (Port::Edge(e), _) => CertPort::Bound(edge_number[*e], l.ty().clone()),
                    (Port::Free, FreeMode::Identity) => CertPort::Free(l.clone()),
                    (Port::Free, FreeMode::Anonymous) => CertPort::AnonFree(l.ty().clone()),
                }
            };
            CertSym {
                name: s.name().to_string(),
                lower: (0..n_lower).map(port).collect(),
                upper: (n_lower..g.ports[v].len()).map(port).collect(),
            }
        })
        .collect();
    cert.sort();
    cert
}

/// Turns a certificate symbol back into a real one; bound number `k` becomes
/// the reserved label `\_k`.
fn materialize(c: &CertSym) -> TensorSymbol {
    let conv = |p: &CertPort| match p {
        CertPort::Free(l) => l.clone(),
        CertPort::Bound(k, ty) => Label::named(format!("{}{}", crate::label::RESERVED_PREFIX, k), ty.clone()),
        CertPort::AnonFree(_) => unreachable!("anonymous certificates are never materialized"),
    };
    TensorSymbol::new(
        c.name.clone(),
        c.lower.iter().map(conv).collect(),
        c.upper.iter().map(conv).collect(),
    )
    .expect("certificate symbols satisfy the per-list distinctness invariant")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::TypeName;

    fn l(name: &str, t: &str) -> Label {
        Label::named(name, TypeName::new(t))
    }

    fn sym(name: &str, lower: &[Label], upper: &[Label]) -> TensorSymbol {
        TensorSymbol::new(name, lower.to_vec(), upper.to_vec()).unwrap()
    }

    #[test]
    fn certificate_ignores_occurrence_order_and_bound_names() {
        // ψ_a^x φ_x^c   vs   φ_k^c ψ_a^k
        let e1 = [
            sym("psi", &[l("a", "A")], &[l("x", "A")]),
            sym("phi", &[l("x", "A")], &[l("c", "A")]),
        ];
        let e2 = [
            sym("phi", &[l("k", "A")], &[l("c", "A")]),
            sym("psi", &[l("a", "A")], &[l("k", "A")]),
        ];
        let c1 = canonical_symbols(&e1, FreeMode::Identity);
        let c2 = canonical_symbols(&e2, FreeMode::Identity);
        assert_eq!(c1.cert, c2.cert);
        assert_eq!(c1.symbols, c2.symbols);
    }

    #[test]
    fn certificate_distinguishes_free_labels() {
        let e1 = [sym("psi", &[l("a", "A")], &[])];
        let e2 = [sym("psi", &[l("b", "A")], &[])];
        assert_ne!(
            canonical_symbols(&e1, FreeMode::Identity).cert,
            canonical_symbols(&e2, FreeMode::Identity).cert
        );
        assert_eq!(
            canonical_symbols(&e1, FreeMode::Anonymous).cert,
            canonical_symbols(&e2, FreeMode::Anonymous).cert
        );
    }

    #[test]
    fn cyclic_loop_canonicalizes_independently_of_entry_point() {
        // ψ_x^y ψ_y^z ψ_z^x in two rotations
        let e1 = [
            sym("psi", &[l("x", "A")], &[l("y", "A")]),
            sym("psi", &[l("y", "A")], &[l("z", "A")]),
            sym("psi", &[l("z", "A")], &[l("x", "A")]),
        ];
        let e2 = [
            sym("psi", &[l("q", "A")], &[l("r", "A")]),
            sym("psi", &[l("r", "A")], &[l("p", "A")]),
            sym("psi", &[l("p", "A")], &[l("q", "A")]),
        ];
        assert_eq!(
            canonical_symbols(&e1, FreeMode::Identity).cert,
            canonical_symbols(&e2, FreeMode::Identity).cert
        );
    }

    #[test]
    fn parallel_versus_crossed_wirings_differ() {
        // two parallel ψ→φ wires vs the crossed wiring: the crossed one
        // swaps which φ-port each ψ output lands on
        let e1 = [
            sym("psi", &[], &[l("x", "A"), l("y", "A")]),
            sym("phi", &[l("x", "A"), l("y", "A")], &[]),
        ];
        let e2 = [
            sym("psi", &[], &[l("x", "A"), l("y", "A")]),
            sym("phi", &[l("y", "A"), l("x", "A")], &[]),
        ];
        assert_ne!(
            canonical_symbols(&e1, FreeMode::Identity).cert,
            canonical_symbols(&e2, FreeMode::Identity).cert
        );
    }

    #[test]
    fn self_loop_materializes_as_repeated_reserved_label() {
        let e = [sym("psi", &[l("x", "A")], &[l("x", "A")])];
        let out = canonical_symbols(&e, FreeMode::Identity);
        let s = &out.symbols[0];
        assert_eq!(s.lower(), s.upper());
        assert!(s.lower()[0].is_reserved());
    }
}
