//! Propagation graphs and grammar-directed reachability.
//!
//! A propagation graph records, for every adjacent pair of worlds, the
//! diamond that moves a formula from one to the other: a future edge
//! contributes a `<>` step forward and a `<#>` step back. Reachability asks
//! for a walk whose diamond word belongs to the completion of the active
//! axiom set; the witness search runs the same derivation engine as word
//! membership, with the graph itself in place of a word's line graph.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::axioms::{nt_of, saturate, DiamondString, PathGrammar};
use crate::formula::Diamond;
use crate::sequent::{Label, LabeledSequent, NestedSequent};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PropagationError {
    #[error("node '{0}' is not in the propagation graph")]
    UnknownNode(Label),
}

/// A directed graph with diamond-labeled edges over sequent node labels.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PropagationGraph {
    pub nodes: BTreeSet<Label>,
    pub edges: BTreeSet<(Label, Label, Diamond)>,
}

impl PropagationGraph {
    pub fn has_edge(&self, from: &str, to: &str, d: Diamond) -> bool {
        self.edges
            .contains(&(from.to_string(), to.to_string(), d))
    }

    /// Insert the edge pair of one underlying future arc `u -> v`.
    fn add_arc(&mut self, u: &str, v: &str) {
        self.edges
            .insert((u.to_string(), v.to_string(), Diamond::White));
        self.edges
            .insert((v.to_string(), u.to_string(), Diamond::Black));
    }

    /// GraphViz rendering with one arrow per underlying arc.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph pg {\n");
        for n in &self.nodes {
            out.push_str(&format!("  \"{n}\";\n"));
        }
        for (u, v, d) in &self.edges {
            out.push_str(&format!(
                "  \"{u}\" -> \"{v}\" [label=\"{}\"];\n",
                d.token()
            ));
        }
        out.push_str("}\n");
        out
    }
}

impl fmt::Display for PropagationGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (u, v, d) in &self.edges {
            if !first {
                write!(f, ", ")?;
            }
            write!(f, "{u} {} {v}", d.token())?;
            first = false;
        }
        if first {
            write!(f, "emp")?;
        }
        Ok(())
    }
}

/// The propagation graph of a nested sequent. Every tree edge contributes
/// one future arc: toward a `o`-child, or from a `b`-child up to its parent.
/// Display moves re-root the tree but keep these arcs, so display-equivalent
/// sequents share one graph.
pub fn pg_of_nested(x: &NestedSequent) -> PropagationGraph {
    let mut g = PropagationGraph::default();
    fn walk(n: &NestedSequent, g: &mut PropagationGraph) {
        g.nodes.insert(n.id.clone());
        for (pol, c) in &n.children {
            match pol {
                Diamond::White => g.add_arc(&n.id, &c.id),
                Diamond::Black => g.add_arc(&c.id, &n.id),
            }
            walk(c, g);
        }
    }
    walk(x, &mut g);
    g
}

/// The propagation graph of a labeled sequent: `R(x,y)` is a future arc
/// from `x` to `y`. Labels that occur only in formulas become isolated
/// nodes.
pub fn pg_of_labeled(s: &LabeledSequent) -> PropagationGraph {
    let mut g = PropagationGraph::default();
    for l in s.labels() {
        g.nodes.insert(l);
    }
    for (x, y) in &s.rel {
        g.add_arc(x, y);
    }
    g
}

/// A walk in a propagation graph: nodes interleaved with the diamonds of
/// the edges taken. A single node is the empty walk.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PropPath {
    pub nodes: Vec<Label>,
    pub dias: Vec<Diamond>,
}

impl PropPath {
    pub fn single(node: &str) -> PropPath {
        PropPath {
            nodes: vec![node.to_string()],
            dias: Vec::new(),
        }
    }

    pub fn start(&self) -> &Label {
        &self.nodes[0]
    }

    pub fn end(&self) -> &Label {
        self.nodes.last().expect("paths have at least one node")
    }

    /// Every step uses an edge of `g`.
    pub fn valid_in(&self, g: &PropagationGraph) -> bool {
        if self.nodes.len() != self.dias.len() + 1 || self.nodes.is_empty() {
            return false;
        }
        if !self.nodes.iter().all(|n| g.nodes.contains(n)) {
            return false;
        }
        self.dias
            .iter()
            .enumerate()
            .all(|(i, d)| g.has_edge(&self.nodes[i], &self.nodes[i + 1], *d))
    }
}

impl fmt::Display for PropPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.nodes[0])?;
        for (i, d) in self.dias.iter().enumerate() {
            write!(f, " {} {}", d.token(), self.nodes[i + 1])?;
        }
        Ok(())
    }
}

/// The diamond word a walk spells.
pub fn path_string(p: &PropPath) -> DiamondString {
    p.dias.clone()
}

/// Find a walk from `from` to `to` whose word, capped by `target`, lies in
/// the completion: that is, `word A -> <target> A` must be derivable.
/// Returns the first witness of the deterministic saturation, or `None`
/// when no walk qualifies. Walks may repeat nodes and edges.
pub fn reachable(
    g: &PropagationGraph,
    from: &str,
    to: &str,
    target: Diamond,
    grammar: &PathGrammar,
) -> Result<Option<PropPath>, PropagationError> {
    for l in [from, to] {
        if !g.nodes.contains(l) {
            return Err(PropagationError::UnknownNode(l.to_string()));
        }
    }
    let names: Vec<&Label> = g.nodes.iter().collect();
    let index_of = |l: &str| names.iter().position(|n| n.as_str() == l).unwrap();
    let edges: Vec<(usize, Diamond, usize)> = g
        .edges
        .iter()
        .map(|(u, v, d)| (index_of(u), *d, index_of(v)))
        .collect();
    let table = saturate(grammar, names.len(), &edges);
    let fact = match table.lookup(nt_of(target), index_of(from), index_of(to)) {
        Some(f) => f,
        None => return Ok(None),
    };
    let mut edge_seq = Vec::new();
    grammar.witness_edges(&table, fact, &edges, &mut edge_seq);
    if edge_seq.is_empty() {
        return Ok(Some(PropPath::single(from)));
    }
    let mut nodes = vec![names[edges[edge_seq[0]].0].clone()];
    let mut dias = Vec::new();
    for ei in edge_seq {
        let (u, d, v) = edges[ei];
        debug_assert_eq!(names[u], nodes.last().unwrap());
        dias.push(d);
        nodes.push(names[v].clone());
    }
    Ok(Some(PropPath { nodes, dias }))
}
