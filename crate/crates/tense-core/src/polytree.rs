//! Labeled polytrees: the graph form shared by nested and labeled sequents.
//!
//! A nested sequent is a polytree rooted at a display position; a labeled
//! polytree sequent is the same graph written as relational atoms. This
//! module holds the graph type, the translations in both directions, the
//! merge and isomorphism operations, and the reconstruction of display
//! derivations between two rootings of one tree.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::formula::{Diamond, Formula};
use crate::proof::{Params, Proof, RuleId};
use crate::sequent::{Label, LabelGen, LabeledSequent, NestedSequent};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolytreeError {
    #[error("label '{0}' is not a vertex")]
    UnknownLabel(Label),
    #[error("merge requires exactly one shared vertex, the merge point")]
    MergeVertices,
    #[error("the graph is not a polytree")]
    NotPolytree,
}

/// A directed graph whose underlying undirected graph is a tree, with a
/// formula multiset at each vertex. `graph_of` may return graphs that break
/// the tree invariant; `is_polytree` tells them apart.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabeledPolytree {
    pub vertices: BTreeSet<Label>,
    pub edges: BTreeSet<(Label, Label)>,
    pub labeling: BTreeMap<Label, Vec<Formula>>,
}

impl LabeledPolytree {
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn formulas(&self, v: &str) -> &[Formula] {
        self.labeling.get(v).map(|f| f.as_slice()).unwrap_or(&[])
    }

    /// Neighbors with edge direction: `true` for an outgoing edge.
    fn adjacency(&self) -> BTreeMap<&Label, Vec<(bool, &Label)>> {
        let mut adj: BTreeMap<&Label, Vec<(bool, &Label)>> = BTreeMap::new();
        for v in &self.vertices {
            adj.entry(v).or_default();
        }
        for (u, v) in &self.edges {
            adj.entry(u).or_default().push((true, v));
            adj.entry(v).or_default().push((false, u));
        }
        adj
    }

    /// The underlying undirected graph is a tree (or empty).
    pub fn is_polytree(&self) -> bool {
        if self.vertices.is_empty() {
            return self.edges.is_empty();
        }
        if self.edges.len() != self.vertices.len() - 1 {
            return false;
        }
        if self.edges.iter().any(|(u, v)| u == v) {
            return false;
        }
        if !self
            .edges
            .iter()
            .all(|(u, v)| self.vertices.contains(u) && self.vertices.contains(v))
        {
            return false;
        }
        // Connectivity; with |E| = |V| - 1 this rules out cycles.
        let adj = self.adjacency();
        let start = self.vertices.iter().next().unwrap();
        let mut seen: BTreeSet<&Label> = BTreeSet::new();
        let mut queue = VecDeque::from([start]);
        seen.insert(start);
        while let Some(v) = queue.pop_front() {
            for (_, w) in &adj[v] {
                if seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        seen.len() == self.vertices.len()
    }

    /// Tree distance between two vertices.
    pub fn distance(&self, from: &str, to: &str) -> Option<usize> {
        self.path_between(from, to).map(|p| p.len() - 1)
    }

    /// The unique simple path between two vertices of a polytree.
    pub fn path_between(&self, from: &str, to: &str) -> Option<Vec<Label>> {
        if !self.vertices.contains(from) || !self.vertices.contains(to) {
            return None;
        }
        let adj = self.adjacency();
        let mut prev: BTreeMap<&Label, &Label> = BTreeMap::new();
        let start = self.vertices.get(from).unwrap();
        let goal = self.vertices.get(to).unwrap();
        let mut queue = VecDeque::from([start]);
        let mut seen: BTreeSet<&Label> = BTreeSet::from([start]);
        while let Some(v) = queue.pop_front() {
            if v == goal {
                let mut path = vec![goal.clone()];
                let mut cur = goal;
                while let Some(p) = prev.get(cur) {
                    path.push((*p).clone());
                    cur = p;
                }
                path.reverse();
                return Some(path);
            }
            for (_, w) in &adj[v] {
                if seen.insert(w) {
                    prev.insert(w, v);
                    queue.push_back(w);
                }
            }
        }
        None
    }

    /// GraphViz rendering; vertices show their formula multisets.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph polytree {\n");
        for v in &self.vertices {
            let labels = self
                .formulas(v)
                .iter()
                .map(|f| f.to_string())
                .collect::<Vec<_>>()
                .join(", ");
            out.push_str(&format!("  \"{v}\" [label=\"{v}: {{{labels}}}\"];\n"));
        }
        for (u, v) in &self.edges {
            out.push_str(&format!("  \"{u}\" -> \"{v}\";\n"));
        }
        out.push_str("}\n");
        out
    }
}

impl fmt::Display for LabeledPolytree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", labeled_sequent_of(self))
    }
}

/// The graph of a nested sequent, keeping node ids as vertex names. A
/// `o`-child sits below an outgoing edge, a `b`-child above an incoming
/// one. The empty sequent maps to the empty graph.
pub fn polytree_of(s: &NestedSequent) -> LabeledPolytree {
    let mut g = LabeledPolytree::default();
    if s.is_empty() {
        return g;
    }
    fn walk(n: &NestedSequent, g: &mut LabeledPolytree) {
        g.vertices.insert(n.id.clone());
        g.labeling.insert(n.id.clone(), n.formulas.clone());
        for (pol, c) in &n.children {
            match pol {
                Diamond::White => g.edges.insert((n.id.clone(), c.id.clone())),
                Diamond::Black => g.edges.insert((c.id.clone(), n.id.clone())),
            };
            walk(c, g);
        }
    }
    walk(s, &mut g);
    g
}

/// The graph of a nested sequent with chosen root name `x` and fresh names
/// for the other vertices. Returns the graph and the map from node ids to
/// vertex names.
pub fn to_polytree(
    x: &str,
    s: &NestedSequent,
    gen: &mut LabelGen,
) -> (LabeledPolytree, BTreeMap<Label, Label>) {
    let mut map = BTreeMap::new();
    if s.is_empty() {
        return (LabeledPolytree::default(), map);
    }
    for id in s.all_ids() {
        let name = if id == s.id { x.to_string() } else { gen.fresh() };
        map.insert(id, name);
    }
    let base = polytree_of(s);
    let mut g = LabeledPolytree::default();
    for v in &base.vertices {
        g.vertices.insert(map[v].clone());
        g.labeling.insert(map[v].clone(), base.formulas(v).to_vec());
    }
    for (u, v) in &base.edges {
        g.edges.insert((map[u].clone(), map[v].clone()));
    }
    (g, map)
}

/// Render a polytree as the nested sequent rooted at `x`: outgoing edges
/// become `o`-children, incoming ones `b`-children. Node ids are the vertex
/// names. The empty graph renders as the empty sequent with id `x`.
pub fn to_nested(x: &str, g: &LabeledPolytree) -> Result<NestedSequent, PolytreeError> {
    if g.is_empty() {
        return Ok(NestedSequent::empty(x));
    }
    if !g.vertices.contains(x) {
        return Err(PolytreeError::UnknownLabel(x.to_string()));
    }
    // The recursive rendering only steps around its immediate parent, so a
    // cycle anywhere in the graph would recurse forever.
    if !g.is_polytree() {
        return Err(PolytreeError::NotPolytree);
    }
    let adj = g.adjacency();
    fn render(
        v: &Label,
        parent: Option<&Label>,
        g: &LabeledPolytree,
        adj: &BTreeMap<&Label, Vec<(bool, &Label)>>,
    ) -> NestedSequent {
        let mut node = NestedSequent {
            id: v.clone(),
            formulas: g.formulas(v).to_vec(),
            children: Vec::new(),
        };
        let mut out_children = Vec::new();
        let mut in_children = Vec::new();
        for (outgoing, w) in &adj[v] {
            if Some(*w) == parent {
                continue;
            }
            if *outgoing {
                out_children.push(*w);
            } else {
                in_children.push(*w);
            }
        }
        out_children.sort();
        in_children.sort();
        for w in out_children {
            node.children
                .push((Diamond::White, render(w, Some(v), g, adj)));
        }
        for w in in_children {
            node.children
                .push((Diamond::Black, render(w, Some(v), g, adj)));
        }
        node
    }
    let x = g.vertices.get(x).unwrap();
    Ok(render(x, None, g, &adj))
}

/// Merge two polytrees sharing exactly the vertex `x`; the label of `x`
/// becomes the multiset union.
pub fn merge(
    g: &LabeledPolytree,
    h: &LabeledPolytree,
    x: &str,
) -> Result<LabeledPolytree, PolytreeError> {
    let shared: Vec<&Label> = g.vertices.intersection(&h.vertices).collect();
    if shared.len() != 1 || shared[0] != x {
        return Err(PolytreeError::MergeVertices);
    }
    let mut out = g.clone();
    for v in &h.vertices {
        out.vertices.insert(v.clone());
    }
    for e in &h.edges {
        out.edges.insert(e.clone());
    }
    for (v, fs) in &h.labeling {
        out.labeling.entry(v.clone()).or_default().extend(fs.clone());
    }
    Ok(out)
}

// Canonical code of the tree rooted at `v`: label multiset plus the sorted
// codes of the children, each prefixed by the direction of its edge.
fn canon_code(
    v: &Label,
    parent: Option<&Label>,
    g: &LabeledPolytree,
    adj: &BTreeMap<&Label, Vec<(bool, &Label)>>,
) -> String {
    let mut labels: Vec<String> = g.formulas(v).iter().map(|f| f.to_string()).collect();
    labels.sort();
    let mut child_codes: Vec<String> = adj[v]
        .iter()
        .filter(|(_, w)| Some(*w) != parent)
        .map(|(outgoing, w)| {
            let tag = if *outgoing { '>' } else { '<' };
            format!("{tag}{}", canon_code(w, Some(v), g, adj))
        })
        .collect();
    child_codes.sort();
    format!("({}|{})", labels.join(","), child_codes.join(","))
}

// Pair up two rooted trees with equal canonical codes into a bijection.
fn pair_up(
    v: &Label,
    pv: Option<&Label>,
    w: &Label,
    pw: Option<&Label>,
    g: &LabeledPolytree,
    h: &LabeledPolytree,
    ga: &BTreeMap<&Label, Vec<(bool, &Label)>>,
    ha: &BTreeMap<&Label, Vec<(bool, &Label)>>,
    out: &mut BTreeMap<Label, Label>,
) {
    out.insert(v.clone(), w.clone());
    let mut gc: Vec<(String, &Label)> = ga[v]
        .iter()
        .filter(|(_, c)| Some(*c) != pv)
        .map(|(o, c)| {
            let tag = if *o { '>' } else { '<' };
            (format!("{tag}{}", canon_code(c, Some(v), g, ga)), *c)
        })
        .collect();
    let mut hc: Vec<(String, &Label)> = ha[w]
        .iter()
        .filter(|(_, c)| Some(*c) != pw)
        .map(|(o, c)| {
            let tag = if *o { '>' } else { '<' };
            (format!("{tag}{}", canon_code(c, Some(w), h, ha)), *c)
        })
        .collect();
    gc.sort();
    hc.sort();
    debug_assert_eq!(gc.len(), hc.len());
    for ((_, c1), (_, c2)) in gc.iter().zip(hc.iter()) {
        pair_up(c1, Some(v), c2, Some(w), g, h, ga, ha, out);
    }
}

/// A direction- and label-respecting isomorphism between two polytrees, or
/// `None`. Found by rooting the first tree anywhere and trying every root
/// of the second.
pub fn iso(g: &LabeledPolytree, h: &LabeledPolytree) -> Option<BTreeMap<Label, Label>> {
    if g.vertices.len() != h.vertices.len() || g.edges.len() != h.edges.len() {
        return None;
    }
    if g.is_empty() {
        return Some(BTreeMap::new());
    }
    let ga = g.adjacency();
    let ha = h.adjacency();
    let rg = g.vertices.iter().next().unwrap();
    let code_g = canon_code(rg, None, g, &ga);
    for rh in &h.vertices {
        if canon_code(rh, None, h, &ha) == code_g {
            let mut out = BTreeMap::new();
            pair_up(rg, None, rh, None, g, h, &ga, &ha, &mut out);
            return Some(out);
        }
    }
    None
}

/// The labeled sequent of a graph: one relational atom per edge, labeled
/// formulas pointwise.
pub fn labeled_sequent_of(g: &LabeledPolytree) -> LabeledSequent {
    let mut s = LabeledSequent::new();
    for (u, v) in &g.edges {
        s.rel.insert((u.clone(), v.clone()));
    }
    for v in &g.vertices {
        for f in g.formulas(v) {
            s.lformulas.push((v.clone(), f.clone()));
        }
    }
    s
}

/// The graph of a labeled sequent: vertices are all labels, edges the
/// relational atoms. Not necessarily a polytree.
pub fn graph_of(s: &LabeledSequent) -> LabeledPolytree {
    let mut g = LabeledPolytree::default();
    for l in s.labels() {
        g.labeling.entry(l.clone()).or_default();
        g.vertices.insert(l);
    }
    for (x, y) in &s.rel {
        g.edges.insert((x.clone(), y.clone()));
    }
    for (l, f) in &s.lformulas {
        g.labeling.entry(l.clone()).or_default().push(f.clone());
    }
    g
}

/// Is the graph of this labeled sequent a polytree?
pub fn is_polytree_sequent(s: &LabeledSequent) -> bool {
    graph_of(s).is_polytree()
}

/// The re-rooting steps from `from` to `to` in the tree of `s`: for each
/// step, the rule, the node that was the previous root, and the sequent
/// after the step. Stepping into what is a `b`-child of the new root uses
/// (rf), into a `o`-child (rp).
pub(crate) fn display_steps(
    s: &NestedSequent,
    from: &str,
    to: &str,
) -> Result<Vec<(RuleId, Label, NestedSequent)>, PolytreeError> {
    let g = polytree_of(s);
    for l in [from, to] {
        if !g.vertices.contains(l) {
            return Err(PolytreeError::UnknownLabel(l.to_string()));
        }
    }
    let path = g.path_between(from, to).expect("polytrees are connected");
    let mut steps = Vec::new();
    for i in 1..path.len() {
        let seq = to_nested(&path[i], &g)?;
        let (pol, _) = seq
            .parent_of(&path[i - 1])
            .map(|(p, pol)| (pol, p.id.clone()))
            .expect("previous root is a child of the next root");
        let rule = match pol {
            Diamond::Black => RuleId::Rf,
            Diamond::White => RuleId::Rp,
        };
        steps.push((rule, path[i - 1].clone(), seq));
    }
    Ok(steps)
}

/// A derivation by display rules alone whose conclusion is the sequent
/// re-rooted at `to` and whose single open assumption is the sequent
/// re-rooted at `from`. Its length is the tree distance between the two
/// nodes.
pub fn display_derivation(
    s: &NestedSequent,
    from: &str,
    to: &str,
) -> Result<Proof, PolytreeError> {
    let g = polytree_of(s);
    let start = to_nested(from, &g)?;
    let mut proof = Proof::hyp(crate::proof::Sequent::Nested(start));
    for (rule, child, seq) in display_steps(s, from, to)? {
        let mut params = Params::default();
        params.child = Some(child);
        proof = Proof::step(
            crate::proof::Sequent::Nested(seq),
            rule,
            params,
            vec![proof],
        );
    }
    Ok(proof)
}
