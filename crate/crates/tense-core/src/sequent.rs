//! Nested and labeled sequents.
//!
//! A nested sequent is a tree: each node holds a multiset of formulas and a
//! multiset of `o`/`b`-marked children. Nodes carry string ids so that rule
//! applications, propagation graphs, and graph translations can refer to a
//! node stably; ids never influence equality. Labeled sequents pair a set of
//! relational atoms `R(x,y)` with a multiset of labeled formulas `x:A`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::formula::{parse_formula, Diamond, Formula, FormulaError};

/// Node ids and labels share one representation: short interned-ish strings.
pub type Label = String;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SequentError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error("unknown node {0}")]
    UnknownNode(Label),
    #[error("filler map does not cover exactly the context holes")]
    PlugDomain,
    #[error("structure is not contained in the target node")]
    NotContained,
}

fn syntax(offset: usize, message: impl Into<String>) -> SequentError {
    SequentError::Syntax {
        offset,
        message: message.into(),
    }
}

/// Generator for fresh node ids and labels, prefix `_v`.
#[derive(Debug, Clone, Default)]
pub struct LabelGen {
    next: u64,
}

impl LabelGen {
    pub fn new() -> LabelGen {
        LabelGen { next: 0 }
    }

    /// Start above any `_v<n>` occurring in `used`, so new names never clash.
    pub fn above<'a>(used: impl IntoIterator<Item = &'a Label>) -> LabelGen {
        let mut next = 0;
        for l in used {
            if let Some(num) = l.strip_prefix("_v").and_then(|s| s.parse::<u64>().ok()) {
                next = next.max(num + 1);
            }
        }
        LabelGen { next }
    }

    pub fn fresh(&mut self) -> Label {
        let l = format!("_v{}", self.next);
        self.next += 1;
        l
    }
}

/// A nested sequent node; the whole value is the tree rooted at it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NestedSequent {
    pub id: Label,
    pub formulas: Vec<Formula>,
    pub children: Vec<(Diamond, NestedSequent)>,
}

impl NestedSequent {
    pub fn empty(id: impl Into<Label>) -> NestedSequent {
        NestedSequent {
            id: id.into(),
            formulas: Vec::new(),
            children: Vec::new(),
        }
    }

    pub fn leaf(id: impl Into<Label>, formulas: Vec<Formula>) -> NestedSequent {
        NestedSequent {
            id: id.into(),
            formulas,
            children: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.formulas.is_empty() && self.children.is_empty()
    }

    /// Preorder list of node ids.
    pub fn all_ids(&self) -> Vec<Label> {
        let mut out = Vec::new();
        self.collect_ids(&mut out);
        out
    }

    fn collect_ids(&self, out: &mut Vec<Label>) {
        out.push(self.id.clone());
        for (_, c) in &self.children {
            c.collect_ids(out);
        }
    }

    pub fn node(&self, id: &str) -> Option<&NestedSequent> {
        if self.id == id {
            return Some(self);
        }
        self.children.iter().find_map(|(_, c)| c.node(id))
    }

    pub fn node_mut(&mut self, id: &str) -> Option<&mut NestedSequent> {
        if self.id == id {
            return Some(self);
        }
        self.children.iter_mut().find_map(|(_, c)| c.node_mut(id))
    }

    /// Parent of `id` together with the polarity of the connecting edge.
    pub fn parent_of(&self, id: &str) -> Option<(&NestedSequent, Diamond)> {
        for (pol, c) in &self.children {
            if c.id == id {
                return Some((self, *pol));
            }
            if let Some(hit) = c.parent_of(id) {
                return Some(hit);
            }
        }
        None
    }

    /// Detach the direct child with the given id from this node.
    pub fn remove_child(&mut self, id: &str) -> Option<(Diamond, NestedSequent)> {
        let idx = self.children.iter().position(|(_, c)| c.id == id)?;
        Some(self.children.remove(idx))
    }

    /// Copy with every node id replaced by a fresh one.
    pub fn relabel_fresh(&self, gen: &mut LabelGen) -> NestedSequent {
        NestedSequent {
            id: gen.fresh(),
            formulas: self.formulas.clone(),
            children: self
                .children
                .iter()
                .map(|(p, c)| (*p, c.relabel_fresh(gen)))
                .collect(),
        }
    }

    /// Copy with ids `n0, n1, ...` assigned in preorder, the same scheme the
    /// parser uses.
    pub fn relabel_preorder(&self) -> NestedSequent {
        let mut counter = 0;
        self.relabel_preorder_inner(&mut counter)
    }

    fn relabel_preorder_inner(&self, counter: &mut u64) -> NestedSequent {
        let id = format!("n{counter}");
        *counter += 1;
        NestedSequent {
            id,
            formulas: self.formulas.clone(),
            children: self
                .children
                .iter()
                .map(|(p, c)| (*p, c.relabel_preorder_inner(counter)))
                .collect(),
        }
    }

    /// Merge the root content of `other` into this node (formulas and
    /// children are appended; `other`'s node id is dropped).
    pub fn absorb(&mut self, other: NestedSequent) {
        self.formulas.extend(other.formulas);
        self.children.extend(other.children);
    }

    /// Remove `part`'s formulas and children (matched up to `nested_equal`)
    /// from this node. Fails if `part` is not contained.
    pub fn subtract(&mut self, part: &NestedSequent) -> Result<(), SequentError> {
        let mut formulas = self.formulas.clone();
        for f in &part.formulas {
            match formulas.iter().position(|g| g == f) {
                Some(i) => {
                    formulas.remove(i);
                }
                None => return Err(SequentError::NotContained),
            }
        }
        let mut children = self.children.clone();
        for (pol, pc) in &part.children {
            match children
                .iter()
                .position(|(q, c)| q == pol && nested_equal(c, pc))
            {
                Some(i) => {
                    children.remove(i);
                }
                None => return Err(SequentError::NotContained),
            }
        }
        self.formulas = formulas;
        self.children = children;
        Ok(())
    }

    /// True if this node's content contains `part` (formulas as a multiset,
    /// children up to `nested_equal`).
    pub fn contains_part(&self, part: &NestedSequent) -> bool {
        let mut probe = self.clone();
        probe.subtract(part).is_ok()
    }

    /// Re-root at a direct child: the child becomes the root, the old root
    /// (minus that child) hangs under it with flipped polarity. This is the
    /// sequent form of looking at the same tree from a neighbouring node.
    pub fn reroot_into_child(&self, child_id: &str) -> Option<NestedSequent> {
        let mut old_root = self.clone();
        let (pol, child) = old_root.remove_child(child_id)?;
        let mut new_root = child;
        new_root.children.push((pol.dual(), old_root));
        Some(new_root)
    }

    /// Canonical id-blind rendering; equal strings iff `nested_equal`.
    pub fn canonical_key(&self) -> String {
        let mut fs: Vec<String> = self.formulas.iter().map(|f| f.to_string()).collect();
        fs.sort();
        let mut cs: Vec<String> = self
            .children
            .iter()
            .map(|(p, c)| format!("{}{}", p.token(), c.canonical_key()))
            .collect();
        cs.sort();
        format!("({}|{})", fs.join(","), cs.join(","))
    }
}

/// Multiset tree equality; node ids are ignored.
pub fn nested_equal(a: &NestedSequent, b: &NestedSequent) -> bool {
    a.canonical_key() == b.canonical_key()
}

/// An id bijection witnessing `nested_equal(a, b)`, mapping ids of `a` to ids
/// of `b`. Equal siblings are paired in canonical order, which is sound
/// because they are interchangeable.
pub fn nested_match_ids(a: &NestedSequent, b: &NestedSequent) -> Option<BTreeMap<Label, Label>> {
    if !nested_equal(a, b) {
        return None;
    }
    let mut map = BTreeMap::new();
    align(a, b, &mut map);
    Some(map)
}

fn align(a: &NestedSequent, b: &NestedSequent, map: &mut BTreeMap<Label, Label>) {
    map.insert(a.id.clone(), b.id.clone());
    let sort_key = |(p, c): &(Diamond, NestedSequent)| format!("{}{}", p.token(), c.canonical_key());
    let mut ac: Vec<_> = a.children.iter().collect();
    let mut bc: Vec<_> = b.children.iter().collect();
    ac.sort_by_key(|x| sort_key(x));
    bc.sort_by_key(|x| sort_key(x));
    for (x, y) in ac.iter().zip(bc.iter()) {
        align(&x.1, &y.1, map);
    }
}

/// All substructures of `x`, modulo `nested_equal`. The empty sequent has
/// none. For each node this enumerates every nonempty sub-multiset of its
/// items, so it is exponential in node width; intended for small sequents.
pub fn substructures(x: &NestedSequent) -> Vec<NestedSequent> {
    let mut by_key: BTreeMap<String, NestedSequent> = BTreeMap::new();
    collect_substructures(x, &mut by_key);
    by_key.into_values().collect()
}

fn collect_substructures(node: &NestedSequent, out: &mut BTreeMap<String, NestedSequent>) {
    enum Item {
        F(Formula),
        C(Diamond, NestedSequent),
    }
    let items: Vec<Item> = node
        .formulas
        .iter()
        .cloned()
        .map(Item::F)
        .chain(node.children.iter().map(|(p, c)| Item::C(*p, c.clone())))
        .collect();
    let n = items.len();
    for mask in 1u64..(1u64 << n) {
        let mut sub = NestedSequent::empty("s");
        for (i, item) in items.iter().enumerate() {
            if mask & (1 << i) != 0 {
                match item {
                    Item::F(f) => sub.formulas.push(f.clone()),
                    Item::C(p, c) => sub.children.push((*p, c.clone())),
                }
            }
        }
        out.entry(sub.canonical_key()).or_insert(sub);
    }
    for (_, c) in &node.children {
        collect_substructures(c, out);
    }
}

/// A nested sequent with numbered holes, each sitting on one node.
#[derive(Debug, Clone)]
pub struct Context {
    pub tree: NestedSequent,
    /// hole id -> node id carrying the hole.
    pub holes: BTreeMap<u32, Label>,
}

/// Fill every hole of `c`: each filler's root content is fused into the node
/// carrying the hole. The filler map must cover exactly the holes.
pub fn plug(
    c: &Context,
    fillers: &BTreeMap<u32, NestedSequent>,
) -> Result<NestedSequent, SequentError> {
    if fillers.keys().ne(c.holes.keys()) {
        return Err(SequentError::PlugDomain);
    }
    let mut tree = c.tree.clone();
    for (hole, node_id) in &c.holes {
        let filler = fillers[hole].clone();
        let node = tree
            .node_mut(node_id)
            .ok_or_else(|| SequentError::UnknownNode(node_id.clone()))?;
        node.absorb(filler);
    }
    Ok(tree)
}

/// All filler assignments under which plugging `pattern` yields `target`,
/// modulo `nested_equal` on the fillers.
pub fn match_context(
    pattern: &Context,
    target: &NestedSequent,
) -> Vec<BTreeMap<u32, NestedSequent>> {
    let mut results = Vec::new();
    match_node(pattern, &pattern.tree, target, &BTreeMap::new(), &mut results);
    let mut seen = BTreeSet::new();
    results
        .into_iter()
        .filter(|m| {
            let key: Vec<(u32, String)> =
                m.iter().map(|(h, s)| (*h, s.canonical_key())).collect();
            seen.insert(key)
        })
        .collect()
}

fn holes_at(pattern: &Context, node_id: &str) -> Vec<u32> {
    pattern
        .holes
        .iter()
        .filter(|(_, nid)| nid.as_str() == node_id)
        .map(|(h, _)| *h)
        .collect()
}

fn match_node(
    pattern: &Context,
    pnode: &NestedSequent,
    tnode: &NestedSequent,
    acc: &BTreeMap<u32, NestedSequent>,
    out: &mut Vec<BTreeMap<u32, NestedSequent>>,
) {
    // Pattern formulas must embed into the target's multiset.
    let mut rest_formulas = tnode.formulas.clone();
    for f in &pnode.formulas {
        match rest_formulas.iter().position(|g| g == f) {
            Some(i) => {
                rest_formulas.remove(i);
            }
            None => return,
        }
    }
    // Try every injective, polarity-respecting assignment of pattern children
    // to target children; remaining items feed the holes at this node.
    let holes = holes_at(pattern, &pnode.id);
    let mut used = vec![false; tnode.children.len()];
    match_children(
        pattern,
        pnode,
        tnode,
        0,
        &mut used,
        &rest_formulas,
        &holes,
        acc,
        out,
    );
}

#[allow(clippy::too_many_arguments)]
fn match_children(
    pattern: &Context,
    pnode: &NestedSequent,
    tnode: &NestedSequent,
    pi: usize,
    used: &mut Vec<bool>,
    rest_formulas: &[Formula],
    holes: &[u32],
    acc: &BTreeMap<u32, NestedSequent>,
    out: &mut Vec<BTreeMap<u32, NestedSequent>>,
) {
    if pi == pnode.children.len() {
        // Leftover formulas and children must be split among the holes.
        let leftovers_children: Vec<(Diamond, NestedSequent)> = tnode
            .children
            .iter()
            .zip(used.iter())
            .filter(|(_, u)| !**u)
            .map(|((p, c), _)| (*p, c.clone()))
            .collect();
        if holes.is_empty() {
            if rest_formulas.is_empty() && leftovers_children.is_empty() {
                out.push(acc.clone());
            }
            return;
        }
        // Distribute each leftover item independently over the holes.
        let mut assignments: Vec<Vec<NestedSequent>> = vec![
            vec![NestedSequent::empty("h"); holes.len()];
            1
        ];
        for f in rest_formulas {
            let mut next = Vec::new();
            for a in &assignments {
                for h in 0..holes.len() {
                    let mut b = a.clone();
                    b[h].formulas.push(f.clone());
                    next.push(b);
                }
            }
            assignments = next;
        }
        for (p, c) in &leftovers_children {
            let mut next = Vec::new();
            for a in &assignments {
                for h in 0..holes.len() {
                    let mut b = a.clone();
                    b[h].children.push((*p, c.clone()));
                    next.push(b);
                }
            }
            assignments = next;
        }
        for a in assignments {
            let mut acc2 = acc.clone();
            for (h, filler) in holes.iter().zip(a.into_iter()) {
                acc2.insert(*h, filler);
            }
            out.push(acc2);
        }
        return;
    }
    let (ppol, pchild) = &pnode.children[pi];
    for ti in 0..tnode.children.len() {
        if used[ti] {
            continue;
        }
        let (tpol, tchild) = &tnode.children[ti];
        if tpol != ppol {
            continue;
        }
        used[ti] = true;
        // Pair this pattern child with this target child (collecting the
        // hole assignments inside its subtree), then continue with the
        // remaining siblings under each resulting assignment.
        let mut acc_list = Vec::new();
        match_node(pattern, pchild, tchild, acc, &mut acc_list);
        for acc2 in &acc_list {
            match_children(
                pattern,
                pnode,
                tnode,
                pi + 1,
                used,
                rest_formulas,
                holes,
                acc2,
                out,
            );
        }
        used[ti] = false;
    }
}

impl fmt::Display for NestedSequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("emp");
        }
        let mut first = true;
        let mut sep = |f: &mut fmt::Formatter<'_>| -> fmt::Result {
            if first {
                first = false;
                Ok(())
            } else {
                f.write_str(", ")
            }
        };
        for fa in &self.formulas {
            sep(f)?;
            write!(f, "{fa}")?;
        }
        for (p, c) in &self.children {
            sep(f)?;
            match p {
                Diamond::White => write!(f, "o{{{c}}}")?,
                Diamond::Black => write!(f, "b{{{c}}}")?,
            }
        }
        Ok(())
    }
}

/// Parse the nested sequent syntax: comma-separated formulas and `o{...}` /
/// `b{...}` children, `emp` for the empty sequent. Node ids are assigned in
/// preorder as `n0, n1, ...`.
pub fn parse_nested(text: &str) -> Result<NestedSequent, SequentError> {
    let mut counter = 0;
    let (seq, rest) = parse_nested_inner(text, 0, &mut counter)?;
    let rest_trim = skip_ws(text, rest);
    if rest_trim != text.len() {
        return Err(syntax(rest_trim, "trailing input"));
    }
    Ok(seq)
}

fn skip_ws(text: &str, mut i: usize) -> usize {
    let b = text.as_bytes();
    while i < b.len() && (b[i] as char).is_whitespace() {
        i += 1;
    }
    i
}

// Parses a sequent body until an unbalanced '}' or end of input.
fn parse_nested_inner(
    text: &str,
    start: usize,
    counter: &mut u64,
) -> Result<(NestedSequent, usize), SequentError> {
    let id = format!("n{counter}");
    *counter += 1;
    let mut seq = NestedSequent::empty(id);
    let b = text.as_bytes();
    let mut i = skip_ws(text, start);
    let mut saw_emp = false;
    let mut item_count = 0;
    loop {
        if i >= b.len() || b[i] == b'}' {
            break;
        }
        if item_count > 0 {
            if b[i] != b',' {
                return Err(syntax(i, "expected ',' or end of sequent"));
            }
            i = skip_ws(text, i + 1);
        }
        if i >= b.len() || b[i] == b'}' {
            return Err(syntax(i, "expected an item after ','"));
        }
        // Child items start with o{ / b{; 'emp' denotes the empty sequent.
        if (b[i] == b'o' || b[i] == b'b') && peek_brace(text, i) {
            let pol = if b[i] == b'o' {
                Diamond::White
            } else {
                Diamond::Black
            };
            let open = skip_ws(text, i + 1);
            let (child, after) = parse_nested_inner(text, open + 1, counter)?;
            let after = skip_ws(text, after);
            if after >= b.len() || b[after] != b'}' {
                return Err(syntax(after, "expected '}'"));
            }
            seq.children.push((pol, child));
            i = skip_ws(text, after + 1);
        } else if text[i..].starts_with("emp") && !ident_continues(text, i + 3) {
            saw_emp = true;
            i = skip_ws(text, i + 3);
        } else {
            let (formula, after) = parse_formula_prefix(text, i)?;
            seq.formulas.push(formula);
            i = skip_ws(text, after);
        }
        item_count += 1;
    }
    if saw_emp && item_count > 1 {
        return Err(syntax(start, "'emp' cannot be combined with other items"));
    }
    if item_count == 0 {
        return Err(syntax(i, "expected a sequent (use 'emp' for the empty one)"));
    }
    Ok((seq, i))
}

fn peek_brace(text: &str, i: usize) -> bool {
    let j = skip_ws(text, i + 1);
    text.as_bytes().get(j) == Some(&b'{')
}

fn ident_continues(text: &str, i: usize) -> bool {
    matches!(text.as_bytes().get(i), Some(c) if c.is_ascii_lowercase() || c.is_ascii_digit() || *c == b'_')
}

// Parse one formula starting at `i`, stopping before ',' or '}' at depth 0.
fn parse_formula_prefix(text: &str, i: usize) -> Result<(Formula, usize), SequentError> {
    let b = text.as_bytes();
    let mut depth = 0usize;
    let mut j = i;
    while j < b.len() {
        match b[j] {
            b'(' => depth += 1,
            b')' => {
                if depth == 0 {
                    break;
                }
                depth -= 1;
            }
            b',' | b'}' if depth == 0 => break,
            _ => {}
        }
        j += 1;
    }
    let slice = &text[i..j];
    let formula = parse_formula(slice).map_err(|e| match e {
        FormulaError::Syntax { offset, message } => syntax(i + offset, message),
        other => SequentError::Formula(other),
    })?;
    Ok((formula, j))
}

/// A labeled sequent: relational atoms plus labeled formulas.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabeledSequent {
    pub rel: BTreeSet<(Label, Label)>,
    pub lformulas: Vec<(Label, Formula)>,
}

impl LabeledSequent {
    pub fn new() -> LabeledSequent {
        LabeledSequent::default()
    }

    pub fn labels(&self) -> BTreeSet<Label> {
        let mut out = BTreeSet::new();
        for (x, y) in &self.rel {
            out.insert(x.clone());
            out.insert(y.clone());
        }
        for (x, _) in &self.lformulas {
            out.insert(x.clone());
        }
        out
    }

    pub fn formulas_at(&self, label: &str) -> Vec<&Formula> {
        self.lformulas
            .iter()
            .filter(|(x, _)| x == label)
            .map(|(_, f)| f)
            .collect()
    }

    pub fn contains_formula(&self, label: &str, f: &Formula) -> bool {
        self.lformulas.iter().any(|(x, g)| x == label && g == f)
    }

    pub fn remove_formula(&mut self, label: &str, f: &Formula) -> bool {
        if let Some(i) = self
            .lformulas
            .iter()
            .position(|(x, g)| x == label && g == f)
        {
            self.lformulas.remove(i);
            true
        } else {
            false
        }
    }

    /// Multiset-aware canonical form.
    pub fn canonical_key(&self) -> String {
        let rels: Vec<String> = self.rel.iter().map(|(x, y)| format!("R({x},{y})")).collect();
        let mut fs: Vec<String> = self
            .lformulas
            .iter()
            .map(|(x, f)| format!("{x}:{f}"))
            .collect();
        fs.sort();
        format!("{}|{}", rels.join(","), fs.join(","))
    }

    /// Add all atoms and formulas of `part`.
    pub fn extend_with(&mut self, part: &LabeledSequent) {
        self.rel.extend(part.rel.iter().cloned());
        self.lformulas.extend(part.lformulas.iter().cloned());
    }

    /// Remove `part` (rel as a subset, formulas as a sub-multiset).
    pub fn subtract(&mut self, part: &LabeledSequent) -> Result<(), SequentError> {
        for atom in &part.rel {
            if !self.rel.remove(atom) {
                return Err(SequentError::NotContained);
            }
        }
        for (x, f) in &part.lformulas {
            if !self.remove_formula(x, f) {
                return Err(SequentError::NotContained);
            }
        }
        Ok(())
    }

    pub fn contains_part(&self, part: &LabeledSequent) -> bool {
        let mut probe = self.clone();
        probe.subtract(part).is_ok()
    }
}

/// Multiset equality of labeled sequents; labels are syntax, not ids.
pub fn labeled_equal(a: &LabeledSequent, b: &LabeledSequent) -> bool {
    a.canonical_key() == b.canonical_key()
}

/// Replace every occurrence of label `y` by `x`. Relational duplicates
/// collapse because the atoms form a set.
pub fn substitute(s: &LabeledSequent, x: &str, y: &str) -> LabeledSequent {
    let sub = |l: &Label| -> Label {
        if l == y {
            x.to_string()
        } else {
            l.clone()
        }
    };
    LabeledSequent {
        rel: s.rel.iter().map(|(a, b)| (sub(a), sub(b))).collect(),
        lformulas: s.lformulas.iter().map(|(l, f)| (sub(l), f.clone())).collect(),
    }
}

impl fmt::Display for LabeledSequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.rel.is_empty() && self.lformulas.is_empty() {
            return f.write_str("emp");
        }
        let mut parts: Vec<String> = self
            .rel
            .iter()
            .map(|(x, y)| format!("R({x},{y})"))
            .collect();
        parts.extend(self.lformulas.iter().map(|(x, g)| format!("{x}:{g}")));
        f.write_str(&parts.join(", "))
    }
}

/// Parse `R(x,y), x:A, ...`; `emp` for the empty sequent.
pub fn parse_labeled(text: &str) -> Result<LabeledSequent, SequentError> {
    let mut seq = LabeledSequent::new();
    let trimmed = text.trim();
    if trimmed == "emp" {
        return Ok(seq);
    }
    let b = text.as_bytes();
    let mut i = skip_ws(text, 0);
    let mut first = true;
    while i < b.len() {
        if !first {
            if b[i] != b',' {
                return Err(syntax(i, "expected ','"));
            }
            i = skip_ws(text, i + 1);
        }
        first = false;
        if text[i..].starts_with("R(") {
            let close = text[i..]
                .find(')')
                .ok_or_else(|| syntax(i, "unterminated relational atom"))?
                + i;
            let inner = &text[i + 2..close];
            let mut parts = inner.split(',');
            let x = parts.next().map(str::trim).unwrap_or("");
            let y = parts.next().map(str::trim).unwrap_or("");
            if x.is_empty() || y.is_empty() || parts.next().is_some() {
                return Err(syntax(i, "expected R(x,y)"));
            }
            check_label(text, i, x)?;
            check_label(text, i, y)?;
            seq.rel.insert((x.to_string(), y.to_string()));
            i = skip_ws(text, close + 1);
        } else {
            let colon = text[i..]
                .find(':')
                .ok_or_else(|| syntax(i, "expected 'label:formula' or 'R(x,y)'"))?
                + i;
            let label = text[i..colon].trim();
            check_label(text, i, label)?;
            let fstart = skip_ws(text, colon + 1);
            let (formula, after) = parse_formula_prefix(text, fstart)?;
            seq.lformulas.push((label.to_string(), formula));
            i = skip_ws(text, after);
        }
    }
    if first {
        return Err(syntax(0, "expected a labeled sequent (use 'emp')"));
    }
    Ok(seq)
}

fn check_label(_text: &str, offset: usize, label: &str) -> Result<(), SequentError> {
    let mut chars = label.chars();
    let ok = match chars.next() {
        Some(c) if c.is_ascii_lowercase() || c == '_' => chars
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_'),
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(syntax(offset, format!("invalid label '{label}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;

    fn ns(text: &str) -> NestedSequent {
        parse_nested(text).unwrap()
    }

    #[test]
    fn parse_and_print_round_trip() {
        for text in [
            "p",
            "emp",
            "p, ~p",
            "p, o{q, b{r}}, b{emp}",
            "o{emp}",
            "p & q, o{p | r}",
        ] {
            let s = ns(text);
            let reprinted = s.to_string();
            let again = ns(&reprinted);
            assert!(nested_equal(&s, &again), "round trip failed for {text}");
        }
    }

    #[test]
    fn preorder_ids() {
        let s = ns("p, o{q, b{r}}, b{s}");
        assert_eq!(s.all_ids(), vec!["n0", "n1", "n2", "n3"]);
        assert_eq!(s.node("n2").unwrap().formulas, vec![parse_formula("r").unwrap()]);
    }

    #[test]
    fn nested_equality_is_multiset() {
        assert!(nested_equal(&ns("p, q"), &ns("q, p")));
        assert!(nested_equal(&ns("o{p}, b{q}"), &ns("b{q}, o{p}")));
        assert!(!nested_equal(&ns("p"), &ns("p, p")));
        assert!(!nested_equal(&ns("o{p}"), &ns("b{p}")));
        // (A, emp-child) is not the same sequent as (A).
        assert!(!nested_equal(&ns("p, o{emp}"), &ns("p")));
    }

    #[test]
    fn substructures_of_singleton_child() {
        // All substructures of o{A, B}: itself, (A, B), A, B.
        let s = ns("o{p, q}");
        let subs = substructures(&s);
        let keys: BTreeSet<String> = subs.iter().map(|x| x.canonical_key()).collect();
        let expect: BTreeSet<String> = [
            ns("o{p, q}").canonical_key(),
            ns("p, q").canonical_key(),
            ns("p").canonical_key(),
            ns("q").canonical_key(),
        ]
        .into_iter()
        .collect();
        assert_eq!(keys, expect);
    }

    #[test]
    fn substructures_match_recursive_definition() {
        // Oracle: direct recursion over all binary splits.
        fn oracle(x: &NestedSequent, out: &mut BTreeMap<String, NestedSequent>) {
            if x.is_empty() {
                return;
            }
            out.entry(x.canonical_key()).or_insert_with(|| x.clone());
            // Single child, no formulas: recurse into its content.
            if x.formulas.is_empty() && x.children.len() == 1 {
                let inner = NestedSequent {
                    id: "i".into(),
                    formulas: x.children[0].1.formulas.clone(),
                    children: x.children[0].1.children.clone(),
                };
                oracle(&inner, out);
            }
            // All binary splits of the root items.
            let total = x.formulas.len() + x.children.len();
            if total < 2 {
                return;
            }
            for mask in 1..(1u64 << total) - 1 {
                let mut left = NestedSequent::empty("l");
                let mut right = NestedSequent::empty("r");
                for (i, f) in x.formulas.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        left.formulas.push(f.clone());
                    } else {
                        right.formulas.push(f.clone());
                    }
                }
                for (j, c) in x.children.iter().enumerate() {
                    if mask & (1 << (x.formulas.len() + j)) != 0 {
                        left.children.push(c.clone());
                    } else {
                        right.children.push(c.clone());
                    }
                }
                oracle(&left, out);
                oracle(&right, out);
            }
        }
        for text in ["p, q, o{r}", "o{p, b{q, r}}", "p, p, q"] {
            let s = ns(text);
            let mut expected = BTreeMap::new();
            oracle(&s, &mut expected);
            let got: BTreeSet<String> =
                substructures(&s).iter().map(|x| x.canonical_key()).collect();
            let want: BTreeSet<String> = expected.keys().cloned().collect();
            assert_eq!(got, want, "substructures mismatch for {text}");
        }
    }

    #[test]
    fn plug_fuses_at_the_hole_node() {
        let mut ctx_tree = ns("o{p}");
        ctx_tree.node_mut("n1").unwrap();
        let ctx = Context {
            tree: ctx_tree,
            holes: [(1u32, "n1".to_string())].into_iter().collect(),
        };
        let filler = ns("q, b{r}");
        let plugged = plug(&ctx, &[(1u32, filler)].into_iter().collect()).unwrap();
        assert!(nested_equal(&plugged, &ns("o{p, q, b{r}}")));
    }

    #[test]
    fn plug_rejects_wrong_domain() {
        let ctx = Context {
            tree: ns("p"),
            holes: [(1u32, "n0".to_string())].into_iter().collect(),
        };
        let err = plug(&ctx, &BTreeMap::new());
        assert_eq!(err.unwrap_err(), SequentError::PlugDomain);
    }

    #[test]
    fn match_context_examples() {
        // o{hole} against o{p, q}: the hole receives (p, q).
        let ctx = Context {
            tree: ns("o{emp}"),
            holes: [(1u32, "n1".to_string())].into_iter().collect(),
        };
        let matches = match_context(&ctx, &ns("o{p, q}"));
        assert_eq!(matches.len(), 1);
        assert!(nested_equal(&matches[0][&1], &ns("p, q")));

        // A bare hole matches anything.
        let ctx = Context {
            tree: ns("emp"),
            holes: [(1u32, "n0".to_string())].into_iter().collect(),
        };
        let target = ns("p, o{q}");
        let matches = match_context(&ctx, &target);
        assert_eq!(matches.len(), 1);
        assert!(nested_equal(&matches[0][&1], &target));

        // Polarity mismatch yields no matches.
        let ctx = Context {
            tree: ns("o{emp}"),
            holes: [(1u32, "n1".to_string())].into_iter().collect(),
        };
        assert!(match_context(&ctx, &ns("b{p}")).is_empty());
    }

    #[test]
    fn match_context_plug_round_trip() {
        let ctx = Context {
            tree: ns("p, o{q}"),
            holes: [(1u32, "n0".to_string())].into_iter().collect(),
        };
        let target = ns("p, r, o{q}, b{s}");
        for m in match_context(&ctx, &target) {
            let plugged = plug(&ctx, &m).unwrap();
            assert!(nested_equal(&plugged, &target));
        }
        assert!(!match_context(&ctx, &target).is_empty());
    }

    #[test]
    fn reroot_into_child_flips_polarity() {
        let s = ns("p, o{q}");
        let r = s.reroot_into_child("n1").unwrap();
        assert!(nested_equal(&r, &ns("q, b{p}")));
        let back = r.reroot_into_child("n0").unwrap();
        assert!(nested_equal(&back, &s));
    }

    #[test]
    fn labeled_parse_print_round_trip() {
        for text in ["emp", "x:p", "R(x,y), x:p, y:~p", "R(_v0,x), _v0:<>p"] {
            let s = parse_labeled(text).unwrap();
            let again = parse_labeled(&s.to_string()).unwrap();
            assert!(labeled_equal(&s, &again), "round trip failed for {text}");
        }
    }

    #[test]
    fn labeled_formulas_are_a_multiset() {
        let a = parse_labeled("x:p, x:p").unwrap();
        let b = parse_labeled("x:p").unwrap();
        assert!(!labeled_equal(&a, &b));
    }

    #[test]
    fn substitution_collapses_relational_duplicates() {
        let s = parse_labeled("R(x,y), R(x,z), y:p").unwrap();
        let t = substitute(&s, "x", "y");
        let want = parse_labeled("R(x,x), R(x,z), x:p").unwrap();
        assert!(labeled_equal(&t, &want));
    }

    #[test]
    fn label_generator_avoids_used_names() {
        let used = ["_v3".to_string(), "x".to_string()];
        let mut gen = LabelGen::above(used.iter());
        assert_eq!(gen.fresh(), "_v4");
        assert_eq!(gen.fresh(), "_v5");
    }
}
