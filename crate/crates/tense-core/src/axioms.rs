//! Path axioms `<pi_1>...<pi_n>A -> <d>A`, their inverses and compositions,
//! and the context-free grammar that decides membership in the closure of an
//! axiom set under inversion and composition.
//!
//! The closure is infinite in general and is never materialized. An axiom
//! `Pi A -> <d> A` belongs to it iff `S_d` derives the word `Pi` in a grammar
//! with one production per declared or inverted axiom plus lexical identity
//! productions `S_d -> d`. Membership and witness extraction run on a shared
//! derivation engine that also powers propagation-graph reachability.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::formula::Diamond;

/// A finite word over `<>` / `<#>`.
pub type DiamondString = Vec<Diamond>;

/// Render a diamond word; the empty word prints as `e`.
pub fn word_string(w: &[Diamond]) -> String {
    if w.is_empty() {
        "e".to_string()
    } else {
        w.iter().map(|d| d.token()).collect()
    }
}

/// Parse a diamond word: a run of `<>` / `<#>` tokens, or `e` for the empty
/// word.
pub fn parse_word(text: &str) -> Result<DiamondString, AxiomError> {
    let t = text.trim();
    if t == "e" {
        return Ok(Vec::new());
    }
    if t.is_empty() {
        return Err(AxiomError::Syntax {
            message: "empty word, write 'e' for the empty side".to_string(),
        });
    }
    let mut out = Vec::new();
    let mut rest = t;
    while !rest.is_empty() {
        if let Some(r) = rest.strip_prefix("<#>") {
            out.push(Diamond::Black);
            rest = r;
        } else if let Some(r) = rest.strip_prefix("<>") {
            out.push(Diamond::White);
            rest = r;
        } else {
            return Err(AxiomError::Syntax {
                message: format!("expected '<>' or '<#>' in word, found '{rest}'"),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AxiomError {
    #[error("axiom syntax error: {message}")]
    Syntax { message: String },
    #[error("line {line}: {message}")]
    File { line: usize, message: String },
    #[error("axioms are not composable at position {position}")]
    NotComposable { position: usize },
    #[error("a path axiom needs a single-diamond consequent, got '{0}'")]
    NotPathAxiom(String),
    #[error("no sequent rule exists for an axiom with nonempty antecedent and empty consequent")]
    UnsupportedSchema,
}

/// A path axiom: diamond word antecedent, single diamond consequent.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PathAxiom {
    pub antecedent: DiamondString,
    pub consequent: Diamond,
}

impl PathAxiom {
    pub fn new(antecedent: DiamondString, consequent: Diamond) -> PathAxiom {
        PathAxiom {
            antecedent,
            consequent,
        }
    }

    pub fn to_general(&self) -> GeneralPathAxiom {
        GeneralPathAxiom {
            antecedent: self.antecedent.clone(),
            consequent: vec![self.consequent],
        }
    }
}

impl fmt::Display for PathAxiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} -> {}",
            word_string(&self.antecedent),
            self.consequent.token()
        )
    }
}

/// A general path axiom: diamond words on both sides.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct GeneralPathAxiom {
    pub antecedent: DiamondString,
    pub consequent: DiamondString,
}

impl GeneralPathAxiom {
    pub fn as_path_axiom(&self) -> Result<PathAxiom, AxiomError> {
        if self.consequent.len() == 1 {
            Ok(PathAxiom::new(self.antecedent.clone(), self.consequent[0]))
        } else {
            Err(AxiomError::NotPathAxiom(self.to_string()))
        }
    }

    pub fn has_past(&self) -> bool {
        self.antecedent
            .iter()
            .chain(self.consequent.iter())
            .any(|d| *d == Diamond::Black)
    }
}

impl fmt::Display for GeneralPathAxiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} -> {}",
            word_string(&self.antecedent),
            word_string(&self.consequent)
        )
    }
}

/// Reverse a word and dualize every letter.
pub fn invert_word(w: &[Diamond]) -> DiamondString {
    w.iter().rev().map(|d| d.dual()).collect()
}

/// The inverse axiom: antecedent reversed and dualized, consequent dualized.
/// An involution.
pub fn inverse(f: &PathAxiom) -> PathAxiom {
    PathAxiom {
        antecedent: invert_word(&f.antecedent),
        consequent: f.consequent.dual(),
    }
}

/// The inverse of a general path axiom: both sides reversed and dualized.
pub fn inverse_general(f: &GeneralPathAxiom) -> GeneralPathAxiom {
    GeneralPathAxiom {
        antecedent: invert_word(&f.antecedent),
        consequent: invert_word(&f.consequent),
    }
}

/// Compose `f` into position `i` (0-based) of `g`'s antecedent: requires
/// `f.consequent == g.antecedent[i]`; the antecedent of `f` replaces that
/// letter.
pub fn compose(f: &PathAxiom, g: &PathAxiom, i: usize) -> Result<PathAxiom, AxiomError> {
    if i >= g.antecedent.len() || g.antecedent[i] != f.consequent {
        return Err(AxiomError::NotComposable { position: i });
    }
    let mut antecedent = g.antecedent[..i].to_vec();
    antecedent.extend(f.antecedent.iter().copied());
    antecedent.extend(g.antecedent[i + 1..].iter().copied());
    Ok(PathAxiom {
        antecedent,
        consequent: g.consequent,
    })
}

/// Parse `WORD -> WORD` over `<>`/`<#>`, with `e` for an empty side.
pub fn parse_axiom(text: &str) -> Result<GeneralPathAxiom, AxiomError> {
    let mut sides = text.splitn(2, "->");
    let lhs = sides.next().unwrap_or("");
    let rhs = sides.next().ok_or_else(|| AxiomError::Syntax {
        message: "expected 'WORD -> WORD'".to_string(),
    })?;
    Ok(GeneralPathAxiom {
        antecedent: parse_word(lhs)?,
        consequent: parse_word(rhs)?,
    })
}

/// Parse an axiom file: one axiom per line, `#` starts a comment, blank
/// lines are skipped.
pub fn parse_axiom_file(text: &str) -> Result<Vec<GeneralPathAxiom>, AxiomError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        // `#` starts a comment unless it is the middle of a `<#>` token.
        let bytes = raw.as_bytes();
        let comment = (0..bytes.len()).find(|&i| {
            bytes[i] == b'#'
                && !(i > 0 && bytes[i - 1] == b'<' && i + 1 < bytes.len() && bytes[i + 1] == b'>')
        });
        let line = match comment {
            Some(i) => &raw[..i],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let axiom = parse_axiom(line).map_err(|e| AxiomError::File {
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(axiom);
    }
    Ok(out)
}

// Nonterminal ids: 0 and 1 are the start symbols for `<>` and `<#>`;
// binarization helpers follow.
pub(crate) type Nt = u32;

pub(crate) fn nt_of(d: Diamond) -> Nt {
    match d {
        Diamond::White => 0,
        Diamond::Black => 1,
    }
}

#[derive(Debug, Clone)]
struct Production {
    lhs: Diamond,
    rhs: DiamondString,
    axiom: PathAxiom,
    /// False when this production comes from an inverted axiom that is not
    /// itself declared.
    declared: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BinRule {
    /// `lhs -> d` (identity axiom `<d>A -> <d>A`).
    Term { lhs: Nt, d: Diamond },
    /// `lhs -> ` for a production with empty antecedent.
    Eps { lhs: Nt, prod: usize },
    /// `lhs -> a`, a unit production (antecedent of length one).
    Unit { lhs: Nt, a: Nt, prod: usize },
    /// `lhs -> a b`; `pos` is the antecedent offset of `a` in `prod`.
    Pair {
        lhs: Nt,
        a: Nt,
        b: Nt,
        prod: usize,
        pos: usize,
    },
}

/// The completion grammar for an axiom set: one production per declared or
/// inverted axiom plus the identity productions, binarized for the
/// derivation engine.
#[derive(Debug, Clone)]
pub struct PathGrammar {
    productions: Vec<Production>,
    rules: Vec<BinRule>,
    nt_count: Nt,
    /// For binarization helpers, the production they belong to.
    helper_prod: BTreeMap<Nt, usize>,
    nullable: Vec<bool>,
}

/// Build the completion grammar of a path-axiom set. The set is implicitly
/// closed under inversion; identity productions are always present.
pub fn build_grammar(p: &[PathAxiom]) -> PathGrammar {
    let mut axioms: Vec<(PathAxiom, bool)> = Vec::new();
    for a in p {
        if !axioms.iter().any(|(b, _)| b == a) {
            axioms.push((a.clone(), true));
        }
    }
    for a in p {
        let inv = inverse(a);
        if !axioms.iter().any(|(b, _)| *b == inv) {
            axioms.push((inv, false));
        }
    }
    let productions: Vec<Production> = axioms
        .into_iter()
        .map(|(axiom, declared)| Production {
            lhs: axiom.consequent,
            rhs: axiom.antecedent.clone(),
            axiom,
            declared,
        })
        .collect();

    let mut rules = vec![
        BinRule::Term {
            lhs: nt_of(Diamond::White),
            d: Diamond::White,
        },
        BinRule::Term {
            lhs: nt_of(Diamond::Black),
            d: Diamond::Black,
        },
    ];
    let mut next_nt: Nt = 2;
    let mut helper_prod = BTreeMap::new();
    for (k, prod) in productions.iter().enumerate() {
        let lhs = nt_of(prod.lhs);
        match prod.rhs.len() {
            0 => rules.push(BinRule::Eps { lhs, prod: k }),
            1 => rules.push(BinRule::Unit {
                lhs,
                a: nt_of(prod.rhs[0]),
                prod: k,
            }),
            n => {
                // lhs -> s0 H0, H_i -> s_{i+1} H_{i+1}, last pair direct.
                let mut current = lhs;
                for pos in 0..n - 2 {
                    let helper = next_nt;
                    next_nt += 1;
                    helper_prod.insert(helper, k);
                    rules.push(BinRule::Pair {
                        lhs: current,
                        a: nt_of(prod.rhs[pos]),
                        b: helper,
                        prod: k,
                        pos,
                    });
                    current = helper;
                }
                rules.push(BinRule::Pair {
                    lhs: current,
                    a: nt_of(prod.rhs[n - 2]),
                    b: nt_of(prod.rhs[n - 1]),
                    prod: k,
                    pos: n - 2,
                });
            }
        }
    }

    // Nullable fixpoint over the binarized rules.
    let mut nullable = vec![false; next_nt as usize];
    loop {
        let mut changed = false;
        for r in &rules {
            match *r {
                BinRule::Eps { lhs, .. } => {
                    if !nullable[lhs as usize] {
                        nullable[lhs as usize] = true;
                        changed = true;
                    }
                }
                BinRule::Unit { lhs, a, .. } => {
                    if nullable[a as usize] && !nullable[lhs as usize] {
                        nullable[lhs as usize] = true;
                        changed = true;
                    }
                }
                BinRule::Pair { lhs, a, b, .. } => {
                    if nullable[a as usize] && nullable[b as usize] && !nullable[lhs as usize] {
                        nullable[lhs as usize] = true;
                        changed = true;
                    }
                }
                BinRule::Term { .. } => {}
            }
        }
        if !changed {
            break;
        }
    }

    PathGrammar {
        productions,
        rules,
        nt_count: next_nt,
        helper_prod,
        nullable,
    }
}

impl fmt::Display for PathGrammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in [Diamond::White, Diamond::Black] {
            writeln!(f, "S{} -> {}", d.token(), d.token())?;
        }
        for p in &self.productions {
            let rhs = if p.rhs.is_empty() {
                "e".to_string()
            } else {
                p.rhs
                    .iter()
                    .map(|d| format!("S{}", d.token()))
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            writeln!(f, "S{} -> {}", p.lhs.token(), rhs)?;
        }
        Ok(())
    }
}

/// One node of a completion parse tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseTree {
    /// A letter consumed by the identity production for its diamond.
    Identity(Diamond),
    /// An axiom production; `inverted` marks members of the inverse closure
    /// that are not themselves declared. Children expand the antecedent
    /// letters left to right.
    Axiom {
        axiom: PathAxiom,
        inverted: bool,
        children: Vec<ParseTree>,
    },
}

impl ParseTree {
    /// The word at the leaves.
    pub fn frontier(&self) -> DiamondString {
        let mut out = Vec::new();
        self.collect_frontier(&mut out);
        out
    }

    fn collect_frontier(&self, out: &mut DiamondString) {
        match self {
            ParseTree::Identity(d) => out.push(*d),
            ParseTree::Axiom { children, .. } => {
                for c in children {
                    c.collect_frontier(out);
                }
            }
        }
    }

    /// The diamond this subtree derives from.
    pub fn target(&self) -> Diamond {
        match self {
            ParseTree::Identity(d) => *d,
            ParseTree::Axiom { axiom, .. } => axiom.consequent,
        }
    }
}

// A derived fact: nonterminal `nt` spans `from` to `to` in the input graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct FactKey {
    pub nt: Nt,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Back {
    Edge { edge: usize },
    Eps { prod: usize },
    Unit { rule: usize, child: usize },
    Pair { rule: usize, left: usize, right: usize },
}

/// Saturated fact table over a labeled graph; facts keep the back pointer of
/// their first (deterministic) discovery.
pub(crate) struct FactTable {
    pub keys: Vec<FactKey>,
    pub backs: Vec<Back>,
    pub index: BTreeMap<FactKey, usize>,
}

impl FactTable {
    pub fn lookup(&self, nt: Nt, from: usize, to: usize) -> Option<usize> {
        self.index.get(&FactKey { nt, from, to }).copied()
    }
}

/// Worklist saturation of grammar facts over `edges` (triples `from`,
/// letter, `to`) on `nodes` vertices. Deterministic: seeds are enqueued in
/// sorted order and processing is FIFO, so the recorded back pointers always
/// describe the first derivation found.
pub(crate) fn saturate(
    g: &PathGrammar,
    nodes: usize,
    edges: &[(usize, Diamond, usize)],
) -> FactTable {
    let mut table = FactTable {
        keys: Vec::new(),
        backs: Vec::new(),
        index: BTreeMap::new(),
    };
    let mut queue: VecDeque<usize> = VecDeque::new();
    // by_from[nt][v] and by_to[nt][v] list fact indices for the join steps.
    let mut by_from: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); nodes]; g.nt_count as usize];
    let mut by_to: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); nodes]; g.nt_count as usize];

    let mut unit_of: Vec<Vec<usize>> = vec![Vec::new(); g.nt_count as usize];
    let mut pair_left: Vec<Vec<usize>> = vec![Vec::new(); g.nt_count as usize];
    let mut pair_right: Vec<Vec<usize>> = vec![Vec::new(); g.nt_count as usize];
    for (ri, r) in g.rules.iter().enumerate() {
        match *r {
            BinRule::Unit { a, .. } => unit_of[a as usize].push(ri),
            BinRule::Pair { a, b, .. } => {
                pair_left[a as usize].push(ri);
                pair_right[b as usize].push(ri);
            }
            _ => {}
        }
    }

    let add = |key: FactKey,
                   back: Back,
                   table: &mut FactTable,
                   queue: &mut VecDeque<usize>,
                   by_from: &mut Vec<Vec<Vec<usize>>>,
                   by_to: &mut Vec<Vec<Vec<usize>>>| {
        if table.index.contains_key(&key) {
            return;
        }
        let idx = table.keys.len();
        table.keys.push(key);
        table.backs.push(back);
        table.index.insert(key, idx);
        by_from[key.nt as usize][key.from].push(idx);
        by_to[key.nt as usize][key.to].push(idx);
        queue.push_back(idx);
    };

    // Seeds: identity productions over the edges, empty-antecedent
    // productions on every diagonal.
    for (ei, &(u, d, v)) in edges.iter().enumerate() {
        for r in &g.rules {
            if let BinRule::Term { lhs, d: rd } = *r {
                if rd == d {
                    add(
                        FactKey { nt: lhs, from: u, to: v },
                        Back::Edge { edge: ei },
                        &mut table,
                        &mut queue,
                        &mut by_from,
                        &mut by_to,
                    );
                }
            }
        }
    }
    // Empty-antecedent facts of declared productions seed now; inverted ones
    // join only after the first pass reaches a fixpoint, so a recorded back
    // pointer uses an inverted nullable leaf only when no derivation without
    // one exists. The final fact set is the same either way.
    let mut deferred: Vec<(FactKey, Back)> = Vec::new();
    for r in &g.rules {
        if let BinRule::Eps { lhs, prod } = *r {
            for v in 0..nodes {
                let key = FactKey { nt: lhs, from: v, to: v };
                let back = Back::Eps { prod };
                if g.productions[prod].declared {
                    add(key, back, &mut table, &mut queue, &mut by_from, &mut by_to);
                } else {
                    deferred.push((key, back));
                }
            }
        }
    }

    for round in 0..2 {
        while let Some(fi) = queue.pop_front() {
            let key = table.keys[fi];
            // Unit closure.
            for &ri in &unit_of[key.nt as usize].clone() {
                if let BinRule::Unit { lhs, .. } = g.rules[ri] {
                    add(
                        FactKey { nt: lhs, from: key.from, to: key.to },
                        Back::Unit { rule: ri, child: fi },
                        &mut table,
                        &mut queue,
                        &mut by_from,
                        &mut by_to,
                    );
                }
            }
            // This fact as the left part of a pair.
            for &ri in &pair_left[key.nt as usize].clone() {
                if let BinRule::Pair { lhs, b, .. } = g.rules[ri] {
                    let rights = by_from[b as usize][key.to].clone();
                    for rj in rights {
                        let rk = table.keys[rj];
                        add(
                            FactKey { nt: lhs, from: key.from, to: rk.to },
                            Back::Pair { rule: ri, left: fi, right: rj },
                            &mut table,
                            &mut queue,
                            &mut by_from,
                            &mut by_to,
                        );
                    }
                }
            }
            // This fact as the right part of a pair.
            for &ri in &pair_right[key.nt as usize].clone() {
                if let BinRule::Pair { lhs, a, .. } = g.rules[ri] {
                    let lefts = by_to[a as usize][key.from].clone();
                    for lj in lefts {
                        let lk = table.keys[lj];
                        add(
                            FactKey { nt: lhs, from: lk.from, to: key.to },
                            Back::Pair { rule: ri, left: lj, right: fi },
                            &mut table,
                            &mut queue,
                            &mut by_from,
                            &mut by_to,
                        );
                    }
                }
            }
        }
        if round == 0 {
            for (key, back) in deferred.drain(..) {
                add(key, back, &mut table, &mut queue, &mut by_from, &mut by_to);
            }
        }
    }

    table
}

impl PathGrammar {
    pub(crate) fn nullable_nt(&self, nt: Nt) -> bool {
        self.nullable[nt as usize]
    }

    fn line_graph(word: &[Diamond]) -> (usize, Vec<(usize, Diamond, usize)>) {
        let edges = word
            .iter()
            .enumerate()
            .map(|(i, d)| (i, *d, i + 1))
            .collect();
        (word.len() + 1, edges)
    }

    /// Expand a fact into the edge sequence it spans.
    pub(crate) fn witness_edges(
        &self,
        table: &FactTable,
        fact: usize,
        edges: &[(usize, Diamond, usize)],
        out: &mut Vec<usize>,
    ) {
        match table.backs[fact] {
            Back::Edge { edge } => out.push(edge),
            Back::Eps { .. } => {}
            Back::Unit { child, .. } => self.witness_edges(table, child, edges, out),
            Back::Pair { left, right, .. } => {
                self.witness_edges(table, left, edges, out);
                self.witness_edges(table, right, edges, out);
            }
        }
    }

    // Rebuild the original-production tree from binarized back pointers.
    fn tree_of_fact(&self, table: &FactTable, fact: usize) -> ParseTree {
        match table.backs[fact] {
            Back::Edge { .. } => {
                let key = table.keys[fact];
                let d = match key.nt {
                    0 => Diamond::White,
                    1 => Diamond::Black,
                    _ => unreachable!("identity facts live on start symbols"),
                };
                ParseTree::Identity(d)
            }
            Back::Eps { prod } => self.axiom_node(prod, Vec::new()),
            Back::Unit { rule, child } => {
                let prod = match self.rules[rule] {
                    BinRule::Unit { prod, .. } => prod,
                    _ => unreachable!(),
                };
                self.axiom_node(prod, vec![self.tree_of_fact(table, child)])
            }
            Back::Pair { rule, left, right } => {
                let prod = match self.rules[rule] {
                    BinRule::Pair { prod, .. } => prod,
                    _ => unreachable!(),
                };
                let mut children = vec![self.tree_of_fact(table, left)];
                self.collect_pair_tail(table, right, &mut children);
                self.axiom_node(prod, children)
            }
        }
    }

    // The right component of a pair is either a helper covering the rest of
    // the antecedent or the final symbol itself.
    fn collect_pair_tail(&self, table: &FactTable, fact: usize, children: &mut Vec<ParseTree>) {
        let key = table.keys[fact];
        if self.helper_prod.contains_key(&key.nt) {
            match table.backs[fact] {
                Back::Pair { left, right, .. } => {
                    children.push(self.tree_of_fact(table, left));
                    self.collect_pair_tail(table, right, children);
                }
                _ => unreachable!("helper facts are only derived by pair rules"),
            }
        } else {
            children.push(self.tree_of_fact(table, fact));
        }
    }

    fn axiom_node(&self, prod: usize, children: Vec<ParseTree>) -> ParseTree {
        let p = &self.productions[prod];
        ParseTree::Axiom {
            axiom: p.axiom.clone(),
            inverted: !p.declared,
            children,
        }
    }
}

/// Does `pi A -> <target> A` belong to the completion of the grammar's
/// axiom set?
pub fn completion_member(g: &PathGrammar, pi: &[Diamond], target: Diamond) -> bool {
    if pi.is_empty() {
        return g.nullable_nt(nt_of(target));
    }
    let (nodes, edges) = PathGrammar::line_graph(pi);
    let table = saturate(g, nodes, &edges);
    table.lookup(nt_of(target), 0, pi.len()).is_some()
}

/// A derivation witnessing `completion_member`, with identity leaves for
/// letters consumed as themselves and one internal node per axiom
/// composition step.
pub fn parse_tree(g: &PathGrammar, pi: &[Diamond], target: Diamond) -> Option<ParseTree> {
    let (nodes, edges) = PathGrammar::line_graph(pi);
    let table = saturate(g, nodes, &edges);
    let fact = table.lookup(nt_of(target), 0, pi.len())?;
    Some(g.tree_of_fact(&table, fact))
}

/// How the general-axiom schema degenerates for empty sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemaRow {
    /// Both sides nonempty.
    Normal,
    /// Empty antecedent: the labeled rule identifies the endpoints.
    PiEmpty,
    /// Both sides empty: the rule is a no-op.
    BothEmpty,
}

/// Printable rule schemas for one general path axiom.
#[derive(Debug, Clone)]
pub struct RuleSchemas {
    pub axiom: GeneralPathAxiom,
    pub row: SchemaRow,
    /// Nested structural rule, conclusion and premise.
    pub nested_conclusion: String,
    pub nested_premise: String,
    /// Labeled structural rule, conclusion and premise.
    pub labeled_conclusion: String,
    pub labeled_premise: String,
    /// Fresh labels of the labeled premise (the consequent chain's interior).
    pub eigenvariables: Vec<String>,
}

fn nested_chain(word: &[Diamond]) -> String {
    let mut s = String::from("Y");
    for d in word.iter().rev() {
        let brace = match d {
            Diamond::White => "o",
            Diamond::Black => "b",
        };
        s = format!("{brace}{{{s}}}");
    }
    format!("X, {s}")
}

fn labeled_chain(word: &[Diamond], from: &str, to: &str, prefix: &str) -> (Vec<String>, Vec<String>) {
    let n = word.len();
    let mut names = vec![from.to_string()];
    for i in 1..n {
        names.push(format!("{prefix}{i}"));
    }
    names.push(to.to_string());
    let mut atoms = Vec::new();
    for (i, d) in word.iter().enumerate() {
        let (a, b) = (&names[i], &names[i + 1]);
        atoms.push(match d {
            Diamond::White => format!("R({a},{b})"),
            Diamond::Black => format!("R({b},{a})"),
        });
    }
    (atoms, names[1..n].to_vec())
}

/// The nested and labeled structural rule schemas induced by a general path
/// axiom. Errors on a nonempty antecedent with empty consequent, which no
/// rule of either calculus covers; when both sides are empty the rule is a
/// recorded no-op.
pub fn rule_schemas(axiom: &GeneralPathAxiom) -> Result<RuleSchemas, AxiomError> {
    let n = axiom.antecedent.len();
    let m = axiom.consequent.len();
    let row = match (n, m) {
        (0, 0) => SchemaRow::BothEmpty,
        (0, _) => SchemaRow::PiEmpty,
        (_, 0) => return Err(AxiomError::UnsupportedSchema),
        _ => SchemaRow::Normal,
    };
    let nested_conclusion = if n == 0 {
        "X, Y".to_string()
    } else {
        nested_chain(&axiom.antecedent)
    };
    let nested_premise = if m == 0 {
        "X, Y".to_string()
    } else {
        nested_chain(&axiom.consequent)
    };
    let (to, pi_part) = if n == 0 {
        ("x", Vec::new())
    } else {
        let (atoms, _) = labeled_chain(&axiom.antecedent, "x", "y", "w");
        ("y", atoms)
    };
    let (sigma_part, eigen) = if m == 0 {
        (Vec::new(), Vec::new())
    } else {
        labeled_chain(&axiom.consequent, "x", to, "u")
    };
    let mut concl_items = vec!["R".to_string()];
    concl_items.extend(pi_part.clone());
    concl_items.push("Gamma".to_string());
    let mut prem_items = vec!["R".to_string()];
    prem_items.extend(pi_part);
    prem_items.extend(sigma_part);
    prem_items.push("Gamma".to_string());
    Ok(RuleSchemas {
        axiom: axiom.clone(),
        row,
        nested_conclusion,
        nested_premise,
        labeled_conclusion: concl_items.join(", "),
        labeled_premise: prem_items.join(", "),
        eigenvariables: eigen,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Diamond::{Black as B, White as W};

    fn ax(text: &str) -> PathAxiom {
        parse_axiom(text).unwrap().as_path_axiom().unwrap()
    }

    #[test]
    fn parse_and_print_axioms() {
        assert_eq!(ax("<><> -> <>").to_string(), "<><> -> <>");
        assert_eq!(ax("e -> <>").antecedent, Vec::<Diamond>::new());
        assert_eq!(ax("<#><> -> <#>").antecedent, vec![B, W]);
        assert!(parse_axiom("<> ->").is_err());
        assert!(parse_axiom("<x> -> <>").is_err());
    }

    #[test]
    fn axiom_file_reports_line_numbers() {
        let good = "## comment\n<><> -> <>\n\n<#> -> <> # symmetry\n";
        let axs = parse_axiom_file(good).unwrap();
        assert_eq!(axs.len(), 2);
        let bad = "<><> -> <>\nnope\n";
        match parse_axiom_file(bad) {
            Err(AxiomError::File { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected file error, got {other:?}"),
        }
    }

    #[test]
    fn inverse_reverses_and_dualizes() {
        let f = ax("<><> -> <#>");
        assert_eq!(inverse(&f), ax("<#><#> -> <>"));
        let g = ax("<#><><> -> <#>");
        assert_eq!(inverse(&g), ax("<#><#><> -> <>"));
        for a in ["<><> -> <>", "<#> -> <>", "e -> <#>", "<><#><> -> <#>"] {
            let f = ax(a);
            assert_eq!(inverse(&inverse(&f)), f);
        }
    }

    #[test]
    fn compose_substitutes_at_a_position() {
        // (<><> -> <#>) composed into position 0 of (<#><> -> <>).
        let f = ax("<><> -> <#>");
        let g = ax("<#><> -> <>");
        assert_eq!(compose(&f, &g, 0).unwrap(), ax("<><><> -> <>"));
        // (<#><><> -> <#>) composed into position 1 of (<><#> -> <>).
        let f = ax("<#><><> -> <#>");
        let g = ax("<><#> -> <>");
        assert_eq!(compose(&f, &g, 1).unwrap(), ax("<><#><><> -> <>"));
        assert_eq!(
            compose(&f, &g, 0),
            Err(AxiomError::NotComposable { position: 0 })
        );
        assert_eq!(
            compose(&f, &g, 2),
            Err(AxiomError::NotComposable { position: 2 })
        );
    }

    #[test]
    fn identity_axioms_are_always_members() {
        let g = build_grammar(&[]);
        assert!(completion_member(&g, &[W], W));
        assert!(completion_member(&g, &[B], B));
        assert!(!completion_member(&g, &[W], B));
        assert!(!completion_member(&g, &[], W));
    }

    #[test]
    fn transitivity_completion_goldens() {
        let g = build_grammar(&[ax("<><> -> <>")]);
        assert!(completion_member(&g, &[W, W], W));
        assert!(completion_member(&g, &[W, W, W], W));
        assert!(completion_member(&g, &[W, W, W, W], W));
        // The inverse axiom and its iterates.
        assert!(completion_member(&g, &[B, B], B));
        assert!(completion_member(&g, &[B, B, B], B));
        assert!(!completion_member(&g, &[W, B], W));
        assert!(!completion_member(&g, &[W, W], B));
    }

    #[test]
    fn mixed_completion_golden() {
        // With <><#><> -> <> and <><> -> <#>, the word <><><><> reaches <>.
        let g = build_grammar(&[ax("<><#><> -> <>"), ax("<><> -> <#>")]);
        assert!(completion_member(&g, &[W, W, W, W], W));
    }

    #[test]
    fn empty_antecedent_axioms_derive_empty_words() {
        let g = build_grammar(&[ax("e -> <>")]);
        assert!(completion_member(&g, &[], W));
        // Inverse closure gives the black version too.
        assert!(completion_member(&g, &[], B));
        assert!(!completion_member(&g, &[W], B));
    }

    #[test]
    fn grammar_of_p_and_of_p_with_inverses_agree() {
        let p = vec![ax("<><> -> <>"), ax("<#> -> <>")];
        let mut with_inv = p.clone();
        with_inv.extend(p.iter().map(inverse));
        let g1 = build_grammar(&p);
        let g2 = build_grammar(&with_inv);
        let mut words: Vec<Vec<Diamond>> = vec![vec![]];
        for _ in 0..5 {
            let mut next = Vec::new();
            for w in &words {
                for d in [W, B] {
                    let mut w2 = w.clone();
                    w2.push(d);
                    next.push(w2);
                }
            }
            words.extend(next);
        }
        for w in &words {
            for d in [W, B] {
                assert_eq!(
                    completion_member(&g1, w, d),
                    completion_member(&g2, w, d),
                    "disagreement on {} -> {}",
                    word_string(w),
                    d.token()
                );
            }
        }
    }

    #[test]
    fn parse_tree_frontier_and_leaves() {
        let g = build_grammar(&[ax("<><> -> <>")]);
        let t = parse_tree(&g, &[W, W, W], W).unwrap();
        assert_eq!(t.frontier(), vec![W, W, W]);
        assert_eq!(t.target(), W);
        // Root must be the transitivity production with two children.
        match &t {
            ParseTree::Axiom { axiom, inverted, children } => {
                assert_eq!(*axiom, ax("<><> -> <>"));
                assert!(!inverted);
                assert_eq!(children.len(), 2);
            }
            other => panic!("unexpected root {other:?}"),
        }
        // An inverse-only derivation is marked inverted.
        let t = parse_tree(&g, &[B, B], B).unwrap();
        match &t {
            ParseTree::Axiom { axiom, inverted, .. } => {
                assert_eq!(*axiom, ax("<#><#> -> <#>"));
                assert!(*inverted);
            }
            other => panic!("unexpected root {other:?}"),
        }
        assert!(parse_tree(&g, &[W, B], W).is_none());
    }

    #[test]
    fn schemas_for_a_two_sided_axiom() {
        let axiom = parse_axiom("<#><> -> <><#>").unwrap();
        let s = rule_schemas(&axiom).unwrap();
        assert_eq!(s.row, SchemaRow::Normal);
        assert_eq!(s.nested_conclusion, "X, b{o{Y}}");
        assert_eq!(s.nested_premise, "X, o{b{Y}}");
        assert_eq!(s.labeled_conclusion, "R, R(w1,x), R(w1,y), Gamma");
        assert_eq!(
            s.labeled_premise,
            "R, R(w1,x), R(w1,y), R(x,u1), R(y,u1), Gamma"
        );
        assert_eq!(s.eigenvariables, vec!["u1"]);
    }

    #[test]
    fn schemas_for_degenerate_rows() {
        let refl = parse_axiom("e -> <>").unwrap();
        let s = rule_schemas(&refl).unwrap();
        assert_eq!(s.row, SchemaRow::PiEmpty);
        assert_eq!(s.labeled_premise, "R, R(x,x), Gamma");
        assert!(s.eigenvariables.is_empty());

        let degenerate = parse_axiom("<> -> e").unwrap();
        assert!(matches!(
            rule_schemas(&degenerate),
            Err(AxiomError::UnsupportedSchema)
        ));

        let noop = parse_axiom("e -> e").unwrap();
        assert_eq!(rule_schemas(&noop).unwrap().row, SchemaRow::BothEmpty);
    }
}
