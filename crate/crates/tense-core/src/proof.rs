//! Proof objects, the rule-application kernel, and independent checkers for
//! the four calculi: shallow nested, deep nested, and the two labeled
//! systems (structural-rule and propagation-rule extensions).
//!
//! A proof stores its conclusion at every node; the checker recomputes each
//! rule's premises with `apply_rule` and compares them to the stored ones up
//! to renaming of node ids, so files can be re-checked without trusting the
//! producer. Propagation witnesses are likewise re-verified against the
//! axiom grammar, and fresh-label side conditions are enforced against the
//! conclusion in which they must not occur.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::axioms::{
    build_grammar, completion_member, AxiomError, GeneralPathAxiom, PathAxiom, PathGrammar,
};
use crate::formula::{Diamond, Formula, FormulaError};
use crate::polytree::is_polytree_sequent;
use crate::propagation::{
    path_string, pg_of_labeled, pg_of_nested, PropPath, PropagationError,
};
use crate::sequent::{
    labeled_equal, nested_equal, nested_match_ids, parse_labeled, parse_nested, substitute,
    Label, LabeledSequent, NestedSequent, SequentError,
};

#[derive(Debug, Error)]
pub enum ProofError {
    #[error("proof syntax error: {0}")]
    Syntax(String),
    #[error("unknown rule '{0}'")]
    UnknownRule(String),
    #[error("missing rule parameter '{0}'")]
    MissingParam(&'static str),
    #[error("rule not applicable: {0}")]
    RuleShape(String),
    #[error("substitution premises cannot be computed forward; check the stored premise")]
    NotForward,
    #[error("{0}")]
    Unsupported(String),
    #[error("axiom set does not fit the calculus: {0}")]
    AxiomClass(String),
    #[error(transparent)]
    Sequent(#[from] SequentError),
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Axiom(#[from] AxiomError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
}

/// Rule names across all four calculi. Shared names (`id`, `or`, `and`,
/// `c`, `w`, `wbox`, `bbox`) address the root in the shallow calculus and a
/// named node in the deep one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[allow(missing_docs)]
pub enum RuleId {
    Id,
    Or,
    And,
    C,
    W,
    Rf,
    Rp,
    BBox,
    WBox,
    BDia,
    WDia,
    Gp,
    Path,
    Dia1,
    Dia2,
    BDia1,
    BDia2,
    Dp,
    LOr,
    LAnd,
    LBox,
    LBBox,
    LDia,
    LBDia,
    LGp,
    LPath,
    LProp,
    LW,
    LC,
    LS,
    /// An open assumption, only accepted by `check_with_assumptions`.
    Hyp,
}

impl RuleId {
    pub fn token(self) -> &'static str {
        match self {
            RuleId::Id => "id",
            RuleId::Or => "or",
            RuleId::And => "and",
            RuleId::C => "c",
            RuleId::W => "w",
            RuleId::Rf => "rf",
            RuleId::Rp => "rp",
            RuleId::BBox => "bbox",
            RuleId::WBox => "wbox",
            RuleId::BDia => "bdia",
            RuleId::WDia => "wdia",
            RuleId::Gp => "gp",
            RuleId::Path => "path",
            RuleId::Dia1 => "dia1",
            RuleId::Dia2 => "dia2",
            RuleId::BDia1 => "bdia1",
            RuleId::BDia2 => "bdia2",
            RuleId::Dp => "dp",
            RuleId::LOr => "l_or",
            RuleId::LAnd => "l_and",
            RuleId::LBox => "l_box",
            RuleId::LBBox => "l_bbox",
            RuleId::LDia => "l_dia",
            RuleId::LBDia => "l_bdia",
            RuleId::LGp => "l_gp",
            RuleId::LPath => "l_path",
            RuleId::LProp => "l_prop",
            RuleId::LW => "l_w",
            RuleId::LC => "l_c",
            RuleId::LS => "l_s",
            RuleId::Hyp => "hyp",
        }
    }

    pub fn parse(token: &str) -> Result<RuleId, ProofError> {
        Ok(match token {
            "id" => RuleId::Id,
            "or" => RuleId::Or,
            "and" => RuleId::And,
            "c" => RuleId::C,
            "w" => RuleId::W,
            "rf" => RuleId::Rf,
            "rp" => RuleId::Rp,
            "bbox" => RuleId::BBox,
            "wbox" => RuleId::WBox,
            "bdia" => RuleId::BDia,
            "wdia" => RuleId::WDia,
            "gp" => RuleId::Gp,
            "path" => RuleId::Path,
            "dia1" => RuleId::Dia1,
            "dia2" => RuleId::Dia2,
            "bdia1" => RuleId::BDia1,
            "bdia2" => RuleId::BDia2,
            "dp" => RuleId::Dp,
            "l_or" => RuleId::LOr,
            "l_and" => RuleId::LAnd,
            "l_box" => RuleId::LBox,
            "l_bbox" => RuleId::LBBox,
            "l_dia" => RuleId::LDia,
            "l_bdia" => RuleId::LBDia,
            "l_gp" => RuleId::LGp,
            "l_path" => RuleId::LPath,
            "l_prop" => RuleId::LProp,
            "l_w" => RuleId::LW,
            "l_c" => RuleId::LC,
            "l_s" => RuleId::LS,
            "hyp" => RuleId::Hyp,
            other => return Err(ProofError::UnknownRule(other.to_string())),
        })
    }

    /// True for rules that operate on labeled sequents.
    pub fn is_labeled(self) -> bool {
        matches!(
            self,
            RuleId::LOr
                | RuleId::LAnd
                | RuleId::LBox
                | RuleId::LBBox
                | RuleId::LDia
                | RuleId::LBDia
                | RuleId::LGp
                | RuleId::LPath
                | RuleId::LProp
                | RuleId::LW
                | RuleId::LC
                | RuleId::LS
        )
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// The four checkable systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[allow(missing_docs)]
pub enum System {
    SktNestSt,
    DktDeepPr,
    LktLabSt,
    LktLabPr,
}

impl System {
    pub fn token(self) -> &'static str {
        match self {
            System::SktNestSt => "skt",
            System::DktDeepPr => "dkt",
            System::LktLabSt => "lkt-st",
            System::LktLabPr => "lkt-pr",
        }
    }
}

/// A calculus: a system, its axiom extension, and the optional restriction
/// to the future-only fragment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CalculusId {
    pub system: System,
    pub axioms: Vec<GeneralPathAxiom>,
    pub modal_only: bool,
}

impl CalculusId {
    pub fn new(
        system: System,
        axioms: Vec<GeneralPathAxiom>,
    ) -> Result<CalculusId, ProofError> {
        if matches!(system, System::DktDeepPr | System::LktLabPr) {
            for a in &axioms {
                if a.consequent.len() != 1 {
                    return Err(ProofError::AxiomClass(format!(
                        "'{a}' is not a path axiom; {} takes path axioms only",
                        system.token()
                    )));
                }
            }
        }
        Ok(CalculusId {
            system,
            axioms,
            modal_only: false,
        })
    }

    pub fn skt(axioms: Vec<GeneralPathAxiom>) -> CalculusId {
        CalculusId::new(System::SktNestSt, axioms).expect("shallow systems take any axioms")
    }

    pub fn dkt(axioms: Vec<GeneralPathAxiom>) -> Result<CalculusId, ProofError> {
        CalculusId::new(System::DktDeepPr, axioms)
    }

    pub fn lkt_st(axioms: Vec<GeneralPathAxiom>) -> CalculusId {
        CalculusId::new(System::LktLabSt, axioms).expect("labeled structural takes any axioms")
    }

    pub fn lkt_pr(axioms: Vec<GeneralPathAxiom>) -> Result<CalculusId, ProofError> {
        CalculusId::new(System::LktLabPr, axioms)
    }

    /// Restrict to the future fragment: past rules are rejected and axioms
    /// must mention `<>` only.
    pub fn modal_fragment(mut self) -> Result<CalculusId, ProofError> {
        for a in &self.axioms {
            if a.has_past() {
                return Err(ProofError::AxiomClass(format!(
                    "'{a}' mentions <#>, not available in the future fragment"
                )));
            }
        }
        self.modal_only = true;
        Ok(self)
    }

    /// The declared axioms as path axioms; errors when one is general.
    pub fn path_axioms(&self) -> Result<Vec<PathAxiom>, ProofError> {
        self.axioms
            .iter()
            .map(|a| a.as_path_axiom().map_err(ProofError::from))
            .collect()
    }

    /// The completion grammar of the declared path axioms.
    pub fn grammar(&self) -> Result<PathGrammar, ProofError> {
        Ok(build_grammar(&self.path_axioms()?))
    }

    pub fn has_axiom(&self, a: &GeneralPathAxiom) -> bool {
        self.axioms.contains(a)
    }
}

/// A sequent of either shape.
#[derive(Debug, Clone, PartialEq, Eq)]
#[allow(missing_docs)]
pub enum Sequent {
    Nested(NestedSequent),
    Labeled(LabeledSequent),
}

impl Sequent {
    pub fn as_nested(&self) -> Result<&NestedSequent, ProofError> {
        match self {
            Sequent::Nested(x) => Ok(x),
            Sequent::Labeled(_) => Err(ProofError::RuleShape(
                "rule needs a nested sequent".to_string(),
            )),
        }
    }

    pub fn as_labeled(&self) -> Result<&LabeledSequent, ProofError> {
        match self {
            Sequent::Labeled(s) => Ok(s),
            Sequent::Nested(_) => Err(ProofError::RuleShape(
                "rule needs a labeled sequent".to_string(),
            )),
        }
    }

    /// Sequents equal up to node-id renaming (nested) or exactly as
    /// formula/atom multisets (labeled).
    pub fn equivalent(&self, other: &Sequent) -> bool {
        match (self, other) {
            (Sequent::Nested(a), Sequent::Nested(b)) => nested_equal(a, b),
            (Sequent::Labeled(a), Sequent::Labeled(b)) => labeled_equal(a, b),
            _ => false,
        }
    }
}

impl fmt::Display for Sequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sequent::Nested(x) => write!(f, "{x}"),
            Sequent::Labeled(s) => write!(f, "{s}"),
        }
    }
}

/// Rule parameters; each rule reads the fields it needs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Params {
    /// Initial rules: the atom of the dual literal pair.
    pub atom: Option<String>,
    /// Principal formula.
    pub formula: Option<Formula>,
    /// Nested structure for (c)/(w) and for the `Y` of a structural rule
    /// with empty antecedent.
    pub structure: Option<NestedSequent>,
    /// Labeled part for l_w / l_c.
    pub part: Option<LabeledSequent>,
    /// A child node id: display rules, shallow diamond rules, structural
    /// chain tops.
    pub child: Option<Label>,
    /// Node address for deep rules; absent for root-level shallow rules.
    pub node: Option<Label>,
    /// Second node address: deep diamond targets, deep propagation target.
    pub target: Option<Label>,
    /// Fresh node id or label introduced by a box rule.
    pub fresh: Option<Label>,
    /// The axiom instance of a structural rule.
    pub axiom: Option<GeneralPathAxiom>,
    /// Node ids of the conclusion-side chain of a nested structural rule.
    pub concl_chain: Option<Vec<Label>>,
    /// Node ids of the premise-side chain of a nested structural rule; the
    /// last entry is the content holder and is shared with the conclusion
    /// chain when both sides are nonempty.
    pub premise_chain: Option<Vec<Label>>,
    /// Labeled principal label / substitution replacement.
    pub x: Option<Label>,
    /// Labeled second label / substitution target.
    pub y: Option<Label>,
    /// Interior labels of the antecedent chain of a labeled structural rule.
    pub pi_labels: Option<Vec<Label>>,
    /// Interior labels of the consequent chain (the eigenvariables).
    pub sigma_labels: Option<Vec<Label>>,
    /// Propagation witness.
    pub path: Option<PropPath>,
}

macro_rules! need {
    ($params:expr, $field:ident) => {
        $params
            .$field
            .as_ref()
            .ok_or(ProofError::MissingParam(stringify!($field)))?
    };
}

/// One proof node: conclusion, rule instance, premise subproofs.
#[derive(Debug, Clone, PartialEq, Eq)]
#[allow(missing_docs)]
pub struct Proof {
    pub conclusion: Sequent,
    pub rule: RuleId,
    pub params: Params,
    pub premises: Vec<Proof>,
}

impl Proof {
    pub fn hyp(conclusion: Sequent) -> Proof {
        Proof {
            conclusion,
            rule: RuleId::Hyp,
            params: Params::default(),
            premises: Vec::new(),
        }
    }

    pub fn step(
        conclusion: Sequent,
        rule: RuleId,
        params: Params,
        premises: Vec<Proof>,
    ) -> Proof {
        Proof {
            conclusion,
            rule,
            params,
            premises,
        }
    }

    /// Number of proof nodes.
    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(Proof::size).sum::<usize>()
    }

    /// Tree height in rule steps.
    pub fn height(&self) -> usize {
        1 + self
            .premises
            .iter()
            .map(Proof::height)
            .max()
            .unwrap_or(0)
    }

    /// How often each rule occurs.
    pub fn rule_counts(&self) -> BTreeMap<RuleId, usize> {
        let mut out = BTreeMap::new();
        fn walk(p: &Proof, out: &mut BTreeMap<RuleId, usize>) {
            *out.entry(p.rule).or_insert(0) += 1;
            for q in &p.premises {
                walk(q, out);
            }
        }
        walk(self, &mut out);
        out
    }

    /// Replace every open assumption equivalent to `target` by `sub`.
    pub fn graft(mut self, target: &Sequent, sub: &Proof) -> Proof {
        if self.rule == RuleId::Hyp && self.conclusion.equivalent(target) {
            return sub.clone();
        }
        self.premises = self
            .premises
            .into_iter()
            .map(|p| p.graft(target, sub))
            .collect();
        self
    }
}

fn take_formula(n: &mut NestedSequent, f: &Formula) -> Result<(), ProofError> {
    match n.formulas.iter().position(|g| g == f) {
        Some(i) => {
            n.formulas.remove(i);
            Ok(())
        }
        None => Err(ProofError::RuleShape(format!(
            "formula '{f}' not found at node '{}'",
            n.id
        ))),
    }
}

fn diamond_parts(f: &Formula) -> Option<(Diamond, &Formula)> {
    match f {
        Formula::Dia(a) => Some((Diamond::White, a)),
        Formula::BDia(a) => Some((Diamond::Black, a)),
        _ => None,
    }
}

fn box_parts(f: &Formula) -> Option<(Diamond, &Formula)> {
    match f {
        Formula::Box_(a) => Some((Diamond::White, a)),
        Formula::BBox(a) => Some((Diamond::Black, a)),
        _ => None,
    }
}

// Polarity of the structure holding a chain letter: `o` for `<>`.
fn polarity_of(d: Diamond) -> Diamond {
    d
}

// Deterministically rename a contraction copy away from ids in use.
fn relabel_copy(n: &mut NestedSequent, used: &mut BTreeSet<Label>) {
    let mut id = n.id.clone();
    loop {
        id.push_str("_c");
        if !used.contains(&id) {
            break;
        }
    }
    used.insert(id.clone());
    n.id = id;
    for (_, c) in &mut n.children {
        relabel_copy(c, used);
    }
}

// Locate a structural-rule chain in `root`: `top` is the root child where
// it starts; intermediate nodes carry no formulas and exactly one child.
// Returns the chain ids (last = content holder) and the content node.
fn walk_chain<'a>(
    root: &'a NestedSequent,
    top: &str,
    word: &[Diamond],
) -> Result<(Vec<Label>, &'a NestedSequent), ProofError> {
    debug_assert!(!word.is_empty());
    let (pol, mut cur) = root
        .children
        .iter()
        .find(|(_, c)| c.id == top)
        .map(|(p, c)| (*p, c))
        .ok_or_else(|| ProofError::RuleShape(format!("no root child '{top}'")))?;
    if pol != polarity_of(word[0]) {
        return Err(ProofError::RuleShape(format!(
            "chain child '{top}' has the wrong polarity for {}",
            word[0].token()
        )));
    }
    let mut ids = vec![cur.id.clone()];
    for d in &word[1..] {
        if !cur.formulas.is_empty() || cur.children.len() != 1 {
            return Err(ProofError::RuleShape(format!(
                "chain node '{}' must be empty with one child",
                cur.id
            )));
        }
        let (pol, next) = &cur.children[0];
        if *pol != polarity_of(*d) {
            return Err(ProofError::RuleShape(format!(
                "chain node '{}' child has the wrong polarity for {}",
                cur.id,
                d.token()
            )));
        }
        cur = next;
        ids.push(cur.id.clone());
    }
    Ok((ids, cur))
}

// Build the premise-side chain: `content` sits at the last id, wrapped in
// empty nodes along `word`.
fn build_chain(word: &[Diamond], ids: &[Label], content: &NestedSequent) -> (Diamond, NestedSequent) {
    debug_assert_eq!(word.len(), ids.len());
    let mut node = content.clone();
    node.id = ids[ids.len() - 1].clone();
    for i in (1..word.len()).rev() {
        node = NestedSequent {
            id: ids[i - 1].clone(),
            formulas: Vec::new(),
            children: vec![(polarity_of(word[i]), node)],
        };
    }
    (polarity_of(word[0]), node)
}

// Relational atoms of a chain along `word` from `from` to `to` through the
// interior labels: a `<>` letter runs forward, a `<#>` letter backward.
fn chain_atoms(
    word: &[Diamond],
    from: &str,
    to: &str,
    interior: &[Label],
) -> Result<Vec<(Label, Label)>, ProofError> {
    if interior.len() + 1 != word.len() {
        return Err(ProofError::RuleShape(format!(
            "chain of {} letters needs {} interior labels, got {}",
            word.len(),
            word.len() - 1,
            interior.len()
        )));
    }
    let mut names: Vec<Label> = vec![from.to_string()];
    names.extend(interior.iter().cloned());
    names.push(to.to_string());
    Ok(word
        .iter()
        .enumerate()
        .map(|(i, d)| match d {
            Diamond::White => (names[i].clone(), names[i + 1].clone()),
            Diamond::Black => (names[i + 1].clone(), names[i].clone()),
        })
        .collect())
}

fn nested_structural(
    x: &NestedSequent,
    params: &Params,
) -> Result<Vec<Sequent>, ProofError> {
    let axiom = need!(params, axiom);
    let (pi, sigma) = (&axiom.antecedent, &axiom.consequent);
    if !pi.is_empty() && sigma.is_empty() {
        return Err(ProofError::Unsupported(format!(
            "axiom '{axiom}' has no structural rule: nonempty antecedent, empty consequent"
        )));
    }
    // Split the conclusion into context and content.
    let (mut context, content, holder) = if pi.is_empty() {
        let y = need!(params, structure).clone();
        let mut context = x.clone();
        context.subtract(&y)?;
        (context, y, None)
    } else {
        let top = need!(params, child);
        let (ids, content) = walk_chain(x, top, pi)?;
        let content = content.clone();
        let mut context = x.clone();
        context.remove_child(top).expect("chain top exists");
        (context, content, Some(ids[ids.len() - 1].clone()))
    };
    if sigma.is_empty() {
        // Content returns to the root.
        let mut y = content;
        y.id = context.id.clone();
        context.absorb(y);
        return Ok(vec![Sequent::Nested(context)]);
    }
    let ids = need!(params, premise_chain).clone();
    if ids.len() != sigma.len() {
        return Err(ProofError::RuleShape(format!(
            "premise chain needs {} ids, got {}",
            sigma.len(),
            ids.len()
        )));
    }
    if let Some(h) = &holder {
        if &ids[ids.len() - 1] != h {
            return Err(ProofError::RuleShape(
                "premise chain must keep the content holder's id".to_string(),
            ));
        }
    }
    let existing: BTreeSet<Label> = context.all_ids().into_iter().collect();
    for (k, id) in ids.iter().enumerate() {
        let is_shared_holder = holder.is_some() && k + 1 == ids.len();
        if existing.contains(id) && !is_shared_holder {
            return Err(ProofError::RuleShape(format!(
                "premise chain id '{id}' already occurs"
            )));
        }
    }
    let (pol, chain) = build_chain(sigma, &ids, &content);
    context.children.push((pol, chain));
    Ok(vec![Sequent::Nested(context)])
}

fn labeled_structural(
    s: &LabeledSequent,
    params: &Params,
) -> Result<Vec<Sequent>, ProofError> {
    let axiom = need!(params, axiom);
    let (pi, sigma) = (&axiom.antecedent, &axiom.consequent);
    if !pi.is_empty() && sigma.is_empty() {
        return Err(ProofError::Unsupported(format!(
            "axiom '{axiom}' has no structural rule: nonempty antecedent, empty consequent"
        )));
    }
    if pi.is_empty() && sigma.is_empty() {
        return Ok(vec![Sequent::Labeled(s.clone())]);
    }
    let x = need!(params, x);
    let y = if pi.is_empty() {
        // Empty antecedent identifies the endpoints.
        if let Some(y) = &params.y {
            if y != x {
                return Err(ProofError::RuleShape(
                    "an empty antecedent forces equal endpoints".to_string(),
                ));
            }
        }
        x.clone()
    } else {
        need!(params, y).clone()
    };
    if !pi.is_empty() {
        let interior = params.pi_labels.clone().unwrap_or_default();
        let atoms = chain_atoms(pi, x, &y, &interior)?;
        for a in &atoms {
            if !s.rel.contains(a) {
                return Err(ProofError::RuleShape(format!(
                    "conclusion lacks the antecedent chain atom R({},{})",
                    a.0, a.1
                )));
            }
        }
    }
    let mut premise = s.clone();
    let interior = params.sigma_labels.clone().unwrap_or_default();
    for a in chain_atoms(sigma, x, &y, &interior)? {
        premise.rel.insert(a);
    }
    Ok(vec![Sequent::Labeled(premise)])
}

/// Compute the premises a rule instance demands from its conclusion.
/// Deterministic and pure: every name in the output comes from the
/// conclusion or the params. Fresh-name side conditions and witness-word
/// membership belong to `check`, not here.
pub fn apply_rule(
    s: &Sequent,
    rule: RuleId,
    params: &Params,
) -> Result<Vec<Sequent>, ProofError> {
    match rule {
        RuleId::Hyp => Err(ProofError::RuleShape(
            "assumptions are not rule instances".to_string(),
        )),
        RuleId::LS => Err(ProofError::NotForward),

        // Initial sequents.
        RuleId::Id => {
            let atom = need!(params, atom);
            let (pos, neg) = (Formula::pos(atom), Formula::neg(atom));
            match s {
                Sequent::Nested(x) => {
                    let node = match &params.node {
                        Some(id) => x
                            .node(id)
                            .ok_or_else(|| ProofError::RuleShape(format!("no node '{id}'")))?,
                        None => x,
                    };
                    if node.formulas.contains(&pos) && node.formulas.contains(&neg) {
                        Ok(Vec::new())
                    } else {
                        Err(ProofError::RuleShape(format!(
                            "node '{}' lacks the dual pair {atom}, ~{atom}",
                            node.id
                        )))
                    }
                }
                Sequent::Labeled(l) => {
                    let x = need!(params, x);
                    if l.contains_formula(x, &pos) && l.contains_formula(x, &neg) {
                        Ok(Vec::new())
                    } else {
                        Err(ProofError::RuleShape(format!(
                            "label '{x}' lacks the dual pair {atom}, ~{atom}"
                        )))
                    }
                }
            }
        }

        // Nested propositional rules, shallow at the root or deep at a node.
        RuleId::Or | RuleId::And => {
            let x = s.as_nested()?;
            let f = need!(params, formula);
            let parts = match (rule, f) {
                (RuleId::Or, Formula::Or(a, b)) => vec![vec![(**a).clone(), (**b).clone()]],
                (RuleId::And, Formula::And(a, b)) => {
                    vec![vec![(**a).clone()], vec![(**b).clone()]]
                }
                _ => {
                    return Err(ProofError::RuleShape(format!(
                        "principal formula '{f}' does not fit rule {rule}"
                    )))
                }
            };
            let id = params.node.clone().unwrap_or_else(|| x.id.clone());
            let mut out = Vec::new();
            for new_formulas in parts {
                let mut t = x.clone();
                let node = t
                    .node_mut(&id)
                    .ok_or_else(|| ProofError::RuleShape(format!("no node '{id}'")))?;
                take_formula(node, f)?;
                node.formulas.extend(new_formulas);
                out.push(Sequent::Nested(t));
            }
            Ok(out)
        }

        // Contraction and weakening, at the root or a named node.
        RuleId::C | RuleId::W => {
            let x = s.as_nested()?;
            let y = need!(params, structure);
            let id = params.node.clone().unwrap_or_else(|| x.id.clone());
            let mut t = x.clone();
            let mut used: BTreeSet<Label> = t.all_ids().into_iter().collect();
            let node = t
                .node_mut(&id)
                .ok_or_else(|| ProofError::RuleShape(format!("no node '{id}'")))?;
            if rule == RuleId::C {
                if !node.contains_part(y) {
                    return Err(ProofError::RuleShape(format!(
                        "node '{id}' does not contain the contracted structure"
                    )));
                }
                let mut copy = y.clone();
                copy.id = node.id.clone();
                for (_, c) in &mut copy.children {
                    relabel_copy(c, &mut used);
                }
                node.absorb(copy);
            } else {
                node.subtract(y)?;
            }
            Ok(vec![Sequent::Nested(t)])
        }

        // Display rules: re-root into a child of the matching polarity.
        RuleId::Rf | RuleId::Rp => {
            let x = s.as_nested()?;
            let child = need!(params, child);
            let want = if rule == RuleId::Rf {
                Diamond::Black
            } else {
                Diamond::White
            };
            let (pol, _) = x
                .children
                .iter()
                .find(|(_, c)| &c.id == child)
                .ok_or_else(|| ProofError::RuleShape(format!("no root child '{child}'")))?;
            if *pol != want {
                return Err(ProofError::RuleShape(format!(
                    "display rule {rule} needs a {} child",
                    if want == Diamond::Black { "b" } else { "o" }
                )));
            }
            let t = x
                .reroot_into_child(child)
                .ok_or_else(|| ProofError::RuleShape(format!("no root child '{child}'")))?;
            Ok(vec![Sequent::Nested(t)])
        }

        // Box rules. Shallow (no node param): consume the principal and
        // spawn the child. Deep (node param): keep the principal.
        RuleId::WBox | RuleId::BBox => {
            let x = s.as_nested()?;
            let f = need!(params, formula);
            let fresh = need!(params, fresh);
            let want = if rule == RuleId::WBox {
                Diamond::White
            } else {
                Diamond::Black
            };
            let (letter, body) = box_parts(f).ok_or_else(|| {
                ProofError::RuleShape(format!("principal '{f}' is not a box formula"))
            })?;
            if letter != want {
                return Err(ProofError::RuleShape(format!(
                    "principal '{f}' does not fit rule {rule}"
                )));
            }
            let deep = params.node.is_some();
            let id = params.node.clone().unwrap_or_else(|| x.id.clone());
            let mut t = x.clone();
            let node = t
                .node_mut(&id)
                .ok_or_else(|| ProofError::RuleShape(format!("no node '{id}'")))?;
            if deep {
                if !node.formulas.contains(f) {
                    return Err(ProofError::RuleShape(format!(
                        "formula '{f}' not found at node '{id}'"
                    )));
                }
            } else {
                take_formula(node, f)?;
            }
            node.children.push((
                want,
                NestedSequent {
                    id: fresh.clone(),
                    formulas: vec![body.clone()],
                    children: Vec::new(),
                },
            ));
            Ok(vec![Sequent::Nested(t)])
        }

        // Shallow diamond rules: propagate into an existing root child.
        RuleId::WDia | RuleId::BDia => {
            let x = s.as_nested()?;
            let f = need!(params, formula);
            let child = need!(params, child);
            let want = if rule == RuleId::WDia {
                Diamond::White
            } else {
                Diamond::Black
            };
            let (letter, body) = diamond_parts(f).ok_or_else(|| {
                ProofError::RuleShape(format!("principal '{f}' is not a diamond formula"))
            })?;
            if letter != want {
                return Err(ProofError::RuleShape(format!(
                    "principal '{f}' does not fit rule {rule}"
                )));
            }
            if !x.formulas.contains(f) {
                return Err(ProofError::RuleShape(format!(
                    "formula '{f}' not found at the root"
                )));
            }
            let body = body.clone();
            let mut t = x.clone();
            let (pol, node) = t
                .children
                .iter_mut()
                .find(|(_, c)| &c.id == child)
                .ok_or_else(|| ProofError::RuleShape(format!("no root child '{child}'")))?;
            if *pol != want {
                return Err(ProofError::RuleShape(format!(
                    "rule {rule} propagates into a {} child",
                    if want == Diamond::Black { "b" } else { "o" }
                )));
            }
            node.formulas.push(body);
            Ok(vec![Sequent::Nested(t)])
        }

        // Deep diamond rules: into a child, or up to the parent.
        RuleId::Dia1 | RuleId::BDia1 | RuleId::Dia2 | RuleId::BDia2 => {
            let x = s.as_nested()?;
            let f = need!(params, formula);
            let at = need!(params, node);
            let target = need!(params, target);
            let down = matches!(rule, RuleId::Dia1 | RuleId::BDia1);
            let want = if matches!(rule, RuleId::Dia1 | RuleId::Dia2) {
                Diamond::White
            } else {
                Diamond::Black
            };
            let (letter, body) = diamond_parts(f).ok_or_else(|| {
                ProofError::RuleShape(format!("principal '{f}' is not a diamond formula"))
            })?;
            if letter != want {
                return Err(ProofError::RuleShape(format!(
                    "principal '{f}' does not fit rule {rule}"
                )));
            }
            let holder = x
                .node(at)
                .ok_or_else(|| ProofError::RuleShape(format!("no node '{at}'")))?;
            if !holder.formulas.contains(f) {
                return Err(ProofError::RuleShape(format!(
                    "formula '{f}' not found at node '{at}'"
                )));
            }
            if down {
                // The target is a child of `at` whose polarity matches the
                // diamond's own letter.
                let ok = holder
                    .children
                    .iter()
                    .any(|(pol, c)| &c.id == target && *pol == want);
                if !ok {
                    return Err(ProofError::RuleShape(format!(
                        "node '{target}' is not a matching child of '{at}'"
                    )));
                }
            } else {
                // The target is the parent, and `at` hangs below it with the
                // dual polarity: a future diamond climbs out of a `b` child.
                match x.parent_of(at) {
                    Some((p, pol)) if p.id == *target && pol == want.dual() => {}
                    _ => {
                        return Err(ProofError::RuleShape(format!(
                            "node '{at}' is not a matching child of '{target}'"
                        )))
                    }
                }
            }
            let body = body.clone();
            let mut t = x.clone();
            t.node_mut(target)
                .expect("target verified above")
                .formulas
                .push(body);
            Ok(vec![Sequent::Nested(t)])
        }

        // Deep propagation along a grammar witness.
        RuleId::Dp => {
            let x = s.as_nested()?;
            let f = need!(params, formula);
            let at = need!(params, node);
            let target = need!(params, target);
            let path = need!(params, path);
            let (_, body) = diamond_parts(f).ok_or_else(|| {
                ProofError::RuleShape(format!("principal '{f}' is not a diamond formula"))
            })?;
            let holder = x
                .node(at)
                .ok_or_else(|| ProofError::RuleShape(format!("no node '{at}'")))?;
            if !holder.formulas.contains(f) {
                return Err(ProofError::RuleShape(format!(
                    "formula '{f}' not found at node '{at}'"
                )));
            }
            if path.start() != at || path.end() != target {
                return Err(ProofError::RuleShape(
                    "witness path endpoints do not match the rule".to_string(),
                ));
            }
            if !path.valid_in(&pg_of_nested(x)) {
                return Err(ProofError::RuleShape(
                    "witness path leaves the propagation graph".to_string(),
                ));
            }
            let body = body.clone();
            let mut t = x.clone();
            t.node_mut(target)
                .ok_or_else(|| ProofError::RuleShape(format!("no node '{target}'")))?
                .formulas
                .push(body);
            Ok(vec![Sequent::Nested(t)])
        }

        // Labeled propositional rules.
        RuleId::LOr | RuleId::LAnd => {
            let l = s.as_labeled()?;
            let f = need!(params, formula);
            let x = need!(params, x);
            if !l.contains_formula(x, f) {
                return Err(ProofError::RuleShape(format!(
                    "formula '{f}' not found at label '{x}'"
                )));
            }
            let parts = match (rule, f) {
                (RuleId::LOr, Formula::Or(a, b)) => vec![vec![(**a).clone(), (**b).clone()]],
                (RuleId::LAnd, Formula::And(a, b)) => {
                    vec![vec![(**a).clone()], vec![(**b).clone()]]
                }
                _ => {
                    return Err(ProofError::RuleShape(format!(
                        "principal formula '{f}' does not fit rule {rule}"
                    )))
                }
            };
            let mut out = Vec::new();
            for new_formulas in parts {
                let mut t = l.clone();
                t.remove_formula(x, f);
                for g in new_formulas {
                    t.lformulas.push((x.clone(), g));
                }
                out.push(Sequent::Labeled(t));
            }
            Ok(out)
        }

        // Labeled box rules: consume the principal, add the accessibility
        // atom and the body at the fresh label.
        RuleId::LBox | RuleId::LBBox => {
            let l = s.as_labeled()?;
            let f = need!(params, formula);
            let x = need!(params, x);
            let fresh = need!(params, fresh);
            let want = if rule == RuleId::LBox {
                Diamond::White
            } else {
                Diamond::Black
            };
            let (letter, body) = box_parts(f).ok_or_else(|| {
                ProofError::RuleShape(format!("principal '{f}' is not a box formula"))
            })?;
            if letter != want {
                return Err(ProofError::RuleShape(format!(
                    "principal '{f}' does not fit rule {rule}"
                )));
            }
            if !l.contains_formula(x, f) {
                return Err(ProofError::RuleShape(format!(
                    "formula '{f}' not found at label '{x}'"
                )));
            }
            let mut t = l.clone();
            t.remove_formula(x, f);
            let atom = if rule == RuleId::LBox {
                (x.clone(), fresh.clone())
            } else {
                (fresh.clone(), x.clone())
            };
            t.rel.insert(atom);
            t.lformulas.push((fresh.clone(), body.clone()));
            Ok(vec![Sequent::Labeled(t)])
        }

        // Labeled diamond rules: propagate along an existing atom.
        RuleId::LDia | RuleId::LBDia => {
            let l = s.as_labeled()?;
            let f = need!(params, formula);
            let x = need!(params, x);
            let y = need!(params, y);
            let want = if rule == RuleId::LDia {
                Diamond::White
            } else {
                Diamond::Black
            };
            let (letter, body) = diamond_parts(f).ok_or_else(|| {
                ProofError::RuleShape(format!("principal '{f}' is not a diamond formula"))
            })?;
            if letter != want {
                return Err(ProofError::RuleShape(format!(
                    "principal '{f}' does not fit rule {rule}"
                )));
            }
            if !l.contains_formula(x, f) {
                return Err(ProofError::RuleShape(format!(
                    "formula '{f}' not found at label '{x}'"
                )));
            }
            let atom = if rule == RuleId::LDia {
                (x.clone(), y.clone())
            } else {
                (y.clone(), x.clone())
            };
            if !l.rel.contains(&atom) {
                return Err(ProofError::RuleShape(format!(
                    "conclusion lacks the atom R({},{})",
                    atom.0, atom.1
                )));
            }
            let mut t = l.clone();
            t.lformulas.push((y.clone(), body.clone()));
            Ok(vec![Sequent::Labeled(t)])
        }

        // Structural rules from an axiom instance.
        RuleId::Gp | RuleId::Path => nested_structural(s.as_nested()?, params),
        RuleId::LGp | RuleId::LPath => labeled_structural(s.as_labeled()?, params),

        // Labeled propagation along a grammar witness.
        RuleId::LProp => {
            let l = s.as_labeled()?;
            let f = need!(params, formula);
            let x = need!(params, x);
            let y = need!(params, y);
            let path = need!(params, path);
            let (_, body) = diamond_parts(f).ok_or_else(|| {
                ProofError::RuleShape(format!("principal '{f}' is not a diamond formula"))
            })?;
            if !l.contains_formula(x, f) {
                return Err(ProofError::RuleShape(format!(
                    "formula '{f}' not found at label '{x}'"
                )));
            }
            if path.start() != x || path.end() != y {
                return Err(ProofError::RuleShape(
                    "witness path endpoints do not match the rule".to_string(),
                ));
            }
            if !path.valid_in(&pg_of_labeled(l)) {
                return Err(ProofError::RuleShape(
                    "witness path leaves the propagation graph".to_string(),
                ));
            }
            let mut t = l.clone();
            t.lformulas.push((y.clone(), body.clone()));
            Ok(vec![Sequent::Labeled(t)])
        }

        // Labeled weakening and contraction.
        RuleId::LW => {
            let l = s.as_labeled()?;
            let part = need!(params, part);
            let mut t = l.clone();
            t.subtract(part)?;
            Ok(vec![Sequent::Labeled(t)])
        }
        RuleId::LC => {
            let l = s.as_labeled()?;
            let part = need!(params, part);
            if !part.rel.is_empty() {
                return Err(ProofError::RuleShape(
                    "contraction duplicates formulas only, not relational atoms".to_string(),
                ));
            }
            if !l.contains_part(part) {
                return Err(ProofError::RuleShape(
                    "conclusion does not contain the contracted formulas".to_string(),
                ));
            }
            let mut t = l.clone();
            t.lformulas.extend(part.lformulas.clone());
            Ok(vec![Sequent::Labeled(t)])
        }
    }
}

/// A single finding at one proof node.
#[derive(Debug, Clone)]
pub struct Diagnostic {
    /// Dotted premise-index path from the root, "" for the root itself.
    pub at: String,
    pub rule: RuleId,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = if self.at.is_empty() { "root" } else { &self.at };
        write!(f, "[{at}] {}: {}", self.rule, self.message)
    }
}

/// Checker outcome: accepted iff `diagnostics` is empty.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub ok: bool,
    pub nodes: usize,
    pub assumptions: usize,
    pub rule_counts: BTreeMap<RuleId, usize>,
    pub diagnostics: Vec<Diagnostic>,
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            write!(f, "accepted: {} rule instances", self.nodes)?;
        } else {
            writeln!(f, "rejected: {} finding(s)", self.diagnostics.len())?;
            for d in &self.diagnostics {
                writeln!(f, "  {d}")?;
            }
        }
        Ok(())
    }
}

fn allowed_rules(system: System) -> &'static [RuleId] {
    match system {
        System::SktNestSt => &[
            RuleId::Id,
            RuleId::Or,
            RuleId::And,
            RuleId::C,
            RuleId::W,
            RuleId::Rf,
            RuleId::Rp,
            RuleId::WBox,
            RuleId::BBox,
            RuleId::WDia,
            RuleId::BDia,
            RuleId::Gp,
            RuleId::Path,
        ],
        System::DktDeepPr => &[
            RuleId::Id,
            RuleId::Or,
            RuleId::And,
            RuleId::C,
            RuleId::W,
            RuleId::WBox,
            RuleId::BBox,
            RuleId::Dia1,
            RuleId::Dia2,
            RuleId::BDia1,
            RuleId::BDia2,
            RuleId::Dp,
        ],
        System::LktLabSt => &[
            RuleId::Id,
            RuleId::LOr,
            RuleId::LAnd,
            RuleId::LBox,
            RuleId::LBBox,
            RuleId::LDia,
            RuleId::LBDia,
            RuleId::LGp,
            RuleId::LPath,
            RuleId::LW,
            RuleId::LC,
            RuleId::LS,
        ],
        System::LktLabPr => &[
            RuleId::Id,
            RuleId::LOr,
            RuleId::LAnd,
            RuleId::LBox,
            RuleId::LBBox,
            RuleId::LDia,
            RuleId::LBDia,
            RuleId::LProp,
            RuleId::LW,
            RuleId::LC,
            RuleId::LS,
        ],
    }
}

fn past_rules(system: System) -> &'static [RuleId] {
    match system {
        System::SktNestSt => &[RuleId::BBox, RuleId::BDia],
        System::DktDeepPr => &[RuleId::BBox, RuleId::BDia1, RuleId::BDia2],
        System::LktLabSt | System::LktLabPr => &[RuleId::LBBox, RuleId::LBDia],
    }
}

fn sequent_has_past(s: &Sequent) -> bool {
    fn nested(x: &NestedSequent) -> bool {
        x.formulas.iter().any(Formula::has_past)
            || x.children.iter().any(|(_, c)| nested(c))
    }
    match s {
        Sequent::Nested(x) => nested(x),
        Sequent::Labeled(l) => l.lformulas.iter().any(|(_, f)| f.has_past()),
    }
}

struct Checker<'a> {
    calculus: &'a CalculusId,
    grammar: Option<PathGrammar>,
    allow_hyp: bool,
    assert_polytree: bool,
    nodes: usize,
    assumptions: usize,
    rule_counts: BTreeMap<RuleId, usize>,
    diagnostics: Vec<Diagnostic>,
}

impl<'a> Checker<'a> {
    fn flag(&mut self, at: &str, rule: RuleId, message: String) {
        self.diagnostics.push(Diagnostic {
            at: at.to_string(),
            rule,
            message,
        });
    }

    // Fresh labels a rule instance introduces; they must not occur in the
    // conclusion.
    fn fresh_labels(rule: RuleId, params: &Params) -> Vec<Label> {
        match rule {
            RuleId::LBox | RuleId::LBBox => {
                params.fresh.iter().cloned().collect()
            }
            RuleId::LGp | RuleId::LPath => {
                params.sigma_labels.clone().unwrap_or_default()
            }
            _ => Vec::new(),
        }
    }

    fn check_node(&mut self, p: &Proof, at: &str) {
        self.nodes += 1;
        *self.rule_counts.entry(p.rule).or_insert(0) += 1;

        if p.rule == RuleId::Hyp {
            if self.allow_hyp {
                self.assumptions += 1;
                if !p.premises.is_empty() {
                    self.flag(at, p.rule, "assumptions take no premises".to_string());
                }
            } else {
                self.flag(
                    at,
                    p.rule,
                    "open assumption in a closed proof".to_string(),
                );
            }
            return;
        }

        let system = self.calculus.system;
        if !allowed_rules(system).contains(&p.rule) {
            self.flag(
                at,
                p.rule,
                format!("rule is not part of {}", system.token()),
            );
            return;
        }
        if self.calculus.modal_only {
            if past_rules(system).contains(&p.rule) {
                self.flag(
                    at,
                    p.rule,
                    "past rule rejected in the future fragment".to_string(),
                );
                return;
            }
            if sequent_has_past(&p.conclusion) {
                self.flag(
                    at,
                    p.rule,
                    "conclusion mentions past operators in the future fragment".to_string(),
                );
            }
        }
        // Node addressing discipline for the shared rule names.
        let shared = matches!(
            p.rule,
            RuleId::Id | RuleId::Or | RuleId::And | RuleId::C | RuleId::W | RuleId::WBox | RuleId::BBox
        );
        if shared && !p.rule.is_labeled() {
            match system {
                System::SktNestSt if p.params.node.is_some() => {
                    self.flag(at, p.rule, "shallow rules address the root only".to_string());
                    return;
                }
                System::DktDeepPr if p.params.node.is_none() => {
                    self.flag(at, p.rule, "deep rules need a node address".to_string());
                    return;
                }
                _ => {}
            }
        }
        if matches!(p.conclusion, Sequent::Labeled(_)) != (p.rule.is_labeled() || matches!(system, System::LktLabSt | System::LktLabPr)) {
            self.flag(at, p.rule, "sequent shape does not fit the rule".to_string());
            return;
        }

        // Structural axiom instances must be declared; witnesses must pass
        // the grammar.
        match p.rule {
            RuleId::Gp | RuleId::Path | RuleId::LGp | RuleId::LPath => {
                match &p.params.axiom {
                    Some(a) => {
                        if !self.calculus.has_axiom(a) {
                            self.flag(at, p.rule, format!("axiom '{a}' is not declared"));
                            return;
                        }
                        if matches!(p.rule, RuleId::Path | RuleId::LPath)
                            && a.consequent.len() != 1
                        {
                            self.flag(
                                at,
                                p.rule,
                                format!("'{a}' is not a path axiom"),
                            );
                            return;
                        }
                    }
                    None => {
                        self.flag(at, p.rule, "missing axiom instance".to_string());
                        return;
                    }
                }
            }
            RuleId::Dp | RuleId::LProp => {
                let letter = p
                    .params
                    .formula
                    .as_ref()
                    .and_then(|f| diamond_parts(f).map(|(d, _)| d));
                match (letter, &p.params.path, &self.grammar) {
                    (Some(d), Some(path), Some(g)) => {
                        if !completion_member(g, &path_string(path), d) {
                            self.flag(
                                at,
                                p.rule,
                                format!(
                                    "witness word {} is outside the completion for {}",
                                    crate::axioms::word_string(&path_string(path)),
                                    d.token()
                                ),
                            );
                            return;
                        }
                    }
                    (_, _, None) => {
                        self.flag(
                            at,
                            p.rule,
                            "propagation rules need a path-axiom grammar".to_string(),
                        );
                        return;
                    }
                    _ => {
                        self.flag(at, p.rule, "missing witness or principal".to_string());
                        return;
                    }
                }
            }
            _ => {}
        }

        // Eigenvariable side conditions.
        let fresh = Checker::fresh_labels(p.rule, &p.params);
        if !fresh.is_empty() {
            let mut seen = BTreeSet::new();
            for l in &fresh {
                if !seen.insert(l.clone()) {
                    self.flag(at, p.rule, format!("fresh label '{l}' repeated"));
                    return;
                }
            }
            if let Sequent::Labeled(concl) = &p.conclusion {
                let used = concl.labels();
                for l in &fresh {
                    if used.contains(l) {
                        self.flag(
                            at,
                            p.rule,
                            format!("eigenvariable '{l}' occurs in the conclusion"),
                        );
                        return;
                    }
                }
            }
        }
        if matches!(p.rule, RuleId::WBox | RuleId::BBox) {
            if let (Sequent::Nested(x), Some(fresh)) = (&p.conclusion, &p.params.fresh) {
                if x.all_ids().contains(fresh) {
                    self.flag(
                        at,
                        p.rule,
                        format!("fresh node id '{fresh}' occurs in the conclusion"),
                    );
                    return;
                }
            }
        }

        // Premise comparison.
        if p.rule == RuleId::LS {
            let (x, y) = match (&p.params.x, &p.params.y) {
                (Some(x), Some(y)) => (x.clone(), y.clone()),
                _ => {
                    self.flag(at, p.rule, "substitution needs labels x and y".to_string());
                    return;
                }
            };
            if p.premises.len() != 1 {
                self.flag(at, p.rule, "substitution takes one premise".to_string());
                return;
            }
            match (&p.premises[0].conclusion, &p.conclusion) {
                (Sequent::Labeled(prem), Sequent::Labeled(concl)) => {
                    if !labeled_equal(&substitute(prem, &x, &y), concl) {
                        self.flag(
                            at,
                            p.rule,
                            format!("conclusion is not the premise with '{y}' replaced by '{x}'"),
                        );
                        return;
                    }
                }
                _ => {
                    self.flag(at, p.rule, "substitution needs labeled sequents".to_string());
                    return;
                }
            }
        } else {
            let derived = match apply_rule(&p.conclusion, p.rule, &p.params) {
                Ok(d) => d,
                Err(e) => {
                    self.flag(at, p.rule, e.to_string());
                    return;
                }
            };
            if derived.len() != p.premises.len() {
                self.flag(
                    at,
                    p.rule,
                    format!(
                        "rule demands {} premise(s), proof has {}",
                        derived.len(),
                        p.premises.len()
                    ),
                );
                return;
            }
            for (k, (d, q)) in derived.iter().zip(p.premises.iter()).enumerate() {
                if !d.equivalent(&q.conclusion) {
                    self.flag(
                        at,
                        p.rule,
                        format!("premise {k} should be '{d}', proof has '{}'", q.conclusion),
                    );
                }
            }
        }

        if self.assert_polytree {
            if let Sequent::Labeled(l) = &p.conclusion {
                if !is_polytree_sequent(l) {
                    self.flag(
                        at,
                        p.rule,
                        "internal-consistency failure: non-polytree sequent in a polytree proof"
                            .to_string(),
                    );
                }
            }
        }

        for (k, q) in p.premises.iter().enumerate() {
            let child_at = if at.is_empty() {
                k.to_string()
            } else {
                format!("{at}.{k}")
            };
            self.check_node(q, &child_at);
        }
    }
}

fn run_check(p: &Proof, calculus: &CalculusId, allow_hyp: bool) -> CheckReport {
    // Propagation systems carry a grammar; structural systems have no
    // witness rules to verify.
    let grammar = calculus.grammar().ok();
    let assert_polytree = match calculus.system {
        System::LktLabPr => true,
        System::LktLabSt => calculus.axioms.is_empty(),
        _ => false,
    } && match &p.conclusion {
        Sequent::Labeled(l) => is_polytree_sequent(l),
        Sequent::Nested(_) => false,
    };
    let mut checker = Checker {
        calculus,
        grammar,
        allow_hyp,
        assert_polytree,
        nodes: 0,
        assumptions: 0,
        rule_counts: BTreeMap::new(),
        diagnostics: Vec::new(),
    };
    checker.check_node(p, "");
    CheckReport {
        ok: checker.diagnostics.is_empty(),
        nodes: checker.nodes,
        assumptions: checker.assumptions,
        rule_counts: checker.rule_counts,
        diagnostics: checker.diagnostics,
    }
}

/// Check a closed proof: every leaf must be an initial rule.
pub fn check(p: &Proof, calculus: &CalculusId) -> CheckReport {
    run_check(p, calculus, false)
}

/// Check a proof fragment: `hyp` leaves are accepted as open assumptions.
pub fn check_with_assumptions(p: &Proof, calculus: &CalculusId) -> CheckReport {
    run_check(p, calculus, true)
}

// Rename node ids inside the params of a nested-sequent rule instance.
fn remap_params(params: &Params, map: &BTreeMap<Label, Label>) -> Params {
    let ren = |l: &Label| map.get(l).cloned().unwrap_or_else(|| l.clone());
    let mut out = params.clone();
    out.child = params.child.as_ref().map(&ren);
    out.node = params.node.as_ref().map(&ren);
    out.target = params.target.as_ref().map(&ren);
    out.fresh = params.fresh.as_ref().map(&ren);
    out.concl_chain = params
        .concl_chain
        .as_ref()
        .map(|v| v.iter().map(&ren).collect());
    out.premise_chain = params
        .premise_chain
        .as_ref()
        .map(|v| v.iter().map(&ren).collect());
    out.path = params.path.as_ref().map(|p| PropPath {
        nodes: p.nodes.iter().map(&ren).collect(),
        dias: p.dias.clone(),
    });
    out
}

/// Rebuild a nested-sequent proof so node ids flow coherently from each
/// conclusion into its premises: every premise's stored sequent is replaced
/// by the one `apply_rule` derives, and ids mentioned in params follow
/// along. Parsed proof files number each sequent independently; translation
/// passes need this form.
pub fn normalize_nested(p: &Proof) -> Result<Proof, ProofError> {
    fn walk(p: &Proof) -> Result<Proof, ProofError> {
        if p.rule == RuleId::Hyp {
            return Ok(p.clone());
        }
        let derived = apply_rule(&p.conclusion, p.rule, &p.params)?;
        if derived.len() != p.premises.len() {
            return Err(ProofError::RuleShape(format!(
                "rule {} demands {} premise(s), proof has {}",
                p.rule,
                derived.len(),
                p.premises.len()
            )));
        }
        let mut premises = Vec::new();
        for (d, q) in derived.into_iter().zip(p.premises.iter()) {
            let d_nested = match (&d, &q.conclusion) {
                (Sequent::Nested(dn), Sequent::Nested(qn)) => {
                    let map = nested_match_ids(qn, dn).ok_or_else(|| {
                        ProofError::RuleShape(format!(
                            "stored premise '{qn}' does not match derived '{dn}'"
                        ))
                    })?;
                    let mut q2 = q.clone();
                    rename_proof(&mut q2, &map);
                    q2.conclusion = Sequent::Nested(dn.clone());
                    q2
                }
                _ => {
                    if !d.equivalent(&q.conclusion) {
                        return Err(ProofError::RuleShape(format!(
                            "stored premise '{}' does not match derived '{d}'",
                            q.conclusion
                        )));
                    }
                    q.clone()
                }
            };
            premises.push(walk(&d_nested)?);
        }
        Ok(Proof {
            conclusion: p.conclusion.clone(),
            rule: p.rule,
            params: p.params.clone(),
            premises,
        })
    }

    // Rename every id occurrence in a subproof: sequents and params.
    fn rename_proof(p: &mut Proof, map: &BTreeMap<Label, Label>) {
        if let Sequent::Nested(x) = &mut p.conclusion {
            rename_nested(x, map);
        }
        p.params = remap_params(&p.params, map);
        if let Some(structure) = &mut p.params.structure {
            rename_nested(structure, map);
        }
        for q in &mut p.premises {
            rename_proof(q, map);
        }
    }

    fn rename_nested(x: &mut NestedSequent, map: &BTreeMap<Label, Label>) {
        if let Some(new) = map.get(&x.id) {
            x.id = new.clone();
        }
        for (_, c) in &mut x.children {
            rename_nested(c, map);
        }
    }

    walk(p)
}

/// Validate that a labeled proof's stored premises match the derived ones.
/// Labels are written out in labeled-sequent text, so parsed proofs are
/// already coherent; this pass only confirms it and returns the proof.
pub fn normalize_labeled(p: &Proof) -> Result<Proof, ProofError> {
    fn walk(p: &Proof) -> Result<(), ProofError> {
        if matches!(p.rule, RuleId::Hyp | RuleId::LS) {
            for q in &p.premises {
                walk(q)?;
            }
            return Ok(());
        }
        let derived = apply_rule(&p.conclusion, p.rule, &p.params)?;
        if derived.len() != p.premises.len() {
            return Err(ProofError::RuleShape(format!(
                "rule {} demands {} premise(s), proof has {}",
                p.rule,
                derived.len(),
                p.premises.len()
            )));
        }
        for (d, q) in derived.iter().zip(p.premises.iter()) {
            if !d.equivalent(&q.conclusion) {
                return Err(ProofError::RuleShape(format!(
                    "stored premise '{}' does not match derived '{d}'",
                    q.conclusion
                )));
            }
            walk(q)?;
        }
        Ok(())
    }
    walk(p)?;
    Ok(p.clone())
}

// S-expression reader for the proof file format.
#[derive(Debug, Clone, PartialEq, Eq)]
enum SExpr {
    Atom(String),
    Str(String),
    List(Vec<SExpr>),
}

fn lex_sexpr(text: &str) -> Result<Vec<SExpr>, ProofError> {
    let mut stack: Vec<Vec<SExpr>> = vec![Vec::new()];
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '(' => stack.push(Vec::new()),
            ')' => {
                let done = stack
                    .pop()
                    .ok_or_else(|| ProofError::Syntax("unbalanced ')'".to_string()))?;
                let top = stack
                    .last_mut()
                    .ok_or_else(|| ProofError::Syntax("unbalanced ')'".to_string()))?;
                top.push(SExpr::List(done));
            }
            '"' => {
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some('"') => break,
                        Some('\\') => match chars.next() {
                            Some(e) => s.push(e),
                            None => {
                                return Err(ProofError::Syntax(
                                    "unterminated string".to_string(),
                                ))
                            }
                        },
                        Some(other) => s.push(other),
                        None => {
                            return Err(ProofError::Syntax("unterminated string".to_string()))
                        }
                    }
                }
                stack.last_mut().unwrap().push(SExpr::Str(s));
            }
            c if c.is_whitespace() => {}
            ';' => {
                // Comment to end of line.
                for c in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            c => {
                let mut s = String::from(c);
                while let Some(&n) = chars.peek() {
                    if n.is_whitespace() || n == '(' || n == ')' || n == '"' || n == ';' {
                        break;
                    }
                    s.push(n);
                    chars.next();
                }
                stack.last_mut().unwrap().push(SExpr::Atom(s));
            }
        }
    }
    if stack.len() != 1 {
        return Err(ProofError::Syntax("unbalanced '('".to_string()));
    }
    Ok(stack.pop().unwrap())
}

fn parse_diamond_token(t: &str) -> Result<Diamond, ProofError> {
    match t {
        "<>" => Ok(Diamond::White),
        "<#>" => Ok(Diamond::Black),
        other => Err(ProofError::Syntax(format!(
            "expected '<>' or '<#>', found '{other}'"
        ))),
    }
}

fn expect_atom(e: &SExpr) -> Result<&str, ProofError> {
    match e {
        SExpr::Atom(a) => Ok(a),
        other => Err(ProofError::Syntax(format!("expected an atom, found {other:?}"))),
    }
}

fn expect_str(e: &SExpr) -> Result<&str, ProofError> {
    match e {
        SExpr::Str(s) => Ok(s),
        SExpr::Atom(a) => Ok(a),
        other => Err(ProofError::Syntax(format!(
            "expected a string, found {other:?}"
        ))),
    }
}

fn parse_params(items: &[SExpr]) -> Result<Params, ProofError> {
    let mut params = Params::default();
    let mut i = 0;
    while i < items.len() {
        let key = expect_atom(&items[i])?;
        let value = items.get(i + 1).ok_or_else(|| {
            ProofError::Syntax(format!("parameter '{key}' has no value"))
        })?;
        match key {
            "atom" => params.atom = Some(expect_atom(value)?.to_string()),
            "formula" => params.formula = Some(crate::formula::parse_formula(expect_str(value)?)?),
            "structure" => params.structure = Some(parse_nested(expect_str(value)?)?),
            "part" => params.part = Some(parse_labeled(expect_str(value)?)?),
            "child" => params.child = Some(expect_atom(value)?.to_string()),
            "node" => params.node = Some(expect_atom(value)?.to_string()),
            "target" => params.target = Some(expect_atom(value)?.to_string()),
            "fresh" => params.fresh = Some(expect_atom(value)?.to_string()),
            "axiom" => params.axiom = Some(crate::axioms::parse_axiom(expect_str(value)?)?),
            "x" => params.x = Some(expect_atom(value)?.to_string()),
            "y" => params.y = Some(expect_atom(value)?.to_string()),
            "concl_chain" | "premise_chain" | "pi_labels" | "sigma_labels" => {
                let list = match value {
                    SExpr::List(l) => l,
                    _ => {
                        return Err(ProofError::Syntax(format!(
                            "parameter '{key}' needs a list"
                        )))
                    }
                };
                let labels: Result<Vec<Label>, ProofError> = list
                    .iter()
                    .map(|e| expect_atom(e).map(str::to_string))
                    .collect();
                let labels = labels?;
                match key {
                    "concl_chain" => params.concl_chain = Some(labels),
                    "premise_chain" => params.premise_chain = Some(labels),
                    "pi_labels" => params.pi_labels = Some(labels),
                    _ => params.sigma_labels = Some(labels),
                }
            }
            "path" => {
                let list = match value {
                    SExpr::List(l) => l,
                    _ => return Err(ProofError::Syntax("parameter 'path' needs a list".to_string())),
                };
                if list.is_empty() || list.len() % 2 == 0 {
                    return Err(ProofError::Syntax(
                        "a path alternates nodes and diamonds".to_string(),
                    ));
                }
                let mut nodes = vec![expect_atom(&list[0])?.to_string()];
                let mut dias = Vec::new();
                let mut k = 1;
                while k < list.len() {
                    dias.push(parse_diamond_token(expect_atom(&list[k])?)?);
                    nodes.push(expect_atom(&list[k + 1])?.to_string());
                    k += 2;
                }
                params.path = Some(PropPath { nodes, dias });
            }
            other => {
                return Err(ProofError::Syntax(format!("unknown parameter '{other}'")))
            }
        }
        i += 2;
    }
    Ok(params)
}

fn parse_sequent_text(text: &str, rule: RuleId) -> Result<Sequent, ProofError> {
    if rule.is_labeled() {
        return Ok(Sequent::Labeled(parse_labeled(text)?));
    }
    match parse_nested(text) {
        Ok(x) => Ok(Sequent::Nested(x)),
        Err(nested_err) => match parse_labeled(text) {
            Ok(l) => Ok(Sequent::Labeled(l)),
            Err(_) => Err(ProofError::Sequent(nested_err)),
        },
    }
}

fn proof_of_sexpr(e: &SExpr) -> Result<Proof, ProofError> {
    let items = match e {
        SExpr::List(l) => l,
        _ => return Err(ProofError::Syntax("expected an (infer ...) form".to_string())),
    };
    if items.is_empty() || expect_atom(&items[0])? != "infer" {
        return Err(ProofError::Syntax("expected an (infer ...) form".to_string()));
    }
    let rule = RuleId::parse(expect_atom(
        items
            .get(1)
            .ok_or_else(|| ProofError::Syntax("missing rule name".to_string()))?,
    )?)?;
    let mut conclusion: Option<Sequent> = None;
    let mut params = Params::default();
    let mut premises = Vec::new();
    let mut i = 2;
    while i < items.len() {
        match &items[i] {
            SExpr::Atom(a) if a == ":concl" => {
                let text = expect_str(items.get(i + 1).ok_or_else(|| {
                    ProofError::Syntax(":concl has no value".to_string())
                })?)?;
                conclusion = Some(parse_sequent_text(text, rule)?);
                i += 2;
            }
            SExpr::Atom(a) if a == ":params" => {
                let list = match items.get(i + 1) {
                    Some(SExpr::List(l)) => l,
                    _ => {
                        return Err(ProofError::Syntax(
                            ":params needs a (key value ...) list".to_string(),
                        ))
                    }
                };
                params = parse_params(list)?;
                i += 2;
            }
            sub @ SExpr::List(_) => {
                premises.push(proof_of_sexpr(sub)?);
                i += 1;
            }
            other => {
                return Err(ProofError::Syntax(format!(
                    "unexpected proof item {other:?}"
                )))
            }
        }
    }
    let conclusion =
        conclusion.ok_or_else(|| ProofError::Syntax("missing :concl".to_string()))?;
    Ok(Proof {
        conclusion,
        rule,
        params,
        premises,
    })
}

/// Parse a proof file: `(infer RULE :concl "SEQUENT" :params (KEY VALUE
/// ...) PREMISE ...)`. Nested-sequent node ids are positional (text order);
/// run `normalize_nested` before any id-sensitive processing.
pub fn parse_proof(text: &str) -> Result<Proof, ProofError> {
    let top = lex_sexpr(text)?;
    let mut forms = top.iter().filter(|e| matches!(e, SExpr::List(_)));
    let first = forms
        .next()
        .ok_or_else(|| ProofError::Syntax("no (infer ...) form found".to_string()))?;
    if forms.next().is_some() {
        return Err(ProofError::Syntax(
            "expected exactly one top-level proof".to_string(),
        ));
    }
    proof_of_sexpr(first)
}

fn quote(text: &str) -> String {
    format!("\"{}\"", text.replace('\\', "\\\\").replace('"', "\\\""))
}

// Map each node id of `x` to its positional name in the printed text.
fn preorder_map(x: &NestedSequent) -> BTreeMap<Label, Label> {
    let mut map = BTreeMap::new();
    fn walk(n: &NestedSequent, map: &mut BTreeMap<Label, Label>) {
        map.insert(n.id.clone(), format!("n{}", map.len()));
        for (_, c) in &n.children {
            walk(c, map);
        }
    }
    walk(x, &mut map);
    map
}

fn print_params(params: &Params, ren: &BTreeMap<Label, Label>) -> String {
    // Ids not in the conclusion (fresh names) are renamed on the fly.
    let mut extra: BTreeMap<Label, Label> = BTreeMap::new();
    let mut next_fresh = 0usize;
    let mut ren_id = |l: &Label, extra: &mut BTreeMap<Label, Label>| -> Label {
        if let Some(n) = ren.get(l) {
            return n.clone();
        }
        extra
            .entry(l.clone())
            .or_insert_with(|| {
                let name = format!("f{next_fresh}");
                next_fresh += 1;
                name
            })
            .clone()
    };
    let mut parts: Vec<String> = Vec::new();
    if let Some(a) = &params.atom {
        parts.push(format!("atom {a}"));
    }
    if let Some(f) = &params.formula {
        parts.push(format!("formula {}", quote(&f.to_string())));
    }
    if let Some(s) = &params.structure {
        parts.push(format!("structure {}", quote(&s.to_string())));
    }
    if let Some(p) = &params.part {
        parts.push(format!("part {}", quote(&p.to_string())));
    }
    for (key, value) in [
        ("child", &params.child),
        ("node", &params.node),
        ("target", &params.target),
        ("fresh", &params.fresh),
    ] {
        if let Some(l) = value {
            parts.push(format!("{key} {}", ren_id(l, &mut extra)));
        }
    }
    if let Some(a) = &params.axiom {
        parts.push(format!("axiom {}", quote(&a.to_string())));
    }
    for (key, value) in [
        ("concl_chain", &params.concl_chain),
        ("premise_chain", &params.premise_chain),
    ] {
        if let Some(v) = value {
            let items: Vec<String> = v.iter().map(|l| ren_id(l, &mut extra)).collect();
            parts.push(format!("{key} ({})", items.join(" ")));
        }
    }
    if let Some(x) = &params.x {
        parts.push(format!("x {x}"));
    }
    if let Some(y) = &params.y {
        parts.push(format!("y {y}"));
    }
    for (key, value) in [
        ("pi_labels", &params.pi_labels),
        ("sigma_labels", &params.sigma_labels),
    ] {
        if let Some(v) = value {
            parts.push(format!("{key} ({})", v.join(" ")));
        }
    }
    if let Some(p) = &params.path {
        let mut items = vec![ren_id(&p.nodes[0], &mut extra)];
        for (i, d) in p.dias.iter().enumerate() {
            items.push(d.token().to_string());
            items.push(ren_id(&p.nodes[i + 1], &mut extra));
        }
        parts.push(format!("path ({})", items.join(" ")));
    }
    parts.join(" ")
}

/// Render a proof in the file format. Nested-sequent node ids are rewritten
/// to their positional names so the file parses back to the same proof.
pub fn print_proof(p: &Proof) -> String {
    fn walk(p: &Proof, depth: usize, out: &mut String) {
        let pad = "  ".repeat(depth);
        let ren = match &p.conclusion {
            Sequent::Nested(x) => preorder_map(x),
            Sequent::Labeled(_) => BTreeMap::new(),
        };
        out.push_str(&format!(
            "{pad}(infer {} :concl {}",
            p.rule,
            quote(&p.conclusion.to_string())
        ));
        let params = print_params(&p.params, &ren);
        if !params.is_empty() {
            out.push_str(&format!(" :params ({params})"));
        }
        if p.premises.is_empty() {
            out.push(')');
        } else {
            for q in &p.premises {
                out.push('\n');
                walk(q, depth + 1, out);
            }
            out.push(')');
        }
    }
    let mut out = String::new();
    walk(p, 0, &mut out);
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axioms::parse_axiom;
    use crate::formula::parse_formula;

    fn nested(text: &str) -> Sequent {
        Sequent::Nested(parse_nested(text).unwrap())
    }

    fn labeled(text: &str) -> Sequent {
        Sequent::Labeled(parse_labeled(text).unwrap())
    }

    fn eq_nested(s: &Sequent, text: &str) -> bool {
        s.equivalent(&nested(text))
    }

    fn eq_labeled(s: &Sequent, text: &str) -> bool {
        s.equivalent(&labeled(text))
    }

    #[test]
    fn propositional_rules_split_the_principal() {
        let mut params = Params::default();
        params.formula = Some(parse_formula("p | q").unwrap());
        let out = apply_rule(&nested("p | q, r"), RuleId::Or, &params).unwrap();
        assert_eq!(out.len(), 1);
        assert!(eq_nested(&out[0], "p, q, r"));

        let mut params = Params::default();
        params.formula = Some(parse_formula("p & q").unwrap());
        let out = apply_rule(&nested("p & q, r"), RuleId::And, &params).unwrap();
        assert_eq!(out.len(), 2);
        assert!(eq_nested(&out[0], "p, r"));
        assert!(eq_nested(&out[1], "q, r"));
    }

    #[test]
    fn initial_rule_needs_the_dual_pair() {
        let mut params = Params::default();
        params.atom = Some("p".to_string());
        assert!(apply_rule(&nested("p, ~p, o{q}"), RuleId::Id, &params)
            .unwrap()
            .is_empty());
        assert!(apply_rule(&nested("p, q"), RuleId::Id, &params).is_err());
        let mut params = Params::default();
        params.atom = Some("p".to_string());
        params.x = Some("x".to_string());
        assert!(apply_rule(&labeled("x:p, x:~p"), RuleId::Id, &params)
            .unwrap()
            .is_empty());
        assert!(apply_rule(&labeled("x:p, y:~p"), RuleId::Id, &params).is_err());
    }

    #[test]
    fn display_rules_reroot() {
        // (rf): conclusion b{p}, q; premise p, o{q}.
        let s = nested("q, b{p}");
        let mut params = Params::default();
        params.child = Some("n1".to_string());
        let out = apply_rule(&s, RuleId::Rf, &params).unwrap();
        assert!(eq_nested(&out[0], "p, o{q}"));
        // (rp) inverts it; the old root keeps its id.
        let mut params = Params::default();
        params.child = Some("n0".to_string());
        let out2 = apply_rule(&out[0], RuleId::Rp, &params).unwrap();
        assert!(out2[0].equivalent(&s));
        // Polarity mismatch is an error.
        let mut params = Params::default();
        params.child = Some("n1".to_string());
        assert!(apply_rule(&s, RuleId::Rp, &params).is_err());
    }

    #[test]
    fn shallow_box_consumes_and_spawns() {
        let mut params = Params::default();
        params.formula = Some(parse_formula("[]p").unwrap());
        params.fresh = Some("f".to_string());
        let out = apply_rule(&nested("[]p, q"), RuleId::WBox, &params).unwrap();
        assert!(eq_nested(&out[0], "q, o{p}"));

        let mut params = Params::default();
        params.formula = Some(parse_formula("[#]p").unwrap());
        params.fresh = Some("f".to_string());
        let out = apply_rule(&nested("[#]p, q"), RuleId::BBox, &params).unwrap();
        assert!(eq_nested(&out[0], "q, b{p}"));
    }

    #[test]
    fn deep_box_keeps_the_principal() {
        let mut params = Params::default();
        params.formula = Some(parse_formula("[]p").unwrap());
        params.fresh = Some("f".to_string());
        params.node = Some("n1".to_string());
        let out = apply_rule(&nested("q, o{[]p}"), RuleId::WBox, &params).unwrap();
        assert!(eq_nested(&out[0], "q, o{[]p, o{p}}"));
    }

    #[test]
    fn shallow_diamond_propagates_into_a_child() {
        let mut params = Params::default();
        params.formula = Some(parse_formula("<>p").unwrap());
        params.child = Some("n1".to_string());
        let out = apply_rule(&nested("<>p, o{q}"), RuleId::WDia, &params).unwrap();
        assert!(eq_nested(&out[0], "<>p, o{q, p}"));
        // Wrong polarity.
        let mut params = Params::default();
        params.formula = Some(parse_formula("<>p").unwrap());
        params.child = Some("n1".to_string());
        assert!(apply_rule(&nested("<>p, b{q}"), RuleId::WDia, &params).is_err());
    }

    #[test]
    fn deep_diamonds_move_both_ways() {
        // dia1: into a o-child of the holder.
        let mut params = Params::default();
        params.formula = Some(parse_formula("<>p").unwrap());
        params.node = Some("n1".to_string());
        params.target = Some("n2".to_string());
        let out = apply_rule(&nested("q, o{<>p, o{r}}"), RuleId::Dia1, &params).unwrap();
        assert!(eq_nested(&out[0], "q, o{<>p, o{r, p}}"));
        // dia2: from a b-child up to its parent.
        let mut params = Params::default();
        params.formula = Some(parse_formula("<>p").unwrap());
        params.node = Some("n1".to_string());
        params.target = Some("n0".to_string());
        let out = apply_rule(&nested("q, b{<>p}"), RuleId::Dia2, &params).unwrap();
        assert!(eq_nested(&out[0], "q, p, b{<>p}"));
        // bdia2: from a o-child up to its parent.
        let mut params = Params::default();
        params.formula = Some(parse_formula("<#>p").unwrap());
        params.node = Some("n1".to_string());
        params.target = Some("n0".to_string());
        let out = apply_rule(&nested("q, o{<#>p}"), RuleId::BDia2, &params).unwrap();
        assert!(eq_nested(&out[0], "q, p, o{<#>p}"));
    }

    #[test]
    fn contraction_and_weakening_on_structures() {
        let mut params = Params::default();
        params.structure = Some(parse_nested("o{q}").unwrap());
        let out = apply_rule(&nested("p, o{q}"), RuleId::C, &params).unwrap();
        assert!(eq_nested(&out[0], "p, o{q}, o{q}"));
        let out = apply_rule(&nested("p, o{q}, o{q}"), RuleId::W, &params).unwrap();
        assert!(eq_nested(&out[0], "p, o{q}"));
        // Weakening away an absent structure fails.
        let mut params = Params::default();
        params.structure = Some(parse_nested("o{r}").unwrap());
        assert!(apply_rule(&nested("p, o{q}"), RuleId::W, &params).is_err());
    }

    #[test]
    fn nested_structural_rule_swaps_chains() {
        // Axiom <#><> -> <><#>: conclusion X, b{o{Y}}; premise X, o{b{Y}}.
        let mut params = Params::default();
        params.axiom = Some(parse_axiom("<#><> -> <><#>").unwrap());
        params.child = Some("n1".to_string());
        params.premise_chain = Some(vec!["s1".to_string(), "n2".to_string()]);
        let out = apply_rule(&nested("r, b{o{s}}"), RuleId::Gp, &params).unwrap();
        assert!(eq_nested(&out[0], "r, o{b{s}}"));
    }

    #[test]
    fn nested_structural_rule_empty_sides() {
        // e -> <>: conclusion X, Y at the root; premise X, o{Y}.
        let mut params = Params::default();
        params.axiom = Some(parse_axiom("e -> <>").unwrap());
        params.structure = Some(parse_nested("q").unwrap());
        params.premise_chain = Some(vec!["s0".to_string()]);
        let out = apply_rule(&nested("p, q"), RuleId::Gp, &params).unwrap();
        assert!(eq_nested(&out[0], "p, o{q}"));
        // A nonempty antecedent with an empty consequent needs equality
        // atoms, which no calculus here has: scope error.
        let mut params = Params::default();
        params.axiom = Some(parse_axiom("<> -> e").unwrap());
        params.child = Some("n1".to_string());
        assert!(matches!(
            apply_rule(&nested("p, o{q}"), RuleId::Gp, &params),
            Err(ProofError::Unsupported(_))
        ));
    }

    #[test]
    fn labeled_rules_golden() {
        // l_box consumes and spawns a fresh label.
        let mut params = Params::default();
        params.formula = Some(parse_formula("[]p").unwrap());
        params.x = Some("x".to_string());
        params.fresh = Some("u".to_string());
        let out = apply_rule(&labeled("x:[]p, x:q"), RuleId::LBox, &params).unwrap();
        assert!(eq_labeled(&out[0], "R(x,u), u:p, x:q"));
        // l_dia keeps the principal.
        let mut params = Params::default();
        params.formula = Some(parse_formula("<>p").unwrap());
        params.x = Some("x".to_string());
        params.y = Some("y".to_string());
        let out = apply_rule(&labeled("R(x,y), x:<>p"), RuleId::LDia, &params).unwrap();
        assert!(eq_labeled(&out[0], "R(x,y), x:<>p, y:p"));
        // l_bdia needs the reversed atom.
        let mut params = Params::default();
        params.formula = Some(parse_formula("<#>p").unwrap());
        params.x = Some("x".to_string());
        params.y = Some("y".to_string());
        assert!(apply_rule(&labeled("R(x,y), x:<#>p"), RuleId::LBDia, &params).is_err());
        let out = apply_rule(&labeled("R(y,x), x:<#>p"), RuleId::LBDia, &params).unwrap();
        assert!(eq_labeled(&out[0], "R(y,x), x:<#>p, y:p"));
    }

    #[test]
    fn labeled_structural_rule_adds_the_consequent_chain() {
        // <#><> -> <><#> between x and y: conclusion has R(w,x), R(w,y);
        // premise adds R(x,u), R(y,u).
        let mut params = Params::default();
        params.axiom = Some(parse_axiom("<#><> -> <><#>").unwrap());
        params.x = Some("x".to_string());
        params.y = Some("y".to_string());
        params.pi_labels = Some(vec!["w".to_string()]);
        params.sigma_labels = Some(vec!["u".to_string()]);
        let out = apply_rule(&labeled("R(w,x), R(w,y), x:p"), RuleId::LGp, &params).unwrap();
        assert!(eq_labeled(&out[0], "R(w,x), R(w,y), R(x,u), R(y,u), x:p"));
        // Missing antecedent atom.
        assert!(apply_rule(&labeled("R(w,x), x:p"), RuleId::LGp, &params).is_err());
        // Empty antecedent identifies endpoints.
        let mut params = Params::default();
        params.axiom = Some(parse_axiom("e -> <>").unwrap());
        params.x = Some("x".to_string());
        let out = apply_rule(&labeled("x:p"), RuleId::LGp, &params).unwrap();
        assert!(eq_labeled(&out[0], "R(x,x), x:p"));
        // Nonempty antecedent with empty consequent has no rule.
        let mut params = Params::default();
        params.axiom = Some(parse_axiom("<> -> e").unwrap());
        params.x = Some("x".to_string());
        params.y = Some("y".to_string());
        params.pi_labels = Some(vec![]);
        assert!(matches!(
            apply_rule(&labeled("R(x,y)"), RuleId::LGp, &params),
            Err(ProofError::Unsupported(_))
        ));
    }

    #[test]
    fn checker_accepts_a_small_shallow_proof() {
        // p | ~p via (or) then (id).
        let mut or_params = Params::default();
        or_params.formula = Some(parse_formula("p | ~p").unwrap());
        let mut id_params = Params::default();
        id_params.atom = Some("p".to_string());
        let proof = Proof::step(
            nested("p | ~p"),
            RuleId::Or,
            or_params,
            vec![Proof::step(nested("p, ~p"), RuleId::Id, id_params, vec![])],
        );
        let calc = CalculusId::skt(vec![]);
        let report = check(&proof, &calc);
        assert!(report.ok, "{report}");
        assert_eq!(report.nodes, 2);
        // The same proof under a mismatched premise is rejected.
        let mut bad = proof.clone();
        bad.premises[0].conclusion = nested("p, q");
        let report = check(&bad, &calc);
        assert!(!report.ok);
    }

    #[test]
    fn checker_rejects_eigenvariable_violations() {
        // l_box with a fresh label that already occurs.
        let mut params = Params::default();
        params.formula = Some(parse_formula("[]p").unwrap());
        params.x = Some("x".to_string());
        params.fresh = Some("y".to_string());
        let concl = labeled("R(x,y), x:[]p");
        let premise = apply_rule(&concl, RuleId::LBox, &params).unwrap();
        let proof = Proof::step(
            concl,
            RuleId::LBox,
            params,
            vec![Proof::hyp(premise[0].clone())],
        );
        let calc = CalculusId::lkt_st(vec![]);
        let report = check_with_assumptions(&proof, &calc);
        assert!(!report.ok);
        assert!(report.diagnostics[0].message.contains("eigenvariable"));
    }

    #[test]
    fn checker_verifies_propagation_witnesses() {
        // dp with a witness word outside the completion is rejected.
        let s = parse_nested("<>p, o{q, o{r}}").unwrap();
        let mut params = Params::default();
        params.formula = Some(parse_formula("<>p").unwrap());
        params.node = Some("n0".to_string());
        params.target = Some("n2".to_string());
        params.path = Some(PropPath {
            nodes: vec!["n0".into(), "n1".into(), "n2".into()],
            dias: vec![Diamond::White, Diamond::White],
        });
        let premise = apply_rule(&Sequent::Nested(s.clone()), RuleId::Dp, &params).unwrap();
        let proof = Proof::step(
            Sequent::Nested(s),
            RuleId::Dp,
            params,
            vec![Proof::hyp(premise[0].clone())],
        );
        let plain = CalculusId::dkt(vec![]).unwrap();
        assert!(!check_with_assumptions(&proof, &plain).ok);
        let trans = CalculusId::dkt(vec![parse_axiom("<><> -> <>").unwrap()]).unwrap();
        let report = check_with_assumptions(&proof, &trans);
        assert!(report.ok, "{report}");
    }

    #[test]
    fn checker_enforces_node_addressing_discipline() {
        let mut params = Params::default();
        params.atom = Some("p".to_string());
        params.node = Some("n0".to_string());
        let leaf = Proof::step(nested("p, ~p"), RuleId::Id, params, vec![]);
        assert!(!check(&leaf, &CalculusId::skt(vec![])).ok);
        assert!(check(&leaf, &CalculusId::dkt(vec![]).unwrap()).ok);
        let mut params = Params::default();
        params.atom = Some("p".to_string());
        let root_leaf = Proof::step(nested("p, ~p"), RuleId::Id, params, vec![]);
        assert!(check(&root_leaf, &CalculusId::skt(vec![])).ok);
        assert!(!check(&root_leaf, &CalculusId::dkt(vec![]).unwrap()).ok);
    }

    #[test]
    fn modal_fragment_restrictions() {
        let calc = CalculusId::skt(vec![]).modal_fragment().unwrap();
        let mut params = Params::default();
        params.formula = Some(parse_formula("[#]p").unwrap());
        params.fresh = Some("f".to_string());
        let concl = nested("[#]p");
        let premise = apply_rule(&concl, RuleId::BBox, &params).unwrap();
        let proof = Proof::step(
            concl,
            RuleId::BBox,
            params,
            vec![Proof::hyp(premise[0].clone())],
        );
        let report = check_with_assumptions(&proof, &calc);
        assert!(!report.ok);
        // Axioms with past letters cannot enter the fragment at all.
        assert!(CalculusId::skt(vec![parse_axiom("<#> -> <>").unwrap()])
            .modal_fragment()
            .is_err());
    }

    #[test]
    fn substitution_is_checked_backward() {
        let premise = labeled("R(x,y), R(x,z), y:p");
        let concl = labeled("R(x,x), R(x,z), x:p");
        let mut params = Params::default();
        params.x = Some("x".to_string());
        params.y = Some("y".to_string());
        let proof = Proof::step(
            concl,
            RuleId::LS,
            params,
            vec![Proof::hyp(premise.clone())],
        );
        let calc = CalculusId::lkt_st(vec![]);
        assert!(check_with_assumptions(&proof, &calc).ok);
        // A conclusion that is not the substituted premise fails.
        let mut params = Params::default();
        params.x = Some("x".to_string());
        params.y = Some("y".to_string());
        let bad = Proof::step(
            labeled("R(x,x), x:p"),
            RuleId::LS,
            params,
            vec![Proof::hyp(premise)],
        );
        assert!(!check_with_assumptions(&bad, &calc).ok);
    }

    #[test]
    fn proof_files_round_trip() {
        let text = r#"
(infer or :concl "[]p | <>q" :params (formula "[]p | <>q")
  (infer wbox :concl "[]p, <>q" :params (formula "[]p" fresh f0)
    (infer wdia :concl "<>q, o{p}" :params (formula "<>q" child n1)
      (infer hyp :concl "<>q, o{p, q}"))))
"#;
        let proof = parse_proof(text).unwrap();
        let calc = CalculusId::skt(vec![]);
        assert!(check_with_assumptions(&proof, &calc).ok);
        let printed = print_proof(&proof);
        let reparsed = parse_proof(&printed).unwrap();
        assert!(check_with_assumptions(&reparsed, &calc).ok);
        assert_eq!(print_proof(&reparsed), printed);
    }

    #[test]
    fn normalization_makes_parsed_ids_coherent() {
        let text = r#"
(infer wbox :concl "[]p, q" :params (formula "[]p" fresh f0)
  (infer hyp :concl "q, o{p}"))
"#;
        let proof = parse_proof(text).unwrap();
        let norm = normalize_nested(&proof).unwrap();
        // The premise's child node must carry the fresh id from the params.
        match &norm.premises[0].conclusion {
            Sequent::Nested(x) => {
                assert_eq!(x.children.len(), 1);
                assert_eq!(x.children[0].1.id, "f0");
            }
            _ => panic!("expected nested"),
        }
        assert!(check_with_assumptions(&norm, &CalculusId::skt(vec![])).ok);
    }

    #[test]
    fn polytree_assertion_flags_cyclic_sequents() {
        // A proof over a polytree end sequent must stay polytree; force a
        // non-polytree conclusion and watch the checker object.
        let concl = labeled("R(x,y), x:p, x:~p");
        let mut params = Params::default();
        params.atom = Some("p".to_string());
        params.x = Some("x".to_string());
        let good = Proof::step(concl, RuleId::Id, params.clone(), vec![]);
        let calc = CalculusId::lkt_pr(vec![]).unwrap();
        assert!(check(&good, &calc).ok);
        let bad_concl = labeled("R(x,y), R(y,x), x:p, x:~p");
        let bad = Proof::step(bad_concl, RuleId::Id, params, vec![]);
        // The conclusion itself is not a polytree, so the assertion is off.
        assert!(check(&bad, &calc).ok);
    }
}
