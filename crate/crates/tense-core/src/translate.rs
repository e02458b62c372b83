//! Proof translations between the shallow nested, deep nested, and labeled
//! calculi.
//!
//! Four effective transformations are provided. `shallow_to_labeled` maps a
//! shallow nested proof to a labeled structural proof over the same axioms,
//! sending display steps to nothing. `eliminate_structural` removes labeled
//! structural rules in favor of propagation steps. `labeled_to_deep` reads a
//! structural-free labeled proof back as a deep nested proof rooted at a
//! chosen label, and `deep_to_shallow` expands deep rules into shallow ones
//! with display steps. `pipeline_reverse` composes the last three, so the
//! two directions between the shallow and labeled systems are both covered.
//!
//! Every translator re-checks its input and verifies its own output with
//! the proof checker before returning it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::time::Duration;

use thiserror::Error;

use crate::axioms::{inverse, parse_tree, ParseTree, PathAxiom, PathGrammar};
use crate::formula::{Diamond, Formula};
use crate::polytree::{graph_of, polytree_of, to_nested, labeled_sequent_of, PolytreeError};
use crate::proof::{
    apply_rule, check, normalize_nested, CalculusId, Params, Proof, ProofError, RuleId, Sequent,
    System,
};
use crate::propagation::{pg_of_labeled, reachable, PropPath, PropagationError};
use crate::sequent::{
    labeled_equal, nested_equal, substitute, Label, LabelGen, LabeledSequent, NestedSequent,
    SequentError,
};

/// Why a translation was refused or failed.
#[derive(Debug, Error)]
pub enum TranslateError {
    /// The input proof does not pass its own checker.
    #[error("input proof rejected: {0}")]
    InputRejected(String),
    /// The requested translation is outside the supported fragment.
    #[error("out of scope: {0}")]
    Scope(String),
    /// The proof has a shape the transformation cannot rearrange.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// The translator produced something its own checks refuse; a bug.
    #[error("internal consistency failure: {0}")]
    Internal(String),
    /// A rule application inside the translation failed.
    #[error(transparent)]
    Proof(#[from] ProofError),
    /// A sequent operation inside the translation failed.
    #[error(transparent)]
    Sequent(#[from] SequentError),
    /// A graph conversion inside the translation failed.
    #[error(transparent)]
    Polytree(#[from] PolytreeError),
    /// A reachability query inside the translation failed.
    #[error(transparent)]
    Propagation(#[from] PropagationError),
}

fn internal(msg: impl Into<String>) -> TranslateError {
    TranslateError::Internal(msg.into())
}

/// Rule counts and timing for one translation stage.
#[derive(Debug, Clone)]
pub struct StageReport {
    /// Stage name.
    pub stage: String,
    /// Rule instances in the stage's input proof.
    pub rules_in: usize,
    /// Rule instances in the stage's output proof.
    pub rules_out: usize,
    /// Wall time the stage took.
    pub elapsed: Duration,
}

/// Per-stage accounting for a translation run.
#[derive(Debug, Clone, Default)]
pub struct TranslationSummary {
    /// Reports in pipeline order.
    pub stages: Vec<StageReport>,
}

impl TranslationSummary {
    /// An empty summary.
    pub fn new() -> TranslationSummary {
        TranslationSummary::default()
    }

    /// Record one stage.
    pub fn record(&mut self, stage: &str, input: &Proof, output: &Proof, elapsed: Duration) {
        self.stages.push(StageReport {
            stage: stage.to_string(),
            rules_in: input.size(),
            rules_out: output.size(),
            elapsed,
        });
    }
}

impl fmt::Display for TranslationSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.stages {
            writeln!(
                f,
                "{}: {} rules in, {} rules out, {:.3} ms",
                s.stage,
                s.rules_in,
                s.rules_out,
                s.elapsed.as_secs_f64() * 1000.0
            )?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Shared helpers.

fn ensure_system(calculus: &CalculusId, want: System) -> Result<(), TranslateError> {
    if calculus.system != want {
        return Err(TranslateError::Scope(format!(
            "expected a {} proof, got a {} calculus",
            want.token(),
            calculus.system.token()
        )));
    }
    Ok(())
}

fn ensure_accepted(p: &Proof, calculus: &CalculusId) -> Result<(), TranslateError> {
    let report = check(p, calculus);
    if !report.ok {
        let first = report
            .diagnostics
            .first()
            .map(|d| d.to_string())
            .unwrap_or_else(|| "no diagnostic".to_string());
        return Err(TranslateError::InputRejected(first));
    }
    Ok(())
}

fn ensure_output(p: &Proof, calculus: &CalculusId, stage: &str) -> Result<(), TranslateError> {
    let report = check(p, calculus);
    if !report.ok {
        let first = report
            .diagnostics
            .first()
            .map(|d| d.to_string())
            .unwrap_or_else(|| "no diagnostic".to_string());
        return Err(internal(format!("{stage} produced a rejected proof: {first}")));
    }
    Ok(())
}

fn retarget(calculus: &CalculusId, system: System) -> Result<CalculusId, TranslateError> {
    let base = CalculusId::new(system, calculus.axioms.clone())?;
    if calculus.modal_only {
        Ok(base.modal_fragment()?)
    } else {
        Ok(base)
    }
}

fn only_premise(mut v: Vec<Sequent>) -> Result<Sequent, TranslateError> {
    if v.len() != 1 {
        return Err(internal("expected a single derived premise"));
    }
    Ok(v.remove(0))
}

/// The labeled reading of a nested sequent: node ids become labels.
fn lab(x: &NestedSequent) -> LabeledSequent {
    labeled_sequent_of(&polytree_of(x))
}

fn multiset_diff<T: PartialEq + Clone>(a: &[T], b: &[T]) -> Vec<T> {
    let mut rest: Vec<&T> = b.iter().collect();
    let mut out = Vec::new();
    for item in a {
        if let Some(k) = rest.iter().position(|r| *r == item) {
            rest.remove(k);
        } else {
            out.push(item.clone());
        }
    }
    out
}

fn labeled_diff(a: &LabeledSequent, b: &LabeledSequent) -> LabeledSequent {
    LabeledSequent {
        rel: a.rel.difference(&b.rel).cloned().collect(),
        lformulas: multiset_diff(&a.lformulas, &b.lformulas),
    }
}

fn diamond_letter(f: &Formula) -> Option<Diamond> {
    match f {
        Formula::Dia(_) => Some(Diamond::White),
        Formula::BDia(_) => Some(Diamond::Black),
        _ => None,
    }
}

fn collect_proof_labels(p: &Proof, out: &mut BTreeSet<Label>) {
    match &p.conclusion {
        Sequent::Nested(x) => out.extend(x.all_ids()),
        Sequent::Labeled(l) => out.extend(l.labels()),
    }
    let ps = &p.params;
    for field in [&ps.child, &ps.node, &ps.target, &ps.fresh, &ps.x, &ps.y] {
        if let Some(l) = field {
            out.insert(l.clone());
        }
    }
    for list in [&ps.premise_chain, &ps.concl_chain, &ps.pi_labels, &ps.sigma_labels] {
        if let Some(ls) = list {
            out.extend(ls.iter().cloned());
        }
    }
    if let Some(path) = &ps.path {
        out.extend(path.nodes.iter().cloned());
    }
    if let Some(s) = &ps.structure {
        out.extend(s.all_ids());
    }
    if let Some(part) = &ps.part {
        out.extend(part.labels());
    }
    for q in &p.premises {
        collect_proof_labels(q, out);
    }
}

fn seed_gen(p: &Proof) -> LabelGen {
    let mut used = BTreeSet::new();
    collect_proof_labels(p, &mut used);
    LabelGen::above(used.iter())
}

fn rename_param_label(params: &mut Params, old: &str, new: &str) {
    let fix = |l: &mut Option<Label>| {
        if l.as_deref() == Some(old) {
            *l = Some(new.to_string());
        }
    };
    fix(&mut params.x);
    fix(&mut params.y);
    fix(&mut params.fresh);
    for list in [&mut params.pi_labels, &mut params.sigma_labels] {
        if let Some(ls) = list {
            for l in ls.iter_mut() {
                if l == old {
                    *l = new.to_string();
                }
            }
        }
    }
    if let Some(path) = &mut params.path {
        for n in &mut path.nodes {
            if n == old {
                *n = new.to_string();
            }
        }
    }
    if let Some(part) = &mut params.part {
        *part = substitute(part, new, old);
    }
}

// Rename a label everywhere in a labeled subproof, sequents and params both.
fn rename_labeled_proof(p: &mut Proof, old: &str, new: &str) {
    if let Sequent::Labeled(l) = &p.conclusion {
        p.conclusion = Sequent::Labeled(substitute(l, new, old));
    }
    rename_param_label(&mut p.params, old, new);
    for q in &mut p.premises {
        rename_labeled_proof(q, old, new);
    }
}

// Alpha-rename labels that are bound inside the proof (box eigenvariables,
// structural eigenvariables, substitution sources) away from `avoid`, so a
// later rewrite of the free labels cannot capture them.
fn rename_bound_away(p: &mut Proof, avoid: &BTreeSet<Label>, gen: &mut LabelGen) {
    for q in &mut p.premises {
        rename_bound_away(q, avoid, gen);
    }
    let mut renames: Vec<(Label, Label)> = Vec::new();
    match p.rule {
        RuleId::LBox | RuleId::LBBox => {
            if let Some(f) = &p.params.fresh {
                if avoid.contains(f) {
                    renames.push((f.clone(), gen.fresh()));
                }
            }
        }
        RuleId::LGp | RuleId::LPath => {
            if let Some(sig) = &p.params.sigma_labels {
                for s in sig {
                    if avoid.contains(s) {
                        renames.push((s.clone(), gen.fresh()));
                    }
                }
            }
        }
        RuleId::LS => {
            if let Some(y) = &p.params.y {
                if avoid.contains(y) {
                    renames.push((y.clone(), gen.fresh()));
                }
            }
        }
        _ => {}
    }
    for (old, new) in renames {
        rename_param_label(&mut p.params, &old, &new);
        for q in &mut p.premises {
            rename_labeled_proof(q, &old, &new);
        }
    }
}

// Height-preserving weakening: add `part` to every sequent of a labeled
// proof. Bound labels clashing with the added atoms are renamed first.
fn hp_weaken(p: &Proof, part: &LabeledSequent, gen: &mut LabelGen) -> Proof {
    fn extend(p: &mut Proof, part: &LabeledSequent) {
        if let Sequent::Labeled(l) = &mut p.conclusion {
            l.extend_with(part);
        }
        for q in &mut p.premises {
            extend(q, part);
        }
    }
    let mut q = p.clone();
    rename_bound_away(&mut q, &part.labels(), gen);
    extend(&mut q, part);
    q
}

// Recompute l_w and l_c parts from the stored sequents. Label merges can
// otherwise leave a stale part after a proof-wide substitution.
fn refit_weakening(p: &mut Proof) {
    for q in &mut p.premises {
        refit_weakening(q);
    }
    match p.rule {
        RuleId::LW => {
            if let (Sequent::Labeled(c), Some(q)) = (&p.conclusion, p.premises.first()) {
                if let Sequent::Labeled(d) = &q.conclusion {
                    p.params.part = Some(labeled_diff(c, d));
                }
            }
        }
        RuleId::LC => {
            if let (Sequent::Labeled(c), Some(q)) = (&p.conclusion, p.premises.first()) {
                if let Sequent::Labeled(d) = &q.conclusion {
                    let mut part = labeled_diff(d, c);
                    part.rel.clear();
                    p.params.part = Some(part);
                }
            }
        }
        _ => {}
    }
}

// A labeled proof of S becomes a labeled proof of S[x/y] by rewriting every
// sequent, after renaming bound labels away from the substituted pair.
fn subst_labeled_proof(
    p: &Proof,
    x: &str,
    y: &str,
    gen: &mut LabelGen,
) -> Result<Proof, TranslateError> {
    if x == y {
        return Ok(p.clone());
    }
    let mut q = p.clone();
    let avoid: BTreeSet<Label> = [x.to_string(), y.to_string()].into_iter().collect();
    rename_bound_away(&mut q, &avoid, gen);
    rename_labeled_proof(&mut q, y, x);
    refit_weakening(&mut q);
    Ok(q)
}

// Remove every substitution step by pushing it into the subproof above it.
fn purge_substitutions(p: &Proof, gen: &mut LabelGen) -> Result<Proof, TranslateError> {
    let premises: Vec<Proof> = p
        .premises
        .iter()
        .map(|q| purge_substitutions(q, gen))
        .collect::<Result<_, _>>()?;
    if p.rule != RuleId::LS {
        return Ok(Proof {
            conclusion: p.conclusion.clone(),
            rule: p.rule,
            params: p.params.clone(),
            premises,
        });
    }
    let x = p.params.x.clone().ok_or_else(|| internal("substitution step without x"))?;
    let y = p.params.y.clone().ok_or_else(|| internal("substitution step without y"))?;
    let sub = premises
        .into_iter()
        .next()
        .ok_or_else(|| internal("substitution step without a premise"))?;
    let out = subst_labeled_proof(&sub, &x, &y, gen)?;
    if !labeled_equal(out.conclusion.as_labeled()?, p.conclusion.as_labeled()?) {
        return Err(internal("substitution purge changed the conclusion"));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Shallow nested to labeled structural.

/// Translate a shallow nested proof into a labeled structural proof of the
/// labeled reading of its end sequent, over the same axioms. Logical and
/// structural rules map one to one, display steps map to nothing, and
/// structure contraction becomes substitution steps followed by labeled
/// contraction.
pub fn shallow_to_labeled(p: &Proof, calculus: &CalculusId) -> Result<Proof, TranslateError> {
    ensure_system(calculus, System::SktNestSt)?;
    ensure_accepted(p, calculus)?;
    let p = normalize_nested(p)?;
    let mut gen = seed_gen(&p);
    let out = stl(&p, &mut gen)?;
    let target = retarget(calculus, System::LktLabSt)?;
    ensure_output(&out, &target, "shallow_to_labeled")?;
    Ok(out)
}

fn stl(p: &Proof, gen: &mut LabelGen) -> Result<Proof, TranslateError> {
    let x = p.conclusion.as_nested()?;
    let lx = lab(x);
    let root = x.id.clone();
    let step = |rule: RuleId, params: Params, premises: Vec<Proof>| {
        Proof::step(Sequent::Labeled(lx.clone()), rule, params, premises)
    };
    match p.rule {
        RuleId::Id => {
            let mut params = Params::default();
            params.atom = p.params.atom.clone();
            params.x = Some(root);
            Ok(step(RuleId::Id, params, Vec::new()))
        }
        RuleId::Or | RuleId::And => {
            let rule = if p.rule == RuleId::Or { RuleId::LOr } else { RuleId::LAnd };
            let mut params = Params::default();
            params.formula = p.params.formula.clone();
            params.x = Some(root);
            let premises: Vec<Proof> =
                p.premises.iter().map(|q| stl(q, gen)).collect::<Result<_, _>>()?;
            Ok(step(rule, params, premises))
        }
        // Display steps leave the underlying graph alone, so they vanish.
        RuleId::Rf | RuleId::Rp => stl(&p.premises[0], gen),
        RuleId::WBox | RuleId::BBox => {
            let rule = if p.rule == RuleId::WBox { RuleId::LBox } else { RuleId::LBBox };
            let mut params = Params::default();
            params.formula = p.params.formula.clone();
            params.x = Some(root);
            params.fresh = p.params.fresh.clone();
            Ok(step(rule, params, vec![stl(&p.premises[0], gen)?]))
        }
        RuleId::WDia | RuleId::BDia => {
            let rule = if p.rule == RuleId::WDia { RuleId::LDia } else { RuleId::LBDia };
            let mut params = Params::default();
            params.formula = p.params.formula.clone();
            params.x = Some(root);
            params.y = p.params.child.clone();
            Ok(step(rule, params, vec![stl(&p.premises[0], gen)?]))
        }
        RuleId::W => {
            let prem = p.premises[0].conclusion.as_nested()?;
            let mut params = Params::default();
            params.part = Some(labeled_diff(&lx, &lab(prem)));
            Ok(step(RuleId::LW, params, vec![stl(&p.premises[0], gen)?]))
        }
        RuleId::C => stl_contraction(p, x, &lx, gen),
        RuleId::Gp | RuleId::Path => stl_structural(p, x, &lx, gen),
        RuleId::Hyp => Err(TranslateError::InputRejected(
            "open assumption in the input proof".to_string(),
        )),
        other => Err(internal(format!("rule {other} in a shallow proof"))),
    }
}

// Map the nodes of `part` onto an occurrence inside `node`, children matched
// greedily by canonical key. Returns pattern id to host id.
fn find_part_map(
    node: &NestedSequent,
    part: &NestedSequent,
    map: &mut BTreeMap<Label, Label>,
) -> bool {
    map.insert(part.id.clone(), node.id.clone());
    let mut used = vec![false; node.children.len()];
    for (ppol, pc) in &part.children {
        let mut hit = None;
        for (k, (npol, nc)) in node.children.iter().enumerate() {
            if used[k] || npol != ppol {
                continue;
            }
            if nc.canonical_key() == pc.canonical_key() {
                hit = Some(k);
                break;
            }
        }
        match hit {
            Some(k) => {
                used[k] = true;
                if !find_part_map(&node.children[k].1, pc, map) {
                    return false;
                }
            }
            None => return false,
        }
    }
    true
}

// Replay the id choices contraction makes for its copy, pairing pattern ids
// with the copy ids it will mint.
fn replay_copy_ids(x: &NestedSequent, part: &NestedSequent) -> BTreeMap<Label, Label> {
    fn relabel(n: &mut NestedSequent, used: &mut BTreeSet<Label>) {
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
            relabel(c, used);
        }
    }
    fn pair(a: &NestedSequent, b: &NestedSequent, map: &mut BTreeMap<Label, Label>) {
        map.insert(a.id.clone(), b.id.clone());
        for ((_, ac), (_, bc)) in a.children.iter().zip(&b.children) {
            pair(ac, bc, map);
        }
    }
    let mut used: BTreeSet<Label> = x.all_ids().into_iter().collect();
    let mut copy = part.clone();
    copy.id = x.id.clone();
    for (_, c) in &mut copy.children {
        relabel(c, &mut used);
    }
    let mut map = BTreeMap::new();
    pair(part, &copy, &mut map);
    map
}

// Structure contraction: the premise carries a fresh copy of the contracted
// structure. Substitution steps fold the copy's nodes onto the originals,
// after which the duplicated formulas disappear by labeled contraction.
fn stl_contraction(
    p: &Proof,
    x: &NestedSequent,
    lx: &LabeledSequent,
    gen: &mut LabelGen,
) -> Result<Proof, TranslateError> {
    let part = p
        .params
        .structure
        .as_ref()
        .ok_or_else(|| internal("contraction without a structure"))?;
    let mut orig = BTreeMap::new();
    if !find_part_map(x, part, &mut orig) {
        return Err(internal("contracted structure not found in the conclusion"));
    }
    let copies = replay_copy_ids(x, part);
    let mut cur = stl(&p.premises[0], gen)?;
    let mut cur_seq = cur.conclusion.as_labeled()?.clone();
    for (pid, copy_id) in &copies {
        let host = &orig[pid];
        if host == copy_id {
            continue;
        }
        let next = substitute(&cur_seq, host, copy_id);
        let mut params = Params::default();
        params.x = Some(host.clone());
        params.y = Some(copy_id.clone());
        cur = Proof::step(Sequent::Labeled(next.clone()), RuleId::LS, params, vec![cur]);
        cur_seq = next;
    }
    let mut dup = LabeledSequent::default();
    collect_part_formulas(part, &orig, &mut dup);
    let mut expected = lx.clone();
    expected.extend_with(&dup);
    if !labeled_equal(&cur_seq, &expected) {
        return Err(internal("contraction image does not match after substitution"));
    }
    let mut params = Params::default();
    params.part = Some(dup);
    Ok(Proof::step(Sequent::Labeled(lx.clone()), RuleId::LC, params, vec![cur]))
}

fn collect_part_formulas(
    part: &NestedSequent,
    orig: &BTreeMap<Label, Label>,
    out: &mut LabeledSequent,
) {
    let host = orig[&part.id].clone();
    for f in &part.formulas {
        out.lformulas.push((host.clone(), f.clone()));
    }
    for (_, c) in &part.children {
        collect_part_formulas(c, orig, out);
    }
}

// Walk the conclusion-side chain of a nested structural step.
fn chain_node_ids(
    x: &NestedSequent,
    top: &str,
    len: usize,
) -> Result<Vec<Label>, TranslateError> {
    let mut ids = Vec::new();
    let mut cur = x
        .children
        .iter()
        .find(|(_, c)| c.id == top)
        .map(|(_, c)| c)
        .ok_or_else(|| internal("chain top is not a root child"))?;
    loop {
        ids.push(cur.id.clone());
        if ids.len() == len {
            return Ok(ids);
        }
        if cur.children.len() != 1 {
            return Err(internal("chain interior is not a single-child node"));
        }
        cur = &cur.children[0].1;
    }
}

fn stl_structural(
    p: &Proof,
    x: &NestedSequent,
    lx: &LabeledSequent,
    gen: &mut LabelGen,
) -> Result<Proof, TranslateError> {
    let axiom = p
        .params
        .axiom
        .clone()
        .ok_or_else(|| internal("structural step without an axiom"))?;
    let root = x.id.clone();
    let prem_nested = p.premises[0].conclusion.as_nested()?.clone();
    let sub = stl(&p.premises[0], gen)?;
    if axiom.antecedent.is_empty() && axiom.consequent.is_empty() {
        let mut params = Params::default();
        params.axiom = Some(axiom);
        params.x = Some(root);
        return Ok(Proof::step(Sequent::Labeled(lx.clone()), RuleId::LGp, params, vec![sub]));
    }
    if axiom.antecedent.is_empty() {
        // The nested rule realizes the consequent chain at a fresh holder;
        // one substitution folds the holder back onto the root, where the
        // labeled rule expects the cycle.
        let chain = p
            .params
            .premise_chain
            .clone()
            .ok_or_else(|| internal("structural step without a premise chain"))?;
        let holder = chain.last().cloned().ok_or_else(|| internal("empty premise chain"))?;
        let mut params = Params::default();
        params.axiom = Some(axiom);
        params.x = Some(root.clone());
        params.sigma_labels = Some(chain[..chain.len() - 1].to_vec());
        let derived = only_premise(apply_rule(
            &Sequent::Labeled(lx.clone()),
            RuleId::LGp,
            &params,
        )?)?;
        let folded = substitute(&lab(&prem_nested), &root, &holder);
        if !labeled_equal(&folded, derived.as_labeled()?) {
            return Err(internal("reflexive structural image mismatch"));
        }
        let mut ls = Params::default();
        ls.x = Some(root);
        ls.y = Some(holder);
        let mid = Proof::step(derived.clone(), RuleId::LS, ls, vec![sub]);
        return Ok(Proof::step(Sequent::Labeled(lx.clone()), RuleId::LGp, params, vec![mid]));
    }
    // Both sides nonempty: the labeled premise keeps the antecedent chain
    // that the nested premise discards, so the subproof is weakened by the
    // antecedent atoms height-preservingly before the labeled rule fires.
    let top = p
        .params
        .child
        .clone()
        .ok_or_else(|| internal("structural step without a chain top"))?;
    let concl_ids = chain_node_ids(x, &top, axiom.antecedent.len())?;
    let holder = concl_ids.last().cloned().expect("nonempty chain");
    let sigma_chain = p
        .params
        .premise_chain
        .clone()
        .ok_or_else(|| internal("structural step without a premise chain"))?;
    let mut params = Params::default();
    params.axiom = Some(axiom);
    params.x = Some(root);
    params.y = Some(holder);
    params.pi_labels = Some(concl_ids[..concl_ids.len() - 1].to_vec());
    params.sigma_labels = Some(sigma_chain[..sigma_chain.len() - 1].to_vec());
    let derived = only_premise(apply_rule(&Sequent::Labeled(lx.clone()), RuleId::LGp, &params)?)?;
    let delta = labeled_diff(derived.as_labeled()?, &lab(&prem_nested));
    if !delta.lformulas.is_empty() {
        return Err(internal("antecedent chain interiors carry formulas"));
    }
    let weakened = hp_weaken(&sub, &delta, gen);
    if !labeled_equal(weakened.conclusion.as_labeled()?, derived.as_labeled()?) {
        return Err(internal("weakened structural premise mismatch"));
    }
    Ok(Proof::step(Sequent::Labeled(lx.clone()), RuleId::LGp, params, vec![weakened]))
}

// ---------------------------------------------------------------------------
// Structural elimination.

/// Remove every labeled structural step from a labeled structural proof,
/// yielding a propagation-style proof with the same end sequent. Structural
/// axioms must all be path axioms. Substitution steps are pushed into their
/// subproofs first; each topmost structural step is then absorbed by
/// deleting the atom it introduced, rerouting the propagations that used it
/// through grammar-verified witnesses.
pub fn eliminate_structural(p: &Proof, calculus: &CalculusId) -> Result<Proof, TranslateError> {
    ensure_system(calculus, System::LktLabSt)?;
    ensure_accepted(p, calculus)?;
    let axioms = calculus
        .path_axioms()
        .map_err(|e| TranslateError::Scope(e.to_string()))?;
    let grammar = crate::axioms::build_grammar(&axioms);
    let mut gen = seed_gen(p);
    let mut q = purge_substitutions(p, &mut gen)?;
    while let Some(addr) = topmost_structural(&q) {
        q = rewrite_at(&q, &addr, &mut |node| absorb_structural(node, &grammar))?;
    }
    let target = retarget(calculus, System::LktLabPr)?;
    ensure_output(&q, &target, "eliminate_structural")?;
    Ok(q)
}

fn topmost_structural(p: &Proof) -> Option<Vec<usize>> {
    for (k, q) in p.premises.iter().enumerate() {
        if let Some(mut a) = topmost_structural(q) {
            a.insert(0, k);
            return Some(a);
        }
    }
    if matches!(p.rule, RuleId::LGp | RuleId::LPath) {
        return Some(Vec::new());
    }
    None
}

fn rewrite_at(
    p: &Proof,
    addr: &[usize],
    f: &mut impl FnMut(&Proof) -> Result<Proof, TranslateError>,
) -> Result<Proof, TranslateError> {
    if addr.is_empty() {
        return f(p);
    }
    let mut q = p.clone();
    q.premises[addr[0]] = rewrite_at(&p.premises[addr[0]], &addr[1..], f)?;
    Ok(q)
}

fn absorb_structural(p: &Proof, grammar: &PathGrammar) -> Result<Proof, TranslateError> {
    let c = p.conclusion.as_labeled()?;
    let sub = &p.premises[0];
    let d = sub.conclusion.as_labeled()?;
    let added: Vec<(Label, Label)> = d.rel.difference(&c.rel).cloned().collect();
    match added.len() {
        // The step changed nothing; splice the subproof in directly.
        0 => Ok(sub.clone()),
        1 => {
            let out = hp_delete(sub, &added[0], grammar)?;
            if !labeled_equal(out.conclusion.as_labeled()?, c) {
                return Err(internal("atom deletion missed the structural conclusion"));
            }
            Ok(out)
        }
        _ => Err(internal("a path axiom step added more than one atom")),
    }
}

fn path_traverses(path: &PropPath, a: &(Label, Label)) -> bool {
    path.nodes.windows(2).zip(&path.dias).any(|(w, d)| match d {
        Diamond::White => w[0] == a.0 && w[1] == a.1,
        Diamond::Black => w[1] == a.0 && w[0] == a.1,
    })
}

// Height-preserving deletion of one relational atom. Rules that never
// touch the atom pass through; diamond steps along it become propagation
// steps with a fresh grammar witness, and propagation witnesses through it
// are recomputed the same way.
fn hp_delete(
    p: &Proof,
    a: &(Label, Label),
    grammar: &PathGrammar,
) -> Result<Proof, TranslateError> {
    let c = p.conclusion.as_labeled()?;
    let mut c2 = c.clone();
    if !c2.rel.remove(a) {
        return Err(internal("atom to delete is absent"));
    }
    let conclusion = Sequent::Labeled(c2.clone());
    let recurse = |prems: &[Proof]| -> Result<Vec<Proof>, TranslateError> {
        prems.iter().map(|q| hp_delete(q, a, grammar)).collect()
    };
    match p.rule {
        RuleId::Id
        | RuleId::LOr
        | RuleId::LAnd
        | RuleId::LBox
        | RuleId::LBBox
        | RuleId::LC => Ok(Proof::step(
            conclusion,
            p.rule,
            p.params.clone(),
            recurse(&p.premises)?,
        )),
        RuleId::LW => {
            let part = p
                .params
                .part
                .as_ref()
                .ok_or_else(|| internal("weakening without a part"))?;
            if part.rel.contains(a) {
                let mut part2 = part.clone();
                part2.rel.remove(a);
                // The atom never existed above this weakening.
                if part2.rel.is_empty() && part2.lformulas.is_empty() {
                    return Ok(p.premises[0].clone());
                }
                let mut params = Params::default();
                params.part = Some(part2);
                Ok(Proof::step(conclusion, RuleId::LW, params, vec![p.premises[0].clone()]))
            } else {
                Ok(Proof::step(conclusion, RuleId::LW, p.params.clone(), recurse(&p.premises)?))
            }
        }
        RuleId::LDia | RuleId::LBDia => {
            let x = p.params.x.clone().ok_or_else(|| internal("diamond step without x"))?;
            let y = p.params.y.clone().ok_or_else(|| internal("diamond step without y"))?;
            let (atom, letter) = if p.rule == RuleId::LDia {
                ((x.clone(), y.clone()), Diamond::White)
            } else {
                ((y.clone(), x.clone()), Diamond::Black)
            };
            if atom != *a {
                return Ok(Proof::step(
                    conclusion,
                    p.rule,
                    p.params.clone(),
                    recurse(&p.premises)?,
                ));
            }
            let path = reachable(&pg_of_labeled(&c2), &x, &y, letter, grammar)?
                .ok_or_else(|| internal("no replacement witness after atom deletion"))?;
            let mut params = Params::default();
            params.formula = p.params.formula.clone();
            params.x = Some(x);
            params.y = Some(y);
            params.path = Some(path);
            Ok(Proof::step(conclusion, RuleId::LProp, params, recurse(&p.premises)?))
        }
        RuleId::LProp => {
            let path = p
                .params
                .path
                .as_ref()
                .ok_or_else(|| internal("propagation step without a witness"))?;
            if !path_traverses(path, a) {
                return Ok(Proof::step(
                    conclusion,
                    RuleId::LProp,
                    p.params.clone(),
                    recurse(&p.premises)?,
                ));
            }
            let f = p
                .params
                .formula
                .as_ref()
                .ok_or_else(|| internal("propagation step without a formula"))?;
            let letter =
                diamond_letter(f).ok_or_else(|| internal("propagation principal not a diamond"))?;
            let x = p.params.x.clone().ok_or_else(|| internal("propagation step without x"))?;
            let y = p.params.y.clone().ok_or_else(|| internal("propagation step without y"))?;
            let newpath = reachable(&pg_of_labeled(&c2), &x, &y, letter, grammar)?
                .ok_or_else(|| internal("no rerouted witness after atom deletion"))?;
            let mut params = p.params.clone();
            params.path = Some(newpath);
            Ok(Proof::step(conclusion, RuleId::LProp, params, recurse(&p.premises)?))
        }
        RuleId::LS => Err(internal("substitution step survived the purge")),
        RuleId::LGp | RuleId::LPath => Err(internal("structural step above a topmost one")),
        other => Err(internal(format!("rule {other} in a labeled proof"))),
    }
}

// ---------------------------------------------------------------------------
// Labeled propagation to deep nested.

/// Read a structural-free labeled proof as a deep nested proof. Every
/// sequent must be a polytree; each is rendered as a nested sequent rooted
/// at `start` (defaulting to the end sequent's formula label, then to the
/// least label shared by every sequent). Labeled boxes become deep boxes
/// followed by a deep weakening of the copied principal, diamond steps pick
/// the deep rule matching the edge's direction, and weakening and
/// contraction replay per node.
pub fn labeled_to_deep(
    p: &Proof,
    calculus: &CalculusId,
    start: Option<&str>,
) -> Result<Proof, TranslateError> {
    ensure_system(calculus, System::LktLabPr)?;
    ensure_accepted(p, calculus)?;
    let mut gen = seed_gen(p);
    let p = purge_substitutions(p, &mut gen)?;
    let mut common: Option<BTreeSet<Label>> = None;
    collect_common_labels(&p, &mut common)?;
    let common = common.unwrap_or_default();
    let root = match start {
        Some(s) => {
            if !common.contains(s) {
                return Err(TranslateError::Unsupported(format!(
                    "start label '{s}' does not occur in every sequent"
                )));
            }
            s.to_string()
        }
        None => {
            let end = p.conclusion.as_labeled()?;
            let distinguished = match (&end.lformulas[..], end.rel.is_empty()) {
                ([(l, _)], true) => Some(l.clone()),
                _ => None,
            };
            match distinguished.filter(|l| common.contains(l)) {
                Some(l) => l,
                None => common
                    .iter()
                    .next()
                    .cloned()
                    .ok_or_else(|| {
                        TranslateError::Unsupported(
                            "no label occurs in every sequent of the proof".to_string(),
                        )
                    })?,
            }
        }
    };
    let out = ltd(&p, &root)?;
    let target = retarget(calculus, System::DktDeepPr)?;
    ensure_output(&out, &target, "labeled_to_deep")?;
    Ok(out)
}

fn collect_common_labels(
    p: &Proof,
    common: &mut Option<BTreeSet<Label>>,
) -> Result<(), TranslateError> {
    let l = p.conclusion.as_labeled()?;
    if !crate::polytree::is_polytree_sequent(l) {
        return Err(internal("non-polytree sequent in a propagation proof"));
    }
    let labels = l.labels();
    *common = Some(match common.take() {
        None => labels,
        Some(c) => c.intersection(&labels).cloned().collect(),
    });
    for q in &p.premises {
        collect_common_labels(q, common)?;
    }
    Ok(())
}

fn render(l: &LabeledSequent, root: &str) -> Result<NestedSequent, TranslateError> {
    Ok(to_nested(root, &graph_of(l))?)
}

fn ltd(p: &Proof, root: &str) -> Result<Proof, TranslateError> {
    let l = p.conclusion.as_labeled()?;
    let n = render(l, root)?;
    let conclusion = Sequent::Nested(n.clone());
    match p.rule {
        RuleId::Id => {
            let mut params = Params::default();
            params.atom = p.params.atom.clone();
            params.node = p.params.x.clone();
            Ok(Proof::step(conclusion, RuleId::Id, params, Vec::new()))
        }
        RuleId::LOr | RuleId::LAnd => {
            let rule = if p.rule == RuleId::LOr { RuleId::Or } else { RuleId::And };
            let mut params = Params::default();
            params.formula = p.params.formula.clone();
            params.node = p.params.x.clone();
            let premises: Vec<Proof> =
                p.premises.iter().map(|q| ltd(q, root)).collect::<Result<_, _>>()?;
            Ok(Proof::step(conclusion, rule, params, premises))
        }
        RuleId::LBox | RuleId::LBBox => {
            let rule = if p.rule == RuleId::LBox { RuleId::WBox } else { RuleId::BBox };
            let f = p
                .params
                .formula
                .clone()
                .ok_or_else(|| internal("box step without a formula"))?;
            let at = p.params.x.clone().ok_or_else(|| internal("box step without x"))?;
            let mut box_params = Params::default();
            box_params.formula = Some(f.clone());
            box_params.node = Some(at.clone());
            box_params.fresh = p.params.fresh.clone();
            let mid = only_premise(apply_rule(&conclusion, rule, &box_params)?)?;
            // The labeled rule consumed its principal; shed the deep copy.
            let mut w_params = Params::default();
            w_params.node = Some(at.clone());
            w_params.structure = Some(NestedSequent {
                id: at,
                formulas: vec![f],
                children: Vec::new(),
            });
            let derived = only_premise(apply_rule(&mid, RuleId::W, &w_params)?)?;
            let want = render(p.premises[0].conclusion.as_labeled()?, root)?;
            if !nested_equal(derived.as_nested()?, &want) {
                return Err(internal("deep box image mismatch"));
            }
            let sub = ltd(&p.premises[0], root)?;
            let inner = Proof::step(mid, RuleId::W, w_params, vec![sub]);
            Ok(Proof::step(conclusion, rule, box_params, vec![inner]))
        }
        RuleId::LDia | RuleId::LBDia => {
            let x = p.params.x.clone().ok_or_else(|| internal("diamond step without x"))?;
            let y = p.params.y.clone().ok_or_else(|| internal("diamond step without y"))?;
            let want = if p.rule == RuleId::LDia { Diamond::White } else { Diamond::Black };
            let down = matches!(n.parent_of(&y), Some((parent, pol)) if parent.id == x && pol == want);
            let up = matches!(n.parent_of(&x), Some((parent, pol)) if parent.id == y && pol == want.dual());
            let rule = match (p.rule, down, up) {
                (RuleId::LDia, true, _) => RuleId::Dia1,
                (RuleId::LDia, _, true) => RuleId::Dia2,
                (RuleId::LBDia, true, _) => RuleId::BDia1,
                (RuleId::LBDia, _, true) => RuleId::BDia2,
                _ => return Err(internal("diamond edge is not a rendered tree edge")),
            };
            let mut params = Params::default();
            params.formula = p.params.formula.clone();
            params.node = Some(x);
            params.target = Some(y);
            Ok(Proof::step(conclusion, rule, params, vec![ltd(&p.premises[0], root)?]))
        }
        RuleId::LProp => {
            let mut params = Params::default();
            params.formula = p.params.formula.clone();
            params.node = p.params.x.clone();
            params.target = p.params.y.clone();
            params.path = p.params.path.clone();
            Ok(Proof::step(conclusion, RuleId::Dp, params, vec![ltd(&p.premises[0], root)?]))
        }
        RuleId::LW => {
            let want = render(p.premises[0].conclusion.as_labeled()?, root)?;
            let items = nested_diff_items(&n, &want);
            let mut seqs = vec![n.clone()];
            let mut cur = Sequent::Nested(n);
            let mut step_params = Vec::new();
            for (node, structure) in items {
                let mut params = Params::default();
                params.node = Some(node);
                params.structure = Some(structure);
                cur = only_premise(apply_rule(&cur, RuleId::W, &params)?)?;
                seqs.push(cur.as_nested()?.clone());
                step_params.push(params);
            }
            if !nested_equal(cur.as_nested()?, &want) {
                return Err(internal("deep weakening image mismatch"));
            }
            let mut out = ltd(&p.premises[0], root)?;
            for k in (0..step_params.len()).rev() {
                out = Proof::step(
                    Sequent::Nested(seqs[k].clone()),
                    RuleId::W,
                    step_params[k].clone(),
                    vec![out],
                );
            }
            Ok(out)
        }
        RuleId::LC => {
            let part = p
                .params
                .part
                .as_ref()
                .ok_or_else(|| internal("contraction without a part"))?;
            let mut by_label: BTreeMap<Label, Vec<Formula>> = BTreeMap::new();
            for (l0, f) in &part.lformulas {
                by_label.entry(l0.clone()).or_default().push(f.clone());
            }
            let want = render(p.premises[0].conclusion.as_labeled()?, root)?;
            let mut seqs = Vec::new();
            let mut cur = Sequent::Nested(n);
            let mut step_params = Vec::new();
            for (node, formulas) in by_label {
                let mut params = Params::default();
                params.node = Some(node.clone());
                params.structure = Some(NestedSequent {
                    id: node,
                    formulas,
                    children: Vec::new(),
                });
                seqs.push(cur.as_nested()?.clone());
                cur = only_premise(apply_rule(&cur, RuleId::C, &params)?)?;
                step_params.push(params);
            }
            if !nested_equal(cur.as_nested()?, &want) {
                return Err(internal("deep contraction image mismatch"));
            }
            let mut out = ltd(&p.premises[0], root)?;
            for k in (0..step_params.len()).rev() {
                out = Proof::step(
                    Sequent::Nested(seqs[k].clone()),
                    RuleId::C,
                    step_params[k].clone(),
                    vec![out],
                );
            }
            Ok(out)
        }
        RuleId::LS => Err(internal("substitution step survived the purge")),
        RuleId::Hyp => Err(TranslateError::InputRejected(
            "open assumption in the input proof".to_string(),
        )),
        other => Err(internal(format!("rule {other} in a labeled proof"))),
    }
}

// Per-node differences between two renderings of the same proof step:
// removed formulas and removed whole subtrees, grouped per surviving node.
fn nested_diff_items(n: &NestedSequent, want: &NestedSequent) -> Vec<(Label, NestedSequent)> {
    let mut items = Vec::new();
    walk_diff(n, want, &mut items);
    items
}

fn walk_diff(n: &NestedSequent, want: &NestedSequent, items: &mut Vec<(Label, NestedSequent)>) {
    let fdiff = multiset_diff(&n.formulas, &want.node(&n.id).map(|w| w.formulas.clone()).unwrap_or_default());
    let mut gone = Vec::new();
    for (pol, c) in &n.children {
        if want.node(&c.id).is_some() {
            walk_diff(c, want, items);
        } else {
            gone.push((*pol, c.clone()));
        }
    }
    if !fdiff.is_empty() || !gone.is_empty() {
        items.push((
            n.id.clone(),
            NestedSequent {
                id: n.id.clone(),
                formulas: fdiff,
                children: gone,
            },
        ));
    }
}

// ---------------------------------------------------------------------------
// Deep nested to shallow nested.

/// Expand a deep nested proof into a shallow one with the same end sequent.
/// Each deep rule displays its node to the root and applies the shallow
/// rule there; deep boxes contract their principal first, since the shallow
/// box consumes it. Deep propagation steps are expanded through the parse
/// tree of their witness: intermediate nodes are weakened bare, axiom
/// productions fold chain segments with structural steps (inverse members
/// fire from the displayed far end), and the diamond then propagates across
/// the folded edge.
pub fn deep_to_shallow(p: &Proof, calculus: &CalculusId) -> Result<Proof, TranslateError> {
    ensure_system(calculus, System::DktDeepPr)?;
    ensure_accepted(p, calculus)?;
    let p = normalize_nested(p)?;
    let axioms = calculus
        .path_axioms()
        .map_err(|e| TranslateError::Scope(e.to_string()))?;
    let grammar = crate::axioms::build_grammar(&axioms);
    let mut ctx = DtsCtx {
        grammar,
        axioms,
        gen: seed_gen(&p),
    };
    let cur = p.conclusion.as_nested()?.clone();
    let out = dts(&p, cur, &mut ctx)?;
    let target = retarget(calculus, System::SktNestSt)?;
    ensure_output(&out, &target, "deep_to_shallow")?;
    if !nested_equal(out.conclusion.as_nested()?, p.conclusion.as_nested()?) {
        return Err(internal("shallow expansion changed the end sequent"));
    }
    Ok(out)
}

struct DtsCtx {
    grammar: PathGrammar,
    axioms: Vec<PathAxiom>,
    gen: LabelGen,
}

// A bottom-up ladder of single-premise shallow steps under construction.
struct Expander {
    chain: Vec<(NestedSequent, RuleId, Params)>,
    cur: NestedSequent,
}

impl Expander {
    fn new(cur: NestedSequent) -> Expander {
        Expander {
            chain: Vec::new(),
            cur,
        }
    }

    fn push(&mut self, rule: RuleId, params: Params) -> Result<(), TranslateError> {
        let prem = only_premise(apply_rule(&Sequent::Nested(self.cur.clone()), rule, &params)?)?;
        let prem = prem.as_nested()?.clone();
        self.chain.push((self.cur.clone(), rule, params));
        self.cur = prem;
        Ok(())
    }

    fn display_to(&mut self, target: &str) -> Result<(), TranslateError> {
        while self.cur.id != target {
            let (hop, pol) = hop_toward(&self.cur, target)?;
            let rule = match pol {
                Diamond::Black => RuleId::Rf,
                Diamond::White => RuleId::Rp,
            };
            let mut params = Params::default();
            params.child = Some(hop);
            self.push(rule, params)?;
        }
        Ok(())
    }

    fn seal(self, top: Proof) -> Proof {
        let mut out = top;
        for (concl, rule, params) in self.chain.into_iter().rev() {
            out = Proof::step(Sequent::Nested(concl), rule, params, vec![out]);
        }
        out
    }
}

fn hop_toward(cur: &NestedSequent, target: &str) -> Result<(Label, Diamond), TranslateError> {
    for (pol, c) in &cur.children {
        if c.node(target).is_some() {
            return Ok((c.id.clone(), *pol));
        }
    }
    Err(internal(format!("node '{target}' is not below the current root")))
}

fn rename_node(n: &mut NestedSequent, old: &str, new: &str) {
    if n.id == old {
        n.id = new.to_string();
    }
    for (_, c) in &mut n.children {
        rename_node(c, old, new);
    }
}

// Does the arc a -> b exist in the rendered tree?
fn arc_in(cur: &NestedSequent, a: &str, b: &str) -> bool {
    matches!(cur.parent_of(b), Some((p, Diamond::White)) if p.id == a)
        || matches!(cur.parent_of(a), Some((p, Diamond::Black)) if p.id == b)
}

fn edge_ok(cur: &NestedSequent, u: &str, d: Diamond, v: &str) -> bool {
    match d {
        Diamond::White => arc_in(cur, u, v),
        Diamond::Black => arc_in(cur, v, u),
    }
}

fn declared_eps(axioms: &[PathAxiom], d: Diamond) -> Option<&PathAxiom> {
    axioms.iter().find(|a| a.antecedent.is_empty() && a.consequent == d)
}

// The tracked sequent follows the deep proof but may have shed pruned
// content and gained junk siblings from propagation expansions. Steps whose
// principal is gone are skipped, which is sound because the tracked sequent
// still sits inside the deep premise.
fn dts(p: &Proof, cur: NestedSequent, ctx: &mut DtsCtx) -> Result<Proof, TranslateError> {
    let skip = |ctx: &mut DtsCtx, cur: NestedSequent| dts(&p.premises[0], cur, ctx);
    match p.rule {
        RuleId::Id => {
            let at = p.params.node.clone().ok_or_else(|| internal("deep id without a node"))?;
            let atom = p.params.atom.clone().ok_or_else(|| internal("id without an atom"))?;
            let node = cur.node(&at).ok_or_else(|| {
                TranslateError::Unsupported(format!(
                    "initial node '{at}' was pruned by a propagation expansion"
                ))
            })?;
            let (pos, neg) = (Formula::pos(&atom), Formula::neg(&atom));
            if !node.formulas.contains(&pos) || !node.formulas.contains(&neg) {
                return Err(TranslateError::Unsupported(format!(
                    "the dual pair at '{at}' was pruned by a propagation expansion"
                )));
            }
            let mut ex = Expander::new(cur);
            ex.display_to(&at)?;
            let mut params = Params::default();
            params.atom = Some(atom);
            let top = Proof::step(Sequent::Nested(ex.cur.clone()), RuleId::Id, params, Vec::new());
            Ok(ex.seal(top))
        }
        RuleId::Or | RuleId::And => {
            let at = p.params.node.clone().ok_or_else(|| internal("deep step without a node"))?;
            let f = p.params.formula.clone().ok_or_else(|| internal("step without a formula"))?;
            let present = cur.node(&at).map(|n| n.formulas.contains(&f)).unwrap_or(false);
            if !present {
                return skip(ctx, cur);
            }
            let mut ex = Expander::new(cur);
            ex.display_to(&at)?;
            let mut params = Params::default();
            params.formula = Some(f);
            let derived = apply_rule(&Sequent::Nested(ex.cur.clone()), p.rule, &params)?;
            let mut subs = Vec::new();
            for (k, prem) in derived.into_iter().enumerate() {
                subs.push(dts(&p.premises[k], prem.as_nested()?.clone(), ctx)?);
            }
            let top = Proof::step(Sequent::Nested(ex.cur.clone()), p.rule, params, subs);
            Ok(ex.seal(top))
        }
        RuleId::WBox | RuleId::BBox => {
            let at = p.params.node.clone().ok_or_else(|| internal("deep box without a node"))?;
            let f = p.params.formula.clone().ok_or_else(|| internal("box without a formula"))?;
            let fresh = p.params.fresh.clone().ok_or_else(|| internal("box without a fresh id"))?;
            let present = cur.node(&at).map(|n| n.formulas.contains(&f)).unwrap_or(false);
            if !present {
                return skip(ctx, cur);
            }
            let mut ex = Expander::new(cur);
            ex.display_to(&at)?;
            // The shallow box consumes its principal; contract it first so
            // the deep premise keeps a copy.
            let mut c_params = Params::default();
            c_params.structure = Some(NestedSequent {
                id: ex.cur.id.clone(),
                formulas: vec![f.clone()],
                children: Vec::new(),
            });
            ex.push(RuleId::C, c_params)?;
            let mut b_params = Params::default();
            b_params.formula = Some(f);
            b_params.fresh = Some(fresh);
            ex.push(p.rule, b_params)?;
            let sub = dts(&p.premises[0], ex.cur.clone(), ctx)?;
            Ok(ex.seal(sub))
        }
        RuleId::C => {
            let at = p.params.node.clone().ok_or_else(|| internal("deep step without a node"))?;
            let structure =
                p.params.structure.clone().ok_or_else(|| internal("contraction without a structure"))?;
            let present = cur
                .node(&at)
                .map(|n| n.contains_part(&structure))
                .unwrap_or(false);
            if !present {
                return skip(ctx, cur);
            }
            let mut ex = Expander::new(cur);
            ex.display_to(&at)?;
            // Reuse the ids the deep contraction minted for its copy, so
            // later deep steps still address the tracked tree.
            let deep_concl = p.conclusion.as_nested()?;
            let deep_prem = p.premises[0].conclusion.as_nested()?;
            let have: BTreeSet<Label> = deep_concl
                .node(&at)
                .map(|n| n.children.iter().map(|(_, c)| c.id.clone()).collect())
                .unwrap_or_default();
            let new_children: Vec<(Diamond, NestedSequent)> = deep_prem
                .node(&at)
                .map(|n| {
                    n.children
                        .iter()
                        .filter(|(_, c)| !have.contains(&c.id))
                        .cloned()
                        .collect()
                })
                .unwrap_or_default();
            let mut c_params = Params::default();
            c_params.structure = Some(structure.clone());
            ex.chain.push((ex.cur.clone(), RuleId::C, c_params));
            let mut next = ex.cur.clone();
            next.formulas.extend(structure.formulas.clone());
            next.children.extend(new_children);
            ex.cur = next;
            let sub = dts(&p.premises[0], ex.cur.clone(), ctx)?;
            Ok(ex.seal(sub))
        }
        RuleId::W => {
            let at = p.params.node.clone().ok_or_else(|| internal("deep step without a node"))?;
            let structure =
                p.params.structure.clone().ok_or_else(|| internal("weakening without a structure"))?;
            let Some(node) = cur.node(&at) else {
                return skip(ctx, cur);
            };
            let part = intersect_part(node, &structure);
            if part.formulas.is_empty() && part.children.is_empty() {
                return skip(ctx, cur);
            }
            let mut ex = Expander::new(cur);
            ex.display_to(&at)?;
            let mut params = Params::default();
            params.structure = Some(part);
            ex.push(RuleId::W, params)?;
            let sub = dts(&p.premises[0], ex.cur.clone(), ctx)?;
            Ok(ex.seal(sub))
        }
        RuleId::Dia1 | RuleId::Dia2 | RuleId::BDia1 | RuleId::BDia2 => {
            let at = p.params.node.clone().ok_or_else(|| internal("deep step without a node"))?;
            let f = p.params.formula.clone().ok_or_else(|| internal("step without a formula"))?;
            let target =
                p.params.target.clone().ok_or_else(|| internal("diamond step without a target"))?;
            let want = match p.rule {
                RuleId::Dia1 | RuleId::Dia2 => Diamond::White,
                _ => Diamond::Black,
            };
            let present = cur.node(&at).map(|n| n.formulas.contains(&f)).unwrap_or(false);
            // The tracked tree may be displayed differently from the deep
            // tree, so test the arc itself, not the child orientation.
            let edge = edge_ok(&cur, &at, want, &target);
            if !present || !edge {
                return skip(ctx, cur);
            }
            let mut ex = Expander::new(cur);
            ex.display_to(&at)?;
            let rule = if want == Diamond::White { RuleId::WDia } else { RuleId::BDia };
            let mut params = Params::default();
            params.formula = Some(f);
            params.child = Some(target);
            ex.push(rule, params)?;
            let sub = dts(&p.premises[0], ex.cur.clone(), ctx)?;
            Ok(ex.seal(sub))
        }
        RuleId::Dp => dts_propagation(p, cur, ctx),
        RuleId::Hyp => Err(TranslateError::InputRejected(
            "open assumption in the input proof".to_string(),
        )),
        other => Err(internal(format!("rule {other} in a deep proof"))),
    }
}

// The part of `structure` still present at a tracked node, matched by id
// where possible and by canonical key otherwise.
fn intersect_part(node: &NestedSequent, structure: &NestedSequent) -> NestedSequent {
    let mut out = NestedSequent {
        id: structure.id.clone(),
        formulas: Vec::new(),
        children: Vec::new(),
    };
    let mut rest: Vec<&Formula> = node.formulas.iter().collect();
    for f in &structure.formulas {
        if let Some(k) = rest.iter().position(|g| *g == f) {
            rest.remove(k);
            out.formulas.push(f.clone());
        }
    }
    let mut used = vec![false; node.children.len()];
    for (pol, sc) in &structure.children {
        let mut hit = None;
        for (k, (npol, nc)) in node.children.iter().enumerate() {
            if used[k] || npol != pol {
                continue;
            }
            if nc.id == sc.id || nc.canonical_key() == sc.canonical_key() {
                hit = Some(k);
                break;
            }
        }
        if let Some(k) = hit {
            used[k] = true;
            let nc = &node.children[k].1;
            if nc.canonical_key() == sc.canonical_key() {
                out.children.push((*pol, nc.clone()));
            } else {
                let inner = intersect_part(nc, sc);
                if !inner.formulas.is_empty() || !inner.children.is_empty() {
                    out.children.push((*pol, inner));
                }
            }
        }
    }
    out
}

fn dts_propagation(p: &Proof, cur: NestedSequent, ctx: &mut DtsCtx) -> Result<Proof, TranslateError> {
    let f = p.params.formula.clone().ok_or_else(|| internal("propagation without a formula"))?;
    let i = p.params.node.clone().ok_or_else(|| internal("propagation without a node"))?;
    let j = p.params.target.clone().ok_or_else(|| internal("propagation without a target"))?;
    let path = p.params.path.clone().ok_or_else(|| internal("propagation without a witness"))?;
    let d = diamond_letter(&f).ok_or_else(|| internal("propagation principal not a diamond"))?;
    let skip = |ctx: &mut DtsCtx, cur: NestedSequent| dts(&p.premises[0], cur, ctx);
    let present = cur.node(&i).map(|n| n.formulas.contains(&f)).unwrap_or(false);
    if !present || cur.node(&j).is_none() {
        return skip(ctx, cur);
    }
    let mut seen = BTreeSet::new();
    for v in &path.nodes {
        if !seen.insert(v.clone()) {
            return Err(TranslateError::Unsupported(
                "the propagation witness revisits a node; no chain to fold".to_string(),
            ));
        }
    }
    let n = path.dias.len();
    for k in 0..n {
        if !edge_ok(&cur, &path.nodes[k], path.dias[k], &path.nodes[k + 1]) {
            return skip(ctx, cur);
        }
    }
    let mut ex = Expander::new(cur);
    if n == 0 {
        dts_reflexive(&mut ex, &f, &i, d, ctx)?;
    } else {
        // Bare the witness chain: interior content cannot survive a fold.
        for k in 1..n {
            let m = path.nodes[k].clone();
            ex.display_to(&m)?;
            let keep: BTreeSet<&Label> = [&path.nodes[k - 1], &path.nodes[k + 1]].into_iter().collect();
            let extra: Vec<(Diamond, NestedSequent)> = ex
                .cur
                .children
                .iter()
                .filter(|(_, c)| !keep.contains(&c.id))
                .cloned()
                .collect();
            if !ex.cur.formulas.is_empty() || !extra.is_empty() {
                let mut params = Params::default();
                params.structure = Some(NestedSequent {
                    id: m,
                    formulas: ex.cur.formulas.clone(),
                    children: extra,
                });
                ex.push(RuleId::W, params)?;
            }
        }
        // Fold the inverted reading of the witness, seen from the target.
        let inv_word: Vec<Diamond> = path.dias.iter().rev().map(|d| d.dual()).collect();
        let tree = parse_tree(&ctx.grammar, &inv_word, d.dual())
            .ok_or_else(|| internal("witness word left the completion"))?;
        let mut chain: Vec<Label> = path.nodes.iter().rev().cloned().collect();
        fold_segment(&mut ex, &tree, &mut chain, 0, ctx)?;
        if chain.len() != 2 {
            return Err(internal("fold did not reduce the witness to one edge"));
        }
        let top = chain[1].clone();
        ex.display_to(&top)?;
        let rule = if d == Diamond::White { RuleId::WDia } else { RuleId::BDia };
        let mut params = Params::default();
        params.formula = Some(f);
        params.child = Some(chain[0].clone());
        ex.push(rule, params)?;
        // An end wrap may have moved the principal's node to a fresh id;
        // give it back its deep name for later addressing.
        if ex.cur.node(&i).is_none() {
            rename_node(&mut ex.cur, &top, &i);
        }
    }
    let sub = dts(&p.premises[0], ex.cur.clone(), ctx)?;
    Ok(ex.seal(sub))
}

// A reflexive propagation: realize an empty witness as a fresh structural
// hop and route the diamond across it.
fn dts_reflexive(
    ex: &mut Expander,
    f: &Formula,
    i: &str,
    d: Diamond,
    ctx: &mut DtsCtx,
) -> Result<(), TranslateError> {
    ex.display_to(i)?;
    if let Some(axiom) = declared_eps(&ctx.axioms, d).cloned() {
        // Wrap the node's content into the hop, propagate into it, and step
        // inside; the wrap then carries the node's identity.
        let view = ex.cur.clone();
        let whole = NestedSequent {
            id: view.id.clone(),
            formulas: view.formulas.clone(),
            children: view.children.clone(),
        };
        let mut c_params = Params::default();
        c_params.structure = Some(whole.clone());
        ex.push(RuleId::C, c_params)?;
        let v = ctx.gen.fresh();
        let mut params = Params::default();
        params.axiom = Some(axiom.to_general());
        params.structure = Some(whole);
        params.premise_chain = Some(vec![v.clone()]);
        ex.push(RuleId::Path, params)?;
        let rule = if d == Diamond::White { RuleId::WDia } else { RuleId::BDia };
        let mut d_params = Params::default();
        d_params.formula = Some(f.clone());
        d_params.child = Some(v.clone());
        ex.push(rule, d_params)?;
        let disp = if d == Diamond::White { RuleId::Rp } else { RuleId::Rf };
        let mut r_params = Params::default();
        r_params.child = Some(v.clone());
        ex.push(disp, r_params)?;
        let jx = ctx.gen.fresh();
        rename_node(&mut ex.cur, i, &jx);
        rename_node(&mut ex.cur, &v, i);
        Ok(())
    } else if let Some(axiom) = declared_eps(&ctx.axioms, d.dual()).cloned() {
        // Only the dual orientation is declared: wrap a copy of the
        // principal instead and propagate back into the original node.
        let mut c_params = Params::default();
        c_params.structure = Some(NestedSequent {
            id: ex.cur.id.clone(),
            formulas: vec![f.clone()],
            children: Vec::new(),
        });
        ex.push(RuleId::C, c_params)?;
        let v = ctx.gen.fresh();
        let mut params = Params::default();
        params.axiom = Some(axiom.to_general());
        params.structure = Some(NestedSequent {
            id: ex.cur.id.clone(),
            formulas: vec![f.clone()],
            children: Vec::new(),
        });
        params.premise_chain = Some(vec![v.clone()]);
        ex.push(RuleId::Path, params)?;
        let disp = if d.dual() == Diamond::White { RuleId::Rp } else { RuleId::Rf };
        let mut r_params = Params::default();
        r_params.child = Some(v);
        ex.push(disp, r_params)?;
        let rule = if d == Diamond::White { RuleId::WDia } else { RuleId::BDia };
        let mut d_params = Params::default();
        d_params.formula = Some(f.clone());
        d_params.child = Some(i.to_string());
        ex.push(rule, d_params)?;
        Ok(())
    } else {
        Err(internal("empty witness without a reflexivity axiom"))
    }
}

// Fold the chain segment covered by one parse subtree into a single edge of
// the subtree's target letter. `chain` runs from the propagation target
// down to the principal's node.
fn fold_segment(
    ex: &mut Expander,
    tree: &ParseTree,
    chain: &mut Vec<Label>,
    start: usize,
    ctx: &mut DtsCtx,
) -> Result<(), TranslateError> {
    match tree {
        ParseTree::Identity(_) => Ok(()),
        ParseTree::Axiom {
            axiom,
            inverted,
            children,
        } => {
            if children.is_empty() {
                return wrap_eps(ex, chain, start, axiom, *inverted, ctx);
            }
            let mut pos = start;
            for c in children {
                fold_segment(ex, c, chain, pos, ctx)?;
                pos += 1;
            }
            let k = children.len();
            if !*inverted {
                ex.display_to(&chain[start].clone())?;
                let mut params = Params::default();
                params.axiom = Some(axiom.to_general());
                params.child = Some(chain[start + 1].clone());
                params.premise_chain = Some(vec![chain[start + k].clone()]);
                ex.push(RuleId::Path, params)?;
            } else {
                // The declared orientation reads the segment from its far
                // end, where display puts the root first.
                let orig = inverse(axiom);
                ex.display_to(&chain[start + k].clone())?;
                let mut params = Params::default();
                params.axiom = Some(orig.to_general());
                params.child = Some(chain[start + k - 1].clone());
                params.premise_chain = Some(vec![chain[start].clone()]);
                ex.push(RuleId::Path, params)?;
            }
            chain.drain(start + 1..start + k);
            Ok(())
        }
    }
}

// Insert a fresh empty hop into the chain for a nullable parse leaf.
fn wrap_eps(
    ex: &mut Expander,
    chain: &mut Vec<Label>,
    start: usize,
    axiom: &PathAxiom,
    inverted: bool,
    ctx: &mut DtsCtx,
) -> Result<(), TranslateError> {
    if inverted {
        return wrap_eps_inverted(ex, chain, start, axiom, ctx);
    }
    let at = chain[start].clone();
    ex.display_to(&at)?;
    let view = ex.cur.clone();
    let structure = if start + 1 == chain.len() {
        // Far end of the chain: wrap the node's whole content so the node
        // itself becomes a bare interior and the hop carries the content.
        let keep = chain[start - 1].clone();
        NestedSequent {
            id: view.id.clone(),
            formulas: view.formulas.clone(),
            children: view
                .children
                .iter()
                .filter(|(_, c)| c.id != keep)
                .cloned()
                .collect(),
        }
    } else {
        let next = chain[start + 1].clone();
        let child = view
            .children
            .iter()
            .find(|(_, c)| c.id == next)
            .cloned()
            .ok_or_else(|| internal("chain continuation is not a child"))?;
        NestedSequent {
            id: view.id.clone(),
            formulas: Vec::new(),
            children: vec![child],
        }
    };
    let nn = ctx.gen.fresh();
    let mut params = Params::default();
    params.axiom = Some(axiom.to_general());
    params.structure = Some(structure);
    params.premise_chain = Some(vec![nn.clone()]);
    ex.push(RuleId::Path, params)?;
    chain.insert(start + 1, nn);
    Ok(())
}

// An empty hop whose reflexivity axiom is declared in the dual orientation.
// The declared wrap alone points the hop arc away from the chain node, so
// no single rule produces the edge the segment needs. Instead: wrap the
// chain continuation into the hop with the declared axiom, wrap the node's
// remaining content aside the same way, then fold the two manufactured arcs
// with a declared confluence axiom, which reverses the hop and deletes the
// old node. The content wrap takes over the node's identity afterwards.
fn wrap_eps_inverted(
    ex: &mut Expander,
    chain: &mut Vec<Label>,
    start: usize,
    axiom: &PathAxiom,
    ctx: &mut DtsCtx,
) -> Result<(), TranslateError> {
    let declared = inverse(axiom);
    let r = declared.consequent;
    let flip = ctx
        .axioms
        .iter()
        .find(|a| {
            a.antecedent.len() == 2
                && a.antecedent[0] == r.dual()
                && a.antecedent[1] == r
                && a.consequent == r
        })
        .cloned()
        .ok_or_else(|| {
            TranslateError::Unsupported(
                "an empty witness segment in inverted orientation needs a \
                 declared confluence axiom to reverse the hop"
                    .to_string(),
            )
        })?;
    let at = chain[start].clone();
    ex.display_to(&at)?;
    let view = ex.cur.clone();
    let suffix: Vec<(Diamond, NestedSequent)> = if start + 1 < chain.len() {
        let next = chain[start + 1].clone();
        vec![view
            .children
            .iter()
            .find(|(_, c)| c.id == next)
            .cloned()
            .ok_or_else(|| internal("chain continuation is not a child"))?]
    } else {
        Vec::new()
    };
    let nn = ctx.gen.fresh();
    let mut params = Params::default();
    params.axiom = Some(declared.to_general());
    params.structure = Some(NestedSequent {
        id: view.id.clone(),
        formulas: Vec::new(),
        children: suffix,
    });
    params.premise_chain = Some(vec![nn.clone()]);
    ex.push(RuleId::Path, params)?;
    let view = ex.cur.clone();
    let w = ctx.gen.fresh();
    let mut params = Params::default();
    params.axiom = Some(declared.to_general());
    params.structure = Some(NestedSequent {
        id: view.id.clone(),
        formulas: view.formulas.clone(),
        children: view
            .children
            .iter()
            .filter(|(_, c)| c.id != nn)
            .cloned()
            .collect(),
    });
    params.premise_chain = Some(vec![w.clone()]);
    ex.push(RuleId::Path, params)?;
    ex.display_to(&nn)?;
    let mut params = Params::default();
    params.axiom = Some(flip.to_general());
    params.child = Some(at.clone());
    params.premise_chain = Some(vec![w.clone()]);
    ex.push(RuleId::Path, params)?;
    rename_node(&mut ex.cur, &w, &at);
    chain.insert(start + 1, nn);
    Ok(())
}

// ---------------------------------------------------------------------------
// The composed reverse direction.

/// Translate a labeled structural proof all the way back to a shallow
/// nested proof: structural elimination, then the deep reading, then the
/// shallow expansion. The end sequent of the result is display-equivalent
/// to the labeled reading of the input's end sequent. Returns the proof
/// together with per-stage accounting.
pub fn pipeline_reverse(
    p: &Proof,
    calculus: &CalculusId,
    start: Option<&str>,
) -> Result<(Proof, TranslationSummary), TranslateError> {
    let mut summary = TranslationSummary::new();
    let t0 = std::time::Instant::now();
    let pr = eliminate_structural(p, calculus)?;
    summary.record("eliminate_structural", p, &pr, t0.elapsed());
    let pr_cal = retarget(calculus, System::LktLabPr)?;
    let t1 = std::time::Instant::now();
    let deep = labeled_to_deep(&pr, &pr_cal, start)?;
    summary.record("labeled_to_deep", &pr, &deep, t1.elapsed());
    let deep_cal = retarget(calculus, System::DktDeepPr)?;
    let t2 = std::time::Instant::now();
    let shallow = deep_to_shallow(&deep, &deep_cal)?;
    summary.record("deep_to_shallow", &deep, &shallow, t2.elapsed());
    Ok((shallow, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axioms::parse_axiom;
    use crate::formula::parse_formula;
    use crate::polytree::iso;
    use crate::prover::{prove_deep, Budget};
    use crate::sequent::parse_nested;

    fn skt(axioms: &[&str]) -> CalculusId {
        CalculusId::skt(axioms.iter().map(|a| parse_axiom(a).unwrap()).collect())
    }

    fn nested(text: &str) -> Sequent {
        Sequent::Nested(parse_nested(text).unwrap())
    }

    fn fo(text: &str) -> Formula {
        parse_formula(text).unwrap()
    }

    // {[#]~q | <#>q} by or, bbox, bdia, rf, id.
    fn small_shallow_proof() -> Proof {
        let c0 = nested("[#]~q | <#>q");
        let c1 = nested("[#]~q, <#>q");
        let c2 = nested("b{~q}, <#>q");
        let c3 = nested("b{~q, q}, <#>q");
        let c4 = nested("~q, q, o{<#>q}");
        let mut id_p = Params::default();
        id_p.atom = Some("q".to_string());
        let leaf = Proof::step(c4, RuleId::Id, id_p, vec![]);
        let mut rf_p = Params::default();
        rf_p.child = Some("n1".to_string());
        let disp = Proof::step(c3, RuleId::Rf, rf_p, vec![leaf]);
        let mut bd_p = Params::default();
        bd_p.formula = Some(fo("<#>q"));
        bd_p.child = Some("n1".to_string());
        let bd = Proof::step(c2, RuleId::BDia, bd_p, vec![disp]);
        let mut bb_p = Params::default();
        bb_p.formula = Some(fo("[#]~q"));
        bb_p.fresh = Some("n1".to_string());
        let bb = Proof::step(c1, RuleId::BBox, bb_p, vec![bd]);
        let mut or_p = Params::default();
        or_p.formula = Some(fo("[#]~q | <#>q"));
        Proof::step(c0, RuleId::Or, or_p, vec![bb])
    }

    #[test]
    fn shallow_to_labeled_drops_display_steps() {
        let cal = skt(&[]);
        let p = small_shallow_proof();
        assert!(check(&p, &cal).ok);
        let out = shallow_to_labeled(&p, &cal).unwrap();
        let counts = out.rule_counts();
        assert_eq!(counts.get(&RuleId::LOr), Some(&1));
        assert_eq!(counts.get(&RuleId::LBBox), Some(&1));
        assert_eq!(counts.get(&RuleId::LBDia), Some(&1));
        assert_eq!(counts.get(&RuleId::Id), Some(&1));
        assert_eq!(out.size(), 4);
        let end = out.conclusion.as_labeled().unwrap().clone();
        assert!(labeled_equal(&end, &lab(p.conclusion.as_nested().unwrap())));
    }

    // Contract a structure with a child: l_s steps fold the copy back.
    fn contraction_proof() -> Proof {
        let c0 = nested("[](p | ~p)");
        let c1 = nested("o{p | ~p}");
        let c2 = nested("o{p | ~p}, o{p | ~p}");
        let c3 = nested("p | ~p, b{o{p | ~p}}");
        let c4 = nested("p, ~p, b{o{p | ~p}}");
        let mut id_p = Params::default();
        id_p.atom = Some("p".to_string());
        let leaf = Proof::step(c4, RuleId::Id, id_p, vec![]);
        let mut or_p = Params::default();
        or_p.formula = Some(fo("p | ~p"));
        let or = Proof::step(c3, RuleId::Or, or_p, vec![leaf]);
        let mut rp_p = Params::default();
        rp_p.child = Some("n1".to_string());
        let disp = Proof::step(c2, RuleId::Rp, rp_p, vec![or]);
        let mut c_p = Params::default();
        c_p.structure = Some(parse_nested("o{p | ~p}").unwrap());
        let contr = Proof::step(c1, RuleId::C, c_p, vec![disp]);
        let mut b_p = Params::default();
        b_p.formula = Some(fo("[](p | ~p)"));
        b_p.fresh = Some("n1".to_string());
        Proof::step(c0, RuleId::WBox, b_p, vec![contr])
    }

    #[test]
    fn structure_contraction_becomes_substitutions() {
        let cal = skt(&[]);
        let p = contraction_proof();
        assert!(check(&p, &cal).ok, "{}", check(&p, &cal));
        let out = shallow_to_labeled(&p, &cal).unwrap();
        let counts = out.rule_counts();
        assert_eq!(counts.get(&RuleId::LS), Some(&1));
        assert_eq!(counts.get(&RuleId::LC), Some(&1));
    }

    // A shallow proof through a transitivity step.
    fn path_proof() -> Proof {
        let c0 = nested("<>p, o{o{~p}}");
        let c1 = nested("<>p, o{~p}");
        let c2 = nested("<>p, o{~p, p}");
        let c3 = nested("~p, p, b{<>p}");
        let mut id_p = Params::default();
        id_p.atom = Some("p".to_string());
        let leaf = Proof::step(c3, RuleId::Id, id_p, vec![]);
        let mut rp_p = Params::default();
        rp_p.child = Some("n1".to_string());
        let disp = Proof::step(c2, RuleId::Rp, rp_p, vec![leaf]);
        let mut wd_p = Params::default();
        wd_p.formula = Some(fo("<>p"));
        wd_p.child = Some("n1".to_string());
        let wd = Proof::step(c1, RuleId::WDia, wd_p, vec![disp]);
        let mut gp_p = Params::default();
        gp_p.axiom = Some(parse_axiom("<><> -> <>").unwrap());
        gp_p.child = Some("n1".to_string());
        gp_p.premise_chain = Some(vec!["n2".to_string()]);
        Proof::step(c0, RuleId::Path, gp_p, vec![wd])
    }

    #[test]
    fn structural_step_weaves_antecedent_atoms() {
        let cal = skt(&["<><> -> <>"]);
        let p = path_proof();
        assert!(check(&p, &cal).ok, "{}", check(&p, &cal));
        let out = shallow_to_labeled(&p, &cal).unwrap();
        let counts = out.rule_counts();
        assert_eq!(counts.get(&RuleId::LGp), Some(&1));
        // The antecedent atoms ride along height-preservingly.
        assert_eq!(counts.get(&RuleId::LW), None);
        assert_eq!(out.size(), 3);
    }

    #[test]
    fn elimination_reroutes_through_witnesses() {
        let skt_cal = skt(&["<><> -> <>"]);
        let lab_cal = CalculusId::lkt_st(vec![parse_axiom("<><> -> <>").unwrap()]);
        let labeled = shallow_to_labeled(&path_proof(), &skt_cal).unwrap();
        let out = eliminate_structural(&labeled, &lab_cal).unwrap();
        let counts = out.rule_counts();
        assert_eq!(counts.get(&RuleId::LGp), None);
        assert_eq!(counts.get(&RuleId::LPath), None);
        assert_eq!(counts.get(&RuleId::LS), None);
        assert!(counts.get(&RuleId::LProp).is_some());
        assert!(labeled_equal(
            out.conclusion.as_labeled().unwrap(),
            labeled.conclusion.as_labeled().unwrap()
        ));
    }

    #[test]
    fn pipeline_reverse_round_trips_the_end_sequent() {
        let skt_cal = skt(&["<><> -> <>"]);
        let lab_cal = CalculusId::lkt_st(vec![parse_axiom("<><> -> <>").unwrap()]);
        let labeled = shallow_to_labeled(&path_proof(), &skt_cal).unwrap();
        let (shallow, summary) = pipeline_reverse(&labeled, &lab_cal, None).unwrap();
        assert_eq!(summary.stages.len(), 3);
        let got = polytree_of(shallow.conclusion.as_nested().unwrap());
        let want = polytree_of(path_proof().conclusion.as_nested().unwrap());
        assert!(iso(&got, &want).is_some());
    }

    #[test]
    fn deep_proof_expands_to_shallow() {
        let axioms = vec![parse_axiom("<><> -> <>").unwrap().as_path_axiom().unwrap()];
        let goal = fo("[#][#]~p | <#>p");
        let deep = prove_deep(&goal, &axioms, Budget::depth(12)).unwrap().unwrap();
        let cal = CalculusId::dkt(vec![parse_axiom("<><> -> <>").unwrap()]).unwrap();
        assert!(check(&deep, &cal).ok);
        let out = deep_to_shallow(&deep, &cal).unwrap();
        let end = out.conclusion.as_nested().unwrap();
        assert!(nested_equal(end, deep.conclusion.as_nested().unwrap()));
        assert!(out.rule_counts().get(&RuleId::Path).is_some());
    }

    #[test]
    fn reflexive_propagation_expands_in_both_polarities() {
        let axioms = vec![parse_axiom("e -> <>").unwrap().as_path_axiom().unwrap()];
        let cal = CalculusId::dkt(vec![parse_axiom("e -> <>").unwrap()]).unwrap();
        for goal in ["~p | <>p", "~p | <#>p"] {
            let deep = prove_deep(&fo(goal), &axioms, Budget::depth(8)).unwrap().unwrap();
            assert!(check(&deep, &cal).ok, "{goal}: {}", check(&deep, &cal));
            let out = deep_to_shallow(&deep, &cal).unwrap();
            assert!(
                nested_equal(
                    out.conclusion.as_nested().unwrap(),
                    deep.conclusion.as_nested().unwrap()
                ),
                "{goal}"
            );
        }
    }

    #[test]
    fn labeled_to_deep_requires_a_common_start() {
        let skt_cal = skt(&[]);
        let lab_cal = CalculusId::lkt_st(Vec::new());
        let labeled = shallow_to_labeled(&small_shallow_proof(), &skt_cal).unwrap();
        let pr = eliminate_structural(&labeled, &lab_cal).unwrap();
        let pr_cal = CalculusId::lkt_pr(Vec::new()).unwrap();
        let deep = labeled_to_deep(&pr, &pr_cal, Some("n0")).unwrap();
        let dcal = CalculusId::dkt(Vec::new()).unwrap();
        assert!(check(&deep, &dcal).ok);
        let err = labeled_to_deep(&pr, &pr_cal, Some("zz")).unwrap_err();
        assert!(matches!(err, TranslateError::Unsupported(_)));
    }
}
