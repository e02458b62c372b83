//! Bounded backward proof search: a deep nested prover for path-axiom
//! extensions and a labeled prover for general ones. Both are sound and
//! deterministic but deliberately incomplete; an absent result means the
//! budget ran out, not that the goal is refuted.

use std::collections::BTreeSet;

use crate::axioms::{build_grammar, GeneralPathAxiom, PathAxiom, PathGrammar};
use crate::formula::{Diamond, Formula};
use crate::proof::{apply_rule, Params, Proof, ProofError, RuleId, Sequent};
use crate::propagation::{pg_of_nested, reachable, PropPath};
use crate::sequent::{Label, LabelGen, LabeledSequent, NestedSequent};

/// Search limits: `depth` bounds the rule applications along any branch,
/// `steps` bounds them across the whole search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub depth: usize,
    pub steps: usize,
}

impl Budget {
    pub fn depth(depth: usize) -> Budget {
        Budget {
            depth,
            ..Budget::default()
        }
    }
}

impl Default for Budget {
    fn default() -> Budget {
        Budget {
            depth: 12,
            steps: 20_000,
        }
    }
}

// Structural rules are tried only this many times per branch; unbounded
// bottom-up structural application does not terminate.
const STRUCTURAL_QUOTA: usize = 3;

fn dual_pair(formulas: &[Formula]) -> Option<String> {
    let mut pos = BTreeSet::new();
    let mut neg = BTreeSet::new();
    for f in formulas {
        match f {
            Formula::Pos(a) => {
                pos.insert(a.clone());
            }
            Formula::Neg(a) => {
                neg.insert(a.clone());
            }
            _ => {}
        }
    }
    pos.intersection(&neg).next().cloned()
}

// A path that never revisits a node; a single-node path counts.
fn is_simple(path: &PropPath) -> bool {
    let distinct: BTreeSet<_> = path.nodes.iter().collect();
    distinct.len() == path.nodes.len()
}

struct DeepSearch {
    grammar: PathGrammar,
    gen: LabelGen,
    steps_left: usize,
}

impl DeepSearch {
    fn charge(&mut self) -> bool {
        if self.steps_left == 0 {
            return false;
        }
        self.steps_left -= 1;
        true
    }

    fn search(
        &mut self,
        x: &NestedSequent,
        depth: usize,
        history: &mut Vec<String>,
    ) -> Option<Proof> {
        if depth == 0 || !self.charge() {
            return None;
        }
        let key = x.canonical_key();
        if history.contains(&key) {
            return None;
        }

        // Initial sequents close a branch immediately.
        for id in x.all_ids() {
            let node = x.node(&id).expect("listed id");
            if let Some(atom) = dual_pair(&node.formulas) {
                let mut params = Params::default();
                params.atom = Some(atom);
                params.node = Some(id);
                return Some(Proof::step(
                    Sequent::Nested(x.clone()),
                    RuleId::Id,
                    params,
                    vec![],
                ));
            }
        }

        // Invertible rules commit: disjunction, conjunction, boxes.
        for id in x.all_ids() {
            let node = x.node(&id).expect("listed id");
            for f in &node.formulas {
                let rule = match f {
                    Formula::Or(_, _) => Some(RuleId::Or),
                    Formula::And(_, _) => Some(RuleId::And),
                    _ => None,
                };
                if let Some(rule) = rule {
                    let mut params = Params::default();
                    params.formula = Some(f.clone());
                    params.node = Some(id.clone());
                    return self.commit(x, rule, params, depth, history);
                }
            }
            for f in &node.formulas {
                let (want, body) = match f {
                    Formula::Box_(a) => (Diamond::White, a),
                    Formula::BBox(a) => (Diamond::Black, a),
                    _ => continue,
                };
                // The principal is copied, so refiring is pointless once a
                // matching child carries the body.
                let saturated = node
                    .children
                    .iter()
                    .any(|(pol, c)| *pol == want && c.formulas.contains(body));
                if saturated {
                    continue;
                }
                let rule = if want == Diamond::White {
                    RuleId::WBox
                } else {
                    RuleId::BBox
                };
                let mut params = Params::default();
                params.formula = Some(f.clone());
                params.node = Some(id.clone());
                params.fresh = Some(self.gen.fresh());
                return self.commit(x, rule, params, depth, history);
            }
        }

        // Propagation choices backtrack: adjacent single steps first, then
        // grammar witnesses.
        let pg = pg_of_nested(x);
        let ids = x.all_ids();
        history.push(key);
        for id in &ids {
            let node = x.node(id).expect("listed id");
            let diamonds: Vec<(Diamond, Formula, Formula)> = node
                .formulas
                .iter()
                .filter_map(|f| match f {
                    Formula::Dia(a) => Some((Diamond::White, f.clone(), (**a).clone())),
                    Formula::BDia(a) => Some((Diamond::Black, f.clone(), (**a).clone())),
                    _ => None,
                })
                .collect();
            for (d, f, body) in diamonds {
                for target in &ids {
                    let holder = x.node(target).expect("listed id");
                    if holder.formulas.contains(&body) {
                        continue;
                    }
                    let rule = match (d, x.parent_of(target), x.parent_of(id)) {
                        (Diamond::White, Some((p, Diamond::White)), _) if &p.id == id => {
                            Some(RuleId::Dia1)
                        }
                        (Diamond::White, _, Some((p, Diamond::Black))) if &p.id == target => {
                            Some(RuleId::Dia2)
                        }
                        (Diamond::Black, Some((p, Diamond::Black)), _) if &p.id == id => {
                            Some(RuleId::BDia1)
                        }
                        (Diamond::Black, _, Some((p, Diamond::White))) if &p.id == target => {
                            Some(RuleId::BDia2)
                        }
                        _ => None,
                    };
                    let (rule, path) = match rule {
                        Some(rule) => (rule, None),
                        None => {
                            match reachable(&pg, id, target, d, &self.grammar) {
                                // Revisiting witnesses have no chain to fold
                                // when the proof is rewritten shallowly, so
                                // only simple ones fire.
                                Ok(Some(path)) if is_simple(&path) => {
                                    (RuleId::Dp, Some(path))
                                }
                                _ => continue,
                            }
                        }
                    };
                    let mut params = Params::default();
                    params.formula = Some(f.clone());
                    params.node = Some(id.clone());
                    params.target = Some(target.clone());
                    params.path = path;
                    if let Some(proof) = self.attempt(x, rule, params, depth, history) {
                        history.pop();
                        return Some(proof);
                    }
                }
            }
        }
        history.pop();
        None
    }

    // Apply an invertible rule and require every premise to close.
    fn commit(
        &mut self,
        x: &NestedSequent,
        rule: RuleId,
        params: Params,
        depth: usize,
        history: &mut Vec<String>,
    ) -> Option<Proof> {
        history.push(x.canonical_key());
        let out = self.attempt(x, rule, params, depth, history);
        history.pop();
        out
    }

    fn attempt(
        &mut self,
        x: &NestedSequent,
        rule: RuleId,
        params: Params,
        depth: usize,
        history: &mut Vec<String>,
    ) -> Option<Proof> {
        let conclusion = Sequent::Nested(x.clone());
        let premises = apply_rule(&conclusion, rule, &params).ok()?;
        let mut subs = Vec::new();
        for premise in premises {
            let seq = match premise {
                Sequent::Nested(n) => n,
                Sequent::Labeled(_) => return None,
            };
            subs.push(self.search(&seq, depth - 1, history)?);
        }
        Some(Proof::step(conclusion, rule, params, subs))
    }
}

/// Search for a proof of the singleton sequent `{goal}` in the deep nested
/// calculus over `p`. Invertible rules are saturated; diamonds then
/// propagate to adjacent nodes or along completion witnesses found by
/// `reachable`, with backtracking over those choices.
pub fn prove_deep(
    goal: &Formula,
    p: &[PathAxiom],
    budget: Budget,
) -> Result<Option<Proof>, ProofError> {
    if budget.depth == 0 {
        return Err(ProofError::Unsupported("budget must be positive".to_string()));
    }
    let root = NestedSequent {
        id: "n0".to_string(),
        formulas: vec![goal.clone()],
        children: Vec::new(),
    };
    let mut search = DeepSearch {
        grammar: build_grammar(p),
        gen: LabelGen::above(&root.all_ids()),
        steps_left: budget.steps,
    };
    // Iterative deepening: the first proof found is one of minimal branch
    // length, which keeps propagation steps to what the goal needs.
    for depth in 1..=budget.depth {
        let mut history = Vec::new();
        search.gen = LabelGen::above(&root.all_ids());
        if let Some(proof) = search.search(&root, depth, &mut history) {
            return Ok(Some(proof));
        }
    }
    Ok(None)
}

// All ways to lay the chain `word` onto the relation atoms: (start, end,
// interior labels), deterministically ordered.
fn chain_instances(
    rel: &BTreeSet<(Label, Label)>,
    word: &[Diamond],
) -> Vec<(Label, Label, Vec<Label>)> {
    let mut labels: BTreeSet<Label> = BTreeSet::new();
    for (a, b) in rel {
        labels.insert(a.clone());
        labels.insert(b.clone());
    }
    let mut out = Vec::new();
    fn extend(
        rel: &BTreeSet<(Label, Label)>,
        word: &[Diamond],
        walk: &mut Vec<Label>,
        out: &mut Vec<(Label, Label, Vec<Label>)>,
    ) {
        let k = walk.len() - 1;
        if k == word.len() {
            out.push((
                walk[0].clone(),
                walk[k].clone(),
                walk[1..k].to_vec(),
            ));
            return;
        }
        let cur = walk[k].clone();
        let nexts: Vec<Label> = rel
            .iter()
            .filter_map(|(a, b)| match word[k] {
                Diamond::White if *a == cur => Some(b.clone()),
                Diamond::Black if *b == cur => Some(a.clone()),
                _ => None,
            })
            .collect();
        for next in nexts {
            walk.push(next);
            extend(rel, word, walk, out);
            walk.pop();
        }
    }
    for start in labels {
        let mut walk = vec![start];
        extend(rel, word, &mut walk, &mut out);
    }
    out
}

struct LabeledSearch {
    axioms: Vec<GeneralPathAxiom>,
    gen: LabelGen,
    steps_left: usize,
}

impl LabeledSearch {
    fn charge(&mut self) -> bool {
        if self.steps_left == 0 {
            return false;
        }
        self.steps_left -= 1;
        true
    }

    fn search(
        &mut self,
        s: &LabeledSequent,
        depth: usize,
        quota: usize,
        history: &mut Vec<String>,
    ) -> Option<Proof> {
        if depth == 0 || !self.charge() {
            return None;
        }
        let key = s.canonical_key();
        if history.contains(&key) {
            return None;
        }

        for x in s.labels() {
            let formulas: Vec<Formula> = s.formulas_at(&x).into_iter().cloned().collect();
            if let Some(atom) = dual_pair(&formulas) {
                let mut params = Params::default();
                params.atom = Some(atom);
                params.x = Some(x);
                return Some(Proof::step(
                    Sequent::Labeled(s.clone()),
                    RuleId::Id,
                    params,
                    vec![],
                ));
            }
        }

        // Invertible rules commit.
        for (x, f) in &s.lformulas {
            let rule = match f {
                Formula::Or(_, _) => Some(RuleId::LOr),
                Formula::And(_, _) => Some(RuleId::LAnd),
                _ => None,
            };
            if let Some(rule) = rule {
                let mut params = Params::default();
                params.formula = Some(f.clone());
                params.x = Some(x.clone());
                return self.commit(s, rule, params, depth, quota, history);
            }
        }
        for (x, f) in &s.lformulas {
            let rule = match f {
                Formula::Box_(_) => RuleId::LBox,
                Formula::BBox(_) => RuleId::LBBox,
                _ => continue,
            };
            let mut params = Params::default();
            params.formula = Some(f.clone());
            params.x = Some(x.clone());
            params.fresh = Some(self.gen.fresh());
            return self.commit(s, rule, params, depth, quota, history);
        }

        history.push(key);
        // Diamonds propagate along existing atoms, backtracking over the
        // target choice.
        for (x, f) in &s.lformulas {
            let (rule, body) = match f {
                Formula::Dia(a) => (RuleId::LDia, (**a).clone()),
                Formula::BDia(a) => (RuleId::LBDia, (**a).clone()),
                _ => continue,
            };
            let targets: Vec<Label> = s
                .rel
                .iter()
                .filter_map(|(a, b)| match rule {
                    RuleId::LDia if a == x => Some(b.clone()),
                    RuleId::LBDia if b == x => Some(a.clone()),
                    _ => None,
                })
                .collect();
            for y in targets {
                if s.contains_formula(&y, &body) {
                    continue;
                }
                let mut params = Params::default();
                params.formula = Some(f.clone());
                params.x = Some(x.clone());
                params.y = Some(y);
                if let Some(proof) = self.attempt(s, rule, params, depth, quota, history) {
                    history.pop();
                    return Some(proof);
                }
            }
        }
        // Structural steps are a last resort under a per-branch quota: lay
        // each declared antecedent onto the current atoms and add the
        // consequent chain.
        if quota > 0 {
            let axioms = self.axioms.clone();
            for axiom in &axioms {
                let instances = if axiom.antecedent.is_empty() {
                    s.labels()
                        .into_iter()
                        .map(|x| (x.clone(), x, Vec::new()))
                        .collect()
                } else {
                    chain_instances(&s.rel, &axiom.antecedent)
                };
                for (from, to, interior) in instances {
                    let mut params = Params::default();
                    params.axiom = Some(axiom.clone());
                    params.x = Some(from.clone());
                    if !axiom.antecedent.is_empty() {
                        params.y = Some(to.clone());
                        params.pi_labels = Some(interior);
                    }
                    let fresh: Vec<Label> = (1..axiom.consequent.len())
                        .map(|_| self.gen.fresh())
                        .collect();
                    params.sigma_labels = Some(fresh);
                    // Skip no-op instances.
                    match apply_rule(&Sequent::Labeled(s.clone()), RuleId::LGp, &params) {
                        Ok(premises) => {
                            if premises[0].equivalent(&Sequent::Labeled(s.clone())) {
                                continue;
                            }
                        }
                        Err(_) => continue,
                    }
                    if let Some(proof) = self.attempt(
                        s,
                        RuleId::LGp,
                        params,
                        depth,
                        quota - 1,
                        history,
                    ) {
                        history.pop();
                        return Some(proof);
                    }
                }
            }
        }
        history.pop();
        None
    }

    fn commit(
        &mut self,
        s: &LabeledSequent,
        rule: RuleId,
        params: Params,
        depth: usize,
        quota: usize,
        history: &mut Vec<String>,
    ) -> Option<Proof> {
        history.push(s.canonical_key());
        let out = self.attempt(s, rule, params, depth, quota, history);
        history.pop();
        out
    }

    fn attempt(
        &mut self,
        s: &LabeledSequent,
        rule: RuleId,
        params: Params,
        depth: usize,
        quota: usize,
        history: &mut Vec<String>,
    ) -> Option<Proof> {
        let conclusion = Sequent::Labeled(s.clone());
        let premises = apply_rule(&conclusion, rule, &params).ok()?;
        let mut subs = Vec::new();
        for premise in premises {
            let seq = match premise {
                Sequent::Labeled(l) => l,
                Sequent::Nested(_) => return None,
            };
            subs.push(self.search(&seq, depth - 1, quota, history)?);
        }
        Some(Proof::step(conclusion, rule, params, subs))
    }
}

/// Search for a proof of `x: goal` in the labeled calculus with structural
/// rules over `gp`. Structural steps are rationed per branch.
pub fn prove_labeled(
    goal: &Formula,
    gp: &[GeneralPathAxiom],
    budget: Budget,
) -> Result<Option<Proof>, ProofError> {
    if budget.depth == 0 {
        return Err(ProofError::Unsupported("budget must be positive".to_string()));
    }
    for a in gp {
        if !a.antecedent.is_empty() && a.consequent.is_empty() {
            return Err(ProofError::Unsupported(format!(
                "axiom '{a}' has no structural rule: nonempty antecedent, empty consequent"
            )));
        }
    }
    let start = LabeledSequent {
        rel: BTreeSet::new(),
        lformulas: vec![("x".to_string(), goal.clone())],
    };
    let mut search = LabeledSearch {
        axioms: gp.to_vec(),
        gen: LabelGen::above(&["x".to_string()]),
        steps_left: budget.steps,
    };
    for depth in 1..=budget.depth {
        let mut history = Vec::new();
        search.gen = LabelGen::above(&["x".to_string()]);
        if let Some(proof) = search.search(&start, depth, STRUCTURAL_QUOTA, &mut history) {
            return Ok(Some(proof));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axioms::parse_axiom;
    use crate::formula::parse_formula;
    use crate::proof::{check, CalculusId};

    fn paths(texts: &[&str]) -> Vec<PathAxiom> {
        texts
            .iter()
            .map(|t| parse_axiom(t).unwrap().as_path_axiom().unwrap())
            .collect()
    }

    #[test]
    fn deep_prover_closes_a_propositional_theorem() {
        let goal = parse_formula("p -> p").unwrap();
        let proof = prove_deep(&goal, &[], Budget::default()).unwrap().unwrap();
        let calc = CalculusId::dkt(vec![]).unwrap();
        assert!(check(&proof, &calc).ok);
    }

    #[test]
    fn deep_prover_uses_propagation() {
        // <#><#>p -> <#>p needs the transitivity completion.
        let goal = parse_formula("<#><#>p -> <#>p").unwrap();
        let p = paths(&["<><> -> <>"]);
        let proof = prove_deep(&goal, &p, Budget::default()).unwrap().unwrap();
        let axioms: Vec<GeneralPathAxiom> = p.iter().map(PathAxiom::to_general).collect();
        let calc = CalculusId::dkt(axioms).unwrap();
        let report = check(&proof, &calc);
        assert!(report.ok, "{report}");
        assert!(proof.rule_counts().contains_key(&RuleId::Dp));
        // Without the axiom the goal is out of reach.
        assert!(prove_deep(&goal, &[], Budget::default()).unwrap().is_none());
    }

    #[test]
    fn deep_prover_is_deterministic() {
        let goal = parse_formula("<><><><>p -> <>p").unwrap();
        let p = paths(&["<><#><> -> <>", "<><> -> <#>"]);
        let a = prove_deep(&goal, &p, Budget::default()).unwrap().unwrap();
        let b = prove_deep(&goal, &p, Budget::default()).unwrap().unwrap();
        assert_eq!(a, b);
        let axioms: Vec<GeneralPathAxiom> = p.iter().map(PathAxiom::to_general).collect();
        assert!(check(&a, &CalculusId::dkt(axioms).unwrap()).ok);
    }

    #[test]
    fn labeled_prover_golden_spine() {
        let goal = parse_formula("<#><>p -> <><#>p").unwrap();
        let gp = vec![parse_axiom("<#><> -> <><#>").unwrap()];
        let proof = prove_labeled(&goal, &gp, Budget::default())
            .unwrap()
            .unwrap();
        let calc = CalculusId::lkt_st(gp);
        let report = check(&proof, &calc);
        assert!(report.ok, "{report}");
        let counts = proof.rule_counts();
        for rule in [
            RuleId::LOr,
            RuleId::LBBox,
            RuleId::LBox,
            RuleId::LGp,
            RuleId::LDia,
            RuleId::LBDia,
        ] {
            assert_eq!(counts.get(&rule), Some(&1), "missing {rule}");
        }
    }

    #[test]
    fn labeled_prover_plain_box_identity() {
        let goal = parse_formula("[]p -> []p").unwrap();
        let proof = prove_labeled(&goal, &[], Budget::default())
            .unwrap()
            .unwrap();
        assert!(check(&proof, &CalculusId::lkt_st(vec![])).ok);
        assert!(!proof.rule_counts().contains_key(&RuleId::LGp));
    }

    #[test]
    fn labeled_prover_rejects_non_theorems() {
        let goal = parse_formula("<>p -> []p").unwrap();
        for depth in [4, 8, 12] {
            assert!(prove_labeled(&goal, &[], Budget::depth(depth))
                .unwrap()
                .is_none());
        }
    }
}
