//! Seeded generators and brute-force oracles for randomized testing.
//!
//! Everything here is driven by an explicit `ChaCha8Rng`, so corpora are
//! reproducible from a single seed. The oracles are deliberately naive
//! reimplementations of the engine's decision procedures, computed straight
//! from the definitions, and serve as independent ground truth in the
//! acceptance suite.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::formula::{negate, Diamond, Formula};
use crate::axioms::PathAxiom;
use crate::proof::{apply_rule, Params, RuleId, Sequent};
use crate::propagation::PropagationGraph;
use crate::sequent::{Label, NestedSequent};

/// A reproducible generator from a fixed seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn coin(r: &mut ChaCha8Rng) -> Diamond {
    if r.gen_bool(0.5) {
        Diamond::White
    } else {
        Diamond::Black
    }
}

/// A random formula in negation normal form, at most `depth` connectives
/// deep, over the given atom names.
pub fn gen_formula(r: &mut ChaCha8Rng, depth: usize, atoms: &[&str]) -> Formula {
    let atom = atoms[r.gen_range(0..atoms.len())].to_string();
    if depth == 0 || r.gen_bool(0.3) {
        return if r.gen_bool(0.5) {
            Formula::Pos(atom)
        } else {
            Formula::Neg(atom)
        };
    }
    match r.gen_range(0..6) {
        0 => Formula::and(
            gen_formula(r, depth - 1, atoms),
            gen_formula(r, depth - 1, atoms),
        ),
        1 => Formula::or(
            gen_formula(r, depth - 1, atoms),
            gen_formula(r, depth - 1, atoms),
        ),
        2 => Formula::bx(gen_formula(r, depth - 1, atoms)),
        3 => Formula::dia(gen_formula(r, depth - 1, atoms)),
        4 => Formula::bbox(gen_formula(r, depth - 1, atoms)),
        _ => Formula::bdia(gen_formula(r, depth - 1, atoms)),
    }
}

/// A random nested sequent with at most `max_nodes` nodes and at most
/// `max_formulas` formulas per node. Node ids are `n0..`, parents drawn
/// uniformly among earlier nodes.
pub fn gen_nested(r: &mut ChaCha8Rng, max_nodes: usize, max_formulas: usize) -> NestedSequent {
    let count = r.gen_range(1..=max_nodes.max(1));
    let mut nodes: Vec<NestedSequent> = (0..count)
        .map(|k| {
            let n_formulas = r.gen_range(0..=max_formulas);
            NestedSequent {
                id: format!("n{k}"),
                formulas: (0..n_formulas)
                    .map(|_| gen_formula(r, 2, &["p", "q", "s"]))
                    .collect(),
                children: Vec::new(),
            }
        })
        .collect();
    // Attach leaves back to front so each child is complete when attached.
    for k in (1..count).rev() {
        let parent = r.gen_range(0..k);
        let child = nodes.remove(k);
        nodes[parent].children.push((coin(r), child));
    }
    nodes.remove(0)
}

/// A random path axiom with antecedent length at most `max_antecedent`
/// (length zero gives a reflexivity-style axiom).
pub fn gen_axiom(r: &mut ChaCha8Rng, max_antecedent: usize) -> PathAxiom {
    let len = r.gen_range(0..=max_antecedent);
    PathAxiom::new((0..len).map(|_| coin(r)).collect(), coin(r))
}

/// A random deduplicated axiom set.
pub fn gen_axiom_set(r: &mut ChaCha8Rng, max_axioms: usize, max_antecedent: usize) -> Vec<PathAxiom> {
    let count = r.gen_range(1..=max_axioms.max(1));
    let mut out: Vec<PathAxiom> = Vec::new();
    for _ in 0..count {
        let a = gen_axiom(r, max_antecedent);
        if !out.contains(&a) {
            out.push(a);
        }
    }
    out
}

/// A random propagation graph over at most `max_nodes` nodes, edges paired
/// the way sequent graphs pair them: every future arc `u -> v` contributes
/// the `<>` edge forward and the `<#>` edge back.
pub fn gen_pg(r: &mut ChaCha8Rng, max_nodes: usize) -> PropagationGraph {
    let count = r.gen_range(1..=max_nodes.max(1));
    let mut g = PropagationGraph::default();
    let names: Vec<Label> = (0..count).map(|k| format!("x{k}")).collect();
    for n in &names {
        g.nodes.insert(n.clone());
    }
    for u in 0..count {
        for v in 0..count {
            if u != v && r.gen_bool(0.3) {
                g.edges
                    .insert((names[u].clone(), names[v].clone(), Diamond::White));
                g.edges
                    .insert((names[v].clone(), names[u].clone(), Diamond::Black));
            }
        }
    }
    g
}

/// A random residuation walk: up to `max_moves` display steps, each moving
/// to a random child of the current root. Returns the visited sequents in
/// order, starting after the first move.
pub fn display_walk(
    r: &mut ChaCha8Rng,
    s: &NestedSequent,
    max_moves: usize,
) -> Vec<(RuleId, Label, NestedSequent)> {
    let mut out = Vec::new();
    let mut cur = s.clone();
    for _ in 0..max_moves {
        if cur.children.is_empty() {
            break;
        }
        let k = r.gen_range(0..cur.children.len());
        let (pol, child) = &cur.children[k];
        let rule = match pol {
            Diamond::Black => RuleId::Rf,
            Diamond::White => RuleId::Rp,
        };
        let id = child.id.clone();
        let mut params = Params::default();
        params.child = Some(id.clone());
        let next = apply_rule(&Sequent::Nested(cur), rule, &params)
            .expect("display move on an existing child")
            .remove(0);
        let next = match next {
            Sequent::Nested(x) => x,
            Sequent::Labeled(_) => unreachable!("display rules stay nested"),
        };
        out.push((rule, id, next.clone()));
        cur = next;
    }
    out
}

/// Ground-truth completion membership, computed as a least fixpoint over
/// the subwords of `word` straight from the closure definition: identity
/// steps plus every split of a subword along an axiom of the set or its
/// inverse.
pub fn oracle_completion(p: &[PathAxiom], word: &[Diamond], target: Diamond) -> bool {
    let mut rules: Vec<(Vec<Diamond>, Diamond)> = Vec::new();
    for a in p {
        rules.push((a.antecedent.clone(), a.consequent));
        let inv: Vec<Diamond> = a.antecedent.iter().rev().map(|d| d.dual()).collect();
        rules.push((inv, a.consequent.dual()));
    }
    rules.sort();
    rules.dedup();
    let n = word.len();
    let mut facts: BTreeSet<(usize, usize, Diamond)> = BTreeSet::new();
    for (i, d) in word.iter().enumerate() {
        facts.insert((i, i + 1, *d));
    }
    loop {
        let mut changed = false;
        for (ant, cons) in &rules {
            for i in 0..=n {
                for j in i..=n {
                    if facts.contains(&(i, j, *cons)) {
                        continue;
                    }
                    if splits(&facts, i, j, ant) {
                        facts.insert((i, j, *cons));
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return facts.contains(&(0, n, target));
        }
    }
}

// Can word[i..j] be cut into consecutive segments deriving each antecedent
// letter in order?
fn splits(facts: &BTreeSet<(usize, usize, Diamond)>, i: usize, j: usize, ant: &[Diamond]) -> bool {
    let mut reach: BTreeSet<usize> = [i].into_iter().collect();
    for d in ant {
        let mut next = BTreeSet::new();
        for &p in &reach {
            for q in p..=j {
                if facts.contains(&(p, q, *d)) {
                    next.insert(q);
                }
            }
        }
        reach = next;
        if reach.is_empty() {
            return false;
        }
    }
    reach.contains(&j)
}

/// Ground-truth grammar reachability: enumerate every distinct diamond word
/// realized by a walk of at most `max_len` edges from `from` to `to`, and
/// test each with the completion oracle.
pub fn oracle_reachable(
    g: &PropagationGraph,
    from: &str,
    to: &str,
    target: Diamond,
    p: &[PathAxiom],
    max_len: usize,
) -> bool {
    if !g.nodes.contains(from) || !g.nodes.contains(to) {
        return false;
    }
    let mut seen: BTreeSet<(Label, Vec<Diamond>)> = BTreeSet::new();
    let mut frontier: Vec<(Label, Vec<Diamond>)> = vec![(from.to_string(), Vec::new())];
    let mut words: BTreeSet<Vec<Diamond>> = BTreeSet::new();
    while let Some((at, word)) = frontier.pop() {
        if !seen.insert((at.clone(), word.clone())) {
            continue;
        }
        if at == to {
            words.insert(word.clone());
        }
        if word.len() == max_len {
            continue;
        }
        for (u, v, d) in &g.edges {
            if *u == at {
                let mut w2 = word.clone();
                w2.push(*d);
                frontier.push((v.clone(), w2));
            }
        }
    }
    words.iter().any(|w| oracle_completion(p, w, target))
}

/// The named axiom pool the translation corpus draws from: transitivity,
/// symmetry, Euclideanity, reflexivity.
pub fn corpus_axiom_pool() -> Vec<PathAxiom> {
    vec![
        PathAxiom::new(vec![Diamond::White, Diamond::White], Diamond::White),
        PathAxiom::new(vec![Diamond::Black], Diamond::White),
        PathAxiom::new(vec![Diamond::Black, Diamond::White], Diamond::White),
        PathAxiom::new(Vec::new(), Diamond::White),
    ]
}

/// Every subset of the corpus axiom pool, the empty one included.
pub fn corpus_axiom_subsets() -> Vec<Vec<PathAxiom>> {
    let pool = corpus_axiom_pool();
    (0..1u32 << pool.len())
        .map(|mask| {
            pool.iter()
                .enumerate()
                .filter(|(k, _)| mask & (1 << k) != 0)
                .map(|(_, a)| a.clone())
                .collect()
        })
        .collect()
}

fn dia_chain(word: &[Diamond], body: Formula) -> Formula {
    word.iter().rev().fold(body, |acc, d| match d {
        Diamond::White => Formula::dia(acc),
        Diamond::Black => Formula::bdia(acc),
    })
}

/// A goal the bounded prover can close over the given axioms: either a
/// propositional-shape tautology `~A | A`, or an instance of one of the
/// axioms (declared or inverted orientation) over a random literal.
pub fn gen_corpus_goal(r: &mut ChaCha8Rng, axioms: &[PathAxiom]) -> Formula {
    if axioms.is_empty() || r.gen_bool(0.4) {
        let f = gen_formula(r, 2, &["p", "q"]);
        let neg = negate(&f).expect("generated formulas have no constants");
        return Formula::or(neg, f);
    }
    let a = &axioms[r.gen_range(0..axioms.len())];
    let (ant, cons) = if r.gen_bool(0.5) {
        (a.antecedent.clone(), a.consequent)
    } else {
        (
            a.antecedent.iter().rev().map(|d| d.dual()).collect(),
            a.consequent.dual(),
        )
    };
    let body = Formula::Pos("p".to_string());
    let lhs = dia_chain(&ant, body.clone());
    let rhs = dia_chain(&[cons], body);
    Formula::or(negate(&lhs).expect("diamond chains negate cleanly"), rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axioms::{build_grammar, completion_member, parse_axiom};
    use crate::propagation::reachable;

    #[test]
    fn completion_oracle_matches_golden_facts() {
        let p = vec![
            parse_axiom("<><#><> -> <>").unwrap().as_path_axiom().unwrap(),
            parse_axiom("<><> -> <#>").unwrap().as_path_axiom().unwrap(),
        ];
        let w = vec![Diamond::White; 4];
        assert!(oracle_completion(&p, &w, Diamond::White));
        let trans = vec![parse_axiom("<><> -> <>").unwrap().as_path_axiom().unwrap()];
        let bb = vec![Diamond::Black, Diamond::Black];
        assert!(oracle_completion(&trans, &bb, Diamond::Black));
        assert!(!oracle_completion(&trans, &bb, Diamond::White));
    }

    #[test]
    fn oracles_agree_with_engine_on_a_seeded_sample() {
        let mut r = rng(7);
        for _ in 0..60 {
            let p = gen_axiom_set(&mut r, 3, 3);
            let g = build_grammar(&p);
            let len = r.gen_range(0..=4);
            let w: Vec<Diamond> = (0..len).map(|_| coin(&mut r)).collect();
            let d = coin(&mut r);
            assert_eq!(completion_member(&g, &w, d), oracle_completion(&p, &w, d));
        }
        for _ in 0..40 {
            let p = gen_axiom_set(&mut r, 2, 2);
            let g = build_grammar(&p);
            let pg = gen_pg(&mut r, 4);
            let nodes: Vec<Label> = pg.nodes.iter().cloned().collect();
            let from = &nodes[r.gen_range(0..nodes.len())];
            let to = &nodes[r.gen_range(0..nodes.len())];
            let d = coin(&mut r);
            let got = reachable(&pg, from, to, d, &g).unwrap();
            let want = oracle_reachable(&pg, from, to, d, &p, 8);
            assert_eq!(got.is_some(), want, "from {from} to {to} {d:?} in {pg:?}");
        }
    }

    #[test]
    fn generated_sequents_stay_in_bounds() {
        let mut r = rng(3);
        for _ in 0..50 {
            let s = gen_nested(&mut r, 12, 6);
            let ids = s.all_ids();
            assert!(!ids.is_empty() && ids.len() <= 12);
        }
    }
}
