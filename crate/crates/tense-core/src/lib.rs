//! Proof calculi for tense logic over path-axiom extensions: shallow nested,
//! deep nested, and labeled sequent systems with checkers, translations
//! between them, grammar-based path-axiom completion, propagation-graph
//! reachability, and bounded provers.

#![warn(missing_docs)]

pub mod axioms;
pub mod formula;
pub mod polytree;
pub mod proof;
pub mod propagation;
pub mod prover;
pub mod sequent;
pub mod testgen;
pub mod translate;

pub use axioms::{
    build_grammar, completion_member, compose, inverse, parse_axiom, parse_axiom_file,
    parse_tree, rule_schemas, AxiomError, DiamondString, GeneralPathAxiom, ParseTree,
    PathAxiom, PathGrammar, RuleSchemas,
};
pub use formula::{interpret, negate, parse_formula, Diamond, Formula, FormulaError};
pub use polytree::{
    display_derivation, graph_of, is_polytree_sequent, iso, labeled_sequent_of, merge,
    polytree_of, to_nested, to_polytree, LabeledPolytree, PolytreeError,
};
pub use proof::{
    apply_rule, check, check_with_assumptions, normalize_labeled, normalize_nested,
    parse_proof, print_proof, CalculusId, CheckReport, Diagnostic, Params, Proof,
    ProofError, RuleId, Sequent, System,
};
pub use propagation::{
    path_string, pg_of_labeled, pg_of_nested, reachable, PropPath, PropagationGraph,
    PropagationError,
};
pub use prover::{prove_deep, prove_labeled, Budget};
pub use sequent::{
    labeled_equal, match_context, nested_equal, parse_labeled, parse_nested, plug,
    substitute, substructures, Context, Label, LabelGen, LabeledSequent, NestedSequent,
    SequentError,
};
pub use translate::{
    deep_to_shallow, eliminate_structural, labeled_to_deep, pipeline_reverse,
    shallow_to_labeled, StageReport, TranslateError, TranslationSummary,
};
