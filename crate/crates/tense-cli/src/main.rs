//! Command line front end for the tense calculi: proof checking, proof
//! translation, proof search, completion membership queries, sequent
//! conversions, and DOT emission.
//!
//! Exit codes: 0 for success or an accepting verdict, 1 for a rejecting
//! verdict (proof rejected, non-member, no proof found, conversion
//! impossible), 2 when no verdict was reached (usage or malformed input).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context as _, Result};
use clap::{Parser, Subcommand, ValueEnum};

use tense_core::{
    build_grammar, check, completion_member, deep_to_shallow, eliminate_structural, graph_of,
    labeled_to_deep, parse_axiom, parse_axiom_file, parse_formula, parse_labeled, parse_nested,
    parse_proof, parse_tree, pg_of_labeled, pg_of_nested, pipeline_reverse, print_proof,
    prove_deep, prove_labeled, shallow_to_labeled, to_nested, AxiomError, Budget, CalculusId,
    CheckReport, Diamond, GeneralPathAxiom, LabeledPolytree, NestedSequent, ParseTree, PathAxiom,
    Proof, TranslateError, TranslationSummary,
};

#[derive(Parser)]
#[command(name = "tense", version, about = "Proof tools for tense logic with path axioms")]
struct Cli {
    /// Report in machine-readable JSON instead of text
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a proof file against one of the four calculi
    Check {
        /// Calculus to check against
        #[arg(long, value_enum)]
        calculus: CalculusArg,

        /// Axiom file, one `WORD -> WORD` per line (omit for plain Kt)
        #[arg(long)]
        axioms: Option<PathBuf>,

        /// Proof file in `(infer RULE :concl "..." ...)` form
        #[arg(long)]
        proof: PathBuf,

        /// Disable the past-tense rules on both sides
        #[arg(long)]
        modal_fragment: bool,
    },

    /// Translate a proof between the shallow nested, labeled, and deep
    /// nested calculi
    Translate {
        /// Source calculus family
        #[arg(long, value_enum)]
        from: FamilyArg,

        /// Target calculus family
        #[arg(long, value_enum)]
        to: FamilyArg,

        /// Axiom file shared by source and target (omit for plain Kt)
        #[arg(long)]
        axioms: Option<PathBuf>,

        /// Proof file in the source calculus
        #[arg(long)]
        proof: PathBuf,

        /// Root label for reading labeled sequents as trees
        #[arg(long)]
        start: Option<String>,

        /// Disable the past-tense rules on both sides
        #[arg(long)]
        modal_fragment: bool,

        /// Write the output proof here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Search for a proof of a formula
    Prove {
        /// Calculus to search in (skt expands a deep proof)
        #[arg(long, value_enum, default_value_t = FamilyArg::Dkt)]
        calculus: FamilyArg,

        /// Axiom file (omit for plain Kt)
        #[arg(long)]
        axioms: Option<PathBuf>,

        /// Backtracking depth budget
        #[arg(long, default_value_t = 8)]
        depth: usize,

        /// Write the proof here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,

        /// Goal formula, e.g. "<><>p -> <>p"
        formula: String,
    },

    /// Decide whether `WORD -> DIAMOND` belongs to the completion of an
    /// axiom set
    Complete {
        /// Axiom file of path axioms
        #[arg(long)]
        axioms: PathBuf,

        /// Print the witnessing composition tree for members
        #[arg(long)]
        witness: bool,

        /// Query, e.g. "<><><><> -> <>"
        query: String,
    },

    /// Convert between nested and labeled sequents
    Poly {
        /// Nested sequent to convert to a labeled sequent
        #[arg(long, value_name = "SEQUENT", conflicts_with = "to_nested")]
        to_labeled: Option<String>,

        /// Labeled sequent to convert to a nested sequent
        #[arg(long, value_name = "SEQUENT")]
        to_nested: Option<String>,

        /// Label naming the root node
        #[arg(long, default_value = "x")]
        start: String,

        /// Output form
        #[arg(long, value_enum, default_value_t = EmitArg::Text)]
        emit: EmitArg,
    },

    /// Emit the propagation graph of a sequent as DOT
    Pg {
        /// Nested sequent
        #[arg(long, value_name = "SEQUENT", conflicts_with = "labeled")]
        nested: Option<String>,

        /// Labeled sequent
        #[arg(long, value_name = "SEQUENT")]
        labeled: Option<String>,
    },
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum CalculusArg {
    /// Shallow nested with structural rules
    Skt,
    /// Deep nested with propagation rules
    Dkt,
    /// Labeled with structural rules
    #[value(alias = "lkt")]
    LktSt,
    /// Labeled with propagation rules
    LktPr,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    /// Shallow nested
    Skt,
    /// Labeled
    Lkt,
    /// Deep nested
    Dkt,
}

impl FamilyArg {
    fn name(self) -> &'static str {
        match self {
            FamilyArg::Skt => "skt",
            FamilyArg::Lkt => "lkt",
            FamilyArg::Dkt => "dkt",
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum EmitArg {
    /// Sequent syntax
    Text,
    /// Graphviz DOT of the polytree
    Dot,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Check { calculus, axioms, proof, modal_fragment } => {
            run_check(cli.json, calculus, axioms.as_deref(), &proof, modal_fragment)
        }
        Command::Translate { from, to, axioms, proof, start, modal_fragment, out } => run_translate(
            cli.json,
            from,
            to,
            axioms.as_deref(),
            &proof,
            start.as_deref(),
            modal_fragment,
            out.as_deref(),
        ),
        Command::Prove { calculus, axioms, depth, out, formula } => {
            run_prove(cli.json, calculus, axioms.as_deref(), depth, out.as_deref(), &formula)
        }
        Command::Complete { axioms, witness, query } => {
            run_complete(cli.json, &axioms, witness, &query)
        }
        Command::Poly { to_labeled, to_nested, start, emit } => {
            run_poly(cli.json, to_labeled.as_deref(), to_nested.as_deref(), &start, emit)
        }
        Command::Pg { nested, labeled } => run_pg(cli.json, nested.as_deref(), labeled.as_deref()),
    }
}

// Input loading. Malformed files are reported with file and line positions;
// malformed inline arguments with a caret under the offending column.

fn load_axioms(path: Option<&Path>) -> Result<Vec<GeneralPathAxiom>> {
    let Some(path) = path else { return Ok(Vec::new()) };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_axiom_file(&text).map_err(|e| match e {
        AxiomError::File { line, message } => anyhow!("{}:{line}: {message}", path.display()),
        other => anyhow!("{}: {other}", path.display()),
    })
}

fn path_axioms(axioms: &[GeneralPathAxiom]) -> Result<Vec<PathAxiom>> {
    axioms
        .iter()
        .map(|a| a.as_path_axiom().map_err(|e| anyhow!("axiom '{a}': {e}")))
        .collect()
}

fn load_proof(path: &Path) -> Result<Proof> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Err((line, col, message)) = scan_sexpr(&text) {
        bail!("{}:{line}:{col}: {message}", path.display());
    }
    parse_proof(&text).map_err(|e| {
        let message = e.to_string();
        match quoted_position(&text, &message) {
            Some((line, col)) => anyhow!("{}:{line}:{col}: {message}", path.display()),
            None => anyhow!("{}: {message}", path.display()),
        }
    })
}

/// Balance check for the s-expression surface, returning the first defect as
/// `(line, column, message)`. The real parser reports token-level errors but
/// works on a token stream with no positions, so shape defects are caught
/// here first, where lines and columns are still known.
fn scan_sexpr(text: &str) -> std::result::Result<(), (usize, usize, String)> {
    let mut opens: Vec<(usize, usize)> = Vec::new();
    let mut string_open: Option<(usize, usize)> = None;
    let mut escaped = false;
    let mut line = 1usize;
    let mut col = 0usize;
    for c in text.chars() {
        if c == '\n' {
            line += 1;
            col = 0;
            // A newline inside a string is legal; keep scanning.
        } else {
            col += 1;
        }
        if string_open.is_some() {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                string_open = None;
            }
            continue;
        }
        match c {
            '(' => opens.push((line, col)),
            ')' => {
                if opens.pop().is_none() {
                    return Err((line, col, "unbalanced ')'".to_string()));
                }
            }
            '"' => string_open = Some((line, col)),
            _ => {}
        }
    }
    if let Some((line, col)) = string_open {
        return Err((line, col, "unterminated string".to_string()));
    }
    if let Some((line, col)) = opens.pop() {
        return Err((line, col, "unclosed '('".to_string()));
    }
    Ok(())
}

/// Position of the last single-quoted fragment of `message` in `text`, if
/// the fragment occurs literally. Parser errors quote the offending token.
fn quoted_position(text: &str, message: &str) -> Option<(usize, usize)> {
    let start = message.rfind('\'')?;
    let prefix = &message[..start];
    let open = prefix.rfind('\'')?;
    let needle = &message[open + 1..start];
    if needle.is_empty() {
        return None;
    }
    let at = text.find(needle)?;
    let line = text[..at].matches('\n').count() + 1;
    let col = at - text[..at].rfind('\n').map(|i| i + 1).unwrap_or(0) + 1;
    Some((line, col))
}

/// Error for inline sequent or formula text: the offending input with a
/// caret under the reported offset.
fn caret_error(what: &str, text: &str, offset: usize, message: impl std::fmt::Display) -> anyhow::Error {
    let col = text[..offset.min(text.len())].chars().count();
    anyhow!("{what}: {message}\n  {text}\n  {: >width$}^", "", width = col)
}

fn parse_nested_arg(what: &str, text: &str) -> Result<NestedSequent> {
    parse_nested(text).map_err(|e| match e {
        tense_core::SequentError::Syntax { offset, ref message } => {
            caret_error(what, text, offset, message)
        }
        tense_core::SequentError::Formula(tense_core::FormulaError::Syntax {
            offset,
            ref message,
        }) => caret_error(what, text, offset, message),
        other => anyhow!("{what}: {other}"),
    })
}

fn parse_labeled_arg(what: &str, text: &str) -> Result<tense_core::LabeledSequent> {
    parse_labeled(text).map_err(|e| match e {
        tense_core::SequentError::Syntax { offset, ref message } => {
            caret_error(what, text, offset, message)
        }
        tense_core::SequentError::Formula(tense_core::FormulaError::Syntax {
            offset,
            ref message,
        }) => caret_error(what, text, offset, message),
        other => anyhow!("{what}: {other}"),
    })
}

fn parse_formula_arg(what: &str, text: &str) -> Result<tense_core::Formula> {
    parse_formula(text).map_err(|e| match e {
        tense_core::FormulaError::Syntax { offset, ref message } => {
            caret_error(what, text, offset, message)
        }
        other => anyhow!("{what}: {other}"),
    })
}

fn build_calculus(
    arg: CalculusArg,
    axioms: Vec<GeneralPathAxiom>,
    modal_fragment: bool,
) -> Result<CalculusId> {
    let cal = match arg {
        CalculusArg::Skt => CalculusId::skt(axioms),
        CalculusArg::Dkt => CalculusId::dkt(axioms)?,
        CalculusArg::LktSt => CalculusId::lkt_st(axioms),
        CalculusArg::LktPr => CalculusId::lkt_pr(axioms)?,
    };
    if modal_fragment {
        Ok(cal.modal_fragment()?)
    } else {
        Ok(cal)
    }
}

fn counts_json(p: &Proof) -> serde_json::Value {
    let map: BTreeMap<String, usize> =
        p.rule_counts().into_iter().map(|(r, n)| (r.to_string(), n)).collect();
    serde_json::json!(map)
}

fn counts_text(p: &Proof) -> String {
    p.rule_counts()
        .into_iter()
        .map(|(r, n)| format!("{r}={n}"))
        .collect::<Vec<_>>()
        .join(" ")
}

// check

fn run_check(
    json: bool,
    calculus: CalculusArg,
    axioms: Option<&Path>,
    proof: &Path,
    modal_fragment: bool,
) -> Result<u8> {
    let cal = build_calculus(calculus, load_axioms(axioms)?, modal_fragment)?;
    let p = load_proof(proof)?;
    let report = check(&p, &cal);
    if json {
        println!("{}", serde_json::to_string_pretty(&check_json(&report))?);
    } else {
        print!("{report}");
        if report.ok {
            println!();
        }
    }
    Ok(if report.ok { 0 } else { 1 })
}

fn check_json(report: &CheckReport) -> serde_json::Value {
    let counts: BTreeMap<String, usize> =
        report.rule_counts.iter().map(|(r, n)| (r.to_string(), *n)).collect();
    serde_json::json!({
        "ok": report.ok,
        "nodes": report.nodes,
        "assumptions": report.assumptions,
        "rule_counts": counts,
        "diagnostics": report
            .diagnostics
            .iter()
            .map(|d| {
                serde_json::json!({
                    "at": d.at,
                    "rule": d.rule.to_string(),
                    "message": d.message,
                })
            })
            .collect::<Vec<_>>(),
    })
}

// translate

fn run_translate(
    json: bool,
    from: FamilyArg,
    to: FamilyArg,
    axioms: Option<&Path>,
    proof: &Path,
    start: Option<&str>,
    modal_fragment: bool,
    out: Option<&Path>,
) -> Result<u8> {
    if from == to {
        bail!("--from and --to name the same calculus; nothing to translate");
    }
    let axioms = load_axioms(axioms)?;
    let input = load_proof(proof)?;
    let fragment = |cal: CalculusId| -> Result<CalculusId> {
        if modal_fragment {
            Ok(cal.modal_fragment()?)
        } else {
            Ok(cal)
        }
    };
    // Calculi the chosen direction needs are built up front: an axiom set
    // outside a target calculus's class is an input error, not a verdict.
    let cals = Calculi {
        skt: fragment(CalculusId::skt(axioms.clone()))?,
        lkt_st: fragment(CalculusId::lkt_st(axioms.clone()))?,
        lkt_pr: match (from, to) {
            (FamilyArg::Skt, FamilyArg::Dkt) | (FamilyArg::Lkt, FamilyArg::Dkt) => {
                Some(fragment(CalculusId::lkt_pr(axioms.clone())?)?)
            }
            _ => None,
        },
        dkt: match from {
            FamilyArg::Dkt => Some(fragment(CalculusId::dkt(axioms.clone())?)?),
            _ => None,
        },
    };

    let mut summary = TranslationSummary::new();
    let result = translate_chain(from, to, &input, &cals, start, &mut summary);
    let output = match result {
        Ok(p) => p,
        Err(e) => {
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&serde_json::json!({
                        "from": from.name(),
                        "to": to.name(),
                        "ok": false,
                        "error": e.to_string(),
                    }))?
                );
            } else {
                eprintln!("translation failed: {e}");
            }
            return Ok(1);
        }
    };

    let proof_text = print_proof(&output);
    if json {
        let stages: Vec<_> = summary
            .stages
            .iter()
            .map(|s| {
                serde_json::json!({
                    "stage": s.stage,
                    "rules_in": s.rules_in,
                    "rules_out": s.rules_out,
                    "elapsed_us": s.elapsed.as_micros() as u64,
                })
            })
            .collect();
        let mut value = serde_json::json!({
            "from": from.name(),
            "to": to.name(),
            "ok": true,
            "stages": stages,
            "rule_counts_in": counts_json(&input),
            "rule_counts_out": counts_json(&output),
            "proof": proof_text,
        });
        if let Some(path) = out {
            fs::write(path, &proof_text)
                .with_context(|| format!("writing {}", path.display()))?;
            value["out"] = serde_json::json!(path.display().to_string());
        }
        println!("{}", serde_json::to_string_pretty(&value)?);
        return Ok(0);
    }

    // Without --out the proof goes to stdout and the accounting to stderr,
    // so redirection captures a clean proof file.
    let mut report = String::new();
    let _ = writeln!(
        report,
        "translated {} -> {}: {} rules in, {} rules out",
        from.name(),
        to.name(),
        input.size(),
        output.size()
    );
    for s in &summary.stages {
        let _ = writeln!(
            report,
            "  {:<22} {:>6} in {:>6} out  {}",
            s.stage,
            s.rules_in,
            s.rules_out,
            human_duration(s.elapsed)
        );
    }
    let _ = writeln!(report, "rule counts in:  {}", counts_text(&input));
    let _ = writeln!(report, "rule counts out: {}", counts_text(&output));
    match out {
        Some(path) => {
            fs::write(path, &proof_text)
                .with_context(|| format!("writing {}", path.display()))?;
            let _ = writeln!(report, "proof written to {}", path.display());
            print!("{report}");
        }
        None => {
            println!("{proof_text}");
            eprint!("{report}");
        }
    }
    Ok(0)
}

/// The calculi a translation run may pass through; the optional ones are
/// built only for directions that visit them.
struct Calculi {
    skt: CalculusId,
    lkt_st: CalculusId,
    lkt_pr: Option<CalculusId>,
    dkt: Option<CalculusId>,
}

fn translate_chain(
    from: FamilyArg,
    to: FamilyArg,
    input: &Proof,
    cals: &Calculi,
    start: Option<&str>,
    summary: &mut TranslationSummary,
) -> std::result::Result<Proof, TranslateError> {
    let stage = |summary: &mut TranslationSummary,
                 name: &str,
                 input: &Proof,
                 f: &mut dyn FnMut(&Proof) -> std::result::Result<Proof, TranslateError>|
     -> std::result::Result<Proof, TranslateError> {
        let t = Instant::now();
        let output = f(input)?;
        summary.record(name, input, &output, t.elapsed());
        Ok(output)
    };
    let pr = || cals.lkt_pr.as_ref().expect("built for directions ending in dkt");
    let deep = || cals.dkt.as_ref().expect("built for directions starting in dkt");
    match (from, to) {
        (FamilyArg::Skt, FamilyArg::Lkt) => stage(summary, "shallow_to_labeled", input, &mut |p| {
            shallow_to_labeled(p, &cals.skt)
        }),
        (FamilyArg::Skt, FamilyArg::Dkt) => {
            let labeled = stage(summary, "shallow_to_labeled", input, &mut |p| {
                shallow_to_labeled(p, &cals.skt)
            })?;
            let refined = stage(summary, "eliminate_structural", &labeled, &mut |p| {
                eliminate_structural(p, &cals.lkt_st)
            })?;
            stage(summary, "labeled_to_deep", &refined, &mut |p| {
                labeled_to_deep(p, pr(), start)
            })
        }
        (FamilyArg::Lkt, FamilyArg::Skt) => {
            let (output, stages) = pipeline_reverse(input, &cals.lkt_st, start)?;
            summary.stages.extend(stages.stages);
            Ok(output)
        }
        (FamilyArg::Lkt, FamilyArg::Dkt) => {
            let refined = stage(summary, "eliminate_structural", input, &mut |p| {
                eliminate_structural(p, &cals.lkt_st)
            })?;
            stage(summary, "labeled_to_deep", &refined, &mut |p| {
                labeled_to_deep(p, pr(), start)
            })
        }
        (FamilyArg::Dkt, FamilyArg::Skt) => {
            stage(summary, "deep_to_shallow", input, &mut |p| deep_to_shallow(p, deep()))
        }
        (FamilyArg::Dkt, FamilyArg::Lkt) => {
            let shallow =
                stage(summary, "deep_to_shallow", input, &mut |p| deep_to_shallow(p, deep()))?;
            stage(summary, "shallow_to_labeled", &shallow, &mut |p| {
                shallow_to_labeled(p, &cals.skt)
            })
        }
        _ => unreachable!("same-family translation is rejected before dispatch"),
    }
}

fn human_duration(d: Duration) -> String {
    if d.as_millis() >= 10 {
        format!("{}ms", d.as_millis())
    } else {
        format!("{}us", d.as_micros())
    }
}

// prove

fn run_prove(
    json: bool,
    calculus: FamilyArg,
    axioms: Option<&Path>,
    depth: usize,
    out: Option<&Path>,
    formula: &str,
) -> Result<u8> {
    let goal = parse_formula_arg("formula", formula)?;
    let general = load_axioms(axioms)?;
    let found = match calculus {
        FamilyArg::Lkt => prove_labeled(&goal, &general, Budget::depth(depth))?,
        FamilyArg::Dkt | FamilyArg::Skt => {
            let path = path_axioms(&general)?;
            let deep = prove_deep(&goal, &path, Budget::depth(depth))?;
            match (calculus, deep) {
                (FamilyArg::Skt, Some(p)) => {
                    let deep_cal = CalculusId::dkt(general.clone())?;
                    Some(deep_to_shallow(&p, &deep_cal).map_err(|e| anyhow!("expanding the deep proof: {e}"))?)
                }
                (_, other) => other,
            }
        }
    };
    let Some(proof) = found else {
        if json {
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "found": false,
                    "calculus": calculus.name(),
                    "depth": depth,
                }))?
            );
        } else {
            eprintln!("no proof found within depth {depth}");
        }
        return Ok(1);
    };
    let proof_text = print_proof(&proof);
    if json {
        let mut value = serde_json::json!({
            "found": true,
            "calculus": calculus.name(),
            "depth": depth,
            "rules": proof.size(),
            "rule_counts": counts_json(&proof),
            "proof": proof_text,
        });
        if let Some(path) = out {
            fs::write(path, &proof_text)
                .with_context(|| format!("writing {}", path.display()))?;
            value["out"] = serde_json::json!(path.display().to_string());
        }
        println!("{}", serde_json::to_string_pretty(&value)?);
    } else {
        match out {
            Some(path) => {
                fs::write(path, &proof_text)
                    .with_context(|| format!("writing {}", path.display()))?;
                println!("proved in {} rule instances; proof written to {}", proof.size(), path.display());
            }
            None => {
                println!("{proof_text}");
                eprintln!("proved in {} rule instances", proof.size());
            }
        }
    }
    Ok(0)
}

// complete

fn run_complete(json: bool, axioms: &Path, witness: bool, query: &str) -> Result<u8> {
    let general = load_axioms(Some(axioms))?;
    let path = path_axioms(&general)?;
    let q = parse_axiom(query)
        .map_err(|e| anyhow!("query '{query}': {e}"))?
        .as_path_axiom()
        .map_err(|e| anyhow!("query '{query}': {e}"))?;
    let grammar = build_grammar(&path);
    let member = completion_member(&grammar, &q.antecedent, q.consequent);
    let tree = if member && witness {
        parse_tree(&grammar, &q.antecedent, q.consequent)
    } else {
        None
    };
    if json {
        let mut value = serde_json::json!({
            "query": q.to_string(),
            "member": member,
        });
        if let Some(t) = &tree {
            value["witness"] = serde_json::json!(render_parse_tree(t));
        }
        println!("{}", serde_json::to_string_pretty(&value)?);
    } else {
        println!("{}", if member { "member" } else { "not a member" });
        if let Some(t) = &tree {
            print!("{}", render_parse_tree(t));
        }
    }
    Ok(if member { 0 } else { 1 })
}

/// Indented composition tree: identity leaves consume one letter, inner
/// nodes name the axiom instance that contracted their children.
fn render_parse_tree(t: &ParseTree) -> String {
    fn go(t: &ParseTree, depth: usize, out: &mut String) {
        let pad = "  ".repeat(depth);
        match t {
            ParseTree::Identity(d) => {
                let _ = writeln!(out, "{pad}letter {d}");
            }
            ParseTree::Axiom { axiom, inverted, children } => {
                let tag = if *inverted { " (inverse)" } else { "" };
                let _ = writeln!(out, "{pad}axiom {axiom}{tag}");
                for c in children {
                    go(c, depth + 1, out);
                }
            }
        }
    }
    let mut out = String::new();
    go(t, 0, &mut out);
    out
}

// poly

fn run_poly(
    json: bool,
    to_labeled: Option<&str>,
    to_nested_arg: Option<&str>,
    start: &str,
    emit: EmitArg,
) -> Result<u8> {
    match (to_labeled, to_nested_arg) {
        (Some(text), None) => {
            let x = parse_nested_arg("nested sequent", text)?;
            let (graph, rendered) = polytree_with_figure_names(&x, start);
            let output = match emit {
                EmitArg::Text => rendered,
                EmitArg::Dot => graph.to_dot(),
            };
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&serde_json::json!({
                        "direction": "to-labeled",
                        "start": start,
                        "output": output,
                    }))?
                );
            } else {
                println!("{output}");
            }
            Ok(0)
        }
        (None, Some(text)) => {
            let s = parse_labeled_arg("labeled sequent", text)?;
            let graph = graph_of(&s);
            let nested = match to_nested(start, &graph) {
                Ok(n) => n,
                Err(e) => {
                    if json {
                        println!(
                            "{}",
                            serde_json::to_string_pretty(&serde_json::json!({
                                "direction": "to-nested",
                                "start": start,
                                "ok": false,
                                "error": e.to_string(),
                            }))?
                        );
                    } else {
                        eprintln!("conversion failed: {e}");
                    }
                    return Ok(1);
                }
            };
            let output = match emit {
                EmitArg::Text => nested.to_string(),
                EmitArg::Dot => graph.to_dot(),
            };
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&serde_json::json!({
                        "direction": "to-nested",
                        "start": start,
                        "output": output,
                    }))?
                );
            } else {
                println!("{output}");
            }
            Ok(0)
        }
        _ => bail!("pass exactly one of --to-labeled or --to-nested"),
    }
}

/// The labeled reading of a nested sequent with short world names: the root
/// takes the start label and the remaining nodes draw from x, y, z, w, u, v
/// (skipping the start label) in leaves-first order, falling back to
/// numbered names once the pool runs dry. Arcs are emitted parent-first:
/// an `o`-child points away from its parent, a `b`-child points back at it.
fn polytree_with_figure_names(x: &NestedSequent, start: &str) -> (LabeledPolytree, String) {
    let mut names: BTreeMap<tense_core::Label, String> = BTreeMap::new();
    if !x.is_empty() {
        let pool = ["x", "y", "z", "w", "u", "v"];
        let mut supply = pool
            .iter()
            .filter(|&&n| n != start)
            .map(|n| n.to_string())
            .chain((0..).map(|i| format!("v{i}")));
        fn assign(
            node: &NestedSequent,
            supply: &mut dyn Iterator<Item = String>,
            names: &mut BTreeMap<tense_core::Label, String>,
        ) {
            for (_, c) in &node.children {
                assign(c, supply, names);
            }
            names.insert(node.id.clone(), supply.next().expect("supply is infinite"));
        }
        assign(x, &mut supply, &mut names);
        names.insert(x.id.clone(), start.to_string());
    }

    let mut graph = LabeledPolytree::default();
    let mut arcs: Vec<(String, String)> = Vec::new();
    let mut formulas: Vec<String> = Vec::new();
    fn walk(
        node: &NestedSequent,
        names: &BTreeMap<tense_core::Label, String>,
        graph: &mut LabeledPolytree,
        arcs: &mut Vec<(String, String)>,
        formulas: &mut Vec<String>,
    ) {
        let me = names[&node.id].clone();
        graph.vertices.insert(me.clone());
        graph
            .labeling
            .entry(me.clone())
            .or_default()
            .extend(node.formulas.iter().cloned());
        for f in &node.formulas {
            formulas.push(format!("{me}:{f}"));
        }
        for (d, c) in &node.children {
            let child = names[&c.id].clone();
            let arc = match d {
                Diamond::White => (me.clone(), child.clone()),
                Diamond::Black => (child.clone(), me.clone()),
            };
            graph.edges.insert(arc.clone());
            arcs.push(arc);
            walk(c, names, graph, arcs, formulas);
        }
    }
    if !x.is_empty() {
        walk(x, &names, &mut graph, &mut arcs, &mut formulas);
    }

    let mut parts: Vec<String> = arcs.into_iter().map(|(a, b)| format!("R({a},{b})")).collect();
    parts.extend(formulas);
    let rendered = if parts.is_empty() { "emp".to_string() } else { parts.join(", ") };
    (graph, rendered)
}

// pg

fn run_pg(json: bool, nested: Option<&str>, labeled: Option<&str>) -> Result<u8> {
    let dot = match (nested, labeled) {
        (Some(text), None) => pg_of_nested(&parse_nested_arg("nested sequent", text)?).to_dot(),
        (None, Some(text)) => pg_of_labeled(&parse_labeled_arg("labeled sequent", text)?).to_dot(),
        _ => bail!("pass exactly one of --nested or --labeled"),
    };
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&serde_json::json!({ "dot": dot }))?
        );
    } else {
        print!("{dot}");
    }
    Ok(0)
}
