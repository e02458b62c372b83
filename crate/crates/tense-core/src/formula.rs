//! Tense formulas in negation normal form: literals, conjunction, disjunction,
//! and the four modalities `[]` (future box), `<>` (future diamond), `[#]`
//! (past box), `<#>` (past diamond).
//!
//! Negation is defined on literals only; `negate` pushes it through every
//! connective. `T`/`F` exist solely so the formula reading of an empty
//! sequent has a value; the parser rejects them.

use std::fmt;

use thiserror::Error;

use crate::sequent::NestedSequent;

/// Future (white) or past (black) marker, shared by diamond words, nesting
/// polarity, and propagation-graph edge labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Diamond {
    White,
    Black,
}

impl Diamond {
    /// The opposite tense: `<>` <-> `<#>`.
    pub fn dual(self) -> Diamond {
        match self {
            Diamond::White => Diamond::Black,
            Diamond::Black => Diamond::White,
        }
    }

    /// Concrete diamond syntax for this marker.
    pub fn token(self) -> &'static str {
        match self {
            Diamond::White => "<>",
            Diamond::Black => "<#>",
        }
    }
}

impl fmt::Display for Diamond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// A formula in negation normal form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    /// Verum; printed `T`, never parsed, never inside checked sequents.
    Top,
    /// Falsum; printed `F`, never parsed, never inside checked sequents.
    Bot,
    Pos(String),
    Neg(String),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    /// `[]A`
    Box_(Box<Formula>),
    /// `<>A`
    Dia(Box<Formula>),
    /// `[#]A`
    BBox(Box<Formula>),
    /// `<#>A`
    BDia(Box<Formula>),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormulaError {
    #[error("negation is undefined on the constant {0}")]
    UnsupportedConstant(&'static str),
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
}

impl Formula {
    pub fn pos(name: &str) -> Formula {
        Formula::Pos(name.to_string())
    }

    pub fn neg(name: &str) -> Formula {
        Formula::Neg(name.to_string())
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn bx(a: Formula) -> Formula {
        Formula::Box_(Box::new(a))
    }

    pub fn dia(a: Formula) -> Formula {
        Formula::Dia(Box::new(a))
    }

    pub fn bbox(a: Formula) -> Formula {
        Formula::BBox(Box::new(a))
    }

    pub fn bdia(a: Formula) -> Formula {
        Formula::BDia(Box::new(a))
    }

    /// The modality `<d>`/`[d]` for the given tense.
    pub fn diamond(d: Diamond, a: Formula) -> Formula {
        match d {
            Diamond::White => Formula::dia(a),
            Diamond::Black => Formula::bdia(a),
        }
    }

    /// True if the formula mentions a past modality.
    pub fn has_past(&self) -> bool {
        match self {
            Formula::Top | Formula::Bot | Formula::Pos(_) | Formula::Neg(_) => false,
            Formula::And(a, b) | Formula::Or(a, b) => a.has_past() || b.has_past(),
            Formula::Box_(a) | Formula::Dia(a) => a.has_past(),
            Formula::BBox(_) | Formula::BDia(_) => true,
        }
    }
}

/// NNF negation: swap literals, de Morgan the binary connectives, and dualize
/// each modality.
pub fn negate(a: &Formula) -> Result<Formula, FormulaError> {
    Ok(match a {
        Formula::Top => return Err(FormulaError::UnsupportedConstant("T")),
        Formula::Bot => return Err(FormulaError::UnsupportedConstant("F")),
        Formula::Pos(p) => Formula::Neg(p.clone()),
        Formula::Neg(p) => Formula::Pos(p.clone()),
        Formula::And(b, c) => Formula::or(negate(b)?, negate(c)?),
        Formula::Or(b, c) => Formula::and(negate(b)?, negate(c)?),
        Formula::Box_(b) => Formula::dia(negate(b)?),
        Formula::Dia(b) => Formula::bx(negate(b)?),
        Formula::BBox(b) => Formula::bdia(negate(b)?),
        Formula::BDia(b) => Formula::bbox(negate(b)?),
    })
}

/// The formula a nested sequent stands for: disjunction of its formulas and
/// the boxed readings of its children, `T` when empty.
///
/// Item order is fixed: formulas left to right as stored, then `o`-children,
/// then `b`-children, folded left-associatively.
pub fn interpret(x: &NestedSequent) -> Formula {
    let mut items: Vec<Formula> = x.formulas.clone();
    for (pol, child) in &x.children {
        let inner = interpret(child);
        items.push(match pol {
            Diamond::White => Formula::bx(inner),
            Diamond::Black => Formula::bbox(inner),
        });
    }
    // Children were pushed in stored order; partition o before b.
    let formula_count = x.formulas.len();
    let (heads, tails): (Vec<_>, Vec<_>) = items
        .split_off(formula_count)
        .into_iter()
        .partition(|f| matches!(f, Formula::Box_(_)));
    items.extend(heads);
    items.extend(tails);

    let mut iter = items.into_iter();
    match iter.next() {
        None => Formula::Top,
        Some(first) => iter.fold(first, Formula::or),
    }
}

// Precedence levels used by both the printer and the parser.
// Higher binds tighter; modalities are prefix and bind tightest.
const PREC_IFF: u8 = 1;
const PREC_IMP: u8 = 2;
const PREC_OR: u8 = 3;
const PREC_AND: u8 = 4;
const PREC_ATOM: u8 = 5;

fn prec(f: &Formula) -> u8 {
    match f {
        Formula::And(..) => PREC_AND,
        Formula::Or(..) => PREC_OR,
        _ => PREC_ATOM,
    }
}

fn fmt_at(f: &Formula, parent: u8, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    let me = prec(f);
    let needs_paren = me < parent;
    if needs_paren {
        out.write_str("(")?;
    }
    match f {
        Formula::Top => out.write_str("T")?,
        Formula::Bot => out.write_str("F")?,
        Formula::Pos(p) => out.write_str(p)?,
        Formula::Neg(p) => write!(out, "~{p}")?,
        Formula::And(a, b) => {
            fmt_at(a, PREC_AND, out)?;
            out.write_str(" & ")?;
            // Left-associative: a right child at the same level needs parens.
            fmt_at(b, PREC_AND + 1, out)?;
        }
        Formula::Or(a, b) => {
            fmt_at(a, PREC_OR, out)?;
            out.write_str(" | ")?;
            fmt_at(b, PREC_OR + 1, out)?;
        }
        Formula::Box_(a) => {
            out.write_str("[]")?;
            fmt_at(a, PREC_ATOM, out)?;
        }
        Formula::Dia(a) => {
            out.write_str("<>")?;
            fmt_at(a, PREC_ATOM, out)?;
        }
        Formula::BBox(a) => {
            out.write_str("[#]")?;
            fmt_at(a, PREC_ATOM, out)?;
        }
        Formula::BDia(a) => {
            out.write_str("<#>")?;
            fmt_at(a, PREC_ATOM, out)?;
        }
    }
    if needs_paren {
        out.write_str(")")?;
    }
    Ok(())
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_at(self, 0, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tok {
    Ident(usize, usize),
    Tilde,
    WBox,
    WDia,
    BBox,
    BDia,
    Amp,
    Pipe,
    Imp,
    Iff,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a str,
    toks: Vec<(usize, Tok)>,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, FormulaError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'~' => {
                toks.push((i, Tok::Tilde));
                i += 1;
            }
            b'(' => {
                toks.push((i, Tok::LParen));
                i += 1;
            }
            b')' => {
                toks.push((i, Tok::RParen));
                i += 1;
            }
            b'&' => {
                toks.push((i, Tok::Amp));
                i += 1;
            }
            b'|' => {
                toks.push((i, Tok::Pipe));
                i += 1;
            }
            b'-' => {
                if bytes.get(i + 1) == Some(&b'>') {
                    toks.push((i, Tok::Imp));
                    i += 2;
                } else {
                    return Err(syntax(i, "expected '->'"));
                }
            }
            b'<' => {
                if src[i..].starts_with("<->") {
                    toks.push((i, Tok::Iff));
                    i += 3;
                } else if src[i..].starts_with("<#>") {
                    toks.push((i, Tok::BDia));
                    i += 3;
                } else if src[i..].starts_with("<>") {
                    toks.push((i, Tok::WDia));
                    i += 2;
                } else {
                    return Err(syntax(i, "expected '<>', '<#>' or '<->'"));
                }
            }
            b'[' => {
                if src[i..].starts_with("[#]") {
                    toks.push((i, Tok::BBox));
                    i += 3;
                } else if src[i..].starts_with("[]") {
                    toks.push((i, Tok::WBox));
                    i += 2;
                } else {
                    return Err(syntax(i, "expected '[]' or '[#]'"));
                }
            }
            b'a'..=b'z' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_lowercase()
                        || bytes[i].is_ascii_digit()
                        || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push((start, Tok::Ident(start, i)));
            }
            b'T' | b'F' => {
                return Err(syntax(i, "constants T/F are print-only"));
            }
            _ => return Err(syntax(i, &format!("unexpected character '{}'", c as char))),
        }
    }
    Ok(toks)
}

fn syntax(offset: usize, message: &str) -> FormulaError {
    FormulaError::Syntax {
        offset,
        message: message.to_string(),
    }
}

struct Parser<'a> {
    lx: Lexer<'a>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<Tok> {
        self.lx.toks.get(self.pos).map(|&(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.lx
            .toks
            .get(self.pos)
            .map(|&(o, _)| o)
            .unwrap_or(self.lx.src.len())
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.peek();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), FormulaError> {
        if self.peek() == Some(want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(syntax(self.offset(), &format!("expected {what}")))
        }
    }

    // Precedence climbing over &, |, ->, <->; sugar expands immediately.
    fn formula(&mut self, min: u8) -> Result<Formula, FormulaError> {
        let mut lhs = self.prefix()?;
        loop {
            let (op_prec, tok) = match self.peek() {
                Some(Tok::Amp) => (PREC_AND, Tok::Amp),
                Some(Tok::Pipe) => (PREC_OR, Tok::Pipe),
                Some(Tok::Imp) => (PREC_IMP, Tok::Imp),
                Some(Tok::Iff) => (PREC_IFF, Tok::Iff),
                _ => break,
            };
            if op_prec < min {
                break;
            }
            self.bump();
            // All infix operators are left-associative.
            let rhs = self.formula(op_prec + 1)?;
            lhs = match tok {
                Tok::Amp => Formula::and(lhs, rhs),
                Tok::Pipe => Formula::or(lhs, rhs),
                Tok::Imp => Formula::or(negate(&lhs)?, rhs),
                Tok::Iff => {
                    let fwd = Formula::or(negate(&lhs)?, rhs.clone());
                    let bwd = Formula::or(negate(&rhs)?, lhs);
                    Formula::and(fwd, bwd)
                }
                _ => unreachable!(),
            };
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<Formula, FormulaError> {
        let off = self.offset();
        match self.bump() {
            Some(Tok::Ident(s, e)) => Ok(Formula::Pos(self.lx.src[s..e].to_string())),
            Some(Tok::Tilde) => match self.bump() {
                Some(Tok::Ident(s, e)) => Ok(Formula::Neg(self.lx.src[s..e].to_string())),
                _ => Err(syntax(self.offset(), "expected a literal after '~'")),
            },
            Some(Tok::WBox) => Ok(Formula::bx(self.prefix()?)),
            Some(Tok::WDia) => Ok(Formula::dia(self.prefix()?)),
            Some(Tok::BBox) => Ok(Formula::bbox(self.prefix()?)),
            Some(Tok::BDia) => Ok(Formula::bdia(self.prefix()?)),
            Some(Tok::LParen) => {
                let f = self.formula(0)?;
                self.expect(Tok::RParen, "')'")?;
                Ok(f)
            }
            _ => Err(syntax(off, "expected a formula")),
        }
    }
}

/// Parse the ASCII formula syntax. `->` and `<->` are expanded during
/// parsing, so the result is always in negation normal form.
pub fn parse_formula(text: &str) -> Result<Formula, FormulaError> {
    let toks = lex(text)?;
    let mut p = Parser {
        lx: Lexer { src: text, toks },
        pos: 0,
    };
    let f = p.formula(0)?;
    if p.pos != p.lx.toks.len() {
        return Err(syntax(p.offset(), "trailing input"));
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    #[test]
    fn negate_literal() {
        assert_eq!(negate(&p("p")).unwrap(), p("~p"));
        assert_eq!(negate(&p("~p")).unwrap(), p("p"));
    }

    #[test]
    fn negate_pushes_through_box_and_and() {
        assert_eq!(negate(&p("[](p & ~q)")).unwrap(), p("<>(~p | q)"));
    }

    #[test]
    fn negate_involution() {
        for s in [
            "p",
            "~p",
            "p & q | r",
            "[]<>p & <#>[#]~q_1",
            "<>(p | [](q & <#>r))",
        ] {
            let f = p(s);
            assert_eq!(negate(&negate(&f).unwrap()).unwrap(), f);
        }
    }

    #[test]
    fn negate_rejects_constants() {
        assert_eq!(
            negate(&Formula::Top),
            Err(FormulaError::UnsupportedConstant("T"))
        );
    }

    #[test]
    fn parse_modalities_and_precedence() {
        assert_eq!(p("<>p & [#]q"), Formula::and(p("<>p"), p("[#]q")));
        assert_eq!(p("p & q | r"), Formula::or(p("p & q"), p("r")));
        assert_eq!(p("p | q & r"), Formula::or(p("p"), p("q & r")));
        assert_eq!(p("~p | p"), Formula::or(p("~p"), p("p")));
    }

    #[test]
    fn parse_sugar_expands() {
        assert_eq!(p("p -> q"), p("~p | q"));
        assert_eq!(p("<>p -> q"), p("[]~p | q"));
        assert_eq!(p("p <-> q"), p("(~p | q) & (~q | p)"));
        // Left association.
        assert_eq!(p("p -> q -> r"), p("(p -> q) -> r"));
    }

    #[test]
    fn parse_errors_carry_offsets() {
        match parse_formula("[](p") {
            Err(FormulaError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("expected syntax error, got {other:?}"),
        }
        assert!(parse_formula("T").is_err());
        assert!(parse_formula("~(p & q)").is_err());
    }

    #[test]
    fn print_parse_round_trip() {
        for s in [
            "p",
            "~p",
            "p & q | r",
            "p & (q | r)",
            "[]<>p & <#>[#]~q",
            "<>(p | ~q)",
            "p & q & r",
            "p & (q & r)",
        ] {
            let f = p(s);
            assert_eq!(p(&f.to_string()), f, "round trip failed for {s}");
        }
    }
}
