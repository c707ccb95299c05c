//! OPB instance format: parser and canonical writer.
//!
//! Variables are named `x<k>` with `k >= 1`; variable `x<k>` gets dense index
//! `k - 1` and the variable table always covers `x1..xN`, where `N` is the
//! larger of the header count and the largest index used. The objective
//! offset travels in a `* objective offset <k>` comment.

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::model::{
    normalize, Constraint, LinExpr, Lit, Objective, Problem, Relation, Var, VarTable,
};

/// Largest variable index accepted, to keep hostile inputs from allocating.
pub const MAX_VARIABLES: usize = 1 << 24;

const OFFSET_COMMENT: &str = "objective offset";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {col}: {kind}")]
pub struct OpbError {
    pub line: usize,
    pub col: usize,
    pub kind: OpbErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OpbErrorKind {
    #[error("input is not valid UTF-8")]
    NotUtf8,
    #[error("malformed token `{0}`")]
    MalformedToken(String),
    #[error("variable token `{0}` must match x<digits> with index at least 1")]
    BadVariable(String),
    #[error("coefficient `{0}` is not an integer")]
    NotInteger(String),
    #[error("line is not terminated by `;`")]
    Unterminated,
    #[error("duplicate objective")]
    DuplicateObjective,
    #[error("missing relation operator")]
    MissingRelation,
    #[error("missing right-hand side")]
    MissingRhs,
    #[error("unexpected text after `;`")]
    TrailingText,
    #[error("variable index exceeds {MAX_VARIABLES}")]
    TooManyVariables,
}

struct Tok<'a> {
    text: &'a str,
    col: usize,
}

fn tokenize(line: &str) -> Vec<Tok<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Tok {
                    text: &line[s..i],
                    col: s + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Tok {
            text: &line[s..],
            col: s + 1,
        });
    }
    out
}

/// Parses a variable name `x<k>` and returns `k`.
pub fn parse_var_name(s: &str) -> Option<usize> {
    let digits = s.strip_prefix('x')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let k: usize = digits.parse().ok()?;
    (k >= 1).then_some(k)
}

/// Parses `[~]x<k>` into a literal over the dense index `k - 1`.
pub fn parse_lit_name(s: &str) -> Option<(usize, bool)> {
    match s.strip_prefix('~') {
        Some(rest) => parse_var_name(rest).map(|k| (k, true)),
        None => parse_var_name(s).map(|k| (k, false)),
    }
}

fn parse_int(s: &str) -> Option<BigInt> {
    let body = s.strip_prefix('+').unwrap_or(s);
    let digits = body.strip_prefix('-').unwrap_or(body);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    body.parse().ok()
}

enum Stmt {
    Objective(Vec<(BigInt, usize, bool)>),
    Constraint(Vec<(BigInt, usize, bool)>, Relation, BigInt),
}

struct LineParser<'a> {
    line_no: usize,
    toks: Vec<Tok<'a>>,
    end_col: usize,
}

impl<'a> LineParser<'a> {
    fn err(&self, col: usize, kind: OpbErrorKind) -> OpbError {
        OpbError {
            line: self.line_no,
            col,
            kind,
        }
    }

    fn parse(mut self) -> Result<Stmt, OpbError> {
        // Split a `;` glued to the final token into its own token.
        let Some(last) = self.toks.last() else {
            return Err(self.err(1, OpbErrorKind::Unterminated));
        };
        let pos = last.text.find(';');
        match pos {
            None => return Err(self.err(self.end_col, OpbErrorKind::Unterminated)),
            Some(p) if p + 1 != last.text.len() => {
                return Err(self.err(last.col + p + 1, OpbErrorKind::TrailingText))
            }
            Some(p) => {
                let (text, col) = (last.text, last.col);
                self.toks.pop();
                if p > 0 {
                    self.toks.push(Tok {
                        text: &text[..p],
                        col,
                    });
                }
            }
        }
        for t in &self.toks {
            if let Some(p) = t.text.find(';') {
                return Err(self.err(t.col + p, OpbErrorKind::TrailingText));
            }
        }

        let mut idx = 0;
        let objective = match self.toks.first() {
            Some(t) if t.text.starts_with("min:") => {
                let rest = &t.text[4..];
                if rest.is_empty() {
                    idx = 1;
                } else {
                    let col = t.col + 4;
                    self.toks[0] = Tok { text: rest, col };
                }
                true
            }
            _ => false,
        };

        let mut terms = Vec::new();
        while idx < self.toks.len() {
            let t = &self.toks[idx];
            if matches!(t.text, ">=" | "<=" | "=") {
                break;
            }
            let coef = parse_int(t.text).ok_or_else(|| {
                if t.text.starts_with(['+', '-']) || t.text.bytes().all(|b| b.is_ascii_digit()) {
                    self.err(t.col, OpbErrorKind::NotInteger(t.text.to_string()))
                } else if t.text.contains('x') {
                    self.err(t.col, OpbErrorKind::MalformedToken(t.text.to_string()))
                } else {
                    self.err(t.col, OpbErrorKind::NotInteger(t.text.to_string()))
                }
            })?;
            let Some(lt) = self.toks.get(idx + 1) else {
                return Err(self.err(self.end_col, OpbErrorKind::MissingRelation));
            };
            let (k, neg) = parse_lit_name(lt.text)
                .ok_or_else(|| self.err(lt.col, OpbErrorKind::BadVariable(lt.text.to_string())))?;
            if k > MAX_VARIABLES {
                return Err(self.err(lt.col, OpbErrorKind::TooManyVariables));
            }
            terms.push((coef, k, neg));
            idx += 2;
        }

        if objective {
            if idx < self.toks.len() {
                let t = &self.toks[idx];
                return Err(self.err(t.col, OpbErrorKind::MalformedToken(t.text.to_string())));
            }
            return Ok(Stmt::Objective(terms));
        }

        let Some(rel_tok) = self.toks.get(idx) else {
            return Err(self.err(self.end_col, OpbErrorKind::MissingRelation));
        };
        let rel = match rel_tok.text {
            ">=" => Relation::Geq,
            "<=" => Relation::Leq,
            _ => Relation::Eq,
        };
        let Some(rhs_tok) = self.toks.get(idx + 1) else {
            return Err(self.err(self.end_col, OpbErrorKind::MissingRhs));
        };
        let rhs = parse_int(rhs_tok.text)
            .ok_or_else(|| self.err(rhs_tok.col, OpbErrorKind::NotInteger(rhs_tok.text.into())))?;
        if let Some(extra) = self.toks.get(idx + 2) {
            return Err(self.err(extra.col, OpbErrorKind::MalformedToken(extra.text.into())));
        }
        Ok(Stmt::Constraint(terms, rel, rhs))
    }
}

fn header_vars(comment: &str) -> Option<usize> {
    let pos = comment.find("#variable=")?;
    let rest = comment[pos + "#variable=".len()..].trim_start();
    let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
    digits.parse().ok()
}

fn offset_comment(comment: &str) -> Option<BigInt> {
    let rest = comment.trim().strip_prefix(OFFSET_COMMENT)?;
    parse_int(rest.trim())
}

/// Parses raw bytes; invalid UTF-8 is a structured error.
pub fn parse_bytes(bytes: &[u8]) -> Result<Problem, OpbError> {
    let text = std::str::from_utf8(bytes).map_err(|_| OpbError {
        line: 1,
        col: 1,
        kind: OpbErrorKind::NotUtf8,
    })?;
    parse(text)
}

/// Parses OPB text. Constraint order follows the file; `=` lines become two
/// consecutive constraints (`>=` half first).
pub fn parse(text: &str) -> Result<Problem, OpbError> {
    let mut declared = 0usize;
    let mut offset = BigInt::zero();
    let mut objective: Option<Vec<(BigInt, usize, bool)>> = None;
    let mut rows = Vec::new();
    let mut max_var = 0usize;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = raw.trim_start();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('*') {
            if let Some(n) = header_vars(comment) {
                if n > MAX_VARIABLES {
                    return Err(OpbError {
                        line: line_no,
                        col: 1,
                        kind: OpbErrorKind::TooManyVariables,
                    });
                }
                declared = declared.max(n);
            }
            if let Some(k) = offset_comment(comment) {
                offset = k;
            }
            continue;
        }
        let parser = LineParser {
            line_no,
            toks: tokenize(raw),
            end_col: raw.chars().count() + 1,
        };
        match parser.parse()? {
            Stmt::Objective(terms) => {
                if objective.is_some() {
                    return Err(OpbError {
                        line: line_no,
                        col: 1,
                        kind: OpbErrorKind::DuplicateObjective,
                    });
                }
                max_var = terms.iter().map(|t| t.1).fold(max_var, usize::max);
                objective = Some(terms);
            }
            Stmt::Constraint(terms, rel, rhs) => {
                max_var = terms.iter().map(|t| t.1).fold(max_var, usize::max);
                rows.push((terms, rel, rhs));
            }
        }
    }

    let lit = |k: usize, neg: bool| Lit::new(Var((k - 1) as u32), neg);
    let mut p = Problem::new(VarTable::numbered(declared.max(max_var)));
    if let Some(terms) = objective {
        let mut f = Objective::new();
        for (c, k, neg) in &terms {
            f.add_lit(c, lit(*k, *neg));
        }
        f.add_constant(&offset);
        p.objective = Some(f);
    }
    for (terms, rel, rhs) in rows {
        let terms: Vec<(BigInt, Lit)> = terms.into_iter().map(|(c, k, n)| (c, lit(k, n))).collect();
        p.push(normalize(&terms, rel, &rhs));
    }
    Ok(p)
}

fn write_signed(out: &mut String, vars: &VarTable, expr: &LinExpr) {
    for (v, c) in expr.terms() {
        if c.is_negative() {
            let _ = write!(out, "{} {} ", c, vars.name(v));
        } else {
            let _ = write!(out, "+{} {} ", c, vars.name(v));
        }
    }
}

fn write_row(out: &mut String, vars: &VarTable, c: &Constraint, rel: &str) {
    let slack = c.slack_form();
    write_signed(out, vars, &slack);
    let _ = writeln!(out, "{rel} {} ;", -slack.constant());
}

/// Canonical, byte-stable OPB text for a problem.
pub fn write(p: &Problem) -> String {
    let mut pair_of = vec![None; p.constraints.len()];
    for &(g, l) in &p.equalities {
        let eq = crate::model::Equality {
            geq: p.constraints[g].clone(),
            leq: p.constraints[l].clone(),
        };
        if eq.is_consistent() {
            pair_of[g] = Some(l);
            pair_of[l] = Some(usize::MAX);
        }
    }
    let lines = pair_of.iter().filter(|x| **x != Some(usize::MAX)).count();

    let mut out = String::new();
    let _ = writeln!(out, "* #variable= {} #constraint= {}", p.vars.len(), lines);
    if let Some(f) = &p.objective {
        out.push_str("min: ");
        write_signed(&mut out, &p.vars, f);
        out.push_str(";\n");
        if !f.constant().is_zero() {
            let _ = writeln!(out, "* {OFFSET_COMMENT} {}", f.constant());
        }
    }
    for (i, c) in p.constraints.iter().enumerate() {
        match pair_of[i] {
            Some(usize::MAX) => {}
            Some(_) => write_row(&mut out, &p.vars, c, "="),
            None => write_row(&mut out, &p.vars, c, ">="),
        }
    }
    out
}

/// Normalized-constraint view for a single line, used by certificates.
pub fn format_constraint(vars: &VarTable, c: &Constraint) -> String {
    let mut s = String::new();
    for t in c.terms() {
        let _ = write!(s, "+{} {} ", t.coef, vars.lit_name(t.lit));
    }
    let _ = write!(s, ">= {}", c.degree());
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Term;

    const FIG1: &str = "min: +1 x1 +1 x2 ;\n+1 x1 +1 x2 -1 x3 -1 x4 = 1 ;\n-1 x1 +1 x5 >= 0 ;";

    #[test]
    fn parses_fig1_instance() {
        let p = parse(FIG1).unwrap();
        assert_eq!(p.vars.len(), 5);
        assert_eq!(p.constraints.len(), 3);
        assert_eq!(p.equalities, vec![(0, 1)]);
        assert_eq!(
            format_constraint(&p.vars, &p.constraints[0]),
            "+1 x1 +1 x2 +1 ~x3 +1 ~x4 >= 3"
        );
        assert_eq!(
            format_constraint(&p.vars, &p.constraints[1]),
            "+1 ~x1 +1 ~x2 +1 x3 +1 x4 >= 1"
        );
        assert_eq!(format_constraint(&p.vars, &p.constraints[2]), "+1 ~x1 +1 x5 >= 1");
        let f = p.objective.unwrap();
        assert_eq!(f.len(), 2);
        assert!(f.constant().is_zero());
    }

    #[test]
    fn decision_instance_has_no_objective() {
        let p = parse("+2 x1 +2 x2 >= 2 ;").unwrap();
        assert!(p.objective.is_none());
        assert_eq!(p.constraints.len(), 1);
    }

    #[test]
    fn rejects_bad_variable_names() {
        let e = parse("+1 y1 >= 1 ;").unwrap_err();
        assert_eq!((e.line, e.col), (1, 4));
        assert!(matches!(e.kind, OpbErrorKind::BadVariable(_)));
        assert!(parse("+1 x0 >= 1 ;").is_err());
    }

    #[test]
    fn structured_errors() {
        assert!(matches!(
            parse("+1 x1 >= 1").unwrap_err().kind,
            OpbErrorKind::Unterminated
        ));
        assert!(matches!(
            parse("+a x1 >= 1 ;").unwrap_err().kind,
            OpbErrorKind::NotInteger(_)
        ));
        assert!(matches!(
            parse("min: +1 x1 ;\nmin: +1 x2 ;").unwrap_err().kind,
            OpbErrorKind::DuplicateObjective
        ));
        let e = parse("* c\n+1 x1 +1 x2 >= 1 ;\n+1 x1 >= ;").unwrap_err();
        assert_eq!(e.line, 3);
        assert!(parse_bytes(&[0xff, 0xfe]).is_err());
    }

    #[test]
    fn accepts_glued_terminator_and_literals() {
        let p = parse("+1 ~x2 +3 x1 <= 2;").unwrap();
        let c = &p.constraints[0];
        assert_eq!(c.terms().len(), 2);
        assert_eq!(c.terms()[0], Term::new(BigInt::from(3), Lit::neg(Var(0))));
    }

    #[test]
    fn writes_reduced_fig1_problem() {
        let mut p = Problem::new(VarTable::numbered(5));
        let mut f = Objective::new();
        f.add_var(&BigInt::from(1), Var(2));
        f.add_var(&BigInt::from(1), Var(3));
        f.add_constant(&BigInt::from(1));
        p.objective = Some(f);
        let terms = [
            (BigInt::from(1), Lit::pos(Var(1))),
            (BigInt::from(-1), Lit::pos(Var(2))),
            (BigInt::from(-1), Lit::pos(Var(3))),
            (BigInt::from(1), Lit::pos(Var(4))),
        ];
        p.push(normalize(&terms, Relation::Geq, &BigInt::from(1)));
        let text = write(&p);
        assert_eq!(
            text,
            "* #variable= 5 #constraint= 1\nmin: +1 x3 +1 x4 ;\n* objective offset 1\n+1 x2 -1 x3 -1 x4 +1 x5 >= 1 ;\n"
        );
        assert_eq!(parse(&text).unwrap(), p);
    }

    #[test]
    fn empty_problem_is_header_only() {
        let p = Problem::new(VarTable::new());
        assert_eq!(write(&p), "* #variable= 0 #constraint= 0\n");
        assert_eq!(parse(&write(&p)).unwrap(), p);
    }

    #[test]
    fn write_parse_is_a_fixed_point() {
        let p = parse(FIG1).unwrap();
        let once = write(&p);
        let reparsed = parse(&once).unwrap();
        assert_eq!(reparsed, p);
        assert_eq!(write(&reparsed), once);
    }

    #[test]
    fn infeasible_row_round_trips() {
        let mut p = Problem::new(VarTable::numbered(1));
        p.constraints.push(Constraint::contradiction());
        let text = write(&p);
        assert!(text.ends_with(">= 1 ;\n"));
        assert_eq!(parse(&text).unwrap(), p);
    }
}
