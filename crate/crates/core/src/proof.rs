//! Certificate step algebra, streaming writer and parser.
//!
//! Grammar (one step per line unless a subproof follows):
//!
//! ```text
//! pseudo-Boolean proof version 2.0
//! f <m>
//! pol <rpn tokens> ;
//! rup <constraint> ;
//! red <constraint> ; <witness pairs> [; begin]
//! delc <id> [; <witness> [; begin]]
//! core id <id>
//! obju new <signed terms> [constant] ;
//! obju diff <signed terms> [constant] ;
//! * comment
//! end pseudo-Boolean proof <step count>
//! ```
//!
//! Witnesses are lists of `x1 1`, `x1 ~x2` pairs or `x1 -> 0` arrows; both
//! shapes are accepted everywhere. A subproof runs from `begin` to `end` and
//! holds `pol` and `rup` lines without `;`, optionally grouped under
//! `proofgoal <label>` ... `end`, where the label is a constraint ID, `#1`
//! for the redundant constraint itself, or `#obj` for the objective goal.
//! Weakening in `pol` is written `<constraint> <literal> w`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, Write};

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::PolToken;
use crate::model::{Constraint, LinExpr, Lit, Objective, SubstTarget, Substitution, Var};
use crate::opb::{parse_lit_name, parse_var_name};

pub const HEADER: &str = "pseudo-Boolean proof version 2.0";
pub const END_MARKER: &str = "end pseudo-Boolean proof";

/// Label binding a subproof group to one proof goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GoalLabel {
    /// Goal `D|w` for the live constraint with this ID.
    Id(u64),
    /// Goal `C|w` for the constraint being added or deleted.
    Own,
    /// Goal `f >= f|w`.
    Objective,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SubStep {
    Pol(Vec<PolToken>),
    Rup(Constraint),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GoalBlock {
    pub label: Option<GoalLabel>,
    pub steps: Vec<SubStep>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Subproof {
    pub blocks: Vec<GoalBlock>,
}

impl Subproof {
    /// A single anonymous block.
    pub fn anonymous(steps: Vec<SubStep>) -> Self {
        Subproof {
            blocks: vec![GoalBlock { label: None, steps }],
        }
    }

    pub fn labeled(blocks: Vec<(GoalLabel, Vec<SubStep>)>) -> Self {
        Subproof {
            blocks: blocks
                .into_iter()
                .map(|(l, steps)| GoalBlock {
                    label: Some(l),
                    steps,
                })
                .collect(),
        }
    }
}

/// Signed objective delta `sum c * lit + constant` added to the objective.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ObjDelta {
    pub terms: Vec<(BigInt, Lit)>,
    pub constant: BigInt,
}

impl ObjDelta {
    pub fn as_lin(&self) -> LinExpr {
        let mut e = LinExpr::from_lits(self.terms.iter().map(|(c, l)| (c, *l)));
        e.add_constant(&self.constant);
        e
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty() && self.constant.is_zero()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ProofStep {
    Pol(Vec<PolToken>),
    Rup(Constraint),
    Red {
        constraint: Constraint,
        witness: Substitution,
        subproof: Option<Subproof>,
    },
    Delc {
        id: u64,
        witness: Option<Substitution>,
        subproof: Option<Subproof>,
    },
    MoveToCore(u64),
    ObjuNew(Objective, Option<Subproof>),
    ObjuDiff(ObjDelta, Option<Subproof>),
    Comment(String),
}

impl ProofStep {
    /// Whether the step derives a constraint and consumes an ID.
    pub fn derives(&self) -> bool {
        matches!(
            self,
            ProofStep::Pol(_) | ProofStep::Rup(_) | ProofStep::Red { .. }
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ProofStep::Pol(_) => "pol",
            ProofStep::Rup(_) => "rup",
            ProofStep::Red { .. } => "red",
            ProofStep::Delc { .. } => "delc",
            ProofStep::MoveToCore(_) => "core",
            ProofStep::ObjuNew(..) => "obju new",
            ProofStep::ObjuDiff(..) => "obju diff",
            ProofStep::Comment(_) => "comment",
        }
    }

    /// Serialized text, including the trailing newline.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        match self {
            ProofStep::Pol(tokens) => {
                let _ = writeln!(s, "pol {} ;", fmt_pol(tokens));
            }
            ProofStep::Rup(c) => {
                let _ = writeln!(s, "rup {} ;", fmt_constraint(c));
            }
            ProofStep::Red {
                constraint,
                witness,
                subproof,
            } => {
                let _ = write!(s, "red {} ;", fmt_constraint(constraint));
                let w = fmt_witness_pairs(witness);
                if !w.is_empty() {
                    let _ = write!(s, " {w}");
                }
                if subproof.is_some() {
                    s.push_str(" ;");
                }
                push_subproof(&mut s, subproof.as_ref());
            }
            ProofStep::Delc {
                id,
                witness,
                subproof,
            } => {
                let _ = write!(s, "delc {id}");
                match (witness, subproof) {
                    (None, None) => s.push('\n'),
                    (w, sp) => {
                        s.push_str(" ;");
                        if let Some(w) = w {
                            let w = fmt_witness_arrows(w);
                            if !w.is_empty() {
                                let _ = write!(s, " {w}");
                            }
                        }
                        if sp.is_some() {
                            s.push_str(" ;");
                        }
                        push_subproof(&mut s, sp.as_ref());
                    }
                }
            }
            ProofStep::MoveToCore(id) => {
                let _ = writeln!(s, "core id {id}");
            }
            ProofStep::ObjuNew(f, sp) => {
                let _ = write!(s, "obju new {};", fmt_objective(f));
                push_subproof(&mut s, sp.as_ref());
            }
            ProofStep::ObjuDiff(d, sp) => {
                let mut body = String::new();
                for (c, l) in &d.terms {
                    let _ = write!(body, "{} {} ", fmt_signed(c), fmt_lit(*l));
                }
                if !d.constant.is_zero() {
                    let _ = write!(body, "{} ", d.constant);
                }
                let _ = write!(s, "obju diff {body};");
                push_subproof(&mut s, sp.as_ref());
            }
            ProofStep::Comment(text) => {
                for line in text.lines() {
                    let _ = writeln!(s, "* {line}");
                }
                if text.is_empty() {
                    s.push_str("*\n");
                }
            }
        }
        s
    }
}

fn push_subproof(s: &mut String, sp: Option<&Subproof>) {
    let Some(sp) = sp else {
        s.push('\n');
        return;
    };
    s.push_str(" begin\n");
    for block in &sp.blocks {
        match block.label {
            None => {
                for st in &block.steps {
                    let _ = writeln!(s, "   {}", fmt_substep(st));
                }
            }
            Some(label) => {
                let _ = writeln!(s, "   proofgoal {}", fmt_label(label));
                for st in &block.steps {
                    let _ = writeln!(s, "      {}", fmt_substep(st));
                }
                s.push_str("   end\n");
            }
        }
    }
    s.push_str("end\n");
}

fn fmt_label(l: GoalLabel) -> String {
    match l {
        GoalLabel::Id(id) => id.to_string(),
        GoalLabel::Own => "#1".to_string(),
        GoalLabel::Objective => "#obj".to_string(),
    }
}

fn fmt_substep(st: &SubStep) -> String {
    match st {
        SubStep::Pol(t) => format!("pol {}", fmt_pol(t)),
        SubStep::Rup(c) => format!("rup {}", fmt_constraint(c)),
    }
}

pub fn fmt_var(v: Var) -> String {
    format!("x{}", v.index() + 1)
}

pub fn fmt_lit(l: Lit) -> String {
    if l.is_negated() {
        format!("~x{}", l.var().index() + 1)
    } else {
        format!("x{}", l.var().index() + 1)
    }
}

fn fmt_signed(c: &BigInt) -> String {
    if c.is_negative() {
        c.to_string()
    } else {
        format!("+{c}")
    }
}

pub fn fmt_constraint(c: &Constraint) -> String {
    let mut s = String::new();
    for t in c.terms() {
        let _ = write!(s, "+{} {} ", t.coef, fmt_lit(t.lit));
    }
    let _ = write!(s, ">= {}", c.degree());
    s
}

fn fmt_objective(f: &Objective) -> String {
    let mut s = String::new();
    for (v, c) in f.terms() {
        let _ = write!(s, "{} {} ", fmt_signed(c), fmt_var(v));
    }
    if !f.constant().is_zero() {
        let _ = write!(s, "{} ", f.constant());
    }
    s
}

pub fn fmt_pol(tokens: &[PolToken]) -> String {
    let parts: Vec<String> = tokens
        .iter()
        .map(|t| match t {
            PolToken::Int(n) => n.to_string(),
            PolToken::Lit(l) => fmt_lit(*l),
            PolToken::Add => "+".into(),
            PolToken::Mul => "*".into(),
            PolToken::Div => "d".into(),
            PolToken::Sat => "s".into(),
            PolToken::Weaken => "w".into(),
        })
        .collect();
    parts.join(" ")
}

fn fmt_target(t: SubstTarget) -> String {
    match t {
        SubstTarget::Const(b) => (b as u8).to_string(),
        SubstTarget::Lit(l) => fmt_lit(l),
    }
}

fn fmt_witness_pairs(w: &Substitution) -> String {
    let parts: Vec<String> = w
        .iter()
        .map(|(v, t)| format!("{} {}", fmt_var(v), fmt_target(t)))
        .collect();
    parts.join(" ")
}

fn fmt_witness_arrows(w: &Substitution) -> String {
    let parts: Vec<String> = w
        .iter()
        .map(|(v, t)| format!("{} -> {}", fmt_var(v), fmt_target(t)))
        .collect();
    parts.join(" ")
}

/// Objective-update serialization mode, fixed for a whole certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjuMode {
    #[default]
    Diff,
    New,
}

#[derive(Debug, Error)]
pub enum ProofError {
    #[error("write failed: {0}")]
    Io(#[from] io::Error),
    #[error("constraint {0} is unknown")]
    UnknownId(u64),
    #[error("constraint {0} was already deleted")]
    DeadId(u64),
    #[error("certificate already ended")]
    AfterEnd,
    #[error("objective update mode cannot change within a certificate")]
    ObjuMode,
}

struct Counting<W> {
    inner: W,
    bytes: u64,
}

impl<W: Write> Write for Counting<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.bytes += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// Streaming certificate writer with a mirror of constraint IDs,
/// core/derived membership and liveness.
pub struct ProofWriter<W: Write> {
    out: Counting<io::BufWriter<W>>,
    next_id: u64,
    live: BTreeMap<u64, bool>,
    steps: u64,
    ended: bool,
    obju_mode: ObjuMode,
}

impl<W: Write> ProofWriter<W> {
    /// Writes the header, loads `m` input constraints as core and embeds
    /// `config` lines as comments.
    pub fn new(w: W, m: u64, config: &[String], obju_mode: ObjuMode) -> Result<Self, ProofError> {
        let mut out = Counting {
            inner: io::BufWriter::new(w),
            bytes: 0,
        };
        writeln!(out, "{HEADER}")?;
        writeln!(out, "f {m}")?;
        for line in config {
            writeln!(out, "* {line}")?;
        }
        Ok(ProofWriter {
            out,
            next_id: m + 1,
            live: (1..=m).map(|id| (id, true)).collect(),
            steps: 0,
            ended: false,
            obju_mode,
        })
    }

    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    pub fn bytes_written(&self) -> u64 {
        self.out.bytes
    }

    pub fn step_count(&self) -> u64 {
        self.steps
    }

    pub fn obju_mode(&self) -> ObjuMode {
        self.obju_mode
    }

    pub fn is_live(&self, id: u64) -> bool {
        self.live.contains_key(&id)
    }

    pub fn is_core(&self, id: u64) -> bool {
        self.live.get(&id).copied().unwrap_or(false)
    }

    fn check_live(&self, id: u64) -> Result<(), ProofError> {
        if self.live.contains_key(&id) {
            Ok(())
        } else if id >= 1 && id < self.next_id {
            Err(ProofError::DeadId(id))
        } else {
            Err(ProofError::UnknownId(id))
        }
    }

    /// Streams one step; returns the ID of a derived constraint.
    pub fn emit(&mut self, step: &ProofStep) -> Result<Option<u64>, ProofError> {
        if self.ended {
            return Err(ProofError::AfterEnd);
        }
        match step {
            ProofStep::Delc { id, .. } | ProofStep::MoveToCore(id) => self.check_live(*id)?,
            ProofStep::ObjuNew(..) if self.obju_mode != ObjuMode::New => {
                return Err(ProofError::ObjuMode)
            }
            ProofStep::ObjuDiff(..) if self.obju_mode != ObjuMode::Diff => {
                return Err(ProofError::ObjuMode)
            }
            _ => {}
        }
        self.out.write_all(step.to_text().as_bytes())?;
        if !matches!(step, ProofStep::Comment(_)) {
            self.steps += 1;
        }
        match step {
            ProofStep::Delc { id, .. } => {
                self.live.remove(id);
                Ok(None)
            }
            ProofStep::MoveToCore(id) => {
                self.live.insert(*id, true);
                Ok(None)
            }
            s if s.derives() => {
                let id = self.next_id;
                self.next_id += 1;
                self.live.insert(id, false);
                Ok(Some(id))
            }
            _ => Ok(None),
        }
    }

    /// Writes the end marker and returns the underlying writer.
    pub fn finish(mut self) -> Result<W, ProofError> {
        if self.ended {
            return Err(ProofError::AfterEnd);
        }
        self.ended = true;
        writeln!(self.out, "{END_MARKER} {}", self.steps)?;
        self.out.flush()?;
        self.out
            .inner
            .into_inner()
            .map_err(|e| ProofError::Io(e.into_error()))
    }
}

/// A parsed certificate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub num_constraints: u64,
    /// Steps with their 1-based starting line numbers.
    pub steps: Vec<(usize, ProofStep)>,
    pub ended: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("certificate line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn perr<T>(line: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        line,
        message: message.into(),
    })
}

fn split_tokens(line: &str) -> Vec<String> {
    line.replace(';', " ; ")
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

fn parse_bigint(s: &str) -> Option<BigInt> {
    let body = s.strip_prefix('+').unwrap_or(s);
    let digits = body.strip_prefix('-').unwrap_or(body);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    body.parse().ok()
}

fn lit_of(s: &str) -> Option<Lit> {
    parse_lit_name(s).map(|(k, neg)| Lit::new(Var((k - 1) as u32), neg))
}

fn var_of(s: &str) -> Option<Var> {
    parse_var_name(s).map(|k| Var((k - 1) as u32))
}

fn parse_pol(tokens: &[String], line: usize) -> Result<Vec<PolToken>, ParseError> {
    tokens
        .iter()
        .map(|t| match t.as_str() {
            "+" => Ok(PolToken::Add),
            "*" => Ok(PolToken::Mul),
            "d" => Ok(PolToken::Div),
            "s" => Ok(PolToken::Sat),
            "w" => Ok(PolToken::Weaken),
            _ => {
                if let Some(l) = lit_of(t) {
                    Ok(PolToken::Lit(l))
                } else if let Some(n) = parse_bigint(t) {
                    Ok(PolToken::Int(n))
                } else {
                    perr(line, format!("bad pol token `{t}`"))
                }
            }
        })
        .collect()
}

fn parse_terms(tokens: &[String], line: usize) -> Result<(Vec<(BigInt, Lit)>, Option<BigInt>), ParseError> {
    let mut terms = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let c = parse_bigint(&tokens[i])
            .ok_or_else(|| ParseError {
                line,
                message: format!("bad coefficient `{}`", tokens[i]),
            })?;
        match tokens.get(i + 1) {
            None => return Ok((terms, Some(c))),
            Some(t) => {
                let l = lit_of(t).ok_or_else(|| ParseError {
                    line,
                    message: format!("bad literal `{t}`"),
                })?;
                terms.push((c, l));
            }
        }
        i += 2;
    }
    Ok((terms, None))
}

fn parse_constraint(tokens: &[String], line: usize) -> Result<Constraint, ParseError> {
    let Some(pos) = tokens.iter().position(|t| t == ">=") else {
        return perr(line, "constraint lacks `>=`");
    };
    if pos + 2 != tokens.len() {
        return perr(line, "constraint needs exactly one degree after `>=`");
    }
    let (terms, stray) = parse_terms(&tokens[..pos], line)?;
    if stray.is_some() {
        return perr(line, "dangling coefficient");
    }
    let degree = parse_bigint(&tokens[pos + 1]).ok_or_else(|| ParseError {
        line,
        message: format!("bad degree `{}`", tokens[pos + 1]),
    })?;
    Ok(Constraint::from_terms(terms, degree))
}

fn parse_witness(tokens: &[String], line: usize) -> Result<Substitution, ParseError> {
    let mut w = Substitution::new();
    let mut i = 0;
    while i < tokens.len() {
        let v = var_of(&tokens[i]).ok_or_else(|| ParseError {
            line,
            message: format!("bad witness variable `{}`", tokens[i]),
        })?;
        i += 1;
        if tokens.get(i).map(String::as_str) == Some("->") {
            i += 1;
        }
        let Some(t) = tokens.get(i) else {
            return perr(line, "witness entry lacks an image");
        };
        let target = match t.as_str() {
            "0" => SubstTarget::Const(false),
            "1" => SubstTarget::Const(true),
            _ => SubstTarget::Lit(lit_of(t).ok_or_else(|| ParseError {
                line,
                message: format!("bad witness image `{t}`"),
            })?),
        };
        if w.touches(v) {
            return perr(line, "witness maps a variable twice");
        }
        w.insert(v, target);
        i += 1;
    }
    Ok(w)
}

fn parse_label(s: &str, line: usize) -> Result<GoalLabel, ParseError> {
    match s {
        "#1" => Ok(GoalLabel::Own),
        "#obj" => Ok(GoalLabel::Objective),
        _ => s
            .parse::<u64>()
            .map(GoalLabel::Id)
            .or_else(|_| perr(line, format!("bad proof goal label `{s}`"))),
    }
}

struct Lines<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<(usize, &'a str)> {
        while self.pos < self.lines.len() {
            let (n, l) = self.lines[self.pos];
            self.pos += 1;
            let t = l.trim();
            if !t.is_empty() {
                return Some((n, t));
            }
        }
        None
    }

    fn last_line(&self) -> usize {
        self.lines.last().map(|(n, _)| *n).unwrap_or(1)
    }
}

fn parse_substep(toks: &[String], line: usize) -> Result<SubStep, ParseError> {
    let body: Vec<String> = toks[1..]
        .iter()
        .filter(|t| t.as_str() != ";")
        .cloned()
        .collect();
    match toks[0].as_str() {
        "pol" => Ok(SubStep::Pol(parse_pol(&body, line)?)),
        "rup" => Ok(SubStep::Rup(parse_constraint(&body, line)?)),
        other => perr(line, format!("unexpected `{other}` in subproof")),
    }
}

fn parse_subproof(lines: &mut Lines<'_>) -> Result<Subproof, ParseError> {
    let mut blocks: Vec<GoalBlock> = Vec::new();
    let mut anon: Vec<SubStep> = Vec::new();
    loop {
        let Some((n, l)) = lines.next() else {
            return perr(lines.last_line(), "unterminated subproof");
        };
        if l.starts_with('*') {
            continue;
        }
        let toks = split_tokens(l);
        match toks[0].as_str() {
            "end" if toks.len() == 1 => break,
            "proofgoal" => {
                if toks.len() != 2 {
                    return perr(n, "proofgoal takes one label");
                }
                if !anon.is_empty() {
                    blocks.push(GoalBlock {
                        label: None,
                        steps: std::mem::take(&mut anon),
                    });
                }
                let label = parse_label(&toks[1], n)?;
                let mut steps = Vec::new();
                loop {
                    let Some((m, gl)) = lines.next() else {
                        return perr(lines.last_line(), "unterminated proofgoal");
                    };
                    if gl.starts_with('*') {
                        continue;
                    }
                    let gt = split_tokens(gl);
                    if gt[0] == "end" && gt.len() == 1 {
                        break;
                    }
                    steps.push(parse_substep(&gt, m)?);
                }
                blocks.push(GoalBlock {
                    label: Some(label),
                    steps,
                });
            }
            _ => anon.push(parse_substep(&toks, n)?),
        }
    }
    if !anon.is_empty() {
        blocks.push(GoalBlock {
            label: None,
            steps: anon,
        });
    }
    Ok(Subproof { blocks })
}

/// Splits `toks` on `;` separators.
fn sections(toks: &[String]) -> Vec<&[String]> {
    toks.split(|t| t == ";").collect()
}

fn begin_flag(sec: Option<&&[String]>, line: usize) -> Result<bool, ParseError> {
    match sec {
        None => Ok(false),
        Some(s) if s.is_empty() => Ok(false),
        Some(s) if s.len() == 1 && s[0] == "begin" => Ok(true),
        Some(_) => perr(line, "expected `begin`"),
    }
}

fn parse_obju(toks: &[String], line: usize, lines: &mut Lines<'_>) -> Result<ProofStep, ParseError> {
    let Some(mode) = toks.get(1) else {
        return perr(line, "obju needs a mode");
    };
    let secs = sections(&toks[2..]);
    if secs.len() != 2 {
        return perr(line, "obju must end with `;`");
    }
    let subproof = if begin_flag(secs.get(1), line)? {
        Some(parse_subproof(lines)?)
    } else {
        None
    };
    let (terms, constant) = parse_terms(secs[0], line)?;
    let constant = constant.unwrap_or_default();
    match mode.as_str() {
        "new" => {
            let mut f = Objective::new();
            for (c, l) in &terms {
                f.add_lit(c, *l);
            }
            f.add_constant(&constant);
            Ok(ProofStep::ObjuNew(f, subproof))
        }
        "diff" => Ok(ProofStep::ObjuDiff(ObjDelta { terms, constant }, subproof)),
        other => perr(line, format!("unknown obju mode `{other}`")),
    }
}

/// Parses certificate text.
pub fn parse_certificate(text: &str) -> Result<Certificate, ParseError> {
    let mut lines = Lines {
        lines: text.lines().enumerate().map(|(i, l)| (i + 1, l)).collect(),
        pos: 0,
    };
    fn next_content<'a>(lines: &mut Lines<'a>) -> Option<(usize, &'a str)> {
        loop {
            match lines.next() {
                Some((_, l)) if l.starts_with('*') => continue,
                other => return other,
            }
        }
    }
    match next_content(&mut lines) {
        Some((_, l)) if l.split_whitespace().collect::<Vec<_>>().join(" ") == HEADER => {}
        Some((n, _)) => return perr(n, "missing certificate header"),
        None => return perr(1, "empty certificate"),
    }
    let num_constraints = match next_content(&mut lines) {
        Some((n, l)) => {
            let toks = split_tokens(l);
            let toks: Vec<&String> = toks.iter().filter(|t| t.as_str() != ";").collect();
            if toks.len() != 2 || toks[0] != "f" {
                return perr(n, "expected `f <m>`");
            }
            toks[1]
                .parse::<u64>()
                .or_else(|_| perr(n, "bad constraint count"))?
        }
        None => return perr(lines.last_line(), "missing `f` line"),
    };

    let mut steps = Vec::new();
    let mut ended = false;
    while let Some((n, l)) = lines.next() {
        if ended {
            if l.starts_with('*') {
                continue;
            }
            return perr(n, "content after end marker");
        }
        if let Some(rest) = l.strip_prefix('*') {
            steps.push((n, ProofStep::Comment(rest.strip_prefix(' ').unwrap_or(rest).to_string())));
            continue;
        }
        let toks = split_tokens(l);
        let step = match toks[0].as_str() {
            "pol" => {
                let secs = sections(&toks[1..]);
                if secs.len() > 2 || secs.get(1).is_some_and(|s| !s.is_empty()) {
                    return perr(n, "unexpected text after `;`");
                }
                ProofStep::Pol(parse_pol(secs[0], n)?)
            }
            "rup" => {
                let secs = sections(&toks[1..]);
                if secs.len() > 2 || secs.get(1).is_some_and(|s| !s.is_empty()) {
                    return perr(n, "unexpected text after `;`");
                }
                ProofStep::Rup(parse_constraint(secs[0], n)?)
            }
            "red" => {
                let secs = sections(&toks[1..]);
                if secs.len() < 2 || secs.len() > 3 {
                    return perr(n, "red needs `<constraint> ; <witness>`");
                }
                let constraint = parse_constraint(secs[0], n)?;
                let witness = parse_witness(secs[1], n)?;
                let subproof = if begin_flag(secs.get(2), n)? {
                    Some(parse_subproof(&mut lines)?)
                } else {
                    None
                };
                ProofStep::Red {
                    constraint,
                    witness,
                    subproof,
                }
            }
            "delc" => {
                let secs = sections(&toks[1..]);
                if secs[0].len() != 1 || secs.len() > 3 {
                    return perr(n, "delc needs one constraint ID");
                }
                let id = secs[0][0]
                    .parse::<u64>()
                    .or_else(|_| perr(n, format!("bad constraint ID `{}`", secs[0][0])))?;
                let witness = match secs.get(1) {
                    Some(w) => Some(parse_witness(w, n)?),
                    None => None,
                };
                let subproof = if begin_flag(secs.get(2), n)? {
                    Some(parse_subproof(&mut lines)?)
                } else {
                    None
                };
                ProofStep::Delc {
                    id,
                    witness: witness.filter(|w| !w.is_empty()),
                    subproof,
                }
            }
            "core" => {
                if toks.len() != 3 || toks[1] != "id" {
                    return perr(n, "expected `core id <id>`");
                }
                let id = toks[2]
                    .parse::<u64>()
                    .or_else(|_| perr(n, format!("bad constraint ID `{}`", toks[2])))?;
                ProofStep::MoveToCore(id)
            }
            "obju" => parse_obju(&toks, n, &mut lines)?,
            "end" => {
                let words: Vec<&str> = l.split_whitespace().collect();
                let marker: Vec<&str> = END_MARKER.split_whitespace().collect();
                if words.len() < marker.len() || words[..marker.len()] != marker[..] {
                    return perr(n, "unexpected `end`");
                }
                match &words[marker.len()..] {
                    [] => {}
                    [count] => {
                        let count: usize = count.parse().or_else(|_| perr(n, "bad step count"))?;
                        let actual = steps
                            .iter()
                            .filter(|(_, s)| !matches!(s, ProofStep::Comment(_)))
                            .count();
                        if count != actual {
                            return perr(n, format!("end marker counts {count} steps, found {actual}"));
                        }
                    }
                    _ => return perr(n, "malformed end marker"),
                }
                ended = true;
                continue;
            }
            other => return perr(n, format!("unknown rule `{other}`")),
        };
        steps.push((n, step));
    }
    if !ended {
        return perr(lines.last_line(), "missing end marker");
    }
    Ok(Certificate {
        num_constraints,
        steps,
        ended,
    })
}
