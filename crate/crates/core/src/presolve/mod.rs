//! Certifying presolve for 0-1 ILPs.
//!
//! Every reduction is applied as a transaction: the problem delta and the
//! certificate steps justifying it are produced together, so the live core
//! set of the certificate always equals the presolver's row set.

mod dominance;
mod fixing;
mod primal;
mod probing;
mod substitute;

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{self, ConstraintLookup, PolToken};
use crate::model::{
    Constraint, Equality, LinExpr, Lit, Objective, Problem, Substitution, Var, VarTable,
};
use crate::proof::{ObjDelta, ObjuMode, ProofError, ProofStep, ProofWriter, Subproof};

/// Presolve techniques, in default driver order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technique {
    Cleanup,
    CoefficientTightening,
    Gcd,
    ParallelRows,
    SimpleProbing,
    Sparsify,
    ImpliedFree,
    Singletons,
    DualFixing,
    Dominance,
    AdvancedDominance,
    Probing,
}

/// Primal reductions keep the feasible set; dual ones keep the optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Class {
    Primal,
    Dual,
}

impl Technique {
    pub const ALL: [Technique; 12] = [
        Technique::Cleanup,
        Technique::CoefficientTightening,
        Technique::Gcd,
        Technique::ParallelRows,
        Technique::SimpleProbing,
        Technique::Sparsify,
        Technique::ImpliedFree,
        Technique::Singletons,
        Technique::DualFixing,
        Technique::Dominance,
        Technique::AdvancedDominance,
        Technique::Probing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Technique::Cleanup => "cleanup",
            Technique::CoefficientTightening => "coefficient_tightening",
            Technique::Gcd => "gcd",
            Technique::ParallelRows => "parallel_rows",
            Technique::SimpleProbing => "simple_probing",
            Technique::Sparsify => "sparsify",
            Technique::ImpliedFree => "implied_free",
            Technique::Singletons => "singletons",
            Technique::DualFixing => "dual_fixing",
            Technique::Dominance => "dominance",
            Technique::AdvancedDominance => "advanced_dominance",
            Technique::Probing => "probing",
        }
    }

    pub fn class(self) -> Class {
        match self {
            Technique::DualFixing | Technique::Dominance | Technique::AdvancedDominance => {
                Class::Dual
            }
            _ => Class::Primal,
        }
    }
}

/// How bound-strengthening fixings are certified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropCert {
    #[default]
    Rup,
    Pol,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Enabled techniques in the order they run within a round.
    pub techniques: Vec<Technique>,
    pub rounds: usize,
    pub prop_cert: PropCert,
    pub obju_mode: ObjuMode,
    /// Variables probed per round, most constrained first.
    pub probe_budget: usize,
    /// Variable pairs compared per round by the dominance techniques.
    pub dominance_budget: usize,
    /// Seconds.
    pub time_limit: Option<f64>,
    /// Megabytes; recorded for reproducibility only.
    pub memory_limit: Option<u64>,
    pub seed: u64,
    /// Emit a certificate.
    pub proof: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            techniques: Technique::ALL.to_vec(),
            rounds: 20,
            prop_cert: PropCert::Rup,
            obju_mode: ObjuMode::Diff,
            probe_budget: 1000,
            dominance_budget: 20_000,
            time_limit: None,
            memory_limit: None,
            seed: 0,
            proof: true,
        }
    }
}

impl RunConfig {
    /// Default settings with only `techniques` enabled.
    pub fn only(techniques: &[Technique]) -> Self {
        RunConfig {
            techniques: techniques.to_vec(),
            ..RunConfig::default()
        }
    }

    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PostsolveRecord {
    Fixed { var: Var, value: bool },
    /// `var = expr` over variables still present when it was recorded.
    Substituted { var: Var, expr: LinExpr },
    RowDeleted { id: u64 },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PostsolveError {
    #[error("substitution for {var:?} evaluates to {value}")]
    OutOfDomain { var: Var, value: BigInt },
}

/// Reverse-replayable log mapping reduced solutions back.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Postsolve {
    pub records: Vec<PostsolveRecord>,
}

impl Postsolve {
    /// Overwrites eliminated variables of `point` in place.
    pub fn restore(&self, point: &mut [bool]) -> std::result::Result<(), PostsolveError> {
        for r in self.records.iter().rev() {
            match r {
                PostsolveRecord::Fixed { var, value } => point[var.index()] = *value,
                PostsolveRecord::Substituted { var, expr } => {
                    let value = expr.eval(point);
                    if value.is_zero() {
                        point[var.index()] = false;
                    } else if value.is_one() {
                        point[var.index()] = true;
                    } else {
                        return Err(PostsolveError::OutOfDomain { var: *var, value });
                    }
                }
                PostsolveRecord::RowDeleted { .. } => {}
            }
        }
        Ok(())
    }

    /// One record per line, in recording order: `fix x3 1`,
    /// `sub x5 = +1 x2 -1 x3 1` (the trailing number is the constant),
    /// `del 7`.
    pub fn to_text(&self, vars: &VarTable) -> String {
        let mut s = String::new();
        for r in &self.records {
            match r {
                PostsolveRecord::Fixed { var, value } => {
                    s += &format!("fix {} {}\n", vars.name(*var), u8::from(*value));
                }
                PostsolveRecord::Substituted { var, expr } => {
                    s += &format!("sub {} =", vars.name(*var));
                    for (v, c) in expr.terms() {
                        let sign = if c.is_negative() { "" } else { "+" };
                        s += &format!(" {sign}{c} {}", vars.name(v));
                    }
                    s += &format!(" {}\n", expr.constant());
                }
                PostsolveRecord::RowDeleted { id } => s += &format!("del {id}\n"),
            }
        }
        s
    }

    /// Constraints pinning eliminated variables to their definitions.
    pub fn definitions(&self) -> Vec<Constraint> {
        let mut out = Vec::new();
        for r in &self.records {
            match r {
                PostsolveRecord::Fixed { var, value } => {
                    out.push(Constraint::unit(Lit::new(*var, !*value)))
                }
                PostsolveRecord::Substituted { var, expr } => {
                    let mut e = expr.scaled(&BigInt::from(-1));
                    e.add_var(&BigInt::one(), *var);
                    let eq = Equality::from_lin(&e, &BigInt::zero());
                    out.push(eq.geq);
                    out.push(eq.leq);
                }
                PostsolveRecord::RowDeleted { .. } => {}
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Reduced,
    Infeasible,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PresolveStats {
    pub rounds: usize,
    pub transactions: BTreeMap<String, usize>,
    pub fixings: usize,
    pub substitutions: usize,
    pub rows_deleted: usize,
    pub rows_added: usize,
    /// Bound-strengthening fixings and the certificate bytes spent on them.
    pub propagation_steps: usize,
    pub propagation_bytes: u64,
    pub certificate_bytes: u64,
    pub certificate_steps: u64,
    pub seconds: f64,
    pub timed_out: bool,
}

impl PresolveStats {
    pub fn total_transactions(&self) -> usize {
        self.transactions.values().sum()
    }
}

/// Problem state around one transaction, with eliminated variables pinned
/// by their postsolve definitions.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub technique: Technique,
    pub before: Problem,
    pub after: Problem,
}

#[derive(Debug, Clone)]
pub struct PresolveOutput {
    pub status: Status,
    pub reduced: Problem,
    /// Certificate constraint IDs of the reduced rows, parallel to
    /// `reduced.constraints`.
    pub row_ids: Vec<u64>,
    pub certificate: Option<String>,
    pub postsolve: Postsolve,
    pub stats: PresolveStats,
    pub trace: Option<Vec<TraceEntry>>,
}

#[derive(Debug, Error)]
pub enum PresolveError {
    #[error(transparent)]
    Proof(#[from] ProofError),
    #[error("internal derivation failed: {0}")]
    Internal(String),
}

type Result<T> = std::result::Result<T, PresolveError>;

/// Presolves `p`, keeping the certificate in memory.
pub fn presolve(p: &Problem, cfg: &RunConfig) -> Result<PresolveOutput> {
    run_buffered(p, cfg, false)
}

/// Like [`presolve`], also recording a before/after snapshot per transaction.
pub fn presolve_traced(p: &Problem, cfg: &RunConfig) -> Result<PresolveOutput> {
    run_buffered(p, cfg, true)
}

fn run_buffered(p: &Problem, cfg: &RunConfig, trace: bool) -> Result<PresolveOutput> {
    if cfg.proof {
        let (mut out, buf) = run(p, cfg, Vec::new(), trace)?;
        out.certificate = Some(String::from_utf8(buf).expect("certificate is ASCII"));
        Ok(out)
    } else {
        Ok(run(p, cfg, io::sink(), trace)?.0)
    }
}

/// Presolves `p`, streaming the certificate into `w`.
pub fn presolve_to_writer<W: Write>(p: &Problem, cfg: &RunConfig, w: W) -> Result<(PresolveOutput, W)> {
    run(p, cfg, w, false)
}

fn run<W: Write>(p: &Problem, cfg: &RunConfig, w: W, trace: bool) -> Result<(PresolveOutput, W)> {
    let start = Instant::now();
    let config_lines: Vec<String> = cfg.to_toml().lines().map(|l| format!("config {l}")).collect();
    let m = p.constraints.len() as u64;
    let writer = ProofWriter::new(w, m, &config_lines, cfg.obju_mode)?;
    let mut st = State::new(p, cfg.clone(), writer, trace);
    st.deadline = cfg
        .time_limit
        .map(|s| start + Duration::from_secs_f64(s.max(0.0)));
    st.drive()?;
    st.stats.seconds = start.elapsed().as_secs_f64();
    st.finish()
}

struct Row {
    c: Constraint,
    /// Other half of an equality.
    partner: Option<u64>,
}

pub(crate) struct State<W: Write> {
    cfg: RunConfig,
    vars: VarTable,
    rows: BTreeMap<u64, Row>,
    temps: BTreeMap<u64, Constraint>,
    objective: Option<Objective>,
    eliminated: Vec<bool>,
    log: Postsolve,
    w: ProofWriter<W>,
    stats: PresolveStats,
    infeasible: bool,
    trace: Option<Vec<TraceEntry>>,
    pending: Option<(Technique, Problem)>,
    deadline: Option<Instant>,
}

impl<W: Write> ConstraintLookup for State<W> {
    fn lookup(&self, id: u64) -> Option<&Constraint> {
        self.rows
            .get(&id)
            .map(|r| &r.c)
            .or_else(|| self.temps.get(&id))
    }

    fn next_id(&self) -> u64 {
        self.w.next_id()
    }
}

fn id_tok(id: u64) -> PolToken {
    PolToken::Int(BigInt::from(id))
}

/// Appends `k * <operand>` (the multiplication omitted for `k = 1`).
fn push_scaled(tokens: &mut Vec<PolToken>, operand: PolToken, k: &BigInt) {
    tokens.push(operand);
    if !k.is_one() {
        tokens.push(PolToken::Int(k.clone()));
        tokens.push(PolToken::Mul);
    }
}

/// `a + k * b` as a derivation.
fn add_scaled(a: PolToken, b: PolToken, k: &BigInt) -> Vec<PolToken> {
    let mut t = vec![a];
    push_scaled(&mut t, b, k);
    t.push(PolToken::Add);
    t
}

/// Signed coefficient of `var` in `c` over the variable (not the literal).
fn signed_coef(c: &Constraint, var: Var) -> BigInt {
    match c.term(var) {
        Some(t) if t.lit.is_negated() => -&t.coef,
        Some(t) => t.coef.clone(),
        None => BigInt::zero(),
    }
}

/// Sum of `a` and `k * b` in slack form, with the unclamped degree.
fn combine(a: &Constraint, b: &Constraint, k: &BigInt) -> (Constraint, BigInt) {
    let mut s = a.slack_form();
    s.add_scaled(&b.slack_form(), k);
    s.geq_raw(&BigInt::zero())
}

impl<W: Write> State<W> {
    fn new(p: &Problem, cfg: RunConfig, w: ProofWriter<W>, trace: bool) -> Self {
        let mut rows: BTreeMap<u64, Row> = p
            .constraints
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let row = Row {
                    c: c.clone(),
                    partner: None,
                };
                (i as u64 + 1, row)
            })
            .collect();
        for &(a, b) in &p.equalities {
            let (a, b) = (a as u64 + 1, b as u64 + 1);
            rows.get_mut(&a).unwrap().partner = Some(b);
            rows.get_mut(&b).unwrap().partner = Some(a);
        }
        State {
            cfg,
            vars: p.vars.clone(),
            rows,
            temps: BTreeMap::new(),
            objective: p.objective.clone(),
            eliminated: vec![false; p.vars.len()],
            log: Postsolve::default(),
            w,
            stats: PresolveStats::default(),
            infeasible: false,
            trace: trace.then(Vec::new),
            pending: None,
            deadline: None,
        }
    }

    fn out_of_time(&mut self) -> bool {
        let over = self.deadline.is_some_and(|d| Instant::now() >= d);
        if over {
            self.stats.timed_out = true;
        }
        over
    }

    fn drive(&mut self) -> Result<()> {
        let order = self.cfg.techniques.clone();
        for _ in 0..self.cfg.rounds {
            if self.infeasible || self.out_of_time() {
                break;
            }
            self.stats.rounds += 1;
            let mut applied = 0;
            for &t in &order {
                if self.infeasible || self.out_of_time() {
                    break;
                }
                applied += self.run_technique(t)?;
            }
            if applied == 0 {
                break;
            }
        }
        Ok(())
    }

    fn run_technique(&mut self, t: Technique) -> Result<usize> {
        match t {
            Technique::Cleanup => self.cleanup(),
            Technique::CoefficientTightening => self.coefficient_tightening(),
            Technique::Gcd => self.gcd_simplification(),
            Technique::ParallelRows => self.parallel_rows(),
            Technique::SimpleProbing => self.simple_probing(),
            Technique::Sparsify => self.sparsify(),
            Technique::ImpliedFree => self.implied_free(),
            Technique::Singletons => self.singletons(),
            Technique::DualFixing => self.dual_fixing(),
            Technique::Dominance => self.dominance(),
            Technique::AdvancedDominance => self.advanced_dominance(),
            Technique::Probing => self.probing(),
        }
    }

    fn finish(mut self) -> Result<(PresolveOutput, W)> {
        let mut reduced = Problem::new(self.vars.clone());
        reduced.objective = self.objective.clone();
        let mut pos = BTreeMap::new();
        let mut row_ids = Vec::new();
        for (id, row) in &self.rows {
            pos.insert(*id, reduced.constraints.len());
            reduced.constraints.push(row.c.clone());
            row_ids.push(*id);
        }
        for (id, row) in &self.rows {
            if let Some(p) = row.partner {
                if p > *id {
                    reduced.equalities.push((pos[id], pos[&p]));
                }
            }
        }
        self.stats.certificate_steps = self.w.step_count();
        let w = self.w.finish()?;
        Ok((
            PresolveOutput {
                status: if self.infeasible {
                    Status::Infeasible
                } else {
                    Status::Reduced
                },
                reduced,
                row_ids,
                certificate: None,
                postsolve: self.log,
                stats: self.stats,
                trace: self.trace,
            },
            w,
        ))
    }

    // ---- transactions ----

    fn snapshot(&self) -> Problem {
        let mut p = Problem::new(self.vars.clone());
        p.objective = self.objective.clone();
        p.constraints = self.rows.values().map(|r| r.c.clone()).collect();
        p.constraints.extend(self.log.definitions());
        p
    }

    fn begin(&mut self, t: Technique) {
        if self.trace.is_some() {
            self.pending = Some((t, self.snapshot()));
        }
    }

    fn commit(&mut self, t: Technique) {
        *self.stats.transactions.entry(t.name().to_string()).or_default() += 1;
        self.stats.certificate_bytes = self.w.bytes_written();
        if let Some((_, before)) = self.pending.take() {
            let after = self.snapshot();
            if let Some(tr) = self.trace.as_mut() {
                tr.push(TraceEntry {
                    technique: t,
                    before,
                    after,
                });
            }
        }
    }

    // ---- certificate mirror ----

    fn emit(&mut self, step: &ProofStep) -> Result<Option<u64>> {
        Ok(self.w.emit(step)?)
    }

    fn eval(&self, tokens: &[PolToken]) -> Result<Constraint> {
        engine::eval_polish(tokens, self).map_err(|e| PresolveError::Internal(e.to_string()))
    }

    /// Derives a constraint by `pol`; it stays in the derived set.
    fn pol(&mut self, tokens: Vec<PolToken>) -> Result<(u64, Constraint)> {
        let c = self.eval(&tokens)?;
        let id = self.emit(&ProofStep::Pol(tokens))?.expect("pol derives");
        self.temps.insert(id, c.clone());
        Ok((id, c))
    }

    fn view(&self) -> Vec<(u64, &Constraint)> {
        let mut v: Vec<(u64, &Constraint)> = self
            .rows
            .iter()
            .map(|(id, r)| (*id, &r.c))
            .chain(self.temps.iter().map(|(id, c)| (*id, c)))
            .collect();
        v.sort_by_key(|(id, _)| *id);
        v
    }

    fn row_view(&self) -> Vec<(u64, &Constraint)> {
        self.rows.iter().map(|(id, r)| (*id, &r.c)).collect()
    }

    fn is_rup(&self, c: &Constraint) -> bool {
        engine::rup_check(&self.view(), c)
    }

    /// Derives `c` by RUP after checking the claim; `None` if it fails.
    fn rup(&mut self, c: Constraint) -> Result<Option<u64>> {
        if !self.is_rup(&c) {
            return Ok(None);
        }
        let id = self.emit(&ProofStep::Rup(c.clone()))?.expect("rup derives");
        self.temps.insert(id, c);
        Ok(Some(id))
    }

    fn red(&mut self, c: Constraint, witness: Substitution, subproof: Option<Subproof>) -> Result<u64> {
        let step = ProofStep::Red {
            constraint: c.clone(),
            witness,
            subproof,
        };
        let id = self.emit(&step)?.expect("red derives");
        self.temps.insert(id, c);
        Ok(id)
    }

    fn to_core(&mut self, id: u64) -> Result<()> {
        self.emit(&ProofStep::MoveToCore(id))?;
        let c = self.temps.remove(&id).expect("derived constraint");
        self.rows.insert(id, Row { c, partner: None });
        self.stats.rows_added += 1;
        Ok(())
    }

    fn delete(&mut self, id: u64, witness: Option<Substitution>, subproof: Option<Subproof>) -> Result<()> {
        self.emit(&ProofStep::Delc {
            id,
            witness,
            subproof,
        })?;
        if self.temps.remove(&id).is_none() {
            let row = self.rows.remove(&id).expect("live row");
            if let Some(p) = row.partner {
                if let Some(r) = self.rows.get_mut(&p) {
                    r.partner = None;
                }
            }
            self.stats.rows_deleted += 1;
        }
        Ok(())
    }

    /// Deletes a row that is redundant given the rest of the core.
    fn drop_row(&mut self, id: u64, subproof: Option<Subproof>) -> Result<()> {
        self.delete(id, None, subproof)?;
        self.log.records.push(PostsolveRecord::RowDeleted { id });
        Ok(())
    }

    /// Abandons a transaction: derived leftovers are deleted.
    fn abort(&mut self) -> Result<()> {
        let ids: Vec<u64> = self.temps.keys().copied().collect();
        for id in ids {
            self.delete(id, None, None)?;
        }
        self.pending = None;
        Ok(())
    }

    fn pair(&mut self, a: u64, b: u64) {
        self.rows.get_mut(&a).unwrap().partner = Some(b);
        self.rows.get_mut(&b).unwrap().partner = Some(a);
    }

    /// Derives a contradiction; the reduced problem becomes infeasible.
    fn declare_infeasible(&mut self) -> Result<()> {
        let c = Constraint::contradiction();
        let id = self.emit(&ProofStep::Rup(c.clone()))?.expect("rup derives");
        self.temps.insert(id, c);
        self.to_core(id)?;
        self.infeasible = true;
        Ok(())
    }

    /// Replaces the objective, emitting the update.
    fn set_objective(&mut self, new: Objective) -> Result<()> {
        let old = self.objective.clone().unwrap_or_default();
        if old == new {
            return Ok(());
        }
        let step = match self.w.obju_mode() {
            ObjuMode::New => ProofStep::ObjuNew(new.clone(), None),
            ObjuMode::Diff => {
                let mut d = new.clone();
                d.add_scaled(&old, &BigInt::from(-1));
                ProofStep::ObjuDiff(
                    ObjDelta {
                        terms: d.terms().map(|(v, c)| (c.clone(), Lit::pos(v))).collect(),
                        constant: d.constant().clone(),
                    },
                    None,
                )
            }
        };
        self.emit(&step)?;
        self.objective = Some(new);
        Ok(())
    }

    // ---- queries ----

    fn obj_coef(&self, var: Var) -> BigInt {
        self.objective
            .as_ref()
            .map(|f| f.coef(var))
            .unwrap_or_default()
    }

    /// Row IDs containing `var`, ascending.
    fn rows_with(&self, var: Var) -> Vec<u64> {
        self.rows
            .iter()
            .filter(|(_, r)| r.c.contains(var))
            .map(|(id, _)| *id)
            .collect()
    }

    /// Occurrence lists for every variable.
    fn columns(&self) -> Vec<Vec<u64>> {
        let mut cols = vec![Vec::new(); self.vars.len()];
        for (id, r) in &self.rows {
            for t in r.c.terms() {
                cols[t.lit.var().index()].push(*id);
            }
        }
        cols
    }

    /// Equalities as `(first, second)` ID pairs with `first < second`.
    fn equalities(&self) -> Vec<(u64, u64)> {
        self.rows
            .iter()
            .filter_map(|(id, r)| r.partner.filter(|p| p > id).map(|p| (*id, p)))
            .collect()
    }

    fn is_active(&self, var: Var) -> bool {
        !self.eliminated[var.index()]
    }
}
