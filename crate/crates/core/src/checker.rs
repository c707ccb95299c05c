//! Independent certificate checker.
//!
//! Replays a certificate against the original instance, keeping core and
//! derived constraint sets and rejecting the first unsound step.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::Serialize;

use crate::engine::{self, eval_polish, ConstraintLookup};
use crate::model::{Constraint, LinExpr, Objective, Problem, Substitution};
use crate::proof::{Certificate, GoalBlock, GoalLabel, ProofStep, SubStep, Subproof};

#[derive(Debug, Clone)]
pub struct Entry {
    pub constraint: Constraint,
    pub core: bool,
}

/// Live constraints by ID, the tracked objective and the ID counter.
#[derive(Debug, Clone)]
pub struct Database {
    entries: BTreeMap<u64, Entry>,
    next_id: u64,
    objective: Option<Objective>,
}

impl ConstraintLookup for Database {
    fn lookup(&self, id: u64) -> Option<&Constraint> {
        self.entries.get(&id).map(|e| &e.constraint)
    }

    fn next_id(&self) -> u64 {
        self.next_id
    }
}

impl Database {
    pub fn from_problem(p: &Problem) -> Self {
        let entries = p
            .constraints
            .iter()
            .enumerate()
            .map(|(i, c)| {
                (
                    i as u64 + 1,
                    Entry {
                        constraint: c.clone(),
                        core: true,
                    },
                )
            })
            .collect();
        Database {
            entries,
            next_id: p.constraints.len() as u64 + 1,
            objective: p.objective.clone(),
        }
    }

    pub fn get(&self, id: u64) -> Option<&Entry> {
        self.entries.get(&id)
    }

    pub fn live(&self) -> impl Iterator<Item = (u64, &Entry)> {
        self.entries.iter().map(|(id, e)| (*id, e))
    }

    pub fn objective(&self) -> Option<&Objective> {
        self.objective.as_ref()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Live core constraints with the current objective, as a problem over
    /// the given variable table.
    pub fn core_problem(&self, template: &Problem) -> Problem {
        let mut p = Problem::new(template.vars.clone());
        p.objective = self.objective.clone();
        p.constraints = self
            .entries
            .values()
            .filter(|e| e.core)
            .map(|e| e.constraint.clone())
            .collect();
        p
    }

    fn view(&self, core_only: bool, skip: Option<u64>) -> Vec<(u64, &Constraint)> {
        self.entries
            .iter()
            .filter(|(id, e)| (!core_only || e.core) && Some(**id) != skip)
            .map(|(id, e)| (*id, &e.constraint))
            .collect()
    }

    fn insert_derived(&mut self, c: Constraint) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        self.entries.insert(
            id,
            Entry {
                constraint: c,
                core: false,
            },
        );
        id
    }
}

/// A premise set plus scratch constraints pushed while checking a subproof.
struct Scratch<'a> {
    base: &'a [(u64, &'a Constraint)],
    first: u64,
    extra: Vec<Constraint>,
}

impl ConstraintLookup for Scratch<'_> {
    fn lookup(&self, id: u64) -> Option<&Constraint> {
        if id >= self.first {
            self.extra.get((id - self.first) as usize)
        } else {
            self.base
                .binary_search_by_key(&id, |(i, _)| *i)
                .ok()
                .map(|i| self.base[i].1)
        }
    }

    fn next_id(&self) -> u64 {
        self.first + self.extra.len() as u64
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Stats {
    pub steps: BTreeMap<String, u64>,
    pub rup_checks: u64,
    pub propagations: u64,
    pub goals: u64,
    pub max_db_size: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Accepted,
    Rejected {
        /// 0-based index of the failing step (comments included).
        step: usize,
        line: usize,
        rule: String,
        reason: String,
    },
    TimedOut {
        step: usize,
    },
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub outcome: Outcome,
    pub stats: Stats,
    pub final_db: Database,
}

impl Verdict {
    pub fn accepted(&self) -> bool {
        self.outcome == Outcome::Accepted
    }
}

/// Per-step observer, called after each accepted step with its index.
pub type StepHook<'a> = &'a mut dyn FnMut(usize, &Database);

#[derive(Default)]
pub struct CheckOptions<'a> {
    pub deadline: Option<Instant>,
    pub hook: Option<StepHook<'a>>,
    /// Reduced instance the certificate claims to reach: at the end the live
    /// core set and objective must equal it (constraint order ignored).
    pub expected: Option<&'a Problem>,
}

struct Ctx<'s> {
    stats: &'s mut Stats,
}

impl Ctx<'_> {
    fn rup(&mut self, view: &[(u64, &Constraint)], c: &Constraint) -> bool {
        self.stats.rup_checks += 1;
        let neg = c.negate();
        let mut all = view.to_vec();
        all.push((u64::MAX, &neg));
        let fp = engine::propagate(&all, &crate::model::Assignment::new());
        self.stats.propagations += fp.propagations() as u64;
        fp.conflict.is_some()
    }

    /// Closed without a subproof: tautology or implied by one premise.
    fn trivially_closed(&self, goal: &Constraint, premises: &[(u64, &Constraint)]) -> bool {
        goal.is_tautology() || premises.iter().any(|(_, p)| p.implies(goal))
    }

    fn run_block(
        &mut self,
        goal: &Constraint,
        premises: &[(u64, &Constraint)],
        first: u64,
        block: &GoalBlock,
    ) -> Result<(), String> {
        let mut scratch = Scratch {
            base: premises,
            first,
            extra: vec![goal.negate()],
        };
        for step in &block.steps {
            let derived = match step {
                SubStep::Pol(tokens) => {
                    eval_polish(tokens, &scratch).map_err(|e| format!("subproof pol: {e}"))?
                }
                SubStep::Rup(c) => {
                    let mut view: Vec<(u64, &Constraint)> = premises.to_vec();
                    for (i, x) in scratch.extra.iter().enumerate() {
                        view.push((first + i as u64, x));
                    }
                    if !self.rup(&view, c) {
                        return Err("subproof rup step does not propagate to conflict".into());
                    }
                    c.clone()
                }
            };
            scratch.extra.push(derived);
        }
        // Every step runs; the last one must close the goal.
        match scratch.extra.last() {
            Some(c) if scratch.extra.len() > 1 && (c.is_contradiction() || c.implies(goal)) => Ok(()),
            _ => Err("subproof does not close its goal".into()),
        }
    }

    fn discharge(
        &mut self,
        goals: Vec<(GoalLabel, Constraint)>,
        premises: &[(u64, &Constraint)],
        first_scratch: u64,
        subproof: Option<&Subproof>,
    ) -> Result<(), String> {
        let mut labeled: BTreeMap<GoalLabel, &GoalBlock> = BTreeMap::new();
        let mut anon: Vec<&GoalBlock> = Vec::new();
        if let Some(sp) = subproof {
            for b in &sp.blocks {
                match b.label {
                    Some(l) => {
                        if labeled.insert(l, b).is_some() {
                            return Err(format!("duplicate proof goal label {l:?}"));
                        }
                        if !goals.iter().any(|(gl, _)| *gl == l) {
                            return Err(format!("proof goal {l:?} does not exist"));
                        }
                    }
                    None => anon.push(b),
                }
            }
        }
        let mut anon = anon.into_iter();
        for (label, goal) in &goals {
            self.stats.goals += 1;
            let closed = self.trivially_closed(goal, premises)
                || self.trivially_closed(&goal.gcd_reduced(), premises);
            let block = match labeled.get(label) {
                Some(b) => Some(*b),
                None if !closed => anon.next(),
                None => None,
            };
            if closed {
                continue;
            }
            let result = match block {
                Some(b) => self.run_block(goal, premises, first_scratch, b),
                None if self.rup(premises, goal) => Ok(()),
                None => Err("no subproof and RUP fails".into()),
            };
            if let Err(why) = result {
                return Err(format!("proof goal {} not discharged ({why})", label_text(*label)));
            }
        }
        Ok(())
    }
}

fn label_text(l: GoalLabel) -> String {
    match l {
        GoalLabel::Id(id) => format!("for constraint {id}"),
        GoalLabel::Own => "#1".into(),
        GoalLabel::Objective => "#obj".into(),
    }
}

fn touches_objective(w: &Substitution, f: Option<&Objective>) -> bool {
    f.is_some_and(|f| w.iter().any(|(v, _)| f.contains(v)))
}

fn touches(w: &Substitution, c: &Constraint) -> bool {
    c.terms().iter().any(|t| w.touches(t.lit.var()))
}

/// Goals for redundance: changed constraints in ascending ID, then the
/// constraint itself, then the objective.
fn redundance_goals(
    candidates: &[(u64, &Constraint)],
    c: &Constraint,
    w: &Substitution,
    f: Option<&Objective>,
) -> Vec<(GoalLabel, Constraint)> {
    let mut goals = Vec::new();
    for (id, d) in candidates {
        if touches(w, d) {
            let dw = d.substitute(w);
            if &dw != *d {
                goals.push((GoalLabel::Id(*id), dw));
            }
        }
    }
    goals.push((GoalLabel::Own, c.substitute(w)));
    if touches_objective(w, f) {
        let f = f.unwrap();
        let mut diff = f.clone();
        diff.add_scaled(&f.substitute(w), &BigInt::from(-1));
        goals.push((GoalLabel::Objective, diff.geq(&BigInt::zero())));
    }
    goals
}

fn reject(step: usize, line: usize, rule: &str, reason: impl Into<String>) -> Outcome {
    Outcome::Rejected {
        step,
        line,
        rule: rule.to_string(),
        reason: reason.into(),
    }
}

fn apply_step(db: &mut Database, step: &ProofStep, ctx: &mut Ctx<'_>) -> Result<(), String> {
    match step {
        ProofStep::Comment(_) => Ok(()),
        ProofStep::Pol(tokens) => {
            let c = eval_polish(tokens, db).map_err(|e| e.to_string())?;
            db.insert_derived(c);
            Ok(())
        }
        ProofStep::Rup(c) => {
            let view = db.view(false, None);
            if !ctx.rup(&view, c) {
                return Err("constraint does not follow by unit propagation".into());
            }
            db.insert_derived(c.clone());
            Ok(())
        }
        ProofStep::Red {
            constraint,
            witness,
            subproof,
        } => {
            let neg = constraint.negate();
            let not_c_id = db.next_id;
            let goals = {
                let view = db.view(false, None);
                redundance_goals(&view, constraint, witness, db.objective.as_ref())
            };
            let mut premises = db.view(false, None);
            premises.push((not_c_id, &neg));
            ctx.discharge(goals, &premises, not_c_id + 1, subproof.as_ref())?;
            db.insert_derived(constraint.clone());
            Ok(())
        }
        ProofStep::Delc {
            id,
            witness,
            subproof,
        } => {
            let Some(entry) = db.entries.get(id) else {
                return Err(if *id >= 1 && *id < db.next_id {
                    format!("constraint {id} was already deleted")
                } else {
                    format!("unknown constraint {id}")
                });
            };
            if entry.core {
                let c = entry.constraint.clone();
                let neg = c.negate();
                let w = witness.clone().unwrap_or_default();
                let others = db.view(true, Some(*id));
                let goals = redundance_goals(&others, &c, &w, db.objective.as_ref());
                let not_c_id = db.next_id;
                let mut premises = others;
                premises.push((not_c_id, &neg));
                ctx.discharge(goals, &premises, not_c_id + 1, subproof.as_ref())?;
            }
            db.entries.remove(id);
            Ok(())
        }
        ProofStep::MoveToCore(id) => match db.entries.get_mut(id) {
            Some(e) => {
                e.core = true;
                Ok(())
            }
            None => Err(format!("constraint {id} is not live")),
        },
        ProofStep::ObjuNew(f_new, subproof) => update_objective(db, f_new.clone(), subproof.as_ref(), ctx),
        ProofStep::ObjuDiff(delta, subproof) => {
            let Some(f) = db.objective.as_ref() else {
                return Err("instance has no objective".into());
            };
            let mut f_new = f.clone();
            f_new.add_scaled(&delta.as_lin(), &BigInt::from(1));
            update_objective(db, f_new, subproof.as_ref(), ctx)
        }
    }
}

fn update_objective(
    db: &mut Database,
    f_new: Objective,
    subproof: Option<&Subproof>,
    ctx: &mut Ctx<'_>,
) -> Result<(), String> {
    let Some(f) = db.objective.as_ref() else {
        return Err("instance has no objective".into());
    };
    let mut down: LinExpr = f.clone();
    down.add_scaled(&f_new, &BigInt::from(-1));
    let up = down.scaled(&BigInt::from(-1));
    let goals = vec![
        (GoalLabel::Own, down.geq(&BigInt::zero())),
        (GoalLabel::Objective, up.geq(&BigInt::zero())),
    ];
    let premises = db.view(true, None);
    let first = db.next_id;
    // Labels are not meaningful here; blocks bind by position.
    let positional = subproof.map(|sp| Subproof {
        blocks: sp
            .blocks
            .iter()
            .map(|b| GoalBlock {
                label: None,
                steps: b.steps.clone(),
            })
            .collect(),
    });
    ctx.discharge(goals, &premises, first, positional.as_ref())?;
    db.objective = Some(f_new);
    Ok(())
}

/// Replays `cert` against `instance`.
fn matches_reduced(db: &Database, want: &Problem) -> Result<(), String> {
    let mut count: HashMap<&Constraint, i64> = HashMap::new();
    for (_, e) in db.live().filter(|(_, e)| e.core) {
        *count.entry(&e.constraint).or_default() += 1;
    }
    for c in &want.constraints {
        *count.entry(c).or_default() -= 1;
    }
    if let Some((c, n)) = count.iter().find(|(_, n)| **n != 0) {
        let side = if *n > 0 { "final core set" } else { "reduced instance" };
        return Err(format!("{} appears only in the {side}", c.display(&want.vars)));
    }
    let have = db.objective().cloned().unwrap_or_default();
    if have != want.objective.clone().unwrap_or_default() {
        return Err("final objective differs from the reduced instance".into());
    }
    Ok(())
}

pub fn check(instance: &Problem, cert: &Certificate) -> Verdict {
    check_with(instance, cert, CheckOptions::default())
}

pub fn check_with(instance: &Problem, cert: &Certificate, mut opts: CheckOptions<'_>) -> Verdict {
    let start = Instant::now();
    let mut stats = Stats::default();
    let mut db = Database::from_problem(instance);
    stats.max_db_size = db.len();

    let finish = |outcome, mut stats: Stats, db| {
        stats.seconds = start.elapsed().as_secs_f64();
        Verdict {
            outcome,
            stats,
            final_db: db,
        }
    };

    if cert.num_constraints != instance.constraints.len() as u64 {
        let outcome = reject(
            0,
            1,
            "f",
            format!(
                "certificate loads {} constraints, instance has {}",
                cert.num_constraints,
                instance.constraints.len()
            ),
        );
        return finish(outcome, stats, db);
    }

    for (i, (line, step)) in cert.steps.iter().enumerate() {
        if opts.deadline.is_some_and(|d| Instant::now() >= d) {
            return finish(Outcome::TimedOut { step: i }, stats, db);
        }
        *stats.steps.entry(step.kind().to_string()).or_default() += 1;
        let mut ctx = Ctx { stats: &mut stats };
        if let Err(reason) = apply_step(&mut db, step, &mut ctx) {
            let outcome = reject(i, *line, step.kind(), reason);
            return finish(outcome, stats, db);
        }
        stats.max_db_size = stats.max_db_size.max(db.len());
        if let Some(hook) = opts.hook.as_mut() {
            hook(i, &db);
        }
    }
    if !cert.ended {
        let outcome = reject(cert.steps.len(), 0, "end", "missing end marker");
        return finish(outcome, stats, db);
    }
    if let Some(want) = opts.expected {
        if let Err(reason) = matches_reduced(&db, want) {
            return finish(reject(cert.steps.len(), 0, "end", reason), stats, db);
        }
    }
    finish(Outcome::Accepted, stats, db)
}
