//! Probing: tentative fixings followed by propagation.

use std::io::Write;

use num_bigint::BigInt;
use num_traits::One;

use super::{id_tok, Result, State, Technique};
use crate::engine::{self, PolToken};
use crate::model::{Assignment, Constraint, Lit, Var};

fn clause(a: Lit, b: Lit) -> Constraint {
    Constraint::from_terms([(BigInt::one(), a), (BigInt::one(), b)], BigInt::one())
}

/// What probing one variable revealed.
enum Finding {
    /// Setting the variable to this value conflicts.
    Conflict(bool),
    /// Both probes force this literal.
    Forced(Lit),
    /// The literal takes the probed variable's value.
    Equivalent(Lit),
}

impl<W: Write> State<W> {
    /// Derives the equality `y = x` as the clause pair `(x̄ ∨ y, x ∨ ȳ)` by
    /// RUP and substitutes `y`'s variable through it.
    fn link_and_substitute(&mut self, x: Lit, y: Lit) -> Result<bool> {
        let Some(a) = self.rup(clause(!x, y))? else {
            return Ok(false);
        };
        let Some(b) = self.rup(clause(x, !y))? else {
            self.delete(a, None, None)?;
            return Ok(false);
        };
        self.to_core(a)?;
        self.to_core(b)?;
        self.pair(a, b);
        match self.plan(a, b, y.var(), true) {
            Some(p) => {
                self.substitute(p, false)?;
                Ok(true)
            }
            None => {
                self.delete(b, None, None)?;
                self.delete(a, None, None)?;
                Ok(false)
            }
        }
    }

    /// Equalities `a_k l_k + rest = b` with `a_k = b = sum(rest)`: every
    /// other literal is the negation of `l_k`.
    pub(super) fn simple_probing(&mut self) -> Result<usize> {
        let mut n = 0;
        'outer: loop {
            if self.out_of_time() || self.infeasible {
                break;
            }
            for (a, b) in self.equalities() {
                if !self.consistent_pair(a, b) {
                    continue;
                }
                let c = &self.rows[&a].c;
                if c.len() < 2 || c.coef_sum() != c.degree() * 2 {
                    continue;
                }
                let Some(k) = c.terms().iter().find(|t| &t.coef == c.degree()) else {
                    continue;
                };
                let lk = k.lit;
                let Some(j) = c.terms().iter().find(|t| t.lit != lk) else {
                    continue;
                };
                let lj = j.lit;
                self.begin(Technique::SimpleProbing);
                if self.link_and_substitute(!lk, lj)? {
                    self.commit(Technique::SimpleProbing);
                    n += 1;
                    continue 'outer;
                }
                self.pending = None;
            }
            break;
        }
        Ok(n)
    }

    fn probe(&self, var: Var) -> Option<Finding> {
        let view = self.row_view();
        let run = |value: bool| {
            let mut rho = Assignment::new();
            rho.set(var, value);
            engine::propagate(&view, &rho)
        };
        let one = run(true);
        if one.conflict.is_some() {
            return Some(Finding::Conflict(true));
        }
        let zero = run(false);
        if zero.conflict.is_some() {
            return Some(Finding::Conflict(false));
        }
        for (v, b1) in one.assignment.iter() {
            if v == var {
                continue;
            }
            match zero.assignment.get(v) {
                Some(b0) if b0 == b1 => return Some(Finding::Forced(Lit::new(v, !b1))),
                Some(_) => return Some(Finding::Equivalent(Lit::new(v, !b1))),
                None => {}
            }
        }
        None
    }

    pub(super) fn probing(&mut self) -> Result<usize> {
        let cols = self.columns();
        let mut order: Vec<Var> = self
            .vars
            .vars()
            .filter(|v| self.is_active(*v) && !cols[v.index()].is_empty())
            .collect();
        order.sort_by_key(|v| (std::cmp::Reverse(cols[v.index()].len()), *v));
        order.truncate(self.cfg.probe_budget);
        let mut n = 0;
        for var in order {
            if self.out_of_time() || self.infeasible {
                break;
            }
            if !self.is_active(var) {
                continue;
            }
            let Some(finding) = self.probe(var) else {
                continue;
            };
            self.begin(Technique::Probing);
            let applied = match finding {
                Finding::Conflict(value) => {
                    let m = Lit::new(var, value);
                    match self.rup(Constraint::unit(m))? {
                        Some(id) => {
                            self.fix_derived(id, m)?;
                            true
                        }
                        None => false,
                    }
                }
                Finding::Forced(l) => {
                    let x = Lit::pos(var);
                    match (self.rup(clause(!x, l))?, self.rup(clause(x, l))?) {
                        (Some(p), Some(q)) => {
                            let two = BigInt::from(2);
                            let (u, _) = self.pol(vec![
                                id_tok(p),
                                id_tok(q),
                                PolToken::Add,
                                PolToken::Int(two),
                                PolToken::Div,
                            ])?;
                            self.delete(p, None, None)?;
                            self.delete(q, None, None)?;
                            self.fix_derived(u, l)?;
                            true
                        }
                        _ => false,
                    }
                }
                Finding::Equivalent(l) => self.link_and_substitute(Lit::pos(var), l)?,
            };
            if applied {
                self.commit(Technique::Probing);
                n += 1;
            } else {
                self.abort()?;
            }
        }
        Ok(n)
    }
}
