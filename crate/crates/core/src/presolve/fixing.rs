//! Variable fixings and propagation clean-up.

use std::io::Write;

use num_bigint::BigInt;
use num_traits::{One, Signed};

use super::{add_scaled, id_tok, PostsolveRecord, PropCert, Result, State, Technique};
use crate::engine::PolToken;
use crate::model::{Assignment, Constraint, Lit, SubstTarget, Substitution, Term};
use crate::proof::{SubStep, Subproof};

/// First literal that `c` propagates, if any.
fn propagated(c: &Constraint) -> Option<&Term> {
    let slack = c.coef_sum() - c.degree();
    if slack.is_negative() {
        return None;
    }
    c.terms().iter().find(|t| t.coef > slack)
}

impl<W: Write> State<W> {
    /// Moves partnership of `old` over to `new` (same equality half).
    pub(super) fn transfer_partner(&mut self, old: u64, new: u64) {
        let p = self.rows.get_mut(&old).and_then(|r| r.partner.take());
        if let Some(p) = p {
            self.pair(new, p);
        }
    }

    /// Replaces row `id` by the constraint derived by `fwd`; `back` maps the
    /// new ID to a derivation of the old row from the new one.
    pub(super) fn replace_row(
        &mut self,
        id: u64,
        fwd: Vec<PolToken>,
        back: impl FnOnce(u64) -> Vec<PolToken>,
    ) -> Result<u64> {
        let (nid, _) = self.pol(fwd)?;
        self.to_core(nid)?;
        self.transfer_partner(id, nid);
        let sub = Subproof::anonymous(vec![SubStep::Pol(back(nid))]);
        self.delete(id, None, Some(sub))?;
        Ok(nid)
    }

    /// Makes `m` true everywhere, given the live core row `u` stating `m >= 1`.
    ///
    /// Rows mentioning the variable are rewritten and their originals deleted,
    /// the objective drops the variable, and `u` itself goes last under the
    /// witness fixing the variable.
    pub(super) fn fix_with_unit(&mut self, u: u64, m: Lit) -> Result<()> {
        debug_assert_eq!(self.rows[&u].c, Constraint::unit(m));
        let x = m.var();
        let value = m.satisfying_value();
        let mut rho = Assignment::new();
        rho.assign(m);
        for id in self.rows_with(x) {
            if id == u {
                continue;
            }
            let r = self.rows[&id].c.clone();
            let restricted = r.restrict(&rho);
            if restricted.is_tautology() {
                self.drop_row(id, None)?;
                continue;
            }
            if restricted.is_contradiction() {
                return self.declare_infeasible();
            }
            let t = r.term(x).expect("row contains variable").clone();
            let a = t.coef.clone();
            if t.lit == m {
                self.replace_row(id, add_scaled(id_tok(id), PolToken::Lit(!m), &a), |n| {
                    add_scaled(id_tok(n), id_tok(u), &a)
                })?;
            } else {
                self.replace_row(id, add_scaled(id_tok(id), id_tok(u), &a), |n| {
                    add_scaled(id_tok(n), PolToken::Lit(t.lit), &a)
                })?;
            }
            debug_assert!(self.rows.values().any(|row| row.c == restricted));
        }
        if let Some(f) = &self.objective {
            if f.contains(x) {
                let mut g = f.clone();
                let c = g.remove(x);
                if value {
                    g.add_constant(&c);
                }
                self.set_objective(g)?;
            }
        }
        let w = Substitution::new().with(x, SubstTarget::Const(value));
        self.delete(u, Some(w), None)?;
        self.eliminated[x.index()] = true;
        self.log.records.push(PostsolveRecord::Fixed { var: x, value });
        self.stats.fixings += 1;
        Ok(())
    }

    /// Moves derived unit `id` to the core and fixes by it.
    pub(super) fn fix_derived(&mut self, id: u64, m: Lit) -> Result<()> {
        self.to_core(id)?;
        self.fix_with_unit(id, m)
    }

    /// Fixes `lit` propagated by row `id`, certified per the configured mode.
    fn fix_by_propagation(&mut self, id: u64, lit: Lit) -> Result<()> {
        let r = self.rows[&id].c.clone();
        let unit = Constraint::unit(lit);
        if r == unit {
            return self.fix_with_unit(id, lit);
        }
        let before = self.w.bytes_written();
        let u = match self.cfg.prop_cert {
            PropCert::Rup => self
                .rup(unit)?
                .ok_or_else(|| super::PresolveError::Internal("propagation is not RUP".into()))?,
            PropCert::Pol => {
                let mut tokens = vec![id_tok(id)];
                let mut a = BigInt::one();
                for t in r.terms() {
                    if t.lit == lit {
                        a = t.coef.clone();
                        continue;
                    }
                    tokens.push(PolToken::Lit(!t.lit));
                    if !t.coef.is_one() {
                        tokens.push(PolToken::Int(t.coef.clone()));
                        tokens.push(PolToken::Mul);
                    }
                    tokens.push(PolToken::Add);
                }
                if !a.is_one() {
                    tokens.push(PolToken::Int(a));
                    tokens.push(PolToken::Div);
                }
                let (u, c) = self.pol(tokens)?;
                debug_assert_eq!(c, unit);
                u
            }
        };
        self.stats.propagation_bytes += self.w.bytes_written() - before;
        self.stats.propagation_steps += 1;
        self.fix_derived(u, lit)
    }

    /// Removes tautologies, detects infeasibility and fixes propagated
    /// literals until nothing changes.
    pub(super) fn cleanup(&mut self) -> Result<usize> {
        let mut n = 0;
        while !self.infeasible && !self.out_of_time() {
            if self.rows.values().any(|r| r.c.is_contradiction()) {
                self.begin(Technique::Cleanup);
                self.declare_infeasible()?;
                self.commit(Technique::Cleanup);
                return Ok(n + 1);
            }
            let tauts: Vec<u64> = self
                .rows
                .iter()
                .filter(|(_, r)| r.c.is_tautology())
                .map(|(id, _)| *id)
                .collect();
            if !tauts.is_empty() {
                self.begin(Technique::Cleanup);
                for id in tauts {
                    self.drop_row(id, None)?;
                }
                self.commit(Technique::Cleanup);
                n += 1;
                continue;
            }
            let found = self
                .rows
                .iter()
                .find_map(|(id, r)| propagated(&r.c).map(|t| (*id, t.lit)));
            let Some((id, lit)) = found else { break };
            self.begin(Technique::Cleanup);
            self.fix_by_propagation(id, lit)?;
            self.commit(Technique::Cleanup);
            n += 1;
        }
        Ok(n)
    }
}
