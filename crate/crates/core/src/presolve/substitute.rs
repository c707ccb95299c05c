//! Eliminating a variable through an equality it occurs in with unit
//! coefficient.

use std::io::Write;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use super::{add_scaled, combine, id_tok, PostsolveRecord, Result, State, Technique};
use crate::engine::{literal_axiom, PolToken};
use crate::model::{Constraint, Lit, SubstTarget, Substitution, Var};
use crate::proof::{SubStep, Subproof};

/// Row `id` bounds literal `lit` when it contains it with coefficient `c`
/// and `degree > sum - 2c`: with the variable unbounded, the row alone keeps
/// it within 0-1.
fn bound_evidence(c: &Constraint, lit: Lit) -> Option<BigInt> {
    let t = c.term(lit.var())?;
    if t.lit != lit {
        return None;
    }
    let two_c: BigInt = &t.coef * 2;
    (c.degree() > &(c.coef_sum() - two_c)).then(|| t.coef.clone())
}

/// A checked substitution of `var` through the equality `(ge, le)`.
pub(super) struct Plan {
    ge: u64,
    le: u64,
    /// Literal of the variable occurring in `ge` with coefficient one.
    y: Lit,
    /// Evidence rows with coefficients for `y <= 1` and `y >= 0`; `None`
    /// when the matching auxiliary constraint is a tautology.
    upper: Option<(u64, BigInt)>,
    lower: Option<(u64, BigInt)>,
    /// Other rows containing the variable.
    targets: Vec<u64>,
    fill: i64,
}

impl<W: Write> State<W> {
    pub(super) fn consistent_pair(&self, a: u64, b: u64) -> bool {
        let mut s = self.rows[&a].c.slack_form();
        s.add_scaled(&self.rows[&b].c.slack_form(), &BigInt::one());
        s.is_empty() && s.constant().is_zero()
    }

    /// Checks that `var` can be substituted out through `(ge, le)`. Without
    /// `need_bounds` the variable bounds are not required to be implied.
    pub(super) fn plan(&self, ge: u64, le: u64, var: Var, need_bounds: bool) -> Option<Plan> {
        let g = &self.rows.get(&ge)?.c;
        if g.len() < 2 || self.rows.get(&ge)?.partner != Some(le) {
            return None;
        }
        let t = g.term(var)?;
        if !t.coef.is_one() {
            return None;
        }
        let y = t.lit;
        let l = &self.rows[&le].c;
        let aux_up = combine(g, &literal_axiom(!y), &BigInt::one()).0;
        let aux_lo = combine(l, &literal_axiom(y), &BigInt::one()).0;
        let targets: Vec<u64> = self
            .rows_with(var)
            .into_iter()
            .filter(|id| *id != ge && *id != le)
            .collect();
        let find = |lit: Lit| {
            targets.iter().find_map(|id| {
                bound_evidence(&self.rows[id].c, lit).map(|c| (*id, c))
            })
        };
        let upper = if aux_up.is_tautology() { None } else { find(!y) };
        let lower = if aux_lo.is_tautology() { None } else { find(y) };
        if need_bounds
            && ((!aux_up.is_tautology() && upper.is_none())
                || (!aux_lo.is_tautology() && lower.is_none()))
        {
            return None;
        }
        let mut fill = 0i64;
        for id in &targets {
            let d = &self.rows[id].c;
            let m = d.term(var).expect("target contains variable");
            let half = if m.lit == y { l } else { g };
            let (new, raw) = combine(d, half, &m.coef);
            if raw.is_negative() {
                return None;
            }
            fill += new.len() as i64 - d.len() as i64;
        }
        Some(Plan {
            ge,
            le,
            y,
            upper,
            lower,
            targets,
            fill,
        })
    }

    /// Carries out `plan`. With `keep_aux` the non-trivial auxiliary bounds
    /// stay as rows (relaxing the equality) instead of being deleted.
    pub(super) fn substitute(&mut self, plan: Plan, keep_aux: bool) -> Result<()> {
        let Plan {
            ge,
            le,
            y,
            upper,
            lower,
            targets,
            ..
        } = plan;
        let var = y.var();
        let expr = {
            let mut s = self.rows[&ge].c.slack_form();
            let a = s.remove(var);
            s.scaled(&-a)
        };
        let (aux_up, _) = self.pol(vec![id_tok(ge), PolToken::Lit(!y), PolToken::Add])?;
        self.to_core(aux_up)?;
        let (aux_lo, _) = self.pol(vec![id_tok(le), PolToken::Lit(y), PolToken::Add])?;
        self.to_core(aux_lo)?;
        let mut upper_new = None;
        let mut lower_new = None;
        for id in targets {
            let m = self.rows[&id].c.term(var).expect("target contains variable").clone();
            let (half, other) = if m.lit == y { (le, ge) } else { (ge, le) };
            let nid = self.replace_row(id, add_scaled(id_tok(id), id_tok(half), &m.coef), |n| {
                add_scaled(id_tok(n), id_tok(other), &m.coef)
            })?;
            if upper.as_ref().is_some_and(|(r, _)| *r == id) {
                upper_new = Some(nid);
            }
            if lower.as_ref().is_some_and(|(r, _)| *r == id) {
                lower_new = Some(nid);
            }
        }
        if let Some(f) = &self.objective {
            if f.contains(var) {
                let mut g = f.clone();
                let c = g.remove(var);
                g.add_scaled(&expr, &c);
                self.set_objective(g)?;
            }
        }
        let value = |truth: bool| SubstTarget::Const(y.is_negated() != truth);
        self.delete(le, Some(Substitution::new().with(var, value(false))), None)?;
        self.delete(ge, Some(Substitution::new().with(var, value(true))), None)?;
        for (aux, evidence, renamed) in [(aux_lo, lower, lower_new), (aux_up, upper, upper_new)] {
            if self.rows[&aux].c.is_tautology() {
                self.delete(aux, None, None)?;
            } else if !keep_aux {
                let (_, c) = evidence.expect("bound evidence");
                let r = renamed.expect("evidence row was rewritten");
                let steps = add_scaled(id_tok(r), PolToken::Int(BigInt::from(-1)), &c);
                self.delete(aux, None, Some(Subproof::anonymous(vec![SubStep::Pol(steps)])))?;
            }
        }
        self.eliminated[var.index()] = true;
        self.log.records.push(PostsolveRecord::Substituted { var, expr });
        self.stats.substitutions += 1;
        Ok(())
    }

    /// Substitutes implied free variables, least fill-in first.
    pub(super) fn implied_free(&mut self) -> Result<usize> {
        let mut n = 0;
        for _ in 0..10_000 {
            if self.out_of_time() || self.infeasible {
                break;
            }
            let mut best: Option<Plan> = None;
            for (a, b) in self.equalities() {
                if !self.consistent_pair(a, b) {
                    continue;
                }
                for t in self.rows[&a].c.terms() {
                    if let Some(p) = self.plan(a, b, t.lit.var(), true) {
                        if best.as_ref().map_or(true, |q| p.fill < q.fill) {
                            best = Some(p);
                        }
                    }
                }
            }
            let Some(plan) = best else { break };
            self.begin(Technique::ImpliedFree);
            self.substitute(plan, false)?;
            self.commit(Technique::ImpliedFree);
            n += 1;
        }
        Ok(n)
    }

    /// Rows holding `var`, if they form a single constraint: one inequality
    /// or both halves of one equality.
    fn singleton_host(&self, cols: &[Vec<u64>], var: Var) -> Option<Vec<u64>> {
        let col = &cols[var.index()];
        match col.as_slice() {
            [_] => Some(col.clone()),
            [a, b] if self.rows[a].partner == Some(*b) => Some(col.clone()),
            _ => None,
        }
    }

    /// Variables occurring in a single constraint: dual fixing, then
    /// substitution, then treating the variable as a slack.
    pub(super) fn singletons(&mut self) -> Result<usize> {
        let mut n = 0;
        let vars: Vec<Var> = self.vars.vars().collect();
        for var in vars {
            if self.out_of_time() || self.infeasible || !self.is_active(var) {
                continue;
            }
            let cols = self.columns();
            let Some(host) = self.singleton_host(&cols, var) else {
                continue;
            };
            self.begin(Technique::Singletons);
            if self.try_dual_fix(var)? {
                self.commit(Technique::DualFixing);
                n += 1;
                continue;
            }
            if let [a, b] = host[..] {
                if self.consistent_pair(a, b) {
                    let plan = self
                        .plan(a, b, var, true)
                        .map(|p| (p, false))
                        .or_else(|| self.plan(a, b, var, false).map(|p| (p, true)));
                    if let Some((p, keep_aux)) = plan {
                        self.substitute(p, keep_aux)?;
                        self.commit(Technique::Singletons);
                        n += 1;
                        continue;
                    }
                }
            }
            self.pending = None;
        }
        Ok(n)
    }
}
