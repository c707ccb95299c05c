//! Row-local primal reductions.

use std::collections::HashMap;
use std::io::Write;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::{id_tok, push_scaled, Result, State, Technique};
use crate::engine::PolToken;
use crate::model::{ceil_div, Constraint, Lit, Var};
use crate::proof::{SubStep, Subproof};

/// Smallest prefix (by descending coefficient) whose gcd lets the tail be
/// dropped. Returns the dropped literals, the gcd and the rounded degree.
pub(super) fn gcd_candidate(c: &Constraint) -> Option<(Vec<Lit>, BigInt, BigInt)> {
    let b = c.degree();
    if b.is_zero() {
        return None;
    }
    let mut terms: Vec<_> = c.terms().iter().collect();
    terms.sort_by(|x, y| y.coef.cmp(&x.coef));
    let total = c.coef_sum();
    let mut g = BigInt::zero();
    let mut head = BigInt::zero();
    for (k, t) in terms.iter().enumerate() {
        g = g.gcd(&t.coef);
        if g <= BigInt::one() {
            return None;
        }
        head += &t.coef;
        let tail = &total - &head;
        let rounded = ceil_div(b, &g) * &g;
        let r = &rounded - b;
        let full = k + 1 == terms.len();
        if tail <= &g - 1 - &r && (!full || !r.is_zero()) {
            let dropped = terms[k + 1..].iter().map(|t| t.lit).collect();
            return Some((dropped, g, rounded));
        }
    }
    None
}

/// Canonical key of a row up to positive scaling.
fn scaling_key(c: &Constraint) -> (Vec<(BigInt, Lit)>, BigInt, BigInt) {
    let g = c
        .terms()
        .iter()
        .fold(BigInt::zero(), |acc, t| acc.gcd(&t.coef));
    let terms = c.terms().iter().map(|t| (&t.coef / &g, t.lit)).collect();
    let h = c.degree().gcd(&g);
    (terms, c.degree() / &h, &g / &h)
}

fn coef_gcd(c: &Constraint) -> BigInt {
    c.terms()
        .iter()
        .fold(BigInt::zero(), |acc, t| acc.gcd(&t.coef))
}

impl<W: Write> State<W> {
    fn inequality_ids(&self) -> Vec<u64> {
        self.rows
            .iter()
            .filter(|(_, r)| r.partner.is_none())
            .map(|(id, _)| *id)
            .collect()
    }

    /// Saturates rows with a coefficient above the degree.
    pub(super) fn coefficient_tightening(&mut self) -> Result<usize> {
        let mut n = 0;
        for id in self.inequality_ids() {
            if self.out_of_time() {
                break;
            }
            let c = &self.rows[&id].c;
            if c.is_tautology() || !c.terms().iter().any(|t| &t.coef > c.degree()) {
                continue;
            }
            self.begin(Technique::CoefficientTightening);
            let (nid, _) = self.pol(vec![id_tok(id), PolToken::Sat])?;
            self.to_core(nid)?;
            self.delete(id, None, None)?;
            self.commit(Technique::CoefficientTightening);
            n += 1;
        }
        Ok(n)
    }

    /// Drops small tail terms whose total cannot bridge a multiple of the
    /// gcd of the larger coefficients, rounding the degree up.
    pub(super) fn gcd_simplification(&mut self) -> Result<usize> {
        let mut n = 0;
        for id in self.inequality_ids() {
            if self.out_of_time() {
                break;
            }
            let c = self.rows[&id].c.clone();
            let Some((dropped, g, rounded)) = gcd_candidate(&c) else {
                continue;
            };
            let mut tokens = vec![id_tok(id)];
            for l in &dropped {
                tokens.push(PolToken::Lit(*l));
                tokens.push(PolToken::Weaken);
            }
            tokens.extend([
                PolToken::Int(g.clone()),
                PolToken::Div,
                PolToken::Int(g),
                PolToken::Mul,
            ]);
            self.begin(Technique::Gcd);
            let (nid, new) = self.pol(tokens)?;
            debug_assert_eq!(new.degree(), &rounded);
            debug_assert!(same_solutions(&c, &new));
            self.to_core(nid)?;
            self.delete(id, None, None)?;
            self.commit(Technique::Gcd);
            n += 1;
        }
        Ok(n)
    }

    /// Deletes rows that are positive multiples of an earlier row.
    pub(super) fn parallel_rows(&mut self) -> Result<usize> {
        let mut first: HashMap<_, u64> = HashMap::new();
        let mut n = 0;
        for id in self.inequality_ids() {
            let c = &self.rows[&id].c;
            if c.is_empty() {
                continue;
            }
            let key = scaling_key(c);
            let Some(&s) = first.get(&key) else {
                first.insert(key, id);
                continue;
            };
            let gs = coef_gcd(&self.rows[&s].c);
            let gp = coef_gcd(c);
            let h = gs.gcd(&gp);
            let (p, q) = (&gp / &h, &gs / &h);
            let mut tokens = Vec::new();
            push_scaled(&mut tokens, id_tok(s), &p);
            if !q.is_one() {
                tokens.push(PolToken::Int(q));
                tokens.push(PolToken::Div);
            }
            debug_assert_eq!(&self.eval(&tokens)?, c);
            self.begin(Technique::ParallelRows);
            self.drop_row(id, Some(Subproof::anonymous(vec![SubStep::Pol(tokens)])))?;
            self.commit(Technique::ParallelRows);
            n += 1;
        }
        Ok(n)
    }

    /// Best aggregation of equality `(a, b)` into inequality `d`: the
    /// scale on `d`, the half used and its scale, and the new nonzero count.
    fn sparsify_candidate(&self, a: u64, b: u64, d: u64) -> Option<(BigInt, u64, BigInt, usize)> {
        let ea = &self.rows[&a].c;
        let dc = &self.rows[&d].c;
        let sa = ea.slack_form();
        let sd = dc.slack_form();
        let mut best: Option<(BigInt, u64, BigInt, usize)> = None;
        for t in dc.terms() {
            let v: Var = t.lit.var();
            let ev = sa.coef(v);
            if ev.is_zero() {
                continue;
            }
            let dv = sd.coef(v);
            let g = dv.gcd(&ev);
            let kd = ev.abs() / &g;
            let ke = -&dv * ev.signum() / &g;
            let (half, k) = if ke.is_positive() { (a, ke) } else { (b, -ke) };
            let mut s = sd.scaled(&kd);
            s.add_scaled(&self.rows[&half].c.slack_form(), &k);
            let (c, raw) = s.geq_raw(&BigInt::zero());
            if raw.is_negative() {
                continue;
            }
            let nnz = c.len();
            if nnz < dc.len() && best.as_ref().map_or(true, |b| nnz < b.3) {
                best = Some((kd, half, k, nnz));
            }
        }
        best
    }

    /// Adds multiples of equalities to inequalities to cancel nonzeros.
    pub(super) fn sparsify(&mut self) -> Result<usize> {
        let mut n = 0;
        let eqs = self.equalities();
        for (a, b) in eqs {
            let consistent = {
                let mut s = self.rows[&a].c.slack_form();
                s.add_scaled(&self.rows[&b].c.slack_form(), &BigInt::one());
                s.is_empty() && s.constant().is_zero()
            };
            if !consistent {
                continue;
            }
            let mut budget = 64;
            loop {
                if budget == 0 || self.out_of_time() || !self.rows.contains_key(&a) {
                    break;
                }
                budget -= 1;
                let vars: Vec<Var> = self.rows[&a].c.terms().iter().map(|t| t.lit.var()).collect();
                let cand = self.inequality_ids().into_iter().find_map(|d| {
                    if !vars.iter().any(|v| self.rows[&d].c.contains(*v)) {
                        return None;
                    }
                    self.sparsify_candidate(a, b, d).map(|c| (d, c))
                });
                let Some((d, (kd, half, k, _))) = cand else { break };
                let other = if half == a { b } else { a };
                let mut fwd = Vec::new();
                push_scaled(&mut fwd, id_tok(d), &kd);
                push_scaled(&mut fwd, id_tok(half), &k);
                fwd.push(PolToken::Add);
                self.begin(Technique::Sparsify);
                self.replace_row(d, fwd, |nid| {
                    let mut back = vec![id_tok(nid)];
                    push_scaled(&mut back, id_tok(other), &k);
                    back.push(PolToken::Add);
                    if !kd.is_one() {
                        back.push(PolToken::Int(kd.clone()));
                        back.push(PolToken::Div);
                    }
                    back
                })?;
                self.commit(Technique::Sparsify);
                n += 1;
            }
        }
        Ok(n)
    }
}

/// Exhaustive equivalence check for small rows (debug builds).
fn same_solutions(a: &Constraint, b: &Constraint) -> bool {
    let mut vars: Vec<Var> = a.terms().iter().map(|t| t.lit.var()).collect();
    vars.extend(b.terms().iter().map(|t| t.lit.var()));
    vars.sort();
    vars.dedup();
    if vars.len() > 12 {
        return true;
    }
    let width = vars.iter().map(|v| v.index() + 1).max().unwrap_or(0);
    let mut point = vec![false; width];
    for mask in 0u32..(1 << vars.len()) {
        for (i, v) in vars.iter().enumerate() {
            point[v.index()] = mask >> i & 1 == 1;
        }
        if a.satisfied_by(&point) != b.satisfied_by(&point) {
            return false;
        }
    }
    true
}
