//! Dual reductions: duality-based fixing and dominated variables.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use super::{id_tok, signed_coef, Result, State, Technique};
use crate::engine::PolToken;
use crate::model::{Constraint, Lit, SubstTarget, Substitution, Var};
use crate::proof::{GoalLabel, SubStep, Subproof};

/// Signed coefficients of a literal per row (`~x` carries `-a`).
type Column = BTreeMap<u64, BigInt>;

/// `z` dominates `w` when it is no more expensive and contributes at least
/// as much to every row.
fn dominates(cz: &BigInt, col_z: &Column, cw: &BigInt, col_w: &Column) -> bool {
    if cz > cw {
        return false;
    }
    let zero = BigInt::zero();
    col_z
        .keys()
        .chain(col_w.keys())
        .all(|r| col_z.get(r).unwrap_or(&zero) >= col_w.get(r).unwrap_or(&zero))
}

fn swap_witness(a: Var, b: Var) -> Substitution {
    Substitution::new()
        .with(a, SubstTarget::Lit(Lit::pos(b)))
        .with(b, SubstTarget::Lit(Lit::pos(a)))
}

impl<W: Write> State<W> {
    fn column(&self, lit: Lit) -> Column {
        let mut col = Column::new();
        for (id, r) in &self.rows {
            let a = signed_coef(&r.c, lit.var());
            if !a.is_zero() {
                col.insert(*id, if lit.is_negated() { -a } else { a });
            }
        }
        col
    }

    fn lit_cost(&self, lit: Lit) -> BigInt {
        let c = self.obj_coef(lit.var());
        if lit.is_negated() {
            -c
        } else {
            c
        }
    }

    /// Fixes `var` when no row blocks moving it in the direction its
    /// objective coefficient prefers. Must run inside a transaction.
    pub(super) fn try_dual_fix(&mut self, var: Var) -> Result<bool> {
        let col = self.column(Lit::pos(var));
        let c = self.obj_coef(var);
        if col.is_empty() && c.is_zero() {
            return Ok(false);
        }
        let value = if !c.is_positive() && col.values().all(|a| !a.is_negative()) {
            true
        } else if !c.is_negative() && col.values().all(|a| !a.is_positive()) {
            false
        } else {
            return Ok(false);
        };
        let m = Lit::new(var, !value);
        let w = Substitution::new().with(var, SubstTarget::Const(value));
        let id = self.red(Constraint::unit(m), w, None)?;
        self.fix_derived(id, m)?;
        Ok(true)
    }

    pub(super) fn dual_fixing(&mut self) -> Result<usize> {
        let mut n = 0;
        let vars: Vec<Var> = self.vars.vars().collect();
        for var in vars {
            if self.out_of_time() || self.infeasible || !self.is_active(var) {
                continue;
            }
            self.begin(Technique::DualFixing);
            if self.try_dual_fix(var)? {
                self.commit(Technique::DualFixing);
                n += 1;
            } else {
                self.pending = None;
            }
        }
        Ok(n)
    }

    /// Variable pairs sharing a row, in a deterministic order, capped by
    /// the dominance budget.
    fn candidate_pairs(&self) -> Vec<(Var, Var)> {
        let mut pairs = BTreeSet::new();
        let budget = self.cfg.dominance_budget;
        'rows: for r in self.rows.values() {
            let vars: Vec<Var> = r.c.terms().iter().map(|t| t.lit.var()).collect();
            for (i, a) in vars.iter().enumerate() {
                for b in &vars[i + 1..] {
                    pairs.insert((*a, *b));
                    if pairs.len() >= budget {
                        break 'rows;
                    }
                }
            }
        }
        pairs.into_iter().collect()
    }

    /// Labeled subproof blocks for the rows the swap `j <-> k` changes. With
    /// signed coefficients `s`, `D|w - D = (s_j - s_k)(x_k - x_j)`, and the
    /// negated new constraint reads `x_k - x_j >= 1`, so `D + (s_j - s_k) * notC`
    /// implies `D|w`.
    fn dominance_blocks(&self, j: Var, k: Var, w: &Substitution) -> Subproof {
        let not_c = self.w.next_id();
        let mut blocks = Vec::new();
        for (id, r) in &self.rows {
            if !(r.c.contains(j) || r.c.contains(k)) || r.c.substitute(w) == r.c {
                continue;
            }
            let diff = signed_coef(&r.c, j) - signed_coef(&r.c, k);
            let steps = vec![
                id_tok(*id),
                id_tok(not_c),
                PolToken::Int(diff),
                PolToken::Mul,
                PolToken::Add,
            ];
            blocks.push((GoalLabel::Id(*id), vec![SubStep::Pol(steps)]));
        }
        Subproof::labeled(blocks)
    }

    /// Adds `x_j >= x_k` for dominated pairs.
    pub(super) fn dominance(&mut self) -> Result<usize> {
        let mut n = 0;
        for (a, b) in self.candidate_pairs() {
            if self.out_of_time() || self.infeasible {
                break;
            }
            if !self.is_active(a) || !self.is_active(b) {
                continue;
            }
            let (ca, cb) = (self.obj_coef(a), self.obj_coef(b));
            let (cola, colb) = (self.column(Lit::pos(a)), self.column(Lit::pos(b)));
            let (j, k) = if dominates(&ca, &cola, &cb, &colb) {
                (a, b)
            } else if dominates(&cb, &colb, &ca, &cola) {
                (b, a)
            } else {
                continue;
            };
            let c = Constraint::from_terms(
                [(BigInt::one(), Lit::pos(j)), (BigInt::one(), Lit::neg(k))],
                BigInt::one(),
            );
            if self.rows.values().any(|r| r.c == c) {
                continue;
            }
            let w = swap_witness(j, k);
            let sub = self.dominance_blocks(j, k, &w);
            self.begin(Technique::Dominance);
            let id = self.red(c, w, Some(sub))?;
            self.to_core(id)?;
            self.commit(Technique::Dominance);
            n += 1;
        }
        Ok(n)
    }

    /// A row keeping literal `lit` within its 0-1 range if the variable
    /// were unbounded on the side `lit` pushes against.
    fn bound_row(&self, lit: Lit) -> bool {
        self.rows.values().any(|r| match r.c.term(lit.var()) {
            Some(t) if t.lit == lit => {
                let two_c: BigInt = &t.coef * 2;
                r.c.degree() > &(r.c.coef_sum() - two_c)
            }
            _ => false,
        })
    }

    /// Literal-level dominance `z > w` with an implied bound: if `z` has an
    /// implied upper bound then `w = 0`; if `w` has an implied lower bound
    /// then `z = 1`. Both use the witness `{z -> 1, w -> 0}`.
    pub(super) fn advanced_dominance(&mut self) -> Result<usize> {
        let mut n = 0;
        for (a, b) in self.candidate_pairs() {
            if self.out_of_time() || self.infeasible {
                break;
            }
            for (z, w) in [
                (Lit::pos(a), Lit::pos(b)),
                (Lit::pos(b), Lit::pos(a)),
                (Lit::pos(a), Lit::neg(b)),
                (Lit::neg(b), Lit::pos(a)),
                (Lit::neg(a), Lit::pos(b)),
                (Lit::pos(b), Lit::neg(a)),
                (Lit::neg(a), Lit::neg(b)),
                (Lit::neg(b), Lit::neg(a)),
            ] {
                if !self.is_active(a) || !self.is_active(b) {
                    break;
                }
                let (cz, cw) = (self.lit_cost(z), self.lit_cost(w));
                if !dominates(&cz, &self.column(z), &cw, &self.column(w)) {
                    continue;
                }
                let fixed = if self.bound_row(!z) {
                    !w
                } else if self.bound_row(w) {
                    z
                } else {
                    continue;
                };
                let witness = Substitution::new()
                    .with(z.var(), SubstTarget::Const(z.satisfying_value()))
                    .with(w.var(), SubstTarget::Const(!w.satisfying_value()));
                self.begin(Technique::AdvancedDominance);
                let id = self.red(Constraint::unit(fixed), witness, None)?;
                self.fix_derived(id, fixed)?;
                self.commit(Technique::AdvancedDominance);
                n += 1;
                break;
            }
        }
        Ok(n)
    }
}
