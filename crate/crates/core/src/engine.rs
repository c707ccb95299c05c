//! Cutting-planes rules, reverse-Polish derivations and slack-based unit
//! propagation.

use std::collections::VecDeque;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::model::{ceil_div, Assignment, Constraint, Lit, Term, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("multiplier must be positive, got {0}")]
    BadMultiplier(BigInt),
    #[error("divisor must be positive, got {0}")]
    BadDivisor(BigInt),
}

/// Sum of two constraints; opposite literals cancel into the degree.
pub fn add(c1: &Constraint, c2: &Constraint) -> Constraint {
    let mut e = c1.slack_form();
    e.add_scaled(&c2.slack_form(), &BigInt::one());
    e.geq(&BigInt::zero())
}

pub fn multiply(c: &Constraint, k: &BigInt) -> Result<Constraint, RuleError> {
    if !k.is_positive() {
        return Err(RuleError::BadMultiplier(k.clone()));
    }
    let terms = c
        .terms()
        .iter()
        .map(|t| Term::new(&t.coef * k, t.lit))
        .collect();
    Ok(Constraint::from_sorted_parts(terms, c.degree() * k))
}

/// Division by `d` with every coefficient and the degree rounded up.
pub fn divide(c: &Constraint, d: &BigInt) -> Result<Constraint, RuleError> {
    if !d.is_positive() {
        return Err(RuleError::BadDivisor(d.clone()));
    }
    let terms = c
        .terms()
        .iter()
        .map(|t| Term::new(ceil_div(&t.coef, d), t.lit))
        .collect();
    Ok(Constraint::from_sorted_parts(terms, ceil_div(c.degree(), d)))
}

/// Caps every coefficient at the degree.
pub fn saturate(c: &Constraint) -> Constraint {
    let b = c.degree();
    let terms = c
        .terms()
        .iter()
        .filter_map(|t| {
            let a = if &t.coef > b { b.clone() } else { t.coef.clone() };
            (!a.is_zero()).then(|| Term::new(a, t.lit))
        })
        .collect();
    Constraint::from_sorted_parts(terms, b.clone())
}

/// Drops the term on `var` and lowers the degree by its coefficient.
pub fn weaken(c: &Constraint, var: Var) -> Constraint {
    let Some(t) = c.term(var) else {
        return c.clone();
    };
    let degree = c.degree() - &t.coef;
    let terms = c
        .terms()
        .iter()
        .filter(|t| t.lit.var() != var)
        .cloned()
        .collect();
    Constraint::from_sorted_parts(terms, degree)
}

/// Literal axiom `lit >= 0`.
pub fn literal_axiom(lit: Lit) -> Constraint {
    Constraint::from_sorted_parts(vec![Term::new(BigInt::one(), lit)], BigInt::zero())
}

/// One token of a reverse-Polish derivation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PolToken {
    /// A constraint ID (negative values are relative to the next free ID)
    /// or a scalar operand, depending on the consuming operator.
    Int(BigInt),
    Lit(Lit),
    Add,
    Mul,
    Div,
    Sat,
    Weaken,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolError {
    #[error("unknown constraint ID {0}")]
    UnknownId(BigInt),
    #[error("stack underflow at token {0}")]
    Underflow(usize),
    #[error("{0} items left on the stack")]
    Leftover(usize),
    #[error("integer where constraint expected at token {0}")]
    IntegerForConstraint(usize),
    #[error("constraint where integer expected at token {0}")]
    ConstraintForInteger(usize),
    #[error("weakening needs a literal operand at token {0}")]
    WeakenOperand(usize),
    #[error("empty derivation")]
    Empty,
    #[error(transparent)]
    Rule(#[from] RuleError),
}

/// Read access to the constraints a derivation may reference.
pub trait ConstraintLookup {
    fn lookup(&self, id: u64) -> Option<&Constraint>;
    /// The ID the next derived constraint would receive.
    fn next_id(&self) -> u64;

    fn resolve(&self, raw: &BigInt) -> Option<u64> {
        let next = BigInt::from(self.next_id());
        let id = if raw.is_negative() { next + raw } else { raw.clone() };
        let id: u64 = id.try_into().ok()?;
        (id >= 1).then_some(id)
    }
}

enum Item {
    Int(BigInt),
    Lit(Lit),
    Cons(Constraint),
}

fn as_constraint(
    item: Item,
    pos: usize,
    db: &dyn ConstraintLookup,
) -> Result<Constraint, PolError> {
    match item {
        Item::Cons(c) => Ok(c),
        Item::Lit(l) => Ok(literal_axiom(l)),
        Item::Int(n) => {
            if n.is_zero() {
                return Err(PolError::IntegerForConstraint(pos));
            }
            let id = db.resolve(&n).ok_or_else(|| PolError::UnknownId(n.clone()))?;
            db.lookup(id).cloned().ok_or(PolError::UnknownId(n))
        }
    }
}

/// Evaluates a reverse-Polish derivation to a single normalized constraint.
pub fn eval_polish(tokens: &[PolToken], db: &dyn ConstraintLookup) -> Result<Constraint, PolError> {
    let mut stack: Vec<Item> = Vec::new();
    for (pos, tok) in tokens.iter().enumerate() {
        match tok {
            PolToken::Int(n) => stack.push(Item::Int(n.clone())),
            PolToken::Lit(l) => stack.push(Item::Lit(*l)),
            PolToken::Add => {
                let b = stack.pop().ok_or(PolError::Underflow(pos))?;
                let a = stack.pop().ok_or(PolError::Underflow(pos))?;
                let a = as_constraint(a, pos, db)?;
                let b = as_constraint(b, pos, db)?;
                stack.push(Item::Cons(add(&a, &b)));
            }
            PolToken::Mul | PolToken::Div => {
                let k = match stack.pop().ok_or(PolError::Underflow(pos))? {
                    Item::Int(k) => k,
                    _ => return Err(PolError::ConstraintForInteger(pos)),
                };
                let c = stack.pop().ok_or(PolError::Underflow(pos))?;
                let c = as_constraint(c, pos, db)?;
                let r = if *tok == PolToken::Mul {
                    multiply(&c, &k)?
                } else {
                    divide(&c, &k)?
                };
                stack.push(Item::Cons(r));
            }
            PolToken::Sat => {
                let c = stack.pop().ok_or(PolError::Underflow(pos))?;
                let c = as_constraint(c, pos, db)?;
                stack.push(Item::Cons(saturate(&c)));
            }
            PolToken::Weaken => {
                let l = match stack.pop().ok_or(PolError::Underflow(pos))? {
                    Item::Lit(l) => l,
                    _ => return Err(PolError::WeakenOperand(pos)),
                };
                let c = stack.pop().ok_or(PolError::Underflow(pos))?;
                let c = as_constraint(c, pos, db)?;
                stack.push(Item::Cons(weaken(&c, l.var())));
            }
        }
    }
    match stack.len() {
        0 => Err(PolError::Empty),
        1 => as_constraint(stack.pop().unwrap(), tokens.len(), db),
        n => Err(PolError::Leftover(n)),
    }
}

/// Why a literal was set on the propagation trail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reason {
    Decision,
    Propagated(u64),
}

/// Result of unit propagation to fixpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fixpoint {
    pub assignment: Assignment,
    pub trail: Vec<(Lit, Reason)>,
    /// ID of the first constraint found with negative slack.
    pub conflict: Option<u64>,
}

impl Fixpoint {
    pub fn propagations(&self) -> usize {
        self.trail
            .iter()
            .filter(|(_, r)| matches!(r, Reason::Propagated(_)))
            .count()
    }
}

/// Slack-based unit propagation over `view`, starting from `rho0`.
///
/// Constraints are visited from a FIFO queue seeded in the order of `view`
/// (callers pass ascending IDs). A literal is propagated when it is
/// unassigned and its coefficient exceeds the slack; a constraint conflicts
/// when its slack drops below zero.
pub fn propagate(view: &[(u64, &Constraint)], rho0: &Assignment) -> Fixpoint {
    let mut nvars = 0usize;
    for (_, c) in view {
        if let Some(t) = c.terms().last() {
            nvars = nvars.max(t.lit.var().index() + 1);
        }
    }
    for (v, _) in rho0.iter() {
        nvars = nvars.max(v.index() + 1);
    }

    let mut values: Vec<Option<bool>> = vec![None; nvars];
    let mut trail = Vec::new();
    for (v, b) in rho0.iter() {
        values[v.index()] = Some(b);
        trail.push((Lit::new(v, !b), Reason::Decision));
    }

    let mut occurs: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nvars];
    let mut slack: Vec<BigInt> = Vec::with_capacity(view.len());
    for (i, (_, c)) in view.iter().enumerate() {
        let mut s = -c.degree();
        for (j, t) in c.terms().iter().enumerate() {
            occurs[t.lit.var().index()].push((i, j));
            let falsified = values[t.lit.var().index()].map(|b| !t.lit.eval(b)) == Some(true);
            if !falsified {
                s += &t.coef;
            }
        }
        slack.push(s);
    }

    let finish = |values: Vec<Option<bool>>, trail, conflict| Fixpoint {
        assignment: values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|b| (Var(i as u32), b)))
            .collect(),
        trail,
        conflict,
    };

    let mut queued = vec![true; view.len()];
    let mut queue: VecDeque<usize> = (0..view.len()).collect();
    while let Some(i) = queue.pop_front() {
        queued[i] = false;
        let (id, c) = view[i];
        if slack[i].is_negative() {
            return finish(values, trail, Some(id));
        }
        for t in c.terms() {
            let v = t.lit.var().index();
            if values[v].is_some() || t.coef <= slack[i] {
                continue;
            }
            values[v] = Some(t.lit.satisfying_value());
            trail.push((t.lit, Reason::Propagated(id)));
            for &(k, j) in &occurs[v] {
                let other = &view[k].1.terms()[j];
                if other.lit == t.lit {
                    continue;
                }
                slack[k] -= &other.coef;
                if slack[k].is_negative() {
                    return finish(values, trail, Some(view[k].0));
                }
                if !queued[k] {
                    queued[k] = true;
                    queue.push_back(k);
                }
            }
        }
    }
    finish(values, trail, None)
}

/// Reverse unit propagation: does assuming `negate(c)` propagate to a
/// conflict over `view`?
pub fn rup_check(view: &[(u64, &Constraint)], c: &Constraint) -> bool {
    let neg = c.negate();
    let mut all: Vec<(u64, &Constraint)> = Vec::with_capacity(view.len() + 1);
    all.extend_from_slice(view);
    all.push((0, &neg));
    propagate(&all, &Assignment::new()).conflict.is_some()
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;

    fn int(v: i64) -> BigInt {
        BigInt::from(v)
    }

    fn x(i: u32) -> Lit {
        Lit::pos(Var(i - 1))
    }

    fn nx(i: u32) -> Lit {
        Lit::neg(Var(i - 1))
    }

    fn c(terms: &[(i64, Lit)], d: i64) -> Constraint {
        Constraint::from_terms(terms.iter().map(|(a, l)| (int(*a), *l)), int(d))
    }

    struct Db(BTreeMap<u64, Constraint>, u64);

    impl ConstraintLookup for Db {
        fn lookup(&self, id: u64) -> Option<&Constraint> {
            self.0.get(&id)
        }
        fn next_id(&self) -> u64 {
            self.1
        }
    }

    fn fig1_db() -> Db {
        let mut m = BTreeMap::new();
        m.insert(1, c(&[(1, x(1)), (1, x(2)), (1, nx(3)), (1, nx(4))], 3));
        m.insert(2, c(&[(1, nx(1)), (1, nx(2)), (1, x(3)), (1, x(4))], 1));
        m.insert(3, c(&[(1, nx(1)), (1, x(5))], 1));
        Db(m, 4)
    }

    fn toks(s: &str) -> Vec<PolToken> {
        s.split_whitespace()
            .map(|t| match t {
                "+" => PolToken::Add,
                "*" => PolToken::Mul,
                "d" => PolToken::Div,
                "s" => PolToken::Sat,
                "w" => PolToken::Weaken,
                _ if t.starts_with("~x") => PolToken::Lit(nx(t[2..].parse().unwrap())),
                _ if t.starts_with('x') => PolToken::Lit(x(t[1..].parse().unwrap())),
                _ => PolToken::Int(t.parse().unwrap()),
            })
            .collect()
    }

    #[test]
    fn add_cancels_opposite_literals() {
        let r = add(&c(&[(1, x(1)), (1, x(2))], 1), &c(&[(1, nx(1)), (1, x(3))], 1));
        assert_eq!(r, c(&[(1, x(2)), (1, x(3))], 1));
        let base = c(&[(2, x(1)), (1, nx(4))], 2);
        assert_eq!(add(&base, &Constraint::tautology()), base);
    }

    #[test]
    fn multiply_divide_saturate_weaken_examples() {
        let base = c(&[(1, x(1)), (1, x(2))], 1);
        assert_eq!(multiply(&base, &int(2)).unwrap(), c(&[(2, x(1)), (2, x(2))], 2));
        assert_eq!(multiply(&base, &int(1)).unwrap(), base);
        assert!(multiply(&base, &int(0)).is_err());
        let d = c(&[(3, x(1)), (5, x(2))], 4);
        assert_eq!(divide(&d, &int(2)).unwrap(), c(&[(2, x(1)), (3, x(2))], 2));
        assert_eq!(divide(&d, &int(1)).unwrap(), d);
        assert!(divide(&d, &int(-1)).is_err());
        assert_eq!(saturate(&c(&[(3, x(1)), (5, x(2))], 3)), c(&[(3, x(1)), (3, x(2))], 3));
        assert_eq!(saturate(&c(&[(7, x(1)), (2, x(2))], 4)), c(&[(4, x(1)), (2, x(2))], 4));
        let w = c(&[(4, x(1)), (3, x(2))], 4);
        assert_eq!(weaken(&w, Var(1)), c(&[(4, x(1))], 1));
        assert_eq!(weaken(&w, Var(7)), w);
    }

    #[test]
    fn polish_on_fig1_database() {
        let db = fig1_db();
        let aux = eval_polish(&toks("1 ~x1 +"), &db).unwrap();
        assert_eq!(aux, c(&[(1, x(2)), (1, nx(3)), (1, nx(4))], 2));
        let agg = eval_polish(&toks("3 1 +"), &db).unwrap();
        assert_eq!(agg, c(&[(1, x(2)), (1, nx(3)), (1, nx(4)), (1, x(5))], 3));
        assert_eq!(eval_polish(&toks("1 +"), &db), Err(PolError::Underflow(1)));
        assert_eq!(eval_polish(&toks("2"), &db).unwrap(), db.0[&2]);
        assert_eq!(eval_polish(&toks("-1"), &db).unwrap(), db.0[&3]);
        assert!(matches!(eval_polish(&toks("9"), &db), Err(PolError::UnknownId(_))));
        assert!(matches!(eval_polish(&toks("1 2"), &db), Err(PolError::Leftover(2))));
        assert!(matches!(
            eval_polish(&toks("1 x1 *"), &db),
            Err(PolError::ConstraintForInteger(2))
        ));
        let table = eval_polish(&toks("1 2 * ~x1 +"), &db).unwrap();
        assert_eq!(table, c(&[(1, x(1)), (2, x(2)), (2, nx(3)), (2, nx(4))], 5));
        let w = eval_polish(&toks("1 x2 w"), &db).unwrap();
        assert_eq!(w, c(&[(1, x(1)), (1, nx(3)), (1, nx(4))], 2));
    }

    #[test]
    fn propagation_examples() {
        let a = c(&[(1, x(1)), (1, x(2))], 1);
        let b = c(&[(1, nx(2))], 1);
        let fp = propagate(&[(1, &a), (2, &b)], &Assignment::new());
        assert_eq!(fp.conflict, None);
        assert_eq!(fp.assignment.get(Var(1)), Some(false));
        assert_eq!(fp.assignment.get(Var(0)), Some(true));
        assert_eq!(fp.trail[0], (nx(2), Reason::Propagated(2)));

        let p = c(&[(1, x(1))], 1);
        let n = c(&[(1, nx(1))], 1);
        assert!(propagate(&[(1, &p), (2, &n)], &Assignment::new()).conflict.is_some());

        let k = c(&[(2, x(1)), (3, x(2)), (1, nx(3))], 4);
        let fp = propagate(&[(1, &k)], &Assignment::new());
        assert_eq!(fp.assignment.get(Var(1)), Some(true));
        assert_eq!(fp.assignment.get(Var(0)), None);
    }

    #[test]
    fn rup_examples() {
        let a = c(&[(1, x(1)), (1, x(2))], 1);
        let b = c(&[(1, nx(2))], 1);
        assert!(rup_check(&[(1, &a), (2, &b)], &c(&[(1, x(1))], 1)));
        assert!(!rup_check(&[], &c(&[(1, x(1))], 1)));
        assert!(rup_check(&[], &Constraint::tautology()));
        // both probes of x1 force x3
        let p1 = c(&[(1, x(1)), (1, x(3))], 1);
        let p2 = c(&[(1, nx(1)), (1, x(3))], 1);
        let view = [(1, &p1), (2, &p2)];
        assert!(rup_check(&view, &c(&[(1, x(3)), (1, x(1))], 1)));
        assert!(rup_check(&view, &c(&[(1, x(3)), (1, nx(1))], 1)));
    }

    #[test]
    fn literal_axiom_is_tautological() {
        let a = literal_axiom(nx(1));
        assert!(a.is_tautology());
        assert_eq!(a.len(), 1);
    }
}
