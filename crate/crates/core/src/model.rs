//! Exact data model for 0-1 integer linear programs.
//!
//! Every constraint is kept in normalized form: a sum of positive integer
//! coefficients over literals of distinct variables, compared with `>=`
//! against a non-negative degree. Coefficients are arbitrary precision.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::Not;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Dense variable index. Display names live in a [`VarTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A positive or negative occurrence of a variable. `~x` stands for `1 - x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit {
    var: Var,
    negated: bool,
}

impl Lit {
    pub fn new(var: Var, negated: bool) -> Self {
        Lit { var, negated }
    }

    pub fn pos(var: Var) -> Self {
        Lit::new(var, false)
    }

    pub fn neg(var: Var) -> Self {
        Lit::new(var, true)
    }

    pub fn var(self) -> Var {
        self.var
    }

    pub fn is_negated(self) -> bool {
        self.negated
    }

    /// Truth value of the literal when its variable takes `value`.
    pub fn eval(self, value: bool) -> bool {
        value != self.negated
    }

    /// Variable value that makes this literal true.
    pub fn satisfying_value(self) -> bool {
        !self.negated
    }
}

impl Not for Lit {
    type Output = Lit;

    fn not(self) -> Lit {
        Lit::new(self.var, !self.negated)
    }
}

/// Name table mapping dense indices to `x<digits>` names and back.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VarTable {
    names: Vec<String>,
    lookup: HashMap<String, Var>,
}

impl VarTable {
    pub fn new() -> Self {
        VarTable::default()
    }

    /// Table `x1..xn` with `x1` at index 0.
    pub fn numbered(n: usize) -> Self {
        let mut table = VarTable::new();
        for i in 1..=n {
            table.intern(&format!("x{i}"));
        }
        table
    }

    pub fn intern(&mut self, name: &str) -> Var {
        if let Some(&v) = self.lookup.get(name) {
            return v;
        }
        let v = Var(self.names.len() as u32);
        self.names.push(name.to_string());
        self.lookup.insert(name.to_string(), v);
        v
    }

    pub fn get(&self, name: &str) -> Option<Var> {
        self.lookup.get(name).copied()
    }

    pub fn name(&self, var: Var) -> &str {
        &self.names[var.index()]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> {
        (0..self.names.len() as u32).map(Var)
    }

    pub fn lit_name(&self, lit: Lit) -> String {
        if lit.is_negated() {
            format!("~{}", self.name(lit.var()))
        } else {
            self.name(lit.var()).to_string()
        }
    }
}

/// Signed linear form `sum c_v * x_v + constant` over variables.
///
/// Used for objectives (the constant is the offset) and as the exact
/// intermediate representation for constraint arithmetic.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct LinExpr {
    coefs: BTreeMap<Var, BigInt>,
    constant: BigInt,
}

/// Objectives are minimized linear forms; the constant is the offset.
pub type Objective = LinExpr;

impl LinExpr {
    pub fn new() -> Self {
        LinExpr::default()
    }

    pub fn constant(&self) -> &BigInt {
        &self.constant
    }

    pub fn coef(&self, var: Var) -> BigInt {
        self.coefs.get(&var).cloned().unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = (Var, &BigInt)> {
        self.coefs.iter().map(|(v, c)| (*v, c))
    }

    pub fn len(&self) -> usize {
        self.coefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefs.is_empty()
    }

    pub fn contains(&self, var: Var) -> bool {
        self.coefs.contains_key(&var)
    }

    pub fn add_constant(&mut self, c: &BigInt) {
        self.constant += c;
    }

    pub fn add_var(&mut self, coef: &BigInt, var: Var) {
        if coef.is_zero() {
            return;
        }
        let entry = self.coefs.entry(var).or_default();
        *entry += coef;
        if entry.is_zero() {
            self.coefs.remove(&var);
        }
    }

    /// Adds `coef * lit`, expanding `~x` into `1 - x`.
    pub fn add_lit(&mut self, coef: &BigInt, lit: Lit) {
        if lit.is_negated() {
            self.constant += coef;
            self.add_var(&-coef, lit.var());
        } else {
            self.add_var(coef, lit.var());
        }
    }

    pub fn add_scaled(&mut self, other: &LinExpr, scale: &BigInt) {
        for (v, c) in &other.coefs {
            self.add_var(&(c * scale), *v);
        }
        self.constant += &other.constant * scale;
    }

    pub fn scaled(&self, scale: &BigInt) -> LinExpr {
        let mut out = LinExpr::new();
        out.add_scaled(self, scale);
        out
    }

    pub fn remove(&mut self, var: Var) -> BigInt {
        self.coefs.remove(&var).unwrap_or_default()
    }

    pub fn from_lits<'a>(terms: impl IntoIterator<Item = (&'a BigInt, Lit)>) -> LinExpr {
        let mut e = LinExpr::new();
        for (c, l) in terms {
            e.add_lit(c, l);
        }
        e
    }

    pub fn eval(&self, point: &[bool]) -> BigInt {
        let mut total = self.constant.clone();
        for (v, c) in &self.coefs {
            if point[v.index()] {
                total += c;
            }
        }
        total
    }

    /// Simultaneous substitution; constants fold into the offset.
    pub fn substitute(&self, omega: &Substitution) -> LinExpr {
        let mut out = LinExpr::new();
        out.constant = self.constant.clone();
        for (v, c) in &self.coefs {
            match omega.get(*v) {
                None => out.add_var(c, *v),
                Some(SubstTarget::Const(b)) => {
                    if b {
                        out.constant += c;
                    }
                }
                Some(SubstTarget::Lit(l)) => out.add_lit(c, l),
            }
        }
        out
    }

    /// Normalized constraint for `self >= rhs`, plus the unclamped degree.
    pub fn geq_raw(&self, rhs: &BigInt) -> (Constraint, BigInt) {
        let mut degree = rhs - &self.constant;
        let mut terms = Vec::with_capacity(self.coefs.len());
        for (v, c) in &self.coefs {
            if c.is_positive() {
                terms.push(Term::new(c.clone(), Lit::pos(*v)));
            } else {
                let a = -c;
                degree += &a;
                terms.push(Term::new(a, Lit::neg(*v)));
            }
        }
        let raw = degree.clone();
        if degree.is_negative() {
            degree = BigInt::zero();
        }
        (Constraint { terms, degree }, raw)
    }

    /// Normalized constraint for `self >= rhs`.
    pub fn geq(&self, rhs: &BigInt) -> Constraint {
        self.geq_raw(rhs).0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Term {
    pub coef: BigInt,
    pub lit: Lit,
}

impl Term {
    pub fn new(coef: BigInt, lit: Lit) -> Self {
        Term { coef, lit }
    }
}

/// Normalized pseudo-Boolean constraint `sum a_j l_j >= degree`.
///
/// Invariants: coefficients strictly positive, at most one term per variable,
/// terms sorted by variable index, degree non-negative.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Constraint {
    terms: Vec<Term>,
    degree: BigInt,
}

impl Constraint {
    /// Builds and normalizes `sum coef * lit >= degree` from signed input.
    pub fn from_terms<I>(terms: I, degree: BigInt) -> Constraint
    where
        I: IntoIterator<Item = (BigInt, Lit)>,
    {
        let mut e = LinExpr::new();
        for (c, l) in terms {
            e.add_lit(&c, l);
        }
        e.geq(&degree)
    }

    /// `0 >= 1`.
    pub fn contradiction() -> Constraint {
        Constraint {
            terms: Vec::new(),
            degree: BigInt::one(),
        }
    }

    /// `0 >= 0`.
    pub fn tautology() -> Constraint {
        Constraint {
            terms: Vec::new(),
            degree: BigInt::zero(),
        }
    }

    /// `lit >= 1`.
    pub fn unit(lit: Lit) -> Constraint {
        Constraint {
            terms: vec![Term::new(BigInt::one(), lit)],
            degree: BigInt::one(),
        }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn degree(&self) -> &BigInt {
        &self.degree
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coef_sum(&self) -> BigInt {
        self.terms.iter().map(|t| &t.coef).sum()
    }

    pub fn is_tautology(&self) -> bool {
        self.degree.is_zero()
    }

    /// True when no 0-1 assignment can satisfy the constraint.
    pub fn is_contradiction(&self) -> bool {
        self.degree > self.coef_sum()
    }

    pub fn term(&self, var: Var) -> Option<&Term> {
        self.terms
            .binary_search_by_key(&var, |t| t.lit.var())
            .ok()
            .map(|i| &self.terms[i])
    }

    pub fn contains(&self, var: Var) -> bool {
        self.term(var).is_some()
    }

    /// Left-hand side as a signed linear form.
    pub fn lhs(&self) -> LinExpr {
        LinExpr::from_lits(self.terms.iter().map(|t| (&t.coef, t.lit)))
    }

    /// `lhs - degree`, so the constraint reads `self.slack_form() >= 0`.
    pub fn slack_form(&self) -> LinExpr {
        let mut e = self.lhs();
        e.add_constant(&-&self.degree);
        e
    }

    /// Re-normalizes the term list; used by parsers and arithmetic that
    /// produce terms directly.
    pub fn renormalize(&self) -> Constraint {
        self.slack_form().geq(&BigInt::zero())
    }

    /// Normalization of `sum a_j l_j <= degree - 1`.
    pub fn negate(&self) -> Constraint {
        let terms: Vec<Term> = self
            .terms
            .iter()
            .map(|t| Term::new(t.coef.clone(), !t.lit))
            .collect();
        let mut degree: BigInt = self.coef_sum() - &self.degree + 1;
        if degree.is_negative() {
            degree = BigInt::zero();
        }
        Constraint { terms, degree }
    }

    pub fn restrict(&self, rho: &Assignment) -> Constraint {
        let mut degree = self.degree.clone();
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            match rho.lit_value(t.lit) {
                Some(true) => degree -= &t.coef,
                Some(false) => {}
                None => terms.push(t.clone()),
            }
        }
        if degree.is_negative() {
            degree = BigInt::zero();
        }
        Constraint { terms, degree }
    }

    pub fn substitute(&self, omega: &Substitution) -> Constraint {
        self.slack_form().substitute(omega).geq(&BigInt::zero())
    }

    pub fn satisfied_by(&self, point: &[bool]) -> bool {
        let mut lhs = BigInt::zero();
        for t in &self.terms {
            if t.lit.eval(point[t.lit.var().index()]) {
                lhs += &t.coef;
            }
        }
        lhs >= self.degree
    }

    /// Syntactic implication: `self` implies `other` if `other` follows from
    /// `self` by weakening away the coefficient excess over `other`.
    pub fn implies(&self, other: &Constraint) -> bool {
        if other.degree.is_zero() {
            return true;
        }
        let mut loss = BigInt::zero();
        for t in &self.terms {
            let g = match other.term(t.lit.var()) {
                Some(o) if o.lit == t.lit => o.coef.clone(),
                _ => BigInt::zero(),
            };
            if t.coef > g {
                loss += &t.coef - g;
            }
        }
        &self.degree - loss >= other.degree
    }

    /// Divides all coefficients and the degree by the coefficient gcd,
    /// rounding the degree up. Preserves the 0-1 solution set.
    pub fn gcd_reduced(&self) -> Constraint {
        let g = self
            .terms
            .iter()
            .fold(BigInt::zero(), |acc, t| acc.gcd(&t.coef));
        if g.is_zero() || g.is_one() {
            return self.clone();
        }
        Constraint {
            terms: self
                .terms
                .iter()
                .map(|t| Term::new(&t.coef / &g, t.lit))
                .collect(),
            degree: ceil_div(&self.degree, &g),
        }
    }

    pub(crate) fn from_sorted_parts(terms: Vec<Term>, degree: BigInt) -> Constraint {
        debug_assert!(terms.windows(2).all(|w| w[0].lit.var() < w[1].lit.var()));
        debug_assert!(terms.iter().all(|t| t.coef.is_positive()));
        Constraint {
            terms,
            degree: if degree.is_negative() {
                BigInt::zero()
            } else {
                degree
            },
        }
    }

    pub fn display<'a>(&'a self, vars: &'a VarTable) -> DisplayConstraint<'a> {
        DisplayConstraint { c: self, vars }
    }
}

/// Renders `+a lit ... >= d` with the given names.
pub struct DisplayConstraint<'a> {
    c: &'a Constraint,
    vars: &'a VarTable,
}

impl fmt::Display for DisplayConstraint<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.c.terms {
            write!(f, "+{} {} ", t.coef, self.vars.lit_name(t.lit))?;
        }
        write!(f, ">= {}", self.c.degree)
    }
}

pub fn ceil_div(a: &BigInt, d: &BigInt) -> BigInt {
    a.div_ceil(d)
}

/// An equality held as two normalized halves: `E >= b` and `E <= b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Equality {
    pub geq: Constraint,
    pub leq: Constraint,
}

impl Equality {
    /// Equality `expr = rhs`.
    pub fn from_lin(expr: &LinExpr, rhs: &BigInt) -> Equality {
        Equality {
            geq: expr.geq(rhs),
            leq: expr.scaled(&BigInt::from(-1)).geq(&-rhs),
        }
    }

    /// The halves describe the same hyperplane when their slack forms cancel.
    pub fn is_consistent(&self) -> bool {
        let mut sum = self.geq.slack_form();
        sum.add_scaled(&self.leq.slack_form(), &BigInt::one());
        sum.is_empty() && sum.constant().is_zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Geq,
    Leq,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Normalized {
    Single(Constraint),
    Pair(Equality),
}

/// Normalizes `sum coef * lit  rel  rhs` with signed coefficients.
pub fn normalize(terms: &[(BigInt, Lit)], rel: Relation, rhs: &BigInt) -> Normalized {
    let expr = LinExpr::from_lits(terms.iter().map(|(c, l)| (c, *l)));
    match rel {
        Relation::Geq => Normalized::Single(expr.geq(rhs)),
        Relation::Leq => Normalized::Single(expr.scaled(&BigInt::from(-1)).geq(&-rhs)),
        Relation::Eq => Normalized::Pair(Equality::from_lin(&expr, rhs)),
    }
}

/// Partial assignment of variables to 0/1.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    values: Vec<Option<bool>>,
}

impl Assignment {
    pub fn new() -> Self {
        Assignment::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Assignment {
            values: vec![None; n],
        }
    }

    pub fn get(&self, var: Var) -> Option<bool> {
        self.values.get(var.index()).copied().flatten()
    }

    pub fn set(&mut self, var: Var, value: bool) {
        if self.values.len() <= var.index() {
            self.values.resize(var.index() + 1, None);
        }
        self.values[var.index()] = Some(value);
    }

    /// Makes `lit` true.
    pub fn assign(&mut self, lit: Lit) {
        self.set(lit.var(), lit.satisfying_value());
    }

    pub fn lit_value(&self, lit: Lit) -> Option<bool> {
        self.get(lit.var()).map(|v| lit.eval(v))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, bool)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|b| (Var(i as u32), b)))
    }

    pub fn len(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl FromIterator<(Var, bool)> for Assignment {
    fn from_iter<T: IntoIterator<Item = (Var, bool)>>(iter: T) -> Self {
        let mut a = Assignment::new();
        for (v, b) in iter {
            a.set(v, b);
        }
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubstTarget {
    Const(bool),
    Lit(Lit),
}

/// Partial substitution of variables by constants or literals, applied once
/// and simultaneously.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Substitution {
    map: BTreeMap<Var, SubstTarget>,
}

impl Substitution {
    pub fn new() -> Self {
        Substitution::default()
    }

    pub fn insert(&mut self, var: Var, target: SubstTarget) {
        self.map.insert(var, target);
    }

    pub fn with(mut self, var: Var, target: SubstTarget) -> Self {
        self.insert(var, target);
        self
    }

    pub fn get(&self, var: Var) -> Option<SubstTarget> {
        self.map.get(&var).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, SubstTarget)> + '_ {
        self.map.iter().map(|(v, t)| (*v, *t))
    }

    pub fn touches(&self, var: Var) -> bool {
        self.map.contains_key(&var)
    }

    /// Image of a literal under the substitution.
    pub fn apply_lit(&self, lit: Lit) -> SubstTarget {
        match self.get(lit.var()) {
            None => SubstTarget::Lit(lit),
            Some(SubstTarget::Const(b)) => SubstTarget::Const(lit.eval(b)),
            Some(SubstTarget::Lit(l)) => SubstTarget::Lit(if lit.is_negated() { !l } else { l }),
        }
    }
}

/// A 0-1 ILP: optional objective (decision instances have none) plus
/// normalized constraints whose 1-based position is their constraint ID.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Problem {
    pub vars: VarTable,
    pub objective: Option<Objective>,
    pub constraints: Vec<Constraint>,
    /// 0-based positions `(geq, leq)` of constraints that form an equality.
    pub equalities: Vec<(usize, usize)>,
}

impl Problem {
    pub fn new(vars: VarTable) -> Self {
        Problem {
            vars,
            ..Problem::default()
        }
    }

    pub fn push(&mut self, n: Normalized) {
        match n {
            Normalized::Single(c) => self.constraints.push(c),
            Normalized::Pair(e) => {
                let i = self.constraints.len();
                self.constraints.push(e.geq);
                self.constraints.push(e.leq);
                self.equalities.push((i, i + 1));
            }
        }
    }

    pub fn is_feasible_point(&self, point: &[bool]) -> bool {
        self.constraints.iter().all(|c| c.satisfied_by(point))
    }

    pub fn objective_value(&self, point: &[bool]) -> BigInt {
        self.objective
            .as_ref()
            .map(|f| f.eval(point))
            .unwrap_or_default()
    }

    /// Variables occurring in a constraint or the objective.
    pub fn used_vars(&self) -> Vec<Var> {
        let mut used = vec![false; self.vars.len()];
        for c in &self.constraints {
            for t in c.terms() {
                used[t.lit.var().index()] = true;
            }
        }
        if let Some(f) = &self.objective {
            for (v, _) in f.terms() {
                used[v.index()] = true;
            }
        }
        self.vars.vars().filter(|v| used[v.index()]).collect()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("{vars} variables exceed the enumeration limit of {limit}")]
    TooManyVariables { vars: usize, limit: usize },
}

/// One feasible total assignment with its exact objective value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub point: Vec<bool>,
    pub value: BigInt,
}

pub const DEFAULT_ENUMERATION_LIMIT: usize = 20;

/// Exhaustive list of feasible points in lexicographic order (`x` at index 0
/// is the most significant position, `false < true`).
pub fn enumerate_solutions(p: &Problem, limit: usize) -> Result<Vec<Solution>, OracleError> {
    let n = p.vars.len();
    if n > limit {
        return Err(OracleError::TooManyVariables { vars: n, limit });
    }
    let fast = FastRows::compile(p);
    let mut out = Vec::new();
    let mut point = vec![false; n];
    for mask in 0u64..(1u64 << n) {
        for (i, slot) in point.iter_mut().enumerate() {
            *slot = (mask >> (n - 1 - i)) & 1 == 1;
        }
        let feasible = match &fast {
            Some(rows) => rows.feasible(&point),
            None => p.is_feasible_point(&point),
        };
        if feasible {
            out.push(Solution {
                value: p.objective_value(&point),
                point: point.clone(),
            });
        }
    }
    Ok(out)
}

/// Minimum objective value over feasible points, `None` when infeasible.
pub fn optimal_value(p: &Problem, limit: usize) -> Result<Option<BigInt>, OracleError> {
    Ok(enumerate_solutions(p, limit)?
        .into_iter()
        .map(|s| s.value)
        .min())
}

/// Word-sized evaluation of rows when every coefficient sum fits in `i64`.
struct FastRows {
    rows: Vec<(Vec<(usize, bool, i64)>, i64)>,
}

impl FastRows {
    fn compile(p: &Problem) -> Option<FastRows> {
        let limit = BigInt::from(1i64 << 60);
        let mut rows = Vec::with_capacity(p.constraints.len());
        for c in &p.constraints {
            if c.coef_sum() >= limit || c.degree() >= &limit {
                return None;
            }
            let terms = c
                .terms()
                .iter()
                .map(|t| (t.lit.var().index(), t.lit.is_negated(), t.coef.to_i64().unwrap()))
                .collect();
            rows.push((terms, c.degree().to_i64().unwrap()));
        }
        Some(FastRows { rows })
    }

    fn feasible(&self, point: &[bool]) -> bool {
        self.rows.iter().all(|(terms, degree)| {
            let lhs: i64 = terms
                .iter()
                .filter(|(v, neg, _)| point[*v] != *neg)
                .map(|(_, _, c)| *c)
                .sum();
            lhs >= *degree
        })
    }
}

#[cfg(test)]
mod tests {
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

    #[test]
    fn normalize_flips_negative_coefficients() {
        let n = normalize(&[(int(2), x(1)), (int(-3), x(2))], Relation::Geq, &int(-1));
        assert_eq!(n, Normalized::Single(c(&[(2, x(1)), (3, nx(2))], 2)));
    }

    #[test]
    fn normalize_splits_equalities() {
        let n = normalize(
            &[(int(1), x(1)), (int(1), x(2)), (int(-1), x(3)), (int(-1), x(4))],
            Relation::Eq,
            &int(1),
        );
        let Normalized::Pair(e) = n else { panic!() };
        assert_eq!(e.geq, c(&[(1, x(1)), (1, x(2)), (1, nx(3)), (1, nx(4))], 3));
        assert_eq!(e.leq, c(&[(1, nx(1)), (1, nx(2)), (1, x(3)), (1, x(4))], 1));
        assert!(e.is_consistent());
    }

    #[test]
    fn normalize_clamps_tautologies() {
        let n = normalize(&[], Relation::Geq, &int(-5));
        assert_eq!(n, Normalized::Single(Constraint::tautology()));
    }

    #[test]
    fn normalize_merges_duplicates() {
        let n = normalize(&[(int(2), x(1)), (int(1), nx(1)), (int(1), x(2))], Relation::Geq, &int(2));
        // 2x1 + 1 - x1 + x2 >= 2  ->  x1 + x2 >= 1
        assert_eq!(n, Normalized::Single(c(&[(1, x(1)), (1, x(2))], 1)));
    }

    #[test]
    fn negate_examples() {
        assert_eq!(c(&[(1, x(1)), (1, x(2))], 1).negate(), c(&[(1, nx(1)), (1, nx(2))], 2));
        assert_eq!(c(&[(2, x(1)), (3, x(2))], 4).negate(), c(&[(2, nx(1)), (3, nx(2))], 2));
        assert_eq!(Constraint::tautology().negate(), Constraint::contradiction());
    }

    #[test]
    fn restrict_examples() {
        let base = c(&[(2, x(1)), (3, x(2))], 4);
        let rho: Assignment = [(Var(0), true)].into_iter().collect();
        assert_eq!(base.restrict(&rho), c(&[(3, x(2))], 2));
        let rho: Assignment = [(Var(0), false), (Var(1), false)].into_iter().collect();
        let r = base.restrict(&rho);
        assert!(r.is_empty() && r.degree() == &int(4) && r.is_contradiction());
        let rho: Assignment = [(Var(1), true)].into_iter().collect();
        assert_eq!(c(&[(1, x(1)), (1, nx(2))], 1).restrict(&rho), c(&[(1, x(1))], 1));
    }

    #[test]
    fn substitution_examples() {
        let omega = Substitution::new().with(Var(0), SubstTarget::Lit(nx(2)));
        let r = c(&[(1, x(1)), (1, x(2))], 1).substitute(&omega);
        assert_eq!(r, Constraint::tautology());

        let mut f = Objective::new();
        f.add_var(&int(1), Var(0));
        f.add_var(&int(1), Var(1));
        let g = f.substitute(&Substitution::new().with(Var(0), SubstTarget::Const(true)));
        assert_eq!(g.coef(Var(1)), int(1));
        assert!(!g.contains(Var(0)));
        assert_eq!(g.constant(), &int(1));

        let base = c(&[(3, x(1)), (2, nx(3))], 2);
        assert_eq!(base.substitute(&Substitution::new()), base);
    }

    #[test]
    fn syntactic_implication() {
        let strong = c(&[(1, x(1)), (1, x(2)), (1, x(3))], 3);
        assert!(strong.implies(&c(&[(1, x(2)), (1, x(3))], 2)));
        assert!(!strong.implies(&c(&[(1, x(2)), (1, x(3))], 3)));
        assert!(c(&[(1, x(1))], 1).implies(&c(&[(1, x(1)), (4, x(2))], 1)));
    }

    #[test]
    fn gcd_reduction_rounds_degree_up() {
        let r = c(&[(4, x(1)), (4, x(2))], 3).gcd_reduced();
        assert_eq!(r, c(&[(1, x(1)), (1, x(2))], 1));
    }

    fn fig1_problem() -> Problem {
        let mut p = Problem::new(VarTable::numbered(5));
        let mut f = Objective::new();
        f.add_var(&int(1), Var(0));
        f.add_var(&int(1), Var(1));
        p.objective = Some(f);
        p.push(normalize(
            &[(int(1), x(1)), (int(1), x(2)), (int(-1), x(3)), (int(-1), x(4))],
            Relation::Eq,
            &int(1),
        ));
        p.push(normalize(&[(int(-1), x(1)), (int(1), x(5))], Relation::Geq, &int(0)));
        p
    }

    #[test]
    fn enumerate_fig1_instance() {
        let sols = enumerate_solutions(&fig1_problem(), 20).unwrap();
        // independent count: x1 = 1 - x2 + x3 + x4 must be 0/1 and x5 >= x1
        let mut expected = 0;
        for m in 0..32u32 {
            let b = |i: u32| ((m >> (4 - i)) & 1) as i32;
            let (x1, x2, x3, x4, x5) = (b(0), b(1), b(2), b(3), b(4));
            if x1 + x2 - x3 - x4 == 1 && x5 - x1 >= 0 {
                expected += 1;
            }
        }
        assert_eq!(sols.len(), expected);
        assert_eq!(sols.len(), 5);
        assert_eq!(sols.iter().map(|s| s.value.clone()).min(), Some(int(1)));
    }

    #[test]
    fn enumerate_edge_cases() {
        let mut p = Problem::new(VarTable::numbered(1));
        p.push(Normalized::Single(c(&[(1, x(1))], 1)));
        p.push(Normalized::Single(c(&[(1, nx(1))], 1)));
        assert!(enumerate_solutions(&p, 20).unwrap().is_empty());

        let mut p = Problem::new(VarTable::numbered(2));
        let mut f = Objective::new();
        f.add_var(&int(1), Var(0));
        p.objective = Some(f);
        let sols = enumerate_solutions(&p, 20).unwrap();
        assert_eq!(sols.len(), 4);
        assert_eq!(sols[0].point, vec![false, false]);
        assert_eq!(sols[1].point, vec![false, true]);
        assert_eq!(optimal_value(&p, 20).unwrap(), Some(int(0)));

        let p = Problem::new(VarTable::numbered(21));
        assert!(matches!(
            enumerate_solutions(&p, 20),
            Err(OracleError::TooManyVariables { .. })
        ));
    }
}
