//! Seeded instance generators for tests and benchmarks.

use std::str::FromStr;

use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{normalize, LinExpr, Lit, Objective, Problem, Relation, Var, VarTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Random mix of inequalities, unit equalities, scaled copies and covers.
    Mixed,
    /// Chains where each fixing enables the next one.
    Propagation,
    /// Large objective with many unit fixings of objective variables.
    DenseObjective,
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mixed" => Ok(Family::Mixed),
            "propagation" => Ok(Family::Propagation),
            "dense-objective" => Ok(Family::DenseObjective),
            _ => Err(format!("unknown family `{s}` (mixed, propagation, dense-objective)")),
        }
    }
}

/// One instance of `family` scaled by `size`.
pub fn generate(family: Family, size: usize, seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match family {
        Family::Mixed => random_instance(&mut rng, size.max(2), size.max(1) * 3 / 2),
        Family::Propagation => propagation_chain(size.max(1)),
        Family::DenseObjective => dense_objective(size.max(1), size.max(1) / 10 + 1),
    }
}

/// Mixed-family instance with explicit variable and constraint counts.
pub fn mixed(vars: usize, constraints: usize, seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_instance(&mut rng, vars.max(2), constraints)
}

fn lin(terms: &[(i64, Var)]) -> Vec<(BigInt, Lit)> {
    terms
        .iter()
        .map(|(c, v)| (BigInt::from(*c), Lit::pos(*v)))
        .collect()
}

fn pick(rng: &mut impl Rng, n: usize, k: usize) -> Vec<Var> {
    let mut all: Vec<usize> = (0..n).collect();
    all.shuffle(rng);
    let mut chosen: Vec<Var> = all[..k.min(n)].iter().map(|&i| Var(i as u32)).collect();
    chosen.sort();
    chosen
}

fn nonzero(rng: &mut impl Rng, bound: i64) -> i64 {
    let c = rng.gen_range(1..=bound);
    if rng.gen_bool(0.5) {
        -c
    } else {
        c
    }
}

/// Random 0-1 program over `n` variables with about `m` constraints.
pub fn random_instance(rng: &mut impl Rng, n: usize, m: usize) -> Problem {
    let mut p = Problem::new(VarTable::numbered(n));
    let mut ineqs: Vec<Vec<(i64, Var)>> = Vec::new();
    for _ in 0..m {
        match rng.gen_range(0..10) {
            0..=3 => {
                let vars = { let k = rng.gen_range(2..=4); pick(rng, n, k) };
                let terms: Vec<(i64, Var)> = vars.iter().map(|v| (nonzero(rng, 4), *v)).collect();
                let lo: i64 = terms.iter().map(|(c, _)| (*c).min(0)).sum();
                let hi: i64 = terms.iter().map(|(c, _)| (*c).max(0)).sum();
                let rhs = rng.gen_range(lo..=hi);
                p.push(normalize(&lin(&terms), Relation::Geq, &BigInt::from(rhs)));
                ineqs.push(terms);
            }
            4..=5 => {
                let vars = { let k = rng.gen_range(2..=3); pick(rng, n, k) };
                let terms: Vec<(i64, Var)> = vars.iter().map(|v| (nonzero(rng, 1), *v)).collect();
                let lo: i64 = terms.iter().map(|(c, _)| (*c).min(0)).sum();
                let hi: i64 = terms.iter().map(|(c, _)| (*c).max(0)).sum();
                let rhs = rng.gen_range(lo..=hi);
                p.push(normalize(&lin(&terms), Relation::Eq, &BigInt::from(rhs)));
            }
            6 if !ineqs.is_empty() => {
                let base = ineqs.choose(rng).unwrap().clone();
                let k = rng.gen_range(2..=3);
                let lo: i64 = base.iter().map(|(c, _)| (*c).min(0)).sum();
                let hi: i64 = base.iter().map(|(c, _)| (*c).max(0)).sum();
                let rhs = rng.gen_range(lo..=hi) * k;
                let scaled: Vec<(i64, Var)> = base.iter().map(|(c, v)| (c * k, *v)).collect();
                p.push(normalize(&lin(&scaled), Relation::Geq, &BigInt::from(rhs)));
            }
            7 => {
                let vars = pick(rng, n, 3);
                let g = rng.gen_range(2..=3);
                let mut terms: Vec<(i64, Var)> = vars[..2].iter().map(|v| (g, *v)).collect();
                if vars.len() > 2 {
                    terms.push((1, vars[2]));
                }
                let rhs = rng.gen_range(1..=2 * g);
                p.push(normalize(&lin(&terms), Relation::Geq, &BigInt::from(rhs)));
            }
            _ => {
                let vars = { let k = rng.gen_range(1..=3); pick(rng, n, k) };
                let terms: Vec<(BigInt, Lit)> = vars
                    .iter()
                    .map(|v| (BigInt::from(1), Lit::new(*v, rng.gen_bool(0.3))))
                    .collect();
                p.push(normalize(&terms, Relation::Geq, &BigInt::from(1)));
            }
        }
    }
    let mut f = Objective::new();
    for v in { let k = rng.gen_range(1..=n); pick(rng, n, k) } {
        f.add_var(&BigInt::from(rng.gen_range(-3..=3)), v);
    }
    p.objective = Some(f);
    p
}

/// `2 x1 + y1 >= 2` and `2 x(i+1) + ~x(i) + y(i+1) >= 2`: fixing `x1`
/// propagates along the chain; the `y` variables stay free.
pub fn propagation_chain(len: usize) -> Problem {
    let mut p = Problem::new(VarTable::numbered(2 * len));
    let x = |i: usize| Var(i as u32);
    let y = |i: usize| Var((len + i) as u32);
    p.push(normalize(&lin(&[(2, x(0)), (1, y(0))]), Relation::Geq, &BigInt::from(2)));
    for i in 1..len {
        let terms = vec![
            (BigInt::from(2), Lit::pos(x(i))),
            (BigInt::from(1), Lit::neg(x(i - 1))),
            (BigInt::from(1), Lit::pos(y(i))),
        ];
        p.push(normalize(&terms, Relation::Geq, &BigInt::from(2)));
    }
    let mut f = LinExpr::new();
    for i in 0..len {
        f.add_var(&BigInt::from(1), y(i));
    }
    p.objective = Some(f);
    p
}

/// Objective over `terms` variables; the first `fixings` are forced to one.
pub fn dense_objective(terms: usize, fixings: usize) -> Problem {
    let fixings = fixings.min(terms);
    let mut p = Problem::new(VarTable::numbered(terms));
    let mut f = LinExpr::new();
    for i in 0..terms {
        f.add_var(&BigInt::from((i % 7) as i64 + 1), Var(i as u32));
    }
    p.objective = Some(f);
    for i in 0..fixings {
        p.push(normalize(&lin(&[(1, Var(i as u32))]), Relation::Geq, &BigInt::from(1)));
    }
    for i in (fixings..terms.saturating_sub(1)).step_by(2) {
        p.push(normalize(
            &lin(&[(1, Var(i as u32)), (1, Var(i as u32 + 1))]),
            Relation::Geq,
            &BigInt::from(1),
        ));
    }
    p
}
