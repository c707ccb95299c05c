//! Acceptance suite. Runs as a plain binary (no libtest harness) so every
//! criterion prints exactly one PASS/FAIL line; exits non-zero on any FAIL.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use certpre::bench::{self, Cell};
use certpre::checker::check;
use certpre::engine;
use certpre::gen;
use certpre::model::{enumerate_solutions, optimal_value, Constraint, Lit, Problem, Var};
use certpre::opb;
use certpre::presolve::{presolve, presolve_traced, Class, PropCert, RunConfig, Technique};
use certpre::proof::{parse_certificate, ObjuMode};

#[path = "acceptance/mutation.rs"]
mod mutation;

const ORACLE_VARS: usize = 12;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

const FIG1: &str = "min: +1 x1 +1 x2 ;\n+1 x1 +1 x2 -1 x3 -1 x4 = 1 ;\n-1 x1 +1 x5 >= 0 ;";

const FIG1_CERT: &str = "pseudo-Boolean proof version 2.0
f 3
pol 1 ~x1 + ;
core id 4
pol 2 x1 + ;
core id 5
pol 3 1 + ;
core id 6
delc 3 ; ; begin
   pol 6 2 +
end
obju new +1 x3 +1 x4 1 ;
delc 2 ; x1 -> 0
delc 1 ; x1 -> 1
delc 5
delc 4 ; ; begin
   pol 6 -1 +
end
end pseudo-Boolean proof
";

/// Non-comment lines, whitespace-collapsed, without the final step count.
fn skeleton(cert: &str) -> Vec<String> {
    cert.lines()
        .filter(|l| !l.trim_start().starts_with('*') && !l.trim().is_empty())
        .map(|l| {
            let mut words: Vec<&str> = l.split_whitespace().collect();
            if l.starts_with("end pseudo-Boolean proof") {
                words.truncate(3);
            }
            words.join(" ")
        })
        .collect()
}

fn fig1() -> Verdict {
    let p = opb::parse(FIG1).unwrap();
    let cfg = RunConfig {
        obju_mode: ObjuMode::New,
        ..RunConfig::only(&[Technique::ImpliedFree])
    };
    let out = presolve(&p, &cfg).unwrap();
    let text = out.certificate.unwrap();
    let want = opb::parse("min: +1 x3 +1 x4 ;\n* objective offset 1\n+1 x2 -1 x3 -1 x4 +1 x5 >= 1 ;")
        .unwrap();
    let reduced_ok =
        out.reduced.constraints == want.constraints && out.reduced.objective == want.objective;
    let steps_ok = skeleton(&text) == skeleton(FIG1_CERT);
    let accepted = check(&p, &parse_certificate(&text).unwrap()).accepted();
    verdict(
        reduced_ok && steps_ok && accepted,
        format!("reduced problem {reduced_ok}, step sequence {steps_ok}, checker {accepted}"),
    )
}

/// Small seeded instance for the oracle suites.
fn oracle_instance(seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=ORACLE_VARS);
    let m = rng.gen_range(2..=10);
    gen::mixed(n, m, seed)
}

/// Configurations applied to every oracle instance: the full pipeline in
/// both certification flavours, plus one technique on its own.
fn oracle_configs(seed: u64) -> Vec<RunConfig> {
    let alone = Technique::ALL[seed as usize % Technique::ALL.len()];
    vec![
        RunConfig::default(),
        RunConfig {
            prop_cert: PropCert::Pol,
            obju_mode: ObjuMode::New,
            ..RunConfig::default()
        },
        RunConfig::only(&[alone]),
    ]
}

#[derive(Default)]
struct SuiteStats {
    instances: usize,
    transactions: BTreeMap<&'static str, usize>,
    violations: Vec<String>,
    certificates: usize,
    accepted: usize,
    core_mismatch: usize,
    rejected: Vec<String>,
}

impl SuiteStats {
    fn merge(mut self, o: SuiteStats) -> SuiteStats {
        self.instances += o.instances;
        for (k, v) in o.transactions {
            *self.transactions.entry(k).or_default() += v;
        }
        self.violations.extend(o.violations);
        self.certificates += o.certificates;
        self.accepted += o.accepted;
        self.core_mismatch += o.core_mismatch;
        self.rejected.extend(o.rejected);
        self
    }
}

/// Presolves one instance under every oracle configuration, checking each
/// transaction against brute force and each certificate with the checker.
fn audit_instance(seed: u64, p: &Problem, configs: &[RunConfig]) -> SuiteStats {
    let mut s = SuiteStats {
        instances: 1,
        ..SuiteStats::default()
    };
    for cfg in configs {
        let out = match presolve_traced(p, cfg) {
            Ok(o) => o,
            Err(e) => {
                s.violations.push(format!("seed {seed}: presolve failed: {e}"));
                continue;
            }
        };
        for t in out.trace.as_deref().unwrap_or_default() {
            *s.transactions.entry(t.technique.name()).or_default() += 1;
            let same = match t.technique.class() {
                Class::Primal => {
                    let a = enumerate_solutions(&t.before, ORACLE_VARS).unwrap();
                    let b = enumerate_solutions(&t.after, ORACLE_VARS).unwrap();
                    a.iter().map(|x| &x.point).eq(b.iter().map(|x| &x.point))
                }
                Class::Dual => {
                    optimal_value(&t.before, ORACLE_VARS).unwrap()
                        == optimal_value(&t.after, ORACLE_VARS).unwrap()
                }
            };
            if !same {
                s.violations.push(format!("seed {seed}: {} broke its invariant", t.technique.name()));
            }
        }
        let text = out.certificate.unwrap_or_default();
        s.certificates += 1;
        match parse_certificate(&text) {
            Ok(cert) => {
                let v = check(p, &cert);
                if v.accepted() {
                    s.accepted += 1;
                    let core = v.final_db.core_problem(p);
                    if core.constraints != out.reduced.constraints
                        || core.objective.unwrap_or_default()
                            != out.reduced.objective.clone().unwrap_or_default()
                    {
                        s.core_mismatch += 1;
                    }
                } else {
                    s.rejected.push(format!("seed {seed}: {:?}", v.outcome));
                }
            }
            Err(e) => s.rejected.push(format!("seed {seed}: {e}")),
        }
    }
    s
}

fn oracle_suite(count: u64) -> SuiteStats {
    (0..count)
        .into_par_iter()
        .map(|seed| audit_instance(seed, &oracle_instance(seed), &oracle_configs(seed)))
        .reduce(SuiteStats::default, SuiteStats::merge)
}

fn oracle_equivalence(s: &SuiteStats) -> Verdict {
    let fired: Vec<&str> = Technique::ALL
        .iter()
        .map(|t| t.name())
        .filter(|n| s.transactions.get(n).copied().unwrap_or(0) == 0)
        .collect();
    let total: usize = s.transactions.values().sum();
    let mut detail = format!(
        "{} instances, {} transactions checked, {} violations",
        s.instances,
        total,
        s.violations.len()
    );
    if let Some(v) = s.violations.first() {
        detail += &format!(" (first: {v})");
    }
    if !fired.is_empty() {
        detail += &format!(", never fired: {}", fired.join(" "));
    }
    verdict(s.instances >= 500 && s.violations.is_empty() && fired.is_empty(), detail)
}

/// Round trip over the oracle suite plus the larger generated families.
fn round_trip(s: &SuiteStats) -> Verdict {
    let extra: SuiteStats = (0..40u64)
        .into_par_iter()
        .map(|seed| {
            let p = match seed % 4 {
                0 => gen::generate(gen::Family::Propagation, 10 + seed as usize, seed),
                1 => gen::generate(gen::Family::DenseObjective, 20 + seed as usize, seed),
                _ => gen::mixed(14 + seed as usize % 20, 20, seed),
            };
            let configs = [
                RunConfig::default(),
                RunConfig {
                    prop_cert: PropCert::Pol,
                    obju_mode: ObjuMode::New,
                    ..RunConfig::default()
                },
            ];
            let mut r = SuiteStats {
                instances: 1,
                ..SuiteStats::default()
            };
            for cfg in &configs {
                let out = presolve(&p, cfg).unwrap();
                let text = out.certificate.unwrap_or_default();
                r.certificates += 1;
                match parse_certificate(&text).map(|c| check(&p, &c)) {
                    Ok(v) if v.accepted() => r.accepted += 1,
                    Ok(v) => r.rejected.push(format!("family seed {seed}: {:?}", v.outcome)),
                    Err(e) => r.rejected.push(format!("family seed {seed}: {e}")),
                }
            }
            r
        })
        .reduce(SuiteStats::default, SuiteStats::merge);
    let certs = s.certificates + extra.certificates;
    let ok = s.accepted + extra.accepted;
    let mut detail = format!(
        "{ok}/{certs} certificates accepted, {} final cores differ from the reduced problem",
        s.core_mismatch
    );
    if let Some(r) = s.rejected.first().or(extra.rejected.first()) {
        detail += &format!(" (first rejection: {r})");
    }
    verdict(certs > 0 && ok == certs && s.core_mismatch == 0, detail)
}

fn rup_vs_pol() -> Verdict {
    let mut corpus: Vec<(String, Problem)> = (10..=40)
        .map(|len| (format!("chain-{len:02}"), gen::propagation_chain(len)))
        .collect();
    corpus.extend((0..40u64).map(|s| (format!("mixed-{s:02}"), gen::mixed(40, 60, s))));
    let rup = RunConfig::default();
    let pol = RunConfig {
        prop_cert: PropCert::Pol,
        ..RunConfig::default()
    };
    let mut kept = Vec::new();
    let mut failures = Vec::new();
    for (name, p) in corpus {
        let a = presolve(&p, &rup).unwrap();
        if a.stats.propagation_steps < 10 {
            continue;
        }
        let b = presolve(&p, &pol).unwrap();
        if b.stats.propagation_bytes < a.stats.propagation_bytes {
            failures.push(format!("{name}: pol propagation bytes smaller"));
        }
        kept.push((name, p));
    }
    let cells = [
        Cell {
            name: "rup".into(),
            config: rup,
        },
        Cell {
            name: "pol".into(),
            config: pol,
        },
    ];
    let rep = bench::run(&kept, &cells, 4, 60.0);
    let agg = rep.aggregates();
    let all_ok = rep.rows.iter().all(|r| r.verdict == "accepted");
    let shaped = agg.len() == 2 && rep.table().contains("relative") && agg[0].relative == 1.0;
    let (rb, pb): (u64, u64) = (
        rep.rows.iter().filter(|r| r.config == "rup").map(|r| r.propagation_bytes).sum(),
        rep.rows.iter().filter(|r| r.config == "pol").map(|r| r.propagation_bytes).sum(),
    );
    let detail = format!(
        "{} instances with >= 10 propagations, all verified {all_ok}, propagation bytes rup {rb} pol {pb}, relative pol time {:.3}{}",
        kept.len(),
        agg.get(1).map_or(f64::NAN, |a| a.relative),
        failures.first().map(|f| format!(", {f}")).unwrap_or_default()
    );
    verdict(kept.len() >= 20 && all_ok && shaped && failures.is_empty(), detail)
}

fn cert_bytes(p: &Problem, cfg: &RunConfig) -> (u64, bool) {
    let out = presolve(p, cfg).unwrap();
    let text = out.certificate.unwrap();
    let ok = check(p, &parse_certificate(&text).unwrap()).accepted();
    (text.len() as u64, ok)
}

fn obju_modes() -> Verdict {
    let mode = |m: ObjuMode| RunConfig {
        obju_mode: m,
        ..RunConfig::default()
    };
    let big = gen::dense_objective(1024, 100);
    let small = gen::dense_objective(512, 100);
    let (diff, d_ok) = cert_bytes(&big, &mode(ObjuMode::Diff));
    let (new, n_ok) = cert_bytes(&big, &mode(ObjuMode::New));
    let (diff_s, _) = cert_bytes(&small, &mode(ObjuMode::Diff));
    let (new_s, _) = cert_bytes(&small, &mode(ObjuMode::New));
    let new_growth = new as f64 / new_s as f64;
    let diff_growth = diff as f64 / diff_s as f64;
    verdict(
        d_ok && n_ok && diff * 10 <= new && new_growth > diff_growth,
        format!(
            "1024 terms / 100 fixings: diff {diff} B, new {new} B ({:.1}x); growth from 512 terms: new {new_growth:.2}x, diff {diff_growth:.2}x; both verified {}",
            new as f64 / diff as f64,
            d_ok && n_ok
        ),
    )
}

fn random_constraint(rng: &mut ChaCha8Rng, k: usize) -> Constraint {
    let len = rng.gen_range(1..=k);
    let mut vars: Vec<usize> = (0..k).collect();
    for i in 0..len {
        let j = rng.gen_range(i..k);
        vars.swap(i, j);
    }
    let terms: Vec<(BigInt, Lit)> = vars[..len]
        .iter()
        .map(|&v| (BigInt::from(rng.gen_range(1..=8)), Lit::new(Var(v as u32), rng.gen_bool(0.5))))
        .collect();
    let sum: i64 = terms.iter().map(|(c, _)| i64::try_from(c).unwrap()).sum();
    Constraint::from_terms(terms, BigInt::from(rng.gen_range(0..=sum + 1)))
}

/// Every 0-1 point satisfying the premises satisfies the conclusion.
fn sound(premises: &[&Constraint], conclusion: &Constraint, k: usize) -> bool {
    let mut point = vec![false; k];
    for mask in 0u32..(1 << k) {
        for (i, slot) in point.iter_mut().enumerate() {
            *slot = mask >> i & 1 == 1;
        }
        if premises.iter().all(|c| c.satisfied_by(&point)) && !conclusion.satisfied_by(&point) {
            return false;
        }
    }
    true
}

fn rule_case(rng: &mut ChaCha8Rng) -> Option<&'static str> {
    let k = rng.gen_range(1..=12);
    let a = random_constraint(rng, k);
    let b = random_constraint(rng, k);
    let (name, ok) = match rng.gen_range(0..6) {
        0 => ("add", sound(&[&a, &b], &engine::add(&a, &b), k)),
        1 => {
            let m = BigInt::from(rng.gen_range(1..=5));
            ("multiply", sound(&[&a], &engine::multiply(&a, &m).unwrap(), k))
        }
        2 => {
            let d = BigInt::from(rng.gen_range(1..=6));
            ("divide", sound(&[&a], &engine::divide(&a, &d).unwrap(), k))
        }
        3 => ("saturate", sound(&[&a], &engine::saturate(&a), k)),
        4 => {
            let v = a.terms()[rng.gen_range(0..a.len())].lit.var();
            ("weaken", sound(&[&a], &engine::weaken(&a, v), k))
        }
        _ => {
            let l = Lit::new(Var(rng.gen_range(0..k) as u32), rng.gen_bool(0.5));
            let c = engine::add(&a, &engine::literal_axiom(l));
            ("axiom", sound(&[&a], &c, k))
        }
    };
    (!ok).then_some(name)
}

fn rule_soundness() -> Verdict {
    const CASES: u64 = 100_000;
    const CHUNKS: u64 = 100;
    let bad: Vec<&str> = (0..CHUNKS)
        .into_par_iter()
        .flat_map_iter(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed + chunk);
            (0..CASES / CHUNKS).filter_map(move |_| rule_case(&mut rng)).collect::<Vec<_>>()
        })
        .collect();
    verdict(
        bad.is_empty(),
        format!(
            "{CASES} cases over add/multiply/divide/saturate/weaken/axiom, {} violations{}",
            bad.len(),
            bad.first().map(|r| format!(" (first in {r})")).unwrap_or_default()
        ),
    )
}

fn report(name: &str, budget: Duration, started: Instant, v: Verdict) -> bool {
    let took = started.elapsed();
    let in_time = took <= budget;
    let pass = v.pass && in_time;
    println!(
        "{} {name} [{:.1}s / {}s]: {}{}",
        if pass { "PASS" } else { "FAIL" },
        took.as_secs_f64(),
        budget.as_secs(),
        v.detail,
        if in_time { "" } else { " (over time budget)" }
    );
    pass
}

fn main() {
    let secs = Duration::from_secs;
    let mut all = true;

    let t = Instant::now();
    all &= report("fig1-reproduction", secs(1), t, fig1());

    let t = Instant::now();
    let suite = oracle_suite(500);
    all &= report("oracle-equivalence", secs(300), t, oracle_equivalence(&suite));

    let t = Instant::now();
    all &= report("round-trip", secs(300), t, round_trip(&suite));

    let t = Instant::now();
    all &= report("mutation-soundness", secs(600), t, mutation::run(1000));

    let t = Instant::now();
    all &= report("rup-vs-pol", secs(300), t, rup_vs_pol());

    let t = Instant::now();
    all &= report("obju-modes", secs(120), t, obju_modes());

    let t = Instant::now();
    all &= report("rule-soundness", secs(120), t, rule_soundness());

    if !all {
        std::process::exit(1);
    }
}
