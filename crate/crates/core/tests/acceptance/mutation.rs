//! Single-token mutations of accepted certificates.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use certpre::checker::{check_with, CheckOptions};
use certpre::model::{optimal_value, Problem};
use certpre::presolve::{presolve, PropCert, RunConfig};
use certpre::proof::{parse_certificate, Certificate, ObjuMode};

use super::{oracle_instance, verdict, Verdict, ORACLE_VARS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Coefficient,
    Degree,
    Id,
    Witness,
}

/// A mutable token: line index, token index, kind.
type Site = (usize, usize, Kind);

fn is_int(t: &str) -> bool {
    t.trim_start_matches(['+', '-']).parse::<u64>().is_ok()
}

fn witness_sites(line: usize, toks: &[&str], from: usize, out: &mut Vec<Site>) {
    let end = toks[from..].iter().position(|t| *t == ";").map_or(toks.len(), |p| from + p);
    let region: Vec<usize> = (from..end).filter(|&i| toks[i] != "->").collect();
    for pair in region.chunks(2) {
        if let [_, target] = pair {
            out.push((line, *target, Kind::Witness));
        }
    }
}

fn sites(text: &str) -> Vec<Site> {
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let Some(&head) = toks.first() else { continue };
        match head {
            "pol" => {
                for i in 1..toks.len() {
                    if is_int(toks[i]) {
                        let scalar = matches!(toks.get(i + 1), Some(&"*") | Some(&"d"));
                        out.push((li, i, if scalar { Kind::Coefficient } else { Kind::Id }));
                    }
                }
            }
            "rup" | "red" => {
                let semi = toks.iter().position(|t| *t == ";").unwrap_or(toks.len());
                for i in 1..semi {
                    if is_int(toks[i]) {
                        let degree = toks[i - 1] == ">=";
                        out.push((li, i, if degree { Kind::Degree } else { Kind::Coefficient }));
                    }
                }
                if head == "red" && semi < toks.len() {
                    witness_sites(li, &toks, semi + 1, &mut out);
                }
            }
            "delc" => {
                out.push((li, 1, Kind::Id));
                if toks.get(2) == Some(&";") {
                    witness_sites(li, &toks, 3, &mut out);
                }
            }
            "core" => out.push((li, 2, Kind::Id)),
            "obju" => {
                for i in 2..toks.len() {
                    if is_int(toks[i]) {
                        out.push((li, i, Kind::Coefficient));
                    }
                }
            }
            "proofgoal" if toks.len() > 1 && is_int(toks[1]) => out.push((li, 1, Kind::Id)),
            _ => {}
        }
    }
    out
}

fn mutate_token(tok: &str, kind: Kind, rng: &mut ChaCha8Rng) -> String {
    if kind == Kind::Witness {
        return match tok {
            "0" => "1".into(),
            "1" => "0".into(),
            t => match t.strip_prefix('~') {
                Some(v) => v.to_string(),
                None => format!("~{t}"),
            },
        };
    }
    let v: i64 = tok.trim_start_matches('+').parse().unwrap();
    let mut w = if rng.gen_bool(0.5) { v + 1 } else { v - 1 };
    if w == 0 || (kind != Kind::Degree && v > 0 && w < 0) || (kind == Kind::Degree && w < 0) {
        w = v + 1;
    }
    if tok.starts_with('+') || tok.starts_with('-') {
        format!("{w:+}")
    } else {
        w.to_string()
    }
}

fn apply(text: &str, (line, tok, kind): Site, rng: &mut ChaCha8Rng) -> String {
    let mut out = String::with_capacity(text.len() + 4);
    for (li, l) in text.lines().enumerate() {
        if li == line {
            let mut toks: Vec<String> = l.split_whitespace().map(str::to_string).collect();
            toks[tok] = mutate_token(&toks[tok], kind, rng);
            out += &toks.join(" ");
        } else {
            out += l;
        }
        out.push('\n');
    }
    out
}

#[derive(Default)]
struct Tally {
    per_kind: BTreeMap<Kind, (usize, usize)>,
    mutants: usize,
    killed: usize,
    harmful: Vec<String>,
}

impl Tally {
    fn merge(mut self, o: Tally) -> Tally {
        for (k, (a, b)) in o.per_kind {
            let e = self.per_kind.entry(k).or_default();
            e.0 += a;
            e.1 += b;
        }
        self.mutants += o.mutants;
        self.killed += o.killed;
        self.harmful.extend(o.harmful);
        self
    }
}

/// Mutates one certificate `per_cert` times and checks each mutant against
/// the original instance and the claimed reduced instance. A surviving
/// mutant is neutral when its final core set still has the original optimum.
fn mutate_instance(seed: u64, p: &Problem, per_cert: usize) -> Tally {
    let mut t = Tally::default();
    let cfg = if seed % 2 == 0 {
        RunConfig::default()
    } else {
        RunConfig {
            prop_cert: PropCert::Pol,
            obju_mode: ObjuMode::New,
            ..RunConfig::default()
        }
    };
    let out = presolve(p, &cfg).unwrap();
    let text = out.certificate.unwrap();
    let verify = |c: &Certificate| {
        let opts = CheckOptions {
            expected: Some(&out.reduced),
            ..CheckOptions::default()
        };
        check_with(p, c, opts)
    };
    if !verify(&parse_certificate(&text).unwrap()).accepted() {
        return t;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa11ce);
    let mut all = sites(&text);
    all.shuffle(&mut rng);
    let optimum = optimal_value(p, ORACLE_VARS).unwrap();
    for site in all.into_iter().take(per_cert) {
        let mutant = apply(&text, site, &mut rng);
        if mutant == text {
            continue;
        }
        t.mutants += 1;
        let e = t.per_kind.entry(site.2).or_default();
        e.0 += 1;
        let survived = match parse_certificate(&mutant) {
            Ok(c) => {
                let v = verify(&c);
                v.accepted().then_some(v)
            }
            Err(_) => None,
        };
        match survived {
            None => {
                t.killed += 1;
                e.1 += 1;
            }
            Some(v) => {
                let core = v.final_db.core_problem(p);
                if optimal_value(&core, ORACLE_VARS).unwrap() != optimum {
                    t.harmful.push(format!("seed {seed}, line {}, {:?}", site.0 + 1, site.2));
                }
            }
        }
    }
    t
}

pub fn run(target: usize) -> Verdict {
    const PER_CERT: usize = 8;
    let t = (0..)
        .step_by(1)
        .take((target / PER_CERT) * 3)
        .collect::<Vec<u64>>()
        .into_par_iter()
        .map(|i| {
            let seed = 10_000 + i;
            mutate_instance(seed, &oracle_instance(seed), PER_CERT)
        })
        .reduce(Tally::default, Tally::merge);
    let rate = t.killed as f64 / t.mutants.max(1) as f64;
    let kinds: Vec<String> = t
        .per_kind
        .iter()
        .map(|(k, (n, dead))| format!("{k:?} {dead}/{n}"))
        .collect();
    let mut detail = format!(
        "{} mutants, {} rejected ({:.1}%), {} survivors, {} not neutral [{}]",
        t.mutants,
        t.killed,
        100.0 * rate,
        t.mutants - t.killed,
        t.harmful.len(),
        kinds.join(", ")
    );
    if let Some(h) = t.harmful.first() {
        detail += &format!(" (first harmful: {h})");
    }
    verdict(t.mutants >= target && rate >= 0.95 && t.harmful.is_empty(), detail)
}
