//! Benchmark harness: presolve with and without logging, then verification,
//! for every instance under every configuration cell.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checker::{check_with, CheckOptions, Outcome};
use crate::model::Problem;
use crate::presolve::{presolve, RunConfig};
use crate::proof::parse_certificate;

/// Shift used for all geometric means, in seconds.
pub const SHIFT: f64 = 1.0;

/// `exp(mean(ln(t + shift))) - shift`; zero for an empty sample.
pub fn shifted_geomean(times: &[f64], shift: f64) -> f64 {
    if times.is_empty() {
        return 0.0;
    }
    let s: f64 = times.iter().map(|t| (t + shift).ln()).sum();
    (s / times.len() as f64).exp() - shift
}

/// Mean runtime with each timeout (`None`) counted as twice `limit`.
pub fn par2(times: &[Option<f64>], limit: f64) -> f64 {
    if times.is_empty() {
        return 0.0;
    }
    let s: f64 = times.iter().map(|t| t.unwrap_or(2.0 * limit)).sum();
    s / times.len() as f64
}

/// A named configuration column of the experiment matrix.
#[derive(Debug, Clone)]
pub struct Cell {
    pub name: String,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub instance: String,
    pub config: String,
    pub presolve_seconds: f64,
    pub logging_seconds: f64,
    /// `None` on timeout.
    pub verify_seconds: Option<f64>,
    pub certificate_bytes: u64,
    pub propagation_bytes: u64,
    pub transactions: u64,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub config: String,
    pub instances: usize,
    pub accepted: usize,
    pub presolve_sgm: f64,
    pub logging_sgm: f64,
    /// Logging time over plain presolve time.
    pub overhead: f64,
    pub verify_sgm: f64,
    pub verify_par2: f64,
    /// Verification time relative to the first configuration.
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub verify_limit: f64,
    pub rows: Vec<BenchRow>,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        1.0
    }
}

fn run_one(name: &str, p: &Problem, cell: &Cell, verify_limit: f64) -> BenchRow {
    let mut row = BenchRow {
        instance: name.to_string(),
        config: cell.name.clone(),
        presolve_seconds: 0.0,
        logging_seconds: 0.0,
        verify_seconds: None,
        certificate_bytes: 0,
        propagation_bytes: 0,
        transactions: 0,
        verdict: String::new(),
    };
    let plain = RunConfig {
        proof: false,
        ..cell.config.clone()
    };
    let t = Instant::now();
    if let Err(e) = presolve(p, &plain) {
        row.verdict = format!("error: {e}");
        return row;
    }
    row.presolve_seconds = t.elapsed().as_secs_f64();
    let logged = RunConfig {
        proof: true,
        ..cell.config.clone()
    };
    let t = Instant::now();
    let out = match presolve(p, &logged) {
        Ok(o) => o,
        Err(e) => {
            row.verdict = format!("error: {e}");
            return row;
        }
    };
    row.logging_seconds = t.elapsed().as_secs_f64();
    row.certificate_bytes = out.stats.certificate_bytes;
    row.propagation_bytes = out.stats.propagation_bytes;
    row.transactions = out.stats.total_transactions() as u64;
    let text = out.certificate.unwrap_or_default();
    let t = Instant::now();
    let cert = match parse_certificate(&text) {
        Ok(c) => c,
        Err(e) => {
            row.verdict = format!("error: {e}");
            return row;
        }
    };
    let opts = CheckOptions {
        deadline: Some(t + Duration::from_secs_f64(verify_limit)),
        hook: None,
        expected: Some(&out.reduced),
    };
    let v = check_with(p, &cert, opts);
    let secs = t.elapsed().as_secs_f64();
    row.verdict = match v.outcome {
        Outcome::Accepted => {
            row.verify_seconds = Some(secs);
            "accepted".into()
        }
        Outcome::Rejected { step, reason, .. } => {
            row.verify_seconds = Some(secs);
            format!("rejected at step {step}: {reason}")
        }
        Outcome::TimedOut { .. } => "timeout".into(),
    };
    row
}

/// Runs every instance under every cell on `workers` threads. Rows come
/// back sorted by instance name, then by cell order.
pub fn run(
    instances: &[(String, Problem)],
    cells: &[Cell],
    workers: usize,
    verify_limit: f64,
) -> BenchReport {
    let jobs: Vec<(usize, usize)> = (0..instances.len())
        .flat_map(|i| (0..cells.len()).map(move |c| (i, c)))
        .collect();
    let work = || {
        jobs.par_iter()
            .map(|&(i, c)| {
                let (name, p) = &instances[i];
                (i, c, run_one(name, p, &cells[c], verify_limit))
            })
            .collect::<Vec<_>>()
    };
    let mut done = match rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
    {
        Ok(pool) => pool.install(work),
        Err(_) => work(),
    };
    done.sort_by(|a, b| instances[a.0].0.cmp(&instances[b.0].0).then(a.1.cmp(&b.1)));
    BenchReport {
        verify_limit,
        rows: done.into_iter().map(|(_, _, r)| r).collect(),
    }
}

impl BenchReport {
    fn configs(&self) -> Vec<String> {
        let mut seen: Vec<String> = Vec::new();
        for r in &self.rows {
            if !seen.contains(&r.config) {
                seen.push(r.config.clone());
            }
        }
        seen
    }

    /// Per-configuration aggregates, recomputed from the rows.
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut out: Vec<Aggregate> = Vec::new();
        for name in self.configs() {
            let rows: Vec<&BenchRow> = self.rows.iter().filter(|r| r.config == name).collect();
            let pre: Vec<f64> = rows.iter().map(|r| r.presolve_seconds).collect();
            let log: Vec<f64> = rows.iter().map(|r| r.logging_seconds).collect();
            let ver: Vec<Option<f64>> = rows.iter().map(|r| r.verify_seconds).collect();
            let ver_pen: Vec<f64> = ver
                .iter()
                .map(|t| t.unwrap_or(2.0 * self.verify_limit))
                .collect();
            let presolve_sgm = shifted_geomean(&pre, SHIFT);
            let logging_sgm = shifted_geomean(&log, SHIFT);
            let verify_sgm = shifted_geomean(&ver_pen, SHIFT);
            let relative = match out.first() {
                Some(base) => ratio(verify_sgm, base.verify_sgm),
                None => 1.0,
            };
            out.push(Aggregate {
                config: name,
                instances: rows.len(),
                accepted: rows.iter().filter(|r| r.verdict == "accepted").count(),
                presolve_sgm,
                logging_sgm,
                overhead: ratio(logging_sgm, presolve_sgm),
                verify_sgm,
                verify_par2: par2(&ver, self.verify_limit),
                relative,
            });
        }
        out
    }

    /// One JSON object per line: rows first, then aggregates tagged with
    /// `"kind": "aggregate"`.
    pub fn to_json_lines(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let mut v = serde_json::to_value(r).expect("row serializes");
            v["kind"] = "row".into();
            writeln!(s, "{v}").unwrap();
        }
        for a in self.aggregates() {
            let mut v = serde_json::to_value(&a).expect("aggregate serializes");
            v["kind"] = "aggregate".into();
            writeln!(s, "{v}").unwrap();
        }
        s
    }

    /// Reads back the rows of [`BenchReport::to_json_lines`].
    pub fn from_json_lines(text: &str, verify_limit: f64) -> serde_json::Result<Self> {
        let mut rows = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let v: serde_json::Value = serde_json::from_str(line)?;
            if v["kind"] == "row" {
                rows.push(serde_json::from_value(v)?);
            }
        }
        Ok(BenchReport { verify_limit, rows })
    }

    /// Human-readable table: per-instance rows, then one aggregate line per
    /// configuration with shifted geometric means and PAR2.
    pub fn table(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "{:<24} {:<10} {:>10} {:>10} {:>10} {:>12} {:>6}  verdict",
            "instance", "config", "presolve", "logging", "verify", "cert bytes", "trans"
        )
        .unwrap();
        for r in &self.rows {
            let ver = r
                .verify_seconds
                .map_or_else(|| "-".to_string(), |t| format!("{t:.4}"));
            writeln!(
                s,
                "{:<24} {:<10} {:>10.4} {:>10.4} {:>10} {:>12} {:>6}  {}",
                r.instance,
                r.config,
                r.presolve_seconds,
                r.logging_seconds,
                ver,
                r.certificate_bytes,
                r.transactions,
                r.verdict
            )
            .unwrap();
        }
        writeln!(
            s,
            "\n{:<10} {:>5} {:>8} {:>10} {:>10} {:>9} {:>10} {:>10} {:>9}",
            "config", "n", "accepted", "presolve", "logging", "overhead", "verify", "par2", "relative"
        )
        .unwrap();
        for a in self.aggregates() {
            writeln!(
                s,
                "{:<10} {:>5} {:>8} {:>10.4} {:>10.4} {:>9.3} {:>10.4} {:>10.4} {:>9.3}",
                a.config,
                a.instances,
                a.accepted,
                a.presolve_sgm,
                a.logging_sgm,
                a.overhead,
                a.verify_sgm,
                a.verify_par2,
                a.relative
            )
            .unwrap();
        }
        s
    }
}
