//! `certpre`: presolve 0-1 programs with certificates, check them, generate
//! corpora and run benchmarks.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use certpre::bench::{self, Cell};
use certpre::checker::{check_with, CheckOptions, Outcome};
use certpre::gen::{self, Family};
use certpre::model::Problem;
use certpre::opb;
use certpre::presolve::{presolve, PropCert, RunConfig};
use certpre::proof::{parse_certificate, ObjuMode};

#[derive(Parser)]
#[command(name = "certpre", version, about = "Certifying presolve for 0-1 integer programs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Presolve an OPB instance, writing the reduced instance, certificate and postsolve log.
    Presolve {
        instance: PathBuf,
        /// Output prefix; defaults to the instance path without extension.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Check a certificate against its original instance (exit 0 accepted, 1 rejected, 2 I/O or parse error).
    Check {
        instance: PathBuf,
        certificate: PathBuf,
        /// Also require the final core set and objective to equal this reduced instance.
        #[arg(long)]
        reduced: Option<PathBuf>,
        #[arg(long)]
        time_limit: Option<f64>,
        /// Write a JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Generate a seeded OPB corpus.
    Gen {
        #[arg(long, default_value = "mixed")]
        family: String,
        /// Variables (mixed), chain length (propagation) or objective terms (dense-objective).
        #[arg(long, default_value_t = 10)]
        size: usize,
        /// Constraint count for the mixed family.
        #[arg(long)]
        constraints: Option<usize>,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run presolve with and without logging, then verification, over a corpus.
    Bench {
        corpus: PathBuf,
        #[arg(long, value_enum, default_value_t = Matrix::Default)]
        matrix: Matrix,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Verification time limit per certificate in seconds.
        #[arg(long, default_value_t = 60.0)]
        verify_limit: f64,
        #[command(flatten)]
        run: RunFlags,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Matrix {
    /// One cell with the given flags.
    Default,
    /// `rup` against `pol` propagation certificates.
    PropCert,
    /// `diff` against `new` objective updates.
    Obju,
}

#[derive(Clone, Copy, ValueEnum)]
enum PropArg {
    Rup,
    Pol,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjuArg {
    Diff,
    New,
}

#[derive(Args)]
struct RunFlags {
    /// TOML file with the same keys as the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    prop_cert: Option<PropArg>,
    #[arg(long, value_enum)]
    obju_mode: Option<ObjuArg>,
    #[arg(long)]
    no_proof: bool,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    time_limit: Option<f64>,
    /// Write the statistics (presolve) or JSON-lines rows (bench) here.
    #[arg(long)]
    report: Option<PathBuf>,
}

impl RunFlags {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                RunConfig::from_toml(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(m) = self.prop_cert {
            cfg.prop_cert = match m {
                PropArg::Rup => PropCert::Rup,
                PropArg::Pol => PropCert::Pol,
            };
        }
        if let Some(m) = self.obju_mode {
            cfg.obju_mode = match m {
                ObjuArg::Diff => ObjuMode::Diff,
                ObjuArg::New => ObjuMode::New,
            };
        }
        if self.no_proof {
            cfg.proof = false;
        }
        if let Some(r) = self.rounds {
            cfg.rounds = r;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if self.time_limit.is_some() {
            cfg.time_limit = self.time_limit;
        }
        Ok(cfg)
    }
}

fn read_instance(path: &Path) -> Result<Problem> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    opb::parse_bytes(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_presolve(instance: &Path, output: Option<PathBuf>, run: &RunFlags) -> Result<()> {
    let cfg = run.config()?;
    let p = read_instance(instance)?;
    let out = presolve(&p, &cfg)?;
    let prefix = output.unwrap_or_else(|| instance.with_extension(""));
    let reduced = with_suffix(&prefix, ".reduced.opb");
    fs::write(&reduced, opb::write(&out.reduced))?;
    fs::write(with_suffix(&prefix, ".postsolve"), out.postsolve.to_text(&p.vars))?;
    if let Some(cert) = &out.certificate {
        fs::write(with_suffix(&prefix, ".pbp"), cert)?;
    }
    let stats = serde_json::json!({
        "status": out.status,
        "rows": out.reduced.constraints.len(),
        "stats": out.stats,
    });
    match &run.report {
        Some(path) => fs::write(path, format!("{stats:#}\n"))?,
        None => println!("{stats}"),
    }
    Ok(())
}

fn cmd_check(
    instance: &Path,
    certificate: &Path,
    reduced: Option<PathBuf>,
    limit: Option<f64>,
    report: Option<PathBuf>,
) -> Result<u8> {
    let p = read_instance(instance)?;
    let reduced = reduced.as_deref().map(read_instance).transpose()?;
    let text = fs::read_to_string(certificate)
        .with_context(|| format!("reading {}", certificate.display()))?;
    let start = Instant::now();
    let cert = parse_certificate(&text).with_context(|| format!("parsing {}", certificate.display()))?;
    let opts = CheckOptions {
        deadline: limit.map(|s| start + Duration::from_secs_f64(s)),
        hook: None,
        expected: reduced.as_ref(),
    };
    let v = check_with(&p, &cert, opts);
    let (code, verdict) = match &v.outcome {
        Outcome::Accepted => (0, "accepted".to_string()),
        Outcome::Rejected { step, line, rule, reason } => {
            (1, format!("rejected at step {step} (line {line}, {rule}): {reason}"))
        }
        Outcome::TimedOut { step } => (1, format!("timed out at step {step}")),
    };
    println!("{verdict}");
    if let Some(path) = report {
        let json = serde_json::json!({ "verdict": verdict, "stats": v.stats });
        fs::write(path, format!("{json:#}\n"))?;
    }
    Ok(code)
}

fn cmd_gen(family: &str, size: usize, constraints: Option<usize>, count: usize, seed: u64, out: &Path) -> Result<()> {
    let fam: Family = family.parse().map_err(anyhow::Error::msg)?;
    fs::create_dir_all(out)?;
    for i in 0..count as u64 {
        let s = seed + i;
        let p = match (fam, constraints) {
            (Family::Mixed, Some(m)) => gen::mixed(size, m, s),
            _ => gen::generate(fam, size, s),
        };
        let path = out.join(format!("{family}-{size}-{s}.opb"));
        fs::write(&path, opb::write(&p))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn cmd_bench(corpus: &Path, matrix: Matrix, workers: usize, verify_limit: f64, run: &RunFlags) -> Result<()> {
    let base = run.config()?;
    let mut files: Vec<PathBuf> = fs::read_dir(corpus)
        .with_context(|| format!("reading {}", corpus.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "opb"))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no .opb files in {}", corpus.display());
    }
    let mut instances = Vec::new();
    for f in &files {
        let name = f.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        instances.push((name, read_instance(f)?));
    }
    let cell = |name: &str, config: RunConfig| Cell { name: name.into(), config };
    let cells = match matrix {
        Matrix::Default => vec![cell("default", base)],
        Matrix::PropCert => vec![
            cell("rup", RunConfig { prop_cert: PropCert::Rup, ..base.clone() }),
            cell("pol", RunConfig { prop_cert: PropCert::Pol, ..base }),
        ],
        Matrix::Obju => vec![
            cell("diff", RunConfig { obju_mode: ObjuMode::Diff, ..base.clone() }),
            cell("new", RunConfig { obju_mode: ObjuMode::New, ..base }),
        ],
    };
    let rep = bench::run(&instances, &cells, workers, verify_limit);
    print!("{}", rep.table());
    if let Some(path) = &run.report {
        fs::write(path, rep.to_json_lines())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Presolve { instance, output, run } => cmd_presolve(&instance, output, &run).map(|_| 0),
        Cmd::Check { instance, certificate, reduced, time_limit, report } => {
            cmd_check(&instance, &certificate, reduced, time_limit, report)
        }
        Cmd::Gen { family, size, constraints, count, seed, out } => {
            cmd_gen(&family, size, constraints, count, seed, &out).map(|_| 0)
        }
        Cmd::Bench { corpus, matrix, workers, verify_limit, run } => {
            cmd_bench(&corpus, matrix, workers, verify_limit, &run).map(|_| 0)
        }
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
