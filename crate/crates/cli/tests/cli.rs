use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const FIG1: &str = "min: +1 x1 +1 x2 ;\n+1 x1 +1 x2 -1 x3 -1 x4 = 1 ;\n-1 x1 +1 x5 >= 0 ;\n";

fn certpre(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_certpre"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn presolve_then_check_accepts() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("fig1.opb"), FIG1).unwrap();
    let o = certpre(dir.path(), &["presolve", "fig1.opb", "--obju-mode", "new"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["fig1.pbp", "fig1.reduced.opb", "fig1.postsolve"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let o = certpre(dir.path(), &["check", "fig1.opb", "fig1.pbp"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("accepted"));
}

#[test]
fn mutated_certificate_is_rejected_with_step() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("fig1.opb"), FIG1).unwrap();
    let cfg = "techniques = [\"implied_free\"]\nobju_mode = \"new\"\n";
    fs::write(dir.path().join("run.toml"), cfg).unwrap();
    let o = certpre(dir.path(), &["presolve", "fig1.opb", "--config", "run.toml"]);
    assert_eq!(code(&o), 0);
    let cert = fs::read_to_string(dir.path().join("fig1.pbp")).unwrap();
    let bad = cert.replacen("delc 2 ; x1 -> 0", "delc 2 ; x1 -> 1", 1);
    assert_ne!(bad, cert);
    fs::write(dir.path().join("bad.pbp"), bad).unwrap();
    let o = certpre(dir.path(), &["check", "fig1.opb", "bad.pbp"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("rejected at step"));
}

#[test]
fn truncated_or_missing_files_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("fig1.opb"), FIG1).unwrap();
    certpre(dir.path(), &["presolve", "fig1.opb"]);
    let cert = fs::read_to_string(dir.path().join("fig1.pbp")).unwrap();
    fs::write(dir.path().join("cut.pbp"), &cert[..cert.len() / 2]).unwrap();
    assert_eq!(code(&certpre(dir.path(), &["check", "fig1.opb", "cut.pbp"])), 2);
    assert_eq!(code(&certpre(dir.path(), &["check", "nope.opb", "cut.pbp"])), 2);
}

#[test]
fn no_proof_writes_stats_only() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("fig1.opb"), FIG1).unwrap();
    let o = certpre(dir.path(), &["presolve", "fig1.opb", "--no-proof", "--report", "s.json"]);
    assert_eq!(code(&o), 0);
    assert!(!dir.path().join("fig1.pbp").exists());
    let s = fs::read_to_string(dir.path().join("s.json")).unwrap();
    assert!(s.contains("\"transactions\""));
}

#[test]
fn gen_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["gen", "--seed", "7", "--size", "10", "--constraints", "8"];
    certpre(dir.path(), &[&args[..], &["--out", "a"]].concat());
    certpre(dir.path(), &[&args[..], &["--out", "b"]].concat());
    let a = fs::read(dir.path().join("a/mixed-10-7.opb")).unwrap();
    let b = fs::read(dir.path().join("b/mixed-10-7.opb")).unwrap();
    assert_eq!(a, b);
    assert!(String::from_utf8_lossy(&a).contains("#variable= 10 #constraint= 8"));
}

#[test]
fn pol_certificates_are_larger_and_both_verify() {
    let dir = tempfile::tempdir().unwrap();
    certpre(dir.path(), &["gen", "--family", "propagation", "--size", "15", "--out", "."]);
    let mut sizes = Vec::new();
    for mode in ["rup", "pol"] {
        let out = format!("run-{mode}");
        let o = certpre(
            dir.path(),
            &["presolve", "propagation-15-0.opb", "--prop-cert", mode, "-o", &out],
        );
        assert_eq!(code(&o), 0);
        let cert = format!("{out}.pbp");
        assert_eq!(code(&certpre(dir.path(), &["check", "propagation-15-0.opb", &cert])), 0);
        sizes.push(fs::metadata(dir.path().join(&cert)).unwrap().len());
    }
    assert!(sizes[1] > sizes[0], "{sizes:?}");
}

#[test]
fn bench_toy_corpus_has_rows_and_relative_column() {
    let dir = tempfile::tempdir().unwrap();
    certpre(dir.path(), &["gen", "--size", "6", "--count", "2", "--out", "corpus"]);
    let o = certpre(
        dir.path(),
        &["bench", "corpus", "--matrix", "prop-cert", "--workers", "2", "--report", "rows.jsonl"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.contains("relative"));
    let rows = fs::read_to_string(dir.path().join("rows.jsonl")).unwrap();
    assert_eq!(rows.lines().filter(|l| l.contains("\"kind\":\"row\"")).count(), 4);
    assert_eq!(rows.lines().filter(|l| l.contains("\"kind\":\"aggregate\"")).count(), 2);
}

#[test]
fn check_against_reduced_instance() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("fig1.opb"), FIG1).unwrap();
    assert_eq!(code(&certpre(dir.path(), &["presolve", "fig1.opb"])), 0);
    let good = ["check", "fig1.opb", "fig1.pbp", "--reduced", "fig1.reduced.opb"];
    assert_eq!(code(&certpre(dir.path(), &good)), 0);
    let wrong = ["check", "fig1.opb", "fig1.pbp", "--reduced", "fig1.opb"];
    let o = certpre(dir.path(), &wrong);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("end"));
}
