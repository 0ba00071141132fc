use std::process::{Command, Output};

use ncl::manifest::TaxManifest;
use ncl::RunRecord;

fn ncl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncl"))
        .args(args)
        .env_remove("NCL_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn solves_a_catalog_problem() {
    let out = ncl(&["solve", "--problem", "qp2", "--solver", "ncl"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("||r||"), "outer log header missing:\n{text}");
    let last_row = text
        .lines()
        .rfind(|l| l.trim_start().starts_with(|c: char| c.is_ascii_digit()))
        .unwrap();
    let r: f64 = last_row.split_whitespace().nth(3).unwrap().parse().unwrap();
    assert!(r <= 1e-6, "final ‖r‖ {r:e}");
    assert!(text.contains("status    first_order"));
}

#[test]
fn degenerate_problem_exits_zero() {
    let out = ncl(&["solve", "--problem", "licq-dup", "--solver", "ncl", "--quiet"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn unknown_problem_exits_two() {
    let out = ncl(&["solve", "--problem", "bad", "--solver", "ncl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown problem"));
}

#[test]
fn syntax_error_exits_two_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.nl");
    std::fs::write(&path, "var x;\nminimize x^2 +;\n").unwrap();
    let out = ncl(&["solve", "--model", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("broken.nl:2:"));
}

#[test]
fn solver_failure_exits_three() {
    // One interior-point iteration is not enough.
    let out = ncl(&["solve", "--problem", "hs71", "--solver", "ip", "--max-iter", "1", "-q"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).contains("max_iter"));
}

#[test]
fn model_file_and_json_record() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("disc.nl");
    std::fs::write(&model, "var x; var y;\nminimize x + y;\nsubject to x^2 + y^2 <= 2;\n").unwrap();
    let json = dir.path().join("run.json");
    let out = ncl(&[
        "solve",
        "--model",
        model.to_str().unwrap(),
        "--solver",
        "ip",
        "--json",
        json.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let rec: RunRecord = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(rec.problem, "disc");
    assert!((rec.f + 2.0).abs() < 1e-6);
    assert!(rec.iter > 0 && rec.n_cons > 0);
}

#[test]
fn tax_manifest_reproduces_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("small.toml");
    let out = ncl(&[
        "tax", "--na", "2", "--nb", "2", "--nc", "1", "--nd", "1", "--ne", "1", "--seed", "7", "--emit",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("T = 4, n = 8, m_ic = 12, m = 13"));
    let m = TaxManifest::read(&path).unwrap();
    assert_eq!(m.config.seed, 7);
    let out = ncl(&["solve", "--model", path.to_str().unwrap(), "-q"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
}

#[test]
fn seed_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("env.toml");
    let status = Command::new(env!("CARGO_BIN_EXE_ncl"))
        .args(["tax", "--na", "1", "--nb", "1", "--nc", "1", "--nd", "1", "--ne", "2", "--emit"])
        .arg(&path)
        .env("NCL_SEED", "99")
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(TaxManifest::read(&path).unwrap().config.seed, 99);
}

#[test]
fn suite_and_profile_commands() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("nls.csv");
    let out = ncl(&[
        "suite",
        "--tag",
        "nls",
        "--solvers",
        "ip-direct,ncl-nls",
        "--workers",
        "2",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let svg = dir.path().join("prof.svg");
    let out = ncl(&[
        "profile",
        "--input",
        csv.to_str().unwrap(),
        "--metric",
        "cons",
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let first = std::fs::read(&svg).unwrap();
    // Re-rendering from the curve file gives the same bytes.
    let curves = dir.path().join("prof.csv");
    let again = dir.path().join("again.svg");
    let out = ncl(&[
        "profile",
        "--curves",
        curves.to_str().unwrap(),
        "--title",
        "performance profile (cons)",
        "--out",
        again.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read(&again).unwrap(), first);
}

#[test]
fn empty_suite_is_an_input_error() {
    let out = ncl(&["suite", "--tag", "no-such-tag"]);
    assert_eq!(out.status.code(), Some(2));
}
