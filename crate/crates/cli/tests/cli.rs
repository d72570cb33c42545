use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn augmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_augmix"))
        .args(args)
        .env("AUGMIX_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn p(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Values of `name value` lines in a report.
fn field(text: &str, name: &str) -> Option<f64> {
    text.lines().find_map(|l| {
        let mut it = l.split_whitespace();
        (it.next() == Some(name)).then(|| it.next().unwrap().parse().ok()).flatten()
    })
}

// min <diag(1, 2), X> s.t. tr X = 1: X = e1 e1^T, y = 1, Z = diag(0, 1).
const TOY: &str = "augmix-sdp 1
blocks 1 2
constraints 1 1
rhs 1
0 1 1 1 1
0 1 2 2 2
1 1 1 1 1
1 1 2 2 1
";

const TOY_KKT: &str = "augmix-solution 1
scalar double
status tol
blocks 1 2
ranks 2
constraints 1
v 1 1 1 0
v 1 2 0 0
y 1 1
";

#[test]
fn generate_reports_counts() {
    let dir = TempDir::new().unwrap();
    fs::write(p(&dir, "k3.txt"), "3 3\n1 2\n2 3\n1 3\n").unwrap();
    fs::write(p(&dir, "c5.txt"), "5 5\n1 2\n2 3\n3 4\n4 5\n5 1\n").unwrap();

    let out = augmix(&["generate", "rand", "--blocks", "30", "--m", "20", "--density", "1.0", "--seed", "7", "-o", s(&p(&dir, "r.sdp"))]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "n 30 m_a 20 m_b 0");

    let out = augmix(&["generate", "maxcut", "--graph", s(&p(&dir, "k3.txt")), "--triangles", "-o", s(&p(&dir, "k3.sdp"))]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "n 3 m_a 3 m_b 4");

    let out = augmix(&["generate", "theta", "--graph", s(&p(&dir, "c5.txt")), "--strengthened", "-o", s(&p(&dir, "c5.sdp"))]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "n 5 m_a 6 m_b 5");

    let out = augmix(&["generate", "rand", "--blocks", "2,3", "--m", "4", "-o", s(&p(&dir, "multi.sdp"))]);
    assert_eq!(stdout(&out).trim(), "n 2,3 m_a 4 m_b 0");
}

#[test]
fn generate_rejects_missing_parameters() {
    let dir = TempDir::new().unwrap();
    let out = augmix(&["generate", "rand", "--blocks", "5", "-o", s(&p(&dir, "x.sdp"))]);
    assert_eq!(out.status.code(), Some(1));
    let out = augmix(&["generate", "maxcut", "-o", s(&p(&dir, "x.sdp"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn solve_toy_and_check_agree() {
    let dir = TempDir::new().unwrap();
    fs::write(p(&dir, "toy.sdp"), TOY).unwrap();
    let sol = p(&dir, "toy.sol");
    let out = augmix(&["solve", s(&p(&dir, "toy.sdp")), "--tol", "1e-10", "-o", s(&sol)]);
    assert_eq!(out.status.code(), Some(0));
    let solved = stdout(&out);
    assert!(solved.contains("status tol"));
    assert!((field(&solved, "objective").unwrap() - 1.0).abs() < 1e-9);

    let out = augmix(&["check", s(&p(&dir, "toy.sdp")), s(&sol), "--threshold", "1e-10"]);
    assert_eq!(out.status.code(), Some(0));
    let checked = stdout(&out);
    for name in ["pinf", "gap", "dinf", "compl", "compl*"] {
        let a = field(&solved, name).unwrap();
        let b = field(&checked, name).unwrap();
        assert!(a < 1e-10, "{name} = {a}");
        assert!((a - b).abs() <= 1e-14, "{name}: solve {a}, check {b}");
    }
}

#[test]
fn check_exact_point_and_perturbed_duals() {
    let dir = TempDir::new().unwrap();
    fs::write(p(&dir, "toy.sdp"), TOY).unwrap();
    fs::write(p(&dir, "kkt.sol"), TOY_KKT).unwrap();
    let out = augmix(&["check", s(&p(&dir, "toy.sdp")), s(&p(&dir, "kkt.sol"))]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    for name in ["pinf", "gap", "dinf", "compl", "compl*", "max"] {
        assert_eq!(field(&text, name), Some(0.0), "{name}");
    }

    // y = 1 - 2e-5: Z = diag(2e-5, 1 + 2e-5) stays PSD, so the gap carries it.
    fs::write(p(&dir, "pert.sol"), TOY_KKT.replace("y 1 1", "y 1 0.99998")).unwrap();
    let out = augmix(&["check", s(&p(&dir, "toy.sdp")), s(&p(&dir, "pert.sol")), "--threshold", "1e-6"]);
    assert_eq!(out.status.code(), Some(2));
    let text = stdout(&out);
    let max = field(&text, "max").unwrap();
    assert!(max > 1e-6 && max < 1e-4, "max = {max}");

    // y = 1 + 1e-3 makes C - A^T y indefinite.
    fs::write(p(&dir, "indef.sol"), TOY_KKT.replace("y 1 1", "y 1 1.001")).unwrap();
    let out = augmix(&["check", s(&p(&dir, "toy.sdp")), s(&p(&dir, "indef.sol"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(field(&stdout(&out), "dinf").unwrap() > 0.0);
}

#[test]
fn check_rejects_shape_mismatch() {
    let dir = TempDir::new().unwrap();
    fs::write(p(&dir, "toy.sdp"), TOY).unwrap();
    let bad = TOY_KKT.replace("blocks 1 2", "blocks 1 3").replace("v 1 2 0 0", "v 1 2 0 0\nv 1 3 0 0");
    fs::write(p(&dir, "bad.sol"), bad).unwrap();
    let out = augmix(&["check", s(&p(&dir, "toy.sdp")), s(&p(&dir, "bad.sol"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn time_limit_exits_two() {
    let dir = TempDir::new().unwrap();
    let big = p(&dir, "big.sdp");
    let out = augmix(&["generate", "rand", "--blocks", "60", "--m", "40", "--seed", "3", "-o", s(&big)]);
    assert!(out.status.success());
    let out = augmix(&["solve", s(&big), "--time-limit", "0.01", "--tol", "1e-14", "-o", s(&p(&dir, "big.sol"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("status time"));
}

#[test]
fn iteration_limit_exits_two() {
    let dir = TempDir::new().unwrap();
    fs::write(p(&dir, "toy.sdp"), TOY).unwrap();
    let out = augmix(&["solve", s(&p(&dir, "toy.sdp")), "--max-iters", "1", "--tol", "1e-14", "-o", s(&p(&dir, "t.sol"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("status iter"));
}

#[test]
fn input_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let out = augmix(&["solve", s(&p(&dir, "missing.sdp"))]);
    assert_eq!(out.status.code(), Some(1));

    fs::write(p(&dir, "toy.sdp"), TOY).unwrap();
    let out = augmix(&["solve", s(&p(&dir, "toy.sdp")), "--tau", "0.5"]);
    assert_eq!(out.status.code(), Some(1));

    fs::write(p(&dir, "junk.sdp"), "not a problem\n").unwrap();
    let out = augmix(&["solve", s(&p(&dir, "junk.sdp"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sdpa_input_is_accepted() {
    let dir = TempDir::new().unwrap();
    // The toy problem in SDPA sparse form: F_0 is the cost.
    let dat = "1\n1\n2\n1\n0 1 1 1 1\n0 1 2 2 2\n1 1 1 1 1\n1 1 2 2 1\n";
    fs::write(p(&dir, "toy.dat-s"), dat).unwrap();
    let out = augmix(&["solve", s(&p(&dir, "toy.dat-s")), "--tol", "1e-10", "-o", s(&p(&dir, "toy.sol"))]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!((field(&stdout(&out), "objective").unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn warm_start_round_trip_and_dd_refinement() {
    let dir = TempDir::new().unwrap();
    fs::write(p(&dir, "toy.sdp"), TOY).unwrap();
    let ws = p(&dir, "toy.ws");
    let out = augmix(&["solve", s(&p(&dir, "toy.sdp")), "--tol", "1e-8", "--save-warm-start", s(&ws), "-o", s(&p(&dir, "a.sol"))]);
    assert_eq!(out.status.code(), Some(0));
    assert!(fs::read_to_string(&ws).unwrap().starts_with("augmix-warmstart 1\nscalar double"));

    let sol = p(&dir, "dd.sol");
    let out = augmix(&["solve", s(&p(&dir, "toy.sdp")), "--precision", "dd", "--warm-start", s(&ws), "--tol", "1e-20", "-o", s(&sol)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(&sol).unwrap().contains("scalar dd"));
    let out = augmix(&["check", s(&p(&dir, "toy.sdp")), s(&sol), "--threshold", "1e-18"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));

    // A double-double warm start cannot seed a binary64 solve.
    let dd_ws = p(&dir, "dd.ws");
    let out = augmix(&["solve", s(&p(&dir, "toy.sdp")), "--precision", "dd", "--warm-start", s(&ws), "--save-warm-start", s(&dd_ws), "-o", s(&sol)]);
    assert_eq!(out.status.code(), Some(0));
    let out = augmix(&["solve", s(&p(&dir, "toy.sdp")), "--warm-start", s(&dd_ws), "-o", s(&sol)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn two_stage_without_warm_start() {
    let dir = TempDir::new().unwrap();
    fs::write(p(&dir, "toy.sdp"), TOY).unwrap();
    let sol = p(&dir, "dd.sol");
    let out = augmix(&["solve", s(&p(&dir, "toy.sdp")), "--precision", "dd", "--tol", "1e-20", "-o", s(&sol)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    for name in ["pinf", "gap", "dinf", "compl"] {
        assert!(field(&text, name).unwrap() < 1e-18, "{name}");
    }
}
