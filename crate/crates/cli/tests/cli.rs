use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SIGMA: &str = "[generate kind=kaehler_sigma n=3]\n";
const BAD_BOOK: &str = "[generate kind=book]\nsectors = 100 130 130\n";
const BOOK_120: &str = "[generate kind=book]\nsectors = 120 120 120\n";

fn calibset(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_calibset")).args(args).output().expect("binary runs")
}

fn scene(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn check_exit_codes() {
    let dir = TempDir::new().unwrap();
    let sigma = scene(&dir, "sigma.scene", SIGMA);
    let out = calibset(&["check", s(&sigma)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("edge.E.status"));

    let book = scene(&dir, "book.scene", BAD_BOOK);
    assert_eq!(code(&calibset(&["check", s(&book)])), 4);

    let bad = scene(&dir, "bad.scene", "[generate kind=kaehler_sigma n=3 color=red]\n");
    let out = calibset(&["check", s(&bad)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stdout).contains("line 1"));

    assert_eq!(code(&calibset(&["check", s(&dir.path().join("missing.scene"))])), 1);
}

#[test]
fn edge_off_the_boundary_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let text = "\
[form name=w]
dim = 3
coeff (1,3)=1

[form name=v]
dim = 3
coeff (2,3)=1

[face name=A]
patch = affine
origin = 0 0 0
du = 1 0 0
dv = 0 0 1
calibration = w

[face name=B]
patch = affine
origin = 0 0 0
du = 0 1 0
dv = 0 0 1
calibration = v

[edge name=X]
faces = A B
segment = (0.5,0,0) (0.5,0,1)
";
    let path = scene(&dir, "off.scene", text);
    let out = calibset(&["check", s(&path)]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn perturb_reports_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let sigma = scene(&dir, "sigma.scene", SIGMA);
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    for report in [&a, &b] {
        let out = calibset(&["perturb", s(&sigma), "--trials", "12", "--seed", "7", "--report", s(report)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    }
    let text = fs::read(&a).unwrap();
    assert_eq!(text, fs::read(&b).unwrap());
    let text = String::from_utf8(text).unwrap();
    assert!(text.contains("seed = 7\n"));
    assert!(text.contains("results.perturb.violations = 0\n"));
}

#[test]
fn attack_finds_the_unbalanced_book() {
    let dir = TempDir::new().unwrap();
    let book = scene(&dir, "book.scene", BAD_BOOK);
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    for report in [&a, &b] {
        let out = calibset(&["attack", s(&book), "--budget", "500", "--report", s(report)]);
        assert_eq!(code(&out), 5, "{}", String::from_utf8_lossy(&out.stdout));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let balanced = scene(&dir, "book120.scene", BOOK_120);
    assert_eq!(code(&calibset(&["attack", s(&balanced), "--budget", "250"])), 0);
}

#[test]
fn export_is_byte_stable() {
    let dir = TempDir::new().unwrap();
    let sigma = scene(&dir, "sigma.scene", SIGMA);
    let a = dir.path().join("a.obj");
    let b = dir.path().join("b.obj");
    for obj in [&a, &b] {
        assert_eq!(code(&calibset(&["export", s(&sigma), "--res", "16", "--obj", s(obj)])), 0);
    }
    let mesh = fs::read(&a).unwrap();
    assert_eq!(mesh, fs::read(&b).unwrap());
    let out = calibset(&["export", s(&sigma), "--res", "16"]);
    assert_eq!(code(&out), 0);
    assert_eq!(out.stdout, mesh);

    let text = String::from_utf8(mesh).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 3 * 16 * 16);
    assert_eq!(text.lines().filter(|l| l.starts_with("g ")).count(), 3);

    let projected = calibset(&["export", s(&sigma), "--res", "4", "--projection", "1 0 0 0; 0 1 0 0; 0 0 0 1"]);
    assert_eq!(code(&projected), 0);
    let skew = calibset(&["export", s(&sigma), "--res", "4", "--projection", "1 1 0 0; 0 1 0 0; 0 0 0 1"]);
    assert_eq!(code(&skew), 3);
}

#[test]
fn tune_balances_a_book() {
    let dir = TempDir::new().unwrap();
    let book = scene(&dir, "book.scene", "[generate name=b kind=book]\nazimuths = 90 210 300\n");
    let report = dir.path().join("tune.txt");
    let out = calibset(&[
        "tune", s(&book), "--param", "b.azimuths[2]", "--lo", "270", "--hi", "360", "--steps", "18", "--report", s(&report),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let text = fs::read_to_string(&report).unwrap();
    let value: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("results.tune.value = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((value - 330.0).abs() < 1e-6);

    let out = calibset(&["tune", s(&book), "--param", "height", "--lo", "0", "--hi", "1"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn comass_command() {
    let dir = TempDir::new().unwrap();
    let text = "[form name=big]\ndim = 4\ncoeff (1,2)=2 (3,4)=1\n\n[generate kind=kaehler_sigma n=2]\n";
    let path = scene(&dir, "forms.scene", text);
    let out = calibset(&["comass", s(&path), "--restarts", "8"]);
    assert_eq!(code(&out), 4);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("form.big.oracle"));
}
