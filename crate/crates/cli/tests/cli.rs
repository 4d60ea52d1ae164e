use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const EX41: &str = "FIELD poly\n0 0 1/200\n0 2 -1/2\n4 0 -1\n2 2 6\n0 4 -1\n";
const BBOX41: &str = "--bbox=-0.3,0.3,-0.12,0.12";

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_planar-morse")).current_dir(dir).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn analyze_quartic_maximum() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "ex41.poly", EX41);
    let out = run(d.path(), &["analyze", "ex41.poly", "--f", "1", BBOX41, "--domain", "positive"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let pts = v["result"]["critical_points"].as_array().unwrap();
    assert_eq!(pts.len(), 1);
    assert_eq!(pts[0]["class"], "degenerate_max");
    assert_eq!(pts[0]["index"]["value"], 1);
    assert_eq!(v["result"]["verified_solution"], true);
    assert_eq!(v["manifest"]["command"], "analyze");
    assert_eq!(v["manifest"]["threads"], 1);
    assert!(v["manifest"]["artifact_version"].is_string());
}

#[test]
fn analyze_harmonic_cubic() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "h3.poly", "FIELD poly\n3 0 1\n1 2 -3\n");
    let out = run(d.path(), &["analyze", "h3.poly"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let pts = v["result"]["critical_points"].as_array().unwrap();
    assert_eq!(pts.len(), 1);
    assert_eq!(pts[0]["index"]["value"], -2);
}

#[test]
fn empty_domain_is_an_input_error() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "e.grid", "FIELD grid\nGRID2D 3 3 0 0 0.5 0.5\nnan nan nan\nnan nan nan\nnan nan nan\n");
    let out = run(d.path(), &["analyze", "e.grid"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn parse_errors_exit_two() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "bad.poly", "FIELD poly\n1 x 3\n");
    assert_eq!(run(d.path(), &["analyze", "bad.poly"]).status.code(), Some(2));
    assert_eq!(run(d.path(), &["analyze", "missing.poly"]).status.code(), Some(2));
    assert_eq!(run(d.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn solve_torsion_square() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "sq.cfg", "domain = square\nh = 1/32\nf = 1\n");
    let out = run(d.path(), &["solve", "sq.cfg", "--out", "o", "--spectrum", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(d.path().join("o/solve.json")).unwrap()).unwrap();
    assert!(v["result"]["residual"].as_f64().unwrap() <= 1e-10);
    assert_eq!(v["result"]["spectrum"]["morse_index"], 0);
    assert!(d.path().join("o/solution.grid").exists());
    // the written grid analyzes as a verified solution with a single maximum
    let out = run(d.path(), &["analyze", "o/solution.grid", "--f", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["result"]["verified_solution"], true);
    let pts = v["result"]["critical_points"].as_array().unwrap();
    assert_eq!(pts.len(), 1);
    assert_eq!(pts[0]["class"], "nondegenerate_max");
}

#[test]
fn solve_disk_then_analyze() {
    // cells next to a curved boundary carry off-boundary Dirichlet values and
    // must not produce critical points
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "disk.cfg", "domain = disk\nh = 1/64\nf = 1\n");
    let out = run(d.path(), &["--out", "o", "solve", "disk.cfg"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(d.path(), &["analyze", "o/solution.grid", "--f", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["result"]["verified_solution"], true);
    let pts = v["result"]["critical_points"].as_array().unwrap();
    assert_eq!(pts.len(), 1);
    assert_eq!(pts[0]["class"], "nondegenerate_max");
}

#[test]
fn solve_quartic_domain_matches_closed_form() {
    let d = tempfile::tempdir().unwrap();
    write(
        d.path(),
        "q.cfg",
        "domain = (- 0.005 (+ (* 0.5 (^ y 2)) (^ x 4) (* -6 (^ x 2) (^ y 2)) (^ y 4)))\nbbox = -0.3 0.3 -0.12 0.12\nh = 1/128\nf = 1\n",
    );
    let out = run(d.path(), &["solve", "q.cfg", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(d.path().join("o/solution.grid")).unwrap();
    let mut lines = text.lines().skip(1);
    let head: Vec<f64> = lines.next().unwrap().split_whitespace().skip(1).map(|t| t.parse().unwrap()).collect();
    let (nx, x0, y0, h) = (head[0] as usize, head[2], head[3], head[4]);
    let mut worst = 0.0f64;
    for (k, tok) in lines.flat_map(str::split_whitespace).enumerate() {
        let v: f64 = tok.parse().unwrap();
        if v.is_nan() {
            continue;
        }
        let (x, y) = (x0 + (k % nx) as f64 * h, y0 + (k / nx) as f64 * h);
        let exact = 1.0 / 200.0 - (0.5 * y * y + x.powi(4) - 6.0 * x * x * y * y + y.powi(4));
        worst = worst.max((v - exact).abs());
    }
    // O(h²) with a modest constant
    assert!(worst < 50.0 * h * h, "{worst}");
}

#[test]
fn bad_config_key_exits_two() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "bad.cfg", "domain = square\nh = 1/32\nbogus = 1\n");
    let out = run(d.path(), &["solve", "bad.cfg", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn levelset_quartic_curvature() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "ex41.poly", EX41);
    let out = run(
        d.path(),
        &["levelset", "ex41.poly", "--levels", "0.1,0.3,0.5,0.7,0.9", "--fractions", BBOX41, "--domain", "positive", "--out", "o"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(d.path().join("o/levelset.json")).unwrap()).unwrap();
    let levels = v["result"]["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 5);
    for l in levels {
        assert!(l["k_min"].as_f64().unwrap() < 0.0);
    }
    let csv = fs::read_to_string(d.path().join("o/curve_0_0.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("level,x,y,k"));
    assert!(csv.lines().count() > 10);
}

#[test]
fn levelset_paraboloid_and_out_of_range() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "p.poly", "FIELD poly\n2 0 1\n0 2 1\n");
    let out = run(d.path(), &["levelset", "p.poly", "--levels", "1", "--bbox=-2,2,-2,2", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&fs::read_to_string(d.path().join("o/levelset.json")).unwrap()).unwrap();
    assert!((v["result"]["levels"][0]["k_min"].as_f64().unwrap() + 1.0).abs() < 1e-6);
    let out = run(d.path(), &["levelset", "p.poly", "--levels", "100", "--bbox=-2,2,-2,2", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn index_command() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "h4.poly", "FIELD poly\n4 0 1\n2 2 -6\n0 4 1\n");
    let out = run(d.path(), &["index", "h4.poly", "--at", "0,0"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["result"]["value"], -3);
    let out = run(d.path(), &["index", "h4.poly", "--at", "0,0", "--radius", "0.5"]);
    assert_eq!(json(&out)["result"]["value"], -3);
}

#[test]
fn replicate_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run(d.path(), &["replicate", "example-4.2"]).status.code(), Some(0));
    assert_eq!(run(d.path(), &["replicate", "radial-bessel"]).status.code(), Some(0));
    assert_eq!(run(d.path(), &["replicate", "unknown"]).status.code(), Some(2));
}

#[test]
fn replicate_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let strip = |out: &Output| {
        let mut v = json(out);
        v["manifest"]["wall_clock_seconds"] = Value::Null;
        serde_json::to_string(&v).unwrap()
    };
    let a = run(d.path(), &["replicate", "example-4.1"]);
    let b = run(d.path(), &["replicate", "example-4.1"]);
    assert_eq!(strip(&a), strip(&b));
    // the case report itself is byte-identical, including at 4 threads
    let c = run(d.path(), &["--threads", "4", "replicate", "example-4.1"]);
    assert_eq!(json(&a)["result"], json(&c)["result"]);
}

#[test]
fn verify_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "ex41.poly", EX41);
    let out = run(d.path(), &["verify", "ex41.poly", "--f", "1", BBOX41, "--domain", "positive"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["result"]["verified_solution"], true);
    // not a solution of -Δu = 1
    write(d.path(), "x.poly", "FIELD poly\n2 0 1\n0 2 1\n");
    assert_eq!(run(d.path(), &["verify", "x.poly", "--f", "1"]).status.code(), Some(2));
    assert_eq!(run(d.path(), &["verify", "x.poly"]).status.code(), Some(2));
}

#[test]
fn violation_on_verified_solution_exits_one() {
    // x³ - y²/2 has -Δu = 1 - 6x, so it passes the gate only when the
    // residual tolerance is opened by hand; the chain identity then fails
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "v.poly", "FIELD poly\n3 0 1\n0 2 -1/2\n");
    let args = ["analyze", "v.poly", "--f", "1", "--bbox=-0.1,0.1,-0.1,0.1"];
    let out = run(d.path(), &[&args[..], &["--tol-residual", "1e6"]].concat());
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["result"]["critical_points"][0]["theorem_violations"][0], "chain_identity");
    // with the default gate the same field is unverified and nothing is enforced
    let out = run(d.path(), &args);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["result"]["verified_solution"], false);
}
