use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use graphprox::io::{read_float_map, read_pgm};
use graphprox::{certificate, ProxProblem};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_graphprox"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn values(text: &str) -> Vec<f64> {
    text.lines()
        .map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn prox_two_node_fixture() {
    let d = TempDir::new().unwrap();
    let nodes = write(&d, "a.txt", "0 0\n1 2\n");
    let edges = write(&d, "e.txt", "0 1 1\n");
    let o = run(&["prox", "--nodes", s(&nodes), "--edges", s(&edges), "--lambda", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "0 0.5\n1 1.5\n");
}

#[test]
fn prox_one_based_and_trivial_cases() {
    let d = TempDir::new().unwrap();
    let nodes = write(&d, "a.txt", "# centres\n1 0.3\n2 -1.25\n3 4\n");
    let edges = write(&d, "e.txt", "1 2 1\n2 3 2\n");
    let o = run(&[
        "--one-based", "prox", "--nodes", s(&nodes), "--edges", s(&edges), "--lambda", "0",
    ]);
    assert_eq!(stdout(&o), "1 0.3\n2 -1.25\n3 4\n");

    let flat = write(&d, "f.txt", "0 1.5\n1 1.5\n2 1.5\n");
    let chain = write(&d, "c.txt", "0 1 1\n1 2 1\n");
    let o = run(&["prox", "--nodes", s(&flat), "--edges", s(&chain), "--lambda", "3"]);
    assert_eq!(stdout(&o), "0 1.5\n1 1.5\n2 1.5\n");
}

#[test]
fn prox_output_certifies() {
    let d = TempDir::new().unwrap();
    let centres = [0.4, -1.3, 2.2, 0.9, -0.2];
    let node_text: String = centres.iter().enumerate().map(|(i, a)| format!("{i} {a}\n")).collect();
    let edge_list = [(0, 1, 0.5), (1, 2, 1.0), (2, 3, 0.25), (3, 4, 2.0), (0, 4, 0.7)];
    let edge_text: String = edge_list.iter().map(|(i, j, w)| format!("{i} {j} {w}\n")).collect();
    let pen = write(&d, "p.txt", "2 0 -0.5 1 0.5 1.5\n4 0.3\n");
    let nodes = write(&d, "a.txt", &node_text);
    let edges = write(&d, "e.txt", &edge_text);
    let o = run(&[
        "prox", "--nodes", s(&nodes), "--edges", s(&edges), "--penalties", s(&pen), "--lambda",
        "0.8",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let u = values(&stdout(&o));

    let pens = graphprox::io::read_penalties(
        fs::read_to_string(&pen).unwrap().as_bytes(),
        Default::default(),
        5,
    )
    .unwrap();
    let p = ProxProblem::new(centres.to_vec(), edge_list.to_vec(), 0.8, pens).unwrap();
    // Output carries 12 significant digits.
    assert!(certificate(&p, &u) < 1e-7);
}

#[test]
fn prox_exit_codes() {
    let d = TempDir::new().unwrap();
    let nodes = write(&d, "a.txt", "0 0\n1 2\n");
    let negative = write(&d, "neg.txt", "0 1 -1\n");
    let o = run(&["prox", "--nodes", s(&nodes), "--edges", s(&negative), "--lambda", "1"]);
    assert_eq!(o.status.code(), Some(3));

    let garbled = write(&d, "bad.txt", "0 zero\n");
    assert_eq!(run(&["prox", "--nodes", s(&garbled), "--lambda", "1"]).status.code(), Some(2));
    let missing = d.path().join("missing.txt");
    assert_eq!(run(&["prox", "--nodes", s(&missing), "--lambda", "1"]).status.code(), Some(2));
    assert_eq!(run(&["prox", "--nodes", s(&nodes), "--lambda=-1"]).status.code(), Some(3));
    assert_eq!(run(&["prox", "--lambda", "1"]).status.code(), Some(2));
}

#[test]
fn denoise_limits() {
    let d = TempDir::new().unwrap();
    let pgm = write(&d, "in.pgm", "P2\n3 2\n255\n0 51 102\n153 204 255\n");
    let out = d.path().join("out.txt");
    let o = run(&["denoise", "--input", s(&pgm), "--lambda", "0", "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let input = read_pgm(&fs::read(&pgm).unwrap()).unwrap();
    let result = read_float_map(&fs::read(&out).unwrap()[..]).unwrap();
    assert_eq!(result, input);

    run(&["denoise", "--input", s(&pgm), "--lambda", "1000", "-o", s(&out)]);
    let result = read_float_map(&fs::read(&out).unwrap()[..]).unwrap();
    let mean = input.pixels.iter().sum::<f64>() / 6.0;
    assert!(result.pixels.iter().all(|v| (v - mean).abs() < 1e-6));

    let pair = write(&d, "pair.pgm", "P2\n1 2\n255\n0\n255\n");
    run(&["denoise", "--input", s(&pair), "--lambda", "0.5", "-o", s(&out)]);
    let result = read_float_map(&fs::read(&out).unwrap()[..]).unwrap();
    assert!((result.pixels[0] - 0.25).abs() < 1e-12 && (result.pixels[1] - 0.75).abs() < 1e-12);

    let img = d.path().join("out.pgm");
    run(&["denoise", "--input", s(&pair), "--lambda", "0.5", "-o", s(&img)]);
    let back = read_pgm(&fs::read(&img).unwrap()).unwrap();
    assert_eq!(back.pixels, vec![64.0 / 255.0, 191.0 / 255.0]);
}

#[test]
fn denoise_rejects_malformed_pgm() {
    let d = TempDir::new().unwrap();
    let out = d.path().join("o.txt");
    for body in ["P2\n2 2\n255\n0 1 2\n", "P2\n1 1\n70000\n0\n", "P7\n1 1\n255\n0\n"] {
        let bad = write(&d, "bad.pgm", body);
        let o = run(&["denoise", "--input", s(&bad), "--lambda", "1", "-o", s(&out)]);
        assert_eq!(o.status.code(), Some(2), "{body:?}");
    }
}

#[test]
fn path_fixtures() {
    let d = TempDir::new().unwrap();
    let nodes = write(&d, "q.txt", "0 0.5\n1 2.5\n");
    let edges = write(&d, "e.txt", "0 1 -1\n");
    let o = run(&[
        "path", "--nodes", s(&nodes), "--edges", s(&edges), "--beta", "1", "--beta", "0.5",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o),
        "# breakpoints\n0.5\n1.5\n# node r w flip\n0 0.5 1 0.5\n1 1.5 1 1.5\n\
         beta 1 U1 {0} U2 {0}\nbeta 0.5 U1 {} U2 {0}\n"
    );

    let single = write(&d, "s.txt", "0 -0.75\n");
    let o = run(&["path", "--nodes", s(&single)]);
    assert!(stdout(&o).starts_with("# breakpoints\n-0.75\n"));

    let fused = write(&d, "f.txt", "0 1\n1 1\n2 1\n");
    let chain = write(&d, "c.txt", "0 1 -1\n1 2 -1\n");
    let o = run(&["path", "--nodes", s(&fused), "--edges", s(&chain)]);
    let text = stdout(&o);
    let bps: Vec<&str> = text.lines().skip(1).take_while(|l| !l.starts_with('#')).collect();
    assert_eq!(bps.len(), 1);

    let positive = write(&d, "pos.txt", "0 1 0.5\n");
    let o = run(&["path", "--nodes", s(&nodes), "--edges", s(&positive)]);
    assert_eq!(o.status.code(), Some(3));
    let bad = write(&d, "bad.txt", "0 1 x\n");
    let o = run(&["path", "--nodes", s(&nodes), "--edges", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn path_beta_sets_match_breakpoints() {
    let d = TempDir::new().unwrap();
    let nodes = write(&d, "q.txt", "0 1 2\n1 -1 0.5\n2 0.5 1\n3 2 3\n");
    let edges = write(&d, "e.txt", "0 1 -0.5\n1 2 -1\n2 3 -0.25\n0 3 -2\n");
    let o = run(&["path", "--nodes", s(&nodes), "--edges", s(&edges)]);
    let text = stdout(&o);
    let bps: Vec<f64> = text
        .lines()
        .skip(1)
        .take_while(|l| !l.starts_with('#'))
        .map(|l| l.parse().unwrap())
        .collect();
    assert!(bps.windows(2).all(|w| w[0] < w[1]));
    // Sets change only at breakpoints: two queries inside the same gap agree.
    for w in bps.windows(2) {
        let (a, b) = (w[0] + 0.25 * (w[1] - w[0]), w[0] + 0.75 * (w[1] - w[0]));
        let o = run(&[
            "path", "--nodes", s(&nodes), "--edges", s(&edges), "--beta", &a.to_string(),
            "--beta", &b.to_string(),
        ]);
        let sets: Vec<String> = stdout(&o)
            .lines()
            .filter(|l| l.starts_with("beta"))
            .map(|l| l.splitn(3, ' ').nth(2).unwrap().to_owned())
            .collect();
        assert_eq!(sets[0], sets[1]);
    }
}

#[test]
fn fit_identity_and_convergence() {
    let d = TempDir::new().unwrap();
    let design = write(&d, "a.csv", "x0,x1\n1,0\n0,1\n");
    let response = write(&d, "y.csv", "y\n0\n2\n");
    let edges = write(&d, "e.txt", "0 1 1\n");
    let coef = d.path().join("coef.txt");
    let trace = d.path().join("trace.txt");
    let o = run(&[
        "fit", "--design", s(&design), "--response", s(&response), "--edges", s(&edges),
        "--lambda", "1", "--tol", "1e-15", "-o", s(&coef), "--trace", s(&trace),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let u = values(&fs::read_to_string(&coef).unwrap());
    assert!((u[0] - 0.5).abs() < 1e-6 && (u[1] - 1.5).abs() < 1e-6);
    let t: Vec<f64> = fs::read_to_string(&trace)
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    assert!(!t.is_empty() && t.windows(2).all(|w| w[1] <= w[0]));

    let o = run(&[
        "fit", "--design", s(&design), "--response", s(&response), "--lambda", "0", "-o",
        s(&coef),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let u = values(&fs::read_to_string(&coef).unwrap());
    assert!(u[0].abs() < 1e-6 && (u[1] - 2.0).abs() < 1e-6);

    let o = run(&[
        "fit", "--design", s(&design), "--response", s(&response), "--edges", s(&edges),
        "--lambda", "1", "--tol", "0", "--max-iter", "3", "-o", s(&coef),
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(values(&fs::read_to_string(&coef).unwrap()).len(), 2);

    let short = write(&d, "short.csv", "1\n");
    let o = run(&["fit", "--design", s(&design), "--response", s(&short), "--lambda", "1"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn fit_lambda_sweep_fuses() {
    let d = TempDir::new().unwrap();
    let design = write(&d, "a.csv", "1,0,0,0\n0,1,0,0\n0,0,1,0\n0,0,0,1\n1,1,0,0\n0,0,1,1\n");
    let response = write(&d, "y.csv", "0.1\n0.9\n2.2\n3.1\n1.1\n5.0\n");
    let edges = write(&d, "e.txt", "0 1 1\n1 2 1\n2 3 1\n");
    let mut counts = Vec::new();
    for lambda in ["0", "0.5", "2", "8", "50"] {
        let o = run(&[
            "fit", "--design", s(&design), "--response", s(&response), "--edges", s(&edges),
            "--lambda", lambda, "--tol", "1e-15", "--max-iter", "100000",
        ]);
        assert_eq!(o.status.code(), Some(0));
        let mut u = values(&stdout(&o));
        u.sort_by(f64::total_cmp);
        u.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        counts.push(u.len());
    }
    assert!(counts.windows(2).all(|w| w[1] <= w[0]), "{counts:?}");
    assert_eq!(counts.last(), Some(&1));
}

#[test]
fn check_runs_and_replays() {
    let o = run(&["check"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "check: n=8 trials=100 seed=0: 100 passed, 0 failed\n");
    let o = run(&["check", "--trials", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(run(&["check", "--n", "21"]).status.code(), Some(3));

    let d = TempDir::new().unwrap();
    let case = write(
        &d,
        "case.json",
        r#"{"seed": 9, "trial": 4, "diag": [0.5, 2.5, -1.0], "couplings": [[0, 1, -1.0], [1, 2, -0.5]],
            "weights": [1.0, 2.0, 0.5], "betas": [-1.0, 0.25, 1.0, 3.0],
            "prox": {"center": [0.0, 2.0], "edges": [[0, 1, 1.0]], "lambda": 1.0,
                     "penalties": [null, {"breakpoints": [0.0], "slopes": [-1.0, 1.0]}]}}"#,
    );
    let first = run(&["check", "--replay", s(&case)]);
    let second = run(&["check", "--replay", s(&case)]);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(stdout(&first), "replay trial 4 (seed 9): pass\n");

    let broken = write(&d, "broken.json", "{\"seed\": 1}");
    assert_eq!(run(&["check", "--replay", s(&broken)]).status.code(), Some(2));
}

#[test]
fn outputs_are_deterministic() {
    let d = TempDir::new().unwrap();
    let nodes = write(&d, "a.txt", "0 0.1\n1 0.7\n2 -0.4\n3 1.9\n");
    let edges = write(&d, "e.txt", "0 1 0.3\n1 2 0.6\n2 3 0.2\n3 0 0.9\n");
    let args = ["prox", "--nodes", s(&nodes), "--edges", s(&edges), "--lambda", "0.7"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
    let seeded = ["check", "--n", "6", "--trials", "5", "--seed", "42"];
    assert_eq!(run(&seeded).stdout, run(&seeded).stdout);
}

#[test]
fn thread_cap_is_honoured() {
    let d = TempDir::new().unwrap();
    let nodes = write(&d, "a.txt", "0 0\n1 2\n");
    let edges = write(&d, "e.txt", "0 1 1\n");
    let o = bin()
        .env("GRAPHPROX_THREADS", "1")
        .args(["prox", "--nodes", s(&nodes), "--edges", s(&edges), "--lambda", "1"])
        .output()
        .unwrap();
    assert_eq!(stdout(&o), "0 0.5\n1 1.5\n");
}
