use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn kgcode(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgcode"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn fixture(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "fixtures", "trees", name]
        .iter()
        .collect();
    p.to_str().unwrap().to_string()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

#[test]
fn gacs_round_trip_of_64_bits() {
    let dir = TempDir::new().unwrap();
    let source = "1100100100001111110110101010001000100001011010001100001000110100";
    let src = write(&dir, "x.txt", &format!("{source}\n"));
    let code = path(&dir, "code.txt");
    let back = path(&dir, "back.txt");
    let e = kgcode(&["encode", "--source", &src, "--schedule", "gacs", "--out", &code]);
    assert!(e.status.success(), "{}", stderr(&e));
    let text = fs::read_to_string(&code).unwrap();
    // 64 bits pad to 66 = M(11); the code is L(11) = 128 bits long
    assert!(text.starts_with("bits=64\nlevels=11\nschedule=gacs\n"));
    let code_line = text.lines().nth(3).unwrap();
    assert_eq!(code_line.len(), "code=".len() + 128);
    let d = kgcode(&["decode", "--code", &code, "--out", &back]);
    assert!(d.status.success(), "{}", stderr(&d));
    assert_eq!(fs::read(&back).unwrap(), fs::read(&src).unwrap());
}

#[test]
fn round_trip_through_a_thinned_class() {
    let dir = TempDir::new().unwrap();
    // depth 19, everything under 0000 and 11 removed: measure 11/16
    let class = write(&dir, "p.txt", "depth 19\n0001*\n001*\n01*\n10*\n");
    let src = write(&dir, "x.txt", "1011\n");
    let code = path(&dir, "code.txt");
    let back = path(&dir, "back.txt");
    let e = kgcode(&["encode", "--class", &class, "--source", &src, "--schedule", "kucera", "--out", &code]);
    assert!(e.status.success(), "{}", stderr(&e));
    let d = kgcode(&["decode", "--code", &code, "--class", &class, "--out", &back]);
    assert!(d.status.success(), "{}", stderr(&d));
    assert_eq!(fs::read_to_string(&back).unwrap(), "1011\n");
}

#[test]
fn malformed_class_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let class = write(&dir, "bad.txt", "depth 3\n000\n01\n");
    let o = kgcode(&["prune", "--class", &class, "--levels", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr(&o), "error: wrong-length member at line 3\n");
}

#[test]
fn missing_file_is_an_input_error() {
    let o = kgcode(&["prune", "--class", "/nonexistent/p.txt", "--levels", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error: /nonexistent/p.txt"));
}

#[test]
fn budget_violation_exits_3() {
    let dir = TempDir::new().unwrap();
    let class = write(&dir, "thin.txt", "depth 4\n0000\n");
    let o = kgcode(&["encode", "--class", &class, "--random", "1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("error: measure budget exhausted"));
}

#[test]
fn verify_reports() {
    let dir = TempDir::new().unwrap();
    let class = write(&dir, "p.txt", "depth 8\n000*\n0010*\n01*\n1*\n");
    let pruned = path(&dir, "pstar.txt");
    let p = kgcode(&["prune", "--class", &class, "--schedule", "kucera", "--levels", "2", "--out", &pruned]);
    assert!(p.status.success(), "{}", stderr(&p));
    let v = kgcode(&["verify", "--class", &pruned, "--schedule", "kucera", "--levels", "2"]);
    assert_eq!(stdout(&v), "extension: pass\ndensity: pass\n");
    assert_eq!(v.status.code(), Some(0));

    // 10 is a block boundary with one member out of four below it
    let failing = write(&dir, "f.txt", "depth 4\n00*\n01*\n1000\n11*\n");
    let v = kgcode(&["verify", "--class", &failing, "--schedule", "custom:m=1,1;l=2,2", "--levels", "2"]);
    assert_eq!(v.status.code(), Some(3));
    assert_eq!(
        stdout(&v),
        "extension: fail at level 1 node 10: 1 extendible extensions, 2 needed\n\
         density: fail at level 1 node 10: density 1/2^2 below 1/2^1\n"
    );

    let full = write(&dir, "full.txt", "depth 6\n-*\n");
    let v = kgcode(&["verify", "--class", &full, "--schedule", "kucera", "--levels", "1"]);
    assert_eq!(v.status.code(), Some(0));
}

#[test]
fn verify_measure_condition() {
    let o = kgcode(&["verify", "--tree", &fixture("seven-of-sixteen.tree")]);
    assert_eq!(stdout(&o), "measure condition: pass: sum 3/2^3 against measure 7/2^4\n");
    let o = kgcode(&["verify", "--tree", &fixture("empty-top.tree")]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn sweep_of_height_two_agrees() {
    let o = kgcode(&["sweep", "--levels", "2", "--min-instances", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = stdout(&o);
    assert!(csv.lines().count() > 100);
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[1], f[2], "{line}");
    }
}

#[test]
fn fixture_verdicts() {
    let mut args = vec!["sweep".to_string(), "--tree".to_string()];
    for name in ["a", "b", "c", "d", "e", "f", "g", "h"] {
        args.push(fixture(&format!("labelable-{name}.tree")));
    }
    for name in ["a", "b", "c", "d"] {
        args.push(fixture(&format!("unlabelable-{name}.tree")));
    }
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = kgcode(&args);
    assert!(o.status.success());
    let verdicts: Vec<String> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().to_string())
        .collect();
    let expected: Vec<String> = [true; 8]
        .iter()
        .chain([false; 4].iter())
        .map(bool::to_string)
        .collect();
    assert_eq!(verdicts, expected);
}

#[test]
fn empty_sweep_is_header_only() {
    let o = kgcode(&["sweep", "--levels", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "instance_hash,labelable,reducible,condition_satisfied\n");
}

#[test]
fn report_rows() {
    let o = kgcode(&["report", "--schedule", "kucera", "--n-max", "1"]);
    assert_eq!(
        stdout(&o),
        "n,use,redundancy,bound_nlogn,bound_sqrtnlogn\n0,3,3,0.000000,0.000000\n1,8,7,0.000000,0.000000\n"
    );
    let o = kgcode(&["report", "--schedule", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn label_and_validate() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "l.txt");
    let o = kgcode(&["label", "--tree", &fixture("labelable-c.tree"), "--out", &out]);
    assert!(o.status.success());
    let v = kgcode(&["label", "--tree", &fixture("labelable-c.tree"), "--labelling", &out]);
    // subjects repeat across chains, which is only advisory
    assert!(stdout(&v).starts_with("valid\ncomplete: true\nadvisory: duplicate subject"));

    let o = kgcode(&["label", "--tree", &fixture("unlabelable-a.tree")]);
    assert_eq!(stdout(&o), "# not fully labelable\n");

    let bad = write(&dir, "bad.txt", "0 → 01\n");
    let v = kgcode(&["label", "--tree", &fixture("labelable-a.tree"), "--labelling", &bad]);
    assert_eq!(v.status.code(), Some(3));
    assert!(stdout(&v).starts_with("invalid: condition (2) fails at 0"));
}

#[test]
fn splice_check_lists_steps() {
    let o = kgcode(&["splice-check", "--tree", &fixture("labelable-c.tree")]);
    let text = stdout(&o);
    assert!(text.starts_with("reducible: true\nsplices: "));
    assert!(text.contains("labelable: true\n"));
    let o = kgcode(&["splice-check", "--tree", &fixture("unlabelable-b.tree")]);
    assert!(stdout(&o).starts_with("reducible: false\nsplices: 0\n"));
    assert!(o.status.success());
}

#[test]
fn vt_runs_hold_their_bounds() {
    let o = kgcode(&["vt-run", "--runs", "10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = stdout(&o);
    assert_eq!(csv.lines().count(), 11);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true,true")));
}

fn same_bytes(args: &[&str], dir: &Path) {
    let a = dir.join("a.out");
    let b = dir.join("b.out");
    for target in [&a, &b] {
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--out", target.to_str().unwrap()]);
        assert!(kgcode(&full).status.success(), "{args:?}");
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap(), "{args:?}");
}

#[test]
fn outputs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    same_bytes(&["sweep", "--levels", "3", "--min-instances", "800", "--seed", "7"], dir.path());
    same_bytes(&["vt-run", "--runs", "5", "--seed", "3"], dir.path());
    same_bytes(&["encode", "--random", "20", "--seed", "3"], dir.path());
    same_bytes(&["report", "--schedule", "gacs", "--n-max", "300"], dir.path());
}
