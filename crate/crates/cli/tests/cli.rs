use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fsparse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fsparse")).args(args).output().expect("spawn fsparse")
}

fn ok_json(args: &[&str]) -> Value {
    let out = fsparse(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_sparse_and_dno_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let sp = dir.path().join("sp.json");
    assert!(fsparse(&["gen", "sparse", "--n", "10", "--s", "8", "--seed", "1", "--output", path(&sp)])
        .status
        .success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&sp).unwrap()).unwrap();
    assert_eq!(v["repr"], "sparse");
    assert_eq!(v["coeffs"].as_array().unwrap().len(), 8);
    let meta: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sp.json.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["kind"], "sparse");
    assert_eq!(meta["seed"], 1);

    let out = fsparse(&["gen", "dno", "--n", "12"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["repr"], "dense");
    assert_eq!(v["values"].as_array().unwrap().len(), 4096);
}

#[test]
fn gen_is_byte_reproducible() {
    let a = fsparse(&["gen", "noisy", "--n", "9", "--s", "4", "--rho", "0.2", "--seed", "5"]);
    let b = fsparse(&["gen", "noisy", "--n", "9", "--s", "4", "--rho", "0.2", "--seed", "5"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = fsparse(&["gen", "noisy", "--n", "9", "--s", "4", "--rho", "0.2", "--seed", "6"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn estimate_records_budget_and_reproduce() {
    let dir = tempfile::tempdir().unwrap();
    let sp = dir.path().join("sp.json");
    fsparse(&["gen", "sparse", "--n", "10", "--s", "8", "--seed", "2", "--output", path(&sp)]);
    let args = ["estimate", "--input", path(&sp), "--s", "8", "--eps", "0.5", "--seed", "4"];
    let r = ok_json(&args);
    assert_eq!(r["distance"], 0.0);
    let budget = 2 * r["gamma"].as_u64().unwrap() * r["ell"].as_u64().unwrap() * r["r"].as_u64().unwrap();
    assert_eq!(r["queries_used"].as_u64().unwrap(), budget);
    let again = ok_json(&args);
    assert_eq!(r["xi"], again["xi"]);

    let r = ok_json(&[
        "estimate",
        "--input",
        path(&sp),
        "--s",
        "8",
        "--eps",
        "0.5",
        "--gamma-mult",
        "2",
        "--ell",
        "3",
        "--reps",
        "1",
        "--d-override",
        "4",
    ]);
    assert_eq!(r["d"], 4);
    assert_eq!(r["gamma"], 256);
    assert_eq!(r["queries_used"], 2 * 256 * 3);
}

#[test]
fn flat_instance_estimate_and_test() {
    let dir = tempfile::tempdir().unwrap();
    let fl = dir.path().join("flat.json");
    fsparse(&["gen", "flat", "--n", "10", "--s", "64", "--seed", "3", "--output", path(&fl)]);
    let r = ok_json(&["estimate", "--input", path(&fl), "--s", "64", "--eps", "0.2", "--seed", "1"]);
    assert!((r["distance"].as_f64().unwrap() - 0.9375).abs() <= 0.2);

    let t = ok_json(&["test", "--input", path(&fl), "--s", "64", "--eps", "0.5", "--norm", "1"]);
    assert_eq!(t["verdict"], "reject");

    let out = fsparse(&["test", "--input", path(&fl), "--s", "64", "--eps", "0.5"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--norm"));

    let t = ok_json(&["test", "--input", path(&fl), "--s", "64", "--eps", "0.5", "--measure-norm"]);
    let budget = 2 * t["gamma"].as_u64().unwrap() * t["ell"].as_u64().unwrap() * t["r"].as_u64().unwrap();
    assert_eq!(t["queries_used"].as_u64().unwrap(), budget + 10_000);
}

#[test]
fn sparse_instance_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let sp = dir.path().join("sp.json");
    fsparse(&["gen", "sparse", "--n", "10", "--s", "4", "--seed", "8", "--output", path(&sp)]);
    let t = ok_json(&["test", "--input", path(&sp), "--s", "4", "--eps", "0.5", "--norm", "1"]);
    assert_eq!(t["verdict"], "accept");
}

#[test]
fn exact_command() {
    let dir = tempfile::tempdir().unwrap();
    let sp = dir.path().join("sp.json");
    fsparse(&["gen", "sparse", "--n", "8", "--s", "5", "--seed", "1", "--output", path(&sp)]);
    let r = ok_json(&["exact", "--input", path(&sp), "--s", "5"]);
    assert!(r["distance"].as_f64().unwrap().abs() <= 1e-12);
    assert!(r.get("hashing_error").is_none());
    let r = ok_json(&["exact", "--input", path(&sp), "--s", "5", "--hash-d", "3", "--hash-seed", "2"]);
    assert!(r["hashing_error"].as_f64().unwrap() >= 0.0);

    let big = dir.path().join("big.json");
    std::fs::write(&big, r#"{"n":40,"repr":"sparse","coeffs":[{"alpha":3,"value":1.0}]}"#).unwrap();
    let out = fsparse(&["exact", "--input", path(&big), "--s", "1"]);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}

#[test]
fn experiment_csv_schema() {
    let out = fsparse(&["experiment", "query-scaling", "--n", "12", "--s", "8,16,32,64", "--eps", "0.25"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().unwrap().clone();
    let col = header.iter().position(|h| h == "queries_used").unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 5);
    assert_eq!(&rows[4][0], "summary");
    let counts: Vec<u64> = rows[..4].iter().map(|r| r[col].parse().unwrap()).collect();
    assert!(counts.windows(2).all(|w| w[1] == 2 * w[0]));

    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("h.csv");
    let args = [
        "experiment",
        "hashing-error",
        "--n",
        "12",
        "--s",
        "4",
        "--eps",
        "0.4",
        "--trials",
        "40",
        "--seed",
        "3",
        "--jobs",
        "2",
        "--output",
        path(&csv_path),
    ];
    assert!(fsparse(&args).status.success());
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let last = text.lines().last().unwrap();
    let fraction: f64 = last.split(',').nth(4).unwrap().parse().unwrap();
    assert!(last.starts_with("summary,"));
    assert!(fraction >= 15.0 / 16.0 - 0.05);
    assert!(text.lines().skip(1).all(|l| !l.contains(['e', 'E'])));

    let mut one_job = args;
    one_job[13] = "1";
    let single = dir.path().join("h1.csv");
    one_job[15] = path(&single);
    assert!(fsparse(&one_job).status.success());
    assert_eq!(text, std::fs::read_to_string(&single).unwrap());
}

#[test]
fn experiment_rejects_zero_trials() {
    let out = fsparse(&["experiment", "mse", "--trials", "0"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("trials"));
}

#[test]
fn bad_inputs_fail_cleanly() {
    let out = fsparse(&["estimate", "--input", "/nonexistent/f.json", "--s", "2", "--eps", "0.5"]);
    assert!(!out.status.success());
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"n":3,"repr":"dense","values":[1,2]}"#).unwrap();
    let out = fsparse(&["estimate", "--input", path(&bad), "--s", "2", "--eps", "0.5"]);
    assert!(!out.status.success());
    let out = fsparse(&["gen", "sparse", "--n", "4", "--s", "0"]);
    assert!(!out.status.success());
}
