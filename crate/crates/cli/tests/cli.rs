use std::path::Path;
use std::process::{Command, Output};

fn lelong(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lelong"))
        .args(args)
        .env_remove("LELONG_CACHE_DIR")
        .output()
        .expect("spawn lelong")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn exact_sum_of_squares_in_three_variables() {
    let o = lelong(&["exact", "--expr", "0.5*log(|z1|^2+|z2|^2+|z3|^2)", "--t", "0"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let rows = csv_rows(&out);
    assert_eq!(rows, vec![vec!["0", "1/3", "0.3333333333333333"]]);
    assert!(out.lines().last().unwrap().starts_with("# seed=none version="));
}

#[test]
fn scan_t_exact_column() {
    // log|z1 z2|: max(1, 2/(2−t))
    let o = lelong(&["scan-t", "--expr", "log(|z1*z2|^1)", "--t-grid", "0:1.9:0.1"]);
    assert_eq!(code(&o), 0);
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 20);
    for (i, r) in rows.iter().enumerate() {
        let t = i as f64 / 10.0;
        assert_eq!(r[0], format!("{t}"));
        let v: f64 = r[4].parse().unwrap();
        assert!((v - f64::max(1.0, 2.0 / (2.0 - t))).abs() < 1e-12, "t={t}: {v}");
        // no estimate requested
        assert!(r[1].is_empty() && r[2].is_empty() && r[3].is_empty());
    }
    assert_eq!(rows[19][4], "20");

    // |z1 z2|^2 doubles the function and the threshold
    let o = lelong(&["scan-t", "--expr", "log(|z1^1*z2^1|^2)", "--t-grid", "0:1.9:0.1"]);
    let doubled = csv_rows(&stdout(&o));
    for (a, b) in rows.iter().zip(&doubled) {
        let (x, y): (f64, f64) = (a[4].parse().unwrap(), b[4].parse().unwrap());
        assert_eq!(2.0 * x, y);
    }
}

#[test]
fn exit_codes() {
    assert_eq!(code(&lelong(&["--help"])), 0);
    assert_eq!(code(&lelong(&["bogus"])), 1);
    assert_eq!(code(&lelong(&["exact", "--expr", "log(|z1|"])), 1);
    assert_eq!(code(&lelong(&["exact", "--expr", "log(|z1|^2+|z2|^2)", "--t", "2"])), 1);
    // randomized commands refuse to run without a seed
    assert_eq!(code(&lelong(&["estimate", "--expr", "log(|z1|^1)"])), 1);
    let o = lelong(&[
        "bergman",
        "--expr",
        "log(|z1|^1)",
        "--n",
        "2",
        "--grid",
        "0.1,0.1",
        "--degree",
        "12",
        "--samples",
        "64",
        "--seed",
        "1",
    ]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn json_format_wraps_result() {
    let o = lelong(&["exact", "--expr", "log(|z1*z2|^1)", "--t", "1", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["result"]["exact"], "2");
    assert!(v["seed"].is_null());
    assert!(v["version"].is_string());
}

#[test]
fn verify_fast_is_reproducible() {
    let a = lelong(&["verify", "--suite", "fast", "--seed", "7"]);
    let b = lelong(&["verify", "--suite", "fast", "--seed", "7"]);
    assert_eq!(code(&a), 0, "{}", stdout(&a));
    assert_eq!(a.stdout, b.stdout);
    let out = stdout(&a);
    assert!(out.starts_with("name,status,detail\n"));
    assert!(out.trim_end().ends_with("suite=fast violations=0"));
}

fn records(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .map(|d| d.map(|e| e.unwrap().path()).collect())
        .unwrap_or_default();
    v.sort();
    v
}

#[test]
fn cache_hit_miss_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let run = |seed: &str| {
        lelong(&[
            "kiselman",
            "--expr",
            "log(|z1*z2|^1)",
            "--dirs",
            "1,2",
            "--samples",
            "256",
            "--seed",
            seed,
            "--cache-dir",
            d,
        ])
    };
    let first = run("5");
    assert_eq!(code(&first), 0);
    let files = records(dir.path());
    assert_eq!(files.len(), 1);

    // Zero the timestamp (not covered by the checksum): a hit must leave it alone.
    let path = &files[0];
    let mut rec: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    rec["timestamp"] = 0.into();
    std::fs::write(path, serde_json::to_string(&rec).unwrap()).unwrap();
    let second = run("5");
    assert_eq!(second.stdout, first.stdout);
    let rec: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(rec["timestamp"], 0);

    // another seed is another key
    let other = run("6");
    assert_eq!(code(&other), 0);
    assert_eq!(records(dir.path()).len(), 2);

    // tampered outputs fail the checksum and are recomputed
    let mut rec: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    rec["outputs"]["seed"] = 999.into();
    std::fs::write(path, serde_json::to_string(&rec).unwrap()).unwrap();
    let third = run("5");
    assert_eq!(code(&third), 0);
    assert!(String::from_utf8_lossy(&third.stderr).contains("ignoring cache entry"));
    assert_eq!(third.stdout, first.stdout);
    let rec: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_ne!(rec["timestamp"], 0);
}

#[test]
fn cache_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_lelong"))
        .args([
            "kiselman",
            "--expr",
            "log(|z1|^1)",
            "--n",
            "2",
            "--dirs",
            "1,1",
            "--samples",
            "128",
            "--seed",
            "1",
            "--cache",
        ])
        .env("LELONG_CACHE_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(records(dir.path()).len(), 1);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.csv");
    let o = lelong(&[
        "exact",
        "--expr",
        "log(|z1|^1)",
        "--n",
        "2",
        "--out",
        p.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    assert!(std::fs::read_to_string(p).unwrap().starts_with("t,exact,value\n"));
}

#[test]
fn kiselman_rational_directions() {
    let o = lelong(&[
        "kiselman",
        "--expr",
        "log(|z1*z2|^1)",
        "--dirs",
        "1/2,3/2",
        "--seed",
        "2",
    ]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let meta = out.lines().last().unwrap();
    let nu: f64 = meta
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("nu="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((nu - 2.0).abs() < 0.03, "{meta}");
}
