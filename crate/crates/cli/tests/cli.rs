use std::io::Write;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::{NamedTempFile, TempDir};

fn dynpanel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynpanel")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn file(body: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(body.as_bytes()).unwrap();
    f
}

/// Exact relation y = 2 d with unit and period effects.
fn noiseless_csv() -> NamedTempFile {
    let mut s = String::from("unit,period,d,y\n");
    for i in 0..6 {
        for t in 0..7 {
            let d = ((i * 3 + t * t) % 5) as f64;
            let y = 2.0 * d + i as f64 - 0.25 * t as f64;
            s.push_str(&format!("c{i},{},{d},{y}\n", 1990 + t));
        }
    }
    file(&s)
}

/// A noisy dynamic panel.
fn dynamic_csv(n: usize, t: usize) -> NamedTempFile {
    let mut s = String::from("unit,period,dem,lgdp\n");
    let mut state: u64 = 12345;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64) / ((1u64 << 53) as f64)
    };
    for i in 0..n {
        let a = next() - 0.5;
        let mut y = 7.0 + a;
        for p in 0..t {
            let d = (next() < 0.5 + 0.3 * a) as u8 as f64;
            y = 0.6 * y + 3.0 + a + 0.02 * d + 0.05 * (next() - 0.5);
            s.push_str(&format!("u{i:03},{},{d},{y}\n", 1960 + p));
        }
    }
    file(&s)
}

#[test]
fn noiseless_fe_prints_exact_coefficient() {
    let data = noiseless_csv();
    let o = dynpanel(&["estimate", "--data", data.path().to_str().unwrap(), "--estimator", "fe", "--lags", "0", "--outcome", "y", "--treatment", "d"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let row = out.lines().find(|l| l.trim_start().starts_with("d ")).unwrap();
    assert!(row.contains("2.00 (0.00)"), "{row}");
}

#[test]
fn json_reproduces_displayed_numbers() {
    let data = dynamic_csv(30, 12);
    let dir = TempDir::new().unwrap();
    let json = dir.path().join("out.json");
    let o = dynpanel(&[
        "estimate", "--data", data.path().to_str().unwrap(), "--estimator", "fe,dfe-a,dfe-ss,ab,dab-ss", "--lags", "2",
        "--boot", "20", "--seed", "3", "--splits", "2", "--scale100", "--json", json.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let table = report["table"].as_array().unwrap();
    assert_eq!(table.len(), 5 * 4);
    for r in table {
        let mut line = format!("  {:<18} {:>10.2}", r["row"].as_str().unwrap(), r["value"].as_f64().unwrap());
        line.push_str(&format!(" ({:.2})", r["se_analytic"].as_f64().unwrap()));
        line.push_str(&format!(" [{:.2}]", r["se_bootstrap"].as_f64().unwrap()));
        assert!(out.contains(&line), "missing `{line}` in\n{out}");
    }
    let est = &report["estimates"].as_array().unwrap()[0];
    let alpha = est["coefficients"][0].as_f64().unwrap();
    assert_eq!(table[0]["value"].as_f64().unwrap(), alpha * 100.0);
    assert!(est["dims"]["p"].as_u64().unwrap() > 0);
    assert!(report["estimates"][3]["dims"]["m"].as_u64().unwrap() > 0);
    assert!(est["diagnostic"]["ratio"].as_f64().unwrap() > 0.0);
    assert_eq!(report["estimates"][4]["label"], "DAB-SS2");
}

#[test]
fn seed_determines_output() {
    let data = dynamic_csv(20, 10);
    let dir = TempDir::new().unwrap();
    let run = |seed: &str, name: &str| {
        let path = dir.path().join(name);
        let o = dynpanel(&[
            "estimate", "--data", data.path().to_str().unwrap(), "--estimator", "dab-ss", "--lags", "1", "--boot", "10",
            "--seed", seed, "--json", path.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read_to_string(path).unwrap()
    };
    let a = run("5", "a.json");
    assert_eq!(a, run("5", "b.json"));
    assert_ne!(a, run("6", "c.json"));
}

#[test]
fn exit_codes() {
    let o = dynpanel(&["estimate", "--data", "x.csv", "--estimator", "ols"]);
    assert_eq!(o.status.code(), Some(2));
    let o = dynpanel(&["estimate", "--data", "/definitely/missing.csv"]);
    assert_eq!(o.status.code(), Some(3));
    let bad = file("unit,period,dem,lgdp\na,1,1,2\na,2,0,3\nb,1,1,2\n");
    let o = dynpanel(&["estimate", "--data", bad.path().to_str().unwrap(), "--lags", "0"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("UnbalancedPanel"));
    // a constant treatment cannot be separated from the unit effects
    let mut s = String::from("unit,period,dem,lgdp\n");
    for i in 0..4 {
        for t in 0..5 {
            s.push_str(&format!("u{i},{t},1,{}\n", (i * t) as f64 * 0.1 + (t % 2) as f64));
        }
    }
    let flat = file(&s);
    let o = dynpanel(&["estimate", "--data", flat.path().to_str().unwrap(), "--lags", "0"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("RankDeficientDesign"));
}

#[test]
fn mc_smoke_is_byte_identical() {
    let cfg = file("# smoke\nN = 25\nT = 6\nalpha = 1\nrho = 0.4\nR = 2\nseed = 17\nestimators = fe, dfe-a, ab\ntrim = 2\n");
    let dir = TempDir::new().unwrap();
    let run = |name: &str| {
        let json = dir.path().join(format!("{name}.json"));
        let csv = dir.path().join(format!("{name}.csv"));
        let o = dynpanel(&["mc", "--config", cfg.path().to_str().unwrap(), "--json", json.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        (std::fs::read(json).unwrap(), std::fs::read_to_string(csv).unwrap())
    };
    let (a, csv) = run("a");
    let (b, _) = run("b");
    assert_eq!(a, b);
    assert!(csv.starts_with("estimator,parameter,truth,mean,bias,sd,rmse,coverage,failures"));
}

#[test]
fn mc_nickell_study() {
    let cfg = file("N = 500\nT = 11\nalpha = none\nrho = 0.5\nR = 100\nseed = 1\nestimators = fe\n");
    let dir = TempDir::new().unwrap();
    let json = dir.path().join("n.json");
    let o = dynpanel(&["mc", "--config", cfg.path().to_str().unwrap(), "--json", json.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    let row = v["rows"].as_array().unwrap().iter().find(|r| r["parameter"] == "L1.y").unwrap();
    let bias = row["bias"].as_f64().unwrap();
    assert!((bias + 0.167).abs() < 0.02, "{bias}");
}

#[test]
fn mc_config_errors() {
    let cfg = file("N = 10\nstay_prob = 1.3\n");
    let o = dynpanel(&["mc", "--config", cfg.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("stay_prob"), "{}", stderr(&o));
    let cfg = file("N = 10\n\nwhat is this\n");
    let o = dynpanel(&["mc", "--config", cfg.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}
