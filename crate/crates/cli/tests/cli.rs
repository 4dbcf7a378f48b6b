use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn lsnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsnet"))
        .args(args)
        .env_remove("LSNET_SEED")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn simulate(dir: &Path, nodes: &str, dim: &str, p: &str, seed: &str) {
    let o = lsnet(&[
        "simulate",
        "--nodes",
        nodes,
        "--dim",
        dim,
        "--p",
        p,
        "--seed",
        seed,
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

fn fit(fx: &Path, out: &Path, extra: &[&str]) -> Output {
    let paths = [fx.join("network.csv"), fx.join("interp.csv"), out.to_path_buf()];
    let [net, interp, out] = paths.each_ref().map(|p| p.to_str().unwrap());
    let mut args = vec!["fit", "--network", net, "--interp", interp, "--out", out];
    args.extend_from_slice(extra);
    lsnet(&args)
}

#[test]
fn simulate_is_reproducible() {
    let t = TempDir::new().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    simulate(&a, "12", "2", "4", "9");
    simulate(&b, "12", "2", "4", "9");
    for f in ["truth.json", "network.csv", "interp.csv", "config-echo.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn minimal_fixture() {
    let t = TempDir::new().unwrap();
    let fx = t.path().join("fx");
    simulate(&fx, "3", "2", "2", "0");
    let net = fs::read_to_string(fx.join("network.csv")).unwrap();
    assert_eq!(net.lines().count(), 1 + 3);
    let interp = fs::read_to_string(fx.join("interp.csv")).unwrap();
    assert_eq!(interp.lines().count(), 2);
    assert!(interp.lines().all(|l| l.split(',').count() == 3));
}

#[test]
fn dim_one_is_a_usage_error() {
    let t = TempDir::new().unwrap();
    let o = lsnet(&[
        "simulate",
        "--nodes",
        "5",
        "--dim",
        "1",
        "--p",
        "3",
        "--out",
        t.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("d ≥ 2"), "{}", stderr(&o));
}

#[test]
fn fit_writes_expected_rows_and_is_reproducible() {
    let t = TempDir::new().unwrap();
    let fx = t.path().join("fx");
    simulate(&fx, "10", "2", "3", "4");
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    for out in [&a, &b] {
        let o = fit(&fx, out, &["--iters", "2000", "--burnin", "1000", "--seed", "5"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let chain = fs::read_to_string(a.join("chain.csv")).unwrap();
    assert_eq!(chain.lines().count(), 1 + 1000);
    assert_eq!(
        fs::read(a.join("chain.csv")).unwrap(),
        fs::read(b.join("chain.csv")).unwrap()
    );
    assert!(a.join("meta.json").exists());
}

#[test]
fn glt_with_pivots() {
    let t = TempDir::new().unwrap();
    let fx = t.path().join("fx");
    simulate(&fx, "8", "2", "4", "1");
    let out = t.path().join("run");
    let o = fit(
        &fx,
        &out,
        &[
            "--restriction",
            "glt",
            "--pivots",
            "2,4",
            "--iters",
            "300",
            "--burnin",
            "100",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read_to_string(out.join("chain.csv")).unwrap().lines().count(), 201);

    let o = fit(&fx, &t.path().join("bad"), &["--restriction", "plt", "--pivots", "1,2"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn seed_env_overrides_flag() {
    let t = TempDir::new().unwrap();
    let run = |dir: &str, seed_flag: &str, env: Option<&str>| {
        let out = t.path().join(dir);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_lsnet"));
        cmd.args([
            "simulate", "--nodes", "6", "--dim", "2", "--p", "3", "--seed", seed_flag, "--out",
        ])
        .arg(&out)
        .env_remove("LSNET_SEED");
        if let Some(v) = env {
            cmd.env("LSNET_SEED", v);
        }
        assert!(cmd.output().unwrap().status.success());
        fs::read(out.join("network.csv")).unwrap()
    };
    let flag7 = run("a", "7", None);
    let env7 = run("b", "1", Some("7"));
    let flag1 = run("c", "1", None);
    assert_eq!(flag7, env7);
    assert_ne!(flag1, env7);
}

#[test]
fn mismatched_inputs_name_both_shapes() {
    let t = TempDir::new().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    simulate(&a, "6", "2", "3", "0");
    simulate(&b, "7", "2", "3", "0");
    let o = lsnet(&[
        "fit",
        "--network",
        a.join("network.csv").to_str().unwrap(),
        "--interp",
        b.join("interp.csv").to_str().unwrap(),
        "--out",
        t.path().join("run").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);
    let msg = stderr(&o);
    assert!(msg.contains("6 nodes") && msg.contains("3×7"), "{msg}");
}

#[test]
fn summarize_with_and_without_truth() {
    let t = TempDir::new().unwrap();
    let fx = t.path().join("fx");
    simulate(&fx, "10", "2", "3", "2");
    let run = t.path().join("run");
    let o = fit(&fx, &run, &["--iters", "600", "--burnin", "200"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let o = lsnet(&["summarize", "--chain", run.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["summary.json", "loadings.csv", "positions.svg", "edgefit.csv"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let plain = fs::read_to_string(run.join("summary.json")).unwrap();
    assert!(!plain.contains("aligned"));

    let out = t.path().join("sum");
    let o = lsnet(&[
        "summarize",
        "--chain",
        run.to_str().unwrap(),
        "--truth",
        fx.join("truth.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(s.contains("aligned"), "{s}");
    assert_eq!(
        fs::read_to_string(out.join("edgefit.csv")).unwrap().lines().count(),
        1 + 45
    );
    assert_eq!(
        fs::read_to_string(out.join("loadings.csv")).unwrap().lines().count(),
        1 + 3
    );
}

#[test]
fn summarize_missing_chain_is_io_error() {
    let t = TempDir::new().unwrap();
    let o = lsnet(&["summarize", "--chain", t.path().join("nothing").to_str().unwrap()]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

#[test]
fn geweke_passes_and_fails_on_threshold() {
    let t = TempDir::new().unwrap();
    let report = t.path().join("g.json");
    let o = lsnet(&["geweke", "--out", report.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let json = fs::read_to_string(&report).unwrap();
    // PLT 3×2 has 3 free loadings: 7 functions and their squares
    assert_eq!(json.matches("\"z\"").count(), 14);

    let o = lsnet(&["geweke", "--draws", "500", "--threshold", "0.01"]);
    assert_eq!(code(&o), 1);
}
