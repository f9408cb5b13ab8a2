use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use drmarket_core::benchmark::sweep;
use drmarket_core::engine::{read_ledger, LEDGER_HEADER};
use drmarket_core::validate_config;
use serde_json::{json, Value};
use tempfile::TempDir;

fn drmarket(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drmarket"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn repo_config(name: &str) -> String {
    format!("{}/../../configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

/// Two deterministic loads with kappa 1 and 2 facing z = 16.
fn degenerate() -> Value {
    json!({
        "seed": 3,
        "days": 5,
        "mode": "net-demand",
        "typeSpace": {
            "dMax": 0,
            "types": [
                {"id": "k1", "baseline": 0, "kappa": 1.0},
                {"id": "k2", "baseline": 0, "kappa": 2.0}
            ]
        },
        "loads": [
            {"count": 1, "distribution": [1.0, 0.0]},
            {"count": 1, "distribution": [0.0, 1.0]}
        ],
        "netDemand": {"kind": "discrete", "values": [16.0], "probs": [1.0]},
        "costs": {"reserve": {"kind": "quadratic", "a": 5.0}},
        "expectation": {"method": "enumerate"}
    })
}

fn small() -> Value {
    json!({
        "seed": 11,
        "days": 40,
        "mode": "net-demand",
        "typeSpace": {
            "dMax": 0,
            "types": [
                {"id": "a", "baseline": 0, "kappa": 1.0},
                {"id": "b", "baseline": 0, "kappa": 2.0},
                {"id": "c", "baseline": 0, "kappa": 4.0}
            ]
        },
        "loads": [
            {"count": 3, "distribution": [0.5, 0.3, 0.2]},
            {"count": 1, "distribution": [0.2, 0.2, 0.6], "strategy": {"kind": "baseline-inflate", "delta": 1}}
        ],
        "netDemand": {"kind": "uniform", "lo": 0.0, "hi": 20.0},
        "costs": {"reserve": {"kind": "quadratic", "a": 2.0}},
        "expectation": {"method": "monte-carlo", "samples": 200}
    })
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

#[test]
fn simulate_writes_ledger_summary_and_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "small.json", &small());
    let out = tmp.path().join("run/nested");
    let o = drmarket(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let ledger = fs::read_to_string(out.join("ledger.csv")).unwrap();
    assert_eq!(ledger.lines().next().unwrap(), LEDGER_HEADER.join(","));
    let rows = read_ledger(ledger.as_bytes()).unwrap();
    assert_eq!(rows.len(), 40 * 4);

    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["days"], 40);
    assert_eq!(summary["nLoads"], 4);

    let resolved = validate_config(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(resolved, validate_config(&small().to_string()).unwrap());
}

#[test]
fn simulate_is_deterministic_and_honours_the_seed_override() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "small.json", &small());
    let cfg = cfg.to_str().unwrap();
    let run = |dir: &str, extra: &[&str]| {
        let out = tmp.path().join(dir);
        let mut args = vec!["simulate", "--config", cfg, "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        let o = drmarket(&args);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        (
            fs::read(out.join("summary.json")).unwrap(),
            fs::read(out.join("ledger.csv")).unwrap(),
        )
    };
    let a = run("a", &[]);
    let b = run("b", &[]);
    assert_eq!(a, b);
    let c = run("c", &["--seed", "12"]);
    assert_ne!(a.1, c.1);
    let resolved: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("c/config.json")).unwrap()).unwrap();
    assert_eq!(resolved["seed"], 12);
}

#[test]
fn malformed_config_exits_2_naming_the_field() {
    let tmp = TempDir::new().unwrap();
    let mut v = small();
    v["loads"][0]["distribution"] = json!([0.9, 0.9, 0.1]);
    let cfg = write_config(tmp.path(), "bad.json", &v);
    let out = tmp.path().join("out");
    let o = drmarket(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("loads[0].distribution"), "{}", stderr(&o));
    assert!(!out.exists());

    let o = drmarket(&[
        "simulate",
        "--config",
        "/nonexistent/config.json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn outputs_are_not_clobbered_without_force() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "small.json", &small());
    let out = tmp.path().join("out");
    let args = [
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    assert_eq!(code(&drmarket(&args)), 0);

    fs::write(out.join("summary.json"), "keep me").unwrap();
    let o = drmarket(&args);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--force"));
    assert_eq!(fs::read_to_string(out.join("summary.json")).unwrap(), "keep me");

    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(code(&drmarket(&forced)), 0);
    assert_ne!(fs::read_to_string(out.join("summary.json")).unwrap(), "keep me");
}

fn read_sweep_csv(path: &Path) -> (Vec<String>, Vec<(f64, f64, f64)>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r.deserialize().map(Result::unwrap).collect();
    (header, rows)
}

#[test]
fn compare_on_the_degenerate_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "det.json", &degenerate());
    let out = tmp.path().join("cmp");
    let o = drmarket(&[
        "compare",
        "--config",
        cfg.to_str().unwrap(),
        "--grid",
        "8,10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = read_sweep_csv(&out.join("fig2.csv"));
    assert_eq!(header, ["p", "posted_avg_cost", "optimal_avg_cost"]);
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0].0, rows[0].1), (8.0, 128.0));
    assert_eq!((rows[1].0, rows[1].1), (10.0, 80.0));
    for r in &rows {
        assert!((r.2 - 80.0).abs() <= 1e-9);
    }
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["minRebate"], 10.0);
    assert!((summary["ratio"].as_f64().unwrap() - 1.0).abs() <= 1e-9);
}

#[test]
fn fig2_csv_round_trips_to_the_sweep() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "small.json", &small());
    let out = tmp.path().join("cmp");
    let o = drmarket(&[
        "compare",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (_, rows) = read_sweep_csv(&out.join("fig2.csv"));

    let config = validate_config(&small().to_string()).unwrap();
    let grid = drmarket_core::benchmark::default_grid(&config).unwrap();
    let expected = sweep(&grid, &config, config.seed).unwrap();
    assert_eq!(rows.len(), expected.points.len());
    for (row, pt) in rows.iter().zip(&expected.points) {
        assert_eq!(*row, (pt.rebate, pt.average_social_cost, expected.optimal_average));
    }
}

#[test]
fn sweep_writes_the_requested_grid() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "det.json", &degenerate());
    let out = tmp.path().join("sw");
    let o = drmarket(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--grid",
        "0, 8,10,12",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (_, rows) = read_sweep_csv(&out.join("sweep.csv"));
    let ps: Vec<f64> = rows.iter().map(|r| r.0).collect();
    assert_eq!(ps, [0.0, 8.0, 10.0, 12.0]);
    assert_eq!(rows[0].1, 5.0 * 256.0);
}

#[test]
fn usage_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "det.json", &degenerate());
    let cfg = cfg.to_str().unwrap();
    let out = tmp.path().join("x");
    let out = out.to_str().unwrap();

    for grid in ["", " , ", "8,abc", "-1"] {
        let o = drmarket(&["compare", "--config", cfg, "--grid", grid, "--out", out]);
        assert_eq!(code(&o), 2, "grid {grid:?}: {}", stderr(&o));
    }
    let o = drmarket(&["compare", "--config", &repo_config("deterministic.json"), "--out", out]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("net-demand"));

    let o = drmarket(&["verify", "everything", "--out", out]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&drmarket(&["simulate", "--config", cfg])), 2);
    assert_eq!(code(&drmarket(&["frobnicate"])), 2);
}

#[test]
fn verify_mechanism_reports_every_check() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("v");
    let o = drmarket(&["verify", "mechanism", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["suite"], "mechanism");
    let checks = report["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    for c in checks {
        assert_eq!(c["passed"], true, "{c}");
        assert!(c["tolerance"].is_number());
    }
    assert!(!out.join("deviations.csv").exists());
}

#[test]
fn print_config_schema_describes_the_config() {
    let o = drmarket(&["print-config-schema"]);
    assert_eq!(code(&o), 0);
    let schema: Value = serde_json::from_slice(&o.stdout).unwrap();
    let props = schema["properties"].as_object().unwrap();
    for key in [
        "seed",
        "days",
        "typeSpace",
        "loads",
        "netDemand",
        "costs",
        "penalty",
        "expectation",
    ] {
        assert!(props.contains_key(key), "missing {key}");
    }
}

#[test]
fn shipped_deterministic_config_simulates() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("det");
    let o = drmarket(&[
        "simulate",
        "--config",
        &repo_config("deterministic.json"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["socialCost"]["mean"], 80.0);
    assert_eq!(summary["wStar"], 80.0);
}
