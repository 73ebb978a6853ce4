use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dampqfi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dampqfi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(command: &str, out: &Path, extra: &[&str]) {
    let mut args = vec![command, "--out_dir", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = dampqfi(&args);
    assert!(
        o.status.success(),
        "{command}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

/// Header and rows of a CSV file.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (header, rows)
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

fn lookup(rows: &[Vec<String>], tau: f64, control: &str, method: &str) -> f64 {
    let r = rows
        .iter()
        .find(|r| num(&r[0]) == tau && r[1] == control && r[2] == method)
        .unwrap();
    num(&r[3])
}

#[test]
fn qfi_curve_rows() {
    let dir = tempfile::tempdir().unwrap();
    run_ok("qfi-curve", dir.path(), &["--tau_grid", "[0,4,5]"]);
    let (header, rows) = read_csv(&dir.path().join("qfi_curve.csv"));
    assert_eq!(header, ["tau", "control", "method", "qfi"]);
    assert_eq!(rows.len(), 4 * 2 * 5);
    for r in rows.iter().filter(|r| num(&r[0]) == 0.0) {
        assert_eq!(num(&r[3]), 0.0);
    }
    let four_e2 = 4.0 * (-2.0f64).exp();
    assert!((lookup(&rows, 2.0, "none", "closed_form") - four_e2).abs() < 1e-12);
    for method in ["exact_eig", "closed_form"] {
        let at = |c| lookup(&rows, 2.0, c, method);
        assert!(at("both") >= at("kerr"), "{method}");
        assert!(at("linear") >= at("none"), "{method}");
    }
}

#[test]
fn fidelity_curve_rows() {
    let dir = tempfile::tempdir().unwrap();
    run_ok("fidelity-curve", dir.path(), &["--tau_grid", "[0,4,9]"]);
    let (header, rows) = read_csv(&dir.path().join("fidelity_curve.csv"));
    assert_eq!(header, ["tau", "control", "method", "fidelity"]);
    for control in ["none", "linear", "kerr", "both"] {
        assert!((lookup(&rows, 0.0, control, "uhlmann") - 1.0).abs() <= 1e-9);
        let closed = lookup(&rows, 0.0, control, "pure_closed_form");
        assert!((closed - 4.0 * (-2.0f64).exp()).abs() < 1e-12);
    }
    for method in ["uhlmann", "pure_closed_form"] {
        for r in rows.iter().filter(|r| r[2] == method && num(&r[0]) > 0.0) {
            let base = lookup(&rows, num(&r[0]), "none", method);
            assert!(num(&r[3]) <= base + 1e-12, "{r:?}");
        }
    }
}

#[test]
fn optimize_reports() {
    let dir = tempfile::tempdir().unwrap();
    let grid = r#"{"u1_range": [0, 0.99, 41], "u2_range": [0, 0.99, 41]}"#;
    run_ok(
        "optimize",
        dir.path(),
        &["--grid", grid, "--epsilons", "[0.1,0.15,1]"],
    );
    let (header, rows) = read_csv(&dir.path().join("surface.csv"));
    assert_eq!(header, ["u1", "u2", "i_star", "d"]);
    assert_eq!(rows.len(), 41 * 41);
    let report = |eps: &str| -> Value {
        let text =
            std::fs::read_to_string(dir.path().join(format!("optimum_eps_{eps}.json"))).unwrap();
        serde_json::from_str(&text).unwrap()
    };
    let top = report("1");
    assert_eq!(top["optimum"]["best"]["u1"], 0.99);
    assert_eq!(top["optimum"]["best"]["u2"], 0.99);
    let i = |v: &Value| v["optimum"]["best"]["i_star"].as_f64().unwrap();
    assert!(i(&report("0.15")) >= i(&report("0.1")));
    assert!(report("0.1")["optimum"]["best"]["d"].as_f64().unwrap() <= 0.1);
    assert!(dir.path().join("pareto_front.csv").exists());
}

#[test]
fn optimize_infeasible_epsilon_is_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let grid = r#"{"u1_range": [0.5, 0.9, 3], "u2_range": [0.5, 0.9, 3]}"#;
    let o = dampqfi(&[
        "optimize",
        "--grid",
        grid,
        "--epsilons",
        "[0.01]",
        "--out_dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn scan_alpha_rows() {
    let dir = tempfile::tempdir().unwrap();
    let grid = r#"{"u2_range": [0, 0.9, 10], "alpha2_range": [0, 0.9, 10]}"#;
    run_ok("scan-alpha", dir.path(), &["--grid", grid, "--u1", "0.3"]);
    let (header, rows) = read_csv(&dir.path().join("scan_alpha.csv"));
    assert_eq!(header, ["u2", "alpha2", "i_star", "d"]);
    assert_eq!(rows.len(), 100);
    let origin = rows
        .iter()
        .find(|r| num(&r[0]) == 0.0 && num(&r[1]) == 0.0)
        .unwrap();
    assert_eq!((num(&origin[2]), num(&origin[3])), (0.0, 0.0));
    for r in &rows {
        assert!((0.0..=1.0).contains(&num(&r[3])));
    }
    let u2s: std::collections::BTreeSet<u64> = rows.iter().map(|r| num(&r[0]).to_bits()).collect();
    for u2 in u2s.into_iter().map(f64::from_bits) {
        let mut line: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| num(&r[0]) == u2)
            .map(|r| (num(&r[1]), num(&r[2])))
            .collect();
        line.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(line.windows(2).all(|w| w[1].1 > w[0].1), "u2={u2}");
    }
}

fn estimate_table(dir: &Path, extra: &[&str]) -> (Vec<String>, Vec<Vec<f64>>, Value) {
    let mut args = vec!["--duration", "0.5"];
    args.extend_from_slice(extra);
    run_ok("estimate", dir, &args);
    let (header, rows) = read_csv(&dir.join("estimate.csv"));
    let rows = rows
        .iter()
        .map(|r| r.iter().map(|s| num(s)).collect())
        .collect();
    let summary =
        serde_json::from_str(&std::fs::read_to_string(dir.join("estimate_summary.json")).unwrap())
            .unwrap();
    (header, rows, summary)
}

#[test]
fn estimate_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (header, rows, summary) =
        estimate_table(dir.path(), &["--candidates", r#"{"rates": [0.5, 1, 2]}"#]);
    assert_eq!(header, ["t", "gamma_hat", "p_1", "p_2", "p_3"]);
    assert_eq!(rows.len(), 501);
    let g = summary["final_gamma_hat"].as_f64().unwrap();
    assert!((0.5..=2.0).contains(&g));
    assert_eq!(summary["seed"], 0);

    let single = tempfile::tempdir().unwrap();
    let (_, rows, _) = estimate_table(single.path(), &["--candidates", r#"{"rates": [1.3]}"#]);
    assert!(rows.iter().all(|r| r[1] == 1.3 && r[2] == 1.0));

    let blind = tempfile::tempdir().unwrap();
    let (_, rows, _) = estimate_table(
        blind.path(),
        &[
            "--efficiency",
            "0",
            "--candidates",
            r#"{"rates": [0.5, 1, 2]}"#,
        ],
    );
    for r in &rows {
        for p in &r[2..] {
            assert!((p - 1.0 / 3.0).abs() <= 1e-10);
        }
    }
}

#[test]
fn evolve_layout() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        "evolve",
        dir.path(),
        &["--tau_grid", "[0,1,3]", "--dim", "6"],
    );
    let (header, rows) = read_csv(&dir.path().join("evolve.csv"));
    assert_eq!(header, ["tau", "method", "p", "q", "re", "im"]);
    assert_eq!(rows.len(), 2 * 3 * 36);
    let o = dampqfi(&[
        "evolve",
        "--dim",
        "4",
        "--out_dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn config_document_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let doc = dir.path().join("run.json");
    std::fs::write(
        &doc,
        r#"{"tau_grid": [0, 2, 3], "format": "json", "dim": 6}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    run_ok("qfi-curve", &out, &["--config", doc.to_str().unwrap()]);
    let v: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("qfi_curve.json")).unwrap())
            .unwrap();
    assert_eq!(v["columns"][3], "qfi");
    assert_eq!(v["rows"].as_array().unwrap().len(), 24);

    std::fs::write(&doc, r#"{"kappa": 1}"#).unwrap();
    let o = dampqfi(&[
        "evolve",
        "--config",
        doc.to_str().unwrap(),
        "--out_dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("kappa"));

    let o = dampqfi(&["evolve", "--u2", "1.5"]);
    assert_eq!(o.status.code(), Some(2));

    let blocker = dir.path().join("blocker");
    std::fs::write(&blocker, "x").unwrap();
    let o = dampqfi(&[
        "evolve",
        "--tau_grid",
        "[0,1,2]",
        "--out_dir",
        blocker.join("sub").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("blocker"));

    for command in [
        "qfi-curve",
        "fidelity-curve",
        "optimize",
        "scan-alpha",
        "estimate",
        "evolve",
    ] {
        assert_eq!(dampqfi(&[command, "--help"]).status.code(), Some(0));
    }
}

#[test]
fn floats_round_trip_in_csv() {
    let dir = tempfile::tempdir().unwrap();
    run_ok("qfi-curve", dir.path(), &["--tau_grid", "[0,6,7]"]);
    let (_, rows) = read_csv(&dir.path().join("qfi_curve.csv"));
    for r in &rows {
        let x = num(&r[3]);
        assert_eq!(format!("{x:.16e}"), r[3]);
    }
}
