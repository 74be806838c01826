use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const GOLDEN_RECORDS_SHA256: &str = "e382f6291d653974b85b1b6c8947214f0202213f099bcff109b9f4d34136e843";

fn batchps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_batchps")).args(args).output().expect("spawn batchps")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn rows(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    (header, lines.map(|l| l.split(',').map(str::to_string).collect()).collect())
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn out_arg(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn constants_accept_either_load() {
    let a = batchps(&["constants", "--rho-star", "0.3", "--q", "0.3"]);
    let b = batchps(&["constants", "--rho", "0.21", "--q", "0.3"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let line = stdout(&a).lines().find(|l| l.starts_with("sigma_plus ")).unwrap().to_string();
    let v: f64 = line.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((v + 0.14319).abs() < 5e-6, "{v}");
    assert!(line.ends_with("-1.43188419493e-1"), "{line}");
}

#[test]
fn configuration_errors_exit_2() {
    assert_eq!(code(&batchps(&["constants", "--rho-star", "1.1", "--q", "0.3"])), 2);
    assert_eq!(code(&batchps(&["constants", "--rho", "0.2", "--rho-star", "0.3", "--q", "0.3"])), 2);
    assert_eq!(code(&batchps(&["constants", "--q", "0.3"])), 2);
    assert_eq!(code(&batchps(&["constants", "--rho", "0.2", "--q", "0.3", "--tolerance", "nope=1"])), 2);
    assert_eq!(code(&batchps(&["figures", "--rho", "0.2", "--q", "0.3"])), 2);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"rho": 0.2, "q": 0.3, "colour": "red"}"#).unwrap();
    assert_eq!(code(&batchps(&["constants", "--config", cfg.to_str().unwrap()])), 2);
    let missing = dir.path().join("missing.json");
    assert_eq!(code(&batchps(&["constants", "--config", missing.to_str().unwrap()])), 2);
}

#[test]
fn pmf_files_and_truncation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path(), "pmf");
    let o = batchps(&["pmf", "--rho", "0.21", "--q", "0.3", "--out", &out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = Path::new(&out);

    let (header, m) = rows(&out.join("m.csv"));
    assert_eq!(header, "index,value,asymptote,ratio");
    assert_eq!(m[0][0], "1");
    let first: f64 = m[0][1].parse().unwrap();
    assert!((first - 0.7 / 1.21).abs() < 1e-11, "{first}");

    for f in ["mtilde_corollary3.csv", "mtilde_composition.csv", "j.csv", "j_given_b2_m10.csv"] {
        assert_eq!(rows(&out.join(f)).0, "index,value,asymptote,ratio", "{f}");
    }
    let (header, routes) = rows(&out.join("mtilde_routes.csv"));
    assert_eq!(header, "index,corollary3,composition,abs_diff");
    for r in &routes {
        let (a, b): (f64, f64) = (r[1].parse().unwrap(), r[2].parse().unwrap());
        assert!((a - b).abs() <= 1e-10, "{r:?}");
    }
    let (_, cond) = rows(&out.join("j_given_b2_m10.csv"));
    assert!(cond.iter().all(|r| r[2].is_empty() && r[3].is_empty()));

    let summary = json(&out.join("pmf_summary.json"));
    assert!(summary["route_max_abs_diff"].as_f64().unwrap() <= 1e-10);

    let o = batchps(&["pmf", "--rho", "0.21", "--q", "0.3", "--m-max", "20", "--out", &out_arg(dir.path(), "short")]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("remainder"));
}

#[test]
fn simulate_golden_records_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path(), "sim");
    let o = batchps(&[
        "simulate", "--rho", "0.21", "--q", "0.3", "--seed", "1", "--replications", "20000", "--busy-periods", "100000",
        "--out", &out,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = Path::new(&out);
    let s = json(&out.join("summary.json"));
    assert_eq!(s["records_sha256"], GOLDEN_RECORDS_SHA256);
    assert_eq!(rows(&out.join("records.csv")).1.len(), 10);
    assert_eq!(s["violations"], 0);
    assert_eq!(s["capped"], 0);

    let busy = &s["means"]["busy_duration"];
    let (mean, se) = (busy["mean"].as_f64().unwrap(), busy["std_error"].as_f64().unwrap());
    assert!((mean - 2.0408).abs() <= 3.0 * se, "{mean} +/- {se}");

    let (header, ccdf) = rows(&out.join("sim_omega_ccdf.csv"));
    assert_eq!(header, "x,ccdf_omega,ccdf_omega_hat");
    let c: Vec<f64> = ccdf.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(c.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn event_cap_budget_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let o = batchps(&[
        "simulate", "--rho", "0.21", "--q", "0.3", "--replications", "2000", "--event-cap", "6", "--out",
        &out_arg(dir.path(), "capped"),
    ]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));

    // a generous budget lets the same run through
    let o = batchps(&[
        "simulate", "--rho", "0.21", "--q", "0.3", "--replications", "2000", "--event-cap", "6", "--busy-periods",
        "0", "--tolerance", "event_cap_fraction=1", "--out", &out_arg(dir.path(), "allowed"),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&dir.path().join("allowed/summary.json"));
    assert!(s["capped"].as_u64().unwrap() > 0);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"rho_star": 0.5, "q": 0.2, "seed": 5, "replications": 3000, "busy_periods": 10,
            "tolerances": {"ci_sigma": 2.0}}"#,
    )
    .unwrap();
    let out = out_arg(dir.path(), "sim");
    let o = batchps(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "7", "--out", &out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&Path::new(&out).join("summary.json"));
    assert_eq!(s["seed"], 7);
    assert_eq!(s["replications"], 3000);
    assert_eq!(s["ci_sigma"], 2.0);
    assert!((s["params"]["rho"].as_f64().unwrap() - 0.4).abs() < 1e-15);

    // a flag load replaces the file's
    let o = batchps(&["constants", "--config", cfg.to_str().unwrap(), "--rho", "0.21", "--q", "0.3"]);
    assert_eq!(o.stdout, batchps(&["constants", "--rho-star", "0.3", "--q", "0.3"]).stdout);
}

#[test]
fn figure_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path(), "fig");
    let o = batchps(&["figures", "--figure", "3,5", "--replications", "20000", "--out", &out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = Path::new(&out);
    assert!(!out.join("fig4_j.csv").exists());

    let (header, j) = rows(&out.join("fig3_j.csv"));
    assert_eq!(header, "j,sim_i_b,sim_j,sim_j_se,exact_j,approx_j");
    assert_eq!(j[0][0], "1");

    let (header, omega) = rows(&out.join("fig5_omega.csv"));
    assert_eq!(header, "x,ccdf_omega,ccdf_omega_hat,approx_omega");
    let x: Vec<f64> = omega.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(x.windows(2).all(|w| w[0] < w[1]));
    let f = json(&out.join("figures.json"));
    assert_eq!(f["figures"].as_array().unwrap().len(), 2);
}

#[test]
fn validate_report_and_self_test() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path(), "v");
    let o = batchps(&["validate", "--replications", "20000", "--busy-periods", "20000", "--out", &out]);
    let report = json(&Path::new(&out).join("validation.json"));
    let overall = report["overall"].as_str().unwrap();
    assert!(overall == "pass" || overall == "fail");
    let failed: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    let listed: Vec<&str> = report["failures"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(failed, listed);
    assert_eq!(overall == "pass", failed.is_empty());
    assert_eq!(code(&o), if failed.is_empty() { 0 } else { 1 });

    let out = out_arg(dir.path(), "self");
    let o = batchps(&["validate", "--self-test", "--replications", "20000", "--busy-periods", "20000", "--out", &out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&Path::new(&out).join("validation.json"));
    assert_eq!(report["self_test"]["new_failures"], serde_json::json!(["k_q.deconditioned"]));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let o = batchps(&[
            "simulate", "--rho-star", "0.7", "--q", "0.7", "--replications", "5000", "--busy-periods", "500", "--out",
            &out_arg(dir.path(), name),
        ]);
        assert_eq!(code(&o), 0);
    }
    let mut names: Vec<_> = std::fs::read_dir(dir.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 8);
    for n in names {
        assert_eq!(
            std::fs::read(dir.path().join("a").join(&n)).unwrap(),
            std::fs::read(dir.path().join("b").join(&n)).unwrap(),
            "{n:?}"
        );
    }
}
