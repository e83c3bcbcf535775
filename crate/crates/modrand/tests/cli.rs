//! End-to-end checks of the `modrand` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use modrand::harness::PolicyFile;

const BIN: &str = env!("CARGO_BIN_EXE_modrand");

fn demo_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/iid_demo.json")
}

fn run(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(BIN)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn modrand");
    child
        .stdin
        .take()
        .unwrap()
        .write_all(stdin.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn ok(args: &[&str], stdin: &str) -> String {
    let out = run(args, stdin);
    assert!(
        out.status.success(),
        "modrand {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn filter_stream_with_equal_models_echoes_input() {
    let cfg = demo_config();
    let input = "20.1, 40.3\n\n19.7 39.2\n21.0,41.5\n";
    let out = ok(
        &[
            "filter-stream",
            "--config",
            cfg.to_str().unwrap(),
            "--theta",
            "calm",
            "--pseudo",
            "calm",
        ],
        input,
    );
    let values: Vec<Vec<f64>> = out
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(
        values,
        vec![vec![20.1, 40.3], vec![19.7, 39.2], vec![21.0, 41.5]]
    );
}

#[test]
fn filter_stream_emits_cdf_values_in_unit_interval() {
    let cfg = demo_config();
    let out = ok(
        &[
            "filter-stream",
            "--config",
            cfg.to_str().unwrap(),
            "--theta",
            "calm",
            "--pseudo",
            "busy",
            "--emit-u",
        ],
        "20.1,40.3\n19.7,39.2\n",
    );
    for line in out.lines() {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(v.len(), 4);
        assert!(v[2..].iter().all(|u| *u > 0.0 && *u < 1.0));
    }
}

#[test]
fn filter_stream_empty_input_produces_no_output() {
    let cfg = demo_config();
    let out = ok(
        &[
            "filter-stream",
            "--config",
            cfg.to_str().unwrap(),
            "--theta",
            "calm",
            "--pseudo",
            "busy",
        ],
        "",
    );
    assert!(out.is_empty());
}

#[test]
fn filter_stream_rejects_malformed_lines() {
    let cfg = demo_config();
    let args = [
        "filter-stream",
        "--config",
        cfg.to_str().unwrap(),
        "--theta",
        "calm",
        "--pseudo",
        "busy",
    ];
    for bad in ["1.0\n", "1.0,abc\n", "1,2,3\n"] {
        let out = run(&args, bad);
        assert!(!out.status.success(), "accepted {bad:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
    }
    let out = run(
        &[
            "filter-stream",
            "--config",
            cfg.to_str().unwrap(),
            "--theta",
            "nope",
            "--pseudo",
            "busy",
        ],
        "",
    );
    assert!(!out.status.success());
}

fn write_policy(dir: &Path, matrix: Vec<Vec<f64>>) -> PathBuf {
    let file = PolicyFile {
        params: vec!["a".into(), "b".into()],
        prior: vec![0.5, 0.5],
        pseudo: vec!["a".into(), "b".into()],
        matrix,
        i0: 1.0,
        mutual_information: 0.0,
        expected_distortion: 0.0,
    };
    let path = dir.join("policy.json");
    fs::write(&path, serde_json::to_string(&file).unwrap()).unwrap();
    path
}

fn report(policy: &Path, bits: bool) -> serde_json::Value {
    let mut args = vec!["report", "--policy", policy.to_str().unwrap()];
    if bits {
        args.push("--bits");
    }
    serde_json::from_str(&ok(&args, "")).unwrap()
}

#[test]
fn report_on_identity_and_constant_policies() {
    let dir = tempfile::tempdir().unwrap();
    let id = write_policy(dir.path(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    let r = report(&id, false);
    let ln2 = std::f64::consts::LN_2;
    assert!((r["h_theta"].as_f64().unwrap() - ln2).abs() < 1e-12);
    assert!((r["i_theta_thetatilde"].as_f64().unwrap() - ln2).abs() < 1e-12);
    assert_eq!(r["fano_lower_bound"].as_f64().unwrap(), 0.0);
    let bits = report(&id, true);
    assert_eq!(bits["units"], "bits");
    assert!((bits["i_theta_thetatilde"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let constant = write_policy(dir.path(), vec![vec![1.0, 1.0], vec![0.0, 0.0]]);
    let r = report(&constant, false);
    assert!(r["i_theta_thetatilde"].as_f64().unwrap().abs() < 1e-12);
    let out = dir.path().join("rep");
    ok(
        &[
            "report",
            "--policy",
            constant.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        "",
    );
    assert!(out.join("report.json").exists());
}

#[test]
fn solve_then_report_stays_within_budget() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = demo_config();
    let out = dir.path().to_str().unwrap();
    ok(
        &[
            "solve",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out,
            "--i0",
            "0.2",
        ],
        "",
    );
    let policy = dir.path().join("policy_00.json");
    let file = PolicyFile::load(&policy).unwrap();
    assert_eq!(file.matrix.len(), 3);
    for i in 0..2 {
        let col: f64 = file.matrix.iter().map(|row| row[i]).sum();
        assert!((col - 1.0).abs() < 1e-9);
    }
    let r = report(&policy, false);
    assert!(r["i_theta_thetatilde"].as_f64().unwrap() <= 0.2 + 1e-6);
    assert!((r["leakage_budget"].as_f64().unwrap() - 0.2).abs() < 1e-12);
}

#[test]
fn sweep_is_deterministic_and_writes_rfc4180_csv() {
    let cfg = demo_config();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        ok(
            &[
                "sweep",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                dir.path().to_str().unwrap(),
                "--seed",
                "11",
            ],
            "",
        );
    }
    for name in [
        "sweep.csv",
        "distortion.csv",
        "policies.json",
        "reports.json",
    ] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
    let (header, rows) = read_csv(&a.path().join("sweep.csv"));
    assert_eq!(header[0], "i0_nats");
    assert_eq!(header[2], "achieved_mi_nats");
    assert_eq!(rows.len(), 4);
    for row in &rows {
        let i0: f64 = row[0].parse().unwrap();
        let mi: f64 = row[2].parse().unwrap();
        assert!(mi <= i0 + 1e-6);
    }
    let (header, rows) = read_csv(&a.path().join("distortion.csv"));
    assert_eq!(
        header,
        [
            "theta",
            "pseudo",
            "distortion",
            "std_error",
            "saturation_fraction",
            "flagged",
            "samples"
        ]
    );
    assert_eq!(rows.len(), 6);

    let c = tempfile::tempdir().unwrap();
    ok(
        &[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            c.path().to_str().unwrap(),
            "--bits",
        ],
        "",
    );
    let (header, _) = read_csv(&c.path().join("sweep.csv"));
    assert_eq!(header[0], "i0_bits");
}

#[test]
fn estimate_distortion_and_baseline_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = demo_config();
    ok(
        &[
            "estimate-distortion",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out,
        ],
        "",
    );
    let (_, rows) = read_csv(&dir.path().join("distortion.csv"));
    let diag: Vec<f64> = rows
        .iter()
        .filter(|r| r[0] == r[1])
        .map(|r| r[2].parse().unwrap())
        .collect();
    assert_eq!(diag, vec![0.0, 0.0]);

    let occupancy = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/occupancy.json");
    ok(
        &[
            "baseline-noise",
            "--config",
            occupancy.to_str().unwrap(),
            "--out",
            out,
        ],
        "",
    );
    let (header, rows) = read_csv(&dir.path().join("baseline.csv"));
    assert_eq!(header[0], "theta");
    assert_eq!(rows.len(), 2 * 90);

    // the iid demo has no baseline section
    let res = run(
        &[
            "baseline-noise",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out,
        ],
        "",
    );
    assert!(!res.status.success());
}
