use std::process::{Command, Output};

use growthsgd::data::{generate_margin_data, write_libsvm};
use growthsgd::harness::record::{parse_csv, CSV_HEADER};

fn growthsgd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_growthsgd"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(&growthsgd(&["--help"])), 0);
    assert_eq!(code(&growthsgd(&["run", "--help"])), 0);
}

#[test]
fn usage_and_config_errors_exit_one() {
    assert_eq!(code(&growthsgd(&["frobnicate"])), 1);
    assert_eq!(code(&growthsgd(&["reproduce", "fig9", "--out", "x"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&growthsgd(&["reproduce", "fig2_covtype", "--out", out])), 1);
    assert_eq!(code(&growthsgd(&["run", "--config", "/nonexistent/cfg"])), 1);
    assert_eq!(code(&growthsgd(&["run", "--n", "50"])), 1, "missing out");
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "learning_rate = 3\n").unwrap();
    let o = growthsgd(&["run", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("learning_rate"));
}

#[test]
fn malformed_data_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.libsvm");
    std::fs::write(&path, "+1 1:0.5\n-1 2:oops\n").unwrap();
    let o = growthsgd(&["spectral", "--libsvm", path.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains(":2:"));
}

#[test]
fn failed_checks_exit_three() {
    let o = growthsgd(&["perceptron", "--tau", "0.2", "--n", "50", "--d", "3", "--passes", "2"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stdout).contains("violated"));
}

#[test]
fn run_writes_csvs_and_flags_override_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(
        &cfg,
        "# small run\nn = 100\nd = 5\ntau = 0.2\npasses = 50\nmethods = sgd\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = growthsgd(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--passes",
        "3",
        "--methods",
        "sgd,accel_ls",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert_eq!(manifest, "SGD\tsgd.csv\nAcc-SGD(LS)\tacc_sgd_ls.csv\n");
    let text = std::fs::read_to_string(out.join("sgd.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    let rows = parse_csv(&text).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows.last().unwrap().iteration, 300);
    assert!(rows.iter().all(|r| r.elapsed_ms == 0));
}

#[test]
fn spectral_and_audit_report_constants() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.libsvm");
    let data = generate_margin_data(40, 3, 0.2, 1).unwrap();
    write_libsvm(&data, std::fs::File::create(&path).unwrap()).unwrap();
    let o = growthsgd(&["spectral", "--libsvm", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    assert!(text.contains("n = 40") && text.contains("d = 3") && text.contains("lambda_max"));

    let o = growthsgd(&["audit-rho", "--n", "60", "--d", "4", "--tau", "0.2", "--samples", "100"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    for route in ["wgc_analytic", "sgc_margin", "empirical_ratio"] {
        assert!(text.contains(route), "{route} missing from\n{text}");
    }
}
