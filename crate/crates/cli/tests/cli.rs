use std::path::Path;
use std::process::{Command, Output};

use blockcert::conditions::Certificate;
use blockcert::io::save_matrix_csv;
use nalgebra::{DMatrix, DVector};

fn blockcert(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blockcert"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn gaussian_like(m: usize, n: usize) -> DMatrix<f64> {
    // deterministic, well-spread entries
    let mut a = DMatrix::from_fn(m, n, |i, j| ((i * 7 + j * 13 + 3) as f64 * 0.7).sin());
    for mut c in a.column_iter_mut() {
        let nrm = c.norm();
        c /= nrm;
    }
    a
}

#[test]
fn synth_on_identity_gives_zero_kappa() {
    let dir = tempfile::tempdir().unwrap();
    save_matrix_csv(&dir.path().join("A.csv"), &DMatrix::identity(6, 6)).unwrap();
    let out = blockcert(dir.path(), &["synth", "--a", "A.csv", "--r", "inf", "--d", "2", "--s", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let cert: Certificate =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("certificate_s1.json")).unwrap()).unwrap();
    assert!(cert.kappa.abs() <= 1e-12, "κ = {}", cert.kappa);
    assert!(stdout(&out).starts_with("s,r,kappa1,kappa_inf,certifies,method,certificate"));
}

#[test]
fn verify_flags_tampered_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let a = gaussian_like(8, 12);
    save_matrix_csv(&dir.path().join("A.csv"), &a).unwrap();
    let out = blockcert(dir.path(), &["synth", "--a", "A.csv", "--r", "2", "--d", "2", "--s", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let out = blockcert(dir.path(), &["verify", "--cert", "certificate_s1.json", "--a", "A.csv", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["valid"], true);

    let path = dir.path().join("certificate_s1.json");
    let mut cert: Certificate = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    cert.h[(0, 0)] += 0.5;
    std::fs::write(dir.path().join("tampered.json"), serde_json::to_string(&cert).unwrap()).unwrap();
    let out = blockcert(dir.path(), &["verify", "--cert", "tampered.json", "--a", "A.csv", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["valid"], false);
    assert!(v["residual"].as_f64().unwrap() > 1e-3);
}

#[test]
fn recover_reports_json_result() {
    let dir = tempfile::tempdir().unwrap();
    let a = gaussian_like(8, 12);
    let mut x = DVector::zeros(12);
    x[2] = 1.5;
    x[3] = -0.5;
    let y = &a * &x;
    save_matrix_csv(&dir.path().join("A.csv"), &a).unwrap();
    save_matrix_csv(&dir.path().join("y.csv"), &DMatrix::from_column_slice(8, 1, y.as_slice())).unwrap();
    save_matrix_csv(&dir.path().join("H.csv"), &a).unwrap();
    let out = blockcert(
        dir.path(),
        &[
            "recover",
            "--y",
            "y.csv",
            "--a",
            "A.csv",
            "--h",
            "H.csv",
            "--d",
            "2",
            "--r",
            "2",
            "--routine",
            "penalized",
            "--s",
            "1",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["routine"], "penalized");
    assert_eq!(v["x_hat"].as_array().unwrap().len(), 12);
    assert!(v.get("objective").is_some() && v.get("iterations").is_some() && v.get("bound").is_some());
    assert!(dir.path().join("penalized.json").exists());
}

#[test]
fn nebmp_writes_iteration_log() {
    let dir = tempfile::tempdir().unwrap();
    let a = DMatrix::identity(6, 6);
    let x = DVector::from_vec(vec![0.0, 0.0, 2.0, -1.0, 0.0, 0.0]);
    save_matrix_csv(&dir.path().join("A.csv"), &a).unwrap();
    save_matrix_csv(&dir.path().join("y.csv"), &DMatrix::from_column_slice(6, 1, x.as_slice())).unwrap();
    save_matrix_csv(&dir.path().join("x.csv"), &DMatrix::from_column_slice(6, 1, x.as_slice())).unwrap();
    let out = blockcert(
        dir.path(),
        &[
            "nebmp", "--y", "y.csv", "--a", "A.csv", "--h", "A.csv", "--d", "2", "--r", "inf", "--s", "1", "--iters",
            "3", "--truth", "x.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let log = std::fs::read_to_string(dir.path().join("nebmp_log.csv")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines[0], "k,alpha_k,Linf_err,L1_err");
    assert_eq!(lines.len(), 5);
    let last: Vec<f64> = lines[4].split(',').map(|c| c.parse().unwrap()).collect();
    assert!(last[2].abs() < 1e-12);
}

#[test]
fn incoherence_report_in_csv() {
    let dir = tempfile::tempdir().unwrap();
    save_matrix_csv(&dir.path().join("A.csv"), &gaussian_like(10, 8)).unwrap();
    let out = blockcert(dir.path(), &["incoherence", "--a", "A.csv", "--d", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("mu,nu,mu_b,chi,mu_bar,max_certified_s\n"));
}

#[test]
fn bench_emits_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = blockcert(
        dir.path(),
        &["bench", "--type", "H", "--m", "24", "--n", "32", "--d", "4", "--trials", "3", "--seed", "5"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let ratings = std::fs::read_to_string(dir.path().join("ratings.csv")).unwrap();
    let sweep = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let table1 = std::fs::read_to_string(dir.path().join("table1.csv")).unwrap();
    assert!(ratings.starts_with("matrix_type,s_mode,s,routine,rating,failures\n"));
    assert!(sweep.starts_with("sigma,routine,mean_ratio,std\n"));
    assert!(table1.starts_with("r,contrast_name,s,kappa1,kappa_inf,rho\n"));
    assert_eq!(ratings.lines().count(), 17);
    assert_eq!(sweep.lines().count(), 1 + 3 * 16);
    for line in ratings.lines().skip(1) {
        let rating: f64 = line.split(',').nth(4).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&rating));
    }
}

#[test]
fn bench_is_deterministic_under_seed() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let out = blockcert(
            dir.path(),
            &["bench", "--type", "G", "--m", "8", "--n", "12", "--d", "2", "--trials", "2", "--seed", "9"],
        );
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        ["table1.csv", "ratings.csv", "sweep.csv"].map(|f| std::fs::read(dir.path().join(f)).unwrap())
    };
    assert_eq!(run(), run());
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = blockcert(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    let out = blockcert(dir.path(), &["synth", "--bogus-flag"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    save_matrix_csv(&dir.path().join("A.csv"), &DMatrix::identity(6, 6)).unwrap();
    let out = blockcert(dir.path(), &["synth", "--a", "A.csv", "--d", "4"]);
    assert_eq!(out.status.code(), Some(1));

    let out = blockcert(dir.path(), &["bench", "--type", "H", "--m", "24", "--n", "30", "--d", "3", "--trials", "1"]);
    assert_eq!(out.status.code(), Some(1));

    let out = blockcert(dir.path(), &["bench", "--sigmas", "0", "--trials", "1"]);
    assert_eq!(out.status.code(), Some(1));
}
