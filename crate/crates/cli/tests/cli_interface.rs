//! End-to-end checks of the `kfp` binary: flags, file outputs, exit codes
//! and byte-level reproducibility of reports.

use std::path::Path;
use std::process::Command;

fn kfp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kfp"))
}

fn tempdir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("kfp-cli-test-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn trace_reports_the_cycle() {
    let dir = tempdir("trace");
    let out = kfp()
        .args([
            "trace",
            "--x",
            "0.5,0",
            "--v",
            "0,10",
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("trace.json")).unwrap()).unwrap();
    // N = 1 + floor((10 - sqrt(0.75)) / sqrt(3)) = 6 reflections.
    assert_eq!(report["reflections"], 6);
    let taus = report["breakpoints_tau"].as_array().unwrap();
    assert_eq!(taus.len(), 7);
    assert_eq!(taus[0], 0.0);
    assert!(dir.join("manifest.json").exists());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn trace_works_in_three_dimensions_and_on_level_sets() {
    let dir = tempdir("trace3");
    let out = kfp()
        .args([
            "trace",
            "--x",
            "0,0,0",
            "--v",
            "3,0,0",
            "--dim",
            "3",
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("trace.json")).unwrap()).unwrap();
    assert_eq!(report["reflections"], 2);
    let eta = report["eta"].as_array().unwrap();
    assert!((eta[0].as_f64().unwrap() + 1.0).abs() < 1e-10);

    // Generic level-set domain through the same interface.
    let out = kfp()
        .args([
            "trace",
            "--x",
            "0,0",
            "--v",
            "5,0.3",
            "--ellipse",
            "1.5,0.7",
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn grazing_trace_is_a_runtime_failure() {
    let out = kfp()
        .args(["trace", "--x", "1,0", "--v", "0,1", "--out", "/tmp/kfp-unused"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "grazing should exit 2");
}

#[test]
fn unknown_flags_are_usage_errors() {
    let out = kfp().args(["converge", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = kfp().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    // Bad numbers in flag lists are usage errors too.
    let out = kfp()
        .args(["converge", "--eps", "0.4,banana"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let out = kfp().args(["--help"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in [
        "trace",
        "endpoint",
        "simulate",
        "heat",
        "converge",
        "weak-residual",
        "integrability",
    ] {
        assert!(text.contains(sub), "help misses {sub}");
    }
}

#[test]
fn integrability_divergence_is_not_a_failure() {
    let dir = tempdir("integrability");
    let out = kfp()
        .args([
            "integrability",
            "--p",
            "4",
            "--schedule",
            "20000,80000",
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "divergence is the expected outcome");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["exponent"], 4.0);
    assert!(report["estimates"].as_array().unwrap().len() == 2);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn converge_reports_are_byte_identical_for_identical_config() {
    let run = |dir: &Path| {
        let out = kfp()
            .args([
                "converge",
                "--eps",
                "0.4,0.2",
                "--n-particles",
                "2000",
                "--t-end",
                "0.02",
                "--seed",
                "9",
                "--mesh-nr",
                "4",
                "--mesh-ntheta",
                "6",
                "--initial",
                "uniform",
                "--out",
                dir.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(
            out.status.code() == Some(0) || out.status.code() == Some(2),
            "unexpected exit: {:?}\n{}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        );
        std::fs::read(dir.join("report.json")).unwrap()
    };
    // Same directory, so the resolved config (which embeds output_dir) is
    // truly identical between the two runs.
    let dir = tempdir("repro");
    let a = run(&dir);
    let b = run(&dir);
    assert_eq!(a, b, "reports must be byte-identical for identical config");

    // The density CSV files carry the gnuplot-ready column layout.
    let csv = std::fs::read_to_string(dir.join("density_eps0.4_t0.02.csv")).unwrap();
    assert!(csv.starts_with("r,theta,x,y,value\n"));
    assert_eq!(csv.lines().count(), 1 + 4 * 6);

    // The manifest records provenance.
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "converge");
    assert_eq!(manifest["seed"], 9);
    assert!(manifest["config_hash"].as_str().unwrap().len() == 16);
    assert!(manifest["wall_time_secs"].as_f64().unwrap() >= 0.0);

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempdir("config");
    let cfg_path = dir.join("run.json");
    std::fs::write(
        &cfg_path,
        r#"{
            "eps": [0.4],
            "n_particles": 1500,
            "t_end": 0.02,
            "seed": 3,
            "mesh": {"n_r": 4, "n_theta": 4},
            "initial": {"spatial": {"kind": "uniform"}},
            "snapshots": 3
        }"#,
    )
    .unwrap();
    let out = kfp()
        .args([
            "simulate",
            "--config",
            cfg_path.to_str().unwrap(),
            "--seed",
            "5",
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("simulate.json")).unwrap())
            .unwrap();
    // The flag wins over the file; the resolved config is embedded.
    assert_eq!(report["config"]["seed"], 5);
    assert_eq!(report["config"]["n_particles"], 1500);
    assert_eq!(report["snapshots"].as_array().unwrap().len(), 3);
    // Free-space and reflecting runs differ by exactly one config key.
    let mut reflecting = report["config"].clone();
    reflecting["boundary_mode"] = serde_json::json!("reflecting");
    let mut free = report["config"].clone();
    free["boundary_mode"] = serde_json::json!("free-space");
    let (r, f) = (
        serde_json::to_string(&reflecting).unwrap(),
        serde_json::to_string(&free).unwrap(),
    );
    assert_ne!(r, f);
    assert_eq!(
        r.replace("reflecting", "free-space"),
        f,
        "pipelines must differ in boundary_mode only"
    );
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn heat_subcommand_writes_fields() {
    let dir = tempdir("heat");
    let out = kfp()
        .args([
            "heat",
            "--initial",
            "bump",
            "--mesh-nr",
            "8",
            "--mesh-ntheta",
            "8",
            "--t-end",
            "0.05",
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("heat.json")).unwrap()).unwrap();
    let m0 = report["mass_initial"].as_f64().unwrap();
    let m1 = report["mass_final"].as_f64().unwrap();
    assert!((m0 - m1).abs() < 1e-12);
    assert!(dir.join("heat_t0.05.csv").exists());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn endpoint_grid_mode_is_deterministic() {
    let dir = tempdir("endpoint-grid");
    let run = || {
        let out = kfp()
            .args([
                "endpoint",
                "--samples",
                "27",
                "--grid",
                "--out",
                dir.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(out.status.success());
        std::fs::read(dir.join("endpoint.csv")).unwrap()
    };
    let a = run();
    let b = run();
    assert_eq!(a, b);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn endpoint_subcommand_tabulates_derivatives() {
    let dir = tempdir("endpoint");
    let out = kfp()
        .args([
            "endpoint",
            "--samples",
            "64",
            "--seed",
            "2",
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("endpoint.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "x0,x1,v0,v1,eta0,eta1,j00,j01,j10,j11,lap0,lap1,n,l,near_grazing"
    );
    assert!(lines.count() >= 60); // a few rows may be skipped as inadmissible
    std::fs::remove_dir_all(&dir).ok();
}
