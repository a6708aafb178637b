use fbms_cli::{execute, RunConfig, RunStatus, SubcommandKind, EXIT_ERROR, EXIT_NOT_APPLICABLE, EXIT_OK};
use std::path::Path;
use std::process::Command;

fn fbms(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_fbms"))
        .args(args)
        .env("FBMS_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn exemplar_mesh_round_trips_through_certify() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("disk.mesh");
    let out = fbms(&[
        "exemplar",
        "--name",
        "disk",
        "--resolution",
        "12",
        "--out",
        mesh.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let fields = mesh.with_extension("field");
    assert!(fields.exists());
    let report = dir.path().join("report.json");
    let out = fbms(&[
        "certify",
        "--mesh",
        mesh.to_str().unwrap(),
        "--fields",
        fields.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let r = read_json(&report);
    assert_eq!(r["status"], "ok");
    assert_eq!(r["result"]["spectrum"]["index"], 1);
    assert_eq!(r["result"]["verdicts"]["A"]["status"], "pass");
    assert_eq!(r["config"]["subcommand"], "certify");
}

#[test]
fn missing_mesh_exits_one_and_reports_the_error() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let out = fbms(&[
        "index",
        "--mesh",
        "/nonexistent/x.mesh",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(EXIT_ERROR));
    assert!(String::from_utf8_lossy(&out.stderr).contains("file not found"));
    let r = read_json(&report);
    assert_eq!(r["status"], "error");
    assert!(r["error"].as_str().unwrap().contains("file not found"));
}

#[test]
fn non_mean_convex_domain_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let out = fbms(&[
        "certify",
        "--exemplar",
        "disk",
        "--domain",
        "torus R=1.5 r=1",
        "--resolution",
        "8",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(EXIT_NOT_APPLICABLE));
    assert_eq!(
        read_json(&report)["result"]["verdicts"]["A"]["status"],
        "not_applicable"
    );
}

#[test]
fn deterministic_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    // same output path, since the path is part of the embedded configuration
    let path = dir.path().join("report.json");
    let mut bytes = Vec::new();
    for _ in 0..2 {
        let out = fbms(&[
            "certify",
            "--exemplar",
            "catenoid",
            "--resolution",
            "12",
            "--deterministic",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(EXIT_OK));
        bytes.push(std::fs::read(&path).unwrap());
    }
    assert!(!bytes[0].is_empty());
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn convergence_report_lists_levels_in_order_with_orders() {
    let config = RunConfig {
        subcommand: SubcommandKind::Convergence,
        exemplar: Some("catenoid".into()),
        resolution: 8,
        levels: 3,
        ..RunConfig::default()
    };
    let serial = fbms_cli::convergence_study(&config, 1).unwrap();
    let parallel = fbms_cli::convergence_study(&config, 3).unwrap();
    assert_eq!(serial, parallel);
    let res: Vec<usize> = serial.levels.iter().map(|l| l.resolution).collect();
    assert_eq!(res, [8, 16, 32]);
    assert!(serial.levels.windows(2).all(|w| w[0].vertices < w[1].vertices));
    for (name, orders) in &serial.orders {
        assert_eq!(orders.len(), 2, "{name}");
    }
    assert!(serial.levels.iter().all(|l| l.harmonic_dims.normal == Some(1)));
}

#[test]
fn invalid_configurations_are_rejected() {
    let valid = RunConfig {
        exemplar: Some("disk".into()),
        ..RunConfig::default()
    };
    assert!(valid.validate().is_ok());
    let bad = [
        RunConfig {
            resolution: 3,
            ..valid.clone()
        },
        RunConfig {
            refinements: 6,
            ..valid.clone()
        },
        RunConfig {
            eigenpairs: 0,
            ..valid.clone()
        },
        RunConfig {
            alpha: -0.1,
            ..valid.clone()
        },
        RunConfig {
            exemplar: None,
            ..valid.clone()
        },
        RunConfig {
            mesh: Some("x.mesh".into()),
            ..valid.clone()
        },
        RunConfig {
            subcommand: SubcommandKind::Convergence,
            levels: 0,
            ..valid.clone()
        },
    ];
    for c in bad {
        assert!(c.validate().is_err(), "{c:?}");
        let report = execute(&c);
        assert_eq!(report.status, RunStatus::Error);
        assert_eq!(report.exit_code(), EXIT_ERROR);
    }
}

#[test]
fn worker_threads_respect_deterministic_mode() {
    let c = RunConfig {
        deterministic: true,
        ..RunConfig::default()
    };
    assert_eq!(c.worker_threads(), 1);
    assert!(RunConfig::default().worker_threads() >= 1);
}

#[test]
fn hodge_subcommand_writes_the_basis() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("h.json");
    let out = fbms(&[
        "hodge",
        "--exemplar",
        "catenoid",
        "--resolution",
        "8",
        "--flavor",
        "tangential",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let r = read_json(&report);
    assert_eq!(r["status"], "ok");
    assert!(r["result"].is_object());
}

#[test]
fn disk_exemplar_certifies_with_theorem_a_passing() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("disk.json");
    let out = fbms(&[
        "certify",
        "--exemplar",
        "disk",
        "--resolution",
        "16",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    assert!(String::from_utf8_lossy(&out.stdout).contains("index 1"));
    let r = read_json(&report);
    assert_eq!(r["result"]["verdicts"]["A"]["status"], "pass");
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn disk_convergence_keeps_index_one() {
    let config = RunConfig {
        subcommand: SubcommandKind::Convergence,
        exemplar: Some("disk".into()),
        resolution: 8,
        levels: 3,
        ..RunConfig::default()
    };
    let report = fbms_cli::convergence_study(&config, 1).unwrap();
    assert!(report.levels.iter().all(|l| l.index == Some(1)));
    assert!(report.levels.iter().all(|l| l.harmonic_dims.normal == Some(0)));
}

#[test]
fn catenoid_convergence_orders_of_the_test_function_identity() {
    let config = RunConfig {
        subcommand: SubcommandKind::Convergence,
        exemplar: Some("catenoid".into()),
        resolution: 16,
        levels: 3,
        ..RunConfig::default()
    };
    let report = fbms_cli::convergence_study(&config, 2).unwrap();
    let residuals: Vec<f64> = report.levels.iter().map(|l| l.residuals["prop41_1"].unwrap()).collect();
    assert!(residuals.windows(2).all(|w| w[1] < w[0]), "{residuals:?}");
    for order in &report.orders["prop41_1"] {
        assert!(order.unwrap() >= 0.8, "{:?}", report.orders["prop41_1"]);
    }
    assert!(report
        .levels
        .iter()
        .all(|l| l.harmonic_dims.normal == Some(1) && l.homology_dims.normal == 1));
}
