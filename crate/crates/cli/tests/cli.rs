use std::process::{Command, Output};

fn georelay(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_georelay"))
        .args(args)
        .output()
        .expect("spawn failed")
}

fn stdout_lines(out: &Output) -> Vec<String> {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

fn data_rows(lines: &[String]) -> Vec<Vec<String>> {
    lines
        .iter()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn unknown_key_is_rejected() {
    let out = georelay(&["onehop", "policy=ff", "bogus=3"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr.clone()).unwrap();
    assert!(err.contains("unknown key"), "stderr: {err}");
    assert!(err.contains("bogus"), "stderr: {err}");
}

#[test]
fn missing_policy_is_rejected() {
    let out = georelay(&["e2e", "L=3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn calibrated_transfer_policy_needs_a_target() {
    let out = georelay(&["e2e", "policy=sf", "L=3", "lambda=6", "transfers=5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analytics_default_grid_has_eleven_rows() {
    let out = georelay(&["analytics"]);
    assert!(out.status.success());
    let rows = data_rows(&stdout_lines(&out));
    assert_eq!(rows.len(), 11);
    let first = &rows[0];
    assert_eq!(first[3], "0");
    let delay: f64 = first[5].parse().unwrap();
    assert!((delay - 1.0 / 6.0).abs() <= 1e-9);
    let last = &rows[10];
    assert_eq!(last[3], "1");
    let delay: f64 = last[5].parse().unwrap();
    assert!((delay - 5.0 / 6.0).abs() <= 1e-9);
}

#[test]
fn solve_bf_emits_every_stage_and_zeroes_the_last() {
    let out = georelay(&["solve-bf"]);
    assert!(out.status.success());
    let rows = data_rows(&stdout_lines(&out));
    assert_eq!(rows.len(), 5 * 100 * 100);
    let mut saw_last_stage = 0usize;
    for row in &rows {
        if row[0] == "5" {
            saw_last_stage += 1;
            let phi: f64 = row[3].parse().unwrap();
            assert_eq!(phi, 0.0, "final stage row {row:?} not zero");
        }
    }
    assert_eq!(saw_last_stage, 100 * 100);
}

#[test]
fn imported_surface_must_match_the_requested_eta() {
    let dir = tempfile::tempdir().unwrap();
    let surf = dir.path().join("surface.csv");
    let out = georelay(&[
        "solve-bf",
        "K=3",
        "eta=1",
        "grid_w=20",
        "grid_b=20",
        "--out",
        surf.to_str().unwrap(),
    ]);
    assert!(out.status.success());

    let reuse = |eta: &str| {
        georelay(&[
            "onehop",
            "policy=bf",
            "K=3",
            &format!("surface={}", surf.display()),
            &format!("eta={eta}"),
            "trials=100",
            "seed=1",
        ])
    };
    assert_eq!(reuse("2").status.code(), Some(2));
    assert!(reuse("1").status.success());
}

#[test]
fn seed_flag_overrides_the_seed_key() {
    let run = |args: &[&str]| {
        let out = georelay(args);
        assert!(out.status.success());
        out.stdout
    };
    let flagged = run(&["onehop", "policy=ff", "K=3", "trials=2000", "seed=1", "--seed", "9"]);
    let keyed = run(&["onehop", "policy=ff", "K=3", "trials=2000", "seed=9"]);
    let other = run(&["onehop", "policy=ff", "K=3", "trials=2000", "seed=1"]);
    assert_eq!(flagged, keyed);
    assert_ne!(flagged, other);
}

#[test]
fn config_file_overrides_and_echo() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "policy=ff\ntrials=1500\n# comment line\nK=3\n").unwrap();
    let out = georelay(&[
        "onehop",
        "--config",
        cfg.to_str().unwrap(),
        "trials=2500",
    ]);
    assert!(out.status.success());
    let lines = stdout_lines(&out);
    assert!(lines.iter().any(|l| l == "# trials=2500"));
    assert!(lines.iter().any(|l| l == "# K=3"));
    assert!(lines.iter().any(|l| l == "# command: onehop"));

    let inline = georelay(&["onehop", "policy=ff", "K=3", "trials=2500"]);
    assert_eq!(out.stdout, inline.stdout);
}

#[test]
fn empty_sweep_grid_yields_header_only() {
    let out = georelay(&["sweep", "kind=onehop", "policies=", "trials=10"]);
    assert!(out.status.success());
    let lines = stdout_lines(&out);
    assert!(data_rows(&lines).is_empty());
    assert!(lines.iter().any(|l| !l.starts_with('#')), "header missing");
}

#[test]
fn impossible_deployment_reports_a_simulation_failure() {
    let out = georelay(&[
        "e2e",
        "policy=ff",
        "L=10",
        "lambda=0.01",
        "retries=2",
        "transfers=5",
        "seed=1",
    ]);
    assert_eq!(out.status.code(), Some(4));
}
