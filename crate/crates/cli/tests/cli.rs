use std::path::Path;
use std::process::{Command, Output};

fn beamrss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_beamrss"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("an error line");
    serde_json::from_str(line).expect("machine-readable error line")
}

#[test]
fn default_codebook_file() {
    let dir = tempfile::tempdir().unwrap();
    let cb = dir.path().join("cb.csv");
    let out = beamrss(&["codebook", "--out", path(&cb)]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&cb).unwrap();
    assert!(text.starts_with("beams=64,angles=320,"));
    assert_eq!(text.lines().count(), 1 + 64);
}

#[test]
fn flat_single_beam_codebook() {
    let dir = tempfile::tempdir().unwrap();
    let cb = dir.path().join("cb.csv");
    assert!(beamrss(&[
        "codebook",
        "--beams",
        "1",
        "--elements",
        "1",
        "--out",
        path(&cb)
    ])
    .status
    .success());
    let text = std::fs::read_to_string(&cb).unwrap();
    let row: Vec<f64> = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(row.len(), 640);
    for pair in row.chunks(2) {
        assert!((pair[0].hypot(pair[1]) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn bad_output_dir_is_an_io_error() {
    let out = beamrss(&["codebook", "--out", "/nonexistent/dir/cb.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "io");
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"dropout": 1.5}"#).unwrap();
    let out = beamrss(&[
        "simulate",
        "--config",
        path(&cfg),
        "--out",
        path(&dir.path().join("g.json")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "validation");
    assert!(err["message"].as_str().unwrap().contains("dropout"));

    let out = beamrss(&[
        "simulate",
        "--position",
        "11",
        "--out",
        path(&dir.path().join("g.json")),
    ]);
    assert_eq!(out.status.code(), Some(1));

    std::fs::write(&cfg, r#"{"noise": {"snr_db": "high"}}"#).unwrap();
    let out = beamrss(&["eval", "--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_json(&out)["message"]
        .as_str()
        .unwrap()
        .contains("noise"));

    let out = beamrss(&["estimate", "--grid", path(&dir.path().join("missing.json"))]);
    assert_eq!(out.status.code(), Some(2));

    assert_eq!(beamrss(&["eval", "--bogus"]).status.code(), Some(1));
}

#[test]
fn default_config_round_trips() {
    let out = beamrss(&["--print-default-config"]);
    assert!(out.status.success());
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("default.json");
    std::fs::write(&cfg, &out.stdout).unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    for key in [
        "tx_positions",
        "rx_poses",
        "codebook",
        "payload",
        "noise",
        "seeds",
        "dropout",
        "carrier_hz",
    ] {
        assert!(text.contains(key), "{key}");
    }
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    assert!(
        beamrss(&["simulate", "--config", path(&cfg), "--out", path(&a)])
            .status
            .success()
    );
    assert!(beamrss(&["simulate", "--out", path(&b)]).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

/// Row-major `(t, r)` of the largest RSS.
fn argmax(grid: &serde_json::Value) -> (usize, usize) {
    let n_rx = grid["n_rx"].as_u64().unwrap() as usize;
    let mut best = (0, f64::NEG_INFINITY);
    for (k, v) in grid["values"].as_array().unwrap().iter().enumerate() {
        let v = v.as_f64().unwrap();
        if v > best.1 {
            best = (k, v);
        }
    }
    (best.0 / n_rx, best.0 % n_rx)
}

#[test]
fn simulate_is_deterministic_and_finds_boresight() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let mpcs = dir.path().join("mpcs.json");
    let run = |out: &Path, jobs: &str| {
        beamrss(&[
            "simulate",
            "--position",
            "1",
            "--receiver",
            "1",
            "--seed",
            "3",
            "--jobs",
            jobs,
            "--out",
            path(out),
            "--dump-mpcs",
            path(&mpcs),
        ])
    };
    assert!(run(&a, "1").status.success());
    assert!(run(&b, "4").status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let grid: serde_json::Value = serde_json::from_slice(&std::fs::read(&a).unwrap()).unwrap();
    // beams 31 and 32 straddle broadside
    let (t, r) = argmax(&grid);
    assert!(
        (30..=33).contains(&t) && (30..=33).contains(&r),
        "({t}, {r})"
    );

    let paths: serde_json::Value = serde_json::from_slice(&std::fs::read(&mpcs).unwrap()).unwrap();
    assert_eq!(paths.as_array().unwrap().len(), 13);
}

#[test]
fn estimate_on_simulated_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("los.json");
    std::fs::write(&cfg, r#"{"noise": "off", "max_order": 0}"#).unwrap();
    let grid = dir.path().join("g.json");
    let cb = dir.path().join("cb.csv");
    assert!(beamrss(&[
        "simulate",
        "--config",
        path(&cfg),
        "--position",
        "5",
        "--out",
        path(&grid)
    ])
    .status
    .success());
    assert!(beamrss(&["codebook", "--out", path(&cb)]).status.success());

    let objectives = dir.path().join("obj");
    let out = beamrss(&[
        "estimate",
        "--grid",
        path(&grid),
        "--tx-codebook",
        path(&cb),
        "--rx-codebook",
        path(&cb),
        "--method",
        "all",
        "--dump-objectives",
        "--out",
        path(&objectives),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let lines: Vec<serde_json::Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[2]["method"], "ls2d");
    // p5 seen from RX1: the line of sight arrives at about -15.6 deg, leaves at -15.6 deg
    let true_aoa = -(0.6f64).atan2(2.15).to_degrees();
    assert!((lines[2]["aoa_deg"].as_f64().unwrap() - true_aoa).abs() <= 0.5);
    assert!((lines[2]["aod_deg"].as_f64().unwrap() - true_aoa).abs() <= 0.5);
    for obj in [
        "ls1d_zeta.csv",
        "ls1d_kappa.csv",
        "ls2d_surface.csv",
        "ls2d_aoa_slice.csv",
        "ls2d_aod_slice.csv",
    ] {
        assert!(objectives.join(obj).is_file(), "{obj}");
    }

    // the synthesized default codebook is used when none is given
    let out = beamrss(&["estimate", "--grid", path(&grid), "--method", "ls2d"]);
    let default: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(default, lines[2]);
}

#[test]
fn eval_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.json");
    std::fs::write(
        &cfg,
        r#"{"tx_positions": [{"x": 2.4, "y": 0.0}], "seeds": [0, 1]}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("eval");
    let out = beamrss(&[
        "eval",
        "--config",
        path(&cfg),
        "--seed",
        "7",
        "--out",
        path(&out_dir),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("eval:"));
    assert!(out.stdout.is_empty());
    let csv = std::fs::read_to_string(out_dir.join("eval_records.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 2 * 3);
    assert!(csv
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(3) == Some("7") || l.split(',').nth(3) == Some("8")));
    assert!(out_dir.join("summary.json").is_file());
    assert!(out_dir.join("cdf_ls2d_all_aoa.csv").is_file());
}
