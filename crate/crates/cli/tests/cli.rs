use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lvs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lvs"))
        .args(args)
        .env_remove("LVS_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn read_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("ln_lambda"))
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = lvs(&[
        "verify",
        "--trials",
        "100",
        "--seed",
        "7",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("verification_report.json")).unwrap()).unwrap();
    let checks = report["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 7);
    assert!(checks.iter().all(|c| c["status"] == "pass"));
}

#[test]
fn attack_respects_minimum_distance() {
    let o = lvs(&["attack", "--scenario", "fig1"]);
    assert_eq!(o.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rss = &doc["attacks"]["rss"];
    let xt = rss["true_location"].as_array().unwrap();
    let (x, y) = (xt[0].as_f64().unwrap(), xt[1].as_f64().unwrap());
    assert!(((x - 50.0).powi(2) + (y - 5.0).powi(2)).sqrt() >= 500.0 - 1e-9);
    assert!(rss["power_boost_db"].as_f64().unwrap().is_finite());
}

#[test]
fn rss_and_drss_csvs_agree_on_fig3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = lvs(&["roc", "--scenario", "fig3", "--modes", "rss,drss", "--out", out]);
    assert_eq!(o.status.code(), Some(0));
    let rss = read_rows(&dir.path().join("fig3/rss_roc.csv"));
    let drss = read_rows(&dir.path().join("fig3/drss_roc.csv"));
    assert_eq!(rss.len(), 201);
    assert_eq!(rss.len(), drss.len());
    for (a, b) in rss.iter().zip(&drss) {
        assert_eq!(a[0], b[0]);
        assert!((a[1] - b[1]).abs() <= 1e-9 && (a[2] - b[2]).abs() <= 1e-9);
    }
}

#[test]
fn same_arguments_give_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = lvs(&[
            "mc",
            "--scenario",
            "fig3",
            "--trials",
            "5000",
            "--seed",
            "9",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    let names: Vec<_> = fs::read_dir(a.path().join("fig3"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert!(names.len() >= 4);
    for name in names {
        let x = fs::read(a.path().join("fig3").join(&name)).unwrap();
        let y = fs::read(b.path().join("fig3").join(&name)).unwrap();
        assert_eq!(x, y, "{name:?} differs");
    }
}

#[test]
fn threshold_override_sets_roc_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = lvs(&[
        "roc",
        "--scenario",
        "fig2",
        "--thresholds",
        "-1,0,1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_rows(&dir.path().join("fig2/drss_roc.csv"));
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), [-1.0, 0.0, 1.0]);
}

#[test]
fn scenario_file_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("near.scenario");
    fs::write(
        &file,
        "name = near\nsigma_db = 6\ncorrelation_distance = 20\nmin_distance = 80\nmodes = drss\n\
         [base_stations]\n0, 0\n100, 10\n-100, -10\n",
    )
    .unwrap();
    let o = lvs(&["attack", "--scenario-file", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("\"drss\""));
}

#[test]
fn invalid_inputs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.scenario");
    fs::write(
        &file,
        "name = bad\nsigma_db = 6\ncorrelation_distance = 20\nmin_distance = 80\n\
         attack = fixed\ntrue_location = 129, 5\n[base_stations]\n0, 0\n100, 10\n",
    )
    .unwrap();
    let o = lvs(&["roc", "--scenario-file", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("minimum-distance"));

    fs::write(
        &file,
        "name = dup\nsigma_db = 6\ncorrelation_distance = 20\nmin_distance = 80\n[base_stations]\n0, 0\n0, 0\n",
    )
    .unwrap();
    assert_eq!(
        lvs(&["roc", "--scenario-file", file.to_str().unwrap()]).status.code(),
        Some(1)
    );

    assert_eq!(lvs(&["roc", "--scenario", "fig9"]).status.code(), Some(1));
    assert_eq!(lvs(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        lvs(&["roc", "--scenario", "fig1", "--scenario-file", "x"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(lvs(&["--help"]).status.code(), Some(0));
}

#[test]
fn failed_monte_carlo_check_exits_with_two() {
    // One trial per hypothesis: this seed puts an H0 or H1 statistic in a
    // tail where the analytic rate is far from 0/1 agreement.
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let base = [
        "mc",
        "--scenario",
        "fig3",
        "--modes",
        "rss",
        "--trials",
        "1",
        "--thresholds=-8,-6,-4,-2,0,2,4,6,8",
    ];
    let run = |seed: &str| {
        let mut args = base.to_vec();
        args.extend(["--seed", seed, "--out", out]);
        lvs(&args)
    };
    let o = run("14");
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL"));
    assert_eq!(run("13").status.code(), Some(0));
}
