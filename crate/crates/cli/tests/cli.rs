use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qretro::wigner::WignerGrid;
use qretro_cli::Table;

fn qretro(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qretro")).args(args).output().expect("binary runs")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_owned()
}

fn table(path: &Path) -> Table {
    Table::read_csv(fs::File::open(path).unwrap()).unwrap()
}

#[test]
fn version_is_json() {
    let o = qretro(&["--version"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["name"], "qretro");
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["commands"].as_array().unwrap().len(), 4);
}

#[test]
fn missing_subcommand_and_bad_flags_exit_two() {
    assert_eq!(qretro(&[]).status.code(), Some(2));
    assert_eq!(qretro(&["negativity-map", "--eta-steps", "x"]).status.code(), Some(2));
}

#[test]
fn negativity_map_grid_and_contour() {
    let dir = tempfile::tempdir().unwrap();
    let o = qretro(&["--out", &out_arg(dir.path()), "negativity-map", "--eta-steps", "20", "--nu-steps", "9"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = table(&dir.path().join("negativity_map.csv"));
    assert_eq!(t.headers, ["eta", "nu", "negativity", "nu_star"]);
    assert_eq!(t.rows.len(), 20 * 9);
    let corner = t.rows.iter().find(|r| r[0] == 1.0 && r[1] == 0.0).unwrap();
    assert!((corner[2] + 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
    for r in &t.rows {
        assert!((r[3] + (1.0 - r[0] / 2.0).ln()).abs() < 1e-15);
    }
    let nus = t.column("nu").unwrap();
    assert_eq!(nus.iter().cloned().fold(0.0, f64::max), 2.0);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("negativity_map.json")).unwrap()).unwrap();
    assert_eq!(meta["rows"], 180);
}

#[test]
fn negativity_map_rejects_bad_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"eta_steps": 1}"#).unwrap();
    let o = qretro(&["--out", &out_arg(dir.path()), "negativity-map", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
    fs::write(&cfg, r#"{"eta_step": 4}"#).unwrap();
    let o = qretro(&["negativity-map", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fidelity_curves_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = qretro(&[
        "--out", &out_arg(dir.path()), "--dim", "24", "fidelity-curves", "--n-max", "6", "--eta-steps", "11",
        "--nu", "0,0.2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = table(&dir.path().join("fidelity_curves.csv"));
    assert_eq!(t.headers, ["eta", "n", "f_off", "f_off_retro", "pr_on_nu=0", "pr_on_nu=0.2"]);
    assert_eq!(t.rows.len(), 11 * 7);
    for r in &t.rows {
        if r[1] == 0.0 {
            assert_eq!(r[2], r[0]);
        }
        if r[0] == 0.0 {
            assert!((r[5] - (1.0 - (-0.2f64).exp())).abs() < 1e-15);
        }
        assert!(r[2..].iter().all(|v| (0.0..=1.0).contains(v)));
    }
    assert_eq!(qretro(&["--dim", "5", "fidelity-curves", "--n-max", "5"]).status.code(), Some(2));
}

#[test]
fn hd_wigner_element_and_retrodicted_state() {
    let dir = tempfile::tempdir().unwrap();
    let o = qretro(&["--out", &out_arg(dir.path()), "hd-wigner"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("hd_wigner.json")).unwrap()).unwrap();
    assert_eq!(meta["parameters"]["config"]["eta"], 0.75);
    assert_eq!(meta["parameters"]["config"]["x_i"], 1.0);

    let o = qretro(&["--out", &out_arg(dir.path()), "hd-wigner", "--retro", "--eta", "0.98"]);
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("hd_wigner.csv")).unwrap();
    let w = WignerGrid::read_csv(csv.as_bytes()).unwrap();
    assert!((w.integral() - 1.0).abs() < 1e-3);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("hd_wigner.json")).unwrap()).unwrap();
    let db = meta["parameters"]["fitted_squeezing_db"].as_f64().unwrap();
    assert!((db + 16.9).abs() < 0.1, "{db}");

    assert_eq!(qretro(&["hd-wigner", "--eta", "1"]).status.code(), Some(2));
}

#[test]
fn tomo_example_config_meets_targets_and_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = qretro(&["--out", &out_arg(dir.path()), "tomo"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("summary.json")).unwrap()).unwrap();
    assert!(summary["completeness_residual"].as_f64().unwrap() <= 1e-8);
    let eta = 0.6;
    let proj = summary["projectivity"]["off"].as_f64().unwrap();
    assert!((proj - eta / (2.0 - eta)).abs() < 0.02, "{proj}");
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["off"]["projectivity"].as_f64().unwrap(), proj);

    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 7);
    for name in names {
        let x = fs::read(a.path().join(&name)).unwrap();
        let y = fs::read(b.path().join(&name)).unwrap();
        assert!(x == y, "{name:?} differs between runs");
    }
}

#[test]
fn tomo_seed_flag_changes_counts_only_through_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.json");
    fs::write(
        &cfg,
        r#"{"detector": {"type": "pnrd"}, "dim": 10,
            "probes": {"magnitudes": [0.0, 0.5, 1.0, 1.5, 2.0], "phases": 4},
            "shots": 2000, "qst": true}"#,
    )
    .unwrap();
    let run = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        let o = qretro(&["--out", out.to_str().unwrap(), "--seed", seed, "tomo", cfg.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read_to_string(out.join("counts.csv")).unwrap()
    };
    let (x, y, z) = (run("1", "a"), run("1", "b"), run("2", "c"));
    assert_eq!(x, y);
    assert_ne!(x, z);
    assert!(dir.path().join("a/qst_states.json").exists());
    let resolved: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/config.json")).unwrap()).unwrap();
    assert_eq!(resolved["seed"], 1);
}

#[test]
fn tomo_config_errors_and_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"detector": {"type": "apd", "eta": 0.6}}"#).unwrap();
    assert_eq!(qretro(&["tomo", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(qretro(&["tomo", "/nonexistent/config.json"]).status.code(), Some(2));

    fs::write(
        &cfg,
        r#"{"detector": {"type": "apd", "eta": 0.6, "nu": 0.05}, "dim": 10,
            "probes": {"magnitudes": [0.0, 0.5, 1.0, 1.5, 2.0], "phases": 4},
            "maxlik": {"max_iters": 1}}"#,
    )
    .unwrap();
    let out = dir.path().join("run");
    let o = qretro(&["--out", out.to_str().unwrap(), "tomo", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["stop_reason"], "max_iters");
}

#[test]
fn print_example_round_trips() {
    let o = qretro(&["tomo", "--print-example"]);
    assert!(o.status.success());
    let cfg: qretro_cli::tomo::TomoConfig = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(cfg, qretro_cli::tomo::TomoConfig::example());
}
