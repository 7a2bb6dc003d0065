use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn rsl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsl")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let o = rsl(args);
    assert!(o.status.success(), "rsl {args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    rsl(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path) -> PathBuf {
    let out = dir.join("synth");
    ok(&[
        "synth", "--traj", "s-curve", "--length", "60", "--seed", "3", "--building-to-vegetation", "0.2", "--out", s(&out),
    ]);
    out
}

#[test]
fn single_frame_commands_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let d = synth(tmp.path());
    let frame = d.join("lidar/000010.lpc");
    let pre = tmp.path().join("pre.lpc");
    ok(&["preprocess", "--fov-deg", "10", s(&frame), s(&pre)]);
    assert!(tmp.path().join("pre.lpc.truth").exists());

    let refined = tmp.path().join("ref.lpc");
    let report = tmp.path().join("ref.json");
    ok(&["refine", s(&pre), s(&refined), "--report", s(&report)]);
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(r["pass1"].is_object() && r["pass2"].is_object());

    let crs = tmp.path().join("ref.crs");
    ok(&["project", s(&refined), s(&crs)]);
    let windowed = tmp.path().join("win.crs");
    ok(&["project", "--window", "2", "--poses", s(&d.join("traj.csv")), s(&frame), s(&windowed)]);
    let iou = ok(&["eval", "iou", s(&windowed), s(&windowed), "--class", "building"]);
    assert!(iou.contains("\"iou\": 1.0"), "{iou}");

    let scan = d.join("scans/000010.psc");
    assert_eq!(ok(&["radar", "mse", s(&scan), s(&scan)]).trim(), "0.000000");
    let rps = tmp.path().join("k.rps");
    ok(&["radar", "filter", "--k", "12", s(&scan), s(&rps)]);
    let masked = tmp.path().join("m.rps");
    ok(&["radar", "mask", "--mode", "only-building", "--raster", s(&d.join("rasters/000010.crs")), s(&rps), s(&masked)]);
    assert_eq!(code(&["radar", "mask", "--mode", "trees", "--raster", s(&crs), s(&rps), s(&masked)]), 2);
}

#[test]
fn odometry_localization_and_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let d = synth(tmp.path());
    let (scans, rasters) = (d.join("scans"), d.join("rasters"));
    let odom = tmp.path().join("odom.csv");
    ok(&[
        "odom", "--mode", "only-building", "--k", "12", "--keyframes", "10", "--min-power", "0.9", "--imu", s(&d.join("imu.csv")),
        "--imu-weight", "1e5", "--scans", s(&scans), "--rasters", s(&rasters), "--out", s(&odom), "--report",
        s(&tmp.path().join("odom.json")),
    ]);
    let drift = ok(&["eval", "drift", s(&odom), s(&d.join("traj.csv")), "--lengths", "10:40:10", "--svg", s(&tmp.path().join("d.svg"))]);
    let drift: serde_json::Value = serde_json::from_str(&drift).unwrap();
    assert_eq!(drift["per_length"].as_array().unwrap().len(), 4);
    assert!(drift["translation_error"].as_f64().unwrap() < 5.0, "{drift}");

    let est = tmp.path().join("est.csv");
    let params = tmp.path().join("loc.json");
    std::fs::write(&params, r#"{"min_power": 0.9, "min_cell_points": 3}"#).unwrap();
    ok(&[
        "locate", "--map", s(&d.join("map.osm")), "--origin", "48.137,11.575", "--scans", s(&scans), "--rasters", s(&rasters),
        "--odom", s(&odom), "--gt", s(&d.join("traj.csv")), "--params", s(&params), "--out", s(&est),
    ]);
    let ape: serde_json::Value =
        serde_json::from_str(&ok(&["eval", "ape", s(&est), s(&d.join("traj.csv")), "--svg", s(&tmp.path().join("t.svg"))])).unwrap();
    assert!(ape["ape_m"].as_f64().unwrap() < 1.0, "{ape}");
    assert!(std::fs::read_to_string(tmp.path().join("t.svg")).unwrap().starts_with("<svg"));

    // bad length list and missing rasters for a masking mode
    assert_eq!(code(&["eval", "drift", s(&odom), s(&d.join("traj.csv")), "--lengths", "10:x"]), 2);
    assert_eq!(code(&["odom", "--mode", "only-building", "--scans", s(&scans), "--out", s(&odom)]), 2);

    let table = tmp.path().join("mse.csv");
    std::fs::write(&table, "label,mse,improvement\nseq1,0.12,8.5\nseq2,0.2,3.1\n").unwrap();
    ok(&["eval", "mse-plot", s(&table), "--svg", s(&tmp.path().join("mse.svg"))]);
}

#[test]
fn config_runs_and_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"seed": 5, "output_dir": "unused", "synth": {"enabled": true, "trajectory": "s-curve", "length_m": 40, "lidar": false}}"#,
    )
    .unwrap();
    let out = tmp.path().join("out");
    ok(&["run", s(&cfg), "--out", s(&out), "--set", "odom.enabled=true", "--set", "eval.enabled=true", "--set", "eval.lengths=[10,20]"]);
    let persisted: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(persisted["odom"]["enabled"], true);
    assert_eq!(persisted["output_dir"], s(&out));
    assert!(out.join("eval/report.json").exists() && out.join("manifest.json").exists());

    let abl = tmp.path().join("abl");
    let md = ok(&["ablation", s(&cfg), "--out", s(&abl), "--modes", "building", "--imu", "off"]);
    assert_eq!(md.lines().count(), 3, "{md}");

    // validation: unknown field, empty mode list, locate without a map source
    assert_eq!(code(&["run", s(&cfg), "--set", "odom.enabeld=true"]), 2);
    assert_eq!(code(&["ablation", s(&cfg), "--out", s(&abl), "--modes", "", "--imu", "on"]), 2);
    // stage failure: the dataset's LiDAR directory holds a broken frame
    let lidar = tmp.path().join("lidar");
    std::fs::create_dir(&lidar).unwrap();
    std::fs::write(lidar.join("000000.lpc"), b"junk").unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(
        &bad,
        format!(r#"{{"seed": 1, "output_dir": {:?}, "dataset": {{"lidar_dir": {:?}}}, "refine": {{"enabled": true}}}}"#, s(&tmp.path().join("bad")), s(&lidar)),
    )
    .unwrap();
    let o = rsl(&["run", s(&bad)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("000000"));
}
