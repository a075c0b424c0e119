use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn lorajam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lorajam")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn json(o: &Output) -> serde_json::Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn airtime_table() {
    let o = lorajam(&["airtime", "--sfs", "7,12", "--sizes", "17,57"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("7,17,51456,51.456"));
    assert!(text.contains("12,17,1318912,1318.912"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn window_json() {
    let v = json(&lorajam(&["window", "--sfs", "9", "--sizes", "27", "--format", "json"]));
    assert_eq!(v[0]["window_us"], 102_400);
    assert_eq!(v[0]["read_point_us"], 123_904);
}

fn predicted_successes(mean: &str) -> usize {
    let o = lorajam(&["matrix", "--frames", "0", "--latency-mean", mean, "--format", "csv"]);
    assert!(o.status.success());
    stdout(&o).lines().skip(1).filter(|l| l.split(',').nth(3) == Some("S")).count()
}

#[test]
fn matrix_prediction_improves_with_faster_link() {
    assert!(predicted_successes("10ms") > predicted_successes("100.83ms"));
    let o = lorajam(&["matrix", "--frames", "0"]);
    let text = stdout(&o);
    assert!(text.lines().nth(1).unwrap().starts_with("17\tF\tF\tF\tF\tS\tS"));
    assert!(text.contains("note: SF8"));
}

#[test]
fn selective_scenario_jams_every_sf() {
    let base = fs::read_to_string(scenario("selective.toml")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for sf in 7..=12 {
        let text = base.replace("sf = 9", &format!("sf = {sf}")).replace("max_frames = 1000", "max_frames = 200");
        let path = dir.path().join(format!("sf{sf}.toml"));
        fs::write(&path, text).unwrap();
        let v = json(&lorajam(&["run", path.to_str().unwrap(), "--format", "json"]));
        let target = &v["devices"]["target"];
        let jam = target["jammed"].as_f64().unwrap() / target["sent"].as_f64().unwrap();
        assert!(jam >= 0.98, "SF{sf}: {jam}");
        assert_eq!(v["devices"]["control"]["delivered"], 200);
    }
}

#[test]
fn empty_device_list_gives_zero_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.toml");
    fs::write(&path, "seed = 3\nduration = \"1h\"\n").unwrap();
    let v = json(&lorajam(&["run", path.to_str().unwrap(), "--format", "json"]));
    assert_eq!(v["events"], 0);
    assert!(v["devices"].as_object().unwrap().is_empty());
}

#[test]
fn runs_are_reproducible_and_seed_overridable() {
    let p = scenario("wormhole.toml");
    let p = p.to_str().unwrap();
    let a = json(&lorajam(&["run", p, "--format", "json"]));
    let b = json(&lorajam(&["run", p, "--format", "json"]));
    let c = json(&lorajam(&["run", p, "--format", "json", "--seed", "99"]));
    assert_eq!(a["digest"], b["digest"]);
    assert_ne!(a["digest"], c["digest"]);
    assert_eq!(c["seed"], 99);
}

#[test]
fn out_dir_receives_log_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = lorajam(&["run", scenario("detector.toml").to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).is_empty());
    for f in ["events.jsonl", "metrics.json", "devices.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let events = out.join("events.jsonl");
    let alarms = lorajam(&["detect", events.to_str().unwrap(), "--period", "60s", "--k", "3"]);
    let text = stdout(&alarms);
    assert_eq!(text.lines().count(), 2, "{text}");
    assert!(text.lines().nth(1).unwrap().starts_with("26050001,795"));
}

#[test]
fn schema_violations_exit_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "seed = 1\nduration = \"1h\"\ncolour = 3\n").unwrap();
    let o = lorajam(&["run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert_eq!(lorajam(&["run", "/no/such/file.toml"]).status.code(), Some(2));
    assert_eq!(lorajam(&["airtime", "--sfs", "13"]).status.code(), Some(2));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = lorajam(&["airtime", "--out-dir", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn builtin_rssi_sweep_has_sharp_step() {
    let o = lorajam(&["rssi-sweep", "--from", "20", "--to", "40", "--step", "4", "--frames", "20"]);
    assert!(o.status.success());
    let rows: Vec<(f64, f64)> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 6);
    for (diff, pct) in rows {
        assert_eq!(pct, if diff >= 36.0 { 100.0 } else { 0.0 }, "{diff}");
    }
    assert_eq!(lorajam(&["rssi-sweep", "--from", "5", "--to", "1"]).status.code(), Some(2));
}

#[test]
fn analyze_trace_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    fs::write(
        &path,
        "timestamp_us,channel_hz,sf,wire_len,dev_addr,status\n\
         0,868100000,7,19,26000001,accept\n\
         10,868100000,7,19,26000002,accept\n\
         20,868300000,9,19,26000001,accept\n\
         30,868500000,7,18,,reject_crc\n\
         40,868500000,7,18,26000003,accept\n",
    )
    .unwrap();
    let v = json(&lorajam(&["analyze-trace", path.to_str().unwrap()]));
    assert_eq!(v["message_count"], 5);
    assert_eq!(v["distinct_devices"], 3);
    assert_eq!(v["channel_histogram"]["868100000"], 0.4);
    assert!((v["mean_payload_length"].as_f64().unwrap() - 5.6).abs() < 1e-9);
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "timestamp_us,channel_hz,sf,wire_len,dev_addr,status\n").unwrap();
    assert_eq!(lorajam(&["analyze-trace", empty.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn detect_needs_one_mode() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    fs::write(&path, "timestamp_us,channel_hz,sf,wire_len,dev_addr,status\n0,868100000,7,17,26000001,accept\n").unwrap();
    let p = path.to_str().unwrap();
    assert_eq!(lorajam(&["detect", p]).status.code(), Some(2));
    assert_eq!(lorajam(&["detect", p, "--period", "60s", "--warmup", "1h"]).status.code(), Some(2));
    let o = lorajam(&["detect", p, "--period", "60s", "--format", "json"]);
    assert_eq!(json(&o), serde_json::json!([]));
}
