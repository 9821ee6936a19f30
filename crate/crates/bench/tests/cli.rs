//! End-to-end checks of the `summix` binary: argument surface, exit codes,
//! file round trips.

use std::path::PathBuf;
use std::process::{Command, Output};

fn summix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_summix")).args(args).output().expect("spawn summix")
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("summix_cli_{}_{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn mask_prints_the_grid() {
    let out = summix(&["mask", "--t", "6", "--chunk-frames", "2", "--left", "1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(
        rows,
        vec!["110000", "110000", "111100", "111100", "001111", "001111"]
    );

    let inf = summix(&["mask", "--t", "4", "--chunk-frames", "2", "--left", "infinite"]);
    let text = String::from_utf8(inf.stdout).unwrap();
    assert_eq!(text.lines().last().unwrap(), "1111");
}

#[test]
fn invalid_mask_args_exit_2() {
    let out = summix(&["mask", "--t", "0", "--chunk-frames", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = summix(&["mask", "--t", "4", "--chunk-frames", "2", "--left", "sideways"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_init_encode_pipeline() {
    let dir = workdir("pipeline");
    let feats = dir.join("in.smxf");
    let model = dir.join("model.smxc");
    let enc = dir.join("enc.smxf");

    let out = summix(&[
        "synth", "--duration-s", "2", "--dim", "6", "--seed", "3", "--out",
        feats.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = summix(&[
        "init", "--mixing", "summary", "--d-model", "8", "--blocks", "2", "--heads", "2",
        "--conv-kernel", "5", "--subsampling", "2", "--input-dim", "6", "--seed", "1", "--out",
        model.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = summix(&[
        "encode", "--features", feats.to_str().unwrap(), "--checkpoint", model.to_str().unwrap(),
        "--chunk-ms", "160", "--out", enc.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let encoded = summix::features_io::load_feature_file(&enc).unwrap();
    assert_eq!(encoded.num_frames(), 200 / 2);
    assert_eq!(encoded.dim(), 8);
    assert_eq!(encoded.frame_shift_ms, 20.0);

    // dim mismatch between features and checkpoint is a validation error
    let bad = summix(&[
        "synth", "--duration-s", "1", "--dim", "4", "--seed", "3", "--out",
        feats.to_str().unwrap(),
    ]);
    assert!(bad.status.success());
    let out = summix(&[
        "encode", "--features", feats.to_str().unwrap(), "--checkpoint", model.to_str().unwrap(),
        "--chunk-ms", "160", "--out", enc.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn bench_writes_csv_json_and_plot() {
    let dir = workdir("bench");
    let csv = dir.join("report.csv");
    let json = dir.join("report.json");
    let svg = dir.join("report.svg");

    let out = summix(&[
        "bench", "--mixing", "summary", "--durations", "0.5,1", "--chunk-ms", "160",
        "--repeats", "2", "--d-model", "16", "--blocks", "2", "--heads", "2",
        "--conv-kernel", "5", "--subsampling", "2", "--feature-dim", "8", "--out",
        csv.to_str().unwrap(), "--plot", svg.to_str().unwrap(), "--seed", "5",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let rows = summix::report::parse_report_csv(&csv).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].mixing, "summary");
    assert_eq!(rows[0].left_context, "infinite");
    assert!(rows[0].rtf > 0.0);
    assert!(rows[1].duration_s > rows[0].duration_s);

    let svg_text = std::fs::read_to_string(&svg).unwrap();
    assert!(svg_text.starts_with("<svg"));
    assert!(svg_text.contains("<polyline"));

    let out = summix(&[
        "bench", "--mixing", "mhsa", "--durations", "0.5", "--chunk-ms", "160", "--repeats",
        "2", "--d-model", "16", "--blocks", "1", "--heads", "2", "--conv-kernel", "5",
        "--subsampling", "2", "--feature-dim", "8", "--precision", "f64", "--out",
        json.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(doc["rows"][0]["mixing"], "mhsa");

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn bench_to_unwritable_path_exits_3() {
    let out = summix(&[
        "bench", "--mixing", "summary", "--durations", "0.5", "--chunk-ms", "160", "--repeats",
        "1", "--d-model", "8", "--blocks", "1", "--heads", "2", "--conv-kernel", "3",
        "--subsampling", "1", "--feature-dim", "4", "--out", "/nonexistent/dir/report.csv",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn throughput_mode_respects_thread_cap() {
    let out = Command::new(env!("CARGO_BIN_EXE_summix"))
        .env("SUMMIX_THREADS", "1")
        .args([
            "bench", "--mixing", "summary", "--durations", "0.5", "--chunk-ms", "160",
            "--d-model", "8", "--blocks", "1", "--heads", "2", "--conv-kernel", "3",
            "--subsampling", "1", "--feature-dim", "4", "--streams", "4", "--out",
            "/tmp/ignored.csv",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("1 streams"), "{text}");
}
