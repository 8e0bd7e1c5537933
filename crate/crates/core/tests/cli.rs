use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dermalight::formats::{load_lut, load_param_maps, read_image, write_image, PngDepth};
use dermalight::mapops::RgbImage;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dermalight"));
    c.env_remove("DERMALIGHT_THREADS").env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn run_env(args: &[&str], key: &str, value: &str) -> Output {
    bin().args(args).env(key, value).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SIM: [&str; 10] = ["--vm", "0.02", "--vb", "0.02", "--t", "100", "--phim", "0.5", "--phih", "0.5"];

fn simulate(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["simulate"];
    args.extend(SIM);
    args.extend(["--out", s(out)]);
    args.extend(extra);
    run(&args)
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let oa = simulate(&a, &["--photons", "10000", "--seed", "1"]);
    assert_eq!(code(&oa), 0, "{}", stderr(&oa));
    let ob = simulate(&b, &["--photons", "10000", "--seed", "1"]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(stdout(&oa), stdout(&ob));
    assert!(stdout(&oa).starts_with("linear_rgb "));
    let text = std::fs::read_to_string(&a).unwrap();
    assert!(text.starts_with("wavelength_nm,reflectance,stderr"));
    assert_eq!(text.lines().count(), 42);
    assert!(dir.path().join("a.csv.run.json").exists());
    assert!(!dir.path().join(".dermalight.lock").exists());
}

#[test]
fn simulate_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let mut args = vec!["simulate"];
    args.extend(SIM);
    args.extend(["--photons", "5000", "--seed", "3", "--out"]);
    let mut one = args.clone();
    one.push(s(&a));
    let mut three = args.clone();
    three.push(s(&b));
    assert_eq!(code(&run_env(&one, "DERMALIGHT_THREADS", "1")), 0);
    assert_eq!(code(&run_env(&three, "DERMALIGHT_THREADS", "3")), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn bad_thread_count_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate"];
    args.extend(SIM);
    let out = dir.path().join("x.csv");
    args.extend(["--photons", "10", "--out", s(&out)]);
    assert_eq!(code(&run_env(&args, "DERMALIGHT_THREADS", "zero")), 2);
}

#[test]
fn missing_required_flag_exits_2_with_usage() {
    let o = run(&["simulate", "--vm", "0.02"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn unknown_flag_and_subcommand_rejected() {
    let mut args = vec!["simulate", "--bogus", "1"];
    args.extend(SIM);
    assert_eq!(code(&run(&args)), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
}

#[test]
fn help_lists_every_flag() {
    let o = run(&["simulate", "--help"]);
    assert_eq!(code(&o), 0);
    let h = stdout(&o);
    for flag in [
        "--vm", "--vb", "--t", "--phim", "--phih", "--photons", "--seed", "--roulette-threshold",
        "--roulette-survival", "--max-events", "--fresnel", "--illuminant", "--out", "--config",
    ] {
        assert!(h.contains(flag), "missing {flag}");
    }
    assert!(h.contains("1000000"), "default photon count not shown");
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn out_of_range_parameters_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let o = run(&[
        "simulate", "--vm", "1.5", "--vb", "0.02", "--t", "100", "--phim", "0.5", "--phih", "0.5", "--out", s(&out),
    ]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn config_file_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "photons = 2000\nseed = 5\n# train-only key is ignored here\nepochs = 3\n").unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let o = simulate(&a, &["--config", s(&cfg), "--seed", "6"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(code(&simulate(&b, &["--photons", "2000", "--seed", "6"])), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.csv.run.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["photons"]["value"], "2000");
    assert_eq!(meta["config"]["photons"]["source"], "config");
    assert_eq!(meta["config"]["seed"]["value"], "6");
    assert_eq!(meta["config"]["seed"]["source"], "flag");
    assert_eq!(meta["config"]["roulette_survival"]["source"], "default");

    std::fs::write(&cfg, "photns = 2000\n").unwrap();
    assert_eq!(code(&simulate(&a, &["--config", s(&cfg)])), 2);
}

#[test]
fn held_lock_blocks_second_run() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join(".dermalight.lock"), b"").unwrap();
    let o = simulate(&dir.path().join("a.csv"), &["--photons", "10"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("another dermalight run"));
}

#[test]
fn missing_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["train", "--dataset", s(&dir.path().join("nope.dset")), "--out", s(&dir.path().join("w"))]);
    assert_eq!(code(&o), 2);
}

fn build_small_lut(dir: &Path) -> PathBuf {
    let lut = dir.join("small.dlut");
    let o = run(&["build-lut", "--res", "3,3,2,2,2", "--photons", "300", "--seed", "2", "--out", s(&lut)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    lut
}

/// One texel per LUT node, holding exactly the stored albedo.
fn lut_chart(lut: &Path, out: &Path) {
    let lut = load_lut(lut).unwrap();
    let px: Vec<[f64; 3]> = lut.values().iter().map(|v| v.to_array()).collect();
    let n = px.len();
    write_image(out, &RgbImage::new(n, 1, px).unwrap(), PngDepth::Sixteen).unwrap();
}

#[test]
fn lut_invert_reconstruct_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let lut = build_small_lut(dir.path());
    let chart = dir.path().join("chart.pfm");
    lut_chart(&lut, &chart);
    let maps = dir.path().join("maps");
    let o = run(&["invert", "--method", "lut", "--lut", s(&lut), "--image", s(&chart), "--out", s(&maps)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let recon = dir.path().join("recon.pfm");
    let o = run(&["reconstruct", "--method", "lut", "--lut", s(&lut), "--maps", s(&maps), "--out", s(&recon)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(&["metrics", "--a", s(&chart), "--b", s(&recon)]);
    assert_eq!(code(&o), 0);
    let m: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(m["mse"].as_f64(), Some(0.0), "{m}");
}

#[test]
fn neural_pipeline_runs_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let lut = build_small_lut(dir.path());
    let chart = dir.path().join("chart.png");
    lut_chart(&lut, &chart);
    let pipeline = |tag: &str| -> Vec<Vec<u8>> {
        let p = |name: &str| dir.path().join(format!("{tag}_{name}"));
        let ds = p("d.dset");
        let o = run(&["gen-dataset", "--n", "600", "--source", "lut", "--lut", s(&lut), "--seed", "4", "--out", s(&ds)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let w = p("w.dmlp");
        let hist = p("h.csv");
        let o = run(&[
            "train", "--dataset", s(&ds), "--out", s(&w), "--epochs", "3", "--batch", "64", "--width", "12",
            "--history", s(&hist),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let maps = p("maps");
        let o = run(&["invert", "--method", "neural", "--weights", s(&w), "--image", s(&chart), "--out", s(&maps)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let recon = p("r.png");
        let o = run(&[
            "reconstruct", "--method", "neural", "--weights", s(&w), "--maps", s(&maps), "--out", s(&recon),
            "--png-depth", "8",
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let err = p("err.png");
        let o = run(&["metrics", "--a", s(&chart), "--b", s(&recon), "--gain", "4", "--error-map", s(&err)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let mut bytes = vec![];
        for f in [ds, w, hist, maps.join("melanin.pfm"), maps.join("params.json"), recon, err] {
            bytes.push(std::fs::read(f).unwrap());
        }
        let last = std::fs::read(p("w.dmlp.last")).unwrap();
        bytes.push(last);
        bytes
    };
    assert_eq!(pipeline("a"), pipeline("b"));
}

#[test]
fn flush_preset_edit() {
    let dir = tempfile::tempdir().unwrap();
    let lut = build_small_lut(dir.path());
    let chart = dir.path().join("chart.pfm");
    lut_chart(&lut, &chart);
    let maps = dir.path().join("maps");
    assert_eq!(code(&run(&["invert", "--method", "lut", "--lut", s(&lut), "--image", s(&chart), "--out", s(&maps)])), 0);
    let edited = dir.path().join("edited");
    let o = run(&["edit", "--maps", s(&maps), "--preset", "flush", "--out", s(&edited)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let before = load_param_maps(&maps).unwrap();
    let after = load_param_maps(&edited).unwrap();
    for i in 0..before.len() {
        let want = (before.planes[1][i] * 1.7).min(1.0) as f32 as f64;
        assert!((after.planes[1][i] - want).abs() <= 1e-7 * want.max(1e-3), "{} vs {want}", after.planes[1][i]);
        assert_eq!(after.planes[4][i], 0.001f32 as f64);
        assert_eq!(after.planes[0][i], before.planes[0][i]);
    }
    assert_eq!(code(&run(&["edit", "--maps", s(&maps), "--preset", "sunburn", "--out", s(&edited)])), 2);
    assert_eq!(code(&run(&["edit", "--maps", s(&maps), "--op", "melanin:twist:2", "--out", s(&edited)])), 2);
    let o = run(&["edit", "--maps", s(&maps), "--op", "thickness:set:80", "--out", s(&edited)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(load_param_maps(&edited).unwrap().planes[2].iter().all(|&t| t == 80.0));
}

#[test]
fn masked_texels_pass_through() {
    let dir = tempfile::tempdir().unwrap();
    let lut = build_small_lut(dir.path());
    let chart = dir.path().join("chart.pfm");
    lut_chart(&lut, &chart);
    let img = read_image(&chart).unwrap();
    let mask = dir.path().join("mask.pfm");
    let data: Vec<f32> = (0..img.width).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
    dermalight::formats::write_pfm(&mask, img.width, 1, 1, &data).unwrap();
    let maps = dir.path().join("maps");
    let args = ["invert", "--method", "lut", "--lut", s(&lut), "--image", s(&chart), "--mask", s(&mask), "--out", s(&maps)];
    assert_eq!(code(&run(&args)), 0);
    let recon = dir.path().join("r.pfm");
    let o = run(&[
        "reconstruct", "--method", "lut", "--lut", s(&lut), "--maps", s(&maps), "--passthrough", s(&chart), "--out",
        s(&recon),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(read_image(&recon).unwrap(), img);
}

#[test]
fn export_data_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("data");
    let o = run(&["export-data", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["cmf.csv", "illuminant.csv", "extinction.csv", "melanin_absorption.csv", "xyz_to_rgb.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert_eq!(code(&run(&["export-data", "--out", s(&out), "--illuminant", "d50"])), 2);
}

#[test]
fn diverging_training_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let lut = build_small_lut(dir.path());
    let ds = dir.path().join("d.dset");
    assert_eq!(code(&run(&["gen-dataset", "--n", "300", "--lut", s(&lut), "--out", s(&ds)])), 0);
    let o = run(&[
        "train", "--dataset", s(&ds), "--out", s(&dir.path().join("w")), "--epochs", "20", "--batch", "32", "--lr", "1e300",
    ]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("diverged"));
}
