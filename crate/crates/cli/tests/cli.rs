use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_apple-picker"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn synth(dir: &Path, name: &str, seed: u64) -> PathBuf {
    let out = dir.join(format!("{name}.mrc"));
    let o = run(bin().args(["synth", "--width", "320", "--height", "288", "--num-particles", "8", "--diameter", "40", "--snr", "0.8"])
        .args(["--seed", &seed.to_string(), "--pixel-size", "1.1", "-o"])
        .arg(&out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

const SMALL: [&str; 10] = ["--particle-size", "40", "--query-size", "32", "--container-size", "64", "--bin", "1", "--crop", "0"];

#[test]
fn synth_pick_evaluate_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let mrc = synth(dir.path(), "a", 3);
    assert!(dir.path().join("a_truth.csv").exists());
    let summary = dir.path().join("summary.csv");
    let o = run(bin().arg("pick").arg(&mrc).args(SMALL).arg("--summary").arg(&summary));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("1 micrographs, 0 failed"));
    assert!(fs::read_to_string(&summary).unwrap().starts_with("input,output,picks,seconds,error"));

    let report = dir.path().join("eval.csv");
    let o = run(bin().args(["evaluate", "--diameter", "40", "--picks"]).arg(dir.path().join("a.box"))
        .arg("--truth").arg(dir.path().join("a_truth.csv")).arg("--report").arg(&report));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&report).unwrap();
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    let (precision, recall) = (row[3], row[4]);
    assert!(precision >= 0.9 && recall >= 0.6, "{text}");
}

#[test]
fn exit_codes_reflect_failures() {
    let dir = tempfile::tempdir().unwrap();
    let good = synth(dir.path(), "good", 4);
    let bad = dir.path().join("bad.mrc");
    fs::write(&bad, b"not an mrc file").unwrap();
    let out = dir.path().join("out");

    let o = run(bin().arg("pick").arg(&good).arg(&bad).args(SMALL).arg("-o").arg(&out));
    assert_eq!(o.status.code(), Some(1));
    assert!(out.join("good.box").exists() && !out.join("bad.box").exists());
    assert!(String::from_utf8_lossy(&o.stdout).contains("2 micrographs, 1 failed"));

    let o = run(bin().arg("pick").arg(&bad).args(SMALL).arg("-o").arg(&out));
    assert_eq!(o.status.code(), Some(2));

    // No particle size anywhere is a configuration error.
    let o = run(bin().arg("pick").arg(&good));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn odd_query_size_is_rounded_down() {
    let dir = tempfile::tempdir().unwrap();
    let mrc = synth(dir.path(), "odd", 5);
    let mut args = SMALL.to_vec();
    args[3] = "33";
    let o = run(bin().arg("pick").arg(&mrc).args(&args));
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("query size 33 is odd; using 32"));
}

#[test]
fn star_output_and_overlay() {
    let dir = tempfile::tempdir().unwrap();
    let mrc = synth(dir.path(), "s", 6);
    let o = run(bin().arg("pick").arg(&mrc).args(SMALL).args(["--out-format", "star", "--overlay"]));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let star = fs::read_to_string(dir.path().join("s.star")).unwrap();
    assert!(star.contains("loop_") && star.contains("_rlnCoordinateX #1"));
    for ext in ["s.overlay.pgm", "s.mask.pgm"] {
        assert!(fs::read(dir.path().join(ext)).unwrap().starts_with(b"P5"));
    }
}

#[test]
fn config_file_and_flags_layer() {
    let dir = tempfile::tempdir().unwrap();
    let mrc = synth(dir.path(), "c", 7);
    let cfg = dir.path().join("picker.toml");
    fs::write(&cfg, "preset = \"betagal\"\nparticle_size = 40\nbin_factor = 1\nborder_crop = 0\nquery_size = 32\ncontainer_size = 64\nout_format = \"star\"\n").unwrap();
    let o = run(bin().arg("pick").arg(&mrc).arg("--config").arg(&cfg).args(["--out-format", "box"]));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("c.box").exists() && !dir.path().join("c.star").exists());

    fs::write(&cfg, "particle_size = 40\nwindow = 3\n").unwrap();
    let o = run(bin().arg("pick").arg(&mrc).arg("--config").arg(&cfg));
    assert_eq!(o.status.code(), Some(2));
    let o = run(bin().arg("pick").arg(&mrc).args(SMALL).args(["--preset", "nonesuch"]));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn repeated_picks_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mrc = synth(dir.path(), "d", 8);
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let o = run(bin().arg("pick").arg(&mrc).args(SMALL).args(["--threads", "2", "-o"]).arg(&out));
        assert_eq!(o.status.code(), Some(0));
        outputs.push(fs::read(out.join("d.box")).unwrap());
    }
    assert!(!outputs[0].is_empty());
    assert_eq!(outputs[0], outputs[1]);
}
