//! End-to-end checks of the command line binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_softbit-plc"))
}

fn run_ok(command: &mut Command) -> Output {
    let output = command.output().expect("binary runs");
    assert!(
        output.status.success(),
        "command failed: {:?}\nstderr: {}",
        command,
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn geometry_args(command: &mut Command) -> &mut Command {
    command.args(["--header-words", "1", "--payload-words", "16"])
}

fn gen_stream(dir: &Path, name: &str, frames: usize) -> std::path::PathBuf {
    let path = dir.join(name);
    run_ok(geometry_args(bin().arg("gen-stream"))
        .args(["--frames", &frames.to_string(), "--seed", "3"])
        .arg(&path));
    path
}

#[test]
fn no_loss_conceal_reproduces_input_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let input = gen_stream(dir.path(), "input.cod", 40);

    let embedded = dir.path().join("embedded.cod");
    run_ok(geometry_args(bin().arg("embed"))
        .args(["--first-frame", "self"])
        .arg(&input)
        .arg(&embedded));
    assert_eq!(
        fs::metadata(&input).unwrap().len(),
        fs::metadata(&embedded).unwrap().len(),
        "embedding must not change the file size"
    );

    let pattern = dir.path().join("none.pattern");
    run_ok(bin()
        .arg("simulate-loss")
        .args(["--frames", "40", "--flr", "0.0", "--seed", "9"])
        .arg(&pattern));

    let output = dir.path().join("concealed.cod");
    let report = dir.path().join("report.csv");
    run_ok(geometry_args(bin().arg("conceal"))
        .arg("--loss")
        .arg(&pattern)
        .arg("--report")
        .arg(&report)
        .arg(&embedded)
        .arg(&output));

    assert_eq!(fs::read(&input).unwrap(), fs::read(&output).unwrap());
    let report_text = fs::read_to_string(&report).unwrap();
    assert_eq!(
        report_text,
        "total,lost,recovered_exact,concealed_repetition,unrecovered\n40,0,0,0,0\n"
    );
}

#[test]
fn lossy_conceal_recovers_isolated_losses() {
    let dir = tempfile::tempdir().unwrap();
    let input = gen_stream(dir.path(), "input.cod", 30);

    let embedded = dir.path().join("embedded.cod");
    run_ok(geometry_args(bin().arg("embed")).arg(&input).arg(&embedded));

    // hand-written pattern with two isolated losses
    let pattern = dir.path().join("isolated.pattern");
    let flags: String = (0..30)
        .map(|i| if i == 5 || i == 20 { 'L' } else { 'R' })
        .collect();
    fs::write(&pattern, format!("# flr=0.066 seed=0 model=manual params=-\n{flags}\n")).unwrap();

    let output = dir.path().join("concealed.cod");
    let report = dir.path().join("report.csv");
    run_ok(geometry_args(bin().arg("conceal"))
        .arg("--loss")
        .arg(&pattern)
        .arg("--report")
        .arg(&report)
        .arg(&embedded)
        .arg(&output));

    // both isolated losses recovered bit-exactly: output equals input
    assert_eq!(fs::read(&input).unwrap(), fs::read(&output).unwrap());
    assert!(fs::read_to_string(&report)
        .unwrap()
        .ends_with("30,2,2,0,0\n"));
}

#[test]
fn fec_round_trip_without_loss() {
    let dir = tempfile::tempdir().unwrap();
    let input = gen_stream(dir.path(), "input.cod", 10);

    let encoded = dir.path().join("encoded.cod");
    run_ok(geometry_args(bin().arg("fec-encode")).arg(&input).arg(&encoded));
    // 10 data frames -> 13 on the wire, 34 bytes per frame at this geometry
    assert_eq!(fs::metadata(&encoded).unwrap().len(), 13 * 34);

    let pattern = dir.path().join("none.pattern");
    run_ok(bin()
        .arg("simulate-loss")
        .args(["--frames", "13", "--flr", "0.0", "--seed", "1"])
        .arg(&pattern));

    let decoded = dir.path().join("decoded.cod");
    run_ok(geometry_args(bin().arg("fec-decode"))
        .arg("--loss")
        .arg(&pattern)
        .arg(&encoded)
        .arg(&decoded));
    assert_eq!(fs::read(&input).unwrap(), fs::read(&decoded).unwrap());
}

#[test]
fn sweep_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.conf");
    fs::write(
        &config,
        "flr_points = 0.0,0.1\nruns_per_point = 2\nbase_seed = 11\n\
         methods = piggyback,repetition\nframes = 40\nstream_seed = 2\n\
         header_words = 1\npayload_words = 16\n",
    )
    .unwrap();

    let out = dir.path().join("rows.csv");
    run_ok(bin()
        .arg("sweep")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .arg("--export-dir")
        .arg(dir.path().join("exports")));

    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("method,flr_target,"));
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 2);
    assert!(dir.path().join("rows.summary.dat").exists());
    assert!(dir.path().join("exports/reference.cod").exists());
    assert!(dir
        .path()
        .join("exports/piggyback_flr000_run00.cod")
        .exists());
}

#[test]
fn mismatched_pattern_length_fails() {
    let dir = tempfile::tempdir().unwrap();
    let input = gen_stream(dir.path(), "input.cod", 8);
    let pattern = dir.path().join("short.pattern");
    fs::write(&pattern, "RRRR\n").unwrap();

    let output = bin()
        .arg("conceal")
        .args(["--header-words", "1", "--payload-words", "16"])
        .arg("--loss")
        .arg(&pattern)
        .arg(&input)
        .arg(dir.path().join("out.cod"))
        .output()
        .unwrap();
    assert!(!output.status.success());
}

#[test]
fn truncated_stream_fails_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cod");
    fs::write(&bad, vec![0u8; 33]).unwrap();
    let output = geometry_args(bin().arg("embed"))
        .arg(&bad)
        .arg(dir.path().join("out.cod"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("not a multiple"), "stderr: {stderr}");
}
