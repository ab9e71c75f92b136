//! End-to-end tests of the `floquet` binary: exit-code contract, structured
//! output, plot-data files, and byte-level determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_floquet")).args(args).output().expect("binary runs")
}

fn tmpdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("floquet_e2e_{tag}"));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn spectrum_reports_known_roots_and_writes_document() {
    let dir = tmpdir("spectrum");
    let out = dir.join("report.json");
    let output = run(&[
        "spectrum",
        "--model",
        &fixture("dde_pi_half.toml"),
        "--region",
        "-1,1,-3,3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("1.570796327"), "stdout:\n{stdout}");

    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["meta"]["tool"], "floquet");
    assert_eq!(doc["points"].as_array().unwrap().len(), 2);
    // Config echo makes the run reproducible from the document alone.
    assert_eq!(doc["meta"]["config"]["n_time"], 64);
    assert_eq!(doc["meta"]["config"]["seed"], 0);
}

#[test]
fn disk_region_flag() {
    let output = run(&[
        "spectrum",
        "--model",
        &fixture("dde_pi_half.toml"),
        "--disk",
        "0,1.6,0.8",
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8_lossy(&output.stdout);
    // Exactly the upper root lies inside the disk.
    assert_eq!(stdout.lines().count(), 2, "stdout:\n{stdout}");
    assert!(stdout.contains("1.570796327"), "stdout:\n{stdout}");
}

#[test]
fn jordan_emits_chain_files() {
    let dir = tmpdir("jordan");
    let out = dir.join("jordan.json");
    let output = run(&[
        "jordan",
        "--model",
        &fixture("dde_double_root.toml"),
        "--sigma",
        "-1,0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("partials = [2]"), "stdout:\n{stdout}");
    let chain0 = dir.join("jordan_chain0_q0.tsv");
    let chain1 = dir.join("jordan_chain0_q1.tsv");
    assert!(chain0.exists() && chain1.exists());
    let body = std::fs::read_to_string(&chain0).unwrap();
    assert!(body.starts_with("t\tre0\tim0\n"));
    assert_eq!(body.lines().count(), 65);
}

#[test]
fn jordan_off_spectrum_is_a_numerical_failure() {
    let output = run(&[
        "jordan",
        "--model",
        &fixture("dde_pi_half.toml"),
        "--sigma",
        "0.4,0.3",
    ]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("not a characteristic value"), "stderr:\n{stderr}");
}

#[test]
fn validation_failures_exit_one() {
    let dir = tmpdir("badmodel");
    let path = dir.join("bad.toml");
    std::fs::write(
        &path,
        "kind = \"dde\"\nperiod = 1.0\ndim = 1\n\n[[term]]\nshift = -0.5\ncoeff = \"1\"\n",
    )
    .unwrap();
    let output = run(&["verify", "--model", path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("lag must be positive"), "stderr:\n{stderr}");
}

#[test]
fn missing_model_file_exits_three() {
    let output = run(&["spectrum", "--model", "/nonexistent/model.toml"]);
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn verify_is_byte_deterministic_and_exits_zero() {
    let dir = tmpdir("determinism");
    let out = dir.join("report.json");
    let mut captured: Vec<Vec<u8>> = Vec::new();
    for _ in 0..2 {
        let output = run(&[
            "verify",
            "--model",
            &fixture("idde_quad.toml"),
            "--region",
            "-0.4,3,-3,3",
            "--N",
            "48",
            "--M",
            "40",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(
            output.status.success(),
            "verify failed:\n{}\n{}",
            String::from_utf8_lossy(&output.stdout),
            String::from_utf8_lossy(&output.stderr)
        );
        captured.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(captured[0], captured[1], "structured outputs differ between identical runs");
}

#[test]
fn export_plot_produces_delimited_files() {
    let dir = tmpdir("export");
    let out = dir.join("plot.json");
    let output = run(&[
        "export-plot",
        "--model",
        &fixture("mfde_gap.toml"),
        "--region",
        "-2,2,-3.141592,3.141593",
        "--strip",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let scatter = std::fs::read_to_string(dir.join("plot_spectrum.tsv")).unwrap();
    assert!(scatter.starts_with("re\tim\tm_g\tm_a\n"));
    assert_eq!(scatter.lines().count(), 2, "exactly one exponent row:\n{scatter}");
    assert!(dir.join("plot_strip.tsv").exists());
    assert!(dir.join("plot_eigfun0.tsv").exists());
    let heat = std::fs::read_to_string(dir.join("plot_eigfun0.tsv")).unwrap();
    assert!(heat.starts_with("t\ttheta\tre\tim\tabs\n"));
}

#[test]
fn resolvent_command_reports_identity_residual() {
    let output = run(&[
        "resolvent",
        "--model",
        &fixture("dde_pi_half.toml"),
        "--z",
        "0.3,0.2",
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("identity residual"), "stdout:\n{stdout}");
    // Evaluation inside the spectrum is refused with a numerical error.
    let bad = run(&[
        "resolvent",
        "--model",
        &fixture("dde_pi_half.toml"),
        "--z",
        "0,1.5707963267948966",
    ]);
    assert_eq!(bad.status.code(), Some(2));
}
