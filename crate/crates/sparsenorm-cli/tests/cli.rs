//! End-to-end tests of the `sparsenorm` binary: argument handling, exit
//! codes, output files, and cross-thread-count reproducibility, all through
//! real process invocations.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparsenorm"))
}

fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, content).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

const SIM_CONFIG: &str = "\
# smoke experiment
experiment.id = smoke
experiment.estimator = n-hat
experiment.replications = 8
experiment.seed = 42

grid.d = 60
grid.s = 3
grid.sigma = 1.0
grid.family = identity, ar1(rho=0.4)
grid.shape = flat
grid.norm2 = 0, 6
";

const CSV_HEADER: &str = "experiment_id,estimator,d,s,sigma,family,family_params,\
                          norm2_target,replications,mean_sq_err,scaled_risk,rate_name,\
                          rate_value,std_err,seed";

#[test]
fn estimate_reports_zero_for_zero_vector() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "zeros.txt", "0\n0\n0\n");

    let out = bin()
        .args([
            "estimate", "--method", "n-hat", "--sigma", "1", "--s", "2", "--frob", "4",
        ])
        .arg("--data")
        .arg(&data)
        .output()
        .unwrap();

    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("branch: sparse"), "stdout: {text}");
    assert!(text.contains("estimate: 0\n"), "stdout: {text}");

    // the last line is the machine-readable report
    let json: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(json["method"], "n-hat");
    assert_eq!(json["d"], 3);
    assert_eq!(json["estimate"], 0.0);
    // τ = 3·√log(1 + frob²/s²) = 3·√log 5
    let tau = json["tau"].as_f64().unwrap();
    assert!(
        (tau - 3.0 * 5.0_f64.ln().sqrt()).abs() < 1e-12,
        "tau = {tau}"
    );
}

#[test]
fn estimate_missing_flag_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "y.txt", "1.5\n-0.3\n");

    let out = bin()
        .args(["estimate", "--method", "n-hat", "--s", "2", "--frob", "4"])
        .arg("--data")
        .arg(&data)
        .output()
        .unwrap();

    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("--sigma"), "stderr: {}", stderr(&out));
}

#[test]
fn estimate_malformed_data_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "bad.txt", "1.0\nnot-a-number\n2.0\n");

    let out = bin()
        .args(["estimate", "--method", "sigma-s"])
        .arg("--data")
        .arg(&data)
        .output()
        .unwrap();

    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("not-a-number"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn estimate_missing_file_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["estimate", "--method", "sigma-s"])
        .arg("--data")
        .arg(dir.path().join("no-such-file.txt"))
        .output()
        .unwrap();

    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn estimate_reads_csv_column_with_header() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(
        dir.path(),
        "table.csv",
        "name,value\na,1.0\nb,-2.0\nc,0.5\nd,0.25\n",
    );

    let out = bin()
        .args([
            "estimate",
            "--method",
            "sigma-eta",
            "--eta",
            "0.5",
            "--column",
            "1",
        ])
        .arg("--data")
        .arg(&data)
        .output()
        .unwrap();

    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let json: serde_json::Value =
        serde_json::from_str(stdout(&out).lines().last().unwrap()).unwrap();
    assert_eq!(json["d"], 4, "header row must be skipped in column mode");
}

#[test]
fn simulate_writes_identical_artifacts_for_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "sim.conf", SIM_CONFIG);

    let mut artifacts: Vec<(Vec<u8>, Vec<u8>)> = Vec::new();
    for threads in ["1", "4"] {
        let out_dir = dir.path().join(format!("out{threads}"));
        let out = bin()
            .arg("simulate")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out_dir)
            .args(["--threads", threads])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
        let text = stdout(&out);
        // one printed cell per grid point: 1 d × 1 s × 1 σ × 2 families × 2 norms
        assert_eq!(text.matches("cell d=60").count(), 4, "stdout: {text}");
        assert!(text.contains("wrote "), "stdout: {text}");
        artifacts.push((
            fs::read(out_dir.join("smoke.csv")).unwrap(),
            fs::read(out_dir.join("smoke.json")).unwrap(),
        ));
    }

    assert_eq!(
        artifacts[0].0, artifacts[1].0,
        "CSV differs across thread counts"
    );
    assert_eq!(
        artifacts[0].1, artifacts[1].1,
        "JSON differs across thread counts"
    );

    let csv = String::from_utf8(artifacts[0].0.clone()).unwrap();
    assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
    assert_eq!(csv.lines().count(), 1 + 4);
}

#[test]
fn simulate_rerun_with_same_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "sim.conf", SIM_CONFIG);

    let run = |out_name: &str| {
        let out_dir = dir.path().join(out_name);
        let out = bin()
            .arg("simulate")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
        fs::read(out_dir.join("smoke.csv")).unwrap()
    };

    assert_eq!(run("first"), run("second"));
}

#[test]
fn rate_curve_emits_svg() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "curve.conf",
        "\
experiment.id = curve
experiment.estimator = n-hat
experiment.replications = 6
experiment.seed = 5

grid.d = 64
grid.s = 2, 4, 8
grid.sigma = 1.0
grid.family = identity
grid.shape = flat
grid.norm2 = 4
",
    );

    let out_dir = dir.path().join("out");
    let out = bin()
        .arg("rate-curve")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();

    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let svg = fs::read_to_string(out_dir.join("curve.svg")).unwrap();
    assert!(
        svg.starts_with("<svg"),
        "svg head: {}",
        &svg[..svg.len().min(80)]
    );
    assert!(out_dir.join("curve.csv").exists());
    assert!(out_dir.join("curve.json").exists());
}

#[test]
fn verify_identities_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("report");
    let out = bin()
        .args([
            "verify-identities",
            "--seed",
            "3",
            "--replications",
            "100000",
        ])
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();

    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("all 8 checks passed"), "stdout: {text}");
    assert!(!text.contains("FAIL"), "stdout: {text}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("identities.json")).unwrap())
            .unwrap();
    assert_eq!(report["checks"].as_array().unwrap().len(), 8);
}

#[test]
fn verify_identities_rejects_low_replication_counts() {
    let out = bin()
        .args(["verify-identities", "--replications", "50000"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr(&out));
}

#[test]
fn test_power_emits_sweep_rows() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "power.conf",
        "\
power.id = sweep
power.d = 150
power.s = 4
power.sigma = 1.0
power.rho = 24.5
power.replications = 40
power.seed = 7
power.nulls = identity
power.alt-family = identity
power.alt-shape = flat
power.grid = radius
power.gamma = 2.0
power.radii = 5, 40
",
    );

    let out_dir = dir.path().join("out");
    let out = bin()
        .arg("test-power")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();

    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.matches("gamma=2").count(), 2, "stdout: {text}");
    let csv = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2, "csv: {csv}");
}

#[test]
fn unknown_config_key_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "bad.conf",
        &format!("{SIM_CONFIG}grid.bogus = 1\n"),
    );

    let out = bin()
        .arg("simulate")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();

    assert_eq!(out.status.code(), Some(3));
    assert!(
        stderr(&out).contains("grid.bogus"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn duplicate_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "dup.conf",
        &format!("{SIM_CONFIG}experiment.seed = 43\n"),
    );

    let out = bin()
        .arg("simulate")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();

    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("duplicate key"),
        "stderr: {}",
        stderr(&out)
    );
}
