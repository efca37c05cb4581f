//! End-to-end tests of the `kgz` binary: argument handling, exit codes,
//! configuration rejection messages, artifact production, and rerun
//! determinism, all through the real process boundary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kgz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgz"))
        .args(args)
        .output()
        .expect("spawn kgz")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Quick-run configuration: coarse ball, mild Gaussian pulse, fraction of a
/// second of wall time.
fn quick_config(dir: &Path, out_name: &str, extra: &str) -> String {
    let text = format!(
        "r_max = 12.0\nn = 256\nalpha = 0.5\ndt = 0.002\nt_max = 0.5\n\
         observe_every = 25\nscattering_interval = 0.1\n\
         output = \"{out}\"\ngs_cache = \"{cache}\"\n{extra}\n\
         [initial]\nkind = \"gaussian\"\namplitude = 0.4\nwidth = 2.0\n",
        out = dir.join(out_name).display(),
        cache = dir.join("cache").display(),
    );
    let path = dir.join(format!("{out_name}.toml"));
    fs::write(&path, text).expect("write config");
    path.display().to_string()
}

#[test]
fn no_arguments_is_a_usage_error() {
    let out = kgz(&[]);
    assert_eq!(code(&out), 1, "stderr: {}", stderr(&out));
}

#[test]
fn help_succeeds_and_lists_subcommands() {
    let out = kgz(&["--help"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    for sub in ["groundstate", "run", "sweep", "plotdata", "verify"] {
        assert!(text.contains(sub), "--help does not mention {sub}:\n{text}");
    }
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = kgz(&["frobnicate"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn unknown_config_key_is_rejected_by_name() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    fs::write(&path, "alpha = 0.5\nbogus_knob = 3\n").unwrap();
    let out = kgz(&["run", "--config", &path.display().to_string()]);
    assert_eq!(code(&out), 1);
    assert!(
        stderr(&out).contains("bogus_knob"),
        "error must name the offending key: {}",
        stderr(&out)
    );
}

#[test]
fn alpha_one_is_rejected_with_the_model_constraint() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("alpha1.toml");
    fs::write(&path, "alpha = 1.0\nlambda = 1.2\n").unwrap();
    let out = kgz(&["run", "--config", &path.display().to_string()]);
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(
        err.contains("alpha") && err.contains("!= 1"),
        "rejection must cite the alpha != 1 model constraint: {err}"
    );
}

#[test]
fn negative_dt_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("dt.toml");
    fs::write(&path, "alpha = 0.5\ndt = -1e-3\n").unwrap();
    let out = kgz(&["run", "--config", &path.display().to_string()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("dt"), "stderr: {}", stderr(&out));
}

#[test]
fn missing_config_file_is_a_usage_error() {
    let out = kgz(&["run", "--config", "/nonexistent/kgz.toml"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn quick_run_writes_artifacts_and_reruns_byte_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let config = quick_config(tmp.path(), "out", "");
    let out = kgz(&["run", "--config", &config]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("termination: horizon"), "stdout:\n{text}");
    assert!(text.contains("consistent: true"), "stdout:\n{text}");

    let run_dir = tmp.path().join("out");
    for artifact in ["series.csv", "summary.json", "resolved_config.toml"] {
        assert!(run_dir.join(artifact).is_file(), "missing {artifact}");
    }
    let series = fs::read(run_dir.join("series.csv")).unwrap();
    let summary = fs::read(run_dir.join("summary.json")).unwrap();

    fs::remove_dir_all(&run_dir).unwrap();
    let out2 = kgz(&["run", "--config", &config]);
    assert_eq!(code(&out2), 0);
    assert_eq!(series, fs::read(run_dir.join("series.csv")).unwrap());
    assert_eq!(summary, fs::read(run_dir.join("summary.json")).unwrap());
}

#[test]
fn plotdata_exports_panels_for_a_finished_run() {
    let tmp = tempfile::tempdir().unwrap();
    let config = quick_config(tmp.path(), "plotrun", "");
    assert_eq!(code(&kgz(&["run", "--config", &config])), 0);
    let run_dir = tmp.path().join("plotrun");
    let out = kgz(&["plotdata", "--run", &run_dir.display().to_string()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let index = run_dir.join("plot/index.txt");
    assert!(index.is_file());
    let listed = fs::read_to_string(&index).unwrap();
    for panel in ["E.dat", "K0.dat", "I1.dat"] {
        assert!(listed.contains(panel), "index missing {panel}:\n{listed}");
        assert!(run_dir.join("plot").join(panel).is_file());
    }
}

#[test]
fn plotdata_on_a_missing_run_fails() {
    let out = kgz(&["plotdata", "--run", "/nonexistent/run-dir"]);
    assert_ne!(code(&out), 0);
}

#[test]
fn groundstate_prints_certified_threshold_values() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("cache").display().to_string();
    let out = kgz(&[
        "groundstate", "--r-max", "12", "--n", "256", "--cache", &cache,
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let field = |key: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{key} = ")))
            .unwrap_or_else(|| panic!("no `{key}` line in:\n{text}"))
            .parse()
            .expect("numeric field")
    };
    assert!((field("Q0") - 4.3373877).abs() < 1e-4, "Q0 = {}", field("Q0"));
    assert!((field("J_Q") - 18.8972513).abs() < 1e-4, "J_Q = {}", field("J_Q"));
    assert!(field("pde_residual") < 1e-8);

    // second invocation hits the cache and agrees exactly
    let out2 = kgz(&[
        "groundstate", "--r-max", "12", "--n", "256", "--cache", &cache,
    ]);
    assert_eq!(code(&out2), 0);
    assert_eq!(stdout(&out2), text, "cached ground state must reproduce the print");
}

#[test]
fn sweep_runs_both_legs_and_writes_the_aggregate() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "r_max = 12.0\nn = 256\nalpha = 0.5\ndt = 0.002\nt_max = 6.0\n\
         observe_every = 100\nlambda = 1.0\n\
         output = \"{out}\"\ngs_cache = \"{cache}\"\n",
        out = tmp.path().join("sweep").display(),
        cache = tmp.path().join("cache").display(),
    );
    let config = tmp.path().join("sweep.toml");
    fs::write(&config, text).unwrap();
    let out = kgz(&[
        "sweep",
        "--config",
        &config.display().to_string(),
        "--lambdas",
        "0.8,1.3",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let table = stdout(&out);
    assert!(table.contains("0.8") && table.contains("1.3"), "table:\n{table}");
    let csv = fs::read_to_string(tmp.path().join("sweep/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3, "aggregate should list both legs:\n{csv}");
    let blowup_row = csv.lines().find(|l| l.starts_with("lambda,1.3")).expect("1.3 row");
    assert!(blowup_row.contains("blowup"), "row: {blowup_row}");
}

#[test]
fn sweep_without_an_axis_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = quick_config(tmp.path(), "noop", "");
    let out = kgz(&["sweep", "--config", &config]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("axis"), "stderr: {}", stderr(&out));
}

#[test]
fn verify_reports_every_suite_check_as_passing() {
    let out = kgz(&["verify", "--seed", "0"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.lines().count() >= 10, "expected one line per check:\n{text}");
    assert!(text.contains("PASS"));
    assert!(!text.contains("FAIL"), "self-checks failed:\n{text}");
}
