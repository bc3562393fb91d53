//! End-to-end CLI behaviors: exit codes, usage text, flag/file precedence,
//! and seed radix handling.

use std::process::Command;

fn nnlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nnlab"))
}

#[test]
fn empty_args_prints_usage_and_exits_one() {
    let out = nnlab().output().expect("spawn");
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("Usage"), "no usage text: {text}");
}

#[test]
fn unknown_preset_is_a_config_error() {
    let out = nnlab()
        .args(["run", "--preset", "nope"])
        .output()
        .expect("spawn");
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown preset"), "{err}");
}

#[test]
fn selftest_passes_with_verdict_lines() {
    let out = nnlab().arg("selftest").output().expect("spawn");
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for name in [
        "dyadic-compare-filter",
        "learner-oracle-equivalence",
        "cap-invariant",
        "path-inequality",
        "corrupted-tie-break-control",
    ] {
        assert!(
            text.contains(&format!("selftest {name}: ok")),
            "missing verdict for {name} in:\n{text}"
        );
    }
}

#[test]
fn hex_and_decimal_seeds_agree() {
    let dir = tempfile::tempdir().expect("tempdir");
    for (sub, seed) in [("a", "0x2A"), ("b", "42")] {
        let status = nnlab()
            .args([
                "trace",
                "--preset",
                "smv-grid",
                "--seed",
                seed,
                "--horizon",
                "16",
                "--out-dir",
            ])
            .arg(dir.path().join(sub))
            .status()
            .expect("spawn");
        assert!(status.success());
    }
    let a = std::fs::read(dir.path().join("a/trace.csv")).expect("a");
    let b = std::fs::read(dir.path().join("b/trace.csv")).expect("b");
    assert_eq!(a, b);
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg_path = dir.path().join("exp.cfg");
    std::fs::write(
        &cfg_path,
        "process.kind = finite-support\n\
         process.support = 1/2^2,3/2^2\n\
         target.kind = interval-below\n\
         target.s = 1/2^1\n\
         target.closed = false\n\
         learners = memo\n\
         horizon = 64\n\
         trials = 1\n\
         seed = 3\n",
    )
    .expect("write config");
    let out_dir = dir.path().join("out");
    let out = nnlab()
        .args(["run", "--config"])
        .arg(&cfg_path)
        .args(["--horizon", "32", "--workers", "1", "--out-dir"])
        .arg(&out_dir)
        .output()
        .expect("spawn");
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(out_dir.join("report.csv")).expect("csv");
    // The flag override wins over the file's horizon.
    assert!(csv.contains("\n32,memo,"), "csv:\n{csv}");
    assert!(csv.contains("seed=3"));
}

#[test]
fn invalid_config_key_is_rejected() {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg_path = dir.path().join("bad.cfg");
    std::fs::write(&cfg_path, "process.kind = enumerated-fresh\nwat = 9\n").expect("write");
    let out = nnlab()
        .args(["run", "--config"])
        .arg(&cfg_path)
        .output()
        .expect("spawn");
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown config key"));
}
