//! Binary-level behaviour: exit codes, strict parsing, validation reports.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dyadic"))
}

fn write_cfg(dir: &Path, name: &str, contents: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn malformed_key_exits_2_and_writes_nothing() {
    let dir = std::env::temp_dir().join("dyadic_cli_malformed");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let out_dir = dir.join("out");
    let cfg = write_cfg(
        &dir,
        "bad.cfg",
        "experiment.kind = det_decay\nscheme.bogus = 1.0\n",
    );
    let status = bin()
        .arg("run")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2), "{status:?}");
    assert!(!out_dir.exists(), "no output files on config error");
}

#[test]
fn over_budget_tree_is_rejected_with_required_count() {
    let dir = std::env::temp_dir().join("dyadic_cli_budget");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = write_cfg(
        &dir,
        "big.cfg",
        "experiment.kind = det_decay\nmodel.kind = kp\ntopology.d = 3\ntopology.depth = 12\n",
    );
    let out = bin().arg("validate").arg(&cfg).output().unwrap();
    assert!(out.status.success());
    let report = String::from_utf8(out.stdout).unwrap();
    // sum of 8^g for g = 0..12
    assert!(report.contains("topology.nodes_required = 78536544841"), "{report}");
    assert!(report.contains("verdict = rejected"), "{report}");

    // running it is a config error
    let status = bin().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(status.status.code(), Some(2));
}

#[test]
fn validate_warns_on_unstable_dt() {
    let dir = std::env::temp_dir().join("dyadic_cli_dtwarn");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = write_cfg(
        &dir,
        "warn.cfg",
        "experiment.kind = stoch_energy\ntopology.depth = 6\nscheme.alpha = 1.0\nnumerics.dt = 1e-3\n",
    );
    let out = bin().arg("validate").arg(&cfg).output().unwrap();
    assert!(out.status.success());
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.contains("stability.dt_bound"), "{report}");
    assert!(report.contains("warning = dt"), "{report}");
    assert!(report.contains("verdict = ok"), "{report}");
}

#[test]
fn valid_preset_validates_ok() {
    let preset = Path::new(env!("CARGO_MANIFEST_DIR")).join("presets/det_decay.cfg");
    let out = bin().arg("validate").arg(&preset).output().unwrap();
    assert!(out.status.success());
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.contains("verdict = ok"), "{report}");
    assert!(report.contains("coeff.c_max"), "{report}");
}

#[test]
fn run_writes_manifest_with_seed_override() {
    let dir = std::env::temp_dir().join("dyadic_cli_manifest");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = write_cfg(
        &dir,
        "tiny.cfg",
        "experiment.kind = det_decay\ntopology.depth = 4\nnumerics.t_end = 0.5\nnumerics.dt = 1e-2\n",
    );
    let out_dir = dir.join("out");
    let status = bin()
        .arg("run")
        .arg(&cfg)
        .arg("--seed")
        .arg("777")
        .arg("--out-dir")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert!(status.success());
    let manifest = std::fs::read_to_string(out_dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("seed = 777"), "{manifest}");
    assert!(manifest.contains("numerics.seed = 777"), "{manifest}");
    assert!(manifest.contains("outputs = "), "{manifest}");
    assert!(out_dir.join("trajectory.csv").exists());
    assert!(out_dir.join("energy.csv").exists());
    assert!(out_dir.join("budget.csv").exists());
}

#[test]
fn unstable_run_exits_3() {
    let dir = std::env::temp_dir().join("dyadic_cli_diverge");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    // far beyond the fastest shell's stability limit
    let cfg = write_cfg(
        &dir,
        "explode.cfg",
        "experiment.kind = det_decay\ntopology.depth = 8\nscheme.alpha = 3.0\nscheme.f = 1.0\nnumerics.dt = 0.1\nnumerics.t_end = 10.0\n",
    );
    let out = bin()
        .arg("run")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{out:?}");
    // the manifest still records the flagged time
    let manifest = std::fs::read_to_string(dir.join("out/manifest.txt")).unwrap();
    assert!(manifest.contains("summary.diverged_at"), "{manifest}");
}

#[test]
fn oracle_mismatch_exits_4() {
    // a deliberately coarse step biases the Euler-Maruyama second moments
    // well past three standard errors of the moment ODE
    let dir = std::env::temp_dir().join("dyadic_cli_oracle");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = write_cfg(
        &dir,
        "biased.cfg",
        "experiment.kind = moment_oracle\nmodel.kind = kp\ntopology.d = 1\ntopology.depth = 4\n\
         scheme.alpha = 0.25\nnumerics.dt = 2.4e-3\nnumerics.t_end = 1.0\nnumerics.n_paths = 5000\n",
    );
    let out = bin()
        .arg("run")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "{out:?}");
    // outputs and manifest are still written for post-mortem
    assert!(dir.join("out/moments.csv").exists());
    assert!(dir.join("out/manifest.txt").exists());
}
