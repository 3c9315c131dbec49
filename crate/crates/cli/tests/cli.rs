use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn netcheb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netcheb"))
        .args(args)
        .output()
        .unwrap()
}

fn config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.cfg");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const RIEMANN: &str =
    "# short junction run\nexperiment = riemann_junction\nn = 120\nt_final = 0.1\nmethod = both\n";

#[test]
fn flags_override_file_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), RIEMANN);
    let out = dir.path().join("out");
    let o = netcheb(&[
        "run",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--method",
        "chebyshev",
        "--n",
        "16",
        "--dt",
        "1e-3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("profiles_chebyshev_n16.csv").exists());
    assert!(!out.join("profiles_fvs_n16.csv").exists());
    let timing = fs::read_to_string(out.join("timing.csv")).unwrap();
    assert!(timing.starts_with("method,N,seconds\nchebyshev,16,"));
}

#[test]
fn config_errors_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    for text in [
        "experiment = riemann_junction\nspeed = 3\n",
        "n = 4\n",
        "experiment = riemann_junction\nt_final = 0\n",
    ] {
        let cfg = config(dir.path(), text);
        assert_eq!(netcheb(&["run", &cfg]).status.code(), Some(1), "{text}");
    }
    let missing = dir.path().join("absent.cfg");
    assert_eq!(
        netcheb(&["run", missing.to_str().unwrap()]).status.code(),
        Some(1)
    );
    let cfg = config(dir.path(), RIEMANN);
    assert_eq!(
        netcheb(&["run", &cfg, "--method", "spectral"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn cfl_violation_quotes_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), RIEMANN);
    let o = netcheb(&["run", &cfg, "--dt", "0.1"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("CFL bound 1.7"), "{err}");
}

#[test]
fn run_failures_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), RIEMANN);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = netcheb(&[
        "run",
        &cfg,
        "--n",
        "8",
        "--out",
        blocker.join("x").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
