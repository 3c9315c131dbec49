use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use netcheb_core::harness::{
    convergence_rate, relative_l1_error, run_experiment, EdgeProfile, Experiment, ExperimentConfig,
    Method, MethodChoice,
};
use proptest::prelude::*;

fn read_dir(dir: &Path) -> BTreeMap<String, String> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read_to_string(&p).unwrap(),
            )
        })
        .collect()
}

fn riemann(n: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(Experiment::RiemannJunction);
    cfg.n = vec![n];
    cfg.t_final = 0.2;
    cfg.method = MethodChoice::Both;
    cfg.output_times = vec![0.05];
    cfg
}

#[test]
fn identical_configs_give_identical_payloads() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let mut cfg = riemann(24);
        cfg.output_dir = dir.path().to_path_buf();
        run_experiment(&cfg).unwrap();
    }
    let (fa, fb) = (read_dir(a.path()), read_dir(b.path()));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (name, text) in &fa {
        if name != "timing.csv" {
            assert_eq!(text, &fb[name], "{name} differs");
        }
    }
}

#[test]
fn profile_files_hold_every_output_time() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = riemann(16);
    cfg.output_dir = dir.path().to_path_buf();
    let report = run_experiment(&cfg).unwrap();
    let files = read_dir(dir.path());
    for name in [
        "profiles_chebyshev_n16.csv",
        "profiles_fvs_n16.csv",
        "timing.csv",
        "junction.csv",
    ] {
        assert!(files.contains_key(name), "{name} missing");
    }
    let cheb = &files["profiles_chebyshev_n16.csv"];
    let mut lines = cheb.lines();
    assert_eq!(lines.next(), Some("edge,x,u,t"));
    // two times, three edges, 17 nodes
    assert_eq!(lines.count(), 2 * 3 * 17);
    let times: std::collections::BTreeSet<String> = cheb
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().to_string())
        .collect();
    assert_eq!(times.len(), 2);
    let j = report.junction.unwrap();
    assert!((j.u_b_final - 0.5 * (1.0 + 0.68f64.sqrt())).abs() < 1e-10);
    assert!(j.u_b_spread < 1e-8);
}

#[test]
fn validation_reports_both_error_columns_and_rates() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::defaults(Experiment::Validation);
    cfg.n = vec![20, 40];
    cfg.reference_cells = 6000;
    cfg.output_dir = dir.path().to_path_buf();
    let report = run_experiment(&cfg).unwrap();
    let files = read_dir(dir.path());
    assert!(files["errors.csv"].starts_with("method,N,error_incoming,error_network\n"));
    let rates: Vec<&str> = files["rates.csv"].lines().collect();
    assert_eq!(rates[0], "method,N,error,rate");
    assert_eq!(rates.len(), 5);
    // first row of each method has no rate
    assert!(rates[1].ends_with(',') && rates[3].ends_with(','));
    for r in &report.runs {
        let (a, b) = (r.error_incoming.unwrap(), r.error_network.unwrap());
        assert!(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0);
        assert!(r.max_junction_residual.unwrap() <= 1e-10);
    }
    let e = |m, n| report.run(m, n).unwrap().error_incoming.unwrap();
    assert!(e(Method::Fvs, 40) < e(Method::Fvs, 20));
    assert!(e(Method::Chebyshev, 40) < e(Method::Chebyshev, 20));
}

#[test]
fn unwritable_output_is_a_run_failure() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("occupied");
    fs::write(&file, "x").unwrap();
    let mut cfg = riemann(8);
    cfg.method = MethodChoice::Fvs;
    cfg.output_dir = file.join("sub");
    let err = run_experiment(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

fn profiles(u: &[f64]) -> Vec<EdgeProfile> {
    u.chunks(4)
        .enumerate()
        .map(|(edge, c)| EdgeProfile {
            edge,
            t: 0.0,
            x: (0..c.len()).map(|i| i as f64 / 4.0).collect(),
            u: c.to_vec(),
        })
        .collect()
}

proptest! {
    #[test]
    fn l1_error_is_scale_invariant(u in prop::collection::vec(-2.0f64..2.0, 12), k in 0.1f64..10.0) {
        let reference = |e: usize, x: f64| 0.5 + 0.1 * e as f64 + x;
        let scaled: Vec<f64> = u.iter().map(|v| k * v).collect();
        let a = relative_l1_error(&profiles(&u), &reference).unwrap();
        let b = relative_l1_error(&profiles(&scaled), &|e, x| k * reference(e, x)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn power_law_errors_give_their_exponent(r in 0.2f64..4.0, c in 1e-3f64..10.0, n0 in 4usize..100) {
        let rows: Vec<(usize, f64)> = [n0, 2 * n0, 5 * n0].iter().map(|&n| (n, c * (n as f64).powf(-r))).collect();
        for rate in convergence_rate(&rows).unwrap() {
            prop_assert!((rate - r).abs() < 1e-10);
        }
    }
}
