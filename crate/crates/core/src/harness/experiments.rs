//! The three experiment setups and their reports.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use ndarray::Array2;

use crate::cheb::{forward_transform, inverse_transform, CoeffVector};
use crate::fvs::{fvs_reference_solution, run_fvs_with_output, FvGrid, FvReference};
use crate::netsolver::{
    run_network_simulation, BoundaryMode, BoundaryRule, EdgeBoundary, EdgeEnd, NetworkConfig,
    Profile, SingleEdgeSolver, SsvSpec, TraceRule,
};
use crate::spacetime::{SpaceTimeBoundary, SpaceTimeGrid, SpaceTimeProblem, SpaceTimeSolver};

use super::config::{Experiment, ExperimentConfig, Method};
use super::report::{create_dir, num, profile_csv, Csv, EdgeProfile};
use super::{convergence_rate, relative_l1_error, HarnessError};

/// Iteration budget of the space-time solve.
pub const SPACETIME_MAX_ITERATIONS: usize = 40;

/// Indicator of `(a, b]`, so a jump takes the value of its left limit.
pub fn indicator(a: f64, b: f64, x: f64) -> f64 {
    if a < x && x <= b {
        1.0
    } else {
        0.0
    }
}

/// Initial data of the validation network.
pub fn validation_data() -> [Profile<f64>; 3] {
    [
        Arc::new(|x| indicator(-0.5, 0.0, x)),
        Arc::new(|x| 0.75 * indicator(-0.25, 0.0, x)),
        Arc::new(|_| 0.0),
    ]
}

/// Constant data of the Riemann problem at the junction.
pub fn riemann_data() -> [Profile<f64>; 3] {
    [
        Arc::new(|_| 0.25),
        Arc::new(|_| 2.0 / 3.0),
        Arc::new(|_| 0.8),
    ]
}

/// Datum of the single-edge experiment at `t = -1`.
pub fn single_edge_data(x: f64) -> f64 {
    indicator(-0.75, -0.25, x) - (2.0 / 3.0) * (x - 2.5) * indicator(-0.25, 0.5, x)
}

/// Exact solution of the single-edge experiment at `t = 1`.
pub fn single_edge_exact_final(x: f64) -> f64 {
    0.625 - 0.25 * x
}

/// Infimum and supremum of [`single_edge_data`]; the supremum is the right
/// limit at `x = -1/4`.
pub fn single_edge_data_range() -> (f64, f64) {
    (0.0, 11.0 / 6.0)
}

/// Outcome of one `(method, N)` run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub method: Method,
    pub n: usize,
    pub dt: f64,
    pub seconds: f64,
    pub steps: usize,
    /// Relative L1 error over the incoming edges, when a reference exists.
    pub error_incoming: Option<f64>,
    /// Relative L1 error over all three edges.
    pub error_network: Option<f64>,
    /// Smallest and largest nodal value (cell average) over every time level.
    pub range: (f64, f64),
    pub max_junction_residual: Option<f64>,
    pub max_energy_increase: Option<f64>,
    pub max_chebyshev_energy_increase: Option<f64>,
    pub profiles: Vec<EdgeProfile>,
    /// `(t, u_b)` after every step of a Chebyshev network run.
    pub boundary_series: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateRow {
    pub method: Method,
    pub n: usize,
    pub error: f64,
    /// Order against the previous row of the same method.
    pub rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JunctionSummary {
    pub n: usize,
    pub u_b_final: f64,
    /// `max - min` of `u_b` over the second half of the run.
    pub u_b_spread: f64,
    pub series: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeSummary {
    pub n: usize,
    pub iterations: usize,
    pub constraint_norm: f64,
    pub used_fallback: bool,
    /// Midpoint degree the gap is measured against.
    pub reference_n: usize,
    /// `int |u_2d(x, t_final) - u_mid(x, t_final)| dx`.
    pub gap_l1: f64,
    /// `int |u_mid(x, 1) - exact(x)| dx` when `t_final = 1`.
    pub midpoint_exact_l1: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub runs: Vec<RunSummary>,
    pub rates: Vec<RateRow>,
    pub junction: Option<JunctionSummary>,
    pub spacetime: Option<SpaceTimeSummary>,
    pub files: Vec<PathBuf>,
}

impl ExperimentReport {
    pub fn run(&self, method: Method, n: usize) -> Option<&RunSummary> {
        self.runs.iter().find(|r| r.method == method && r.n == n)
    }
}

/// Output times including `t_final`, sorted and without duplicates.
fn output_targets(cfg: &ExperimentConfig) -> Vec<f64> {
    let mut t: Vec<f64> = cfg.output_times.clone();
    t.push(cfg.t_final);
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

fn context(cfg: &ExperimentConfig, method: Method, n: usize) -> String {
    format!("{:?} {method} N={n}", cfg.experiment).to_lowercase()
}

fn chebyshev_network(
    cfg: &ExperimentConfig,
    initial: &[Profile<f64>; 3],
    n: usize,
) -> Result<RunSummary, HarnessError> {
    let model = cfg.flux_model()?;
    let dt = cfg.step_for(Method::Chebyshev, n)?;
    let net = NetworkConfig {
        n,
        dt,
        t_final: cfg.t_final,
        output_times: cfg.output_times.clone(),
        dissipation: cfg.chebyshev_dissipation()?,
        trace_rule: TraceRule::JunctionNode,
        boundary_mode: BoundaryMode::RiemannStates,
        free_end_rule: Some(BoundaryRule::Characteristic),
        track_energy: cfg.track_energy,
        models: [model.clone(), model.clone(), model],
        initial: initial.clone(),
    };
    let start = Instant::now();
    let traj = run_network_simulation(&net).map_err(|source| HarnessError::Solver {
        context: context(cfg, Method::Chebyshev, n),
        source,
    })?;
    let seconds = start.elapsed().as_secs_f64();
    let grid =
        crate::cheb::CglGrid::<f64>::new(n).map_err(|e| HarnessError::Config(e.to_string()))?;
    let targets = output_targets(cfg);
    let mut profiles = Vec::new();
    for s in traj
        .snapshots
        .iter()
        .filter(|s| targets.iter().any(|&t| (t - s.t).abs() < 1e-12))
    {
        for (h, e) in s.edges.iter().enumerate() {
            profiles.push(EdgeProfile {
                edge: h,
                t: s.t,
                x: grid.points().to_vec(),
                u: e.nodal_values(&grid)
                    .map_err(|e| HarnessError::Config(e.to_string()))?,
            });
        }
    }
    Ok(RunSummary {
        method: Method::Chebyshev,
        n,
        dt,
        seconds,
        steps: traj.steps,
        error_incoming: None,
        error_network: None,
        range: traj.nodal_range,
        max_junction_residual: Some(traj.max_junction_residual),
        max_energy_increase: traj.max_energy_increase,
        max_chebyshev_energy_increase: traj.max_chebyshev_energy_increase,
        profiles,
        boundary_series: traj.boundary_series,
    })
}

fn fvs_network(
    cfg: &ExperimentConfig,
    initial: &[Profile<f64>; 3],
    n: usize,
) -> Result<RunSummary, HarnessError> {
    let model = cfg.flux_model()?;
    let dt = cfg.step_for(Method::Fvs, n)?;
    let models = [model.clone(), model.clone(), model];
    let start = Instant::now();
    let run = run_fvs_with_output(n, initial, &models, dt, cfg.t_final, &cfg.output_times)
        .map_err(|source| HarnessError::Solver {
            context: context(cfg, Method::Fvs, n),
            source,
        })?;
    let seconds = start.elapsed().as_secs_f64();
    let profiles = run
        .snapshots
        .iter()
        .flat_map(|(t, grids)| {
            grids
                .iter()
                .enumerate()
                .map(move |(h, g): (usize, &FvGrid<f64>)| EdgeProfile {
                    edge: h,
                    t: *t,
                    x: g.centers(),
                    u: g.cells.clone(),
                })
        })
        .collect();
    Ok(RunSummary {
        method: Method::Fvs,
        n,
        dt,
        seconds,
        steps: run.steps,
        error_incoming: None,
        error_network: None,
        range: run.range,
        max_junction_residual: Some(run.max_junction_residual),
        max_energy_increase: None,
        max_chebyshev_energy_increase: None,
        profiles,
        boundary_series: Vec::new(),
    })
}

/// Runs every `(method, N)` cell of a network experiment, one thread each.
fn network_runs(
    cfg: &ExperimentConfig,
    initial: &[Profile<f64>; 3],
) -> Result<Vec<RunSummary>, HarnessError> {
    let cells: Vec<(Method, usize)> = cfg
        .methods()
        .into_iter()
        .flat_map(|m| cfg.n.iter().map(move |&n| (m, n)))
        .collect();
    let results: Vec<Result<RunSummary, HarnessError>> = std::thread::scope(|s| {
        let handles: Vec<_> = cells
            .iter()
            .map(|&(m, n)| {
                s.spawn(move || match m {
                    Method::Fvs => fvs_network(cfg, initial, n),
                    _ => chebyshev_network(cfg, initial, n),
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("experiment thread panicked"))
            .collect()
    });
    results.into_iter().collect()
}

fn final_profiles(run: &RunSummary, t_final: f64) -> Vec<EdgeProfile> {
    run.profiles
        .iter()
        .filter(|p| (p.t - t_final).abs() < 1e-12)
        .cloned()
        .collect()
}

fn attach_errors(
    run: &mut RunSummary,
    reference: &FvReference<f64>,
    t_final: f64,
) -> Result<(), HarnessError> {
    let last = final_profiles(run, t_final);
    let sampler = |h: usize, x: f64| reference.sample(h, x);
    let incoming: Vec<EdgeProfile> = last.iter().filter(|p| p.edge < 2).cloned().collect();
    run.error_incoming = Some(relative_l1_error(&incoming, &sampler)?);
    run.error_network = Some(relative_l1_error(&last, &sampler)?);
    Ok(())
}

fn rate_rows(runs: &[RunSummary]) -> Result<Vec<RateRow>, HarnessError> {
    let mut rows = Vec::new();
    for method in [Method::Chebyshev, Method::Fvs] {
        let errs: Vec<(usize, f64)> = runs
            .iter()
            .filter(|r| r.method == method)
            .filter_map(|r| r.error_incoming.map(|e| (r.n, e)))
            .collect();
        if errs.is_empty() {
            continue;
        }
        let rates = if errs.len() >= 2 {
            convergence_rate(&errs)?
        } else {
            Vec::new()
        };
        for (i, &(n, error)) in errs.iter().enumerate() {
            rows.push(RateRow {
                method,
                n,
                error,
                rate: if i == 0 { None } else { Some(rates[i - 1]) },
            });
        }
    }
    Ok(rows)
}

fn validation(cfg: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    let initial = validation_data();
    let model = cfg.flux_model()?;
    let models = [model.clone(), model.clone(), model];
    let (reference, runs) = std::thread::scope(|s| {
        let r =
            s.spawn(|| fvs_reference_solution(&initial, &models, cfg.t_final, cfg.reference_cells));
        let runs = network_runs(cfg, &initial);
        (r.join().expect("reference thread panicked"), runs)
    });
    let reference = reference.map_err(|source| HarnessError::Solver {
        context: format!("validation reference M={}", cfg.reference_cells),
        source,
    })?;
    let mut runs = runs?;
    for r in &mut runs {
        attach_errors(r, &reference, cfg.t_final)?;
    }
    let rates = rate_rows(&runs)?;
    Ok(ExperimentReport {
        config: cfg.clone(),
        runs,
        rates,
        junction: None,
        spacetime: None,
        files: Vec::new(),
    })
}

fn riemann_junction(cfg: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    let initial = riemann_data();
    let runs = network_runs(cfg, &initial)?;
    // series of the finest Chebyshev run
    let junction = runs
        .iter()
        .rev()
        .find(|r| r.method == Method::Chebyshev)
        .map(|r| {
            let half = 0.5 * cfg.t_final;
            let (lo, hi) = r
                .boundary_series
                .iter()
                .filter(|(t, _)| *t >= half)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, u)| {
                    (lo.min(u), hi.max(u))
                });
            JunctionSummary {
                n: r.n,
                u_b_final: r.boundary_series.last().map_or(f64::NAN, |&(_, u)| u),
                u_b_spread: hi - lo,
                series: r.boundary_series.clone(),
            }
        });
    Ok(ExperimentReport {
        config: cfg.clone(),
        runs,
        rates: Vec::new(),
        junction,
        spacetime: None,
        files: Vec::new(),
    })
}

fn zero_data() -> Arc<dyn Fn(f64) -> f64 + Send + Sync> {
    Arc::new(|_| 0.0)
}

/// Midpoint run of the single-edge experiment that stops at every time in
/// `targets` (sorted, inside `(-1, 1]`) and returns the coefficients there.
fn single_edge_midpoint(
    cfg: &ExperimentConfig,
    n: usize,
    targets: &[f64],
) -> Result<(RunSummary, Vec<CoeffVector<f64>>), HarnessError> {
    let dt = cfg.step_for(Method::Chebyshev, n)?;
    let ctx = || context(cfg, Method::Chebyshev, n);
    let solver = SingleEdgeSolver::new(
        n,
        cfg.flux_model()?,
        cfg.chebyshev_dissipation()?,
        [EdgeEnd::Left, EdgeEnd::Right]
            .into_iter()
            .map(|end| EdgeBoundary {
                end,
                value: zero_data(),
                rule: BoundaryRule::Characteristic,
            })
            .collect(),
        cfg.speed_bound()?,
    )
    .map_err(|source| HarnessError::Solver {
        context: ctx(),
        source,
    })?;
    let grid = solver.grid().clone();
    let cheb = |e: crate::cheb::ChebError| HarnessError::Solver {
        context: ctx(),
        source: e.into(),
    };
    let vals: Vec<f64> = grid.points().iter().map(|&x| single_edge_data(x)).collect();
    let mut range = vals
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let mut c = forward_transform(&vals, &grid).map_err(cheb)?;
    let start = Instant::now();
    let mut t = cfg.t_start();
    let mut steps = 0;
    let mut states = Vec::with_capacity(targets.len());
    let eps = dt * 1e-9;
    for &target in targets {
        while target - t > eps {
            let h = if target - t - dt <= eps {
                target - t
            } else {
                dt
            };
            c = solver.step(&c, t, h).map_err(|e| HarnessError::Solver {
                context: ctx(),
                source: crate::netsolver::SolverError::StepFailed {
                    time: t,
                    source: Box::new(e),
                },
            })?;
            t += h;
            steps += 1;
            for v in inverse_transform(&c, &grid).map_err(cheb)? {
                range = (range.0.min(v), range.1.max(v));
            }
        }
        t = target;
        states.push(c.clone());
    }
    let seconds = start.elapsed().as_secs_f64();
    let mut profiles = Vec::new();
    for &t_out in &output_targets(cfg) {
        let k = targets
            .iter()
            .position(|&s| s == t_out)
            .expect("output times are targets");
        profiles.push(EdgeProfile {
            edge: 0,
            t: t_out,
            x: grid.points().to_vec(),
            u: inverse_transform(&states[k], &grid).map_err(cheb)?,
        });
    }
    Ok((
        RunSummary {
            method: Method::Chebyshev,
            n,
            dt,
            seconds,
            steps,
            error_incoming: None,
            error_network: None,
            range,
            max_junction_residual: None,
            max_energy_increase: None,
            max_chebyshev_energy_increase: None,
            profiles,
            boundary_series: Vec::new(),
        },
        states,
    ))
}

/// `int_{-1}^{1} |f - g| dx` by the trapezoidal rule on 201 points.
fn l1_distance(f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64) -> f64 {
    let h = 0.01;
    (0..=200)
        .map(|i| {
            let x = -1.0 + h * i as f64;
            let w = if i == 0 || i == 200 { 0.5 } else { 1.0 };
            w * h * (f(x) - g(x)).abs()
        })
        .sum()
}

fn single_edge_2d(cfg: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    let methods = cfg.methods();
    let with_2d = methods.contains(&Method::Cheb2d);
    let outputs = output_targets(cfg);
    let st_grid =
        SpaceTimeGrid::<f64>::new(cfg.n2d, cfg.n2d).map_err(|source| HarnessError::SpaceTime {
            context: "single_edge_2d grid".into(),
            source,
        })?;
    // time nodes run from t = 1 (m = 0) down to t = -1 (m = N)
    let node_times: Vec<f64> = st_grid.t.points().to_vec();
    let &finest = cfg.n.last().expect("validated non-empty");

    let mut runs = Vec::new();
    let mut finest_states = None;
    let mut finest_targets = Vec::new();
    for &n in &cfg.n {
        let mut targets = outputs.clone();
        if with_2d && n == finest {
            targets.extend(node_times.iter().copied().filter(|&t| t > -1.0));
            targets.sort_by(f64::total_cmp);
            targets.dedup();
        }
        let (run, states) = single_edge_midpoint(cfg, n, &targets)?;
        if n == finest {
            finest_states = Some(states);
            finest_targets = targets;
        }
        if methods.contains(&Method::Chebyshev) {
            runs.push(run);
        }
    }
    let finest_states = finest_states.expect("finest run recorded");
    let at = |t: f64| &finest_states[finest_targets.iter().position(|&s| s == t).expect("target")];
    let midpoint_final = at(cfg.t_final).clone();
    let midpoint_exact_l1 = (cfg.t_final == 1.0)
        .then(|| l1_distance(|x| midpoint_final.evaluate(x), single_edge_exact_final));

    let mut spacetime = None;
    if with_2d {
        let nx = cfg.n2d;
        let mut guess = Array2::<f64>::zeros((nx + 1, nx + 1));
        for (m, &t) in node_times.iter().enumerate() {
            for (i, &x) in st_grid.x.points().iter().enumerate() {
                guess[[i, m]] = if m == nx {
                    single_edge_data(x)
                } else {
                    at(t).evaluate(x)
                };
            }
        }
        let mut problem =
            SpaceTimeProblem::new(nx, nx, cfg.flux_model()?, Arc::new(single_edge_data));
        for end in [EdgeEnd::Left, EdgeEnd::Right] {
            problem.boundaries.push(SpaceTimeBoundary {
                end,
                value: zero_data(),
                rule: BoundaryRule::Characteristic,
            });
        }
        problem.viscosity = Some(
            SsvSpec::new(cfg.viscosity2d.0, cfg.viscosity2d.1)
                .map_err(|e| HarnessError::Config(e.to_string()))?,
        );
        problem.active_set_sweeps = 1;
        problem.max_iterations = SPACETIME_MAX_ITERATIONS;
        let ctx = format!("single_edge_2d cheb2d N={nx}");
        let st_err = |source| HarnessError::SpaceTime {
            context: ctx.clone(),
            source,
        };
        let start = Instant::now();
        let sol = SpaceTimeSolver::new(problem)
            .and_then(|s| s.solve_from(guess))
            .map_err(st_err)?;
        let seconds = start.elapsed().as_secs_f64();
        if !sol.converged {
            return Err(st_err(crate::spacetime::SpaceTimeError::NonConvergence {
                iterations: sol.iterations,
                residual: sol.constraint_norm,
            }));
        }
        let gap_l1 = l1_distance(
            |x| sol.coeffs.evaluate(x, cfg.t_final),
            |x| midpoint_final.evaluate(x),
        );
        let xs = st_grid.x.points().to_vec();
        let profiles = outputs
            .iter()
            .map(|&t| EdgeProfile {
                edge: 0,
                t,
                u: xs.iter().map(|&x| sol.coeffs.evaluate(x, t)).collect(),
                x: xs.clone(),
            })
            .collect::<Vec<_>>();
        let range = crate::spacetime::cheb2d_inverse(&sol.coeffs)
            .map_err(st_err)?
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        runs.push(RunSummary {
            method: Method::Cheb2d,
            n: nx,
            dt: 0.0,
            seconds,
            steps: sol.iterations,
            error_incoming: None,
            error_network: None,
            range,
            max_junction_residual: None,
            max_energy_increase: None,
            max_chebyshev_energy_increase: None,
            profiles,
            boundary_series: Vec::new(),
        });
        spacetime = Some(SpaceTimeSummary {
            n: nx,
            iterations: sol.iterations,
            constraint_norm: sol.constraint_norm,
            used_fallback: sol.used_fallback,
            reference_n: finest,
            gap_l1,
            midpoint_exact_l1,
            seconds,
        });
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        runs,
        rates: Vec::new(),
        junction: None,
        spacetime,
        files: Vec::new(),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn write_outputs(report: &mut ExperimentReport) -> Result<(), HarnessError> {
    let dir = report.config.output_dir.clone();
    create_dir(&dir)?;
    let mut files = Vec::new();
    for r in &report.runs {
        let name = format!("profiles_{}_n{}.csv", r.method, r.n);
        files.push(profile_csv(&r.profiles).write(&dir, &name)?);
    }
    let mut timing = Csv::new(&["method", "N", "seconds"]);
    for r in &report.runs {
        timing.row(&[
            r.method.to_string(),
            r.n.to_string(),
            format!("{:.6}", r.seconds),
        ]);
    }
    files.push(timing.write(&dir, "timing.csv")?);
    let mut summary = Csv::new(&[
        "method",
        "N",
        "dt",
        "steps",
        "min_u",
        "max_u",
        "max_junction_residual",
    ]);
    for r in &report.runs {
        summary.row(&[
            r.method.to_string(),
            r.n.to_string(),
            num(r.dt),
            r.steps.to_string(),
            num(r.range.0),
            num(r.range.1),
            opt(r.max_junction_residual),
        ]);
    }
    files.push(summary.write(&dir, "summary.csv")?);
    if report.config.experiment == Experiment::Validation {
        let mut errors = Csv::new(&["method", "N", "error_incoming", "error_network"]);
        for r in &report.runs {
            errors.row(&[
                r.method.to_string(),
                r.n.to_string(),
                opt(r.error_incoming),
                opt(r.error_network),
            ]);
        }
        files.push(errors.write(&dir, "errors.csv")?);
        let mut rates = Csv::new(&["method", "N", "error", "rate"]);
        for row in &report.rates {
            rates.row(&[
                row.method.to_string(),
                row.n.to_string(),
                num(row.error),
                opt(row.rate),
            ]);
        }
        files.push(rates.write(&dir, "rates.csv")?);
    }
    if report.config.track_energy {
        let mut energy = Csv::new(&[
            "method",
            "N",
            "max_weighted_increase",
            "max_chebyshev_increase",
        ]);
        for r in report.runs.iter().filter(|r| r.method == Method::Chebyshev) {
            energy.row(&[
                r.method.to_string(),
                r.n.to_string(),
                opt(r.max_energy_increase),
                opt(r.max_chebyshev_energy_increase),
            ]);
        }
        files.push(energy.write(&dir, "energy.csv")?);
    }
    if let Some(j) = &report.junction {
        let mut csv = Csv::new(&["t", "u_b"]);
        for &(t, u) in &j.series {
            csv.row(&[num(t), num(u)]);
        }
        files.push(csv.write(&dir, "junction.csv")?);
    }
    if let Some(s) = &report.spacetime {
        let mut csv = Csv::new(&[
            "N",
            "iterations",
            "constraint_norm",
            "midpoint_N",
            "gap_l1",
            "midpoint_exact_l1",
        ]);
        csv.row(&[
            s.n.to_string(),
            s.iterations.to_string(),
            num(s.constraint_norm),
            s.reference_n.to_string(),
            num(s.gap_l1),
            opt(s.midpoint_exact_l1),
        ]);
        files.push(csv.write(&dir, "spacetime.csv")?);
    }
    report.files = files;
    Ok(())
}

/// Validates `cfg`, runs the experiment and writes its CSV files to
/// `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    cfg.validate()?;
    let mut report = match cfg.experiment {
        Experiment::Validation => validation(cfg)?,
        Experiment::RiemannJunction => riemann_junction(cfg)?,
        Experiment::SingleEdge2d => single_edge_2d(cfg)?,
    };
    write_outputs(&mut report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn data_use_left_limits() {
        assert_eq!(indicator(-0.5, 0.0, -0.5), 0.0);
        assert_eq!(indicator(-0.5, 0.0, 0.0), 1.0);
        assert_eq!(single_edge_data(-0.75), 0.0);
        assert_eq!(single_edge_data(-0.25), 1.0);
        assert!((single_edge_data(-0.25 + 1e-12) - 11.0 / 6.0).abs() < 1e-11);
        assert!((single_edge_data(0.5) - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(single_edge_data(0.6), 0.0);
    }

    #[test]
    fn l1_distance_of_linear_functions() {
        let d = l1_distance(|x| x, |_| 0.0);
        assert!((d - 1.0).abs() < 1e-12);
    }
}
