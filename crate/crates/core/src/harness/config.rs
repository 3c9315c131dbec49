//! Flat `key = value` experiment configuration.
//!
//! One setting per line, `#` starts a comment. Lists are comma separated and
//! reals may be written as fractions (`1/6`).

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::cheb::{CglGrid, FilterSpec};
use crate::flux::{FluxModel, FluxRegistry};
use crate::fvs::MIN_REFERENCE_CELLS;
use crate::netsolver::{Dissipation, SsvSpec};

use super::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    /// Three edges, discontinuous data, errors against a fine finite-volume run.
    Validation,
    /// Constant data on each edge.
    RiemannJunction,
    /// One edge, space-time collocation against the midpoint scheme.
    SingleEdge2d,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Chebyshev,
    Fvs,
    Cheb2d,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Chebyshev => "chebyshev",
            Method::Fvs => "fvs",
            Method::Cheb2d => "cheb2d",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The `method` key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodChoice {
    Chebyshev,
    Fvs,
    Both,
    Cheb2d,
}

impl MethodChoice {
    /// Methods run for `experiment`. `both` on the single-edge experiment
    /// means the midpoint scheme and the space-time solver.
    pub fn methods(self, experiment: Experiment) -> Vec<Method> {
        match (self, experiment) {
            (MethodChoice::Chebyshev, _) => vec![Method::Chebyshev],
            (MethodChoice::Fvs, _) => vec![Method::Fvs],
            (MethodChoice::Cheb2d, _) => vec![Method::Cheb2d],
            (MethodChoice::Both, Experiment::SingleEdge2d) => {
                vec![Method::Chebyshev, Method::Cheb2d]
            }
            (MethodChoice::Both, _) => vec![Method::Chebyshev, Method::Fvs],
        }
    }
}

impl FromStr for Experiment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "validation" => Ok(Self::Validation),
            "riemann_junction" => Ok(Self::RiemannJunction),
            "single_edge_2d" => Ok(Self::SingleEdge2d),
            _ => Err(format!(
                "unknown experiment '{s}' (expected validation, riemann_junction or single_edge_2d)"
            )),
        }
    }
}

impl FromStr for MethodChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "chebyshev" => Ok(Self::Chebyshev),
            "fvs" => Ok(Self::Fvs),
            "both" => Ok(Self::Both),
            "cheb2d" => Ok(Self::Cheb2d),
            _ => Err(format!(
                "unknown method '{s}' (expected chebyshev, fvs, both or cheb2d)"
            )),
        }
    }
}

/// Dissipation of the Chebyshev solvers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DissipationChoice {
    Filter,
    Ssv,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Collocation degree (cells for the finite-volume scheme) per edge; one
    /// run per entry.
    pub n: Vec<usize>,
    pub dt: f64,
    /// Use `min(dt, CFL bound)` for each `n` instead of rejecting the config.
    pub dt_clamp: bool,
    pub filter_p: u32,
    pub dissipation: DissipationChoice,
    pub ssv_epsilon: f64,
    pub ssv_s: u32,
    pub t_final: f64,
    pub flux: String,
    pub output_times: Vec<f64>,
    pub output_dir: PathBuf,
    pub method: MethodChoice,
    pub reference_cells: usize,
    /// Space and time degree of the space-time solver.
    pub n2d: usize,
    /// Spectral viscosity of the space-time solver, `eps` and order `s`.
    pub viscosity2d: (f64, u32),
    /// Record the energy around every dissipation stage.
    pub track_energy: bool,
}

const KEYS: &[&str] = &[
    "experiment",
    "n",
    "dt",
    "dt_clamp",
    "filter_p",
    "dissipation",
    "ssv_epsilon",
    "ssv_s",
    "t_final",
    "flux",
    "output_times",
    "output_dir",
    "method",
    "reference_cells",
    "n2d",
    "viscosity2d_epsilon",
    "viscosity2d_s",
    "track_energy",
];

fn parse_real(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("bad number '{s}'"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("bad number '{s}'"))?;
            a / b
        }
        None => s.parse().map_err(|_| format!("bad number '{s}'"))?,
    };
    if !v.is_finite() {
        return Err(format!("'{s}' is not finite"));
    }
    Ok(v)
}

fn parse_list<V>(s: &str, item: impl Fn(&str) -> Result<V, String>) -> Result<Vec<V>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(item)
        .collect()
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("bad boolean '{s}'")),
    }
}

fn parse_usize(s: &str) -> Result<usize, String> {
    s.trim().parse().map_err(|_| format!("bad integer '{s}'"))
}

/// Chebyshev CFL bound `min spacing / (2 L)`.
pub fn chebyshev_cfl(n: usize, lipschitz: f64) -> Result<f64, HarnessError> {
    let g = CglGrid::<f64>::new(n).map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok(g.min_spacing() / (2.0 * lipschitz))
}

/// Finite-volume CFL bound `dx / (2 L)` on `[-1, 1]`.
pub fn fvs_cfl(n: usize, lipschitz: f64) -> f64 {
    2.0 / n as f64 / (2.0 * lipschitz)
}

impl ExperimentConfig {
    /// Defaults of `experiment`, before any key is applied.
    pub fn defaults(experiment: Experiment) -> Self {
        let base = Self {
            experiment,
            n: vec![60, 120, 600],
            dt: 1e-4,
            dt_clamp: false,
            filter_p: 10,
            dissipation: DissipationChoice::Filter,
            ssv_epsilon: 1.0,
            ssv_s: 1,
            t_final: 1.0 / 6.0,
            flux: "lwr".into(),
            output_times: Vec::new(),
            output_dir: PathBuf::from("out"),
            method: MethodChoice::Both,
            reference_cells: 12000,
            n2d: 32,
            viscosity2d: (10.0, 2),
            track_energy: false,
        };
        match experiment {
            Experiment::Validation => base,
            Experiment::RiemannJunction => Self {
                n: vec![120],
                t_final: 1.0,
                method: MethodChoice::Chebyshev,
                ..base
            },
            Experiment::SingleEdge2d => Self {
                n: vec![120],
                dt: 5e-5,
                t_final: 1.0,
                ..base
            },
        }
    }

    /// Start of the time interval: `-1` for the space-time experiment, `0`
    /// otherwise.
    pub fn t_start(&self) -> f64 {
        match self.experiment {
            Experiment::SingleEdge2d => -1.0,
            _ => 0.0,
        }
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut pairs: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                HarnessError::Config(format!("line {}: expected key = value", i + 1))
            })?;
            let k = k.trim().to_string();
            if !KEYS.contains(&k.as_str()) {
                return Err(HarnessError::Config(format!(
                    "line {}: unknown key '{k}'",
                    i + 1
                )));
            }
            if pairs
                .insert(k.clone(), (i + 1, v.trim().to_string()))
                .is_some()
            {
                return Err(HarnessError::Config(format!(
                    "line {}: duplicate key '{k}'",
                    i + 1
                )));
            }
        }
        let (_, exp) = pairs
            .remove("experiment")
            .ok_or_else(|| HarnessError::Config("missing key 'experiment'".into()))?;
        let experiment: Experiment = exp.parse().map_err(HarnessError::Config)?;
        let mut cfg = Self::defaults(experiment);
        for (k, (line, v)) in &pairs {
            cfg.set(k, v)
                .map_err(|e| HarnessError::Config(format!("line {line}: {k}: {e}")))?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies one setting; `experiment` cannot be changed this way.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        match key {
            "n" => self.n = parse_list(v, parse_usize)?,
            "dt" => self.dt = parse_real(v)?,
            "dt_clamp" => self.dt_clamp = parse_bool(v)?,
            "filter_p" => self.filter_p = v.parse().map_err(|_| format!("bad integer '{v}'"))?,
            "dissipation" => {
                self.dissipation = match v {
                    "filter" => DissipationChoice::Filter,
                    "ssv" => DissipationChoice::Ssv,
                    _ => {
                        return Err(format!(
                            "unknown dissipation '{v}' (expected filter or ssv)"
                        ))
                    }
                }
            }
            "ssv_epsilon" => self.ssv_epsilon = parse_real(v)?,
            "ssv_s" => self.ssv_s = v.parse().map_err(|_| format!("bad integer '{v}'"))?,
            "t_final" => self.t_final = parse_real(v)?,
            "flux" => self.flux = v.to_string(),
            "output_times" => self.output_times = parse_list(v, parse_real)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "method" => self.method = v.parse()?,
            "reference_cells" => self.reference_cells = parse_usize(v)?,
            "n2d" => self.n2d = parse_usize(v)?,
            "viscosity2d_epsilon" => self.viscosity2d.0 = parse_real(v)?,
            "viscosity2d_s" => {
                self.viscosity2d.1 = v.parse().map_err(|_| format!("bad integer '{v}'"))?
            }
            "track_energy" => self.track_energy = parse_bool(v)?,
            "experiment" => return Err("cannot be overridden".into()),
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    pub fn flux_model(&self) -> Result<FluxModel<f64>, HarnessError> {
        FluxRegistry::default()
            .get(&self.flux)
            .map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Dissipation of the Chebyshev solvers.
    pub fn chebyshev_dissipation(&self) -> Result<Dissipation<f64>, HarnessError> {
        match self.dissipation {
            DissipationChoice::Filter => FilterSpec::machine_precision(self.filter_p)
                .map(Dissipation::Filter)
                .map_err(|e| HarnessError::Config(format!("filter_p: {e}"))),
            DissipationChoice::Ssv => SsvSpec::new(self.ssv_epsilon, self.ssv_s)
                .map(Dissipation::Ssv)
                .map_err(|e| HarnessError::Config(e.to_string())),
        }
    }

    /// Bound on the characteristic speed over every state the data can reach.
    pub fn speed_bound(&self) -> Result<f64, HarnessError> {
        let model = self.flux_model()?;
        Ok(match self.experiment {
            Experiment::SingleEdge2d => {
                let (lo, hi) = super::experiments::single_edge_data_range();
                model.max_speed_on(lo.min(0.0), hi.max(model.u_max()))
            }
            _ => model.lipschitz(),
        })
    }

    /// Largest admissible step of `method` at degree (or cell count) `n`.
    pub fn cfl_bound(&self, method: Method, n: usize) -> Result<f64, HarnessError> {
        let speed = self.speed_bound()?;
        match method {
            Method::Fvs => Ok(fvs_cfl(n, speed)),
            Method::Chebyshev | Method::Cheb2d => chebyshev_cfl(n, speed),
        }
    }

    /// Step used for `method` at `n`: `dt`, or the CFL bound when smaller and
    /// `dt_clamp` is set.
    pub fn step_for(&self, method: Method, n: usize) -> Result<f64, HarnessError> {
        let bound = self.cfl_bound(method, n)?;
        if self.dt <= bound * (1.0 + 1e-12) {
            Ok(self.dt)
        } else if self.dt_clamp {
            Ok(bound)
        } else {
            Err(HarnessError::Config(format!(
                "dt = {} exceeds the CFL bound {bound:.6e} of {method} at n = {n} (set dt_clamp = true to clamp)",
                self.dt
            )))
        }
    }

    pub fn methods(&self) -> Vec<Method> {
        self.method.methods(self.experiment)
    }

    /// Checks every invariant that does not need a solver run.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let err = |m: String| Err(HarnessError::Config(m));
        if self.n.is_empty() {
            return err("n: at least one value needed".into());
        }
        if self.n.windows(2).any(|w| w[1] <= w[0]) {
            return err(format!("n: values must increase, got {:?}", self.n));
        }
        if !(self.dt > 0.0) {
            return err(format!("dt must be positive, got {}", self.dt));
        }
        let start = self.t_start();
        if !(self.t_final > start) {
            return err(format!("t_final must exceed {start}, got {}", self.t_final));
        }
        if self.experiment == Experiment::SingleEdge2d && self.t_final > 1.0 {
            return err(format!(
                "t_final must lie in (-1, 1] for single_edge_2d, got {}",
                self.t_final
            ));
        }
        if let Some(&t) = self
            .output_times
            .iter()
            .find(|&&t| !(t > start && t <= self.t_final))
        {
            return err(format!(
                "output time {t} outside ({start}, {}]",
                self.t_final
            ));
        }
        self.flux_model()?;
        self.chebyshev_dissipation()?;
        let methods = self.methods();
        match self.experiment {
            Experiment::SingleEdge2d => {
                if methods.contains(&Method::Fvs) {
                    return err("method fvs is not available for single_edge_2d".into());
                }
                if self.n2d < 4 {
                    return err(format!("n2d must be at least 4, got {}", self.n2d));
                }
                SsvSpec::new(self.viscosity2d.0, self.viscosity2d.1)
                    .map_err(|e| HarnessError::Config(format!("viscosity2d: {e}")))?;
            }
            _ => {
                if methods.contains(&Method::Cheb2d) {
                    return err("method cheb2d is only available for single_edge_2d".into());
                }
            }
        }
        if self.experiment == Experiment::Validation && self.reference_cells < MIN_REFERENCE_CELLS {
            return err(format!(
                "reference_cells must be at least {MIN_REFERENCE_CELLS}, got {}",
                self.reference_cells
            ));
        }
        for &m in &methods {
            if m == Method::Cheb2d {
                continue;
            }
            for &n in &self.n {
                if n < 2 {
                    return err(format!("n must be at least 2, got {n}"));
                }
                self.step_for(m, n)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_lists_and_fractions() {
        let cfg = ExperimentConfig::parse(
            "# three resolutions\nexperiment = validation\nn = 60, 120\nt_final = 1/6  # end\n\nmethod=fvs\n",
        )
        .unwrap();
        assert_eq!(cfg.n, vec![60, 120]);
        assert!((cfg.t_final - 1.0 / 6.0).abs() < 1e-16);
        assert_eq!(cfg.method, MethodChoice::Fvs);
        assert_eq!(cfg.filter_p, 10);
    }

    #[test]
    fn rejects_bad_lines() {
        for text in [
            "n = 60",
            "experiment = validation\nfoo = 1",
            "experiment = validation\nn = 60\nn = 120",
            "experiment = validation\nn 60",
            "experiment = nope",
            "experiment = validation\ndt = abc",
            "experiment = validation\nmethod = spectral",
        ] {
            assert!(
                matches!(ExperimentConfig::parse(text), Err(HarnessError::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn cfl_message_quotes_bound() {
        let mut cfg = ExperimentConfig::defaults(Experiment::Validation);
        cfg.n = vec![600];
        cfg.method = MethodChoice::Chebyshev;
        let bound = chebyshev_cfl(600, 1.0).unwrap();
        let HarnessError::Config(msg) = cfg.validate().unwrap_err() else {
            panic!()
        };
        assert!(msg.contains(&format!("{bound:.6e}")), "{msg}");
        cfg.dt_clamp = true;
        cfg.validate().unwrap();
        assert_eq!(cfg.step_for(Method::Chebyshev, 600).unwrap(), bound);
        assert_eq!(cfg.step_for(Method::Fvs, 600).unwrap(), 1e-4);
    }

    #[test]
    fn validation_rules() {
        let ok = ExperimentConfig::defaults(Experiment::RiemannJunction);
        ok.validate().unwrap();
        let bad = |f: &dyn Fn(&mut ExperimentConfig)| {
            let mut c = ok.clone();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(&|c| c.t_final = 0.0));
        assert!(bad(&|c| c.dt = -1.0));
        assert!(bad(&|c| c.n = vec![120, 60]));
        assert!(bad(&|c| c.flux = "nope".into()));
        assert!(bad(&|c| c.filter_p = 3));
        assert!(bad(&|c| c.output_times = vec![2.0]));
        assert!(bad(&|c| c.method = MethodChoice::Cheb2d));
        let mut v = ExperimentConfig::defaults(Experiment::Validation);
        v.dt_clamp = true;
        v.reference_cells = 100;
        assert!(v.validate().is_err());
    }

    #[test]
    fn single_edge_uses_data_speed() {
        let cfg = ExperimentConfig::defaults(Experiment::SingleEdge2d);
        assert!((cfg.speed_bound().unwrap() - 8.0 / 3.0).abs() < 1e-12);
        assert_eq!(cfg.t_start(), -1.0);
        cfg.validate().unwrap();
        assert_eq!(cfg.methods(), vec![Method::Chebyshev, Method::Cheb2d]);
    }
}
