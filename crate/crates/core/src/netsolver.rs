//! Filtered Chebyshev collocation on the three-edge network.
//!
//! Every edge is mapped to `[-1, 1]`. The two incoming edges touch the
//! junction at `x = +1` (node 0) and the outgoing edge at `x = -1` (node `N`).
//! A time step is the explicit midpoint rule
//!
//! 1. `u* = u^s - dt/2 F(u^s)`, junction solve on the traces of `u*`, impose;
//! 2. `u^{s+1} = u^s - dt F(u*)`, junction solve, impose;
//! 3. dissipation (exponential filter or the equivalent viscosity split step).
//!
//! Traces handed to the junction solve are the junction-node values after the
//! update and before the boundary value overwrites them.

use std::sync::Arc;

use thiserror::Error;

use crate::cheb::{
    derivative_coeffs, forward_transform, inverse_transform, CglGrid, ChebError, CoeffVector,
    FilterSpec, PaddedProduct,
};
use crate::flux::FluxModel;
use crate::junction::{
    boundary_states, junction_residual, solve_boundary_value, JunctionError, JunctionTraces,
};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("time step {dt} exceeds the CFL bound {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("junction: {0}")]
    Junction(#[from] JunctionError),
    #[error("transform: {0}")]
    Cheb(#[from] ChebError),
    #[error("non-finite coefficients")]
    NonFinite,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("step failed at t = {time}: {source}")]
    StepFailed {
        time: f64,
        #[source]
        source: Box<SolverError>,
    },
}

/// Which endpoint of an edge touches the junction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeEnd {
    /// `x = +1`, node 0; incoming edges.
    Right,
    /// `x = -1`, node `N`; the outgoing edge.
    Left,
}

impl EdgeEnd {
    pub fn opposite(self) -> Self {
        match self {
            EdgeEnd::Right => EdgeEnd::Left,
            EdgeEnd::Left => EdgeEnd::Right,
        }
    }

    pub fn node(self, degree: usize) -> usize {
        match self {
            EdgeEnd::Right => 0,
            EdgeEnd::Left => degree,
        }
    }

    pub fn coordinate<T: Scalar>(self) -> T {
        match self {
            EdgeEnd::Right => T::one(),
            EdgeEnd::Left => -T::one(),
        }
    }
}

/// Which nodal value stands for the trace of an edge at the junction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TraceRule {
    /// The junction node itself, after the update and before the override.
    #[default]
    JunctionNode,
    /// The collocation node next to the junction node.
    AdjacentNode,
}

/// How the solved boundary value enters the edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BoundaryMode {
    /// Each edge takes the state on its side of the junction Riemann problem
    /// built from its trace and `u_b`.
    #[default]
    RiemannStates,
    /// Every edge takes `u_b` itself.
    Uniform,
}

/// Network layout: edges 0 and 1 incoming, edge 2 outgoing.
pub const JUNCTION_ENDS: [EdgeEnd; 3] = [EdgeEnd::Right, EdgeEnd::Right, EdgeEnd::Left];

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralEdgeState<T> {
    pub coeffs: CoeffVector<T>,
    pub junction_end: EdgeEnd,
}

impl<T: Scalar> SpectralEdgeState<T> {
    pub fn new(coeffs: CoeffVector<T>, junction_end: EdgeEnd) -> Self {
        Self {
            coeffs,
            junction_end,
        }
    }

    /// Value of the interpolant at the junction endpoint.
    pub fn junction_value(&self) -> T {
        endpoint_value(&self.coeffs, self.junction_end)
    }

    pub fn nodal_values(&self, grid: &CglGrid<T>) -> Result<Vec<T>, ChebError> {
        inverse_transform(&self.coeffs, grid)
    }

    /// Overwrites the junction nodal value with `value`, leaving every other
    /// nodal value untouched.
    pub fn set_junction_value(&mut self, value: T) {
        set_endpoint_value(&mut self.coeffs, self.junction_end, value);
    }
}

fn endpoint_value<T: Scalar>(c: &CoeffVector<T>, end: EdgeEnd) -> T {
    match end {
        EdgeEnd::Right => c.value_at_right(),
        EdgeEnd::Left => c.value_at_left(),
    }
}

/// Changing the nodal value at `x = +-1` by `delta` changes `c_k` by
/// `delta w_0 T_k(+-1) / gamma_k`, i.e. `delta / N` in the interior modes and
/// `delta / 2N` in the first and last.
fn set_endpoint_value<T: Scalar>(c: &mut CoeffVector<T>, end: EdgeEnd, value: T) {
    let n = c.degree();
    let delta = value - endpoint_value(c, end);
    let inner = delta / T::of(n);
    let outer = inner * T::half();
    for (k, ck) in c.iter_mut().enumerate() {
        let w = if k == 0 || k == n { outer } else { inner };
        let negate = end == EdgeEnd::Left && k % 2 == 1;
        *ck += if negate { -w } else { w };
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkState<T> {
    pub edges: [SpectralEdgeState<T>; 3],
    pub t: T,
    pub u_b: T,
}

impl<T: Scalar> NetworkState<T> {
    pub fn traces(&self) -> JunctionTraces<T> {
        JunctionTraces::new(
            self.edges[0].junction_value(),
            self.edges[1].junction_value(),
            self.edges[2].junction_value(),
        )
    }
}

/// Super spectral viscosity `eps (-1)^{s+1} N^{1-2s} (sqrt(1-x^2) d/dx)^{2s}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsvSpec<T> {
    pub epsilon: T,
    pub s: u32,
}

impl<T: Scalar> SsvSpec<T> {
    pub fn new(epsilon: T, s: u32) -> Result<Self, SolverError> {
        if s < 1 || !(epsilon > T::zero()) {
            return Err(SolverError::Config(format!(
                "viscosity needs epsilon > 0 and s >= 1 (got {epsilon}, {s})"
            )));
        }
        Ok(Self { epsilon, s })
    }

    /// The exponential filter reproducing one split step of length `dt` at degree `n`.
    pub fn equivalent_filter(&self, dt: T, n: usize) -> Result<FilterSpec<T>, ChebError> {
        FilterSpec::new(2 * self.s, self.epsilon * T::of(n) * dt)
    }
}

/// Exact solution of the viscosity split step over `dt`:
/// `c_k exp(-eps N dt (k/N)^{2s})`.
pub fn ssv_split_step<T: Scalar>(
    c: &CoeffVector<T>,
    spec: &SsvSpec<T>,
    dt: T,
    n: usize,
) -> CoeffVector<T> {
    let nt = T::of(n);
    let rate = spec.epsilon * nt * dt;
    let p = 2 * spec.s as i32;
    CoeffVector::from_vec(
        c.iter()
            .enumerate()
            .map(|(k, &ck)| ck * (-rate * (T::of(k) / nt).powi(p)).exp())
            .collect(),
    )
}

/// Dissipation applied once per step after the update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Dissipation<T> {
    None,
    Filter(FilterSpec<T>),
    Ssv(SsvSpec<T>),
}

/// `sum_j u(x_j)^2 w_j sqrt(1 - x_j^2)`, a quadrature for the unweighted `L^2` norm.
pub fn weighted_energy<T: Scalar>(values: &[T], grid: &CglGrid<T>) -> T {
    values
        .iter()
        .zip(grid.points())
        .zip(grid.quad_weights())
        .map(|((&u, &x), &w)| u * u * w * (T::one() - x * x).max(T::zero()).sqrt())
        .sum()
}

/// `sum_j u(x_j)^2 w_j`, the discrete Chebyshev-weighted norm (equal to
/// `sum_k gamma_k c_k^2`).
pub fn chebyshev_energy<T: Scalar>(values: &[T], grid: &CglGrid<T>) -> T {
    values
        .iter()
        .zip(grid.quad_weights())
        .map(|(&u, &w)| u * u * w)
        .sum()
}

/// The coefficient-space operator `F(u) = P(f'(u)~, D u~)` on one edge.
#[derive(Clone, Debug)]
pub struct EdgeOperator<T: Scalar> {
    grid: CglGrid<T>,
    product: PaddedProduct<T>,
    model: FluxModel<T>,
}

impl<T: Scalar> EdgeOperator<T> {
    pub fn new(n: usize, model: FluxModel<T>) -> Result<Self, ChebError> {
        Ok(Self {
            grid: CglGrid::new(n)?,
            product: PaddedProduct::new(n)?,
            model,
        })
    }

    pub fn grid(&self) -> &CglGrid<T> {
        &self.grid
    }

    pub fn model(&self) -> &FluxModel<T> {
        &self.model
    }

    /// `-P(f'~, D u~)` together with the nodal values of `u`.
    pub fn rhs_with_values(
        &self,
        coeffs: &CoeffVector<T>,
    ) -> Result<(CoeffVector<T>, Vec<T>), ChebError> {
        let values = inverse_transform(coeffs, &self.grid)?;
        let speeds: Vec<T> = values.iter().map(|&u| self.model.f_prime(u)).collect();
        let speed_coeffs = forward_transform(&speeds, &self.grid)?;
        let du = derivative_coeffs(coeffs);
        let mut out = self.product.product(&speed_coeffs, &du)?;
        for c in out.iter_mut() {
            *c = -*c;
        }
        Ok((out, values))
    }

    pub fn rhs(&self, coeffs: &CoeffVector<T>) -> Result<CoeffVector<T>, ChebError> {
        Ok(self.rhs_with_values(coeffs)?.0)
    }
}

/// Time derivative of the coefficients on one edge, `-sum P_knm D_mi f'_n u_i`.
pub fn semi_discrete_rhs<T: Scalar>(
    edge: &SpectralEdgeState<T>,
    model: &FluxModel<T>,
    grid: &CglGrid<T>,
) -> Result<CoeffVector<T>, ChebError> {
    EdgeOperator::new(grid.degree(), model.clone())?.rhs(&edge.coeffs)
}

/// Largest stable step `min_edge min_j |x_{j+1} - x_j| / (2 max_h L_h)`.
pub fn cfl_timestep<T: Scalar>(grids: &[&CglGrid<T>], models: &[&FluxModel<T>]) -> T {
    let spacing = grids
        .iter()
        .map(|g| g.min_spacing())
        .fold(T::infinity(), T::min);
    let speed = models.iter().map(|m| m.lipschitz()).fold(T::zero(), T::max);
    spacing / (T::two() * speed)
}

/// Overwrites the junction value of every edge with `u_b`.
pub fn impose_boundary<T: Scalar>(state: &NetworkState<T>, u_b: T) -> NetworkState<T> {
    let mut out = state.clone();
    for e in out.edges.iter_mut() {
        e.set_junction_value(u_b);
    }
    out.u_b = u_b;
    out
}

fn check_dt<T: Scalar>(dt: T, limit: T) -> Result<(), SolverError> {
    if !(dt > T::zero()) || dt > limit * (T::one() + T::lit(1e-12)) {
        return Err(SolverError::CflViolation {
            dt: dt.as_f64(),
            limit: limit.as_f64(),
        });
    }
    Ok(())
}

/// Diagnostics of one accepted step.
#[derive(Clone, Debug)]
pub struct StepReport<T> {
    pub state: NetworkState<T>,
    /// Boundary value solved on the midpoint state.
    pub u_b_half: T,
    /// `|phi(u_b)|` for both junction solves of the step.
    pub junction_residuals: [T; 2],
    /// Nodal range of the state the step started from.
    pub start_range: (T, T),
    /// Energies of each edge around the dissipation stage, when tracked.
    pub dissipation_energy: Option<[EnergyChange<T>; 3]>,
}

/// Energies before and after one dissipation stage.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyChange<T> {
    /// [`weighted_energy`] before and after.
    pub weighted: (T, T),
    /// [`chebyshev_energy`] before and after.
    pub chebyshev: (T, T),
}

/// Midpoint stepper for the three-edge network.
#[derive(Clone, Debug)]
pub struct NetworkSolver<T: Scalar> {
    ops: [EdgeOperator<T>; 3],
    models: [FluxModel<T>; 3],
    dissipation: Dissipation<T>,
    filter_factors: Option<Vec<T>>,
    junction_tol: T,
    cfl_limit: T,
    trace_rule: TraceRule,
    boundary_mode: BoundaryMode,
    free_ends: [Option<T>; 3],
    free_end_rule: BoundaryRule,
    track_energy: bool,
}

impl<T: Scalar> NetworkSolver<T> {
    pub fn new(
        n: usize,
        models: [FluxModel<T>; 3],
        dissipation: Dissipation<T>,
    ) -> Result<Self, SolverError> {
        let ops = [
            EdgeOperator::new(n, models[0].clone())?,
            EdgeOperator::new(n, models[1].clone())?,
            EdgeOperator::new(n, models[2].clone())?,
        ];
        let cfl_limit = cfl_timestep(
            &[ops[0].grid(), ops[1].grid(), ops[2].grid()],
            &[&models[0], &models[1], &models[2]],
        );
        let filter_factors = match dissipation {
            Dissipation::Filter(f) => Some(f.factors(n)),
            _ => None,
        };
        Ok(Self {
            ops,
            models,
            dissipation,
            filter_factors,
            junction_tol: T::lit(crate::junction::DEFAULT_TOL),
            cfl_limit,
            trace_rule: TraceRule::default(),
            boundary_mode: BoundaryMode::default(),
            free_ends: [None; 3],
            free_end_rule: BoundaryRule::default(),
            track_energy: false,
        })
    }

    /// Uses the initial value at each free end as far-field datum, imposed
    /// with `rule` after every stage.
    pub fn with_free_end_data(mut self, profiles: &[Profile<T>; 3], rule: BoundaryRule) -> Self {
        for (h, p) in profiles.iter().enumerate() {
            self.free_ends[h] = Some(p(JUNCTION_ENDS[h].opposite().coordinate()));
        }
        self.free_end_rule = rule;
        self
    }

    /// Records the energies around every dissipation stage in [`StepReport`].
    pub fn with_energy_tracking(mut self, on: bool) -> Self {
        self.track_energy = on;
        self
    }

    /// Far-field data at the free ends, per edge.
    pub fn free_end_values(&self) -> [Option<T>; 3] {
        self.free_ends
    }

    pub fn with_boundary_mode(mut self, mode: BoundaryMode) -> Self {
        self.boundary_mode = mode;
        self
    }

    pub fn boundary_mode(&self) -> BoundaryMode {
        self.boundary_mode
    }

    pub fn with_trace_rule(mut self, rule: TraceRule) -> Self {
        self.trace_rule = rule;
        self
    }

    pub fn trace_rule(&self) -> TraceRule {
        self.trace_rule
    }

    /// Junction traces of `state` under the configured rule.
    pub fn traces(&self, state: &NetworkState<T>) -> JunctionTraces<T> {
        match self.trace_rule {
            TraceRule::JunctionNode => state.traces(),
            TraceRule::AdjacentNode => {
                let pts = self.grid().points();
                let n = self.degree();
                let at = |e: &SpectralEdgeState<T>| match e.junction_end {
                    EdgeEnd::Right => e.coeffs.evaluate(pts[1]),
                    EdgeEnd::Left => e.coeffs.evaluate(pts[n - 1]),
                };
                JunctionTraces::new(
                    at(&state.edges[0]),
                    at(&state.edges[1]),
                    at(&state.edges[2]),
                )
            }
        }
    }

    pub fn with_junction_tol(mut self, tol: T) -> Self {
        self.junction_tol = tol;
        self
    }

    pub fn degree(&self) -> usize {
        self.ops[0].grid().degree()
    }

    pub fn grid(&self) -> &CglGrid<T> {
        self.ops[0].grid()
    }

    pub fn models(&self) -> &[FluxModel<T>; 3] {
        &self.models
    }

    pub fn cfl_limit(&self) -> T {
        self.cfl_limit
    }

    pub fn dissipation(&self) -> Dissipation<T> {
        self.dissipation
    }

    /// Coefficients of the initial data sampled at the nodes. No boundary
    /// value is imposed at `t = 0`; `u_b` is the junction solve on the initial
    /// traces.
    pub fn initial_state(
        &self,
        profiles: &[Profile<T>; 3],
        t0: T,
    ) -> Result<NetworkState<T>, SolverError> {
        let grid = self.grid();
        let mut edges = Vec::with_capacity(3);
        for (i, p) in profiles.iter().enumerate() {
            let vals: Vec<T> = grid.points().iter().map(|&x| p(x)).collect();
            edges.push(SpectralEdgeState::new(
                forward_transform(&vals, grid)?,
                JUNCTION_ENDS[i],
            ));
        }
        let edges: [SpectralEdgeState<T>; 3] = edges.try_into().expect("three edges");
        let mut state = NetworkState {
            edges,
            t: t0,
            u_b: T::zero(),
        };
        state.u_b = self.solve_junction(&state)?.0;
        Ok(state)
    }

    fn solve_junction(&self, state: &NetworkState<T>) -> Result<(T, T), SolverError> {
        let traces = self.traces(state).clamped(&self.models);
        let u_b = solve_boundary_value(&traces, &self.models, self.junction_tol)?;
        let res = junction_residual(u_b, &traces, &self.models)?;
        Ok((u_b, res.abs()))
    }

    /// Junction solve on `state` followed by the boundary override.
    fn close_junction(
        &self,
        state: NetworkState<T>,
    ) -> Result<(NetworkState<T>, T, T), SolverError> {
        let (u_b, res) = self.solve_junction(&state)?;
        let out = match self.boundary_mode {
            BoundaryMode::Uniform => impose_boundary(&state, u_b),
            BoundaryMode::RiemannStates => {
                let traces = self.traces(&state).clamped(&self.models);
                let values = boundary_states(&traces, u_b, &self.models);
                let mut out = state;
                for (e, v) in out.edges.iter_mut().zip(values) {
                    e.set_junction_value(v);
                }
                out.u_b = u_b;
                out
            }
        };
        let mut out = out;
        for ((e, v), m) in out.edges.iter_mut().zip(self.free_ends).zip(&self.models) {
            if let Some(v) = v {
                apply_far_field(
                    &mut e.coeffs,
                    e.junction_end.opposite(),
                    v,
                    m,
                    self.free_end_rule,
                );
            }
        }
        Ok((out, u_b, res))
    }

    fn advance(
        &self,
        base: &NetworkState<T>,
        rates: &[CoeffVector<T>; 3],
        h: T,
        t: T,
    ) -> NetworkState<T> {
        let mut out = base.clone();
        for (e, r) in out.edges.iter_mut().zip(rates) {
            for (c, &d) in e.coeffs.iter_mut().zip(r.iter()) {
                *c += h * d;
            }
        }
        out.t = t;
        out
    }

    fn rates(&self, state: &NetworkState<T>) -> Result<EdgeRates<T>, ChebError> {
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        let mut rates = Vec::with_capacity(3);
        for (op, e) in self.ops.iter().zip(&state.edges) {
            let (r, vals) = op.rhs_with_values(&e.coeffs)?;
            for &v in &vals {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            rates.push(r);
        }
        Ok((rates.try_into().expect("three edges"), (lo, hi)))
    }

    /// One explicit midpoint step of length `dt`.
    pub fn step(&self, state: &NetworkState<T>, dt: T) -> Result<StepReport<T>, SolverError> {
        check_dt(dt, self.cfl_limit)?;
        let (k1, start_range) = self.rates(state)?;
        let half = self.advance(state, &k1, T::half() * dt, state.t + T::half() * dt);
        let (half, u_half, res_half) = self.close_junction(half)?;

        let (k2, _) = self.rates(&half)?;
        let full = self.advance(state, &k2, dt, state.t + dt);
        let (mut next, _, res_full) = self.close_junction(full)?;

        let n = self.degree();
        let mut energy = [EnergyChange::default(); 3];
        for (i, e) in next.edges.iter_mut().enumerate() {
            let filtered = match (&self.dissipation, &self.filter_factors) {
                (Dissipation::None, _) => continue,
                (Dissipation::Filter(_), Some(fac)) => {
                    CoeffVector::from_vec(e.coeffs.iter().zip(fac).map(|(&c, &s)| c * s).collect())
                }
                (Dissipation::Filter(f), None) => crate::cheb::apply_filter(&e.coeffs, f),
                (Dissipation::Ssv(s), _) => ssv_split_step(&e.coeffs, s, dt, n),
            };
            if self.track_energy {
                let before = inverse_transform(&e.coeffs, self.grid())?;
                let after = inverse_transform(&filtered, self.grid())?;
                let g = self.grid();
                energy[i] = EnergyChange {
                    weighted: (weighted_energy(&before, g), weighted_energy(&after, g)),
                    chebyshev: (chebyshev_energy(&before, g), chebyshev_energy(&after, g)),
                };
            }
            e.coeffs = filtered;
        }
        if next
            .edges
            .iter()
            .any(|e| e.coeffs.iter().any(|c| !c.is_finite()))
        {
            return Err(SolverError::NonFinite);
        }
        Ok(StepReport {
            state: next,
            u_b_half: u_half,
            junction_residuals: [res_half, res_full],
            start_range,
            dissipation_energy: self.track_energy.then_some(energy),
        })
    }
}

/// One midpoint step with the exponential filter; builds the edge operators
/// on every call.
pub fn midpoint_step<T: Scalar>(
    state: &NetworkState<T>,
    dt: T,
    filter: &FilterSpec<T>,
    models: &[FluxModel<T>; 3],
) -> Result<NetworkState<T>, SolverError> {
    let n = state.edges[0].coeffs.degree();
    let solver = NetworkSolver::new(n, models.clone(), Dissipation::Filter(*filter))?;
    Ok(solver.step(state, dt)?.state)
}

/// Right-hand sides of the three edges and the nodal range they were computed from.
type EdgeRates<T> = ([CoeffVector<T>; 3], (T, T));

/// Initial profile of one edge on `[-1, 1]`.
pub type Profile<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Inputs of a network run.
#[derive(Clone)]
pub struct NetworkConfig<T: Scalar> {
    pub n: usize,
    pub dt: T,
    pub t_final: T,
    /// Times at which snapshots are kept; `t_final` is always added.
    pub output_times: Vec<T>,
    pub dissipation: Dissipation<T>,
    pub trace_rule: TraceRule,
    pub boundary_mode: BoundaryMode,
    /// Rule imposing the initial value at the free ends; `None` leaves them open.
    pub free_end_rule: Option<BoundaryRule>,
    /// Fill the energy fields of [`Trajectory`].
    pub track_energy: bool,
    pub models: [FluxModel<T>; 3],
    pub initial: [Profile<T>; 3],
}

/// Snapshots and per-step diagnostics of a network run.
#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub snapshots: Vec<NetworkState<T>>,
    /// `(t, u_b)` after every accepted step.
    pub boundary_series: Vec<(T, T)>,
    pub max_junction_residual: T,
    /// Smallest and largest nodal value over every accepted state.
    pub nodal_range: (T, T),
    /// Largest increase of [`weighted_energy`] over a dissipation stage, per
    /// edge and step (negative when every stage decreased it); tracked runs only.
    pub max_energy_increase: Option<T>,
    /// The same for [`chebyshev_energy`].
    pub max_chebyshev_energy_increase: Option<T>,
    pub steps: usize,
}

/// Marches `[0, t_final]` with fixed steps, shortening the step that lands on
/// an output time.
pub fn run_network_simulation<T: Scalar>(
    config: &NetworkConfig<T>,
) -> Result<Trajectory<T>, SolverError> {
    let solver = NetworkSolver::new(config.n, config.models.clone(), config.dissipation)?
        .with_trace_rule(config.trace_rule)
        .with_boundary_mode(config.boundary_mode)
        .with_energy_tracking(config.track_energy);
    let solver = match config.free_end_rule {
        Some(rule) => solver.with_free_end_data(&config.initial, rule),
        None => solver,
    };
    check_dt(config.dt, solver.cfl_limit())?;
    if config.t_final < T::zero() {
        return Err(SolverError::Config("t_final must be non-negative".into()));
    }
    let mut targets: Vec<T> = config
        .output_times
        .iter()
        .copied()
        .filter(|&t| t > T::zero() && t < config.t_final)
        .collect();
    targets.push(config.t_final);
    targets.sort_by(|a, b| a.partial_cmp(b).expect("finite output times"));
    targets.dedup();

    let mut state = solver.initial_state(&config.initial, T::zero())?;
    let mut traj = Trajectory {
        snapshots: vec![state.clone()],
        boundary_series: vec![(state.t, state.u_b)],
        max_junction_residual: T::zero(),
        nodal_range: (T::infinity(), T::neg_infinity()),
        max_energy_increase: None,
        max_chebyshev_energy_increase: None,
        steps: 0,
    };
    let eps = config.dt * T::lit(1e-9);
    for &target in &targets {
        while target - state.t > eps {
            let h = (target - state.t).min(config.dt);
            let h = if target - state.t - h <= eps {
                target - state.t
            } else {
                h
            };
            let report = solver
                .step(&state, h)
                .map_err(|e| SolverError::StepFailed {
                    time: state.t.as_f64(),
                    source: Box::new(e),
                })?;
            let (lo, hi) = report.start_range;
            traj.nodal_range = (traj.nodal_range.0.min(lo), traj.nodal_range.1.max(hi));
            for r in report.junction_residuals {
                traj.max_junction_residual = traj.max_junction_residual.max(r);
            }
            if let Some(changes) = report.dissipation_energy {
                for c in changes {
                    let w = c.weighted.1 - c.weighted.0;
                    let ch = c.chebyshev.1 - c.chebyshev.0;
                    traj.max_energy_increase =
                        Some(traj.max_energy_increase.map_or(w, |m| m.max(w)));
                    traj.max_chebyshev_energy_increase =
                        Some(traj.max_chebyshev_energy_increase.map_or(ch, |m| m.max(ch)));
                }
            }
            state = report.state;
            traj.boundary_series.push((state.t, state.u_b));
            traj.steps += 1;
        }
        state.t = target;
        if target > T::zero() {
            traj.snapshots.push(state.clone());
        }
    }
    for e in &state.edges {
        for v in e.nodal_values(solver.grid())? {
            traj.nodal_range = (traj.nodal_range.0.min(v), traj.nodal_range.1.max(v));
        }
    }
    Ok(traj)
}

/// How an end value is imposed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BoundaryRule {
    /// Overwrite the end value with the datum.
    Dirichlet,
    /// Overwrite with the state seen at the end in the Riemann problem between
    /// the datum (outside) and the current trace (inside). Leaves outflow ends
    /// untouched.
    Upwind,
    /// Overwrite with the datum only while the characteristic speed of the
    /// trace points into the edge.
    #[default]
    Characteristic,
}

fn apply_far_field<T: Scalar>(
    c: &mut CoeffVector<T>,
    end: EdgeEnd,
    datum: T,
    model: &FluxModel<T>,
    rule: BoundaryRule,
) {
    let value = match rule {
        BoundaryRule::Dirichlet => datum,
        BoundaryRule::Upwind => {
            let trace = endpoint_value(c, end);
            match end {
                EdgeEnd::Left => model.state_right_of(datum, trace),
                EdgeEnd::Right => model.state_left_of(trace, datum),
            }
        }
        BoundaryRule::Characteristic => {
            let trace = endpoint_value(c, end);
            let inward = match end {
                EdgeEnd::Left => model.f_prime(trace),
                EdgeEnd::Right => -model.f_prime(trace),
            };
            if inward > T::zero() {
                datum
            } else {
                trace
            }
        }
    };
    set_endpoint_value(c, end, value);
}

/// Boundary datum at one end of a single edge.
#[derive(Clone)]
pub struct EdgeBoundary<T> {
    pub end: EdgeEnd,
    pub value: Arc<dyn Fn(T) -> T + Send + Sync>,
    pub rule: BoundaryRule,
}

/// Midpoint stepper for one edge without a junction.
#[derive(Clone)]
pub struct SingleEdgeSolver<T: Scalar> {
    op: EdgeOperator<T>,
    dissipation: Dissipation<T>,
    boundaries: Vec<EdgeBoundary<T>>,
    cfl_limit: T,
}

impl<T: Scalar> SingleEdgeSolver<T> {
    /// `speed_bound` replaces the flux Lipschitz constant in the CFL bound
    /// (data outside `[0, u_max]` can exceed it).
    pub fn new(
        n: usize,
        model: FluxModel<T>,
        dissipation: Dissipation<T>,
        boundaries: Vec<EdgeBoundary<T>>,
        speed_bound: T,
    ) -> Result<Self, SolverError> {
        let op = EdgeOperator::new(n, model)?;
        let cfl_limit = op.grid().min_spacing() / (T::two() * speed_bound);
        Ok(Self {
            op,
            dissipation,
            boundaries,
            cfl_limit,
        })
    }

    pub fn grid(&self) -> &CglGrid<T> {
        self.op.grid()
    }

    pub fn cfl_limit(&self) -> T {
        self.cfl_limit
    }

    fn impose(&self, c: &mut CoeffVector<T>, t: T) {
        for b in &self.boundaries {
            apply_far_field(c, b.end, (b.value)(t), self.op.model(), b.rule);
        }
    }

    pub fn step(&self, c: &CoeffVector<T>, t: T, dt: T) -> Result<CoeffVector<T>, SolverError> {
        check_dt(dt, self.cfl_limit)?;
        let k1 = self.op.rhs(c)?;
        let mut half = c.clone();
        for (h, d) in half.iter_mut().zip(k1.iter()) {
            *h += T::half() * dt * *d;
        }
        self.impose(&mut half, t + T::half() * dt);
        let k2 = self.op.rhs(&half)?;
        let mut next = c.clone();
        for (v, d) in next.iter_mut().zip(k2.iter()) {
            *v += dt * *d;
        }
        self.impose(&mut next, t + dt);
        let n = self.grid().degree();
        let next = match &self.dissipation {
            Dissipation::None => next,
            Dissipation::Filter(f) => crate::cheb::apply_filter(&next, f),
            Dissipation::Ssv(s) => ssv_split_step(&next, s, dt, n),
        };
        if next.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite);
        }
        Ok(next)
    }

    /// Integrates from `t0` to `t1` starting from nodal samples of `u0`.
    pub fn run(
        &self,
        u0: &dyn Fn(T) -> T,
        t0: T,
        t1: T,
        dt: T,
    ) -> Result<(CoeffVector<T>, (T, T)), SolverError> {
        let vals: Vec<T> = self.grid().points().iter().map(|&x| u0(x)).collect();
        let mut c = forward_transform(&vals, self.grid())?;
        let mut range = vals
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let mut t = t0;
        let eps = dt * T::lit(1e-9);
        while t1 - t > eps {
            let h = if t1 - t - dt <= eps { t1 - t } else { dt };
            c = self.step(&c, t, h).map_err(|e| SolverError::StepFailed {
                time: t.as_f64(),
                source: Box::new(e),
            })?;
            t += h;
            for v in inverse_transform(&c, self.grid())? {
                range = (range.0.min(v), range.1.max(v));
            }
        }
        Ok((c, range))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cheb::apply_filter;

    fn lwr3() -> [FluxModel<f64>; 3] {
        [FluxModel::lwr(), FluxModel::lwr(), FluxModel::lwr()]
    }

    fn constant_state(n: usize, c: f64) -> NetworkState<f64> {
        let mut v = CoeffVector::zeros(n);
        v[0] = c;
        NetworkState {
            edges: [
                SpectralEdgeState::new(v.clone(), EdgeEnd::Right),
                SpectralEdgeState::new(v.clone(), EdgeEnd::Right),
                SpectralEdgeState::new(v, EdgeEnd::Left),
            ],
            t: 0.0,
            u_b: c,
        }
    }

    #[test]
    fn rhs_of_constant_is_zero() {
        let g = CglGrid::new(12).unwrap();
        let edge = constant_state(12, 0.3).edges[0].clone();
        let r = semi_discrete_rhs(&edge, &FluxModel::lwr(), &g).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn rhs_linear_advection() {
        let g = CglGrid::<f64>::new(8).unwrap();
        let edge = SpectralEdgeState::new(CoeffVector::unit(8, 1), EdgeEnd::Right);
        let r = semi_discrete_rhs(&edge, &FluxModel::linear(1.0, 1.0), &g).unwrap();
        assert!((r[0] + 1.0).abs() < 1e-14);
        assert!(r[1..].iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn cfl_examples() {
        let lwr = FluxModel::<f64>::lwr();
        let g2 = CglGrid::new(2).unwrap();
        assert!((cfl_timestep(&[&g2], &[&lwr]) - 0.5).abs() < 1e-15);
        let g4 = CglGrid::new(4).unwrap();
        let dt = cfl_timestep(&[&g4], &[&lwr]);
        assert!((dt - (1.0 - (std::f64::consts::PI / 4.0).cos()) / 2.0).abs() < 1e-15);
        let fast = FluxModel::new(
            "x2",
            |u| 2.0 * u * (1.0 - u),
            |u| 2.0 - 4.0 * u,
            1.0,
            0.5,
            2.0,
            crate::flux::FluxShape::Bell,
        );
        assert!((cfl_timestep(&[&g4], &[&fast]) - dt / 2.0).abs() < 1e-15);
    }

    #[test]
    fn ssv_examples() {
        let n = 16;
        let spec = SsvSpec::new(0.7, 1).unwrap();
        let c = CoeffVector::from_vec(vec![1.0; n + 1]);
        let out = ssv_split_step(&c, &spec, 0.01, n);
        assert_eq!(out[0], 1.0);
        assert!((out[n] - (-0.7 * 16.0 * 0.01f64).exp()).abs() < 1e-15);
        let filt = apply_filter(&c, &spec.equivalent_filter(0.01, n).unwrap());
        for (a, b) in out.iter().zip(filt.iter()) {
            assert!((a - b).abs() <= 1e-15 * b.abs());
        }
        assert!(SsvSpec::new(0.0, 1).is_err());
        assert!(SsvSpec::new(1.0, 0).is_err());
    }

    #[test]
    fn impose_boundary_identities() {
        let n = 10;
        let g = CglGrid::<f64>::new(n).unwrap();
        let zero = constant_state(n, 0.0);
        assert_eq!(impose_boundary(&zero, 0.0), zero);

        let vals: Vec<f64> = g
            .points()
            .iter()
            .map(|x| 0.5 + 0.3 * (3.0 * x).sin())
            .collect();
        let c = forward_transform(&vals, &g).unwrap();
        let mut state = constant_state(n, 0.0);
        for e in state.edges.iter_mut() {
            e.coeffs = c.clone();
        }
        let out = impose_boundary(&state, 0.42);
        assert!((out.edges[0].coeffs.iter().sum::<f64>() - 0.42).abs() < 1e-12);
        let alt: f64 = out.edges[2]
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| if k % 2 == 0 { *c } else { -c })
            .sum();
        assert!((alt - 0.42).abs() < 1e-12);
        // interior nodes untouched; matches overwrite-and-retransform
        let mut expect = vals.clone();
        expect[0] = 0.42;
        let direct = forward_transform(&expect, &g).unwrap();
        for (a, b) in out.edges[0].coeffs.iter().zip(direct.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
        let nodal = inverse_transform(&out.edges[2].coeffs, &g).unwrap();
        for j in 0..n {
            assert!((nodal[j] - vals[j]).abs() < 1e-13);
        }
    }

    #[test]
    fn empty_and_jammed_states_are_stationary() {
        let n = 16;
        let spec = FilterSpec::machine_precision(10).unwrap();
        for level in [0.0, 1.0] {
            let s0 = constant_state(n, level);
            let mut s = s0.clone();
            for _ in 0..5 {
                s = midpoint_step(&s, 1e-3, &spec, &lwr3()).unwrap();
            }
            for (a, b) in s.edges.iter().zip(&s0.edges) {
                for (x, y) in a.coeffs.iter().zip(b.coeffs.iter()) {
                    assert!((x - y).abs() < 5e-12);
                }
            }
            assert!((s.u_b - level).abs() < 1e-12);
        }
    }

    #[test]
    fn cfl_violation_is_reported() {
        let spec = FilterSpec::machine_precision(10).unwrap();
        let err = midpoint_step(&constant_state(16, 0.3), 1.0, &spec, &lwr3()).unwrap_err();
        assert!(matches!(err, SolverError::CflViolation { .. }));
    }

    #[test]
    fn zero_final_time_returns_initial_state() {
        let zero: Profile<f64> = Arc::new(|_| 0.2);
        let cfg = NetworkConfig {
            n: 8,
            dt: 1e-3,
            t_final: 0.0,
            output_times: vec![],
            dissipation: Dissipation::Filter(FilterSpec::machine_precision(10).unwrap()),
            trace_rule: TraceRule::JunctionNode,
            boundary_mode: BoundaryMode::RiemannStates,
            free_end_rule: Some(BoundaryRule::Characteristic),
            track_energy: false,
            models: lwr3(),
            initial: [zero.clone(), zero.clone(), zero],
        };
        let traj = run_network_simulation(&cfg).unwrap();
        assert_eq!(traj.snapshots.len(), 1);
        assert_eq!(traj.steps, 0);
    }

    #[test]
    fn output_times_are_hit_exactly() {
        let p: Profile<f64> = Arc::new(|x| 0.3 + 0.1 * x);
        let cfg = NetworkConfig {
            n: 12,
            dt: 4e-3,
            t_final: 0.05,
            output_times: vec![0.01, 0.025],
            dissipation: Dissipation::Filter(FilterSpec::machine_precision(10).unwrap()),
            trace_rule: TraceRule::JunctionNode,
            boundary_mode: BoundaryMode::RiemannStates,
            free_end_rule: Some(BoundaryRule::Characteristic),
            track_energy: false,
            models: lwr3(),
            initial: [p.clone(), p.clone(), p],
        };
        let traj = run_network_simulation(&cfg).unwrap();
        let times: Vec<f64> = traj.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(times, vec![0.0, 0.01, 0.025, 0.05]);
    }

    fn constant(n: usize, v: f64) -> CoeffVector<f64> {
        let mut c = CoeffVector::zeros(n);
        c[0] = v;
        c
    }

    #[test]
    fn far_field_rules() {
        let m = FluxModel::lwr();
        // f'(0.3) > 0: the left end is an inflow end, the right end an outflow end
        let ends = |rule: BoundaryRule| {
            let mut c = constant(8, 0.3);
            apply_far_field(&mut c, EdgeEnd::Left, 0.6, &m, rule);
            apply_far_field(&mut c, EdgeEnd::Right, 0.6, &m, rule);
            (c.value_at_left(), c.value_at_right())
        };
        let (l, r) = ends(BoundaryRule::Dirichlet);
        assert!((l - 0.6).abs() < 1e-14 && (r - 0.6).abs() < 1e-14);
        let (l, r) = ends(BoundaryRule::Characteristic);
        assert!((l - 0.6).abs() < 1e-14 && (r - 0.3).abs() < 1e-14);
        // upwind: the datum 0.6 outside the left end sends the sonic state in
        let (l, r) = ends(BoundaryRule::Upwind);
        assert!(
            (l - 0.5).abs() < 1e-12 && (r - 0.3).abs() < 1e-14,
            "{l} {r}"
        );
    }

    #[test]
    fn single_edge_constant_state_is_stationary() {
        let bc = |end| EdgeBoundary {
            end,
            value: Arc::new(|_: f64| 0.3),
            rule: BoundaryRule::Characteristic,
        };
        let s = SingleEdgeSolver::new(
            16,
            FluxModel::lwr(),
            Dissipation::Filter(FilterSpec::machine_precision(10).unwrap()),
            vec![bc(EdgeEnd::Left), bc(EdgeEnd::Right)],
            1.0,
        )
        .unwrap();
        let (c, range) = s.run(&|_| 0.3, -1.0, 0.0, s.cfl_limit()).unwrap();
        assert!((c[0] - 0.3).abs() < 1e-13);
        assert!(c.iter().skip(1).all(|v| v.abs() < 1e-13));
        assert!((range.0 - 0.3).abs() < 1e-13 && (range.1 - 0.3).abs() < 1e-13);
        assert!(matches!(
            s.step(&c, 0.0, 2.0 * s.cfl_limit()),
            Err(SolverError::CflViolation { .. })
        ));
    }

    #[test]
    fn free_end_data_come_from_the_far_ends() {
        let p: Profile<f64> = Arc::new(|x| 0.5 + 0.25 * x);
        let solver = NetworkSolver::new(8, lwr3(), Dissipation::None)
            .unwrap()
            .with_free_end_data(&[p.clone(), p.clone(), p], BoundaryRule::Characteristic);
        // incoming edges are free at x = -1, the outgoing edge at x = +1
        assert_eq!(
            solver.free_end_values(),
            [Some(0.25), Some(0.25), Some(0.75)]
        );
    }

    #[test]
    fn viscosity_step_never_raises_the_chebyshev_norm() {
        let cfg = NetworkConfig {
            n: 24,
            dt: 1e-3,
            t_final: 0.2,
            output_times: vec![],
            dissipation: Dissipation::Ssv(SsvSpec::new(1.0, 1).unwrap()),
            trace_rule: TraceRule::JunctionNode,
            boundary_mode: BoundaryMode::RiemannStates,
            free_end_rule: Some(BoundaryRule::Characteristic),
            track_energy: true,
            models: lwr3(),
            initial: [
                Arc::new(|_| 0.25),
                Arc::new(|_| 2.0 / 3.0),
                Arc::new(|_| 0.8),
            ],
        };
        let traj = run_network_simulation(&cfg).unwrap();
        assert!(traj.max_chebyshev_energy_increase.unwrap() <= 1e-14);
        assert!(traj.max_energy_increase.is_some());
    }
}
