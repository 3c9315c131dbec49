//! Space-time Chebyshev collocation on a single edge.
//!
//! The solution on `[-1, 1] x [-1, 1]` (space, time) is the bivariate
//! expansion `u(x, t) = sum_jk c_jk T_j(x) T_k(t)`, with the initial condition
//! at `t = -1`. All coefficients are found at once from the nonlinear system
//!
//! * `D_t c + P(f'(u), D_x c) = 0` at the collocation nodes,
//! * `u(x_n, -1) = u_0(x_n)` on the initial time line,
//! * `u(x_in, t_m) = g(t_m)` at the inflow end.
//!
//! The unknowns are the nodal values on the tensor CGL grid, which are in
//! one-to-one correspondence with the coefficients.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, Axis as NdAxis};
use thiserror::Error;

use crate::cheb::{
    derivative_coeffs, forward_transform, inverse_transform, CglGrid, ChebError, CoeffVector,
    FilterSpec,
};
use crate::flux::FluxModel;
use crate::netsolver::{BoundaryRule, EdgeEnd, Profile, SsvSpec};
use crate::scalar::Scalar;

/// Convergence threshold on the max-norm of the constraint system.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Finite-difference step of the Newton Jacobian.
pub const JACOBIAN_STEP: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceTimeError {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("transform: {0}")]
    Cheb(#[from] ChebError),
    #[error("no convergence after {iterations} iterations (constraint max-norm {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("singular linear system")]
    Singular,
}

/// Which index of the coefficient matrix a derivative acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Space,
    Time,
}

/// Tensor CGL grid, `(x_n, t_m) = (cos(n pi / N_x), cos(m pi / N_t))`.
#[derive(Clone, Debug)]
pub struct SpaceTimeGrid<T: Scalar> {
    pub x: CglGrid<T>,
    pub t: CglGrid<T>,
}

impl<T: Scalar> SpaceTimeGrid<T> {
    pub fn new(nx: usize, nt: usize) -> Result<Self, SpaceTimeError> {
        Ok(Self {
            x: CglGrid::new(nx)?,
            t: CglGrid::new(nt)?,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.x.len(), self.t.len())
    }

    fn check(&self, shape: &[usize]) -> Result<(), SpaceTimeError> {
        let expected = self.shape();
        if shape != [expected.0, expected.1] {
            return Err(SpaceTimeError::ShapeMismatch {
                expected,
                got: (shape[0], shape.get(1).copied().unwrap_or(0)),
            });
        }
        Ok(())
    }
}

/// Coefficients `c_jk`, rows indexed by the space degree `j`.
#[derive(Clone, Debug)]
pub struct SpaceTimeCoeffs<T: Scalar> {
    pub coeffs: Array2<T>,
    pub grid: SpaceTimeGrid<T>,
}

impl<T: Scalar> SpaceTimeCoeffs<T> {
    pub fn new(coeffs: Array2<T>, grid: SpaceTimeGrid<T>) -> Result<Self, SpaceTimeError> {
        grid.check(coeffs.shape())?;
        Ok(Self { coeffs, grid })
    }

    pub fn zeros(grid: SpaceTimeGrid<T>) -> Self {
        Self {
            coeffs: Array2::zeros(grid.shape()),
            grid,
        }
    }

    /// Value of the expansion at `(x, t)`.
    pub fn evaluate(&self, x: T, t: T) -> T {
        let in_time: Vec<T> = self
            .coeffs
            .rows()
            .into_iter()
            .map(|row| CoeffVector::from_vec(row.to_vec()).evaluate(t))
            .collect();
        CoeffVector::from_vec(in_time).evaluate(x)
    }

    /// Space coefficients of `u(., t)`.
    pub fn slice_at_time(&self, t: T) -> CoeffVector<T> {
        CoeffVector::from_vec(
            self.coeffs
                .rows()
                .into_iter()
                .map(|row| CoeffVector::from_vec(row.to_vec()).evaluate(t))
                .collect(),
        )
    }

    fn same_grid(&self, other: &Self) -> Result<(), SpaceTimeError> {
        self.grid.check(other.coeffs.shape())
    }
}

fn map_lanes<T: Scalar>(
    a: &Array2<T>,
    axis: NdAxis,
    mut f: impl FnMut(Vec<T>) -> Result<Vec<T>, ChebError>,
) -> Result<Array2<T>, ChebError> {
    let mut out = a.clone();
    for mut lane in out.lanes_mut(axis) {
        let v = f(lane.to_vec())?;
        for (o, x) in lane.iter_mut().zip(v) {
            *o = x;
        }
    }
    Ok(out)
}

/// Nodal values on the tensor grid to coefficients, one fast 1D transform per
/// line in each direction.
pub fn cheb2d_transform<T: Scalar>(
    values: &Array2<T>,
    grid: &SpaceTimeGrid<T>,
) -> Result<SpaceTimeCoeffs<T>, SpaceTimeError> {
    grid.check(values.shape())?;
    let a = map_lanes(values, NdAxis(0), |v| {
        forward_transform(&v, &grid.x).map(CoeffVector::into_vec)
    })?;
    let a = map_lanes(&a, NdAxis(1), |v| {
        forward_transform(&v, &grid.t).map(CoeffVector::into_vec)
    })?;
    Ok(SpaceTimeCoeffs {
        coeffs: a,
        grid: grid.clone(),
    })
}

/// The double-sum quadrature `c_jk = sum_nm u_nm T_j(x_n) T_k(t_m) w_n w_m / (gamma_j gamma_k)`.
pub fn cheb2d_transform_direct<T: Scalar>(
    values: &Array2<T>,
    grid: &SpaceTimeGrid<T>,
) -> Result<SpaceTimeCoeffs<T>, SpaceTimeError> {
    grid.check(values.shape())?;
    let (lx, lt) = grid.shape();
    let (nx, nt) = (lx - 1, lt - 1);
    let basis = |n: usize, j: usize, k: usize| -> T {
        (T::PI() * T::of((j * k) % (2 * n)) / T::of(n)).cos()
    };
    let mut c = Array2::zeros((lx, lt));
    for j in 0..lx {
        for k in 0..lt {
            let mut s = T::zero();
            for n in 0..lx {
                let bx = basis(nx, j, n) * grid.x.quad_weights()[n];
                for m in 0..lt {
                    s += values[[n, m]] * bx * basis(nt, k, m) * grid.t.quad_weights()[m];
                }
            }
            c[[j, k]] = s / (grid.x.norm_factors()[j] * grid.t.norm_factors()[k]);
        }
    }
    Ok(SpaceTimeCoeffs {
        coeffs: c,
        grid: grid.clone(),
    })
}

/// Coefficients to nodal values on the tensor grid.
pub fn cheb2d_inverse<T: Scalar>(c: &SpaceTimeCoeffs<T>) -> Result<Array2<T>, SpaceTimeError> {
    let g = &c.grid;
    let a = map_lanes(&c.coeffs, NdAxis(0), |v| {
        inverse_transform(&CoeffVector::from_vec(v), &g.x)
    })?;
    Ok(map_lanes(&a, NdAxis(1), |v| {
        inverse_transform(&CoeffVector::from_vec(v), &g.t)
    })?)
}

/// Derivative along one axis.
pub fn cheb2d_partial<T: Scalar>(c: &SpaceTimeCoeffs<T>, axis: Axis) -> SpaceTimeCoeffs<T> {
    let ax = match axis {
        Axis::Space => NdAxis(0),
        Axis::Time => NdAxis(1),
    };
    let coeffs = map_lanes(&c.coeffs, ax, |v| {
        Ok(derivative_coeffs(&CoeffVector::from_vec(v)).into_vec())
    })
    .expect("derivative never fails");
    SpaceTimeCoeffs {
        coeffs,
        grid: c.grid.clone(),
    }
}

/// Truncated bivariate product, `T_a T_c = (T_{a+c} + T_{|a-c|}) / 2` in each
/// variable, O(N_x^2 N_t^2).
pub fn cheb2d_product_direct<T: Scalar>(
    f: &SpaceTimeCoeffs<T>,
    g: &SpaceTimeCoeffs<T>,
) -> Result<SpaceTimeCoeffs<T>, SpaceTimeError> {
    f.same_grid(g)?;
    let (lx, lt) = f.grid.shape();
    let quarter = T::lit(0.25);
    let mut out = Array2::zeros((lx, lt));
    for ((a, b), &fab) in f.coeffs.indexed_iter() {
        if fab == T::zero() {
            continue;
        }
        for ((c, d), &gcd) in g.coeffs.indexed_iter() {
            let v = quarter * fab * gcd;
            for i in [a + c, a.abs_diff(c)] {
                if i >= lx {
                    continue;
                }
                for j in [b + d, b.abs_diff(d)] {
                    if j < lt {
                        out[[i, j]] += v;
                    }
                }
            }
        }
    }
    Ok(SpaceTimeCoeffs {
        coeffs: out,
        grid: f.grid.clone(),
    })
}

/// Fast truncated product: both factors are evaluated on the tensor grid of
/// degree `(2 N_x, 2 N_t)`, multiplied and transformed back.
#[derive(Clone, Debug)]
pub struct PaddedProduct2d<T: Scalar> {
    grid: SpaceTimeGrid<T>,
    padded: SpaceTimeGrid<T>,
}

impl<T: Scalar> PaddedProduct2d<T> {
    pub fn new(grid: &SpaceTimeGrid<T>) -> Result<Self, SpaceTimeError> {
        let (lx, lt) = grid.shape();
        Ok(Self {
            grid: grid.clone(),
            padded: SpaceTimeGrid::new(2 * (lx - 1).max(1), 2 * (lt - 1).max(1))?,
        })
    }

    fn pad(&self, c: &Array2<T>) -> SpaceTimeCoeffs<T> {
        let mut p = Array2::zeros(self.padded.shape());
        p.slice_mut(ndarray::s![..c.nrows(), ..c.ncols()]).assign(c);
        SpaceTimeCoeffs {
            coeffs: p,
            grid: self.padded.clone(),
        }
    }

    pub fn product(
        &self,
        f: &SpaceTimeCoeffs<T>,
        g: &SpaceTimeCoeffs<T>,
    ) -> Result<SpaceTimeCoeffs<T>, SpaceTimeError> {
        self.grid.check(f.coeffs.shape())?;
        self.grid.check(g.coeffs.shape())?;
        let fv = cheb2d_inverse(&self.pad(&f.coeffs))?;
        let gv = cheb2d_inverse(&self.pad(&g.coeffs))?;
        let full = cheb2d_transform(&(fv * gv), &self.padded)?;
        let (lx, lt) = self.grid.shape();
        Ok(SpaceTimeCoeffs {
            coeffs: full.coeffs.slice(ndarray::s![..lx, ..lt]).to_owned(),
            grid: self.grid.clone(),
        })
    }
}

/// Bivariate truncated product through [`PaddedProduct2d`].
pub fn cheb2d_product<T: Scalar>(
    f: &SpaceTimeCoeffs<T>,
    g: &SpaceTimeCoeffs<T>,
) -> Result<SpaceTimeCoeffs<T>, SpaceTimeError> {
    f.same_grid(g)?;
    PaddedProduct2d::new(&f.grid)?.product(f, g)
}

/// Space filter `sigma(j / N_x)` applied to every time mode.
pub fn filter_space<T: Scalar>(c: &SpaceTimeCoeffs<T>, spec: &FilterSpec<T>) -> SpaceTimeCoeffs<T> {
    let factors = spec.factors(c.grid.x.degree());
    let mut out = c.clone();
    for (mut row, &s) in out.coeffs.rows_mut().into_iter().zip(&factors) {
        row.mapv_inplace(|v| v * s);
    }
    out
}

/// Residual coefficients `R = D_t c + P(f'(u), D_x c)`.
pub fn residual<T: Scalar>(
    c: &SpaceTimeCoeffs<T>,
    model: &FluxModel<T>,
) -> Result<Array2<T>, SpaceTimeError> {
    let product = PaddedProduct2d::new(&c.grid)?;
    let nodal = cheb2d_inverse(c)?;
    let speed = cheb2d_transform(&nodal.mapv(|u| model.f_prime(u)), &c.grid)?;
    linearised_residual(c, &speed, &product, None)
}

/// `D_t c + P(speed, D_x c)`, plus the viscosity term `eps N (j / N)^{2s} c_jk`
/// when `viscosity` is set.
fn linearised_residual<T: Scalar>(
    c: &SpaceTimeCoeffs<T>,
    speed: &SpaceTimeCoeffs<T>,
    product: &PaddedProduct2d<T>,
    viscosity: Option<&SsvSpec<T>>,
) -> Result<Array2<T>, SpaceTimeError> {
    let a = product.product(speed, &cheb2d_partial(c, Axis::Space))?;
    let mut r = cheb2d_partial(c, Axis::Time).coeffs + a.coeffs;
    if let Some(v) = viscosity {
        let n = c.grid.x.degree();
        let nt = T::of(n.max(1));
        let p = 2 * v.s as i32;
        for (j, mut row) in r.rows_mut().into_iter().enumerate() {
            let rate = v.epsilon * nt * (T::of(j) / nt).powi(p);
            for (rv, &cv) in row.iter_mut().zip(c.coeffs.row(j)) {
                *rv += rate * cv;
            }
        }
    }
    Ok(r)
}

/// Dirichlet datum at one end of the edge.
#[derive(Clone)]
pub struct SpaceTimeBoundary<T> {
    pub end: EdgeEnd,
    pub value: Arc<dyn Fn(T) -> T + Send + Sync>,
    /// [`BoundaryRule::Dirichlet`] imposes the datum at every time node;
    /// [`BoundaryRule::Characteristic`] only where `f'(u)` at the adjacent
    /// node points inward for the current iterate. Other rules are treated as
    /// `Characteristic`.
    pub rule: BoundaryRule,
}

/// Nonlinear iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NonlinearMethod {
    /// Damped Newton, with Picard iteration as fallback when it stalls.
    #[default]
    Newton,
    /// Picard iteration only: `f'` frozen at the previous iterate.
    Picard,
}

#[derive(Clone)]
pub struct SpaceTimeProblem<T: Scalar> {
    pub nx: usize,
    pub nt: usize,
    pub model: FluxModel<T>,
    pub initial: Profile<T>,
    pub boundaries: Vec<SpaceTimeBoundary<T>>,
    /// Space filter applied after every nonlinear iteration.
    pub filter: Option<FilterSpec<T>>,
    /// Spectral viscosity in space added to the residual.
    pub viscosity: Option<SsvSpec<T>>,
    pub method: NonlinearMethod,
    /// Number of sweeps with a frozen set of active boundary rows; 1 keeps
    /// the set taken from the initial guess.
    pub active_set_sweeps: usize,
    pub tol: T,
    pub max_iterations: usize,
}

impl<T: Scalar> SpaceTimeProblem<T> {
    pub fn new(nx: usize, nt: usize, model: FluxModel<T>, initial: Profile<T>) -> Self {
        Self {
            nx,
            nt,
            model,
            initial,
            boundaries: Vec::new(),
            filter: None,
            viscosity: None,
            method: NonlinearMethod::default(),
            active_set_sweeps: 8,
            tol: T::lit(DEFAULT_TOL),
            max_iterations: 50,
        }
    }
}

/// Outcome of [`SpaceTimeSolver::solve`], converged or not.
#[derive(Clone, Debug)]
pub struct SpaceTimeSolution<T: Scalar> {
    pub coeffs: SpaceTimeCoeffs<T>,
    /// Max-norm of the constraint system at the returned iterate.
    pub constraint_norm: T,
    pub iterations: usize,
    pub converged: bool,
    /// Whether the Picard fallback took over from Newton.
    pub used_fallback: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Row {
    Residual,
    Initial,
    Boundary(usize),
}

pub struct SpaceTimeSolver<T: Scalar> {
    problem: SpaceTimeProblem<T>,
    grid: SpaceTimeGrid<T>,
    product: PaddedProduct2d<T>,
    initial_values: Vec<T>,
}

impl<T: Scalar> SpaceTimeSolver<T> {
    pub fn new(problem: SpaceTimeProblem<T>) -> Result<Self, SpaceTimeError> {
        let grid = SpaceTimeGrid::new(problem.nx, problem.nt)?;
        let product = PaddedProduct2d::new(&grid)?;
        let initial_values = grid
            .x
            .points()
            .iter()
            .map(|&x| (problem.initial)(x))
            .collect();
        Ok(Self {
            problem,
            grid,
            product,
            initial_values,
        })
    }

    pub fn grid(&self) -> &SpaceTimeGrid<T> {
        &self.grid
    }

    fn boundary_node(&self, b: &SpaceTimeBoundary<T>) -> usize {
        b.end.node(self.problem.nx)
    }

    /// Row type of every node for the iterate `u`.
    fn rows(&self, u: &Array2<T>) -> Array2<Row> {
        let (lx, lt) = self.grid.shape();
        let mut rows = Array2::from_elem((lx, lt), Row::Residual);
        for (bi, b) in self.problem.boundaries.iter().enumerate() {
            let n = self.boundary_node(b);
            for m in 0..lt {
                let active = match b.rule {
                    BoundaryRule::Dirichlet => true,
                    _ => {
                        // the boundary node itself holds the datum while active
                        let inner = if n == 0 { 1 } else { n - 1 };
                        let s = self.problem.model.f_prime(u[[inner, m]]);
                        match b.end {
                            EdgeEnd::Left => s > T::zero(),
                            EdgeEnd::Right => s < T::zero(),
                        }
                    }
                };
                if active {
                    rows[[n, m]] = Row::Boundary(bi);
                }
            }
        }
        for n in 0..lx {
            rows[[n, lt - 1]] = Row::Initial;
        }
        rows
    }

    fn constraints_with(
        &self,
        u: &Array2<T>,
        rows: &Array2<Row>,
        frozen: Option<&SpaceTimeCoeffs<T>>,
    ) -> Result<Array2<T>, SpaceTimeError> {
        let c = cheb2d_transform(u, &self.grid)?;
        let res = match frozen {
            None => {
                let speed = self.speed(u)?;
                linearised_residual(&c, &speed, &self.product, self.problem.viscosity.as_ref())?
            }
            Some(speed) => {
                linearised_residual(&c, speed, &self.product, self.problem.viscosity.as_ref())?
            }
        };
        let mut g = cheb2d_inverse(&SpaceTimeCoeffs {
            coeffs: res,
            grid: self.grid.clone(),
        })?;
        for ((n, m), row) in rows.indexed_iter() {
            match *row {
                Row::Residual => {}
                Row::Initial => g[[n, m]] = u[[n, m]] - self.initial_values[n],
                Row::Boundary(bi) => {
                    let t = self.grid.t.points()[m];
                    g[[n, m]] = u[[n, m]] - (self.problem.boundaries[bi].value)(t);
                }
            }
        }
        Ok(g)
    }

    fn speed(&self, u: &Array2<T>) -> Result<SpaceTimeCoeffs<T>, SpaceTimeError> {
        cheb2d_transform(&u.mapv(|v| self.problem.model.f_prime(v)), &self.grid)
    }

    /// Constraint values at every node for the iterate `u`.
    pub fn constraints(&self, u: &Array2<T>) -> Result<Array2<T>, SpaceTimeError> {
        self.constraints_with(u, &self.rows(u), None)
    }

    fn sq_norm(g: &Array2<T>) -> T {
        g.iter().map(|&v| v * v).sum()
    }

    fn norm(g: &Array2<T>) -> T {
        g.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    /// The initial data extended constantly in time.
    pub fn initial_guess(&self) -> Array2<T> {
        let (lx, lt) = self.grid.shape();
        Array2::from_shape_fn((lx, lt), |(n, _)| self.initial_values[n])
    }

    fn jacobian(
        &self,
        u: &Array2<T>,
        rows: &Array2<Row>,
        g0: &Array2<T>,
        frozen: Option<&SpaceTimeCoeffs<T>>,
    ) -> Result<DMatrix<f64>, SpaceTimeError> {
        let size = u.len();
        let h = T::lit(JACOBIAN_STEP);
        let mut jac = DMatrix::<f64>::zeros(size, size);
        let mut probe = u.clone();
        for (q, idx) in (0..u.nrows())
            .flat_map(|n| (0..u.ncols()).map(move |m| (n, m)))
            .enumerate()
        {
            let old = probe[idx];
            probe[idx] = old + h;
            let g = self.constraints_with(&probe, rows, frozen)?;
            probe[idx] = old;
            for (r, (&a, &b)) in g.iter().zip(g0.iter()).enumerate() {
                let d = ((a - b) / h).as_f64();
                if d != 0.0 {
                    jac[(r, q)] = d;
                }
            }
        }
        Ok(jac)
    }

    fn linear_solve(jac: DMatrix<f64>, g: &Array2<T>) -> Result<Array2<T>, SpaceTimeError> {
        let shape = g.dim();
        let rhs = DVector::from_iterator(g.len(), g.iter().map(|v| -v.as_f64()));
        let step = jac.lu().solve(&rhs).ok_or(SpaceTimeError::Singular)?;
        if step.iter().any(|v| !v.is_finite()) {
            return Err(SpaceTimeError::Singular);
        }
        Ok(
            Array2::from_shape_vec(shape, step.iter().map(|&v| T::lit(v)).collect())
                .expect("shape preserved"),
        )
    }

    fn filtered(&self, u: Array2<T>) -> Result<Array2<T>, SpaceTimeError> {
        match &self.problem.filter {
            None => Ok(u),
            Some(f) => cheb2d_inverse(&filter_space(&cheb2d_transform(&u, &self.grid)?, f)),
        }
    }

    /// One damped Newton step; `None` when the line search fails.
    fn newton_step(
        &self,
        u: &Array2<T>,
        rows: &Array2<Row>,
    ) -> Result<Option<Array2<T>>, SpaceTimeError> {
        let g = self.constraints_with(u, rows, None)?;
        let g_norm = Self::sq_norm(&g);
        let delta = Self::linear_solve(self.jacobian(u, rows, &g, None)?, &g)?;
        let mut lambda = T::one();
        for _ in 0..20 {
            let trial = u + &delta.mapv(|d| d * lambda);
            if trial.iter().all(|v| v.is_finite()) {
                let trial_norm = Self::sq_norm(&self.constraints_with(&trial, rows, None)?);
                // Armijo test on the squared 2-norm
                if trial_norm <= (T::one() - T::lit(1e-4) * lambda) * g_norm {
                    return Ok(Some(trial));
                }
            }
            lambda *= T::half();
        }
        Ok(None)
    }

    /// One Picard step: the linear problem with `f'` frozen at `u`.
    fn picard_step(&self, u: &Array2<T>, rows: &Array2<Row>) -> Result<Array2<T>, SpaceTimeError> {
        let speed = self.speed(u)?;
        let g = self.constraints_with(u, rows, Some(&speed))?;
        let delta = Self::linear_solve(self.jacobian(u, rows, &g, Some(&speed))?, &g)?;
        Ok(u + &delta)
    }

    /// Iterates from `u0` until the constraint max-norm drops below the
    /// tolerance or the iteration budget runs out.
    ///
    /// The set of active boundary rows is frozen during each sweep of
    /// nonlinear iterations and recomputed from the result; sweeps repeat
    /// until the set no longer changes.
    pub fn solve_from(&self, u0: Array2<T>) -> Result<SpaceTimeSolution<T>, SpaceTimeError> {
        self.grid.check(u0.shape())?;
        let mut u = u0;
        let mut used_fallback = self.problem.method == NonlinearMethod::Picard;
        let mut rows = self.rows(&u);
        let mut iterations = 0;
        let mut best = (T::infinity(), u.clone());
        for _ in 0..self.problem.active_set_sweeps.max(1) {
            let mut picard = self.problem.method == NonlinearMethod::Picard;
            let mut norm = Self::norm(&self.constraints_with(&u, &rows, None)?);
            while iterations < self.problem.max_iterations && !(norm <= self.problem.tol) {
                iterations += 1;
                let next = if picard {
                    self.picard_step(&u, &rows)?
                } else {
                    match self.newton_step(&u, &rows)? {
                        Some(next) => next,
                        None => {
                            picard = true;
                            used_fallback = true;
                            self.picard_step(&u, &rows)?
                        }
                    }
                };
                u = self.filtered(next)?;
                norm = Self::norm(&self.constraints_with(&u, &rows, None)?);
                if !norm.is_finite() {
                    break;
                }
            }
            let consistent = self.rows(&u);
            let full = Self::norm(&self.constraints_with(&u, &consistent, None)?);
            if full < best.0 {
                best = (full, u.clone());
            }
            if consistent == rows || iterations >= self.problem.max_iterations || !full.is_finite()
            {
                break;
            }
            rows = consistent;
        }
        let (norm, u) = best;
        Ok(SpaceTimeSolution {
            coeffs: cheb2d_transform(&u, &self.grid)?,
            constraint_norm: norm,
            iterations,
            converged: norm <= self.problem.tol,
            used_fallback,
        })
    }

    pub fn solve(&self) -> Result<SpaceTimeSolution<T>, SpaceTimeError> {
        self.solve_from(self.initial_guess())
    }
}

/// Solves `problem`, failing with [`SpaceTimeError::NonConvergence`] when the
/// constraint system is not met to the tolerance.
pub fn solve_spacetime<T: Scalar>(
    problem: SpaceTimeProblem<T>,
) -> Result<SpaceTimeCoeffs<T>, SpaceTimeError> {
    let sol = SpaceTimeSolver::new(problem)?.solve()?;
    if !sol.converged {
        return Err(SpaceTimeError::NonConvergence {
            iterations: sol.iterations,
            residual: sol.constraint_norm.as_f64(),
        });
    }
    Ok(sol.coeffs)
}
