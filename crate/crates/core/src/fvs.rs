//! First-order Godunov finite volumes on the three-edge network.
//!
//! Each edge carries `M` uniform cells on `[-1, 1]` with centres at
//! `-1 + (j + 1/2) dx`. The junction face uses the same conservation
//! criterion as the spectral solver, fed with the boundary-cell averages.
//! Free ends are transmissive.

use crate::flux::FluxModel;
use crate::junction::{junction_residual, solve_boundary_value, JunctionTraces, DEFAULT_TOL};
use crate::netsolver::{EdgeEnd, Profile, SolverError, JUNCTION_ENDS};
use crate::scalar::Scalar;

/// Sub-samples per cell when averaging initial data.
const AVERAGE_SAMPLES: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct FvGrid<T> {
    pub cells: Vec<T>,
    pub dx: T,
    pub junction_end: EdgeEnd,
}

impl<T: Scalar> FvGrid<T> {
    pub fn new(cells: Vec<T>, junction_end: EdgeEnd) -> Self {
        let dx = T::two() / T::of(cells.len());
        Self {
            cells,
            dx,
            junction_end,
        }
    }

    /// Cell averages of `profile`, approximated by a composite midpoint rule.
    pub fn from_profile(m: usize, profile: &dyn Fn(T) -> T, junction_end: EdgeEnd) -> Self {
        let dx = T::two() / T::of(m);
        let sub = dx / T::of(AVERAGE_SAMPLES);
        let cells = (0..m)
            .map(|j| {
                let left = -T::one() + T::of(j) * dx;
                (0..AVERAGE_SAMPLES)
                    .map(|q| profile(left + (T::of(q) + T::half()) * sub))
                    .sum::<T>()
                    / T::of(AVERAGE_SAMPLES)
            })
            .collect();
        Self {
            cells,
            dx,
            junction_end,
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn center(&self, j: usize) -> T {
        -T::one() + (T::of(j) + T::half()) * self.dx
    }

    pub fn centers(&self) -> Vec<T> {
        (0..self.len()).map(|j| self.center(j)).collect()
    }

    pub fn junction_trace(&self) -> T {
        match self.junction_end {
            EdgeEnd::Right => self.cells[self.len() - 1],
            EdgeEnd::Left => self.cells[0],
        }
    }

    pub fn mass(&self) -> T {
        self.cells.iter().copied().sum::<T>() * self.dx
    }

    /// Piecewise-linear interpolation between cell centres, constant beyond
    /// the outermost centres.
    pub fn sample(&self, x: T) -> T {
        let m = self.len();
        let s = (x + T::one()) / self.dx - T::half();
        if s <= T::zero() {
            return self.cells[0];
        }
        let j = s.floor().to_usize().unwrap_or(m);
        if j + 1 >= m {
            return self.cells[m - 1];
        }
        let theta = s - T::of(j);
        self.cells[j] * (T::one() - theta) + self.cells[j + 1] * theta
    }
}

/// Result of one finite-volume step.
#[derive(Clone, Debug)]
pub struct FvStep<T> {
    pub grids: [FvGrid<T>; 3],
    pub u_b: T,
    pub junction_residual: T,
    /// Fluxes through the junction faces of the three edges.
    pub junction_fluxes: [T; 3],
}

pub fn fvs_cfl_limit<T: Scalar>(grids: &[FvGrid<T>; 3], models: &[FluxModel<T>; 3]) -> T {
    grids
        .iter()
        .zip(models)
        .map(|(g, m)| g.dx / (T::two() * m.lipschitz()))
        .fold(T::infinity(), T::min)
}

/// One forward-Euler Godunov step with the junction face flux from the
/// conservation criterion.
pub fn fvs_step<T: Scalar>(
    grids: &[FvGrid<T>; 3],
    models: &[FluxModel<T>; 3],
    dt: T,
) -> Result<FvStep<T>, SolverError> {
    let limit = fvs_cfl_limit(grids, models);
    if !(dt > T::zero()) || dt > limit * (T::one() + T::lit(1e-12)) {
        return Err(SolverError::CflViolation {
            dt: dt.as_f64(),
            limit: limit.as_f64(),
        });
    }
    let traces = JunctionTraces::new(
        grids[0].junction_trace(),
        grids[1].junction_trace(),
        grids[2].junction_trace(),
    );
    let u_b = solve_boundary_value(&traces, models, T::lit(DEFAULT_TOL))?;
    let residual = junction_residual(u_b, &traces, models)?.abs();

    let mut out = grids.clone();
    let mut jf = [T::zero(); 3];
    for (h, (g, m)) in grids.iter().zip(models).enumerate() {
        let u = &g.cells;
        let len = u.len();
        // faces[i] is the flux through the left face of cell i; faces[len] the right end
        let mut faces = Vec::with_capacity(len + 1);
        faces.push(match g.junction_end {
            EdgeEnd::Right => m.f(m.clamp(u[0])),
            EdgeEnd::Left => m.godunov_unchecked(u_b, m.clamp(u[0])),
        });
        for i in 1..len {
            faces.push(m.godunov_unchecked(m.clamp(u[i - 1]), m.clamp(u[i])));
        }
        faces.push(match g.junction_end {
            EdgeEnd::Right => m.godunov_unchecked(m.clamp(u[len - 1]), u_b),
            EdgeEnd::Left => m.f(m.clamp(u[len - 1])),
        });
        jf[h] = match g.junction_end {
            EdgeEnd::Right => faces[len],
            EdgeEnd::Left => faces[0],
        };
        let r = dt / g.dx;
        for (i, c) in out[h].cells.iter_mut().enumerate() {
            *c -= r * (faces[i + 1] - faces[i]);
        }
    }
    Ok(FvStep {
        grids: out,
        u_b,
        junction_residual: residual,
        junction_fluxes: jf,
    })
}

/// Finite-volume run summary.
#[derive(Clone, Debug)]
pub struct FvRun<T> {
    pub grids: [FvGrid<T>; 3],
    pub max_junction_residual: T,
    /// Smallest and largest cell average over every time level.
    pub range: (T, T),
    pub steps: usize,
    /// `(t, grids)` at every requested output time, the final time included.
    pub snapshots: Vec<(T, [FvGrid<T>; 3])>,
}

/// Marches `[0, t_final]` with steps of at most `dt`; the last step lands on
/// `t_final`.
pub fn run_fvs<T: Scalar>(
    m: usize,
    initial: &[Profile<T>; 3],
    models: &[FluxModel<T>; 3],
    dt: T,
    t_final: T,
) -> Result<FvRun<T>, SolverError> {
    run_fvs_with_output(m, initial, models, dt, t_final, &[])
}

/// [`run_fvs`] that also lands on and records every time in `output_times`
/// inside `(0, t_final)`.
pub fn run_fvs_with_output<T: Scalar>(
    m: usize,
    initial: &[Profile<T>; 3],
    models: &[FluxModel<T>; 3],
    dt: T,
    t_final: T,
    output_times: &[T],
) -> Result<FvRun<T>, SolverError> {
    if m < 2 {
        return Err(SolverError::Config(format!(
            "need at least 2 cells, got {m}"
        )));
    }
    let mut grids: [FvGrid<T>; 3] =
        std::array::from_fn(|h| FvGrid::from_profile(m, initial[h].as_ref(), JUNCTION_ENDS[h]));
    let mut range = (T::infinity(), T::neg_infinity());
    let track = |gs: &[FvGrid<T>; 3], range: &mut (T, T)| {
        for g in gs {
            for &c in &g.cells {
                *range = (range.0.min(c), range.1.max(c));
            }
        }
    };
    track(&grids, &mut range);
    let mut targets: Vec<T> = output_times
        .iter()
        .copied()
        .filter(|&t| t > T::zero() && t < t_final)
        .collect();
    targets.push(t_final);
    targets.sort_by(|a, b| a.partial_cmp(b).expect("finite output times"));
    targets.dedup();
    let mut t = T::zero();
    let mut steps = 0;
    let mut max_res = T::zero();
    let mut snapshots = Vec::with_capacity(targets.len());
    let eps = dt * T::lit(1e-9);
    for &target in &targets {
        while target - t > eps {
            let h = if target - t - dt <= eps {
                target - t
            } else {
                dt
            };
            let step = fvs_step(&grids, models, h).map_err(|e| SolverError::StepFailed {
                time: t.as_f64(),
                source: Box::new(e),
            })?;
            max_res = max_res.max(step.junction_residual);
            grids = step.grids;
            track(&grids, &mut range);
            t += h;
            steps += 1;
        }
        t = target;
        snapshots.push((t, grids.clone()));
    }
    Ok(FvRun {
        grids,
        max_junction_residual: max_res,
        range,
        steps,
        snapshots,
    })
}

/// Fine-grid solution used as the reference for error measurements.
#[derive(Clone, Debug)]
pub struct FvReference<T> {
    pub run: FvRun<T>,
    pub t: T,
}

impl<T: Scalar> FvReference<T> {
    pub fn sample(&self, edge: usize, x: T) -> T {
        self.run.grids[edge].sample(x)
    }

    pub fn cells(&self) -> usize {
        self.run.grids[0].len()
    }
}

/// Smallest number of cells accepted for a reference run.
pub const MIN_REFERENCE_CELLS: usize = 6000;

/// Runs the finite-volume scheme on `m >= 6000` cells at a step of 0.9 times
/// the CFL bound.
pub fn fvs_reference_solution<T: Scalar>(
    initial: &[Profile<T>; 3],
    models: &[FluxModel<T>; 3],
    t_final: T,
    m: usize,
) -> Result<FvReference<T>, SolverError> {
    if m < MIN_REFERENCE_CELLS {
        return Err(SolverError::Config(format!(
            "reference needs at least {MIN_REFERENCE_CELLS} cells, got {m}"
        )));
    }
    let dx = T::two() / T::of(m);
    let l = models.iter().map(|m| m.lipschitz()).fold(T::zero(), T::max);
    let dt = T::lit(0.9) * dx / (T::two() * l);
    Ok(FvReference {
        run: run_fvs(m, initial, models, dt, t_final)?,
        t: t_final,
    })
}
