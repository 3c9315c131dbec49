//! Boundary value at the junction from conservation of the Godunov fluxes.
//!
//! For traces `a_1, a_2` of the incoming edges and `b` of the outgoing edge,
//! the boundary value `u_b` is a zero of
//!
//! `phi(c) = G_1(a_1, c) + G_2(a_2, c) - G_3(c, b)`,
//!
//! which is continuous and non-increasing on `[0, u_max]` with
//! `phi(0) >= 0 >= phi(u_max)` for bell-shaped fluxes.

use thiserror::Error;

use crate::flux::{FluxError, FluxModel};
use crate::scalar::Scalar;

/// Iteration budget of [`solve_boundary_value`].
pub const MAX_ITERATIONS: usize = 200;

/// Default tolerance on `|phi(u_b)|`.
pub const DEFAULT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JunctionError {
    #[error("no sign change on [0, u_max]: phi(0) = {lo}, phi(u_max) = {hi}")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("junction solve did not reach |phi| <= {tol} (last |phi| = {residual})")]
    MaxIterations { tol: f64, residual: f64 },
    #[error(transparent)]
    Flux(#[from] FluxError),
}

/// Traces of the three edges at the junction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JunctionTraces<T> {
    pub in1: T,
    pub in2: T,
    pub out3: T,
}

impl<T: Scalar> JunctionTraces<T> {
    pub fn new(in1: T, in2: T, out3: T) -> Self {
        Self { in1, in2, out3 }
    }

    /// Projects every trace onto `[0, u_max]` of its edge.
    pub fn clamped(self, models: &[FluxModel<T>; 3]) -> Self {
        Self {
            in1: models[0].clamp(self.in1),
            in2: models[1].clamp(self.in2),
            out3: models[2].clamp(self.out3),
        }
    }
}

fn phi<T: Scalar>(c: T, tr: &JunctionTraces<T>, m: &[FluxModel<T>; 3]) -> T {
    m[0].godunov_unchecked(tr.in1, c) + m[1].godunov_unchecked(tr.in2, c)
        - m[2].godunov_unchecked(c, tr.out3)
}

/// `phi(c)`, with range checks on `c` and the traces.
pub fn junction_residual<T: Scalar>(
    c: T,
    tr: &JunctionTraces<T>,
    models: &[FluxModel<T>; 3],
) -> Result<T, JunctionError> {
    Ok(
        models[0].godunov(tr.in1, c)? + models[1].godunov(tr.in2, c)?
            - models[2].godunov(c, tr.out3)?,
    )
}

/// Finds the smallest `c` in `[0, u_max]` with `phi(c) <= 0`.
///
/// Illinois-modified regula falsi on the bracket `[0, u_max]`. A bisection step
/// replaces the secant step whenever the retained endpoint already sits on an
/// exact zero, which keeps the iteration moving across flat root intervals
/// and makes the result the leftmost root.
pub fn solve_boundary_value<T: Scalar>(
    tr: &JunctionTraces<T>,
    models: &[FluxModel<T>; 3],
    tol: T,
) -> Result<T, JunctionError> {
    let u_max = models[0]
        .u_max()
        .min(models[1].u_max())
        .min(models[2].u_max());
    for t in [tr.in1, tr.in2, tr.out3] {
        if t < -T::lit(crate::flux::RANGE_SLACK) || t > u_max + T::lit(crate::flux::RANGE_SLACK) {
            return Err(FluxError::OutOfRange {
                value: t.as_f64(),
                u_max: u_max.as_f64(),
            }
            .into());
        }
    }
    let tr = tr.clamped(models);
    let f = |c: T| phi(c, &tr, models);

    let (mut lo, mut hi) = (T::zero(), u_max);
    let (mut f_lo, mut f_hi) = (f(lo), f(hi));
    if f_lo <= T::zero() {
        return Ok(lo);
    }
    if f_hi > T::zero() {
        return Err(JunctionError::NoSignChange {
            lo: f_lo.as_f64(),
            hi: f_hi.as_f64(),
        });
    }
    // invariant: f(lo) > 0 >= f(hi)
    let width_tol = T::lit(4.0) * T::epsilon() * u_max;
    let mut side = 0i8;
    let mut it = 0;
    while hi - lo > width_tol && it < MAX_ITERATIONS {
        it += 1;
        let mut c = if f_hi == T::zero() {
            T::half() * (lo + hi)
        } else {
            (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
        };
        if !(c > lo && c < hi) {
            c = T::half() * (lo + hi);
        }
        let fc = f(c);
        if fc > T::zero() {
            lo = c;
            f_lo = fc;
            if side == 1 {
                f_hi *= T::half();
            }
            side = 1;
        } else {
            hi = c;
            f_hi = fc;
            if side == -1 {
                f_lo *= T::half();
            }
            side = -1;
        }
    }
    let residual = f(hi);
    if residual.abs() > tol {
        return Err(JunctionError::MaxIterations {
            tol: tol.as_f64(),
            residual: residual.abs().as_f64(),
        });
    }
    Ok(hi)
}

/// States taken by the three edges at the junction once `u_b` is known.
///
/// For an incoming edge this is the state just left of the junction in the
/// Riemann problem `(a, u_b)`; for the outgoing edge the state just right of
/// it in `(u_b, b)`. An edge whose waves all leave through the junction keeps
/// its own trace.
pub fn boundary_states<T: Scalar>(
    tr: &JunctionTraces<T>,
    u_b: T,
    models: &[FluxModel<T>; 3],
) -> [T; 3] {
    [
        models[0].state_left_of(tr.in1, u_b),
        models[1].state_left_of(tr.in2, u_b),
        models[2].state_right_of(u_b, tr.out3),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lwr3() -> [FluxModel<f64>; 3] {
        [FluxModel::lwr(), FluxModel::lwr(), FluxModel::lwr()]
    }

    #[test]
    fn residual_examples() {
        let m = lwr3();
        let zero = JunctionTraces::new(0.0, 0.0, 0.0);
        assert_eq!(junction_residual(0.0, &zero, &m).unwrap(), 0.0);
        assert_eq!(junction_residual(1.0, &zero, &m).unwrap(), -0.25);
        assert!(junction_residual(1.5, &zero, &m).is_err());
    }

    #[test]
    fn all_zero_traces_give_zero() {
        let u = solve_boundary_value(&JunctionTraces::new(0.0, 0.0, 0.0), &lwr3(), 1e-12).unwrap();
        assert_eq!(u, 0.0);
    }

    #[test]
    fn flat_residual_picks_lower_root() {
        let m = lwr3();
        let tr = JunctionTraces::new(0.0, 0.0, 1.0);
        assert_eq!(junction_residual(0.0, &tr, &m).unwrap(), 0.0);
        assert_eq!(junction_residual(1.0, &tr, &m).unwrap(), 0.0);
        assert_eq!(solve_boundary_value(&tr, &m, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn riemann_traces_closed_form() {
        // phi(c) = 2 f(c) - f(0.8) for c past the critical point
        let u = solve_boundary_value(&JunctionTraces::new(0.25, 2.0 / 3.0, 0.8), &lwr3(), 1e-12)
            .unwrap();
        let expect = 0.5 * (1.0 + (1.0f64 - 0.32).sqrt());
        assert!((u - expect).abs() < 1e-12, "{u} vs {expect}");
    }

    #[test]
    fn boundary_states_of_riemann_data() {
        let m = lwr3();
        let tr = JunctionTraces::new(0.25, 2.0 / 3.0, 0.8);
        let u_b = solve_boundary_value(&tr, &m, 1e-12).unwrap();
        let s = boundary_states(&tr, u_b, &m);
        assert!((s[0] - u_b).abs() < 1e-12);
        assert!((s[1] - u_b).abs() < 1e-12);
        assert_eq!(s[2], 0.8);
        // each boundary state carries the junction flux of its edge
        assert!((m[0].f(s[0]) - m[0].godunov(0.25, u_b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn boundary_states_free_flow() {
        let m = lwr3();
        let tr = JunctionTraces::new(0.1, 0.05, 0.0);
        let u_b = solve_boundary_value(&tr, &m, 1e-12).unwrap();
        let s = boundary_states(&tr, u_b, &m);
        assert_eq!((s[0], s[1]), (0.1, 0.05));
        // outgoing edge receives the free-flow state carrying f(0.1) + f(0.05)
        assert!((m[2].f(s[2]) - (m[0].f(0.1) + m[1].f(0.05))).abs() < 1e-12);
        assert!(s[2] <= 0.5);
    }

    #[test]
    fn rejects_out_of_range_traces() {
        let err =
            solve_boundary_value(&JunctionTraces::new(1.2, 0.0, 0.0), &lwr3(), 1e-12).unwrap_err();
        assert!(matches!(
            err,
            JunctionError::Flux(FluxError::OutOfRange { .. })
        ));
    }

    #[test]
    fn no_sign_change_detected() {
        // outgoing flux that is negative everywhere, so phi(u_max) > 0
        let weird = FluxModel::new(
            "neg",
            |u: f64| -u * (1.0 - u) - 0.1,
            |u| 2.0 * u - 1.0,
            1.0,
            0.5,
            1.0,
            crate::flux::FluxShape::General,
        );
        let m = [FluxModel::lwr(), FluxModel::lwr(), weird];
        let err = solve_boundary_value(&JunctionTraces::new(0.5, 0.5, 0.5), &m, 1e-12).unwrap_err();
        assert!(matches!(err, JunctionError::NoSignChange { .. }));
    }

    #[test]
    fn residual_is_non_increasing() {
        let m = lwr3();
        for &(a, b, c) in &[(0.1, 0.9, 0.3), (0.6, 0.2, 0.7), (0.45, 0.55, 0.05)] {
            let tr = JunctionTraces::new(a, b, c);
            let vals: Vec<f64> = (0..=1000)
                .map(|i| junction_residual(i as f64 / 1000.0, &tr, &m).unwrap())
                .collect();
            assert!(vals.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        }
    }
}
