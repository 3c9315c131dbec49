//! Bell-shaped flux functions and the Godunov numerical flux.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::scalar::Scalar;

/// Slack allowed when checking that a state lies in `[0, u_max]`.
pub const RANGE_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FluxError {
    #[error("state {value} outside [0, {u_max}]")]
    OutOfRange { value: f64, u_max: f64 },
    #[error("flux assumption violated: {0}")]
    Assumption(String),
    #[error("unknown flux '{0}'")]
    Unknown(String),
}

/// How the Godunov flux is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FluxShape {
    /// Increasing on `[0, u_c]`, decreasing on `[u_c, u_max]`; closed-form Godunov flux.
    Bell,
    /// No shape information; Godunov flux by grid search over the bracket.
    General,
}

type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// A flux `f` on `[0, u_max]` together with `f'`, the critical density and a
/// Lipschitz bound.
///
/// That `f'` is not constant on any subinterval cannot be checked from
/// samples and is left to whoever registers the flux.
#[derive(Clone)]
pub struct FluxModel<T> {
    name: String,
    flux: ScalarFn<T>,
    derivative: ScalarFn<T>,
    u_max: T,
    u_c: T,
    lipschitz: T,
    shape: FluxShape,
}

impl<T: Scalar> fmt::Debug for FluxModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FluxModel")
            .field("name", &self.name)
            .field("u_max", &self.u_max)
            .field("u_c", &self.u_c)
            .field("lipschitz", &self.lipschitz)
            .field("shape", &self.shape)
            .finish()
    }
}

impl<T: Scalar> FluxModel<T> {
    pub fn new(
        name: impl Into<String>,
        flux: impl Fn(T) -> T + Send + Sync + 'static,
        derivative: impl Fn(T) -> T + Send + Sync + 'static,
        u_max: T,
        u_c: T,
        lipschitz: T,
        shape: FluxShape,
    ) -> Self {
        Self {
            name: name.into(),
            flux: Arc::new(flux),
            derivative: Arc::new(derivative),
            u_max,
            u_c,
            lipschitz,
            shape,
        }
    }

    /// Traffic flux `f(u) = u (1 - u)`.
    pub fn lwr() -> Self {
        Self::new(
            "lwr",
            |u: T| u * (T::one() - u),
            |u: T| T::one() - T::two() * u,
            T::one(),
            T::half(),
            T::one(),
            FluxShape::Bell,
        )
    }

    /// Linear transport `f(u) = a u` on `[0, u_max]`. Not bell-shaped; used
    /// for exact-solution tests.
    pub fn linear(speed: T, u_max: T) -> Self {
        Self::new(
            "linear",
            move |u: T| speed * u,
            move |_| speed,
            u_max,
            u_max,
            speed.abs(),
            FluxShape::General,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn u_max(&self) -> T {
        self.u_max
    }

    pub fn critical(&self) -> T {
        self.u_c
    }

    pub fn lipschitz(&self) -> T {
        self.lipschitz
    }

    pub fn shape(&self) -> FluxShape {
        self.shape
    }

    #[inline]
    pub fn f(&self, u: T) -> T {
        (self.flux)(u)
    }

    #[inline]
    pub fn f_prime(&self, u: T) -> T {
        (self.derivative)(u)
    }

    /// Largest `|f'|` over `[lo, hi]`, sampled on 1001 points.
    pub fn max_speed_on(&self, lo: T, hi: T) -> T {
        let m = 1000;
        (0..=m)
            .map(|i| {
                let u = lo + (hi - lo) * T::of(i) / T::of(m);
                self.f_prime(u).abs()
            })
            .fold(T::zero(), T::max)
    }

    /// Clamps `u` into `[0, u_max]`.
    pub fn clamp(&self, u: T) -> T {
        u.max(T::zero()).min(self.u_max)
    }

    fn check_range(&self, u: T) -> Result<(), FluxError> {
        let slack = T::lit(RANGE_SLACK);
        if u < -slack || u > self.u_max + slack || u.is_nan() {
            return Err(FluxError::OutOfRange {
                value: u.as_f64(),
                u_max: self.u_max.as_f64(),
            });
        }
        Ok(())
    }

    /// Demand `f(min(a, u_c))`.
    pub fn demand(&self, a: T) -> T {
        self.f(a.min(self.u_c))
    }

    /// Supply `f(max(b, u_c))`.
    pub fn supply(&self, b: T) -> T {
        self.f(b.max(self.u_c))
    }

    /// The `u <= u_c` with `f(u) = q`, by bisection; `q` is clipped to the
    /// range of `f` on `[0, u_c]`.
    pub fn free_preimage(&self, q: T) -> T {
        self.branch_preimage(q, T::zero(), self.u_c, true)
    }

    /// The `u >= u_c` with `f(u) = q`, by bisection; `q` is clipped to the
    /// range of `f` on `[u_c, u_max]`.
    pub fn congested_preimage(&self, q: T) -> T {
        self.branch_preimage(q, self.u_c, self.u_max, false)
    }

    fn branch_preimage(&self, q: T, mut lo: T, mut hi: T, increasing: bool) -> T {
        let (f_lo, f_hi) = (self.f(lo), self.f(hi));
        if increasing {
            if q <= f_lo {
                return lo;
            }
            if q >= f_hi {
                return hi;
            }
        } else {
            if q >= f_lo {
                return lo;
            }
            if q <= f_hi {
                return hi;
            }
        }
        for _ in 0..200 {
            let mid = T::half() * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if (self.f(mid) < q) == increasing {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        T::half() * (lo + hi)
    }

    /// State just right of `x = 0` in the Riemann problem with data `a` on
    /// the left and `b` on the right: what a domain lying right of a boundary
    /// with outside datum `a` and interior trace `b` sees at the boundary.
    pub fn state_right_of(&self, a: T, b: T) -> T {
        if b >= self.u_c && self.demand(a) >= self.f(b) {
            b
        } else {
            self.free_preimage(self.godunov_unchecked(a, b))
        }
    }

    /// State just left of `x = 0` in the Riemann problem `(a, b)`: the
    /// boundary state of a domain lying left of the boundary with interior
    /// trace `a` and outside datum `b`.
    pub fn state_left_of(&self, a: T, b: T) -> T {
        if a <= self.u_c && self.supply(b) >= self.f(a) {
            a
        } else {
            self.congested_preimage(self.godunov_unchecked(a, b))
        }
    }

    /// Godunov flux: `min f` over `[a, b]` when `a <= b`, `max f` over `[b, a]`
    /// otherwise. Arguments must lie in `[0, u_max]`.
    pub fn godunov(&self, a: T, b: T) -> Result<T, FluxError> {
        self.check_range(a)?;
        self.check_range(b)?;
        Ok(self.godunov_unchecked(self.clamp(a), self.clamp(b)))
    }

    /// Godunov flux without range checks.
    #[inline]
    pub fn godunov_unchecked(&self, a: T, b: T) -> T {
        match self.shape {
            FluxShape::Bell => self.demand(a).min(self.supply(b)),
            FluxShape::General => self.godunov_search(a, b, 10_000),
        }
    }

    fn godunov_search(&self, a: T, b: T, samples: usize) -> T {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let pick = |x: T, y: T| if a <= b { x.min(y) } else { x.max(y) };
        let mut best = pick(self.f(lo), self.f(hi));
        for i in 1..samples {
            let u = lo + (hi - lo) * T::of(i) / T::of(samples);
            best = pick(best, self.f(u));
        }
        best
    }

    /// Sample-checks the shape of a bell-shaped flux: non-negativity and
    /// the Lipschitz bound, vanishing at both ends, and the sign condition
    /// `f'(u)(u_c - u) > 0`.
    pub fn check_assumptions(&self) -> Result<(), FluxError> {
        let tol = T::lit(1e-12);
        if self.f(T::zero()).abs() > tol || self.f(self.u_max).abs() > tol {
            return Err(FluxError::Assumption(format!(
                "{}: f must vanish at 0 and u_max",
                self.name
            )));
        }
        if !(self.u_c > T::zero() && self.u_c < self.u_max) {
            return Err(FluxError::Assumption(format!(
                "{}: critical density must lie inside (0, u_max)",
                self.name
            )));
        }
        let m = 10_000;
        let mut prev: Option<(T, T)> = None;
        for i in 1..m {
            let u = self.u_max * T::of(i) / T::of(m);
            let fu = self.f(u);
            if fu < -tol {
                return Err(FluxError::Assumption(format!("{}: f({u}) < 0", self.name)));
            }
            if u != self.u_c && self.f_prime(u) * (self.u_c - u) <= T::zero() {
                return Err(FluxError::Assumption(format!(
                    "{}: f'(u)(u_c - u) <= 0 at u = {u}",
                    self.name
                )));
            }
            if let Some((pu, pf)) = prev {
                if (fu - pf).abs() > self.lipschitz * (u - pu) * (T::one() + tol) {
                    return Err(FluxError::Assumption(format!(
                        "{}: Lipschitz bound {} exceeded near u = {u}",
                        self.name, self.lipschitz
                    )));
                }
            }
            prev = Some((u, fu));
        }
        Ok(())
    }
}

type Constructor<T> = Arc<dyn Fn() -> FluxModel<T> + Send + Sync>;

/// Name-to-flux lookup used by experiment configurations.
#[derive(Clone)]
pub struct FluxRegistry<T> {
    entries: BTreeMap<String, Constructor<T>>,
}

impl<T: Scalar> Default for FluxRegistry<T> {
    fn default() -> Self {
        let mut r = Self {
            entries: BTreeMap::new(),
        };
        r.register("lwr", FluxModel::lwr);
        r
    }
}

impl<T: Scalar> FluxRegistry<T> {
    pub fn register(
        &mut self,
        name: impl Into<String>,
        ctor: impl Fn() -> FluxModel<T> + Send + Sync + 'static,
    ) {
        self.entries.insert(name.into(), Arc::new(ctor));
    }

    pub fn get(&self, name: &str) -> Result<FluxModel<T>, FluxError> {
        self.entries
            .get(name)
            .map(|c| c())
            .ok_or_else(|| FluxError::Unknown(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}
