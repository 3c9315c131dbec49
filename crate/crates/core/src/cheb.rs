//! Chebyshev–Gauss–Lobatto geometry and coefficient-space algebra.
//!
//! Nodes are ordered `x_j = cos(pi j / N)`, so index 0 is `x = +1` and index
//! `N` is `x = -1`. Coefficient vectors hold `N + 1` entries `c_k` of the
//! interpolant `sum_k c_k T_k(x)`.

use std::fmt;
use std::ops::{Deref, DerefMut};
use std::sync::Arc;

use thiserror::Error;

use crate::scalar::{Dct1, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChebError {
    #[error("polynomial degree must be at least 2, got {0}")]
    DegreeTooSmall(usize),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("filter order must be a positive even integer, got {0}")]
    BadFilterOrder(u32),
    #[error("filter damping must be positive and finite")]
    BadFilterDamping,
}

/// Chebyshev–Gauss–Lobatto grid of degree `n` with its quadrature data.
#[derive(Clone)]
pub struct CglGrid<T: Scalar> {
    n: usize,
    points: Vec<T>,
    quad_weights: Vec<T>,
    norm_factors: Vec<T>,
    dct: Arc<dyn Dct1<T>>,
}

impl<T: Scalar> fmt::Debug for CglGrid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CglGrid").field("n", &self.n).finish()
    }
}

impl<T: Scalar> CglGrid<T> {
    pub fn new(n: usize) -> Result<Self, ChebError> {
        if n < 2 {
            return Err(ChebError::DegreeTooSmall(n));
        }
        let nt = T::of(n);
        // sin form keeps the node set exactly antisymmetric and hits 0 exactly
        let points = (0..=n)
            .map(|j| {
                let arg = T::PI() * (nt - T::two() * T::of(j)) / (T::two() * nt);
                arg.sin()
            })
            .collect();
        let interior_w = T::PI() / nt;
        let quad_weights = (0..=n)
            .map(|j| {
                if j == 0 || j == n {
                    interior_w * T::half()
                } else {
                    interior_w
                }
            })
            .collect();
        let norm_factors = (0..=n)
            .map(|k| {
                if k == 0 || k == n {
                    T::PI()
                } else {
                    T::FRAC_PI_2()
                }
            })
            .collect();
        Ok(Self {
            n,
            points,
            quad_weights,
            norm_factors,
            dct: T::dct1_plan(n),
        })
    }

    /// Polynomial degree `N`.
    pub fn degree(&self) -> usize {
        self.n
    }

    /// Number of nodes, `N + 1`.
    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    /// Quadrature weights `w_n`.
    pub fn quad_weights(&self) -> &[T] {
        &self.quad_weights
    }

    /// Normalisation factors `gamma_k`.
    pub fn norm_factors(&self) -> &[T] {
        &self.norm_factors
    }

    /// Smallest distance between neighbouring nodes.
    pub fn min_spacing(&self) -> T {
        self.points
            .windows(2)
            .map(|w| (w[0] - w[1]).abs())
            .fold(T::infinity(), T::min)
    }

    fn check_len(&self, got: usize) -> Result<(), ChebError> {
        if got != self.n + 1 {
            return Err(ChebError::LengthMismatch {
                expected: self.n + 1,
                got,
            });
        }
        Ok(())
    }

    /// `T_k(x_j) = cos(pi j k / N)` evaluated from the reduced index.
    fn basis_at_node(&self, k: usize, j: usize) -> T {
        let m = (k * j) % (2 * self.n);
        (T::PI() * T::of(m) / T::of(self.n)).cos()
    }
}

/// Chebyshev coefficients `c_0 .. c_N` of a degree-`N` polynomial.
#[derive(Clone, PartialEq)]
pub struct CoeffVector<T>(Vec<T>);

impl<T: Scalar> CoeffVector<T> {
    pub fn from_vec(coeffs: Vec<T>) -> Self {
        Self(coeffs)
    }

    pub fn zeros(degree: usize) -> Self {
        Self(vec![T::zero(); degree + 1])
    }

    /// The basis vector `e_k` of length `degree + 1`.
    pub fn unit(degree: usize, k: usize) -> Self {
        let mut v = Self::zeros(degree);
        v.0[k] = T::one();
        v
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    /// Value of the expansion at `x = +1`, i.e. `sum_k c_k`.
    pub fn value_at_right(&self) -> T {
        self.0.iter().copied().sum()
    }

    /// Value of the expansion at `x = -1`, i.e. `sum_k (-1)^k c_k`.
    pub fn value_at_left(&self) -> T {
        self.0
            .iter()
            .enumerate()
            .map(|(k, &c)| if k % 2 == 0 { c } else { -c })
            .sum()
    }

    /// Evaluates `sum_k c_k T_k(x)` with Clenshaw's recurrence.
    pub fn evaluate(&self, x: T) -> T {
        clenshaw(&self.0, x)
    }
}

impl<T> Deref for CoeffVector<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

impl<T> DerefMut for CoeffVector<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        &mut self.0
    }
}

impl<T: fmt::Debug> fmt::Debug for CoeffVector<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("CoeffVector").field(&self.0).finish()
    }
}

pub(crate) fn clenshaw<T: Scalar>(a: &[T], x: T) -> T {
    match a.len() {
        0 => T::zero(),
        1 => a[0],
        _ => {
            let two_x = T::two() * x;
            let mut b1 = T::zero();
            let mut b2 = T::zero();
            for &ak in a[1..].iter().rev() {
                let tmp = two_x * b1 - b2 + ak;
                b2 = b1;
                b1 = tmp;
            }
            x * b1 - b2 + a[0]
        }
    }
}

/// Nodal values to Chebyshev coefficients through the fast cosine transform.
pub fn forward_transform<T: Scalar>(
    values: &[T],
    grid: &CglGrid<T>,
) -> Result<CoeffVector<T>, ChebError> {
    grid.check_len(values.len())?;
    let n = grid.n;
    let mut out = values.to_vec();
    grid.dct.process(&mut out);
    let interior = T::one() / T::of(n);
    let ends = interior * T::half();
    for (k, c) in out.iter_mut().enumerate() {
        *c *= if k == 0 || k == n { ends } else { interior };
    }
    Ok(CoeffVector(out))
}

/// Reference quadrature `c_k = (1/gamma_k) sum_n u(x_n) T_k(x_n) w_n`, O(N^2).
pub fn forward_transform_direct<T: Scalar>(
    values: &[T],
    grid: &CglGrid<T>,
) -> Result<CoeffVector<T>, ChebError> {
    grid.check_len(values.len())?;
    let coeffs = (0..=grid.n)
        .map(|k| {
            let s: T = values
                .iter()
                .enumerate()
                .map(|(j, &v)| v * grid.basis_at_node(k, j) * grid.quad_weights[j])
                .sum();
            s / grid.norm_factors[k]
        })
        .collect();
    Ok(CoeffVector(coeffs))
}

/// Chebyshev coefficients to nodal values through the fast cosine transform.
pub fn inverse_transform<T: Scalar>(
    c: &CoeffVector<T>,
    grid: &CglGrid<T>,
) -> Result<Vec<T>, ChebError> {
    grid.check_len(c.len())?;
    let n = grid.n;
    let mut out = c.0.clone();
    out[0] *= T::two();
    out[n] *= T::two();
    grid.dct.process(&mut out);
    for v in out.iter_mut() {
        *v *= T::half();
    }
    Ok(out)
}

/// Reference evaluation `u(x_j) = sum_k c_k T_k(x_j)`, O(N^2).
pub fn inverse_transform_direct<T: Scalar>(
    c: &CoeffVector<T>,
    grid: &CglGrid<T>,
) -> Result<Vec<T>, ChebError> {
    grid.check_len(c.len())?;
    Ok((0..=grid.n)
        .map(|j| {
            c.iter()
                .enumerate()
                .map(|(k, &ck)| ck * grid.basis_at_node(k, j))
                .sum()
        })
        .collect())
}

/// Coefficients of the derivative of the expansion.
///
/// Backward recurrence `cbar_k b_k = b_{k+2} + 2 (k+1) a_{k+1}` with
/// `cbar_0 = 2`, which is the 0-indexed form of `D_{kn} = 2n / cbar_k` for
/// `n > k`, `n + k` odd.
pub fn derivative_coeffs<T: Scalar>(c: &CoeffVector<T>) -> CoeffVector<T> {
    let len = c.len();
    let mut b = vec![T::zero(); len];
    if len < 2 {
        return CoeffVector(b);
    }
    let n = len - 1;
    b[n - 1] = T::two() * T::of(n) * c[n];
    for k in (0..n.saturating_sub(1)).rev() {
        b[k] = b[k + 2] + T::two() * T::of(k + 1) * c[k + 1];
    }
    b[0] *= T::half();
    CoeffVector(b)
}

/// Truncated Chebyshev product, O(N^2).
///
/// Uses `T_n T_m = (T_{n+m} + T_{|n-m|}) / 2` and drops every contribution
/// above degree `N`.
pub fn product_coeffs<T: Scalar>(
    f: &CoeffVector<T>,
    g: &CoeffVector<T>,
) -> Result<CoeffVector<T>, ChebError> {
    if f.len() != g.len() {
        return Err(ChebError::LengthMismatch {
            expected: f.len(),
            got: g.len(),
        });
    }
    let len = f.len();
    let mut out = vec![T::zero(); len];
    for (n, &fn_) in f.iter().enumerate() {
        if fn_ == T::zero() {
            continue;
        }
        for (m, &gm) in g.iter().enumerate() {
            let h = T::half() * fn_ * gm;
            if n + m < len {
                out[n + m] += h;
            }
            out[n.abs_diff(m)] += h;
        }
    }
    Ok(CoeffVector(out))
}

/// Fast truncated product through a zero-padded grid of degree `2N`.
///
/// Both factors are evaluated on the padded grid, multiplied pointwise and
/// transformed back. The padded grid resolves the full degree-`2N` product,
/// so the first `N + 1` coefficients equal [`product_coeffs`] up to rounding.
#[derive(Clone, Debug)]
pub struct PaddedProduct<T: Scalar> {
    degree: usize,
    padded: CglGrid<T>,
}

impl<T: Scalar> PaddedProduct<T> {
    pub fn new(degree: usize) -> Result<Self, ChebError> {
        Ok(Self {
            degree,
            padded: CglGrid::new(2 * degree.max(1))?,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    fn pad(&self, c: &[T]) -> CoeffVector<T> {
        let mut p = vec![T::zero(); self.padded.len()];
        p[..c.len()].copy_from_slice(c);
        CoeffVector(p)
    }

    pub fn product(
        &self,
        f: &CoeffVector<T>,
        g: &CoeffVector<T>,
    ) -> Result<CoeffVector<T>, ChebError> {
        for v in [f, g] {
            if v.len() != self.degree + 1 {
                return Err(ChebError::LengthMismatch {
                    expected: self.degree + 1,
                    got: v.len(),
                });
            }
        }
        let fv = inverse_transform(&self.pad(f), &self.padded)?;
        let gv = inverse_transform(&self.pad(g), &self.padded)?;
        let prod: Vec<T> = fv.iter().zip(&gv).map(|(&a, &b)| a * b).collect();
        let mut full = forward_transform(&prod, &self.padded)?.into_vec();
        full.truncate(self.degree + 1);
        Ok(CoeffVector(full))
    }
}

/// Exponential filter `sigma(eta) = exp(-beta eta^p)` on `[0, 1]`, zero outside.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterSpec<T> {
    order: u32,
    beta: T,
}

impl<T: Scalar> FilterSpec<T> {
    pub fn new(order: u32, beta: T) -> Result<Self, ChebError> {
        if order == 0 || !order.is_multiple_of(2) {
            return Err(ChebError::BadFilterOrder(order));
        }
        if !(beta > T::zero()) || !beta.is_finite() {
            return Err(ChebError::BadFilterDamping);
        }
        Ok(Self { order, beta })
    }

    /// Filter of the given order with `beta = -ln(machine epsilon)`, so that
    /// `sigma(1)` equals the machine epsilon.
    pub fn machine_precision(order: u32) -> Result<Self, ChebError> {
        Self::new(order, Self::default_beta())
    }

    pub fn default_beta() -> T {
        -T::epsilon().ln()
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn value(&self, eta: T) -> T {
        filter_value(eta, self)
    }

    /// `sigma(k / N)` for `k = 0..=N`.
    pub fn factors(&self, degree: usize) -> Vec<T> {
        let nt = T::of(degree.max(1));
        (0..=degree).map(|k| self.value(T::of(k) / nt)).collect()
    }
}

pub fn filter_value<T: Scalar>(eta: T, spec: &FilterSpec<T>) -> T {
    if eta < T::zero() || eta > T::one() {
        return T::zero();
    }
    (-spec.beta * eta.powi(spec.order as i32)).exp()
}

/// `out_k = sigma(k / N) c_k`.
pub fn apply_filter<T: Scalar>(c: &CoeffVector<T>, spec: &FilterSpec<T>) -> CoeffVector<T> {
    let factors = spec.factors(c.degree());
    CoeffVector(c.iter().zip(&factors).map(|(&a, &s)| a * s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> CglGrid<f64> {
        CglGrid::new(n).unwrap()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn rejects_small_degree() {
        assert_eq!(
            CglGrid::<f64>::new(1).unwrap_err(),
            ChebError::DegreeTooSmall(1)
        );
    }

    #[test]
    fn degree_two_grid() {
        let g = grid(2);
        assert_eq!(g.points(), &[1.0, 0.0, -1.0]);
        assert_relative_eq!(g.quad_weights()[0], PI / 4.0);
        assert_relative_eq!(g.quad_weights()[1], PI / 2.0);
        assert_relative_eq!(g.quad_weights()[2], PI / 4.0);
        assert_eq!(g.norm_factors(), &[PI, PI / 2.0, PI]);
    }

    #[test]
    fn degree_four_node() {
        assert_relative_eq!(grid(4).points()[1], (PI / 4.0).cos(), epsilon = 1e-15);
    }

    #[test]
    fn points_strictly_decreasing() {
        let g = grid(33);
        assert!(g.points().windows(2).all(|w| w[0] > w[1]));
        assert_eq!(g.points()[0], 1.0);
        assert_eq!(g.points()[33], -1.0);
    }

    #[test]
    fn forward_of_constant_and_identity() {
        let g = grid(9);
        let c = forward_transform(&[1.0; 10], &g).unwrap();
        assert!(max_diff(&c, &CoeffVector::unit(9, 0)) < 1e-15);
        let c = forward_transform(g.points(), &g).unwrap();
        assert!(max_diff(&c, &CoeffVector::unit(9, 1)) < 1e-15);
    }

    #[test]
    fn inverse_of_unit_vectors() {
        let n = 10;
        let g = grid(n);
        let ones = inverse_transform(&CoeffVector::unit(n, 0), &g).unwrap();
        assert!(ones.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let x = inverse_transform(&CoeffVector::unit(n, 1), &g).unwrap();
        assert!(max_diff(&x, g.points()) < 1e-15);
        let alt = inverse_transform(&CoeffVector::unit(n, n), &g).unwrap();
        for (j, v) in alt.iter().enumerate() {
            let expect = if j % 2 == 0 { 1.0 } else { -1.0 };
            assert!((v - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn transform_length_mismatch() {
        let g = grid(4);
        assert!(matches!(
            forward_transform(&[0.0; 4], &g),
            Err(ChebError::LengthMismatch {
                expected: 5,
                got: 4
            })
        ));
        assert!(inverse_transform(&CoeffVector::zeros(5), &g).is_err());
    }

    #[test]
    fn derivative_examples() {
        let d = derivative_coeffs(&CoeffVector::<f64>::unit(5, 1));
        assert_eq!(&*d, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let d = derivative_coeffs(&CoeffVector::<f64>::unit(5, 2));
        assert_eq!(&*d, &[0.0, 4.0, 0.0, 0.0, 0.0, 0.0]);
        let d = derivative_coeffs(&CoeffVector::<f64>::unit(5, 3));
        assert_eq!(&*d, &[3.0, 0.0, 6.0, 0.0, 0.0, 0.0]);
    }

    /// Standard 0-indexed matrix `D_{kn} = 2n / cbar_k`, n > k, n + k odd.
    #[test]
    fn derivative_matches_dense_matrix() {
        let n = 12;
        let c: Vec<f64> = (0..=n).map(|k| ((k * 7 + 3) % 11) as f64 - 5.0).collect();
        let got = derivative_coeffs(&CoeffVector::from_vec(c.clone()));
        for k in 0..=n {
            let cbar = if k == 0 { 2.0 } else { 1.0 };
            let s: f64 = (k + 1..=n)
                .filter(|m| (m + k) % 2 == 1)
                .map(|m| 2.0 * m as f64 / cbar * c[m])
                .sum();
            assert!((s - got[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn product_examples() {
        let n = 4;
        let g = CoeffVector::from_vec(vec![0.3, -1.0, 2.0, 0.5, 0.25]);
        let p = product_coeffs(&CoeffVector::unit(n, 0), &g).unwrap();
        assert!(max_diff(&p, &g) < 1e-15);
        let t1 = CoeffVector::<f64>::unit(n, 1);
        let p = product_coeffs(&t1, &t1).unwrap();
        assert_eq!(&*p, &[0.5, 0.0, 0.5, 0.0, 0.0]);
        let p = product_coeffs(&CoeffVector::unit(n, 4), &t1).unwrap();
        assert_eq!(&*p, &[0.0, 0.0, 0.0, 0.5, 0.0]);
    }

    #[test]
    fn product_length_mismatch() {
        assert!(product_coeffs(&CoeffVector::<f64>::zeros(3), &CoeffVector::zeros(4)).is_err());
    }

    #[test]
    fn padded_product_matches_direct() {
        let n = 17;
        let f: Vec<f64> = (0..=n).map(|k| 1.0 / (1.0 + k as f64)).collect();
        let g: Vec<f64> = (0..=n).map(|k| ((k as f64) * 0.9).cos()).collect();
        let (f, g) = (CoeffVector::from_vec(f), CoeffVector::from_vec(g));
        let direct = product_coeffs(&f, &g).unwrap();
        let fast = PaddedProduct::new(n).unwrap().product(&f, &g).unwrap();
        assert!(max_diff(&direct, &fast) < 1e-13);
    }

    #[test]
    fn filter_values() {
        let spec = FilterSpec::<f64>::machine_precision(10).unwrap();
        assert_eq!(filter_value(0.0, &spec), 1.0);
        assert_eq!(filter_value(-0.1, &spec), 0.0);
        assert_eq!(filter_value(1.1, &spec), 0.0);
        assert_relative_eq!(filter_value(1.0, &spec), f64::EPSILON, max_relative = 1e-12);
        assert_relative_eq!(spec.beta(), 36.04365338911715, max_relative = 1e-14);
    }

    #[test]
    fn filter_rejects_bad_order() {
        assert_eq!(
            FilterSpec::<f64>::new(3, 1.0).unwrap_err(),
            ChebError::BadFilterOrder(3)
        );
        assert_eq!(
            FilterSpec::<f64>::new(0, 1.0).unwrap_err(),
            ChebError::BadFilterOrder(0)
        );
        assert_eq!(
            FilterSpec::<f64>::new(2, -1.0).unwrap_err(),
            ChebError::BadFilterDamping
        );
    }

    #[test]
    fn apply_filter_examples() {
        let n = 16;
        let spec = FilterSpec::<f64>::machine_precision(10).unwrap();
        assert_eq!(
            &*apply_filter(&CoeffVector::unit(n, 0), &spec),
            &*CoeffVector::unit(n, 0)
        );
        let top = apply_filter(&CoeffVector::unit(n, n), &spec);
        assert_relative_eq!(top[n], f64::EPSILON, max_relative = 1e-12);
        let sharp = FilterSpec::<f64>::machine_precision(64).unwrap();
        for k in 0..=n / 2 {
            assert!((sharp.value(k as f64 / n as f64) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn filter_is_monotone() {
        let spec = FilterSpec::<f64>::machine_precision(6).unwrap();
        let vals: Vec<f64> = (0..=200).map(|i| spec.value(i as f64 / 200.0)).collect();
        assert!(vals.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn clenshaw_matches_nodal_values() {
        let g = grid(11);
        let c = CoeffVector::from_vec((0..12).map(|k| (k as f64).sin()).collect());
        let nodal = inverse_transform(&c, &g).unwrap();
        for (x, v) in g.points().iter().zip(&nodal) {
            assert!((c.evaluate(*x) - v).abs() < 1e-13);
        }
        assert!((c.value_at_right() - nodal[0]).abs() < 1e-13);
        assert!((c.value_at_left() - nodal[11]).abs() < 1e-13);
    }

    #[test]
    fn works_in_single_precision() {
        let g = CglGrid::<f32>::new(8).unwrap();
        let v: Vec<f32> = g.points().iter().map(|x| x * x).collect();
        let c = forward_transform(&v, &g).unwrap();
        assert!((c[0] - 0.5).abs() < 1e-6 && (c[2] - 0.5).abs() < 1e-6);
        let back = inverse_transform(&c, &g).unwrap();
        assert!(v.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-6));
    }

    proptest! {
        #[test]
        fn roundtrip(vals in prop::collection::vec(-10.0f64..10.0, 3..80)) {
            let g = grid(vals.len() - 1);
            let back = inverse_transform(&forward_transform(&vals, &g).unwrap(), &g).unwrap();
            prop_assert!(max_diff(&vals, &back) < 1e-12);
        }

        #[test]
        fn fast_path_matches_direct(vals in prop::collection::vec(-1.0f64..1.0, 3..70)) {
            let g = grid(vals.len() - 1);
            let fast = forward_transform(&vals, &g).unwrap();
            let slow = forward_transform_direct(&vals, &g).unwrap();
            prop_assert!(max_diff(&fast, &slow) < 1e-12);
            let fast = inverse_transform(&fast, &g).unwrap();
            let slow = inverse_transform_direct(&slow, &g).unwrap();
            prop_assert!(max_diff(&fast, &slow) < 1e-12);
        }

        #[test]
        fn filter_twice_doubles_beta(
            c in prop::collection::vec(-1.0f64..1.0, 3..40),
            half_p in 1u32..8,
            beta in 0.1f64..40.0,
        ) {
            let c = CoeffVector::from_vec(c);
            let once = FilterSpec::new(2 * half_p, beta).unwrap();
            let doubled = FilterSpec::new(2 * half_p, 2.0 * beta).unwrap();
            let twice = apply_filter(&apply_filter(&c, &once), &once);
            let single = apply_filter(&c, &doubled);
            for (a, b) in twice.iter().zip(single.iter()) {
                prop_assert!((a - b).abs() <= 1e-14 * (1.0 + b.abs()));
            }
        }
    }
}
