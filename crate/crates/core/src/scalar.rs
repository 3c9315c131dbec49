//! Floating-point abstraction shared by every solver in the crate.
//!
//! All numerics are written against [`Scalar`], implemented for `f32` and
//! `f64`. The fast cosine transform is reached through [`Scalar::dct1_plan`]
//! so that the FFT backend's own numeric traits never leak into generic code.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};
use std::sync::Arc;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftNum, FftPlanner};

/// Real scalar type used by the solvers.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Plans an unnormalised type-I DCT on `n + 1` samples.
    fn dct1_plan(n: usize) -> Arc<dyn Dct1<Self>>;

    /// Converts an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    /// Converts an index or count.
    #[inline]
    fn of(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }

    #[inline]
    fn two() -> Self {
        Self::lit(2.0)
    }

    /// Lossy conversion used for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

/// Unnormalised type-I discrete cosine transform on `n + 1` samples:
///
/// `y_k = v_0 + (-1)^k v_n + 2 sum_{j=1}^{n-1} v_j cos(pi j k / n)`.
///
/// The transform is its own inverse up to the factor `2n`.
pub trait Dct1<T>: Send + Sync {
    /// Number of samples, `n + 1`.
    fn points(&self) -> usize;
    fn process(&self, data: &mut [T]);
}

struct FftDct1<T: FftNum> {
    n: usize,
    fft: Arc<dyn Fft<T>>,
}

impl<T: FftNum + Float> Dct1<T> for FftDct1<T> {
    fn points(&self) -> usize {
        self.n + 1
    }

    fn process(&self, data: &mut [T]) {
        let n = self.n;
        assert_eq!(data.len(), n + 1, "DCT-I length mismatch");
        // even extension of length 2n
        let mut buf: Vec<Complex<T>> = Vec::with_capacity(2 * n);
        buf.extend(data.iter().map(|&v| Complex::new(v, T::zero())));
        buf.extend(data[1..n].iter().rev().map(|&v| Complex::new(v, T::zero())));
        self.fft.process(&mut buf);
        for (d, c) in data.iter_mut().zip(buf.iter()) {
            *d = c.re;
        }
    }
}

fn plan<T: FftNum + Float>(n: usize) -> Arc<dyn Dct1<T>> {
    let mut planner = FftPlanner::<T>::new();
    Arc::new(FftDct1 {
        n,
        fft: planner.plan_fft_forward(2 * n),
    })
}

impl Scalar for f64 {
    fn dct1_plan(n: usize) -> Arc<dyn Dct1<Self>> {
        plan::<f64>(n)
    }
}

impl Scalar for f32 {
    fn dct1_plan(n: usize) -> Arc<dyn Dct1<Self>> {
        plan::<f32>(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dct1_matches_definition() {
        let n = 7;
        let v: Vec<f64> = (0..=n).map(|j| (j as f64 * 0.37).sin() + 0.1).collect();
        let mut y = v.clone();
        f64::dct1_plan(n).process(&mut y);
        for (k, &yk) in y.iter().enumerate() {
            let mut s = v[0] + if k % 2 == 0 { v[n] } else { -v[n] };
            for (j, &vj) in v.iter().enumerate().take(n).skip(1) {
                s += 2.0 * vj * (std::f64::consts::PI * (j * k) as f64 / n as f64).cos();
            }
            assert!((s - yk).abs() < 1e-12, "k={k}: {s} vs {yk}");
        }
    }
}
