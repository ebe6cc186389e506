//! Floating-point abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar the estimators are generic over.
///
/// Implemented for `f32` and `f64`. Constants are written as `f64` literals and
/// converted with [`Scalar::c`]; special functions without a `num_traits`
/// equivalent are routed through `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Default + Debug + Display + Sum + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable in scalar type")
    }

    /// Converts a count into this scalar type.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Machine epsilon, exposed as a method so generic code reads naturally.
    #[inline]
    fn eps() -> Self {
        Self::epsilon()
    }

    /// Error function.
    fn erf_fn(self) -> Self;

    /// Natural log of the gamma function.
    fn lgamma(self) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn erf_fn(self) -> Self {
        libm::erf(self)
    }

    #[inline]
    fn lgamma(self) -> Self {
        libm::lgamma(self)
    }
}

impl Scalar for f32 {
    #[inline]
    fn erf_fn(self) -> Self {
        libm::erff(self)
    }

    #[inline]
    fn lgamma(self) -> Self {
        libm::lgammaf(self)
    }
}

/// Pairwise (cascade) summation in a fixed order.
///
/// Results depend only on the slice contents and order, never on scheduling.
pub fn pairwise_sum<T: Scalar>(values: &[T]) -> T {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().fold(T::zero(), |acc, &v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Euclidean distance between two points of equal dimension.
#[inline]
pub fn euclidean<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
        .sqrt()
}

/// Euclidean norm.
#[inline]
pub fn norm<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
}

/// Surface area of the unit sphere in `R^d` (2 for `d = 1`, `2π` for `d = 2`).
pub fn unit_sphere_area<T: Scalar>(d: usize) -> T {
    let half_d = T::from_count(d) * T::c(0.5);
    T::c(2.0) * T::PI().powf(half_d) / half_d.lgamma().exp()
}
