//! Scalar abstraction shared by the exact (formula-level) computations.
//!
//! Everything that is a closed-form evaluation (kernels, stationary measures,
//! entropy series, the Poisson entropy function) is written against [`Real`],
//! so the same code runs in `f64` and `f32`. Simulation code converts to `f64`
//! at the sampling boundary.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `x log(1/x)` with the convention `0 log(1/0) = 0`.
    fn neg_x_log_x(self) -> Self {
        if self <= Self::zero() {
            Self::zero()
        } else {
            -self * self.ln()
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Closed interval `[lo, hi]`, used for certified enclosures of series tails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Enclosure<R> {
    pub lo: R,
    pub hi: R,
}

impl<R: Real> Enclosure<R> {
    pub fn point(x: R) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn new(lo: R, hi: R) -> Self {
        debug_assert!(lo <= hi || lo.is_nan() || hi.is_nan());
        Self { lo, hi }
    }

    pub fn zero() -> Self {
        Self::point(R::zero())
    }

    pub fn mid(&self) -> R {
        if self.hi.is_infinite() {
            self.hi
        } else {
            (self.lo + self.hi) / R::lit(2.0)
        }
    }

    pub fn width(&self) -> R {
        self.hi - self.lo
    }

    pub fn scale(&self, t: R) -> Self {
        Self::new(self.lo * t, self.hi * t)
    }

    pub fn shift(&self, x: R) -> Self {
        Self::new(self.lo + x, self.hi + x)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(self.lo + other.lo, self.hi + other.hi)
    }

    pub fn contains(&self, x: R) -> bool {
        self.lo <= x && x <= self.hi
    }
}
