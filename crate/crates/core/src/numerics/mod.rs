//! Arbitrary-precision building blocks shared by every other module.

mod erf;
mod quadrature;
mod roots;
mod signed_log;

pub use erf::erf_highprec;
pub(crate) use erf::exp_square_erf;
pub use quadrature::{integrate_regularized, EndpointSingularity, Quadrature, QuadratureOptions};
pub use roots::{find_root_bracketed, RootOptions};
pub use signed_log::SignedLog;

pub use rug::{Float as BigFloat, Integer, Rational};

use rug::float::Constant;

/// Binary working precision in bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Precision(u32);

impl Precision {
    pub const DEFAULT: Precision = Precision(128);
    pub const MIN: Precision = Precision(16);

    pub fn new(bits: u32) -> Self {
        Precision(bits.max(Self::MIN.0))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn with_guard(self, extra: u32) -> Self {
        Precision(self.0 + extra)
    }

    pub fn times(self, factor: u32) -> Self {
        Precision(self.0 * factor)
    }

    pub fn float<T>(self, value: T) -> BigFloat
    where
        BigFloat: rug::Assign<T>,
    {
        BigFloat::with_val(self.0, value)
    }

    pub fn zero(self) -> BigFloat {
        BigFloat::new(self.0)
    }

    pub fn pi(self) -> BigFloat {
        BigFloat::with_val(self.0, Constant::Pi)
    }

    /// Correctly rounded conversion of an exact rational.
    pub fn rational(self, r: &Rational) -> BigFloat {
        BigFloat::with_val(self.0, r)
    }
}

impl Default for Precision {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// `n!` as an exact integer.
pub fn factorial(n: u32) -> Integer {
    Integer::from(Integer::factorial(n))
}

/// `(2p-1)!!` with the convention `(-1)!! = 1`.
pub fn double_factorial_odd(p: u32) -> Integer {
    if p == 0 {
        return Integer::from(1);
    }
    Integer::from(Integer::factorial_2(2 * p - 1))
}

/// Converts to f64 for reporting; saturates to +-inf outside the f64 range.
pub fn to_f64(x: &BigFloat) -> f64 {
    x.to_f64()
}
