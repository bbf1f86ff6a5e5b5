use std::cmp::Ordering;
use std::fmt;
use std::ops::{Div, Mul, Neg};

use rug::{Float, Integer, Rational};

use super::Precision;

/// A real number stored as `sign * exp(log_magnitude)`.
///
/// Used for quantities of size `k!` and beyond. Zero has sign 0 and no
/// meaningful magnitude.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedLog {
    sign: i8,
    log_magnitude: Float,
}

impl SignedLog {
    pub fn zero(prec: Precision) -> Self {
        SignedLog { sign: 0, log_magnitude: prec.zero() }
    }

    pub fn one(prec: Precision) -> Self {
        SignedLog { sign: 1, log_magnitude: prec.zero() }
    }

    /// `sign * exp(log_magnitude)`; a zero sign yields zero.
    pub fn from_parts(sign: i8, log_magnitude: Float) -> Self {
        let sign = sign.signum();
        SignedLog { sign, log_magnitude }
    }

    /// `exp(log_magnitude)`, always positive.
    pub fn exp(log_magnitude: Float) -> Self {
        SignedLog { sign: 1, log_magnitude }
    }

    pub fn from_float(x: &Float) -> Self {
        let prec = x.prec();
        if x.is_zero() {
            return SignedLog { sign: 0, log_magnitude: Float::new(prec) };
        }
        let sign = if x.is_sign_negative() { -1 } else { 1 };
        SignedLog { sign, log_magnitude: Float::with_val(prec, x.abs_ref()).ln() }
    }

    pub fn from_integer(n: &Integer, prec: Precision) -> Self {
        Self::from_float(&prec.float(n))
    }

    pub fn from_rational(r: &Rational, prec: Precision) -> Self {
        if *r == 0 {
            return Self::zero(prec);
        }
        let sign = if *r < 0 { -1 } else { 1 };
        let num = prec.float(r.numer()).abs().ln();
        let den = prec.float(r.denom()).ln();
        SignedLog { sign, log_magnitude: num - den }
    }

    /// `k!` via the log-gamma function, exact for the range we use up to rounding.
    pub fn factorial(k: u32, prec: Precision) -> Self {
        let x = prec.float(k + 1);
        SignedLog { sign: 1, log_magnitude: x.ln_gamma() }
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// Natural log of the absolute value; `None` for zero.
    pub fn ln_abs(&self) -> Option<&Float> {
        (self.sign != 0).then_some(&self.log_magnitude)
    }

    pub fn ln_abs_f64(&self) -> f64 {
        match self.sign {
            0 => f64::NEG_INFINITY,
            _ => self.log_magnitude.to_f64(),
        }
    }

    /// Raises a positive value to a real power.
    ///
    /// Panics when the value is negative and `exponent` is not an integer.
    pub fn pow(&self, exponent: &Float) -> Self {
        if self.sign == 0 {
            return self.clone();
        }
        let sign = if self.sign < 0 {
            let is_int = exponent.is_integer();
            assert!(is_int, "negative SignedLog raised to a non-integer power");
            let odd = exponent.to_integer().map(|i| i.is_odd()).unwrap_or(false);
            if odd { -1 } else { 1 }
        } else {
            1
        };
        let log_magnitude = Float::with_val(self.log_magnitude.prec(), &self.log_magnitude * exponent);
        SignedLog { sign, log_magnitude }
    }

    pub fn to_float(&self, prec: Precision) -> Float {
        match self.sign {
            0 => prec.zero(),
            s => {
                let m = prec.float(&self.log_magnitude).exp();
                if s < 0 { -m } else { m }
            }
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.log_magnitude.to_f64().exp(),
        }
    }

    /// `self / other` as an ordinary float, useful for ratios of two huge numbers.
    pub fn ratio(&self, other: &SignedLog, prec: Precision) -> Float {
        (self / other).to_float(prec)
    }
}

impl Mul<&SignedLog> for &SignedLog {
    type Output = SignedLog;
    fn mul(self, rhs: &SignedLog) -> SignedLog {
        let sign = self.sign * rhs.sign;
        if sign == 0 {
            return SignedLog::zero(Precision::new(self.log_magnitude.prec()));
        }
        let prec = self.log_magnitude.prec().max(rhs.log_magnitude.prec());
        let log_magnitude = Float::with_val(prec, &self.log_magnitude + &rhs.log_magnitude);
        SignedLog { sign, log_magnitude }
    }
}

impl Mul for SignedLog {
    type Output = SignedLog;
    fn mul(self, rhs: SignedLog) -> SignedLog {
        &self * &rhs
    }
}

impl Div<&SignedLog> for &SignedLog {
    type Output = SignedLog;
    /// Panics on division by zero.
    fn div(self, rhs: &SignedLog) -> SignedLog {
        assert!(rhs.sign != 0, "SignedLog division by zero");
        if self.sign == 0 {
            return self.clone();
        }
        let prec = self.log_magnitude.prec().max(rhs.log_magnitude.prec());
        let log_magnitude = Float::with_val(prec, &self.log_magnitude - &rhs.log_magnitude);
        SignedLog { sign: self.sign * rhs.sign, log_magnitude }
    }
}

impl Div for SignedLog {
    type Output = SignedLog;
    fn div(self, rhs: SignedLog) -> SignedLog {
        &self / &rhs
    }
}

impl Neg for SignedLog {
    type Output = SignedLog;
    fn neg(mut self) -> SignedLog {
        self.sign = -self.sign;
        self
    }
}

impl PartialOrd for SignedLog {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.sign.cmp(&other.sign) {
            Ordering::Equal => match self.sign {
                0 => Some(Ordering::Equal),
                1 => self.log_magnitude.partial_cmp(&other.log_magnitude),
                _ => other.log_magnitude.partial_cmp(&self.log_magnitude),
            },
            ord => Some(ord),
        }
    }
}

impl fmt::Display for SignedLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            0 => write!(f, "0"),
            s => write!(f, "{}exp({})", if s < 0 { "-" } else { "" }, self.log_magnitude.to_f64()),
        }
    }
}
