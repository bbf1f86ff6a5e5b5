//! Rescaled views of the exact orders used to watch them approach their
//! large-order limits.

use rug::Float;

use super::{evaluate_order, evaluate_order_with, PerturbationSeries, PRECISION_CAP_FACTOR};
use crate::error::{Error, Result};
use crate::numerics::{Precision, SignedLog};

/// `Psi_{n,k}(xi sqrt k)`, certified.
fn value_at_scaled(series: &PerturbationSeries, k: u32, xi: &Float, prec: Precision) -> Result<Float> {
    evaluate_order_with(series, k, |p| p.float(xi) * p.float(k).sqrt(), prec, PRECISION_CAP_FACTOR)
}

/// `A_k(xi) = -(1/k) ln |Psi_{n,k}(xi sqrt k) / k!|`.
pub fn convergence_profile_a(series: &PerturbationSeries, k: u32, xi: &Float, prec: Precision) -> Result<Float> {
    if k == 0 {
        return Err(Error::InvalidArgument("A_k needs k >= 1".into()));
    }
    let v = value_at_scaled(series, k, xi, prec)?;
    if v.is_zero() {
        return Err(Error::ZeroValue { order: k });
    }
    let ln_v = SignedLog::from_float(&v);
    let ln_fact = SignedLog::factorial(k, prec);
    let ratio = &ln_v / &ln_fact;
    let ln = prec.float(ratio.ln_abs().expect("nonzero"));
    Ok(-ln / k)
}

/// `M_k(xi) = Psi_{n,k}(xi sqrt k) / ((k-1)! exp(-k A(xi)))`.
pub fn convergence_profile_m(
    series: &PerturbationSeries,
    k: u32,
    xi: &Float,
    a_of_xi: &Float,
    prec: Precision,
) -> Result<Float> {
    if k == 0 {
        return Err(Error::InvalidArgument("M_k needs k >= 1".into()));
    }
    let v = value_at_scaled(series, k, xi, prec)?;
    if v.is_zero() {
        return Ok(prec.zero());
    }
    let num = SignedLog::from_float(&v);
    let den = &SignedLog::factorial(k - 1, prec) * &SignedLog::exp(-prec.float(a_of_xi) * k);
    Ok((&num / &den).to_float(prec))
}

/// `Psi_{0,k}(x) / B_{k,2}`: the order rescaled to start as `x^2 + ...` after
/// removing `exp(-x^2/2)`.
pub fn fixed_x_profile(series: &PerturbationSeries, k: u32, x: &Float, prec: Precision) -> Result<Float> {
    if series.level() != 0 {
        return Err(Error::InvalidArgument("the fixed-x profile is defined for the ground state".into()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("the fixed-x profile needs k >= 1".into()));
    }
    let order = series.require(k)?;
    let norm = order.coefficient(2);
    if norm == 0 {
        return Err(Error::ZeroNormalizer { order: k });
    }
    let v = evaluate_order(series, k, x, prec)?;
    Ok(v / prec.rational(&norm))
}
