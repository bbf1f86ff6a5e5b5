use rug::Float;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RootOptions {
    /// Stop once the bracket is at most this wide.
    pub x_tol: f64,
    pub max_iterations: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions { x_tol: 1e-12, max_iterations: 2000 }
    }
}

/// Finds a zero of `f` inside `[lo, hi]`.
///
/// Regula falsi with the Illinois weight halving, falling back to a bisection
/// step whenever an iteration fails to halve the bracket. Fully deterministic.
/// Returns the bracket endpoint with the smaller `|f|` once the bracket width
/// is at most `tol`, or when it can no longer shrink at the working precision.
pub fn find_root_bracketed<F>(mut f: F, lo: &Float, hi: &Float, tol: f64) -> Result<Float>
where
    F: FnMut(&Float) -> Result<Float>,
{
    let opts = RootOptions { x_tol: tol, ..RootOptions::default() };
    let bits = lo.prec().max(hi.prec());
    let (mut a, mut b) = (Float::with_val(bits, lo), Float::with_val(bits, hi));
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    let mut fa = f(&a)?;
    if fa.is_zero() {
        return Ok(a);
    }
    let mut fb = f(&b)?;
    if fb.is_zero() {
        return Ok(b);
    }
    if fa.is_sign_negative() == fb.is_sign_negative() {
        return Err(Error::NoSignChange { lo: a.to_f64(), hi: b.to_f64() });
    }
    // Working copies for the secant step; the Illinois rule scales these.
    let (mut wa, mut wb) = (fa.clone(), fb.clone());
    let mut last_side = 0i8;
    let mut force_bisect = false;
    for _ in 0..opts.max_iterations {
        let width = Float::with_val(bits, &b - &a);
        if width <= opts.x_tol {
            break;
        }
        let mid = Float::with_val(bits, &a + &b) / 2u32;
        let mut x = if force_bisect {
            mid.clone()
        } else {
            let num = Float::with_val(bits, &a * &wb) - Float::with_val(bits, &b * &wa);
            let den = Float::with_val(bits, &wb - &wa);
            num / den
        };
        if !(x > a && x < b) {
            x = mid;
        }
        if x <= a || x >= b {
            break;
        }
        let fx = f(&x)?;
        if fx.is_zero() {
            return Ok(x);
        }
        if fx.is_sign_negative() == fb.is_sign_negative() {
            b = x;
            fb = fx.clone();
            wb = fx;
            if last_side == -1 {
                wa /= 2u32;
            }
            last_side = -1;
        } else {
            a = x;
            fa = fx.clone();
            wa = fx;
            if last_side == 1 {
                wb /= 2u32;
            }
            last_side = 1;
        }
        let new_width = Float::with_val(bits, &b - &a);
        force_bisect = new_width > width / 2u32;
    }
    if Float::with_val(bits, fa.abs_ref()) <= Float::with_val(bits, fb.abs_ref()) {
        Ok(a)
    } else {
        Ok(b)
    }
}
