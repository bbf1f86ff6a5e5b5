use rug::Float;

use super::Precision;

const GUARD_BITS: u32 = 32;
// The series has positive terms, so it is stable at any argument; past this
// point the continued fraction needs fewer terms.
const SERIES_LIMIT: f64 = 6.0;

/// `erf(x)` with relative error below `2^(8-P)`.
///
/// Positive-term series `e^{-x^2} sum 2^n x^{2n+1} / (2n+1)!!` for `|x| <= 6`,
/// continued fraction for `erfc` beyond.
pub fn erf_highprec(x: &Float, prec: Precision) -> Float {
    let work = prec.with_guard(GUARD_BITS);
    let ax = work.float(x.abs_ref());
    let value = if ax.is_zero() {
        return prec.zero();
    } else if ax <= SERIES_LIMIT {
        let e = (-work.float(ax.square_ref())).exp();
        series_part(&ax, work) * e
    } else {
        let tail = erfc_scaled_cf(&ax, work);
        let e = (-work.float(ax.square_ref())).exp();
        work.float(1) - tail * e
    };
    let v = prec.float(&value);
    if x.is_sign_negative() { -v } else { v }
}

/// `e^{x^2} erf(x)`, evaluated without forming `e^{-x^2}` and its inverse for
/// small `|x|`.
pub(crate) fn exp_square_erf(x: &Float, prec: Precision) -> Float {
    let work = prec.with_guard(GUARD_BITS);
    let ax = work.float(x.abs_ref());
    if ax.is_zero() {
        return prec.zero();
    }
    let value = if ax <= SERIES_LIMIT {
        series_part(&ax, work)
    } else {
        let e = work.float(ax.square_ref()).exp();
        e - erfc_scaled_cf(&ax, work)
    };
    let v = prec.float(&value);
    if x.is_sign_negative() { -v } else { v }
}

/// `(2/sqrt(pi)) sum_{n>=0} 2^n x^{2n+1} / (2n+1)!!` for `x >= 0`.
fn series_part(x: &Float, work: Precision) -> Float {
    let bits = work.bits();
    let two_x2 = Float::with_val(bits, x.square_ref()) * 2u32;
    let mut term = x.clone();
    let mut sum = x.clone();
    let stop = Float::with_val(bits, 1) >> bits;
    let mut n: u32 = 0;
    loop {
        term *= &two_x2;
        term /= 2 * n + 3;
        sum += &term;
        n += 1;
        if term < Float::with_val(bits, &sum * &stop) {
            break;
        }
    }
    let two_over_sqrt_pi = Float::with_val(bits, work.pi().sqrt().recip()) * 2u32;
    sum * two_over_sqrt_pi
}

/// `e^{x^2} erfc(x)` for `x > 0` via the continued fraction
/// `1/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))`, modified Lentz.
fn erfc_scaled_cf(x: &Float, work: Precision) -> Float {
    let bits = work.bits();
    let tiny = Float::with_val(bits, 1) >> (4 * bits);
    let eps = Float::with_val(bits, 1) >> bits;
    let mut f = x.clone();
    let mut c = x.clone();
    let mut d = Float::new(bits);
    for j in 1u32..5_000_000 {
        let a = Float::with_val(bits, j) / 2u32;
        d = Float::with_val(bits, &a * &d) + x;
        if d.is_zero() {
            d = tiny.clone();
        }
        d = d.recip();
        c = Float::with_val(bits, &a / &c) + x;
        if c.is_zero() {
            c = tiny.clone();
        }
        let delta = Float::with_val(bits, &c * &d);
        f *= &delta;
        if Float::with_val(bits, delta - 1u32).abs() < eps {
            break;
        }
    }
    let sqrt_pi = work.pi().sqrt();
    (f * sqrt_pi).recip()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mpfr_erf(x: f64, bits: u32) -> Float {
        Float::with_val(bits, x).erf()
    }

    #[test]
    fn known_values() {
        let p = Precision::DEFAULT;
        assert!(erf_highprec(&p.zero(), p).is_zero());
        let one = erf_highprec(&p.float(1), p);
        assert!((one.to_f64() - 0.842_700_792_949_714_9).abs() < 1e-16);
        let three = erf_highprec(&p.float(3), p);
        assert!(three > 0.99997 && three < 1.0);
    }

    #[test]
    fn odd_symmetry_is_exact() {
        let p = Precision::DEFAULT;
        let a = erf_highprec(&p.float(0.7), p);
        let b = erf_highprec(&p.float(-0.7), p);
        assert!((a + b).is_zero());
    }

    #[test]
    fn agrees_with_reference_on_both_sides_of_the_switch() {
        for &bits in &[128u32, 256, 1024] {
            let p = Precision::new(bits);
            for &x in &[0.01, 0.5, 1.3, 2.0, 2.7, 3.5, 5.99, 6.0, 6.01, 8.5] {
                let ours = erf_highprec(&p.float(x), p);
                let reference = mpfr_erf(x, bits);
                let rel = (Float::with_val(bits, &ours - &reference) / &reference).abs();
                let bound = Float::with_val(bits, 1) >> (bits - 8);
                assert!(rel <= bound, "x={x} bits={bits} rel={}", rel.to_f64());
            }
        }
    }

    #[test]
    fn scaled_form_matches_product() {
        let p = Precision::DEFAULT;
        for &x in &[0.3, 1.7, 2.5, 4.0] {
            let s = exp_square_erf(&p.float(x), p);
            let x256 = Float::with_val(256, x);
            let r = mpfr_erf(x, 256) * Float::with_val(256, x256.square_ref()).exp();
            let rel = (Float::with_val(128, &s - &r) / &r).abs();
            assert!(rel < 1e-34, "x={x}");
        }
    }
}
