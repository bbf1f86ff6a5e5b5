//! Exact Rayleigh-Schrodinger orders `Psi_{n,k}(x) = P_{n,k}(x) exp(-x^2/2)` and
//! energies `E_{n,k}`.

mod oracle;
mod profiles;

pub use oracle::oscillator_oracle;
pub use profiles::{convergence_profile_a, convergence_profile_m, fixed_x_profile};

use rug::{Float, Rational};

use crate::error::{Error, Result};
use crate::numerics::Precision;
use crate::potential::Potential;

/// Default per-order size limit for the exact coefficients.
pub const DEFAULT_BYTE_BUDGET: usize = 64 << 20;

/// Bits of agreement required between two working precisions.
const STABLE_BITS: u32 = 40;
pub(crate) const PRECISION_CAP_FACTOR: u32 = 16;

/// The polynomial part of one order, stored densely over the powers of the
/// right parity: entry `j` is the coefficient of `x^(parity + 2j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveOrder {
    level: u32,
    order: u32,
    coeffs: Vec<Rational>,
}

impl WaveOrder {
    fn zeros(level: u32, order: u32) -> Self {
        let slots = (2 * order + level / 2 + 1) as usize;
        WaveOrder { level, order, coeffs: vec![Rational::new(); slots] }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn parity(&self) -> u32 {
        self.level % 2
    }

    /// `4k + n`.
    pub fn degree(&self) -> u32 {
        4 * self.order + self.level
    }

    /// `B_{k,l}`; zero for powers of the wrong parity or beyond the degree.
    pub fn coefficient(&self, l: u32) -> Rational {
        self.slot(l as i64).cloned().unwrap_or_default()
    }

    fn slot(&self, l: i64) -> Option<&Rational> {
        let parity = self.parity() as i64;
        if l < parity || (l - parity) % 2 != 0 {
            return None;
        }
        self.coeffs.get(((l - parity) / 2) as usize)
    }

    fn slot_index(&self, l: u32) -> usize {
        ((l - self.parity()) / 2) as usize
    }

    /// Nonzero `(l, B_{k,l})` pairs in increasing `l`.
    pub fn terms(&self) -> impl Iterator<Item = (u32, &Rational)> + '_ {
        let parity = self.parity();
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0)
            .map(move |(j, c)| (parity + 2 * j as u32, c))
    }

    pub fn leading_coefficient(&self) -> Rational {
        self.coefficient(self.degree())
    }

    /// Exact value of the polynomial part at a rational point.
    pub fn polynomial_at(&self, x: &Rational) -> Rational {
        let x2 = Rational::from(x.square_ref());
        let mut acc = Rational::new();
        for c in self.coeffs.iter().rev() {
            acc *= &x2;
            acc += c;
        }
        if self.parity() == 1 {
            acc *= x;
        }
        acc
    }

    /// Value of the polynomial part at `x`, Horner in `x^2` at the precision of `x`.
    pub fn polynomial_at_float(&self, x: &Float) -> Float {
        let bits = x.prec();
        let x2 = Float::with_val(bits, x.square_ref());
        let mut acc = Float::new(bits);
        for c in self.coeffs.iter().rev() {
            acc *= &x2;
            acc += Float::with_val(bits, c);
        }
        if self.parity() == 1 {
            acc *= x;
        }
        acc
    }

    fn approximate_bytes(&self) -> usize {
        self.coeffs
            .iter()
            .map(|c| (c.numer().significant_bits() + c.denom().significant_bits()) as usize / 8 + 16)
            .sum()
    }
}

/// Orders `0..=K` of one level together with the energies `E_{n,0..=K}`.
#[derive(Clone, Debug)]
pub struct PerturbationSeries {
    level: u32,
    potential: Potential,
    orders: Vec<WaveOrder>,
    energies: Vec<Rational>,
}

impl PerturbationSeries {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn max_order(&self) -> u32 {
        (self.orders.len() - 1) as u32
    }

    pub fn order(&self, k: u32) -> Option<&WaveOrder> {
        self.orders.get(k as usize)
    }

    pub fn orders(&self) -> &[WaveOrder] {
        &self.orders
    }

    pub fn energy(&self, k: u32) -> Option<&Rational> {
        self.energies.get(k as usize)
    }

    pub fn energies(&self) -> &[Rational] {
        &self.energies
    }

    pub(crate) fn require(&self, k: u32) -> Result<&WaveOrder> {
        self.order(k).ok_or_else(|| {
            Error::InvalidArgument(format!("order {k} requested but the series stops at {}", self.max_order()))
        })
    }

    /// Exact residual of the order-`k` equation at `x`, with the common
    /// `exp(-x^2/2)` removed:
    /// `-P_k''/2 + x P_k' + P_k/2 + sum_p a_{2p} x^{2p} P_{k-p+1} - sum_j E_j P_{k-j}`.
    pub fn residual_at(&self, k: u32, x: &Rational) -> Result<Rational> {
        let order = self.require(k)?;
        let mut r = Rational::new();
        for (l, c) in order.terms() {
            let t = (Rational::from(l) + Rational::from((1, 2))) * x_pow(x, l);
            r += Rational::from(c * &t);
            if l >= 2 {
                let second = Rational::from(l * (l - 1)) / 2u32;
                r -= Rational::from(c * &second) * x_pow(x, l - 2);
            }
        }
        for (p, a) in self.potential.terms() {
            if k + 1 >= p {
                let lower = &self.orders[(k + 1 - p) as usize];
                r += Rational::from(a * &lower.polynomial_at(x)) * x_pow(x, 2 * p);
            }
        }
        for j in 0..=k {
            let e = &self.energies[j as usize];
            r -= Rational::from(e * &self.orders[(k - j) as usize].polynomial_at(x));
        }
        Ok(r)
    }
}

fn x_pow(x: &Rational, n: u32) -> Rational {
    use rug::ops::Pow;
    Rational::from(x.pow(n))
}

/// Limits for [`compute_series_with_budget`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeriesBudget {
    pub bytes_per_order: usize,
}

impl Default for SeriesBudget {
    fn default() -> Self {
        SeriesBudget { bytes_per_order: DEFAULT_BYTE_BUDGET }
    }
}

pub fn compute_series(pot: &Potential, n: u32, max_order: u32) -> Result<PerturbationSeries> {
    compute_series_with_budget(pot, n, max_order, SeriesBudget::default())
}

/// Solves the order-by-order coefficient identity
///
/// `(l-n) B_{k,l} - (l+2)(l+1)/2 B_{k,l+2} + sum_p a_{2p} B_{k-p+1,l-2p} = sum_{j=1..k} E_j B_{k-j,l}`
///
/// descending in `l`. At `l = n` the pivot vanishes; with `B_{k,n} = 0` the
/// row gives `E_k` instead.
pub fn compute_series_with_budget(pot: &Potential, n: u32, max_order: u32, budget: SeriesBudget) -> Result<PerturbationSeries> {
    let mut orders = Vec::with_capacity(max_order as usize + 1);
    let mut energies = Vec::with_capacity(max_order as usize + 1);
    orders.push(ground_order(n));
    energies.push(Rational::from(n) + Rational::from((1, 2)));
    let terms: Vec<(u32, Rational)> = pot.terms().map(|(p, a)| (p, a.clone())).collect();

    for k in 1..=max_order {
        let mut cur = WaveOrder::zeros(n, k);
        let top = 4 * k + n;
        let mut l = top as i64;
        let mut e_k = Rational::new();
        while l >= 0 {
            let lu = l as u32;
            // Everything in the row except the pivot term and E_k B_{0,l}.
            let mut rhs = Rational::new();
            if let Some(up) = cur.slot(l + 2) {
                let f = Rational::from((lu + 2) * (lu + 1)) / 2u32;
                rhs += Rational::from(up * &f);
            }
            for (p, a) in &terms {
                if k + 1 < *p {
                    continue;
                }
                if let Some(b) = orders[(k + 1 - p) as usize].slot(l - 2 * *p as i64) {
                    rhs -= Rational::from(a * b);
                }
            }
            for j in 1..k {
                if let Some(b) = orders[(k - j) as usize].slot(l) {
                    rhs += Rational::from(&energies[j as usize] * b);
                }
            }
            if lu == n {
                e_k = -rhs;
            } else {
                if lu < n {
                    rhs += Rational::from(&e_k * &orders[0].coefficient(lu));
                }
                let pivot = Rational::from(lu as i64 - n as i64);
                let idx = cur.slot_index(lu);
                cur.coeffs[idx] = rhs / pivot;
            }
            l -= 2;
        }
        let bytes = cur.approximate_bytes();
        if bytes > budget.bytes_per_order {
            return Err(Error::OrderOverflow { order: k, bytes, budget: budget.bytes_per_order });
        }
        orders.push(cur);
        energies.push(e_k);
    }
    Ok(PerturbationSeries { level: n, potential: pot.clone(), orders, energies })
}

/// Order zero: `(l-n) B_l = (l+2)(l+1)/2 B_{l+2}` below `B_n = 1`, the monic
/// Hermite polynomial `He_n(sqrt 2 x) / 2^{n/2}`.
fn ground_order(n: u32) -> WaveOrder {
    let mut w = WaveOrder::zeros(n, 0);
    let top = w.slot_index(n);
    w.coeffs[top] = Rational::from(1);
    let mut l = n as i64 - 2;
    while l >= 0 {
        let lu = l as u32;
        let up = w.coeffs[w.slot_index(lu + 2)].clone();
        let f = Rational::from((lu + 2) * (lu + 1)) / 2u32;
        let idx = w.slot_index(lu);
        w.coeffs[idx] = up * f / Rational::from(lu as i64 - n as i64);
        l -= 2;
    }
    w
}

/// `Psi_{n,k}(x)`, certified: the value is recomputed at doubled precision until
/// two consecutive results agree to 40 bits, up to 16 times `prec`.
pub fn evaluate_order(series: &PerturbationSeries, k: u32, x: &Float, prec: Precision) -> Result<Float> {
    evaluate_order_with(series, k, |p| p.float(x), prec, PRECISION_CAP_FACTOR)
}

/// As [`evaluate_order`] with an explicit cap of `cap_factor * prec` bits.
pub fn evaluate_order_capped(series: &PerturbationSeries, k: u32, x: &Float, prec: Precision, cap_factor: u32) -> Result<Float> {
    evaluate_order_with(series, k, |p| p.float(x), prec, cap_factor)
}

/// As [`evaluate_order`], with the argument produced at each working precision.
pub(crate) fn evaluate_order_with<F>(series: &PerturbationSeries, k: u32, x_at: F, prec: Precision, cap_factor: u32) -> Result<Float>
where
    F: Fn(Precision) -> Float,
{
    let order = series.require(k)?;
    let value_at = |p: Precision| -> Float {
        let x = x_at(p);
        let poly = order.polynomial_at_float(&x);
        let gauss = (-Float::with_val(p.bits(), x.square_ref()) / 2u32).exp();
        poly * gauss
    };
    let cap = prec.times(cap_factor);
    let mut lo = prec;
    let mut v_lo = value_at(lo);
    loop {
        let hi = lo.times(2);
        if hi > cap {
            return Err(Error::PrecisionExhausted { cap_bits: cap.bits() });
        }
        let v_hi = value_at(hi);
        if agree(&v_lo, &v_hi) {
            return Ok(prec.float(&v_hi));
        }
        lo = hi;
        v_lo = v_hi;
    }
}

pub(crate) fn agree(a: &Float, b: &Float) -> bool {
    if b.is_zero() {
        return a.is_zero();
    }
    let bits = b.prec();
    let diff = Float::with_val(bits, a - b).abs();
    let scale = Float::with_val(bits, b.abs_ref()) >> STABLE_BITS;
    diff <= scale
}
