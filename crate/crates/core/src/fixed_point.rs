//! Large-order behaviour at a fixed argument `x`.
//!
//! There the order `k` wave function tends to a universal profile `X_n(x)`
//! times `c^{n+1/2}/(2 pi) k! k^{n-1/2} / s_inf^{k+n+1/2}`. `X_n` solves the
//! oscillator equation driven by the unperturbed state,
//! `(-1/2 d^2 + x^2/2 - n - 1/2) X_n = cal_E_n Psi_{n,0}`, and the energies
//! grow with the same scale times `cal_E_n`.
//!
//! Writing `X_n = f_n exp(-x^2/2)`, every `f_n` lies in the module spanned by
//! `1`, `G(x) = int_0^x e^{t^2} erf(t) dt` and `E(x) = e^{x^2} erf(x)` over
//! polynomials. Differentiation stays inside it because `G' = E` and
//! `E' = 2xE + 2/sqrt(pi)`, so the whole ladder is built exactly.

use std::ops::{Add, AddAssign, Neg, Sub};

use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};
use crate::euclidean::{fixed_argument_scale, EuclideanConstants};
use crate::numerics::{erf_highprec, exp_square_erf, EndpointSingularity, Precision, Quadrature, QuadratureOptions, SignedLog};
use crate::recursion::{agree, PRECISION_CAP_FACTOR};

/// Above this `|x|` the antiderivative `G` is integrated with `e^{x^2}` factored out.
pub const SPLIT_POINT: u32 = 3;
const GUARD_BITS: u32 = 32;
const MAX_PANELS: usize = 4000;

/// `rational + inv_sqrt_pi / sqrt(pi)` with exact rational parts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SqrtPiRational {
    pub rational: Rational,
    pub inv_sqrt_pi: Rational,
}

impl SqrtPiRational {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_rational(r: Rational) -> Self {
        SqrtPiRational { rational: r, inv_sqrt_pi: Rational::new() }
    }

    /// `r / sqrt(pi)`.
    pub fn over_sqrt_pi(r: Rational) -> Self {
        SqrtPiRational { rational: Rational::new(), inv_sqrt_pi: r }
    }

    pub fn is_zero(&self) -> bool {
        self.rational == 0 && self.inv_sqrt_pi == 0
    }

    pub fn scale(&self, by: &Rational) -> Self {
        SqrtPiRational {
            rational: Rational::from(&self.rational * by),
            inv_sqrt_pi: Rational::from(&self.inv_sqrt_pi * by),
        }
    }

    pub fn to_float(&self, prec: Precision) -> Float {
        let work = prec.with_guard(GUARD_BITS);
        let root = work.pi().sqrt();
        let v = work.rational(&self.rational) + work.rational(&self.inv_sqrt_pi) / root;
        prec.float(&v)
    }
}

impl Add for SqrtPiRational {
    type Output = SqrtPiRational;
    fn add(mut self, rhs: SqrtPiRational) -> SqrtPiRational {
        self += &rhs;
        self
    }
}

impl AddAssign<&SqrtPiRational> for SqrtPiRational {
    fn add_assign(&mut self, rhs: &SqrtPiRational) {
        self.rational += &rhs.rational;
        self.inv_sqrt_pi += &rhs.inv_sqrt_pi;
    }
}

impl Sub for SqrtPiRational {
    type Output = SqrtPiRational;
    fn sub(self, rhs: SqrtPiRational) -> SqrtPiRational {
        self + (-rhs)
    }
}

impl Neg for SqrtPiRational {
    type Output = SqrtPiRational;
    fn neg(self) -> SqrtPiRational {
        SqrtPiRational { rational: -self.rational, inv_sqrt_pi: -self.inv_sqrt_pi }
    }
}

/// `p(x) + q(x) G(x) + r(x) E(x)`.
///
/// `p` has coefficients in the rationals extended by `1/sqrt(pi)`; `q` and `r`
/// stay rational under everything done here, which keeps the derivative
/// (it adds `2 r / sqrt(pi)` to `p`) inside the ring.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TripleForm {
    pub p: Vec<SqrtPiRational>,
    pub q: Vec<Rational>,
    pub r: Vec<Rational>,
}

fn poly_derivative(c: &[Rational]) -> Vec<Rational> {
    c.iter().enumerate().skip(1).map(|(i, a)| Rational::from(a * i as u32)).collect()
}

fn poly_add(a: &mut Vec<Rational>, b: &[Rational], scale: &Rational) {
    if a.len() < b.len() {
        a.resize(b.len(), Rational::new());
    }
    for (x, y) in a.iter_mut().zip(b) {
        *x += Rational::from(y * scale);
    }
}

fn poly_times_x(c: &[Rational]) -> Vec<Rational> {
    if c.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Rational::new()];
    out.extend(c.iter().cloned());
    out
}

fn trim<T: Default + PartialEq>(v: &mut Vec<T>) {
    while v.last().is_some_and(|c| *c == T::default()) {
        v.pop();
    }
}

fn poly_at(c: &[Rational], x: &Float, prec: Precision) -> Float {
    let mut acc = prec.zero();
    for a in c.iter().rev() {
        acc *= x;
        acc += prec.rational(a);
    }
    acc
}

impl TripleForm {
    pub fn is_zero(&self) -> bool {
        self.p.iter().all(SqrtPiRational::is_zero) && self.q.iter().all(|c| *c == 0) && self.r.iter().all(|c| *c == 0)
    }

    pub fn derivative(&self) -> TripleForm {
        let mut p: Vec<SqrtPiRational> =
            self.p.iter().enumerate().skip(1).map(|(i, a)| a.scale(&Rational::from(i as u32))).collect();
        if p.len() < self.r.len() {
            p.resize(self.r.len(), SqrtPiRational::zero());
        }
        for (slot, c) in p.iter_mut().zip(&self.r) {
            *slot += &SqrtPiRational::over_sqrt_pi(Rational::from(c * 2u32));
        }
        let q = poly_derivative(&self.q);
        let mut r = self.q.clone();
        poly_add(&mut r, &poly_derivative(&self.r), &Rational::from(1));
        poly_add(&mut r, &poly_times_x(&self.r), &Rational::from(2));
        let mut out = TripleForm { p, q, r };
        out.normalize();
        out
    }

    pub fn times_x(&self) -> TripleForm {
        let mut p = Vec::with_capacity(self.p.len() + 1);
        if !self.p.is_empty() {
            p.push(SqrtPiRational::zero());
            p.extend(self.p.iter().cloned());
        }
        TripleForm { p, q: poly_times_x(&self.q), r: poly_times_x(&self.r) }
    }

    pub fn scale(&self, by: &Rational) -> TripleForm {
        let mut out = TripleForm {
            p: self.p.iter().map(|c| c.scale(by)).collect(),
            q: self.q.iter().map(|c| Rational::from(c * by)).collect(),
            r: self.r.iter().map(|c| Rational::from(c * by)).collect(),
        };
        out.normalize();
        out
    }

    /// `self + by * other`.
    pub fn add_scaled(&self, other: &TripleForm, by: &Rational) -> TripleForm {
        let mut p = self.p.clone();
        if p.len() < other.p.len() {
            p.resize(other.p.len(), SqrtPiRational::zero());
        }
        for (slot, c) in p.iter_mut().zip(&other.p) {
            *slot += &c.scale(by);
        }
        let mut q = self.q.clone();
        poly_add(&mut q, &other.q, by);
        let mut r = self.r.clone();
        poly_add(&mut r, &other.r, by);
        let mut out = TripleForm { p, q, r };
        out.normalize();
        out
    }

    /// Adds `coeff * poly(x)` to the `p` part.
    pub fn add_to_polynomial(&mut self, poly: &[Rational], coeff: &SqrtPiRational) {
        if self.p.len() < poly.len() {
            self.p.resize(poly.len(), SqrtPiRational::zero());
        }
        for (slot, c) in self.p.iter_mut().zip(poly) {
            *slot += &coeff.scale(c);
        }
        self.normalize();
    }

    fn normalize(&mut self) {
        trim(&mut self.p);
        trim(&mut self.q);
        trim(&mut self.r);
    }

    /// Coefficient of `x^j` in the expansion at the origin.
    pub fn taylor_coefficient(&self, j: usize) -> SqrtPiRational {
        let (g, e) = taylor_tables(j);
        let mut out = self.p.get(j).cloned().unwrap_or_default();
        let mut over = Rational::new();
        for (i, c) in self.q.iter().enumerate().take(j + 1) {
            over += Rational::from(c * &g[j - i]);
        }
        for (i, c) in self.r.iter().enumerate().take(j + 1) {
            over += Rational::from(c * &e[j - i]);
        }
        out += &SqrtPiRational::over_sqrt_pi(over);
        out
    }

    /// Value at `x` given `G(x)` and `E(x)`.
    fn value_with(&self, x: &Float, g: &Float, e: &Float, prec: Precision) -> Float {
        let root = prec.pi().sqrt();
        let mut rat = prec.zero();
        let mut inv = prec.zero();
        for c in self.p.iter().rev() {
            rat *= x;
            rat += prec.rational(&c.rational);
            inv *= x;
            inv += prec.rational(&c.inv_sqrt_pi);
        }
        rat + inv / root + poly_at(&self.q, x, prec) * g + poly_at(&self.r, x, prec) * e
    }
}

/// Taylor coefficients of `G` and `E` at 0 up to `x^max`, in units of `1/sqrt(pi)`.
///
/// From `E' = 2xE + 2/sqrt(pi)`: `e_1 = 2`, `e_{j+1} = 2 e_{j-1} / (j+1)`; and `g_{j+1} = e_j / (j+1)`.
pub fn taylor_tables(max: usize) -> (Vec<Rational>, Vec<Rational>) {
    let mut e = vec![Rational::new(); max + 2];
    let mut g = vec![Rational::new(); max + 2];
    e[1] = Rational::from(2);
    for j in 1..=max {
        e[j + 1] = Rational::from(&e[j - 1] * 2u32) / (j as u32 + 1);
    }
    for j in 0..=max {
        g[j + 1] = Rational::from(&e[j] / (j as u32 + 1));
    }
    e.truncate(max + 1);
    g.truncate(max + 1);
    (g, e)
}

/// Monic Hermite polynomial: `h_{n+1} = x h_n - (n/2) h_{n-1}`, so that
/// `h_n exp(-x^2/2)` is the unperturbed level `n`.
pub fn hermite_monic(n: u32) -> Vec<Rational> {
    let mut prev: Vec<Rational> = Vec::new();
    let mut cur = vec![Rational::from(1)];
    for m in 0..n {
        let mut next = poly_times_x(&cur);
        poly_add(&mut next, &prev, &-Rational::from((m, 2)));
        prev = cur;
        cur = next;
    }
    cur
}

/// `cal_E_n = -2^{n+1} / (n! sqrt(pi))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LadderEnergy {
    level: u32,
    exact: SqrtPiRational,
}

impl LadderEnergy {
    pub fn new(level: u32) -> Self {
        let num = Integer::from(1) << (level + 1);
        let value = -Rational::from((num, crate::numerics::factorial(level)));
        LadderEnergy { level, exact: SqrtPiRational::over_sqrt_pi(value) }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn exact(&self) -> &SqrtPiRational {
        &self.exact
    }

    pub fn value(&self, prec: Precision) -> Float {
        self.exact.to_float(prec)
    }
}

/// `X_n = f_n exp(-x^2/2)` with `f_n` held exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LadderFunction {
    level: u32,
    form: TripleForm,
    shift: SqrtPiRational,
}

impl LadderFunction {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn form(&self) -> &TripleForm {
        &self.form
    }

    /// The multiple of the unperturbed state added to fix the normalization.
    pub fn shift(&self) -> &SqrtPiRational {
        &self.shift
    }

    /// `-1/2 f'' + x f' - n f - cal_E_n h_n`; identically zero when `X_n` solves
    /// the driven oscillator equation.
    pub fn residual(&self) -> TripleForm {
        let d1 = self.form.derivative();
        let d2 = d1.derivative();
        let mut out = d2.scale(&Rational::from((-1, 2)));
        out = out.add_scaled(&d1.times_x(), &Rational::from(1));
        out = out.add_scaled(&self.form, &-Rational::from(self.level));
        let energy = LadderEnergy::new(self.level);
        out.add_to_polynomial(&hermite_monic(self.level), &-energy.exact.clone());
        out
    }

    /// Value of `X_n(x)` from the Taylor expansion of `f_n` truncated after
    /// `x^degree`. Independent of the quadrature path used by [`eval_ladder`].
    pub fn taylor_value(&self, x: &Float, degree: usize, prec: Precision) -> Float {
        let work = prec.with_guard(GUARD_BITS);
        let (g, e) = taylor_tables(degree);
        let x = work.float(x);
        let mut rat = work.zero();
        let mut inv = work.zero();
        for j in (0..=degree).rev() {
            let mut over = Rational::new();
            for (i, c) in self.form.q.iter().enumerate().take(j + 1) {
                over += Rational::from(c * &g[j - i]);
            }
            for (i, c) in self.form.r.iter().enumerate().take(j + 1) {
                over += Rational::from(c * &e[j - i]);
            }
            let own = self.form.p.get(j).cloned().unwrap_or_default();
            over += &own.inv_sqrt_pi;
            rat *= &x;
            rat += work.rational(&own.rational);
            inv *= &x;
            inv += work.rational(&over);
        }
        let f = rat + inv / work.pi().sqrt();
        let gauss = (-work.float(x.square_ref()) / 2u32).exp();
        prec.float(&(f * gauss))
    }
}

/// Builds `X_n` by `X_{m+1} = (x - d/dx) X_m / (m+1)` from `X_0 = 2 G exp(-x^2/2)`,
/// then adds `C_n Psi_{n,0}` so that the `x^n` Taylor coefficient of
/// `X_n exp(x^2/2)` vanishes.
pub fn build_ladder(n: u32) -> LadderFunction {
    let mut f = TripleForm { p: Vec::new(), q: vec![Rational::from(2)], r: Vec::new() };
    for m in 0..n {
        // exp(x^2/2) (x - d/dx) [f exp(-x^2/2)] = 2x f - f'.
        let raised = f.times_x().scale(&Rational::from(2)).add_scaled(&f.derivative(), &Rational::from(-1));
        f = raised.scale(&Rational::from((1, m + 1)));
    }
    let shift = -f.taylor_coefficient(n as usize);
    f.add_to_polynomial(&hermite_monic(n), &shift);
    LadderFunction { level: n, form: f, shift }
}

fn quadrature(prec: Precision) -> Quadrature {
    let rel = 2f64.powi(-(prec.bits().min(1000) as i32)).max(f64::MIN_POSITIVE);
    Quadrature::new(prec, QuadratureOptions { abs_tol: 0.0, rel_tol: rel, max_subdivisions: MAX_PANELS })
}

/// `G(x) = int_0^x e^{t^2} erf(t) dt` by quadrature; even in `x`.
///
/// Up to `|x| = 3` the integrand is used directly. Beyond, the remainder is
/// written as `e^{x^2} int_3^x e^{t^2 - x^2} erf(t) dt` so the integrand stays
/// below 1.
pub fn erf_antiderivative(x: &Float, prec: Precision) -> Result<Float> {
    let work = prec.with_guard(GUARD_BITS);
    let quad = quadrature(work);
    let ax = work.float(x.abs_ref());
    let split = work.float(SPLIT_POINT);
    let inner_end = if ax < split { ax.clone() } else { split.clone() };
    let inner = quad.integrate(|t| Ok(exp_square_erf(t, work)), &work.zero(), &inner_end, EndpointSingularity::None)?;
    if ax <= split {
        return Ok(prec.float(&inner));
    }
    let x2 = work.float(ax.square_ref());
    let outer = quad.integrate(
        |t| {
            let t2 = work.float(t.square_ref());
            Ok((t2 - &x2).exp() * erf_highprec(t, work))
        },
        &split,
        &ax,
        EndpointSingularity::None,
    )?;
    Ok(prec.float(&(inner + outer * x2.exp())))
}

fn ladder_value_at(l: &LadderFunction, x: &Float, prec: Precision) -> Result<Float> {
    let work = prec.with_guard(GUARD_BITS);
    let x = work.float(x);
    let g = erf_antiderivative(&x, work)?;
    let e = exp_square_erf(&x, work);
    let f = l.form.value_with(&x, &g, &e, work);
    let gauss = (-work.float(x.square_ref()) / 2u32).exp();
    Ok(prec.float(&(f * gauss)))
}

/// `X_n(x)`, recomputed at doubled precision until two values agree to 40 bits.
pub fn eval_ladder(l: &LadderFunction, x: &Float, prec: Precision) -> Result<Float> {
    eval_ladder_capped(l, x, prec, PRECISION_CAP_FACTOR)
}

/// As [`eval_ladder`] with an explicit cap of `cap_factor * prec` bits.
pub fn eval_ladder_capped(l: &LadderFunction, x: &Float, prec: Precision, cap_factor: u32) -> Result<Float> {
    if !x.is_finite() {
        return Err(Error::InvalidArgument("ladder argument must be finite".into()));
    }
    let cap = prec.times(cap_factor);
    let mut lo = prec;
    let mut v_lo = ladder_value_at(l, x, lo)?;
    loop {
        let hi = lo.times(2);
        if hi > cap {
            return Err(Error::PrecisionExhausted { cap_bits: cap.bits() });
        }
        let v_hi = ladder_value_at(l, x, hi)?;
        if agree(&v_lo, &v_hi) {
            return Ok(prec.float(&v_hi));
        }
        lo = hi;
        v_lo = v_hi;
    }
}

/// `X_0` rescaled to start as `x^2 + ...`: `sqrt(pi) G(x) exp(-x^2/2)`.
pub fn ground_profile_normalized(x: &Float, prec: Precision) -> Result<Float> {
    let x0 = eval_ladder(&build_ladder(0), x, prec)?;
    let root = prec.with_guard(GUARD_BITS).pi().sqrt();
    Ok(prec.float(&(x0 * root / 2u32)))
}

/// Large-order energy `E_{n,k} ~ c^{n+1/2}/(2 pi) k! k^{n-1/2} / s_inf^{k+n+1/2} cal_E_n`.
pub fn energy_asymptotic(consts: &EuclideanConstants, n: u32, k: u32, prec: Precision) -> Result<SignedLog> {
    if k == 0 {
        return Err(Error::InvalidArgument("the energy asymptote needs k >= 1".into()));
    }
    let scale = fixed_argument_scale(consts, n, k, prec);
    let energy = SignedLog::from_float(&LadderEnergy::new(n).value(prec));
    Ok(&scale * &energy)
}

/// Ground-state energy asymptote of `V = Q^2/2 - Q^4` in closed form:
/// `-(sqrt 6 / pi^{3/2}) 3^k k! / sqrt k`.
pub fn quartic_energy_asymptotic(k: u32, prec: Precision) -> Result<SignedLog> {
    if k == 0 {
        return Err(Error::InvalidArgument("the energy asymptote needs k >= 1".into()));
    }
    let bits = prec.bits();
    let mut log = prec.float(6).ln() / 2u32;
    log -= prec.pi().ln() * Float::with_val(bits, 1.5);
    log += prec.float(3).ln() * k;
    log -= prec.float(k).ln() / 2u32;
    Ok(-(&SignedLog::factorial(k, prec) * &SignedLog::exp(log)))
}

/// `Psi_{n,k}(x) ~ c^{n+1/2}/(2 pi) k! k^{n-1/2} / s_inf^{k+n+1/2} X_n(x)` at fixed `x`.
pub fn wave_fixed_x_asymptotic(
    consts: &EuclideanConstants,
    ladder: &LadderFunction,
    k: u32,
    x: &Float,
    prec: Precision,
) -> Result<SignedLog> {
    if k == 0 {
        return Err(Error::InvalidArgument("the fixed-x asymptote needs k >= 1".into()));
    }
    let profile = eval_ladder(ladder, x, prec)?;
    let scale = fixed_argument_scale(consts, ladder.level(), k, prec);
    Ok(&scale * &SignedLog::from_float(&profile))
}
