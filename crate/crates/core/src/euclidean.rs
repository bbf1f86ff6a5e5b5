//! The zero-energy euclidean trajectory in the inverted potential and the
//! scaled-argument asymptotics built on it.
//!
//! The trajectory is parameterized by `Q` on two branches. With
//! `2V = Q^2 (1 + w(Q))`, the rising branch has
//!
//! * `tau(Q) = ln Q + int_0^Q (1/sqrt(2V) - 1/q) dq`
//! * `lambda(Q) = int_0^Q (V - qV'/2) / sqrt(2V) dq`
//! * `s = lambda + Q P / 2`, `P = sqrt(2V)`
//!
//! and the falling branch is obtained from `tau -> ln c - tau`,
//! `s -> s_inf - s`, `P -> -P`. Above `Q+/2` every integral is taken from the
//! turning point downward, where the integrands have an inverse square root.

use rug::Float;

use crate::error::{Error, Result};
use crate::numerics::{find_root_bracketed, EndpointSingularity, Precision, Quadrature, QuadratureOptions, SignedLog};
use crate::potential::Potential;

/// Number of trajectory samples used to invert `xi`.
pub const XI_GRID_POINTS: usize = 512;
/// The sampled trajectory stops at `Q = Q+ * 1e-6` on both branches.
pub const GRID_DEPTH: f64 = 1e6;
/// `kxi^2` below this marks the wave asymptote as outside its regime.
pub const SMALL_ARGUMENT_THRESHOLD: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    Rising,
    Falling,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Rising => "rising",
            Branch::Falling => "falling",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EuclideanConstants {
    pub q_plus: Float,
    /// Full bounce action `2 int_0^{Q+} sqrt(2V)`.
    pub s_infinity: Float,
    /// `exp(2 tau_turn)`; the falling branch satisfies `tau = ln c - tau_rising`.
    pub c: Float,
    pub tau_turn: Float,
}

/// One point of the trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct EuclideanPoint {
    pub branch: Branch,
    pub q: Float,
    /// Velocity `dQ/dtau`.
    pub p: Float,
    pub tau: Float,
    pub s: Float,
    pub lambda: Float,
    pub lambda_dot: Float,
    pub xi: Float,
    pub a: Float,
}

impl EuclideanPoint {
    /// `Q lambda_dot / 2 - lambda P`.
    pub fn radicand(&self) -> Float {
        let bits = self.q.prec();
        Float::with_val(bits, &self.q * &self.lambda_dot) / 2u32 - Float::with_val(bits, &self.lambda * &self.p)
    }

    /// `S(kappa, eta) = kappa (s/lambda + ln(lambda/kappa))` for `eta/sqrt(kappa) = xi`.
    pub fn action(&self, kappa: &Float) -> Float {
        let bits = self.q.prec();
        let ratio = Float::with_val(bits, &self.s / &self.lambda);
        let log = (Float::with_val(bits, &self.lambda / kappa)).ln();
        (ratio + log) * kappa
    }
}

/// How a point on the trajectory is addressed.
#[derive(Clone, Debug, PartialEq)]
pub enum PointSelector {
    ByQ { q: Float, branch: Branch },
    ByTau(Float),
    ByXi(Float),
}

/// `Psi_{n,k}(xi sqrt k)` predicted from the trajectory, with a flag for
/// `k xi^2 < 4`, where the prediction is outside its regime.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveAsymptotic {
    pub value: SignedLog,
    pub small_argument: bool,
}

/// A row of the `(kappa, eta)` family at fixed `p_kappa`.
#[derive(Clone, Debug, PartialEq)]
pub struct KappaEtaRow {
    pub kappa: Float,
    pub eta: Float,
    pub tau: Float,
    pub branch: Branch,
}

/// The trajectory of one potential at one working precision, with the
/// `xi` samples used for inversion.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pot: Potential,
    prec: Precision,
    quad: Quadrature,
    work: Integrands,
    consts: EuclideanConstants,
    /// `(theta, xi)` with `theta <= 0` rising (`Q = Q+ e^theta`) and `theta > 0`
    /// falling (`Q = Q+ e^-theta`); `xi` is strictly decreasing for single-valued
    /// profiles.
    grid: Vec<(Float, Float)>,
}

/// A solved rising-branch time, kept to continue the next solve from.
#[derive(Clone, Debug)]
struct TimeAnchor {
    /// `ln(Q/Q+)`.
    y: Float,
    q: Float,
    /// `int_0^Q (1/sqrt(2V) - 1/q) dq`.
    regular: Float,
    tau: Float,
}

/// Quadrature tolerance for trajectory integrals at `prec`.
fn trajectory_options(prec: Precision) -> QuadratureOptions {
    let tol = (Float::with_val(64, 1) >> (3 * prec.bits() / 4)).to_f64();
    QuadratureOptions { abs_tol: tol, rel_tol: tol, max_subdivisions: 4000 }
}

/// Computes `Q+`, `s_inf`, `c` and `tau_turn`.
pub fn euclidean_constants(pot: &Potential, prec: Precision) -> Result<EuclideanConstants> {
    let work = Integrands::new(pot, prec)?;
    let quad = Quadrature::new(prec, trajectory_options(prec));
    work.constants(&quad)
}

/// Integrands of the trajectory quadratures.
///
/// Near the turning point `1 + w = 2V/q^2` is evaluated in factored form
/// `2 (q^2 - Q+^2) r(q^2)` from the exact gap `Q+ - q`, which avoids the
/// cancellation in `1 + w` itself.
#[derive(Clone, Debug)]
struct Integrands {
    pot: Potential,
    prec: Precision,
    q_plus: Float,
    /// Coefficients of `r(z)` in `V/q^2 = (z - Q+^2) r(z)`, `z = q^2`, lowest first.
    quotient: Vec<Float>,
}

impl Integrands {
    fn new(pot: &Potential, prec: Precision) -> Result<Self> {
        let q_plus = pot.turning_point(prec)?;
        let bits = prec.bits();
        let z_plus = Float::with_val(bits, q_plus.square_ref());
        let degree = pot.terms().map(|(p, _)| p - 1).max().unwrap_or(1) as usize;
        let mut reduced = vec![prec.zero(); degree + 1];
        reduced[0] = prec.float(0.5);
        for (p, a) in pot.terms() {
            reduced[(p - 1) as usize] = prec.rational(a);
        }
        let mut quotient = vec![prec.zero(); degree];
        quotient[degree - 1] = reduced[degree].clone();
        for j in (1..degree).rev() {
            quotient[j - 1] = Float::with_val(bits, &z_plus * &quotient[j]) + &reduced[j];
        }
        Ok(Integrands { pot: pot.clone(), prec, q_plus, quotient })
    }

    fn bits(&self) -> u32 {
        self.prec.bits()
    }

    /// `sqrt(1 + w) = sqrt(2V)/q`.
    fn root(&self, q: &Float) -> Float {
        let h = self.pot.reduced(q) * 2u32;
        if h.is_sign_negative() {
            // Only reachable within rounding of the turning point.
            return self.prec.zero();
        }
        h.sqrt()
    }

    /// `sqrt(1 + w)` at `q = Q+ - gap`.
    fn root_from_gap(&self, q: &Float, gap: &Float) -> Float {
        let bits = self.bits();
        let z = Float::with_val(bits, q.square_ref());
        let mut r = self.prec.zero();
        for c in self.quotient.iter().rev() {
            r *= &z;
            r += c;
        }
        let sum = Float::with_val(bits, &self.q_plus * 2u32) - gap;
        let h = -(Float::with_val(bits, gap * &sum) * r * 2u32);
        if h.is_sign_negative() {
            return self.prec.zero();
        }
        h.sqrt()
    }

    /// `sqrt(1 + w)` at `q`, using the factored form above `Q+/2`.
    fn root_at(&self, q: &Float) -> Float {
        let half = Float::with_val(self.bits(), &self.q_plus / 2u32);
        if *q > half {
            let gap = Float::with_val(self.bits(), &self.q_plus - q);
            self.root_from_gap(q, &gap)
        } else {
            self.root(q)
        }
    }

    /// `w/q = 2 sum a_{2p} q^{2p-3}`, a polynomial.
    fn w_over_q(&self, q: &Float) -> Float {
        let bits = self.bits();
        let q2 = Float::with_val(bits, q.square_ref());
        let mut acc = Float::new(bits);
        for (p, a) in self.pot.terms() {
            acc += Float::with_val(bits, q * Float::with_val(bits, rug::ops::Pow::pow(&q2, p - 2))) * a;
        }
        acc * 2u32
    }

    /// `1/sqrt(2V) - 1/q` written without cancellation at small `q`.
    fn tau_regular(&self, q: &Float) -> Float {
        let r = self.root(q);
        let denom = Float::with_val(self.bits(), &r + 1u32) * &r;
        -(self.w_over_q(q) / denom)
    }

    /// `sqrt(2V)` at `q`.
    fn velocity(&self, q: &Float) -> Float {
        Float::with_val(self.bits(), q * &self.root_at(q))
    }

    /// `sum a_{2p}(1-p) q^{2p-1}`, which is `(V - qV'/2)/q`.
    fn lambda_rate_over_q(&self, q: &Float) -> Float {
        let bits = self.bits();
        let q2 = Float::with_val(bits, q.square_ref());
        let mut acc = Float::new(bits);
        for (p, a) in self.pot.terms() {
            let t = Float::with_val(bits, q * Float::with_val(bits, rug::ops::Pow::pow(&q2, p - 1))) * a;
            acc -= t * (p - 1);
        }
        acc
    }

    fn constants(&self, quad: &Quadrature) -> Result<EuclideanConstants> {
        let bits = self.bits();
        let q_plus = self.q_plus.clone();
        let half = Float::with_val(bits, &q_plus / 2u32);
        let zero = self.prec.zero();
        let s_low = quad.integrate(|q| Ok(self.velocity(q)), &zero, &half, EndpointSingularity::None)?;
        let s_high = quad.integrate_with_gap(
            |q, gap| Ok(Float::with_val(bits, q * &self.root_from_gap(q, gap))),
            &half,
            &q_plus,
            EndpointSingularity::InverseSqrtAtB,
        )?;
        let s_infinity = (s_low + s_high) * 2u32;
        let i_low = quad.integrate(|q| Ok(self.tau_regular(q)), &zero, &half, EndpointSingularity::SimplePoleSubtractedAtA)?;
        let i_high = quad.integrate_with_gap(
            |q, gap| {
                let full = Float::with_val(bits, q * &self.root_from_gap(q, gap)).recip();
                Ok(full - Float::with_val(bits, q.recip_ref()))
            },
            &half,
            &q_plus,
            EndpointSingularity::InverseSqrtAtB,
        )?;
        let tau_turn = Float::with_val(bits, q_plus.ln_ref()) + i_low + i_high;
        let c = Float::with_val(bits, &tau_turn * 2u32).exp();
        Ok(EuclideanConstants { q_plus, s_infinity, c, tau_turn })
    }
}

impl Trajectory {
    pub fn new(pot: &Potential, prec: Precision) -> Result<Self> {
        let quad = Quadrature::new(prec, trajectory_options(prec));
        let work = Integrands::new(pot, prec)?;
        let consts = work.constants(&quad)?;
        let mut traj = Trajectory { pot: pot.clone(), prec, quad, work, consts, grid: Vec::new() };
        let depth = prec.float(GRID_DEPTH).ln();
        let mut grid = Vec::with_capacity(XI_GRID_POINTS);
        for i in 0..XI_GRID_POINTS {
            let frac = prec.float(i as u32) / (XI_GRID_POINTS as u32 - 1);
            let theta = Float::with_val(prec.bits(), &depth * (frac * 2u32 - 1u32));
            let xi = traj.xi_at_theta(&theta)?;
            grid.push((theta, xi));
        }
        traj.grid = grid;
        Ok(traj)
    }

    pub fn constants(&self) -> &EuclideanConstants {
        &self.consts
    }

    pub fn potential(&self) -> &Potential {
        &self.pot
    }

    pub fn precision(&self) -> Precision {
        self.prec
    }

    fn bits(&self) -> u32 {
        self.prec.bits()
    }

    fn half_turn(&self) -> Float {
        Float::with_val(self.bits(), &self.consts.q_plus / 2u32)
    }

    /// `int_0^Q (1/sqrt(2V) - 1/q) dq` for `0 < Q <= Q+`, so that the rising
    /// time is `ln Q` plus this.
    pub fn regular_time(&self, q: &Float) -> Result<Float> {
        let f = &self.work;
        let bits = self.bits();
        if *q <= self.half_turn() {
            self.quad.integrate(|t| Ok(f.tau_regular(t)), &self.prec.zero(), q, EndpointSingularity::SimplePoleSubtractedAtA)
        } else {
            let tail = self.quad.integrate_with_gap(
                |t, gap| Ok(Float::with_val(bits, t * &f.root_from_gap(t, gap)).recip()),
                q,
                &self.consts.q_plus,
                EndpointSingularity::InverseSqrtAtB,
            )?;
            let ln_q = Float::with_val(self.bits(), q.ln_ref());
            Ok(Float::with_val(self.bits(), &self.consts.tau_turn - &tail) - ln_q)
        }
    }

    /// Rising-branch `tau(Q)`.
    fn rising_time(&self, q: &Float) -> Result<Float> {
        Ok(self.regular_time(q)? + Float::with_val(self.bits(), q.ln_ref()))
    }

    /// Rising-branch `lambda(Q)`.
    fn rising_lambda(&self, q: &Float) -> Result<Float> {
        let f = &self.work;
        if *q <= self.half_turn() {
            self.quad
                .integrate(|t| Ok(f.lambda_rate_over_q(t) / f.root(t)), &self.prec.zero(), q, EndpointSingularity::None)
        } else {
            let tail = self.quad.integrate_with_gap(
                |t, gap| Ok(f.lambda_rate_over_q(t) / f.root_from_gap(t, gap)),
                q,
                &self.consts.q_plus,
                EndpointSingularity::InverseSqrtAtB,
            )?;
            Ok(Float::with_val(self.bits(), &self.consts.s_infinity / 2u32) - tail)
        }
    }

    fn check_q(&self, q: &Float) -> Result<()> {
        if !(q.is_finite() && *q > 0 && *q <= self.consts.q_plus) {
            return Err(Error::OutOfRange { what: "Q", value: q.to_f64() });
        }
        Ok(())
    }

    /// `lambda` and the rising velocity at `Q` on `branch`, without the time integral.
    pub(crate) fn lambda_at(&self, q: &Float, branch: Branch) -> Result<(Float, Float)> {
        let bits = self.bits();
        let lam_rise = self.rising_lambda(q)?;
        let p_rise = self.work.velocity(q);
        let lam = match branch {
            Branch::Rising => lam_rise,
            Branch::Falling => {
                // s_fall = s_inf - s_rise, lambda_fall = s_fall + Q P_rise / 2 = s_inf - lambda_rise
                Float::with_val(bits, &self.consts.s_infinity - &lam_rise)
            }
        };
        Ok((lam, p_rise))
    }

    pub fn point_by_q(&self, q: &Float, branch: Branch) -> Result<EuclideanPoint> {
        self.check_q(q)?;
        let bits = self.bits();
        let q = self.prec.float(q);
        let (lambda, p_rise) = self.lambda_at(&q, branch)?;
        let tau_rise = self.rising_time(&q)?;
        let half_qp = Float::with_val(bits, &q * &p_rise) / 2u32;
        let (p, tau, s) = match branch {
            Branch::Rising => (p_rise, tau_rise, Float::with_val(bits, &lambda + &half_qp)),
            Branch::Falling => {
                let tau = Float::with_val(bits, self.consts.c.ln_ref()) - tau_rise;
                (-p_rise, tau, Float::with_val(bits, &lambda - &half_qp))
            }
        };
        let lambda_dot = self.pot.values(&q).lambda_rate;
        let xi = Float::with_val(bits, &q / Float::with_val(bits, lambda.sqrt_ref()));
        let a = Float::with_val(bits, &s / &lambda) + Float::with_val(bits, lambda.ln_ref()) - 1u32;
        Ok(EuclideanPoint { branch, q, p, tau, s, lambda, lambda_dot, xi, a })
    }

    fn q_of_theta(&self, theta: &Float) -> (Float, Branch) {
        let bits = self.bits();
        if *theta <= 0 {
            (Float::with_val(bits, theta.exp_ref()) * &self.consts.q_plus, Branch::Rising)
        } else {
            (Float::with_val(bits, (-theta.clone()).exp_ref()) * &self.consts.q_plus, Branch::Falling)
        }
    }

    /// Point at trajectory parameter `theta`: `Q = Q+ e^theta` rising for
    /// `theta <= 0`, `Q = Q+ e^-theta` falling for `theta > 0`.
    pub fn point_by_theta(&self, theta: &Float) -> Result<EuclideanPoint> {
        let (q, branch) = self.q_of_theta(theta);
        self.point_by_q(&q, branch)
    }

    fn xi_at_theta(&self, theta: &Float) -> Result<Float> {
        let (q, branch) = self.q_of_theta(theta);
        let (lam, _) = self.lambda_at(&q, branch)?;
        Ok(q / lam.sqrt())
    }

    pub fn point_by_tau(&self, tau: &Float) -> Result<EuclideanPoint> {
        if !tau.is_finite() {
            return Err(Error::OutOfRange { what: "tau", value: tau.to_f64() });
        }
        let bits = self.bits();
        let tau = self.prec.float(tau);
        let (target, branch) = if tau <= self.consts.tau_turn {
            (tau.clone(), Branch::Rising)
        } else {
            (Float::with_val(bits, self.consts.c.ln_ref()) - &tau, Branch::Falling)
        };
        // Solve tau_rise(Q+ e^y) = target for y <= 0; tau_rise(Q) ~ ln Q for small Q.
        let ln_qp = Float::with_val(bits, self.consts.q_plus.ln_ref());
        let f = |y: &Float| -> Result<Float> {
            let q = Float::with_val(bits, y.exp_ref()) * &self.consts.q_plus;
            Ok(self.rising_time(&q)? - &target)
        };
        let hi = self.prec.zero();
        let mut step = self.prec.float(1);
        let mut lo = Float::with_val(bits, &target - &ln_qp) - 1u32;
        if lo > 0 {
            lo = self.prec.float(-1);
        }
        while f(&lo)? > 0 {
            lo -= &step;
            step *= 2u32;
            if lo < -10_000 {
                return Err(Error::OutOfRange { what: "tau", value: tau.to_f64() });
            }
        }
        let y = find_root_bracketed(f, &lo, &hi, self.root_tolerance())?;
        let q = Float::with_val(bits, y.exp_ref()) * &self.consts.q_plus;
        let q = if q > self.consts.q_plus { self.consts.q_plus.clone() } else { q };
        self.point_by_q(&q, branch)
    }

    fn root_tolerance(&self) -> f64 {
        (Float::with_val(64, 1) >> (3 * self.bits() / 4)).to_f64()
    }

    /// The sampled `xi` range `(min, max)`.
    pub fn xi_range(&self) -> (Float, Float) {
        let first = self.grid.first().expect("grid").1.clone();
        let last = self.grid.last().expect("grid").1.clone();
        (last, first)
    }

    /// Inverts `xi(theta)` on the sampled grid and refines by root finding.
    pub fn point_by_xi(&self, xi: &Float) -> Result<EuclideanPoint> {
        let target = self.prec.float(xi);
        if !(target.is_finite() && target > 0) {
            return Err(Error::OutOfRange { what: "xi", value: target.to_f64() });
        }
        let (lo_xi, hi_xi) = self.xi_range();
        if target < lo_xi || target > hi_xi {
            return Err(Error::OutOfRange { what: "xi", value: target.to_f64() });
        }
        let brackets: Vec<usize> = (0..self.grid.len() - 1)
            .filter(|&i| {
                let a = &self.grid[i].1;
                let b = &self.grid[i + 1].1;
                (*a >= target && *b <= target) || (*a <= target && *b >= target)
            })
            .collect();
        let i = match brackets.as_slice() {
            [i] => *i,
            [i, j] if *j == *i + 1 && self.grid[*j].1 == target => *i,
            _ => return Err(Error::NotMonotone { xi: target.to_f64() }),
        };
        let lo = i.saturating_sub(1);
        let hi = (i + 2).min(self.grid.len() - 1);
        for w in self.grid[lo..=hi].windows(2) {
            if w[1].1 >= w[0].1 {
                return Err(Error::NotMonotone { xi: target.to_f64() });
            }
        }
        let theta = find_root_bracketed(
            |th| Ok(self.xi_at_theta(th)? - &target),
            &self.grid[i].0,
            &self.grid[i + 1].0,
            self.root_tolerance(),
        )?;
        self.point_by_theta(&theta)
    }

    pub fn point_of(&self, selector: &PointSelector) -> Result<EuclideanPoint> {
        match selector {
            PointSelector::ByQ { q, branch } => self.point_by_q(q, *branch),
            PointSelector::ByTau(tau) => self.point_by_tau(tau),
            PointSelector::ByXi(xi) => self.point_by_xi(xi),
        }
    }

    /// `A(xi) = s/lambda + ln lambda - 1`; beyond the sampled range at large
    /// `xi` the small-`Q` form `xi^2/2 - ln(-a4 xi^4 / 4) - 2` is used.
    pub fn exponent_a(&self, xi: &Float) -> Result<Float> {
        let (_, hi) = self.xi_range();
        if *xi > hi {
            return Ok(boundary_exponent(&self.pot, xi, self.prec));
        }
        Ok(self.point_by_xi(xi)?.a)
    }

    /// `e^{(n+1/2)tau}/sqrt(R) * k!/(2 pi sqrt k) * (k/lambda)^{(n-1)/2} * e^{-kA}`
    /// with `R = Q lambda_dot / 2 - lambda P`.
    pub fn wave_asymptotic(&self, n: u32, k: u32, xi: &Float) -> Result<WaveAsymptotic> {
        if k == 0 {
            return Err(Error::InvalidArgument("the wave asymptote needs k >= 1".into()));
        }
        let pt = self.point_by_xi(xi)?;
        let value = self.wave_from_point(&pt, n, k)?;
        let kxi2 = Float::with_val(self.bits(), xi.square_ref()) * k;
        Ok(WaveAsymptotic { value, small_argument: kxi2 < SMALL_ARGUMENT_THRESHOLD })
    }

    pub(crate) fn wave_from_point(&self, pt: &EuclideanPoint, n: u32, k: u32) -> Result<SignedLog> {
        let prefactor = self.m_prefactor(pt, n, k)?;
        let tail = &SignedLog::factorial(k - 1, self.prec) * &SignedLog::exp(-Float::with_val(self.bits(), &pt.a * k));
        Ok(&prefactor * &tail)
    }

    /// The asymptote divided by `(k-1)! e^{-kA}`:
    /// `e^{(n+1/2)tau} sqrt(k) (k/lambda)^{(n-1)/2} / (2 pi sqrt(R))`.
    /// For `n = 0` this is the `k`-independent `M(xi)`.
    pub fn m_prefactor(&self, pt: &EuclideanPoint, n: u32, k: u32) -> Result<SignedLog> {
        let bits = self.bits();
        let r = pt.radicand();
        if r <= 0 {
            return Err(Error::NegativeRadicand { xi: pt.xi.to_f64(), value: r.to_f64() });
        }
        let p = self.prec;
        let half_n = p.float(2 * n + 1) / 2u32;
        let mut log = Float::with_val(bits, &pt.tau * &half_n);
        log -= r.ln() / 2u32;
        log += p.float(k).ln() / 2u32;
        let k_over_lambda = (p.float(k) / &pt.lambda).ln();
        log += k_over_lambda * (p.float(n as i64 - 1) / 2u32);
        log -= (p.pi() * 2u32).ln();
        Ok(SignedLog::exp(log))
    }

    /// `sqrt(1 + w) = sqrt(2V)/Q`; with `gap = Q+ - Q` given exactly, the factored
    /// form is used, which stays accurate next to the turning point.
    pub(crate) fn root_factor(&self, q: &Float, gap: Option<&Float>) -> Float {
        match gap {
            Some(g) => self.work.root_from_gap(q, g),
            None => self.work.root_at(q),
        }
    }

    pub(crate) fn quadrature(&self) -> &Quadrature {
        &self.quad
    }

    /// `Q(tau)` at many times.
    ///
    /// The trajectory is symmetric about the turning time, `Q(tau) = Q(2 tau_turn - tau)`,
    /// so every time is mapped to the rising branch. Times are solved in
    /// increasing order and each solve continues the time integral from the
    /// previous solution, so a point costs a short quadrature instead of one from 0.
    pub fn positions_at_times(&self, taus: &[Float]) -> Result<Vec<Float>> {
        let bits = self.bits();
        let two_turn = Float::with_val(bits, &self.consts.tau_turn * 2u32);
        let mut rising = Vec::with_capacity(taus.len());
        for t in taus {
            if !t.is_finite() {
                return Err(Error::OutOfRange { what: "tau", value: t.to_f64() });
            }
            let t = self.prec.float(t);
            rising.push(if t <= self.consts.tau_turn { t } else { Float::with_val(bits, &two_turn - &t) });
        }
        let mut order: Vec<usize> = (0..rising.len()).collect();
        order.sort_by(|&a, &b| rising[a].partial_cmp(&rising[b]).expect("finite times"));
        let mut out = vec![self.prec.zero(); rising.len()];
        let mut anchor: Option<TimeAnchor> = None;
        for idx in order {
            let solved = self.solve_rising_time(&rising[idx], anchor.as_ref())?;
            out[idx] = solved.q.clone();
            anchor = Some(solved);
        }
        Ok(out)
    }

    /// `I(Q)` at `Q = Q+ e^y`, continued from `anchor` when both lie below `Q+/2`.
    fn regular_from(&self, y: &Float, anchor: Option<&TimeAnchor>) -> Result<(Float, Float)> {
        let bits = self.bits();
        let q = Float::with_val(bits, y.exp_ref()) * &self.consts.q_plus;
        let half = self.half_turn();
        let a = match anchor {
            Some(a) if q <= half && a.q <= half => a,
            _ => {
                let reg = self.regular_time(&q)?;
                return Ok((q, reg));
            }
        };
        let f = &self.work;
        let piece = if q >= a.q {
            self.quad.integrate(|t| Ok(f.tau_regular(t)), &a.q, &q, EndpointSingularity::None)?
        } else {
            -self.quad.integrate(|t| Ok(f.tau_regular(t)), &q, &a.q, EndpointSingularity::None)?
        };
        Ok((q, Float::with_val(bits, &a.regular + &piece)))
    }

    fn solve_rising_time(&self, target: &Float, anchor: Option<&TimeAnchor>) -> Result<TimeAnchor> {
        let bits = self.bits();
        let ln_qp = Float::with_val(bits, self.consts.q_plus.ln_ref());
        if *target >= self.consts.tau_turn {
            let regular = Float::with_val(bits, &self.consts.tau_turn - &ln_qp);
            return Ok(TimeAnchor {
                y: self.prec.zero(),
                q: self.consts.q_plus.clone(),
                regular,
                tau: self.consts.tau_turn.clone(),
            });
        }
        if let Some(a) = anchor {
            // Repeated times (mirrored pairs) land within the root tolerance of the anchor.
            if *target <= a.tau {
                return Ok(a.clone());
            }
        }
        let f = |y: &Float| -> Result<Float> {
            let (_, reg) = self.regular_from(y, anchor)?;
            Ok(Float::with_val(bits, &ln_qp + y) + reg - target)
        };
        let hi_default = self.prec.zero();
        let (lo, hi) = match anchor {
            Some(a) => {
                // tau grows at least as fast as ln Q where 1 + w <= 1; try a
                // tight upper bracket first.
                let step = Float::with_val(bits, target - &a.tau) * self.work.root_at(&a.q) * 2u32;
                let mut hi = Float::with_val(bits, &a.y + &step);
                if hi >= 0 || f(&hi)?.is_sign_negative() {
                    hi = hi_default;
                }
                (a.y.clone(), hi)
            }
            None => {
                let mut lo = Float::with_val(bits, target - &ln_qp) - 1u32;
                if lo > 0 {
                    lo = self.prec.float(-1);
                }
                let mut step = self.prec.float(1);
                while f(&lo)? > 0 {
                    lo -= &step;
                    step *= 2u32;
                    if lo < -10_000 {
                        return Err(Error::OutOfRange { what: "tau", value: target.to_f64() });
                    }
                }
                (lo, hi_default)
            }
        };
        let y = find_root_bracketed(f, &lo, &hi, self.root_tolerance())?;
        let (q, regular) = self.regular_from(&y, anchor)?;
        let q = if q > self.consts.q_plus { self.consts.q_plus.clone() } else { q };
        let tau = Float::with_val(bits, &ln_qp + &y) + &regular;
        Ok(TimeAnchor { y, q, regular, tau })
    }

    /// `(kappa, eta) = (lambda e^{-p}, Q e^{-p/2})` sampled along the trajectory.
    pub fn kappa_eta_rows(&self, p_kappa: &Float, stride: usize) -> Result<Vec<KappaEtaRow>> {
        let bits = self.bits();
        let stride = stride.max(1);
        let e_p = Float::with_val(bits, (-p_kappa.clone()).exp_ref());
        let e_half = Float::with_val(bits, e_p.sqrt_ref());
        let mut rows = Vec::new();
        for (theta, _) in self.grid.iter().step_by(stride) {
            let pt = self.point_by_theta(theta)?;
            rows.push(KappaEtaRow {
                kappa: Float::with_val(bits, &pt.lambda * &e_p),
                eta: Float::with_val(bits, &pt.q * &e_half),
                tau: pt.tau,
                branch: pt.branch,
            });
        }
        Ok(rows)
    }
}

/// Small-`Q` limit of `A`: `xi^2/2 - ln(-a4 xi^4 / 4) - 2`.
pub fn boundary_exponent(pot: &Potential, xi: &Float, prec: Precision) -> Float {
    let bits = prec.bits();
    let xi = prec.float(xi);
    let xi2 = Float::with_val(bits, xi.square_ref());
    let minus_a4 = -prec.rational(pot.a4());
    let arg = Float::with_val(bits, xi2.square_ref()) * minus_a4 / 4u32;
    xi2 / 2u32 - arg.ln() - 2u32
}

/// The `xi -> 0` form of the wave asymptote:
/// `e^{k xi^2/2} / (xi sqrt k)^{n+1} * c^{n+1/2}/(2 pi) * k! k^{n-1/2} / s_inf^{k+n+1/2}`.
pub fn wave_small_xi(consts: &EuclideanConstants, n: u32, k: u32, xi: &Float, prec: Precision) -> SignedLog {
    let bits = prec.bits();
    let xi = prec.float(xi);
    let kf = prec.float(k);
    let mut log = Float::with_val(bits, xi.square_ref()) * &kf / 2u32;
    log -= Float::with_val(bits, &xi * Float::with_val(bits, kf.sqrt_ref())).ln() * (n + 1);
    let tail = fixed_argument_scale(consts, n, k, prec);
    &SignedLog::exp(log) * &tail
}

/// `c^{n+1/2}/(2 pi) * k! k^{n-1/2} / s_inf^{k+n+1/2}`, shared by the
/// fixed-argument asymptotes.
pub fn fixed_argument_scale(consts: &EuclideanConstants, n: u32, k: u32, prec: Precision) -> SignedLog {
    let bits = prec.bits();
    let half = |m: i64| prec.float(2 * m + 1) / 2u32;
    let mut log = Float::with_val(bits, prec.float(&consts.c).ln() * half(n as i64));
    log -= (prec.pi() * 2u32).ln();
    log += prec.float(k).ln() * half(n as i64 - 1);
    log -= prec.float(&consts.s_infinity).ln() * half(k as i64 + n as i64);
    &SignedLog::factorial(k, prec) * &SignedLog::exp(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn quartic() -> &'static Trajectory {
        static T: OnceLock<Trajectory> = OnceLock::new();
        T.get_or_init(|| Trajectory::new(&Potential::quartic(), Precision::DEFAULT).unwrap())
    }

    fn p() -> Precision {
        Precision::DEFAULT
    }

    #[test]
    fn quartic_constants() {
        let c = quartic().constants();
        let ln2 = std::f64::consts::LN_2;
        assert!((c.q_plus.to_f64() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((c.s_infinity.to_f64() - 1.0 / 3.0).abs() < 1e-15);
        assert!((c.c.to_f64() - 2.0).abs() < 1e-15);
        assert!((c.tau_turn.to_f64() - ln2 / 2.0).abs() < 1e-15);
        let exact_third = Float::with_val(128, 1) / 3u32;
        assert!(Float::with_val(128, &c.s_infinity - &exact_third).abs() < 1e-25);
    }

    #[test]
    fn turning_point_values() {
        let t = quartic();
        let qp = t.constants().q_plus.clone();
        let pt = t.point_by_q(&qp, Branch::Rising).unwrap();
        assert!(pt.p.to_f64().abs() < 1e-15);
        assert!((pt.s.to_f64() - 1.0 / 6.0).abs() < 1e-15);
        assert!((pt.lambda.to_f64() - 1.0 / 6.0).abs() < 1e-15);
        assert!((pt.xi.to_f64() - 3f64.sqrt()).abs() < 1e-14);
        assert!((pt.a.to_f64() + 6f64.ln()).abs() < 1e-14);
        let m = t.m_prefactor(&pt, 0, 7).unwrap().to_f64();
        assert!((m - 0.2599).abs() < 1e-3, "M = {m}");
    }

    #[test]
    fn small_q_forms() {
        let t = quartic();
        let pt = t.point_by_q(&p().float(0.02), Branch::Rising).unwrap();
        let lam = pt.lambda.to_f64();
        assert!((lam / (0.02f64.powi(4) / 4.0) - 1.0).abs() < 0.01);
        assert!((pt.xi.to_f64() / 100.0 - 1.0).abs() < 0.01);
    }

    #[test]
    fn xi_round_trip() {
        let t = quartic();
        let pt = t.point_by_q(&p().float(0.5), Branch::Rising).unwrap();
        let back = t.point_by_xi(&pt.xi).unwrap();
        assert_eq!(back.branch, Branch::Rising);
        assert!((back.q.to_f64() - 0.5).abs() < 1e-9);
        let pt = t.point_by_q(&p().float(0.3), Branch::Falling).unwrap();
        let back = t.point_by_xi(&pt.xi).unwrap();
        assert_eq!(back.branch, Branch::Falling);
        assert!((back.q.to_f64() - 0.3).abs() < 1e-9);
    }

    #[test]
    fn tau_round_trip() {
        let t = quartic();
        for (q, b) in [(0.1, Branch::Rising), (0.6, Branch::Rising), (0.6, Branch::Falling), (0.01, Branch::Falling)] {
            let pt = t.point_by_q(&p().float(q), b).unwrap();
            let back = t.point_by_tau(&pt.tau).unwrap();
            assert_eq!(back.branch, b);
            assert!((back.q.to_f64() - q).abs() < 1e-12, "q={q}");
        }
    }

    #[test]
    fn exponent_values() {
        let t = quartic();
        let a = t.exponent_a(&p().float(3).sqrt()).unwrap();
        assert!((a.to_f64() + 6f64.ln()).abs() < 1e-12);
        let small = t.exponent_a(&p().float(0.05)).unwrap().to_f64();
        assert!((small - ((1.0f64 / 3.0).ln() - 0.05 * 0.05 / 2.0)).abs() < 0.01);
        for (xi, expected) in [(0.75, -1.35201), (1.0, -1.50793), (1.5, -1.75742), (2.0, -1.74242)] {
            let a = t.exponent_a(&p().float(xi)).unwrap().to_f64();
            assert!((a - expected).abs() < 2e-5, "xi={xi} A={a}");
        }
    }

    #[test]
    fn large_xi_boundary_form() {
        let t = quartic();
        let xi = p().float(8);
        let a = t.exponent_a(&xi).unwrap().to_f64();
        let form = boundary_exponent(t.potential(), &xi, p()).to_f64();
        assert!(((a - form) / form).abs() < 0.01, "A={a} form={form}");
        let beyond = p().float(1e7);
        let far = t.exponent_a(&beyond).unwrap();
        assert_eq!(far, boundary_exponent(t.potential(), &beyond, p()));
    }

    #[test]
    fn zero_energy_and_area_identity() {
        let t = quartic();
        for i in 0..25 {
            let theta = p().float(-6.0 + 0.5 * i as f64);
            let pt = t.point_by_theta(&theta).unwrap();
            let v = t.potential().values(&pt.q).v;
            let half_p2 = Float::with_val(128, pt.p.square_ref()) / 2u32;
            assert!(Float::with_val(128, &half_p2 - &v).abs() < 1e-25);
            let area = Float::with_val(128, &pt.s - Float::with_val(128, &pt.q * &pt.p) / 2u32);
            assert!(Float::with_val(128, &area - &pt.lambda).abs() < 1e-25);
            assert!(pt.lambda > 0);
        }
    }

    #[test]
    fn xi_grid_is_monotone() {
        let t = quartic();
        assert!(t.grid.windows(2).all(|w| w[1].1 < w[0].1));
    }

    #[test]
    fn small_xi_crossover() {
        let t = quartic();
        let xi = p().float(0.1);
        let w = t.wave_asymptotic(0, 200, &xi).unwrap();
        assert!(w.small_argument);
        let s = wave_small_xi(t.constants(), 0, 200, &xi, p());
        let a = w.value.ln_abs_f64();
        let b = s.ln_abs_f64();
        assert!(((a - b) / b).abs() < 0.05, "{a} vs {b}");
    }

    #[test]
    fn scaling_in_k_is_consistent() {
        let t = quartic();
        let xi = p().float(1.2);
        let pt = t.point_by_xi(&xi).unwrap();
        let w10 = t.wave_asymptotic(0, 10, &xi).unwrap().value.ln_abs_f64();
        let w20 = t.wave_asymptotic(0, 20, &xi).unwrap().value.ln_abs_f64();
        let fact = SignedLog::factorial(19, p()).ln_abs_f64() - SignedLog::factorial(9, p()).ln_abs_f64();
        let predicted = fact - 10.0 * pt.a.to_f64();
        assert!((w20 - w10 - predicted).abs() < 1e-9);
    }

    #[test]
    fn out_of_range_requests() {
        let t = quartic();
        assert!(matches!(t.point_by_q(&p().float(0.8), Branch::Rising), Err(Error::OutOfRange { .. })));
        assert!(matches!(t.point_by_xi(&p().float(1e-9)), Err(Error::OutOfRange { .. })));
        assert!(matches!(t.point_by_xi(&p().float(-1)), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn positions_match_closed_form() {
        // Quartic bounce: Q(tau) = sech(tau - tau_turn) / sqrt 2.
        let t = quartic();
        let bits = p().bits();
        let times: Vec<Float> = [-30.0, 2.5, 0.1, -4.0, 0.3465735902799727, 9.0, -0.7, 1.2, -4.0]
            .iter()
            .map(|&v| p().float(v))
            .collect();
        let qs = t.positions_at_times(&times).unwrap();
        for (tau, q) in times.iter().zip(&qs) {
            let shifted = Float::with_val(bits, tau - &t.constants().tau_turn);
            let expect = shifted.cosh().recip() / p().float(2).sqrt();
            let rel = (Float::with_val(bits, q - &expect) / &expect).abs();
            assert!(rel < 1e-25, "tau={tau}: {q} vs {expect}");
        }
    }
}
