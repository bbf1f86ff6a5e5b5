//! Products of two perturbed states, `rho_k(x1, x2) = sum_m Psi_{n1,m}(x1) Psi_{n2,k-m}(x2)`,
//! their Laplace-method asymptotics, and large-order matrix elements.
//!
//! With `k = N kappa` and `x_i = sqrt(N) eta_i`, the sum over `m` is dominated
//! by a minimum of `S(mu, eta1) + S(kappa - mu, eta2)`, which sits where both
//! factors share one `p_kappa`:
//! `kappa = (lambda(tau1) + lambda(tau2)) e^{-p}`, `eta_i = Q(tau_i) e^{-p/2}`.
//! Then `rho_k ~ N^{k + (n1+n2-1)/2} e^{-N B0} gamma`.

use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};
use crate::euclidean::{Branch, EuclideanPoint, Trajectory, GRID_DEPTH};
use crate::numerics::{double_factorial_odd, find_root_bracketed, EndpointSingularity, Precision, SignedLog};
use crate::recursion::{agree, PerturbationSeries, WaveOrder, PRECISION_CAP_FACTOR};

/// Points of the `p_kappa` scan used to bracket saddles.
pub const SADDLE_SCAN_POINTS: usize = 96;
/// Largest accepted residual of the saddle equations.
pub const SADDLE_RESIDUAL_TOL: f64 = 1e-9;
/// Half-width of the refused band around the diagonal crossover `Q+/sqrt(s_inf)`.
pub const CROSSOVER_BAND: f64 = 1e-6;

/// `value * exp(gaussian_exponent)` with both parts exact.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactDensityOrder {
    pub value: Rational,
    /// `-(x1^2 + x2^2)/2`.
    pub gaussian_exponent: Rational,
}

impl ExactDensityOrder {
    pub fn to_signed_log(&self, prec: Precision) -> SignedLog {
        let base = SignedLog::from_rational(&self.value, prec);
        &base * &SignedLog::exp(prec.rational(&self.gaussian_exponent))
    }
}

/// `sum_{m=0}^k P_{n1,m}(x1) P_{n2,k-m}(x2)`, with the Gaussian kept symbolic.
pub fn rho_order_exact(
    first: &PerturbationSeries,
    second: &PerturbationSeries,
    k: u32,
    x1: &Rational,
    x2: &Rational,
) -> Result<ExactDensityOrder> {
    first.require(k)?;
    second.require(k)?;
    let mut value = Rational::new();
    for m in 0..=k {
        let a = first.require(m)?.polynomial_at(x1);
        if a == 0 {
            continue;
        }
        value += a * second.require(k - m)?.polynomial_at(x2);
    }
    let sq = Rational::from(x1.square_ref()) + Rational::from(x2.square_ref());
    Ok(ExactDensityOrder { value, gaussian_exponent: -sq / 2u32 })
}

/// `rho_k(x1, x2)` at float arguments, polynomial part certified like
/// [`crate::recursion::evaluate_order`]: the sum is recomputed at doubled
/// precision until two results agree to 40 bits.
pub fn rho_order_value(
    first: &PerturbationSeries,
    second: &PerturbationSeries,
    k: u32,
    x1: &Float,
    x2: &Float,
    prec: Precision,
) -> Result<SignedLog> {
    first.require(k)?;
    second.require(k)?;
    let sum_at = |p: Precision| -> Result<Float> {
        let (a1, a2) = (p.float(x1), p.float(x2));
        let mut total = p.zero();
        for m in 0..=k {
            let u = first.require(m)?.polynomial_at_float(&a1);
            total += u * second.require(k - m)?.polynomial_at_float(&a2);
        }
        Ok(total)
    };
    let cap = prec.times(PRECISION_CAP_FACTOR);
    let mut lo = prec;
    let mut v_lo = sum_at(lo)?;
    let poly = loop {
        let hi = lo.times(2);
        if hi > cap {
            return Err(Error::PrecisionExhausted { cap_bits: cap.bits() });
        }
        let v_hi = sum_at(hi)?;
        if agree(&v_lo, &v_hi) {
            break v_hi;
        }
        lo = hi;
        v_lo = v_hi;
    };
    let bits = poly.prec();
    let gauss = -(Float::with_val(bits, x1.square_ref()) + Float::with_val(bits, x2.square_ref())) / 2u32;
    Ok(&SignedLog::from_float(&poly) * &SignedLog::exp(prec.float(&gauss)))
}

/// A minimum of `B(mu)` found from the saddle equations.
#[derive(Clone, Debug, PartialEq)]
pub struct DensitySaddle {
    pub p_kappa: Float,
    pub tau_1: Float,
    pub tau_2: Float,
    pub branch_1: Branch,
    pub branch_2: Branch,
    /// `B(mu_0)`.
    pub b0: Float,
    /// `B''(mu_0)`, positive at a minimum.
    pub b_second: Float,
    pub gamma: Float,
    /// A second minimum with the same `B0` exists (the two arguments swapped).
    pub degenerate_pair: bool,
    /// `|kappa - (lambda1 + lambda2) e^{-p}|`.
    pub kappa_residual: Float,
    /// `max_i |eta_i - Q_i e^{-p/2}|`.
    pub eta_residual: Float,
}

const ASSIGNMENTS: [(Branch, Branch); 3] =
    [(Branch::Rising, Branch::Rising), (Branch::Rising, Branch::Falling), (Branch::Falling, Branch::Rising)];

fn lambda_on(traj: &Trajectory, q: &Float, branch: Branch) -> Result<Float> {
    Ok(traj.lambda_at(q, branch)?.0)
}

/// Saddle of the `m`-sum for `rho_{N kappa}(sqrt(N) eta1, sqrt(N) eta2)`.
///
/// For each branch assignment (rising/rising, rising/falling, falling/rising)
/// the equations reduce to one equation in `p_kappa`, since
/// `Q_i = eta_i e^{p/2}`. Roots are bracketed on a scan below
/// `p_max = 2 ln(Q+ / max eta)` and refined; the minimum of `B0` among
/// candidates with `B'' > 0` is returned.
pub fn rho_saddle(
    traj: &Trajectory,
    n1: u32,
    n2: u32,
    kappa: &Float,
    eta1: &Float,
    eta2: &Float,
) -> Result<DensitySaddle> {
    let prec = traj.precision();
    let bits = prec.bits();
    if !(*kappa > 0 && *eta1 > 0 && *eta2 > 0) {
        return Err(Error::InvalidArgument("rho_saddle needs kappa, eta1, eta2 > 0".into()));
    }
    let q_plus = traj.constants().q_plus.clone();
    let eta_max = if eta1 > eta2 { eta1 } else { eta2 };
    let p_max = (Float::with_val(bits, &q_plus / eta_max)).ln() * 2u32;
    let span = prec.float(GRID_DEPTH).ln() * 2u32;
    let ln_kappa = prec.float(kappa).ln();
    let q_at = |eta: &Float, p: &Float| -> Float {
        let q = Float::with_val(bits, p / 2u32).exp() * eta;
        if q > q_plus { q_plus.clone() } else { q }
    };
    // ln(lambda1 + lambda2) - p - ln kappa; rising lambdas are shared by all assignments.
    let mismatch = |p: &Float, (b1, b2): (Branch, Branch)| -> Result<Float> {
        let l1 = lambda_on(traj, &q_at(eta1, p), b1)?;
        let l2 = lambda_on(traj, &q_at(eta2, p), b2)?;
        Ok((l1 + l2).ln() - p - &ln_kappa)
    };

    let grid: Vec<Float> = (0..=SADDLE_SCAN_POINTS)
        .map(|j| Float::with_val(bits, &p_max - Float::with_val(bits, &span * j as u32) / SADDLE_SCAN_POINTS as u32))
        .collect();
    let s_inf = traj.constants().s_infinity.clone();
    let mut rising: Vec<(Float, Float)> = Vec::with_capacity(grid.len());
    for p in &grid {
        let l1 = lambda_on(traj, &q_at(eta1, p), Branch::Rising)?;
        let l2 = lambda_on(traj, &q_at(eta2, p), Branch::Rising)?;
        rising.push((l1, l2));
    }
    let on_grid = |j: usize, (b1, b2): (Branch, Branch)| -> Float {
        let pick = |l: &Float, b: Branch| match b {
            Branch::Rising => l.clone(),
            Branch::Falling => Float::with_val(bits, &s_inf - l),
        };
        let (l1, l2) = &rising[j];
        (pick(l1, b1) + pick(l2, b2)).ln() - &grid[j] - &ln_kappa
    };

    let mut candidates: Vec<DensitySaddle> = Vec::new();
    for assignment in ASSIGNMENTS {
        let values: Vec<Float> = (0..grid.len()).map(|j| on_grid(j, assignment)).collect();
        for j in 0..grid.len() - 1 {
            let (fa, fb) = (&values[j], &values[j + 1]);
            let root = if fa.is_zero() {
                grid[j].clone()
            } else if fa.is_sign_negative() == fb.is_sign_negative() || fb.is_zero() {
                continue;
            } else {
                find_root_bracketed(|p| mismatch(p, assignment), &grid[j + 1], &grid[j], root_tolerance(prec))?
            };
            let pt1 = traj.point_by_q(&q_at(eta1, &root), assignment.0)?;
            let pt2 = traj.point_by_q(&q_at(eta2, &root), assignment.1)?;
            if let Some(saddle) = assemble_saddle(prec, n1, n2, kappa, eta1, eta2, &root, &pt1, &pt2) {
                candidates.push(saddle);
            }
        }
    }
    select_minimum(candidates, prec)
}

fn root_tolerance(prec: Precision) -> f64 {
    (Float::with_val(64, 1) >> (3 * prec.bits() / 4)).to_f64()
}

#[allow(clippy::too_many_arguments)]
fn assemble_saddle(
    prec: Precision,
    n1: u32,
    n2: u32,
    kappa: &Float,
    eta1: &Float,
    eta2: &Float,
    p: &Float,
    pt1: &EuclideanPoint,
    pt2: &EuclideanPoint,
) -> Option<DensitySaddle> {
    let bits = prec.bits();
    let e_p = Float::with_val(bits, p.exp_ref());
    let e_mp = Float::with_val(bits, e_p.recip_ref());
    let (r1, r2) = (pt1.radicand(), pt2.radicand());
    if r1.is_zero() || r2.is_zero() {
        return None;
    }
    let b_second = (Float::with_val(bits, &pt1.p / &r1) + Float::with_val(bits, &pt2.p / &r2)) * &e_p;
    if b_second <= 0 {
        return None;
    }
    let d = Float::with_val(bits, &pt1.p * &r2) + Float::with_val(bits, &pt2.p * &r1);
    if d <= 0 {
        return None;
    }
    let lam = Float::with_val(bits, &pt1.lambda + &pt2.lambda);
    let b0 = (Float::with_val(bits, &pt1.s + &pt2.s) + Float::with_val(bits, &lam * p)) * &e_mp;
    let gamma = saddle_gamma(prec, n1, n2, p, &pt1.tau, &pt2.tau, &d);
    let kappa_residual = (Float::with_val(bits, &lam * &e_mp) - kappa).abs();
    let e_half = Float::with_val(bits, e_mp.sqrt_ref());
    let r_eta1 = (Float::with_val(bits, &pt1.q * &e_half) - eta1).abs();
    let r_eta2 = (Float::with_val(bits, &pt2.q * &e_half) - eta2).abs();
    let eta_residual = if r_eta1 > r_eta2 { r_eta1 } else { r_eta2 };
    if kappa_residual > SADDLE_RESIDUAL_TOL || eta_residual > SADDLE_RESIDUAL_TOL {
        return None;
    }
    Some(DensitySaddle {
        p_kappa: p.clone(),
        tau_1: pt1.tau.clone(),
        tau_2: pt2.tau.clone(),
        branch_1: pt1.branch,
        branch_2: pt2.branch,
        b0,
        b_second,
        gamma,
        degenerate_pair: false,
        kappa_residual,
        eta_residual,
    })
}

/// `e^{-(n1+n2-1)p/2} e^{(n1+1/2)tau1 + (n2+1/2)tau2} / (sqrt(2 pi) sqrt(D))`.
fn saddle_gamma(prec: Precision, n1: u32, n2: u32, p: &Float, tau1: &Float, tau2: &Float, d: &Float) -> Float {
    let bits = prec.bits();
    let half = |n: u32| prec.float(2 * n + 1) / 2u32;
    let mut log = -Float::with_val(bits, p * (n1 as i64 + n2 as i64 - 1)) / 2u32;
    log += Float::with_val(bits, tau1 * &half(n1));
    log += Float::with_val(bits, tau2 * &half(n2));
    log -= (prec.pi() * 2u32).ln() / 2u32;
    log -= Float::with_val(bits, d.ln_ref()) / 2u32;
    log.exp()
}

fn select_minimum(mut candidates: Vec<DensitySaddle>, prec: Precision) -> Result<DensitySaddle> {
    if candidates.is_empty() {
        return Err(Error::NoSaddle);
    }
    candidates.sort_by(|a, b| a.b0.partial_cmp(&b.b0).expect("finite exponents"));
    let bits = prec.bits();
    let tol = Float::with_val(bits, 1) >> (prec.bits() / 2);
    let mut best = candidates[0].clone();
    for other in &candidates[1..] {
        let gap = Float::with_val(bits, &other.b0 - &best.b0).abs();
        let scale = Float::with_val(bits, best.b0.abs_ref()).max(&prec.float(1));
        let same_taus = Float::with_val(bits, &other.tau_1 - &best.tau_1).abs() <= Float::with_val(bits, &tol * &scale);
        if gap <= Float::with_val(bits, &tol * &scale) && !same_taus {
            best.degenerate_pair = true;
        }
    }
    // Report the rising-first member of a swapped pair.
    if best.degenerate_pair && best.branch_1 == Branch::Falling {
        if let Some(twin) = candidates.iter().find(|c| c.branch_1 == Branch::Rising && c.branch_2 == Branch::Falling) {
            let mut twin = twin.clone();
            twin.degenerate_pair = true;
            return Ok(twin);
        }
    }
    Ok(best)
}

/// `rho_k ~ N^{k + (n1+n2-1)/2} e^{-N B} gamma` with `N = k / kappa`.
pub fn laplace_prediction(n1: u32, n2: u32, k: u32, kappa: &Float, b: &Float, gamma: &Float, prec: Precision) -> SignedLog {
    let bits = prec.bits();
    let big_n = prec.float(k) / kappa;
    let power = prec.float(2 * k as i64 + n1 as i64 + n2 as i64 - 1) / 2u32;
    let mut log = Float::with_val(bits, big_n.ln_ref()) * power;
    log -= Float::with_val(bits, &big_n * b);
    &SignedLog::exp(log) * &SignedLog::from_float(gamma)
}

/// Which coinciding-argument case applies on the diagonal `eta1 = eta2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DiagonalRegion {
    /// `eta/sqrt(kappa) > Q+/sqrt(s_inf)`: one saddle at `mu = kappa/2` on the rising branch.
    SingleSaddle,
    /// `eta/sqrt(kappa) < Q+/sqrt(s_inf)`: two swapped saddles with `Q(tau1) = Q(tau2)`
    /// on opposite branches.
    SplitSaddle,
}

impl DiagonalRegion {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagonalRegion::SingleSaddle => "single",
            DiagonalRegion::SplitSaddle => "split",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalAsymptotic {
    pub region: DiagonalRegion,
    pub b: Float,
    pub gamma: Float,
    /// `tau` of the single saddle, or of the rising member of the split pair.
    pub tau: Float,
}

/// `B` and `gamma` of `rho_{N kappa}(sqrt(N) eta, sqrt(N) eta)`.
///
/// Single saddle: `B = kappa (s/lambda + ln(2 lambda/kappa))` with `tau` from
/// `eta/sqrt(kappa) = Q/sqrt(2 lambda)`, and
/// `gamma = (kappa/2lambda)^{(n1+n2-1)/2} e^{(n1+n2+1)tau} / (sqrt(2 pi) sqrt(2 Qdot R))`.
///
/// Split saddles: `B = kappa (1 + ln(s_inf/kappa))` and the general prefactor
/// summed over both minima, where `D = Qdot^2 s_inf`:
/// `gamma = (kappa/s_inf)^{(n1+n2-1)/2} [e^{(n1+1/2)tau1+(n2+1/2)tau2} + (swap)] / (sqrt(2 pi s_inf) Qdot)`.
pub fn rho_diagonal_asymptotic(traj: &Trajectory, n1: u32, n2: u32, kappa: &Float, eta: &Float) -> Result<DiagonalAsymptotic> {
    let prec = traj.precision();
    let bits = prec.bits();
    if !(*kappa > 0 && *eta > 0) {
        return Err(Error::InvalidArgument("the diagonal asymptote needs kappa, eta > 0".into()));
    }
    let consts = traj.constants();
    let ratio = Float::with_val(bits, eta / Float::with_val(bits, kappa.sqrt_ref()));
    let crossover = Float::with_val(bits, &consts.q_plus / Float::with_val(bits, consts.s_infinity.sqrt_ref()));
    let offset = Float::with_val(bits, &ratio - &crossover);
    if offset.clone().abs() < CROSSOVER_BAND {
        return Err(Error::BoundaryRegion { ratio: ratio.to_f64() });
    }
    let sum_n = n1 as i64 + n2 as i64;
    if offset > 0 {
        let pt = single_saddle_point(traj, &ratio)?;
        let r = pt.radicand();
        let d = Float::with_val(bits, &pt.p * &r) * 2u32;
        if d <= 0 {
            return Err(Error::NegativeRadicand { xi: ratio.to_f64(), value: d.to_f64() });
        }
        let two_lambda = Float::with_val(bits, &pt.lambda * 2u32);
        let b = (Float::with_val(bits, &pt.s / &pt.lambda) + Float::with_val(bits, &two_lambda / kappa).ln()) * kappa;
        let mut log = Float::with_val(bits, kappa / &two_lambda).ln() * (prec.float(sum_n - 1) / 2u32);
        log += Float::with_val(bits, &pt.tau * (sum_n + 1));
        log -= (prec.pi() * 2u32).ln() / 2u32;
        log -= d.ln() / 2u32;
        Ok(DiagonalAsymptotic { region: DiagonalRegion::SingleSaddle, b, gamma: log.exp(), tau: pt.tau })
    } else {
        let s_inf = &consts.s_infinity;
        let q = Float::with_val(bits, &ratio * Float::with_val(bits, s_inf.sqrt_ref()));
        let q = if q > consts.q_plus { consts.q_plus.clone() } else { q };
        let rise = traj.point_by_q(&q, Branch::Rising)?;
        let fall = traj.point_by_q(&q, Branch::Falling)?;
        let b = (Float::with_val(bits, s_inf / kappa).ln() + 1u32) * kappa;
        let half = |n: u32| prec.float(2 * n + 1) / 2u32;
        let term = |ta: &Float, tb: &Float| -> Float {
            (Float::with_val(bits, ta * &half(n1)) + Float::with_val(bits, tb * &half(n2))).exp()
        };
        let bracket = term(&rise.tau, &fall.tau) + term(&fall.tau, &rise.tau);
        let mut log = Float::with_val(bits, kappa / s_inf).ln() * (prec.float(sum_n - 1) / 2u32);
        log -= (prec.pi() * 2u32 * s_inf).ln() / 2u32;
        log -= Float::with_val(bits, rise.p.ln_ref());
        Ok(DiagonalAsymptotic { region: DiagonalRegion::SplitSaddle, b, gamma: log.exp() * bracket, tau: rise.tau })
    }
}

/// Rising point with `Q / sqrt(2 lambda) = ratio`, for `ratio` above the crossover.
fn single_saddle_point(traj: &Trajectory, ratio: &Float) -> Result<EuclideanPoint> {
    let prec = traj.precision();
    let bits = prec.bits();
    let q_plus = traj.constants().q_plus.clone();
    let ln_target = Float::with_val(bits, ratio.ln_ref());
    let f = |y: &Float| -> Result<Float> {
        let q = Float::with_val(bits, y.exp_ref()) * &q_plus;
        let lam = lambda_on(traj, &q, Branch::Rising)?;
        Ok(Float::with_val(bits, y + Float::with_val(bits, q_plus.ln_ref())) - (lam * 2u32).ln() / 2u32 - &ln_target)
    };
    let hi = prec.zero();
    let mut lo = prec.float(-1);
    let floor = -prec.float(GRID_DEPTH).ln();
    while f(&lo)?.is_sign_negative() {
        lo *= 2u32;
        if lo < floor {
            return Err(Error::OutOfRange { what: "eta/sqrt(kappa)", value: ratio.to_f64() });
        }
    }
    let y = find_root_bracketed(f, &lo, &hi, root_tolerance(prec))?;
    let q = Float::with_val(bits, y.exp_ref()) * &q_plus;
    traj.point_by_q(&q, Branch::Rising)
}

/// An exact Gaussian integral `r sqrt(pi)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExactGaussianValue {
    pub rational_part: Rational,
}

impl ExactGaussianValue {
    pub fn is_zero(&self) -> bool {
        self.rational_part == 0
    }

    pub fn to_float(&self, prec: Precision) -> Float {
        prec.rational(&self.rational_part) * prec.pi().sqrt()
    }

    pub fn to_signed_log(&self, prec: Precision) -> SignedLog {
        let r = SignedLog::from_rational(&self.rational_part, prec);
        &r * &SignedLog::exp(prec.pi().ln() / 2u32)
    }
}

/// A polynomial with integer coefficients over a common denominator, lowest power first.
struct ScaledPolynomial {
    numer: Vec<Integer>,
    denom: Integer,
}

impl ScaledPolynomial {
    fn from_rationals(coeffs: &[Rational]) -> Self {
        let mut denom = Integer::from(1);
        for c in coeffs {
            if *c != 0 {
                denom.lcm_mut(c.denom());
            }
        }
        let numer = coeffs
            .iter()
            .map(|c| {
                let (n, d) = (c.numer(), c.denom());
                n * Integer::from(&denom / d)
            })
            .collect();
        ScaledPolynomial { numer, denom }
    }
}

fn dense(order: &WaveOrder) -> Vec<Rational> {
    let mut out = vec![Rational::new(); order.degree() as usize + 1];
    for (l, c) in order.terms() {
        out[l as usize] = c.clone();
    }
    out
}

/// `(x - d/dx)` on the polynomial part: `-d/dx (P e^{-x^2/2}) = (xP - P') e^{-x^2/2}`.
fn lower_momentum(p: &[Rational]) -> Vec<Rational> {
    let mut out = vec![Rational::new(); p.len() + 1];
    for (i, c) in p.iter().enumerate() {
        out[i + 1] += c;
        if i > 0 {
            out[i - 1] -= Rational::from(c * i as u32);
        }
    }
    out
}

/// `<n2| x^{m1} (-d/dx)^{m2} |n1>_k = sum_j int Psi_{n2,j} x^{m1} (-d/dx)^{m2} Psi_{n1,k-j} dx`
/// for the unnormalized states, exactly, as `r sqrt(pi)`.
pub fn matrix_element_exact(
    first: &PerturbationSeries,
    second: &PerturbationSeries,
    m1: u32,
    m2: u32,
    k: u32,
) -> Result<ExactGaussianValue> {
    first.require(k)?;
    second.require(k)?;
    // Moments int x^t e^{-x^2} dx / sqrt(pi) = (t-1)!! / 2^{t/2} for even t,
    // stored times 2^{top} as integers.
    let max_t = (4 * k + first.level()) as usize + m1 as usize + m2 as usize + (4 * k + second.level()) as usize;
    let top = (max_t / 2) as u32;
    let moments: Vec<Integer> = (0..=max_t)
        .map(|t| {
            if t % 2 == 1 {
                Integer::new()
            } else {
                let half = (t / 2) as u32;
                double_factorial_odd(half) << (top - half)
            }
        })
        .collect();
    let mut total = Rational::new();
    for j in 0..=k {
        let mut right = dense(first.require(k - j)?);
        for _ in 0..m2 {
            right = lower_momentum(&right);
        }
        let right = ScaledPolynomial::from_rationals(&right);
        let left = ScaledPolynomial::from_rationals(&dense(second.require(j)?));
        let mut acc = Integer::new();
        for (a, ca) in left.numer.iter().enumerate() {
            if *ca == 0 {
                continue;
            }
            for (b, cb) in right.numer.iter().enumerate() {
                let t = a + b + m1 as usize;
                if *cb == 0 || t % 2 == 1 {
                    continue;
                }
                acc += Integer::from(ca * cb) * &moments[t];
            }
        }
        if acc != 0 {
            let den = Integer::from(&left.denom * &right.denom) << top;
            total += Rational::from((acc, den));
        }
    }
    Ok(ExactGaussianValue { rational_part: total })
}

fn check_convergence(d: i64, m: i64) -> Result<()> {
    let (left, right) = (m + d, m - d);
    if left <= 0 || right <= 0 {
        return Err(Error::Divergent { left, right });
    }
    Ok(())
}

/// `Gamma(k)/(pi s_inf^k) (k/s_inf)^{(n1+n2+m+1)/2} c^{n2+1/2}` times `integral`.
fn large_order_scale(traj: &Trajectory, n1: u32, n2: u32, m: u32, k: u32, integral: &Float) -> SignedLog {
    let prec = traj.precision();
    let bits = prec.bits();
    let consts = traj.constants();
    let s_inf = prec.float(&consts.s_infinity);
    let ln_s = Float::with_val(bits, s_inf.ln_ref());
    let mut log = -prec.pi().ln();
    log -= Float::with_val(bits, &ln_s * k);
    let power = prec.float(n1 + n2 + m + 1) / 2u32;
    log += (prec.float(k).ln() - &ln_s) * power;
    log += Float::with_val(bits, consts.c.ln_ref()) * (prec.float(2 * n2 + 1) / 2u32);
    let gamma_k = SignedLog::factorial(k - 1, prec);
    &(&gamma_k * &SignedLog::exp(log)) * &SignedLog::from_float(integral)
}

/// `int Q^{m1} P^{m2} e^{(n1-n2) tau} dtau` over the whole trajectory.
///
/// On the rising branch `dtau = dQ/P`, `P = Q sqrt(1+w)` and `e^tau = Q e^{I(Q)}`;
/// the falling branch follows from `tau -> ln c - tau`, `P -> -P`:
/// `int_0^{Q+} Q^{m1+m2-1+d} (1+w)^{(m2-1)/2} e^{d I} dQ
///  + (-1)^{m2} c^d int_0^{Q+} Q^{m1+m2-1-d} (1+w)^{(m2-1)/2} e^{-d I} dQ`.
pub fn matrix_element_integral(traj: &Trajectory, n1: u32, n2: u32, m1: u32, m2: u32) -> Result<Float> {
    let d = n1 as i64 - n2 as i64;
    check_convergence(d, (m1 + m2) as i64)?;
    let prec = traj.precision();
    let bits = prec.bits();
    let rising = branch_moment(traj, m1 + m2, m2, d)?;
    let falling = branch_moment(traj, m1 + m2, m2, -d)?;
    let c_d = (Float::with_val(bits, traj.constants().c.ln_ref()) * d).exp();
    let falling = falling * c_d;
    Ok(if m2 % 2 == 1 { rising - falling } else { rising + falling })
}

/// `int_0^{Q+} Q^{m-1+d} (1+w)^{(m2-1)/2} e^{d I(Q)} dQ`.
fn branch_moment(traj: &Trajectory, m: u32, m2: u32, d: i64) -> Result<Float> {
    let prec = traj.precision();
    let bits = prec.bits();
    let q_plus = traj.constants().q_plus.clone();
    let half = Float::with_val(bits, &q_plus / 2u32);
    let power = m as i64 - 1 + d;
    let integrand = |q: &Float, gap: Option<&Float>| -> Result<Float> {
        let root = traj.root_factor(q, gap);
        let mut v = Float::with_val(bits, rug::ops::Pow::pow(q, power as i32));
        v *= Float::with_val(bits, rug::ops::Pow::pow(&root, m2 as i32 - 1));
        if d != 0 {
            v *= Float::with_val(bits, traj.regular_time(q)? * d).exp();
        }
        Ok(v)
    };
    let quad = traj.quadrature();
    let low = quad.integrate(|q| integrand(q, None), &prec.zero(), &half, EndpointSingularity::None)?;
    let high = quad.integrate_with_gap(|q, gap| integrand(q, Some(gap)), &half, &q_plus, EndpointSingularity::InverseSqrtAtB)?;
    Ok(low + high)
}

/// Large-order asymptote of `<n2| x^{m1} (-d/dx)^{m2} |n1>_k`:
/// `Gamma(k)/(pi s_inf^k) (k/s_inf)^{(n1+n2+m1+m2+1)/2} c^{n2+1/2} int Q^{m1} P^{m2} e^{(n1-n2)tau} dtau`.
pub fn matrix_element_asymptotic(traj: &Trajectory, n1: u32, n2: u32, m1: u32, m2: u32, k: u32) -> Result<SignedLog> {
    if k == 0 {
        return Err(Error::InvalidArgument("the matrix-element asymptote needs k >= 1".into()));
    }
    if (n1 + n2 + m1 + m2) % 2 == 1 {
        return Err(Error::InvalidArgument("odd total n1+n2+m1+m2: the element vanishes identically".into()));
    }
    let integral = matrix_element_integral(traj, n1, n2, m1, m2)?;
    Ok(large_order_scale(traj, n1, n2, m1 + m2, k, &integral))
}

/// `int prod_i Q(tau + tau_i) e^{(n1-n2) tau} dtau`.
///
/// The integrand is analytic in a strip and decays exponentially, so the
/// trapezoidal rule converges geometrically; the step is halved until two
/// successive sums agree to the trajectory tolerance.
pub fn green_function_integral(traj: &Trajectory, n1: u32, n2: u32, shifts: &[Float]) -> Result<Float> {
    let d = n1 as i64 - n2 as i64;
    let m = shifts.len() as i64;
    check_convergence(d, m)?;
    let prec = traj.precision();
    let bits = prec.bits();
    let tol = Float::with_val(bits, 1) >> (3 * bits / 4);
    let mean = shifts.iter().fold(prec.zero(), |acc, s| acc + s) / m as u32;
    let spread = shifts
        .iter()
        .map(|s| Float::with_val(bits, s - &mean).abs())
        .fold(prec.zero(), |acc, v| if v > acc { v } else { acc });
    let slowest = (m - d.abs()) as u32;
    // Tails beyond the window fall below the tolerance.
    let reach = (Float::with_val(bits, tol.ln_ref()).abs() + 8u32) / slowest + &spread + 2u32;
    let center = Float::with_val(bits, &traj.constants().tau_turn - &mean);
    let mut distinct: Vec<Float> = Vec::new();
    for s in shifts {
        if !distinct.iter().any(|t| t == s) {
            distinct.push(prec.float(s));
        }
    }
    let multiplicity: Vec<u32> = distinct.iter().map(|t| shifts.iter().filter(|s| *s == t).count() as u32).collect();

    let sample = |taus: &[Float]| -> Result<Float> {
        let mut total = prec.zero();
        let mut products: Vec<Float> = taus.iter().map(|t| Float::with_val(bits, t * d).exp()).collect();
        for (shift, count) in distinct.iter().zip(&multiplicity) {
            let moved: Vec<Float> = taus.iter().map(|t| Float::with_val(bits, t + shift)).collect();
            let qs = traj.positions_at_times(&moved)?;
            for (prod, q) in products.iter_mut().zip(&qs) {
                *prod *= Float::with_val(bits, rug::ops::Pow::pow(q, *count));
            }
        }
        for v in products {
            total += v;
        }
        Ok(total)
    };

    let mut h = prec.float(0.25);
    let count = Float::with_val(bits, &reach / &h).ceil().to_u32_saturating().unwrap_or(u32::MAX) as i64;
    let nodes: Vec<Float> = (-count..=count).map(|j| Float::with_val(bits, &h * j) + &center).collect();
    let mut raw = sample(&nodes)?;
    let mut estimate = Float::with_val(bits, &raw * &h);
    let mut half_count = count;
    for _ in 0..6 {
        let fresh_h = Float::with_val(bits, &h / 2u32);
        // New nodes sit halfway between the previous ones.
        let fresh: Vec<Float> = (-half_count..half_count)
            .map(|j| Float::with_val(bits, &h * j) + &center + &fresh_h)
            .collect();
        raw += sample(&fresh)?;
        h = fresh_h;
        half_count *= 2;
        let refined = Float::with_val(bits, &raw * &h);
        let change = Float::with_val(bits, &refined - &estimate).abs();
        estimate = refined;
        if change <= Float::with_val(bits, estimate.abs_ref()) * &tol {
            return Ok(estimate);
        }
        let _ = half_count;
    }
    Err(Error::NonConvergence { tol: tol.to_f64(), estimate: estimate.to_f64(), subdivisions: (2 * half_count + 1) as usize })
}

/// Large-order asymptote of `<n2| x(tau_1) ... x(tau_m) |n1>_k`: the matrix-element
/// form at `m2 = 0` with `Q^m(tau)` replaced by `prod_i Q(tau + tau_i)`.
pub fn green_function_asymptotic(traj: &Trajectory, n1: u32, n2: u32, k: u32, shifts: &[Float]) -> Result<SignedLog> {
    if k == 0 {
        return Err(Error::InvalidArgument("the Green-function asymptote needs k >= 1".into()));
    }
    if shifts.is_empty() {
        return Err(Error::InvalidArgument("at least one time is needed".into()));
    }
    if (n1 + n2 + shifts.len() as u32) % 2 == 1 {
        return Err(Error::InvalidArgument("odd total n1+n2+m: the element vanishes identically".into()));
    }
    let integral = green_function_integral(traj, n1, n2, shifts)?;
    Ok(large_order_scale(traj, n1, n2, shifts.len() as u32, k, &integral))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Potential;
    use crate::recursion::compute_series;
    use std::sync::OnceLock;

    fn p() -> Precision {
        Precision::DEFAULT
    }

    fn quartic() -> &'static Trajectory {
        static T: OnceLock<Trajectory> = OnceLock::new();
        T.get_or_init(|| Trajectory::new(&Potential::quartic(), Precision::DEFAULT).unwrap())
    }

    fn ground(k: u32) -> PerturbationSeries {
        compute_series(&Potential::quartic(), 0, k).unwrap()
    }

    #[test]
    fn exact_density_small_cases() {
        let s = ground(1);
        let one = Rational::from(1);
        let r = rho_order_exact(&s, &s, 1, &one, &one).unwrap();
        assert_eq!(r.value, Rational::from(2));
        assert_eq!(r.gaussian_exponent, Rational::from(-1));
        let x1 = Rational::from((1, 3));
        let r0 = rho_order_exact(&s, &s, 0, &x1, &one).unwrap();
        assert_eq!(r0.value, Rational::from(1));
        let excited = compute_series(&Potential::quartic(), 1, 0).unwrap();
        let r0 = rho_order_exact(&s, &excited, 0, &x1, &Rational::from(2)).unwrap();
        assert_eq!(r0.value, Rational::from(2));
    }

    #[test]
    fn float_density_matches_exact() {
        let s = ground(8);
        let (a, b) = (Rational::from((3, 2)), Rational::from((-2, 5)));
        for k in [0u32, 3, 8] {
            let exact = rho_order_exact(&s, &s, k, &a, &b).unwrap().to_signed_log(p());
            let float = rho_order_value(&s, &s, k, &p().rational(&a), &p().rational(&b), p()).unwrap();
            assert!((float.ratio(&exact, p()) - 1u32).abs() < 1e-30);
        }
    }

    #[test]
    fn exact_density_is_symmetric() {
        let s = ground(6);
        let a = Rational::from((3, 2));
        let b = Rational::from((-2, 5));
        for k in 0..=6 {
            assert_eq!(rho_order_exact(&s, &s, k, &a, &b).unwrap(), rho_order_exact(&s, &s, k, &b, &a).unwrap());
        }
    }

    #[test]
    fn exact_matrix_elements() {
        let s = ground(6);
        assert_eq!(matrix_element_exact(&s, &s, 2, 0, 0).unwrap().rational_part, Rational::from((1, 2)));
        assert_eq!(matrix_element_exact(&s, &s, 1, 1, 0).unwrap().rational_part, Rational::from((1, 2)));
        assert_eq!(matrix_element_exact(&s, &s, 0, 0, 0).unwrap().rational_part, Rational::from(1));
        for k in 0..=6 {
            assert!(matrix_element_exact(&s, &s, 1, 0, k).unwrap().is_zero());
            assert!(matrix_element_exact(&s, &s, 0, 1, k).unwrap().is_zero());
        }
        // First order of <0|0>: 2 int (x^4/4 + 3x^2/4) e^{-x^2} = 2 (3/16 + 3/8) sqrt(pi).
        assert_eq!(matrix_element_exact(&s, &s, 0, 0, 1).unwrap().rational_part, Rational::from((9, 8)));
    }

    #[test]
    fn momentum_operator_is_antisymmetric() {
        // <0|(-d/dx)|1> = - <1|(-d/dx)|0> for the real states at every order.
        let g = ground(4);
        let e = compute_series(&Potential::quartic(), 1, 4).unwrap();
        for k in 0..=4 {
            let a = matrix_element_exact(&e, &g, 0, 1, k).unwrap().rational_part;
            let b = matrix_element_exact(&g, &e, 0, 1, k).unwrap().rational_part;
            assert_eq!(a, -b);
            assert!(a != 0);
        }
    }

    #[test]
    fn quartic_second_moment_integral() {
        // int Q^2 dtau = 2 int_0^{1/sqrt2} Q dQ / sqrt(1 - 2Q^2) = 1.
        let v = matrix_element_integral(quartic(), 0, 0, 2, 0).unwrap();
        assert!((v - 1u32).abs() < 1e-25);
        for k in [5u32, 20] {
            let a = matrix_element_asymptotic(quartic(), 0, 0, 2, 0, k).unwrap();
            // (3 sqrt2 / pi) 3^k k Gamma(k) sqrt(3k)
            let expect = 3.0 * 2f64.sqrt() / std::f64::consts::PI * 3f64.powi(k as i32) * f64::from(k)
                * SignedLog::factorial(k - 1, p()).to_f64()
                * (3.0 * f64::from(k)).sqrt();
            assert!((a.to_f64() / expect - 1.0).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn swap_symmetry() {
        let t = quartic();
        let bits = p().bits();
        for (m1, m2) in [(1u32, 1u32), (2, 1), (1, 2)] {
            let a = matrix_element_integral(t, 1, 0, m1, m2).unwrap();
            let b = matrix_element_integral(t, 0, 1, m1, m2).unwrap();
            // c^{n2+1/2} T(n1,n2) = (-1)^{m2} c^{n1+1/2} T(n2,n1)
            let c = &t.constants().c;
            let lhs = Float::with_val(bits, &a * Float::with_val(bits, c.sqrt_ref()));
            let mut rhs = Float::with_val(bits, &b * Float::with_val(bits, c.sqrt_ref())) * c;
            if m2 % 2 == 1 {
                rhs = -rhs;
            }
            let rel = (Float::with_val(bits, &lhs - &rhs) / &lhs).abs();
            assert!(rel < 1e-20, "m1={m1} m2={m2}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn divergent_and_parity_guards() {
        let t = quartic();
        assert_eq!(matrix_element_integral(t, 2, 0, 1, 0), Err(Error::Divergent { left: 3, right: -1 }));
        assert!(matrix_element_asymptotic(t, 0, 0, 1, 0, 10).is_err());
        assert!(green_function_asymptotic(t, 0, 0, 10, &[p().zero()]).is_err());
    }

    #[test]
    fn growth_shift_law() {
        let t = quartic();
        let ratio = |k: u32| {
            let a = matrix_element_asymptotic(t, 0, 0, 4, 0, k).unwrap();
            let b = matrix_element_asymptotic(t, 0, 0, 2, 0, k + 1).unwrap();
            a.ratio(&b, p()).to_f64()
        };
        let (r1, r2, r3) = (ratio(100), ratio(400), ratio(1600));
        assert!(r1.is_finite() && r3 > 0.0);
        assert!((r3 - r2).abs() < (r2 - r1).abs());
        assert!((r3 / r2 - 1.0).abs() < 0.01);
    }

    #[test]
    fn green_function_reduces_to_moment() {
        let t = quartic();
        let zero = p().zero();
        let g = green_function_integral(t, 0, 0, &[zero.clone(), zero]).unwrap();
        assert!((g - 1u32).abs() < 1e-20);
    }

    #[test]
    fn green_function_shift_invariance_and_decay() {
        let t = quartic();
        let f = |a: f64, b: f64| green_function_integral(t, 0, 0, &[p().float(a), p().float(b)]).unwrap();
        let base = f(0.0, 1.0);
        let moved = f(0.7, 1.7);
        assert!(Float::with_val(128, &base - &moved).abs() < 1e-8);
        let g2 = f(0.0, 2.0);
        assert!(1u32 > base && base > g2);
        // sech products: int sech(t) sech(t + T) dt / 2 = T / sinh T.
        let expect = 2.0 / 2f64.sinh();
        assert!((g2.to_f64() - expect).abs() < 1e-14);
    }

    #[test]
    fn symmetric_rising_saddle() {
        let t = quartic();
        let eta = p().float(1.5);
        let kappa = p().float(1);
        let s = rho_saddle(t, 0, 0, &kappa, &eta, &eta).unwrap();
        assert_eq!((s.branch_1, s.branch_2), (Branch::Rising, Branch::Rising));
        assert!(Float::with_val(128, &s.tau_1 - &s.tau_2).abs() < 1e-20);
        assert!(s.b_second > 0 && !s.degenerate_pair);
        assert!(s.kappa_residual < 1e-9 && s.eta_residual < 1e-9);
        let diag = rho_diagonal_asymptotic(t, 0, 0, &kappa, &eta).unwrap();
        assert_eq!(diag.region, DiagonalRegion::SingleSaddle);
        assert!(Float::with_val(128, &diag.b - &s.b0).abs() < 1e-20);
        assert!((Float::with_val(128, &diag.gamma / &s.gamma) - 1u32).abs() < 1e-15);
    }

    #[test]
    fn symmetric_split_saddle() {
        let t = quartic();
        let eta = p().float(0.5);
        let kappa = p().float(1);
        let s = rho_saddle(t, 0, 0, &kappa, &eta, &eta).unwrap();
        assert!(s.degenerate_pair);
        assert_eq!((s.branch_1, s.branch_2), (Branch::Rising, Branch::Falling));
        assert!(s.tau_1 < s.tau_2);
        assert!(s.kappa_residual < 1e-9 && s.eta_residual < 1e-9);
        let diag = rho_diagonal_asymptotic(t, 0, 0, &kappa, &eta).unwrap();
        assert_eq!(diag.region, DiagonalRegion::SplitSaddle);
        assert!(Float::with_val(128, &diag.b - &s.b0).abs() < 1e-20);
        // Both minima together carry twice the weight of one.
        assert!((Float::with_val(128, &diag.gamma / &s.gamma) - 2u32).abs() < 1e-15);
    }

    #[test]
    fn asymmetric_saddle_residuals() {
        let t = quartic();
        let s = rho_saddle(t, 0, 1, &p().float(0.8), &p().float(1.1), &p().float(0.6)).unwrap();
        assert!(s.kappa_residual < 1e-9 && s.eta_residual < 1e-9 && s.b_second > 0);
    }

    #[test]
    fn diagonal_regions() {
        let t = quartic();
        let crossover = (1.5f64).sqrt();
        let s_inf = p().float(1) / 3u32;
        let b = rho_diagonal_asymptotic(t, 0, 0, &s_inf, &p().float(0.3)).unwrap();
        assert_eq!(b.region, DiagonalRegion::SplitSaddle);
        assert!((b.b - s_inf).abs() < 1e-30);
        let near = p().float(crossover + 1e-8);
        assert!(matches!(rho_diagonal_asymptotic(t, 0, 0, &p().float(1), &near), Err(Error::BoundaryRegion { .. })));
        let x = rho_diagonal_asymptotic(t, 0, 1, &p().float(0.9), &p().float(0.5)).unwrap();
        let y = rho_diagonal_asymptotic(t, 1, 0, &p().float(0.9), &p().float(0.5)).unwrap();
        assert!((Float::with_val(128, &x.gamma / &y.gamma) - 1u32).abs() < 1e-25);
    }

    #[test]
    fn laplace_tracks_exact_density() {
        let t = quartic();
        let eta = p().float(1.5);
        let kappa = p().float(1);
        let diag = rho_diagonal_asymptotic(t, 0, 0, &kappa, &eta).unwrap();
        let s = ground(30);
        let eta_q = Rational::from((3, 2));
        let mut last = f64::INFINITY;
        for k in [20u32, 30] {
            // x = eta sqrt(k) is irrational, so the exact orders are evaluated in floating point.
            let x = Float::with_val(128, k).sqrt() * Float::with_val(128, &eta_q);
            let ln_exact = rho_order_value(&s, &s, k, &x, &x, p()).unwrap().ln_abs_f64();
            let pred = laplace_prediction(0, 0, k, &kappa, &diag.b, &diag.gamma, p()).ln_abs_f64();
            let err = ((ln_exact - pred) / f64::from(k)).abs();
            assert!(err < 0.1 && err < last, "k={k}: {err}");
            last = err;
        }
    }
}
