//! Acceptance suite: one test per criterion, each computed here from
//! `lopt_core` primitives and checked against closed forms where they exist.

use std::time::{Duration, Instant};

use lopt_core::density::{matrix_element_asymptotic, matrix_element_exact};
use lopt_core::euclidean::euclidean_constants;
use lopt_core::fixed_point::ground_profile_normalized;
use lopt_core::recursion::oscillator_oracle;
use lopt_core::{
    compute_series, energy_asymptotic, BigFloat, Branch, PerturbationSeries, Potential, Precision, Rational, SignedLog,
    Trajectory, WaveOrder,
};
use rayon::prelude::*;

const PREC: Precision = Precision::DEFAULT;
/// Working precision for evaluating the exact polynomials; enough to absorb
/// the cancellation between terms of size `x^{4k}` at `k = 40`, `x = 2 sqrt 40`.
const EVAL_BITS: u32 = 2048;

fn quartic() -> Potential {
    Potential::quartic()
}

fn sextic() -> Potential {
    Potential::from_pairs(&[(4, Rational::from((-1, 10))), (6, Rational::from((-1, 100)))]).unwrap()
}

fn within(start: Instant, limit: Duration, what: &str) {
    let took = start.elapsed();
    assert!(took < limit, "{what} took {took:?}, limit {limit:?}");
}

/// `Psi_{n,k}(x) = P(x) exp(-x^2/2)` at `EVAL_BITS`, by Horner over every degree.
fn psi(order: &WaveOrder, x: &BigFloat) -> BigFloat {
    let x = BigFloat::with_val(EVAL_BITS, x);
    let mut acc = BigFloat::new(EVAL_BITS);
    for l in (0..=order.degree()).rev() {
        acc *= &x;
        acc += BigFloat::with_val(EVAL_BITS, &order.coefficient(l));
    }
    let gauss = (-BigFloat::with_val(EVAL_BITS, x.square_ref()) / 2u32).exp();
    acc * gauss
}

fn ln_abs(x: &BigFloat) -> f64 {
    BigFloat::with_val(EVAL_BITS, x.abs_ref()).ln().to_f64()
}

fn ln_factorial(k: u32) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn series(pot: &Potential, n: u32, k: u32) -> PerturbationSeries {
    compute_series(pot, n, k).unwrap()
}

#[test]
fn c01_recursion_matches_basis_sums() {
    let start = Instant::now();
    let q = quartic();
    let e0 = series(&q, 0, 2);
    let e1 = series(&q, 1, 1);
    assert_eq!(e0.energy(1), Some(&Rational::from((-3, 4))));
    assert_eq!(e0.energy(2), Some(&Rational::from((-21, 8))));
    assert_eq!(e1.energy(1), Some(&Rational::from((-15, 4))));
    for pot in [quartic(), sextic()] {
        for n in 0..=2 {
            for k in 1..=3 {
                let s = series(&pot, n, k);
                let oracle = oscillator_oracle(&pot, n, k).unwrap();
                assert_eq!(s.energies()[1..], oracle[..], "n = {n}, K = {k}");
            }
        }
    }
    within(start, Duration::from_secs(1), "recursion check");
}

#[test]
fn c02_leading_coefficient_law() {
    let start = Instant::now();
    for (pot, minus_quarter_a4) in [(quartic(), Rational::from((1, 4))), (sextic(), Rational::from((1, 40)))] {
        for n in 0..=1u32 {
            let s = series(&pot, n, 40);
            let mut expect = Rational::from(1);
            for k in 0..=40u32 {
                if k > 0 {
                    expect = expect * &minus_quarter_a4 / k;
                }
                assert_eq!(s.order(k).unwrap().coefficient(4 * k + n), expect, "n = {n}, k = {k}");
            }
        }
    }
    within(start, Duration::from_secs(30), "leading coefficients");
}

#[test]
#[allow(clippy::approx_constant)] // the tabulated ten-digit value is checked as printed
fn c03_quartic_euclidean_constants() {
    let start = Instant::now();
    let c = euclidean_constants(&quartic(), PREC).unwrap();
    let bits = PREC.bits();
    let two = BigFloat::with_val(bits, 2);
    // V = Q^2/2 - Q^4 vanishes at 1/sqrt 2; int_0^{Q+} 2 sqrt(2V) dQ = 2 int q sqrt(1 - 2q^2) = 1/3;
    // the bounce is Q+ sech(tau - tau_turn) with Q ~ e^tau at early times, so e^{tau_turn} = 2 Q+.
    let closed = [
        ("Q+", BigFloat::with_val(bits, two.sqrt_ref()).recip()),
        ("s_inf", BigFloat::with_val(bits, 1) / 3u32),
        ("c", two.clone()),
        ("tau_turn", BigFloat::with_val(bits, two.ln_ref()) / 2u32),
    ];
    let got = [&c.q_plus, &c.s_infinity, &c.c, &c.tau_turn];
    for ((name, want), got) in closed.iter().zip(got) {
        let dev = BigFloat::with_val(bits, got - want).abs().to_f64();
        assert!(dev < 1e-10, "{name}: deviation {dev:e}");
    }
    assert!((c.q_plus.to_f64() - 0.7071067812).abs() < 1e-10);
    within(start, Duration::from_secs(5), "euclidean constants");
}

#[test]
fn c04_exponent_profile_converges() {
    let start = Instant::now();
    let traj = Trajectory::new(&quartic(), PREC).unwrap();
    let s = series(&quartic(), 0, 30);
    let ks = [10u32, 20, 30];
    let rows: Vec<(f64, Vec<f64>)> = [0.75, 1.0, 1.5, 2.0]
        .par_iter()
        .map(|&xi| {
            let limit = traj.exponent_a(&PREC.float(xi)).unwrap().to_f64();
            let gaps = ks
                .iter()
                .map(|&k| {
                    let x = BigFloat::with_val(EVAL_BITS, k).sqrt() * xi;
                    let a_k = -(ln_abs(&psi(s.order(k).unwrap(), &x)) - ln_factorial(k)) / k as f64;
                    (a_k - limit).abs()
                })
                .collect();
            (xi, gaps)
        })
        .collect();
    within(start, Duration::from_secs(120), "exponent profile");
    for (xi, gaps) in rows {
        assert!(strictly_decreasing(&gaps), "xi = {xi}: {gaps:?}");
        assert!(gaps[2] < 0.05, "xi = {xi}: |A_30 - A| = {:.4} (tolerance 0.05)", gaps[2]);
    }
}

#[test]
fn c05_prefactor_profile_converges() {
    let traj = Trajectory::new(&quartic(), PREC).unwrap();
    let s = series(&quartic(), 0, 40);
    let xi = 1.5;
    let pt = traj.point_by_xi(&PREC.float(xi)).unwrap();
    let a = pt.a.to_f64();
    let m = traj.m_prefactor(&pt, 0, 1).unwrap().to_f64();
    let errs: Vec<f64> = [10u32, 20, 30, 40]
        .par_iter()
        .map(|&k| {
            let x = BigFloat::with_val(EVAL_BITS, k).sqrt() * xi;
            let v = psi(s.order(k).unwrap(), &x);
            let ln_m_k = ln_abs(&v) - ln_factorial(k - 1) + k as f64 * a;
            let m_k = ln_m_k.exp() * if v.is_sign_negative() { -1.0 } else { 1.0 };
            (m_k / m - 1.0).abs()
        })
        .collect();
    assert!(strictly_decreasing(&errs), "{errs:?}");
    assert!(errs[3] < 0.1, "{errs:?}");

    let turn = traj.point_by_q(&traj.constants().q_plus, Branch::Rising).unwrap();
    assert!((turn.xi.to_f64() - 3f64.sqrt()).abs() < 1e-9, "turning point at xi = {}", turn.xi.to_f64());
    let m_turn = traj.m_prefactor(&turn, 0, 1).unwrap().to_f64();
    assert!(m_turn.is_finite() && (m_turn - 0.2599).abs() <= 0.001, "M(sqrt 3) = {m_turn}");
}

#[test]
fn c06_fixed_x_profile_converges() {
    let s = series(&quartic(), 0, 40);
    let ks = [10u32, 20, 30, 40];
    let per_x: Vec<Vec<f64>> = (0..=40)
        .into_par_iter()
        .map(|i| {
            let x = PREC.float(i) / 20u32;
            let limit = ground_profile_normalized(&x, PREC).unwrap().to_f64();
            ks.iter()
                .map(|&k| {
                    let order = s.order(k).unwrap();
                    let scaled = psi(order, &x) / BigFloat::with_val(EVAL_BITS, &order.coefficient(2));
                    (scaled.to_f64() - limit).abs()
                })
                .collect()
        })
        .collect();
    let maxima: Vec<f64> = (0..ks.len()).map(|j| per_x.iter().map(|r| r[j]).fold(0.0, f64::max)).collect();
    assert!(strictly_decreasing(&maxima), "{maxima:?}");
}

#[test]
fn c07_energy_asymptote() {
    let traj = Trajectory::new(&quartic(), PREC).unwrap();
    let s = series(&quartic(), 0, 40);
    // E_{0,k} ~ -(sqrt 6 / pi^{3/2}) 3^k k! / sqrt k for the quartic.
    let closed = |k: u32| -> f64 {
        0.5 * 6f64.ln() - 1.5 * std::f64::consts::PI.ln() + k as f64 * 3f64.ln() + ln_factorial(k) - 0.5 * (k as f64).ln()
    };
    let ratio = |k: u32| -> f64 {
        let exact = SignedLog::from_rational(s.energy(k).unwrap(), PREC);
        let asym = energy_asymptotic(traj.constants(), 0, k, PREC).unwrap();
        assert_eq!(asym.sign(), -1);
        assert!((asym.ln_abs_f64() - closed(k)).abs() < 1e-9, "asymptote at k = {k} off its closed form");
        assert_eq!(exact.sign(), -1);
        (exact.ln_abs_f64() - closed(k)).exp()
    };
    let (r20, r40) = (ratio(20), ratio(40));
    assert!((r40 - 1.0).abs() < (r20 - 1.0).abs(), "r_20 = {r20}, r_40 = {r40}");
    assert!((r40 - 1.0).abs() < 0.15, "r_40 = {r40}");
}

/// `<0| x^2 |0>_k` as the rational multiple of `sqrt(pi)`, from Gaussian moments
/// `int x^t e^{-x^2} dx = (t-1)!! / 2^{t/2} sqrt(pi)`.
fn ground_x2_element(s: &PerturbationSeries, k: u32) -> Rational {
    let moment = |t: u32| -> Rational {
        let mut r = Rational::from(1);
        for odd in (1..t).step_by(2) {
            r = r * odd / 2u32;
        }
        r
    };
    let mut total = Rational::new();
    for j in 0..=k {
        let (a, b) = (s.order(j).unwrap(), s.order(k - j).unwrap());
        for (la, ca) in a.terms() {
            for (lb, cb) in b.terms() {
                total += Rational::from(ca * cb) * moment(la + lb + 2);
            }
        }
    }
    total
}

#[test]
fn c08_matrix_element_trend() {
    let traj = Trajectory::new(&quartic(), PREC).unwrap();
    let levels: Vec<PerturbationSeries> = (0..=2).map(|n| series(&quartic(), n, 40)).collect();
    let ln_sqrt_pi = 0.5 * std::f64::consts::PI.ln();
    let ratios: Vec<f64> = [20u32, 25, 30, 35, 40]
        .par_iter()
        .map(|&k| {
            let exact = ground_x2_element(&levels[0], k);
            let core = matrix_element_exact(&levels[0], &levels[0], 2, 0, k).unwrap();
            assert_eq!(core.rational_part, exact, "k = {k}");
            let asym = matrix_element_asymptotic(&traj, 0, 0, 2, 0, k).unwrap();
            let ln_exact = BigFloat::with_val(EVAL_BITS, &exact).abs().ln().to_f64() + ln_sqrt_pi;
            let sign = if exact < 0 { -1.0 } else { 1.0 } * asym.sign() as f64;
            sign * (ln_exact - asym.ln_abs_f64()).exp()
        })
        .collect();
    let rising = ratios.windows(2).all(|w| w[1] > w[0]);
    let falling = ratios.windows(2).all(|w| w[1] < w[0]);
    assert!(rising || falling, "{ratios:?}");
    let change = (ratios[4] / ratios[0] - 1.0).abs();
    assert!(change < 0.2, "relative change {change} over {ratios:?}");

    for n1 in 0..=2u32 {
        for n2 in 0..=2u32 {
            for m1 in 0..=3u32 {
                for m2 in 0..=3 - m1 {
                    if (n1 + n2 + m1 + m2) % 2 == 0 {
                        continue;
                    }
                    for k in 0..=12u32 {
                        let v = matrix_element_exact(&levels[n1 as usize], &levels[n2 as usize], m1, m2, k).unwrap();
                        assert!(v.is_zero(), "<{n2}| x^{m1} D^{m2} |{n1}>_{k} = {:?}", v.rational_part);
                    }
                }
            }
        }
    }
}

#[test]
fn c09_structural_invariants() {
    for pot in [quartic(), sextic()] {
        let traj = Trajectory::new(&pot, PREC).unwrap();
        let bits = PREC.bits();
        let q_plus = traj.constants().q_plus.clone();
        let v = |q: &BigFloat| -> BigFloat { pot.values(q).v };

        // Half P^2 = V at 50 points, 25 per branch.
        for j in 1..=25u32 {
            let q = BigFloat::with_val(bits, &q_plus * j) / 26u32;
            for branch in [Branch::Rising, Branch::Falling] {
                let pt = traj.point_by_q(&q, branch).unwrap();
                let kinetic = BigFloat::with_val(bits, pt.p.square_ref()) / 2u32;
                let dev = (kinetic - v(&q)).abs().to_f64();
                assert!(dev <= 1e-10, "zero energy off by {dev:e} at q = {}", q.to_f64());
            }
        }

        // Central second difference of Q(tau) against V'(Q).
        let h = 1e-4;
        let q_at = |t: f64| traj.point_by_tau(&PREC.float(t)).unwrap().q;
        for t in [-2.0, -0.5, 0.2, 0.9, 1.7] {
            let mid = q_at(t);
            let second = (q_at(t + h) + q_at(t - h) - BigFloat::with_val(bits, &mid * 2u32)) / (h * h);
            let dev = (second - pot.values(&mid).dv).abs().to_f64();
            assert!(dev <= 1e-6, "equation of motion off by {dev:e} at tau = {t}");
        }

        // S(kappa, eta) = kappa (s/lambda + ln(lambda/kappa)) at fixed eta/sqrt(kappa),
        // so S(2 kappa) = 2 S(kappa) - 2 kappa ln 2.
        for xi in [0.5, 1.2, 1.7, 2.5] {
            let pt = traj.point_by_xi(&PREC.float(xi)).unwrap();
            let (s, lambda) = (pt.s.to_f64(), pt.lambda.to_f64());
            let action = |kappa: f64| kappa * (s / lambda + (lambda / kappa).ln());
            let kappa = 0.65;
            let dev = (action(2.0 * kappa) - 2.0 * action(kappa) + 2.0 * kappa * 2f64.ln()).abs();
            assert!(dev <= 1e-9, "scaling law off by {dev:e}");
            let core_dev = (pt.action(&PREC.float(2.0 * kappa)).to_f64() - action(2.0 * kappa)).abs();
            assert!(core_dev <= 1e-9, "action off by {core_dev:e}");
        }

        // f(xi) = A(0) + xi^2/2 - A(xi) >= 0 with A(0) = ln s_inf.
        let a0 = traj.constants().s_infinity.to_f64().ln();
        for i in 1..=100 {
            let xi = 0.05 * i as f64;
            let f = a0 + xi * xi / 2.0 - traj.exponent_a(&PREC.float(xi)).unwrap().to_f64();
            assert!(f >= 0.0, "f({xi}) = {f}");
        }
    }
}

#[test]
fn c10_verify_suite_within_budget() {
    let start = Instant::now();
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = lopt_cli::run(["lopt", "verify"], &mut out, &mut err);
    let took = start.elapsed();
    assert!(code == 0 || code == 1, "verify aborted with exit code {code}: {}", String::from_utf8_lossy(&err));
    assert_eq!(String::from_utf8(out).unwrap().lines().count(), 12);
    assert!(took < Duration::from_secs(300), "verify took {took:?}");
}
