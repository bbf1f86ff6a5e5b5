use lopt_core::density::{matrix_element_exact, rho_order_exact};
use lopt_core::recursion::oscillator_oracle;
use lopt_core::*;
use proptest::prelude::*;
use std::sync::OnceLock;

fn series(n: u32) -> &'static PerturbationSeries {
    static S: OnceLock<Vec<PerturbationSeries>> = OnceLock::new();
    &S.get_or_init(|| (0..3).map(|n| compute_series(&Potential::quartic(), n, 12).unwrap()).collect())[n as usize]
}

fn small_rational() -> impl Strategy<Value = Rational> {
    (-40i32..=40, 1u32..=9).prop_map(|(p, q)| Rational::from((p, q)))
}

fn potential() -> impl Strategy<Value = Potential> {
    (1i32..=9, 0i32..=4, 0i32..=4).prop_map(|(a4, a6, a8)| {
        Potential::from_pairs(&[
            (4, Rational::from((-a4, 4))),
            (6, Rational::from((-a6, 16))),
            (8, Rational::from((-a8, 64))),
        ])
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn orders_solve_their_equation(k in 0u32..=12, n in 0u32..=2, x in small_rational()) {
        prop_assert_eq!(series(n).residual_at(k, &x).unwrap(), Rational::new());
    }

    #[test]
    fn orders_have_level_parity(k in 0u32..=12, n in 0u32..=2, x in small_rational()) {
        let order = series(n).order(k).unwrap();
        let mirrored = order.polynomial_at(&Rational::from(-&x));
        let direct = order.polynomial_at(&x);
        if n % 2 == 0 {
            prop_assert_eq!(mirrored, direct);
        } else {
            prop_assert_eq!(mirrored, -direct);
        }
    }

    #[test]
    fn energies_match_oracle(pot in potential(), n in 0u32..=2) {
        let s = compute_series(&pot, n, 3).unwrap();
        let oracle = oscillator_oracle(&pot, n, 3).unwrap();
        // The oracle starts at the first correction.
        prop_assert_eq!(&s.energies()[1..], &oracle[..]);
    }

    #[test]
    fn equal_level_density_is_symmetric(k in 0u32..=12, n in 0u32..=2, a in small_rational(), b in small_rational()) {
        let s = series(n);
        prop_assert_eq!(rho_order_exact(s, s, k, &a, &b).unwrap(), rho_order_exact(s, s, k, &b, &a).unwrap());
    }

    #[test]
    fn position_operator_is_symmetric(k in 0u32..=8, m1 in 0u32..=3, n1 in 0u32..=2, n2 in 0u32..=2) {
        let a = matrix_element_exact(series(n1), series(n2), m1, 0, k).unwrap();
        let b = matrix_element_exact(series(n2), series(n1), m1, 0, k).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn signed_log_round_trips(a in -1e6f64..1e6, b in -1e6f64..1e6) {
        prop_assume!(a != 0.0 && b != 0.0);
        let p = Precision::DEFAULT;
        let (la, lb) = (SignedLog::from_float(&p.float(a)), SignedLog::from_float(&p.float(b)));
        let prod = (&la * &lb).to_f64();
        prop_assert!((prod / (a * b) - 1.0).abs() < 1e-12);
        let back = (&(&la * &lb) / &lb).to_f64();
        prop_assert!((back / a - 1.0).abs() < 1e-12);
    }
}

#[test]
fn trajectory_is_mirror_symmetric() {
    let p = Precision::DEFAULT;
    let traj = Trajectory::new(&Potential::quartic(), p).unwrap();
    let turn = traj.constants().tau_turn.clone();
    let offsets = [0.1f64, 0.9, 2.5, 7.0];
    let early: Vec<_> = offsets.iter().map(|d| p.float(&turn - p.float(*d))).collect();
    let late: Vec<_> = offsets.iter().map(|d| p.float(&turn + p.float(*d))).collect();
    let a = traj.positions_at_times(&early).unwrap();
    let b = traj.positions_at_times(&late).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!(p.float(x - y).abs() < 1e-30);
    }
}
