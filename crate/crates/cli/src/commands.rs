//! One function per subcommand, each producing a [`Table`].

use lopt_core::density::{
    green_function_asymptotic, laplace_prediction, matrix_element_asymptotic, matrix_element_exact, rho_diagonal_asymptotic,
    rho_order_value, rho_saddle,
};
use lopt_core::euclidean::{euclidean_constants, fixed_argument_scale, SMALL_ARGUMENT_THRESHOLD};
use lopt_core::fixed_point::{build_ladder, energy_asymptotic, eval_ladder, ground_profile_normalized};
use lopt_core::recursion::{convergence_profile_a, convergence_profile_m, fixed_x_profile};
use lopt_core::{compute_series, evaluate_order, BigFloat, Error, PerturbationSeries, SignedLog, Trajectory};
use rayon::prelude::*;

use crate::args::{CurveArgs, DensityArgs, EigenRatioArgs, FixedXArgs, MatelemArgs, SeriesArgs, TrajectoriesArgs};
use crate::config::{check_order, CliError, RunConfig};
use crate::grid::parse_decimal;
use crate::table::{fmt_f64, fmt_float, fmt_rational, fmt_signed_log, Table};

type CmdResult = Result<Table, CliError>;

fn orders(ks: &[u32]) -> Result<u32, CliError> {
    if ks.is_empty() {
        return Err(CliError::Usage("at least one order is needed".into()));
    }
    if ks.contains(&0) {
        return Err(CliError::Usage("orders must be at least 1".into()));
    }
    check_order(*ks.iter().max().expect("nonempty"))
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn series(cfg: &RunConfig, n: u32, k_max: u32) -> Result<PerturbationSeries, CliError> {
    Ok(compute_series(&cfg.potential, n, k_max)?)
}

fn trajectory(cfg: &RunConfig) -> Result<Trajectory, CliError> {
    Ok(Trajectory::new(&cfg.potential, cfg.precision)?)
}

fn collect_rows<T, F>(items: &[T], f: F) -> Result<Vec<Vec<String>>, CliError>
where
    T: Sync,
    F: Fn(&T) -> Result<Vec<String>, CliError> + Sync + Send,
{
    items.par_iter().map(f).collect()
}

pub fn run_series(cfg: &RunConfig, a: &SeriesArgs) -> CmdResult {
    let k_max = check_order(a.k_max)?;
    let s = series(cfg, a.n, k_max)?;
    let mut t = if a.coefficients {
        let mut t = Table::new(header(&["k", "power", "coefficient"]));
        for k in 0..=k_max {
            for (l, c) in s.order(k).expect("computed").terms() {
                t.push(vec![k.to_string(), l.to_string(), fmt_rational(c)]);
            }
        }
        t
    } else {
        let mut t = Table::new(header(&["k", "energy", "energy_decimal", "degree", "leading_coefficient"]));
        for k in 0..=k_max {
            let e = s.energy(k).expect("computed");
            let order = s.order(k).expect("computed");
            t.push(vec![
                k.to_string(),
                fmt_rational(e),
                fmt_float(&cfg.precision.rational(e)),
                order.degree().to_string(),
                fmt_rational(&order.leading_coefficient()),
            ]);
        }
        t
    };
    t.comment = cfg.comment("series", &format!("level {}", a.n));
    Ok(t)
}

pub fn run_curve_a(cfg: &RunConfig, a: &CurveArgs) -> CmdResult {
    let k_max = orders(&a.k)?;
    let prec = cfg.precision;
    let s = series(cfg, a.n, k_max)?;
    let traj = trajectory(cfg)?;
    let mut names = vec!["xi".to_string(), "A".to_string()];
    for k in &a.k {
        names.push(format!("A_{k}"));
        names.push(format!("abs_diff_{k}"));
    }
    let xis = a.xi.points(prec);
    let rows = collect_rows(&xis, |xi| {
        let big_a = traj.exponent_a(xi)?;
        let mut row = vec![fmt_float(xi), fmt_float(&big_a)];
        for &k in &a.k {
            match convergence_profile_a(&s, k, xi, prec) {
                Ok(ak) => {
                    let diff = BigFloat::with_val(prec.bits(), &ak - &big_a).abs();
                    row.push(fmt_float(&ak));
                    row.push(fmt_float(&diff));
                }
                Err(Error::ZeroValue { .. }) => row.extend(["nan".to_string(), "nan".to_string()]),
                Err(e) => return Err(e.into()),
            }
        }
        Ok(row)
    })?;
    let mut t = Table::new(names);
    t.rows = rows;
    t.comment = cfg.comment("curve-A", &format!("level {}; xi {}", a.n, a.xi));
    Ok(t)
}

pub fn run_curve_m(cfg: &RunConfig, a: &CurveArgs) -> CmdResult {
    let k_max = orders(&a.k)?;
    let prec = cfg.precision;
    let s = series(cfg, a.n, k_max)?;
    let traj = trajectory(cfg)?;
    let mut names = header(&["xi", "tau", "Q", "branch", "A"]);
    for k in &a.k {
        names.push(format!("M_{k}"));
        names.push(format!("M_asym_{k}"));
        names.push(format!("rel_diff_{k}"));
        names.push(format!("small_argument_{k}"));
    }
    let xis = a.xi.points(prec);
    let rows = collect_rows(&xis, |xi| {
        let pt = traj.point_by_xi(xi)?;
        let mut row = vec![fmt_float(xi), fmt_float(&pt.tau), fmt_float(&pt.q), pt.branch.as_str().to_string(), fmt_float(&pt.a)];
        for &k in &a.k {
            let asym = traj.m_prefactor(&pt, a.n, k)?.to_float(prec);
            let mk = convergence_profile_m(&s, k, xi, &pt.a, prec)?;
            let rel = BigFloat::with_val(prec.bits(), &mk / &asym) - 1u32;
            // k xi^2 < 4 is outside the regime of the asymptote.
            let small = BigFloat::with_val(prec.bits(), xi.square_ref()) * k < SMALL_ARGUMENT_THRESHOLD;
            row.extend([fmt_float(&mk), fmt_float(&asym), fmt_float(&rel), small.to_string()]);
        }
        Ok(row)
    })?;
    let mut t = Table::new(names);
    t.rows = rows;
    t.comment = cfg.comment("curve-M", &format!("level {}; xi {}", a.n, a.xi));
    Ok(t)
}

pub fn run_fixed_x(cfg: &RunConfig, a: &FixedXArgs) -> CmdResult {
    let k_max = orders(&a.k)?;
    let prec = cfg.precision;
    let s = series(cfg, a.n, k_max)?;
    let consts = euclidean_constants(&cfg.potential, prec)?;
    let ladder = build_ladder(a.n);
    let scales: Vec<SignedLog> = a.k.iter().map(|&k| fixed_argument_scale(&consts, a.n, k, prec)).collect();
    let mut names = header(&["x", "profile"]);
    for k in &a.k {
        names.push(format!("scaled_{k}"));
        names.push(format!("abs_diff_{k}"));
    }
    let xs = a.x.points(prec);
    let rows = collect_rows(&xs, |x| {
        // Level 0 is normalized to start as x^2; other levels use the raw large-order scale.
        let profile = if a.n == 0 { ground_profile_normalized(x, prec)? } else { eval_ladder(&ladder, x, prec)? };
        let mut row = vec![fmt_float(x), fmt_float(&profile)];
        for (&k, scale) in a.k.iter().zip(&scales) {
            let scaled = if a.n == 0 {
                fixed_x_profile(&s, k, x, prec)?
            } else {
                let v = evaluate_order(&s, k, x, prec)?;
                (&SignedLog::from_float(&v) / scale).to_float(prec)
            };
            let diff = BigFloat::with_val(prec.bits(), &scaled - &profile).abs();
            row.extend([fmt_float(&scaled), fmt_float(&diff)]);
        }
        Ok(row)
    })?;
    let mut t = Table::new(names);
    t.rows = rows;
    t.comment = cfg.comment("fixed-x", &format!("level {}; x {}", a.n, a.x));
    Ok(t)
}

pub fn run_eigen_ratio(cfg: &RunConfig, a: &EigenRatioArgs) -> CmdResult {
    let k_max = check_order(a.k_max)?;
    if k_max == 0 {
        return Err(CliError::Usage("--k-max must be at least 1".into()));
    }
    let prec = cfg.precision;
    let s = series(cfg, a.n, k_max)?;
    let consts = euclidean_constants(&cfg.potential, prec)?;
    let mut t = Table::new(header(&["k", "energy", "energy_decimal", "asym_sign", "asym_ln_abs", "ratio"]));
    for k in 1..=k_max {
        let e = s.energy(k).expect("computed");
        let asym = energy_asymptotic(&consts, a.n, k, prec)?;
        let exact = SignedLog::from_rational(e, prec);
        let (sign, ln) = fmt_signed_log(&asym);
        t.push(vec![
            k.to_string(),
            fmt_rational(e),
            fmt_float(&prec.rational(e)),
            sign,
            ln,
            fmt_float(&exact.ratio(&asym, prec)),
        ]);
    }
    t.comment = cfg.comment("eigen-ratio", &format!("level {}", a.n));
    Ok(t)
}

pub fn run_matelem(cfg: &RunConfig, a: &MatelemArgs) -> CmdResult {
    let k_max = check_order(a.k_max)?;
    let prec = cfg.precision;
    let shifts: Option<Vec<BigFloat>> = match &a.shifts {
        None => None,
        Some(list) => {
            if a.m2 != 0 {
                return Err(CliError::Usage("--shifts applies to position operators only (m2 = 0)".into()));
            }
            Some(list.iter().map(|t| parse_decimal(t, prec).map_err(CliError::Usage)).collect::<Result<_, _>>()?)
        }
    };
    // With shifts the operator is x(tau_1)...x(tau_m); its equal-time limit is x^m.
    let m1 = shifts.as_ref().map_or(a.m1, |s| s.len() as u32);
    let equal_time = shifts.as_ref().is_none_or(|s| s.iter().all(|t| t.is_zero()));
    let first = series(cfg, a.n1, k_max)?;
    let second = series(cfg, a.n2, k_max)?;
    let odd = (a.n1 + a.n2 + m1 + a.m2) % 2 == 1;
    let traj = if odd { None } else { Some(trajectory(cfg)?) };
    let ks: Vec<u32> = (0..=k_max).collect();
    let rows = collect_rows(&ks, |&k| {
        let (exact_text, exact_dec, exact_log) = if equal_time {
            let e = matrix_element_exact(&first, &second, m1, a.m2, k)?;
            let text = format!("{}√π", fmt_rational(&e.rational_part));
            (text, fmt_float(&e.to_float(prec)), Some(e.to_signed_log(prec)))
        } else {
            (String::new(), String::new(), None)
        };
        let asym = match (&traj, k) {
            (None, _) => Some(SignedLog::zero(prec)),
            (Some(_), 0) => None,
            (Some(t), _) => Some(match &shifts {
                Some(sh) => green_function_asymptotic(t, a.n1, a.n2, k, sh)?,
                None => matrix_element_asymptotic(t, a.n1, a.n2, a.m1, a.m2, k)?,
            }),
        };
        let (sign, ln) = asym.as_ref().map_or((String::new(), String::new()), fmt_signed_log);
        let ratio = match (&exact_log, &asym) {
            (Some(e), Some(s)) if !s.is_zero() => fmt_float(&e.ratio(s, prec)),
            _ => String::new(),
        };
        Ok(vec![k.to_string(), exact_text, exact_dec, sign, ln, ratio])
    })?;
    let mut t = Table::new(header(&["k", "exact", "exact_decimal", "asym_sign", "asym_ln_abs", "ratio"]));
    t.rows = rows;
    let what = match &a.shifts {
        Some(list) => format!("<{}| x(tau) at tau = {} |{}>", a.n2, list.join(" "), a.n1),
        None => format!("<{}| x^{} (-d/dx)^{} |{}>", a.n2, a.m1, a.m2, a.n1),
    };
    t.comment = cfg.comment("matelem", &what);
    Ok(t)
}

pub fn run_density(cfg: &RunConfig, a: &DensityArgs) -> CmdResult {
    let k_max = orders(&a.k)?;
    let prec = cfg.precision;
    let bits = prec.bits();
    let parse = |t: &str| parse_decimal(t, prec).map_err(CliError::Usage);
    let kappa = parse(&a.kappa)?;
    let eta1 = parse(&a.eta)?;
    let eta2 = match &a.eta2 {
        Some(t) => parse(t)?,
        None => eta1.clone(),
    };
    if !(kappa > 0 && eta1 > 0 && eta2 > 0) {
        return Err(CliError::Usage("kappa and eta must be positive".into()));
    }
    let first = series(cfg, a.n1, k_max)?;
    let second = series(cfg, a.n2, k_max)?;
    let traj = trajectory(cfg)?;
    let (region, b, gamma) = if eta1 == eta2 {
        let d = rho_diagonal_asymptotic(&traj, a.n1, a.n2, &kappa, &eta1)?;
        (d.region.as_str().to_string(), d.b, d.gamma)
    } else {
        let s = rho_saddle(&traj, a.n1, a.n2, &kappa, &eta1, &eta2)?;
        (format!("{}/{}", s.branch_1.as_str(), s.branch_2.as_str()), s.b0, s.gamma)
    };
    let rows = collect_rows(&a.k, |&k| {
        let root_n = (prec.float(k) / &kappa).sqrt();
        let x1 = BigFloat::with_val(bits, &eta1 * &root_n);
        let x2 = BigFloat::with_val(bits, &eta2 * &root_n);
        let exact = rho_order_value(&first, &second, k, &x1, &x2, prec)?;
        let pred = laplace_prediction(a.n1, a.n2, k, &kappa, &b, &gamma, prec);
        let (sign, ln_exact) = fmt_signed_log(&exact);
        let ln_pred = pred.ln_abs_f64();
        let per_k = (exact.ln_abs_f64() - ln_pred) / f64::from(k);
        Ok(vec![
            k.to_string(),
            fmt_float(&x1),
            fmt_float(&x2),
            region.clone(),
            fmt_float(&b),
            fmt_float(&gamma),
            sign,
            ln_exact,
            fmt_f64(ln_pred),
            fmt_f64(per_k),
        ])
    })?;
    let mut t = Table::new(header(&[
        "k", "x1", "x2", "region", "B", "gamma", "sign", "ln_abs_exact", "ln_predicted", "log_diff_per_k",
    ]));
    t.rows = rows;
    t.comment = cfg.comment(
        "density",
        &format!("levels {} {}; kappa {}; eta {} {}", a.n1, a.n2, a.kappa, a.eta, a.eta2.as_deref().unwrap_or(&a.eta)),
    );
    Ok(t)
}

pub fn run_trajectories(cfg: &RunConfig, a: &TrajectoriesArgs) -> CmdResult {
    let prec = cfg.precision;
    let traj = trajectory(cfg)?;
    let ps: Vec<BigFloat> = a.p_kappa.iter().map(|t| parse_decimal(t, prec).map_err(CliError::Usage)).collect::<Result<_, _>>()?;
    let mut t = Table::new(header(&["p_kappa", "kappa", "eta", "tau", "branch"]));
    let blocks: Vec<Vec<Vec<String>>> = collect_blocks(&ps, |p| {
        Ok(traj
            .kappa_eta_rows(p, a.stride)?
            .into_iter()
            .map(|r| vec![fmt_float(p), fmt_float(&r.kappa), fmt_float(&r.eta), fmt_float(&r.tau), r.branch.as_str().to_string()])
            .collect())
    })?;
    t.rows = blocks.into_iter().flatten().collect();
    t.comment = cfg.comment("trajectories", &format!("stride {}", a.stride));
    Ok(t)
}

fn collect_blocks<F>(ps: &[BigFloat], f: F) -> Result<Vec<Vec<Vec<String>>>, CliError>
where
    F: Fn(&BigFloat) -> Result<Vec<Vec<String>>, CliError> + Sync + Send,
{
    ps.par_iter().map(f).collect()
}
