//! Settings shared by every subcommand and the exit-code mapping.

use std::path::{Path, PathBuf};

use lopt_core::{Error, Potential, Precision};

/// Environment variable holding the default precision in bits.
pub const PRECISION_ENV: &str = "LOPT_PRECISION_BITS";
pub const DEFAULT_PRECISION_BITS: u32 = 128;
pub const MIN_PRECISION_BITS: u32 = 64;
pub const MAX_ORDER: u32 = 200;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECKS_FAILED: i32 = 1;
pub const EXIT_POTENTIAL: i32 = 2;
pub const EXIT_NOT_MONOTONE: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;
pub const EXIT_USAGE: i32 = 5;

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Usage(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => core_exit_code(e),
            CliError::Usage(_) | CliError::Io(_) => EXIT_USAGE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

fn core_exit_code(e: &Error) -> i32 {
    match e {
        Error::Potential(_) => EXIT_POTENTIAL,
        Error::NotMonotone { .. } => EXIT_NOT_MONOTONE,
        Error::InvalidArgument(_)
        | Error::OutOfRange { .. }
        | Error::BoundaryRegion { .. }
        | Error::Divergent { .. }
        | Error::ZeroNormalizer { .. } => EXIT_USAGE,
        _ => EXIT_NUMERIC,
    }
}

/// Validated settings for one run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub potential: Potential,
    pub potential_label: String,
    pub precision: Precision,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(potential: Option<&Path>, precision_flag: Option<u32>, env_value: Option<&str>, output: Option<PathBuf>) -> Result<Self, CliError> {
        let bits = resolve_precision(precision_flag, env_value)?;
        let (potential, potential_label) = match potential {
            None => (Potential::quartic(), describe(&Potential::quartic())),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                let pot = Potential::from_json(&text).map_err(Error::from)?;
                let label = describe(&pot);
                (pot, label)
            }
        };
        Ok(RunConfig { potential, potential_label, precision: Precision::new(bits), output })
    }

    /// Quadrature tolerance used for trajectory integrals, as a power of two.
    pub fn tolerance_exponent(&self) -> u32 {
        3 * self.precision.bits() / 4
    }

    pub fn comment(&self, command: &str, extra: &str) -> String {
        let mut c = format!(
            "lopt {command}; potential {}; precision {} bits; quadrature tolerance 2^-{}; evaluations certified to 40 bits",
            self.potential_label,
            self.precision.bits(),
            self.tolerance_exponent()
        );
        if !extra.is_empty() {
            c.push_str("; ");
            c.push_str(extra);
        }
        c
    }

    pub fn is_quartic_reference(&self) -> bool {
        self.potential.coefficients() == Potential::quartic().coefficients()
    }
}

/// Flag, then environment, then the default; at least 64 bits.
pub fn resolve_precision(flag: Option<u32>, env_value: Option<&str>) -> Result<u32, CliError> {
    let bits = match (flag, env_value) {
        (Some(b), _) => b,
        (None, Some(text)) => text
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{PRECISION_ENV}={text:?} is not a bit count")))?,
        (None, None) => DEFAULT_PRECISION_BITS,
    };
    if bits < MIN_PRECISION_BITS {
        return Err(CliError::Usage(format!("precision {bits} is below the minimum of {MIN_PRECISION_BITS} bits")));
    }
    Ok(bits)
}

pub fn check_order(k: u32) -> Result<u32, CliError> {
    if k > MAX_ORDER {
        return Err(CliError::Usage(format!("order {k} exceeds the maximum of {MAX_ORDER}")));
    }
    Ok(k)
}

/// `V = Q^2/2 + a4 Q^4 + ...` written out.
fn describe(pot: &Potential) -> String {
    let mut s = String::from("Q^2/2");
    for (degree, a) in pot.coefficients() {
        if *a.numer() < 0 {
            s.push_str(&format!(" - {}Q^{degree}", coefficient_text(&(-a))));
        } else {
            s.push_str(&format!(" + {}Q^{degree}", coefficient_text(&a)));
        }
    }
    s
}

fn coefficient_text(a: &lopt_core::Rational) -> String {
    if *a == 1 {
        String::new()
    } else if *a.denom() == 1 {
        format!("{a} ")
    } else {
        format!("({a}) ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precision_precedence() {
        assert_eq!(resolve_precision(Some(256), Some("96")).unwrap(), 256);
        assert_eq!(resolve_precision(None, Some("96")).unwrap(), 96);
        assert_eq!(resolve_precision(None, None).unwrap(), 128);
        assert_eq!(resolve_precision(Some(32), None).unwrap_err().exit_code(), EXIT_USAGE);
        assert!(resolve_precision(None, Some("lots")).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::from(Error::NotMonotone { xi: 1.0 }).exit_code(), EXIT_NOT_MONOTONE);
        assert_eq!(CliError::from(Error::PrecisionExhausted { cap_bits: 2048 }).exit_code(), EXIT_NUMERIC);
        assert_eq!(
            CliError::from(Error::NonConvergence { tol: 1e-30, estimate: 1e-3, subdivisions: 4000 }).exit_code(),
            EXIT_NUMERIC
        );
        let bad = Potential::from_pairs(&[(4, lopt_core::Rational::from(1))]).unwrap_err();
        assert_eq!(CliError::from(Error::from(bad)).exit_code(), EXIT_POTENTIAL);
        assert_eq!(check_order(201).unwrap_err().exit_code(), EXIT_USAGE);
    }

    #[test]
    fn potential_label() {
        assert_eq!(describe(&Potential::quartic()), "Q^2/2 - Q^4");
        let sextic = Potential::from_pairs(&[(4, lopt_core::Rational::from((-1, 10))), (6, lopt_core::Rational::from((-1, 100)))]).unwrap();
        assert_eq!(describe(&sextic), "Q^2/2 - (1/10) Q^4 - (1/100) Q^6");
    }
}
