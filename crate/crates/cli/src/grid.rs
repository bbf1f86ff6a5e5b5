//! Argument grids: `min:max:points` or a comma-separated list of decimals.

use std::fmt;
use std::str::FromStr;

use lopt_core::{BigFloat, Precision};

#[derive(Clone, Debug, PartialEq)]
pub enum GridSpec {
    Range { min: String, max: String, points: usize },
    List(Vec<String>),
}

/// Parses a decimal at `prec`, correctly rounded.
pub fn parse_decimal(text: &str, prec: Precision) -> Result<BigFloat, String> {
    let parsed = BigFloat::parse(text.trim()).map_err(|e| format!("{text:?} is not a number: {e}"))?;
    let value = BigFloat::with_val(prec.bits(), parsed);
    if !value.is_finite() {
        return Err(format!("{text:?} is not finite"));
    }
    Ok(value)
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let check = |t: &str| parse_decimal(t, Precision::new(64)).map(|_| t.trim().to_string());
        let parts: Vec<&str> = s.split(':').collect();
        match parts.len() {
            1 => {
                let items = s.split(',').filter(|t| !t.trim().is_empty()).map(check).collect::<Result<Vec<_>, _>>()?;
                if items.is_empty() {
                    return Err("empty grid".into());
                }
                Ok(GridSpec::List(items))
            }
            3 => {
                let (min, max) = (check(parts[0])?, check(parts[1])?);
                let points: usize = parts[2].trim().parse().map_err(|_| format!("{:?} is not a point count", parts[2]))?;
                if points == 0 {
                    return Err("a grid needs at least one point".into());
                }
                if points > 1 && parse_decimal(&min, Precision::new(64))? > parse_decimal(&max, Precision::new(64))? {
                    return Err(format!("grid minimum {min} exceeds maximum {max}"));
                }
                Ok(GridSpec::Range { min, max, points })
            }
            _ => Err(format!("{s:?}: expected min:max:points or a comma list")),
        }
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridSpec::Range { min, max, points } => write!(f, "{min}:{max}:{points}"),
            GridSpec::List(items) => write!(f, "{}", items.join(",")),
        }
    }
}

impl GridSpec {
    /// The grid points at `prec`, evenly spaced for a range.
    pub fn points(&self, prec: Precision) -> Vec<BigFloat> {
        let parse = |t: &str| parse_decimal(t, prec).expect("validated when parsed");
        match self {
            GridSpec::List(items) => items.iter().map(|t| parse(t)).collect(),
            GridSpec::Range { min, max, points } => {
                let (lo, hi) = (parse(min), parse(max));
                if *points == 1 {
                    return vec![lo];
                }
                let step = BigFloat::with_val(prec.bits(), &hi - &lo) / (*points as u32 - 1);
                (0..*points)
                    .map(|i| {
                        if i + 1 == *points {
                            hi.clone()
                        } else {
                            BigFloat::with_val(prec.bits(), &step * i as u32) + &lo
                        }
                    })
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_and_list() {
        let p = Precision::new(128);
        let g: GridSpec = "0.2:3.0:15".parse().unwrap();
        let pts = g.points(p);
        assert_eq!(pts.len(), 15);
        assert_eq!(pts[14], 3);
        assert!((pts[1].to_f64() - 0.4).abs() < 1e-15);
        let l: GridSpec = "1.5, 2".parse().unwrap();
        assert_eq!(l.points(p).len(), 2);
        assert_eq!(l.to_string(), "1.5,2");
    }

    #[test]
    fn rejects_bad_grids() {
        assert!("1:2".parse::<GridSpec>().is_err());
        assert!("a".parse::<GridSpec>().is_err());
        assert!("1:2:0".parse::<GridSpec>().is_err());
        assert!("3:1:5".parse::<GridSpec>().is_err());
        assert!("".parse::<GridSpec>().is_err());
    }
}
