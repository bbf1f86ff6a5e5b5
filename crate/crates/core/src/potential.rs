//! The even polynomial potential `V(Q) = Q^2/2 + sum_{p>=2} a_{2p} Q^{2p}`.

use std::collections::BTreeMap;
use std::fmt;

use rug::ops::Pow;
use rug::{Float, Rational};
use serde::Deserialize;

use crate::error::{PotentialError, Result};
use crate::numerics::{find_root_bracketed, Precision};

const SHAPE_GRID: usize = 256;
const SEARCH_BOUND: f64 = 1e6;

/// A validated potential with a single barrier: `V > 0` on `(0, Q+)`, `V(Q+) = 0`,
/// `V'(Q+) < 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    /// Keyed by `p`, the half degree, so that `a_{2p}` multiplies `Q^{2p}`.
    terms: BTreeMap<u32, Rational>,
    q_plus: Float,
}

/// `V(q)`, `V'(q)` and the area rate `V - (q/2) V'`.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialValues {
    pub v: Float,
    pub dv: Float,
    pub lambda_rate: Float,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PotentialFile {
    coeffs: BTreeMap<String, CoeffValue>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CoeffValue {
    Int(i64),
    Text(String),
}

impl Potential {
    /// Validates raw coefficients keyed by even degree `2p >= 4`.
    pub fn new(raw: &BTreeMap<u32, Rational>) -> Result<Self, PotentialError> {
        let mut terms = BTreeMap::new();
        for (&degree, a) in raw {
            if degree < 4 || degree % 2 != 0 {
                return Err(PotentialError::BadDegree(degree));
            }
            if *a != 0 {
                terms.insert(degree / 2, a.clone());
            }
        }
        match terms.get(&2) {
            None => return Err(PotentialError::MissingQuartic),
            Some(a4) if *a4 > 0 => return Err(PotentialError::WrongSignQuartic),
            _ => {}
        }
        let mut pot = Potential { terms, q_plus: Float::new(Precision::DEFAULT.bits()) };
        pot.q_plus = pot.locate_turning_point(Precision::DEFAULT)?;
        pot.check_shape()?;
        Ok(pot)
    }

    /// `V = Q^2/2 - Q^4`.
    pub fn quartic() -> Self {
        Self::from_pairs(&[(4, Rational::from(-1))]).expect("the quartic is valid")
    }

    pub fn from_pairs(pairs: &[(u32, Rational)]) -> Result<Self, PotentialError> {
        Self::new(&pairs.iter().cloned().collect())
    }

    /// Parses `{"coeffs": {"4": "-1", "6": "1/100"}}`.
    pub fn from_json(text: &str) -> Result<Self, PotentialError> {
        let file: PotentialFile = serde_json::from_str(text).map_err(|e| PotentialError::Parse(e.to_string()))?;
        let mut raw = BTreeMap::new();
        for (key, value) in file.coeffs {
            let degree: u32 = key
                .trim()
                .parse()
                .map_err(|_| PotentialError::Parse(format!("degree key {key:?} is not a non-negative integer")))?;
            let a = match value {
                CoeffValue::Int(i) => Rational::from(i),
                CoeffValue::Text(s) => parse_rational(&s)?,
            };
            raw.insert(degree, a);
        }
        Self::new(&raw)
    }

    /// Coefficients keyed by even degree.
    pub fn coefficients(&self) -> BTreeMap<u32, Rational> {
        self.terms.iter().map(|(p, a)| (2 * p, a.clone())).collect()
    }

    /// `(p, a_{2p})` pairs in increasing `p`, anharmonic terms only.
    pub fn terms(&self) -> impl Iterator<Item = (u32, &Rational)> {
        self.terms.iter().map(|(p, a)| (*p, a))
    }

    pub fn a4(&self) -> &Rational {
        &self.terms[&2]
    }

    pub fn max_degree(&self) -> u32 {
        2 * self.terms.keys().next_back().copied().unwrap_or(1)
    }

    /// The turning point at the validation precision.
    pub fn q_plus(&self) -> &Float {
        &self.q_plus
    }

    /// The turning point refined to `prec`.
    pub fn turning_point(&self, prec: Precision) -> Result<Float> {
        Ok(self.locate_turning_point(prec)?)
    }

    pub fn values(&self, q: &Float) -> PotentialValues {
        let bits = q.prec();
        let q2 = Float::with_val(bits, q.square_ref());
        let mut v = Float::with_val(bits, &q2 / 2u32);
        let mut dv = q.clone();
        let mut lambda_rate = Float::new(bits);
        for (p, a) in self.terms() {
            let a = Float::with_val(bits, a);
            let q2p = Float::with_val(bits, (&q2).pow(p));
            let t = Float::with_val(bits, &a * &q2p);
            dv += Float::with_val(bits, &t * (2 * p)) / q;
            lambda_rate -= Float::with_val(bits, &t * (p - 1));
            v += t;
        }
        if q.is_zero() {
            dv = Float::new(bits);
        }
        PotentialValues { v, dv, lambda_rate }
    }

    /// Exact `(V, V', V - (q/2)V')` at a rational point.
    pub fn values_exact(&self, q: &Rational) -> (Rational, Rational, Rational) {
        let q2 = Rational::from(q.square_ref());
        let mut v = Rational::from(&q2 / 2u32);
        let mut dv = q.clone();
        let mut rate = Rational::new();
        for (p, a) in self.terms() {
            let q2p = pow_rational(&q2, p);
            let t = Rational::from(a * &q2p);
            let qpow = pow_rational(q, 2 * p - 1);
            dv += Rational::from(a * &qpow) * (2 * p);
            rate -= Rational::from(&t * (p - 1));
            v += t;
        }
        (v, dv, rate)
    }

    /// `V(q)/q^2 = 1/2 + sum a_{2p} q^{2p-2}`; its first positive zero is `Q+`.
    pub fn reduced(&self, q: &Float) -> Float {
        let bits = q.prec();
        let q2 = Float::with_val(bits, q.square_ref());
        let mut h = Float::with_val(bits, 0.5);
        for (p, a) in self.terms() {
            h += Float::with_val(bits, (&q2).pow(p - 1)) * a;
        }
        h
    }

    fn locate_turning_point(&self, prec: Precision) -> Result<Float, PotentialError> {
        let bits = prec.bits();
        let mut lo = Float::with_val(bits, 0);
        let mut hi = Float::with_val(bits, 1e-3);
        while self.reduced(&hi) > 0 {
            lo.clone_from(&hi);
            hi *= 1.25f64;
            if hi > SEARCH_BOUND {
                return Err(PotentialError::NoTurningPoint { bound: SEARCH_BOUND });
            }
        }
        let tol = Float::with_val(bits, 1) >> (bits - 4);
        let tol = tol.to_f64().max(f64::MIN_POSITIVE);
        let root = find_root_bracketed(|q| Ok(self.reduced(q)), &lo, &hi, tol)
            .map_err(|_| PotentialError::NoTurningPoint { bound: SEARCH_BOUND })?;
        Ok(root)
    }

    fn check_shape(&self) -> Result<(), PotentialError> {
        let bits = self.q_plus.prec();
        for i in 1..SHAPE_GRID {
            let q = Float::with_val(bits, &self.q_plus * i as u32) / SHAPE_GRID as u32;
            if self.values(&q).v <= 0 {
                return Err(PotentialError::ShapeViolation { at: q.to_f64() });
            }
        }
        if self.values(&self.q_plus).dv >= 0 {
            return Err(PotentialError::ShapeViolation { at: self.q_plus.to_f64() });
        }
        Ok(())
    }
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "V=Q^2/2")?;
        for (p, a) in self.terms() {
            if *a < 0 {
                write!(f, "-({})Q^{}", Rational::from(-a), 2 * p)?;
            } else {
                write!(f, "+({})Q^{}", a, 2 * p)?;
            }
        }
        Ok(())
    }
}

fn pow_rational(x: &Rational, n: u32) -> Rational {
    Rational::from(x.pow(n))
}

fn parse_rational(s: &str) -> Result<Rational, PotentialError> {
    let t = s.trim();
    let bad = || PotentialError::Parse(format!("{s:?} is not an integer or p/q fraction"));
    let valid = t.split('/').count() <= 2
        && t.split('/').enumerate().all(|(i, part)| {
            let digits = if i == 0 { part.strip_prefix(['-', '+']).unwrap_or(part) } else { part };
            !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
        });
    if !valid {
        return Err(bad());
    }
    let t = t.strip_prefix('+').unwrap_or(t);
    let r = Rational::from_str_radix(t, 10).map_err(|_| bad())?;
    Ok(r)
}
