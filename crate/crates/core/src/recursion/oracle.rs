//! Textbook Rayleigh-Schrodinger sums in the harmonic-oscillator basis.
//!
//! Works in the rescaled basis `e_m = sqrt(m!) |m>`, where `a+ e_m = e_{m+1}` and
//! `a e_m = m e_{m-1}`, so every matrix element of `x^{2p} = (a + a+)^{2p} / 2^p`
//! is rational. The basis change is diagonal, so the closed products
//! `V_{n m} V_{m l} ... V_{. n}` entering the energy sums are unchanged.

use std::collections::BTreeMap;

use rug::Rational;

use crate::error::{Error, Result};
use crate::potential::Potential;

type Matrix = BTreeMap<(u32, u32), Rational>;

/// `E_{n,1..=K}` for `K <= 3`.
pub fn oscillator_oracle(pot: &Potential, n: u32, max_order: u32) -> Result<Vec<Rational>> {
    if max_order > 3 {
        return Err(Error::InvalidArgument(format!("oscillator oracle supports K <= 3, got {max_order}")));
    }
    let span = n + 3 * pot.max_degree() + 2;
    // perturbation[k] is the coefficient of g^k in the potential, k = 1, 2, 3.
    let mut perturbation: Vec<Matrix> = vec![Matrix::new(); 4];
    for (p, a) in pot.terms() {
        let k = (p - 1) as usize;
        if k <= 3 {
            perturbation[k] = scaled(&position_power(2 * p, span), a);
        }
    }
    let v = |k: usize, i: u32, j: u32| -> Rational { perturbation[k].get(&(i, j)).cloned().unwrap_or_default() };
    let gap = |m: u32| Rational::from(n as i64 - m as i64);
    let others: Vec<u32> = (0..=span).filter(|&m| m != n).collect();

    let mut out = Vec::new();
    if max_order >= 1 {
        out.push(v(1, n, n));
    }
    if max_order >= 2 {
        let mut e2 = v(2, n, n);
        for &m in &others {
            e2 += v(1, n, m) * v(1, m, n) / gap(m);
        }
        out.push(e2);
    }
    if max_order >= 3 {
        let mut e3 = v(3, n, n);
        let mut renorm = Rational::new();
        for &m in &others {
            e3 += (v(1, n, m) * v(2, m, n) + v(2, n, m) * v(1, m, n)) / gap(m);
            let pair = v(1, n, m) * v(1, m, n);
            renorm += pair / Rational::from(gap(m).square_ref());
            let left = v(1, n, m);
            if left == 0 {
                continue;
            }
            for &l in &others {
                let chain = Rational::from(&left * &v(1, m, l)) * v(1, l, n);
                if chain != 0 {
                    e3 += chain / (gap(m) * gap(l));
                }
            }
        }
        e3 -= v(1, n, n) * renorm;
        out.push(e3);
    }
    Ok(out)
}

fn scaled(m: &Matrix, a: &Rational) -> Matrix {
    m.iter().map(|(ij, v)| (*ij, Rational::from(v * a))).collect()
}

/// Entries `(row, col)` of `x^power` in the rescaled basis, `row, col <= span`.
fn position_power(power: u32, span: u32) -> Matrix {
    let mut out = Matrix::new();
    let norm = Rational::from(rug::Integer::from(1) << (power / 2));
    for col in 0..=span {
        // Apply (a + a+) `power` times to e_col.
        let mut state: BTreeMap<u32, Rational> = BTreeMap::new();
        state.insert(col, Rational::from(1));
        for _ in 0..power {
            let mut next: BTreeMap<u32, Rational> = BTreeMap::new();
            for (&m, c) in &state {
                *next.entry(m + 1).or_default() += c;
                if m > 0 {
                    *next.entry(m - 1).or_default() += Rational::from(c * m);
                }
            }
            state = next;
        }
        for (row, c) in state {
            if row <= span && c != 0 {
                out.insert((row, col), c / &norm);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartic_ground_state() {
        let pot = Potential::quartic();
        let e = oscillator_oracle(&pot, 0, 2).unwrap();
        assert_eq!(e, vec![Rational::from((-3, 4)), Rational::from((-21, 8))]);
    }

    #[test]
    fn linear_in_a4() {
        let pot = Potential::from_pairs(&[(4, Rational::from((-1, 2)))]).unwrap();
        assert_eq!(oscillator_oracle(&pot, 0, 1).unwrap(), vec![Rational::from((-3, 8))]);
    }

    #[test]
    fn moments_of_ground_state() {
        // <0|x^4|0> = 3/4, <0|x^6|0> = 15/8 in the unit-norm basis.
        assert_eq!(position_power(4, 4)[&(0, 0)], Rational::from((3, 4)));
        assert_eq!(position_power(6, 6)[&(0, 0)], Rational::from((15, 8)));
    }

    #[test]
    fn rejects_high_order() {
        assert!(oscillator_oracle(&Potential::quartic(), 0, 4).is_err());
    }
}
