//! Exact rational matrices and polynomials.
//!
//! Scalars are `num::BigRational`, which keeps values reduced with the sign
//! in the numerator, so structural equality is exact equality.

use std::fmt;

use num::bigint::BigInt;
use num::{BigRational, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::matrix::{CMatrix, C64};

pub type Rational = BigRational;

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

#[derive(Clone, PartialEq, Eq)]
pub struct RationalMatrix {
    n: usize,
    entries: Vec<Rational>,
}

impl RationalMatrix {
    pub fn new(n: usize, entries: Vec<Rational>) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("matrix size must be positive"));
        }
        if entries.len() != n * n {
            return Err(Error::domain(format!(
                "expected {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        Ok(RationalMatrix { n, entries })
    }

    pub fn from_i64(n: usize, entries: &[i64]) -> Result<Self> {
        Self::new(n, entries.iter().map(|&x| rat(x, 1)).collect())
    }

    pub fn zero(n: usize) -> Self {
        RationalMatrix {
            n,
            entries: vec![Rational::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n);
        for i in 0..n {
            m.entries[i * n + i] = Rational::one();
        }
        m
    }

    /// Exact conversion of a real matrix; fails on any imaginary part.
    pub fn from_complex_exact(a: &CMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::domain("rational matrices are square"));
        }
        let entries = a
            .as_slice()
            .iter()
            .map(|z| {
                if z.im != 0.0 {
                    return Err(Error::domain("exact path works over Q; entry has an imaginary part"));
                }
                Rational::from_float(z.re).ok_or(Error::NonFinite("rational conversion"))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(a.rows(), entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[Rational] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Zero::is_zero)
    }

    pub fn to_complex(&self) -> CMatrix {
        let data = self
            .entries
            .iter()
            .map(|q| C64::new(q.to_f64().unwrap_or(f64::NAN), 0.0))
            .collect();
        CMatrix::from_vec(self.n, self.n, data).expect("rational entries convert to finite floats")
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::domain(format!("size mismatch: {} vs {}", self.n, other.n)));
        }
        Ok(())
    }

    pub fn rat_add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(RationalMatrix {
            n: self.n,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn rat_sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(RationalMatrix {
            n: self.n,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn rat_mul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let n = self.n;
        let mut out = Self::zero(n);
        for i in 0..n {
            for k in 0..n {
                let a = &self.entries[i * n + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let b = &other.entries[k * n + j];
                    if !b.is_zero() {
                        out.entries[i * n + j] += a * b;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: &Rational) -> Self {
        RationalMatrix {
            n: self.n,
            entries: self.entries.iter().map(|x| x * s).collect(),
        }
    }

    pub fn trace(&self) -> Rational {
        (0..self.n).map(|i| self.get(i, i).clone()).sum()
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::identity(self.n);
        for _ in 0..k {
            out = out.rat_mul(self).expect("same size");
        }
        out
    }

    /// Exact Gauss-Jordan inverse.
    pub fn rat_inverse(&self) -> Result<Self> {
        let n = self.n;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let pivot = (col..n)
                .find(|&r| !a.entries[r * n + col].is_zero())
                .ok_or(Error::NotInvertible)?;
            if pivot != col {
                for j in 0..n {
                    a.entries.swap(pivot * n + j, col * n + j);
                    inv.entries.swap(pivot * n + j, col * n + j);
                }
            }
            let p = a.entries[col * n + col].clone();
            for j in 0..n {
                a.entries[col * n + j] /= &p;
                inv.entries[col * n + j] /= &p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a.entries[r * n + col].clone();
                if f.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let av = &a.entries[col * n + j] * &f;
                    let iv = &inv.entries[col * n + j] * &f;
                    a.entries[r * n + j] -= av;
                    inv.entries[r * n + j] -= iv;
                }
            }
        }
        Ok(inv)
    }

    /// Characteristic polynomial `det(xI - A)` by Faddeev-LeVerrier.
    pub fn charpoly(&self) -> RatPoly {
        let n = self.n;
        let mut coeffs = vec![Rational::zero(); n + 1];
        coeffs[n] = Rational::one();
        let mut m = Self::zero(n);
        for k in 1..=n {
            // M_k = A M_{k-1} + c_{n-k+1} I
            let mut next = self.rat_mul(&m).expect("same size");
            for i in 0..n {
                next.entries[i * n + i] += &coeffs[n - k + 1];
            }
            let am = self.rat_mul(&next).expect("same size");
            coeffs[n - k] = -am.trace() / Rational::from_integer(BigInt::from(k));
            m = next;
        }
        RatPoly::new(coeffs)
    }

    /// Evaluates `p(A)` by Horner's rule.
    pub fn eval_poly(&self, p: &RatPoly) -> Self {
        let mut acc = Self::zero(self.n);
        for c in p.coeffs.iter().rev() {
            acc = acc.rat_mul(self).expect("same size");
            for i in 0..self.n {
                acc.entries[i * self.n + i] += c;
            }
        }
        acc
    }
}

impl fmt::Debug for RationalMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "RationalMatrix {}x{} [", self.n, self.n)?;
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|j| self.get(i, j).to_string()).collect();
            writeln!(f, "  {}", row.join(", "))?;
        }
        write!(f, "]")
    }
}

#[derive(Serialize, Deserialize)]
struct RationalJson {
    num: String,
    den: String,
}

#[derive(Serialize, Deserialize)]
struct RationalMatrixJson {
    n: usize,
    entries: Vec<RationalJson>,
}

impl Serialize for RationalMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RationalMatrixJson {
            n: self.n,
            entries: self
                .entries
                .iter()
                .map(|q| RationalJson {
                    num: q.numer().to_string(),
                    den: q.denom().to_string(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RationalMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RationalMatrixJson::deserialize(d)?;
        let entries = raw
            .entries
            .iter()
            .map(|e| {
                let num: BigInt = e.num.parse().map_err(D::Error::custom)?;
                let den: BigInt = e.den.parse().map_err(D::Error::custom)?;
                if den.is_zero() {
                    return Err(D::Error::custom("zero denominator"));
                }
                Ok(Rational::new(num, den))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        RationalMatrix::new(raw.n, entries).map_err(D::Error::custom)
    }
}

/// Polynomial with rational coefficients, lowest degree first. The zero
/// polynomial has no coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatPoly {
    coeffs: Vec<Rational>,
}

impl RatPoly {
    pub fn new(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        RatPoly { coeffs }
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| rat(c, 1)).collect())
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Option<&Rational> {
        self.coeffs.last()
    }

    pub fn monic(&self) -> Self {
        match self.leading() {
            None => self.clone(),
            Some(lc) => {
                let lc = lc.clone();
                RatPoly::new(self.coeffs.iter().map(|c| c / &lc).collect())
            }
        }
    }

    pub fn derivative(&self) -> Self {
        RatPoly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * Rational::from_integer(BigInt::from(k)))
                .collect(),
        )
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return RatPoly::new(vec![]);
        }
        let mut out = vec![Rational::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        RatPoly::new(out)
    }

    /// Euclidean division; panics on a zero divisor.
    pub fn div_rem(&self, divisor: &Self) -> (Self, Self) {
        let dd = divisor.degree().expect("division by the zero polynomial");
        let lc = divisor.leading().unwrap().clone();
        let mut rem = self.coeffs.clone();
        let Some(nd) = self.degree() else {
            return (RatPoly::new(vec![]), RatPoly::new(vec![]));
        };
        if nd < dd {
            return (RatPoly::new(vec![]), self.clone());
        }
        let mut quot = vec![Rational::zero(); nd - dd + 1];
        for k in (0..=nd - dd).rev() {
            let q = &rem[k + dd] / &lc;
            if q.is_zero() {
                continue;
            }
            for (j, d) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= &q * d;
            }
            quot[k] = q;
        }
        (RatPoly::new(quot), RatPoly::new(rem))
    }

    /// Monic greatest common divisor.
    pub fn gcd(&self, other: &Self) -> Self {
        let mut a = self.clone();
        let mut b = other.clone();
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        self.coeffs.iter().rev().fold(Rational::zero(), |acc, c| acc * x + c)
    }
}

impl fmt::Display for RatPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let sign = if c.is_negative() { "-" } else { "+" };
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            let a = c.abs();
            match (k, a.is_one()) {
                (0, _) => write!(f, "{a}")?,
                (1, true) => write!(f, "x")?,
                (1, false) => write!(f, "{a}x")?,
                (_, true) => write!(f, "x^{k}")?,
                (_, false) => write!(f, "{a}x^{k}")?,
            }
        }
        Ok(())
    }
}

/// `p / gcd(p, p')`, made monic. Same roots as `p`, each simple.
pub fn squarefree_part(p: &RatPoly) -> Result<RatPoly> {
    match p.degree() {
        None | Some(0) => Err(Error::domain("squarefree_part needs degree >= 1")),
        Some(_) => {
            let p = p.monic();
            let g = p.gcd(&p.derivative());
            let (q, r) = p.div_rem(&g);
            debug_assert!(r.is_zero());
            Ok(q.monic())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(n: usize, v: &[(i64, i64)]) -> RationalMatrix {
        RationalMatrix::new(n, v.iter().map(|&(p, q)| rat(p, q)).collect()).unwrap()
    }

    #[test]
    fn rationals_are_canonical() {
        let q = rat(6, -4);
        assert_eq!(q.numer(), &BigInt::from(-3));
        assert_eq!(q.denom(), &BigInt::from(2));
        assert_eq!(rat(2, 4), rat(1, 2));
    }

    #[test]
    fn inverse_examples() {
        let a = m(2, &[(2, 1), (0, 1), (0, 1), (4, 1)]);
        assert_eq!(a.rat_inverse().unwrap(), m(2, &[(1, 2), (0, 1), (0, 1), (1, 4)]));
        let i3 = RationalMatrix::identity(3);
        assert_eq!(i3.rat_inverse().unwrap(), i3);
        let u = RationalMatrix::from_i64(2, &[1, 1, 0, 1]).unwrap();
        assert_eq!(u.rat_inverse().unwrap(), RationalMatrix::from_i64(2, &[1, -1, 0, 1]).unwrap());
    }

    #[test]
    fn singular_inverse_errors() {
        let s = RationalMatrix::from_i64(2, &[1, 2, 2, 4]).unwrap();
        assert!(matches!(s.rat_inverse(), Err(Error::NotInvertible)));
    }

    #[test]
    fn inverse_needs_row_swap() {
        let a = RationalMatrix::from_i64(3, &[0, 1, 2, 1, 0, 3, 4, -3, 8]).unwrap();
        let inv = a.rat_inverse().unwrap();
        assert_eq!(a.rat_mul(&inv).unwrap(), RationalMatrix::identity(3));
    }

    #[test]
    fn charpoly_small() {
        // [[1,2],[3,4]]: x^2 - 5x - 2
        let a = RationalMatrix::from_i64(2, &[1, 2, 3, 4]).unwrap();
        assert_eq!(a.charpoly(), RatPoly::from_i64(&[-2, -5, 1]));
        // Cayley-Hamilton
        assert!(a.eval_poly(&a.charpoly()).is_zero());
    }

    #[test]
    fn squarefree_examples() {
        // (x-1)^2 (x-2) = x^3 - 4x^2 + 5x - 2
        let p = RatPoly::from_i64(&[-2, 5, -4, 1]);
        assert_eq!(squarefree_part(&p).unwrap(), RatPoly::from_i64(&[2, -3, 1]));
        assert_eq!(squarefree_part(&RatPoly::from_i64(&[0, 0, 0, 1])).unwrap(), RatPoly::from_i64(&[0, 1]));
        let p = RatPoly::from_i64(&[1, 0, -2, 0, 1]);
        assert_eq!(squarefree_part(&p).unwrap(), RatPoly::from_i64(&[-1, 0, 1]));
        assert!(squarefree_part(&RatPoly::from_i64(&[3])).is_err());
    }

    #[test]
    fn poly_display() {
        assert_eq!(RatPoly::from_i64(&[-1, 0, 1]).to_string(), "x^2 - 1");
        assert_eq!(RatPoly::new(vec![rat(1, 2), rat(-3, 1)]).to_string(), "-3x + 1/2");
    }

    #[test]
    fn json_is_bit_exact() {
        let a = m(2, &[(1, 3), (-7, 2), (123456789012345, 1), (0, 1)]);
        let s = serde_json::to_string(&a).unwrap();
        assert!(s.contains(r#"{"num":"1","den":"3"}"#));
        assert!(s.contains(r#"{"num":"-7","den":"2"}"#));
        let b: RationalMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(a, b);
        assert!(serde_json::from_str::<RationalMatrix>(r#"{"n":1,"entries":[{"num":"1","den":"0"}]}"#).is_err());
    }

    #[test]
    fn exact_float_conversion() {
        let c = CMatrix::from_real(2, &[0.5, -0.25, 3.0, 0.0]).unwrap();
        let q = RationalMatrix::from_complex_exact(&c).unwrap();
        assert_eq!(q, m(2, &[(1, 2), (-1, 4), (3, 1), (0, 1)]));
        assert_eq!(q.to_complex(), c);
    }
}
