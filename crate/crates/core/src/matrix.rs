//! Dense complex matrices.
//!
//! Entries are stored row-major as `Complex64`. Every public constructor
//! rejects NaN and infinite entries, so downstream code can assume finite
//! data.

use std::fmt;
use std::ops::{Add, Index, Mul, Neg, Sub};

use num::complex::Complex64;
use num::Zero;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Shorthand for a complex scalar.
#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Checked complex scalar constructor.
pub fn complex_scalar(re: f64, im: f64) -> Result<C64> {
    if re.is_finite() && im.is_finite() {
        Ok(C64::new(re, im))
    } else {
        Err(Error::NonFinite("complex scalar"))
    }
}

#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        CMatrix {
            rows,
            cols,
            data: vec![C64::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::domain("matrix dimensions must be positive"));
        }
        if data.len() != rows * cols {
            return Err(Error::domain(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(CMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::domain("ragged rows"));
        }
        Self::from_vec(r, c, rows.concat())
    }

    /// Square matrix from real row-major entries.
    pub fn from_real(n: usize, entries: &[f64]) -> Result<Self> {
        Self::from_vec(n, n, entries.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Diagonal matrix with the given principal diagonal.
    pub fn diag(v: &[C64]) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::domain("diag of an empty vector"));
        }
        let n = v.len();
        let mut data = vec![C64::zero(); n * n];
        for (i, &x) in v.iter().enumerate() {
            data[i * n + i] = x;
        }
        Self::from_vec(n, n, data)
    }

    /// Elementary matrix `E_ij` (1-based indices).
    pub fn elementary(n: usize, i: usize, j: usize) -> Result<Self> {
        if n == 0 || i == 0 || j == 0 || i > n || j > n {
            return Err(Error::domain(format!(
                "elementary({n},{i},{j}): indices must lie in 1..={n}"
            )));
        }
        let mut m = Self::zeros(n, n);
        m.data[(i - 1) * n + (j - 1)] = C64::new(1.0, 0.0);
        Ok(m)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Side length; panics on non-square input.
    pub fn n(&self) -> usize {
        assert!(self.is_square(), "expected a square matrix");
        self.rows
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn set(&mut self, i: usize, j: usize, value: C64) -> Result<()> {
        if !value.re.is_finite() || !value.im.is_finite() {
            return Err(Error::NonFinite("matrix entry"));
        }
        if i >= self.rows || j >= self.cols {
            return Err(Error::domain("index out of range"));
        }
        self.data[i * self.cols + j] = value;
        Ok(())
    }

    #[inline]
    pub(crate) fn at_mut(&mut self, i: usize, j: usize) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }

    pub(crate) fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| z.is_zero())
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn mat_mul(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.cols != other.rows {
            return Err(Error::domain(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.is_zero() {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(&a, &b)| a * b)
                    .sum()
            })
            .collect()
    }

    fn adjoint_mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![C64::zero(); self.cols];
        for i in 0..self.rows {
            let vi = v[i];
            for j in 0..self.cols {
                out[j] += self.data[i * self.cols + j].conj() * vi;
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> CMatrix {
        let mut result = Self::identity(self.n());
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        result
    }

    pub fn trace(&self) -> C64 {
        (0..self.n()).map(|i| self[(i, i)]).sum()
    }

    /// Principal diagonal as a vector.
    pub fn dvec(&self) -> Result<Vec<C64>> {
        if !self.is_square() {
            return Err(Error::domain("dvec of a non-square matrix"));
        }
        Ok((0..self.rows).map(|i| self[(i, i)]).collect())
    }

    /// Keeps the diagonal and zeroes everything else.
    pub fn diagonal_part(&self) -> Result<CMatrix> {
        CMatrix::diag(&self.dvec()?)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Operator 2-norm by power iteration on `A*A`.
    ///
    /// Runs from the normalized all-ones vector and from a fixed
    /// phase-scrambled vector and keeps the larger estimate, so a start
    /// vector orthogonal to the top singular direction cannot produce a
    /// spurious zero. Each run stops when the relative change of the
    /// Rayleigh quotient drops to `tol` or after 10,000 iterations.
    pub fn op_norm(&self, tol: f64) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let a = self.scale_real(1.0 / scale);
        let n = a.cols;
        let ones = vec![C64::new(1.0, 0.0); n];
        let scrambled: Vec<C64> = (0..n)
            .map(|i| {
                let t = (i as f64 + 1.0) * 0.754_877_666;
                C64::from_polar(1.0 + 0.5 * (t * 2.3).sin(), t * std::f64::consts::TAU)
            })
            .collect();
        let est = power_iteration(&a, ones, tol).max(power_iteration(&a, scrambled, tol));
        est * scale
    }

    pub fn is_upper_triangular(&self, tol: f64) -> bool {
        (0..self.rows).all(|i| (0..i.min(self.cols)).all(|j| self[(i, j)].norm() <= tol))
    }

    /// Frobenius mass of the strictly lower triangle.
    pub fn strictly_lower_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.rows {
            for j in 0..i.min(self.cols) {
                s += self[(i, j)].norm_sqr();
            }
        }
        s.sqrt()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && (self - &self.adjoint()).max_abs() <= tol
    }

    pub fn is_normal(&self, tol: f64) -> bool {
        let a_star = self.adjoint();
        (&(&a_star * self) - &(self * &a_star)).frobenius_norm() <= tol
    }

    /// `AB - BA`.
    pub fn commutator(&self, other: &CMatrix) -> CMatrix {
        &(self * other) - &(other * self)
    }

    /// Hermitian part `(A + A*)/2`.
    pub fn hermitian_part(&self) -> CMatrix {
        (self + &self.adjoint()).scale_real(0.5)
    }

    pub fn submatrix(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> CMatrix {
        let mut out = Self::zeros(r1 - r0, c1 - c0);
        for i in r0..r1 {
            for j in c0..c1 {
                out.data[(i - r0) * (c1 - c0) + (j - c0)] = self[(i, j)];
            }
        }
        out
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, block: &CMatrix) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self.data[(r0 + i) * self.cols + c0 + j] = block[(i, j)];
            }
        }
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Inverse by LU factorization with partial pivoting.
    pub fn inverse(&self) -> Result<CMatrix> {
        if !self.is_square() {
            return Err(Error::domain("inverse of a non-square matrix"));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        let scale = self.max_abs();
        if scale == 0.0 {
            return Err(Error::NotInvertible);
        }
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| a[(x, col)].norm().total_cmp(&a[(y, col)].norm()))
                .unwrap();
            if a[(pivot, col)].norm() <= f64::EPSILON * scale * n as f64 * 1e-3 {
                return Err(Error::NotInvertible);
            }
            if pivot != col {
                a.swap_rows(pivot, col);
                inv.swap_rows(pivot, col);
            }
            let p = a[(col, col)];
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[(r, col)] / p;
                if f.is_zero() {
                    continue;
                }
                for c in 0..n {
                    let av = a[(col, c)];
                    let iv = inv[(col, c)];
                    a.data[r * n + c] -= f * av;
                    inv.data[r * n + c] -= f * iv;
                }
            }
        }
        for r in 0..n {
            let p = a[(r, r)];
            for c in 0..n {
                inv.data[r * n + c] /= p;
            }
        }
        if !inv.is_finite() {
            return Err(Error::NotInvertible);
        }
        Ok(inv)
    }

    pub(crate) fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

fn power_iteration(a: &CMatrix, start: Vec<C64>, tol: f64) -> f64 {
    let mut v = start;
    let nv = vec_norm(&v);
    if nv == 0.0 {
        return 0.0;
    }
    v.iter_mut().for_each(|x| *x /= nv);
    let mut av = a.mul_vec(&v);
    let mut est = vec_norm(&av).powi(2);
    for _ in 0..10_000 {
        let w = a.adjoint_mul_vec(&av);
        let nw = vec_norm(&w);
        if nw == 0.0 {
            return est.sqrt();
        }
        v = w.into_iter().map(|x| x / nw).collect();
        av = a.mul_vec(&v);
        let next = vec_norm(&av).powi(2);
        let done = (next - est).abs() <= tol * next;
        est = next;
        if done {
            break;
        }
    }
    est.sqrt()
}

pub(crate) fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Standard matrix product with a dimension check.
pub fn mat_mul(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    a.mat_mul(b)
}

/// Elementary matrix `E_ij` in `M_n(C)`, 1-based.
pub fn elementary(n: usize, i: usize, j: usize) -> Result<CMatrix> {
    CMatrix::elementary(n, i, j)
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;

    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.mat_mul(rhs).expect("matrix product dimension mismatch")
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;

    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;

    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;

    fn neg(self) -> CMatrix {
        self.map(|z| -z)
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:>11.4e}{:+.4e}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Wire format: `{"n": int, "entries": [[re, im], ...]}`, row-major.
#[derive(Serialize, Deserialize)]
struct MatrixJson {
    n: usize,
    entries: Vec<[f64; 2]>,
}

impl Serialize for CMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.is_square() {
            return Err(serde::ser::Error::custom(
                "only square matrices have a JSON form",
            ));
        }
        MatrixJson {
            n: self.rows,
            entries: self.data.iter().map(|z| [z.re, z.im]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = MatrixJson::deserialize(d)?;
        let data = raw.entries.iter().map(|&[re, im]| C64::new(re, im)).collect();
        CMatrix::from_vec(raw.n, raw.n, data).map_err(serde::de::Error::custom)
    }
}
