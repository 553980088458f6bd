//! Complex Schur factorization and the Hermitian functional calculus built on it.
//!
//! Householder reduction to upper Hessenberg form, then single-shift complex
//! QR with Wilkinson shifts and deflation when a subdiagonal entry drops to
//! `tol * (|h_ii| + |h_{i+1,i+1}|)`.

use num::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{vec_norm, CMatrix, C64};

/// Deflation tolerance used when callers have no better choice.
pub const DEFAULT_TOL: f64 = 1e-15;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SchurResiduals {
    /// `||V*V - I||_F`
    pub unitarity: f64,
    /// `||V T V* - A||_F`
    pub reconstruction: f64,
}

/// `A = V T V*` with `V` unitary and `T` upper triangular.
#[derive(Clone, Debug)]
pub struct SchurFactorization {
    pub v: CMatrix,
    pub t: CMatrix,
    pub residuals: SchurResiduals,
}

impl SchurFactorization {
    fn new(a: &CMatrix, v: CMatrix, t: CMatrix) -> Self {
        let residuals = SchurResiduals {
            unitarity: (&(&v.adjoint() * &v) - &CMatrix::identity(v.n())).frobenius_norm(),
            reconstruction: (&(&(&v * &t) * &v.adjoint()) - a).frobenius_norm(),
        };
        SchurFactorization { v, t, residuals }
    }

    /// Diagonal of `T`, in factorization order.
    pub fn diagonal(&self) -> Vec<C64> {
        self.t.dvec().expect("square")
    }

    /// Swaps the adjacent diagonal entries `k` and `k+1` of `T` by a unitary
    /// rotation, keeping `A = V T V*`.
    pub fn swap_adjacent(&mut self, k: usize) {
        let n = self.t.n();
        assert!(k + 1 < n);
        let a = self.t[(k, k)];
        let b = self.t[(k, k + 1)];
        let c = self.t[(k + 1, k + 1)];
        if a == c {
            return;
        }
        // (b, c - a) is an eigenvector of the 2x2 block for the eigenvalue c.
        let (cs, sn) = givens(b, c - a);
        rotate_rows(&mut self.t, k, cs, sn, k, n);
        rotate_cols(&mut self.t, k, cs, sn, 0, k + 2);
        rotate_cols(&mut self.v, k, cs, sn, 0, n);
        *self.t.at_mut(k + 1, k) = C64::zero();
        *self.t.at_mut(k, k) = c;
        *self.t.at_mut(k + 1, k + 1) = a;
    }
}

/// Multiset of eigenvalues with multiplicity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Spectrum {
    pub values: Vec<C64>,
}

impl Spectrum {
    pub fn new(values: Vec<C64>) -> Self {
        Spectrum { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sorted by real part, then imaginary part.
    pub fn sorted(mut self) -> Self {
        self.values.sort_by(lex_cmp);
        self
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

pub(crate) fn lex_cmp(a: &C64, b: &C64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// Givens rotation `G = [[c, s], [-conj(s), c]]` with `G [f; g] = [r; 0]`.
pub(crate) fn givens(f: C64, g: C64) -> (f64, C64) {
    let nf = f.norm();
    let ng = g.norm();
    if ng == 0.0 {
        return (1.0, C64::zero());
    }
    if nf == 0.0 {
        return (0.0, g.conj() / ng);
    }
    let nrm = nf.hypot(ng);
    let phase = f / nf;
    (nf / nrm, phase * g.conj() / nrm)
}

/// Rows `k`, `k+1` <- `G` applied from the left, columns `c0..c1`.
fn rotate_rows(m: &mut CMatrix, k: usize, c: f64, s: C64, c0: usize, c1: usize) {
    for j in c0..c1 {
        let x = m[(k, j)];
        let y = m[(k + 1, j)];
        *m.at_mut(k, j) = x * c + s * y;
        *m.at_mut(k + 1, j) = y * c - s.conj() * x;
    }
}

/// Columns `k`, `k+1` <- multiplied on the right by `G*`, rows `r0..r1`.
fn rotate_cols(m: &mut CMatrix, k: usize, c: f64, s: C64, r0: usize, r1: usize) {
    for i in r0..r1 {
        let x = m[(i, k)];
        let y = m[(i, k + 1)];
        *m.at_mut(i, k) = x * c + s.conj() * y;
        *m.at_mut(i, k + 1) = y * c - s * x;
    }
}

/// Householder reduction `A = Q H Q*` with `H` upper Hessenberg.
pub fn hessenberg(a: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    if !a.is_square() {
        return Err(Error::domain("hessenberg needs a square matrix"));
    }
    let n = a.n();
    let mut h = a.clone();
    let mut q = CMatrix::identity(n);
    for k in 0..n.saturating_sub(2) {
        let x: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        if vec_norm(&x[1..]) == 0.0 {
            continue;
        }
        let xn = vec_norm(&x);
        let phase = if x[0].norm() == 0.0 { C64::new(1.0, 0.0) } else { x[0] / x[0].norm() };
        let alpha = -phase * xn;
        let mut v = x;
        v[0] -= alpha;
        let vn = vec_norm(&v);
        v.iter_mut().for_each(|z| *z /= vn);

        // H <- P H, rows k+1..n
        for j in 0..n {
            let s: C64 = v.iter().enumerate().map(|(r, vi)| vi.conj() * h[(k + 1 + r, j)]).sum();
            for (r, vi) in v.iter().enumerate() {
                *h.at_mut(k + 1 + r, j) -= *vi * s * 2.0;
            }
        }
        // H <- H P and Q <- Q P, columns k+1..n
        for m in [&mut h, &mut q] {
            for i in 0..n {
                let s: C64 = v.iter().enumerate().map(|(c, vj)| m[(i, k + 1 + c)] * vj).sum();
                for (c, vj) in v.iter().enumerate() {
                    *m.at_mut(i, k + 1 + c) -= s * vj.conj() * 2.0;
                }
            }
        }
        *h.at_mut(k + 1, k) = alpha;
        for i in k + 2..n {
            *h.at_mut(i, k) = C64::zero();
        }
    }
    Ok((q, h))
}

/// Complex Schur factorization `A = V T V*`.
pub fn schur(a: &CMatrix, tol: f64) -> Result<SchurFactorization> {
    if !a.is_square() {
        return Err(Error::domain("schur needs a square matrix"));
    }
    if !(tol > 0.0) {
        return Err(Error::domain("schur tolerance must be positive"));
    }
    let n = a.n();
    let (mut v, mut t) = hessenberg(a)?;
    let fro = t.frobenius_norm();
    let cap = 100 * n;
    let mut total = 0usize;
    let mut iter = 0usize;
    let mut hi = n - 1;

    while hi > 0 {
        let mut l = hi;
        while l > 0 {
            let mut s = t[(l - 1, l - 1)].norm() + t[(l, l)].norm();
            if s == 0.0 {
                s = fro;
            }
            if t[(l, l - 1)].norm() <= tol * s {
                *t.at_mut(l, l - 1) = C64::zero();
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if iter > cap {
            return Err(Error::NoConvergence {
                iterations: total,
                partial: Box::new(SchurFactorization::new(a, v, t)),
            });
        }

        let mu = if iter.is_multiple_of(11) {
            // exceptional shift breaks rare shift cycles
            t[(hi, hi)] + C64::new(0.75, 0.5) * t[(hi, hi - 1)].norm()
        } else {
            wilkinson_shift(t[(hi - 1, hi - 1)], t[(hi - 1, hi)], t[(hi, hi - 1)], t[(hi, hi)])
        };

        for i in l..=hi {
            *t.at_mut(i, i) -= mu;
        }
        let mut rots = Vec::with_capacity(hi - l);
        for k in l..hi {
            let (c, s) = givens(t[(k, k)], t[(k + 1, k)]);
            rotate_rows(&mut t, k, c, s, k, n);
            *t.at_mut(k + 1, k) = C64::zero();
            rots.push((k, c, s));
        }
        for &(k, c, s) in &rots {
            rotate_cols(&mut t, k, c, s, 0, (k + 2).min(hi + 1));
            rotate_cols(&mut v, k, c, s, 0, n);
        }
        for i in l..=hi {
            *t.at_mut(i, i) += mu;
        }
    }
    Ok(SchurFactorization::new(a, v, t))
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let m = (a + d) * 0.5;
    let l1 = m + disc;
    let l2 = m - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Eigenvalues, sorted lexicographically by (re, im).
pub fn eigenvalues(a: &CMatrix, tol: f64) -> Result<Spectrum> {
    Ok(Spectrum::new(schur(a, tol)?.diagonal()).sorted())
}

/// Eigen-decomposition of a Hermitian matrix: real eigenvalues (ascending)
/// and a unitary matrix of eigenvectors.
pub fn hermitian_eigen(h: &CMatrix, tol: f64) -> Result<(Vec<f64>, CMatrix)> {
    let sym = h.hermitian_part();
    let f = schur(&sym, tol)?;
    let n = sym.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| f.t[(i, i)].re.total_cmp(&f.t[(j, j)].re));
    let values = order.iter().map(|&i| f.t[(i, i)].re).collect();
    let mut vecs = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..n {
            *vecs.at_mut(r, dst) = f.v[(r, src)];
        }
    }
    Ok((values, vecs))
}

/// `V diag(f(lambda)) V*` for Hermitian `h`.
pub(crate) fn hermitian_apply(values: &[f64], vecs: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let n = values.len();
    let mut out = CMatrix::zeros(n, n);
    for (k, &lam) in values.iter().enumerate() {
        let w = f(lam);
        if w == 0.0 {
            continue;
        }
        for i in 0..n {
            let vi = vecs[(i, k)] * w;
            for j in 0..n {
                *out.at_mut(i, j) += vi * vecs[(j, k)].conj();
            }
        }
    }
    out.hermitian_part()
}

/// Positive semidefinite square root. Eigenvalues in `[-tol*(1+max|lambda|), 0)`
/// are clamped to zero; anything more negative is an error.
pub fn psd_sqrt(h: &CMatrix, tol: f64) -> Result<CMatrix> {
    if !h.is_square() {
        return Err(Error::domain("psd_sqrt needs a square matrix"));
    }
    let (values, vecs) = hermitian_eigen(h, DEFAULT_TOL.min(tol).max(f64::EPSILON))?;
    let scale = 1.0 + values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(&bad) = values.iter().find(|&&x| x < -tol * scale) {
        return Err(Error::NotPsd { eigenvalue: bad });
    }
    Ok(hermitian_apply(&values, &vecs, |x| x.max(0.0).sqrt()))
}

/// `|A| = (A*A)^{1/2}`.
pub fn modulus(a: &CMatrix, tol: f64) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(Error::domain("modulus needs a square matrix"));
    }
    psd_sqrt(&(&a.adjoint() * a), tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{c64, elementary};

    fn r(n: usize, v: &[f64]) -> CMatrix {
        CMatrix::from_real(n, v).unwrap()
    }

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
        (a - b).max_abs() <= tol
    }

    #[test]
    fn hessenberg_trivial_cases() {
        let h = r(3, &[1., 2., 3., 4., 5., 6., 0., 7., 8.]);
        let (q, hh) = hessenberg(&h).unwrap();
        assert_eq!(q, CMatrix::identity(3));
        assert_eq!(hh, h);
        let one = r(1, &[4.]);
        let (q, hh) = hessenberg(&one).unwrap();
        assert_eq!(q, CMatrix::identity(1));
        assert_eq!(hh, one);
    }

    #[test]
    fn hessenberg_reconstructs() {
        let a = CMatrix::from_vec(
            4,
            4,
            (0..16).map(|k| c64((k as f64 * 0.37).sin(), (k as f64 * 1.3).cos())).collect(),
        )
        .unwrap();
        let (q, h) = hessenberg(&a).unwrap();
        for i in 2..4 {
            for j in 0..i - 1 {
                assert_eq!(h[(i, j)], C64::zero());
            }
        }
        let rec = &(&q * &h) * &q.adjoint();
        assert!((&rec - &a).op_norm(1e-12) <= 1e-12 * a.op_norm(1e-12));
    }

    #[test]
    fn schur_swap_matrix() {
        let a = r(2, &[0., 1., 1., 0.]);
        let f = schur(&a, DEFAULT_TOL).unwrap();
        assert!(f.residuals.unitarity < 1e-14);
        assert!(f.residuals.reconstruction < 1e-14);
        assert!(f.t.is_upper_triangular(0.0));
        let mut d: Vec<f64> = f.diagonal().iter().map(|z| z.re).collect();
        d.sort_by(f64::total_cmp);
        assert!((d[0] + 1.0).abs() < 1e-14 && (d[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn schur_of_triangular_is_identity_similarity() {
        let a = r(3, &[1., 2., 3., 0., 4., 5., 0., 0., 6.]);
        let f = schur(&a, DEFAULT_TOL).unwrap();
        assert_eq!(f.v, CMatrix::identity(3));
        assert_eq!(f.t, a);
        let d = r(2, &[3., 0., 0., 3.]);
        assert_eq!(schur(&d, DEFAULT_TOL).unwrap().t, d);
    }

    #[test]
    fn swap_adjacent_keeps_factorization() {
        let a = r(3, &[1., 2., 3., 0., 4., 5., 0., 0., 6.]);
        let mut f = schur(&a, DEFAULT_TOL).unwrap();
        f.swap_adjacent(0);
        f.swap_adjacent(1);
        assert_eq!(f.diagonal(), vec![c64(4., 0.), c64(6., 0.), c64(1., 0.)]);
        assert!(f.t.is_upper_triangular(0.0));
        let rec = &(&f.v * &f.t) * &f.v.adjoint();
        assert!(close(&rec, &a, 1e-13));
    }

    #[test]
    fn schur_rejects_bad_input() {
        assert!(schur(&CMatrix::zeros(2, 3), 1e-14).is_err());
        assert!(schur(&CMatrix::identity(2), 0.0).is_err());
    }

    #[test]
    fn eigenvalue_examples() {
        let d = r(3, &[3., 0., 0., 0., 1., 0., 0., 0., 2.]);
        let s = eigenvalues(&d, DEFAULT_TOL).unwrap();
        assert_eq!(s.values, vec![c64(1., 0.), c64(2., 0.), c64(3., 0.)]);
        let s = eigenvalues(&elementary(2, 1, 2).unwrap(), DEFAULT_TOL).unwrap();
        assert_eq!(s.values, vec![C64::zero(), C64::zero()]);
        let s = eigenvalues(&r(2, &[0., 1., 1., 0.]), DEFAULT_TOL).unwrap();
        assert!((s.values[0] - c64(-1., 0.)).norm() < 1e-14);
        assert!((s.values[1] - c64(1., 0.)).norm() < 1e-14);
    }

    #[test]
    fn rotation_matrix_has_complex_spectrum() {
        let a = r(2, &[0., -1., 1., 0.]);
        let s = eigenvalues(&a, DEFAULT_TOL).unwrap();
        assert!((s.values[0] - c64(0., -1.)).norm() < 1e-13);
        assert!((s.values[1] - c64(0., 1.)).norm() < 1e-13);
    }

    #[test]
    fn modulus_examples() {
        let a = CMatrix::diag(&[c64(-2., 0.), c64(0., 3.)]).unwrap();
        assert!(close(&modulus(&a, 1e-12).unwrap(), &r(2, &[2., 0., 0., 3.]), 1e-13));
        assert!(modulus(&CMatrix::zeros(3, 3), 1e-12).unwrap().is_zero());
        let m = modulus(&elementary(2, 1, 2).unwrap(), 1e-12).unwrap();
        assert!(close(&m, &r(2, &[0., 0., 0., 1.]), 1e-14));
    }

    #[test]
    fn psd_sqrt_examples() {
        assert!(close(&psd_sqrt(&r(2, &[4., 0., 0., 9.]), 1e-12).unwrap(), &r(2, &[2., 0., 0., 3.]), 1e-14));
        assert!(close(&psd_sqrt(&CMatrix::identity(3), 1e-12).unwrap(), &CMatrix::identity(3), 1e-14));
        // eigenvalues 1 on (1,-1)/sqrt2 and 3 on (1,1)/sqrt2
        let h = r(2, &[2., 1., 1., 2.]);
        let s = psd_sqrt(&h, 1e-12).unwrap();
        let s3 = 3f64.sqrt();
        let expected = r(2, &[(1. + s3) / 2., (s3 - 1.) / 2., (s3 - 1.) / 2., (1. + s3) / 2.]);
        assert!(close(&s, &expected, 1e-14));
        assert!(close(&(&s * &s), &h, 1e-13));
    }

    #[test]
    fn psd_sqrt_rejects_indefinite() {
        let h = r(2, &[1., 0., 0., -1.]);
        assert!(matches!(psd_sqrt(&h, 1e-12), Err(Error::NotPsd { .. })));
        // tiny negative roundoff is clamped
        let h = r(2, &[1., 0., 0., -1e-16]);
        assert!(psd_sqrt(&h, 1e-12).is_ok());
    }
}
