//! Normalized power sequences `H_k = |A^k|^{1/k}` and the Dunford view of
//! the Jordan-Chevalley decomposition.
//!
//! `A^k` spans hundreds of orders of magnitude even for small matrices, and
//! its smallest singular values are what decide the small eigenvalues of
//! `H_k`. Forming `A^k` (even with rescaling) rounds them away. Instead we
//! run the discrete product QR iteration
//!
//! ```text
//! A Q_{j-1} = Q_j R_j,   A^k = Q_k (R_k ... R_1)
//! ```
//!
//! so that `|A^k|^2 = R^* R` for the accumulated triangle `R`. `R` is held
//! row-scaled, `R = diag(e^{l_i}) W` with unit rows `W`, and its singular
//! values are extracted in log form by a one-sided Jacobi SVD that never
//! leaves the scaled representation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::jc::{jc_numeric, JcCertificate};
use crate::matrix::{vec_norm, CMatrix, C64};

const JACOBI_TOL: f64 = 1e-15;
const JACOBI_MAX_SWEEPS: usize = 60;

/// Householder QR, `m = Q R`.
pub(crate) fn householder_qr(m: &CMatrix) -> (CMatrix, CMatrix) {
    let n = m.n();
    let mut r = m.clone();
    let mut q = CMatrix::identity(n);
    for k in 0..n.saturating_sub(1) {
        let x: Vec<C64> = (k..n).map(|i| r[(i, k)]).collect();
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
        for j in k..n {
            let s: C64 = v.iter().enumerate().map(|(i, vi)| vi.conj() * r[(k + i, j)]).sum();
            for (i, vi) in v.iter().enumerate() {
                *r.at_mut(k + i, j) -= *vi * s * 2.0;
            }
        }
        for i in 0..n {
            let s: C64 = v.iter().enumerate().map(|(c, vc)| q[(i, k + c)] * vc).sum();
            for (c, vc) in v.iter().enumerate() {
                *q.at_mut(i, k + c) -= s * vc.conj() * 2.0;
            }
        }
        *r.at_mut(k, k) = alpha;
        for i in k + 1..n {
            *r.at_mut(i, k) = C64::new(0.0, 0.0);
        }
    }
    (q, r)
}

/// Running state of the product QR iteration for one matrix.
#[derive(Clone, Debug)]
struct ProductQr {
    a: CMatrix,
    q: CMatrix,
    /// `ln` of the row scales of the accumulated triangle; `-inf` for zero rows.
    logd: Vec<f64>,
    /// Unit rows of the accumulated triangle.
    w: Vec<Vec<C64>>,
    steps: usize,
}

impl ProductQr {
    fn new(a: &CMatrix) -> Self {
        let n = a.n();
        let w = (0..n)
            .map(|i| {
                let mut row = vec![C64::new(0.0, 0.0); n];
                row[i] = C64::new(1.0, 0.0);
                row
            })
            .collect();
        ProductQr {
            a: a.clone(),
            q: CMatrix::identity(n),
            logd: vec![0.0; n],
            w,
            steps: 0,
        }
    }

    fn step(&mut self) -> Result<()> {
        let n = self.a.n();
        let (q, r) = householder_qr(&(&self.a * &self.q));
        let mut logd = vec![f64::NEG_INFINITY; n];
        let mut w = vec![vec![C64::new(0.0, 0.0); n]; n];
        for i in 0..n {
            let top = (i..n)
                .filter(|&l| r[(i, l)] != C64::new(0.0, 0.0))
                .map(|l| self.logd[l])
                .fold(f64::NEG_INFINITY, f64::max);
            if top == f64::NEG_INFINITY {
                continue;
            }
            let mut row = vec![C64::new(0.0, 0.0); n];
            for l in i..n {
                let coef = r[(i, l)] * (self.logd[l] - top).exp();
                if coef == C64::new(0.0, 0.0) {
                    continue;
                }
                for (dst, src) in row.iter_mut().zip(&self.w[l]) {
                    *dst += coef * src;
                }
            }
            let nu = vec_norm(&row);
            if !nu.is_finite() {
                return Err(Error::NumericRange(format!("power iterate at step {}", self.steps + 1)));
            }
            if nu > 0.0 {
                logd[i] = top + nu.ln();
                row.iter_mut().for_each(|z| *z /= nu);
                w[i] = row;
            }
        }
        self.q = q;
        self.logd = logd;
        self.w = w;
        self.steps += 1;
        Ok(())
    }

    /// `(R^* R)^{1/(2k)}` with `k` the number of steps taken.
    fn root(&self) -> Result<CMatrix> {
        let n = self.a.n();
        let k = self.steps as f64;
        let (logs, g) = scaled_column_svd(&self.logd, &self.w)?;
        let mut h = CMatrix::zeros(n, n);
        for (l, col) in logs.iter().zip(&g) {
            if *l == f64::NEG_INFINITY {
                continue;
            }
            let s = (l / k).exp();
            for i in 0..n {
                let vi = col[i] * s;
                for j in 0..n {
                    *h.at_mut(i, j) += vi * col[j].conj();
                }
            }
        }
        Ok(h.hermitian_part())
    }
}

/// Left singular vectors and log singular values of `F = W^* diag(e^logd)`,
/// by one-sided Jacobi on the columns of `F` kept as `e^{l_j} g_j`.
///
/// A rotation between columns with scale ratio `rho = e^{l_q - l_p} <= 1`
/// is written in terms of `tau = t / rho`, which stays finite as `rho`
/// underflows. That keeps the small column orthogonalized against the large
/// one no matter how far apart the scales are.
fn scaled_column_svd(logd: &[f64], w: &[Vec<C64>]) -> Result<(Vec<f64>, Vec<Vec<C64>>)> {
    let n = logd.len();
    let mut logs = logd.to_vec();
    let mut g: Vec<Vec<C64>> = w.iter().map(|row| row.iter().map(|z| z.conj()).collect()).collect();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0f64;
        for a in 0..n {
            for b in a + 1..n {
                if logs[a] == f64::NEG_INFINITY || logs[b] == f64::NEG_INFINITY {
                    continue;
                }
                let (p, q) = if logs[a] >= logs[b] { (a, b) } else { (b, a) };
                let gamma: C64 = g[p].iter().zip(&g[q]).map(|(x, y)| x.conj() * y).sum();
                let ag = gamma.norm();
                off = off.max(ag);
                if ag <= JACOBI_TOL {
                    continue;
                }
                let rho = (logs[q] - logs[p]).exp();
                let unphase = (gamma / ag).conj();
                let gq: Vec<C64> = g[q].iter().map(|z| z * unphase).collect();
                let z = (rho * rho - 1.0) / (2.0 * ag);
                let sign = if z < 0.0 { -1.0 } else { 1.0 };
                let tau = sign / (z.abs() + (rho * rho + z * z).sqrt());
                let t = rho * tau;
                let c = 1.0 / (1.0 + t * t).sqrt();
                let new_p: Vec<C64> = g[p].iter().zip(&gq).map(|(x, y)| x * c - y * (c * rho * rho * tau)).collect();
                let new_q: Vec<C64> = g[p].iter().zip(&gq).map(|(x, y)| x * (c * tau) + y * c).collect();
                for (idx, col) in [(p, new_p), (q, new_q)] {
                    let nu = vec_norm(&col);
                    if !nu.is_finite() {
                        return Err(Error::NumericRange("Jacobi rotation".into()));
                    }
                    if nu == 0.0 {
                        logs[idx] = f64::NEG_INFINITY;
                        g[idx] = col;
                    } else {
                        logs[idx] += nu.ln();
                        g[idx] = col.into_iter().map(|z| z / nu).collect();
                    }
                }
            }
        }
        if off <= JACOBI_TOL {
            break;
        }
    }
    Ok((logs, g))
}

fn check_square_finite(a: &CMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::domain("normalized powers need a square matrix"));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("matrix"));
    }
    Ok(())
}

/// `|A^k|^{1/k} = ((A^k)^* A^k)^{1/(2k)}`.
///
/// `A` is scaled by `c = 1 / max|a_ij|` first and the result rescaled by
/// `1 / c`, using `|(cA)^k|^{1/k} = |c| |A^k|^{1/k}`.
pub fn normalized_power(a: &CMatrix, k: usize) -> Result<CMatrix> {
    if k == 0 {
        return Err(Error::domain("k must be at least 1"));
    }
    Ok(normalized_power_schedule(a, &[k])?.remove(0))
}

/// `H_k` for each `k` in `ks` (strictly increasing), from one product run.
pub fn normalized_power_schedule(a: &CMatrix, ks: &[usize]) -> Result<Vec<CMatrix>> {
    check_square_finite(a)?;
    if ks.first().is_some_and(|&k| k == 0) || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("powers must be positive and strictly increasing"));
    }
    let s = a.max_abs();
    if s == 0.0 {
        return Ok(vec![CMatrix::zeros(a.n(), a.n()); ks.len()]);
    }
    let mut it = ProductQr::new(&a.scale_real(1.0 / s));
    let mut out = Vec::with_capacity(ks.len());
    for &k in ks {
        while it.steps < k {
            it.step()?;
        }
        out.push(it.root()?.scale_real(s));
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct NpsIterate {
    pub k: usize,
    pub h: CMatrix,
    /// `||H_k - H_{k/2}||_F`.
    pub step_norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct NpsTrace {
    pub iterates: Vec<NpsIterate>,
    pub limit_estimate: CMatrix,
    pub converged: bool,
    /// First `k` whose step passed the convergence test.
    pub first_converged_k: Option<usize>,
    /// Smallest `k` from which step norms are non-increasing.
    pub decreasing_from: Option<usize>,
}

/// Evaluates `H_k` for `k = 8, 16, ..., k_max`. `converged` reports whether
/// the final step satisfies `step_norm <= tol * (1 + ||A||)`; not
/// converging is a result, not an error.
pub fn nps_limit(a: &CMatrix, tol: f64, k_max: usize) -> Result<NpsTrace> {
    check_square_finite(a)?;
    if !(tol > 0.0) {
        return Err(Error::domain("tol must be positive"));
    }
    if k_max < 8 || !k_max.is_power_of_two() {
        return Err(Error::domain(format!("k_max must be a power of two, at least 8; got {k_max}")));
    }
    let threshold = tol * (1.0 + a.op_norm(1e-12));
    let ks: Vec<usize> = std::iter::successors(Some(4usize), |k| Some(k * 2))
        .take_while(|&k| k <= k_max)
        .collect();
    let hs = normalized_power_schedule(a, &ks)?;
    let iterates: Vec<NpsIterate> = (1..ks.len())
        .map(|i| NpsIterate {
            k: ks[i],
            step_norm: (&hs[i] - &hs[i - 1]).frobenius_norm(),
            h: hs[i].clone(),
        })
        .collect();
    let first_converged_k = iterates.iter().find(|i| i.step_norm <= threshold).map(|i| i.k);
    let converged = iterates.last().is_some_and(|i| i.step_norm <= threshold);
    let mut decreasing_from = iterates.last().map(|i| i.k);
    for pair in iterates.windows(2).rev() {
        if pair[1].step_norm <= pair[0].step_norm {
            decreasing_from = Some(pair[0].k);
        } else {
            break;
        }
    }
    let limit_estimate = iterates.last().map(|i| i.h.clone()).expect("k_max >= 8 yields an iterate");
    Ok(NpsTrace {
        iterates,
        limit_estimate,
        converged,
        first_converged_k,
        decreasing_from,
    })
}

/// In finite dimensions the Dunford decomposition is the Jordan-Chevalley
/// one: `D` is scalar-type (similar to a diagonal matrix through its
/// eigenbasis) and `N` is quasinilpotent (nilpotent).
#[derive(Clone, Debug)]
pub struct DunfordView {
    pub scalar_part: CMatrix,
    pub quasinilpotent_part: CMatrix,
    pub certificate: JcCertificate,
}

pub fn dunford_view(a: &CMatrix, ctol: f64) -> Result<DunfordView> {
    let j = jc_numeric(a, ctol)?;
    Ok(DunfordView {
        scalar_part: j.d,
        quasinilpotent_part: j.n,
        certificate: j.certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eig::{hermitian_eigen, modulus, DEFAULT_TOL};
    use crate::jc::DEFAULT_CTOL;
    use crate::matrix::c64;
    use crate::unbounded::family_a;

    fn r(n: usize, v: &[f64]) -> CMatrix {
        CMatrix::from_real(n, v).unwrap()
    }

    fn sorted_eigs(h: &CMatrix) -> Vec<f64> {
        hermitian_eigen(h, DEFAULT_TOL).unwrap().0
    }

    #[test]
    fn qr_reconstructs() {
        let m = CMatrix::from_rows(&[
            vec![c64(1., 2.), c64(0., 1.), c64(3., 0.)],
            vec![c64(0., 0.), c64(2., -1.), c64(1., 1.)],
            vec![c64(4., 0.), c64(1., 0.), c64(0., -2.)],
        ])
        .unwrap();
        let (q, rr) = householder_qr(&m);
        assert!((&(&q * &rr) - &m).max_abs() < 1e-14);
        assert!((&(&q.adjoint() * &q) - &CMatrix::identity(3)).max_abs() < 1e-14);
        assert!(rr.strictly_lower_norm() == 0.0);
    }

    #[test]
    fn normal_input_gives_modulus() {
        let a = CMatrix::from_rows(&[vec![c64(0., 0.), c64(-2., 0.)], vec![c64(2., 0.), c64(0., 0.)]]).unwrap();
        let m = modulus(&a, DEFAULT_TOL).unwrap();
        for k in [1, 2, 3, 7, 64] {
            assert!((&normalized_power(&a, k).unwrap() - &m).max_abs() < 1e-12);
        }
    }

    #[test]
    fn nilpotent_powers_vanish() {
        let j3 = r(3, &[0., 1., 0., 0., 0., 1., 0., 0., 0.]);
        assert!(normalized_power(&j3, 3).unwrap().max_abs() < 1e-12);
        assert!(normalized_power(&j3, 40).unwrap().max_abs() < 1e-12);
        assert!(normalized_power(&j3, 1).unwrap().max_abs() > 0.5);
    }

    #[test]
    fn positive_diagonal_fixed_point() {
        let a = r(2, &[2., 0., 0., 0.5]);
        assert!((&normalized_power(&a, 5).unwrap() - &a).max_abs() < 1e-14);
    }

    #[test]
    fn jordan_block_limit() {
        let t = nps_limit(&r(2, &[1., 1., 0., 1.]), 1e-2, 1024).unwrap();
        assert!(t.converged);
        for e in sorted_eigs(&t.limit_estimate) {
            assert!((e - 1.0).abs() < 1e-2);
        }
        // too strict a tolerance is reported, not raised
        let t = nps_limit(&r(2, &[1., 1., 0., 1.]), 1e-6, 64).unwrap();
        assert!(!t.converged);
    }

    #[test]
    fn normal_converges_at_first_step() {
        let a = r(3, &[1., 2., 0., -2., 1., 0., 0., 0., 0.3]);
        let t = nps_limit(&a, 1e-10, 64).unwrap();
        assert_eq!(t.first_converged_k, Some(8));
        assert!((&t.limit_estimate - &modulus(&a, DEFAULT_TOL).unwrap()).max_abs() < 1e-10);
    }

    #[test]
    fn small_eigenvalue_survives() {
        let t = nps_limit(&family_a(0.3, 3).unwrap(), 1e-2, 1024).unwrap();
        let e = sorted_eigs(&t.limit_estimate);
        let want = [0.0, 0.0, 0.027];
        for (x, y) in e.iter().zip(want) {
            assert!((x - y).abs() < 1e-3, "{e:?}");
        }
    }

    #[test]
    fn graded_spectrum_at_high_power() {
        // moduli spanning 300 orders of magnitude at k = 1024
        let a = r(3, &[1.5, 1., 0.3, 0., 0.7, -1., 0., 0., 0.2]);
        let h = normalized_power(&a, 1024).unwrap();
        let e = sorted_eigs(&h);
        for (x, y) in e.iter().zip([0.2, 0.7, 1.5]) {
            assert!((x - y).abs() < 1e-2, "{e:?}");
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let a = CMatrix::identity(2);
        assert!(normalized_power(&a, 0).is_err());
        assert!(nps_limit(&a, 1e-3, 12).is_err());
        assert!(nps_limit(&a, 1e-3, 4).is_err());
        assert!(nps_limit(&a, 0.0, 8).is_err());
        let t = nps_limit(&CMatrix::zeros(2, 2), 1e-3, 16).unwrap();
        assert!(t.converged && t.limit_estimate.is_zero());
    }

    #[test]
    fn dunford_examples() {
        let a = r(2, &[1., 2., 2., -1.]);
        let v = dunford_view(&a, DEFAULT_CTOL).unwrap();
        assert!((&v.scalar_part - &a).max_abs() < 1e-13);
        assert!(v.quasinilpotent_part.max_abs() < 1e-13);

        let j = r(3, &[2., 1., 0., 0., 2., 1., 0., 0., 2.]);
        let v = dunford_view(&j, DEFAULT_CTOL).unwrap();
        assert!((&v.scalar_part - &CMatrix::identity(3).scale_real(2.0)).max_abs() < 1e-13);
        assert!((&v.quasinilpotent_part - &r(3, &[0., 1., 0., 0., 0., 1., 0., 0., 0.])).max_abs() < 1e-13);

        let d = r(3, &[1., 1., 1., 0., 1., 1., 0., 0., 2.]);
        let v = dunford_view(&d, DEFAULT_CTOL).unwrap();
        let j = jc_numeric(&d, DEFAULT_CTOL).unwrap();
        assert_eq!(v.scalar_part, j.d);
    }
}
