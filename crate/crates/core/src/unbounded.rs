//! Matrices arbitrarily close to zero whose diagonalizable part is
//! arbitrarily large.
//!
//! `A(δ)` has top-left block `[[0, δ, 0], [0, 0, δ], [0, 0, δ^p]]` and
//! eigenvalues `0, 0, δ^p`. Its diagonalizable part has third column
//! `(δ^{2-p}, δ, δ^p)`, so for `p > 2` it grows like `δ^{2-p}` while
//! `||A|| <= 2δ`.
//!
//! All norms here are Frobenius norms. `D` is rank one, so for `D` this
//! coincides with the operator norm.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jc::jc_numeric;
use crate::matrix::{c64, CMatrix};

pub const DEFAULT_EXPONENT: f64 = 3.0;

/// Clustering tolerance for sweeps. Must sit below the smallest eigenvalue
/// gap `δ^p` of the swept family.
pub const SWEEP_CTOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub delta: f64,
    #[serde(rename = "norm_A")]
    pub norm_a: f64,
    #[serde(rename = "norm_D")]
    pub norm_d: f64,
    #[serde(rename = "norm_N")]
    pub norm_n: f64,
    #[serde(rename = "closed_form_norm_D")]
    pub closed_form_norm_d: f64,
    pub rel_error: f64,
}

fn check_family_args(delta: f64, p: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::domain(format!("delta must lie in (0, 1/2], got {delta}")));
    }
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::domain(format!("exponent p must be at least 2, got {p}")));
    }
    Ok(())
}

/// `A(δ)` with coupling `δ^3`, embedded in `n x n`.
pub fn family_a(delta: f64, n: usize) -> Result<CMatrix> {
    family_a_with_exponent(delta, n, DEFAULT_EXPONENT)
}

pub fn family_a_with_exponent(delta: f64, n: usize, p: f64) -> Result<CMatrix> {
    if n < 3 {
        return Err(Error::domain("family requires n >= 3"));
    }
    check_family_args(delta, p)?;
    let mut a = CMatrix::zeros(n, n);
    *a.at_mut(0, 1) = c64(delta, 0.0);
    *a.at_mut(1, 2) = c64(delta, 0.0);
    *a.at_mut(2, 2) = c64(delta.powf(p), 0.0);
    Ok(a)
}

/// The 3x3 decomposition of `A(δ)` with coupling `δ^3`.
pub fn closed_form_jc(delta: f64) -> Result<(CMatrix, CMatrix)> {
    closed_form_jc_with_exponent(delta, 3, DEFAULT_EXPONENT)
}

/// `D` has third column `(δ^{2-p}, δ, δ^p)`, `N = δ E12 - δ^{2-p} E13`.
pub fn closed_form_jc_with_exponent(delta: f64, n: usize, p: f64) -> Result<(CMatrix, CMatrix)> {
    if n < 3 {
        return Err(Error::domain("family requires n >= 3"));
    }
    check_family_args(delta, p)?;
    let top = delta.powf(2.0 - p);
    let mut d = CMatrix::zeros(n, n);
    *d.at_mut(0, 2) = c64(top, 0.0);
    *d.at_mut(1, 2) = c64(delta, 0.0);
    *d.at_mut(2, 2) = c64(delta.powf(p), 0.0);
    let mut nil = CMatrix::zeros(n, n);
    *nil.at_mut(0, 1) = c64(delta, 0.0);
    *nil.at_mut(0, 2) = c64(-top, 0.0);
    Ok((d, nil))
}

pub fn closed_form_norm_d(delta: f64, p: f64) -> f64 {
    let a = delta.powf(2.0 - p);
    let c = delta.powf(p);
    (a * a + delta * delta + c * c).sqrt()
}

fn relative_error(value: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        if value == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (value - reference).abs() / reference
    }
}

fn sweep_row(a: &CMatrix, delta: f64, reference: f64, ctol: f64) -> Result<SweepRow> {
    let j = jc_numeric(a, ctol)?;
    let norm_d = j.d.frobenius_norm();
    Ok(SweepRow {
        delta,
        norm_a: a.frobenius_norm(),
        norm_d,
        norm_n: j.n.frobenius_norm(),
        closed_form_norm_d: reference,
        rel_error: relative_error(norm_d, reference),
    })
}

/// One row per delta, in input order.
pub fn sweep(deltas: &[f64], n: usize, ctol: f64) -> Result<Vec<SweepRow>> {
    sweep_with_exponent(deltas, n, DEFAULT_EXPONENT, ctol)
}

pub fn sweep_with_exponent(deltas: &[f64], n: usize, p: f64, ctol: f64) -> Result<Vec<SweepRow>> {
    deltas
        .par_iter()
        .enumerate()
        .map(|(i, &delta)| {
            family_a_with_exponent(delta, n, p)
                .and_then(|a| sweep_row(&a, delta, closed_form_norm_d(delta, p), ctol))
                .map_err(|e| Error::at_index(i, e))
        })
        .collect()
}

/// `[[0, δ], [δ^3, 0]]`: distinct eigenvalues `±δ^2`, so `D = A`.
pub fn control_matrix(delta: f64) -> Result<CMatrix> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::domain(format!("delta must be finite and nonnegative, got {delta}")));
    }
    CMatrix::from_real(2, &[0.0, delta, delta.powi(3), 0.0])
}

/// Same table for the 2x2 control family. The reference norm is `||A||`.
pub fn control_sweep_n2(deltas: &[f64], ctol: f64) -> Result<Vec<SweepRow>> {
    deltas
        .par_iter()
        .enumerate()
        .map(|(i, &delta)| {
            control_matrix(delta)
                .and_then(|a| {
                    let reference = a.frobenius_norm();
                    sweep_row(&a, delta, reference, ctol)
                })
                .map_err(|e| Error::at_index(i, e))
        })
        .collect()
}
