//! Unitary upper-triangularization of matrix sequences, shell by shell.
//!
//! Indices are grouped into norm shells `X_k = {j : k-1 <= ||A_j|| < k}`.
//! Each shell is Schur-factorized index by index and the unitaries are
//! glued back into one sequence `V` with `V^* A V = B` upper triangular.
//! Unitaries are uniformly bounded, so `V` is bounded even when `A` is not.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::eig::{schur, SchurFactorization, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::matrix::CMatrix;
use crate::seq::{level_sets, CentralProjection, EventuallyPeriodic, GeneratedSequence, MatrixSequence};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct TriangularResiduals {
    /// `max_k ||V_k^* V_k - I||_F`
    pub unitarity: f64,
    /// `max_k ||V_k B_k V_k^* - A_k||_F / (1 + ||A_k||_F)`
    pub reconstruction: f64,
    /// `max_k ||strict lower part of B_k||_F / (1 + ||A_k||_F)`
    pub strictly_lower: f64,
}

#[derive(Clone, Debug)]
pub struct TriangularizationResult<S, Set> {
    pub v: S,
    pub b: S,
    /// Shell `k` (from 1) holds the indices with `k-1 <= ||A_j|| < k`.
    pub shells: Vec<Set>,
    pub residuals: TriangularResiduals,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShellReport {
    pub shell: usize,
    /// `None` for an infinite shell.
    pub size: Option<usize>,
    pub max_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
struct Factor {
    v: CMatrix,
    b: CMatrix,
}

fn factor(a: &CMatrix) -> Result<(Factor, TriangularResiduals)> {
    let SchurFactorization { v, t, .. } = schur(a, DEFAULT_TOL)?;
    let n = a.n();
    let scale = 1.0 + a.frobenius_norm();
    let res = TriangularResiduals {
        unitarity: (&(&v.adjoint() * &v) - &CMatrix::identity(n)).frobenius_norm(),
        reconstruction: (&(&(&v * &t) * &v.adjoint()) - a).frobenius_norm() / scale,
        strictly_lower: t.strictly_lower_norm() / scale,
    };
    Ok((Factor { v, b: t }, res))
}

fn worst(a: TriangularResiduals, b: TriangularResiduals) -> TriangularResiduals {
    TriangularResiduals {
        unitarity: a.unitarity.max(b.unitarity),
        reconstruction: a.reconstruction.max(b.reconstruction),
        strictly_lower: a.strictly_lower.max(b.strictly_lower),
    }
}

/// Integer thresholds `1, 2, ..., floor(max) + 1`, enough for every norm to
/// fall below the last one.
fn shell_thresholds(max_norm: f64) -> Result<Vec<f64>> {
    if !max_norm.is_finite() {
        return Err(Error::NonFinite("norm"));
    }
    let top = max_norm.floor() as usize + 1;
    Ok((1..=top).map(|t| t as f64).collect())
}

fn shells_from_levels(levels: &[CentralProjection]) -> Vec<CentralProjection> {
    let mut below = CentralProjection::empty();
    levels
        .iter()
        .map(|o| {
            let shell = o.intersection(&below.complement());
            below = o.clone();
            shell
        })
        .collect()
}

pub fn shells(a: &MatrixSequence) -> Result<Vec<CentralProjection>> {
    let max = a.stored().map(|(_, m)| m.op_norm(1e-13)).fold(0.0, f64::max);
    Ok(shells_from_levels(&a.level_sets(&shell_thresholds(max)?)?))
}

pub fn shells_generated(a: &GeneratedSequence) -> Result<Vec<BTreeSet<usize>>> {
    let max = a.sup_norm_to_horizon()?;
    let levels = level_sets(a, &shell_thresholds(max)?)?;
    let mut below = BTreeSet::new();
    Ok(levels
        .into_iter()
        .map(|o| {
            let shell = o.difference(&below).copied().collect();
            below = o;
            shell
        })
        .collect())
}

pub fn triangularize_sequence(a: &MatrixSequence) -> Result<TriangularizationResult<MatrixSequence, CentralProjection>> {
    let shells = shells(a)?;
    let reps: Vec<usize> = a.values().representatives().collect();
    let l = a.values().prefix_len();
    let mut factors: Vec<Option<(Factor, TriangularResiduals)>> = vec![None; reps.len()];
    for shell in &shells {
        let members: Vec<usize> = reps.iter().copied().filter(|&k| shell.contains(k)).collect();
        let done: Vec<(usize, (Factor, TriangularResiduals))> = members
            .into_par_iter()
            .map(|k| factor(a.get(k)).map(|f| (k, f)).map_err(|e| Error::at_index(k, e)))
            .collect::<Result<_>>()?;
        for (k, f) in done {
            factors[k - 1] = Some(f);
        }
    }
    let factors: Vec<(Factor, TriangularResiduals)> = factors
        .into_iter()
        .enumerate()
        .map(|(i, f)| f.ok_or_else(|| Error::Internal(format!("index {} in no shell", i + 1))))
        .collect::<Result<_>>()?;
    let residuals = factors.iter().fold(TriangularResiduals::default(), |acc, (_, r)| worst(acc, *r));
    let split = |pick: fn(&Factor) -> CMatrix| -> Result<MatrixSequence> {
        let vals: Vec<CMatrix> = factors.iter().map(|(f, _)| pick(f)).collect();
        let (prefix, tail) = vals.split_at(l);
        MatrixSequence::periodic(prefix.to_vec(), tail.to_vec(), a.label())
    };
    Ok(TriangularizationResult {
        v: split(|f| f.v.clone())?.with_label(format!("V({})", a.label())),
        b: split(|f| f.b.clone())?.with_label(format!("B({})", a.label())),
        shells,
        residuals,
    })
}

/// Over the evaluated range; `V` and `B` are exact there and computed on
/// demand beyond it.
pub fn triangularize_generated(a: &GeneratedSequence) -> Result<TriangularizationResult<GeneratedSequence, BTreeSet<usize>>> {
    let shells = shells_generated(a)?;
    let mats = a.evaluate()?;
    let mut factors: Vec<Option<(Factor, TriangularResiduals)>> = vec![None; mats.len()];
    for shell in &shells {
        let done: Vec<(usize, (Factor, TriangularResiduals))> = shell
            .par_iter()
            .map(|&k| factor(&mats[k - 1]).map(|f| (k, f)).map_err(|e| Error::at_index(k, e)))
            .collect::<Result<_>>()?;
        for (k, f) in done {
            factors[k - 1] = Some(f);
        }
    }
    let factors: Vec<(Factor, TriangularResiduals)> = factors
        .into_iter()
        .enumerate()
        .map(|(i, f)| f.ok_or_else(|| Error::Internal(format!("index {} in no shell", i + 1))))
        .collect::<Result<_>>()?;
    let residuals = factors.iter().fold(TriangularResiduals::default(), |acc, (_, r)| worst(acc, *r));
    let vs: Vec<CMatrix> = factors.iter().map(|(f, _)| f.v.clone()).collect();
    let bs: Vec<CMatrix> = factors.into_iter().map(|(f, _)| f.b).collect();
    let (src_v, src_b) = (a.clone(), a.clone());
    let n = a.n();
    let h = a.horizon();
    let lazy = move |src: GeneratedSequence, cache: Vec<CMatrix>, take_v: bool| {
        GeneratedSequence::new(n, h, format!("{}({})", if take_v { "V" } else { "B" }, src.label()), move |k| {
            if let Some(m) = cache.get(k - 1) {
                return m.clone();
            }
            let f = src
                .get(k)
                .and_then(|m| factor(&m))
                .unwrap_or_else(|e| panic!("triangularization failed at index {k}: {e}"))
                .0;
            if take_v {
                f.v
            } else {
                f.b
            }
        })
    };
    Ok(TriangularizationResult {
        v: lazy(src_v, vs, true)?,
        b: lazy(src_b, bs, false)?,
        shells,
        residuals,
    })
}

fn report(sizes_and_norms: impl Iterator<Item = (Option<usize>, f64)>) -> Vec<ShellReport> {
    sizes_and_norms
        .enumerate()
        .filter(|(_, (size, _))| *size != Some(0))
        .map(|(i, (size, max_norm))| ShellReport {
            shell: i + 1,
            size,
            max_norm,
        })
        .collect()
}

/// Nonempty shells with their sizes and largest norms.
pub fn shell_report(a: &MatrixSequence) -> Result<Vec<ShellReport>> {
    let shells = shells(a)?;
    let norms: EventuallyPeriodic<u64> = a.values().map(|m| m.op_norm(1e-13).to_bits());
    Ok(report(shells.iter().map(|s| {
        let max = a
            .values()
            .representatives()
            .filter(|&k| s.contains(k))
            .map(|k| f64::from_bits(*norms.get(k)))
            .fold(0.0, f64::max);
        (s.count(), max)
    })))
}

pub fn shell_report_generated(a: &GeneratedSequence) -> Result<Vec<ShellReport>> {
    let shells = shells_generated(a)?;
    let norms = a.norms()?;
    Ok(report(shells.iter().map(|s| {
        let max = s.iter().map(|&k| norms[k - 1]).fold(0.0, f64::max);
        (Some(s.len()), max)
    })))
}
