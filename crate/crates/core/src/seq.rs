//! Sequences of matrices indexed by `k = 1, 2, ...`.
//!
//! Bounded sequences play the role of continuous matrix functions, all
//! sequences the role of normal (affiliated) ones. Two carriers:
//!
//! - [`MatrixSequence`]: an exact, eventually periodic sequence (finite
//!   prefix, then a repeating block). Algebra, restriction and direct sums
//!   stay exact and finite.
//! - [`GeneratedSequence`]: a deterministic generator probed up to a
//!   horizon, for sequences that are genuinely unbounded.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use num::integer::lcm;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::eig::{hermitian_eigen, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::jc::{jc_numeric, JcCertificate};
use crate::matrix::{CMatrix, C64};
use crate::nps::normalized_power_schedule;
use crate::unbounded::family_a;

const NORM_TOL: f64 = 1e-13;
const PROJECTION_TOL: f64 = 1e-10;

/// Relative bound on `||N^n||` below which a matrix counts as nilpotent.
pub const NILPOTENT_TOL: f64 = 1e-10;

/// Largest dyadic power used by the non-analytic quasinilpotence test.
pub const QUASINILPOTENT_MAX_POWER: usize = 1024;

/// Relative bound on `||N(A_k)||` below which `A_k` counts as diagonalizable.
pub const DIAGONALIZABLE_TOL: f64 = 1e-8;

/// `x_1, ..., x_L` followed by `t_1, ..., t_P` repeated forever.
///
/// Always stored in canonical form (minimal period, then minimal prefix),
/// so structural equality is equality of sequences.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EventuallyPeriodic<T> {
    prefix: Vec<T>,
    tail: Vec<T>,
}

impl<T: Clone + PartialEq> EventuallyPeriodic<T> {
    pub fn new(prefix: Vec<T>, tail: Vec<T>) -> Result<Self> {
        if tail.is_empty() {
            return Err(Error::domain("periodic tail must be nonempty"));
        }
        Ok(Self::canonical(prefix, tail))
    }

    pub fn constant(value: T) -> Self {
        EventuallyPeriodic {
            prefix: Vec::new(),
            tail: vec![value],
        }
    }

    fn canonical(mut prefix: Vec<T>, mut tail: Vec<T>) -> Self {
        let p = tail.len();
        if let Some(d) = (1..p).find(|d| p.is_multiple_of(*d) && (0..p).all(|i| tail[i] == tail[i % d])) {
            tail.truncate(d);
        }
        while prefix.last().is_some_and(|x| Some(x) == tail.last()) {
            prefix.pop();
            tail.rotate_right(1);
        }
        EventuallyPeriodic { prefix, tail }
    }

    /// Value at index `k >= 1`.
    pub fn get(&self, k: usize) -> &T {
        assert!(k >= 1, "sequences are indexed from 1");
        if k <= self.prefix.len() {
            &self.prefix[k - 1]
        } else {
            &self.tail[(k - self.prefix.len() - 1) % self.tail.len()]
        }
    }

    pub fn prefix(&self) -> &[T] {
        &self.prefix
    }

    pub fn tail(&self) -> &[T] {
        &self.tail
    }

    pub fn prefix_len(&self) -> usize {
        self.prefix.len()
    }

    pub fn period(&self) -> usize {
        self.tail.len()
    }

    /// Indices `1..=L+P`; every value of the sequence occurs at one of them.
    pub fn representatives(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.prefix.len() + self.tail.len()
    }

    /// Rebuilds from values at representative indices of layout `(l, p)`.
    fn from_layout(l: usize, values: Vec<T>) -> Self {
        let mut prefix = values;
        let tail = prefix.split_off(l);
        Self::canonical(prefix, tail)
    }

    /// Values at indices `1..=l+p`, where `l >= L` and `P | p`.
    fn layout_values(&self, l: usize, p: usize) -> Vec<T> {
        (1..=l + p).map(|k| self.get(k).clone()).collect()
    }

    pub fn map<U: Clone + PartialEq>(&self, f: impl Fn(&T) -> U) -> EventuallyPeriodic<U> {
        EventuallyPeriodic::canonical(self.prefix.iter().map(&f).collect(), self.tail.iter().map(&f).collect())
    }

    pub fn zip_with<U: Clone + PartialEq, V: Clone + PartialEq>(
        &self,
        other: &EventuallyPeriodic<U>,
        f: impl Fn(&T, &U) -> V,
    ) -> EventuallyPeriodic<V> {
        let (l, p) = joint_layout([self.layout(), other.layout()]);
        let vals = (1..=l + p).map(|k| f(self.get(k), other.get(k))).collect();
        EventuallyPeriodic::from_layout(l, vals)
    }

    fn layout(&self) -> (usize, usize) {
        (self.prefix.len(), self.tail.len())
    }
}

fn joint_layout(layouts: impl IntoIterator<Item = (usize, usize)>) -> (usize, usize) {
    layouts.into_iter().fold((0, 1), |(l, p), (l2, p2)| (l.max(l2), lcm(p, p2)))
}

/// Per-index fallible map with index attribution, run in parallel.
fn try_map_indexed<T, U>(
    values: &EventuallyPeriodic<T>,
    f: impl Fn(&T) -> Result<U> + Sync,
) -> Result<EventuallyPeriodic<U>>
where
    T: Clone + PartialEq + Sync,
    U: Clone + PartialEq + Send,
{
    let l = values.prefix_len();
    let out: Vec<U> = values
        .representatives()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|k| f(values.get(k)).map_err(|e| Error::at_index(k, e)))
        .collect::<Result<_>>()?;
    Ok(EventuallyPeriodic::from_layout(l, out))
}

fn check_matrix(m: &CMatrix, n: usize) -> Result<()> {
    if !m.is_square() || m.n() != n {
        return Err(Error::domain(format!("expected a {n}x{n} matrix, got {}x{}", m.rows(), m.cols())));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("sequence entry"));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct MatrixSequence {
    n: usize,
    values: EventuallyPeriodic<CMatrix>,
    label: String,
}

impl PartialEq for MatrixSequence {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.values == other.values
    }
}

impl MatrixSequence {
    /// Prefix followed by a constant tail.
    pub fn new(prefix: Vec<CMatrix>, tail: CMatrix, label: impl Into<String>) -> Result<Self> {
        Self::periodic(prefix, vec![tail], label)
    }

    pub fn periodic(prefix: Vec<CMatrix>, tail: Vec<CMatrix>, label: impl Into<String>) -> Result<Self> {
        let n = tail.first().ok_or_else(|| Error::domain("periodic tail must be nonempty"))?.rows();
        for (i, m) in prefix.iter().chain(&tail).enumerate() {
            check_matrix(m, n).map_err(|e| Error::at_index(i + 1, e))?;
        }
        Ok(MatrixSequence {
            n,
            values: EventuallyPeriodic::new(prefix, tail)?,
            label: label.into(),
        })
    }

    pub fn constant(m: CMatrix) -> Result<Self> {
        Self::new(Vec::new(), m, "constant")
    }

    pub fn zero(n: usize) -> Self {
        Self::from_values(n, EventuallyPeriodic::constant(CMatrix::zeros(n, n)), "zero")
    }

    pub fn identity(n: usize) -> Self {
        Self::from_values(n, EventuallyPeriodic::constant(CMatrix::identity(n)), "identity")
    }

    /// 1x1 sequence with the given prefix and periodic tail.
    pub fn scalar(prefix: &[C64], tail: &[C64]) -> Result<Self> {
        let one = |z: &C64| CMatrix::diag(&[*z]).expect("1x1");
        Self::periodic(prefix.iter().map(one).collect(), tail.iter().map(one).collect(), "scalar")
    }

    fn from_values(n: usize, values: EventuallyPeriodic<CMatrix>, label: impl Into<String>) -> Self {
        MatrixSequence {
            n,
            values,
            label: label.into(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: usize) -> &CMatrix {
        self.values.get(k)
    }

    pub fn values(&self) -> &EventuallyPeriodic<CMatrix> {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn is_zero(&self) -> bool {
        self.values.prefix().iter().chain(self.values.tail()).all(CMatrix::is_zero)
    }

    /// Stored `(index, matrix)` pairs; every value of the sequence appears.
    pub fn stored(&self) -> impl Iterator<Item = (usize, &CMatrix)> {
        self.values.representatives().map(move |k| (k, self.get(k)))
    }

    pub fn map_pointwise(&self, f: impl Fn(&CMatrix) -> Result<CMatrix> + Sync, label: impl Into<String>) -> Result<Self> {
        Ok(Self::from_values(self.n, try_map_indexed(&self.values, f)?, label))
    }

    /// `{k : ||A_k|| < t}` for each threshold.
    pub fn level_sets(&self, thresholds: &[f64]) -> Result<Vec<CentralProjection>> {
        check_thresholds(thresholds)?;
        let norms = self.values.map(|m| OrdF64(m.op_norm(NORM_TOL)));
        Ok(thresholds
            .iter()
            .map(|&t| CentralProjection {
                set: norms.map(|x| x.0 < t),
            })
            .collect())
    }
}

/// Exact-equality wrapper so norms can live in an `EventuallyPeriodic`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct OrdF64(f64);

fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.windows(2).any(|w| !(w[0] < w[1])) || thresholds.iter().any(|t| t.is_nan()) {
        return Err(Error::domain("thresholds must be strictly increasing"));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TailRepr {
    One(CMatrix),
    Many(Vec<CMatrix>),
}

#[derive(Serialize, Deserialize)]
struct SequenceRepr {
    n: usize,
    prefix: Vec<CMatrix>,
    /// A single matrix for a constant tail, a list for a periodic one.
    tail: TailRepr,
    #[serde(default)]
    label: String,
}

impl Serialize for MatrixSequence {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let tail = match self.values.tail() {
            [one] => TailRepr::One(one.clone()),
            many => TailRepr::Many(many.to_vec()),
        };
        SequenceRepr {
            n: self.n,
            prefix: self.values.prefix().to_vec(),
            tail,
            label: self.label.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MatrixSequence {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = SequenceRepr::deserialize(d)?;
        let tail = match r.tail {
            TailRepr::One(m) => vec![m],
            TailRepr::Many(v) => v,
        };
        let seq = MatrixSequence::periodic(r.prefix, tail, r.label).map_err(serde::de::Error::custom)?;
        if seq.n != r.n {
            return Err(serde::de::Error::custom(format!("declared n = {} but matrices are {}x{}", r.n, seq.n, seq.n)));
        }
        Ok(seq)
    }
}

fn check_same_n(a: &MatrixSequence, b: &MatrixSequence) -> Result<()> {
    if a.n != b.n {
        return Err(Error::domain(format!("sequence sizes differ: {} vs {}", a.n, b.n)));
    }
    Ok(())
}

pub fn seq_add(a: &MatrixSequence, b: &MatrixSequence) -> Result<MatrixSequence> {
    check_same_n(a, b)?;
    Ok(MatrixSequence::from_values(a.n, a.values.zip_with(&b.values, |x, y| x + y), format!("({} + {})", a.label, b.label)))
}

pub fn seq_mul(a: &MatrixSequence, b: &MatrixSequence) -> Result<MatrixSequence> {
    check_same_n(a, b)?;
    Ok(MatrixSequence::from_values(a.n, a.values.zip_with(&b.values, |x, y| x * y), format!("({} * {})", a.label, b.label)))
}

pub fn seq_adjoint(a: &MatrixSequence) -> MatrixSequence {
    MatrixSequence::from_values(a.n, a.values.map(CMatrix::adjoint), format!("{}*", a.label))
}

pub fn seq_neg(a: &MatrixSequence) -> MatrixSequence {
    MatrixSequence::from_values(a.n, a.values.map(|m| -m), format!("-{}", a.label))
}

/// `sup_k ||A_k||`, exact over the finitely many distinct values.
pub fn sup_norm(a: &MatrixSequence) -> f64 {
    a.stored().map(|(_, m)| m.op_norm(NORM_TOL)).fold(0.0, f64::max)
}

/// Pointwise `|A_k^m|^{1/m}`.
pub fn pointwise_normalized_power(a: &MatrixSequence, m: usize) -> Result<MatrixSequence> {
    a.map_pointwise(|x| Ok(normalized_power_schedule(x, &[m])?.remove(0)), format!("|{}^{m}|^(1/{m})", a.label))
}

/// Subset of `N = {1, 2, ...}` with an eventually periodic indicator:
/// finite and cofinite sets, residue classes, and their Boolean combinations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CentralProjection {
    set: EventuallyPeriodic<bool>,
}

impl CentralProjection {
    pub fn empty() -> Self {
        CentralProjection {
            set: EventuallyPeriodic::constant(false),
        }
    }

    pub fn full() -> Self {
        CentralProjection {
            set: EventuallyPeriodic::constant(true),
        }
    }

    pub fn from_pattern(prefix: Vec<bool>, tail: Vec<bool>) -> Result<Self> {
        Ok(CentralProjection {
            set: EventuallyPeriodic::new(prefix, tail)?,
        })
    }

    pub fn finite(indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let idx: BTreeSet<usize> = indices.into_iter().collect();
        if idx.contains(&0) {
            return Err(Error::domain("indices start at 1"));
        }
        let top = idx.last().copied().unwrap_or(0);
        let prefix = (1..=top).map(|k| idx.contains(&k)).collect();
        Self::from_pattern(prefix, vec![false])
    }

    pub fn cofinite(excluded: impl IntoIterator<Item = usize>) -> Result<Self> {
        Ok(Self::finite(excluded)?.complement())
    }

    /// `{k : k = residue (mod modulus)}`.
    pub fn residue_class(modulus: usize, residue: usize) -> Result<Self> {
        if modulus == 0 || residue >= modulus {
            return Err(Error::domain("need modulus >= 1 and residue < modulus"));
        }
        // tail starts at index 1
        let tail = (1..=modulus).map(|k| k % modulus == residue).collect();
        Self::from_pattern(Vec::new(), tail)
    }

    pub fn evens() -> Self {
        Self::residue_class(2, 0).expect("valid class")
    }

    pub fn odds() -> Self {
        Self::residue_class(2, 1).expect("valid class")
    }

    pub fn contains(&self, k: usize) -> bool {
        k >= 1 && *self.set.get(k)
    }

    pub fn complement(&self) -> Self {
        CentralProjection {
            set: self.set.map(|b| !b),
        }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        CentralProjection {
            set: self.set.zip_with(&other.set, |a, b| *a && *b),
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        CentralProjection {
            set: self.set.zip_with(&other.set, |a, b| *a || *b),
        }
    }

    pub fn is_empty(&self) -> bool {
        *self == Self::empty()
    }

    pub fn is_full(&self) -> bool {
        *self == Self::full()
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.intersection(other).is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.set.tail() == [false]
    }

    /// Number of elements, `None` when infinite.
    pub fn count(&self) -> Option<usize> {
        self.is_finite().then(|| self.set.prefix().iter().filter(|&&b| b).count())
    }

    pub fn indices_up_to(&self, h: usize) -> Vec<usize> {
        (1..=h).filter(|&k| self.contains(k)).collect()
    }

    pub fn pattern(&self) -> &EventuallyPeriodic<bool> {
        &self.set
    }
}

/// Pointwise `A_k` on `E`, zero off `E`.
pub fn restrict(a: &MatrixSequence, e: &CentralProjection) -> MatrixSequence {
    let zero = CMatrix::zeros(a.n, a.n);
    MatrixSequence::from_values(
        a.n,
        a.values.zip_with(&e.set, |m, &inside| if inside { m.clone() } else { zero.clone() }),
        format!("{}|E", a.label),
    )
}

/// The unique sequence agreeing with part `i` on its index set. The index
/// sets must be pairwise disjoint and cover `N`.
pub fn direct_sum(parts: &[(CentralProjection, MatrixSequence)]) -> Result<MatrixSequence> {
    let n = parts.first().ok_or_else(|| Error::domain("direct sum of no parts"))?.1.n;
    for (i, (e, a)) in parts.iter().enumerate() {
        if a.n != n {
            return Err(Error::domain(format!("part {} has size {}, expected {n}", i + 1, a.n)));
        }
        for (j, (f, _)) in parts.iter().enumerate().skip(i + 1) {
            if !e.is_disjoint(f) {
                return Err(Error::domain(format!("parts {} and {} overlap", i + 1, j + 1)));
            }
        }
    }
    let cover = parts.iter().fold(CentralProjection::empty(), |acc, (e, _)| acc.union(e));
    if !cover.is_full() {
        return Err(Error::domain("parts do not cover every index"));
    }
    let (l, p) = joint_layout(parts.iter().flat_map(|(e, a)| [e.set.layout(), a.values.layout()]));
    let vals = (1..=l + p)
        .map(|k| {
            let (_, a) = parts.iter().find(|(e, _)| e.contains(k)).expect("cover checked");
            a.get(k).clone()
        })
        .collect();
    Ok(MatrixSequence::from_values(n, EventuallyPeriodic::from_layout(l, vals), "direct sum"))
}

/// Normal tracial state `tau(A) = sum_k w_k tr(A_k) / n` with weights
/// given by a finite prefix and a geometric tail `w_{L+1+j} = c r^j`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceState {
    prefix: Vec<f64>,
    tail_first: f64,
    ratio: f64,
}

impl Default for TraceState {
    /// `w_k = 2^{-k}`.
    fn default() -> Self {
        TraceState {
            prefix: Vec::new(),
            tail_first: 0.5,
            ratio: 0.5,
        }
    }
}

impl TraceState {
    /// Positive weights, normalized to total mass one.
    pub fn new(prefix: Vec<f64>, tail_first: f64, ratio: f64) -> Result<Self> {
        if prefix.iter().any(|w| !(*w > 0.0) || !w.is_finite()) || !(tail_first > 0.0) || !tail_first.is_finite() {
            return Err(Error::domain("weights must be positive and finite"));
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::domain("tail ratio must lie in (0, 1)"));
        }
        let total = prefix.iter().sum::<f64>() + tail_first / (1.0 - ratio);
        Ok(TraceState {
            prefix: prefix.iter().map(|w| w / total).collect(),
            tail_first: tail_first / total,
            ratio,
        })
    }

    pub fn weight(&self, k: usize) -> f64 {
        assert!(k >= 1, "sequences are indexed from 1");
        match k.checked_sub(self.prefix.len() + 1) {
            None => self.prefix[k - 1],
            Some(j) => self.tail_first * self.ratio.powf(j as f64),
        }
    }

    /// `sum_{m >= 0} w_{start + m * step}` in closed form.
    pub fn progression_weight(&self, start: usize, step: usize) -> f64 {
        assert!(start >= 1 && step >= 1);
        let mut k = start;
        let mut sum = 0.0;
        while k <= self.prefix.len() {
            sum += self.prefix[k - 1];
            k += step;
        }
        sum + self.weight(k) / (1.0 - self.ratio.powf(step as f64))
    }

    /// `sum_{k > h} w_k`.
    pub fn tail_mass(&self, h: usize) -> f64 {
        self.progression_weight(h + 1, 1)
    }

    /// `tau(E)` for a central projection.
    pub fn measure(&self, e: &CentralProjection) -> f64 {
        let (l, p) = e.set.layout();
        let head: f64 = (1..=l).filter(|&k| e.contains(k)).map(|k| self.weight(k)).sum();
        let tail: f64 = (l + 1..=l + p).filter(|&k| e.contains(k)).map(|k| self.progression_weight(k, p)).sum();
        head + tail
    }

    /// `tau(A) = sum_k w_k tr(A_k) / n`.
    pub fn expectation(&self, a: &MatrixSequence) -> C64 {
        let (l, p) = a.values.layout();
        let n = a.n as f64;
        let head: C64 = (1..=l).map(|k| a.get(k).trace() * self.weight(k)).sum();
        let tail: C64 = (l + 1..=l + p).map(|k| a.get(k).trace() * self.progression_weight(k, p)).sum();
        (head + tail) / n
    }

    /// Weight of the index class represented by each stored index of a
    /// layout `(l, p)`.
    fn class_weights(&self, l: usize, p: usize) -> Vec<f64> {
        (1..=l).map(|k| self.weight(k)).chain((l + 1..=l + p).map(|k| self.progression_weight(k, p))).collect()
    }
}

/// Pointwise orthogonal projections `E_k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjectionSequence {
    n: usize,
    values: EventuallyPeriodic<CMatrix>,
}

impl ProjectionSequence {
    pub fn new(n: usize, values: EventuallyPeriodic<CMatrix>) -> Result<Self> {
        for k in values.representatives() {
            let e = values.get(k);
            check_matrix(e, n).map_err(|err| Error::at_index(k, err))?;
            let scale = 1.0 + e.frobenius_norm();
            if (&(e * e) - e).frobenius_norm() > PROJECTION_TOL * scale || (e - &e.adjoint()).frobenius_norm() > PROJECTION_TOL * scale {
                return Err(Error::at_index(k, Error::domain("not an orthogonal projection")));
            }
        }
        Ok(ProjectionSequence { n, values })
    }

    pub fn identity(n: usize) -> Self {
        ProjectionSequence {
            n,
            values: EventuallyPeriodic::constant(CMatrix::identity(n)),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: usize) -> &CMatrix {
        self.values.get(k)
    }

    pub fn values(&self) -> &EventuallyPeriodic<CMatrix> {
        &self.values
    }
}

#[derive(Clone, Debug)]
pub struct MMembership {
    /// True when the canonical witness certifies membership. False means
    /// only that no canonical witness exists, not that `A` lies outside.
    pub member: bool,
    /// `tau(I - E)`.
    pub excluded_mass: f64,
    /// `sup_k ||A_k E_k||`.
    pub achieved_norm: f64,
    pub witness: Option<ProjectionSequence>,
}

/// Spectral projection of `A*A` onto eigenvalues `<= eps^2`, and its rank.
fn spectral_window(a: &CMatrix, eps: f64) -> Result<(CMatrix, usize)> {
    let n = a.n();
    let (values, vecs) = hermitian_eigen(&(&a.adjoint() * a), DEFAULT_TOL)?;
    let mut e = CMatrix::zeros(n, n);
    let mut rank = 0;
    for (j, &s2) in values.iter().enumerate() {
        if s2 > eps * eps {
            continue;
        }
        rank += 1;
        for r in 0..n {
            for c in 0..n {
                *e.at_mut(r, c) += vecs[(r, j)] * vecs[(c, j)].conj();
            }
        }
    }
    Ok((e.hermitian_part(), rank))
}

struct WindowScan {
    projections: Vec<CMatrix>,
    excluded: f64,
    achieved: f64,
}

fn scan_windows(mats: &[CMatrix], weights: &[f64], unseen: f64, eps: f64) -> Result<WindowScan> {
    let rows: Vec<(CMatrix, usize)> = mats
        .par_iter()
        .enumerate()
        .map(|(i, m)| spectral_window(m, eps).map_err(|e| Error::at_index(i + 1, e)))
        .collect::<Result<_>>()?;
    let mut excluded = unseen;
    let mut achieved = 0.0f64;
    for ((e, rank), (m, w)) in rows.iter().zip(mats.iter().zip(weights)) {
        let n = m.n();
        excluded += w * (n - rank) as f64 / n as f64;
        if *rank > 0 {
            achieved = achieved.max((m * e).op_norm(NORM_TOL));
        }
    }
    Ok(WindowScan {
        projections: rows.into_iter().map(|(e, _)| e).collect(),
        excluded,
        achieved,
    })
}

fn check_eps_delta(eps: f64, delta: f64) -> Result<()> {
    if !(eps > 0.0 && delta > 0.0) {
        return Err(Error::domain("eps and delta must be positive"));
    }
    Ok(())
}

/// Tests membership of `A` in the neighbourhood `O(tau, eps, delta)` of zero
/// with the canonical witness `E_k` = spectral projection of `|A_k|` onto
/// `[0, eps]`: member when `tau(I - E) <= delta`.
pub fn m_membership(a: &MatrixSequence, tau: &TraceState, eps: f64, delta: f64) -> Result<MMembership> {
    check_eps_delta(eps, delta)?;
    let (l, p) = a.values.layout();
    let mats = a.values.layout_values(l, p);
    let scan = scan_windows(&mats, &tau.class_weights(l, p), 0.0, eps)?;
    let member = scan.excluded <= delta;
    let witness = member
        .then(|| ProjectionSequence::new(a.n, EventuallyPeriodic::from_layout(l, scan.projections)))
        .transpose()?;
    Ok(MMembership {
        member,
        excluded_mass: scan.excluded,
        achieved_norm: scan.achieved,
        witness,
    })
}

/// As [`m_membership`] over the evaluated range. Indices past the horizon
/// count as excluded (`E_k = 0` there), which can only under-report
/// membership.
pub fn m_membership_generated(a: &GeneratedSequence, tau: &TraceState, eps: f64, delta: f64) -> Result<MMembership> {
    check_eps_delta(eps, delta)?;
    let mats = a.evaluate()?;
    let weights: Vec<f64> = (1..=a.horizon).map(|k| tau.weight(k)).collect();
    let scan = scan_windows(&mats, &weights, tau.tail_mass(a.horizon), eps)?;
    let member = scan.excluded <= delta;
    let witness = member
        .then(|| ProjectionSequence::new(a.n, EventuallyPeriodic::canonical(scan.projections, vec![CMatrix::zeros(a.n, a.n)])))
        .transpose()?;
    Ok(MMembership {
        member,
        excluded_mass: scan.excluded,
        achieved_norm: scan.achieved,
        witness,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum QuasinilpotenceMethod {
    /// Every evaluated `N_k` is nilpotent, so `|N_k^m|^{1/m} = 0` for `m >= n`.
    Analytic,
    /// Dyadic normalized powers checked against the schedule.
    Schedule,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuasinilpotenceVerdict {
    pub quasinilpotent: bool,
    pub method: QuasinilpotenceMethod,
    /// Per schedule entry, the dyadic power from which every later power
    /// passed, if any. Empty for the analytic branch.
    pub passing_from: Vec<Option<usize>>,
}

fn check_schedule(schedule: &[(f64, f64)]) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::domain("schedule must be nonempty"));
    }
    for &(e, d) in schedule {
        check_eps_delta(e, d)?;
    }
    if schedule.windows(2).any(|w| w[1].0 > w[0].0 || w[1].1 > w[0].1) {
        return Err(Error::domain("schedule must be decreasing"));
    }
    Ok(())
}

fn is_nilpotent(m: &CMatrix) -> bool {
    let n = m.n();
    m.pow(n as u32).frobenius_norm() <= NILPOTENT_TOL * (1.0 + m.frobenius_norm()).powi(n as i32)
}

fn dyadic_powers() -> Vec<usize> {
    std::iter::successors(Some(1usize), |k| Some(k * 2))
        .take_while(|&k| k <= QUASINILPOTENT_MAX_POWER)
        .collect()
}

/// Runs the schedule over dyadic powers. `member(i, eps, delta)` reports
/// whether the `i`-th dyadic normalized power lies in `O(tau, eps, delta)`.
fn schedule_verdict(
    count: usize,
    schedule: &[(f64, f64)],
    member: impl Fn(usize, f64, f64) -> Result<bool>,
) -> Result<QuasinilpotenceVerdict> {
    let powers = dyadic_powers();
    let mut passing_from = Vec::with_capacity(schedule.len());
    for &(eps, delta) in schedule {
        let mut from = None;
        for i in (0..count).rev() {
            if member(i, eps, delta)? {
                from = Some(powers[i]);
            } else {
                break;
            }
        }
        passing_from.push(from);
    }
    Ok(QuasinilpotenceVerdict {
        quasinilpotent: passing_from.iter().all(Option::is_some),
        method: QuasinilpotenceMethod::Schedule,
        passing_from,
    })
}

fn analytic() -> QuasinilpotenceVerdict {
    QuasinilpotenceVerdict {
        quasinilpotent: true,
        method: QuasinilpotenceMethod::Analytic,
        passing_from: Vec::new(),
    }
}

/// Whether `|N^k|^{1/k} -> 0` in the measure topology.
///
/// Pointwise nilpotent sequences are decided analytically. Otherwise the
/// verdict is a finite approximation: for each `(eps, delta)` in the
/// schedule some tail of the dyadic powers up to
/// [`QUASINILPOTENT_MAX_POWER`] must pass [`m_membership`].
pub fn is_m_quasinilpotent(a: &MatrixSequence, tau: &TraceState, schedule: &[(f64, f64)]) -> Result<QuasinilpotenceVerdict> {
    check_schedule(schedule)?;
    if a.stored().all(|(_, m)| is_nilpotent(m)) {
        return Ok(analytic());
    }
    let powers = dyadic_powers();
    let per_index = try_map_indexed(&a.values, |m| normalized_power_schedule(m, &powers))?;
    let hs: Vec<MatrixSequence> = (0..powers.len())
        .map(|i| MatrixSequence::from_values(a.n, per_index.map(|v| v[i].clone()), "H"))
        .collect();
    schedule_verdict(powers.len(), schedule, |i, e, d| Ok(m_membership(&hs[i], tau, e, d)?.member))
}

/// As [`is_m_quasinilpotent`] over the evaluated range of a generated
/// sequence; indices past the horizon are not inspected.
pub fn is_m_quasinilpotent_generated(
    a: &GeneratedSequence,
    tau: &TraceState,
    schedule: &[(f64, f64)],
) -> Result<QuasinilpotenceVerdict> {
    check_schedule(schedule)?;
    let mats = a.evaluate()?;
    if mats.iter().all(is_nilpotent) {
        return Ok(analytic());
    }
    let powers = dyadic_powers();
    let per_index: Vec<Vec<CMatrix>> = mats
        .par_iter()
        .enumerate()
        .map(|(i, m)| normalized_power_schedule(m, &powers).map_err(|e| Error::at_index(i + 1, e)))
        .collect::<Result<_>>()?;
    let weights: Vec<f64> = (1..=a.horizon).map(|k| tau.weight(k)).collect();
    let unseen = tau.tail_mass(a.horizon);
    schedule_verdict(powers.len(), schedule, |i, e, d| {
        let hs: Vec<CMatrix> = per_index.iter().map(|v| v[i].clone()).collect();
        Ok(scan_windows(&hs, &weights, unseen, e)?.excluded <= d)
    })
}

pub type Generator = Arc<dyn Fn(usize) -> CMatrix + Send + Sync>;

/// Sequence given by a pure generator, probed on `1..=horizon`.
#[derive(Clone)]
pub struct GeneratedSequence {
    n: usize,
    generator: Generator,
    horizon: usize,
    label: String,
}

impl fmt::Debug for GeneratedSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratedSequence")
            .field("n", &self.n)
            .field("horizon", &self.horizon)
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

impl GeneratedSequence {
    pub fn new(
        n: usize,
        horizon: usize,
        label: impl Into<String>,
        generator: impl Fn(usize) -> CMatrix + Send + Sync + 'static,
    ) -> Result<Self> {
        if n == 0 || horizon == 0 {
            return Err(Error::domain("n and horizon must be positive"));
        }
        Ok(GeneratedSequence {
            n,
            generator: Arc::new(generator),
            horizon,
            label: label.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::domain("horizon must be positive"));
        }
        Ok(GeneratedSequence { horizon, ..self.clone() })
    }

    /// `A_k` for any `k >= 1`, checked for shape and finiteness.
    pub fn get(&self, k: usize) -> Result<CMatrix> {
        if k == 0 {
            return Err(Error::domain("sequences are indexed from 1"));
        }
        let m = (self.generator)(k);
        check_matrix(&m, self.n).map_err(|e| Error::at_index(k, e))?;
        Ok(m)
    }

    /// `A_1, ..., A_horizon`.
    pub fn evaluate(&self) -> Result<Vec<CMatrix>> {
        (1..=self.horizon).into_par_iter().map(|k| self.get(k)).collect()
    }

    pub fn norms(&self) -> Result<Vec<f64>> {
        Ok(self.evaluate()?.iter().map(|m| m.op_norm(NORM_TOL)).collect())
    }

    /// `max_{k <= horizon} ||A_k||`.
    pub fn sup_norm_to_horizon(&self) -> Result<f64> {
        Ok(self.norms()?.into_iter().fold(0.0, f64::max))
    }

    /// Values up to the horizon come from `cache`; later ones are computed
    /// on demand by `f` and panic if `f` fails.
    fn derived(&self, label: String, cache: Vec<CMatrix>, f: impl Fn(&CMatrix) -> Result<CMatrix> + Send + Sync + 'static) -> Self {
        let source = self.clone();
        let cache = Arc::new(cache);
        GeneratedSequence {
            n: self.n,
            horizon: self.horizon,
            label: label.clone(),
            generator: Arc::new(move |k| {
                if let Some(m) = k.checked_sub(1).and_then(|i| cache.get(i)) {
                    return m.clone();
                }
                source
                    .get(k)
                    .and_then(|a| f(&a))
                    .unwrap_or_else(|e| panic!("{label}: evaluation failed at index {k}: {e}"))
            }),
        }
    }
}

/// `{k <= horizon : ||A_k|| < t}` for each threshold.
pub fn level_sets(a: &GeneratedSequence, thresholds: &[f64]) -> Result<Vec<BTreeSet<usize>>> {
    check_thresholds(thresholds)?;
    let norms = a.norms()?;
    Ok(thresholds
        .iter()
        .map(|&t| (1..=a.horizon).filter(|&k| norms[k - 1] < t).collect())
        .collect())
}

#[derive(Clone, Debug)]
pub struct SequenceJc<S> {
    pub d: S,
    pub n: S,
    /// Worst case over the evaluated indices.
    pub certificate: JcCertificate,
}

/// Jordan-Chevalley decomposition at every index.
pub fn pointwise_jc(a: &MatrixSequence, ctol: f64) -> Result<SequenceJc<MatrixSequence>> {
    let parts = try_map_indexed(&a.values, |m| jc_numeric(m, ctol).map(|j| JcPoint(j.d, j.n, j.certificate)))?;
    let certificate = parts
        .prefix()
        .iter()
        .chain(parts.tail())
        .fold(JcCertificate::perfect(), |acc, p| acc.worst(p.2));
    Ok(SequenceJc {
        d: MatrixSequence::from_values(a.n, parts.map(|p| p.0.clone()), format!("D({})", a.label)),
        n: MatrixSequence::from_values(a.n, parts.map(|p| p.1.clone()), format!("N({})", a.label)),
        certificate,
    })
}

#[derive(Clone, Debug)]
struct JcPoint(CMatrix, CMatrix, JcCertificate);

impl PartialEq for JcPoint {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0 && self.1 == other.1
    }
}

/// Decomposes every index up to the horizon eagerly; later indices are
/// decomposed on demand (and panic if the decomposition fails there).
pub fn pointwise_jc_generated(a: &GeneratedSequence, ctol: f64) -> Result<SequenceJc<GeneratedSequence>> {
    let parts: Vec<_> = a
        .evaluate()?
        .par_iter()
        .enumerate()
        .map(|(i, m)| jc_numeric(m, ctol).map_err(|e| Error::at_index(i + 1, e)))
        .collect::<Result<_>>()?;
    let certificate = parts.iter().fold(JcCertificate::perfect(), |acc, j| acc.worst(j.certificate));
    let ds = parts.iter().map(|j| j.d.clone()).collect();
    let ns = parts.into_iter().map(|j| j.n).collect();
    Ok(SequenceJc {
        d: a.derived(format!("D({})", a.label), ds, move |m| Ok(jc_numeric(m, ctol)?.d)),
        n: a.derived(format!("N({})", a.label), ns, move |m| Ok(jc_numeric(m, ctol)?.n)),
        certificate,
    })
}

/// `k -> A(1/(k+2))` embedded in `n x n`: bounded by `2/3`, while its
/// diagonalizable and nilpotent parts grow like `k`.
pub fn unbounded_jc_witness(n: usize, horizon: usize) -> Result<GeneratedSequence> {
    if n < 3 {
        return Err(Error::domain("family requires n >= 3"));
    }
    GeneratedSequence::new(n, horizon, "unbounded JC witness", move |k| {
        family_a(1.0 / (k as f64 + 2.0), n).expect("delta in (0, 1/3] and n >= 3")
    })
}

#[derive(Clone, Debug)]
pub struct UScalarWitness<S> {
    /// Every checked index is diagonalizable.
    pub is_u_scalar: bool,
    /// `A_k = S_k^{-1} T_k S_k` at diagonalizable indices. `S_k^{-1}` has
    /// unit columns. Failing indices carry the identity.
    pub s: S,
    /// Diagonal `T_k`; zero at failing indices.
    pub t: S,
    pub failures: Vec<usize>,
    pub max_s_norm: f64,
    /// `max_k ||S_k^{-1} T_k S_k - A_k||_F` over passing indices.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
struct Similarity {
    s: CMatrix,
    t: CMatrix,
    ok: bool,
    residual: f64,
}

fn diagonalize(a: &CMatrix, ctol: f64) -> Similarity {
    let n = a.n();
    let failed = || Similarity {
        s: CMatrix::identity(n),
        t: CMatrix::zeros(n, n),
        ok: false,
        residual: 0.0,
    };
    let Ok(j) = jc_numeric(a, ctol) else { return failed() };
    if j.n.frobenius_norm() > DIAGONALIZABLE_TOL * (1.0 + a.frobenius_norm()) {
        return failed();
    }
    let dec = &j.decoupling;
    let mut lambda = vec![C64::new(0.0, 0.0); n];
    for (c, r) in dec.ranges.iter().enumerate() {
        for i in r.clone() {
            lambda[i] = j.cluster_values[c];
        }
    }
    let mut s_inv = dec.basis.clone();
    for c in 0..n {
        let norm = crate::matrix::vec_norm(&s_inv.column(c));
        for r in 0..n {
            *s_inv.at_mut(r, c) /= norm;
        }
    }
    let Ok(s) = s_inv.inverse() else { return failed() };
    let t = CMatrix::diag(&lambda).expect("n >= 1");
    let residual = (&(&(&s_inv * &t) * &s) - a).frobenius_norm();
    Similarity { s, t, ok: true, residual }
}

fn summarize<S>(sims: &[(usize, &Similarity)], build: impl Fn(&dyn Fn(&Similarity) -> CMatrix) -> S) -> UScalarWitness<S> {
    let failures: Vec<usize> = sims.iter().filter(|(_, s)| !s.ok).map(|(k, _)| *k).collect();
    UScalarWitness {
        is_u_scalar: failures.is_empty(),
        s: build(&|x| x.s.clone()),
        t: build(&|x| x.t.clone()),
        failures,
        max_s_norm: sims.iter().filter(|(_, s)| s.ok).map(|(_, s)| s.s.op_norm(NORM_TOL)).fold(0.0, f64::max),
        residual: sims.iter().filter(|(_, s)| s.ok).map(|(_, s)| s.residual).fold(0.0, f64::max),
    }
}

/// Pointwise eigendecomposition `A_k = S_k^{-1} T_k S_k` with `T_k`
/// diagonal. The similarities need not be uniformly bounded.
pub fn u_scalar_witness(a: &MatrixSequence, ctol: f64) -> UScalarWitness<MatrixSequence> {
    let sims = try_map_indexed(&a.values, |m| Ok(diagonalize(m, ctol))).expect("diagonalize is infallible");
    let indexed: Vec<(usize, &Similarity)> = sims.representatives().map(|k| (k, sims.get(k))).collect();
    summarize(&indexed, |f| MatrixSequence::from_values(a.n, sims.map(f), a.label.clone()))
}

/// As [`u_scalar_witness`] over the evaluated range.
pub fn u_scalar_witness_generated(a: &GeneratedSequence, ctol: f64) -> Result<UScalarWitness<GeneratedSequence>> {
    let sims: Vec<Similarity> = a.evaluate()?.par_iter().map(|m| diagonalize(m, ctol)).collect();
    let indexed: Vec<(usize, &Similarity)> = sims.iter().enumerate().map(|(i, s)| (i + 1, s)).collect();
    let s_cache: Vec<CMatrix> = sims.iter().map(|x| x.s.clone()).collect();
    let t_cache: Vec<CMatrix> = sims.iter().map(|x| x.t.clone()).collect();
    let mut w = summarize(&indexed, |_| ());
    let out = UScalarWitness {
        is_u_scalar: w.is_u_scalar,
        s: a.derived(format!("S({})", a.label), s_cache, move |m| Ok(diagonalize(m, ctol).s)),
        t: a.derived(format!("T({})", a.label), t_cache, move |m| Ok(diagonalize(m, ctol).t)),
        failures: std::mem::take(&mut w.failures),
        max_s_norm: w.max_s_norm,
        residual: w.residual,
    };
    Ok(out)
}
