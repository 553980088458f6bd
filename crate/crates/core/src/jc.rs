//! Jordan-Chevalley decomposition `A = D + N`: `D` diagonalizable, `N`
//! nilpotent, `DN = ND`.
//!
//! The numeric path works over C: Schur-factorize, group the eigenvalues
//! into clusters, reorder the Schur form so each cluster is contiguous, and
//! decouple the diagonal blocks with triangular Sylvester solves. The exact
//! path works over Q with a Newton iteration on the squarefree part of the
//! characteristic polynomial and serves as ground truth.

use std::ops::Range;

use serde::Serialize;

use crate::eig::{schur, SchurFactorization, Spectrum, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::matrix::{CMatrix, C64};
use crate::partition::Partition;
use crate::rational::{squarefree_part, RationalMatrix};

/// Relative clustering tolerance.
pub const DEFAULT_CTOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct Clustering {
    /// Partition of eigenvalue positions (1-based).
    pub partition: Partition,
    /// Smallest distance between eigenvalues in different clusters.
    pub cluster_gap: f64,
}

/// Transitive closure of `|l_i - l_j| <= ctol * (1 + max|l|)`.
pub fn cluster_eigenvalues(spec: &Spectrum, ctol: f64) -> Result<Clustering> {
    if !(ctol >= 0.0) {
        return Err(Error::domain("ctol must be nonnegative"));
    }
    let vals = &spec.values;
    let n = vals.len();
    if n == 0 {
        return Err(Error::domain("empty spectrum"));
    }
    let threshold = ctol * (1.0 + spec.max_modulus());
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for j in i + 1..n {
            if (vals[i] - vals[j]).norm() <= threshold {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let mut cluster_gap = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            if roots[i] != roots[j] {
                cluster_gap = cluster_gap.min((vals[i] - vals[j]).norm());
            }
        }
    }
    Ok(Clustering {
        partition: Partition::from_labels(&roots)?,
        cluster_gap,
    })
}

/// Block-diagonalizing similarity `A = B diag(T_1, ..., T_m) B^{-1}` where
/// each `T_c` is the upper-triangular Schur block of one cluster.
#[derive(Clone, Debug)]
pub struct Decoupling {
    pub basis: CMatrix,
    pub basis_inv: CMatrix,
    /// Reordered Schur form; its diagonal blocks are the `T_c`.
    pub t: CMatrix,
    /// Index range of each cluster's block, in partition block order.
    pub ranges: Vec<Range<usize>>,
}

impl Decoupling {
    pub fn projector(&self, c: usize) -> CMatrix {
        let r = &self.ranges[c];
        let n = self.basis.n();
        let left = self.basis.submatrix(0, n, r.start, r.end);
        let right = self.basis_inv.submatrix(r.start, r.end, 0, n);
        &left * &right
    }

    /// `||B|| * ||B^{-1}||` in the Frobenius norm.
    pub fn condition(&self) -> f64 {
        self.basis.frobenius_norm() * self.basis_inv.frobenius_norm()
    }

    /// Largest `||T_c - mean(diag T_c) I||_F`: how far each block is from scalar.
    pub fn block_departure(&self) -> f64 {
        self.ranges
            .iter()
            .map(|r| {
                let blk = self.t.submatrix(r.start, r.end, r.start, r.end);
                let mean = blk.trace() / r.len() as f64;
                (&blk - &CMatrix::identity(r.len()).scale(mean)).frobenius_norm()
            })
            .fold(0.0, f64::max)
    }
}

/// Solves `T11 X - X T22 = C` for upper-triangular `T11`, `T22`.
fn solve_triangular_sylvester(t11: &CMatrix, t22: &CMatrix, c: &CMatrix, floor: f64) -> Result<CMatrix> {
    let p = t11.rows();
    let q = t22.rows();
    let mut x = CMatrix::zeros(p, q);
    let mut min_sep = f64::INFINITY;
    for j in 0..q {
        let mut rhs: Vec<C64> = (0..p).map(|r| c[(r, j)]).collect();
        for i in 0..j {
            let tij = t22[(i, j)];
            for (r, v) in rhs.iter_mut().enumerate() {
                *v += x[(r, i)] * tij;
            }
        }
        let mu = t22[(j, j)];
        for r in (0..p).rev() {
            let mut s = rhs[r];
            for k in r + 1..p {
                s -= t11[(r, k)] * x[(k, j)];
            }
            let denom = t11[(r, r)] - mu;
            min_sep = min_sep.min(denom.norm());
            if denom.norm() <= floor {
                return Err(Error::IllConditionedClusters { gap: min_sep });
            }
            *x.at_mut(r, j) = s / denom;
        }
    }
    if !x.is_finite() {
        return Err(Error::IllConditionedClusters { gap: min_sep });
    }
    Ok(x)
}

/// Reorders the Schur form so that clusters are contiguous and decouples them.
pub fn decouple(schur_f: &SchurFactorization, clusters: &Partition) -> Result<Decoupling> {
    let n = schur_f.t.n();
    if clusters.n() != n {
        return Err(Error::domain("cluster partition size differs from the matrix size"));
    }
    let mut f = schur_f.clone();
    let mut label = clusters.block_of();
    // bubble sort by cluster label through adjacent unitary swaps
    loop {
        let mut swapped = false;
        for k in 0..n.saturating_sub(1) {
            if label[k] > label[k + 1] {
                f.swap_adjacent(k);
                label.swap(k, k + 1);
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
    let mut ranges = Vec::with_capacity(clusters.num_blocks());
    let mut start = 0;
    for b in clusters.blocks() {
        ranges.push(start..start + b.len());
        start += b.len();
    }

    let t = f.t;
    let scale = 1.0 + t.dvec()?.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let floor = 16.0 * f64::EPSILON * scale;
    let mut y = CMatrix::identity(n);
    let mut y_inv = CMatrix::identity(n);
    for r in ranges.iter().take(ranges.len().saturating_sub(1)) {
        let (o, e) = (r.start, r.end);
        let t11 = t.submatrix(o, e, o, e);
        let t22 = t.submatrix(e, n, e, n);
        let t12 = t.submatrix(o, e, e, n);
        let x = solve_triangular_sylvester(&t11, &t22, &-&t12, floor)?;
        // Y <- Y [[I, X], [0, I]] and Y^{-1} <- [[I, -X], [0, I]] Y^{-1}
        let mut step = CMatrix::identity(n);
        step.set_block(o, e, &x);
        let mut step_inv = CMatrix::identity(n);
        step_inv.set_block(o, e, &-&x);
        y = &y * &step;
        y_inv = &step_inv * &y_inv;
    }
    Ok(Decoupling {
        basis: &f.v * &y,
        basis_inv: &y_inv * &f.v.adjoint(),
        t,
        ranges,
    })
}

/// Spectral projectors `P_c` of the clusters, in partition block order.
///
/// `clusters` partitions the positions of `diag(T)` in `schur_f`.
pub fn spectral_projectors(a: &CMatrix, schur_f: &SchurFactorization, clusters: &Partition) -> Result<Vec<CMatrix>> {
    if !a.is_square() || a.n() != schur_f.t.n() {
        return Err(Error::domain("matrix and Schur factorization sizes differ"));
    }
    let dec = decouple(schur_f, clusters)?;
    Ok((0..dec.ranges.len()).map(|c| dec.projector(c)).collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct JcCertificate {
    /// `||DN - ND||_F`
    pub commute_residual: f64,
    /// `||N^n||_F`
    pub nilpotency_residual: f64,
    /// `||D + N - A||_F`
    pub reconstruction_residual: f64,
    pub cluster_gap: f64,
}

impl JcCertificate {
    pub(crate) fn worst(self, other: JcCertificate) -> JcCertificate {
        JcCertificate {
            commute_residual: self.commute_residual.max(other.commute_residual),
            nilpotency_residual: self.nilpotency_residual.max(other.nilpotency_residual),
            reconstruction_residual: self.reconstruction_residual.max(other.reconstruction_residual),
            cluster_gap: self.cluster_gap.min(other.cluster_gap),
        }
    }

    pub(crate) fn perfect() -> JcCertificate {
        JcCertificate {
            cluster_gap: f64::INFINITY,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct JcResult {
    pub d: CMatrix,
    pub n: CMatrix,
    /// Clusters over the Schur diagonal positions.
    pub clusters: Partition,
    /// Eigenvalue representative (cluster mean) per cluster.
    pub cluster_values: Vec<C64>,
    pub certificate: JcCertificate,
    pub decoupling: Decoupling,
}

fn certify(a: &CMatrix, d: &CMatrix, n: &CMatrix) -> JcCertificate {
    let dim = a.n() as u32;
    JcCertificate {
        commute_residual: d.commutator(n).frobenius_norm(),
        nilpotency_residual: n.pow(dim).frobenius_norm(),
        reconstruction_residual: (&(d + n) - a).frobenius_norm(),
        cluster_gap: f64::INFINITY,
    }
}

/// Numeric Jordan-Chevalley decomposition. `D = sum_c mean_c P_c`, `N = A - D`.
pub fn jc_numeric(a: &CMatrix, ctol: f64) -> Result<JcResult> {
    if !a.is_square() {
        return Err(Error::domain("jc needs a square matrix"));
    }
    let sf = schur(a, DEFAULT_TOL)?;
    let spec = Spectrum::new(sf.diagonal());
    let Clustering { partition, cluster_gap } = cluster_eigenvalues(&spec, ctol)?;
    let dec = decouple(&sf, &partition)?;
    let cluster_values: Vec<C64> = partition
        .blocks()
        .iter()
        .map(|b| b.iter().map(|&i| spec.values[i - 1]).sum::<C64>() / b.len() as f64)
        .collect();

    let dim = a.n();
    let mut lambda = vec![C64::new(0.0, 0.0); dim];
    for (c, r) in dec.ranges.iter().enumerate() {
        for i in r.clone() {
            lambda[i] = cluster_values[c];
        }
    }
    let d = &(&dec.basis * &CMatrix::diag(&lambda)?) * &dec.basis_inv;
    let n = a - &d;
    let mut certificate = certify(a, &d, &n);
    certificate.cluster_gap = cluster_gap;
    Ok(JcResult {
        d,
        n,
        clusters: partition,
        cluster_values,
        certificate,
        decoupling: dec,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub reconstruction_residual: f64,
    pub commute_residual: f64,
    pub nilpotency_residual: f64,
    /// Distance from `D` to its own diagonalizable part.
    pub diagonalizability_residual: f64,
    /// Condition number of the eigenvector basis used for `D`.
    pub eigenbasis_condition: f64,
    pub passes: bool,
}

/// Checks the Jordan-Chevalley axioms for a proposed pair `(D, N)`.
///
/// Residuals are scaled by powers of `1 + ||A||`: reconstruction and
/// diagonalizability by one, commutation by two, `N^n` by `n`.
pub fn validate_jc(a: &CMatrix, d: &CMatrix, n: &CMatrix, tol: f64) -> Result<ValidationReport> {
    if !a.is_square() || d.rows() != a.rows() || n.rows() != a.rows() || !d.is_square() || !n.is_square() {
        return Err(Error::domain("validate_jc needs square matrices of equal size"));
    }
    let base = certify(a, d, n);
    let (diag_res, cond) = match jc_numeric(d, DEFAULT_CTOL) {
        Ok(jd) => (jd.n.frobenius_norm(), jd.decoupling.condition()),
        Err(_) => (f64::INFINITY, f64::INFINITY),
    };
    let s = 1.0 + a.op_norm(1e-12);
    let passes = base.reconstruction_residual <= tol * s
        && base.commute_residual <= tol * s * s
        && base.nilpotency_residual <= tol * s.powi(a.n() as i32)
        && diag_res <= tol * s;
    Ok(ValidationReport {
        reconstruction_residual: base.reconstruction_residual,
        commute_residual: base.commute_residual,
        nilpotency_residual: base.nilpotency_residual,
        diagonalizability_residual: diag_res,
        eigenbasis_condition: cond,
        passes,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactJcResult {
    pub d: RationalMatrix,
    pub n: RationalMatrix,
    pub iterations: usize,
}

/// Exact decomposition over Q by Newton's iteration
/// `X <- X - p(X) p'(X)^{-1}`, `X_0 = A`, with `p` the squarefree part of
/// the characteristic polynomial. The limit is reached in at most
/// `ceil(log2 n) + 1` steps.
pub fn jc_exact(a: &RationalMatrix) -> Result<ExactJcResult> {
    let p = squarefree_part(&a.charpoly())?;
    let dp = p.derivative();
    let bound = (a.n() as f64).log2().ceil() as usize + 1;
    let mut x = a.clone();
    let mut iterations = 0;
    loop {
        let px = x.eval_poly(&p);
        if px.is_zero() {
            break;
        }
        if iterations >= bound {
            return Err(Error::Internal(format!(
                "Newton iteration did not terminate within {bound} steps"
            )));
        }
        let dpx_inv = x
            .eval_poly(&dp)
            .rat_inverse()
            .map_err(|_| Error::Internal("p'(X) is singular".into()))?;
        x = x.rat_sub(&px.rat_mul(&dpx_inv)?)?;
        iterations += 1;
    }
    let n = a.rat_sub(&x)?;
    Ok(ExactJcResult { d: x, n, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{c64, elementary};

    fn r(n: usize, v: &[f64]) -> CMatrix {
        CMatrix::from_real(n, v).unwrap()
    }

    fn spec(v: &[f64]) -> Spectrum {
        Spectrum::new(v.iter().map(|&x| c64(x, 0.)).collect())
    }

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
        (a - b).max_abs() <= tol
    }

    fn coupled_example() -> CMatrix {
        r(3, &[1., 1., 1., 0., 1., 1., 0., 0., 2.])
    }

    #[test]
    fn clustering_examples() {
        let c = cluster_eigenvalues(&spec(&[1., 2., 3.]), 1e-8).unwrap();
        assert_eq!(c.partition, Partition::finest(3));
        assert_eq!(c.cluster_gap, 1.0);
        let c = cluster_eigenvalues(&spec(&[0., 0., 5.]), 1e-8).unwrap();
        assert_eq!(c.partition, Partition::new(3, vec![vec![1, 2], vec![3]]).unwrap());
        let c = cluster_eigenvalues(&spec(&[0., 1e-12, 1.]), 1e-8).unwrap();
        assert_eq!(c.partition, Partition::new(3, vec![vec![1, 2], vec![3]]).unwrap());
        assert!((c.cluster_gap - (1.0 - 1e-12)).abs() < 1e-15);
        // transitive chain
        let c = cluster_eigenvalues(&spec(&[0., 0.6e-8, 1.2e-8]), 1e-8).unwrap();
        assert_eq!(c.partition.num_blocks(), 1);
        assert_eq!(c.cluster_gap, f64::INFINITY);
    }

    #[test]
    fn projector_examples() {
        let a = r(2, &[1., 0., 0., 2.]);
        let sf = schur(&a, DEFAULT_TOL).unwrap();
        let ps = spectral_projectors(&a, &sf, &Partition::finest(2)).unwrap();
        assert_eq!(ps[0], elementary(2, 1, 1).unwrap());
        assert_eq!(ps[1], elementary(2, 2, 2).unwrap());

        let i3 = CMatrix::identity(3);
        let sf = schur(&i3, DEFAULT_TOL).unwrap();
        let ps = spectral_projectors(&i3, &sf, &Partition::coarsest(3)).unwrap();
        assert_eq!(ps, vec![i3]);

        let a = coupled_example();
        let sf = schur(&a, DEFAULT_TOL).unwrap();
        let cl = cluster_eigenvalues(&Spectrum::new(sf.diagonal()), 1e-8).unwrap();
        let ps = spectral_projectors(&a, &sf, &cl.partition).unwrap();
        let p2 = r(3, &[0., 0., 2., 0., 0., 1., 0., 0., 1.]);
        assert!(close(&ps[1], &p2, 1e-14));
        assert!(close(&ps[0], &(&CMatrix::identity(3) - &p2), 1e-14));
    }

    #[test]
    fn projectors_after_reordering() {
        // eigenvalue 2 sits between the two copies of 1 on the diagonal
        let a = r(3, &[1., 1., 1., 0., 2., 1., 0., 0., 1.]);
        let sf = schur(&a, DEFAULT_TOL).unwrap();
        let cl = cluster_eigenvalues(&Spectrum::new(sf.diagonal()), 1e-8).unwrap();
        assert_eq!(cl.partition.num_blocks(), 2);
        let ps = spectral_projectors(&a, &sf, &cl.partition).unwrap();
        let sum = &ps[0] + &ps[1];
        assert!(close(&sum, &CMatrix::identity(3), 1e-13));
        for p in &ps {
            assert!(close(&(p * p), p, 1e-13));
            assert!(close(&(&a * p), &(p * &a), 1e-13));
        }
        assert!((&ps[0] * &ps[1]).max_abs() < 1e-13);
    }

    #[test]
    fn jc_numeric_examples() {
        let a = r(3, &[4., 0., 0., 0., -1., 0., 0., 0., 4.]);
        let j = jc_numeric(&a, DEFAULT_CTOL).unwrap();
        assert!(close(&j.d, &a, 1e-15));
        assert!(j.n.max_abs() < 1e-15);

        let lam = 2.5;
        let jb = r(3, &[lam, 1., 0., 0., lam, 1., 0., 0., lam]);
        let j = jc_numeric(&jb, DEFAULT_CTOL).unwrap();
        assert!(close(&j.d, &CMatrix::identity(3).scale_real(lam), 1e-14));
        assert!(close(&j.n, &r(3, &[0., 1., 0., 0., 0., 1., 0., 0., 0.]), 1e-14));

        let j = jc_numeric(&coupled_example(), DEFAULT_CTOL).unwrap();
        assert!(close(&j.d, &r(3, &[1., 0., 2., 0., 1., 1., 0., 0., 2.]), 1e-14));
        assert!(close(&j.n, &r(3, &[0., 1., -1., 0., 0., 0., 0., 0., 0.]), 1e-14));
        assert!(j.certificate.commute_residual < 1e-13);
        assert!(j.certificate.nilpotency_residual < 1e-13);
    }

    #[test]
    fn jc_exact_examples() {
        let a = RationalMatrix::from_i64(2, &[1, 1, 0, 1]).unwrap();
        let j = jc_exact(&a).unwrap();
        assert_eq!(j.d, RationalMatrix::identity(2));
        assert_eq!(j.n, RationalMatrix::from_i64(2, &[0, 1, 0, 0]).unwrap());
        assert_eq!(j.iterations, 1);

        let dg = RationalMatrix::from_i64(3, &[3, 0, 0, 0, -2, 0, 0, 0, 3]).unwrap();
        let j = jc_exact(&dg).unwrap();
        assert_eq!(j.d, dg);
        assert!(j.n.is_zero());

        let a = RationalMatrix::from_i64(3, &[1, 1, 1, 0, 1, 1, 0, 0, 2]).unwrap();
        let j = jc_exact(&a).unwrap();
        assert_eq!(j.d, RationalMatrix::from_i64(3, &[1, 0, 2, 0, 1, 1, 0, 0, 2]).unwrap());
        assert_eq!(j.n, RationalMatrix::from_i64(3, &[0, 1, -1, 0, 0, 0, 0, 0, 0]).unwrap());
        assert_eq!(j.n.rat_mul(&j.n).unwrap(), RationalMatrix::zero(3));
    }

    #[test]
    fn validate_examples() {
        let a = r(3, &[1., 0., 0., 0., 2., 0., 0., 0., 2.]);
        let v = validate_jc(&a, &a, &CMatrix::zeros(3, 3), 1e-12).unwrap();
        assert_eq!(v.reconstruction_residual, 0.0);
        assert_eq!(v.commute_residual, 0.0);
        assert_eq!(v.nilpotency_residual, 0.0);
        assert_eq!(v.diagonalizability_residual, 0.0);
        assert!(v.passes);

        let j2 = elementary(2, 1, 2).unwrap();
        let v = validate_jc(&j2, &CMatrix::zeros(2, 2), &j2, 1e-12).unwrap();
        assert!(v.passes);
        assert_eq!(v.nilpotency_residual, 0.0);

        // a nilpotent D is not diagonalizable
        let v = validate_jc(&j2, &j2, &CMatrix::zeros(2, 2), 1e-12).unwrap();
        assert!(!v.passes);
        assert!(v.diagonalizability_residual > 0.5);

        let a = coupled_example();
        let eps = 1e-3;
        let e12 = elementary(3, 1, 2).unwrap().scale_real(eps);
        let d = &r(3, &[1., 0., 2., 0., 1., 1., 0., 0., 2.]) + &e12;
        let n = &r(3, &[0., 1., -1., 0., 0., 0., 0., 0., 0.]) - &e12;
        let v = validate_jc(&a, &d, &n, 1e-8).unwrap();
        assert!(v.commute_residual > 1e-4);
        assert!(!v.passes);
    }
}
