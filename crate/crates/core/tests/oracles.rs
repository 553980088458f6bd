//! Checks against independently computed reference values.

use jclab::eig::{eigenvalues, hermitian_eigen, DEFAULT_TOL};
use jclab::jc::{jc_exact, jc_numeric, DEFAULT_CTOL};
use jclab::nps::{nps_limit, normalized_power};
use jclab::random::{random_rational, random_unitary, seeded_rng};
use jclab::unbounded::{closed_form_jc_with_exponent, family_a_with_exponent, SWEEP_CTOL};
use jclab::{c64, CMatrix, C64};

fn sorted_h_eigs(h: &CMatrix) -> Vec<f64> {
    hermitian_eigen(h, DEFAULT_TOL).unwrap().0
}

/// `((A^k)^* A^k)^{1/(2k)}` straight from the definition. Only accurate
/// while `A^k` is well conditioned.
fn direct_normalized_power(a: &CMatrix, k: u32) -> CMatrix {
    let p = a.pow(k);
    let (vals, vecs) = hermitian_eigen(&(&p.adjoint() * &p), DEFAULT_TOL).unwrap();
    let n = a.n();
    let mut out = CMatrix::zeros(n, n);
    for (j, t) in vals.iter().enumerate() {
        let s = t.max(0.0).powf(1.0 / (2.0 * k as f64));
        for r in 0..n {
            for c in 0..n {
                let z = out[(r, c)] + vecs[(r, j)] * vecs[(c, j)].conj() * s;
                out.set(r, c, z).unwrap();
            }
        }
    }
    out
}

#[test]
fn normalized_power_matches_direct_definition() {
    let mut rng = seeded_rng(41);
    for n in 1..=4 {
        for _ in 0..5 {
            let u = random_unitary(&mut rng, n);
            let w = random_unitary(&mut rng, n);
            let s: Vec<C64> = (0..n).map(|i| c64(0.7 + 0.6 * i as f64 / n as f64, 0.0)).collect();
            let a = &(&u * &CMatrix::diag(&s).unwrap()) * &w.adjoint();
            for k in [1u32, 2, 3, 5, 8] {
                let got = normalized_power(&a, k as usize).unwrap();
                let want = direct_normalized_power(&a, k);
                assert!((&got - &want).max_abs() < 1e-10, "n={n} k={k}");
            }
        }
    }
}

/// Singular values of `[[1, k], [0, 1]]` are `(k + sqrt(k^2 + 4)) / 2` and
/// its reciprocal.
#[test]
fn jordan_block_closed_form_at_high_power() {
    let a = CMatrix::from_real(2, &[1., 1., 0., 1.]).unwrap();
    for k in [16usize, 256, 1024] {
        let kf = k as f64;
        let top = ((kf + (kf * kf + 4.0).sqrt()) / 2.0).ln() / kf;
        let want = [(-top).exp(), top.exp()];
        let got = sorted_h_eigs(&normalized_power(&a, k).unwrap());
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-12 * w, "k={k}: {got:?} vs {want:?}");
        }
    }
}

/// For `[[a, b], [0, c]]` with `|a| > |c|`, the singular values of `A^k`
/// are `|a|^k sqrt(1 + |b/(a-c)|^2)` and `|ac|^k` divided by that, up to a
/// relative error of order `|c/a|^k`.
#[test]
fn graded_triangle_closed_form_at_high_power() {
    let cases = [
        (c64(1.5, 0.0), c64(1.0, 0.5), c64(0.2, 0.0)),
        (c64(0.0, 1.9), c64(-3.0, 0.0), c64(0.3, -0.3)),
        (c64(1.0, 0.0), c64(0.5, 0.0), c64(0.01, 0.0)),
    ];
    for (a, b, c) in cases {
        let m = CMatrix::from_rows(&[vec![a, b], vec![c64(0.0, 0.0), c]]).unwrap();
        let k = 1024.0;
        let coupling = 0.5 * (1.0 + (b / (a - c)).norm_sqr()).ln();
        let log_big = k * a.norm().ln() + coupling;
        let log_small = k * c.norm().ln() - coupling;
        let want = [(log_small / k).exp(), (log_big / k).exp()];
        let got = sorted_h_eigs(&normalized_power(&m, 1024).unwrap());
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-12 * w, "{got:?} vs {want:?}");
        }
    }
}

#[test]
fn nps_limit_tracks_moduli_of_a_triangular_matrix() {
    let a = CMatrix::from_rows(&[
        vec![c64(0.0, 1.2), c64(1.0, 0.0), c64(2.0, 1.0)],
        vec![c64(0.0, 0.0), c64(-0.5, 0.0), c64(1.0, -1.0)],
        vec![c64(0.0, 0.0), c64(0.0, 0.0), c64(0.25, 0.1)],
    ])
    .unwrap();
    let t = nps_limit(&a, 1e-2, 1024).unwrap();
    let mut want: Vec<f64> = (0..3).map(|i| a[(i, i)].norm()).collect();
    want.sort_by(f64::total_cmp);
    for (g, w) in sorted_h_eigs(&t.limit_estimate).iter().zip(want) {
        assert!((g - w).abs() < 1e-2);
    }
}

#[test]
fn numeric_jc_agrees_with_exact_jc() {
    let mut rng = seeded_rng(2024);
    let mut flagged = 0;
    for i in 0..40 {
        let n = 2 + i % 3;
        let a = random_rational(&mut rng, n, 5, 4);
        let exact = jc_exact(&a).unwrap();
        let ac = a.to_complex();
        let num = jc_numeric(&ac, DEFAULT_CTOL).unwrap();
        let err = (&num.d - &exact.d.to_complex()).frobenius_norm();
        if err > 1e-7 * (1.0 + ac.op_norm(1e-12)) {
            assert!(num.certificate.cluster_gap < 1e-6, "unflagged disagreement at case {i}");
            flagged += 1;
        }
    }
    assert!(flagged <= 1);
}

#[test]
fn family_matches_closed_form_for_several_exponents() {
    for (p, deltas) in [(2.5, vec![0.1, 0.01, 0.001]), (3.0, vec![0.1, 0.01, 0.001]), (4.0, vec![0.3, 0.1, 0.01])] {
        for delta in deltas {
            for n in [3, 5] {
                let a = family_a_with_exponent(delta, n, p).unwrap();
                let j = jc_numeric(&a, SWEEP_CTOL).unwrap();
                let (d, nil) = closed_form_jc_with_exponent(delta, n, p).unwrap();
                let scale = d.max_abs();
                assert!((&j.d - &d).max_abs() <= 1e-8 * scale, "p={p} delta={delta}");
                assert!((&j.n - &nil).max_abs() <= 1e-8 * scale);
            }
        }
    }
}

#[test]
fn eigenvalues_of_conjugated_diagonal() {
    let mut rng = seeded_rng(3);
    for n in 1..=6 {
        let lam: Vec<C64> = (0..n).map(|i| c64(i as f64 - 2.0, 0.5 * i as f64)).collect();
        let u = random_unitary(&mut rng, n);
        let a = &(&u * &CMatrix::diag(&lam).unwrap()) * &u.adjoint();
        let got = eigenvalues(&a, DEFAULT_TOL).unwrap();
        // lam is already in lexicographic order
        for (g, w) in got.values.iter().zip(&lam) {
            assert!((g - w).norm() < 1e-12);
        }
    }
}
