use proptest::prelude::*;

use jclab::eig::{schur, DEFAULT_TOL};
use jclab::jc::{jc_exact, jc_numeric, DEFAULT_CTOL};
use jclab::matrix::elementary;
use jclab::nps::normalized_power;
use jclab::partition::{epsilon, partition_of_vector, principal_upper_set, is_scott_open, Partition};
use jclab::random::{random_complex, random_psd, random_rational, random_unitary, seeded_rng};
use jclab::rational::RationalMatrix;
use jclab::seq::{
    m_membership, pointwise_normalized_power, restrict, CentralProjection, MatrixSequence, TraceState,
};
use jclab::{c64, CMatrix, C64};

fn matrix(max_n: usize) -> impl Strategy<Value = CMatrix> {
    (1..=max_n, any::<u64>()).prop_map(|(n, seed)| random_complex(&mut seeded_rng(seed), n))
}

fn rational(max_n: usize) -> impl Strategy<Value = RationalMatrix> {
    (1..=max_n, any::<u64>()).prop_map(|(n, seed)| random_rational(&mut seeded_rng(seed), n, 5, 4))
}

/// Vectors drawn from a small pool so that coordinates repeat.
fn pooled_vector() -> impl Strategy<Value = Vec<C64>> {
    (1usize..=6, prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3))
        .prop_flat_map(|(n, pool)| prop::collection::vec(0..pool.len(), n).prop_map(move |ix| ix.iter().map(|&i| c64(pool[i].0, pool[i].1)).collect()))
}

fn sequence(n: usize, seed: u64) -> MatrixSequence {
    let mut rng = seeded_rng(seed);
    let prefix = (0..3).map(|_| random_complex(&mut rng, n)).collect();
    let tail = (0..2).map(|_| random_complex(&mut rng, n)).collect();
    MatrixSequence::periodic(prefix, tail, "A").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schur_is_a_unitary_triangularization(a in matrix(6)) {
        let f = schur(&a, DEFAULT_TOL).unwrap();
        let s = 1.0 + a.frobenius_norm();
        prop_assert!(f.residuals.unitarity < 1e-12);
        prop_assert!(f.residuals.reconstruction < 1e-12 * s);
        prop_assert!(f.t.strictly_lower_norm() == 0.0);
    }

    #[test]
    fn numeric_jc_certificate(a in matrix(5)) {
        let j = jc_numeric(&a, DEFAULT_CTOL).unwrap();
        let s = 1.0 + a.op_norm(1e-12);
        let c = j.certificate;
        prop_assert!(c.reconstruction_residual <= 1e-12 * s);
        prop_assert!(c.commute_residual <= 1e-8 * s * s, "{c:?}");
        prop_assert!(c.nilpotency_residual <= 1e-8 * s.powi(a.n() as i32));
    }

    #[test]
    fn exact_jc_axioms(a in rational(4)) {
        let j = jc_exact(&a).unwrap();
        prop_assert_eq!(j.d.rat_add(&j.n).unwrap(), a.clone());
        prop_assert_eq!(j.d.rat_mul(&j.n).unwrap(), j.n.rat_mul(&j.d).unwrap());
        prop_assert!(j.n.pow(a.n() as u32).is_zero());
        // D is annihilated by the squarefree part of the characteristic polynomial
        let p = jclab::rational::squarefree_part(&a.charpoly()).unwrap();
        prop_assert!(j.d.eval_poly(&p).is_zero());
    }

    #[test]
    fn cayley_hamilton(a in rational(5)) {
        prop_assert!(a.eval_poly(&a.charpoly()).is_zero());
    }

    #[test]
    fn partition_continuity(v in pooled_vector(), seed in any::<u64>()) {
        let eps = epsilon(&v);
        let radius = if eps.is_finite() { eps / 2.0 } else { 1.0 };
        let mut rng = seeded_rng(seed);
        let w: Vec<C64> = v.iter().map(|&x| {
            let jitter = random_complex(&mut rng, 1)[(0, 0)];
            x + jitter * (0.49 * radius)
        }).collect();
        let pv = partition_of_vector(&v).unwrap();
        let pw = partition_of_vector(&w).unwrap();
        prop_assert!(pv.leq(&pw).unwrap());
        prop_assert!(principal_upper_set(&pv).unwrap().contains(&pw));
    }

    #[test]
    fn partition_is_permutation_equivariant(v in pooled_vector(), seed in any::<u64>()) {
        let n = v.len();
        let mut perm: Vec<usize> = (1..=n).collect();
        let mut rng = seeded_rng(seed);
        use rand::seq::SliceRandom;
        perm.shuffle(&mut rng);
        // coordinate i of v moves to position perm[i]
        let mut moved = vec![c64(0.0, 0.0); n];
        for (i, &x) in v.iter().enumerate() {
            moved[perm[i] - 1] = x;
        }
        let p = partition_of_vector(&v).unwrap();
        prop_assert_eq!(partition_of_vector(&moved).unwrap(), p.relabel(&perm).unwrap());
    }

    #[test]
    fn principal_upper_sets_are_open(v in pooled_vector()) {
        let p = partition_of_vector(&v).unwrap();
        prop_assert!(is_scott_open(&principal_upper_set(&p).unwrap(), v.len()).unwrap());
    }

    #[test]
    fn normalized_powers_are_psd(a in matrix(4), k in 1usize..64) {
        let h = normalized_power(&a, k).unwrap();
        prop_assert!(h.is_hermitian(1e-12));
        let (vals, _) = jclab::eig::hermitian_eigen(&h, DEFAULT_TOL).unwrap();
        prop_assert!(vals[0] >= -1e-9);
    }

    #[test]
    fn normalized_power_is_unitarily_equivariant(a in matrix(4), seed in any::<u64>(), k in prop::sample::select(vec![1usize, 2, 8, 32, 256])) {
        let u = random_unitary(&mut seeded_rng(seed), a.n());
        let conj = &(&u * &a) * &u.adjoint();
        let lhs = normalized_power(&conj, k).unwrap();
        let rhs = &(&u * &normalized_power(&a, k).unwrap()) * &u.adjoint();
        prop_assert!((&lhs - &rhs).max_abs() < 1e-9);
    }

    #[test]
    fn op_norm_bounds(a in matrix(5), seed in any::<u64>()) {
        let norm = a.op_norm(1e-14);
        prop_assert!(norm <= a.frobenius_norm() * (1.0 + 1e-12));
        let v = random_complex(&mut seeded_rng(seed), a.n()).column(0);
        let vn: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let av: f64 = a.mul_vec(&v).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(av <= norm * vn * (1.0 + 1e-6));
    }

    #[test]
    fn restriction_commutes_with_normalized_powers(seed in any::<u64>(), n in 1usize..=3, m in prop::sample::select(vec![1usize, 2, 4, 8]), idx in prop::collection::btree_set(1usize..8, 0..5)) {
        let a = sequence(n, seed);
        let e = CentralProjection::finite(idx).unwrap();
        let lhs = restrict(&pointwise_normalized_power(&a, m).unwrap(), &e);
        let rhs = pointwise_normalized_power(&restrict(&a, &e), m).unwrap();
        for k in 1..=10 {
            prop_assert!((lhs.get(k) - rhs.get(k)).max_abs() < 1e-9);
        }
    }

    #[test]
    fn membership_is_monotone(seed in any::<u64>(), eps in 0.1f64..2.0, delta in 0.01f64..0.5) {
        let a = sequence(2, seed);
        let tau = TraceState::default();
        let m = m_membership(&a, &tau, eps, delta).unwrap();
        if m.member {
            let bigger = m_membership(&a, &tau, eps * 1.5, delta * 1.5).unwrap();
            prop_assert!(bigger.member);
            prop_assert!(bigger.excluded_mass <= m.excluded_mass);
        }
    }

    #[test]
    fn psd_sequences_restrict_to_psd(seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let a = MatrixSequence::new(vec![random_psd(&mut rng, 3)], random_psd(&mut rng, 3), "P").unwrap();
        let r = restrict(&a, &CentralProjection::odds());
        for k in 1..=4 {
            let (vals, _) = jclab::eig::hermitian_eigen(r.get(k), DEFAULT_TOL).unwrap();
            prop_assert!(vals[0] >= -1e-12);
        }
    }
}

#[test]
fn elementary_products_exhaustive() {
    for n in 1..=4 {
        for i in 1..=n {
            for j in 1..=n {
                for k in 1..=n {
                    for l in 1..=n {
                        let prod = &elementary(n, i, j).unwrap() * &elementary(n, k, l).unwrap();
                        let want = if j == k { elementary(n, i, l).unwrap() } else { CMatrix::zeros(n, n) };
                        assert_eq!(prod, want);
                    }
                }
            }
        }
    }
}

#[test]
fn partition_order_axioms_exhaustive() {
    for n in 1..=5 {
        assert_eq!(jclab::partition::poset_axiom_violations(n).unwrap(), 0);
    }
    let min = Partition::coarsest(4);
    let max = Partition::finest(4);
    assert!(min.leq(&max).unwrap());
}
