//! Seeded random matrices for property suites and experiments.
//!
//! Streams are reproducible bit for bit: the generator is ChaCha8 seeded
//! through `SeedableRng::seed_from_u64`, and every sampler draws a fixed
//! number of values per call in a fixed order.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{c64, CMatrix, C64};
use crate::nps::householder_qr;
use crate::rational::{rat, RationalMatrix};

/// Recorded in artifact headers.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng/rand_chacha-0.3/seed_from_u64";

pub type JcRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> JcRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries with real and imaginary parts uniform in `[-1, 1)`.
pub fn random_complex(rng: &mut JcRng, n: usize) -> CMatrix {
    let data = (0..n * n)
        .map(|_| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    CMatrix::from_vec(n, n, data).expect("n*n entries")
}

pub fn random_unitary(rng: &mut JcRng, n: usize) -> CMatrix {
    householder_qr(&random_complex(rng, n)).0
}

pub fn random_hermitian(rng: &mut JcRng, n: usize) -> CMatrix {
    random_complex(rng, n).hermitian_part()
}

/// `U diag(values) U*` with `U` random unitary.
pub fn conjugate_diagonal(rng: &mut JcRng, values: &[C64]) -> CMatrix {
    let u = random_unitary(rng, values.len());
    &(&u * &CMatrix::diag(values).expect("nonempty")) * &u.adjoint()
}

pub fn random_normal(rng: &mut JcRng, n: usize) -> CMatrix {
    let values: Vec<C64> = (0..n)
        .map(|_| c64(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
        .collect();
    conjugate_diagonal(rng, &values)
}

pub fn random_psd(rng: &mut JcRng, n: usize) -> CMatrix {
    let values: Vec<C64> = (0..n).map(|_| c64(rng.gen_range(0.0..2.0), 0.0)).collect();
    conjugate_diagonal(rng, &values)
}

/// Entries `p/q` with `|p| <= max_num`, `1 <= q <= max_den`.
pub fn random_rational(rng: &mut JcRng, n: usize, max_num: i64, max_den: i64) -> RationalMatrix {
    let entries = (0..n * n)
        .map(|_| rat(rng.gen_range(-max_num..=max_num), rng.gen_range(1..=max_den)))
        .collect();
    RationalMatrix::new(n, entries).expect("n*n entries")
}

/// Sampling constraints for [`random_diagonalizable`].
#[derive(Clone, Copy, Debug)]
pub struct DiagonalizableSpec {
    pub min_modulus: f64,
    pub max_modulus: f64,
    /// Minimum distance between eigenvalue moduli.
    pub min_gap: f64,
    /// Bound on `||S||_2 ||S^{-1}||_2` for the eigenbasis `S`.
    pub max_condition: f64,
    /// Size of the random perturbation in `S = I + spread * G`.
    pub spread: f64,
}

impl Default for DiagonalizableSpec {
    fn default() -> Self {
        DiagonalizableSpec {
            min_modulus: 0.2,
            max_modulus: 2.0,
            min_gap: 0.2,
            max_condition: 10.0,
            spread: 0.3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Diagonalizable {
    pub a: CMatrix,
    pub eigenvalues: Vec<C64>,
    pub eigenbasis: CMatrix,
    pub condition: f64,
}

const MAX_REJECTIONS: usize = 10_000;

/// `A = S diag(lambda) S^{-1}` by rejection sampling against `spec`.
pub fn random_diagonalizable(rng: &mut JcRng, n: usize, spec: &DiagonalizableSpec) -> Result<Diagonalizable> {
    if n == 0 {
        return Err(Error::domain("n must be positive"));
    }
    if spec.max_modulus - spec.min_modulus < spec.min_gap * (n as f64 - 1.0) {
        return Err(Error::domain("modulus range cannot hold n separated moduli"));
    }
    let moduli = (0..MAX_REJECTIONS)
        .map(|_| {
            (0..n)
                .map(|_| rng.gen_range(spec.min_modulus..=spec.max_modulus))
                .collect::<Vec<f64>>()
        })
        .find(|m| {
            m.iter()
                .enumerate()
                .all(|(i, x)| m[i + 1..].iter().all(|y| (x - y).abs() >= spec.min_gap))
        })
        .ok_or_else(|| Error::Capacity("no admissible moduli sample".into()))?;
    let eigenvalues: Vec<C64> = moduli
        .iter()
        .map(|&r| C64::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU)))
        .collect();
    for _ in 0..MAX_REJECTIONS {
        let s = &CMatrix::identity(n) + &random_complex(rng, n).scale_real(spec.spread);
        let Ok(s_inv) = s.inverse() else { continue };
        let condition = s.op_norm(1e-12) * s_inv.op_norm(1e-12);
        if condition > spec.max_condition {
            continue;
        }
        let a = &(&s * &CMatrix::diag(&eigenvalues)?) * &s_inv;
        return Ok(Diagonalizable {
            a,
            eigenvalues,
            eigenbasis: s,
            condition,
        });
    }
    Err(Error::Capacity("no eigenbasis within the condition bound".into()))
}

#[cfg(test)]
mod tests {
    use num::Signed;

    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let a = random_complex(&mut seeded_rng(11), 3);
        let b = random_complex(&mut seeded_rng(11), 3);
        assert_eq!(a, b);
        let c = random_complex(&mut seeded_rng(12), 3);
        assert_ne!(a, c);
    }

    #[test]
    fn unitary_is_unitary() {
        let u = random_unitary(&mut seeded_rng(1), 4);
        assert!((&(&u.adjoint() * &u) - &CMatrix::identity(4)).max_abs() < 1e-14);
    }

    #[test]
    fn rational_entries_in_range() {
        let m = random_rational(&mut seeded_rng(3), 4, 5, 4);
        for e in m.entries() {
            assert!(e.numer().abs() <= 5.into());
            assert!(*e.denom() <= 4.into());
        }
    }

    #[test]
    fn diagonalizable_respects_spec() {
        let mut rng = seeded_rng(5);
        let spec = DiagonalizableSpec::default();
        for n in 1..=4 {
            let d = random_diagonalizable(&mut rng, n, &spec).unwrap();
            assert!(d.condition <= 10.0);
            for (i, x) in d.eigenvalues.iter().enumerate() {
                assert!((0.2..=2.0).contains(&x.norm()));
                for y in &d.eigenvalues[i + 1..] {
                    assert!((x.norm() - y.norm()).abs() >= 0.2);
                }
            }
        }
        assert!(random_diagonalizable(&mut rng, 11, &spec).is_err());
    }
}
