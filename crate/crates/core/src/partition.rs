//! The poset of partitions of `[n] = {1, ..., n}` under refinement.
//!
//! `p1 <= p2` when `p2` refines `p1`, so the one-block partition is the
//! minimum and the all-singletons partition is the maximum. On a finite
//! poset the Scott-open sets are exactly the upper sets.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::matrix::C64;
use crate::random::JcRng;

/// Largest `n` for which upper sets are enumerated.
pub const MAX_UPPER_SET_N: usize = 9;
/// Largest `n` for which the whole of `P_n` is enumerated.
pub const MAX_SCOTT_N: usize = 7;

/// A partition of `[n]` in canonical form: elements sorted inside each
/// block, blocks sorted by their minimum.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Partition {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("partition of an empty set"));
        }
        let mut seen = vec![false; n + 1];
        let mut blocks = blocks;
        for b in &mut blocks {
            if b.is_empty() {
                return Err(Error::domain("empty block"));
            }
            b.sort_unstable();
            for &x in b.iter() {
                if x == 0 || x > n {
                    return Err(Error::domain(format!("element {x} outside 1..={n}")));
                }
                if seen[x] {
                    return Err(Error::domain(format!("element {x} appears twice")));
                }
                seen[x] = true;
            }
        }
        if seen[1..].iter().any(|s| !s) {
            return Err(Error::domain("blocks do not cover [n]"));
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Ok(Partition { n, blocks })
    }

    /// From per-element labels: elements `i` and `j` share a block iff
    /// `labels[i-1] == labels[j-1]`.
    pub fn from_labels<T: PartialEq>(labels: &[T]) -> Result<Self> {
        let n = labels.len();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut reps: Vec<usize> = Vec::new();
        for (i, l) in labels.iter().enumerate() {
            match reps.iter().position(|&r| labels[r] == *l) {
                Some(b) => blocks[b].push(i + 1),
                None => {
                    reps.push(i);
                    blocks.push(vec![i + 1]);
                }
            }
        }
        Self::new(n, blocks)
    }

    /// `{{1}, {2}, ..., {n}}`, the maximum.
    pub fn finest(n: usize) -> Self {
        Partition {
            n,
            blocks: (1..=n).map(|i| vec![i]).collect(),
        }
    }

    /// `{[n]}`, the minimum.
    pub fn coarsest(n: usize) -> Self {
        Partition {
            n,
            blocks: vec![(1..=n).collect()],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Block index of each element (0-based positions).
    pub fn block_of(&self) -> Vec<usize> {
        let mut out = vec![0; self.n];
        for (b, block) in self.blocks.iter().enumerate() {
            for &x in block {
                out[x - 1] = b;
            }
        }
        out
    }

    /// `self <= other`: every block of `other` sits inside a block of `self`.
    pub fn leq(&self, other: &Partition) -> Result<bool> {
        if self.n != other.n {
            return Err(Error::domain(format!("partition sizes differ: {} vs {}", self.n, other.n)));
        }
        let owner = self.block_of();
        Ok(other
            .blocks
            .iter()
            .all(|b| b.iter().all(|&x| owner[x - 1] == owner[b[0] - 1])))
    }

    /// Relabels element `i` as `perm[i-1]` (a permutation of `1..=n`).
    pub fn relabel(&self, perm: &[usize]) -> Result<Partition> {
        if perm.len() != self.n {
            return Err(Error::domain("permutation length mismatch"));
        }
        Partition::new(
            self.n,
            self.blocks.iter().map(|b| b.iter().map(|&x| perm[x - 1]).collect()).collect(),
        )
    }
}

impl fmt::Debug for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, b) in self.blocks.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{{")?;
            for (i, x) in b.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{x}")?;
            }
            write!(f, "}}")?;
        }
        write!(f, "}}")
    }
}

impl Serialize for Partition {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.blocks.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let blocks = Vec::<Vec<usize>>::deserialize(d)?;
        let n = blocks.iter().map(Vec::len).sum();
        Partition::new(n, blocks).map_err(serde::de::Error::custom)
    }
}

/// Groups coordinate indices with exactly equal values.
pub fn partition_of_vector(v: &[C64]) -> Result<Partition> {
    if v.is_empty() {
        return Err(Error::domain("partition of an empty vector"));
    }
    Partition::from_labels(v)
}

/// Minimum `|v_i - v_j|` over pairs with `v_i != v_j`; `+inf` when all
/// coordinates coincide.
pub fn epsilon(v: &[C64]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            if v[i] != v[j] {
                best = best.min((v[i] - v[j]).norm());
            }
        }
    }
    best
}

/// All set partitions of `elements` (sorted), via restricted growth strings.
fn partitions_of(elements: &[usize]) -> Vec<Vec<Vec<usize>>> {
    let m = elements.len();
    let mut out = Vec::new();
    let mut rgs = vec![0usize; m];
    fn rec(pos: usize, max: usize, rgs: &mut Vec<usize>, elements: &[usize], out: &mut Vec<Vec<Vec<usize>>>) {
        if pos == rgs.len() {
            let k = rgs.iter().copied().max().map_or(0, |x| x + 1);
            let mut blocks = vec![Vec::new(); k];
            for (i, &b) in rgs.iter().enumerate() {
                blocks[b].push(elements[i]);
            }
            out.push(blocks);
            return;
        }
        let limit = if pos == 0 { 0 } else { max + 1 };
        for b in 0..=limit {
            rgs[pos] = b;
            rec(pos + 1, max.max(b), rgs, elements, out);
        }
    }
    if m > 0 {
        rec(0, 0, &mut rgs, elements, &mut out);
    }
    out
}

/// Every partition of `[n]`; there are Bell(n) of them.
pub fn all_partitions(n: usize) -> Result<Vec<Partition>> {
    if n == 0 || n > MAX_UPPER_SET_N {
        return Err(Error::Capacity(format!("enumerating P_{n} (limit {MAX_UPPER_SET_N})")));
    }
    let elements: Vec<usize> = (1..=n).collect();
    partitions_of(&elements)
        .into_iter()
        .map(|blocks| Partition::new(n, blocks))
        .collect()
}

/// `p↑`: all refinements of `p`, including `p`. Each block is split
/// independently and the splittings are combined.
pub fn principal_upper_set(p: &Partition) -> Result<BTreeSet<Partition>> {
    if p.n > MAX_UPPER_SET_N {
        return Err(Error::Capacity(format!(
            "principal upper set for n = {} (limit {MAX_UPPER_SET_N})",
            p.n
        )));
    }
    let mut acc: Vec<Vec<Vec<usize>>> = vec![Vec::new()];
    for block in &p.blocks {
        let splits = partitions_of(block);
        let mut next = Vec::with_capacity(acc.len() * splits.len());
        for prefix in &acc {
            for split in &splits {
                let mut blocks = prefix.clone();
                blocks.extend(split.iter().cloned());
                next.push(blocks);
            }
        }
        acc = next;
    }
    acc.into_iter().map(|blocks| Partition::new(p.n, blocks)).collect()
}

/// Whether `set` is an upper set of `P_n`.
pub fn is_upper_set(set: &BTreeSet<Partition>, n: usize) -> Result<bool> {
    if set.iter().any(|p| p.n != n) {
        return Err(Error::domain("partition of the wrong size in set"));
    }
    for p in set {
        for q in principal_upper_set(p)? {
            if !set.contains(&q) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Scott-openness in the finite poset `P_n`, i.e. being an upper set.
pub fn is_scott_open(set: &BTreeSet<Partition>, n: usize) -> Result<bool> {
    if n == 0 || n > MAX_SCOTT_N {
        return Err(Error::Capacity(format!("Scott topology on P_{n} (limit {MAX_SCOTT_N})")));
    }
    is_upper_set(set, n)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ContinuityReport {
    pub n: usize,
    pub trials: usize,
    pub violations: usize,
}

/// Samples `v` with repeated coordinates and `w` with
/// `||w - v||_inf < epsilon(v) / 2`, and counts the trials where `P(w)`
/// fails to refine `P(v)`.
pub fn continuity_trials(n: usize, trials: usize, rng: &mut JcRng) -> Result<ContinuityReport> {
    if n == 0 {
        return Err(Error::domain("n must be positive"));
    }
    let pool_size = n.div_ceil(2) + 1;
    let mut violations = 0;
    for _ in 0..trials {
        let pool: Vec<C64> = (0..pool_size)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let v: Vec<C64> = (0..n).map(|_| pool[rng.gen_range(0..pool_size)]).collect();
        let eps = epsilon(&v);
        let radius = if eps.is_finite() { eps / 2.0 } else { 1.0 };
        let w: Vec<C64> = v
            .iter()
            .map(|&x| {
                let keep = rng.gen_bool(0.25);
                let r = radius * rng.gen_range(0.0..1.0);
                let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                if keep {
                    x
                } else {
                    x + C64::from_polar(r, theta)
                }
            })
            .collect();
        let within = v.iter().zip(&w).all(|(a, b)| (a - b).norm() < radius);
        if within && !partition_of_vector(&v)?.leq(&partition_of_vector(&w)?)? {
            violations += 1;
        }
    }
    Ok(ContinuityReport { n, trials, violations })
}

/// Counts failures of reflexivity, antisymmetry and transitivity of the
/// refinement order over all of `P_n`.
pub fn poset_axiom_violations(n: usize) -> Result<usize> {
    if n > MAX_SCOTT_N {
        return Err(Error::Capacity(format!("poset axioms on P_{n} (limit {MAX_SCOTT_N})")));
    }
    let all = all_partitions(n)?;
    let m = all.len();
    let mut le = vec![false; m * m];
    for (i, a) in all.iter().enumerate() {
        for (j, b) in all.iter().enumerate() {
            le[i * m + j] = a.leq(b)?;
        }
    }
    let mut bad = 0;
    for i in 0..m {
        bad += usize::from(!le[i * m + i]);
        for j in 0..m {
            if i != j && le[i * m + j] && le[j * m + i] {
                bad += 1;
            }
            if le[i * m + j] {
                bad += (0..m).filter(|&k| le[j * m + k] && !le[i * m + k]).count();
            }
        }
    }
    Ok(bad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::c64;

    fn p(n: usize, blocks: &[&[usize]]) -> Partition {
        Partition::new(n, blocks.iter().map(|b| b.to_vec()).collect()).unwrap()
    }

    fn reals(v: &[f64]) -> Vec<C64> {
        v.iter().map(|&x| c64(x, 0.)).collect()
    }

    #[test]
    fn canonical_form() {
        let a = p(3, &[&[3], &[2, 1]]);
        assert_eq!(a.blocks(), &[vec![1, 2], vec![3]]);
        assert_eq!(format!("{a:?}"), "{{1,2},{3}}");
        assert!(Partition::new(3, vec![vec![1, 2]]).is_err());
        assert!(Partition::new(2, vec![vec![1, 2], vec![2]]).is_err());
        assert!(Partition::new(2, vec![vec![1, 3]]).is_err());
    }

    #[test]
    fn leq_examples() {
        assert!(Partition::coarsest(3).leq(&Partition::finest(3)).unwrap());
        let a = p(3, &[&[1, 2], &[3]]);
        let b = p(3, &[&[1, 3], &[2]]);
        assert!(!a.leq(&b).unwrap());
        assert!(!b.leq(&a).unwrap());
        assert!(a.leq(&a).unwrap());
        assert!(a.leq(&Partition::finest(2)).is_err());
    }

    #[test]
    fn partition_of_vector_examples() {
        assert_eq!(partition_of_vector(&reals(&[1., 1., 2.])).unwrap(), p(3, &[&[1, 2], &[3]]));
        assert_eq!(partition_of_vector(&reals(&[5.])).unwrap(), p(1, &[&[1]]));
        assert_eq!(
            partition_of_vector(&reals(&[0., 1., 0., 1.])).unwrap(),
            p(4, &[&[1, 3], &[2, 4]])
        );
        assert!(partition_of_vector(&[]).is_err());
    }

    #[test]
    fn epsilon_examples() {
        assert_eq!(epsilon(&reals(&[0., 1., 3.])), 1.0);
        assert_eq!(epsilon(&reals(&[7., 7.])), f64::INFINITY);
        assert_eq!(epsilon(&reals(&[0., 1e-9, 1.])), 1e-9);
    }

    #[test]
    fn upper_set_examples() {
        let top = Partition::finest(2);
        assert_eq!(principal_upper_set(&top).unwrap().into_iter().collect::<Vec<_>>(), vec![top.clone()]);
        let bottom = Partition::coarsest(2);
        let up = principal_upper_set(&bottom).unwrap();
        assert_eq!(up.len(), 2);
        assert!(up.contains(&bottom) && up.contains(&top));
        assert_eq!(principal_upper_set(&Partition::coarsest(3)).unwrap().len(), 5);
        assert!(principal_upper_set(&Partition::coarsest(10)).is_err());
    }

    #[test]
    fn bell_numbers() {
        let bell = [1, 2, 5, 15, 52, 203, 877];
        for (n, &b) in (1..=7).zip(&bell) {
            assert_eq!(all_partitions(n).unwrap().len(), b);
            assert_eq!(principal_upper_set(&Partition::coarsest(n)).unwrap().len(), b);
        }
    }

    #[test]
    fn scott_open_examples() {
        let whole: BTreeSet<_> = all_partitions(3).unwrap().into_iter().collect();
        assert!(is_scott_open(&whole, 3).unwrap());
        let only_min: BTreeSet<_> = [Partition::coarsest(2)].into_iter().collect();
        assert!(!is_scott_open(&only_min, 2).unwrap());
        for q in all_partitions(4).unwrap() {
            assert!(is_scott_open(&principal_upper_set(&q).unwrap(), 4).unwrap());
        }
        assert!(is_scott_open(&BTreeSet::new(), 8).is_err());
    }

    #[test]
    fn json_form() {
        let a = p(3, &[&[3], &[1, 2]]);
        assert_eq!(serde_json::to_string(&a).unwrap(), "[[1,2],[3]]");
        let b: Partition = serde_json::from_str("[[2],[1,3]]").unwrap();
        assert_eq!(b, p(3, &[&[1, 3], &[2]]));
        assert!(serde_json::from_str::<Partition>("[[1],[1]]").is_err());
    }

    #[test]
    fn relabel_permutes_blocks() {
        let a = p(3, &[&[1, 2], &[3]]);
        assert_eq!(a.relabel(&[3, 1, 2]).unwrap(), p(3, &[&[1, 3], &[2]]));
    }

    #[test]
    fn continuity_and_axioms() {
        let mut rng = crate::random::seeded_rng(7);
        let r = continuity_trials(4, 500, &mut rng).unwrap();
        assert_eq!(r.violations, 0);
        for n in 1..=4 {
            assert_eq!(poset_axiom_violations(n).unwrap(), 0);
        }
    }
}
