//! Exact enumerators for the walk-tree counting bounds.

use itertools::Itertools;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::index::{Index, WalkTreeGeom};

/// Enumeration ceiling for the exact sums.
pub const MAX_ENUM: u128 = 10_000_000;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CountError {
    #[error("enumeration of {0} terms exceeds the limit of {MAX_ENUM}")]
    TooLarge(u128),
    #[error("invalid parameters: {0}")]
    Params(String),
}

fn binom(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

fn pow2(e: i64) -> BigRational {
    let two = BigRational::from_integer(BigInt::from(2));
    if e >= 0 {
        num_traits::pow(two, e as usize)
    } else {
        num_traits::pow(two, (-e) as usize).recip()
    }
}

/// All τ-bounded `t`-dimensional indices with their root paths as bitsets.
struct PathTable {
    words: usize,
    masks: Vec<Vec<u64>>,
}

impl PathTable {
    fn new(t: usize, tau: u32) -> Self {
        let geom = WalkTreeGeom::single(t);
        let side = tau as usize + 1;
        let total = side.pow(t as u32);
        let pos = |ix: &Index| -> usize { ix.coords().iter().rev().fold(0, |acc, &c| acc * side + c as usize) };
        let words = total.div_ceil(64);
        let masks = (0..total)
            .map(|mut code| {
                let coords: Vec<u32> = (0..t)
                    .map(|_| {
                        let c = (code % side) as u32;
                        code /= side;
                        c
                    })
                    .collect();
                let mut mask = vec![0u64; words];
                for p in geom.path(&Index::new(&coords)) {
                    let b = pos(&p);
                    mask[b / 64] |= 1 << (b % 64);
                }
                mask
            })
            .collect();
        PathTable { words, masks }
    }

    fn len(&self) -> usize {
        self.masks.len()
    }

    fn union_size(&self, members: &[usize], scratch: &mut [u64]) -> usize {
        scratch.fill(0);
        for &i in members {
            for (s, m) in scratch.iter_mut().zip(&self.masks[i]) {
                *s |= m;
            }
        }
        scratch.iter().map(|w| w.count_ones() as usize).sum()
    }
}

/// `Σ_k counts[k]·2^{1−k}`.
fn weigh(counts: &[u64]) -> BigRational {
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(k, &c)| BigRational::from_integer(BigInt::from(c)) * pow2(1 - k as i64))
        .fold(BigRational::zero(), |a, b| a + b)
}

fn check(t: usize, c: usize) -> Result<(), CountError> {
    if t == 0 || t >= super::index::MAX_DIM || c == 0 {
        return Err(CountError::Params(format!(
            "need t in [1, 15] and c ≥ 1, got t={t}, c={c}"
        )));
    }
    Ok(())
}

fn side_count(t: usize, tau: u32) -> u128 {
    (u128::from(tau) + 1).saturating_pow(t as u32)
}

/// `f(c,t) = Σ_{S, |S|=c} 2^{1−|P(S)|}` over `c`-subsets of τ-bounded indices.
pub fn enum_f(c: usize, t: usize, tau: u32) -> Result<BigRational, CountError> {
    check(t, c)?;
    let total = side_count(t, tau);
    let terms = binom(total, c as u128);
    if total > MAX_ENUM || terms > MAX_ENUM {
        return Err(CountError::TooLarge(terms.max(total)));
    }
    let table = PathTable::new(t, tau);
    let mut scratch = vec![0u64; table.words];
    let mut counts = vec![0u64; table.len() + 1];
    for set in (0..table.len()).combinations(c) {
        counts[table.union_size(&set, &mut scratch)] += 1;
    }
    Ok(weigh(&counts))
}

/// Corollary sums: over all ordered `c`-tuples (repetition allowed), and over
/// nondecreasing tuples containing a repeated index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorollarySums {
    pub all_tuples: BigRational,
    pub nondistinct_tuples: BigRational,
}

impl CorollarySums {
    /// `c!·2^{c(t+1)}`.
    pub fn all_bound(c: usize, t: usize) -> BigRational {
        let fact: BigInt = (1..=c).map(BigInt::from).product();
        BigRational::from_integer(fact) * pow2((c * (t + 1)) as i64)
    }

    /// `2^{(c−1)(t+1)}`.
    pub fn nondistinct_bound(c: usize, t: usize) -> BigRational {
        pow2(((c - 1) * (t + 1)) as i64)
    }

    pub fn within_bounds(&self, c: usize, t: usize) -> bool {
        self.all_tuples <= Self::all_bound(c, t) && self.nondistinct_tuples <= Self::nondistinct_bound(c, t)
    }
}

pub fn enum_corollaries(c: usize, t: usize, tau: u32) -> Result<CorollarySums, CountError> {
    check(t, c)?;
    let total = side_count(t, tau);
    let terms = total.saturating_pow(c as u32);
    if total > MAX_ENUM || terms > MAX_ENUM {
        return Err(CountError::TooLarge(terms));
    }
    let table = PathTable::new(t, tau);
    let mut scratch = vec![0u64; table.words];
    let mut all = vec![0u64; table.len() + 1];
    let mut nondistinct = vec![0u64; table.len() + 1];
    for tuple in (0..c).map(|_| 0..table.len()).multi_cartesian_product() {
        let k = table.union_size(&tuple, &mut scratch);
        all[k] += 1;
        // Positions are ordered like indices, so this picks nondecreasing tuples.
        if tuple.windows(2).all(|w| w[0] <= w[1]) && tuple.windows(2).any(|w| w[0] == w[1]) {
            nondistinct[k] += 1;
        }
    }
    Ok(CorollarySums {
        all_tuples: weigh(&all),
        nondistinct_tuples: weigh(&nondistinct),
    })
}

/// `Σ_{k=0}^{K} 2^{−k}·C(k, r)`.
pub fn geom_identity_check(r: u32, k_max: u32) -> BigRational {
    let mut sum = BigRational::zero();
    let mut binom = BigInt::one();
    let mut scale = BigRational::one();
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    for k in 0..=k_max {
        if k >= r {
            if k > r {
                // C(k, r) = C(k−1, r)·k/(k−r)
                binom = binom * BigInt::from(k) / BigInt::from(k - r);
            }
            sum += BigRational::from_integer(binom.clone()) * &scale;
        }
        scale *= &half;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    /// Direct `P(S)` evaluation through the geometry helper.
    fn f_direct(c: usize, t: usize, tau: u32) -> BigRational {
        let geom = WalkTreeGeom::single(t);
        let all: Vec<Index> = (0..t)
            .map(|_| 0..=tau)
            .multi_cartesian_product()
            .map(|v| Index::new(&v))
            .collect();
        all.iter()
            .combinations(c)
            .map(|s| pow2(1 - geom.path_set(s).len() as i64))
            .fold(BigRational::zero(), |a, b| a + b)
    }

    #[test]
    fn base_case_closed_form() {
        assert_eq!(enum_f(1, 1, 2).unwrap(), q(7, 4));
        assert_eq!(enum_f(1, 1, 0).unwrap(), q(1, 1));
        for t in 1..=3 {
            for tau in 0..=3u32 {
                let base = BigRational::from_integer(BigInt::from(2)) - pow2(-(tau as i64));
                assert_eq!(enum_f(1, t, tau).unwrap(), num_traits::pow(base, t));
            }
        }
    }

    #[test]
    fn matches_direct_path_sets() {
        for (c, t, tau) in [(2, 2, 2), (3, 1, 3), (2, 3, 1)] {
            assert_eq!(enum_f(c, t, tau).unwrap(), f_direct(c, t, tau));
        }
        assert!(enum_f(2, 2, 3).unwrap() <= q(16, 1));
    }

    #[test]
    fn corollaries_small() {
        let s = enum_corollaries(1, 2, 2).unwrap();
        assert_eq!(s.all_tuples, enum_f(1, 2, 2).unwrap());
        assert!(s.nondistinct_tuples.is_zero());
        let s = enum_corollaries(2, 1, 2).unwrap();
        assert!(s.all_tuples < CorollarySums::all_bound(2, 1));
        assert!(s.nondistinct_tuples < CorollarySums::nondistinct_bound(2, 1));
        assert!(enum_corollaries(3, 2, 2).unwrap().within_bounds(3, 2));
    }

    #[test]
    fn too_large_is_rejected() {
        assert!(matches!(enum_f(4, 4, 9), Err(CountError::TooLarge(_))));
        assert!(matches!(enum_f(0, 1, 1), Err(CountError::Params(_))));
    }

    #[test]
    fn geometric_identity() {
        assert_eq!(geom_identity_check(0, 10), q(2, 1) - pow2(-10));
        assert_eq!(geom_identity_check(0, 0), q(1, 1));
        let gap = q(2, 1) - geom_identity_check(3, 60);
        assert!(gap > BigRational::zero() && gap < pow2(-40));
        // r = 1: Σ k 2^{-k} up to K = 3 is 1/2 + 2/4 + 3/8
        assert_eq!(geom_identity_check(1, 3), q(11, 8));
    }

    #[test]
    fn monotone_in_tau() {
        for c in 1..=2 {
            for t in 1..=2 {
                let v: Vec<_> = (0..=3).map(|tau| enum_f(c, t, tau).unwrap()).collect();
                assert!(v.windows(2).all(|w| w[0] <= w[1]));
            }
        }
    }
}
