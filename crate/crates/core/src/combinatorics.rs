//! Binomial coefficients, colexicographic subset ranking, and mixed-radix
//! ranking of tuples of equal-size subsets.
//!
//! Subsets of `[n]` with `n <= 128` are stored as `u128` bit masks.

use num_bigint::BigUint;
use rand::seq::index::sample;
use rand::Rng;

use crate::{Error, Result};

/// Largest ground-set size representable by a `u128` mask.
pub const MAX_GROUND: usize = 128;

/// Exact binomial coefficient, `None` on `u128` overflow.
pub fn binom(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) is always an integer at each step.
        let num = (n - i) as u128;
        let g = gcd(acc, (i + 1) as u128);
        let a = acc / g;
        let den = (i + 1) as u128 / g;
        let num = num / den;
        acc = a.checked_mul(num)?;
    }
    Some(acc)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Exact binomial coefficient as a big integer.
pub fn binom_big(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let k = k.min(n - k);
    let mut acc = BigUint::from(1u32);
    for i in 0..k {
        acc *= BigUint::from(n - i);
        acc /= BigUint::from(i + 1);
    }
    acc
}

/// Natural log of a binomial coefficient.
pub fn ln_binom(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// Pascal table `table[n][k]` for `n <= max_n`.
#[derive(Clone, Debug)]
pub struct BinomTable {
    table: Vec<Vec<u128>>,
}

impl BinomTable {
    pub fn new(max_n: usize) -> Self {
        let mut table = vec![vec![0u128; max_n + 2]; max_n + 1];
        for n in 0..=max_n {
            table[n][0] = 1;
            for k in 1..=n {
                table[n][k] = table[n - 1][k - 1].saturating_add(if k < n {
                    table[n - 1][k]
                } else {
                    0
                });
            }
        }
        BinomTable { table }
    }

    #[inline]
    pub fn get(&self, n: usize, k: usize) -> u128 {
        if k > n || n >= self.table.len() {
            if n >= self.table.len() {
                return binom(n as u64, k as u64).unwrap_or(u128::MAX);
            }
            return 0;
        }
        self.table[n][k]
    }
}

/// Colexicographic rank of a subset mask: sum of `C(a_i, i+1)` over its
/// sorted elements.
pub fn colex_rank(mask: u128, table: &BinomTable) -> u128 {
    let mut rank = 0u128;
    let mut m = mask;
    let mut i = 0usize;
    while m != 0 {
        let a = m.trailing_zeros() as usize;
        rank += table.get(a, i + 1);
        m &= m - 1;
        i += 1;
    }
    rank
}

/// Inverse of [`colex_rank`] for subsets of size `k`.
pub fn colex_unrank(mut rank: u128, k: usize, table: &BinomTable) -> u128 {
    let mut mask = 0u128;
    let mut upper = MAX_GROUND;
    for i in (1..=k).rev() {
        // Largest a < upper with C(a, i) <= rank.
        let mut lo = i - 1;
        let mut hi = upper - 1;
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            if table.get(mid, i) <= rank {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        mask |= 1u128 << lo;
        rank -= table.get(lo, i);
        upper = lo;
    }
    mask
}

/// Next subset of the same size in colexicographic order (Gosper's hack),
/// or `None` once the ground set of size `n` is exhausted.
pub fn next_subset(mask: u128, n: usize) -> Option<u128> {
    if mask == 0 {
        return None;
    }
    let c = mask & mask.wrapping_neg();
    let r = mask.checked_add(c)?;
    let next = (((r ^ mask) >> 2) / c) | r;
    if n < 128 && next >> n != 0 {
        None
    } else {
        Some(next)
    }
}

/// All `k`-subsets of `[n]` in colexicographic order.
pub fn subsets(n: usize, k: usize) -> SubsetIter {
    let first = if k == 0 {
        Some(0)
    } else if k > n {
        None
    } else if k == 128 {
        Some(u128::MAX)
    } else {
        Some((1u128 << k) - 1)
    };
    SubsetIter {
        n,
        k,
        current: first,
    }
}

pub struct SubsetIter {
    n: usize,
    k: usize,
    current: Option<u128>,
}

impl Iterator for SubsetIter {
    type Item = u128;
    fn next(&mut self) -> Option<u128> {
        let cur = self.current?;
        self.current = if self.k == 0 {
            None
        } else {
            next_subset(cur, self.n)
        };
        Some(cur)
    }
}

/// All `k`-subsets of the vertices in `pool` (a mask), as masks.
pub fn subsets_of(pool: u128, k: usize) -> Vec<u128> {
    let elems: Vec<u32> = mask_elems(pool);
    let mut out = Vec::new();
    for local in subsets(elems.len(), k) {
        let mut m = 0u128;
        let mut l = local;
        while l != 0 {
            let b = l.trailing_zeros() as usize;
            m |= 1u128 << elems[b];
            l &= l - 1;
        }
        out.push(m);
    }
    out
}

/// Sorted elements of a mask.
pub fn mask_elems(mask: u128) -> Vec<u32> {
    let mut out = Vec::with_capacity(mask.count_ones() as usize);
    let mut m = mask;
    while m != 0 {
        out.push(m.trailing_zeros());
        m &= m - 1;
    }
    out
}

/// Mask of a vertex list.
pub fn mask_of(elems: &[u32]) -> u128 {
    elems.iter().fold(0u128, |m, &v| m | (1u128 << v))
}

/// Uniformly random `k`-subset of `[n]`.
pub fn random_subset<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> u128 {
    sample(rng, n, k)
        .into_iter()
        .fold(0u128, |m, v| m | (1u128 << v))
}

/// Mixed-radix ranking of tuples of `arity` subsets, each of size `ell`
/// drawn from `[n]`. Position 0 is the most significant digit.
#[derive(Clone, Debug)]
pub struct TupleIndexer {
    pub n: usize,
    pub ell: usize,
    pub arity: usize,
    /// `C(n, ell)`.
    pub base: u128,
    /// Total number of tuples, `base^arity`.
    pub total: u128,
    table: BinomTable,
}

impl TupleIndexer {
    pub fn new(n: usize, ell: usize, arity: usize) -> Result<Self> {
        if n > MAX_GROUND {
            return Err(Error::invalid(format!(
                "ground set of size {n} exceeds the {MAX_GROUND}-element mask limit"
            )));
        }
        if ell > n {
            return Err(Error::invalid(format!("level {ell} exceeds n = {n}")));
        }
        let base = binom(n as u64, ell as u64)
            .ok_or_else(|| Error::budget("indexing", "C(n, ell)", format!("C({n},{ell})"), "u128"))?;
        let mut total: u128 = 1;
        for _ in 0..arity {
            total = total.checked_mul(base).ok_or_else(|| {
                Error::budget(
                    "indexing",
                    "N",
                    format!("C({n},{ell})^{arity}"),
                    "u128 range",
                )
            })?;
        }
        Ok(TupleIndexer {
            n,
            ell,
            arity,
            base,
            total,
            table: BinomTable::new(n.max(1)),
        })
    }

    #[inline]
    pub fn rank_set(&self, mask: u128) -> u128 {
        colex_rank(mask, &self.table)
    }

    #[inline]
    pub fn unrank_set(&self, rank: u128) -> u128 {
        colex_unrank(rank, self.ell, &self.table)
    }

    pub fn rank(&self, sets: &[u128]) -> u128 {
        debug_assert_eq!(sets.len(), self.arity);
        sets.iter()
            .fold(0u128, |acc, &s| acc * self.base + self.rank_set(s))
    }

    pub fn unrank(&self, mut rank: u128) -> Vec<u128> {
        let mut out = vec![0u128; self.arity];
        for pos in (0..self.arity).rev() {
            out[pos] = self.unrank_set(rank % self.base);
            rank /= self.base;
        }
        out
    }

    /// Weight of position `pos` in the mixed-radix rank.
    pub fn place_value(&self, pos: usize) -> u128 {
        let mut v = 1u128;
        for _ in pos + 1..self.arity {
            v *= self.base;
        }
        v
    }

    pub fn random_tuple<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u128> {
        (0..self.arity)
            .map(|_| random_subset(rng, self.n, self.ell))
            .collect()
    }

    pub fn table(&self) -> &BinomTable {
        &self.table
    }
}
