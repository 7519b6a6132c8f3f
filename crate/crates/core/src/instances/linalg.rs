//! Exact solution spaces of the normal-form constraint system.
//!
//! Over F2 rows are packed into `u64` words; other prime fields use dense
//! rows of small residues.

use serde::Serialize;

use super::family::{MatchingFamily, Triple, Violation};
use crate::{Error, Result};

/// Basis of `{x : x_u = sum_{v in C} x_v for all u, C in H_u}`.
///
/// The basis is systematic on `info_set`: vector `i` is 1 at `info_set[i]`
/// and 0 at every other information coordinate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SolutionSpace {
    pub field_char: u32,
    pub n: usize,
    pub dimension: usize,
    pub basis: Vec<Vec<u32>>,
    pub info_set: Vec<u32>,
}

impl SolutionSpace {
    /// Codeword taking `values[i]` on `info_set[i]`.
    pub fn codeword_with(&self, values: &[u32]) -> Vec<u32> {
        assert_eq!(values.len(), self.dimension);
        let p = self.field_char as u64;
        let mut x = vec![0u64; self.n];
        for (coef, vec) in values.iter().zip(&self.basis) {
            if *coef == 0 {
                continue;
            }
            for (xi, &bi) in x.iter_mut().zip(vec) {
                *xi = (*xi + *coef as u64 * bi as u64) % p;
            }
        }
        x.into_iter().map(|v| v as u32).collect()
    }

    /// Whether `x` satisfies every constraint of `fam`.
    pub fn satisfies(fam: &MatchingFamily, x: &[u32]) -> bool {
        let p = fam.field_char as u64;
        let sum = |e: &Triple| e.iter().map(|&v| x[v as usize] as u64).sum::<u64>() % p;
        let edges_ok = fam
            .matchings
            .iter()
            .enumerate()
            .all(|(u, h)| h.iter().all(|e| sum(e) == x[u] as u64 % p));
        let negation_ok = fam.has_trivial_negation()
            || (0..fam.n).all(|u| (x[u] as u64 + x[fam.neg(u as u32) as usize] as u64).is_multiple_of(p));
        edges_ok && negation_ok
    }
}

/// Maps an F2 bit to a sign: 0 to `+1`, 1 to `-1`.
#[inline]
pub fn bit_to_sign(bit: u32) -> i8 {
    if bit & 1 == 0 {
        1
    } else {
        -1
    }
}

fn is_prime(p: u32) -> bool {
    p >= 2 && (2..).take_while(|d: &u32| d * d <= p).all(|d| !p.is_multiple_of(d))
}

/// Exact solution space by Gaussian elimination over the family's field.
///
/// Lifted families (nontrivial negation) also carry `x_{ν(u)} = -x_u`.
pub fn solution_space(fam: &MatchingFamily) -> Result<SolutionSpace> {
    if !is_prime(fam.field_char) {
        return Err(Error::invalid(format!("field characteristic {} is not prime", fam.field_char)));
    }
    if fam.field_char == 2 {
        Ok(solve_gf2(fam))
    } else {
        Ok(solve_prime(fam))
    }
}

struct Gf2Echelon {
    words: usize,
    /// `rows[c]` has lowest set bit `c` when present.
    rows: Vec<Option<Vec<u64>>>,
}

impl Gf2Echelon {
    fn new(n: usize) -> Self {
        Gf2Echelon { words: n.div_ceil(64), rows: vec![None; n] }
    }

    fn insert(&mut self, mut row: Vec<u64>) {
        loop {
            let Some(c) = lowest_bit(&row) else { return };
            match &self.rows[c] {
                Some(pivot) => {
                    for (a, b) in row.iter_mut().zip(pivot) {
                        *a ^= b;
                    }
                }
                None => {
                    self.rows[c] = Some(row);
                    return;
                }
            }
        }
    }

    fn reduce(&mut self) {
        let n = self.rows.len();
        for c in (0..n).rev() {
            let Some(mut row) = self.rows[c].take() else { continue };
            for b in c + 1..n {
                if get_bit(&row, b) {
                    if let Some(pivot) = &self.rows[b] {
                        for (a, p) in row.iter_mut().zip(pivot) {
                            *a ^= p;
                        }
                    }
                }
            }
            self.rows[c] = Some(row);
        }
    }
}

#[inline]
fn get_bit(row: &[u64], i: usize) -> bool {
    row[i / 64] >> (i % 64) & 1 == 1
}

#[inline]
fn flip_bit(row: &mut [u64], i: usize) {
    row[i / 64] ^= 1 << (i % 64);
}

fn lowest_bit(row: &[u64]) -> Option<usize> {
    row.iter()
        .enumerate()
        .find(|(_, w)| **w != 0)
        .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
}

fn solve_gf2(fam: &MatchingFamily) -> SolutionSpace {
    let n = fam.n;
    let mut ech = Gf2Echelon::new(n);
    for (u, h) in fam.matchings.iter().enumerate() {
        for e in h {
            let mut row = vec![0u64; ech.words];
            flip_bit(&mut row, u);
            for &v in e {
                flip_bit(&mut row, v as usize);
            }
            ech.insert(row);
        }
    }
    if !fam.has_trivial_negation() {
        for u in 0..n {
            let nu = fam.neg(u as u32) as usize;
            if u < nu {
                let mut row = vec![0u64; ech.words];
                flip_bit(&mut row, u);
                flip_bit(&mut row, nu);
                ech.insert(row);
            }
        }
    }
    ech.reduce();
    let free: Vec<usize> = (0..n).filter(|&c| ech.rows[c].is_none()).collect();
    let basis = free
        .iter()
        .map(|&f| {
            let mut x = vec![0u32; n];
            x[f] = 1;
            for (c, row) in ech.rows.iter().enumerate() {
                if let Some(row) = row {
                    if get_bit(row, f) {
                        x[c] = 1;
                    }
                }
            }
            x
        })
        .collect();
    SolutionSpace {
        field_char: 2,
        n,
        dimension: free.len(),
        basis,
        info_set: free.iter().map(|&f| f as u32).collect(),
    }
}

fn pow_mod(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1u64;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    acc
}

fn solve_prime(fam: &MatchingFamily) -> SolutionSpace {
    let n = fam.n;
    let p = fam.field_char as u64;
    let mut rows: Vec<Vec<u64>> = Vec::new();
    for (u, h) in fam.matchings.iter().enumerate() {
        for e in h {
            let mut row = vec![0u64; n];
            row[u] = 1;
            for &v in e {
                row[v as usize] = (row[v as usize] + p - 1) % p;
            }
            rows.push(row);
        }
    }
    if !fam.has_trivial_negation() {
        for u in 0..n {
            let nu = fam.neg(u as u32) as usize;
            if u <= nu {
                let mut row = vec![0u64; n];
                row[u] += 1;
                row[nu] += 1;
                rows.push(row);
            }
        }
    }
    // Reduced row echelon form.
    let mut pivot_cols = Vec::new();
    let mut rank = 0;
    for col in 0..n {
        let Some(sel) = (rank..rows.len()).find(|&r| !rows[r][col].is_multiple_of(p)) else { continue };
        rows.swap(rank, sel);
        let inv = pow_mod(rows[rank][col], p - 2, p);
        for v in rows[rank].iter_mut() {
            *v = *v * inv % p;
        }
        let pivot = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && row[col] != 0 {
                let f = row[col];
                for (a, b) in row.iter_mut().zip(&pivot) {
                    *a = (*a + p * p - f * b) % p;
                }
            }
        }
        pivot_cols.push(col);
        rank += 1;
    }
    let mut is_pivot = vec![false; n];
    for &c in &pivot_cols {
        is_pivot[c] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
    let basis = free
        .iter()
        .map(|&f| {
            let mut x = vec![0u32; n];
            x[f] = 1;
            for (r, &c) in pivot_cols.iter().enumerate() {
                x[c] = ((p - rows[r][f]) % p) as u32;
            }
            x
        })
        .collect();
    SolutionSpace {
        field_char: fam.field_char,
        n,
        dimension: free.len(),
        basis,
        info_set: free.iter().map(|&f| f as u32).collect(),
    }
}

/// Full normal-form report: structural defects plus unsatisfied constraints.
pub fn validate_normal_form(fam: &MatchingFamily, sol: &SolutionSpace) -> Vec<Violation> {
    let mut out = fam.structural_violations();
    if !out.is_empty() {
        return out;
    }
    let p = fam.field_char as u64;
    for (bi, x) in sol.basis.iter().enumerate() {
        if x.len() != fam.n {
            out.push(Violation::BadEdge {
                u: 0,
                edge: vec![],
                reason: format!("basis vector {bi} has length {}", x.len()),
            });
            continue;
        }
        for (u, h) in fam.matchings.iter().enumerate() {
            for e in h {
                let s: u64 = e.iter().map(|&v| x[v as usize] as u64).sum::<u64>() % p;
                if s != x[u] as u64 % p {
                    out.push(Violation::Unsatisfied { basis: bi, u: u as u32, edge: *e });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::generators::gen_random_matchings;
    use proptest::prelude::*;

    /// Dimension by brute force over all of F2^n.
    fn brute_dimension(fam: &MatchingFamily) -> usize {
        let count = (0u32..1 << fam.n)
            .filter(|mask| {
                let x: Vec<u32> = (0..fam.n).map(|i| mask >> i & 1).collect();
                SolutionSpace::satisfies(fam, &x)
            })
            .count();
        count.trailing_zeros() as usize
    }

    #[test]
    fn single_parity_check() {
        let fam = MatchingFamily::new(4, vec![vec![[1, 2, 3]], vec![], vec![], vec![]]);
        let sol = solution_space(&fam).unwrap();
        assert_eq!(sol.dimension, 3);
        assert!(validate_normal_form(&fam, &sol).is_empty());
    }

    #[test]
    fn empty_family_is_full_space() {
        let sol = solution_space(&MatchingFamily::empty(9)).unwrap();
        assert_eq!(sol.dimension, 9);
    }

    #[test]
    fn systematic_on_info_set() {
        let fam = gen_random_matchings(12, 2, 5).unwrap();
        let sol = solution_space(&fam).unwrap();
        for (i, v) in sol.basis.iter().enumerate() {
            for (j, &c) in sol.info_set.iter().enumerate() {
                assert_eq!(v[c as usize], (i == j) as u32);
            }
            assert!(SolutionSpace::satisfies(&fam, v));
        }
        assert_eq!(sol.dimension, brute_dimension(&fam));
    }

    #[test]
    fn prime_field_matches_enumeration() {
        // x0 = x1 + x2 + x3 over F3 on 4 symbols: 27 solutions.
        let fam = MatchingFamily::new(4, vec![vec![[1, 2, 3]], vec![], vec![], vec![]]).with_field(3, vec![0, 1, 2, 3]);
        let sol = solution_space(&fam).unwrap();
        assert_eq!(sol.dimension, 3);
        for v in &sol.basis {
            assert!(SolutionSpace::satisfies(&fam, v));
        }
        assert!(solution_space(&fam.clone().with_field(4, vec![0, 1, 2, 3])).is_err());
    }

    proptest! {
        #[test]
        fn elimination_matches_brute_force(seed in any::<u64>(), n in 4usize..13, m in 1usize..3) {
            prop_assume!(3 * m < n);
            let fam = gen_random_matchings(n, m, seed).unwrap();
            let sol = solution_space(&fam).unwrap();
            prop_assert_eq!(sol.dimension, brute_dimension(&fam));
        }

        #[test]
        fn adding_edges_never_grows_dimension(seed in any::<u64>()) {
            let fam = gen_random_matchings(14, 3, seed).unwrap();
            let mut partial = fam.clone();
            let full = solution_space(&fam).unwrap().dimension;
            for h in &mut partial.matchings {
                h.truncate(1);
            }
            let part = solution_space(&partial).unwrap().dimension;
            prop_assert!(full <= part);
        }
    }
}
