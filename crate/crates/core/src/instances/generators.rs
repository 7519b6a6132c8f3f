//! Seeded generators for normal-form matching families.

use rand::seq::SliceRandom;
use rand::Rng;

use super::family::{MatchingFamily, Triple};
use super::linalg::{solution_space, SolutionSpace};
use crate::seed;
use crate::{Error, Result};

/// Uniformly random disjoint triples: for each `u`, shuffle `[n] \ {u}` and
/// cut the first `3m` entries into `m` consecutive triples.
pub fn gen_random_matchings(n: usize, m: usize, seed_value: u64) -> Result<MatchingFamily> {
    if n == 0 || 3 * m > n - 1 {
        return Err(Error::invalid(format!("3m = {} exceeds n - 1 = {}", 3 * m, n.saturating_sub(1))));
    }
    let mut rng = seed::rng(seed_value, "random-matchings");
    let mut matchings = Vec::with_capacity(n);
    for u in 0..n as u32 {
        let mut pool: Vec<u32> = (0..n as u32).filter(|&v| v != u).collect();
        pool.shuffle(&mut rng);
        let h: Vec<Triple> = pool[..3 * m].chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
        matchings.push(h);
    }
    Ok(MatchingFamily::new(n, matchings))
}

/// Random family in which the pair `{0, 1}` sits in one hyperedge of each
/// of the first `heavy` matchings other than `H_0`, `H_1`.
pub fn gen_heavy_pair(n: usize, m: usize, heavy: usize, seed_value: u64) -> Result<MatchingFamily> {
    if m == 0 || n < 4 || 3 * m > n - 1 || heavy > n - 2 {
        return Err(Error::invalid(format!("heavy-pair family needs 1 <= m, 3m < n, heavy <= n - 2 (n={n}, m={m}, heavy={heavy})")));
    }
    let mut fam = gen_random_matchings(n, m, seed_value)?;
    let mut rng = seed::rng(seed_value, "heavy-pair");
    for u in 2..2 + heavy as u32 {
        let mut pool: Vec<u32> = (2..n as u32).filter(|&v| v != u).collect();
        pool.shuffle(&mut rng);
        let mut h = vec![[0, 1, pool[0]]];
        h.extend(pool[1..1 + 3 * (m - 1)].chunks(3).map(|c| [c[0], c[1], c[2]]));
        fam.matchings[u as usize] = h;
    }
    fam.canonicalize();
    Ok(fam)
}

/// Largest matching size kept per vertex by [`gen_flat_lcc`] above six
/// dimensions; the exhaustive packing is used below that.
pub const FLAT_CAP: usize = 8;

/// Dimension up to which [`gen_flat_lcc`] confirms its basis by elimination.
pub const FLAT_CHECK_DIM: u32 = 10;

/// Affine 2-flat corrections over `F2^mdim`: `H_u` is a greedy packing of
/// triples `{u+a, u+b, u+a+b}` whose direction planes meet only at 0.
///
/// Returns the family and the affine functions as a basis, systematic on
/// the vertices `0, e_1, ..., e_mdim`.
pub fn gen_flat_lcc(mdim: u32) -> Result<(MatchingFamily, SolutionSpace)> {
    if !(2..=16).contains(&mdim) {
        return Err(Error::invalid(format!("flat dimension {mdim} outside 2..=16")));
    }
    let n = 1usize << mdim;
    for attempt in 0u64.. {
        let fam = flat_family(mdim, attempt);
        if mdim <= FLAT_CHECK_DIM && solution_space(&fam)?.dimension != mdim as usize + 1 {
            continue;
        }
        return Ok((fam, affine_basis(mdim, n)));
    }
    unreachable!()
}

fn flat_family(mdim: u32, attempt: u64) -> MatchingFamily {
    let n = 1usize << mdim;
    let nonzero = n as u32 - 1;
    // Direction planes {a, b, a^b}, each listed once.
    let all_planes: Option<Vec<Triple>> = (mdim <= 6).then(|| {
        let mut out = Vec::new();
        for a in 1..=nonzero {
            for b in a + 1..=nonzero {
                let c = a ^ b;
                if c > b {
                    out.push([a, b, c]);
                }
            }
        }
        out
    });
    let cap = if mdim <= 6 { usize::MAX } else { FLAT_CAP };
    let mut matchings = Vec::with_capacity(n);
    for u in 0..n as u32 {
        let mut rng = seed::rng(attempt, &format!("flat/{mdim}/{u}"));
        let mut used = vec![false; n];
        let mut h = Vec::new();
        let mut take = |plane: Triple, h: &mut Vec<Triple>| {
            if plane.iter().all(|&d| !used[d as usize]) {
                for &d in &plane {
                    used[d as usize] = true;
                }
                h.push([u ^ plane[0], u ^ plane[1], u ^ plane[2]]);
            }
        };
        match &all_planes {
            Some(planes) => {
                let mut order = planes.clone();
                order.shuffle(&mut rng);
                for plane in order {
                    take(plane, &mut h);
                }
            }
            None => {
                let mut tries = 0;
                while h.len() < cap && tries < 64 * cap {
                    tries += 1;
                    let a = rng.gen_range(1..=nonzero);
                    let b = rng.gen_range(1..=nonzero);
                    if a != b {
                        take([a, b, a ^ b], &mut h);
                    }
                }
            }
        }
        matchings.push(h);
    }
    MatchingFamily::new(n, matchings)
}

fn affine_basis(mdim: u32, n: usize) -> SolutionSpace {
    // 1 + sum_i x_i, then the coordinate functions.
    let mut basis = vec![(0..n).map(|x| (1 + (x as u32).count_ones()) & 1).collect::<Vec<u32>>()];
    for i in 0..mdim {
        basis.push((0..n).map(|x| (x as u32 >> i) & 1).collect());
    }
    let mut info_set = vec![0u32];
    info_set.extend((0..mdim).map(|i| 1u32 << i));
    SolutionSpace { field_char: 2, n, dimension: mdim as usize + 1, basis, info_set }
}

/// Column vector in `F2^kdim` attached to each vertex of the planted family.
/// The first `kdim` vertices carry the unit vectors.
pub fn planted_columns(kdim: u32) -> Vec<u32> {
    let mut cols: Vec<u32> = (0..kdim).map(|i| 1 << i).collect();
    cols.extend((1u32..1 << kdim).filter(|c| !c.is_power_of_two()));
    cols
}

/// Hadamard-style planted code on `2^kdim - 1` vertices: vertex `v` reads
/// `<b, col_v>`, and `H_u` greedily packs disjoint triples whose columns sum
/// to `col_u`, at most `cap` of them.
///
/// Odd-size constraints also admit the all-ones word, so the solution space
/// is the Hadamard code plus constants, of dimension `kdim + 1`.
pub fn gen_planted(kdim: u32, cap: usize, seed_value: u64) -> Result<MatchingFamily> {
    if !(2..=10).contains(&kdim) {
        return Err(Error::invalid(format!("planted dimension {kdim} outside 2..=10")));
    }
    let cols = planted_columns(kdim);
    let n = cols.len();
    let mut index = vec![u32::MAX; 1 << kdim];
    for (v, &c) in cols.iter().enumerate() {
        index[c as usize] = v as u32;
    }
    let mut rng = seed::rng(seed_value, "planted");
    let mut matchings = Vec::with_capacity(n);
    for u in 0..n as u32 {
        let target = cols[u as usize];
        let mut cands = Vec::new();
        for a in 0..n as u32 {
            for b in a + 1..n as u32 {
                let want = target ^ cols[a as usize] ^ cols[b as usize];
                if want == 0 || a == u || b == u {
                    continue;
                }
                let c = index[want as usize];
                if c > b && c != u {
                    cands.push([a, b, c]);
                }
            }
        }
        cands.shuffle(&mut rng);
        let mut used = vec![false; n];
        let mut h = Vec::new();
        for e in cands {
            if h.len() >= cap {
                break;
            }
            if e.iter().all(|&v| !used[v as usize]) {
                for &v in &e {
                    used[v as usize] = true;
                }
                h.push(e);
            }
        }
        matchings.push(h);
    }
    Ok(MatchingFamily::new(n, matchings))
}
