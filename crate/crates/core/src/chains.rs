//! Chain hypergraphs: compositions of `t` correction constraints through
//! shared pivots, with exact counting and positional containment queries.
//!
//! A `t`-chain `(u, C_1, w_1, ..., C_t, w_t)` is stored flat as
//! `[u, C_1[0], C_1[1], w_1, ...]` with stride `1 + 3t`. Chain sets are kept
//! sorted lexicographically on this encoding.

use std::fmt;
use std::sync::OnceLock;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::instances::MatchingFamily;
use crate::{Error, Result};

/// Default ceiling on enumerated chains.
pub const DEFAULT_MAX_CHAINS: u64 = 20_000_000;

/// Owned chain, mostly for tests and display.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Chain {
    pub head: u32,
    pub links: Vec<([u32; 2], u32)>,
}

impl Chain {
    pub fn from_encoding(enc: &[u32]) -> Self {
        let links = enc[1..].chunks(3).map(|c| ([c[0], c[1]], c[2])).collect();
        Chain { head: enc[0], links }
    }

    pub fn encode(&self) -> Vec<u32> {
        let mut out = vec![self.head];
        for (c, w) in &self.links {
            out.extend([c[0], c[1], *w]);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn tail(&self) -> u32 {
        self.links.last().map_or(self.head, |l| l.1)
    }
}

/// Read-only view of an encoded chain.
#[derive(Clone, Copy, Debug)]
pub struct ChainRef<'a>(pub &'a [u32]);

impl<'a> ChainRef<'a> {
    #[inline]
    pub fn len(&self) -> usize {
        (self.0.len() - 1) / 3
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.len() == 1
    }

    #[inline]
    pub fn head(&self) -> u32 {
        self.0[0]
    }

    /// `C_h` for `1 <= h <= t`.
    #[inline]
    pub fn pair(&self, h: usize) -> [u32; 2] {
        [self.0[3 * h - 2], self.0[3 * h - 1]]
    }

    /// `w_h` for `0 <= h <= t`, with `w_0` the head.
    #[inline]
    pub fn pivot(&self, h: usize) -> u32 {
        if h == 0 {
            self.0[0]
        } else {
            self.0[3 * h]
        }
    }

    #[inline]
    pub fn tail(&self) -> u32 {
        self.pivot(self.len())
    }

    /// The chain obtained by dropping the first `s` links; its head is `w_s`.
    #[inline]
    pub fn suffix(&self, s: usize) -> ChainRef<'a> {
        ChainRef(&self.0[3 * s..])
    }
}

/// Pattern over chain positions: `entries[h-1]` constrains `C_h` for
/// `h <= t`, and the last entry is the tail. `None` is the wildcard.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pattern(pub Vec<Option<u32>>);

impl Pattern {
    /// `(*, ..., *, w)` of length `t + 1`.
    pub fn tail_only(t: usize, w: u32) -> Self {
        let mut e = vec![None; t + 1];
        e[t] = Some(w);
        Pattern(e)
    }

    /// Length `t + 1`.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of fixed entries.
    pub fn size(&self) -> usize {
        self.0.iter().filter(|e| e.is_some()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.0.iter().all(Option::is_some)
    }

    /// Wildcards form a prefix and the rest is fixed.
    pub fn is_contiguous(&self) -> bool {
        let first_fixed = self.0.iter().position(Option::is_some).unwrap_or(self.0.len());
        !self.0.is_empty() && self.0[first_fixed..].iter().all(Option::is_some)
    }

    /// `self ⊇ other`: agrees with every fixed entry of `other`.
    pub fn extends(&self, other: &Pattern) -> bool {
        self.0.len() == other.0.len()
            && self.0.iter().zip(&other.0).all(|(a, b)| b.is_none() || a == b)
    }

    /// Fixed suffix of a contiguous pattern.
    pub fn fixed_suffix(&self) -> Vec<u32> {
        self.0.iter().flatten().copied().collect()
    }

    /// Negation image under `ν`.
    pub fn negated(&self, fam: &MatchingFamily) -> Pattern {
        Pattern(self.0.iter().map(|e| e.map(|v| fam.neg(v))).collect())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let entries = text
            .split(',')
            .map(|tok| match tok.trim() {
                "*" => Ok(None),
                s => s.parse::<u32>().map(Some).map_err(|_| Error::invalid(format!("bad pattern entry {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if entries.last().is_none_or(Option::is_none) {
            return Err(Error::invalid("pattern must end in a fixed tail"));
        }
        Ok(Pattern(entries))
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|e| e.map_or("*".to_string(), |v| v.to_string())).collect();
        f.write_str(&parts.join(","))
    }
}

/// Whether chain `ch` contains `q`: the tail matches and each fixed `Q_h`
/// lies in `C_h`.
pub fn contains(ch: ChainRef<'_>, q: &Pattern) -> Result<bool> {
    let t = ch.len();
    if q.len() != t + 1 {
        return Err(Error::Dimension(format!("pattern length {} for a {t}-chain", q.len())));
    }
    Ok(contains_unchecked(ch, q))
}

#[inline]
pub(crate) fn contains_unchecked(ch: ChainRef<'_>, q: &Pattern) -> bool {
    let t = ch.len();
    if q.0[t] != Some(ch.tail()) {
        return false;
    }
    (1..=t).all(|h| match q.0[h - 1] {
        None => true,
        Some(v) => ch.pair(h).contains(&v),
    })
}

/// One extension step `(C, w)` available from a vertex: `C ∪ {w}` is an
/// edge of the matching attached to that vertex.
pub type Link = ([u32; 2], u32);

/// Sorted links out of `H_{ν(w)}`.
pub fn links_from(fam: &MatchingFamily, w: u32) -> Vec<Link> {
    let mut out = Vec::with_capacity(3 * fam.matchings[fam.neg(w) as usize].len());
    for e in &fam.matchings[fam.neg(w) as usize] {
        out.push(([e[1], e[2]], e[0]));
        out.push(([e[0], e[2]], e[1]));
        out.push(([e[0], e[1]], e[2]));
    }
    out.sort_unstable();
    out
}

/// For every vertex `w`, the sorted `(u, C)` with `C ∪ {w} ∈ H_{ν(u)}`:
/// the ways to prepend a link to a chain with head `w`.
pub fn reverse_links(fam: &MatchingFamily) -> Vec<Vec<(u32, [u32; 2])>> {
    let mut out = vec![Vec::new(); fam.n];
    for u in 0..fam.n as u32 {
        for (c, w) in links_from(fam, u) {
            out[w as usize].push((u, c));
        }
    }
    for v in &mut out {
        v.sort_unstable();
    }
    out
}

/// All `t`-chains of a family, sorted, with a lazily built containment index.
#[derive(Debug)]
pub struct ChainSet {
    pub t: usize,
    pub n: usize,
    data: Vec<u32>,
    /// Chains with head `u` occupy ids `head_start[u]..head_start[u+1]`.
    head_start: Vec<usize>,
    /// Per pattern position, vertex to sorted chain ids.
    index: Vec<OnceLock<Vec<Vec<u32>>>>,
}

impl Clone for ChainSet {
    fn clone(&self) -> Self {
        ChainSet::from_sorted(self.t, self.n, self.data.clone())
    }
}

impl PartialEq for ChainSet {
    fn eq(&self, other: &Self) -> bool {
        self.t == other.t && self.n == other.n && self.data == other.data
    }
}

impl ChainSet {
    fn from_sorted(t: usize, n: usize, data: Vec<u32>) -> Self {
        let stride = 1 + 3 * t;
        let count = data.len() / stride;
        let mut head_start = vec![0usize; n + 1];
        for id in 0..count {
            head_start[data[id * stride] as usize + 1] += 1;
        }
        for u in 0..n {
            head_start[u + 1] += head_start[u];
        }
        ChainSet { t, n, data, head_start, index: (0..=t).map(|_| OnceLock::new()).collect() }
    }

    /// Chain set from arbitrary encodings; sorts and deduplicates.
    pub fn from_chains(t: usize, n: usize, chains: &[Vec<u32>]) -> Self {
        let mut v: Vec<&Vec<u32>> = chains.iter().collect();
        v.sort_unstable();
        v.dedup();
        ChainSet::from_sorted(t, n, v.into_iter().flatten().copied().collect())
    }

    #[inline]
    pub fn stride(&self) -> usize {
        1 + 3 * self.t
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.stride()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, id: u32) -> ChainRef<'_> {
        let s = self.stride();
        ChainRef(&self.data[id as usize * s..(id as usize + 1) * s])
    }

    pub fn iter(&self) -> impl Iterator<Item = ChainRef<'_>> + '_ {
        self.data.chunks(self.stride()).map(ChainRef)
    }

    /// Ids of chains with head `u`.
    pub fn with_head(&self, u: u32) -> std::ops::Range<u32> {
        self.head_start[u as usize] as u32..self.head_start[u as usize + 1] as u32
    }

    /// Id of an encoded chain, by binary search.
    pub fn find(&self, enc: &[u32]) -> Option<u32> {
        let (mut lo, mut hi) = (0usize, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.get(mid as u32).0.cmp(enc) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid as u32),
            }
        }
        None
    }

    /// Chains whose position `pos` (1-based pattern position) involves `v`.
    fn position_index(&self, pos: usize) -> &Vec<Vec<u32>> {
        self.index[pos - 1].get_or_init(|| {
            let mut idx = vec![Vec::new(); self.n];
            for (id, ch) in self.iter().enumerate() {
                if pos == self.t + 1 {
                    idx[ch.tail() as usize].push(id as u32);
                } else {
                    for v in ch.pair(pos) {
                        idx[v as usize].push(id as u32);
                    }
                }
            }
            idx
        })
    }

    /// Ids of all chains containing `q`, via the positional index.
    pub fn enumerate_containing(&self, q: &Pattern) -> Result<Vec<u32>> {
        if q.len() != self.t + 1 {
            return Err(Error::Dimension(format!("pattern length {} for {}-chains", q.len(), self.t)));
        }
        let Some(Some(tail)) = q.0.last() else {
            return Err(Error::invalid("pattern tail must be fixed"));
        };
        if *tail as usize >= self.n {
            return Ok(Vec::new());
        }
        // Start from the shortest posting list among fixed positions.
        let mut best: &[u32] = &self.position_index(self.t + 1)[*tail as usize];
        for (h, e) in q.0[..self.t].iter().enumerate() {
            if let Some(v) = e {
                if *v as usize >= self.n {
                    return Ok(Vec::new());
                }
                let list = &self.position_index(h + 1)[*v as usize];
                if list.len() < best.len() {
                    best = list;
                }
            }
        }
        Ok(best.iter().copied().filter(|&id| contains_unchecked(self.get(id), q)).collect())
    }

    /// One chain per line, space-separated encoding.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for ch in self.iter() {
            let parts: Vec<String> = ch.0.iter().map(u32::to_string).collect();
            out.push_str(&parts.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Exact chain counts by dynamic programming over tails.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainCounts {
    pub per_head: Vec<BigUint>,
    pub total: BigUint,
}

/// `N_s(w) = sum over links (C, w') from w of N_{s-1}(w')`, `N_0 = 1`.
pub fn count_chains(fam: &MatchingFamily, t: usize) -> ChainCounts {
    let mut counts: Vec<BigUint> = vec![BigUint::one(); fam.n];
    for _ in 0..t {
        counts = (0..fam.n as u32)
            .map(|w| {
                let mut acc = BigUint::zero();
                for e in &fam.matchings[fam.neg(w) as usize] {
                    for v in e {
                        acc += &counts[*v as usize];
                    }
                }
                acc
            })
            .collect();
    }
    let total = counts.iter().sum();
    ChainCounts { per_head: counts, total }
}

fn check_budget(fam: &MatchingFamily, t: usize, max_chains: u64) -> Result<()> {
    let total = count_chains(fam, t).total;
    if total > BigUint::from(max_chains) {
        return Err(Error::budget("chains", &format!("{t}-chain count"), total, max_chains));
    }
    Ok(())
}

/// Enumerates every `t`-chain, in canonical order.
pub fn build_chains(fam: &MatchingFamily, t: usize, max_chains: u64) -> Result<ChainSet> {
    check_budget(fam, t, max_chains)?;
    let links: Vec<Vec<Link>> = (0..fam.n as u32).map(|w| links_from(fam, w)).collect();
    let per_head: Vec<Vec<u32>> = (0..fam.n as u32)
        .into_par_iter()
        .map(|u| {
            let mut out = Vec::new();
            let mut cur = vec![u];
            grow(&links, t, &mut cur, &mut out);
            out
        })
        .collect();
    Ok(ChainSet::from_sorted(t, fam.n, per_head.concat()))
}

fn grow(links: &[Vec<Link>], t: usize, cur: &mut Vec<u32>, out: &mut Vec<u32>) {
    if cur.len() == 1 + 3 * t {
        out.extend_from_slice(cur);
        return;
    }
    let w = *cur.last().unwrap();
    for &(c, next) in &links[w as usize] {
        cur.extend([c[0], c[1], next]);
        grow(links, t, cur, out);
        cur.truncate(cur.len() - 3);
    }
}

/// `H^{(t+1)} = ∪_u H_u ∘ H^{(t)}`: prepends one link to every chain.
pub fn extend(fam: &MatchingFamily, cs: &ChainSet, max_chains: u64) -> Result<ChainSet> {
    let t = cs.t + 1;
    let projected = (cs.len() as u128) * 3 * fam.max_matching_size() as u128;
    if projected > max_chains as u128 {
        check_budget(fam, t, max_chains)?;
    }
    let per_head: Vec<Vec<u32>> = (0..fam.n as u32)
        .into_par_iter()
        .map(|u| {
            let mut out = Vec::new();
            for (c, w0) in links_from(fam, u) {
                for id in cs.with_head(w0) {
                    out.extend([u, c[0], c[1]]);
                    out.extend_from_slice(cs.get(id).0);
                }
            }
            out
        })
        .collect();
    Ok(ChainSet::from_sorted(t, fam.n, per_head.concat()))
}

/// Linear form of a chain: `(vertex, coefficient)` sorted by vertex, zero
/// coefficients dropped.
///
/// Over F2 it is the mod-2 multiset `{u, w_t} ∪ C_1 ∪ ... ∪ C_t`. Over
/// `F_p` the head has coefficient `+1`, `C_h` has `(-1)^{h+1}`, and the tail
/// `(-1)^{t+1}`; every codeword gives it value 0.
pub fn chain_parity(ch: ChainRef<'_>, field_char: u32) -> Vec<(u32, u32)> {
    let p = field_char as i64;
    let t = ch.len();
    let mut terms: Vec<(u32, i64)> = Vec::with_capacity(2 + 2 * t);
    let sign = |h: usize| if h % 2 == 1 { 1 } else { -1 };
    terms.push((ch.head(), 1));
    for h in 1..=t {
        for v in ch.pair(h) {
            terms.push((v, sign(h)));
        }
    }
    terms.push((ch.tail(), sign(t)));
    terms.sort_unstable();
    let mut out: Vec<(u32, u32)> = Vec::new();
    for (v, c) in terms {
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = ((last.1 as i64 + c).rem_euclid(p)) as u32,
            _ => out.push((v, c.rem_euclid(p) as u32)),
        }
    }
    out.retain(|&(_, c)| c != 0);
    out
}

/// Support of the F2 parity of a chain.
pub fn chain_support(ch: ChainRef<'_>) -> Vec<u32> {
    chain_parity(ch, 2).into_iter().map(|(v, _)| v).collect()
}

/// Negation image of an encoded chain.
pub fn negate_chain(fam: &MatchingFamily, enc: &[u32]) -> Vec<u32> {
    let mut out: Vec<u32> = enc.iter().map(|&v| fam.neg(v)).collect();
    for h in 0..(enc.len() - 1) / 3 {
        let (a, b) = (out[1 + 3 * h], out[2 + 3 * h]);
        if a > b {
            out[1 + 3 * h] = b;
            out[2 + 3 * h] = a;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{gen_flat_lcc, gen_random_matchings, lift_unit_coefficients, solution_space, CoefficientConstraint};
    use proptest::prelude::*;
    use rand::Rng;
    use std::collections::BTreeSet;

    /// Brute force: all tuples of links checked against the definition.
    fn brute_chains(fam: &MatchingFamily, t: usize) -> BTreeSet<Vec<u32>> {
        let n = fam.n as u32;
        let mut frontier: Vec<Vec<u32>> = (0..n).map(|u| vec![u]).collect();
        for _ in 0..t {
            let mut next = Vec::new();
            for ch in &frontier {
                let prev = *ch.last().unwrap();
                for a in 0..n {
                    for b in a + 1..n {
                        for w in 0..n {
                            let mut e = [a, b, w];
                            e.sort_unstable();
                            if w != a && w != b && fam.matchings[fam.neg(prev) as usize].contains(&e) {
                                let mut c = ch.clone();
                                c.extend([a, b, w]);
                                next.push(c);
                            }
                        }
                    }
                }
            }
            frontier = next;
        }
        frontier.into_iter().collect()
    }

    #[test]
    fn zero_chains_are_vertices() {
        let fam = gen_random_matchings(5, 1, 3).unwrap();
        let cs = build_chains(&fam, 0, 100).unwrap();
        assert_eq!(cs.len(), 5);
        assert_eq!(count_chains(&fam, 0).per_head, vec![BigUint::one(); 5]);
    }

    #[test]
    fn one_triple_per_vertex_gives_three_chains() {
        let fam = gen_random_matchings(6, 1, 2).unwrap();
        let cs = build_chains(&fam, 1, 1000).unwrap();
        let brute = brute_chains(&fam, 1);
        assert_eq!(cs.iter().map(|c| c.0.to_vec()).collect::<BTreeSet<_>>(), brute);
        for u in 0..6 {
            assert_eq!(cs.with_head(u).len(), 3);
        }
    }

    #[test]
    fn uniform_counts_are_powers() {
        let fam = gen_random_matchings(13, 2, 1).unwrap();
        let counts = count_chains(&fam, 2);
        assert!(counts.per_head.iter().all(|c| *c == BigUint::from(36u32)));
        let cs = build_chains(&fam, 3, 1_000_000).unwrap();
        assert_eq!(BigUint::from(cs.len()), count_chains(&fam, 3).total);
        assert_eq!(cs.len(), 13 * 216);
    }

    #[test]
    fn extend_matches_direct_build() {
        let fam = gen_random_matchings(12, 2, 9).unwrap();
        let mut cs = build_chains(&fam, 0, 100).unwrap();
        for t in 1..=3 {
            cs = extend(&fam, &cs, 1_000_000).unwrap();
            assert_eq!(cs, build_chains(&fam, t, 1_000_000).unwrap());
        }
        let empty = ChainSet::from_chains(1, 12, &[]);
        assert!(extend(&fam, &empty, 10).unwrap().is_empty());
    }

    #[test]
    fn budget_reports_count() {
        let fam = gen_random_matchings(12, 2, 9).unwrap();
        let err = build_chains(&fam, 3, 100).unwrap_err();
        assert!(err.is_budget());
        assert!(err.to_string().contains(&(12 * 216).to_string()), "{err}");
    }

    #[test]
    fn parity_cancels_shared_vertices() {
        let ch = Chain { head: 0, links: vec![([1, 2], 3), ([2, 4], 5)] }.encode();
        assert_eq!(chain_support(ChainRef(&ch)), vec![0, 1, 4, 5]);
        let one = Chain { head: 7, links: vec![([1, 2], 3)] }.encode();
        assert_eq!(chain_support(ChainRef(&one)), vec![1, 2, 3, 7]);
    }

    #[test]
    fn parity_annihilates_flat_code() {
        let (fam, sol) = gen_flat_lcc(3).unwrap();
        let cs = build_chains(&fam, 3, 1_000_000).unwrap();
        for ch in cs.iter() {
            let par = chain_support(ch);
            for x in &sol.basis {
                assert_eq!(par.iter().map(|&v| x[v as usize]).sum::<u32>() % 2, 0);
            }
        }
    }

    #[test]
    fn lifted_parity_annihilates_solutions() {
        let cs_in = [
            CoefficientConstraint { u: 0, terms: [(1, 1), (2, 2), (3, 1)] },
            CoefficientConstraint { u: 1, terms: [(0, 2), (2, 1), (3, 1)] },
            CoefficientConstraint { u: 2, terms: [(0, 1), (1, 1), (3, 2)] },
        ];
        let fam = lift_unit_coefficients(3, 4, &cs_in).unwrap();
        let sol = solution_space(&fam).unwrap();
        for x in &sol.basis {
            assert!(crate::instances::SolutionSpace::satisfies(&fam, x), "{x:?} {:?}", fam.matchings);
        }
        let cs = build_chains(&fam, 2, 100_000).unwrap();
        assert!(!cs.is_empty());
        for ch in cs.iter() {
            let par = chain_parity(ch, 3);
            for x in &sol.basis {
                let s: u64 = par.iter().map(|&(v, c)| c as u64 * x[v as usize] as u64).sum();
                assert_eq!(s % 3, 0, "chain {:?}", ch.0);
            }
        }
    }

    #[test]
    fn pattern_basics() {
        let q = Pattern::parse("*,3,5").unwrap();
        assert_eq!(q.size(), 2);
        assert!(q.is_contiguous());
        assert!(!Pattern::parse("5,*,7").unwrap().is_contiguous());
        assert!(Pattern::parse("1,3,5").unwrap().extends(&q));
        assert_eq!(q.to_string(), "*,3,5");
        assert!(Pattern::parse("3,*").is_err());
    }

    #[test]
    fn containment_definition() {
        let ch = Chain { head: 0, links: vec![([1, 2], 3), ([4, 6], 5)] }.encode();
        let c = ChainRef(&ch);
        assert!(contains(c, &Pattern::tail_only(2, 5)).unwrap());
        assert!(contains(c, &Pattern(vec![Some(2), Some(6), Some(5)])).unwrap());
        assert!(!contains(c, &Pattern(vec![Some(3), None, Some(5)])).unwrap());
        assert!(contains(c, &Pattern::tail_only(1, 5)).is_err());
    }

    #[test]
    fn indexed_enumeration_matches_filter() {
        let fam = gen_random_matchings(12, 2, 4).unwrap();
        let cs = build_chains(&fam, 2, 1_000_000).unwrap();
        let mut rng = crate::seed::rng(4, "patterns");
        for _ in 0..50 {
            let ch = cs.get(rng.gen_range(0..cs.len() as u32));
            // Patterns drawn around a real chain so that most are nonempty.
            let mut e: Vec<Option<u32>> = vec![None; 3];
            for h in 1..=2 {
                e[h - 1] = match rng.gen_range(0..3) {
                    0 => None,
                    1 => Some(ch.pair(h)[rng.gen_range(0..2)]),
                    _ => Some(rng.gen_range(0..12)),
                };
            }
            e[2] = Some(if rng.gen_bool(0.8) { ch.tail() } else { rng.gen_range(0..12) });
            let q = Pattern(e);
            let fast = cs.enumerate_containing(&q).unwrap();
            let slow: Vec<u32> = (0..cs.len() as u32).filter(|&id| contains(cs.get(id), &q).unwrap()).collect();
            assert_eq!(fast, slow, "pattern {q}");
        }
    }

    #[test]
    fn dump_is_one_chain_per_line() {
        let fam = gen_random_matchings(4, 1, 0).unwrap();
        let cs = build_chains(&fam, 1, 100).unwrap();
        let text = cs.dump();
        assert_eq!(text.lines().count(), 12);
        assert_eq!(text.lines().next().unwrap().split(' ').count(), 4);
    }

    proptest! {
        #[test]
        fn build_matches_brute_force(seed in any::<u64>(), t in 0usize..3) {
            let fam = gen_random_matchings(7, 1, seed).unwrap();
            let cs = build_chains(&fam, t, 1_000_000).unwrap();
            let got: BTreeSet<Vec<u32>> = cs.iter().map(|c| c.0.to_vec()).collect();
            prop_assert_eq!(got.len(), cs.len());
            prop_assert_eq!(got, brute_chains(&fam, t));
        }

        #[test]
        fn dp_count_matches_enumeration(seed in any::<u64>(), m in 1usize..4) {
            let fam = gen_random_matchings(12, m, seed).unwrap();
            let cs = build_chains(&fam, 3, 10_000_000).unwrap();
            prop_assert_eq!(BigUint::from(cs.len()), count_chains(&fam, 3).total);
        }

        #[test]
        fn chains_are_sorted_and_valid(seed in any::<u64>()) {
            let fam = gen_random_matchings(10, 2, seed).unwrap();
            let cs = build_chains(&fam, 2, 1_000_000).unwrap();
            for id in 1..cs.len() as u32 {
                prop_assert!(cs.get(id - 1).0 < cs.get(id).0);
            }
            for ch in cs.iter() {
                for h in 1..=2 {
                    let mut e = [ch.pair(h)[0], ch.pair(h)[1], ch.pivot(h)];
                    e.sort_unstable();
                    prop_assert!(fam.matchings[ch.pivot(h - 1) as usize].contains(&e));
                }
            }
        }
    }
}
