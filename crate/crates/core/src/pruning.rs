//! Degree polynomials of Kikuchi rows, bad-row detection and pruning, and
//! the parameter formulas of the pruning lemma.
//!
//! A degree polynomial lives on tuples of vertex subsets in row-position
//! order `S_0..S_{r-t}, S'_0..S'_{r-t}, R_1..R_t`. Each chain pair
//! contributes the tuples that pick one vertex of every pair `C_h`, one of
//! every `C'_h`, and the dropped vertex of every fixed position of `C`.
//! The count factorizes as a sum over groups of (left chain weight) times
//! (right chain weight), which is what every evaluator below uses.

use std::fmt::Write as _;

use num_bigint::BigUint;
use rand::Rng;
use serde::Serialize;

use crate::combinatorics::random_subset;
use crate::kikuchi::{ChainView, Csr, KikuchiOperator, OpGroup};
use crate::{seed, Error, Result};

/// Two-sided 99% normal quantile.
pub const Z99: f64 = 2.5758293035489004;

/// Parameter pack of the pruning lemma. `delta` is the matching density,
/// so `3 δ n` is three times the matching size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PruneParams {
    pub n: usize,
    pub r: usize,
    pub t: usize,
    pub ell: usize,
    pub d: f64,
    pub delta: f64,
    pub gamma: f64,
    pub big_gamma: f64,
    /// Constant of the first feasibility item.
    pub c: f64,
}

impl PruneParams {
    /// `1 / (4r)`.
    pub fn beta(&self) -> f64 {
        1.0 / (4.0 * self.r as f64)
    }

    /// Bias `(1 + β) ℓ / n` of the product distribution.
    pub fn bias(&self) -> f64 {
        ((1.0 + self.beta()) * self.ell as f64 / self.n as f64).min(1.0)
    }

    pub fn arity(&self) -> usize {
        2 * self.r + 2 - self.t
    }

    /// `ln μ` with `μ = 3 · 2^{2r+2-2t} (ℓ/n)^{2r+2-t} d^t (3δn)^{2r+1-t}`.
    pub fn ln_mu(&self) -> f64 {
        let (r, t) = (self.r as f64, self.t as f64);
        let mut v = 3f64.ln()
            + (2.0 * r + 2.0 - 2.0 * t) * 2f64.ln()
            + (2.0 * r + 2.0 - t) * (self.ell as f64 / self.n as f64).ln()
            + (2.0 * r + 1.0 - t) * (3.0 * self.delta * self.n as f64).ln();
        if self.t > 0 {
            v += t * self.d.ln();
        }
        v
    }

    pub fn mu(&self) -> f64 {
        self.ln_mu().exp()
    }

    /// `Δ = 3 μ`.
    pub fn threshold(&self) -> f64 {
        3.0 * self.mu()
    }
}

/// `Δ` as an exact fraction `(numerator, denominator)` for integral inputs,
/// with `three_delta_n = 3 δ n`.
pub fn threshold_exact(n: u64, ell: u64, three_delta_n: u64, d: u64, r: u32, t: u32) -> (BigUint, BigUint) {
    let num = BigUint::from(9u32)
        * BigUint::from(2u32).pow(2 * r + 2 - 2 * t)
        * BigUint::from(ell).pow(2 * r + 2 - t)
        * BigUint::from(d).pow(t)
        * BigUint::from(three_delta_n).pow(2 * r + 1 - t);
    (num, BigUint::from(n).pow(2 * r + 2 - t))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeasibilityItem {
    pub item: usize,
    pub statement: &'static str,
    pub log_lhs: f64,
    pub log_rhs: f64,
    /// `log_rhs - log_lhs`; for the equality item, minus the absolute gap.
    pub margin: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Feasibility {
    pub items: Vec<FeasibilityItem>,
    pub all_hold: bool,
}

/// The five parameter conditions of the pruning lemma, compared in log form.
pub fn feasibility(p: &PruneParams) -> Feasibility {
    let (r, ell, n) = (p.r as f64, p.ell as f64, p.n as f64);
    let le = |item, statement, log_lhs: f64, log_rhs: f64| FeasibilityItem {
        item,
        statement,
        log_lhs,
        log_rhs,
        margin: log_rhs - log_lhs,
        holds: log_lhs <= log_rhs,
    };
    let gap = (p.d.ln() - (3.0 * p.delta * ell * p.gamma).ln()).abs();
    let items = vec![
        le(1, "gamma <= 1/(c Gamma r^3 log2 n)", p.gamma.ln(), -(p.c * p.big_gamma * r.powi(3) * n.log2()).ln()),
        le(2, "2/(3 delta ell) <= gamma", (2.0 / (3.0 * p.delta * ell)).ln(), p.gamma.ln()),
        le(3, "n <= (3 gamma delta ell / 4)^(r+1)", n.ln(), (r + 1.0) * (3.0 * p.gamma * p.delta * ell / 4.0).ln()),
        le(4, "(2r+2) exp(-ell/(64 r^2)) <= ell^(-Gamma r)", (2.0 * r + 2.0).ln() - ell / (64.0 * r * r), -p.big_gamma * r * ell.ln()),
        FeasibilityItem {
            item: 5,
            statement: "d = 3 delta ell gamma",
            log_lhs: p.d.ln(),
            log_rhs: (3.0 * p.delta * ell * p.gamma).ln(),
            margin: -gap,
            holds: gap <= 1e-9,
        },
    ];
    let all_hold = items.iter().all(|i| i.holds);
    Feasibility { items, all_hold }
}

#[derive(Clone, Debug)]
struct LeftChain {
    pairs: Vec<[u32; 2]>,
    masks: Vec<u128>,
    singles: Vec<u32>,
}

#[derive(Clone, Debug)]
struct RightChain {
    pairs: Vec<[u32; 2]>,
    masks: Vec<u128>,
}

/// Degree polynomial of one directed head pair `(i, j)`.
#[derive(Clone, Debug)]
pub struct DegreeContext {
    pub i: u32,
    pub j: u32,
    pub n: usize,
    pub r: usize,
    pub t: usize,
    groups: Vec<(Vec<LeftChain>, Vec<RightChain>)>,
}

fn pair_mask(c: &[u32; 2]) -> u128 {
    1u128 << c[0] | 1u128 << c[1]
}

impl DegreeContext {
    /// Collects the chain pairs of `A_{i,j}`; groups stored as `(j, i)`
    /// enter with their sides swapped.
    pub fn new(chains: &[ChainView], groups: &[OpGroup], n: usize, r: usize, t: usize, i: u32, j: u32) -> Self {
        let left = |c: &ChainView| LeftChain {
            pairs: c.pairs.clone(),
            masks: c.pairs.iter().map(pair_mask).collect(),
            singles: c.singles.clone(),
        };
        let right = |c: &ChainView| RightChain { pairs: c.pairs.clone(), masks: c.pairs.iter().map(pair_mask).collect() };
        let mut out = Vec::new();
        for g in groups {
            let (l, rt) = if (g.i, g.j) == (i, j) {
                (&g.left, &g.right)
            } else if (g.i, g.j) == (j, i) {
                (&g.right, &g.left)
            } else {
                continue;
            };
            out.push((
                l.iter().map(|&c| left(&chains[c as usize])).collect(),
                rt.iter().map(|&c| right(&chains[c as usize])).collect(),
            ));
        }
        DegreeContext { i, j, n, r, t, groups: out }
    }

    pub fn from_operator(op: &KikuchiOperator, i: u32, j: u32) -> Self {
        Self::new(&op.chains, &op.groups, op.n, op.r, op.t, i, j)
    }

    fn block(&self) -> usize {
        self.r - self.t + 1
    }

    pub fn arity(&self) -> usize {
        2 * self.r + 2 - self.t
    }

    pub fn pair_count(&self) -> u128 {
        self.groups.iter().map(|(l, r)| l.len() as u128 * r.len() as u128).sum()
    }

    /// `|T_{i,j}|`.
    pub fn tuple_count(&self) -> u128 {
        self.pair_count() << (2 * self.block())
    }

    /// `Deg_{i,j}` at a tuple of vertex sets (any sizes).
    pub fn deg(&self, sets: &[u128]) -> u128 {
        let b = self.block();
        let mut total = 0u128;
        for (ls, rs) in &self.groups {
            let lw: u128 = ls
                .iter()
                .map(|c| {
                    if c.singles.iter().enumerate().any(|(h, &u)| sets[2 * b + h] >> u & 1 == 0) {
                        return 0;
                    }
                    c.masks.iter().enumerate().map(|(h, m)| (m & sets[h]).count_ones() as u128).product::<u128>()
                })
                .sum();
            if lw == 0 {
                continue;
            }
            let rw: u128 = rs
                .iter()
                .map(|c| c.masks.iter().enumerate().map(|(h, m)| (m & sets[b + h]).count_ones() as u128).product::<u128>())
                .sum();
            total += lw * rw;
        }
        total
    }

    /// `deg_{i,j}(Z)`: tuples agreeing with `Z` on its fixed entries.
    pub fn deg_z(&self, z: &[Option<u32>]) -> Result<u128> {
        if z.len() != self.arity() {
            return Err(Error::Dimension(format!("pattern of length {} for arity {}", z.len(), self.arity())));
        }
        let b = self.block();
        let pair_weight = |c: &[u32; 2], zv: Option<u32>| match zv {
            None => 2u128,
            Some(v) => (c[0] == v || c[1] == v) as u128,
        };
        let mut total = 0u128;
        for (ls, rs) in &self.groups {
            let lw: u128 = ls
                .iter()
                .map(|c| {
                    let fixed_ok = c.singles.iter().enumerate().all(|(h, &u)| z[2 * b + h].is_none_or(|v| v == u));
                    if !fixed_ok {
                        return 0;
                    }
                    c.pairs.iter().enumerate().map(|(h, p)| pair_weight(p, z[h])).product::<u128>()
                })
                .sum();
            let rw: u128 =
                rs.iter().map(|c| c.pairs.iter().enumerate().map(|(h, p)| pair_weight(p, z[b + h])).product::<u128>()).sum();
            total += lw * rw;
        }
        Ok(total)
    }

    /// `μ_Z = p^{arity - |Z|} deg(Z)`.
    pub fn mu_z(&self, z: &[Option<u32>], bias: f64) -> Result<f64> {
        let fixed = z.iter().filter(|v| v.is_some()).count();
        Ok(self.deg_z(z)? as f64 * bias.powi((self.arity() - fixed) as i32))
    }

    /// Every tuple of `T_{i,j}` with multiplicity, in row-position order.
    pub fn tuples(&self) -> Vec<Vec<u32>> {
        let b = self.block();
        let mut out = Vec::new();
        for (ls, rs) in &self.groups {
            for l in ls {
                for r in rs {
                    for bits in 0u32..1 << (2 * b) {
                        let mut u: Vec<u32> = (0..b).map(|h| l.pairs[h][(bits >> h & 1) as usize]).collect();
                        u.extend((0..b).map(|h| r.pairs[h][(bits >> (b + h) & 1) as usize]));
                        u.extend(&l.singles);
                        out.push(u);
                    }
                }
            }
        }
        out
    }

    /// One tuple drawn uniformly from `T_{i,j}`.
    fn random_tuple<R: Rng>(&self, rng: &mut R) -> Option<Vec<u32>> {
        let total = self.pair_count();
        if total == 0 {
            return None;
        }
        let mut pick = rng.gen_range(0..total);
        let b = self.block();
        for (ls, rs) in &self.groups {
            let size = ls.len() as u128 * rs.len() as u128;
            if pick >= size {
                pick -= size;
                continue;
            }
            let (l, r) = (&ls[(pick / rs.len() as u128) as usize], &rs[(pick % rs.len() as u128) as usize]);
            let mut u: Vec<u32> = (0..b).map(|h| l.pairs[h][rng.gen_range(0..2)]).collect();
            u.extend((0..b).map(|h| r.pairs[h][rng.gen_range(0..2)]));
            u.extend(&l.singles);
            return Some(u);
        }
        unreachable!()
    }
}

/// Contexts for both directions of every head pair present in `op`.
pub fn contexts_for(op: &KikuchiOperator) -> Vec<DegreeContext> {
    let mut heads: Vec<(u32, u32)> = op.groups.iter().map(|g| (g.i, g.j)).collect();
    heads.sort_unstable();
    heads.dedup();
    heads
        .iter()
        .flat_map(|&(i, j)| [DegreeContext::from_operator(op, i, j), DegreeContext::from_operator(op, j, i)])
        .collect()
}

/// Wilson score interval at the 99% level.
pub fn wilson99(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let nt = trials as f64;
    let ph = successes as f64 / nt;
    let z2 = Z99 * Z99;
    let centre = (ph + z2 / (2.0 * nt)) / (1.0 + z2 / nt);
    let half = Z99 * (ph * (1.0 - ph) / nt + z2 / (4.0 * nt * nt)).sqrt() / (1.0 + z2 / nt);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanMode {
    Exhaustive,
    Sampled { trials: u64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BadRows {
    pub mode: &'static str,
    /// Sorted ranks, in exhaustive mode.
    pub rows: Option<Vec<u128>>,
    pub checked: u128,
    pub bad: u128,
    pub fraction: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl BadRows {
    /// One rank per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in self.rows.iter().flatten() {
            writeln!(out, "{r}").unwrap();
        }
        out
    }
}

/// Rows where some degree polynomial exceeds `delta`, closed under the
/// `S`/`S'` block swap so that pruning bounds columns as well.
pub fn find_bad_rows(op: &KikuchiOperator, contexts: &[DegreeContext], delta: f64, mode: ScanMode) -> Result<BadRows> {
    let over = |rank: u128| {
        let sets = op.indexer.unrank(rank);
        contexts.iter().any(|c| c.deg(&sets) as f64 > delta)
    };
    let is_bad = |rank: u128| over(rank) || over(op.swap_blocks(rank));
    match mode {
        ScanMode::Exhaustive => {
            let n = op.dim();
            if n > op.budget.max_materialize_dim {
                return Err(Error::budget("pruning", "exhaustive row scan N", n, op.budget.max_materialize_dim));
            }
            let rows: Vec<u128> = (0..n).filter(|&r| is_bad(r)).collect();
            let bad = rows.len() as u128;
            let fraction = if n == 0 { 0.0 } else { bad as f64 / n as f64 };
            Ok(BadRows { mode: "exhaustive", rows: Some(rows), checked: n, bad, fraction, ci_low: fraction, ci_high: fraction })
        }
        ScanMode::Sampled { trials, seed: s } => {
            let mut rng = seed::rng(s, "bad-rows");
            let bad = (0..trials).filter(|_| is_bad(rng.gen_range(0..op.dim()))).count() as u64;
            let (ci_low, ci_high) = wilson99(bad, trials);
            Ok(BadRows {
                mode: "sampled",
                rows: None,
                checked: trials as u128,
                bad: bad as u128,
                fraction: if trials == 0 { 0.0 } else { bad as f64 / trials as f64 },
                ci_low,
                ci_high,
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pruned {
    pub matrix: Csr,
    pub removed_entries: u64,
    pub removed_abs: u64,
    pub max_row_degree: usize,
    pub max_col_degree: usize,
}

/// Zeroes every row and column listed in `bad` (sorted ranks).
pub fn prune(a: &Csr, bad: &[u128]) -> Pruned {
    let is_bad = |x: usize| bad.binary_search(&(x as u128)).is_ok();
    let mut keep = Vec::with_capacity(a.nnz());
    let (mut removed_entries, mut removed_abs) = (0u64, 0u64);
    for r in 0..a.nrows {
        let row_bad = is_bad(r);
        for (c, v) in a.row(r) {
            if row_bad || is_bad(c as usize) {
                removed_entries += 1;
                removed_abs += v.unsigned_abs();
            } else {
                keep.push((r as u32, c, v));
            }
        }
    }
    let matrix = Csr::from_triplets(a.nrows, a.ncols, keep);
    let max_row_degree = matrix.row_degrees().into_iter().max().unwrap_or(0);
    let max_col_degree = matrix.transpose().row_degrees().into_iter().max().unwrap_or(0);
    Pruned { matrix, removed_entries, removed_abs, max_row_degree, max_col_degree }
}

/// The crude per-row count `|B| (2ℓ)^{arity}` of removable entries.
pub fn removal_bound(bad: u128, ell: usize, arity: usize) -> f64 {
    bad as f64 * (2.0 * ell as f64).powi(arity as i32)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClaimReport {
    pub exhaustive: bool,
    /// Patterns examined, including those with zero count.
    pub checked: u128,
    pub violations: u64,
    /// Largest `μ_Z / (μ γ^{|Z|})` over patterns with `|Z| >= 1`.
    pub worst_ratio: f64,
    /// Patterns with the whole right block fixed.
    pub case1_checked: u128,
    pub case1_violations: u64,
    /// Largest `count / (2^{2r+2} (3m)^{r+1-|Z_1|})`.
    pub case1_worst_ratio: f64,
}

/// Largest `(n+1)^{arity}` explored exhaustively.
pub const CLAIM_EXHAUSTIVE_MAX: u128 = 50_000_000;

/// Checks `μ_Z <= μ γ^{|Z|}` and the count bound for fully fixed right
/// blocks, exhaustively for short tuples on small ground sets, otherwise by
/// restricting random tuples of `T_{i,j}` to random position subsets.
pub fn claim_check(ctx: &DegreeContext, params: &PruneParams, max_matching: usize, samples: u64, seed_value: u64) -> ClaimReport {
    let arity = ctx.arity();
    let block = ctx.r - ctx.t + 1;
    let total_patterns = (ctx.n as u128 + 1).checked_pow(arity as u32).unwrap_or(u128::MAX);
    let exhaustive = arity <= 6 && ctx.n <= 30 && total_patterns <= CLAIM_EXHAUSTIVE_MAX;
    let mu = params.mu();
    let bias = params.bias();
    let mut rep = ClaimReport {
        exhaustive,
        checked: 0,
        violations: 0,
        worst_ratio: 0.0,
        case1_checked: 0,
        case1_violations: 0,
        case1_worst_ratio: 0.0,
    };
    let case1_cap = |z: &[Option<u32>]| {
        let left_fixed = z[..block].iter().chain(&z[2 * block..]).filter(|v| v.is_some()).count() as i32;
        2f64.powi(2 * ctx.r as i32 + 2) * (3.0 * max_matching as f64).powi(ctx.r as i32 + 1 - left_fixed)
    };
    let visit = |z: &[Option<u32>], rep: &mut ClaimReport| {
        rep.checked += 1;
        let size = z.iter().filter(|v| v.is_some()).count();
        let count = ctx.deg_z(z).expect("pattern length matches");
        if size >= 1 {
            let ratio = count as f64 * bias.powi((arity - size) as i32) / (mu * params.gamma.powi(size as i32));
            rep.worst_ratio = rep.worst_ratio.max(ratio);
            if ratio > 1.0 + 1e-12 {
                rep.violations += 1;
            }
        }
        if z[block..2 * block].iter().all(Option::is_some) {
            rep.case1_checked += 1;
            let ratio = count as f64 / case1_cap(z);
            rep.case1_worst_ratio = rep.case1_worst_ratio.max(ratio);
            if ratio > 1.0 + 1e-12 {
                rep.case1_violations += 1;
            }
        }
    };
    if exhaustive {
        let mut z = vec![None; arity];
        loop {
            visit(&z, &mut rep);
            let mut p = arity;
            loop {
                if p == 0 {
                    return rep;
                }
                p -= 1;
                z[p] = match z[p] {
                    None => Some(0),
                    Some(v) if (v as usize) + 1 < ctx.n => Some(v + 1),
                    Some(_) => None,
                };
                if z[p].is_some() {
                    break;
                }
            }
        }
    }
    let mut rng = seed::rng(seed_value, "claim-patterns");
    for _ in 0..samples {
        let Some(u) = ctx.random_tuple(&mut rng) else {
            break;
        };
        let size = rng.gen_range(1..=arity);
        let keep = random_subset(&mut rng, arity, size);
        let z: Vec<Option<u32>> = (0..arity).map(|p| (keep >> p & 1 == 1).then_some(u[p])).collect();
        visit(&z, &mut rep);
    }
    rep
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CouplingReport {
    pub trials: u64,
    pub threshold: f64,
    pub bias: f64,
    /// Tail under exact-size sets.
    pub tail_exact: f64,
    pub tail_exact_ci: (f64, f64),
    /// Tail under the biased product distribution.
    pub tail_biased: f64,
    pub tail_biased_ci: (f64, f64),
    /// `(2r+2) exp(-ℓ/(64 r^2))`.
    pub slack: f64,
    /// Lower CI of the exact tail <= upper CI of the biased tail + slack.
    pub holds: bool,
}

/// Monte Carlo comparison of `Pr[Deg >= Δ]` under uniform `ℓ`-sets and
/// under independent coordinates with bias `(1 + 1/(4r)) ℓ/n`.
pub fn coupling_experiment(ctx: &DegreeContext, ell: usize, threshold: f64, trials: u64, seed_value: u64) -> CouplingReport {
    let (n, r, arity) = (ctx.n, ctx.r.max(1), ctx.arity());
    let bias = ((1.0 + 1.0 / (4.0 * r as f64)) * ell as f64 / n as f64).min(1.0);
    let mut rng = seed::rng(seed_value, "coupling-exact");
    let exact_hits = (0..trials)
        .filter(|_| {
            let sets: Vec<u128> = (0..arity).map(|_| random_subset(&mut rng, n, ell)).collect();
            ctx.deg(&sets) as f64 >= threshold
        })
        .count() as u64;
    let mut rng = seed::rng(seed_value, "coupling-biased");
    let biased_hits = (0..trials)
        .filter(|_| {
            let sets: Vec<u128> = (0..arity)
                .map(|_| (0..n).filter(|_| rng.gen_bool(bias)).fold(0u128, |m, v| m | 1u128 << v))
                .collect();
            ctx.deg(&sets) as f64 >= threshold
        })
        .count() as u64;
    let slack = (2.0 * r as f64 + 2.0) * (-(ell as f64) / (64.0 * (r * r) as f64)).exp();
    let tail_exact_ci = wilson99(exact_hits, trials);
    let tail_biased_ci = wilson99(biased_hits, trials);
    CouplingReport {
        trials,
        threshold,
        bias,
        tail_exact: exact_hits as f64 / trials.max(1) as f64,
        tail_exact_ci,
        tail_biased: biased_hits as f64 / trials.max(1) as f64,
        tail_biased_ci,
        slack,
        holds: tail_exact_ci.0 <= tail_biased_ci.1 + slack,
    }
}
