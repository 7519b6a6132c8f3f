//! XOR formulas built from long chains: the chain formula, its partitioned
//! form with per-piece label variables, and the cross-term instance obtained
//! by squaring over a head matching.
//!
//! Values are carried as field elements. Over F2 a bit `0` is the sign `+1`;
//! a constraint contributes `+1` when satisfied and `-1` otherwise.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::chains::{links_from, ChainSet};
use crate::instances::MatchingFamily;
use crate::partition::Partition;
use crate::seed;
use crate::{Error, Result};

/// Default ceiling on materialized constraints.
pub const DEFAULT_MAX_CONSTRAINTS: u64 = 20_000_000;

/// Largest ground set accepted by exhaustive maximization.
pub const BRUTE_FORCE_MAX_N: usize = 22;

/// One derived constraint `b_head + y_piece + sum_v c_v x_v = 0`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Constraint {
    /// Index into the instance's head list.
    pub head: u32,
    /// Index of the partition piece whose label variable enters, if any.
    pub piece: Option<u32>,
    /// Full pairs `C_0, ..., C_{r-t}` (all of `C_0..C_r` for the chain formula).
    pub pairs: Vec<[u32; 2]>,
    /// `C_h` with its pattern entry removed, for the fixed positions.
    pub singles: Vec<u32>,
    /// Sorted `(vertex, coefficient)` with nonzero coefficients; head excluded.
    pub parity: Vec<(u32, u32)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct XorInstance {
    pub n: usize,
    pub field_char: u32,
    /// Message heads; `b` is indexed like this list.
    pub heads: Vec<u32>,
    /// Chain length of the suffix part (the formula uses `r + 1` links).
    pub r: usize,
    /// Pattern level for a partitioned instance.
    pub level: Option<usize>,
    pub constraints: Vec<Constraint>,
    /// Linear form standing for each piece's label variable, indexed by piece.
    pub piece_forms: Vec<Vec<(u32, u32)>>,
}

fn merge_terms(mut terms: Vec<(u32, i64)>, p: u32) -> Vec<(u32, u32)> {
    terms.sort_unstable();
    let mut out: Vec<(u32, u32)> = Vec::with_capacity(terms.len());
    for (v, c) in terms {
        let c = c.rem_euclid(p as i64) as u32;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = (last.1 + c) % p,
            _ => out.push((v, c)),
        }
    }
    out.retain(|&(_, c)| c != 0);
    out
}

fn subtract(a: &[(u32, u32)], b: &[(u32, u32)], p: u32) -> Vec<(u32, u32)> {
    let mut terms: Vec<(u32, i64)> = a.iter().map(|&(v, c)| (v, c as i64)).collect();
    terms.extend(b.iter().map(|&(v, c)| (v, -(c as i64))));
    merge_terms(terms, p)
}

/// Coefficient of the link carrying `C_h` (`h = 0..=r`) and of the tail in
/// an `(r+1)`-chain's form with head coefficient `+1`.
fn pair_sign(h: usize) -> i64 {
    if h.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

fn tail_sign(r: usize) -> i64 {
    pair_sign(r)
}

fn full_parity(pairs: &[[u32; 2]], tail: u32, r: usize, p: u32) -> Vec<(u32, u32)> {
    let mut terms: Vec<(u32, i64)> = Vec::with_capacity(2 * pairs.len() + 1);
    for (h, c) in pairs.iter().enumerate() {
        terms.push((c[0], pair_sign(h)));
        terms.push((c[1], pair_sign(h)));
    }
    terms.push((tail, tail_sign(r)));
    merge_terms(terms, p)
}

/// Calls `f(head_index, C_0, w_0, chain id)` for every `(r+1)`-chain with a
/// head in `heads`, in canonical order.
fn for_each_long_chain(
    fam: &MatchingFamily,
    cs: &ChainSet,
    heads: &[u32],
    max_constraints: u64,
    mut f: impl FnMut(u32, [u32; 2], u32),
) -> Result<()> {
    let mut total: u64 = 0;
    for &i in heads {
        for (_, w0) in links_from(fam, i) {
            total += cs.with_head(w0).len() as u64;
        }
    }
    if total > max_constraints {
        return Err(Error::budget("formulas", "constraint count", total, max_constraints));
    }
    for (hi, &i) in heads.iter().enumerate() {
        if i as usize >= fam.n {
            return Err(Error::invalid(format!("head {i} outside [n]")));
        }
        for (c0, w0) in links_from(fam, i) {
            for id in cs.with_head(w0) {
                f(hi as u32, c0, id);
            }
        }
    }
    Ok(())
}

/// The chain formula: one constraint per `(r+1)`-chain whose head lies in
/// `heads`, where `cs` holds the `r`-chains.
pub fn build_phi(fam: &MatchingFamily, cs: &ChainSet, heads: &[u32], max_constraints: u64) -> Result<XorInstance> {
    let r = cs.t;
    let p = fam.field_char;
    let mut constraints = Vec::new();
    for_each_long_chain(fam, cs, heads, max_constraints, |hi, c0, id| {
        let ch = cs.get(id);
        let mut pairs = vec![c0];
        pairs.extend((1..=r).map(|h| ch.pair(h)));
        let parity = full_parity(&pairs, ch.tail(), r, p);
        constraints.push(Constraint { head: hi, piece: None, pairs, singles: Vec::new(), parity });
    })?;
    Ok(XorInstance { n: fam.n, field_char: p, heads: heads.to_vec(), r, level: None, constraints, piece_forms: Vec::new() })
}

/// Linear form `x_Q` of a piece pattern inside an `(r+1)`-chain form.
fn pattern_form(part: &Partition, piece: usize, p: u32) -> Vec<(u32, u32)> {
    let r = part.r;
    let q = &part.pieces[piece].pattern;
    let mut terms = Vec::new();
    for h in 1..=r {
        if let Some(v) = q.0[h - 1] {
            terms.push((v, pair_sign(h)));
        }
    }
    if let Some(w) = q.0[r] {
        terms.push((w, tail_sign(r)));
    }
    merge_terms(terms, p)
}

/// The partitioned formula at level `t`: constraints whose `r`-chain suffix
/// lies in a piece with `|Q| = t + 1`, with the pattern's variables moved
/// into the piece label.
pub fn build_psi(
    fam: &MatchingFamily,
    cs: &ChainSet,
    part: &Partition,
    heads: &[u32],
    t: usize,
    max_constraints: u64,
) -> Result<XorInstance> {
    let r = cs.t;
    if part.r != r || t > r {
        return Err(Error::Dimension(format!("level {t} for a partition of {}-chains over {r}-chains", part.r)));
    }
    let p = fam.field_char;
    let owners = part.owners(cs.len());
    if owners.contains(&u32::MAX) {
        return Err(Error::invalid("partition does not cover the chain set"));
    }
    let piece_forms: Vec<Vec<(u32, u32)>> = (0..part.pieces.len()).map(|i| pattern_form(part, i, p)).collect();
    let mut constraints = Vec::new();
    for_each_long_chain(fam, cs, heads, max_constraints, |hi, c0, id| {
        let pi = owners[id as usize] as usize;
        let q = &part.pieces[pi].pattern;
        if q.size() != t + 1 {
            return;
        }
        let ch = cs.get(id);
        let mut all_pairs = vec![c0];
        all_pairs.extend((1..=r).map(|h| ch.pair(h)));
        let full = full_parity(&all_pairs, ch.tail(), r, p);
        let parity = subtract(&full, &piece_forms[pi], p);
        let pairs = all_pairs[..=r - t].to_vec();
        let singles = (r - t + 1..=r)
            .map(|h| {
                let c = ch.pair(h);
                let qv = q.0[h - 1].expect("contiguous pattern fixes the last t pair positions");
                if c[0] == qv {
                    c[1]
                } else {
                    c[0]
                }
            })
            .collect();
        constraints.push(Constraint { head: hi, piece: Some(pi as u32), pairs, singles, parity });
    })?;
    Ok(XorInstance { n: fam.n, field_char: p, heads: heads.to_vec(), r, level: Some(t), constraints, piece_forms })
}

fn dot(form: &[(u32, u32)], x: &[u32], p: u32) -> u64 {
    form.iter().map(|&(v, c)| c as u64 * x[v as usize] as u64).sum::<u64>() % p as u64
}

impl XorInstance {
    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Label values `y = x_Q` for every piece.
    pub fn derived_labels(&self, x: &[u32]) -> Vec<u32> {
        self.piece_forms.iter().map(|f| dot(f, x, self.field_char) as u32).collect()
    }

    /// Whether constraint `c` holds at `(b, x, y)`.
    pub fn satisfied(&self, c: &Constraint, b: &[u32], x: &[u32], y: &[u32]) -> bool {
        let p = self.field_char as u64;
        let yv = c.piece.map_or(0, |pi| y[pi as usize] as u64);
        (b[c.head as usize] as u64 + yv + dot(&c.parity, x, self.field_char)).is_multiple_of(p)
    }

    /// The constraint with its label substituted by `x_Q`, as a plain form.
    pub fn substituted_parity(&self, c: &Constraint) -> Vec<(u32, u32)> {
        match c.piece {
            None => c.parity.clone(),
            Some(pi) => {
                let neg: Vec<(u32, u32)> =
                    self.piece_forms[pi as usize].iter().map(|&(v, k)| (v, (self.field_char - k) % self.field_char)).collect();
                subtract(&c.parity, &neg, self.field_char)
            }
        }
    }

    /// F2 parity of a constraint as a bit mask (label not included).
    fn mask(&self, form: &[(u32, u32)]) -> u64 {
        form.iter().fold(0u64, |m, &(v, _)| m | 1 << v)
    }
}

/// Satisfied minus violated constraints. `y = None` uses `y = x_Q`.
pub fn eval_value(inst: &XorInstance, b: &[u32], x: &[u32], y: Option<&[u32]>) -> Result<i64> {
    if b.len() != inst.heads.len() || x.len() != inst.n {
        return Err(Error::Dimension(format!(
            "b has {} entries for {} heads, x has {} for n = {}",
            b.len(),
            inst.heads.len(),
            x.len(),
            inst.n
        )));
    }
    let derived;
    let y = match y {
        Some(y) if y.len() == inst.piece_forms.len() => y,
        Some(y) => return Err(Error::Dimension(format!("y has {} entries for {} pieces", y.len(), inst.piece_forms.len()))),
        None => {
            derived = inst.derived_labels(x);
            &derived
        }
    };
    let mut total: i64 = 0;
    for c in &inst.constraints {
        total = total
            .checked_add(if inst.satisfied(c, b, x, y) { 1 } else { -1 })
            .ok_or_else(|| Error::invalid("value overflow"))?;
    }
    Ok(total)
}

fn brute_guard(inst: &XorInstance) -> Result<()> {
    if inst.field_char != 2 {
        return Err(Error::invalid("exhaustive maximization is over F2 only"));
    }
    if inst.n > BRUTE_FORCE_MAX_N {
        return Err(Error::budget("formulas", "exhaustive ground set", inst.n, BRUTE_FORCE_MAX_N));
    }
    Ok(())
}

/// Exact `max_x` of the instance with `y = x_Q`, via a Walsh–Hadamard
/// transform of the monomial coefficients. Returns `(value, argmax bits)`;
/// ties go to the smallest `x` as an integer.
pub fn brute_force_val(inst: &XorInstance, b: &[u32]) -> Result<(i64, Vec<u32>)> {
    brute_guard(inst)?;
    let n = inst.n;
    let mut coef = vec![0i64; 1 << n];
    for c in &inst.constraints {
        let m = inst.mask(&inst.substituted_parity(c)) as usize;
        coef[m] += if b[c.head as usize] & 1 == 0 { 1 } else { -1 };
    }
    let mut h = 1;
    while h < coef.len() {
        for i in (0..coef.len()).step_by(2 * h) {
            for j in i..i + h {
                let (a, bb) = (coef[j], coef[j + h]);
                coef[j] = a + bb;
                coef[j + h] = a - bb;
            }
        }
        h *= 2;
    }
    let (best, &val) = coef.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0))).unwrap();
    Ok((val, (0..n).map(|v| (best >> v) as u32 & 1).collect()))
}

/// Same maximum by walking `{0,1}^n` in Gray-code order and flipping one
/// variable at a time.
pub fn brute_force_val_gray(inst: &XorInstance, b: &[u32]) -> Result<i64> {
    brute_guard(inst)?;
    let n = inst.n;
    let mut touching: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut sign: Vec<i64> = Vec::with_capacity(inst.len());
    for (ci, c) in inst.constraints.iter().enumerate() {
        for &(v, _) in &inst.substituted_parity(c) {
            touching[v as usize].push(ci);
        }
        sign.push(if b[c.head as usize] & 1 == 0 { 1 } else { -1 });
    }
    let mut value: i64 = sign.iter().sum();
    let mut best = value;
    for step in 1u64..1 << n {
        let v = step.trailing_zeros() as usize;
        for &ci in &touching[v] {
            value -= 2 * sign[ci];
            sign[ci] = -sign[ci];
        }
        best = best.max(value);
    }
    Ok(best)
}

/// Directed matching on head indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DirectedMatching(pub Vec<(u32, u32)>);

impl DirectedMatching {
    /// `0 -> 1, 2 -> 3, ...`; an odd head count leaves the last head out.
    pub fn consecutive(k: usize) -> Self {
        DirectedMatching((0..k as u32 / 2).map(|a| (2 * a, 2 * a + 1)).collect())
    }

    /// Uniform maximum directed matching.
    pub fn random(k: usize, rng: &mut impl Rng) -> Self {
        let mut order: Vec<u32> = (0..k as u32).collect();
        order.shuffle(rng);
        DirectedMatching(order.chunks_exact(2).map(|c| (c[0], c[1])).collect())
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        let mut seen = vec![false; k];
        for &(i, j) in &self.0 {
            for v in [i, j] {
                if v as usize >= k || std::mem::replace(&mut seen[v as usize], true) {
                    return Err(Error::invalid(format!("({i}, {j}) breaks the matching on {k} heads")));
                }
            }
        }
        Ok(())
    }
}

/// All constraint pairs of one matched head pair inside one piece.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PairGroup {
    pub i: u32,
    pub j: u32,
    pub piece: u32,
    /// `b_i + b_j` over F2.
    pub rhs: u32,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairedInstance {
    pub level: usize,
    pub matching: DirectedMatching,
    pub groups: Vec<PairGroup>,
    pub pair_count: u128,
    /// `|P_t|`: nonempty pieces at the level.
    pub level_pieces: usize,
    /// `k (|P_t| (3m)^{r-t} d^t)^2`.
    pub diagonal_bound: u128,
    /// `(3m)^{r-t} d^t`, the bound on any single `|Ψ_{i,Q,p}|`.
    pub magnitude_bound: u128,
}

fn sat_pow(base: u128, exp: usize) -> u128 {
    (0..exp).fold(1u128, |acc, _| acc.saturating_mul(base))
}

/// Cross terms of the level-`t` partitioned formula over a matching `M`.
pub fn cross_terms(
    fam: &MatchingFamily,
    psi: &XorInstance,
    part: &Partition,
    matching: &DirectedMatching,
    b: &[u32],
) -> Result<PairedInstance> {
    let t = psi.level.ok_or_else(|| Error::invalid("cross terms need a partitioned instance"))?;
    let k = psi.heads.len();
    matching.validate(k)?;
    if b.len() != k {
        return Err(Error::Dimension(format!("b has {} entries for {k} heads", b.len())));
    }
    // Constraint ids grouped by (head, piece).
    let mut by: std::collections::BTreeMap<(u32, u32), Vec<u32>> = std::collections::BTreeMap::new();
    for (ci, c) in psi.constraints.iter().enumerate() {
        by.entry((c.head, c.piece.unwrap())).or_default().push(ci as u32);
    }
    let level_pieces = part.count_at(t);
    let mut groups = Vec::new();
    let mut pair_count: u128 = 0;
    for &(i, j) in &matching.0 {
        for pi in 0..part.pieces.len() as u32 {
            let (Some(left), Some(right)) = (by.get(&(i, pi)), by.get(&(j, pi))) else {
                continue;
            };
            pair_count += left.len() as u128 * right.len() as u128;
            groups.push(PairGroup {
                i,
                j,
                piece: pi,
                rhs: (b[i as usize] ^ b[j as usize]) & 1,
                left: left.clone(),
                right: right.clone(),
            });
        }
    }
    let m = fam.max_matching_size() as u128;
    let magnitude_bound = sat_pow(3 * m, part.r - t).saturating_mul(sat_pow(part.d as u128, t));
    let diag_inner = (level_pieces as u128).saturating_mul(magnitude_bound);
    let diagonal_bound = (k as u128).saturating_mul(diag_inner.saturating_mul(diag_inner));
    Ok(PairedInstance { level: t, matching: matching.clone(), groups, pair_count, level_pieces, diagonal_bound, magnitude_bound })
}

/// `(-1)^{parity . x}` of every constraint, labels excluded.
fn monomial_signs(inst: &XorInstance, x: &[u32]) -> Vec<i64> {
    inst.constraints
        .iter()
        .map(|c| if c.parity.iter().map(|&(v, _)| x[v as usize]).sum::<u32>() & 1 == 0 { 1 } else { -1 })
        .collect()
}

/// `f_M(x) = sum over groups of b_i b_j Ψ_i(x) Ψ_j(x)`.
pub fn eval_cross(psi: &XorInstance, paired: &PairedInstance, x: &[u32]) -> i64 {
    let s = monomial_signs(psi, x);
    paired
        .groups
        .iter()
        .map(|g| {
            let l: i64 = g.left.iter().map(|&c| s[c as usize]).sum();
            let r: i64 = g.right.iter().map(|&c| s[c as usize]).sum();
            if g.rhs == 0 {
                l * r
            } else {
                -l * r
            }
        })
        .sum()
}

/// `Ψ_{i,Q,p}(x)` for every (head, piece), as a dense `k x pieces` table.
pub fn piece_sums(psi: &XorInstance, pieces: usize, x: &[u32]) -> Vec<i64> {
    let s = monomial_signs(psi, x);
    let mut out = vec![0i64; psi.heads.len() * pieces];
    for (c, sign) in psi.constraints.iter().zip(s) {
        out[c.head as usize * pieces + c.piece.unwrap() as usize] += sign;
    }
    out
}

fn all_points(n: usize) -> Result<impl Iterator<Item = Vec<u32>>> {
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::budget("formulas", "exhaustive ground set", n, BRUTE_FORCE_MAX_N));
    }
    Ok((0u64..1 << n).map(move |m| (0..n).map(|v| (m >> v) as u32 & 1).collect()))
}

/// `max_{x,y}` of the level formula: for fixed `x` each label takes the sign
/// of its piece sum, so the value is `max_x sum_{Q,p} |sum_i b_i Ψ_{i,Q,p}(x)|`.
pub fn brute_force_val_psi(psi: &XorInstance, pieces: usize, b: &[u32]) -> Result<i64> {
    brute_guard(psi)?;
    let k = psi.heads.len();
    let mut best = i64::MIN;
    for x in all_points(psi.n)? {
        let sums = piece_sums(psi, pieces, &x);
        let v: i64 = (0..pieces)
            .map(|pi| {
                (0..k)
                    .map(|i| if b[i] & 1 == 0 { sums[i * pieces + pi] } else { -sums[i * pieces + pi] })
                    .sum::<i64>()
                    .abs()
            })
            .sum();
        best = best.max(v);
    }
    Ok(best)
}

/// `max_x f_M(x)`.
pub fn brute_force_val_cross(psi: &XorInstance, paired: &PairedInstance) -> Result<i64> {
    brute_guard(psi)?;
    Ok(all_points(psi.n)?.map(|x| eval_cross(psi, paired, &x)).max().unwrap_or(0))
}

/// Numeric check of the squaring step at one `b`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SquaringCheck {
    pub level: usize,
    pub val_psi: i64,
    pub lhs: f64,
    pub diagonal_bound: f64,
    pub mean_val_cross: f64,
    pub stderr_val_cross: f64,
    pub samples: usize,
    /// `2(k-1)` for even `k`, `2k` for odd `k`.
    pub exact_factor: f64,
    /// Right side with the exact matching factor, plus 2.576 standard errors.
    pub rhs_exact: f64,
    /// Right side with the factor `2k`.
    pub rhs_2k: f64,
    pub pass_exact: bool,
    pub pass_2k: bool,
}

/// `val(Ψ^(t))^2 <= diag + |P_t| * factor * E_M val(f_M)` with the mean over
/// `samples` uniform matchings.
pub fn check_squaring(
    fam: &MatchingFamily,
    psi: &XorInstance,
    part: &Partition,
    b: &[u32],
    samples: usize,
    seed_value: u64,
) -> Result<SquaringCheck> {
    let t = psi.level.ok_or_else(|| Error::invalid("squaring check needs a partitioned instance"))?;
    let k = psi.heads.len();
    let val_psi = brute_force_val_psi(psi, part.pieces.len(), b)?;
    let mut rng = seed::rng(seed_value, "squaring-matchings");
    let mut vals = Vec::with_capacity(samples);
    let mut diag = 0u128;
    for _ in 0..samples.max(1) {
        let m = DirectedMatching::random(k, &mut rng);
        let paired = cross_terms(fam, psi, part, &m, b)?;
        diag = paired.diagonal_bound;
        vals.push(brute_force_val_cross(psi, &paired)? as f64);
    }
    let cnt = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / cnt;
    let var = if vals.len() > 1 { vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (cnt - 1.0) } else { 0.0 };
    let stderr = (var / cnt).sqrt();
    let level_pieces = part.count_at(t) as f64;
    let exact_factor = if k.is_multiple_of(2) { 2.0 * (k as f64 - 1.0) } else { 2.0 * k as f64 };
    let lhs = (val_psi as f64).powi(2);
    let diag = diag as f64;
    let rhs_exact = diag + level_pieces * exact_factor * (mean + 2.576 * stderr);
    let rhs_2k = diag + level_pieces * 2.0 * k as f64 * (mean + 2.576 * stderr);
    Ok(SquaringCheck {
        level: t,
        val_psi,
        lhs,
        diagonal_bound: diag,
        mean_val_cross: mean,
        stderr_val_cross: stderr,
        samples: vals.len(),
        exact_factor,
        rhs_exact,
        rhs_2k,
        pass_exact: lhs <= rhs_exact,
        pass_2k: lhs <= rhs_2k,
    })
}
