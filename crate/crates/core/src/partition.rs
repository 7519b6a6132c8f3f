//! Greedy contiguously regular partition of the `r`-chain hypergraph and an
//! independent checker for its defining properties.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::chains::{build_chains, contains_unchecked, negate_chain, ChainRef, ChainSet, Pattern};
use crate::instances::MatchingFamily;
use crate::seed;
use crate::{Error, Result};

/// How a piece came to exist in the final partition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// A tail piece `(⋆, ..., ⋆, w)` carried from the 0-chains.
    Initialize,
    /// Split off at an earlier stage and then extended to full length.
    Extend,
    /// Split off at the last stage; holds exactly `d^{|Q|-1}` chains.
    GreedyFix,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Initialize => "initialize",
            Provenance::Extend => "extend",
            Provenance::GreedyFix => "greedy-fix",
        }
    }
}

/// Which parent pieces a complete pattern `Q'` may split.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GreedyMode {
    /// Every parent piece whose pattern is contained in `Q'`.
    #[default]
    AllParents,
    /// Only parents `(⋆, Q)` with `Q` complete, as the greedy loop is
    /// literally phrased. Can break the suffix bound on heavy pairs.
    CompleteParents,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Piece {
    pub pattern: Pattern,
    pub label: u32,
    pub provenance: Provenance,
    /// Stage `t` at which the piece was created (0 for tail pieces).
    pub created_at: usize,
    /// Sorted chain ids into the `r`-chain set.
    pub chains: Vec<u32>,
}

impl Piece {
    pub fn key(&self) -> String {
        format!("{}/{}", self.pattern, self.label)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub r: usize,
    pub d: u64,
    pub mode: GreedyMode,
    /// Sorted by `(pattern, label)`.
    pub pieces: Vec<Piece>,
}

#[derive(Clone, Copy, Debug)]
pub struct DecomposeConfig {
    pub d: u64,
    pub mode: GreedyMode,
    pub max_pieces: usize,
}

impl DecomposeConfig {
    pub fn new(d: u64) -> Self {
        DecomposeConfig { d, mode: GreedyMode::default(), max_pieces: 10_000_000 }
    }
}

/// Working piece during the greedy stages; chain ids refer to the current
/// stage's chain set.
struct Working {
    pattern: Pattern,
    label: u32,
    created_at: usize,
    chains: Vec<u32>,
}

/// Runs the iterative greedy fixing over `cs` (an `r`-chain set of `fam`).
pub fn decompose(fam: &MatchingFamily, cs: &ChainSet, cfg: &DecomposeConfig) -> Result<Partition> {
    if cfg.d == 0 {
        return Err(Error::invalid("regularity parameter d must be at least 1"));
    }
    let r = cs.t;
    let mut pieces: Vec<Working> = (0..fam.n as u32)
        .map(|w| Working { pattern: Pattern(vec![Some(w)]), label: 1, created_at: 0, chains: vec![w] })
        .collect();
    let mut prev = build_chains(fam, 0, u64::MAX)?;
    for t in 1..=r {
        let cur = if t == r { None } else { Some(build_chains(fam, t, u64::MAX)?) };
        let cur_ref = cur.as_ref().unwrap_or(cs);
        pieces = extend_pieces(fam, &prev, cur_ref, pieces);
        greedy_fix(cur_ref, t, cfg, &mut pieces)?;
        if let Some(c) = cur {
            prev = c;
        }
    }
    let mut out: Vec<Piece> = pieces
        .into_iter()
        .filter(|p| !p.chains.is_empty())
        .map(|p| {
            let provenance = match p.created_at {
                0 => Provenance::Initialize,
                s if s == r => Provenance::GreedyFix,
                _ => Provenance::Extend,
            };
            Piece { pattern: p.pattern, label: p.label, provenance, created_at: p.created_at, chains: p.chains }
        })
        .collect();
    out.sort_by(|a, b| (&a.pattern, a.label).cmp(&(&b.pattern, b.label)));
    Ok(Partition { r, d: cfg.d, mode: cfg.mode, pieces: out })
}

/// Maps every chain of `cur` to the piece holding its one-link suffix.
fn extend_pieces(fam: &MatchingFamily, prev: &ChainSet, cur: &ChainSet, pieces: Vec<Working>) -> Vec<Working> {
    let mut owner = vec![u32::MAX; prev.len()];
    for (i, p) in pieces.iter().enumerate() {
        for &c in &p.chains {
            owner[c as usize] = i as u32;
        }
    }
    let mut next: Vec<Working> = pieces
        .into_iter()
        .map(|p| {
            let mut e = vec![None];
            e.extend(p.pattern.0);
            Working { pattern: Pattern(e), label: p.label, created_at: p.created_at, chains: Vec::new() }
        })
        .collect();
    // Chains of `cur` come grouped by (head, first link) and then by suffix
    // in the order of `prev`, so ids can be assigned by walking in step.
    let mut id = 0u32;
    for u in 0..fam.n as u32 {
        for (_, w) in crate::chains::links_from(fam, u) {
            for s in prev.with_head(w) {
                debug_assert_eq!(cur.get(id).suffix(1).0, prev.get(s).0);
                next[owner[s as usize] as usize].chains.push(id);
                id += 1;
            }
        }
    }
    debug_assert_eq!(id as usize, cur.len());
    next
}

/// Complete patterns `Q'` over `t`-chains that contain `ch` and extend
/// `parent`, each written as `t + 1` vertices.
fn complete_extensions(ch: ChainRef<'_>, parent: &Pattern, out: &mut Vec<Vec<u32>>) {
    let t = ch.len();
    out.clear();
    out.push(Vec::with_capacity(t + 1));
    for h in 1..=t {
        match parent.0[h - 1] {
            Some(v) => out.iter_mut().for_each(|q| q.push(v)),
            None => {
                let [a, b] = ch.pair(h);
                let mut more = out.clone();
                out.iter_mut().for_each(|q| q.push(a));
                more.iter_mut().for_each(|q| q.push(b));
                out.extend(more);
            }
        }
    }
    out.iter_mut().for_each(|q| q.push(ch.tail()));
}

fn greedy_fix(cs: &ChainSet, t: usize, cfg: &DecomposeConfig, pieces: &mut Vec<Working>) -> Result<()> {
    let quota = cfg.d.checked_pow(t as u32).unwrap_or(u64::MAX);
    // (Q', parent index, chain id) for every parent allowed to split.
    let mut groups: Vec<(Vec<u32>, u32, u32)> = Vec::new();
    let mut buf = Vec::new();
    for (pi, p) in pieces.iter().enumerate() {
        if cfg.mode == GreedyMode::CompleteParents && p.pattern.size() != t {
            continue;
        }
        for &c in &p.chains {
            complete_extensions(cs.get(c), &p.pattern, &mut buf);
            for q in buf.drain(..) {
                groups.push((q, pi as u32, c));
            }
        }
    }
    groups.sort_unstable();
    let mut moved = vec![false; cs.len()];
    let mut labels: HashMap<Vec<u32>, u32> = HashMap::new();
    let mut fresh: Vec<Working> = Vec::new();
    let mut start = 0;
    while start < groups.len() {
        let mut end = start;
        while end < groups.len() && groups[end].0 == groups[start].0 && groups[end].1 == groups[start].1 {
            end += 1;
        }
        if (end - start) as u64 > quota {
            let q = &groups[start].0;
            let mut residual: Vec<u32> = groups[start..end].iter().map(|g| g.2).filter(|&c| !moved[c as usize]).collect();
            while residual.len() as u64 > quota {
                let take: Vec<u32> = residual.drain(..quota as usize).collect();
                for &c in &take {
                    moved[c as usize] = true;
                }
                let label = labels.entry(q.clone()).or_insert(0);
                *label += 1;
                fresh.push(Working {
                    pattern: Pattern(q.iter().map(|&v| Some(v)).collect()),
                    label: *label,
                    created_at: t,
                    chains: take,
                });
                if pieces.len() + fresh.len() > cfg.max_pieces {
                    return Err(Error::budget("partition", "piece count", pieces.len() + fresh.len(), cfg.max_pieces));
                }
            }
        }
        start = end;
    }
    for p in pieces.iter_mut() {
        p.chains.retain(|&c| !moved[c as usize]);
    }
    pieces.extend(fresh);
    Ok(())
}

/// Tail-indexed partition: piece `(⋆, ..., ⋆, w)` holds every chain ending in `w`.
pub fn trivial_partition(cs: &ChainSet, d: u64) -> Partition {
    let mut by_tail: Vec<Vec<u32>> = vec![Vec::new(); cs.n];
    for (id, ch) in cs.iter().enumerate() {
        by_tail[ch.tail() as usize].push(id as u32);
    }
    let pieces = by_tail
        .into_iter()
        .enumerate()
        .filter(|(_, c)| !c.is_empty())
        .map(|(w, chains)| Piece {
            pattern: Pattern::tail_only(cs.t, w as u32),
            label: 1,
            provenance: Provenance::Initialize,
            created_at: 0,
            chains,
        })
        .collect();
    Partition { r: cs.t, d, mode: GreedyMode::default(), pieces }
}

impl Partition {
    /// Pieces with `|Q| = t + 1`.
    pub fn pieces_at(&self, t: usize) -> impl Iterator<Item = &Piece> + '_ {
        self.pieces.iter().filter(move |p| p.pattern.size() == t + 1)
    }

    pub fn count_at(&self, t: usize) -> usize {
        self.pieces_at(t).count()
    }

    pub fn total_chains(&self) -> usize {
        self.pieces.iter().map(|p| p.chains.len()).sum()
    }

    /// Piece index owning each chain id, when the pieces are disjoint.
    pub fn owners(&self, len: usize) -> Vec<u32> {
        let mut out = vec![u32::MAX; len];
        for (i, p) in self.pieces.iter().enumerate() {
            for &c in &p.chains {
                out[c as usize] = i as u32;
            }
        }
        out
    }

    /// JSON dump keyed by `"Q-string/p"`.
    pub fn to_json(&self, include_chains: bool) -> Value {
        let mut pieces = Map::new();
        for p in &self.pieces {
            let mut entry = Map::new();
            entry.insert("stage".into(), json!(p.provenance.as_str()));
            entry.insert("created_at".into(), json!(p.created_at));
            entry.insert("size".into(), json!(p.chains.len()));
            if include_chains {
                entry.insert("chains".into(), json!(p.chains));
            }
            pieces.insert(p.key(), Value::Object(entry));
        }
        json!({ "r": self.r, "d": self.d, "mode": self.mode, "pieces": pieces })
    }

    /// Image under the negation map; errors if some image is not a chain.
    pub fn negated(&self, fam: &MatchingFamily, cs: &ChainSet) -> Result<Partition> {
        let mut pieces = Vec::with_capacity(self.pieces.len());
        for p in &self.pieces {
            let mut chains = Vec::with_capacity(p.chains.len());
            for &c in &p.chains {
                let img = negate_chain(fam, cs.get(c).0);
                chains.push(cs.find(&img).ok_or_else(|| Error::invalid(format!("negation of chain {c} is not a chain")))?);
            }
            chains.sort_unstable();
            pieces.push(Piece { pattern: p.pattern.negated(fam), chains, ..p.clone() });
        }
        pieces.sort_by(|a, b| (&a.pattern, a.label).cmp(&(&b.pattern, b.label)));
        Ok(Partition { pieces, ..self.clone() })
    }
}

/// One property verdict with an optional counterexample.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PropertyCheck {
    pub name: String,
    pub pass: bool,
    pub witness: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartitionReport {
    pub checks: Vec<PropertyCheck>,
    /// `|P_t|` for `t = 0..=r`.
    pub piece_counts: Vec<usize>,
    /// Largest piece per `t`.
    pub max_piece_sizes: Vec<usize>,
    /// Largest suffix count seen per `|Q'|` (index `|Q'| - 1`).
    pub max_suffix_counts: Vec<u64>,
    pub negation: Option<Box<PartitionReport>>,
}

impl PartitionReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass) && self.negation.as_ref().is_none_or(|n| n.all_pass())
    }

    pub fn check(&self, name: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&PropertyCheck> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyConfig {
    pub d: u64,
    /// Largest `|Q'|` checked exhaustively for the suffix bound.
    pub suffix_cap: usize,
    /// Members sampled per piece and `|Q'|` beyond the cap.
    pub samples: usize,
    pub seed: u64,
}

impl VerifyConfig {
    pub fn new(d: u64) -> Self {
        VerifyConfig { d, suffix_cap: 4, samples: 64, seed: 0 }
    }
}

fn sat_pow(base: u128, exp: usize) -> u128 {
    (0..exp).fold(1u128, |acc, _| acc.saturating_mul(base))
}

struct Recorder {
    checks: Vec<PropertyCheck>,
}

impl Recorder {
    fn record(&mut self, name: &str, witness: Option<String>) {
        self.checks.push(PropertyCheck { name: name.to_string(), pass: witness.is_none(), witness });
    }
}

/// Checks every defining property of `part` over `cs`, and the same for its
/// negation image when the family has a nontrivial negation.
pub fn verify_partition(fam: &MatchingFamily, part: &Partition, cs: &ChainSet, cfg: &VerifyConfig) -> PartitionReport {
    let mut report = verify_one(fam, part, cs, cfg);
    if !fam.has_trivial_negation() {
        report.negation = Some(Box::new(match part.negated(fam, cs) {
            Ok(neg) => verify_one(fam, &neg, cs, cfg),
            Err(e) => PartitionReport {
                checks: vec![PropertyCheck { name: "negation image".into(), pass: false, witness: Some(e.to_string()) }],
                piece_counts: Vec::new(),
                max_piece_sizes: Vec::new(),
                max_suffix_counts: Vec::new(),
                negation: None,
            },
        }));
    }
    report
}

fn verify_one(fam: &MatchingFamily, part: &Partition, cs: &ChainSet, cfg: &VerifyConfig) -> PartitionReport {
    let r = cs.t;
    let d = cfg.d as u128;
    let n = fam.n as u128;
    let m_max = fam.max_matching_size() as u128;
    let mut rec = Recorder { checks: Vec::new() };

    // (1) disjoint cover and containment.
    let mut seen = vec![u32::MAX; cs.len()];
    let mut witness = None;
    'cover: for (i, p) in part.pieces.iter().enumerate() {
        if p.pattern.len() != r + 1 {
            witness = Some(format!("piece {} has pattern length {}", p.key(), p.pattern.len()));
            break;
        }
        for &c in &p.chains {
            if c as usize >= cs.len() {
                witness = Some(format!("piece {} holds unknown chain id {c}", p.key()));
                break 'cover;
            }
            if seen[c as usize] != u32::MAX {
                let other = &part.pieces[seen[c as usize] as usize];
                witness = Some(format!("chain {c} lies in {} and {}", other.key(), p.key()));
                break 'cover;
            }
            seen[c as usize] = i as u32;
            if !contains_unchecked(cs.get(c), &p.pattern) {
                witness = Some(format!("chain {:?} in {} does not contain its pattern", cs.get(c).0, p.key()));
                break 'cover;
            }
        }
    }
    if witness.is_none() {
        if let Some(c) = seen.iter().position(|&o| o == u32::MAX) {
            witness = Some(format!("chain {:?} is in no piece", cs.get(c as u32).0));
        }
    }
    rec.record("(1) disjoint cover", witness);

    // (2) contiguity.
    let bad = part.pieces.iter().find(|p| !p.chains.is_empty() && !p.pattern.is_contiguous());
    rec.record("(2) contiguity", bad.map(|p| format!("piece {} is not contiguous", p.key())));

    // (3) a single piece for each size-one pattern.
    let bad = part.pieces.iter().find(|p| !p.chains.is_empty() && p.pattern.size() == 1 && p.label != 1);
    rec.record("(3) single tail piece", bad.map(|p| format!("piece {} has |Q| = 1 and p > 1", p.key())));

    // (4) suffix counts.
    let results: Vec<(Vec<u64>, Option<String>)> = part
        .pieces
        .par_iter()
        .enumerate()
        .map(|(i, p)| suffix_check(cs, p, cfg, i as u64))
        .collect();
    let mut max_suffix_counts = vec![0u64; r + 1];
    let mut witness = None;
    for (maxes, w) in results {
        for (s, v) in maxes.into_iter().enumerate() {
            max_suffix_counts[s] = max_suffix_counts[s].max(v);
        }
        if witness.is_none() {
            witness = w;
        }
    }
    rec.record("(4) suffix regularity", witness);

    // (5) piece counts. The chain count n (3 max|H_u|)^t is what the bound
    // rests on; it equals the δ_eff form on uniform families.
    let piece_counts: Vec<usize> = (0..=r).map(|t| part.count_at(t)).collect();
    let max_piece_sizes: Vec<usize> =
        (0..=r).map(|t| part.pieces_at(t).map(|p| p.chains.len()).max().unwrap_or(0)).collect();
    let bad = (0..=r).find(|&t| {
        (piece_counts[t] as u128).saturating_mul(sat_pow(d, t)) > n.saturating_mul(sat_pow(3 * m_max, t))
    });
    rec.record(
        "(5) piece count",
        bad.map(|t| format!("|P_{t}| = {} exceeds n (3m)^{t} / d^{t} with m = {m_max}", piece_counts[t])),
    );

    // Size bounds implied by (1), (2), (4).
    let size_bound = |q: usize| n.saturating_mul(sat_pow(3 * m_max, r + 1 - q)).saturating_mul(sat_pow(d, q - 1));
    let bad = part.pieces.iter().find(|p| p.chains.len() as u128 > size_bound(p.pattern.size()));
    rec.record(
        "piece size bound",
        bad.map(|p| format!("|{}| = {} > {}", p.key(), p.chains.len(), size_bound(p.pattern.size()))),
    );
    let head_bound = |q: usize| sat_pow(3 * m_max, r + 1 - q).saturating_mul(sat_pow(d, q - 1));
    let mut witness = None;
    for p in part.pieces.iter().filter(|p| p.pattern.size() <= r) {
        let mut per_head: HashMap<u32, u128> = HashMap::new();
        for &c in &p.chains {
            *per_head.entry(cs.get(c).head()).or_default() += 1;
        }
        if let Some((u, cnt)) = per_head.into_iter().max_by_key(|&(u, c)| (c, std::cmp::Reverse(u))) {
            if cnt > head_bound(p.pattern.size()) {
                witness = Some(format!("head {u} has {cnt} chains in {} > {}", p.key(), head_bound(p.pattern.size())));
                break;
            }
        }
    }
    rec.record("per-head size bound", witness);

    let bad = part
        .pieces
        .iter()
        .filter(|p| p.provenance == Provenance::GreedyFix)
        .find(|p| p.chains.len() as u128 != sat_pow(d, p.pattern.size() - 1));
    rec.record(
        "greedy piece size",
        bad.map(|p| format!("{} has {} chains, expected d^{}", p.key(), p.chains.len(), p.pattern.size() - 1)),
    );

    PartitionReport { checks: rec.checks, piece_counts, max_piece_sizes, max_suffix_counts, negation: None }
}

/// Suffix-count bound for all contiguous `Q' ⊇ Q` of one piece. Returns the
/// largest count per `|Q'|` and the first violation.
fn suffix_check(cs: &ChainSet, p: &Piece, cfg: &VerifyConfig, salt: u64) -> (Vec<u64>, Option<String>) {
    let r = cs.t;
    let mut maxes = vec![0u64; r + 1];
    let q_size = p.pattern.size();
    if p.chains.is_empty() || q_size == 0 || !p.pattern.is_contiguous() {
        return (maxes, None);
    }
    let mut rng = seed::rng(cfg.seed ^ salt, "suffix-sample");
    for s in q_size..=r + 1 {
        let bound = sat_pow(cfg.d as u128, s - 1);
        let first = r + 1 - s;
        // Distinct (s-1)-link suffixes, which start at pivot w_{r+1-s}.
        let mut suffixes: Vec<&[u32]> = p.chains.iter().map(|&c| cs.get(c).suffix(first).0).collect();
        suffixes.sort_unstable();
        suffixes.dedup();
        // Positions 1..=s of the suffix pattern; the last is the tail.
        let free: Vec<usize> = (1..s).filter(|&j| p.pattern.0[first + j - 1].is_none()).collect();
        let key_of = |suf: &[u32], choice: usize| -> Vec<u32> {
            let ch = ChainRef(suf);
            let mut k = Vec::with_capacity(s);
            let mut bit = 0;
            for j in 1..s {
                match p.pattern.0[first + j - 1] {
                    Some(v) => k.push(v),
                    None => {
                        k.push(ch.pair(j)[(choice >> bit) & 1]);
                        bit += 1;
                    }
                }
            }
            k.push(ch.tail());
            k
        };
        if s <= cfg.suffix_cap {
            let mut counts: HashMap<Vec<u32>, u64> = HashMap::new();
            for suf in &suffixes {
                let mut keys: Vec<Vec<u32>> = (0..1usize << free.len()).map(|c| key_of(suf, c)).collect();
                keys.sort_unstable();
                keys.dedup();
                for k in keys {
                    *counts.entry(k).or_default() += 1;
                }
            }
            if let Some((k, &c)) = counts.iter().max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0))) {
                maxes[s - 1] = c;
                if c as u128 > bound {
                    let q = Pattern((0..=r).map(|i| if i < first { None } else { Some(k[i - first]) }).collect());
                    return (maxes, Some(format!("piece {}: {c} suffixes contain {q} > d^{}", p.key(), s - 1)));
                }
            }
        } else {
            for _ in 0..cfg.samples {
                let suf = suffixes[rng.gen_range(0..suffixes.len())];
                let key = key_of(suf, rng.gen_range(0..1usize << free.len()));
                let q = Pattern(key.iter().map(|&v| Some(v)).collect());
                let c = suffixes.iter().filter(|x| contains_unchecked(ChainRef(x), &q)).count() as u64;
                maxes[s - 1] = maxes[s - 1].max(c);
                if c as u128 > bound {
                    return (maxes, Some(format!("piece {}: {c} suffixes contain {q} > d^{} (sampled)", p.key(), s - 1)));
                }
            }
        }
    }
    (maxes, None)
}
