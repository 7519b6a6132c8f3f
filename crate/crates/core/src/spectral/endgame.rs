//! Reduction of a pruned Kikuchi operator to a linear 2-query code: the
//! pruned graphs of every matched head pair, their maximum matchings, and
//! the two-query decoding inequality on `2N` coordinates.

use serde::Serialize;

use crate::formulas::DirectedMatching;
use crate::instances::{gkst_check, GkstVerdict, SolutionSpace};
use crate::kikuchi::KikuchiOperator;
use crate::matching::{hopcroft_karp, Bipartite};
use crate::pruning::DegreeContext;
use crate::{Error, Result};

/// Largest `2N` handed to the explicit matching checker.
pub const GKST_EXPLICIT_MAX: u128 = 1 << 22;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LdcPair {
    pub i: u32,
    pub j: u32,
    /// Edges of `G_{i,j}`.
    pub edges: usize,
    /// Edges of the pruned graph `G'_{i,j}`.
    pub edges_pruned: usize,
    pub bad_rows: usize,
    pub bad_cols: usize,
    pub max_degree: usize,
    /// `(row rank, column rank)` of every matched edge.
    #[serde(skip)]
    pub matched: Vec<(u128, u128)>,
    pub matching_size: usize,
    /// `|G''| · max degree >= |E(G')|`.
    pub koenig_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Extraction {
    pub threshold: f64,
    pub dim: u128,
    pub pairs: Vec<LdcPair>,
    pub k_prime: usize,
    /// `(1/k') Σ |G''| / (2N)`.
    pub delta_prime: f64,
    /// Smallest `|G''| / (2N)` over the matched pairs.
    pub min_fraction: f64,
    pub removed_entries: u64,
    pub gkst: GkstVerdict,
    /// Whether the verdict came from the explicit matching checker.
    pub gkst_explicit: bool,
}

/// Prunes every `A_{i,j}` of the matching at `threshold` (infinite keeps
/// every row), extracts maximum matchings and evaluates the 2-query
/// inequality.
pub fn extract_2ldc(op: &KikuchiOperator, matching: &DirectedMatching, threshold: f64) -> Result<Extraction> {
    let contexts: Vec<DegreeContext> = matching
        .0
        .iter()
        .flat_map(|&(i, j)| [DegreeContext::from_operator(op, i, j), DegreeContext::from_operator(op, j, i)])
        .collect();
    let over = |rank: u128| {
        let sets = op.indexer.unrank(rank);
        contexts.iter().any(|c| c.deg(&sets) as f64 > threshold)
    };
    let is_bad = |rank: u128| over(rank) || over(op.swap_blocks(rank));
    let mut pairs = Vec::with_capacity(matching.0.len());
    let mut removed_entries = 0u64;
    for &(i, j) in &matching.0 {
        let sub = op.restrict(i, j).support_matrix()?;
        let bad_row: Vec<bool> = sub.rows.iter().map(|&r| is_bad(r)).collect();
        let bad_col: Vec<bool> = sub.cols.iter().map(|&c| is_bad(c)).collect();
        let mut edges = Vec::with_capacity(sub.csr.nnz());
        for a in 0..sub.csr.nrows {
            for (b, _) in sub.csr.row(a) {
                if !bad_row[a] && !bad_col[b as usize] {
                    edges.push((a as u32, b));
                }
            }
        }
        removed_entries += (sub.csr.nnz() - edges.len()) as u64;
        let g = Bipartite::from_edges(sub.rows.len(), sub.cols.len(), &edges);
        let max_degree = g.max_left_degree().max(g.max_right_degree());
        if max_degree as f64 > threshold {
            return Err(Error::invalid(format!(
                "pruned graph of ({i}, {j}) has degree {max_degree} above the threshold {threshold}"
            )));
        }
        let m = hopcroft_karp(&g);
        let koenig_holds = m.len() * max_degree >= edges.len();
        pairs.push(LdcPair {
            i,
            j,
            edges: sub.csr.nnz(),
            edges_pruned: edges.len(),
            bad_rows: bad_row.iter().filter(|&&b| b).count(),
            bad_cols: bad_col.iter().filter(|&&b| b).count(),
            max_degree,
            matching_size: m.len(),
            matched: m.iter().map(|&(a, b)| (sub.rows[a as usize], sub.cols[b as usize])).collect(),
            koenig_holds,
        });
    }
    let dim = op.dim();
    let two_n = 2.0 * dim as f64;
    let k_prime = pairs.len();
    let total: usize = pairs.iter().map(|p| p.matching_size).sum();
    let delta_prime = if k_prime == 0 { 0.0 } else { total as f64 / k_prime as f64 / two_n };
    let min_fraction = pairs.iter().map(|p| p.matching_size as f64 / two_n).fold(f64::INFINITY, f64::min);
    let min_fraction = if min_fraction.is_finite() { min_fraction } else { 0.0 };
    let explicit = 2 * dim <= GKST_EXPLICIT_MAX;
    let gkst = if explicit {
        let graphs: Vec<Vec<(u32, u32)>> = pairs
            .iter()
            .map(|p| p.matched.iter().map(|&(s, t)| (s as u32, (dim + t) as u32)).collect())
            .collect();
        gkst_check(&graphs, (2 * dim) as usize, delta_prime)?
    } else {
        let lhs = delta_prime * k_prime as f64;
        let rhs = 2.0 * two_n.log2();
        GkstVerdict { holds: lhs <= rhs, lhs, rhs, premise: k_prime > 0, average_fraction: delta_prime }
    };
    Ok(Extraction {
        threshold,
        dim,
        pairs,
        k_prime,
        delta_prime,
        min_fraction,
        removed_entries,
        gkst,
        gkst_explicit: explicit,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CodewordCheck {
    pub codewords: usize,
    pub edges: usize,
    pub violations: usize,
}

/// Every matched edge `(S, T)` of pair `(i, j)` must satisfy
/// `x'_S + x'_T = x_{head i} + x_{head j}` for each basis codeword `x`,
/// where `x'` sums `x` over all sets of a tuple.
pub fn verify_codewords(op: &KikuchiOperator, ext: &Extraction, sol: &SolutionSpace, heads: &[u32], max_codewords: usize) -> CodewordCheck {
    let lifted = |rank: u128, xmask: u128| op.row_monomial(rank, xmask);
    let mut violations = 0;
    let mut edges = 0;
    let basis = &sol.basis[..sol.basis.len().min(max_codewords)];
    for x in basis {
        let xmask = x.iter().enumerate().filter(|(_, &v)| v & 1 == 1).fold(0u128, |m, (v, _)| m | 1u128 << v);
        for p in &ext.pairs {
            let rhs = (x[heads[p.i as usize] as usize] ^ x[heads[p.j as usize] as usize]) & 1;
            for &(s, t) in &p.matched {
                edges += 1;
                if lifted(s, xmask) ^ lifted(t, xmask) != rhs {
                    violations += 1;
                }
            }
        }
    }
    CodewordCheck { codewords: basis.len(), edges, violations }
}
