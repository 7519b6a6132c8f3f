//! End-to-end refutation run with its numeric inequality chain.

use rand::Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use super::endgame::{extract_2ldc, verify_codewords};
use super::{spectral_norm, PowerConfig};
use crate::chains::{build_chains, DEFAULT_MAX_CHAINS};
use crate::formulas::{
    build_phi, build_psi, check_squaring, cross_terms, eval_cross, DirectedMatching, DEFAULT_MAX_CONSTRAINTS,
};
use crate::instances::{solution_space, MatchingFamily};
use crate::kikuchi::{quadratic_form_check, KikuchiBudget, KikuchiOperator};
use crate::partition::{decompose, DecomposeConfig, GreedyMode};
use crate::pruning::{removal_bound, PruneParams};
use crate::{seed, Error, Result, VERSION};

#[derive(Clone, Debug)]
pub struct CertifyConfig {
    pub r: usize,
    pub ell: usize,
    pub d: u64,
    /// Sampled `(M, b)` draws for the numeric chain.
    pub trials: usize,
    pub seed: u64,
    /// Forces the level instead of the most populated one.
    pub level: Option<usize>,
    /// Overrides the pruning threshold formula.
    pub threshold: Option<f64>,
    pub gamma: f64,
    pub big_gamma: f64,
    pub c: f64,
    pub mode: GreedyMode,
    pub max_chains: u64,
    pub max_constraints: u64,
    pub budget: KikuchiBudget,
    /// Basis codewords lifted for the edge check.
    pub max_codewords: usize,
    /// Largest `n` for exhaustive value computations.
    pub exact_value_max_n: usize,
}

impl CertifyConfig {
    pub fn new(r: usize, ell: usize, d: u64) -> Self {
        CertifyConfig {
            r,
            ell,
            d,
            trials: 4,
            seed: 0,
            level: None,
            threshold: None,
            gamma: 0.1,
            big_gamma: 1.0,
            c: 1.0,
            mode: GreedyMode::default(),
            max_chains: DEFAULT_MAX_CHAINS,
            max_constraints: DEFAULT_MAX_CONSTRAINTS,
            budget: KikuchiBudget::default(),
            max_codewords: 16,
            exact_value_max_n: 14,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainItem {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl ChainItem {
    fn le(name: &str, lhs: f64, rhs: f64) -> Self {
        ChainItem { name: name.to_string(), lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-9) + 1e-9 }
    }

    fn eq(name: &str, lhs: f64, rhs: f64) -> Self {
        ChainItem { name: name.to_string(), lhs, rhs, holds: lhs == rhs }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub version: &'static str,
    pub params: Value,
    pub stage_metrics: Value,
    pub inequality_chain: Vec<ChainItem>,
    pub k_bound: u64,
    /// Bound from the 2-query route alone; `None` when it is vacuous.
    pub k_ldc: Option<u64>,
    pub k_true: u64,
    pub sound: bool,
    pub sound_ldc: bool,
    pub seed: u64,
}

impl Certificate {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes") + "\n"
    }

    pub fn chain_holds(&self) -> bool {
        self.inequality_chain.iter().all(|c| c.holds)
    }
}

/// Keeps the worst instance of a repeated inequality.
fn worst(items: &mut Vec<ChainItem>, item: ChainItem) {
    match items.iter_mut().find(|c| c.name == item.name) {
        Some(prev) => {
            if (!item.holds && prev.holds) || (item.holds == prev.holds && item.lhs - item.rhs > prev.lhs - prev.rhs) {
                *prev = item;
            }
        }
        None => items.push(item),
    }
}

/// `2 floor(2 log2(2N) / g) + 1`, saturating.
fn ldc_bound(dim: u128, min_fraction: f64) -> Option<u64> {
    if min_fraction <= 0.0 {
        return None;
    }
    let q = (2.0 * (2.0 * dim as f64).log2() / min_fraction).floor();
    Some(if q >= (u64::MAX / 4) as f64 { u64::MAX } else { 2 * q as u64 + 1 })
}

/// Runs chains, decomposition, level formulas, Kikuchi operators, pruning
/// and the 2-query reduction, and reports each inequality numerically.
pub fn certify(fam: &MatchingFamily, cfg: &CertifyConfig) -> Result<Certificate> {
    if fam.field_char != 2 {
        return Err(Error::invalid("certification runs over F2 families"));
    }
    let n = fam.n;
    let sol = solution_space(fam).map_err(|e| e.in_stage("solution space"))?;
    let heads = sol.info_set.clone();
    let k = heads.len();
    let m_max = fam.max_matching_size();
    let mut params = Map::new();
    params.insert("n".into(), json!(n));
    params.insert("m_max".into(), json!(m_max));
    params.insert("r".into(), json!(cfg.r));
    params.insert("ell".into(), json!(cfg.ell));
    params.insert("d".into(), json!(cfg.d));
    params.insert("trials".into(), json!(cfg.trials));
    params.insert("gamma".into(), json!(cfg.gamma));
    params.insert("big_gamma".into(), json!(cfg.big_gamma));
    params.insert("c".into(), json!(cfg.c));
    params.insert("greedy_mode".into(), json!(format!("{:?}", cfg.mode)));
    params.insert("max_chains".into(), json!(cfg.max_chains));
    params.insert("max_constraints".into(), json!(cfg.max_constraints));
    params.insert("max_dim".into(), json!(cfg.budget.max_materialize_dim.to_string()));
    params.insert("max_nnz".into(), json!(cfg.budget.max_nnz.to_string()));
    let mut metrics = Map::new();
    let mut chain = Vec::new();
    metrics.insert("k_true".into(), json!(k));

    let cs = build_chains(fam, cfg.r, cfg.max_chains).map_err(|e| e.in_stage("chains"))?;
    metrics.insert("chains".into(), json!(cs.len()));
    let part = decompose(fam, &cs, &DecomposeConfig { mode: cfg.mode, ..DecomposeConfig::new(cfg.d) })
        .map_err(|e| e.in_stage("decompose"))?;
    let per_level: Vec<usize> = (0..=cfg.r).map(|t| part.count_at(t)).collect();
    metrics.insert("pieces_per_level".into(), json!(per_level));

    let phi = build_phi(fam, &cs, &heads, cfg.max_constraints).map_err(|e| e.in_stage("formulas"))?;
    let mut psi_counts = Vec::with_capacity(cfg.r + 1);
    let mut psis = Vec::with_capacity(cfg.r + 1);
    for t in 0..=cfg.r {
        let psi = build_psi(fam, &cs, &part, &heads, t, cfg.max_constraints).map_err(|e| e.in_stage("formulas"))?;
        psi_counts.push(psi.len());
        psis.push(psi);
    }
    metrics.insert("phi_constraints".into(), json!(phi.len()));
    metrics.insert("psi_constraints".into(), json!(psi_counts));
    if let Some(m) = fam.uniform_size() {
        let expected = k as f64 * (3.0 * m as f64).powi(cfg.r as i32 + 1);
        chain.push(ChainItem::eq("|Phi| = k (3m)^(r+1)", phi.len() as f64, expected));
    }
    chain.push(ChainItem::eq("sum_t |Psi_t| = |Phi|", psi_counts.iter().sum::<usize>() as f64, phi.len() as f64));
    let level = match cfg.level {
        Some(t) if t <= cfg.r => t,
        Some(t) => return Err(Error::invalid(format!("level {t} above r = {}", cfg.r))),
        None => (0..=cfg.r).rev().max_by_key(|&t| psi_counts[t]).unwrap_or(0),
    };
    params.insert("level".into(), json!(level));
    let psi = &psis[level];
    chain.push(ChainItem::le(
        "|Phi| / (r+1) <= |Psi_t|",
        phi.len() as f64 / (cfg.r + 1) as f64,
        psi.len() as f64,
    ));

    let prune_params = PruneParams {
        n,
        r: cfg.r,
        t: level,
        ell: cfg.ell,
        d: cfg.d as f64,
        delta: m_max.max(1) as f64 / n as f64,
        gamma: cfg.gamma,
        big_gamma: cfg.big_gamma,
        c: cfg.c,
    };
    let threshold = cfg.threshold.unwrap_or_else(|| prune_params.threshold());
    params.insert("threshold".into(), json!(threshold));
    params.insert("threshold_source".into(), json!(if cfg.threshold.is_some() { "override" } else { "formula" }));

    let mut k_ldc: Option<u64> = None;
    if k >= 2 {
        let mut rng = seed::rng(cfg.seed, "certify-trials");
        let mut sigma_sum = 0.0;
        let mut first_b = None;
        let mut dims = None;
        for _ in 0..cfg.trials {
            let matching = DirectedMatching::random(k, &mut rng);
            let coeffs: Vec<u32> = (0..sol.dimension).map(|_| rng.gen_range(0..2)).collect();
            let x = sol.codeword_with(&coeffs);
            let b: Vec<u32> = heads.iter().map(|&h| x[h as usize]).collect();
            first_b.get_or_insert_with(|| b.clone());
            let paired = cross_terms(fam, psi, &part, &matching, &b).map_err(|e| e.in_stage("cross terms"))?;
            worst(&mut chain, ChainItem::eq("f_M(x) = pair count at codewords", eval_cross(psi, &paired, &x) as f64, paired.pair_count as f64));
            let op = KikuchiOperator::new(psi, &paired, cfg.ell, cfg.budget).map_err(|e| e.in_stage("kikuchi"))?;
            let qf = quadratic_form_check(&op, psi, &paired, &x);
            worst(&mut chain, ChainItem::eq("x'^T A x' = sum D_pair psi psi", qf.lhs as f64, qf.rhs_exact as f64));
            let sup = op.support_matrix().map_err(|e| e.in_stage("kikuchi"))?;
            let est = spectral_norm(&sup.csr, &PowerConfig { seed: cfg.seed, ..PowerConfig::default() });
            sigma_sum += est.sigma_max;
            let support_bound = ((sup.rows.len() * sup.cols.len()) as f64).sqrt() * est.sigma_max;
            worst(&mut chain, ChainItem::le("x'^T A x' <= sqrt(|R||C|) sigma_max", qf.lhs as f64, support_bound));
            worst(&mut chain, ChainItem::le("sqrt(|R||C|) sigma_max <= N sigma_max", support_bound, op.dim() as f64 * est.sigma_max));
            dims.get_or_insert((op.dim(), op.d_formula(), sup.csr.nnz()));
        }
        if let Some((dim, d_entries, nnz)) = dims {
            metrics.insert("N".into(), json!(dim.to_string()));
            metrics.insert("D".into(), json!(d_entries.to_string()));
            metrics.insert("nnz_first_trial".into(), json!(nnz));
            metrics.insert("mean_sigma_max".into(), json!(sigma_sum / cfg.trials as f64));
        }
        if n <= cfg.exact_value_max_n {
            let b = first_b.clone().unwrap_or_else(|| vec![0; k]);
            let sq = check_squaring(fam, psi, &part, &b, cfg.trials.max(1), cfg.seed).map_err(|e| e.in_stage("squaring"))?;
            chain.push(ChainItem::le("val(Psi_t)^2 <= diag + |P_t| 2(k-1) E_M val(f_M)", sq.lhs, sq.rhs_exact));
            metrics.insert("val_psi".into(), json!(sq.val_psi));
        }

        // Reduction to a 2-query code on one matching.
        let mut rng = seed::rng(cfg.seed, "certify-ldc");
        let matching = DirectedMatching::random(k, &mut rng);
        let paired = cross_terms(fam, psi, &part, &matching, &vec![0; k]).map_err(|e| e.in_stage("cross terms"))?;
        let op = KikuchiOperator::new(psi, &paired, cfg.ell, cfg.budget).map_err(|e| e.in_stage("kikuchi"))?;
        // The formula threshold, then no pruning at all; both routes bound k.
        for (route, delta) in [("formula", threshold), ("unpruned", f64::INFINITY)] {
            let ext = extract_2ldc(&op, &matching, delta).map_err(|e| e.in_stage("pruning"))?;
            let bad: usize = ext.pairs.iter().map(|p| p.bad_rows + p.bad_cols).sum();
            let max_degree = ext.pairs.iter().map(|p| p.max_degree).max().unwrap_or(0);
            let tag = |name: &str| format!("{name} [{route}]");
            if delta.is_finite() {
                chain.push(ChainItem::le(&tag("max pruned degree <= Delta"), max_degree as f64, delta.max(0.0)));
                chain.push(ChainItem::le(
                    &tag("removed entries <= |B| (2 ell)^(2r+2-t)"),
                    ext.removed_entries as f64,
                    removal_bound(bad as u128, cfg.ell, op.arity),
                ));
            }
            let slack = ext
                .pairs
                .iter()
                .map(|p| (p.matching_size * p.max_degree) as f64 - p.edges_pruned as f64)
                .fold(0.0, f64::min);
            chain.push(ChainItem::le(&tag("|E(G')| - |G''| max degree <= 0"), -slack, 0.0));
            chain.push(ChainItem::le(&tag("delta' k' <= 2 log2(2N)"), ext.gkst.lhs, ext.gkst.rhs));
            if n <= 128 {
                let cw = verify_codewords(&op, &ext, &sol, &heads, cfg.max_codewords);
                chain.push(ChainItem::eq(&tag("matched edges violated by basis codewords"), cw.violations as f64, 0.0));
                metrics.insert(tag("codeword_edges_checked"), json!(cw.edges));
            }
            metrics.insert(tag("ldc_pairs"), json!(ext.k_prime));
            metrics.insert(tag("ldc_edges"), json!(ext.pairs.iter().map(|p| p.edges).sum::<usize>()));
            metrics.insert(tag("ldc_edges_pruned"), json!(ext.pairs.iter().map(|p| p.edges_pruned).sum::<usize>()));
            metrics.insert(tag("ldc_removed_entries"), json!(ext.removed_entries));
            metrics.insert(tag("ldc_bad_support"), json!(bad));
            metrics.insert(tag("ldc_max_degree"), json!(max_degree));
            metrics.insert(tag("ldc_matching_sizes"), json!(ext.pairs.iter().map(|p| p.matching_size).collect::<Vec<_>>()));
            metrics.insert(tag("delta_prime"), json!(ext.delta_prime));
            metrics.insert(tag("min_fraction"), json!(ext.min_fraction));
            let bound = ldc_bound(ext.dim, ext.min_fraction);
            metrics.insert(tag("k_ldc"), json!(bound));
            k_ldc = match (k_ldc, bound) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
        }
    } else {
        metrics.insert("skipped".into(), json!("fewer than two information coordinates"));
    }

    let k_bound = k_ldc.map_or(n as u64, |b| b.min(n as u64));
    let k_true = k as u64;
    chain.push(ChainItem::le("k_true <= k_bound", k_true as f64, k_bound as f64));
    Ok(Certificate {
        version: VERSION,
        params: Value::Object(params),
        stage_metrics: Value::Object(metrics),
        inequality_chain: chain,
        k_bound,
        k_ldc,
        k_true,
        sound: k_bound >= k_true,
        sound_ldc: k_ldc.is_none_or(|b| b >= k_true),
        seed: cfg.seed,
    })
}
