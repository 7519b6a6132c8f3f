//! Level-`ℓ` Kikuchi matrices of a cross-term instance, as implicit
//! operators over tuples of `ℓ`-subsets, plus a materialized sparse form,
//! the `∞→1` norm, and the basic even-arity matrix.
//!
//! Row and column tuples list their sets in the order
//! `S_0..S_{r-t}, S'_0..S'_{r-t}, R_1..R_t`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::combinatorics::{binom, mask_of, subsets_of, TupleIndexer};
use crate::formulas::{eval_cross, PairedInstance, XorInstance};
use crate::spectral::{spectral_norm, LinearOp, PowerConfig};
use crate::{Error, Result};

/// Guards for dense vectors and materialization.
#[derive(Clone, Copy, Debug)]
pub struct KikuchiBudget {
    /// Largest `N` for which dense vectors are allocated.
    pub max_dim: u128,
    /// Largest `N` for materialization.
    pub max_materialize_dim: u128,
    /// Largest expected nonzero count for materialization.
    pub max_nnz: u128,
}

impl Default for KikuchiBudget {
    fn default() -> Self {
        KikuchiBudget { max_dim: 1 << 26, max_materialize_dim: 1 << 21, max_nnz: 100_000_000 }
    }
}

/// The chain data a Kikuchi entry needs from one constraint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ChainView {
    pub pairs: Vec<[u32; 2]>,
    pub singles: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OpGroup {
    pub i: u32,
    pub j: u32,
    pub sign: i64,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
}

#[derive(Clone, Debug)]
pub struct KikuchiOperator {
    pub n: usize,
    pub ell: usize,
    pub r: usize,
    pub t: usize,
    pub arity: usize,
    pub indexer: TupleIndexer,
    pub chains: Vec<ChainView>,
    pub groups: Vec<OpGroup>,
    pub budget: KikuchiBudget,
}

/// One (row set, column set) choice at one tuple position.
#[derive(Clone, Copy, Debug)]
struct Choice {
    row: u128,
    col: u128,
    rmask: u128,
    cmask: u128,
}

/// `2^{2r+2-2t} C(n-2, ℓ-1)^{2r+2-t}`.
pub fn entry_count_formula(n: usize, ell: usize, r: usize, t: usize) -> Option<u128> {
    let base = binom(n as u64 - 2, ell as u64 - 1)?;
    let mut d = 1u128.checked_shl((2 * r + 2 - 2 * t) as u32)?;
    for _ in 0..2 * r + 2 - t {
        d = d.checked_mul(base)?;
    }
    Some(d)
}

/// Chain views of every constraint used by `paired`, with groups
/// re-indexed into that list.
pub fn collect_views(psi: &XorInstance, paired: &PairedInstance) -> (Vec<ChainView>, Vec<OpGroup>) {
    let mut remap: BTreeMap<u32, u32> = BTreeMap::new();
    let mut chains = Vec::new();
    let mut local = |c: u32, chains: &mut Vec<ChainView>| -> u32 {
        *remap.entry(c).or_insert_with(|| {
            let src = &psi.constraints[c as usize];
            chains.push(ChainView { pairs: src.pairs.clone(), singles: src.singles.clone() });
            chains.len() as u32 - 1
        })
    };
    let mut groups = Vec::with_capacity(paired.groups.len());
    for g in &paired.groups {
        let left = g.left.iter().map(|&c| local(c, &mut chains)).collect();
        let right = g.right.iter().map(|&c| local(c, &mut chains)).collect();
        groups.push(OpGroup { i: g.i, j: g.j, sign: if g.rhs == 0 { 1 } else { -1 }, left, right });
    }
    (chains, groups)
}

impl KikuchiOperator {
    pub fn new(psi: &XorInstance, paired: &PairedInstance, ell: usize, budget: KikuchiBudget) -> Result<Self> {
        let t = paired.level;
        let r = psi.r;
        let n = psi.n;
        if psi.field_char != 2 {
            return Err(Error::invalid("Kikuchi matrices are built over F2 instances"));
        }
        if ell == 0 || n < 2 * ell {
            return Err(Error::invalid(format!("level {ell} needs 1 <= ℓ and 2ℓ <= n = {n}")));
        }
        let arity = 2 * r + 2 - t;
        let indexer = TupleIndexer::new(n, ell, arity)?;
        let (chains, groups) = collect_views(psi, paired);
        Ok(KikuchiOperator { n, ell, r, t, arity, indexer, chains, groups, budget })
    }

    /// `N = C(n, ℓ)^{2r+2-t}`.
    pub fn dim(&self) -> u128 {
        self.indexer.total
    }

    pub fn pair_count(&self) -> u128 {
        self.groups.iter().map(|g| g.left.len() as u128 * g.right.len() as u128).sum()
    }

    /// Closed-form per-pair entry count.
    pub fn d_formula(&self) -> u128 {
        entry_count_formula(self.n, self.ell, self.r, self.t).unwrap_or(u128::MAX)
    }

    /// Exact entry count of one pair; differs from the closed form only when
    /// both chains drop the same vertex at some fixed position and `ℓ > 1`.
    pub fn d_pair(&self, a: &ChainView, b: &ChainView) -> u128 {
        let n = self.n as u64;
        let l = self.ell as u64 - 1;
        let s = binom(n - 2, l).unwrap();
        let mut d = 1u128 << (2 * (self.r - self.t + 1));
        for _ in 0..2 * (self.r - self.t + 1) {
            d = d.saturating_mul(s);
        }
        for (u, v) in a.singles.iter().zip(&b.singles) {
            d = d.saturating_mul(if u == v { binom(n - 1, l).unwrap() } else { s });
        }
        d
    }

    pub fn is_degenerate(&self, a: &ChainView, b: &ChainView) -> bool {
        self.ell > 1 && a.singles.iter().zip(&b.singles).any(|(u, v)| u == v)
    }

    /// Upper estimate of stored entries before merging.
    pub fn nnz_estimate(&self) -> u128 {
        let mut total = 0u128;
        for g in &self.groups {
            for &a in &g.left {
                for &b in &g.right {
                    total = total.saturating_add(self.d_pair(&self.chains[a as usize], &self.chains[b as usize]));
                }
            }
        }
        total
    }

    fn ground_without(&self, drop: &[u32]) -> u128 {
        let all = if self.n == 128 { u128::MAX } else { (1u128 << self.n) - 1 };
        all & !mask_of(drop)
    }

    fn choices(&self, pos: usize, a: &ChainView, b: &ChainView) -> Vec<Choice> {
        let block = self.r - self.t + 1;
        let place = self.indexer.place_value(pos);
        let mut out = Vec::new();
        let mut push = |rmask: u128, cmask: u128| {
            out.push(Choice {
                row: self.indexer.rank_set(rmask) * place,
                col: self.indexer.rank_set(cmask) * place,
                rmask,
                cmask,
            })
        };
        if pos < 2 * block {
            let c = if pos < block { a.pairs[pos] } else { b.pairs[pos - block] };
            for u in subsets_of(self.ground_without(&c), self.ell - 1) {
                let (x, y) = (1u128 << c[0], 1u128 << c[1]);
                push(x | u, y | u);
                push(y | u, x | u);
            }
        } else {
            let h = pos - 2 * block;
            let (u, v) = (a.singles[h], b.singles[h]);
            for s in subsets_of(self.ground_without(&[u, v]), self.ell - 1) {
                push(1u128 << u | s, 1u128 << v | s);
            }
        }
        out
    }

    /// Calls `f(row, col, rmask_parity, cmask_parity)` for every entry of
    /// the pair `(a, b)`; parities are taken against `xmask`.
    fn for_each_pair_entry(&self, a: &ChainView, b: &ChainView, xmask: u128, mut f: impl FnMut(u128, u128, u32, u32)) {
        let opts: Vec<Vec<Choice>> = (0..self.arity).map(|p| self.choices(p, a, b)).collect();
        if opts.iter().any(Vec::is_empty) {
            return;
        }
        let mut idx = vec![0usize; self.arity];
        loop {
            let (mut row, mut col, mut rp, mut cp) = (0u128, 0u128, 0u32, 0u32);
            for (p, &i) in idx.iter().enumerate() {
                let c = &opts[p][i];
                row += c.row;
                col += c.col;
                rp ^= (c.rmask & xmask).count_ones() & 1;
                cp ^= (c.cmask & xmask).count_ones() & 1;
            }
            f(row, col, rp, cp);
            let mut p = self.arity;
            loop {
                if p == 0 {
                    return;
                }
                p -= 1;
                idx[p] += 1;
                if idx[p] < opts[p].len() {
                    break;
                }
                idx[p] = 0;
            }
        }
    }

    /// Every stored entry `(row, col, value)` before merging duplicates.
    pub fn for_each_entry(&self, mut f: impl FnMut(u128, u128, i64)) {
        for g in &self.groups {
            for &a in &g.left {
                for &b in &g.right {
                    self.for_each_pair_entry(&self.chains[a as usize], &self.chains[b as usize], 0, |r, c, _, _| {
                        f(r, c, g.sign)
                    });
                }
            }
        }
    }

    /// Entries of a single constraint pair, sorted.
    pub fn pair_entries(&self, group: usize, a: usize, b: usize) -> Vec<(u128, u128)> {
        let g = &self.groups[group];
        let mut out = Vec::new();
        self.for_each_pair_entry(
            &self.chains[g.left[a] as usize],
            &self.chains[g.right[b] as usize],
            0,
            |r, c, _, _| out.push((r, c)),
        );
        out.sort_unstable();
        out
    }

    /// Operator restricted to the head pair `(i, j)`, with unit sign.
    pub fn restrict(&self, i: u32, j: u32) -> KikuchiOperator {
        let groups = self
            .groups
            .iter()
            .filter(|g| g.i == i && g.j == j)
            .map(|g| OpGroup { sign: 1, ..g.clone() })
            .collect();
        KikuchiOperator { groups, ..self.clone() }
    }

    /// Rank of the tuple with the `S` and `S'` blocks swapped.
    pub fn swap_blocks(&self, rank: u128) -> u128 {
        let mut sets = self.indexer.unrank(rank);
        let block = self.r - self.t + 1;
        for h in 0..block {
            sets.swap(h, block + h);
        }
        self.indexer.rank(&sets)
    }

    /// Monomial `∏ x_{S_h} x_{S'_h} ∏ x_{R_h}` of a row, as a bit.
    pub fn row_monomial(&self, rank: u128, xmask: u128) -> u32 {
        self.indexer.unrank(rank).iter().map(|s| (s & xmask).count_ones()).sum::<u32>() & 1
    }

    fn dense_dim(&self) -> Result<usize> {
        let n = self.dim();
        if n > self.budget.max_dim {
            return Err(Error::budget("kikuchi", "dense vector length N", n, self.budget.max_dim));
        }
        Ok(n as usize)
    }

    /// Exact sparse form, merging duplicate entries and dropping zeros.
    pub fn materialize(&self) -> Result<Csr> {
        let n = self.dim();
        if n > self.budget.max_materialize_dim {
            return Err(Error::budget("kikuchi", "materialized N", n, self.budget.max_materialize_dim));
        }
        let nnz = self.nnz_estimate();
        if nnz > self.budget.max_nnz {
            return Err(Error::budget("kikuchi", "expected nonzeros", nnz, self.budget.max_nnz));
        }
        let mut trip: Vec<(u32, u32, i64)> = Vec::with_capacity(nnz as usize);
        self.for_each_entry(|r, c, v| trip.push((r as u32, c as u32, v)));
        Ok(Csr::from_triplets(n as usize, n as usize, trip))
    }

    /// `x'ᵀ A x'` exactly, with `x` as F2 bits.
    pub fn quadratic_form(&self, x: &[u32]) -> i128 {
        let xmask = mask_of(&(0..self.n as u32).filter(|&v| x[v as usize] & 1 == 1).collect::<Vec<_>>());
        let mut total: i128 = 0;
        for g in &self.groups {
            for &a in &g.left {
                for &b in &g.right {
                    self.for_each_pair_entry(&self.chains[a as usize], &self.chains[b as usize], xmask, |_, _, rp, cp| {
                        total += if rp ^ cp == 0 { g.sign as i128 } else { -g.sign as i128 };
                    });
                }
            }
        }
        total
    }
}

/// Nonzero part of an operator on compressed indices: `csr` row `a` is
/// tuple rank `rows[a]`, column `b` is rank `cols[b]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupportMatrix {
    pub rows: Vec<u128>,
    pub cols: Vec<u128>,
    pub csr: Csr,
}

impl KikuchiOperator {
    /// Merged nonzeros on the row and column support, for operators whose
    /// `N` is too large to index densely.
    pub fn support_matrix(&self) -> Result<SupportMatrix> {
        let nnz = self.nnz_estimate();
        if nnz > self.budget.max_nnz {
            return Err(Error::budget("kikuchi", "expected nonzeros", nnz, self.budget.max_nnz));
        }
        let mut trip: Vec<(u128, u128, i64)> = Vec::with_capacity(nnz as usize);
        self.for_each_entry(|r, c, v| trip.push((r, c, v)));
        let mut rows: Vec<u128> = trip.iter().map(|e| e.0).collect();
        let mut cols: Vec<u128> = trip.iter().map(|e| e.1).collect();
        for v in [&mut rows, &mut cols] {
            v.sort_unstable();
            v.dedup();
        }
        let local = |v: &[u128], x: u128| v.binary_search(&x).unwrap() as u32;
        let compressed = trip.iter().map(|&(r, c, v)| (local(&rows, r), local(&cols, c), v)).collect();
        let csr = Csr::from_triplets(rows.len(), cols.len(), compressed);
        // Entries that cancelled may leave empty rows or columns behind.
        let keep_rows: Vec<usize> = csr.support_rows();
        let keep_cols: Vec<usize> = csr.transpose().support_rows();
        if keep_rows.len() == rows.len() && keep_cols.len() == cols.len() {
            return Ok(SupportMatrix { rows, cols, csr });
        }
        let col_map: BTreeMap<u32, u32> = keep_cols.iter().enumerate().map(|(k, &c)| (c as u32, k as u32)).collect();
        let mut trip = Vec::with_capacity(csr.nnz());
        for (k, &r) in keep_rows.iter().enumerate() {
            for (c, v) in csr.row(r) {
                trip.push((k as u32, col_map[&c], v));
            }
        }
        Ok(SupportMatrix {
            rows: keep_rows.iter().map(|&r| rows[r]).collect(),
            cols: keep_cols.iter().map(|&c| cols[c]).collect(),
            csr: Csr::from_triplets(keep_rows.len(), keep_cols.len(), trip),
        })
    }
}

/// Both sides of the quadratic-form identity at one `x`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct QuadraticCheck {
    pub lhs: i128,
    /// `D f_M(x)` with the closed-form `D`.
    pub rhs: i128,
    /// `Σ_pairs D_pair b_i b_j ψ_a ψ_b`, exact under degenerate pairs too.
    pub rhs_exact: i128,
    pub equal: bool,
    pub equal_exact: bool,
    pub degenerate_pairs: u128,
}

pub fn quadratic_form_check(op: &KikuchiOperator, psi: &XorInstance, paired: &PairedInstance, x: &[u32]) -> QuadraticCheck {
    let lhs = op.quadratic_form(x);
    let rhs = op.d_formula() as i128 * eval_cross(psi, paired, x) as i128;
    let sign_of = |c: &ChainView| -> i128 {
        let par = c.pairs.iter().flatten().chain(&c.singles).map(|&v| x[v as usize]).sum::<u32>() & 1;
        if par == 0 {
            1
        } else {
            -1
        }
    };
    let mut rhs_exact: i128 = 0;
    let mut degenerate_pairs = 0;
    for g in &op.groups {
        for &a in &g.left {
            for &b in &g.right {
                let (ca, cb) = (&op.chains[a as usize], &op.chains[b as usize]);
                if op.is_degenerate(ca, cb) {
                    degenerate_pairs += 1;
                }
                rhs_exact += g.sign as i128 * op.d_pair(ca, cb) as i128 * sign_of(ca) * sign_of(cb);
            }
        }
    }
    QuadraticCheck { lhs, rhs, rhs_exact, equal: lhs == rhs, equal_exact: lhs == rhs_exact, degenerate_pairs }
}

/// Implicit products with compensated accumulation per output coordinate.
impl LinearOp for KikuchiOperator {
    fn nrows(&self) -> usize {
        self.dense_dim().expect("dimension checked by caller")
    }

    fn ncols(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut acc = Compensated::new(y.len());
        self.for_each_entry(|r, c, v| acc.add(r as usize, v as f64 * x[c as usize]));
        acc.write(y);
    }

    fn apply_t(&self, x: &[f64], y: &mut [f64]) {
        let mut acc = Compensated::new(y.len());
        self.for_each_entry(|r, c, v| acc.add(c as usize, v as f64 * x[r as usize]));
        acc.write(y);
    }
}

impl KikuchiOperator {
    /// Fails early when dense vectors would exceed the budget.
    pub fn check_dense(&self) -> Result<usize> {
        self.dense_dim()
    }
}

/// Neumaier summation per coordinate.
struct Compensated {
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl Compensated {
    fn new(n: usize) -> Self {
        Compensated { sum: vec![0.0; n], comp: vec![0.0; n] }
    }

    #[inline]
    fn add(&mut self, i: usize, v: f64) {
        let s = self.sum[i];
        let t = s + v;
        if s.abs() >= v.abs() {
            self.comp[i] += (s - t) + v;
        } else {
            self.comp[i] += (v - t) + s;
        }
        self.sum[i] = t;
    }

    fn write(self, y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.sum[i] + self.comp[i];
        }
    }
}

/// Compressed sparse rows with integer values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    pub vals: Vec<i64>,
}

impl Csr {
    pub fn from_triplets(nrows: usize, ncols: usize, mut trip: Vec<(u32, u32, i64)>) -> Self {
        trip.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(u32, u32, i64)> = Vec::with_capacity(trip.len());
        for (r, c, v) in trip {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|e| e.2 != 0);
        let mut row_ptr = vec![0usize; nrows + 1];
        for &(r, _, _) in &merged {
            row_ptr[r as usize + 1] += 1;
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Csr {
            nrows,
            ncols,
            row_ptr,
            col_idx: merged.iter().map(|e| e.1).collect(),
            vals: merged.iter().map(|e| e.2).collect(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (u32, i64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col_idx[k], self.vals[k]))
    }

    pub fn get(&self, r: usize, c: u32) -> i64 {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        self.col_idx[lo..hi].binary_search(&c).map_or(0, |k| self.vals[lo + k])
    }

    pub fn transpose(&self) -> Csr {
        let mut trip = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                trip.push((c, r as u32, v));
            }
        }
        Csr::from_triplets(self.ncols, self.nrows, trip)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                m[(r, c as usize)] = v as f64;
            }
        }
        m
    }

    /// Rows with at least one nonzero.
    pub fn support_rows(&self) -> Vec<usize> {
        (0..self.nrows).filter(|&r| self.row_ptr[r + 1] > self.row_ptr[r]).collect()
    }

    /// Nonzeros per row.
    pub fn row_degrees(&self) -> Vec<usize> {
        (0..self.nrows).map(|r| self.row_ptr[r + 1] - self.row_ptr[r]).collect()
    }

    /// Coordinate list `row col value`, one entry per line, sorted.
    pub fn to_coo_text(&self) -> String {
        let mut out = String::new();
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                writeln!(out, "{r} {c} {v}").unwrap();
            }
        }
        out
    }
}

impl LinearOp for Csr {
    fn nrows(&self) -> usize {
        self.nrows
    }

    fn ncols(&self) -> usize {
        self.ncols
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = Compensated::new(1);
            for (c, v) in self.row(r) {
                acc.add(0, v as f64 * x[c as usize]);
            }
            *yr = acc.sum[0] + acc.comp[0];
        }
    }

    fn apply_t(&self, x: &[f64], y: &mut [f64]) {
        let mut acc = Compensated::new(y.len());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                acc.add(c as usize, v as f64 * x[r]);
            }
        }
        acc.write(y);
    }
}

/// Largest support side for exhaustive `∞→1` evaluation.
pub const INFTY_EXACT_MAX: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InftyToOne {
    /// `max_{x,y ∈ ±1} xᵀ A y`, when the smaller support side is small.
    pub exact: Option<i64>,
    pub sigma_max: f64,
    /// `N σ_max`.
    pub upper_dim: f64,
    /// `√(|rows| |cols|) σ_max` over the nonzero support.
    pub upper_support: f64,
    pub support_rows: usize,
    pub support_cols: usize,
}

/// `∞→1` norm: exact by Gray-code exhaustion over the smaller nonzero
/// support side, with spectral upper bounds.
pub fn infty_to_1(a: &Csr, power: &PowerConfig) -> InftyToOne {
    let est = spectral_norm(a, power);
    let at = a.transpose();
    let rows = a.support_rows();
    let cols = at.support_rows();
    // Enumerate signs on the smaller side; the other side takes |.|.
    let (small, other, small_idx) = if cols.len() <= rows.len() { (&at, a, cols.clone()) } else { (a, &at, rows.clone()) };
    let exact = (small_idx.len() <= INFTY_EXACT_MAX).then(|| {
        let _ = other;
        let mut z = vec![0i64; small.ncols];
        // Start from all +1 on the small side.
        for &s in &small_idx {
            for (o, v) in small.row(s) {
                z[o as usize] += v;
            }
        }
        let mut total: i64 = z.iter().map(|v| v.abs()).sum();
        let mut best = total;
        let mut sign = vec![1i64; small_idx.len()];
        // Fixing the last sign halves the work by the global sign symmetry.
        let free = small_idx.len().saturating_sub(1);
        for step in 1u64..1 << free {
            let k = step.trailing_zeros() as usize;
            let s = small_idx[k];
            for (o, v) in small.row(s) {
                let o = o as usize;
                let old = z[o].abs();
                z[o] -= 2 * sign[k] * v;
                total += z[o].abs() - old;
            }
            sign[k] = -sign[k];
            best = best.max(total);
        }
        best
    });
    InftyToOne {
        exact,
        sigma_max: est.sigma_max,
        upper_dim: a.nrows.max(a.ncols) as f64 * est.sigma_max,
        upper_support: ((rows.len() * cols.len()) as f64).sqrt() * est.sigma_max,
        support_rows: rows.len(),
        support_cols: cols.len(),
    }
}

/// Even-arity family: `edges[i]` lists the `q`-sets attached to head `i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EvenFamily {
    pub n: usize,
    pub q: usize,
    pub edges: Vec<Vec<Vec<u32>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvenReport {
    pub q: usize,
    pub ell: usize,
    pub dim: u128,
    /// `C(q, q/2) C(n-q, ℓ-q/2)` entries per hyperedge.
    pub d: u128,
    pub edge_count: usize,
    /// `edges · D / N`.
    pub avg_degree: f64,
}

/// `A = Σ_i b_i Σ_{C ∈ H_i} A_C` with `A_C(S, T) = 1` iff `S ⊕ T = C`.
pub fn build_basic_even_q(fam: &EvenFamily, b: &[u32], ell: usize, budget: &KikuchiBudget) -> Result<(Csr, EvenReport)> {
    let q = fam.q;
    if q % 2 == 1 || q == 0 {
        return Err(Error::invalid(format!("arity {q} is not even")));
    }
    if ell < q / 2 || ell > fam.n {
        return Err(Error::invalid(format!("level {ell} below q/2 = {}", q / 2)));
    }
    let idx = TupleIndexer::new(fam.n, ell, 1)?;
    if idx.total > budget.max_materialize_dim {
        return Err(Error::budget("kikuchi", "materialized N", idx.total, budget.max_materialize_dim));
    }
    let d = binom(q as u64, q as u64 / 2).unwrap() * binom((fam.n - q) as u64, (ell - q / 2) as u64).unwrap();
    let edge_count: usize = fam.edges.iter().map(Vec::len).sum();
    let nnz = d.saturating_mul(edge_count as u128);
    if nnz > budget.max_nnz {
        return Err(Error::budget("kikuchi", "expected nonzeros", nnz, budget.max_nnz));
    }
    let all = if fam.n == 128 { u128::MAX } else { (1u128 << fam.n) - 1 };
    let mut trip = Vec::with_capacity(nnz as usize);
    for (i, es) in fam.edges.iter().enumerate() {
        let sign = if b[i] & 1 == 0 { 1 } else { -1 };
        for e in es {
            let cm = mask_of(e);
            for half in subsets_of(cm, q / 2) {
                let rest = cm & !half;
                for u in subsets_of(all & !cm, ell - q / 2) {
                    trip.push((idx.rank_set(half | u) as u32, idx.rank_set(rest | u) as u32, sign));
                }
            }
        }
    }
    let n = idx.total as usize;
    let report =
        EvenReport { q, ell, dim: idx.total, d, edge_count, avg_degree: edge_count as f64 * d as f64 / idx.total as f64 };
    Ok((Csr::from_triplets(n, n, trip), report))
}
