//! The linear 2-query decoding bound `δ k <= 2 log2 n`.

use serde::Serialize;

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GkstVerdict {
    /// `δ k <= 2 log2 n`.
    pub holds: bool,
    /// `δ k`.
    pub lhs: f64,
    /// `2 log2 n`.
    pub rhs: f64,
    /// Whether the average matching covers a `δ` fraction: `(1/k) sum |G_i| >= δ n`.
    pub premise: bool,
    /// `(1/k) sum |G_i| / n`.
    pub average_fraction: f64,
}

/// Checks the inequality for `k` matchings on `n` vertices at density `delta`.
///
/// The premise is reported, not enforced; only non-matching inputs error.
pub fn gkst_check(matchings: &[Vec<(u32, u32)>], n: usize, delta: f64) -> Result<GkstVerdict> {
    for (i, g) in matchings.iter().enumerate() {
        let mut seen = vec![false; n];
        for &(a, b) in g {
            if a == b || a as usize >= n || b as usize >= n {
                return Err(Error::invalid(format!("G_{i}: edge ({a}, {b}) is not a pair in [n]")));
            }
            for v in [a, b] {
                if std::mem::replace(&mut seen[v as usize], true) {
                    return Err(Error::invalid(format!("G_{i} is not a matching: vertex {v} repeats")));
                }
            }
        }
    }
    let k = matchings.len();
    let total: usize = matchings.iter().map(Vec::len).sum();
    let average_fraction = if k == 0 || n == 0 { 0.0 } else { total as f64 / k as f64 / n as f64 };
    let lhs = delta * k as f64;
    let rhs = 2.0 * (n as f64).log2();
    Ok(GkstVerdict {
        holds: lhs <= rhs,
        lhs,
        rhs,
        premise: k > 0 && average_fraction >= delta - 1e-12,
        average_fraction,
    })
}
