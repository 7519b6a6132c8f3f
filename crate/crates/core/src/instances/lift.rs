//! Unit-coefficient lift of a code over a prime field `F_q`.
//!
//! Symbol `(u, α)` stands for `α x_u`; a constraint
//! `x_u = α_1 x_{v_1} + α_2 x_{v_2} + α_3 x_{v_3}` becomes, for every unit
//! `β`, the unit-coefficient constraint `x_{(u,β)} = sum_i x_{(v_i, β α_i)}`.

use serde::{Deserialize, Serialize};

use super::family::{MatchingFamily, Triple};
use crate::{Error, Result};

/// One weighted correction constraint `x_u = sum_i α_i x_{v_i}` over `F_q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoefficientConstraint {
    pub u: u32,
    pub terms: [(u32, u32); 3],
}

/// Index of symbol `(u, α)` in the lifted family.
#[inline]
pub fn lifted_index(u: u32, alpha: u32, q: u32) -> u32 {
    u * (q - 1) + (alpha - 1)
}

/// Inverse of [`lifted_index`].
#[inline]
pub fn lifted_symbol(idx: u32, q: u32) -> (u32, u32) {
    (idx / (q - 1), idx % (q - 1) + 1)
}

fn is_prime(p: u32) -> bool {
    p >= 2 && (2..).take_while(|d: &u32| d * d <= p).all(|d| !p.is_multiple_of(d))
}

/// Builds the lifted family on `n(q-1)` symbols with negation
/// `(u, α) -> (u, -α)`.
pub fn lift_unit_coefficients(q: u32, n: usize, constraints: &[CoefficientConstraint]) -> Result<MatchingFamily> {
    if q == 2 {
        return Err(Error::invalid("lifting over F2 is the identity; use the family directly"));
    }
    if !is_prime(q) {
        return Err(Error::invalid(format!("q = {q} is not prime")));
    }
    let mut by_head: Vec<Vec<&CoefficientConstraint>> = vec![Vec::new(); n];
    for c in constraints {
        let vs = [c.terms[0].0, c.terms[1].0, c.terms[2].0];
        if c.u as usize >= n || vs.iter().any(|&v| v as usize >= n) {
            return Err(Error::invalid(format!("constraint at {} leaves [n]", c.u)));
        }
        if vs[0] == vs[1] || vs[1] == vs[2] || vs[0] == vs[2] || vs.contains(&c.u) {
            return Err(Error::invalid(format!("constraint at {} repeats a vertex", c.u)));
        }
        if c.terms.iter().any(|&(_, a)| a % q == 0) {
            return Err(Error::invalid(format!("constraint at {} has a zero coefficient", c.u)));
        }
        by_head[c.u as usize].push(c);
    }
    for (u, cs) in by_head.iter().enumerate() {
        let mut seen = std::collections::HashSet::new();
        for c in cs {
            for &(v, _) in &c.terms {
                if !seen.insert(v) {
                    return Err(Error::invalid(format!("constraints at {u} are not disjoint (vertex {v})")));
                }
            }
        }
    }
    let units = q - 1;
    let big_n = n * units as usize;
    let mut matchings: Vec<Vec<Triple>> = vec![Vec::new(); big_n];
    for (u, cs) in by_head.iter().enumerate() {
        for beta in 1..q {
            let head = lifted_index(u as u32, beta, q) as usize;
            for c in cs {
                let e = c.terms.map(|(v, a)| lifted_index(v, (beta as u64 * a as u64 % q as u64) as u32, q));
                matchings[head].push(e);
            }
        }
    }
    let negation = (0..big_n as u32)
        .map(|idx| {
            let (u, a) = lifted_symbol(idx, q);
            lifted_index(u, q - a, q)
        })
        .collect();
    Ok(MatchingFamily::new(big_n, matchings).with_field(q, negation))
}

/// Lifted codeword `x'_{(u,α)} = α x_u`.
pub fn lift_codeword(x: &[u32], q: u32) -> Vec<u32> {
    x.iter()
        .flat_map(|&xu| (1..q).map(move |a| (a as u64 * xu as u64 % q as u64) as u32))
        .collect()
}

/// Whether `x` satisfies the weighted constraint over `F_q`.
pub fn satisfies_weighted(x: &[u32], c: &CoefficientConstraint, q: u32) -> bool {
    let q = q as u64;
    let rhs: u64 = c.terms.iter().map(|&(v, a)| a as u64 * x[v as usize] as u64 % q).sum::<u64>() % q;
    rhs == x[c.u as usize] as u64 % q
}
