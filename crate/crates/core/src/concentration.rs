//! Scalar tail bounds and the tail inequality for partite polynomials with
//! bounded expected partial derivatives, with Monte Carlo validation.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::pruning::wilson99;
use crate::{seed, Error, Result};

/// Multilinear polynomial in `r` groups of `n` variables, with at most one
/// variable per group in each monomial and nonnegative coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PartitePolynomial {
    pub r: usize,
    pub n: usize,
    pub monomials: Vec<(u64, Vec<Option<u32>>)>,
}

/// A partial assignment: `(group, index)` pairs.
pub type Pattern = [(usize, u32)];

impl PartitePolynomial {
    pub fn new(r: usize, n: usize, monomials: Vec<(u64, Vec<Option<u32>>)>) -> Result<Self> {
        for (_, m) in &monomials {
            if m.len() != r || m.iter().flatten().any(|&v| v as usize >= n) {
                return Err(Error::invalid(format!("monomial {m:?} does not fit {r} groups of {n}")));
            }
        }
        Ok(PartitePolynomial { r, n, monomials })
    }

    /// `count` monomials with unit coefficients, each touching every group
    /// with probability `fill`, from a seeded stream.
    pub fn random(r: usize, n: usize, count: usize, fill: f64, seed_value: u64) -> Self {
        let mut rng = seed::rng(seed_value, "partite-polynomial");
        let monomials = (0..count)
            .map(|_| (1, (0..r).map(|_| rng.gen_bool(fill).then(|| rng.gen_range(0..n as u32))).collect()))
            .collect();
        PartitePolynomial { r, n, monomials }
    }

    /// `P(x)` with `x` given as one bit mask per group.
    pub fn eval(&self, x: &[u128]) -> u64 {
        self.monomials
            .iter()
            .filter(|(_, m)| m.iter().enumerate().all(|(g, v)| v.is_none_or(|i| x[g] >> i & 1 == 1)))
            .map(|(c, _)| c)
            .sum()
    }

    /// Partial derivative along `z` at `x`.
    pub fn derivative(&self, z: &Pattern, x: &[u128]) -> u64 {
        self.monomials
            .iter()
            .filter(|(_, m)| contains(m, z))
            .filter(|(_, m)| {
                m.iter().enumerate().all(|(g, v)| z.iter().any(|&(zg, _)| zg == g) || v.is_none_or(|i| x[g] >> i & 1 == 1))
            })
            .map(|(c, _)| c)
            .sum()
    }

    /// Product of polynomials whose monomials use disjoint groups.
    pub fn product(&self, other: &Self) -> Result<Self> {
        let used = |p: &Self| -> BTreeSet<usize> {
            p.monomials.iter().flat_map(|(_, m)| m.iter().enumerate().filter(|(_, v)| v.is_some()).map(|(g, _)| g)).collect()
        };
        if self.r != other.r || self.n != other.n || !used(self).is_disjoint(&used(other)) {
            return Err(Error::invalid("product needs matching shapes and disjoint groups"));
        }
        let monomials = self
            .monomials
            .iter()
            .flat_map(|(ca, ma)| {
                other.monomials.iter().map(move |(cb, mb)| (ca * cb, ma.iter().zip(mb).map(|(a, b)| a.or(*b)).collect()))
            })
            .collect();
        Ok(PartitePolynomial { r: self.r, n: self.n, monomials })
    }
}

fn contains(m: &[Option<u32>], z: &Pattern) -> bool {
    z.iter().all(|&(g, i)| m[g] == Some(i))
}

fn check_pattern(p: &PartitePolynomial, z: &Pattern) -> Result<()> {
    let mut groups = BTreeSet::new();
    for &(g, i) in z {
        if g >= p.r || i as usize >= p.n {
            return Err(Error::invalid(format!("({g}, {i}) outside {} groups of {}", p.r, p.n)));
        }
        if !groups.insert(g) {
            return Err(Error::invalid(format!("group {g} appears twice in the pattern")));
        }
    }
    Ok(())
}

/// `μ_Z = Σ_{m ⊇ Z} c_m p^{|m| - |Z|}`.
pub fn exact_partials(poly: &PartitePolynomial, p: f64, z: &Pattern) -> Result<f64> {
    check_pattern(poly, z)?;
    Ok(poly
        .monomials
        .iter()
        .filter(|(_, m)| contains(m, z))
        .map(|(c, m)| *c as f64 * p.powi((m.iter().flatten().count() - z.len()) as i32))
        .sum())
}

/// `μ_Z` as an exact fraction at bias `p_num / p_den`.
pub fn exact_partials_rational(poly: &PartitePolynomial, p_num: u64, p_den: u64, z: &Pattern) -> Result<(BigUint, BigUint)> {
    check_pattern(poly, z)?;
    let top = poly.r - z.len();
    let mut num = BigUint::from(0u32);
    for (c, m) in poly.monomials.iter().filter(|(_, m)| contains(m, z)) {
        let e = (m.iter().flatten().count() - z.len()) as u32;
        num += BigUint::from(*c) * BigUint::from(p_num).pow(e) * BigUint::from(p_den).pow(top as u32 - e);
    }
    Ok((num, BigUint::from(p_den).pow(top as u32)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailBound {
    /// `(1 + β)^r μ`.
    pub threshold: f64,
    /// `exp(-½β² / (2γ + ⅓γβ))`.
    pub alpha: f64,
    pub log_bound: f64,
    /// `min(1, r (n+1)^r α)`.
    pub bound: f64,
}

/// Tail bound for partite polynomials; `r = 0` gives bound 0.
pub fn partite_tail_bound(mu: f64, gamma: f64, beta: f64, r: usize, n: usize) -> TailBound {
    let log_alpha = -0.5 * beta * beta / (2.0 * gamma + gamma * beta / 3.0);
    let threshold = (1.0 + beta).powi(r as i32) * mu;
    if r == 0 {
        return TailBound { threshold, alpha: log_alpha.exp(), log_bound: f64::NEG_INFINITY, bound: 0.0 };
    }
    let log_bound = (r as f64).ln() + r as f64 * ((n + 1) as f64).ln() + log_alpha;
    TailBound { threshold, alpha: log_alpha.exp(), log_bound, bound: log_bound.exp().min(1.0) }
}

/// `exp(-½ t² / (σ² + ⅓ M t))`.
pub fn bernstein(t: f64, sigma2: f64, m: f64) -> f64 {
    (-0.5 * t * t / (sigma2 + m * t / 3.0)).exp()
}

/// `exp(-δ² μ / (2 + δ))`.
pub fn chernoff(delta: f64, mu: f64) -> f64 {
    (-delta * delta * mu / (2.0 + delta)).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisCheck {
    /// `μ = μ_∅`.
    pub mu: f64,
    /// Smallest `γ` with `μ_Z <= μ γ^{|Z|}` for every nonempty `Z`.
    pub gamma_min: f64,
    pub patterns: usize,
    pub holds_at: Option<f64>,
}

/// Evaluates every nonempty pattern contained in some monomial (all others
/// have `μ_Z = 0`), and whether the hypothesis holds at `gamma`.
pub fn hypothesis_check(poly: &PartitePolynomial, p: f64, gamma: Option<f64>) -> HypothesisCheck {
    let mut patterns: BTreeSet<Vec<(usize, u32)>> = BTreeSet::new();
    for (_, m) in &poly.monomials {
        let support: Vec<(usize, u32)> = m.iter().enumerate().filter_map(|(g, v)| v.map(|i| (g, i))).collect();
        for mask in 1u32..1 << support.len() {
            patterns.insert(support.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &e)| e).collect());
        }
    }
    let mu = exact_partials(poly, p, &[]).expect("empty pattern");
    let mut gamma_min: f64 = 0.0;
    let mut ok = true;
    for z in &patterns {
        let mz = exact_partials(poly, p, z).expect("patterns come from monomials");
        gamma_min = gamma_min.max((mz / mu).powf(1.0 / z.len() as f64));
        if let Some(g) = gamma {
            ok &= mz <= mu * g.powi(z.len() as i32) * (1.0 + 1e-12);
        }
    }
    HypothesisCheck { mu, gamma_min, patterns: patterns.len(), holds_at: gamma.filter(|_| ok) }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McTail {
    pub trials: u64,
    pub exceed: u64,
    pub frequency: f64,
    pub stderr: f64,
    pub ci99: (f64, f64),
}

const BLOCK: u64 = 10_000;

/// Runs `trials` draws in blocks of fixed size with per-block seeds, so
/// the result does not depend on the thread count.
fn blocked_count(trials: u64, seed_value: u64, label: &str, hit: impl Fn(&mut rand_chacha::ChaCha8Rng) -> bool + Sync) -> u64 {
    let blocks = trials.div_ceil(BLOCK);
    (0..blocks)
        .into_par_iter()
        .map(|blk| {
            let mut rng = seed::rng(seed_value, &format!("{label}-{blk}"));
            let size = BLOCK.min(trials - blk * BLOCK);
            (0..size).filter(|_| hit(&mut rng)).count() as u64
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum()
}

fn biased_point<R: Rng>(rng: &mut R, r: usize, n: usize, p: f64) -> Vec<u128> {
    (0..r).map(|_| (0..n).filter(|_| rng.gen_bool(p)).fold(0u128, |m, v| m | 1u128 << v)).collect()
}

/// Empirical `Pr[P(y) >= threshold]` under independent `p`-biased bits.
pub fn mc_tail(poly: &PartitePolynomial, p: f64, threshold: f64, trials: u64, seed_value: u64) -> Result<McTail> {
    if trials < 1000 {
        return Err(Error::invalid(format!("{trials} trials; at least 1000 are needed")));
    }
    let exceed = blocked_count(trials, seed_value, "mc-tail", |rng| {
        poly.eval(&biased_point(rng, poly.r, poly.n, p)) as f64 >= threshold
    });
    let freq = exceed as f64 / trials as f64;
    Ok(McTail {
        trials,
        exceed,
        frequency: freq,
        stderr: (freq * (1.0 - freq) / trials as f64).sqrt(),
        ci99: wilson99(exceed, trials),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McMean {
    pub mean: f64,
    pub stderr: f64,
}

/// Monte Carlo mean of the partial derivative along `z`.
pub fn mc_partial(poly: &PartitePolynomial, p: f64, z: &Pattern, trials: u64, seed_value: u64) -> Result<McMean> {
    check_pattern(poly, z)?;
    let mut rng = seed::rng(seed_value, "mc-partial");
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..trials {
        let v = poly.derivative(z, &biased_point(&mut rng, poly.r, poly.n, p)) as f64;
        sum += v;
        sq += v * v;
    }
    let nt = trials as f64;
    let mean = sum / nt;
    let var = (sq / nt - mean * mean).max(0.0) * nt / (nt - 1.0).max(1.0);
    Ok(McMean { mean, stderr: (var / nt).sqrt() })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaTrial {
    pub hypothesis: HypothesisCheck,
    pub gamma: f64,
    pub beta: f64,
    pub bound: TailBound,
    pub tail: McTail,
    /// Empirical frequency <= bound + 3 standard errors.
    pub holds: bool,
}

/// One black-box check of the tail lemma at the smallest admissible `γ`.
pub fn lemma_trial(poly: &PartitePolynomial, p: f64, beta: f64, trials: u64, seed_value: u64) -> Result<LemmaTrial> {
    let pre = hypothesis_check(poly, p, None);
    let gamma = pre.gamma_min.max(f64::MIN_POSITIVE);
    let hypothesis = hypothesis_check(poly, p, Some(gamma));
    let bound = partite_tail_bound(hypothesis.mu, gamma, beta, poly.r, poly.n);
    let tail = mc_tail(poly, p, bound.threshold, trials, seed_value)?;
    let holds = hypothesis.holds_at.is_some() && tail.frequency <= bound.bound + 3.0 * tail.stderr;
    Ok(LemmaTrial { hypothesis, gamma, beta, bound, tail, holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn alpha_plug_in() {
        let b = partite_tail_bound(1.0, 0.1, 1.0, 1, 1);
        // Exact value of exp(-0.5 / (0.2 + 0.1/3)) = exp(-15/7).
        assert_relative_eq!(b.alpha, (-15.0f64 / 7.0).exp(), max_relative = 1e-14);
        assert_relative_eq!(b.alpha, 0.117319, epsilon = 1e-6);
        assert!(partite_tail_bound(1.0, 1e-9, 1.0, 2, 5).alpha < 1e-100);
        let w = partite_tail_bound(2.0, 0.01, 0.5, 2, 10);
        assert_relative_eq!(w.log_bound, 2f64.ln() + 121f64.ln() - 0.125 / (0.02 + 0.005 / 3.0), max_relative = 1e-14);
        assert_relative_eq!(w.threshold, 4.5, max_relative = 1e-14);
        assert_eq!(partite_tail_bound(1.0, 0.1, 1.0, 0, 10).bound, 0.0);
    }

    #[test]
    fn scalar_bounds() {
        assert_relative_eq!(bernstein(2.0, 1.0, 1.0), (-1.2f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(bernstein(2.0, 1.0, 1.0), 0.30119, epsilon = 1e-5);
        assert_eq!(chernoff(0.0, 10.0), 1.0);
    }

    proptest! {
        #[test]
        fn bounds_are_monotone(t in 0.1f64..10.0, dt in 0.01f64..5.0, s2 in 0.1f64..5.0, m in 0.0f64..3.0, mu in 0.1f64..50.0) {
            prop_assert!(bernstein(t + dt, s2, m) <= bernstein(t, s2, m));
            prop_assert!(chernoff(t + dt, mu) <= chernoff(t, mu));
        }

        #[test]
        fn partials_linear_and_multiplicative(s in 0u64..500, p in 0.05f64..0.95) {
            let a = PartitePolynomial::random(3, 6, 12, 0.7, s);
            let b = PartitePolynomial::random(3, 6, 9, 0.7, s + 1);
            let sum = PartitePolynomial { monomials: a.monomials.iter().chain(&b.monomials).cloned().collect(), ..a.clone() };
            for z in [vec![], vec![(0usize, 1u32)], vec![(1, 2), (2, 0)]] {
                let lhs = exact_partials(&sum, p, &z).unwrap();
                let rhs = exact_partials(&a, p, &z).unwrap() + exact_partials(&b, p, &z).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs));
            }
            // Group 0 only times groups 1 and 2 only.
            let left = PartitePolynomial::new(3, 6, a.monomials.iter().map(|(c, m)| (*c, vec![m[0], None, None])).collect()).unwrap();
            let right = PartitePolynomial::new(3, 6, b.monomials.iter().map(|(c, m)| (*c, vec![None, m[1], m[2]])).collect()).unwrap();
            let prod = left.product(&right).unwrap();
            for (z1, z2) in [(vec![], vec![]), (vec![(0usize, 3u32)], vec![(2usize, 1u32)]), (vec![], vec![(1, 4)])] {
                let joint: Vec<(usize, u32)> = z1.iter().chain(&z2).cloned().collect();
                let lhs = exact_partials(&prod, p, &joint).unwrap();
                let rhs = exact_partials(&left, p, &z1).unwrap() * exact_partials(&right, p, &z2).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs));
            }
        }
    }

    #[test]
    fn partial_edge_cases() {
        let p = PartitePolynomial::new(2, 4, vec![(3, vec![Some(1), Some(2)]), (5, vec![Some(0), None])]).unwrap();
        assert_relative_eq!(exact_partials(&p, 0.5, &[]).unwrap(), 3.0 * 0.25 + 5.0 * 0.5);
        assert_eq!(exact_partials(&p, 0.5, &[(0, 1), (1, 2)]).unwrap(), 3.0);
        assert!(exact_partials(&p, 0.5, &[(0, 1), (0, 2)]).is_err());
        let (num, den) = exact_partials_rational(&p, 1, 2, &[]).unwrap();
        assert_eq!((num, den), (BigUint::from(3u32 + 10), BigUint::from(4u32)));
        assert!(p.product(&p).is_err());
    }

    #[test]
    fn partials_match_sampling() {
        let poly = PartitePolynomial::random(3, 8, 40, 0.9, 2);
        let z = {
            let m = &poly.monomials[0].1;
            let g = m.iter().position(Option::is_some).unwrap();
            vec![(g, m[g].unwrap())]
        };
        let exact = exact_partials(&poly, 0.3, &z).unwrap();
        let mc = mc_partial(&poly, 0.3, &z, 20_000, 3).unwrap();
        assert!((mc.mean - exact).abs() <= 4.0 * mc.stderr.max(1e-9), "{exact} vs {mc:?}");
    }

    #[test]
    fn lemma_holds_on_small_polynomial() {
        let poly = PartitePolynomial::random(3, 20, 150, 1.0, 9);
        let trial = lemma_trial(&poly, 0.5, 1.0, 10_000, 4).unwrap();
        assert!(trial.holds, "{trial:?}");
        assert!(mc_tail(&poly, 0.5, 0.0, 10, 0).is_err());
        assert_eq!(mc_tail(&poly, 0.5, 0.0, 2000, 0).unwrap().frequency, 1.0);
    }
}
