use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A sorted hyperedge `{a, b, c}` with `a < b < c`.
pub type Triple = [u32; 3];

/// Per-vertex correction matchings of a 3-query code in normal form.
///
/// Every `x` in the code satisfies `x_u = sum_{v in C} x_v` over the field
/// for all `u` and `C` in `matchings[u]`. Over larger prime fields the
/// family is the unit-coefficient lift, and `negation` is the involution
/// induced by multiplying a symbol by `-1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchingFamily {
    pub n: usize,
    pub field_char: u32,
    pub negation: Vec<u32>,
    pub matchings: Vec<Vec<Triple>>,
}

/// On-disk layout; `negation` may be omitted for the identity.
#[derive(Serialize, Deserialize)]
struct FamilyFile {
    n: usize,
    #[serde(default = "default_char")]
    field_char: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    negation: Option<Vec<u32>>,
    matchings: Vec<Vec<Vec<u32>>>,
}

fn default_char() -> u32 {
    2
}

/// A structural defect found by [`MatchingFamily::structural_violations`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Two hyperedges of `H_u` share a vertex.
    Overlap { u: u32, first: Triple, second: Triple },
    /// A hyperedge repeats a vertex, contains `u`, or leaves `[n]`.
    BadEdge { u: u32, edge: Vec<u32>, reason: String },
    /// `negation` is not an involution, or does not map `H_u` onto `H_{ν(u)}`.
    Negation { u: u32, reason: String },
    /// A basis vector violates the constraint `(u, edge)`.
    Unsatisfied { basis: usize, u: u32, edge: Triple },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Overlap { u, first, second } => {
                write!(f, "H_{u}: edges {first:?} and {second:?} overlap")
            }
            Violation::BadEdge { u, edge, reason } => write!(f, "H_{u}: edge {edge:?} {reason}"),
            Violation::Negation { u, reason } => write!(f, "negation at {u}: {reason}"),
            Violation::Unsatisfied { basis, u, edge } => {
                write!(f, "basis vector {basis} violates x_{u} = x{edge:?}")
            }
        }
    }
}

pub fn sort_triple(mut e: Triple) -> Triple {
    e.sort_unstable();
    e
}

impl MatchingFamily {
    /// Family over F2 with identity negation. Edges are sorted; edge lists too.
    pub fn new(n: usize, matchings: Vec<Vec<Triple>>) -> Self {
        let mut fam = MatchingFamily {
            n,
            field_char: 2,
            negation: (0..n as u32).collect(),
            matchings,
        };
        fam.matchings.resize(n, Vec::new());
        fam.canonicalize();
        fam
    }

    /// Family without constraints.
    pub fn empty(n: usize) -> Self {
        MatchingFamily::new(n, vec![Vec::new(); n])
    }

    pub fn with_field(mut self, field_char: u32, negation: Vec<u32>) -> Self {
        self.field_char = field_char;
        self.negation = negation;
        self
    }

    pub fn canonicalize(&mut self) {
        for h in &mut self.matchings {
            for e in h.iter_mut() {
                *e = sort_triple(*e);
            }
            h.sort_unstable();
        }
    }

    #[inline]
    pub fn neg(&self, v: u32) -> u32 {
        self.negation[v as usize]
    }

    pub fn has_trivial_negation(&self) -> bool {
        self.negation.iter().enumerate().all(|(i, &v)| v as usize == i)
    }

    pub fn edge_count(&self) -> usize {
        self.matchings.iter().map(Vec::len).sum()
    }

    pub fn min_matching_size(&self) -> usize {
        self.matchings.iter().map(Vec::len).min().unwrap_or(0)
    }

    pub fn max_matching_size(&self) -> usize {
        self.matchings.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Common matching size when all `|H_u|` agree.
    pub fn uniform_size(&self) -> Option<usize> {
        let m = self.min_matching_size();
        (self.n > 0 && self.max_matching_size() == m).then_some(m)
    }

    /// Effective density `min_u |H_u| / n`.
    pub fn delta_eff(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.min_matching_size() as f64 / self.n as f64
        }
    }

    /// Copy with every matching cut to the minimum size, keeping the
    /// smallest edges in sorted order.
    ///
    /// For lifted families the cut keeps negation images aligned by
    /// truncating each `H_u` with `u <= ν(u)` and mapping it across.
    pub fn truncate_to_min(&self) -> MatchingFamily {
        let m = self.min_matching_size();
        let mut out = self.clone();
        if self.has_trivial_negation() {
            for h in &mut out.matchings {
                h.truncate(m);
            }
        } else {
            for u in 0..self.n {
                let nu = self.neg(u as u32) as usize;
                if u <= nu {
                    let mut kept = self.matchings[u].clone();
                    kept.truncate(m);
                    let image: Vec<Triple> = kept
                        .iter()
                        .map(|e| sort_triple([self.neg(e[0]), self.neg(e[1]), self.neg(e[2])]))
                        .collect();
                    out.matchings[u] = kept;
                    if nu != u {
                        out.matchings[nu] = image;
                    }
                }
            }
            out.canonicalize();
        }
        out
    }

    /// Matching disjointness, arity, range, and negation consistency.
    pub fn structural_violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.matchings.len() != self.n {
            out.push(Violation::BadEdge {
                u: 0,
                edge: vec![],
                reason: format!("{} matchings listed for n = {}", self.matchings.len(), self.n),
            });
            return out;
        }
        for (u, h) in self.matchings.iter().enumerate() {
            let u = u as u32;
            let mut owner: HashMap<u32, Triple> = HashMap::new();
            for &e in h {
                let distinct = e[0] != e[1] && e[1] != e[2] && e[0] != e[2];
                if !distinct {
                    out.push(Violation::BadEdge { u, edge: e.to_vec(), reason: "repeats a vertex".into() });
                    continue;
                }
                if e.iter().any(|&v| v as usize >= self.n) {
                    out.push(Violation::BadEdge { u, edge: e.to_vec(), reason: "leaves the vertex range".into() });
                    continue;
                }
                if e.contains(&u) {
                    out.push(Violation::BadEdge { u, edge: e.to_vec(), reason: "contains its own head".into() });
                }
                let mut reported = false;
                for &v in &e {
                    if let Some(prev) = owner.insert(v, e) {
                        if !reported && prev != e {
                            out.push(Violation::Overlap { u, first: prev, second: e });
                            reported = true;
                        }
                    }
                }
            }
        }
        out.extend(self.negation_violations());
        out
    }

    fn negation_violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.negation.len() != self.n {
            out.push(Violation::Negation { u: 0, reason: format!("length {} for n = {}", self.negation.len(), self.n) });
            return out;
        }
        for u in 0..self.n as u32 {
            let nu = self.neg(u);
            if nu as usize >= self.n || self.neg(nu) != u {
                out.push(Violation::Negation { u, reason: "not an involution".into() });
                return out;
            }
        }
        if self.has_trivial_negation() {
            return out;
        }
        for u in 0..self.n {
            let image: Vec<Triple> = {
                let mut v: Vec<Triple> = self.matchings[u]
                    .iter()
                    .map(|e| sort_triple([self.neg(e[0]), self.neg(e[1]), self.neg(e[2])]))
                    .collect();
                v.sort_unstable();
                v
            };
            if image != self.matchings[self.neg(u as u32) as usize] {
                out.push(Violation::Negation {
                    u: u as u32,
                    reason: "H of the negated vertex is not the negated matching".into(),
                });
            }
        }
        out
    }

    /// Hyperedge of `H_u` containing `v`, if any.
    pub fn edge_through(&self, u: u32, v: u32) -> Option<Triple> {
        self.matchings[u as usize].iter().copied().find(|e| e.contains(&v))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: FamilyFile = serde_json::from_str(text)?;
        if raw.matchings.len() != raw.n {
            return Err(Error::invalid(format!(
                "expected {} matchings, found {}",
                raw.n,
                raw.matchings.len()
            )));
        }
        let mut matchings = Vec::with_capacity(raw.n);
        for (u, h) in raw.matchings.into_iter().enumerate() {
            let mut edges = Vec::with_capacity(h.len());
            for (idx, e) in h.into_iter().enumerate() {
                if e.len() != 3 {
                    return Err(Error::invalid(format!(
                        "matchings[{u}][{idx}] has {} vertices, expected 3",
                        e.len()
                    )));
                }
                edges.push([e[0], e[1], e[2]]);
            }
            matchings.push(edges);
        }
        let mut fam = MatchingFamily::new(raw.n, matchings);
        fam.field_char = raw.field_char;
        if let Some(neg) = raw.negation {
            fam.negation = neg;
        }
        Ok(fam)
    }

    pub fn to_json_string(&self) -> String {
        let raw = FamilyFile {
            n: self.n,
            field_char: self.field_char,
            negation: (!self.has_trivial_negation()).then(|| self.negation.clone()),
            matchings: self
                .matchings
                .iter()
                .map(|h| h.iter().map(|e| e.to_vec()).collect())
                .collect(),
        };
        serde_json::to_string(&raw).expect("family serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string() + "\n")?;
        Ok(())
    }
}

/// Largest number of constraint hyperedges sharing a vertex pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HeavyPair {
    pub degree: usize,
    pub witness: Option<(u32, u32)>,
}

/// Tallies every pair inside every hyperedge; ties break to the smallest pair.
pub fn heavy_pair_degree(fam: &MatchingFamily) -> HeavyPair {
    let mut tally: HashMap<(u32, u32), usize> = HashMap::new();
    for h in &fam.matchings {
        for e in h {
            for (a, b) in [(e[0], e[1]), (e[0], e[2]), (e[1], e[2])] {
                *tally.entry((a, b)).or_default() += 1;
            }
        }
    }
    let best = tally
        .into_iter()
        .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then(pb.cmp(pa)));
    match best {
        Some((pair, degree)) => HeavyPair { degree, witness: Some(pair) },
        None => HeavyPair { degree: 0, witness: None },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_is_canonical() {
        let fam = MatchingFamily::new(5, vec![vec![[4, 2, 1]], vec![], vec![[0, 1, 3]], vec![], vec![]]);
        let text = fam.to_json_string();
        assert_eq!(text, r#"{"n":5,"field_char":2,"matchings":[[[1,2,4]],[],[[0,1,3]],[],[]]}"#);
        assert_eq!(MatchingFamily::from_json_str(&text).unwrap(), fam);
    }

    #[test]
    fn parse_errors_carry_positions() {
        let err = MatchingFamily::from_json_str("{\"n\": 2,\n \"matchings\": [[[0,1]], []]}").unwrap_err();
        assert!(err.to_string().contains("3"), "{err}");
        let err = MatchingFamily::from_json_str("{\"n\": 2,\n \"matchings\": [oops]}").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn overlap_is_reported_once() {
        let fam = MatchingFamily::new(7, vec![vec![[1, 2, 3], [3, 4, 5]], vec![], vec![], vec![], vec![], vec![], vec![]]);
        let v = fam.structural_violations();
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::Overlap { u: 0, .. }));
    }

    #[test]
    fn bad_edges_are_reported() {
        let fam = MatchingFamily::new(4, vec![vec![[0, 1, 2]], vec![], vec![], vec![]]);
        assert!(matches!(fam.structural_violations()[0], Violation::BadEdge { .. }));
    }

    #[test]
    fn heavy_pair_counts() {
        let single = MatchingFamily::new(4, vec![vec![[1, 2, 3]], vec![], vec![], vec![]]);
        assert_eq!(heavy_pair_degree(&single).degree, 1);
        let mut m = vec![Vec::new(); 6];
        m[4] = vec![[1, 2, 3]];
        m[5] = vec![[1, 2, 3]];
        let fam = MatchingFamily::new(6, m);
        assert_eq!(heavy_pair_degree(&fam), HeavyPair { degree: 2, witness: Some((1, 2)) });
        assert_eq!(heavy_pair_degree(&MatchingFamily::empty(3)).degree, 0);
    }

    #[test]
    fn truncation_keeps_smallest_edges() {
        let fam = MatchingFamily::new(
            7,
            vec![vec![[1, 2, 3], [4, 5, 6]], vec![[0, 2, 3]], vec![[0, 1, 3]], vec![[0, 1, 2]], vec![[0, 1, 2]], vec![[0, 1, 2]], vec![[0, 1, 2]]],
        );
        let t = fam.truncate_to_min();
        assert_eq!(t.uniform_size(), Some(1));
        assert_eq!(t.matchings[0], vec![[1, 2, 3]]);
    }
}
