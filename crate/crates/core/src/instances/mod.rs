//! Normal-form correction matchings: data model, generators, exact linear
//! algebra, field lifting, and the 2-query decoding bound.

pub mod family;
pub mod generators;
pub mod gkst;
pub mod lift;
pub mod linalg;

pub use family::{heavy_pair_degree, HeavyPair, MatchingFamily, Triple, Violation};
pub use generators::{gen_flat_lcc, gen_heavy_pair, gen_planted, gen_random_matchings};
pub use gkst::{gkst_check, GkstVerdict};
pub use lift::{lift_codeword, lift_unit_coefficients, CoefficientConstraint};
pub use linalg::{bit_to_sign, solution_space, validate_normal_form, SolutionSpace};
