//! Computational laboratory for the group Z^d ⋊_A Z of a hyperbolic toral
//! automorphism: exact arithmetic, word metrics, box sets, automorphism
//! dynamics, growth certification and Lyapunov-exponent estimators.

pub mod error;
pub mod group;
pub mod matrix;

pub use error::{Error, Result};
pub use group::{check_hyperbolic, GroupContext, GroupElement, Hyperbolicity, ToralMatrix};
pub use matrix::{IntMatrix, IntVector};
pub mod metric;
pub use metric::{
    neighborhood, set_diameter, word_ball, Diameter, ElementSet, GeneratingSet, WordLength, WordLengthOracle,
};
pub mod automorphism;
pub use automorphism::{
    apply_automorphism, enumerate_commuting_matrices, inverse_automorphism, validate_automorphism, GroupAutomorphism,
    Validity,
};
pub mod boxes;
pub use boxes::{box_membership, choose_lambda, BoxSet, LambdaChoice};
pub mod dynamics;
pub use dynamics::{
    abelian_control, classify_growth, envelope_p, iterate_once, run_iteration, Classification, GrowthCurve,
    GrowthPoint, IterationConfig, IterationRun, Verdict,
};
pub mod suspension;
pub use suspension::{compute_splitting, log_distance_bound, qi_comparison, CoverPoint, HyperbolicSplitting, QiReport};
pub mod lyapunov;
pub use lyapunov::{
    birkhoff_consistency, center_integral, finite_time_exponent, BirkhoffReport, DirectionField, Estimate, ToyMap,
};
