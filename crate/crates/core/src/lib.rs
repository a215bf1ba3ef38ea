//! Cost-minimizing school-choice matching.
//!
//! Ordinal preferences become cardinal costs through a strictly increasing
//! [`UtilityTransform`]; a Hungarian-method kernel then finds a matching of
//! minimum total cost over a seat grid with one column per school seat.
//! Every optimum can be listed, ties broken by variance or by priority
//! violations, and outcomes audited for efficiency, rank and strategic
//! misreports. All arithmetic is exact.
//!
//! ```
//! use osm_core::{format_rational, run_mechanism, testsupport::fixtures, UtilityTransform};
//!
//! let problem = fixtures::three_by_three();
//! let outcome = run_mechanism(&problem, &UtilityTransform::rank_minus_one(), 0).unwrap();
//! assert_eq!(format_rational(&outcome.cost), "0");
//! ```

pub mod analysis;
pub mod cost;
pub mod enumeration;
pub mod error;
pub mod grid;
pub mod hungarian;
pub mod mechanism;
pub mod model;
pub mod strategy;
pub mod testsupport;
pub mod transform;
pub mod universe;

pub use num_bigint::BigInt;
pub use num_rational::BigRational;

pub use analysis::{
    analyze_matching, is_pareto_efficient, is_rank_minimal, matching_rank, preference_index,
    priority_violations, rank_maximal_matchings, rank_signature, MatchingReport, ParetoCertificate,
    PriorityViolations, ViolationPair,
};
pub use cost::{format_rational, parse_rational, CostValue, RankCounts};
pub use enumeration::{
    enumerate_from_grid, enumerate_min_cost, enumerate_rank_minimal, tiebreak_select, OptimumSet,
    RankMinimalSet, TieBreakCriterion, TieBreakPolicy,
};
pub use error::{Error, Result};
pub use grid::{build_seat_grid, CostRealization, SeatGrid, SeatLayout};
pub use hungarian::{hungarian_solve, SolveTrace};
pub use mechanism::{run_mechanism, run_mechanism_with, MechanismOptions, MechanismOutcome};
pub use model::{
    complete_preferences, matched_school, ranking_of, validate_problem, Matching,
    PreferenceProfile, PriorityStructure, RankingFunction, School, SchoolChoiceProblem, SchoolId,
    Student, StudentId,
};
pub use strategy::{
    exhaustive_best_response, expected_outcome, homogeneous_receivable_set,
    verify_homogeneous_counts, DifferenceProfile, StrategyReport,
};
pub use transform::{cost_of_matching, parse_transform_spec, UtilityTransform};

/// Exact scalar cost: what every public cost is reported in.
pub type Rational = BigRational;
/// Kernel cost for linear and table transforms after integer scaling.
pub type MachineCost = i64;
/// Kernel cost when scaled values outgrow `i64`.
pub type WideCost = BigInt;
/// Exponential costs without the powers.
pub type ExponentialCost = RankCounts;
