//! The full pipeline: complete profiles, expand seats, pad to a square,
//! price, solve, enumerate the optima and pick one with the seed.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cost::{CostValue, RankCounts};
use crate::enumeration::{optimal_assignments, OptimumSet};
use crate::error::{Error, Result};
use crate::grid::{
    check_transform, cost_scale, realize, CostRealization, RealizedGrid, SeatLayout,
};
use crate::hungarian::{hungarian_solve, LineCover, SolveTrace};
use crate::model::{Matching, SchoolChoiceProblem};
use crate::transform::{cost_of_matching, UtilityTransform};

pub const DEFAULT_ENUMERATION_CAP: usize = 10_000;
pub const DEFAULT_MAX_SEATS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MechanismOptions {
    /// Most optima to list before giving up on a uniform pick.
    pub enumeration_cap: usize,
    /// Largest grid dimension the kernel accepts.
    pub max_seats: usize,
    pub realization: CostRealization,
}

impl Default for MechanismOptions {
    fn default() -> Self {
        Self {
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            max_seats: DEFAULT_MAX_SEATS,
            realization: CostRealization::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceSummary {
    pub dimension: usize,
    pub iterations: usize,
    pub cover_lines: usize,
    pub realization: &'static str,
    /// Set when the optima outnumbered the cap and the kernel's own optimum
    /// was returned instead of a uniform pick.
    pub fallback: bool,
}

/// The kernel's final reduced matrix in the realization it ran in.
#[derive(Debug, Clone)]
pub enum ReducedGrid {
    /// Entries are `scale` times the transform's units.
    Machine {
        matrix: Vec<Vec<i64>>,
        scale: BigInt,
    },
    Wide {
        matrix: Vec<Vec<BigInt>>,
        scale: BigInt,
    },
    /// Entry `c` stands for `sum c_r * base^r`.
    Counts {
        matrix: Vec<Vec<RankCounts>>,
        base: BigInt,
    },
}

impl ReducedGrid {
    pub fn zero_mask(&self) -> Vec<Vec<bool>> {
        fn mask<T: CostValue>(m: &[Vec<T>]) -> Vec<Vec<bool>> {
            m.iter()
                .map(|r| r.iter().map(T::is_zero).collect())
                .collect()
        }
        match self {
            ReducedGrid::Machine { matrix, .. } => mask(matrix),
            ReducedGrid::Wide { matrix, .. } => mask(matrix),
            ReducedGrid::Counts { matrix, .. } => mask(matrix),
        }
    }

    /// Reduced costs in the transform's own units.
    pub fn to_rational(&self) -> Vec<Vec<BigRational>> {
        match self {
            ReducedGrid::Machine { matrix, scale } => matrix
                .iter()
                .map(|r| {
                    r.iter()
                        .map(|v| BigRational::new(BigInt::from(*v), scale.clone()))
                        .collect()
                })
                .collect(),
            ReducedGrid::Wide { matrix, scale } => matrix
                .iter()
                .map(|r| {
                    r.iter()
                        .map(|v| BigRational::new(v.clone(), scale.clone()))
                        .collect()
                })
                .collect(),
            ReducedGrid::Counts { matrix, base } => matrix
                .iter()
                .map(|r| {
                    r.iter()
                        .map(|v| BigRational::from_integer(v.to_scalar(base)))
                        .collect()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MechanismOutcome {
    pub matching: Matching,
    /// `C_f` of `matching` under the resolved transform.
    pub cost: BigRational,
    pub transform: UtilityTransform,
    pub optima: OptimumSet,
    /// The optimum the kernel itself landed on.
    pub kernel_matching: Matching,
    pub trace: TraceSummary,
    pub reduced: ReducedGrid,
    pub cover: LineCover,
}

impl MechanismOutcome {
    /// Kernel trace with reduced costs in transform units.
    pub fn solve_trace(&self) -> SolveTrace<BigRational> {
        SolveTrace {
            iterations: self.trace.iterations,
            final_reduced: self.reduced.to_rational(),
            cover_lines: self.cover.clone(),
        }
    }
}

/// Output of one solve plus enumeration, before the random pick.
#[derive(Debug, Clone)]
pub(crate) struct Solved {
    pub transform: UtilityTransform,
    pub kernel_matching: Matching,
    pub optima: Vec<Matching>,
    pub exhaustive: bool,
    pub iterations: usize,
    pub dimension: usize,
    pub cover: LineCover,
    pub reduced: ReducedGrid,
    pub realization: &'static str,
}

fn solve_matrix<T: CostValue>(
    layout: &SeatLayout,
    matrix: &[Vec<T>],
    cap: usize,
) -> Result<(Matching, Vec<Matching>, bool, SolveTrace<T>)> {
    let (assignment, trace) = hungarian_solve(matrix)?;
    let (optima, exhaustive) = optimal_assignments(layout, &trace.zero_mask(), &assignment, cap);
    Ok((layout.decode(&assignment), optima, exhaustive, trace))
}

pub(crate) fn solve_problem(
    problem: &SchoolChoiceProblem,
    transform: &UtilityTransform,
    options: &MechanismOptions,
) -> Result<Solved> {
    let layout = SeatLayout::new(problem)?;
    if layout.dimension() > options.max_seats {
        return Err(Error::GuardExceeded {
            what: "seat grid dimension",
            actual: layout.dimension(),
            limit: options.max_seats,
        });
    }
    let transform = transform.resolved_for(problem);
    check_transform(&layout, &transform)?;
    let grid = realize(&layout, &transform, options.realization)?;
    let realization = grid.kind();
    let cap = options.enumeration_cap;
    macro_rules! finish {
        ($matrix:expr, $wrap:expr) => {{
            let (kernel_matching, optima, exhaustive, trace) =
                solve_matrix(&layout, &$matrix, cap)?;
            Solved {
                transform: transform.clone(),
                kernel_matching,
                optima,
                exhaustive,
                iterations: trace.iterations,
                dimension: layout.dimension(),
                cover: trace.cover_lines,
                reduced: $wrap(trace.final_reduced),
                realization,
            }
        }};
    }
    Ok(match grid {
        RealizedGrid::Machine(m) => {
            let scale = cost_scale(&layout, &transform)?;
            finish!(m, |matrix| ReducedGrid::Machine { matrix, scale })
        }
        RealizedGrid::Wide(m) => {
            let scale = cost_scale(&layout, &transform)?;
            finish!(m, |matrix| ReducedGrid::Wide { matrix, scale })
        }
        RealizedGrid::Counts(m) => {
            let base = match &transform {
                UtilityTransform::Exponential { base: Some(b) } => BigInt::from(*b),
                _ => unreachable!("rank counts only realize resolved exponentials"),
            };
            finish!(m, |matrix| ReducedGrid::Counts { matrix, base })
        }
    })
}

/// Runs the mechanism with default options.
pub fn run_mechanism(
    problem: &SchoolChoiceProblem,
    transform: &UtilityTransform,
    seed: u64,
) -> Result<MechanismOutcome> {
    run_mechanism_with(problem, transform, seed, &MechanismOptions::default())
}

pub fn run_mechanism_with(
    problem: &SchoolChoiceProblem,
    transform: &UtilityTransform,
    seed: u64,
    options: &MechanismOptions,
) -> Result<MechanismOutcome> {
    let solved = solve_problem(problem, transform, options)?;
    let fallback = !solved.exhaustive;
    let matching = if fallback {
        solved.kernel_matching.clone()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        solved.optima[rng.gen_range(0..solved.optima.len())].clone()
    };
    let cost = cost_of_matching(&solved.transform, problem, &matching)?;
    Ok(MechanismOutcome {
        matching,
        optima: OptimumSet {
            matchings: solved.optima,
            shared_cost: cost.clone(),
            exhaustive: solved.exhaustive,
        },
        cost,
        transform: solved.transform,
        kernel_matching: solved.kernel_matching,
        trace: TraceSummary {
            dimension: solved.dimension,
            iterations: solved.iterations,
            cover_lines: solved.cover.len(),
            realization: solved.realization,
            fallback,
        },
        reduced: solved.reduced,
        cover: solved.cover,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testsupport::fixtures;

    #[test]
    fn three_by_three_outcome() {
        let p = fixtures::three_by_three();
        let out = run_mechanism(&p, &UtilityTransform::rank_minus_one(), 0).unwrap();
        let expected = Matching::from_ids(
            &p,
            [("i1", Some("s1")), ("i2", Some("s3")), ("i3", Some("s2"))],
        )
        .unwrap();
        assert_eq!(out.matching, expected);
        assert_eq!(out.cost, BigRational::from_integer(0.into()));
        assert_eq!(out.optima.matchings.len(), 1);
        let trace = out.solve_trace();
        for (i, school) in out.matching.assignment().iter().enumerate() {
            assert!(school.is_some());
            assert!(trace.final_reduced[i]
                .iter()
                .any(|v| *v == BigRational::from_integer(0.into())));
        }
    }

    #[test]
    fn exponential_prefers_lower_rank() {
        let p = fixtures::rank_minimal_vs_cost();
        for transform in [
            UtilityTransform::exponential(3).unwrap(),
            UtilityTransform::exponential_auto(),
        ] {
            let out = run_mechanism(&p, &transform, 9).unwrap();
            let expected = Matching::from_ids(
                &p,
                [("i1", Some("s3")), ("i2", Some("s2")), ("i3", Some("s1"))],
            )
            .unwrap();
            assert_eq!(out.matching, expected);
        }
        let out = run_mechanism(&p, &UtilityTransform::exponential(3).unwrap(), 9).unwrap();
        assert_eq!(out.cost, BigRational::from_integer(15.into()));
    }

    #[test]
    fn seed_picks_among_optima_reproducibly() {
        let p = fixtures::four_student_multi_optima();
        let f1 = UtilityTransform::rank_minus_one();
        let picks: std::collections::BTreeSet<Matching> = (0..40)
            .map(|seed| run_mechanism(&p, &f1, seed).unwrap().matching)
            .collect();
        assert_eq!(picks.len(), 3);
        assert_eq!(
            run_mechanism(&p, &f1, 5).unwrap().matching,
            run_mechanism(&p, &f1, 5).unwrap().matching
        );
    }

    #[test]
    fn guard_and_fallback() {
        let p = fixtures::homogeneous(5);
        let f1 = UtilityTransform::rank_minus_one();
        let small = MechanismOptions {
            max_seats: 4,
            ..MechanismOptions::default()
        };
        assert!(matches!(
            run_mechanism_with(&p, &f1, 0, &small),
            Err(Error::GuardExceeded { .. })
        ));
        let capped = MechanismOptions {
            enumeration_cap: 7,
            ..MechanismOptions::default()
        };
        let out = run_mechanism_with(&p, &f1, 0, &capped).unwrap();
        assert!(out.trace.fallback);
        assert!(!out.optima.exhaustive);
        assert_eq!(out.matching, out.kernel_matching);
        assert_eq!(out.cost, BigRational::from_integer(10.into()));
    }

    #[test]
    fn realizations_agree_on_cost() {
        let p = fixtures::four_student_multi_optima();
        let exp = UtilityTransform::exponential_auto();
        let costs: Vec<BigRational> = [CostRealization::Scalar, CostRealization::RankCounts]
            .into_iter()
            .map(|realization| {
                let options = MechanismOptions {
                    realization,
                    ..MechanismOptions::default()
                };
                run_mechanism_with(&p, &exp, 0, &options).unwrap().cost
            })
            .collect();
        assert_eq!(costs[0], costs[1]);
    }
}
