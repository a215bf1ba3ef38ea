//! Strategy audits: what one student gains by misreporting when the
//! mechanism picks uniformly among its optima.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;

use crate::enumeration::{enumerate_min_cost, tiebreak_survivors, OptimumSet, TieBreakPolicy};
use crate::error::{Error, Result};
use crate::mechanism::DEFAULT_ENUMERATION_CAP;
use crate::model::{
    Matching, PreferenceProfile, RankTable, RankingFunction, School, SchoolChoiceProblem, SchoolId,
    Student, StudentId,
};
use crate::transform::UtilityTransform;

pub const DEFAULT_SCHOOL_CAP: usize = 7;

/// How the final pick among optima is modelled.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum AuditMode {
    /// Uniform over all optima.
    #[default]
    Uniform,
    /// Uniform over the optima that survive the policy's criteria.
    TieBreak(TieBreakPolicy),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategyReport {
    pub student: StudentId,
    pub truthful_expected_cost: BigRational,
    /// Strict report with the lowest expected true cost, when it beats the
    /// truth.
    pub best_misreport: Option<PreferenceProfile>,
    /// Equals the truthful value when no misreport helps.
    pub misreport_expected_cost: BigRational,
    pub receivable_truthful: BTreeSet<SchoolId>,
    pub receivable_after: BTreeSet<SchoolId>,
    /// Probability of each true rank, truthful and after the misreport.
    pub truthful_rank_distribution: BTreeMap<u32, BigRational>,
    pub misreport_rank_distribution: BTreeMap<u32, BigRational>,
    pub reports_evaluated: usize,
    pub seed: u64,
}

impl StrategyReport {
    pub fn found_profitable_misreport(&self) -> bool {
        self.best_misreport.is_some()
    }
}

#[derive(Debug, Clone)]
struct Evaluation {
    expected: BigRational,
    receivable: BTreeSet<SchoolId>,
    distribution: BTreeMap<u32, BigRational>,
}

struct Auditor<'a> {
    problem: &'a SchoolChoiceProblem,
    student: usize,
    table: RankTable,
    transform: UtilityTransform,
    mode: &'a AuditMode,
}

impl Auditor<'_> {
    fn evaluate(&self, reported: &SchoolChoiceProblem) -> Result<Evaluation> {
        let optima = enumerate_min_cost(reported, &self.transform, DEFAULT_ENUMERATION_CAP)?;
        if !optima.exhaustive {
            return Err(Error::NotExhaustive(DEFAULT_ENUMERATION_CAP));
        }
        let pool = match self.mode {
            AuditMode::Uniform => optima.matchings,
            AuditMode::TieBreak(policy) => tiebreak_survivors(reported, &optima, policy)?,
        };
        self.summarize(&pool)
    }

    fn summarize(&self, pool: &[Matching]) -> Result<Evaluation> {
        let weight = BigRational::new(1.into(), pool.len().into());
        let mut expected = BigRational::zero();
        let mut receivable = BTreeSet::new();
        let mut distribution: BTreeMap<u32, BigRational> = BTreeMap::new();
        for m in pool {
            let school = m.school_of(self.student);
            let rank = self.table.rank_of(self.student, school);
            expected += self.transform.apply(rank)? * &weight;
            *distribution.entry(rank).or_insert_with(BigRational::zero) += &weight;
            if let Some(s) = school {
                receivable.insert(self.problem.schools()[s].id.clone());
            }
        }
        Ok(Evaluation {
            expected,
            receivable,
            distribution,
        })
    }
}

/// Expected true cost of `student` under truthful reporting, uniform over
/// the optima. The seed would only matter for a single draw.
pub fn expected_outcome(
    problem: &SchoolChoiceProblem,
    student: &StudentId,
    transform: &UtilityTransform,
    _seed: u64,
) -> Result<BigRational> {
    let auditor = Auditor {
        problem,
        student: problem.require_student(student)?,
        table: problem.rank_table()?,
        transform: transform.resolved_for(problem),
        mode: &AuditMode::Uniform,
    };
    Ok(auditor.evaluate(problem)?.expected)
}

/// Expected true cost of `student` over an explicit optimum set.
pub fn expected_cost_over(
    problem: &SchoolChoiceProblem,
    student: &StudentId,
    transform: &UtilityTransform,
    optima: &OptimumSet,
) -> Result<BigRational> {
    let auditor = Auditor {
        problem,
        student: problem.require_student(student)?,
        table: problem.rank_table()?,
        transform: transform.resolved_for(problem),
        mode: &AuditMode::Uniform,
    };
    Ok(auditor.summarize(&optima.matchings)?.expected)
}

pub fn exhaustive_best_response(
    problem: &SchoolChoiceProblem,
    student: &StudentId,
    transform: &UtilityTransform,
    cap_schools: usize,
    seed: u64,
) -> Result<StrategyReport> {
    exhaustive_best_response_with(
        problem,
        student,
        transform,
        cap_schools,
        seed,
        &AuditMode::Uniform,
    )
}

/// Tries every strict ranking as `student`'s report. Exact expectations do
/// not depend on `seed`; it is carried into the report for reproducibility.
pub fn exhaustive_best_response_with(
    problem: &SchoolChoiceProblem,
    student: &StudentId,
    transform: &UtilityTransform,
    cap_schools: usize,
    seed: u64,
    mode: &AuditMode,
) -> Result<StrategyReport> {
    let m = problem.school_count();
    if m > cap_schools {
        return Err(Error::GuardExceeded {
            what: "school count",
            actual: m,
            limit: cap_schools,
        });
    }
    let auditor = Auditor {
        problem,
        student: problem.require_student(student)?,
        table: problem.rank_table()?,
        transform: transform.resolved_for(problem),
        mode,
    };
    let truthful = auditor.evaluate(problem)?;

    let ids = problem.school_ids();
    let reports: Vec<PreferenceProfile> = (0..m)
        .permutations(m)
        .map(|order| PreferenceProfile::strict(order.into_iter().map(|s| ids[s].clone())))
        .collect();
    let evaluations = reports
        .par_iter()
        .map(|report| auditor.evaluate(&problem.with_preferences(auditor.student, report.clone())))
        .collect::<Result<Vec<_>>>()?;

    let best = evaluations
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.expected.cmp(&b.expected))
        .filter(|(_, e)| e.expected < truthful.expected);
    let (best_misreport, after) = match best {
        Some((k, e)) => (Some(reports[k].clone()), e.clone()),
        None => (None, truthful.clone()),
    };
    Ok(StrategyReport {
        student: student.clone(),
        truthful_expected_cost: truthful.expected,
        best_misreport,
        misreport_expected_cost: after.expected,
        receivable_truthful: truthful.receivable,
        receivable_after: after.receivable,
        truthful_rank_distribution: truthful.distribution,
        misreport_rank_distribution: after.distribution,
        reports_evaluated: reports.len(),
        seed,
    })
}

/// `f(focal(s)) - f(population(s))` for every school.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DifferenceProfile {
    pub entries: Vec<(SchoolId, BigRational)>,
}

impl DifferenceProfile {
    pub fn value(&self, school: &SchoolId) -> Option<&BigRational> {
        self.entries
            .iter()
            .find(|(s, _)| s == school)
            .map(|(_, v)| v)
    }

    /// Schools with the smallest difference.
    pub fn argmin(&self) -> BTreeSet<SchoolId> {
        let Some(low) = self.entries.iter().map(|(_, v)| v).min() else {
            return BTreeSet::new();
        };
        self.entries
            .iter()
            .filter(|(_, v)| v == low)
            .map(|(s, _)| s.clone())
            .collect()
    }
}

/// An automatic exponential base for homogeneous settings: one student per
/// school, so the school count plus one.
fn homogeneous_transform(transform: &UtilityTransform, schools: usize) -> UtilityTransform {
    match transform {
        UtilityTransform::Exponential { base: None } => UtilityTransform::Exponential {
            base: Some(schools as u64 + 1),
        },
        other => other.clone(),
    }
}

pub fn difference_profile(
    focal: &RankingFunction,
    population: &RankingFunction,
    transform: &UtilityTransform,
) -> Result<DifferenceProfile> {
    let a: BTreeSet<&SchoolId> = focal.schools().collect();
    let b: BTreeSet<&SchoolId> = population.schools().collect();
    if a != b || a.len() != focal.entries().len() || b.len() != population.entries().len() {
        return Err(Error::RankingMismatch(
            "focal and population rankings cover different schools".into(),
        ));
    }
    let transform = homogeneous_transform(transform, a.len());
    let entries = focal
        .entries()
        .iter()
        .map(|(school, rank)| {
            let other = population.rank(school).expect("same school set");
            Ok((
                school.clone(),
                transform.apply(*rank)? - transform.apply(other)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DifferenceProfile { entries })
}

/// Schools a focal student can receive against a homogeneous population.
pub fn homogeneous_receivable_set(
    focal: &RankingFunction,
    population: &RankingFunction,
    transform: &UtilityTransform,
) -> Result<BTreeSet<SchoolId>> {
    Ok(difference_profile(focal, population, transform)?.argmin())
}

/// `n` unit-capacity schools `s1..sn`; the first student ranks them by
/// `focal`, the other `n - 1` all rank them `s1 > ... > sn`.
pub fn homogeneous_instance(focal: &[usize]) -> Result<SchoolChoiceProblem> {
    let n = focal.len();
    let name = |k: usize| format!("s{}", k + 1);
    let mut students = vec![Student::new(
        "i1",
        PreferenceProfile::strict(focal.iter().map(|&k| name(k))),
    )];
    students.extend(
        (2..=n).map(|k| Student::new(format!("i{k}"), PreferenceProfile::strict((0..n).map(name)))),
    );
    SchoolChoiceProblem::new(students, (0..n).map(|k| School::new(name(k), 1)).collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomogeneousVerification {
    pub n: usize,
    /// Optima with everyone sharing one ranking, and their shared cost.
    pub identical_optima: usize,
    pub identical_cost: BigRational,
    pub expected_identical_cost: BigRational,
    /// Focal student ranking `s2 > ... > sn > s1`: receivable set, and per
    /// received school the optima count, cost, and predicted cost.
    pub receivable: BTreeSet<SchoolId>,
    pub per_school: Vec<(SchoolId, usize, BigRational, BigRational)>,
    pub focal_optima: usize,
}

impl HomogeneousVerification {
    pub fn holds(&self) -> bool {
        let fact = |k: usize| (1..=k).product::<usize>();
        let schools: BTreeSet<SchoolId> = self.per_school.iter().map(|(s, ..)| s.clone()).collect();
        self.identical_optima == fact(self.n)
            && self.identical_cost == self.expected_identical_cost
            && schools == self.receivable
            && self.focal_optima == self.receivable.len() * fact(self.n - 1)
            && self
                .per_school
                .iter()
                .all(|(_, count, cost, predicted)| *count == fact(self.n - 1) && cost == predicted)
    }
}

/// Counts optima of the two homogeneous constructions.
pub fn verify_homogeneous_counts(
    n: usize,
    transform: &UtilityTransform,
) -> Result<HomogeneousVerification> {
    if n == 0 || n > 6 {
        return Err(Error::GuardExceeded {
            what: "homogeneous instance size",
            actual: n,
            limit: 6,
        });
    }
    let f = homogeneous_transform(transform, n);
    let f_sum = (1..=n as u32).try_fold(BigRational::zero(), |acc, r| {
        Ok::<_, Error>(acc + f.apply(r)?)
    })?;

    let identical = homogeneous_instance(&(0..n).collect::<Vec<_>>())?;
    let set = enumerate_min_cost(&identical, &f, DEFAULT_ENUMERATION_CAP)?;

    let rotated: Vec<usize> = (1..n).chain([0]).collect();
    let problem = homogeneous_instance(&rotated)?;
    let focal_ranking = crate::model::ranking_of(&StudentId::from("i1"), &problem)?;
    let population = crate::model::ranking_of(&StudentId::from("i2"), &problem)
        .unwrap_or_else(|_| focal_ranking.clone());
    let differences = difference_profile(&focal_ranking, &population, &f)?;
    let receivable = differences.argmin();
    let focal_set = enumerate_min_cost(&problem, &f, DEFAULT_ENUMERATION_CAP)?;

    let mut per_school: BTreeMap<usize, usize> = BTreeMap::new();
    for m in &focal_set.matchings {
        if let Some(s) = m.school_of(0) {
            *per_school.entry(s).or_default() += 1;
        }
    }
    let per_school = per_school
        .into_iter()
        .map(|(s, count)| {
            let id = problem.schools()[s].id.clone();
            let predicted = &f_sum
                + differences
                    .value(&id)
                    .expect("every school has a difference");
            (id, count, focal_set.shared_cost.clone(), predicted)
        })
        .collect();
    Ok(HomogeneousVerification {
        n,
        identical_optima: set.len(),
        identical_cost: set.shared_cost,
        expected_identical_cost: f_sum,
        receivable,
        per_school,
        focal_optima: focal_set.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testsupport::fixtures;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn misreport_beats_truth() {
        let p = fixtures::homogeneous_misreport();
        let f = UtilityTransform::identity();
        let report = exhaustive_best_response(&p, &"i1".into(), &f, DEFAULT_SCHOOL_CAP, 0).unwrap();
        assert_eq!(report.truthful_expected_cost, rat(2, 1));
        assert_eq!(
            report.best_misreport,
            Some(PreferenceProfile::strict(["s2", "s1", "s3", "s4"]))
        );
        assert_eq!(report.misreport_expected_cost, rat(1, 1));
        let names = |v: &[&str]| {
            v.iter()
                .map(|s| SchoolId::from(*s))
                .collect::<BTreeSet<_>>()
        };
        assert_eq!(report.receivable_truthful, names(&["s2", "s3", "s4"]));
        assert_eq!(report.receivable_after, names(&["s2"]));
        assert_eq!(report.reports_evaluated, 24);
    }

    #[test]
    fn nothing_to_gain_alone_or_when_preferences_differ() {
        let p = fixtures::single();
        let r =
            exhaustive_best_response(&p, &"i1".into(), &UtilityTransform::rank_minus_one(), 7, 0)
                .unwrap();
        assert!(r.best_misreport.is_none());

        let p = fixtures::opposite_pair();
        for id in ["i1", "i2"] {
            let r =
                exhaustive_best_response(&p, &id.into(), &UtilityTransform::rank_minus_one(), 7, 0)
                    .unwrap();
            assert!(r.best_misreport.is_none());
            assert_eq!(r.truthful_expected_cost, rat(0, 1));
        }
    }

    #[test]
    fn school_guard() {
        let p = fixtures::homogeneous(4);
        assert!(matches!(
            exhaustive_best_response(&p, &"i1".into(), &UtilityTransform::identity(), 3, 0),
            Err(Error::GuardExceeded { .. })
        ));
    }

    #[test]
    fn difference_profiles() {
        let p = fixtures::homogeneous_misreport();
        let pop = crate::model::ranking_of(&"i2".into(), &p).unwrap();
        let focal = crate::model::ranking_of(&"i1".into(), &p).unwrap();
        let f = UtilityTransform::identity();
        let d = difference_profile(&focal, &pop, &f).unwrap();
        let values: Vec<BigRational> = d.entries.iter().map(|(_, v)| v.clone()).collect();
        assert_eq!(values, vec![rat(3, 1), rat(-1, 1), rat(-1, 1), rat(-1, 1)]);

        let lie = p.with_preferences(0, PreferenceProfile::strict(["s2", "s1", "s3", "s4"]));
        let focal = crate::model::ranking_of(&"i1".into(), &lie).unwrap();
        let d = difference_profile(&focal, &pop, &f).unwrap();
        let values: Vec<BigRational> = d.entries.iter().map(|(_, v)| v.clone()).collect();
        assert_eq!(values, vec![rat(1, 1), rat(-1, 1), rat(0, 1), rat(0, 1)]);
        assert_eq!(d.argmin(), [SchoolId::from("s2")].into());

        let same = homogeneous_receivable_set(&pop, &pop, &f).unwrap();
        assert_eq!(same.len(), 4);
        let short = RankingFunction::new(vec![("s1".into(), 1)]);
        assert!(difference_profile(&short, &pop, &f).is_err());
    }

    #[test]
    fn homogeneous_counts_hold() {
        for n in 1..=5 {
            for f in [
                UtilityTransform::rank_minus_one(),
                UtilityTransform::exponential_auto(),
            ] {
                let v = verify_homogeneous_counts(n, &f).unwrap();
                assert!(v.holds(), "n={n} {f}: {v:?}");
            }
        }
        assert!(verify_homogeneous_counts(7, &UtilityTransform::identity()).is_err());
    }
}
