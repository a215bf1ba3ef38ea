//! Metrics and certificates for a single matching.
//!
//! Ranks come from completed profiles; an unassigned student counts as one
//! rank below their last tier.

use std::collections::BTreeSet;

use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::model::{Matching, RankTable, SchoolChoiceProblem, SchoolId, StudentId};
use crate::transform::{cost_of_matching, UtilityTransform};
use crate::universe::{for_each_feasible, STUDENT_GUARD};

fn guarded(problem: &SchoolChoiceProblem) -> Result<()> {
    let n = problem.student_count();
    if n > STUDENT_GUARD {
        return Err(Error::GuardExceeded {
            what: "student count",
            actual: n,
            limit: STUDENT_GUARD,
        });
    }
    Ok(())
}

fn checked_table(problem: &SchoolChoiceProblem, matching: &Matching) -> Result<RankTable> {
    let table = problem.rank_table()?;
    matching.check(problem)?;
    Ok(table)
}

fn ranks<'a>(
    table: &'a RankTable,
    assignment: &'a [Option<usize>],
) -> impl Iterator<Item = u32> + 'a {
    assignment
        .iter()
        .enumerate()
        .map(|(i, s)| table.rank_of(i, *s))
}

/// `sum(rank - 1)` over all students.
pub fn preference_index(problem: &SchoolChoiceProblem, matching: &Matching) -> Result<u64> {
    let table = checked_table(problem, matching)?;
    Ok(ranks(&table, matching.assignment())
        .map(|r| r as u64 - 1)
        .sum())
}

/// Largest rank any student receives.
pub fn matching_rank(problem: &SchoolChoiceProblem, matching: &Matching) -> Result<u32> {
    let table = checked_table(problem, matching)?;
    Ok(ranks(&table, matching.assignment()).max().unwrap_or(1))
}

/// Smallest rank over all feasible matchings.
pub fn minimum_rank(problem: &SchoolChoiceProblem) -> Result<u32> {
    guarded(problem)?;
    let table = problem.rank_table()?;
    let mut best = u32::MAX;
    for_each_feasible(problem, |a| {
        best = best.min(ranks(&table, a).max().unwrap_or(1));
    });
    Ok(best)
}

pub fn is_rank_minimal(problem: &SchoolChoiceProblem, matching: &Matching) -> Result<bool> {
    guarded(problem)?;
    Ok(matching_rank(problem, matching)? == minimum_rank(problem)?)
}

/// Students placed at rank 1, 2, ... up to the deepest completed tier.
/// Unassigned students are not counted.
pub fn rank_signature(problem: &SchoolChoiceProblem, matching: &Matching) -> Result<Vec<usize>> {
    let table = checked_table(problem, matching)?;
    Ok(signature(&table, matching.assignment()))
}

fn signature(table: &RankTable, assignment: &[Option<usize>]) -> Vec<usize> {
    let mut counts = vec![0usize; table.highest_rank(false).max(1) as usize];
    for (i, school) in assignment.iter().enumerate() {
        if let Some(s) = school {
            counts[table.rank(i, *s) as usize - 1] += 1;
        }
    }
    counts
}

/// Matchings whose signature is lexicographically largest from rank 1.
pub fn rank_maximal_matchings(problem: &SchoolChoiceProblem) -> Result<Vec<Matching>> {
    guarded(problem)?;
    let table = problem.rank_table()?;
    let mut best: Option<Vec<usize>> = None;
    let mut winners = Vec::new();
    for_each_feasible(problem, |a| {
        let sig = signature(&table, a);
        match best.as_ref().map(|b| sig.cmp(b)) {
            Some(std::cmp::Ordering::Less) => {}
            Some(std::cmp::Ordering::Equal) => winners.push(Matching::from_raw(a.to_vec())),
            _ => {
                best = Some(sig);
                winners = vec![Matching::from_raw(a.to_vec())];
            }
        }
    });
    winners.sort();
    Ok(winners)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParetoCertificate {
    Efficient,
    /// A matching no student likes less and someone likes more.
    DominatedBy(Matching),
}

impl ParetoCertificate {
    pub fn is_efficient(&self) -> bool {
        matches!(self, ParetoCertificate::Efficient)
    }
}

/// True iff `other` makes nobody worse off and somebody better off.
pub fn dominates(
    problem: &SchoolChoiceProblem,
    other: &Matching,
    matching: &Matching,
) -> Result<bool> {
    let table = checked_table(problem, matching)?;
    other.check(problem)?;
    let mut strict = false;
    for i in 0..matching.len() {
        let before = table.rank_of(i, matching.school_of(i));
        let after = table.rank_of(i, other.school_of(i));
        if after > before {
            return Ok(false);
        }
        strict |= after < before;
    }
    Ok(strict)
}

/// Searches every matching that leaves no student worse off.
pub fn is_pareto_efficient(
    problem: &SchoolChoiceProblem,
    matching: &Matching,
) -> Result<ParetoCertificate> {
    guarded(problem)?;
    let table = checked_table(problem, matching)?;
    let limits: Vec<u32> = (0..matching.len())
        .map(|i| table.rank_of(i, matching.school_of(i)))
        .collect();
    let mut remaining: Vec<u32> = problem.schools().iter().map(|s| s.capacity).collect();
    let mut current = vec![None; matching.len()];
    let found = search_dominator(&table, &limits, 0, false, &mut remaining, &mut current);
    Ok(match found {
        Some(assignment) => ParetoCertificate::DominatedBy(Matching::from_raw(assignment)),
        None => ParetoCertificate::Efficient,
    })
}

fn search_dominator(
    table: &RankTable,
    limits: &[u32],
    student: usize,
    strict: bool,
    remaining: &mut [u32],
    current: &mut [Option<usize>],
) -> Option<Vec<Option<usize>>> {
    if student == limits.len() {
        return strict.then(|| current.to_vec());
    }
    let limit = limits[student];
    for school in 0..remaining.len() {
        let r = table.rank(student, school);
        if remaining[school] == 0 || r > limit {
            continue;
        }
        remaining[school] -= 1;
        current[student] = Some(school);
        let found = search_dominator(
            table,
            limits,
            student + 1,
            strict || r < limit,
            remaining,
            current,
        );
        remaining[school] += 1;
        if found.is_some() {
            return found;
        }
    }
    if limit == table.unassigned_rank(student) {
        current[student] = None;
        return search_dominator(table, limits, student + 1, strict, remaining, current);
    }
    None
}

/// `violated` would rather have `school`, where `occupant` sits with
/// strictly lower priority.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ViolationPair {
    pub occupant: StudentId,
    pub violated: StudentId,
    pub school: SchoolId,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PriorityViolations {
    pub violated_students: BTreeSet<StudentId>,
    pub pairs: BTreeSet<ViolationPair>,
}

pub fn priority_violations(
    problem: &SchoolChoiceProblem,
    matching: &Matching,
) -> Result<PriorityViolations> {
    let table = checked_table(problem, matching)?;
    let students = problem.students();
    let mut out = PriorityViolations::default();
    for (s, school) in problem.schools().iter().enumerate() {
        if school.priorities.is_empty() {
            continue;
        }
        let holders: Vec<usize> = (0..students.len())
            .filter(|&j| matching.school_of(j) == Some(s))
            .collect();
        for (i, student) in students.iter().enumerate() {
            if table.rank(i, s) >= table.rank_of(i, matching.school_of(i)) {
                continue;
            }
            let tier = school.priorities.tier_of(&student.id);
            for &j in &holders {
                if tier < school.priorities.tier_of(&students[j].id) {
                    out.violated_students.insert(student.id.clone());
                    out.pairs.insert(ViolationPair {
                        occupant: students[j].id.clone(),
                        violated: student.id.clone(),
                        school: school.id.clone(),
                    });
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchingReport {
    pub preference_index: u64,
    pub rank: u32,
    pub rank_signature: Vec<usize>,
    pub cost: BigRational,
    pub violations: PriorityViolations,
    /// `None` when the instance is above the brute-force guard.
    pub pareto: Option<ParetoCertificate>,
    pub rank_minimal: Option<bool>,
}

pub fn analyze_matching(
    problem: &SchoolChoiceProblem,
    matching: &Matching,
    transform: &UtilityTransform,
) -> Result<MatchingReport> {
    let within_guard = guarded(problem).is_ok();
    Ok(MatchingReport {
        preference_index: preference_index(problem, matching)?,
        rank: matching_rank(problem, matching)?,
        rank_signature: rank_signature(problem, matching)?,
        cost: cost_of_matching(transform, problem, matching)?,
        violations: priority_violations(problem, matching)?,
        pareto: within_guard
            .then(|| is_pareto_efficient(problem, matching))
            .transpose()?,
        rank_minimal: within_guard
            .then(|| is_rank_minimal(problem, matching))
            .transpose()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PreferenceProfile, PriorityStructure, School, Student};
    use crate::testsupport::fixtures;
    use num_traits::ToPrimitive;

    fn ids(p: &SchoolChoiceProblem, pairs: &[(&str, &str)]) -> Matching {
        Matching::from_ids(p, pairs.iter().map(|(a, b)| (*a, Some(*b)))).unwrap()
    }

    #[test]
    fn index_and_rank_values() {
        let p = fixtures::four_student_multi_optima();
        let m2 = ids(
            &p,
            &[("i1", "s2"), ("i2", "s4"), ("i3", "s1"), ("i4", "s3")],
        );
        assert_eq!(preference_index(&p, &m2).unwrap(), 2);

        let p = fixtures::rank_minimal_vs_cost();
        let m1 = ids(&p, &[("i1", "s3"), ("i2", "s2"), ("i3", "s1")]);
        let m2 = ids(&p, &[("i1", "s2"), ("i2", "s3"), ("i3", "s1")]);
        assert_eq!(preference_index(&p, &m1).unwrap(), 1);
        assert_eq!(preference_index(&p, &m2).unwrap(), 3);
        assert_eq!(
            is_pareto_efficient(&p, &m2).unwrap(),
            ParetoCertificate::DominatedBy(m1.clone())
        );
        assert!(is_pareto_efficient(&p, &m1).unwrap().is_efficient());
    }

    #[test]
    fn rank_contrast() {
        let p = fixtures::rank_contrast_five();
        let maximal = ids(
            &p,
            &[
                ("i1", "s1"),
                ("i2", "s2"),
                ("i3", "s3"),
                ("i4", "s4"),
                ("i5", "s5"),
            ],
        );
        let other = ids(
            &p,
            &[
                ("i1", "s5"),
                ("i2", "s2"),
                ("i3", "s3"),
                ("i4", "s4"),
                ("i5", "s1"),
            ],
        );
        let low = ids(
            &p,
            &[
                ("i1", "s2"),
                ("i2", "s3"),
                ("i3", "s4"),
                ("i4", "s5"),
                ("i5", "s1"),
            ],
        );
        assert_eq!(rank_signature(&p, &maximal).unwrap(), vec![4, 0, 1, 0, 0]);
        assert_eq!(rank_signature(&p, &other).unwrap(), vec![4, 0, 0, 0, 1]);
        assert_eq!(matching_rank(&p, &maximal).unwrap(), 3);
        assert_eq!(matching_rank(&p, &other).unwrap(), 5);
        assert_eq!(matching_rank(&p, &low).unwrap(), 2);
        assert!(is_rank_minimal(&p, &low).unwrap());
        assert!(!is_rank_minimal(&p, &maximal).unwrap());
        assert_eq!(rank_maximal_matchings(&p).unwrap(), vec![maximal]);
    }

    #[test]
    fn both_witness_matchings_are_efficient() {
        let p = fixtures::efficient_but_never_chosen();
        for m in [
            ids(&p, &[("i1", "s1"), ("i2", "s2"), ("i3", "s3")]),
            ids(&p, &[("i1", "s1"), ("i2", "s3"), ("i3", "s2")]),
        ] {
            assert!(is_pareto_efficient(&p, &m).unwrap().is_efficient());
        }
    }

    #[test]
    fn unassigned_students() {
        let p = SchoolChoiceProblem::new(
            vec![
                Student::new("i1", PreferenceProfile::strict(["s1"])),
                Student::new("i2", PreferenceProfile::strict(["s1"])),
            ],
            vec![School::new("s1", 1)],
        )
        .unwrap();
        let m = Matching::from_ids(&p, [("i1", Some("s1")), ("i2", None)]).unwrap();
        assert_eq!(preference_index(&p, &m).unwrap(), 1);
        assert_eq!(matching_rank(&p, &m).unwrap(), 2);
        assert_eq!(rank_signature(&p, &m).unwrap(), vec![1]);
        assert!(is_pareto_efficient(&p, &m).unwrap().is_efficient());
        let empty = Matching::from_ids(&p, [("i1", None), ("i2", None)]).unwrap();
        assert!(!is_pareto_efficient(&p, &empty).unwrap().is_efficient());
    }

    #[test]
    fn priority_violation_cases() {
        let p = fixtures::three_by_three();
        let m = ids(&p, &[("i1", "s1"), ("i2", "s3"), ("i3", "s2")]);
        assert_eq!(
            priority_violations(&p, &m).unwrap(),
            PriorityViolations::default()
        );

        let two = |tiers: Vec<Vec<&str>>| {
            SchoolChoiceProblem::new(
                vec![
                    Student::new("i1", PreferenceProfile::strict(["s1"])),
                    Student::new("i2", PreferenceProfile::strict(["s1"])),
                ],
                vec![School::new("s1", 1).with_priorities(PriorityStructure::new(
                    tiers
                        .into_iter()
                        .map(|t| t.into_iter().map(StudentId::from).collect())
                        .collect(),
                ))],
            )
            .unwrap()
        };
        let p = two(vec![vec!["i2"], vec!["i1"]]);
        let m = Matching::from_ids(&p, [("i1", Some("s1")), ("i2", None)]).unwrap();
        let v = priority_violations(&p, &m).unwrap();
        assert_eq!(v.violated_students, [StudentId::from("i2")].into());
        // same tier: no violation
        let p = two(vec![vec!["i1", "i2"]]);
        assert!(priority_violations(&p, &m).unwrap().pairs.is_empty());
    }

    #[test]
    fn one_student_violated_twice() {
        // i3 wants s1 (2 seats) held by i1 and i2, both below i3
        let p = SchoolChoiceProblem::new(
            vec![
                Student::new("i1", PreferenceProfile::strict(["s1", "s2"])),
                Student::new("i2", PreferenceProfile::strict(["s1", "s2"])),
                Student::new("i3", PreferenceProfile::strict(["s1", "s2"])),
            ],
            vec![
                School::new("s1", 2).with_priorities(PriorityStructure::new(vec![
                    vec!["i3".into()],
                    vec!["i1".into(), "i2".into()],
                ])),
                School::new("s2", 1),
            ],
        )
        .unwrap();
        let m = Matching::from_ids(
            &p,
            [("i1", Some("s1")), ("i2", Some("s1")), ("i3", Some("s2"))],
        )
        .unwrap();
        let v = priority_violations(&p, &m).unwrap();
        assert_eq!(v.violated_students.len(), 1);
        assert_eq!(v.pairs.len(), 2);
    }

    #[test]
    fn report_combines_metrics() {
        let p = fixtures::rank_minimal_vs_cost();
        let m2 = ids(&p, &[("i1", "s2"), ("i2", "s3"), ("i3", "s1")]);
        let r = analyze_matching(&p, &m2, &UtilityTransform::exponential(3).unwrap()).unwrap();
        assert_eq!(r.cost.to_integer().to_i64(), Some(27));
        assert_eq!(r.preference_index, 3);
        assert_eq!(r.rank, 2);
        assert_eq!(r.rank_minimal, Some(true));
        assert!(matches!(r.pareto, Some(ParetoCertificate::DominatedBy(_))));
    }
}
