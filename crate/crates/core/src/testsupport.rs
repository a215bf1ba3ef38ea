//! Brute-force oracles, random instances, and small named instances.
//!
//! The oracle here reads ranks straight off the preference tiers and never
//! touches the seat grid, the kernel or the optimum enumeration.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_rational::BigRational;
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::enumeration::OptimumSet;
use crate::error::{Error, Result};
use crate::model::{
    validate_problem, Matching, PreferenceProfile, PriorityStructure, School, SchoolChoiceProblem,
    Student, StudentId,
};
use crate::transform::UtilityTransform;

pub const ORACLE_SEAT_GUARD: usize = 8;
pub const ORACLE_STUDENT_GUARD: usize = 10;

/// Rank of every school for every student, plus the unassigned rank, read
/// from the raw tiers: unlisted schools sit one tier below the list.
fn oracle_ranks(problem: &SchoolChoiceProblem) -> (Vec<Vec<u32>>, Vec<u32>) {
    let mut ranks = Vec::new();
    let mut unassigned = Vec::new();
    for student in problem.students() {
        let tiers = student.preferences.tiers().iter().filter(|t| !t.is_empty());
        let mut row = vec![0u32; problem.school_count()];
        let mut depth = 0;
        for tier in tiers {
            depth += 1;
            for id in tier {
                let s = problem
                    .schools()
                    .iter()
                    .position(|x| &x.id == id)
                    .expect("validated");
                row[s] = depth;
            }
        }
        let unlisted = row.contains(&0);
        let bottom = depth + u32::from(unlisted);
        for r in row.iter_mut().filter(|r| **r == 0) {
            *r = bottom;
        }
        ranks.push(row);
        unassigned.push(bottom + 1);
    }
    (ranks, unassigned)
}

/// Every minimum-cost matching, found by trying every injective placement
/// of students on seats and merging placements that agree school by school.
pub fn brute_force_optima(
    problem: &SchoolChoiceProblem,
    transform: &UtilityTransform,
) -> Result<OptimumSet> {
    validate_problem(problem).map_err(Error::InvalidProblem)?;
    let seats: Vec<usize> = problem
        .schools()
        .iter()
        .enumerate()
        .flat_map(|(s, school)| std::iter::repeat_n(s, school.capacity as usize))
        .collect();
    if seats.len() > ORACLE_SEAT_GUARD {
        return Err(Error::GuardExceeded {
            what: "seat count",
            actual: seats.len(),
            limit: ORACLE_SEAT_GUARD,
        });
    }
    let n = problem.student_count();
    if n > ORACLE_STUDENT_GUARD {
        return Err(Error::GuardExceeded {
            what: "student count",
            actual: n,
            limit: ORACLE_STUDENT_GUARD,
        });
    }
    let transform = transform.resolved_for(problem);
    let (ranks, unassigned) = oracle_ranks(problem);
    let price = |rank: u32| transform.apply(rank);
    let school_cost = ranks
        .iter()
        .map(|row| row.iter().map(|&r| price(r)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let idle_cost = unassigned
        .iter()
        .map(|&r| price(r))
        .collect::<Result<Vec<_>>>()?;

    let placed = n.min(seats.len());
    let mut distinct: BTreeSet<Vec<Option<usize>>> = BTreeSet::new();
    let mut used = vec![false; seats.len()];
    let mut current = vec![None; n];
    place(
        0,
        placed,
        n - placed,
        &seats,
        &mut used,
        &mut current,
        &mut distinct,
    );

    let mut best: Option<BigRational> = None;
    let mut winners = Vec::new();
    for assignment in distinct {
        let cost: BigRational = assignment
            .iter()
            .enumerate()
            .map(|(i, s)| match s {
                Some(s) => school_cost[i][*s].clone(),
                None => idle_cost[i].clone(),
            })
            .sum();
        match best.as_ref().map(|b| cost.cmp(b)) {
            Some(std::cmp::Ordering::Greater) => {}
            Some(std::cmp::Ordering::Equal) => winners.push(assignment),
            _ => {
                best = Some(cost);
                winners = vec![assignment];
            }
        }
    }
    let matchings = winners
        .into_iter()
        .map(|a| Matching::new(problem, a))
        .collect::<Result<Vec<_>>>()?;
    Ok(OptimumSet {
        matchings,
        shared_cost: best.expect("at least one placement"),
        exhaustive: true,
    })
}

fn place(
    student: usize,
    seats_left: usize,
    skips_left: usize,
    seats: &[usize],
    used: &mut [bool],
    current: &mut [Option<usize>],
    out: &mut BTreeSet<Vec<Option<usize>>>,
) {
    if student == current.len() {
        out.insert(current.to_vec());
        return;
    }
    if skips_left > 0 {
        current[student] = None;
        place(
            student + 1,
            seats_left,
            skips_left - 1,
            seats,
            used,
            current,
            out,
        );
    }
    if seats_left > 0 {
        for seat in 0..seats.len() {
            if used[seat] {
                continue;
            }
            used[seat] = true;
            current[student] = Some(seats[seat]);
            place(
                student + 1,
                seats_left - 1,
                skips_left,
                seats,
                used,
                current,
                out,
            );
            used[seat] = false;
        }
    }
    current[student] = None;
}

/// Parameters for [`generate_instance`].
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec {
    pub students: usize,
    pub schools: usize,
    pub cap_min: u32,
    pub cap_max: u32,
    /// Chance that a school joins the previous tier.
    pub tie_prob: f64,
    /// Chance that a preference or priority list is cut short.
    pub incomplete_prob: f64,
    /// School `k` is drawn with weight `(k + 1)^-skew`.
    pub skew: f64,
    pub seed: u64,
}

impl InstanceSpec {
    pub fn new(students: usize, schools: usize, seed: u64) -> Self {
        Self {
            students,
            schools,
            cap_min: 1,
            cap_max: 1,
            tie_prob: 0.0,
            incomplete_prob: 0.0,
            skew: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidSpec(msg.into()));
        if self.students == 0 || self.schools == 0 {
            return fail("student and school counts must be at least 1");
        }
        if self.cap_min == 0 || self.cap_min > self.cap_max {
            return fail("capacities need 1 <= cap_min <= cap_max");
        }
        if !(0.0..=1.0).contains(&self.tie_prob) || !(0.0..=1.0).contains(&self.incomplete_prob) {
            return fail("probabilities must lie in [0, 1]");
        }
        if !(self.skew >= 0.0 && self.skew.is_finite()) {
            return fail("skew must be a finite non-negative number");
        }
        Ok(())
    }
}

fn weighted_order(rng: &mut ChaCha8Rng, weights: &[f64]) -> Vec<usize> {
    let mut left: Vec<usize> = (0..weights.len()).collect();
    let mut order = Vec::with_capacity(left.len());
    while !left.is_empty() {
        let pick = WeightedIndex::new(left.iter().map(|&k| weights[k]))
            .map(|dist| dist.sample(rng))
            .unwrap_or(0);
        order.push(left.remove(pick));
    }
    order
}

fn tiered<T: Clone>(rng: &mut ChaCha8Rng, items: &[T], tie_prob: f64) -> Vec<Vec<T>> {
    let mut tiers: Vec<Vec<T>> = Vec::new();
    for item in items {
        match tiers.last_mut() {
            Some(last) if rng.gen_bool(tie_prob) => last.push(item.clone()),
            _ => tiers.push(vec![item.clone()]),
        }
    }
    tiers
}

/// A reproducible random instance: ids `i1..`, `s1..`.
pub fn generate_instance(spec: &InstanceSpec) -> Result<SchoolChoiceProblem> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let school_ids: Vec<String> = (1..=spec.schools).map(|k| format!("s{k}")).collect();
    let student_ids: Vec<StudentId> = (1..=spec.students)
        .map(|k| StudentId::new(format!("i{k}")))
        .collect();
    let weights: Vec<f64> = (0..spec.schools)
        .map(|k| ((k + 1) as f64).powf(-spec.skew))
        .collect();

    let mut students = Vec::with_capacity(spec.students);
    for id in &student_ids {
        let order: Vec<String> = weighted_order(&mut rng, &weights)
            .into_iter()
            .map(|k| school_ids[k].clone())
            .collect();
        let mut tiers = tiered(&mut rng, &order, spec.tie_prob);
        if tiers.len() > 1 && rng.gen_bool(spec.incomplete_prob) {
            tiers.truncate(rng.gen_range(1..tiers.len()));
        }
        students.push(Student::new(
            id.clone(),
            PreferenceProfile::new(
                tiers
                    .into_iter()
                    .map(|t| t.into_iter().map(Into::into).collect())
                    .collect(),
            ),
        ));
    }

    let mut schools = Vec::with_capacity(spec.schools);
    for id in &school_ids {
        let capacity = rng.gen_range(spec.cap_min..=spec.cap_max);
        let mut order = student_ids.clone();
        order.shuffle(&mut rng);
        let mut tiers = tiered(&mut rng, &order, spec.tie_prob);
        if rng.gen_bool(spec.incomplete_prob) {
            tiers.truncate(rng.gen_range(0..tiers.len()));
        }
        schools.push(
            School::new(id.as_str(), capacity).with_priorities(PriorityStructure::new(tiers)),
        );
    }
    SchoolChoiceProblem::new(students, schools)
}

/// A random strictly increasing table on ranks `1..=max_rank`.
pub fn random_table(rng: &mut impl Rng, max_rank: u32) -> UtilityTransform {
    let mut value = BigRational::new(rng.gen_range(0..4).into(), rng.gen_range(1..4).into());
    let mut values = BTreeMap::new();
    for rank in 1..=max_rank {
        values.insert(rank, value.clone());
        value += BigRational::new(rng.gen_range(1..12).into(), rng.gen_range(1..5).into());
    }
    UtilityTransform::table(values).expect("increasing by construction")
}

/// One line per student and school; equal problems give equal text.
pub fn canonical_text(problem: &SchoolChoiceProblem) -> String {
    let mut out = String::new();
    for st in problem.students() {
        let tiers: Vec<String> = st
            .preferences
            .tiers()
            .iter()
            .map(|t| t.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(","))
            .collect();
        let _ = writeln!(out, "student {} {}", st.id, tiers.join(" > "));
    }
    for sc in problem.schools() {
        let tiers: Vec<String> = sc
            .priorities
            .tiers()
            .iter()
            .map(|t| t.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(","))
            .collect();
        let _ = writeln!(
            out,
            "school {} {} {}",
            sc.id,
            sc.capacity,
            tiers.join(" > ")
        );
    }
    out
}

/// Strict-profile problem from `(student, ranking)` rows and
/// `(school, capacity)` pairs.
pub fn strict_problem(rows: &[(&str, &[&str])], schools: &[(&str, u32)]) -> SchoolChoiceProblem {
    SchoolChoiceProblem::new(
        rows.iter()
            .map(|(id, ranking)| {
                Student::new(*id, PreferenceProfile::strict(ranking.iter().copied()))
            })
            .collect(),
        schools
            .iter()
            .map(|(id, cap)| School::new(*id, *cap))
            .collect(),
    )
    .expect("fixture is valid")
}

/// `n` unit schools; student `i1` ranks by `focal`, the others by
/// `population` (both are orders of school indices).
pub fn homogeneous_population(focal: &[usize], population: &[usize]) -> SchoolChoiceProblem {
    let n = focal.len();
    let name = |k: &usize| format!("s{}", k + 1);
    let mut students = vec![Student::new(
        "i1",
        PreferenceProfile::strict(focal.iter().map(name)),
    )];
    students.extend((2..=n).map(|k| {
        Student::new(
            format!("i{k}"),
            PreferenceProfile::strict(population.iter().map(name)),
        )
    }));
    SchoolChoiceProblem::new(students, (0..n).map(|k| School::new(name(&k), 1)).collect())
        .expect("fixture is valid")
}

pub mod fixtures {
    use super::strict_problem;
    use crate::model::SchoolChoiceProblem;

    const S3: [(&str, u32); 3] = [("s1", 1), ("s2", 1), ("s3", 1)];
    const S4: [(&str, u32); 4] = [("s1", 1), ("s2", 1), ("s3", 1), ("s4", 1)];

    pub fn single() -> SchoolChoiceProblem {
        strict_problem(&[("i1", &["s1"])], &[("s1", 1)])
    }

    pub fn opposite_pair() -> SchoolChoiceProblem {
        strict_problem(
            &[("i1", &["s1", "s2"]), ("i2", &["s2", "s1"])],
            &[("s1", 1), ("s2", 1)],
        )
    }

    pub fn three_by_three() -> SchoolChoiceProblem {
        strict_problem(
            &[
                ("i1", &["s1", "s2", "s3"]),
                ("i2", &["s3", "s2", "s1"]),
                ("i3", &["s2", "s3", "s1"]),
            ],
            &S3,
        )
    }

    pub fn four_student_multi_optima() -> SchoolChoiceProblem {
        strict_problem(
            &[
                ("i1", &["s1", "s2", "s3", "s4"]),
                ("i2", &["s4", "s2", "s1", "s3"]),
                ("i3", &["s3", "s1", "s4", "s2"]),
                ("i4", &["s3", "s4", "s2", "s1"]),
            ],
            &S4,
        )
    }

    /// The cheapest exponential matching differs from another one of equal
    /// rank.
    pub fn rank_minimal_vs_cost() -> SchoolChoiceProblem {
        strict_problem(
            &[
                ("i1", &["s3", "s2", "s1"]),
                ("i2", &["s2", "s3", "s1"]),
                ("i3", &["s2", "s1", "s3"]),
            ],
            &S3,
        )
    }

    /// Rank-maximal and rank-minimal matchings disagree.
    pub fn rank_contrast_five() -> SchoolChoiceProblem {
        strict_problem(
            &[
                ("i1", &["s1", "s2", "s3", "s4", "s5"]),
                ("i2", &["s2", "s3", "s4", "s5", "s1"]),
                ("i3", &["s3", "s4", "s5", "s1", "s2"]),
                ("i4", &["s4", "s5", "s1", "s2", "s3"]),
                ("i5", &["s1", "s2", "s5", "s3", "s4"]),
            ],
            &[("s1", 1), ("s2", 1), ("s3", 1), ("s4", 1), ("s5", 1)],
        )
    }

    /// `(s1, s2, s3)` is efficient but costs more than `(s1, s3, s2)` under
    /// every strictly increasing transform.
    pub fn efficient_but_never_chosen() -> SchoolChoiceProblem {
        strict_problem(
            &[
                ("i1", &["s1", "s2", "s3"]),
                ("i2", &["s3", "s1", "s2"]),
                ("i3", &["s3", "s2", "s1"]),
            ],
            &S3,
        )
    }

    /// `i1` ranks `s2 > s3 > s4 > s1` against three students ranking
    /// `s1 > s2 > s3 > s4`.
    pub fn homogeneous_misreport() -> SchoolChoiceProblem {
        let pop: &[&str] = &["s1", "s2", "s3", "s4"];
        strict_problem(
            &[
                ("i1", &["s2", "s3", "s4", "s1"]),
                ("i2", pop),
                ("i3", pop),
                ("i4", pop),
            ],
            &S4,
        )
    }

    /// `n` students all ranking `s1 > ... > sn`, one seat each.
    pub fn homogeneous(n: usize) -> SchoolChoiceProblem {
        let order: Vec<usize> = (0..n).collect();
        super::homogeneous_population(&order, &order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_on_known_instances() {
        let f1 = UtilityTransform::rank_minus_one();
        let set = brute_force_optima(&fixtures::four_student_multi_optima(), &f1).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.shared_cost, BigRational::from_integer(2.into()));
        let set = brute_force_optima(&fixtures::single(), &f1).unwrap();
        assert_eq!(
            set.matchings,
            vec![Matching::new(&fixtures::single(), vec![Some(0)]).unwrap()]
        );
        assert!(brute_force_optima(&fixtures::homogeneous(9), &f1).is_err());
    }

    #[test]
    fn unlisted_schools_share_the_next_tier() {
        let p = strict_problem(&[("i1", &["s2"])], &[("s1", 1), ("s2", 1), ("s3", 1)]);
        let (ranks, idle) = oracle_ranks(&p);
        assert_eq!(ranks[0], vec![2, 1, 2]);
        assert_eq!(idle[0], 3);
    }

    #[test]
    fn generator_is_deterministic_and_respects_flags() {
        let spec = InstanceSpec {
            tie_prob: 0.3,
            incomplete_prob: 0.3,
            cap_max: 3,
            ..InstanceSpec::new(6, 4, 11)
        };
        let a = generate_instance(&spec).unwrap();
        let b = generate_instance(&spec).unwrap();
        assert_eq!(canonical_text(&a), canonical_text(&b));
        let strict = generate_instance(&InstanceSpec::new(6, 4, 11)).unwrap();
        let all: Vec<_> = strict.school_ids();
        for st in strict.students() {
            assert!(st.preferences.is_strict() && st.preferences.covers(&all));
        }
        assert!(generate_instance(&InstanceSpec {
            cap_min: 0,
            ..InstanceSpec::new(1, 1, 0)
        })
        .is_err());
        assert!(generate_instance(&InstanceSpec {
            tie_prob: 1.5,
            ..InstanceSpec::new(1, 1, 0)
        })
        .is_err());
    }

    #[test]
    fn skew_concentrates_first_choices() {
        let firsts = |skew: f64| {
            let mut counts = [0usize; 4];
            for seed in 0..300 {
                let p = generate_instance(&InstanceSpec {
                    skew,
                    ..InstanceSpec::new(1, 4, seed)
                })
                .unwrap();
                let top = &p.students()[0].preferences.tiers()[0][0];
                counts[p.school_index(top).unwrap()] += 1;
            }
            counts
        };
        let skewed = firsts(3.0);
        assert!(skewed[0] > 200);
    }

    #[test]
    fn random_tables_increase() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            assert!(random_table(&mut rng, 9).is_strictly_increasing(9));
        }
    }
}
