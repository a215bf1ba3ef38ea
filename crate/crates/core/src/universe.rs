//! Exhaustive listing of feasible matchings for brute-force checks.
//!
//! Only maximum-size matchings are listed: `min(students, seats)` students
//! placed. Any other matching leaves a student out next to an open seat, and
//! placing that student there is a strict improvement for every strictly
//! increasing transform, so nothing smaller can be optimal, efficient or of
//! lower rank.

use crate::model::SchoolChoiceProblem;

/// Largest student count the brute-force searches accept.
pub const STUDENT_GUARD: usize = 10;

/// Calls `visit` once per maximum-size feasible matching, as a
/// student-indexed school assignment.
pub fn for_each_feasible<F>(problem: &SchoolChoiceProblem, mut visit: F)
where
    F: FnMut(&[Option<usize>]),
{
    let n = problem.student_count();
    let target = n.min(problem.total_seats());
    let mut remaining: Vec<u32> = problem.schools().iter().map(|s| s.capacity).collect();
    let mut current = vec![None; n];
    walk(
        0,
        target,
        n - target,
        &mut remaining,
        &mut current,
        &mut visit,
    );
}

fn walk<F: FnMut(&[Option<usize>])>(
    student: usize,
    seats_left: usize,
    skips_left: usize,
    remaining: &mut [u32],
    current: &mut [Option<usize>],
    visit: &mut F,
) {
    if student == current.len() {
        visit(current);
        return;
    }
    if skips_left > 0 {
        current[student] = None;
        walk(
            student + 1,
            seats_left,
            skips_left - 1,
            remaining,
            current,
            visit,
        );
    }
    if seats_left > 0 {
        for school in 0..remaining.len() {
            if remaining[school] == 0 {
                continue;
            }
            remaining[school] -= 1;
            current[student] = Some(school);
            walk(
                student + 1,
                seats_left - 1,
                skips_left,
                remaining,
                current,
                visit,
            );
            remaining[school] += 1;
        }
    }
    current[student] = None;
}

/// Number of maximum-size feasible matchings.
pub fn count_feasible(problem: &SchoolChoiceProblem) -> usize {
    let mut count = 0;
    for_each_feasible(problem, |_| count += 1);
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PreferenceProfile, School, Student};

    fn problem(students: usize, caps: &[u32]) -> SchoolChoiceProblem {
        let names: Vec<String> = (1..=caps.len()).map(|k| format!("s{k}")).collect();
        SchoolChoiceProblem::new(
            (1..=students)
                .map(|k| Student::new(format!("i{k}"), PreferenceProfile::strict(names.clone())))
                .collect(),
            names
                .iter()
                .zip(caps)
                .map(|(id, &c)| School::new(id.as_str(), c))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn counts_match_combinatorics() {
        assert_eq!(count_feasible(&problem(3, &[1, 1, 1])), 6);
        // 2 students over 3 unit seats: 3 * 2
        assert_eq!(count_feasible(&problem(2, &[1, 1, 1])), 6);
        // 3 students, one seat: who gets it
        assert_eq!(count_feasible(&problem(3, &[1])), 3);
        // 3 students into capacities (2, 1): choose who goes to s2
        assert_eq!(count_feasible(&problem(3, &[2, 1])), 3);
        // 2 students into capacities (2, 2): each picks freely
        assert_eq!(count_feasible(&problem(2, &[2, 2])), 4);
    }

    #[test]
    fn every_listed_matching_is_maximum_and_within_capacity() {
        let p = problem(4, &[2, 1]);
        for_each_feasible(&p, |a| {
            assert_eq!(a.iter().flatten().count(), 3);
            assert!(a.iter().filter(|s| **s == Some(0)).count() <= 2);
        });
    }
}
