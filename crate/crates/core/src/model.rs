//! Students, schools, tiered preferences and priorities, and matchings.
//!
//! Raw preference profiles may be partial. Every consumer of ranks works on
//! completed profiles: the unranked schools of a student who listed `r` tiers
//! share the single tier `r + 1`.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(id: &str) -> Self {
                Self(id.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(id: String) -> Self {
                Self(id)
            }
        }
    };
}

id_type!(
    /// Opaque student token, unique within a problem.
    StudentId
);
id_type!(
    /// Opaque school token, unique within a problem.
    SchoolId
);

/// Ordered tiers of schools; every school in tier `j` is preferred to every
/// school in tier `k` iff `j < k`. Tiers with more than one school encode
/// indifference.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PreferenceProfile {
    tiers: Vec<Vec<SchoolId>>,
}

impl PreferenceProfile {
    pub fn new(tiers: Vec<Vec<SchoolId>>) -> Self {
        Self { tiers }
    }

    /// A strict profile, one school per tier.
    pub fn strict<I, S>(schools: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<SchoolId>,
    {
        Self {
            tiers: schools.into_iter().map(|s| vec![s.into()]).collect(),
        }
    }

    pub fn tiers(&self) -> &[Vec<SchoolId>] {
        &self.tiers
    }

    pub fn is_strict(&self) -> bool {
        self.tiers.iter().all(|tier| tier.len() == 1)
    }

    /// 1-based tier index of `school`, if ranked.
    pub fn rank_of(&self, school: &SchoolId) -> Option<u32> {
        self.tiers
            .iter()
            .position(|tier| tier.contains(school))
            .map(|idx| idx as u32 + 1)
    }

    pub fn ranked_schools(&self) -> impl Iterator<Item = &SchoolId> {
        self.tiers.iter().flatten()
    }

    pub fn covers(&self, schools: &[SchoolId]) -> bool {
        schools.iter().all(|s| self.rank_of(s).is_some())
    }
}

/// Puts every school of `all_schools` missing from `profile` into one new
/// bottom tier. Complete profiles come back unchanged (empty tiers are
/// dropped).
pub fn complete_preferences(
    profile: &PreferenceProfile,
    all_schools: &[SchoolId],
) -> Result<PreferenceProfile> {
    let known: HashSet<&SchoolId> = all_schools.iter().collect();
    if let Some(unknown) = profile.ranked_schools().find(|s| !known.contains(s)) {
        return Err(Error::UnknownSchool(unknown.clone()));
    }
    let mut tiers: Vec<Vec<SchoolId>> = profile
        .tiers
        .iter()
        .filter(|tier| !tier.is_empty())
        .cloned()
        .collect();
    let ranked: HashSet<&SchoolId> = profile.ranked_schools().collect();
    let rest: Vec<SchoolId> = all_schools
        .iter()
        .filter(|s| !ranked.contains(s))
        .cloned()
        .collect();
    if !rest.is_empty() {
        tiers.push(rest);
    }
    Ok(PreferenceProfile { tiers })
}

/// Ordered tiers of students at one school. Students missing from every tier
/// share an implicit lowest tier.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PriorityStructure {
    tiers: Vec<Vec<StudentId>>,
}

impl PriorityStructure {
    pub fn new(tiers: Vec<Vec<StudentId>>) -> Self {
        Self { tiers }
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn tiers(&self) -> &[Vec<StudentId>] {
        &self.tiers
    }

    pub fn is_empty(&self) -> bool {
        self.tiers.is_empty()
    }

    /// 0-based tier of `student`; omitted students land one past the last tier.
    pub fn tier_of(&self, student: &StudentId) -> usize {
        self.tiers
            .iter()
            .position(|tier| tier.contains(student))
            .unwrap_or(self.tiers.len())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Student {
    pub id: StudentId,
    pub preferences: PreferenceProfile,
}

impl Student {
    pub fn new(id: impl Into<StudentId>, preferences: PreferenceProfile) -> Self {
        Self {
            id: id.into(),
            preferences,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct School {
    pub id: SchoolId,
    pub capacity: u32,
    pub priorities: PriorityStructure,
}

impl School {
    pub fn new(id: impl Into<SchoolId>, capacity: u32) -> Self {
        Self {
            id: id.into(),
            capacity,
            priorities: PriorityStructure::none(),
        }
    }

    pub fn with_priorities(mut self, priorities: PriorityStructure) -> Self {
        self.priorities = priorities;
        self
    }
}

/// A problem violation reported by [`validate_problem`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoStudents,
    NoSchools,
    EmptyStudentId {
        position: usize,
    },
    EmptySchoolId {
        position: usize,
    },
    DuplicateStudent(StudentId),
    DuplicateSchool(SchoolId),
    ZeroCapacity(SchoolId),
    EmptyPreferenceTier {
        student: StudentId,
        tier: usize,
    },
    RepeatedSchool {
        student: StudentId,
        school: SchoolId,
    },
    UnknownSchool {
        student: StudentId,
        school: SchoolId,
    },
    EmptyPriorityTier {
        school: SchoolId,
        tier: usize,
    },
    RepeatedStudent {
        school: SchoolId,
        student: StudentId,
    },
    UnknownStudent {
        school: SchoolId,
        student: StudentId,
    },
}

impl Violation {
    /// The identifier a diagnostic should point at, when there is one.
    pub fn anchor(&self) -> Option<&str> {
        match self {
            Violation::NoStudents
            | Violation::NoSchools
            | Violation::EmptyStudentId { .. }
            | Violation::EmptySchoolId { .. } => None,
            Violation::DuplicateStudent(id) => Some(id.as_str()),
            Violation::DuplicateSchool(id) | Violation::ZeroCapacity(id) => Some(id.as_str()),
            Violation::EmptyPreferenceTier { student, .. }
            | Violation::RepeatedSchool { student, .. }
            | Violation::UnknownSchool { student, .. } => Some(student.as_str()),
            Violation::EmptyPriorityTier { school, .. }
            | Violation::RepeatedStudent { school, .. }
            | Violation::UnknownStudent { school, .. } => Some(school.as_str()),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoStudents => write!(f, "no students"),
            Violation::NoSchools => write!(f, "no schools"),
            Violation::EmptyStudentId { position } => {
                write!(f, "student #{} has an empty id", position + 1)
            }
            Violation::EmptySchoolId { position } => {
                write!(f, "school #{} has an empty id", position + 1)
            }
            Violation::DuplicateStudent(id) => write!(f, "duplicate student id `{id}`"),
            Violation::DuplicateSchool(id) => write!(f, "duplicate school id `{id}`"),
            Violation::ZeroCapacity(id) => write!(f, "school `{id}` has zero capacity"),
            Violation::EmptyPreferenceTier { student, tier } => {
                write!(
                    f,
                    "student `{student}` has an empty preference tier #{}",
                    tier + 1
                )
            }
            Violation::RepeatedSchool { student, school } => {
                write!(
                    f,
                    "student `{student}` ranks school `{school}` more than once"
                )
            }
            Violation::UnknownSchool { student, school } => {
                write!(f, "student `{student}` ranks unknown school `{school}`")
            }
            Violation::EmptyPriorityTier { school, tier } => {
                write!(
                    f,
                    "school `{school}` has an empty priority tier #{}",
                    tier + 1
                )
            }
            Violation::RepeatedStudent { school, student } => {
                write!(
                    f,
                    "school `{school}` lists student `{student}` more than once"
                )
            }
            Violation::UnknownStudent { school, student } => {
                write!(
                    f,
                    "school `{school}` prioritizes unknown student `{student}`"
                )
            }
        }
    }
}

pub type ValidationResult = std::result::Result<(), Vec<Violation>>;

/// A school-choice problem: student preferences, school priorities and
/// capacities.
#[derive(Debug, Clone)]
pub struct SchoolChoiceProblem {
    students: Vec<Student>,
    schools: Vec<School>,
    student_index: HashMap<StudentId, usize>,
    school_index: HashMap<SchoolId, usize>,
}

impl PartialEq for SchoolChoiceProblem {
    fn eq(&self, other: &Self) -> bool {
        self.students == other.students && self.schools == other.schools
    }
}

impl Eq for SchoolChoiceProblem {}

impl SchoolChoiceProblem {
    /// Builds and validates a problem.
    pub fn new(students: Vec<Student>, schools: Vec<School>) -> Result<Self> {
        let problem = Self::from_parts(students, schools);
        validate_problem(&problem).map_err(Error::InvalidProblem)?;
        Ok(problem)
    }

    /// Builds a problem without validating it; see [`validate_problem`].
    pub fn from_parts(students: Vec<Student>, schools: Vec<School>) -> Self {
        let mut student_index = HashMap::with_capacity(students.len());
        for (idx, student) in students.iter().enumerate() {
            student_index.entry(student.id.clone()).or_insert(idx);
        }
        let mut school_index = HashMap::with_capacity(schools.len());
        for (idx, school) in schools.iter().enumerate() {
            school_index.entry(school.id.clone()).or_insert(idx);
        }
        Self {
            students,
            schools,
            student_index,
            school_index,
        }
    }

    pub fn students(&self) -> &[Student] {
        &self.students
    }

    pub fn schools(&self) -> &[School] {
        &self.schools
    }

    pub fn student_count(&self) -> usize {
        self.students.len()
    }

    pub fn school_count(&self) -> usize {
        self.schools.len()
    }

    pub fn school_ids(&self) -> Vec<SchoolId> {
        self.schools.iter().map(|s| s.id.clone()).collect()
    }

    pub fn total_seats(&self) -> usize {
        self.schools.iter().map(|s| s.capacity as usize).sum()
    }

    pub fn student_index(&self, id: &StudentId) -> Option<usize> {
        self.student_index.get(id).copied()
    }

    pub fn school_index(&self, id: &SchoolId) -> Option<usize> {
        self.school_index.get(id).copied()
    }

    pub fn require_student(&self, id: &StudentId) -> Result<usize> {
        self.student_index(id)
            .ok_or_else(|| Error::UnknownStudent(id.clone()))
    }

    pub fn require_school(&self, id: &SchoolId) -> Result<usize> {
        self.school_index(id)
            .ok_or_else(|| Error::UnknownSchool(id.clone()))
    }

    /// The same problem with every preference profile completed.
    pub fn completed(&self) -> Result<Self> {
        let all = self.school_ids();
        let students = self
            .students
            .iter()
            .map(|st| {
                Ok(Student {
                    id: st.id.clone(),
                    preferences: complete_preferences(&st.preferences, &all)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_parts(students, self.schools.clone()))
    }

    /// A copy with one student's profile replaced.
    pub fn with_preferences(&self, student: usize, preferences: PreferenceProfile) -> Self {
        let mut students = self.students.clone();
        students[student].preferences = preferences;
        Self::from_parts(students, self.schools.clone())
    }

    /// Rank table over completed profiles. Fails on invalid problems.
    pub fn rank_table(&self) -> Result<RankTable> {
        validate_problem(self).map_err(Error::InvalidProblem)?;
        RankTable::build(self)
    }
}

/// Checks ids, tiers, references and capacities, collecting every violation.
pub fn validate_problem(problem: &SchoolChoiceProblem) -> ValidationResult {
    let mut violations = Vec::new();
    if problem.students.is_empty() {
        violations.push(Violation::NoStudents);
    }
    if problem.schools.is_empty() {
        violations.push(Violation::NoSchools);
    }

    let mut seen_students = HashSet::new();
    for (position, student) in problem.students.iter().enumerate() {
        if student.id.as_str().is_empty() {
            violations.push(Violation::EmptyStudentId { position });
        } else if !seen_students.insert(&student.id) {
            violations.push(Violation::DuplicateStudent(student.id.clone()));
        }
    }
    let mut seen_schools = HashSet::new();
    for (position, school) in problem.schools.iter().enumerate() {
        if school.id.as_str().is_empty() {
            violations.push(Violation::EmptySchoolId { position });
        } else if !seen_schools.insert(&school.id) {
            violations.push(Violation::DuplicateSchool(school.id.clone()));
        }
        if school.capacity == 0 {
            violations.push(Violation::ZeroCapacity(school.id.clone()));
        }
    }

    for student in &problem.students {
        let mut ranked = HashSet::new();
        for (tier_idx, tier) in student.preferences.tiers().iter().enumerate() {
            if tier.is_empty() {
                violations.push(Violation::EmptyPreferenceTier {
                    student: student.id.clone(),
                    tier: tier_idx,
                });
            }
            for school in tier {
                if !seen_schools.contains(school) {
                    violations.push(Violation::UnknownSchool {
                        student: student.id.clone(),
                        school: school.clone(),
                    });
                } else if !ranked.insert(school) {
                    violations.push(Violation::RepeatedSchool {
                        student: student.id.clone(),
                        school: school.clone(),
                    });
                }
            }
        }
    }

    for school in &problem.schools {
        let mut listed = HashSet::new();
        for (tier_idx, tier) in school.priorities.tiers().iter().enumerate() {
            if tier.is_empty() {
                violations.push(Violation::EmptyPriorityTier {
                    school: school.id.clone(),
                    tier: tier_idx,
                });
            }
            for student in tier {
                if !seen_students.contains(student) {
                    violations.push(Violation::UnknownStudent {
                        school: school.id.clone(),
                        student: student.clone(),
                    });
                } else if !listed.insert(student) {
                    violations.push(Violation::RepeatedStudent {
                        school: school.id.clone(),
                        student: student.clone(),
                    });
                }
            }
        }
    }

    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// A student's rank for every school (1 = best, ties share a rank).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankingFunction {
    ranks: Vec<(SchoolId, u32)>,
}

impl RankingFunction {
    pub fn new(ranks: Vec<(SchoolId, u32)>) -> Self {
        Self { ranks }
    }

    /// Ranking of a completed profile over `schools`, in that order.
    pub fn from_profile(profile: &PreferenceProfile, schools: &[SchoolId]) -> Option<Self> {
        schools
            .iter()
            .map(|s| profile.rank_of(s).map(|r| (s.clone(), r)))
            .collect::<Option<Vec<_>>>()
            .map(|ranks| Self { ranks })
    }

    pub fn rank(&self, school: &SchoolId) -> Option<u32> {
        self.ranks
            .iter()
            .find(|(s, _)| s == school)
            .map(|&(_, r)| r)
    }

    pub fn entries(&self) -> &[(SchoolId, u32)] {
        &self.ranks
    }

    pub fn schools(&self) -> impl Iterator<Item = &SchoolId> {
        self.ranks.iter().map(|(s, _)| s)
    }

    pub fn max_rank(&self) -> u32 {
        self.ranks.iter().map(|&(_, r)| r).max().unwrap_or(0)
    }
}

/// Ranking function of `student`; the profile must already be complete.
pub fn ranking_of(student: &StudentId, problem: &SchoolChoiceProblem) -> Result<RankingFunction> {
    let idx = problem.require_student(student)?;
    let profile = &problem.students[idx].preferences;
    RankingFunction::from_profile(profile, &problem.school_ids())
        .ok_or_else(|| Error::IncompleteProfile(student.clone()))
}

/// Dense student x school rank matrix over completed profiles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankTable {
    ranks: Vec<Vec<u32>>,
    max_rank: Vec<u32>,
}

impl RankTable {
    fn build(problem: &SchoolChoiceProblem) -> Result<Self> {
        let all = problem.school_ids();
        let mut ranks = Vec::with_capacity(problem.student_count());
        let mut max_rank = Vec::with_capacity(problem.student_count());
        for student in &problem.students {
            let completed = complete_preferences(&student.preferences, &all)?;
            let mut row = vec![0u32; all.len()];
            for (tier_idx, tier) in completed.tiers().iter().enumerate() {
                for school in tier {
                    let s = problem.require_school(school)?;
                    row[s] = tier_idx as u32 + 1;
                }
            }
            max_rank.push(completed.tiers().len() as u32);
            ranks.push(row);
        }
        Ok(Self { ranks, max_rank })
    }

    /// Table from explicit ranks; used for ad-hoc tests of rank arithmetic.
    pub fn from_rows(ranks: Vec<Vec<u32>>) -> Self {
        let max_rank = ranks
            .iter()
            .map(|row| row.iter().copied().max().unwrap_or(0))
            .collect();
        Self { ranks, max_rank }
    }

    pub fn students(&self) -> usize {
        self.ranks.len()
    }

    pub fn rank(&self, student: usize, school: usize) -> u32 {
        self.ranks[student][school]
    }

    pub fn row(&self, student: usize) -> &[u32] {
        &self.ranks[student]
    }

    /// Largest completed rank of `student`.
    pub fn max_rank(&self, student: usize) -> u32 {
        self.max_rank[student]
    }

    /// Rank charged to `student` when left without a school.
    pub fn unassigned_rank(&self, student: usize) -> u32 {
        self.max_rank[student] + 1
    }

    /// Rank of an assignment, with `None` meaning unassigned.
    pub fn rank_of(&self, student: usize, school: Option<usize>) -> u32 {
        match school {
            Some(s) => self.ranks[student][s],
            None => self.unassigned_rank(student),
        }
    }

    /// Highest rank any cell of a seat grid can carry.
    pub fn highest_rank(&self, with_unassigned: bool) -> u32 {
        let top = self.max_rank.iter().copied().max().unwrap_or(0);
        if with_unassigned {
            top + 1
        } else {
            top
        }
    }
}

/// Student -> school assignment (or unassigned), indexed by the problem's
/// student order. Construction enforces the capacity invariant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Matching {
    assignment: Vec<Option<usize>>,
}

impl Matching {
    pub fn new(problem: &SchoolChoiceProblem, assignment: Vec<Option<usize>>) -> Result<Self> {
        if assignment.len() != problem.student_count() {
            return Err(Error::InvalidMatching(format!(
                "{} assignments for {} students",
                assignment.len(),
                problem.student_count()
            )));
        }
        let mut load = vec![0u32; problem.school_count()];
        for school in assignment.iter().flatten() {
            let slot = load.get_mut(*school).ok_or_else(|| {
                Error::InvalidMatching(format!("school index {school} out of range"))
            })?;
            *slot += 1;
        }
        for (school, &count) in problem.schools.iter().zip(&load) {
            if count > school.capacity {
                return Err(Error::InvalidMatching(format!(
                    "school `{}` receives {count} students but has capacity {}",
                    school.id, school.capacity
                )));
            }
        }
        Ok(Self { assignment })
    }

    /// Builds a matching from `(student, school)` id pairs; every student must
    /// appear exactly once.
    pub fn from_ids<'a, I>(problem: &SchoolChoiceProblem, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, Option<&'a str>)>,
    {
        let mut assignment: Vec<Option<Option<usize>>> = vec![None; problem.student_count()];
        for (student, school) in pairs {
            let i = problem.require_student(&StudentId::from(student))?;
            let s = school
                .map(|id| problem.require_school(&SchoolId::from(id)))
                .transpose()?;
            if assignment[i].replace(s).is_some() {
                return Err(Error::InvalidMatching(format!(
                    "student `{student}` assigned twice"
                )));
            }
        }
        let assignment = assignment
            .into_iter()
            .enumerate()
            .map(|(i, a)| {
                a.ok_or_else(|| {
                    Error::InvalidMatching(format!("student `{}` missing", problem.students[i].id))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(problem, assignment)
    }

    /// Wraps an assignment known to satisfy the invariants.
    pub(crate) fn from_raw(assignment: Vec<Option<usize>>) -> Self {
        Self { assignment }
    }

    pub fn assignment(&self) -> &[Option<usize>] {
        &self.assignment
    }

    pub fn school_of(&self, student: usize) -> Option<usize> {
        self.assignment[student]
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn unassigned_count(&self) -> usize {
        self.assignment.iter().filter(|a| a.is_none()).count()
    }

    /// Re-checks the matching against `problem`.
    pub fn check(&self, problem: &SchoolChoiceProblem) -> Result<()> {
        Self::new(problem, self.assignment.clone()).map(|_| ())
    }

    pub fn to_ids(&self, problem: &SchoolChoiceProblem) -> Vec<(StudentId, Option<SchoolId>)> {
        problem
            .students
            .iter()
            .zip(&self.assignment)
            .map(|(st, a)| (st.id.clone(), a.map(|s| problem.schools[s].id.clone())))
            .collect()
    }
}

/// The school `student` is matched to, or `None` when unassigned.
pub fn matched_school<'p>(
    problem: &'p SchoolChoiceProblem,
    matching: &Matching,
    student: &StudentId,
) -> Result<Option<&'p SchoolId>> {
    let i = problem.require_student(student)?;
    let slot = matching
        .assignment
        .get(i)
        .ok_or_else(|| Error::InvalidMatching("matching shorter than problem".into()))?;
    Ok(slot.map(|s| &problem.schools[s].id))
}
