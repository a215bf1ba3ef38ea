//! Every minimum-cost matching, the rank-minimal listing, and tie-breaking.
//!
//! Optimal seat assignments are the perfect matchings of the zero subgraph of
//! the kernel's final reduced matrix. Seats of one school are interchangeable
//! (as are dummy rows), so the search runs on school groups: students pick a
//! group, groups hold as many students as they have seats, and the dummy rows
//! soak up the rest. Each listed matching is then a distinct student -> school
//! map by construction.

use std::collections::{BTreeSet, VecDeque};

use num_rational::BigRational;
use num_traits::Zero;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::priority_violations;
use crate::cost::CostValue;
use crate::error::{Error, Result};
use crate::grid::{ColumnOwner, RowOwner, SeatGrid, SeatLayout};
use crate::hungarian::hungarian_solve;
use crate::mechanism::{solve_problem, MechanismOptions, DEFAULT_ENUMERATION_CAP};
use crate::model::{Matching, SchoolChoiceProblem};
use crate::transform::{cost_of_matching, UtilityTransform};
use crate::universe::{for_each_feasible, STUDENT_GUARD};

/// All minimum-cost matchings of a problem, sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OptimumSet {
    pub matchings: Vec<Matching>,
    pub shared_cost: BigRational,
    /// False when more than the cap existed; `matchings` is then a prefix.
    pub exhaustive: bool,
}

impl OptimumSet {
    pub fn len(&self) -> usize {
        self.matchings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matchings.is_empty()
    }

    pub fn contains(&self, matching: &Matching) -> bool {
        self.matchings.binary_search(matching).is_ok()
    }

    /// A singleton set around one matching.
    pub fn single(matching: Matching) -> Self {
        Self {
            matchings: vec![matching],
            shared_cost: BigRational::zero(),
            exhaustive: true,
        }
    }
}

pub fn enumerate_min_cost(
    problem: &SchoolChoiceProblem,
    transform: &UtilityTransform,
    cap: usize,
) -> Result<OptimumSet> {
    let options = MechanismOptions {
        enumeration_cap: cap,
        ..MechanismOptions::default()
    };
    let solved = solve_problem(problem, transform, &options)?;
    let shared_cost = cost_of_matching(&solved.transform, problem, &solved.kernel_matching)?;
    Ok(OptimumSet {
        matchings: solved.optima,
        shared_cost,
        exhaustive: solved.exhaustive,
    })
}

/// Optimal student -> school maps of an arbitrary seat grid.
pub fn enumerate_from_grid<T: CostValue>(
    grid: &SeatGrid<T>,
    cap: usize,
) -> Result<(Vec<Matching>, bool)> {
    let (assignment, trace) = hungarian_solve(grid.matrix())?;
    Ok(optimal_assignments(
        grid.layout(),
        &trace.zero_mask(),
        &assignment,
        cap,
    ))
}

/// Lists the perfect matchings of `zeros` (which contains `assignment`) as
/// distinct student -> school maps, up to `cap` of them.
pub(crate) fn optimal_assignments(
    layout: &SeatLayout,
    zeros: &[Vec<bool>],
    assignment: &[usize],
    cap: usize,
) -> (Vec<Matching>, bool) {
    let groups = GroupGraph::new(layout, zeros, assignment);
    let mut found = Vec::new();
    groups.explore(
        groups.start(assignment, layout),
        &mut found,
        cap.saturating_add(1),
    );
    let exhaustive = found.len() <= cap;
    found.truncate(cap);
    let mut matchings: Vec<Matching> = found
        .into_iter()
        .map(|cur| {
            Matching::from_raw(
                cur.into_iter()
                    .map(|g| (g < groups.schools).then_some(g))
                    .collect(),
            )
        })
        .collect();
    matchings.sort();
    matchings.dedup();
    (matchings, exhaustive)
}

/// Zero cells that lie on some perfect matching of the zero subgraph: the
/// matched ones, and unmatched ones closing an alternating cycle.
fn allowed_cells(zeros: &[Vec<bool>], assignment: &[usize]) -> Vec<Vec<bool>> {
    let n = zeros.len();
    let mut graph = DiGraph::<(), ()>::with_capacity(2 * n, 0);
    let nodes: Vec<_> = (0..2 * n).map(|_| graph.add_node(())).collect();
    for (r, row) in zeros.iter().enumerate() {
        for (c, &zero) in row.iter().enumerate() {
            if !zero {
                continue;
            }
            if assignment[r] == c {
                graph.add_edge(nodes[n + c], nodes[r], ());
            } else {
                graph.add_edge(nodes[r], nodes[n + c], ());
            }
        }
    }
    let mut component = vec![0usize; 2 * n];
    for (k, scc) in tarjan_scc(&graph).into_iter().enumerate() {
        for node in scc {
            component[node.index()] = k;
        }
    }
    (0..n)
        .map(|r| {
            (0..n)
                .map(|c| zeros[r][c] && (assignment[r] == c || component[r] == component[n + c]))
                .collect()
        })
        .collect()
}

struct GroupGraph {
    students: usize,
    schools: usize,
    /// Seats per group; the last group is the dummy columns.
    capacity: Vec<usize>,
    options: Vec<Vec<usize>>,
    dummy_rows: bool,
    dummy_allowed: Vec<bool>,
}

#[derive(Clone)]
struct Branch {
    cur: Vec<usize>,
    dummy_load: Vec<usize>,
    options: Vec<Vec<usize>>,
    fixed: Vec<bool>,
}

impl GroupGraph {
    fn new(layout: &SeatLayout, zeros: &[Vec<bool>], assignment: &[usize]) -> Self {
        let allowed = allowed_cells(zeros, assignment);
        let schools = layout.school_count();
        let groups = schools + 1;
        let group_of: Vec<usize> = layout
            .columns()
            .iter()
            .map(|c| match c {
                ColumnOwner::Seat { school, .. } => *school,
                ColumnOwner::Dummy => schools,
            })
            .collect();
        let mut capacity = vec![0usize; groups];
        for &g in &group_of {
            capacity[g] += 1;
        }
        let students = layout.student_count();
        let mut options = vec![BTreeSet::new(); students];
        let mut dummy_allowed = vec![false; groups];
        let mut dummy_rows = false;
        for (r, owner) in layout.rows().iter().enumerate() {
            for (c, &ok) in allowed[r].iter().enumerate() {
                if !ok {
                    continue;
                }
                match owner {
                    RowOwner::Student(i) => {
                        options[*i].insert(group_of[c]);
                    }
                    RowOwner::Dummy => dummy_allowed[group_of[c]] = true,
                }
            }
            dummy_rows |= *owner == RowOwner::Dummy;
        }
        Self {
            students,
            schools,
            capacity,
            options: options
                .into_iter()
                .map(|s| s.into_iter().collect())
                .collect(),
            dummy_rows,
            dummy_allowed,
        }
    }

    fn start(&self, assignment: &[usize], layout: &SeatLayout) -> Branch {
        let mut cur = vec![0usize; self.students];
        let mut load = vec![0usize; self.capacity.len()];
        for (r, &c) in assignment.iter().enumerate() {
            if let RowOwner::Student(i) = layout.rows()[r] {
                let g = match layout.columns()[c] {
                    ColumnOwner::Seat { school, .. } => school,
                    ColumnOwner::Dummy => self.schools,
                };
                cur[i] = g;
                load[g] += 1;
            }
        }
        Branch {
            cur,
            dummy_load: self
                .capacity
                .iter()
                .zip(&load)
                .map(|(c, l)| c - l)
                .collect(),
            options: self.options.clone(),
            fixed: vec![false; self.students],
        }
    }

    fn explore(&self, mut branch: Branch, found: &mut Vec<Vec<usize>>, limit: usize) {
        loop {
            if found.len() >= limit {
                return;
            }
            match self.find_cycle(&branch) {
                None => {
                    found.push(branch.cur);
                    return;
                }
                Some((student, alternative)) => {
                    // either `student` keeps its group, or it never does
                    let kept = branch.cur[student];
                    let mut other = branch.clone();
                    other.cur = alternative.0;
                    other.dummy_load = alternative.1;
                    other.options[student].retain(|&g| g != kept);
                    branch.fixed[student] = true;
                    branch.options[student] = vec![kept];
                    self.explore(other, found, limit);
                }
            }
        }
    }

    /// An alternating cycle moving some free student out of its group,
    /// returned as the student and the matching on the other side.
    #[allow(clippy::type_complexity)]
    fn find_cycle(&self, branch: &Branch) -> Option<(usize, (Vec<usize>, Vec<usize>))> {
        let k = self.students;
        let groups = self.capacity.len();
        let dummy = k + groups;
        let mut graph = DiGraph::<(), ()>::with_capacity(dummy + 1, 0);
        let nodes: Vec<_> = (0..=dummy).map(|_| graph.add_node(())).collect();
        let mut adjacency = vec![Vec::new(); dummy + 1];
        let mut arc = |from: usize, to: usize, graph: &mut DiGraph<(), ()>| {
            graph.add_edge(nodes[from], nodes[to], ());
            adjacency[from].push(to);
        };
        for s in 0..k {
            if branch.fixed[s] {
                continue;
            }
            for &g in &branch.options[s] {
                if g != branch.cur[s] {
                    arc(s, k + g, &mut graph);
                }
            }
            arc(k + branch.cur[s], s, &mut graph);
        }
        if self.dummy_rows {
            for g in 0..groups {
                if self.dummy_allowed[g] {
                    arc(dummy, k + g, &mut graph);
                }
                if branch.dummy_load[g] > 0 {
                    arc(k + g, dummy, &mut graph);
                }
            }
        }
        let mut component = vec![usize::MAX; dummy + 1];
        for (c, scc) in tarjan_scc(&graph).into_iter().enumerate() {
            for node in scc {
                component[node.index()] = c;
            }
        }
        let student =
            (0..k).find(|&s| !branch.fixed[s] && component[s] == component[k + branch.cur[s]])?;
        let target = k + branch.cur[student];

        let mut parent = vec![usize::MAX; dummy + 1];
        parent[student] = student;
        let mut queue = VecDeque::from([student]);
        while let Some(u) = queue.pop_front() {
            if u == target {
                break;
            }
            for &v in &adjacency[u] {
                if parent[v] == usize::MAX && component[v] == component[student] {
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        let mut cur = branch.cur.clone();
        let mut load = branch.dummy_load.clone();
        let mut v = target;
        while v != student {
            let u = parent[v];
            if u < k {
                cur[u] = v - k;
            } else if u == dummy {
                load[v - k] += 1;
            } else if v == dummy {
                load[u - k] -= 1;
            }
            v = u;
        }
        Some((student, (cur, load)))
    }
}

/// Matchings of minimum rank, with that rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankMinimalSet {
    pub rank: u32,
    pub matchings: Vec<Matching>,
    pub exhaustive: bool,
}

/// Lists feasible matchings by increasing exponential cost and keeps those
/// ahead of the first change of rank.
pub fn enumerate_rank_minimal(problem: &SchoolChoiceProblem, cap: usize) -> Result<RankMinimalSet> {
    let n = problem.student_count();
    if n > STUDENT_GUARD {
        return Err(Error::GuardExceeded {
            what: "student count",
            actual: n,
            limit: STUDENT_GUARD,
        });
    }
    let table = problem.rank_table()?;
    let base = UtilityTransform::auto_base(problem) as u128;
    let top = table.highest_rank(true);
    let powers: Vec<u128> = (0..=top).map(|r| base.pow(r)).collect();
    let cost_and_rank = |assignment: &[Option<usize>]| {
        let mut cost = 0u128;
        let mut rank = 0u32;
        for (i, school) in assignment.iter().enumerate() {
            let r = table.rank_of(i, *school);
            cost += powers[r as usize];
            rank = rank.max(r);
        }
        (cost, rank)
    };

    // pass 1: the first listed matching, and where the rank first changes
    let mut first: Option<(u128, u32)> = None;
    let mut by_rank: Vec<Option<u128>> = vec![None; top as usize + 1];
    for_each_feasible(problem, |assignment| {
        let (cost, rank) = cost_and_rank(assignment);
        if first.is_none_or(|(c, _)| cost < c) {
            first = Some((cost, rank));
        }
        let slot = &mut by_rank[rank as usize];
        if slot.is_none_or(|c| cost < c) {
            *slot = Some(cost);
        }
    });
    let (_, rank) = first.expect("every problem has a feasible matching");
    let cutoff = by_rank
        .iter()
        .enumerate()
        .filter(|&(r, _)| r as u32 != rank)
        .filter_map(|(_, c)| *c)
        .min();

    // pass 2: everything listed before the cutoff
    let mut matchings = Vec::new();
    let mut exhaustive = true;
    for_each_feasible(problem, |assignment| {
        let (cost, _) = cost_and_rank(assignment);
        if cutoff.is_none_or(|c| cost < c) {
            if matchings.len() < cap {
                matchings.push(Matching::from_raw(assignment.to_vec()));
            } else {
                exhaustive = false;
            }
        }
    });
    matchings.sort();
    Ok(RankMinimalSet {
        rank,
        matchings,
        exhaustive,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TieBreakCriterion {
    MinVariance,
    FewestViolatedStudents,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TieBreakPolicy {
    criteria: Vec<TieBreakCriterion>,
    pub seed: u64,
}

impl TieBreakPolicy {
    pub fn new(criteria: Vec<TieBreakCriterion>, seed: u64) -> Result<Self> {
        for (k, c) in criteria.iter().enumerate() {
            if criteria[..k].contains(c) {
                return Err(Error::InvalidPolicy(format!("{c:?} listed twice")));
            }
        }
        Ok(Self { criteria, seed })
    }

    /// Seeded uniform pick with no filtering.
    pub fn uniform(seed: u64) -> Self {
        Self {
            criteria: Vec::new(),
            seed,
        }
    }

    pub fn criteria(&self) -> &[TieBreakCriterion] {
        &self.criteria
    }
}

/// `n * sum(x^2) - sum(x)^2` over per-student `rank - 1`: population variance
/// times `n^2`, so it orders matchings exactly like the variance.
pub fn variance_key(problem: &SchoolChoiceProblem, matching: &Matching) -> Result<i128> {
    let table = problem.rank_table()?;
    let n = matching.len() as i128;
    let (mut sum, mut squares) = (0i128, 0i128);
    for (i, school) in matching.assignment().iter().enumerate() {
        let x = table.rank_of(i, *school) as i128 - 1;
        sum += x;
        squares += x * x;
    }
    Ok(n * squares - sum * sum)
}

/// Population variance of the per-student preference indices.
pub fn index_variance(problem: &SchoolChoiceProblem, matching: &Matching) -> Result<BigRational> {
    let n = matching.len().max(1) as i128;
    let key = variance_key(problem, matching)?;
    Ok(BigRational::new(key.into(), (n * n).into()))
}

/// Optima left after applying every criterion of `policy` in order.
pub fn tiebreak_survivors(
    problem: &SchoolChoiceProblem,
    optima: &OptimumSet,
    policy: &TieBreakPolicy,
) -> Result<Vec<Matching>> {
    let mut candidates = optima.matchings.clone();
    for criterion in &policy.criteria {
        let keys = candidates
            .iter()
            .map(|m| match criterion {
                TieBreakCriterion::MinVariance => variance_key(problem, m),
                TieBreakCriterion::FewestViolatedStudents => {
                    priority_violations(problem, m).map(|v| v.violated_students.len() as i128)
                }
            })
            .collect::<Result<Vec<i128>>>()?;
        let Some(best) = keys.iter().min().copied() else {
            break;
        };
        candidates = candidates
            .into_iter()
            .zip(keys)
            .filter(|(_, k)| *k == best)
            .map(|(m, _)| m)
            .collect();
    }
    Ok(candidates)
}

/// Filters by each criterion in turn, then picks uniformly with the seed.
pub fn tiebreak_select(
    problem: &SchoolChoiceProblem,
    optima: &OptimumSet,
    policy: &TieBreakPolicy,
) -> Result<Matching> {
    let survivors = tiebreak_survivors(problem, optima, policy)?;
    if survivors.is_empty() {
        return Err(Error::InvalidMatching("empty optimum set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    Ok(survivors[rng.gen_range(0..survivors.len())].clone())
}

/// Default cap for callers that do not pick one.
pub fn enumerate_all_min_cost(
    problem: &SchoolChoiceProblem,
    transform: &UtilityTransform,
) -> Result<OptimumSet> {
    enumerate_min_cost(problem, transform, DEFAULT_ENUMERATION_CAP)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testsupport::{brute_force_optima, fixtures};

    fn ids(p: &SchoolChoiceProblem, pairs: &[(&str, &str)]) -> Matching {
        Matching::from_ids(p, pairs.iter().map(|(a, b)| (*a, Some(*b)))).unwrap()
    }

    #[test]
    fn three_optima_of_the_four_student_instance() {
        let p = fixtures::four_student_multi_optima();
        let set = enumerate_all_min_cost(&p, &UtilityTransform::rank_minus_one()).unwrap();
        let expected: BTreeSet<Matching> = [
            ids(
                &p,
                &[("i1", "s1"), ("i2", "s2"), ("i3", "s3"), ("i4", "s4")],
            ),
            ids(
                &p,
                &[("i1", "s2"), ("i2", "s4"), ("i3", "s1"), ("i4", "s3")],
            ),
            ids(
                &p,
                &[("i1", "s1"), ("i2", "s4"), ("i3", "s3"), ("i4", "s2")],
            ),
        ]
        .into();
        assert_eq!(
            set.matchings.iter().cloned().collect::<BTreeSet<_>>(),
            expected
        );
        assert_eq!(set.shared_cost, BigRational::from_integer(2.into()));
        assert!(set.exhaustive);
    }

    #[test]
    fn homogeneous_has_factorial_optima() {
        for n in 1..=5 {
            let p = fixtures::homogeneous(n);
            let set = enumerate_all_min_cost(&p, &UtilityTransform::rank_minus_one()).unwrap();
            assert_eq!(set.len(), (1..=n).product::<usize>());
        }
    }

    #[test]
    fn cap_truncates() {
        let p = fixtures::homogeneous(4);
        let set = enumerate_min_cost(&p, &UtilityTransform::rank_minus_one(), 5).unwrap();
        assert_eq!(set.len(), 5);
        assert!(!set.exhaustive);
        let set = enumerate_min_cost(&p, &UtilityTransform::rank_minus_one(), 24).unwrap();
        assert!(set.exhaustive);
    }

    #[test]
    fn capacities_and_dummies_do_not_duplicate() {
        use crate::model::{PreferenceProfile, School, Student};
        // 4 students into s1 (2 seats) + s2 (1 seat): one always left out
        let p = SchoolChoiceProblem::new(
            (1..=4)
                .map(|k| Student::new(format!("i{k}"), PreferenceProfile::strict(["s1", "s2"])))
                .collect(),
            vec![School::new("s1", 2), School::new("s2", 1)],
        )
        .unwrap();
        let f1 = UtilityTransform::rank_minus_one();
        let set = enumerate_all_min_cost(&p, &f1).unwrap();
        let oracle = brute_force_optima(&p, &f1).unwrap();
        assert_eq!(set.matchings, oracle.matchings);
        assert_eq!(set.len(), 12);

        // spare seats: 1 student, s1 with 3 seats
        let p = SchoolChoiceProblem::new(
            vec![Student::new("i1", PreferenceProfile::strict(["s2", "s1"]))],
            vec![School::new("s1", 3), School::new("s2", 2)],
        )
        .unwrap();
        let set = enumerate_all_min_cost(&p, &f1).unwrap();
        assert_eq!(set.matchings, vec![ids(&p, &[("i1", "s2")])]);
    }

    #[test]
    fn rank_minimal_listing() {
        let p = fixtures::rank_minimal_vs_cost();
        let set = enumerate_rank_minimal(&p, 100).unwrap();
        assert_eq!(set.rank, 2);
        let expected = vec![
            ids(&p, &[("i1", "s3"), ("i2", "s2"), ("i3", "s1")]),
            ids(&p, &[("i1", "s2"), ("i2", "s3"), ("i3", "s1")]),
        ];
        let got: BTreeSet<_> = set.matchings.into_iter().collect();
        assert_eq!(got, expected.into_iter().collect());

        let p = fixtures::three_by_three();
        assert_eq!(enumerate_rank_minimal(&p, 100).unwrap().matchings.len(), 1);
    }

    #[test]
    fn variance_tiebreak_keeps_the_two_balanced_optima() {
        let p = fixtures::four_student_multi_optima();
        let set = enumerate_all_min_cost(&p, &UtilityTransform::rank_minus_one()).unwrap();
        let variances: Vec<BigRational> = set
            .matchings
            .iter()
            .map(|m| index_variance(&p, m).unwrap())
            .collect();
        let quarter = BigRational::new(1.into(), 4.into());
        assert_eq!(variances.iter().filter(|v| **v == quarter).count(), 2);
        assert!(variances.contains(&BigRational::new(3.into(), 4.into())));

        let skewed = ids(
            &p,
            &[("i1", "s1"), ("i2", "s4"), ("i3", "s3"), ("i4", "s2")],
        );
        let mut picks = BTreeSet::new();
        for seed in 0..30 {
            let policy = TieBreakPolicy::new(vec![TieBreakCriterion::MinVariance], seed).unwrap();
            let pick = tiebreak_select(&p, &set, &policy).unwrap();
            assert_ne!(pick, skewed);
            picks.insert(pick);
        }
        assert_eq!(picks.len(), 2);
    }

    #[test]
    fn policy_rejects_repeats() {
        assert!(TieBreakPolicy::new(
            vec![
                TieBreakCriterion::MinVariance,
                TieBreakCriterion::MinVariance
            ],
            0
        )
        .is_err());
        let single = OptimumSet::single(Matching::from_raw(vec![Some(0)]));
        let p = fixtures::single();
        let policy = TieBreakPolicy::new(
            vec![
                TieBreakCriterion::FewestViolatedStudents,
                TieBreakCriterion::MinVariance,
            ],
            3,
        )
        .unwrap();
        assert_eq!(
            tiebreak_select(&p, &single, &policy).unwrap(),
            single.matchings[0]
        );
    }
}
