use std::collections::BTreeSet;

use num_traits::Zero;
use osm_core::analysis::{dominates, minimum_rank};
use osm_core::enumeration::{tiebreak_survivors, variance_key};
use osm_core::testsupport::{
    brute_force_optima, canonical_text, generate_instance, random_table, InstanceSpec,
};
use osm_core::universe::for_each_feasible;
use osm_core::{
    complete_preferences, cost_of_matching, enumerate_min_cost, enumerate_rank_minimal,
    is_pareto_efficient, matching_rank, preference_index, run_mechanism, run_mechanism_with,
    tiebreak_select, BigRational, CostRealization, Matching, MechanismOptions, RankCounts,
    SchoolChoiceProblem, SchoolId, StudentId, TieBreakCriterion, TieBreakPolicy, UtilityTransform,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const CAP: usize = 10_000;

fn instance(max_seats: usize, max_students: usize) -> impl Strategy<Value = SchoolChoiceProblem> {
    (
        1..=max_students,
        1..=4usize,
        1..=2u32,
        prop::sample::select(vec![0.0, 0.3, 0.6]),
        prop::sample::select(vec![0.0, 0.4]),
        any::<u64>(),
    )
        .prop_map(
            |(students, schools, cap_max, tie_prob, incomplete_prob, seed)| {
                generate_instance(&InstanceSpec {
                    cap_max,
                    tie_prob,
                    incomplete_prob,
                    skew: 1.0,
                    ..InstanceSpec::new(students, schools, seed)
                })
                .unwrap()
            },
        )
        .prop_filter("seat budget", move |p| p.total_seats() <= max_seats)
}

fn transform(p: &SchoolChoiceProblem, pick: u8, seed: u64) -> UtilityTransform {
    match pick % 3 {
        0 => UtilityTransform::rank_minus_one(),
        1 => UtilityTransform::exponential_auto(),
        _ => random_table(
            &mut ChaCha8Rng::seed_from_u64(seed),
            p.school_count() as u32 + 2,
        ),
    }
}

type Labeled = BTreeSet<Vec<(StudentId, Option<SchoolId>)>>;

fn labeled(p: &SchoolChoiceProblem, ms: &[Matching]) -> Labeled {
    ms.iter()
        .map(|m| {
            let mut v = m.to_ids(p);
            v.sort();
            v
        })
        .collect()
}

fn universe(p: &SchoolChoiceProblem) -> Vec<Matching> {
    let mut all = Vec::new();
    for_each_feasible(p, |a| all.push(Matching::new(p, a.to_vec()).unwrap()));
    all
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn completion_is_idempotent(p in instance(8, 6)) {
        let ids = p.school_ids();
        for st in p.students() {
            let once = complete_preferences(&st.preferences, &ids).unwrap();
            prop_assert!(once.covers(&ids));
            prop_assert_eq!(&complete_preferences(&once, &ids).unwrap(), &once);
            for s in st.preferences.ranked_schools() {
                prop_assert_eq!(once.rank_of(s), st.preferences.rank_of(s));
            }
        }
    }

    #[test]
    fn enumeration_matches_oracle(p in instance(6, 7), pick in any::<u8>(), seed in any::<u64>()) {
        let f = transform(&p, pick, seed);
        let got = enumerate_min_cost(&p, &f, CAP).unwrap();
        let want = brute_force_optima(&p, &f).unwrap();
        prop_assert!(got.exhaustive);
        prop_assert_eq!(&got.matchings, &want.matchings);
        prop_assert_eq!(&got.shared_cost, &want.shared_cost);
        for m in &got.matchings {
            prop_assert_eq!(&cost_of_matching(&f, &p, m).unwrap(), &got.shared_cost);
        }
    }

    #[test]
    fn relabeling_permutes_the_optima(p in instance(6, 6), pick in any::<u8>(), seed in any::<u64>()) {
        let f = transform(&p, pick, seed);
        let mut students = p.students().to_vec();
        let mut schools = p.schools().to_vec();
        students.reverse();
        schools.rotate_left(1);
        let q = SchoolChoiceProblem::new(students, schools).unwrap();
        let a = enumerate_min_cost(&p, &f, CAP).unwrap();
        let b = enumerate_min_cost(&q, &f, CAP).unwrap();
        prop_assert_eq!(labeled(&p, &a.matchings), labeled(&q, &b.matchings));
        prop_assert_eq!(a.shared_cost, b.shared_cost);
    }

    #[test]
    fn index_equals_linear_cost(p in instance(7, 7), seed in any::<u64>()) {
        let f1 = UtilityTransform::rank_minus_one();
        let out = run_mechanism(&p, &f1, seed).unwrap();
        for m in &out.optima.matchings {
            let index = preference_index(&p, m).unwrap();
            prop_assert_eq!(cost_of_matching(&f1, &p, m).unwrap(), BigRational::from_integer(index.into()));
        }
    }

    #[test]
    fn tiebreak_is_deterministic(p in instance(6, 7), seed in any::<u64>(), stability in any::<bool>()) {
        let mut criteria = vec![TieBreakCriterion::MinVariance];
        if stability {
            criteria.insert(0, TieBreakCriterion::FewestViolatedStudents);
        }
        let policy = TieBreakPolicy::new(criteria, seed).unwrap();
        let optima = enumerate_min_cost(&p, &UtilityTransform::rank_minus_one(), CAP).unwrap();
        let first = tiebreak_select(&p, &optima, &policy).unwrap();
        prop_assert_eq!(&first, &tiebreak_select(&p, &optima, &policy).unwrap());
        let survivors = tiebreak_survivors(&p, &optima, &policy).unwrap();
        prop_assert!(survivors.contains(&first));
        if !stability {
            let best = optima.matchings.iter().map(|m| variance_key(&p, m).unwrap()).min().unwrap();
            for m in &survivors {
                prop_assert_eq!(variance_key(&p, m).unwrap(), best);
            }
        }
    }

    #[test]
    fn rank_counts_order_like_powers(p in instance(6, 6)) {
        let exp = UtilityTransform::exponential_auto();
        let table = p.rank_table().unwrap();
        let all = universe(&p);
        let counts: Vec<RankCounts> = all
            .iter()
            .map(|m| {
                m.assignment()
                    .iter()
                    .enumerate()
                    .fold(RankCounts::zero(), |acc, (i, s)| acc + RankCounts::unit(table.rank_of(i, *s)))
            })
            .collect();
        let scalar: Vec<BigRational> = all.iter().map(|m| cost_of_matching(&exp, &p, m).unwrap()).collect();
        for i in 0..all.len() {
            for j in 0..all.len() {
                prop_assert_eq!(counts[i].cmp(&counts[j]), scalar[i].cmp(&scalar[j]));
            }
        }
    }

    #[test]
    fn realizations_share_optima(p in instance(6, 7), seed in any::<u64>()) {
        let exp = UtilityTransform::exponential_auto();
        let runs: Vec<_> = [CostRealization::Scalar, CostRealization::RankCounts, CostRealization::Auto]
            .into_iter()
            .map(|realization| {
                let options = MechanismOptions { realization, ..MechanismOptions::default() };
                run_mechanism_with(&p, &exp, seed, &options).unwrap()
            })
            .collect();
        for r in &runs[1..] {
            prop_assert_eq!(&r.cost, &runs[0].cost);
            prop_assert_eq!(&r.optima.matchings, &runs[0].optima.matchings);
            prop_assert_eq!(&r.matching, &runs[0].matching);
        }
    }

    #[test]
    fn rank_minimal_matches_brute_force(p in instance(6, 6)) {
        let got = enumerate_rank_minimal(&p, CAP).unwrap();
        let best = minimum_rank(&p).unwrap();
        let want: BTreeSet<Matching> = universe(&p)
            .into_iter()
            .filter(|m| matching_rank(&p, m).unwrap() == best)
            .collect();
        prop_assert!(got.exhaustive);
        prop_assert_eq!(got.rank, best);
        prop_assert_eq!(got.matchings.into_iter().collect::<BTreeSet<_>>(), want);
    }

    #[test]
    fn pareto_certificate_agrees_with_pairwise_check(p in instance(6, 6)) {
        let all = universe(&p);
        for m in &all {
            let dominated = all.iter().any(|o| dominates(&p, o, m).unwrap());
            let cert = is_pareto_efficient(&p, m).unwrap();
            prop_assert_eq!(cert.is_efficient(), !dominated);
        }
    }

    #[test]
    fn generator_is_reproducible(students in 1..30usize, schools in 1..10usize, seed in any::<u64>()) {
        let spec = InstanceSpec { cap_max: 3, tie_prob: 0.3, incomplete_prob: 0.3, ..InstanceSpec::new(students, schools, seed) };
        let a = generate_instance(&spec).unwrap();
        let b = generate_instance(&spec).unwrap();
        prop_assert_eq!(canonical_text(&a), canonical_text(&b));
        prop_assert_eq!(a, b);
    }
}

#[test]
fn unskewed_first_choices_are_uniform() {
    let (schools, trials) = (5usize, 1000usize);
    let mut hits = vec![0usize; schools];
    for seed in 0..trials as u64 {
        let p = generate_instance(&InstanceSpec::new(1, schools, seed)).unwrap();
        let first = &p.students()[0].preferences.tiers()[0][0];
        hits[p.school_index(first).unwrap()] += 1;
    }
    let q = 1.0 / schools as f64;
    let mean = trials as f64 * q;
    let sigma = (trials as f64 * q * (1.0 - q)).sqrt();
    for (k, h) in hits.iter().enumerate() {
        assert!(
            (*h as f64 - mean).abs() <= 3.0 * sigma,
            "school {k}: {h} first choices, expected {mean}"
        );
    }
}

#[test]
fn skew_favors_low_indices() {
    let mut hits = [0usize; 4];
    for seed in 0..1000 {
        let spec = InstanceSpec {
            skew: 2.0,
            ..InstanceSpec::new(1, 4, seed)
        };
        let p = generate_instance(&spec).unwrap();
        let first = &p.students()[0].preferences.tiers()[0][0];
        hits[p.school_index(first).unwrap()] += 1;
    }
    assert!(hits.windows(2).all(|w| w[0] > w[1]), "{hits:?}");
}
