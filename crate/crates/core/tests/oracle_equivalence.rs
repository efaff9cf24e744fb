//! Compiled answers against brute-force plan enumeration on random tasks.

use std::collections::BTreeSet;
use std::sync::Arc;

use num_bigint::BigUint;
use planspace_core::cnf::brute_force_count;
use planspace_core::fixtures::{random_commitments, random_query, random_task, RandomTaskShape};
use planspace_core::oracle::{enumerate_plans_oracle, oracle_stats, plan_meets};
use planspace_core::{plan_satisfies_query, CompileOptions, LengthBound, Plan, PlanSpace, PlanningTask};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TASKS: usize = 150;

fn corpus(seed: u64) -> impl Iterator<Item = (PlanningTask, LengthBound)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..TASKS).map(move |_| {
        let task = random_task(&mut rng, RandomTaskShape::default());
        let bound = LengthBound::new(&task, rng.gen_range(0..=4)).unwrap();
        (task, bound)
    })
}

fn build(task: &PlanningTask, bound: LengthBound) -> PlanSpace {
    PlanSpace::build(Arc::new(task.clone()), bound, &CompileOptions::default()).unwrap()
}

#[test]
fn counts_and_operator_sets_match_the_oracle() {
    let (mut nonempty, mut with_facets) = (0, 0);
    for (task, bound) in corpus(1) {
        let ps = build(&task, bound);
        let oracle = oracle_stats(&task, bound);
        let root = ps.root();
        assert_eq!(root.count(), &oracle.count, "{}", task.to_json());
        let sets = root.operator_sets().unwrap();
        assert_eq!(sets.brave, oracle.brave);
        assert_eq!(sets.cautious, oracle.cautious);
        let facets: BTreeSet<usize> = oracle.brave.difference(&oracle.cautious).copied().collect();
        assert_eq!(sets.facets(), facets);
        nonempty += usize::from(root.exists());
        with_facets += usize::from(!facets.is_empty());
    }
    println!("{nonempty} non-empty spaces, {with_facets} with facets");
    assert!(nonempty >= TASKS / 4 && with_facets >= TASKS / 10);
}

#[test]
fn conditioned_counts_match_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (task, bound) in corpus(2) {
        let ps = build(&task, bound);
        let plans = enumerate_plans_oracle(&task, bound, None).plans;
        for _ in 0..20 {
            let cs = random_commitments(&mut rng, &task, bound);
            let view = ps.view(&cs).unwrap();
            let expected = plans.iter().filter(|p| plan_meets(p, &cs)).count();
            assert_eq!(view.count(), &BigUint::from(expected), "{cs:?} on {}", task.to_json());
            let sets = view.operator_sets().unwrap();
            let kept: Vec<&Plan> = plans.iter().filter(|p| plan_meets(p, &cs)).collect();
            let brave: BTreeSet<usize> = kept.iter().flat_map(|p| p.steps.iter().copied()).collect();
            assert_eq!(sets.brave, brave);
        }
    }
}

#[test]
fn probabilities_match_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (task, bound) in corpus(3) {
        let ps = build(&task, bound);
        let plans = enumerate_plans_oracle(&task, bound, None).plans;
        for _ in 0..10 {
            let q = random_query(&mut rng, &task, bound);
            let hits = plans
                .iter()
                .filter(|p| plan_satisfies_query(&task, p, &q, bound).unwrap())
                .count();
            let p = ps.root().probability(&q).unwrap();
            let den = BigUint::from(plans.len().max(1));
            assert!(
                p.equals(&BigUint::from(hits), &den),
                "query {} gave {p}, oracle {hits}/{den}",
                q.display(&task)
            );
        }
    }
}

#[test]
fn models_decode_to_exactly_the_oracle_plans() {
    for (task, bound) in corpus(4) {
        let ps = build(&task, bound);
        let oracle = enumerate_plans_oracle(&task, bound, None).plans;
        let (plans, truncated) = ps.root().enumerate_plans(usize::MAX).unwrap();
        assert!(!truncated);
        let set: BTreeSet<Vec<usize>> = plans.iter().map(|p| p.steps.clone()).collect();
        assert_eq!(set.len(), plans.len(), "duplicate decoded plan");
        let expected: BTreeSet<Vec<usize>> = oracle.iter().map(|p| p.steps.clone()).collect();
        assert_eq!(set, expected);
        assert_eq!(
            brute_force_count(&ps.encoding().cnf).unwrap(),
            BigUint::from(oracle.len())
        );
        assert!(ps.ddnnf().validate().is_valid());
    }
}

#[test]
fn facet_laws_hold() {
    for (task, bound) in corpus(5) {
        let ps = build(&task, bound);
        let root = ps.root();
        let fa = root.facets().unwrap();
        let n = root.facet_count().unwrap();
        assert_eq!(n % 2, 0);
        for &op in &fa {
            for sign in [
                planspace_core::FacetSign::Inclusive,
                planspace_core::FacetSign::Excluding,
            ] {
                let facet = planspace_core::Facet { op, sign };
                let narrowed = root.with(facet.commitment()).unwrap();
                let after = narrowed.facets().unwrap();
                assert!(after.is_subset(&fa));
                assert!(!after.contains(&op));
                let s = root.significance(facet).unwrap();
                assert!(s.num() <= s.den());
                // at least the facet itself and its negation disappear
                assert!(s.num() * BigUint::from(n) >= BigUint::from(2u32) * s.den());
            }
        }
    }
}

#[test]
fn samples_are_valid_plans() {
    for (task, bound) in corpus(6) {
        let ps = build(&task, bound);
        if ps.root().is_empty() {
            continue;
        }
        for p in ps.root().sample_plans(20, 9).unwrap() {
            assert!(task.validate_plan(&p, bound).unwrap());
        }
    }
}
