//! The transport generator against its closed-form plan count.

use std::sync::Arc;

use planspace_core::fixtures::{transport, transport_plan_count};
use planspace_core::oracle::oracle_stats;
use planspace_core::{CompileOptions, LengthBound, PlanSpace};

#[test]
fn compiled_counts_follow_the_closed_form() {
    for n in 1..=5 {
        let task = Arc::new(transport(n));
        for bound in [2 * n - 1, 2 * n, 2 * n + 1] {
            let b = LengthBound::new(&task, bound).unwrap();
            let ps = PlanSpace::build(task.clone(), b, &CompileOptions::default()).unwrap();
            assert_eq!(ps.count(), &transport_plan_count(n, bound), "n={n} ℓ={bound}");
        }
    }
}

#[test]
fn every_operator_is_cautious() {
    let task = Arc::new(transport(3));
    let b = LengthBound::new(&task, 6).unwrap();
    let ps = PlanSpace::build(task.clone(), b, &CompileOptions::default()).unwrap();
    let sets = ps.root().operator_sets().unwrap();
    let oracle = oracle_stats(&task, b);
    assert_eq!(sets.cautious, oracle.cautious);
    assert_eq!(sets.cautious.len(), 6);
    assert!(sets.facets().is_empty());
}

#[test]
fn without_time_ordering_the_count_is_unchanged() {
    let task = Arc::new(transport(3));
    let b = LengthBound::new(&task, 7).unwrap();
    let plain = CompileOptions {
        priority: Some(Vec::new()),
        ..CompileOptions::default()
    };
    let ps = PlanSpace::build(task, b, &plain).unwrap();
    assert_eq!(ps.count(), &transport_plan_count(3, 7));
}
