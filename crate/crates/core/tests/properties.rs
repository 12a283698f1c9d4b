mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rrrp_core::bicriteria::{bicriteria_solve, run_pipeline, BicriteriaOptions};
use rrrp_core::flow::{solve_lagrangian, LagrangianSolver};
use rrrp_core::generate::random_partition;
use rrrp_core::lagrangian::SearchOutcome;
use rrrp_core::local_search::{are_adjacent, symmetric_difference};
use rrrp_core::oracle::{evenodd_has_partition, exact_solve, PartitionInstance, DEFAULT_NODE_CAP};
use rrrp_core::Schedule;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn flow_matches_enumeration(seed in any::<u64>(), lambda in 0.0..500.0f64) {
        let inst = small_instance(seed);
        let got = solve_lagrangian(&inst, lambda).unwrap();
        let want = brute_lagrangian(&inst, lambda);
        prop_assert!(inst.check(&got).unwrap().is_assignment());
        prop_assert_eq!(lagrangian_key(&inst, &got, lambda), lagrangian_key(&inst, &want, lambda));
    }

    #[test]
    fn weight_falls_and_cost_rises_with_lambda(seed in any::<u64>()) {
        let inst = desk_instance(seed);
        let mut solver = LagrangianSolver::new(&inst);
        let mut prev: Option<(f64, f64)> = None;
        for k in 0..20 {
            let lambda = 0.25 * (1.6f64.powi(k) - 1.0);
            let s = solver.solve(lambda).unwrap();
            let (c, a) = (inst.cost(&s).unwrap(), inst.weight(&s).unwrap());
            if let Some((pc, pa)) = prev {
                prop_assert!(a <= pa + 1e-9, "weight rose at lambda {lambda}");
                prop_assert!(c >= pc - 1e-9, "cost fell at lambda {lambda}");
            }
            prev = Some((c, a));
        }
    }

    #[test]
    fn oracle_matches_enumeration(seed in any::<u64>()) {
        let inst = small_instance(seed);
        let opt = exact_solve(&inst, DEFAULT_NODE_CAP).unwrap();
        let want = brute_opt(&inst).unwrap();
        prop_assert!((opt.cost - want).abs() <= 1e-9 * want.max(1.0));
        prop_assert!(inst.is_feasible(&opt.schedule).unwrap());
    }

    #[test]
    fn local_search_leaves_one_component(seed in any::<u64>()) {
        let inst = desk_instance(seed);
        let run = run_pipeline(&inst, None).unwrap();
        if let Some(cert) = &run.adjacent {
            prop_assert!(are_adjacent(&inst, &cert.feasible, &cert.infeasible).unwrap());
            let (big, a, b) = with_extra_group(&inst);
            let mut m1 = cert.feasible.clone();
            let mut m2 = cert.infeasible.clone();
            m1.insert(a);
            m2.insert(b);
            prop_assert_eq!(symmetric_difference(&big, &m1, &m2).unwrap().len(), 2);
            prop_assert!(!are_adjacent(&big, &m1, &m2).unwrap());
        } else {
            prop_assert!(!matches!(run.outcome, SearchOutcome::Bracketed(_)));
        }
    }

    #[test]
    fn exchange_prefix_sums_stay_within_allowance(seed in any::<u64>()) {
        let inst = desk_instance(seed);
        let report = bicriteria_solve(&inst, &BicriteriaOptions::with_epsilon(0.5)).unwrap();
        for ex in &report.exchanges {
            prop_assert!(ex.max_prefix_sum <= ex.allowance + 1e-9 * ex.scale.max(1.0), "{ex:?}");
        }
    }

    #[test]
    fn bicriteria_overloads_at_most_one_vertex(seed in any::<u64>()) {
        let inst = desk_instance(seed);
        let opts = BicriteriaOptions { fallback_on_violation: false, ..BicriteriaOptions::with_epsilon(1.0) };
        let r = bicriteria_solve(&inst, &opts).unwrap();
        let report = inst.check(&r.schedule).unwrap();
        prop_assert!(report.group_violations.is_empty());
        prop_assert!(report.within_budget());
        prop_assert!(report.max_load() <= 2 && report.violation_count() <= 1);
    }

    #[test]
    fn evenodd_reduction_agrees_with_enumeration(seed in any::<u64>(), pairs in 1usize..=8) {
        let p = random_partition(&mut ChaCha8Rng::seed_from_u64(seed), pairs, 20).unwrap();
        prop_assert_eq!(evenodd_has_partition(&p, DEFAULT_NODE_CAP).unwrap(), evenodd_direct(&p.values));
    }
}

#[test]
fn known_partitions() {
    let yes = PartitionInstance::new(vec![3, 1, 1, 3]).unwrap();
    assert!(evenodd_direct(&yes.values));
    assert!(evenodd_has_partition(&yes, DEFAULT_NODE_CAP).unwrap());
    let no = PartitionInstance::new(vec![5, 1, 1, 1]).unwrap();
    assert!(!evenodd_direct(&no.values));
    assert!(!evenodd_has_partition(&no, DEFAULT_NODE_CAP).unwrap());
}

#[test]
fn empty_difference_is_adjacent_to_nothing() {
    let inst = desk_instance(1);
    let s = Schedule::from_edges(inst.null_schedule().unwrap().iter());
    assert!(symmetric_difference(&inst, &s, &s).unwrap().is_empty());
    assert!(!are_adjacent(&inst, &s, &s).unwrap());
}
