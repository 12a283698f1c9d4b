use proptest::prelude::*;
use rrrp_core::energy::{depletion_probability, edge_probability, survival_probability, ChargeState, EnergyModel, Leg};

fn model(samples: usize) -> EnergyModel {
    EnergyModel {
        samples,
        seed: 3,
        ..Default::default()
    }
}

fn legs() -> impl Strategy<Value = Vec<Leg>> {
    let leg = prop_oneof![
        (1.0..3000.0f64, 0.0..360.0f64).prop_map(|(d, h)| Leg::Fly {
            distance: d,
            speed: 9.8,
            heading_deg: h,
        }),
        (1.0..300.0f64).prop_map(|t| Leg::Wait { duration: t }),
    ];
    prop::collection::vec(leg, 1..12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn appending_legs_never_lowers_depletion(plan in legs(), soc in 0.05..1.0f64) {
        let m = model(400);
        let state = ChargeState::from_soc(soc, &m).unwrap();
        let mut prev = 0.0;
        for k in 1..=plan.len() {
            let d = depletion_probability(state, &plan[..k], &m, 17).unwrap();
            prop_assert!(d >= prev, "prefix {k}: {d} < {prev}");
            prev = d;
        }
    }

    #[test]
    fn same_seed_same_estimate(plan in legs()) {
        let m = model(300);
        let s = ChargeState::from_soc(0.3, &m).unwrap();
        let a = survival_probability(s, &plan, &m, 5).unwrap();
        prop_assert_eq!(a.to_bits(), survival_probability(s, &plan, &m, 5).unwrap().to_bits());
    }
}

#[test]
fn median_draw_survives_half_the_time() {
    // No wind: energy is linear in the Gaussian weight, so the mean draw is also the median.
    let m = EnergyModel {
        wind_a: 0.0,
        samples: 100_000,
        seed: 1,
        ..Default::default()
    };
    let plan = [Leg::fly(9800.0, 9.8)];
    let mean_draw = m.power_draw(9.8, m.weight_mu) * 1000.0;
    let state = ChargeState { energy_j: mean_draw };
    let p = survival_probability(state, &plan, &m, 42).unwrap();
    let se = (0.25f64 / m.samples as f64).sqrt();
    assert!((p - 0.5).abs() <= 3.0 * se, "{p}");
}

#[test]
fn dominated_plan_always_survives() {
    let m = model(2000);
    // Heaviest plausible draw with the strongest plausible headwind.
    let worst = m.power_draw(9.8 + 6.0, m.weight_mu + 6.0 * m.weight_sigma) * 600.0;
    let state = ChargeState { energy_j: worst };
    let plan = [Leg::fly(600.0 * 9.8, 9.8)];
    assert_eq!(survival_probability(state, &plan, &m, 8).unwrap(), 1.0);
}

#[test]
fn thread_count_does_not_change_estimates() {
    let m = model(5000);
    let state = ChargeState::from_soc(0.4, &m).unwrap();
    let plan = [
        Leg::Fly {
            distance: 5000.0,
            speed: 9.8,
            heading_deg: 30.0,
        },
        Leg::Wait { duration: 120.0 },
        Leg::Fly {
            distance: 4000.0,
            speed: 9.8,
            heading_deg: 200.0,
        },
    ];
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| survival_probability(state, &plan, &m, 77).unwrap())
    };
    let one = run(1);
    assert!(one > 0.0 && one < 1.0, "{one}");
    for threads in [2, 3, 8] {
        assert_eq!(run(threads).to_bits(), one.to_bits());
    }
}

#[test]
fn short_remainder_leaves_detour_probability() {
    let m = model(4000);
    let state = ChargeState::from_soc(0.3, &m).unwrap();
    let detour = [Leg::fly(7100.0, 9.8), Leg::Wait { duration: 60.0 }];
    let after = [Leg::fly(50.0, 9.8)];
    let p_edge = edge_probability(state, &detour, &after, &m, 4).unwrap();
    let p_detour = survival_probability(state, &detour, &m, 4).unwrap();
    assert!(p_detour > 0.05 && p_detour < 0.95, "{p_detour}");
    assert_eq!(p_edge, p_detour);
}
