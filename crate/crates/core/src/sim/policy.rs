//! Recharging decisions: the rendezvous planner and the SOC-threshold baseline.

use crate::bicriteria::{bicriteria_solve, run_pipeline, BicriteriaOptions};
use crate::error::{Error, Result};
use crate::flow::min_weight_schedule;
use crate::geometry::{build_instance_with, distance, point_on_loop, BuildOptions, MissionGeometry, Point, Reservation, UavState};
use crate::model::Schedule;
use crate::oracle::exact_solve;
use crate::sim::{RrrpSolver, Scenario};

/// A detour the UAV has committed to, in absolute time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(super) struct PlannedDetour {
    pub ugv: usize,
    pub meet: f64,
    pub point: Point,
    pub release: f64,
    pub exit: Point,
    /// Tour waypoint the UAV flies to after recharging.
    pub rejoin_wp: usize,
    /// Tour waypoints still to reach before leaving the tour.
    pub waypoints_to_pass: usize,
}

pub(super) struct PlanOutcome {
    pub commits: Vec<(usize, PlannedDetour)>,
    pub infeasible: bool,
    pub cost: f64,
    pub weight: f64,
    pub budget: f64,
    pub n_edges: usize,
}

pub(super) fn ugv_point(scn: &Scenario, k: usize, t: f64) -> Point {
    point_on_loop(&scn.ugv_roads[k], scn.ugv_offset(k) + scn.speeds.ugv * t)
}

fn reserved(reservations: &[Reservation], ugv: usize, time: f64, recharge: f64) -> usize {
    reservations
        .iter()
        .filter(|r| r.ugv == ugv && (r.time - time).abs() < recharge - 1e-9)
        .count()
}

/// Solves the rendezvous problem for the UAVs in `free` and returns the
/// detours that start before the next replan.
pub(super) fn plan_rrrp(
    scn: &Scenario,
    solver: RrrpSolver,
    rho: f64,
    now: f64,
    free: &[usize],
    states: &[UavState],
    reservations: &[Reservation],
    seed: u64,
) -> Result<PlanOutcome> {
    let geometry = MissionGeometry {
        uav_tours: free.iter().map(|&i| scn.uav_tours[i].clone()).collect(),
        ugv_roads: scn.ugv_roads.clone(),
        uav_speed: scn.speeds.uav,
        ugv_speed: scn.speeds.ugv,
        recharge_duration: scn.sim.recharge_s,
        horizon: scn.sim.horizon_s,
        uavs: states.to_vec(),
        ugv_positions: (0..scn.ugv_roads.len())
            .map(|k| scn.ugv_offset(k) + scn.speeds.ugv * now)
            .collect(),
        // Slots sit on a fixed clock so a detour planned at one tick is still
        // on offer at the next.
        first_slot: (scn.sim.recharge_s - now.rem_euclid(scn.sim.recharge_s)).rem_euclid(scn.sim.recharge_s),
    };
    // The chance constraint bounds the joint success probability by 1 - rho.
    let built = build_instance_with(
        &geometry,
        &scn.energy,
        &BuildOptions {
            rho: 1.0 - rho,
            capacity: scn.sim.capacity,
            reservations: reservations
                .iter()
                .map(|r| Reservation {
                    ugv: r.ugv,
                    time: r.time - now,
                })
                .collect(),
            seed,
        },
    )?;
    let inst = &built.instance;
    let solved: Result<Schedule> = match solver {
        RrrpSolver::Feasible => run_pipeline(inst, None).map(|r| r.feasible),
        RrrpSolver::Bicriteria { epsilon } => {
            bicriteria_solve(inst, &BicriteriaOptions::with_epsilon(epsilon)).map(|r| r.schedule)
        }
        RrrpSolver::Exact => match exact_solve(inst, scn.sim.exact_node_cap) {
            Err(Error::OracleTooLarge { .. }) => {
                log::warn!("exact planner hit its node cap; using the feasible pipeline");
                run_pipeline(inst, None).map(|r| r.feasible)
            }
            other => other.map(|s| s.schedule),
        },
    };
    let (schedule, infeasible) = match solved {
        Ok(s) => (s, false),
        Err(Error::Infeasible { .. }) => (min_weight_schedule(inst)?, true),
        Err(e) => return Err(e),
    };

    let mut commits = Vec::new();
    for e in schedule.iter() {
        let Some(d) = built.detours[e.0] else { continue };
        if d.departure_time >= scn.sim.replan_s {
            continue;
        }
        let tour = &built.tours[d.uav];
        let rejoin_wp = tour.nodes[d.rejoin_visit].waypoint.expect("rejoin nodes are task nodes");
        commits.push((
            free[d.uav],
            PlannedDetour {
                ugv: d.rendezvous.ugv,
                meet: now + d.rendezvous.time,
                point: d.rendezvous.point,
                release: now + d.timing.release,
                exit: d.rendezvous.exit,
                rejoin_wp,
                waypoints_to_pass: d.visit,
            },
        ));
    }
    Ok(PlanOutcome {
        commits,
        infeasible,
        cost: inst.cost(&schedule)?,
        weight: inst.weight(&schedule)?,
        budget: inst.budget(),
        n_edges: inst.edges().len(),
    })
}

/// Threshold baseline: leave now for the rendezvous with the least overhead
/// that the UAV can reach on nominal consumption, else the earliest one.
pub(super) fn greedy_choice(
    scn: &Scenario,
    now: f64,
    tour: &[Point],
    position: Point,
    next_wp: usize,
    energy_j: f64,
    reservations: &[Reservation],
) -> Option<PlannedDetour> {
    let v = scn.speeds.uav;
    let r = scn.sim.recharge_s;
    let nominal = scn.energy.nominal_conditions();
    let rejoin = tour[next_wp];
    let direct = distance(position, rejoin) / v;
    let mut safest: Option<(f64, PlannedDetour)> = None;
    let mut earliest: Option<PlannedDetour> = None;
    let steps = (scn.sim.horizon_s / r).floor() as usize;
    for k in 0..scn.ugv_roads.len() {
        for m in 0..=steps {
            let meet = now + m as f64 * r;
            if reserved(reservations, k, meet, r) >= scn.sim.capacity {
                continue;
            }
            let point = ugv_point(scn, k, meet);
            let fly = distance(position, point) / v;
            if now + fly > meet + 1e-9 {
                continue;
            }
            let exit = ugv_point(scn, k, meet + r);
            let end = meet + r + distance(exit, rejoin) / v;
            let cost = end - (now + direct);
            let plan = PlannedDetour {
                ugv: k,
                meet,
                point,
                release: meet + r,
                exit,
                rejoin_wp: next_wp,
                waypoints_to_pass: 0,
            };
            let heading = crate::geometry::heading_deg(position, point);
            let air = crate::energy::airspeed(v, nominal.wind_speed, nominal.wind_heading_deg - heading);
            let need = scn.energy.power_draw(air, nominal.weight) * fly
                + scn.energy.hover_power(nominal.weight) * (meet - now - fly);
            if need <= energy_j && safest.as_ref().is_none_or(|(c, _)| cost < *c) {
                safest = Some((cost, plan));
            }
            if earliest.as_ref().is_none_or(|e| meet < e.meet) {
                earliest = Some(plan);
            }
        }
    }
    safest.map(|(_, p)| p).or(earliest)
}
