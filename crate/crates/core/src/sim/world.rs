//! The time-stepped world of one trial.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::policy::{greedy_choice, plan_rrrp, ugv_point, PlannedDetour};
use super::{Event, Policy, Scenario, SimMetrics, TrialResult};
use crate::energy::{airspeed, FlightConditions};
use crate::error::Result;
use crate::geometry::{distance, heading_deg, Point, Reservation, UavState};

const EPS_T: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    Tour,
    Outbound(PlannedDetour),
    Hover(PlannedDetour),
    Charging(PlannedDetour),
    Return { target: Point, rejoin_wp: usize },
}

struct Uav {
    tour: Vec<Point>,
    position: Point,
    next_wp: usize,
    energy: f64,
    conditions: FlightConditions,
    rng: ChaCha8Rng,
    mode: Mode,
    pending: Option<PlannedDetour>,
    /// Tour distance covered, m.
    progress: f64,
    /// Tour distance skipped by the current detour, credited on rejoin.
    skipped: f64,
    nodes: usize,
    rendezvous: usize,
}

impl Uav {
    fn is_free(&self) -> bool {
        self.mode == Mode::Tour && self.pending.is_none()
    }

    fn detour(&self) -> Option<&PlannedDetour> {
        match &self.mode {
            Mode::Outbound(p) | Mode::Hover(p) | Mode::Charging(p) => Some(p),
            _ => self.pending.as_ref(),
        }
    }
}

struct World<'a> {
    scn: &'a Scenario,
    policy: Policy,
    rho: f64,
    seed: u64,
    uavs: Vec<Uav>,
    events: Vec<Event>,
    record: bool,
    failures: usize,
    first_failure: Option<f64>,
    max_load: usize,
    replans: u64,
}

/// Outcome of advancing one UAV through part of a step.
enum Advance {
    Continue,
    Failed(f64),
}

impl World<'_> {
    fn log(&mut self, t: f64, vehicle: String, event: &str, data: serde_json::Value) {
        if self.record {
            self.events.push(Event {
                t,
                vehicle,
                event: event.into(),
                data,
            });
        }
    }

    fn reservations(&self) -> Vec<Reservation> {
        self.uavs
            .iter()
            .filter_map(Uav::detour)
            .map(|p| Reservation { ugv: p.ugv, time: p.meet })
            .collect()
    }

    fn fly_power(&self, i: usize, from: Point, to: Point) -> f64 {
        let u = &self.uavs[i];
        let c = &u.conditions;
        let air = airspeed(self.scn.speeds.uav, c.wind_speed, c.wind_heading_deg - heading_deg(from, to));
        self.scn.energy.power_draw(air, c.weight)
    }

    /// Drains `power * dt`; returns the depletion time if the battery runs dry.
    fn drain(&mut self, i: usize, now: f64, power: f64, dt: f64) -> Option<f64> {
        let u = &mut self.uavs[i];
        let need = power * dt;
        if need > u.energy {
            let t_fail = now + u.energy / power;
            u.energy = 0.0;
            Some(t_fail)
        } else {
            u.energy -= need;
            None
        }
    }

    fn start_detour(&mut self, i: usize, now: f64, plan: PlannedDetour) {
        let u = &mut self.uavs[i];
        u.pending = None;
        u.skipped = distance(u.position, u.tour[plan.rejoin_wp]);
        u.mode = Mode::Outbound(plan);
        let data = json!({"ugv": plan.ugv, "meet": plan.meet, "point": plan.point, "rejoin_wp": plan.rejoin_wp});
        self.log(now, format!("uav{i}"), "depart", data);
    }

    /// Moves UAV `i` from `now` for `dt` seconds, handling every boundary inside the step.
    fn advance(&mut self, i: usize, mut now: f64, dt: f64) -> Advance {
        let end = now + dt;
        let v = self.scn.speeds.uav;
        while now < end - EPS_T {
            let left = end - now;
            let mode = self.uavs[i].mode;
            match mode {
                Mode::Tour => {
                    let u = &self.uavs[i];
                    let target = u.tour[u.next_wp];
                    let d = distance(u.position, target);
                    let tau = (d / v).min(left);
                    if tau > 0.0 {
                        let p = self.fly_power(i, u.position, target);
                        if let Some(t) = self.drain(i, now, p, tau) {
                            return Advance::Failed(t);
                        }
                    }
                    let u = &mut self.uavs[i];
                    now += tau;
                    if tau * v >= d - 1e-9 {
                        u.position = target;
                        u.progress += d;
                        u.nodes += 1;
                        let wp = u.next_wp;
                        u.next_wp = (wp + 1) % u.tour.len();
                        let progress = u.progress;
                        let mut depart = None;
                        if let Some(p) = &mut u.pending {
                            p.waypoints_to_pass = p.waypoints_to_pass.saturating_sub(1);
                            if p.waypoints_to_pass == 0 {
                                depart = Some(*p);
                            }
                        }
                        self.log(now, format!("uav{i}"), "task_node", json!({"waypoint": wp, "progress": progress}));
                        if let Some(p) = depart {
                            self.start_detour(i, now, p);
                        }
                    } else {
                        let frac = tau * v / d;
                        u.position = [
                            u.position[0] + (target[0] - u.position[0]) * frac,
                            u.position[1] + (target[1] - u.position[1]) * frac,
                        ];
                        u.progress += tau * v;
                    }
                }
                Mode::Outbound(plan) => {
                    let u = &self.uavs[i];
                    let d = distance(u.position, plan.point);
                    let tau = (d / v).min(left);
                    if tau > 0.0 {
                        let p = self.fly_power(i, u.position, plan.point);
                        if let Some(t) = self.drain(i, now, p, tau) {
                            return Advance::Failed(t);
                        }
                    }
                    now += tau;
                    let u = &mut self.uavs[i];
                    if tau * v >= d - 1e-9 {
                        u.position = plan.point;
                        if now > plan.meet + 1e-6 {
                            log::warn!("uav{i} reached the rendezvous {:.3} s late", now - plan.meet);
                        }
                        u.mode = Mode::Hover(plan);
                        self.log(now, format!("uav{i}"), "arrive_rdv", json!({"ugv": plan.ugv, "meet": plan.meet}));
                    } else {
                        let frac = tau * v / d;
                        u.position = [
                            u.position[0] + (plan.point[0] - u.position[0]) * frac,
                            u.position[1] + (plan.point[1] - u.position[1]) * frac,
                        ];
                    }
                }
                Mode::Hover(plan) => {
                    let tau = (plan.meet - now).max(0.0).min(left);
                    if tau > 0.0 {
                        let p = self.scn.energy.hover_power(self.uavs[i].conditions.weight);
                        if let Some(t) = self.drain(i, now, p, tau) {
                            return Advance::Failed(t);
                        }
                    }
                    now += tau;
                    if now >= plan.meet - EPS_T {
                        self.uavs[i].mode = Mode::Charging(plan);
                        let load = self.charging_on(plan.ugv, now);
                        self.max_load = self.max_load.max(load);
                        if load > self.scn.sim.capacity {
                            self.log(now, format!("ugv{}", plan.ugv), "overload", json!({"load": load}));
                        }
                        self.log(now, format!("uav{i}"), "charge_start", json!({"ugv": plan.ugv, "soc": self.soc(i)}));
                    }
                }
                Mode::Charging(plan) => {
                    let tau = (plan.release - now).max(0.0).min(left);
                    now += tau;
                    self.uavs[i].position = ugv_point(self.scn, plan.ugv, now);
                    if now >= plan.release - EPS_T {
                        let capacity = self.scn.energy.capacity_j();
                        let energy = &self.scn.energy;
                        let u = &mut self.uavs[i];
                        u.energy = capacity;
                        u.conditions = energy.draw_conditions(&mut u.rng);
                        u.rendezvous += 1;
                        u.position = plan.exit;
                        u.mode = Mode::Return {
                            target: u.tour[plan.rejoin_wp],
                            rejoin_wp: plan.rejoin_wp,
                        };
                        self.log(now, format!("uav{i}"), "charge_end", json!({"ugv": plan.ugv}));
                    }
                }
                Mode::Return { target, rejoin_wp } => {
                    let u = &self.uavs[i];
                    let d = distance(u.position, target);
                    let tau = (d / v).min(left);
                    if tau > 0.0 {
                        let p = self.fly_power(i, u.position, target);
                        if let Some(t) = self.drain(i, now, p, tau) {
                            return Advance::Failed(t);
                        }
                    }
                    now += tau;
                    let u = &mut self.uavs[i];
                    if tau * v >= d - 1e-9 {
                        u.position = target;
                        u.progress += u.skipped;
                        u.skipped = 0.0;
                        u.nodes += 1;
                        u.next_wp = (rejoin_wp + 1) % u.tour.len();
                        u.mode = Mode::Tour;
                        let progress = u.progress;
                        self.log(now, format!("uav{i}"), "rejoin", json!({"waypoint": rejoin_wp, "progress": progress}));
                    } else {
                        let frac = tau * v / d;
                        u.position = [
                            u.position[0] + (target[0] - u.position[0]) * frac,
                            u.position[1] + (target[1] - u.position[1]) * frac,
                        ];
                    }
                }
            }
        }
        Advance::Continue
    }

    /// UAVs on board UGV `ugv` at `now`; a recharge ending at `now` no longer counts.
    fn charging_on(&self, ugv: usize, now: f64) -> usize {
        self.uavs
            .iter()
            .filter(|u| matches!(u.mode, Mode::Charging(p) if p.ugv == ugv && p.release > now + EPS_T))
            .count()
    }

    fn soc(&self, i: usize) -> f64 {
        self.uavs[i].energy / self.scn.energy.capacity_j()
    }

    fn commit(&mut self, i: usize, now: f64, plan: PlannedDetour) {
        let data = json!({
            "ugv": plan.ugv,
            "meet": plan.meet,
            "release": plan.release,
            "waypoints_to_pass": plan.waypoints_to_pass,
            "soc": self.soc(i),
        });
        self.log(now, format!("uav{i}"), "commit", data);
        if plan.waypoints_to_pass == 0 {
            self.start_detour(i, now, plan);
        } else {
            self.uavs[i].pending = Some(plan);
        }
    }

    fn replan(&mut self, now: f64) -> Result<()> {
        let Policy::Rrrp { solver } = self.policy else {
            return Ok(());
        };
        let free: Vec<usize> = (0..self.uavs.len()).filter(|&i| self.uavs[i].is_free()).collect();
        if free.is_empty() {
            return Ok(());
        }
        let states: Vec<UavState> = free
            .iter()
            .map(|&i| {
                let u = &self.uavs[i];
                UavState {
                    position: u.position,
                    next_waypoint: u.next_wp,
                    energy_j: u.energy,
                }
            })
            .collect();
        let seed = mix(self.seed, 0x5151_0000 + self.replans);
        self.replans += 1;
        let out = plan_rrrp(self.scn, solver, self.rho, now, &free, &states, &self.reservations(), seed)?;
        let data = json!({
            "free": free,
            "soc": free.iter().map(|&i| self.soc(i)).collect::<Vec<_>>(),
            "position": free.iter().map(|&i| self.uavs[i].position).collect::<Vec<_>>(),
            "edges": out.n_edges,
            "cost": out.cost,
            "weight": out.weight,
            "budget": out.budget,
            "infeasible": out.infeasible,
            "commits": out.commits.iter().map(|(i, _)| *i).collect::<Vec<_>>(),
        });
        self.log(now, "planner".into(), "replan", data);
        if out.infeasible {
            log::info!("t={now}: no schedule meets the risk level; using the most reliable one");
        }
        for (i, plan) in out.commits {
            self.commit(i, now, plan);
        }
        Ok(())
    }

    fn greedy(&mut self, now: f64) {
        let Policy::Greedy { threshold } = self.policy else {
            return;
        };
        for i in 0..self.uavs.len() {
            if !self.uavs[i].is_free() || self.soc(i) >= threshold {
                continue;
            }
            let reservations = self.reservations();
            let u = &self.uavs[i];
            if let Some(plan) = greedy_choice(self.scn, now, &u.tour, u.position, u.next_wp, u.energy, &reservations) {
                self.commit(i, now, plan);
            }
        }
    }
}

fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Runs one trial. `rho` is ignored by the threshold policy.
pub fn run_trial(scn: &Scenario, policy: Policy, rho: f64, seed: u64, record_events: bool) -> Result<TrialResult> {
    scn.validate()?;
    if policy.uses_rho() && !(rho > 0.0 && rho < 1.0) {
        return Err(crate::error::Error::InvalidParameter(format!("rho must lie in (0, 1), got {rho}")));
    }
    let capacity = scn.energy.capacity_j();
    let uavs = scn
        .uav_tours
        .iter()
        .enumerate()
        .map(|(i, tour)| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 0x77_0000));
            rng.set_stream(i as u64);
            let conditions = scn.energy.draw_conditions(&mut rng);
            Uav {
                tour: tour.clone(),
                position: tour[0],
                next_wp: 1 % tour.len(),
                energy: capacity,
                conditions,
                rng,
                mode: Mode::Tour,
                pending: None,
                progress: 0.0,
                skipped: 0.0,
                nodes: 0,
                rendezvous: 0,
            }
        })
        .collect();
    let mut w = World {
        scn,
        policy,
        rho,
        seed,
        uavs,
        events: Vec::new(),
        record: record_events,
        failures: 0,
        first_failure: None,
        max_load: 0,
        replans: 0,
    };
    w.log(0.0, "planner".into(), "start", json!({"policy": policy.to_string(), "rho": rho, "seed": seed}));

    let dt = scn.sim.dt;
    let max_time = scn.sim.max_time_s;
    let mut now = 0.0;
    let mut next_replan = 0.0;
    let mut step: u64 = 0;
    let end_time = 'run: loop {
        if now >= max_time - EPS_T {
            break max_time;
        }
        if now >= next_replan - EPS_T {
            w.replan(now)?;
            next_replan += scn.sim.replan_s;
        }
        w.greedy(now);
        let h = dt.min(max_time - now);
        for i in 0..w.uavs.len() {
            if let Advance::Failed(t) = w.advance(i, now, h) {
                w.failures += 1;
                w.first_failure.get_or_insert(t);
                w.log(t, format!("uav{i}"), "failure", json!({"mode": format!("{:?}", w.uavs[i].mode).split(['(', ' ']).next()}));
                if scn.sim.stop_at_failure {
                    break 'run t;
                }
                // Recovered in place with a fresh battery; the detour is abandoned.
                let energy = &scn.energy;
                let u = &mut w.uavs[i];
                u.energy = capacity;
                u.conditions = energy.draw_conditions(&mut u.rng);
                u.pending = None;
                if u.mode != Mode::Tour {
                    let target = u.tour[match u.mode {
                        Mode::Outbound(p) | Mode::Hover(p) | Mode::Charging(p) => p.rejoin_wp,
                        Mode::Return { rejoin_wp, .. } => rejoin_wp,
                        Mode::Tour => unreachable!(),
                    }];
                    let rejoin_wp = u.tour.iter().position(|&p| p == target).unwrap_or(u.next_wp);
                    u.mode = Mode::Return { target, rejoin_wp };
                }
            }
        }
        step += 1;
        now = step as f64 * dt;
    };

    let v = scn.speeds.uav;
    let n = w.uavs.len() as f64;
    let mut overhead = 0.0;
    for i in 0..w.uavs.len() {
        let u = &w.uavs[i];
        let (progress, nodes, rdv, energy) = (u.progress, u.nodes, u.rendezvous, u.energy);
        w.log(
            end_time,
            format!("uav{i}"),
            "end",
            json!({"elapsed": end_time, "progress": progress, "nodes": nodes, "rendezvous": rdv, "energy_j": energy}),
        );
        overhead += overhead_of(end_time, progress, v);
    }
    let rendezvous: usize = w.uavs.iter().map(|u| u.rendezvous).sum();
    let nodes: usize = w.uavs.iter().map(|u| u.nodes).sum();
    let metrics = SimMetrics {
        ttff_s: w.first_failure.unwrap_or(end_time),
        overhead: overhead / n,
        nodes: nodes as f64 / n,
        rdv_per_horizon: rdv_per_horizon(rendezvous, w.uavs.len(), scn.sim.horizon_s, end_time),
    };
    Ok(TrialResult {
        metrics,
        censored: w.first_failure.is_none(),
        failures: w.failures,
        sim_time: end_time,
        rendezvous,
        max_ugv_load: w.max_load,
        events: w.events,
    })
}

/// `(elapsed - task time) / task time`, with task time the tour distance over speed.
pub fn overhead_of(elapsed: f64, progress: f64, uav_speed: f64) -> f64 {
    let task = progress / uav_speed;
    if task > 0.0 {
        ((elapsed - task) / task).max(0.0)
    } else {
        0.0
    }
}

pub fn rdv_per_horizon(rendezvous: usize, n_uavs: usize, horizon: f64, sim_time: f64) -> f64 {
    if sim_time > 0.0 {
        rendezvous as f64 / n_uavs as f64 * horizon / sim_time
    } else {
        0.0
    }
}
