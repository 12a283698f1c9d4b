//! Mission geometry and the construction of rendezvous instances from it.
//!
//! UAVs fly cyclic task tours at constant speed; UGVs drive closed road loops
//! and never stop. A UGV loop is cut into rendezvous points spaced by the
//! distance it covers during one recharge, so rendezvous `m` starts at time
//! `m * R` and the UAV is released `f` further down the road. A UAV may leave
//! its tour from its current position or from any task node it reaches
//! within the horizon, waits at the rendezvous if early, and rejoins at the
//! task node that followed its departure point.

use serde::{Deserialize, Serialize};

use crate::energy::{ChargeState, EnergyModel, FlightConditions, PROBABILITY_FLOOR};
use crate::error::{Error, Result};
use crate::model::{Edge, RendezvousInstance, UgvVertex};

pub type Point = [f64; 2];

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Direction from `a` to `b`, degrees.
pub fn heading_deg(a: Point, b: Point) -> f64 {
    (b[1] - a[1]).atan2(b[0] - a[0]).to_degrees()
}

fn lerp(a: Point, b: Point, t: f64) -> Point {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t]
}

fn loop_length(points: &[Point]) -> f64 {
    (0..points.len()).map(|i| distance(points[i], points[(i + 1) % points.len()])).sum()
}

/// Point at arc length `arc` along the closed loop `points`.
pub fn point_on_loop(points: &[Point], arc: f64) -> Point {
    let total = loop_length(points);
    let mut s = arc.rem_euclid(total);
    for i in 0..points.len() {
        let (a, b) = (points[i], points[(i + 1) % points.len()]);
        let d = distance(a, b);
        if s <= d && d > 0.0 {
            return lerp(a, b, s / d);
        }
        s -= d;
    }
    points[0]
}

/// State of one UAV at the planning instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavState {
    pub position: Point,
    /// Index of the tour waypoint the UAV is heading to.
    pub next_waypoint: usize,
    pub energy_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionGeometry {
    /// Cyclic task tours, one per UAV, meters.
    pub uav_tours: Vec<Vec<Point>>,
    /// Closed road loops, one per UGV, meters.
    pub ugv_roads: Vec<Vec<Point>>,
    pub uav_speed: f64,
    pub ugv_speed: f64,
    pub recharge_duration: f64,
    pub horizon: f64,
    pub uavs: Vec<UavState>,
    /// Arc-length position of each UGV on its loop.
    pub ugv_positions: Vec<f64>,
    /// Time of the first rendezvous, in `[0, recharge_duration)`; later ones
    /// follow every `recharge_duration`.
    #[serde(default)]
    pub first_slot: f64,
}

impl MissionGeometry {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidGeometry(m));
        if !(self.uav_speed > 0.0 && self.ugv_speed > 0.0) {
            return bad("speeds must be > 0".into());
        }
        if !(self.recharge_duration > 0.0) || !(self.horizon >= 0.0) {
            return bad("recharge duration must be > 0 and horizon >= 0".into());
        }
        if !(self.first_slot >= 0.0 && self.first_slot < self.recharge_duration) {
            return bad("first rendezvous must fall within one recharge duration".into());
        }
        if self.uav_tours.is_empty() || self.ugv_roads.is_empty() {
            return bad("need at least one UAV tour and one UGV road".into());
        }
        if self.uavs.len() != self.uav_tours.len() || self.ugv_positions.len() != self.ugv_roads.len() {
            return bad("one state per tour and one position per road required".into());
        }
        for (i, tour) in self.uav_tours.iter().enumerate() {
            if tour.len() < 2 || loop_length(tour) <= 0.0 {
                return bad(format!("UAV tour {i} needs two distinct waypoints"));
            }
            let s = &self.uavs[i];
            if s.next_waypoint >= tour.len() {
                return bad(format!("UAV {i} heads to unknown waypoint {}", s.next_waypoint));
            }
            let prev = tour[(s.next_waypoint + tour.len() - 1) % tour.len()];
            let next = tour[s.next_waypoint];
            let off = distance(prev, s.position) + distance(s.position, next) - distance(prev, next);
            if off > 1e-6 * (1.0 + distance(prev, next)) {
                return bad(format!("UAV {i} is not on the leg towards waypoint {}", s.next_waypoint));
            }
        }
        for (k, road) in self.ugv_roads.iter().enumerate() {
            if road.len() < 2 || loop_length(road) <= 0.0 {
                return bad(format!("UGV road {k} needs two distinct waypoints"));
            }
        }
        Ok(())
    }

    /// Rendezvous spacing `f`: road distance covered during one recharge.
    pub fn spacing(&self) -> f64 {
        self.ugv_speed * self.recharge_duration
    }

    /// Rendezvous points of UGV `k` within the horizon.
    pub fn rendezvous_points(&self, k: usize) -> Vec<RendezvousPoint> {
        let road = &self.ugv_roads[k];
        let f = self.spacing();
        let s0 = self.ugv_positions[k] + self.ugv_speed * self.first_slot;
        (0..)
            .map(|m| self.first_slot + m as f64 * self.recharge_duration)
            .take_while(|&t| t <= self.horizon + 1e-9)
            .enumerate()
            .map(|(m, time)| RendezvousPoint {
                ugv: k,
                index: m,
                point: point_on_loop(road, s0 + m as f64 * f),
                exit: point_on_loop(road, s0 + (m + 1) as f64 * f),
                time,
            })
            .collect()
    }
}

/// One place and time where a UGV can take a UAV on board.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RendezvousPoint {
    pub ugv: usize,
    pub index: usize,
    pub point: Point,
    /// Where the UAV is released after the recharge.
    pub exit: Point,
    /// When the UGV passes `point`, seconds from now.
    pub time: f64,
}

/// A node of a UAV tour unrolled in time from the current position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TourNode {
    pub position: Point,
    pub arc: f64,
    pub time: f64,
    /// Tour waypoint index; `None` for the current position.
    pub waypoint: Option<usize>,
}

/// A UAV tour laid out from the current position until past the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnrolledTour {
    pub nodes: Vec<TourNode>,
    pub speed: f64,
}

impl UnrolledTour {
    pub fn new(tour: &[Point], state: &UavState, speed: f64, horizon: f64) -> Self {
        let mut nodes = vec![TourNode {
            position: state.position,
            arc: 0.0,
            time: 0.0,
            waypoint: None,
        }];
        let mut w = state.next_waypoint;
        // One node past the horizon so every departure has a successor.
        while nodes.last().unwrap().time <= horizon || nodes.len() < 2 {
            let last = *nodes.last().unwrap();
            let arc = last.arc + distance(last.position, tour[w]);
            nodes.push(TourNode {
                position: tour[w],
                arc,
                time: arc / speed,
                waypoint: Some(w),
            });
            w = (w + 1) % tour.len();
        }
        Self { nodes, speed }
    }

    /// Leg index containing arc `a` (clamped to the last leg).
    pub fn leg_at(&self, a: f64) -> usize {
        let i = self.nodes.partition_point(|n| n.arc <= a);
        i.clamp(1, self.nodes.len() - 1) - 1
    }

    pub fn position_at(&self, a: f64) -> Point {
        let k = self.leg_at(a);
        let (p, q) = (self.nodes[k], self.nodes[k + 1]);
        let len = q.arc - p.arc;
        if len <= 0.0 {
            p.position
        } else {
            lerp(p.position, q.position, ((a - p.arc) / len).clamp(0.0, 1.0))
        }
    }

    pub fn leg_heading(&self, k: usize) -> f64 {
        heading_deg(self.nodes[k].position, self.nodes[k + 1].position)
    }
}

/// Timeline of one detour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetourTiming {
    pub arrival: f64,
    pub wait: f64,
    /// End of the recharge, when the UAV leaves the UGV.
    pub release: f64,
    /// Arrival back at the rejoin node.
    pub end: f64,
    /// Overhead against flying straight to the rejoin node, seconds.
    pub cost: f64,
}

/// Times a detour leaving `from` at `depart_time` for `rdv` and rejoining at `next`.
///
/// `None` when the UAV cannot reach the rendezvous before the UGV passes, or
/// cannot be back at `next` by the end of the horizon.
pub fn detour_cost(
    from: Point,
    depart_time: f64,
    next: Point,
    rdv: &RendezvousPoint,
    geometry: &MissionGeometry,
) -> Option<DetourTiming> {
    let v = geometry.uav_speed;
    let arrival = depart_time + distance(from, rdv.point) / v;
    if arrival > rdv.time + 1e-9 {
        return None;
    }
    let release = rdv.time + geometry.recharge_duration;
    let end = release + distance(rdv.exit, next) / v;
    if end > geometry.horizon + 1e-9 {
        return None;
    }
    let direct = depart_time + distance(from, next) / v;
    Some(DetourTiming {
        arrival,
        wait: (rdv.time - arrival).max(0.0),
        release,
        end,
        cost: (end - direct).max(0.0),
    })
}

/// Where a UAV vertex leaves its tour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Departure {
    pub uav: usize,
    /// Index into the UAV's unrolled tour; `None` for its null vertex.
    pub visit: Option<usize>,
}

/// Everything needed to fly an edge of a built instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detour {
    pub uav: usize,
    pub visit: usize,
    pub departure: Point,
    pub departure_time: f64,
    pub rendezvous: RendezvousPoint,
    pub copy: usize,
    /// Unrolled-tour index of the node the UAV flies to after recharging.
    pub rejoin_visit: usize,
    pub rejoin: Point,
    pub timing: DetourTiming,
    pub p_reach: f64,
    pub p_after: f64,
}

/// A UGV slot that is already taken around `time` (seconds from now).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reservation {
    pub ugv: usize,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildOptions {
    /// Risk level `rho`; the budget is `ln(1/rho)`.
    pub rho: f64,
    pub capacity: usize,
    pub reservations: Vec<Reservation>,
    /// Seed of the planner's Monte Carlo samples.
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct BuiltInstance {
    pub instance: RendezvousInstance,
    /// Per UAV vertex.
    pub departures: Vec<Departure>,
    /// Per edge; `None` for null edges.
    pub detours: Vec<Option<Detour>>,
    pub tours: Vec<UnrolledTour>,
}

fn mix_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-sample energy along an unrolled tour under fixed per-sample conditions.
struct TourEnergy {
    /// Per-sample power on each leg, `[sample][leg]`.
    power: Vec<Vec<f64>>,
    /// Per-sample energy spent up to each node, `[sample][node]`.
    cumulative: Vec<Vec<f64>>,
    hover: Vec<f64>,
    /// Per-sample wind vector, m/s.
    wind: Vec<[f64; 2]>,
    weight: Vec<f64>,
}

impl TourEnergy {
    fn new(tour: &UnrolledTour, model: &EnergyModel, conditions: &[FlightConditions]) -> Self {
        let n_legs = tour.nodes.len() - 1;
        let headings: Vec<f64> = (0..n_legs).map(|k| tour.leg_heading(k)).collect();
        let mut power = Vec::with_capacity(conditions.len());
        let mut cumulative = Vec::with_capacity(conditions.len());
        for c in conditions {
            let p: Vec<f64> = headings
                .iter()
                .map(|&h| {
                    let air = crate::energy::airspeed(tour.speed, c.wind_speed, c.wind_heading_deg - h);
                    model.power_draw(air, c.weight)
                })
                .collect();
            let mut cum = vec![0.0; n_legs + 1];
            for k in 0..n_legs {
                cum[k + 1] = cum[k] + p[k] * (tour.nodes[k + 1].arc - tour.nodes[k].arc) / tour.speed;
            }
            power.push(p);
            cumulative.push(cum);
        }
        Self {
            power,
            cumulative,
            hover: conditions.iter().map(|c| model.hover_power(c.weight)).collect(),
            wind: conditions
                .iter()
                .map(|c| {
                    let psi = c.wind_heading_deg.to_radians();
                    [c.wind_speed * psi.cos(), c.wind_speed * psi.sin()]
                })
                .collect(),
            weight: conditions.iter().map(|c| c.weight).collect(),
        }
    }

    /// Energy of sample `s` from the tour start to arc `a`, on leg `k = tour.leg_at(a)`.
    fn until_on_leg(&self, tour: &UnrolledTour, s: usize, k: usize, a: f64) -> f64 {
        self.cumulative[s][k] + self.power[s][k] * (a - tour.nodes[k].arc).max(0.0) / tour.speed
    }

    /// Energy of sample `s` flying straight from `from` to `to`.
    fn fly(&self, model: &EnergyModel, s: usize, leg: &StraightLeg) -> f64 {
        if leg.time <= 0.0 {
            return 0.0;
        }
        let w = self.wind[s];
        let air = (leg.speed + w[0] * leg.dir[0] + w[1] * leg.dir[1]).abs();
        model.power_draw(air, self.weight[s]) * leg.time
    }
}

/// A straight flight: unit direction, ground speed and duration.
struct StraightLeg {
    dir: [f64; 2],
    speed: f64,
    time: f64,
}

impl StraightLeg {
    fn new(from: Point, to: Point, speed: f64) -> Self {
        let d = distance(from, to);
        let dir = if d > 0.0 {
            [(to[0] - from[0]) / d, (to[1] - from[1]) / d]
        } else {
            [1.0, 0.0]
        };
        Self { dir, speed, time: d / speed }
    }
}

pub fn build_instance(geometry: &MissionGeometry, energy: &EnergyModel, rho: f64, capacity: usize) -> Result<BuiltInstance> {
    build_instance_with(
        geometry,
        energy,
        &BuildOptions {
            rho,
            capacity,
            reservations: Vec::new(),
            seed: energy.seed,
        },
    )
}

pub fn build_instance_with(geometry: &MissionGeometry, energy: &EnergyModel, opts: &BuildOptions) -> Result<BuiltInstance> {
    if !(opts.rho > 0.0 && opts.rho < 1.0) {
        return Err(Error::InvalidParameter(format!("rho must lie in (0, 1), got {}", opts.rho)));
    }
    if opts.capacity == 0 {
        return Err(Error::InvalidParameter("capacity must be >= 1".into()));
    }
    geometry.validate()?;
    energy.validate()?;
    let horizon = geometry.horizon;
    let v = geometry.uav_speed;

    // UGV slots, minus copies already reserved around the same time.
    let mut ugv_vertices = Vec::new();
    let mut slots: Vec<(RendezvousPoint, usize, usize)> = Vec::new(); // (point, copy, vertex id)
    for k in 0..geometry.ugv_roads.len() {
        for rdv in geometry.rendezvous_points(k) {
            let taken = opts
                .reservations
                .iter()
                .filter(|r| r.ugv == k && (r.time - rdv.time).abs() < geometry.recharge_duration - 1e-9)
                .count();
            for copy in 0..opts.capacity.saturating_sub(taken) {
                slots.push((rdv, copy, ugv_vertices.len()));
                ugv_vertices.push(UgvVertex::Slot {
                    ugv: k,
                    node: rdv.index,
                    copy,
                });
            }
        }
    }

    let mut groups = Vec::new();
    let mut departures = Vec::new();
    let mut detours = Vec::new();
    let mut edges = Vec::new();
    let mut null_edges = Vec::new();
    let mut tours = Vec::new();
    for (r, (tour, state)) in geometry.uav_tours.iter().zip(&geometry.uavs).enumerate() {
        let unrolled = UnrolledTour::new(tour, state, v, horizon);
        let seed = mix_seed(opts.seed, r as u64 + 1);
        let pre_bank = energy.sample_bank(seed);
        let post_bank = energy.post_recharge_bank(seed);
        let pre = TourEnergy::new(&unrolled, energy, &pre_bank.conditions);
        let post = TourEnergy::new(&unrolled, energy, &post_bank.conditions);
        let n_samples = pre_bank.len();
        let available = state.energy_j;
        let full = ChargeState::full(energy).energy_j;

        let mut after_cache = std::collections::HashMap::new();
        let mut group = Vec::new();
        for (visit, node) in unrolled.nodes.iter().enumerate() {
            if node.time > horizon + 1e-9 {
                break;
            }
            let rejoin_visit = visit + 1;
            let next = unrolled.nodes[rejoin_visit];
            let uav_vertex = departures.len();
            let mut any = false;
            for &(rdv, copy, vertex) in &slots {
                let Some(timing) = detour_cost(node.position, node.time, next.position, &rdv, geometry) else {
                    continue;
                };
                let to_rdv = StraightLeg::new(node.position, rdv.point, v);
                let ok_pre = (0..n_samples)
                    .filter(|&s| {
                        let e = pre.cumulative[s][visit] + pre.fly(energy, s, &to_rdv) + pre.hover[s] * timing.wait;
                        e <= available
                    })
                    .count();
                if ok_pre == 0 {
                    continue;
                }
                // The flight after the recharge does not depend on where the UAV left its tour.
                let ok_post = *after_cache.entry((rdv.ugv, rdv.index, rejoin_visit)).or_insert_with(|| {
                    let tail_end = (next.arc + v * (horizon - timing.end)).max(next.arc);
                    let k = unrolled.leg_at(tail_end);
                    let back = StraightLeg::new(rdv.exit, next.position, v);
                    (0..n_samples)
                        .filter(|&s| {
                            let e = post.fly(energy, s, &back) + post.until_on_leg(&unrolled, s, k, tail_end)
                                - post.cumulative[s][rejoin_visit];
                            e <= full
                        })
                        .count()
                });
                let p_reach = ok_pre as f64 / n_samples as f64;
                let p_after = ok_post as f64 / n_samples as f64;
                let prob = p_reach * p_after;
                if prob <= 0.0 {
                    continue;
                }
                any = true;
                edges.push(Edge::from_prob(uav_vertex, vertex, timing.cost, prob));
                detours.push(Some(Detour {
                    uav: r,
                    visit,
                    departure: node.position,
                    departure_time: node.time,
                    rendezvous: rdv,
                    copy,
                    rejoin_visit,
                    rejoin: next.position,
                    timing,
                    p_reach,
                    p_after,
                }));
            }
            // Keep departure vertices without edges out of the graph.
            if any {
                group.push(uav_vertex);
                departures.push(Departure { uav: r, visit: Some(visit) });
            }
        }
        let null_vertex = departures.len();
        departures.push(Departure { uav: r, visit: None });
        group.push(null_vertex);
        groups.push(group);

        let k = unrolled.leg_at(v * horizon);
        let ok = (0..n_samples)
            .filter(|&s| pre.until_on_leg(&unrolled, s, k, v * horizon) <= available)
            .count();
        let p_null = (ok as f64 / n_samples as f64).max(PROBABILITY_FLOOR);
        null_edges.push((null_vertex, p_null));
        tours.push(unrolled);
    }
    for (r, (uav_vertex, p)) in null_edges.into_iter().enumerate() {
        let vertex = ugv_vertices.len();
        ugv_vertices.push(UgvVertex::Null { group: r });
        edges.push(Edge::from_prob(uav_vertex, vertex, 0.0, p));
        detours.push(None);
    }

    let instance = RendezvousInstance::new(groups, ugv_vertices, edges, (1.0 / opts.rho).ln(), opts.capacity)?;
    Ok(BuiltInstance {
        instance,
        departures,
        detours,
        tours,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(side: f64) -> Vec<Point> {
        vec![[0.0, 0.0], [side, 0.0], [side, side], [0.0, side]]
    }

    #[test]
    fn spacing_is_speed_times_recharge() {
        let g = MissionGeometry {
            uav_tours: vec![square(100.0)],
            ugv_roads: vec![square(1000.0)],
            uav_speed: 9.8,
            ugv_speed: 4.5,
            recharge_duration: 100.0,
            horizon: 2500.0,
            uavs: vec![UavState {
                position: [0.0, 0.0],
                next_waypoint: 1,
                energy_j: 1.0,
            }],
            ugv_positions: vec![0.0],
            first_slot: 0.0,
        };
        assert!((g.spacing() - 450.0).abs() < 1e-12);
        let pts = g.rendezvous_points(0);
        assert_eq!(pts.len(), 26);
        assert!((distance(pts[1].point, [450.0, 0.0])).abs() < 1e-9);
        assert_eq!(pts[1].exit, pts[2].point);
    }

    #[test]
    fn point_on_loop_wraps() {
        let sq = square(10.0);
        assert_eq!(point_on_loop(&sq, 45.0), [5.0, 0.0]);
        assert_eq!(point_on_loop(&sq, 15.0), [10.0, 5.0]);
    }

    #[test]
    fn unrolled_tour_passes_horizon() {
        let tour = square(100.0);
        let state = UavState {
            position: [50.0, 0.0],
            next_waypoint: 1,
            energy_j: 0.0,
        };
        let u = UnrolledTour::new(&tour, &state, 10.0, 100.0);
        assert_eq!(u.nodes[1].position, [100.0, 0.0]);
        assert!((u.nodes[1].time - 5.0).abs() < 1e-12);
        assert!(u.nodes.last().unwrap().time > 100.0);
        assert!(u.nodes[..u.nodes.len() - 1].iter().all(|n| n.time <= 100.0));
        assert_eq!(u.position_at(55.0), [100.0, 5.0]);
    }
}
