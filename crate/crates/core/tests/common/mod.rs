//! Independent brute-force oracles shared by the property and acceptance suites.
#![allow(dead_code)]

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rrrp_core::generate::{random_instance, RandomInstanceConfig};
use rrrp_core::{Edge, EdgeId, RendezvousInstance, Schedule, UgvVertex};

/// Random desk-scale instance: 2..=8 UAVs, at most 40 edges, `d = 1`.
pub fn desk_instance(seed: u64) -> RendezvousInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_uavs = rng.random_range(2..=8);
    let cfg = RandomInstanceConfig {
        n_uavs,
        max_departures: 2,
        n_nodes: rng.random_range(2..=n_uavs + 2),
        n_ugvs: 2,
        copies: 1,
        n_pairs: 40 - n_uavs,
        ..Default::default()
    };
    random_instance(&mut rng, &cfg).unwrap()
}

/// Small instance whose schedule space is cheap to enumerate.
pub fn small_instance(seed: u64) -> RendezvousInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_uavs = rng.random_range(1..=4);
    let cfg = RandomInstanceConfig {
        n_uavs,
        max_departures: 2,
        n_nodes: rng.random_range(1..=4),
        n_ugvs: 2,
        copies: rng.random_range(1..=2),
        n_pairs: rng.random_range(1..=8),
        ..Default::default()
    };
    random_instance(&mut rng, &cfg).unwrap()
}

/// Every one-edge-per-group schedule that uses each UGV vertex at most once.
pub fn all_schedules(inst: &RendezvousInstance) -> Vec<Vec<EdgeId>> {
    fn rec(inst: &RendezvousInstance, r: usize, used: &mut Vec<bool>, cur: &mut Vec<EdgeId>, out: &mut Vec<Vec<EdgeId>>) {
        if r == inst.n_groups() {
            out.push(cur.clone());
            return;
        }
        for &e in inst.edges_of_group(r) {
            let v = inst.edge(e).ugv;
            if used[v] {
                continue;
            }
            used[v] = true;
            cur.push(e);
            rec(inst, r + 1, used, cur, out);
            cur.pop();
            used[v] = false;
        }
    }
    let mut out = Vec::new();
    rec(inst, 0, &mut vec![false; inst.ugv_vertices().len()], &mut Vec::new(), &mut out);
    out
}

fn cmp_rel(a: f64, b: f64) -> Ordering {
    let tol = 1e-9 * 1f64.max(a.abs()).max(b.abs());
    if a < b - tol {
        Ordering::Less
    } else if a > b + tol {
        Ordering::Greater
    } else {
        Ordering::Equal
    }
}

/// Tie-break key `(c + lambda a, a, sum of edge ids)`, floats rounded to a relative 1e-9.
///
/// Copies of one rendezvous node carry identical edges, so distinct schedules
/// can share a key; the key, not the edge set, is what must match.
pub fn lagrangian_key(inst: &RendezvousInstance, s: &Schedule, lambda: f64) -> (i64, i64, usize) {
    let (w, a, ids) = raw_key(inst, &s.iter().collect::<Vec<_>>(), lambda);
    let round = |x: f64| (x * 1e9 / x.abs().max(1.0)).round() as i64;
    (round(w), round(a), ids)
}

fn raw_key(inst: &RendezvousInstance, s: &[EdgeId], lambda: f64) -> (f64, f64, usize) {
    let w: f64 = s.iter().map(|&e| inst.edge(e).lagrangian(lambda)).sum();
    let a: f64 = s.iter().map(|&e| inst.edge(e).weight).sum();
    let ids: usize = s.iter().map(|e| e.0).sum();
    (w, a, ids)
}

/// Minimizer of `c + lambda a` by enumeration; ties go to lower weight, then lower edge-id sum.
pub fn brute_lagrangian(inst: &RendezvousInstance, lambda: f64) -> Schedule {
    let best = all_schedules(inst)
        .into_iter()
        .min_by(|x, y| {
            let (kx, ky) = (raw_key(inst, x, lambda), raw_key(inst, y, lambda));
            cmp_rel(kx.0, ky.0).then(cmp_rel(kx.1, ky.1)).then(kx.2.cmp(&ky.2))
        })
        .expect("instances always admit the null schedule");
    Schedule::from_edges(best)
}

/// Budget-feasible minimum cost by enumeration.
pub fn brute_opt(inst: &RendezvousInstance) -> Option<f64> {
    all_schedules(inst)
        .into_iter()
        .filter(|s| s.iter().map(|&e| inst.edge(e).weight).sum::<f64>() <= inst.budget() + 1e-9)
        .map(|s| s.iter().map(|&e| inst.edge(e).cost).sum::<f64>())
        .min_by(f64::total_cmp)
}

/// Whether one element of every consecutive pair can be picked summing to half the total.
pub fn evenodd_direct(values: &[u64]) -> bool {
    let total: u64 = values.iter().sum();
    if total % 2 == 1 {
        return false;
    }
    let n = values.len() / 2;
    (0u32..1 << n).any(|mask| {
        let s: u64 = (0..n).map(|j| values[2 * j + ((mask >> j) & 1) as usize]).sum();
        2 * s == total
    })
}

/// Appends a UAV group with two edges to two fresh vertices and returns the
/// enlarged instance and the two new edge ids.
pub fn with_extra_group(inst: &RendezvousInstance) -> (RendezvousInstance, EdgeId, EdgeId) {
    let n_uav = inst.n_uav_vertices();
    let mut groups = inst.groups().to_vec();
    groups.push(vec![n_uav]);
    let mut vertices = inst.ugv_vertices().to_vec();
    let v = vertices.len();
    vertices.extend([UgvVertex::Plain, UgvVertex::Plain]);
    let mut edges = inst.edges().to_vec();
    let a = EdgeId(edges.len());
    edges.push(Edge::from_weight(n_uav, v, 1.0, 0.0));
    let b = EdgeId(edges.len());
    edges.push(Edge::from_weight(n_uav, v + 1, 2.0, 0.0));
    let out = RendezvousInstance::new(groups, vertices, edges, inst.budget(), inst.capacity()).unwrap();
    (out, a, b)
}
