//! Minimum-cost flow and the Lagrangian subproblem.
//!
//! [`MinCostFlow`] is a successive-shortest-path solver (Dijkstra on reduced
//! costs with node potentials). For a required flow value `F` it runs `F`
//! shortest-path phases, so the total work is `O(F (|E| + |V|) log |V|)`.
//! With `F = N_a` this is polynomial in the instance size, which is all the
//! Lagrangian subproblem needs.
//!
//! Costs are lexicographic triples ([`LexCost`]): the Lagrangian objective is
//! the primary key, the matching weight breaks ties, then the edge id.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::ops::{Add, Neg, Sub};

use crate::error::{Error, Result};
use crate::model::{EdgeId, RendezvousInstance, Schedule};

const REL_EPS: f64 = 1e-12;

#[inline]
fn cmp_tol(a: f64, b: f64) -> Ordering {
    let tol = REL_EPS * 1f64.max(a.abs()).max(b.abs());
    if a < b - tol {
        Ordering::Less
    } else if a > b + tol {
        Ordering::Greater
    } else {
        Ordering::Equal
    }
}

/// Lexicographically ordered arc cost. Components closer than a relative
/// `1e-12` compare equal and defer to the next one.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LexCost(pub f64, pub f64, pub f64);

impl LexCost {
    pub const ZERO: LexCost = LexCost(0.0, 0.0, 0.0);
    pub const INFINITY: LexCost = LexCost(f64::INFINITY, f64::INFINITY, f64::INFINITY);

    pub fn scalar(c: f64) -> Self {
        LexCost(c, 0.0, 0.0)
    }

    pub fn tol_cmp(&self, other: &Self) -> Ordering {
        if self.0.is_infinite() || other.0.is_infinite() {
            return self.0.total_cmp(&other.0);
        }
        cmp_tol(self.0, other.0)
            .then_with(|| cmp_tol(self.1, other.1))
            .then_with(|| cmp_tol(self.2, other.2))
    }

    pub fn is_negative(&self) -> bool {
        self.tol_cmp(&LexCost::ZERO) == Ordering::Less
    }
}

impl Add for LexCost {
    type Output = LexCost;
    fn add(self, o: LexCost) -> LexCost {
        LexCost(self.0 + o.0, self.1 + o.1, self.2 + o.2)
    }
}

impl Sub for LexCost {
    type Output = LexCost;
    fn sub(self, o: LexCost) -> LexCost {
        LexCost(self.0 - o.0, self.1 - o.1, self.2 - o.2)
    }
}

impl Neg for LexCost {
    type Output = LexCost;
    fn neg(self) -> LexCost {
        LexCost(-self.0, -self.1, -self.2)
    }
}

/// Exact total order for the priority queue.
#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapKey(LexCost, usize);

impl Eq for HeapKey {}

impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
             .0
            .total_cmp(&other.0 .0)
            .then_with(|| self.0 .1.total_cmp(&other.0 .1))
            .then_with(|| self.0 .2.total_cmp(&other.0 .2))
            .then_with(|| self.1.cmp(&other.1))
    }
}

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    cap: i64,
    cost: LexCost,
}

/// Handle to a forward arc added with [`MinCostFlow::add_arc`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArcId(usize);

/// Directed network with integral capacities.
#[derive(Debug, Clone)]
pub struct MinCostFlow {
    arcs: Vec<Arc>,
    original_cap: Vec<i64>,
    adjacency: Vec<Vec<usize>>,
}

/// Result of [`MinCostFlow::run`].
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    pub value: i64,
    pub cost: LexCost,
}

impl MinCostFlow {
    pub fn new(n_nodes: usize) -> Self {
        Self {
            arcs: Vec::new(),
            original_cap: Vec::new(),
            adjacency: vec![Vec::new(); n_nodes],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn add_arc(&mut self, from: usize, to: usize, cap: i64, cost: LexCost) -> ArcId {
        let id = self.arcs.len();
        self.arcs.push(Arc { to, cap, cost });
        self.arcs.push(Arc {
            to: from,
            cap: 0,
            cost: -cost,
        });
        self.original_cap.push(cap);
        self.original_cap.push(0);
        self.adjacency[from].push(id);
        self.adjacency[to].push(id + 1);
        ArcId(id)
    }

    pub fn set_cost(&mut self, arc: ArcId, cost: LexCost) {
        self.arcs[arc.0].cost = cost;
        self.arcs[arc.0 + 1].cost = -cost;
    }

    /// Flow currently carried by a forward arc.
    pub fn flow(&self, arc: ArcId) -> i64 {
        self.arcs[arc.0 + 1].cap
    }

    fn reset(&mut self) {
        for (arc, &cap) in self.arcs.iter_mut().zip(&self.original_cap) {
            arc.cap = cap;
        }
    }

    /// Bellman-Ford potentials; only needed when some arc cost is negative.
    fn initial_potentials(&self, source: usize) -> Vec<LexCost> {
        let n = self.n_nodes();
        if !self.arcs.iter().any(|a| a.cap > 0 && a.cost.is_negative()) {
            return vec![LexCost::ZERO; n];
        }
        let mut dist = vec![LexCost::INFINITY; n];
        dist[source] = LexCost::ZERO;
        for _ in 0..n {
            let mut changed = false;
            for u in 0..n {
                if dist[u].0.is_infinite() {
                    continue;
                }
                for &a in &self.adjacency[u] {
                    let arc = &self.arcs[a];
                    if arc.cap > 0 {
                        let nd = dist[u] + arc.cost;
                        if nd.tol_cmp(&dist[arc.to]) == Ordering::Less {
                            dist[arc.to] = nd;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        dist.into_iter()
            .map(|d| if d.0.is_infinite() { LexCost::ZERO } else { d })
            .collect()
    }

    /// Sends exactly `required` units from `source` to `sink` at minimum cost.
    ///
    /// Flows from a previous run are discarded first.
    pub fn run(&mut self, source: usize, sink: usize, required: i64) -> Result<FlowSolution> {
        self.reset();
        let n = self.n_nodes();
        let mut potential = self.initial_potentials(source);
        let mut dist = vec![LexCost::INFINITY; n];
        let mut parent = vec![usize::MAX; n];
        let mut done = vec![false; n];
        let mut value = 0i64;
        let mut total = LexCost::ZERO;

        while value < required {
            dist.fill(LexCost::INFINITY);
            parent.fill(usize::MAX);
            done.fill(false);
            dist[source] = LexCost::ZERO;
            let mut heap = BinaryHeap::new();
            heap.push(Reverse(HeapKey(LexCost::ZERO, source)));
            while let Some(Reverse(HeapKey(d, u))) = heap.pop() {
                if done[u] {
                    continue;
                }
                done[u] = true;
                let _ = d;
                for &a in &self.adjacency[u] {
                    let arc = &self.arcs[a];
                    if arc.cap <= 0 || done[arc.to] {
                        continue;
                    }
                    let mut reduced = arc.cost + potential[u] - potential[arc.to];
                    // Reduced costs are non-negative up to rounding.
                    if reduced.is_negative() {
                        reduced = LexCost::ZERO;
                    }
                    let nd = dist[u] + reduced;
                    if nd.tol_cmp(&dist[arc.to]) == Ordering::Less {
                        dist[arc.to] = nd;
                        parent[arc.to] = a;
                        heap.push(Reverse(HeapKey(nd, arc.to)));
                    }
                }
            }
            if parent[sink] == usize::MAX {
                return Err(Error::FlowInfeasible {
                    required: required as usize,
                    achieved: value as usize,
                });
            }

            let mut push = required - value;
            let mut v = sink;
            while v != source {
                let a = parent[v];
                push = push.min(self.arcs[a].cap);
                v = self.arcs[a ^ 1].to;
            }
            let mut v = sink;
            while v != source {
                let a = parent[v];
                self.arcs[a].cap -= push;
                self.arcs[a ^ 1].cap += push;
                let c = self.arcs[a].cost;
                total = total + LexCost(c.0 * push as f64, c.1 * push as f64, c.2 * push as f64);
                v = self.arcs[a ^ 1].to;
            }
            value += push;

            let dt = dist[sink];
            for (p, d) in potential.iter_mut().zip(&dist) {
                let step = if d.0.is_infinite() || d.tol_cmp(&dt) == Ordering::Greater { dt } else { *d };
                *p = *p + step;
            }
        }
        Ok(FlowSolution { value, cost: total })
    }
}

/// The Lagrangian subproblem network for one instance.
///
/// The topology (source, one aggregator per UAV group, UAV vertices, UGV
/// vertices, sink; all capacities one) is built once; arc costs are
/// refreshed from the instance on every solve.
#[derive(Debug, Clone)]
pub struct LagrangianSolver<'a> {
    inst: &'a RendezvousInstance,
    net: MinCostFlow,
    edge_arcs: Vec<ArcId>,
    source: usize,
    sink: usize,
}

impl<'a> LagrangianSolver<'a> {
    pub fn new(inst: &'a RendezvousInstance) -> Self {
        let n_groups = inst.n_groups();
        let n_uav = inst.n_uav_vertices();
        let n_ugv = inst.ugv_vertices().len();
        let source = 0;
        let sink = 1;
        let group_node = |r: usize| 2 + r;
        let uav_node = |i: usize| 2 + n_groups + i;
        let ugv_node = |j: usize| 2 + n_groups + n_uav + j;
        let mut net = MinCostFlow::new(2 + n_groups + n_uav + n_ugv);

        for (r, group) in inst.groups().iter().enumerate() {
            net.add_arc(source, group_node(r), 1, LexCost::ZERO);
            for &i in group {
                net.add_arc(group_node(r), uav_node(i), 1, LexCost::ZERO);
            }
        }
        let edge_arcs = inst
            .edges()
            .iter()
            .map(|e| net.add_arc(uav_node(e.uav), ugv_node(e.ugv), 1, LexCost::ZERO))
            .collect();
        for j in 0..n_ugv {
            net.add_arc(ugv_node(j), sink, 1, LexCost::ZERO);
        }
        Self {
            inst,
            net,
            edge_arcs,
            source,
            sink,
        }
    }

    fn run_with(&mut self, cost: impl Fn(EdgeId) -> LexCost) -> Result<Schedule> {
        for (id, &arc) in self.edge_arcs.iter().enumerate() {
            self.net.set_cost(arc, cost(EdgeId(id)));
        }
        let required = self.inst.n_groups() as i64;
        self.net.run(self.source, self.sink, required).map_err(|e| match e {
            Error::FlowInfeasible { required, achieved } => Error::InvalidInstance(format!(
                "no assignment covers every UAV group (flow {achieved} of {required})"
            )),
            other => other,
        })?;
        Ok(self
            .edge_arcs
            .iter()
            .enumerate()
            .filter(|(_, &arc)| self.net.flow(arc) > 0)
            .map(|(id, _)| EdgeId(id))
            .collect())
    }

    /// Minimizes `c(x) + lambda a(x)` over one-edge-per-group, one-use-per-vertex
    /// schedules. Ties prefer lower weight, then lower edge ids.
    pub fn solve(&mut self, lambda: f64) -> Result<Schedule> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        let inst = self.inst;
        self.run_with(|id| {
            let e = inst.edge(id);
            LexCost(e.lagrangian(lambda), e.weight, id.0 as f64)
        })
    }

    /// The minimum-weight schedule (ties broken by cost); the limit `lambda -> inf`.
    pub fn solve_min_weight(&mut self) -> Result<Schedule> {
        let inst = self.inst;
        self.run_with(|id| {
            let e = inst.edge(id);
            LexCost(e.weight, e.cost, id.0 as f64)
        })
    }
}

/// One-shot convenience wrapper around [`LagrangianSolver::solve`].
pub fn solve_lagrangian(inst: &RendezvousInstance, lambda: f64) -> Result<Schedule> {
    LagrangianSolver::new(inst).solve(lambda)
}

/// The most probable schedule ignoring the budget.
pub fn min_weight_schedule(inst: &RendezvousInstance) -> Result<Schedule> {
    LagrangianSolver::new(inst).solve_min_weight()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Edge, UgvVertex};

    fn one_uav() -> RendezvousInstance {
        RendezvousInstance::new(
            vec![vec![0, 1]],
            vec![UgvVertex::Plain, UgvVertex::Null { group: 0 }],
            vec![Edge::from_weight(0, 0, 10.0, 0.5), Edge::from_weight(1, 1, 0.0, 2.0)],
            1.0,
            1,
        )
        .unwrap()
    }

    #[test]
    fn single_arc_network() {
        let mut net = MinCostFlow::new(2);
        let a = net.add_arc(0, 1, 1, LexCost::scalar(3.5));
        let sol = net.run(0, 1, 1).unwrap();
        assert_eq!(sol.value, 1);
        assert_eq!(sol.cost.0, 3.5);
        assert_eq!(net.flow(a), 1);
    }

    #[test]
    fn demand_above_cut_is_infeasible() {
        let mut net = MinCostFlow::new(3);
        net.add_arc(0, 1, 2, LexCost::scalar(1.0));
        net.add_arc(1, 2, 1, LexCost::scalar(1.0));
        assert!(matches!(
            net.run(0, 2, 2),
            Err(Error::FlowInfeasible { required: 2, achieved: 1 })
        ));
    }

    #[test]
    fn assignment_3x3_matches_enumeration() {
        let costs = [[4.0, 1.0, 3.0], [2.0, 0.5, 5.0], [3.0, 2.0, 2.5]];
        // Exhaustive 3! enumeration.
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let best = perms
            .iter()
            .map(|p| (0..3).map(|i| costs[i][p[i]]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(best, 5.5);

        let mut net = MinCostFlow::new(8);
        for i in 0..3 {
            net.add_arc(0, 1 + i, 1, LexCost::ZERO);
            net.add_arc(4 + i, 7, 1, LexCost::ZERO);
            for j in 0..3 {
                net.add_arc(1 + i, 4 + j, 1, LexCost::scalar(costs[i][j]));
            }
        }
        let sol = net.run(0, 7, 3).unwrap();
        assert!((sol.cost.0 - best).abs() < 1e-12);
    }

    #[test]
    fn negative_costs_use_bellman_ford_potentials() {
        let mut net = MinCostFlow::new(4);
        net.add_arc(0, 1, 1, LexCost::scalar(2.0));
        net.add_arc(0, 2, 1, LexCost::scalar(1.0));
        net.add_arc(1, 3, 1, LexCost::scalar(-5.0));
        net.add_arc(2, 3, 1, LexCost::scalar(0.0));
        let sol = net.run(0, 3, 1).unwrap();
        assert_eq!(sol.cost.0, -3.0);
        let sol = net.run(0, 3, 2).unwrap();
        assert_eq!(sol.cost.0, -2.0);
    }

    #[test]
    fn lambda_zero_picks_null_edge() {
        let inst = one_uav();
        let s = solve_lagrangian(&inst, 0.0).unwrap();
        assert_eq!(s, Schedule::from_edges([EdgeId(1)]));
        assert_eq!(inst.lagrangian(&s, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn large_lambda_picks_detour() {
        let inst = one_uav();
        let s = solve_lagrangian(&inst, 100.0).unwrap();
        assert_eq!(s, Schedule::from_edges([EdgeId(0)]));
        assert_eq!(inst.lagrangian(&s, 100.0).unwrap(), 60.0);
    }

    #[test]
    fn tie_prefers_lower_weight() {
        // At lambda = 20/3 both options have w = 13.33..; the lighter one wins.
        let inst = one_uav();
        let s = solve_lagrangian(&inst, 20.0 / 3.0).unwrap();
        assert_eq!(s, Schedule::from_edges([EdgeId(0)]));
    }

    #[test]
    fn solver_is_reusable_across_lambdas() {
        let inst = one_uav();
        let mut solver = LagrangianSolver::new(&inst);
        assert_eq!(solver.solve(0.0).unwrap(), Schedule::from_edges([EdgeId(1)]));
        assert_eq!(solver.solve(100.0).unwrap(), Schedule::from_edges([EdgeId(0)]));
        assert_eq!(solver.solve(1.0).unwrap(), Schedule::from_edges([EdgeId(1)]));
        assert_eq!(solver.solve_min_weight().unwrap(), Schedule::from_edges([EdgeId(0)]));
    }

    #[test]
    fn rejects_negative_lambda() {
        assert!(solve_lagrangian(&one_uav(), -1.0).is_err());
    }

    #[test]
    fn uncoverable_group_is_an_instance_error() {
        let inst = RendezvousInstance::new(
            vec![vec![0], vec![1]],
            vec![UgvVertex::Plain],
            vec![Edge::from_prob(0, 0, 1.0, 0.9), Edge::from_prob(1, 0, 1.0, 0.9)],
            1.0,
            1,
        )
        .unwrap();
        assert!(matches!(solve_lagrangian(&inst, 0.0), Err(Error::InvalidInstance(_))));
    }
}
