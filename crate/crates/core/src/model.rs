//! Rendezvous instances and schedules.
//!
//! An instance is a bipartite graph between UAV departure vertices (grouped
//! per UAV) and UGV rendezvous slots. Every edge carries a detour cost in
//! seconds, a success probability and the matching weight `ln(1/p)` in nats.
//! A schedule picks exactly one edge per UAV group; it is feasible when no
//! UGV slot is used twice and the summed weight stays within the budget.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack applied to every budget comparison.
pub const BUDGET_SLACK: f64 = 1e-9;

/// Identifier of an edge; its index in [`RendezvousInstance::edges`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub usize);

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// One detour option between a UAV vertex and a UGV vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub uav: usize,
    pub ugv: usize,
    /// Detour overhead, seconds.
    pub cost: f64,
    /// `ln(1/prob)`, nats.
    pub weight: f64,
    pub prob: f64,
}

impl Edge {
    /// Builds an edge from a success probability; the weight is derived.
    pub fn from_prob(uav: usize, ugv: usize, cost: f64, prob: f64) -> Self {
        Self {
            uav,
            ugv,
            cost,
            weight: -prob.ln(),
            prob,
        }
    }

    /// Builds an edge from a weight; the probability is back-filled as `exp(-weight)`.
    pub fn from_weight(uav: usize, ugv: usize, cost: f64, weight: f64) -> Self {
        Self {
            uav,
            ugv,
            cost,
            weight,
            prob: (-weight).exp(),
        }
    }

    /// Lagrangian edge cost `c + lambda * a`.
    #[inline]
    pub fn lagrangian(&self, lambda: f64) -> f64 {
        self.cost + lambda * self.weight
    }
}

/// What a UGV-side vertex stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UgvVertex {
    /// Copy `copy` of rendezvous node `node` on the tour of UGV `ugv`.
    Slot { ugv: usize, node: usize, copy: usize },
    /// The "no recharge" vertex of the given UAV group.
    Null { group: usize },
    /// A vertex without physical meaning (e.g. produced by reductions).
    Plain,
}

/// The bipartite rendezvous graph together with the budget and the UGV capacity.
///
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct RendezvousInstance {
    groups: Vec<Vec<usize>>,
    ugv_vertices: Vec<UgvVertex>,
    edges: Vec<Edge>,
    budget: f64,
    capacity: usize,
    group_of_uav: Vec<usize>,
    edges_of_group: Vec<Vec<EdgeId>>,
    null_edges: Vec<Option<EdgeId>>,
}

impl RendezvousInstance {
    /// Validates and assembles an instance.
    ///
    /// UAV vertex ids must be exactly `0..n`, each in one group. Every edge
    /// into a [`UgvVertex::Null`] vertex of group `r` must come from group
    /// `r` and cost zero.
    pub fn new(
        groups: Vec<Vec<usize>>,
        ugv_vertices: Vec<UgvVertex>,
        edges: Vec<Edge>,
        budget: f64,
        capacity: usize,
    ) -> Result<Self> {
        let invalid = |msg: String| Err(Error::InvalidInstance(msg));
        if !(budget >= 0.0) || !budget.is_finite() {
            return invalid(format!("budget must be finite and >= 0, got {budget}"));
        }
        if capacity == 0 {
            return invalid("capacity must be >= 1".into());
        }

        let n_uav: usize = groups.iter().map(Vec::len).sum();
        let mut group_of_uav = vec![usize::MAX; n_uav];
        for (r, group) in groups.iter().enumerate() {
            if group.is_empty() {
                return invalid(format!("UAV group {r} is empty"));
            }
            for &v in group {
                if v >= n_uav {
                    return invalid(format!("UAV vertex {v} out of range 0..{n_uav}"));
                }
                if group_of_uav[v] != usize::MAX {
                    return invalid(format!("UAV vertex {v} appears in more than one group"));
                }
                group_of_uav[v] = r;
            }
        }

        let mut edges_of_group = vec![Vec::new(); groups.len()];
        let mut null_edges = vec![None; groups.len()];
        for (id, e) in edges.iter().enumerate() {
            if e.uav >= n_uav {
                return invalid(format!("edge {id} has unknown UAV vertex {}", e.uav));
            }
            if e.ugv >= ugv_vertices.len() {
                return invalid(format!("edge {id} has unknown UGV vertex {}", e.ugv));
            }
            if !(e.cost >= 0.0) || !e.cost.is_finite() {
                return invalid(format!("edge {id} has invalid cost {}", e.cost));
            }
            if !(e.weight >= 0.0) || !e.weight.is_finite() {
                return invalid(format!("edge {id} has invalid weight {}", e.weight));
            }
            let implied = (-e.weight).exp();
            // Very large weights underflow to a zero probability; the weight stays authoritative.
            let underflow = e.prob == 0.0 && implied == 0.0;
            if !(e.prob > 0.0 && e.prob <= 1.0) && !underflow {
                return invalid(format!("edge {id} has probability {} outside (0, 1]", e.prob));
            }
            if (implied - e.prob).abs() > 1e-12 * e.prob.max(implied) {
                return invalid(format!(
                    "edge {id}: weight {} inconsistent with probability {}",
                    e.weight, e.prob
                ));
            }
            let r = group_of_uav[e.uav];
            if let UgvVertex::Null { group } = ugv_vertices[e.ugv] {
                if group != r {
                    return invalid(format!("edge {id} reaches the null vertex of another group"));
                }
                if e.cost != 0.0 {
                    return invalid(format!("null edge {id} must have zero cost"));
                }
                null_edges[r] = Some(EdgeId(id));
            }
            edges_of_group[r].push(EdgeId(id));
        }
        for (v, kind) in ugv_vertices.iter().enumerate() {
            if let UgvVertex::Null { group } = *kind {
                if group >= groups.len() {
                    return invalid(format!("null UGV vertex {v} names unknown group {group}"));
                }
                if null_edges[group].is_none() {
                    return invalid(format!("group {group} has a null vertex but no null edge"));
                }
            }
        }

        Ok(Self {
            groups,
            ugv_vertices,
            edges,
            budget,
            capacity,
            group_of_uav,
            edges_of_group,
            null_edges,
        })
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn n_uav_vertices(&self) -> usize {
        self.group_of_uav.len()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn ugv_vertices(&self) -> &[UgvVertex] {
        &self.ugv_vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id.0]
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> + '_ {
        (0..self.edges.len()).map(EdgeId)
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn group_of_uav(&self, uav: usize) -> usize {
        self.group_of_uav[uav]
    }

    pub fn group_of_edge(&self, id: EdgeId) -> usize {
        self.group_of_uav[self.edges[id.0].uav]
    }

    pub fn edges_of_group(&self, group: usize) -> &[EdgeId] {
        &self.edges_of_group[group]
    }

    pub fn null_edge(&self, group: usize) -> Option<EdgeId> {
        self.null_edges[group]
    }

    pub fn is_null_edge(&self, id: EdgeId) -> bool {
        matches!(self.ugv_vertices[self.edges[id.0].ugv], UgvVertex::Null { .. })
    }

    /// Same graph with a different budget.
    pub fn with_budget(&self, budget: f64) -> Result<Self> {
        if !(budget >= 0.0) || !budget.is_finite() {
            return Err(Error::InvalidParameter(format!("budget {budget}")));
        }
        let mut out = self.clone();
        out.budget = budget;
        Ok(out)
    }

    /// Largest edge cost, 0 for an edgeless instance.
    pub fn max_cost(&self) -> f64 {
        self.edges.iter().map(|e| e.cost).fold(0.0, f64::max)
    }

    /// Smallest strictly positive edge weight, if any.
    pub fn min_positive_weight(&self) -> Option<f64> {
        self.edges
            .iter()
            .map(|e| e.weight)
            .filter(|&a| a > 0.0)
            .min_by(f64::total_cmp)
    }

    /// The schedule picking every group's null edge, when all groups have one.
    pub fn null_schedule(&self) -> Option<Schedule> {
        self.null_edges
            .iter()
            .map(|e| *e)
            .collect::<Option<Vec<_>>>()
            .map(Schedule::from_edges)
    }

    fn check_ids(&self, schedule: &Schedule) -> Result<()> {
        match schedule.iter().find(|e| e.0 >= self.edges.len()) {
            Some(e) => Err(Error::DanglingEdge(e)),
            None => Ok(()),
        }
    }

    /// Total detour cost, seconds.
    pub fn cost(&self, schedule: &Schedule) -> Result<f64> {
        self.check_ids(schedule)?;
        Ok(schedule.iter().map(|e| self.edge(e).cost).sum())
    }

    /// Total weight, nats.
    pub fn weight(&self, schedule: &Schedule) -> Result<f64> {
        self.check_ids(schedule)?;
        Ok(schedule.iter().map(|e| self.edge(e).weight).sum())
    }

    /// Lagrangian objective `c(M) + lambda * a(M)`.
    pub fn lagrangian(&self, schedule: &Schedule, lambda: f64) -> Result<f64> {
        Ok(self.cost(schedule)? + lambda * self.weight(schedule)?)
    }

    /// Load (number of chosen edges) on every UGV vertex that is used at all.
    pub fn ugv_loads(&self, schedule: &Schedule) -> BTreeMap<usize, usize> {
        let mut loads = BTreeMap::new();
        for e in schedule.iter().filter(|e| e.0 < self.edges.len()) {
            *loads.entry(self.edge(e).ugv).or_insert(0) += 1;
        }
        loads
    }

    /// Checks one-edge-per-group, per-vertex multiplicity and the budget.
    pub fn check(&self, schedule: &Schedule) -> Result<FeasibilityReport> {
        self.check_ids(schedule)?;
        let mut per_group = vec![0usize; self.n_groups()];
        for e in schedule.iter() {
            per_group[self.group_of_edge(e)] += 1;
        }
        let group_violations = per_group
            .iter()
            .enumerate()
            .filter(|(_, &n)| n != 1)
            .map(|(r, &n)| (r, n))
            .collect();
        let overloaded_vertices = self
            .ugv_loads(schedule)
            .into_iter()
            .filter(|&(_, n)| n > 1)
            .collect();
        let weight = self.weight(schedule)?;
        Ok(FeasibilityReport {
            group_violations,
            overloaded_vertices,
            cost: self.cost(schedule)?,
            weight,
            budget: self.budget,
        })
    }

    /// True iff the schedule satisfies every constraint of the problem.
    pub fn is_feasible(&self, schedule: &Schedule) -> Result<bool> {
        Ok(self.check(schedule)?.is_feasible())
    }

    /// Drops the given groups and UGV vertices plus every edge costing more than
    /// `max_cost`, and lowers the budget by `budget_used`.
    pub(crate) fn residual(
        &self,
        removed_groups: &BTreeSet<usize>,
        removed_ugv: &BTreeSet<usize>,
        max_cost: f64,
        budget: f64,
    ) -> Result<SubInstance> {
        let mut uav_map = vec![usize::MAX; self.n_uav_vertices()];
        let mut groups = Vec::new();
        let mut group_map = vec![usize::MAX; self.n_groups()];
        let mut next_uav = 0;
        for (r, group) in self.groups.iter().enumerate() {
            if removed_groups.contains(&r) {
                continue;
            }
            group_map[r] = groups.len();
            let mut g = Vec::with_capacity(group.len());
            for &v in group {
                uav_map[v] = next_uav;
                g.push(next_uav);
                next_uav += 1;
            }
            groups.push(g);
        }
        let ugv_vertices = self
            .ugv_vertices
            .iter()
            .map(|v| match *v {
                UgvVertex::Null { group } if group_map[group] != usize::MAX => UgvVertex::Null {
                    group: group_map[group],
                },
                UgvVertex::Null { .. } => UgvVertex::Plain,
                other => other,
            })
            .collect::<Vec<_>>();
        let mut edges = Vec::new();
        let mut edge_map = Vec::new();
        for (id, e) in self.edges.iter().enumerate() {
            let r = self.group_of_uav[e.uav];
            if removed_groups.contains(&r) || removed_ugv.contains(&e.ugv) || e.cost > max_cost {
                continue;
            }
            edges.push(Edge { uav: uav_map[e.uav], ..*e });
            edge_map.push(EdgeId(id));
        }
        // A null vertex whose null edge was pruned loses its special meaning.
        let mut has_null_edge = vec![false; groups.len()];
        for e in &edges {
            if let UgvVertex::Null { group } = ugv_vertices[e.ugv] {
                has_null_edge[group] = true;
            }
        }
        let ugv_vertices = ugv_vertices
            .into_iter()
            .map(|v| match v {
                UgvVertex::Null { group } if !has_null_edge[group] => UgvVertex::Plain,
                other => other,
            })
            .collect();
        let instance = RendezvousInstance::new(groups, ugv_vertices, edges, budget.max(0.0), self.capacity)?;
        Ok(SubInstance { instance, edge_map })
    }
}

/// A derived instance plus the map from its edge ids to the parent's.
#[derive(Debug, Clone)]
pub(crate) struct SubInstance {
    pub instance: RendezvousInstance,
    pub edge_map: Vec<EdgeId>,
}

impl SubInstance {
    pub fn lift(&self, schedule: &Schedule) -> Schedule {
        Schedule::from_edges(schedule.iter().map(|e| self.edge_map[e.0]))
    }
}

/// A set of chosen edges.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule {
    edges: BTreeSet<EdgeId>,
}

impl Schedule {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_edges(edges: impl IntoIterator<Item = EdgeId>) -> Self {
        Self {
            edges: edges.into_iter().collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.edges.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, id: EdgeId) -> bool {
        self.edges.contains(&id)
    }

    pub fn insert(&mut self, id: EdgeId) -> bool {
        self.edges.insert(id)
    }

    pub fn remove(&mut self, id: EdgeId) -> bool {
        self.edges.remove(&id)
    }

    /// `self ⊕ other`.
    pub fn symmetric_difference(&self, other: &Schedule) -> Schedule {
        Schedule {
            edges: self.edges.symmetric_difference(&other.edges).copied().collect(),
        }
    }

    /// Flips membership of every edge in `edges`.
    pub fn toggled(&self, edges: impl IntoIterator<Item = EdgeId>) -> Schedule {
        let mut out = self.clone();
        for e in edges {
            if !out.edges.remove(&e) {
                out.edges.insert(e);
            }
        }
        out
    }

    pub fn intersection_len(&self, other: &Schedule) -> usize {
        self.edges.intersection(&other.edges).count()
    }

    pub fn union(&self, other: &Schedule) -> Schedule {
        Schedule {
            edges: self.edges.union(&other.edges).copied().collect(),
        }
    }
}

impl FromIterator<EdgeId> for Schedule {
    fn from_iter<T: IntoIterator<Item = EdgeId>>(iter: T) -> Self {
        Self::from_edges(iter)
    }
}

/// Outcome of [`RendezvousInstance::check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    /// `(group, chosen edge count)` for groups without exactly one edge.
    pub group_violations: Vec<(usize, usize)>,
    /// `(ugv vertex, load)` for vertices used more than once.
    pub overloaded_vertices: Vec<(usize, usize)>,
    pub cost: f64,
    pub weight: f64,
    pub budget: f64,
}

impl FeasibilityReport {
    pub fn within_budget(&self) -> bool {
        self.weight <= self.budget + BUDGET_SLACK
    }

    /// One edge per group and no vertex used twice; the budget is not considered.
    pub fn is_assignment(&self) -> bool {
        self.group_violations.is_empty() && self.overloaded_vertices.is_empty()
    }

    pub fn is_feasible(&self) -> bool {
        self.is_assignment() && self.within_budget()
    }

    /// Number of excess uses summed over overloaded vertices.
    pub fn violation_count(&self) -> usize {
        self.overloaded_vertices.iter().map(|&(_, n)| n - 1).sum()
    }

    pub fn max_load(&self) -> usize {
        self.overloaded_vertices.iter().map(|&(_, n)| n).max().unwrap_or(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn one_uav() -> RendezvousInstance {
        // Group 0 = {detour vertex 0, null vertex 1}.
        RendezvousInstance::new(
            vec![vec![0, 1]],
            vec![
                UgvVertex::Slot { ugv: 0, node: 0, copy: 0 },
                UgvVertex::Null { group: 0 },
            ],
            vec![
                Edge::from_weight(0, 0, 10.0, 0.5),
                Edge::from_weight(1, 1, 0.0, 2.0),
            ],
            1.0,
            1,
        )
        .unwrap()
    }

    #[test]
    fn cost_and_weight_are_additive() {
        let inst = RendezvousInstance::new(
            vec![vec![0], vec![1]],
            vec![UgvVertex::Plain, UgvVertex::Plain],
            vec![Edge::from_weight(0, 0, 10.0, 0.5), Edge::from_weight(1, 1, 7.0, 0.3)],
            1.0,
            1,
        )
        .unwrap();
        let single = Schedule::from_edges([EdgeId(0)]);
        assert_eq!(inst.cost(&single).unwrap(), 10.0);
        assert_eq!(inst.weight(&single).unwrap(), 0.5);
        let both = Schedule::from_edges([EdgeId(0), EdgeId(1)]);
        assert_eq!(inst.cost(&both).unwrap(), 17.0);
        assert!((inst.weight(&both).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn null_schedule_costs_nothing() {
        let inst = one_uav();
        let null = inst.null_schedule().unwrap();
        assert_eq!(inst.cost(&null).unwrap(), 0.0);
        let report = inst.check(&null).unwrap();
        assert!(report.is_assignment());
        assert!(!report.within_budget());
    }

    #[test]
    fn dangling_edge_is_reported() {
        let inst = one_uav();
        let bad = Schedule::from_edges([EdgeId(7)]);
        assert!(matches!(inst.cost(&bad), Err(Error::DanglingEdge(EdgeId(7)))));
    }

    #[test]
    fn weight_matches_product_of_probabilities() {
        let inst = one_uav();
        let s = Schedule::from_edges([EdgeId(0)]);
        let prod: f64 = s.iter().map(|e| inst.edge(e).prob).product();
        let w = inst.weight(&s).unwrap();
        assert!(((-w).exp() - prod).abs() <= 1e-9 * prod);
    }

    #[test]
    fn rejects_bad_instances() {
        let groups = || vec![vec![0]];
        let verts = || vec![UgvVertex::Plain];
        assert!(RendezvousInstance::new(groups(), verts(), vec![], -1.0, 1).is_err());
        assert!(RendezvousInstance::new(groups(), verts(), vec![], 1.0, 0).is_err());
        let zero_prob = Edge { uav: 0, ugv: 0, cost: 1.0, weight: f64::INFINITY, prob: 0.0 };
        assert!(RendezvousInstance::new(groups(), verts(), vec![zero_prob], 1.0, 1).is_err());
        let inconsistent = Edge { uav: 0, ugv: 0, cost: 1.0, weight: 0.1, prob: 0.5 };
        assert!(RendezvousInstance::new(groups(), verts(), vec![inconsistent], 1.0, 1).is_err());
        // Overlapping groups.
        assert!(RendezvousInstance::new(vec![vec![0], vec![0]], verts(), vec![], 1.0, 1).is_err());
        // Null edge with positive cost.
        let null_cost = Edge::from_prob(0, 0, 3.0, 0.9);
        assert!(RendezvousInstance::new(groups(), vec![UgvVertex::Null { group: 0 }], vec![null_cost], 1.0, 1).is_err());
    }

    #[test]
    fn check_flags_double_use_and_missing_groups() {
        let inst = RendezvousInstance::new(
            vec![vec![0], vec![1]],
            vec![UgvVertex::Plain],
            vec![Edge::from_prob(0, 0, 1.0, 0.9), Edge::from_prob(1, 0, 1.0, 0.9)],
            10.0,
            1,
        )
        .unwrap();
        let both = Schedule::from_edges([EdgeId(0), EdgeId(1)]);
        let r = inst.check(&both).unwrap();
        assert_eq!(r.overloaded_vertices, vec![(0, 2)]);
        assert_eq!(r.violation_count(), 1);
        assert!(!r.is_feasible());
        let one = Schedule::from_edges([EdgeId(0)]);
        assert_eq!(inst.check(&one).unwrap().group_violations, vec![(1, 0)]);
    }

    #[test]
    fn budget_slack_is_absolute() {
        let inst = one_uav().with_budget(0.5 - 5e-10).unwrap();
        assert!(inst.is_feasible(&Schedule::from_edges([EdgeId(0)])).unwrap());
        let inst = one_uav().with_budget(0.5 - 5e-9).unwrap();
        assert!(!inst.is_feasible(&Schedule::from_edges([EdgeId(0)])).unwrap());
    }
}
