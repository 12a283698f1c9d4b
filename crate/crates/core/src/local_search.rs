//! Reducing two bracketing schedules to adjacent extreme points.
//!
//! Schedules are compared in the merged graph where every UAV group is
//! contracted to one node. Two valid schedules are adjacent iff their
//! symmetric difference forms exactly one connected path or cycle there.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lagrangian::LagrangianCertificate;
use crate::model::{EdgeId, RendezvousInstance, Schedule, BUDGET_SLACK};

/// Which of the two schedules an edge of a difference component came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Origin {
    First,
    Second,
}

/// A path or cycle of the merged graph, edges in walk order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergedGraphComponent {
    pub edges: Vec<(EdgeId, Origin)>,
    pub is_cycle: bool,
}

impl MergedGraphComponent {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.edges.iter().map(|&(e, _)| e)
    }

    pub fn min_edge(&self) -> EdgeId {
        self.edge_ids().min().expect("components are non-empty")
    }
}

/// Merged-graph node ids: groups first, then UGV vertices.
fn endpoints(inst: &RendezvousInstance, e: EdgeId) -> (usize, usize) {
    (inst.group_of_edge(e), inst.n_groups() + inst.edge(e).ugv)
}

/// Splits `m1 ⊕ m2` into connected components of the merged graph, ordered by
/// their lowest edge id.
///
/// Both schedules must be valid assignments, so every merged node has degree
/// at most two in the difference.
pub fn symmetric_difference(
    inst: &RendezvousInstance,
    m1: &Schedule,
    m2: &Schedule,
) -> Result<Vec<MergedGraphComponent>> {
    let diff = m1.symmetric_difference(m2);
    let mut incident: BTreeMap<usize, Vec<EdgeId>> = BTreeMap::new();
    for e in diff.iter() {
        if e.0 >= inst.edges().len() {
            return Err(Error::DanglingEdge(e));
        }
        let (g, u) = endpoints(inst, e);
        incident.entry(g).or_default().push(e);
        incident.entry(u).or_default().push(e);
    }
    if let Some((node, list)) = incident.iter().find(|(_, l)| l.len() > 2) {
        return Err(Error::Certificate(format!(
            "merged node {node} has degree {} in the symmetric difference",
            list.len()
        )));
    }
    let origin = |e: EdgeId| if m1.contains(e) { Origin::First } else { Origin::Second };
    let other_end = |e: EdgeId, from: usize| {
        let (g, u) = endpoints(inst, e);
        if g == from {
            u
        } else {
            g
        }
    };

    let mut seen = std::collections::BTreeSet::new();
    let mut components = Vec::new();
    for start_edge in diff.iter() {
        if seen.contains(&start_edge) {
            continue;
        }
        // Collect the component by flooding from start_edge.
        let mut stack = vec![start_edge];
        let mut members = Vec::new();
        let mut local = std::collections::BTreeSet::new();
        local.insert(start_edge);
        while let Some(e) = stack.pop() {
            members.push(e);
            let (g, u) = endpoints(inst, e);
            for node in [g, u] {
                for &f in &incident[&node] {
                    if local.insert(f) {
                        stack.push(f);
                    }
                }
            }
        }
        seen.extend(local.iter().copied());

        // Walk it: from the lower-id path end, or around the cycle from the lowest edge.
        let mut nodes: BTreeMap<usize, usize> = BTreeMap::new();
        for &e in &members {
            let (g, u) = endpoints(inst, e);
            *nodes.entry(g).or_default() += 1;
            *nodes.entry(u).or_default() += 1;
        }
        let ends: Vec<usize> = nodes.iter().filter(|(_, &d)| d == 1).map(|(&n, _)| n).collect();
        let is_cycle = ends.is_empty();
        let (mut node, mut edge) = if is_cycle {
            let e = *local.iter().next().unwrap();
            (endpoints(inst, e).0, e)
        } else {
            ends.iter()
                .map(|&n| (n, incident[&n][0]))
                .min_by_key(|&(_, e)| e)
                .unwrap()
        };
        let mut ordered = Vec::with_capacity(members.len());
        loop {
            ordered.push((edge, origin(edge)));
            node = other_end(edge, node);
            match incident[&node].iter().find(|&&f| f != edge) {
                Some(&next) if ordered.len() < members.len() => edge = next,
                _ => break,
            }
        }
        debug_assert_eq!(ordered.len(), members.len());
        components.push(MergedGraphComponent { edges: ordered, is_cycle });
    }
    components.sort_by_key(MergedGraphComponent::min_edge);
    Ok(components)
}

/// The adjacency predicate: exactly one component in the symmetric difference.
pub fn are_adjacent(inst: &RendezvousInstance, m1: &Schedule, m2: &Schedule) -> Result<bool> {
    Ok(symmetric_difference(inst, m1, m2)?.len() == 1)
}

/// Swaps one component into `M1`. The result replaces `M1` when it stays within
/// the budget and `M2` otherwise.
pub fn absorb_component(
    inst: &RendezvousInstance,
    cert: &LagrangianCertificate,
    component: &MergedGraphComponent,
) -> Result<LagrangianCertificate> {
    let swapped = cert.feasible.toggled(component.edge_ids());
    let mut next = cert.clone();
    if inst.weight(&swapped)? <= inst.budget() + BUDGET_SLACK {
        next.feasible = swapped;
    } else {
        next.infeasible = swapped;
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalSearchOutcome {
    pub certificate: LagrangianCertificate,
    /// Absorption steps performed; at most `N_a`.
    pub steps: usize,
}

/// Absorbs components (lowest edge id first) until the pair is adjacent.
pub fn local_search(inst: &RendezvousInstance, cert: &LagrangianCertificate) -> Result<LocalSearchOutcome> {
    cert.check_bracket(inst)?;
    for (name, s) in [("M1", &cert.feasible), ("M2", &cert.infeasible)] {
        let report = inst.check(s)?;
        if !report.is_assignment() {
            return Err(Error::Certificate(format!("{name} is not a valid assignment")));
        }
    }
    let mut current = cert.clone();
    let mut steps = 0;
    loop {
        let components = symmetric_difference(inst, &current.feasible, &current.infeasible)?;
        if components.len() <= 1 {
            return Ok(LocalSearchOutcome { certificate: current, steps });
        }
        current = absorb_component(inst, &current, &components[0])?;
        steps += 1;
        if steps > inst.n_groups() {
            return Err(Error::Certificate("local search exceeded N_a steps".into()));
        }
    }
}
