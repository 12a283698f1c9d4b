//! Exact solver for small instances and the even-odd partition reduction.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Edge, EdgeId, RendezvousInstance, Schedule, UgvVertex, BUDGET_SLACK};

/// Search nodes explored before [`exact_solve`] gives up.
pub const DEFAULT_NODE_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSolution {
    pub schedule: Schedule,
    pub cost: f64,
    pub weight: f64,
    pub nodes: u64,
}

struct Search<'a> {
    inst: &'a RendezvousInstance,
    /// Groups in branching order; edges of each sorted by cost.
    order: Vec<Vec<EdgeId>>,
    /// Suffix sums of the per-group minimum weight / cost.
    rest_weight: Vec<f64>,
    rest_cost: Vec<f64>,
    used: Vec<bool>,
    chosen: Vec<EdgeId>,
    best: Option<(f64, Vec<EdgeId>)>,
    nodes: u64,
    cap: u64,
}

impl Search<'_> {
    fn run(&mut self, depth: usize, cost: f64, weight: f64) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.cap {
            return Err(Error::OracleTooLarge { cap: self.cap });
        }
        if weight + self.rest_weight[depth] > self.inst.budget() + BUDGET_SLACK {
            return Ok(());
        }
        if let Some((best, _)) = &self.best {
            if cost + self.rest_cost[depth] >= *best {
                return Ok(());
            }
        }
        if depth == self.order.len() {
            self.best = Some((cost, self.chosen.clone()));
            return Ok(());
        }
        for k in 0..self.order[depth].len() {
            let id = self.order[depth][k];
            let e = self.inst.edge(id);
            if self.used[e.ugv] {
                continue;
            }
            self.used[e.ugv] = true;
            self.chosen.push(id);
            self.run(depth + 1, cost + e.cost, weight + e.weight)?;
            self.chosen.pop();
            self.used[e.ugv] = false;
        }
        Ok(())
    }
}

/// Depth-first branch and bound over one edge per group.
///
/// Groups with the heaviest minimum weight are branched first so the budget
/// prune bites early; edges are tried cheapest first.
pub fn exact_solve(inst: &RendezvousInstance, node_cap: u64) -> Result<OracleSolution> {
    let weight_of = |id: &EdgeId| inst.edge(*id).weight;
    let cost_of = |id: &EdgeId| inst.edge(*id).cost;
    let mut groups: Vec<Vec<EdgeId>> = (0..inst.n_groups())
        .map(|r| {
            let mut edges = inst.edges_of_group(r).to_vec();
            edges.sort_by(|a, b| cost_of(a).total_cmp(&cost_of(b)).then(weight_of(a).total_cmp(&weight_of(b))).then(a.cmp(b)));
            edges
        })
        .collect();
    if let Some(r) = groups.iter().position(Vec::is_empty) {
        return Err(Error::InvalidInstance(format!("UAV group {r} has no edges")));
    }
    let min_w = |g: &Vec<EdgeId>| g.iter().map(weight_of).fold(f64::INFINITY, f64::min);
    groups.sort_by(|a, b| min_w(b).total_cmp(&min_w(a)));

    let n = groups.len();
    let mut rest_weight = vec![0.0; n + 1];
    let mut rest_cost = vec![0.0; n + 1];
    for d in (0..n).rev() {
        rest_weight[d] = rest_weight[d + 1] + min_w(&groups[d]);
        rest_cost[d] = rest_cost[d + 1] + groups[d].iter().map(cost_of).fold(f64::INFINITY, f64::min);
    }
    if rest_weight[0] > inst.budget() + BUDGET_SLACK {
        return Err(Error::Infeasible {
            min_weight: rest_weight[0],
            budget: inst.budget(),
        });
    }

    let mut search = Search {
        inst,
        order: groups,
        rest_weight,
        rest_cost,
        used: vec![false; inst.ugv_vertices().len()],
        chosen: Vec::with_capacity(n),
        best: None,
        nodes: 0,
        cap: node_cap,
    };
    search.run(0, 0.0, 0.0)?;
    let nodes = search.nodes;
    match search.best {
        Some((_, edges)) => {
            let schedule = Schedule::from_edges(edges);
            Ok(OracleSolution {
                cost: inst.cost(&schedule)?,
                weight: inst.weight(&schedule)?,
                schedule,
                nodes,
            })
        }
        // Budget-feasible choices exist but all collide on UGV vertices.
        None => Err(Error::Infeasible {
            min_weight: f64::INFINITY,
            budget: inst.budget(),
        }),
    }
}

/// An even-odd partition instance: pick one element of every consecutive
/// pair so the picked elements sum to half the total.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PartitionInstance {
    pub values: Vec<u64>,
}

impl PartitionInstance {
    pub fn new(values: Vec<u64>) -> Result<Self> {
        if values.is_empty() || values.len() % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "even-odd partition needs an even, non-zero number of values, got {}",
                values.len()
            )));
        }
        Ok(Self { values })
    }

    pub fn n_pairs(&self) -> usize {
        self.values.len() / 2
    }

    pub fn total(&self) -> u64 {
        self.values.iter().sum()
    }
}

/// Builds the scheduling instance whose optimum equals half the total exactly
/// when the partition instance is a yes-instance.
///
/// Pair `j` becomes a single-vertex UAV group with two edges: edge `2j`
/// (cost `z[2j]`, weight `z[2j+1]`) and edge `2j+1` (cost `z[2j+1]`, weight
/// `z[2j]`), each to its own UGV vertex. The budget is half the total. Since
/// cost plus weight always sums to the total, a schedule within budget costs
/// at least half the total, with equality iff the partition exists.
pub fn reduce_evenodd(partition: &PartitionInstance) -> Result<RendezvousInstance> {
    let n = partition.n_pairs();
    let z = &partition.values;
    let mut edges = Vec::with_capacity(2 * n);
    for j in 0..n {
        let (first, second) = (z[2 * j] as f64, z[2 * j + 1] as f64);
        edges.push(Edge::from_weight(j, 2 * j, first, second));
        edges.push(Edge::from_weight(j, 2 * j + 1, second, first));
    }
    RendezvousInstance::new(
        (0..n).map(|j| vec![j]).collect(),
        vec![UgvVertex::Plain; 2 * n],
        edges,
        partition.total() as f64 / 2.0,
        1,
    )
}

/// Whether the reduced instance certifies a partition: its optimum is exactly half the total.
pub fn evenodd_has_partition(partition: &PartitionInstance, node_cap: u64) -> Result<bool> {
    let inst = reduce_evenodd(partition)?;
    let half = partition.total() as f64 / 2.0;
    match exact_solve(&inst, node_cap) {
        Ok(sol) => Ok((sol.cost - half).abs() < 1e-9),
        Err(Error::Infeasible { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_uav_picks_cheapest_feasible() {
        let inst = RendezvousInstance::new(
            vec![vec![0, 1]],
            vec![UgvVertex::Plain, UgvVertex::Null { group: 0 }],
            vec![Edge::from_weight(0, 0, 10.0, 0.5), Edge::from_weight(1, 1, 0.0, 2.0)],
            1.0,
            1,
        )
        .unwrap();
        let sol = exact_solve(&inst, DEFAULT_NODE_CAP).unwrap();
        assert_eq!(sol.schedule, Schedule::from_edges([EdgeId(0)]));
        assert_eq!(sol.cost, 10.0);
    }

    #[test]
    fn respects_ugv_capacity() {
        // Both UAVs want vertex 0; one must take the expensive vertex 1.
        let inst = RendezvousInstance::new(
            vec![vec![0], vec![1]],
            vec![UgvVertex::Plain; 2],
            vec![
                Edge::from_weight(0, 0, 1.0, 0.1),
                Edge::from_weight(0, 1, 5.0, 0.1),
                Edge::from_weight(1, 0, 1.0, 0.1),
                Edge::from_weight(1, 1, 3.0, 0.1),
            ],
            1.0,
            1,
        )
        .unwrap();
        let sol = exact_solve(&inst, DEFAULT_NODE_CAP).unwrap();
        assert_eq!(sol.cost, 4.0);
    }

    #[test]
    fn node_cap_is_enforced() {
        let p = PartitionInstance::new((1..=20).collect()).unwrap();
        let inst = reduce_evenodd(&p).unwrap();
        assert!(matches!(exact_solve(&inst, 5), Err(Error::OracleTooLarge { cap: 5 })));
    }

    #[test]
    fn evenodd_yes_and_no() {
        // Pairs (1,2),(3,4): pick 1+4 = 5 = 10/2.
        let yes = PartitionInstance::new(vec![1, 2, 3, 4]).unwrap();
        assert!(evenodd_has_partition(&yes, DEFAULT_NODE_CAP).unwrap());
        // Pairs (1,2),(1,4): sums 2,5,3,6; half of 8 is 4, unreachable.
        let no = PartitionInstance::new(vec![1, 2, 1, 4]).unwrap();
        assert!(!evenodd_has_partition(&no, DEFAULT_NODE_CAP).unwrap());
    }

    #[test]
    fn reduction_shape() {
        let p = PartitionInstance::new(vec![5, 7, 2, 9]).unwrap();
        let inst = reduce_evenodd(&p).unwrap();
        assert_eq!(inst.n_groups(), 2);
        assert_eq!(inst.edges().len(), 4);
        assert_eq!(inst.budget(), 11.5);
        for e in inst.edges() {
            assert_eq!(e.cost + e.weight, [12.0, 11.0][e.uav]);
        }
    }

    #[test]
    fn odd_length_is_rejected() {
        assert!(PartitionInstance::new(vec![1, 2, 3]).is_err());
    }
}
