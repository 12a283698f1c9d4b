//! Seeded random instances for tests and benchmarks.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::min_weight_schedule;
use crate::model::{Edge, RendezvousInstance, UgvVertex};
use crate::oracle::PartitionInstance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomInstanceConfig {
    pub n_uavs: usize,
    /// Departure vertices per UAV are drawn from `1..=max_departures`.
    pub max_departures: usize,
    /// Physical rendezvous nodes, spread round-robin over `n_ugvs` vehicles.
    pub n_nodes: usize,
    pub n_ugvs: usize,
    /// Copies `d` of each rendezvous node.
    pub copies: usize,
    /// Detour (departure, node) pairs; each becomes `copies` edges. Capped by the number of pairs.
    pub n_pairs: usize,
    pub cost_range: (f64, f64),
    pub prob_range: (f64, f64),
    pub null_prob_range: (f64, f64),
}

impl Default for RandomInstanceConfig {
    fn default() -> Self {
        Self {
            n_uavs: 4,
            max_departures: 2,
            n_nodes: 4,
            n_ugvs: 1,
            copies: 1,
            n_pairs: 12,
            cost_range: (1.0, 100.0),
            prob_range: (0.5, 0.99),
            null_prob_range: (0.2, 0.9),
        }
    }
}

impl RandomInstanceConfig {
    fn validate(&self) -> Result<()> {
        let ok_range = |(lo, hi): (f64, f64)| lo <= hi && lo.is_finite() && hi.is_finite();
        let ok_prob = |(lo, hi): (f64, f64)| ok_range((lo, hi)) && lo > 0.0 && hi <= 1.0;
        if self.n_uavs == 0 || self.max_departures == 0 || self.n_ugvs == 0 || self.copies == 0 {
            return Err(Error::InvalidParameter("counts must be >= 1".into()));
        }
        if !ok_range(self.cost_range) || self.cost_range.0 < 0.0 {
            return Err(Error::InvalidParameter("invalid cost range".into()));
        }
        if !ok_prob(self.prob_range) || !ok_prob(self.null_prob_range) {
            return Err(Error::InvalidParameter("probability ranges must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Draws an instance; every UAV gets a null option and the budget lies
/// strictly between the lightest schedule's weight and the null schedule's.
pub fn random_instance(rng: &mut impl Rng, cfg: &RandomInstanceConfig) -> Result<RendezvousInstance> {
    cfg.validate()?;
    let mut groups = Vec::with_capacity(cfg.n_uavs);
    let mut departures = Vec::new();
    let mut next = 0;
    for _ in 0..cfg.n_uavs {
        let k = rng.random_range(1..=cfg.max_departures);
        let group: Vec<usize> = (next..next + k + 1).collect();
        departures.extend(next..next + k);
        next += k + 1;
        groups.push(group);
    }

    let mut ugv_vertices = Vec::new();
    for node in 0..cfg.n_nodes {
        for copy in 0..cfg.copies {
            ugv_vertices.push(UgvVertex::Slot {
                ugv: node % cfg.n_ugvs,
                node,
                copy,
            });
        }
    }

    let mut edges = Vec::new();
    let all_pairs = departures.len() * cfg.n_nodes;
    let n_pairs = cfg.n_pairs.min(all_pairs);
    let mut picked: Vec<usize> = sample(rng, all_pairs, n_pairs).into_vec();
    picked.sort_unstable();
    for pair in picked {
        let (dep, node) = (departures[pair / cfg.n_nodes], pair % cfg.n_nodes);
        let cost = uniform(rng, cfg.cost_range);
        let prob = uniform(rng, cfg.prob_range);
        for copy in 0..cfg.copies {
            edges.push(Edge::from_prob(dep, node * cfg.copies + copy, cost, prob));
        }
    }
    for (r, group) in groups.iter().enumerate() {
        let null_vertex = ugv_vertices.len();
        ugv_vertices.push(UgvVertex::Null { group: r });
        let prob = uniform(rng, cfg.null_prob_range);
        edges.push(Edge::from_prob(*group.last().unwrap(), null_vertex, 0.0, prob));
    }

    let draft = RendezvousInstance::new(groups, ugv_vertices, edges, 0.0, cfg.copies)?;
    let w_min = draft.weight(&min_weight_schedule(&draft)?)?;
    let w_null = draft.weight(&draft.null_schedule().expect("every group has a null edge"))?;
    let span = (w_null - w_min).max(0.5);
    let budget = w_min + uniform(rng, (0.1, 0.9)) * span;
    draft.with_budget(budget)
}

/// Random even-odd partition values in `1..=max_value`.
pub fn random_partition(rng: &mut impl Rng, n_pairs: usize, max_value: u64) -> Result<PartitionInstance> {
    if max_value == 0 {
        return Err(Error::InvalidParameter("max_value must be >= 1".into()));
    }
    PartitionInstance::new((0..2 * n_pairs).map(|_| rng.random_range(1..=max_value)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn same_seed_same_instance() {
        let cfg = RandomInstanceConfig::default();
        let a = random_instance(&mut ChaCha8Rng::seed_from_u64(3), &cfg).unwrap();
        let b = random_instance(&mut ChaCha8Rng::seed_from_u64(3), &cfg).unwrap();
        assert_eq!(a.edges(), b.edges());
        assert_eq!(a.budget(), b.budget());
    }

    #[test]
    fn budget_admits_lightest_schedule() {
        let cfg = RandomInstanceConfig {
            copies: 2,
            n_pairs: 20,
            ..Default::default()
        };
        for seed in 0..20 {
            let inst = random_instance(&mut ChaCha8Rng::seed_from_u64(seed), &cfg).unwrap();
            let light = min_weight_schedule(&inst).unwrap();
            assert!(inst.is_feasible(&light).unwrap());
            assert!(inst.null_schedule().is_some());
        }
    }

    #[test]
    fn edge_count_matches_pairs_and_copies() {
        let cfg = RandomInstanceConfig {
            n_uavs: 3,
            copies: 2,
            n_pairs: 5,
            ..Default::default()
        };
        let inst = random_instance(&mut ChaCha8Rng::seed_from_u64(1), &cfg).unwrap();
        assert_eq!(inst.edges().len(), 5 * 2 + 3);
    }
}
