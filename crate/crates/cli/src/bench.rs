//! Runtime and objective comparison of the feasible pipeline against the exact solver.

use std::time::Instant;

use anyhow::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rrrp_core::bicriteria::run_pipeline;
use rrrp_core::generate::{random_instance, RandomInstanceConfig};
use rrrp_core::oracle::exact_solve;
use rrrp_core::Error;
use serde::Serialize;

/// The exact solver is only attempted up to this many UAVs.
pub const ORACLE_MAX_UAVS: usize = 12;

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub size: usize,
    pub trial: usize,
    pub edges: usize,
    pub uavs: usize,
    pub feasible_ms: f64,
    pub feasible_cost: f64,
    pub oracle_ms: Option<f64>,
    pub opt_cost: Option<f64>,
    /// `100 (c - opt) / opt`; empty when the oracle was skipped or `opt = 0`.
    pub gap_pct: Option<f64>,
}

/// Random-instance shape with roughly `size` edges.
pub fn config_for_size(size: usize) -> RandomInstanceConfig {
    let n_uavs = ((size as f64).cbrt() * 1.4).round().clamp(2.0, 60.0) as usize;
    let max_departures = (n_uavs / 5).clamp(2, 10);
    let departures = n_uavs as f64 * (1.0 + max_departures as f64) / 2.0;
    let n_pairs = size.saturating_sub(n_uavs).max(1);
    let n_nodes = ((1.25 * n_pairs as f64 / departures).ceil() as usize).max(2);
    RandomInstanceConfig {
        n_uavs,
        max_departures,
        n_nodes,
        n_ugvs: 3,
        copies: 1,
        n_pairs,
        ..Default::default()
    }
}

pub fn run(sizes: &[usize], trials: usize, seed: u64, node_cap: u64) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for (k, &size) in sizes.iter().enumerate() {
        let cfg = config_for_size(size);
        for trial in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add((k * 1_000_003 + trial) as u64));
            let inst = random_instance(&mut rng, &cfg)?;
            let t = Instant::now();
            let run = run_pipeline(&inst, None)?;
            let feasible_ms = t.elapsed().as_secs_f64() * 1e3;
            let feasible_cost = inst.cost(&run.feasible)?;

            let (mut oracle_ms, mut opt_cost) = (None, None);
            if cfg.n_uavs <= ORACLE_MAX_UAVS {
                let t = Instant::now();
                match exact_solve(&inst, node_cap) {
                    Ok(sol) => {
                        oracle_ms = Some(t.elapsed().as_secs_f64() * 1e3);
                        opt_cost = Some(sol.cost);
                    }
                    Err(Error::OracleTooLarge { .. }) => log::info!("size {size} trial {trial}: oracle over its node cap"),
                    Err(e) => return Err(e.into()),
                }
            }
            let gap_pct = opt_cost.filter(|&o| o > 0.0).map(|o| 100.0 * (feasible_cost - o) / o);
            rows.push(BenchRow {
                size,
                trial,
                edges: inst.edges().len(),
                uavs: cfg.n_uavs,
                feasible_ms,
                feasible_cost,
                oracle_ms,
                opt_cost,
                gap_pct,
            });
        }
    }
    Ok(rows)
}

pub const CSV_HEADER: [&str; 9] = [
    "size",
    "trial",
    "edges",
    "uavs",
    "feasible_ms",
    "feasible_cost",
    "oracle_ms",
    "opt_cost",
    "gap_pct",
];

pub fn to_csv(rows: &[BenchRow]) -> Result<Vec<u8>> {
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.size.to_string(),
            r.trial.to_string(),
            r.edges.to_string(),
            r.uavs.to_string(),
            r.feasible_ms.to_string(),
            r.feasible_cost.to_string(),
            opt(r.oracle_ms),
            opt(r.opt_cost),
            opt(r.gap_pct),
        ])?;
    }
    Ok(w.into_inner()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_map_to_roughly_that_many_edges() {
        for size in [60, 600, 6000, 60_500] {
            let inst = random_instance(&mut ChaCha8Rng::seed_from_u64(1), &config_for_size(size)).unwrap();
            let e = inst.edges().len() as f64;
            assert!(e > 0.8 * size as f64 && e < 1.2 * size as f64, "{size}: {e}");
        }
    }

    #[test]
    fn small_sizes_get_a_non_negative_gap() {
        let rows = run(&[40], 5, 0, 1_000_000).unwrap();
        assert_eq!(rows.len(), 5);
        for r in &rows {
            assert!(r.opt_cost.is_some());
            assert!(r.gap_pct.unwrap_or(0.0) >= -1e-9);
        }
    }

    #[test]
    fn large_sizes_skip_the_oracle() {
        let rows = run(&[3000], 1, 0, 1000).unwrap();
        assert!(rows[0].opt_cost.is_none() && rows[0].gap_pct.is_none());
        assert!(rows[0].feasible_ms >= 0.0);
    }
}
