//! Batches of trials over policies and risk levels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{run_trial, Event, Policy, Scenario, SimMetrics};
use crate::error::Result;

/// One trial's metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub policy: String,
    /// `None` for policies that ignore the risk level.
    pub rho: Option<f64>,
    pub seed: u64,
    pub metrics: SimMetrics,
    pub failures: usize,
    /// Empty unless the study records events.
    #[serde(skip)]
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub policy: String,
    pub rho: Option<f64>,
    pub trials: usize,
    pub mean: SimMetrics,
    /// Two-sided 90% percentile-bootstrap interval of the mean failure time.
    pub ttff_ci: (f64, f64),
}

pub struct StudySpec<'a> {
    pub policies: &'a [Policy],
    pub rhos: &'a [f64],
    pub trials: usize,
    pub base_seed: u64,
    pub record_events: bool,
}

/// Runs every (policy, rho) cell on seeds `base_seed .. base_seed + trials`.
/// Cells share seeds, so comparisons between them are paired.
pub fn run_study(scn: &Scenario, spec: &StudySpec) -> Result<Vec<StudyRow>> {
    let mut cells = Vec::new();
    for &policy in spec.policies {
        if policy.uses_rho() {
            cells.extend(spec.rhos.iter().map(|&r| (policy, Some(r))));
        } else {
            cells.push((policy, None));
        }
    }
    let jobs: Vec<(Policy, Option<f64>, u64)> = cells
        .iter()
        .flat_map(|&(p, r)| (0..spec.trials as u64).map(move |i| (p, r, spec.base_seed + i)))
        .collect();
    jobs.par_iter()
        .map(|&(policy, rho, seed)| {
            let t = run_trial(scn, policy, rho.unwrap_or(scn.sim.rho), seed, spec.record_events)?;
            Ok(StudyRow {
                policy: policy.to_string(),
                rho,
                seed,
                metrics: t.metrics,
                failures: t.failures,
                events: t.events,
            })
        })
        .collect()
}

pub fn select<'a>(rows: &'a [StudyRow], policy: &str, rho: Option<f64>) -> Vec<&'a StudyRow> {
    let mut v: Vec<&StudyRow> = rows.iter().filter(|r| r.policy == policy && r.rho == rho).collect();
    v.sort_by_key(|r| r.seed);
    v
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let i = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[i]
}

fn bootstrap_means(xs: &[f64], resamples: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = xs.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| xs[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    means
}

/// Per-cell means in first-appearance order.
pub fn summarize(rows: &[StudyRow]) -> Vec<Summary> {
    let mut keys: Vec<(String, Option<f64>)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|(p, rho)| *p == r.policy && *rho == r.rho) {
            keys.push((r.policy.clone(), r.rho));
        }
    }
    keys.into_iter()
        .map(|(policy, rho)| {
            let cell = select(rows, &policy, rho);
            let col = |f: fn(&SimMetrics) -> f64| cell.iter().map(|r| f(&r.metrics)).collect::<Vec<_>>();
            let ttff = col(|m| m.ttff_s);
            let boot = bootstrap_means(&ttff, 2000, 0);
            Summary {
                trials: cell.len(),
                mean: SimMetrics {
                    ttff_s: mean(&ttff),
                    overhead: mean(&col(|m| m.overhead)),
                    nodes: mean(&col(|m| m.nodes)),
                    rdv_per_horizon: mean(&col(|m| m.rdv_per_horizon)),
                },
                ttff_ci: (quantile(&boot, 0.05), quantile(&boot, 0.95)),
                policy,
                rho,
            }
        })
        .collect()
}

/// Lower `alpha` quantile of the bootstrap distribution of `mean(a - b)`
/// over paired samples. A non-negative value supports `mean(a) >= mean(b)`
/// at one-sided confidence `1 - alpha`.
pub fn paired_bootstrap_lower(a: &[f64], b: &[f64], alpha: f64, resamples: usize, seed: u64) -> f64 {
    assert_eq!(a.len(), b.len(), "paired samples");
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    quantile(&bootstrap_means(&diffs, resamples, seed), alpha)
}

pub const CSV_HEADER: [&str; 7] = ["policy", "rho", "seed", "ttff_s", "overhead", "nodes", "rdv_per_horizon"];

pub fn write_csv(rows: &[StudyRow], out: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        let m = &r.metrics;
        w.write_record([
            r.policy.clone(),
            r.rho.map(|x| x.to_string()).unwrap_or_default(),
            r.seed.to_string(),
            m.ttff_s.to_string(),
            m.overhead.to_string(),
            m.nodes.to_string(),
            m.rdv_per_horizon.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
