//! Receding-horizon persistent-monitoring simulation.
//!
//! UAVs loop over their task tours while UGVs drive their road loops. At
//! every replan tick the recharging policy may commit a UAV to a detour;
//! the world then draws the actual flight conditions and drains batteries
//! until a UAV runs dry or the time limit is reached.

mod policy;
pub mod scenario;
pub mod study;
mod world;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::geometry::Point;

pub use world::run_trial;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Speeds {
    pub uav: f64,
    pub ugv: f64,
}

impl Default for Speeds {
    fn default() -> Self {
        Self { uav: 9.8, ugv: 4.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub replan_s: f64,
    pub horizon_s: f64,
    pub recharge_s: f64,
    /// Tolerated probability that some UAV depletes within one horizon.
    pub rho: f64,
    pub seed: u64,
    pub trials: usize,
    pub max_time_s: f64,
    pub dt: f64,
    /// UAVs a UGV can recharge at once.
    pub capacity: usize,
    /// End a trial at the first depletion; otherwise the UAV is recovered with
    /// a full battery and the failure is counted.
    pub stop_at_failure: bool,
    /// Node cap for the exact solver policy.
    pub exact_node_cap: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            replan_s: 120.0,
            horizon_s: 2500.0,
            recharge_s: 100.0,
            rho: 0.1,
            seed: 0,
            trials: 20,
            max_time_s: 50_000.0,
            dt: 1.0,
            capacity: 1,
            stop_at_failure: true,
            exact_node_cap: crate::oracle::DEFAULT_NODE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub uav_tours: Vec<Vec<Point>>,
    /// Closed road loops driven by the UGVs.
    pub ugv_roads: Vec<Vec<Point>>,
    #[serde(default)]
    pub speeds: Speeds,
    #[serde(default)]
    pub energy: EnergyModel,
    #[serde(default)]
    pub sim: SimConfig,
    /// Initial arc-length offsets of the UGVs on their roads; zero if omitted.
    #[serde(default)]
    pub ugv_start: Vec<f64>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        let s = &self.sim;
        if !(s.replan_s > 0.0 && s.horizon_s > 0.0 && s.recharge_s > 0.0 && s.dt > 0.0 && s.max_time_s > 0.0) {
            return bad("simulation times must be > 0");
        }
        if !(s.rho > 0.0 && s.rho < 1.0) {
            return bad("rho must lie in (0, 1)");
        }
        if s.capacity == 0 {
            return bad("capacity must be >= 1");
        }
        if !self.ugv_start.is_empty() && self.ugv_start.len() != self.ugv_roads.len() {
            return bad("ugv_start needs one offset per road");
        }
        self.energy.validate()?;
        // Geometry checks are shared with the instance builder.
        self.geometry_at_start().validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn ugv_offset(&self, k: usize) -> f64 {
        self.ugv_start.get(k).copied().unwrap_or(0.0)
    }

    fn geometry_at_start(&self) -> crate::geometry::MissionGeometry {
        crate::geometry::MissionGeometry {
            uav_tours: self.uav_tours.clone(),
            ugv_roads: self.ugv_roads.clone(),
            uav_speed: self.speeds.uav,
            ugv_speed: self.speeds.ugv,
            recharge_duration: self.sim.recharge_s,
            horizon: self.sim.horizon_s,
            uavs: self
                .uav_tours
                .iter()
                .map(|t| crate::geometry::UavState {
                    position: t.first().copied().unwrap_or([0.0, 0.0]),
                    next_waypoint: 1 % t.len().max(1),
                    energy_j: self.energy.capacity_j(),
                })
                .collect(),
            ugv_positions: (0..self.ugv_roads.len()).map(|k| self.ugv_offset(k)).collect(),
            first_slot: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RrrpSolver {
    /// Budget-feasible schedule from the multiplier search and local search.
    Feasible,
    Bicriteria { epsilon: f64 },
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Rrrp { solver: RrrpSolver },
    /// Recharge at the first step the state of charge is below `threshold`.
    Greedy { threshold: f64 },
}

impl Policy {
    pub fn uses_rho(&self) -> bool {
        matches!(self, Policy::Rrrp { .. })
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::Rrrp { solver: RrrpSolver::Feasible } => write!(f, "rrrp"),
            Policy::Rrrp {
                solver: RrrpSolver::Bicriteria { epsilon },
            } => write!(f, "rrrp:bicriteria:{epsilon}"),
            Policy::Rrrp { solver: RrrpSolver::Exact } => write!(f, "rrrp:exact"),
            Policy::Greedy { threshold } => write!(f, "greedy-{}", (threshold * 100.0).round()),
        }
    }
}

impl FromStr for Policy {
    type Err = Error;

    /// Accepts `rrrp`, `rrrp:feasible`, `rrrp:bicriteria[:eps]`, `rrrp:exact`,
    /// `greedy:<fraction>` and `greedy-<percent>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("unknown policy '{s}'"));
        let parts: Vec<&str> = s.split(':').collect();
        let fraction = |t: f64| {
            if t > 0.0 && t < 1.0 {
                Ok(Policy::Greedy { threshold: t })
            } else {
                Err(Error::InvalidParameter(format!("greedy threshold must lie in (0, 1), got {t}")))
            }
        };
        match parts.as_slice() {
            ["rrrp"] | ["rrrp", "feasible"] => Ok(Policy::Rrrp {
                solver: RrrpSolver::Feasible,
            }),
            ["rrrp", "exact"] => Ok(Policy::Rrrp { solver: RrrpSolver::Exact }),
            ["rrrp", "bicriteria"] => Ok(Policy::Rrrp {
                solver: RrrpSolver::Bicriteria { epsilon: 1.0 },
            }),
            ["rrrp", "bicriteria", eps] => Ok(Policy::Rrrp {
                solver: RrrpSolver::Bicriteria {
                    epsilon: eps.parse().map_err(|_| bad())?,
                },
            }),
            ["greedy", t] => fraction(t.parse().map_err(|_| bad())?),
            [single] if single.starts_with("greedy-") => {
                let pct: f64 = single["greedy-".len()..].parse().map_err(|_| bad())?;
                fraction(pct / 100.0)
            }
            _ => Err(bad()),
        }
    }
}

/// One line of the replayable event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub vehicle: String,
    pub event: String,
    pub data: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    /// Time of the first depletion, or the time limit when none occurred.
    pub ttff_s: f64,
    /// Mean over UAVs of `(elapsed - task time) / task time`.
    pub overhead: f64,
    /// Task nodes visited, mean per UAV.
    pub nodes: f64,
    /// Rendezvous per UAV scaled to one planning horizon.
    pub rdv_per_horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub metrics: SimMetrics,
    /// No depletion before the time limit.
    pub censored: bool,
    pub failures: usize,
    pub sim_time: f64,
    pub rendezvous: usize,
    /// Largest number of UAVs charging on one UGV at once.
    pub max_ugv_load: usize,
    pub events: Vec<Event>,
}

/// Writes events as newline-delimited JSON.
pub fn write_event_log(events: &[Event], mut out: impl std::io::Write) -> Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
