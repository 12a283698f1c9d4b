//! Parametric default scenario: task loops over a block grid of roads.

use serde::{Deserialize, Serialize};

use super::{Scenario, SimConfig, Speeds};
use crate::energy::EnergyModel;
use crate::geometry::Point;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridParams {
    /// Side of one road block, m.
    pub block: f64,
    /// Blocks per side of the square road grid.
    pub blocks: usize,
    /// How far the task loops reach out beyond the grid, m.
    pub reach: f64,
    /// Spacing of task nodes along a loop, m.
    pub task_spacing: f64,
    /// Task loops, one per UAV, placed on the west, east, north and south sides in turn.
    pub uavs: usize,
    /// UGVs sharing the perimeter road, evenly spaced.
    pub ugvs: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            block: 1000.0,
            blocks: 3,
            reach: 10_000.0,
            task_spacing: 2000.0,
            uavs: 4,
            ugvs: 1,
        }
    }
}

fn densify(corners: &[Point], spacing: f64) -> Vec<Point> {
    let mut out = Vec::new();
    for i in 0..corners.len() {
        let (a, b) = (corners[i], corners[(i + 1) % corners.len()]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let n = (len / spacing).ceil().max(1.0) as usize;
        for s in 0..n {
            let t = s as f64 / n as f64;
            out.push([a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t]);
        }
    }
    out
}

/// Task loops run from one block inside a square road grid far out past one
/// of its sides and back; the UGVs circle the grid perimeter.
pub fn grid_scenario(p: &GridParams) -> Scenario {
    let side = p.block * p.blocks as f64;
    let (b, r) = (p.block, p.reach);
    let (lo, hi) = (side / 2.0 - b / 2.0, side / 2.0 + b / 2.0);
    let arms: [[Point; 4]; 4] = [
        [[b, lo], [-r, lo], [-r, hi], [b, hi]],
        [[side - b, hi], [side + r, hi], [side + r, lo], [side - b, lo]],
        [[lo, side - b], [lo, side + r], [hi, side + r], [hi, side - b]],
        [[hi, b], [hi, -r], [lo, -r], [lo, b]],
    ];
    let perimeter = vec![[0.0, 0.0], [side, 0.0], [side, side], [0.0, side]];
    let n_g = p.ugvs.max(1);
    Scenario {
        uav_tours: (0..p.uavs).map(|i| densify(&arms[i % 4], p.task_spacing)).collect(),
        ugv_roads: vec![perimeter; n_g],
        speeds: Speeds::default(),
        energy: EnergyModel::default(),
        sim: SimConfig::default(),
        ugv_start: (0..n_g).map(|k| 4.0 * side * k as f64 / n_g as f64).collect(),
    }
}

pub fn default_scenario() -> Scenario {
    grid_scenario(&GridParams::default())
}
