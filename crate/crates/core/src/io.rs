//! JSON interchange for instances and solutions.
//!
//! Instances store edge probabilities; weights are recomputed on load.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{Edge, RendezvousInstance, UgvVertex};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub u: usize,
    pub g: usize,
    pub cost: f64,
    pub prob: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub uav_groups: Vec<Vec<usize>>,
    /// Omitted vertices default to [`UgvVertex::Plain`], sized by the largest `g`.
    #[serde(default)]
    pub ugv_vertices: Vec<UgvVertex>,
    pub edges: Vec<EdgeRecord>,
    pub budget: f64,
    pub capacity: usize,
}

impl From<&RendezvousInstance> for InstanceFile {
    fn from(inst: &RendezvousInstance) -> Self {
        Self {
            uav_groups: inst.groups().to_vec(),
            ugv_vertices: inst.ugv_vertices().to_vec(),
            edges: inst
                .edges()
                .iter()
                .map(|e| EdgeRecord {
                    u: e.uav,
                    g: e.ugv,
                    cost: e.cost,
                    prob: e.prob,
                })
                .collect(),
            budget: inst.budget(),
            capacity: inst.capacity(),
        }
    }
}

impl InstanceFile {
    pub fn into_instance(self) -> Result<RendezvousInstance> {
        let mut ugv_vertices = self.ugv_vertices;
        let needed = self.edges.iter().map(|e| e.g + 1).max().unwrap_or(0);
        if ugv_vertices.len() < needed {
            ugv_vertices.resize(needed, UgvVertex::Plain);
        }
        let edges = self
            .edges
            .iter()
            .map(|e| Edge::from_prob(e.u, e.g, e.cost, e.prob))
            .collect();
        RendezvousInstance::new(self.uav_groups, ugv_vertices, edges, self.budget, self.capacity)
    }
}

pub fn read_instance(reader: impl Read) -> Result<RendezvousInstance> {
    let file: InstanceFile = serde_json::from_reader(reader)?;
    file.into_instance()
}

pub fn instance_from_str(s: &str) -> Result<RendezvousInstance> {
    let file: InstanceFile = serde_json::from_str(s)?;
    file.into_instance()
}

pub fn write_instance(inst: &RendezvousInstance, writer: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(writer, &InstanceFile::from(inst))?;
    Ok(())
}

pub fn instance_to_string(inst: &RendezvousInstance) -> Result<String> {
    Ok(serde_json::to_string_pretty(&InstanceFile::from(inst))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = r#"{
        "uav_groups": [[0, 1]],
        "ugv_vertices": [{"slot": {"ugv": 0, "node": 0, "copy": 0}}, {"null": {"group": 0}}],
        "edges": [
            {"u": 0, "g": 0, "cost": 10.0, "prob": 0.6065306597126334},
            {"u": 1, "g": 1, "cost": 0.0, "prob": 0.1353352832366127}
        ],
        "budget": 1.0,
        "capacity": 1
    }"#;

    #[test]
    fn parses_and_recomputes_weights() {
        let inst = instance_from_str(TINY).unwrap();
        assert_eq!(inst.n_groups(), 1);
        assert!((inst.edges()[0].weight - 0.5).abs() < 1e-12);
        assert!((inst.edges()[1].weight - 2.0).abs() < 1e-12);
        assert_eq!(inst.null_edge(0), Some(crate::model::EdgeId(1)));
    }

    #[test]
    fn write_then_read_preserves_instance() {
        let inst = instance_from_str(TINY).unwrap();
        let text = instance_to_string(&inst).unwrap();
        let back = instance_from_str(&text).unwrap();
        assert_eq!(back.edges(), inst.edges());
        assert_eq!(back.ugv_vertices(), inst.ugv_vertices());
    }

    #[test]
    fn missing_ugv_vertices_default_to_plain() {
        let text = r#"{"uav_groups": [[0]], "edges": [{"u": 0, "g": 2, "cost": 1, "prob": 0.5}], "budget": 1, "capacity": 1}"#;
        let inst = instance_from_str(text).unwrap();
        assert_eq!(inst.ugv_vertices().len(), 3);
    }

    #[test]
    fn malformed_json_is_an_error() {
        assert!(instance_from_str("{ not json").is_err());
    }
}
