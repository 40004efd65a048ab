//! The JSON run report written by `pctl learn`. Key order is fixed by
//! declaration order.

use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: ConfigEcho,
    pub solutions: Vec<SolutionEntry>,
    pub most_specific: Vec<SolutionEntry>,
    pub stats: StatsEntry,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub domain: String,
    pub examples: String,
    pub alpha: f64,
    pub k: u32,
    pub max_len: usize,
    pub instantiation: bool,
    pub policy: Option<String>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionEntry {
    pub formula: String,
    pub depth: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct StatsEntry {
    pub candidates: u64,
    pub pruned_subsumption: u64,
    pub pruned_irrelevant: u64,
    pub pruned_semantic: u64,
}

impl From<pctl_core::learner::SearchStats> for StatsEntry {
    fn from(s: pctl_core::learner::SearchStats) -> Self {
        StatsEntry {
            candidates: s.candidates,
            pruned_subsumption: s.pruned_subsumption,
            pruned_irrelevant: s.pruned_irrelevant,
            pruned_semantic: s.pruned_semantic,
        }
    }
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
