//! JSON form of a ranking.

use serde::{Deserialize, Serialize};

use crate::metrics::RankingResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedItem {
    pub name: String,
    pub score: f64,
    /// One-based position.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDiagnostics {
    pub iterations: usize,
    pub residual: f64,
    pub rmax_used: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub algorithm: String,
    /// Best first.
    pub items: Vec<RankedItem>,
    pub diagnostics: ReportDiagnostics,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl RankingReport {
    pub fn new(algorithm: &str, names: &[String], result: &RankingResult, seed: Option<u64>) -> Self {
        let items = result
            .order
            .iter()
            .enumerate()
            .map(|(pos, &i)| RankedItem {
                name: names[i].clone(),
                score: result.scores[i],
                rank: pos + 1,
            })
            .collect();
        RankingReport {
            algorithm: algorithm.to_string(),
            items,
            diagnostics: ReportDiagnostics {
                iterations: result.diagnostics.iterations,
                residual: result.diagnostics.residual,
                rmax_used: result.diagnostics.rmax_used,
                seed,
            },
            warnings: Vec::new(),
        }
    }

    /// Item names, best first.
    pub fn ordering(&self) -> Vec<String> {
        let mut items: Vec<&RankedItem> = self.items.iter().collect();
        items.sort_by_key(|it| it.rank);
        items.into_iter().map(|it| it.name.clone()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}
