use serde::{Deserialize, Serialize};

/// Which detector produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Slcd,
    Cusum,
    KohlmorgenLemm,
}

/// Epoch-boundary change flags with per-boundary scores.
///
/// Entry `i` refers to the boundary between epochs `i` and `i + 1`. Higher
/// scores are more change-like.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePointReport {
    pub detector: DetectorKind,
    /// Trade-off parameter the flags were produced with.
    pub tau: f64,
    pub boundaries: Vec<bool>,
    pub scores: Vec<f64>,
    /// Kernel width actually used (Kohlmorgen/Lemm only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

impl ChangePointReport {
    pub fn n_boundaries(&self) -> usize {
        self.boundaries.len()
    }

    pub fn flagged(&self) -> Vec<usize> {
        self.boundaries.iter().enumerate().filter_map(|(i, &f)| f.then_some(i)).collect()
    }

    /// Two-column CSV: `boundary_index,score`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("boundary_index,score\n");
        for (i, s) in self.scores.iter().enumerate() {
            out.push_str(&format!("{i},{s}\n"));
        }
        out
    }
}
