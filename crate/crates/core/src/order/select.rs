//! Choosing the number of stationary sources.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lrt::{likelihood_ratio_statistic, StationarityTest};
use crate::epochs::{transform_stats, EpochStats};
use crate::error::{Error, Result};
use crate::ssa::{fit_s_projection, SsaConfig};

/// Test outcome for one candidate `d_s'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub d_s: usize,
    /// `None` when fitting or testing failed; such candidates count as rejecting.
    pub test: Option<StationarityTest>,
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderSelection {
    pub alpha: f64,
    pub per_d: Vec<Candidate>,
    /// Largest non-rejecting `d_s'`, or 0 when every candidate rejects.
    pub chosen_d_s: usize,
}

impl OrderSelection {
    /// Per-candidate table: `d_s,lambda,dof,p_value,decision`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("d_s,lambda,dof,p_value,decision\n");
        for c in &self.per_d {
            let decision = if c.rejected { "reject" } else { "accept" };
            match &c.test {
                Some(t) => out.push_str(&format!("{},{},{},{},{decision}\n", c.d_s, t.lambda, t.dof, t.p_value)),
                None => out.push_str(&format!("{},,,,{decision}\n", c.d_s)),
            }
        }
        out
    }
}

/// Test of the stationary sources estimated with `d_s` rows.
pub fn test_candidate(white: &EpochStats, config: &SsaConfig, d_s: usize) -> Result<StationarityTest> {
    let cfg = SsaConfig { d_s, ..config.clone() };
    let fit = fit_s_projection(white, &cfg)?;
    likelihood_ratio_statistic(&transform_stats(white, &fit.projection)?)
}

/// For every `d_s' in 1..D`, fits the s-projection on whitened stats and tests
/// the estimated stationary sources; chooses the largest `d_s'` whose test does
/// not reject at `alpha`.
pub fn select_order(white: &EpochStats, config: &SsaConfig, alpha: f64) -> Result<OrderSelection> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let dim = white.dim();
    if dim < 2 {
        return Err(Error::InvalidInput("order selection needs at least 2 channels".into()));
    }
    let per_d: Vec<Candidate> = (1..dim)
        .into_par_iter()
        .map(|d_s| {
            let test = test_candidate(white, config, d_s).ok();
            let rejected = test.map_or(true, |t| t.rejects(alpha));
            Candidate { d_s, test, rejected }
        })
        .collect();
    let chosen_d_s = per_d.iter().filter(|c| !c.rejected).map(|c| c.d_s).max().unwrap_or(0);
    Ok(OrderSelection { alpha, per_d, chosen_d_s })
}
