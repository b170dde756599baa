//! Steepest descent on the rotation group with multiplicative updates
//! `R <- exp(-eta G) R` and Armijo backtracking.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::objective::{evaluate, loss_floored, Evaluation, Mode};
use super::rotation::rotation_exp;
use super::SsaConfig;
use crate::epochs::EpochStats;
use crate::error::{Error, Result};
use crate::linalg::{orthonormalize_rows, random_orthonormal_rows};

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// Outcome of one restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub degenerate: bool,
}

/// Best projection over all restarts.
#[derive(Debug, Clone)]
pub struct ProjectionFit {
    /// `d x D`, orthonormal rows, whitened coordinates.
    pub projection: DMatrix<f64>,
    /// Full `D x D` rotation whose first `d` rows are `projection`.
    pub rotation: DMatrix<f64>,
    pub objective: f64,
    pub mode: Mode,
    /// Index of the winning restart.
    pub best_restart: usize,
    pub restarts: Vec<RestartSummary>,
}

impl ProjectionFit {
    pub fn converged(&self) -> bool {
        self.restarts[self.best_restart].converged
    }

    pub fn degenerate(&self) -> bool {
        self.restarts[self.best_restart].degenerate
    }
}

/// Initial rotations: identity first, then QR of seeded Gaussian matrices.
pub fn initial_rotations(dim: usize, n_restarts: usize, seed: u64) -> Vec<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_restarts);
    out.push(DMatrix::identity(dim, dim));
    for _ in 1..n_restarts {
        out.push(random_orthonormal_rows(dim, dim, &mut rng));
    }
    out
}

struct Trace {
    rotation: DMatrix<f64>,
    summary: RestartSummary,
}

fn run_restart(stats: &EpochStats, init: DMatrix<f64>, d: usize, mode: Mode, cfg: &SsaConfig) -> Trace {
    let sign = mode.sign();
    let mut rotation = init;
    let mut eval: Evaluation = evaluate(stats, &rotation, d, mode);
    let mut degenerate = eval.degenerate;
    let base_step = cfg.step_init / stats.n_epochs().max(1) as f64;
    let mut step = base_step;
    let mut prev: Option<(super::RotationParam, super::RotationParam)> = None; // (step taken, gradient)
    let mut iterations = 0;
    let mut converged = false;

    if !eval.value.is_finite() {
        return Trace {
            rotation,
            summary: RestartSummary { objective: eval.value, iterations: 0, converged: false, degenerate },
        };
    }

    while iterations < cfg.max_iters {
        let g = &eval.gradient;
        if g.max_abs() < cfg.grad_tol {
            converged = true;
            break;
        }
        // Barzilai-Borwein guess for the initial trial step.
        if let Some((s, g_prev)) = &prev {
            let y: Vec<f64> = g.entries().iter().zip(g_prev.entries()).map(|(a, b)| a - b).collect();
            let sy: f64 = s.entries().iter().zip(&y).map(|(a, b)| a * b).sum();
            let ss = s.norm_squared();
            step = if sy > 0.0 { ss / sy } else { step * 2.0 };
            step = step.clamp(1e-12 * base_step, 1e6 * base_step);
        }
        let f0 = sign * eval.value;
        let gg = g.norm_squared();
        let mut accepted = None;
        let mut eta = step;
        for _ in 0..MAX_HALVINGS {
            let candidate = rotation_exp(&g.scaled(-eta)) * &rotation;
            let (v, _) = loss_floored(stats, &candidate.rows(0, d).into_owned());
            if v.is_finite() && sign * v <= f0 - ARMIJO_C * eta * gg {
                accepted = Some(candidate);
                break;
            }
            eta *= 0.5;
        }
        let Some(candidate) = accepted else { break };
        iterations += 1;
        rotation = orthonormalize_rows(&candidate);
        let next = evaluate(stats, &rotation, d, mode);
        degenerate |= next.degenerate;
        prev = Some((g.scaled(-eta), eval.gradient.clone()));
        step = eta;
        eval = next;
    }
    if !converged && eval.gradient.max_abs() < cfg.grad_tol {
        converged = true;
    }
    Trace {
        rotation,
        summary: RestartSummary { objective: eval.value, iterations, converged, degenerate },
    }
}

/// Optimizes a `d`-row projection from each given initial rotation and keeps
/// the best (ties go to the lowest index).
pub fn fit_projection_from(
    stats: &EpochStats,
    d: usize,
    mode: Mode,
    cfg: &SsaConfig,
    inits: Vec<DMatrix<f64>>,
) -> Result<ProjectionFit> {
    let dim = stats.dim();
    if d == 0 || d >= dim {
        return Err(Error::Config(format!("projection dimension must be in 1..{dim}, got {d}")));
    }
    if inits.is_empty() {
        return Err(Error::Config("need at least one restart".into()));
    }
    let traces: Vec<Trace> = inits
        .into_par_iter()
        .map(|init| run_restart(stats, init, d, mode, cfg))
        .collect();
    let mut best: Option<usize> = None;
    for (i, t) in traces.iter().enumerate() {
        if !t.summary.objective.is_finite() {
            continue;
        }
        match best {
            Some(b) if !mode.better(t.summary.objective, traces[b].summary.objective) => {}
            _ => best = Some(i),
        }
    }
    let best = best.ok_or_else(|| Error::OptimizationFailed("all restarts diverged".into()))?;
    let restarts = traces.iter().map(|t| t.summary.clone()).collect();
    let rotation = traces[best].rotation.clone();
    Ok(ProjectionFit {
        projection: rotation.rows(0, d).into_owned(),
        rotation,
        objective: traces[best].summary.objective,
        mode,
        best_restart: best,
        restarts,
    })
}

/// Rotation whose first rows span the given orthonormal rows.
pub fn rotation_with_leading_rows(rows: &DMatrix<f64>) -> DMatrix<f64> {
    let comp = crate::linalg::orthogonal_complement(rows);
    let mut r = DMatrix::zeros(rows.ncols(), rows.ncols());
    r.rows_mut(0, rows.nrows()).copy_from(rows);
    r.rows_mut(rows.nrows(), comp.nrows()).copy_from(&comp);
    orthonormalize_rows(&r)
}
