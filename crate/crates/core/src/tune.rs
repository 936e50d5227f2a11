//! One-parameter tuning of builder families toward a vanishing edge sum.

use crate::criterion::{check_edge, Tolerances};
use crate::scene::Scene;
use crate::{Error, Result};

/// Halvings of the search step after the initial grid.
pub const REFINEMENTS: usize = 60;

#[derive(Clone, Debug, PartialEq)]
pub struct TuneResult {
    pub parameter: String,
    pub value: f64,
    /// Max per-edge signed-sum residual at `value`.
    pub residual: f64,
    /// Grid values and residuals before refinement.
    pub grid: Vec<(f64, f64)>,
    pub evaluations: usize,
}

/// Max over edges of the minimal signed-sum residual; infinite when the
/// scene cannot be built or has no edges.
pub fn edge_residual(scene: &Scene, tolerances: &Tolerances) -> f64 {
    let Ok(config) = scene.build() else { return f64::INFINITY };
    if config.edges().is_empty() {
        return f64::INFINITY;
    }
    let mut worst: f64 = 0.0;
    for e in 0..config.edges().len() {
        match check_edge(&config, e, tolerances.tol_sum, tolerances.edge_samples) {
            Ok(report) => worst = worst.max(report.residual),
            Err(_) => return f64::INFINITY,
        }
    }
    worst
}

/// Smaller residual wins; equal residuals go to the smaller value.
fn better(a: (f64, f64), b: (f64, f64)) -> bool {
    a.1 < b.1 || (a.1 == b.1 && a.0 < b.0)
}

/// Minimizes [`edge_residual`] over `parameter ∈ [lo, hi]`: a grid of
/// `steps + 1` equally spaced values, then a pattern search around the best
/// grid value whose step starts at one grid cell and halves each round.
pub fn tune(scene: &Scene, parameter: &str, lo: f64, hi: f64, steps: usize, tolerances: &Tolerances) -> Result<TuneResult> {
    scene.parameter(parameter)?;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::InvalidArgument(format!("invalid range [{lo}, {hi}]")));
    }
    if steps == 0 {
        return Err(Error::InvalidArgument("tune needs at least one grid step".into()));
    }
    let mut evaluations = 0;
    let mut eval = |x: f64| -> Result<f64> {
        evaluations += 1;
        Ok(edge_residual(&scene.with_parameter(parameter, x)?, tolerances))
    };
    let cell = (hi - lo) / steps as f64;
    let mut grid = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let x = if k == steps { hi } else { lo + cell * k as f64 };
        grid.push((x, eval(x)?));
    }
    let mut best = grid[0];
    for &g in &grid[1..] {
        if better(g, best) {
            best = g;
        }
    }
    let mut step = cell;
    for _ in 0..REFINEMENTS {
        step /= 2.0;
        let mut next = best;
        for x in [best.0 - step, best.0 + step] {
            if x < lo || x > hi {
                continue;
            }
            let candidate = (x, eval(x)?);
            if better(candidate, next) {
                next = candidate;
            }
        }
        best = next;
    }
    Ok(TuneResult { parameter: parameter.to_string(), value: best.0, residual: best.1, grid, evaluations })
}
