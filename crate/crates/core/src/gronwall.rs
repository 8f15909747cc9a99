//! Numerical checker for the three-function Gronwall-Bellman inequality:
//! if `U(t) <= C + ∫ (U·V + W) dτ` then `U(t) <= e^{∫V} (C + ∫W)`.
//!
//! Both sides are evaluated on a shared sample grid with composite trapezoid
//! quadrature. The checker is an oracle for the certifier's envelope
//! derivation in property tests, not a symbolic proof.

use crate::error::{Error, Result};

/// Relative slack threshold folding in the quadrature tolerance.
pub const SLACK_TOL: f64 = 1e-6;

/// Nonnegative samples of a continuous function on a strictly increasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::GridMismatch(format!(
                "grid has {} points but {} values supplied",
                grid.len(),
                values.len()
            )));
        }
        if grid.len() < 2 {
            return Err(Error::InvalidParameter(
                "sampled function needs at least two grid points".into(),
            ));
        }
        if !grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter(
                "grid must be strictly increasing".into(),
            ));
        }
        if !values.iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(Error::InvalidParameter(
                "sampled values must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { grid, values })
    }

    /// Sample a closure on a uniform grid over `[t0, t1]`.
    pub fn sample<F: Fn(f64) -> f64>(t0: f64, t1: f64, points: usize, f: F) -> Result<Self> {
        assert!(points >= 2 && t1 > t0);
        let dt = (t1 - t0) / (points - 1) as f64;
        let grid: Vec<f64> = (0..points).map(|i| t0 + i as f64 * dt).collect();
        let values = grid.iter().map(|&t| f(t)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Outcome of a Gronwall check. `max_slack` is the largest pointwise
/// violation of the conclusion, relative to the bound magnitude; negative
/// slack means the conclusion held with margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GronwallCheck {
    pub hypothesis_holds: bool,
    pub conclusion_holds: bool,
    pub max_slack: f64,
}

fn cumulative_trapezoid(grid: &[f64], values: &[f64]) -> Vec<f64> {
    let mut cum = vec![0.0; grid.len()];
    for i in 1..grid.len() {
        cum[i] = cum[i - 1] + 0.5 * (values[i - 1] + values[i]) * (grid[i] - grid[i - 1]);
    }
    cum
}

/// Check hypothesis and conclusion of the three-function inequality on the
/// common grid of `u`, `v`, `w` with constant `c > 0`.
pub fn gronwall_bound(
    u: &SampledFunction,
    v: &SampledFunction,
    w: &SampledFunction,
    c: f64,
) -> Result<GronwallCheck> {
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Gronwall constant C must be positive, got {c}"
        )));
    }
    if u.grid != v.grid || u.grid != w.grid {
        return Err(Error::GridMismatch(
            "U, V, W must share one sample grid".into(),
        ));
    }

    let grid = &u.grid;
    let uv_plus_w: Vec<f64> = u
        .values
        .iter()
        .zip(&v.values)
        .zip(&w.values)
        .map(|((uu, vv), ww)| uu * vv + ww)
        .collect();
    let cum_rhs = cumulative_trapezoid(grid, &uv_plus_w);
    let cum_v = cumulative_trapezoid(grid, &v.values);
    let cum_w = cumulative_trapezoid(grid, &w.values);

    let mut hyp_slack = f64::NEG_INFINITY;
    let mut concl_slack = f64::NEG_INFINITY;
    for i in 0..grid.len() {
        let rhs = c + cum_rhs[i];
        hyp_slack = hyp_slack.max((u.values[i] - rhs) / rhs.abs().max(1.0));

        let bound = cum_v[i].exp() * (c + cum_w[i]);
        concl_slack = concl_slack.max((u.values[i] - bound) / bound.abs().max(1.0));
    }

    Ok(GronwallCheck {
        hypothesis_holds: hyp_slack <= SLACK_TOL,
        conclusion_holds: concl_slack <= SLACK_TOL,
        max_slack: concl_slack,
    })
}
