//! Polynomial-degree probe for identity-activation self-interaction stacks.
//!
//! With identity activations, every output coordinate of an L-deep stack is a
//! polynomial in the input of degree at most 2^L. The probe restricts the
//! input to a line base + t * direction and finds, per output coordinate, the
//! smallest n whose (n+1)-th order finite difference in t vanishes — for a
//! degree-n polynomial that difference is exactly zero on a uniform grid.

use super::{Model, SiaMode};
use crate::error::{Error, Result};

/// Grid step pinned for the probe.
pub const PROBE_STEP: f64 = 0.1;
/// A coordinate's higher-order difference counts as vanished when it drops
/// below this fraction of the largest magnitude seen at lower orders.
pub const VANISH_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct DegreeProbeReport {
    /// Smallest degree bound found per output coordinate; `max_degree + 1`
    /// means the coordinate never vanished within the probed orders.
    pub degrees: Vec<usize>,
    /// The structural bound 2^L for the probed stack.
    pub bound: usize,
    pub max_degree: usize,
    /// True when every coordinate's degree is within the structural bound.
    pub within_bound: bool,
}

impl DegreeProbeReport {
    pub fn max_observed_degree(&self) -> usize {
        self.degrees.iter().copied().max().unwrap_or(0)
    }
}

/// Forward-difference table rows for one coordinate's samples.
fn difference_orders(values: &[f64]) -> Vec<Vec<f64>> {
    let mut rows = vec![values.to_vec()];
    while rows.last().unwrap().len() > 1 {
        let prev = rows.last().unwrap();
        rows.push(prev.windows(2).map(|w| w[1] - w[0]).collect());
    }
    rows
}

fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |acc: f64, &v| acc.max(v.abs()))
}

/// Probe the stacked-block output (before projection and batch norm) along
/// the line base + t * direction using `max_degree + 2` evenly spaced points.
pub fn polynomial_degree_probe(
    model: &Model,
    direction: &[f64],
    base: &[f64],
    max_degree: usize,
) -> Result<DegreeProbeReport> {
    if model.config.sia_mode != SiaMode::PolynomialKernel {
        return Err(Error::Mode(
            "degree probe requires polynomial_kernel mode (identity activations)".into(),
        ));
    }
    let d = model.config.attr_dim;
    if direction.len() != d || base.len() != d {
        return Err(Error::Dimension(format!(
            "degree probe: direction/base must have length {d}"
        )));
    }
    let n_points = max_degree + 2;
    let mid = (n_points - 1) as f64 / 2.0;

    // samples[j] = stacked-block output at t_j.
    let mut samples = Vec::with_capacity(n_points);
    for j in 0..n_points {
        let t = (j as f64 - mid) * PROBE_STEP;
        let input: Vec<f64> = base
            .iter()
            .zip(direction)
            .map(|(&b, &dir)| b + t * dir)
            .collect();
        samples.push(model.sia_stack(&input)?);
    }
    let width = samples[0].len();

    let bound = 1usize << model.config.depth;
    let mut degrees = Vec::with_capacity(width);
    for coord in 0..width {
        let values: Vec<f64> = samples.iter().map(|s| s[coord]).collect();
        let rows = difference_orders(&values);
        // scale tracks the largest magnitude over orders 0..=n while scanning.
        let mut scale = 0.0_f64;
        let mut degree = max_degree + 1;
        for n in 0..=max_degree {
            scale = scale.max(max_abs(&rows[n]));
            if max_abs(&rows[n + 1]) <= VANISH_REL_TOL * scale {
                degree = n;
                break;
            }
        }
        degrees.push(degree);
    }
    let within_bound = degrees.iter().all(|&deg| deg <= bound);
    Ok(DegreeProbeReport { degrees, bound, max_degree, within_bound })
}
