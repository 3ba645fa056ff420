//! Finite-difference gradient checker.
//!
//! Compares analytic gradients against central differences coordinate by
//! coordinate. The relative-error denominator is floored at a level scaled to
//! the loss magnitude, since the finite-difference noise floor grows with
//! |f| * eps / h; coordinates whose true gradient sits below that floor carry
//! no usable signal either way.

use super::layout::ParamLayout;

/// Outcome of a gradient check over one scalar function.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub mean_rel_err: f64,
    /// Flat index of the worst coordinate.
    pub worst_index: usize,
    /// Human-readable path of the worst coordinate, when a layout was given.
    pub worst_path: Option<String>,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub coordinates: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_err < tolerance
    }
}

/// Check `analytic` against central differences of `f` with step `h`.
///
/// `f` must be evaluable at the perturbed parameter vectors; it is called
/// 2 * params.len() + 1 times and must be a pure function of its argument.
pub fn grad_check<F>(
    mut f: F,
    analytic: &[f64],
    params: &[f64],
    h: f64,
    layout: Option<&ParamLayout>,
) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(analytic.len(), params.len(), "gradient/parameter length mismatch");
    let f0 = f(params);
    let floor = 1e-5 * (1.0 + f0.abs());

    let mut work = params.to_vec();
    let mut max_rel = 0.0;
    let mut sum_rel = 0.0;
    let mut worst_index = 0;
    let mut worst_analytic = 0.0;
    let mut worst_numeric = 0.0;

    for i in 0..params.len() {
        let orig = work[i];
        work[i] = orig + h;
        let plus = f(&work);
        work[i] = orig - h;
        let minus = f(&work);
        work[i] = orig;

        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic[i];
        let denom = a.abs().max(numeric.abs()).max(floor);
        let rel = (a - numeric).abs() / denom;
        sum_rel += rel;
        if rel > max_rel {
            max_rel = rel;
            worst_index = i;
            worst_analytic = a;
            worst_numeric = numeric;
        }
    }

    GradCheckReport {
        max_rel_err: max_rel,
        mean_rel_err: if params.is_empty() { 0.0 } else { sum_rel / params.len() as f64 },
        worst_index,
        worst_path: layout.map(|l| l.path_at(worst_index)),
        worst_analytic,
        worst_numeric,
        coordinates: params.len(),
    }
}
