//! Kernel density estimation on residuals.
//!
//! ```text
//! f_n(e) = 1 / (b1 * #kept) * sum_{i kept} K1((r_i - e) / b1)
//! ```
//!
//! Observations whose leave-one-out fit is undefined are never kept, so they
//! drop out of both the sum and the count.

use std::io::Write;

use rayon::prelude::*;

use crate::data::fmt_full;
use crate::error::{Error, Result};
use crate::kernel::UnivariateKernel;
use crate::smoother::ResidualFit;
use crate::summation::NeumaierSum;

pub const DEFAULT_GRID_POINTS: usize = 512;
/// Largest default grid step as a fraction of `b1`.
pub const MAX_STEP_FRACTION: f64 = 1.0 / 20.0;
pub const MIN_MISE_POINTS: usize = 16;
/// Largest mass of the true density allowed outside the MISE grid.
pub const MISE_TAIL_MASS: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub b1: f64,
    pub n_kept: usize,
    pub kernel: UnivariateKernel,
}

impl DensityCurve {
    /// Trapezoid integral of the curve over its grid.
    pub fn mass(&self) -> f64 {
        trapezoid(&self.grid, &self.values)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# b1={}", fmt_full(self.b1))?;
        writeln!(out, "# n_kept={}", self.n_kept)?;
        writeln!(out, "# kernel={}", self.kernel.name())?;
        writeln!(out, "e,fhat")?;
        for (e, v) in self.grid.iter().zip(&self.values) {
            writeln!(out, "{},{}", fmt_full(*e), fmt_full(*v))?;
        }
        Ok(())
    }
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1]))
        .sum::<NeumaierSum>()
        .value()
}

fn check_b1(b1: f64) -> Result<()> {
    if b1 > 0.0 && b1.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidBandwidth(b1))
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::GridError("evaluation grid is empty".into()));
    }
    if grid.iter().any(|e| !e.is_finite()) {
        return Err(Error::GridError("evaluation grid has non-finite points".into()));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::GridError("evaluation grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Equispaced grid from `lo` to `hi` with `points` points, refined until the
/// step is at most `b1 / 20`.
pub fn covering_grid(lo: f64, hi: f64, b1: f64, points: usize) -> Result<Vec<f64>> {
    check_b1(b1)?;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::GridError(format!("invalid grid range [{lo}, {hi}]")));
    }
    if points < 2 {
        return Err(Error::GridError("a grid needs at least 2 points".into()));
    }
    let needed = ((hi - lo) / (MAX_STEP_FRACTION * b1)).ceil() as usize + 1;
    let points = points.max(needed);
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points)
        .map(|k| if k + 1 == points { hi } else { lo + k as f64 * step })
        .collect())
}

/// Default grid spanning all values `± b1 * R`, `R` the kernel support radius.
pub fn default_grid(values: &[f64], b1: f64, kernel: UnivariateKernel) -> Result<Vec<f64>> {
    check_b1(b1)?;
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        });
    if !lo.is_finite() {
        return Err(Error::GridError("no values to span".into()));
    }
    let pad = b1 * kernel.support_radius();
    covering_grid(lo - pad, hi + pad, b1, DEFAULT_GRID_POINTS)
}

/// Plain KDE of `values` with bandwidth `b1` on `grid`.
pub fn kde(values: &[f64], b1: f64, grid: &[f64], kernel: UnivariateKernel) -> Result<DensityCurve> {
    check_b1(b1)?;
    check_grid(grid)?;
    if values.is_empty() {
        return Err(Error::AllTrimmed);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let reach = b1 * kernel.support_radius();
    let norm = b1 * sorted.len() as f64;
    let values = grid
        .par_iter()
        .map(|&e| {
            let start = sorted.partition_point(|r| *r <= e - reach);
            let end = sorted.partition_point(|r| *r < e + reach);
            let s: NeumaierSum = sorted[start..end]
                .iter()
                .map(|r| kernel.value((r - e) / b1))
                .sum();
            s.value() / norm
        })
        .collect();
    Ok(DensityCurve {
        grid: grid.to_vec(),
        values,
        b1,
        n_kept: sorted.len(),
        kernel,
    })
}

/// Residual density estimate with kernel `kernel`. `grid = None` uses [`default_grid`].
pub fn fhat_with(
    fit: &ResidualFit,
    b1: f64,
    grid: Option<&[f64]>,
    kernel: UnivariateKernel,
) -> Result<DensityCurve> {
    check_b1(b1)?;
    let kept: Vec<f64> = fit.kept_residuals().collect();
    if kept.is_empty() {
        return Err(Error::AllTrimmed);
    }
    match grid {
        Some(g) => kde(&kept, b1, g, kernel),
        None => kde(&kept, b1, &default_grid(&kept, b1, kernel)?, kernel),
    }
}

/// Residual density estimate with the quadweight kernel.
pub fn fhat(fit: &ResidualFit, b1: f64, grid: Option<&[f64]>) -> Result<DensityCurve> {
    fhat_with(fit, b1, grid, UnivariateKernel::Quadweight)
}

/// Same estimator on the true errors, without trimming.
pub fn oracle_kde(errors: &[f64], b1: f64, grid: Option<&[f64]>) -> Result<DensityCurve> {
    let kernel = UnivariateKernel::Quadweight;
    match grid {
        Some(g) => kde(errors, b1, g, kernel),
        None => kde(errors, b1, &default_grid(errors, b1, kernel)?, kernel),
    }
}

/// Trapezoid approximation of `int (f_n - f)^2` over the curve's grid.
pub fn mise<F: Fn(f64) -> f64>(curve: &DensityCurve, f_true: F) -> Result<f64> {
    if curve.grid.len() < MIN_MISE_POINTS {
        return Err(Error::GridError(format!(
            "grid has {} points, at least {MIN_MISE_POINTS} required",
            curve.grid.len()
        )));
    }
    let truth: Vec<f64> = curve.grid.iter().map(|e| f_true(*e)).collect();
    let covered = trapezoid(&curve.grid, &truth);
    if covered < 1.0 - MISE_TAIL_MASS {
        return Err(Error::GridError(format!(
            "grid covers only {covered:.6} of the true density"
        )));
    }
    let sq: Vec<f64> = curve
        .values
        .iter()
        .zip(&truth)
        .map(|(a, b)| (a - b) * (a - b))
        .collect();
    Ok(trapezoid(&curve.grid, &sq))
}
