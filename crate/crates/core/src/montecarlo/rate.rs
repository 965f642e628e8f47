//! Log-log slope fitting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; 0 with fewer than 3 points or an exact fit.
    pub stderr: f64,
}

/// Least-squares fit of `ln y = intercept + slope * ln x`.
pub fn fit_rate(xs: &[f64], ys: &[f64]) -> Result<RateFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionError {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < MIN_POINTS {
        return Err(Error::InvalidArgument(format!(
            "at least {MIN_POINTS} grid points are required, got {}",
            xs.len()
        )));
    }
    let increasing = xs.windows(2).all(|w| w[0] < w[1]);
    let decreasing = xs.windows(2).all(|w| w[0] > w[1]);
    if !(increasing || decreasing) {
        return Err(Error::InvalidArgument("scales must be strictly monotone".into()));
    }
    let log = |v: &[f64]| -> Result<Vec<f64>> {
        v.iter()
            .enumerate()
            .map(|(index, &value)| {
                if value > 0.0 && value.is_finite() {
                    Ok(value.ln())
                } else {
                    Err(Error::LogDomainError { index, value })
                }
            })
            .collect()
    };
    let lx = log(xs)?;
    let ly = log(ys)?;
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = if lx.len() > 2 {
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(RateFit {
        slope,
        intercept,
        stderr,
    })
}
