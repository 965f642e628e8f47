//! Data-generating processes `Y = m(X) + eps`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Laplace, Normal as NormalDist};

use super::rng::{stream, StreamRole};
use crate::data::Dataset;
use crate::decomposition::{DesignTruth, ErrorSource};
use crate::error::{Error, Result};
use crate::smoother::TrimRegion;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RegressionFn {
    Constant { value: f64 },
    /// `intercept + slope * sum_j x_j`.
    Affine { intercept: f64, slope: f64 },
    /// `sum_j x_j^2`.
    Quadratic,
    /// `sum_j sin(2 pi x_j)`.
    Sinusoid,
}

impl RegressionFn {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Affine { intercept, slope } => intercept + slope * x.iter().sum::<f64>(),
            Self::Quadratic => x.iter().map(|v| v * v).sum(),
            Self::Sinusoid => x
                .iter()
                .map(|v| (2.0 * std::f64::consts::PI * v).sin())
                .sum(),
        }
    }
}

/// Product covariate law on the cube `[lo, hi]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DesignLaw {
    Uniform { lo: f64, hi: f64 },
    /// Independent normal coordinates conditioned on the cube.
    TruncatedNormal { mean: f64, sd: f64, lo: f64, hi: f64 },
}

impl DesignLaw {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Self::Uniform { lo, hi } | Self::TruncatedNormal { lo, hi, .. } => (lo, hi),
        }
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounds();
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::ConfigError(format!("design support [{lo}, {hi}] is empty")));
        }
        if let Self::TruncatedNormal { mean, sd, .. } = *self {
            if !(sd > 0.0) || !mean.is_finite() {
                return Err(Error::ConfigError("truncated normal needs sd > 0".into()));
            }
        }
        Ok(())
    }

    /// Marginal density of one coordinate.
    pub fn pdf1(&self, v: f64) -> f64 {
        let (lo, hi) = self.bounds();
        if v < lo || v > hi {
            return 0.0;
        }
        match *self {
            Self::Uniform { .. } => 1.0 / (hi - lo),
            Self::TruncatedNormal { mean, sd, .. } => {
                let norm = NormalDist::new(mean, sd).expect("validated");
                norm.pdf(v) / (norm.cdf(hi) - norm.cdf(lo))
            }
        }
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| self.pdf1(*v)).product()
    }

    fn draw1(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            Self::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Self::TruncatedNormal { mean, sd, lo, hi } => loop {
                let z: f64 = StandardNormal.sample(rng);
                let v = mean + sd * z;
                if (lo..=hi).contains(&v) {
                    break v;
                }
            },
        }
    }
}

/// Centered error law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ErrorLaw {
    Normal { sd: f64 },
    /// Two-sided exponential with scale `scale`; its density has a kink at 0.
    Laplace { scale: f64 },
    /// `half_width * (2B - 1)` with `B ~ Beta(alpha, alpha)`.
    Beta { alpha: f64, half_width: f64 },
}

impl ErrorLaw {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Normal { sd } => sd > 0.0,
            Self::Laplace { scale } => scale > 0.0,
            Self::Beta { alpha, half_width } => alpha > 0.0 && half_width > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ConfigError(format!("invalid error law {self:?}")))
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Self::Normal { sd } => sd * sd,
            Self::Laplace { scale } => 2.0 * scale * scale,
            Self::Beta { alpha, half_width } => half_width * half_width / (2.0 * alpha + 1.0),
        }
    }

    pub fn pdf(&self, e: f64) -> f64 {
        match *self {
            Self::Normal { sd } => NormalDist::new(0.0, sd).expect("validated").pdf(e),
            Self::Laplace { scale } => Laplace::new(0.0, scale).expect("validated").pdf(e),
            Self::Beta { alpha, half_width } => {
                if e.abs() >= half_width {
                    return 0.0;
                }
                let b = statrs::distribution::Beta::new(alpha, alpha).expect("validated");
                b.pdf(0.5 * (e / half_width + 1.0)) / (2.0 * half_width)
            }
        }
    }

    /// Whether the density is three times continuously differentiable with
    /// bounded derivatives; the Laplace law fails this at 0, and the Beta law
    /// needs `alpha >= 4` at the edges of its support.
    pub fn smooth_density(&self) -> bool {
        match *self {
            Self::Normal { .. } => true,
            Self::Laplace { .. } => false,
            Self::Beta { alpha, .. } => alpha >= 4.0,
        }
    }

    /// Radius containing all but a negligible fraction of the mass.
    pub fn effective_radius(&self) -> f64 {
        match *self {
            Self::Normal { sd } => 8.0 * sd,
            Self::Laplace { scale } => 40.0 * scale,
            Self::Beta { half_width, .. } => half_width,
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        match *self {
            Self::Normal { sd } => {
                let law = Normal::new(0.0, sd).expect("validated");
                (0..n).map(|_| law.sample(rng)).collect()
            }
            Self::Laplace { scale } => {
                let law = Laplace::new(0.0, scale).expect("validated");
                (0..n)
                    .map(|_| {
                        // Open interval keeps the quantile finite.
                        let u: f64 = rng.random_range(f64::EPSILON..1.0);
                        law.inverse_cdf(u)
                    })
                    .collect()
            }
            Self::Beta { alpha, half_width } => {
                let law = Beta::new(alpha, alpha).expect("validated");
                (0..n)
                    .map(|_| half_width * (2.0 * law.sample(rng) - 1.0))
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub dim: usize,
    pub regression: RegressionFn,
    pub design: DesignLaw,
    pub errors: ErrorLaw,
    pub trim: TrimRegion,
}

impl Default for DgpSpec {
    /// `d = 1`, `X ~ U[0, 1]`, `m(x) = x^2`, `eps ~ N(0, 0.5^2)`, trim `[0.1, 0.9]`.
    fn default() -> Self {
        Self {
            dim: 1,
            regression: RegressionFn::Quadratic,
            design: DesignLaw::Uniform { lo: 0.0, hi: 1.0 },
            errors: ErrorLaw::Normal { sd: 0.5 },
            trim: TrimRegion::new(vec![0.1], vec![0.9]).expect("valid box"),
        }
    }
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::ConfigError("dimension must be >= 1".into()));
        }
        if self.trim.dim() != self.dim {
            return Err(Error::ConfigError(format!(
                "trim box has dimension {}, expected {}",
                self.trim.dim(),
                self.dim
            )));
        }
        TrimRegion::new(self.trim.lower().to_vec(), self.trim.upper().to_vec())
            .map_err(|e| Error::ConfigError(e.to_string()))?;
        self.design.validate()?;
        self.errors.validate()?;
        let (lo, hi) = self.support();
        self.trim
            .check_inside(&lo, &hi)
            .map_err(|e| Error::ConfigError(e.to_string()))
    }

    pub fn support(&self) -> (Vec<f64>, Vec<f64>) {
        let (lo, hi) = self.design.bounds();
        (vec![lo; self.dim], vec![hi; self.dim])
    }

    pub fn m(&self, x: &[f64]) -> f64 {
        self.regression.eval(x)
    }

    pub fn g(&self, x: &[f64]) -> f64 {
        self.design.pdf(x)
    }

    /// Sample of size `n` for replication `replication`.
    pub fn sample_replication(&self, n: usize, seed: u64, replication: u64) -> Result<Dataset> {
        self.validate()?;
        if n < 2 {
            return Err(Error::InvalidArgument(format!("n must be >= 2, got {n}")));
        }
        let mut xr = stream(seed, replication, StreamRole::Design);
        let x: Vec<f64> = (0..n * self.dim).map(|_| self.design.draw1(&mut xr)).collect();
        let m: Vec<f64> = x.chunks(self.dim).map(|row| self.m(row)).collect();
        let eps = self.draw_errors(seed, replication, n);
        Dataset::with_truth(self.dim, x, m, eps)
    }

    pub fn draw_errors(&self, seed: u64, replication: u64, n: usize) -> Vec<f64> {
        self.errors
            .draw(&mut stream(seed, replication, StreamRole::Error), n)
    }

    pub fn error_source(&self, seed: u64) -> DgpErrors<'_> {
        DgpErrors { dgp: self, seed }
    }
}

/// Deterministic sample: same `(dgp, n, seed)` gives a bit-identical dataset.
pub fn generate_sample(dgp: &DgpSpec, n: usize, seed: u64) -> Result<Dataset> {
    dgp.sample_replication(n, seed, 0)
}

/// Error redraws for a frozen design, replication `r` using stream `r + 1`
/// so that no redraw repeats the errors of the original sample.
pub struct DgpErrors<'a> {
    dgp: &'a DgpSpec,
    seed: u64,
}

impl ErrorSource for DgpErrors<'_> {
    fn draw(&self, replication: u64, n: usize) -> Vec<f64> {
        self.dgp.draw_errors(self.seed, replication + 1, n)
    }
}

/// Holder for the closures borrowed by [`DesignTruth`].
pub struct TruthFns<'a> {
    dgp: &'a DgpSpec,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl<'a> TruthFns<'a> {
    pub fn new(dgp: &'a DgpSpec) -> Self {
        let (lo, hi) = dgp.support();
        Self { dgp, lo, hi }
    }

    pub fn with<T>(&self, body: impl FnOnce(&DesignTruth<'_>) -> T) -> T {
        let m = |x: &[f64]| self.dgp.m(x);
        let g = |x: &[f64]| self.dgp.g(x);
        body(&DesignTruth {
            m: &m,
            g: &g,
            support: (&self.lo, &self.hi),
        })
    }
}
