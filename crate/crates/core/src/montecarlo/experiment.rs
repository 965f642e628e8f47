//! Rate experiments.
//!
//! Each target maps one grid value to a positive statistic. Slope checks fit
//! `ln statistic` against `ln scale` and compare with the claimed exponent.
//! Band checks divide the statistic by its claimed envelope and require the
//! ratio to stay within a fixed max/min band, which is what an `O_P` bound
//! promises when no single term dominates.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::dgp::DgpSpec;
use super::rate::fit_rate;
use crate::bandwidth::{validate_a8, validate_a9, PowerSchedule};
use crate::data::{fmt_full, fmt_human};
use crate::decomposition::{
    conditional_moment, conditional_variance_of_sum, decompose, FrozenDesign, SumStatistic,
};
use crate::error::{Error, Result};
use crate::kernel::{ProductKernel, UnivariateKernel};
use crate::quadrature::QuadratureSpec;
use crate::smoother::{g_hat_n, window_integral, NwSmoother, TrimRegion};

/// Largest fraction of failed replications before an experiment aborts.
pub const MAX_DEGENERATE_FRACTION: f64 = 0.1;
/// Terms of an envelope count as dominated below this ratio.
pub const DOMINANCE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    /// Median of `sup_i |beta_i|`.
    SmoothingBias,
    /// `sup_x |expected local bias|`, by quadrature.
    ExpectedBias,
    /// `sup_x |E g_n(x) - g(x)|`, by quadrature.
    DesignBias,
    /// Median of `sup_x |g_n(x) - E g_n(x)|`.
    DesignNoise,
    /// `sup_i` conditional fourth moment of the fitting error.
    FitMoment4,
    /// `sup_i` conditional sixth moment of the fitting error.
    FitMoment6,
    /// Conditional variance of the noise sum.
    NoiseSumVariance,
    /// Conditional variance of the second-order Taylor sum.
    TaylorSumVariance,
    /// Conditional variance of the remainder sum.
    RemainderSumVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    B0,
    B1,
    N,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Slope,
    Band,
}

impl Target {
    /// Config spelling of the target, e.g. `smoothing-bias`.
    pub fn name(&self) -> String {
        match serde_json::to_value(self) {
            Ok(serde_json::Value::String(s)) => s,
            _ => format!("{self:?}"),
        }
    }

    pub fn default_scale(&self) -> Scale {
        match self {
            Self::TaylorSumVariance | Self::RemainderSumVariance => Scale::B1,
            Self::DesignNoise => Scale::N,
            _ => Scale::B0,
        }
    }

    pub fn default_check(&self) -> CheckKind {
        match self {
            Self::SmoothingBias | Self::ExpectedBias | Self::DesignBias => CheckKind::Slope,
            _ => CheckKind::Band,
        }
    }

    pub fn uses_median(&self) -> bool {
        matches!(self, Self::SmoothingBias | Self::DesignNoise)
    }

    pub fn uses_b1(&self) -> bool {
        matches!(self, Self::NoiseSumVariance | Self::TaylorSumVariance | Self::RemainderSumVariance)
    }

    pub fn default_claimed(&self) -> f64 {
        match self {
            Self::FitMoment4 => 8.0,
            Self::FitMoment6 => 12.0,
            _ => 2.0,
        }
    }

    pub fn default_tolerance(&self) -> f64 {
        match self {
            Self::SmoothingBias => 0.3,
            Self::FitMoment4 | Self::FitMoment6 => 1.0,
            _ => 0.1,
        }
    }

    pub fn default_max_ratio(&self) -> f64 {
        match self {
            Self::DesignNoise => 8.0,
            _ => 10.0,
        }
    }
}

/// Claimed envelope as a product of factors, each a sum of named terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub factors: Vec<EnvelopeFactor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFactor {
    pub terms: Vec<(String, f64)>,
    pub power: f64,
}

impl Envelope {
    pub fn value(&self) -> f64 {
        self.factors
            .iter()
            .map(|f| f.terms.iter().map(|t| t.1).sum::<f64>().powf(f.power))
            .product()
    }

    /// Names of the largest term of each factor and the smallest ratio of a
    /// largest term to the runner-up.
    pub fn dominant(&self) -> (Vec<String>, f64) {
        let mut names = Vec::new();
        let mut ratio = f64::INFINITY;
        for f in &self.factors {
            let mut sorted: Vec<&(String, f64)> = f.terms.iter().collect();
            sorted.sort_by(|a, b| b.1.total_cmp(&a.1));
            names.push(sorted[0].0.clone());
            if let Some(second) = sorted.get(1) {
                ratio = ratio.min(sorted[0].1 / second.1);
            }
        }
        (names, ratio)
    }
}

fn factor(terms: &[(&str, f64)], power: f64) -> EnvelopeFactor {
    EnvelopeFactor {
        terms: terms.iter().map(|(n, v)| (n.to_string(), *v)).collect(),
        power,
    }
}

/// Claimed envelope of `target` at `(n, b0, b1)` in dimension `d`.
pub fn envelope(target: Target, n: usize, b0: f64, b1: f64, d: usize) -> Option<Envelope> {
    let nf = n as f64;
    let b0d = b0.powi(d as i32);
    let inner = |power: f64| {
        factor(&[("b0^4", b0.powi(4)), ("1/(n b0^d)", 1.0 / (nf * b0d))], power)
    };
    let factors = match target {
        Target::SmoothingBias | Target::ExpectedBias | Target::DesignBias => {
            vec![factor(&[("b0^2", b0 * b0)], 1.0)]
        }
        Target::DesignNoise => vec![factor(
            &[("b0^4", b0.powi(4)), ("ln n/(n b0^d)", nf.ln() / (nf * b0d))],
            0.5,
        )],
        Target::FitMoment4 => vec![inner(2.0)],
        Target::FitMoment6 => vec![inner(3.0)],
        Target::NoiseSumVariance => vec![factor(&[("n b1^4", nf * b1.powi(4)), ("b1/b0^d", b1 / b0d)], 1.0)],
        Target::TaylorSumVariance => vec![
            factor(
                &[("n b1", nf * b1), ("n^2 b0^d b1^(7/2)", nf * nf * b0d * b1.powf(3.5))],
                1.0,
            ),
            inner(2.0),
        ],
        Target::RemainderSumVariance => vec![factor(&[("n^2 b0^d b1", nf * nf * b0d * b1)], 1.0), inner(3.0)],
    };
    Some(Envelope { factors })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub scale: f64,
    pub n: usize,
    pub b0: f64,
    pub b1: Option<f64>,
    pub statistic: f64,
    pub envelope: f64,
    pub ratio: f64,
    pub dominant_terms: Vec<String>,
    pub degenerate: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub target: Target,
    pub scale: Scale,
    pub check: CheckKind,
    /// Claimed slope of the statistic against the scale. For band checks this
    /// is the fitted slope of the envelope itself.
    pub claimed: f64,
    /// Half width of the slope band, or the largest allowed max/min ratio.
    pub tolerance: f64,
    pub slope: Option<f64>,
    pub stderr: Option<f64>,
    pub ratio_spread: f64,
    pub pass: bool,
    /// Smallest ratio of a dominant envelope term to the runner-up over the
    /// grid; `None` when every factor has a single term.
    pub dominance: Option<f64>,
    pub regime: String,
    pub replications: usize,
    pub degenerate: usize,
    pub points: Vec<RatePoint>,
    pub warnings: Vec<String>,
}

impl RateReport {
    pub fn summary_line(&self) -> String {
        let slope = self
            .slope
            .map(fmt_human)
            .unwrap_or_else(|| "n/a".into());
        match self.check {
            CheckKind::Slope => format!(
                "{}: slope {slope} (claimed {} +/- {}) -> {}",
                self.target.name(),
                fmt_human(self.claimed),
                fmt_human(self.tolerance),
                if self.pass { "PASS" } else { "FAIL" }
            ),
            CheckKind::Band => format!(
                "{}: max/min of statistic/envelope {} (limit {}), slope {slope} -> {}",
                self.target.name(),
                fmt_human(self.ratio_spread),
                fmt_human(self.tolerance),
                if self.pass { "PASS" } else { "FAIL" }
            ),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Flat table `scale, n, b0, b1, statistic, envelope, ratio`.
    pub fn write_points_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["scale", "n", "b0", "b1", "statistic", "envelope", "ratio"])?;
        for p in &self.points {
            w.write_record([
                fmt_full(p.scale),
                p.n.to_string(),
                fmt_full(p.b0),
                p.b1.map(fmt_full).unwrap_or_default(),
                fmt_full(p.statistic),
                fmt_full(p.envelope),
                fmt_full(p.ratio),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Lower median of a sample, after sorting a copy.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v[(v.len() - 1) / 2])
}

/// Tensor grid with `points` points per axis spanning the trim box.
pub fn trim_grid(trim: &TrimRegion, points: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = trim
        .lower()
        .iter()
        .zip(trim.upper())
        .map(|(lo, hi)| {
            (0..points)
                .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
                .collect()
        })
        .collect();
    let mut out = vec![Vec::new()];
    for axis in &axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect();
    }
    out
}

fn quad() -> QuadratureSpec {
    QuadratureSpec::gauss_legendre(1e-13)
}

/// Quadrature for the remainder integral: its pieces are polynomials, so one
/// panel already integrates them exactly.
fn remainder_quad() -> QuadratureSpec {
    QuadratureSpec {
        panels: 1,
        ..QuadratureSpec::gauss_legendre(1e-12)
    }
}

/// `sup_x |E g_n(x) - g(x)|` over the trim grid.
pub fn design_bias(dgp: &DgpSpec, b0: f64, points: usize) -> Result<f64> {
    let kernel = ProductKernel::quadweight(dgp.dim)?;
    let (lo, hi) = dgp.support();
    let values: Vec<Result<f64>> = trim_grid(&dgp.trim, points)
        .par_iter()
        .map(|x| {
            let bar = window_integral(|p| dgp.g(p), &kernel, b0, x, Some((&lo, &hi)), &quad())?;
            Ok((bar - dgp.g(x)).abs())
        })
        .collect();
    sup(values)
}

/// `sup_x |int (m(x + b0 z) - m(x)) K0(z) g(x + b0 z) dz|` over the trim grid.
pub fn local_bias(dgp: &DgpSpec, b0: f64, points: usize) -> Result<f64> {
    let kernel = ProductKernel::quadweight(dgp.dim)?;
    let (lo, hi) = dgp.support();
    let values: Vec<Result<f64>> = trim_grid(&dgp.trim, points)
        .par_iter()
        .map(|x| {
            let mx = dgp.m(x);
            let v = window_integral(
                |p| (dgp.m(p) - mx) * dgp.g(p),
                &kernel,
                b0,
                x,
                Some((&lo, &hi)),
                &quad(),
            )?;
            Ok(v.abs())
        })
        .collect();
    sup(values)
}

fn sup(values: Vec<Result<f64>>) -> Result<f64> {
    values
        .into_iter()
        .try_fold(0.0f64, |acc, v| Ok(acc.max(v?)))
}

struct Outcome {
    statistic: f64,
    degenerate: usize,
}

fn median_over(replications: usize, run: impl Fn(u64) -> Result<f64> + Sync + Send) -> Result<Outcome> {
    let results: Vec<Result<f64>> = (0..replications as u64).into_par_iter().map(run).collect();
    let mut good = Vec::with_capacity(replications);
    let mut degenerate = 0;
    for r in results {
        match r {
            Ok(v) => good.push(v),
            Err(Error::AllTrimmed | Error::DegenerateDenominator(_)) => degenerate += 1,
            Err(e) => return Err(e),
        }
    }
    if degenerate as f64 > MAX_DEGENERATE_FRACTION * replications as f64 {
        return Err(Error::TooManyDegenerate {
            degenerate,
            total: replications,
        });
    }
    Ok(Outcome {
        statistic: median(&good).ok_or(Error::TooManyDegenerate {
            degenerate,
            total: replications,
        })?,
        degenerate,
    })
}

fn statistic(
    config: &ExperimentConfig,
    dgp: &DgpSpec,
    n: usize,
    b0: f64,
    b1: f64,
) -> Result<Outcome> {
    let seed = config.seed;
    let r = config.replications;
    let exact = |statistic| Ok(Outcome { statistic, degenerate: 0 });
    let frozen = || -> Result<_> {
        let data = dgp.sample_replication(n, seed, 0)?;
        let smoother = NwSmoother::quadweight(&data, b0)?;
        Ok((data, smoother))
    };
    match config.target {
        Target::DesignBias => exact(design_bias(dgp, b0, config.x_points)?),
        Target::ExpectedBias => exact(local_bias(dgp, b0, config.x_points)?),
        Target::SmoothingBias => median_over(r, |rep| {
            let data = dgp.sample_replication(n, seed, rep)?;
            let smoother = NwSmoother::quadweight(&data, b0)?;
            let terms = decompose(&smoother, &data, &dgp.trim)?;
            if !terms.kept.iter().any(|k| *k) {
                return Err(Error::AllTrimmed);
            }
            Ok(terms.sup_abs_beta())
        }),
        Target::DesignNoise => {
            let kernel = ProductKernel::quadweight(dgp.dim)?;
            let (lo, hi) = dgp.support();
            let grid = trim_grid(&dgp.trim, config.x_points);
            let expected: Vec<f64> = grid
                .iter()
                .map(|x| window_integral(|p| dgp.g(p), &kernel, b0, x, Some((&lo, &hi)), &quad()))
                .collect::<Result<_>>()?;
            median_over(r, |rep| {
                let data = dgp.sample_replication(n, seed, rep)?;
                grid.iter().zip(&expected).try_fold(0.0f64, |acc, (x, e)| {
                    Ok(acc.max((g_hat_n(&data, b0, x)? - e).abs()))
                })
            })
        }
        Target::FitMoment4 | Target::FitMoment6 => {
            let (data, smoother) = frozen()?;
            let design = FrozenDesign {
                smoother: &smoother,
                data: &data,
                trim: &dgp.trim,
            };
            let k = if config.target == Target::FitMoment4 { 4 } else { 6 };
            exact(conditional_moment(&design, &dgp.error_source(seed), k, r)?.sup)
        }
        Target::NoiseSumVariance | Target::TaylorSumVariance | Target::RemainderSumVariance => {
            let (data, smoother) = frozen()?;
            let design = FrozenDesign {
                smoother: &smoother,
                data: &data,
                trim: &dgp.trim,
            };
            let which = match config.target {
                Target::NoiseSumVariance => SumStatistic::SSigma,
                Target::TaylorSumVariance => SumStatistic::SZeta,
                _ => SumStatistic::SR,
            };
            let v = conditional_variance_of_sum(
                &design,
                &dgp.error_source(seed),
                which,
                UnivariateKernel::Quadweight,
                b1,
                config.e,
                r,
                &remainder_quad(),
            )?;
            exact(v.variance)
        }
    }
}

fn assumption_warnings(config: &ExperimentConfig, dgp: &DgpSpec) -> Vec<String> {
    let mut out = Vec::new();
    let mut check = |c: Option<f64>, a: Option<f64>, regression: bool| {
        if let Some(a) = a {
            let Ok(s) = PowerSchedule::new(c.unwrap_or(1.0), a) else {
                return;
            };
            let verdict = if regression {
                validate_a8(&s, dgp.dim)
            } else {
                validate_a9(&s, dgp.dim)
            };
            if let Ok(v) = verdict {
                if !v.satisfied {
                    out.push(format!("{} not satisfied: {}", v.name, v.inequality));
                }
            }
        }
    };
    check(config.b0_c, config.b0_a, true);
    check(config.b1_c, config.b1_gamma, false);
    out
}

pub fn run_rate_experiment(config: &ExperimentConfig) -> Result<RateReport> {
    config.validate()?;
    let dgp = config.dgp_spec()?;
    let target = config.target;
    let check = config.check_kind();
    let mut warnings = assumption_warnings(config, &dgp);
    if !dgp.errors.smooth_density() {
        warnings.push(format!(
            "error law {:?} does not have a three times continuously differentiable density",
            dgp.errors
        ));
    }

    let mut points = Vec::with_capacity(config.grid.len());
    let mut dominance = f64::INFINITY;
    for &value in &config.grid {
        let (n, b0, b1) = config.point(value)?;
        let outcome = statistic(config, &dgp, n, b0, b1)?;
        let env = envelope(target, n, b0, b1, dgp.dim).expect("every target has an envelope");
        let (names, dom) = env.dominant();
        dominance = dominance.min(dom);
        let e = env.value();
        points.push(RatePoint {
            scale: value,
            n,
            b0,
            b1: target.uses_b1().then_some(b1),
            statistic: outcome.statistic,
            envelope: e,
            ratio: outcome.statistic / e,
            dominant_terms: names,
            degenerate: outcome.degenerate,
        });
    }

    let scales: Vec<f64> = points.iter().map(|p| p.scale).collect();
    let stats: Vec<f64> = points.iter().map(|p| p.statistic).collect();
    let fit = fit_rate(&scales, &stats);
    let envelope_fit = fit_rate(&scales, &points.iter().map(|p| p.envelope).collect::<Vec<_>>())?;
    let ratios: Vec<f64> = points.iter().map(|p| p.ratio).collect();
    let ratio_spread = ratios.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b))
        / ratios.iter().fold(f64::INFINITY, |a, b| a.min(*b));

    let (claimed, tolerance, pass, slope, stderr) = match check {
        CheckKind::Slope => {
            let claimed = config.claimed.unwrap_or(target.default_claimed());
            let tol = config.tolerance.unwrap_or(target.default_tolerance());
            let fit = fit?;
            let pass = (fit.slope - claimed).abs() <= tol;
            (claimed, tol, pass, Some(fit.slope), Some(fit.stderr))
        }
        CheckKind::Band => {
            let max_ratio = config.max_ratio.unwrap_or(target.default_max_ratio());
            if let Err(e) = &fit {
                warnings.push(format!("slope not available: {e}"));
            }
            let pass = ratio_spread.is_finite() && ratio_spread <= max_ratio;
            let fit = fit.ok();
            (
                envelope_fit.slope,
                max_ratio,
                pass,
                fit.map(|f| f.slope),
                fit.map(|f| f.stderr),
            )
        }
    };
    if dominance < DOMINANCE {
        warnings.push(format!(
            "no single envelope term dominates by {DOMINANCE}x everywhere (smallest ratio {dominance:.3})"
        ));
    }
    let dominance = dominance.is_finite().then_some(dominance);
    let regime = describe_regime(&points);
    let degenerate = points.iter().map(|p| p.degenerate).sum();
    Ok(RateReport {
        target,
        scale: config.moving_scale(),
        check,
        claimed,
        tolerance,
        slope,
        stderr,
        ratio_spread,
        pass,
        dominance,
        regime,
        replications: config.replications,
        degenerate,
        points,
        warnings,
    })
}

fn describe_regime(points: &[RatePoint]) -> String {
    let first = &points[0].dominant_terms;
    if points.iter().all(|p| &p.dominant_terms == first) {
        format!("dominant: {}", first.join(" x "))
    } else {
        let parts: Vec<String> = points
            .iter()
            .map(|p| format!("{}: {}", p.scale, p.dominant_terms.join(" x ")))
            .collect();
        format!("mixed ({})", parts.join("; "))
    }
}
