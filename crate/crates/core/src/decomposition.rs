//! Bias/noise split of the leave-one-out fitting error and the Taylor terms
//! of the residual density estimator.
//!
//! With weights `w_ij = K0((X_j - X_i)/b0)` and `D_i = sum_{j != i} w_ij`:
//!
//! ```text
//! beta_i  = 1(i kept) sum_j (m(X_j) - m(X_i)) w_ij / D_i
//! sigma_i = 1(i kept) sum_j eps_j w_ij / D_i
//! beta_i + sigma_i = 1(i kept) (m_in - m(X_i))
//! ```
//!
//! Expanding `K1((eps_hat_i - e)/b1)` around `a = (eps_i - e)/b1` with
//! `h = (m_in - m(X_i))/b1` to third order gives
//!
//! ```text
//! K1(a - h) = K1(a) - h K1'(a) + h^2/2 K1''(a) - h^3/2 I(a, h)
//! I(a, h)   = int_0^1 (1 - t)^2 K1'''(a - t h) dt
//! ```
//!
//! Everything here needs the true regression function and errors, so it is
//! only available for simulated data.

use std::io::Write;

use rayon::prelude::*;

use crate::data::{fmt_full, Dataset};
use crate::error::{Error, Result};
use crate::kernel::{ProductKernel, UnivariateKernel};
use crate::quadrature::QuadratureSpec;
use crate::smoother::{window_integral, NwSmoother, ResidualFit, TrimRegion};
use crate::summation::NeumaierSum;

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionTerms {
    pub b0: f64,
    pub beta: Vec<f64>,
    pub sigma: Vec<f64>,
    pub g_hat: Vec<f64>,
    pub kept: Vec<bool>,
    /// `false` where the local kernel mass is zero.
    pub defined: Vec<bool>,
}

impl DecompositionTerms {
    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn sup_abs_beta(&self) -> f64 {
        self.beta.iter().fold(0.0, |acc, b| acc.max(b.abs()))
    }
}

fn weighted_mean_diff(idx: &[usize], w: &[f64], values: &[f64], center: f64) -> (f64, f64) {
    let mut num = NeumaierSum::new();
    let mut den = NeumaierSum::new();
    for (&j, &wj) in idx.iter().zip(w) {
        num += (values[j] - center) * wj;
        den += wj;
    }
    (num.value(), den.value())
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionError { expected, got })
    }
}

/// `beta` and `sigma` for every observation from explicit `m(X_i)` and `eps_i`.
pub fn decompose_with(
    smoother: &NwSmoother,
    x: &Dataset,
    m: &[f64],
    eps: &[f64],
    trim: &TrimRegion,
) -> Result<DecompositionTerms> {
    let n = smoother.len();
    check_len(n, x.len())?;
    check_len(n, m.len())?;
    check_len(n, eps.len())?;
    let scale = smoother.scale();
    let rows: Vec<(f64, f64, f64, bool, bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (idx, w) = smoother.graph().neighbors(i);
            let (bias_num, mass) = weighted_mean_diff(idx, w, m, m[i]);
            let (noise_num, _) = weighted_mean_diff(idx, w, eps, 0.0);
            let defined = mass > 0.0;
            let kept = defined && trim.contains(x.x(i));
            if kept {
                (bias_num / mass, noise_num / mass, mass / scale, true, true)
            } else {
                (0.0, 0.0, mass / scale, false, defined)
            }
        })
        .collect();
    let mut terms = DecompositionTerms {
        b0: smoother.b0(),
        beta: Vec::with_capacity(n),
        sigma: Vec::with_capacity(n),
        g_hat: Vec::with_capacity(n),
        kept: Vec::with_capacity(n),
        defined: Vec::with_capacity(n),
    };
    for (b, s, g, k, d) in rows {
        terms.beta.push(b);
        terms.sigma.push(s);
        terms.g_hat.push(g);
        terms.kept.push(k);
        terms.defined.push(d);
    }
    Ok(terms)
}

/// `beta` and `sigma` for a simulated dataset.
pub fn decompose(smoother: &NwSmoother, data: &Dataset, trim: &TrimRegion) -> Result<DecompositionTerms> {
    let truth = data.require_truth()?;
    decompose_with(smoother, data, &truth.m, &truth.eps, trim)
}

fn single_term(data: &Dataset, b0: f64, trim: &TrimRegion, i: usize, values: &[f64], center: f64) -> Result<f64> {
    if !(b0 > 0.0 && b0.is_finite()) {
        return Err(Error::InvalidBandwidth(b0));
    }
    if i >= data.len() {
        return Err(Error::InvalidArgument(format!("index {i} out of range")));
    }
    if !trim.contains(data.x(i)) {
        return Ok(0.0);
    }
    let kernel = ProductKernel::quadweight(data.dim())?;
    let mut num = NeumaierSum::new();
    let mut den = NeumaierSum::new();
    for j in (0..data.len()).filter(|&j| j != i) {
        let w = kernel.eval_scaled_diff(data.x(j), data.x(i), b0);
        num += (values[j] - center) * w;
        den += w;
    }
    let den = den.value();
    if den > 0.0 {
        Ok(num.value() / den)
    } else {
        Err(Error::DegenerateDenominator(i))
    }
}

/// Smoothing bias of the leave-one-out fit at observation `i` (0-based).
pub fn beta_in(data: &Dataset, b0: f64, trim: &TrimRegion, i: usize) -> Result<f64> {
    let m = &data.require_truth()?.m;
    single_term(data, b0, trim, i, m, m.get(i).copied().unwrap_or(0.0))
}

/// Noise part of the leave-one-out fit at observation `i` (0-based). Never reads `eps_i`.
pub fn sigma_in(data: &Dataset, b0: f64, trim: &TrimRegion, i: usize) -> Result<f64> {
    single_term(data, b0, trim, i, &data.require_truth()?.eps, 0.0)
}

/// `I(a, h) = int_0^1 (1 - t)^2 K1'''(a - t h) dt`, split where `a - t h`
/// crosses the support edges so each piece is a polynomial.
pub fn remainder_integral(kernel: UnivariateKernel, a: f64, h: f64, quad: &QuadratureSpec) -> Result<f64> {
    let r = kernel.support_radius();
    let mut breaks = vec![0.0, 1.0];
    if h != 0.0 {
        for edge in [-r, r] {
            let t = (a - edge) / h;
            if t > 0.0 && t < 1.0 {
                breaks.push(t);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    quad.integrate_pieces(|t| (1.0 - t) * (1.0 - t) * kernel.d3(a - t * h), &breaks)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaylorTerms {
    pub b1: f64,
    pub e: f64,
    /// `1(kept) (m_in - m(X_i))^2 K1''(a_i)`.
    pub zeta: Vec<f64>,
    /// `I(a_i, h_i)`; `None` where the fit is undefined.
    pub remainder: Vec<Option<f64>>,
    /// `1(kept) (m_in - m(X_i))^3 I(a_i, h_i)`.
    pub r: Vec<f64>,
}

fn check_b1(b1: f64) -> Result<()> {
    if b1 > 0.0 && b1.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidBandwidth(b1))
    }
}

/// Second- and third-order Taylor terms at density argument `e`.
pub fn taylor_terms_with(
    fit: &ResidualFit,
    m: &[f64],
    eps: &[f64],
    kernel: UnivariateKernel,
    b1: f64,
    e: f64,
    quad: &QuadratureSpec,
) -> Result<TaylorTerms> {
    check_b1(b1)?;
    check_len(fit.len(), m.len())?;
    check_len(fit.len(), eps.len())?;
    let rows: Vec<Result<(f64, Option<f64>, f64)>> = (0..fit.len())
        .into_par_iter()
        .map(|i| {
            let Some(m_hat) = fit.m_hat[i] else {
                return Ok((0.0, None, 0.0));
            };
            let diff = m_hat - m[i];
            let a = (eps[i] - e) / b1;
            let rem = remainder_integral(kernel, a, diff / b1, quad)?;
            if fit.kept[i] {
                Ok((diff * diff * kernel.d2(a), Some(rem), diff * diff * diff * rem))
            } else {
                Ok((0.0, Some(rem), 0.0))
            }
        })
        .collect();
    let mut out = TaylorTerms {
        b1,
        e,
        zeta: Vec::with_capacity(fit.len()),
        remainder: Vec::with_capacity(fit.len()),
        r: Vec::with_capacity(fit.len()),
    };
    for row in rows {
        let (z, i_rem, r) = row?;
        out.zeta.push(z);
        out.remainder.push(i_rem);
        out.r.push(r);
    }
    Ok(out)
}

pub fn taylor_terms(
    fit: &ResidualFit,
    data: &Dataset,
    b1: f64,
    e: f64,
    quad: &QuadratureSpec,
) -> Result<TaylorTerms> {
    let truth = data.require_truth()?;
    taylor_terms_with(fit, &truth.m, &truth.eps, UnivariateKernel::Quadweight, b1, e, quad)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropSums {
    /// `sum_i beta_i K1'((eps_i - e)/b1)`.
    pub s_beta: f64,
    /// `sum_i sigma_i K1'((eps_i - e)/b1)`.
    pub s_sigma: f64,
    pub s_zeta: f64,
    pub s_r: f64,
}

pub fn prop_sums_with(
    terms: &DecompositionTerms,
    taylor: &TaylorTerms,
    eps: &[f64],
    kernel: UnivariateKernel,
) -> Result<PropSums> {
    check_len(terms.len(), eps.len())?;
    check_len(terms.len(), taylor.zeta.len())?;
    let slope: Vec<f64> = eps
        .iter()
        .map(|x| kernel.d1((x - taylor.e) / taylor.b1))
        .collect();
    let dot = |v: &[f64]| {
        v.iter()
            .zip(&slope)
            .map(|(a, b)| a * b)
            .sum::<NeumaierSum>()
            .value()
    };
    Ok(PropSums {
        s_beta: dot(&terms.beta),
        s_sigma: dot(&terms.sigma),
        s_zeta: taylor.zeta.iter().copied().sum::<NeumaierSum>().value(),
        s_r: taylor.r.iter().copied().sum::<NeumaierSum>().value(),
    })
}

pub fn prop_sums(terms: &DecompositionTerms, taylor: &TaylorTerms, data: &Dataset) -> Result<PropSums> {
    prop_sums_with(terms, taylor, &data.require_truth()?.eps, UnivariateKernel::Quadweight)
}

/// Design-level quantities used to bound the sums above.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryStats {
    /// Expected local bias `int (m(x + b0 z) - m(x)) K0(z) g(x + b0 z) dz` at
    /// each kept `X_i`, zero elsewhere.
    pub nu_bar: Vec<f64>,
    /// Centered local bias: `sum_j 1(kept)(m(X_j) - m(X_i)) w_ij / ((n-1) b0^d) - nu_bar_i`.
    pub nu: Vec<f64>,
    /// `sum_j w_ij^2 / (n b0^d)`.
    pub g_tilde: Vec<f64>,
    /// `sum_j w_ij^4 / (n b0^d)`.
    pub g_quartic: Vec<f64>,
    /// `sum_{j != i} sum_{k != i, j} w_ik w_jk / (n b0^d)^2`.
    pub g_cross: Vec<f64>,
    /// `sup_j [beta_j^2 + |beta_j| / (n b0^d g_j) + 1(kept) sum_k w_jk^2 / (n b0^d g_j)^2]`.
    pub m_big: f64,
}

/// Regression function and design density of a simulation, with the box
/// outside which the density vanishes.
pub struct DesignTruth<'a> {
    pub m: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    pub g: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    pub support: (&'a [f64], &'a [f64]),
}

impl AuxiliaryStats {
    pub fn compute(
        smoother: &NwSmoother,
        data: &Dataset,
        terms: &DecompositionTerms,
        truth: &DesignTruth<'_>,
        quad: &QuadratureSpec,
    ) -> Result<Self> {
        let n = smoother.len();
        check_len(n, terms.len())?;
        let m = &data.require_truth()?.m;
        let nb = smoother.scale();
        let b0d = smoother.b0().powi(smoother.kernel().dim() as i32);
        let mass: Vec<f64> = (0..n).map(|i| smoother.local_mass(i)).collect();

        type Row = (f64, f64, f64, f64, f64, f64);
        let rows: Vec<Result<Row>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let (idx, w) = smoother.graph().neighbors(i);
                let g_tilde = w.iter().map(|v| v * v).sum::<NeumaierSum>().value() / nb;
                let g_quartic = w.iter().map(|v| v.powi(4)).sum::<NeumaierSum>().value() / nb;
                let g_cross = idx
                    .iter()
                    .zip(w)
                    .map(|(&k, &wik)| wik * (mass[k] - wik))
                    .sum::<NeumaierSum>()
                    .value()
                    / (nb * nb);
                let (nu_bar, nu) = if terms.kept[i] {
                    let xi = data.x(i);
                    let mi = m[i];
                    let nu_bar = window_integral(
                        |p| ((truth.m)(p) - mi) * (truth.g)(p),
                        smoother.kernel(),
                        smoother.b0(),
                        xi,
                        Some(truth.support),
                        quad,
                    )?;
                    let (num, _) = weighted_mean_diff(idx, w, m, mi);
                    (nu_bar, num / ((n - 1) as f64 * b0d) - nu_bar)
                } else {
                    (0.0, 0.0)
                };
                let g = terms.g_hat[i];
                let bound = if terms.defined[i] {
                    let beta = terms.beta[i];
                    let base = nb * g;
                    let tail = if terms.kept[i] { g_tilde * nb / (base * base) } else { 0.0 };
                    beta * beta + beta.abs() / base + tail
                } else {
                    0.0
                };
                Ok((nu_bar, nu, g_tilde, g_quartic, g_cross, bound))
            })
            .collect();
        let mut out = AuxiliaryStats {
            nu_bar: Vec::with_capacity(n),
            nu: Vec::with_capacity(n),
            g_tilde: Vec::with_capacity(n),
            g_quartic: Vec::with_capacity(n),
            g_cross: Vec::with_capacity(n),
            m_big: 0.0,
        };
        for row in rows {
            let (nb_, nu, gt, gq, gc, bound) = row?;
            out.nu_bar.push(nb_);
            out.nu.push(nu);
            out.g_tilde.push(gt);
            out.g_quartic.push(gq);
            out.g_cross.push(gc);
            out.m_big = out.m_big.max(bound);
        }
        Ok(out)
    }

    /// `sum_{i kept} numerator_i / g_i^power`.
    pub fn weighted_sum(numerator: &[f64], terms: &DecompositionTerms, power: i32) -> f64 {
        numerator
            .iter()
            .zip(&terms.g_hat)
            .zip(&terms.kept)
            .filter(|(_, k)| **k)
            .map(|((v, g), _)| v / g.powi(power))
            .sum::<NeumaierSum>()
            .value()
    }
}

/// Source of fresh error vectors for replications with the design held fixed.
/// Draws must depend only on the replication index.
pub trait ErrorSource: Sync {
    fn draw(&self, replication: u64, n: usize) -> Vec<f64>;
}

/// Simulated design held fixed while errors are redrawn.
pub struct FrozenDesign<'a> {
    pub smoother: &'a NwSmoother,
    pub data: &'a Dataset,
    pub trim: &'a TrimRegion,
}

impl FrozenDesign<'_> {
    fn responses(&self, eps: &[f64]) -> Result<Vec<f64>> {
        let m = &self.data.require_truth()?.m;
        Ok(m.iter().zip(eps).map(|(a, b)| a + b).collect())
    }

    fn fit(&self, eps: &[f64]) -> Result<ResidualFit> {
        let y = self.responses(eps)?;
        self.smoother.fit_responses(self.data, &y, self.trim)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMoment {
    pub k: u32,
    pub replications: usize,
    /// Monte Carlo mean of `1(kept)(m_in - m(X_i))^k` per observation.
    pub per_observation: Vec<f64>,
    pub sup: f64,
}

fn require_replications(r: usize) -> Result<()> {
    if r < 2 {
        Err(Error::InsufficientReplications(r))
    } else {
        Ok(())
    }
}

/// Mean over `replications` error draws of `1(kept)(m_in - m(X_i))^k`, design fixed.
pub fn conditional_moment(
    design: &FrozenDesign<'_>,
    errors: &dyn ErrorSource,
    k: u32,
    replications: usize,
) -> Result<ConditionalMoment> {
    require_replications(replications)?;
    let n = design.data.len();
    let m = &design.data.require_truth()?.m;
    let draws: Vec<Result<Vec<f64>>> = (0..replications as u64)
        .into_par_iter()
        .map(|rep| {
            let fit = design.fit(&errors.draw(rep, n))?;
            Ok((0..n)
                .map(|i| match (fit.kept[i], fit.m_hat[i]) {
                    (true, Some(mh)) => (mh - m[i]).powi(k as i32),
                    _ => 0.0,
                })
                .collect())
        })
        .collect();
    let mut acc = vec![NeumaierSum::new(); n];
    for draw in draws {
        for (a, v) in acc.iter_mut().zip(draw?) {
            *a += v;
        }
    }
    let per_observation: Vec<f64> = acc
        .into_iter()
        .map(|a| a.value() / replications as f64)
        .collect();
    let sup = per_observation.iter().fold(f64::NEG_INFINITY, |s, v| s.max(*v));
    Ok(ConditionalMoment {
        k,
        replications,
        per_observation,
        sup,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SumStatistic {
    SBeta,
    SSigma,
    SZeta,
    SR,
}

impl SumStatistic {
    pub fn pick(&self, sums: &PropSums) -> f64 {
        match self {
            Self::SBeta => sums.s_beta,
            Self::SSigma => sums.s_sigma,
            Self::SZeta => sums.s_zeta,
            Self::SR => sums.s_r,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SumVariance {
    pub statistic: SumStatistic,
    pub mean: f64,
    pub variance: f64,
    pub values: Vec<f64>,
}

/// Sample variance over error redraws of one of the four sums, design fixed.
#[allow(clippy::too_many_arguments)]
pub fn conditional_variance_of_sum(
    design: &FrozenDesign<'_>,
    errors: &dyn ErrorSource,
    statistic: SumStatistic,
    kernel: UnivariateKernel,
    b1: f64,
    e: f64,
    replications: usize,
    quad: &QuadratureSpec,
) -> Result<SumVariance> {
    require_replications(replications)?;
    check_b1(b1)?;
    let n = design.data.len();
    let m = &design.data.require_truth()?.m;
    let values: Vec<Result<f64>> = (0..replications as u64)
        .into_par_iter()
        .map(|rep| {
            let eps = errors.draw(rep, n);
            let fit = design.fit(&eps)?;
            let terms = decompose_with(design.smoother, design.data, m, &eps, design.trim)?;
            let taylor = match statistic {
                SumStatistic::SZeta | SumStatistic::SR => {
                    taylor_terms_with(&fit, m, &eps, kernel, b1, e, quad)?
                }
                _ => TaylorTerms {
                    b1,
                    e,
                    zeta: vec![0.0; n],
                    remainder: vec![None; n],
                    r: vec![0.0; n],
                },
            };
            Ok(statistic.pick(&prop_sums_with(&terms, &taylor, &eps, kernel)?))
        })
        .collect();
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    let (mean, variance) = mean_variance(&values);
    Ok(SumVariance {
        statistic,
        mean,
        variance,
        values,
    })
}

/// Mean and unbiased sample variance, summed in input order.
pub fn mean_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().copied().sum::<NeumaierSum>().value() / n;
    let ss = values
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<NeumaierSum>()
        .value();
    (mean, ss / (n - 1.0))
}

/// Per-observation table `i, beta, sigma, zeta, r, g_hat, g_tilde, trimmed`
/// (`i` 0-based, `trimmed` is the 0/1 keep indicator).
pub fn write_diagnostics<W: Write>(
    out: W,
    terms: &DecompositionTerms,
    taylor: &TaylorTerms,
    aux_g_tilde: &[f64],
) -> Result<()> {
    check_len(terms.len(), taylor.zeta.len())?;
    check_len(terms.len(), aux_g_tilde.len())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "beta", "sigma", "zeta", "r", "g_hat", "g_tilde", "trimmed"])?;
    for i in 0..terms.len() {
        w.write_record([
            i.to_string(),
            fmt_full(terms.beta[i]),
            fmt_full(terms.sigma[i]),
            fmt_full(taylor.zeta[i]),
            fmt_full(taylor.r[i]),
            fmt_full(terms.g_hat[i]),
            fmt_full(aux_g_tilde[i]),
            u8::from(terms.kept[i]).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const QW: UnivariateKernel = UnivariateKernel::Quadweight;

    fn quad() -> QuadratureSpec {
        QuadratureSpec::gauss_legendre(1e-13)
    }

    fn wide_trim() -> TrimRegion {
        TrimRegion::new(vec![-10.0], vec![10.0]).unwrap()
    }

    #[test]
    fn beta_vanishes_for_constant_and_symmetric_affine() {
        let data = Dataset::with_truth(1, vec![0.0, 0.3, 0.4], vec![2.0; 3], vec![0.1, -0.2, 0.3]).unwrap();
        for i in 0..3 {
            assert_eq!(beta_in(&data, 1.0, &wide_trim(), i).unwrap(), 0.0);
        }
        let data = Dataset::with_truth(1, vec![-0.1, 0.0, 0.1], vec![-0.1, 0.0, 0.1], vec![0.0; 3]).unwrap();
        assert_eq!(beta_in(&data, 1.0, &wide_trim(), 1).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_denominator() {
        let data = Dataset::with_truth(1, vec![0.0, 5.0], vec![0.0; 2], vec![0.0; 2]).unwrap();
        assert!(matches!(
            beta_in(&data, 1.0, &wide_trim(), 0),
            Err(Error::DegenerateDenominator(0))
        ));
        let narrow = TrimRegion::new(vec![4.0], vec![6.0]).unwrap();
        assert_eq!(sigma_in(&data, 1.0, &narrow, 0).unwrap(), 0.0);
    }

    #[test]
    fn remainder_with_no_shift_is_a_third() {
        for a in [-0.9, -0.3, 0.0, 0.45, 0.99] {
            let v = remainder_integral(QW, a, 0.0, &quad()).unwrap();
            assert!((v - QW.d3(a) / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn remainder_matches_riemann_sum() {
        let (a, h) = (0.4, 1.1);
        let v = remainder_integral(QW, a, h, &quad()).unwrap();
        let steps = 10_000;
        let riemann: f64 = (0..steps)
            .map(|k| {
                let t = (k as f64 + 0.5) / steps as f64;
                (1.0 - t).powi(2) * QW.d3(a - t * h)
            })
            .sum::<f64>()
            / steps as f64;
        assert!((v - riemann).abs() < 1e-6);
    }

    /// Two points, hand arithmetic: X = [0, 0.2], m = [1, 2], eps = [0.5, -0.25].
    #[test]
    fn two_point_instance() {
        let data = Dataset::with_truth(1, vec![0.0, 0.2], vec![1.0, 2.0], vec![0.5, -0.25]).unwrap();
        let smoother = NwSmoother::quadweight(&data, 1.0).unwrap();
        let terms = decompose(&smoother, &data, &wide_trim()).unwrap();
        // Single neighbour: weights cancel.
        assert_eq!(terms.beta, vec![1.0, -1.0]);
        assert_eq!(terms.sigma, vec![-0.25, 0.5]);
        let fit = smoother.fit(&data, &wide_trim()).unwrap();
        assert_eq!(fit.m_hat, vec![Some(1.75), Some(1.5)]);

        let (b1, e) = (2.0, 0.0);
        let taylor = taylor_terms(&fit, &data, b1, e, &quad()).unwrap();
        // h = 0.75 at i = 0, a = 0.25; h = -0.5 at i = 1, a = -0.125.
        assert!((taylor.zeta[0] - 0.5625 * QW.d2(0.25)).abs() < 1e-15);
        assert!((taylor.zeta[1] - 0.25 * QW.d2(-0.125)).abs() < 1e-15);
        let sums = prop_sums(&terms, &taylor, &data).unwrap();
        let s_beta = QW.d1(0.25) - QW.d1(-0.125);
        let s_sigma = -0.25 * QW.d1(0.25) + 0.5 * QW.d1(-0.125);
        assert!((sums.s_beta - s_beta).abs() < 1e-15);
        assert!((sums.s_sigma - s_sigma).abs() < 1e-15);
        let r0 = 0.75f64.powi(3) * taylor.remainder[0].unwrap();
        let r1 = (-0.5f64).powi(3) * taylor.remainder[1].unwrap();
        assert!((sums.s_r - (r0 + r1)).abs() < 1e-15);
    }

    #[test]
    fn cross_weights_by_brute_force() {
        let x = vec![0.0, 0.1, 0.15, 0.3, 0.42, 0.5, 0.9];
        let n = x.len();
        let data = Dataset::with_truth(1, x.clone(), x.iter().map(|v| v * v).collect(), vec![0.0; n]).unwrap();
        let smoother = NwSmoother::quadweight(&data, 0.6).unwrap();
        let terms = decompose(&smoother, &data, &wide_trim()).unwrap();
        let m = |p: &[f64]| p[0] * p[0];
        let g = |_: &[f64]| 1.0;
        let truth = DesignTruth {
            m: &m,
            g: &g,
            support: (&[0.0], &[1.0]),
        };
        let aux = AuxiliaryStats::compute(&smoother, &data, &terms, &truth, &quad()).unwrap();
        let k = ProductKernel::quadweight(1).unwrap();
        let w = |a: usize, b: usize| k.eval_scaled_diff(&[x[a]], &[x[b]], 0.6);
        let nb = n as f64 * 0.6;
        for i in 0..n {
            let mut s = 0.0;
            for j in (0..n).filter(|&j| j != i) {
                for kk in (0..n).filter(|&kk| kk != i && kk != j) {
                    s += w(kk, i) * w(kk, j);
                }
            }
            assert!((aux.g_cross[i] - s / (nb * nb)).abs() < 1e-12);
            let expected = terms.beta[i] * terms.g_hat[i] * n as f64 / (n - 1) as f64 - aux.nu[i];
            assert!((expected - aux.nu_bar[i]).abs() < 1e-12);
        }
        assert!(aux.m_big > 0.0);
    }
}
