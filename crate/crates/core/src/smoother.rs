//! Leave-one-out Nadaraya-Watson regression and residuals.
//!
//! For observation `i` (indices are 0-based throughout the API):
//!
//! ```text
//! g_in  = 1/(n b0^d) * sum_{j != i} K0((X_j - X_i)/b0)
//! m_in  = sum_{j != i} Y_j K0(..) / sum_{j != i} K0(..)
//! eps_i = Y_i - m_in
//! ```
//!
//! `g_in` keeps the divisor `n` even though it sums `n - 1` terms. When the
//! local kernel mass is zero, `m_in` is undefined: it is returned as `None`
//! and the observation is excluded from the trimmed set.
//!
//! `m_in` only depends on `Y_k` for `k` in the dependency set
//! `D_i = { k != i : K0((X_k - X_i)/b0) != 0 }`, which lies inside the
//! sup-norm ball of radius `b0/2` around `X_i`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::ProductKernel;
use crate::neighbors::NeighborGraph;
use crate::quadrature::QuadratureSpec;
use crate::summation::NeumaierSum;

/// Axis-aligned box `[lower, upper]` (closed) used as the trimming region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimRegion {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TrimRegion {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::DimensionError {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !l.is_finite() || !u.is_finite() || !(l < u))
        {
            return Err(Error::InvalidArgument(
                "trim box needs finite bounds with lower < upper".into(),
            ));
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    /// Errors unless the box lies strictly inside the support box `[lo, hi]`.
    pub fn check_inside(&self, lo: &[f64], hi: &[f64]) -> Result<()> {
        if lo.len() != self.dim() || hi.len() != self.dim() {
            return Err(Error::DimensionError {
                expected: self.dim(),
                got: lo.len(),
            });
        }
        let inside = (0..self.dim()).all(|j| lo[j] < self.lower[j] && self.upper[j] < hi[j]);
        if inside {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "trim box {:?}..{:?} is not strictly inside the support {:?}..{:?}",
                self.lower, self.upper, lo, hi
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualFit {
    pub b0: f64,
    /// Leave-one-out fit; `None` where the local kernel mass is zero.
    pub m_hat: Vec<Option<f64>>,
    pub g_hat: Vec<f64>,
    pub residual: Vec<Option<f64>>,
    /// Trimming indicator `1(X_i in X0)`, forced to `false` where the fit is undefined.
    pub kept: Vec<bool>,
}

impl ResidualFit {
    pub fn len(&self) -> usize {
        self.kept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }

    pub fn n_kept(&self) -> usize {
        self.kept.iter().filter(|k| **k).count()
    }

    pub fn n_undefined(&self) -> usize {
        self.m_hat.iter().filter(|m| m.is_none()).count()
    }

    /// Residuals entering the density estimate.
    pub fn kept_residuals(&self) -> impl Iterator<Item = f64> + '_ {
        self.kept
            .iter()
            .zip(&self.residual)
            .filter_map(|(k, r)| if *k { *r } else { None })
    }
}

/// Leave-one-out smoother over a fixed design, backed by a neighbor graph.
#[derive(Debug, Clone)]
pub struct NwSmoother {
    kernel: ProductKernel,
    b0: f64,
    n: usize,
    graph: NeighborGraph,
}

impl NwSmoother {
    pub fn new(data: &Dataset, kernel: ProductKernel, b0: f64) -> Result<Self> {
        let graph = NeighborGraph::build(data.x_flat(), data.dim(), &kernel, b0)?;
        Ok(Self {
            kernel,
            b0,
            n: data.len(),
            graph,
        })
    }

    pub fn quadweight(data: &Dataset, b0: f64) -> Result<Self> {
        Self::new(data, ProductKernel::quadweight(data.dim())?, b0)
    }

    pub fn kernel(&self) -> &ProductKernel {
        &self.kernel
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn graph(&self) -> &NeighborGraph {
        &self.graph
    }

    /// `n b0^d`, the normalisation shared by every kernel average.
    pub fn scale(&self) -> f64 {
        self.n as f64 * self.b0.powi(self.kernel.dim() as i32)
    }

    /// `sum_{j != i} K0((X_j - X_i)/b0)`.
    pub fn local_mass(&self, i: usize) -> f64 {
        let (_, w) = self.graph.neighbors(i);
        w.iter().copied().sum::<NeumaierSum>().value()
    }

    pub fn g_in(&self, i: usize) -> f64 {
        self.local_mass(i) / self.scale()
    }

    /// Weighted leave-one-out average of `values` at observation `i`.
    pub fn average(&self, i: usize, values: &[f64]) -> Option<f64> {
        let (idx, w) = self.graph.neighbors(i);
        let mut num = NeumaierSum::new();
        let mut den = NeumaierSum::new();
        for (&j, &wj) in idx.iter().zip(w) {
            num += values[j] * wj;
            den += wj;
        }
        let den = den.value();
        (den > 0.0).then(|| num.value() / den)
    }

    pub fn m_in(&self, i: usize, y: &[f64]) -> Option<f64> {
        self.average(i, y)
    }

    pub fn dependency_set(&self, i: usize) -> Vec<usize> {
        self.graph.neighbors(i).0.to_vec()
    }

    /// Fits residuals for responses `y` on the smoother's design.
    pub fn fit_responses(&self, x: &Dataset, y: &[f64], trim: &TrimRegion) -> Result<ResidualFit> {
        if trim.dim() != self.kernel.dim() {
            return Err(Error::DimensionError {
                expected: self.kernel.dim(),
                got: trim.dim(),
            });
        }
        let scale = self.scale();
        let rows: Vec<(f64, Option<f64>)> = (0..self.n)
            .into_par_iter()
            .map(|i| (self.local_mass(i) / scale, self.m_in(i, y)))
            .collect();
        let mut fit = ResidualFit {
            b0: self.b0,
            m_hat: Vec::with_capacity(self.n),
            g_hat: Vec::with_capacity(self.n),
            residual: Vec::with_capacity(self.n),
            kept: Vec::with_capacity(self.n),
        };
        for (i, (g, m)) in rows.into_iter().enumerate() {
            fit.g_hat.push(g);
            fit.m_hat.push(m);
            fit.residual.push(m.map(|m| y[i] - m));
            fit.kept.push(m.is_some() && trim.contains(x.x(i)));
        }
        if fit.n_kept() == 0 {
            return Err(Error::AllTrimmed);
        }
        Ok(fit)
    }

    pub fn fit(&self, data: &Dataset, trim: &TrimRegion) -> Result<ResidualFit> {
        self.fit_responses(data, data.y(), trim)
    }
}

fn check_bandwidth(b0: f64) -> Result<()> {
    if b0 > 0.0 && b0.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidBandwidth(b0))
    }
}

fn check_index(data: &Dataset, i: usize) -> Result<()> {
    if i < data.len() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "index {i} out of range for {} observations",
            data.len()
        )))
    }
}

/// `g_n(x) = 1/(n b0^d) sum_i K0((X_i - x)/b0)` with the quadweight product kernel.
pub fn g_hat_n(data: &Dataset, b0: f64, x: &[f64]) -> Result<f64> {
    check_bandwidth(b0)?;
    let kernel = ProductKernel::quadweight(data.dim())?;
    if x.len() != data.dim() {
        return Err(Error::DimensionError {
            expected: data.dim(),
            got: x.len(),
        });
    }
    let sum: NeumaierSum = (0..data.len())
        .map(|i| kernel.eval_scaled_diff(data.x(i), x, b0))
        .sum();
    Ok(sum.value() / (data.len() as f64 * b0.powi(data.dim() as i32)))
}

/// `int K0(z) f(x + b0 z) dz` over the kernel window. When `f` is only
/// piecewise smooth across the faces of a box (for instance a density that
/// vanishes outside its support), passing that box as `edges` splits the
/// quadrature there.
pub fn window_integral<F: Fn(&[f64]) -> f64>(
    f: F,
    kernel: &ProductKernel,
    b0: f64,
    x: &[f64],
    edges: Option<(&[f64], &[f64])>,
    quad: &QuadratureSpec,
) -> Result<f64> {
    check_bandwidth(b0)?;
    let d = kernel.dim();
    if x.len() != d {
        return Err(Error::DimensionError {
            expected: d,
            got: x.len(),
        });
    }
    let breaks: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            let mut b = vec![-0.5, 0.5];
            if let Some((lo, hi)) = edges {
                for edge in [lo[k], hi[k]] {
                    let z = (edge - x[k]) / b0;
                    if z > -0.5 && z < 0.5 {
                        b.push(z);
                    }
                }
            }
            b.sort_by(f64::total_cmp);
            b
        })
        .collect();
    quad.integrate_box_pieces(
        |z| {
            let point: Vec<f64> = x.iter().zip(z).map(|(xi, zi)| xi + b0 * zi).collect();
            kernel.eval_unchecked(z) * f(&point)
        },
        &breaks,
    )
}

/// `E[g_n(x)] = int K0(z) g(x + b0 z) dz`, by quadrature against the design density `g`.
pub fn g_bar_n<G: Fn(&[f64]) -> f64>(
    g: G,
    kernel: &ProductKernel,
    b0: f64,
    x: &[f64],
    quad: &QuadratureSpec,
) -> Result<f64> {
    window_integral(g, kernel, b0, x, None, quad)
}

fn loo_terms(data: &Dataset, b0: f64, i: usize) -> Result<(Vec<usize>, Vec<f64>)> {
    check_bandwidth(b0)?;
    check_index(data, i)?;
    let kernel = ProductKernel::quadweight(data.dim())?;
    let xi = data.x(i);
    let mut idx = Vec::new();
    let mut w = Vec::new();
    for j in (0..data.len()).filter(|&j| j != i) {
        let k = kernel.eval_scaled_diff(data.x(j), xi, b0);
        if k != 0.0 {
            idx.push(j);
            w.push(k);
        }
    }
    Ok((idx, w))
}

/// `g_in` for a single observation, by a direct scan over the sample.
pub fn leave_one_out_g(data: &Dataset, b0: f64, i: usize) -> Result<f64> {
    let (_, w) = loo_terms(data, b0, i)?;
    let sum: NeumaierSum = w.into_iter().sum();
    Ok(sum.value() / (data.len() as f64 * b0.powi(data.dim() as i32)))
}

/// `m_in` for a single observation; `None` when no other observation lies
/// inside the kernel window.
pub fn nw_leave_one_out(data: &Dataset, b0: f64, i: usize) -> Result<Option<f64>> {
    let (idx, w) = loo_terms(data, b0, i)?;
    let mut num = NeumaierSum::new();
    let mut den = NeumaierSum::new();
    for (&j, &wj) in idx.iter().zip(&w) {
        num += data.y()[j] * wj;
        den += wj;
    }
    let den = den.value();
    Ok((den > 0.0).then(|| num.value() / den))
}

pub fn dependency_set(data: &Dataset, b0: f64, i: usize) -> Result<Vec<usize>> {
    Ok(loo_terms(data, b0, i)?.0)
}

/// Leave-one-out residuals for every observation with the quadweight product kernel.
pub fn fit_residuals(data: &Dataset, b0: f64, trim: &TrimRegion) -> Result<ResidualFit> {
    NwSmoother::quadweight(data, b0)?.fit(data, trim)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(x: &[f64], y: &[f64]) -> Dataset {
        Dataset::new(1, x.to_vec(), y.to_vec()).unwrap()
    }

    const K0_ZERO: f64 = 2.4609375;

    fn k0_at(u: f64) -> f64 {
        let w = 1.0 - 4.0 * u * u;
        2.0 * 315.0 / 256.0 * w * w * w * w
    }

    /// `K0(0.2) = 2 (315/256) (21/25)^4` as an exact rational.
    fn k0_02_exact() -> f64 {
        use num_rational::Ratio;
        let v = Ratio::<i128>::new(630, 256) * Ratio::new(21, 25).pow(4);
        *v.numer() as f64 / *v.denom() as f64
    }

    #[test]
    fn g_hat_examples() {
        // n = 1 is not a valid Dataset; a far-away second point leaves the sum unchanged
        // apart from the divisor.
        let data = one_d(&[0.0, 50.0], &[0.0, 0.0]);
        assert_eq!(g_hat_n(&data, 1.0, &[0.0]).unwrap(), K0_ZERO / 2.0);

        let data = one_d(&[0.0, 0.2], &[0.0, 0.0]);
        let expected = (K0_ZERO + k0_at(0.2)) / 2.0;
        assert!((g_hat_n(&data, 1.0, &[0.0]).unwrap() - expected).abs() < 1e-15);
        assert_eq!(k0_02_exact(), 1.2252303);
        assert!((k0_at(0.2) - k0_02_exact()).abs() < 1e-15);

        assert_eq!(g_hat_n(&data, 0.1, &[3.0]).unwrap(), 0.0);
    }

    #[test]
    fn leave_one_out_examples() {
        let data = one_d(&[0.0, 0.2], &[3.0, 5.0]);
        let g1 = leave_one_out_g(&data, 1.0, 0).unwrap();
        assert!((g1 - k0_02_exact() / 2.0).abs() < 1e-15);
        assert_eq!(g1, leave_one_out_g(&data, 1.0, 1).unwrap());
        assert_eq!(nw_leave_one_out(&data, 1.0, 0).unwrap(), Some(5.0));

        let data = one_d(&[-0.1, 0.0, 0.1], &[2.0, 9.0, 4.0]);
        assert_eq!(nw_leave_one_out(&data, 1.0, 1).unwrap(), Some(3.0));

        let data = one_d(&[0.0, 10.0], &[1.0, 2.0]);
        assert_eq!(nw_leave_one_out(&data, 1.0, 0).unwrap(), None);
        assert_eq!(leave_one_out_g(&data, 1.0, 0).unwrap(), 0.0);
    }

    #[test]
    fn dependency_set_examples() {
        let data = one_d(&[0.0, 0.2, 10.0], &[1.0, 2.0, 3.0]);
        assert_eq!(dependency_set(&data, 1.0, 0).unwrap(), vec![1]);
        assert!(dependency_set(&data, 1.0, 2).unwrap().is_empty());
        assert!(dependency_set(&data, 1.0, 3).is_err());
    }

    #[test]
    fn constant_response_gives_zero_residuals() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 / 49.0).collect();
        let data = one_d(&x, &vec![4.25; 50]);
        let trim = TrimRegion::new(vec![0.1], vec![0.9]).unwrap();
        let fit = fit_residuals(&data, 0.2, &trim).unwrap();
        for r in fit.residual.iter().flatten() {
            assert!(r.abs() < 1e-14);
        }
    }

    #[test]
    fn undefined_points_are_trimmed_and_never_nan() {
        let data = one_d(&[0.0, 0.01, 0.5, 0.99], &[1.0, 2.0, 3.0, 4.0]);
        let trim = TrimRegion::new(vec![-1.0], vec![2.0]).unwrap();
        let fit = fit_residuals(&data, 0.1, &trim).unwrap();
        assert_eq!(fit.m_hat[2], None);
        assert_eq!(fit.residual[2], None);
        assert_eq!(fit.g_hat[2], 0.0);
        assert!(!fit.kept[2]);
        assert_eq!(fit.n_undefined(), 2);
        assert_eq!(fit.n_kept(), 2);
        assert!(fit.g_hat.iter().all(|g| g.is_finite() && *g >= 0.0));
    }

    #[test]
    fn all_trimmed_is_an_error() {
        let data = one_d(&[0.0, 0.1, 0.2], &[1.0, 2.0, 3.0]);
        let trim = TrimRegion::new(vec![5.0], vec![6.0]).unwrap();
        assert!(matches!(fit_residuals(&data, 0.5, &trim), Err(Error::AllTrimmed)));
    }

    #[test]
    fn trim_region_validation() {
        assert!(TrimRegion::new(vec![0.5], vec![0.5]).is_err());
        assert!(TrimRegion::new(vec![0.0, 0.0], vec![1.0]).is_err());
        let t = TrimRegion::new(vec![0.1], vec![0.9]).unwrap();
        assert!(t.check_inside(&[0.0], &[1.0]).is_ok());
        assert!(t.check_inside(&[0.1], &[1.0]).is_err());
        assert!(t.contains(&[0.1]) && t.contains(&[0.9]) && !t.contains(&[0.95]));
    }

    #[test]
    fn g_bar_of_uniform_and_affine_densities() {
        let k = ProductKernel::quadweight(2).unwrap();
        let q = QuadratureSpec::gauss_legendre(1e-12);
        let v = g_bar_n(|_| 0.25, &k, 0.3, &[1.0, 1.0], &q).unwrap();
        assert!((v - 0.25).abs() < 1e-12);
        let affine = |p: &[f64]| 0.5 + 0.2 * p[0] - 0.1 * p[1];
        let v = g_bar_n(affine, &k, 0.4, &[0.3, 0.7], &q).unwrap();
        assert!((v - affine(&[0.3, 0.7])).abs() < 1e-12);
    }

    #[test]
    fn window_integral_splits_at_support_edges() {
        let k = ProductKernel::quadweight(1).unwrap();
        let q = QuadratureSpec::gauss_legendre(1e-13);
        let uniform = |p: &[f64]| if (0.0..=1.0).contains(&p[0]) { 1.0 } else { 0.0 };
        // Window [0.9, 1.3] covers the edge at 1; mass of K0 below z = 0.25.
        let v = window_integral(uniform, &k, 0.4, &[1.1], Some((&[0.0], &[1.0])), &q).unwrap();
        let below = q
            .integrate(|z| k.eval_unchecked(&[z]), -0.5, -0.25)
            .unwrap();
        assert!((v - below).abs() < 1e-13);
    }
}
