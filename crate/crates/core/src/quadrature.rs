//! Deterministic one-dimensional and tensor-product quadrature.
//!
//! Two rules are available: composite Gauss-Legendre with panel doubling
//! until successive estimates agree, and adaptive Simpson with Richardson
//! correction. Both accept breakpoints so piecewise-polynomial integrands
//! (compactly supported kernels and their derivatives) are integrated on
//! pieces where they are smooth.

use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GL_ORDER: usize = 16;
const MAX_DOUBLINGS: u32 = 12;
const MAX_SIMPSON_DEPTH: u32 = 48;

fn gl_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        GaussLegendre::new(GL_ORDER)
            .expect("order >= 2")
            .into_node_weight_pairs()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureRule {
    GaussLegendre,
    AdaptiveSimpson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rule: QuadratureRule,
    /// Initial number of panels per smooth piece.
    pub panels: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rule: QuadratureRule::GaussLegendre,
            panels: 4,
            abs_tol: 1e-12,
            rel_tol: 1e-12,
        }
    }
}

impl QuadratureSpec {
    pub fn new(rule: QuadratureRule, panels: usize, abs_tol: f64, rel_tol: f64) -> Result<Self> {
        let spec = Self {
            rule,
            panels,
            abs_tol,
            rel_tol,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gauss_legendre(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.panels < 1 {
            return Err(Error::InvalidQuadrature("panels must be >= 1".into()));
        }
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
            return Err(Error::InvalidQuadrature(
                "abs_tol and rel_tol must be positive".into(),
            ));
        }
        Ok(())
    }

    fn accepts(&self, deviation: f64, estimate: f64) -> bool {
        deviation <= self.abs_tol.max(self.rel_tol * estimate.abs())
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<f64> {
        self.integrate_pieces(f, &[a, b])
    }

    /// Integral of `f` over `[breaks[0], breaks[last]]`, treating each
    /// consecutive pair of `breaks` as a separate smooth piece.
    pub fn integrate_pieces<F: Fn(f64) -> f64>(&self, f: F, breaks: &[f64]) -> Result<f64> {
        self.try_integrate_pieces(&|x| Ok(f(x)), breaks)
    }

    fn try_integrate_pieces(&self, f: &dyn Fn(f64) -> Result<f64>, breaks: &[f64]) -> Result<f64> {
        self.validate()?;
        if breaks.len() < 2 {
            return Err(Error::InvalidQuadrature(
                "at least two breakpoints are required".into(),
            ));
        }
        if breaks.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::InvalidQuadrature(
                "breakpoints must be non-decreasing".into(),
            ));
        }
        match self.rule {
            QuadratureRule::GaussLegendre => {
                let mut panels = self.panels;
                let mut previous = composite_gl(f, breaks, panels)?;
                let mut deviation = f64::INFINITY;
                for _ in 0..MAX_DOUBLINGS {
                    panels *= 2;
                    let current = composite_gl(f, breaks, panels)?;
                    deviation = (current - previous).abs();
                    if self.accepts(deviation, current) {
                        return Ok(current);
                    }
                    previous = current;
                }
                Err(Error::QuadratureError { deviation })
            }
            QuadratureRule::AdaptiveSimpson => {
                let pieces = (breaks.len() - 1) * self.panels;
                let tol = self.abs_tol / pieces as f64;
                let mut total = 0.0;
                for w in breaks.windows(2) {
                    for (lo, hi) in panel_bounds(w[0], w[1], self.panels) {
                        total += adaptive_simpson(f, lo, hi, tol)?;
                    }
                }
                Ok(total)
            }
        }
    }

    /// Tensor-product integral of `f` over the box `[lo, hi]`. The same
    /// breakpoints, given on the unit scale `[0, 1]` of each side, apply in
    /// every coordinate.
    pub fn integrate_box<F: Fn(&[f64]) -> f64>(
        &self,
        f: F,
        lo: &[f64],
        hi: &[f64],
        unit_breaks: &[f64],
    ) -> Result<f64> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionError {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        let breaks: Vec<Vec<f64>> = lo
            .iter()
            .zip(hi)
            .map(|(l, h)| unit_breaks.iter().map(|t| l + t * (h - l)).collect())
            .collect();
        self.integrate_box_pieces(f, &breaks)
    }

    /// Tensor-product integral with separate breakpoints for every axis;
    /// axis `k` runs from `breaks[k][0]` to `breaks[k][last]`.
    pub fn integrate_box_pieces<F: Fn(&[f64]) -> f64>(
        &self,
        f: F,
        breaks: &[Vec<f64>],
    ) -> Result<f64> {
        self.nested(&f, breaks, &[])
    }

    fn nested(&self, f: &dyn Fn(&[f64]) -> f64, breaks: &[Vec<f64>], prefix: &[f64]) -> Result<f64> {
        let axis = prefix.len();
        if axis == breaks.len() {
            return Ok(f(prefix));
        }
        self.try_integrate_pieces(
            &|x| {
                let mut point = Vec::with_capacity(breaks.len());
                point.extend_from_slice(prefix);
                point.push(x);
                self.nested(f, breaks, &point)
            },
            &breaks[axis],
        )
    }
}

fn panel_bounds(a: f64, b: f64, panels: usize) -> impl Iterator<Item = (f64, f64)> {
    let h = (b - a) / panels as f64;
    (0..panels).map(move |p| {
        let lo = a + p as f64 * h;
        let hi = if p + 1 == panels { b } else { lo + h };
        (lo, hi)
    })
}

fn composite_gl(f: &dyn Fn(f64) -> Result<f64>, breaks: &[f64], panels: usize) -> Result<f64> {
    let rule = gl_rule();
    let mut total = 0.0;
    for w in breaks.windows(2) {
        if w[0] == w[1] {
            continue;
        }
        for (lo, hi) in panel_bounds(w[0], w[1], panels) {
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            let mut s = 0.0;
            for &(x, wt) in rule {
                s += wt * f(mid + half * x)?;
            }
            total += half * s;
        }
    }
    Ok(total)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> Result<f64>, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a)?;
    let fb = f(b)?;
    let fm = f(0.5 * (a + b))?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, (a, fa), (b, fb), fm, whole, tol, MAX_SIMPSON_DEPTH)
}

fn simpson_step(
    f: &dyn Fn(f64) -> Result<f64>,
    (a, fa): (f64, f64),
    (b, fb): (f64, f64),
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let flm = f(0.5 * (a + m))?;
    let frm = f(0.5 * (m + b))?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::QuadratureError {
            deviation: delta.abs() / 15.0,
        });
    }
    let l = simpson_step(f, (a, fa), (m, fm), flm, left, 0.5 * tol, depth - 1)?;
    let r = simpson_step(f, (m, fm), (b, fb), frm, right, 0.5 * tol, depth - 1)?;
    Ok(l + r)
}
