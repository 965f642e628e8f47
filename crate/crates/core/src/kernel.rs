//! Compactly supported smoothing kernels and their certification.
//!
//! The density stage uses a univariate kernel `K1` that must be three times
//! continuously differentiable on the whole real line; the regression stage
//! uses a `d`-variate product kernel `K0` supported in `[-1/2, 1/2]^d`.
//!
//! | Kernel      | Formula                      | Support | C^k on R |
//! |-------------|------------------------------|---------|----------|
//! | Quadweight  | `(315/256)(1 - u^2)^4`       | [-1, 1] | k = 3    |
//! | Triweight   | `(35/32)(1 - u^2)^3`         | [-1, 1] | k = 2    |
//!
//! Triweight is kept only as a negative example: its third derivative jumps
//! by `-48 * 35/32` at `u = +-1`, which the continuity scan detects.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::data::fmt_human;
use crate::error::{Error, Result};
use crate::quadrature::QuadratureSpec;

const QUAD_C: f64 = 315.0 / 256.0;
const TRI_C: f64 = 35.0 / 32.0;

/// Step of the grid used for the continuity scan.
pub const CONTINUITY_STEP: f64 = 1e-4;
/// Lipschitz budget: a jump larger than `budget * step` between adjacent
/// grid points is reported as a discontinuity.
pub const CONTINUITY_BUDGET: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UnivariateKernel {
    #[default]
    Quadweight,
    Triweight,
}

impl UnivariateKernel {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Quadweight => "quadweight",
            Self::Triweight => "triweight",
        }
    }

    pub fn support_radius(&self) -> f64 {
        1.0
    }

    /// Value of the `order`-th derivative at `v`.
    pub fn eval(&self, order: usize, v: f64) -> Result<f64> {
        match order {
            0 => Ok(self.value(v)),
            1 => Ok(self.d1(v)),
            2 => Ok(self.d2(v)),
            3 => Ok(self.d3(v)),
            _ => Err(Error::InvalidOrder(order)),
        }
    }

    /// Same as [`eval`](Self::eval) for an order already known to be in 0..=3.
    #[inline]
    pub fn derivative(&self, order: Derivative, v: f64) -> f64 {
        match order {
            Derivative::Zero => self.value(v),
            Derivative::One => self.d1(v),
            Derivative::Two => self.d2(v),
            Derivative::Three => self.d3(v),
        }
    }

    #[inline]
    pub fn value(&self, v: f64) -> f64 {
        if v.abs() > 1.0 {
            return 0.0;
        }
        let w = 1.0 - v * v;
        match self {
            Self::Quadweight => QUAD_C * (w * w) * (w * w),
            Self::Triweight => TRI_C * w * w * w,
        }
    }

    #[inline]
    pub fn d1(&self, v: f64) -> f64 {
        if v.abs() > 1.0 {
            return 0.0;
        }
        let w = 1.0 - v * v;
        match self {
            Self::Quadweight => -8.0 * QUAD_C * v * w * w * w,
            Self::Triweight => -6.0 * TRI_C * v * w * w,
        }
    }

    #[inline]
    pub fn d2(&self, v: f64) -> f64 {
        if v.abs() > 1.0 {
            return 0.0;
        }
        let v2 = v * v;
        let w = 1.0 - v2;
        match self {
            Self::Quadweight => -8.0 * QUAD_C * w * w * (1.0 - 7.0 * v2),
            Self::Triweight => -6.0 * TRI_C * w * (1.0 - 5.0 * v2),
        }
    }

    #[inline]
    pub fn d3(&self, v: f64) -> f64 {
        if v.abs() > 1.0 {
            return 0.0;
        }
        let v2 = v * v;
        match self {
            Self::Quadweight => 48.0 * QUAD_C * v * (1.0 - v2) * (3.0 - 7.0 * v2),
            Self::Triweight => 24.0 * TRI_C * v * (3.0 - 5.0 * v2),
        }
    }

    /// `max |K1'''|` over the real line, attained at a stationary point of
    /// the odd polynomial `K1'''` or at the support end.
    pub fn max_abs_d3(&self) -> f64 {
        let stationary_v2: Vec<f64> = match self {
            // 3 - 30 v^2 + 35 v^4 = 0
            Self::Quadweight => {
                let disc = (900.0f64 - 420.0).sqrt();
                vec![(30.0 - disc) / 70.0, (30.0 + disc) / 70.0]
            }
            // 3 - 15 v^2 = 0
            Self::Triweight => vec![0.2],
        };
        stationary_v2
            .into_iter()
            .map(f64::sqrt)
            .chain([0.0, self.support_radius()])
            .map(|v| self.d3(v).abs())
            .fold(0.0, f64::max)
    }

    /// Points between which the kernel is a single polynomial.
    pub fn breakpoints(&self) -> [f64; 2] {
        let r = self.support_radius();
        [-r, r]
    }
}

impl fmt::Display for UnivariateKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UnivariateKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quadweight" => Ok(Self::Quadweight),
            "triweight" => Ok(Self::Triweight),
            other => Err(Error::InvalidArgument(format!("unknown kernel '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivative {
    Zero,
    One,
    Two,
    Three,
}

impl Derivative {
    pub const ALL: [Derivative; 4] = [Self::Zero, Self::One, Self::Two, Self::Three];

    pub fn index(self) -> usize {
        match self {
            Self::Zero => 0,
            Self::One => 1,
            Self::Two => 2,
            Self::Three => 3,
        }
    }
}

impl TryFrom<usize> for Derivative {
    type Error = Error;

    fn try_from(order: usize) -> Result<Self> {
        Self::ALL.get(order).copied().ok_or(Error::InvalidOrder(order))
    }
}

/// `K0(z) = prod_j s * K(s * z_j)` with `s = 2 R`, so that the support is
/// exactly `[-1/2, 1/2]^d` whatever the base kernel's radius `R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProductKernel {
    dim: usize,
    base: UnivariateKernel,
}

impl ProductKernel {
    pub fn new(dim: usize, base: UnivariateKernel) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        Ok(Self { dim, base })
    }

    pub fn quadweight(dim: usize) -> Result<Self> {
        Self::new(dim, UnivariateKernel::Quadweight)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn base(&self) -> UnivariateKernel {
        self.base
    }

    fn scale(&self) -> f64 {
        2.0 * self.base.support_radius()
    }

    /// Rescaled univariate factor `s * K(s * u)`.
    #[inline]
    pub fn factor(&self, u: f64) -> f64 {
        let s = self.scale();
        s * self.base.value(s * u)
    }

    pub fn eval(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.dim {
            return Err(Error::DimensionError {
                expected: self.dim,
                got: z.len(),
            });
        }
        Ok(self.eval_unchecked(z))
    }

    #[inline]
    pub fn eval_unchecked(&self, z: &[f64]) -> f64 {
        let mut acc = 1.0;
        for &zj in z {
            if zj.abs() >= 0.5 {
                return 0.0;
            }
            acc *= self.factor(zj);
        }
        acc
    }

    /// `K0((a - b) / h)` without allocating the scaled difference.
    #[inline]
    pub fn eval_scaled_diff(&self, a: &[f64], b: &[f64], h: f64) -> f64 {
        let mut acc = 1.0;
        for (&aj, &bj) in a.iter().zip(b) {
            let z = (aj - bj) / h;
            if z.abs() >= 0.5 {
                return 0.0;
            }
            acc *= self.factor(z);
        }
        acc
    }

    /// Breakpoints of one factor on the unit scale of `[-1/2, 1/2]`.
    pub fn unit_breakpoints(&self) -> [f64; 2] {
        [0.0, 1.0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentCondition {
    pub id: String,
    pub target: f64,
    pub computed: f64,
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl MomentCondition {
    fn new(id: impl Into<String>, target: f64, computed: f64, tolerance: f64) -> Self {
        let deviation = (computed - target).abs();
        Self {
            id: id.into(),
            target,
            computed,
            deviation,
            tolerance,
            pass: deviation <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub k0: String,
    pub k1: String,
    pub conditions: Vec<MomentCondition>,
}

impl MomentReport {
    pub fn all_pass(&self) -> bool {
        self.conditions.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &MomentCondition> {
        self.conditions.iter().filter(|c| !c.pass)
    }

    pub fn render(&self) -> String {
        let mut out = format!("K0 = product of {}, K1 = {}\n", self.k0, self.k1);
        out.push_str(&format!(
            "{:<28} {:>14} {:>14} {:>12} {:>12}  {}\n",
            "condition", "target", "computed", "deviation", "tolerance", "status"
        ));
        for c in &self.conditions {
            out.push_str(&format!(
                "{:<28} {:>14} {:>14} {:>12} {:>12}  {}\n",
                c.id,
                fmt_human(c.target),
                fmt_human(c.computed),
                fmt_human(c.deviation),
                fmt_human(c.tolerance),
                if c.pass { "PASS" } else { "FAIL" }
            ));
        }
        out
    }
}

/// Largest jump between adjacent points of a grid of spacing `step` over
/// `[-(R + pad), R + pad]`, and where it occurs.
pub fn max_adjacent_jump(kernel: UnivariateKernel, order: Derivative, step: f64) -> (f64, f64) {
    let r = kernel.support_radius() + 0.25;
    let count = (2.0 * r / step).ceil() as usize;
    let mut worst = (0.0, 0.0);
    let mut prev = kernel.derivative(order, -r);
    for k in 1..=count {
        let v = -r + k as f64 * step;
        let cur = kernel.derivative(order, v);
        let jump = (cur - prev).abs();
        if jump > worst.0 {
            worst = (jump, v);
        }
        prev = cur;
    }
    // The support end is where polynomial kernels can break; probe it
    // directly so the verdict does not depend on grid alignment.
    for edge in [-kernel.support_radius(), kernel.support_radius()] {
        for (a, b) in [(edge - step, edge), (edge, edge + step)] {
            let jump = (kernel.derivative(order, b) - kernel.derivative(order, a)).abs();
            if jump > worst.0 {
                worst = (jump, edge);
            }
        }
    }
    worst
}

/// Certifies the integral, symmetry and smoothness conditions required of
/// the kernel pair by deterministic quadrature.
pub fn validate_kernel_conditions(
    k0: &ProductKernel,
    k1: UnivariateKernel,
    quad: &QuadratureSpec,
) -> Result<MomentReport> {
    quad.validate()?;
    let tol = quad.abs_tol;
    let d = k0.dim();
    let lo = vec![-0.5; d];
    let hi = vec![0.5; d];
    let unit = k0.unit_breakpoints();
    let mut conditions = Vec::new();

    let mass0 = quad.integrate_box(|z| k0.eval_unchecked(z), &lo, &hi, &unit)?;
    conditions.push(MomentCondition::new("int K0 = 1", 1.0, mass0, tol));
    for j in 0..d {
        let m = quad.integrate_box(|z| z[j] * k0.eval_unchecked(z), &lo, &hi, &unit)?;
        conditions.push(MomentCondition::new(format!("int z_{} K0 = 0", j + 1), 0.0, m, tol));
    }
    let sym0 = symmetric_gap(|u| k0.factor(u), 0.5);
    conditions.push(MomentCondition::new("K0 symmetric", 0.0, sym0, 0.0));

    let breaks = k1.breakpoints();
    let mass1 = quad.integrate_pieces(|v| k1.value(v), &breaks)?;
    conditions.push(MomentCondition::new("int K1 = 1", 1.0, mass1, tol));
    for order in [Derivative::One, Derivative::Two, Derivative::Three] {
        let m = quad.integrate_pieces(|v| k1.derivative(order, v), &breaks)?;
        conditions.push(MomentCondition::new(
            format!("int K1^({}) = 0", order.index()),
            0.0,
            m,
            tol,
        ));
    }
    for order in [Derivative::Two, Derivative::Three] {
        let m = quad.integrate_pieces(|v| v * k1.derivative(order, v), &breaks)?;
        conditions.push(MomentCondition::new(
            format!("int v K1^({}) = 0", order.index()),
            0.0,
            m,
            tol,
        ));
    }
    let sym1 = symmetric_gap(|v| k1.value(v), k1.support_radius());
    conditions.push(MomentCondition::new("K1 symmetric", 0.0, sym1, 0.0));

    let allowed = CONTINUITY_BUDGET * CONTINUITY_STEP;
    for order in Derivative::ALL {
        let (jump, _) = max_adjacent_jump(k1, order, CONTINUITY_STEP);
        let mut c = MomentCondition::new(
            format!("K1^({}) continuous", order.index()),
            0.0,
            jump,
            allowed,
        );
        c.pass = jump <= allowed;
        conditions.push(c);
    }

    Ok(MomentReport {
        k0: k0.base().name().to_string(),
        k1: k1.name().to_string(),
        conditions,
    })
}

fn symmetric_gap<F: Fn(f64) -> f64>(f: F, radius: f64) -> f64 {
    (0..=2000)
        .map(|k| radius * 1.1 * k as f64 / 2000.0)
        .map(|v| (f(v) - f(-v)).abs())
        .fold(0.0, f64::max)
}

/// Which of the six kernel-moment integrals to evaluate: the derivative
/// order of `K1` and whether it enters squared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MomentIntegral {
    pub order: Derivative,
    pub squared: bool,
}

impl MomentIntegral {
    /// The six integrals in order, each with the exponent of `b1` bounding it.
    pub const BOUNDS: [(MomentIntegral, f64); 6] = [
        (MomentIntegral { order: Derivative::One, squared: true }, 1.0),
        (MomentIntegral { order: Derivative::One, squared: false }, 2.0),
        (MomentIntegral { order: Derivative::Two, squared: true }, 1.0),
        (MomentIntegral { order: Derivative::Two, squared: false }, 3.0),
        (MomentIntegral { order: Derivative::Three, squared: true }, 1.0),
        (MomentIntegral { order: Derivative::Three, squared: false }, 3.0),
    ];

    pub fn label(&self) -> String {
        format!(
            "K1^({}){}",
            self.order.index(),
            if self.squared { "^2" } else { "" }
        )
    }
}

/// `eps^p` with the real power for integral `p`, and `|eps|^p` otherwise.
#[inline]
pub fn signed_power(eps: f64, p: f64) -> f64 {
    if p == p.trunc() && p.abs() <= 16.0 {
        eps.powi(p as i32)
    } else {
        eps.abs().powf(p)
    }
}

/// `h_p(e) = e^p f(e)`.
pub fn h_p<F: Fn(f64) -> f64>(f: &F, p: f64, e: f64) -> f64 {
    signed_power(e, p) * f(e)
}

/// `int K1^(l)((eps - e)/b1)^{1 or 2} eps^p f(eps) d eps`, computed in the
/// variable `v = (eps - e)/b1` over the kernel support.
#[allow(clippy::too_many_arguments)]
pub fn kernel_moment_integral<F: Fn(f64) -> f64>(
    kernel: UnivariateKernel,
    order: usize,
    squared: bool,
    p: f64,
    f: F,
    e: f64,
    b1: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let order = match order {
        1..=3 => Derivative::try_from(order)?,
        _ => return Err(Error::InvalidOrder(order)),
    };
    if !(b1 > 0.0) || !b1.is_finite() {
        return Err(Error::InvalidBandwidth(b1));
    }
    if !(0.0..=2.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p must lie in [0, 2], got {p}")));
    }
    let integral = quad.integrate_pieces(
        |v| {
            let k = kernel.derivative(order, v);
            let k = if squared { k * k } else { k };
            k * h_p(&f, p, e + b1 * v)
        },
        &kernel.breakpoints(),
    )?;
    Ok(b1 * integral)
}
