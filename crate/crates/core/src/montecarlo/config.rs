//! Flat experiment configuration, read from TOML or JSON.
//!
//! Every key is top level. A file whose first non-blank character is `{` is
//! parsed as JSON, anything else as TOML.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dgp::{DesignLaw, DgpSpec, ErrorLaw, RegressionFn};
use super::experiment::{CheckKind, Scale, Target};
use super::rate::MIN_POINTS;
use crate::bandwidth::PowerSchedule;
use crate::error::{Error, Result};
use crate::smoother::TrimRegion;

/// Smallest replication count for targets aggregated by a median.
pub const MIN_MEDIAN_REPLICATIONS: usize = 20;

/// Data-generating process keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DgpConfig {
    pub dim: usize,
    /// `constant`, `affine`, `quadratic` or `sinusoid`.
    pub regression: String,
    pub m_value: f64,
    pub m_intercept: f64,
    pub m_slope: f64,
    /// `uniform` or `truncated-normal`; same law on every coordinate.
    pub design: String,
    pub design_lo: f64,
    pub design_hi: f64,
    pub design_mean: f64,
    pub design_sd: f64,
    /// `normal`, `laplace` or `beta`.
    pub errors: String,
    /// Standard deviation (normal), scale (laplace) or half width (beta).
    pub error_scale: f64,
    /// Beta shape parameter.
    pub error_shape: f64,
    pub trim_lo: f64,
    pub trim_hi: f64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            regression: "quadratic".into(),
            m_value: 0.0,
            m_intercept: 0.0,
            m_slope: 1.0,
            design: "uniform".into(),
            design_lo: 0.0,
            design_hi: 1.0,
            design_mean: 0.5,
            design_sd: 0.25,
            errors: "normal".into(),
            error_scale: 0.5,
            error_shape: 4.0,
            trim_lo: 0.1,
            trim_hi: 0.9,
        }
    }
}

#[derive(Deserialize)]
struct DgpFile {
    #[serde(flatten)]
    dgp: DgpConfig,
    #[serde(flatten)]
    unknown: BTreeMap<String, serde_json::Value>,
}

fn parse_text<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| Error::ConfigError(e.to_string()))
    } else {
        toml::from_str(text).map_err(|e| Error::ConfigError(e.to_string()))
    }
}

fn reject_unknown(unknown: &BTreeMap<String, serde_json::Value>) -> Result<()> {
    match unknown.keys().next() {
        Some(key) => Err(Error::ConfigError(format!("unknown key '{key}'"))),
        None => Ok(()),
    }
}

impl DgpConfig {
    /// Reads the data-generating keys alone, rejecting any other key.
    pub fn parse(text: &str) -> Result<Self> {
        let file: DgpFile = parse_text(text)?;
        reject_unknown(&file.unknown)?;
        file.dgp.build()?;
        Ok(file.dgp)
    }

    pub fn build(&self) -> Result<DgpSpec> {
        let regression = match self.regression.as_str() {
            "constant" => RegressionFn::Constant { value: self.m_value },
            "affine" => RegressionFn::Affine {
                intercept: self.m_intercept,
                slope: self.m_slope,
            },
            "quadratic" => RegressionFn::Quadratic,
            "sinusoid" => RegressionFn::Sinusoid,
            other => return Err(Error::ConfigError(format!("unknown regression '{other}'"))),
        };
        let design = match self.design.as_str() {
            "uniform" => DesignLaw::Uniform {
                lo: self.design_lo,
                hi: self.design_hi,
            },
            "truncated-normal" => DesignLaw::TruncatedNormal {
                mean: self.design_mean,
                sd: self.design_sd,
                lo: self.design_lo,
                hi: self.design_hi,
            },
            other => return Err(Error::ConfigError(format!("unknown design '{other}'"))),
        };
        let errors = match self.errors.as_str() {
            "normal" => ErrorLaw::Normal { sd: self.error_scale },
            "laplace" => ErrorLaw::Laplace {
                scale: self.error_scale,
            },
            "beta" => ErrorLaw::Beta {
                alpha: self.error_shape,
                half_width: self.error_scale,
            },
            other => return Err(Error::ConfigError(format!("unknown error law '{other}'"))),
        };
        if self.dim == 0 {
            return Err(Error::ConfigError("dim must be >= 1".into()));
        }
        let trim = TrimRegion::new(vec![self.trim_lo; self.dim], vec![self.trim_hi; self.dim])
            .map_err(|e| Error::ConfigError(e.to_string()))?;
        let dgp = DgpSpec {
            dim: self.dim,
            regression,
            design,
            errors,
            trim,
        };
        dgp.validate()?;
        Ok(dgp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub target: Target,
    #[serde(flatten)]
    pub dgp: DgpConfig,
    /// Values of the moving scale, strictly monotone.
    pub grid: Vec<f64>,
    /// Moving scale; defaults to the target's natural one.
    #[serde(default)]
    pub scale: Option<Scale>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub b0: Option<f64>,
    #[serde(default)]
    pub b1: Option<f64>,
    /// `b0 = b0_c * n^-b0_a` when `n` moves.
    #[serde(default)]
    pub b0_c: Option<f64>,
    #[serde(default)]
    pub b0_a: Option<f64>,
    /// `b1 = b1_c * n^-b1_gamma` when `n` moves.
    #[serde(default)]
    pub b1_c: Option<f64>,
    #[serde(default)]
    pub b1_gamma: Option<f64>,
    /// Density argument for the Taylor sums.
    #[serde(default)]
    pub e: f64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Points per axis of the trim grid for suprema over `x`.
    #[serde(default = "default_x_points")]
    pub x_points: usize,
    #[serde(default)]
    pub check: Option<CheckKind>,
    #[serde(default)]
    pub claimed: Option<f64>,
    /// Half width of the slope band.
    #[serde(default)]
    pub tolerance: Option<f64>,
    /// Largest allowed max/min of statistic over envelope.
    #[serde(default)]
    pub max_ratio: Option<f64>,
    #[serde(flatten)]
    unknown: BTreeMap<String, serde_json::Value>,
}

fn default_replications() -> usize {
    50
}

fn default_seed() -> u64 {
    1
}

fn default_x_points() -> usize {
    33
}

impl ExperimentConfig {
    pub fn new(target: Target, grid: Vec<f64>) -> Self {
        Self {
            target,
            dgp: DgpConfig::default(),
            grid,
            scale: None,
            n: None,
            b0: None,
            b1: None,
            b0_c: None,
            b0_a: None,
            b1_c: None,
            b1_gamma: None,
            e: 0.0,
            replications: default_replications(),
            seed: default_seed(),
            x_points: default_x_points(),
            check: None,
            claimed: None,
            tolerance: None,
            max_ratio: None,
            unknown: BTreeMap::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = parse_text(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ConfigError(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn moving_scale(&self) -> Scale {
        self.scale.unwrap_or_else(|| self.target.default_scale())
    }

    pub fn validate(&self) -> Result<()> {
        reject_unknown(&self.unknown)?;
        self.dgp.build()?;
        if self.grid.len() < MIN_POINTS {
            return Err(Error::ConfigError(format!(
                ">= {MIN_POINTS} grid points required, got {}",
                self.grid.len()
            )));
        }
        let increasing = self.grid.windows(2).all(|w| w[0] < w[1]);
        let decreasing = self.grid.windows(2).all(|w| w[0] > w[1]);
        if !(increasing || decreasing) || self.grid.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::ConfigError(
                "grid must be positive and strictly monotone".into(),
            ));
        }
        if self.target.uses_median() && self.replications < MIN_MEDIAN_REPLICATIONS {
            return Err(Error::ConfigError(format!(
                ">= {MIN_MEDIAN_REPLICATIONS} replications required for median targets, got {}",
                self.replications
            )));
        }
        if self.replications < 2 {
            return Err(Error::ConfigError("replications must be >= 2".into()));
        }
        if self.x_points < 2 {
            return Err(Error::ConfigError("x_points must be >= 2".into()));
        }
        for v in self.grid.iter().copied() {
            self.point(v)?;
        }
        Ok(())
    }

    pub fn dgp_spec(&self) -> Result<DgpSpec> {
        self.dgp.build()
    }

    fn schedule(c: Option<f64>, a: Option<f64>, name: &str) -> Result<PowerSchedule> {
        match (c, a) {
            (Some(c), Some(a)) => PowerSchedule::new(c, a).map_err(|e| Error::ConfigError(e.to_string())),
            _ => Err(Error::ConfigError(format!(
                "{name}_c and the {name} exponent are required when n moves"
            ))),
        }
    }

    /// `(n, b0, b1)` at one grid value.
    pub fn point(&self, value: f64) -> Result<(usize, f64, f64)> {
        let need = |v: Option<f64>, name: &str| {
            v.filter(|x| *x > 0.0 && x.is_finite())
                .ok_or_else(|| Error::ConfigError(format!("positive '{name}' is required")))
        };
        let needs_b1 = self.target.uses_b1();
        let b1_or_unused = |v: Option<f64>| if needs_b1 { need(v, "b1") } else { Ok(v.unwrap_or(f64::NAN)) };
        match self.moving_scale() {
            Scale::B0 => {
                let n = self.n.ok_or_else(|| Error::ConfigError("'n' is required".into()))?;
                Ok((n, value, b1_or_unused(self.b1)?))
            }
            Scale::B1 => {
                let n = self.n.ok_or_else(|| Error::ConfigError("'n' is required".into()))?;
                Ok((n, need(self.b0, "b0")?, value))
            }
            Scale::N => {
                if value.fract() != 0.0 || value < 2.0 {
                    return Err(Error::ConfigError(format!("sample size {value} is not an integer >= 2")));
                }
                let n = value as usize;
                let b0 = match self.b0 {
                    Some(b) => b,
                    None => Self::schedule(self.b0_c, self.b0_a, "b0")?.value(value),
                };
                let b1 = if needs_b1 {
                    match self.b1 {
                        Some(b) => b,
                        None => Self::schedule(self.b1_c, self.b1_gamma, "b1")?.value(value),
                    }
                } else {
                    f64::NAN
                };
                Ok((n, b0, b1))
            }
        }
    }

    pub fn check_kind(&self) -> CheckKind {
        self.check.unwrap_or_else(|| self.target.default_check())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_and_json_agree() {
        let toml = r#"
target = "smoothing-bias"
n = 500
grid = [0.05, 0.1, 0.2, 0.3]
replications = 20
errors = "laplace"
error_scale = 0.3
"#;
        let json = r#"{"target": "smoothing-bias", "n": 500, "grid": [0.05, 0.1, 0.2, 0.3],
            "replications": 20, "errors": "laplace", "error_scale": 0.3}"#;
        let a = ExperimentConfig::parse(toml).unwrap();
        let b = ExperimentConfig::parse(json).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dgp_spec().unwrap().errors, ErrorLaw::Laplace { scale: 0.3 });
        assert_eq!(a.moving_scale(), Scale::B0);
    }

    #[test]
    fn rejects_bad_configs() {
        let short = "target = \"smoothing-bias\"\nn = 100\ngrid = [0.1, 0.2, 0.3]\n";
        let err = ExperimentConfig::parse(short).unwrap_err().to_string();
        assert!(err.contains(">= 4 grid points required"), "{err}");
        let unknown = "target = \"smoothing-bias\"\nn = 100\ngrid = [0.1, 0.2, 0.3, 0.4]\nbandwith = 3\n";
        assert!(ExperimentConfig::parse(unknown).unwrap_err().to_string().contains("bandwith"));
        let few = "target = \"smoothing-bias\"\nn = 100\ngrid = [0.1, 0.2, 0.3, 0.4]\nreplications = 5\n";
        assert!(ExperimentConfig::parse(few).is_err());
        let no_b1 = "target = \"noise-sum-variance\"\nn = 100\ngrid = [0.1, 0.2, 0.3, 0.4]\n";
        assert!(ExperimentConfig::parse(no_b1).is_err());
        let bad_law = "target = \"expected-bias\"\nn = 100\ngrid = [0.1, 0.2, 0.3, 0.4]\nerrors = \"cauchy\"\n";
        assert!(ExperimentConfig::parse(bad_law).is_err());
    }

    #[test]
    fn design_keys_alone() {
        let d = DgpConfig::parse("regression = \"sinusoid\"\nerrors = \"beta\"\nerror_scale = 0.8\n").unwrap();
        assert_eq!(d.build().unwrap().regression, RegressionFn::Sinusoid);
        assert!(DgpConfig::parse("target = \"noise-sum-variance\"\n").is_err());
    }

    #[test]
    fn sample_size_grid_uses_schedules() {
        let text = r#"
target = "design-noise"
grid = [500, 1000, 2000, 4000]
b0_c = 0.5
b0_a = 0.2
"#;
        let c = ExperimentConfig::parse(text).unwrap();
        let (n, b0, _) = c.point(1000.0).unwrap();
        assert_eq!(n, 1000);
        assert!((b0 - 0.5 * 1000f64.powf(-0.2)).abs() < 1e-15);
    }
}
