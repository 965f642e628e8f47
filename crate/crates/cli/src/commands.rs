use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use resdens::bandwidth::{AssumptionReport, PowerSchedule};
use resdens::data::{fmt_human, Dataset};
use resdens::density::{covering_grid, fhat_with};
use resdens::kernel::{validate_kernel_conditions, ProductKernel, UnivariateKernel};
use resdens::montecarlo::{generate_sample, run_rate_experiment, DgpConfig, DgpSpec, ExperimentConfig};
use resdens::quadrature::QuadratureSpec;
use resdens::smoother::{fit_residuals, TrimRegion};
use resdens::Result;

use crate::outcome::{CommandResult, USAGE_ERROR, VALIDATION_FAILURE};
use crate::{BandwidthArgs, EstimateArgs, KernelCheckArgs, RatesArgs, SimulateArgs};

/// Share of the covariate range cut from each side when no trim box is given.
const DEFAULT_TRIM_SHARE: f64 = 0.1;

fn current_dir(out: Option<&Path>) -> &Path {
    out.unwrap_or(Path::new("."))
}

/// Runs `body`, turning a library error into the matching failure.
fn guarded<F>(body: F) -> CommandResult
where
    F: FnOnce(&mut CommandResult) -> Result<()>,
{
    let mut result = CommandResult::new();
    if let Err(e) = body(&mut result) {
        result.fail_with(&e);
    }
    result
}

fn read_dataset(path: &Path) -> std::result::Result<Dataset, CommandResult> {
    let file = File::open(path)
        .map_err(|e| CommandResult::usage(format!("{}: {e}", path.display())))?;
    Dataset::read_csv(BufReader::new(file)).map_err(|e| {
        let mut r = CommandResult::new();
        r.fail_with(&e);
        r
    })
}

/// Per-coordinate bound: one value for every coordinate, or exactly `dim`.
fn corner(given: Option<&[f64]>, dim: usize, fallback: impl Fn(usize) -> f64) -> Result<Vec<f64>> {
    match given {
        None => Ok((0..dim).map(fallback).collect()),
        Some([v]) => Ok(vec![*v; dim]),
        Some(v) if v.len() == dim => Ok(v.to_vec()),
        Some(v) => Err(resdens::Error::DimensionError { expected: dim, got: v.len() }),
    }
}

fn default_trim(data: &Dataset, args: &EstimateArgs) -> Result<TrimRegion> {
    let dim = data.dim();
    let range = |j: usize| {
        (0..data.len()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
            (lo.min(data.x(i)[j]), hi.max(data.x(i)[j]))
        })
    };
    let lo = corner(args.trim_lo.as_deref(), dim, |j| {
        let (a, b) = range(j);
        a + DEFAULT_TRIM_SHARE * (b - a)
    })?;
    let hi = corner(args.trim_hi.as_deref(), dim, |j| {
        let (a, b) = range(j);
        b - DEFAULT_TRIM_SHARE * (b - a)
    })?;
    TrimRegion::new(lo, hi)
}

pub fn estimate(args: &EstimateArgs, out: Option<&Path>) -> CommandResult {
    let kernel: UnivariateKernel = match args.kernel.parse() {
        Ok(k) => k,
        Err(e) => return CommandResult::usage(e.to_string()),
    };
    let data = match read_dataset(&args.input) {
        Ok(d) => d,
        Err(r) => return r,
    };
    guarded(|r| {
        let trim = default_trim(&data, args)?;
        let fit = fit_residuals(&data, args.b0, &trim)?;
        r.line(format!("n = {}", data.len()));
        r.line(format!("n_kept = {}", fit.n_kept()));
        r.line(format!("n_undefined = {}", fit.n_undefined()));

        let kept: Vec<f64> = fit.kept_residuals().collect();
        let (lo, hi) = kept
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        let pad = args.b1 * kernel.support_radius();
        let grid = if kept.is_empty() {
            None
        } else {
            let lo = args.grid_lo.unwrap_or(lo - pad);
            let hi = args.grid_hi.unwrap_or(hi + pad);
            Some(covering_grid(lo, hi, args.b1, args.grid_points)?)
        };
        let curve = fhat_with(&fit, args.b1, grid.as_deref(), kernel)?;
        r.line(format!(
            "b0 = {}, b1 = {}, kernel = {}",
            fmt_human(args.b0),
            fmt_human(args.b1),
            kernel
        ));
        r.line(format!(
            "grid = [{}, {}] with {} points, mass = {}",
            fmt_human(curve.grid[0]),
            fmt_human(curve.grid[curve.grid.len() - 1]),
            curve.grid.len(),
            fmt_human(curve.mass())
        ));
        r.write_artifact(current_dir(out), "density.csv", |w| curve.write_csv(w));
        Ok(())
    })
}

pub fn kernel_check(args: &KernelCheckArgs, out: Option<&Path>) -> CommandResult {
    let k1: UnivariateKernel = match args.kernel.parse() {
        Ok(k) => k,
        Err(e) => return CommandResult::usage(e.to_string()),
    };
    guarded(|r| {
        let k0 = ProductKernel::quadweight(args.dim)?;
        let quad = QuadratureSpec::gauss_legendre(args.tolerance);
        let report = validate_kernel_conditions(&k0, k1, &quad)?;
        r.summary.extend(report.render().lines().map(str::to_string));
        if let Some(dir) = out {
            r.write_artifact(dir, "kernel_report.json", |w| {
                serde_json::to_writer_pretty(&mut *w, &report)?;
                writeln!(w)?;
                Ok(())
            });
        }
        let failed: Vec<&str> = report.failures().map(|c| c.id.as_str()).collect();
        if !failed.is_empty() {
            r.fail(VALIDATION_FAILURE, format!("{} failed: {}", k1, failed.join(", ")));
        }
        Ok(())
    })
}

pub fn rates(args: &RatesArgs, seed: Option<u64>, out: Option<&Path>) -> CommandResult {
    guarded(|r| {
        let mut config = ExperimentConfig::from_path(&args.config)?;
        if let Some(s) = seed {
            config.seed = s;
        }
        let report = run_rate_experiment(&config)?;
        r.warnings.extend(report.warnings.iter().cloned());
        r.line(format!(
            "{:>12} {:>7} {:>12} {:>12} {:>12} {:>12}",
            "scale", "n", "b0", "statistic", "envelope", "ratio"
        ));
        for p in &report.points {
            r.line(format!(
                "{:>12} {:>7} {:>12} {:>12} {:>12} {:>12}",
                fmt_human(p.scale),
                p.n,
                fmt_human(p.b0),
                fmt_human(p.statistic),
                fmt_human(p.envelope),
                fmt_human(p.ratio)
            ));
        }
        r.line(report.summary_line());
        let dir = current_dir(out);
        r.write_artifact(dir, "rate_report.json", |w| {
            w.write_all(report.to_json()?.as_bytes())?;
            writeln!(w)?;
            Ok(())
        });
        r.write_artifact(dir, "rate_points.csv", |w| report.write_points_csv(w));
        if !report.pass {
            r.fail(VALIDATION_FAILURE, format!("{} check failed", report.target.name()));
        }
        Ok(())
    })
}

pub fn validate_bandwidths(args: &BandwidthArgs, out: Option<&Path>) -> CommandResult {
    guarded(|r| {
        let b0 = PowerSchedule::new(args.c0, args.a)?;
        let b1 = PowerSchedule::new(args.c1, args.gamma)?;
        let report = AssumptionReport::for_power_laws(args.d, &b0, &b1)?;
        r.summary.extend(report.render().lines().map(str::to_string));
        if let Some(dir) = out {
            r.write_artifact(dir, "bandwidth_report.json", |w| {
                w.write_all(report.to_json()?.as_bytes())?;
                writeln!(w)?;
                Ok(())
            });
        }
        let violated: Vec<&str> = report.violations().map(|c| c.name.as_str()).collect();
        if !violated.is_empty() {
            r.fail(VALIDATION_FAILURE, format!("violated: {}", violated.join(", ")));
        }
        Ok(())
    })
}

pub fn simulate(args: &SimulateArgs, seed: Option<u64>, out: Option<&Path>) -> CommandResult {
    if args.n < 2 {
        return CommandResult::failed(USAGE_ERROR, "--n must be at least 2");
    }
    guarded(|r| {
        let dgp = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    resdens::Error::ConfigError(format!("{}: {e}", path.display()))
                })?;
                DgpConfig::parse(&text)?.build()?
            }
            None => DgpSpec::default(),
        };
        let seed = seed.unwrap_or(1);
        let data = generate_sample(&dgp, args.n, seed)?;
        r.line(format!("n = {}, d = {}, seed = {seed}", data.len(), data.dim()));
        r.write_artifact(current_dir(out), "sample.csv", |w| data.write_csv(w));
        Ok(())
    })
}
