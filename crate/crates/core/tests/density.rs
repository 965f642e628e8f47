use proptest::prelude::*;

use resdens::density::{covering_grid, fhat, kde, mise, oracle_kde};
use resdens::kernel::UnivariateKernel;
use resdens::montecarlo::experiment::median;
use resdens::montecarlo::{generate_sample, DgpSpec};
use resdens::smoother::{fit_residuals, ResidualFit};

fn fit_from(residuals: &[f64], kept: &[bool]) -> ResidualFit {
    let n = residuals.len();
    ResidualFit {
        b0: 0.1,
        m_hat: vec![Some(0.0); n],
        g_hat: vec![1.0; n],
        residual: residuals.iter().map(|r| Some(*r)).collect(),
        kept: kept.to_vec(),
    }
}

proptest! {
    #[test]
    fn unit_mass_and_nonnegative(
        residuals in prop::collection::vec(-5.0f64..5.0, 1..60),
        b1 in 0.01f64..2.0,
    ) {
        let fit = fit_from(&residuals, &vec![true; residuals.len()]);
        let curve = fhat(&fit, b1, None).unwrap();
        prop_assert!((curve.mass() - 1.0).abs() <= 1e-6, "{}", curve.mass());
        prop_assert!(curve.values.iter().all(|v| *v >= 0.0));
        let step = curve.grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        prop_assert!(step <= b1 / 20.0 * (1.0 + 1e-9));
    }

    #[test]
    fn symmetric_residuals_give_symmetric_curves(
        half in prop::collection::vec(0.0f64..3.0, 1..20),
        b1 in 0.05f64..1.0,
    ) {
        let mut residuals = half.clone();
        residuals.extend(half.iter().map(|r| -r));
        let fit = fit_from(&residuals, &vec![true; residuals.len()]);
        let grid: Vec<f64> = (-40..=40).map(|k| k as f64 * 0.1).collect();
        let curve = fhat(&fit, b1, Some(&grid)).unwrap();
        for k in 0..grid.len() {
            let mirror = curve.values[grid.len() - 1 - k];
            prop_assert!((curve.values[k] - mirror).abs() <= 1e-12 * (1.0 + mirror));
        }
    }
}

#[test]
fn oracle_examples() {
    let c = oracle_kde(&[0.0], 1.0, Some(&[-1.5, 0.0, 1.0, 2.0])).unwrap();
    assert_eq!(c.values, vec![0.0, 315.0 / 256.0, 0.0, 0.0]);
}

#[test]
fn oracle_mise_falls_with_sample_size() {
    let dgp = DgpSpec {
        errors: resdens::montecarlo::ErrorLaw::Normal { sd: 1.0 },
        ..DgpSpec::default()
    };
    let grid = covering_grid(-8.0, 8.0, 0.3, 512).unwrap();
    let phi = |e: f64| dgp.errors.pdf(e);
    let loss = |n: usize| {
        let losses: Vec<f64> = (1..=10u64)
            .map(|seed| {
                let eps = dgp.draw_errors(seed, 0, n);
                mise(&oracle_kde(&eps, 0.3, Some(&grid)).unwrap(), phi).unwrap()
            })
            .collect();
        median(&losses).unwrap()
    };
    assert!(loss(2000) < loss(250));
}

#[test]
fn simulated_mise_is_positive_and_reproducible() {
    let dgp = DgpSpec::default();
    let run = || {
        let data = generate_sample(&dgp, 1000, 4).unwrap();
        let fit = fit_residuals(&data, 0.15, &dgp.trim).unwrap();
        let grid = covering_grid(-4.0, 4.0, 0.3, 512).unwrap();
        mise(&fhat(&fit, 0.3, Some(&grid)).unwrap(), |e| dgp.errors.pdf(e)).unwrap()
    };
    let a = run();
    assert!(a > 0.0 && a.is_finite());
    assert_eq!(a.to_bits(), run().to_bits());
}

#[test]
fn residual_estimate_approaches_the_oracle() {
    let dgp = DgpSpec::default();
    let truth = |e: f64| dgp.errors.pdf(e);
    let excess = |n: usize| {
        let nf = n as f64;
        let b0 = 0.5 * nf.powf(-0.2);
        let b1 = 1.5 * nf.powf(-0.2);
        let grid = covering_grid(-4.0, 4.0, b1, 512).unwrap();
        let gaps: Vec<f64> = (1..=20u64)
            .map(|seed| {
                let data = generate_sample(&dgp, n, seed).unwrap();
                let fit = fit_residuals(&data, b0, &dgp.trim).unwrap();
                let est = mise(&fhat(&fit, b1, Some(&grid)).unwrap(), truth).unwrap();
                let eps = &data.truth().unwrap().eps;
                let oracle = mise(&oracle_kde(eps, b1, Some(&grid)).unwrap(), truth).unwrap();
                (est - oracle).abs()
            })
            .collect();
        median(&gaps).unwrap()
    };
    let gaps: Vec<f64> = [250, 1000, 2000].iter().map(|&n| excess(n)).collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
}

#[test]
fn triweight_curve_also_has_unit_mass() {
    let values = [0.3, -1.2, 0.9, 2.5];
    let grid = covering_grid(-3.0, 4.0, 0.4, 64).unwrap();
    let c = kde(&values, 0.4, &grid, UnivariateKernel::Triweight).unwrap();
    assert!((c.mass() - 1.0).abs() < 1e-6);
}
