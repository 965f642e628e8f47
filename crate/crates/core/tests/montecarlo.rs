use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use resdens::data::Dataset;
use resdens::decomposition::{conditional_moment, FrozenDesign};
use resdens::montecarlo::experiment::median;
use resdens::montecarlo::{
    fit_rate, run_rate_experiment, DgpSpec, ErrorLaw, ExperimentConfig, RateReport, Target,
};
use resdens::smoother::NwSmoother;
use resdens::Error;

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

fn small(target: Target, grid: Vec<f64>) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(target, grid);
    c.n = Some(300);
    c.replications = 20;
    c.seed = 77;
    c
}

#[test]
fn reports_do_not_depend_on_worker_count() {
    let configs = [
        small(Target::SmoothingBias, vec![0.1, 0.15, 0.2, 0.3]),
        small(Target::FitMoment4, vec![0.1, 0.15, 0.2, 0.3]),
        {
            let mut c = small(Target::TaylorSumVariance, vec![0.1, 0.2, 0.3, 0.4]);
            c.b0 = Some(0.2);
            c
        },
    ];
    for config in configs {
        let one: RateReport = in_pool(1, || run_rate_experiment(&config).unwrap());
        let four: RateReport = in_pool(4, || run_rate_experiment(&config).unwrap());
        assert_eq!(one.to_json().unwrap(), four.to_json().unwrap());
    }
}

proptest! {
    #[test]
    fn median_ignores_order(mut values in prop::collection::vec(-1e3f64..1e3, 1..50), seed in any::<u64>()) {
        let before = median(&values);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for k in (1..values.len()).rev() {
            values.swap(k, rng.random_range(0..=k));
        }
        prop_assert_eq!(before, median(&values));
    }
}

#[test]
fn rate_fit_examples() {
    let xs: Vec<f64> = (0..8).map(|k| 0.02 * 1.5f64.powi(k)).collect();
    let flat = fit_rate(&xs, &[3.0; 8]).unwrap();
    assert!(flat.slope.abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let noisy: Vec<f64> = xs.iter().map(|x| x * x * (1.0 + rng.random_range(-0.05..0.05))).collect();
    let s = fit_rate(&xs, &noisy).unwrap().slope;
    assert!((1.9..=2.1).contains(&s), "{s}");
    assert!(matches!(fit_rate(&xs, &[1.0, 2.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0]), Err(Error::LogDomainError { .. })));
}

#[test]
fn quadrature_targets_have_slope_two() {
    let mut bias = ExperimentConfig::new(Target::ExpectedBias, vec![0.05, 0.08, 0.12, 0.2]);
    bias.n = Some(1000);
    let r = run_rate_experiment(&bias).unwrap();
    assert!(r.pass && (r.slope.unwrap() - 2.0).abs() < 1e-6, "{}", r.summary_line());

    let mut design = ExperimentConfig::new(Target::DesignBias, vec![0.05, 0.08, 0.12, 0.2]);
    design.n = Some(1000);
    design.dgp.design = "truncated-normal".into();
    let r = run_rate_experiment(&design).unwrap();
    assert!((1.9..=2.1).contains(&r.slope.unwrap()), "{}", r.summary_line());
}

#[test]
fn density_fluctuation_stays_in_band() {
    let text = r#"
target = "design-noise"
grid = [500, 1000, 2000, 4000]
b0_c = 0.5
b0_a = 0.2
replications = 25
"#;
    let r = run_rate_experiment(&ExperimentConfig::parse(text).unwrap()).unwrap();
    assert!(r.pass, "{}", r.summary_line());
    assert!(r.ratio_spread <= 8.0);
    assert!(r.warnings.is_empty(), "{:?}", r.warnings);
}

#[test]
fn fourth_moment_follows_the_squared_bias_when_it_dominates() {
    // Conditional on an equispaced design the fitting error is the smoothing
    // bias plus noise; a small error scale puts the bias in charge.
    let n = 2000;
    let xs: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect();
    let m: Vec<f64> = xs.iter().map(|x| x * x).collect();
    let data = Dataset::with_truth(1, xs, m, vec![0.0; n]).unwrap();
    let dgp = DgpSpec {
        errors: ErrorLaw::Normal { sd: 2e-4 },
        ..DgpSpec::default()
    };
    let b0s = [0.08, 0.11, 0.15, 0.2];
    let sups: Vec<f64> = b0s
        .iter()
        .map(|&b0| {
            let smoother = NwSmoother::quadweight(&data, b0).unwrap();
            let design = FrozenDesign { smoother: &smoother, data: &data, trim: &dgp.trim };
            conditional_moment(&design, &dgp.error_source(3), 4, 50).unwrap().sup
        })
        .collect();
    let s = fit_rate(&b0s, &sups).unwrap().slope;
    assert!((7.0..=9.0).contains(&s), "{s}: {sups:?}");
}

#[test]
fn inadmissible_schedules_only_warn() {
    let text = r#"
target = "design-noise"
grid = [200, 400, 800, 1600]
b0_c = 0.5
b0_a = 0.5
replications = 20
"#;
    let r = run_rate_experiment(&ExperimentConfig::parse(text).unwrap()).unwrap();
    assert!(r.warnings.iter().any(|w| w.contains("A8")), "{:?}", r.warnings);
}

#[test]
fn mostly_degenerate_runs_abort() {
    let mut c = ExperimentConfig::new(Target::SmoothingBias, vec![0.001, 0.002, 0.003, 0.004]);
    c.n = Some(3);
    c.replications = 20;
    match run_rate_experiment(&c) {
        Err(Error::TooManyDegenerate { degenerate, total }) => assert!(degenerate * 10 > total),
        other => panic!("{other:?}"),
    }
}

#[test]
fn report_artifacts() {
    let mut c = small(Target::DesignBias, vec![0.05, 0.1, 0.15, 0.2]);
    c.dgp.design = "truncated-normal".into();
    let r = run_rate_experiment(&c).unwrap();
    let back: RateReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
    assert_eq!(back, r);
    let mut csv = Vec::new();
    r.write_points_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.starts_with("scale,n,b0,b1,statistic,envelope,ratio"));
}
