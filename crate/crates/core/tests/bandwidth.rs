use proptest::prelude::*;

use resdens::bandwidth::{
    d_star, density_threshold, regression_threshold, trend_check, validate_a8, validate_a9,
    AssumptionReport, PowerSchedule,
};

fn sched(a: f64) -> PowerSchedule {
    PowerSchedule::new(0.7, a).unwrap()
}

#[test]
fn verdicts() {
    assert!(validate_a8(&sched(0.2), 1).unwrap().satisfied);
    assert!(!validate_a8(&sched(1.0 / 3.0), 1).unwrap().satisfied);
    assert!(validate_a8(&sched(0.2), 2).unwrap().satisfied);
    assert!(validate_a9(&sched(0.2), 1).unwrap().satisfied);
    assert!(!validate_a9(&sched(9.0 / 35.0), 1).unwrap().satisfied);
    assert!(!validate_a9(&sched(0.24), 3).unwrap().satisfied);
    assert!((density_threshold(1).unwrap() - 0.2571).abs() < 1e-4);
    assert!((density_threshold(3).unwrap() - 0.2245).abs() < 1e-4);
}

#[test]
fn report_json_round_trip() {
    let r = AssumptionReport::for_power_laws(2, &sched(0.1), &sched(0.3)).unwrap();
    let text = r.to_json().unwrap();
    assert_eq!(serde_json::from_str::<AssumptionReport>(&text).unwrap(), r);
    assert_eq!(r.violations().count(), 1);
}

#[test]
fn power_laws_pass_the_trend_check_when_admissible() {
    let checks = trend_check(|n| sched(0.2).value(n), |n| sched(0.2).value(n), 1).unwrap();
    assert!(checks.iter().all(|c| c.satisfied && c.heuristic));
    let checks = trend_check(|n| sched(0.5).value(n), |n| sched(0.2).value(n), 1).unwrap();
    assert!(!checks[0].satisfied);
}

proptest! {
    #[test]
    fn effective_exponent(d in 1usize..50) {
        let ds = d_star(d).unwrap();
        prop_assert_eq!(ds, (d + 2).max(2 * d));
        prop_assert_eq!(ds, if d <= 2 { d + 2 } else { 2 * d });
    }

    #[test]
    fn admissible_region_is_a_lower_set(
        d in 1usize..6,
        a in 0.001f64..0.5,
        g in 0.001f64..0.5,
        sa in 0.01f64..1.0,
        sg in 0.01f64..1.0,
    ) {
        let ok = |a: f64, g: f64| {
            AssumptionReport::for_power_laws(d, &sched(a), &sched(g)).unwrap().all_satisfied()
        };
        if ok(a, g) {
            prop_assert!(ok(a * sa, g * sg));
        }
        prop_assert_eq!(ok(a, g), a < regression_threshold(d).unwrap() && g < density_threshold(d).unwrap());
    }
}
