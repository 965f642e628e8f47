//! Power-law bandwidth schedules and their rate conditions.
//!
//! For `b0 = c n^-a` and `b1 = c n^-gamma` in dimension `d`, with
//! `d* = max(d + 2, 2d)`:
//!
//! * regression bandwidth: `n b0^d* / ln n -> inf` and `ln(1/b0) / ln ln n -> inf`,
//!   i.e. `0 < a < 1/d*`;
//! * density bandwidth: `n^(d+8) b1^(7(d+4)) -> inf` with `b1 -> 0`,
//!   i.e. `0 < gamma < (d+8) / (7(d+4))`.
//!
//! Schedules that are not power laws can only be checked numerically, by
//! watching the same expressions grow over a range of sample sizes.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::fmt_human;
use crate::error::{Error, Result};

pub const REGRESSION_CONDITION: &str = "A8";
pub const DENSITY_CONDITION: &str = "A9";
pub const TREND_SIZES: [f64; 4] = [1e3, 1e4, 1e5, 1e6];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSchedule {
    pub c: f64,
    pub a: f64,
}

impl PowerSchedule {
    pub fn new(c: f64, a: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) || !a.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "schedule needs c > 0 and a finite exponent, got c={c}, a={a}"
            )));
        }
        Ok(Self { c, a })
    }

    pub fn value(&self, n: f64) -> f64 {
        self.c * n.powf(-self.a)
    }
}

pub fn d_star(d: usize) -> Result<usize> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be >= 1".into()));
    }
    Ok((d + 2).max(2 * d))
}

/// Largest admissible regression exponent, `1/d*` (excluded).
pub fn regression_threshold(d: usize) -> Result<f64> {
    Ok(1.0 / d_star(d)? as f64)
}

/// Largest admissible density exponent, `(d+8)/(7(d+4))` (excluded).
pub fn density_threshold(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be >= 1".into()));
    }
    Ok((d + 8) as f64 / (7 * (d + 4)) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub name: String,
    pub satisfied: bool,
    /// Binding inequality, human readable.
    pub inequality: String,
    /// Distance to the nearest violated bound; negative when violated.
    pub margin: f64,
    /// Finite-n numeric verdict rather than an exact one.
    pub heuristic: bool,
}

pub fn validate_a8(schedule: &PowerSchedule, d: usize) -> Result<ConditionCheck> {
    let ds = d_star(d)?;
    let upper = regression_threshold(d)?;
    let a = schedule.a;
    Ok(ConditionCheck {
        name: REGRESSION_CONDITION.into(),
        satisfied: a > 0.0 && a < upper,
        inequality: format!(
            "0 < a < 1/d* = 1/{ds} ({upper:.6}); a > 0 also gives ln(1/b0)/ln ln n -> inf; a = {a}"
        ),
        margin: a.min(upper - a),
        heuristic: false,
    })
}

pub fn validate_a9(schedule: &PowerSchedule, d: usize) -> Result<ConditionCheck> {
    let upper = density_threshold(d)?;
    let g = schedule.a;
    Ok(ConditionCheck {
        name: DENSITY_CONDITION.into(),
        satisfied: g > 0.0 && g < upper,
        inequality: format!(
            "0 < gamma < (d+8)/(7(d+4)) = {}/{} ({upper:.6}); gamma = {g}",
            d + 8,
            7 * (d + 4)
        ),
        margin: g.min(upper - g),
        heuristic: false,
    })
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[0] < w[1])
}

/// Numeric check for arbitrary schedules: the condition expressions (on a log
/// scale) must grow strictly over `TREND_SIZES`.
pub fn trend_check<B0, B1>(b0: B0, b1: B1, d: usize) -> Result<Vec<ConditionCheck>>
where
    B0: Fn(f64) -> f64,
    B1: Fn(f64) -> f64,
{
    let ds = d_star(d)? as f64;
    let df = d as f64;
    let first: Vec<f64> = TREND_SIZES
        .iter()
        .map(|&n| n.ln() + ds * b0(n).ln() - n.ln().ln())
        .collect();
    let second: Vec<f64> = TREND_SIZES
        .iter()
        .map(|&n| (1.0 / b0(n)).ln() / n.ln().ln())
        .collect();
    let density: Vec<f64> = TREND_SIZES
        .iter()
        .map(|&n| (df + 8.0) * n.ln() + 7.0 * (df + 4.0) * b1(n).ln())
        .collect();
    let shrinking = TREND_SIZES.iter().map(|&n| -b1(n)).collect::<Vec<_>>();
    let check = |name: &str, text: String, values: &[f64]| ConditionCheck {
        name: name.into(),
        satisfied: strictly_increasing(values),
        inequality: text,
        margin: values.last().unwrap_or(&f64::NAN) - values.first().unwrap_or(&f64::NAN),
        heuristic: true,
    };
    let a8 = check(
        REGRESSION_CONDITION,
        "n b0^d*/ln n and ln(1/b0)/ln ln n increasing over n = 1e3..1e6".into(),
        &first,
    );
    let a8_log = check(REGRESSION_CONDITION, String::new(), &second);
    let a9 = check(
        DENSITY_CONDITION,
        "n^(d+8) b1^(7(d+4)) increasing and b1 decreasing over n = 1e3..1e6".into(),
        &density,
    );
    let a9_shrink = check(DENSITY_CONDITION, String::new(), &shrinking);
    Ok(vec![
        ConditionCheck {
            satisfied: a8.satisfied && a8_log.satisfied,
            margin: a8.margin.min(a8_log.margin),
            ..a8
        },
        ConditionCheck {
            satisfied: a9.satisfied && a9_shrink.satisfied,
            margin: a9.margin.min(a9_shrink.margin),
            ..a9
        },
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub d: usize,
    pub d_star: usize,
    pub conditions: Vec<ConditionCheck>,
}

impl AssumptionReport {
    pub fn for_power_laws(d: usize, b0: &PowerSchedule, b1: &PowerSchedule) -> Result<Self> {
        Ok(Self {
            d,
            d_star: d_star(d)?,
            conditions: vec![validate_a8(b0, d)?, validate_a9(b1, d)?],
        })
    }

    pub fn all_satisfied(&self) -> bool {
        self.conditions.iter().all(|c| c.satisfied)
    }

    pub fn violations(&self) -> impl Iterator<Item = &ConditionCheck> {
        self.conditions.iter().filter(|c| !c.satisfied)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dimension d = {}, d* = {}", self.d, self.d_star);
        for c in &self.conditions {
            let _ = writeln!(
                s,
                "{:<4} {:<5} margin {:>10}{}  {}",
                c.name,
                if c.satisfied { "OK" } else { "FAIL" },
                fmt_human(c.margin),
                if c.heuristic { " (finite-n heuristic)" } else { "" },
                c.inequality
            );
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
