//! Analytic properties of the HTD curve.
//!
//! Over a step of `δ` in the tanh argument, the HTD envelope
//! `1 - tanh(x)` shrinks by the factor
//!
//! ```text
//! r(x, δ) = (1 - tanh(x + δ)) / (1 - tanh x) = (e^{2x} + 1) / (e^{2x + 2δ} + 1)
//! ```
//!
//! which tends to 1 for `x → -∞` (flat start) and to `e^{-2δ}` for `x → +∞`
//! (exponential tail). The tanh argument crosses zero at progress
//! `|L| / (|L| + U)`, splitting training into a flat part and a decaying part
//! whose lengths have ratio `R = |L| / U`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::ScheduleSpec;

/// Largest `|x|` for which the expanded exponential form is evaluated.
pub const IDENTITY_MAX_ABS_X: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatioQuery {
    pub x: f64,
    pub delta: f64,
}

impl RatioQuery {
    pub fn new(x: f64, delta: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("x must be finite, got {x}")));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::Domain(format!(
                "delta must be positive, got {delta}"
            )));
        }
        Ok(Self { x, delta })
    }
}

/// `r(x, δ)` via the closed form `(e^{2x}+1)/(e^{2x+2δ}+1)`.
///
/// For `x > 0` numerator and denominator are divided by `e^{2x}`, giving
/// `e^{-2δ} (1 + e^{-2x}) / (1 + e^{-2x-2δ})`, which never overflows and
/// does not inherit the rounding of a large exponent argument.
pub fn decreasing_ratio(q: RatioQuery) -> f64 {
    let a = 2.0 * q.x;
    let b = 2.0 * q.delta;
    if a > 0.0 {
        (-b).exp() * (1.0 + (-a).exp()) / (1.0 + (-a - b).exp())
    } else {
        (a.exp() + 1.0) / ((a + b).exp() + 1.0)
    }
}

/// Relative gap between two algebraic forms of `r(x, δ)`: the definition with
/// each `1 - tanh y` expanded to `2e^{-y} / (e^y + e^{-y})`, and the reduced
/// closed form.
pub fn ratio_identity_check(q: RatioQuery) -> Result<f64> {
    if q.x.abs() > IDENTITY_MAX_ABS_X {
        return Err(Error::Domain(format!(
            "|x| = {} exceeds {IDENTITY_MAX_ABS_X}; the expanded form is not representable",
            q.x.abs()
        )));
    }
    let (x, d) = (q.x, q.delta);
    let one_minus_tanh = |y: f64| 2.0 * (-y).exp() / (y.exp() + (-y).exp());
    let numerator = one_minus_tanh(x + d);
    let denominator = one_minus_tanh(x);
    if numerator == 0.0 || denominator == 0.0 || !numerator.is_finite() || !denominator.is_finite()
    {
        return Err(Error::Domain(format!(
            "expanded form degenerates at x = {x}, delta = {d}"
        )));
    }
    let expanded = numerator / denominator;
    let closed = decreasing_ratio(q);
    Ok((expanded - closed).abs() / closed)
}

fn check_bounds(lower: f64, upper: f64) -> Result<()> {
    if lower.is_finite() && lower <= 0.0 && upper.is_finite() && upper > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "need L <= 0 < U, got L = {lower}, U = {upper}"
        )))
    }
}

/// Progress fraction `|L| / (|L| + U)` at which the tanh argument crosses zero.
pub fn inflection_fraction(lower: f64, upper: f64) -> Result<f64> {
    check_bounds(lower, upper)?;
    Ok(lower.abs() / (lower.abs() + upper))
}

/// `R = |L| / |U|`.
pub fn ratio_r(lower: f64, upper: f64) -> Result<f64> {
    check_bounds(lower, upper)?;
    Ok(lower.abs() / upper.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProximityReport {
    pub grid_points: usize,
    pub max_abs_diff: f64,
    /// `max_abs_diff / (lr_max - lr_min)`.
    pub relative_diff: f64,
    pub argmax_progress: f64,
}

impl ProximityReport {
    pub const CSV_HEADER: &'static str = "grid_points,max_abs_diff,relative_diff,argmax_progress";

    pub fn csv_row(&self) -> String {
        use crate::format::sig10;
        format!(
            "{},{},{},{}",
            self.grid_points,
            sig10(self.max_abs_diff),
            sig10(self.relative_diff),
            sig10(self.argmax_progress)
        )
    }
}

/// Sup-norm distance between two bounded schedules on `grid_points`
/// equispaced progress fractions in `[0, 1]`. Ties keep the earliest point.
pub fn sup_difference(
    a: &ScheduleSpec,
    b: &ScheduleSpec,
    grid_points: usize,
) -> Result<ProximityReport> {
    if grid_points < 2 {
        return Err(Error::Config(format!(
            "grid needs at least 2 points, got {grid_points}"
        )));
    }
    let (range_a, range_b) = match (a.rate_range(), b.rate_range()) {
        (Some(ra), Some(rb)) => (ra, rb),
        _ => {
            return Err(Error::Config(
                "sup_difference compares cosine and htd schedules only".into(),
            ))
        }
    };
    if range_a != range_b || a.horizon() != b.horizon() {
        return Err(Error::Config(format!(
            "schedules disagree on (lr_min, lr_max, horizon): {:?}/{:?} vs {:?}/{:?}",
            range_a,
            a.horizon(),
            range_b,
            b.horizon()
        )));
    }
    let last = (grid_points - 1) as f64;
    let mut max_abs_diff = 0.0;
    let mut argmax_progress = 0.0;
    for i in 0..grid_points {
        let s = i as f64 / last;
        let d = (a.evaluate_fraction(s)? - b.evaluate_fraction(s)?).abs();
        if d > max_abs_diff {
            max_abs_diff = d;
            argmax_progress = s;
        }
    }
    let (lr_min, lr_max) = range_a;
    Ok(ProximityReport {
        grid_points,
        max_abs_diff,
        relative_diff: max_abs_diff / (lr_max - lr_min),
        argmax_progress,
    })
}
