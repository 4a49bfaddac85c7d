//! Closed-form learning-rate schedules.
//!
//! Every schedule is a pure function of an integer progress index `t` in
//! `[0, T]`. Progress is usually the epoch, but the harness can also drive a
//! schedule per iteration with `T = epochs * batches_per_epoch`.
//!
//! Step decay milestones are 0-based: a milestone `(start_epoch, rate)`
//! applies from `start_epoch` onward. The classic ResNet table
//! "0.1 for 0 < e ≤ 81, 0.01 for 81 < e ≤ 122, 0.001 for 122 < e ≤ 200" with
//! 1-based epochs `e` becomes milestones `(0, 0.1), (81, 0.01), (122, 0.001)`
//! with `t = e - 1`.

use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::sig10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Milestone {
    pub start_epoch: u32,
    pub rate: f64,
}

/// One learning-rate schedule with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    StepDecay {
        milestones: Vec<Milestone>,
    },
    ExponentialDecay {
        lr0: f64,
        lambda: f64,
    },
    TwoStageExponential {
        lr0: f64,
        lambda1: f64,
        lambda2: f64,
        switch_epoch: u32,
    },
    Cosine {
        lr_min: f64,
        lr_max: f64,
        horizon: u32,
    },
    /// `lr_min + (lr_max - lr_min)/2 * (1 - tanh(L(1 - t/T) + U t/T))`
    Htd {
        lower: f64,
        upper: f64,
        lr_min: f64,
        lr_max: f64,
        horizon: u32,
    },
    Constant {
        rate: f64,
    },
}

impl ScheduleSpec {
    pub fn step_decay(milestones: &[(u32, f64)]) -> Result<Self> {
        let spec = ScheduleSpec::StepDecay {
            milestones: milestones
                .iter()
                .map(|&(start_epoch, rate)| Milestone { start_epoch, rate })
                .collect(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn exponential(lr0: f64, lambda: f64) -> Result<Self> {
        let spec = ScheduleSpec::ExponentialDecay { lr0, lambda };
        spec.validate()?;
        Ok(spec)
    }

    pub fn two_stage(lr0: f64, lambda1: f64, lambda2: f64, switch_epoch: u32) -> Result<Self> {
        let spec = ScheduleSpec::TwoStageExponential {
            lr0,
            lambda1,
            lambda2,
            switch_epoch,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn cosine(lr_min: f64, lr_max: f64, horizon: u32) -> Result<Self> {
        let spec = ScheduleSpec::Cosine {
            lr_min,
            lr_max,
            horizon,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn htd(lower: f64, upper: f64, lr_min: f64, lr_max: f64, horizon: u32) -> Result<Self> {
        let spec = ScheduleSpec::Htd {
            lower,
            upper,
            lr_min,
            lr_max,
            horizon,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn constant(rate: f64) -> Result<Self> {
        let spec = ScheduleSpec::Constant { rate };
        spec.validate()?;
        Ok(spec)
    }

    /// Short lowercase name of the variant, as used by the argument grammar.
    pub fn kind(&self) -> &'static str {
        match self {
            ScheduleSpec::StepDecay { .. } => "step",
            ScheduleSpec::ExponentialDecay { .. } => "exp",
            ScheduleSpec::TwoStageExponential { .. } => "two-stage",
            ScheduleSpec::Cosine { .. } => "cosine",
            ScheduleSpec::Htd { .. } => "htd",
            ScheduleSpec::Constant { .. } => "constant",
        }
    }

    /// The horizon baked into horizon-dependent schedules.
    pub fn horizon(&self) -> Option<u32> {
        match *self {
            ScheduleSpec::Cosine { horizon, .. } | ScheduleSpec::Htd { horizon, .. } => {
                Some(horizon)
            }
            _ => None,
        }
    }

    /// `(lr_min, lr_max)` for the two bounded schedules.
    pub fn rate_range(&self) -> Option<(f64, f64)> {
        match *self {
            ScheduleSpec::Cosine { lr_min, lr_max, .. }
            | ScheduleSpec::Htd { lr_min, lr_max, .. } => Some((lr_min, lr_max)),
            _ => None,
        }
    }

    /// Returns a copy with the horizon replaced; a no-op for schedules without one.
    pub fn with_horizon(mut self, new_horizon: u32) -> Self {
        if let ScheduleSpec::Cosine { horizon, .. } | ScheduleSpec::Htd { horizon, .. } = &mut self
        {
            *horizon = new_horizon;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(name: &str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        }
        fn unit(name: &str, v: f64) -> Result<()> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
            }
        }
        fn bounds(lr_min: f64, lr_max: f64, horizon: u32) -> Result<()> {
            if !(lr_min.is_finite() && lr_min >= 0.0) {
                return Err(Error::Config(format!(
                    "lr_min must be non-negative, got {lr_min}"
                )));
            }
            positive("lr_max", lr_max)?;
            if lr_min >= lr_max {
                return Err(Error::Config(format!(
                    "lr_min ({lr_min}) must be below lr_max ({lr_max})"
                )));
            }
            if horizon == 0 {
                return Err(Error::Config("horizon must be at least 1".into()));
            }
            Ok(())
        }

        match self {
            ScheduleSpec::StepDecay { milestones } => {
                let first = milestones.first().ok_or_else(|| {
                    Error::Config("step decay needs at least one milestone".into())
                })?;
                if first.start_epoch != 0 {
                    return Err(Error::Config(format!(
                        "first milestone must start at epoch 0, got {}",
                        first.start_epoch
                    )));
                }
                for pair in milestones.windows(2) {
                    if pair[1].start_epoch <= pair[0].start_epoch {
                        return Err(Error::Config(format!(
                            "milestones must be strictly increasing: {} then {}",
                            pair[0].start_epoch, pair[1].start_epoch
                        )));
                    }
                }
                for m in milestones {
                    positive("milestone rate", m.rate)?;
                }
                Ok(())
            }
            ScheduleSpec::ExponentialDecay { lr0, lambda } => {
                positive("lr0", *lr0)?;
                unit("lambda", *lambda)
            }
            ScheduleSpec::TwoStageExponential {
                lr0,
                lambda1,
                lambda2,
                switch_epoch,
            } => {
                positive("lr0", *lr0)?;
                unit("lambda1", *lambda1)?;
                unit("lambda2", *lambda2)?;
                if *switch_epoch == 0 {
                    return Err(Error::Config("switch_epoch must be positive".into()));
                }
                Ok(())
            }
            ScheduleSpec::Cosine {
                lr_min,
                lr_max,
                horizon,
            } => bounds(*lr_min, *lr_max, *horizon),
            ScheduleSpec::Htd {
                lower,
                upper,
                lr_min,
                lr_max,
                horizon,
            } => {
                if !(lower.is_finite() && *lower <= 0.0) {
                    return Err(Error::Config(format!("L must be <= 0, got {lower}")));
                }
                positive("U", *upper)?;
                bounds(*lr_min, *lr_max, *horizon)
            }
            ScheduleSpec::Constant { rate } => positive("rate", *rate),
        }
    }

    /// Learning rate at progress `t` of `horizon`.
    pub fn evaluate(&self, t: u32, horizon: u32) -> Result<f64> {
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if t > horizon {
            return Err(Error::Domain(format!(
                "progress {t} exceeds horizon {horizon}"
            )));
        }
        if let Some(own) = self.horizon() {
            if own != horizon {
                return Err(Error::Config(format!(
                    "{} schedule was built for horizon {own}, evaluated against {horizon}",
                    self.kind()
                )));
            }
        }
        Ok(match self {
            ScheduleSpec::StepDecay { milestones } => milestones
                .iter()
                .take_while(|m| m.start_epoch <= t)
                .last()
                .map(|m| m.rate)
                .ok_or_else(|| Error::Config("step decay needs at least one milestone".into()))?,
            ScheduleSpec::ExponentialDecay { lr0, lambda } => lr0 * lambda.powf(t as f64),
            ScheduleSpec::TwoStageExponential {
                lr0,
                lambda1,
                lambda2,
                switch_epoch,
            } => two_stage_value(*lr0, *lambda1, *lambda2, *switch_epoch, t),
            ScheduleSpec::Cosine { .. } | ScheduleSpec::Htd { .. } => {
                self.bounded_value(t as f64 / horizon as f64)
            }
            ScheduleSpec::Constant { rate } => *rate,
        })
    }

    /// Real-valued progress variant for Cosine and HTD: substitutes
    /// `fraction = t/T` directly into the closed form.
    pub fn evaluate_fraction(&self, fraction: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::Domain(format!(
                "progress fraction {fraction} outside [0, 1]"
            )));
        }
        match self {
            ScheduleSpec::Cosine { .. } | ScheduleSpec::Htd { .. } => {
                Ok(self.bounded_value(fraction))
            }
            other => Err(Error::Config(format!(
                "{} schedule has no real-valued progress form",
                other.kind()
            ))),
        }
    }

    // Written as a convex combination of lr_min and lr_max so the endpoints
    // come out exact.
    fn bounded_value(&self, fraction: f64) -> f64 {
        let (lr_min, lr_max, weight) = match *self {
            ScheduleSpec::Cosine { lr_min, lr_max, .. } => (
                lr_min,
                lr_max,
                0.5 * (1.0 + (std::f64::consts::PI * fraction).cos()),
            ),
            ScheduleSpec::Htd {
                lower,
                upper,
                lr_min,
                lr_max,
                ..
            } => {
                let arg = lower * (1.0 - fraction) + upper * fraction;
                (lr_min, lr_max, 0.5 * (1.0 - arg.tanh()))
            }
            _ => unreachable!("bounded_value on unbounded schedule"),
        };
        lr_min * (1.0 - weight) + lr_max * weight
    }

    /// Samples the schedule at every integer `t` in `[0, horizon]`.
    pub fn curve(&self, horizon: u32) -> Result<LearningRateCurve> {
        let samples = (0..=horizon)
            .map(|t| {
                Ok(CurvePoint {
                    t,
                    lr: self.evaluate(t, horizon)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LearningRateCurve { horizon, samples })
    }

    /// The rate at `t = horizon`.
    pub fn final_rate(&self, horizon: u32) -> Result<f64> {
        self.evaluate(horizon, horizon)
    }

    /// Parses the `<kind>:<comma-separated params>` grammar.
    ///
    /// | kind | params |
    /// |------|--------|
    /// | `step` | `start:rate,start:rate,...` |
    /// | `exp` | `lr0,lambda` |
    /// | `two-stage` | `lr0,lambda1,lambda2,switch_epoch` |
    /// | `cosine` | `lr_min,lr_max` |
    /// | `htd` | `L,U,lr_min,lr_max` |
    /// | `constant` | `rate` |
    ///
    /// `horizon` supplies T for `cosine` and `htd`.
    pub fn parse(text: &str, horizon: u32) -> Result<Self> {
        let (kind, params) = text.split_once(':').unwrap_or((text, ""));
        let numbers = |expected: usize| -> Result<Vec<f64>> {
            let values = params
                .split(',')
                .filter(|p| !p.trim().is_empty())
                .map(|p| {
                    p.trim().parse::<f64>().map_err(|_| {
                        Error::Config(format!("schedule `{text}`: `{p}` is not a number"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if values.len() != expected {
                return Err(Error::Config(format!(
                    "schedule `{text}`: {kind} takes {expected} parameters, got {}",
                    values.len()
                )));
            }
            Ok(values)
        };
        match kind.trim().to_ascii_lowercase().as_str() {
            "step" | "step_decay" => {
                let milestones = parse_milestones(params)?;
                Self::step_decay(&milestones)
            }
            "exp" | "exponential" | "exponential_decay" => {
                let v = numbers(2)?;
                Self::exponential(v[0], v[1])
            }
            "two-stage" | "two_stage" | "two_stage_exponential" => {
                let v = numbers(4)?;
                let switch = as_epoch(v[3], "switch_epoch")?;
                Self::two_stage(v[0], v[1], v[2], switch)
            }
            "cosine" | "cos" => {
                let v = numbers(2)?;
                Self::cosine(v[0], v[1], horizon)
            }
            "htd" => {
                let v = numbers(4)?;
                Self::htd(v[0], v[1], v[2], v[3], horizon)
            }
            "constant" | "const" => {
                let v = numbers(1)?;
                Self::constant(v[0])
            }
            other => Err(Error::Config(format!("unknown schedule kind `{other}`"))),
        }
    }
}

/// Parses `start:rate,start:rate,...`.
pub fn parse_milestones(text: &str) -> Result<Vec<(u32, f64)>> {
    text.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|pair| {
            let (start, rate) = pair
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("milestone `{pair}` is not start:rate")))?;
            let start = start
                .trim()
                .parse::<u32>()
                .map_err(|_| Error::Config(format!("milestone start `{start}` is not an epoch")))?;
            let rate = rate
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("milestone rate `{rate}` is not a number")))?;
            Ok((start, rate))
        })
        .collect()
}

fn as_epoch(v: f64, name: &str) -> Result<u32> {
    if v.fract() == 0.0 && v >= 0.0 && v <= u32::MAX as f64 {
        Ok(v as u32)
    } else {
        Err(Error::Config(format!(
            "{name} must be a whole number, got {v}"
        )))
    }
}

pub(crate) fn two_stage_value(lr0: f64, lambda1: f64, lambda2: f64, switch: u32, t: u32) -> f64 {
    if t <= switch {
        lr0 * lambda1.powf(t as f64)
    } else {
        lr0 * lambda1.powf(switch as f64) * lambda2.powf((t - switch) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: u32,
    pub lr: f64,
}

/// A schedule sampled at integer progress points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningRateCurve {
    pub horizon: u32,
    pub samples: Vec<CurvePoint>,
}

impl LearningRateCurve {
    /// CSV with header `t,lr`, rates at 10 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,lr\n");
        for p in &self.samples {
            let _ = writeln!(out, "{},{}", p.t, sig10(p.lr));
        }
        out
    }

    pub fn write_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }

    pub fn rates(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|p| p.lr)
    }
}
