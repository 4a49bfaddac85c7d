//! Learning-rate schedules centered on hyperbolic-tangent decay (HTD), plus
//! the pieces needed to study them: analytic checks on the HTD curve, a
//! Nesterov SGD optimizer, a small fully-connected classifier, an IDX loader
//! and a seed-deterministic experiment harness.
//!
//! ```
//! use htd_core::schedule::ScheduleSpec;
//!
//! let htd = ScheduleSpec::htd(-6.0, 3.0, 0.0, 0.1, 200).unwrap();
//! let lr = htd.evaluate(100, 200).unwrap();
//! assert!(lr > 0.0 && lr < 0.1);
//! ```

pub mod analysis;
pub mod api;
pub mod error;
pub mod format;
pub mod harness;
pub mod idx;
pub mod model;
pub mod optimizer;
pub mod rng;
pub mod schedule;

pub use error::{Error, Result};
