//! Seed-deterministic training runs and hyperparameter sweeps.
//!
//! Seeds: a run with seed `s` draws its train/test split from
//! `derive_seed(s, 0)` and the batch order of epoch `k` from
//! `derive_seed(s, 1 + k)`. Weight init uses the network's own seed and blob
//! generation the dataset's. Repeat `i` of a sweep adds `i` to both the run
//! seed and the network seed; the dataset is shared by all repeats.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::sig10;
use crate::idx::load_idx;
use crate::model::{init_he, make_blobs, Dataset, NetworkSpec};
use crate::optimizer::{sgd_step, OptimizerConfig, VelocityState};
use crate::rng::{derive_seed, SplitMix64};
use crate::schedule::ScheduleSpec;

const SPLIT_STREAM: u64 = 0;
const EPOCH_STREAM_BASE: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobParams {
    pub n_per_class: usize,
    pub n_classes: usize,
    pub n_features: usize,
    pub spread: f64,
    pub seed: u64,
}

/// IDX file pairs; their own train/test partition is used as-is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdxSource {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
    /// Standardize pixels with the training set's mean and std.
    #[serde(default)]
    pub normalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Blobs(BlobParams),
    Idx(IdxSource),
}

/// What the schedule's progress index counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgressUnit {
    /// `t` is the epoch, `T = epochs`.
    #[default]
    Epoch,
    /// `t` is the global step, `T = epochs * batches_per_epoch`.
    Iteration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schedule: ScheduleSpec,
    pub optimizer: OptimizerConfig,
    pub network: NetworkSpec,
    pub dataset: DatasetSource,
    pub epochs: u32,
    pub batch_size: usize,
    pub seed: u64,
    /// Share of blob samples used for training; ignored for IDX data.
    pub train_fraction: f64,
    #[serde(default)]
    pub progress: ProgressUnit,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Checks everything that does not need the data loaded.
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.optimizer.validate()?;
        self.network.validate()?;
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.progress == ProgressUnit::Epoch {
            if let Some(h) = self.schedule.horizon() {
                if h != self.epochs {
                    return Err(Error::Config(format!(
                        "schedule horizon {h} does not match epochs {}",
                        self.epochs
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One row of training output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub epoch: u32,
    /// Rate of the epoch's first step (the whole epoch's rate in epoch mode).
    pub lr: f64,
    /// Sample-weighted mean of the minibatch losses seen during the epoch.
    pub train_loss: f64,
    pub train_error: f64,
    pub test_error: f64,
}

pub const METRICS_CSV_HEADER: &str = "epoch,lr,train_loss,train_error,test_error";

pub fn metrics_csv(records: &[MetricsRecord]) -> String {
    let mut out = format!("{METRICS_CSV_HEADER}\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.epoch,
            sig10(r.lr),
            sig10(r.train_loss),
            sig10(r.train_error),
            sig10(r.test_error)
        );
    }
    out
}

/// Train and test sets for a config.
pub fn load_split(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    match &cfg.dataset {
        DatasetSource::Blobs(p) => {
            let data = make_blobs(p.n_per_class, p.n_classes, p.n_features, p.spread, p.seed)?;
            let n = data.len();
            if n < 2 {
                return Err(Error::Config("need at least 2 samples to split".into()));
            }
            let mut order: Vec<usize> = (0..n).collect();
            SplitMix64::new(derive_seed(cfg.seed, SPLIT_STREAM)).shuffle(&mut order);
            let n_train = ((cfg.train_fraction * n as f64).round() as usize).clamp(1, n - 1);
            Ok((
                data.select(&order[..n_train]),
                data.select(&order[n_train..]),
            ))
        }
        DatasetSource::Idx(src) => {
            let mut train = load_idx(&src.train_images, &src.train_labels, false)?;
            let mut test = load_idx(&src.test_images, &src.test_labels, false)?;
            if train.n_features() != test.n_features() {
                return Err(Error::Config(format!(
                    "train images have {} pixels, test images {}",
                    train.n_features(),
                    test.n_features()
                )));
            }
            if src.normalize {
                let (mean, std) = train.value_stats();
                train.standardize(mean, std);
                test.standardize(mean, std);
            }
            let classes = train.n_classes().max(test.n_classes());
            train.widen_classes(classes);
            test.widen_classes(classes);
            Ok((train, test))
        }
    }
}

/// Runs one training experiment and returns one record per epoch.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<MetricsRecord>> {
    cfg.validate()?;
    let (train, test) = load_split(cfg)?;
    run_on(cfg, &train, &test)
}

/// Like [`run_experiment`] with the data already in memory.
pub fn run_on(
    cfg: &ExperimentConfig,
    train: &Dataset,
    test: &Dataset,
) -> Result<Vec<MetricsRecord>> {
    cfg.validate()?;
    if cfg.batch_size > train.len() {
        return Err(Error::Config(format!(
            "batch_size {} exceeds training set size {}",
            cfg.batch_size,
            train.len()
        )));
    }
    if train.n_features() != cfg.network.input_size() {
        return Err(Error::Config(format!(
            "data has {} features, network input is {}",
            train.n_features(),
            cfg.network.input_size()
        )));
    }
    if train.n_classes().max(test.n_classes()) > cfg.network.output_size() {
        return Err(Error::Config(format!(
            "data has {} classes, network outputs {}",
            train.n_classes().max(test.n_classes()),
            cfg.network.output_size()
        )));
    }

    let batches_per_epoch = train.len().div_ceil(cfg.batch_size);
    let horizon = match cfg.progress {
        ProgressUnit::Epoch => cfg.epochs,
        ProgressUnit::Iteration => {
            let steps = cfg.epochs as u64 * batches_per_epoch as u64;
            u32::try_from(steps)
                .map_err(|_| Error::Config(format!("{steps} iterations overflow the horizon")))?
        }
    };
    if let Some(h) = cfg.schedule.horizon() {
        if h != horizon {
            return Err(Error::Config(format!(
                "schedule horizon {h} does not match run horizon {horizon}"
            )));
        }
    }

    let mut net = init_he(&cfg.network)?;
    let mut velocity = VelocityState::zeros(net.params.len());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut records = Vec::with_capacity(cfg.epochs as usize);

    for epoch in 0..cfg.epochs {
        let step_of = |batch: usize| match cfg.progress {
            ProgressUnit::Epoch => epoch,
            ProgressUnit::Iteration => epoch * batches_per_epoch as u32 + batch as u32,
        };
        let epoch_lr = cfg.schedule.evaluate(step_of(0), horizon)?;

        order.sort_unstable();
        SplitMix64::new(derive_seed(cfg.seed, EPOCH_STREAM_BASE + epoch as u64))
            .shuffle(&mut order);

        let mut loss_sum = 0.0;
        for (b, rows) in order.chunks(cfg.batch_size).enumerate() {
            let lr = cfg
                .schedule
                .evaluate(step_of(b), horizon)
                .map_err(|e| e.in_batch(epoch, b))?;
            let (loss, grads) = net
                .forward_loss(train, rows)
                .map_err(|e| e.in_batch(epoch, b))?;
            sgd_step(&mut net.params, &grads, lr, &cfg.optimizer, &mut velocity)
                .map_err(|e| e.in_batch(epoch, b))?;
            loss_sum += loss * rows.len() as f64;
        }

        records.push(MetricsRecord {
            epoch,
            lr: epoch_lr,
            train_loss: loss_sum / train.len() as f64,
            train_error: net.evaluate_error(train)?,
            test_error: net.evaluate_error(test)?,
        });
    }
    Ok(records)
}

/// StepDecay `{(0, high), (S1, low)}` with integer `S1 + S2 = epochs` and
/// `S1 / S2` equal to `ratio` within 1e-9.
pub fn step_schedule_from_ratio(
    ratio: f64,
    epochs: u32,
    high: f64,
    low: f64,
) -> Result<ScheduleSpec> {
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(Error::Config(format!(
            "ratio must be positive, got {ratio}"
        )));
    }
    let infeasible = |nearest| Error::InfeasibleRatio {
        ratio,
        epochs,
        nearest,
    };
    if epochs < 2 {
        return Err(infeasible(Vec::new()));
    }
    let split = |s1: u32| s1 as f64 / (epochs - s1) as f64;
    let exact = ratio * epochs as f64 / (1.0 + ratio);
    let below = (exact.floor() as u32).clamp(1, epochs - 1);
    let above = (exact.ceil() as u32).clamp(1, epochs - 1);
    for s1 in [below, above] {
        if (split(s1) - ratio).abs() <= 1e-9 {
            return ScheduleSpec::step_decay(&[(0, high), (s1, low)]);
        }
    }
    let mut nearest = vec![split(below)];
    if above != below {
        nearest.push(split(above));
    }
    Err(infeasible(nearest))
}

fn default_high() -> f64 {
    0.1
}

fn default_low() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepKind {
    /// Two-stage step decay: `high` for S1 epochs, then `low` for S2.
    StepRatio {
        #[serde(default = "default_high")]
        high: f64,
        #[serde(default = "default_low")]
        low: f64,
    },
    /// HTD with fixed `upper` and `lower = -R * upper`; lr range and horizon
    /// come from the base schedule, which must be cosine or HTD.
    #[serde(rename = "htd_r")]
    HtdR { upper: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: ExperimentConfig,
    pub sweep: SweepKind,
    pub values: Vec<f64>,
    pub repeats: u32,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("sweep config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep needs at least one value".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be positive".into()));
        }
        if let Some(v) = self.values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Config(format!(
                "sweep values must be positive, got {v}"
            )));
        }
        self.base.validate()
    }

    /// The schedule for one sweep value.
    pub fn schedule_for(&self, value: f64) -> Result<ScheduleSpec> {
        match self.sweep {
            SweepKind::StepRatio { high, low } => {
                step_schedule_from_ratio(value, self.base.epochs, high, low)
            }
            SweepKind::HtdR { upper } => {
                let (lr_min, lr_max) = self.base.schedule.rate_range().ok_or_else(|| {
                    Error::Config("htd_r sweep needs a cosine or htd base schedule".into())
                })?;
                let horizon = self.base.schedule.horizon().unwrap_or(self.base.epochs);
                ScheduleSpec::htd(-value * upper, upper, lr_min, lr_max, horizon)
            }
        }
    }

    /// The full config of repeat `repeat` for `value`.
    pub fn experiment_for(&self, value: f64, repeat: u32) -> Result<ExperimentConfig> {
        let mut cfg = self.base.clone();
        cfg.schedule = self.schedule_for(value)?;
        cfg.seed = cfg.seed.wrapping_add(repeat as u64);
        cfg.network.seed = cfg.network.seed.wrapping_add(repeat as u64);
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    /// HTD bounds; `None` for step-ratio sweeps.
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub mean_test_error: f64,
    pub median_test_error: f64,
    /// Final-epoch test error of each repeat, in repeat order.
    pub test_errors: Vec<f64>,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Runs every (value, repeat) pair, in parallel, and aggregates the final
/// test errors. Rows follow the order of `cfg.values`.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let jobs = cfg
        .values
        .iter()
        .flat_map(|&v| (0..cfg.repeats).map(move |r| (v, r)))
        .map(|(v, r)| cfg.experiment_for(v, r))
        .collect::<Result<Vec<_>>>()?;

    // Every repeat shares the dataset, so load it once.
    let (train, test) = load_split(&cfg.base)?;
    let finals = jobs
        .par_iter()
        .map(|job| {
            let records = run_on(job, &train, &test)?;
            Ok(records.last().map_or(f64::NAN, |r| r.test_error))
        })
        .collect::<Result<Vec<f64>>>()?;

    Ok(cfg
        .values
        .iter()
        .zip(finals.chunks(cfg.repeats as usize))
        .map(|(&value, errors)| {
            let (lower, upper) = match cfg.sweep {
                SweepKind::StepRatio { .. } => (None, None),
                SweepKind::HtdR { upper } => (Some(-value * upper), Some(upper)),
            };
            SweepRow {
                value,
                lower,
                upper,
                mean_test_error: mean(errors),
                median_test_error: median(errors),
                test_errors: errors.to_vec(),
            }
        })
        .collect())
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let repeats = rows.first().map_or(0, |r| r.test_errors.len());
    let mut out = String::from("value,L,U,mean_test_error,median_test_error");
    for i in 0..repeats {
        let _ = write!(out, ",repeat_{i}");
    }
    out.push('\n');
    let opt = |v: Option<f64>| v.map(sig10).unwrap_or_default();
    for r in rows {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            sig10(r.value),
            opt(r.lower),
            opt(r.upper),
            sig10(r.mean_test_error),
            sig10(r.median_test_error)
        );
        for e in &r.test_errors {
            let _ = write!(out, ",{}", sig10(*e));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_to_step_schedule() {
        let s = step_schedule_from_ratio(0.25, 200, 0.1, 0.01).unwrap();
        assert_eq!(
            s,
            ScheduleSpec::step_decay(&[(0, 0.1), (40, 0.01)]).unwrap()
        );
        let s = step_schedule_from_ratio(4.0, 200, 0.1, 0.01).unwrap();
        assert_eq!(
            s,
            ScheduleSpec::step_decay(&[(0, 0.1), (160, 0.01)]).unwrap()
        );
        let s = step_schedule_from_ratio(1.0, 8, 0.1, 0.01).unwrap();
        assert_eq!(s, ScheduleSpec::step_decay(&[(0, 0.1), (4, 0.01)]).unwrap());
    }

    #[test]
    fn infeasible_ratio_names_neighbors() {
        match step_schedule_from_ratio(1.0, 7, 0.1, 0.01) {
            Err(Error::InfeasibleRatio { nearest, .. }) => {
                assert_eq!(nearest.len(), 2);
                assert!((nearest[0] - 0.75).abs() < 1e-15);
                assert!((nearest[1] - 4.0 / 3.0).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(step_schedule_from_ratio(0.25, 8, 0.1, 0.01).is_err());
        assert!(step_schedule_from_ratio(1.0, 1, 0.1, 0.01).is_err());
        assert!(step_schedule_from_ratio(-1.0, 10, 0.1, 0.01).is_err());
    }

    #[test]
    fn median_and_mean() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(mean(&[1.0, 2.0, 3.0, 4.0]), 2.5);
    }

    #[test]
    fn sweep_csv_layout() {
        let rows = vec![SweepRow {
            value: 2.0,
            lower: Some(-6.0),
            upper: Some(3.0),
            mean_test_error: 0.125,
            median_test_error: 0.125,
            test_errors: vec![0.1, 0.15],
        }];
        assert_eq!(
            sweep_csv(&rows),
            "value,L,U,mean_test_error,median_test_error,repeat_0,repeat_1\n2,-6,3,0.125,0.125,0.1,0.15\n"
        );
    }
}
